//! Asynchronous approximate best-response dynamics: schedules, step
//! execution, convergence detection and trace recording.
//!
//! The engine keeps per-receiver per-channel interference aggregates
//! incrementally. Results must stay within 1e-9 relative of full
//! recomputation; `paranoid` mode rebuilds the cache from scratch after every
//! step and exists to verify exactly that.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::NetworkRealization;
use crate::error::Result;
use crate::game::{self, RateVector, StrategyProfile};
use crate::seeds::{stream_rng, Stream};

/// Candidate-actor rule. Both built-ins are non-degenerate: outside an
/// equilibrium the candidate set always contains a deviator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulePolicy {
    AllPlayers,
    Deviators,
}

impl std::str::FromStr for SchedulePolicy {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "all" | "all_players" => Ok(SchedulePolicy::AllPlayers),
            "deviators" => Ok(SchedulePolicy::Deviators),
            other => Err(format!("unknown policy `{other}` (all|deviators)")),
        }
    }
}

/// The players eligible to act under the policy. Under `Deviators` the set is
/// empty exactly at an eps-PNE.
pub fn candidates(
    net: &NetworkRealization,
    profile: &StrategyProfile,
    eps: f64,
    policy: SchedulePolicy,
) -> Vec<usize> {
    match policy {
        SchedulePolicy::AllPlayers => (0..net.n_players()).collect(),
        SchedulePolicy::Deviators => (0..net.n_players())
            .filter(|&n| {
                let u = game::utilities_row(net, profile, n);
                let max = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                u[profile.channel(n)] + eps < max
            })
            .collect(),
    }
}

/// One recorded step of the dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub actor: usize,
    pub old_channel: usize,
    pub new_channel: usize,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub x_before: f64,
    pub x_after: f64,
    /// Number of deviators at the pre-step state; at least 1 on every
    /// recorded step.
    pub deviator_count: usize,
    /// Size of the candidate set the actor was drawn from.
    pub candidate_count: usize,
}

impl StepRecord {
    pub fn deviated(&self) -> bool {
        self.old_channel != self.new_channel
    }
}

/// Full history of one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trace {
    pub seed: u64,
    pub eps: f64,
    pub policy: SchedulePolicy,
    pub initial_profile: StrategyProfile,
    pub steps: Vec<StepRecord>,
    pub converged: bool,
    /// First step index at which the profile is an eps-PNE, when reached.
    pub t_con: Option<usize>,
    pub final_profile: StrategyProfile,
    pub final_rates: RateVector,
}

impl Trace {
    /// Walk the trace, presenting the profile as it was *before* each step.
    pub fn replay<F: FnMut(&StrategyProfile, &StepRecord)>(&self, mut visit: F) {
        let mut profile = self.initial_profile.clone();
        for rec in &self.steps {
            visit(&profile, rec);
            if rec.deviated() {
                profile = profile.with_channel(rec.actor, rec.new_channel);
            }
        }
        debug_assert_eq!(profile.channels(), self.final_profile.channels());
    }

    /// One row per step: t, actor, old, new, d1, d2, d3, x_after.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,actor,old_channel,new_channel,d1,d2,d3,x_after")?;
        for r in &self.steps {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.t, r.actor, r.old_channel, r.new_channel, r.d1, r.d2, r.d3, r.x_after
            )?;
        }
        Ok(())
    }
}

/// Incrementally maintained view of a (net, profile) pair: finite
/// interference aggregates, hypothetical utilities, row maxima.
struct InterferenceTable {
    k: usize,
    /// [n*k + ch]: finite interference at n's receiver from channel ch,
    /// excluding n itself and n's sentinel transmitter dest(n).
    agg: Vec<f64>,
    /// [n*k + ch]: hypothetical utility; exactly 0 where the sentinel sits.
    u: Vec<f64>,
    max_u: Vec<f64>,
    argmax: Vec<usize>,
}

#[inline]
fn rate_at(net: &NetworkRealization, player: usize, interference: f64) -> f64 {
    let s = net.direct(player) * net.power(player);
    (1.0 + s / (net.noise() + interference)).log2()
}

impl InterferenceTable {
    fn new(net: &NetworkRealization, profile: &StrategyProfile) -> Self {
        let n = net.n_players();
        let k = profile.num_channels();
        let mut agg = vec![0.0f64; n * k];
        for m in 0..n {
            let ch = profile.channel(m);
            let p = net.power(m);
            for victim in 0..n {
                if victim != m && net.dest(victim) != m {
                    agg[victim * k + ch] += net.gain(m, victim) * p;
                }
            }
        }
        let mut u = vec![0.0f64; n * k];
        let mut max_u = vec![f64::NEG_INFINITY; n];
        let mut argmax = vec![0usize; n];
        for player in 0..n {
            let saturated = profile.channel(net.dest(player));
            for ch in 0..k {
                let val = if ch == saturated {
                    0.0
                } else {
                    rate_at(net, player, agg[player * k + ch])
                };
                u[player * k + ch] = val;
                if val > max_u[player] {
                    max_u[player] = val;
                    argmax[player] = ch;
                }
            }
        }
        InterferenceTable {
            k,
            agg,
            u,
            max_u,
            argmax,
        }
    }

    #[inline]
    fn u_row(&self, player: usize) -> &[f64] {
        &self.u[player * self.k..(player + 1) * self.k]
    }

    #[inline]
    fn rate(&self, player: usize, profile: &StrategyProfile) -> f64 {
        self.u[player * self.k + profile.channel(player)]
    }

    fn sum_rates(&self, profile: &StrategyProfile) -> f64 {
        (0..profile.len()).map(|p| self.rate(p, profile)).sum()
    }

    fn deviators(&self, profile: &StrategyProfile, eps: f64) -> Vec<usize> {
        (0..profile.len())
            .filter(|&p| self.u[p * self.k + profile.channel(p)] + eps < self.max_u[p])
            .collect()
    }

    fn rescan_max(&mut self, player: usize) {
        let row = player * self.k;
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for ch in 0..self.k {
            let v = self.u[row + ch];
            if v > best {
                best = v;
                arg = ch;
            }
        }
        self.max_u[player] = best;
        self.argmax[player] = arg;
    }

    fn refresh_max_after(&mut self, player: usize, old: usize, new: usize) {
        if self.argmax[player] == old || self.argmax[player] == new {
            self.rescan_max(player);
        } else {
            for ch in [old, new] {
                let v = self.u[player * self.k + ch];
                if v > self.max_u[player] {
                    self.max_u[player] = v;
                    self.argmax[player] = ch;
                }
            }
        }
    }

    /// Update after `actor` moved old -> new; `profile` is the post-move
    /// profile. The actor's own row depends only on the others and stays.
    fn apply_move(
        &mut self,
        net: &NetworkRealization,
        profile: &StrategyProfile,
        actor: usize,
        old: usize,
        new: usize,
    ) {
        debug_assert_ne!(old, new);
        let k = self.k;
        let p_actor = net.power(actor);
        for victim in 0..profile.len() {
            if victim == actor {
                continue;
            }
            if net.dest(victim) == actor {
                // The sentinel transmitter moved: old un-saturates, new dies.
                self.u[victim * k + old] = rate_at(net, victim, self.agg[victim * k + old]);
                self.u[victim * k + new] = 0.0;
                self.refresh_max_after(victim, old, new);
                continue;
            }
            let g = net.gain(actor, victim) * p_actor;
            if g == 0.0 {
                continue;
            }
            self.agg[victim * k + old] -= g;
            self.agg[victim * k + new] += g;
            let saturated = profile.channel(net.dest(victim));
            self.u[victim * k + old] = if saturated == old {
                0.0
            } else {
                rate_at(net, victim, self.agg[victim * k + old])
            };
            self.u[victim * k + new] = if saturated == new {
                0.0
            } else {
                rate_at(net, victim, self.agg[victim * k + new])
            };
            self.refresh_max_after(victim, old, new);
        }
    }
}

/// Outcome of one call to `Dynamics::step`.
#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    /// The current profile is an eps-PNE; nothing changed.
    Converged,
    Stepped(StepRecord),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub eps: f64,
    pub policy: SchedulePolicy,
    pub max_steps: usize,
    pub paranoid: bool,
}

impl RunOptions {
    pub fn new(eps: f64, policy: SchedulePolicy) -> Self {
        RunOptions {
            eps,
            policy,
            max_steps: 0, // resolved against N at run time
            paranoid: false,
        }
    }

    pub fn resolved_max_steps(&self, n_players: usize) -> usize {
        if self.max_steps == 0 {
            200 * n_players
        } else {
            self.max_steps
        }
    }
}

/// The dynamics engine. One instance drives one strictly sequential run.
pub struct Dynamics<'a> {
    net: &'a NetworkRealization,
    profile: StrategyProfile,
    eps: f64,
    policy: SchedulePolicy,
    paranoid: bool,
    table: InterferenceTable,
    t: usize,
    converged: bool,
    schedule_rng: ChaCha8Rng,
    action_rng: ChaCha8Rng,
}

impl<'a> Dynamics<'a> {
    pub fn new(
        net: &'a NetworkRealization,
        initial: StrategyProfile,
        options: &RunOptions,
        master_seed: u64,
    ) -> Self {
        assert!(options.eps > 0.0, "eps must be positive");
        assert_eq!(initial.len(), net.n_players());
        let table = InterferenceTable::new(net, &initial);
        Dynamics {
            net,
            profile: initial,
            eps: options.eps,
            policy: options.policy,
            paranoid: options.paranoid,
            table,
            t: 0,
            converged: false,
            schedule_rng: stream_rng(master_seed, Stream::Schedule),
            action_rng: stream_rng(master_seed, Stream::Action),
        }
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn profile(&self) -> &StrategyProfile {
        &self.profile
    }

    /// Convergence test without advancing the clock.
    pub fn is_at_equilibrium(&self) -> bool {
        self.converged || self.table.deviators(&self.profile, self.eps).is_empty()
    }

    /// Execute one turn: draw an actor uniformly from the policy's candidate
    /// set and apply its approximate best response. Absorbing: once at an
    /// eps-PNE every further call returns `Converged` untouched.
    pub fn step(&mut self) -> StepOutcome {
        if self.converged {
            return StepOutcome::Converged;
        }
        let deviators = self.table.deviators(&self.profile, self.eps);
        if deviators.is_empty() {
            self.converged = true;
            return StepOutcome::Converged;
        }
        let actor = match self.policy {
            SchedulePolicy::Deviators => deviators[self.schedule_rng.gen_range(0..deviators.len())],
            SchedulePolicy::AllPlayers => self.schedule_rng.gen_range(0..self.net.n_players()),
        };
        let candidate_count = match self.policy {
            SchedulePolicy::Deviators => deviators.len(),
            SchedulePolicy::AllPlayers => self.net.n_players(),
        };
        self.step_actor(actor, deviators.len(), candidate_count)
    }

    /// Custom-schedule hook: act with a caller-supplied candidate set. The
    /// caller is responsible for non-degeneracy.
    pub fn step_with_candidates(&mut self, candidate_set: &[usize]) -> StepOutcome {
        if self.converged {
            return StepOutcome::Converged;
        }
        let deviators = self.table.deviators(&self.profile, self.eps);
        if deviators.is_empty() {
            self.converged = true;
            return StepOutcome::Converged;
        }
        assert!(!candidate_set.is_empty(), "candidate set must be nonempty");
        let actor = candidate_set[self.schedule_rng.gen_range(0..candidate_set.len())];
        self.step_actor(actor, deviators.len(), candidate_set.len())
    }

    fn step_actor(
        &mut self,
        actor: usize,
        deviator_count: usize,
        candidate_count: usize,
    ) -> StepOutcome {
        let old = self.profile.channel(actor);
        let choice = game::choose_action(
            self.table.u_row(actor),
            old,
            self.eps,
            &mut self.action_rng,
        );
        let x_before = self.table.sum_rates(&self.profile);
        let record = match choice {
            None => {
                // Eligible under the all-players schedule but already
                // eps-best: a counted no-op turn.
                StepRecord {
                    t: self.t,
                    actor,
                    old_channel: old,
                    new_channel: old,
                    d1: 0.0,
                    d2: 0.0,
                    d3: 0.0,
                    x_before,
                    x_after: x_before,
                    deviator_count,
                    candidate_count,
                }
            }
            Some(new) => {
                let mates: Vec<(usize, usize, f64)> = (0..self.profile.len())
                    .filter(|&m| m != actor)
                    .filter_map(|m| {
                        let ch = self.profile.channel(m);
                        if ch == old || ch == new {
                            Some((m, ch, self.table.rate(m, &self.profile)))
                        } else {
                            None
                        }
                    })
                    .collect();
                let d1 = self.table.u_row(actor)[new] - self.table.u_row(actor)[old];
                self.profile.set_channel(actor, new);
                if self.paranoid {
                    self.table = InterferenceTable::new(self.net, &self.profile);
                } else {
                    self.table
                        .apply_move(self.net, &self.profile, actor, old, new);
                }
                let mut d2 = 0.0;
                let mut d3 = 0.0;
                for &(m, ch, before) in &mates {
                    let diff = self.table.rate(m, &self.profile) - before;
                    if ch == new {
                        d2 += diff;
                    } else {
                        d3 += diff;
                    }
                }
                let x_after = self.table.sum_rates(&self.profile);
                StepRecord {
                    t: self.t,
                    actor,
                    old_channel: old,
                    new_channel: new,
                    d1,
                    d2,
                    d3,
                    x_before,
                    x_after,
                    deviator_count,
                    candidate_count,
                }
            }
        };
        self.t += 1;
        StepOutcome::Stepped(record)
    }

    pub fn final_rates(&self) -> RateVector {
        RateVector {
            rates: (0..self.profile.len())
                .map(|p| self.table.rate(p, &self.profile))
                .collect(),
        }
    }
}

/// Run the dynamics to an eps-PNE or a step budget. Non-convergence within
/// the budget is a reported outcome, not an error. `initial` defaults to an
/// i.i.d. uniform profile drawn from the seed's initial-profile stream.
pub fn run(
    net: &NetworkRealization,
    options: &RunOptions,
    initial: Option<StrategyProfile>,
    master_seed: u64,
) -> Trace {
    let max_steps = options.resolved_max_steps(net.n_players()).max(1);
    let initial = initial.unwrap_or_else(|| {
        let mut rng = stream_rng(master_seed, Stream::InitialProfile);
        StrategyProfile::uniform_random(net.n_players(), net.channels(), &mut rng)
    });
    let mut engine = Dynamics::new(net, initial.clone(), options, master_seed);
    let mut steps = Vec::new();
    let mut converged = false;
    for _ in 0..max_steps {
        match engine.step() {
            StepOutcome::Converged => {
                converged = true;
                break;
            }
            StepOutcome::Stepped(rec) => steps.push(rec),
        }
    }
    if !converged && engine.is_at_equilibrium() {
        converged = true;
    }
    let t_con = converged.then_some(engine.t());
    Trace {
        seed: master_seed,
        eps: options.eps,
        policy: options.policy,
        initial_profile: initial,
        steps,
        converged,
        t_con,
        final_profile: engine.profile().clone(),
        final_rates: engine.final_rates(),
    }
}
