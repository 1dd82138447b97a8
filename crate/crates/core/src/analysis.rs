//! Empirical verification of the asymptotic claims: near/far sets, best-set
//! cardinality, per-step drift, convergence-time bounds, baselines, and a
//! brute-force equilibrium oracle for tiny instances.
//!
//! All thresholds use the natural logarithm. The checks are
//! report-generating, never gating: small-N violations are expected since
//! every claim is asymptotic.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::NetworkRealization;
use crate::dynamics::{SchedulePolicy, Trace};
use crate::error::{Error, Result};
use crate::game::{self, StrategyProfile};
use crate::geometry::{self, RegionSpec};

/// Enumeration ceiling for the brute-force oracle.
pub const ORACLE_PROFILE_LIMIT: u64 = 10_000_000;

/// Derived constants of the asymptotic analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    /// Tuning constant, strictly above 1. Default 2 everywhere.
    pub q: f64,
    /// (ln N / N)^(alpha / (2 alpha + 4)).
    pub rho: f64,
    /// Load per channel, N/K.
    pub load: f64,
}

impl TheoryParams {
    pub fn new(q: f64, n_players: usize, channels: usize, alpha: f64) -> Result<Self> {
        if !(q > 1.0) {
            return Err(Error::Domain(format!("q must exceed 1, got {q}")));
        }
        if n_players < 2 || channels == 0 {
            return Err(Error::Domain("need N >= 2 and K >= 1".into()));
        }
        Ok(TheoryParams {
            q,
            rho: rho(n_players, alpha),
            load: n_players as f64 / channels as f64,
        })
    }
}

/// rho = (ln N / N)^(alpha / (2 alpha + 4)).
pub fn rho(n_players: usize, alpha: f64) -> f64 {
    let n = n_players as f64;
    (n.ln() / n).powf(alpha / (2.0 * alpha + 4.0))
}

/// Radius of the near-player ball: rho / sqrt(pi * lambda).
pub fn near_radius(region: RegionSpec, n_players: usize, alpha: f64) -> f64 {
    rho(n_players, alpha) / (PI * region.lambda()).sqrt()
}

/// Radius of the non-far ball: sqrt((q-1) / (2 theta_r lambda (q l - 1))).
pub fn far_radius(region: RegionSpec, theta_r: f64, q: f64, load: f64) -> Result<f64> {
    if !(q > 1.0) {
        return Err(Error::Domain(format!("q must exceed 1, got {q}")));
    }
    if !(q * load > 1.0) {
        return Err(Error::Domain(format!(
            "q*load must exceed 1, got q={q} load={load}"
        )));
    }
    Ok((1.0 / (2.0 * theta_r * region.lambda()) * (q - 1.0) / (q * load - 1.0)).sqrt())
}

/// Players whose destinations sit close to player `n`'s transmit beam: the
/// potential victims of `n`'s interference.
pub fn near_set(net: &NetworkRealization, region: RegionSpec, n: usize) -> Vec<usize> {
    let radius = near_radius(region, net.n_players(), net.radio().alpha);
    let half_beam = net.radio().theta_t / 2.0;
    (0..net.n_players())
        .filter(|&m| {
            if m == n || net.dest(m) == n {
                return false;
            }
            let target = net.position(net.dest(m));
            if geometry::distance(net.position(n), target) > radius {
                return false;
            }
            match geometry::angle_offset(net.position(n), target, net.tx_heading(n)) {
                Ok(theta) => theta.abs() <= half_beam,
                Err(_) => true, // coincident points: inside the ball
            }
        })
        .collect()
}

/// Players whose transmitters are far from (or beamed away from) player
/// `n`'s receiver: the complement of the strong-interferer ball.
pub fn far_set(
    net: &NetworkRealization,
    region: RegionSpec,
    n: usize,
    q: f64,
) -> Result<Vec<usize>> {
    let load = net.n_players() as f64 / net.channels() as f64;
    let radius = far_radius(region, net.radio().theta_r, q, load)?;
    let half_beam = net.radio().theta_r / 2.0;
    let receiver = net.dest(n);
    let rx_pos = net.position(receiver);
    Ok((0..net.n_players())
        .filter(|&m| {
            if geometry::distance(net.position(m), rx_pos) > radius {
                return true; // outside the ball
            }
            match geometry::angle_offset(rx_pos, net.position(m), net.rx_heading(receiver)) {
                Ok(theta) => theta.abs() > half_beam, // beamed away
                Err(_) => false,                      // the receiver's own node
            }
        })
        .collect())
}

/// Cardinality thresholds: near bound (theta_t/pi)(N^2 ln^alpha N)^(1/(alpha+2))
/// and far bound (1 - (q-1)/(2(q l - 1))) N.
pub fn lemma2_bounds(
    n_players: usize,
    alpha: f64,
    theta_t: f64,
    q: f64,
    load: f64,
) -> Result<(f64, f64)> {
    if !(q > 1.0) {
        return Err(Error::Domain(format!("q must exceed 1, got {q}")));
    }
    if n_players < 2 {
        return Err(Error::Domain("need N >= 2".into()));
    }
    if !(q * load > 1.0) {
        return Err(Error::Domain(format!(
            "q*load must exceed 1, got q={q} load={load}"
        )));
    }
    let n = n_players as f64;
    let near = theta_t / PI * (n * n * n.ln().powf(alpha)).powf(1.0 / (alpha + 2.0));
    let far = (1.0 - 0.5 * (q - 1.0) / (q * load - 1.0)) * n;
    Ok((near, far))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Lemma2Outcome {
    pub max_near: usize,
    pub min_far: usize,
    pub near_bound: f64,
    pub far_bound: f64,
    pub near_ok: bool,
    pub far_ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Lemma2Report {
    pub outcomes: Vec<Lemma2Outcome>,
    /// Fraction of realizations satisfying both cardinality bounds.
    pub fraction: f64,
}

/// Evaluate the near/far cardinality bounds on a family of realizations.
pub fn check_lemma2(nets: &[NetworkRealization], q: f64) -> Result<Lemma2Report> {
    let mut outcomes = Vec::with_capacity(nets.len());
    for net in nets {
        let n = net.n_players();
        let load = n as f64 / net.channels() as f64;
        let (near_bound, far_bound) =
            lemma2_bounds(n, net.radio().alpha, net.radio().theta_t, q, load)?;
        let mut max_near = 0usize;
        let mut min_far = usize::MAX;
        for player in 0..n {
            max_near = max_near.max(near_set(net, net.region(), player).len());
            min_far = min_far.min(far_set(net, net.region(), player, q)?.len());
        }
        let near_ok = (max_near as f64) <= near_bound;
        let far_ok = (min_far as f64) >= far_bound;
        outcomes.push(Lemma2Outcome {
            max_near,
            min_far,
            near_bound,
            far_bound,
            near_ok,
            far_ok,
        });
    }
    let fraction = outcomes.iter().filter(|o| o.near_ok && o.far_ok).count() as f64
        / outcomes.len().max(1) as f64;
    Ok(Lemma2Report { outcomes, fraction })
}

/// Channels containing only far players (from `n`'s receiver) and fewer than
/// ceil(q * load) occupants besides `n`. These are good landing spots whose
/// interference is provably small.
pub fn good_channel_set(
    net: &NetworkRealization,
    profile: &StrategyProfile,
    n: usize,
    q: f64,
) -> Result<Vec<usize>> {
    let far = far_set(net, net.region(), n, q)?;
    let mut is_far = vec![false; net.n_players()];
    for &m in &far {
        is_far[m] = true;
    }
    let load = net.n_players() as f64 / net.channels() as f64;
    let cap = (q * load).ceil();
    let k = profile.num_channels();
    let mut occupancy = vec![0usize; k];
    let mut tainted = vec![false; k];
    for m in 0..net.n_players() {
        if m == n {
            continue;
        }
        let ch = profile.channel(m);
        occupancy[ch] += 1;
        if !is_far[m] {
            tainted[ch] = true;
        }
    }
    Ok((0..k)
        .filter(|&ch| !tainted[ch] && (occupancy[ch] as f64) < cap)
        .collect())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Lemma4Report {
    /// Smallest eps-best-set cardinality over sampled players and profiles.
    pub min_best_set: usize,
    /// Theoretical floor (1/(2 load)) (1 - 1/q) N.
    pub bound: f64,
    /// Largest |u(exact BR) - interference-free rate| observed.
    pub max_gap: f64,
}

/// Exact eps-best-set statistics over sampled profiles.
pub fn check_lemma4(
    net: &NetworkRealization,
    eps: f64,
    profiles: &[StrategyProfile],
    q: f64,
) -> Result<Lemma4Report> {
    if !(q > 1.0) {
        return Err(Error::Domain(format!("q must exceed 1, got {q}")));
    }
    let n = net.n_players();
    let load = n as f64 / net.channels() as f64;
    let bound = 1.0 / (2.0 * load) * (1.0 - 1.0 / q) * n as f64;
    let mut min_best_set = usize::MAX;
    let mut max_gap = 0.0f64;
    for profile in profiles {
        for player in 0..n {
            let row = game::utilities_row(net, profile, player);
            let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let size = row.iter().filter(|&&u| u + eps >= best).count();
            min_best_set = min_best_set.min(size);
            max_gap = max_gap.max((net.max_rate(player) - best).abs());
        }
    }
    Ok(Lemma4Report {
        min_best_set,
        bound,
        max_gap,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DriftCheck {
    pub t: usize,
    pub actor: usize,
    pub e1_plus_e2: f64,
    pub positive: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Lemma5Report {
    pub checks: Vec<DriftCheck>,
    pub deviating_steps: usize,
    pub violations: usize,
    /// Steps where the scratch recomputation no longer saw a deviator
    /// (boundary disagreement with the engine); counted separately.
    pub skipped: usize,
}

impl Lemma5Report {
    pub fn violation_free(&self) -> bool {
        self.violations == 0
    }
}

/// Exact expected per-step drift E[delta1 + delta2] at every deviating step
/// of a recorded run.
pub fn check_lemma5(net: &NetworkRealization, trace: &Trace, eps: f64) -> Lemma5Report {
    let mut checks = Vec::new();
    let mut violations = 0usize;
    let mut deviating = 0usize;
    let mut skipped = 0usize;
    trace.replay(|profile, rec| {
        if !rec.deviated() {
            return;
        }
        deviating += 1;
        match game::expected_drift(net, profile, rec.actor, eps) {
            Ok(drift) => {
                let positive = drift.e1_plus_e2 > 0.0;
                if !positive {
                    violations += 1;
                }
                checks.push(DriftCheck {
                    t: rec.t,
                    actor: rec.actor,
                    e1_plus_e2: drift.e1_plus_e2,
                    positive,
                });
            }
            Err(_) => skipped += 1,
        }
    });
    Lemma5Report {
        checks,
        deviating_steps: deviating,
        violations,
        skipped,
    }
}

/// Log-difference bound: returns (lhs, rhs) of
/// log2(1 + a/b) - log2(1 + a/(b + dI)) <= (a/(a+b)) * dI / (b ln 2).
///
/// The difference of logs is evaluated through the algebraically equal form
/// log2(1 + a*dI / (b*(a + b + dI))), which avoids the cancellation that
/// makes the naive difference meaningless for tiny dI.
pub fn lemma3_gap(a: f64, b: f64, delta_i: f64) -> Result<(f64, f64)> {
    if !(a > 0.0 && b > 0.0 && delta_i > 0.0) {
        return Err(Error::Domain(format!(
            "lemma3_gap needs positive inputs, got a={a} b={b} dI={delta_i}"
        )));
    }
    let x = a * delta_i / (b * (a + b + delta_i));
    let lhs = x.ln_1p() / std::f64::consts::LN_2;
    let rhs = a / (a + b) * delta_i / (b * std::f64::consts::LN_2);
    Ok((lhs, rhs))
}

/// Worst-case expected convergence-time scale 4 C N / eps (deviators
/// schedule) or 4 C N^2 / eps (any non-degenerate schedule). The dynamics
/// satisfy Pr(T >= L * t_hat) <= 1/L.
pub fn convergence_time_bound(
    cbar: f64,
    eps: f64,
    n_players: usize,
    policy: SchedulePolicy,
) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    if !(cbar >= 0.0) {
        return Err(Error::Domain(format!("cbar must be nonnegative, got {cbar}")));
    }
    let n = n_players as f64;
    Ok(match policy {
        SchedulePolicy::Deviators => 4.0 * cbar * n / eps,
        SchedulePolicy::AllPlayers => 4.0 * cbar * n * n / eps,
    })
}

/// Orthogonal time/frequency sharing reference rate. Per-slot power keeps
/// the SNR target inside each slot; frame power concentrates it.
pub fn baseline_tdma(load: f64, snr_linear: f64, per_slot_power: bool) -> Result<f64> {
    if !(load > 0.0) {
        return Err(Error::Domain(format!("load must be positive, got {load}")));
    }
    if !(snr_linear > 0.0) {
        return Err(Error::Domain("snr must be positive".into()));
    }
    Ok(if per_slot_power {
        (1.0 + snr_linear).log2() / load
    } else {
        (1.0 + load * snr_linear).log2() / load
    })
}

/// Monte Carlo mean per-player rate under i.i.d. uniform channel profiles.
pub fn baseline_random<R: Rng>(net: &NetworkRealization, samples: usize, rng: &mut R) -> f64 {
    assert!(samples > 0);
    let mut total = 0.0;
    for _ in 0..samples {
        let profile =
            StrategyProfile::uniform_random(net.n_players(), net.channels(), rng);
        total += game::rates(net, &profile).mean();
    }
    total / samples as f64
}

/// Appendix-style gamma: max over players of sinr/(sinr + 1) at zero
/// interference. Reported for reference alongside drift diagnostics.
pub fn gamma(net: &NetworkRealization) -> f64 {
    (0..net.n_players())
        .map(|p| {
            let s = net.direct(p) * net.power(p) / net.noise();
            s / (s + 1.0)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleEnumeration {
    pub total_profiles: u64,
    /// Every eps-PNE with its sum-rate, in lexicographic profile order.
    pub equilibria: Vec<(StrategyProfile, f64)>,
}

impl OracleEnumeration {
    pub fn contains(&self, profile: &StrategyProfile) -> bool {
        self.equilibria
            .iter()
            .any(|(p, _)| p.channels() == profile.channels())
    }
}

/// Exhaustive scan of all K^N profiles; refuses instances beyond the
/// enumeration ceiling.
pub fn oracle_enumerate(net: &NetworkRealization, eps: f64) -> Result<OracleEnumeration> {
    let n = net.n_players();
    let k = net.channels();
    let mut total: u64 = 1;
    for _ in 0..n {
        total = total.saturating_mul(k as u64);
        if total > ORACLE_PROFILE_LIMIT {
            return Err(Error::InstanceTooLarge {
                channels: k,
                players: n,
                limit: ORACLE_PROFILE_LIMIT,
            });
        }
    }
    let mut equilibria = Vec::new();
    let mut digits = vec![0usize; n];
    loop {
        let profile = StrategyProfile::new(digits.clone(), k)?;
        if game::is_eps_pne(net, &profile, eps) {
            let x = game::sum_rate(net, &profile);
            equilibria.push((profile, x));
        }
        // Mixed-radix increment, most significant digit first.
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok(OracleEnumeration {
                    total_profiles: total,
                    equilibria,
                });
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < k {
                break;
            }
            digits[pos] = 0;
        }
    }
}

/// Summary diagnostics for one realization and run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub q: f64,
    pub eps: f64,
    pub near_counts: Vec<usize>,
    pub far_counts: Vec<usize>,
    pub near_bound: f64,
    pub far_bound: f64,
    pub eps_set_min: usize,
    pub eps_set_bound: f64,
    pub drift_checks: Vec<DriftCheck>,
    pub drift_violations: usize,
    pub t_hat: f64,
    pub cbar: f64,
    pub max_gap: f64,
    pub gamma: f64,
}

/// Full per-run report: near/far counts against their bounds, best-set
/// statistics at the initial and final profiles, exact drift at every
/// deviating step, and the convergence-time scale.
pub fn diagnostics(
    net: &NetworkRealization,
    trace: &Trace,
    eps: f64,
    q: f64,
) -> Result<DiagnosticsReport> {
    let n = net.n_players();
    let load = n as f64 / net.channels() as f64;
    let (near_bound, far_bound) =
        lemma2_bounds(n, net.radio().alpha, net.radio().theta_t, q, load)?;
    let near_counts: Vec<usize> = (0..n)
        .map(|p| near_set(net, net.region(), p).len())
        .collect();
    let far_counts: Vec<usize> = (0..n)
        .map(|p| far_set(net, net.region(), p, q).map(|s| s.len()))
        .collect::<Result<_>>()?;
    let lemma4 = check_lemma4(
        net,
        eps,
        &[trace.initial_profile.clone(), trace.final_profile.clone()],
        q,
    )?;
    let lemma5 = check_lemma5(net, trace, eps);
    let cbar = net.cbar();
    let t_hat = convergence_time_bound(cbar, eps, n, trace.policy)?;
    Ok(DiagnosticsReport {
        q,
        eps,
        near_counts,
        far_counts,
        near_bound,
        far_bound,
        eps_set_min: lemma4.min_best_set,
        eps_set_bound: lemma4.bound,
        drift_checks: lemma5.checks,
        drift_violations: lemma5.violations,
        t_hat,
        cbar,
        max_gap: lemma4.max_gap,
        gamma: gamma(net),
    })
}
