//! Utilities, interference, epsilon-best sets, approximate best response,
//! equilibrium tests, and the exact sum-rate step decomposition.
//!
//! All operations here are pure over a frozen `(net, profile)` pair; the
//! dynamics engine keeps its own incremental cache and is tested for
//! bit-compatibility against these scratch routes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::NetworkRealization;
use crate::error::{Error, Result};

/// One channel choice per player.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyProfile {
    channel: Vec<usize>,
    num_channels: usize,
}

impl StrategyProfile {
    pub fn new(channel: Vec<usize>, num_channels: usize) -> Result<Self> {
        if num_channels == 0 {
            return Err(Error::InvalidParameter("channel count must be positive".into()));
        }
        if let Some((player, &ch)) = channel
            .iter()
            .enumerate()
            .find(|&(_, &ch)| ch >= num_channels)
        {
            return Err(Error::InvalidParameter(format!(
                "channel[{player}] = {ch} out of range 0..{num_channels}"
            )));
        }
        Ok(StrategyProfile {
            channel,
            num_channels,
        })
    }

    /// I.i.d. uniform channel per player: the default uninformed start.
    pub fn uniform_random<R: Rng>(n_players: usize, num_channels: usize, rng: &mut R) -> Self {
        let channel = (0..n_players)
            .map(|_| rng.gen_range(0..num_channels))
            .collect();
        StrategyProfile {
            channel,
            num_channels,
        }
    }

    pub fn len(&self) -> usize {
        self.channel.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channel.is_empty()
    }

    pub fn num_channels(&self) -> usize {
        self.num_channels
    }

    pub fn channel(&self, player: usize) -> usize {
        self.channel[player]
    }

    pub fn channels(&self) -> &[usize] {
        &self.channel
    }

    pub fn with_channel(&self, player: usize, channel: usize) -> Self {
        let mut out = self.clone();
        out.channel[player] = channel;
        out
    }

    pub(crate) fn set_channel(&mut self, player: usize, channel: usize) {
        debug_assert!(channel < self.num_channels);
        self.channel[player] = channel;
    }
}

/// Per-player achievable rates for a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateVector {
    pub rates: Vec<f64>,
}

impl RateVector {
    pub fn mean(&self) -> f64 {
        self.rates.iter().sum::<f64>() / self.rates.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.rates.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sum(&self) -> f64 {
        self.rates.iter().sum()
    }
}

/// Aggregate interference at a link's receiver: finite power, or the
/// self-interference sentinel that pins the rate to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Interference {
    Finite(f64),
    Infinite,
}

impl Interference {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Interference::Infinite)
    }
}

#[inline]
fn rate_at(net: &NetworkRealization, player: usize, interference: f64) -> f64 {
    let s = net.direct(player) * net.power(player);
    (1.0 + s / (net.noise() + interference)).log2()
}

/// Interference seen by `link`'s receiver if `link` listened on `channel`,
/// summed over the other players currently on that channel. The link's own
/// hypothetical presence is excluded. Infinite when the link's receiver is
/// itself transmitting there.
pub fn interference(
    net: &NetworkRealization,
    profile: &StrategyProfile,
    link: usize,
    channel: usize,
) -> Interference {
    let saturator = net.dest(link);
    if profile.channel(saturator) == channel {
        return Interference::Infinite;
    }
    let mut total = 0.0;
    for m in 0..net.n_players() {
        if m != link && profile.channel(m) == channel {
            total += net.gain(m, link) * net.power(m);
        }
    }
    Interference::Finite(total)
}

/// Achievable rate of player `n` under the profile, treating interference as
/// noise; exactly 0 when the interference is infinite.
pub fn utility(net: &NetworkRealization, profile: &StrategyProfile, n: usize) -> f64 {
    hypothetical_utility(net, profile, n, profile.channel(n))
}

/// Rate player `n` would get on `channel` with everyone else fixed.
pub fn hypothetical_utility(
    net: &NetworkRealization,
    profile: &StrategyProfile,
    n: usize,
    channel: usize,
) -> f64 {
    match interference(net, profile, n, channel) {
        Interference::Infinite => 0.0,
        Interference::Finite(i) => rate_at(net, n, i),
    }
}

/// Player `n`'s hypothetical utility on every channel, in one pass.
pub fn utilities_row(net: &NetworkRealization, profile: &StrategyProfile, n: usize) -> Vec<f64> {
    let k = profile.num_channels();
    let mut acc = vec![0.0f64; k];
    for m in 0..net.n_players() {
        if m == n || m == net.dest(n) {
            continue;
        }
        acc[profile.channel(m)] += net.gain(m, n) * net.power(m);
    }
    let saturated = profile.channel(net.dest(n));
    (0..k)
        .map(|ch| {
            if ch == saturated {
                0.0
            } else {
                rate_at(net, n, acc[ch])
            }
        })
        .collect()
}

/// All players' current rates, grouped by channel occupancy for efficiency.
pub fn rates(net: &NetworkRealization, profile: &StrategyProfile) -> RateVector {
    let n = net.n_players();
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); profile.num_channels()];
    for m in 0..n {
        buckets[profile.channel(m)].push(m);
    }
    let mut rates = vec![0.0f64; n];
    for (player, rate) in rates.iter_mut().enumerate() {
        let ch = profile.channel(player);
        if profile.channel(net.dest(player)) == ch {
            *rate = 0.0;
            continue;
        }
        let mut total = 0.0;
        for &m in &buckets[ch] {
            if m != player {
                total += net.gain(m, player) * net.power(m);
            }
        }
        *rate = rate_at(net, player, total);
    }
    RateVector { rates }
}

/// Social welfare: the sum of achievable rates.
pub fn sum_rate(net: &NetworkRealization, profile: &StrategyProfile) -> f64 {
    rates(net, profile).sum()
}

/// The channels within `eps` of player `n`'s best hypothetical utility
/// (inclusive), in ascending channel order. Never empty.
pub fn eps_best_set(
    net: &NetworkRealization,
    profile: &StrategyProfile,
    n: usize,
    eps: f64,
) -> Vec<usize> {
    assert!(eps >= 0.0, "eps must be nonnegative");
    let u = utilities_row(net, profile, n);
    eps_best_from_row(&u, eps)
}

pub(crate) fn eps_best_from_row(u: &[f64], eps: f64) -> Vec<usize> {
    let max = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..u.len()).filter(|&k| u[k] + eps >= max).collect()
}

/// Shared action rule: keep the current channel if it is eps-best, otherwise
/// pick uniformly among the (eps/2)-best channels. Both the scratch
/// `br_eps` and the cached dynamics engine go through this exact code so
/// their draws coincide for identical rng states.
pub(crate) fn choose_action<R: Rng>(
    u: &[f64],
    current: usize,
    eps: f64,
    rng: &mut R,
) -> Option<usize> {
    let max = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if u[current] + eps >= max {
        return None;
    }
    let half: Vec<usize> = (0..u.len()).filter(|&k| u[k] + eps / 2.0 >= max).collect();
    Some(half[rng.gen_range(0..half.len())])
}

/// Approximate best response of player `n`: unchanged when the current
/// channel is eps-best, otherwise a uniform draw from the (eps/2)-best set.
/// Returns the (possibly new) profile and whether a deviation happened.
pub fn br_eps<R: Rng>(
    net: &NetworkRealization,
    profile: &StrategyProfile,
    n: usize,
    eps: f64,
    rng: &mut R,
) -> (StrategyProfile, bool) {
    assert!(eps > 0.0, "eps must be positive");
    let u = utilities_row(net, profile, n);
    match choose_action(&u, profile.channel(n), eps, rng) {
        None => (profile.clone(), false),
        Some(k) => (profile.with_channel(n, k), true),
    }
}

/// True when no player can gain more than `eps` by a unilateral switch.
pub fn is_eps_pne(net: &NetworkRealization, profile: &StrategyProfile, eps: f64) -> bool {
    assert!(eps >= 0.0, "eps must be nonnegative");
    (0..net.n_players()).all(|n| {
        let u = utilities_row(net, profile, n);
        let max = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        u[profile.channel(n)] + eps >= max
    })
}

/// Exact decomposition of a one-player move into the actor's rate change,
/// the change over the channel moved into, and the change over the channel
/// moved out of. The three parts sum to the sum-rate difference.
pub fn delta_decomposition(
    net: &NetworkRealization,
    before: &StrategyProfile,
    after: &StrategyProfile,
    n: usize,
) -> Result<(f64, f64, f64)> {
    if before.len() != after.len() || before.num_channels() != after.num_channels() {
        return Err(Error::InvalidParameter(
            "before/after profiles have different shapes".into(),
        ));
    }
    for m in 0..before.len() {
        if m != n && before.channel(m) != after.channel(m) {
            return Err(Error::InvalidTransition { actor: n, at: m });
        }
    }
    let old = before.channel(n);
    let new = after.channel(n);
    if old == new {
        return Ok((0.0, 0.0, 0.0));
    }
    let d1 = utility(net, after, n) - utility(net, before, n);
    let mut d2 = 0.0;
    let mut d3 = 0.0;
    for m in 0..before.len() {
        if m == n {
            continue;
        }
        let ch = before.channel(m);
        if ch == new {
            d2 += utility(net, after, m) - utility(net, before, m);
        } else if ch == old {
            d3 += utility(net, after, m) - utility(net, before, m);
        }
    }
    Ok((d1, d2, d3))
}

/// Exact expected step deltas for a deviating player: the uniform average of
/// the move deltas over the (eps/2)-best set. No sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftExpectation {
    /// E[delta1 + delta2]: the submartingale core.
    pub e1_plus_e2: f64,
    /// E[delta1 + delta2 + delta3]: the expected sum-rate change.
    pub e_total: f64,
    /// Cardinality of the (eps/2)-best set averaged over.
    pub support: usize,
}

pub fn expected_drift(
    net: &NetworkRealization,
    profile: &StrategyProfile,
    n: usize,
    eps: f64,
) -> Result<DriftExpectation> {
    assert!(eps > 0.0, "eps must be positive");
    let n_players = net.n_players();
    let u = utilities_row(net, profile, n);
    let max = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let old = profile.channel(n);
    if u[old] + eps >= max {
        return Err(Error::NotADeviator { player: n });
    }
    let half: Vec<usize> = (0..u.len()).filter(|&k| u[k] + eps / 2.0 >= max).collect();

    // Per-player current state: finite interference (sentinel excluded) and
    // whether the sentinel transmitter shares the channel.
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); profile.num_channels()];
    for m in 0..n_players {
        buckets[profile.channel(m)].push(m);
    }
    let mut fin = vec![0.0f64; n_players];
    let mut sentineled = vec![false; n_players];
    for m in 0..n_players {
        let ch = profile.channel(m);
        sentineled[m] = profile.channel(net.dest(m)) == ch;
        let mut total = 0.0;
        for &j in &buckets[ch] {
            if j != m && j != net.dest(m) {
                total += net.gain(j, m) * net.power(j);
            }
        }
        fin[m] = total;
    }
    let rate_before = |m: usize| -> f64 {
        if sentineled[m] {
            0.0
        } else {
            rate_at(net, m, fin[m])
        }
    };

    // Delta3 is identical for every candidate: the actor leaves `old` either
    // way.
    let mut d3 = 0.0;
    for &m in &buckets[old] {
        if m == n {
            continue;
        }
        let after = if net.dest(m) == n {
            // The sentinel leaves; what remains is the finite part.
            rate_at(net, m, fin[m])
        } else if sentineled[m] {
            0.0
        } else {
            rate_at(net, m, fin[m] - net.gain(n, m) * net.power(n))
        };
        d3 += after - rate_before(m);
    }

    let mut sum12 = 0.0;
    for &k in &half {
        let d1 = u[k] - u[old];
        let mut d2 = 0.0;
        for &m in &buckets[k] {
            if m == n {
                continue;
            }
            let after = if net.dest(m) == n || sentineled[m] {
                0.0
            } else {
                rate_at(net, m, fin[m] + net.gain(n, m) * net.power(n))
            };
            d2 += after - rate_before(m);
        }
        sum12 += d1 + d2;
    }
    let e1_plus_e2 = sum12 / half.len() as f64;
    Ok(DriftExpectation {
        e1_plus_e2,
        e_total: e1_plus_e2 + d3,
        support: half.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{NetworkSpec, RadioParams};
    use crate::geometry::{Point, RegionSpec};
    use crate::seeds::{stream_rng, Stream};
    use proptest::prelude::*;

    /// Crafted game: explicit gain matrix, unit powers and noise. Entry
    /// gain[tx][link]; diagonal is the direct gain.
    fn crafted(channels: usize, dest: Vec<usize>, gain: Vec<f64>) -> NetworkRealization {
        let n = dest.len();
        let positions = (0..n).map(|i| Point::new(i as f64, 0.0)).collect();
        NetworkRealization::from_parts(
            RegionSpec::rectangle(1.0, 1.0).unwrap(),
            RadioParams::reference(),
            channels,
            positions,
            dest,
            vec![1.0; n],
            gain,
        )
        .unwrap()
    }

    fn random_net(n: usize, k: usize, seed: u64) -> NetworkRealization {
        NetworkSpec::new(RegionSpec::disk(10.0).unwrap(), n, k)
            .build(seed)
            .unwrap()
    }

    fn random_profile(net: &NetworkRealization, seed: u64) -> StrategyProfile {
        let mut rng = stream_rng(seed, Stream::InitialProfile);
        StrategyProfile::uniform_random(net.n_players(), net.channels(), &mut rng)
    }

    #[test]
    fn lone_link_sees_zero_interference() {
        // Three players, dest chain 0->1->2->0; everyone on separate channels.
        let g = 1e-3;
        let net = crafted(
            3,
            vec![1, 2, 0],
            vec![
                2.0, g, g, //
                g, 2.0, g, //
                g, g, 2.0,
            ],
        );
        let profile = StrategyProfile::new(vec![0, 1, 2], 3).unwrap();
        assert_eq!(
            interference(&net, &profile, 0, 0),
            Interference::Finite(0.0)
        );
    }

    #[test]
    fn interference_sums_contributors() {
        // Player 0's receiver is node 1; players 2 and 3 share channel 0.
        let n = 4;
        let mut gain = vec![0.0; n * n];
        for i in 0..n {
            gain[i * n + i] = 2.0;
        }
        gain[2 * n] = 0.25; // tx 2 into link 0
        gain[3 * n] = 0.5; // tx 3 into link 0
        let net = crafted(2, vec![1, 0, 3, 2], gain);
        let profile = StrategyProfile::new(vec![0, 1, 0, 0], 2).unwrap();
        match interference(&net, &profile, 0, 0) {
            Interference::Finite(i) => assert!((i - 0.75).abs() < 1e-15),
            Interference::Infinite => panic!("unexpected sentinel"),
        }
    }

    #[test]
    fn sentinel_pair_is_infinite() {
        // dest[0] = 1: if player 1 shares player 0's channel, link 0 dies.
        let net = crafted(
            2,
            vec![1, 0],
            vec![
                4.0,
                f64::INFINITY,
                f64::INFINITY,
                4.0,
            ],
        );
        let shared = StrategyProfile::new(vec![0, 0], 2).unwrap();
        assert!(interference(&net, &shared, 0, 0).is_infinite());
        assert_eq!(utility(&net, &shared, 0), 0.0);
        assert_eq!(utility(&net, &shared, 1), 0.0);
        let split = StrategyProfile::new(vec![0, 1], 2).unwrap();
        assert!(!interference(&net, &split, 0, 0).is_infinite());
    }

    #[test]
    fn utility_matches_snr_formula() {
        // gP/N0 = 100 with zero interference: log2(101).
        let net = crafted(
            2,
            vec![1, 0],
            vec![100.0, 0.0, 0.0, 100.0],
        );
        let profile = StrategyProfile::new(vec![0, 1], 2).unwrap();
        let u = utility(&net, &profile, 0);
        assert!((u - 6.658211482751795).abs() < 1e-12);
    }

    #[test]
    fn unit_sinr_is_one_bit() {
        // direct*P = 2, noise 1, interference 1 => log2(1 + 2/2) = 1.
        let n = 3;
        let mut gain = vec![0.0; n * n];
        gain[0] = 2.0;
        gain[n + 1] = 2.0;
        gain[2 * n + 2] = 2.0;
        gain[2 * n] = 1.0; // tx 2 into link 0
        let net = crafted(2, vec![1, 2, 1], gain);
        let profile = StrategyProfile::new(vec![0, 1, 0], 2).unwrap();
        assert_eq!(utility(&net, &profile, 0), 1.0);
    }

    #[test]
    fn sum_rate_matches_per_player_recomputation() {
        let net = random_net(4, 2, 11);
        for seed in 0..16 {
            let profile = random_profile(&net, seed);
            let direct: f64 = (0..4).map(|m| utility(&net, &profile, m)).sum();
            let fast = sum_rate(&net, &profile);
            assert!((direct - fast).abs() <= 1e-9 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn orthogonal_profile_sums_free_rates() {
        let net = random_net(3, 3, 2);
        let profile = StrategyProfile::new(vec![0, 1, 2], 3).unwrap();
        let expected: f64 = (0..3).map(|m| net.max_rate(m)).sum();
        assert!((sum_rate(&net, &profile) - expected).abs() < 1e-12);
    }

    /// Game where player 0's hypothetical utilities on channels 0 and 1 are
    /// exactly (5.00, 4.95): channel 1 carries a calibrated interferer, and
    /// player 0's destination sits parked on channel 2 (worth 0 to him).
    fn two_level_game() -> (NetworkRealization, StrategyProfile) {
        let s = 2f64.powi(5) - 1.0; // direct SNR for a 5-bit clean rate
        let i = s / (2f64.powf(4.95) - 1.0) - 1.0; // interference for 4.95
        let n = 3;
        let mut gain = vec![0.0; n * n];
        gain[0] = s;
        gain[n + 1] = s;
        gain[2 * n + 2] = s;
        gain[2 * n] = i; // tx 2 into link 0
        let net = crafted(3, vec![1, 2, 1], gain);
        // Player 0 currently shares channel 1 with the interferer.
        let profile = StrategyProfile::new(vec![1, 2, 1], 3).unwrap();
        (net, profile)
    }

    #[test]
    fn eps_best_set_respects_inclusive_threshold() {
        let (net, profile) = two_level_game();
        let u = utilities_row(&net, &profile, 0);
        assert!((u[0] - 5.0).abs() < 1e-12);
        assert!((u[1] - 4.95).abs() < 1e-12);
        assert_eq!(eps_best_set(&net, &profile, 0, 0.1), vec![0, 1]);
        assert_eq!(eps_best_set(&net, &profile, 0, 0.01), vec![0]);
    }

    #[test]
    fn zero_eps_keeps_exact_ties() {
        // Symmetric interferers on channels 0 and 1; player 0's destination
        // is parked on channel 2 so neither tied channel is saturated.
        let n = 4;
        let mut gain = vec![0.0; n * n];
        for i in 0..n {
            gain[i * n + i] = 10.0;
        }
        gain[2 * n] = 0.5; // tx 2 into link 0
        gain[3 * n] = 0.5; // tx 3 into link 0
        let net = crafted(3, vec![1, 0, 3, 2], gain);
        let profile = StrategyProfile::new(vec![0, 2, 0, 1], 3).unwrap();
        assert_eq!(eps_best_set(&net, &profile, 0, 0.0), vec![0, 1]);
    }

    #[test]
    fn br_keeps_eps_best_channel() {
        let (net, profile) = two_level_game();
        let mut rng = stream_rng(1, Stream::Action);
        let (next, deviated) = br_eps(&net, &profile, 0, 0.2, &mut rng);
        assert!(!deviated);
        assert_eq!(next, profile);
    }

    #[test]
    fn br_switches_deterministically_to_singleton() {
        let (net, profile) = two_level_game();
        // eps = 0.04: current (4.95) is deficient; B_{0.02} = {0} only.
        for seed in 0..8 {
            let mut rng = stream_rng(seed, Stream::Action);
            let (next, deviated) = br_eps(&net, &profile, 0, 0.04, &mut rng);
            assert!(deviated);
            assert_eq!(next.channel(0), 0);
        }
    }

    #[test]
    fn every_deviation_gains_more_than_half_eps() {
        let eps = 0.1;
        for seed in 0..10 {
            let net = random_net(12, 3, seed);
            let mut profile = random_profile(&net, seed);
            let mut rng = stream_rng(seed, Stream::Action);
            for n in 0..12 {
                let before = utility(&net, &profile, n);
                let (next, deviated) = br_eps(&net, &profile, n, eps, &mut rng);
                if deviated {
                    let after = utility(&net, &next, n);
                    assert!(
                        after - before > eps / 2.0,
                        "gain {} not above eps/2",
                        after - before
                    );
                    profile = next;
                }
            }
        }
    }

    #[test]
    fn orthogonal_profiles_are_equilibria() {
        let net = random_net(3, 3, 4);
        let profile = StrategyProfile::new(vec![0, 1, 2], 3).unwrap();
        assert!(is_eps_pne(&net, &profile, 0.0));
        assert!(is_eps_pne(&net, &profile, 1.0));
    }

    #[test]
    fn pne_test_agrees_with_exhaustive_deviation_scan() {
        let net = random_net(3, 2, 6);
        for seed in 0..8 {
            let profile = random_profile(&net, seed);
            for &eps in &[0.0, 0.05, 0.5, 2.0] {
                let brute = (0..3).all(|n| {
                    let here = utility(&net, &profile, n);
                    (0..2).all(|k| {
                        hypothetical_utility(&net, &profile, n, k) - eps <= here
                    })
                });
                assert_eq!(is_eps_pne(&net, &profile, eps), brute);
            }
        }
    }

    #[test]
    fn identity_move_has_zero_deltas() {
        let net = random_net(5, 2, 8);
        let profile = random_profile(&net, 3);
        let (d1, d2, d3) = delta_decomposition(&net, &profile, &profile, 2).unwrap();
        assert_eq!((d1, d2, d3), (0.0, 0.0, 0.0));
    }

    #[test]
    fn multi_coordinate_change_is_rejected() {
        let net = random_net(5, 2, 8);
        let before = random_profile(&net, 3);
        let mut after = before.clone();
        after.set_channel(1, 1 - before.channel(1));
        after.set_channel(2, 1 - before.channel(2));
        assert!(matches!(
            delta_decomposition(&net, &before, &after, 1),
            Err(Error::InvalidTransition { .. })
        ));
    }

    #[test]
    fn decomposition_sums_to_sum_rate_difference() {
        for seed in 0..20 {
            let net = random_net(8, 3, seed);
            let before = random_profile(&net, seed + 100);
            let actor = (seed as usize) % 8;
            let new = (before.channel(actor) + 1) % 3;
            let after = before.with_channel(actor, new);
            let (d1, d2, d3) = delta_decomposition(&net, &before, &after, actor).unwrap();
            let dx = sum_rate(&net, &after) - sum_rate(&net, &before);
            assert!(
                ((d1 + d2 + d3) - dx).abs() <= 1e-9 * dx.abs().max(1.0),
                "seed {seed}: {} vs {dx}",
                d1 + d2 + d3
            );
        }
    }

    #[test]
    fn move_to_empty_channel_only_relieves() {
        // Channel 2 is empty; actor leaves a victim behind on channel 0.
        let net = random_net(6, 3, 14);
        let before = StrategyProfile::new(vec![0, 0, 1, 1, 0, 1], 3).unwrap();
        let after = before.with_channel(0, 2);
        let (_, d2, d3) = delta_decomposition(&net, &before, &after, 0).unwrap();
        assert_eq!(d2, 0.0);
        assert!(d3 >= 0.0);
    }

    #[test]
    fn drift_requires_a_deviator() {
        let net = random_net(3, 3, 4);
        let profile = StrategyProfile::new(vec![0, 1, 2], 3).unwrap();
        assert!(matches!(
            expected_drift(&net, &profile, 0, 0.1),
            Err(Error::NotADeviator { .. })
        ));
    }

    #[test]
    fn singleton_support_equals_single_transition() {
        let (net, profile) = two_level_game();
        let drift = expected_drift(&net, &profile, 0, 0.04).unwrap();
        assert_eq!(drift.support, 1);
        let after = profile.with_channel(0, 0);
        let (d1, d2, d3) = delta_decomposition(&net, &profile, &after, 0).unwrap();
        assert!((drift.e1_plus_e2 - (d1 + d2)).abs() < 1e-12);
        assert!((drift.e_total - (d1 + d2 + d3)).abs() < 1e-12);
    }

    #[test]
    fn expected_drift_matches_explicit_enumeration() {
        // Dual route: average delta_decomposition over the (eps/2)-best set
        // and cross-check the total against sum-rate differences.
        let mut checked = 0;
        for seed in 0..40 {
            let net = random_net(4, 3, seed);
            let profile = random_profile(&net, seed + 7);
            for n in 0..4 {
                let eps = 0.1;
                let u = utilities_row(&net, &profile, n);
                let max = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if u[profile.channel(n)] + eps >= max {
                    continue;
                }
                let half: Vec<usize> =
                    (0..3).filter(|&k| u[k] + eps / 2.0 >= max).collect();
                let mut sum12 = 0.0;
                let mut sum_total = 0.0;
                for &k in &half {
                    let after = profile.with_channel(n, k);
                    let (d1, d2, d3) =
                        delta_decomposition(&net, &profile, &after, n).unwrap();
                    sum12 += d1 + d2;
                    let dx = sum_rate(&net, &after) - sum_rate(&net, &profile);
                    assert!(((d1 + d2 + d3) - dx).abs() <= 1e-9 * dx.abs().max(1.0));
                    sum_total += dx;
                }
                let want12 = sum12 / half.len() as f64;
                let want_total = sum_total / half.len() as f64;
                let got = expected_drift(&net, &profile, n, eps).unwrap();
                assert_eq!(got.support, half.len());
                assert!((got.e1_plus_e2 - want12).abs() < 1e-9);
                assert!((got.e_total - want_total).abs() < 1e-9);
                checked += 1;
            }
        }
        assert!(checked > 10, "too few deviating states exercised: {checked}");
    }

    #[test]
    fn rate_cap_is_tight_only_without_interference() {
        let net = random_net(10, 2, 9);
        for seed in 0..8 {
            let profile = random_profile(&net, seed);
            for n in 0..10 {
                let u = utility(&net, &profile, n);
                let cap = net.max_rate(n);
                assert!(u <= cap + 1e-12);
                if let Interference::Finite(i) =
                    interference(&net, &profile, n, profile.channel(n))
                {
                    if i == 0.0 {
                        assert!((u - cap).abs() < 1e-12);
                    } else {
                        assert!(u < cap);
                    }
                }
            }
        }
    }

    #[test]
    fn utility_is_strictly_decreasing_in_interference() {
        let net = random_net(2, 2, 1);
        let s = net.direct(0) * net.power(0);
        let mut last = f64::INFINITY;
        for i in [0.0, 0.1, 1.0, 10.0, 1e4] {
            let r = (1.0 + s / (net.noise() + i)).log2();
            assert!(r < last);
            last = r;
        }
    }

    proptest! {
        // Scaling all powers and the noise floor by a common factor leaves
        // every SINR, hence the best sets and the br draw, unchanged.
        #[test]
        fn argmax_invariance_under_common_scaling(
            seed in 0u64..64,
            factor in prop::sample::select(vec![1e-6, 1e-3, 0.5, 2.0, 1e3, 1e6]),
        ) {
            let net = random_net(8, 3, seed);
            let scaled = net.scaled(factor);
            let profile = random_profile(&net, seed);
            for n in 0..8 {
                let a = eps_best_set(&net, &profile, n, 0.1);
                let b = eps_best_set(&scaled, &profile, n, 0.1);
                prop_assert_eq!(&a, &b);
                let mut r1 = stream_rng(seed, Stream::Action);
                let mut r2 = stream_rng(seed, Stream::Action);
                let (p1, dev1) = br_eps(&net, &profile, n, 0.1, &mut r1);
                let (p2, dev2) = br_eps(&scaled, &profile, n, 0.1, &mut r2);
                prop_assert_eq!(dev1, dev2);
                prop_assert_eq!(p1.channels(), p2.channels());
            }
        }

        #[test]
        fn delta_sum_matches_for_random_moves(
            seed in 0u64..32,
            actor in 0usize..6,
            target in 0usize..3,
        ) {
            let net = random_net(6, 3, seed);
            let before = random_profile(&net, seed + 1);
            let after = before.with_channel(actor, target);
            let (d1, d2, d3) = delta_decomposition(&net, &before, &after, actor).unwrap();
            let dx = sum_rate(&net, &after) - sum_rate(&net, &before);
            prop_assert!(((d1 + d2 + d3) - dx).abs() <= 1e-9 * dx.abs().max(1.0));
            prop_assert!(d3 >= 0.0);
        }
    }
}
