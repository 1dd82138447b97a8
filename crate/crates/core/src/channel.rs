//! The frozen random game: destinations, beam orientations, transmit powers,
//! and the full cross-gain matrix.
//!
//! `gain[tx][link]` is the channel gain from transmitter `tx` into the
//! receiver of `link` (that is, into node `dest[link]`). The entry with
//! `tx == dest[link]` is a self-interference sentinel: a node cannot cancel
//! its own transmission, so a link whose receiver is itself transmitting on
//! the same channel gets infinite interference. The sentinel is a structural
//! flag (`is_sentinel`), never an IEEE infinity inside arithmetic.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Point, RegionSpec};
use crate::seeds::{stream_rng, Stream};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Radio-layer constants of a realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    /// Path-loss exponent; must exceed 2.
    pub alpha: f64,
    /// Carrier wavelength in meters.
    pub wavelength: f64,
    /// Noise power, normalized units.
    pub noise: f64,
    /// Transmit beam width in radians, in (0, 2*pi].
    pub theta_t: f64,
    /// Receive beam width in radians, in (0, 2*pi].
    pub theta_r: f64,
    /// Interference-free SNR target in dB used by power control.
    pub snr_target_db: f64,
    /// Power-cap coefficient; the cap is p0 * (ln N / N)^(alpha/2).
    pub p0: f64,
    /// Whether the power cap is applied. Off in the experiment presets.
    pub power_cap_enabled: bool,
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 2.0) {
            return Err(Error::InvalidParameter(format!(
                "path-loss exponent must exceed 2, got {}",
                self.alpha
            )));
        }
        if !(self.wavelength > 0.0) {
            return Err(Error::InvalidParameter("wavelength must be positive".into()));
        }
        if !(self.noise > 0.0) {
            return Err(Error::InvalidParameter("noise must be positive".into()));
        }
        for (name, theta) in [("theta_t", self.theta_t), ("theta_r", self.theta_r)] {
            if !(theta > 0.0 && theta <= 2.0 * PI + 1e-12) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in (0, 2*pi], got {theta}"
                )));
            }
        }
        if self.power_cap_enabled && !(self.p0 > 0.0) {
            return Err(Error::InvalidParameter("p0 must be positive".into()));
        }
        Ok(())
    }

    /// Gain constant G = (wavelength / 4*pi)^alpha.
    pub fn big_g(&self) -> f64 {
        (self.wavelength / (4.0 * PI)).powf(self.alpha)
    }

    pub fn snr_linear(&self) -> f64 {
        10f64.powf(self.snr_target_db / 10.0)
    }

    /// 2.4 GHz carrier, alpha 3.5, omnidirectional beams, 20 dB SNR target,
    /// unit noise, power cap disabled. The experiment-preset radio.
    pub fn reference() -> Self {
        RadioParams {
            alpha: 3.5,
            wavelength: SPEED_OF_LIGHT / 2.4e9,
            noise: 1.0,
            theta_t: 2.0 * PI,
            theta_r: 2.0 * PI,
            snr_target_db: 20.0,
            p0: 1.0,
            power_cap_enabled: false,
        }
    }
}

/// How beam bisectors are assigned at build time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrientationMode {
    /// All headings zero; meant to pair with 2*pi beams.
    Omni,
    /// Transmit bisector points at the player's own destination; receive
    /// bisector points at the lowest-index link the node serves.
    Aimed,
    /// Headings drawn uniformly at random.
    Random,
}

impl std::str::FromStr for OrientationMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "omni" => Ok(OrientationMode::Omni),
            "aimed" => Ok(OrientationMode::Aimed),
            "random" => Ok(OrientationMode::Random),
            other => Err(format!("unknown orientation `{other}` (omni|aimed|random)")),
        }
    }
}

/// Everything needed to build a realization from a seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub region: RegionSpec,
    pub n_players: usize,
    pub channels: usize,
    pub radio: RadioParams,
    pub orientation: OrientationMode,
    /// Destination candidates per player; clamped to N-1 at build time so the
    /// presets remain valid at tiny N.
    pub neighbor_count: usize,
    /// Maximum links a node may serve as destination; None disables the
    /// constraint (as in the experiment presets).
    pub fanin: Option<usize>,
    /// Optional transmission-range filter on destination candidates.
    pub max_link_distance: Option<f64>,
}

impl NetworkSpec {
    pub fn new(region: RegionSpec, n_players: usize, channels: usize) -> Self {
        NetworkSpec {
            region,
            n_players,
            channels,
            radio: RadioParams::reference(),
            orientation: OrientationMode::Omni,
            neighbor_count: 5,
            fanin: None,
            max_link_distance: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_players < 2 {
            return Err(Error::InvalidParameter(format!(
                "a game needs at least 2 players, got {}",
                self.n_players
            )));
        }
        if self.channels == 0 {
            return Err(Error::InvalidParameter("channel count must be positive".into()));
        }
        if self.neighbor_count == 0 {
            return Err(Error::InvalidParameter("neighbor count must be positive".into()));
        }
        self.radio.validate()
    }

    pub fn build(&self, seed: u64) -> Result<NetworkRealization> {
        build_realization(self, seed)
    }
}

/// Gain from a transmitter to a receiver: G / r^alpha gated by both beam
/// indicators, exactly 0 when either beam misses. With 2*pi beams the
/// indicators always pass.
pub fn compute_gain(
    tx: Point,
    tx_heading: f64,
    rx: Point,
    rx_heading: f64,
    params: &RadioParams,
) -> Result<f64> {
    if tx == rx {
        return Err(Error::DegenerateGeometry(
            "transmitter and receiver coincide; gain is infinite".into(),
        ));
    }
    let off_tx = geometry::angle_offset(tx, rx, tx_heading)?;
    if off_tx.abs() > params.theta_t / 2.0 {
        return Ok(0.0);
    }
    let off_rx = geometry::angle_offset(rx, tx, rx_heading)?;
    if off_rx.abs() > params.theta_r / 2.0 {
        return Ok(0.0);
    }
    let r = geometry::distance(tx, rx);
    Ok(params.big_g() / r.powf(params.alpha))
}

/// Transmit power meeting the interference-free SNR target, optionally
/// clipped to the cap P_max = p0 * (ln N / N)^(alpha/2).
pub fn power_control(direct_gain: f64, params: &RadioParams, n_players: usize) -> Result<f64> {
    if !(direct_gain > 0.0) {
        return Err(Error::UnreachableDestination { gain: direct_gain });
    }
    let mut p = params.snr_linear() * params.noise / direct_gain;
    if params.power_cap_enabled {
        let n = n_players as f64;
        let cap = params.p0 * (n.ln() / n).powf(params.alpha / 2.0);
        p = p.min(cap);
    }
    Ok(p)
}

/// Draw each player's destination uniformly from its `candidate_count`
/// nearest neighbors, honoring an optional fan-in limit and an optional
/// link-distance filter. Infeasible constraints surface as an error so the
/// caller can resample the geometry.
pub fn assign_destinations<R: Rng>(
    positions: &[Point],
    candidate_count: usize,
    fanin_limit: Option<usize>,
    max_distance: Option<f64>,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let n = positions.len();
    if n < 2 {
        return Err(Error::InsufficientPlayers {
            requested: candidate_count,
            available: n.saturating_sub(1),
        });
    }
    let mut dest = Vec::with_capacity(n);
    let mut fanin = vec![0usize; n];
    for player in 0..n {
        let mut cands = geometry::nearest_neighbors(positions, player, candidate_count)?;
        if let Some(r_max) = max_distance {
            cands.retain(|&c| geometry::distance(positions[player], positions[c]) <= r_max);
            if cands.is_empty() {
                return Err(Error::AssignmentInfeasible(format!(
                    "player {player} has no candidate within range {r_max}"
                )));
            }
        }
        if let Some(limit) = fanin_limit {
            cands.retain(|&c| fanin[c] < limit);
            if cands.is_empty() {
                return Err(Error::AssignmentInfeasible(format!(
                    "player {player} has no candidate below fan-in limit {limit}"
                )));
            }
        }
        let choice = cands[rng.gen_range(0..cands.len())];
        fanin[choice] += 1;
        dest.push(choice);
    }
    Ok(dest)
}

/// A frozen random interference game. Immutable after build.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkRealization {
    seed: u64,
    region: RegionSpec,
    radio: RadioParams,
    orientation: OrientationMode,
    channels: usize,
    positions: Vec<Point>,
    dest: Vec<usize>,
    tx_heading: Vec<f64>,
    rx_heading: Vec<f64>,
    power: Vec<f64>,
    /// Row-major [tx * n + link]; sentinel entries hold +inf as a marker and
    /// are never read by arithmetic paths.
    gain: Vec<f64>,
    direct: Vec<f64>,
}

/// Serializable form of a realization; the gain matrix is recomputed on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RealizationDoc {
    pub seed: u64,
    pub region: RegionSpec,
    pub radio: RadioParams,
    pub orientation: OrientationMode,
    pub channels: usize,
    pub positions: Vec<Point>,
    pub dest: Vec<usize>,
    pub tx_heading: Vec<f64>,
    pub rx_heading: Vec<f64>,
    pub power: Vec<f64>,
}

fn receive_headings(
    positions: &[Point],
    dest: &[usize],
    orientation: OrientationMode,
    rng: &mut impl Rng,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = positions.len();
    match orientation {
        OrientationMode::Omni => Ok((vec![0.0; n], vec![0.0; n])),
        OrientationMode::Random => {
            let mut tx = Vec::with_capacity(n);
            let mut rx = Vec::with_capacity(n);
            for _ in 0..n {
                tx.push(rng.gen::<f64>() * 2.0 * PI - PI);
            }
            for _ in 0..n {
                rx.push(rng.gen::<f64>() * 2.0 * PI - PI);
            }
            Ok((tx, rx))
        }
        OrientationMode::Aimed => {
            let mut tx = Vec::with_capacity(n);
            for player in 0..n {
                tx.push(geometry::angle_offset(
                    positions[player],
                    positions[dest[player]],
                    0.0,
                )?);
            }
            // Receive bisector points at the lowest-index link served; nodes
            // serving no one never have their receive beam consulted.
            let mut rx = vec![0.0; n];
            for node in 0..n {
                if let Some(m) = (0..n).find(|&m| dest[m] == node) {
                    rx[node] = geometry::angle_offset(positions[node], positions[m], 0.0)?;
                }
            }
            Ok((tx, rx))
        }
    }
}

/// Assemble the full game: placement, destinations, orientations, powers and
/// the gain matrix. Deterministic given the seed; placement, destinations and
/// orientations each consume their own derived stream.
pub fn build_realization(spec: &NetworkSpec, seed: u64) -> Result<NetworkRealization> {
    spec.validate()?;
    let n = spec.n_players;
    let mut placement_rng = stream_rng(seed, Stream::Placement);
    let positions = geometry::sample_positions(spec.region, n, &mut placement_rng)?;

    let mut dest_rng = stream_rng(seed, Stream::Destinations);
    let k = spec.neighbor_count.min(n - 1);
    let dest = assign_destinations(
        &positions,
        k,
        spec.fanin,
        spec.max_link_distance,
        &mut dest_rng,
    )?;

    let mut orient_rng = stream_rng(seed, Stream::Orientations);
    let (tx_heading, rx_heading) =
        receive_headings(&positions, &dest, spec.orientation, &mut orient_rng)?;

    let mut gain = vec![0.0f64; n * n];
    let mut direct = vec![0.0f64; n];
    for tx in 0..n {
        for link in 0..n {
            if dest[link] == tx {
                gain[tx * n + link] = f64::INFINITY;
                continue;
            }
            let receiver = dest[link];
            let g = compute_gain(
                positions[tx],
                tx_heading[tx],
                positions[receiver],
                rx_heading[receiver],
                &spec.radio,
            )?;
            gain[tx * n + link] = g;
            if tx == link {
                direct[link] = g;
            }
        }
    }

    let mut power = Vec::with_capacity(n);
    for player in 0..n {
        power.push(power_control(direct[player], &spec.radio, n)?);
    }

    Ok(NetworkRealization {
        seed,
        region: spec.region,
        radio: spec.radio,
        orientation: spec.orientation,
        channels: spec.channels,
        positions,
        dest,
        tx_heading,
        rx_heading,
        power,
        gain,
        direct,
    })
}

impl NetworkRealization {
    /// Assemble a game from explicit parts (crafted instances, tests). The
    /// gain matrix is taken as given; entries with `dest[link] == tx` are
    /// treated as sentinels regardless of the stored value.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        region: RegionSpec,
        radio: RadioParams,
        channels: usize,
        positions: Vec<Point>,
        dest: Vec<usize>,
        power: Vec<f64>,
        gain: Vec<f64>,
    ) -> Result<Self> {
        let n = positions.len();
        if n < 2 {
            return Err(Error::InvalidParameter("need at least 2 players".into()));
        }
        if dest.len() != n || power.len() != n || gain.len() != n * n {
            return Err(Error::InvalidParameter("mismatched part lengths".into()));
        }
        if channels == 0 {
            return Err(Error::InvalidParameter("channel count must be positive".into()));
        }
        for (player, &d) in dest.iter().enumerate() {
            if d >= n || d == player {
                return Err(Error::InvalidParameter(format!(
                    "dest[{player}] = {d} is invalid"
                )));
            }
        }
        let mut direct = vec![0.0; n];
        for player in 0..n {
            direct[player] = gain[player * n + player];
            if !(direct[player] > 0.0) {
                return Err(Error::UnreachableDestination {
                    gain: direct[player],
                });
            }
        }
        Ok(NetworkRealization {
            seed: 0,
            region,
            radio,
            orientation: OrientationMode::Omni,
            channels,
            positions,
            tx_heading: vec![0.0; n],
            rx_heading: vec![0.0; n],
            dest,
            power,
            gain,
            direct,
        })
    }

    pub fn n_players(&self) -> usize {
        self.positions.len()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn region(&self) -> RegionSpec {
        self.region
    }

    pub fn radio(&self) -> &RadioParams {
        &self.radio
    }

    pub fn noise(&self) -> f64 {
        self.radio.noise
    }

    pub fn position(&self, player: usize) -> Point {
        self.positions[player]
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn dest(&self, player: usize) -> usize {
        self.dest[player]
    }

    pub fn dests(&self) -> &[usize] {
        &self.dest
    }

    pub fn tx_heading(&self, player: usize) -> f64 {
        self.tx_heading[player]
    }

    pub fn rx_heading(&self, node: usize) -> f64 {
        self.rx_heading[node]
    }

    pub fn power(&self, player: usize) -> f64 {
        self.power[player]
    }

    /// True when transmitter `tx` saturates `link`'s receiver (the receiver
    /// is `tx` itself).
    pub fn is_sentinel(&self, tx: usize, link: usize) -> bool {
        self.dest[link] == tx
    }

    /// Finite cross gain from `tx` into `link`'s receiver. Must not be called
    /// on a sentinel pair.
    pub fn gain(&self, tx: usize, link: usize) -> f64 {
        debug_assert!(!self.is_sentinel(tx, link));
        self.gain[tx * self.positions.len() + link]
    }

    pub fn direct(&self, player: usize) -> f64 {
        self.direct[player]
    }

    /// The (tx, link) pairs flagged infinite: one per link, tx = dest[link].
    pub fn self_victims(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.dest.iter().enumerate().map(|(link, &d)| (d, link))
    }

    /// Interference-free rate cap log2(1 + direct * power / noise).
    pub fn max_rate(&self, player: usize) -> f64 {
        (1.0 + self.direct[player] * self.power[player] / self.radio.noise).log2()
    }

    /// Mean interference-free rate over players.
    pub fn cbar(&self) -> f64 {
        (0..self.n_players()).map(|p| self.max_rate(p)).sum::<f64>() / self.n_players() as f64
    }

    /// Scale all powers and the noise floor by a common positive factor.
    /// Every SINR is invariant under this; used by scaling tests.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.radio.noise *= factor;
        for p in out.power.iter_mut() {
            *p *= factor;
        }
        out
    }

    pub fn to_doc(&self) -> RealizationDoc {
        RealizationDoc {
            seed: self.seed,
            region: self.region,
            radio: self.radio,
            orientation: self.orientation,
            channels: self.channels,
            positions: self.positions.clone(),
            dest: self.dest.clone(),
            tx_heading: self.tx_heading.clone(),
            rx_heading: self.rx_heading.clone(),
            power: self.power.clone(),
        }
    }

    /// Rebuild from a document, recomputing the gain matrix from the stored
    /// geometry. Stored powers are honored as-is.
    pub fn from_doc(doc: RealizationDoc) -> Result<Self> {
        doc.radio.validate()?;
        let n = doc.positions.len();
        if n < 2 || doc.dest.len() != n || doc.power.len() != n {
            return Err(Error::InvalidParameter("malformed realization document".into()));
        }
        for (player, &d) in doc.dest.iter().enumerate() {
            if d >= n || d == player {
                return Err(Error::InvalidParameter(format!(
                    "dest[{player}] = {d} is invalid"
                )));
            }
        }
        let mut gain = vec![0.0f64; n * n];
        let mut direct = vec![0.0f64; n];
        for tx in 0..n {
            for link in 0..n {
                if doc.dest[link] == tx {
                    gain[tx * n + link] = f64::INFINITY;
                    continue;
                }
                let receiver = doc.dest[link];
                let g = compute_gain(
                    doc.positions[tx],
                    doc.tx_heading[tx],
                    doc.positions[receiver],
                    doc.rx_heading[receiver],
                    &doc.radio,
                )?;
                gain[tx * n + link] = g;
                if tx == link {
                    direct[link] = g;
                }
            }
        }
        for (player, &d) in direct.iter().enumerate() {
            if !(d > 0.0) {
                return Err(Error::UnreachableDestination { gain: direct[player] });
            }
        }
        Ok(NetworkRealization {
            seed: doc.seed,
            region: doc.region,
            radio: doc.radio,
            orientation: doc.orientation,
            channels: doc.channels,
            positions: doc.positions,
            dest: doc.dest,
            tx_heading: doc.tx_heading,
            rx_heading: doc.rx_heading,
            power: doc.power,
            gain,
            direct,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::{stream_rng, Stream};

    fn reference_spec(n: usize, k: usize) -> NetworkSpec {
        NetworkSpec::new(RegionSpec::disk(10.0).unwrap(), n, k)
    }

    #[test]
    fn gain_constant_matches_closed_form() {
        // G = (nu / 4*pi)^3.5 for nu = c / 2.4 GHz, evaluated independently.
        let params = RadioParams::reference();
        let expected = 9.79261296555032e-8;
        let g = compute_gain(
            Point::new(0.0, 0.0),
            0.0,
            Point::new(1.0, 0.0),
            0.0,
            &params,
        )
        .unwrap();
        assert!(
            (g - expected).abs() / expected < 1e-12,
            "G = {g:e}, expected {expected:e}"
        );
    }

    #[test]
    fn beam_miss_zeroes_gain() {
        let mut params = RadioParams::reference();
        params.theta_t = PI / 2.0;
        // Receiver sits opposite the transmit bisector.
        let g = compute_gain(
            Point::new(0.0, 0.0),
            0.0,
            Point::new(-1.0, 0.0),
            0.0,
            &params,
        )
        .unwrap();
        assert_eq!(g, 0.0);
    }

    #[test]
    fn gain_follows_power_law() {
        let params = RadioParams::reference();
        let g1 = compute_gain(Point::new(0.0, 0.0), 0.0, Point::new(1.5, 0.0), 0.0, &params)
            .unwrap();
        let g2 = compute_gain(Point::new(0.0, 0.0), 0.0, Point::new(3.0, 0.0), 0.0, &params)
            .unwrap();
        let ratio = g1 / g2;
        let expected = 2f64.powf(params.alpha);
        assert!((ratio - expected).abs() / expected < 1e-12);
    }

    #[test]
    fn coincident_nodes_are_degenerate() {
        let params = RadioParams::reference();
        let p = Point::new(1.0, 1.0);
        assert!(matches!(
            compute_gain(p, 0.0, p, 0.0, &params),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn power_control_hits_snr_target() {
        let params = RadioParams::reference(); // 20 dB, noise 1
        let p = power_control(4.0, &params, 100).unwrap();
        assert!((p - 25.0).abs() < 1e-12);
        assert!((4.0 * p / params.noise - 100.0).abs() < 1e-9);
    }

    #[test]
    fn power_cap_binds_when_tiny() {
        let mut params = RadioParams::reference();
        params.power_cap_enabled = true;
        params.p0 = 1e-9;
        let n = 100usize;
        let cap = params.p0 * ((n as f64).ln() / n as f64).powf(params.alpha / 2.0);
        let p = power_control(4.0, &params, n).unwrap();
        assert_eq!(p, cap);
    }

    #[test]
    fn zero_db_snr_gives_reciprocal_gain() {
        let mut params = RadioParams::reference();
        params.snr_target_db = 0.0;
        let g = 0.37;
        let p = power_control(g, &params, 10).unwrap();
        assert!((p - 1.0 / g).abs() / (1.0 / g) < 1e-12);
    }

    #[test]
    fn zero_gain_is_unreachable() {
        let params = RadioParams::reference();
        assert!(matches!(
            power_control(0.0, &params, 10),
            Err(Error::UnreachableDestination { .. })
        ));
    }

    #[test]
    fn two_players_force_each_other() {
        let positions = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0)];
        for seed in 0..8 {
            let mut rng = stream_rng(seed, Stream::Destinations);
            let dest = assign_destinations(&positions, 1, None, None, &mut rng).unwrap();
            assert_eq!(dest, vec![1, 0]);
        }
    }

    #[test]
    fn destinations_stay_within_candidate_set() {
        let region = RegionSpec::disk(10.0).unwrap();
        let mut prng = stream_rng(3, Stream::Placement);
        let positions = geometry::sample_positions(region, 100, &mut prng).unwrap();
        let mut drng = stream_rng(3, Stream::Destinations);
        let dest = assign_destinations(&positions, 5, None, None, &mut drng).unwrap();
        for (player, &d) in dest.iter().enumerate() {
            let nn = geometry::nearest_neighbors(&positions, player, 5).unwrap();
            assert!(nn.contains(&d), "dest[{player}] = {d} not among 5-NN {nn:?}");
            assert_ne!(d, player);
        }
    }

    #[test]
    fn unit_fanin_with_single_candidate_is_matching_or_error() {
        let region = RegionSpec::disk(10.0).unwrap();
        let mut matched = 0;
        let mut infeasible = 0;
        for seed in 0..40 {
            let mut prng = stream_rng(seed, Stream::Placement);
            let positions = geometry::sample_positions(region, 10, &mut prng).unwrap();
            let mut drng = stream_rng(seed, Stream::Destinations);
            match assign_destinations(&positions, 1, Some(1), None, &mut drng) {
                Ok(dest) => {
                    let mut fanin = vec![0usize; 10];
                    for &d in &dest {
                        fanin[d] += 1;
                    }
                    assert!(fanin.iter().all(|&f| f <= 1));
                    matched += 1;
                }
                Err(Error::AssignmentInfeasible(_)) => infeasible += 1,
                Err(e) => panic!("unexpected error {e}"),
            }
        }
        assert!(matched + infeasible == 40 && matched > 0);
    }

    #[test]
    fn fanin_limit_respected_when_enabled() {
        let region = RegionSpec::disk(10.0).unwrap();
        let mut prng = stream_rng(11, Stream::Placement);
        let positions = geometry::sample_positions(region, 60, &mut prng).unwrap();
        let mut drng = stream_rng(11, Stream::Destinations);
        let dest = assign_destinations(&positions, 5, Some(2), None, &mut drng).unwrap();
        let mut fanin = vec![0usize; 60];
        for &d in &dest {
            fanin[d] += 1;
        }
        assert!(fanin.iter().all(|&f| f <= 2));
    }

    #[test]
    fn max_distance_filter_can_reject() {
        let positions = vec![
            Point::new(0.0, 0.0),
            Point::new(5.0, 0.0),
            Point::new(10.0, 0.0),
        ];
        let mut rng = stream_rng(0, Stream::Destinations);
        assert!(matches!(
            assign_destinations(&positions, 2, None, Some(1.0), &mut rng),
            Err(Error::AssignmentInfeasible(_))
        ));
    }

    #[test]
    fn two_player_build_has_sentinel_cross_entries() {
        let net = reference_spec(2, 2).build(7).unwrap();
        assert_eq!(net.dests(), &[1, 0]);
        assert!(net.direct(0) > 0.0 && net.direct(1) > 0.0);
        // d(1) = 0, so transmitter 0 saturates link 1; symmetrically for 1.
        assert!(net.is_sentinel(0, 1));
        assert!(net.is_sentinel(1, 0));
        assert!(!net.is_sentinel(0, 0));
        assert!(!net.is_sentinel(1, 1));
        assert_eq!(net.self_victims().collect::<Vec<_>>(), vec![(1, 0), (0, 1)]);
    }

    #[test]
    fn build_is_deterministic() {
        let spec = {
            let mut s = reference_spec(50, 5);
            s.neighbor_count = 5;
            s
        };
        let a = spec.build(424242).unwrap();
        let b = spec.build(424242).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn finite_gains_satisfy_path_loss_identity() {
        // gain * r^alpha = G for every finite entry, distances recomputed
        // independently from positions.
        let net = reference_spec(100, 10).build(5).unwrap();
        let g_const = net.radio().big_g();
        for tx in 0..100 {
            for link in 0..100 {
                if net.is_sentinel(tx, link) {
                    continue;
                }
                let r = geometry::distance(net.position(tx), net.position(net.dest(link)));
                let lhs = net.gain(tx, link) * r.powf(net.radio().alpha);
                assert!(
                    (lhs - g_const).abs() / g_const < 1e-12,
                    "tx={tx} link={link}: {lhs:e} vs {g_const:e}"
                );
            }
        }
    }

    #[test]
    fn omni_mode_zeroes_no_entry() {
        let net = reference_spec(40, 4).build(9).unwrap();
        for tx in 0..40 {
            for link in 0..40 {
                if !net.is_sentinel(tx, link) {
                    assert!(net.gain(tx, link) > 0.0);
                }
            }
        }
    }

    #[test]
    fn aimed_mode_keeps_direct_links_alive() {
        let mut spec = reference_spec(30, 3);
        spec.orientation = OrientationMode::Aimed;
        spec.radio.theta_t = 2.0 * PI / 3.0;
        // theta_r stays 2*pi: every transmit bisector points at its own
        // destination so direct links always pass the transmit indicator.
        let net = spec.build(21).unwrap();
        for p in 0..30 {
            assert!(net.direct(p) > 0.0);
        }
    }

    #[test]
    fn json_roundtrip_rebuilds_identical_realization() {
        let net = reference_spec(25, 5).build(99).unwrap();
        let text = serde_json::to_string(&net.to_doc()).unwrap();
        let doc: RealizationDoc = serde_json::from_str(&text).unwrap();
        let back = NetworkRealization::from_doc(doc).unwrap();
        assert_eq!(net, back);
    }
}
