//! Experiment configuration: presets for the reference experiments and a
//! flat `key = value` config-file format with section prefixes.
//!
//! Unknown keys are rejected; every error carries the offending key path.

use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::channel::{NetworkSpec, OrientationMode, RadioParams};
use crate::dynamics::{RunOptions, SchedulePolicy};
use crate::error::{Error, Result};
use crate::geometry::RegionSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Custom,
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::Fig6 => "fig6",
            Preset::Custom => "custom",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fig3" => Ok(Preset::Fig3),
            "fig4" => Ok(Preset::Fig4),
            "fig5" => Ok(Preset::Fig5),
            "fig6" => Ok(Preset::Fig6),
            "custom" => Ok(Preset::Custom),
            other => Err(format!("unknown preset `{other}`")),
        }
    }
}

/// Second grid axis: either a load grid (K derived as round(N/l)) or an
/// explicit channel-count grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ChannelAxis {
    Loads(Vec<f64>),
    Channels(Vec<usize>),
}

/// One cell of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub index: usize,
    pub n: usize,
    pub k: usize,
    pub load: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub n_values: Vec<usize>,
    pub channel_axis: ChannelAxis,
    pub eps_values: Vec<f64>,
    pub realizations: usize,
    pub policy: SchedulePolicy,
    pub radio: RadioParams,
    pub region: RegionSpec,
    pub orientation: OrientationMode,
    pub neighbor_count: usize,
    pub fanin: Option<usize>,
    pub max_link_distance: Option<f64>,
    pub seed: u64,
    /// 0 resolves to 200 * N at run time.
    pub max_steps: usize,
    pub paranoid: bool,
    pub out_dir: PathBuf,
    /// Profile draws per realization for the random-allocation baseline.
    pub baseline_samples: usize,
    /// Keys overridden on top of the preset, recorded for provenance.
    pub overrides: Vec<String>,
}

impl ExperimentConfig {
    fn base(preset: Preset) -> Self {
        ExperimentConfig {
            preset,
            n_values: Vec::new(),
            channel_axis: ChannelAxis::Loads(Vec::new()),
            eps_values: Vec::new(),
            realizations: 1,
            policy: SchedulePolicy::Deviators,
            radio: RadioParams::reference(),
            region: RegionSpec::Disk { radius: 10.0 },
            orientation: OrientationMode::Omni,
            neighbor_count: 5,
            fanin: None,
            max_link_distance: None,
            seed: 0,
            max_steps: 0,
            paranoid: false,
            out_dir: PathBuf::from("results"),
            baseline_samples: 20,
            overrides: Vec::new(),
        }
    }

    /// Single-realization beamforming run: N=50, K=5, eps=0.1, transmit beam
    /// 2*pi/3 aimed at each destination.
    pub fn fig3() -> Self {
        let mut c = Self::base(Preset::Fig3);
        c.n_values = vec![50];
        c.channel_axis = ChannelAxis::Channels(vec![5]);
        c.eps_values = vec![0.1];
        c.realizations = 1;
        c.radio.theta_t = 2.0 * PI / 3.0;
        c.orientation = OrientationMode::Aimed;
        c
    }

    /// Convergence-time grid: N in {50..400}, load 10, eps 0.1, 100
    /// realizations.
    pub fn fig4() -> Self {
        let mut c = Self::base(Preset::Fig4);
        c.n_values = vec![50, 100, 200, 300, 400];
        c.channel_axis = ChannelAxis::Loads(vec![10.0]);
        c.eps_values = vec![0.1];
        c.realizations = 100;
        c
    }

    /// Rate-versus-load grid at N=300, eps 0.5.
    pub fn fig5() -> Self {
        let mut c = Self::base(Preset::Fig5);
        c.n_values = vec![300];
        c.channel_axis =
            ChannelAxis::Loads(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 10.0, 15.0, 20.0]);
        c.eps_values = vec![0.5];
        c.realizations = 100;
        c
    }

    /// Epsilon trade-off grid at N=200, K=50, 200 realizations.
    pub fn fig6() -> Self {
        let mut c = Self::base(Preset::Fig6);
        c.n_values = vec![200];
        c.channel_axis = ChannelAxis::Channels(vec![50]);
        c.eps_values = vec![0.01, 0.1, 0.5, 1.0, 1.5, 2.0, 2.5];
        c.realizations = 200;
        c
    }

    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Fig3 => Self::fig3(),
            Preset::Fig4 => Self::fig4(),
            Preset::Fig5 => Self::fig5(),
            Preset::Fig6 => Self::fig6(),
            Preset::Custom => Self::base(Preset::Custom),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() {
            return Err(Error::config(
                "sweep.n",
                "required keys: sweep.n, sweep.eps, and sweep.load or sweep.channels",
            ));
        }
        if self.eps_values.is_empty() {
            return Err(Error::config("sweep.eps", "at least one epsilon is required"));
        }
        let axis_empty = match &self.channel_axis {
            ChannelAxis::Loads(v) => v.is_empty(),
            ChannelAxis::Channels(v) => v.is_empty(),
        };
        if axis_empty {
            return Err(Error::config(
                "sweep.load",
                "one of sweep.load or sweep.channels is required",
            ));
        }
        for &n in &self.n_values {
            if n < 2 {
                return Err(Error::config("sweep.n", format!("N must be >= 2, got {n}")));
            }
        }
        for &e in &self.eps_values {
            if !(e > 0.0) {
                return Err(Error::config(
                    "sweep.eps",
                    format!("epsilon must be positive, got {e}"),
                ));
            }
        }
        match &self.channel_axis {
            ChannelAxis::Loads(ls) => {
                for &l in ls {
                    if !(l > 0.0) {
                        return Err(Error::config(
                            "sweep.load",
                            format!("load must be positive, got {l}"),
                        ));
                    }
                }
            }
            ChannelAxis::Channels(ks) => {
                for &k in ks {
                    if k == 0 {
                        return Err(Error::config("sweep.channels", "channel count must be >= 1"));
                    }
                }
            }
        }
        if self.realizations == 0 {
            return Err(Error::config("realizations", "must be >= 1"));
        }
        if self.baseline_samples == 0 {
            return Err(Error::config("baseline_samples", "must be >= 1"));
        }
        self.radio
            .validate()
            .map_err(|e| Error::config("radio", e.to_string()))?;
        Ok(())
    }

    /// Cartesian grid over (N, channel axis, eps), in declaration order.
    pub fn grid(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        let mut index = 0;
        for &n in &self.n_values {
            let ks: Vec<usize> = match &self.channel_axis {
                ChannelAxis::Loads(ls) => ls
                    .iter()
                    .map(|&l| ((n as f64 / l).round() as usize).max(1))
                    .collect(),
                ChannelAxis::Channels(ks) => ks.clone(),
            };
            for &k in &ks {
                for &eps in &self.eps_values {
                    out.push(GridPoint {
                        index,
                        n,
                        k,
                        load: n as f64 / k as f64,
                        eps,
                    });
                    index += 1;
                }
            }
        }
        out
    }

    pub fn network_spec(&self, n: usize, k: usize) -> NetworkSpec {
        NetworkSpec {
            region: self.region,
            n_players: n,
            channels: k,
            radio: self.radio,
            orientation: self.orientation,
            neighbor_count: self.neighbor_count,
            fanin: self.fanin,
            max_link_distance: self.max_link_distance,
        }
    }

    pub fn run_options(&self, eps: f64) -> RunOptions {
        RunOptions {
            eps,
            policy: self.policy,
            max_steps: self.max_steps,
            paranoid: self.paranoid,
        }
    }

    /// Deterministic dump of every effective field; hashed for provenance.
    pub fn canonical_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("preset = {}\n", self.preset));
        s.push_str(&format!(
            "sweep.n = {}\n",
            join(self.n_values.iter().map(|v| v.to_string()))
        ));
        match &self.channel_axis {
            ChannelAxis::Loads(ls) => s.push_str(&format!(
                "sweep.load = {}\n",
                join(ls.iter().map(|v| v.to_string()))
            )),
            ChannelAxis::Channels(ks) => s.push_str(&format!(
                "sweep.channels = {}\n",
                join(ks.iter().map(|v| v.to_string()))
            )),
        }
        s.push_str(&format!(
            "sweep.eps = {}\n",
            join(self.eps_values.iter().map(|v| v.to_string()))
        ));
        s.push_str(&format!("realizations = {}\n", self.realizations));
        s.push_str(&format!(
            "dynamics.policy = {}\n",
            match self.policy {
                SchedulePolicy::AllPlayers => "all",
                SchedulePolicy::Deviators => "deviators",
            }
        ));
        s.push_str(&format!("dynamics.paranoid = {}\n", self.paranoid));
        match self.region {
            RegionSpec::Disk { radius } => {
                s.push_str("region.shape = disk\n");
                s.push_str(&format!("region.radius = {radius}\n"));
            }
            RegionSpec::Rectangle { width, height } => {
                s.push_str("region.shape = rectangle\n");
                s.push_str(&format!("region.width = {width}\n"));
                s.push_str(&format!("region.height = {height}\n"));
            }
        }
        s.push_str(&format!("radio.alpha = {}\n", self.radio.alpha));
        s.push_str(&format!("radio.wavelength = {}\n", self.radio.wavelength));
        s.push_str(&format!("radio.noise = {}\n", self.radio.noise));
        s.push_str(&format!("radio.theta_t = {}\n", self.radio.theta_t));
        s.push_str(&format!("radio.theta_r = {}\n", self.radio.theta_r));
        s.push_str(&format!("radio.snr_db = {}\n", self.radio.snr_target_db));
        s.push_str(&format!("radio.p0 = {}\n", self.radio.p0));
        s.push_str(&format!("radio.power_cap = {}\n", self.radio.power_cap_enabled));
        s.push_str(&format!(
            "network.orientation = {}\n",
            match self.orientation {
                OrientationMode::Omni => "omni",
                OrientationMode::Aimed => "aimed",
                OrientationMode::Random => "random",
            }
        ));
        s.push_str(&format!("network.neighbors = {}\n", self.neighbor_count));
        s.push_str(&format!("network.fanin = {}\n", self.fanin.unwrap_or(0)));
        s.push_str(&format!(
            "network.max_link_distance = {}\n",
            self.max_link_distance.unwrap_or(0.0)
        ));
        s.push_str(&format!("seed = {}\n", self.seed));
        s.push_str(&format!("max_steps = {}\n", self.max_steps));
        s.push_str(&format!("baseline_samples = {}\n", self.baseline_samples));
        s
    }

    pub fn config_hash(&self) -> u64 {
        fnv1a64(self.canonical_text().as_bytes())
    }
}

fn join(items: impl Iterator<Item = String>) -> String {
    items.collect::<Vec<_>>().join(",")
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| Error::config(key, format!("cannot parse `{value}`")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|item| parse_num::<T>(key, item))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => Err(Error::config(key, format!("cannot parse `{other}` as bool"))),
    }
}

/// Parse the flat `key = value` config format. A `preset` key selects the
/// starting defaults; every other key overrides on top and is recorded.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::config(
                format!("line {}", lineno + 1),
                format!("expected `key = value`, got `{line}`"),
            ));
        };
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }

    let preset = match pairs.iter().find(|(k, _)| k == "preset") {
        Some((_, v)) => v
            .parse::<Preset>()
            .map_err(|e| Error::config("preset", e))?,
        None => Preset::Custom,
    };
    let mut cfg = ExperimentConfig::preset(preset);

    // Region pieces assemble after all keys are read so the declaration
    // order of shape/radius/width/height does not matter.
    let (mut shape, mut radius, mut width, mut height) = match cfg.region {
        RegionSpec::Disk { radius } => ("disk".to_string(), radius, 1.0, 1.0),
        RegionSpec::Rectangle { width, height } => {
            ("rectangle".to_string(), 10.0, width, height)
        }
    };

    for (key, value) in &pairs {
        let key = key.as_str();
        let value = value.as_str();
        match key {
            "preset" => {}
            "seed" => cfg.seed = parse_num(key, value)?,
            "realizations" => cfg.realizations = parse_num(key, value)?,
            "max_steps" => cfg.max_steps = parse_num(key, value)?,
            "baseline_samples" => cfg.baseline_samples = parse_num(key, value)?,
            "out" => cfg.out_dir = PathBuf::from(value),
            "sweep.n" => cfg.n_values = parse_list(key, value)?,
            "sweep.eps" => cfg.eps_values = parse_list(key, value)?,
            "sweep.load" => cfg.channel_axis = ChannelAxis::Loads(parse_list(key, value)?),
            "sweep.channels" => {
                cfg.channel_axis = ChannelAxis::Channels(parse_list(key, value)?)
            }
            "dynamics.policy" => {
                cfg.policy = value
                    .parse::<SchedulePolicy>()
                    .map_err(|e| Error::config(key, e))?
            }
            "dynamics.paranoid" => cfg.paranoid = parse_bool(key, value)?,
            "region.shape" => shape = value.to_string(),
            "region.radius" => radius = parse_num(key, value)?,
            "region.width" => width = parse_num(key, value)?,
            "region.height" => height = parse_num(key, value)?,
            "radio.alpha" => cfg.radio.alpha = parse_num(key, value)?,
            "radio.wavelength" => cfg.radio.wavelength = parse_num(key, value)?,
            "radio.frequency_ghz" => {
                let ghz: f64 = parse_num(key, value)?;
                if !(ghz > 0.0) {
                    return Err(Error::config(key, "frequency must be positive"));
                }
                cfg.radio.wavelength = crate::channel::SPEED_OF_LIGHT / (ghz * 1e9);
            }
            "radio.noise" => cfg.radio.noise = parse_num(key, value)?,
            "radio.theta_t" => cfg.radio.theta_t = parse_num(key, value)?,
            "radio.theta_r" => cfg.radio.theta_r = parse_num(key, value)?,
            "radio.snr_db" => cfg.radio.snr_target_db = parse_num(key, value)?,
            "radio.p0" => cfg.radio.p0 = parse_num(key, value)?,
            "radio.power_cap" => cfg.radio.power_cap_enabled = parse_bool(key, value)?,
            "network.orientation" => {
                cfg.orientation = value
                    .parse::<OrientationMode>()
                    .map_err(|e| Error::config(key, e))?
            }
            "network.neighbors" => cfg.neighbor_count = parse_num(key, value)?,
            "network.fanin" => {
                let v: usize = parse_num(key, value)?;
                cfg.fanin = (v > 0).then_some(v);
            }
            "network.max_link_distance" => {
                let v: f64 = parse_num(key, value)?;
                cfg.max_link_distance = (v > 0.0).then_some(v);
            }
            other => {
                return Err(Error::config(other, "unknown key"));
            }
        }
        if key != "preset" {
            cfg.overrides.push(key.to_string());
        }
    }

    cfg.region = match shape.as_str() {
        "disk" => RegionSpec::disk(radius)
            .map_err(|e| Error::config("region.radius", e.to_string()))?,
        "rectangle" => RegionSpec::rectangle(width, height)
            .map_err(|e| Error::config("region.width", e.to_string()))?,
        other => {
            return Err(Error::config(
                "region.shape",
                format!("unknown shape `{other}` (disk|rectangle)"),
            ))
        }
    };

    cfg.overrides.sort();
    cfg.overrides.dedup();
    cfg.validate()?;
    Ok(cfg)
}
