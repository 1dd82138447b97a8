//! Random interference games at desk scale: generate a game from random
//! player geometry, run asynchronous approximate best-response dynamics to an
//! epsilon pure Nash equilibrium, and verify the drift, best-set and
//! convergence-time behavior empirically.
//!
//! Module map:
//! - [`geometry`]: planar placement and spatial queries.
//! - [`channel`]: the frozen random game (gains, powers, destinations).
//! - [`game`]: utilities, epsilon-best sets, best response, step deltas.
//! - [`dynamics`]: the asynchronous dynamics engine and traces.
//! - [`analysis`]: empirical lemma checks, baselines, brute-force oracle.
//! - [`config`] / [`sweep`]: experiment presets and Monte Carlo orchestration.

pub mod analysis;
pub mod channel;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod game;
pub mod geometry;
pub mod seeds;
pub mod sweep;

pub use channel::{NetworkRealization, NetworkSpec, OrientationMode, RadioParams};
pub use config::{ExperimentConfig, Preset};
pub use dynamics::{run, RunOptions, SchedulePolicy, StepRecord, Trace};
pub use error::{Error, Result};
pub use game::{RateVector, StrategyProfile};
pub use geometry::{Point, RegionSpec};
