//! Monte Carlo sweep orchestration: build-run-diagnose per (grid point,
//! realization), deterministic under the master seed, with CSV/JSON
//! persistence and per-figure data emission.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis;
use crate::config::{ExperimentConfig, GridPoint, Preset};
use crate::dynamics::{self, Trace};
use crate::error::{Error, Result};
use crate::game;
use crate::seeds::{derive_seed, stream_rng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RowStatus {
    Ok,
    Error(String),
}

/// One realization at one grid point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub grid_index: usize,
    pub realization: usize,
    pub seed: u64,
    pub n: usize,
    pub k: usize,
    pub load: f64,
    pub eps: f64,
    pub status: RowStatus,
    pub converged: bool,
    pub t_con: Option<usize>,
    pub steps: usize,
    pub mean_rate: f64,
    pub min_rate: f64,
    pub cbar: f64,
    pub tdma_slot: f64,
    pub tdma_frame: f64,
    pub random_mean: f64,
}

/// Per-grid-point summary, recomputable from the rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridAggregate {
    pub grid_index: usize,
    pub n: usize,
    pub k: usize,
    pub load: f64,
    pub eps: f64,
    pub realizations: usize,
    pub errored: usize,
    pub converged: usize,
    /// Runs that hit the step budget without reaching an eps-PNE; they are
    /// censored in convergence-time statistics.
    pub censored: usize,
    pub mean_t_con: f64,
    pub mean_rate: f64,
    pub mean_min_rate: f64,
    pub mean_cbar: f64,
    pub tdma_slot: f64,
    pub tdma_frame: f64,
    pub mean_random: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub preset: Preset,
    pub master_seed: u64,
    pub config_hash: String,
    pub overrides: Vec<String>,
    pub grid: Vec<GridPoint>,
    pub rows: Vec<SweepRow>,
    pub aggregates: Vec<GridAggregate>,
    /// The first realization's trace per grid point, kept for trace-level
    /// figure emission and replay diagnostics.
    #[serde(skip)]
    pub sample_traces: Vec<(usize, Trace)>,
}

fn error_row(point: &GridPoint, realization: usize, seed: u64, message: String) -> SweepRow {
    SweepRow {
        grid_index: point.index,
        realization,
        seed,
        n: point.n,
        k: point.k,
        load: point.load,
        eps: point.eps,
        status: RowStatus::Error(message),
        converged: false,
        t_con: None,
        steps: 0,
        mean_rate: f64::NAN,
        min_rate: f64::NAN,
        cbar: f64::NAN,
        tdma_slot: f64::NAN,
        tdma_frame: f64::NAN,
        random_mean: f64::NAN,
    }
}

fn run_one(
    config: &ExperimentConfig,
    point: &GridPoint,
    realization: usize,
) -> (SweepRow, Option<Trace>) {
    let seed = derive_seed(config.seed, &[point.index as u64, realization as u64]);
    let spec = config.network_spec(point.n, point.k);
    let net = match spec.build(seed) {
        Ok(net) => net,
        Err(e) => return (error_row(point, realization, seed, e.to_string()), None),
    };
    let options = config.run_options(point.eps);
    let trace = dynamics::run(&net, &options, None, seed);
    let snr = config.radio.snr_linear();
    let tdma_slot = analysis::baseline_tdma(point.load, snr, true).unwrap_or(f64::NAN);
    let tdma_frame = analysis::baseline_tdma(point.load, snr, false).unwrap_or(f64::NAN);
    let mut baseline_rng = stream_rng(seed, Stream::Baseline);
    let random_mean = analysis::baseline_random(&net, config.baseline_samples, &mut baseline_rng);
    let row = SweepRow {
        grid_index: point.index,
        realization,
        seed,
        n: point.n,
        k: point.k,
        load: point.load,
        eps: point.eps,
        status: RowStatus::Ok,
        converged: trace.converged,
        t_con: trace.t_con,
        steps: trace.steps.len(),
        mean_rate: trace.final_rates.mean(),
        min_rate: trace.final_rates.min(),
        cbar: net.cbar(),
        tdma_slot,
        tdma_frame,
        random_mean,
    };
    let keep_trace = realization == 0;
    (row, keep_trace.then_some(trace))
}

fn aggregate(point: &GridPoint, rows: &[SweepRow]) -> GridAggregate {
    let ok: Vec<&SweepRow> = rows
        .iter()
        .filter(|r| matches!(r.status, RowStatus::Ok))
        .collect();
    let errored = rows.len() - ok.len();
    let converged: Vec<&&SweepRow> = ok.iter().filter(|r| r.converged).collect();
    let mean = |f: &dyn Fn(&SweepRow) -> f64| -> f64 {
        if ok.is_empty() {
            f64::NAN
        } else {
            ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
        }
    };
    let mean_t_con = if converged.is_empty() {
        f64::NAN
    } else {
        converged
            .iter()
            .map(|r| r.t_con.unwrap() as f64)
            .sum::<f64>()
            / converged.len() as f64
    };
    GridAggregate {
        grid_index: point.index,
        n: point.n,
        k: point.k,
        load: point.load,
        eps: point.eps,
        realizations: rows.len(),
        errored,
        converged: converged.len(),
        censored: ok.len() - converged.len(),
        mean_t_con,
        mean_rate: mean(&|r| r.mean_rate),
        mean_min_rate: mean(&|r| r.min_rate),
        mean_cbar: mean(&|r| r.cbar),
        tdma_slot: mean(&|r| r.tdma_slot),
        tdma_frame: mean(&|r| r.tdma_frame),
        mean_random: mean(&|r| r.random_mean),
    }
}

/// Execute the whole sweep in memory. Realizations run in parallel; rows are
/// keyed and sorted so output is deterministic under the master seed.
/// Per-realization failures become error rows and never abort the sweep.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let grid = config.grid();
    let mut rows = Vec::with_capacity(grid.len() * config.realizations);
    let mut aggregates = Vec::with_capacity(grid.len());
    let mut sample_traces = Vec::new();
    for point in &grid {
        let mut results: Vec<(SweepRow, Option<Trace>)> = (0..config.realizations)
            .into_par_iter()
            .map(|r| run_one(config, point, r))
            .collect();
        results.sort_by_key(|(row, _)| row.realization);
        let point_rows: Vec<SweepRow> = results.iter().map(|(row, _)| row.clone()).collect();
        aggregates.push(aggregate(point, &point_rows));
        for (row, trace) in results {
            if let Some(t) = trace {
                sample_traces.push((row.grid_index, t));
            }
            rows.push(row);
        }
    }
    Ok(SweepResult {
        preset: config.preset,
        master_seed: config.seed,
        config_hash: format!("{:016x}", config.config_hash()),
        overrides: config.overrides.clone(),
        grid,
        rows,
        aggregates,
        sample_traces,
    })
}

fn fmt_opt(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Rows as CSV, provenance in the leading comment line.
pub fn write_rows_csv<W: Write>(result: &SweepResult, mut w: W) -> Result<()> {
    writeln!(
        w,
        "# config_hash={} seed={}",
        result.config_hash, result.master_seed
    )?;
    writeln!(
        w,
        "grid_index,realization,seed,n,k,load,eps,status,converged,t_con,steps,\
         mean_rate,min_rate,cbar,tdma_slot,tdma_frame,random_mean"
    )?;
    for r in &result.rows {
        let status = match &r.status {
            RowStatus::Ok => "ok".to_string(),
            RowStatus::Error(msg) => format!("error:{}", msg.replace(',', ";")),
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.grid_index,
            r.realization,
            r.seed,
            r.n,
            r.k,
            r.load,
            r.eps,
            status,
            r.converged,
            fmt_opt(r.t_con),
            r.steps,
            r.mean_rate,
            r.min_rate,
            r.cbar,
            r.tdma_slot,
            r.tdma_frame,
            r.random_mean
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Summary<'a> {
    preset: Preset,
    master_seed: u64,
    config_hash: &'a str,
    overrides: &'a [String],
    grid: &'a [GridPoint],
    aggregates: &'a [GridAggregate],
}

/// Figure-specific data files. The preset names double as figure ids.
pub fn emit_figure_data(
    result: &SweepResult,
    config: &ExperimentConfig,
    figure: Preset,
    out_dir: &Path,
) -> Result<PathBuf> {
    let provenance = format!(
        "# config_hash={} seed={}",
        result.config_hash, result.master_seed
    );
    let path = out_dir.join(format!("{figure}.csv"));
    let mut buf = String::new();
    buf.push_str(&provenance);
    buf.push('\n');
    match figure {
        Preset::Fig3 => {
            // Per-step mean and minimal rate of the first stored trace.
            let (grid_index, trace) = result
                .sample_traces
                .first()
                .ok_or_else(|| Error::FigureShape("no stored trace for a rate figure".into()))?;
            let point = result.grid[*grid_index];
            let seed = derive_seed(result.master_seed, &[point.index as u64, 0]);
            let net = config.network_spec(point.n, point.k).build(seed)?;
            buf.push_str("t,mean_rate,min_rate,x\n");
            let mut emit_state = |t: usize, profile: &game::StrategyProfile| {
                let rates = game::rates(&net, profile);
                buf.push_str(&format!(
                    "{},{},{},{}\n",
                    t,
                    rates.mean(),
                    rates.min(),
                    rates.sum()
                ));
            };
            emit_state(0, &trace.initial_profile);
            let mut profile = trace.initial_profile.clone();
            for rec in &trace.steps {
                if rec.deviated() {
                    profile = profile.with_channel(rec.actor, rec.new_channel);
                }
                emit_state(rec.t + 1, &profile);
            }
        }
        Preset::Fig4 => {
            let distinct_n: std::collections::BTreeSet<usize> =
                result.grid.iter().map(|g| g.n).collect();
            if distinct_n.len() < 2 {
                return Err(Error::FigureShape(
                    "convergence-time CDF figure needs a grid over N".into(),
                ));
            }
            buf.push_str("n,t_con,cdf,censored\n");
            for point in &result.grid {
                let mut times: Vec<usize> = result
                    .rows
                    .iter()
                    .filter(|r| r.grid_index == point.index && r.converged)
                    .map(|r| r.t_con.unwrap())
                    .collect();
                times.sort_unstable();
                let censored = result
                    .rows
                    .iter()
                    .filter(|r| {
                        r.grid_index == point.index
                            && matches!(r.status, RowStatus::Ok)
                            && !r.converged
                    })
                    .count();
                let total = times.len();
                for (i, t) in times.iter().enumerate() {
                    buf.push_str(&format!(
                        "{},{},{},{}\n",
                        point.n,
                        t,
                        (i + 1) as f64 / total as f64,
                        censored
                    ));
                }
            }
        }
        Preset::Fig5 => {
            let distinct_loads: std::collections::BTreeSet<u64> =
                result.grid.iter().map(|g| g.load.to_bits()).collect();
            if distinct_loads.len() < 2 {
                return Err(Error::FigureShape(
                    "rate-versus-load figure needs a grid over load".into(),
                ));
            }
            buf.push_str("load,mean_rate,min_rate,tdma_slot,tdma_frame,random\n");
            for agg in &result.aggregates {
                buf.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    agg.load,
                    agg.mean_rate,
                    agg.mean_min_rate,
                    agg.tdma_slot,
                    agg.tdma_frame,
                    agg.mean_random
                ));
            }
        }
        Preset::Fig6 => {
            let distinct_eps: std::collections::BTreeSet<u64> =
                result.grid.iter().map(|g| g.eps.to_bits()).collect();
            if distinct_eps.len() < 2 {
                return Err(Error::FigureShape(
                    "epsilon trade-off figure needs a grid over eps".into(),
                ));
            }
            buf.push_str("eps,mean_t_con,mean_rate,min_rate\n");
            for agg in &result.aggregates {
                buf.push_str(&format!(
                    "{},{},{},{}\n",
                    agg.eps, agg.mean_t_con, agg.mean_rate, agg.mean_min_rate
                ));
            }
        }
        Preset::Custom => {
            return Err(Error::FigureShape("custom preset has no figure".into()));
        }
    }
    fs::write(&path, buf)?;
    Ok(path)
}

/// Run the sweep and persist rows, summary and (for figure presets) the
/// figure data into the config's output directory.
pub fn run_sweep_to_dir(config: &ExperimentConfig) -> Result<(SweepResult, Vec<PathBuf>)> {
    let result = run_sweep(config)?;
    let out_dir = &config.out_dir;
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let rows_path = out_dir.join("rows.csv");
    let mut rows_file = fs::File::create(&rows_path)?;
    write_rows_csv(&result, &mut rows_file)?;
    written.push(rows_path);

    let summary_path = out_dir.join("summary.json");
    let summary = Summary {
        preset: result.preset,
        master_seed: result.master_seed,
        config_hash: &result.config_hash,
        overrides: &result.overrides,
        grid: &result.grid,
        aggregates: &result.aggregates,
    };
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
    written.push(summary_path);

    if result.preset != Preset::Custom {
        written.push(emit_figure_data(&result, config, result.preset, out_dir)?);
    }
    Ok((result, written))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_config, ChannelAxis};

    fn tiny_config() -> ExperimentConfig {
        let mut cfg = parse_config(
            "sweep.n = 8\nsweep.load = 2\nsweep.eps = 0.2\nrealizations = 3\nseed = 5\n",
        )
        .unwrap();
        cfg.baseline_samples = 5;
        cfg
    }

    #[test]
    fn single_tiny_realization_converges() {
        let cfg = parse_config(
            "sweep.n = 2\nsweep.channels = 2\nsweep.eps = 0.5\nrealizations = 1\nseed = 3\n",
        )
        .unwrap();
        let result = run_sweep(&cfg).unwrap();
        assert_eq!(result.rows.len(), 1);
        let row = &result.rows[0];
        assert!(matches!(row.status, RowStatus::Ok));
        assert!(row.converged);
    }

    #[test]
    fn rows_are_deterministic_bytes() {
        let cfg = tiny_config();
        let a = run_sweep(&cfg).unwrap();
        let b = run_sweep(&cfg).unwrap();
        let mut ba = Vec::new();
        let mut bb = Vec::new();
        write_rows_csv(&a, &mut ba).unwrap();
        write_rows_csv(&b, &mut bb).unwrap();
        assert_eq!(ba, bb);
        assert!(String::from_utf8(ba).unwrap().starts_with("# config_hash="));
    }

    #[test]
    fn aggregates_recompute_from_rows() {
        let cfg = tiny_config();
        let result = run_sweep(&cfg).unwrap();
        for agg in &result.aggregates {
            let rows: Vec<&SweepRow> = result
                .rows
                .iter()
                .filter(|r| r.grid_index == agg.grid_index)
                .collect();
            assert_eq!(rows.len(), agg.realizations);
            let ok: Vec<&&SweepRow> = rows
                .iter()
                .filter(|r| matches!(r.status, RowStatus::Ok))
                .collect();
            let mean_rate = ok.iter().map(|r| r.mean_rate).sum::<f64>() / ok.len() as f64;
            assert!((mean_rate - agg.mean_rate).abs() < 1e-12);
            assert_eq!(
                agg.converged,
                rows.iter().filter(|r| r.converged).count()
            );
        }
    }

    #[test]
    fn infeasible_realizations_become_error_rows() {
        // Fan-in 1 with a single candidate forces collisions for some seeds.
        let mut cfg = parse_config(
            "sweep.n = 6\nsweep.channels = 3\nsweep.eps = 0.2\nrealizations = 40\nseed = 1\n\
             network.fanin = 1\nnetwork.neighbors = 1\n",
        )
        .unwrap();
        cfg.baseline_samples = 2;
        let result = run_sweep(&cfg).unwrap();
        assert_eq!(result.rows.len(), 40);
        let errors = result
            .rows
            .iter()
            .filter(|r| matches!(r.status, RowStatus::Error(_)))
            .count();
        assert!(errors > 0, "expected at least one infeasible realization");
        assert!(errors < 40, "expected at least one feasible realization");
        assert_eq!(result.aggregates[0].errored, errors);
    }

    #[test]
    fn fig4_style_cdf_is_monotone() {
        let mut cfg = ExperimentConfig::fig4();
        cfg.n_values = vec![10, 20];
        cfg.channel_axis = ChannelAxis::Loads(vec![2.0]);
        cfg.realizations = 10;
        cfg.baseline_samples = 2;
        cfg.seed = 9;
        let result = run_sweep(&cfg).unwrap();
        let dir = std::env::temp_dir().join(format!("ifgame_fig4_{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = emit_figure_data(&result, &cfg, Preset::Fig4, &dir).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut last: Option<(usize, f64)> = None;
        for line in text.lines().skip(2) {
            let cols: Vec<&str> = line.split(',').collect();
            let n: usize = cols[0].parse().unwrap();
            let cdf: f64 = cols[2].parse().unwrap();
            assert!(cdf > 0.0 && cdf <= 1.0);
            if let Some((ln, lc)) = last {
                if ln == n {
                    assert!(cdf >= lc, "cdf not monotone");
                }
            }
            last = Some((n, cdf));
        }
        fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn fig3_final_sum_matches_identity() {
        let mut cfg = ExperimentConfig::fig3();
        cfg.n_values = vec![12];
        cfg.channel_axis = ChannelAxis::Channels(vec![3]);
        cfg.baseline_samples = 2;
        cfg.seed = 2;
        let result = run_sweep(&cfg).unwrap();
        let dir = std::env::temp_dir().join(format!("ifgame_fig3_{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = emit_figure_data(&result, &cfg, Preset::Fig3, &dir).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let last = text.lines().last().unwrap();
        let cols: Vec<f64> = last.split(',').map(|c| c.parse().unwrap()).collect();
        // Final sum-rate equals N * mean rate, and matches the trace's view.
        assert!((cols[3] - 12.0 * cols[1]).abs() < 1e-9);
        let row = &result.rows[0];
        assert!((cols[1] - row.mean_rate).abs() < 1e-9);
        fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn figure_shape_mismatch_is_rejected() {
        let cfg = tiny_config();
        let result = run_sweep(&cfg).unwrap();
        let dir = std::env::temp_dir();
        assert!(matches!(
            emit_figure_data(&result, &cfg, Preset::Fig4, &dir),
            Err(Error::FigureShape(_))
        ));
        assert!(matches!(
            emit_figure_data(&result, &cfg, Preset::Fig6, &dir),
            Err(Error::FigureShape(_))
        ));
    }

    #[test]
    fn sweep_to_dir_writes_everything() {
        let mut cfg = tiny_config();
        let dir = std::env::temp_dir().join(format!("ifgame_sweep_{}", std::process::id()));
        cfg.out_dir = dir.clone();
        let (_result, written) = run_sweep_to_dir(&cfg).unwrap();
        assert!(written.iter().any(|p| p.ends_with("rows.csv")));
        assert!(written.iter().any(|p| p.ends_with("summary.json")));
        for p in &written {
            assert!(p.exists());
        }
        let summary = fs::read_to_string(dir.join("summary.json")).unwrap();
        assert!(summary.contains("config_hash"));
        fs::remove_dir_all(&dir).ok();
    }
}
