use std::fs;
use std::path::PathBuf;
use std::process::exit;

use clap::{Args, Parser, Subcommand};
use rand::Rng;

use ifgame::analysis;
use ifgame::channel::{NetworkRealization, OrientationMode, RealizationDoc};
use ifgame::config::{self, ExperimentConfig, Preset};
use ifgame::dynamics::{self, RunOptions, SchedulePolicy};
use ifgame::error::{Error, Result};
use ifgame::game::{self, StrategyProfile};
use ifgame::geometry::RegionSpec;
use ifgame::seeds::{derive_seed, stream_rng, Stream};
use ifgame::sweep;
use ifgame::NetworkSpec;

#[derive(Parser)]
#[command(
    name = "ifgame",
    version,
    about = "Random interference games: generation, approximate best-response dynamics, convergence diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a network realization and write it as JSON.
    Gen(GenArgs),
    /// Run the dynamics once, from a realization file or a fresh build.
    Run(RunArgs),
    /// Run a Monte Carlo sweep from a preset or a config file.
    Sweep(SweepArgs),
    /// Self-checks: drift, oracle, bound and invariant verification.
    Verify(VerifyArgs),
    /// Print TDMA/random reference-rate tables.
    Baseline(BaselineArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    channels: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10.0)]
    disk_radius: f64,
    #[arg(long, default_value = "omni")]
    orientation: OrientationMode,
    #[arg(long, default_value_t = 5)]
    neighbors: usize,
    /// Fan-in limit; 0 disables it.
    #[arg(long, default_value_t = 0)]
    fanin: usize,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Realization JSON produced by `gen`; mutually exclusive with --n.
    #[arg(long, conflicts_with_all = ["n", "channels"])]
    realization: Option<PathBuf>,
    #[arg(long, requires = "channels")]
    n: Option<usize>,
    #[arg(long)]
    channels: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value = "deviators")]
    policy: SchedulePolicy,
    /// Step budget; 0 means 200 * N.
    #[arg(long, default_value_t = 0)]
    max_steps: usize,
    /// Rebuild the interference cache from scratch every step.
    #[arg(long)]
    paranoid: bool,
    /// Write the full trace as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the per-step trace as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, conflicts_with = "config")]
    preset: Option<Preset>,
    /// Flat key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    policy: Option<SchedulePolicy>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    paranoid: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Larger instances and more trials.
    #[arg(long)]
    deep: bool,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long, default_value_t = 20.0)]
    snr_db: f64,
    #[arg(long, default_value = "1,2,3,4,5,6,10,15,20", value_delimiter = ',')]
    loads: Vec<f64>,
    /// Network size for the random-allocation column.
    #[arg(long, default_value_t = 300)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    samples: usize,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            exit(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => {}
        Err(e @ (Error::Config { .. } | Error::InvalidParameter(_))) => {
            eprintln!("config error: {e}");
            exit(1);
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit(2);
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Baseline(args) => cmd_baseline(args),
    }
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let mut spec = NetworkSpec::new(RegionSpec::disk(args.disk_radius)?, args.n, args.channels);
    spec.orientation = args.orientation;
    spec.neighbor_count = args.neighbors;
    spec.fanin = (args.fanin > 0).then_some(args.fanin);
    let net = spec.build(args.seed)?;
    let text = serde_json::to_string_pretty(&net.to_doc())?;
    match args.out {
        Some(path) => {
            fs::write(&path, text)?;
            eprintln!("wrote {}", path.display());
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let net = match (&args.realization, args.n) {
        (Some(path), _) => {
            let doc: RealizationDoc = serde_json::from_str(&fs::read_to_string(path)?)?;
            NetworkRealization::from_doc(doc)?
        }
        (None, Some(n)) => {
            let spec = NetworkSpec::new(RegionSpec::disk(10.0)?, n, args.channels.unwrap());
            spec.build(args.seed)?
        }
        (None, None) => {
            return Err(Error::InvalidParameter(
                "provide --realization or --n/--channels".into(),
            ))
        }
    };
    let options = RunOptions {
        eps: args.eps,
        policy: args.policy,
        max_steps: args.max_steps,
        paranoid: args.paranoid,
    };
    let trace = dynamics::run(&net, &options, None, args.seed);
    println!(
        "n={} k={} eps={} converged={} t_con={} mean_rate={:.4} min_rate={:.4} cbar={:.4}",
        net.n_players(),
        net.channels(),
        args.eps,
        trace.converged,
        trace
            .t_con
            .map(|t| t.to_string())
            .unwrap_or_else(|| "-".into()),
        trace.final_rates.mean(),
        trace.final_rates.min(),
        net.cbar()
    );
    if let Some(path) = args.out {
        fs::write(&path, serde_json::to_string_pretty(&trace)?)?;
        eprintln!("wrote {}", path.display());
    }
    if let Some(path) = args.csv {
        let mut file = fs::File::create(&path)?;
        trace.write_csv(&mut file)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let mut cfg = match (&args.config, args.preset) {
        (Some(path), _) => config::parse_config(&fs::read_to_string(path)?)?,
        (None, Some(preset)) => ExperimentConfig::preset(preset),
        (None, None) => {
            return Err(Error::config(
                "preset",
                "provide --preset or --config",
            ))
        }
    };
    let record = |cfg: &mut ExperimentConfig, key: &str| {
        cfg.overrides.push(key.to_string());
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
        record(&mut cfg, "seed");
    }
    if let Some(out) = args.out {
        cfg.out_dir = out;
        record(&mut cfg, "out");
    }
    if let Some(r) = args.realizations {
        cfg.realizations = r;
        record(&mut cfg, "realizations");
    }
    if let Some(eps) = args.eps {
        cfg.eps_values = vec![eps];
        record(&mut cfg, "sweep.eps");
    }
    if let Some(policy) = args.policy {
        cfg.policy = policy;
        record(&mut cfg, "dynamics.policy");
    }
    if let Some(ms) = args.max_steps {
        cfg.max_steps = ms;
        record(&mut cfg, "max_steps");
    }
    if args.paranoid {
        cfg.paranoid = true;
        record(&mut cfg, "dynamics.paranoid");
    }
    cfg.overrides.sort();
    cfg.overrides.dedup();
    cfg.validate()?;

    let (result, written) = sweep::run_sweep_to_dir(&cfg)?;
    println!(
        "preset={} seed={} config_hash={} grid_points={} realizations={}",
        result.preset,
        result.master_seed,
        result.config_hash,
        result.grid.len(),
        cfg.realizations
    );
    println!("n,k,load,eps,converged,censored,errored,mean_t_con,mean_rate,min_rate,tdma_slot,random");
    for agg in &result.aggregates {
        println!(
            "{},{},{:.3},{},{}/{},{},{},{:.1},{:.4},{:.4},{:.4},{:.4}",
            agg.n,
            agg.k,
            agg.load,
            agg.eps,
            agg.converged,
            agg.realizations,
            agg.censored,
            agg.errored,
            agg.mean_t_con,
            agg.mean_rate,
            agg.mean_min_rate,
            agg.tdma_slot,
            agg.mean_random
        );
    }
    for path in written {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_baseline(args: BaselineArgs) -> Result<()> {
    let snr = 10f64.powf(args.snr_db / 10.0);
    println!("load,k,tdma_slot,tdma_frame,random_mean");
    for &load in &args.loads {
        let slot = analysis::baseline_tdma(load, snr, true)?;
        let frame = analysis::baseline_tdma(load, snr, false)?;
        let k = ((args.n as f64 / load).round() as usize).max(1);
        let spec = NetworkSpec::new(RegionSpec::disk(10.0)?, args.n, k);
        let random = match spec.build(derive_seed(args.seed, &[load.to_bits()])) {
            Ok(net) => {
                let mut rng = stream_rng(args.seed, Stream::Baseline);
                analysis::baseline_random(&net, args.samples, &mut rng)
            }
            Err(_) => f64::NAN,
        };
        println!("{load},{k},{slot:.4},{frame:.4},{random:.4}");
    }
    Ok(())
}

struct Verdicts {
    failures: usize,
}

impl Verdicts {
    fn check(&mut self, name: &str, ok: bool, detail: String) {
        if ok {
            println!("PASS {name}: {detail}");
        } else {
            println!("FAIL {name}: {detail}");
            self.failures += 1;
        }
    }
}

fn cmd_verify(args: VerifyArgs) -> Result<()> {
    let mut v = Verdicts { failures: 0 };
    let seed = args.seed;

    // Log-difference inequality under random positive triples.
    let trials = if args.deep { 1_000_000 } else { 100_000 };
    let mut rng = stream_rng(seed, Stream::Instance);
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut ok = true;
    for _ in 0..trials {
        let a = 10f64.powf(rng.gen_range(-6.0..6.0));
        let b = 10f64.powf(rng.gen_range(-6.0..6.0));
        let di = 10f64.powf(rng.gen_range(-6.0..6.0));
        let (lhs, rhs) = analysis::lemma3_gap(a, b, di)?;
        worst = worst.max(lhs - rhs);
        if lhs > rhs * (1.0 + 1e-12) {
            ok = false;
            break;
        }
    }
    v.check(
        "log-gap-bound",
        ok,
        format!("{trials} triples, max(lhs-rhs) = {worst:.3e}"),
    );

    // Converged runs land inside the brute-force equilibrium set.
    let mut checked = 0;
    let mut agree = true;
    for i in 0..20u64 {
        let inst = derive_seed(seed, &[40, i]);
        let mut irng = stream_rng(inst, Stream::Instance);
        let n = irng.gen_range(2..=5usize);
        let k = irng.gen_range(2..=3usize);
        let eps = if irng.gen_bool(0.5) { 0.05 } else { 0.5 };
        let spec = NetworkSpec::new(RegionSpec::disk(10.0)?, n, k);
        let net = match spec.build(inst) {
            Ok(net) => net,
            Err(_) => continue,
        };
        let trace = dynamics::run(
            &net,
            &RunOptions::new(eps, SchedulePolicy::Deviators),
            None,
            inst,
        );
        if !trace.converged {
            continue;
        }
        let oracle = analysis::oracle_enumerate(&net, eps)?;
        checked += 1;
        if !oracle.contains(&trace.final_profile) {
            agree = false;
        }
    }
    v.check(
        "oracle-membership",
        agree && checked >= 10,
        format!("{checked} converged tiny instances against exhaustive enumeration"),
    );

    // Sampled best-response deltas agree with the exact expectation.
    let drift = verify_sampled_drift(seed, if args.deep { 100_000 } else { 20_000 })?;
    v.check("sampled-drift", drift.0, drift.1);

    // Step invariants along a medium run, cached against paranoid.
    let net = NetworkSpec::new(RegionSpec::disk(10.0)?, 60, 6).build(derive_seed(seed, &[7]))?;
    let options = RunOptions::new(0.1, SchedulePolicy::Deviators);
    let trace = dynamics::run(&net, &options, None, seed);
    let paranoid = dynamics::run(
        &net,
        &RunOptions {
            paranoid: true,
            ..options
        },
        None,
        seed,
    );
    let mut inv_ok = trace.converged == paranoid.converged && trace.t_con == paranoid.t_con;
    for (a, b) in trace.steps.iter().zip(&paranoid.steps) {
        inv_ok &= a.actor == b.actor && a.new_channel == b.new_channel;
        inv_ok &= (a.x_after - b.x_after).abs() <= 1e-9 * a.x_after.abs().max(1.0);
        inv_ok &= (a.x_after - a.x_before - (a.d1 + a.d2 + a.d3)).abs()
            <= 1e-9 * a.x_before.abs().max(1.0);
        if a.deviated() {
            inv_ok &= a.d1 > options.eps / 2.0;
        }
        inv_ok &= a.d3 >= 0.0;
    }
    v.check(
        "step-invariants",
        inv_ok,
        format!(
            "{} steps, paranoid replay identical, decomposition exact to 1e-9",
            trace.steps.len()
        ),
    );

    // Cardinality-bound and best-set trends over N.
    let ns: Vec<usize> = if args.deep {
        vec![100, 400, 1600]
    } else {
        vec![50, 100, 200]
    };
    let reps = if args.deep { 20 } else { 8 };
    let mut fractions2 = Vec::new();
    let mut fractions4 = Vec::new();
    for (i, &n) in ns.iter().enumerate() {
        let k = (n / 10).max(1);
        let mut nets = Vec::new();
        for r in 0..reps {
            let spec = NetworkSpec::new(RegionSpec::disk(10.0)?, n, k);
            nets.push(spec.build(derive_seed(seed, &[90, i as u64, r]))?);
        }
        let report = analysis::check_lemma2(&nets, 2.0)?;
        fractions2.push(report.fraction);
        let mut sat = 0usize;
        for net in &nets {
            let mut prng = stream_rng(net.seed(), Stream::InitialProfile);
            let profiles: Vec<StrategyProfile> = (0..3)
                .map(|_| StrategyProfile::uniform_random(n, k, &mut prng))
                .collect();
            let rep = analysis::check_lemma4(net, 0.1, &profiles, 2.0)?;
            if rep.min_best_set as f64 >= rep.bound {
                sat += 1;
            }
        }
        fractions4.push(sat as f64 / reps as f64);
    }
    let mono = |xs: &[f64]| xs.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    v.check(
        "cardinality-trends",
        mono(&fractions2) && mono(&fractions4),
        format!("near/far fractions {fractions2:?}, best-set fractions {fractions4:?} over N = {ns:?}"),
    );

    if v.failures == 0 {
        println!("verify: all checks passed");
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{} verification checks failed",
            v.failures
        )))
    }
}

/// Compare the exact expected drift at a deviating state against the sample
/// mean of realized best-response deltas.
fn verify_sampled_drift(seed: u64, draws: usize) -> Result<(bool, String)> {
    // Find a deviating state with a non-singleton half-eps set.
    for i in 0..200u64 {
        let inst = derive_seed(seed, &[60, i]);
        let spec = NetworkSpec::new(RegionSpec::disk(10.0)?, 12, 4);
        let net = spec.build(inst)?;
        let mut prng = stream_rng(inst, Stream::InitialProfile);
        let profile = StrategyProfile::uniform_random(12, 4, &mut prng);
        let eps = 0.1;
        for n in 0..12 {
            let Ok(exact) = game::expected_drift(&net, &profile, n, eps) else {
                continue;
            };
            if exact.support < 2 {
                continue;
            }
            let mut rng = stream_rng(inst, Stream::Action);
            let mut samples = Vec::with_capacity(draws);
            for _ in 0..draws {
                let (next, deviated) = game::br_eps(&net, &profile, n, eps, &mut rng);
                assert!(deviated);
                let (d1, d2, _) = game::delta_decomposition(&net, &profile, &next, n)?;
                samples.push(d1 + d2);
            }
            let mean = samples.iter().sum::<f64>() / draws as f64;
            let var = samples
                .iter()
                .map(|s| (s - mean) * (s - mean))
                .sum::<f64>()
                / (draws as f64 - 1.0);
            let se = (var / draws as f64).sqrt();
            let dev = (mean - exact.e1_plus_e2).abs();
            let ok = dev <= 3.0 * se.max(1e-12);
            return Ok((
                ok,
                format!(
                    "{draws} draws: |sample-exact| = {dev:.2e} vs 3*SE = {:.2e} (support {})",
                    3.0 * se,
                    exact.support
                ),
            ));
        }
    }
    Ok((false, "no deviating state with support >= 2 found".into()))
}
