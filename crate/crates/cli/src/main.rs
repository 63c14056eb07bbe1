//! Command-line front end: batch scenario runs, trace playback, equilibrium
//! enumeration, and bound evaluation.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use netsel_core::bounds::{
    check_run_bounds, regret_bound, scaled_seconds_to_bytes, switch_bound, BoundInputs,
};
use netsel_core::engine::{run_batch, RunResult};
use netsel_core::environment::{DelayModel, NetworkKind, NetworkModel, TracePair};
use netsel_core::metrics::{
    enumerate_nash, mean_distance_series, median, summarize_run, summary_csv,
};
use netsel_core::policies::PolicyKind;
use netsel_core::scenario::{DeviceGroup, PolicyOverrides};
use netsel_core::types::NetworkId;
use netsel_core::{Error, Scenario};

#[derive(Parser)]
#[command(
    name = "netsel",
    version,
    about = "Multi-device wireless network selection simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file over a batch of seeds and write CSV reports.
    Run(RunArgs),
    /// Play a recorded two-network trace against one device.
    Trace(TraceArgs),
    /// Enumerate the equilibria of an equal-share game.
    Ne(NeArgs),
    /// Evaluate the switch and regret upper bounds.
    Bounds(BoundsArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML).
    scenario: PathBuf,
    /// Output directory (defaults to $NETSEL_OUT or ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of seeds (0..N); defaults to the scenario's `seeds`.
    #[arg(long)]
    seeds: Option<u64>,
    /// Worker threads for the batch.
    #[arg(long, default_value_t = 0)]
    par: usize,
    /// Replace every device group's policy before running.
    #[arg(long)]
    policy: Option<PolicyArg>,
}

#[derive(Args)]
struct TraceArgs {
    /// Trace CSV with header `slot,wifi_mbps,cellular_mbps`.
    trace: PathBuf,
    /// Selection policy for the single device.
    #[arg(long)]
    policy: PolicyArg,
    /// Number of seeds (0..N).
    #[arg(long, default_value_t = 50)]
    seeds: u64,
    /// Output directory (defaults to $NETSEL_OUT or ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Slot duration in seconds.
    #[arg(long, default_value_t = 15.0)]
    slot_seconds: f64,
    /// Constant switching delay in seconds.
    #[arg(long, default_value_t = 2.0)]
    delay_seconds: f64,
    /// Worker threads for the batch.
    #[arg(long, default_value_t = 0)]
    par: usize,
}

#[derive(Args)]
struct NeArgs {
    /// Comma-separated network bandwidths in Mbps, e.g. 4,7,22.
    bandwidths: String,
    /// Number of devices.
    devices: usize,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, short = 'k')]
    networks: usize,
    #[arg(long)]
    beta: f64,
    /// Slot duration t_d in seconds.
    #[arg(long, default_value_t = 1.0)]
    slot_seconds: f64,
    /// Reset period in seconds (defaults to the horizon: no reset).
    #[arg(long)]
    reset_period: Option<f64>,
    /// Horizon in seconds.
    #[arg(long)]
    horizon: f64,
    /// Exploration rate; enables the regret bound.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    largest_block: f64,
    #[arg(long, default_value_t = 0.0)]
    mean_delay: f64,
    #[arg(long, default_value_t = 0.0)]
    mean_gain: f64,
    /// Best fixed-network cumulative gain over one reset period (scaled).
    #[arg(long, default_value_t = 0.0)]
    best_period_gain: f64,
    /// Convert the regret bound to bytes with this gain scale (Mbps).
    #[arg(long)]
    gain_scale: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum PolicyArg {
    Exp3,
    BlockExp3,
    HybridBlockExp3,
    SmartExp3,
    SmartExp3NoReset,
    Greedy,
    FullInformation,
    Centralized,
    FixedRandom,
}

impl From<PolicyArg> for PolicyKind {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Exp3 => PolicyKind::Exp3,
            PolicyArg::BlockExp3 => PolicyKind::BlockExp3,
            PolicyArg::HybridBlockExp3 => PolicyKind::HybridBlockExp3,
            PolicyArg::SmartExp3 => PolicyKind::SmartExp3,
            PolicyArg::SmartExp3NoReset => PolicyKind::SmartExp3NoReset,
            PolicyArg::Greedy => PolicyKind::Greedy,
            PolicyArg::FullInformation => PolicyKind::FullInformation,
            PolicyArg::Centralized => PolicyKind::Centralized,
            PolicyArg::FixedRandom => PolicyKind::FixedRandom,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Trace(args) => cmd_trace(args),
        Command::Ne(args) => cmd_ne(args),
        Command::Bounds(args) => cmd_bounds(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::InvalidInput(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.unwrap_or_else(|| {
        std::env::var_os("NETSEL_OUT")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("out"))
    })
}

fn write(path: &Path, contents: &str) -> Result<(), Error> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

/// Executes a batch and writes the full report bundle: per-run records,
/// per-run summaries, the distance time series, bound checks for block-based
/// policies, and plot-ready data.
fn write_bundle(scenario: &Scenario, runs: &[RunResult], dir: &Path) -> Result<(), Error> {
    for run in runs {
        write(&dir.join(format!("run_{}.csv", run.seed)), &run.to_csv())?;
    }
    let summaries: Vec<_> = runs.iter().map(|r| summarize_run(r, scenario)).collect();
    write(&dir.join("summary.csv"), &summary_csv(&summaries))?;

    let bounded_policies = runs.first().is_some_and(|r| {
        r.device_policies.iter().any(|p| {
            matches!(
                p,
                PolicyKind::BlockExp3
                    | PolicyKind::HybridBlockExp3
                    | PolicyKind::SmartExp3
                    | PolicyKind::SmartExp3NoReset
            )
        })
    });
    if bounded_policies {
        let mut csv = String::from(
            "seed,device,switches,switch_bound,weak_regret_bytes,regret_bound_bytes,pass\n",
        );
        let mut pass = 0usize;
        let mut total = 0usize;
        for run in runs {
            for c in check_run_bounds(run, scenario)? {
                total += 1;
                pass += usize::from(c.pass());
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    run.seed,
                    c.device,
                    c.switches,
                    c.switch_bound,
                    c.weak_regret_bytes,
                    c.regret_bound_bytes,
                    c.pass()
                ));
            }
        }
        write(&dir.join("bounds_check.csv"), &csv)?;
        println!("bound dominance: {pass}/{total} device-runs within both bounds");
    }

    let series = if scenario.trace.is_none() && scenario.has_uniform_availability() {
        mean_distance_series(runs, &scenario.bandwidths())
    } else {
        Vec::new()
    };
    if series.iter().any(|d| d.is_finite()) {
        let mut csv = String::from("slot,mean_distance_percent\n");
        let mut dat = String::new();
        for (slot, d) in series.iter().enumerate() {
            csv.push_str(&format!("{slot},{d}\n"));
            dat.push_str(&format!("{slot} {d}\n"));
        }
        write(&dir.join("distance_to_ne.csv"), &csv)?;
        write(&dir.join("plots/distance_to_ne.dat"), &dat)?;
    }
    let mut switches_dat = String::new();
    for (i, run) in runs.iter().enumerate() {
        switches_dat.push_str(&format!("{i} {}\n", run.total_switches()));
    }
    write(&dir.join("plots/switches.dat"), &switches_dat)?;
    write(
        &dir.join("plots/plot.gp"),
        "set terminal pngcairo size 900,600\n\
         set output 'distance_to_ne.png'\n\
         set xlabel 'slot'\n\
         set ylabel 'mean distance to equilibrium (%)'\n\
         plot 'distance_to_ne.dat' with lines title 'mean distance', 7.5 with lines dashtype 2 title 'epsilon band'\n\
         set output 'switches.png'\n\
         set xlabel 'run'\n\
         set ylabel 'network switches'\n\
         plot 'switches.dat' with boxes title 'switches per run'\n",
    )?;

    let med_switches = median(
        &runs
            .iter()
            .map(|r| r.total_switches() as f64)
            .collect::<Vec<_>>(),
    );
    let med_download = median(
        &runs
            .iter()
            .map(|r| r.total_download_bytes())
            .collect::<Vec<_>>(),
    );
    let stable = summaries.iter().filter(|s| s.stable_slot.is_some()).count();
    println!(
        "{} runs: median switches {med_switches:.0}, median total download {:.3} GB, stable runs {stable}/{}",
        runs.len(),
        med_download / 1e9,
        runs.len()
    );
    println!("reports in {}", dir.display());
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<(), Error> {
    let mut scenario = Scenario::load(&args.scenario)?;
    if let Some(policy) = args.policy {
        scenario = scenario.with_policy(policy.into());
    }
    let seed_count = args.seeds.unwrap_or(scenario.seeds);
    if seed_count == 0 {
        return Err(Error::Config("need at least one seed".into()));
    }
    let seeds: Vec<u64> = (0..seed_count).collect();
    let runs = run_batch(&scenario, &seeds, args.par)?;
    let dir = out_dir(args.out).join(&scenario.name);
    write_bundle(&scenario, &runs, &dir)
}

fn cmd_trace(args: TraceArgs) -> Result<(), Error> {
    let file = fs::File::open(&args.trace)
        .map_err(|e| Error::Config(format!("cannot read trace '{}': {e}", args.trace.display())))?;
    let trace = TracePair::from_csv(std::io::BufReader::new(file))
        .map_err(|e| Error::Config(format!("{}: {e}", args.trace.display())))?;
    let name = args
        .trace
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trace".into());
    let policy: PolicyKind = args.policy.into();
    let scenario = Scenario {
        name: format!("trace_{name}_{}", policy.as_str()),
        horizon_slots: trace.len() as u64,
        slot_seconds: args.slot_seconds,
        gain_scale_mbps: None,
        epsilon: 7.5,
        seeds: args.seeds,
        networks: vec![
            NetworkModel {
                id: NetworkId(0),
                bandwidth_mbps: trace.max_rate(),
                kind: NetworkKind::Wifi,
                delay: DelayModel::Constant {
                    seconds: args.delay_seconds,
                },
            },
            NetworkModel {
                id: NetworkId(1),
                bandwidth_mbps: trace.max_rate(),
                kind: NetworkKind::Cellular,
                delay: DelayModel::Constant {
                    seconds: args.delay_seconds,
                },
            },
        ],
        device_groups: vec![DeviceGroup {
            name: "device".into(),
            count: 1,
            policy,
            networks: None,
            active_from_start: true,
            params: PolicyOverrides::default(),
        }],
        events: vec![],
        trace: Some(trace),
    };
    let seeds: Vec<u64> = (0..args.seeds).collect();
    let runs = run_batch(&scenario, &seeds, args.par)?;

    let downloads: Vec<f64> = runs.iter().map(|r| r.total_download_bytes()).collect();
    let costs: Vec<f64> = runs
        .iter()
        .map(|r| {
            r.records
                .iter()
                .map(|rec| rec.bit_rate_mbps * rec.delay_seconds * 1e6 / 8.0)
                .sum::<f64>()
        })
        .collect();
    println!(
        "median cumulative download {:.2} MB, median switching cost {:.2} MB over {} runs",
        median(&downloads) / 1e6,
        median(&costs) / 1e6,
        runs.len()
    );
    let dir = out_dir(args.out).join(&scenario.name);
    write_bundle(&scenario, &runs, &dir)
}

fn cmd_ne(args: NeArgs) -> Result<(), Error> {
    let bandwidths: Result<Vec<f64>, Error> = args
        .bandwidths
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("bad bandwidth '{s}'")))
        })
        .collect();
    let bandwidths = bandwidths?;
    if bandwidths.iter().any(|b| *b <= 0.0) {
        return Err(Error::InvalidInput("bandwidths must be positive".into()));
    }
    if args.devices == 0 {
        return Err(Error::InvalidInput("need at least one device".into()));
    }
    let (nes, exact) = enumerate_nash(&bandwidths, args.devices);
    if !exact {
        println!(
            "(population too large for exhaustive search; showing the water-filling equilibrium)"
        );
    }
    for ne in &nes {
        let gains: Vec<String> = ne
            .counts
            .iter()
            .zip(&ne.per_network_gain)
            .map(|(c, g)| {
                if *c > 0 {
                    format!("{g:.4}")
                } else {
                    "-".into()
                }
            })
            .collect();
        println!(
            "counts {:?}  per-device gains [{}] Mbps",
            ne.counts,
            gains.join(", ")
        );
    }
    println!("{} equilibrium allocation(s)", nes.len());
    Ok(())
}

fn cmd_bounds(args: BoundsArgs) -> Result<(), Error> {
    let inputs = BoundInputs {
        networks: args.networks,
        beta: args.beta,
        slot_seconds: args.slot_seconds,
        reset_period_seconds: args.reset_period.unwrap_or(args.horizon),
        horizon_seconds: args.horizon,
        gamma: args.gamma.unwrap_or(1.0),
        largest_block: args.largest_block,
        mean_delay_seconds: args.mean_delay,
        mean_gain: args.mean_gain,
        best_period_gain: args.best_period_gain,
    };
    println!("expected switch bound: {}", switch_bound(&inputs)?);
    if args.gamma.is_some() {
        let regret = regret_bound(&inputs)?;
        println!("expected weak regret bound: {regret} (scaled-gain seconds)");
        if let Some(scale) = args.gain_scale {
            println!(
                "expected weak regret bound: {} bytes",
                scaled_seconds_to_bytes(regret, scale)
            );
        }
    }
    Ok(())
}
