//! `dcb-arena` command line.
//!
//! Exit codes: 0 success, 1 usage, 2 I/O, 3 validation (including missing
//! records and unsupported modes).

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use dcb_arena::agents::{Algo, EpsilonClock};
use dcb_arena::dataset::{generate_to_file, Dataset, GenerateOptions, GlobalConfigId};
use dcb_arena::harness::{aggregate, run, DatasetEnv, Environment, LiveEnv, RunConfig, WorstMode};
use dcb_arena::{Action, Deployment, Error};

#[derive(Parser)]
#[command(name = "dcb-arena", version, about = "Spectrum allocation benchmark for channel-bonding WLANs")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate every global configuration of a deployment into a CSV table.
    GenDataset(GenArgs),
    /// Play agents against a dataset or the live simulator.
    Run(RunArgs),
    /// List the configurations that satisfy every BSS.
    Optima(OptimaArgs),
    /// Show the stored rows of one configuration.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    deployment: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Simulated seconds per configuration [default: 5]
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long, default_value_t = 1)]
    reps: u32,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Base seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("env").required(true).args(["dataset", "live"])))]
struct RunArgs {
    #[arg(long)]
    deployment: PathBuf,
    /// Replay a generated dataset.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Simulate every iteration instead of replaying.
    #[arg(long)]
    live: bool,
    /// One selector for all BSSs, or a comma-separated list with one per BSS:
    /// egreedy, ctx-egreedy-2, ctx-egreedy-24, qlearning-2, qlearning-24, heuristic, static
    #[arg(long, value_delimiter = ',', required = true)]
    algo: Vec<String>,
    /// Iterations per seed [default: 200]
    #[arg(long)]
    iters: Option<u64>,
    /// Number of seeds [default: 100]
    #[arg(long)]
    seeds: Option<u64>,
    /// Base seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
    /// min-then-mean or mean-then-min
    #[arg(long, default_value = "min-then-mean")]
    worst_mode: String,
    /// Simulated seconds per live iteration [default: 5]
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    epsilon0: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    sat_threshold: Option<f64>,
    /// Count contextual exploration per context visit or globally.
    #[arg(long, default_value = "per-context", value_parser = ["per-context", "global"])]
    epsilon_clock: String,
    /// Action of the static agent as "primary,max_bw" channels.
    #[arg(long, value_parser = parse_action)]
    static_action: Option<Action>,
}

#[derive(Args)]
struct OptimaArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    deployment: PathBuf,
    /// Satisfaction threshold [default: 0.99]
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    config_id: u64,
}

fn parse_action(s: &str) -> Result<Action, String> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts[..] {
        [p, b] => Ok(Action::new(
            p.trim().parse().map_err(|e| format!("primary: {e}"))?,
            b.trim().parse().map_err(|e| format!("max_bw: {e}"))?,
        )),
        _ => Err("expected \"primary,max_bw\"".into()),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 2,
        Error::Validation(_) | Error::NotFound(_) | Error::Unsupported(_) => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DCB_ARENA_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let res = match cli.cmd {
        Command::GenDataset(a) => gen_dataset(a),
        Command::Run(a) => run_cmd(a),
        Command::Optima(a) => optima(a),
        Command::Inspect(a) => inspect(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool, Error> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Validation("--threads must be >= 1".into()));
        }
        b = b.num_threads(n);
    }
    b.build()
        .map_err(|e| Error::Validation(format!("cannot start thread pool: {e}")))
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn gen_dataset(a: GenArgs) -> Result<(), Error> {
    let d = Deployment::load(&a.deployment)?;
    let mut opts = GenerateOptions::new(d.mac.clone());
    opts.duration_s = a.duration.or(d.run.duration_s).unwrap_or(5.0);
    opts.reps = a.reps;
    opts.base_seed = a.seed.or(d.run.seed).unwrap_or(0);
    if let Some(n) = a.threads {
        if n == 0 {
            return Err(Error::Validation("--threads must be >= 1".into()));
        }
        opts.parallelism = n;
    }
    let start = std::time::Instant::now();
    let ds = generate_to_file(&d, &opts, &a.out)?;
    log::info!("dataset complete in {:.1?}", start.elapsed());
    println!("wrote {} configurations to {}", ds.len(), a.out.display());
    Ok(())
}

fn run_cmd(a: RunArgs) -> Result<(), Error> {
    let d = Deployment::load(&a.deployment)?;
    let algos = a.algo.iter().map(|s| s.parse()).collect::<Result<Vec<Algo>, _>>()?;
    let mut cfg = RunConfig::new(algos[0]);
    cfg.algos = algos;
    cfg.iterations = a.iters.or(d.run.iterations.map(|v| v as u64)).unwrap_or(200);
    cfg.seeds = a.seeds.or(d.run.seeds.map(|v| v as u64)).unwrap_or(100);
    cfg.base_seed = a.seed.or(d.run.seed).unwrap_or(0);
    let h = &mut cfg.hyper;
    if let Some(v) = a.epsilon0.or(d.run.epsilon0) {
        h.epsilon0 = v;
    }
    if let Some(v) = a.alpha.or(d.run.alpha) {
        h.alpha = v;
    }
    if let Some(v) = a.gamma.or(d.run.gamma) {
        h.gamma = v;
    }
    if let Some(v) = a.sat_threshold.or(d.run.sat_threshold) {
        h.sat_threshold = v;
    }
    if a.epsilon_clock == "global" {
        h.clock = EpsilonClock::Global;
    }
    h.static_action = a.static_action;
    let worst_mode: WorstMode = a.worst_mode.parse()?;

    let dataset;
    let env: Box<dyn Environment + '_> = match &a.dataset {
        Some(path) => {
            dataset = Dataset::load_for(path, &d)?;
            if !dataset.is_complete() {
                log::warn!(
                    "dataset holds {} of {} configurations",
                    dataset.len(),
                    dataset.expected_len()
                );
            }
            Box::new(DatasetEnv::new(&dataset, &d)?)
        }
        None => {
            let secs = a.duration.or(d.run.duration_s).unwrap_or(5.0);
            Box::new(LiveEnv::new(&d, d.mac.clone(), secs)?)
        }
    };
    cfg.validate(env.n_bss())?;

    let pool = thread_pool(a.threads)?;
    let log = pool.install(|| run(env.as_ref(), &cfg))?;
    let summary = aggregate(&log.rows, worst_mode, cfg.hyper.sat_threshold)?;

    fs::create_dir_all(&a.out).map_err(io_err(&a.out))?;
    let runlog = a.out.join("runlog.csv");
    let mut w = create(&runlog)?;
    log.write_csv(&mut w).and_then(|_| w.flush()).map_err(io_err(&runlog))?;
    let sum = a.out.join("summary.csv");
    let mut w = create(&sum)?;
    summary.write_csv(&mut w).and_then(|_| w.flush()).map_err(io_err(&sum))?;

    let taus: Vec<u64> = summary.seeds.iter().filter_map(|s| s.tau).collect();
    println!(
        "{}: final mean G/T {:.4}, worst {:.4} over {} seeds",
        a.algo.join(","),
        summary.final_mean(),
        summary.final_worst(),
        cfg.seeds
    );
    if taus.is_empty() {
        println!("tau: never all satisfied");
    } else {
        let mut sorted = taus.clone();
        sorted.sort_unstable();
        println!(
            "tau: reached on {}/{} seeds, median {}",
            taus.len(),
            cfg.seeds,
            sorted[sorted.len() / 2]
        );
    }
    Ok(())
}

fn optima(a: OptimaArgs) -> Result<(), Error> {
    let d = Deployment::load(&a.deployment)?;
    let ds = Dataset::load_for(&a.dataset, &d)?;
    let threshold = a.threshold.or(d.run.sat_threshold).unwrap_or(0.99);
    let o = ds.find_optima(&d.loads(), threshold)?;
    let space = ds.space();
    let mut out = std::io::stdout().lock();
    let write = |out: &mut std::io::StdoutLock, id: GlobalConfigId, min: f64| -> Result<(), Error> {
        let g = id.decode(&space, ds.n_bss)?;
        let acts: Vec<String> = g.actions().iter().map(|x| x.to_string()).collect();
        writeln!(out, "{id}\tmin_sigma={min:.6}\t{}", acts.join(" ")).map_err(io_err(Path::new("<stdout>")))
    };
    if o.satisfied.is_empty() {
        eprintln!("no configuration satisfies every BSS at threshold {threshold}");
        if let Some(id) = o.argmax {
            eprintln!("best worst-BSS satisfaction:");
            write(&mut out, id, o.max_min_sigma)?;
        }
    } else {
        log::info!("{} configurations satisfy every BSS", o.satisfied.len());
        for &(id, min) in &o.satisfied {
            write(&mut out, id, min)?;
        }
    }
    Ok(())
}

fn inspect(a: InspectArgs) -> Result<(), Error> {
    let ds = Dataset::load(&a.dataset)?;
    let id = GlobalConfigId(a.config_id);
    let g = id.decode(&ds.space(), ds.n_bss)?;
    let th = ds.get(id)?;
    println!("bss,primary,max_bw,throughput_mbps");
    for (w, (act, t)) in g.actions().iter().zip(th).enumerate() {
        println!("{w},{},{},{t:.6}", act.primary, act.max_bandwidth);
    }
    Ok(())
}
