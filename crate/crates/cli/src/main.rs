//! `hetnet-ee`: batch driver for the optimiser, the sweeps and the queueing
//! model. Exit status 0 on success, 1 for an infeasible instance, 2 for a
//! configuration error and 3 for any other failure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hetnet_ee::config::{parse_config, serialize_config, serialize_topology, RunConfig, TopologySource, UserRecord};
use hetnet_ee::ee::{solve_min_alpha_with, validate, EeError};
use hetnet_ee::experiments::{default_sweeps, derive_seed, fmt_f64, sweep, ExperimentError};
use hetnet_ee::par::Execution;
use hetnet_ee::queueing::{analyse, pi_csv, CtmcSpec, QueueMetrics};

#[derive(Parser)]
#[command(name = "hetnet-ee", version, about = "Energy-efficient small-cell backhaul optimisation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; falls back to `out_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the run seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the bisection tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance for maximum energy efficiency.
    Solve(Common),
    /// Run the configured parameter sweeps.
    Sweep(Common),
    /// Stationary metrics of every configured queue.
    Queue(Common),
    /// Parse and validate the configuration only.
    ValidateConfig(Common),
    /// Write the generated topology and users as a topology file.
    GenTopology(Common),
}

struct Failure {
    status: u8,
    code: String,
    message: String,
}

impl Failure {
    fn new(status: u8, code: impl Into<String>, message: impl Into<String>) -> Self {
        Failure { status, code: code.into(), message: message.into() }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Failure::new(3, "E_IO", format!("{}: {e}", path.display()))
    }
}

fn ee_failure(e: EeError) -> Failure {
    let status = if e.constraint().is_some() { 1 } else { 3 };
    Failure::new(status, e.code(), e.to_string())
}

fn load(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = parse_config(&common.config).map_err(|e| Failure::new(2, e.code(), e.to_string()))?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(tol) = common.tol {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(Failure::new(2, "E_VALIDATION", format!("--tol must lie in (0, 1), got {tol}")));
        }
        cfg.optimizer.tol = tol;
    }
    Ok(cfg)
}

fn out_dir(common: &Common, cfg: &RunConfig) -> Result<PathBuf, Failure> {
    let dir = common
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .ok_or_else(|| Failure::new(2, "E_VALIDATION", "no output directory: pass --out or set run.out_dir"))?;
    fs::create_dir_all(&dir).map_err(|e| Failure::io(&dir, e))?;
    Ok(dir)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Failure::io(&path, e))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn solve(common: &Common) -> Result<(), Failure> {
    let cfg = load(common)?;
    let dir = out_dir(common, &cfg)?;
    let inst = cfg.instance().map_err(|e| match e {
        hetnet_ee::config::InstanceError::Config(e) => Failure::new(2, e.code(), e.to_string()),
        hetnet_ee::config::InstanceError::Ee(e) => ee_failure(e),
    })?;
    let opts = cfg.optimizer.solver_options();
    match solve_min_alpha_with(&inst, &opts) {
        Ok(opt) => {
            let r = &opt.report;
            let mut rep = String::from("status = ok\n");
            let _ = writeln!(rep, "users = {}", inst.n_users());
            let _ = writeln!(rep, "links = {}", inst.topology.n_links());
            let _ = writeln!(rep, "f1_bps = {}", fmt_f64(r.f1_bps));
            let _ = writeln!(rep, "f2_w = {}", fmt_f64(r.f2_watts));
            let _ = writeln!(rep, "ee_bps_per_w = {}", fmt_f64(r.ee_bps_per_watt));
            let _ = writeln!(rep, "alpha_j_per_bit = {}", fmt_f64(r.alpha_joules_per_bit));
            let _ = writeln!(rep, "iterations = {}", r.iterations);
            let _ = writeln!(rep, "bracket_width = {}", fmt_f64(r.bracket_width));
            rep.push_str("\n[constraints]\n");
            rep.push_str(&validate(&inst, &opt.solution).summary());
            write(&dir, "solution_rates.csv", &opt.solution.rates_csv(&inst))?;
            write(&dir, "solution_flows.csv", &opt.solution.flows.to_csv(&inst.topology))?;
            write(&dir, "solution_links.csv", &opt.solution.links_csv(&inst.topology))?;
            write(&dir, "report.txt", &rep)
        }
        Err(e) => {
            if let Some(class) = e.constraint() {
                let rep = format!(
                    "status = infeasible\nviolated_constraint = {class}\ndescription = {}\ndetail = {e}\n",
                    class.description()
                );
                write(&dir, "report.txt", &rep)?;
            }
            Err(ee_failure(e))
        }
    }
}

fn run_sweeps(common: &Common) -> Result<(), Failure> {
    let cfg = load(common)?;
    let dir = out_dir(common, &cfg)?;
    let template = cfg
        .template()
        .ok_or_else(|| Failure::new(2, "E_VALIDATION", "sweeps need a generated topology ([topology] source = generator)"))?;
    let sweeps: Vec<_> = if cfg.sweeps.is_empty() {
        default_sweeps()
    } else {
        cfg.sweeps.iter().map(|s| (s.name.clone(), s.spec.clone())).collect()
    };
    let opts = cfg.optimizer.solver_options();
    let mut meta = String::from("# configuration used for these sweeps\n");
    meta.push_str(&serialize_config(&cfg));
    for (name, spec) in &sweeps {
        let result = sweep(spec, &template, &opts, cfg.seed, Execution::default()).map_err(|e| match e {
            ExperimentError::InvalidSweep(_) => Failure::new(2, e.code(), e.to_string()),
            other => Failure::new(3, other.code(), other.to_string()),
        })?;
        let failed = result.rows.iter().filter(|r| r.outcome.is_err()).count();
        log::info!("sweep {name}: {} rows, {failed} failed", result.rows.len());
        write(&dir, &format!("{name}.csv"), &result.rows_csv())?;
        write(&dir, &format!("{name}_avg.csv"), &result.averages_csv())?;
        let _ = writeln!(
            meta,
            "\n# sweep {name}: axis = {}, values = {:?}, seeds = {:?}",
            spec.axis, spec.values, spec.seeds
        );
    }
    write(&dir, "sweep_metadata.txt", &meta)
}

fn queue(common: &Common) -> Result<(), Failure> {
    let cfg = load(common)?;
    let dir = out_dir(common, &cfg)?;
    let queues: Vec<(String, CtmcSpec)> = if cfg.queues.is_empty() {
        vec![("default".into(), CtmcSpec::default())]
    } else {
        cfg.queues.iter().map(|q| (q.name.clone(), q.spec.clone())).collect()
    };
    let mut csv = format!("{}\n", QueueMetrics::CSV_HEADER);
    for (name, spec) in &queues {
        let (space, pi, metrics) = analyse(spec).map_err(|e| Failure::new(3, e.code(), format!("queue {name}: {e}")))?;
        csv.push_str(&metrics.csv_row(name));
        csv.push('\n');
        write(&dir, &format!("pi_{name}.csv"), &pi_csv(&space, &pi))?;
    }
    write(&dir, "queue_metrics.csv", &csv)
}

fn gen_topology(common: &Common) -> Result<(), Failure> {
    let cfg = load(common)?;
    let dir = out_dir(common, &cfg)?;
    let template = match &cfg.topology {
        TopologySource::Generator(_) => cfg.template().expect("generator source"),
        TopologySource::File(p) => {
            return Err(Failure::new(2, "E_VALIDATION", format!("topology already comes from {}", p.display())))
        }
    };
    let (topo, users) =
        template.draw(derive_seed(cfg.seed, 0)).map_err(|e| Failure::new(3, e.code(), e.to_string()))?;
    let records: Vec<UserRecord> = users.into_iter().map(|channel| UserRecord { channel, rate_bounds: None }).collect();
    write(&dir, "topology.txt", &serialize_topology(&topo, &records))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HETNET_EE_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(c) => solve(c),
        Command::Sweep(c) => run_sweeps(c),
        Command::Queue(c) => queue(c),
        Command::ValidateConfig(c) => load(c).map(|_| ()),
        Command::GenTopology(c) => gen_topology(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error[{}]: {}", f.code, f.message.replace('\n', " "));
            ExitCode::from(f.status)
        }
    }
}
