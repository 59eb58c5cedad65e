use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use satcost::cnf::parse_dimacs_str;
use satcost::features::WindowConfig;
use satcost::harness::collect::{collect, features_csv, labeled_set, runs_csv, CollectOptions};
use satcost::harness::config::ExperimentConfig;
use satcost::harness::dataset::{generate, ingest_dir, Manifest};
use satcost::harness::experiment::run_experiment;
use satcost::harness::io::{read_json, read_text, write_json, write_text};
use satcost::harness::HarnessError;
use satcost::lmp::{train_pair, LmpModelPair};
use satcost::monitor::{Monitor, MonitorConfig};
use satcost::portfolio::{race, RaceConfig};
use satcost::solver::solve;

#[derive(Parser)]
#[command(name = "satcost", version, about = "Online cost estimation for CDCL SAT search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Overrides the configuration seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(short, long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a filtered random ensemble and write its manifest.
    Gen {
        #[command(flatten)]
        common: Common,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Build a manifest from the .cnf files of a directory.
    Ingest {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dir: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Solve every manifest instance under the monitor and write features.
    Collect {
        #[command(flatten)]
        common: Common,
        #[arg(short, long)]
        manifest: PathBuf,
        #[arg(long)]
        solver: String,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Run every analysis of the configuration and write the reports.
    Experiment {
        #[command(flatten)]
        common: Common,
        #[arg(short, long)]
        manifest: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Train a sat/unsat model pair on all manifest instances.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(short, long)]
        manifest: PathBuf,
        #[arg(long)]
        solver: String,
        /// 1-based query restart; omit for solvers without restarts.
        #[arg(long)]
        restart: Option<u32>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Race two solvers on a DIMACS file with trained model pairs.
    Race {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model_a: PathBuf,
        #[arg(long)]
        model_b: PathBuf,
        cnf: PathBuf,
    },
    /// Solve one DIMACS file and print the estimates at each query point.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        solver: String,
        cnf: PathBuf,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = ExperimentConfig::from_toml(&read_text(&common.config)?)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn write_files(dir: &Path, files: impl IntoIterator<Item = (String, String)>) -> Result<(), HarnessError> {
    for (name, text) in files {
        write_text(&dir.join(&name), &text)?;
        eprintln!("wrote {}", dir.join(&name).display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Gen { common, out } => {
            let cfg = load_config(&common)?;
            let manifest = generate(&cfg, common.jobs, |n, s, u| eprintln!("{n} candidates: {s} sat, {u} unsat kept"))?;
            write_json(&out.join("manifest.json"), &manifest)?;
            eprintln!("wrote {}", out.join("manifest.json").display());
        }
        Command::Ingest { common, dir, out } => {
            let cfg = load_config(&common)?;
            let reference = cfg.solver(&cfg.ensemble.reference_solver)?;
            let manifest = ingest_dir(&dir, &cfg.ensemble.name, reference, common.jobs)?;
            write_json(&out.join("manifest.json"), &manifest)?;
        }
        Command::Collect { common, manifest, solver, out } => {
            let cfg = load_config(&common)?;
            let manifest: Manifest = read_json(&manifest)?;
            let opts = CollectOptions { record_streams: false, ..CollectOptions::default() };
            let runs = collect(&manifest, &solver, cfg.solver(&solver)?, &opts, common.jobs)?;
            write_files(&out, [(format!("runs-{solver}.csv"), runs_csv(&runs)?), (format!("features-{solver}.csv"), features_csv(&runs)?)])?;
        }
        Command::Experiment { common, manifest, out } => {
            let cfg = load_config(&common)?;
            let manifest: Manifest = read_json(&manifest)?;
            let results = run_experiment(&cfg, &manifest, common.jobs, |m| eprintln!("{m}"))?;
            let files = results.files()?;
            print!("{}", files["summary.txt"]);
            write_files(&out, files)?;
        }
        Command::Train { common, manifest, solver, restart, out } => {
            let cfg = load_config(&common)?;
            let manifest: Manifest = read_json(&manifest)?;
            let solver_cfg = cfg.solver(&solver)?;
            let opts = CollectOptions { record_streams: false, last_query_restart: restart, ..CollectOptions::default() };
            let runs = collect(&manifest, &solver, solver_cfg, &opts, common.jobs)?;
            let (r, window) = match restart {
                Some(r) => (r, None),
                None => (1, Some(cfg.evaluate.as_ref().map_or(WindowConfig::NO_RESTART, |e| e.window))),
            };
            let set = labeled_set(&runs, r, window);
            let pair = train_pair(&set, &cfg.train, cfg.seed, restart, 0)?;
            write_text(&out, &pair.to_json())?;
            eprintln!("trained on {} instances; wrote {}", set.len(), out.display());
        }
        Command::Race { common, model_a, model_b, cnf } => {
            let cfg = load_config(&common)?;
            let spec = cfg.race.as_ref().ok_or_else(|| HarnessError::Config("configuration has no [race] section".into()))?;
            let a = LmpModelPair::from_json(&read_text(&model_a)?)?;
            let b = LmpModelPair::from_json(&read_text(&model_b)?)?;
            let formula = parse_dimacs_str(&read_text(&cnf)?)?.formula;
            let race_cfg = RaceConfig {
                solver_a: cfg.solver(&spec.a)?.clone(),
                query_restart_a: spec.query_restart_a,
                solver_b: cfg.solver(&spec.b)?.clone(),
                query_restart_b: spec.query_restart_b,
                mode: cfg.race_mode,
            };
            let result = race(&formula, &a, &b, &race_cfg)?;
            println!("{}", serde_json::to_string_pretty(&result).map_err(|e| HarnessError::Data(e.to_string()))?);
        }
        Command::Solve { common, solver, cnf } => {
            let cfg = load_config(&common)?;
            let solver_cfg = cfg.solver(&solver)?;
            let formula = parse_dimacs_str(&read_text(&cnf)?)?.formula;
            let mut mcfg = MonitorConfig::new(solver_cfg.clone());
            mcfg.fixed_windows = CollectOptions::default().fixed_windows;
            mcfg.record_streams = false;
            let mut monitor = Monitor::new(&formula, mcfg);
            let out = solve(&formula, solver_cfg, &mut monitor)?;
            let report = monitor.finish()?;
            println!("status {:?}, {} conflicts, {} restarts", out.status, out.total_conflicts, out.per_restart_conflicts.len());
            for q in &report.queries {
                let wbe = q.wbe_log2_total.map_or("-".to_string(), |v| format!("{:.0}", v.exp2()));
                let pb = q.pb_total.map_or("-".to_string(), |v| format!("{v:.0}"));
                println!("restart {} conflict {}: wbe {wbe}, pb {pb}", q.restart, q.conflict_index);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
