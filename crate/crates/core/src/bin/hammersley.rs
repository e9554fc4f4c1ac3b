use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hammersley::harness::{self, ConfigFile, Experiment, RunConfig};
use hammersley::{Error, PointCloud};

/// Last-passage percolation experiments on marked Poisson clouds.
///
/// Settings are resolved in this order, later entries winning: the config
/// file (top-level keys, then the section named after the experiment),
/// trailing KEY=VALUE arguments, then the dedicated flags. The thread count
/// can additionally be forced with the HAMMERSLEY_THREADS environment
/// variable, which beats --threads and the file.
///
/// Exit status: 0 on success, 1 when a run fails its own check (oracle
/// mismatch, violated bound), 2 on an invalid configuration.
#[derive(Parser, Debug)]
#[command(name = "hammersley", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Config file with key = value lines and [experiment] sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of replicas.
    #[arg(long)]
    replicas: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    threads: Option<usize>,
    /// Extra settings, e.g. `law=exponential law.rate=1 r=500`.
    #[arg(value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Shape constant estimate at one radius.
    Gamma(Common),
    /// Square-root tail bound against a classical reference run.
    Martin(Common),
    /// Fluctuation scaling across radii.
    Fluct(Common),
    /// Distributional invariance under (x, t) -> (λx, t/λ).
    Scale(Common),
    /// Stabilization of ray approximations from one start.
    Rays(Common),
    /// Coalescence of rays from two starts.
    Coalesce(Common),
    /// Busemann increments, antisymmetry and cocycle checks.
    Busemann(Common),
    /// Transversal wandering and cone confinement of geodesics.
    Straightness(Common),
    /// Number of points on the lowest geodesic.
    Pathcount(Common),
    /// Solver against exhaustive enumeration on small clouds.
    OracleSuite(Common),
    /// Run whatever experiment the config names.
    Run(Common),
    /// Check a config and print its resolved manifest.
    Validate(Common),
    /// Write a sampled cloud (and optionally its passage field) to the output directory.
    DumpCloud {
        #[command(flatten)]
        common: Common,
        /// Side of the square [0, side]².
        #[arg(long)]
        side: f64,
        /// Also write field.txt with rows `x t w value pred_index`.
        #[arg(long)]
        field: bool,
    },
}

fn load(common: &Common, experiment: Option<Experiment>) -> Result<RunConfig, Error> {
    let mut file = match &common.config {
        Some(p) => ConfigFile::read(p)?,
        None => ConfigFile::default(),
    };
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected KEY=VALUE, got '{kv}'")))?;
        file.set(k.trim(), v.trim());
    }
    // Flags win over sections too, so clear any per-section copies.
    let mut flag = |key: &str, value: Option<String>| {
        if let Some(v) = value {
            file.set(key, v);
            for s in file.sections.values_mut() {
                s.remove(key);
            }
        }
    };
    flag("seed", common.seed.map(|v| v.to_string()));
    flag("replicas", common.replicas.map(|v| v.to_string()));
    flag("out", common.out.as_ref().map(|v| v.display().to_string()));
    flag("threads", common.threads.map(|v| v.to_string()));
    if let Some(e) = experiment {
        file.set("experiment", e.name());
    }
    RunConfig::from_file(&file, experiment)
}

fn run_experiment(common: &Common, experiment: Option<Experiment>) -> Result<bool, Error> {
    let cfg = load(common, experiment)?;
    let outcome = harness::run(&cfg)?;
    println!("{}", outcome.estimate.report.to_record());
    Ok(outcome.failed)
}

fn dump(common: &Common, side: f64, field: bool) -> Result<bool, Error> {
    let mut file = match &common.config {
        Some(p) => ConfigFile::read(p)?,
        None => ConfigFile::default(),
    };
    for kv in &common.set {
        if let Some((k, v)) = kv.split_once('=') {
            file.set(k.trim(), v.trim());
        }
    }
    // Resolve the law and seed through the gamma rules so errors read the same.
    file.set("experiment", "gamma");
    file.set("r", side.to_string());
    file.global
        .entry("replicas".into())
        .or_insert_with(|| "2".into());
    if let Some(s) = common.seed {
        file.set("seed", s.to_string());
    }
    if let Some(o) = &common.out {
        file.set("out", o.display().to_string());
    }
    let cfg = RunConfig::from_file(&file, Some(Experiment::Gamma))?;
    let cloud: PointCloud = harness::dump_cloud(cfg.law.as_ref().unwrap(), side, cfg.seed)?;
    std::fs::create_dir_all(&cfg.out)?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(cfg.out.join("cloud.txt"))?);
    cloud.write_table(&mut out)?;
    out.flush()?;
    if field {
        let mut out = std::io::BufWriter::new(std::fs::File::create(cfg.out.join("field.txt"))?);
        harness::write_field(&cloud, &mut out)?;
        out.flush()?;
    }
    eprintln!(
        "dump-cloud: {} points written to {}",
        cloud.len(),
        cfg.out.display()
    );
    Ok(false)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gamma(c) => run_experiment(c, Some(Experiment::Gamma)),
        Command::Martin(c) => run_experiment(c, Some(Experiment::Martin)),
        Command::Fluct(c) => run_experiment(c, Some(Experiment::Fluct)),
        Command::Scale(c) => run_experiment(c, Some(Experiment::Scale)),
        Command::Rays(c) => run_experiment(c, Some(Experiment::Rays)),
        Command::Coalesce(c) => run_experiment(c, Some(Experiment::Coalesce)),
        Command::Busemann(c) => run_experiment(c, Some(Experiment::Busemann)),
        Command::Straightness(c) => run_experiment(c, Some(Experiment::Straightness)),
        Command::Pathcount(c) => run_experiment(c, Some(Experiment::PathCount)),
        Command::OracleSuite(c) => run_experiment(c, Some(Experiment::OracleSuite)),
        Command::Run(c) => run_experiment(c, None),
        Command::Validate(c) => load(c, None).map(|cfg| {
            print!("{}", cfg.to_manifest());
            false
        }),
        Command::DumpCloud {
            common,
            side,
            field,
        } => dump(common, *side, *field),
    };
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("run failed its check; see report");
            ExitCode::from(1)
        }
        Err(e @ (Error::Config(_) | Error::Parse { .. })) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
