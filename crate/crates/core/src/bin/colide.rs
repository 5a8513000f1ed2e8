use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use colide::cli::{self, ExperimentGrid, Fitted, Method, SimSpec};
use colide::io::{self, FitConfig};
use colide::{Error, Result};

#[derive(Parser)]
#[command(name = "colide", version, about = "DAG structure learning with concomitant scores and non-negative acyclicity")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "COLIDE_OUT", default_value = "colide-out")]
    out: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw one synthetic dataset and its ground truth.
    Simulate {
        /// Simulation spec JSON (graph, d, n, noise, weights, optional lags).
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fit a DAG to a d × n data CSV.
    Fit {
        data: PathBuf,
        #[arg(long, value_parser = parse_method)]
        method: Method,
        /// Fit config JSON; omitted fields take the method's defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Edge threshold, overriding the config.
        #[arg(long)]
        threshold: Option<f64>,
        /// Recorded in the exported config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score an estimate against a ground-truth graph.
    Eval {
        estimate: PathBuf,
        truth: PathBuf,
        /// Drop estimated edges with |w| below this before scoring.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Run an experiment grid.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Ingest the raw Sachs protein table.
    Sachs {
        raw: PathBuf,
        /// Scale every variable to unit variance after centering.
        #[arg(long)]
        standardize: bool,
    },
}

// Like println!, but a closed pipe (e.g. `| head`) is not an error.
macro_rules! say {
    ($($t:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn run(cli: Cli) -> Result<()> {
    let out = cli.out;
    match cli.cmd {
        Cmd::Simulate { config, seed } => {
            let path = &config;
            let spec: SimSpec = serde_json::from_str(&io::read_text(path)?).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let sim = cli::cmd_simulate(&spec, seed, &out)?;
            say!("wrote {} ({} edges, data {}x{})", out.display(), sim.truth.edge_count(), sim.x.nrows(), sim.x.ncols());
        }
        Cmd::Fit { data, method, config, threshold, seed } => {
            let mut cfg = match config {
                Some(p) => FitConfig::load(p)?,
                None => FitConfig::default(),
            };
            if threshold.is_some() {
                cfg.edge_threshold = threshold;
            }
            if seed.is_some() {
                cfg.seed = seed;
            }
            let fitted = cli::cmd_fit(&data, method, &cfg, &out)?;
            let tag = match &fitted {
                Fitted::Static(_) => "",
                Fitted::Svarm(_) => " (instantaneous)",
            };
            say!("{method}: {} edges{tag}, converged {}; wrote {}", fitted.w().edge_count(), fitted.converged(), out.display());
        }
        Cmd::Eval { estimate, truth, threshold } => {
            let report = cli::cmd_eval(&estimate, &truth, threshold, Some(&out))?;
            say!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
        }
        Cmd::Bench { config, workers } => {
            let grid = ExperimentGrid::load(&config)?;
            let res = cli::cmd_bench(&grid, &out, workers)?;
            let failed = res.records.iter().filter(|r| r.error.is_some()).count();
            say!("{} trials ({failed} failed); wrote {}", res.records.len(), out.display());
            for c in &res.summary {
                let shd = c.metrics.get("shd").map_or(f64::NAN, |q| q.median);
                say!("  {:<12} d={:<4} {:<12} median SHD {shd}", c.method, c.d, c.variance);
            }
        }
        Cmd::Sachs { raw, standardize } => {
            let data = cli::cmd_sachs(&raw, &out, standardize)?;
            say!("wrote {} ({}x{}, standardized {standardize})", out.display(), data.d(), data.n());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
