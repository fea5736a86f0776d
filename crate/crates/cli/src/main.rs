use std::path::{Path, PathBuf};
use std::process::ExitCode;

use buckid::harness::{
    self, emit_classification, emit_experiment, emit_landscape, landscape_case, load_report_inputs, parse_case_list,
    render_report, run_experiment, ExperimentSpec,
};
use buckid::io::{read_window, write_window};
use buckid::landscape::{GridSpec, LandscapeConfig};
use buckid::{case_catalog, estimate, simulate_window, CircuitParams64, Error, Param, SimConfig, TrainConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "buckid",
    version,
    about = "Buck-converter parameter identification and loss-landscape analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the measurement window of a test case.
    Simulate {
        #[arg(long)]
        case: u32,
        /// Noise seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// File stem; defaults to `case<K>`.
        #[arg(long)]
        stem: Option<String>,
    },
    /// Estimate the circuit parameters from a stored window.
    Estimate {
        /// Sample CSV; the `_switch.csv` and `.json` siblings must exist.
        #[arg(long)]
        window: PathBuf,
        #[arg(long)]
        train_cfg: Option<PathBuf>,
        /// Write the result here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Loss sweeps, Hessians and identifiability classes.
    Landscape {
        /// Case id or list, e.g. `1` or `1-6`.
        #[arg(long)]
        case: String,
        /// Parameter name or `all`.
        #[arg(long, default_value = "all")]
        param: String,
        /// Wide sweep grid `LO:HI:N` in percent.
        #[arg(long)]
        grid: Option<GridSpec>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Skip the Hessian probes.
        #[arg(long)]
        no_hessian: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Repeated estimation over several cases.
    Experiment {
        #[arg(long, default_value = "1-6")]
        cases: String,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        train_cfg: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Rebuild `report.md` from an output directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn load_train_cfg(path: Option<&Path>) -> buckid::Result<TrainConfig> {
    let cfg = match path {
        Some(p) => serde_json::from_reader(std::fs::File::open(p)?)?,
        None => TrainConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn parse_params(name: &str) -> buckid::Result<Vec<Param>> {
    if name.eq_ignore_ascii_case("all") {
        return Ok(Param::ALL.to_vec());
    }
    Param::parse(name)
        .map(|p| vec![p])
        .ok_or_else(|| Error::InvalidConfig(format!("unknown parameter {name:?}")))
}

fn run(cli: Cli) -> buckid::Result<()> {
    match cli.command {
        Command::Simulate { case, seed, out, stem } => {
            let cfg = SimConfig {
                seed,
                ..case_catalog(case)?
            };
            let truth = harness::case_truth(&cfg);
            let window = simulate_window(&cfg, &truth)?;
            let stem = stem.unwrap_or_else(|| format!("case{case}"));
            let files = write_window(&window, &out, &stem)?;
            println!("{}", files.samples.display());
        }
        Command::Estimate { window, train_cfg, out } => {
            let cfg = load_train_cfg(train_cfg.as_deref())?;
            let w = read_window(&window)?;
            let nominal = CircuitParams64::reference().with_load(w.meta.load_post);
            let result = estimate(&w, &nominal, &cfg)?;
            let text = serde_json::to_string_pretty(&result)?;
            match out {
                Some(path) => std::fs::write(path, text + "\n")?,
                None => emit(&(text + "\n")),
            }
        }
        Command::Landscape {
            case,
            param,
            grid,
            seed,
            no_hessian,
            out,
        } => {
            let cases = parse_case_list(&case)?;
            let mut cfg = LandscapeConfig {
                params: parse_params(&param)?,
                ..LandscapeConfig::default()
            };
            if let Some(g) = grid {
                cfg.wide = g;
            }
            let mut metrics = Vec::new();
            for &k in &cases {
                let report = landscape_case(k, seed, &cfg, !no_hessian)?;
                emit_landscape(&report, k, &out)?;
                match report.at_actual() {
                    Some(probe) => println!(
                        "case {k}: condition number {:.3e}, smallest eigenvalue {:.3e}",
                        probe.condition_number,
                        probe.min_eigenvalue()
                    ),
                    None => println!("case {k}: sweeps written"),
                }
                metrics.push(report.metrics);
            }
            if cfg.params.len() == Param::ALL.len() {
                let classes = emit_classification(&metrics, &cfg.thresholds, &out)?;
                for (p, c) in classes {
                    println!("{p}: {c}");
                }
            }
        }
        Command::Experiment {
            cases,
            reps,
            seed,
            train_cfg,
            out,
        } => {
            let spec = ExperimentSpec {
                cases: parse_case_list(&cases)?,
                repetitions: reps,
                base_seed: seed,
                train: load_train_cfg(train_cfg.as_deref())?,
            };
            let exp = run_experiment(&spec)?;
            emit_experiment(&exp, &out)?;
            for c in &exp.summary.cases {
                println!("case {}: {}/{} converged", c.case, c.converged, c.runs);
            }
        }
        Command::Report { input } => {
            let text = render_report(&load_report_inputs(&input)?);
            std::fs::write(input.join("report.md"), &text)?;
            emit(&text);
        }
    }
    Ok(())
}

/// Writes to stdout, tolerating a closed pipe.
fn emit(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().write_all(text.as_bytes());
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
