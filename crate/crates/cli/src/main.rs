use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bmlandscape::certify::criticality_report;
use bmlandscape::experiments::{
    crossing_pi, emit_report, format_report, parse_report, run_phase_transition, ExperimentConfig, ReportFormat,
};
use bmlandscape::instances::{almost_average_opt_value, axial, default_mu, Construction, InstanceSpec};
use bmlandscape::optimize::{classify_limit, solve, Method, SolverConfig};
use bmlandscape::{Error, Matrix, Point, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "bmlandscape", version, about = "Spurious local minima of Burer-Monteiro Max-Cut factorizations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConstructionArg {
    AlmostAverage,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Rgd,
    Armijo,
    Tr,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Rgd => Method::FixedStepRgd,
            MethodArg::Armijo => Method::ArmijoRgd,
            MethodArg::Tr => Method::TrustRegion,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a block-cost instance as JSON.
    Gen {
        #[arg(long, value_enum)]
        construction: ConstructionArg,
        #[arg(long)]
        n: usize,
        /// Mean of the Gaussian entries (random construction).
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a criticality report for a point as JSON.
    Certify {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, conflicts_with = "axial", required_unless_present = "axial")]
        point: Option<PathBuf>,
        /// Use the axial position [I; -I].
        #[arg(long)]
        axial: bool,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Run a solver from a starting point and write its trace as CSV.
    Optimize {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        point: PathBuf,
        #[arg(long, value_enum, default_value = "tr")]
        method: MethodArg,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        trace: PathBuf,
        /// Also write the final point as text.
        #[arg(long)]
        final_point: Option<PathBuf>,
    },
    /// Sweep perturbation sizes around the axial point.
    Phase {
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.26,0.27,0.28,0.29,0.30")]
        pi: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "tr")]
        method: MethodArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
    },
    /// Convert a phase-transition report between CSV and JSON.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
    },
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn load_instance(path: &Path) -> Result<InstanceSpec<f64>> {
    InstanceSpec::from_json(&read_text(path)?)
}

fn load_point(path: &Path, n: usize, p: usize) -> Result<Point<f64>> {
    let m = Matrix::parse_text(&read_text(path)?)?;
    if m.rows() != n || m.cols() != p {
        return Err(Error::InvalidDimensions(format!(
            "point is {}x{}, instance expects {n}x{p}",
            m.rows(),
            m.cols()
        )));
    }
    Point::new(m)
}

fn to_json<S: serde::Serialize>(value: &S) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen {
            construction,
            n,
            mu,
            seed,
            out,
        } => {
            let spec = match construction {
                ConstructionArg::AlmostAverage => InstanceSpec::<f64>::almost_average(n)?,
                ConstructionArg::Random => {
                    let mu = mu.unwrap_or_else(|| default_mu(n / 2));
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    InstanceSpec::random(n, mu, seed, &mut rng)?
                }
            };
            write_text(&out, &spec.to_json()?)
        }
        Command::Certify {
            instance,
            point,
            axial: use_axial,
            tol,
        } => {
            let spec = load_instance(&instance)?;
            let y = match point {
                Some(path) => load_point(&path, spec.n, spec.p)?,
                None if use_axial && spec.p * 2 == spec.n => axial(spec.n)?,
                None => {
                    return Err(Error::InvalidInput(format!(
                        "the axial point needs p = n/2, instance has n = {} and p = {}",
                        spec.n, spec.p
                    )))
                }
            };
            let report = criticality_report(&spec.cost_matrix()?, &y, tol)?;
            println!("{}", to_json(&report)?);
            Ok(())
        }
        Command::Optimize {
            instance,
            point,
            method,
            eta,
            max_iters,
            trace,
            final_point,
        } => {
            let spec = load_instance(&instance)?;
            let a = spec.cost_matrix()?;
            let y0 = load_point(&point, spec.n, spec.p)?;
            let mut cfg = SolverConfig::for_method(method.into());
            cfg.eta = eta;
            if let Some(m) = max_iters {
                cfg.max_iters = m;
            }
            let result = solve(&a, &y0, &cfg)?;
            result.write_csv(&trace).map_err(|e| Error::Io(format!("{}: {e}", trace.display())))?;
            if let Some(path) = final_point {
                write_text(&path, &result.final_point.to_matrix().to_text())?;
            }
            let almost_average =
                matches!(spec.construction, Construction::AlmostAverage) && spec.alpha.iter().all(|&x| x == 0.0);
            let classification = if almost_average && spec.p * 2 == spec.n {
                let opt = almost_average_opt_value(spec.p)?;
                Some(classify_limit(&a, &result.final_point, 0.0, opt, 1e-3)?)
            } else {
                None
            };
            println!("{}", to_json(&result.summary(classification))?);
            Ok(())
        }
        Command::Phase {
            n,
            pi,
            trials,
            seed,
            method,
            out,
            format,
        } => {
            let mut cfg = ExperimentConfig::<f64>::new(n.clone(), pi, trials, seed);
            cfg.solver = SolverConfig::for_method(method.into());
            cfg.output_path = Some(out.clone());
            let cells = run_phase_transition(&cfg)?;
            emit_report(&cells, format.into(), &out)?;
            for &size in &n {
                match crossing_pi(&cells, size, 0.5) {
                    Some(x) => eprintln!("n = {size}: spurious fraction crosses 1/2 near pi = {x:.4}"),
                    None => eprintln!("n = {size}: spurious fraction stays above 1/2 on this grid"),
                }
            }
            Ok(())
        }
        Command::Report { input, format } => {
            let text = read_text(&input)?;
            let source = if text.trim_start().starts_with('[') {
                ReportFormat::Json
            } else {
                ReportFormat::Csv
            };
            let cells = parse_report(&text, source)?;
            print!("{}", format_report(&cells, format.into())?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::NumericalFailure { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
