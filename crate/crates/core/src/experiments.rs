//! Basin-of-attraction sweeps around the axial position.
//!
//! Each trial draws `Y0 = rownorm(Y_axial + πΔ)` with `Δ_ij ~ N(0, 1/p)`,
//! runs a solver on the almost-average block instance with `p = n/2`, and
//! classifies the limit as spurious (objective 0) or global.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::{almost_average, almost_average_opt_value, axial, block_cost};
use crate::linalg::SymMatrix;
use crate::manifold::Point;
use crate::optimize::{classify_value, solve, Classification, SolverConfig};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig<T> {
    pub n_values: Vec<usize>,
    pub pi_values: Vec<f64>,
    pub trials_per_cell: usize,
    pub solver: SolverConfig<T>,
    pub seed0: u64,
    pub margin: T,
    pub output_path: Option<PathBuf>,
}

impl<T: Scalar> ExperimentConfig<T> {
    /// Trust-region solver, margin `1e-3`.
    pub fn new(n_values: Vec<usize>, pi_values: Vec<f64>, trials_per_cell: usize, seed0: u64) -> Self {
        Self {
            n_values,
            pi_values,
            trials_per_cell,
            solver: SolverConfig::trust_region(),
            seed0,
            margin: T::lit(1e-3),
            output_path: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.n_values.is_empty() || self.pi_values.is_empty() {
            return bad("experiment needs at least one n and one pi".into());
        }
        if let Some(&n) = self.n_values.iter().find(|&&n| n < 4 || n % 2 == 1) {
            return bad(format!("n must be even and at least 4, got {n}"));
        }
        if let Some(&pi) = self.pi_values.iter().find(|&&x| !(x > 0.0) || !x.is_finite()) {
            return bad(format!("pi must be positive, got {pi}"));
        }
        if self.trials_per_cell == 0 {
            return bad("trials_per_cell must be at least 1".into());
        }
        if !(self.margin > T::zero()) {
            return bad("margin must be positive".into());
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub n: usize,
    pub p: usize,
    pub pi: f64,
    pub seed: u64,
    pub iterations: usize,
    pub final_objective: f64,
    pub classification: Classification,
    pub wall_time_ms: u64,
}

/// Aggregate of one `(n, π)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub n: usize,
    pub p: usize,
    pub pi: f64,
    pub trials: usize,
    pub fraction_spurious: f64,
    pub fraction_unknown: f64,
}

/// `rownorm(axial(n) + π·Δ)` with `Δ_ij ~ N(0, 1/p)`.
pub fn sample_initializer<T: Scalar, R: Rng + ?Sized>(n: usize, pi: T, rng: &mut R) -> Result<Point<T>> {
    if !(pi > T::zero()) || !pi.is_finite() {
        return Err(Error::InvalidInput(format!("pi must be positive, got {pi}")));
    }
    let ax = axial::<T>(n)?;
    let p = ax.p();
    let sd = (T::one() / T::of_usize(p)).sqrt();
    let mut m = ax.to_matrix();
    for x in m.as_mut_slice() {
        let z: f64 = rng.sample(StandardNormal);
        *x = *x + pi * sd * T::lit(z);
    }
    Point::normalized(m)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d1_049b_133f_11eb);
    z ^ (z >> 31)
}

/// `seed0 + h(n, π, trial)`, independent of execution order and platform.
pub fn trial_seed(seed0: u64, n: usize, pi: f64, trial: usize) -> u64 {
    let h = [n as u64, pi.to_bits(), trial as u64]
        .into_iter()
        .fold(0u64, |acc, x| splitmix64(acc ^ x));
    seed0.wrapping_add(h)
}

/// The almost-average block instance with zero diagonal shift.
pub fn phase_instance<T: Scalar>(n: usize) -> Result<SymMatrix<T>> {
    if n % 2 == 1 {
        return Err(Error::InvalidDimensions(format!("n must be even, got {n}")));
    }
    block_cost(&almost_average(n / 2)?, &vec![T::zero(); n])
}

/// Runs one trial. A numerical failure yields an `Unknown` record.
pub fn run_trial<T: Scalar>(
    a: &SymMatrix<T>,
    pi: f64,
    seed: u64,
    solver: &SolverConfig<T>,
    margin: T,
) -> Result<TrialRecord> {
    let n = a.dim();
    let p = n / 2;
    let optimal = almost_average_opt_value::<T>(p)?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y0 = sample_initializer(n, T::lit(pi), &mut rng)?;
    let (iterations, final_objective, classification) = match solve(a, &y0, solver) {
        Ok(trace) => {
            let f = trace.final_objective();
            (trace.iterations, f.to_f64_lossy(), classify_value(f, T::zero(), optimal, margin)?)
        }
        Err(Error::NumericalFailure { iteration, last_objective, .. }) => {
            log::warn!("trial n={n} pi={pi} seed={seed}: numerical failure at iteration {iteration}");
            (iteration, last_objective, Classification::Unknown)
        }
        Err(e) => return Err(e),
    };
    Ok(TrialRecord {
        n,
        p,
        pi,
        seed,
        iterations,
        final_objective,
        classification,
        wall_time_ms: start.elapsed().as_millis() as u64,
    })
}

/// Runs every trial of every cell in parallel and returns per-trial records
/// in `(n, π, trial)` order.
pub fn run_trials<T: Scalar>(cfg: &ExperimentConfig<T>) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let instances: BTreeMap<usize, SymMatrix<T>> = cfg
        .n_values
        .iter()
        .map(|&n| phase_instance(n).map(|a| (n, a)))
        .collect::<Result<_>>()?;
    let tasks: Vec<(usize, f64, usize)> = cfg
        .n_values
        .iter()
        .flat_map(|&n| {
            cfg.pi_values
                .iter()
                .flat_map(move |&pi| (0..cfg.trials_per_cell).map(move |t| (n, pi, t)))
        })
        .collect();
    tasks
        .par_iter()
        .map(|&(n, pi, t)| {
            run_trial(
                &instances[&n],
                pi,
                trial_seed(cfg.seed0, n, pi, t),
                &cfg.solver,
                cfg.margin,
            )
        })
        .collect()
}

/// Groups trial records into cells, keeping first-seen cell order.
pub fn aggregate(records: &[TrialRecord]) -> Vec<CellResult> {
    let mut cells: Vec<(usize, f64, usize, usize, usize)> = Vec::new();
    for r in records {
        let idx = match cells.iter().position(|c| c.0 == r.n && c.1.to_bits() == r.pi.to_bits()) {
            Some(i) => i,
            None => {
                cells.push((r.n, r.pi, 0, 0, 0));
                cells.len() - 1
            }
        };
        let c = &mut cells[idx];
        c.2 += 1;
        match r.classification {
            Classification::Spurious => c.3 += 1,
            Classification::Unknown => c.4 += 1,
            Classification::Global => {}
        }
    }
    cells
        .into_iter()
        .map(|(n, pi, trials, spurious, unknown)| CellResult {
            n,
            p: n / 2,
            pi,
            trials,
            fraction_spurious: spurious as f64 / trials as f64,
            fraction_unknown: unknown as f64 / trials as f64,
        })
        .collect()
}

pub fn run_phase_transition<T: Scalar>(cfg: &ExperimentConfig<T>) -> Result<Vec<CellResult>> {
    Ok(aggregate(&run_trials(cfg)?))
}

/// Smallest π at which the spurious fraction of column `n` drops to `level`
/// or below, linearly interpolated between neighbouring π values.
pub fn crossing_pi(results: &[CellResult], n: usize, level: f64) -> Option<f64> {
    let mut col: Vec<&CellResult> = results.iter().filter(|c| c.n == n).collect();
    col.sort_by(|a, b| a.pi.total_cmp(&b.pi));
    let first = col.first()?;
    if first.fraction_spurious <= level {
        return Some(first.pi);
    }
    col.windows(2).find_map(|w| {
        let (a, b) = (w[0], w[1]);
        (b.fraction_spurious <= level).then(|| {
            let t = (a.fraction_spurious - level) / (a.fraction_spurious - b.fraction_spurious);
            a.pi + t * (b.pi - a.pi)
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::InvalidInput(format!("unknown report format '{other}'"))),
        }
    }
}

pub const REPORT_HEADER: &str = "n,p,pi,trials,fraction_spurious,fraction_unknown";

/// Rounds to 6 significant digits and prints the shortest decimal form.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("scientific literal");
    rounded.to_string()
}

pub fn format_report(results: &[CellResult], format: ReportFormat) -> Result<String> {
    if results.is_empty() {
        return Err(Error::InvalidInput("no results to report".into()));
    }
    Ok(match format {
        ReportFormat::Csv => {
            let mut s = format!("{REPORT_HEADER}\n");
            for c in results {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    c.n,
                    c.p,
                    sig6(c.pi),
                    c.trials,
                    sig6(c.fraction_spurious),
                    sig6(c.fraction_unknown)
                );
            }
            s
        }
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(results)?;
            s.push('\n');
            s
        }
    })
}

pub fn emit_report(results: &[CellResult], format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    let text = format_report(results, format)?;
    std::fs::write(path.as_ref(), text)
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))
}

pub fn parse_report(text: &str, format: ReportFormat) -> Result<Vec<CellResult>> {
    match format {
        ReportFormat::Json => Ok(serde_json::from_str(text)?),
        ReportFormat::Csv => {
            let mut lines = text.lines().filter(|l| !l.trim().is_empty());
            if lines.next().map(str::trim) != Some(REPORT_HEADER) {
                return Err(Error::Parse(format!("expected header '{REPORT_HEADER}'")));
            }
            lines
                .enumerate()
                .map(|(i, line)| {
                    let f: Vec<&str> = line.split(',').map(str::trim).collect();
                    if f.len() != 6 {
                        return Err(Error::Parse(format!("row {}: expected 6 fields", i + 1)));
                    }
                    let int = |s: &str| s.parse::<usize>().map_err(|e| Error::Parse(format!("row {}: {e}", i + 1)));
                    let real = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("row {}: {e}", i + 1)));
                    Ok(CellResult {
                        n: int(f[0])?,
                        p: int(f[1])?,
                        pi: real(f[2])?,
                        trials: int(f[3])?,
                        fraction_spurious: real(f[4])?,
                        fraction_unknown: real(f[5])?,
                    })
                })
                .collect()
        }
    }
}

pub fn read_report(path: impl AsRef<Path>, format: ReportFormat) -> Result<Vec<CellResult>> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_report(&text, format)
}

/// Trial records as CSV, without wall time so that output is reproducible.
pub fn trials_csv(records: &[TrialRecord]) -> String {
    let mut s = String::from("n,p,pi,seed,iterations,final_objective,classification\n");
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{:?}",
            r.n, r.p, r.pi, r.seed, r.iterations, r.final_objective, r.classification
        );
    }
    s
}

/// Least-squares line through `(i, ys[i])`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_line(ys: &[f64]) -> Option<LineFit> {
    let m = ys.len();
    if m < 2 {
        return None;
    }
    let mf = m as f64;
    let xbar = (mf - 1.0) / 2.0;
    let ybar = ys.iter().sum::<f64>() / mf;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (i, &y) in ys.iter().enumerate() {
        let dx = i as f64 - xbar;
        let dy = y - ybar;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LineFit {
        slope,
        intercept: ybar - slope * xbar,
        r_squared,
    })
}

/// Fits `log Φ` over the prefix of `potentials` above `floor`.
pub fn potential_decay_fit(potentials: &[f64], floor: f64) -> Option<LineFit> {
    let logs: Vec<f64> = potentials
        .iter()
        .take_while(|&&phi| phi >= floor && phi > 0.0)
        .map(|phi| phi.ln())
        .collect();
    fit_line(&logs)
}
