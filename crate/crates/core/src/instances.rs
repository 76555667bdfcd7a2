//! Cost matrices and points for which the axial position is a spurious local
//! minimum, plus the padding that transfers them to smaller ranks.
//!
//! The central shape is the block cost
//!
//! ```text
//! A = [M M; M M] + diag(α)
//! ```
//!
//! which makes `[I; −I]` first-order critical for any symmetric `M`,
//! second-order critical iff `M` is pseudo-PSD, and a local minimum when `M`
//! is pseudo-PD. It is spurious exactly when `M` is not PSD.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{dims, Error, Result};
use crate::linalg::{leave_one_out_min_eigenvalues, Matrix, SymMatrix};
use crate::manifold::{check_point, Point};
use crate::scalar::Scalar;

/// `[I_{n/2}; −I_{n/2}]`.
pub fn axial<T: Scalar>(n: usize) -> Result<Point<T>> {
    if n < 2 || n % 2 != 0 {
        return Err(dims(format!("axial position needs an even n ≥ 2, got {n}")));
    }
    let k = n / 2;
    let y = Matrix::from_fn(n, k, |i, j| {
        if i == j {
            T::one()
        } else if i == j + k {
            -T::one()
        } else {
            T::zero()
        }
    });
    Ok(Point::from_matrix_unchecked(y))
}

/// `k × k` matrix with unit diagonal and `−1/(k − 1.5)` off the diagonal.
///
/// Every leave-one-out submatrix is strictly diagonally dominant, while the
/// all-ones vector has eigenvalue `−1/(2k − 3)`.
pub fn almost_average<T: Scalar>(k: usize) -> Result<SymMatrix<T>> {
    if k < 2 {
        return Err(dims(format!("almost-average matrix needs k ≥ 2, got {k}")));
    }
    let off = -T::one() / (T::of_usize(k) - T::lit(1.5));
    Ok(SymMatrix::from_upper(k, |i, j| if i == j { T::one() } else { off }))
}

/// `4p(1 − (p−1)/(p−1.5))`: the optimal value of the almost-average block
/// instance with `n = 2p`, attained only by the all-ones matrix `J`.
pub fn almost_average_opt_value<T: Scalar>(p: usize) -> Result<T> {
    if p < 2 {
        return Err(dims(format!("optimal value needs p ≥ 2, got {p}")));
    }
    let pf = T::of_usize(p);
    Ok(T::lit(4.0) * pf * (T::one() - (pf - T::one()) / (pf - T::lit(1.5))))
}

/// `[M M; M M] + diag(α)`.
pub fn block_cost<T: Scalar>(m: &SymMatrix<T>, alpha: &[T]) -> Result<SymMatrix<T>> {
    let k = m.dim();
    if alpha.len() != 2 * k {
        return Err(dims(format!(
            "alpha has length {} but the block cost has dimension {}",
            alpha.len(),
            2 * k
        )));
    }
    let a = SymMatrix::from_upper(2 * k, |i, j| m[(i % k, j % k)]);
    a.add_diagonal(alpha)
}

/// Recovers `(M, α)` from `A = [M M; M M] + diag(α)` if `A` has that form
/// within `tol·max(1, ‖A‖_F)`.
pub fn block_form<T: Scalar>(a: &SymMatrix<T>, tol: T) -> Option<(SymMatrix<T>, Vec<T>)> {
    let n = a.dim();
    if n < 2 || n % 2 != 0 {
        return None;
    }
    let k = n / 2;
    let thr = tol * a.frobenius_norm().max(T::one());
    let m = SymMatrix::from_upper(k, |i, j| a[(i, j + k)]);
    for i in 0..k {
        for j in 0..k {
            if !((a[(i + k, j)] - m[(i, j)]).abs() <= thr) {
                return None;
            }
            if i != j
                && !((a[(i, j)] - m[(i, j)]).abs() <= thr && (a[(i + k, j + k)] - m[(i, j)]).abs() <= thr)
            {
                return None;
            }
        }
    }
    let alpha = (0..n).map(|i| a[(i, i)] - m[(i % k, i % k)]).collect();
    Some((m, alpha))
}

/// `2√(log max(k, 2))`.
pub fn default_mu(k: usize) -> f64 {
    2.0 * (k.max(2) as f64).ln().sqrt()
}

pub const DEFAULT_MAX_RETRIES: usize = 16;

/// A verified nonnegative strictly pseudo-PD matrix `M = UUᵀ − εI`.
#[derive(Debug, Clone)]
pub struct RandomPseudoPd<T: Scalar> {
    pub m: SymMatrix<T>,
    pub epsilon: T,
    pub attempts: usize,
}

/// Randomized nonnegative strictly pseudo-PD construction.
///
/// Draws `U ∈ R^{k×(k−1)}` with i.i.d. `N(mu, 1)` entries, sets
/// `ε = ½·min_i λ_min((UUᵀ)[i])` and returns `M = UUᵀ − εI` once it verifies:
///
/// 1. `λ_min(M[i]) ≥ ε` for every `i`,
/// 2. every entry of `M` is nonnegative,
/// 3. `λ_min(M) = −ε` (`UUᵀ` has rank `k − 1`).
///
/// Each check allows the backward error of the dense eigensolver,
/// `k·eps·‖UUᵀ‖_F`. Normal variates come from `rand_distr::Normal`
/// (ziggurat) so output is reproducible for a seeded generator.
pub fn random_pseudo_pd<T: Scalar, R: Rng + ?Sized>(
    k: usize,
    mu: f64,
    rng: &mut R,
    max_retries: usize,
) -> Result<RandomPseudoPd<T>> {
    if k < 2 {
        return Err(dims(format!("random construction needs k ≥ 2, got {k}")));
    }
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::InvalidInput(format!("mu must be positive, got {mu}")));
    }
    let normal = Normal::new(mu, 1.0).expect("unit variance");
    let mut last = String::new();
    for attempt in 1..=max_retries.max(1) {
        let u = Matrix::from_fn(k, k - 1, |_, _| T::lit(normal.sample(rng)));
        let g = SymMatrix::new(u.matmul(&u.transpose())?)?;
        let slack = T::of_usize(k) * T::epsilon() * g.frobenius_norm();
        let per_index = leave_one_out_min_eigenvalues(&g);
        let lam = per_index.iter().copied().fold(T::infinity(), T::min);
        let epsilon = lam / T::lit(2.0);
        let m = g.shift(-epsilon);

        let mut problems = Vec::new();
        if !(epsilon > slack) {
            problems.push(format!("epsilon {epsilon} below roundoff level {slack}"));
        }
        let sub = leave_one_out_min_eigenvalues(&m);
        if let Some((i, v)) = sub.iter().enumerate().find(|(_, &v)| !(v >= epsilon - slack)) {
            problems.push(format!("λ_min(M[{i}]) = {v} < ε = {epsilon}"));
        }
        if let Some(v) = m.as_matrix().as_slice().iter().find(|&&v| v < T::zero()) {
            problems.push(format!("negative entry {v}"));
        }
        let full = m.min_eigenvalue();
        if !((full + epsilon).abs() <= slack) || !(full < T::zero()) {
            problems.push(format!("λ_min(M) = {full}, expected −ε = {}", -epsilon));
        }
        if problems.is_empty() {
            return Ok(RandomPseudoPd {
                m,
                epsilon,
                attempts: attempt,
            });
        }
        last = problems.join("; ");
        log::debug!("random_pseudo_pd attempt {attempt} rejected: {last}");
    }
    Err(Error::ConstructionFailed {
        attempts: max_retries.max(1),
        diagnostics: last,
    })
}

/// Padded instance: `A′ = [A 0; 0 0]`, `Y′ = [Y; G]`.
#[derive(Debug, Clone)]
pub struct Padded<T: Scalar> {
    pub a: SymMatrix<T>,
    pub y: Point<T>,
}

/// Embeds an `n`-dimensional instance into dimension `n_prime ≥ n` with zero
/// cost on the new rows. `filler` gives the `(n_prime − n) × p` extra rows
/// (unit norm); `None` uses `e_1` rows.
pub fn pad_instance<T: Scalar>(
    a: &SymMatrix<T>,
    y: &Point<T>,
    n_prime: usize,
    filler: Option<&Matrix<T>>,
) -> Result<Padded<T>> {
    let (n, p) = (a.dim(), y.p());
    if y.n() != n {
        return Err(dims(format!("cost matrix dimension {n} vs point rows {}", y.n())));
    }
    if n_prime < n {
        return Err(dims(format!("cannot pad dimension {n} down to {n_prime}")));
    }
    let extra = n_prime - n;
    let filler = match filler {
        Some(g) => {
            if g.rows() != extra || g.cols() != p {
                return Err(dims(format!(
                    "filler is {}x{}, expected {extra}x{p}",
                    g.rows(),
                    g.cols()
                )));
            }
            if extra > 0 && !check_point(g, T::feas_tol())?.ok {
                return Err(Error::InvalidInput("filler rows must have unit norm".into()));
            }
            g.clone()
        }
        None => Matrix::from_fn(extra, p, |_, j| if j == 0 { T::one() } else { T::zero() }),
    };
    let a_prime = SymMatrix::from_upper(n_prime, |i, j| {
        if i < n && j < n {
            a[(i, j)]
        } else {
            T::zero()
        }
    });
    let mut data = y.as_slice().to_vec();
    data.extend_from_slice(filler.as_slice());
    let y_prime = Point::from_matrix_unchecked(Matrix::from_vec(n_prime, p, data)?);
    Ok(Padded { a: a_prime, y: y_prime })
}

/// How the block `M` of an instance is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum Construction<T: Scalar> {
    AlmostAverage,
    RandomGaussian { mu: f64, seed: u64 },
    Explicit { block: SymMatrix<T> },
}

/// A block-cost instance `A = [M M; M M] + diag(α)` of dimension `n`, to be
/// solved at rank `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSpec<T: Scalar> {
    pub n: usize,
    pub p: usize,
    pub construction: Construction<T>,
    pub alpha: Vec<T>,
    /// Realized block; always present for randomized constructions so the
    /// instance does not depend on the generator when reloaded.
    block: SymMatrix<T>,
}

/// On-disk JSON form of [`InstanceSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub n: usize,
    pub p: usize,
    pub construction: String,
    pub alpha: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
}

impl<T: Scalar> InstanceSpec<T> {
    pub fn almost_average(n: usize) -> Result<Self> {
        check_even(n)?;
        Ok(Self {
            n,
            p: n / 2,
            construction: Construction::AlmostAverage,
            alpha: vec![T::zero(); n],
            block: almost_average(n / 2)?,
        })
    }

    pub fn random<R: Rng + ?Sized>(n: usize, mu: f64, seed: u64, rng: &mut R) -> Result<Self> {
        check_even(n)?;
        let built = random_pseudo_pd(n / 2, mu, rng, DEFAULT_MAX_RETRIES)?;
        Ok(Self {
            n,
            p: n / 2,
            construction: Construction::RandomGaussian { mu, seed },
            alpha: vec![T::zero(); n],
            block: built.m,
        })
    }

    pub fn explicit(block: SymMatrix<T>, alpha: Vec<T>) -> Result<Self> {
        let n = 2 * block.dim();
        if alpha.len() != n {
            return Err(dims(format!("alpha has length {}, expected {n}", alpha.len())));
        }
        Ok(Self {
            n,
            p: n / 2,
            construction: Construction::Explicit { block: block.clone() },
            alpha,
            block,
        })
    }

    pub fn block(&self) -> &SymMatrix<T> {
        &self.block
    }

    pub fn cost_matrix(&self) -> Result<SymMatrix<T>> {
        block_cost(&self.block, &self.alpha)
    }

    pub fn to_file(&self) -> InstanceFile {
        let to_rows = |m: &SymMatrix<T>| {
            m.as_matrix()
                .to_rows()
                .into_iter()
                .map(|r| r.into_iter().map(Scalar::to_f64_lossy).collect())
                .collect()
        };
        let (construction, block, seed, mu) = match &self.construction {
            Construction::AlmostAverage => ("almost-average", None, None, None),
            Construction::RandomGaussian { mu, seed } => {
                ("random", Some(to_rows(&self.block)), Some(*seed), Some(*mu))
            }
            Construction::Explicit { block } => ("explicit", Some(to_rows(block)), None, None),
        };
        InstanceFile {
            n: self.n,
            p: self.p,
            construction: construction.into(),
            alpha: self.alpha.iter().map(|x| x.to_f64_lossy()).collect(),
            block,
            seed,
            mu,
        }
    }

    pub fn from_file(f: &InstanceFile) -> Result<Self> {
        check_even(f.n)?;
        if f.p == 0 || f.p > f.n {
            return Err(dims(format!("rank p = {} invalid for n = {}", f.p, f.n)));
        }
        if f.alpha.len() != f.n {
            return Err(dims(format!("alpha has length {}, expected {}", f.alpha.len(), f.n)));
        }
        let alpha: Vec<T> = f.alpha.iter().map(|&x| T::lit(x)).collect();
        let read_block = || -> Result<SymMatrix<T>> {
            let rows = f
                .block
                .as_ref()
                .ok_or_else(|| Error::InvalidInput(format!("{} instance needs a block", f.construction)))?;
            let rows: Vec<Vec<T>> = rows.iter().map(|r| r.iter().map(|&x| T::lit(x)).collect()).collect();
            let b = SymMatrix::from_rows(&rows)?;
            if b.dim() * 2 != f.n {
                return Err(dims(format!("block is {}x{}, expected half of n = {}", b.dim(), b.dim(), f.n)));
            }
            Ok(b)
        };
        let (construction, block) = match f.construction.as_str() {
            "almost-average" => (Construction::AlmostAverage, almost_average(f.n / 2)?),
            "random" => {
                let b = read_block()?;
                let seed = f.seed.unwrap_or(0);
                let mu = f.mu.unwrap_or_else(|| default_mu(f.n / 2));
                (Construction::RandomGaussian { mu, seed }, b)
            }
            "explicit" => {
                let b = read_block()?;
                (Construction::Explicit { block: b.clone() }, b)
            }
            other => return Err(Error::InvalidInput(format!("unknown construction {other:?}"))),
        };
        Ok(Self {
            n: f.n,
            p: f.p,
            construction,
            alpha,
            block,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_file(&serde_json::from_str(s)?)
    }
}

fn check_even(n: usize) -> Result<()> {
    if n < 4 || n % 2 != 0 {
        return Err(dims(format!("instances need an even n ≥ 4, got {n}")));
    }
    Ok(())
}
