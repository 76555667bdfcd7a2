//! Machine-checkable verdicts on cost matrices and candidate points.
//!
//! Every PSD-type decision compares against `tol·max(1, ‖·‖_F)` of the matrix
//! in question. The constructions here are exactly rank-deficient, so an
//! absolute threshold would misfire as the dimension grows.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{dims, Error, Result};
use crate::instances::{almost_average, axial, block_cost, block_form};
use crate::linalg::{leave_one_out_min_eigenvalues, Matrix, SymMatrix};
use crate::manifold::{random_tangent, Point, TangentVector};
use crate::objective::{
    hessian_spectrum_with_limit, Evaluation, Multiplier, DEFAULT_SPECTRUM_LIMIT,
};
use crate::scalar::{scale_of, Scalar};

/// Leave-one-out sizes above this are logged as slow (O(k⁴) total work).
pub const PSEUDO_REPORT_WARN_DIM: usize = 500;

/// Pseudo-PD / pseudo-PSD status of a symmetric matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoReport<T> {
    /// `λ_min(M[i])` for each `i`.
    pub per_index_min_eigs: Vec<T>,
    /// `λ_min(M)`.
    pub full_min_eig: T,
    pub pseudo_psd: bool,
    pub pseudo_pd: bool,
    pub strictly_pseudo_pd: bool,
    pub strictly_pseudo_psd: bool,
}

pub fn pseudo_report<T: Scalar>(m: &SymMatrix<T>, tol: T) -> Result<PseudoReport<T>> {
    let k = m.dim();
    if k < 2 {
        return Err(dims(format!("pseudo-PD status needs dimension ≥ 2, got {k}")));
    }
    if k > PSEUDO_REPORT_WARN_DIM {
        log::warn!("pseudo_report on a {k}x{k} matrix runs {k} dense eigendecompositions");
    }
    let thr = tol * scale_of(m.frobenius_norm());
    let per_index_min_eigs = leave_one_out_min_eigenvalues(m);
    let full_min_eig = m.min_eigenvalue();
    let pseudo_pd = per_index_min_eigs.iter().all(|&x| x > thr);
    let pseudo_psd = per_index_min_eigs.iter().all(|&x| x >= -thr);
    let not_psd = full_min_eig < -thr;
    Ok(PseudoReport {
        per_index_min_eigs,
        full_min_eig,
        pseudo_psd,
        pseudo_pd,
        strictly_pseudo_pd: pseudo_pd && not_psd,
        strictly_pseudo_psd: pseudo_psd && not_psd,
    })
}

/// Number of eigenvalues below `−tol·max(1, ‖M‖_F)`, with multiplicity.
pub fn negative_eigen_count<T: Scalar>(m: &SymMatrix<T>, tol: T) -> usize {
    let thr = tol * scale_of(m.frobenius_norm());
    m.eigenvalues().iter().filter(|&&x| x < -thr).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstOrderCheck<T> {
    pub ok: bool,
    pub grad_norm: T,
    pub nu: Multiplier<T>,
}

/// `ok` iff `‖grad f(Y)‖ ≤ tol·max(1, ‖A‖_F)`.
pub fn first_order_check<T: Scalar>(a: &SymMatrix<T>, y: &Point<T>, tol: T) -> Result<FirstOrderCheck<T>> {
    let eval = Evaluation::new(a, y)?;
    let grad_norm = eval.gradient().norm();
    Ok(FirstOrderCheck {
        ok: grad_norm <= tol * scale_of(a.frobenius_norm()),
        grad_norm,
        nu: Multiplier { nu: eval.nu().to_vec() },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderCheck<T> {
    /// False when `Y` is not first-order critical; `ok` is then false too.
    pub applicable: bool,
    pub ok: bool,
    /// Smallest eigenvalue of the tangent-space Hessian (zero when `p = 1`).
    pub hess_min_eig: T,
}

/// `ok` iff `Y` is first-order critical and the tangent-space Hessian has
/// `λ_min ≥ −tol·max(1, ‖A‖_F)`. Refuses with [`Error::TooLarge`] above the
/// default spectrum size limit.
pub fn second_order_check<T: Scalar>(a: &SymMatrix<T>, y: &Point<T>, tol: T) -> Result<SecondOrderCheck<T>> {
    second_order_check_with_limit(a, y, tol, DEFAULT_SPECTRUM_LIMIT)
}

pub fn second_order_check_with_limit<T: Scalar>(
    a: &SymMatrix<T>,
    y: &Point<T>,
    tol: T,
    limit: usize,
) -> Result<SecondOrderCheck<T>> {
    let first = first_order_check(a, y, tol)?;
    let spectrum = hessian_spectrum_with_limit(a, y, limit)?;
    let hess_min_eig = spectrum.min().unwrap_or_else(T::zero);
    let ok = first.ok && hess_min_eig >= -tol * scale_of(a.frobenius_norm());
    Ok(SecondOrderCheck {
        applicable: first.ok,
        ok,
        hess_min_eig,
    })
}

/// Sampling-based estimate of the smallest Hessian eigenvalue for problems
/// beyond the dense size guard.
///
/// Runs power iteration on `σI − Hess` from random tangent starts. The
/// estimate is a Rayleigh quotient and therefore an upper bound on the true
/// minimum: it can expose negative curvature but never certifies its absence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianProbe<T> {
    pub estimate: T,
    pub probes: usize,
    pub iterations: usize,
    /// Always false.
    pub certifying: bool,
}

pub fn hessian_min_probe<T: Scalar, R: Rng + ?Sized>(
    a: &SymMatrix<T>,
    y: &Point<T>,
    probes: usize,
    iterations: usize,
    rng: &mut R,
) -> Result<HessianProbe<T>> {
    let eval = Evaluation::new(a, y)?;
    let nu_max = eval.nu().iter().fold(T::zero(), |m, &x| m.max(x.abs()));
    let sigma = T::lit(2.0) * (a.frobenius_norm() + nu_max);
    let mut best = T::infinity();
    for _ in 0..probes.max(1) {
        let mut u = random_tangent(y, rng);
        let r = u.norm();
        if !(r > T::zero()) {
            continue;
        }
        u = u.scaled(T::one() / r);
        for _ in 0..iterations {
            let hu = eval.hessian_apply(&u);
            best = best.min(hu.inner(&u));
            let next = u.scaled(sigma).add_scaled(-T::one(), &hu);
            let r = next.norm();
            if !(r > T::zero()) {
                break;
            }
            u = next.scaled(T::one() / r);
        }
        best = best.min(eval.hessian_quadratic(&u));
    }
    Ok(HessianProbe {
        estimate: best,
        probes: probes.max(1),
        iterations,
        certifying: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalOptimalityCheck<T> {
    /// `λ_min(A − diag ν) ≥ −tol·max(1, ‖A‖_F)`.
    pub ok: bool,
    pub slack_min_eig: T,
    /// Whether the point was first-order critical; the verdict is only
    /// meaningful when it is.
    pub first_order: bool,
}

pub fn global_optimality_check<T: Scalar>(
    a: &SymMatrix<T>,
    y: &Point<T>,
    tol: T,
) -> Result<GlobalOptimalityCheck<T>> {
    let first = first_order_check(a, y, tol)?;
    let slack = slack_matrix(a, &first.nu.nu)?;
    let slack_min_eig = slack.min_eigenvalue();
    Ok(GlobalOptimalityCheck {
        ok: slack_min_eig >= -tol * scale_of(a.frobenius_norm()),
        slack_min_eig,
        first_order: first.ok,
    })
}

/// `A − diag(ν)`.
pub fn slack_matrix<T: Scalar>(a: &SymMatrix<T>, nu: &[T]) -> Result<SymMatrix<T>> {
    let neg: Vec<T> = nu.iter().map(|&x| -x).collect();
    a.add_diagonal(&neg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegeneracyCheck {
    pub hess_rank: usize,
    /// `p(n − p)`, the rank of `I_p ⊗ S` bound.
    pub rank_bound: usize,
    /// `np − n − p(p−1)/2`; ranks strictly below it are degenerate.
    pub threshold: i64,
    pub degenerate: bool,
}

/// Rank of the tangent-space Hessian against the non-degeneracy threshold.
/// Intended for spurious second-order critical points (caller-asserted).
pub fn degeneracy_check<T: Scalar>(a: &SymMatrix<T>, y: &Point<T>, tol: T) -> Result<DegeneracyCheck> {
    degeneracy_check_with_limit(a, y, tol, DEFAULT_SPECTRUM_LIMIT)
}

pub fn degeneracy_check_with_limit<T: Scalar>(
    a: &SymMatrix<T>,
    y: &Point<T>,
    tol: T,
    limit: usize,
) -> Result<DegeneracyCheck> {
    let (n, p) = (y.n(), y.p());
    let spectrum = hessian_spectrum_with_limit(a, y, limit)?;
    let thr = tol * scale_of(a.frobenius_norm());
    let hess_rank = spectrum.eigenvalues.iter().filter(|x| x.abs() > thr).count();
    let (ni, pi) = (n as i64, p as i64);
    let threshold = ni * pi - ni - pi * (pi - 1) / 2;
    Ok(DegeneracyCheck {
        hess_rank,
        rank_bound: p * n.saturating_sub(p),
        threshold,
        degenerate: (hess_rank as i64) < threshold,
    })
}

/// The canonical basis of `W = { [G; −G] : G symmetric, G_ii = 0 }` at
/// `axial(n)`: one vector per pair `i < j` with `G = E_ij + E_ji`.
pub fn kernel_subspace_basis<T: Scalar>(n: usize) -> Result<Vec<TangentVector<T>>> {
    let y = axial::<T>(n)?;
    let k = n / 2;
    let mut basis = Vec::with_capacity(k * k.saturating_sub(1) / 2);
    for i in 0..k {
        for j in (i + 1)..k {
            let mut u = Matrix::zeros(n, k);
            u[(i, j)] = T::one();
            u[(j, i)] = T::one();
            u[(i + k, j)] = -T::one();
            u[(j + k, i)] = -T::one();
            basis.push(TangentVector::new(&y, u)?);
        }
    }
    Ok(basis)
}

#[derive(Debug, Clone)]
pub struct KernelSubspaceCheck<T: Scalar> {
    pub basis: Vec<TangentVector<T>>,
    /// `max_U |⟨Hess f(axial)[U], U⟩|` over the basis.
    pub max_abs_quadratic: T,
}

/// Builds `W` and evaluates the Hessian quadratic form on each basis vector.
/// `A` must be a block cost `[B B; B B] + diag(α)` within `1e-9` relative.
pub fn kernel_subspace_check<T: Scalar>(a: &SymMatrix<T>, n: usize) -> Result<KernelSubspaceCheck<T>> {
    if a.dim() != n {
        return Err(dims(format!("cost matrix dimension {} vs n = {n}", a.dim())));
    }
    if block_form(a, T::verdict_tol()).is_none() {
        return Err(Error::InvalidInput("cost matrix is not of the form [B B; B B] + diag(α)".into()));
    }
    let y = axial::<T>(n)?;
    let eval = Evaluation::new(a, &y)?;
    let basis = kernel_subspace_basis::<T>(n)?;
    let max_abs_quadratic = basis
        .iter()
        .map(|u| eval.hessian_quadratic(u).abs())
        .fold(T::zero(), T::max);
    Ok(KernelSubspaceCheck {
        basis,
        max_abs_quadratic,
    })
}

/// Dual certificate that `J = 11ᵀ` is the unique optimum of the
/// almost-average block instance of dimension `n = 2p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktCertificate<T> {
    /// Uniform multiplier `b = 2(1 − (p−1)/(p−1.5))`.
    pub b: T,
    /// `λ_min(A − bI)`.
    pub slack_min_eig: T,
    /// `‖(A − bI) J‖_F`.
    pub sj_norm: T,
    pub rank: usize,
    pub ok: bool,
    /// `rank(S) = n − 1`.
    pub strict_complementarity: bool,
}

pub fn kkt_certificate_almost_average<T: Scalar>(p: usize, tol: T) -> Result<KktCertificate<T>> {
    let n = 2 * p;
    let a = block_cost(&almost_average::<T>(p)?, &vec![T::zero(); n])?;
    let pf = T::of_usize(p);
    let b = T::lit(2.0) * (T::one() - (pf - T::one()) / (pf - T::lit(1.5)));
    let s = a.shift(-b);
    let thr = tol * scale_of(s.frobenius_norm());
    let row_sums = s.mul_vec(&vec![T::one(); n]);
    let sj_norm = T::of_usize(n).sqrt() * row_sums.iter().map(|&x| x * x).sum::<T>().sqrt();
    let eigs = s.eigenvalues();
    let slack_min_eig = eigs[0];
    let rank = eigs.iter().filter(|x| x.abs() > thr).count();
    Ok(KktCertificate {
        b,
        slack_min_eig,
        sj_norm,
        rank,
        ok: sj_norm <= thr && slack_min_eig >= -thr,
        strict_complementarity: rank == n - 1,
    })
}

/// Combined first-order, second-order and global-optimality verdicts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalityReport<T> {
    pub grad_norm: T,
    pub nu: Multiplier<T>,
    pub first_order: bool,
    /// Absent when the dense spectrum exceeds the size guard.
    pub hess_min_eig: Option<T>,
    /// Absent when the dense spectrum exceeds the size guard.
    pub second_order: Option<bool>,
    pub slack_min_eig: T,
    pub globally_optimal: bool,
    /// `first_order ∧ ¬globally_optimal`.
    pub spurious: bool,
}

pub fn criticality_report<T: Scalar>(a: &SymMatrix<T>, y: &Point<T>, tol: T) -> Result<CriticalityReport<T>> {
    let first = first_order_check(a, y, tol)?;
    let global = global_optimality_check(a, y, tol)?;
    let (hess_min_eig, second_order) = match second_order_check(a, y, tol) {
        Ok(s) => (Some(s.hess_min_eig), Some(s.ok)),
        Err(Error::TooLarge { dim, limit, .. }) => {
            log::warn!("skipping Hessian spectrum: tangent dimension {dim} exceeds {limit}");
            (None, None)
        }
        Err(e) => return Err(e),
    };
    let globally_optimal = first.ok && global.ok;
    Ok(CriticalityReport {
        grad_norm: first.grad_norm,
        nu: first.nu,
        first_order: first.ok,
        hess_min_eig,
        second_order,
        slack_min_eig: global.slack_min_eig,
        globally_optimal,
        spurious: first.ok && !globally_optimal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::random_pseudo_pd;
    use crate::manifold::{is_antipodal, sphere_geodesic};
    use crate::objective::objective_value;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    const TOL: f64 = 1e-9;

    fn aa_cost(p: usize) -> SymMatrix<f64> {
        block_cost(&almost_average(p).unwrap(), &vec![0.0; 2 * p]).unwrap()
    }

    #[test]
    fn pseudo_report_examples() {
        let r = pseudo_report(&almost_average::<f64>(2).unwrap(), TOL).unwrap();
        assert!(r.pseudo_pd && r.strictly_pseudo_pd && r.strictly_pseudo_psd);
        assert_eq!(r.per_index_min_eigs, vec![1.0, 1.0]);
        assert!((r.full_min_eig + 1.0).abs() < 1e-14);

        let r = pseudo_report(&SymMatrix::<f64>::identity(4), TOL).unwrap();
        assert!(r.pseudo_pd && !r.strictly_pseudo_pd);

        let r = pseudo_report(&SymMatrix::<f64>::identity(3).shift(-2.0), TOL).unwrap();
        assert!(!r.pseudo_psd && !r.pseudo_pd);

        assert!(pseudo_report(&SymMatrix::<f64>::identity(1), TOL).is_err());
    }

    #[test]
    fn negative_eigen_count_examples() {
        for k in [2, 3, 10] {
            assert_eq!(negative_eigen_count(&almost_average::<f64>(k).unwrap(), TOL), 1);
        }
        assert_eq!(negative_eigen_count(&SymMatrix::<f64>::identity(5), TOL), 0);
        let r = random_pseudo_pd::<f64, _>(7, 2.0, &mut ChaCha8Rng::seed_from_u64(1), 16).unwrap();
        assert_eq!(negative_eigen_count(&r.m, TOL), 1);
    }

    #[test]
    fn first_order_examples() {
        let a = aa_cost(2);
        let r = first_order_check(&a, &axial(4).unwrap(), TOL).unwrap();
        assert!(r.ok && r.grad_norm <= 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y = Point::normalized(Matrix::from_fn(5, 2, |_, _| rng.sample(StandardNormal))).unwrap();
        assert!(first_order_check(&SymMatrix::zeros(5), &y, TOL).unwrap().ok);

        let delta = Matrix::from_fn(4, 2, |_, _| 0.3 * rng.sample::<f64, _>(StandardNormal));
        let ax = axial::<f64>(4).unwrap().to_matrix();
        let z = Matrix::from_fn(4, 2, |i, j| ax[(i, j)] + delta[(i, j)]);
        let y = Point::normalized(z).unwrap();
        assert!(!first_order_check(&a, &y, TOL).unwrap().ok);
        assert!(first_order_check(&SymMatrix::identity(3), &y, TOL).is_err());
    }

    #[test]
    fn second_order_examples() {
        let r = second_order_check(&aa_cost(2), &axial(4).unwrap(), TOL).unwrap();
        assert!(r.applicable && r.ok);

        let b = SymMatrix::<f64>::identity(2).shift(-2.0);
        let a = block_cost(&b, &[0.0; 4]).unwrap();
        let r = second_order_check(&a, &axial(4).unwrap(), TOL).unwrap();
        assert!(r.applicable && !r.ok);

        let r = second_order_check(&SymMatrix::zeros(4), &axial(4).unwrap(), TOL).unwrap();
        assert!(r.ok && r.hess_min_eig == 0.0);

        let err = second_order_check_with_limit(&aa_cost(3), &axial(6).unwrap(), TOL, 4).unwrap_err();
        assert!(matches!(err, Error::TooLarge { .. }));
    }

    #[test]
    fn second_order_not_applicable_off_critical() {
        let a = aa_cost(2);
        let y = Point::normalized(Matrix::from_rows(&[vec![1.0, 0.2], vec![0.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]]).unwrap()).unwrap();
        let r = second_order_check(&a, &y, TOL).unwrap();
        assert!(!r.applicable && !r.ok);
    }

    #[test]
    fn global_optimality_examples() {
        let a = aa_cost(2);
        let r = global_optimality_check(&a, &axial(4).unwrap(), TOL).unwrap();
        assert!(!r.ok && r.first_order);
        assert!((r.slack_min_eig + 2.0).abs() < 1e-12);

        let ones = Point::new(Matrix::from_fn(4, 2, |_, j| if j == 0 { 1.0 } else { 0.0 })).unwrap();
        let r = global_optimality_check(&a, &ones, TOL).unwrap();
        assert!(r.first_order && r.ok);

        let r = global_optimality_check(&SymMatrix::identity(4), &axial(4).unwrap(), TOL).unwrap();
        assert!(r.ok && r.slack_min_eig.abs() < 1e-15);
    }

    #[test]
    fn degeneracy_examples() {
        let r = degeneracy_check(&aa_cost(2), &axial(4).unwrap(), TOL).unwrap();
        assert_eq!(r.rank_bound, 4);
        assert_eq!(r.threshold, 3);
        assert!(r.hess_rank <= 4 && r.degenerate);

        let r = degeneracy_check(&SymMatrix::zeros(4), &axial(4).unwrap(), TOL).unwrap();
        assert_eq!(r.hess_rank, 0);

        let r = degeneracy_check(&aa_cost(3), &axial(6).unwrap(), TOL).unwrap();
        assert_eq!(r.threshold, 9);
        assert!(r.degenerate);
    }

    #[test]
    fn kernel_subspace_examples() {
        let basis = kernel_subspace_basis::<f64>(4).unwrap();
        assert_eq!(basis.len(), 1);
        assert_eq!(
            basis[0].to_matrix().to_rows(),
            vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.0, -1.0], vec![-1.0, 0.0]]
        );
        assert_eq!(kernel_subspace_basis::<f64>(10).unwrap().len(), 10);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = SymMatrix::from_upper(4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let alpha: Vec<f64> = (0..8).map(|_| rng.sample(StandardNormal)).collect();
        let a = block_cost(&m, &alpha).unwrap();
        let r = kernel_subspace_check(&a, 8).unwrap();
        assert!(r.max_abs_quadratic <= 1e-9 * a.frobenius_norm().max(1.0));

        let y = axial::<f64>(8).unwrap();
        let f0 = objective_value(&a, &y).unwrap();
        for u in &r.basis {
            for step in 0..=10 {
                let t = 0.05 * step as f64;
                let q = sphere_geodesic(&y, u, t).unwrap();
                assert!(is_antipodal(&q, 1e-20).unwrap());
                assert!((objective_value(&a, &q).unwrap() - f0).abs() <= 1e-9);
            }
        }

        let not_block = SymMatrix::from_upper(4, |i, j| (i + 2 * j) as f64);
        assert!(matches!(kernel_subspace_check(&not_block, 4), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn kkt_examples() {
        let c = kkt_certificate_almost_average::<f64>(2, TOL).unwrap();
        assert_eq!(c.b, -2.0);
        assert!(c.ok && c.strict_complementarity);
        assert_eq!(c.rank, 3);
        for p in [2, 3, 10] {
            let c = kkt_certificate_almost_average::<f64>(p, TOL).unwrap();
            assert!(c.sj_norm <= 1e-10, "p = {p}: {}", c.sj_norm);
        }
    }

    #[test]
    fn criticality_report_at_axial() {
        let r = criticality_report(&aa_cost(3), &axial(6).unwrap(), TOL).unwrap();
        assert!(r.first_order && r.second_order == Some(true) && r.spurious && !r.globally_optimal);
        let json = serde_json::to_value(&r).unwrap();
        for key in ["grad_norm", "nu", "first_order", "hess_min_eig", "second_order", "slack_min_eig", "globally_optimal", "spurious"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn probe_bounds_true_minimum_from_above() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = SymMatrix::from_upper(6, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = Point::normalized(Matrix::from_fn(6, 3, |_, _| rng.sample(StandardNormal))).unwrap();
        let exact = crate::objective::hessian_spectrum(&a, &y).unwrap().min().unwrap();
        let probe = hessian_min_probe(&a, &y, 4, 400, &mut rng).unwrap();
        assert!(!probe.certifying);
        assert!(probe.estimate >= exact - 1e-9);
        assert!(probe.estimate - exact < 1e-3 * exact.abs().max(1.0));
    }
}
