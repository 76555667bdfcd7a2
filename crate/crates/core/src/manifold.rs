//! Geometry of the product of `n` unit spheres in `R^p`: matrices `Y ∈ R^{n×p}`
//! whose rows all have unit Euclidean norm.
//!
//! ```text
//! M_{n,p}  = { Y : ‖Y_i‖ = 1 for every row i }
//! T_Y M    = { U : ⟨Y_i, U_i⟩ = 0 for every row i }
//! Proj_Y Z = Z − diag(⟨Z_i, Y_i⟩) Y
//! R_Y(U)   = rownorm(Y + U)                      (metric projection)
//! ```
//!
//! Every formula is row-wise, so points are stored row-major and immutable
//! behind an `Arc`; cloning a [`Point`] is cheap and tangent vectors carry
//! their base point by value.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{dims, Error, Result};
use crate::linalg::{dot, norm, Matrix};
use crate::scalar::{sinc, Scalar};

/// A feasible point: `n × p` with unit-norm rows.
#[derive(Debug, Clone)]
pub struct Point<T> {
    n: usize,
    p: usize,
    data: Arc<[T]>,
}

impl<T: Scalar> PartialEq for Point<T> {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.p == other.p
            && (Arc::ptr_eq(&self.data, &other.data) || self.data == other.data)
    }
}

/// Outcome of [`check_point`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport<T> {
    pub ok: bool,
    pub worst_row_norm_error: T,
}

/// Checks that every row of `y` has unit norm within `feas_tol`.
pub fn check_point<T: Scalar>(y: &Matrix<T>, feas_tol: T) -> Result<FeasibilityReport<T>> {
    if y.rows() == 0 || y.cols() == 0 {
        return Err(dims(format!("point must be at least 1x1, got {}x{}", y.rows(), y.cols())));
    }
    let worst = (0..y.rows())
        .map(|i| (norm(y.row(i)) - T::one()).abs())
        .fold(T::zero(), |m, x| if x.is_nan() || m.is_nan() { T::nan() } else { m.max(x) });
    Ok(FeasibilityReport {
        ok: worst <= feas_tol,
        worst_row_norm_error: worst,
    })
}

impl<T: Scalar> Point<T> {
    /// Strict constructor: rejects rows off the unit sphere by more than
    /// [`Scalar::feas_tol`].
    pub fn new(y: Matrix<T>) -> Result<Self> {
        Self::with_tol(y, T::feas_tol())
    }

    pub fn with_tol(y: Matrix<T>, feas_tol: T) -> Result<Self> {
        let report = check_point(&y, feas_tol)?;
        if !report.ok {
            return Err(Error::InvalidInput(format!(
                "rows are not unit norm (worst error {})",
                report.worst_row_norm_error
            )));
        }
        Ok(Self::from_matrix_unchecked(y))
    }

    /// Row-normalizes `y`. Fails on zero or non-finite rows.
    pub fn normalized(y: Matrix<T>) -> Result<Self> {
        if y.rows() == 0 || y.cols() == 0 {
            return Err(dims("point must be at least 1x1"));
        }
        let mut y = y;
        for i in 0..y.rows() {
            let row = y.row_mut(i);
            let r = norm(row);
            if !(r > T::zero()) || !r.is_finite() {
                return Err(Error::InvalidInput(format!("row {i} cannot be normalized (norm {r})")));
            }
            row.iter_mut().for_each(|x| *x = *x / r);
        }
        Ok(Self::from_matrix_unchecked(y))
    }

    pub(crate) fn from_matrix_unchecked(y: Matrix<T>) -> Self {
        let (n, p) = (y.rows(), y.cols());
        Self {
            n,
            p,
            data: y.into_vec().into(),
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn to_matrix(&self) -> Matrix<T> {
        Matrix::from_vec(self.n, self.p, self.data.to_vec()).expect("shape")
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Frobenius distance to another point of the same shape.
    pub fn distance(&self, other: &Point<T>) -> T {
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<T>()
            .sqrt()
    }

    /// The zero tangent vector at this point.
    pub fn zero_tangent(&self) -> TangentVector<T> {
        TangentVector {
            base: self.clone(),
            entries: vec![T::zero(); self.n * self.p],
        }
    }
}

/// An element of `T_Y M_{n,p}`: rows orthogonal to the rows of `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector<T: Scalar> {
    base: Point<T>,
    entries: Vec<T>,
}

impl<T: Scalar> TangentVector<T> {
    /// Wraps raw entries, checking row-wise orthogonality within `feas_tol`.
    pub fn new(base: &Point<T>, entries: Matrix<T>) -> Result<Self> {
        if entries.rows() != base.n || entries.cols() != base.p {
            return Err(dims(format!(
                "tangent entries {}x{} at a {}x{} point",
                entries.rows(),
                entries.cols(),
                base.n,
                base.p
            )));
        }
        let tol = T::feas_tol() * entries.max_abs().max(T::one());
        for i in 0..base.n {
            let ip = dot(base.row(i), entries.row(i));
            if !(ip.abs() <= tol) {
                return Err(Error::InvalidInput(format!(
                    "row {i} is not orthogonal to the base point (inner product {ip})"
                )));
            }
        }
        Ok(Self {
            base: base.clone(),
            entries: entries.into_vec(),
        })
    }

    pub(crate) fn from_raw_unchecked(base: &Point<T>, entries: Vec<T>) -> Self {
        debug_assert_eq!(entries.len(), base.n * base.p);
        Self {
            base: base.clone(),
            entries,
        }
    }

    #[inline]
    pub fn base(&self) -> &Point<T> {
        &self.base
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        let p = self.base.p;
        &self.entries[i * p..(i + 1) * p]
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.entries
    }

    pub fn to_matrix(&self) -> Matrix<T> {
        Matrix::from_vec(self.base.n, self.base.p, self.entries.clone()).expect("shape")
    }

    /// Riemannian (Frobenius) inner product.
    pub fn inner(&self, other: &TangentVector<T>) -> T {
        dot(&self.entries, &other.entries)
    }

    pub fn norm(&self) -> T {
        norm(&self.entries)
    }

    pub fn scaled(&self, s: T) -> TangentVector<T> {
        TangentVector {
            base: self.base.clone(),
            entries: self.entries.iter().map(|&x| x * s).collect(),
        }
    }

    /// `self + s·other`.
    pub fn add_scaled(&self, s: T, other: &TangentVector<T>) -> TangentVector<T> {
        let mut out = self.clone();
        out.axpy(s, other);
        out
    }

    /// In-place `self += s·other`.
    pub fn axpy(&mut self, s: T, other: &TangentVector<T>) {
        for (a, &b) in self.entries.iter_mut().zip(&other.entries) {
            *a = *a + s * b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|x| x.is_finite())
    }
}

fn same_base<T: Scalar>(y: &Point<T>, u: &TangentVector<T>) -> Result<()> {
    if u.base != *y {
        return Err(Error::InvalidInput("tangent vector is based at a different point".into()));
    }
    Ok(())
}

/// Orthogonal projection of a raw `n × p` array onto `T_Y M`.
pub fn tangent_project<T: Scalar>(y: &Point<T>, z: &Matrix<T>) -> Result<TangentVector<T>> {
    if z.rows() != y.n || z.cols() != y.p {
        return Err(dims(format!(
            "cannot project a {}x{} array at a {}x{} point",
            z.rows(),
            z.cols(),
            y.n,
            y.p
        )));
    }
    Ok(project_raw(y, z.as_slice().to_vec()))
}

pub(crate) fn project_raw<T: Scalar>(y: &Point<T>, mut z: Vec<T>) -> TangentVector<T> {
    let p = y.p;
    for i in 0..y.n {
        let yi = y.row(i);
        let zi = &mut z[i * p..(i + 1) * p];
        let mu = dot(zi, yi);
        for (a, &b) in zi.iter_mut().zip(yi) {
            *a = *a - mu * b;
        }
    }
    TangentVector::from_raw_unchecked(y, z)
}

/// Metric projection retraction: `rownorm(Y + U)`.
pub fn retract<T: Scalar>(y: &Point<T>, u: &TangentVector<T>) -> Result<Point<T>> {
    same_base(y, u)?;
    Ok(retract_unchecked(y, u))
}

pub(crate) fn retract_unchecked<T: Scalar>(y: &Point<T>, u: &TangentVector<T>) -> Point<T> {
    let p = y.p;
    let mut out: Vec<T> = y.data.iter().zip(&u.entries).map(|(&a, &b)| a + b).collect();
    for row in out.chunks_mut(p) {
        // ‖Y_i + U_i‖² = 1 + ‖U_i‖² ≥ 1 for tangent U.
        let r = norm(row);
        row.iter_mut().for_each(|x| *x = *x / r);
    }
    Point {
        n: y.n,
        p,
        data: out.into(),
    }
}

/// Row-wise great-circle geodesic
/// `γ_i(t) = cos(t‖U_i‖) Y_i + sin(t‖U_i‖)/‖U_i‖ · U_i`.
pub fn sphere_geodesic<T: Scalar>(y: &Point<T>, u: &TangentVector<T>, t: T) -> Result<Point<T>> {
    same_base(y, u)?;
    let p = y.p;
    let mut out = Vec::with_capacity(y.n * p);
    for i in 0..y.n {
        let (yi, ui) = (y.row(i), u.row(i));
        let theta = norm(ui) * t;
        let c = theta.cos();
        let s = sinc(theta) * t;
        out.extend(yi.iter().zip(ui).map(|(&a, &b)| c * a + s * b));
    }
    Ok(Point {
        n: y.n,
        p,
        data: out.into(),
    })
}

/// `Φ([G1; G2]) = ‖G1 + G2‖²`, zero exactly on antipodal configurations.
pub fn potential_phi<T: Scalar>(y: &Matrix<T>) -> Result<T> {
    phi_slice(y.rows(), y.cols(), y.as_slice())
}

/// [`potential_phi`] on a point.
pub fn potential_phi_point<T: Scalar>(y: &Point<T>) -> Result<T> {
    phi_slice(y.n, y.p, &y.data)
}

fn phi_slice<T: Scalar>(n: usize, p: usize, data: &[T]) -> Result<T> {
    if n % 2 != 0 {
        return Err(dims(format!("potential needs an even number of rows, got {n}")));
    }
    let half = n / 2 * p;
    Ok(data[..half]
        .iter()
        .zip(&data[half..])
        .map(|(&a, &b)| (a + b) * (a + b))
        .sum())
}

/// True iff `Φ(Y) ≤ tol`, i.e. `Y = [G; −G]` up to `tol`.
pub fn is_antipodal<T: Scalar>(y: &Point<T>, tol: T) -> Result<bool> {
    Ok(potential_phi_point(y)? <= tol)
}

/// Standard-normal ambient sample projected onto `T_Y M`.
pub fn random_tangent<T: Scalar, R: Rng + ?Sized>(y: &Point<T>, rng: &mut R) -> TangentVector<T> {
    let z: Vec<T> = (0..y.n * y.p)
        .map(|_| T::lit(rng.sample::<f64, _>(StandardNormal)))
        .collect();
    project_raw(y, z)
}

/// Row-normalization of a raw array (the `rownorm` map).
pub fn rownorm<T: Scalar>(z: &Matrix<T>) -> Result<Point<T>> {
    Point::normalized(z.clone())
}
