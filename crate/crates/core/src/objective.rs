//! The factorized objective `f(Y) = ⟨A, YYᵀ⟩` and its exact Riemannian
//! derivatives on the product of spheres.
//!
//! With `ν_i = Σ_j A_ij ⟨Y_i, Y_j⟩ = ⟨(AY)_i, Y_i⟩`:
//!
//! ```text
//! grad f(Y)     = 2 (A − diag ν) Y          = Proj_Y(2AY)
//! Hess f(Y)[U]  = 2 Proj_Y((A − diag ν) U)
//! ⟨Hess[U], U⟩  = 2 ⟨A − diag ν, UUᵀ⟩
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{dims, Error, Result};
use crate::linalg::{dot, SymMatrix};
use crate::manifold::{project_raw, Point, TangentVector};
use crate::scalar::Scalar;

/// Default cap on the tangent-space dimension `n(p−1)` for dense Hessian
/// spectra.
pub const DEFAULT_SPECTRUM_LIMIT: usize = 2000;

/// Lagrange multiplier vector `ν` of the row-norm constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multiplier<T> {
    pub nu: Vec<T>,
}

fn check_dims<T: Scalar>(a: &SymMatrix<T>, y: &Point<T>) -> Result<()> {
    if a.dim() != y.n() {
        return Err(dims(format!(
            "cost matrix is {}x{} but the point has {} rows",
            a.dim(),
            a.dim(),
            y.n()
        )));
    }
    Ok(())
}

fn check_tangent<T: Scalar>(y: &Point<T>, u: &TangentVector<T>) -> Result<()> {
    if u.base() != y {
        return Err(Error::InvalidInput("tangent vector is based at a different point".into()));
    }
    Ok(())
}

/// `A · X` for a row-major `n × p` slice.
pub(crate) fn sym_times<T: Scalar>(a: &SymMatrix<T>, x: &[T], p: usize) -> Vec<T> {
    let n = a.dim();
    let mut out = vec![T::zero(); n * p];
    for i in 0..n {
        let out_row = &mut out[i * p..(i + 1) * p];
        for (j, &aij) in a.row(i).iter().enumerate() {
            if aij == T::zero() {
                continue;
            }
            for (o, &xj) in out_row.iter_mut().zip(&x[j * p..(j + 1) * p]) {
                *o = *o + aij * xj;
            }
        }
    }
    out
}

/// Cached first-order quantities at a point: `AY`, `ν`, `f(Y)`.
///
/// Solvers evaluate the gradient and many Hessian-vector products at the same
/// point; this avoids recomputing `AY`.
#[derive(Debug, Clone)]
pub struct Evaluation<'a, T: Scalar> {
    a: &'a SymMatrix<T>,
    y: Point<T>,
    ay: Vec<T>,
    nu: Vec<T>,
    value: T,
}

impl<'a, T: Scalar> Evaluation<'a, T> {
    pub fn new(a: &'a SymMatrix<T>, y: &Point<T>) -> Result<Self> {
        check_dims(a, y)?;
        let p = y.p();
        let ay = sym_times(a, y.as_slice(), p);
        let nu: Vec<T> = (0..y.n())
            .map(|i| dot(&ay[i * p..(i + 1) * p], y.row(i)))
            .collect();
        let value = nu.iter().copied().sum();
        Ok(Self {
            a,
            y: y.clone(),
            ay,
            nu,
            value,
        })
    }

    pub fn point(&self) -> &Point<T> {
        &self.y
    }

    pub fn value(&self) -> T {
        self.value
    }

    pub fn nu(&self) -> &[T] {
        &self.nu
    }

    /// `2(A − diag ν)Y`.
    pub fn gradient(&self) -> TangentVector<T> {
        let p = self.y.p();
        let two = T::lit(2.0);
        let mut g = Vec::with_capacity(self.ay.len());
        for i in 0..self.y.n() {
            let nu = self.nu[i];
            g.extend(
                self.ay[i * p..(i + 1) * p]
                    .iter()
                    .zip(self.y.row(i))
                    .map(|(&ay, &y)| two * (ay - nu * y)),
            );
        }
        TangentVector::from_raw_unchecked(&self.y, g)
    }

    /// `2 Proj_Y((A − diag ν) U)` for `U` based at this point.
    pub fn hessian_apply(&self, u: &TangentVector<T>) -> TangentVector<T> {
        let p = self.y.p();
        let two = T::lit(2.0);
        let mut w = sym_times(self.a, u.as_slice(), p);
        for i in 0..self.y.n() {
            let nu = self.nu[i];
            for (wi, &ui) in w[i * p..(i + 1) * p].iter_mut().zip(u.row(i)) {
                *wi = two * (*wi - nu * ui);
            }
        }
        project_raw(&self.y, w)
    }

    /// `2⟨A − diag ν, UUᵀ⟩`.
    pub fn hessian_quadratic(&self, u: &TangentVector<T>) -> T {
        let p = self.y.p();
        let au = sym_times(self.a, u.as_slice(), p);
        let mut q = dot(&au, u.as_slice());
        for i in 0..self.y.n() {
            let r = u.row(i);
            q = q - self.nu[i] * dot(r, r);
        }
        T::lit(2.0) * q
    }
}

/// `⟨A, YYᵀ⟩ = ⟨AY, Y⟩`.
pub fn objective_value<T: Scalar>(a: &SymMatrix<T>, y: &Point<T>) -> Result<T> {
    Ok(Evaluation::new(a, y)?.value())
}

pub fn multiplier_nu<T: Scalar>(a: &SymMatrix<T>, y: &Point<T>) -> Result<Multiplier<T>> {
    Ok(Multiplier {
        nu: Evaluation::new(a, y)?.nu,
    })
}

pub fn riemannian_gradient<T: Scalar>(a: &SymMatrix<T>, y: &Point<T>) -> Result<TangentVector<T>> {
    Ok(Evaluation::new(a, y)?.gradient())
}

pub fn hessian_apply<T: Scalar>(
    a: &SymMatrix<T>,
    y: &Point<T>,
    u: &TangentVector<T>,
) -> Result<TangentVector<T>> {
    check_tangent(y, u)?;
    Ok(Evaluation::new(a, y)?.hessian_apply(u))
}

pub fn hessian_quadratic<T: Scalar>(a: &SymMatrix<T>, y: &Point<T>, u: &TangentVector<T>) -> Result<T> {
    check_tangent(y, u)?;
    Ok(Evaluation::new(a, y)?.hessian_quadratic(u))
}

/// Orthonormal basis of `T_Y M`, one block of `p − 1` vectors per row.
///
/// For each row `y`, the Householder reflector `H = I − 2vvᵀ/vᵀv` with
/// `v = y + sign(y_0) e_0` maps `e_0` to `∓y`; its remaining columns are an
/// orthonormal basis of `y^⊥`. Row `i`'s basis vectors are entries
/// `i·(p−1) .. (i+1)·(p−1)` of the returned list, each stored as a length-`p`
/// direction for that row.
pub fn tangent_basis<T: Scalar>(y: &Point<T>) -> Vec<Vec<T>> {
    let p = y.p();
    let mut out = Vec::with_capacity(y.n() * p.saturating_sub(1));
    for i in 0..y.n() {
        let yi = y.row(i);
        let s = if yi[0] >= T::zero() { T::one() } else { -T::one() };
        let mut v = yi.to_vec();
        v[0] = v[0] + s;
        let vtv = dot(&v, &v);
        for c in 1..p {
            let coef = T::lit(2.0) * v[c] / vtv;
            let mut col: Vec<T> = v.iter().map(|&vk| -coef * vk).collect();
            col[c] = col[c] + T::one();
            out.push(col);
        }
    }
    out
}

/// Dense spectrum of the Riemannian Hessian on `T_Y M`.
#[derive(Debug, Clone)]
pub struct HessianSpectrum<T: Scalar> {
    /// Ascending, length `n(p−1)`.
    pub eigenvalues: Vec<T>,
    /// Unit tangent vector attaining the smallest eigenvalue; `None` when the
    /// tangent space is trivial.
    pub min_vector: Option<TangentVector<T>>,
}

impl<T: Scalar> HessianSpectrum<T> {
    pub fn min(&self) -> Option<T> {
        self.eigenvalues.first().copied()
    }
}

/// The Hessian as a dense symmetric matrix in the basis of [`tangent_basis`].
pub fn hessian_matrix<T: Scalar>(a: &SymMatrix<T>, y: &Point<T>, limit: usize) -> Result<SymMatrix<T>> {
    let eval = Evaluation::new(a, y)?;
    let (n, p) = (y.n(), y.p());
    let d = n * p.saturating_sub(1);
    if d > limit {
        return Err(Error::TooLarge {
            dim: d,
            limit,
            hint: "use the sampling-based probe instead",
        });
    }
    if d == 0 {
        return Err(dims("tangent space is trivial (p = 1)"));
    }
    let basis = tangent_basis(y);
    let q = p - 1;
    let embed = |k: usize| {
        let row = k / q;
        let mut e = vec![T::zero(); n * p];
        e[row * p..(row + 1) * p].copy_from_slice(&basis[k]);
        TangentVector::from_raw_unchecked(y, e)
    };
    let columns: Vec<Vec<T>> = (0..d)
        .into_par_iter()
        .map(|k| {
            let h = eval.hessian_apply(&embed(k));
            (0..d)
                .map(|l| {
                    let row = l / q;
                    dot(&h.as_slice()[row * p..(row + 1) * p], &basis[l])
                })
                .collect()
        })
        .collect();
    Ok(SymMatrix::from_upper(d, |i, j| {
        (columns[j][i] + columns[i][j]) / T::lit(2.0)
    }))
}

/// Full spectrum of the tangent-space Hessian, with the default size guard.
pub fn hessian_spectrum<T: Scalar>(a: &SymMatrix<T>, y: &Point<T>) -> Result<HessianSpectrum<T>> {
    hessian_spectrum_with_limit(a, y, DEFAULT_SPECTRUM_LIMIT)
}

pub fn hessian_spectrum_with_limit<T: Scalar>(
    a: &SymMatrix<T>,
    y: &Point<T>,
    limit: usize,
) -> Result<HessianSpectrum<T>> {
    check_dims(a, y)?;
    let (n, p) = (y.n(), y.p());
    if p <= 1 {
        return Ok(HessianSpectrum {
            eigenvalues: Vec::new(),
            min_vector: None,
        });
    }
    let h = hessian_matrix(a, y, limit)?;
    let eig = h.eigen();
    let basis = tangent_basis(y);
    let q = p - 1;
    let coeffs = eig.vector(0);
    let mut u = vec![T::zero(); n * p];
    for (k, &c) in coeffs.iter().enumerate() {
        let row = k / q;
        for (dst, &b) in u[row * p..(row + 1) * p].iter_mut().zip(&basis[k]) {
            *dst = *dst + c * b;
        }
    }
    Ok(HessianSpectrum {
        eigenvalues: eig.values,
        min_vector: Some(TangentVector::from_raw_unchecked(y, u)),
    })
}
