#![allow(dead_code)]

use bmlandscape::manifold::{retract, TangentVector};
use bmlandscape::objective::objective_value;
use bmlandscape::{Matrix, Point, SymMatrix};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn to_na(m: &SymMatrix<f64>) -> DMatrix<f64> {
    let n = m.dim();
    DMatrix::from_fn(n, n, |i, j| m[(i, j)])
}

/// Ascending eigenvalues from nalgebra's symmetric solver.
pub fn na_eigenvalues(m: &SymMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = to_na(m).symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn na_min_eigenvalue(m: &SymMatrix<f64>) -> f64 {
    na_eigenvalues(m)[0]
}

pub fn gaussian_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix<f64> {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn random_sym<R: Rng>(n: usize, rng: &mut R) -> SymMatrix<f64> {
    let g = gaussian_matrix(n, n, rng);
    SymMatrix::from_upper(n, |i, j| g[(i, j)])
}

pub fn random_point<R: Rng>(n: usize, p: usize, rng: &mut R) -> Point<f64> {
    Point::normalized(gaussian_matrix(n, p, rng)).unwrap()
}

/// Tangent vector by explicit row-wise Gram–Schmidt against `Y`.
pub fn random_tangent_oracle<R: Rng>(y: &Point<f64>, rng: &mut R) -> TangentVector<f64> {
    let (n, p) = (y.n(), y.p());
    let mut z = gaussian_matrix(n, p, rng);
    for i in 0..n {
        let yi = y.row(i);
        let c: f64 = (0..p).map(|j| z[(i, j)] * yi[j]).sum();
        for j in 0..p {
            z[(i, j)] -= c * yi[j];
        }
    }
    TangentVector::new(y, z).unwrap()
}

pub fn f_along(a: &SymMatrix<f64>, y: &Point<f64>, u: &TangentVector<f64>, t: f64) -> f64 {
    objective_value(a, &retract(y, &u.scaled(t)).unwrap()).unwrap()
}

/// Central difference `(f(R(hU)) − f(R(−hU))) / 2h`.
pub fn fd_directional(a: &SymMatrix<f64>, y: &Point<f64>, u: &TangentVector<f64>, h: f64) -> f64 {
    (f_along(a, y, u, h) - f_along(a, y, u, -h)) / (2.0 * h)
}

/// Second difference `(f(R(hU)) − 2f(Y) + f(R(−hU))) / h²`.
pub fn fd_second(a: &SymMatrix<f64>, y: &Point<f64>, u: &TangentVector<f64>, h: f64) -> f64 {
    let f0 = objective_value(a, y).unwrap();
    (f_along(a, y, u, h) - 2.0 * f0 + f_along(a, y, u, -h)) / (h * h)
}

/// A random cost matrix for which `Y` is first-order critical:
/// `A = P B P + diag(d)` with `P` the projector onto `col(Y)^⊥`.
pub fn critical_cost<R: Rng>(y: &Point<f64>, rng: &mut R) -> SymMatrix<f64> {
    let n = y.n();
    let ym = DMatrix::from_fn(n, y.p(), |i, j| y.row(i)[j]);
    let svd = ym.svd(true, false);
    let u = svd.u.unwrap();
    let rank = svd.singular_values.iter().filter(|&&s| s > 1e-10).count();
    let basis = u.columns(0, rank).into_owned();
    let proj = DMatrix::identity(n, n) - &basis * basis.transpose();
    let b = to_na(&random_sym(n, rng));
    let s = &proj * b * &proj;
    let d: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    SymMatrix::from_upper(n, |i, j| s[(i, j)] + if i == j { d[i] } else { 0.0 })
}

pub fn rel_err(approx: f64, exact: f64) -> f64 {
    (approx - exact).abs() / exact.abs().max(1.0)
}

/// Least squares `y ≈ a + b·t` on `t = 0, 1, …`; returns `(slope, r²)`.
pub fn linear_regression(ys: &[f64]) -> (f64, f64) {
    let m = ys.len() as f64;
    let ts: Vec<f64> = (0..ys.len()).map(|t| t as f64).collect();
    let tm = ts.iter().sum::<f64>() / m;
    let ym = ys.iter().sum::<f64>() / m;
    let stt: f64 = ts.iter().map(|t| (t - tm) * (t - tm)).sum();
    let sty: f64 = ts.iter().zip(ys).map(|(t, y)| (t - tm) * (y - ym)).sum();
    let slope = sty / stt;
    let intercept = ym - slope * tm;
    let ss_res: f64 = ts.iter().zip(ys).map(|(t, y)| (y - intercept - slope * t).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - ym).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    (slope, r2)
}
