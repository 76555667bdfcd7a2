mod common;

use bmlandscape::certify::{kkt_certificate_almost_average, pseudo_report};
use bmlandscape::instances::{almost_average, almost_average_opt_value, axial, block_cost, random_pseudo_pd};
use bmlandscape::objective::{
    hessian_apply, hessian_matrix, hessian_quadratic, hessian_spectrum, objective_value, riemannian_gradient,
    tangent_basis,
};
use bmlandscape::{Matrix, Point, SymMatrix};
use common::*;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn eigenvalues_agree_with_nalgebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in [1, 2, 3, 7, 16, 40] {
        for _ in 0..5 {
            let m = random_sym(n, &mut rng);
            let ours = m.eigenvalues();
            let theirs = na_eigenvalues(&m);
            let scale = m.frobenius_norm().max(1.0);
            for (a, b) in ours.iter().zip(&theirs) {
                assert!((a - b).abs() <= 1e-12 * scale, "n={n}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn eigenvalues_of_clustered_spectrum() {
    // Q diag(λ) Qᵀ with repeated λ
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 12;
    let q = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5).qr().q();
    let lam: Vec<f64> = (0..n).map(|i| [-1.0, 0.0, 0.0, 2.0][i % 4]).collect();
    let m = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(lam.clone())) * q.transpose();
    let s = SymMatrix::from_upper(n, |i, j| m[(i, j)]);
    let mut want = lam;
    want.sort_by(f64::total_cmp);
    for (a, b) in s.eigenvalues().iter().zip(&want) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
    let e = s.eigen();
    for k in 0..n {
        let v: Vec<f64> = (0..n).map(|i| e.vectors[(i, k)]).collect();
        let mv = s.mul_vec(&v);
        for i in 0..n {
            assert!((mv[i] - e.values[k] * v[i]).abs() < 1e-12);
        }
    }
}

#[test]
fn almost_average_spectrum_against_nalgebra() {
    for k in [2, 3, 10, 25] {
        let m = almost_average::<f64>(k).unwrap();
        let lam = na_eigenvalues(&m);
        assert!((lam[0] + 1.0 / (2.0 * k as f64 - 3.0)).abs() < 1e-12);
        assert!(lam[1] > 0.0);
        let r = pseudo_report(&m, 1e-9).unwrap();
        for i in 0..k {
            let sub = na_min_eigenvalue(&m.leave_one_out(i).unwrap());
            assert!((r.per_index_min_eigs[i] - sub).abs() < 1e-12);
        }
    }
}

#[test]
fn random_construction_against_nalgebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for k in [2, 5, 20] {
        let r = random_pseudo_pd::<f64, _>(k, 2.0 * (k.max(2) as f64).ln().sqrt(), &mut rng, 16).unwrap();
        assert!((na_min_eigenvalue(&r.m) + r.epsilon).abs() < 1e-9);
        for i in 0..k {
            assert!(na_min_eigenvalue(&r.m.leave_one_out(i).unwrap()) >= r.epsilon - 1e-9);
        }
    }
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..120 {
        let n = rng.random_range(2..=12);
        let p = rng.random_range(1..=n);
        let a = random_sym(n, &mut rng);
        let y = random_point(n, p, &mut rng);
        let u = random_tangent_oracle(&y, &mut rng);
        let exact = riemannian_gradient(&a, &y).unwrap().inner(&u);
        let fd = fd_directional(&a, &y, &u, 1e-5);
        assert!(rel_err(fd, exact) <= 1e-6, "case {case}: {fd} vs {exact}");
    }
}

#[test]
fn hessian_matches_second_differences_at_critical_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..120 {
        let n = rng.random_range(3..=12);
        let p = rng.random_range(1..n);
        let y = random_point(n, p, &mut rng);
        let a = critical_cost(&y, &mut rng);
        assert!(riemannian_gradient(&a, &y).unwrap().norm() < 1e-10);
        let u = random_tangent_oracle(&y, &mut rng);
        let q = hessian_quadratic(&a, &y, &u).unwrap();
        let fd = fd_second(&a, &y, &u, 1e-4);
        assert!(rel_err(fd, q) <= 1e-4, "case {case}: {fd} vs {q}");
    }
}

#[test]
fn hessian_is_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100 {
        let n = rng.random_range(2..=12);
        let p = rng.random_range(1..=n);
        let a = random_sym(n, &mut rng);
        let y = random_point(n, p, &mut rng);
        let u = random_tangent_oracle(&y, &mut rng);
        let v = random_tangent_oracle(&y, &mut rng);
        let uhv = u.inner(&hessian_apply(&a, &y, &v).unwrap());
        let vhu = v.inner(&hessian_apply(&a, &y, &u).unwrap());
        assert!((uhv - vhu).abs() <= 1e-9 * uhv.abs().max(1.0));
    }
}

#[test]
fn dense_hessian_matches_difference_of_gradients() {
    // H e_k ≈ (Proj grad(R(t e_k)) − grad(Y)) / t at a non-critical point,
    // projected back onto the basis.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (n, p) = (5, 3);
    let a = random_sym(n, &mut rng);
    let y = random_point(n, p, &mut rng);
    let h = hessian_matrix(&a, &y, 1000).unwrap();
    let basis = tangent_basis(&y);
    let d = basis.len();
    assert_eq!(h.dim(), d);
    let embed = |k: usize| {
        let (row, dir) = (k / (p - 1), &basis[k]);
        let mut m = Matrix::zeros(n, p);
        for j in 0..p {
            m[(row, j)] = dir[j];
        }
        bmlandscape::TangentVector::new(&y, m).unwrap()
    };
    let g0 = riemannian_gradient(&a, &y).unwrap();
    let t = 1e-6;
    for k in 0..d {
        let ek = embed(k);
        let y1 = bmlandscape::manifold::retract(&y, &ek.scaled(t)).unwrap();
        let g1 = riemannian_gradient(&a, &y1).unwrap();
        let g1_back = bmlandscape::manifold::tangent_project(&y, &g1.to_matrix()).unwrap();
        for l in 0..d {
            let el = embed(l);
            let fd = (g1_back.inner(&el) - g0.inner(&el)) / t;
            assert!((fd - h[(l, k)]).abs() < 1e-4, "({l},{k}): {fd} vs {}", h[(l, k)]);
        }
    }
}

#[test]
fn axial_hessian_matches_explicit_structure() {
    // At axial with a block cost, the tangent space at row r is spanned by
    // e_c (c ≠ axis of r) and the Hessian form is 2 S_{rr'} δ_{cc'} with
    // S = A − diag(α) = [M M; M M].
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for p in [2, 3, 5] {
        let n = 2 * p;
        let alpha: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let m = almost_average::<f64>(p).unwrap();
        let a = block_cost(&m, &alpha).unwrap();
        let coords: Vec<(usize, usize)> = (0..n).flat_map(|r| (0..p).filter(move |&c| c != r % p).map(move |c| (r, c))).collect();
        let d = coords.len();
        let h = DMatrix::from_fn(d, d, |x, z| {
            let (r, c) = coords[x];
            let (r2, c2) = coords[z];
            if c == c2 {
                2.0 * m[(r % p, r2 % p)]
            } else {
                0.0
            }
        });
        let mut want: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().copied().collect();
        want.sort_by(f64::total_cmp);
        let got = hessian_spectrum(&a, &axial(n).unwrap()).unwrap().eigenvalues;
        assert_eq!(got.len(), want.len());
        for (x, w) in got.iter().zip(&want) {
            assert!((x - w).abs() < 1e-10, "p={p}: {x} vs {w}");
        }
    }
}

#[test]
fn almost_average_optimum_is_attained_and_not_beaten() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for p in [2, 3, 6] {
        let n = 2 * p;
        let a = block_cost(&almost_average::<f64>(p).unwrap(), &vec![0.0; n]).unwrap();
        let opt: f64 = almost_average_opt_value(p).unwrap();
        let ones = Point::new(Matrix::from_fn(n, p, |_, j| if j == 0 { 1.0 } else { 0.0 })).unwrap();
        assert!((objective_value(&a, &ones).unwrap() - opt).abs() < 1e-12);
        // J is all-ones: ⟨A, J⟩ is the sum of all entries.
        let total: f64 = a.as_matrix().as_slice().iter().sum();
        assert!((total - opt).abs() < 1e-12);
        for _ in 0..200 {
            let y = random_point(n, p, &mut rng);
            assert!(objective_value(&a, &y).unwrap() >= opt - 1e-12);
        }
        let kkt = kkt_certificate_almost_average::<f64>(p, 1e-9).unwrap();
        let s = a.shift(-kkt.b);
        assert!(na_min_eigenvalue(&s) >= -1e-12);
    }
}
