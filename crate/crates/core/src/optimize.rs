//! Riemannian solvers on the product of spheres.
//!
//! * Fixed-step gradient descent `Y ← R_Y(−η grad f(Y))` with the metric
//!   projection retraction, the dynamics studied near the axial position.
//! * Armijo backtracking gradient descent.
//! * Riemannian trust region whose subproblem is solved by truncated
//!   conjugate gradients (Steihaug–Toint) on the exact Hessian model
//!   `m(U) = f(Y) + ⟨grad, U⟩ + ½⟨Hess[U], U⟩`.
//!
//! A run is single-threaded and deterministic given `(A, Y0, config)`.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::manifold::{potential_phi_point, project_raw, retract_unchecked, Point, TangentVector};
use crate::objective::Evaluation;
use crate::scalar::{scale_of, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    FixedStepRgd,
    ArmijoRgd,
    TrustRegion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmijoParams<T> {
    pub c1: T,
    pub shrink: T,
    pub max_backtracks: usize,
}

/// Trust-region settings. `None` radii are derived from the problem size:
/// `initial = 0.1·√(np)`, `max = √(np)`. `None` inner iterations means the
/// manifold dimension `n(p−1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustRegionParams<T> {
    pub initial_radius: Option<T>,
    pub max_radius: Option<T>,
    pub rho_accept: T,
    pub tcg_max_iters: Option<usize>,
    pub tcg_kappa: T,
    pub tcg_theta: T,
    #[serde(default)]
    pub hessian: HessianModel,
}

/// How the trust-region model applies the Hessian.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HessianModel {
    #[default]
    Exact,
    /// Forward difference of the projected gradient along a retraction with
    /// step `2⁻¹⁴/‖U‖`.
    FiniteDifference,
}

/// Which iterates a [`Trace`] stores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IteratePolicy {
    /// Keep iterates when `n·p·max_iters ≤ 2²²`.
    Auto,
    Always,
    Never,
}

const AUTO_ITERATE_BUDGET: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig<T> {
    pub method: Method,
    /// Fixed step, or the initial trial step for Armijo. `None` uses
    /// [`eta_safe`] (fixed) or `4·eta_safe` (Armijo).
    pub eta: Option<T>,
    pub max_iters: usize,
    /// Relative: stop once `‖grad‖ ≤ grad_tol·max(1, ‖A‖_F)`.
    pub grad_tol: T,
    pub armijo: ArmijoParams<T>,
    pub tr: TrustRegionParams<T>,
    pub keep_iterates: IteratePolicy,
}

impl<T: Scalar> SolverConfig<T> {
    fn base(method: Method, max_iters: usize) -> Self {
        Self {
            method,
            eta: None,
            max_iters,
            grad_tol: T::lit(1e-8),
            armijo: ArmijoParams {
                c1: T::lit(1e-4),
                shrink: T::lit(0.5),
                max_backtracks: 30,
            },
            tr: TrustRegionParams {
                initial_radius: None,
                max_radius: None,
                rho_accept: T::lit(0.1),
                tcg_max_iters: None,
                tcg_kappa: T::lit(0.1),
                tcg_theta: T::one(),
                hessian: HessianModel::Exact,
            },
            keep_iterates: IteratePolicy::Auto,
        }
    }

    pub fn fixed_step() -> Self {
        Self::base(Method::FixedStepRgd, 10_000)
    }

    pub fn armijo() -> Self {
        Self::base(Method::ArmijoRgd, 10_000)
    }

    pub fn trust_region() -> Self {
        Self::base(Method::TrustRegion, 500)
    }

    pub fn for_method(method: Method) -> Self {
        match method {
            Method::FixedStepRgd => Self::fixed_step(),
            Method::ArmijoRgd => Self::armijo(),
            Method::TrustRegion => Self::trust_region(),
        }
    }

    pub fn with_eta(mut self, eta: T) -> Self {
        self.eta = Some(eta);
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_grad_tol(mut self, tol: T) -> Self {
        self.grad_tol = tol;
        self
    }

    pub fn with_iterates(mut self, policy: IteratePolicy) -> Self {
        self.keep_iterates = policy;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidInput(format!("solver config: {what}")));
        if let Some(eta) = self.eta {
            if !(eta > T::zero()) || !eta.is_finite() {
                return bad("eta must be positive");
            }
        }
        if !(self.grad_tol > T::zero()) {
            return bad("grad_tol must be positive");
        }
        let a = &self.armijo;
        if !(a.c1 > T::zero() && a.c1 < T::one()) || !(a.shrink > T::zero() && a.shrink < T::one()) {
            return bad("armijo c1 and shrink must lie in (0, 1)");
        }
        let t = &self.tr;
        if !(t.rho_accept > T::zero() && t.rho_accept < T::one()) {
            return bad("rho_accept must lie in (0, 1)");
        }
        for r in [t.initial_radius, t.max_radius].into_iter().flatten() {
            if !(r > T::zero()) {
                return bad("trust-region radii must be positive");
            }
        }
        if !(t.tcg_kappa > T::zero()) || !(t.tcg_theta > T::zero()) {
            return bad("tcg kappa and theta must be positive");
        }
        Ok(())
    }
}

/// Conservative fixed step `1/(4‖A‖_F)`.
pub fn eta_safe<T: Scalar>(a: &SymMatrix<T>) -> T {
    let f = a.frobenius_norm();
    if f > T::zero() {
        T::one() / (T::lit(4.0) * f)
    } else {
        T::one()
    }
}

/// Per-iteration history of a solver run. Entry `t` of the scalar arrays
/// describes iterate `Y^(t)`; `step_lengths[t] = ‖Y^(t+1) − Y^(t)‖_F`.
#[derive(Debug, Clone)]
pub struct Trace<T: Scalar> {
    pub method: Method,
    pub iterates: Option<Vec<Point<T>>>,
    pub objectives: Vec<T>,
    pub grad_norms: Vec<T>,
    /// `Φ` of each iterate; empty when `n` is odd.
    pub potentials: Vec<T>,
    pub step_lengths: Vec<T>,
    pub final_point: Point<T>,
    pub converged: bool,
    pub iterations: usize,
}

impl<T: Scalar> Trace<T> {
    pub fn final_objective(&self) -> T {
        *self.objectives.last().expect("trace records the initial point")
    }

    pub fn final_grad_norm(&self) -> T {
        *self.grad_norms.last().expect("trace records the initial point")
    }

    /// CSV with header `iter,objective,grad_norm,phi`; `phi` is empty for odd `n`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iter,objective,grad_norm,phi\n");
        for (t, (f, g)) in self.objectives.iter().zip(&self.grad_norms).enumerate() {
            let phi = self
                .potentials
                .get(t)
                .map(|x| x.to_f64_lossy().to_string())
                .unwrap_or_default();
            let _ = writeln!(s, "{t},{},{},{phi}", f.to_f64_lossy(), g.to_f64_lossy());
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }

    pub fn summary(&self, classification: Option<Classification>) -> TraceSummary {
        TraceSummary {
            method: self.method,
            converged: self.converged,
            iterations: self.iterations,
            final_objective: self.final_objective().to_f64_lossy(),
            final_grad_norm: self.final_grad_norm().to_f64_lossy(),
            classification,
        }
    }
}

/// JSON summary of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub method: Method,
    pub converged: bool,
    pub iterations: usize,
    pub final_objective: f64,
    pub final_grad_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<Classification>,
}

struct Recorder<T: Scalar> {
    method: Method,
    iterates: Option<Vec<Point<T>>>,
    objectives: Vec<T>,
    grad_norms: Vec<T>,
    potentials: Vec<T>,
    step_lengths: Vec<T>,
    even: bool,
}

impl<T: Scalar> Recorder<T> {
    fn new<U: Scalar>(method: Method, y0: &Point<T>, cfg: &SolverConfig<U>) -> Self {
        let keep = match cfg.keep_iterates {
            IteratePolicy::Always => true,
            IteratePolicy::Never => false,
            IteratePolicy::Auto => y0
                .n()
                .saturating_mul(y0.p())
                .saturating_mul(cfg.max_iters.max(1))
                <= AUTO_ITERATE_BUDGET,
        };
        Self {
            method,
            iterates: keep.then(Vec::new),
            objectives: Vec::new(),
            grad_norms: Vec::new(),
            potentials: Vec::new(),
            step_lengths: Vec::new(),
            even: y0.n() % 2 == 0,
        }
    }

    fn record(&mut self, y: &Point<T>, f: T, g: T) {
        self.objectives.push(f);
        self.grad_norms.push(g);
        if self.even {
            self.potentials.push(potential_phi_point(y).expect("even n"));
        }
        if let Some(it) = self.iterates.as_mut() {
            it.push(y.clone());
        }
    }

    fn finish(self, final_point: Point<T>, converged: bool, iterations: usize) -> Trace<T> {
        Trace {
            method: self.method,
            iterates: self.iterates,
            objectives: self.objectives,
            grad_norms: self.grad_norms,
            potentials: self.potentials,
            step_lengths: self.step_lengths,
            final_point,
            converged,
            iterations,
        }
    }
}

fn failure<T: Scalar>(iteration: usize, y: &Point<T>, f: T) -> Error {
    Error::NumericalFailure {
        iteration,
        last_objective: f.to_f64_lossy(),
        n: y.n(),
        p: y.p(),
        last_point: y.as_slice().iter().map(|x| x.to_f64_lossy()).collect(),
    }
}

fn check_start<T: Scalar>(a: &SymMatrix<T>, y0: &Point<T>) -> Result<()> {
    if a.dim() != y0.n() {
        return Err(Error::InvalidDimensions(format!(
            "cost matrix dimension {} vs point rows {}",
            a.dim(),
            y0.n()
        )));
    }
    if !y0.is_finite() || !a.as_matrix().is_finite() {
        return Err(Error::InvalidInput("non-finite input".into()));
    }
    Ok(())
}

/// One fixed step `R_Y(−η grad f(Y))`.
pub fn rgd_step<T: Scalar>(a: &SymMatrix<T>, y: &Point<T>, eta: T) -> Result<Point<T>> {
    if !(eta > T::zero()) {
        return Err(Error::InvalidInput(format!("step size must be positive, got {eta}")));
    }
    let g = Evaluation::new(a, y)?.gradient();
    Ok(retract_unchecked(y, &g.scaled(-eta)))
}

/// Runs the configured solver.
pub fn solve<T: Scalar>(a: &SymMatrix<T>, y0: &Point<T>, cfg: &SolverConfig<T>) -> Result<Trace<T>> {
    match cfg.method {
        Method::FixedStepRgd | Method::ArmijoRgd => rgd_run(a, y0, cfg),
        Method::TrustRegion => tr_run(a, y0, cfg),
    }
}

/// Gradient descent, fixed-step or Armijo backtracking.
pub fn rgd_run<T: Scalar>(a: &SymMatrix<T>, y0: &Point<T>, cfg: &SolverConfig<T>) -> Result<Trace<T>> {
    cfg.validate()?;
    if cfg.method == Method::TrustRegion {
        return Err(Error::InvalidInput("rgd_run needs a gradient-descent method".into()));
    }
    check_start(a, y0)?;
    let tol = cfg.grad_tol * scale_of(a.frobenius_norm());
    let eta = match (cfg.eta, cfg.method) {
        (Some(e), _) => e,
        (None, Method::ArmijoRgd) => T::lit(4.0) * eta_safe(a),
        (None, _) => eta_safe(a),
    };

    let mut rec = Recorder::new(cfg.method, y0, cfg);
    let mut y = y0.clone();
    let mut eval = Evaluation::new(a, &y)?;
    let mut converged = false;
    let mut iterations = 0;
    loop {
        let g = eval.gradient();
        let gn = g.norm();
        if !gn.is_finite() || !eval.value().is_finite() {
            return Err(failure(iterations, &y, eval.value()));
        }
        rec.record(&y, eval.value(), gn);
        if gn <= tol {
            converged = true;
            break;
        }
        if iterations >= cfg.max_iters {
            break;
        }
        let next = match cfg.method {
            Method::FixedStepRgd => Some(retract_unchecked(&y, &g.scaled(-eta))),
            _ => armijo_step(a, &eval, &g, gn, eta, &cfg.armijo)?,
        };
        let Some(next) = next else {
            log::debug!("armijo: no acceptable step at iteration {iterations}");
            break;
        };
        let next_eval = Evaluation::new(a, &next)?;
        if !next.is_finite() || !next_eval.value().is_finite() {
            return Err(failure(iterations + 1, &y, eval.value()));
        }
        rec.step_lengths.push(next.distance(&y));
        y = next;
        eval = next_eval;
        iterations += 1;
    }
    Ok(rec.finish(y, converged, iterations))
}

fn armijo_step<T: Scalar>(
    a: &SymMatrix<T>,
    eval: &Evaluation<'_, T>,
    g: &TangentVector<T>,
    gn: T,
    eta0: T,
    params: &ArmijoParams<T>,
) -> Result<Option<Point<T>>> {
    let y = eval.point();
    let f0 = eval.value();
    let mut t = eta0;
    for _ in 0..=params.max_backtracks {
        let cand = retract_unchecked(y, &g.scaled(-t));
        let fc = Evaluation::new(a, &cand)?.value();
        if fc <= f0 - params.c1 * t * gn * gn {
            return Ok(Some(cand));
        }
        t = t * params.shrink;
    }
    Ok(None)
}

struct TcgOutcome<T: Scalar> {
    step: TangentVector<T>,
    hstep: TangentVector<T>,
    hit_boundary: bool,
    inner_iters: usize,
}

/// Steihaug–Toint truncated CG on the exact Hessian model inside the ball of
/// radius `delta`.
fn truncated_cg<T: Scalar>(
    hvp: &dyn Fn(&TangentVector<T>) -> TangentVector<T>,
    grad: &TangentVector<T>,
    delta: T,
    max_iters: usize,
    kappa: T,
    theta: T,
) -> TcgOutcome<T> {
    let half = T::lit(0.5);
    let mut eta = grad.scaled(T::zero());
    let mut h_eta = eta.clone();
    let mut r = grad.clone();
    let mut r_r = r.inner(&r);
    let norm_r0 = r_r.sqrt();
    let mut dir = r.scaled(-T::one());
    let mut e_pe = T::zero();
    let mut e_pd = T::zero();
    let mut d_pd = r_r;
    let mut model = T::zero();
    let delta2 = delta * delta;
    let mut hit_boundary = false;
    let mut j = 0;
    while j < max_iters {
        j += 1;
        let h_dir = hvp(&dir);
        let d_hd = dir.inner(&h_dir);
        let alpha = r_r / d_hd;
        let e_pe_new = e_pe + T::lit(2.0) * alpha * e_pd + alpha * alpha * d_pd;
        if !(d_hd > T::zero()) || e_pe_new >= delta2 {
            let tau = (-e_pd + (e_pd * e_pd + d_pd * (delta2 - e_pe)).sqrt()) / d_pd;
            eta.axpy(tau, &dir);
            h_eta.axpy(tau, &h_dir);
            hit_boundary = true;
            break;
        }
        let new_eta = eta.add_scaled(alpha, &dir);
        let new_h_eta = h_eta.add_scaled(alpha, &h_dir);
        let new_model = grad.inner(&new_eta) + half * new_eta.inner(&new_h_eta);
        if new_model >= model {
            break;
        }
        eta = new_eta;
        h_eta = new_h_eta;
        model = new_model;
        e_pe = e_pe_new;
        r.axpy(alpha, &h_dir);
        let r_r_new = r.inner(&r);
        let norm_r = r_r_new.sqrt();
        if norm_r <= norm_r0 * norm_r0.powf(theta).min(kappa) {
            break;
        }
        let beta = r_r_new / r_r;
        r_r = r_r_new;
        dir = dir.scaled(beta).add_scaled(-T::one(), &r);
        e_pd = beta * (e_pd + alpha * d_pd);
        d_pd = r_r + beta * beta * d_pd;
    }
    TcgOutcome {
        step: eta,
        hstep: h_eta,
        hit_boundary,
        inner_iters: j,
    }
}

fn fd_hessian_apply<T: Scalar>(
    a: &SymMatrix<T>,
    eval: &Evaluation<'_, T>,
    grad: &TangentVector<T>,
    u: &TangentVector<T>,
) -> TangentVector<T> {
    let un = u.norm();
    if un < T::epsilon() {
        return u.scaled(T::zero());
    }
    let c = T::lit(2f64.powi(-14)) / un;
    let y = eval.point();
    let y1 = retract_unchecked(y, &u.scaled(c));
    let g1 = Evaluation::new(a, &y1).expect("same dimensions").gradient();
    let back = project_raw(y, g1.as_slice().to_vec());
    back.add_scaled(-T::one(), grad).scaled(T::one() / c)
}

/// Riemannian trust region with truncated-CG inner solves.
///
/// Ratio test `ρ = (f(Y) − f(R_Y(U))) / (m(0) − m(U))` (regularized against
/// roundoff near convergence); radius ×¼ when `ρ < ¼`, ×2 (capped) when
/// `ρ > ¾` and the step reached the boundary; accept when `ρ > rho_accept`.
pub fn tr_run<T: Scalar>(a: &SymMatrix<T>, y0: &Point<T>, cfg: &SolverConfig<T>) -> Result<Trace<T>> {
    cfg.validate()?;
    if cfg.method != Method::TrustRegion {
        return Err(Error::InvalidInput("tr_run needs the trust-region method".into()));
    }
    check_start(a, y0)?;
    let (n, p) = (y0.n(), y0.p());
    let tol = cfg.grad_tol * scale_of(a.frobenius_norm());
    let size = T::of_usize(n * p).sqrt();
    let delta_max = cfg.tr.max_radius.unwrap_or(size);
    let mut delta = cfg.tr.initial_radius.unwrap_or(T::lit(0.1) * size).min(delta_max);
    let dim = n * p.saturating_sub(1);
    let inner_max = cfg.tr.tcg_max_iters.unwrap_or(dim).min(dim).max(1);
    let quarter = T::lit(0.25);
    let three_quarters = T::lit(0.75);

    let mut rec = Recorder::new(Method::TrustRegion, y0, cfg);
    let mut y = y0.clone();
    let mut eval = Evaluation::new(a, &y)?;
    let mut grad = eval.gradient();
    let mut converged = false;
    let mut iterations = 0;
    loop {
        let gn = grad.norm();
        if !gn.is_finite() || !eval.value().is_finite() {
            return Err(failure(iterations, &y, eval.value()));
        }
        rec.record(&y, eval.value(), gn);
        if gn <= tol {
            converged = true;
            break;
        }
        if iterations >= cfg.max_iters {
            break;
        }
        iterations += 1;

        let exact = |u: &TangentVector<T>| eval.hessian_apply(u);
        let fd = |u: &TangentVector<T>| fd_hessian_apply(a, &eval, &grad, u);
        let hvp: &dyn Fn(&TangentVector<T>) -> TangentVector<T> = match cfg.tr.hessian {
            HessianModel::Exact => &exact,
            HessianModel::FiniteDifference => &fd,
        };
        let tcg = truncated_cg(hvp, &grad, delta, inner_max, cfg.tr.tcg_kappa, cfg.tr.tcg_theta);
        let cand = retract_unchecked(&y, &tcg.step);
        let cand_eval = Evaluation::new(a, &cand)?;
        let f = eval.value();
        let f_new = cand_eval.value();
        if !cand.is_finite() || !f_new.is_finite() {
            return Err(failure(iterations, &y, f));
        }
        let model_decrease = -(grad.inner(&tcg.step) + T::lit(0.5) * tcg.step.inner(&tcg.hstep));
        let reg = scale_of(f.abs()) * T::epsilon() * T::lit(1e3);
        let rho = if model_decrease > T::zero() {
            (f - f_new + reg) / (model_decrease + reg)
        } else {
            -T::infinity()
        };

        if rho < quarter {
            delta = delta * quarter;
        } else if rho > three_quarters && tcg.hit_boundary {
            delta = (delta * T::lit(2.0)).min(delta_max);
        }

        if rho > cfg.tr.rho_accept {
            rec.step_lengths.push(cand.distance(&y));
            y = cand;
            eval = cand_eval;
            grad = eval.gradient();
        } else {
            rec.step_lengths.push(T::zero());
        }
        log::trace!(
            "tr iter {iterations}: f={f_new} rho={rho} delta={delta} inner={}",
            tcg.inner_iters
        );
    }
    Ok(rec.finish(y, converged, iterations))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Classification {
    Spurious,
    Global,
    Unknown,
}

/// Classifies an objective value against the spurious and optimal values:
/// within `margin·span` of either, where `span = spurious − optimal`.
pub fn classify_value<T: Scalar>(obj: T, spurious_value: T, optimal_value: T, margin: T) -> Result<Classification> {
    let span = spurious_value - optimal_value;
    if !(span > T::zero()) {
        return Err(Error::InvalidInput(format!(
            "spurious value {spurious_value} must exceed optimal value {optimal_value}"
        )));
    }
    if !(margin > T::zero()) {
        return Err(Error::InvalidInput("margin must be positive".into()));
    }
    let band = margin * span;
    Ok(if (obj - spurious_value).abs() <= band {
        Classification::Spurious
    } else if (obj - optimal_value).abs() <= band {
        Classification::Global
    } else {
        Classification::Unknown
    })
}

pub fn classify_limit<T: Scalar>(
    a: &SymMatrix<T>,
    y: &Point<T>,
    spurious_value: T,
    optimal_value: T,
    margin: T,
) -> Result<Classification> {
    let obj = Evaluation::new(a, y)?.value();
    classify_value(obj, spurious_value, optimal_value, margin)
}
