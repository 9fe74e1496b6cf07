//! The space-time functional
//!
//! ```text
//! I(u) = Σₙ dt [ E_λ(uₙ) + ε ψ(u'ₙ) + ε ψ(uₙ) + (ε/2)|uₙ|²_V − ⟨gₙ, uₙ⟩ ]
//! ```
//!
//! over periodic trajectories, with `E` the state energy, `E_λ` its
//! Moreau–Yosida envelope (or `E` itself when `λ = 0`) and `g = f + h`.
//! Stationary points solve the regularized periodic problem
//! `−ε(α(u'))' + εα(u) + ∂E_λ(u) + εF_V(u) = f + h`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::convex::{
    eval_psi, moreau_yosida, ConvexFunctional, LpMetric, PerturbedFunctional, StateEnergy,
};
use crate::error::{Error, Result};
use crate::linalg::{BandedLu, BandedSym, FactoredSystem, RankOne};
use crate::math::{conjugate_exponent, powi};
use crate::norms::{bochner_norm, lp_norm};
use crate::problem::ProblemSpec;
use crate::trajectory::{time_derivative, DualTrajectory, PeriodicTrajectory};

/// Default gradient smoothing of the diffusion energy.
pub const DEFAULT_DELTA: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveConfig {
    pub epsilon: f64,
    pub lambda: f64,
    /// `f + h`.
    pub f_plus_h: DualTrajectory,
    pub delta: f64,
    /// Replaces `φ` by `Φ = φ + μ/(1+α)φ^{1+α}`.
    pub perturbation: Option<PerturbedFunctional>,
}

impl ObjectiveConfig {
    pub fn new(epsilon: f64, lambda: f64, f_plus_h: DualTrajectory) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::config(
                "cascade.epsilon_schedule",
                format!("epsilon must be positive, got {epsilon}"),
            ));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::config(
                "cascade.lambda_schedule",
                format!("lambda must be nonnegative, got {lambda}"),
            ));
        }
        Ok(ObjectiveConfig {
            epsilon,
            lambda,
            f_plus_h,
            delta: DEFAULT_DELTA,
            perturbation: None,
        })
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_perturbation(mut self, pf: Option<PerturbedFunctional>) -> Self {
        self.perturbation = pf;
        self
    }

    /// `λ > 0` minimizes through the envelope `E_λ`.
    pub fn use_envelope(&self) -> bool {
        self.lambda > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MinimizerReport {
    pub iterations: usize,
    /// Relative gradient norm at the returned iterate.
    pub final_gradient_norm: f64,
    pub objective_value: f64,
    pub line_search_failures: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Method {
    /// Steepest descent in the `V*` Riesz direction with Armijo backtracking.
    GradientDescent,
    /// Newton steps on the smoothed Hessian, Armijo backtracking.
    Newton,
}

/// Evaluates `I`, its gradient and its Newton model for one configuration.
pub struct Objective<'a> {
    cfg: &'a ObjectiveConfig,
    spec: &'a ProblemSpec,
    energy: StateEnergy,
    metric: LpMetric,
    scale: f64,
}

/// Everything computed at one trajectory.
struct Evaluation {
    value: f64,
    grad: Option<DualTrajectory>,
    /// Points where the state-energy Hessian is taken (`J_λ uₙ`, or `uₙ`).
    hess_points: Vec<Vec<f64>>,
    du: PeriodicTrajectory,
}

impl<'a> Objective<'a> {
    pub fn new(cfg: &'a ObjectiveConfig, spec: &'a ProblemSpec) -> Result<Self> {
        let g = &cfg.f_plus_h;
        if g.steps() != spec.tmesh.steps() || g.nodes() != spec.smesh.interior() {
            return Err(Error::Dimension(format!(
                "f + h is {}×{}, meshes need {}×{}",
                g.steps(),
                g.nodes(),
                spec.tmesh.steps(),
                spec.smesh.interior()
            )));
        }
        let energy = spec.state_energy(cfg.delta, cfg.perturbation)?;
        let metric = LpMetric::new(spec.p, &spec.smesh);
        let pd = conjugate_exponent(spec.p);
        let gnorm = bochner_norm(g, |s| metric.dual_norm(s), pd, &spec.tmesh);
        Ok(Objective {
            cfg,
            spec,
            energy,
            metric,
            scale: gnorm.max(1.0),
        })
    }

    pub fn energy(&self) -> &StateEnergy {
        &self.energy
    }

    fn evaluate(&self, u: &PeriodicTrajectory, with_grad: bool) -> Result<Evaluation> {
        let spec = self.spec;
        let (n_steps, m) = (spec.tmesh.steps(), spec.smesh.interior());
        if u.steps() != n_steps || u.nodes() != m {
            return Err(Error::Dimension(
                "trajectory does not match the meshes".into(),
            ));
        }
        let dt = spec.tmesh.dt();
        let eps = self.cfg.epsilon;
        let lambda = self.cfg.lambda;
        let du = time_derivative(u, &spec.tmesh);
        let mut value = 0.0;
        let mut grad = if with_grad {
            Some(DualTrajectory::zeros(n_steps, m))
        } else {
            None
        };
        let mut hess_points = Vec::with_capacity(n_steps);
        let mut buf = vec![0.0; m];
        for n in 0..n_steps {
            let un = u.slice(n);
            let gn = self.cfg.f_plus_h.slice(n);
            let (e_val, point) = if lambda > 0.0 {
                let my = moreau_yosida(un, lambda, &self.energy, self.metric, 1e-13)?;
                if with_grad {
                    buf.copy_from_slice(&my.yosida_grad);
                }
                (my.envelope, my.prox)
            } else {
                let v = if with_grad {
                    self.energy.value_and_gradient(un, &mut buf)?
                } else {
                    self.energy.value(un)?
                };
                (v, un.to_vec())
            };
            value += dt
                * (e_val
                    + eps * eval_psi(du.slice(n), &spec.nl, &spec.smesh)?
                    + eps * eval_psi(un, &spec.nl, &spec.smesh)?
                    + eps * self.metric.half_square(un)
                    - self.metric.pairing(gn, un));
            if let Some(g) = grad.as_mut() {
                let fv = self.metric.duality_map(un);
                let xi_n = du.slice(n);
                let xi_next = du.slice(spec.tmesh.wrap(n, 1));
                let out = g.slice_mut(n);
                for i in 0..m {
                    out[i] = eps * (spec.nl.alpha(xi_n[i]) - spec.nl.alpha(xi_next[i]))
                        + dt * (eps * spec.nl.alpha(un[i]) + buf[i] + eps * fv[i] - gn[i]);
                }
            }
            hess_points.push(point);
        }
        if !value.is_finite() {
            return Err(Error::InvalidInput("objective is not finite".into()));
        }
        Ok(Evaluation {
            value,
            grad,
            hess_points,
            du,
        })
    }

    pub fn value(&self, u: &PeriodicTrajectory) -> Result<f64> {
        Ok(self.evaluate(u, false)?.value)
    }

    pub fn gradient(&self, u: &PeriodicTrajectory) -> Result<DualTrajectory> {
        Ok(self.evaluate(u, true)?.grad.expect("gradient requested"))
    }

    /// `|G/dt|_{L^{p'}(V*)} / max(1, |f + h|_{L^{p'}(V*)})`.
    pub fn relative_norm(&self, g: &DualTrajectory) -> f64 {
        let dt = self.spec.tmesh.dt();
        let pd = conjugate_exponent(self.spec.p);
        bochner_norm(g, |s| self.metric.dual_norm(s), pd, &self.spec.tmesh) / dt / self.scale
    }

    /// The (smoothed) Hessian in node-major band form, `k = i·N + n`.
    fn assemble_hessian(
        &self,
        ev: &Evaluation,
        u: &PeriodicTrajectory,
    ) -> (BandedSym, Vec<RankOne>) {
        let spec = self.spec;
        let (nt, m) = (spec.tmesh.steps(), spec.smesh.interior());
        let dt = spec.tmesh.dt();
        let eps = self.cfg.epsilon;
        let idx = |i: usize, n: usize| i * nt + n;
        let mut band = BandedSym::zeros(nt * m, nt);
        let mut rank_ones: Vec<RankOne> = Vec::new();
        for n in 0..nt {
            let prev = spec.tmesh.wrap(n, -1);
            let xi = ev.du.slice(n);
            let un = u.slice(n);
            for i in 0..m {
                let c = eps * spec.nl.alpha_prime(xi[i]) / dt;
                band.add(idx(i, n), idx(i, n), c);
                band.add(idx(i, prev), idx(i, prev), c);
                band.add(idx(i, n), idx(i, prev), -c);
                band.add(idx(i, n), idx(i, n), dt * eps * spec.nl.alpha_prime(un[i]));
            }
            let he = self.energy.hessian(&ev.hess_points[n]);
            let hm = self.metric.hessian(un);
            for (h, s) in [(&he, dt), (&hm, dt * eps)] {
                for i in 0..m {
                    band.add(idx(i, n), idx(i, n), s * h.diag[i]);
                    if i + 1 < m {
                        band.add(idx(i + 1, n), idx(i, n), s * h.off[i]);
                    }
                }
                for r in &h.rank_ones {
                    rank_ones.push(r.relocated(s, |i| idx(i, n)));
                }
            }
        }
        (band, rank_ones)
    }

    /// Factors the Hessian, shifting the diagonal if Cholesky breaks down.
    fn factor_hessian(&self, ev: &Evaluation, u: &PeriodicTrajectory) -> Result<FactoredSystem> {
        let (band, rank_ones) = self.assemble_hessian(ev, u);
        let n = band.dim();
        let mut shift = 0.0;
        let diag_max = (0..n)
            .map(|k| band.get(k, k).abs())
            .fold(0.0, f64::max)
            .max(1e-300);
        for attempt in 0..8 {
            let mut b = band.clone();
            if shift > 0.0 {
                for k in 0..n {
                    b.add(k, k, shift);
                }
            }
            if let Ok(sys) = FactoredSystem::new(b, rank_ones.clone()) {
                return Ok(sys);
            }
            shift = diag_max * 1e-12 * powi(10.0, 2 * attempt);
        }
        Err(Error::Singular(0))
    }

    /// `d = −H⁻¹ G` with a factored Hessian.
    fn direction(&self, sys: &FactoredSystem, g: &DualTrajectory) -> Result<PeriodicTrajectory> {
        let (nt, m) = (self.spec.tmesh.steps(), self.spec.smesh.interior());
        let idx = |i: usize, n: usize| i * nt + n;
        let mut rhs = vec![0.0; nt * m];
        for n in 0..nt {
            for i in 0..m {
                rhs[idx(i, n)] = -g.slice(n)[i];
            }
        }
        let d = sys.solve(&rhs)?;
        if !d.iter().all(|x| x.is_finite()) {
            return Err(Error::Singular(0));
        }
        Ok(PeriodicTrajectory::from_fn(nt, m, |n, i| d[idx(i, n)]))
    }
}

/// A factored Hessian kept between minimizer calls with the same `ε`, `λ`, `δ`.
///
/// Later calls take chord steps with it and refactor once the gradient stops
/// dropping fast.
#[derive(Debug, Clone, Default)]
pub struct HessianCache {
    entry: Option<(CacheKey, FactoredSystem)>,
    factorizations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct CacheKey {
    epsilon: f64,
    lambda: f64,
    delta: f64,
    mu: Option<(f64, f64)>,
}

impl CacheKey {
    fn of(cfg: &ObjectiveConfig) -> Self {
        CacheKey {
            epsilon: cfg.epsilon,
            lambda: cfg.lambda,
            delta: cfg.delta,
            mu: cfg.perturbation.map(|p| (p.mu, p.alpha_exp)),
        }
    }
}

impl HessianCache {
    pub fn new() -> Self {
        HessianCache::default()
    }

    pub fn clear(&mut self) {
        self.entry = None;
    }

    /// Number of Hessian factorizations performed through this cache.
    pub fn factorizations(&self) -> usize {
        self.factorizations
    }

    fn get(&self, key: CacheKey) -> Option<&FactoredSystem> {
        match &self.entry {
            Some((k, sys)) if *k == key => Some(sys),
            _ => None,
        }
    }
}

/// `I(u)` for the configuration.
pub fn assemble_objective(
    u: &PeriodicTrajectory,
    cfg: &ObjectiveConfig,
    spec: &ProblemSpec,
) -> Result<f64> {
    Objective::new(cfg, spec)?.value(u)
}

/// Gradient of [`assemble_objective`] with respect to the pairing
/// `Σₙ ⟨Gₙ, δuₙ⟩`.
pub fn objective_gradient(
    u: &PeriodicTrajectory,
    cfg: &ObjectiveConfig,
    spec: &ProblemSpec,
) -> Result<DualTrajectory> {
    Objective::new(cfg, spec)?.gradient(u)
}

/// Minimizes `I` by Newton's method with Armijo backtracking.
pub fn minimize(
    cfg: &ObjectiveConfig,
    spec: &ProblemSpec,
    u0: &PeriodicTrajectory,
    tol: f64,
    max_iter: usize,
) -> Result<(PeriodicTrajectory, MinimizerReport)> {
    minimize_with(cfg, spec, u0, tol, max_iter, Method::Newton)
}

/// Minimizes `I` from `u0` until the relative gradient norm is below `tol`.
///
/// Reaching `max_iter` is not an error: the best iterate is returned with
/// `converged = false`.
pub fn minimize_with(
    cfg: &ObjectiveConfig,
    spec: &ProblemSpec,
    u0: &PeriodicTrajectory,
    tol: f64,
    max_iter: usize,
    method: Method,
) -> Result<(PeriodicTrajectory, MinimizerReport)> {
    run(
        cfg,
        spec,
        u0,
        tol,
        max_iter,
        method,
        &mut HessianCache::new(),
    )
}

/// Newton minimization reusing the factorization held in `cache`.
pub fn minimize_cached(
    cfg: &ObjectiveConfig,
    spec: &ProblemSpec,
    u0: &PeriodicTrajectory,
    tol: f64,
    max_iter: usize,
    cache: &mut HessianCache,
) -> Result<(PeriodicTrajectory, MinimizerReport)> {
    run(cfg, spec, u0, tol, max_iter, Method::Newton, cache)
}

fn run(
    cfg: &ObjectiveConfig,
    spec: &ProblemSpec,
    u0: &PeriodicTrajectory,
    tol: f64,
    max_iter: usize,
    method: Method,
    cache: &mut HessianCache,
) -> Result<(PeriodicTrajectory, MinimizerReport)> {
    if !(tol > 0.0) {
        return Err(Error::config("tol", "must be positive"));
    }
    let obj = Objective::new(cfg, spec)?;
    let mut u = u0.clone();
    let mut ev = obj.evaluate(&u, true)?;
    let mut failures = 0;
    let report =
        |u: PeriodicTrajectory, ev: &Evaluation, it: usize, failures: usize, converged: bool| {
            let gn = obj.relative_norm(ev.grad.as_ref().expect("gradient"));
            (
                u,
                MinimizerReport {
                    iterations: it,
                    final_gradient_norm: gn,
                    objective_value: ev.value,
                    line_search_failures: failures,
                    converged,
                },
            )
        };
    let dx = spec.smesh.dx();
    let key = CacheKey::of(cfg);
    let mut prev: Option<(f64, bool)> = None;
    let mut it = 0;
    while it < max_iter {
        let g = ev.grad.as_ref().expect("gradient");
        let gnorm = obj.relative_norm(g);
        if gnorm <= tol {
            return Ok(report(u, &ev, it, failures, true));
        }
        if let Some((pg, stale)) = prev {
            if stale && gnorm > 0.25 * pg {
                cache.clear();
            }
        }
        let mut fresh = false;
        let d = match method {
            Method::Newton => {
                if cache.get(key).is_none() {
                    if let Ok(sys) = obj.factor_hessian(&ev, &u) {
                        cache.entry = Some((key, sys));
                        cache.factorizations += 1;
                        fresh = true;
                    }
                }
                match cache.get(key).map(|sys| obj.direction(sys, g)) {
                    Some(Ok(d)) => d,
                    _ => riesz_direction(g, spec.p),
                }
            }
            Method::GradientDescent => riesz_direction(g, spec.p),
        };
        let mut slope = dx
            * g.as_slice()
                .iter()
                .zip(d.as_slice())
                .map(|(a, b)| a * b)
                .sum::<f64>();
        let stale = method == Method::Newton && !fresh;
        if slope >= 0.0 && stale {
            cache.clear();
            prev = None;
            continue;
        }
        let d = if slope < 0.0 {
            d
        } else {
            let d = riesz_direction(g, spec.p);
            slope = dx
                * g.as_slice()
                    .iter()
                    .zip(d.as_slice())
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
            d
        };
        let mut t = if method == Method::GradientDescent {
            gd_initial_step(&obj, &u, &d, ev.value, slope)?
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial = u.clone();
            trial.axpy(t, &d);
            if let Ok(q) = obj.value(&trial) {
                let slack = 64.0 * f64::EPSILON * (ev.value.abs() + 1.0);
                if q <= ev.value + 1e-4 * t * slope {
                    accepted = Some(trial);
                    break;
                }
                if t == 1.0 && q <= ev.value + slack {
                    let tev = obj.evaluate(&trial, true)?;
                    if obj.relative_norm(tev.grad.as_ref().expect("gradient")) < gnorm {
                        accepted = Some(trial);
                        break;
                    }
                }
            }
            if stale {
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some(trial) => {
                u = trial;
                ev = obj.evaluate(&u, true)?;
                prev = Some((gnorm, stale));
                it += 1;
            }
            None if stale => {
                cache.clear();
                prev = None;
            }
            None => {
                failures += 1;
                let converged = gnorm <= 1e3 * tol;
                return Ok(report(u, &ev, it, failures, converged));
            }
        }
    }
    let converged = obj.relative_norm(ev.grad.as_ref().expect("gradient")) <= tol;
    Ok(report(u, &ev, max_iter, failures, converged))
}

/// Newton step for the fixed point `h = β(h)` with residual `r = β(h) − h`.
///
/// `u` must minimize the λ = 0 functional of `cfg`, whose load contains `h`.
/// With `H` the Hessian of that functional and `K = H + dt·α'(u')·D_t`, the
/// Jacobian of `h ↦ β(h) − h` is `−K H⁻¹`; the step is `δh = H K⁻¹ r` and the
/// predicted change of `u` is `dt·K⁻¹ r`. Both are returned.
pub fn fixed_point_newton_step(
    cfg: &ObjectiveConfig,
    spec: &ProblemSpec,
    u: &PeriodicTrajectory,
    r: &DualTrajectory,
) -> Result<(DualTrajectory, PeriodicTrajectory)> {
    if cfg.lambda != 0.0 {
        return Err(Error::config(
            "lambda",
            "the fixed-point Jacobian needs the lambda = 0 functional",
        ));
    }
    let obj = Objective::new(cfg, spec)?;
    let ev = obj.evaluate(u, false)?;
    let (band, ones) = obj.assemble_hessian(&ev, u);
    let (nt, m) = (spec.tmesh.steps(), spec.smesh.interior());
    let n = nt * m;
    let idx = |i: usize, k: usize| i * nt + k;
    let mut k_mat = BandedLu::zeros(n, nt);
    for i in 0..n {
        for j in i.saturating_sub(nt)..=i {
            let v = band.get(i, j);
            if v != 0.0 {
                k_mat.add(i, j, v);
                if i != j {
                    k_mat.add(j, i, v);
                }
            }
        }
    }
    for t in 0..nt {
        let prev = spec.tmesh.wrap(t, -1);
        let du = ev.du.slice(t);
        for i in 0..m {
            let a = spec.nl.alpha_prime(du[i]);
            k_mat.add(idx(i, t), idx(i, t), a);
            k_mat.add(idx(i, t), idx(i, prev), -a);
        }
    }
    let sys = FactoredSystem::general(k_mat, ones.clone())?;
    let mut rhs = vec![0.0; n];
    for t in 0..nt {
        for i in 0..m {
            rhs[idx(i, t)] = r.slice(t)[i];
        }
    }
    let y = sys.solve(&rhs)?;
    let mut hy = band.mul_vec(&y);
    for o in &ones {
        o.apply_add(&y, &mut hy);
    }
    if !hy.iter().chain(&y).all(|v| v.is_finite()) {
        return Err(Error::Singular(0));
    }
    let dt = spec.tmesh.dt();
    let dh = DualTrajectory::from_fn(nt, m, |t, i| hy[idx(i, t)]);
    let du = PeriodicTrajectory::from_fn(nt, m, |t, i| dt * y[idx(i, t)]);
    Ok((dh, du))
}

/// `−G` mapped back to the primal side; for `p = 2` simply `−G`.
fn riesz_direction(g: &DualTrajectory, p: f64) -> PeriodicTrajectory {
    let pd = conjugate_exponent(p);
    let mut d = g.map(|x| -crate::math::signed_pow(x, pd));
    let max = d.max_abs();
    if max > 0.0 {
        d.scale(1.0 / max);
    }
    d.cast()
}

/// Step length from a one-dimensional quadratic model along `d`.
fn gd_initial_step(
    obj: &Objective<'_>,
    u: &PeriodicTrajectory,
    d: &PeriodicTrajectory,
    q0: f64,
    slope: f64,
) -> Result<f64> {
    let mut t = 1.0;
    for _ in 0..60 {
        let mut trial = u.clone();
        trial.axpy(t, d);
        if let Ok(q) = obj.value(&trial) {
            let curv = 2.0 * (q - q0 - t * slope) / (t * t);
            if curv > 0.0 {
                return Ok((-slope / curv).min(1e6));
            }
            return Ok(t);
        }
        t *= 0.5;
    }
    Ok(t)
}

/// `|α(u'ₙ) + ηₙ − fₙ|` in `L^{p'}(0, T; V*)`, the defect of the unregularized equation.
pub fn residual_ap(u: &PeriodicTrajectory, eta: &DualTrajectory, spec: &ProblemSpec) -> f64 {
    let defect = ap_defect(u, eta, &spec.f, spec);
    let pd = conjugate_exponent(spec.p);
    let dx = spec.smesh.dx();
    bochner_norm(&defect, |s| lp_norm(s, pd, dx), pd, &spec.tmesh)
}

/// Slice-wise `α(u'ₙ) + ηₙ − fₙ`.
pub fn ap_defect(
    u: &PeriodicTrajectory,
    eta: &DualTrajectory,
    f: &DualTrajectory,
    spec: &ProblemSpec,
) -> DualTrajectory {
    let du = time_derivative(u, &spec.tmesh);
    let mut out = DualTrajectory::zeros(u.steps(), u.nodes());
    for n in 0..u.steps() {
        let (d, e, fv) = (du.slice(n), eta.slice(n), f.slice(n));
        for (i, o) in out.slice_mut(n).iter_mut().enumerate() {
            *o = spec.nl.alpha(d[i]) + e[i] - fv[i];
        }
    }
    out
}

/// `∇E(uₙ)` slice by slice.
pub fn energy_gradient(u: &PeriodicTrajectory, energy: &StateEnergy) -> Result<DualTrajectory> {
    let mut out = DualTrajectory::zeros(u.steps(), u.nodes());
    for n in 0..u.steps() {
        energy.gradient(u.slice(n), out.slice_mut(n))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::DiffusionField;
    use crate::mesh::{SpatialMesh, TemporalMesh};
    use crate::nonlinearity::Nonlinearity;
    use crate::rng;

    fn spec(p: f64, m: f64, nodes: usize, steps: usize) -> ProblemSpec {
        let s = SpatialMesh::unit(nodes);
        let t = TemporalMesh::unit(steps);
        let a = DiffusionField::from_fn(&s, |x| 1.0 + 0.5 * x).unwrap();
        let f = DualTrajectory::from_fn(steps, nodes, |n, i| {
            crate::math::sin(3.0 * s.node(i)) * crate::math::cos(6.0 * t.time(n))
        });
        ProblemSpec::new(Nonlinearity::power(p).unwrap(), m, a, f, s, t).unwrap()
    }

    fn random_traj(seed: u64, steps: usize, nodes: usize, scale: f64) -> PeriodicTrajectory {
        let mut r = rng::seeded(seed);
        PeriodicTrajectory::from_vec(
            steps,
            nodes,
            rng::uniform_field(&mut r, steps * nodes, scale),
        )
        .unwrap()
    }

    #[test]
    fn zero_data_zero_objective() {
        let sp = spec(2.5, 3.0, 5, 4);
        let cfg = ObjectiveConfig::new(0.3, 0.0, DualTrajectory::zeros(4, 5))
            .unwrap()
            .with_delta(0.0);
        let v = assemble_objective(&PeriodicTrajectory::zeros(4, 5), &cfg, &sp).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn forcing_enters_linearly() {
        let sp = spec(2.5, 3.0, 5, 4);
        let u = random_traj(1, 4, 5, 1.0);
        let zero = ObjectiveConfig::new(0.3, 0.0, DualTrajectory::zeros(4, 5)).unwrap();
        let full = ObjectiveConfig::new(0.3, 0.0, sp.f.clone()).unwrap();
        let diff = assemble_objective(&u, &full, &sp).unwrap()
            - assemble_objective(&u, &zero, &sp).unwrap();
        let dt = sp.tmesh.dt();
        let expect: f64 = (0..4)
            .map(|n| -dt * crate::norms::pairing(sp.f.slice(n), u.slice(n), &sp.smesh))
            .sum();
        assert!((diff - expect).abs() < 1e-12);
    }

    #[test]
    fn constant_shift_moves_gradient_by_dt() {
        let sp = spec(3.0, 2.0, 4, 3);
        let u = random_traj(2, 3, 4, 1.0);
        let c = 0.7;
        let base = ObjectiveConfig::new(0.1, 0.0, sp.f.clone()).unwrap();
        let shifted = ObjectiveConfig::new(0.1, 0.0, sp.f.map(|x| x + c)).unwrap();
        let g0 = objective_gradient(&u, &base, &sp).unwrap();
        let g1 = objective_gradient(&u, &shifted, &sp).unwrap();
        let dt = sp.tmesh.dt();
        for (a, b) in g0.as_slice().iter().zip(g1.as_slice()) {
            assert!((b - a + dt * c).abs() < 1e-13);
        }
    }

    fn check_gradient(sp: &ProblemSpec, cfg: &ObjectiveConfig, seed: u64) {
        let (nt, m) = (sp.tmesh.steps(), sp.smesh.interior());
        let u = random_traj(seed, nt, m, 1.0);
        let e = random_traj(seed + 100, nt, m, 1.0);
        let g = objective_gradient(&u, cfg, sp).unwrap();
        let h = 1e-5;
        let mut up = u.clone();
        up.axpy(h, &e);
        let mut um = u.clone();
        um.axpy(-h, &e);
        let fd = (assemble_objective(&up, cfg, sp).unwrap()
            - assemble_objective(&um, cfg, sp).unwrap())
            / (2.0 * h);
        let an = sp.smesh.dx()
            * g.as_slice()
                .iter()
                .zip(e.as_slice())
                .map(|(a, b)| a * b)
                .sum::<f64>();
        assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-3), "{fd} vs {an}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let sp = spec(2.5, 3.0, 6, 5);
        for seed in 0..3 {
            let cfg = ObjectiveConfig::new(0.1, 0.0, sp.f.clone())
                .unwrap()
                .with_delta(1e-3);
            check_gradient(&sp, &cfg, seed);
            let cfg = ObjectiveConfig::new(0.1, 0.05, sp.f.clone())
                .unwrap()
                .with_delta(1e-3);
            check_gradient(&sp, &cfg, seed + 10);
        }
        let pf = PerturbedFunctional::new(0.3, 1.5).unwrap();
        let sp = spec(3.0, 2.0, 6, 5);
        let cfg = ObjectiveConfig::new(0.2, 0.0, sp.f.clone())
            .unwrap()
            .with_perturbation(Some(pf));
        check_gradient(&sp, &cfg, 7);
    }

    #[test]
    fn convex_along_segments() {
        let sp = spec(2.5, 3.0, 6, 5);
        let cfg = ObjectiveConfig::new(0.1, 0.0, sp.f.clone()).unwrap();
        for seed in 0..5 {
            let u = random_traj(seed, 5, 6, 2.0);
            let v = random_traj(seed + 50, 5, 6, 2.0);
            let (iu, iv) = (
                assemble_objective(&u, &cfg, &sp).unwrap(),
                assemble_objective(&v, &cfg, &sp).unwrap(),
            );
            for theta in [0.1, 0.5, 0.9] {
                let mut w = u.clone();
                w.scale(theta);
                w.axpy(1.0 - theta, &v);
                let iw = assemble_objective(&w, &cfg, &sp).unwrap();
                assert!(
                    iw <= theta * iu + (1.0 - theta) * iv + 1e-12 * (iu.abs() + iv.abs() + 1.0)
                );
            }
        }
    }

    #[test]
    fn zero_forcing_minimizer_is_zero() {
        let sp = spec(2.0, 2.0, 6, 5);
        let cfg = ObjectiveConfig::new(0.5, 0.0, DualTrajectory::zeros(5, 6)).unwrap();
        let (u, rep) = minimize(&cfg, &sp, &random_traj(3, 5, 6, 1.0), 1e-10, 50).unwrap();
        assert!(rep.converged);
        assert!(u.max_abs() < 1e-9);
    }

    #[test]
    fn newton_and_descent_agree_and_starts_do_not_matter() {
        let sp = spec(2.5, 3.0, 6, 6);
        let cfg = ObjectiveConfig::new(0.5, 0.0, sp.f.clone()).unwrap();
        let tol = 1e-9;
        let (u1, r1) = minimize(&cfg, &sp, &PeriodicTrajectory::zeros(6, 6), tol, 100).unwrap();
        let (u2, r2) = minimize(&cfg, &sp, &random_traj(9, 6, 6, 1.0), tol, 100).unwrap();
        assert!(r1.converged && r2.converged);
        let d = u1.sub(&u2);
        let dist = bochner_norm(
            &d,
            |s| crate::norms::norm_v(s, 2.5, &sp.smesh),
            2.5,
            &sp.tmesh,
        );
        assert!(dist <= 10.0 * tol, "{dist}");
        let (u3, r3) = minimize_with(
            &cfg,
            &sp,
            &u1.map(|x| 0.9 * x),
            1e-7,
            20_000,
            Method::GradientDescent,
        )
        .unwrap();
        assert!(r3.converged, "{r3:?}");
        assert!(u3.sub(&u1).max_abs() < 1e-4);
    }

    #[test]
    fn objective_nonincreasing_and_stationarity_is_the_equation() {
        let sp = spec(2.0, 3.0, 8, 6);
        let eps = 0.2;
        let cfg = ObjectiveConfig::new(eps, 0.0, sp.f.clone()).unwrap();
        let (u, rep) = minimize(&cfg, &sp, &PeriodicTrajectory::zeros(6, 8), 1e-11, 100).unwrap();
        assert!(rep.converged);
        assert!(rep.objective_value <= 0.0);
        let energy = sp.state_energy(DEFAULT_DELTA, None).unwrap();
        let eta = energy_gradient(&u, &energy).unwrap();
        let du = time_derivative(&u, &sp.tmesh);
        let dt = sp.tmesh.dt();
        for n in 0..6 {
            let next = sp.tmesh.wrap(n, 1);
            for i in 0..8 {
                let r = -eps * (du.slice(next)[i] - du.slice(n)[i]) / dt
                    + eps * u.slice(n)[i]
                    + eta.slice(n)[i]
                    + eps * u.slice(n)[i]
                    - sp.f.slice(n)[i];
                assert!(r.abs() < 1e-8, "{r}");
            }
        }
    }

    #[test]
    fn envelope_and_direct_modes_are_close_for_small_lambda() {
        let sp = spec(2.0, 2.0, 8, 6);
        let direct = ObjectiveConfig::new(0.3, 0.0, sp.f.clone()).unwrap();
        let env = ObjectiveConfig::new(0.3, 1e-4, sp.f.clone()).unwrap();
        let (u0, _) = minimize(&direct, &sp, &PeriodicTrajectory::zeros(6, 8), 1e-11, 50).unwrap();
        let (u1, r1) = minimize(&env, &sp, &u0, 1e-9, 500).unwrap();
        assert!(r1.converged, "{r1:?}");
        let d = bochner_norm(
            &u1.sub(&u0),
            |s| crate::norms::norm_v(s, 2.0, &sp.smesh),
            2.0,
            &sp.tmesh,
        );
        let scale = bochner_norm(
            &u0,
            |s| crate::norms::norm_v(s, 2.0, &sp.smesh),
            2.0,
            &sp.tmesh,
        );
        assert!(d <= 10.0 * 1e-4 * scale.max(1.0), "{d}");
    }

    #[test]
    fn residual_vanishes_on_zero() {
        let sp = spec(2.0, 2.0, 4, 3)
            .with_forcing(DualTrajectory::zeros(3, 4))
            .unwrap();
        assert_eq!(
            residual_ap(
                &PeriodicTrajectory::zeros(3, 4),
                &DualTrajectory::zeros(3, 4),
                &sp
            ),
            0.0
        );
    }
}
