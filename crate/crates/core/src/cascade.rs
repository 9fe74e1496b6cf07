//! The regularization cascade.
//!
//! 1. [`solve_aph`]: for fixed `h`, minimize the space-time functional over a
//!    λ-schedule (Moreau–Yosida envelopes) and finally with `λ = 0`.
//! 2. [`fixed_point_solve`]: iterate `h ← β(h) = −α(u_h')` (damped Picard with
//!    Anderson extrapolation) so that `u_h` solves the ε-regularized equation.
//! 3. [`epsilon_continuation`]: drive ε down with warm starts until the defect
//!    of the unregularized equation reaches `stage_tol`.
//! 4. [`mu_path`]: for `m ≤ p`, replace `φ` by `Φ = φ + μ/(1+α)φ^{1+α}` and let
//!    `μ → 0`.
//!
//! [`direct_newton_oracle`] solves the unregularized discrete problem by a
//! monolithic Newton method for cross-checks.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::anderson::Anderson;
use crate::convex::{
    eval_psi, grad_psi, ConvexFunctional, LpMetric, PerturbedFunctional, StateEnergy,
};
use crate::error::{Error, Result};
use crate::linalg::{solve_with_rank_ones, BandedLu, RankOne};
use crate::math::{abs_pow, conjugate_exponent, powf};
use crate::norms::{bochner_norm, norm_v, norm_vstar, norm_x, norm_xstar, pairing};
use crate::problem::ProblemSpec;
use crate::trajectory::{time_derivative, DualTrajectory, PeriodicTrajectory};
use crate::variational::{
    ap_defect, energy_gradient, fixed_point_newton_step, minimize, minimize_cached, HessianCache,
    MinimizerReport, ObjectiveConfig,
};

/// Geometric sequence `start, start·ratio, …` down to `end` (inclusive up to roundoff).
pub fn geometric_schedule(start: f64, end: f64, ratio: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut v = start;
    while v >= end * (1.0 - 1e-9) && out.len() < 10_000 {
        out.push(v);
        v *= ratio;
    }
    out
}

/// How the fixed point `h = β(h)` is iterated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FixedPointMethod {
    /// Damped Picard with Anderson extrapolation of depth `anderson_depth`.
    Anderson,
    /// Newton steps through the linearized map, falling back to Anderson.
    #[default]
    Newton,
}

/// Every knob of the cascade.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct CascadeParams {
    pub epsilon_schedule: Vec<f64>,
    /// Positive λ values run before the final `λ = 0` solve.
    pub lambda_schedule: Vec<f64>,
    pub mu_schedule: Vec<f64>,
    pub alpha_exp: f64,
    pub delta: f64,
    pub omega: f64,
    pub anderson_depth: usize,
    pub fp_method: FixedPointMethod,
    /// Fixed-point tolerance relative to `max(1, |f|)`.
    pub fp_tol: f64,
    /// Target for the unregularized defect relative to `max(1, |f|)`.
    pub stage_tol: f64,
    pub max_fp_iter: usize,
    /// Relative gradient tolerance of the `λ = 0` minimizations.
    pub minimizer_tol: f64,
    pub max_newton_iter: usize,
    /// Looser tolerance and iteration cap of the envelope (λ > 0) warm-up solves.
    pub lambda_tol: f64,
    pub lambda_max_iter: usize,
    /// Route through the μ-path even when `m > p`.
    pub force_mu_path: bool,
}

impl Default for CascadeParams {
    fn default() -> Self {
        CascadeParams {
            epsilon_schedule: geometric_schedule(1.0, 1e-12, 0.1),
            lambda_schedule: vec![1e-4],
            mu_schedule: geometric_schedule(1e-1, 1e-12, 0.1),
            alpha_exp: 1.0,
            delta: crate::variational::DEFAULT_DELTA,
            omega: 0.5,
            anderson_depth: 30,
            fp_method: FixedPointMethod::Newton,
            fp_tol: 1e-9,
            stage_tol: 1e-8,
            max_fp_iter: 400,
            minimizer_tol: 1e-13,
            max_newton_iter: 60,
            lambda_tol: 1e-6,
            lambda_max_iter: 40,
            force_mu_path: false,
        }
    }
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

impl CascadeParams {
    /// Checks every type invariant; `spec` enables the exponent condition of the μ-path.
    pub fn validate(&self, spec: Option<&ProblemSpec>) -> Result<()> {
        let key = |k: &str| format!("cascade.{k}");
        if self.epsilon_schedule.is_empty()
            || !strictly_decreasing(&self.epsilon_schedule)
            || self
                .epsilon_schedule
                .iter()
                .any(|e| !(*e > 0.0 && e.is_finite()))
        {
            return Err(Error::config(
                key("epsilon_schedule"),
                "must be nonempty, positive and strictly decreasing",
            ));
        }
        if !strictly_decreasing(&self.lambda_schedule)
            || self
                .lambda_schedule
                .iter()
                .any(|l| !(*l > 0.0 && l.is_finite()))
        {
            return Err(Error::config(
                key("lambda_schedule"),
                "must be positive and strictly decreasing",
            ));
        }
        if !strictly_decreasing(&self.mu_schedule)
            || self.mu_schedule.iter().any(|m| !(*m > 0.0 && *m < 1.0))
        {
            return Err(Error::config(
                key("mu_schedule"),
                "must lie in (0, 1) and strictly decrease",
            ));
        }
        if !(self.alpha_exp > 0.0 && self.alpha_exp.is_finite()) {
            return Err(Error::config(key("alpha_exp"), "must be positive"));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::config(
                key("delta"),
                "must be finite and nonnegative",
            ));
        }
        if !(self.omega > 0.0 && self.omega <= 1.0) {
            return Err(Error::config(key("omega"), "must lie in (0, 1]"));
        }
        for (name, v) in [
            ("fp_tol", self.fp_tol),
            ("stage_tol", self.stage_tol),
            ("minimizer_tol", self.minimizer_tol),
            ("lambda_tol", self.lambda_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key(name), "must be positive"));
            }
        }
        if self.max_fp_iter == 0 || self.max_newton_iter == 0 {
            return Err(Error::config(
                key("max_fp_iter"),
                "iteration caps must be positive",
            ));
        }
        if let Some(spec) = spec {
            if (spec.needs_mu_path() || self.force_mu_path) && self.mu_schedule.is_empty() {
                return Err(Error::config(
                    key("mu_schedule"),
                    "the μ-path needs a nonempty schedule",
                ));
            }
            if (spec.needs_mu_path() || self.force_mu_path)
                && self.alpha_exp <= spec.p / spec.m - 1.0
            {
                return Err(Error::config(
                    key("alpha_exp"),
                    format!("must exceed p/m − 1 = {}", spec.p / spec.m - 1.0),
                ));
            }
            if spec.m < 2.0 && self.delta == 0.0 {
                return Err(Error::config(
                    key("delta"),
                    "m < 2 needs positive smoothing",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StageKind {
    /// One (AP)^h solve.
    Auxiliary,
    /// A converged (or abandoned) fixed point at fixed ε.
    FixedPoint,
    /// Summary of an ε-continuation at fixed μ.
    Mu,
    Newton,
}

/// Quantities bounded uniformly in ε by the a priori estimates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Apriori {
    /// `∫|u'|^p_V + ∫|α(u')|^{p'}_{V*} + ∫ψ(u')`.
    pub time_derivative_bound: f64,
    /// `ε|u|^p_{W^{1,p}(V)} + |u|^m_{L^m(X)} + ε|u|²_{L²(V)}`.
    pub energy_bound: f64,
    /// `|u|^p_{W^{1,p}(V)}`.
    pub sobolev_bound: f64,
    /// `∫|η|^{m′}_{X*} + ∫|α(u)|^{p′}_{V*}`.
    pub dual_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StageRecord {
    pub kind: StageKind,
    pub epsilon: Option<f64>,
    pub mu: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub minimizer_iterations: usize,
    /// Largest relative gradient left by an accepted inner minimization.
    pub inner_gradient: f64,
    /// `|h − β(h)|` (fixed point) or the Newton residual.
    pub fp_residual: Option<f64>,
    pub residual_history: Vec<f64>,
    pub omega: Option<f64>,
    pub omega_halvings: usize,
    /// Defect of the unregularized (possibly perturbed) equation.
    pub residual_ap: Option<f64>,
    /// `Σdt⟨α(u'), u'⟩ − Σdt⟨f, u'⟩`, nonpositive in exact arithmetic.
    pub energy_margin: Option<f64>,
    pub apriori: Option<Apriori>,
    /// `|β(h)|_{L^{p'}(V*)}` and `|h|` at the fixed point.
    pub beta_norm: Option<f64>,
    /// `|μφ^α(u)∇φ(u)|_{L^{p'}(V*)}`.
    pub mu_term: Option<f64>,
    /// Defect against the unperturbed equation on the μ-path.
    pub unperturbed_residual: Option<f64>,
}

impl StageRecord {
    fn new(kind: StageKind) -> Self {
        StageRecord {
            kind,
            epsilon: None,
            mu: None,
            converged: false,
            iterations: 0,
            minimizer_iterations: 0,
            inner_gradient: 0.0,
            fp_residual: None,
            residual_history: Vec::new(),
            omega: None,
            omega_halvings: 0,
            residual_ap: None,
            energy_margin: None,
            apriori: None,
            beta_norm: None,
            mu_term: None,
            unperturbed_residual: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolveReport {
    /// `"plain"`, `"mu"` or a single operation name.
    pub path: String,
    pub stages: Vec<StageRecord>,
    /// No stage failed.
    pub converged: bool,
    /// The final defect reached `stage_tol · max(1, |f|)`.
    pub target_met: bool,
    pub final_residual: f64,
    pub forcing_scale: f64,
    pub warnings: Vec<String>,
}

/// A trajectory with its two dual sections, recomputed from `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct StageResult {
    pub u: PeriodicTrajectory,
    /// `α(u'ₙ)`.
    pub xi: DualTrajectory,
    /// `∇E(uₙ)` for the state energy of the stage.
    pub eta: DualTrajectory,
    pub diagnostics: SolveReport,
}

impl StageResult {
    fn build(
        u: PeriodicTrajectory,
        spec: &ProblemSpec,
        energy: &StateEnergy,
        diagnostics: SolveReport,
    ) -> Result<Self> {
        let du = time_derivative(&u, &spec.tmesh);
        let xi = du.map(|s| spec.nl.alpha(s)).cast();
        let eta = energy_gradient(&u, energy)?;
        Ok(StageResult {
            u,
            xi,
            eta,
            diagnostics,
        })
    }
}

/// Shared state of one cascade run.
struct Ctx<'a> {
    spec: &'a ProblemSpec,
    params: &'a CascadeParams,
    f: &'a DualTrajectory,
    perturbation: Option<PerturbedFunctional>,
    scale: f64,
}

impl<'a> Ctx<'a> {
    fn new(
        f: &'a DualTrajectory,
        spec: &'a ProblemSpec,
        params: &'a CascadeParams,
        perturbation: Option<PerturbedFunctional>,
    ) -> Result<Self> {
        if !f.same_shape(&spec.f) {
            return Err(Error::Dimension(
                "forcing does not match the problem meshes".into(),
            ));
        }
        Ok(Ctx {
            spec,
            params,
            f,
            perturbation,
            scale: dual_norm(f, spec).max(1.0),
        })
    }

    fn energy(&self) -> Result<StateEnergy> {
        self.spec.state_energy(self.params.delta, self.perturbation)
    }
}

/// `|ξ|_{L^{p'}(0,T;V*)}`.
pub fn dual_norm(xi: &DualTrajectory, spec: &ProblemSpec) -> f64 {
    let pd = conjugate_exponent(spec.p);
    bochner_norm(xi, |s| norm_vstar(s, pd, &spec.smesh), pd, &spec.tmesh)
}

/// Solves (AP)^h from `warm`, with the λ-schedule first when `with_lambda`.
fn aph(
    ctx: &Ctx<'_>,
    h: &DualTrajectory,
    epsilon: f64,
    warm: &PeriodicTrajectory,
    with_lambda: bool,
    cache: &mut HessianCache,
    warnings: &mut Vec<String>,
) -> Result<(PeriodicTrajectory, MinimizerReport)> {
    let p = ctx.params;
    let g = ctx.f.add(h);
    let mut u = warm.clone();
    let mut total = 0;
    if with_lambda {
        for &lambda in &p.lambda_schedule {
            let cfg = ObjectiveConfig::new(epsilon, lambda, g.clone())?
                .with_delta(p.delta)
                .with_perturbation(ctx.perturbation);
            let (v, rep) = minimize(&cfg, ctx.spec, &u, p.lambda_tol, p.lambda_max_iter)?;
            if !rep.converged {
                warnings.push(format!(
                    "envelope solve at epsilon {epsilon:e}, lambda {lambda:e} stopped at relative gradient {:e}",
                    rep.final_gradient_norm
                ));
            }
            total += rep.iterations;
            u = v;
        }
    }
    let cfg = ObjectiveConfig::new(epsilon, 0.0, g)?
        .with_delta(p.delta)
        .with_perturbation(ctx.perturbation);
    let (u, mut rep) = minimize_cached(
        &cfg,
        ctx.spec,
        &u,
        p.minimizer_tol,
        p.max_newton_iter,
        cache,
    )?;
    rep.iterations += total;
    Ok((u, rep))
}

/// Unique solution of the auxiliary problem (AP)^h at fixed ε.
pub fn solve_aph(
    f: &DualTrajectory,
    h: &DualTrajectory,
    epsilon: f64,
    params: &CascadeParams,
    spec: &ProblemSpec,
) -> Result<StageResult> {
    params.validate(None)?;
    let ctx = Ctx::new(f, spec, params, None)?;
    let mut warnings = Vec::new();
    let zero = PeriodicTrajectory::zeros(spec.tmesh.steps(), spec.smesh.interior());
    let (u, rep) = aph(
        &ctx,
        h,
        epsilon,
        &zero,
        true,
        &mut HessianCache::new(),
        &mut warnings,
    )?;
    let mut rec = StageRecord::new(StageKind::Auxiliary);
    rec.epsilon = Some(epsilon);
    rec.converged = rep.converged;
    rec.iterations = rep.iterations;
    rec.minimizer_iterations = rep.iterations;
    let report = SolveReport {
        path: "aph".into(),
        stages: vec![rec],
        converged: rep.converged,
        target_met: rep.converged,
        final_residual: rep.final_gradient_norm,
        forcing_scale: ctx.scale,
        warnings,
    };
    StageResult::build(u, spec, &ctx.energy()?, report)
}

fn beta_of(u: &PeriodicTrajectory, spec: &ProblemSpec) -> DualTrajectory {
    time_derivative(u, &spec.tmesh)
        .map(|s| -spec.nl.alpha(s))
        .cast()
}

/// `β(h) = −α(u_h')`.
pub fn beta_map(
    h: &DualTrajectory,
    f: &DualTrajectory,
    epsilon: f64,
    params: &CascadeParams,
    spec: &ProblemSpec,
) -> Result<DualTrajectory> {
    let r = solve_aph(f, h, epsilon, params, spec)?;
    Ok(beta_of(&r.u, spec))
}

/// Warm state carried between stages.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    pub u: PeriodicTrajectory,
    pub h: DualTrajectory,
}

impl WarmStart {
    pub fn zeros(spec: &ProblemSpec) -> Self {
        let (n, m) = (spec.tmesh.steps(), spec.smesh.interior());
        WarmStart {
            u: PeriodicTrajectory::zeros(n, m),
            h: DualTrajectory::zeros(n, m),
        }
    }
}

/// Damped, accelerated fixed-point iteration at one ε. Updates `warm` in place.
fn fixed_point(
    ctx: &Ctx<'_>,
    epsilon: f64,
    warm: &mut WarmStart,
    warnings: &mut Vec<String>,
) -> Result<StageRecord> {
    let p = ctx.params;
    let spec = ctx.spec;
    let mut rec = StageRecord::new(StageKind::FixedPoint);
    rec.epsilon = Some(epsilon);
    rec.mu = ctx.perturbation.map(|pf| pf.mu);
    let target = p.fp_tol * ctx.scale;

    let mut cache = HessianCache::new();
    let mut h = warm.h.clone();
    let (mut u, rep) = aph(ctx, &h, epsilon, &warm.u, true, &mut cache, warnings)?;
    rec.minimizer_iterations += rep.iterations;
    let mut inner_ok = rep.converged;
    rec.inner_gradient = rep.final_gradient_norm;
    let mut r = beta_of(&u, spec).sub(&h);
    let mut rn = dual_norm(&r, spec);
    rec.residual_history.push(rn);

    let mut acc = Anderson::new(p.anderson_depth);
    acc.push(h.as_slice(), r.as_slice());
    let mut newton = p.fp_method == FixedPointMethod::Newton;
    let mut omega = if newton { 1.0 } else { p.omega };
    let mut step: Option<(DualTrajectory, PeriodicTrajectory)> = None;
    let mut it = 0;
    while rn > target && it < p.max_fp_iter {
        it += 1;
        if newton && step.is_none() {
            let cfg = ObjectiveConfig::new(epsilon, 0.0, ctx.f.add(&h))?
                .with_delta(p.delta)
                .with_perturbation(ctx.perturbation);
            match fixed_point_newton_step(&cfg, spec, &u, &r) {
                Ok(s) => step = Some(s),
                Err(e) => {
                    warnings.push(format!("fixed-point Newton step at epsilon {epsilon:e} failed ({e}); using Anderson"));
                    newton = false;
                    omega = p.omega;
                }
            }
        }
        let (h_try, warm_u) = match &step {
            Some((dh, du)) if newton => {
                let mut h_try = h.clone();
                h_try.axpy(omega, dh);
                let mut w = u.clone();
                w.axpy(omega, du);
                (h_try, w)
            }
            _ => {
                let next = acc
                    .extrapolate(omega)
                    .expect("history holds the current iterate");
                (
                    DualTrajectory::from_vec(h.steps(), h.nodes(), next)?,
                    u.clone(),
                )
            }
        };
        let (u_try, rep) = aph(ctx, &h_try, epsilon, &warm_u, false, &mut cache, warnings)?;
        rec.minimizer_iterations += rep.iterations;
        let r_try = beta_of(&u_try, spec).sub(&h_try);
        let rn_try = dual_norm(&r_try, spec);
        if rn_try <= rn {
            h = h_try;
            u = u_try;
            r = r_try;
            rn = rn_try;
            inner_ok = rep.converged;
            rec.inner_gradient = rec.inner_gradient.max(rep.final_gradient_norm);
            rec.residual_history.push(rn);
            acc.push(h.as_slice(), r.as_slice());
            step = None;
            omega = if newton {
                (2.0 * omega).min(1.0)
            } else {
                (2.0 * omega).min(p.omega)
            };
        } else {
            omega *= 0.5;
            rec.omega_halvings += 1;
            if omega < 1e-4 {
                if newton {
                    warnings.push(format!(
                        "fixed-point Newton stalled at epsilon {epsilon:e}; using Anderson"
                    ));
                    newton = false;
                    omega = p.omega;
                    continue;
                }
                if acc.history() == 0 {
                    break;
                }
                acc.clear();
                acc.push(h.as_slice(), r.as_slice());
                omega = p.omega;
            }
        }
    }
    rec.iterations = it;
    rec.omega = Some(omega);
    rec.fp_residual = Some(rn);
    rec.converged = rn <= target;
    if !inner_ok {
        warnings.push(format!(
            "inner minimization at epsilon {epsilon:e} did not reach its tolerance"
        ));
    }
    rec.beta_norm = Some(dual_norm(&h.add(&r), spec));
    warm.u = u;
    warm.h = h;
    Ok(rec)
}

/// Solution of the ε-regularized problem by iterating `β` from `h = 0`.
pub fn fixed_point_solve(
    f: &DualTrajectory,
    epsilon: f64,
    params: &CascadeParams,
    spec: &ProblemSpec,
) -> Result<StageResult> {
    params.validate(None)?;
    let ctx = Ctx::new(f, spec, params, None)?;
    let mut warm = WarmStart::zeros(spec);
    let mut warnings = Vec::new();
    let mut rec = fixed_point(&ctx, epsilon, &mut warm, &mut warnings)?;
    let energy = ctx.energy()?;
    let res = StageResult::build(warm.u, spec, &energy, SolveReport::default())?;
    annotate(&ctx, &mut rec, &res, epsilon, &energy)?;
    let converged = rec.converged;
    let final_residual = rec.residual_ap.unwrap_or(f64::NAN);
    Ok(StageResult {
        diagnostics: SolveReport {
            path: "fixed_point".into(),
            stages: vec![rec],
            converged,
            target_met: converged,
            final_residual,
            forcing_scale: ctx.scale,
            warnings,
        },
        ..res
    })
}

/// Adds defect, energy margin and a priori quantities to a record.
fn annotate(
    ctx: &Ctx<'_>,
    rec: &mut StageRecord,
    res: &StageResult,
    epsilon: f64,
    energy: &StateEnergy,
) -> Result<()> {
    let spec = ctx.spec;
    rec.residual_ap = Some(dual_norm(&ap_defect(&res.u, &res.eta, ctx.f, spec), spec));
    rec.energy_margin = Some(energy_margin(&res.u, ctx.f, spec));
    rec.apriori = Some(apriori(&res.u, &res.eta, epsilon, spec, energy)?);
    Ok(())
}

/// `Σdt⟨α(u'ₙ), u'ₙ⟩ − Σdt⟨fₙ, u'ₙ⟩`.
pub fn energy_margin(u: &PeriodicTrajectory, f: &DualTrajectory, spec: &ProblemSpec) -> f64 {
    let du = time_derivative(u, &spec.tmesh);
    let dt = spec.tmesh.dt();
    let mut s = 0.0;
    for n in 0..u.steps() {
        let d = du.slice(n);
        let a = grad_psi(d, &spec.nl);
        s += dt * (pairing(&a, d, &spec.smesh) - pairing(f.slice(n), d, &spec.smesh));
    }
    s
}

fn apriori(
    u: &PeriodicTrajectory,
    eta: &DualTrajectory,
    epsilon: f64,
    spec: &ProblemSpec,
    _energy: &StateEnergy,
) -> Result<Apriori> {
    let (p, m) = (spec.p, spec.m);
    let pd = conjugate_exponent(p);
    let md = conjugate_exponent(m);
    let mesh = &spec.smesh;
    let tm = &spec.tmesh;
    let dt = tm.dt();
    let du = time_derivative(u, tm);
    let mut t05 = 0.0;
    let mut dual = 0.0;
    for n in 0..u.steps() {
        let d = du.slice(n);
        let xi = grad_psi(d, &spec.nl);
        t05 += dt
            * (abs_pow(norm_v(d, p, mesh), p)
                + abs_pow(norm_vstar(&xi, pd, mesh), pd)
                + eval_psi(d, &spec.nl, mesh)?);
        let au = grad_psi(u.slice(n), &spec.nl);
        dual += dt
            * (abs_pow(norm_xstar(eta.slice(n), m, mesh), md)
                + abs_pow(norm_vstar(&au, pd, mesh), pd));
    }
    let lp =
        |x: &PeriodicTrajectory, r: f64| abs_pow(bochner_norm(x, |s| norm_v(s, r, mesh), r, tm), r);
    let w1p = lp(u, p) + lp(&du, p);
    let lmx = abs_pow(bochner_norm(u, |s| norm_x(s, m, mesh), m, tm), m);
    let l2v = {
        let n2 = bochner_norm(u, |s| norm_v(s, p, mesh), 2.0, tm);
        n2 * n2
    };
    Ok(Apriori {
        time_derivative_bound: t05,
        energy_bound: epsilon * w1p + lmx + epsilon * l2v,
        sobolev_bound: w1p,
        dual_bound: dual,
    })
}

/// Result of one ε-continuation: the final state and what happened on the way.
struct Continuation {
    records: Vec<StageRecord>,
    /// Index into the ε-schedule of the last converged stage.
    last_index: Option<usize>,
    last_good: Option<WarmStart>,
    residual: f64,
    target_met: bool,
    failed: bool,
}

fn continuation(
    ctx: &Ctx<'_>,
    warm: &mut WarmStart,
    start: usize,
    warnings: &mut Vec<String>,
) -> Result<Continuation> {
    let p = ctx.params;
    let energy = ctx.energy()?;
    let threshold = p.stage_tol * ctx.scale;
    let mut out = Continuation {
        records: Vec::new(),
        last_index: None,
        last_good: None,
        residual: f64::INFINITY,
        target_met: false,
        failed: false,
    };
    for (k, &eps) in p.epsilon_schedule.iter().enumerate().skip(start) {
        let mut rec = fixed_point(ctx, eps, warm, warnings)?;
        let res = StageResult::build(warm.u.clone(), ctx.spec, &energy, SolveReport::default())?;
        annotate(ctx, &mut rec, &res, eps, &energy)?;
        let r = rec.residual_ap.unwrap_or(f64::INFINITY);
        let converged = rec.converged;
        out.records.push(rec);
        if !converged {
            out.failed = true;
            warnings.push(format!("fixed point at epsilon {eps:e} did not converge"));
            if let Some(good) = &out.last_good {
                *warm = good.clone();
            }
            break;
        }
        if r > out.residual * (1.0 + 1e-6) {
            warnings.push(format!(
                "defect increased at epsilon {eps:e}: {r:e} > {:e}",
                out.residual
            ));
        }
        let stagnated = out.last_index.is_some() && r > 0.5 * out.residual;
        out.last_index = Some(k);
        out.last_good = Some(warm.clone());
        out.residual = out.residual.min(r);
        if r <= threshold {
            out.target_met = true;
            break;
        }
        if stagnated {
            warnings.push(format!("defect stagnated at {r:e} (epsilon {eps:e})"));
            break;
        }
    }
    Ok(out)
}

/// ε → 0 with warm starts, for `m > p`.
pub fn epsilon_continuation(
    f: &DualTrajectory,
    params: &CascadeParams,
    spec: &ProblemSpec,
) -> Result<StageResult> {
    params.validate(Some(spec))?;
    let ctx = Ctx::new(f, spec, params, None)?;
    let mut warm = WarmStart::zeros(spec);
    let mut warnings = Vec::new();
    if spec.needs_mu_path() {
        warnings.push("m ≤ p: the plain path lacks the coercivity the μ-path restores".into());
    }
    let c = continuation(&ctx, &mut warm, 0, &mut warnings)?;
    let energy = ctx.energy()?;
    let converged = !c.failed || c.last_good.is_some();
    let report = SolveReport {
        path: "plain".into(),
        stages: c.records,
        converged: converged && !c.failed,
        target_met: c.target_met,
        final_residual: c.residual,
        forcing_scale: ctx.scale,
        warnings,
    };
    StageResult::build(warm.u, spec, &energy, report)
}

/// `|μφ^α(uₙ)∇φ(uₙ)|` in `L^{p'}(V*)`.
pub fn mu_term(
    u: &PeriodicTrajectory,
    pf: &PerturbedFunctional,
    spec: &ProblemSpec,
    delta: f64,
) -> Result<f64> {
    let phi = spec.phi(delta)?;
    let mut t = DualTrajectory::zeros(u.steps(), u.nodes());
    for n in 0..u.steps() {
        let un = u.slice(n);
        let k = pf.mu * powf(phi.value(un)?.max(0.0), pf.alpha_exp);
        let out = t.slice_mut(n);
        phi.gradient(un, out)?;
        for v in out.iter_mut() {
            *v *= k;
        }
    }
    Ok(dual_norm(&t, spec))
}

/// The power-perturbed path `μ → 0` for `m ≤ p`.
pub fn mu_path(
    f: &DualTrajectory,
    params: &CascadeParams,
    spec: &ProblemSpec,
) -> Result<StageResult> {
    params.validate(Some(spec))?;
    if params.mu_schedule.is_empty() {
        return Err(Error::config(
            "cascade.mu_schedule",
            "must not be empty on the μ-path",
        ));
    }
    if params.alpha_exp <= spec.p / spec.m - 1.0 {
        return Err(Error::config("cascade.alpha_exp", "must exceed p/m − 1"));
    }
    let plain = spec.state_energy(params.delta, None)?;
    let mut warm = WarmStart::zeros(spec);
    let mut warnings = Vec::new();
    let mut stages = Vec::new();
    let mut start = 0;
    let mut best = f64::INFINITY;
    let mut target_met = false;
    let mut failed = false;
    let mut scale = 1.0;
    for &mu in &params.mu_schedule {
        let pf = PerturbedFunctional::new(mu, params.alpha_exp)?;
        let ctx = Ctx::new(f, spec, params, Some(pf))?;
        scale = ctx.scale;
        let c = continuation(&ctx, &mut warm, start, &mut warnings)?;
        let n_inner = c.records.len();
        stages.extend(c.records);
        let Some(last) = c.last_index else {
            failed = true;
            warnings.push(format!("no converged stage at mu {mu:e}"));
            break;
        };
        start = last;
        let eta = energy_gradient(&warm.u, &plain)?;
        let r0 = dual_norm(&ap_defect(&warm.u, &eta, f, spec), spec);
        let mut rec = StageRecord::new(StageKind::Mu);
        rec.mu = Some(mu);
        rec.epsilon = Some(params.epsilon_schedule[last]);
        rec.converged = !c.failed;
        rec.iterations = n_inner;
        rec.residual_ap = Some(c.residual);
        rec.unperturbed_residual = Some(r0);
        rec.mu_term = Some(mu_term(&warm.u, &pf, spec, params.delta)?);
        rec.energy_margin = Some(energy_margin(&warm.u, f, spec));
        stages.push(rec);
        if c.failed {
            failed = true;
            break;
        }
        let stagnated = r0 > 0.5 * best;
        best = best.min(r0);
        if r0 <= params.stage_tol * scale {
            target_met = true;
            break;
        }
        if stagnated {
            warnings.push(format!(
                "unperturbed defect stagnated at {r0:e} (mu {mu:e})"
            ));
            break;
        }
    }
    let report = SolveReport {
        path: "mu".into(),
        stages,
        converged: !failed,
        target_met,
        final_residual: best,
        forcing_scale: scale,
        warnings,
    };
    StageResult::build(warm.u, spec, &plain, report)
}

/// Dispatches to the plain path for `m > p` and to the μ-path otherwise.
pub fn solve(spec: &ProblemSpec, params: &CascadeParams) -> Result<StageResult> {
    if spec.needs_mu_path() || params.force_mu_path {
        mu_path(&spec.f, params, spec)
    } else {
        epsilon_continuation(&spec.f, params, spec)
    }
}

/// Damped Newton on `α(u'ₙ) + ∇E(uₙ) − fₙ = 0` for all `n` at once.
///
/// Failure to converge is reported in the diagnostics, not as an error.
pub fn direct_newton_oracle(
    f: &DualTrajectory,
    spec: &ProblemSpec,
    params: &CascadeParams,
    tol: f64,
) -> Result<StageResult> {
    if !f.same_shape(&spec.f) {
        return Err(Error::Dimension(
            "forcing does not match the problem meshes".into(),
        ));
    }
    let energy = spec.state_energy(params.delta, None)?;
    let (nt, m) = (spec.tmesh.steps(), spec.smesh.interior());
    let dt = spec.tmesh.dt();
    let scale = dual_norm(f, spec).max(1.0);
    let idx = |i: usize, n: usize| i * nt + n;
    let residual = |u: &PeriodicTrajectory| -> Result<(DualTrajectory, f64)> {
        let eta = energy_gradient(u, &energy)?;
        let g = ap_defect(u, &eta, f, spec);
        let norm = dual_norm(&g, spec);
        Ok((g, norm))
    };
    let mut u = PeriodicTrajectory::zeros(nt, m);
    let (mut g, mut gn) = residual(&u)?;
    let mut rec = StageRecord::new(StageKind::Newton);
    rec.residual_history.push(gn);
    let mut it = 0;
    let max_iter = params.max_newton_iter.max(50);
    while gn > tol * scale && it < max_iter {
        it += 1;
        let du = time_derivative(&u, &spec.tmesh);
        let mut jac = BandedLu::zeros(nt * m, nt);
        let mut rank_ones: Vec<RankOne> = Vec::new();
        for n in 0..nt {
            let prev = spec.tmesh.wrap(n, -1);
            let h = energy.hessian(u.slice(n));
            for i in 0..m {
                let c = spec.nl.alpha_prime(du.slice(n)[i]) / dt;
                jac.add(idx(i, n), idx(i, n), c + h.diag[i]);
                jac.add(idx(i, n), idx(i, prev), -c);
                if i + 1 < m {
                    jac.add(idx(i, n), idx(i + 1, n), h.off[i]);
                    jac.add(idx(i + 1, n), idx(i, n), h.off[i]);
                }
            }
            for r in &h.rank_ones {
                rank_ones.push(r.relocated(1.0, |i| idx(i, n)));
            }
        }
        if jac.factor().is_err() {
            break;
        }
        let mut rhs = vec![0.0; nt * m];
        for n in 0..nt {
            for i in 0..m {
                rhs[idx(i, n)] = -g.slice(n)[i];
            }
        }
        let Ok(d) = solve_with_rank_ones(|x| jac.solve_in_place(x), &rank_ones, &rhs) else {
            break;
        };
        let step = PeriodicTrajectory::from_fn(nt, m, |n, i| d[idx(i, n)]);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let mut trial = u.clone();
            trial.axpy(t, &step);
            if let Ok((gt, gtn)) = residual(&trial) {
                if gtn <= (1.0 - 1e-4 * t) * gn || (t == 1.0 && gtn <= gn) {
                    u = trial;
                    g = gt;
                    gn = gtn;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        rec.residual_history.push(gn);
    }
    rec.iterations = it;
    rec.converged = gn <= tol * scale;
    rec.fp_residual = Some(gn);
    rec.residual_ap = Some(gn);
    let report = SolveReport {
        path: "newton".into(),
        converged: rec.converged,
        target_met: rec.converged,
        final_residual: gn,
        forcing_scale: scale,
        warnings: if rec.converged {
            Vec::new()
        } else {
            vec![format!("Newton stopped at defect {gn:e}")]
        },
        stages: vec![rec],
    };
    StageResult::build(u, spec, &energy, report)
}

/// `|x|` with the `V` metric for the problem.
pub fn v_metric(spec: &ProblemSpec) -> LpMetric {
    LpMetric::new(spec.p, &spec.smesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::DiffusionField;
    use crate::math::{cos, sin};
    use crate::mesh::{SpatialMesh, TemporalMesh};
    use crate::nonlinearity::Nonlinearity;

    fn spec(p: f64, m: f64, nodes: usize, steps: usize, amp: f64) -> ProblemSpec {
        let s = SpatialMesh::unit(nodes);
        let t = TemporalMesh::unit(steps);
        let a = DiffusionField::constant(&s, 1.0).unwrap();
        let f = DualTrajectory::from_fn(steps, nodes, |n, i| {
            amp * sin(core::f64::consts::PI * s.node(i))
                * cos(2.0 * core::f64::consts::PI * t.time(n))
        });
        ProblemSpec::new(Nonlinearity::power(p).unwrap(), m, a, f, s, t).unwrap()
    }

    #[test]
    fn default_params_validate() {
        CascadeParams::default().validate(None).unwrap();
        let p = CascadeParams {
            omega: 0.0,
            ..Default::default()
        };
        assert!(
            matches!(p.validate(None), Err(Error::Config { key, .. }) if key == "cascade.omega")
        );
        let p = CascadeParams {
            epsilon_schedule: vec![1.0, 1.0],
            ..Default::default()
        };
        assert!(p.validate(None).is_err());
        let sp = spec(3.0, 2.0, 4, 4, 1.0);
        let p = CascadeParams {
            alpha_exp: 0.4,
            ..Default::default()
        };
        assert!(
            matches!(p.validate(Some(&sp)), Err(Error::Config { key, .. }) if key == "cascade.alpha_exp")
        );
    }

    #[test]
    fn schedule_is_geometric() {
        let s = geometric_schedule(1.0, 1e-4, 0.5);
        assert_eq!(s.len(), 14);
        assert!((s[13] - 0.5f64.powi(13)).abs() < 1e-18);
    }

    #[test]
    fn zero_data_gives_zero_everywhere() {
        let sp = spec(2.5, 3.0, 6, 6, 0.0);
        let params = CascadeParams::default();
        let zero = DualTrajectory::zeros(6, 6);
        let r = solve_aph(&zero, &zero, 0.1, &params, &sp).unwrap();
        assert_eq!(r.u.max_abs(), 0.0);
        assert_eq!(
            beta_map(&zero, &zero, 0.1, &params, &sp).unwrap().max_abs(),
            0.0
        );
        let r = fixed_point_solve(&zero, 0.1, &params, &sp).unwrap();
        assert_eq!(r.u.max_abs(), 0.0);
        let r = epsilon_continuation(&zero, &params, &sp).unwrap();
        assert_eq!(r.u.max_abs(), 0.0);
        assert!(r.diagnostics.converged && r.diagnostics.target_met);
        let sp2 = spec(3.0, 2.0, 6, 6, 0.0);
        let r = mu_path(&zero, &params, &sp2).unwrap();
        assert_eq!(r.u.max_abs(), 0.0);
        let r = direct_newton_oracle(&zero, &sp, &params, 1e-10).unwrap();
        assert_eq!(r.u.max_abs(), 0.0);
        assert_eq!(r.diagnostics.stages[0].iterations, 0);
    }

    #[test]
    fn solve_aph_is_deterministic() {
        let sp = spec(2.0, 3.0, 6, 6, 2.0);
        let params = CascadeParams::default();
        let h = sp.f.map(|x| -0.5 * x);
        let a = solve_aph(&sp.f, &h, 0.2, &params, &sp).unwrap();
        let b = solve_aph(&sp.f, &h, 0.2, &params, &sp).unwrap();
        assert_eq!(a.u, b.u);
    }

    #[test]
    fn fixed_point_satisfies_regularized_equation_and_energy_inequality() {
        let sp = spec(2.5, 3.0, 8, 8, 3.0);
        let params = CascadeParams::default();
        let eps = 0.05;
        let r = fixed_point_solve(&sp.f, eps, &params, &sp).unwrap();
        let rec = &r.diagnostics.stages[0];
        assert!(rec.converged, "{rec:?}");
        // α(u') − ε(α(u'))' + εα(u) + η + εF(u) = f, slice-wise
        let dt = sp.tmesh.dt();
        let metric = v_metric(&sp);
        for n in 0..8 {
            let next = sp.tmesh.wrap(n, 1);
            let fv = metric.duality_map(r.u.slice(n));
            for i in 0..8 {
                let d = r.xi.slice(n)[i] - eps * (r.xi.slice(next)[i] - r.xi.slice(n)[i]) / dt
                    + eps * sp.nl.alpha(r.u.slice(n)[i])
                    + r.eta.slice(n)[i]
                    + eps * fv[i]
                    - sp.f.slice(n)[i];
                assert!(d.abs() < 1e-7, "{d}");
            }
        }
        assert!(rec.energy_margin.unwrap() <= 1e-8 * r.diagnostics.forcing_scale);
        for w in rec.residual_history.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn continuation_defect_decreases_and_matches_newton() {
        let sp = spec(2.0, 3.0, 10, 10, 2.0);
        let params = CascadeParams::default();
        let r = epsilon_continuation(&sp.f, &params, &sp).unwrap();
        assert!(r.diagnostics.converged, "{:?}", r.diagnostics.warnings);
        assert!(r.diagnostics.target_met);
        let defects: Vec<f64> = r
            .diagnostics
            .stages
            .iter()
            .map(|s| s.residual_ap.unwrap())
            .collect();
        for w in defects.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-6), "{defects:?}");
        }
        let newton = direct_newton_oracle(&sp.f, &sp, &params, 1e-12).unwrap();
        assert!(newton.diagnostics.converged);
        let diff = r.u.sub(&newton.u).max_abs();
        assert!(
            diff <= 10.0 * (params.stage_tol + 1e-12) * r.u.max_abs().max(1.0) * 10.0,
            "{diff}"
        );
    }

    #[test]
    fn mu_path_recovers_plain_solution_when_forced() {
        let sp = spec(2.0, 3.0, 8, 8, 2.0);
        let mut params = CascadeParams::default();
        let plain = epsilon_continuation(&sp.f, &params, &sp).unwrap();
        params.force_mu_path = true;
        params.alpha_exp = 1.5;
        let mu = solve(&sp, &params).unwrap();
        assert_eq!(mu.diagnostics.path, "mu");
        assert!(mu.diagnostics.converged, "{:?}", mu.diagnostics);
        assert!(mu.u.sub(&plain.u).max_abs() < 1e-6);
    }

    #[test]
    fn hard_regime_routes_through_mu_path() {
        let sp = spec(3.0, 2.0, 8, 8, 2.0);
        let params = CascadeParams::default();
        let r = solve(&sp, &params).unwrap();
        assert_eq!(r.diagnostics.path, "mu");
        assert!(r.diagnostics.converged, "{:?}", r.diagnostics.warnings);
        assert!(r.diagnostics.target_met, "{:?}", r.diagnostics);
        let terms: Vec<f64> = r
            .diagnostics
            .stages
            .iter()
            .filter(|s| s.kind == StageKind::Mu)
            .map(|s| s.mu_term.unwrap())
            .collect();
        assert!(terms.len() >= 4);
        for w in terms.windows(2) {
            assert!(w[1] < w[0]);
        }
    }
}
