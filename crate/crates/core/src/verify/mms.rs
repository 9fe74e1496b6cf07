use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::solve_sequential;
use crate::cascade::{CascadeParams, StageResult};
use crate::convex::DiffusionField;
use crate::error::{Error, Result};
use crate::math::{abs_pow, cos, loglog_slope, sin};
use crate::mesh::{SpatialMesh, TemporalMesh};
use crate::norms::{bochner_norm, norm_v};
use crate::problem::ProblemSpec;
use crate::trajectory::{time_derivative, DualTrajectory, PeriodicTrajectory};

use core::f64::consts::PI;

/// Closed-form trajectory, zero on the boundary and periodic in time.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "type", rename_all = "snake_case"))]
pub enum ExactSolution {
    Zero,
    /// `A sin(kπx/L) sin(2πjt/T)`.
    Separable {
        amplitude: f64,
        space_mode: u32,
        time_mode: u32,
    },
}

impl ExactSolution {
    fn parts(&self, x: f64, t: f64, length: f64, period: f64) -> (f64, f64, f64, f64, f64) {
        match *self {
            ExactSolution::Zero => (0.0, 0.0, 0.0, 0.0, 0.0),
            ExactSolution::Separable {
                amplitude,
                space_mode,
                time_mode,
            } => {
                let k = space_mode as f64 * PI / length;
                let w = 2.0 * PI * time_mode as f64 / period;
                (
                    amplitude,
                    sin(k * x),
                    k * cos(k * x),
                    sin(w * t),
                    w * cos(w * t),
                )
            }
        }
    }

    pub fn value(&self, x: f64, t: f64, length: f64, period: f64) -> f64 {
        let (a, sx, _, st, _) = self.parts(x, t, length, period);
        a * sx * st
    }

    pub fn time_derivative(&self, x: f64, t: f64, length: f64, period: f64) -> f64 {
        let (a, sx, _, _, dt) = self.parts(x, t, length, period);
        a * sx * dt
    }

    pub fn space_derivative(&self, x: f64, t: f64, length: f64, period: f64) -> f64 {
        let (a, _, dx, st, _) = self.parts(x, t, length, period);
        a * dx * st
    }

    fn second_space_derivative(&self, x: f64, t: f64, length: f64, period: f64) -> f64 {
        match *self {
            ExactSolution::Zero => 0.0,
            ExactSolution::Separable { space_mode, .. } => {
                let k = space_mode as f64 * PI / length;
                -k * k * self.value(x, t, length, period)
            }
        }
    }

    pub fn sample(&self, smesh: &SpatialMesh, tmesh: &TemporalMesh) -> PeriodicTrajectory {
        let (l, t) = (smesh.length(), tmesh.period());
        PeriodicTrajectory::from_fn(tmesh.steps(), smesh.interior(), |n, i| {
            self.value(smesh.node(i), tmesh.time(n), l, t)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MmsMode {
    /// Forcing built from the solver's own discrete operators.
    DiscreteExact,
    /// Forcing from the continuous operator at the nodes.
    Continuum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MmsSpec {
    pub exact: ExactSolution,
    pub mode: MmsMode,
    /// Number of meshes in each refinement sweep, at least one.
    pub levels: usize,
}

/// `α(∂ₜu*) − ∇·(a|∇u*|^{m−2}∇u*)` on the grid of `spec`.
pub fn derived_forcing(
    exact: &ExactSolution,
    mode: MmsMode,
    spec: &ProblemSpec,
    delta: f64,
) -> Result<DualTrajectory> {
    let (sm, tm) = (&spec.smesh, &spec.tmesh);
    let (nt, m) = (tm.steps(), sm.interior());
    match mode {
        MmsMode::DiscreteExact => {
            let u = exact.sample(sm, tm);
            let du = time_derivative(&u, tm);
            let phi = spec.phi(delta)?;
            let mut f = DualTrajectory::zeros(nt, m);
            for n in 0..nt {
                let out = f.slice_mut(n);
                phi.gradient(u.slice(n), out)?;
                for (o, d) in out.iter_mut().zip(du.slice(n)) {
                    *o += spec.nl.alpha(*d);
                }
            }
            Ok(f)
        }
        MmsMode::Continuum => {
            let a = spec.a.values();
            if a.iter().any(|v| *v != a[0]) {
                return Err(Error::config(
                    "problem.diffusion",
                    "continuum forcing needs a constant coefficient",
                ));
            }
            if spec.m < 2.0 && *exact != ExactSolution::Zero {
                return Err(Error::config("problem.m", "continuum forcing needs m >= 2"));
            }
            let (l, per, mm) = (sm.length(), tm.period(), spec.m);
            Ok(DualTrajectory::from_fn(nt, m, |n, i| {
                let (x, t) = (sm.node(i), tm.time(n));
                let ux = exact.space_derivative(x, t, l, per);
                let uxx = exact.second_space_derivative(x, t, l, per);
                let flux = a[0] * (mm - 1.0) * abs_pow(ux, mm - 2.0) * uxx;
                spec.nl.alpha(exact.time_derivative(x, t, l, per)) - flux
            }))
        }
    }
}

/// One solve of a refinement study.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MmsLevel {
    /// `"joint"`, `"time"` or `"space"`.
    pub sweep: String,
    pub level: usize,
    pub nodes: usize,
    pub steps: usize,
    pub dx: f64,
    pub dt: f64,
    /// `max_n |uₙ − u*ₙ|_V`; `None` if the solve failed.
    pub error: Option<f64>,
    /// Distance to the next finer solution of the same sweep, on the coarse grid.
    pub increment: Option<f64>,
    pub residual: f64,
    pub path: String,
    pub target_met: bool,
    #[cfg_attr(
        feature = "serde",
        serde(default, skip_serializing_if = "Option::is_none")
    )]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MmsTable {
    pub mode: MmsMode,
    pub levels: Vec<MmsLevel>,
    /// Slope of the time-sweep increments against `dt`.
    pub temporal_order: Option<f64>,
    /// Slope of the space-sweep increments against `dx`.
    pub spatial_order: Option<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

fn refine_field(a: &DiffusionField, factor: usize) -> Result<DiffusionField> {
    let values = a
        .values()
        .iter()
        .flat_map(|v| core::iter::repeat_n(*v, factor))
        .collect();
    DiffusionField::new(values, a.lower(), a.upper())
}

/// One refined instance with the derived forcing.
fn instance(
    mms: &MmsSpec,
    base: &ProblemSpec,
    space_factor: usize,
    time_factor: usize,
    delta: f64,
) -> Result<ProblemSpec> {
    let sm = SpatialMesh::new(base.smesh.length(), base.smesh.cells() * space_factor - 1)?;
    let tm = TemporalMesh::new(base.tmesh.period(), base.tmesh.steps() * time_factor)?;
    let a = refine_field(&base.a, space_factor)?;
    let zero = DualTrajectory::zeros(tm.steps(), sm.interior());
    let spec = ProblemSpec::new(base.nl.clone(), base.m, a, zero, sm, tm)?;
    let f = derived_forcing(&mms.exact, mms.mode, &spec, delta)?;
    spec.with_forcing(f)
}

/// The problems of a study, each tagged with its sweep name and level.
///
/// Discrete-exact mode refines `dx` and `dt` together; continuum mode runs a
/// time sweep at the base `dx` and a space sweep at the base `dt`.
pub fn mms_plan(
    mms: &MmsSpec,
    base: &ProblemSpec,
    params: &CascadeParams,
) -> Result<Vec<(String, usize, ProblemSpec)>> {
    if mms.levels == 0 {
        return Err(Error::config("mms.levels", "must be at least 1"));
    }
    let mut out = Vec::new();
    let sweeps: &[(&str, bool, bool)] = match mms.mode {
        MmsMode::DiscreteExact => &[("joint", true, true)],
        MmsMode::Continuum => &[("time", false, true), ("space", true, false)],
    };
    for &(name, space, time) in sweeps {
        for level in 0..mms.levels {
            let k = 1usize << level;
            let spec = instance(
                mms,
                base,
                if space { k } else { 1 },
                if time { k } else { 1 },
                params.delta,
            )?;
            out.push((name.to_string(), level, spec));
        }
    }
    Ok(out)
}

/// Coarse-grid restriction: every second node and every second step.
fn restrict(fine: &PeriodicTrajectory, space: bool, time: bool) -> PeriodicTrajectory {
    let steps = if time { fine.steps() / 2 } else { fine.steps() };
    let nodes = if space {
        (fine.nodes() - 1) / 2
    } else {
        fine.nodes()
    };
    PeriodicTrajectory::from_fn(steps, nodes, |n, i| {
        let nf = if time { 2 * n } else { n };
        let i_f = if space { 2 * i + 1 } else { i };
        fine.slice(nf)[i_f]
    })
}

pub fn mms_run(mms: &MmsSpec, base: &ProblemSpec, params: &CascadeParams) -> Result<MmsTable> {
    mms_run_with(mms, base, params, |specs| solve_sequential(specs, params))
}

/// [`mms_run`] with the solves delegated to `solve_all`, which must return one
/// result per problem in order.
pub fn mms_run_with(
    mms: &MmsSpec,
    base: &ProblemSpec,
    params: &CascadeParams,
    solve_all: impl FnOnce(&[ProblemSpec]) -> Vec<Result<StageResult>>,
) -> Result<MmsTable> {
    params.validate(Some(base))?;
    let plan = mms_plan(mms, base, params)?;
    let specs: Vec<ProblemSpec> = plan.iter().map(|(_, _, s)| s.clone()).collect();
    let results = solve_all(&specs);
    if results.len() != specs.len() {
        return Err(Error::Dimension(format!(
            "{} results for {} problems",
            results.len(),
            specs.len()
        )));
    }
    let mut levels = Vec::with_capacity(plan.len());
    for ((sweep, level, spec), res) in plan.iter().zip(&results) {
        let mut row = MmsLevel {
            sweep: sweep.clone(),
            level: *level,
            nodes: spec.smesh.interior(),
            steps: spec.tmesh.steps(),
            dx: spec.smesh.dx(),
            dt: spec.tmesh.dt(),
            error: None,
            increment: None,
            residual: f64::NAN,
            path: String::new(),
            target_met: false,
            failure: None,
        };
        match res {
            Ok(r) => {
                let exact = mms.exact.sample(&spec.smesh, &spec.tmesh);
                let err = r.u.sub(&exact);
                row.error = Some(bochner_norm(
                    &err,
                    |s| norm_v(s, spec.p, &spec.smesh),
                    f64::INFINITY,
                    &spec.tmesh,
                ));
                row.residual = r.diagnostics.final_residual;
                row.path = r.diagnostics.path.clone();
                row.target_met = r.diagnostics.target_met;
            }
            Err(e) => row.failure = Some(e.to_string()),
        }
        levels.push(row);
    }
    for k in 0..plan.len().saturating_sub(1) {
        let (sweep, _, spec) = &plan[k];
        if plan[k + 1].0 != *sweep {
            continue;
        }
        if let (Ok(c), Ok(f)) = (&results[k], &results[k + 1]) {
            let (space, time) = match sweep.as_str() {
                "time" => (false, true),
                "space" => (true, false),
                _ => (true, true),
            };
            let d = c.u.sub(&restrict(&f.u, space, time));
            levels[k].increment = Some(bochner_norm(
                &d,
                |s| norm_v(s, spec.p, &spec.smesh),
                f64::INFINITY,
                &spec.tmesh,
            ));
        }
    }
    let order = |sweep: &str, h: fn(&MmsLevel) -> f64| -> Option<f64> {
        let pts: Vec<(f64, f64)> = levels
            .iter()
            .filter(|l| l.sweep == sweep)
            .filter_map(|l| l.increment.filter(|d| *d > 0.0).map(|d| (h(l), d)))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        Some(loglog_slope(&xs, &ys))
    };
    let temporal_order = order("time", |l| l.dt);
    let spatial_order = order("space", |l| l.dx);
    let tolerance = 10.0 * params.stage_tol;
    let solved = levels.iter().all(|l| l.error.is_some());
    let passed = solved
        && match mms.mode {
            MmsMode::DiscreteExact => levels
                .iter()
                .all(|l| l.error.is_some_and(|e| e <= tolerance)),
            MmsMode::Continuum => {
                temporal_order.is_some_and(|o| o >= 0.9) && spatial_order.is_some_and(|o| o >= 1.9)
            }
        };
    Ok(MmsTable {
        mode: mms.mode,
        levels,
        temporal_order,
        spatial_order,
        tolerance,
        passed,
    })
}
