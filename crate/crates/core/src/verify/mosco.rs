use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use super::solve_sequential;
use crate::cascade::{CascadeParams, StageResult};
use crate::convex::DiffusionField;
use crate::error::{Error, Result};
use crate::math::{cos, loglog_slope, sin};
use crate::norms::{bochner_norm, norm_v};
use crate::problem::ProblemSpec;
use crate::trajectory::DualTrajectory;

use core::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MoscoKind {
    /// Every instance equals the base problem.
    Identity,
    /// `aₙ = a (1 + sin(n x)/n)`.
    DiffusionPerturbation,
    /// `αₙ(s) = α(s) + s/n`.
    NonlinearityPerturbation,
    /// `fₙ = f + g/n` with a fixed smooth `g`.
    ForcingPerturbation,
    /// All three perturbations at once.
    Combined,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoscoSequenceSpec {
    pub kind: MoscoKind,
    pub n_max: usize,
    pub base: ProblemSpec,
}

/// Fixed forcing direction `g = max(1, |f|∞) sin(πx/L) cos(2πt/T)`.
fn forcing_direction(base: &ProblemSpec) -> DualTrajectory {
    let (sm, tm) = (&base.smesh, &base.tmesh);
    let amp = base.f.max_abs().max(1.0);
    DualTrajectory::from_fn(tm.steps(), sm.interior(), |n, i| {
        amp * sin(PI * sm.node(i) / sm.length()) * cos(2.0 * PI * tm.time(n) / tm.period())
    })
}

/// The `n`-th member of the sequence, checked against bounds that do not
/// depend on `n`.
pub fn mosco_instance(seq: &MoscoSequenceSpec, n: usize) -> Result<ProblemSpec> {
    if n == 0 {
        return Err(Error::config("mosco.n_max", "indices start at 1"));
    }
    let base = &seq.base;
    let nf = n as f64;
    let (diffusion, nonlinearity, forcing) = match seq.kind {
        MoscoKind::Identity => (false, false, false),
        MoscoKind::DiffusionPerturbation => (true, false, false),
        MoscoKind::NonlinearityPerturbation => (false, true, false),
        MoscoKind::ForcingPerturbation => (false, false, true),
        MoscoKind::Combined => (true, true, true),
    };
    let mut spec = base.clone();
    if diffusion {
        let (lo, hi) = (0.5 * base.a.lower(), 2.0 * base.a.upper());
        let values: Vec<f64> = base
            .a
            .values()
            .iter()
            .enumerate()
            .map(|(j, a)| a * (1.0 + sin(nf * base.smesh.cell_midpoint(j)) / nf))
            .collect();
        let field = DiffusionField::new(values, lo, hi).map_err(|e| {
            Error::config(
                "mosco.kind",
                format!("instance {n} leaves the coefficient band: {e}"),
            )
        })?;
        spec = spec.with_diffusion(field)?;
    }
    if nonlinearity {
        if base.p < 2.0 {
            return Err(Error::config(
                "mosco.kind",
                "a linear shift of α breaks the p-growth bound for p < 2",
            ));
        }
        spec = spec.with_nonlinearity(base.nl.with_linear_shift(1.0 / nf))?;
    }
    if forcing {
        let mut f = base.f.clone();
        f.axpy(1.0 / nf, &forcing_direction(base));
        spec = spec.with_forcing(f)?;
    }
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MoscoRow {
    pub n: usize,
    /// `maxₙ |uₙ − u|_{Lᵖ}`, the distance in `C([0,T]; Lᵖ)`; `None` if the solve failed.
    pub error: Option<f64>,
    pub residual: f64,
    pub target_met: bool,
    #[cfg_attr(
        feature = "serde",
        serde(default, skip_serializing_if = "Option::is_none")
    )]
    pub failure: Option<alloc::string::String>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MoscoTable {
    pub kind: MoscoKind,
    pub rows: Vec<MoscoRow>,
    pub base_residual: f64,
    /// `2 · stage_tol`, below which differences count as noise.
    pub floor: f64,
    /// Strictly decreasing wherever above the floor.
    pub monotone: bool,
    /// `e_{n_max} / e_1`.
    pub ratio: Option<f64>,
    /// Log-log slope of `e_n` against `n` over the rows above the floor.
    pub slope: Option<f64>,
    /// Identity: every error below the floor. Otherwise monotone with `ratio ≤ 1/4`.
    pub passed: bool,
    #[cfg_attr(
        feature = "serde",
        serde(default, skip_serializing_if = "Option::is_none")
    )]
    pub note: Option<alloc::string::String>,
}

pub fn mosco_experiment(seq: &MoscoSequenceSpec, params: &CascadeParams) -> Result<MoscoTable> {
    mosco_experiment_with(seq, params, |specs| solve_sequential(specs, params))
}

/// [`mosco_experiment`] with the solves delegated to `solve_all`; the base
/// problem comes first, followed by `n = 1..=n_max`.
pub fn mosco_experiment_with(
    seq: &MoscoSequenceSpec,
    params: &CascadeParams,
    solve_all: impl FnOnce(&[ProblemSpec]) -> Vec<Result<StageResult>>,
) -> Result<MoscoTable> {
    if seq.n_max == 0 {
        return Err(Error::config("mosco.n_max", "must be at least 1"));
    }
    params.validate(Some(&seq.base))?;
    let mut specs = Vec::with_capacity(seq.n_max + 1);
    specs.push(seq.base.clone());
    for n in 1..=seq.n_max {
        specs.push(mosco_instance(seq, n)?);
    }
    let results = solve_all(&specs);
    if results.len() != specs.len() {
        return Err(Error::Dimension(format!(
            "{} results for {} problems",
            results.len(),
            specs.len()
        )));
    }
    let base = match &results[0] {
        Ok(r) => r,
        Err(e) => return Err(e.clone()),
    };
    let sp = &seq.base;
    let rows: Vec<MoscoRow> = results[1..]
        .iter()
        .enumerate()
        .map(|(k, r)| match r {
            Ok(r) => MoscoRow {
                n: k + 1,
                error: Some(bochner_norm(
                    &r.u.sub(&base.u),
                    |s| norm_v(s, sp.p, &sp.smesh),
                    f64::INFINITY,
                    &sp.tmesh,
                )),
                residual: r.diagnostics.final_residual,
                target_met: r.diagnostics.target_met,
                failure: None,
            },
            Err(e) => MoscoRow {
                n: k + 1,
                error: None,
                residual: f64::NAN,
                target_met: false,
                failure: Some(e.to_string()),
            },
        })
        .collect();
    let floor = 2.0 * params.stage_tol;
    let errors: Option<Vec<f64>> = rows.iter().map(|r| r.error).collect();
    let (monotone, ratio, slope) = match &errors {
        Some(e) => {
            let monotone = e.windows(2).all(|w| w[1] < w[0] || w[1] <= floor);
            let ratio = (e[0] > 0.0).then(|| e[e.len() - 1] / e[0]);
            let pts: Vec<(f64, f64)> = e
                .iter()
                .enumerate()
                .filter(|(_, v)| **v > floor)
                .map(|(k, v)| ((k + 1) as f64, *v))
                .collect();
            let slope = (pts.len() >= 2).then(|| {
                let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
                loglog_slope(&xs, &ys)
            });
            (monotone, ratio, slope)
        }
        None => (false, None, None),
    };
    let passed = match (&errors, seq.kind) {
        (Some(e), MoscoKind::Identity) => e.iter().all(|v| *v <= floor),
        (Some(_), _) => monotone && ratio.is_some_and(|r| r <= 0.25),
        (None, _) => false,
    };
    let note = (errors.is_some() && !monotone && ratio.is_some_and(|r| r < 1.0)).then(|| {
        "errors shrink but not monotonically: consistent with convergence along a subsequence"
            .into()
    });
    Ok(MoscoTable {
        kind: seq.kind,
        rows,
        base_residual: base.diagnostics.final_residual,
        floor,
        monotone,
        ratio,
        slope,
        passed,
        note,
    })
}
