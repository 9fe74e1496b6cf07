use alloc::vec::Vec;

use crate::convex::{eval_psi, grad_psi};
use crate::error::Result;
use crate::math::{abs_pow, conjugate_exponent, powi};
use crate::norms::{norm_v, norm_vstar, norm_x, norm_xstar};
use crate::problem::ProblemSpec;
use crate::rng;

/// Inequalities in the order of [`GrowthRow::constants`].
pub const GROWTH_LABELS: [&str; 10] =
    ["A1", "A2", "A3", "A4", "A5", "A6", "AW1", "A7", "A8", "AW2"];

/// Realized constants `max LHS / (RHS + 1)` over the samples of one magnitude.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GrowthRow {
    pub magnitude: f64,
    pub constants: [f64; 10],
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GrowthReport {
    pub rows: Vec<GrowthRow>,
    /// Column-wise maximum over all rows.
    pub overall: [f64; 10],
    pub all_finite: bool,
}

/// Samples `sample_count` uniform fields at each magnitude `10^k`,
/// `k = −2..=2`, and records the smallest constants for which the growth
/// conditions on `ψ`, `φ` and their derivatives hold on the samples.
pub fn growth_audit(
    spec: &ProblemSpec,
    sample_count: usize,
    seed: u64,
    delta: f64,
) -> Result<GrowthReport> {
    let (p, m) = (spec.p, spec.m);
    let (pd, md) = (conjugate_exponent(p), conjugate_exponent(m));
    let sm = &spec.smesh;
    let phi = spec.phi(delta)?;
    let mut g = rng::seeded(seed);
    let mut eta = alloc::vec![0.0; sm.interior()];
    let mut rows = Vec::new();
    for k in -2..=2 {
        let mag = powi(10.0, k);
        let mut c = [0.0_f64; 10];
        for _ in 0..sample_count.max(1) {
            let u = rng::uniform_field(&mut g, sm.interior(), mag);
            let up = abs_pow(norm_v(&u, p, sm), p);
            let psi = eval_psi(&u, &spec.nl, sm)?;
            let dpsi = abs_pow(norm_vstar(&grad_psi(&u, &spec.nl), pd, sm), pd);
            let ux = abs_pow(norm_x(&u, m, sm), m);
            let ph = phi.value(&u)?;
            phi.gradient(&u, &mut eta)?;
            let et = abs_pow(norm_xstar(&eta, m, sm), md);
            let ratios = [
                up / (psi + 1.0),
                dpsi / (up + 1.0),
                ux / (ph + 1.0),
                et / (ux + 1.0),
                dpsi / (psi + 1.0),
                psi / (up + 1.0),
                up / (dpsi + 1.0),
                et / (ph + 1.0),
                ph / (ux + 1.0),
                ux / (et + 1.0),
            ];
            for (ci, r) in c.iter_mut().zip(ratios) {
                *ci = ci.max(r);
            }
        }
        rows.push(GrowthRow {
            magnitude: mag,
            constants: c,
        });
    }
    let mut overall = [0.0_f64; 10];
    for r in &rows {
        for (o, v) in overall.iter_mut().zip(r.constants) {
            *o = o.max(v);
        }
    }
    let all_finite = overall.iter().all(|v| v.is_finite());
    Ok(GrowthReport {
        rows,
        overall,
        all_finite,
    })
}
