use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::Check;
use crate::cascade::{dual_norm, energy_margin, CascadeParams, StageKind, StageResult};
use crate::convex::{
    eval_psi, fenchel_psi_star, grad_psi, moreau_yosida, phi_power_eval_grad, ConvexFunctional,
    LpMetric, PerturbedFunctional,
};
use crate::error::Result;
use crate::norms::{bochner_norm, norm_v, pairing};
use crate::problem::ProblemSpec;
use crate::rng;
use crate::trajectory::{time_derivative, PeriodicTrajectory};
use crate::variational::{ap_defect, energy_gradient};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InvariantReport {
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl InvariantReport {
    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.clone())
            .collect()
    }
}

/// `Σₙ dt⟨ηₙ, u'ₙ⟩` over one period; zero for the continuous chain rule.
pub fn chain_rule_sum(
    u: &PeriodicTrajectory,
    eta: &crate::trajectory::DualTrajectory,
    spec: &ProblemSpec,
) -> f64 {
    let du = time_derivative(u, &spec.tmesh);
    let dt = spec.tmesh.dt();
    (0..u.steps())
        .map(|n| dt * pairing(eta.slice(n), du.slice(n), &spec.smesh))
        .sum()
}

/// `u` plus uniform noise in `[−noise, noise]`.
pub fn corrupt(u: &PeriodicTrajectory, noise: f64, seed: u64) -> PeriodicTrajectory {
    let mut g = rng::seeded(seed);
    let field = rng::uniform_field(&mut g, u.as_slice().len(), noise);
    let mut out = u.clone();
    for (o, e) in out.as_mut_slice().iter_mut().zip(field) {
        *o += e;
    }
    out
}

fn push(checks: &mut Vec<Check>, name: &str, r: Result<(f64, f64)>) {
    checks.push(match r {
        Ok((v, b)) => Check::new(name, v, b),
        Err(e) => Check::failed(name, e.to_string()),
    });
}

/// Slices used by the pointwise convex-analysis checks.
fn sample_slices(n: usize) -> Vec<usize> {
    let mut v: Vec<usize> = [0, n / 4, n / 2, 3 * n / 4]
        .into_iter()
        .filter(|k| *k < n)
        .collect();
    v.dedup();
    v
}

/// Evaluates the equation, energy, chain-rule and convex-analysis invariants on
/// `result`. Dual sections are recomputed from `result.u`.
pub fn invariant_suite(
    result: &StageResult,
    spec: &ProblemSpec,
    params: &CascadeParams,
) -> InvariantReport {
    let mut checks = Vec::new();
    let u = &result.u;
    let sm = &spec.smesh;
    let scale = dual_norm(&spec.f, spec).max(1.0);
    let p = spec.p;
    let du = time_derivative(u, &spec.tmesh);
    let dt = spec.tmesh.dt();
    let nt = u.steps();

    let energy = match spec.state_energy(params.delta, None) {
        Ok(e) => e,
        Err(e) => {
            checks.push(Check::failed("setup", e.to_string()));
            return InvariantReport {
                checks,
                passed: false,
            };
        }
    };
    let eta = match energy_gradient(u, &energy) {
        Ok(e) => e,
        Err(e) => {
            checks.push(Check::failed("setup", e.to_string()));
            return InvariantReport {
                checks,
                passed: false,
            };
        }
    };
    let residual = dual_norm(&ap_defect(u, &eta, &spec.f, spec), spec);
    let reported = result.diagnostics.final_residual;
    let floor = params.stage_tol * scale;
    let reference = if reported.is_finite() {
        reported.max(floor)
    } else {
        floor
    };
    checks.push(Check::new("stationarity", residual, 10.0 * reference));

    let du_norm = bochner_norm(&du, |s| norm_v(s, p, sm), p, &spec.tmesh);
    checks.push(Check::new(
        "energy_inequality",
        energy_margin(u, &spec.f, spec),
        1e-8 * scale + residual * du_norm,
    ));

    let stage_margins: Vec<f64> = result
        .diagnostics
        .stages
        .iter()
        .filter(|r| r.kind == StageKind::FixedPoint && r.converged)
        .filter_map(|r| r.energy_margin)
        .collect();
    if !stage_margins.is_empty() {
        let worst = stage_margins
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        checks.push(Check::new("stage_energy_inequality", worst, 1e-8 * scale));
    }

    // ⟨ηₙ, uₙ − uₙ₋₁⟩ ≥ φ(uₙ) − φ(uₙ₋₁) telescopes to a nonnegative loop sum
    let chain = chain_rule_sum(u, &eta, spec);
    let mut c = Check::new(
        "chain_rule_sign",
        -chain,
        1e-12 * (1.0 + chain.abs()) + 1e-14,
    );
    c.note = Some(format!("loop sum {chain:e} at dt {dt:e}"));
    checks.push(c);

    push(
        &mut checks,
        "fenchel_young",
        (|| {
            let mut worst: f64 = 0.0;
            for n in 0..nt {
                let d = du.slice(n);
                let xi = grad_psi(d, &spec.nl);
                let psi = eval_psi(d, &spec.nl, sm)?;
                let star = fenchel_psi_star(&xi, &spec.nl, sm)?.value;
                worst = worst
                    .max((psi + star - pairing(&xi, d, sm)).abs() / (1.0 + psi.abs() + star.abs()));
            }
            Ok((worst, 1e-8))
        })(),
    );

    push(
        &mut checks,
        "legendre_fenchel",
        (|| {
            let xi: Vec<Vec<f64>> = (0..nt).map(|n| grad_psi(du.slice(n), &spec.nl)).collect();
            let star: Vec<f64> = xi
                .iter()
                .map(|x| fenchel_psi_star(x, &spec.nl, sm).map(|s| s.value))
                .collect::<Result<_>>()?;
            // increment k pairs ξₖ − ξₖ₋₁ with u'ₖ; its symmetric Bregman bound pairs with u'ₖ − u'ₖ₋₁
            let mut lhs = vec![0.0; nt];
            let mut sym = 0.0;
            for k in 1..nt {
                let dxi: Vec<f64> = xi[k].iter().zip(&xi[k - 1]).map(|(a, b)| a - b).collect();
                lhs[k] = pairing(&dxi, du.slice(k), sm);
                let dd: Vec<f64> = du
                    .slice(k)
                    .iter()
                    .zip(du.slice(k - 1))
                    .map(|(a, b)| a - b)
                    .collect();
                sym += pairing(&dxi, &dd, sm);
            }
            let mut worst = f64::NEG_INFINITY;
            for n1 in 0..nt {
                let mut s = 0.0;
                for n2 in n1 + 1..nt {
                    s += lhs[n2];
                    worst = worst.max(s - (star[n2] - star[n1]));
                }
            }
            let mag = star.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            Ok((worst.max(0.0), sym + 1e-10 * (1.0 + mag)))
        })(),
    );

    let metric = LpMetric::new(p, sm);
    push(
        &mut checks,
        "duality_identities",
        (|| {
            let mut worst: f64 = 0.0;
            for v in u.slices() {
                let n = metric.norm(v);
                if n == 0.0 {
                    continue;
                }
                let f = metric.duality_map(v);
                worst = worst.max((metric.pairing(&f, v) - n * n).abs() / (n * n));
                worst = worst.max((metric.dual_norm(&f) - n).abs() / n);
            }
            Ok((worst, 1e-10))
        })(),
    );

    let lambdas = [1.0, 0.1, 0.01];
    push(
        &mut checks,
        "yosida_sandwich",
        (|| {
            let mut worst = f64::NEG_INFINITY;
            for n in sample_slices(nt) {
                let v = u.slice(n);
                let phi_u = energy.value(v)?;
                let tol = 1e-10 * (1.0 + phi_u.abs());
                for &l in &lambdas {
                    let my = moreau_yosida(v, l, &energy, metric, 1e-13)?;
                    let phi_j = energy.value(&my.prox)?;
                    worst = worst
                        .max((phi_j - my.envelope) / tol)
                        .max((my.envelope - phi_u) / tol);
                }
            }
            Ok((worst.max(0.0), 1.0))
        })(),
    );

    push(
        &mut checks,
        "envelope_monotonicity",
        (|| {
            let mut worst = f64::NEG_INFINITY;
            for n in sample_slices(nt) {
                let v = u.slice(n);
                let env: Vec<f64> = lambdas
                    .iter()
                    .map(|&l| moreau_yosida(v, l, &energy, metric, 1e-13).map(|m| m.envelope))
                    .collect::<Result<_>>()?;
                // lambdas are decreasing, so envelopes must be nondecreasing
                for w in env.windows(2) {
                    worst = worst.max(w[0] - w[1] - 1e-10 * (1.0 + w[1].abs()));
                }
            }
            Ok((worst.max(0.0), 0.0))
        })(),
    );

    push(
        &mut checks,
        "gradient_monotonicity",
        (|| {
            let mut worst = f64::NEG_INFINITY;
            let m = u.nodes();
            let (mut ga, mut gb) = (vec![0.0; m], vec![0.0; m]);
            for n in 0..nt {
                let (a, b) = (u.slice(n), u.slice(spec.tmesh.wrap(n, 1)));
                let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                energy.gradient(a, &mut ga)?;
                energy.gradient(b, &mut gb)?;
                let dg: Vec<f64> = ga.iter().zip(&gb).map(|(x, y)| x - y).collect();
                let tol = 1e-12 * (1.0 + metric.dual_norm(&dg) * metric.norm(&diff));
                worst = worst.max(-pairing(&dg, &diff, sm) - tol);
                let pa = grad_psi(a, &spec.nl);
                let pb = grad_psi(b, &spec.nl);
                let dp: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x - y).collect();
                worst = worst.max(-pairing(&dp, &diff, sm) - tol);
            }
            Ok((worst.max(0.0), 0.0))
        })(),
    );

    push(
        &mut checks,
        "perturbed_gradient_identity",
        (|| {
            let pf = PerturbedFunctional::new(0.5, params.alpha_exp)?;
            let phi = spec.phi(params.delta)?;
            let mut worst: f64 = 0.0;
            let mut g = vec![0.0; u.nodes()];
            for n in sample_slices(nt) {
                let v = u.slice(n);
                let (_, gp) = phi_power_eval_grad(v, &pf, &phi)?;
                phi.gradient(v, &mut g)?;
                let k = pf.factor(phi.value(v)?);
                for (a, b) in gp.iter().zip(&g) {
                    worst = worst.max((a - k * b).abs() / (1.0 + (k * b).abs()));
                }
            }
            Ok((worst, 1e-14))
        })(),
    );

    let histories: Vec<&Vec<f64>> = result
        .diagnostics
        .stages
        .iter()
        .filter(|r| r.kind == StageKind::FixedPoint)
        .map(|r| &r.residual_history)
        .collect();
    if !histories.is_empty() {
        let worst = histories
            .iter()
            .flat_map(|h| h.windows(2).map(|w| w[1] - w[0]))
            .fold(0.0_f64, f64::max);
        checks.push(Check::new("fixed_point_monotone", worst, 0.0));
    }

    let apriori: Vec<[f64; 4]> = result
        .diagnostics
        .stages
        .iter()
        .filter_map(|r| r.apriori)
        .map(|a| {
            [
                a.time_derivative_bound,
                a.energy_bound,
                a.sobolev_bound,
                a.dual_bound,
            ]
        })
        .collect();
    if let Some(first) = apriori.first() {
        let mut growth: f64 = 0.0;
        for q in &apriori {
            for k in 0..4 {
                let g = if q[k].is_finite() {
                    q[k] / (first[k] + 1.0)
                } else {
                    f64::INFINITY
                };
                growth = growth.max(g);
            }
        }
        let mut c = Check::new("apriori_bounded", growth, 1e3);
        c.note = Some("largest stage quantity relative to the first stage".into());
        checks.push(c);
    }

    if result.diagnostics.path == "plain" {
        let defects: Vec<f64> = result
            .diagnostics
            .stages
            .iter()
            .filter(|r| r.kind == StageKind::FixedPoint && r.converged)
            .filter_map(|r| r.residual_ap)
            .collect();
        let worst = defects
            .windows(2)
            .map(|w| (w[1] - w[0] * (1.0 + 1e-6)).max(0.0) / w[0].max(1e-300))
            .fold(0.0_f64, f64::max);
        checks.push(Check::new("defect_trend", worst, 0.0));
    }

    let passed = checks.iter().all(|c| c.passed);
    InvariantReport { checks, passed }
}

/// Outcome of corrupting a converged solution.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NegativeControl {
    pub noise: f64,
    pub clean_residual: f64,
    pub corrupted_residual: f64,
    pub ratio: f64,
    /// Names of the suite checks the corrupted solution fails.
    pub failed_checks: Vec<String>,
    /// The defect grew more than a hundredfold and the suite flagged it.
    pub passed: bool,
}

/// Adds `noise` to `result.u` and reruns the defect and the invariant suite.
pub fn negative_control(
    result: &StageResult,
    spec: &ProblemSpec,
    params: &CascadeParams,
    noise: f64,
    seed: u64,
) -> Result<NegativeControl> {
    let energy = spec.state_energy(params.delta, None)?;
    let defect = |u: &PeriodicTrajectory| -> Result<f64> {
        let eta = energy_gradient(u, &energy)?;
        Ok(dual_norm(&ap_defect(u, &eta, &spec.f, spec), spec))
    };
    let clean_residual = defect(&result.u)?;
    let bad = corrupt(&result.u, noise, seed);
    let corrupted_residual = defect(&bad)?;
    let corrupted = StageResult {
        u: bad,
        xi: result.xi.clone(),
        eta: result.eta.clone(),
        diagnostics: result.diagnostics.clone(),
    };
    let report = invariant_suite(&corrupted, spec, params);
    let ratio = corrupted_residual / clean_residual.max(f64::MIN_POSITIVE);
    let failed_checks = report.failures();
    Ok(NegativeControl {
        noise,
        clean_residual,
        corrupted_residual,
        ratio,
        passed: ratio > 100.0 && failed_checks.iter().any(|c| c == "stationarity"),
        failed_checks,
    })
}
