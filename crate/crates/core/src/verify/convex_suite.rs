use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use super::invariants::InvariantReport;
use super::Check;
use crate::convex::{
    eval_psi, fenchel_psi_star, grad_psi, moreau_yosida, phi_power_eval_grad, resolvent_phi_power,
    DiffusionField, LpMetric, PerturbedFunctional, PhiConfig,
};
use crate::error::Result;
use crate::mesh::SpatialMesh;
use crate::norms::pairing;
use crate::problem::ProblemSpec;
use crate::rng;

pub const SUITE_EXPONENTS: [f64; 4] = [1.5, 2.0, 3.0, 4.0];
pub const SUITE_LAMBDAS: [f64; 3] = [1.0, 0.1, 0.01];

fn push(checks: &mut Vec<Check>, name: &str, r: Result<(f64, f64)>) {
    checks.push(match r {
        Ok((v, b)) => Check::new(name, v, b),
        Err(e) => Check::failed(name, e.to_string()),
    });
}

/// Root of `λ(2+λ)² = 1/2` by bisection on `[0, 1/2]`.
pub fn scalar_fixed_point_oracle() -> f64 {
    let g = |l: f64| l * (2.0 + l) * (2.0 + l) - 0.5;
    let (mut lo, mut hi) = (0.0, 0.5);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Pointwise convex-analysis identities on `fields` seeded random slices of
/// the instance's mesh, independent of any solve.
pub fn convex_suite(spec: &ProblemSpec, delta: f64, fields: usize, seed: u64) -> InvariantReport {
    let mut checks = Vec::new();
    let sm = &spec.smesh;
    let m = sm.interior();
    let mut g = rng::seeded(seed);
    let samples: Vec<Vec<f64>> = (0..fields)
        .map(|_| rng::uniform_field(&mut g, m, 1.0))
        .collect();

    push(
        &mut checks,
        "duality_identities",
        (|| {
            let mut worst: f64 = 0.0;
            for &r in &SUITE_EXPONENTS {
                let metric = LpMetric::new(r, sm);
                for v in &samples {
                    let n = metric.norm(v);
                    if n == 0.0 {
                        continue;
                    }
                    let f = metric.duality_map(v);
                    worst = worst.max((metric.pairing(&f, v) - n * n).abs() / (n * n));
                    worst = worst.max((metric.dual_norm(&f) - n).abs() / n);
                }
            }
            Ok((worst, 1e-10))
        })(),
    );

    let envelopes: Result<Vec<Vec<(f64, f64, f64)>>> = (|| {
        let phi = spec.phi(delta)?;
        let metric = LpMetric::new(spec.p, sm);
        samples
            .iter()
            .map(|v| {
                let phi_u = phi.value(v)?;
                SUITE_LAMBDAS
                    .iter()
                    .map(|&l| {
                        let my = moreau_yosida(v, l, &phi, metric, 1e-13)?;
                        Ok((phi.value(&my.prox)?, my.envelope, phi_u))
                    })
                    .collect()
            })
            .collect()
    })();
    match envelopes {
        Ok(rows) => {
            let mut sandwich = f64::NEG_INFINITY;
            let mut mono = f64::NEG_INFINITY;
            for row in &rows {
                for &(phi_j, env, phi_u) in row {
                    let tol = 1e-10 * (1.0 + phi_u.abs());
                    sandwich = sandwich.max((phi_j - env) / tol).max((env - phi_u) / tol);
                }
                for w in row.windows(2) {
                    mono = mono.max(w[0].1 - w[1].1 - 1e-10 * (1.0 + w[1].1.abs()));
                }
            }
            let mut c = Check::new("yosida_sandwich", sandwich.max(0.0), 1.0);
            c.note = Some(format!("{} fields × λ ∈ {:?}", rows.len(), SUITE_LAMBDAS));
            checks.push(c);
            checks.push(Check::new("envelope_monotonicity", mono.max(0.0), 0.0));
        }
        Err(e) => {
            checks.push(Check::failed("yosida_sandwich", e.to_string()));
            checks.push(Check::failed("envelope_monotonicity", e.to_string()));
        }
    }

    push(
        &mut checks,
        "fenchel_young",
        (|| {
            let mut worst: f64 = 0.0;
            for v in &samples {
                let xi = grad_psi(v, &spec.nl);
                let psi = eval_psi(v, &spec.nl, sm)?;
                let star = fenchel_psi_star(&xi, &spec.nl, sm)?.value;
                worst = worst
                    .max((psi + star - pairing(&xi, v, sm)).abs() / (1.0 + psi.abs() + star.abs()));
            }
            Ok((worst, 1e-8))
        })(),
    );

    push(
        &mut checks,
        "perturbed_gradient_fd",
        (|| {
            let phi = spec.phi(delta)?;
            let pf = PerturbedFunctional::new(0.5, 1.0)?;
            let mut worst: f64 = 0.0;
            let h = 1e-6;
            for v in &samples {
                let e = rng::uniform_field(&mut g, m, 1.0);
                let shifted =
                    |s: f64| -> Vec<f64> { v.iter().zip(&e).map(|(a, b)| a + s * b).collect() };
                let fd = (pf.value(phi.value(&shifted(h))?) - pf.value(phi.value(&shifted(-h))?))
                    / (2.0 * h);
                let (_, grad) = phi_power_eval_grad(v, &pf, &phi)?;
                let an = pairing(&grad, &e, sm);
                worst = worst.max((fd - an).abs() / (1.0 + an.abs()));
            }
            Ok((worst, 1e-6))
        })(),
    );

    push(
        &mut checks,
        "resolvent_scalar",
        (|| {
            let mesh = SpatialMesh::new(2.0, 1)?;
            let phi = PhiConfig::new(DiffusionField::constant(&mesh, 0.5)?, 2.0, 0.0, mesh)?;
            let pf = PerturbedFunctional::model(1.0, 1.0)?;
            let r =
                resolvent_phi_power(&[0.0], &[1.0], &pf, &phi, LpMetric::new(2.0, &mesh), 1e-12)?;
            Ok(((r.lambda - scalar_fixed_point_oracle()).abs(), 1e-6))
        })(),
    );

    let passed = checks.iter().all(|c| c.passed);
    InvariantReport { checks, passed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::TemporalMesh;
    use crate::nonlinearity::Nonlinearity;
    use crate::trajectory::DualTrajectory;

    #[test]
    fn oracle_root() {
        let l = scalar_fixed_point_oracle();
        assert!((l * (2.0 + l) * (2.0 + l) - 0.5).abs() < 1e-14);
        assert!((l - 0.112).abs() < 1e-3);
    }

    #[test]
    fn suite_passes_on_power_instance() {
        let s = SpatialMesh::unit(12);
        let t = TemporalMesh::unit(4);
        let spec = ProblemSpec::new(
            Nonlinearity::power(2.5).unwrap(),
            3.0,
            DiffusionField::from_fn(&s, |x| 1.0 + 0.5 * x).unwrap(),
            DualTrajectory::zeros(4, 12),
            s,
            t,
        )
        .unwrap();
        let rep = convex_suite(&spec, 1e-6, 20, 3);
        assert!(rep.passed, "{:?}", rep.checks);
        assert_eq!(rep.checks.len(), 6);
    }
}
