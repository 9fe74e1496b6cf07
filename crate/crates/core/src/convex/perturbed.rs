use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::duality::LpMetric;
use super::functional::ConvexFunctional;
use super::prox::{minimize_regularized, ProxProblem};
use crate::error::{Error, Result};
use crate::linalg::{RankOne, SliceHessian};
use crate::math::powf;

/// Weight `μ` and exponent of `Φ = φ + μ/(1+α)·φ^{1+α}`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PerturbedFunctional {
    pub mu: f64,
    pub alpha_exp: f64,
}

impl PerturbedFunctional {
    /// Checked constructor: `μ ∈ (0, 1)`, `alpha_exp > 0`.
    pub fn new(mu: f64, alpha_exp: f64) -> Result<Self> {
        if !(mu > 0.0 && mu < 1.0) {
            return Err(Error::config(
                "cascade.mu_schedule",
                format!("mu must lie in (0, 1), got {mu}"),
            ));
        }
        PerturbedFunctional::model(mu, alpha_exp)
    }

    /// Accepts any `μ ≥ 0`, for limit checks and scalar models.
    pub fn model(mu: f64, alpha_exp: f64) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::config("mu", "must be finite and nonnegative"));
        }
        if !(alpha_exp > 0.0 && alpha_exp.is_finite()) {
            return Err(Error::config(
                "cascade.alpha_exp",
                format!("must be positive, got {alpha_exp}"),
            ));
        }
        Ok(PerturbedFunctional { mu, alpha_exp })
    }

    /// `1 + μ φ^α`, the factor multiplying `∂φ`.
    pub fn factor(&self, phi: f64) -> f64 {
        1.0 + self.mu * powf(phi.max(0.0), self.alpha_exp)
    }

    pub fn value(&self, phi: f64) -> f64 {
        let a = self.alpha_exp;
        phi + self.mu / (1.0 + a) * powf(phi.max(0.0), 1.0 + a)
    }
}

/// `Φ` built over any convex functional.
#[derive(Debug, Clone, Copy)]
pub struct Perturbed<'a, F: ?Sized> {
    pub base: &'a F,
    pub pf: PerturbedFunctional,
}

impl<F: ConvexFunctional + ?Sized> ConvexFunctional for Perturbed<'_, F> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn weight(&self) -> f64 {
        self.base.weight()
    }

    fn value(&self, u: &[f64]) -> Result<f64> {
        Ok(self.pf.value(self.base.value(u)?))
    }

    fn gradient(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        let phi = self.base.value(u)?;
        self.base.gradient(u, out)?;
        let k = self.pf.factor(phi);
        for g in out.iter_mut() {
            *g *= k;
        }
        Ok(())
    }

    fn hessian(&self, u: &[f64]) -> SliceHessian {
        let phi = self.base.value(u).unwrap_or(0.0);
        let mut h = self.base.hessian(u);
        h.scale(self.pf.factor(phi));
        if phi > 0.0 && self.pf.mu > 0.0 {
            let mut g = vec![0.0; u.len()];
            if self.base.gradient(u, &mut g).is_ok() {
                let a = self.pf.alpha_exp;
                let coef = self.pf.mu * a * powf(phi, a - 1.0) * self.base.weight();
                h.rank_ones.push(RankOne::dense(coef, g));
            }
        }
        h
    }
}

/// `(Φ(u), (1 + μφ(u)^α) ∇φ(u))`.
pub fn phi_power_eval_grad<F: ConvexFunctional + ?Sized>(
    u: &[f64],
    pf: &PerturbedFunctional,
    phi: &F,
) -> Result<(f64, Vec<f64>)> {
    let value = phi.value(u)?;
    let mut grad = vec![0.0; u.len()];
    phi.gradient(u, &mut grad)?;
    let k = pf.factor(value);
    for g in &mut grad {
        *g *= k;
    }
    Ok((pf.value(value), grad))
}

/// Solution of `F_V(u − w) + (1 + μφ^α(u)) ∂φ(u) ∋ w*`.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolvent {
    pub u: Vec<f64>,
    /// Scalar fixed point `λ* = μ φ^α(u_{λ*})`.
    pub lambda: f64,
    /// `g(λ*) = μ φ^α(u_{λ*}) − λ*`.
    pub defect: f64,
    pub bisection_steps: usize,
}

/// Reduces the nonlinear resolvent of `Φ` to a scalar root-finding problem.
///
/// For fixed `λ ≥ 0` the auxiliary equation `F_V(u − w) + (1+λ)∂φ(u) ∋ w*` is
/// the optimality condition of a strictly convex problem; its solution `u_λ`
/// makes `λ ↦ μφ^α(u_λ)` nonincreasing, so `g(λ) = μφ^α(u_λ) − λ` changes sign
/// on `[0, μφ^α(u₀)]` and bisection finds the fixed point.
pub fn resolvent_phi_power<F: ConvexFunctional + ?Sized>(
    w: &[f64],
    wstar: &[f64],
    pf: &PerturbedFunctional,
    phi: &F,
    metric: LpMetric,
    tol: f64,
) -> Result<Resolvent> {
    if !(tol > 0.0) {
        return Err(Error::config("tol", "must be positive"));
    }
    let inner_tol = (tol * 1e-3).max(1e-14);
    let solve = |lambda: f64, start: &[f64]| -> Result<(Vec<f64>, f64)> {
        let problem = ProxProblem {
            metric,
            metric_weight: 1.0,
            functional_weight: 1.0 + lambda,
            center: w,
            load: Some(wstar),
        };
        let (u, _) = minimize_regularized(&problem, phi, start, inner_tol, 200)?;
        let g = pf.mu * powf(phi.value(&u)?.max(0.0), pf.alpha_exp) - lambda;
        Ok((u, g))
    };
    let (u0, g0) = solve(0.0, w)?;
    if g0 < -tol {
        return Err(Error::Bracket(format!("g(0) = {g0:e} is negative")));
    }
    if g0 <= tol {
        return Ok(Resolvent {
            u: u0,
            lambda: 0.0,
            defect: g0,
            bisection_steps: 0,
        });
    }
    let mut lo = 0.0;
    let mut hi = g0;
    let (mut u_hi, g_hi) = solve(hi, &u0)?;
    if g_hi > tol {
        return Err(Error::Bracket(format!("g({hi:e}) = {g_hi:e} is positive")));
    }
    if g_hi.abs() <= tol {
        return Ok(Resolvent {
            u: u_hi,
            lambda: hi,
            defect: g_hi,
            bisection_steps: 0,
        });
    }
    let mut u_lo = u0;
    for step in 1..=200 {
        let mid = 0.5 * (lo + hi);
        let (u_mid, g_mid) = solve(mid, &u_lo)?;
        if g_mid.abs() <= tol || hi - lo <= 1e-16 * hi.max(1.0) {
            return Ok(Resolvent {
                u: u_mid,
                lambda: mid,
                defect: g_mid,
                bisection_steps: step,
            });
        }
        if g_mid > 0.0 {
            lo = mid;
            u_lo = u_mid;
        } else {
            hi = mid;
            u_hi = u_mid;
        }
    }
    let _ = u_hi;
    Err(Error::solver("resolvent bisection", 200, hi - lo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::phi::{DiffusionField, PhiConfig};
    use crate::mesh::SpatialMesh;
    use crate::rng;

    fn scalar_quadratic() -> PhiConfig {
        let mesh = SpatialMesh::new(2.0, 1).unwrap();
        PhiConfig::new(
            DiffusionField::constant(&mesh, 0.5).unwrap(),
            2.0,
            0.0,
            mesh,
        )
        .unwrap()
    }

    #[test]
    fn scalar_value_and_gradient() {
        let f = scalar_quadratic();
        let pf = PerturbedFunctional::model(1.0, 1.0).unwrap();
        let (v, g) = phi_power_eval_grad(&[2.0], &pf, &f).unwrap();
        assert!((v - 4.0).abs() < 1e-14);
        assert!((g[0] - 6.0).abs() < 1e-14);
    }

    #[test]
    fn vanishing_weight_recovers_phi() {
        let mesh = SpatialMesh::unit(6);
        let f = PhiConfig::new(
            DiffusionField::constant(&mesh, 1.0).unwrap(),
            3.0,
            1e-6,
            mesh,
        )
        .unwrap();
        let u = [0.1, 0.4, -0.2, 0.3, 0.0, 0.2];
        let (v, g) =
            phi_power_eval_grad(&u, &PerturbedFunctional::model(0.0, 1.5).unwrap(), &f).unwrap();
        let mut g0 = vec![0.0; 6];
        f.gradient(&u, &mut g0).unwrap();
        assert_eq!(v, f.value(&u).unwrap());
        assert_eq!(g, g0);
    }

    #[test]
    fn gradient_and_hessian_match_differences() {
        let mesh = SpatialMesh::unit(8);
        let f = PhiConfig::new(
            DiffusionField::from_fn(&mesh, |x| 1.0 + x).unwrap(),
            2.5,
            1e-4,
            mesh,
        )
        .unwrap();
        let pf = PerturbedFunctional::new(0.5, 1.5).unwrap();
        let pert = Perturbed { base: &f, pf };
        let mut r = rng::seeded(31);
        for _ in 0..20 {
            let u = rng::uniform_field(&mut r, 8, 0.5);
            let e = rng::uniform_field(&mut r, 8, 1.0);
            let h = 1e-5;
            let up: Vec<f64> = u.iter().zip(&e).map(|(a, b)| a + h * b).collect();
            let um: Vec<f64> = u.iter().zip(&e).map(|(a, b)| a - h * b).collect();
            let fd = (pert.value(&up).unwrap() - pert.value(&um).unwrap()) / (2.0 * h);
            let (_, g) = phi_power_eval_grad(&u, &pf, &f).unwrap();
            let an = crate::norms::pairing(&g, &e, &mesh);
            assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-2));

            let (mut gp, mut gm) = (vec![0.0; 8], vec![0.0; 8]);
            pert.gradient(&up, &mut gp).unwrap();
            pert.gradient(&um, &mut gm).unwrap();
            let hv = pert.hessian(&u).apply(&e);
            for i in 0..8 {
                let fdh = (gp[i] - gm[i]) / (2.0 * h);
                assert!((fdh - hv[i]).abs() <= 1e-5 * (1.0 + fdh.abs()));
            }
        }
    }

    #[test]
    fn resolvent_scalar_fixed_point() {
        let f = scalar_quadratic();
        let metric = LpMetric::new(2.0, &f.mesh);
        let pf = PerturbedFunctional::model(1.0, 1.0).unwrap();
        let r = resolvent_phi_power(&[0.0], &[1.0], &pf, &f, metric, 1e-12).unwrap();
        // u_λ = 1/(2+λ): residual of λ(2+λ)² = 1/2
        let l = r.lambda;
        assert!((l * (2.0 + l) * (2.0 + l) - 0.5).abs() < 1e-10);
        assert!((r.u[0] - 1.0 / (2.0 + l)).abs() < 1e-10);
    }

    #[test]
    fn zero_weight_gives_plain_resolvent() {
        let f = scalar_quadratic();
        let metric = LpMetric::new(2.0, &f.mesh);
        let pf = PerturbedFunctional::model(0.0, 1.0).unwrap();
        let r = resolvent_phi_power(&[0.5], &[1.0], &pf, &f, metric, 1e-12).unwrap();
        assert_eq!(r.lambda, 0.0);
        // (u − 0.5) + u = 1
        assert!((r.u[0] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_range_weights() {
        assert!(PerturbedFunctional::new(1.0, 1.0).is_err());
        assert!(PerturbedFunctional::new(0.5, 0.0).is_err());
        assert!(PerturbedFunctional::model(-0.1, 1.0).is_err());
    }
}
