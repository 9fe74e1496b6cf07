use alloc::vec;
use alloc::vec::Vec;

use super::duality::LpMetric;
use super::functional::ConvexFunctional;
use crate::error::{Error, Result};

/// `min_v (c/2)|v − w|²_V + s·F(v) − ⟨w*, v⟩`.
#[derive(Debug, Clone, Copy)]
pub struct ProxProblem<'a> {
    pub metric: LpMetric,
    pub metric_weight: f64,
    pub functional_weight: f64,
    pub center: &'a [f64],
    pub load: Option<&'a [f64]>,
}

impl ProxProblem<'_> {
    fn objective<F: ConvexFunctional + ?Sized>(&self, f: &F, v: &[f64]) -> Result<f64> {
        let diff: Vec<f64> = v.iter().zip(self.center).map(|(a, b)| a - b).collect();
        let mut q = self.metric_weight * self.metric.half_square(&diff)
            + self.functional_weight * f.value(v)?;
        if let Some(load) = self.load {
            q -= self.metric.pairing(load, v);
        }
        Ok(q)
    }

    fn gradient<F: ConvexFunctional + ?Sized>(&self, f: &F, v: &[f64]) -> Result<Vec<f64>> {
        let diff: Vec<f64> = v.iter().zip(self.center).map(|(a, b)| a - b).collect();
        let fm = self.metric.duality_map(&diff);
        let mut g = vec![0.0; v.len()];
        f.gradient(v, &mut g)?;
        for i in 0..v.len() {
            g[i] = self.metric_weight * fm[i] + self.functional_weight * g[i];
            if let Some(load) = self.load {
                g[i] -= load[i];
            }
        }
        Ok(g)
    }
}

/// Newton's method with Armijo backtracking for a [`ProxProblem`].
///
/// Returns the minimizer and the iteration count. Convergence is declared when
/// the `V*` norm of the gradient drops below `tol · max(1, |w*|, |s ∇F(w)|)`,
/// or when a full step no longer changes the objective beyond roundoff while
/// the gradient is within `1e3 · tol` of that target.
pub fn minimize_regularized<F: ConvexFunctional + ?Sized>(
    problem: &ProxProblem<'_>,
    f: &F,
    start: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)> {
    let metric = problem.metric;
    let mut v = start.to_vec();
    let mut g = problem.gradient(f, &v)?;
    let scale = {
        let mut g0 = vec![0.0; v.len()];
        f.gradient(problem.center, &mut g0)?;
        let fs = problem.functional_weight * metric.dual_norm(&g0);
        let ls = problem.load.map(|l| metric.dual_norm(l)).unwrap_or(0.0);
        fs.max(ls).max(1.0)
    };
    let mut q = problem.objective(f, &v)?;
    for it in 0..max_iter {
        let gnorm = metric.dual_norm(&g);
        if gnorm <= tol * scale {
            return Ok((v, it));
        }
        let diff: Vec<f64> = v.iter().zip(problem.center).map(|(a, b)| a - b).collect();
        let mut h = metric.hessian(&diff);
        h.scale(problem.metric_weight);
        h.add_scaled(problem.functional_weight, &f.hessian(&v));
        let neg: Vec<f64> = g.iter().map(|x| -x).collect();
        let mut d = match h.solve(&neg) {
            Ok(d) if d.iter().all(|x| x.is_finite()) => d,
            _ => neg.clone(),
        };
        let mut slope = metric.pairing(&g, &d);
        if !(slope < 0.0) {
            d = neg;
            slope = metric.pairing(&g, &d);
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = v.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            if let Ok(qt) = problem.objective(f, &trial) {
                let slack = 1e-15 * (q.abs() + 1.0);
                if qt <= q + 1e-4 * t * slope {
                    v = trial;
                    q = qt;
                    accepted = true;
                    break;
                }
                if t == 1.0 && (qt - q).abs() <= 16.0 * slack {
                    let gt = problem.gradient(f, &trial)?;
                    if metric.dual_norm(&gt) < gnorm {
                        v = trial;
                        q = qt;
                        accepted = true;
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        if !accepted {
            if gnorm <= 1e3 * tol * scale {
                return Ok((v, it));
            }
            return Err(Error::solver("proximal minimization", it, gnorm / scale));
        }
        g = problem.gradient(f, &v)?;
    }
    let gnorm = metric.dual_norm(&g);
    if gnorm <= 1e3 * tol * scale {
        Ok((v, max_iter))
    } else {
        Err(Error::solver(
            "proximal minimization",
            max_iter,
            gnorm / scale,
        ))
    }
}

/// Resolvent point, envelope value and Yosida gradient of a functional.
#[derive(Debug, Clone, PartialEq)]
pub struct MoreauYosida {
    /// `J_λ u = argmin_v |u − v|²_V/(2λ) + φ(v)`.
    pub prox: Vec<f64>,
    /// `φ_λ(u)`, the attained minimum.
    pub envelope: f64,
    /// `−λ⁻¹ F_V(J_λ u − u)`, an element of `∂φ(J_λ u)`.
    pub yosida_grad: Vec<f64>,
    pub iterations: usize,
}

pub fn moreau_yosida<F: ConvexFunctional + ?Sized>(
    u: &[f64],
    lambda: f64,
    f: &F,
    metric: LpMetric,
    tol: f64,
) -> Result<MoreauYosida> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::config("lambda", "must be positive"));
    }
    let problem = ProxProblem {
        metric,
        metric_weight: 1.0 / lambda,
        functional_weight: 1.0,
        center: u,
        load: None,
    };
    let (prox, iterations) = minimize_regularized(&problem, f, u, tol, 200)?;
    let diff: Vec<f64> = prox.iter().zip(u).map(|(a, b)| a - b).collect();
    let envelope = metric.half_square(&diff) / lambda + f.value(&prox)?;
    let yosida_grad = metric
        .duality_map(&diff)
        .iter()
        .map(|x| -x / lambda)
        .collect();
    Ok(MoreauYosida {
        prox,
        envelope,
        yosida_grad,
        iterations,
    })
}
