use alloc::vec::Vec;

use crate::linalg::{RankOne, SliceHessian};
use crate::math::{abs_pow, powf, signed_pow};
use crate::mesh::SpatialMesh;
use crate::norms::lp_norm;

/// Discrete `L^r` space with nodal weight `dx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpMetric {
    pub exponent: f64,
    pub weight: f64,
}

impl LpMetric {
    pub fn new(exponent: f64, mesh: &SpatialMesh) -> Self {
        LpMetric {
            exponent,
            weight: mesh.dx(),
        }
    }

    pub fn norm(&self, v: &[f64]) -> f64 {
        lp_norm(v, self.exponent, self.weight)
    }

    pub fn dual_norm(&self, xi: &[f64]) -> f64 {
        lp_norm(
            xi,
            crate::math::conjugate_exponent(self.exponent),
            self.weight,
        )
    }

    pub fn pairing(&self, xi: &[f64], v: &[f64]) -> f64 {
        self.weight * xi.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
    }

    /// `|v|²/2`, whose gradient is the duality map.
    pub fn half_square(&self, v: &[f64]) -> f64 {
        let n = self.norm(v);
        0.5 * n * n
    }

    /// `F(v)ᵢ = |v|^{2−r} |vᵢ|^{r−2} vᵢ`, with `F(0) = 0`.
    pub fn duality_map(&self, v: &[f64]) -> Vec<f64> {
        let r = self.exponent;
        if r == 2.0 {
            return v.to_vec();
        }
        let s = self.norm(v);
        if s == 0.0 {
            return alloc::vec![0.0; v.len()];
        }
        let scale = powf(s, 2.0 - r);
        v.iter().map(|x| scale * signed_pow(*x, r)).collect()
    }

    /// Derivative of the duality map at `w`: a diagonal plus one rank-one term.
    ///
    /// Not defined at `w = 0` for `r ≠ 2`; the identity is returned there.
    /// For `r < 2` the diagonal is evaluated at `|wᵢ| ≥ 1e-12·|w|`.
    pub fn hessian(&self, w: &[f64]) -> SliceHessian {
        let n = w.len();
        let r = self.exponent;
        let mut h = SliceHessian::zeros(n);
        let s = self.norm(w);
        if r == 2.0 || s == 0.0 {
            h.add_identity(1.0);
            return h;
        }
        let floor = 1e-12 * s;
        let base = powf(s, 2.0 - r) * (r - 1.0);
        for i in 0..n {
            let a = if r < 2.0 {
                w[i].abs().max(floor)
            } else {
                w[i].abs()
            };
            h.diag[i] = base * abs_pow(a, r - 2.0);
        }
        let g: Vec<f64> = w.iter().map(|x| signed_pow(*x, r)).collect();
        let coef = (2.0 - r) * powf(s, 2.0 - 2.0 * r) * self.weight;
        h.rank_ones.push(RankOne::dense(coef, g));
        h
    }
}

/// Duality map of the discrete `L^r` space on `mesh`.
pub fn duality_map(v: &[f64], r: f64, mesh: &SpatialMesh) -> Vec<f64> {
    LpMetric::new(r, mesh).duality_map(v)
}
