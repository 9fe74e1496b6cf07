use super::functional::ConvexFunctional;
use super::perturbed::{Perturbed, PerturbedFunctional};
use super::phi::PhiConfig;
use crate::error::Result;
use crate::linalg::SliceHessian;

/// The state energy a solve actually uses: `φ`, or `Φ` on the `m ≤ p` path.
#[derive(Debug, Clone, PartialEq)]
pub struct StateEnergy {
    pub phi: PhiConfig,
    pub perturbation: Option<PerturbedFunctional>,
}

impl StateEnergy {
    pub fn plain(phi: PhiConfig) -> Self {
        StateEnergy {
            phi,
            perturbation: None,
        }
    }

    pub fn perturbed(phi: PhiConfig, pf: PerturbedFunctional) -> Self {
        StateEnergy {
            phi,
            perturbation: Some(pf),
        }
    }

    /// `(1 + μφ^α(u))`, or 1 without perturbation.
    pub fn factor(&self, u: &[f64]) -> Result<f64> {
        match &self.perturbation {
            None => Ok(1.0),
            Some(pf) => Ok(pf.factor(self.phi.value(u)?)),
        }
    }
}

impl ConvexFunctional for StateEnergy {
    fn dim(&self) -> usize {
        self.phi.dim()
    }

    fn weight(&self) -> f64 {
        self.phi.mesh.dx()
    }

    fn value(&self, u: &[f64]) -> Result<f64> {
        match self.perturbation {
            None => self.phi.value(u),
            Some(pf) => Perturbed {
                base: &self.phi,
                pf,
            }
            .value(u),
        }
    }

    fn gradient(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        match self.perturbation {
            None => self.phi.gradient(u, out),
            Some(pf) => Perturbed {
                base: &self.phi,
                pf,
            }
            .gradient(u, out),
        }
    }

    fn hessian(&self, u: &[f64]) -> SliceHessian {
        match self.perturbation {
            None => self.phi.hessian(u),
            Some(pf) => Perturbed {
                base: &self.phi,
                pf,
            }
            .hessian(u),
        }
    }
}
