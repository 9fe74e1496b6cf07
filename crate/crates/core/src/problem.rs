//! One concrete instance of the periodic problem.

use alloc::format;

use crate::convex::{DiffusionField, PerturbedFunctional, PhiConfig, StateEnergy};
use crate::error::{Error, Result};
use crate::mesh::{SpatialMesh, TemporalMesh};
use crate::nonlinearity::Nonlinearity;
use crate::trajectory::DualTrajectory;

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub p: f64,
    pub m: f64,
    pub nl: Nonlinearity,
    pub a: DiffusionField,
    pub f: DualTrajectory,
    pub smesh: SpatialMesh,
    pub tmesh: TemporalMesh,
}

impl ProblemSpec {
    pub fn new(
        nl: Nonlinearity,
        m: f64,
        a: DiffusionField,
        f: DualTrajectory,
        smesh: SpatialMesh,
        tmesh: TemporalMesh,
    ) -> Result<Self> {
        let p = nl.p();
        if !(m.is_finite() && m > 1.0) {
            return Err(Error::config(
                "problem.m",
                format!("must exceed 1, got {m}"),
            ));
        }
        if a.cells() != smesh.cells() {
            return Err(Error::config(
                "problem.diffusion",
                format!("{} cell values for {} cells", a.cells(), smesh.cells()),
            ));
        }
        if f.steps() != tmesh.steps() || f.nodes() != smesh.interior() {
            return Err(Error::Dimension(format!(
                "forcing is {}×{}, meshes need {}×{}",
                f.steps(),
                f.nodes(),
                tmesh.steps(),
                smesh.interior()
            )));
        }
        if !f.is_finite() {
            return Err(Error::InvalidInput("forcing has non-finite values".into()));
        }
        Ok(ProblemSpec {
            p,
            m,
            nl,
            a,
            f,
            smesh,
            tmesh,
        })
    }

    /// `m ≤ p`: the plain ε-continuation lacks the coercivity the cascade
    /// needs and the power-perturbed path is used.
    pub fn needs_mu_path(&self) -> bool {
        self.m <= self.p
    }

    pub fn phi(&self, delta: f64) -> Result<PhiConfig> {
        PhiConfig::new(self.a.clone(), self.m, delta, self.smesh)
    }

    pub fn state_energy(
        &self,
        delta: f64,
        perturbation: Option<PerturbedFunctional>,
    ) -> Result<StateEnergy> {
        let phi = self.phi(delta)?;
        Ok(match perturbation {
            None => StateEnergy::plain(phi),
            Some(pf) => StateEnergy::perturbed(phi, pf),
        })
    }

    /// Same instance with a different forcing.
    pub fn with_forcing(&self, f: DualTrajectory) -> Result<Self> {
        ProblemSpec::new(
            self.nl.clone(),
            self.m,
            self.a.clone(),
            f,
            self.smesh,
            self.tmesh,
        )
    }

    pub fn with_diffusion(&self, a: DiffusionField) -> Result<Self> {
        ProblemSpec::new(
            self.nl.clone(),
            self.m,
            a,
            self.f.clone(),
            self.smesh,
            self.tmesh,
        )
    }

    pub fn with_nonlinearity(&self, nl: Nonlinearity) -> Result<Self> {
        ProblemSpec::new(
            nl,
            self.m,
            self.a.clone(),
            self.f.clone(),
            self.smesh,
            self.tmesh,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> (SpatialMesh, TemporalMesh, DiffusionField) {
        let s = SpatialMesh::unit(4);
        let t = TemporalMesh::unit(3);
        let a = DiffusionField::constant(&s, 1.0).unwrap();
        (s, t, a)
    }

    #[test]
    fn routes_by_exponents() {
        let (s, t, a) = base();
        let f = DualTrajectory::zeros(3, 4);
        let spec = ProblemSpec::new(
            Nonlinearity::power(2.0).unwrap(),
            3.0,
            a.clone(),
            f.clone(),
            s,
            t,
        )
        .unwrap();
        assert!(!spec.needs_mu_path());
        let spec = ProblemSpec::new(Nonlinearity::power(3.0).unwrap(), 2.0, a, f, s, t).unwrap();
        assert!(spec.needs_mu_path());
    }

    #[test]
    fn invalid_m_names_key() {
        let (s, t, a) = base();
        let r = ProblemSpec::new(
            Nonlinearity::identity(),
            0.5,
            a,
            DualTrajectory::zeros(3, 4),
            s,
            t,
        );
        match r {
            Err(Error::Config { key, .. }) => assert_eq!(key, "problem.m"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn forcing_shape_checked() {
        let (s, t, a) = base();
        let r = ProblemSpec::new(
            Nonlinearity::identity(),
            2.0,
            a,
            DualTrajectory::zeros(2, 4),
            s,
            t,
        );
        assert!(matches!(r, Err(Error::Dimension(_))));
    }
}
