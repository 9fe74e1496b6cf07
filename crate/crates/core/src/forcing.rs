//! Forcing terms `f(x, t)` and their sampling on the space-time grid.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{cos, sin};
use crate::mesh::{SpatialMesh, TemporalMesh};
use crate::trajectory::DualTrajectory;
use core::f64::consts::PI;

/// `amplitude · sin(kπx/L) · cos(2π j t/T + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SineTerm {
    pub amplitude: f64,
    pub space_mode: f64,
    pub time_mode: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub phase: f64,
}

impl SineTerm {
    pub fn eval(&self, x: f64, t: f64, length: f64, period: f64) -> f64 {
        self.amplitude
            * sin(self.space_mode * PI * x / length)
            * cos(2.0 * PI * self.time_mode * t / period + self.phase)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ForcingSpec {
    Zero,
    /// Sum of separable sine/cosine products.
    Sines(Vec<SineTerm>),
    /// Values on the grid, slice-major (`N × M`).
    Grid {
        steps: usize,
        nodes: usize,
        values: Vec<f64>,
    },
}

/// Samples `f(xᵢ, tₙ)` on the grid.
pub fn sample_forcing(
    spec: &ForcingSpec,
    smesh: &SpatialMesh,
    tmesh: &TemporalMesh,
) -> Result<DualTrajectory> {
    let (n, m) = (tmesh.steps(), smesh.interior());
    match spec {
        ForcingSpec::Zero => Ok(DualTrajectory::zeros(n, m)),
        ForcingSpec::Sines(terms) => {
            for t in terms {
                if ![t.amplitude, t.space_mode, t.time_mode, t.phase]
                    .iter()
                    .all(|v| v.is_finite())
                {
                    return Err(Error::config("problem.forcing", "non-finite sine term"));
                }
            }
            Ok(DualTrajectory::from_fn(n, m, |k, i| {
                let (x, t) = (smesh.node(i), tmesh.time(k));
                terms
                    .iter()
                    .map(|s| s.eval(x, t, smesh.length(), tmesh.period()))
                    .sum()
            }))
        }
        ForcingSpec::Grid {
            steps,
            nodes,
            values,
        } => {
            if *steps != n || *nodes != m {
                return Err(Error::Dimension(format!(
                    "forcing grid is {steps}×{nodes}, meshes need {n}×{m}"
                )));
            }
            let f = DualTrajectory::from_vec(n, m, values.clone())?;
            if !f.is_finite() {
                return Err(Error::InvalidInput(
                    "forcing grid has non-finite values".into(),
                ));
            }
            Ok(f)
        }
    }
}
