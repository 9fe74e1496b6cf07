//! Uniform meshes: a Dirichlet interval in space and a periodic grid in time.

use crate::error::{Error, Result};

/// Interval `[0, L]` with `M` interior nodes and homogeneous Dirichlet ghosts.
///
/// Node `i` (0-based) sits at `x = (i + 1)·dx`. Cell `j ∈ 0..=M` spans
/// `[j·dx, (j + 1)·dx]`, so there are `M + 1` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpatialMesh {
    length: f64,
    interior: usize,
}

impl SpatialMesh {
    pub fn new(length: f64, interior: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::config("problem.length", "must be a positive number"));
        }
        if interior < 1 {
            return Err(Error::config(
                "problem.interior_nodes",
                "must be at least 1",
            ));
        }
        Ok(SpatialMesh { length, interior })
    }

    pub fn unit(interior: usize) -> Self {
        SpatialMesh::new(1.0, interior).expect("unit interval with at least one node")
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn interior(&self) -> usize {
        self.interior
    }

    pub fn cells(&self) -> usize {
        self.interior + 1
    }

    pub fn dx(&self) -> f64 {
        self.length / (self.interior as f64 + 1.0)
    }

    pub fn node(&self, i: usize) -> f64 {
        (i as f64 + 1.0) * self.dx()
    }

    pub fn cell_midpoint(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dx()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.interior).map(move |i| self.node(i))
    }
}

/// Periodic time grid `t_n = n·dt`, `n ∈ 0..N`, with `t_N ≡ t_0`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TemporalMesh {
    period: f64,
    steps: usize,
}

impl TemporalMesh {
    pub fn new(period: f64, steps: usize) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::config("problem.period", "must be a positive number"));
        }
        if steps < 2 {
            return Err(Error::config("problem.time_steps", "must be at least 2"));
        }
        Ok(TemporalMesh { period, steps })
    }

    pub fn unit(steps: usize) -> Self {
        TemporalMesh::new(1.0, steps).expect("unit period with at least two steps")
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.period / self.steps as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }

    /// Index `n + offset` reduced modulo `N`.
    #[inline]
    pub fn wrap(&self, n: usize, offset: isize) -> usize {
        (n as isize + offset).rem_euclid(self.steps as isize) as usize
    }
}
