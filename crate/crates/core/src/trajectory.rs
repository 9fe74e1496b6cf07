//! Space-time grid values with periodic time indexing.

use alloc::vec;
use alloc::vec::Vec;
use core::marker::PhantomData;

use crate::error::{Error, Result};
use crate::mesh::TemporalMesh;

/// Marker for primal values (the unknown `u` and its time derivative).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Primal;

/// Marker for dual values paired with primal ones through `⟨ξ, u⟩ = Σᵢ dx ξᵢ uᵢ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dual;

/// `N × M` array stored slice-major: slice `n` holds the `M` interior nodes at `t_n`.
///
/// Periodicity is structural: slice indices are taken modulo `N`, so there is
/// no separate copy of `u(T)`.
#[derive(Debug, PartialEq)]
pub struct Trajectory<K> {
    steps: usize,
    nodes: usize,
    values: Vec<f64>,
    kind: PhantomData<K>,
}

pub type PeriodicTrajectory = Trajectory<Primal>;
pub type DualTrajectory = Trajectory<Dual>;

impl<K> Clone for Trajectory<K> {
    fn clone(&self) -> Self {
        Trajectory {
            steps: self.steps,
            nodes: self.nodes,
            values: self.values.clone(),
            kind: PhantomData,
        }
    }
}

impl<K> Trajectory<K> {
    pub fn zeros(steps: usize, nodes: usize) -> Self {
        Trajectory {
            steps,
            nodes,
            values: vec![0.0; steps * nodes],
            kind: PhantomData,
        }
    }

    pub fn from_vec(steps: usize, nodes: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != steps * nodes {
            return Err(Error::Dimension(alloc::format!(
                "expected {} values for {steps} slices of {nodes} nodes, got {}",
                steps * nodes,
                values.len()
            )));
        }
        Ok(Trajectory {
            steps,
            nodes,
            values,
            kind: PhantomData,
        })
    }

    /// Fills slice `n`, node `i` with `f(n, i)`.
    pub fn from_fn(steps: usize, nodes: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(steps * nodes);
        for n in 0..steps {
            for i in 0..nodes {
                values.push(f(n, i));
            }
        }
        Trajectory {
            steps,
            nodes,
            values,
            kind: PhantomData,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// Slice `n mod N`.
    pub fn slice(&self, n: usize) -> &[f64] {
        let n = n % self.steps;
        &self.values[n * self.nodes..(n + 1) * self.nodes]
    }

    pub fn slice_mut(&mut self, n: usize) -> &mut [f64] {
        let n = n % self.steps;
        &mut self.values[n * self.nodes..(n + 1) * self.nodes]
    }

    pub fn slices(&self) -> core::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.nodes)
    }

    pub fn same_shape<L>(&self, other: &Trajectory<L>) -> bool {
        self.steps == other.steps && self.nodes == other.nodes
    }

    /// Reinterprets the values under a different marker.
    pub fn cast<L>(self) -> Trajectory<L> {
        Trajectory {
            steps: self.steps,
            nodes: self.nodes,
            values: self.values,
            kind: PhantomData,
        }
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Trajectory {
            steps: self.steps,
            nodes: self.nodes,
            values: self.values.iter().map(|v| f(*v)).collect(),
            kind: PhantomData,
        }
    }

    /// `self += a · other`.
    pub fn axpy(&mut self, a: f64, other: &Self) {
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            *x += a * y;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for x in &mut self.values {
            *x *= a;
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Backward difference with periodic wrap: slice `n` is `(u_n − u_{n−1 mod N}) / dt`.
///
/// Summing the output over one period telescopes to the zero field.
pub fn time_derivative(u: &PeriodicTrajectory, tmesh: &TemporalMesh) -> PeriodicTrajectory {
    let dt = tmesh.dt();
    let steps = u.steps();
    Trajectory::from_fn(steps, u.nodes(), |n, i| {
        let prev = if n == 0 { steps - 1 } else { n - 1 };
        (u.slice(n)[i] - u.slice(prev)[i]) / dt
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math;

    #[test]
    fn constant_trajectory_has_zero_derivative() {
        let t = TemporalMesh::unit(8);
        let u = PeriodicTrajectory::from_fn(8, 5, |_, i| i as f64 + 0.5);
        assert_eq!(time_derivative(&u, &t).max_abs(), 0.0);
    }

    #[test]
    fn sinusoid_derivative_is_linear_in_spatial_profile() {
        let steps = 12;
        let t = TemporalMesh::new(2.0, steps).unwrap();
        let w = [0.3, -1.2, 2.0];
        let s = |n: usize| math::sin(2.0 * core::f64::consts::PI * n as f64 / steps as f64);
        let u = PeriodicTrajectory::from_fn(steps, 3, |n, i| s(n) * w[i]);
        let du = time_derivative(&u, &t);
        for n in 0..steps {
            let prev = (n + steps - 1) % steps;
            for i in 0..3 {
                let expected = (s(n) - s(prev)) / t.dt() * w[i];
                assert!((du.slice(n)[i] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn derivative_telescopes_over_period() {
        let t = TemporalMesh::new(0.7, 9);
        let t = t.unwrap();
        let u = PeriodicTrajectory::from_fn(9, 4, |n, i| ((n * 7 + i * 3) % 5) as f64 - 1.5);
        let du = time_derivative(&u, &t);
        for i in 0..4 {
            let total: f64 = (0..9).map(|n| du.slice(n)[i]).sum();
            assert!(total.abs() < 1e-12);
        }
    }

    #[test]
    fn slices_wrap() {
        let u = PeriodicTrajectory::from_fn(3, 2, |n, i| (10 * n + i) as f64);
        assert_eq!(u.slice(3), u.slice(0));
        assert_eq!(u.slice(5)[1], 21.0);
    }
}
