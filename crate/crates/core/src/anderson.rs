//! Anderson acceleration for fixed-point iterations `x ← g(x)`.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{DenseLu, DenseMatrix};

/// Keeps the last `depth` differences of iterates and residuals and
/// extrapolates the damped Picard update.
#[derive(Debug, Clone)]
pub struct Anderson {
    depth: usize,
    last: Option<(Vec<f64>, Vec<f64>)>,
    dx: VecDeque<Vec<f64>>,
    dr: VecDeque<Vec<f64>>,
}

impl Anderson {
    pub fn new(depth: usize) -> Self {
        Anderson {
            depth,
            last: None,
            dx: VecDeque::new(),
            dr: VecDeque::new(),
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Number of stored differences.
    pub fn history(&self) -> usize {
        self.dx.len()
    }

    pub fn clear(&mut self) {
        self.last = None;
        self.dx.clear();
        self.dr.clear();
    }

    /// Records an accepted iterate and its residual `r = g(x) − x`.
    pub fn push(&mut self, x: &[f64], r: &[f64]) {
        if let Some((px, pr)) = self.last.take().filter(|_| self.depth > 0) {
            self.dx
                .push_back(x.iter().zip(&px).map(|(a, b)| a - b).collect());
            self.dr
                .push_back(r.iter().zip(&pr).map(|(a, b)| a - b).collect());
            if self.dx.len() > self.depth {
                self.dx.pop_front();
                self.dr.pop_front();
            }
        }
        self.last = Some((x.to_vec(), r.to_vec()));
    }

    /// Candidate `x̄ + ω r̄` from the last pushed iterate, where `x̄`, `r̄` is
    /// the combination of stored iterates with least residual.
    pub fn extrapolate(&self, omega: f64) -> Option<Vec<f64>> {
        let (x, r) = self.last.as_ref()?;
        let mut out: Vec<f64> = x.iter().zip(r).map(|(a, b)| a + omega * b).collect();
        let k = self.dr.len();
        if k == 0 {
            return Some(out);
        }
        let mut gram = DenseMatrix::zeros(k, k);
        let mut rhs = vec![0.0; k];
        let mut trace = 0.0;
        for a in 0..k {
            for b in 0..=a {
                let v = dot(&self.dr[a], &self.dr[b]);
                gram.set(a, b, v);
                gram.set(b, a, v);
            }
            trace += gram.get(a, a);
            rhs[a] = dot(&self.dr[a], r);
        }
        if !(trace > 0.0) {
            return Some(out);
        }
        for a in 0..k {
            gram.add(a, a, 1e-12 * trace);
        }
        let Ok(lu) = DenseLu::factor(gram) else {
            return Some(out);
        };
        lu.solve_in_place(&mut rhs);
        if !rhs.iter().all(|g| g.is_finite()) {
            return Some(out);
        }
        for (j, gamma) in rhs.iter().enumerate() {
            for i in 0..out.len() {
                out[i] -= gamma * (self.dx[j][i] + omega * self.dr[j][i]);
            }
        }
        Some(out)
    }

    /// Pushes `(x, r)` and returns the next candidate with damping `omega`.
    pub fn next(&mut self, x: &[f64], r: &[f64], omega: f64) -> Vec<f64> {
        self.push(x, r);
        match self.extrapolate(omega) {
            Some(v) => v,
            None => x.iter().zip(r).map(|(a, b)| a + omega * b).collect(),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn affine(x: &[f64]) -> Vec<f64> {
        // g(x) = A x + b with spectral radius above one in one direction
        vec![
            -1.5 * x[0] + 1.0,
            0.5 * x[1] + 0.3 * x[0] - 2.0,
            0.9 * x[2] + 0.1,
        ]
    }

    #[test]
    fn solves_linear_fixed_point_picard_cannot() {
        let mut acc = Anderson::new(3);
        let mut x = vec![0.0; 3];
        for _ in 0..20 {
            let g = affine(&x);
            let r: Vec<f64> = g.iter().zip(&x).map(|(a, b)| a - b).collect();
            if r.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-12 {
                break;
            }
            x = acc.next(&x, &r, 1.0);
        }
        let g = affine(&x);
        for i in 0..3 {
            assert!((g[i] - x[i]).abs() < 1e-9, "{x:?}");
        }
    }

    #[test]
    fn depth_zero_is_damped_picard() {
        let mut acc = Anderson::new(0);
        let x = acc.next(&[1.0, 2.0], &[2.0, -2.0], 0.5);
        assert_eq!(x, vec![2.0, 1.0]);
    }
}
