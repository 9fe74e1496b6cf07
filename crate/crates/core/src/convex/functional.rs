use crate::error::Result;
use crate::linalg::SliceHessian;

/// A smooth convex functional on one spatial slice.
///
/// Gradients and Hessians are in dual form: they represent derivatives with
/// respect to the pairing `⟨ξ, v⟩ = weight · Σᵢ ξᵢ vᵢ`.
pub trait ConvexFunctional {
    fn dim(&self) -> usize;

    /// Quadrature weight of the pairing (the mesh spacing).
    fn weight(&self) -> f64;

    fn value(&self, u: &[f64]) -> Result<f64>;

    fn gradient(&self, u: &[f64], out: &mut [f64]) -> Result<()>;

    fn hessian(&self, u: &[f64]) -> SliceHessian;

    fn value_and_gradient(&self, u: &[f64], out: &mut [f64]) -> Result<f64> {
        self.gradient(u, out)?;
        self.value(u)
    }
}
