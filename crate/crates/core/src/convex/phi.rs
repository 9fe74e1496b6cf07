use alloc::format;
use alloc::vec::Vec;

use super::functional::ConvexFunctional;
use crate::error::{ensure_finite, Error, Result};
use crate::linalg::SliceHessian;
use crate::math::powf;
use crate::mesh::SpatialMesh;
use crate::norms::cell_gradient;

/// Diffusion coefficient sampled at cell midpoints, one value per cell.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiffusionField {
    values: Vec<f64>,
    lower: f64,
    upper: f64,
}

impl DiffusionField {
    /// Checks `0 < lower ≤ aⱼ ≤ upper` for every cell.
    pub fn new(values: Vec<f64>, lower: f64, upper: f64) -> Result<Self> {
        let key = "problem.diffusion";
        if !(lower > 0.0 && lower.is_finite()) {
            return Err(Error::config(
                key,
                format!("lower bound must be positive, got {lower}"),
            ));
        }
        if !(upper >= lower && upper.is_finite()) {
            return Err(Error::config(
                key,
                "upper bound must be finite and >= lower bound",
            ));
        }
        if let Some((j, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= lower && **v <= upper))
        {
            return Err(Error::config(
                key,
                format!("cell {j} value {v} outside [{lower}, {upper}]"),
            ));
        }
        Ok(DiffusionField {
            values,
            lower,
            upper,
        })
    }

    /// Bounds taken as the sampled extremes.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let lower = values.iter().copied().fold(f64::INFINITY, f64::min);
        let upper = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        DiffusionField::new(values, lower, upper)
    }

    pub fn constant(mesh: &SpatialMesh, a: f64) -> Result<Self> {
        DiffusionField::new(alloc::vec![a; mesh.cells()], a, a)
    }

    /// Samples `a(x)` at cell midpoints.
    pub fn from_fn(mesh: &SpatialMesh, a: impl Fn(f64) -> f64) -> Result<Self> {
        DiffusionField::from_values(
            (0..mesh.cells())
                .map(|j| a(mesh.cell_midpoint(j)))
                .collect(),
        )
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn cells(&self) -> usize {
        self.values.len()
    }
}

/// Everything that defines the diffusion energy
/// `φ(u) = (1/m) Σⱼ dx aⱼ ((Duⱼ)² + δ²)^{m/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiConfig {
    pub field: DiffusionField,
    pub m: f64,
    pub delta: f64,
    pub mesh: SpatialMesh,
}

impl PhiConfig {
    pub fn new(field: DiffusionField, m: f64, delta: f64, mesh: SpatialMesh) -> Result<Self> {
        if !(m.is_finite() && m > 1.0) {
            return Err(Error::config(
                "problem.m",
                format!("must exceed 1, got {m}"),
            ));
        }
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::config(
                "cascade.delta",
                "must be finite and nonnegative",
            ));
        }
        if field.cells() != mesh.cells() {
            return Err(Error::Dimension(format!(
                "diffusion field has {} cells, mesh has {}",
                field.cells(),
                mesh.cells()
            )));
        }
        Ok(PhiConfig {
            field,
            m,
            delta,
            mesh,
        })
    }

    /// Smoothed flux `q_δ(z) = (z² + δ²)^{(m−2)/2} z`.
    #[inline]
    fn flux(&self, z: f64, cell: usize) -> Result<f64> {
        let m = self.m;
        if m == 2.0 {
            return Ok(z);
        }
        let r = z * z + self.delta * self.delta;
        if r == 0.0 {
            return if m < 2.0 {
                Err(Error::Singularity { cell })
            } else {
                Ok(0.0)
            };
        }
        Ok(powf(r, 0.5 * (m - 2.0)) * z)
    }

    /// `q_δ'(z) = (z² + δ²)^{(m−4)/2} ((m−1) z² + δ²)`.
    #[inline]
    fn flux_slope(&self, z: f64) -> f64 {
        let m = self.m;
        if m == 2.0 {
            return 1.0;
        }
        let d2 = self.delta * self.delta;
        let r = z * z + d2;
        if r == 0.0 {
            return if m > 2.0 {
                0.0
            } else {
                powf(1e-24, 0.5 * (m - 2.0))
            };
        }
        let r = if m < 2.0 { r.max(1e-24) } else { r };
        powf(r, 0.5 * (m - 4.0)) * ((m - 1.0) * z * z + d2)
    }

    pub fn value(&self, u: &[f64]) -> Result<f64> {
        ensure_finite(u, "eval_phi")?;
        let dx = self.mesh.dx();
        let d2 = self.delta * self.delta;
        let half_m = 0.5 * self.m;
        let a = self.field.values();
        let mut sum = 0.0;
        for j in 0..=u.len() {
            let z = cell_gradient(u, j, dx);
            let r = z * z + d2;
            let e = if self.m == 2.0 {
                r
            } else if r == 0.0 {
                0.0
            } else {
                powf(r, half_m)
            };
            sum += a[j] * e;
        }
        Ok(sum * dx / self.m)
    }

    /// Negative weighted discrete m-Laplacian.
    pub fn gradient(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        ensure_finite(u, "grad_phi")?;
        let dx = self.mesh.dx();
        let a = self.field.values();
        let mut left = a[0] * self.flux(cell_gradient(u, 0, dx), 0)?;
        for i in 0..u.len() {
            let right = a[i + 1] * self.flux(cell_gradient(u, i + 1, dx), i + 1)?;
            out[i] = -(right - left) / dx;
            left = right;
        }
        Ok(())
    }

    pub fn hessian(&self, u: &[f64]) -> SliceHessian {
        let n = u.len();
        let dx = self.mesh.dx();
        let a = self.field.values();
        let c: Vec<f64> = (0..=n)
            .map(|j| a[j] * self.flux_slope(cell_gradient(u, j, dx)) / (dx * dx))
            .collect();
        let mut h = SliceHessian::zeros(n);
        for i in 0..n {
            h.diag[i] = c[i] + c[i + 1];
            if i + 1 < n {
                h.off[i] = -c[i + 1];
            }
        }
        h
    }
}

impl ConvexFunctional for PhiConfig {
    fn dim(&self) -> usize {
        self.mesh.interior()
    }

    fn weight(&self) -> f64 {
        self.mesh.dx()
    }

    fn value(&self, u: &[f64]) -> Result<f64> {
        PhiConfig::value(self, u)
    }

    fn gradient(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        PhiConfig::gradient(self, u, out)
    }

    fn hessian(&self, u: &[f64]) -> SliceHessian {
        PhiConfig::hessian(self, u)
    }
}

/// `φ(u)` for the given coefficient, exponent and smoothing.
pub fn eval_phi(
    u: &[f64],
    a: &DiffusionField,
    m: f64,
    delta: f64,
    mesh: &SpatialMesh,
) -> Result<f64> {
    PhiConfig::new(a.clone(), m, delta, *mesh)?.value(u)
}

/// `−Δ^a_m u` in the discrete, δ-smoothed form.
pub fn grad_phi(
    u: &[f64],
    a: &DiffusionField,
    m: f64,
    delta: f64,
    mesh: &SpatialMesh,
) -> Result<Vec<f64>> {
    let cfg = PhiConfig::new(a.clone(), m, delta, *mesh)?;
    let mut out = alloc::vec![0.0; u.len()];
    cfg.gradient(u, &mut out)?;
    Ok(out)
}

pub fn hessian_phi(u: &[f64], cfg: &PhiConfig) -> SliceHessian {
    cfg.hessian(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::pairing;
    use crate::rng;
    use alloc::vec;

    fn unit(m: usize, a: f64) -> (SpatialMesh, DiffusionField) {
        let mesh = SpatialMesh::unit(m);
        let field = DiffusionField::constant(&mesh, a).unwrap();
        (mesh, field)
    }

    #[test]
    fn zero_field_has_zero_energy_and_gradient() {
        let (mesh, a) = unit(8, 1.0);
        assert_eq!(eval_phi(&[0.0; 8], &a, 3.0, 0.0, &mesh).unwrap(), 0.0);
        assert_eq!(
            grad_phi(&[0.0; 8], &a, 3.0, 1e-6, &mesh).unwrap(),
            vec![0.0; 8]
        );
    }

    #[test]
    fn parabola_dirichlet_energy() {
        let (mesh, a) = unit(127, 1.0);
        let u: Vec<f64> = mesh.nodes().map(|x| x * (1.0 - x)).collect();
        let v = eval_phi(&u, &a, 2.0, 0.0, &mesh).unwrap();
        assert!((v - 1.0 / 6.0).abs() < mesh.dx() * mesh.dx(), "{v}");
    }

    #[test]
    fn hat_function_two_cells() {
        let (mesh, a) = unit(1, 2.0);
        let v = eval_phi(&[1.0], &a, 4.0, 0.0, &mesh).unwrap();
        assert!((v - 8.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn quadratic_case_is_second_difference() {
        let (mesh, a) = unit(6, 1.0);
        let u = [0.3, -0.2, 1.0, 0.7, 0.0, -0.4];
        let g = grad_phi(&u, &a, 2.0, 0.0, &mesh).unwrap();
        let dx2 = mesh.dx() * mesh.dx();
        for i in 0..6 {
            let l = if i == 0 { 0.0 } else { u[i - 1] };
            let r = if i == 5 { 0.0 } else { u[i + 1] };
            assert!((g[i] + (r - 2.0 * u[i] + l) / dx2).abs() < 1e-10);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mesh = SpatialMesh::unit(10);
        let a = DiffusionField::from_fn(&mesh, |x| 1.0 + 0.5 * x).unwrap();
        let mut g = rng::seeded(4);
        for (m, delta) in [(3.0, 1e-4), (1.5, 1e-2), (2.0, 0.0), (4.0, 1e-6)] {
            for _ in 0..20 {
                let u = rng::uniform_field(&mut g, 10, 1.0);
                let e = rng::uniform_field(&mut g, 10, 1.0);
                let h = 1e-5;
                let up: Vec<f64> = u.iter().zip(&e).map(|(x, y)| x + h * y).collect();
                let um: Vec<f64> = u.iter().zip(&e).map(|(x, y)| x - h * y).collect();
                let fd = (eval_phi(&up, &a, m, delta, &mesh).unwrap()
                    - eval_phi(&um, &a, m, delta, &mesh).unwrap())
                    / (2.0 * h);
                let an = pairing(&grad_phi(&u, &a, m, delta, &mesh).unwrap(), &e, &mesh);
                assert!(
                    (fd - an).abs() <= 1e-6 * an.abs().max(1e-2),
                    "m = {m}: {fd} vs {an}"
                );
            }
        }
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let mesh = SpatialMesh::unit(7);
        let a = DiffusionField::from_fn(&mesh, |x| 2.0 - x).unwrap();
        let cfg = PhiConfig::new(a, 3.0, 1e-3, mesh).unwrap();
        let mut g = rng::seeded(8);
        let u = rng::uniform_field(&mut g, 7, 1.0);
        let e = rng::uniform_field(&mut g, 7, 1.0);
        let h = 1e-6;
        let up: Vec<f64> = u.iter().zip(&e).map(|(x, y)| x + h * y).collect();
        let um: Vec<f64> = u.iter().zip(&e).map(|(x, y)| x - h * y).collect();
        let (mut gp, mut gm) = (vec![0.0; 7], vec![0.0; 7]);
        cfg.gradient(&up, &mut gp).unwrap();
        cfg.gradient(&um, &mut gm).unwrap();
        let hv = cfg.hessian(&u).apply(&e);
        for i in 0..7 {
            let fd = (gp[i] - gm[i]) / (2.0 * h);
            assert!((fd - hv[i]).abs() < 1e-5 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn unsmoothed_singular_exponent_reports_cell() {
        let (mesh, a) = unit(3, 1.0);
        let r = grad_phi(&[1.0, 1.0, 0.5], &a, 1.5, 0.0, &mesh);
        assert!(matches!(r, Err(Error::Singularity { cell: 1 })));
    }

    #[test]
    fn configuration_is_validated() {
        let (mesh, a) = unit(3, 1.0);
        assert!(matches!(
            eval_phi(&[0.0; 3], &a, 1.0, 0.0, &mesh),
            Err(Error::Config { ref key, .. }) if key == "problem.m"
        ));
        assert!(DiffusionField::new(vec![1.0, 0.5], 0.8, 2.0).is_err());
        assert!(DiffusionField::new(vec![1.0], 0.0, 2.0).is_err());
    }
}
