use alloc::vec::Vec;

use crate::error::{ensure_finite, Result};
use crate::mesh::SpatialMesh;
use crate::nonlinearity::Nonlinearity;

/// `ψ(u) = Σᵢ dx A(uᵢ)`.
pub fn eval_psi(u: &[f64], nl: &Nonlinearity, mesh: &SpatialMesh) -> Result<f64> {
    ensure_finite(u, "eval_psi")?;
    Ok(mesh.dx() * u.iter().map(|s| nl.primitive(*s)).sum::<f64>())
}

/// Pointwise `α(uᵢ)`, the gradient of [`eval_psi`] under the nodal pairing.
pub fn grad_psi(u: &[f64], nl: &Nonlinearity) -> Vec<f64> {
    u.iter().map(|s| nl.alpha(*s)).collect()
}

/// Pointwise `α'(uᵢ)` (diagonal Hessian in dual form).
pub fn hessian_psi(u: &[f64], nl: &Nonlinearity) -> Vec<f64> {
    u.iter().map(|s| nl.alpha_prime(*s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::rng;
    use alloc::vec;

    #[test]
    fn quadratic_constant_field() {
        // u ≡ 2 on a mesh whose nodal weights sum to one
        let mesh = SpatialMesh::new(2.0, 1).unwrap();
        let nl = Nonlinearity::identity();
        assert!((eval_psi(&[2.0], &nl, &mesh).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(eval_psi(&[0.0; 1], &nl, &mesh).unwrap(), 0.0);
    }

    #[test]
    fn cubic_integral_of_linear_profile() {
        let mesh = SpatialMesh::unit(63);
        let nl = Nonlinearity::power(3.0).unwrap();
        let u: Vec<f64> = mesh.nodes().collect();
        let v = eval_psi(&u, &nl, &mesh).unwrap();
        assert!((v - 1.0 / 12.0).abs() < 2.0 * mesh.dx(), "{v}");
    }

    #[test]
    fn identity_gradient() {
        let u = [0.5, -1.0, 2.0];
        assert_eq!(grad_psi(&u, &Nonlinearity::identity()), u.to_vec());
        assert_eq!(
            grad_psi(&[0.0; 3], &Nonlinearity::power(3.0).unwrap()),
            vec![0.0; 3]
        );
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mesh = SpatialMesh::unit(12);
        let mut g = rng::seeded(21);
        for nl in [
            Nonlinearity::power(3.0).unwrap(),
            Nonlinearity::power(2.5).unwrap(),
        ] {
            for _ in 0..20 {
                let u = rng::uniform_field(&mut g, 12, 2.0);
                let e = rng::uniform_field(&mut g, 12, 1.0);
                let h = 1e-5;
                let up: Vec<f64> = u.iter().zip(&e).map(|(a, b)| a + h * b).collect();
                let um: Vec<f64> = u.iter().zip(&e).map(|(a, b)| a - h * b).collect();
                let fd = (eval_psi(&up, &nl, &mesh).unwrap() - eval_psi(&um, &nl, &mesh).unwrap())
                    / (2.0 * h);
                let an = crate::norms::pairing(&grad_psi(&u, &nl), &e, &mesh);
                assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-3));
            }
        }
    }

    #[test]
    fn non_finite_input_rejected() {
        let mesh = SpatialMesh::unit(2);
        let r = eval_psi(&[1.0, f64::NAN], &Nonlinearity::identity(), &mesh);
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }
}
