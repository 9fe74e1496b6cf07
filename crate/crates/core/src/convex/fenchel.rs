use crate::error::{ensure_finite, Result};
use crate::mesh::SpatialMesh;
use crate::nonlinearity::Nonlinearity;

/// `ψ*(ξ) = Σᵢ dx A*(ξᵢ)`; `clipped` counts entries whose supremum hit the
/// search bracket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiStar {
    pub value: f64,
    pub clipped: usize,
}

pub fn fenchel_psi_star(xi: &[f64], nl: &Nonlinearity, mesh: &SpatialMesh) -> Result<PsiStar> {
    ensure_finite(xi, "fenchel_psi_star")?;
    let mut sum = 0.0;
    let mut clipped = 0;
    for x in xi {
        let c = nl.conjugate(*x);
        sum += c.value;
        clipped += usize::from(c.clipped);
    }
    Ok(PsiStar {
        value: mesh.dx() * sum,
        clipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::{eval_psi, grad_psi};
    use crate::norms::pairing;
    use crate::rng;

    #[test]
    fn quadratic_is_self_conjugate() {
        let mesh = SpatialMesh::unit(5);
        let xi = [0.3, -1.0, 2.0, 0.0, 0.5];
        let s = fenchel_psi_star(&xi, &Nonlinearity::identity(), &mesh).unwrap();
        let expect = 0.5 * pairing(&xi, &xi, &mesh);
        assert!((s.value - expect).abs() < 1e-14);
        assert_eq!(s.clipped, 0);
        let z = fenchel_psi_star(&[0.0; 5], &Nonlinearity::identity(), &mesh).unwrap();
        assert_eq!(z.value, 0.0);
    }

    #[test]
    fn cubic_conjugate_closed_form() {
        let mesh = SpatialMesh::unit(1);
        let nl = Nonlinearity::power(3.0).unwrap();
        let xi = 2.25_f64;
        let s = fenchel_psi_star(&[xi], &nl, &mesh).unwrap();
        let expect = mesh.dx() * (2.0 / 3.0) * xi.powf(1.5);
        assert!((s.value - expect).abs() < 1e-12);
    }

    #[test]
    fn fenchel_young_equality_on_subgradient_pairs() {
        let mesh = SpatialMesh::unit(16);
        let mut g = rng::seeded(5);
        let pl = Nonlinearity::piecewise_linear(alloc::vec![
            (-1.0, -2.0),
            (0.0, 0.0),
            (1.0, 0.5),
            (2.0, 3.0)
        ])
        .unwrap();
        for nl in [
            Nonlinearity::power(3.0).unwrap(),
            Nonlinearity::power(1.5).unwrap(),
            pl,
        ] {
            for _ in 0..10 {
                let v = rng::uniform_field(&mut g, 16, 3.0);
                let xi = grad_psi(&v, &nl);
                let lhs = eval_psi(&v, &nl, &mesh).unwrap()
                    + fenchel_psi_star(&xi, &nl, &mesh).unwrap().value;
                let rhs = pairing(&xi, &v, &mesh);
                assert!(
                    (lhs - rhs).abs() <= 1e-8 * rhs.abs().max(1.0),
                    "{lhs} {rhs}"
                );
            }
        }
    }
}
