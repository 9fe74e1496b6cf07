//! Discrete norms for `V = Lᵖ(Ω)`, `V* = L^{p'}(Ω)`, `X = W₀^{1,m}(Ω)` and Bochner
//! norms over one period.
//!
//! Quadrature is nodal (`Σᵢ dx |vᵢ|^r` over interior nodes) for `V` and `V*`, and
//! cell-based for `X`, with Dirichlet ghosts `v₀ = v_{M+1} = 0`. A field that is
//! identically one therefore has `|v|_V^p = M·dx = L·M/(M+1)`.

use crate::math::{abs_pow, powf};
use crate::mesh::{SpatialMesh, TemporalMesh};
use crate::trajectory::Trajectory;

/// Duality pairing `⟨ξ, v⟩ = Σᵢ dx ξᵢ vᵢ`.
pub fn pairing(xi: &[f64], v: &[f64], mesh: &SpatialMesh) -> f64 {
    mesh.dx() * xi.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
}

/// `(Σᵢ dx |vᵢ|^r)^{1/r}`, or the max norm for `r = ∞`.
pub fn lp_norm(v: &[f64], r: f64, weight: f64) -> f64 {
    if r.is_infinite() {
        return v.iter().fold(0.0, |m, x| m.max(x.abs()));
    }
    let sum: f64 = v.iter().map(|x| abs_pow(*x, r)).sum::<f64>() * weight;
    if r == 2.0 {
        crate::math::sqrt(sum)
    } else {
        powf(sum, 1.0 / r)
    }
}

pub fn norm_v(v: &[f64], p: f64, mesh: &SpatialMesh) -> f64 {
    lp_norm(v, p, mesh.dx())
}

/// Norm of `V*`; `p_dual` is the conjugate exponent `p'`.
pub fn norm_vstar(xi: &[f64], p_dual: f64, mesh: &SpatialMesh) -> f64 {
    lp_norm(xi, p_dual, mesh.dx())
}

/// Forward difference on cell `j`: `(v_{j+1} − v_j)/dx` with zero ghosts.
#[inline]
pub fn cell_gradient(v: &[f64], j: usize, dx: f64) -> f64 {
    let left = if j == 0 { 0.0 } else { v[j - 1] };
    let right = if j == v.len() { 0.0 } else { v[j] };
    (right - left) / dx
}

/// `(Σ_cells dx |Dv_j|^m)^{1/m}`.
pub fn norm_x(v: &[f64], m: f64, mesh: &SpatialMesh) -> f64 {
    let dx = mesh.dx();
    let sum: f64 = (0..=v.len())
        .map(|j| abs_pow(cell_gradient(v, j, dx), m))
        .sum::<f64>()
        * dx;
    powf(sum, 1.0 / m)
}

/// Norm of `X*` dual to [`norm_x`]: `sup ⟨η, v⟩ / |v|_X`.
///
/// With `Eⱼ = Σ_{i ≥ j} dx ηᵢ` this equals `min_c |E − c|` in the cell
/// `L^{m'}` norm; the scalar `c` is found by bisection.
pub fn norm_xstar(eta: &[f64], m: f64, mesh: &SpatialMesh) -> f64 {
    let dx = mesh.dx();
    let md = crate::math::conjugate_exponent(m);
    let cells = eta.len() + 1;
    let mut tail = alloc::vec![0.0; cells];
    for j in (0..eta.len()).rev() {
        tail[j] = tail[j + 1] + dx * eta[j];
    }
    let slope = |c: f64| -> f64 {
        tail.iter()
            .map(|e| crate::math::signed_pow(e - c, md))
            .sum()
    };
    let (mut lo, mut hi) = tail
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), e| {
            (a.min(*e), b.max(*e))
        });
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * (lo.abs() + hi.abs()) {
            break;
        }
    }
    let c = 0.5 * (lo + hi);
    let sum: f64 = tail.iter().map(|e| abs_pow(e - c, md)).sum::<f64>() * dx;
    powf(sum, 1.0 / md)
}

/// `(Σₙ dt |uₙ|^r)^{1/r}` for a per-slice norm, or `maxₙ |uₙ|` when `r = ∞`.
pub fn bochner_norm<K>(
    u: &Trajectory<K>,
    spatial: impl Fn(&[f64]) -> f64,
    r: f64,
    tmesh: &TemporalMesh,
) -> f64 {
    if r.is_infinite() {
        return u.slices().map(&spatial).fold(0.0, f64::max);
    }
    let sum: f64 = u.slices().map(|s| abs_pow(spatial(s), r)).sum::<f64>() * tmesh.dt();
    powf(sum, 1.0 / r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::conjugate_exponent;
    use crate::rng;
    use alloc::vec;
    use alloc::vec::Vec;

    #[test]
    fn unit_field_norm_follows_nodal_convention() {
        let mesh = SpatialMesh::unit(31);
        let v = vec![1.0; 31];
        let expected = 31.0 / 32.0;
        for p in [1.5, 2.0, 3.0, 4.0] {
            let n = norm_v(&v, p, &mesh);
            assert!((powf(n, p) - expected).abs() < 1e-12, "p = {p}");
        }
    }

    #[test]
    fn holder_inequality_holds() {
        let mesh = SpatialMesh::unit(20);
        let mut r = rng::seeded(7);
        for p in [1.5, 2.0, 3.5] {
            let q = conjugate_exponent(p);
            for _ in 0..50 {
                let xi = rng::uniform_field(&mut r, 20, 3.0);
                let v = rng::uniform_field(&mut r, 20, 2.0);
                let lhs = pairing(&xi, &v, &mesh).abs();
                let rhs = norm_vstar(&xi, q, &mesh) * norm_v(&v, p, &mesh);
                assert!(lhs <= rhs * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn x_norm_of_parabola_converges_to_one_third() {
        let mut errors = Vec::new();
        for m in [16usize, 32, 64, 128] {
            let mesh = SpatialMesh::unit(m);
            let v: Vec<f64> = mesh.nodes().map(|x| x * (1.0 - x)).collect();
            let n = norm_x(&v, 2.0, &mesh);
            errors.push((n * n - 1.0 / 3.0).abs());
        }
        for w in errors.windows(2) {
            assert!(w[1] < w[0]);
        }
        // midpoint differences of a quadratic are exact, so the error is the
        // O(dx²) quadrature defect of the cell sum
        assert!(errors[3] < 1e-4);
    }

    #[test]
    fn x_norm_refinement_order_is_at_least_one() {
        let exact: f64 = core::f64::consts::PI * core::f64::consts::PI / 2.0;
        let err = |m: usize| {
            let mesh = SpatialMesh::unit(m);
            let v: Vec<f64> = mesh
                .nodes()
                .map(|x| crate::math::sin(core::f64::consts::PI * x))
                .collect();
            let n = norm_x(&v, 2.0, &mesh);
            (n * n - exact).abs()
        };
        let e1 = err(15);
        let e2 = err(31);
        let order = crate::math::ln(e1 / e2) / crate::math::ln(2.0);
        assert!(order >= 1.0, "order {order}");
    }

    #[test]
    fn bochner_norm_of_constant_trajectory() {
        let t = TemporalMesh::new(2.0, 10).unwrap();
        let mesh = SpatialMesh::unit(4);
        let c = 0.75;
        let u = Trajectory::<crate::trajectory::Primal>::from_fn(10, 4, |_, _| c);
        let slice_norm = norm_v(&[c; 4], 2.0, &mesh);
        for r in [1.0, 2.0, 3.0] {
            let b = bochner_norm(&u, |s| norm_v(s, 2.0, &mesh), r, &t);
            assert!((b - slice_norm * powf(2.0, 1.0 / r)).abs() < 1e-12);
        }
        let inf = bochner_norm(&u, |s| norm_v(s, 2.0, &mesh), f64::INFINITY, &t);
        assert!((inf - slice_norm).abs() < 1e-15);
    }

    #[test]
    fn bochner_two_norm_squares_to_weighted_sum() {
        let t = TemporalMesh::unit(6);
        let mesh = SpatialMesh::unit(3);
        let u =
            Trajectory::<crate::trajectory::Primal>::from_fn(6, 3, |n, i| (n as f64) - i as f64);
        let b = bochner_norm(&u, |s| norm_v(s, 2.0, &mesh), 2.0, &t);
        let direct: f64 = u
            .slices()
            .map(|s| powf(norm_v(s, 2.0, &mesh), 2.0))
            .sum::<f64>()
            * t.dt();
        assert!((b * b - direct).abs() < 1e-12);
        let inf = bochner_norm(&u, |s| norm_v(s, 2.0, &mesh), f64::INFINITY, &t);
        let max = u
            .slices()
            .map(|s| norm_v(s, 2.0, &mesh))
            .fold(0.0, f64::max);
        assert_eq!(inf, max);
    }

    #[test]
    fn xstar_norm_is_dual_to_x_norm() {
        let mesh = SpatialMesh::unit(12);
        let dx = mesh.dx();
        let mut g = rng::seeded(17);
        for m in [1.5, 2.0, 3.0] {
            let eta = rng::uniform_field(&mut g, 12, 1.0);
            let dual = norm_xstar(&eta, m, &mesh);
            for _ in 0..200 {
                let v = rng::uniform_field(&mut g, 12, 1.0);
                assert!(pairing(&eta, &v, &mesh) <= dual * norm_x(&v, m, &mesh) * (1.0 + 1e-12));
            }
            // maximizer: cell slopes |E − c|^{m'−2}(E − c) shifted to mean zero
            let tails: Vec<f64> = (0..13)
                .map(|j| eta[j.min(12)..].iter().sum::<f64>() * dx)
                .collect();
            let md = conjugate_exponent(m);
            let (mut lo, mut hi) = (-10.0, 10.0);
            for _ in 0..200 {
                let c = 0.5 * (lo + hi);
                let s: f64 = tails
                    .iter()
                    .map(|e| crate::math::signed_pow(e - c, md))
                    .sum();
                if s > 0.0 {
                    lo = c
                } else {
                    hi = c
                }
            }
            let c = 0.5 * (lo + hi);
            let w: Vec<f64> = tails
                .iter()
                .map(|e| crate::math::signed_pow(e - c, md))
                .collect();
            let mut v = vec![0.0; 12];
            let mut acc = 0.0;
            for i in 0..12 {
                acc += dx * w[i];
                v[i] = acc;
            }
            let ratio = pairing(&eta, &v, &mesh) / norm_x(&v, m, &mesh);
            assert!(
                (ratio - dual).abs() <= 1e-9 * dual,
                "m = {m}: {ratio} vs {dual}"
            );
        }
    }

    #[test]
    fn xstar_norm_attained_for_hilbert_case() {
        // for m = 2 the maximizer solves −Δv = η, so ⟨η, v⟩ = |v|_X²
        let mesh = SpatialMesh::unit(9);
        let eta: Vec<f64> = (0..9).map(|i| 1.0 + i as f64 * 0.1).collect();
        let dx = mesh.dx();
        let mut v = eta.iter().map(|e| e * dx * dx).collect::<Vec<_>>();
        let diag = vec![2.0; 9];
        let off = vec![-1.0; 8];
        crate::linalg::thomas_solve(&diag, &off, &mut v).unwrap();
        let x = norm_x(&v, 2.0, &mesh);
        assert!((norm_xstar(&eta, 2.0, &mesh) - pairing(&eta, &v, &mesh) / x).abs() < 1e-12);
    }
}
