#![allow(dead_code)]

use dnp_core::*;
use std::f64::consts::PI;

/// Periodic backward-Euler heat equation with the 3-point Dirichlet Laplacian,
/// solved mode by mode in the discrete sine basis.
pub fn heat_oracle(f: &DualTrajectory, smesh: &SpatialMesh, tmesh: &TemporalMesh) -> Vec<f64> {
    let (nt, m) = (tmesh.steps(), smesh.interior());
    let (dx, dt) = (smesh.dx(), tmesh.dt());
    let mut u = vec![0.0; nt * m];
    for k in 1..=m {
        let basis: Vec<f64> = (0..m)
            .map(|i| (k as f64 * PI * (i + 1) as f64 / (m + 1) as f64).sin())
            .collect();
        let kappa = 4.0 / (dx * dx) * (k as f64 * PI * dx / (2.0 * smesh.length())).sin().powi(2);
        let r = 1.0 / (1.0 + kappa * dt);
        let s = dt / (1.0 + kappa * dt);
        let fhat: Vec<f64> = (0..nt)
            .map(|n| {
                2.0 / (m + 1) as f64
                    * f.slice(n)
                        .iter()
                        .zip(&basis)
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
            })
            .collect();
        let acc = fhat.iter().fold(0.0, |acc, fk| r * acc + s * fk);
        let mut c = acc / (1.0 - r.powi(nt as i32));
        for n in 0..nt {
            c = r * c + s * fhat[n];
            for i in 0..m {
                u[n * m + i] += c * basis[i];
            }
        }
    }
    u
}

/// `max_n |u_n|_{L²}` over slices.
pub fn linf_l2(u: &[f64], nodes: usize, dx: f64) -> f64 {
    u.chunks(nodes)
        .map(|s| (dx * s.iter().map(|v| v * v).sum::<f64>()).sqrt())
        .fold(0.0, f64::max)
}

pub fn two_mode_forcing(s: &SpatialMesh, t: &TemporalMesh) -> DualTrajectory {
    DualTrajectory::from_fn(t.steps(), s.interior(), |n, i| {
        let (x, tt) = (s.node(i) / s.length(), t.time(n) / t.period());
        (PI * x).sin() * (2.0 * PI * tt).cos() + 0.5 * (3.0 * PI * x).sin() * (4.0 * PI * tt).sin()
    })
}

pub fn instance(p: f64, m: f64, nodes: usize, steps: usize) -> ProblemSpec {
    let s = SpatialMesh::unit(nodes);
    let t = TemporalMesh::unit(steps);
    let nl = if p == 2.0 {
        Nonlinearity::identity()
    } else {
        Nonlinearity::power(p).unwrap()
    };
    let a = DiffusionField::constant(&s, 1.0).unwrap();
    ProblemSpec::new(nl, m, a, two_mode_forcing(&s, &t), s, t).unwrap()
}
