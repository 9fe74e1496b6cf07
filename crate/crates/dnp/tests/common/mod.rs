#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dnp_core::{DualTrajectory, SpatialMesh, TemporalMesh};

pub fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

pub fn dnp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dnp"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// Periodic backward-Euler heat equation, 3-point Laplacian, sine basis.
pub fn heat_oracle(f: &DualTrajectory, smesh: &SpatialMesh, tmesh: &TemporalMesh) -> Vec<f64> {
    let (nt, m) = (tmesh.steps(), smesh.interior());
    let (dx, dt) = (smesh.dx(), tmesh.dt());
    let mut u = vec![0.0; nt * m];
    for k in 1..=m {
        let basis: Vec<f64> = (0..m)
            .map(|i| (k as f64 * PI * (i + 1) as f64 / (m + 1) as f64).sin())
            .collect();
        let kappa = 4.0 / (dx * dx) * (k as f64 * PI * dx / (2.0 * smesh.length())).sin().powi(2);
        let (r, s) = (1.0 / (1.0 + kappa * dt), dt / (1.0 + kappa * dt));
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
        let mut c = fhat.iter().fold(0.0, |acc, fk| r * acc + s * fk) / (1.0 - r.powi(nt as i32));
        for n in 0..nt {
            c = r * c + s * fhat[n];
            for i in 0..m {
                u[n * m + i] += c * basis[i];
            }
        }
    }
    u
}

/// `max_n |u_n − v_n|_{L²} / max_n |v_n|_{L²}`.
pub fn relative_linf_l2(u: &[f64], v: &[f64], nodes: usize, dx: f64) -> f64 {
    let norm = |w: &mut dyn Iterator<Item = f64>| -> f64 {
        let w: Vec<f64> = w.collect();
        w.chunks(nodes)
            .map(|s| (dx * s.iter().map(|x| x * x).sum::<f64>()).sqrt())
            .fold(0.0, f64::max)
    };
    let diff = norm(&mut u.iter().zip(v).map(|(a, b)| a - b));
    diff / norm(&mut v.iter().copied())
}
