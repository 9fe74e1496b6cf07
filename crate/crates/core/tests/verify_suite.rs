mod common;

use common::instance;
use dnp_core::cascade::solve;
use dnp_core::verify::*;
use dnp_core::*;

fn exact() -> ExactSolution {
    ExactSolution::Separable {
        amplitude: 1.0,
        space_mode: 1,
        time_mode: 1,
    }
}

#[test]
fn identity_sequence_is_trivial() {
    let seq = MoscoSequenceSpec {
        kind: MoscoKind::Identity,
        n_max: 3,
        base: instance(2.0, 2.0, 10, 8),
    };
    let params = CascadeParams::default();
    let t = mosco_experiment(&seq, &params).unwrap();
    assert!(t.passed);
    for r in &t.rows {
        assert!(r.error.unwrap() <= 2.0 * params.stage_tol);
    }
}

#[test]
fn forcing_perturbation_decays() {
    let seq = MoscoSequenceSpec {
        kind: MoscoKind::ForcingPerturbation,
        n_max: 6,
        base: instance(2.0, 2.0, 12, 10),
    };
    let t = mosco_experiment(&seq, &CascadeParams::default()).unwrap();
    assert!(t.monotone, "{:?}", t.rows);
    assert!(t.ratio.unwrap() <= 0.25);
    assert!((t.slope.unwrap() + 1.0).abs() < 0.1);
}

#[test]
fn nonlinearity_shift_rejected_below_two() {
    let seq = MoscoSequenceSpec {
        kind: MoscoKind::NonlinearityPerturbation,
        n_max: 2,
        base: instance(1.5, 3.0, 6, 6),
    };
    assert!(matches!(mosco_instance(&seq, 1), Err(Error::Config { .. })));
}

#[test]
fn zero_manufactured_solution() {
    let mms = MmsSpec {
        exact: ExactSolution::Zero,
        mode: MmsMode::DiscreteExact,
        levels: 1,
    };
    let t = mms_run(&mms, &instance(2.5, 3.0, 8, 8), &CascadeParams::default()).unwrap();
    assert!(t.passed);
    assert_eq!(t.levels[0].error, Some(0.0));
}

#[test]
fn discrete_exact_recovery() {
    let params = CascadeParams::default();
    for (p, m) in [(2.0, 3.0), (3.0, 2.0)] {
        let mms = MmsSpec {
            exact: exact(),
            mode: MmsMode::DiscreteExact,
            levels: 1,
        };
        let t = mms_run(&mms, &instance(p, m, 12, 12), &params).unwrap();
        let l = &t.levels[0];
        assert!(t.passed, "({p},{m}) {l:?}");
        assert!(l.error.unwrap() <= 10.0 * params.stage_tol);
        assert_eq!(l.path, if m <= p { "mu" } else { "plain" });
    }
}

#[test]
fn continuum_mode_rejects_degenerate_diffusion() {
    let mms = MmsSpec {
        exact: exact(),
        mode: MmsMode::Continuum,
        levels: 2,
    };
    let r = mms_run(&mms, &instance(2.0, 1.5, 7, 8), &CascadeParams::default());
    assert!(r.is_err());
}

#[test]
fn invariants_and_negative_control() {
    let spec = instance(2.5, 3.0, 16, 16);
    let params = CascadeParams::default();
    let r = solve(&spec, &params).unwrap();
    let rep = invariant_suite(&r, &spec, &params);
    assert!(rep.passed, "{:?}", rep.failures());
    let nc = negative_control(&r, &spec, &params, 1e-2, 11).unwrap();
    assert!(nc.passed);
    assert!(nc.ratio > 100.0);
    assert!(nc.failed_checks.iter().any(|c| c == "stationarity"));
}

#[test]
fn chain_rule_sum_halves_with_dt() {
    let params = CascadeParams::default();
    let coarse = instance(2.5, 3.0, 12, 12);
    let fine = instance(2.5, 3.0, 12, 24);
    let rc = solve(&coarse, &params).unwrap();
    let rf = solve(&fine, &params).unwrap();
    let q = chain_rule_sum(&rf.u, &rf.eta, &fine) / chain_rule_sum(&rc.u, &rc.eta, &coarse);
    assert!((0.3..=0.8).contains(&q), "{q}");
}

#[test]
fn growth_constants_for_power_laws() {
    let spec = instance(3.0, 2.5, 10, 4);
    let g = growth_audit(&spec, 10, 5, 0.0).unwrap();
    assert!(g.all_finite);
    assert_eq!(g.rows.len(), 5);
    assert!((g.overall[0] - 3.0).abs() < 1e-3, "{:?}", g.overall);
    assert!((g.overall[1] - 1.0).abs() < 1e-3, "{:?}", g.overall);
}

#[test]
fn convex_identities() {
    let rep = convex_suite(&instance(3.0, 2.0, 16, 4), 1e-6, 20, 9);
    assert!(rep.passed, "{:?}", rep.checks);
}
