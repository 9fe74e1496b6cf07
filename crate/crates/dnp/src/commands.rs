//! Subcommand bodies. Each returns an exit code and always leaves a `report.json`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use dnp_core::cascade::{energy_margin, solve};
use dnp_core::verify::{
    convex_suite, growth_audit, invariant_suite, mms_run_with, mosco_experiment_with,
    negative_control,
};
use dnp_core::{CascadeParams, ProblemSpec, StageResult};
use serde_json::{json, Map, Value};

use crate::config::{self, ConfigError, RunConfig, VerifyConfig};
use crate::output::{self, Table};
use crate::pool;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Verify,
    Mms,
    Mosco,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Verify => "verify",
            Command::Mms => "mms",
            Command::Mosco => "mosco",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Options {
    pub config: PathBuf,
    pub output: Option<PathBuf>,
    pub jobs: usize,
    pub quiet: bool,
}

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Solver(dnp_core::Error),
    #[error("cannot write output: {0}")]
    Io(#[from] io::Error),
}

impl From<dnp_core::Error> for Failure {
    fn from(e: dnp_core::Error) -> Self {
        match e {
            dnp_core::Error::Config { .. } => Failure::Config(e.into()),
            other => Failure::Solver(other),
        }
    }
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) | Failure::Io(_) => EXIT_CONFIG,
            Failure::Solver(_) => EXIT_SOLVER,
        }
    }

    fn status(&self) -> &'static str {
        match self {
            Failure::Config(_) => "config_error",
            Failure::Solver(_) => "solver_error",
            Failure::Io(_) => "io_error",
        }
    }
}

/// What a command body hands back: pass/fail plus report fields.
struct Outcome {
    passed: bool,
    summary: String,
    report: Map<String, Value>,
}

pub fn run(cmd: Command, opts: &Options) -> i32 {
    let cfg = match config::load(&opts.config) {
        Ok(c) => c,
        Err(e) => {
            let dir = opts
                .output
                .clone()
                .unwrap_or_else(|| PathBuf::from("dnp-out"));
            return finish(cmd, opts, &dir, None, Err(e.into()));
        }
    };
    let dir = opts
        .output
        .clone()
        .unwrap_or_else(|| cfg.output_dir.clone());
    let result = fs::create_dir_all(&dir)
        .map_err(Failure::from)
        .and_then(|_| {
            fs::write(dir.join("config.json"), cfg.to_json() + "\n").map_err(Failure::from)
        })
        .and_then(|_| match cmd {
            Command::Solve => cmd_solve(&cfg, &dir),
            Command::Verify => cmd_verify(&cfg, &dir),
            Command::Mms => cmd_mms(&cfg, &dir, opts.jobs),
            Command::Mosco => cmd_mosco(&cfg, &dir, opts.jobs),
            Command::Sweep => cmd_sweep(&cfg, &dir, opts.jobs),
        });
    finish(cmd, opts, &dir, Some(&cfg), result)
}

fn finish(
    cmd: Command,
    opts: &Options,
    dir: &Path,
    cfg: Option<&RunConfig>,
    result: Result<Outcome, Failure>,
) -> i32 {
    let (code, mut report) = match result {
        Ok(o) => {
            let code = if o.passed { EXIT_OK } else { EXIT_SOLVER };
            if !opts.quiet {
                println!("{}: {} ({})", cmd.name(), o.summary, dir.display());
            }
            let mut r = o.report;
            r.insert(
                "status".into(),
                json!(if o.passed { "passed" } else { "failed" }),
            );
            (code, r)
        }
        Err(f) => {
            eprintln!("{}: {f}", cmd.name());
            let mut r = Map::new();
            r.insert("status".into(), json!(f.status()));
            r.insert("error".into(), json!(f.to_string()));
            if let Failure::Config(c) = &f {
                if let Some(k) = c.key() {
                    r.insert("key".into(), json!(k));
                }
            }
            (f.exit_code(), r)
        }
    };
    report.insert("command".into(), json!(cmd.name()));
    report.insert("exit_code".into(), json!(code));
    if let Some(c) = cfg {
        report.insert(
            "config".into(),
            serde_json::to_value(c).expect("configs serialize"),
        );
    }
    let written = fs::create_dir_all(dir)
        .and_then(|_| output::write_json(&dir.join("report.json"), &Value::Object(report)));
    if let Err(e) = written {
        eprintln!("{}: cannot write report: {e}", cmd.name());
        return if code == EXIT_OK { EXIT_CONFIG } else { code };
    }
    code
}

fn write_solution(dir: &Path, r: &StageResult, spec: &ProblemSpec) -> io::Result<()> {
    fs::write(
        dir.join("trajectory.csv"),
        output::trajectory_csv(&r.u, spec),
    )?;
    fs::write(
        dir.join("trajectory.dat"),
        output::trajectory_dat(&r.u, spec),
    )?;
    output::stage_table(&r.diagnostics.stages).write(dir, "stages")
}

fn solve_fields(r: &StageResult, spec: &ProblemSpec) -> Map<String, Value> {
    let d = &r.diagnostics;
    let mut m = Map::new();
    m.insert("path".into(), json!(d.path));
    m.insert("converged".into(), json!(d.converged));
    m.insert("target_met".into(), json!(d.target_met));
    m.insert("final_residual".into(), json!(d.final_residual));
    m.insert("forcing_scale".into(), json!(d.forcing_scale));
    m.insert(
        "energy_margin".into(),
        json!(energy_margin(&r.u, &spec.f, spec)),
    );
    m.insert(
        "diagnostics".into(),
        serde_json::to_value(d).expect("reports serialize"),
    );
    m
}

fn solved(r: &StageResult) -> bool {
    r.diagnostics.converged && r.diagnostics.target_met
}

fn cmd_solve(cfg: &RunConfig, dir: &Path) -> Result<Outcome, Failure> {
    let spec = cfg.spec()?;
    let r = solve(&spec, &cfg.cascade)?;
    write_solution(dir, &r, &spec)?;
    let passed = solved(&r);
    Ok(Outcome {
        passed,
        summary: format!(
            "{} path, residual {:.3e}{}",
            r.diagnostics.path,
            r.diagnostics.final_residual,
            if passed { "" } else { ", target not met" }
        ),
        report: solve_fields(&r, &spec),
    })
}

fn cmd_verify(cfg: &RunConfig, dir: &Path) -> Result<Outcome, Failure> {
    let vc = cfg.verify.clone().unwrap_or_default();
    let VerifyConfig {
        fields,
        growth_samples,
        noise,
    } = vc;
    let spec = cfg.spec()?;
    let params = &cfg.cascade;
    let r = solve(&spec, params)?;
    write_solution(dir, &r, &spec)?;
    let inv = invariant_suite(&r, &spec, params);
    let convex = convex_suite(&spec, params.delta, fields, cfg.seed);
    let growth = growth_audit(&spec, growth_samples, cfg.seed, params.delta)?;
    let nc = negative_control(&r, &spec, params, noise, cfg.seed)?;
    output::growth_table(&growth).write(dir, "growth")?;
    let checks = Table {
        columns: vec!["suite", "name", "value", "bound", "passed"],
        rows: [("invariants", &inv), ("convex", &convex)]
            .iter()
            .flat_map(|(suite, rep)| {
                rep.checks.iter().map(move |c| {
                    vec![
                        suite.to_string(),
                        c.name.clone(),
                        format!("{:.16e}", c.value),
                        format!("{:.16e}", c.bound),
                        u8::from(c.passed).to_string(),
                    ]
                })
            })
            .collect(),
    };
    checks.write(dir, "checks")?;
    let passed = solved(&r) && inv.passed && convex.passed && growth.all_finite && nc.passed;
    let mut failures: Vec<String> = inv.failures();
    failures.extend(convex.failures());
    let mut report = solve_fields(&r, &spec);
    report.insert(
        "invariants".into(),
        serde_json::to_value(&inv).expect("serialize"),
    );
    report.insert(
        "convex".into(),
        serde_json::to_value(&convex).expect("serialize"),
    );
    report.insert(
        "growth".into(),
        serde_json::to_value(&growth).expect("serialize"),
    );
    report.insert(
        "negative_control".into(),
        serde_json::to_value(&nc).expect("serialize"),
    );
    Ok(Outcome {
        passed,
        summary: if failures.is_empty() {
            format!("all checks pass, negative control ratio {:.2e}", nc.ratio)
        } else {
            format!("failed checks: {}", failures.join(", "))
        },
        report,
    })
}

fn cmd_mms(cfg: &RunConfig, dir: &Path, jobs: usize) -> Result<Outcome, Failure> {
    let mms = cfg.mms_spec()?;
    let base = cfg.spec()?;
    let params = &cfg.cascade;
    let table = mms_run_with(&mms, &base, params, |specs| {
        pool::solve_all(specs, params, jobs)
    })?;
    output::mms_table(&table).write(dir, "mms")?;
    let mut report = Map::new();
    report.insert(
        "mms".into(),
        serde_json::to_value(&table).expect("serialize"),
    );
    let worst = table
        .levels
        .iter()
        .filter_map(|l| l.error)
        .fold(0.0, f64::max);
    let mut summary = format!("{} levels, largest error {worst:.3e}", table.levels.len());
    if let (Some(t), Some(s)) = (table.temporal_order, table.spatial_order) {
        summary += &format!(", orders {t:.3} (time) {s:.3} (space)");
    }
    Ok(Outcome {
        passed: table.passed,
        summary,
        report,
    })
}

fn cmd_mosco(cfg: &RunConfig, dir: &Path, jobs: usize) -> Result<Outcome, Failure> {
    let seq = cfg.mosco_sequence()?;
    let params = &cfg.cascade;
    let table = mosco_experiment_with(&seq, params, |specs| pool::solve_all(specs, params, jobs))?;
    output::mosco_table(&table).write(dir, "mosco")?;
    let mut report = Map::new();
    report.insert(
        "mosco".into(),
        serde_json::to_value(&table).expect("serialize"),
    );
    let mut summary = format!(
        "monotone {}, e_last/e_1 {}",
        table.monotone,
        table
            .ratio
            .map(|r| format!("{r:.3}"))
            .unwrap_or_else(|| "n/a".into())
    );
    if let Some(n) = &table.note {
        summary += &format!(" ({n})");
    }
    Ok(Outcome {
        passed: table.passed,
        summary,
        report,
    })
}

/// The cascade schedule cut at `eps_final`, which becomes its last entry.
pub fn truncate_schedule(schedule: &[f64], eps_final: f64) -> Vec<f64> {
    let mut out: Vec<f64> = schedule
        .iter()
        .copied()
        .filter(|e| *e > eps_final * (1.0 + 1e-9))
        .collect();
    out.push(eps_final);
    out
}

struct SweepJob {
    name: String,
    p: f64,
    m: f64,
    eps_final: Option<f64>,
    spec: ProblemSpec,
    params: CascadeParams,
}

fn cmd_sweep(cfg: &RunConfig, dir: &Path, jobs: usize) -> Result<Outcome, Failure> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| ConfigError::invalid("sweep", "the sweep command needs a `sweep` block"))?;
    let finals: Vec<Option<f64>> = if sweep.epsilon_final.is_empty() {
        vec![None]
    } else {
        sweep.epsilon_final.iter().map(|e| Some(*e)).collect()
    };
    let mut work = Vec::new();
    for &(p, m) in &sweep.pairs {
        let spec = cfg.problem.with_exponents(p, m).build(cfg.cascade.delta)?;
        for &eps in &finals {
            let mut params = cfg.cascade.clone();
            let mut name = format!("p{p}_m{m}");
            if let Some(e) = eps {
                params.epsilon_schedule = truncate_schedule(&params.epsilon_schedule, e);
                name += &format!("_eps{e:e}");
            }
            params.validate(Some(&spec))?;
            work.push(SweepJob {
                name,
                p,
                m,
                eps_final: eps,
                spec: spec.clone(),
                params,
            });
        }
    }
    let results = pool::map(&work, jobs, |w| -> Result<(bool, f64, String), Failure> {
        let sub = dir.join(&w.name);
        fs::create_dir_all(&sub)?;
        let r = solve(&w.spec, &w.params)?;
        write_solution(&sub, &r, &w.spec)?;
        let mut report = solve_fields(&r, &w.spec);
        report.insert("p".into(), json!(w.p));
        report.insert("m".into(), json!(w.m));
        output::write_json(&sub.join("report.json"), &Value::Object(report))?;
        Ok((
            solved(&r),
            r.diagnostics.final_residual,
            r.diagnostics.path.clone(),
        ))
    });
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    let mut passed = true;
    for (w, res) in work.iter().zip(results) {
        let eps = w
            .eps_final
            .map(|e| format!("{e:e}"))
            .unwrap_or_else(|| "default".into());
        let (ok, residual, path, error) = match res {
            Ok((ok, res, path)) => (ok, res, path, None),
            Err(Failure::Config(e)) => return Err(Failure::Config(e)),
            Err(e) => (false, f64::NAN, String::new(), Some(e.to_string())),
        };
        passed &= ok;
        rows.push(vec![
            w.name.clone(),
            w.p.to_string(),
            w.m.to_string(),
            eps.clone(),
            path.clone(),
            u8::from(ok).to_string(),
            format!("{residual:.16e}"),
        ]);
        runs.push(json!({
            "name": w.name, "p": w.p, "m": w.m, "epsilon_final": eps,
            "path": path, "passed": ok, "final_residual": residual, "error": error,
        }));
    }
    let table = Table {
        columns: vec![
            "run",
            "p",
            "m",
            "epsilon_final",
            "path",
            "passed",
            "final_residual",
        ],
        rows,
    };
    table.write(dir, "summary")?;
    let n_pass = runs.iter().filter(|r| r["passed"] == json!(true)).count();
    let mut report = Map::new();
    report.insert("runs".into(), Value::Array(runs));
    Ok(Outcome {
        passed,
        summary: format!("{n_pass}/{} runs passed", work.len()),
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_ends_at_final() {
        let s = [1.0, 0.1, 0.01, 0.001];
        assert_eq!(truncate_schedule(&s, 0.01), vec![1.0, 0.1, 0.01]);
        assert_eq!(truncate_schedule(&s, 0.05), vec![1.0, 0.1, 0.05]);
        assert_eq!(truncate_schedule(&s, 2.0), vec![2.0]);
    }
}
