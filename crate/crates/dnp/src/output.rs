//! Trajectory CSV, gnuplot mirrors, tables and the JSON report.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use dnp_core::cascade::StageRecord;
use dnp_core::verify::{GrowthReport, MmsTable, MoscoTable, GROWTH_LABELS};
use dnp_core::{PeriodicTrajectory, ProblemSpec};

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_else(|| "nan".into())
}

/// `t,x,value` rows, time-major.
pub fn trajectory_csv(u: &PeriodicTrajectory, spec: &ProblemSpec) -> String {
    let mut s = String::from("t,x,value\n");
    for n in 0..u.steps() {
        let t = spec.tmesh.time(n);
        for (i, v) in u.slice(n).iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", num(t), num(spec.smesh.node(i)), num(*v));
        }
    }
    s
}

/// Same data as blank-line separated blocks for `splot`.
pub fn trajectory_dat(u: &PeriodicTrajectory, spec: &ProblemSpec) -> String {
    let mut s = String::from("# t x value\n");
    for n in 0..u.steps() {
        let t = spec.tmesh.time(n);
        for (i, v) in u.slice(n).iter().enumerate() {
            let _ = writeln!(s, "{} {} {}", num(t), num(spec.smesh.node(i)), num(*v));
        }
        s.push('\n');
    }
    s
}

/// Parses a `t,x,value` file back into its value column.
pub fn read_trajectory_values(text: &str) -> Result<Vec<f64>, String> {
    let mut lines = text.lines();
    if lines.next() != Some("t,x,value") {
        return Err("missing t,x,value header".into());
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.rsplit(',')
                .next()
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| format!("bad row `{l}`"))
        })
        .collect()
}

/// A table rendered as CSV and as a whitespace `.dat` mirror.
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    pub fn dat(&self) -> String {
        let mut s = format!("# {}\n", self.columns.join(" "));
        for r in &self.rows {
            s.push_str(&r.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, dir: &Path, stem: &str) -> io::Result<()> {
        fs::write(dir.join(format!("{stem}.csv")), self.csv())?;
        fs::write(dir.join(format!("{stem}.dat")), self.dat())
    }
}

pub fn stage_table(stages: &[StageRecord]) -> Table {
    Table {
        columns: vec![
            "stage",
            "kind",
            "epsilon",
            "mu",
            "converged",
            "iterations",
            "residual_ap",
            "energy_margin",
        ],
        rows: stages
            .iter()
            .enumerate()
            .map(|(k, r)| {
                vec![
                    k.to_string(),
                    serde_json::to_value(r.kind)
                        .ok()
                        .and_then(|v| v.as_str().map(String::from))
                        .unwrap_or_default(),
                    opt(r.epsilon),
                    opt(r.mu),
                    u8::from(r.converged).to_string(),
                    r.iterations.to_string(),
                    opt(r.residual_ap),
                    opt(r.energy_margin),
                ]
            })
            .collect(),
    }
}

pub fn mms_table(t: &MmsTable) -> Table {
    Table {
        columns: vec![
            "sweep",
            "level",
            "nodes",
            "steps",
            "dx",
            "dt",
            "error",
            "increment",
            "residual",
            "margin",
        ],
        rows: t
            .levels
            .iter()
            .map(|l| {
                vec![
                    l.sweep.clone(),
                    l.level.to_string(),
                    l.nodes.to_string(),
                    l.steps.to_string(),
                    num(l.dx),
                    num(l.dt),
                    opt(l.error),
                    opt(l.increment),
                    num(l.residual),
                    opt(l.error.map(|e| t.tolerance - e)),
                ]
            })
            .collect(),
    }
}

pub fn mosco_table(t: &MoscoTable) -> Table {
    Table {
        columns: vec!["n", "error", "residual", "margin"],
        rows: t
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.n.to_string(),
                    opt(r.error),
                    num(r.residual),
                    opt(r.error.map(|e| e - t.floor)),
                ]
            })
            .collect(),
    }
}

pub fn growth_table(g: &GrowthReport) -> Table {
    let mut columns = vec!["magnitude"];
    columns.extend(GROWTH_LABELS);
    Table {
        columns,
        rows: g
            .rows
            .iter()
            .map(|r| {
                let mut row = vec![num(r.magnitude)];
                row.extend(r.constants.iter().map(|c| num(*c)));
                row
            })
            .collect(),
    }
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}
