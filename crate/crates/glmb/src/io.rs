//! On-disk output formats: CSV tables and JSON-lines diagnostics, plus
//! atomic file writing. Column layouts are documented in `docs/formats.md`
//! and carried in a versioned header line.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use nalgebra::DVector;

use crate::filter::{StateEstimate, StepDiagnostics};
use crate::ospa::OspaDistance;

/// Estimated tracks per step: one row per (step, label).
pub fn estimates_csv(estimates: &[StateEstimate]) -> String {
    let mut out = String::from("#glmb-estimates v1\nstep,label_birth,label_index,x,y,vx,vy\n");
    for est in estimates {
        for (label, state) in &est.tracks {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                est.time, label.birth_time, label.index, state[0], state[1], state[2], state[3]
            )
            .unwrap();
        }
    }
    out
}

/// OSPA series: one row per step.
pub fn ospa_csv(series: &[OspaDistance]) -> String {
    let mut out = String::from("#glmb-ospa v1\nstep,total,loc,card\n");
    for (step, d) in series.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{}",
            step, d.total, d.localization, d.cardinality
        )
        .unwrap();
    }
    out
}

/// Per-step filter diagnostics as CSV.
pub fn diagnostics_csv(diagnostics: &[StepDiagnostics]) -> String {
    let mut out = String::from(
        "#glmb-diagnostics v1\nstep,measurements,hypotheses,prediction_l1_error,update_l1_error,ess,map_cardinality,ranked_assignment_calls,wall_ms\n",
    );
    for d in diagnostics {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            d.step,
            d.measurement_count,
            d.hypothesis_count,
            d.prediction_l1_error,
            d.update_l1_error,
            d.ess,
            d.map_cardinality,
            d.ranked_assignment_calls,
            d.wall_ms
        )
        .unwrap();
    }
    out
}

/// Per-step filter diagnostics as JSON lines.
pub fn diagnostics_jsonl(diagnostics: &[StepDiagnostics]) -> String {
    let mut out = String::new();
    for d in diagnostics {
        out.push_str(&serde_json::to_string(d).expect("diagnostics serialization"));
        out.push('\n');
    }
    out
}

/// Ground-truth states: one row per (step, track).
pub fn truth_csv(truth: &[Vec<(u32, DVector<f64>)>]) -> String {
    let mut out = String::from("#glmb-truth v1\nstep,track,x,y,vx,vy\n");
    for (step, states) in truth.iter().enumerate() {
        for (id, x) in states {
            writeln!(out, "{},{},{},{},{},{}", step, id, x[0], x[1], x[2], x[3]).unwrap();
        }
    }
    out
}

/// Measurement dump: one row per (step, point).
pub fn measurements_csv(scans: &[Vec<DVector<f64>>]) -> String {
    let mut out = String::from("#glmb-measurements v1\nstep,x,y\n");
    for (step, scan) in scans.iter().enumerate() {
        for z in scan {
            writeln!(out, "{},{},{}", step, z[0], z[1]).unwrap();
        }
    }
    out
}

/// Writes via a temp file in the same directory plus a rename, so readers
/// never observe a partial file.
pub fn write_atomic(path: &Path, content: &str) -> io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out"),
        std::process::id()
    ));
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::Label;
    use std::collections::BTreeMap;

    #[test]
    fn estimates_csv_layout() {
        let mut tracks = BTreeMap::new();
        tracks.insert(
            Label::new(2, 1),
            DVector::from_vec(vec![1.5, -2.0, 0.25, 0.0]),
        );
        let est = StateEstimate { time: 7, tracks };
        let text = estimates_csv(&[est]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "#glmb-estimates v1");
        assert_eq!(lines[1], "step,label_birth,label_index,x,y,vx,vy");
        assert_eq!(lines[2], "7,2,1,1.5,-2,0.25,0");
    }

    #[test]
    fn diagnostics_jsonl_lines_parse() {
        let d = StepDiagnostics {
            step: 3,
            measurement_count: 7,
            hypothesis_count: 42,
            prediction_l1_error: 0.01,
            update_l1_error: 0.0,
            ess: 5.5,
            map_cardinality: 2,
            cardinality_distribution: vec![0.1, 0.2, 0.7],
            ranked_assignment_calls: 11,
            wall_ms: 1.25,
        };
        let text = diagnostics_jsonl(&[d]);
        let v: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(v["step"], 3);
        assert_eq!(v["map_cardinality"], 2);
        assert_eq!(v["cardinality_distribution"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = std::env::temp_dir().join(format!("glmb-io-test-{}", std::process::id()));
        let path = dir.join("x.csv");
        write_atomic(&path, "a\n").unwrap();
        write_atomic(&path, "b\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "b\n");
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
