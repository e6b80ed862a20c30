//! Report files: `report.csv`, `confusion.csv`, `summary.txt`, `sweep.csv`.
//!
//! All CSVs are comma-separated with a header row, `.` decimals and LF line
//! endings. Floats use Rust's shortest round-trip formatting.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Duration;

use serde_json::json;

use super::config::ExperimentConfig;
use crate::classifier::Evaluation;
use crate::error::{Error, Result};
use crate::matcher::MatchResult;
use crate::mnist::{Image, NUM_CLASSES};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))
}

fn provenance(out: &mut String, config: &ExperimentConfig) {
    let _ = writeln!(out, "# code_version = {CODE_VERSION}");
    for (k, v) in config.to_pairs() {
        let _ = writeln!(out, "# {k} = {v}");
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub experiment: &'static str,
    pub warnings: Vec<String>,
    pub models: usize,
    pub evaluation: Evaluation,
    pub wall_time: Duration,
    /// Per-test shifts, for the shift experiment.
    pub shifts: Option<Vec<[i32; 2]>>,
}

impl RunReport {
    pub fn accuracy(&self) -> f64 {
        self.evaluation.accuracy()
    }

    /// `test_id,true,predicted,best_model_id,best_cost`
    pub fn report_csv(&self) -> String {
        let mut out = String::from("test_id,true,predicted,best_model_id,best_cost\n");
        for o in &self.evaluation.outcomes {
            let c = &o.classification;
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                o.test_id, o.truth, c.predicted, c.best_model_id, c.best_cost
            );
        }
        out
    }

    /// Rows are true classes, columns predicted classes.
    pub fn confusion_csv(&self) -> String {
        confusion_csv(&self.evaluation)
    }

    /// Provenance header followed by a JSON block with the results.
    pub fn summary(&self) -> String {
        let e = &self.evaluation;
        let mut out = String::new();
        let _ = writeln!(out, "# experiment = {}", self.experiment);
        provenance(&mut out, &self.config);
        let _ = writeln!(out, "# models = {}", self.models);
        let _ = writeln!(out, "# tests = {}", e.total());
        for w in &self.warnings {
            let _ = writeln!(out, "# warning = {w}");
        }
        let _ = writeln!(out, "# wall_time_s = {:.3}", self.wall_time.as_secs_f64());
        let per_class: Vec<Option<f64>> = e.per_class_accuracy().to_vec();
        let confusion: Vec<Vec<usize>> = e.confusion.iter().map(|r| r.to_vec()).collect();
        let mut block = json!({
            "accuracy": e.accuracy(),
            "correct": e.correct(),
            "total": e.total(),
            "per_class_accuracy": per_class,
            "confusion": confusion,
        });
        if let Some(shifts) = &self.shifts {
            block["shifts"] = json!(shifts);
        }
        out.push_str(&serde_json::to_string_pretty(&block).expect("plain json"));
        out.push('\n');
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_file(dir, "report.csv", &self.report_csv())?;
        write_file(dir, "confusion.csv", &self.confusion_csv())?;
        write_file(dir, "summary.txt", &self.summary())
    }
}

pub fn confusion_csv(e: &Evaluation) -> String {
    let mut out = String::from("true");
    for c in 0..NUM_CLASSES {
        let _ = write!(out, ",{c}");
    }
    out.push('\n');
    for (t, row) in e.confusion.iter().enumerate() {
        let _ = write!(out, "{t}");
        for n in row {
            let _ = write!(out, ",{n}");
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n_x: usize,
    pub n_d: usize,
    pub mu: f64,
    pub lambda: f64,
    pub accuracy: Option<f64>,
    /// Seconds for the pass that produced this row; rows differing only in
    /// lambda share one pass.
    pub wall_time: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub config: ExperimentConfig,
    pub models: usize,
    pub tests: usize,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// Best row by accuracy; the earliest row wins ties.
    pub fn best(&self) -> Option<&SweepRow> {
        self.rows
            .iter()
            .filter(|r| r.accuracy.is_some())
            .fold(None, |best: Option<&SweepRow>, r| match best {
                Some(b) if b.accuracy >= r.accuracy => Some(b),
                _ => Some(r),
            })
    }

    pub fn find(&self, n_x: usize, n_d: usize, mu: f64, lambda: f64) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.n_x == n_x && r.n_d == n_d && r.mu == mu && r.lambda == lambda)
    }

    /// `N_x,N_d,mu,lambda,accuracy,wall_time_s,error` after a `#` provenance header.
    pub fn csv(&self) -> String {
        let mut out = String::new();
        provenance(&mut out, &self.config);
        let _ = writeln!(out, "# models = {}", self.models);
        let _ = writeln!(out, "# tests = {}", self.tests);
        out.push_str("N_x,N_d,mu,lambda,accuracy,wall_time_s,error\n");
        for r in &self.rows {
            let acc = r.accuracy.map(|a| a.to_string()).unwrap_or_default();
            let err = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.3},{}",
                r.n_x, r.n_d, r.mu, r.lambda, acc, r.wall_time, err
            );
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_file(dir, "sweep.csv", &self.csv())
    }
}

/// `test_id,model_id,model_class,total_cost,distortion,similarity,offset_x,offset_y`
pub fn match_csv(rows: &[(usize, usize, u8, &MatchResult)]) -> String {
    let mut out =
        String::from("test_id,model_id,model_class,total_cost,distortion,similarity,offset_x,offset_y\n");
    for (test_id, model_id, class, r) in rows {
        let _ = writeln!(
            out,
            "{test_id},{model_id},{class},{},{},{},{},{}",
            r.total_cost, r.distortion, r.similarity, r.offset[0], r.offset[1]
        );
    }
    out
}

/// Binary PGM of `img` magnified by `scale`, with graph nodes drawn white
/// and links drawn mid-grey. Links that wrap around the canvas are skipped.
pub fn overlay_pgm(img: &Image, nodes: &[[usize; 2]], links: &[(usize, usize)], scale: usize) -> Vec<u8> {
    let scale = scale.max(1);
    let (w, h) = (img.width() * scale, img.height() * scale);
    let mut px = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            px[y * w + x] = (img.get(x / scale, y / scale) * 150.0).round().clamp(0.0, 150.0) as u8;
        }
    }
    let centre = |n: [usize; 2]| [(n[0] * scale + scale / 2) as f64, (n[1] * scale + scale / 2) as f64];
    for &(i, j) in links {
        let (a, b) = (nodes[i], nodes[j]);
        if a[0].abs_diff(b[0]) > img.width() / 2 || a[1].abs_diff(b[1]) > img.height() / 2 {
            continue;
        }
        let (p, q) = (centre(a), centre(b));
        let steps = ((q[0] - p[0]).abs().max((q[1] - p[1]).abs()) as usize).max(1);
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            let x = (p[0] + t * (q[0] - p[0])).round() as usize;
            let y = (p[1] + t * (q[1] - p[1])).round() as usize;
            if x < w && y < h {
                px[y * w + x] = px[y * w + x].max(160);
            }
        }
    }
    let r = (scale / 4) as i64;
    for &n in nodes {
        let c = centre(n);
        for dy in -r..=r {
            for dx in -r..=r {
                let (x, y) = (c[0] as i64 + dx, c[1] as i64 + dy);
                if (0..w as i64).contains(&x) && (0..h as i64).contains(&y) {
                    px[y as usize * w + x as usize] = 255;
                }
            }
        }
    }
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend_from_slice(&px);
    out
}
