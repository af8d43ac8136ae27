//! CSV tables with the resolved configuration echoed as `#` comments.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use nfloc::pipeline::{ConvergenceRow, HeatmapCell, RfRow, SingleRun, SweepRow};

pub struct Table {
    header: Vec<String>,
    columns: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

// Shortest round-trip formatting keeps reruns byte-identical across runs and
// lets plotting tools recover the exact f64.
fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x != 0.0 && x.is_finite() && !(1e-4..1e15).contains(&x.abs()) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            header: Vec::new(),
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn comment(&mut self, line: impl Into<String>) {
        self.header.push(line.into());
    }

    /// Embeds a multi-line text block, one comment line per input line.
    pub fn comment_block(&mut self, text: &str) {
        for line in text.lines() {
            self.header.push(line.to_string());
        }
    }

    /// Puts the comments of `other` ahead of this table's own.
    pub fn prepend_comments(&mut self, other: Table) {
        let mut header = other.header;
        header.append(&mut self.header);
        self.header = header;
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn to_bytes(&self) -> io::Result<Vec<u8>> {
        let mut buf = Vec::new();
        for line in &self.header {
            if line.is_empty() {
                buf.extend_from_slice(b"#\n");
            } else {
                writeln!(buf, "# {line}")?;
            }
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(buf);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.into_inner().map_err(|e| e.into_error())
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        fs::write(path, self.to_bytes()?)
    }
}

pub fn sweep_table(rows: &[SweepRow]) -> Table {
    let mut t = Table::new(&["scheme", "snr_db", "rmse_m", "ci95_m", "n_trials", "seed"]);
    for r in rows {
        t.rows.push(vec![
            r.scheme.clone(),
            num(r.snr_db),
            num(r.summary.rmse),
            num(r.summary.ci95),
            r.summary.n_trials.to_string(),
            r.seed.to_string(),
        ]);
    }
    t
}

pub fn convergence_table(rows: &[ConvergenceRow]) -> Table {
    let mut t = Table::new(&["scheme", "snr_db", "iteration", "rmse_m", "ci95_m", "n_trials"]);
    for r in rows {
        t.rows.push(vec![
            r.scheme.clone(),
            num(r.snr_db),
            r.iteration.to_string(),
            num(r.summary.rmse),
            num(r.summary.ci95),
            r.summary.n_trials.to_string(),
        ]);
    }
    t
}

pub fn rf_table(rows: &[RfRow]) -> Table {
    let mut t = Table::new(&["scheme", "n_rf", "snr_db", "rmse_m", "ci95_m", "n_trials"]);
    for r in rows {
        t.rows.push(vec![
            r.scheme.clone(),
            r.n_rf.to_string(),
            num(r.snr_db),
            num(r.summary.rmse),
            num(r.summary.ci95),
            r.summary.n_trials.to_string(),
        ]);
    }
    t
}

pub fn heatmap_table(cells: &[HeatmapCell]) -> Table {
    let mut t = Table::new(&["x_m", "y_m", "rmse_m"]);
    for c in cells {
        t.rows.push(vec![num(c.x), num(c.y), num(c.rmse)]);
    }
    t
}

/// One row per user per iteration; iteration 0 is the initialization.
pub fn track_table(runs: &[SingleRun]) -> Table {
    let mut t = Table::new(&["scheme", "iteration", "user_index", "d_m", "theta_rad", "x_m", "y_m", "objective"]);
    for run in runs {
        let loc = &run.result.localization;
        for (k, set) in loc.per_iteration_track.iter().enumerate() {
            let objective = loc.objective_track.get(k).copied().unwrap_or(f64::NAN);
            for (m, p) in set.as_slice().iter().enumerate() {
                let (x, y) = p.xy();
                t.rows.push(vec![
                    run.scheme.clone(),
                    k.to_string(),
                    m.to_string(),
                    num(p.distance),
                    num(p.azimuth),
                    num(x),
                    num(y),
                    num(objective),
                ]);
            }
        }
    }
    t
}
