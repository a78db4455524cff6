use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::dif::Algorithm;
use crate::error::{Error, Result};

use super::metrics::{relative_rmse, ErrorSums};

pub const HEADER: &str = "q1,sigma2,algorithm,pos_rmse,vel_rmse,diverged,V_pos,V_vel";

/// Iterated filter and its non-iterated counterpart.
pub const PAIRS: [(Algorithm, Algorithm); 3] = [
    (Algorithm::Diekf, Algorithm::Ekf),
    (Algorithm::Diukf, Algorithm::Ukf),
    (Algorithm::Diplf, Algorithm::Ukf),
];

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmResult {
    pub algorithm: Algorithm,
    pub pos_rmse: f64,
    pub vel_rmse: f64,
    pub diverged: bool,
    pub failed_runs: usize,
    /// Per-run error sums in (trajectory, target) order.
    pub run_sums: Vec<ErrorSums>,
    /// Digest of every measurement sequence the algorithm consumed.
    pub measurement_digest: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigResult {
    pub index: usize,
    pub q1: f64,
    pub sigma2: f64,
    pub results: Vec<AlgorithmResult>,
}

impl ConfigResult {
    pub fn get(&self, algorithm: Algorithm) -> Option<&AlgorithmResult> {
        self.results.iter().find(|r| r.algorithm == algorithm)
    }

    /// `(V_pos, V_vel)` of an iterated filter against its baseline.
    pub fn relative(&self, algorithm: Algorithm) -> Option<(f64, f64)> {
        let it = self.get(algorithm)?;
        let base = self.get(algorithm.baseline()?)?;
        Some((
            relative_rmse(it.pos_rmse, base.pos_rmse),
            relative_rmse(it.vel_rmse, base.vel_rmse),
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmseReport {
    pub q1_grid: Vec<f64>,
    pub sigma2_grid: Vec<f64>,
    /// Indexed by config index (q1-major).
    pub configs: Vec<ConfigResult>,
}

/// One CSV line of the report file.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub q1: f64,
    pub sigma2: f64,
    pub algorithm: Algorithm,
    pub pos_rmse: f64,
    pub vel_rmse: f64,
    pub diverged: bool,
    pub v_pos: Option<f64>,
    pub v_vel: Option<f64>,
}

impl RmseReport {
    pub fn algorithms(&self) -> Vec<Algorithm> {
        self.configs
            .first()
            .map(|c| c.results.iter().map(|r| r.algorithm).collect())
            .unwrap_or_default()
    }

    pub fn divergence_count(&self, algorithm: Algorithm) -> usize {
        self.configs
            .iter()
            .filter(|c| c.get(algorithm).is_some_and(|r| r.diverged))
            .count()
    }

    /// Rows follow `q1_grid`, columns follow `sigma2_grid`.
    pub fn divergence_matrix(&self, algorithm: Algorithm) -> Vec<Vec<bool>> {
        let n_s = self.sigma2_grid.len();
        self.configs
            .chunks(n_s)
            .map(|row| {
                row.iter()
                    .map(|c| c.get(algorithm).is_some_and(|r| r.diverged))
                    .collect()
            })
            .collect()
    }

    pub fn rows(&self) -> Vec<ReportRow> {
        self.configs
            .iter()
            .flat_map(|c| {
                c.results.iter().map(move |r| {
                    let v = c.relative(r.algorithm);
                    ReportRow {
                        q1: c.q1,
                        sigma2: c.sigma2,
                        algorithm: r.algorithm,
                        pos_rmse: r.pos_rmse,
                        vel_rmse: r.vel_rmse,
                        diverged: r.diverged,
                        v_pos: v.map(|v| v.0),
                        v_vel: v.map(|v| v.1),
                    }
                })
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        rows_to_csv(&self.rows())
    }

    /// Text table of divergence flags per algorithm ("x" diverged, "." not).
    pub fn divergence_summary(&self) -> String {
        let mut out = String::new();
        for alg in self.algorithms() {
            let _ = writeln!(
                out,
                "{alg}: diverged in {}/{} configurations",
                self.divergence_count(alg),
                self.configs.len()
            );
            let _ = writeln!(
                out,
                "{:>10} | {}",
                "q1\\sigma2",
                self.sigma2_grid
                    .iter()
                    .map(|v| format!("{v:>7}"))
                    .collect::<Vec<_>>()
                    .join(" ")
            );
            for (q1, row) in self.q1_grid.iter().zip(self.divergence_matrix(alg)) {
                let cells = row.iter().map(|d| format!("{:>7}", if *d { "x" } else { "." }));
                let _ = writeln!(out, "{q1:>10} | {}", cells.collect::<Vec<_>>().join(" "));
            }
            out.push('\n');
        }
        out
    }

    /// Writes `report.csv` plus per-pair 5×5 style matrices. Returns the
    /// paths written.
    pub fn write_files(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        let mut written = Vec::new();
        let mut write = |name: String, body: String| -> Result<()> {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            written.push(path);
            Ok(())
        };
        write("report.csv".into(), self.to_csv())?;

        let present = self.algorithms();
        for (iter, base) in PAIRS {
            if !present.contains(&iter) || !present.contains(&base) {
                continue;
            }
            let metrics: [(&str, Metric); 6] = [
                (
                    "pos_rmse_iter",
                    Box::new(move |c| c.get(iter).map_or(f64::NAN, |r| r.pos_rmse)),
                ),
                (
                    "pos_rmse_base",
                    Box::new(move |c| c.get(base).map_or(f64::NAN, |r| r.pos_rmse)),
                ),
                (
                    "vel_rmse_iter",
                    Box::new(move |c| c.get(iter).map_or(f64::NAN, |r| r.vel_rmse)),
                ),
                (
                    "vel_rmse_base",
                    Box::new(move |c| c.get(base).map_or(f64::NAN, |r| r.vel_rmse)),
                ),
                ("V_pos", Box::new(move |c| c.relative(iter).map_or(f64::NAN, |v| v.0))),
                ("V_vel", Box::new(move |c| c.relative(iter).map_or(f64::NAN, |v| v.1))),
            ];
            for (metric, value) in metrics.iter() {
                let mut body = format!("q1\\sigma2,{}\n", join(&self.sigma2_grid, |v| v.to_string()));
                for (q1, row) in self.q1_grid.iter().zip(self.configs.chunks(self.sigma2_grid.len())) {
                    let _ = writeln!(body, "{q1},{}", join(row, |c| value(c).to_string()));
                }
                write(format!("matrix_{}_{}_{metric}.csv", iter.name(), base.name()), body)?;
            }
        }
        Ok(written)
    }
}

type Metric = Box<dyn Fn(&ConfigResult) -> f64>;

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(",")
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn rows_to_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.q1,
            r.sigma2,
            r.algorithm,
            r.pos_rmse,
            r.vel_rmse,
            u8::from(r.diverged),
            opt(r.v_pos),
            opt(r.v_vel)
        );
    }
    out
}

pub fn parse_report_csv(text: &str) -> Result<Vec<ReportRow>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().unwrap_or("");
    if header.trim() != HEADER {
        return Err(Error::Schema(format!(
            "expected header `{HEADER}`, found `{}`",
            header.trim()
        )));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let line_no = i + 2;
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 8 {
                return Err(Error::Schema(format!(
                    "line {line_no}: expected 8 fields, found {}",
                    fields.len()
                )));
            }
            let real = |idx: usize| {
                fields[idx]
                    .parse::<f64>()
                    .map_err(|e| Error::Schema(format!("line {line_no} field {}: {e}", idx + 1)))
            };
            let optional = |idx: usize| {
                if fields[idx].is_empty() {
                    Ok(None)
                } else {
                    real(idx).map(Some)
                }
            };
            let diverged = match fields[5] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::Schema(format!(
                        "line {line_no}: diverged must be 0 or 1, found `{other}`"
                    )))
                }
            };
            Ok(ReportRow {
                q1: real(0)?,
                sigma2: real(1)?,
                algorithm: fields[2]
                    .parse()
                    .map_err(|e: Error| Error::Schema(format!("line {line_no}: {e}")))?,
                pos_rmse: real(3)?,
                vel_rmse: real(4)?,
                diverged,
                v_pos: optional(6)?,
                v_vel: optional(7)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairCell {
    pub iter: Option<ReportRow>,
    pub base: Option<ReportRow>,
}

/// Grid of (iterated, baseline) results for one algorithm pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMatrix {
    pub iter: Algorithm,
    pub base: Algorithm,
    pub q1s: Vec<f64>,
    pub sigma2s: Vec<f64>,
    /// `cells[i][j]` is `(q1s[i], sigma2s[j])`.
    pub cells: Vec<Vec<PairCell>>,
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

impl PairMatrix {
    pub fn from_rows(rows: &[ReportRow], iter: Algorithm, base: Algorithm) -> Option<Self> {
        if !rows.iter().any(|r| r.algorithm == iter) || !rows.iter().any(|r| r.algorithm == base) {
            return None;
        }
        let q1s = sorted_unique(rows.iter().map(|r| r.q1).collect());
        let sigma2s = sorted_unique(rows.iter().map(|r| r.sigma2).collect());
        let find = |alg: Algorithm, q1: f64, s2: f64| {
            rows.iter()
                .find(|r| r.algorithm == alg && r.q1 == q1 && r.sigma2 == s2)
                .cloned()
        };
        let cells = q1s
            .iter()
            .map(|&q1| {
                sigma2s
                    .iter()
                    .map(|&s2| PairCell {
                        iter: find(iter, q1, s2),
                        base: find(base, q1, s2),
                    })
                    .collect()
            })
            .collect();
        Some(Self {
            iter,
            base,
            q1s,
            sigma2s,
            cells,
        })
    }

    fn render(&self, velocity: bool) -> String {
        const DASH: &str = "\u{2212}";
        let value = |r: &Option<ReportRow>| match r {
            None => "?".to_string(),
            Some(r) if r.diverged => DASH.to_string(),
            Some(r) => format!("{:.3}", if velocity { r.vel_rmse } else { r.pos_rmse }),
        };
        let width = 24;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} / {} {} RMSE (iterated/baseline, V)",
            self.iter,
            self.base,
            if velocity { "velocity" } else { "position" }
        );
        let _ = write!(out, "{:>10} |", "q1\\sigma2");
        for s2 in &self.sigma2s {
            let _ = write!(out, "{:>width$}", s2);
        }
        out.push('\n');
        for (q1, row) in self.q1s.iter().zip(&self.cells) {
            let _ = write!(out, "{q1:>10} |");
            for cell in row {
                let v = cell
                    .iter
                    .as_ref()
                    .and_then(|r| if velocity { r.v_vel } else { r.v_pos })
                    .map(|v| format!(" ({v:.2})"))
                    .unwrap_or_default();
                let text = format!("{}/{}{}", value(&cell.iter), value(&cell.base), v);
                let _ = write!(out, "{text:>width$}");
            }
            out.push('\n');
        }
        out
    }
}

/// Text matrices per algorithm pair, position then velocity.
pub fn render_report(rows: &[ReportRow]) -> (Vec<PairMatrix>, String) {
    let matrices: Vec<PairMatrix> = PAIRS
        .iter()
        .filter_map(|&(i, b)| PairMatrix::from_rows(rows, i, b))
        .collect();
    let mut text = String::new();
    for m in &matrices {
        text.push_str(&m.render(false));
        text.push('\n');
        text.push_str(&m.render(true));
        text.push('\n');
    }
    (matrices, text)
}
