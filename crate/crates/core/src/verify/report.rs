//! Sweep reports and their CSV, JSON and table renderings.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::sweep::{Outputs, TaskOutput};
use super::{CheckConfig, CheckId, CheckResult, Status};
use crate::error::{Error, Result};
use crate::fmt::{ser_f64, sci17, sig6};
use crate::pmf::PmfDocument;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckSummary {
    pub check_id: CheckId,
    pub total: usize,
    pub pass: usize,
    pub fail: usize,
    pub skip: usize,
    pub error: usize,
    /// Smallest margin among evaluated rows, and where it occurred.
    #[serde(serialize_with = "ser_f64")]
    pub worst_margin: f64,
    pub worst_at: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Summary {
    pub total: usize,
    pub pass: usize,
    pub fail: usize,
    pub skip: usize,
    pub error: usize,
    pub checks: Vec<CheckSummary>,
}

/// Everything needed to re-run one failing row.
#[derive(Debug, Clone, Serialize)]
pub struct Reproducer {
    pub row: usize,
    pub check_id: CheckId,
    pub family: String,
    pub params: String,
    pub n: usize,
    /// File holding the pmf (and partner) when a reproducer directory was
    /// configured.
    pub file: Option<String>,
    #[serde(skip)]
    pub(crate) pmf: Option<PmfDocument>,
    #[serde(skip)]
    pub(crate) partner: Option<PmfDocument>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub config: CheckConfig,
    pub results: Vec<CheckResult>,
    pub summary: Summary,
    /// Index of the row after which the sweep stopped on a failure.
    pub aborted_at: Option<usize>,
    pub reproducers: Vec<Reproducer>,
}

#[derive(Serialize)]
struct ReproducerFile<'a> {
    check_id: CheckId,
    n: usize,
    config: &'a CheckConfig,
    pmf: &'a Option<PmfDocument>,
    partner: &'a Option<PmfDocument>,
}

impl Report {
    pub(crate) fn new(config: CheckConfig) -> Self {
        Self { config, results: Vec::new(), summary: Summary::default(), aborted_at: None, reproducers: Vec::new() }
    }

    /// Wraps rows computed outside a sweep.
    pub fn from_results(config: CheckConfig, results: Vec<CheckResult>) -> Self {
        let mut r = Self::new(config);
        r.results = results;
        r.finish();
        r
    }

    pub(crate) fn push_task(&mut self, out: TaskOutput) {
        for row in out.rows {
            if row.is_fail() {
                let (pmf, partner) = match &out.source {
                    Some(s) => (Some(s.pmf.to_document()), s.partner.as_ref().map(|p| p.to_document())),
                    None => (None, None),
                };
                self.reproducers.push(Reproducer {
                    row: self.results.len(),
                    check_id: row.check_id,
                    family: row.family.clone(),
                    params: row.params.clone(),
                    n: row.n,
                    file: None,
                    pmf,
                    partner,
                });
            }
            self.results.push(row);
        }
    }

    pub(crate) fn abort(&mut self) {
        self.aborted_at = self.results.len().checked_sub(1);
    }

    pub(crate) fn finish(&mut self) {
        let mut s = Summary::default();
        for id in CheckId::ALL {
            let rows: Vec<&CheckResult> = self.results.iter().filter(|r| r.check_id == id).collect();
            if rows.is_empty() {
                continue;
            }
            let count = |st: Status| rows.iter().filter(|r| r.status == st).count();
            let worst = rows
                .iter()
                .filter(|r| matches!(r.status, Status::Pass | Status::Fail))
                .min_by(|a, b| a.margin.total_cmp(&b.margin));
            s.checks.push(CheckSummary {
                check_id: id,
                total: rows.len(),
                pass: count(Status::Pass),
                fail: count(Status::Fail),
                skip: count(Status::PreconditionSkip),
                error: count(Status::Error),
                worst_margin: worst.map_or(f64::NAN, |r| r.margin),
                worst_at: worst.map(|r| format!("{} {} n={}", r.family, r.params, r.n)),
            });
        }
        for c in &s.checks {
            s.total += c.total;
            s.pass += c.pass;
            s.fail += c.fail;
            s.skip += c.skip;
            s.error += c.error;
        }
        self.summary = s;
    }

    pub fn has_failures(&self) -> bool {
        self.summary.fail > 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialise") + "\n"
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::invalid(format!("CSV output failed: {e}"));
        w.write_record([
            "check_id", "family", "params", "n", "sigma", "lhs", "rhs", "margin", "certified_error", "tolerance",
            "status", "note", "extras",
        ])
        .map_err(csv_err)?;
        for r in &self.results {
            let extras =
                r.extras.iter().map(|e| format!("{}={}", e.name, sci17(e.value))).collect::<Vec<_>>().join(";");
            w.write_record([
                r.check_id.as_str().to_string(),
                r.family.clone(),
                r.params.clone(),
                r.n.to_string(),
                sci17(r.sigma),
                sci17(r.lhs),
                sci17(r.rhs),
                sci17(r.margin),
                sci17(r.certified_error),
                sci17(r.tolerance),
                r.status.as_str().to_string(),
                r.note.clone(),
                extras,
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::invalid(format!("CSV output failed: {e}")))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("CSV output is UTF-8")
    }

    /// Human-readable table with six significant digits, followed by the
    /// per-check summary.
    pub fn to_table(&self) -> String {
        let header = ["check", "family", "params", "n", "sigma", "lhs", "rhs", "margin", "cert_err", "status"];
        let mut rows: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
        for r in &self.results {
            rows.push(vec![
                r.check_id.to_string(),
                r.family.clone(),
                r.params.clone(),
                r.n.to_string(),
                sig6(r.sigma),
                sig6(r.lhs),
                sig6(r.rhs),
                sig6(r.margin),
                sig6(r.certified_error),
                if r.note.is_empty() { r.status.to_string() } else { format!("{} ({})", r.status, r.note) },
            ]);
        }
        let mut out = render(&rows);
        let s = &self.summary;
        let _ = writeln!(
            out,
            "\n{} rows: {} pass, {} fail, {} precondition-skip, {} error",
            s.total, s.pass, s.fail, s.skip, s.error
        );
        let mut srows = vec![["check", "pass", "fail", "skip", "error", "worst_margin", "worst_at"]
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()];
        for c in &s.checks {
            srows.push(vec![
                c.check_id.to_string(),
                c.pass.to_string(),
                c.fail.to_string(),
                c.skip.to_string(),
                c.error.to_string(),
                sig6(c.worst_margin),
                c.worst_at.clone().unwrap_or_default(),
            ]);
        }
        out.push_str(&render(&srows));
        if let Some(i) = self.aborted_at {
            let _ = writeln!(out, "aborted after row {i}");
        }
        out
    }

    /// Writes the configured CSV and JSON files and the reproducers.
    pub fn write_outputs(&mut self, outputs: &Outputs) -> Result<()> {
        if let Some(dir) = &outputs.reproducer_dir {
            if !self.reproducers.is_empty() {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            for rep in &mut self.reproducers {
                let path: PathBuf = dir.join(format!("row{}_{}.json", rep.row, rep.check_id));
                let file = ReproducerFile {
                    check_id: rep.check_id,
                    n: rep.n,
                    config: &self.config,
                    pmf: &rep.pmf,
                    partner: &rep.partner,
                };
                let text = serde_json::to_string_pretty(&file)? + "\n";
                std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
                rep.file = Some(path.display().to_string());
            }
        }
        if let Some(path) = &outputs.csv {
            let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
            self.write_csv(std::io::BufWriter::new(f))?;
        }
        if let Some(path) = &outputs.json {
            write_text(path, &self.to_json())?;
        }
        Ok(())
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn render(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let widths: Vec<usize> =
        (0..cols).map(|c| rows.iter().map(|r| r.get(c).map_or(0, |s| s.chars().count())).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r.iter().enumerate().map(|(c, s)| format!("{s:<w$}", w = widths[c])).collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}
