use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use super::HarnessError;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// One of `<`, `<=`, `>=`, `==`.
    pub cmp: &'static str,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: &str, value: f64, cmp: &'static str, bound: f64) -> Self {
        let pass = match cmp {
            "<" => value < bound,
            "<=" => value <= bound,
            ">=" => value >= bound,
            "==" => value == bound,
            _ => panic!("unknown comparison {cmp}"),
        };
        Check { name: name.into(), value, cmp, bound, pass }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileEntry {
    pub name: String,
    /// Data rows, header excluded.
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub metrics: Vec<(String, f64)>,
    pub checks: Vec<Check>,
    pub files: Vec<FileEntry>,
    /// Not written to any output file, so reruns stay byte-identical.
    pub wall_clock: Duration,
}

impl RunReport {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn summary_text(&self) -> String {
        let mut s = format!("scenario = {}\nseed = {}\n\n[metrics]\n", self.scenario, self.seed);
        for (name, v) in &self.metrics {
            s.push_str(&format!("{name} = {v:?}\n"));
        }
        s.push_str("\n[checks]\n");
        for c in &self.checks {
            let verdict = if c.pass { "pass" } else { "FAIL" };
            s.push_str(&format!("{} = {:?} {} {:?} : {verdict}\n", c.name, c.value, c.cmp, c.bound));
        }
        s.push_str("\n[files]\n");
        for f in &self.files {
            s.push_str(&format!("{} rows={}\n", f.name, f.rows));
        }
        s
    }
}

/// Writes output files and records them for the manifest.
pub(crate) struct Outputs {
    dir: PathBuf,
    pub files: Vec<FileEntry>,
}

fn io(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Io(format!("{}: {e}", path.display()))
}

pub(crate) fn fmt(v: f64) -> String {
    format!("{v:?}")
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self, HarnessError> {
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        Ok(Outputs { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), HarnessError>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| io(&path, e))?;
        w.write_record(header).map_err(|e| io(&path, e))?;
        let mut count = 0;
        for r in rows {
            w.write_record(r).map_err(|e| io(&path, e))?;
            count += 1;
        }
        w.flush().map_err(|e| io(&path, e))?;
        self.files.push(FileEntry { name: name.into(), rows: count });
        Ok(())
    }

    /// A file written elsewhere (CSV already on disk) or verbatim text.
    pub fn text(&mut self, name: &str, text: &str, rows: usize) -> Result<(), HarnessError> {
        let path = self.path(name);
        fs::write(&path, text).map_err(|e| io(&path, e))?;
        self.files.push(FileEntry { name: name.into(), rows });
        Ok(())
    }

    pub fn record(&mut self, name: &str, rows: usize) {
        self.files.push(FileEntry { name: name.into(), rows });
    }

    pub fn finish(
        mut self,
        scenario: &str,
        seed: u64,
        metrics: Vec<(String, f64)>,
        checks: Vec<Check>,
        wall_clock: Duration,
    ) -> Result<RunReport, HarnessError> {
        let mut report =
            RunReport { scenario: scenario.into(), seed, out_dir: self.dir.clone(), metrics, checks, files: Vec::new(), wall_clock };
        report.files = std::mem::take(&mut self.files);
        let summary = report.summary_text();
        let path = self.path("summary.txt");
        fs::write(&path, &summary).map_err(|e| io(&path, e))?;
        report.files.push(FileEntry { name: "summary.txt".into(), rows: summary.lines().count() });
        Ok(report)
    }
}
