//! Result tables, verdicts and their on-disk form.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::maps::Counters;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    /// Reported without a pass/fail judgement.
    Info,
    /// Not enough data for the rule to apply.
    Insufficient,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
            Outcome::Info => "info",
            Outcome::Insufficient => "insufficient",
        }
    }
}

/// An outcome tied to a named acceptance rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Verdict {
    pub outcome: Outcome,
    pub rule: &'static str,
}

impl Verdict {
    pub fn pass(rule: &'static str) -> Self {
        Verdict { outcome: Outcome::Pass, rule }
    }

    pub fn fail(rule: &'static str) -> Self {
        Verdict { outcome: Outcome::Fail, rule }
    }

    pub fn info(rule: &'static str) -> Self {
        Verdict { outcome: Outcome::Info, rule }
    }

    pub fn insufficient(rule: &'static str) -> Self {
        Verdict { outcome: Outcome::Insufficient, rule }
    }

    pub fn check(ok: bool, rule: &'static str) -> Self {
        if ok {
            Self::pass(rule)
        } else {
            Self::fail(rule)
        }
    }

    pub fn is_blocking(&self) -> bool {
        matches!(self.outcome, Outcome::Fail | Outcome::Insufficient)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.outcome.as_str(), self.rule)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub statistic: String,
    pub n: u64,
    pub value: f64,
    /// Standard error, band half-width or comparison threshold.
    pub se: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    pub command: String,
    pub map: String,
    pub seed: u64,
    pub config_digest: String,
    pub trajectories: usize,
    pub boundary_hits: u64,
    pub return_cap_hits: u64,
    pub verdicts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<Row>,
    pub counters: Counters,
    /// Extra files written next to the CSVs.
    pub exports: Vec<(String, Vec<u8>)>,
}

impl ResultTable {
    pub fn new() -> Self {
        ResultTable { rows: Vec::new(), counters: Counters::default(), exports: Vec::new() }
    }

    pub fn push(&mut self, statistic: &str, n: u64, value: f64, se: f64, verdict: Verdict) {
        self.rows.push(Row { statistic: statistic.to_string(), n, value, se, verdict });
    }

    pub fn verdicts(&self) -> impl Iterator<Item = Verdict> + '_ {
        self.rows.iter().map(|r| r.verdict)
    }

    /// True iff no row failed or lacked data.
    pub fn all_pass(&self) -> bool {
        !self.verdicts().any(|v| v.is_blocking())
    }

    /// Verdicts of one rule.
    pub fn rule(&self, rule: &str) -> Vec<Verdict> {
        self.verdicts().filter(|v| v.rule == rule).collect()
    }

    pub fn rows_of(&self, statistic: &str) -> Vec<&Row> {
        self.rows.iter().filter(|r| r.statistic == statistic).collect()
    }

    /// Statistic names in first-appearance order.
    pub fn statistics(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.statistic.as_str()) {
                out.push(&r.statistic);
            }
        }
        out
    }

    pub fn verdict_counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for v in self.verdicts() {
            *out.entry(v.to_string()).or_insert(0) += 1;
        }
        out
    }

    pub fn write_csv<W: std::io::Write>(&self, statistic: &str, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["statistic", "n", "value", "se", "verdict"])?;
        for r in self.rows.iter().filter(|r| r.statistic == statistic) {
            w.write_record([
                r.statistic.clone(),
                r.n.to_string(),
                format!("{:.12e}", r.value),
                format!("{:.12e}", r.se),
                r.verdict.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// One `<statistic>.csv` per statistic plus `run_metadata.toml`.
    pub fn write_dir(&self, dir: &Path, meta: &RunMetadata) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for s in self.statistics() {
            let f = std::fs::File::create(dir.join(format!("{s}.csv")))?;
            self.write_csv(s, std::io::BufWriter::new(f))?;
        }
        for (name, bytes) in &self.exports {
            std::fs::write(dir.join(name), bytes)?;
        }
        let text = toml::to_string(meta).map_err(|e| crate::Error::Io(e.to_string()))?;
        std::fs::write(dir.join("run_metadata.toml"), text)?;
        Ok(())
    }
}

impl Default for ResultTable {
    fn default() -> Self {
        Self::new()
    }
}
