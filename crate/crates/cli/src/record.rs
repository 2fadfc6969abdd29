//! Run records and their JSON-lines and CSV renderings.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    /// The point could not be evaluated: bad parameters or precision.
    Error,
    /// Informational; does not count toward the exit status.
    Reported,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub suite: String,
    /// The claim being checked.
    pub claim: &'static str,
    pub params: Value,
    pub verdict: Outcome,
    /// Valuation slack where one is meaningful.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<i64>,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub detail: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<u64>,
}

impl RunRecord {
    pub fn new(suite: &str, claim: &'static str, params: Value, verdict: Outcome) -> Self {
        RunRecord {
            suite: suite.to_string(),
            claim,
            params,
            verdict,
            margin: None,
            detail: Value::Null,
            wall_ms: None,
        }
    }

    pub fn with_margin(mut self, margin: Option<i64>) -> Self {
        self.margin = margin;
        self
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = detail;
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub total: usize,
    pub pass: usize,
    pub fail: usize,
    pub error: usize,
    pub reported: usize,
}

impl Tally {
    fn add(&mut self, outcome: Outcome) {
        self.total += 1;
        match outcome {
            Outcome::Pass => self.pass += 1,
            Outcome::Fail => self.fail += 1,
            Outcome::Error => self.error += 1,
            Outcome::Reported => self.reported += 1,
        }
    }
}

/// Per `(suite, claim)` counts, in sorted order.
pub fn summarize(records: &[RunRecord]) -> BTreeMap<(String, &'static str), Tally> {
    let mut out: BTreeMap<(String, &'static str), Tally> = BTreeMap::new();
    for rec in records {
        out.entry((rec.suite.clone(), rec.claim)).or_default().add(rec.verdict);
    }
    out
}

/// 0 when everything passed, 1 when a claim failed, 2 when a point could
/// not be evaluated.
pub fn exit_code(records: &[RunRecord]) -> i32 {
    if records.iter().any(|r| r.verdict == Outcome::Error) {
        2
    } else if records.iter().any(|r| r.verdict == Outcome::Fail) {
        1
    } else {
        0
    }
}

pub fn write_jsonl<W: Write>(mut w: W, records: &[RunRecord]) -> std::io::Result<()> {
    for rec in records {
        serde_json::to_writer(&mut w, rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn write_summary_csv<W: Write>(w: W, records: &[RunRecord]) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["suite", "claim", "total", "pass", "fail", "error", "reported"])?;
    for ((suite, claim), t) in summarize(records) {
        wtr.write_record([
            suite,
            claim.to_string(),
            t.total.to_string(),
            t.pass.to_string(),
            t.fail.to_string(),
            t.error.to_string(),
            t.reported.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
