//! CSV report rows.
//!
//! Reals are written in scientific notation with 17 significant digits so
//! every double round-trips. The wall-time column is always last, which lets
//! determinism checks drop it with a single split.

use std::io::Write;

use chord_core::InequalityReport;

pub const COLUMNS: [&str; 17] = [
    "task_id",
    "task",
    "functional",
    "inputs_digest",
    "i",
    "parameter",
    "rule_id",
    "value",
    "lhs",
    "rhs",
    "slack",
    "relative_slack",
    "error_estimate",
    "equality_flag",
    "status",
    "message",
    "wall_time_s",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Violated,
    Error,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Violated => "violated",
            Status::Error => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub task_id: String,
    pub task: String,
    pub functional: String,
    pub inputs_digest: String,
    pub i: Option<usize>,
    pub parameter: String,
    pub rule_id: String,
    pub value: Option<f64>,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub slack: Option<f64>,
    pub relative_slack: Option<f64>,
    pub error_estimate: Option<f64>,
    pub equality_flag: Option<bool>,
    pub status: Status,
    pub message: String,
    pub wall_time_s: f64,
}

impl ReportRow {
    pub fn new(task_id: &str, task: &str, functional: &str, rule_id: &str) -> Self {
        ReportRow {
            task_id: task_id.to_string(),
            task: task.to_string(),
            functional: functional.to_string(),
            inputs_digest: String::new(),
            i: None,
            parameter: String::new(),
            rule_id: rule_id.to_string(),
            value: None,
            lhs: None,
            rhs: None,
            slack: None,
            relative_slack: None,
            error_estimate: None,
            equality_flag: None,
            status: Status::Ok,
            message: String::new(),
            wall_time_s: 0.0,
        }
    }

    pub fn with_check(mut self, report: &InequalityReport) -> Self {
        self.functional = report.name.clone();
        self.inputs_digest = report.inputs_digest.clone();
        self.lhs = Some(report.lhs);
        self.rhs = Some(report.rhs);
        self.slack = Some(report.slack);
        self.relative_slack = Some(report.relative_slack);
        self.error_estimate = Some(report.error_estimate);
        self.equality_flag = Some(report.equality_flag);
        self.status = if report.holds() {
            Status::Ok
        } else {
            Status::Violated
        };
        self.message = format!(
            "similar_chord={} dilates={}",
            report.witness.similar_chord, report.witness.dilates
        );
        self
    }

    pub fn failed(mut self, message: impl ToString) -> Self {
        self.status = Status::Error;
        self.message = message.to_string();
        self
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.task_id.clone(),
            self.task.clone(),
            self.functional.clone(),
            self.inputs_digest.clone(),
            self.i.map(|i| i.to_string()).unwrap_or_default(),
            self.parameter.clone(),
            self.rule_id.clone(),
            real(self.value),
            real(self.lhs),
            real(self.rhs),
            real(self.slack),
            real(self.relative_slack),
            real(self.error_estimate),
            self.equality_flag
                .map(|b| b.to_string())
                .unwrap_or_default(),
            self.status.as_str().to_string(),
            self.message.clone(),
            format!("{:.6}", self.wall_time_s),
        ]
    }
}

/// 17 significant digits, `.` decimal separator.
pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn real(x: Option<f64>) -> String {
    x.map(format_real).unwrap_or_default()
}

pub fn write_rows<W: Write>(out: W, rows: &[ReportRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush()?;
    Ok(())
}

/// Drops the final (wall-time) column of every line.
pub fn strip_wall_time(csv_text: &str) -> String {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(csv_text.as_bytes());
    let mut w = csv::Writer::from_writer(Vec::new());
    for record in reader.records() {
        let record = record.expect("report CSV is well formed");
        let n = record.len().saturating_sub(1);
        w.write_record(record.iter().take(n))
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip() {
        for x in [std::f64::consts::PI, 1e-300, -2.5e17, 0.1 + 0.2] {
            let s = format_real(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert_eq!(
            format_real(4.0 * std::f64::consts::PI / 3.0),
            "4.1887902047863905e0"
        );
    }

    #[test]
    fn quoting_and_stripping() {
        let mut row = ReportRow::new("t1", "check", "lp_bm", "gauss3:16x32");
        row.inputs_digest = r#"{"check":"lp_bm","p":2.0}"#.into();
        row.wall_time_s = 1.25;
        let mut buf = Vec::new();
        write_rows(&mut buf, &[row]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains(r#""{""check"":""lp_bm"",""p"":2.0}""#));
        let header = text.lines().next().unwrap();
        assert!(header.ends_with(",wall_time_s"));
        let stripped = strip_wall_time(&text);
        assert!(!stripped.contains("1.250000") && !stripped.contains("wall_time_s"));
    }
}
