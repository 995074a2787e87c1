//! Re-running a check from its inputs digest.

use chord_core::{CheckCase, ChordError, InequalityReport};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("DigestParseError: {0}")]
    DigestParse(#[from] serde_json::Error),
    #[error(transparent)]
    Check(#[from] ChordError),
}

/// Parses a digest and re-runs its check on the recorded rule and its refinement.
pub fn replay(digest: &str) -> Result<InequalityReport, ReplayError> {
    let case = CheckCase::from_digest(digest.trim())?;
    Ok(case.run()?)
}

pub fn describe(report: &InequalityReport) -> String {
    use crate::report::format_real;
    format!(
        "check = {}\nlhs = {}\nrhs = {}\nslack = {}\nrelative_slack = {}\nerror_estimate = {}\nequality_flag = {}\nsimilar_chord = {}\ndilates = {}\nholds = {}\n",
        report.name,
        format_real(report.lhs),
        format_real(report.rhs),
        format_real(report.slack),
        format_real(report.relative_slack),
        format_real(report.error_estimate),
        report.equality_flag,
        report.witness.similar_chord,
        report.witness.dilates,
        report.holds(),
    )
}
