//! Sanity checks over agent replies and command scripts: formatting,
//! validity, syntax and logic.

pub mod envelope;
pub mod grading;
pub mod rules;

pub use envelope::{check_envelope, FormatError, Payload, ResponseEnvelope, Status};
pub use grading::{grade_functionality, Grade, GradeDistribution, GradedRecord, UnknownLabel};
pub use rules::{
    check_lines, evaluate_response, judge_validity, validate_script, validate_text, CategoryResult, Expected,
    RuleId, ValidationReport, ValidityOutcome, Violation,
};
