//! Crash-record ingestion: loading, disengagement linkage, driving-mode
//! classification, discretization and dummy coding.

mod catalog;
mod coded;
mod discretize;
mod encode;
mod linkage;
mod records;
pub mod summary;

pub use catalog::{Comparison, ResponseDef, ThresholdRule, VariableCatalog, VariableEntry, VariableKind, VariableOrigin};
pub use coded::{CodedColumn, CodedDataset, CodedMetadata};
pub use discretize::{discretize, discretize_value, Discretized, RangeWarning};
pub use encode::{encode_design, CRASH_TYPE_VARIABLE};
pub use linkage::{
    classify_all, classify_mode, link_disengagements, load_disengagements, read_disengagements,
    AmbiguousMatch, ClassifiedRecords, LinkageReport, DERIVED_VARIABLES,
};
pub(crate) use records::format_causes as records_format_causes;
pub use records::{
    load_records, read_records, Cause, CrashRecord, Disengagement, DisengagementDetails, DisengagementRecord,
    DrivingMode, Initiator, LinkSource, ModeHints, RawValue, METADATA_COLUMNS, UNKNOWN,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("catalog: {0}")]
    Catalog(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("column `{0}` is neither a catalog variable nor a metadata column")]
    UnknownColumn(String),
    #[error("row {row}: column `{column}` is not numeric: {value:?}")]
    MalformedNumeric { row: usize, column: String, value: String },
    #[error("row {row}: column `{column}` is malformed: {value:?}")]
    MalformedField { row: usize, column: String, value: String },
    #[error("duplicate crash id `{0}`")]
    DuplicateCrashId(String),
    #[error("crash `{0}` has not been through disengagement linkage")]
    NotLinked(String),
    #[error("crash `{0}` matches neither the autonomous nor the conventional rule")]
    UnclassifiableRecord(String),
    #[error("crash `{crash_id}`: negative count {value} for `{variable}`")]
    NegativeCount { crash_id: String, variable: String, value: f64 },
    #[error("crash `{crash_id}`: `{variable}` has no value")]
    MissingValue { crash_id: String, variable: String },
    #[error("variable `{0}` is not in the catalog")]
    UnknownVariable(String),
    #[error("`{variable}` has no level `{level}`")]
    UnknownLevel { variable: String, level: String },
    #[error("term `{0}` names the reference level, which is coded as all zeros")]
    ReferenceLevelTerm(String),
    #[error("response `{0}` is not declared in the catalog")]
    UnknownResponse(String),
    #[error("records mix driving modes ({0} and {1})")]
    MixedModes(DrivingMode, DrivingMode),
    #[error("level-2 group `{0}` has no rows")]
    EmptyGroup(String),
    #[error("need at least 2 level-2 groups, found {0}")]
    TooFewGroups(usize),
    #[error("column `{0}` is constant across all rows")]
    ConstantColumn(String),
    #[error("level-2 term `{term}` varies within group `{group}`")]
    NonConstantLevel2Term { term: String, group: String },
    #[error("response must be 0 or 1, row {row} has {value}")]
    NonBinaryResponse { row: usize, value: f64 },
    #[error("dimension mismatch: {0}")]
    Shape(String),
    #[error("coded dataset metadata: {0}")]
    Metadata(String),
    #[error("model spec: {0}")]
    Spec(String),
}

impl DatasetError {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
