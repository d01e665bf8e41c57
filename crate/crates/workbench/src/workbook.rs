//! The on-disk workbook: one JSON document per session.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use pra_core::assessment::{AssessmentSession, Violation};
use pra_core::taxonomy::Taxonomy;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FORMAT_VERSION: &str = "pra-workbook/1";

#[derive(Debug, Error)]
pub enum WorkbookError {
    #[error("workbook does not parse at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported workbook format `{found}` (this build reads `{FORMAT_VERSION}`)")]
    UnsupportedFormat { found: String },
    #[error("workbook session is invalid: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl WorkbookError {
    fn parse(e: serde_json::Error) -> Self {
        Self::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkbookDocument {
    pub format_version: String,
    pub taxonomy_version: String,
    pub session: AssessmentSession,
    /// Digests of output logs emitted from this session.
    pub emitted_outputs: Option<Vec<String>>,
}

/// A loaded document plus non-fatal findings.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub document: WorkbookDocument,
    pub warnings: Vec<String>,
}

impl WorkbookDocument {
    pub fn new(session: AssessmentSession, taxonomy: &Taxonomy) -> Self {
        Self {
            format_version: FORMAT_VERSION.to_string(),
            taxonomy_version: taxonomy.version().to_string(),
            session,
            emitted_outputs: None,
        }
    }

    /// Pretty JSON in declaration field order with a trailing newline.
    pub fn to_canonical_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("workbooks always serialize");
        out.push(b'\n');
        out
    }

    pub fn record_output(&mut self, digest: &str) {
        let outputs = self.emitted_outputs.get_or_insert_with(Vec::new);
        if !outputs.iter().any(|d| d == digest) {
            outputs.push(digest.to_string());
        }
    }
}

/// Parses and fully validates a workbook. Nothing is repaired.
pub fn parse_workbook(bytes: &[u8], taxonomy: &Taxonomy) -> Result<Loaded, WorkbookError> {
    let value: serde_json::Value = serde_json::from_slice(bytes).map_err(WorkbookError::parse)?;
    let found = value
        .get("format_version")
        .and_then(|v| v.as_str())
        .unwrap_or("<missing>");
    if found != FORMAT_VERSION {
        return Err(WorkbookError::UnsupportedFormat {
            found: found.to_string(),
        });
    }
    let document: WorkbookDocument = serde_json::from_slice(bytes).map_err(WorkbookError::parse)?;
    let violations = document.session.validate(taxonomy);
    if !violations.is_empty() {
        return Err(WorkbookError::Invalid(violations));
    }
    let mut warnings = Vec::new();
    if document.taxonomy_version != taxonomy.version() {
        warnings.push(format!(
            "workbook was written against taxonomy {}, loaded with {}; all ids resolve",
            document.taxonomy_version,
            taxonomy.version()
        ));
    }
    Ok(Loaded { document, warnings })
}

pub fn load_workbook(path: &Path, taxonomy: &Taxonomy) -> Result<Loaded, WorkbookError> {
    let bytes = fs::read(path).map_err(|source| WorkbookError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_workbook(&bytes, taxonomy)
}

/// Writes through a sibling temp file so readers never see a partial
/// document. Returns the number of bytes written.
pub fn save_workbook(doc: &WorkbookDocument, path: &Path) -> Result<usize, WorkbookError> {
    write_atomic(path, &doc.to_canonical_bytes())
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<usize, WorkbookError> {
    let io = |source| WorkbookError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)?;
    Ok(bytes.len())
}
