//! Workbook persistence, revision-checked mutations, and the HTTP service.

pub mod mutation;
pub mod service;
pub mod store;
pub mod workbook;

pub use mutation::{
    apply_mutation, error_code, Applied, CommandResult, MutationEnvelope, MutationError,
    SessionCommand,
};
pub use store::{SessionStore, StoreError, WORKBOOK_DIR_ENV};
pub use workbook::{
    load_workbook, parse_workbook, save_workbook, Loaded, WorkbookDocument, WorkbookError,
    FORMAT_VERSION,
};
