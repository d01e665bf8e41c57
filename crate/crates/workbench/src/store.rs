//! In-memory session store with optional write-through to a directory.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use pra_core::assessment::AssessmentSession;
use pra_core::taxonomy::Taxonomy;
use thiserror::Error;

use crate::mutation::{apply_mutation, Applied, MutationEnvelope, MutationError};
use crate::workbook::{load_workbook, write_atomic, WorkbookDocument, WorkbookError};

pub const WORKBOOK_DIR_ENV: &str = "PRA_WORKBOOK_DIR";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("no session `{0}`")]
    NotFound(String),
    #[error("session `{0}` already exists")]
    Exists(String),
    #[error(transparent)]
    Mutation(#[from] MutationError),
    #[error(transparent)]
    Workbook(#[from] WorkbookError),
}

struct Slot {
    document: WorkbookDocument,
    bytes: Arc<Vec<u8>>,
}

impl Slot {
    fn new(document: WorkbookDocument) -> Self {
        let bytes = Arc::new(document.to_canonical_bytes());
        Self { document, bytes }
    }
}

/// Sessions keyed by id. Each session has its own lock, so writers to
/// different sessions never wait on each other.
pub struct SessionStore {
    taxonomy: Taxonomy,
    root: Option<PathBuf>,
    slots: RwLock<HashMap<String, Arc<Mutex<Slot>>>>,
}

impl SessionStore {
    pub fn in_memory(taxonomy: Taxonomy) -> Self {
        Self {
            taxonomy,
            root: None,
            slots: RwLock::new(HashMap::new()),
        }
    }

    /// Opens a directory-backed store, loading every `*.json` workbook in it.
    pub fn open(taxonomy: Taxonomy, root: &Path) -> Result<Self, StoreError> {
        std::fs::create_dir_all(root).map_err(|source| WorkbookError::Io {
            path: root.to_path_buf(),
            source,
        })?;
        let store = Self {
            taxonomy,
            root: Some(root.to_path_buf()),
            slots: RwLock::new(HashMap::new()),
        };
        let entries = std::fs::read_dir(root).map_err(|source| WorkbookError::Io {
            path: root.to_path_buf(),
            source,
        })?;
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            let loaded = load_workbook(&path, &store.taxonomy)?;
            let id = loaded.document.session.id.clone();
            store
                .slots
                .write()
                .insert(id, Arc::new(Mutex::new(Slot::new(loaded.document))));
        }
        Ok(store)
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    fn path_for(&self, id: &str) -> Option<PathBuf> {
        self.root.as_ref().map(|r| r.join(format!("{id}.json")))
    }

    fn slot(&self, id: &str) -> Result<Arc<Mutex<Slot>>, StoreError> {
        self.slots
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| StoreError::NotFound(id.to_string()))
    }

    pub fn insert(&self, session: AssessmentSession) -> Result<AssessmentSession, StoreError> {
        let id = session.id.clone();
        let mut slots = self.slots.write();
        if slots.contains_key(&id) {
            return Err(StoreError::Exists(id));
        }
        let slot = Slot::new(WorkbookDocument::new(session.clone(), &self.taxonomy));
        if let Some(path) = self.path_for(&id) {
            write_atomic(&path, &slot.bytes)?;
        }
        slots.insert(id, Arc::new(Mutex::new(slot)));
        Ok(session)
    }

    pub fn ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.slots.read().keys().cloned().collect();
        ids.sort();
        ids
    }

    pub fn document(&self, id: &str) -> Result<WorkbookDocument, StoreError> {
        Ok(self.slot(id)?.lock().document.clone())
    }

    pub fn snapshot(&self, id: &str) -> Result<AssessmentSession, StoreError> {
        Ok(self.slot(id)?.lock().document.session.clone())
    }

    /// The exact bytes currently persisted for the session.
    pub fn stored_bytes(&self, id: &str) -> Result<Arc<Vec<u8>>, StoreError> {
        Ok(self.slot(id)?.lock().bytes.clone())
    }

    /// Revision check and apply under the session lock. Nothing is written
    /// unless the command succeeds.
    pub fn mutate(&self, id: &str, envelope: MutationEnvelope) -> Result<Applied, StoreError> {
        let slot = self.slot(id)?;
        let mut slot = slot.lock();
        let mut draft = slot.document.clone();
        let applied = apply_mutation(&mut draft.session, &self.taxonomy, envelope)?;
        self.commit(id, &mut slot, draft)?;
        Ok(applied)
    }

    /// Runs `f` against a copy of the document and commits it if `f` succeeds.
    pub fn update<T, E>(
        &self,
        id: &str,
        f: impl FnOnce(&mut WorkbookDocument) -> Result<T, E>,
    ) -> Result<T, E>
    where
        E: From<StoreError>,
    {
        let slot = self.slot(id)?;
        let mut slot = slot.lock();
        let mut draft = slot.document.clone();
        let out = f(&mut draft)?;
        self.commit(id, &mut slot, draft)?;
        Ok(out)
    }

    fn commit(&self, id: &str, slot: &mut Slot, draft: WorkbookDocument) -> Result<(), StoreError> {
        let bytes = draft.to_canonical_bytes();
        if let Some(path) = self.path_for(id) {
            write_atomic(&path, &bytes)?;
        }
        slot.document = draft;
        slot.bytes = Arc::new(bytes);
        Ok(())
    }
}
