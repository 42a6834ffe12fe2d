//! File-backed project store.
//!
//! Layout under the root directory:
//!
//! ```text
//! documents/<doc_id>.json
//! worked_examples/<doc_id>.json
//! sessions/<session_id>.json
//! eval_runs/<run_id>.json
//! models/<model_id>/manifest.json ...
//! active_model
//! ```
//!
//! Records are written to a temporary file in the target directory and
//! renamed into place, so readers never observe a partial record.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use casebrief_core::classifier::{ClassifierError, ModelArtifact};
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("invalid identifier `{0}`")]
    InvalidId(String),
    #[error("{collection} `{id}` not found")]
    NotFound { collection: &'static str, id: String },
    #[error("{collection} `{id}` already exists")]
    AlreadyExists { collection: &'static str, id: String },
    #[error("corrupt record {path}: {reason}")]
    Corrupt { path: String, reason: String },
    #[error("store i/o error at {path}: {reason}")]
    Io { path: String, reason: String },
    #[error(transparent)]
    Model(#[from] ClassifierError),
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> StoreError {
    StoreError::Io { path: path.display().to_string(), reason: e.to_string() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Collection {
    Documents,
    WorkedExamples,
    Sessions,
    EvalRuns,
}

impl Collection {
    pub fn dir_name(self) -> &'static str {
        match self {
            Collection::Documents => "documents",
            Collection::WorkedExamples => "worked_examples",
            Collection::Sessions => "sessions",
            Collection::EvalRuns => "eval_runs",
        }
    }

    fn singular(self) -> &'static str {
        match self {
            Collection::Documents => "document",
            Collection::WorkedExamples => "worked example",
            Collection::Sessions => "session",
            Collection::EvalRuns => "evaluation run",
        }
    }
}

const MODELS_DIR: &str = "models";
const ACTIVE_MODEL_FILE: &str = "active_model";

/// Ids become file names, so they are restricted to a safe alphabet.
pub fn validate_id(id: &str) -> Result<(), StoreError> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(StoreError::InvalidId(id.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct ProjectStore {
    root: PathBuf,
}

impl ProjectStore {
    /// Opens a store, creating the directory layout if needed.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        for c in [Collection::Documents, Collection::WorkedExamples, Collection::Sessions, Collection::EvalRuns] {
            let dir = root.join(c.dir_name());
            fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        }
        let models = root.join(MODELS_DIR);
        fs::create_dir_all(&models).map_err(|e| io_err(&models, e))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn record_path(&self, collection: Collection, id: &str) -> Result<PathBuf, StoreError> {
        validate_id(id)?;
        Ok(self.root.join(collection.dir_name()).join(format!("{id}.json")))
    }

    pub fn exists(&self, collection: Collection, id: &str) -> Result<bool, StoreError> {
        Ok(self.record_path(collection, id)?.exists())
    }

    /// Writes a record atomically, replacing any previous version.
    pub fn put<T: Serialize>(&self, collection: Collection, id: &str, value: &T) -> Result<(), StoreError> {
        let path = self.record_path(collection, id)?;
        let mut json = serde_json::to_vec_pretty(value).map_err(|e| io_err(&path, e))?;
        json.push(b'\n');
        write_atomic(&path, &json)
    }

    /// Like [`ProjectStore::put`] but fails if the record exists.
    pub fn insert<T: Serialize>(&self, collection: Collection, id: &str, value: &T) -> Result<(), StoreError> {
        if self.exists(collection, id)? {
            return Err(StoreError::AlreadyExists { collection: collection.singular(), id: id.to_string() });
        }
        self.put(collection, id, value)
    }

    pub fn get<T: DeserializeOwned>(&self, collection: Collection, id: &str) -> Result<T, StoreError> {
        let path = self.record_path(collection, id)?;
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(StoreError::NotFound { collection: collection.singular(), id: id.to_string() })
            }
            Err(e) => return Err(io_err(&path, e)),
        };
        serde_json::from_slice(&bytes)
            .map_err(|e| StoreError::Corrupt { path: path.display().to_string(), reason: e.to_string() })
    }

    /// Sorted ids of every record in a collection.
    pub fn list(&self, collection: Collection) -> Result<Vec<String>, StoreError> {
        let dir = self.root.join(collection.dir_name());
        let mut ids = Vec::new();
        for entry in fs::read_dir(&dir).map_err(|e| io_err(&dir, e))? {
            let name = entry.map_err(|e| io_err(&dir, e))?.file_name();
            if let Some(id) = name.to_str().and_then(|n| n.strip_suffix(".json")) {
                if validate_id(id).is_ok() {
                    ids.push(id.to_string());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    fn model_dir(&self, id: &str) -> Result<PathBuf, StoreError> {
        validate_id(id)?;
        Ok(self.root.join(MODELS_DIR).join(id))
    }

    /// Registers a model under its id. Registering the same artifact twice
    /// is a no-op because ids derive from the fingerprint.
    pub fn register_model(&self, model: &ModelArtifact) -> Result<String, StoreError> {
        let id = model.id();
        let dir = self.model_dir(&id)?;
        if dir.join("manifest.json").exists() {
            return Ok(id);
        }
        let models = self.root.join(MODELS_DIR);
        let staging = tempfile::Builder::new().prefix(".staging-").tempdir_in(&models).map_err(|e| io_err(&models, e))?;
        model.save(staging.path())?;
        let staged = staging.keep();
        if let Err(e) = fs::rename(&staged, &dir) {
            let _ = fs::remove_dir_all(&staged);
            if !dir.join("manifest.json").exists() {
                return Err(io_err(&dir, e));
            }
        }
        Ok(id)
    }

    pub fn load_model(&self, id: &str) -> Result<ModelArtifact, StoreError> {
        let dir = self.model_dir(id)?;
        if !dir.join("manifest.json").exists() {
            return Err(StoreError::NotFound { collection: "model", id: id.to_string() });
        }
        Ok(ModelArtifact::load(&dir)?)
    }

    pub fn list_models(&self) -> Result<Vec<String>, StoreError> {
        let dir = self.root.join(MODELS_DIR);
        let mut ids = Vec::new();
        for entry in fs::read_dir(&dir).map_err(|e| io_err(&dir, e))? {
            let entry = entry.map_err(|e| io_err(&dir, e))?;
            if let Some(name) = entry.file_name().to_str() {
                if validate_id(name).is_ok() && entry.path().join("manifest.json").exists() {
                    ids.push(name.to_string());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn active_model(&self) -> Result<Option<String>, StoreError> {
        let path = self.root.join(ACTIVE_MODEL_FILE);
        match fs::read_to_string(&path) {
            Ok(s) => Ok(Some(s.trim().to_string()).filter(|s| !s.is_empty())),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io_err(&path, e)),
        }
    }

    pub fn set_active_model(&self, id: &str) -> Result<(), StoreError> {
        validate_id(id)?;
        write_atomic(&self.root.join(ACTIVE_MODEL_FILE), format!("{id}\n").as_bytes())
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let dir = path.parent().expect("record paths have a parent");
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(dir, e))?;
    tmp.write_all(bytes).map_err(|e| io_err(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}
