//! Directory-backed object store standing in for the cloud server.
//!
//! Objects live at `<root>/<message id>/<index:08>.ctb`. Writes go to a
//! temporary file in the same directory and are renamed into place, so a
//! reader sees either nothing or the complete object.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use thiserror::Error;

use crate::wire::MessageId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjectId {
    pub message: MessageId,
    pub index: u32,
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.message, self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoreRecord {
    pub id: ObjectId,
    pub bytes: Vec<u8>,
    pub uploaded: SystemTime,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("object {0} not found")]
    NotFound(ObjectId),
    #[error("message {0} not found")]
    UnknownMessage(MessageId),
    #[error("store I/O on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone)]
pub struct FileStore {
    root: PathBuf,
}

impl FileStore {
    /// Opens (creating if needed) a store rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        Ok(FileStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn message_dir(&self, message: &MessageId) -> PathBuf {
        self.root.join(message.to_string())
    }

    fn object_path(&self, id: &ObjectId) -> PathBuf {
        self.message_dir(&id.message).join(format!("{:08}.ctb", id.index))
    }

    pub fn put(&self, id: ObjectId, bytes: &[u8]) -> Result<(), StoreError> {
        let dir = self.message_dir(&id.message);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let path = self.object_path(&id);
        let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io_err(&dir))?;
        tmp.write_all(bytes).map_err(io_err(tmp.path()))?;
        tmp.as_file().sync_all().map_err(io_err(&path))?;
        tmp.persist(&path).map_err(|e| StoreError::Io {
            path: path.clone(),
            source: e.error,
        })?;
        Ok(())
    }

    pub fn get(&self, id: ObjectId) -> Result<Vec<u8>, StoreError> {
        let path = self.object_path(&id);
        fs::read(&path).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => StoreError::NotFound(id),
            _ => io_err(&path)(e),
        })
    }

    /// The object with its upload time (the file's modification time).
    pub fn record(&self, id: ObjectId) -> Result<StoreRecord, StoreError> {
        let bytes = self.get(id)?;
        let path = self.object_path(&id);
        let uploaded = fs::metadata(&path)
            .and_then(|m| m.modified())
            .map_err(io_err(&path))?;
        Ok(StoreRecord { id, bytes, uploaded })
    }

    /// Ids of every stored block of `message`, in index order.
    pub fn list(&self, message: MessageId) -> Result<Vec<ObjectId>, StoreError> {
        let dir = self.message_dir(&message);
        let entries = match fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(StoreError::UnknownMessage(message)),
            Err(e) => return Err(io_err(&dir)(e)),
        };
        let mut ids = Vec::new();
        for entry in entries {
            let entry = entry.map_err(io_err(&dir))?;
            let name = entry.file_name();
            let Some(index) = name
                .to_str()
                .and_then(|n| n.strip_suffix(".ctb"))
                .and_then(|n| n.parse::<u32>().ok())
            else {
                continue;
            };
            ids.push(ObjectId { message, index });
        }
        ids.sort();
        Ok(ids)
    }
}
