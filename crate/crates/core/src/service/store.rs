//! File-backed product and media repository.
//!
//! Layout under the data directory:
//!
//! ```text
//! products/{barcode}.json   header line, then the canonical document
//! media/blobs/{name}        raw media bytes
//! media/kinds/{name}        the media kind as text
//! ```
//!
//! Every write goes to a temporary file that is synced and renamed into
//! place, so readers see either the old or the new file and never a torn one.

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{
    lint, media_name_problem, parse_resource, serialize_resource, validate_barcode, Barcode, Diagnostic, LintReport,
    MediaKind, MediaRef, ParseError, ProductResource,
};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("document does not parse: {0}")]
    Parse(#[from] ParseError),
    #[error("document has lint errors")]
    Lint(LintReport),
    #[error("path barcode {path} does not match document barcode {document}")]
    BarcodeMismatch { path: String, document: String },
    #[error("no product with barcode {0}")]
    ProductNotFound(String),
    #[error("no media named `{0}`")]
    MediaNotFound(String),
    #[error("unsafe media name `{name}`: {reason}")]
    UnsafeName { name: String, reason: &'static str },
    #[error("stored file {path} is corrupt: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// First line of every product file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct EntryHeader {
    pub revision: u64,
    pub updated_at_millis: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoreEntry {
    pub header: EntryHeader,
    pub resource: ProductResource,
    /// Canonical serialization of `resource`.
    pub document: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ProductSummary {
    pub barcode: Barcode,
    pub name: String,
    pub category: String,
    pub image: MediaRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PutOutcome {
    pub revision: u64,
    /// Warning diagnostics do not block a write but are reported back.
    pub warnings: Vec<Diagnostic>,
}

pub struct Store {
    root: PathBuf,
    // Serializes writers so revisions are assigned without gaps or repeats.
    write_lock: Mutex<()>,
}

impl Store {
    /// Opens (creating if needed) a store rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        for dir in ["products", "media/blobs", "media/kinds"] {
            fs::create_dir_all(root.join(dir))?;
        }
        Ok(Store { root, write_lock: Mutex::new(()) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn product_path(&self, barcode: &Barcode) -> PathBuf {
        self.root.join("products").join(format!("{barcode}.json"))
    }

    /// Parses, checks and lints `document`, then stores it under `barcode`.
    pub fn put_product(&self, barcode: &str, document: &[u8]) -> Result<PutOutcome, StoreError> {
        let resource = parse_resource(document)?;
        if resource.product.barcode.as_str() != barcode {
            return Err(StoreError::BarcodeMismatch {
                path: barcode.to_owned(),
                document: resource.product.barcode.to_string(),
            });
        }
        let report = lint(&resource);
        if report.has_errors() {
            return Err(StoreError::Lint(report));
        }
        let canonical = serialize_resource(&resource);

        let _guard = self.write_lock.lock().unwrap_or_else(|p| p.into_inner());
        let path = self.product_path(&resource.product.barcode);
        let previous = match read_entry(&path) {
            Ok(entry) => entry.header.revision,
            Err(StoreError::Io(e)) if e.kind() == io::ErrorKind::NotFound => 0,
            Err(e) => return Err(e),
        };
        let header = EntryHeader { revision: previous + 1, updated_at_millis: now_millis() };
        let mut bytes = serde_json::to_vec(&header).expect("headers serialize");
        bytes.push(b'\n');
        bytes.extend_from_slice(&canonical);
        write_atomic(&path, &bytes)?;
        Ok(PutOutcome { revision: header.revision, warnings: report.warnings().cloned().collect() })
    }

    pub fn get_product(&self, barcode: &str) -> Result<StoreEntry, StoreError> {
        let not_found = || StoreError::ProductNotFound(barcode.to_owned());
        let code = validate_barcode(barcode).map_err(|_| not_found())?;
        match read_entry(&self.product_path(&code)) {
            Err(StoreError::Io(e)) if e.kind() == io::ErrorKind::NotFound => Err(not_found()),
            other => other,
        }
    }

    /// Rows sorted by name, then barcode; `category` filters by exact match.
    pub fn list_products(&self, category: Option<&str>) -> Result<Vec<ProductSummary>, StoreError> {
        let mut rows = Vec::new();
        for dirent in fs::read_dir(self.root.join("products"))? {
            let path = dirent?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let entry = match read_entry(&path) {
                Err(StoreError::Io(e)) if e.kind() == io::ErrorKind::NotFound => continue,
                other => other?,
            };
            let p = entry.resource.product;
            if category.is_some_and(|c| c != p.category) {
                continue;
            }
            rows.push(ProductSummary { barcode: p.barcode, name: p.name, category: p.category, image: p.image });
        }
        rows.sort_by(|a, b| a.name.cmp(&b.name).then_with(|| a.barcode.as_str().cmp(b.barcode.as_str())));
        Ok(rows)
    }

    pub fn put_media(&self, name: &str, kind: MediaKind, bytes: &[u8]) -> Result<(), StoreError> {
        check_media_name(name)?;
        let _guard = self.write_lock.lock().unwrap_or_else(|p| p.into_inner());
        write_atomic(&self.root.join("media/blobs").join(name), bytes)?;
        write_atomic(&self.root.join("media/kinds").join(name), kind.as_str().as_bytes())?;
        Ok(())
    }

    pub fn get_media(&self, name: &str) -> Result<(MediaKind, Vec<u8>), StoreError> {
        check_media_name(name)?;
        let missing = |e: io::Error| {
            if e.kind() == io::ErrorKind::NotFound {
                StoreError::MediaNotFound(name.to_owned())
            } else {
                StoreError::Io(e)
            }
        };
        let kind_path = self.root.join("media/kinds").join(name);
        let kind_text = fs::read_to_string(&kind_path).map_err(missing)?;
        let kind = MediaKind::parse(kind_text.trim())
            .ok_or_else(|| StoreError::Corrupt { path: kind_path, message: format!("unknown kind `{kind_text}`") })?;
        let bytes = fs::read(self.root.join("media/blobs").join(name)).map_err(missing)?;
        Ok((kind, bytes))
    }
}

fn check_media_name(name: &str) -> Result<(), StoreError> {
    match media_name_problem(name) {
        Some(reason) => Err(StoreError::UnsafeName { name: name.to_owned(), reason }),
        None => Ok(()),
    }
}

fn read_entry(path: &Path) -> Result<StoreEntry, StoreError> {
    let bytes = fs::read(path)?;
    let corrupt = |message: String| StoreError::Corrupt { path: path.to_owned(), message };
    let split = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| corrupt("missing header line".into()))?;
    let header: EntryHeader = serde_json::from_slice(&bytes[..split]).map_err(|e| corrupt(e.to_string()))?;
    let document = bytes[split + 1..].to_vec();
    let resource = parse_resource(&document).map_err(|e| corrupt(e.to_string()))?;
    Ok(StoreEntry { header, resource, document })
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().expect("store paths have a parent");
    let name = path.file_name().expect("store paths have a file name").to_string_lossy();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut file = File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    if let Err(e) = fs::rename(&tmp, path) {
        let _ = fs::remove_file(&tmp);
        return Err(e);
    }
    // Persist the rename itself. Not every platform lets a directory be opened.
    if let Ok(d) = File::open(dir) {
        let _ = d.sync_all();
    }
    Ok(())
}

fn now_millis() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}
