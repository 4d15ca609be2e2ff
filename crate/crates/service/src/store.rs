//! One directory per project: a manifest plus the uploaded inputs, the
//! spline documents and the cached result.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use guidefill::grid::{ImageBuffer, LabelMask};
use guidefill::guide::SplineSet;
use guidefill::io;
use guidefill::pipeline::{resolve_splines, PipelineParams};

use crate::ServiceError;

const MANIFEST: &str = "manifest.json";
const IMAGE: &str = "image.png";
const USER_SPLINES: &str = "splines.user.json";
const RESULT: &str = "result.png";
const REPORT: &str = "report.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub at_ms: u64,
    pub kind: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultEntry {
    /// Digest of the inputs that produced the result.
    pub key: String,
    pub sha256: String,
    pub mask: String,
    pub unfillable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub id: String,
    pub created_ms: u64,
    pub width: usize,
    pub height: usize,
    pub masks: Vec<String>,
    pub user_splines: bool,
    pub result: Option<ResultEntry>,
    pub events: Vec<Event>,
}

impl Manifest {
    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn mask_name<'a>(&'a self, requested: Option<&'a str>) -> Result<&'a str, ServiceError> {
        match requested {
            Some(name) if self.masks.iter().any(|m| m == name) => Ok(name),
            Some(name) => Err(ServiceError::BadRequest(format!("project has no mask named {name:?}"))),
            None => Ok(self.masks.first().map(String::as_str).expect("projects always have a mask")),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.len() <= 64 && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(tmp, path)
}

/// Digest identifying a fill: mask, spline document (or auto detection) and
/// parameters.
pub fn result_key(mask: &str, splines: Option<&[u8]>, params: &PipelineParams) -> String {
    let mut h = Sha256::new();
    h.update(mask.as_bytes());
    h.update([0]);
    match splines {
        Some(bytes) => h.update(bytes),
        None => h.update(b"auto"),
    }
    h.update([0]);
    h.update(serde_json::to_vec(params).expect("params serialize"));
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub struct Store {
    root: PathBuf,
    counter: AtomicU64,
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into(), counter: AtomicU64::new(0) }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn dir(&self, id: &str) -> Result<PathBuf, ServiceError> {
        let dir = self.root.join("projects").join(id);
        if !id.chars().all(|c| c.is_ascii_hexdigit()) || id.is_empty() || !dir.join(MANIFEST).is_file() {
            return Err(ServiceError::UnknownProject(id.to_string()));
        }
        Ok(dir)
    }

    pub fn create(&self, image_png: &[u8], masks: &[(String, Vec<u8>)]) -> Result<Manifest, ServiceError> {
        let image = io::decode_png(image_png)?;
        if masks.is_empty() {
            return Err(ServiceError::BadRequest("at least one mask is required".into()));
        }
        for (k, (name, bytes)) in masks.iter().enumerate() {
            if !valid_name(name) || masks[..k].iter().any(|(n, _)| n == name) {
                return Err(ServiceError::BadRequest(format!("bad or duplicate mask name {name:?}")));
            }
            let mask = io::decode_mask(bytes)?;
            if mask.dims() != image.dims() {
                return Err(ServiceError::Conflict(format!(
                    "mask {name:?} is {:?} but the image is {:?}",
                    mask.dims(),
                    image.dims()
                )));
            }
        }
        let created_ms = now_ms();
        let mut seed = image_png.to_vec();
        seed.extend_from_slice(&created_ms.to_le_bytes());
        seed.extend_from_slice(&self.counter.fetch_add(1, Ordering::Relaxed).to_le_bytes());
        seed.extend_from_slice(&std::process::id().to_le_bytes());
        let id = sha256_hex(&seed)[..16].to_string();

        let dir = self.root.join("projects").join(&id);
        fs::create_dir_all(dir.join("masks"))?;
        write_atomic(&dir.join(IMAGE), image_png)?;
        for (name, bytes) in masks {
            write_atomic(&dir.join("masks").join(format!("{name}.mask")), bytes)?;
        }
        let manifest = Manifest {
            id,
            created_ms,
            width: image.width(),
            height: image.height(),
            masks: masks.iter().map(|(n, _)| n.clone()).collect(),
            user_splines: false,
            result: None,
            events: vec![Event { at_ms: created_ms, kind: "created".into(), detail: String::new() }],
        };
        self.save(&manifest)?;
        Ok(manifest)
    }

    pub fn manifest(&self, id: &str) -> Result<Manifest, ServiceError> {
        let bytes = fs::read(self.dir(id)?.join(MANIFEST))?;
        serde_json::from_slice(&bytes).map_err(|e| ServiceError::Internal(format!("corrupt manifest: {e}")))
    }

    pub fn save(&self, manifest: &Manifest) -> Result<(), ServiceError> {
        let dir = self.root.join("projects").join(&manifest.id);
        let text = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
        Ok(write_atomic(&dir.join(MANIFEST), &text)?)
    }

    pub fn log(&self, manifest: &mut Manifest, kind: &str, detail: impl Into<String>) -> Result<(), ServiceError> {
        manifest.events.push(Event { at_ms: now_ms(), kind: kind.into(), detail: detail.into() });
        self.save(manifest)
    }

    pub fn image(&self, id: &str) -> Result<ImageBuffer, ServiceError> {
        Ok(io::decode_png(&fs::read(self.dir(id)?.join(IMAGE))?)?)
    }

    pub fn mask(&self, id: &str, name: &str) -> Result<LabelMask, ServiceError> {
        Ok(io::decode_mask(&fs::read(self.dir(id)?.join("masks").join(format!("{name}.mask")))?)?)
    }

    pub fn user_splines(&self, id: &str) -> Result<Option<Vec<u8>>, ServiceError> {
        match fs::read(self.dir(id)?.join(USER_SPLINES)) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    /// Stores the document verbatim after validating it, and drops any cached
    /// result.
    pub fn put_splines(&self, id: &str, bytes: &[u8]) -> Result<usize, ServiceError> {
        let set = SplineSet::from_json(bytes)?;
        let mut manifest = self.manifest(id)?;
        let dir = self.dir(id)?;
        write_atomic(&dir.join(USER_SPLINES), bytes)?;
        self.drop_result(&mut manifest)?;
        manifest.user_splines = true;
        self.log(&mut manifest, "splines_put", format!("{} splines", set.splines.len()))?;
        Ok(set.splines.len())
    }

    /// Detected splines for `mask`, cached per mask.
    pub fn auto_splines(&self, id: &str, mask_name: &str) -> Result<Vec<u8>, ServiceError> {
        let path = self.dir(id)?.join(format!("splines.auto.{mask_name}.json"));
        if let Ok(bytes) = fs::read(&path) {
            return Ok(bytes);
        }
        let image = self.image(id)?;
        let mask = self.mask(id, mask_name)?;
        let set = resolve_splines(&image, &mask, None, &PipelineParams::default())?;
        let bytes = set.to_json().into_bytes();
        write_atomic(&path, &bytes)?;
        Ok(bytes)
    }

    /// User splines when present, otherwise the detected ones.
    pub fn current_splines(&self, id: &str, mask_name: &str) -> Result<Vec<u8>, ServiceError> {
        match self.user_splines(id)? {
            Some(b) => Ok(b),
            None => self.auto_splines(id, mask_name),
        }
    }

    pub fn drop_result(&self, manifest: &mut Manifest) -> Result<(), ServiceError> {
        let dir = self.dir(&manifest.id)?;
        for f in [RESULT, REPORT] {
            match fs::remove_file(dir.join(f)) {
                Err(e) if e.kind() != std::io::ErrorKind::NotFound => return Err(e.into()),
                _ => {}
            }
        }
        manifest.result = None;
        Ok(())
    }

    pub fn save_result(&self, manifest: &mut Manifest, entry: ResultEntry, png: &[u8], report: &[u8]) -> Result<(), ServiceError> {
        let dir = self.dir(&manifest.id)?;
        write_atomic(&dir.join(RESULT), png)?;
        write_atomic(&dir.join(REPORT), report)?;
        let detail = format!("mask {} sha256 {}", entry.mask, entry.sha256);
        manifest.result = Some(entry);
        self.log(manifest, "inpaint", detail)
    }

    pub fn result_png(&self, id: &str) -> Result<Vec<u8>, ServiceError> {
        fs::read(self.dir(id)?.join(RESULT)).map_err(|_| ServiceError::NoResult(id.to_string()))
    }

    pub fn report(&self, id: &str) -> Result<serde_json::Value, ServiceError> {
        let bytes = fs::read(self.dir(id)?.join(REPORT)).map_err(|_| ServiceError::NoResult(id.to_string()))?;
        serde_json::from_slice(&bytes).map_err(|e| ServiceError::Internal(e.to_string()))
    }
}
