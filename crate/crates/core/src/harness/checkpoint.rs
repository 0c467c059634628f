use std::collections::BTreeMap;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::autodiff::ParamStore;
use crate::error::{Error, Result};

const MAGIC: &[u8; 5] = b"MOPS1";
const VERSION: u32 = 1;

/// Named parameter tensors plus the configuration that produced them.
///
/// Layout: magic `MOPS1`, little-endian `u32` version, `u32` tensor count,
/// then per tensor a `u32`-length-prefixed UTF-8 name, `u32` rows, `u32`
/// columns and `rows·cols` `f32` values; finally a `u32`-length-prefixed TOML
/// document holding the run configuration and reference metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub tensors: Vec<(String, Array2<f64>)>,
    pub reference: BTreeMap<String, f64>,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    config: RunConfig,
    #[serde(default)]
    reference: BTreeMap<String, f64>,
}

impl Checkpoint {
    pub fn new(config: RunConfig) -> Self {
        Self {
            config,
            tensors: Vec::new(),
            reference: BTreeMap::new(),
        }
    }

    /// Appends every tensor of `store`.
    pub fn add_store(&mut self, store: &ParamStore) {
        for (name, value) in store.named() {
            self.tensors.push((name.to_string(), value.clone()));
        }
    }

    /// Fills `store` from the tensors with matching names.
    pub fn load_store(&self, store: &mut ParamStore) -> Result<()> {
        store.load_named(self.tensors.iter().map(|(n, v)| (n.as_str(), v)))
    }

    pub fn has_prefix(&self, prefix: &str) -> bool {
        self.tensors.iter().any(|(n, _)| n.starts_with(prefix))
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, value) in &self.tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(value.nrows() as u32).to_le_bytes());
            out.extend_from_slice(&(value.ncols() as u32).to_le_bytes());
            for v in value.iter() {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
        let snapshot = Snapshot {
            config: self.config.clone(),
            reference: self.reference.clone(),
        };
        let text = toml::to_string(&snapshot).expect("snapshot serializes");
        out.extend_from_slice(&(text.len() as u32).to_le_bytes());
        out.extend_from_slice(text.as_bytes());
        out
    }

    pub fn decode(bytes: &[u8], origin: &Path) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, origin };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(r.error("not a checkpoint (bad magic)"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(r.error(&format!("unsupported checkpoint version {version}")));
        }
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| r.error("tensor name is not UTF-8"))?
                .to_string();
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let raw = r.take(rows.checked_mul(cols).and_then(|k| k.checked_mul(4)).ok_or_else(|| r.error("tensor too large"))?)?;
            let data: Vec<f64> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            let value = Array2::from_shape_vec((rows, cols), data).expect("sized above");
            tensors.push((name, value));
        }
        let len = r.u32()? as usize;
        let text = std::str::from_utf8(r.take(len)?).map_err(|_| r.error("configuration is not UTF-8"))?;
        let snapshot: Snapshot =
            toml::from_str(text).map_err(|e| Error::Config(format!("checkpoint configuration: {e}")))?;
        snapshot.config.validate()?;
        Ok(Self {
            config: snapshot.config,
            tensors,
            reference: snapshot.reference,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    /// A missing file is a configuration error, since runs name their inputs.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::Config(format!("checkpoint {} does not exist", path.display())));
        }
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes, path)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    origin: &'a Path,
}

impl<'a> Reader<'a> {
    fn error(&self, message: &str) -> Error {
        Error::Parse {
            file: self.origin.to_path_buf(),
            line: self.pos,
            message: message.to_string(),
        }
    }

    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < len {
            return Err(self.error("unexpected end of checkpoint"));
        }
        let out = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}
