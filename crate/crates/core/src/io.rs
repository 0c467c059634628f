//! Point cloud files and dataset directories.
//!
//! Text clouds hold one `x y z` triple per line with an optional
//! `# label <int>` header. Datasets are laid out as
//! `<root>/<split>/<class-name>/<id>.xyz`. The binary cache stores one cloud
//! as `PCV1`, a little-endian `u32` point count, `n×3` `f32` coordinates and
//! an `i32` label (`-1` when absent).

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

pub const CACHE_MAGIC: &[u8; 4] = b"PCV1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn dir_name(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.dir_name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::arg(format!("unknown split '{other}'"))),
        }
    }
}

/// Parses the text format. `origin` only labels error messages.
pub fn parse_xyz(text: &str, origin: &Path) -> Result<PointCloud> {
    let parse_err = |line: usize, message: String| Error::Parse {
        file: origin.to_path_buf(),
        line,
        message,
    };
    let mut label = None;
    let mut coords = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let mut words = comment.split_whitespace();
            if words.next() == Some("label") {
                let value = words
                    .next()
                    .ok_or_else(|| parse_err(line_no, "label header without a value".into()))?;
                let parsed: i64 = value
                    .parse()
                    .map_err(|_| parse_err(line_no, format!("invalid label '{value}'")))?;
                label = usize::try_from(parsed).ok();
            }
            continue;
        }
        let mut count = 0;
        for token in line.split_whitespace() {
            let v: f64 = token
                .parse()
                .map_err(|_| parse_err(line_no, format!("non-numeric token '{token}'")))?;
            if !v.is_finite() {
                return Err(parse_err(line_no, format!("non-finite coordinate '{token}'")));
            }
            coords.push(v);
            count += 1;
        }
        if count != 3 {
            return Err(parse_err(line_no, format!("expected 3 coordinates, found {count}")));
        }
    }
    if coords.is_empty() {
        return Err(parse_err(0, "file contains no points".into()));
    }
    let n = coords.len() / 3;
    let points = Array2::from_shape_vec((n, 3), coords).expect("3 coordinates per point");
    let mut cloud = PointCloud::new(points)?;
    cloud.label = label;
    Ok(cloud)
}

pub fn read_xyz(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cloud = parse_xyz(&text, path)?;
    if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
        cloud.name = Some(stem.to_string());
    }
    Ok(cloud)
}

pub fn format_xyz(cloud: &PointCloud) -> String {
    let mut out = String::new();
    if let Some(label) = cloud.label {
        out.push_str(&format!("# label {label}\n"));
    }
    for row in cloud.points().rows() {
        out.push_str(&format!("{} {} {}\n", row[0], row[1], row[2]));
    }
    out
}

pub fn write_xyz(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_xyz(cloud)).map_err(|e| Error::io(path, e))
}

/// Loads every `.xyz` file under `<root>/<split>`.
///
/// Class directories are visited in lexicographic order and each cloud is
/// labeled with its directory's position unless the file carries a label
/// header. A split directory that does not exist yields an empty list; a
/// missing `root` is an I/O error. All clouds must share one point count.
pub fn load_dataset(root: impl AsRef<Path>, split: Split) -> Result<Vec<PointCloud>> {
    let root = root.as_ref();
    fs::metadata(root).map_err(|e| Error::io(root, e))?;
    let split_dir = root.join(split.dir_name());
    if !split_dir.is_dir() {
        return Ok(Vec::new());
    }

    let mut class_dirs = Vec::new();
    let mut loose_files = Vec::new();
    for entry in sorted_entries(&split_dir)? {
        if entry.is_dir() {
            class_dirs.push(entry);
        } else if is_xyz(&entry) {
            loose_files.push(entry);
        }
    }

    let mut clouds = Vec::new();
    for file in loose_files {
        clouds.push(read_xyz(&file)?);
    }
    for (class_idx, dir) in class_dirs.iter().enumerate() {
        for file in sorted_entries(dir)?.into_iter().filter(|p| is_xyz(p)) {
            let mut cloud = read_xyz(&file)?;
            if cloud.label.is_none() {
                cloud.label = Some(class_idx);
            }
            clouds.push(cloud);
        }
    }

    if let Some(first) = clouds.first() {
        let n = first.len();
        if let Some(bad) = clouds.iter().find(|c| c.len() != n) {
            return Err(Error::config(format!(
                "dataset {} mixes point counts: {} and {} ({})",
                split_dir.display(),
                n,
                bad.len(),
                bad.name.as_deref().unwrap_or("?")
            )));
        }
    }
    Ok(clouds)
}

/// Class directory names of `<root>/<split>` in label order.
pub fn class_names(root: impl AsRef<Path>, split: Split) -> Result<Vec<String>> {
    let split_dir = root.as_ref().join(split.dir_name());
    if !split_dir.is_dir() {
        return Ok(Vec::new());
    }
    Ok(sorted_entries(&split_dir)?
        .into_iter()
        .filter(|p| p.is_dir())
        .filter_map(|p| p.file_name().and_then(|s| s.to_str()).map(str::to_string))
        .collect())
}

/// Writes clouds in the dataset layout; clouds without a label go to `unlabeled/`.
pub fn write_dataset(
    root: impl AsRef<Path>,
    split: Split,
    clouds: &[PointCloud],
    class_names: &[&str],
) -> Result<()> {
    let split_dir = root.as_ref().join(split.dir_name());
    for (i, cloud) in clouds.iter().enumerate() {
        let class = cloud
            .label
            .and_then(|l| class_names.get(l).copied())
            .unwrap_or("unlabeled");
        let dir = split_dir.join(class);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_xyz(dir.join(format!("{i:05}.xyz")), cloud)?;
    }
    Ok(())
}

fn is_xyz(path: &Path) -> bool {
    path.is_file() && path.extension().is_some_and(|e| e == "xyz")
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        entries.push(entry.map_err(|e| Error::io(dir, e))?.path());
    }
    entries.sort();
    Ok(entries)
}

pub fn encode_cache(cloud: &PointCloud) -> Vec<u8> {
    let n = cloud.len();
    let mut bytes = Vec::with_capacity(4 + 4 + n * 12 + 4);
    bytes.extend_from_slice(CACHE_MAGIC);
    bytes.extend_from_slice(&(n as u32).to_le_bytes());
    for v in cloud.points().iter() {
        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    let label = cloud.label.map(|l| l as i32).unwrap_or(-1);
    bytes.extend_from_slice(&label.to_le_bytes());
    bytes
}

/// Decodes one cached cloud. `origin` only labels error messages; the error's
/// `line` field holds the byte offset of the problem.
pub fn decode_cache(bytes: &[u8], origin: &Path) -> Result<PointCloud> {
    let err = |offset: usize, message: &str| Error::Parse {
        file: origin.to_path_buf(),
        line: offset,
        message: message.to_string(),
    };
    if bytes.len() < 8 || &bytes[..4] != CACHE_MAGIC {
        return Err(err(0, "missing PCV1 magic"));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let expected = 8 + n * 12 + 4;
    if bytes.len() != expected {
        return Err(err(8, &format!("expected {expected} bytes for {n} points, found {}", bytes.len())));
    }
    let coords: Vec<f64> = bytes[8..8 + n * 12]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    let label = i32::from_le_bytes(bytes[expected - 4..].try_into().unwrap());
    let points = Array2::from_shape_vec((n, 3), coords).expect("3 coordinates per point");
    let mut cloud = PointCloud::new(points).map_err(|e| err(8, &e.to_string()))?;
    cloud.label = usize::try_from(label).ok();
    Ok(cloud)
}

pub fn write_cache(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_cache(cloud)).map_err(|e| Error::io(path, e))
}

pub fn read_cache(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_cache(&bytes, path)
}
