use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EMBEDDING_MAGIC: &[u8; 6] = b"HGEMB1";

/// A metadata value attached to an image: numeric or free text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetaValue {
    Number(f64),
    Text(String),
}

impl MetaValue {
    /// Empty strings and non-finite numbers count as missing.
    pub fn is_valid(&self) -> bool {
        match self {
            MetaValue::Number(x) => x.is_finite(),
            MetaValue::Text(s) => !s.trim().is_empty(),
        }
    }

    pub fn as_key(&self) -> String {
        match self {
            MetaValue::Number(x) => format!("{x}"),
            MetaValue::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub id: usize,
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, Option<MetaValue>>,
}

impl ImageEntry {
    /// The field's value if present and valid.
    pub fn field(&self, name: &str) -> Option<&MetaValue> {
        self.metadata
            .get(name)
            .and_then(|v| v.as_ref())
            .filter(|v| v.is_valid())
    }
}

/// Ordered list of images. Image `i` is row `i` of the embedding matrix.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ImageManifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_tag: Option<String>,
    pub images: Vec<ImageEntry>,
}

impl ImageManifest {
    pub fn from_paths<P: Into<PathBuf>>(paths: impl IntoIterator<Item = P>) -> Self {
        ImageManifest {
            model_tag: None,
            images: paths
                .into_iter()
                .enumerate()
                .map(|(id, p)| ImageEntry {
                    id,
                    path: p.into(),
                    metadata: BTreeMap::new(),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, img) in self.images.iter().enumerate() {
            if img.id != i {
                return Err(Error::Validation(format!(
                    "manifest entry {i} has id {}, ids must be dense 0..n-1 in order",
                    img.id
                )));
            }
            if img.path.as_os_str().is_empty() {
                return Err(Error::Validation(format!("manifest entry {i} has an empty path")));
            }
        }
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let m: ImageManifest = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        m.validate()?;
        Ok(m)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        serde_json::to_writer_pretty(BufWriter::new(File::create(path)?), self)?;
        Ok(())
    }

    /// Fields seen anywhere in the manifest.
    pub fn field_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .images
            .iter()
            .flat_map(|img| img.metadata.keys().cloned())
            .collect();
        names.sort();
        names.dedup();
        names
    }
}

/// `n × d` feature matrix stored row-major in single precision.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    n: usize,
    d: usize,
    data: Vec<f32>,
    pub model_tag: String,
}

impl EmbeddingMatrix {
    /// Validates shape, finiteness, and rejects all-zero rows.
    pub fn new(n: usize, d: usize, data: Vec<f32>, model_tag: impl Into<String>) -> Result<Self> {
        if d == 0 {
            return Err(Error::Validation("embedding dimension must be at least 1".into()));
        }
        if data.len() != n * d {
            return Err(Error::Dimension(format!(
                "expected {n}×{d} = {} values, got {}",
                n * d,
                data.len()
            )));
        }
        for (i, row) in data.chunks_exact(d).enumerate() {
            if let Some(col) = row.iter().position(|x| !x.is_finite()) {
                return Err(Error::Validation(format!(
                    "non-finite embedding value at row {i}, column {col}"
                )));
            }
            if row.iter().all(|&x| x == 0.0) {
                return Err(Error::Validation(format!("embedding row {i} is all zeros")));
            }
        }
        Ok(EmbeddingMatrix {
            n,
            d,
            data,
            model_tag: model_tag.into(),
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], model_tag: impl Into<String>) -> Result<Self> {
        let d = rows.first().map(|r| r.as_ref().len()).unwrap_or(1);
        let mut data = Vec::with_capacity(rows.len() * d);
        for (i, r) in rows.iter().enumerate() {
            if r.as_ref().len() != d {
                return Err(Error::Dimension(format!("row {i} has length {}, expected {d}", r.as_ref().len())));
            }
            data.extend(r.as_ref().iter().map(|&x| x as f32));
        }
        EmbeddingMatrix::new(rows.len(), d, data, model_tag)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn try_row(&self, i: usize) -> Result<&[f32]> {
        if i >= self.n {
            return Err(Error::IndexOutOfRange {
                what: "embedding rows",
                index: i,
                len: self.n,
            });
        }
        Ok(self.row(i))
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.d)
    }

    /// Row converted to double precision.
    pub fn row_f64(&self, i: usize) -> Vec<f64> {
        self.row(i).iter().map(|&x| x as f64).collect()
    }

    /// Checks that the matrix aligns with a manifest.
    pub fn check_manifest(&self, manifest: &ImageManifest) -> Result<()> {
        if manifest.len() != self.n {
            return Err(Error::Dimension(format!(
                "manifest lists {} images but embeddings have {} rows",
                manifest.len(),
                self.n
            )));
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        write_matrix(&mut w, EMBEDDING_MAGIC, self.n, self.d, &self.data)?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R, model_tag: impl Into<String>) -> Result<Self> {
        let (n, d, data) = read_matrix(r, EMBEDDING_MAGIC)?;
        EmbeddingMatrix::new(n, d, data, model_tag)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Reads an embedding file; the model tag defaults to the file stem.
    pub fn read_file(path: impl AsRef<Path>, model_tag: Option<&str>) -> Result<Self> {
        let path = path.as_ref();
        let tag = model_tag.map(str::to_owned).unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        });
        EmbeddingMatrix::read_from(BufReader::new(File::open(path)?), tag)
    }
}

pub(crate) fn write_matrix<W: Write>(
    w: &mut W,
    magic: &[u8; 6],
    rows: usize,
    cols: usize,
    data: &[f32],
) -> std::io::Result<()> {
    w.write_all(magic)?;
    w.write_u32::<LittleEndian>(rows as u32)?;
    w.write_u32::<LittleEndian>(cols as u32)?;
    for &x in data {
        w.write_f32::<LittleEndian>(x)?;
    }
    Ok(())
}

pub(crate) fn read_header<R: Read>(r: &mut R, magic: &[u8; 6]) -> Result<(usize, usize)> {
    let mut got = [0u8; 6];
    r.read_exact(&mut got)
        .map_err(|_| Error::Format("file too short for header".into()))?;
    if &got != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&got),
            String::from_utf8_lossy(magic)
        )));
    }
    let rows = r
        .read_u32::<LittleEndian>()
        .map_err(|_| Error::Format("truncated header".into()))? as usize;
    let cols = r
        .read_u32::<LittleEndian>()
        .map_err(|_| Error::Format("truncated header".into()))? as usize;
    Ok((rows, cols))
}

pub(crate) fn read_body<R: Read>(r: &mut R, rows: usize, cols: usize) -> Result<Vec<f32>> {
    let mut data = vec![0f32; rows * cols];
    r.read_f32_into::<LittleEndian>(&mut data).map_err(|_| {
        Error::Format(format!("truncated body: expected {rows}×{cols} float32 values"))
    })?;
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(Error::Format("trailing bytes after matrix body".into()));
    }
    Ok(data)
}

fn read_matrix<R: Read>(mut r: R, magic: &[u8; 6]) -> Result<(usize, usize, Vec<f32>)> {
    let (rows, cols) = read_header(&mut r, magic)?;
    let data = read_body(&mut r, rows, cols)?;
    Ok((rows, cols, data))
}
