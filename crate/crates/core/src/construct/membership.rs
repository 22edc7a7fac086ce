use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypercore::{read_body, read_header, write_matrix};

pub const MEMBERSHIP_MAGIC: &[u8; 6] = b"HGSMX1";

/// `n × k` membership degrees in `[0, 1]`, row-major in single precision.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMembership {
    n: usize,
    k: usize,
    data: Vec<f32>,
    pub source_tag: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MembershipSummary {
    pub n: usize,
    pub k: usize,
    pub min_row_sum: f64,
    pub max_row_sum: f64,
    /// Largest `|u_ij - 1/k|` over all cells.
    pub max_uniform_deviation: f64,
}

impl SoftMembership {
    /// Rejects cells outside `[0, 1]` (or non-finite), naming the first one.
    pub fn new(n: usize, k: usize, data: Vec<f32>, source_tag: impl Into<String>) -> Result<Self> {
        if k == 0 {
            return Err(Error::Format("membership matrix needs at least one column".into()));
        }
        if data.len() != n * k {
            return Err(Error::Format(format!(
                "membership shape {n}×{k} needs {} values, got {}",
                n * k,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::Format(format!(
                "membership value {} out of [0,1] at row {}, column {}",
                data[pos],
                pos / k,
                pos % k
            )));
        }
        Ok(SoftMembership {
            n,
            k,
            data,
            source_tag: source_tag.into(),
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], source_tag: impl Into<String>) -> Result<Self> {
        let k = rows.first().map(|r| r.as_ref().len()).unwrap_or(1);
        let mut data = Vec::with_capacity(rows.len() * k);
        for (i, r) in rows.iter().enumerate() {
            if r.as_ref().len() != k {
                return Err(Error::Format(format!("row {i} has {} columns, expected {k}", r.as_ref().len())));
            }
            data.extend(r.as_ref().iter().map(|&x| x as f32));
        }
        SoftMembership::new(rows.len(), k, data, source_tag)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.k + j] as f64
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.k)
    }

    pub fn summary(&self) -> MembershipSummary {
        let uniform = 1.0 / self.k as f64;
        let (mut lo, mut hi, mut dev) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
        for row in self.rows() {
            let s: f64 = row.iter().map(|&x| x as f64).sum();
            lo = lo.min(s);
            hi = hi.max(s);
            for &x in row {
                dev = dev.max((x as f64 - uniform).abs());
            }
        }
        MembershipSummary {
            n: self.n,
            k: self.k,
            min_row_sum: if self.n == 0 { 0.0 } else { lo },
            max_row_sum: if self.n == 0 { 0.0 } else { hi },
            max_uniform_deviation: dev,
        }
    }

    /// Layout: magic `HGSMX1`, u32 n, u32 k, u32 tag length, UTF-8 tag,
    /// then `n·k` float32 values, all little-endian.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = Vec::new();
        write_matrix(&mut header, MEMBERSHIP_MAGIC, self.n, self.k, &[])?;
        w.write_all(&header)?;
        w.write_u32::<LittleEndian>(self.source_tag.len() as u32)?;
        w.write_all(self.source_tag.as_bytes())?;
        for &x in &self.data {
            w.write_f32::<LittleEndian>(x)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let (n, k) = read_header(&mut r, MEMBERSHIP_MAGIC)?;
        let tag_len = r
            .read_u32::<LittleEndian>()
            .map_err(|_| Error::Format("truncated header".into()))? as usize;
        let mut tag = vec![0u8; tag_len];
        r.read_exact(&mut tag)
            .map_err(|_| Error::Format("truncated source tag".into()))?;
        let tag = String::from_utf8(tag).map_err(|_| Error::Format("source tag is not UTF-8".into()))?;
        let data = read_body(&mut r, n, k)?;
        SoftMembership::new(n, k, data, tag)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

/// Loads a membership file, optionally checking its row count.
pub fn import_membership(path: impl AsRef<Path>, expected_n: Option<usize>) -> Result<SoftMembership> {
    let soft = SoftMembership::read_from(BufReader::new(File::open(path)?))?;
    if let Some(n) = expected_n {
        if soft.n != n {
            return Err(Error::Dimension(format!(
                "membership file has {} rows, collection has {n} images",
                soft.n
            )));
        }
    }
    Ok(soft)
}
