//! Embedding vectors and their CSV / binary file formats.
//!
//! CSV: one row per embedding, `id,v1,...,vn`, no header.
//! Binary: `"EMB1" | n:u32 LE | m:u32 LE | m*n f32 LE`, ids are row numbers.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Norm range each party accepts for its own vectors, so that the product of two norms
/// stays inside the division gate's domain.
pub const MIN_NORM: f64 = 0.25;
pub const MAX_NORM: f64 = 4.0;

#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    pub id: String,
    pub values: Vec<f64>,
}

impl Embedding {
    pub fn new(id: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let e = Self { id: id.into(), values };
        e.validate()?;
        Ok(e)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Embedding) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    pub fn cosine(&self, other: &Embedding) -> f64 {
        self.dot(other) / (self.norm() * other.norm())
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() < 2 {
            return Err(Error::Embedding(format!("{}: dimension must be at least 2", self.id)));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Embedding(format!("{}: non-finite coordinate", self.id)));
        }
        let n = self.norm();
        if !(MIN_NORM..MAX_NORM).contains(&n) {
            return Err(Error::Embedding(format!(
                "{}: norm {n} outside [{MIN_NORM}, {MAX_NORM})",
                self.id
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingDb {
    pub embeddings: Vec<Embedding>,
}

impl EmbeddingDb {
    pub fn new(embeddings: Vec<Embedding>) -> Result<Self> {
        let db = Self { embeddings };
        db.validate()?;
        Ok(db)
    }

    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.embeddings.first().map_or(0, |e| e.dim())
    }

    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.embeddings.first() else {
            return Err(Error::Embedding("database is empty".into()));
        };
        let n = first.dim();
        for e in &self.embeddings {
            if e.dim() != n {
                return Err(Error::DimensionMismatch(format!(
                    "{} has dimension {}, expected {n}",
                    e.id,
                    e.dim()
                )));
            }
            e.validate()?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::Embedding(format!("cannot read {}: {e}", path.display())))?;
        if bytes.starts_with(b"EMB1") {
            Self::from_binary(&bytes)
        } else {
            Self::from_csv(&bytes[..])
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        if path.extension().is_some_and(|e| e == "bin") {
            let mut w = std::io::BufWriter::new(file);
            w.write_all(&self.to_binary())?;
            w.flush()?;
            Ok(())
        } else {
            self.to_csv(file)
        }
    }

    pub fn from_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(r);
        let mut out = Vec::new();
        for (row, rec) in rd.records().enumerate() {
            let rec = rec?;
            let mut it = rec.iter();
            let id = it.next().unwrap_or_default().to_string();
            let values = it
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| Error::Embedding(format!("row {}: bad number {s:?}", row + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            out.push(Embedding { id, values });
        }
        Self::new(out)
    }

    pub fn to_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        for e in &self.embeddings {
            let mut row = vec![e.id.clone()];
            row.extend(e.values.iter().map(|v| format!("{v}")));
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..4] != b"EMB1" {
            return Err(Error::Embedding("missing EMB1 header".into()));
        }
        let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let m = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let body = &bytes[12..];
        if body.len() != n * m * 4 {
            return Err(Error::Embedding(format!(
                "binary body has {} bytes, header implies {}",
                body.len(),
                n * m * 4
            )));
        }
        let vals: Vec<f64> =
            body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();
        let embeddings = vals
            .chunks(n.max(1))
            .take(m)
            .enumerate()
            .map(|(i, c)| Embedding { id: i.to_string(), values: c.to_vec() })
            .collect();
        Self::new(embeddings)
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = b"EMB1".to_vec();
        out.extend_from_slice(&(self.dim() as u32).to_le_bytes());
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        for e in &self.embeddings {
            for v in &e.values {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
        out
    }
}

/// Random direction scaled to a norm drawn from `[0.5, 2)`.
pub fn random_embedding<R: Rng>(id: impl Into<String>, n: usize, rng: &mut R) -> Embedding {
    let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let target = rng.gen_range(0.5..2.0);
    Embedding { id: id.into(), values: v.into_iter().map(|x| x / norm * target).collect() }
}

/// An embedding with cosine exactly `cos` to `base` (up to float rounding).
pub fn embedding_with_cosine<R: Rng>(
    id: impl Into<String>,
    base: &Embedding,
    cos: f64,
    rng: &mut R,
) -> Embedding {
    let n = base.dim();
    let bn = base.norm();
    let u: Vec<f64> = base.values.iter().map(|v| v / bn).collect();
    let mut w: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    let proj: f64 = w.iter().zip(&u).map(|(a, b)| a * b).sum();
    for (wi, ui) in w.iter_mut().zip(&u) {
        *wi -= proj * ui;
    }
    let wn = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    let sin = (1.0 - cos * cos).max(0.0).sqrt();
    let target = rng.gen_range(0.5..2.0);
    let values = u.iter().zip(&w).map(|(a, b)| (cos * a + sin * b / wn) * target).collect();
    Embedding { id: id.into(), values }
}
