//! Binary model files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic        4 bytes  "F10M"
//! version      u32      1
//! task         u8       0 = maxent, 1 = crf
//! labels       u32      number of classes / labels
//! features     u32      number of features
//! config       string   featurization settings, `key=value;...`
//! label names  u32 count, then strings
//! feature names u32 count, then strings
//! nnz          u64
//! records      nnz x (u64 flat index, f64 value), increasing index
//! ```
//!
//! Strings are a u32 byte length followed by UTF-8 bytes. Only nonzero
//! weights are written, so file size tracks model sparsity.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::alphabet::Alphabet;
use crate::crf::CrfModel;
use crate::error::{Error, Result};
use crate::maxent::MaxEntModel;
use crate::model::LinearModel;

pub const MAGIC: &[u8; 4] = b"F10M";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskKind {
    MaxEnt,
    Crf,
}

impl TaskKind {
    fn code(self) -> u8 {
        match self {
            TaskKind::MaxEnt => 0,
            TaskKind::Crf => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::MaxEnt => "maxent",
            TaskKind::Crf => "crf",
        }
    }

    /// Length of the flat weight vector.
    pub fn num_weights(self, num_features: usize, num_labels: usize) -> usize {
        match self {
            TaskKind::MaxEnt => MaxEntModel::new(num_features, num_labels).num_weights(),
            TaskKind::Crf => CrfModel::new(num_features, num_labels).num_weights(),
        }
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "maxent" => Ok(TaskKind::MaxEnt),
            "crf" => Ok(TaskKind::Crf),
            other => Err(format!("unknown task `{other}` (expected maxent or crf)")),
        }
    }
}

/// Everything needed to reproduce predictions.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelFile {
    pub task: TaskKind,
    pub labels: Alphabet,
    pub features: Alphabet,
    /// Featurization settings recorded at training time.
    pub config: String,
    pub weights: Vec<f64>,
}

impl ModelFile {
    pub fn nonzero_count(&self) -> usize {
        self.weights.iter().filter(|w| **w != 0.0).count()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&[self.task.code()])?;
        w.write_all(&(self.labels.len() as u32).to_le_bytes())?;
        w.write_all(&(self.features.len() as u32).to_le_bytes())?;
        write_str(w, &self.config)?;
        for alphabet in [&self.labels, &self.features] {
            w.write_all(&(alphabet.len() as u32).to_le_bytes())?;
            for s in alphabet.iter() {
                write_str(w, s)?;
            }
        }
        w.write_all(&(self.nonzero_count() as u64).to_le_bytes())?;
        for (i, &v) in self.weights.iter().enumerate() {
            if v != 0.0 {
                w.write_all(&(i as u64).to_le_bytes())?;
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::UnsupportedModel("bad magic".into()));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(Error::UnsupportedModel(format!("version {version}")));
        }
        let mut code = [0u8; 1];
        read_exact(r, &mut code)?;
        let task = match code[0] {
            0 => TaskKind::MaxEnt,
            1 => TaskKind::Crf,
            c => return Err(Error::UnsupportedModel(format!("task code {c}"))),
        };
        let num_labels = read_u32(r)? as usize;
        let num_features = read_u32(r)? as usize;
        let config = read_str(r)?;
        let labels = read_alphabet(r)?;
        let features = read_alphabet(r)?;
        if labels.len() != num_labels || features.len() != num_features {
            return Err(Error::UnsupportedModel("alphabet sizes disagree with header".into()));
        }
        let len = task.num_weights(num_features, num_labels);
        let mut weights = vec![0.0; len];
        let nnz = read_u64(r)?;
        for _ in 0..nnz {
            let index = read_u64(r)? as usize;
            let value = f64::from_bits(read_u64(r)?);
            if index >= len {
                return Err(Error::UnsupportedModel(format!(
                    "weight index {index} out of range {len}"
                )));
            }
            weights[index] = value;
        }
        Ok(ModelFile {
            task,
            labels,
            features,
            config,
            weights,
        })
    }
}

pub fn save_model<P: AsRef<Path>>(model: &ModelFile, path: P) -> Result<()> {
    let mut file = io::BufWriter::new(fs::File::create(path)?);
    model.write_to(&mut file)?;
    file.flush()?;
    Ok(())
}

pub fn load_model<P: AsRef<Path>>(path: P) -> Result<ModelFile> {
    let mut file = io::BufReader::new(fs::File::open(path)?);
    ModelFile::read_from(&mut file)
}

fn write_str<W: Write>(w: &mut W, s: &str) -> io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => Error::UnsupportedModel("truncated file".into()),
        _ => Error::Io(e),
    })
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let len = read_u32(r)? as usize;
    let mut buf = Vec::new();
    r.take(len as u64).read_to_end(&mut buf)?;
    if buf.len() != len {
        return Err(Error::UnsupportedModel("truncated file".into()));
    }
    String::from_utf8(buf).map_err(|_| Error::UnsupportedModel("invalid UTF-8 string".into()))
}

fn read_alphabet<R: Read>(r: &mut R) -> Result<Alphabet> {
    let count = read_u32(r)?;
    let mut alphabet = Alphabet::new();
    for _ in 0..count {
        let s = read_str(r)?;
        if alphabet.intern(&s) != Some(alphabet.len() as u32 - 1) {
            return Err(Error::UnsupportedModel(format!("duplicate alphabet entry `{s}`")));
        }
    }
    alphabet.freeze();
    Ok(alphabet)
}
