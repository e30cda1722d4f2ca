//! Binary checkpoint format (all integers little-endian):
//!
//! ```text
//! magic "APIMAPCK" | version u32 | header_len u64 | header JSON
//! | param_count u64
//! | per parameter: name_len u32 | name | ndim u32 | dims u64.. | values f64.. | sq_grad f64.. | sq_update f64..
//! | SHA-256 of everything above (32 bytes)
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::model::JointModel;
use super::train::EpochLog;
use super::{ModelConfig, Seq2SeqError};
use crate::corpus::Vocabulary;
use crate::neural::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"APIMAPCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    api_vocab: Vocabulary,
    word_vocab: Vocabulary,
    history: Vec<EpochLog>,
}

pub fn save_checkpoint(model: &JointModel, path: &Path) -> Result<(), Seq2SeqError> {
    let bytes = to_bytes(model)?;
    fs::write(path, bytes).map_err(|source| Seq2SeqError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<JointModel, Seq2SeqError> {
    let bytes = fs::read(path).map_err(|source| Seq2SeqError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    from_bytes(&bytes)
}

fn put_f64s(out: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) fn to_bytes(model: &JointModel) -> Result<Vec<u8>, Seq2SeqError> {
    let header = Header {
        config: model.config.clone(),
        api_vocab: model.api_vocab.clone(),
        word_vocab: model.word_vocab.clone(),
        history: model.history.clone(),
    };
    let header = serde_json::to_vec(&header)
        .map_err(|e| Seq2SeqError::MalformedCheckpoint(e.to_string()))?;
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&(model.store.len() as u64).to_le_bytes());
    for (id, name, value) in model.store.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(value.shape().len() as u32).to_le_bytes());
        for d in value.shape() {
            out.extend_from_slice(&(*d as u64).to_le_bytes());
        }
        let (sq_grad, sq_update) = model.store.accumulators(id);
        put_f64s(&mut out, value.data());
        put_f64s(&mut out, sq_grad.data());
        put_f64s(&mut out, sq_update.data());
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(digest.as_slice());
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], Seq2SeqError> {
        let end = self.pos.checked_add(n).ok_or(Seq2SeqError::Truncated)?;
        if end > self.bytes.len() {
            return Err(Seq2SeqError::Truncated);
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, Seq2SeqError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<usize, Seq2SeqError> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| Seq2SeqError::Truncated)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, Seq2SeqError> {
        let raw = self.take(n.checked_mul(8).ok_or(Seq2SeqError::Truncated)?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub(crate) fn from_bytes(bytes: &[u8]) -> Result<JointModel, Seq2SeqError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(CHECKPOINT_MAGIC.len())? != CHECKPOINT_MAGIC {
        return Err(Seq2SeqError::BadMagic);
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Seq2SeqError::VersionMismatch {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    if bytes.len() < r.pos + 32 {
        return Err(Seq2SeqError::Truncated);
    }
    // Parse against the body only so a short file reads as truncated
    // rather than as a checksum failure.
    let body_end = bytes.len() - 32;
    let header_len = r.u64()?;
    let header_bytes = r.take(header_len)?;
    let mut blocks = Vec::new();
    let count = r.u64()?;
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| Seq2SeqError::MalformedCheckpoint("parameter name is not UTF-8".into()))?;
        let ndim = r.u32()? as usize;
        let shape = (0..ndim).map(|_| r.u64()).collect::<Result<Vec<_>, _>>()?;
        let n = shape
            .iter()
            .try_fold(1usize, |acc, d| acc.checked_mul(*d))
            .ok_or(Seq2SeqError::Truncated)?;
        let value = r.f64s(n)?;
        let sq_grad = r.f64s(n)?;
        let sq_update = r.f64s(n)?;
        blocks.push((name, shape, value, sq_grad, sq_update));
    }
    if r.pos > body_end {
        return Err(Seq2SeqError::Truncated);
    }
    if r.pos < body_end {
        return Err(Seq2SeqError::MalformedCheckpoint(format!(
            "{} unexpected trailing bytes",
            body_end - r.pos
        )));
    }
    if Sha256::digest(&bytes[..body_end]).as_slice() != &bytes[body_end..] {
        return Err(Seq2SeqError::Checksum);
    }

    let header: Header = serde_json::from_slice(header_bytes)
        .map_err(|e| Seq2SeqError::MalformedCheckpoint(e.to_string()))?;
    let mut model = JointModel::new(header.config, header.api_vocab, header.word_vocab)?;
    model.history = header.history;
    if blocks.len() != model.store.len() {
        return Err(Seq2SeqError::MalformedCheckpoint(format!(
            "{} parameter blocks, model has {}",
            blocks.len(),
            model.store.len()
        )));
    }
    for (name, shape, value, sq_grad, sq_update) in blocks {
        let id = model
            .store
            .id(&name)
            .ok_or_else(|| Seq2SeqError::MalformedCheckpoint(format!("unknown parameter {name}")))?;
        if model.store.get(id).shape() != shape.as_slice() {
            return Err(Seq2SeqError::MalformedCheckpoint(format!(
                "parameter {name} has shape {shape:?}, expected {:?}",
                model.store.get(id).shape()
            )));
        }
        *model.store.get_mut(id) = Tensor::from_vec(&shape, value)?;
        model.store.set_accumulators(
            id,
            Tensor::from_vec(&shape, sq_grad)?,
            Tensor::from_vec(&shape, sq_update)?,
        )?;
    }
    Ok(model)
}
