//! Model file format.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic       4 bytes "DHM1"
//! version     u16     currently 1
//! label_len   u32, then that many utf-8 bytes
//! signature   kind u8, dim u32, frame_shift_us u32
//! num_states  u16
//! num_mix     u16
//! transitions (num_states + 2)^2 f64
//! per state, per mixture: weight f64, mean dim f64, variance dim f64
//! var_floor   dim f64
//! ```

use super::{GmmState, HmmError, HmmModel, Result};
use crate::features::{FeatureKind, FeatureSignature};
use std::fs;
use std::path::Path;

fn kind_tag(kind: FeatureKind) -> u8 {
    kind.tag()
}

fn kind_from_tag(tag: u8) -> Result<FeatureKind> {
    FeatureKind::from_tag(tag)
        .ok_or_else(|| HmmError::CorruptModel(format!("unknown kind tag {tag}")))
}

const MAGIC: &[u8; 4] = b"DHM1";
const VERSION: u16 = 1;

pub fn save_model(model: &HmmModel, path: &Path) -> Result<()> {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    let label = model.word_label.as_bytes();
    bytes.extend_from_slice(&(label.len() as u32).to_le_bytes());
    bytes.extend_from_slice(label);
    bytes.push(kind_tag(model.signature.kind));
    bytes.extend_from_slice(&model.signature.dim.to_le_bytes());
    bytes.extend_from_slice(&model.signature.frame_shift_us.to_le_bytes());
    bytes.extend_from_slice(&(model.num_states as u16).to_le_bytes());
    let num_mix = model.states[0].num_mixtures() as u16;
    bytes.extend_from_slice(&num_mix.to_le_bytes());
    for row in &model.transitions {
        for &p in row {
            bytes.extend_from_slice(&p.to_le_bytes());
        }
    }
    for state in &model.states {
        for m in 0..state.num_mixtures() {
            bytes.extend_from_slice(&state.weights[m].to_le_bytes());
            for &v in &state.means[m] {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            for &v in &state.variances[m] {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    for &v in &model.var_floor {
        bytes.extend_from_slice(&v.to_le_bytes());
    }

    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(HmmError::CorruptModel("unexpected end of file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
}

pub fn load_model(path: &Path) -> Result<HmmModel> {
    let bytes = fs::read(path)?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
    };
    if r.take(4)? != MAGIC {
        return Err(HmmError::CorruptModel("bad magic".into()));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(HmmError::VersionMismatch {
            found: version,
            supported: VERSION,
        });
    }
    let label_len = r.u32()? as usize;
    let label = String::from_utf8(r.take(label_len)?.to_vec())
        .map_err(|_| HmmError::CorruptModel("label is not utf-8".into()))?;
    let kind = kind_from_tag(r.take(1)?[0])?;
    let dim = r.u32()?;
    let frame_shift_us = r.u32()?;
    let num_states = r.u16()? as usize;
    let num_mix = r.u16()? as usize;
    if num_states == 0 || num_mix == 0 || dim == 0 {
        return Err(HmmError::CorruptModel("zero-sized model".into()));
    }

    let size = num_states + 2;
    let mut transitions = Vec::with_capacity(size);
    for _ in 0..size {
        transitions.push(r.f64_vec(size)?);
    }
    let mut states = Vec::with_capacity(num_states);
    for _ in 0..num_states {
        let mut weights = Vec::with_capacity(num_mix);
        let mut means = Vec::with_capacity(num_mix);
        let mut variances = Vec::with_capacity(num_mix);
        for _ in 0..num_mix {
            weights.push(r.f64()?);
            means.push(r.f64_vec(dim as usize)?);
            variances.push(r.f64_vec(dim as usize)?);
        }
        states.push(GmmState {
            weights,
            means,
            variances,
        });
    }
    let var_floor = r.f64_vec(dim as usize)?;
    if r.pos != bytes.len() {
        return Err(HmmError::CorruptModel("trailing bytes".into()));
    }

    Ok(HmmModel {
        word_label: label,
        num_states,
        transitions,
        states,
        signature: FeatureSignature {
            kind,
            dim,
            frame_shift_us,
        },
        var_floor,
    })
}

