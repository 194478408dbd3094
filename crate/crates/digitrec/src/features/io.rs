//! Binary feature-file format.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic   4 bytes  "DFE1"
//! kind    1 byte   0 mfcc, 1 lpc, 2 plp, 3 fbank, 4 melspec
//! dim     u32
//! frames  u32
//! shift   u32      frame shift in microseconds
//! payload dim * frames f32 values, row-major
//! ```

use super::{FeatureError, FeatureKind, FeatureMatrix, Result};
use std::fs;
use std::io::Write;
use std::path::Path;

const MAGIC: &[u8; 4] = b"DFE1";

/// Write atomically: temp file in the target directory, then rename.
pub fn write_features(matrix: &FeatureMatrix, path: &Path) -> Result<()> {
    let mut bytes =
        Vec::with_capacity(17 + matrix.raw().len() * 4);
    bytes.extend_from_slice(MAGIC);
    bytes.push(matrix.kind.tag());
    bytes.extend_from_slice(&(matrix.dim as u32).to_le_bytes());
    bytes.extend_from_slice(&(matrix.num_frames() as u32).to_le_bytes());
    bytes.extend_from_slice(&matrix.frame_shift_us.to_le_bytes());
    for &v in matrix.raw() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }

    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("feat"),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Read a feature file, optionally insisting on a specific kind.
pub fn read_features(path: &Path, expected: Option<FeatureKind>) -> Result<FeatureMatrix> {
    let bytes = fs::read(path)?;
    let corrupt = |msg: &str| FeatureError::CorruptFeatureFile(format!("{}: {msg}", path.display()));
    if bytes.len() < 17 {
        return Err(corrupt("shorter than header"));
    }
    if &bytes[0..4] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let kind = FeatureKind::from_tag(bytes[4]).ok_or_else(|| corrupt("unknown kind tag"))?;
    let dim = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let frames = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    let shift = u32::from_le_bytes(bytes[13..17].try_into().unwrap());
    let expected_len = 17 + dim * frames * 4;
    if bytes.len() != expected_len {
        return Err(corrupt("payload length mismatch"));
    }
    if let Some(want) = expected {
        if want != kind {
            return Err(FeatureError::KindMismatch {
                expected: want,
                found: kind,
            });
        }
    }
    let data: Vec<f32> = bytes[17..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(FeatureMatrix::from_raw(kind, dim, shift, data))
}
