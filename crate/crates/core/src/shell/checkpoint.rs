//! Lossless binary state checkpoints.
//!
//! Layout (little endian):
//!
//! ```text
//! magic     8 bytes  "BRUSSCK1"
//! version   u32      currently 1
//! dim       u32
//! lengths   dim x f64
//! modes     u32      per-axis mode count
//! time      f64
//! coeffs    6 * modes^dim x f64   block order u, v, phi, w, z, psi
//! checksum  u64      FNV-1a of every preceding byte
//! ```

use crate::error::{Error, Result};
use crate::spectral::{ModalState, SineBasis};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"BRUSSCK1";
const VERSION: u32 = 1;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

fn basis_descriptor(dim: usize, lengths: &[f64], modes: usize) -> String {
    format!("dim={dim}, lengths={lengths:?}, modes_per_axis={modes}")
}

/// Writes a state together with its basis descriptor.
pub fn checkpoint_save(ms: &ModalState, basis: &SineBasis, path: &Path) -> Result<()> {
    if !ms.is_finite() {
        return Err(Error::NonFinite {
            what: "checkpoint_save",
            component: "state".into(),
            value: f64::NAN,
        });
    }
    if ms.m_tot() != basis.m_tot() {
        return Err(Error::ShapeMismatch {
            what: "checkpoint_save",
            expected: basis.m_tot(),
            got: ms.m_tot(),
        });
    }
    let mut buf = Vec::with_capacity(64 + 8 * 6 * ms.m_tot());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(basis.dim() as u32).to_le_bytes());
    for &l in basis.domain().lengths() {
        buf.extend_from_slice(&l.to_le_bytes());
    }
    buf.extend_from_slice(&(basis.modes_per_axis() as u32).to_le_bytes());
    buf.extend_from_slice(&ms.time.to_le_bytes());
    for comp in 0..6 {
        for &c in ms.block(comp) {
            buf.extend_from_slice(&c.to_le_bytes());
        }
    }
    let checksum = fnv1a(&buf);
    buf.extend_from_slice(&checksum.to_le_bytes());

    let mut file =
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    file.write_all(&buf)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::Checkpoint(format!(
                "truncated file: needed {} bytes at offset {}, file has {}",
                n,
                self.pos,
                self.data.len()
            )));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Loads a state, validating magic, version, checksum, and that the stored
/// basis descriptor matches `basis` exactly.
pub fn checkpoint_load(path: &Path, basis: &SineBasis) -> Result<ModalState> {
    let mut data = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut data))
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut cur = Cursor {
        data: &data,
        pos: 0,
    };

    let magic = cur.take(8)?;
    if magic != MAGIC {
        return Err(Error::Checkpoint(format!(
            "bad magic {magic:?}, expected {MAGIC:?}"
        )));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "version {version} unsupported, expected {VERSION}"
        )));
    }
    let dim = cur.u32()? as usize;
    if dim == 0 || dim > 3 {
        return Err(Error::Checkpoint(format!("invalid dimension {dim}")));
    }
    let mut lengths = Vec::with_capacity(dim);
    for _ in 0..dim {
        lengths.push(cur.f64()?);
    }
    let modes = cur.u32()? as usize;
    let time = cur.f64()?;

    let stored = basis_descriptor(dim, &lengths, modes);
    let expected = basis_descriptor(
        basis.dim(),
        basis.domain().lengths(),
        basis.modes_per_axis(),
    );
    if stored != expected {
        return Err(Error::Checkpoint(format!(
            "basis mismatch: file has {stored}; current basis is {expected}"
        )));
    }

    let m_tot = modes.pow(dim as u32);
    let mut blocks: [Vec<f64>; 6] = std::array::from_fn(|_| Vec::with_capacity(m_tot));
    for block in blocks.iter_mut() {
        for _ in 0..m_tot {
            block.push(cur.f64()?);
        }
    }
    let body_end = cur.pos;
    let checksum = cur.u64()?;
    if cur.pos != data.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after checksum",
            data.len() - cur.pos
        )));
    }
    if checksum != fnv1a(&data[..body_end]) {
        return Err(Error::Checkpoint("checksum mismatch".into()));
    }

    let mut ms = ModalState::from_blocks(time, blocks)?;
    ms.time = time;
    Ok(ms)
}
