//! Binary covariance-matrix checkpoints.
//!
//! Layout, all little-endian, 64-byte header:
//!
//! | offset | size | field                          |
//! |--------|------|--------------------------------|
//! | 0      | 6    | magic `GHFCM1`                 |
//! | 6      | 2    | format version (u16)           |
//! | 8      | 4    | modes M (u32)                  |
//! | 12     | 4    | n_h (u32)                      |
//! | 16     | 4    | n_v (u32)                      |
//! | 20     | 1    | boundary (0 periodic, 1 open)  |
//! | 21     | 1    | form (0 symmetric, 1 plain)    |
//! | 22     | 2    | reserved, zero                 |
//! | 24     | 32   | t, u, mu, v_t (f64)            |
//! | 56     | 8    | creation time, unix seconds    |
//!
//! followed by the full `2M x 2M` matrix in row-major f64.

use std::io::Write;
use std::path::Path;

use ghf::lattice::Boundary;
use ghf::model::{InteractionForm, ModelSpec};
use ghf::CovarianceMatrix;

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 6] = b"GHFCM1";
pub const VERSION: u16 = 1;
pub const HEADER_BYTES: usize = 64;
/// Slack on the largest singular value accepted on read.
pub const PHYSICAL_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CheckpointHeader {
    pub version: u16,
    pub modes: u32,
    pub n_h: u32,
    pub n_v: u32,
    pub boundary: Boundary,
    pub interaction_form: InteractionForm,
    pub t: f64,
    pub u: f64,
    pub mu: f64,
    pub v_t: f64,
    pub created: i64,
}

impl CheckpointHeader {
    pub fn for_spec(spec: &ModelSpec) -> Self {
        let created = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs() as i64)
            .unwrap_or(0);
        Self {
            version: VERSION,
            modes: spec.modes() as u32,
            n_h: spec.n_h as u32,
            n_v: spec.n_v as u32,
            boundary: spec.boundary,
            interaction_form: spec.interaction_form,
            t: spec.t,
            u: spec.u,
            mu: spec.mu,
            v_t: spec.v_t,
            created,
        }
    }

    pub fn spec(&self) -> ModelSpec {
        ModelSpec {
            n_h: self.n_h as usize,
            n_v: self.n_v as usize,
            boundary: self.boundary,
            t: self.t,
            u: self.u,
            mu: self.mu,
            v_t: self.v_t,
            interaction_form: self.interaction_form,
        }
    }

    pub fn to_bytes(&self) -> [u8; HEADER_BYTES] {
        let mut b = [0u8; HEADER_BYTES];
        b[0..6].copy_from_slice(MAGIC);
        b[6..8].copy_from_slice(&self.version.to_le_bytes());
        b[8..12].copy_from_slice(&self.modes.to_le_bytes());
        b[12..16].copy_from_slice(&self.n_h.to_le_bytes());
        b[16..20].copy_from_slice(&self.n_v.to_le_bytes());
        b[20] = match self.boundary {
            Boundary::Periodic => 0,
            Boundary::Open => 1,
        };
        b[21] = match self.interaction_form {
            InteractionForm::Symmetric => 0,
            InteractionForm::Plain => 1,
        };
        for (i, v) in [self.t, self.u, self.mu, self.v_t].into_iter().enumerate() {
            b[24 + 8 * i..32 + 8 * i].copy_from_slice(&v.to_le_bytes());
        }
        b[56..64].copy_from_slice(&self.created.to_le_bytes());
        b
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        if b.len() < HEADER_BYTES {
            return Err(CliError::DimensionMismatch { expected: HEADER_BYTES as u64, found: b.len() as u64 });
        }
        if &b[0..6] != MAGIC {
            return Err(CliError::BadMagic);
        }
        let version = u16::from_le_bytes([b[6], b[7]]);
        if version != VERSION {
            return Err(CliError::BadVersion(version));
        }
        let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(b[o..o + 8].try_into().unwrap());
        let boundary = match b[20] {
            0 => Boundary::Periodic,
            1 => Boundary::Open,
            x => return Err(CliError::Corrupted(format!("unknown boundary code {x}"))),
        };
        let interaction_form = match b[21] {
            0 => InteractionForm::Symmetric,
            1 => InteractionForm::Plain,
            x => return Err(CliError::Corrupted(format!("unknown interaction form code {x}"))),
        };
        Ok(Self {
            version,
            modes: u32_at(8),
            n_h: u32_at(12),
            n_v: u32_at(16),
            boundary,
            interaction_form,
            t: f64_at(24),
            u: f64_at(32),
            mu: f64_at(40),
            v_t: f64_at(48),
            created: i64::from_le_bytes(b[56..64].try_into().unwrap()),
        })
    }

    fn file_bytes(&self) -> u64 {
        let dim = 2 * self.modes as u64;
        HEADER_BYTES as u64 + 8 * dim * dim
    }
}

pub fn checkpoint_write(gamma: &CovarianceMatrix, header: &CheckpointHeader, path: &Path) -> Result<()> {
    if gamma.modes() != header.modes as usize {
        return Err(CliError::DimensionMismatch { expected: header.file_bytes(), found: gamma.modes() as u64 });
    }
    let dim = gamma.dim();
    let mut buf = Vec::with_capacity(HEADER_BYTES + 8 * dim * dim);
    buf.extend_from_slice(&header.to_bytes());
    for i in 0..dim {
        for j in 0..dim {
            buf.extend_from_slice(&gamma[(i, j)].to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn checkpoint_read(path: &Path) -> Result<(CheckpointHeader, CovarianceMatrix)> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let header = CheckpointHeader::from_bytes(&bytes)?;
    if header.modes as u64 != 2 * header.n_h as u64 * header.n_v as u64 {
        return Err(CliError::Corrupted(format!(
            "{} modes do not fit a {}x{} lattice",
            header.modes, header.n_h, header.n_v
        )));
    }
    let expected = header.file_bytes();
    if bytes.len() as u64 != expected {
        return Err(CliError::DimensionMismatch { expected, found: bytes.len() as u64 });
    }
    let dim = 2 * header.modes as usize;
    let payload = &bytes[HEADER_BYTES..];
    let m = ghf::linalg::Matrix::from_fn(dim, dim, |i, j| {
        let o = 8 * (i * dim + j);
        f64::from_le_bytes(payload[o..o + 8].try_into().unwrap())
    });
    if (0..dim).any(|i| (0..dim).any(|j| !m[(i, j)].is_finite())) {
        return Err(CliError::Corrupted("non-finite entry".into()));
    }
    let gamma = CovarianceMatrix::new(m).map_err(|e| CliError::Corrupted(e.to_string()))?;
    let norm = gamma.spectral_norm()?;
    if norm > 1.0 + PHYSICAL_TOL {
        return Err(CliError::Corrupted(format!("largest singular value {norm}")));
    }
    Ok((header, gamma))
}
