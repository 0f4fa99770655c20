//! Versioned binary checkpoint format for trained per-agent Q-networks.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic            4 bytes  "URLQ"
//! version          u32      currently 1
//! layer_count      u32      number of affine layers
//! dims             u32 x (layer_count + 1)   input, hidden.., output
//! num_aps          u32
//! num_subbands     u32
//! connectivity     u8       1 = single, 2 = dual
//! reserved         3 bytes  zero
//! power_count      u32
//! power_dbm        f64 x power_count
//! feature_count    u32      must equal dims[0]
//! offsets          f64 x feature_count
//! scales           f64 x feature_count
//! train_episodes   u64
//! config_hash      32 bytes
//! parameters       f64 x sum(dims[i]*dims[i+1] + dims[i+1])
//!                  per layer: weights row-major [out][in], then biases
//! ```
//!
//! `from_bytes` accepts untrusted input: every read is bounds-checked, all
//! counts are sanity-capped, and non-finite parameters are rejected.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::dqn::{FeatureScaler, QNetwork};
use crate::marl::Connectivity;

pub const MAGIC: [u8; 4] = *b"URLQ";
pub const FORMAT_VERSION: u32 = 1;

const MAX_LAYERS: u64 = 64;
const MAX_DIM: u64 = 1 << 20;
const MAX_PARAMS: u64 = 1 << 26;
const MAX_POWER_LEVELS: u64 = 256;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("bad magic; not a checkpoint file")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated checkpoint")]
    Truncated,
    #[error("{0} trailing bytes after checkpoint payload")]
    TrailingBytes(usize),
    #[error("invalid checkpoint field: {0}")]
    Invalid(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Identifies the discrete action space a policy was trained for.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSpaceDesc {
    pub num_aps: u32,
    pub num_subbands: u32,
    pub connectivity: Connectivity,
    pub power_levels_dbm: Vec<f64>,
}

/// One agent's trained policy plus everything needed to use it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub action_space: ActionSpaceDesc,
    pub scaler: FeatureScaler,
    pub train_episodes: u64,
    pub config_hash: [u8; 32],
    pub network: QNetwork,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let dims = self.network.layer_dims();
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&((dims.len() - 1) as u32).to_le_bytes());
        for d in &dims {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.action_space.num_aps.to_le_bytes());
        out.extend_from_slice(&self.action_space.num_subbands.to_le_bytes());
        out.push(match self.action_space.connectivity {
            Connectivity::Single => 1,
            Connectivity::Dual => 2,
        });
        out.extend_from_slice(&[0u8; 3]);
        out.extend_from_slice(&(self.action_space.power_levels_dbm.len() as u32).to_le_bytes());
        for p in &self.action_space.power_levels_dbm {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out.extend_from_slice(&(self.scaler.dim() as u32).to_le_bytes());
        for v in &self.scaler.offsets {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in &self.scaler.scales {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.train_episodes.to_le_bytes());
        out.extend_from_slice(&self.config_hash);
        for p in self.network.flat_params() {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(CheckpointError::UnsupportedVersion(version));
        }
        let layer_count = r.u32()? as u64;
        if layer_count == 0 || layer_count > MAX_LAYERS {
            return Err(CheckpointError::Invalid(format!("layer count {layer_count}")));
        }
        let mut dims = Vec::with_capacity(layer_count as usize + 1);
        for _ in 0..=layer_count {
            let d = r.u32()? as u64;
            if d == 0 || d > MAX_DIM {
                return Err(CheckpointError::Invalid(format!("layer dimension {d}")));
            }
            dims.push(d as usize);
        }
        let num_aps = r.u32()?;
        let num_subbands = r.u32()?;
        if num_aps == 0 || num_subbands == 0 {
            return Err(CheckpointError::Invalid("empty action space".into()));
        }
        let connectivity = match r.u8()? {
            1 => Connectivity::Single,
            2 => Connectivity::Dual,
            c => return Err(CheckpointError::Invalid(format!("connectivity tag {c}"))),
        };
        r.take(3)?;
        let power_count = r.u32()? as u64;
        if power_count == 0 || power_count > MAX_POWER_LEVELS {
            return Err(CheckpointError::Invalid(format!("power level count {power_count}")));
        }
        let power_levels_dbm = r.f64s(power_count as usize, "power levels")?;
        let feature_count = r.u32()? as usize;
        if feature_count != dims[0] {
            return Err(CheckpointError::Invalid(format!(
                "feature count {feature_count} does not match input dimension {}",
                dims[0]
            )));
        }
        let offsets = r.f64s(feature_count, "scaler offsets")?;
        let scales = r.f64s(feature_count, "scaler scales")?;
        if scales.iter().any(|&s| s <= 0.0) {
            return Err(CheckpointError::Invalid("non-positive scaler scale".into()));
        }
        let train_episodes = r.u64()?;
        let mut config_hash = [0u8; 32];
        config_hash.copy_from_slice(r.take(32)?);

        let mut param_count: u64 = 0;
        for w in dims.windows(2) {
            param_count += (w[0] as u64) * (w[1] as u64) + w[1] as u64;
            if param_count > MAX_PARAMS {
                return Err(CheckpointError::Invalid("parameter block too large".into()));
            }
        }
        let params = r.f64s(param_count as usize, "network parameters")?;
        if r.pos != bytes.len() {
            return Err(CheckpointError::TrailingBytes(bytes.len() - r.pos));
        }

        let mut network = QNetwork::zeros(&dims);
        network.set_flat_params(&params);
        Ok(Self {
            action_space: ActionSpaceDesc { num_aps, num_subbands, connectivity, power_levels_dbm },
            scaler: FeatureScaler { offsets, scales },
            train_episodes,
            config_hash,
            network,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.pos.checked_add(n).is_none_or(|end| end > self.bytes.len()) {
            return Err(CheckpointError::Truncated);
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize, what: &'static str) -> Result<Vec<f64>, CheckpointError> {
        let raw = self.take(n.checked_mul(8).ok_or(CheckpointError::Truncated)?)?;
        let mut out = Vec::with_capacity(n);
        for chunk in raw.chunks_exact(8) {
            let v = f64::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(CheckpointError::NonFinite(what));
            }
            out.push(v);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedSplitter;

    fn sample() -> Checkpoint {
        let mut rng = SeedSplitter::new(42).stream("ckpt", &[]);
        Checkpoint {
            action_space: ActionSpaceDesc {
                num_aps: 4,
                num_subbands: 2,
                connectivity: Connectivity::Dual,
                power_levels_dbm: vec![-100.0, 20.0, 25.0, 30.0],
            },
            scaler: FeatureScaler { offsets: vec![-75.0; 10], scales: vec![35.0; 10] },
            train_episodes: 6000,
            config_hash: [7u8; 32],
            network: QNetwork::glorot_uniform(&[10, 83, 41, 20, 80], &mut rng),
        }
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let ckpt = sample();
        let bytes = ckpt.to_bytes();
        let loaded = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(ckpt, loaded);
        // Forward passes agree bitwise.
        let obs = vec![0.125; 10];
        assert_eq!(ckpt.network.forward(&obs), loaded.network.forward(&obs));
        assert_eq!(bytes, loaded.to_bytes());
    }

    #[test]
    fn rejects_bad_magic() {
        let mut bytes = sample().to_bytes();
        bytes[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(CheckpointError::BadMagic)));
    }

    #[test]
    fn rejects_wrong_version() {
        let mut bytes = sample().to_bytes();
        bytes[4..8].copy_from_slice(&9u32.to_le_bytes());
        assert!(matches!(
            Checkpoint::from_bytes(&bytes),
            Err(CheckpointError::UnsupportedVersion(9))
        ));
    }

    #[test]
    fn rejects_truncation_anywhere() {
        let bytes = sample().to_bytes();
        for cut in [3, 11, 40, 100, bytes.len() - 1] {
            assert!(
                matches!(Checkpoint::from_bytes(&bytes[..cut]), Err(CheckpointError::Truncated)),
                "cut at {cut}"
            );
        }
    }

    #[test]
    fn rejects_trailing_bytes() {
        let mut bytes = sample().to_bytes();
        bytes.push(0);
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(CheckpointError::TrailingBytes(1))));
    }

    #[test]
    fn rejects_non_finite_parameters() {
        let ckpt = sample();
        let mut bytes = ckpt.to_bytes();
        let tail = bytes.len() - 8;
        bytes[tail..].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(
            Checkpoint::from_bytes(&bytes),
            Err(CheckpointError::NonFinite("network parameters"))
        ));
    }

    #[test]
    fn save_load_via_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("agent_0.qnet");
        let ckpt = sample();
        ckpt.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), ckpt);
    }
}
