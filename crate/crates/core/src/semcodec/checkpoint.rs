//! Versioned binary checkpoints.
//!
//! Layout, all integers little endian:
//! `"DSCK"`, `u32` version, `u64`-prefixed TOML model config, `u64` seed,
//! `u64`-prefixed variant name, `u32` tensor count, then per tensor a
//! `u64`-prefixed name, `u32` rank, `u64` dims and `f64` values.

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::config::ModelConfig;
use super::layers::ParamSet;
use super::nets::Networks;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"DSCK";
pub const VERSION: u32 = 1;

const PREFIXES: [&str; 3] = ["enc.", "dec.", "irs."];

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    pub variant: String,
    pub networks: Networks,
}

impl Checkpoint {
    pub fn new(networks: Networks, seed: u64, variant: impl Into<String>) -> Self {
        Self {
            seed,
            variant: variant.into(),
            networks,
        }
    }

    fn sets(&self) -> Vec<&ParamSet> {
        let n = &self.networks;
        let mut v = vec![&n.encoder.params, &n.decoder.params];
        if let Some(r) = &n.restorer {
            v.push(&r.params);
        }
        v
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let cfg = toml::to_string(&self.networks.config).map_err(|e| Error::Format(e.to_string()))?;
        put_str(&mut out, &cfg);
        out.extend_from_slice(&self.seed.to_le_bytes());
        put_str(&mut out, &self.variant);
        let sets = self.sets();
        let count: usize = sets.iter().map(|s| s.len()).sum();
        out.extend_from_slice(&(count as u32).to_le_bytes());
        for set in sets {
            for (name, t) in set.names.iter().zip(&set.tensors) {
                put_str(&mut out, name);
                out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
                for &d in t.shape() {
                    out.extend_from_slice(&(d as u64).to_le_bytes());
                }
                for v in t.values() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("checkpoint: bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("checkpoint: unsupported version {version}")));
        }
        let cfg_text = r.string()?;
        let config: ModelConfig = toml::from_str(&cfg_text).map_err(|e| Error::Format(format!("checkpoint config: {e}")))?;
        config.validate()?;
        let seed = r.u64()?;
        let variant = r.string()?;
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let name = r.string()?;
            let rank = r.u32()? as usize;
            if rank > 4 {
                return Err(Error::Format(format!("checkpoint: tensor {name} has rank {rank}")));
            }
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u64()? as usize);
            }
            let n: usize = shape.iter().product();
            let mut values = Vec::with_capacity(n);
            for _ in 0..n {
                values.push(f64::from_le_bytes(r.take(8)?.try_into().unwrap()));
            }
            tensors.push((name, Tensor::new(shape, values)?));
        }
        if r.pos != bytes.len() {
            return Err(Error::Format("checkpoint: trailing bytes".into()));
        }
        let with_restorer = tensors.iter().any(|(n, _)| n.starts_with(PREFIXES[2]));
        let mut networks = Networks::new(&config, seed, with_restorer)?;
        {
            let mut sets = vec![&mut networks.encoder.params, &mut networks.decoder.params];
            if let Some(res) = networks.restorer.as_mut() {
                sets.push(&mut res.params);
            }
            let expected: usize = sets.iter().map(|s| s.len()).sum();
            if expected != count {
                return Err(Error::Format(format!(
                    "checkpoint: {count} tensors, architecture needs {expected}"
                )));
            }
            let mut it = tensors.into_iter();
            for set in sets {
                for (name, slot) in set.names.iter().zip(set.tensors.iter_mut()) {
                    let (got, t) = it.next().expect("counted");
                    if &got != name || t.shape() != slot.shape() {
                        return Err(Error::Format(format!(
                            "checkpoint: expected {name} {:?}, found {got} {:?}",
                            slot.shape(),
                            t.shape()
                        )));
                    }
                    if !t.all_finite() {
                        return Err(Error::NonFinite(format!("checkpoint tensor {name}")));
                    }
                    *slot = t;
                }
            }
        }
        Ok(Self {
            seed,
            variant,
            networks,
        })
    }

    /// Writes to a sibling temporary file and renames it over `path`.
    pub fn save(&self, path: &Path) -> Result<String> {
        let bytes = self.to_bytes()?;
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let tmp = std::path::PathBuf::from(tmp);
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(sha256_hex(&bytes))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn hash(&self) -> Result<String> {
        Ok(sha256_hex(&self.to_bytes()?))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u64).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format("checkpoint: truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u64()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Format("checkpoint: invalid utf-8".into()))
    }
}
