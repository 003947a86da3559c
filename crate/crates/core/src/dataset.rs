//! Synthetic structured images and their flat binary file format.
//!
//! File layout, little endian: `"DSDS"`, `u32` version, `u64` count,
//! `u32` c, `u32` h, `u32` w, then `count·c·h·w` `f64` values in
//! sample-major, channel-major, row-major order.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::rng;

pub const MAGIC: &[u8; 4] = b"DSDS";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 4 + 4 + 8 + 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(c: usize, h: usize, w: usize, values: Vec<f64>) -> Result<Self> {
        let dim = c * h * w;
        if dim == 0 {
            return Err(Error::Contract(format!("dataset geometry {c}x{h}x{w} is empty")));
        }
        if values.len() % dim != 0 {
            return Err(Error::Contract(format!(
                "{} values do not split into samples of {dim}",
                values.len()
            )));
        }
        Ok(Self { c, h, w, values })
    }

    pub fn dim(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.values[i * d..(i + 1) * d]
    }

    /// Stacks the listed samples into a `[k, dim]` batch.
    pub fn batch(&self, indices: &[usize]) -> Tensor {
        let mut v = Vec::with_capacity(indices.len() * self.dim());
        for &i in indices {
            v.extend_from_slice(self.sample(i));
        }
        Tensor::matrix(indices.len(), self.dim(), v).expect("batch shape")
    }

    pub fn all(&self) -> Tensor {
        Tensor::matrix(self.len(), self.dim(), self.values.clone()).expect("dataset shape")
    }

    /// First `k` samples and the rest.
    pub fn split(&self, k: usize) -> (Dataset, Dataset) {
        let cut = k.min(self.len()) * self.dim();
        (
            Dataset::new(self.c, self.h, self.w, self.values[..cut].to_vec()).unwrap(),
            Dataset::new(self.c, self.h, self.w, self.values[cut..].to_vec()).unwrap(),
        )
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.values.len() * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        for d in [self.c, self.h, self.w] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(Error::Format("dataset: bad magic or short header".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let version = u32_at(4);
        if version != VERSION {
            return Err(Error::Format(format!("dataset: unsupported version {version}")));
        }
        let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let (c, h, w) = (u32_at(16) as usize, u32_at(20) as usize, u32_at(24) as usize);
        let expected = count
            .checked_mul(c * h * w)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| Error::Format("dataset: size overflow".into()))?;
        if bytes.len() - HEADER_LEN != expected {
            return Err(Error::Format(format!(
                "dataset: header promises {expected} payload bytes, file has {}",
                bytes.len() - HEADER_LEN
            )));
        }
        let values = bytes[HEADER_LEN..]
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Dataset::new(c, h, w, values).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    GaussianBlobs,
    GradientPatterns,
    Checkerboards,
    /// Each sample picks one of the three families uniformly.
    Mix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub count: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub generator: Generator,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn toy(count: usize, seed: u64) -> Self {
        Self {
            count,
            c: 3,
            h: 8,
            w: 8,
            generator: Generator::Mix,
            seed,
        }
    }

    pub fn generate(&self) -> Result<Dataset> {
        let mut r = rng::stream(self.seed, &[rng::tag::DATA]);
        let mut values = Vec::with_capacity(self.count * self.c * self.h * self.w);
        for _ in 0..self.count {
            let kind = match self.generator {
                Generator::Mix => match r.random_range(0..3) {
                    0 => Generator::GaussianBlobs,
                    1 => Generator::GradientPatterns,
                    _ => Generator::Checkerboards,
                },
                g => g,
            };
            let img = match kind {
                Generator::GaussianBlobs => blobs(self.c, self.h, self.w, &mut r),
                Generator::GradientPatterns => gradient(self.c, self.h, self.w, &mut r),
                _ => checkerboard(self.c, self.h, self.w, &mut r),
            };
            values.extend(img.into_iter().map(|v| v.clamp(0.0, 1.0)));
        }
        Dataset::new(self.c, self.h, self.w, values)
    }
}

fn colour<R: Rng>(c: usize, r: &mut R) -> Vec<f64> {
    (0..c).map(|_| r.random_range(0.0..1.0)).collect()
}

fn blobs<R: Rng>(c: usize, h: usize, w: usize, r: &mut R) -> Vec<f64> {
    let background = colour(c, r);
    let mut img: Vec<f64> = (0..c).flat_map(|ch| std::iter::repeat_n(background[ch] * 0.3, h * w)).collect();
    let count = r.random_range(1..=3);
    for _ in 0..count {
        let cy = r.random_range(0.0..h as f64);
        let cx = r.random_range(0.0..w as f64);
        let sigma = r.random_range(0.8..(h.max(w) as f64 / 2.5).max(1.0));
        let col = colour(c, r);
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    let d2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
                    img[(ch * h + y) * w + x] += col[ch] * (-d2 / (2.0 * sigma * sigma)).exp();
                }
            }
        }
    }
    img
}

fn gradient<R: Rng>(c: usize, h: usize, w: usize, r: &mut R) -> Vec<f64> {
    let angle = r.random_range(0.0..std::f64::consts::TAU);
    let (dy, dx) = angle.sin_cos();
    let start = colour(c, r);
    let end = colour(c, r);
    let span = (h.max(w) as f64 - 1.0).max(1.0);
    let mut img = Vec::with_capacity(c * h * w);
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                let yc = y as f64 - (h as f64 - 1.0) / 2.0;
                let xc = x as f64 - (w as f64 - 1.0) / 2.0;
                let t = ((yc * dy + xc * dx) / span + 0.5).clamp(0.0, 1.0);
                img.push(start[ch] + (end[ch] - start[ch]) * t);
            }
        }
    }
    img
}

fn checkerboard<R: Rng>(c: usize, h: usize, w: usize, r: &mut R) -> Vec<f64> {
    let cell = r.random_range(1..=(h.min(w) / 2).max(1));
    let oy = r.random_range(0..cell);
    let ox = r.random_range(0..cell);
    let a = colour(c, r);
    let b = colour(c, r);
    let mut img = Vec::with_capacity(c * h * w);
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                let parity = ((y + oy) / cell + (x + ox) / cell) % 2;
                img.push(if parity == 0 { a[ch] } else { b[ch] });
            }
        }
    }
    img
}
