//! SNR (Eb/N0, dB) to bit-flip probability for Gray-coded 16-QAM over AWGN.

use std::fmt::Write as _;
use std::path::Path;

use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Reference flip probabilities for Gray 16-QAM on an AWGN channel,
/// `Eb/N0 = 0..=18 dB`.
pub const REFERENCE_16QAM: [(f64, f64); 19] = [
    (0.0, 1.41e-01),
    (1.0, 1.19e-01),
    (2.0, 9.77e-02),
    (3.0, 7.75e-02),
    (4.0, 5.86e-02),
    (5.0, 4.19e-02),
    (6.0, 2.79e-02),
    (7.0, 1.70e-02),
    (8.0, 9.25e-03),
    (9.0, 4.39e-03),
    (10.0, 1.75e-03),
    (11.0, 5.65e-04),
    (12.0, 1.39e-04),
    (13.0, 2.42e-05),
    (14.0, 2.76e-06),
    (15.0, 1.84e-07),
    (16.0, 6.25e-09),
    (17.0, 9.07e-11),
    (18.0, 4.52e-13),
];

/// Gaussian tail `Q(x) = P(N(0,1) > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Exact Gray-coded bit error rate for QPSK or 16-QAM at `Eb/N0 = snr_db`.
pub fn analytic_ber(order: u32, snr_db: f64) -> Result<f64> {
    let g = 10f64.powf(snr_db / 10.0);
    match order {
        4 => Ok(q_function((2.0 * g).sqrt())),
        16 => {
            let x = (0.8 * g).sqrt();
            Ok((3.0 * q_function(x) + 2.0 * q_function(3.0 * x) - q_function(5.0 * x)) / 4.0)
        }
        _ => Err(Error::Contract(format!("no closed form wired for {order}-QAM"))),
    }
}

/// Nearest-neighbour approximation `0.75 · Q(√(0.8 γ))` for 16-QAM.
pub fn approx_ber_16qam(snr_db: f64) -> f64 {
    0.75 * q_function((0.8 * 10f64.powf(snr_db / 10.0)).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnrTable {
    points: Vec<(f64, f64)>,
}

impl Default for SnrTable {
    fn default() -> Self {
        Self::reference()
    }
}

impl SnrTable {
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Format("SNR table needs at least two points".into()));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Format(format!("duplicate SNR {} in table", w[0].0)));
            }
            if w[1].1 >= w[0].1 {
                return Err(Error::Format(format!(
                    "flip probability must strictly decrease with SNR ({} dB -> {}, {} dB -> {})",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        if let Some(&(s, p)) = points.iter().find(|(_, p)| !(*p > 0.0 && *p <= 0.5)) {
            return Err(Error::Format(format!("flip probability {p} at {s} dB outside (0, 0.5]")));
        }
        Ok(Self { points })
    }

    pub fn reference() -> Self {
        Self::new(REFERENCE_16QAM.to_vec()).expect("reference table is valid")
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn range(&self) -> (f64, f64) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }

    /// Exact at tabulated points, log-linear in `p` between them.
    pub fn snr_to_p(&self, snr_db: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        if !(snr_db >= lo && snr_db <= hi) {
            return Err(Error::Contract(format!(
                "SNR {snr_db} dB outside table range [{lo}, {hi}]"
            )));
        }
        let i = self.points.partition_point(|&(s, _)| s <= snr_db);
        if i > 0 && self.points[i - 1].0 == snr_db {
            return Ok(self.points[i - 1].1);
        }
        let (s0, p0) = self.points[i - 1];
        let (s1, p1) = self.points[i];
        let t = (snr_db - s0) / (s1 - s0);
        Ok((p0.ln() + t * (p1.ln() - p0.ln())).exp())
    }

    /// Inverse of `snr_to_p` along the same log-linear interpolant.
    pub fn p_to_snr(&self, p: f64) -> Result<f64> {
        let first = self.points[0];
        let last = self.points[self.points.len() - 1];
        if !(p <= first.1 && p >= last.1) {
            return Err(Error::Contract(format!(
                "flip probability {p} outside table range [{}, {}]",
                last.1, first.1
            )));
        }
        for w in self.points.windows(2) {
            let ((s0, p0), (s1, p1)) = (w[0], w[1]);
            if p <= p0 && p >= p1 {
                let t = (p.ln() - p0.ln()) / (p1.ln() - p0.ln());
                return Ok(s0 + t * (s1 - s0));
            }
        }
        unreachable!("p inside hull")
    }

    /// One `snr_db,p` pair per line; blank lines and `#` comments ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (s, p) = line
                .split_once(',')
                .ok_or_else(|| Error::Format(format!("line {}: expected `snr_db,p`", ln + 1)))?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("line {}: {e}", ln + 1)))
            };
            points.push((parse(s)?, parse(p)?));
        }
        Self::new(points)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for &(s, p) in &self.points {
            writeln!(out, "{s},{p:e}").unwrap();
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}
