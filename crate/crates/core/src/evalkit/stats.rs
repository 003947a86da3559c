use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTest {
    pub mean_diff: f64,
    pub t: f64,
    pub df: f64,
    /// One-sided p-value for `mean(a - b) > 0`.
    pub p_value: f64,
}

/// One-sided paired t-test of `a > b`.
pub fn paired_t_greater(a: &[f64], b: &[f64]) -> Result<PairedTest> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::Contract(format!(
            "paired test needs two equal samples of size >= 2, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let df = n - 1.0;
    if var == 0.0 {
        let p_value = if mean > 0.0 { 0.0 } else { 1.0 };
        let t = if mean > 0.0 { f64::INFINITY } else if mean < 0.0 { f64::NEG_INFINITY } else { 0.0 };
        return Ok(PairedTest { mean_diff: mean, t, df, p_value });
    }
    let t = mean / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Contract(e.to_string()))?;
    Ok(PairedTest {
        mean_diff: mean,
        t,
        df,
        p_value: 1.0 - dist.cdf(t),
    })
}
