use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// `10·log10(1/MSE)` for signals with peak 1. An exact match yields
/// `f64::INFINITY`.
pub fn psnr(y: &[f64], x: &[f64]) -> Result<f64> {
    if y.len() != x.len() || y.is_empty() {
        return Err(Error::Shape(format!("psnr over {} and {} values", y.len(), x.len())));
    }
    let mse = y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64;
    Ok(psnr_from_mse(mse))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}

pub fn psnr_tensor(y: &Tensor, x: &Tensor) -> Result<f64> {
    if y.shape() != x.shape() {
        return Err(Error::Shape(format!("psnr over {:?} and {:?}", y.shape(), x.shape())));
    }
    psnr(y.values(), x.values())
}

pub fn is_exact(db: f64) -> bool {
    db == f64::INFINITY
}
