//! wasm-bindgen exports for `www/index.html`.
//!
//! Results cross the boundary as flat `f64`/`u8` arrays; the layout of each
//! is documented on the function.

use digisem::dataset::{Generator, SyntheticSpec};
use digisem::digichain::{ad_convert, analytic_ber, awgn, bsc_flip, da_convert, estimate_ber, quantize, Channel, Qam};
use digisem::evalkit::psnr;
use digisem::rng;
use wasm_bindgen::prelude::*;

fn js(e: digisem::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Noisy received points for `n` random symbols.
///
/// Layout: `[i0, q0, i1, q1, ..]` for the received points followed by the
/// `order` ideal points in label order, same interleaving.
#[wasm_bindgen]
pub fn constellation(order: u32, snr_db: f64, n: usize, seed: u64) -> Result<Vec<f64>, JsError> {
    scatter(order, snr_db, n, seed).map_err(js)
}

pub fn scatter(order: u32, snr_db: f64, n: usize, seed: u64) -> digisem::Result<Vec<f64>> {
    use rand::Rng;
    let qam = Qam::new(order)?;
    let mut r = rng::stream(seed, &[1]);
    let labels: Vec<u32> = (0..n).map(|_| r.random_range(0..order)).collect();
    let tx = labels.iter().map(|&l| qam.point(l)).collect::<digisem::Result<Vec<_>>>()?;
    let rx = awgn(&tx, &qam, snr_db, &mut r);
    let mut out = Vec::with_capacity(2 * (n + order as usize));
    for p in rx {
        out.extend([p.re, p.im]);
    }
    for l in 0..order {
        let p = qam.point(l)?;
        out.extend([p.re, p.im]);
    }
    Ok(out)
}

/// BER versus Eb/N0 over `start..=stop` in `step` dB.
///
/// Layout: per grid point `[snr_db, analytic, monte_carlo, ci_low, ci_high]`.
#[wasm_bindgen]
pub fn ber_curve(order: u32, start: f64, stop: f64, step: f64, n_bits: u64, seed: u64) -> Result<Vec<f64>, JsError> {
    curve(order, start, stop, step, n_bits, seed).map_err(js)
}

pub fn curve(order: u32, start: f64, stop: f64, step: f64, n_bits: u64, seed: u64) -> digisem::Result<Vec<f64>> {
    if !(step > 0.0) || stop < start {
        return Err(digisem::Error::config("need step > 0 and stop >= start"));
    }
    let points = ((stop - start) / step + 1e-9).floor() as usize + 1;
    let mut out = Vec::with_capacity(points * 5);
    for i in 0..points {
        let snr = start + i as f64 * step;
        let est = estimate_ber(&Channel::qam_awgn(order, snr)?, n_bits, &mut rng::stream(seed, &[2, i as u64]))?;
        out.extend([snr, analytic_ber(order, snr)?, est.ber, est.ci_low, est.ci_high]);
    }
    Ok(out)
}

/// A synthetic image quantized to `bits` per value and sent over a BSC.
///
/// Layout: `[psnr_db, clean RGBA .., received RGBA ..]` with `side²` pixels
/// per image and RGBA values in `0..=255`. `psnr_db` is `inf` when no bit
/// flipped.
#[wasm_bindgen]
pub fn bit_flip_image(p: f64, bits: u32, side: usize, seed: u64) -> Result<Vec<f64>, JsError> {
    flip_image(p, bits, side, seed).map_err(js)
}

pub fn flip_image(p: f64, bits: u32, side: usize, seed: u64) -> digisem::Result<Vec<f64>> {
    let spec = SyntheticSpec {
        count: 1,
        c: 3,
        h: side,
        w: side,
        generator: Generator::Mix,
        seed,
    };
    let img = spec.generate()?;
    let levels = ((1u32 << bits) - 1) as f64;
    let scaled: Vec<f64> = img.sample(0).iter().map(|v| v * levels).collect();
    let q = quantize(&scaled, bits)?;
    let clean: Vec<f64> = q.to_f64().iter().map(|v| v / levels).collect();
    let rx = bsc_flip(&ad_convert(&q), p, &mut rng::stream(seed, &[3]))?;
    let received: Vec<f64> = da_convert(&rx).iter().map(|v| v / levels).collect();
    let mut out = vec![psnr(&received, &clean)?];
    for image in [&clean, &received] {
        out.extend(rgba(image, side));
    }
    Ok(out)
}

fn rgba(chw: &[f64], side: usize) -> Vec<f64> {
    let plane = side * side;
    let mut out = Vec::with_capacity(plane * 4);
    for i in 0..plane {
        for c in 0..3 {
            out.push((chw[c * plane + i] * 255.0).round());
        }
        out.push(255.0);
    }
    out
}
