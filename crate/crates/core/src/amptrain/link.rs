//! Forward paths shared by training and deployment.

use rand::Rng;

use crate::autodiff::{Graph, Tensor, Var};
use crate::digichain::{transmit_features, Channel};
use crate::error::{Error, Result};
use crate::semcodec::Networks;

/// Per-entry keep mask: entry `j` is 0 iff `u_j < ratio`.
pub fn sample_mask<R: Rng + ?Sized>(n: usize, ratio: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::Contract(format!("mask ratio {ratio} outside [0, 1)")));
    }
    Ok((0..n)
        .map(|_| if rng.random::<f64>() < ratio { 0.0 } else { 1.0 })
        .collect())
}

/// Clean quantized features and the demodulated features after `channel`.
#[derive(Debug, Clone, PartialEq)]
pub struct Received {
    pub quantized: Tensor,
    pub demodulated: Tensor,
}

/// Quantizes each row of `features`, sends it over `channel` and converts
/// the received bits back.
pub fn send_digital<R: Rng + ?Sized>(features: &Tensor, bits: u32, channel: &Channel, rng: &mut R) -> Result<Received> {
    let (rows, cols) = (features.rows(), features.cols());
    let mut q = Vec::with_capacity(rows * cols);
    let mut z = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let (qr, zr) = transmit_features(features.row(r), bits, channel, rng)?;
        q.extend(qr);
        z.extend(zr);
    }
    Ok(Received {
        quantized: Tensor::matrix(rows, cols, q)?,
        demodulated: Tensor::matrix(rows, cols, z)?,
    })
}

/// Which receiver sets take gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReceiverGrad {
    pub restorer: bool,
    pub decoder: bool,
}

impl ReceiverGrad {
    pub const FROZEN: ReceiverGrad = ReceiverGrad {
        restorer: false,
        decoder: false,
    };
}

/// Receiver on a graph: optional restorer, then the decoder.
/// Returns `(restored features, reconstruction)`.
pub fn receive(g: &mut Graph, nets: &Networks, z: Var, use_restorer: bool, grad: ReceiverGrad) -> Result<(Option<Var>, Var)> {
    let restored = match (&nets.restorer, use_restorer) {
        (Some(r), true) => Some(r.forward(g, z, grad.restorer)?),
        (None, true) => return Err(Error::Structural("restorer requested but not attached".into())),
        _ => None,
    };
    let y = nets.decoder.forward(g, restored.unwrap_or(z), grad.decoder)?;
    Ok((restored, y))
}

/// How test samples reach the receiver.
#[derive(Debug, Clone, PartialEq)]
pub enum EvalPath {
    /// Continuous features straight into the decoder.
    Analog,
    Digital(Channel),
}

/// Deployment forward pass; digital paths use the restorer when attached.
pub fn reconstruct<R: Rng + ?Sized>(nets: &Networks, x: &Tensor, path: &EvalPath, rng: &mut R) -> Result<Tensor> {
    let features = nets.encoder.encode(x)?;
    let mut g = Graph::new();
    let y = match path {
        EvalPath::Analog => {
            let f = g.constant(features);
            nets.decoder.forward(&mut g, f, false)?
        }
        EvalPath::Digital(ch) => {
            let rx = send_digital(&features, nets.config.bits, ch, rng)?;
            let z = g.constant(rx.demodulated);
            receive(&mut g, nets, z, nets.restorer.is_some(), ReceiverGrad::FROZEN)?.1
        }
    };
    Ok(g.value(y).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::semcodec::ModelConfig;

    #[test]
    fn zero_ratio_keeps_everything() {
        let m = sample_mask(1000, 0.0, &mut rng::stream(1, &[])).unwrap();
        assert!(m.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn mask_is_seeded() {
        let a = sample_mask(500, 0.3, &mut rng::stream(2, &[])).unwrap();
        let b = sample_mask(500, 0.3, &mut rng::stream(2, &[])).unwrap();
        assert_eq!(a, b);
        assert!(sample_mask(5, 1.0, &mut rng::stream(2, &[])).is_err());
    }

    #[test]
    fn noiseless_digital_path_sees_quantized_features() {
        let cfg = ModelConfig::for_input(24, 4);
        let nets = Networks::new(&cfg, 1, false).unwrap();
        let x = Tensor::full(&[2, 24], 0.3);
        let f = nets.encoder.encode(&x).unwrap();
        let rx = send_digital(&f, 4, &Channel::Noiseless, &mut rng::stream(0, &[])).unwrap();
        assert_eq!(rx.quantized, rx.demodulated);
        for (q, v) in rx.quantized.values().iter().zip(f.values()) {
            assert!((q - v).abs() <= 0.5);
        }
    }

    #[test]
    fn restorer_is_required_when_requested() {
        let cfg = ModelConfig::for_input(24, 4);
        let nets = Networks::new(&cfg, 1, false).unwrap();
        let mut g = Graph::new();
        let z = g.constant(Tensor::zeros(&[1, 4]));
        assert!(matches!(receive(&mut g, &nets, z, true, ReceiverGrad::FROZEN), Err(Error::Structural(_))));
    }
}
