//! Parameter storage and the dense building blocks.
//!
//! Layers are index descriptors into a [`ParamSet`]; a forward pass binds the
//! set onto a graph once and hands the resulting variables to each layer.

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::autodiff::{Graph, ParamKey, Tensor, Var};

/// Ordered, named parameter tensors of one network.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet {
    pub names: Vec<String>,
    pub tensors: Vec<Tensor>,
}

impl ParamSet {
    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn numel(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Binds every tensor onto `g`; trainable tensors report gradients under
    /// `set_id`, frozen ones enter as constants.
    pub fn bind(&self, g: &mut Graph, set_id: u32, trainable: bool) -> Vec<Var> {
        self.tensors
            .iter()
            .enumerate()
            .map(|(index, t)| {
                if trainable {
                    g.param(t.clone(), ParamKey { set: set_id, index })
                } else {
                    g.constant(t.clone())
                }
            })
            .collect()
    }

    /// SHA-256 over names, shapes and the exact bit patterns of all values.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (name, t) in self.names.iter().zip(&self.tensors) {
            h.update((name.len() as u64).to_le_bytes());
            h.update(name.as_bytes());
            h.update((t.shape().len() as u64).to_le_bytes());
            for &d in t.shape() {
                h.update((d as u64).to_le_bytes());
            }
            for v in t.values() {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// Sum over every entry of `|θ|`, cheap fingerprint for logging.
    pub fn l1_norm(&self) -> f64 {
        self.tensors.iter().flat_map(|t| t.values()).map(|v| v.abs()).sum()
    }
}

/// Allocates parameters with uniform fan-in initialisation.
pub struct ParamBuilder<'r, R: Rng> {
    set: ParamSet,
    rng: &'r mut R,
}

impl<'r, R: Rng> ParamBuilder<'r, R> {
    pub fn new(rng: &'r mut R) -> Self {
        Self {
            set: ParamSet::default(),
            rng,
        }
    }

    fn push(&mut self, name: String, t: Tensor) -> usize {
        self.set.names.push(name);
        self.set.tensors.push(t);
        self.set.tensors.len() - 1
    }

    fn uniform(&mut self, shape: &[usize], bound: f64) -> Tensor {
        let n: usize = shape.iter().product();
        let values = (0..n).map(|_| self.rng.random_range(-bound..bound)).collect();
        Tensor::new(shape.to_vec(), values).expect("init shape")
    }

    pub fn linear(&mut self, name: &str, input: usize, output: usize, bias: bool) -> Linear {
        let bound = 1.0 / (input as f64).sqrt();
        let wt = self.uniform(&[output, input], bound);
        let w = self.push(format!("{name}.weight"), wt);
        let b = bias.then(|| {
            let bt = self.uniform(&[output], bound);
            self.push(format!("{name}.bias"), bt)
        });
        Linear { w, b, input, output }
    }

    pub fn zero_linear(&mut self, name: &str, input: usize, output: usize) -> Linear {
        let w = self.push(format!("{name}.weight"), Tensor::zeros(&[output, input]));
        let b = Some(self.push(format!("{name}.bias"), Tensor::zeros(&[output])));
        Linear { w, b, input, output }
    }

    pub fn residual(&mut self, name: &str, input: usize, output: usize) -> ResidualBlock {
        let first = self.linear(&format!("{name}.f1a"), input, output, true);
        let second = self.linear(&format!("{name}.f1b"), output, output, true);
        let shortcut = (input != output).then(|| self.linear(&format!("{name}.shortcut"), input, output, false));
        ResidualBlock {
            first,
            second,
            shortcut,
        }
    }

    pub fn se_gate(&mut self, name: &str, channels: usize, reduction: usize) -> SeGate {
        let squeezed = (channels / reduction).max(1);
        SeGate {
            channels,
            squeeze: self.linear(&format!("{name}.fc1"), channels, squeezed, true),
            excite: self.linear(&format!("{name}.fc2"), squeezed, channels, true),
        }
    }

    pub fn finish(self) -> ParamSet {
        self.set
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: usize,
    pub b: Option<usize>,
    pub input: usize,
    pub output: usize,
}

impl Linear {
    pub fn forward(&self, g: &mut Graph, p: &[Var], x: Var) -> Var {
        g.affine(x, p[self.w], self.b.map(|b| p[b]))
    }
}

/// `s' = F1(s) + W_s s` with `F1` two affine + GELU stages; `W_s` is the
/// identity when the widths agree.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlock {
    pub first: Linear,
    pub second: Linear,
    pub shortcut: Option<Linear>,
}

impl ResidualBlock {
    pub fn input(&self) -> usize {
        self.first.input
    }

    pub fn output(&self) -> usize {
        self.second.output
    }

    pub fn forward(&self, g: &mut Graph, p: &[Var], s: Var) -> Var {
        let h = self.first.forward(g, p, s);
        let h = g.gelu(h);
        let h = self.second.forward(g, p, h);
        let h = g.gelu(h);
        let skip = match &self.shortcut {
            Some(ws) => ws.forward(g, p, s),
            None => s,
        };
        g.add(h, skip)
    }
}

/// Channel attention: group-mean squeeze, two affine maps with a GELU
/// between, sigmoid gate per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct SeGate {
    pub channels: usize,
    pub squeeze: Linear,
    pub excite: Linear,
}

impl SeGate {
    pub fn gates(&self, g: &mut Graph, p: &[Var], s: Var) -> Var {
        let pooled = g.group_mean(s, self.channels);
        let h = self.squeeze.forward(g, p, pooled);
        let h = g.gelu(h);
        let h = self.excite.forward(g, p, h);
        g.sigmoid(h)
    }

    pub fn forward(&self, g: &mut Graph, p: &[Var], s: Var) -> Var {
        let gate = self.gates(g, p, s);
        g.group_scale(s, gate, self.channels)
    }
}
