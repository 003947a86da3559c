use rand::Rng;

use super::config::ModelConfig;
use super::layers::{Linear, ParamBuilder, ParamSet, ResidualBlock, SeGate};
use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{Error, Result};

pub const ENCODER_SET: u32 = 0;
pub const DECODER_SET: u32 = 1;
pub const RESTORER_SET: u32 = 2;

fn check_width(what: &str, t: &Tensor, expected: usize) -> Result<()> {
    if t.shape().len() != 2 || t.cols() != expected {
        return Err(Error::Contract(format!(
            "{what} expects [batch, {expected}], got {:?}",
            t.shape()
        )));
    }
    Ok(())
}

/// Residual trunk with SE gates after the leading blocks.
#[derive(Debug, Clone, PartialEq)]
struct Trunk {
    blocks: Vec<ResidualBlock>,
    gates: Vec<SeGate>,
}

impl Trunk {
    fn build<R: Rng>(b: &mut ParamBuilder<'_, R>, prefix: &str, cfg: &ModelConfig, input: usize, blocks: usize) -> Self {
        let mut out = Trunk {
            blocks: Vec::new(),
            gates: Vec::new(),
        };
        let mut width = input;
        for i in 0..blocks {
            out.blocks.push(b.residual(&format!("{prefix}.rcb{i}"), width, cfg.hidden));
            width = cfg.hidden;
            if i < cfg.se_blocks {
                out.gates.push(b.se_gate(&format!("{prefix}.se{i}"), cfg.se_channels, cfg.se_reduction));
            }
        }
        out
    }

    fn forward(&self, g: &mut Graph, p: &[Var], mut h: Var) -> Var {
        for (i, block) in self.blocks.iter().enumerate() {
            h = block.forward(g, p, h);
            if let Some(se) = self.gates.get(i) {
                h = se.forward(g, p, h);
            }
        }
        h
    }
}

/// `x̃ = (2^b - 1) · sigmoid(head(trunk(x)))`
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub params: ParamSet,
    trunk: Trunk,
    head: Linear,
    input_dim: usize,
    levels: f64,
}

impl Encoder {
    pub fn new<R: Rng>(cfg: &ModelConfig, rng: &mut R) -> Self {
        let mut b = ParamBuilder::new(rng);
        let trunk = Trunk::build(&mut b, "enc", cfg, cfg.input_dim, cfg.encoder_blocks);
        let head = b.linear("enc.head", cfg.hidden, cfg.feature_dim, true);
        Self {
            params: b.finish(),
            trunk,
            head,
            input_dim: cfg.input_dim,
            levels: cfg.levels(),
        }
    }

    pub fn forward(&self, g: &mut Graph, x: Var, trainable: bool) -> Result<Var> {
        let p = self.params.bind(g, ENCODER_SET, trainable);
        self.forward_bound(g, &p, x)
    }

    /// Forward pass with parameters already bound on `g`.
    pub fn forward_bound(&self, g: &mut Graph, p: &[Var], x: Var) -> Result<Var> {
        check_width("encoder", g.value(x), self.input_dim)?;
        let h = self.trunk.forward(g, p, x);
        let h = self.head.forward(g, p, h);
        let s = g.sigmoid(h);
        Ok(g.scale(s, self.levels))
    }

    pub fn encode(&self, x: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let xi = g.constant(x.clone());
        let y = self.forward(&mut g, xi, false)?;
        Ok(g.value(y).clone())
    }
}

/// `y = sigmoid(head(trunk(f / (2^b - 1))))`
#[derive(Debug, Clone, PartialEq)]
pub struct Decoder {
    pub params: ParamSet,
    trunk: Trunk,
    head: Linear,
    feature_dim: usize,
    levels: f64,
}

impl Decoder {
    pub fn new<R: Rng>(cfg: &ModelConfig, rng: &mut R) -> Self {
        let mut b = ParamBuilder::new(rng);
        let trunk = Trunk::build(&mut b, "dec", cfg, cfg.feature_dim, cfg.decoder_blocks);
        let head = b.linear("dec.head", cfg.hidden, cfg.input_dim, true);
        Self {
            params: b.finish(),
            trunk,
            head,
            feature_dim: cfg.feature_dim,
            levels: cfg.levels(),
        }
    }

    pub fn forward(&self, g: &mut Graph, f: Var, trainable: bool) -> Result<Var> {
        let p = self.params.bind(g, DECODER_SET, trainable);
        self.forward_bound(g, &p, f)
    }

    pub fn forward_bound(&self, g: &mut Graph, p: &[Var], f: Var) -> Result<Var> {
        check_width("decoder", g.value(f), self.feature_dim)?;
        let h = g.scale(f, 1.0 / self.levels);
        let h = self.trunk.forward(g, p, h);
        let h = self.head.forward(g, p, h);
        Ok(g.sigmoid(h))
    }

    pub fn decode(&self, f: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let fi = g.constant(f.clone());
        let y = self.forward(&mut g, fi, false)?;
        Ok(g.value(y).clone())
    }
}

/// U-shaped restorer over the feature vector.
///
/// The contracting path narrows through `restorer_widths`, a bottleneck
/// block keeps the narrowest width, and the expanding path mirrors it with
/// additive skips from the matching contracting stage. Output is the input
/// plus a learned correction, all in symbol-value units.
#[derive(Debug, Clone, PartialEq)]
pub struct Restorer {
    pub params: ParamSet,
    down: Vec<ResidualBlock>,
    bottleneck: ResidualBlock,
    up: Vec<ResidualBlock>,
    head: Linear,
    feature_dim: usize,
    levels: f64,
}

impl Restorer {
    pub fn new<R: Rng>(cfg: &ModelConfig, rng: &mut R) -> Self {
        let mut b = ParamBuilder::new(rng);
        let widths = &cfg.restorer_widths;
        let n = cfg.feature_dim;
        let mut down = Vec::new();
        let mut width = n;
        for (i, &w) in widths.iter().enumerate() {
            down.push(b.residual(&format!("irs.down{i}"), width, w));
            width = w;
        }
        let bottleneck = b.residual("irs.mid", width, width);
        let mut up = Vec::new();
        for i in (0..widths.len()).rev() {
            let target = if i == 0 { n } else { widths[i - 1] };
            up.push(b.residual(&format!("irs.up{}", widths.len() - 1 - i), width, target));
            width = target;
        }
        let head = if cfg.restorer_zero_head {
            b.zero_linear("irs.head", n, n)
        } else {
            b.linear("irs.head", n, n, true)
        };
        Self {
            params: b.finish(),
            down,
            bottleneck,
            up,
            head,
            feature_dim: n,
            levels: cfg.levels(),
        }
    }

    pub fn block_count(&self) -> usize {
        self.down.len() + 1 + self.up.len()
    }

    pub fn forward(&self, g: &mut Graph, z: Var, trainable: bool) -> Result<Var> {
        self.forward_with(g, z, trainable, true)
    }

    /// `skips = false` drops the contracting-to-expanding and input skips.
    pub fn forward_with(&self, g: &mut Graph, z: Var, trainable: bool, skips: bool) -> Result<Var> {
        let p = self.params.bind(g, RESTORER_SET, trainable);
        self.forward_bound(g, &p, z, skips)
    }

    pub fn forward_bound(&self, g: &mut Graph, p: &[Var], z: Var, skips: bool) -> Result<Var> {
        check_width("restorer", g.value(z), self.feature_dim)?;
        let u = g.scale(z, 1.0 / self.levels);
        let mut h = u;
        let mut stages = Vec::with_capacity(self.down.len());
        for block in &self.down {
            h = block.forward(g, p, h);
            stages.push(h);
        }
        h = self.bottleneck.forward(g, p, h);
        let depth = self.up.len();
        for (k, block) in self.up.iter().enumerate() {
            h = block.forward(g, p, h);
            // up block k lands on the width of contracting stage depth-2-k
            if skips && k + 1 < depth {
                h = g.add(h, stages[depth - 2 - k]);
            }
        }
        let delta = self.head.forward(g, p, h);
        let out = if skips { g.add(u, delta) } else { delta };
        Ok(g.scale(out, self.levels))
    }

    pub fn restore(&self, z: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let zi = g.constant(z.clone());
        let y = self.forward(&mut g, zi, false)?;
        Ok(g.value(y).clone())
    }
}

/// The three learnable networks of the link.
#[derive(Debug, Clone, PartialEq)]
pub struct Networks {
    pub config: ModelConfig,
    pub encoder: Encoder,
    pub decoder: Decoder,
    pub restorer: Option<Restorer>,
}

impl Networks {
    pub fn new(config: &ModelConfig, seed: u64, with_restorer: bool) -> Result<Self> {
        use crate::rng::{stream, tag};
        config.validate()?;
        Ok(Self {
            config: config.clone(),
            encoder: Encoder::new(config, &mut stream(seed, &[tag::INIT_ENCODER])),
            decoder: Decoder::new(config, &mut stream(seed, &[tag::INIT_DECODER])),
            restorer: with_restorer.then(|| Self::restorer_for(config, seed)),
        })
    }

    fn restorer_for(config: &ModelConfig, seed: u64) -> Restorer {
        use crate::rng::{stream, tag};
        Restorer::new(config, &mut stream(seed, &[tag::INIT_RESTORER]))
    }

    /// Adds the restorer `new(.., seed, true)` would have created. The
    /// restorer draws from its own stream, so attaching it late yields the
    /// same weights as creating it up front.
    pub fn attach_restorer(&mut self, seed: u64) {
        if self.restorer.is_none() {
            self.restorer = Some(Self::restorer_for(&self.config, seed));
        }
    }
}
