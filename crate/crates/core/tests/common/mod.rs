#![allow(dead_code)]

use digisem::amptrain::{reconstruct, EvalPath, TrainingSchedule};
use digisem::autodiff::Tensor;
use digisem::cli::{split_dataset, Splits};
use digisem::dataset::{Dataset, SyntheticSpec};
use digisem::digichain::Channel;
use digisem::evalkit::psnr;
use digisem::rng;
use digisem::semcodec::{ModelConfig, Networks};

pub const TOY_P: f64 = 0.0125;

/// 256 test, 256 validation and `train` training samples of 8x8x3 toy data.
pub fn toy_splits(train: usize) -> Splits {
    let data = SyntheticSpec::toy(512 + train, 7).generate().unwrap();
    split_dataset(&data, 256, 256).unwrap()
}

/// Small geometry for fast runs: 4x4x3 inputs, 8 features.
pub fn tiny_model() -> ModelConfig {
    let mut m = ModelConfig::for_input(48, 4);
    m.hidden = 16;
    m.se_channels = 4;
    m.restorer_widths = vec![8, 4];
    m
}

pub fn tiny_splits(train: usize, seed: u64) -> Splits {
    let spec = SyntheticSpec {
        h: 4,
        w: 4,
        ..SyntheticSpec::toy(64 + train, seed)
    };
    split_dataset(&spec.generate().unwrap(), 32, 32).unwrap()
}

pub fn tiny_schedule(t: usize) -> TrainingSchedule {
    TrainingSchedule::reference(t, 8).scale_lr(10.0)
}

/// PSNR over `reps` independent channel draws of the whole test set.
pub fn digital_psnr(nets: &Networks, test: &Dataset, p: f64, seed: u64, reps: u64) -> f64 {
    let x = test.all();
    let ch = EvalPath::Digital(Channel::bsc(p).unwrap());
    let mut ys = Vec::new();
    let mut xs = Vec::new();
    for k in 0..reps {
        let y: Tensor = reconstruct(nets, &x, &ch, &mut rng::stream(seed, &[rng::tag::EVAL, 1000 + k])).unwrap();
        ys.extend_from_slice(y.values());
        xs.extend_from_slice(x.values());
    }
    psnr(&ys, &xs).unwrap()
}
