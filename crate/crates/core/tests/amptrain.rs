mod common;

use common::{tiny_model, tiny_schedule, tiny_splits};
use digisem::amptrain::{
    reconstruct, run_amp, run_variants, sample_mask, send_digital, EvalPath, Phase, PipelineVariant, StepBudget,
    StepKind, Trainer, TrainingSchedule,
};
use digisem::dataset::Dataset;
use digisem::digichain::Channel;
use digisem::evalkit::psnr_tensor;
use digisem::rng::{self, tag};
use digisem::semcodec::Networks;
use digisem::Error;
use proptest::prelude::*;

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, t)| (x - t).abs()).sum::<f64>() / a.len() as f64
}

fn phase(kind: StepKind, epochs: usize, lr: f64, mask_ratio: f64, restorer: bool) -> Phase {
    Phase {
        kind,
        round: 1,
        budget: StepBudget::new(epochs, lr),
        mask_ratio,
        restorer,
    }
}

#[test]
fn frozen_steps_keep_encoder_bits_and_train_the_receiver() {
    let s = tiny_splits(64, 1);
    let sched = tiny_schedule(1);
    let tr = Trainer::new(&s.train, &s.val, &sched, 3).unwrap();
    let mut nets = Networks::new(&tiny_model(), 3, true).unwrap();
    for kind in [StepKind::DecoderOnly, StepKind::Align] {
        let enc = nets.encoder.params.digest();
        let dec = nets.decoder.params.digest();
        let res = nets.restorer.as_ref().unwrap().params.digest();
        tr.run_phase(&mut nets, &phase(kind, 2, 1e-3, 0.025, true), &mut Vec::new())
            .unwrap();
        assert_eq!(enc, nets.encoder.params.digest(), "{kind:?} moved the encoder");
        assert_ne!(dec, nets.decoder.params.digest());
        assert_ne!(res, nets.restorer.as_ref().unwrap().params.digest());
    }
}

#[test]
fn joint_and_analog_steps_move_their_sets() {
    let s = tiny_splits(64, 1);
    let sched = tiny_schedule(1);
    let tr = Trainer::new(&s.train, &s.val, &sched, 3).unwrap();
    let mut nets = Networks::new(&tiny_model(), 3, true).unwrap();
    let digests = |n: &Networks| {
        [
            n.encoder.params.digest(),
            n.decoder.params.digest(),
            n.restorer.as_ref().unwrap().params.digest(),
        ]
    };
    let before = digests(&nets);
    tr.run_phase(&mut nets, &phase(StepKind::Joint, 1, 1e-3, 0.025, true), &mut Vec::new())
        .unwrap();
    let after = digests(&nets);
    assert!(before.iter().zip(&after).all(|(a, b)| a != b));
    tr.run_phase(&mut nets, &phase(StepKind::Extract, 1, 1e-3, 0.0, false), &mut Vec::new())
        .unwrap();
    let last = digests(&nets);
    assert_ne!(after[0], last[0]);
    assert_ne!(after[1], last[1]);
    assert_eq!(after[2], last[2]);
}

#[test]
fn degenerate_channel_collapses_digital_objectives() {
    let s = tiny_splits(32, 2);
    let sched = tiny_schedule(1).with_p(0.0);
    let mut tr = Trainer::new(&s.train, &s.val, &sched, 5).unwrap();
    tr.channel = Channel::Noiseless;
    let mut nets = Networks::new(&tiny_model(), 5, true).unwrap();
    // move the restorer off the identity so both loss terms matter
    tr.run_phase(&mut nets, &phase(StepKind::Joint, 1, 1e-3, 0.0, true), &mut Vec::new())
        .unwrap();
    let batch: Vec<usize> = (0..16).collect();
    for restorer in [false, true] {
        let a = tr
            .objective(&nets, &phase(StepKind::DecoderOnly, 1, 1e-4, 0.0, restorer), &batch, 0)
            .unwrap();
        let b = tr
            .objective(&nets, &phase(StepKind::Align, 1, 1e-4, 0.0, restorer), &batch, 0)
            .unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn zero_noise_soft_quantization_is_the_analog_objective() {
    let s = tiny_splits(32, 2);
    let mut sched = tiny_schedule(1);
    sched.alpha = 0.0;
    let tr = Trainer::new(&s.train, &s.val, &sched, 5).unwrap();
    let nets = Networks::new(&tiny_model(), 5, true).unwrap();
    let batch: Vec<usize> = (0..20).collect();
    let a = tr.objective(&nets, &phase(StepKind::Extract, 1, 1e-4, 0.0, false), &batch, 0).unwrap();
    let b = tr.objective(&nets, &phase(StepKind::SoftQuant, 1, 1e-4, 0.0, false), &batch, 0).unwrap();
    assert_eq!(a, b);
    // joint step without noise and mask is analog training through the restorer
    let x = s.train.batch(&batch);
    let f = nets.encoder.encode(&x).unwrap();
    let y = nets.decoder.decode(&nets.restorer.as_ref().unwrap().restore(&f).unwrap()).unwrap();
    let c = tr.objective(&nets, &phase(StepKind::Joint, 1, 1e-4, 0.0, true), &batch, 0).unwrap();
    assert_eq!(c, l1(y.values(), x.values()));
}

#[test]
fn soft_noise_has_requested_spread() {
    // soft-quantization noise is alpha times a standard normal draw
    use rand::Rng;
    use rand_distr::StandardNormal;
    let mut r = rng::stream(1, &[tag::SOFT_NOISE]);
    let n = 200_000;
    let v: Vec<f64> = (0..n).map(|_| 0.5 * r.sample::<f64, _>(StandardNormal)).collect();
    let mean = v.iter().sum::<f64>() / n as f64;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    assert!(mean.abs() < 4.0 * 0.5 / (n as f64).sqrt());
    assert!((sd - 0.5).abs() < 0.005);
}

#[test]
fn alignment_objective_is_the_deployment_path() {
    let s = tiny_splits(32, 4);
    let sched = tiny_schedule(1);
    let tr = Trainer::new(&s.train, &s.val, &sched, 8).unwrap();
    let mut nets = Networks::new(&tiny_model(), 8, true).unwrap();
    tr.run_phase(&mut nets, &phase(StepKind::Joint, 1, 1e-3, 0.0, true), &mut Vec::new())
        .unwrap();
    let batch: Vec<usize> = (0..s.train.len()).collect();
    let x = s.train.batch(&batch);
    let align = |restorer| Phase {
        kind: StepKind::Align,
        round: 0,
        budget: StepBudget::new(1, 1e-4),
        mask_ratio: 0.0,
        restorer,
    };
    let stream = || rng::stream(8, &[tag::CHANNEL, 5, 0, 0]);

    let mut plain = nets.clone();
    plain.restorer = None;
    let y = reconstruct(&plain, &x, &EvalPath::Digital(tr.channel.clone()), &mut stream()).unwrap();
    let loss = tr.objective(&plain, &align(false), &batch, 0).unwrap();
    assert_eq!(loss, l1(y.values(), x.values()));

    let y = reconstruct(&nets, &x, &EvalPath::Digital(tr.channel.clone()), &mut stream()).unwrap();
    let rx = send_digital(&nets.encoder.encode(&x).unwrap(), 4, &tr.channel, &mut stream()).unwrap();
    let zt = nets.restorer.as_ref().unwrap().restore(&rx.demodulated).unwrap();
    let loss = tr.objective(&nets, &align(true), &batch, 0).unwrap();
    assert_eq!(loss, l1(y.values(), x.values()) + l1(zt.values(), rx.quantized.values()));
}

#[test]
fn soft_q_is_amp_sc_after_step_two() {
    let s = tiny_splits(48, 3);
    let sched = tiny_schedule(1);
    let model = tiny_model();
    let tr = Trainer::new(&s.train, &s.val, &sched, 11).unwrap();
    let softq = run_amp(PipelineVariant::SoftQ, &tr, &model).unwrap();
    // independent run that carries the restorer from the start
    let mut nets = Networks::new(&model, 11, true).unwrap();
    for p in &PipelineVariant::AmpSc.plan(&sched).unwrap()[..2] {
        tr.run_phase(&mut nets, p, &mut Vec::new()).unwrap();
    }
    assert_eq!(softq.checkpoint.networks.encoder, nets.encoder);
    assert_eq!(softq.checkpoint.networks.decoder, nets.decoder);
}

#[test]
fn shared_prefixes_match_separate_runs_and_runs_repeat() {
    let s = tiny_splits(48, 3);
    let sched = tiny_schedule(1);
    let model = tiny_model();
    let tr = Trainer::new(&s.train, &s.val, &sched, 12).unwrap();
    let joint = run_variants(&[PipelineVariant::SoftQ, PipelineVariant::SoftHe22], &tr, &model).unwrap();
    let alone = run_amp(PipelineVariant::SoftHe22, &tr, &model).unwrap();
    assert_eq!(joint[1].checkpoint, alone.checkpoint);
    assert_eq!(joint[1].metrics, alone.metrics);
    assert_eq!(joint[1].before_align, alone.before_align);
    let again = run_amp(PipelineVariant::SoftHe22, &tr, &model).unwrap();
    assert_eq!(again.checkpoint.hash().unwrap(), alone.checkpoint.hash().unwrap());
}

#[test]
fn realized_log_follows_the_schedule() {
    let s = tiny_splits(16, 5);
    let sched = tiny_schedule(1);
    let tr = Trainer::new(&s.train, &s.val, &sched, 1).unwrap();
    let run = run_amp(PipelineVariant::AmpSc, &tr, &tiny_model()).unwrap();
    let plan = PipelineVariant::AmpSc.plan(&sched).unwrap();
    assert_eq!(run.metrics.len(), sched.total_epochs());
    let mut i = 0;
    for p in &plan {
        let rows = &run.metrics[i..i + p.budget.epochs];
        assert!(rows.iter().all(|r| r.step == p.kind.number() && r.round == p.round));
        assert_eq!(rows[0].lr, p.budget.lr);
        assert_eq!(rows.iter().map(|r| r.epoch).collect::<Vec<_>>(), (1..=p.budget.epochs).collect::<Vec<_>>());
        i += p.budget.epochs;
    }
    assert!(run.checkpoint.networks.restorer.is_some());
    let conv = run_amp(PipelineVariant::Conventional, &tr, &tiny_model()).unwrap();
    assert!(conv.metrics.iter().all(|r| r.step == 1));
    assert!(conv.checkpoint.networks.restorer.is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn plan_budgets_for_any_t(t in 1usize..200) {
        let s = TrainingSchedule::reference(t, 8);
        let plan = PipelineVariant::AmpSc.plan(&s).unwrap();
        let seq: Vec<(u8, usize, f64)> = plan.iter().map(|p| (p.kind.number(), p.budget.epochs, p.budget.lr)).collect();
        let expected = vec![
            (1, 4 * t, 1e-4),
            (2, t, 1e-5),
            (3, 4 * t, 1e-4),
            (4, t, 1e-4),
            (3, t, 1e-4),
            (4, t, 1e-4),
            (3, t, 1.5e-5),
            (4, t, 1.5e-5),
            (5, t, 1.5e-5),
        ];
        prop_assert_eq!(seq, expected);
        prop_assert_eq!(plan.iter().map(|p| p.budget.epochs).sum::<usize>(), 15 * t);
    }

    #[test]
    fn mask_entries_are_binary(n in 0usize..500, ratio in 0.0f64..0.99, seed: u64) {
        let m = sample_mask(n, ratio, &mut rng::stream(seed, &[])).unwrap();
        prop_assert_eq!(m.len(), n);
        prop_assert!(m.iter().all(|&v| v == 0.0 || v == 1.0));
    }
}

#[test]
fn mask_fraction_converges() {
    let n = 1_000_000;
    let m = sample_mask(n, 0.025, &mut rng::stream(77, &[tag::MASK])).unwrap();
    let zeros = m.iter().filter(|&&v| v == 0.0).count() as f64 / n as f64;
    let sigma = (0.025 * 0.975 / n as f64).sqrt();
    assert!((zeros - 0.025).abs() < 3.0 * sigma, "{zeros}");
}

#[test]
fn overfits_four_samples() {
    let data = digisem::dataset::SyntheticSpec::toy(4, 21).generate().unwrap();
    let mut sched = TrainingSchedule::reference(100, 4);
    sched.step1 = StepBudget::new(400, 3e-3);
    let tr = Trainer::new(&data, &data, &sched, 2).unwrap();
    let model = digisem::semcodec::ModelConfig::for_input(192, 4);
    let run = run_amp(PipelineVariant::Conventional, &tr, &model).unwrap();
    let x = data.all();
    let y = run.checkpoint.networks.decoder.decode(&run.checkpoint.networks.encoder.encode(&x).unwrap()).unwrap();
    let loss = l1(y.values(), x.values());
    assert!(loss < 0.05, "final L1 {loss}");
}

#[test]
fn extraction_loss_falls() {
    let s = tiny_splits(128, 6);
    let sched = tiny_schedule(2);
    let model = tiny_model();
    let mut first = 0.0;
    let mut last = 0.0;
    for seed in 0..3 {
        let tr = Trainer::new(&s.train, &s.val, &sched, seed).unwrap();
        let nets = Networks::new(&model, seed, false).unwrap();
        let p = PipelineVariant::Conventional.plan(&sched).unwrap()[0];
        let all: Vec<usize> = (0..s.train.len()).collect();
        first += tr.objective(&nets, &p, &all, 0).unwrap();
        let run = run_amp(PipelineVariant::Conventional, &tr, &model).unwrap();
        last += tr.objective(&run.checkpoint.networks, &p, &all, 0).unwrap();
    }
    assert!(last <= first, "{last} > {first}");
}

#[test]
fn soft_quantization_narrows_the_rounding_gap() {
    let s = tiny_splits(256, 9);
    let sched = tiny_schedule(3);
    let model = tiny_model();
    let x = s.test.all();
    let mut gap1 = 0.0;
    let mut gap2 = 0.0;
    for seed in 0..3 {
        let tr = Trainer::new(&s.train, &s.val, &sched, seed).unwrap();
        let runs = run_variants(&[PipelineVariant::Conventional, PipelineVariant::SoftQ], &tr, &model).unwrap();
        for (run, gap) in runs.iter().zip([&mut gap1, &mut gap2]) {
            let n = &run.checkpoint.networks;
            let r = &mut rng::stream(0, &[]);
            let analog = psnr_tensor(&reconstruct(n, &x, &EvalPath::Analog, r).unwrap(), &x).unwrap();
            let digital = psnr_tensor(&reconstruct(n, &x, &EvalPath::Digital(Channel::Noiseless), r).unwrap(), &x).unwrap();
            *gap += analog - digital;
        }
    }
    assert!(gap2 <= gap1, "after soft quantization {gap2}, before {gap1}");
}

#[test]
fn divergence_is_reported() {
    let good = tiny_splits(8, 1);
    let mut v = good.train.values().to_vec();
    v[3] = f64::NAN;
    let bad = Dataset::new(3, 4, 4, v).unwrap();
    let sched = tiny_schedule(1);
    let tr = Trainer::new(&bad, &good.val, &sched, 1).unwrap();
    let err = run_amp(PipelineVariant::Conventional, &tr, &tiny_model()).unwrap_err();
    assert!(matches!(err, Error::NonFinite(_)), "{err}");
}

#[test]
fn invalid_schedule_is_a_config_error() {
    let mut s = TrainingSchedule::reference(1, 4);
    s.step3.pop();
    assert!(matches!(PipelineVariant::AmpSc.plan(&s), Err(Error::Config(_))));
}
