use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vfd_bench::{generate_corpus, toy_corpus, toy_model, train_row, FakeKind, RecipeOptions};
use vfd_data::{normalize_resolution, Class, CompressionPipeline, EncoderClient, ExtractConfig, Quality, StubEncoder};
use vfd_media::{BBox, FrameSequence, Image};
use vfd_mining::mine_track;
use vfd_model::signal::{spatial_highpass, temporal_noise_clip, TemporalNoiseConfig};
use vfd_model::{Detector, DetectorInputs, DetectorSpec, InputKind, TemporalInput, Variant};
use vfd_tensor::{Tape, Tensor};
use vfd_train::{OptimizerConfig, StopReason, Stopper, StoppingPolicy};

use crate::{data_oracles, mining_oracles, model_oracles, tensor_oracles, train_oracles};

pub fn numerics() -> String {
    let mut worst: f64 = 0.0;
    let cases = tensor_oracles::gradient_cases();
    for c in &cases {
        let e = c.error();
        assert!(e < 1e-4, "{}: relative error {e:e}", c.name);
        worst = worst.max(e);
    }
    for t0 in [1.0 / 40.0, 0.1] {
        let e = model_oracles::threshold_gradient_error(t0);
        assert!(e < 1e-4, "temporal threshold at t={t0}: relative error {e:e}");
        worst = worst.max(e);
    }

    let mut r = tensor_oracles::rng(100);
    let mut conv_err: f64 = 0.0;
    let x = tensor_oracles::random(&mut r, &[2, 3, 11, 10]);
    let k = tensor_oracles::random(&mut r, &[4, 3, 3, 3]);
    let dw = tensor_oracles::random(&mut r, &[3, 1, 3, 3]);
    let pw = tensor_oracles::random(&mut r, &[5, 3, 1, 1]);
    for (stride, pad) in [(1, 0), (1, 1), (2, 0), (2, 1), (3, 2)] {
        let mut tape = Tape::new();
        let (xv, kv, dv) = (tape.constant(x.clone()), tape.constant(k.clone()), tape.constant(dw.clone()));
        let y = tape.conv2d(xv, kv, stride, pad).unwrap();
        conv_err = conv_err.max(tape.value(y).max_abs_diff(&tensor_oracles::brute_conv(&x, &k, stride, pad)));
        let y = tape.depthwise_conv2d(xv, dv, stride, pad).unwrap();
        conv_err = conv_err.max(tape.value(y).max_abs_diff(&tensor_oracles::brute_depthwise(&x, &dw, stride, pad)));
    }
    let mut tape = Tape::new();
    let (xv, dv, pv) = (tape.constant(x.clone()), tape.constant(dw.clone()), tape.constant(pw.clone()));
    let y = tape.separable_conv2d(xv, dv, pv).unwrap();
    conv_err = conv_err.max(tape.value(y).max_abs_diff(&tensor_oracles::brute_conv(&x, &tensor_oracles::full_kernel(&dw, &pw), 1, 1)));
    assert!(conv_err < 1e-12, "convolution error {conv_err:e}");
    format!("{} gradient checks, worst relative error {worst:.1e}; conv error {conv_err:.1e}", cases.len() + 2)
}

pub fn preprocessing() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let clip: Vec<Tensor<f64>> = (0..16).map(|_| model_oracles::random_frame(&mut rng, 3, 12, 14)).collect();
    let cfg = TemporalNoiseConfig::default();
    let t = 1.0 / 40.0;
    let got = temporal_noise_clip(&clip, t, &cfg).unwrap();
    let want = model_oracles::temporal_oracle(&clip, t, cfg.norm_eps, cfg.diff_thresholded);
    assert_eq!(got.len(), want.len());
    let mut err: f64 = 0.0;
    for ((_, g), w) in got.iter().zip(&want) {
        for (a, b) in g.data().iter().zip(w) {
            err = err.max((a - b).abs());
        }
    }
    assert!(err < 1e-10, "temporal noise differs from transcription by {err:e}");

    let still = vec![clip[0].clone(); 12];
    let zero = temporal_noise_clip(&still, t, &cfg).unwrap();
    assert!(zero.iter().all(|(_, x)| x.data().iter().all(|&v| v == 0.0)), "static video gives temporal noise");

    let flat = Tensor::<f64>::full(&[3, 17, 13], 0.37);
    let dev = spatial_highpass(&flat).data().iter().map(|v| (v - 0.5).abs()).fold(0.0, f64::max);
    assert!(dev < 1e-12, "highpass of a constant deviates from 1/2 by {dev:e}");
    format!("transcription error {err:.1e}, constant-frame highpass deviation {dev:.1e}")
}

fn toy_inputs(spec: &DetectorSpec, n: usize, seed: u64) -> DetectorInputs<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = spec.input_size;
    let mut planes = || Tensor::from_fn(&[n, 3, s, s], |_| rng.gen::<f32>());
    let mut inp = DetectorInputs::default();
    for kind in spec.inputs() {
        match kind {
            InputKind::Color => inp.color = Some(planes()),
            InputKind::SpatialNoise => inp.spatial = Some(planes()),
            InputKind::TemporalNoise => inp.temporal = Some(TemporalInput::Plane(planes())),
            InputKind::Zero => {}
        }
    }
    inp
}

pub fn architecture() -> String {
    let mut params = Vec::new();
    for v in Variant::ALL {
        let spec = DetectorSpec::standard(v);
        assert_eq!((spec.input_size, spec.width_scale), (299, 1.0));
        let trace = spec.shape_trace().unwrap();
        let width = |name: &str| trace.layer(name).unwrap_or_else(|| panic!("{v}: no layer {name}")).out_shape[0];
        match v {
            Variant::C => assert_eq!(width("color"), 728),
            Variant::S => assert_eq!(width("spatial"), 728),
            Variant::CS => assert_eq!(width("fusion"), 728),
            Variant::CST | Variant::CsNoT => assert_eq!(width("fusion"), 768),
        }
        let det = Detector::<f32>::new(&spec, 1).unwrap();
        params.push(format!("{v} {}", det.params().numel()));
    }

    let cst = DetectorSpec::standard(Variant::CST).with_width_scale(0.125).with_input_size(64);
    let nt = DetectorSpec::standard(Variant::CsNoT).with_width_scale(0.125).with_input_size(64);
    let mut a = Detector::<f32>::new(&cst, 42).unwrap();
    let mut b = Detector::<f32>::new(&nt, 42).unwrap();
    let mut inp = toy_inputs(&nt, 4, 9);
    let sb = b.predict(&inp).unwrap();
    inp.temporal = Some(TemporalInput::Plane(Tensor::zeros(&[4, 3, 64, 64])));
    let sa = a.predict(&inp).unwrap();
    assert!(sa.iter().flatten().zip(sb.iter().flatten()).all(|(x, y)| x.to_bits() == y.to_bits()), "CST with zero temporal input differs from CS_noT");
    let (mut ta, mut tb) = (Tape::new(), Tape::new());
    let fa = a.forward(&mut ta, &inp, true).unwrap();
    let fb = b.forward(&mut tb, &inp, true).unwrap();
    assert_eq!(ta.value(fa.scores).data(), tb.value(fb.scores).data());
    format!("widths 728/728/728/768/768; parameters {}", params.join(", "))
}

pub fn mining() -> String {
    let track = mining_oracles::golden();
    assert_eq!(track.len(), 200);
    let report = mine_track(&track, &mining_oracles::GOLDEN_CUTS, &mining_oracles::GOLDEN_BUDGET).unwrap();
    mining_oracles::check_golden(&report);
    format!(
        "unsuitable {:?}, {} segments, {} train frames",
        report.unsuitable_frames(),
        report.segments.len(),
        report.train_frames
    )
}

pub fn sampling() -> String {
    let tv = data_oracles::sampling_total_variation(&data_oracles::toy(), 1_000_000);
    assert!(tv < 0.02, "total variation {tv}");

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let spec: Vec<(Class, Vec<Vec<Vec<usize>>>)> = [Class::Real, Class::Fake]
            .into_iter()
            .map(|c| {
                let subsets = (0..rng.gen_range(1..4))
                    .map(|_| (0..rng.gen_range(1..4)).map(|_| (0..rng.gen_range(1..4)).map(|_| rng.gen_range(1..12)).collect()).collect())
                    .collect();
                (c, subsets)
            })
            .collect();
        let salt: usize = rng.gen_range(0..1000);
        let predict = |q: usize, f: usize| ((q * 31 + f * 7 + salt) % 3 == 0) as usize;
        let tree = train_oracles::tree(&spec);
        let (w, _) = train_oracles::eval(&tree, predict);
        worst = worst.max((w - train_oracles::oracle(&spec, predict)).abs());
    }
    assert!(worst < 1e-12, "weighted accuracy differs from enumeration by {worst:e}");
    format!("total variation {tv:.4} over 1e6 draws; weighted accuracy error {worst:.1e} over 50 trees")
}

pub fn toy_end_to_end() -> String {
    let work = tempfile::tempdir().unwrap();
    let mut opts = RecipeOptions::new(work.path());
    opts.seeds = Some(3);
    let seeds = 3;
    for v in [Variant::CST, Variant::CsNoT, Variant::S] {
        let m = toy_model(v, false);
        assert!(m.width_scale <= 0.125 && (64..=128).contains(&m.input_size), "toy model outside the allowed scale");
    }

    let mut lines = Vec::new();
    let flicker = toy_corpus(&[FakeKind::TemporalFlicker], false, 0);
    assert!(flicker.subjects >= 8);
    let corpus = generate_corpus(&flicker, &work.path().join("flicker"), 1).unwrap();
    let manifest = corpus.manifest().unwrap();
    let start = Instant::now();
    let cst = train_row(&manifest, "temporal_flicker", Variant::CST, &opts, seeds).unwrap();
    let nt = train_row(&manifest, "temporal_flicker", Variant::CsNoT, &opts, seeds).unwrap();
    let fmt = |r: &vfd_bench::ReportRow| {
        let per: Vec<String> = r.accuracies.iter().map(|a| format!("{a:.4}")).collect();
        format!("{} {:.4} [{}]", r.variant, r.mean_accuracy, per.join(" "))
    };
    lines.push(format!("flicker: {}, {} ({:.0}s)", fmt(&cst), fmt(&nt), start.elapsed().as_secs_f64()));

    let blur = toy_corpus(&[FakeKind::SpatialBlur], false, 0);
    let corpus = generate_corpus(&blur, &work.path().join("blur"), 1).unwrap();
    let start = Instant::now();
    let s = train_row(&corpus.manifest().unwrap(), "spatial_blur", Variant::S, &opts, seeds).unwrap();
    lines.push(format!("blur: {} ({:.0}s)", fmt(&s), start.elapsed().as_secs_f64()));
    let summary = lines.join("; ");

    assert!(cst.mean_accuracy >= 0.90, "CST below 90%: {summary}");
    assert!(cst.mean_accuracy - nt.mean_accuracy >= 0.15, "temporal gap below 15 points: {summary}");
    assert!(s.mean_accuracy >= 0.95, "S below 95%: {summary}");
    summary
}

fn textured(w: usize, h: usize, t: usize) -> Image {
    Image::from_fn(w, h, |c, x, y| {
        let v = ((x as f32 * 0.31 + t as f32 * 0.2).sin() * (y as f32 * 0.23).cos() + 1.0) / 2.0;
        (0.1 + 0.8 * v - 0.05 * c as f32).clamp(0.0, 1.0)
    })
}

pub fn compression() -> String {
    // face box growing and shrinking over time
    let n = 12;
    let video = FrameSequence::new((0..n).map(|t| textured(800, 600, t)).collect(), 25.0);
    let boxes: Vec<Option<BBox>> = (0..n)
        .map(|t| Some(BBox { cx: 400.0 + t as f64, cy: 300.0, side: 380.0 + 40.0 * (t as f64 * 0.7).sin() }))
        .collect();
    let (resized, nb, factor) = normalize_resolution(&video, &boxes, 258.0).unwrap();
    let mean = nb.iter().flatten().map(|b| b.side).sum::<f64>() / n as f64;
    assert!((mean - 258.0).abs() <= 1.0, "mean crop side {mean}");

    let enc = StubEncoder;
    let mse = |q| {
        let out = enc.encode(&resized, Quality::Crf(q)).unwrap();
        out.frames.iter().zip(&resized.frames).map(|(a, b)| a.mse(b)).sum::<f64>() / n as f64
    };
    let (m23, m40) = (mse(23), mse(40));
    assert!(m40 > m23, "MSE at 40 ({m40}) not above 23 ({m23})");

    let pipeline = CompressionPipeline {
        target_side: 258.0,
        quality: Quality::Crf(23),
        extract: ExtractConfig { output_size: 64, ..Default::default() },
    };
    let out = pipeline.run(&video, &boxes, &enc).unwrap();
    let names: Vec<&str> = out.trace.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, ["normalize_resolution", "compress", "extract_detector_frames"]);
    let dims = (resized.frames[0].width(), resized.frames[0].height());
    assert_eq!(out.trace[0].output_size, dims);
    assert_eq!(out.trace[1].input_size, dims);
    assert_eq!(out.trace[2].input_size, dims, "crops must come from the compressed, resized video");
    format!(
        "factor {factor:.4}, mean side {mean:.3}; MSE crf23 {m23:.2e} < crf40 {m40:.2e}; order {}",
        names.join(" -> ")
    )
}

pub fn protocol() -> String {
    let cfg = OptimizerConfig::default();
    let mut worst: f64 = 0.0;
    for e in 0..=1000 {
        let closed = 0.03 * 0.97f64.powf(0.1 * e as f64);
        let rel = (cfg.lr(e) - closed).abs() / closed;
        assert!(rel < 1e-12, "epoch {e}: {} vs {closed}", cfg.lr(e));
        worst = worst.max(rel);
    }

    let run = |policy: StoppingPolicy, curve: &dyn Fn(usize) -> f64| {
        let mut s = Stopper::new(policy);
        (0..).find_map(|e| s.observe(e, curve(e)).map(|r| (e, r))).unwrap()
    };
    let high = [3, 4, 5, 7, 9];
    let a = run(StoppingPolicy::threshold_default(), &|e| if high.contains(&e) { 0.995 } else { 0.9 });
    assert_eq!(a, (9, StopReason::AccuracyReached));
    let b = run(StoppingPolicy::patience_default(), &|e| if e == 6 { 0.9 } else { 0.5 + 0.01 * (e % 5) as f64 });
    assert_eq!(b, (16, StopReason::NoImprovement));
    format!("lr relative error {worst:.1e} over 1001 epochs; policy A stops at {}, policy B at {}", a.0, b.0)
}
