use vfd_data::*;
use vfd_media::{BBox, FrameSequence, Image};

fn textured(w: usize, h: usize, t: usize) -> Image {
    Image::from_fn(w, h, |c, x, y| {
        let v = ((x as f32 * 0.7 + t as f32).sin() * (y as f32 * 0.45).cos() + 1.0) / 2.0;
        (v * 0.8 + 0.1 * c as f32 / 2.0).clamp(0.0, 1.0)
    })
}

#[test]
fn resolution_normalization_hits_target_side() {
    let v = FrameSequence::new((0..3).map(|t| textured(1032, 600, t)).collect(), 25.0);
    let boxes = vec![Some(BBox { cx: 500.0, cy: 300.0, side: 516.0 }); 3];
    let (out, nb, factor) = normalize_resolution(&v, &boxes, 258.0).unwrap();
    assert_eq!(factor, 0.5);
    assert_eq!((out.frames[0].width(), out.frames[0].height()), (516, 300));
    let mean = nb.iter().flatten().map(|b| b.side).sum::<f64>() / 3.0;
    assert!((mean - 258.0).abs() <= 1.0);

    let odd = FrameSequence::new(vec![textured(333, 211, 0)], 25.0);
    let (_, nb, _) = normalize_resolution(&odd, &[Some(BBox { cx: 100.0, cy: 100.0, side: 191.0 })], 258.0).unwrap();
    assert!((nb[0].unwrap().side - 258.0).abs() <= 1.0);

    let alt: Vec<Option<BBox>> = (0..4).map(|i| Some(BBox { cx: 50.0, cy: 50.0, side: if i % 2 == 0 { 200.0 } else { 316.0 } })).collect();
    let v4 = FrameSequence::new((0..4).map(|t| textured(64, 48, t)).collect(), 25.0);
    let (out, _, factor) = normalize_resolution(&v4, &alt, 258.0).unwrap();
    assert_eq!(factor, 1.0);
    assert_eq!(out, v4);

    assert!(normalize_resolution(&v4, &[None; 4], 258.0).is_err());
    assert!(normalize_resolution(&v4, &[Some(BBox { cx: 0.0, cy: 0.0, side: 0.0 }); 4], 258.0).is_err());
}

#[test]
fn stub_quality_levels() {
    let v = FrameSequence::new((0..2).map(|t| textured(37, 29, t)).collect(), 25.0);
    let enc = StubEncoder;
    assert_eq!(enc.encode(&v, Quality::Lossless).unwrap(), v);
    let mse = |q| {
        let out = enc.encode(&v, Quality::Crf(q)).unwrap();
        assert_eq!((out.frames[0].width(), out.frames[0].height()), (37, 29));
        out.frames.iter().zip(&v.frames).map(|(a, b)| a.mse(b)).sum::<f64>()
    };
    let (m23, m40) = (mse(23), mse(40));
    assert!(m40 > m23, "{m40} vs {m23}");
    assert!(m23 > 0.0);
    assert!(StubEncoder::step(40) > StubEncoder::step(23));
}

#[test]
fn quality_parsing() {
    assert_eq!("lossless".parse::<Quality>().unwrap(), Quality::Lossless);
    assert_eq!("23".parse::<Quality>().unwrap(), Quality::Crf(23));
    assert!("99".parse::<Quality>().is_err());
    assert!("high".parse::<Quality>().is_err());
}

#[test]
fn pipeline_resizes_then_compresses_then_crops() {
    let v = FrameSequence::new((0..6).map(|t| textured(200, 150, t)).collect(), 25.0);
    let boxes = vec![Some(BBox { cx: 100.0, cy: 75.0, side: 100.0 }); 6];
    let p = CompressionPipeline {
        target_side: 50.0,
        quality: Quality::Crf(40),
        extract: ExtractConfig { output_size: 24, ..Default::default() },
    };
    let out = p.run(&v, &boxes, &StubEncoder).unwrap();
    let names: Vec<&str> = out.trace.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, ["normalize_resolution", "compress", "extract_detector_frames"]);
    assert_eq!(out.trace[0].output_size, (100, 75));
    assert_eq!(out.trace[1].input_size, (100, 75));
    assert_eq!(out.trace[2].input_size, (100, 75));
    assert_eq!(out.trace[2].output_size, (24, 24));
    // crops come from the compressed, downscaled video
    let (small, sb, _) = normalize_resolution(&v, &boxes, 50.0).unwrap();
    let enc = StubEncoder.encode(&small, Quality::Crf(40)).unwrap();
    let b = sb[0].unwrap();
    assert_eq!(out.extracted.frames.frames[0], enc.frames[0].crop_square(b.cx, b.cy, b.side, 24));
}

#[test]
fn encoder_selection_from_environment() {
    std::env::remove_var(ENCODER_ENV);
    assert_eq!(encoder_from_env(false).unwrap().name(), "stub-dct");
    assert!(encoder_from_env(true).is_err());
    std::env::set_var(ENCODER_ENV, "/nonexistent/encoder");
    assert_eq!(encoder_from_env(false).unwrap().name(), "stub-dct");
    assert!(encoder_from_env(true).is_err());
    std::env::remove_var(ENCODER_ENV);
}
