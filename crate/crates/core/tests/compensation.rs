use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use domino::bench::{antenna_streams, Scene};
use domino::channel_model::{synth_csi, synth_csi_clean, ChannelSpec, DistortionDraw, DistortionRanges, PathComponent};
use domino::cir_estimation::{build_ls_operator, estimate_cir_ls, LsOperator};
use domino::compensation::{apply_delay_shift, compensate_frame, estimate_alignment, CompensationConfig, SearchConfig};
use domino::pipeline::{Pipeline, PipelineConfig, Scheme};
use domino::respiration::{estimate_rate, Band};
use domino::{SubcarrierLayout, TapSet};

fn desk() -> (Arc<SubcarrierLayout>, LsOperator) {
    let l = Arc::new(SubcarrierLayout::desk_default());
    let op = build_ls_operator(Arc::clone(&l), Arc::new(TapSet::desk_default(l.n_fft())), 0.0).unwrap();
    (l, op)
}

fn three_paths(l: &Arc<SubcarrierLayout>, second: f64) -> ChannelSpec {
    let ts = l.ts();
    let paths = vec![
        PathComponent::in_taps(1.0, 0.0, 4.3, ts),
        PathComponent::in_taps(second, 1.1, 6.6, ts),
        PathComponent::in_taps(0.3, 2.3, 8.8, ts),
    ];
    ChannelSpec::new(paths, 5.25e9, Arc::clone(l)).unwrap()
}

fn max_dev(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn compensating_csi_norm_is_idempotent() {
    let (l, op) = desk();
    let cfg = CompensationConfig { with_csi: true, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let draw = DistortionRanges::default().sample(&mut rng, l.ts());
        let f = synth_csi_clean(&three_paths(&l, 0.45), &draw).unwrap();
        let once = compensate_frame(&f, &op, &cfg).unwrap();
        let twice = compensate_frame(once.csi_norm.as_ref().unwrap(), &op, &cfg).unwrap();
        assert!(twice.alignment.epsilon_est.abs() < 1e-9, "{}", twice.alignment.epsilon_est);
        assert!(max_dev(&twice.cir_norm.taps, &once.cir_norm.taps) <= 1e-9);
        assert!(max_dev(&twice.csi_norm.unwrap().values, &once.csi_norm.unwrap().values) <= 1e-9);
    }
}

#[test]
fn refined_peak_beats_a_fine_grid() {
    let (l, op) = desk();
    let ts = l.ts();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let second = rng.random_range(0.05..0.5);
        let spec = three_paths(&l, second);
        let draw = DistortionDraw::new(1.0, rng.random_range(0.0..TAU), rng.random_range(-2.0..2.0) * ts).unwrap();
        let f = synth_csi_clean(&spec, &draw).unwrap();
        let a = estimate_alignment(&f, &op, &SearchConfig::default()).unwrap();
        let h0 = |e: f64| estimate_cir_ls(&op, &apply_delay_shift(&f, -e)).unwrap().taps[0].norm();
        let best = h0(a.epsilon_est);
        let lo = -(a.n0 as f64) - 1.0;
        for i in 0..=2000 {
            let e = lo + i as f64 * 1e-3;
            assert!(best >= h0(e) * (1.0 - 1e-12), "grid point {e} beats {}", a.epsilon_est);
        }
    }
}

#[test]
fn invariance_degrades_monotonically_with_noise() {
    let (l, op) = desk();
    let spec = three_paths(&l, 0.45);
    let cfg = CompensationConfig::default();
    let reference = compensate_frame(&synth_csi_clean(&spec, &DistortionDraw::identity()).unwrap(), &op, &cfg).unwrap();
    let mut draw_rng = ChaCha8Rng::seed_from_u64(5);
    let draws: Vec<DistortionDraw> =
        (0..50).map(|_| DistortionRanges::default().sample(&mut draw_rng, l.ts())).collect();
    let devs: Vec<f64> = [0.0, 1e-4, 1e-3, 1e-2]
        .iter()
        .map(|&sigma| {
            let mut rng = ChaCha8Rng::seed_from_u64(6);
            draws
                .iter()
                .map(|d| {
                    let f = synth_csi(&spec, d, sigma, &mut rng).unwrap();
                    max_dev(&compensate_frame(&f, &op, &cfg).unwrap().cir_norm.taps, &reference.cir_norm.taps)
                })
                .fold(0.0, f64::max)
        })
        .collect();
    assert!(devs.windows(2).all(|w| w[0] < w[1]), "{devs:?}");
    assert!(devs[0] < 1e-9);
}

/// Reported only: how far a strong second path pulls the compensated taps
/// away from the single-frame reference.
#[test]
fn near_equal_second_path_report() {
    let (l, op) = desk();
    let cfg = CompensationConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for second in [0.3, 0.5, 0.7, 0.9] {
        let spec = three_paths(&l, second);
        let reference =
            compensate_frame(&synth_csi_clean(&spec, &DistortionDraw::identity()).unwrap(), &op, &cfg).unwrap();
        let worst = (0..50)
            .map(|_| {
                let d = DistortionRanges::default().sample(&mut rng, l.ts());
                let f = synth_csi_clean(&spec, &d).unwrap();
                max_dev(&compensate_frame(&f, &op, &cfg).unwrap().cir_norm.taps, &reference.cir_norm.taps)
            })
            .fold(0.0, f64::max);
        println!("second path {second}: worst tap deviation {worst:.2e}");
        assert!(worst.is_finite());
    }
}

#[test]
fn breathing_shows_up_on_the_target_taps() {
    let mut scene = Scene::desk_default();
    scene.duration_s = 40.0;
    scene.n_antennas = 1;
    let setup = scene.setup(15.0, f64::INFINITY, scene.ranges, 9).unwrap();
    let streams = antenna_streams(&setup.generate(&scene.frame_times()).unwrap());
    let p = Pipeline::new(Arc::clone(&scene.layout), PipelineConfig::desk_default(&scene.layout)).unwrap();
    let series = p.series(Scheme::Domino, &streams).unwrap();
    // target sits 4.5 taps behind the dominant path
    for tap in [4, 5] {
        let c = series.labels.iter().position(|lab| lab.index == tap).unwrap();
        let mags: Vec<f64> = series.channels[c].iter().map(|v| v.norm()).collect();
        let r = estimate_rate(&mags, scene.fs_hz, Band::default()).unwrap();
        assert!((r.bpm - 15.0).abs() < 0.1, "tap {tap}: {}", r.bpm);
    }
}
