use std::f64::consts::TAU;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use proptest::prelude::*;

use domino::baselines::double_ratio;
use domino::channel_model::{synth_csi_clean, ChannelSpec, DistortionDraw, PathComponent};
use domino::cir_estimation::{build_ls_operator, csi_from_taps, estimate_cir_ls, LsOperator};
use domino::compensation::{apply_delay_shift, compensate_frame, CompensationConfig};
use domino::respiration::{estimate_rate, percentile, Band};
use domino::trace::{GroundTruth, TraceFile};
use domino::{CsiFrame, SubcarrierLayout, TapSet};

fn layout() -> Arc<SubcarrierLayout> {
    static L: OnceLock<Arc<SubcarrierLayout>> = OnceLock::new();
    Arc::clone(L.get_or_init(|| Arc::new(SubcarrierLayout::desk_default())))
}

fn ls() -> &'static LsOperator {
    static OP: OnceLock<LsOperator> = OnceLock::new();
    OP.get_or_init(|| {
        let l = layout();
        build_ls_operator(Arc::clone(&l), Arc::new(TapSet::desk_default(l.n_fft())), 0.0).unwrap()
    })
}

fn cplx() -> impl Strategy<Value = Complex64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| Complex64::new(re, im))
}

fn cvec(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec(cplx(), n)
}

fn close(a: &[Complex64], b: &[Complex64], tol: f64) -> bool {
    let scale = b.iter().map(|v| v.norm()).fold(1.0, f64::max);
    a.iter().zip(b).all(|(x, y)| (x - y).norm() <= tol * scale)
}

/// Dominant path at 2..6 taps plus a weaker echo.
fn channel() -> impl Strategy<Value = ChannelSpec> {
    (2.0f64..6.0, 0.05f64..0.5, 0.0f64..TAU, 1.0f64..6.0).prop_map(|(d0, a1, p1, excess)| {
        let l = layout();
        let ts = l.ts();
        let paths = vec![PathComponent::in_taps(1.0, 0.0, d0, ts), PathComponent::in_taps(a1, p1, d0 + excess, ts)];
        ChannelSpec::new(paths, 5.25e9, l).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ls_is_linear(x in cvec(234), y in cvec(234), a in cplx(), b in cplx()) {
        let op = ls();
        let mixed: Vec<Complex64> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();
        let lhs = op.apply(&mixed);
        let rhs: Vec<Complex64> = op.apply(&x).iter().zip(op.apply(&y)).map(|(u, v)| a * u + b * v).collect();
        prop_assert!(close(&lhs, &rhs, 1e-10));
    }

    #[test]
    fn ls_is_a_left_inverse_on_its_support(x in cvec(17)) {
        let op = ls();
        let l = layout();
        let csi = csi_from_taps(&l, &TapSet::desk_default(l.n_fft()), &x).unwrap();
        let frame = CsiFrame::new(0.0, l, csi).unwrap();
        let back = estimate_cir_ls(op, &frame).unwrap();
        prop_assert!(close(&back.taps, &x, 1e-9));
    }

    #[test]
    fn delay_shift_round_trips(x in cvec(234), s in -40.0f64..40.0) {
        let f = CsiFrame::new(0.0, layout(), x).unwrap();
        let back = apply_delay_shift(&apply_delay_shift(&f, s), -s);
        prop_assert!(close(&back.values, &f.values, 1e-12));
    }

    #[test]
    fn complex_scalar_cancels(spec in channel(), beta in 0.5f64..2.0, theta in 0.0f64..TAU) {
        let op = ls();
        let cfg = CompensationConfig::default();
        let f = synth_csi_clean(&spec, &DistortionDraw::identity()).unwrap();
        let g = f.scaled(Complex64::from_polar(beta, theta));
        let a = compensate_frame(&f, op, &cfg).unwrap();
        let b = compensate_frame(&g, op, &cfg).unwrap();
        prop_assert_eq!(b.cir_norm.taps[0], Complex64::new(1.0, 0.0));
        prop_assert!(close(&b.cir_norm.taps, &a.cir_norm.taps, 1e-6));
    }

    #[test]
    fn timing_offset_cancels(spec in channel(), eps in -2.0f64..2.0) {
        let op = ls();
        let cfg = CompensationConfig::default();
        let ts = layout().ts();
        let f = synth_csi_clean(&spec, &DistortionDraw::identity()).unwrap();
        let g = synth_csi_clean(&spec, &DistortionDraw::new(1.0, 0.0, eps * ts).unwrap()).unwrap();
        let a = compensate_frame(&f, op, &cfg).unwrap();
        let b = compensate_frame(&g, op, &cfg).unwrap();
        prop_assert!(close(&b.cir_norm.taps, &a.cir_norm.taps, 1e-6));
    }

    #[test]
    fn double_ratio_ignores_frame_scalars(x in cvec(234), scalars in prop::collection::vec((0.1f64..3.0, 0.0f64..TAU), 1..6)) {
        let l = layout();
        let mut x = x;
        x[0] = Complex64::new(1.0, 0.5);
        let base = CsiFrame::new(0.0, Arc::clone(&l), x).unwrap();
        let frames: Vec<CsiFrame> = scalars.iter().map(|&(m, p)| base.scaled(Complex64::from_polar(m, p))).collect();
        let r = double_ratio(&frames, l.active()[0]).unwrap();
        for f in 1..frames.len() {
            prop_assert!(close(r.row(f), r.row(0), 1e-9));
        }
    }

    #[test]
    fn rate_is_scale_and_offset_invariant(f_hz in 0.12f64..0.48, gain in 0.01f64..100.0, offset in -50.0f64..50.0) {
        let fs = 20.0;
        let x: Vec<f64> = (0..(40.0 * fs) as usize).map(|i| (TAU * f_hz * i as f64 / fs).sin()).collect();
        let y: Vec<f64> = x.iter().map(|v| gain * v + offset).collect();
        let a = estimate_rate(&x, fs, Band::default()).unwrap();
        let b = estimate_rate(&y, fs, Band::default()).unwrap();
        prop_assert!((a.bpm - b.bpm).abs() < 1e-6);
        prop_assert!((a.bpm - 60.0 * f_hz).abs() < 0.2);
    }

    #[test]
    fn percentile_is_monotone(mut v in prop::collection::vec(-1e3f64..1e3, 1..50), p in 0.0f64..1.0, q in 0.0f64..1.0) {
        v.sort_by(f64::total_cmp);
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        let (a, b) = (percentile(&v, lo), percentile(&v, hi));
        prop_assert!(a <= b);
        prop_assert!(a >= v[0] && b <= v[v.len() - 1]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn trace_round_trip_is_bit_exact(
        n_ant in 1usize..4,
        n_frames in 1usize..6,
        bits in prop::collection::vec(any::<u64>(), 32),
        with_truth in any::<bool>(),
    ) {
        let l = Arc::new(SubcarrierLayout::symmetric_guard(16, 8, 312.5e3).unwrap());
        // arbitrary finite values, negative zero and subnormals included
        let mut k = 0usize;
        let mut next = || {
            let v = f64::from_bits(bits[k % bits.len()].rotate_left(k as u32));
            k += 1;
            if v.is_finite() { v } else { -0.0 }
        };
        let streams: Vec<Vec<CsiFrame>> = (0..n_ant)
            .map(|_| {
                (0..n_frames)
                    .map(|f| {
                        let vals = (0..8).map(|_| Complex64::new(next(), next())).collect();
                        CsiFrame::new(f as f64 * 0.02, Arc::clone(&l), vals).unwrap()
                    })
                    .collect()
            })
            .collect();
        let truth = with_truth.then(|| GroundTruth {
            rate_bpm: vec![14.5; n_frames],
            draws: (0..n_frames).map(|f| vec![DistortionDraw::new(1.0 + f as f64, 0.25, 1e-9).unwrap(); n_ant]).collect(),
        });
        let t = TraceFile::new(Arc::clone(&l), 5.0e9, streams, truth).unwrap();
        let bytes = t.to_bytes().unwrap();
        let back = TraceFile::read_from(&mut bytes.as_slice()).unwrap();
        prop_assert_eq!(back.to_bytes().unwrap(), bytes);
        for (a, b) in back.streams.iter().flatten().zip(t.streams.iter().flatten()) {
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert_eq!(x.re.to_bits(), y.re.to_bits());
                prop_assert_eq!(x.im.to_bits(), y.im.to_bits());
            }
        }
        prop_assert_eq!(back, t);
    }
}
