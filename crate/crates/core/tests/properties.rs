//! Randomised checks of the invariants each stage promises.

use proptest::prelude::*;
use resp_core::adr::{adr_prepare, AdrConfig, Pca3};
use resp_core::breath::count_breaths;
use resp_core::dataset::{make_dataset, ExtractConfig};
use resp_core::ecg_resp::{detect_r_peaks, edr_ramp, edr_rrint, MIN_BEAT_GAP_S};
use resp_core::evaluation::bland_altman;
use resp_core::model::{ConfId, ConfSpec, Model};
use resp_core::nn::{mirror_output_padding, smooth_l1, smooth_l1_scalar, Conv1d, ConvTranspose1d, Mode, Tensor};
use resp_core::signal::{bandpass_samples, resample, window_stream, window_spans, SampledSignal, RESP_FS, RESP_LEN};
use resp_core::synth::{generate, Profile, SynthConfig};

fn tensor(shape: &[usize], seed: u64) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|i| ((i as f64 + 1.0) * (seed as f64 * 0.618 + 0.37)).sin()).collect();
    Tensor::new(shape, data).unwrap()
}

fn normalised_or_zero(x: &[f64], degenerate: bool) -> bool {
    if degenerate {
        return x.iter().all(|&v| v == 0.0);
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    mean.abs() < 1e-9 && (var - 1.0).abs() < 1e-6
}

fn subject(rr: f64, hr: f64, seed: u64) -> SynthConfig {
    SynthConfig {
        duration_s: 72.0,
        rr_profile: Profile::constant(rr),
        hr_profile: Profile::constant(hr),
        seed,
        ..SynthConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn resampling_a_constant_twice_equals_once(c in -50.0f64..50.0, n in 20usize..400, target in 8usize..300) {
        let sig = SampledSignal::single(vec![c; n], "x", 100.0).unwrap();
        let once = resample(&sig, target).unwrap();
        let twice = resample(&once, target).unwrap();
        for (a, b) in once.channel(0).iter().zip(twice.channel(0)) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn bandpass_of_silence_is_silence(n in 200usize..2000, lo in 0.05f64..1.0, width in 0.1f64..5.0) {
        let y = bandpass_samples(&vec![0.0; n], 50.0, lo, lo + width, 4).unwrap();
        prop_assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn windows_tile_at_whole_strides(duration in 40.0f64..200.0, stride_steps in 1usize..8) {
        let fs = 4.0;
        let stride = stride_steps as f64 * 0.5;
        let n = (duration * fs) as usize;
        let sig = SampledSignal::single((0..n).map(|i| i as f64).collect(), "x", fs).unwrap();
        let windows = window_stream(&sig, 32.0, stride).unwrap();
        prop_assert_eq!(windows.len(), window_spans(sig.duration(), 32.0, stride).len());
        let shared = ((32.0 - stride) * fs) as usize;
        let step = (stride * fs) as usize;
        for (k, w) in windows.iter().enumerate() {
            prop_assert_eq!(w.span.start_s, k as f64 * stride);
        }
        for pair in windows.windows(2) {
            prop_assert_eq!(&pair[0].data[0][step..], &pair[1].data[0][..shared]);
        }
    }

    #[test]
    fn smooth_l1_is_nonnegative_with_clamped_slope(d in -20.0f64..20.0) {
        let (v, g) = smooth_l1_scalar(d);
        prop_assert!(v >= 0.0);
        prop_assert_eq!(g, d.clamp(-1.0, 1.0));
        let (loss, _) = smooth_l1(&Tensor::new(&[1, 1], vec![d]).unwrap(), &Tensor::zeros(&[1, 1])).unwrap();
        prop_assert!(loss >= 0.0);
    }

    #[test]
    fn smooth_l1_joins_continuously(side in prop_oneof![Just(-1.0f64), Just(1.0f64)], eps in 1e-12f64..1e-6) {
        let (inside, gi) = smooth_l1_scalar(side * (1.0 - eps));
        let (outside, go) = smooth_l1_scalar(side * (1.0 + eps));
        prop_assert!((inside - outside).abs() < 3.0 * eps);
        prop_assert!((gi - go).abs() < 3.0 * eps);
    }

    #[test]
    fn transposed_convolution_is_the_adjoint(
        c_in in 1usize..5, c_out in 1usize..5, k in 1usize..7, stride in 1usize..4,
        pad_frac in 0.0f64..1.0, extra in 0usize..20, seed in 0u64..1000,
    ) {
        let pad = ((k as f64) * pad_frac) as usize % k;
        let l = k.max(2 * pad + 1) + extra;
        let conv = Conv1d::from_tensors(tensor(&[c_out, c_in, k], seed), Tensor::zeros(&[c_out]), stride, pad).unwrap();
        let l_out = conv.out_len(l).unwrap();
        let op = mirror_output_padding(l, k, stride, pad);
        let convt = ConvTranspose1d::from_tensors(conv.weight.value.clone(), Tensor::zeros(&[c_in]), stride, pad, op).unwrap();
        let x = tensor(&[2, c_in, l], seed + 1);
        let y = tensor(&[2, c_out, l_out], seed + 2);
        let back = convt.infer(&y).unwrap();
        prop_assert_eq!(back.shape(), x.shape());
        prop_assert!((conv.infer(&x).unwrap().dot(&y) - x.dot(&back)).abs() < 1e-10);
    }

    #[test]
    fn bland_altman_translates_with_the_predictions(
        pairs in prop::collection::vec((0.0f64..60.0, 0.0f64..60.0), 2..60),
        c in -10.0f64..10.0,
    ) {
        let (p, r): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        // dyadic shifts keep every difference exact
        let c = (c * 64.0).round() / 64.0;
        let shifted: Vec<f64> = p.iter().map(|v| v + c).collect();
        let (a, _) = bland_altman(&p, &r).unwrap();
        let (b, _) = bland_altman(&shifted, &r).unwrap();
        prop_assert!((b.bias - a.bias - c).abs() < 1e-9);
        prop_assert!((b.loa_lo - a.loa_lo - c).abs() < 1e-9);
        prop_assert!((b.loa_hi - a.loa_hi - c).abs() < 1e-9);
        prop_assert_eq!(a.n, b.n);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn r_peaks_increase_and_respect_refractory_gap(hr in 45.0f64..170.0, seed in 0u64..100, shift in 1usize..700) {
        let cfg = SynthConfig { rsa_depth_ms: 50.0, ..subject(15.0, hr, seed) };
        let rec = generate(&cfg).unwrap();
        let peaks = detect_r_peaks(&rec.ecg).unwrap();
        prop_assert!(peaks.times_s.windows(2).all(|w| w[1] > w[0] && w[1] - w[0] >= MIN_BEAT_GAP_S));
        let dt = shift as f64 / rec.ecg.fs();
        let moved = detect_r_peaks(&rec.ecg.clone().with_t0(dt)).unwrap();
        prop_assert_eq!(moved.len(), peaks.len());
        for (a, b) in peaks.times_s.iter().zip(&moved.times_s) {
            prop_assert!((b - a - dt).abs() < 1e-12);
        }
    }

    #[test]
    fn surrogates_are_full_length_and_normalised(rr in 8.0f64..30.0, hr in 50.0f64..110.0, seed in 0u64..100) {
        let rec = generate(&subject(rr, hr, seed)).unwrap();
        let peaks = detect_r_peaks(&rec.ecg).unwrap();
        let adr = adr_prepare(&rec.accel, &AdrConfig::default()).unwrap();
        for span in window_spans(rec.ecg.duration(), 32.0, 8.0) {
            for s in [edr_rrint(&peaks, &span).unwrap(), edr_ramp(&peaks, &span).unwrap(), adr.window(&span).unwrap()] {
                prop_assert_eq!(s.samples.len(), RESP_LEN);
                prop_assert!(normalised_or_zero(&s.samples, s.degenerate));
            }
            prop_assert_eq!(adr.window(&span).unwrap(), adr.window(&span).unwrap());
        }
    }

    #[test]
    fn first_component_carries_the_most_variance(tilt in 0.01f64..0.2, seed in 0u64..100) {
        let cfg = SynthConfig { tilt_amp: tilt, ..subject(15.0, 70.0, seed) };
        let rec = generate(&cfg).unwrap();
        let adr = adr_prepare(&rec.accel, &AdrConfig::default()).unwrap();
        let start = (10.0 * RESP_FS) as usize;
        let cols: [&[f64]; 3] = std::array::from_fn(|a| &adr.axes()[a][start..start + RESP_LEN]);
        let pca = Pca3::new(cols);
        let energy = |x: &[f64]| {
            let m = x.iter().sum::<f64>() / x.len() as f64;
            x.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
        };
        let pc1 = energy(&pca.project(cols, 0));
        for c in cols {
            prop_assert!(pc1 >= energy(c) * (1.0 - 1e-12));
        }
    }

    #[test]
    fn generator_truth_agrees_with_counting(rr in 8.0f64..30.0, hr in 50.0f64..110.0, seed in 0u64..100) {
        let cfg = SynthConfig { ecg_noise_sigma: 0.0, activity_noise_sigma: 0.0, ..subject(rr, hr, seed) };
        let (batch, report) = make_dataset(&[cfg], &ExtractConfig::default()).unwrap();
        prop_assert!(batch.inputs.is_finite());
        prop_assert_eq!(report.flagged, 0);
        let rates = batch.rate_targets().unwrap();
        let agree = (0..batch.len())
            .filter(|&i| {
                count_breaths(batch.waveform_row(i).unwrap())
                    .avg_rr_bpm
                    .is_some_and(|c| (c - rates[i]).abs() <= 0.5)
            })
            .count();
        prop_assert!(agree as f64 >= 0.95 * batch.len() as f64, "{agree}/{}", batch.len());
    }

    #[test]
    fn decoder_output_is_always_128_samples(batch in 1usize..6, seed in 0u64..50) {
        for id in [ConfId::C, ConfId::E] {
            let model = Model::build(ConfSpec::narrow(id, 8), seed).unwrap();
            let out = model.infer(&tensor(&[batch, 3, RESP_LEN], seed)).unwrap();
            let wave = out.waveform.unwrap();
            prop_assert_eq!(wave.shape(), &[batch, 1, RESP_LEN][..]);
        }
    }

    #[test]
    fn forward_is_deterministic_and_seed_fixes_size(seed in 0u64..1000) {
        let spec = ConfSpec::narrow(ConfId::E, 8);
        let mut a = Model::build(spec, seed).unwrap();
        let mut b = Model::build(spec, seed).unwrap();
        let x = tensor(&[3, 3, RESP_LEN], seed);
        prop_assert_eq!(a.forward(&x, Mode::Train).unwrap(), b.forward(&x, Mode::Train).unwrap());
        prop_assert_eq!(a.param_count(), Model::build(spec, seed + 1).unwrap().param_count());
    }

    #[test]
    fn zeroing_one_head_leaves_the_other(seed in 0u64..1000) {
        let mut model = Model::build(ConfSpec::narrow(ConfId::E, 8), seed).unwrap();
        let x = tensor(&[2, 3, RESP_LEN], seed);
        let base = model.infer(&x).unwrap();
        for p in model.decoder.as_mut().unwrap().params_mut() {
            p.value.fill(0.0);
        }
        let no_dec = model.infer(&x).unwrap();
        prop_assert_eq!(&no_dec.rate, &base.rate);
        prop_assert_ne!(&no_dec.waveform, &base.waveform);
        let mut model = Model::build(ConfSpec::narrow(ConfId::E, 8), seed).unwrap();
        for p in model.head.as_mut().unwrap().params_mut() {
            p.value.fill(0.0);
        }
        let no_head = model.infer(&x).unwrap();
        prop_assert_eq!(&no_head.waveform, &base.waveform);
        prop_assert_ne!(&no_head.rate, &base.rate);
    }
}

#[test]
fn flags_appear_only_without_modulation() {
    let flat = SynthConfig { rsa_depth_ms: 0.0, ramp_mod_pct: 0.0, ecg_noise_sigma: 0.0, baseline_wander: 0.0, ..subject(15.0, 60.0, 3) };
    let (_, modulated) = make_dataset(&[subject(15.0, 60.0, 3)], &ExtractConfig::default()).unwrap();
    let (_, silent) = make_dataset(&[flat], &ExtractConfig::default()).unwrap();
    assert_eq!(modulated.flagged, 0);
    assert_eq!(silent.flagged, silent.total - silent.excluded_no_reference);
    assert_eq!(silent.per_channel[2], 0);
}
