use ggml_precoding::channel::*;
use ggml_precoding::linalg::RngStream;
use proptest::prelude::*;

fn row_power(h: &ChannelRealization<f64>) -> f64 {
    h.h.as_slice().iter().map(|z| z.norm_sqr()).sum()
}

#[test]
fn average_gain_matches_antenna_count() {
    let n = 16;
    let cfg = SystemConfig::from_snr_db(n, 1, 1, 10.0);
    let params = SVParams::default();
    let mut rng = RngStream::new(77);
    let draws = 10_000;
    let mut total = 0.0;
    for _ in 0..draws {
        let h: ChannelRealization<f64> = gen_sv_channel(&cfg, &params, &mut rng).unwrap();
        total += row_power(&h);
    }
    let mean = total / draws as f64;
    assert!(
        (0.95 * n as f64..=1.05 * n as f64).contains(&mean),
        "mean ‖h‖² = {mean}"
    );
}

#[test]
fn error_power_ratio_matches_delta() {
    let cfg = SystemConfig::from_snr_db(32, 4, 4, 10.0);
    let mut rng = RngStream::new(5);
    for scaling in [ErrorScaling::PerElement, ErrorScaling::Average] {
        for delta in [0.05, 0.1, 0.3] {
            let spec = ImperfectChannelSpec {
                delta,
                scaling,
                per_user_epsilon: None,
            };
            let (mut e_pow, mut h_pow) = (0.0, 0.0);
            for _ in 0..1000 {
                let h: ChannelRealization<f64> = gen_sv_channel(&cfg, &SVParams::default(), &mut rng).unwrap();
                let (_, e) = apply_csi_error(&h, &spec, &mut rng).unwrap();
                e_pow += e.as_slice().iter().map(|z| z.norm_sqr()).sum::<f64>();
                h_pow += row_power(&h);
            }
            let ratio = e_pow / h_pow;
            assert!((ratio / delta - 1.0).abs() <= 0.02, "{scaling:?} δ={delta}: ratio {ratio}");
        }
    }
}

#[test]
fn calibrated_radius_has_target_outage() {
    let cfg = SystemConfig::from_snr_db(16, 2, 2, 10.0);
    let mut rng = RngStream::new(31);
    let h: ChannelRealization<f64> = gen_sv_channel(&cfg, &SVParams::default(), &mut rng).unwrap();
    let spec = ImperfectChannelSpec::new(0.1);
    let eps = calibrate_epsilon(&spec, &h, 10_000, 0.05, &mut rng).unwrap();
    // errors drawn around `h` share the magnitudes the radii were calibrated on
    let trials = 10_000;
    let mut exceed = vec![0usize; 2];
    for _ in 0..trials {
        let (_, e) = apply_csi_error(&h, &spec, &mut rng).unwrap();
        for (k, count) in exceed.iter_mut().enumerate() {
            let norm = e.row_slice(k).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > eps[k] {
                *count += 1;
            }
        }
    }
    for c in exceed {
        let rate = c as f64 / trials as f64;
        assert!((0.03..=0.07).contains(&rate), "outage {rate}");
    }
}

#[test]
fn radius_grows_with_delta() {
    let cfg = SystemConfig::from_snr_db(16, 2, 3, 10.0);
    let h: ChannelRealization<f64> = gen_sv_channel(&cfg, &SVParams::default(), &mut RngStream::new(2)).unwrap();
    let mut prev = vec![0.0; 3];
    for delta in [0.0, 0.05, 0.1, 0.2, 0.3] {
        // common random numbers make the comparison exact
        let eps = calibrate_epsilon(&ImperfectChannelSpec::new(delta), &h, 2000, 0.05, &mut RngStream::new(9)).unwrap();
        for (e, p) in eps.iter().zip(&prev) {
            assert!(e >= p);
        }
        prev = eps;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn estimate_plus_error_reproduces_the_channel(seed in any::<u64>(), delta in 0.0f64..2.0) {
        let cfg = SystemConfig::from_snr_db(8, 2, 2, 0.0);
        let mut rng = RngStream::new(seed);
        let h: ChannelRealization<f64> = gen_sv_channel(&cfg, &SVParams::default(), &mut rng).unwrap();
        let (hat, e) = apply_csi_error(&h, &ImperfectChannelSpec::new(delta), &mut rng).unwrap();
        for ((a, b), c) in hat.h.as_slice().iter().zip(e.as_slice()).zip(h.h.as_slice()) {
            let s = a + b;
            for (s, c, x, y) in [(s.re, c.re, a.re, b.re), (s.im, c.im, a.im, b.im)] {
                // bit-exact whenever the error stays within the entry's binade
                if y.abs() <= c.abs() && x.abs() <= 2.0 * c.abs() {
                    prop_assert_eq!(s.to_bits(), c.to_bits());
                } else {
                    prop_assert!((s - c).abs() <= f64::EPSILON * x.abs().max(y.abs()));
                }
            }
        }
    }

    #[test]
    fn zero_delta_keeps_the_channel(seed in any::<u64>()) {
        let cfg = SystemConfig::from_snr_db(8, 2, 2, 0.0);
        let mut rng = RngStream::new(seed);
        let h: ChannelRealization<f64> = gen_sv_channel(&cfg, &SVParams::default(), &mut rng).unwrap();
        let (hat, e) = apply_csi_error(&h, &ImperfectChannelSpec::new(0.0), &mut rng).unwrap();
        prop_assert_eq!(&hat.h, &h.h);
        prop_assert!(e.as_slice().iter().all(|z| z.norm_sqr() == 0.0));
    }

    #[test]
    fn documents_roundtrip(seed in any::<u64>(), n in 4usize..12, k in 1usize..4) {
        let cfg = SystemConfig::from_snr_db(n, k, k, 0.0);
        let h: ChannelRealization<f64> = gen_sv_channel(&cfg, &SVParams::default(), &mut RngStream::new(seed)).unwrap();
        let json = h.to_json().unwrap();
        prop_assert_eq!(&ChannelRealization::<f64>::from_json(&json).unwrap(), &h);
        let bytes = h.to_bytes();
        prop_assert_eq!(&ChannelRealization::<f64>::read_binary(&bytes[..]).unwrap(), &h);
    }

    #[test]
    fn array_response_has_unit_norm(phi in -3.2f64..3.2, n in 1usize..64) {
        let a = array_response::<f64>(phi, n);
        let p: f64 = a.iter().map(|z| z.norm_sqr()).sum();
        prop_assert!((p - 1.0).abs() < 1e-12);
    }
}
