mod common;

use common::{config, gaussian_matrix};
use ggml_precoding::channel::{gen_sv_channel, SVParams, SystemConfig};
use ggml_precoding::kan::{KanSpec, NetworkInit};
use ggml_precoding::linalg::{CMatrix, RngStream};
use ggml_precoding::metrics::{user_rates, PrecoderPair};
use ggml_precoding::optimizer::*;
use num_complex::Complex;

fn sv_channel(cfg: &SystemConfig, seed: u64) -> CMatrix<f64> {
    gen_sv_channel::<f64>(cfg, &SVParams::default(), &mut RngStream::new(seed)).unwrap().h
}

fn short(iterations: usize) -> GgmlConfig {
    GgmlConfig {
        iterations,
        ..GgmlConfig::default()
    }
}

fn zero_spec() -> KanSpec {
    KanSpec {
        init: NetworkInit::Zero,
        ..KanSpec::default()
    }
}

#[test]
fn init_nulls_interference_and_meets_power() {
    let cfg = SystemConfig::from_snr_db(16, 4, 3, 10.0);
    let h = sv_channel(&cfg, 3);
    let pair = init_precoders(&h, &cfg, &mut RngStream::new(9)).unwrap();
    assert!(pair.modulus_residual() == 0.0 || pair.modulus_residual() < 1e-15);
    assert!(pair.power_residual() < 1e-9);
    let g = h.matmul(&pair.combined());
    for k in 0..3 {
        let hk_norm = h.row_slice(k).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for m in (0..3).filter(|&m| m != k) {
            assert!(g[(k, m)].norm() <= 1e-9 * hk_norm, "leak {k}->{m}: {}", g[(k, m)].norm());
        }
    }
}

#[test]
fn ggml_keeps_constraints_every_iteration() {
    let cfg = SystemConfig::from_snr_db(16, 3, 2, 10.0);
    let h = sv_channel(&cfg, 4);
    let gcfg = short(30);
    let (pair, trace) = run_ggml(&h, &cfg, &gcfg).unwrap();
    assert_eq!(trace.records.len(), 31);
    assert!(trace.records.iter().all(|r| r.power_residual <= 1e-9));
    assert!(pair.modulus_residual() <= 1e-12);
    // every intermediate analog precoder is unit modulus as well
    for l in 1..=5 {
        let (p, _) = run_ggml(&h, &cfg, &short(l)).unwrap();
        assert!(p.modulus_residual() <= 1e-12);
        assert!(p.power_residual() <= 1e-9);
    }
}

#[test]
fn best_so_far_is_monotone() {
    let cfg = SystemConfig::from_snr_db(16, 2, 2, 10.0);
    let h = sv_channel(&cfg, 5);
    let (_, trace) = run_ggml(&h, &cfg, &short(60)).unwrap();
    for w in trace.records.windows(2) {
        assert!(w[1].best_sum_rate >= w[0].best_sum_rate);
    }
    let best = trace.best_record().unwrap();
    let max = trace.records.iter().map(|r| r.weighted_sum_rate).fold(f64::MIN, f64::max);
    assert_eq!(best.weighted_sum_rate, max);
}

#[test]
fn track_best_returns_best_iterate() {
    let cfg = SystemConfig::from_snr_db(16, 2, 2, 10.0);
    let h = sv_channel(&cfg, 6);
    let (best, trace) = run_ggml(&h, &cfg, &short(40)).unwrap();
    let r: f64 = user_rates(&h, &best, cfg.noise_var).unwrap().iter().sum();
    assert!((r - trace.best_record().unwrap().sum_rate).abs() < 1e-9);
    let last_cfg = GgmlConfig {
        track_best: false,
        ..short(40)
    };
    let (last, trace) = run_ggml(&h, &cfg, &last_cfg).unwrap();
    let r: f64 = user_rates(&h, &last, cfg.noise_var).unwrap().iter().sum();
    assert!((r - trace.final_record().unwrap().sum_rate).abs() < 1e-9);
}

#[test]
fn zero_networks_reproduce_the_initialization() {
    let cfg = SystemConfig::from_snr_db(12, 3, 2, 5.0);
    let h = sv_channel(&cfg, 7);
    let gcfg = GgmlConfig {
        iterations: 25,
        dpn: zero_spec(),
        apn: KanSpec {
            hidden: vec![DEFAULT_APN_HIDDEN],
            ..zero_spec()
        },
        meta_updates: false,
        track_best: false,
        ..GgmlConfig::default()
    };
    let (pair, _) = run_ggml(&h, &cfg, &gcfg).unwrap();
    let init = init_precoders(&h, &cfg, &mut RngStream::new(gcfg.seed).child(0)).unwrap();
    let init = scale_to_power(&init).unwrap();
    // projection only renormalizes cos/sin phasors at the ulp level
    assert!(pair.f.try_sub(&init.f).unwrap().max_abs() <= 1e-15);
    assert!(pair.d.try_sub(&init.d).unwrap().max_abs() <= 1e-12);
}

#[test]
fn zero_network_steps_leave_variables() {
    let cfg = SystemConfig::from_snr_db(8, 2, 2, 10.0);
    let h = sv_channel(&cfg, 8);
    let pair = init_precoders(&h, &cfg, &mut RngStream::new(1)).unwrap();
    let gcfg = GgmlConfig::default();
    let mut rng = RngStream::new(2);
    let mut apn = UpdateNetwork::<f64>::new(NetworkLayout::Dense, 8, 2, &zero_spec(), &mut rng).unwrap();
    let mut dpn = UpdateNetwork::<f64>::new(NetworkLayout::Dense, 2, 2, &zero_spec(), &mut rng).unwrap();
    let g = gaussian_matrix(8, 2, &mut rng);
    let (after, pre, zeros) = update_analog(&pair, &g, &mut apn, gcfg.analog_step()).unwrap();
    assert_eq!(zeros, 0);
    assert_eq!(pre, pair.f);
    assert_eq!(after.f, pair.f);
    let (proj, _) = project_unit_modulus(&after.f);
    assert_eq!(proj, after.f);
    let gd = gaussian_matrix(2, 2, &mut rng);
    let (after, _) = update_digital(&pair, &gd, &mut dpn, gcfg.digital_step()).unwrap();
    assert!(after.d.try_sub(&pair.d).unwrap().max_abs() <= 1e-12);
    assert!(after.power_residual() <= 1e-9);
}

#[test]
fn runs_are_deterministic() {
    let cfg = SystemConfig::from_snr_db(16, 2, 2, 10.0);
    let h = sv_channel(&cfg, 10);
    let gcfg = GgmlConfig {
        seed: 42,
        ..short(30)
    };
    let (a, ta) = run_ggml(&h, &cfg, &gcfg).unwrap();
    let (b, tb) = run_ggml(&h, &cfg, &gcfg).unwrap();
    assert_eq!(a, b);
    let key = |t: &IterationTrace| t.records.iter().map(|r| (r.sum_rate, r.loss)).collect::<Vec<_>>();
    assert_eq!(key(&ta), key(&tb));
    let other = GgmlConfig { seed: 43, ..gcfg };
    let (c, _) = run_ggml(&h, &cfg, &other).unwrap();
    assert_ne!(a, c);
}

#[test]
fn single_iteration_is_feasible() {
    let cfg = SystemConfig::from_snr_db(8, 2, 2, 0.0);
    let h = sv_channel(&cfg, 11);
    let (pair, trace) = run_ggml(&h, &cfg, &short(1)).unwrap();
    assert_eq!(trace.records.len(), 2);
    assert!(pair.modulus_residual() <= 1e-12);
    assert!(pair.power_residual() <= 1e-9);
}

#[test]
fn ggml_beats_pga_on_small_systems() {
    let cfg = SystemConfig::from_snr_db(16, 2, 2, 10.0);
    let (mut ggml, mut pga) = (0.0, 0.0);
    for r in 0..20 {
        let h = sv_channel(&cfg, 2000 + r);
        let (p, _) = run_ggml(&h, &cfg, &GgmlConfig { seed: r, ..GgmlConfig::default() }).unwrap();
        ggml += user_rates(&h, &p, cfg.noise_var).unwrap().iter().sum::<f64>() / 2.0;
        let (q, _) = run_pga_baseline(&h, &cfg, &PgaConfig { seed: r, ..PgaConfig::default() }).unwrap();
        pga += user_rates(&h, &q, cfg.noise_var).unwrap().iter().sum::<f64>() / 2.0;
    }
    assert!(ggml >= pga, "GGML {} < PGA {}", ggml / 20.0, pga / 20.0);
}

#[test]
fn pga_zero_step_freezes_the_start() {
    let cfg = SystemConfig::from_snr_db(8, 2, 2, 10.0);
    let h = sv_channel(&cfg, 12);
    let pcfg = PgaConfig {
        iterations: 20,
        step_digital: 0.0,
        step_analog: 0.0,
        track_best: false,
        ..PgaConfig::default()
    };
    let (pair, trace) = run_pga_baseline(&h, &cfg, &pcfg).unwrap();
    let init = init_precoders(&h, &cfg, &mut RngStream::new(0).child(0)).unwrap();
    assert_eq!(pair.f, init.f);
    assert!(pair.d.try_sub(&init.d).unwrap().max_abs() <= 1e-12);
    assert!(trace.records.iter().all(|r| r.power_residual <= 1e-9));
}

#[test]
fn pga_keeps_constraints() {
    let cfg = SystemConfig::from_snr_db(16, 3, 3, 10.0);
    let h = sv_channel(&cfg, 13);
    let (pair, trace) = run_pga_baseline(&h, &cfg, &PgaConfig { iterations: 50, ..PgaConfig::default() }).unwrap();
    assert!(pair.modulus_residual() <= 1e-12);
    assert!(trace.records.iter().all(|r| r.power_residual <= 1e-9));
}

#[test]
fn single_user_scalar_reaches_capacity() {
    // |h| = 1 with an arbitrary phase: capacity log2(1 + P/σ²)
    let cfg = config(1, 1, 1, 0.25);
    let h = CMatrix::from_vec(1, 1, vec![Complex::from_polar(1.0, 0.9)]).unwrap();
    let (pair, _) = run_pga_baseline(&h, &cfg, &PgaConfig { iterations: 50, ..PgaConfig::default() }).unwrap();
    let r = user_rates(&h, &pair, cfg.noise_var).unwrap()[0];
    assert!((r - 5.0_f64.log2()).abs() <= 1e-3);
}

#[test]
fn wmmse_single_user_is_matched_filter() {
    let cfg = config(6, 6, 1, 0.5);
    let h = gaussian_matrix(1, 6, &mut RngStream::new(14));
    let out = run_wmmse_digital(&h, &cfg, 10).unwrap();
    let hn: f64 = h.row_slice(0).iter().map(|z| z.norm_sqr()).sum();
    assert!((out.rates[0] - (1.0 + hn / 0.5).log2()).abs() <= 1e-6);
    // V ∝ h^H: |<v, h^H>| = ‖v‖‖h‖
    let v = out.v.col(0);
    let ip: Complex<f64> = v.iter().zip(h.row_slice(0)).map(|(a, b)| a * b).sum();
    assert!((ip.norm() - hn.sqrt()).abs() <= 1e-9);
    assert!((out.v.frob_norm_sqr() - 1.0).abs() <= 1e-9);
}

#[test]
fn wmmse_is_monotone_and_uses_full_power() {
    let cfg = SystemConfig::from_snr_db(16, 16, 4, 10.0);
    for seed in 0..5 {
        let h = sv_channel(&cfg, 100 + seed);
        let out = run_wmmse_digital(&h, &cfg, 40).unwrap();
        assert!((out.v.frob_norm_sqr() - 1.0).abs() <= 1e-9);
        for w in out.history.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{} then {}", w[0], w[1]);
        }
    }
}

#[test]
fn invalid_configs_rejected() {
    let cfg = SystemConfig::from_snr_db(8, 2, 2, 10.0);
    let h = sv_channel(&cfg, 15);
    assert!(run_ggml(&h, &cfg, &short(0)).is_err());
    let bad = GgmlConfig {
        lr_digital: -1.0,
        ..GgmlConfig::default()
    };
    assert!(run_ggml(&h, &cfg, &bad).is_err());
    let wrong = SystemConfig::from_snr_db(9, 2, 2, 10.0);
    assert!(run_ggml(&h, &wrong, &short(3)).is_err());
    assert!(run_wmmse_digital(&h, &cfg, 0).is_err());
}

#[test]
fn trace_csv_has_fixed_header() {
    let cfg = SystemConfig::from_snr_db(8, 2, 2, 10.0);
    let h = sv_channel(&cfg, 16);
    let (_, trace) = run_ggml(&h, &cfg, &short(3)).unwrap();
    let csv = trace.to_csv_string();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), TRACE_CSV_HEADER);
    assert_eq!(lines.count(), 4);
}

#[test]
fn projection_counts_zero_entries() {
    let f = CMatrix::<f64>::zeros(2, 2);
    let (p, zeros) = project_unit_modulus(&f);
    assert_eq!(zeros, 4);
    assert!(p.as_slice().iter().all(|z| *z == Complex::new(1.0, 0.0)));
    let pair = PrecoderPair::new(p, CMatrix::identity(2), 4.0).unwrap();
    assert!(scale_to_power(&pair).unwrap().power_residual() < 1e-12);
}
