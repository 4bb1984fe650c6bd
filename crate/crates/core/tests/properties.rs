//! Property-based invariants across modules.

use proptest::prelude::*;

use fdp_envelopes::harness::io::{read_pvalues_csv, write_batch_csv};
use fdp_envelopes::models::{gen_gaussian_topk, replication_rng, GaussianLocationConfig};
use fdp_envelopes::numerics::{h_eval, h_inverse, kr_factor, kru_factor, KruKind, KruTable, ToleranceConfig};
use fdp_envelopes::preordered::{lf_select, preordered_envelope, PreorderedData};
use fdp_envelopes::topk::{topk_adaptive_envelope, topk_envelope, PValueBatch};
use fdp_envelopes::{interpolate, Method};

fn pvalues(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![0.0..=1.0f64, Just(0.5), Just(1.0), 0.0..0.01f64], 1..max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn h_inverse_roundtrip(logy in -6.0..6.0f64) {
        let y = 10f64.powf(logy);
        let lam = h_inverse(y, ToleranceConfig::default()).unwrap();
        prop_assert!((h_eval(lam).unwrap() - y).abs() <= 1e-9 * y.max(1.0));
        prop_assert!(1.0 + (2.0 * y).sqrt() <= lam && lam <= (1.0 + (y / 2.0).sqrt()).powi(2));
    }

    #[test]
    fn x_times_h_inverse_is_nondecreasing(c in 1e-3..1e3f64, lx in -3.0..5.9f64, step in 1e-3..0.1f64) {
        let tol = ToleranceConfig::default();
        let f = |x: f64| x * h_inverse(c / x, tol).unwrap();
        let x = 10f64.powf(lx);
        prop_assert!(f(x * 10f64.powf(step)) >= f(x) * (1.0 - 1e-12));
    }

    #[test]
    fn factors_decrease_in_delta(d in 0.01..0.3f64, b in 0.05..2.0f64, a in 1u64..50) {
        let d2 = d * 1.01;
        prop_assert!(kr_factor(d2).unwrap() < kr_factor(d).unwrap());
        let da = |d: f64| d / (std::f64::consts::PI.powi(2) / 6.0 * (a * a) as f64);
        prop_assert!(kru_factor(a, da(d2), b).unwrap() < kru_factor(a, da(d), b).unwrap());
    }

    #[test]
    fn interpolation_never_loosens(p in pvalues(60), mi in 0usize..5) {
        let method = Method::TOPK[mi];
        let batch = PValueBatch::new(p, None).unwrap();
        let raw = topk_envelope(method, &batch, 0.2, batch.m() as f64).unwrap();
        let sizes = batch.sorted().path_sizes();
        let it = interpolate(&raw, &sizes).unwrap();
        for (a, b) in it.bounds.iter().zip(&raw.bounds) {
            prop_assert!(a <= b && *a >= 0.0);
        }
    }

    #[test]
    fn adaptive_never_loosens(p in pvalues(60), mi in 0usize..5) {
        let method = Method::TOPK[mi];
        let batch = PValueBatch::new(p, None).unwrap();
        let raw = topk_envelope(method, &batch, 0.2, batch.m() as f64).unwrap();
        let ad = topk_adaptive_envelope(method, &batch, 0.2).unwrap();
        for (a, b) in ad.bounds.iter().zip(&raw.bounds) {
            prop_assert!(a <= b, "{method}: {a} > {b}");
        }
    }

    #[test]
    fn kru_table_matches_brute_force(
        b in 0.1..2.0f64,
        delta in 0.05..0.5f64,
        offset in 0.0..50.0f64,
        denom in 1usize..400,
    ) {
        let mut t = KruTable::new(KruKind::Preordered { b }, delta).unwrap();
        let fast = t.minimize(1.0, offset, denom as f64, usize::MAX);
        let brute = (1..=4 * denom.max(50))
            .map(|a| t.factor(a) * (a as f64 + offset) / denom as f64)
            .fold(f64::INFINITY, f64::min)
            .min(1.0);
        prop_assert!((fast - brute).abs() <= 1e-12 * brute, "{fast} vs {brute}");
    }

    #[test]
    fn lf_selection_monotone_in_alpha(p in pvalues(80), a1 in 0.01..0.9f64, bump in 0.0..0.09f64) {
        let data = PreorderedData::new(p, 0.5, 0.5, None).unwrap();
        let lo = lf_select(&data, a1).unwrap();
        let hi = lf_select(&data, a1 + bump).unwrap();
        prop_assert!(lo.k_hat <= hi.k_hat && lo.r_hat <= hi.r_hat);
    }

    #[test]
    fn preordered_envelopes_in_unit_interval(p in pvalues(80), s in 0.05..0.5f64) {
        let data = PreorderedData::new(p, s, 0.5, None).unwrap();
        for m in [Method::Freedman, Method::Kr, Method::Kru] {
            let env = preordered_envelope(m, &data, 0.25).unwrap();
            prop_assert!(env.bounds.iter().all(|b| (0.0..=1.0).contains(b)));
        }
    }

    #[test]
    fn csv_roundtrip_is_bit_exact(p in pvalues(50), with_labels in any::<bool>()) {
        let labels = with_labels.then(|| p.iter().map(|x| *x < 0.3).collect());
        let batch = PValueBatch::new(p, labels).unwrap();
        let mut buf = Vec::new();
        write_batch_csv(&batch, &mut buf).unwrap();
        prop_assert_eq!(read_pvalues_csv(buf.as_slice()).unwrap(), batch);
    }

    #[test]
    fn generation_is_deterministic(seed in any::<u64>(), stream in 0u64..1000) {
        let cfg = GaussianLocationConfig::dense(50, 0.5, 1.5).unwrap();
        let a = gen_gaussian_topk(&cfg, &mut replication_rng(seed, stream)).unwrap();
        let b = gen_gaussian_topk(&cfg, &mut replication_rng(seed, stream)).unwrap();
        prop_assert_eq!(a, b);
    }
}
