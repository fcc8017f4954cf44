use ftnpda::detect::{
    detection_order, mlse_bruteforce, modified_pda_detect, pda_detect, posterior_from_llr,
    successive_baseline, PdaState, DEFAULT_SWEEPS,
};
use ftnpda::isi::{Domain, IsiMatrix};
use ftnpda::separability::gaussian_margins;
use ftnpda::sim::{block_rng, draw_block, observe, SweepConfig};
use ftnpda::validate::noise_free_successive;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn channel(tau: f64, n: usize) -> IsiMatrix {
    SweepConfig::new(0.3, tau, n, vec![]).channel().unwrap()
}

fn dense(n: usize) -> impl Strategy<Value = IsiMatrix> {
    prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |v| {
        let mut m = DMatrix::from_row_slice(n, n, &v);
        for i in 0..n {
            m[(i, i)] += 1.5;
        }
        IsiMatrix::from_dense(m, Domain::Convolution).unwrap()
    })
}

/// Exhaustive search in plain binary counting order with the residual norm
/// evaluated directly.
fn mlse_by_counting(y: &[f64], g: &IsiMatrix) -> Vec<f64> {
    let n = g.n();
    let yv = DVector::from_column_slice(y);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for code in 0u32..(1 << n) {
        // bit n-1-i set means a[i] = +1, so counting order is lexicographic
        let a: Vec<f64> = (0..n)
            .map(|i| if code >> (n - 1 - i) & 1 == 1 { 1.0 } else { -1.0 })
            .collect();
        let r = &yv - g.entries() * DVector::from_column_slice(&a);
        let cost = r.norm_squared();
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, a));
        }
    }
    best.unwrap().1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn posteriors_and_llrs_are_consistent(
        g in dense(6),
        y in prop::collection::vec(-3.0f64..3.0, 6),
        sigma2 in 0.05f64..2.0,
    ) {
        let r = pda_detect(&y, &g, sigma2, 3).unwrap();
        for k in 0..6 {
            let p = r.posteriors[k];
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!((p - posterior_from_llr(r.llr[k])).abs() < 1e-12);
            prop_assert_eq!(r.hard[k], if 2.0 * p - 1.0 >= 0.0 { 1.0 } else { -1.0 });
        }
        prop_assert_eq!(r.update_count, 18);
    }

    #[test]
    fn incremental_covariance_matches_assembly(
        g in dense(7),
        y in prop::collection::vec(-3.0f64..3.0, 7),
        sigma2 in 0.1f64..2.0,
        visits in prop::collection::vec(0usize..7, 1..20),
    ) {
        let mut st = PdaState::new(&g, sigma2).unwrap();
        for k in visits {
            st.update(&g, &y, k).unwrap();
            let assembled = st.assemble_covariance(&g);
            prop_assert!((st.covariance() - &assembled).amax() < 1e-8);
            let min_eig = st.conditional_covariance(&g, k).symmetric_eigenvalues().min();
            prop_assert!(min_eig >= sigma2 - 1e-9);
            let var = st.variances()[k];
            prop_assert!((0.0..=1.0).contains(&var));
        }
    }

    #[test]
    fn detection_is_deterministic(seed in 0u64..1000) {
        let g = channel(0.8, 10);
        let (a, z) = draw_block(10, &mut block_rng(seed, 0));
        let y = observe(&g, &a, &z, 0.2);
        prop_assert_eq!(pda_detect(&y, &g, 0.2, 8).unwrap(), pda_detect(&y, &g, 0.2, 8).unwrap());
    }

    #[test]
    fn zero_radius_equals_plain_pda(seed in 0u64..1000) {
        let g = channel(0.7, 10);
        let (a, z) = draw_block(10, &mut block_rng(seed, 1));
        let y = observe(&g, &a, &z, 0.3);
        prop_assert_eq!(
            modified_pda_detect(&y, &g, 0.3, 8, 0.0).unwrap(),
            pda_detect(&y, &g, 0.3, 8).unwrap()
        );
    }

    #[test]
    fn confidence_region_only_saves_updates(seed in 0u64..1000, eps in 0.01f64..0.49) {
        let g = channel(0.8, 12);
        let (a, z) = draw_block(12, &mut block_rng(seed, 2));
        let y = observe(&g, &a, &z, 0.1);
        let r = modified_pda_detect(&y, &g, 0.1, 8, eps).unwrap();
        prop_assert!(r.update_count <= 8 * 12);
        prop_assert!(r.posteriors.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn mlse_matches_counting_search(seed in 0u64..1000, tau in prop::sample::select(vec![0.7, 0.8])) {
        let g = channel(tau, 8);
        let (a, z) = draw_block(8, &mut block_rng(seed, 3));
        let y = observe(&g, &a, &z, 0.5);
        prop_assert_eq!(mlse_bruteforce(&y, &g).unwrap(), mlse_by_counting(&y, &g));
    }

    #[test]
    fn mlse_inverts_noise_free_blocks(seed in 0u64..1000, tau in prop::sample::select(vec![0.6, 0.7, 0.8, 0.9, 1.0])) {
        let g = channel(tau, 10);
        let (a, _) = draw_block(10, &mut block_rng(seed, 4));
        prop_assert_eq!(mlse_bruteforce(&g.apply(&a), &g).unwrap(), a);
    }
}

#[test]
fn nyquist_pda_is_sign_detection() {
    let g = channel(1.0, 16);
    for i in 0..20 {
        let (a, z) = draw_block(16, &mut block_rng(9, i));
        let y = observe(&g, &a, &z, 0.7);
        let sign: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
        assert_eq!(pda_detect(&y, &g, 0.7, 1).unwrap().hard, sign);
        assert_eq!(successive_baseline(&y, &g).unwrap(), sign);
    }
}

#[test]
fn pda_recovers_noise_free_blocks() {
    let g = channel(0.8, 12);
    for i in 0..20 {
        let (a, _) = draw_block(12, &mut block_rng(5, i));
        let r = pda_detect(&g.apply(&a), &g, 1e-8, DEFAULT_SWEEPS).unwrap();
        assert_eq!(r.hard, a);
    }
}

#[test]
fn successive_succeeds_where_linear_margins_are_positive() {
    for (tau, separable, success) in noise_free_successive(24, 50, 3).unwrap() {
        if separable {
            assert!(success, "tau={tau}: positive margins but a decoding error");
        }
    }
}

#[test]
fn margin_order_is_the_detection_order() {
    let g = channel(0.8, 20);
    for sigma2 in [1.0, 0.25] {
        assert_eq!(
            gaussian_margins(&g, sigma2).unwrap().order,
            detection_order(&g, sigma2).unwrap()
        );
    }
}

#[test]
fn frozen_symbols_stay_out_of_the_active_set() {
    let g = channel(0.8, 12);
    let (a, z) = draw_block(12, &mut block_rng(1, 0));
    let y = observe(&g, &a, &z, 0.05);
    let mut st = PdaState::new(&g, 0.05).unwrap();
    st.sweep(&g, &y).unwrap();
    st.freeze_confident(&g, 0.4);
    let frozen: Vec<usize> = (0..12).filter(|k| st.is_frozen(*k)).collect();
    assert!(!frozen.is_empty());
    let order = st.sweep(&g, &y).unwrap();
    assert!(order.iter().all(|k| !frozen.contains(k)));
    for k in frozen {
        assert_eq!(st.variances()[k], 0.0);
    }
}
