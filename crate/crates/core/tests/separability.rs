use ftnpda::isi::{build_isi_matrix, Domain, IsiMatrix, TapSource};
use ftnpda::pulse::{isi_taps, PulseConfig};
use ftnpda::separability::{
    filter_margin, gaussian_margin, gaussian_margins, linear_margins, margin_report,
    margin_report_for, MarginSettings,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn gram(tau: f64, n: usize) -> IsiMatrix {
    let taps = isi_taps(&PulseConfig::new(0.3), tau).unwrap();
    build_isi_matrix(TapSource::Gram(&taps), n, tau, 1.0 / tau).unwrap()
}

#[test]
fn orthogonal_channel_margins() {
    let g = gram(1.0, 10);
    assert!(linear_margins(&g).iter().all(|d| *d == 1.0));
    for sigma2 in [1.0, 0.1] {
        let gm = gaussian_margins(&g, sigma2).unwrap();
        // c = e_k / sigma2, no interference survives the projection
        assert!(gm.margins.iter().all(|m| (m - 1.0 / sigma2).abs() < 1e-12));
        let mut order = gm.order.clone();
        order.sort();
        assert_eq!(order, (0..10).collect::<Vec<_>>());
    }
}

#[test]
fn unit_filter_reduces_to_linear_margin() {
    for tau in [0.7, 0.8, 0.9] {
        let n = 100;
        let g = gram(tau, n);
        let span = (1..n).rev().find(|d| g.lag(*d as isize) != 0.0).unwrap();
        let delta = linear_margins(&g);
        for (k, dk) in delta.iter().enumerate() {
            let mut e = DVector::zeros(n);
            e[k] = 1.0;
            let ahead: Vec<usize> = (k + 1..=(k + span).min(n - 1)).collect();
            assert!((filter_margin(&g, k, &e, &ahead) - dk).abs() < 1e-12, "tau={tau} k={k}");
        }
    }
}

#[test]
fn linear_margin_shrinks_with_compression() {
    let t = margin_report(0.3, &[0.6, 0.7, 0.8, 0.9, 1.0], &[0.0], 100).unwrap();
    let ave: Vec<f64> = t.calibrated().map(|r| r.delta_ave).collect();
    assert!(ave.windows(2).all(|w| w[0] < w[1]), "{ave:?}");
    assert_eq!(*ave.last().unwrap(), 1.0);
}

#[test]
fn report_covers_both_domains_and_conventions() {
    let t = margin_report(0.3, &[0.8], &[0.0, 4.0], 40).unwrap();
    assert_eq!(t.reports.len(), 4);
    assert!(t.reports[0].settings.is_calibrated());
    assert_eq!(t.reports[0].snr_list(), vec![0.0, 4.0]);
    let mut csv = Vec::new();
    t.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1 + 4 * 2);
    assert!(t.reports.iter().any(|r| r.settings.domain == Domain::Convolution));
}

#[test]
fn margins_are_insensitive_to_the_tap_support() {
    let short = MarginSettings::calibrated(0.3);
    let mut long = short;
    long.pulse = PulseConfig::new(0.3).with_truncation(1e-6, 80);
    for tau in [0.6, 0.7, 0.8, 0.9] {
        let a = margin_report_for(&short, tau, &[0.0, 8.0], 100).unwrap();
        let b = margin_report_for(&long, tau, &[0.0, 8.0], 100).unwrap();
        assert!((a.delta_ave - b.delta_ave).abs() < 0.01, "tau={tau}");
        assert!((a.delta_max - b.delta_max).abs() < 0.01, "tau={tau}");
        for (ra, rb) in a.gaussian.iter().zip(&b.gaussian) {
            assert!((ra.ave - rb.ave).abs() < 0.01, "tau={tau}");
            assert!((ra.max - rb.max).abs() < 0.01, "tau={tau}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn incremental_margins_match_direct_solves(
        v in prop::collection::vec(-1.0f64..1.0, 64),
        sigma2 in 0.05f64..2.0,
    ) {
        let mut m = DMatrix::from_row_slice(8, 8, &v);
        for i in 0..8 {
            m[(i, i)] += 2.0;
        }
        let g = IsiMatrix::from_dense(m, Domain::Convolution).unwrap();
        let gm = gaussian_margins(&g, sigma2).unwrap();
        for (t, k) in gm.order.iter().enumerate() {
            let direct = gaussian_margin(&g, *k, &gm.order[..t], sigma2).unwrap();
            prop_assert!((gm.margins[t] - direct).abs() < 1e-8 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn banded_margins_match_direct_solves(tau in 0.6f64..1.0, snr_db in 0.0f64..8.0) {
        let g = gram(tau, 24);
        let sigma2 = 10f64.powf(-snr_db / 10.0);
        let gm = gaussian_margins(&g, sigma2).unwrap();
        for (t, k) in gm.order.iter().enumerate() {
            let direct = gaussian_margin(&g, *k, &gm.order[..t], sigma2).unwrap();
            prop_assert!((gm.margins[t] - direct).abs() < 1e-7 * (1.0 + direct.abs()));
        }
    }
}
