mod common;

use common::{bpsk, c, gaussian_matrix, rng};
use irs_bss::metrics::{aggregate, ber, nmse, zf_sinr, UserMetrics};
use irs_bss::model::CMatrix;
use irs_bss::Complex64;
use nalgebra::DVector;
use proptest::prelude::*;

#[test]
fn orthogonal_channels_have_no_interference() {
    let ch = CMatrix::from_diagonal(&DVector::from_vec(vec![c(2.0, 0.0), c(0.0, 0.5)]));
    let sinr = zf_sinr(&ch, &ch, 1.5, 0.1).unwrap();
    for (j, g) in [4.0f64, 0.25].iter().enumerate() {
        assert!((sinr[j] - 10.0 * (1.5 * g / 0.1).log10()).abs() < 1e-12);
    }
}

#[test]
fn imperfect_estimates_lose_sinr() {
    let mut r = rng(1);
    for _ in 0..20 {
        let ch = gaussian_matrix(&mut r, 8, 3);
        let perturbed = &ch + gaussian_matrix(&mut r, 8, 3) * c(0.01, 0.0);
        let perfect = zf_sinr(&ch, &ch, 1.0, 0.01).unwrap();
        let noisy = zf_sinr(&perturbed, &ch, 1.0, 0.01).unwrap();
        for (p, q) in perfect.iter().zip(&noisy) {
            assert!(q < p, "{q} vs {p}");
        }
    }
}

#[test]
fn ber_examples() {
    let mut r = rng(2);
    let a = bpsk(&mut r, 10_000);
    let flipped: Vec<Complex64> = a.iter().map(|z| -z).collect();
    assert_eq!(ber(&a, &a).unwrap(), 0.0);
    // the phase ambiguity is absorbed by the alignment scale
    let aligned: Vec<Complex64> = flipped.iter().map(|z| z * -1.0).collect();
    assert_eq!(ber(&aligned, &a).unwrap(), 0.0);
    let random = bpsk(&mut r, 10_000);
    assert!((ber(&random, &a).unwrap() - 0.5).abs() < 0.02);
    assert!(ber(&a[..3], &a).is_err());
}

#[test]
fn single_user_summary_collapses() {
    let t = aggregate(&[UserMetrics { nmse: 0.2, sinr_db: 7.0, ber: 0.01 }]).unwrap();
    assert_eq!((t.nmse.min, t.nmse.mean, t.nmse.max), (0.2, 0.2, 0.2));
    assert_eq!(t.sinr_db.mean, 7.0);
}

fn users() -> impl Strategy<Value = Vec<UserMetrics>> {
    prop::collection::vec((0.0f64..10.0, -20.0f64..40.0, 0.0f64..0.5), 1..8)
        .prop_map(|v| v.into_iter().map(|(nmse, sinr_db, ber)| UserMetrics { nmse, sinr_db, ber }).collect())
}

proptest! {
    #[test]
    fn summaries_are_ordered(per_user in users()) {
        let t = aggregate(&per_user).unwrap();
        for s in [t.nmse, t.sinr_db, t.ber] {
            prop_assert!(s.min <= s.mean + 1e-12 && s.mean <= s.max + 1e-12);
        }
        prop_assert_eq!(t.per_user, per_user);
    }

    #[test]
    fn nmse_is_rotation_invariant(seed in 0u64..10_000, theta in -4.0f64..4.0) {
        let mut r = rng(seed);
        let h = gaussian_matrix(&mut r, 6, 1).column(0).into_owned();
        let h_hat = &h + gaussian_matrix(&mut r, 6, 1).column(0) * c(0.2, 0.0);
        let q = gaussian_matrix(&mut r, 6, 6).qr().q();
        let rot = Complex64::from_polar(1.0, theta);
        let base = nmse(&h_hat, &h).unwrap();
        let turned = nmse(&(&q * &h_hat * rot), &(&q * &h * rot)).unwrap();
        prop_assert!((base - turned).abs() < 1e-10 * base.max(1e-12));
        prop_assert!(base >= 0.0);
    }

    #[test]
    fn separated_noiseless_stream_has_no_errors(seed in 0u64..10_000, scale in 0.1f64..10.0) {
        let a = bpsk(&mut rng(seed), 500);
        let s: Vec<Complex64> = a.iter().map(|z| z * scale).collect();
        prop_assert_eq!(ber(&s, &a).unwrap(), 0.0);
    }
}
