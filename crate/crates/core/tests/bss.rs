mod common;

use common::{bpsk_sources, c, gaussian_matrix, rng, row_instance};
use irs_bss::bss::{
    alignment_scale, candidate_set, deflate, denoised_alphabet, estimate_channel, estimate_channel_row,
    extract_signal, extract_vector, reduce_dimension, resolve_ambiguity, run_bss, BlockNoise, BssParams, CVector,
    Contrast, EstimateSet, NoiseMix, Resolution, RowNoise, StreamEstimate,
};
use irs_bss::extractor::Alphabet;
use irs_bss::metrics::nmse;
use irs_bss::model::{draw_channels, draw_signals, synthesize_rx, CMatrix, ScenarioConfig};
use irs_bss::par::Execution;
use irs_bss::Complex64;
use proptest::prelude::*;

fn reals(xs: &[f64]) -> Vec<Complex64> {
    xs.iter().map(|&x| c(x, 0.0)).collect()
}

fn params() -> BssParams {
    BssParams {
        exec: Execution::Sequential,
        ..BssParams::default()
    }
}

/// Full-grid contrast of every candidate built from the uncapped alphabets;
/// ties go to the smaller magnitude, then the earlier candidate.
fn exhaustive_row_oracle(row: &[Complex64], s: &[Complex64], p: &BssParams) -> Complex64 {
    let Contrast::Denoised { full, .. } = p.contrast else { panic!("denoised contrast expected") };
    let ya = denoised_alphabet(row, 0.0, &full).unwrap();
    let za = denoised_alphabet(s, 0.0, &full).unwrap();
    let cands = candidate_set(&ya, &za, p.candidate_tol).unwrap();
    let mut best: Option<(f64, Complex64)> = None;
    for q in cands {
        let r: Vec<Complex64> = row.iter().zip(s).map(|(y, z)| y - q * z).collect();
        let per = p.contrast.evaluate(&r, 0.0, Resolution::Full).unwrap().perimeter;
        let take = match best {
            None => true,
            Some((b, bq)) => {
                let tol = 1e-12 * b.abs().max(per.abs());
                per < b - tol || ((per - b).abs() <= tol && q.norm() < bq.norm())
            }
        };
        if take {
            best = Some((per, q));
        }
    }
    best.unwrap().1
}

fn noiseless_cfg(m: usize, users: usize, elements: usize, p: f64) -> ScenarioConfig {
    ScenarioConfig {
        antennas: m,
        users,
        elements,
        block_len: 2000,
        sigma2: 0.0,
        reflect_prob: vec![vec![p; elements]; users],
        path_loss: vec![1.0; users],
        ..Default::default()
    }
}

fn aligned_nmse(est: &EstimateSet, c_true: &CMatrix) -> Vec<f64> {
    let aligned = resolve_ambiguity(est, c_true);
    (0..c_true.ncols())
        .map(|j| {
            let truth = c_true.column(j).into_owned();
            aligned.for_column(j).map_or(f64::INFINITY, |s| nmse(&s.c_hat, &truth).unwrap())
        })
        .collect()
}

#[test]
fn reduction_reconstructs_low_rank_blocks() {
    let mut r = rng(1);
    let y = gaussian_matrix(&mut r, 6, 3) * bpsk_sources(&mut r, 3, 200);
    let red = reduce_dimension(&y, 3).unwrap();
    assert!((&red.back_map * &red.y_red - &y).camax() < 1e-9);
    let full = reduce_dimension(&y, 6).unwrap();
    let gram = full.back_map.adjoint() * &full.back_map;
    assert!((gram - CMatrix::identity(6, 6)).camax() < 1e-12);
    assert!((&full.back_map * &full.y_red - &y).camax() < 1e-9);
}

#[test]
fn reduction_residual_matches_discarded_eigenvalues() {
    let mut r = rng(2);
    let y = gaussian_matrix(&mut r, 6, 2) * bpsk_sources(&mut r, 2, 300) + gaussian_matrix(&mut r, 6, 300) * c(0.3, 0.0);
    let red = reduce_dimension(&y, 2).unwrap();
    let resid = (&y - &red.back_map * &red.y_red).norm_squared() / 300.0;
    let tail: f64 = red.eigenvalues[2..].iter().sum();
    assert!(resid <= tail * (1.0 + 1e-9) + 1e-12, "{resid} vs {tail}");
}

#[test]
fn extract_signal_examples() {
    let mut r = rng(3);
    let y = gaussian_matrix(&mut r, 3, 10);
    let mut e1 = CVector::zeros(3);
    e1[0] = c(1.0, 0.0);
    assert_eq!(extract_signal(&e1, &y), y.row(0).transpose());

    let ch = gaussian_matrix(&mut r, 3, 1);
    let s0 = gaussian_matrix(&mut r, 1, 10);
    let rank1 = &ch * &s0;
    let u = ch.column(0).map(|z| z.conj()).unscale(ch.norm());
    let s = extract_signal(&u, &rank1);
    assert!((s - s0.transpose() * c(ch.norm(), 0.0)).camax() < 1e-12);
}

#[test]
fn single_stream_extraction_correlates_with_the_source() {
    let mut r = rng(4);
    let a = bpsk_sources(&mut r, 1, 1000);
    let y_red = &a * c(0.8, -0.3);
    let ext = extract_vector(&y_red, None, &NoiseMix::white(0.0), &params(), &mut r).unwrap();
    let corr = ext.s.dotc(&a.row(0).transpose()).norm() / (ext.s.norm() * a.norm());
    assert!(corr > 0.999, "correlation {corr}");
}

#[test]
fn two_orthogonal_streams_separate_into_a_binary_alphabet() {
    let mut r = rng(5);
    let sources = bpsk_sources(&mut r, 2, 2000);
    let mix = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.6)]);
    let y = &mix * &sources;
    let p = params();
    let ext = extract_vector(&y, None, &NoiseMix::white(0.0), &p, &mut r).unwrap();
    let Contrast::Denoised { full, .. } = p.contrast else { unreachable!() };
    let alpha = denoised_alphabet(ext.s.as_slice(), 0.0, &full).unwrap();
    assert_eq!(alpha.len(), 2, "{:?}", alpha.points);
}

#[test]
fn candidate_set_examples() {
    let ya = Alphabet::uniform(reals(&[1.5, 0.5, -0.5, -1.5]));
    let za = Alphabet::uniform(reals(&[1.0, -1.0]));
    let cands = candidate_set(&ya, &za, 1e-9).unwrap();
    assert!(cands.iter().any(|q| (q - c(1.0, 0.0)).norm() < 1e-12));
    assert!(cands.len() - 1 <= 4 * 3 * 2);
    assert_eq!(*cands.last().unwrap(), c(0.0, 0.0));

    let coef = c(0.4, -1.1);
    let zs = [c(1.0, 0.0), c(-0.5, 0.3), c(0.2, 0.9)];
    let ya = Alphabet::uniform(zs.iter().map(|z| coef * z).collect());
    let cands = candidate_set(&ya, &Alphabet::uniform(zs.to_vec()), 1e-9).unwrap();
    assert!(cands.iter().any(|q| (q - coef).norm() < 1e-12));
}

#[test]
fn row_coefficient_with_binary_residual() {
    let mut r = rng(6);
    let src = bpsk_sources(&mut r, 2, 2000);
    let coef = c(0.7, 0.2);
    let s: Vec<Complex64> = src.row(0).iter().copied().collect();
    let row: Vec<Complex64> = (0..2000).map(|t| coef * s[t] + src[(1, t)] * 0.5).collect();
    let est = estimate_channel_row(&row, &s, &RowNoise::Constant(0.0), &params()).unwrap();
    assert!((est.coef - coef).norm() < 1e-6, "{}", est.coef);
}

#[test]
fn row_coefficient_exact_and_zero_cases() {
    let mut r = rng(7);
    let s: Vec<Complex64> = bpsk_sources(&mut r, 1, 500).iter().copied().collect();
    let coef = c(-0.3, 0.9);
    let row: Vec<Complex64> = s.iter().map(|z| coef * z).collect();
    let est = estimate_channel_row(&row, &s, &RowNoise::Constant(0.0), &params()).unwrap();
    assert!((est.coef - coef).norm() < 1e-12);

    let other: Vec<Complex64> = bpsk_sources(&mut r, 1, 500).iter().map(|z| z * 0.8).collect();
    let est = estimate_channel_row(&other, &s, &RowNoise::Constant(0.0), &params()).unwrap();
    assert_eq!(est.coef, c(0.0, 0.0));
}

#[test]
fn row_estimates_match_exhaustive_search() {
    let p = params();
    let mut r = rng(8);
    for k in 0..12 {
        let inst = row_instance(&mut r, 1500, 1 + k % 2);
        let est = estimate_channel_row(&inst.row, &inst.s, &RowNoise::Constant(0.0), &p).unwrap();
        let oracle = exhaustive_row_oracle(&inst.row, &inst.s, &p);
        assert!((est.coef - inst.coef).norm() < 1e-6, "instance {k}: {} vs {}", est.coef, inst.coef);
        assert!((est.coef - oracle).norm() < 1e-6, "instance {k}: {} vs oracle {}", est.coef, oracle);
    }
}

#[test]
fn block_estimates_in_noiseless_settings() {
    let mut r = rng(9);
    let src = bpsk_sources(&mut r, 2, 1500);
    let s = src.row(0).transpose();
    let ch = gaussian_matrix(&mut r, 4, 2);
    let noise = BlockNoise {
        sigma2: 0.0,
        mix: None,
        stream: CVector::zeros(4),
    };
    let single = ch.column(0) * s.transpose();
    let est = estimate_channel(&single, &s, &noise, &params()).unwrap();
    assert!((&est.c_hat - ch.column(0)).camax() < 1e-12);

    let y = &ch * &src;
    let est = estimate_channel(&y, &s, &noise, &params()).unwrap();
    let truth = ch.column(0).into_owned();
    assert!(nmse(&est.c_hat, &truth).unwrap() < 1e-6);
}

#[test]
fn noisy_block_estimate_is_finite() {
    let mut cfg = noiseless_cfg(8, 1, 1, 0.8);
    cfg.set_snr_db(16.0);
    let mut r = rng(10);
    let ch = draw_channels(&cfg, &mut r).unwrap();
    let block = draw_signals(&cfg, &mut r).unwrap();
    let y = synthesize_rx(&ch, &block, &cfg, &mut r).unwrap().y;
    let s = block.s.row(0).transpose().unscale(cfg.power.sqrt());
    let noise = BlockNoise {
        sigma2: cfg.sigma2,
        mix: None,
        stream: CVector::zeros(8),
    };
    let est = estimate_channel(&y, &s, &noise, &params()).unwrap();
    let truth = ch.c.column(0).into_owned();
    assert!(nmse(&est.c_hat, &truth).unwrap().is_finite());
}

#[test]
fn deflation_removes_one_stream() {
    let mut r = rng(11);
    let src = bpsk_sources(&mut r, 2, 1000);
    let ch = gaussian_matrix(&mut r, 4, 2);
    let y = &ch * &src;
    let s = src.row(0).transpose();
    let c0 = ch.column(0).into_owned();
    let rest = deflate(&y, &c0, &s);
    let sv = rest.singular_values();
    let top = sv.max();
    assert_eq!(sv.iter().filter(|v| **v > 1e-9 * top).count(), 1);
    assert_eq!(deflate(&y, &CVector::zeros(4), &s), y);

    let Contrast::Denoised { full, .. } = params().contrast else { unreachable!() };
    let best = (0..4).max_by(|&a, &b| ch[(a, 1)].norm().total_cmp(&ch[(b, 1)].norm())).unwrap();
    let row: Vec<Complex64> = rest.row(best).iter().copied().collect();
    assert_eq!(denoised_alphabet(&row, 0.0, &full).unwrap().len(), 2);
}

#[test]
fn noiseless_attack_is_fully_recovered() {
    let cfg = noiseless_cfg(8, 1, 1, 0.8);
    let mut r = rng(12);
    let ch = draw_channels(&cfg, &mut r).unwrap();
    let block = draw_signals(&cfg, &mut r).unwrap();
    let y = synthesize_rx(&ch, &block, &cfg, &mut r).unwrap().y;
    let est = run_bss(&y, &cfg, &params(), &mut r).unwrap();
    assert_eq!(est.streams.len(), 2);
    for (j, e) in aligned_nmse(&est, &ch.c).into_iter().enumerate() {
        assert!(e < 1e-2, "column {j}: NMSE {e}");
    }
}

#[test]
fn square_noiseless_mixtures_separate() {
    for seed in 0..3 {
        let cfg = noiseless_cfg(2, 2, 0, 0.5);
        let mut r = rng(100 + seed);
        let ch = gaussian_matrix(&mut r, 2, 2);
        let y = &ch * bpsk_sources(&mut r, 2, 2000);
        let est = run_bss(&y, &cfg, &params(), &mut r).unwrap();
        for (j, e) in aligned_nmse(&est, &ch).into_iter().enumerate() {
            assert!(e < 1e-2, "seed {seed} column {j}: NMSE {e}");
        }
    }
}

#[test]
fn no_users_no_streams() {
    let cfg = ScenarioConfig {
        users: 0,
        elements: 0,
        reflect_prob: vec![],
        path_loss: vec![],
        ..noiseless_cfg(4, 1, 0, 0.5)
    };
    let y = gaussian_matrix(&mut rng(13), 4, 50);
    let est = run_bss(&y, &cfg, &params(), &mut rng(13)).unwrap();
    assert!(est.streams.is_empty() && est.aborted.is_none());
}

#[test]
fn fixed_seed_is_deterministic() {
    let mut cfg = noiseless_cfg(6, 1, 1, 0.8);
    cfg.block_len = 600;
    cfg.set_snr_db(12.0);
    let run = || {
        let mut r = rng(14);
        let ch = draw_channels(&cfg, &mut r).unwrap();
        let block = draw_signals(&cfg, &mut r).unwrap();
        let y = synthesize_rx(&ch, &block, &cfg, &mut r).unwrap().y;
        let est = run_bss(&y, &cfg, &params(), &mut r).unwrap();
        est.streams.iter().map(|s| (s.c_hat.clone(), s.s.clone())).collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn parallel_and_sequential_agree() {
    let mut cfg = noiseless_cfg(6, 1, 1, 0.8);
    cfg.block_len = 600;
    cfg.set_snr_db(12.0);
    let run = |exec| {
        let mut r = rng(15);
        let ch = draw_channels(&cfg, &mut r).unwrap();
        let block = draw_signals(&cfg, &mut r).unwrap();
        let y = synthesize_rx(&ch, &block, &cfg, &mut r).unwrap().y;
        let p = BssParams { exec, ..BssParams::default() };
        let est = run_bss(&y, &cfg, &p, &mut r).unwrap();
        est.streams.iter().map(|s| s.c_hat.clone()).collect::<Vec<_>>()
    };
    assert_eq!(run(Execution::Sequential), run(Execution::Parallel));
}

fn stream(c_hat: CVector) -> StreamEstimate {
    StreamEstimate {
        s: CVector::from_element(2, c(1.0, 0.0)),
        c_hat,
        u: CVector::zeros(1),
        perimeter_history: vec![],
        converged: true,
        restarts: 0,
        flagged_rows: 0,
    }
}

#[test]
fn alignment_undoes_permutation_and_phase() {
    let mut r = rng(16);
    let truth = gaussian_matrix(&mut r, 5, 3);
    let phases = [0.3, -2.0, 1.4];
    let est = EstimateSet {
        streams: [2usize, 0, 1]
            .iter()
            .map(|&j| stream(truth.column(j) * Complex64::from_polar(1.0, phases[j])))
            .collect(),
        ..Default::default()
    };
    for e in aligned_nmse(&est, &truth) {
        assert!(e < 1e-24);
    }
    let al = resolve_ambiguity(&est, &truth).alignment.unwrap();
    assert_eq!(al.assignment, vec![Some(2), Some(0), Some(1)]);

    let col = truth.column(0).into_owned();
    let a = alignment_scale(&(&col * c(2.0, 0.0)), &col);
    assert!((a - c(0.5, 0.0)).norm() < 1e-15);
}

fn abs_corr(a: &CVector, b: &CVector) -> f64 {
    a.dotc(b).norm() / (a.norm() * b.norm())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn greedy_pairing_matches_best_permutation(seed in 0u64..100_000, noise in 0.0f64..0.3) {
        let mut r = rng(seed);
        let truth = gaussian_matrix(&mut r, 4, 2);
        let est = EstimateSet {
            streams: (0..2)
                .map(|j| stream(truth.column(1 - j) + gaussian_matrix(&mut r, 4, 1).column(0) * c(noise, 0.0)))
                .collect(),
            ..Default::default()
        };
        let cols: Vec<CVector> = (0..2).map(|j| truth.column(j).into_owned()).collect();
        let total = |perm: [usize; 2]| (0..2).map(|i| abs_corr(&est.streams[i].c_hat, &cols[perm[i]])).sum::<f64>();
        let brute = if total([0, 1]) >= total([1, 0]) { [0, 1] } else { [1, 0] };
        let al = resolve_ambiguity(&est, &truth).alignment.unwrap();
        prop_assert_eq!(al.assignment, vec![Some(brute[0]), Some(brute[1])]);
    }

    #[test]
    fn objective_is_phase_invariant(seed in 0u64..10_000, theta in 0.0f64..std::f64::consts::TAU, sigma in 0.0f64..0.2) {
        let mut r = rng(seed);
        let y = gaussian_matrix(&mut r, 3, 2) * bpsk_sources(&mut r, 2, 400) + gaussian_matrix(&mut r, 3, 400) * c(sigma, 0.0);
        let u = gaussian_matrix(&mut r, 3, 1).column(0).normalize();
        let s = extract_signal(&u, &y);
        let turned = extract_signal(&(&u * Complex64::from_polar(1.0, theta)), &y);
        let contrast = Contrast::denoised();
        let sq = sigma / std::f64::consts::SQRT_2;
        for res in [Resolution::Coarse, Resolution::Full] {
            let a = contrast.evaluate(s.as_slice(), sq, res).unwrap().perimeter;
            let b = contrast.evaluate(turned.as_slice(), sq, res).unwrap().perimeter;
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0), "{} vs {}", a, b);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn descent_keeps_unit_norm_and_never_climbs(seed in 0u64..10_000, snr_db in 6.0f64..20.0) {
        let mut cfg = noiseless_cfg(6, 1, 1, 0.8);
        cfg.block_len = 800;
        cfg.set_snr_db(snr_db);
        let mut r = rng(seed);
        let ch = draw_channels(&cfg, &mut r).unwrap();
        let block = draw_signals(&cfg, &mut r).unwrap();
        let y = synthesize_rx(&ch, &block, &cfg, &mut r).unwrap().y;
        let red = reduce_dimension(&y, 2).unwrap();
        let mix = red.back_map.adjoint();
        let noise = NoiseMix { sigma2: cfg.sigma2, mix: Some(&mix) };
        let start = red.start_vector();
        // one grid resolution, so the history is a single descent
        let p = BssParams { polish: false, ..params() };
        let ext = extract_vector(&red.y_red, start.as_ref(), &noise, &p, &mut r).unwrap();
        prop_assert!((ext.u.norm() - 1.0).abs() < 1e-9);
        prop_assert!((&ext.s - extract_signal(&ext.u, &red.y_red)).camax() < 1e-12);
        let h = &ext.perimeter_history;
        prop_assert!(!h.is_empty());
        prop_assert!(h.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        prop_assert!(h.last().unwrap() <= &h[0]);
    }
}
