use approx::assert_abs_diff_eq;
use ndarray::{Array1, Array2, Array3, Axis};
use proptest::prelude::*;
use rand::Rng as _;

use evidence::analysis::{decode::percentiles, pca};
use evidence::net::checkpoint::{read_checkpoint, write_checkpoint, CheckpointHeader};
use evidence::net::{forward_batch, InitScheme, Leak, LeakyRnnParams, NetShape, Readout};
use evidence::seed;
use evidence::tasks::format::{read_batch, write_batch};
use evidence::tasks::{
    accumulator_targets, build_batch, build_encoder, classify, make_linear_taskbank, sample_latents, BankMode, LinearBank,
    TaskBank, TrialConfig, TrialMode, ACCUMULATOR_BOUND,
};
use evidence::theory::{
    class_prob, monte_carlo_optimal_r2, phi, prob_to_dist, theoretical_r2, PosteriorEstimate, Trilaterator,
};

/// A full-rank bank whose standardized distances at `mu` lie in [-5, 5].
fn bank_around(mu: &Array1<f64>, n: usize, scale: f64, rng: &mut seed::Rng) -> LinearBank {
    let d = mu.len();
    let normals = make_linear_taskbank(d, n, BankMode::RandomHyperplanes, rng)
        .unwrap()
        .normals()
        .to_owned();
    let z = Array1::from_shape_fn(n, |_| rng.random_range(-5.0..5.0));
    let offsets = normals.dot(mu) - z * scale;
    LinearBank::new(normals, offsets).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trilateration_inverts_class_probabilities(
        s in any::<u64>(), d in 2usize..=8, extra in 0usize..8, sigma in 0.05f64..1.0, t in 1usize..=50,
    ) {
        let mut rng = seed::rng(s);
        let mu = Array1::from_shape_fn(d, |_| rng.random_range(-0.5..0.5));
        let scale = sigma / (t as f64).sqrt();
        let bank = bank_around(&mu, d + extra, scale, &mut rng);
        let est = PosteriorEstimate::new(mu.clone(), t, sigma).unwrap();
        let y = class_prob(&est, &bank).unwrap();
        let back = Trilaterator::new(&bank).unwrap().trilaterate(&y, t, sigma).unwrap();
        for (a, b) in back.iter().zip(&mu) {
            prop_assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn prob_to_dist_is_strictly_increasing(a in 1e-6f64..0.999_999, b in 1e-6f64..0.999_999, t in 1usize..50, sigma in 0.05f64..1.0) {
        prop_assume!(a != b);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(prob_to_dist(lo, t, sigma).unwrap() < prob_to_dist(hi, t, sigma).unwrap());
    }

    #[test]
    fn classify_depends_only_on_boundary_signs(s in any::<u64>(), n in 1usize..30, d in 1usize..6) {
        let mut rng = seed::rng(s);
        let bank = make_linear_taskbank(d, n, BankMode::RandomHyperplanes, &mut rng).unwrap();
        let x = sample_latents(&mut rng, d, 0.0, 50).unwrap();
        let labels = classify(x.view(), &bank).unwrap();
        let margin = x.dot(&bank.normals().t()) - bank.offsets();
        for (l, m) in labels.iter().zip(&margin) {
            prop_assert_eq!(*l, if *m > 0.0 { 1.0 } else { -1.0 });
        }
    }

    #[test]
    fn accumulators_freeze_at_the_bound(s in any::<u64>(), sigma in 0.05f64..2.0, t in 1usize..80, n in 2usize..25) {
        let mut rng = seed::rng(s);
        let bank = make_linear_taskbank(2, n, BankMode::UniformAngles2d, &mut rng).unwrap();
        let x = sample_latents(&mut rng, 2, 0.0, 8).unwrap();
        let obs = evidence::tasks::gen_observations(x.view(), sigma, t, &mut rng).unwrap();
        let a = accumulator_targets(obs.view(), &bank).unwrap();
        for tr in 0..8 {
            for k in 0..n {
                let mut frozen: Option<f64> = None;
                for step in 0..t {
                    let v = a[[tr, step, k]];
                    prop_assert!(v.abs() <= ACCUMULATOR_BOUND && v.fract() == 0.0);
                    if let Some(f) = frozen {
                        prop_assert_eq!(v, f);
                    } else if v.abs() == ACCUMULATOR_BOUND {
                        frozen = Some(v);
                    }
                }
            }
        }
    }

    #[test]
    fn identical_seeds_give_identical_batches(s in any::<u64>(), sigma in 0.0f64..1.0) {
        let bank = TaskBank::Linear(make_linear_taskbank(2, 6, BankMode::UniformAngles2d, &mut seed::rng(1)).unwrap());
        let enc = build_encoder(3, 2);
        let cfg = TrialConfig::fixed_rt(sigma);
        let a = build_batch(&cfg, &bank, Some(&enc), 4, s).unwrap();
        let b = build_batch(&cfg, &bank, Some(&enc), 4, s).unwrap();
        prop_assert_eq!(&a, &b);
        let mut buf = Vec::new();
        write_batch(&mut buf, &a).unwrap();
        let c = read_batch(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(&a, &c);
    }

    #[test]
    fn hidden_states_stay_nonnegative(s in any::<u64>(), dt in 1.0f64..=100.0, vanilla in any::<bool>()) {
        let mut rng = seed::rng(s);
        let shape = NetShape {
            n_hidden: 12, n_in: 4, n_out: 3, tau: 100.0, dt,
            leak: if vanilla { Leak::Vanilla } else { Leak::Leaky }, readout: Readout::Tanh,
        };
        let p = LeakyRnnParams::init_with(shape, InitScheme::Uniform, &mut rng).unwrap();
        let x = Array3::from_shape_fn((3, 10, 4), |_| rng.random_range(-2.0..2.0));
        let traj = forward_batch(&p, x.view()).unwrap();
        prop_assert!(traj.states.iter().all(|&v| v >= 0.0));
        let again = forward_batch(&p, x.view()).unwrap();
        prop_assert_eq!(traj.states, again.states);
    }

    #[test]
    fn checkpoints_round_trip_bit_exactly(s in any::<u64>(), n in 1usize..20, n_in in 1usize..10, n_out in 1usize..5) {
        let shape = NetShape { n_hidden: n, n_in, n_out, tau: 100.0, dt: 50.0, leak: Leak::Leaky, readout: Readout::ScaledTanh5 };
        let p = LeakyRnnParams::init_with(shape, InitScheme::Uniform, &mut seed::rng(s)).unwrap();
        let header = CheckpointHeader { shape, seed: s, step: 7, encoder_seed: Some(s ^ 1), config: serde_json::json!({"k": 1}) };
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &p, &header).unwrap();
        let (q, h) = read_checkpoint(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(p.tensors().map(|t| t.iter().map(|v| v.to_bits()).collect::<Vec<_>>()),
                        q.tensors().map(|t| t.iter().map(|v| v.to_bits()).collect::<Vec<_>>()));
        prop_assert_eq!(h, header);
    }

    #[test]
    fn pca_fractions_are_a_sorted_distribution(s in any::<u64>(), m in 3usize..40, n in 1usize..12) {
        let mut rng = seed::rng(s);
        let x = Array2::from_shape_fn((m, n), |(_, j)| rng.random_range(-1.0..1.0) * (j + 1) as f64);
        let p = pca(x.view()).unwrap();
        prop_assert!(p.fractions.iter().all(|&f| f >= 0.0));
        prop_assert!(p.fractions.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!((p.fractions.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn percentiles_are_ordered(v in proptest::collection::vec(-10.0f64..10.0, 1..50)) {
        let p = percentiles(&v);
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo <= p.p25 && p.p25 <= p.p50 && p.p50 <= p.p75 && p.p75 <= hi);
    }

    #[test]
    fn latents_stay_in_the_unit_box(s in any::<u64>(), d in 1usize..8, rho in 0.0f64..=1.0) {
        let d = if rho > 0.0 { 2 } else { d };
        let x = sample_latents(&mut seed::rng(s), d, rho, 200).unwrap();
        prop_assert!(x.iter().all(|v| (-0.5..=0.5).contains(v)));
    }
}

#[test]
fn uniform_angle_banks_have_scaled_identity_gram() {
    for n in 2..=30 {
        let bank = make_linear_taskbank(2, n, BankMode::UniformAngles2d, &mut seed::rng(0)).unwrap();
        let g = bank.normals().t().dot(&bank.normals());
        let want = Array2::<f64>::eye(2) * (n as f64 / 2.0);
        for (a, b) in g.iter().zip(&want) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
        }
    }
}

#[test]
fn observation_residuals_have_the_stated_moments() {
    let bank = TaskBank::Linear(make_linear_taskbank(2, 24, BankMode::UniformAngles2d, &mut seed::rng(0)).unwrap());
    let enc = build_encoder(1, 2);
    for sigma in [0.05, 0.2, 0.8] {
        let b = build_batch(&TrialConfig::fixed_rt(sigma), &bank, Some(&enc), 256, 11).unwrap();
        let (bs, t, d) = b.observations.dim();
        let resid = &b.observations - &b.latents.clone().insert_axis(Axis(1));
        let n = (bs * t * d) as f64;
        let mean = resid.sum() / n;
        let sd = (resid.mapv(|r| r * r).sum() / n - mean * mean).sqrt();
        let tol = 3.0 / n.sqrt();
        assert!(mean.abs() / sigma < tol, "mean {mean}");
        assert!((sd / sigma - 1.0).abs() < 3.0 * tol, "sd {sd}");
    }
}

#[test]
fn class_prob_matches_grid_integration_of_the_posterior() {
    // Midpoint rule over a +-6 sd box of N(mu, s^2 I), counting mass on the
    // positive side of each boundary.
    let mut rng = seed::rng(5);
    for _ in 0..6 {
        let mu = Array1::from_shape_fn(2, |_| rng.random_range(-0.5..0.5));
        let t = rng.random_range(1..30);
        let sigma = rng.random_range(0.1..1.0);
        let s = sigma / (t as f64).sqrt();
        let bank = bank_around(&mu, 5, s, &mut rng);
        let analytic = class_prob(&PosteriorEstimate::new(mu.clone(), t, sigma).unwrap(), &bank).unwrap();
        let m = 800;
        let h = 12.0 * s / m as f64;
        let mut mass = vec![0.0; 5];
        for i in 0..m {
            for j in 0..m {
                let u = -6.0 * s + (i as f64 + 0.5) * h;
                let v = -6.0 * s + (j as f64 + 0.5) * h;
                let w = (-(u * u + v * v) / (2.0 * s * s)).exp() * h * h / (2.0 * std::f64::consts::PI * s * s);
                let x = [mu[0] + u, mu[1] + v];
                for (k, c) in bank.normals().rows().into_iter().enumerate() {
                    if c[0] * x[0] + c[1] * x[1] > bank.offsets()[k] {
                        mass[k] += w;
                    }
                }
            }
        }
        for k in 0..5 {
            assert!((analytic[k] - mass[k]).abs() < 1e-4 + 2.0 * h / s, "{} vs {}", analytic[k], mass[k]);
        }
    }
}

#[test]
fn monte_carlo_r2_within_three_standard_errors() {
    for (sigma, t) in [(0.2, 1), (0.2, 5), (0.5, 3), (1.0, 10)] {
        let n = 20_000;
        let mut rng = seed::derived_rng(9, &[t as u64]);
        let runs: Vec<f64> = (0..8)
            .map(|_| monte_carlo_optimal_r2(sigma, t, 2, n, &mut rng).unwrap())
            .collect();
        let mean = runs.iter().sum::<f64>() / 8.0;
        let sd = (runs.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / 7.0).sqrt();
        let se = sd / 8f64.sqrt();
        let th = theoretical_r2(t, sigma, 1.0 / 12.0);
        assert!((mean - th).abs() < 3.0 * se.max(1e-4), "sigma {sigma} t {t}: {mean} vs {th} (se {se})");
    }
}

#[test]
fn free_rt_batches_report_accumulators() {
    let bank = TaskBank::Linear(make_linear_taskbank(2, 6, BankMode::UniformAngles2d, &mut seed::rng(0)).unwrap());
    let enc = build_encoder(1, 2);
    let cfg = TrialConfig {
        mode: TrialMode::FreeRt,
        ..TrialConfig::fixed_rt(0.3)
    };
    let b = build_batch(&cfg, &bank, Some(&enc), 5, 2).unwrap();
    let direct = accumulator_targets(b.observations.view(), bank.as_linear().unwrap()).unwrap();
    assert_eq!(b.targets, direct);
    assert!(phi(0.0) == 0.5);
}
