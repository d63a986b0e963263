//! VAE gradients against finite differences, KL non-negativity and
//! training-loss behaviour.

use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use workr::vae::{
    elbo_loss, init_vae, loss_and_grad, train_vae, train_vae_observed, VaeConfig, VaeParams,
};

fn small_net(seed: u64) -> (VaeParams, Array2<f64>, Array2<f64>) {
    let cfg = VaeConfig {
        input_dim: 8,
        hidden_dim: 16,
        latent_dim: 4,
        seed,
        ..VaeConfig::default()
    };
    let mut p = init_vae(&cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(99));
    // non-zero biases so every parameter gets exercised
    for i in 0..p.param_count() {
        *p.param_mut(i) += rng.random_range(-0.1..0.1);
    }
    let x = Array2::from_shape_fn((5, 8), |_| rng.random_range(0.0..1.0));
    let eps = Array2::from_shape_fn((5, 4), |_| rng.sample(StandardNormal));
    (p, x, eps)
}

/// `|a - n| / max(|a|, |n|, 1e-6)`; the floor keeps gradients that are
/// numerically zero from dividing noise by noise.
fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..4 {
        let (p, x, eps) = small_net(seed);
        let (_, grads) = loss_and_grad(&p, &x, &eps);
        let analytic = grads.flatten();
        assert_eq!(analytic.len(), p.param_count());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..40 {
            let i = rng.random_range(0..p.param_count());
            let h = 1e-5;
            let mut plus = p.clone();
            *plus.param_mut(i) += h;
            let mut minus = p.clone();
            *minus.param_mut(i) -= h;
            let numeric = (loss_and_grad(&plus, &x, &eps).0.total
                - loss_and_grad(&minus, &x, &eps).0.total)
                / (2.0 * h);
            worst = worst.max(relative_error(analytic[i], numeric));
            checked += 1;
        }
    }
    assert!(checked >= 100);
    assert!(worst <= 1e-4, "worst relative error {worst:e}");
}

#[test]
fn kl_is_non_negative_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10_000 {
        let mu: Vec<f64> = (0..4).map(|_| rng.random_range(-10.0..10.0)).collect();
        let logvar: Vec<f64> = (0..4).map(|_| rng.random_range(-10.0..10.0)).collect();
        let t = elbo_loss(&[0.0], &[0.0], &mu, &logvar).unwrap();
        assert!(t.kl >= 0.0, "kl {} for {mu:?} {logvar:?}", t.kl);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn kl_vanishes_only_at_standard_normal(mu in -5.0..5.0f64, lv in -5.0..5.0f64) {
        let t = elbo_loss(&[0.5], &[0.5], &[mu], &[lv]).unwrap();
        prop_assert!(t.kl >= 0.0);
        prop_assert_eq!(t.recon, 0.0);
        if mu.abs() > 1e-3 || lv.abs() > 1e-3 {
            prop_assert!(t.kl > 0.0);
        }
    }
}

/// Rows drawn from a few fixed prototypes plus noise, clipped to [0, 1].
pub fn fixed_batch(rows: usize, dim: usize) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let protos: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..dim).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    Array2::from_shape_fn((rows, dim), |(i, j)| {
        let noise: f64 = rng.sample::<f64, _>(StandardNormal) * 0.05;
        (protos[i % 4][j] + noise).clamp(0.0, 1.0)
    })
}

fn moving_average(v: &[f64], k: usize) -> Vec<f64> {
    v.windows(k)
        .map(|w| w.iter().sum::<f64>() / k as f64)
        .collect()
}

/// Mean loss over `copies` fixed noise draws per row, so successive epochs
/// are scored on the same estimator.
fn fixed_noise_elbo(p: &VaeParams, x: &Array2<f64>, eps: &[Array2<f64>]) -> f64 {
    eps.iter()
        .map(|e| loss_and_grad(p, x, e).0.total)
        .sum::<f64>()
        / eps.len() as f64
}

#[test]
fn elbo_moving_average_is_non_increasing() {
    let x = fixed_batch(256, 12);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let eps: Vec<Array2<f64>> = (0..16)
        .map(|_| Array2::from_shape_fn((256, 20), |_| rng.sample(StandardNormal)))
        .collect();
    for seed in [1, 2] {
        let cfg = VaeConfig {
            input_dim: 12,
            seed,
            ..VaeConfig::default()
        };
        let mut elbo = Vec::new();
        let trained =
            train_vae_observed(&x, &cfg, |_, p| elbo.push(fixed_noise_elbo(p, &x, &eps))).unwrap();
        assert_eq!(elbo.len(), 200);
        let ma = moving_average(&elbo, 5);
        for (i, w) in ma.windows(2).enumerate() {
            assert!(
                w[1] <= w[0],
                "seed {seed}: moving average rose at epoch {}: {} -> {}",
                i + 5,
                w[0],
                w[1]
            );
        }
        assert!(elbo[199] < elbo[0]);
        assert!(trained.params.is_finite());
    }
}

#[test]
fn training_is_deterministic() {
    let x = fixed_batch(64, 6);
    let cfg = VaeConfig {
        input_dim: 6,
        epochs: 5,
        seed: 11,
        ..VaeConfig::default()
    };
    assert_eq!(train_vae(&x, &cfg).unwrap(), train_vae(&x, &cfg).unwrap());
}
