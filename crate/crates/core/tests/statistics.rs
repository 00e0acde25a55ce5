//! Seeded statistical checks of the samplers and estimators.

use std::f64::consts::PI;

use multiphase::circuits::{two_tritter_spec, InterferometerModel, TritterParams};
use multiphase::estimate::{
    mle_estimate_multi, run_estimation, smc_init, ControlStrategy, CountRecord, Estimator, Prior, Scenario,
};
use multiphase::fisher::{CosineFringe, ProbabilityModel};
use multiphase::hilbert::{wrap_phase, FockState, PhaseVector};
use multiphase::measure::sample_counts;
use multiphase::rng::split;

/// Kolmogorov-Smirnov distance of `xs` from the uniform law on [−π, π].
fn ks_uniform(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, x)| {
            let cdf = (x + PI) / (2.0 * PI);
            (cdf - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn prior_particles_are_uniform_on_each_axis() {
    let n = 5000;
    let cloud = smc_init(Prior::UniformTorus, n, 3, 77).unwrap();
    // 1% critical value of the one-sample KS statistic
    let critical = 1.63 / (n as f64).sqrt();
    for k in 0..3 {
        let axis: Vec<f64> = cloud.particles().map(|p| p[k]).collect();
        let d = ks_uniform(axis);
        assert!(d < critical, "axis {k}: KS distance {d} >= {critical}");
    }
    assert!(cloud.weights().iter().all(|&w| (w - 1.0 / n as f64).abs() < 1e-15));
}

#[test]
fn prior_axes_are_uncorrelated() {
    let n = 5000;
    let cloud = smc_init(Prior::UniformTorus, n, 2, 78).unwrap();
    let r: f64 = cloud.particles().map(|p| p[0] * p[1]).sum::<f64>() / n as f64 / (PI * PI / 3.0);
    // correlation of independent uniforms has standard error 1/√n
    assert!(r.abs() < 4.0 / (n as f64).sqrt(), "correlation {r}");
}

#[test]
fn fringe_mle_is_unbiased_and_efficient() {
    let model = CosineFringe;
    let truth = 1.1;
    let shots = 2000u64;
    let runs = 400;
    let p = model.probabilities(&[truth], &[]);
    let mut estimates = Vec::with_capacity(runs);
    for run in 0..runs {
        let mut rng = split(500, run as u64);
        let counts = sample_counts(&p, shots, &mut rng);
        let data = [CountRecord { controls: vec![], counts }];
        let fit = mle_estimate_multi(&model, &data, 64, Some(&[(0.0, PI)])).unwrap();
        estimates.push(fit.estimate[0]);
    }
    let n = runs as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let var = estimates.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    // unit Fisher information per shot
    let crb = 1.0 / shots as f64;
    assert!((mean - truth).abs() < 4.0 * (crb / n).sqrt(), "bias {}", mean - truth);
    // relative standard error of a sample variance is √(2/(n−1)) ≈ 0.07
    assert!((var / crb - 1.0).abs() < 0.25, "variance / CRB = {}", var / crb);
}

#[test]
fn smc_posterior_covers_the_truth() {
    let spec = two_tritter_spec(TritterParams::BALANCED, TritterParams::BALANCED, true);
    let model = InterferometerModel::new(&spec, &FockState::basis(vec![1, 0, 0]), 1.0).unwrap();
    let truth = [0.7, -0.3];
    let runs = 20;
    let mut covered = 0;
    for run in 0..runs {
        let scenario = Scenario {
            truth: PhaseVector::new(truth.to_vec()),
            estimator: Estimator::Smc {
                particles: 800,
                strategy: ControlStrategy::Adaptive {
                    candidates: multiphase::estimate::candidate_grid(2, 8),
                    fallback: vec![0.0, 0.0],
                },
            },
            repetitions: 60,
            seed: 900 + run,
            fisher_reference: None,
            quantum_reference: None,
        };
        let out = run_estimation(&model, &scenario).unwrap();
        let last = out.records.last().unwrap();
        let err2: f64 =
            last.estimate.as_slice().iter().zip(&truth).map(|(a, b)| wrap_phase(a - b).powi(2)).sum();
        // a 2-D Gaussian posterior puts about 99% of its mass within 3σ
        covered += usize::from(err2 <= 9.0 * last.covariance_trace());
    }
    assert!(covered >= runs as usize - 2, "truth within 3 sigma in {covered}/{runs} runs");
}
