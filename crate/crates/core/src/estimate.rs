//! Phase estimators: grid-then-refine maximum likelihood and adaptive
//! Sequential Monte Carlo with control-phase selection.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::fisher::{fi_matrix, inverse_bound, InfoMatrix, ProbabilityModel, DEFAULT_STEP};
use crate::hilbert::{wrap_phase, PhaseVector};
use crate::rng::{categorical, split, SimRng};

pub const MIN_PARTICLES: usize = 100;
pub const DEFAULT_PARTICLES: usize = 2000;
/// Liu-West shrinkage factor.
pub const LIU_WEST_A: f64 = 0.98;
/// Resample once ESS drops below this fraction of the particle count.
pub const RESAMPLE_FRACTION: f64 = 0.5;
pub const DEFAULT_CANDIDATES_PER_DIM: usize = 32;
pub const MAX_CANDIDATES: usize = 256;
pub const MIN_GRID_RESOLUTION: usize = 8;
pub const MAX_GRID_DIM: usize = 3;
const WEIGHT_TOL: f64 = 1e-10;
const REFINE_TOL: f64 = 1e-10;

/// Circular mean of angle samples with weights, coordinate by coordinate.
fn circular_mean_of(points: &[f64], weights: &[f64], d: usize) -> Vec<f64> {
    let mut s = vec![0.0; d];
    let mut c = vec![0.0; d];
    for (p, w) in points.chunks_exact(d).zip(weights) {
        for k in 0..d {
            s[k] += w * p[k].sin();
            c[k] += w * p[k].cos();
        }
    }
    (0..d).map(|k| wrap_phase(s[k].atan2(c[k]))).collect()
}

/// Weighted covariance of the phase differences wrapped around `mean`.
fn wrapped_covariance(points: &[f64], weights: &[f64], mean: &[f64]) -> DMatrix<f64> {
    let d = mean.len();
    let mut first = vec![0.0; d];
    let mut second = DMatrix::<f64>::zeros(d, d);
    let mut delta = vec![0.0; d];
    for (p, w) in points.chunks_exact(d).zip(weights) {
        for k in 0..d {
            delta[k] = wrap_phase(p[k] - mean[k]);
            first[k] += w * delta[k];
        }
        for i in 0..d {
            for j in 0..d {
                second[(i, j)] += w * delta[i] * delta[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..d {
            second[(i, j)] -= first[i] * first[j];
        }
    }
    (second.clone() + second.transpose()) * 0.5
}

/// Weighted particle approximation of a posterior on the phase torus.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleCloud {
    dim: usize,
    /// Row-major `count × dim`.
    particles: Vec<f64>,
    weights: Vec<f64>,
}

impl ParticleCloud {
    /// Wraps the particles and normalizes the weights.
    pub fn new(dim: usize, particles: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(param("dim", "must be at least 1"));
        }
        if particles.len() != dim * weights.len() {
            return Err(Error::Dimension { expected: dim * weights.len(), found: particles.len() });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(param("weights", "must be finite and non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(param("weights", "total weight is zero"));
        }
        Ok(Self {
            dim,
            particles: particles.into_iter().map(wrap_phase).collect(),
            weights: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.weights.len()
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.particles[i * self.dim..(i + 1) * self.dim]
    }

    pub fn particles(&self) -> impl Iterator<Item = &[f64]> {
        self.particles.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `1 / Σ wᵢ²`.
    pub fn ess(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    pub fn circular_mean(&self) -> PhaseVector {
        PhaseVector::new(circular_mean_of(&self.particles, &self.weights, self.dim))
    }

    /// Covariance of wrapped differences from the circular mean.
    pub fn covariance(&self) -> DMatrix<f64> {
        let mean = circular_mean_of(&self.particles, &self.weights, self.dim);
        wrapped_covariance(&self.particles, &self.weights, &mean)
    }

    pub fn covariance_trace(&self) -> f64 {
        self.covariance().trace()
    }

    fn reset_from_prior(&mut self, rng: &mut SimRng) {
        for x in self.particles.iter_mut() {
            *x = uniform_phase(rng);
        }
        let w = 1.0 / self.count() as f64;
        self.weights.iter_mut().for_each(|x| *x = w);
    }

    /// Liu-West resampling: systematic selection, then each chosen particle
    /// is shrunk toward the mean by `a` and jittered with covariance
    /// `(1 − a²) Σ`.
    fn resample(&mut self, rng: &mut SimRng) {
        let d = self.dim;
        let n = self.count();
        let mean = circular_mean_of(&self.particles, &self.weights, d);
        let cov = wrapped_covariance(&self.particles, &self.weights, &mean);
        let h2 = 1.0 - LIU_WEST_A * LIU_WEST_A;
        let jitter = DMatrix::<f64>::identity(d, d) * 1e-14;
        let factor = match (cov.clone() * h2 + &jitter).cholesky() {
            Some(c) => c.l(),
            None => DMatrix::from_diagonal(&cov.diagonal().map(|v| (v.max(0.0) * h2).sqrt())),
        };

        let u0: f64 = rng.random::<f64>() / n as f64;
        let mut chosen = Vec::with_capacity(n);
        let mut acc = self.weights[0];
        let mut j = 0;
        for k in 0..n {
            let u = u0 + k as f64 / n as f64;
            while u > acc && j + 1 < n {
                j += 1;
                acc += self.weights[j];
            }
            chosen.push(j);
        }

        let mut next = Vec::with_capacity(n * d);
        let mut z = vec![0.0; d];
        for &j in &chosen {
            z.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
            let p = self.particle(j);
            for k in 0..d {
                let noise: f64 = (0..=k).map(|l| factor[(k, l)] * z[l]).sum();
                next.push(wrap_phase(mean[k] + LIU_WEST_A * wrap_phase(p[k] - mean[k]) + noise));
            }
        }
        self.particles = next;
        let w = 1.0 / n as f64;
        self.weights.iter_mut().for_each(|x| *x = w);
    }

    /// Bayes update on one observed outcome, resampling if the cloud
    /// degenerates.
    pub fn update<M: ProbabilityModel + ?Sized>(
        &mut self,
        model: &M,
        controls: &[f64],
        outcome: usize,
        rng: &mut SimRng,
    ) -> Result<UpdateEvent> {
        check_model(model, self.dim, controls)?;
        if outcome >= model.outcome_count() {
            return Err(param("outcome", format!("{outcome} >= {}", model.outcome_count())));
        }
        let mut probs = vec![0.0; model.outcome_count()];
        let mut total = 0.0;
        for (p, w) in self.particles.chunks_exact(self.dim).zip(self.weights.iter_mut()) {
            model.probabilities_into(p, controls, &mut probs);
            *w *= probs[outcome].max(0.0);
            total += *w;
        }
        if !(total > 0.0) || !total.is_finite() {
            self.reset_from_prior(rng);
            return Ok(UpdateEvent { resampled: true, prior_reset: true });
        }
        self.weights.iter_mut().for_each(|w| *w /= total);
        if self.ess() < RESAMPLE_FRACTION * self.count() as f64 {
            self.resample(rng);
            return Ok(UpdateEvent { resampled: true, prior_reset: false });
        }
        Ok(UpdateEvent { resampled: false, prior_reset: false })
    }

    /// `max |Σwᵢ − 1|`.
    pub fn normalization_error(&self) -> f64 {
        (self.weights.iter().sum::<f64>() - 1.0).abs()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalization_error() <= WEIGHT_TOL
    }
}

/// What [`ParticleCloud::update`] did besides reweighting.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UpdateEvent {
    pub resampled: bool,
    /// The outcome had zero likelihood under every particle and the cloud
    /// was redrawn from the prior.
    pub prior_reset: bool,
}

fn check_model<M: ProbabilityModel + ?Sized>(model: &M, dim: usize, controls: &[f64]) -> Result<()> {
    if model.phase_dim() != dim {
        return Err(Error::Dimension { expected: dim, found: model.phase_dim() });
    }
    if model.control_dim() != controls.len() {
        return Err(Error::Dimension { expected: model.control_dim(), found: controls.len() });
    }
    Ok(())
}

fn uniform_phase(rng: &mut SimRng) -> f64 {
    wrap_phase(-PI + 2.0 * PI * rng.random::<f64>())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Prior {
    UniformTorus,
}

/// I.i.d. prior particles with equal weights.
pub fn smc_init(prior: Prior, particle_count: usize, d: usize, seed: u64) -> Result<ParticleCloud> {
    let mut rng = split(seed, 0);
    smc_init_with(prior, particle_count, d, &mut rng)
}

pub fn smc_init_with(prior: Prior, particle_count: usize, d: usize, rng: &mut SimRng) -> Result<ParticleCloud> {
    if particle_count < MIN_PARTICLES {
        return Err(param("particle_count", format!("{particle_count} < {MIN_PARTICLES}")));
    }
    match prior {
        Prior::UniformTorus => {
            let particles = (0..particle_count * d).map(|_| uniform_phase(rng)).collect();
            ParticleCloud::new(d, particles, vec![1.0; particle_count])
        }
    }
}

/// Functional form of [`ParticleCloud::update`].
pub fn smc_update<M: ProbabilityModel + ?Sized>(
    cloud: &ParticleCloud,
    model: &M,
    controls: &[f64],
    outcome: usize,
    rng: &mut SimRng,
) -> Result<ParticleCloud> {
    let mut next = cloud.clone();
    next.update(model, controls, outcome, rng)?;
    Ok(next)
}

/// Uniform grid of control vectors, `per_dim` points per axis starting at
/// −π, reduced so the total stays within [`MAX_CANDIDATES`].
pub fn candidate_grid(control_dim: usize, per_dim: usize) -> Vec<Vec<f64>> {
    if control_dim == 0 || per_dim == 0 {
        return vec![Vec::new()];
    }
    let mut n = per_dim;
    while n > 1 && n.pow(control_dim as u32) > MAX_CANDIDATES {
        n -= 1;
    }
    grid_points(&vec![(-PI, PI); control_dim], n)
}

pub fn default_candidates(control_dim: usize) -> Vec<Vec<f64>> {
    candidate_grid(control_dim, DEFAULT_CANDIDATES_PER_DIM)
}

/// Lexicographically ordered grid with `n` points per axis over half-open
/// boxes `[lo, hi)`.
fn grid_points(bounds: &[(f64, f64)], n: usize) -> Vec<Vec<f64>> {
    let d = bounds.len();
    let total = n.pow(d as u32);
    (0..total)
        .map(|mut idx| {
            let mut p = vec![0.0; d];
            for k in (0..d).rev() {
                let (lo, hi) = bounds[k];
                p[k] = lo + (hi - lo) * (idx % n) as f64 / n as f64;
                idx /= n;
            }
            p
        })
        .collect()
}

/// The candidate picked by [`choose_controls`] with its expected utility.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlChoice {
    pub index: usize,
    pub controls: Vec<f64>,
    pub utility: f64,
}

/// Expected posterior covariance trace after one more measurement at
/// `controls`. Phase differences are wrapped around the current circular
/// mean, which makes the average over outcomes a single pass.
pub fn expected_utility<M: ProbabilityModel + ?Sized>(cloud: &ParticleCloud, model: &M, controls: &[f64]) -> f64 {
    let mean = circular_mean_of(&cloud.particles, &cloud.weights, cloud.dim);
    let deltas: Vec<f64> = cloud
        .particles
        .chunks_exact(cloud.dim)
        .flat_map(|p| p.iter().zip(&mean).map(|(x, m)| wrap_phase(x - m)).collect::<Vec<_>>())
        .collect();
    let spread = weighted_second_moment(&deltas, &cloud.weights);
    utility_from_deltas(cloud, &deltas, spread, model, controls, &mut Scratch::new(model, cloud.dim))
}

fn weighted_second_moment(deltas: &[f64], weights: &[f64]) -> f64 {
    let d = deltas.len() / weights.len();
    deltas.chunks_exact(d).zip(weights).map(|(x, w)| w * x.iter().map(|v| v * v).sum::<f64>()).sum()
}

struct Scratch {
    probs: Vec<f64>,
    mass: Vec<f64>,
    first: Vec<f64>,
}

impl Scratch {
    fn new<M: ProbabilityModel + ?Sized>(model: &M, d: usize) -> Self {
        let o = model.outcome_count();
        Self { probs: vec![0.0; o], mass: vec![0.0; o], first: vec![0.0; o * d] }
    }
}

/// `Σₒ Pₒ Tr Covₒ = Σᵢ wᵢ|δᵢ|² − Σₒ |Σᵢ wᵢ pₒᵢ δᵢ|² / Pₒ`.
fn utility_from_deltas<M: ProbabilityModel + ?Sized>(
    cloud: &ParticleCloud,
    deltas: &[f64],
    spread: f64,
    model: &M,
    controls: &[f64],
    s: &mut Scratch,
) -> f64 {
    let d = cloud.dim;
    s.mass.iter_mut().for_each(|x| *x = 0.0);
    s.first.iter_mut().for_each(|x| *x = 0.0);
    for ((p, delta), w) in cloud.particles.chunks_exact(d).zip(deltas.chunks_exact(d)).zip(&cloud.weights) {
        model.probabilities_into(p, controls, &mut s.probs);
        for (o, &po) in s.probs.iter().enumerate() {
            let wp = w * po;
            s.mass[o] += wp;
            for (f, &x) in s.first[o * d..(o + 1) * d].iter_mut().zip(delta) {
                *f += wp * x;
            }
        }
    }
    let mut explained = 0.0;
    for (o, &m) in s.mass.iter().enumerate() {
        if m > 0.0 {
            explained += s.first[o * d..(o + 1) * d].iter().map(|v| v * v).sum::<f64>() / m;
        }
    }
    (spread - explained).max(0.0)
}

/// Candidate minimizing the expected posterior covariance trace. Ties
/// (within 1e-12 of the current trace) go to the lowest candidate index.
pub fn choose_controls<M: ProbabilityModel + ?Sized>(
    cloud: &ParticleCloud,
    model: &M,
    candidates: &[Vec<f64>],
) -> Result<ControlChoice> {
    if candidates.is_empty() {
        return Err(param("candidates", "empty candidate list"));
    }
    for c in candidates {
        check_model(model, cloud.dim, c)?;
    }
    let mean = circular_mean_of(&cloud.particles, &cloud.weights, cloud.dim);
    let deltas: Vec<f64> = cloud
        .particles
        .chunks_exact(cloud.dim)
        .flat_map(|p| p.iter().zip(&mean).map(|(x, m)| wrap_phase(x - m)).collect::<Vec<_>>())
        .collect();
    let spread = weighted_second_moment(&deltas, &cloud.weights);
    let mut scratch = Scratch::new(model, cloud.dim);
    let first = utility_from_deltas(cloud, &deltas, spread, model, &candidates[0], &mut scratch);
    let mut best = ControlChoice { index: 0, controls: candidates[0].clone(), utility: first };
    for (index, c) in candidates.iter().enumerate().skip(1) {
        let u = utility_from_deltas(cloud, &deltas, spread, model, c, &mut scratch);
        if u < best.utility - 1e-12 * spread.max(best.utility) {
            best = ControlChoice { index, controls: c.clone(), utility: u };
        }
    }
    Ok(best)
}

/// Observed counts at one control setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub controls: Vec<f64>,
    pub counts: Vec<u64>,
}

/// Result of [`mle_estimate_multi`].
#[derive(Clone, Debug, PartialEq)]
pub struct MleResult {
    pub estimate: PhaseVector,
    pub log_likelihood: f64,
    /// Another well-separated local maximum reaches the same likelihood.
    pub multimodal: bool,
    /// Location of that competing maximum, if any.
    pub alternative: Option<PhaseVector>,
}

fn log_likelihood<M: ProbabilityModel + ?Sized>(model: &M, data: &[CountRecord], phases: &[f64], buf: &mut [f64]) -> f64 {
    let mut ll = 0.0;
    for rec in data {
        model.probabilities_into(phases, &rec.controls, buf);
        for (&n, &p) in rec.counts.iter().zip(buf.iter()) {
            if n > 0 {
                if p <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                ll += n as f64 * p.ln();
            }
        }
    }
    ll
}

/// Maximum-likelihood phases from counts taken at a single (empty) control
/// setting.
pub fn mle_estimate<M: ProbabilityModel + ?Sized>(model: &M, counts: &[u64], grid_resolution: usize) -> Result<MleResult> {
    let data = [CountRecord { controls: Vec::new(), counts: counts.to_vec() }];
    mle_estimate_multi(model, &data, grid_resolution, None)
}

/// Grid search over the torus (or over `bounds`), followed by a compass
/// refinement of every grid-local maximum. Ties go to the lexicographically
/// smallest phase vector.
pub fn mle_estimate_multi<M: ProbabilityModel + ?Sized>(
    model: &M,
    data: &[CountRecord],
    grid_resolution: usize,
    bounds: Option<&[(f64, f64)]>,
) -> Result<MleResult> {
    let d = model.phase_dim();
    if data.is_empty() {
        return Err(param("outcomes", "no count records"));
    }
    if d == 0 || d > MAX_GRID_DIM {
        return Err(param("phase_dim", format!("grid search supports 1..={MAX_GRID_DIM} phases, got {d}")));
    }
    if grid_resolution < MIN_GRID_RESOLUTION {
        return Err(param("grid_resolution", format!("{grid_resolution} < {MIN_GRID_RESOLUTION}")));
    }
    for rec in data {
        if rec.controls.len() != model.control_dim() {
            return Err(Error::Dimension { expected: model.control_dim(), found: rec.controls.len() });
        }
        if rec.counts.len() != model.outcome_count() {
            return Err(Error::Dimension { expected: model.outcome_count(), found: rec.counts.len() });
        }
    }
    if data.iter().all(|r| r.counts.iter().all(|&n| n == 0)) {
        return Err(param("outcomes", "all counts are zero"));
    }
    let torus = vec![(-PI, PI); d];
    let (boxes, periodic) = match bounds {
        Some(b) => {
            if b.len() != d {
                return Err(Error::Dimension { expected: d, found: b.len() });
            }
            if b.iter().any(|(lo, hi)| !(lo < hi)) {
                return Err(param("bounds", "each interval needs lo < hi"));
            }
            (b.to_vec(), false)
        }
        None => (torus, true),
    };

    let n = grid_resolution;
    // closed grid on bounded boxes so the edges are searched
    let axis = |k: usize, i: usize| {
        let (lo, hi) = boxes[k];
        if periodic {
            lo + (hi - lo) * i as f64 / n as f64
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    };
    let total = n.pow(d as u32);
    let mut buf = vec![0.0; model.outcome_count()];
    let mut values = Vec::with_capacity(total);
    let mut point = vec![0.0; d];
    let index_of = |idx: usize| -> Vec<usize> {
        let mut digits = vec![0; d];
        let mut r = idx;
        for k in (0..d).rev() {
            digits[k] = r % n;
            r /= n;
        }
        digits
    };
    for idx in 0..total {
        let digits = index_of(idx);
        for k in 0..d {
            point[k] = axis(k, digits[k]);
        }
        values.push(log_likelihood(model, data, &point, &mut buf));
    }
    if values.iter().all(|v| *v == f64::NEG_INFINITY) {
        return Err(Error::NonIdentifiable);
    }

    // grid-local maxima (ties with neighbours count as maxima)
    let mut seeds = Vec::new();
    for idx in 0..total {
        let v = values[idx];
        if v == f64::NEG_INFINITY {
            continue;
        }
        let digits = index_of(idx);
        let mut is_max = true;
        'outer: for k in 0..d {
            for step in [-1i64, 1] {
                let mut nb = digits.clone();
                let next = nb[k] as i64 + step;
                if periodic {
                    nb[k] = next.rem_euclid(n as i64) as usize;
                } else if next < 0 || next >= n as i64 {
                    continue;
                } else {
                    nb[k] = next as usize;
                }
                let j = nb.iter().fold(0, |acc, &x| acc * n + x);
                if values[j] > v {
                    is_max = false;
                    break 'outer;
                }
            }
        }
        if is_max {
            seeds.push(idx);
        }
    }
    seeds.sort_by(|a, b| values[*b].total_cmp(&values[*a]).then(a.cmp(b)));
    seeds.truncate(8);

    let spacing = boxes.iter().map(|(lo, hi)| (hi - lo) / n as f64).fold(f64::INFINITY, f64::min);
    let mut peaks: Vec<(Vec<f64>, f64)> = Vec::new();
    for idx in seeds {
        let digits = index_of(idx);
        let start: Vec<f64> = (0..d).map(|k| axis(k, digits[k])).collect();
        let (x, v) = compass_refine(model, data, start, values[idx], spacing, &boxes, periodic, &mut buf);
        peaks.push((x, v));
    }
    let ll_tol = |a: f64| 1e-9 * a.abs().max(1.0);
    let best_value = peaks.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let mut top: Vec<Vec<f64>> = Vec::new();
    for (x, v) in &peaks {
        if best_value - v <= ll_tol(best_value) {
            let distinct = top.iter().all(|y| phase_distance(x, y, periodic) > spacing);
            if distinct {
                top.push(x.clone());
            }
        }
    }
    top.sort_by(|a, b| lexicographic(a, b));
    let estimate = top[0].clone();
    let alternative = top.get(1).cloned();
    let value = log_likelihood(model, data, &estimate, &mut buf);
    Ok(MleResult {
        estimate: PhaseVector::from(estimate),
        log_likelihood: value,
        multimodal: alternative.is_some(),
        alternative: alternative.map(PhaseVector::from),
    })
}

fn lexicographic(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            other => return other,
        }
    }
    std::cmp::Ordering::Equal
}

fn phase_distance(a: &[f64], b: &[f64], periodic: bool) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| if periodic { wrap_phase(x - y).abs() } else { (x - y).abs() })
        .fold(0.0, f64::max)
}

#[allow(clippy::too_many_arguments)]
fn compass_refine<M: ProbabilityModel + ?Sized>(
    model: &M,
    data: &[CountRecord],
    mut x: Vec<f64>,
    mut value: f64,
    initial_step: f64,
    boxes: &[(f64, f64)],
    periodic: bool,
    buf: &mut [f64],
) -> (Vec<f64>, f64) {
    let d = x.len();
    let mut step = initial_step;
    let mut trial = x.clone();
    while step > REFINE_TOL {
        let mut moved = false;
        for k in 0..d {
            for dir in [1.0, -1.0] {
                trial.copy_from_slice(&x);
                trial[k] += dir * step;
                if periodic {
                    trial[k] = wrap_phase(trial[k]);
                } else {
                    trial[k] = trial[k].clamp(boxes[k].0, boxes[k].1);
                }
                let v = log_likelihood(model, data, &trial, buf);
                if v > value {
                    value = v;
                    x.copy_from_slice(&trial);
                    moved = true;
                    break;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    (x, value)
}

/// One step of an estimation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationRecord {
    /// Number of measurements (repetitions ν) absorbed so far.
    pub step: usize,
    pub estimate: PhaseVector,
    /// Row-major `d × d` posterior covariance.
    pub covariance: Vec<f64>,
    pub controls: PhaseVector,
    pub utility: f64,
}

impl EstimationRecord {
    pub fn dim(&self) -> usize {
        self.estimate.len()
    }

    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_row_slice(d, d, &self.covariance)
    }

    pub fn covariance_trace(&self) -> f64 {
        let d = self.dim();
        (0..d).map(|i| self.covariance[i * d + i]).sum()
    }
}

/// How controls are picked before each SMC measurement.
#[derive(Clone, Debug, PartialEq)]
pub enum ControlStrategy {
    Fixed(Vec<f64>),
    /// Minimize expected posterior variance over the candidates; an empty
    /// list falls back to `fallback`.
    Adaptive { candidates: Vec<Vec<f64>>, fallback: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Estimator {
    Smc { particles: usize, strategy: ControlStrategy },
    /// Shots split evenly across the listed control settings.
    Mle { grid_resolution: usize, settings: Vec<Vec<f64>>, bounds: Option<Vec<(f64, f64)>> },
}

/// A fully specified simulated experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub truth: PhaseVector,
    pub estimator: Estimator,
    /// Number of single-shot measurements ν.
    pub repetitions: usize,
    pub seed: u64,
    /// Per-shot `Tr(F⁻¹)` and `Tr(Q⁻¹)` references for the summary.
    pub fisher_reference: Option<f64>,
    pub quantum_reference: Option<f64>,
}

/// Final comparison of a run against the per-shot bounds divided by ν.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub repetitions: usize,
    pub covariance_trace: f64,
    pub fisher_bound: Option<f64>,
    pub quantum_bound: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimationRun {
    pub records: Vec<EstimationRecord>,
    pub summary: RunSummary,
    /// Number of updates that redrew the cloud from the prior.
    pub prior_resets: usize,
    pub multimodal: bool,
}

fn scenario_error(context: &str, e: Error) -> Error {
    match e {
        Error::Model(m) => Error::Model(format!("{context}: {m}")),
        Error::Parameter { name, reason } => Error::Parameter { name, reason: format!("{context}: {reason}") },
        other => other,
    }
}

/// Simulates the scenario at its true phases and runs the estimator.
/// Stream 0 of the seed drives the prior and resampling, stream 1 the
/// simulated outcomes.
pub fn run_estimation<M: ProbabilityModel + ?Sized>(model: &M, scenario: &Scenario) -> Result<EstimationRun> {
    let d = model.phase_dim();
    if scenario.truth.len() != d {
        return Err(Error::Dimension { expected: d, found: scenario.truth.len() });
    }
    if scenario.repetitions == 0 {
        return Err(param("repetitions", "must be at least 1"));
    }
    let truth = scenario.truth.as_slice();
    let mut filter_rng = split(scenario.seed, 0);
    let mut data_rng = split(scenario.seed, 1);
    let mut probs = vec![0.0; model.outcome_count()];

    let (records, prior_resets, multimodal) = match &scenario.estimator {
        Estimator::Smc { particles, strategy } => {
            let mut cloud = smc_init_with(Prior::UniformTorus, *particles, d, &mut filter_rng)
                .map_err(|e| scenario_error("smc", e))?;
            let mut records = Vec::with_capacity(scenario.repetitions);
            let mut resets = 0;
            for step in 1..=scenario.repetitions {
                let (controls, utility) = match strategy {
                    ControlStrategy::Fixed(c) => (c.clone(), f64::NAN),
                    ControlStrategy::Adaptive { candidates, fallback } if candidates.is_empty() => {
                        (fallback.clone(), f64::NAN)
                    }
                    ControlStrategy::Adaptive { candidates, .. } => {
                        let choice = choose_controls(&cloud, model, candidates)?;
                        (choice.controls, choice.utility)
                    }
                };
                check_model(model, d, &controls)?;
                model.probabilities_into(truth, &controls, &mut probs);
                let outcome = categorical(&probs, data_rng.random());
                let event = cloud.update(model, &controls, outcome, &mut filter_rng)?;
                resets += event.prior_reset as usize;
                let cov = cloud.covariance();
                records.push(EstimationRecord {
                    step,
                    estimate: cloud.circular_mean(),
                    covariance: row_major(&cov),
                    controls: PhaseVector::new(controls),
                    utility,
                });
            }
            (records, resets, false)
        }
        Estimator::Mle { grid_resolution, settings, bounds } => {
            if settings.is_empty() {
                return Err(param("settings", "at least one control setting"));
            }
            let mut data = Vec::with_capacity(settings.len());
            let k = settings.len();
            for (t, c) in settings.iter().enumerate() {
                check_model(model, d, c)?;
                let shots = scenario.repetitions / k + usize::from(t < scenario.repetitions % k);
                model.probabilities_into(truth, c, &mut probs);
                let mut counts = vec![0u64; probs.len()];
                for _ in 0..shots {
                    counts[categorical(&probs, data_rng.random())] += 1;
                }
                data.push(CountRecord { controls: c.clone(), counts });
            }
            let fit = mle_estimate_multi(model, &data, *grid_resolution, bounds.as_deref())
                .map_err(|e| scenario_error("mle", e))?;
            let info = design_fisher(model, fit.estimate.as_slice(), &data)?;
            let cov = inverse_bound(&info).matrix;
            let record = EstimationRecord {
                step: scenario.repetitions,
                estimate: fit.estimate,
                covariance: row_major(&cov),
                controls: PhaseVector::new(settings[0].clone()),
                utility: f64::NAN,
            };
            (vec![record], 0, fit.multimodal)
        }
    };
    let last = records.last().expect("at least one record");
    let nu = scenario.repetitions as f64;
    let summary = RunSummary {
        repetitions: scenario.repetitions,
        covariance_trace: last.covariance_trace(),
        fisher_bound: scenario.fisher_reference.map(|f| f / nu),
        quantum_bound: scenario.quantum_reference.map(|q| q / nu),
    };
    Ok(EstimationRun { records, summary, prior_resets, multimodal })
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

/// Total Fisher information of a measurement design, `Σₜ nₜ F(φ, cₜ)`.
pub fn design_fisher<M: ProbabilityModel + ?Sized>(model: &M, phases: &[f64], data: &[CountRecord]) -> Result<InfoMatrix> {
    let d = model.phase_dim();
    let mut total = InfoMatrix::new(DMatrix::zeros(d, d))?;
    for rec in data {
        let shots: u64 = rec.counts.iter().sum();
        let f = fi_matrix(model, phases, &rec.controls, DEFAULT_STEP)?.matrix;
        total = total.sum(&f.scaled(shots as f64))?;
    }
    Ok(total)
}

/// Control setting with the smallest per-shot `Tr(F⁻¹)` at `phases`.
pub fn best_single_control<M: ProbabilityModel + ?Sized>(
    model: &M,
    phases: &[f64],
    candidates: &[Vec<f64>],
) -> Result<(Vec<f64>, f64)> {
    let mut best: Option<(Vec<f64>, f64)> = None;
    for c in candidates {
        let f = fi_matrix(model, phases, c, DEFAULT_STEP)?.matrix;
        let b = inverse_bound(&f);
        if b.singular {
            continue;
        }
        let t = b.trace();
        if best.as_ref().is_none_or(|(_, v)| t < *v) {
            best = Some((c.clone(), t));
        }
    }
    best.ok_or_else(|| Error::Model("Fisher information singular at every candidate".into()))
}

/// Exponential approach `r(ν) ≈ A e^{−ν/τ}` fitted to the excess
/// `Tr V̂(ν) − Tr(F⁻¹)/ν` by least squares on `ln r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub tau: f64,
    pub amplitude: f64,
    pub points: usize,
}

pub fn fit_decay(steps: &[f64], traces: &[f64], fisher_trace: f64) -> Option<DecayFit> {
    let pts: Vec<(f64, f64)> = steps
        .iter()
        .zip(traces)
        .filter_map(|(&nu, &t)| {
            let r = t - fisher_trace / nu;
            (r > 0.0 && nu > 0.0).then(|| (nu, r.ln()))
        })
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    if slope >= 0.0 {
        return None;
    }
    Some(DecayFit { tau: -1.0 / slope, amplitude: (my - slope * mx).exp(), points: pts.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fisher::{ConstantModel, CosineFringe};

    #[test]
    fn init_has_full_ess_and_is_deterministic() {
        let a = smc_init(Prior::UniformTorus, 1000, 2, 5).unwrap();
        assert!((a.ess() - 1000.0).abs() < 1e-9);
        assert_eq!(a, smc_init(Prior::UniformTorus, 1000, 2, 5).unwrap());
        assert!(smc_init(Prior::UniformTorus, 99, 2, 5).is_err());
        assert!(a.particles().flatten().all(|x| (-PI..PI).contains(x)));
    }

    #[test]
    fn constant_likelihood_leaves_weights() {
        let cloud = ParticleCloud::new(1, vec![0.1, 0.2, 0.3], vec![0.2, 0.3, 0.5]).unwrap();
        let model = ConstantModel { d: 1, probabilities: vec![0.25, 0.75] };
        let mut rng = split(1, 0);
        let next = smc_update(&cloud, &model, &[], 1, &mut rng).unwrap();
        for (a, b) in next.weights().iter().zip(cloud.weights()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn impossible_particle_is_eliminated() {
        let mut particles = vec![0.0; 100];
        particles.extend(vec![-PI; 100]);
        let mut cloud = ParticleCloud::new(1, particles, vec![1.0; 200]).unwrap();
        let mut rng = split(1, 0);
        let ev = cloud.update(&CosineFringe, &[], 0, &mut rng).unwrap();
        // half the mass disappears, ESS = count/2 exactly, no resampling
        assert!(!ev.resampled);
        assert!(cloud.weights()[..100].iter().all(|w| (w - 0.01).abs() < 1e-15));
        assert!(cloud.weights()[100..].iter().all(|w| *w < 1e-30));
    }

    #[test]
    fn impossible_outcome_resets_to_prior() {
        let mut cloud = ParticleCloud::new(1, vec![0.0; 100], vec![1.0; 100]).unwrap();
        let mut rng = split(1, 0);
        let ev = cloud.update(&CosineFringe, &[], 1, &mut rng).unwrap();
        assert!(ev.prior_reset);
        assert!((cloud.ess() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn circular_statistics_straddle_the_cut() {
        let cloud = ParticleCloud::new(1, vec![PI - 0.1, -PI + 0.1], vec![1.0, 1.0]).unwrap();
        assert!(cloud.circular_mean()[0].abs() > PI - 1e-9);
        assert!((cloud.covariance_trace() - 0.01).abs() < 1e-12);
    }

    #[test]
    fn concentrated_cloud_picks_first_candidate() {
        let cloud = ParticleCloud::new(1, vec![0.3; 200], vec![1.0; 200]).unwrap();
        let model = crate::fisher::CosineFringe;
        let choice = choose_controls(&cloud, &Shifted(model), &candidate_grid(1, 8)).unwrap();
        assert_eq!(choice.index, 0);
        assert!(choice.utility.abs() < 1e-15);
    }

    /// Cosine fringe at `φ − c`.
    struct Shifted(CosineFringe);

    impl ProbabilityModel for Shifted {
        fn phase_dim(&self) -> usize {
            1
        }
        fn control_dim(&self) -> usize {
            1
        }
        fn outcome_count(&self) -> usize {
            2
        }
        fn probabilities_into(&self, phases: &[f64], controls: &[f64], out: &mut [f64]) {
            self.0.probabilities_into(&[phases[0] - controls[0]], &[], out)
        }
    }

    #[test]
    fn utility_matches_explicit_posteriors() {
        let cloud = smc_init(Prior::UniformTorus, 400, 1, 3).unwrap();
        let model = Shifted(CosineFringe);
        let c = [0.4];
        let mut rng = split(0, 0);
        let mut oracle = 0.0;
        for o in 0..2 {
            let pred: f64 = cloud
                .particles()
                .zip(cloud.weights())
                .map(|(p, w)| w * model.probabilities(p, &c)[o])
                .sum();
            let mut post = cloud.clone();
            post.weights.iter_mut().zip(cloud.particles()).for_each(|(w, p)| *w *= model.probabilities(p, &c)[o]);
            let t: f64 = post.weights.iter().sum();
            post.weights.iter_mut().for_each(|w| *w /= t);
            let mean = circular_mean_of(&cloud.particles, &cloud.weights, 1);
            oracle += pred * wrapped_covariance(&post.particles, &post.weights, &mean).trace();
            let _ = &mut rng;
        }
        assert!((expected_utility(&cloud, &model, &c) - oracle).abs() < 1e-12);
    }

    #[test]
    fn candidate_grid_sizes() {
        assert_eq!(candidate_grid(1, 32).len(), 32);
        assert_eq!(candidate_grid(2, 32).len(), 256);
        assert_eq!(candidate_grid(3, 32).len(), 216);
        assert_eq!(candidate_grid(0, 32), vec![Vec::<f64>::new()]);
    }

    #[test]
    fn mle_degenerate_peak() {
        let r = mle_estimate(&CosineFringe, &[1000, 0], 16).unwrap();
        assert!(r.estimate[0].abs() < 1e-8);
    }

    #[test]
    fn mle_flags_sign_ambiguity() {
        let r = mle_estimate(&CosineFringe, &[750, 250], 16).unwrap();
        let want = 2.0 * 0.75f64.sqrt().acos();
        assert!((r.estimate[0] + want).abs() < 1e-7, "{:?}", r.estimate);
        assert!(r.multimodal);
        assert!((r.alternative.unwrap()[0] - want).abs() < 1e-7);
    }

    #[test]
    fn mle_rejects_bad_input() {
        assert!(mle_estimate(&CosineFringe, &[0, 0], 16).is_err());
        assert!(mle_estimate(&CosineFringe, &[1, 1], 4).is_err());
        let impossible = ConstantModel { d: 1, probabilities: vec![1.0, 0.0] };
        assert_eq!(mle_estimate(&impossible, &[0, 3], 8).unwrap_err(), Error::NonIdentifiable);
    }

    #[test]
    fn decay_fit_recovers_tau() {
        let steps: Vec<f64> = (1..=50).map(|k| k as f64).collect();
        let traces: Vec<f64> = steps.iter().map(|nu| 2.0 / nu + 3.0 * (-nu / 7.0).exp()).collect();
        let fit = fit_decay(&steps, &traces, 2.0).unwrap();
        assert!((fit.tau - 7.0).abs() < 1e-9);
        assert!((fit.amplitude - 3.0).abs() < 1e-9);
    }
}
