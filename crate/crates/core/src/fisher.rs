//! Classical and quantum Fisher information matrices and Cramér-Rao bounds.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{param, Error, Result};
use crate::hilbert::{covariance_matrix, FockState};

/// Default central-difference step for exact models (radians).
pub const DEFAULT_STEP: f64 = 1e-4;
/// Default step for frequency data; wide enough to dominate shot noise.
pub const EMPIRICAL_STEP: f64 = 0.05;
/// Outcomes rarer than this are left out of Fisher sums.
pub const ZERO_PROBABILITY: f64 = 1e-12;
/// A derivative larger than this at a zero-probability outcome is flagged.
pub const DIVERGENCE_DERIVATIVE: f64 = 1e-6;
/// Eigenvalue cutoff for pseudoinversion, relative to the largest eigenvalue
/// and never below this absolute value, so a matrix that vanishes up to
/// rounding has rank zero.
pub const PINV_CUTOFF: f64 = 1e-10;
/// Range of the factor relating the best attainable weighted bound to the
/// quantum one, `Tr(R F⁻¹) = f Tr(R Q⁻¹)` with `f` in this interval. It is
/// carried as metadata, not computed.
pub const ATTAINABILITY_FACTOR: (f64, f64) = (1.0, 2.0);

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;
const NORMALIZATION_TOL: f64 = 1e-10;

fn scale_of(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(1.0_f64, |acc, x| acc.max(x.abs()))
}

fn check_symmetric_psd(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Dimension { expected: m.nrows(), found: m.ncols() });
    }
    let scale = scale_of(m);
    let asym = (m - m.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::Matrix { property: "symmetric", violation: asym });
    }
    if m.nrows() > 0 {
        let min_eig = SymmetricEigen::new(symmetrize(m)).eigenvalues.min();
        if min_eig < -PSD_TOL * scale {
            return Err(Error::Matrix { property: "positive semidefinite", violation: min_eig });
        }
    }
    Ok(())
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// A symmetric positive-semidefinite Fisher-type information matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct InfoMatrix {
    entries: DMatrix<f64>,
}

impl InfoMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        check_symmetric_psd(&entries)?;
        Ok(Self { entries: symmetrize(&entries) })
    }

    pub fn from_row_slice(d: usize, data: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_row_slice(d, d, data))
    }

    pub fn identity(d: usize) -> Self {
        Self { entries: DMatrix::identity(d, d) }
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut e: Vec<f64> = SymmetricEigen::new(self.entries.clone()).eigenvalues.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    /// Scales the matrix, e.g. to go from per-shot to ν-shot information.
    pub fn scaled(&self, factor: f64) -> InfoMatrix {
        InfoMatrix { entries: &self.entries * factor }
    }

    pub fn sum(&self, other: &InfoMatrix) -> Result<InfoMatrix> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension { expected: self.dim(), found: other.dim() });
        }
        Ok(InfoMatrix { entries: &self.entries + &other.entries })
    }

    /// Smallest eigenvalue of `self - other`; nonnegative when `other ⪯ self`.
    pub fn loewner_gap(&self, other: &InfoMatrix) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension { expected: self.dim(), found: other.dim() });
        }
        let diff = symmetrize(&(&self.entries - &other.entries));
        Ok(SymmetricEigen::new(diff).eigenvalues.min())
    }

    pub fn max_abs_diff(&self, other: &InfoMatrix) -> f64 {
        (&self.entries - &other.entries).amax()
    }
}

impl fmt::Display for InfoMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.entries)
    }
}

/// Weight matrix `R` for scalar figures of merit `Tr(R V)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    entries: DMatrix<f64>,
}

impl CostMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        check_symmetric_psd(&entries)?;
        Ok(Self { entries: symmetrize(&entries) })
    }

    pub fn identity(d: usize) -> Self {
        Self { entries: DMatrix::identity(d, d) }
    }

    pub fn zeros(d: usize) -> Self {
        Self { entries: DMatrix::zeros(d, d) }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }
}

/// Outcome distribution `p(n | φ, c)` over unknown phases `φ` and optional
/// control phases `c`. Implementations must be callable from many threads.
pub trait ProbabilityModel: Send + Sync {
    fn phase_dim(&self) -> usize;

    fn control_dim(&self) -> usize {
        0
    }

    fn outcome_count(&self) -> usize;

    /// Writes the outcome probabilities into `out` (length `outcome_count`).
    fn probabilities_into(&self, phases: &[f64], controls: &[f64], out: &mut [f64]);

    fn probabilities(&self, phases: &[f64], controls: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.outcome_count()];
        self.probabilities_into(phases, controls, &mut out);
        out
    }
}

impl<M: ProbabilityModel + ?Sized> ProbabilityModel for std::sync::Arc<M> {
    fn phase_dim(&self) -> usize {
        (**self).phase_dim()
    }
    fn control_dim(&self) -> usize {
        (**self).control_dim()
    }
    fn outcome_count(&self) -> usize {
        (**self).outcome_count()
    }
    fn probabilities_into(&self, phases: &[f64], controls: &[f64], out: &mut [f64]) {
        (**self).probabilities_into(phases, controls, out)
    }
}

/// Evaluates a model and checks that it returned a distribution.
pub fn checked_probabilities<M: ProbabilityModel + ?Sized>(
    model: &M,
    phases: &[f64],
    controls: &[f64],
) -> Result<Vec<f64>> {
    if phases.len() != model.phase_dim() {
        return Err(Error::Dimension { expected: model.phase_dim(), found: phases.len() });
    }
    if controls.len() != model.control_dim() {
        return Err(Error::Dimension { expected: model.control_dim(), found: controls.len() });
    }
    let p = model.probabilities(phases, controls);
    if p.len() != model.outcome_count() {
        return Err(Error::Model(format!(
            "returned {} probabilities for {} outcomes",
            p.len(),
            model.outcome_count()
        )));
    }
    if let Some(bad) = p.iter().find(|x| !x.is_finite() || **x < -ZERO_PROBABILITY) {
        return Err(Error::Model(format!("invalid probability {bad}")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::Model(format!("probabilities sum to {total}")));
    }
    Ok(p)
}

/// Binary fringe `p(0|φ) = cos²(φ/2)`, `p(1|φ) = sin²(φ/2)`; unit Fisher
/// information away from multiples of π.
#[derive(Clone, Copy, Debug, Default)]
pub struct CosineFringe;

impl ProbabilityModel for CosineFringe {
    fn phase_dim(&self) -> usize {
        1
    }
    fn outcome_count(&self) -> usize {
        2
    }
    fn probabilities_into(&self, phases: &[f64], _controls: &[f64], out: &mut [f64]) {
        let c = (phases[0] / 2.0).cos();
        out[0] = c * c;
        out[1] = 1.0 - c * c;
    }
}

/// A model that ignores its phases.
#[derive(Clone, Debug)]
pub struct ConstantModel {
    pub d: usize,
    pub probabilities: Vec<f64>,
}

impl ProbabilityModel for ConstantModel {
    fn phase_dim(&self) -> usize {
        self.d
    }
    fn outcome_count(&self) -> usize {
        self.probabilities.len()
    }
    fn probabilities_into(&self, _phases: &[f64], _controls: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.probabilities);
    }
}

/// Result of a finite-difference Fisher computation.
#[derive(Clone, Debug)]
pub struct FisherEstimate {
    pub matrix: InfoMatrix,
    /// Outcomes excluded for zero probability whose derivative was not small.
    pub divergent_outcomes: Vec<usize>,
}

impl FisherEstimate {
    /// True when the information may be singular (infinite) at this point.
    pub fn possibly_divergent(&self) -> bool {
        !self.divergent_outcomes.is_empty()
    }
}

/// Plug-in Fisher matrix from probabilities at the centre and at ±step on
/// each axis: `F_ij = Σ_n ∂_i p ∂_j p / p`.
fn fisher_from_differences(
    centre: &[f64],
    plus: &[Vec<f64>],
    minus: &[Vec<f64>],
    step: f64,
) -> Result<FisherEstimate> {
    let d = plus.len();
    let outcomes = centre.len();
    let mut f = DMatrix::zeros(d, d);
    let mut divergent = Vec::new();
    let mut grad = vec![0.0; d];
    for n in 0..outcomes {
        for i in 0..d {
            grad[i] = (plus[i][n] - minus[i][n]) / (2.0 * step);
        }
        let p = centre[n];
        if p < ZERO_PROBABILITY {
            if grad.iter().any(|g| g.abs() > DIVERGENCE_DERIVATIVE) {
                divergent.push(n);
            }
            continue;
        }
        for i in 0..d {
            for j in 0..d {
                f[(i, j)] += grad[i] * grad[j] / p;
            }
        }
    }
    Ok(FisherEstimate { matrix: InfoMatrix::new(f)?, divergent_outcomes: divergent })
}

/// Fisher information matrix of `model` at `phases` (controls held fixed)
/// using central differences of width `step`.
pub fn fi_matrix<M: ProbabilityModel + ?Sized>(
    model: &M,
    phases: &[f64],
    controls: &[f64],
    step: f64,
) -> Result<FisherEstimate> {
    if !(step > 0.0 && step <= 0.1) {
        return Err(param("step", format!("{step} not in (0, 0.1]")));
    }
    let centre = checked_probabilities(model, phases, controls)?;
    let d = model.phase_dim();
    let mut plus = Vec::with_capacity(d);
    let mut minus = Vec::with_capacity(d);
    let mut shifted = phases.to_vec();
    for i in 0..d {
        shifted[i] = phases[i] + step;
        plus.push(checked_probabilities(model, &shifted, controls)?);
        shifted[i] = phases[i] - step;
        minus.push(checked_probabilities(model, &shifted, controls)?);
        shifted[i] = phases[i];
    }
    fisher_from_differences(&centre, &plus, &minus, step)
}

/// QFI matrix of a pure state whose phases are generated by the number
/// operators of `modes`: `Q_ij = 4 Cov(N_i, N_j)`.
pub fn qfi_with_generators(state: &FockState, modes: &[usize]) -> Result<InfoMatrix> {
    let cov = covariance_matrix(state, modes)?;
    InfoMatrix::new(cov * 4.0)
}

/// QFI matrix for the phases on modes `1..M` (mode 0 is the reference).
pub fn qfi_matrix(state: &FockState) -> Result<InfoMatrix> {
    if state.mode_count() < 2 {
        return Err(param("state", "needs at least one probing mode besides the reference"));
    }
    let modes: Vec<usize> = (1..state.mode_count()).collect();
    qfi_with_generators(state, &modes)
}

/// Moore-Penrose inverse of an information matrix.
#[derive(Clone, Debug)]
pub struct InverseBound {
    pub matrix: DMatrix<f64>,
    /// Set when some eigenvalue fell below the cutoff; the bound then only
    /// constrains the supported subspace.
    pub singular: bool,
    pub rank: usize,
}

impl InverseBound {
    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }
}

pub fn inverse_bound(info: &InfoMatrix) -> InverseBound {
    let d = info.dim();
    if d == 0 {
        return InverseBound { matrix: DMatrix::zeros(0, 0), singular: false, rank: 0 };
    }
    let eig = SymmetricEigen::new(info.entries.clone());
    let max = eig.eigenvalues.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    let cutoff = PINV_CUTOFF * max.max(1.0);
    let mut inv = DMatrix::zeros(d, d);
    let mut rank = 0;
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > cutoff && lambda > 0.0 {
            rank += 1;
            let v = eig.eigenvectors.column(k);
            inv += (v * v.transpose()) / lambda;
        }
    }
    InverseBound { matrix: symmetrize(&inv), singular: rank < d, rank }
}

/// `Tr(R · info⁺)`.
pub fn weighted_bound(info: &InfoMatrix, cost: &CostMatrix) -> Result<f64> {
    if info.dim() != cost.dim() {
        return Err(Error::Dimension { expected: info.dim(), found: cost.dim() });
    }
    let inv = inverse_bound(info);
    Ok((cost.matrix() * inv.matrix).trace().max(0.0))
}

/// Probe families with closed-form total-variance bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingFamily {
    /// Coherent probes with equal energy per mode, infinite reference.
    CoherentEqual,
    /// d independent two-mode NOON states with equal photon numbers.
    SeparateNoon,
    /// Generalized multimode NOON state at the optimal reference weight.
    GeneralizedNoonOptimal,
}

impl ScalingFamily {
    pub const ALL: [ScalingFamily; 3] =
        [ScalingFamily::CoherentEqual, ScalingFamily::SeparateNoon, ScalingFamily::GeneralizedNoonOptimal];

    pub fn name(self) -> &'static str {
        match self {
            ScalingFamily::CoherentEqual => "coherent-equal",
            ScalingFamily::SeparateNoon => "separate-noon",
            ScalingFamily::GeneralizedNoonOptimal => "generalized-noon-optimal",
        }
    }
}

impl FromStr for ScalingFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ScalingFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| param("family", format!("unknown family `{s}`")))
    }
}

/// Closed-form lower bound on `Tr(V)` for a family at probing energy `n̄`.
pub fn scaling_table(family: ScalingFamily, d: usize, energy: f64) -> Result<f64> {
    if d == 0 {
        return Err(param("d", "must be at least 1"));
    }
    if !(energy > 0.0 && energy.is_finite()) {
        return Err(param("energy", format!("{energy} must be positive")));
    }
    let d = d as f64;
    Ok(match family {
        ScalingFamily::CoherentEqual => d * d / (4.0 * energy),
        ScalingFamily::SeparateNoon => d * d * d / (4.0 * energy * energy),
        ScalingFamily::GeneralizedNoonOptimal => d * d / (4.0 * energy * energy),
    })
}

/// Outcome weights (counts, or exact probabilities) recorded at a set of
/// phase settings.
#[derive(Clone, Debug, Default)]
pub struct FrequencyTable {
    rows: Vec<(Vec<f64>, Vec<f64>)>,
}

impl FrequencyTable {
    const MATCH_TOL: f64 = 1e-9;

    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, setting: Vec<f64>, counts: Vec<f64>) {
        self.rows.push((setting, counts));
    }

    pub fn insert_counts(&mut self, setting: Vec<f64>, counts: &[u64]) {
        self.insert(setting, counts.iter().map(|&c| c as f64).collect());
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn frequencies_at(&self, setting: &[f64]) -> Result<Vec<f64>> {
        let (_, counts) = self
            .rows
            .iter()
            .find(|(s, _)| {
                s.len() == setting.len()
                    && s.iter().zip(setting).all(|(a, b)| (a - b).abs() <= Self::MATCH_TOL)
            })
            .ok_or_else(|| param("frequencies", format!("missing grid point {setting:?}")))?;
        let total: f64 = counts.iter().sum();
        if !(total > 0.0) {
            return Err(param("frequencies", format!("no counts at {setting:?}")));
        }
        Ok(counts.iter().map(|c| c / total).collect())
    }
}

/// Fisher matrix estimated from frequencies at `centre` and `centre ± step·e_i`.
/// Outcomes never observed at the centre are excluded.
pub fn empirical_fi(table: &FrequencyTable, centre: &[f64], step: f64) -> Result<InfoMatrix> {
    if !(step > 0.0) {
        return Err(param("step", "must be positive"));
    }
    let f0 = table.frequencies_at(centre)?;
    let d = centre.len();
    let mut plus = Vec::with_capacity(d);
    let mut minus = Vec::with_capacity(d);
    let mut shifted = centre.to_vec();
    for i in 0..d {
        shifted[i] = centre[i] + step;
        let fp = table.frequencies_at(&shifted)?;
        shifted[i] = centre[i] - step;
        let fm = table.frequencies_at(&shifted)?;
        shifted[i] = centre[i];
        if fp.len() != f0.len() || fm.len() != f0.len() {
            return Err(Error::Dimension { expected: f0.len(), found: fp.len().min(fm.len()) });
        }
        plus.push(fp);
        minus.push(fm);
    }
    Ok(fisher_from_differences(&f0, &plus, &minus, step)?.matrix)
}

/// Frequency table holding exact model probabilities at the centre and the
/// ±step stencil; the infinite-sample limit of sampled data.
pub fn exact_stencil<M: ProbabilityModel + ?Sized>(
    model: &M,
    centre: &[f64],
    controls: &[f64],
    step: f64,
) -> Result<FrequencyTable> {
    let mut table = FrequencyTable::new();
    table.insert(centre.to_vec(), checked_probabilities(model, centre, controls)?);
    let mut shifted = centre.to_vec();
    for i in 0..centre.len() {
        for sign in [1.0, -1.0] {
            shifted[i] = centre[i] + sign * step;
            table.insert(shifted.clone(), checked_probabilities(model, &shifted, controls)?);
        }
        shifted[i] = centre[i];
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_model_has_no_information() {
        let m = ConstantModel { d: 2, probabilities: vec![0.2, 0.3, 0.5] };
        let f = fi_matrix(&m, &[0.1, 0.2], &[], DEFAULT_STEP).unwrap();
        assert_eq!(f.matrix.matrix().amax(), 0.0);
    }

    #[test]
    fn cosine_fringe_has_unit_information() {
        for phi in [0.3, 1.0, PI / 3.0, 2.5, -1.7] {
            let f = fi_matrix(&CosineFringe, &[phi], &[], DEFAULT_STEP).unwrap();
            assert!((f.matrix.matrix()[(0, 0)] - 1.0).abs() < 1e-7, "phi={phi}");
        }
    }

    #[test]
    fn fringe_zero_is_removable() {
        // p(1|0) = 0 with zero derivative: excluded without a divergence flag.
        let f = fi_matrix(&CosineFringe, &[0.0], &[], DEFAULT_STEP).unwrap();
        assert!(!f.possibly_divergent());
    }

    #[test]
    fn richardson_convergence() {
        // error(h) ~ c h², so halving h quarters the deviation
        let exact = 1.0;
        let e1 = fi_matrix(&CosineFringe, &[0.9], &[], 0.08).unwrap().matrix.matrix()[(0, 0)] - exact;
        let e2 = fi_matrix(&CosineFringe, &[0.9], &[], 0.04).unwrap().matrix.matrix()[(0, 0)] - exact;
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn step_range_and_normalization_are_checked() {
        assert!(fi_matrix(&CosineFringe, &[0.1], &[], 0.0).is_err());
        assert!(fi_matrix(&CosineFringe, &[0.1], &[], 0.2).is_err());
        let bad = ConstantModel { d: 1, probabilities: vec![0.5, 0.6] };
        assert!(matches!(fi_matrix(&bad, &[0.0], &[], DEFAULT_STEP), Err(Error::Model(_))));
    }

    #[test]
    fn inverse_of_diagonal() {
        let inv = inverse_bound(&InfoMatrix::diagonal(&[4.0, 16.0]).unwrap());
        assert!(!inv.singular);
        assert!((inv.matrix[(0, 0)] - 0.25).abs() < 1e-15);
        assert!((inv.matrix[(1, 1)] - 0.0625).abs() < 1e-15);
        assert!(inv.matrix[(0, 1)].abs() < 1e-15);
        let id = inverse_bound(&InfoMatrix::identity(3));
        assert!((id.matrix - DMatrix::<f64>::identity(3, 3)).amax() < 1e-15);
    }

    #[test]
    fn singular_inverse_is_flagged() {
        let info = InfoMatrix::from_row_slice(2, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        let inv = inverse_bound(&info);
        assert!(inv.singular);
        assert_eq!(inv.rank, 1);
        assert!((inv.matrix.clone() - DMatrix::from_element(2, 2, 0.25)).amax() < 1e-12);
    }

    #[test]
    fn rounding_noise_has_rank_zero() {
        let info = InfoMatrix::diagonal(&[3e-15, 1e-16]).unwrap();
        let inv = inverse_bound(&info);
        assert_eq!(inv.rank, 0);
        assert_eq!(inv.trace(), 0.0);
    }

    #[test]
    fn weighted_bounds() {
        let info = InfoMatrix::diagonal(&[4.0, 16.0]).unwrap();
        assert_eq!(weighted_bound(&info, &CostMatrix::zeros(2)).unwrap(), 0.0);
        assert!((weighted_bound(&info, &CostMatrix::identity(2)).unwrap() - 0.3125).abs() < 1e-15);
        assert!(weighted_bound(&info, &CostMatrix::identity(3)).is_err());
    }

    #[test]
    fn info_matrix_rejects_bad_input() {
        assert!(InfoMatrix::from_row_slice(2, &[1.0, 0.5, 0.0, 1.0]).is_err());
        assert!(InfoMatrix::from_row_slice(2, &[1.0, 2.0, 2.0, 1.0]).is_err());
        assert!(CostMatrix::new(DMatrix::from_row_slice(1, 1, &[-1.0])).is_err());
    }

    #[test]
    fn scaling_examples() {
        use ScalingFamily::*;
        assert_eq!(scaling_table(CoherentEqual, 2, 1.0).unwrap(), 1.0);
        assert_eq!(scaling_table(SeparateNoon, 2, 2.0).unwrap(), 0.5);
        assert_eq!(scaling_table(GeneralizedNoonOptimal, 2, 2.0).unwrap(), 0.25);
        assert!("nonsense".parse::<ScalingFamily>().is_err());
        assert_eq!("separate-noon".parse::<ScalingFamily>().unwrap(), SeparateNoon);
        assert!(scaling_table(SeparateNoon, 0, 1.0).is_err());
    }

    #[test]
    fn empirical_from_exact_probabilities() {
        let centre = [PI / 3.0];
        let table = exact_stencil(&CosineFringe, &centre, &[], EMPIRICAL_STEP).unwrap();
        let emp = empirical_fi(&table, &centre, EMPIRICAL_STEP).unwrap();
        let exact = fi_matrix(&CosineFringe, &centre, &[], EMPIRICAL_STEP).unwrap().matrix;
        assert!(emp.max_abs_diff(&exact) < 1e-10);
    }

    #[test]
    fn empirical_missing_point() {
        let mut table = FrequencyTable::new();
        table.insert_counts(vec![0.0], &[5, 5]);
        assert!(empirical_fi(&table, &[0.0], 0.05).is_err());
    }
}
