//! POVMs on the span of `{|N_m⟩}`, the states with all `N` photons in mode
//! `m`, together with Born-rule probabilities and outcome sampling.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use rand::Rng;

use crate::error::{param, Error, Result};
use crate::fisher::{InfoMatrix, ProbabilityModel, ZERO_PROBABILITY};
use crate::hilbert::{FockState, PhaseVector};
use crate::rng;

const HERMITIAN_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;
const COMPLETENESS_TOL: f64 = 1e-10;
const CLAMP_TOL: f64 = 1e-12;
const SUM_TOL: f64 = 1e-10;
const DEPENDENT_SEED: f64 = 1e-10;

/// Measurement on a `dim`-dimensional subspace.
#[derive(Clone, Debug)]
pub struct Povm {
    dim: usize,
    elements: Vec<DMatrix<C64>>,
}

impl Povm {
    /// Validates Hermiticity, positivity and completeness.
    pub fn new(elements: Vec<DMatrix<C64>>) -> Result<Self> {
        let dim = elements.first().map(|e| e.nrows()).ok_or_else(|| param("elements", "empty POVM"))?;
        let mut total = DMatrix::<C64>::zeros(dim, dim);
        for e in &elements {
            if e.nrows() != dim || e.ncols() != dim {
                return Err(Error::Dimension { expected: dim, found: e.nrows().max(e.ncols()) });
            }
            let herm = (e - e.adjoint()).camax();
            if herm > HERMITIAN_TOL {
                return Err(Error::Matrix { property: "Hermitian", violation: herm });
            }
            let h = (e + e.adjoint()).scale(0.5);
            let min = SymmetricEigen::new(h).eigenvalues.min();
            if min < -PSD_TOL {
                return Err(Error::Matrix { property: "positive semidefinite", violation: min });
            }
            total += e;
        }
        let gap = (total - DMatrix::<C64>::identity(dim, dim)).camax();
        if gap > COMPLETENESS_TOL {
            return Err(Error::Matrix { property: "complete (sum to identity)", violation: gap });
        }
        Ok(Self { dim, elements })
    }

    /// Rank-one projectors onto the given vectors.
    pub fn projective(vectors: &[DVector<C64>]) -> Result<Self> {
        Self::new(vectors.iter().map(|v| v * v.adjoint()).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[DMatrix<C64>] {
        &self.elements
    }

    /// Worst deviation of `Σ Π_n` from the identity.
    pub fn completeness_error(&self) -> f64 {
        let total = self.elements.iter().fold(DMatrix::<C64>::zeros(self.dim, self.dim), |acc, e| acc + e);
        (total - DMatrix::<C64>::identity(self.dim, self.dim)).camax()
    }

    /// Worst deviation of `Π_i Π_j` from `δ_ij Π_i`.
    pub fn orthogonality_error(&self) -> f64 {
        let mut worst = 0.0_f64;
        for (i, a) in self.elements.iter().enumerate() {
            for (j, b) in self.elements.iter().enumerate() {
                let prod = a * b;
                let want = if i == j { a.clone() } else { DMatrix::zeros(self.dim, self.dim) };
                worst = worst.max((prod - want).camax());
            }
        }
        worst
    }
}

/// The orthonormal vectors `Υ⁽ⁿ⁾`, `n = 0..d`: `Υ⁽⁰⁾` uniform and, for
/// `n > 0`, entries `1/√(n(n+1))` on `m < n`, `−n/√(n(n+1))` at `m = n`.
pub fn optimal_basis(d: usize) -> Vec<DVector<f64>> {
    let dim = d + 1;
    let mut basis = vec![DVector::from_element(dim, 1.0 / (dim as f64).sqrt())];
    for n in 1..=d {
        let nf = n as f64;
        let norm = (nf * (nf + 1.0)).sqrt();
        basis.push(DVector::from_fn(dim, |m, _| {
            if m < n {
                1.0 / norm
            } else if m == n {
                -nf / norm
            } else {
                0.0
            }
        }));
    }
    basis
}

fn to_complex(v: &DVector<f64>) -> DVector<C64> {
    v.map(|x| C64::new(x, 0.0))
}

/// Projective measurement onto [`optimal_basis`]; saturates the QFI for the
/// equal-weight generalized NOON probe.
pub fn optimal_povm(d: usize) -> Result<Povm> {
    if d == 0 {
        return Err(param("d", "must be at least 1"));
    }
    Povm::projective(&optimal_basis(d).iter().map(to_complex).collect::<Vec<_>>())
}

/// Orthonormal basis whose first vector is `probe` (normalized), completed by
/// Gram-Schmidt over the prefix vectors `(1,…,1,−n,0,…)`. For the uniform
/// probe this is exactly [`optimal_basis`].
pub fn probe_adapted_basis(probe: &[f64]) -> Result<Vec<DVector<f64>>> {
    let dim = probe.len();
    if dim < 2 {
        return Err(param("probe", "need at least two coefficients"));
    }
    let first = DVector::from_column_slice(probe);
    let norm = first.norm();
    if !(norm > 0.0) {
        return Err(param("probe", "zero vector"));
    }
    let mut basis = vec![first / norm];
    let seeds = (1..dim)
        .map(|n| DVector::from_fn(dim, |m, _| if m < n { 1.0 } else if m == n { -(n as f64) } else { 0.0 }))
        .chain((0..dim).map(|m| DVector::from_fn(dim, |k, _| if k == m { 1.0 } else { 0.0 })));
    for seed in seeds {
        if basis.len() == dim {
            break;
        }
        let mut v = seed.clone();
        for b in &basis {
            v -= b * b.dot(&seed);
        }
        // second pass keeps orthogonality at machine precision
        for b in &basis {
            let c = b.dot(&v);
            v -= b * c;
        }
        let n = v.norm();
        if n > DEPENDENT_SEED {
            basis.push(v / n);
        }
    }
    Ok(basis)
}

/// Projective POVM whose first element projects onto the probe itself.
pub fn probe_adapted_povm(probe: &[f64]) -> Result<Povm> {
    Povm::projective(&probe_adapted_basis(probe)?.iter().map(to_complex).collect::<Vec<_>>())
}

/// A state written in the `{|N_m⟩}` basis.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceState {
    pub photons: u32,
    pub coefficients: Vec<C64>,
}

impl SubspaceState {
    /// Extracts the coefficients of `|N_0⟩ … |N_{M−1}⟩`; fails if the state
    /// has weight anywhere else.
    pub fn from_fock(state: &FockState) -> Result<Self> {
        let modes = state.mode_count();
        let photons = state.max_photons();
        let mut coefficients = vec![C64::new(0.0, 0.0); modes];
        for (occ, a) in state.iter() {
            let occupied: Vec<usize> = (0..modes).filter(|&m| occ.get(m) > 0).collect();
            match occupied.as_slice() {
                [m] if occ.get(*m) == photons => coefficients[*m] = *a,
                _ => {
                    return Err(Error::Support(format!(
                        "component {occ} is not of the form |N_m⟩ with N = {photons}"
                    )))
                }
            }
        }
        Ok(Self { photons, coefficients })
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    /// Coefficients after `exp(i Σ φ_m N_m)` (mode 0 unshifted).
    pub fn evolved(&self, phases: &[f64]) -> DVector<C64> {
        let n = self.photons as f64;
        DVector::from_fn(self.dim(), |m, _| {
            if m == 0 {
                self.coefficients[0]
            } else {
                self.coefficients[m] * C64::from_polar(1.0, n * phases[m - 1])
            }
        })
    }
}

fn born_from_vector(psi: &DVector<C64>, povm: &Povm) -> Result<Vec<f64>> {
    let mut p: Vec<f64> = povm.elements.iter().map(|e| (psi.adjoint() * e * psi)[(0, 0)].re).collect();
    for x in &mut p {
        if *x < -CLAMP_TOL {
            return Err(Error::Model(format!("negative probability {x}")));
        }
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > SUM_TOL {
        return Err(Error::Model(format!("probabilities sum to {total}")));
    }
    Ok(p)
}

/// `p_n = ⟨ψ_φ|Π_n|ψ_φ⟩`.
pub fn born_probabilities(state: &FockState, povm: &Povm, phases: &PhaseVector) -> Result<Vec<f64>> {
    let sub = SubspaceState::from_fock(state)?;
    if sub.dim() != povm.dim() {
        return Err(Error::Dimension { expected: povm.dim(), found: sub.dim() });
    }
    if phases.len() != sub.dim() - 1 {
        return Err(Error::Dimension { expected: sub.dim() - 1, found: phases.len() });
    }
    born_from_vector(&sub.evolved(phases.as_slice()), povm)
}

/// Born-rule outcome model of a subspace probe under a fixed POVM.
#[derive(Clone, Debug)]
pub struct BornModel {
    state: SubspaceState,
    povm: Povm,
}

impl BornModel {
    pub fn new(state: &FockState, povm: Povm) -> Result<Self> {
        let state = SubspaceState::from_fock(state)?;
        if state.dim() != povm.dim() {
            return Err(Error::Dimension { expected: povm.dim(), found: state.dim() });
        }
        if state.dim() < 2 {
            return Err(param("state", "needs a probing mode"));
        }
        Ok(Self { state, povm })
    }

    pub fn povm(&self) -> &Povm {
        &self.povm
    }

    /// Fisher matrix from exact derivatives `∂_i p_n = 2 Re ⟨ψ|Π_n|∂_i ψ⟩`,
    /// skipping outcomes with `p_n < 1e-12`.
    pub fn fisher_exact(&self, phases: &[f64]) -> Result<InfoMatrix> {
        let d = self.phase_dim();
        if phases.len() != d {
            return Err(Error::Dimension { expected: d, found: phases.len() });
        }
        let psi = self.state.evolved(phases);
        let n = self.state.photons as f64;
        let mut f = DMatrix::zeros(d, d);
        let mut grad = vec![0.0; d];
        for e in &self.povm.elements {
            let e_psi = e * &psi;
            let p = psi.dotc(&e_psi).re;
            if p < ZERO_PROBABILITY {
                continue;
            }
            for i in 0..d {
                // ∂_i ψ = i N ψ_i e_i on mode i+1
                let dpsi = C64::new(0.0, n) * psi[i + 1];
                grad[i] = 2.0 * (e_psi[i + 1].conj() * dpsi).re;
            }
            for i in 0..d {
                for j in 0..d {
                    f[(i, j)] += grad[i] * grad[j] / p;
                }
            }
        }
        InfoMatrix::new(f)
    }
}

impl ProbabilityModel for BornModel {
    fn phase_dim(&self) -> usize {
        self.state.dim() - 1
    }

    fn outcome_count(&self) -> usize {
        self.povm.len()
    }

    fn probabilities_into(&self, phases: &[f64], _controls: &[f64], out: &mut [f64]) {
        let psi = self.state.evolved(phases);
        for (o, e) in out.iter_mut().zip(&self.povm.elements) {
            *o = psi.dotc(&(e * &psi)).re.max(0.0);
        }
    }
}

/// A phase point where a measurement's Fisher matrix matches the QFI.
#[derive(Clone, Debug)]
pub struct SaturationPoint {
    pub phases: Vec<f64>,
    pub max_deviation: f64,
    /// Candidates tried before this one, with their deviations.
    pub rejected: Vec<(Vec<f64>, f64)>,
}

/// Scans `φ = 0`, then `ε (1/d, 2/d, …, 1)` for `ε = 10⁻¹ … 10⁻⁶`, and returns
/// the first point where `max |F − Q| ≤ tol`.
pub fn find_saturation_point(model: &BornModel, qfi: &InfoMatrix, tol: f64) -> Result<Option<SaturationPoint>> {
    let d = model.phase_dim();
    let direction: Vec<f64> = (1..=d).map(|k| k as f64 / d as f64).collect();
    let candidates = std::iter::once(vec![0.0; d])
        .chain((1..=6).map(|k| direction.iter().map(|x| x * 10f64.powi(-k)).collect()));
    let mut rejected = Vec::new();
    for phases in candidates {
        let f = model.fisher_exact(&phases)?;
        let dev = f.max_abs_diff(qfi);
        if dev <= tol {
            return Ok(Some(SaturationPoint { phases, max_deviation: dev, rejected }));
        }
        rejected.push((phases, dev));
    }
    Ok(None)
}

/// One simulated measurement result.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OutcomeSample {
    pub outcome_index: usize,
    /// Phases in effect for this shot.
    pub setting: PhaseVector,
    /// Seed of the stream the shot came from and the shot's position in it.
    pub seed_record: (u64, u64),
}

/// `shots` i.i.d. outcomes from the Born distribution, reproducible from `seed`.
pub fn sample_outcomes(
    state: &FockState,
    povm: &Povm,
    phases: &PhaseVector,
    shots: usize,
    seed: u64,
) -> Result<Vec<OutcomeSample>> {
    if shots == 0 {
        return Err(param("shots", "must be at least 1"));
    }
    let p = born_probabilities(state, povm, phases)?;
    let mut rng = rng::seeded(seed);
    Ok((0..shots)
        .map(|k| OutcomeSample {
            outcome_index: rng::categorical(&p, rng.random::<f64>()),
            setting: phases.clone(),
            seed_record: (seed, k as u64),
        })
        .collect())
}

/// Outcome counts of `shots` draws from `probabilities`.
pub fn sample_counts<R: Rng + ?Sized>(probabilities: &[f64], shots: u64, rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0; probabilities.len()];
    for _ in 0..shots {
        counts[rng::categorical(probabilities, rng.random::<f64>())] += 1;
    }
    counts
}
