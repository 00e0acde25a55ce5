//! Sparse multimode Fock-space states.
//!
//! A [`FockState`] is a map from occupation vectors to complex amplitudes.
//! Mode 0 is the phase reference: [`apply_phases`] takes `mode_count - 1`
//! phases and leaves mode 0 untouched. All states are immutable once built.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Amplitudes with magnitude below this are dropped from the support.
pub const PRUNE_TOLERANCE: f64 = 1e-14;
/// Norm-squared deviations up to this are renormalized silently.
pub const RENORMALIZE_WINDOW: f64 = 1e-9;
const EXACT_NORM: f64 = 1e-12;

/// Photon numbers per mode.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OccupationVector {
    counts: Vec<u32>,
    total: u32,
}

impl OccupationVector {
    pub fn new(counts: Vec<u32>) -> Self {
        let total = counts.iter().sum();
        Self { counts, total }
    }

    /// All `photons` in `mode`, vacuum elsewhere.
    pub fn single_mode(modes: usize, mode: usize, photons: u32) -> Self {
        let mut counts = vec![0; modes];
        counts[mode] = photons;
        Self::new(counts)
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn mode_count(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u32 {
        self.total
    }

    pub fn get(&self, mode: usize) -> u32 {
        self.counts[mode]
    }
}

impl From<Vec<u32>> for OccupationVector {
    fn from(counts: Vec<u32>) -> Self {
        Self::new(counts)
    }
}

impl fmt::Display for OccupationVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (k, n) in self.counts.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, "⟩")
    }
}

/// Normalized pure state on `mode_count` bosonic modes.
#[derive(Clone, Debug, PartialEq)]
pub struct FockState {
    mode_count: usize,
    amplitudes: BTreeMap<OccupationVector, C64>,
}

impl FockState {
    /// Builds a state from (occupation, amplitude) pairs.
    ///
    /// Repeated occupations are summed and tiny amplitudes pruned. The
    /// result must have unit norm: a norm-squared deviation up to 1e-9 is
    /// renormalized, anything larger is an [`Error::Normalization`].
    pub fn new<I>(mode_count: usize, amplitudes: I) -> Result<Self>
    where
        I: IntoIterator<Item = (OccupationVector, C64)>,
    {
        let map = Self::collect(mode_count, amplitudes)?;
        let norm_sq: f64 = map.values().map(|a| a.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > RENORMALIZE_WINDOW {
            return Err(Error::Normalization { norm_sq });
        }
        Self::finish(mode_count, map, norm_sq)
    }

    /// Like [`FockState::new`] but rescales any nonzero vector to unit norm.
    pub fn normalized<I>(mode_count: usize, amplitudes: I) -> Result<Self>
    where
        I: IntoIterator<Item = (OccupationVector, C64)>,
    {
        let map = Self::collect(mode_count, amplitudes)?;
        let norm_sq: f64 = map.values().map(|a| a.norm_sqr()).sum();
        Self::finish(mode_count, map, norm_sq)
    }

    /// A single occupation-number eigenstate.
    pub fn basis(counts: Vec<u32>) -> Self {
        let occ = OccupationVector::new(counts);
        let mode_count = occ.mode_count();
        let mut amplitudes = BTreeMap::new();
        amplitudes.insert(occ, C64::new(1.0, 0.0));
        Self { mode_count, amplitudes }
    }

    fn collect<I>(mode_count: usize, amplitudes: I) -> Result<BTreeMap<OccupationVector, C64>>
    where
        I: IntoIterator<Item = (OccupationVector, C64)>,
    {
        if mode_count == 0 {
            return Err(crate::error::param("mode_count", "must be at least 1"));
        }
        let mut map: BTreeMap<OccupationVector, C64> = BTreeMap::new();
        for (occ, amp) in amplitudes {
            if occ.mode_count() != mode_count {
                return Err(Error::Dimension { expected: mode_count, found: occ.mode_count() });
            }
            if !(amp.re.is_finite() && amp.im.is_finite()) {
                return Err(crate::error::param("amplitude", "must be finite"));
            }
            *map.entry(occ).or_insert(C64::new(0.0, 0.0)) += amp;
        }
        map.retain(|_, a| a.norm() >= PRUNE_TOLERANCE);
        if map.is_empty() {
            return Err(Error::EmptyState);
        }
        Ok(map)
    }

    fn finish(
        mode_count: usize,
        mut map: BTreeMap<OccupationVector, C64>,
        norm_sq: f64,
    ) -> Result<Self> {
        if (norm_sq - 1.0).abs() > EXACT_NORM {
            let scale = norm_sq.sqrt().recip();
            for a in map.values_mut() {
                *a *= scale;
            }
            map.retain(|_, a| a.norm() >= PRUNE_TOLERANCE);
        }
        Ok(Self { mode_count, amplitudes: map })
    }

    pub fn mode_count(&self) -> usize {
        self.mode_count
    }

    /// Number of phases the state can carry (all modes but the reference).
    pub fn phase_dim(&self) -> usize {
        self.mode_count - 1
    }

    pub fn amplitude(&self, occ: &OccupationVector) -> C64 {
        self.amplitudes.get(occ).copied().unwrap_or(C64::new(0.0, 0.0))
    }

    /// Support in lexicographic occupation order.
    pub fn iter(&self) -> impl Iterator<Item = (&OccupationVector, &C64)> {
        self.amplitudes.iter()
    }

    pub fn support_size(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }

    /// The largest total photon number in the support.
    pub fn max_photons(&self) -> u32 {
        self.amplitudes.keys().map(|o| o.total()).max().unwrap_or(0)
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.mode_count {
            Err(Error::ModeIndex { index: mode, modes: self.mode_count })
        } else {
            Ok(())
        }
    }
}

impl fmt::Display for FockState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, (occ, a)) in self.amplitudes.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({:.6}{:+.6}i){}", a.re, a.im, occ)?;
        }
        Ok(())
    }
}

/// Reduces an angle into `[-π, π)`.
pub fn wrap_phase(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut y = x - two_pi * ((x + PI) / two_pi).floor();
    if y >= PI {
        y -= two_pi;
    }
    if y < -PI {
        y += two_pi;
    }
    y
}

/// The unknown phases φ₁..φ_d, each wrapped into `[-π, π)`.
#[derive(Clone, Debug, PartialEq, PartialOrd, serde::Serialize, serde::Deserialize)]
#[serde(from = "Vec<f64>", into = "Vec<f64>")]
pub struct PhaseVector(Vec<f64>);

impl PhaseVector {
    pub fn new(phases: Vec<f64>) -> Self {
        Self(phases.into_iter().map(wrap_phase).collect())
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Component-wise sum, re-wrapped.
    pub fn add(&self, other: &PhaseVector) -> Result<PhaseVector> {
        if self.len() != other.len() {
            return Err(Error::Dimension { expected: self.len(), found: other.len() });
        }
        Ok(PhaseVector::new(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect()))
    }
}

impl From<Vec<f64>> for PhaseVector {
    fn from(v: Vec<f64>) -> Self {
        Self::new(v)
    }
}

impl From<PhaseVector> for Vec<f64> {
    fn from(p: PhaseVector) -> Self {
        p.0
    }
}

impl std::ops::Index<usize> for PhaseVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Applies `exp(i Σ_{j≥1} φ_j N_j)`; mode 0 is the unshifted reference.
pub fn apply_phases(state: &FockState, phases: &PhaseVector) -> Result<FockState> {
    apply_raw_phases(state, phases.as_slice())
}

/// [`apply_phases`] for an unwrapped slice.
pub fn apply_raw_phases(state: &FockState, phases: &[f64]) -> Result<FockState> {
    if phases.len() != state.phase_dim() {
        return Err(Error::Dimension { expected: state.phase_dim(), found: phases.len() });
    }
    let amplitudes = state
        .amplitudes
        .iter()
        .map(|(occ, a)| {
            let angle: f64 = phases
                .iter()
                .zip(&occ.counts()[1..])
                .map(|(phi, &n)| phi * n as f64)
                .sum();
            (occ.clone(), a * C64::from_polar(1.0, angle))
        })
        .collect();
    Ok(FockState { mode_count: state.mode_count, amplitudes })
}

/// ⟨N_mode⟩.
pub fn number_expectation(state: &FockState, mode: usize) -> Result<f64> {
    state.check_mode(mode)?;
    Ok(state.iter().map(|(occ, a)| a.norm_sqr() * occ.get(mode) as f64).sum())
}

/// Symmetrized covariance of two number operators. Number operators are
/// diagonal in the Fock basis, so the symmetrization is the plain product.
pub fn number_covariance(state: &FockState, mode_i: usize, mode_j: usize) -> Result<f64> {
    state.check_mode(mode_i)?;
    state.check_mode(mode_j)?;
    let mut ni = 0.0;
    let mut nj = 0.0;
    let mut nij = 0.0;
    for (occ, a) in state.iter() {
        let p = a.norm_sqr();
        let (x, y) = (occ.get(mode_i) as f64, occ.get(mode_j) as f64);
        ni += p * x;
        nj += p * y;
        nij += p * x * y;
    }
    Ok(nij - ni * nj)
}

/// Covariance matrix of the number operators on the listed modes.
pub fn covariance_matrix(state: &FockState, modes: &[usize]) -> Result<DMatrix<f64>> {
    let k = modes.len();
    let mut out = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let c = number_covariance(state, modes[a], modes[b])?;
            out[(a, b)] = c;
            out[(b, a)] = c;
        }
    }
    Ok(out)
}

/// ⟨a|b⟩.
pub fn inner_product(a: &FockState, b: &FockState) -> Result<C64> {
    if a.mode_count != b.mode_count {
        return Err(Error::Dimension { expected: a.mode_count, found: b.mode_count });
    }
    let (small, large, conj_small) = if a.support_size() <= b.support_size() {
        (a, b, true)
    } else {
        (b, a, false)
    };
    let mut acc = C64::new(0.0, 0.0);
    for (occ, x) in small.iter() {
        if let Some(y) = large.amplitudes.get(occ) {
            acc += if conj_small { x.conj() * y } else { y.conj() * x };
        }
    }
    Ok(acc)
}
