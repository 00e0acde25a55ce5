//! Probe-state constructors and the closed-form coherent benchmark.
//!
//! Energy accounting follows one convention everywhere: the probing energy
//! `n̄` counts photons that pass through the unknown phases, never the
//! reference mode. For the generalized NOON state that is `|α|² N`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{param, Error, Result};
use crate::fisher::{inverse_bound, InfoMatrix, ScalingFamily};
use crate::hilbert::{FockState, OccupationVector};

/// Energy of a phase reference. `Infinite` is an exact marker so that no
/// large float ever enters a matrix inversion.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceEnergy {
    Finite(f64),
    Infinite,
}

impl ReferenceEnergy {
    /// `1/|β|²`, zero for an infinite reference.
    pub fn inverse(self) -> f64 {
        match self {
            ReferenceEnergy::Finite(e) => 1.0 / e,
            ReferenceEnergy::Infinite => 0.0,
        }
    }

    fn validate(self) -> Result<()> {
        match self {
            ReferenceEnergy::Finite(e) if !(e > 0.0 && e.is_finite()) => {
                Err(param("reference_energy", format!("{e} must be positive")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceLayout {
    /// One reference beam per phase; the total reference energy is split
    /// equally among them.
    SeparateReferences,
    /// One reference beam shared by all phases.
    SingleReference,
    /// Idealized infinitely strong reference.
    Infinite,
}

/// Multimode coherent probe `⊗ |α_i e^{iφ_i}⟩` with its phase reference.
#[derive(Clone, Debug, PartialEq)]
pub struct CoherentBenchmark {
    probe_energies: Vec<f64>,
    reference_energy: ReferenceEnergy,
    layout: ReferenceLayout,
    total: f64,
}

impl CoherentBenchmark {
    pub fn new(
        probe_energies: Vec<f64>,
        reference_energy: ReferenceEnergy,
        layout: ReferenceLayout,
    ) -> Result<Self> {
        if probe_energies.is_empty() {
            return Err(param("probe_energies", "need at least one phase"));
        }
        if let Some(e) = probe_energies.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(param("probe_energies", format!("{e} must be positive")));
        }
        reference_energy.validate()?;
        match (layout, reference_energy) {
            (ReferenceLayout::Infinite, ReferenceEnergy::Finite(_)) => {
                return Err(param("reference_energy", "infinite layout needs the infinite marker"))
            }
            (ReferenceLayout::SeparateReferences | ReferenceLayout::SingleReference, ReferenceEnergy::Infinite) => {
                return Err(param("reference_energy", "finite layouts need a finite reference energy"))
            }
            _ => {}
        }
        let total = probe_energies.iter().sum();
        Ok(Self { probe_energies, reference_energy, layout, total })
    }

    /// `d` probes sharing `total` energy equally.
    pub fn equal(
        d: usize,
        total: f64,
        reference_energy: ReferenceEnergy,
        layout: ReferenceLayout,
    ) -> Result<Self> {
        if d == 0 {
            return Err(param("d", "must be at least 1"));
        }
        Self::new(vec![total / d as f64; d], reference_energy, layout)
    }

    pub fn d(&self) -> usize {
        self.probe_energies.len()
    }

    pub fn probe_energies(&self) -> &[f64] {
        &self.probe_energies
    }

    /// Total probing energy `n̄ = Σ|α_i|²`.
    pub fn total_energy(&self) -> f64 {
        self.total
    }

    pub fn layout(&self) -> ReferenceLayout {
        self.layout
    }

    pub fn reference_energy(&self) -> ReferenceEnergy {
        self.reference_energy
    }
}

/// QFI matrix of the coherent benchmark for its reference layout.
pub fn coherent_qfi_matrix(bench: &CoherentBenchmark) -> Result<InfoMatrix> {
    let d = bench.d();
    let alpha = &bench.probe_energies;
    match bench.layout {
        ReferenceLayout::Infinite => {
            InfoMatrix::diagonal(&alpha.iter().map(|a| 4.0 * a).collect::<Vec<_>>())
        }
        ReferenceLayout::SeparateReferences => {
            // 4 Var(φ_i) ≥ 1/|α_i|² + 1/|β_i|², |β_i|² = n̄_β / d
            let inv_beta = bench.reference_energy.inverse() * d as f64;
            InfoMatrix::diagonal(
                &alpha.iter().map(|a| 4.0 / (1.0 / a + inv_beta)).collect::<Vec<_>>(),
            )
        }
        ReferenceLayout::SingleReference => {
            // 4 Q⁻¹ = diag(1/|α_i|²) + J/|β|²
            let inv_beta = bench.reference_energy.inverse();
            let mut inv4 = DMatrix::from_element(d, d, inv_beta);
            for i in 0..d {
                inv4[(i, i)] += 1.0 / alpha[i];
            }
            let q = (inv4 / 4.0)
                .try_inverse()
                .ok_or(Error::Matrix { property: "invertible", violation: 0.0 })?;
            InfoMatrix::new(q)
        }
    }
}

/// Propagated-error phase variance of a homodyne readout against a reference
/// beam, `(1/|α|² + 1/|β|²) / (4 cos²Δ)` with `Δ = arg α + φ − arg β − θ`.
/// Returns `f64::INFINITY` where the fringe slope vanishes.
pub fn homodyne_variance(alpha_sq: f64, beta_sq: ReferenceEnergy, mismatch_angle: f64) -> Result<f64> {
    if !(alpha_sq > 0.0 && alpha_sq.is_finite()) {
        return Err(param("alpha_sq", format!("{alpha_sq} must be positive")));
    }
    beta_sq.validate()?;
    let c = mismatch_angle.cos();
    if c.abs() < 1e-12 {
        return Ok(f64::INFINITY);
    }
    Ok((1.0 / alpha_sq + beta_sq.inverse()) / (4.0 * c * c))
}

/// Two-mode NOON state `(|N,0⟩ + |0,N⟩)/√2`.
pub fn make_noon(n: u32) -> Result<FockState> {
    if n == 0 {
        return Err(param("N", "NOON state needs at least one photon"));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    FockState::new(
        2,
        [
            (OccupationVector::new(vec![n, 0]), C64::new(s, 0.0)),
            (OccupationVector::new(vec![0, n]), C64::new(s, 0.0)),
        ],
    )
}

/// `d` independent NOON states, one per phase, on `2d` modes. Pair `k`
/// occupies modes `(2k, 2k+1)` and the phase acts on mode `2k+1`.
pub fn make_separate_noon(photons: &[u32]) -> Result<FockState> {
    if photons.is_empty() {
        return Err(param("photons", "need at least one NOON pair"));
    }
    let modes = 2 * photons.len();
    let mut terms: Vec<(Vec<u32>, C64)> = vec![(vec![0; modes], C64::new(1.0, 0.0))];
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for (k, &n) in photons.iter().enumerate() {
        if n == 0 {
            return Err(param("photons", "every NOON pair needs at least one photon"));
        }
        let mut next = Vec::with_capacity(terms.len() * 2);
        for (occ, a) in &terms {
            for m in [2 * k, 2 * k + 1] {
                let mut o = occ.clone();
                o[m] = n;
                next.push((o, a * s));
            }
        }
        terms = next;
    }
    FockState::new(modes, terms.into_iter().map(|(o, a)| (OccupationVector::new(o), a)))
}

/// Probing modes of [`make_separate_noon`].
pub fn separate_noon_probe_modes(pairs: usize) -> Vec<usize> {
    (0..pairs).map(|k| 2 * k + 1).collect()
}

/// Single-mode `(|0⟩ + |N⟩)/√2`, the optimal state for a bounded photon
/// number when an external phase reference is available.
pub fn make_zero_n_superposition(n: u32) -> Result<FockState> {
    if n == 0 {
        return Err(param("N", "needs at least one photon"));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    FockState::new(
        1,
        [
            (OccupationVector::new(vec![0]), C64::new(s, 0.0)),
            (OccupationVector::new(vec![n]), C64::new(s, 0.0)),
        ],
    )
}

/// Parameters of the generalized NOON state
/// `β|N,0,…,0⟩ + α/√d (|0,N,0,…⟩ + … + |0,…,0,N⟩)`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GeneralizedNoonSpec {
    pub d: usize,
    pub n: u32,
    pub alpha_sq: f64,
}

impl GeneralizedNoonSpec {
    pub fn new(d: usize, n: u32, alpha_sq: f64) -> Result<Self> {
        let spec = Self { d, n, alpha_sq };
        spec.validate()?;
        Ok(spec)
    }

    /// The state at `|α|² = √d/(1+√d)`.
    pub fn optimal(d: usize, n: u32) -> Result<Self> {
        Self::new(d, n, optimal_alpha_sq(d)?)
    }

    /// The equal-weight state over all `d+1` modes, `|α|² = d/(d+1)`.
    pub fn uniform(d: usize, n: u32) -> Result<Self> {
        Self::new(d, n, d as f64 / (d as f64 + 1.0))
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(param("d", "must be at least 1"));
        }
        if self.n == 0 {
            return Err(param("N", "must be at least 1"));
        }
        if !(self.alpha_sq > 0.0 && self.alpha_sq < 1.0) {
            return Err(param("alpha_sq", format!("{} not in (0, 1)", self.alpha_sq)));
        }
        Ok(())
    }

    pub fn beta_sq(&self) -> f64 {
        1.0 - self.alpha_sq
    }

    /// Probing energy `n̄ = |α|² N`.
    pub fn probing_energy(&self) -> f64 {
        self.alpha_sq * self.n as f64
    }

    /// Real amplitudes on `|N_0⟩, …, |N_d⟩` (all photons in mode m).
    pub fn coefficients(&self) -> Vec<f64> {
        let mut c = vec![(self.alpha_sq / self.d as f64).sqrt(); self.d + 1];
        c[0] = self.beta_sq().sqrt();
        c
    }
}

pub fn make_generalized_noon(spec: &GeneralizedNoonSpec) -> Result<FockState> {
    spec.validate()?;
    let modes = spec.d + 1;
    FockState::new(
        modes,
        spec.coefficients().into_iter().enumerate().map(|(m, c)| {
            (OccupationVector::single_mode(modes, m, spec.n), C64::new(c, 0.0))
        }),
    )
}

/// Reference weight minimizing `Tr(Q⁻¹)` for the generalized NOON state.
pub fn optimal_alpha_sq(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(param("d", "must be at least 1"));
    }
    let r = (d as f64).sqrt();
    Ok(r / (1.0 + r))
}

/// Closed-form QFI `Q_ij = (4N²|α|²/d)(δ_ij − |α|²/d)`.
pub fn generalized_noon_qfi(spec: &GeneralizedNoonSpec) -> Result<InfoMatrix> {
    spec.validate()?;
    let d = spec.d;
    let a = spec.alpha_sq;
    let n = spec.n as f64;
    let scale = 4.0 * n * n * a / d as f64;
    let m = DMatrix::from_fn(d, d, |i, j| scale * (if i == j { 1.0 } else { 0.0 } - a / d as f64));
    InfoMatrix::new(m)
}

/// Closed-form `Q⁻¹ = d/(4N²|α|²) I + 1/(4N²|β|²) J`.
pub fn generalized_noon_qfi_inverse(spec: &GeneralizedNoonSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let n2 = (spec.n as f64).powi(2);
    let diag = spec.d as f64 / (4.0 * n2 * spec.alpha_sq);
    let ones = 1.0 / (4.0 * n2 * spec.beta_sq());
    Ok(DMatrix::from_fn(spec.d, spec.d, |i, j| ones + if i == j { diag } else { 0.0 }))
}

/// `Tr(Q⁻¹) = d²/(4N²|α|²) + d/(4N²|β|²)`.
pub fn generalized_noon_total_variance(spec: &GeneralizedNoonSpec) -> Result<f64> {
    spec.validate()?;
    let d = spec.d as f64;
    let n2 = (spec.n as f64).powi(2);
    Ok(d * d / (4.0 * n2 * spec.alpha_sq) + d / (4.0 * n2 * spec.beta_sq()))
}

/// `Tr(Q⁻¹)` at the optimum, `d(√d+1)²/(4N²)`.
pub fn generalized_noon_optimal_total_variance(d: usize, n: u32) -> Result<f64> {
    if d == 0 || n == 0 {
        return Err(param("d, N", "must be at least 1"));
    }
    let r = (d as f64).sqrt();
    Ok(d as f64 * (r + 1.0).powi(2) / (4.0 * (n as f64).powi(2)))
}

/// QFI of `d` separate NOON pairs: `diag(N_i²)`.
pub fn separate_noon_qfi(photons: &[u32]) -> Result<InfoMatrix> {
    if photons.is_empty() || photons.contains(&0) {
        return Err(param("photons", "need at least one pair, each with photons"));
    }
    InfoMatrix::diagonal(&photons.iter().map(|&n| (n as f64).powi(2)).collect::<Vec<_>>())
}

/// `Tr(Q⁻¹)` computed by pseudoinversion; convenience for scans.
/// QFI matrix of each benchmark family at total probing energy `energy`,
/// split equally over the `d` phases. Photon numbers enter the NOON-type
/// formulas as reals so that any energy can be matched.
pub fn energy_matched_qfi(family: ScalingFamily, d: usize, energy: f64) -> Result<InfoMatrix> {
    if d == 0 {
        return Err(param("d", "must be at least 1"));
    }
    if !(energy > 0.0 && energy.is_finite()) {
        return Err(param("energy", format!("{energy} must be positive")));
    }
    match family {
        ScalingFamily::CoherentEqual => coherent_qfi_matrix(&CoherentBenchmark::equal(
            d,
            energy,
            ReferenceEnergy::Infinite,
            ReferenceLayout::Infinite,
        )?),
        // a NOON pair with N photons puts N/2 of them through the phase
        ScalingFamily::SeparateNoon => {
            let n = 2.0 * energy / d as f64;
            InfoMatrix::diagonal(&vec![n * n; d])
        }
        ScalingFamily::GeneralizedNoonOptimal => {
            let a = optimal_alpha_sq(d)?;
            let n = energy / a;
            let df = d as f64;
            let scale = 4.0 * n * n * a / df;
            InfoMatrix::new(DMatrix::from_fn(d, d, |i, j| scale * (if i == j { 1.0 } else { 0.0 } - a / df)))
        }
    }
}

pub fn total_variance_bound(q: &InfoMatrix) -> f64 {
    inverse_bound(q).trace()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fisher::{qfi_matrix, qfi_with_generators};
    use crate::hilbert::number_expectation;

    #[test]
    fn noon_states() {
        let s1 = make_noon(1).unwrap();
        assert_eq!(s1.support_size(), 2);
        assert!(make_noon(0).is_err());
        for (n, want) in [(2, 4.0), (3, 9.0)] {
            let q = qfi_matrix(&make_noon(n).unwrap()).unwrap();
            assert!((q.matrix()[(0, 0)] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_n_superposition_qfi() {
        for (n, want) in [(1, 1.0), (2, 4.0), (4, 16.0)] {
            let s = make_zero_n_superposition(n).unwrap();
            let q = qfi_with_generators(&s, &[0]).unwrap();
            assert!((q.matrix()[(0, 0)] - want).abs() < 1e-12);
            // QFI = 4 n̄² with n̄ = N/2
            let nbar = number_expectation(&s, 0).unwrap();
            assert!((4.0 * nbar * nbar - want).abs() < 1e-12);
        }
        assert!(make_zero_n_superposition(0).is_err());
        // single-mode states have no phase relative to a reference mode
        assert!(qfi_matrix(&make_zero_n_superposition(2).unwrap()).is_err());
    }

    #[test]
    fn generalized_noon_reduces_to_noon() {
        let spec = GeneralizedNoonSpec::new(1, 3, 0.5).unwrap();
        let s = make_generalized_noon(&spec).unwrap();
        let noon = make_noon(3).unwrap();
        assert!((crate::hilbert::inner_product(&s, &noon).unwrap().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_four_mode_state() {
        let s = make_generalized_noon(&GeneralizedNoonSpec::new(3, 2, 0.75).unwrap()).unwrap();
        assert_eq!(s.support_size(), 4);
        for (_, a) in s.iter() {
            assert!((a.re - 0.5).abs() < 1e-15 && a.im == 0.0);
        }
        let e = number_expectation(&s, 2).unwrap();
        assert!((e - 0.5).abs() < 1e-12);
    }

    #[test]
    fn generalized_noon_rejects_bad_weight() {
        assert!(GeneralizedNoonSpec::new(3, 2, 0.0).is_err());
        assert!(GeneralizedNoonSpec::new(3, 2, 1.0).is_err());
        assert!(GeneralizedNoonSpec::new(0, 2, 0.5).is_err());
    }

    #[test]
    fn optimal_weights() {
        assert_eq!(optimal_alpha_sq(1).unwrap(), 0.5);
        assert!((optimal_alpha_sq(4).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(optimal_alpha_sq(0).is_err());
        let t = generalized_noon_total_variance(&GeneralizedNoonSpec::optimal(3, 2).unwrap()).unwrap();
        let want = 3.0 * (3f64.sqrt() + 1.0).powi(2) / 16.0;
        assert!((t - want).abs() < 1e-12);
        assert!((1.399..=1.400).contains(&t));
    }

    #[test]
    fn coherent_layouts() {
        let inf = CoherentBenchmark::equal(2, 1.0, ReferenceEnergy::Infinite, ReferenceLayout::Infinite).unwrap();
        let t = total_variance_bound(&coherent_qfi_matrix(&inf).unwrap());
        assert!((t - 1.0).abs() < 1e-12);

        let sep = CoherentBenchmark::equal(2, 1.0, ReferenceEnergy::Finite(1.0), ReferenceLayout::SeparateReferences)
            .unwrap();
        assert!((total_variance_bound(&coherent_qfi_matrix(&sep).unwrap()) - 2.0).abs() < 1e-12);

        let single =
            CoherentBenchmark::equal(2, 1.0, ReferenceEnergy::Finite(1.0), ReferenceLayout::SingleReference).unwrap();
        let q = coherent_qfi_matrix(&single).unwrap();
        assert!((total_variance_bound(&q) - 1.5).abs() < 1e-12);
        assert!(q.matrix()[(0, 1)].abs() > 0.1, "single reference couples the phases");
    }

    #[test]
    fn coherent_validation() {
        assert!(CoherentBenchmark::new(vec![1.0, 0.0], ReferenceEnergy::Infinite, ReferenceLayout::Infinite).is_err());
        assert!(CoherentBenchmark::new(vec![1.0], ReferenceEnergy::Finite(1.0), ReferenceLayout::Infinite).is_err());
        assert!(
            CoherentBenchmark::new(vec![1.0], ReferenceEnergy::Finite(-1.0), ReferenceLayout::SingleReference).is_err()
        );
        let b = CoherentBenchmark::new(vec![0.5, 1.5], ReferenceEnergy::Infinite, ReferenceLayout::Infinite).unwrap();
        assert_eq!(b.total_energy(), 2.0);
    }

    #[test]
    fn homodyne() {
        let v = homodyne_variance(1.0, ReferenceEnergy::Infinite, 0.0).unwrap();
        assert!((v - 0.25).abs() < 1e-15);
        let v = homodyne_variance(1.0, ReferenceEnergy::Finite(1.0), 0.0).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        let v = homodyne_variance(1.0, ReferenceEnergy::Finite(1.0), std::f64::consts::PI / 3.0).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        let v = homodyne_variance(1.0, ReferenceEnergy::Finite(1.0), std::f64::consts::FRAC_PI_2).unwrap();
        assert!(v.is_infinite());
        assert!(homodyne_variance(0.0, ReferenceEnergy::Infinite, 0.0).is_err());
    }

    #[test]
    fn separate_noon_product() {
        let s = make_separate_noon(&[2, 3]).unwrap();
        assert_eq!(s.mode_count(), 4);
        assert_eq!(s.support_size(), 4);
        let q = qfi_with_generators(&s, &separate_noon_probe_modes(2)).unwrap();
        let want = separate_noon_qfi(&[2, 3]).unwrap();
        assert!(q.max_abs_diff(&want) < 1e-12);
    }
}
