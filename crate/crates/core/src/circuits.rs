//! Passive linear optics on a handful of modes.
//!
//! A mode unitary `U` maps creation operators as `a†_j → Σ_k U_kj a†_k`, so
//! column `j` is the image of input mode `j`. Beam splitters use the
//! symmetric convention `[[√T, i√(1−T)], [i√(1−T), √T]]`. Multi-photon
//! amplitudes are permanents of submatrices of `U`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::fisher::ProbabilityModel;
use crate::hilbert::{FockState, OccupationVector};

/// Largest total photon number [`fock_evolve`] accepts.
pub const PHOTON_CAP: u32 = 4;
const UNITARY_TOL: f64 = 1e-10;

/// A unitary `M × M` matrix acting on mode operators.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeUnitary {
    entries: DMatrix<C64>,
}

impl ModeUnitary {
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::Dimension { expected: entries.nrows(), found: entries.ncols() });
        }
        let m = entries.nrows();
        let err = (entries.adjoint() * &entries - DMatrix::<C64>::identity(m, m)).camax();
        if err > UNITARY_TOL {
            return Err(Error::Matrix { property: "unitary", violation: err });
        }
        Ok(Self { entries })
    }

    pub fn identity(modes: usize) -> Self {
        Self { entries: DMatrix::identity(modes, modes) }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[(row, col)]
    }

    /// `next · self`: apply `self` first, then `next`.
    pub fn then(&self, next: &ModeUnitary) -> Result<ModeUnitary> {
        if next.dim() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), found: next.dim() });
        }
        Ok(ModeUnitary { entries: &next.entries * &self.entries })
    }

    /// `max |U†U − 1|`.
    pub fn unitarity_error(&self) -> f64 {
        let m = self.dim();
        (self.entries.adjoint() * &self.entries - DMatrix::<C64>::identity(m, m)).camax()
    }
}

fn check_mode(mode: usize, modes: usize) -> Result<()> {
    if mode >= modes {
        Err(Error::ModeIndex { index: mode, modes })
    } else {
        Ok(())
    }
}

fn check_transmittivity(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(param("transmittivity", format!("{t} not in [0, 1]")));
    }
    Ok(())
}

/// Beam splitter between modes `i` and `j` with power transmission `t`.
pub fn beam_splitter(i: usize, j: usize, t: f64, modes: usize) -> Result<ModeUnitary> {
    check_mode(i, modes)?;
    check_mode(j, modes)?;
    if i == j {
        return Err(param("modes", "beam splitter needs two distinct modes"));
    }
    check_transmittivity(t)?;
    let mut u = DMatrix::<C64>::identity(modes, modes);
    let c = C64::new(t.sqrt(), 0.0);
    let s = C64::new(0.0, (1.0 - t).sqrt());
    u[(i, i)] = c;
    u[(j, j)] = c;
    u[(i, j)] = s;
    u[(j, i)] = s;
    Ok(ModeUnitary { entries: u })
}

pub fn phase_shifter(mode: usize, theta: f64, modes: usize) -> Result<ModeUnitary> {
    check_mode(mode, modes)?;
    let mut u = DMatrix::<C64>::identity(modes, modes);
    u[(mode, mode)] = C64::from_polar(1.0, theta);
    Ok(ModeUnitary { entries: u })
}

/// Three-mode tritter `U₁₂(T₃) P(θ) U₂₃(T₂) U₁₂(T₁)`, with arms 1, 2, 3
/// mapped to modes 0, 1, 2 and `P(θ)` acting on arm 1.
pub fn compose_tritter(t1: f64, t2: f64, t3: f64, theta: f64) -> Result<ModeUnitary> {
    let u = beam_splitter(0, 1, t1, 3)?
        .then(&beam_splitter(1, 2, t2, 3)?)?
        .then(&phase_shifter(0, theta, 3)?)?
        .then(&beam_splitter(0, 1, t3, 3)?)?;
    Ok(u)
}

/// Parameters of a [`compose_tritter`] device.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TritterParams {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub theta: f64,
}

impl TritterParams {
    /// Sends a photon from any input to every output with probability 1/3.
    pub const BALANCED: TritterParams =
        TritterParams { t1: 0.5, t2: 1.0 / 3.0, t3: 0.5, theta: std::f64::consts::FRAC_PI_2 };

    pub fn unitary(&self) -> Result<ModeUnitary> {
        compose_tritter(self.t1, self.t2, self.t3, self.theta)
    }
}

/// Permanent of a row-major `n × n` matrix (Ryser's formula).
pub fn permanent(entries: &[C64], n: usize) -> C64 {
    debug_assert_eq!(entries.len(), n * n);
    if n == 0 {
        return C64::new(1.0, 0.0);
    }
    let mut total = C64::new(0.0, 0.0);
    for subset in 1u32..(1 << n) {
        let mut prod = C64::new(1.0, 0.0);
        for row in 0..n {
            let mut s = C64::new(0.0, 0.0);
            for col in 0..n {
                if subset & (1 << col) != 0 {
                    s += entries[row * n + col];
                }
            }
            prod *= s;
        }
        let sign = if (n as u32 - subset.count_ones()).is_multiple_of(2) { 1.0 } else { -1.0 };
        total += prod * sign;
    }
    total
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Each mode index repeated by its occupation.
fn expand(occ: &[u32]) -> Vec<usize> {
    occ.iter().enumerate().flat_map(|(m, &n)| std::iter::repeat_n(m, n as usize)).collect()
}

/// All occupation vectors with `photons` photons on `modes` modes, in
/// lexicographic order.
pub fn occupation_patterns(modes: usize, photons: u32) -> Vec<Vec<u32>> {
    fn rec(modes: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() + 1 == modes {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=left {
            prefix.push(k);
            rec(modes, left - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if modes > 0 {
        rec(modes, photons, &mut Vec::with_capacity(modes), &mut out);
    }
    out
}

/// Second-quantized action of a mode unitary on a Fock state.
pub fn fock_evolve(u: &ModeUnitary, state: &FockState) -> Result<FockState> {
    if u.dim() != state.mode_count() {
        return Err(Error::Dimension { expected: state.mode_count(), found: u.dim() });
    }
    let cap = state.max_photons();
    if cap > PHOTON_CAP {
        return Err(Error::PhotonCap { found: cap, cap: PHOTON_CAP });
    }
    let modes = u.dim();
    let mut out: Vec<(OccupationVector, C64)> = Vec::new();
    let mut buf = Vec::new();
    for (occ_in, amp) in state.iter() {
        let cols = expand(occ_in.counts());
        let n = cols.len();
        let in_norm: f64 = occ_in.counts().iter().map(|&k| factorial(k)).product();
        for pattern in occupation_patterns(modes, occ_in.total()) {
            let rows = expand(&pattern);
            buf.clear();
            for &r in &rows {
                for &c in &cols {
                    buf.push(u.get(r, c));
                }
            }
            let out_norm: f64 = pattern.iter().map(|&k| factorial(k)).product();
            let a = permanent(&buf, n) / (in_norm * out_norm).sqrt();
            out.push((OccupationVector::new(pattern), amp * a));
        }
    }
    FockState::new(modes, out)
}

/// One layer of a circuit. Unknown-phase symbols and control slots are
/// numbered from 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CircuitElement {
    BeamSplitter { i: usize, j: usize, transmittivity: f64 },
    PhaseShifter { mode: usize, theta: f64 },
    UnknownPhase { mode: usize, symbol: usize },
    ControlPhase { mode: usize, slot: usize },
}

/// An ordered list of optical elements; the first layer acts first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSpec {
    pub mode_count: usize,
    pub layers: Vec<CircuitElement>,
}

fn contiguous(symbols: &[usize], what: &'static str) -> Result<usize> {
    let mut s = symbols.to_vec();
    s.sort_unstable();
    s.dedup();
    if s.iter().enumerate().any(|(k, &x)| x != k + 1) {
        return Err(param(what, format!("indices {s:?} must be exactly 1..={}", s.len())));
    }
    Ok(s.len())
}

impl CircuitSpec {
    pub fn new(mode_count: usize) -> Self {
        Self { mode_count, layers: Vec::new() }
    }

    pub fn push(mut self, element: CircuitElement) -> Self {
        self.layers.push(element);
        self
    }

    /// Appends the four layers of a tritter on modes 0, 1, 2.
    pub fn tritter(mut self, p: TritterParams) -> Self {
        use CircuitElement::*;
        self.layers.extend([
            BeamSplitter { i: 0, j: 1, transmittivity: p.t1 },
            BeamSplitter { i: 1, j: 2, transmittivity: p.t2 },
            PhaseShifter { mode: 0, theta: p.theta },
            BeamSplitter { i: 0, j: 1, transmittivity: p.t3 },
        ]);
        self
    }

    /// Checks indices and returns `(unknown phases, control slots)`.
    pub fn validate(&self) -> Result<(usize, usize)> {
        if self.mode_count == 0 {
            return Err(param("mode_count", "must be at least 1"));
        }
        let mut unknown = Vec::new();
        let mut controls = Vec::new();
        for e in &self.layers {
            match *e {
                CircuitElement::BeamSplitter { i, j, transmittivity } => {
                    check_mode(i, self.mode_count)?;
                    check_mode(j, self.mode_count)?;
                    if i == j {
                        return Err(param("beam_splitter", "needs two distinct modes"));
                    }
                    check_transmittivity(transmittivity)?;
                }
                CircuitElement::PhaseShifter { mode, theta } => {
                    check_mode(mode, self.mode_count)?;
                    if !theta.is_finite() {
                        return Err(param("theta", "must be finite"));
                    }
                }
                CircuitElement::UnknownPhase { mode, symbol } => {
                    check_mode(mode, self.mode_count)?;
                    unknown.push(symbol);
                }
                CircuitElement::ControlPhase { mode, slot } => {
                    check_mode(mode, self.mode_count)?;
                    controls.push(slot);
                }
            }
        }
        Ok((contiguous(&unknown, "unknown_phase")?, contiguous(&controls, "control_phase")?))
    }

    /// The full mode unitary at the given unknown and control phases.
    pub fn unitary(&self, phases: &[f64], controls: &[f64]) -> Result<ModeUnitary> {
        let compiled = CompiledCircuit::compile(self)?;
        if phases.len() != compiled.phase_dim || controls.len() != compiled.control_dim {
            return Err(Error::Dimension {
                expected: compiled.phase_dim + compiled.control_dim,
                found: phases.len() + controls.len(),
            });
        }
        let m = self.mode_count;
        let mut cols = DMatrix::<C64>::identity(m, m);
        let mut flat: Vec<C64> = cols.as_slice().to_vec();
        compiled.propagate(phases, controls, &mut flat);
        cols.as_mut_slice().copy_from_slice(&flat);
        ModeUnitary::new(cols)
    }
}

/// Two tritters around unknown phases on modes 1 and 2 (mode 0 is the
/// reference arm), optionally followed by control phases on the same arms.
pub fn two_tritter_spec(prepare: TritterParams, measure: TritterParams, with_controls: bool) -> CircuitSpec {
    use CircuitElement::*;
    let mut spec = CircuitSpec::new(3)
        .tritter(prepare)
        .push(UnknownPhase { mode: 1, symbol: 1 })
        .push(UnknownPhase { mode: 2, symbol: 2 });
    if with_controls {
        spec = spec.push(ControlPhase { mode: 1, slot: 1 }).push(ControlPhase { mode: 2, slot: 2 });
    }
    spec.tritter(measure)
}

#[derive(Clone, Copy, Debug)]
enum PhaseSource {
    Unknown(usize),
    Control(usize),
}

/// Net phase on one mode from a run of adjacent phase layers.
#[derive(Clone, Debug)]
struct ModePhase {
    mode: usize,
    fixed: f64,
    /// `e^{i fixed}`, used when no symbol contributes.
    factor: C64,
    sources: Vec<PhaseSource>,
}

#[derive(Clone, Debug)]
enum Op {
    Mix { i: usize, j: usize, c: f64, s: f64 },
    /// Phase layers commute, so adjacent ones are merged per mode.
    Phases(Vec<ModePhase>),
}

/// Circuit flattened into in-place column updates.
#[derive(Clone, Debug)]
struct CompiledCircuit {
    modes: usize,
    ops: Vec<Op>,
    phase_dim: usize,
    control_dim: usize,
}

impl CompiledCircuit {
    fn compile(spec: &CircuitSpec) -> Result<Self> {
        let (phase_dim, control_dim) = spec.validate()?;
        let mut ops: Vec<Op> = Vec::new();
        for e in &spec.layers {
            let (mode, fixed, source) = match *e {
                CircuitElement::BeamSplitter { i, j, transmittivity } => {
                    ops.push(Op::Mix { i, j, c: transmittivity.sqrt(), s: (1.0 - transmittivity).sqrt() });
                    continue;
                }
                CircuitElement::PhaseShifter { mode, theta } => (mode, theta, None),
                CircuitElement::UnknownPhase { mode, symbol } => (mode, 0.0, Some(PhaseSource::Unknown(symbol - 1))),
                CircuitElement::ControlPhase { mode, slot } => (mode, 0.0, Some(PhaseSource::Control(slot - 1))),
            };
            if !matches!(ops.last(), Some(Op::Phases(_))) {
                ops.push(Op::Phases(Vec::new()));
            }
            let Some(Op::Phases(run)) = ops.last_mut() else { unreachable!() };
            let idx = match run.iter().position(|p| p.mode == mode) {
                Some(k) => k,
                None => {
                    run.push(ModePhase { mode, fixed: 0.0, factor: C64::new(1.0, 0.0), sources: Vec::new() });
                    run.len() - 1
                }
            };
            run[idx].fixed += fixed;
            run[idx].factor = C64::from_polar(1.0, run[idx].fixed);
            run[idx].sources.extend(source);
        }
        Ok(Self { modes: spec.mode_count, ops, phase_dim, control_dim })
    }

    /// Pushes columns (column-major, `modes` rows each) through the circuit.
    fn propagate(&self, phases: &[f64], controls: &[f64], buf: &mut [C64]) {
        let m = self.modes;
        for op in &self.ops {
            match op {
                Op::Mix { i, j, c, s } => {
                    let (i, j, c, s) = (*i, *j, *c, *s);
                    for col in buf.chunks_exact_mut(m) {
                        let (x, y) = (col[i], col[j]);
                        col[i] = x * c + C64::new(-y.im * s, y.re * s);
                        col[j] = y * c + C64::new(-x.im * s, x.re * s);
                    }
                }
                Op::Phases(run) => {
                    for p in run {
                        if p.sources.is_empty() {
                            for col in buf.chunks_exact_mut(m) {
                                col[p.mode] *= p.factor;
                            }
                            continue;
                        }
                        let mut angle = p.fixed;
                        for src in &p.sources {
                            angle += match *src {
                                PhaseSource::Unknown(k) => phases[k],
                                PhaseSource::Control(k) => controls[k],
                            };
                        }
                        let f = C64::from_polar(1.0, angle);
                        for col in buf.chunks_exact_mut(m) {
                            col[p.mode] *= f;
                        }
                    }
                }
            }
        }
    }
}

/// One Fock component of the input with its permanent index lists.
#[derive(Clone, Debug)]
struct InputTerm {
    amplitude: C64,
    /// Positions into the propagated column set, one per photon.
    cols: Vec<usize>,
    norm: f64,
}

/// Permanent for the photon numbers the simulator allows, with the small
/// cases written out.
fn small_permanent(a: &[C64], n: usize) -> C64 {
    match n {
        1 => a[0],
        2 => a[0] * a[3] + a[1] * a[2],
        _ => permanent(a, n),
    }
}

const STACK_COLUMNS: usize = 32;
const STACK_OUTCOMES: usize = 64;

/// Photon-counting model of a circuit with partially distinguishable
/// photons: `p = V p_indist + (1 − V) p_dist`.
#[derive(Clone, Debug)]
pub struct InterferometerModel {
    circuit: CompiledCircuit,
    spec: CircuitSpec,
    input_modes: Vec<usize>,
    terms: Vec<InputTerm>,
    patterns: Vec<Vec<u32>>,
    pattern_rows: Vec<Vec<usize>>,
    pattern_norms: Vec<f64>,
    photons: usize,
    visibility: f64,
}

/// Builds the outcome model of `spec` fed with `input`.
pub fn interferometer_model(spec: &CircuitSpec, input: &FockState, visibility: f64) -> Result<InterferometerModel> {
    InterferometerModel::new(spec, input, visibility)
}

impl InterferometerModel {
    pub fn new(spec: &CircuitSpec, input: &FockState, visibility: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&visibility) {
            return Err(param("visibility", format!("{visibility} not in [0, 1]")));
        }
        let circuit = CompiledCircuit::compile(spec)?;
        if input.mode_count() != spec.mode_count {
            return Err(Error::Dimension { expected: spec.mode_count, found: input.mode_count() });
        }
        let photons = input.max_photons();
        if photons > PHOTON_CAP {
            return Err(Error::PhotonCap { found: photons, cap: PHOTON_CAP });
        }
        if input.iter().any(|(occ, _)| occ.total() != photons) {
            return Err(param("input", "all components must carry the same photon number"));
        }
        let input_modes: Vec<usize> =
            (0..spec.mode_count).filter(|&m| input.iter().any(|(occ, _)| occ.get(m) > 0)).collect();
        let terms = input
            .iter()
            .map(|(occ, a)| InputTerm {
                amplitude: *a,
                cols: expand(occ.counts())
                    .into_iter()
                    .map(|m| input_modes.iter().position(|&x| x == m).expect("occupied mode"))
                    .collect(),
                norm: occ.counts().iter().map(|&k| factorial(k)).product(),
            })
            .collect();
        let patterns = occupation_patterns(spec.mode_count, photons);
        let pattern_rows = patterns.iter().map(|p| expand(p)).collect();
        let pattern_norms = patterns.iter().map(|p| p.iter().map(|&k| factorial(k)).product()).collect();
        Ok(Self {
            circuit,
            spec: spec.clone(),
            input_modes,
            terms,
            patterns,
            pattern_rows,
            pattern_norms,
            photons: photons as usize,
            visibility,
        })
    }

    /// Output photon-number patterns, indexed like the probabilities.
    pub fn outcomes(&self) -> &[Vec<u32>] {
        &self.patterns
    }

    pub fn spec(&self) -> &CircuitSpec {
        &self.spec
    }

    pub fn visibility(&self) -> f64 {
        self.visibility
    }

    /// Copy of the model with another visibility.
    pub fn with_visibility(&self, visibility: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&visibility) {
            return Err(param("visibility", format!("{visibility} not in [0, 1]")));
        }
        Ok(Self { visibility, ..self.clone() })
    }

    /// Indistinguishable and fully distinguishable probabilities separately.
    pub fn components(&self, phases: &[f64], controls: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut indist = vec![0.0; self.patterns.len()];
        let mut dist = vec![0.0; self.patterns.len()];
        self.components_into(phases, controls, &mut indist, &mut dist);
        (indist, dist)
    }

    fn components_into(&self, phases: &[f64], controls: &[f64], indist: &mut [f64], dist: &mut [f64]) {
        let m = self.circuit.modes;
        let size = m * self.input_modes.len();
        let mut stack = [C64::new(0.0, 0.0); STACK_COLUMNS];
        let mut heap = Vec::new();
        let cols: &mut [C64] = if size <= STACK_COLUMNS {
            &mut stack[..size]
        } else {
            heap.resize(size, C64::new(0.0, 0.0));
            &mut heap
        };
        for (c, &mode) in self.input_modes.iter().enumerate() {
            cols[c * m + mode] = C64::new(1.0, 0.0);
        }
        self.circuit.propagate(phases, controls, cols);

        let n = self.photons;
        let mut sub = [C64::new(0.0, 0.0); (PHOTON_CAP * PHOTON_CAP) as usize];
        let sub = &mut sub[..n * n];
        for (o, rows) in self.pattern_rows.iter().enumerate() {
            let mut amp = C64::new(0.0, 0.0);
            let mut classical = 0.0;
            for term in &self.terms {
                for (r, &row) in rows.iter().enumerate() {
                    for (c, &col) in term.cols.iter().enumerate() {
                        sub[r * n + c] = cols[col * m + row];
                    }
                }
                let scale = (term.norm * self.pattern_norms[o]).sqrt();
                amp += term.amplitude * small_permanent(sub, n) / scale;
                for x in sub.iter_mut() {
                    *x = C64::new(x.norm_sqr(), 0.0);
                }
                classical += term.amplitude.norm_sqr() * small_permanent(sub, n).re / self.pattern_norms[o];
            }
            indist[o] = amp.norm_sqr();
            dist[o] = classical;
        }
    }
}

impl ProbabilityModel for InterferometerModel {
    fn phase_dim(&self) -> usize {
        self.circuit.phase_dim
    }

    fn control_dim(&self) -> usize {
        self.circuit.control_dim
    }

    fn outcome_count(&self) -> usize {
        self.patterns.len()
    }

    fn probabilities_into(&self, phases: &[f64], controls: &[f64], out: &mut [f64]) {
        let k = self.patterns.len();
        let mut stack = [0.0; STACK_OUTCOMES];
        let mut heap = Vec::new();
        let dist: &mut [f64] = if k <= STACK_OUTCOMES {
            &mut stack[..k]
        } else {
            heap.resize(k, 0.0);
            &mut heap
        };
        self.components_into(phases, controls, out, dist);
        let v = self.visibility;
        for (o, b) in out.iter_mut().zip(dist.iter()) {
            *o = (v * *o + (1.0 - v) * b).max(0.0);
        }
    }
}
