//! Exact dense statevector simulation: the reference every subspace engine is
//! checked against, and the backend of the simulated device.

use std::f64::consts::FRAC_PI_4;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::circuit::{Circuit, FixedGate, GateKind};
use crate::error::{check_dims, Result, SimError};
use crate::pauli::{PauliString, PauliSum};
use crate::seed::rng_from;

/// Default largest register the dense simulator accepts.
pub const DEFAULT_QUBIT_CAP: usize = 20;
/// Default largest subsystem for [`DenseState::reduced_density`].
pub const DEFAULT_REDUCED_CAP: usize = 14;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `i^k` for `k` in `0..4`.
fn ipow(k: u32) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Action of a word on basis states: `P|b> = phase(b) |b ^ x>`.
#[derive(Clone, Copy)]
struct WordAction {
    x: usize,
    z: usize,
    base: u32,
}

impl WordAction {
    fn new(p: &PauliString) -> Self {
        WordAction { x: p.x_mask() as usize, z: p.z_mask() as usize, base: p.phase().exponent() as u32 + p.y_count() }
    }

    #[inline]
    fn phase(&self, b: usize) -> Complex64 {
        let sign = ((b & self.z).count_ones() & 1) * 2;
        ipow(self.base + sign)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseState {
    n: usize,
    amps: Vec<Complex64>,
}

impl DenseState {
    /// `|0...0>` on `n` qubits, subject to the default qubit cap.
    pub fn zero(n: usize) -> Result<Self> {
        Self::zero_with_cap(n, DEFAULT_QUBIT_CAP)
    }

    pub fn zero_with_cap(n: usize, cap: usize) -> Result<Self> {
        if n > cap || n > 30 {
            return Err(SimError::Resource(format!("{n} qubits exceeds dense cap {cap}")));
        }
        let mut amps = vec![ZERO; 1 << n];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(DenseState { n, amps })
    }

    /// Normalizes the given amplitudes.
    pub fn from_amplitudes(n: usize, amps: Vec<Complex64>) -> Result<Self> {
        check_dims("amplitude count", amps.len(), 1 << n)?;
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(SimError::Argument("zero vector is not a state".into()));
        }
        Ok(DenseState { n, amps: amps.into_iter().map(|a| a / norm).collect() })
    }

    /// Haar-like random state from normalized complex Gaussians.
    pub fn random(n: usize, seed: u64) -> Result<Self> {
        let mut rng = rng_from(seed);
        let amps =
            (0..1usize << n).map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
        Self::from_amplitudes(n, amps)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &DenseState) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// Born probabilities of the computational basis.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `exp(-i phi P)` for a single word.
    pub fn apply_rotation(&mut self, p: &PauliString, phi: f64) {
        let (s, c) = phi.sin_cos();
        let act = WordAction::new(p);
        if act.x == 0 {
            for (b, a) in self.amps.iter_mut().enumerate() {
                // P|b> = +-|b>
                let f = act.phase(b).re;
                *a *= Complex64::new(c, -s * f);
            }
            return;
        }
        let mis = Complex64::new(0.0, -s);
        for b in 0..self.amps.len() {
            let b2 = b ^ act.x;
            if b2 < b {
                continue;
            }
            let (a0, a1) = (self.amps[b], self.amps[b2]);
            self.amps[b] = a0 * c + mis * act.phase(b2) * a1;
            self.amps[b2] = a1 * c + mis * act.phase(b) * a0;
        }
    }

    /// `P|psi>` for a word (phase included).
    pub fn apply_word(&mut self, p: &PauliString) {
        let act = WordAction::new(p);
        let mut out = vec![ZERO; self.amps.len()];
        for (b, a) in self.amps.iter().enumerate() {
            out[b ^ act.x] = act.phase(b) * a;
        }
        self.amps = out;
    }

    fn apply_1q(&mut self, q: usize, m: [[Complex64; 2]; 2]) {
        let bit = 1usize << q;
        for b in 0..self.amps.len() {
            if b & bit != 0 {
                continue;
            }
            let (a0, a1) = (self.amps[b], self.amps[b | bit]);
            self.amps[b] = m[0][0] * a0 + m[0][1] * a1;
            self.amps[b | bit] = m[1][0] * a0 + m[1][1] * a1;
        }
    }

    /// Direct kernel for a named gate (exact, including global phase).
    pub fn apply_fixed(&mut self, gate: FixedGate, qubits: &[usize]) {
        let o = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        match gate {
            FixedGate::H => self.apply_1q(qubits[0], [[o * r, o * r], [o * r, -o * r]]),
            FixedGate::S => self.apply_1q(qubits[0], [[o, ZERO], [ZERO, i]]),
            FixedGate::Sdg => self.apply_1q(qubits[0], [[o, ZERO], [ZERO, -i]]),
            FixedGate::X => self.apply_1q(qubits[0], [[ZERO, o], [o, ZERO]]),
            FixedGate::Y => self.apply_1q(qubits[0], [[ZERO, -i], [i, ZERO]]),
            FixedGate::Z => self.apply_1q(qubits[0], [[o, ZERO], [ZERO, -o]]),
            FixedGate::Cnot => {
                let (cb, tb) = (1usize << qubits[0], 1usize << qubits[1]);
                for b in 0..self.amps.len() {
                    if b & cb != 0 && b & tb == 0 {
                        self.amps.swap(b, b | tb);
                    }
                }
            }
            FixedGate::Cz => {
                let m = (1usize << qubits[0]) | (1usize << qubits[1]);
                for (b, a) in self.amps.iter_mut().enumerate() {
                    if b & m == m {
                        *a = -*a;
                    }
                }
            }
            FixedGate::Swap => {
                let (ab, bb) = (1usize << qubits[0], 1usize << qubits[1]);
                for b in 0..self.amps.len() {
                    if b & ab != 0 && b & bb == 0 {
                        self.amps.swap(b, (b ^ ab) | bb);
                    }
                }
            }
            FixedGate::Toffoli => {
                let cm = (1usize << qubits[0]) | (1usize << qubits[1]);
                let tb = 1usize << qubits[2];
                for b in 0..self.amps.len() {
                    if b & cm == cm && b & tb == 0 {
                        self.amps.swap(b, b | tb);
                    }
                }
            }
        }
    }

    /// Applies the circuit; `shift = (gate, term, delta)` adds `delta` to the
    /// rotation angle of one generator term (used by the shift rule).
    fn run(&mut self, circuit: &Circuit, params: &[f64], shift: Option<(usize, usize, f64)>) -> Result<()> {
        check_dims("state vs circuit qubits", self.n, circuit.n)?;
        circuit.check_params(params)?;
        for (gi, g) in circuit.gates.iter().enumerate() {
            match &g.kind {
                GateKind::PauliRotation { generator } => {
                    let theta = g.angle(params);
                    for (ti, (p, coeff)) in generator.sorted_terms().into_iter().enumerate() {
                        let mut phi = coeff.re * theta;
                        if let Some((sg, st, d)) = shift {
                            if sg == gi && st == ti {
                                phi += d;
                            }
                        }
                        self.apply_rotation(&p, phi);
                    }
                }
                GateKind::Fixed { gate, qubits } => self.apply_fixed(*gate, qubits),
            }
        }
        Ok(())
    }

    pub fn apply_circuit(&mut self, circuit: &Circuit, params: &[f64]) -> Result<()> {
        self.run(circuit, params, None)
    }

    /// `<psi|P|psi>` for a word; real for Hermitian words.
    pub fn expectation(&self, p: &PauliString) -> f64 {
        self.expectation_complex(p).re
    }

    fn expectation_complex(&self, p: &PauliString) -> Complex64 {
        let act = WordAction::new(p);
        let mut acc = ZERO;
        for (b, a) in self.amps.iter().enumerate() {
            acc += self.amps[b ^ act.x].conj() * act.phase(b) * a;
        }
        acc
    }

    pub fn expectation_sum(&self, obs: &PauliSum) -> Result<Complex64> {
        check_dims("observable vs state qubits", obs.n(), self.n)?;
        Ok(obs.iter().map(|(p, c)| c * self.expectation_complex(p)).sum())
    }

    /// Partial trace onto `qubits` (in the given order: local bit `i` is
    /// `qubits[i]`).
    pub fn reduced_density(&self, qubits: &[usize]) -> Result<DMatrix<Complex64>> {
        self.reduced_density_with_cap(qubits, DEFAULT_REDUCED_CAP)
    }

    pub fn reduced_density_with_cap(&self, qubits: &[usize], cap: usize) -> Result<DMatrix<Complex64>> {
        if qubits.len() > cap {
            return Err(SimError::Resource(format!("reduced state on {} qubits exceeds cap {cap}", qubits.len())));
        }
        if let Some(&q) = qubits.iter().find(|&&q| q >= self.n) {
            return Err(SimError::Argument(format!("qubit {q} out of range")));
        }
        let k = qubits.len();
        let env: Vec<usize> = (0..self.n).filter(|q| !qubits.contains(q)).collect();
        let scatter = |local: usize, bits: &[usize]| -> usize {
            bits.iter().enumerate().fold(0, |acc, (i, &q)| acc | (((local >> i) & 1) << q))
        };
        let sys_idx: Vec<usize> = (0..1usize << k).map(|i| scatter(i, qubits)).collect();
        let mut rho = DMatrix::<Complex64>::zeros(1 << k, 1 << k);
        for e in 0..1usize << env.len() {
            let eb = scatter(e, &env);
            for (i, &si) in sys_idx.iter().enumerate() {
                let ai = self.amps[si | eb];
                if ai == ZERO {
                    continue;
                }
                for (j, &sj) in sys_idx.iter().enumerate() {
                    rho[(i, j)] += ai * self.amps[sj | eb].conj();
                }
            }
        }
        Ok(rho)
    }
}

/// Prepares `|psi> = circuit(params) prep |0...0>`.
pub fn prepare(state_prep: &Circuit, circuit: &Circuit, params: &[f64]) -> Result<DenseState> {
    check_dims("prep vs circuit qubits", state_prep.n, circuit.n)?;
    let mut s = DenseState::zero(circuit.n)?;
    s.apply_circuit(state_prep, &[])?;
    s.apply_circuit(circuit, params)?;
    Ok(s)
}

/// `<psi(theta)| O |psi(theta)>` with the state prepared from `|0...0>` by
/// `state_prep` (no free parameters) then `circuit`.
pub fn loss(state_prep: &Circuit, circuit: &Circuit, params: &[f64], obs: &PauliSum) -> Result<f64> {
    if !obs.is_hermitian(1e-12) {
        return Err(SimError::Argument("observable is not Hermitian".into()));
    }
    let s = prepare(state_prep, circuit, params)?;
    Ok(s.expectation_sum(obs)?.re)
}

/// Exact gradient `d loss / d theta_slot` by the shift rule.
///
/// Each generator term `c * P` of every gate using the slot contributes
/// `c * (l(phi + pi/4) - l(phi - pi/4))`, which is exact for
/// `exp(-i phi P)` rotations.
pub fn parameter_shift_gradient(
    state_prep: &Circuit,
    circuit: &Circuit,
    params: &[f64],
    obs: &PauliSum,
    slot: usize,
) -> Result<f64> {
    if !obs.is_hermitian(1e-12) {
        return Err(SimError::Argument("observable is not Hermitian".into()));
    }
    circuit.check_params(params)?;
    let mut users = Vec::new();
    for (gi, g) in circuit.gates.iter().enumerate() {
        if g.param_slot == Some(slot) {
            match &g.kind {
                GateKind::PauliRotation { generator } => users.push((gi, generator.sorted_terms())),
                GateKind::Fixed { gate, .. } => {
                    return Err(SimError::Unsupported(format!("slot {slot} belongs to fixed gate {gate:?}")))
                }
            }
        }
    }
    if users.is_empty() {
        return Err(SimError::Unsupported(format!("slot {slot} drives no rotation gate")));
    }
    let eval = |shift: (usize, usize, f64)| -> Result<f64> {
        let mut s = DenseState::zero(circuit.n)?;
        s.apply_circuit(state_prep, &[])?;
        s.run(circuit, params, Some(shift))?;
        Ok(s.expectation_sum(obs)?.re)
    };
    let mut grad = 0.0;
    for (gi, terms) in users {
        for (ti, (_, c)) in terms.iter().enumerate() {
            grad += c.re * (eval((gi, ti, FRAC_PI_4))? - eval((gi, ti, -FRAC_PI_4))?);
        }
    }
    Ok(grad)
}
