//! Evolution inside the Hamming-weight-`k` sector for charge-conserving
//! circuits. States are vectors of length `C(n, k)` indexed by colex rank.

use num_complex::Complex64;

use crate::circuit::{Circuit, FixedGate, Gate, GateKind};
use crate::error::{check_dims, Result, SimError};
use crate::pauli::{total_z, PauliString, PauliSum};
use crate::statevector::DenseState;

/// Largest register handled (bitstrings are `u64` masks).
pub const MAX_QUBITS: usize = 64;

/// `C(n, k)` with overflow reported as a resource error.
pub fn sector_dim(n: usize, k: usize) -> Result<u64> {
    if k > n {
        return Err(SimError::Argument(format!("weight {k} exceeds n = {n}")));
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at each step
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return Err(SimError::Resource(format!("C({n}, {k}) overflows u64")));
        }
    }
    Ok(acc as u64)
}

/// Colex ranking of weight-`k` bitstrings on `n` bits.
#[derive(Clone, Debug, PartialEq)]
pub struct SectorIndex {
    n: usize,
    k: usize,
    dim: usize,
    /// `binom[m][j] = C(m, j)` for `m <= n`, `j <= k`.
    binom: Vec<Vec<u64>>,
}

impl SectorIndex {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n > MAX_QUBITS {
            return Err(SimError::Resource(format!("{n} qubits exceeds sector engine limit {MAX_QUBITS}")));
        }
        let dim = sector_dim(n, k)?;
        let dim = usize::try_from(dim).map_err(|_| SimError::Resource("sector too large".into()))?;
        let mut binom = vec![vec![0u64; k + 1]; n + 1];
        for m in 0..=n {
            binom[m][0] = 1;
            for j in 1..=k.min(m) {
                binom[m][j] = binom[m - 1][j - 1] + if j < m { binom[m - 1][j] } else { 0 };
            }
        }
        Ok(SectorIndex { n, k, dim, binom })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `sum_i C(c_i, i)` over set positions `c_1 < ... < c_k` (1-based `i`).
    pub fn rank(&self, bits: u64) -> usize {
        let mut r = 0u64;
        let mut b = bits;
        let mut i = 1;
        while b != 0 {
            let c = b.trailing_zeros() as usize;
            r += self.binom[c][i];
            b &= b - 1;
            i += 1;
        }
        r as usize
    }

    pub fn unrank(&self, mut r: usize) -> u64 {
        let mut bits = 0u64;
        let mut c = self.n;
        for i in (1..=self.k).rev() {
            // largest c with C(c, i) <= r
            c -= 1;
            while self.binom[c][i] as usize > r {
                c -= 1;
            }
            bits |= 1 << c;
            r -= self.binom[c][i] as usize;
        }
        bits
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SectorState {
    index: SectorIndex,
    amps: Vec<Complex64>,
}

fn mask_of(bits: &[bool]) -> u64 {
    bits.iter().enumerate().fold(0, |m, (q, &b)| m | ((b as u64) << q))
}

impl SectorState {
    /// Basis state `bits` (qubit 0 first) in its own sector.
    pub fn embed(bits: &[bool]) -> Result<Self> {
        let k = bits.iter().filter(|&&b| b).count();
        Self::embed_with_weight(bits, k)
    }

    /// Basis state, checking that it has weight `k`.
    pub fn embed_with_weight(bits: &[bool], k: usize) -> Result<Self> {
        let w = bits.iter().filter(|&&b| b).count();
        if w != k {
            return Err(SimError::Argument(format!("bitstring has weight {w}, sector expects {k}")));
        }
        let index = SectorIndex::new(bits.len(), k)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); index.dim()];
        amps[index.rank(mask_of(bits))] = Complex64::new(1.0, 0.0);
        Ok(SectorState { index, amps })
    }

    /// Restriction of a dense state to the weight-`k` sector (no
    /// renormalization).
    pub fn from_dense(state: &DenseState, k: usize) -> Result<Self> {
        let index = SectorIndex::new(state.n(), k)?;
        let amps = (0..index.dim()).map(|r| state.amplitudes()[index.unrank(r) as usize]).collect();
        Ok(SectorState { index, amps })
    }

    pub fn n(&self) -> usize {
        self.index.n
    }

    pub fn k(&self) -> usize {
        self.index.k
    }

    pub fn dim(&self) -> usize {
        self.index.dim
    }

    pub fn index(&self) -> &SectorIndex {
        &self.index
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn apply_diagonal(&mut self, words: &[(PauliString, f64)], theta: f64) {
        for r in 0..self.dim() {
            let b = self.index.unrank(r);
            let e: f64 =
                words.iter().map(|(p, c)| if (b & p.z_mask()).count_ones().is_multiple_of(2) { *c } else { -*c }).sum();
            self.amps[r] *= Complex64::from_polar(1.0, -theta * e);
        }
    }

    /// `exp(-i phi (XX + YY)/2)` on `(a, b)`.
    fn apply_givens(&mut self, a: usize, b: usize, phi: f64) {
        let (s, c) = phi.sin_cos();
        let mis = Complex64::new(0.0, -s);
        let (ma, mb) = (1u64 << a, 1u64 << b);
        for r in 0..self.dim() {
            let bits = self.index.unrank(r);
            if bits & ma != 0 && bits & mb == 0 {
                let t = self.index.rank(bits ^ ma ^ mb);
                let (u, v) = (self.amps[r], self.amps[t]);
                self.amps[r] = u * c + mis * v;
                self.amps[t] = mis * u + v * c;
            }
        }
    }

    fn apply_swap(&mut self, a: usize, b: usize) {
        let (ma, mb) = (1u64 << a, 1u64 << b);
        for r in 0..self.dim() {
            let bits = self.index.unrank(r);
            if bits & ma != 0 && bits & mb == 0 {
                let t = self.index.rank(bits ^ ma ^ mb);
                self.amps.swap(r, t);
            }
        }
    }

    /// Applies one gate; only charge-conserving forms are accepted.
    pub fn apply_gate(&mut self, gate: &Gate, params: &[f64], gate_index: usize) -> Result<()> {
        let inadmissible = |reason: String| SimError::InadmissibleCircuit { gate: gate_index, reason };
        match &gate.kind {
            GateKind::PauliRotation { generator } => {
                let theta = gate.angle(params);
                let plan = sector_plan(generator).map_err(inadmissible)?;
                if !plan.diagonal.is_empty() {
                    self.apply_diagonal(&plan.diagonal, theta);
                }
                for (a, b, c) in plan.hops {
                    self.apply_givens(a, b, 2.0 * c * theta);
                }
                Ok(())
            }
            GateKind::Fixed { gate: fg, qubits } => {
                let n = self.n();
                let z = |q: usize| PauliString::from_masks(n, 0, 1 << q);
                let zz = |a: usize, b: usize| PauliString::from_masks(n, 0, (1 << a) | (1 << b));
                use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
                // diagonal gates up to global phase
                match fg {
                    FixedGate::Z => self.apply_diagonal(&[(z(qubits[0]), 1.0)], FRAC_PI_2),
                    FixedGate::S => self.apply_diagonal(&[(z(qubits[0]), 1.0)], FRAC_PI_4),
                    FixedGate::Sdg => self.apply_diagonal(&[(z(qubits[0]), 1.0)], -FRAC_PI_4),
                    FixedGate::Cz => self.apply_diagonal(
                        &[(z(qubits[0]), 1.0), (z(qubits[1]), 1.0), (zz(qubits[0], qubits[1]), -1.0)],
                        FRAC_PI_4,
                    ),
                    FixedGate::Swap => self.apply_swap(qubits[0], qubits[1]),
                    other => return Err(inadmissible(format!("{other:?} does not conserve Hamming weight"))),
                }
                Ok(())
            }
        }
    }

    pub fn apply_circuit(&mut self, circuit: &Circuit, params: &[f64]) -> Result<()> {
        check_dims("sector vs circuit qubits", self.n(), circuit.n)?;
        circuit.check_params(params)?;
        for (i, g) in circuit.gates.iter().enumerate() {
            self.apply_gate(g, params, i)?;
        }
        Ok(())
    }

    /// `<psi| O |psi>`; words that leave the sector contribute zero.
    pub fn expectation(&self, obs: &PauliSum) -> Result<Complex64> {
        check_dims("observable vs sector qubits", obs.n(), self.n())?;
        let mut acc = Complex64::new(0.0, 0.0);
        for (p, c) in obs.iter() {
            let x = p.x_mask();
            let base = p.phase().exponent() as u32 + p.y_count();
            for r in 0..self.dim() {
                let b = self.index.unrank(r);
                let t = b ^ x;
                if (t.count_ones() as usize) != self.k() {
                    continue;
                }
                let k = base + 2 * ((b & p.z_mask()).count_ones() & 1);
                let f = match k % 4 {
                    0 => Complex64::new(1.0, 0.0),
                    1 => Complex64::new(0.0, 1.0),
                    2 => Complex64::new(-1.0, 0.0),
                    _ => Complex64::new(0.0, -1.0),
                };
                acc += c * self.amps[self.index.rank(t)].conj() * f * self.amps[r];
            }
        }
        Ok(acc)
    }
}

/// A generator split into commuting charge-conserving pieces.
struct SectorPlan {
    diagonal: Vec<(PauliString, f64)>,
    /// `(a, b, c)` for `c (X_a X_b + Y_a Y_b)`.
    hops: Vec<(usize, usize, f64)>,
}

fn sector_plan(generator: &PauliSum) -> std::result::Result<SectorPlan, String> {
    let n = generator.n();
    let mut diagonal = Vec::new();
    let mut hops = Vec::new();
    let mut pending: Vec<(PauliString, f64)> = Vec::new();
    for (p, c) in generator.sorted_terms() {
        if p.is_diagonal() {
            diagonal.push((p, c.re));
        } else {
            pending.push((p, c.re));
        }
    }
    for (p, c) in &pending {
        if p.weight() != 2 || p.z_mask() != 0 && p.z_mask() != p.x_mask() {
            return Err(format!("generator word {p} is not a Givens or diagonal term"));
        }
        let s = p.support();
        let (a, b) = (s[0], s[1]);
        let is_xx = p.z_mask() == 0;
        if is_xx {
            let yy = PauliString::from_masks(n, p.x_mask(), p.x_mask());
            let cy = generator.coeff(&yy).re;
            if (cy - c).abs() > 1e-12 {
                return Err(format!("X{a}X{b} and Y{a}Y{b} coefficients differ ({c} vs {cy})"));
            }
            hops.push((a, b, *c));
        } else {
            let xx = PauliString::from_masks(n, p.x_mask(), 0);
            if generator.coeff(&xx).norm() == 0.0 {
                return Err(format!("Y{a}Y{b} appears without X{a}X{b}"));
            }
        }
    }
    Ok(SectorPlan { diagonal, hops })
}

/// Loss for a basis-state input evolved inside its sector.
pub fn sector_loss(state_prep_bits: &[bool], circuit: &Circuit, params: &[f64], obs: &PauliSum) -> Result<f64> {
    check_dims("observable vs circuit qubits", obs.n(), circuit.n)?;
    if !obs.is_hermitian(1e-12) {
        return Err(SimError::Argument("observable is not Hermitian".into()));
    }
    if !obs.commutator(&total_z(obs.n()))?.is_empty() {
        return Err(SimError::InadmissibleObservable("observable does not commute with total Z".into()));
    }
    let mut s = SectorState::embed(state_prep_bits)?;
    s.apply_circuit(circuit, params)?;
    Ok(s.expectation(obs)?.re)
}
