//! Builders for the ansatz families used throughout the crate.

use num_complex::Complex64;
use rand::Rng;

use super::Circuit;
use crate::error::{Result, SimError};
use crate::pauli::{Pauli, PauliString, PauliSum};
use crate::seed::rng_from;

fn word(n: usize, ops: &[(usize, Pauli)]) -> PauliString {
    PauliString::from_ops(n, ops).expect("builder qubits in range")
}

/// Number of parameterized rotations in one two-qubit HEA block.
pub const HEA_BLOCK_PARAMS: usize = 5;

/// Appends the two-qubit block `R(a) R(b); ZZ(a,b); R(a) R(b)` where `R` is a
/// single-qubit rotation about `axes[k]`.
fn push_block(c: &mut Circuit, a: usize, b: usize, layer: usize, axes: [Pauli; 4]) {
    let n = c.n;
    c.push_word_param(word(n, &[(a, axes[0])]), layer);
    c.push_word_param(word(n, &[(b, axes[1])]), layer);
    c.push_word_param(word(n, &[(a, Pauli::Z), (b, Pauli::Z)]), layer);
    c.push_word_param(word(n, &[(a, axes[2])]), layer);
    c.push_word_param(word(n, &[(b, axes[3])]), layer);
}

/// Qubit pairs touched by brickwork layer `layer` on `n` qubits.
pub fn brick_pairs(n: usize, layer: usize) -> Vec<(usize, usize)> {
    let start = layer % 2;
    (start..n.saturating_sub(1)).step_by(2).map(|a| (a, a + 1)).collect()
}

/// One-dimensional brickwork hardware-efficient ansatz with `layers` layers.
///
/// With `seed_structure = None` every single-qubit rotation is about Y;
/// otherwise each rotation axis is drawn from {X, Y} with that seed.
pub fn build_shallow_hea(n: usize, layers: usize, seed_structure: Option<u64>) -> Result<Circuit> {
    if n < 2 {
        return Err(SimError::Argument(format!("HEA needs n >= 2, got {n}")));
    }
    if layers < 1 {
        return Err(SimError::Argument("HEA needs at least one layer".into()));
    }
    let mut rng = seed_structure.map(rng_from);
    let mut c = Circuit::new(n);
    for l in 0..layers {
        for (a, b) in brick_pairs(n, l) {
            let mut axes = [Pauli::Y; 4];
            if let Some(r) = rng.as_mut() {
                for ax in axes.iter_mut() {
                    *ax = if r.random_bool(0.5) { Pauli::X } else { Pauli::Y };
                }
            }
            push_block(&mut c, a, b, l, axes);
        }
    }
    Ok(c)
}

/// Alternating layers of `Z_j` rotations and nearest-neighbour `X_j X_{j+1}`
/// rotations, repeated `layers` times.
pub fn build_matchgate(n: usize, layers: usize) -> Result<Circuit> {
    if n < 2 {
        return Err(SimError::Argument(format!("matchgate circuit needs n >= 2, got {n}")));
    }
    let mut c = Circuit::new(n);
    for l in 0..layers {
        for j in 0..n {
            c.push_word_param(word(n, &[(j, Pauli::Z)]), 2 * l);
        }
        for j in 0..n - 1 {
            c.push_word_param(word(n, &[(j, Pauli::X), (j + 1, Pauli::X)]), 2 * l + 1);
        }
    }
    Ok(c)
}

/// Givens generator `(X_a X_b + Y_a Y_b) / 2`.
pub fn givens_generator(n: usize, a: usize, b: usize) -> PauliSum {
    let mut g = PauliSum::zero(n);
    g.add_term(&word(n, &[(a, Pauli::X), (b, Pauli::X)]), Complex64::new(0.5, 0.0));
    g.add_term(&word(n, &[(a, Pauli::Y), (b, Pauli::Y)]), Complex64::new(0.5, 0.0));
    g
}

/// Hamming-weight preserving circuit: `Z_j` rotations then nearest-neighbour
/// Givens rotations, per layer.
pub fn build_u1_equivariant(n: usize, layers: usize) -> Result<Circuit> {
    if n < 2 {
        return Err(SimError::Argument(format!("U(1) circuit needs n >= 2, got {n}")));
    }
    let mut c = Circuit::new(n);
    for l in 0..layers {
        for j in 0..n {
            c.push_word_param(word(n, &[(j, Pauli::Z)]), 2 * l);
        }
        for j in 0..n - 1 {
            c.push_param(givens_generator(n, j, j + 1), 2 * l + 1);
        }
    }
    Ok(c)
}

/// Permutation-symmetric generators `sum_j X_j`, `sum_j Y_j`, `sum_{j<k} Z_j Z_k`.
pub fn sn_generators(n: usize) -> Vec<PauliSum> {
    let mut sx = PauliSum::zero(n);
    let mut sy = PauliSum::zero(n);
    let mut zz = PauliSum::zero(n);
    let one = Complex64::new(1.0, 0.0);
    for j in 0..n {
        sx.add_term(&word(n, &[(j, Pauli::X)]), one);
        sy.add_term(&word(n, &[(j, Pauli::Y)]), one);
        for k in j + 1..n {
            zz.add_term(&word(n, &[(j, Pauli::Z), (k, Pauli::Z)]), one);
        }
    }
    vec![sx, sy, zz]
}

/// Permutation-equivariant circuit: layers of the three [`sn_generators`].
pub fn build_sn_equivariant(n: usize, layers: usize) -> Result<Circuit> {
    if n < 2 {
        return Err(SimError::Argument(format!("S_n circuit needs n >= 2, got {n}")));
    }
    let gens = sn_generators(n);
    let mut c = Circuit::new(n);
    for l in 0..layers {
        for g in &gens {
            c.push_param(g.clone(), l);
        }
    }
    Ok(c)
}

/// `layers` sweeps of `exp(-i theta_{l,i} H_i)` over the given terms, one slot
/// per `(l, i)`.
pub fn build_hva(terms: &[PauliSum], layers: usize) -> Result<Circuit> {
    let n = terms.first().map(PauliSum::n).ok_or_else(|| SimError::Argument("HVA needs at least one term".into()))?;
    for (i, t) in terms.iter().enumerate() {
        if t.n() != n {
            return Err(SimError::Argument(format!("term {i} acts on {} qubits, expected {n}", t.n())));
        }
        if t.is_empty() || !t.is_hermitian(1e-12) {
            return Err(SimError::Argument(format!("term {i} is not a non-zero Hermitian operator")));
        }
        if !t.terms_commute() {
            return Err(SimError::Argument(format!("term {i} has non-commuting words")));
        }
    }
    let mut c = Circuit::new(n);
    for l in 0..layers {
        for t in terms {
            c.push_param(t.real_part(), l);
        }
    }
    Ok(c)
}

/// Open-chain transverse-field Ising terms `[sum Z_j Z_{j+1}, sum X_j]`.
pub fn tfim_terms(n: usize) -> Vec<PauliSum> {
    let one = Complex64::new(1.0, 0.0);
    let mut zz = PauliSum::zero(n);
    let mut x = PauliSum::zero(n);
    for j in 0..n {
        x.add_term(&word(n, &[(j, Pauli::X)]), one);
        if j + 1 < n {
            zz.add_term(&word(n, &[(j, Pauli::Z), (j + 1, Pauli::Z)]), one);
        }
    }
    vec![zz, x]
}

#[derive(Clone, Debug, PartialEq)]
pub struct QcnnStage {
    /// Qubits active when the stage starts.
    pub active: Vec<usize>,
    /// Qubits traced out at the end of the stage (empty for the last stage).
    pub discarded: Vec<usize>,
}

/// A QCNN circuit with its pooling schedule. Discarded qubits stay in the
/// register but are never measured.
#[derive(Clone, Debug, PartialEq)]
pub struct QcnnCircuit {
    pub circuit: Circuit,
    pub stages: Vec<QcnnStage>,
    pub final_active: Vec<usize>,
}

impl QcnnCircuit {
    /// `Z_a Z_b` on the two qubits left after the last pooling.
    pub fn observable(&self) -> PauliSum {
        let n = self.circuit.n;
        let (a, b) = (self.final_active[0], self.final_active[1]);
        PauliSum::from_word(&word(n, &[(a, Pauli::Z), (b, Pauli::Z)]), 1.0)
    }
}

/// Parameters per pooling unit.
pub const QCNN_POOL_PARAMS: usize = 2;

/// Convolution (brickwork HEA blocks on the active qubits) followed by
/// pooling, halving the active set each stage until two qubits remain; a
/// final convolution block acts on those two.
///
/// A pooling unit on `(d, k)` applies `exp(-i t1 Z_d X_k) exp(-i t2 Z_d Y_k)`
/// and then traces out `d`.
pub fn build_qcnn(n: usize) -> Result<QcnnCircuit> {
    if n < 4 || !n.is_power_of_two() {
        return Err(SimError::Argument(format!("QCNN needs n a power of two >= 4, got {n}")));
    }
    let mut c = Circuit::new(n);
    let mut active: Vec<usize> = (0..n).collect();
    let mut stages = Vec::new();
    let mut s = 0;
    while active.len() > 2 {
        let m = active.len();
        for parity in 0..2 {
            let mut a = parity;
            while a + 1 < m {
                push_block(&mut c, active[a], active[a + 1], 3 * s + parity, [Pauli::Y; 4]);
                a += 2;
            }
        }
        let mut kept = Vec::with_capacity(m / 2);
        let mut discarded = Vec::with_capacity(m / 2);
        for pair in active.chunks(2) {
            let (d, k) = (pair[0], pair[1]);
            c.push_word_param(word(n, &[(d, Pauli::Z), (k, Pauli::X)]), 3 * s + 2);
            c.push_word_param(word(n, &[(d, Pauli::Z), (k, Pauli::Y)]), 3 * s + 2);
            kept.push(k);
            discarded.push(d);
        }
        stages.push(QcnnStage { active: active.clone(), discarded });
        active = kept;
        s += 1;
    }
    push_block(&mut c, active[0], active[1], 3 * s, [Pauli::Y; 4]);
    stages.push(QcnnStage { active: active.clone(), discarded: vec![] });
    Ok(QcnnCircuit { circuit: c, stages, final_active: active })
}
