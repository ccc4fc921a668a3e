//! Dense-matrix helpers built from explicit Kronecker products.
//!
//! These stay independent of the symplectic word arithmetic and serve as the
//! cross-check for it. Basis index bit `j` is qubit `j`, so the matrix of a
//! word is `P_{n-1} (x) ... (x) P_0`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::pauli::{Pauli, PauliString, PauliSum};

pub type CMatrix = DMatrix<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn single_matrix(p: Pauli) -> CMatrix {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    match p {
        Pauli::I => CMatrix::from_row_slice(2, 2, &[o, z, z, o]),
        Pauli::X => CMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        Pauli::Y => CMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        Pauli::Z => CMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
    }
}

/// Matrix of a word including its phase.
pub fn word_matrix(p: &PauliString) -> CMatrix {
    let mut m = CMatrix::from_element(1, 1, p.phase().to_complex());
    for q in 0..p.n() {
        m = single_matrix(p.op(q)).kronecker(&m);
    }
    m
}

pub fn sum_matrix(s: &PauliSum) -> CMatrix {
    let d = 1usize << s.n();
    let mut m = CMatrix::zeros(d, d);
    for (p, coeff) in s.iter() {
        m += word_matrix(p) * *coeff;
    }
    m
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `exp(-i * theta * H)` for Hermitian `H` via its eigendecomposition.
pub fn unitary_exp(h: &CMatrix, theta: f64) -> CMatrix {
    let eig = nalgebra::SymmetricEigen::new(h.clone());
    let phases = eig.eigenvalues.map(|lam| Complex64::from_polar(1.0, -theta * lam));
    let v = &eig.eigenvectors;
    v * CMatrix::from_diagonal(&phases) * v.adjoint()
}

/// `|0...0><0...0|` on `n` qubits.
pub fn zero_projector(n: usize) -> CMatrix {
    let d = 1usize << n;
    let mut m = CMatrix::zeros(d, d);
    m[(0, 0)] = c(1.0, 0.0);
    m
}

/// Full circuit unitary, applying each gate's rotations in order.
pub fn circuit_unitary(circuit: &crate::circuit::Circuit, params: &[f64]) -> crate::error::Result<CMatrix> {
    circuit.check_params(params)?;
    let d = 1usize << circuit.n;
    let mut u = CMatrix::identity(d, d);
    for g in &circuit.gates {
        for (p, phi) in g.rotations(circuit.n, params) {
            let step = CMatrix::identity(d, d) * c(phi.cos(), 0.0) - word_matrix(&p) * c(0.0, phi.sin());
            u = step * u;
        }
    }
    Ok(u)
}

/// Pauli expansion of a dense operator by brute-force traces over all `4^n` words.
pub fn expand(m: &CMatrix, n: usize, drop: f64) -> PauliSum {
    let d = 1usize << n;
    let mut out = PauliSum::zero(n);
    for code in 0..(1usize << (2 * n)) {
        let mut p = PauliString::identity(n);
        for q in 0..n {
            p.set(q, [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][(code >> (2 * q)) & 3]);
        }
        let coeff = (word_matrix(&p).adjoint() * m).trace() / d as f64;
        if coeff.norm() > drop {
            out.add_term(&p, coeff);
        }
    }
    out
}

/// `U^dag O U` expanded in Pauli words; meant for small `n`.
pub fn heisenberg(circuit: &crate::circuit::Circuit, params: &[f64], obs: &PauliSum) -> crate::error::Result<PauliSum> {
    crate::error::check_dims("observable vs circuit qubits", obs.n(), circuit.n)?;
    let u = circuit_unitary(circuit, params)?;
    Ok(expand(&(u.adjoint() * sum_matrix(obs) * u), circuit.n, 1e-14))
}
