//! Free-fermion (matchgate) simulation. Majoranas are 0-based: qubit `j`
//! carries `c_{2j} = Z_0..Z_{j-1} X_j` and `c_{2j+1} = Z_0..Z_{j-1} Y_j`.
//! A gate conjugates single Majoranas by `R in SO(2n)`; degree-`eta`
//! monomials move with the `eta`-th compound of `R`.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::error::{check_dims, Result, SimError};
use crate::expectation::{Estimate, ExpectationSource};
use crate::hamming::sector_dim;
use crate::pauli::{Pauli, PauliString, PauliSum, Phase};

/// Default cap on `C(2n, eta)`.
pub const DEFAULT_MODULE_CAP: u64 = 1_000_000;

/// `i^{eta(eta-1)/2} c_{s_1} ... c_{s_eta}` with strictly increasing indices;
/// Hermitian with unit norm.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MajoranaMonomial {
    indices: Vec<usize>,
}

impl MajoranaMonomial {
    pub fn new(mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(SimError::Argument(format!("repeated Majorana index in {indices:?}")));
        }
        Ok(MajoranaMonomial { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn degree(&self) -> usize {
        self.indices.len()
    }
}

fn single_majorana(n: usize, k: usize) -> PauliString {
    let j = k / 2;
    let mut p = PauliString::identity(n);
    for q in 0..j {
        p.set(q, Pauli::Z);
    }
    p.set(j, if k.is_multiple_of(2) { Pauli::X } else { Pauli::Y });
    p
}

/// Jordan-Wigner image of a monomial, phase included.
pub fn majorana_to_pauli(m: &MajoranaMonomial, n: usize) -> Result<PauliString> {
    if let Some(&k) = m.indices.last() {
        if k >= 2 * n {
            return Err(SimError::Argument(format!("Majorana index {k} out of range for n = {n}")));
        }
    }
    let mut p = PauliString::identity(n);
    for &k in &m.indices {
        p = p.multiply(&single_majorana(n, k))?;
    }
    let eta = m.degree() as i64;
    let phase = p.phase().exponent() as i64 + eta * (eta - 1) / 2;
    Ok(p.with_phase(Phase::from_exponent(phase)))
}

/// Inverse map: `word = sign * M_S`. Every Pauli word is, up to sign, one
/// Hermitian monomial; the input phase must be real.
pub fn pauli_to_majorana(word: &PauliString) -> Result<(MajoranaMonomial, f64)> {
    let n = word.n();
    let mut indices = Vec::new();
    let mut parity = false;
    // Qubit j sees its own pair and a Z from every Majorana above it.
    for j in (0..n).rev() {
        let (a, b) = match (parity, word.op(j)) {
            (false, Pauli::I) | (true, Pauli::Z) => (false, false),
            (false, Pauli::X) | (true, Pauli::Y) => (true, false),
            (false, Pauli::Y) | (true, Pauli::X) => (false, true),
            (false, Pauli::Z) | (true, Pauli::I) => (true, true),
        };
        if b {
            indices.push(2 * j + 1);
        }
        if a {
            indices.push(2 * j);
        }
        parity ^= a ^ b;
    }
    let m = MajoranaMonomial::new(indices)?;
    let image = majorana_to_pauli(&m, n)?;
    let diff = (word.phase().exponent() as i64 - image.phase().exponent() as i64).rem_euclid(4);
    match diff {
        0 => Ok((m, 1.0)),
        2 => Ok((m, -1.0)),
        _ => Err(SimError::Argument(format!("word {word} is not Hermitian"))),
    }
}

/// Splits a Hermitian observable into monomials of a single degree.
pub fn observable_monomials(obs: &PauliSum) -> Result<(usize, Vec<(MajoranaMonomial, f64)>)> {
    if !obs.is_hermitian(1e-12) {
        return Err(SimError::Argument("observable is not Hermitian".into()));
    }
    let mut out = Vec::new();
    let mut eta = None;
    for (p, c) in obs.sorted_terms() {
        let (m, s) = pauli_to_majorana(&p)?;
        match eta {
            None => eta = Some(m.degree()),
            Some(e) if e != m.degree() => {
                return Err(SimError::Argument(format!("observable mixes Majorana degrees {e} and {}", m.degree())))
            }
            _ => {}
        }
        out.push((m, s * c.re));
    }
    Ok((eta.unwrap_or(0), out))
}

/// Orthogonal `R` with `U^dag c_p U = sum_q R[p, q] c_q`.
#[derive(Clone, Debug, PartialEq)]
pub struct RotationMatrix {
    r: DMatrix<f64>,
}

impl RotationMatrix {
    pub fn identity(n: usize) -> Self {
        RotationMatrix { r: DMatrix::identity(2 * n, 2 * n) }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn n(&self) -> usize {
        self.r.nrows() / 2
    }

    /// `max |R^T R - I|` and `det R`.
    pub fn orthogonality(&self) -> (f64, f64) {
        let d = &self.r.transpose() * &self.r - DMatrix::identity(self.r.nrows(), self.r.nrows());
        (d.amax(), self.r.determinant())
    }
}

/// Heisenberg rotation of the whole circuit. Each rotation word must be a
/// quadratic monomial `sign * i c_a c_b`; `exp(-i phi sign i c_a c_b)` maps
/// `c_a -> cos(2 phi') c_a - sin(2 phi') c_b`, `c_b -> cos c_b + sin c_a`
/// with `phi' = -sign * phi`.
pub fn circuit_rotation(circuit: &Circuit, params: &[f64]) -> Result<RotationMatrix> {
    circuit.check_params(params)?;
    let n = circuit.n;
    let dim = 2 * n;
    // U^dag c U conjugates by the last gate first, so R = G_L ... G_1.
    let mut r = DMatrix::<f64>::identity(dim, dim);
    for (gi, gate) in circuit.gates.iter().enumerate() {
        for (word, phi) in gate.rotations(n, params) {
            let (m, sign) = pauli_to_majorana(&word)?;
            if m.degree() != 2 {
                return Err(SimError::InadmissibleCircuit {
                    gate: gi,
                    reason: format!("rotation word {word} is not quadratic in Majoranas"),
                });
            }
            let (a, b) = (m.indices[0], m.indices[1]);
            let t = -2.0 * sign * phi;
            let (s, c) = t.sin_cos();
            // r <- G r with G[a] = (c, -s), G[b] = (s, c) on columns (a, b).
            for col in 0..dim {
                let (ra, rb) = (r[(a, col)], r[(b, col)]);
                r[(a, col)] = c * ra - s * rb;
                r[(b, col)] = s * ra + c * rb;
            }
        }
    }
    Ok(RotationMatrix { r })
}

/// `C(2n, eta)` with overflow reported as a resource error.
pub fn module_dim(n: usize, eta: usize) -> Result<u64> {
    sector_dim(2 * n, eta)
}

fn minor(r: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> f64 {
    let k = rows.len();
    match k {
        0 => 1.0,
        1 => r[(rows[0], cols[0])],
        2 => r[(rows[0], cols[0])] * r[(rows[1], cols[1])] - r[(rows[0], cols[1])] * r[(rows[1], cols[0])],
        _ => DMatrix::from_fn(k, k, |i, j| r[(rows[i], cols[j])]).determinant(),
    }
}

/// All `eta`-subsets of `0..m` in lexicographic order.
pub fn subsets(m: usize, eta: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..eta).collect();
    if eta > m {
        return out;
    }
    loop {
        out.push(cur.clone());
        let mut i = eta;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < m - eta + i {
                cur[i] += 1;
                for j in i + 1..eta {
                    cur[j] = cur[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Dense `eta`-th compound matrix, rows and columns in lexicographic subset order.
pub fn compound(r: &RotationMatrix, eta: usize) -> Result<DMatrix<f64>> {
    let d = module_dim(r.n(), eta)?;
    if d > 4096 {
        return Err(SimError::Resource(format!("dense compound of size {d} too large")));
    }
    let sets = subsets(2 * r.n(), eta);
    let m = sets.len();
    Ok(DMatrix::from_fn(m, m, |i, j| minor(&r.r, &sets[i], &sets[j])))
}

/// `<M_T>` for every `eta`-subset `T`, queried from an expectation source.
pub fn state_correlations<S: ExpectationSource>(source: &S, eta: usize) -> Result<HashMap<MajoranaMonomial, Estimate>> {
    let n = source.n();
    let d = module_dim(n, eta)?;
    if d > DEFAULT_MODULE_CAP {
        return Err(SimError::Resource(format!("module dimension {d} exceeds cap {DEFAULT_MODULE_CAP}")));
    }
    let sets = subsets(2 * n, eta);
    let words: Vec<PauliString> = sets
        .iter()
        .map(|s| majorana_to_pauli(&MajoranaMonomial { indices: s.clone() }, n).map(|p| p.canonical()))
        .collect::<Result<_>>()?;
    source.check_answerable(words.iter())?;
    sets.into_par_iter()
        .map(|s| {
            let m = MajoranaMonomial { indices: s };
            let p = majorana_to_pauli(&m, n)?;
            let sign = if p.phase().exponent() == 2 { -1.0 } else { 1.0 };
            let e = source.word_expectation(&p.canonical())?;
            Ok((m, Estimate { value: sign * e.value, stderr: e.stderr }))
        })
        .collect()
}

/// `Tr[rho U^dag O U]` for `O = sum_S w_S M_S`; missing correlations count as zero.
pub fn module_loss(
    circuit: &Circuit,
    params: &[f64],
    obs: &[(MajoranaMonomial, f64)],
    correlations: &HashMap<MajoranaMonomial, f64>,
) -> Result<f64> {
    module_loss_with_cap(circuit, params, obs, correlations, DEFAULT_MODULE_CAP)
}

pub fn module_loss_with_cap(
    circuit: &Circuit,
    params: &[f64],
    obs: &[(MajoranaMonomial, f64)],
    correlations: &HashMap<MajoranaMonomial, f64>,
    cap: u64,
) -> Result<f64> {
    let n = circuit.n;
    let Some(eta) = obs.first().map(|(m, _)| m.degree()) else {
        return Ok(0.0);
    };
    let all = || obs.iter().map(|(m, _)| m).chain(correlations.keys());
    if all().any(|m| m.degree() != eta) {
        return Err(SimError::Argument("monomials of mixed degree".into()));
    }
    for m in all() {
        if m.indices.last().is_some_and(|&k| k >= 2 * n) {
            return Err(SimError::Argument(format!("Majorana index out of range in {:?}", m.indices)));
        }
    }
    let d = module_dim(n, eta)?;
    if d > cap {
        return Err(SimError::Resource(format!("module dimension {d} exceeds cap {cap}")));
    }
    let r = circuit_rotation(circuit, params)?;
    let targets: Vec<(&MajoranaMonomial, f64)> =
        correlations.iter().filter(|(_, &v)| v != 0.0).map(|(m, &v)| (m, v)).collect();
    let total = targets
        .par_iter()
        .map(|(t, v)| obs.iter().map(|(s, w)| w * minor(&r.r, &s.indices, &t.indices)).sum::<f64>() * v)
        .sum();
    Ok(total)
}

/// Module loss with correlations drawn from `source`. Error bars assume
/// independent correlation estimates.
pub fn module_loss_from_source<S: ExpectationSource>(
    circuit: &Circuit,
    params: &[f64],
    obs: &PauliSum,
    source: &S,
) -> Result<Estimate> {
    check_dims("observable vs circuit qubits", obs.n(), circuit.n)?;
    check_dims("source vs circuit qubits", source.n(), circuit.n)?;
    let (eta, monos) = observable_monomials(obs)?;
    let corr = state_correlations(source, eta)?;
    let values: HashMap<MajoranaMonomial, f64> = corr.iter().map(|(m, e)| (m.clone(), e.value)).collect();
    let value = module_loss(circuit, params, &monos, &values)?;
    let r = circuit_rotation(circuit, params)?;
    let var: f64 = corr
        .iter()
        .map(|(t, e)| {
            let a: f64 = monos.iter().map(|(s, w)| w * minor(&r.r, &s.indices, &t.indices)).sum();
            (a * e.stderr).powi(2)
        })
        .sum();
    Ok(Estimate { value, stderr: var.sqrt() })
}
