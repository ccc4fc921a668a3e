//! Backward light cones of local observables and exact evaluation of the
//! reduced circuit on the cone's qubits.
//!
//! Gates that never touch the growing support of `O` under reverse sweeping
//! cancel in `U^dag O U`, so the loss only needs the reduced input state on
//! the cone and the kept gates.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::circuit::{Circuit, Gate, GateKind};
use crate::error::{check_dims, Result, SimError};
use crate::expectation::{Estimate, ExpectationSource};
use crate::pauli::{PauliString, PauliSum};

/// Default largest cone evaluated densely.
pub const DEFAULT_CONE_CAP: usize = 14;

type CMat = DMatrix<Complex64>;

#[derive(Clone, Debug, PartialEq)]
pub struct LightCone {
    /// Full register size.
    pub n: usize,
    /// Cone qubits, ascending. Local qubit `i` is `qubit_set[i]`.
    pub qubit_set: Vec<usize>,
    /// Indices of kept gates in the original circuit, ascending.
    pub gate_indices: Vec<usize>,
    /// Kept gates relabelled onto local qubits; same parameter slots.
    pub kept: Circuit,
}

impl LightCone {
    pub fn size(&self) -> usize {
        self.qubit_set.len()
    }

    fn local(&self, q: usize) -> Option<usize> {
        self.qubit_set.binary_search(&q).ok()
    }

    /// Word on the full register restricted to cone qubits, or `None` if it
    /// acts outside the cone.
    pub fn localize(&self, p: &PauliString) -> Option<PauliString> {
        if p.support().iter().all(|&q| self.local(q).is_some()) {
            Some(p.restrict(&self.qubit_set))
        } else {
            None
        }
    }

    pub fn localize_sum(&self, s: &PauliSum) -> Result<PauliSum> {
        check_dims("observable vs circuit qubits", s.n(), self.n)?;
        let mut out = PauliSum::zero(self.size());
        for (p, c) in s.iter() {
            let lp = self
                .localize(p)
                .ok_or_else(|| SimError::Consistency(format!("observable word {p} escapes the light cone")))?;
            out.add_term(&lp, *c);
        }
        Ok(out)
    }

    /// Embeds a cone-local word back into the full register.
    pub fn globalize(&self, p: &PauliString) -> PauliString {
        p.embed(self.n, &self.qubit_set)
    }
}

/// Reverse sweep: a gate is kept iff it overlaps the current support, which
/// then absorbs the gate's qubits.
pub fn backward_cone(circuit: &Circuit, support: &[usize]) -> Result<LightCone> {
    if let Some(&q) = support.iter().find(|&&q| q >= circuit.n) {
        return Err(SimError::Argument(format!("support qubit {q} out of range")));
    }
    let mut inside = vec![false; circuit.n];
    for &q in support {
        inside[q] = true;
    }
    let mut kept_idx = Vec::new();
    for (i, g) in circuit.gates.iter().enumerate().rev() {
        let qs = g.qubits();
        if qs.iter().any(|&q| inside[q]) {
            for q in qs {
                inside[q] = true;
            }
            kept_idx.push(i);
        }
    }
    kept_idx.reverse();
    let qubit_set: Vec<usize> = (0..circuit.n).filter(|&q| inside[q]).collect();
    let pos = |q: usize| qubit_set.binary_search(&q).expect("kept gate inside cone");
    let mut kept = Circuit::new(qubit_set.len());
    for &i in &kept_idx {
        let g = &circuit.gates[i];
        let kind = match &g.kind {
            GateKind::PauliRotation { generator } => {
                let mut h = PauliSum::zero(qubit_set.len());
                for (p, c) in generator.iter() {
                    h.add_term(&p.restrict(&qubit_set), *c);
                }
                GateKind::PauliRotation { generator: h }
            }
            GateKind::Fixed { gate, qubits } => {
                GateKind::Fixed { gate: *gate, qubits: qubits.iter().map(|&q| pos(q)).collect() }
            }
        };
        kept.gates.push(Gate { kind, ..g.clone() });
    }
    kept.n_params = circuit.n_params;
    Ok(LightCone { n: circuit.n, qubit_set, gate_indices: kept_idx, kept })
}

/// Action of a word on basis states: `P|b> = f(b) |b ^ x>`.
struct WordAction {
    x: usize,
    z: usize,
    base: u32,
}

impl WordAction {
    fn new(p: &PauliString) -> Self {
        WordAction { x: p.x_mask() as usize, z: p.z_mask() as usize, base: p.phase().exponent() as u32 + p.y_count() }
    }

    fn f(&self, b: usize) -> Complex64 {
        let k = self.base + 2 * ((b & self.z).count_ones() & 1);
        match k % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }
}

/// `R^dag O R` with `R = exp(-i phi P) = c - i s P`.
fn conjugate_rotation(o: &CMat, p: &PauliString, phi: f64) -> CMat {
    let (s, c) = phi.sin_cos();
    let a = WordAction::new(p);
    let d = o.nrows();
    // (P O)[r, k] = f(r ^ x) O[r ^ x, k]; (O P)[r, k] = O[r, k ^ x] f(k)
    let po = CMat::from_fn(d, d, |r, k| a.f(r ^ a.x) * o[(r ^ a.x, k)]);
    let op = CMat::from_fn(d, d, |r, k| o[(r, k ^ a.x)] * a.f(k));
    let pop = CMat::from_fn(d, d, |r, k| a.f(r ^ a.x) * op[(r ^ a.x, k)]);
    let i = Complex64::new(0.0, 1.0);
    // (c + isP) O (c - isP) = c^2 O + ics (PO - OP) + s^2 POP
    o * Complex64::new(c * c, 0.0) + (po - op) * (i * c * s) + pop * Complex64::new(s * s, 0.0)
}

/// Dense matrix of a sum on `m` qubits (bit `j` of the index is qubit `j`).
pub fn sum_to_dense(s: &PauliSum) -> CMat {
    let d = 1usize << s.n();
    let mut m = CMat::zeros(d, d);
    for (p, c) in s.iter() {
        let a = WordAction::new(p);
        for b in 0..d {
            m[(b ^ a.x, b)] += c * a.f(b);
        }
    }
    m
}

/// Pauli coefficients `alpha_P = Tr[P^dag O] / 2^m` via one Walsh-Hadamard
/// transform per X-mask. Coefficients below `drop` are omitted.
pub fn dense_to_sum(o: &CMat, m: usize, drop: f64) -> PauliSum {
    let d = 1usize << m;
    let mut out = PauliSum::with_prune(m, drop.max(f64::MIN_POSITIVE));
    let scale = 1.0 / d as f64;
    let mut g = vec![Complex64::new(0.0, 0.0); d];
    for x in 0..d {
        for (b, gb) in g.iter_mut().enumerate() {
            *gb = o[(b ^ x, b)];
        }
        let mut h = 1;
        while h < d {
            for i in (0..d).step_by(2 * h) {
                for j in i..i + h {
                    let (u, v) = (g[j], g[j + h]);
                    g[j] = u + v;
                    g[j + h] = u - v;
                }
            }
            h *= 2;
        }
        for (z, gz) in g.iter().enumerate() {
            if gz.norm() * scale < drop {
                continue;
            }
            // alpha = i^{-|x & z|} * sum_b (-1)^{b.z} O[b^x, b] / 2^m
            let y = (x & z).count_ones() % 4;
            let ph = match y {
                0 => Complex64::new(1.0, 0.0),
                1 => Complex64::new(0.0, -1.0),
                2 => Complex64::new(-1.0, 0.0),
                _ => Complex64::new(0.0, 1.0),
            };
            out.add_term(&PauliString::from_masks(m, x as u64, z as u64), gz * ph * scale);
        }
    }
    out
}

/// `U_cone^dag O U_cone` as a dense matrix on the cone.
pub fn reduced_observable(cone: &LightCone, obs: &PauliSum, params: &[f64], cap: usize) -> Result<CMat> {
    if cone.size() > cap {
        return Err(SimError::Resource(format!("light cone of {} qubits exceeds cap {cap}", cone.size())));
    }
    cone.kept.check_params(params)?;
    let local = cone.localize_sum(obs)?;
    let mut o = sum_to_dense(&local);
    for g in cone.kept.gates.iter().rev() {
        for (p, phi) in g.rotations(cone.size(), params).iter().rev() {
            if *phi != 0.0 {
                o = conjugate_rotation(&o, p, *phi);
            }
        }
    }
    Ok(o)
}

fn check_density(rho: &CMat, m: usize) -> Result<()> {
    check_dims("reduced state size", rho.nrows(), 1 << m)?;
    check_dims("reduced state size", rho.ncols(), 1 << m)?;
    if (rho - rho.adjoint()).camax() > 1e-10 {
        return Err(SimError::Argument("reduced state is not Hermitian".into()));
    }
    if (rho.trace().re - 1.0).abs() > 1e-10 {
        return Err(SimError::Argument("reduced state does not have unit trace".into()));
    }
    let eig = nalgebra::SymmetricEigen::new(rho.clone());
    if eig.eigenvalues.iter().any(|&l| l < -1e-10) {
        return Err(SimError::Argument("reduced state is not positive semidefinite".into()));
    }
    Ok(())
}

/// `Tr[rho_cone U_cone^dag O U_cone]` with `rho` on the cone qubits in
/// `qubit_set` order.
pub fn reduced_loss(cone: &LightCone, rho: &CMat, obs: &PauliSum, params: &[f64]) -> Result<f64> {
    reduced_loss_with_cap(cone, rho, obs, params, DEFAULT_CONE_CAP)
}

pub fn reduced_loss_with_cap(cone: &LightCone, rho: &CMat, obs: &PauliSum, params: &[f64], cap: usize) -> Result<f64> {
    if !obs.is_hermitian(1e-12) {
        return Err(SimError::Argument("observable is not Hermitian".into()));
    }
    let o = reduced_observable(cone, obs, params, cap)?;
    check_density(rho, cone.size())?;
    Ok((rho * o).trace().re)
}

/// Expands `O(theta)` on the cone in Pauli words and estimates each from
/// `source` (typically a shadow dataset).
pub fn reduced_loss_from_shadows<S: ExpectationSource>(
    cone: &LightCone,
    source: &S,
    obs: &PauliSum,
    params: &[f64],
) -> Result<Estimate> {
    check_dims("source vs circuit qubits", source.n(), cone.n)?;
    let o = reduced_observable(cone, obs, params, DEFAULT_CONE_CAP)?;
    let local = dense_to_sum(&o, cone.size(), 1e-12);
    let mut global = PauliSum::zero(cone.n);
    for (p, c) in local.iter() {
        global.add_term(&cone.globalize(p), Complex64::new(c.re, 0.0));
    }
    source.sum_expectation(&global)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{brick_pairs, build_shallow_hea};
    use crate::dense;
    use crate::pauli::Pauli;
    use crate::seed::rng_from;
    use crate::statevector::{loss, prepare};
    use rand::Rng;
    use std::f64::consts::PI;

    fn params(k: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_from(seed);
        (0..k).map(|_| rng.random_range(0.0..2.0 * PI)).collect()
    }

    fn z_at(n: usize, q: usize) -> PauliSum {
        PauliSum::from_word(&PauliString::single(n, q, Pauli::Z).unwrap(), 1.0)
    }

    #[test]
    fn cone_examples() {
        let c = Circuit::new(6);
        let cone = backward_cone(&c, &[3]).unwrap();
        assert_eq!(cone.qubit_set, vec![3]);
        assert!(cone.kept.is_empty());
        let c = build_shallow_hea(6, 1, None).unwrap();
        let cone = backward_cone(&c, &[3]).unwrap();
        assert_eq!(cone.qubit_set, vec![2, 3]);
        let c = build_shallow_hea(10, 3, None).unwrap();
        let cone = backward_cone(&c, &[5]).unwrap();
        assert!(cone.size() <= 6);
        assert!(cone.kept.gates.iter().all(|g| g.qubits().iter().all(|&q| q < cone.size())));
    }

    #[test]
    fn cone_growth_bound() {
        for n in [8, 11] {
            for layers in 1..=4 {
                let c = build_shallow_hea(n, layers, Some(layers as u64)).unwrap();
                for q in 0..n {
                    let cone = backward_cone(&c, &[q]).unwrap();
                    assert!(cone.size() <= 1 + 2 * layers);
                    assert!(cone.size() <= 2 * layers);
                }
            }
        }
        assert_eq!(brick_pairs(5, 1), vec![(1, 2), (3, 4)]);
    }

    #[test]
    fn pauli_expansion_round_trip() {
        let s = PauliSum::from_pairs(3, &[(0.5, "XYZ"), (-1.25, "IIZ"), (0.75, "YYI")]).unwrap();
        let d = sum_to_dense(&s);
        assert!(dense::max_abs_diff(&d, &dense::sum_matrix(&s)) < 1e-14);
        let back = dense_to_sum(&d, 3, 1e-14);
        assert!(back.sub(&s).unwrap().norm() < 1e-14);
    }

    #[test]
    fn reduced_loss_examples() {
        let c = build_shallow_hea(4, 1, None).unwrap();
        let cone = backward_cone(&c, &[0]).unwrap();
        assert_eq!(cone.size(), 2);
        let p = params(c.n_params, 1);
        let mixed = CMat::identity(4, 4) * Complex64::new(0.25, 0.0);
        assert!(reduced_loss(&cone, &mixed, &z_at(4, 0), &p).unwrap().abs() < 1e-14);
        let empty = backward_cone(&Circuit::new(4), &[1]).unwrap();
        let mut rho = CMat::zeros(2, 2);
        rho[(0, 0)] = Complex64::new(1.0, 0.0);
        assert_eq!(reduced_loss(&empty, &rho, &z_at(4, 1), &[]).unwrap(), 1.0);
        assert!(matches!(reduced_loss(&empty, &rho, &z_at(4, 2), &[]), Err(SimError::Consistency(_))));
        assert!(matches!(reduced_loss_with_cap(&cone, &mixed, &z_at(4, 0), &p, 1), Err(SimError::Resource(_))));
    }

    #[test]
    fn reduced_loss_matches_oracle() {
        let n = 10;
        let c = build_shallow_hea(n, 2, None).unwrap();
        let prep = build_shallow_hea(n, 3, Some(9)).unwrap();
        let prep_params = params(prep.n_params, 2);
        let mut bound_prep = Circuit::new(n);
        for g in &prep.gates {
            let mut g = g.clone();
            g.constant_angle = Some(g.angle(&prep_params));
            g.param_slot = None;
            bound_prep.push(g);
        }
        let state = prepare(&bound_prep, &Circuit::new(n), &[]).unwrap();
        let obs = PauliSum::from_pairs(n, &[(1.0, "IIIIIZIIII"), (0.5, "IIIIXXIIII")]).unwrap();
        let cone = backward_cone(&c, &obs.support()).unwrap();
        let rho = state.reduced_density(&cone.qubit_set).unwrap();
        for k in 0..5 {
            let p = params(c.n_params, 10 + k);
            let a = reduced_loss(&cone, &rho, &obs, &p).unwrap();
            let b = loss(&bound_prep, &c, &p, &obs).unwrap();
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn basis_projector_is_born_probability() {
        let n = 6;
        let c = build_shallow_hea(n, 2, Some(4)).unwrap();
        let p = params(c.n_params, 3);
        // |01><01| on qubits 2,3 = (I+Z2)/2 (I-Z3)/2
        let proj = PauliSum::from_pairs(n, &[(0.25, "IIIIII"), (0.25, "IIZIII"), (-0.25, "IIIZII"), (-0.25, "IIZZII")])
            .unwrap();
        let cone = backward_cone(&c, &[2, 3]).unwrap();
        let rho = crate::statevector::DenseState::zero(n).unwrap().reduced_density(&cone.qubit_set).unwrap();
        let r = reduced_loss(&cone, &rho, &proj, &p).unwrap();
        let s = prepare(&Circuit::new(n), &c, &p).unwrap();
        let born: f64 = s
            .probabilities()
            .iter()
            .enumerate()
            .filter(|(b, _)| (b >> 2) & 1 == 0 && (b >> 3) & 1 == 1)
            .map(|(_, pr)| pr)
            .sum();
        assert!((r - born).abs() < 1e-10);
    }

    #[test]
    fn oracle_source_path_matches_dense_path() {
        let n = 8;
        let c = build_shallow_hea(n, 2, None).unwrap();
        let p = params(c.n_params, 6);
        let obs = z_at(n, 4);
        let state = crate::statevector::DenseState::random(n, 2).unwrap();
        let cone = backward_cone(&c, &[4]).unwrap();
        let rho = state.reduced_density(&cone.qubit_set).unwrap();
        let a = reduced_loss(&cone, &rho, &obs, &p).unwrap();
        let b = reduced_loss_from_shadows(&cone, &state, &obs, &p).unwrap();
        assert!((a - b.value).abs() < 1e-10 && b.stderr == 0.0);
    }
}
