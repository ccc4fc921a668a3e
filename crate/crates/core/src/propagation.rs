//! Heisenberg back-propagation of observables in the Pauli basis, with
//! optional truncation after every gate.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::error::{check_dims, Result, SimError};
use crate::expectation::{Estimate, ExpectationSource};
use crate::pauli::{PauliString, PauliSum};

/// Truncation limits plus the running tally of discarded squared mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    pub max_weight: Option<usize>,
    pub min_coeff: f64,
    pub max_terms: Option<usize>,
    /// Sum of `|alpha|^2` over every discarded term.
    pub discard_log: f64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self::unlimited()
    }
}

impl TruncationPolicy {
    pub fn unlimited() -> Self {
        TruncationPolicy { max_weight: None, min_coeff: 0.0, max_terms: None, discard_log: 0.0 }
    }

    pub fn max_weight(k: usize) -> Self {
        TruncationPolicy { max_weight: Some(k), ..Self::unlimited() }
    }

    pub fn is_unlimited(&self) -> bool {
        self.max_weight.is_none() && self.min_coeff == 0.0 && self.max_terms.is_none()
    }

    /// Weight cut, then coefficient cut, then keep the `max_terms` largest
    /// (ties by word order).
    pub fn apply(&mut self, sum: &mut PauliSum) {
        if self.is_unlimited() {
            return;
        }
        let mut dropped = 0.0;
        let (w, m) = (self.max_weight, self.min_coeff);
        let mut kept: Vec<(PauliString, Complex64)> = Vec::with_capacity(sum.len());
        for (p, c) in sum.iter() {
            if w.is_some_and(|w| p.weight() > w) || c.norm() < m {
                dropped += c.norm_sqr();
            } else {
                kept.push((p.clone(), *c));
            }
        }
        if let Some(k) = self.max_terms {
            if kept.len() > k {
                kept.sort_by(|a, b| b.1.norm().total_cmp(&a.1.norm()).then_with(|| a.0.cmp(&b.0)));
                dropped += kept[k..].iter().map(|(_, c)| c.norm_sqr()).sum::<f64>();
                kept.truncate(k);
            }
        }
        if dropped > 0.0 || kept.len() != sum.len() {
            let mut out = PauliSum::with_prune(sum.n(), sum.prune_threshold());
            for (p, c) in kept {
                out.accumulate_canonical(p, c);
            }
            *sum = out;
        }
        self.discard_log += dropped;
    }
}

/// `exp(i phi P) O exp(-i phi P)` for a Hermitian word `P`.
pub fn conjugate_by_rotation(sum: &PauliSum, p: &PauliString, phi: f64) -> PauliSum {
    let (s, c) = (2.0 * phi).sin_cos();
    let mut out = PauliSum::with_prune(sum.n(), sum.prune_threshold());
    let minus_i = Complex64::new(0.0, -1.0);
    for (q, a) in sum.iter() {
        if q.commutes_with(p) {
            out.accumulate_canonical(q.clone(), *a);
        } else {
            // anticommuting: cos(2 phi) Q - i sin(2 phi) Q P
            out.accumulate_canonical(q.clone(), a * c);
            let qp = q.mul_unchecked(p);
            out.accumulate(&qp, a * s * minus_i);
        }
    }
    out.prune();
    out
}

/// `U^dag O U`, gates in reverse, truncating after each gate.
pub fn backpropagate(
    obs: &PauliSum,
    circuit: &Circuit,
    params: &[f64],
    policy: &mut TruncationPolicy,
) -> Result<PauliSum> {
    check_dims("observable vs circuit qubits", obs.n(), circuit.n)?;
    circuit.check_params(params)?;
    let mut cur = obs.clone();
    policy.apply(&mut cur);
    for gate in circuit.gates.iter().rev() {
        for (p, phi) in gate.rotations(circuit.n, params).into_iter().rev() {
            cur = conjugate_by_rotation(&cur, &p, phi);
        }
        policy.apply(&mut cur);
    }
    Ok(cur)
}

/// Untruncated `U^dag O U` that fails once the term count exceeds `term_cap`.
pub fn backpropagate_bounded(obs: &PauliSum, circuit: &Circuit, params: &[f64], term_cap: usize) -> Result<PauliSum> {
    check_dims("observable vs circuit qubits", obs.n(), circuit.n)?;
    circuit.check_params(params)?;
    let mut cur = obs.clone();
    for gate in circuit.gates.iter().rev() {
        for (p, phi) in gate.rotations(circuit.n, params).into_iter().rev() {
            cur = conjugate_by_rotation(&cur, &p, phi);
        }
        if cur.len() > term_cap {
            return Err(SimError::Resource(format!(
                "propagated observable exceeds {term_cap} terms; use a truncated estimate instead"
            )));
        }
    }
    Ok(cur)
}

/// `sum_P alpha_P <P>` over the surviving words.
pub fn loss_from_expectations<S: ExpectationSource>(propagated: &PauliSum, source: &S) -> Result<Estimate> {
    source.sum_expectation(&propagated.real_part())
}

/// `(A_low, A_high)` split at weight `k`.
pub fn split_observable(obs: &PauliSum, k: usize) -> (PauliSum, PauliSum) {
    let mut low = PauliSum::with_prune(obs.n(), obs.prune_threshold());
    let mut high = PauliSum::with_prune(obs.n(), obs.prune_threshold());
    for (p, c) in obs.iter() {
        if p.weight() <= k {
            low.accumulate_canonical(p.clone(), *c);
        } else {
            high.accumulate_canonical(p.clone(), *c);
        }
    }
    (low, high)
}

/// Accumulated discarded squared mass. A heuristic indicator, not a bound.
pub fn truncation_error_bound(policy: &TruncationPolicy) -> f64 {
    policy.discard_log
}

/// Squared coefficient mass carried by words of weight above `k`.
pub fn mass_above_weight(obs: &PauliSum, k: usize) -> f64 {
    obs.iter().filter(|(p, _)| p.weight() > k).map(|(_, c)| c.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_qcnn, build_shallow_hea, ParamDistribution};
    use crate::statevector::{loss, DenseState};
    use proptest::prelude::*;

    #[test]
    fn identity_and_single_rotation() {
        let z = PauliSum::from_pairs(1, &[(1.0, "Z")]).unwrap();
        let mut pol = TruncationPolicy::unlimited();
        assert_eq!(backpropagate(&z, &Circuit::new(1), &[], &mut pol).unwrap(), z);
        assert_eq!(truncation_error_bound(&pol), 0.0);

        let mut c = Circuit::new(1);
        c.push_word_param("X".parse().unwrap(), 0);
        let t = 0.3;
        let out = backpropagate(&z, &c, &[t], &mut pol).unwrap();
        let want = PauliSum::from_pairs(1, &[((2.0 * t).cos(), "Z"), ((2.0 * t).sin(), "Y")]).unwrap();
        assert!(out.sub(&want).unwrap().norm() < 1e-15);
    }

    #[test]
    fn qcnn_matches_oracle() {
        let q = build_qcnn(8).unwrap();
        let obs = q.observable();
        let zero = DenseState::zero(8).unwrap();
        for seed in 0..5 {
            let p = ParamDistribution::uniform_angle().sample(q.circuit.n_params, seed).unwrap();
            let mut pol = TruncationPolicy::unlimited();
            let prop = backpropagate(&obs, &q.circuit, &p, &mut pol).unwrap();
            assert_eq!(pol.discard_log, 0.0);
            assert!((prop.norm_sq() - 1.0).abs() < 1e-10);
            let got = loss_from_expectations(&prop, &zero).unwrap();
            let want = loss(&Circuit::new(8), &q.circuit, &p, &obs).unwrap();
            assert!((got.value - want).abs() < 1e-9);
            assert_eq!(got.stderr, 0.0);
        }
    }

    #[test]
    fn loss_examples() {
        let zero = DenseState::zero(3).unwrap();
        let z = PauliSum::from_pairs(3, &[(1.0, "ZII")]).unwrap();
        assert_eq!(loss_from_expectations(&z, &zero).unwrap().value, 1.0);
        let x = PauliSum::from_pairs(3, &[(0.3, "XII")]).unwrap();
        assert_eq!(loss_from_expectations(&x, &zero).unwrap().value, 0.0);
    }

    #[test]
    fn split_examples() {
        let s = PauliSum::from_pairs(3, &[(1.0, "ZII"), (0.5, "XXI")]).unwrap();
        let (lo, hi) = split_observable(&s, 3);
        assert_eq!(lo, s);
        assert!(hi.is_empty());
        let w = PauliSum::from_pairs(3, &[(0.7, "XYZ")]).unwrap();
        let (lo, hi) = split_observable(&w, 2);
        assert!(lo.is_empty());
        assert_eq!(hi, w);
    }

    #[test]
    fn coefficient_cut_discards_everything() {
        let s = PauliSum::from_pairs(2, &[(0.3, "ZI"), (0.4, "XX")]).unwrap();
        let mut pol = TruncationPolicy { min_coeff: 1.0, ..TruncationPolicy::unlimited() };
        let out = backpropagate(&s, &Circuit::new(2), &[], &mut pol).unwrap();
        assert!(out.is_empty());
        assert!((truncation_error_bound(&pol) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn max_terms_keeps_largest_then_lexicographic() {
        let mut s = PauliSum::from_pairs(2, &[(0.5, "ZI"), (-0.5, "XI"), (0.1, "YY"), (0.5, "IZ")]).unwrap();
        let mut pol = TruncationPolicy { max_terms: Some(2), ..TruncationPolicy::unlimited() };
        pol.apply(&mut s);
        let kept: Vec<PauliString> = s.sorted_terms().into_iter().map(|(p, _)| p).collect();
        let mut ties: Vec<PauliString> = ["ZI", "XI", "IZ"].iter().map(|w| w.parse().unwrap()).collect();
        ties.sort();
        assert_eq!(kept, ties[..2]);
        assert!((pol.discard_log - (0.25 + 0.01)).abs() < 1e-15);
    }

    #[test]
    fn tighter_weight_cut_discards_more() {
        let n = 8;
        let c = build_shallow_hea(n, 3, None).unwrap();
        let obs = PauliSum::from_pairs(n, &[(1.0, "IIIZZIII")]).unwrap();
        for seed in 0..4 {
            let p = ParamDistribution::uniform_angle().sample(c.n_params, seed).unwrap();
            let mut prev = -1.0;
            for k in (1..=6).rev() {
                let mut pol = TruncationPolicy::max_weight(k);
                let out = backpropagate(&obs, &c, &p, &mut pol).unwrap();
                // conjugation is an isometry, so kept + discarded = initial
                assert!((out.norm_sq() + pol.discard_log - 1.0).abs() < 1e-10);
                assert!(pol.discard_log >= prev - 1e-12);
                prev = pol.discard_log;
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn mass_is_conserved(seed in any::<u64>(), k in 0usize..4) {
            let n = 5;
            let c = build_shallow_hea(n, 2, None).unwrap();
            let p = ParamDistribution::uniform_angle().sample(c.n_params, seed).unwrap();
            let obs = PauliSum::from_pairs(n, &[(0.6, "ZIIII"), (0.8, "IIXYI")]).unwrap();
            let mut pol = TruncationPolicy::unlimited();
            let out = backpropagate(&obs, &c, &p, &mut pol).unwrap();
            prop_assert!((out.norm_sq() - 1.0).abs() < 1e-10);
            let (lo, hi) = split_observable(&out, k);
            prop_assert!((lo.norm_sq() + hi.norm_sq() - out.norm_sq()).abs() < 1e-12);
            prop_assert!(lo.add(&hi).unwrap().sub(&out).unwrap().norm() < 1e-15);
        }
    }
}
