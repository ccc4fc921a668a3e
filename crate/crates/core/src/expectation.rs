//! Sources of Pauli expectation values on the input state: the exact oracle
//! (CSIM route) or a classical-shadow dataset (quantum data-acquisition route).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Result, SimError};
use crate::pauli::{PauliString, PauliSum};
use crate::statevector::DenseState;

/// A value with a standard error; exact sources report `stderr = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, stderr: 0.0 }
    }
}

pub trait ExpectationSource: Sync {
    fn n(&self) -> usize;

    /// Largest word weight the source can answer; `None` for unlimited.
    fn locality_budget(&self) -> Option<usize> {
        None
    }

    /// `<P>` for a phase-canonical Hermitian word.
    fn word_expectation(&self, word: &PauliString) -> Result<Estimate>;

    /// Rejects words over the budget, listing all offenders at once.
    fn check_answerable<'a, I>(&self, words: I) -> Result<()>
    where
        I: IntoIterator<Item = &'a PauliString>,
        Self: Sized,
    {
        if let Some(budget) = self.locality_budget() {
            let mut bad: Vec<String> =
                words.into_iter().filter(|w| w.weight() > budget).map(|w| w.to_string()).collect();
            if !bad.is_empty() {
                bad.sort();
                return Err(SimError::UnanswerableWord { budget, words: bad });
            }
        }
        Ok(())
    }

    /// `sum_P a_P <P>` for a Hermitian sum. The default combines per-word
    /// errors as if independent; sources with correlated estimates override.
    fn sum_expectation(&self, s: &PauliSum) -> Result<Estimate>
    where
        Self: Sized,
    {
        check_dims("observable vs source qubits", s.n(), self.n())?;
        self.check_answerable(s.iter().map(|(p, _)| p))?;
        let mut value = 0.0;
        let mut var = 0.0;
        for (p, c) in s.sorted_terms() {
            let e = self.word_expectation(&p)?;
            value += c.re * e.value;
            var += (c.re * e.stderr).powi(2);
        }
        Ok(Estimate { value, stderr: var.sqrt() })
    }
}

impl ExpectationSource for DenseState {
    fn n(&self) -> usize {
        DenseState::n(self)
    }

    fn word_expectation(&self, word: &PauliString) -> Result<Estimate> {
        check_dims("word vs state qubits", word.n(), DenseState::n(self))?;
        Ok(Estimate::exact(self.expectation(word)))
    }

    fn sum_expectation(&self, s: &PauliSum) -> Result<Estimate> {
        let v: Complex64 = self.expectation_sum(s)?;
        Ok(Estimate::exact(v.re))
    }
}

/// Computational basis state `|b>`; exact at any qubit count.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisState {
    n: usize,
    limbs: Vec<u64>,
}

impl BasisState {
    /// `bits[q]` is the value of qubit `q`.
    pub fn new(bits: &[bool]) -> Self {
        let mut limbs = vec![0u64; bits.len().div_ceil(64).max(1)];
        for (q, &b) in bits.iter().enumerate() {
            limbs[q / 64] |= (b as u64) << (q % 64);
        }
        BasisState { n: bits.len(), limbs }
    }

    pub fn zero(n: usize) -> Self {
        Self::new(&vec![false; n])
    }
}

impl ExpectationSource for BasisState {
    fn n(&self) -> usize {
        self.n
    }

    // off-diagonal words vanish; Z strings give (-1)^{|z & b|}
    fn word_expectation(&self, word: &PauliString) -> Result<Estimate> {
        check_dims("word vs state qubits", word.n(), self.n)?;
        if !word.is_diagonal() {
            return Ok(Estimate::exact(0.0));
        }
        let ones: u32 = word.z_limbs().iter().zip(&self.limbs).map(|(z, b)| (z & b).count_ones()).sum();
        let sign = if ones.is_multiple_of(2) { 1.0 } else { -1.0 };
        Ok(Estimate::exact(sign * word.phase().to_complex().re))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Circuit;
    use crate::statevector::prepare;
    use rand::Rng;

    struct Budgeted(usize);

    impl ExpectationSource for Budgeted {
        fn n(&self) -> usize {
            4
        }
        fn locality_budget(&self) -> Option<usize> {
            Some(self.0)
        }
        fn word_expectation(&self, _: &PauliString) -> Result<Estimate> {
            Ok(Estimate { value: 0.5, stderr: 0.1 })
        }
    }

    #[test]
    fn oracle_source_is_exact() {
        let s = DenseState::zero(3).unwrap();
        let o = PauliSum::from_pairs(3, &[(1.0, "ZII"), (0.3, "XII")]).unwrap();
        assert_eq!(s.sum_expectation(&o).unwrap(), Estimate::exact(1.0));
    }

    #[test]
    fn budget_lists_offenders() {
        let o = PauliSum::from_pairs(4, &[(1.0, "ZZZI"), (1.0, "XXXX"), (1.0, "ZIII")]).unwrap();
        match Budgeted(2).sum_expectation(&o) {
            Err(SimError::UnanswerableWord { budget: 2, words }) => assert_eq!(words, vec!["XXXX", "ZZZI"]),
            other => panic!("{other:?}"),
        }
        let e = Budgeted(4).sum_expectation(&o).unwrap();
        assert!((e.value - 1.5).abs() < 1e-15);
        assert!((e.stderr - 0.1 * 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn basis_source_matches_dense() {
        let mut rng = crate::seed::rng_from(11);
        for _ in 0..40 {
            let bits: Vec<bool> = (0..4).map(|_| rng.random()).collect();
            let dense = prepare(&Circuit::basis_state(&bits), &Circuit::new(4), &[]).unwrap();
            let basis = BasisState::new(&bits);
            let w = PauliString::from_masks(4, rng.random_range(0..16), rng.random_range(0..16));
            let s = PauliSum::from_word(&w, 0.7);
            let (a, b) = (basis.sum_expectation(&s).unwrap(), dense.sum_expectation(&s).unwrap());
            assert!((a.value - b.value).abs() < 1e-12, "{w} {bits:?}");
        }
        let far = PauliString::single(130, 129, crate::pauli::Pauli::Z).unwrap();
        let mut bits = vec![false; 130];
        bits[129] = true;
        assert_eq!(BasisState::new(&bits).word_expectation(&far).unwrap().value, -1.0);
    }
}
