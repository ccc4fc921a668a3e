//! Pauli words in symplectic (x, z) bit encoding and sparse complex-weighted
//! sums of them.
//!
//! A word on `n` qubits is stored as two bit vectors packed into `u64` limbs
//! plus a phase `i^k`. Bit `(x_j, z_j)` encodes the single-qubit factor
//! `I = (0,0)`, `X = (1,0)`, `Z = (0,1)`, `Y = (1,1)`, so a word equals
//! `i^k * prod_j i^{x_j z_j} X^{x_j} Z^{z_j}`.
//!
//! Sums are keyed by phase-canonical words (phase `+1`); any phase of an
//! inserted word is folded into its coefficient.

use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::fmt;
use std::hash::BuildHasherDefault;
use std::str::FromStr;

use num_complex::Complex64;
use smallvec::SmallVec;

use crate::error::{check_dims, Result, SimError};

/// Default magnitude below which sum coefficients are dropped.
pub const DEFAULT_PRUNE: f64 = 1e-14;

pub(crate) type Limbs = SmallVec<[u64; 1]>;

/// Deterministic hasher so that map iteration order is stable across runs.
pub type FixedState = BuildHasherDefault<DefaultHasher>;

fn limbs_for(n: usize) -> usize {
    n.div_ceil(64).max(1)
}

/// A single-qubit Pauli operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

/// A fourth root of unity `i^k`, `k` in `0..4`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn from_exponent(k: i64) -> Self {
        Phase(k.rem_euclid(4) as u8)
    }

    pub fn exponent(self) -> u8 {
        self.0
    }

    pub fn to_complex(self) -> Complex64 {
        match self.0 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }

    pub fn conj(self) -> Self {
        Phase::from_exponent(-(self.0 as i64))
    }
}

impl std::ops::Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase((self.0 + rhs.0) % 4)
    }
}

/// An `n`-qubit Pauli word with a phase in `{+1, +i, -1, -i}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    x: Limbs,
    z: Limbs,
    phase: Phase,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        let l = limbs_for(n);
        PauliString { n, x: SmallVec::from_elem(0, l), z: SmallVec::from_elem(0, l), phase: Phase::ONE }
    }

    /// Word with the given single-qubit factors; unspecified qubits are `I`.
    pub fn from_ops(n: usize, ops: &[(usize, Pauli)]) -> Result<Self> {
        let mut p = PauliString::identity(n);
        for &(q, op) in ops {
            if q >= n {
                return Err(SimError::Argument(format!("qubit {q} out of range for n={n}")));
            }
            p.set(q, op);
        }
        Ok(p)
    }

    pub fn single(n: usize, q: usize, op: Pauli) -> Result<Self> {
        Self::from_ops(n, &[(q, op)])
    }

    /// Builds a word on at most 64 qubits from bit masks (bit `j` is qubit `j`).
    pub fn from_masks(n: usize, x: u64, z: u64) -> Self {
        debug_assert!(n <= 64);
        let mut p = PauliString::identity(n);
        p.x[0] = x;
        p.z[0] = z;
        p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn x_limbs(&self) -> &[u64] {
        &self.x
    }

    pub fn z_limbs(&self) -> &[u64] {
        &self.z
    }

    /// X mask of the first 64 qubits.
    pub fn x_mask(&self) -> u64 {
        self.x[0]
    }

    /// Z mask of the first 64 qubits.
    pub fn z_mask(&self) -> u64 {
        self.z[0]
    }

    pub fn with_phase(mut self, phase: Phase) -> Self {
        self.phase = phase;
        self
    }

    /// Copy with phase reset to `+1`; the form used as a hash key in sums.
    pub fn canonical(&self) -> Self {
        let mut c = self.clone();
        c.phase = Phase::ONE;
        c
    }

    pub fn op(&self, q: usize) -> Pauli {
        let (l, b) = (q / 64, q % 64);
        Pauli::from_bits((self.x[l] >> b) & 1 == 1, (self.z[l] >> b) & 1 == 1)
    }

    pub fn set(&mut self, q: usize, op: Pauli) {
        let (l, b) = (q / 64, q % 64);
        let (xb, zb) = op.bits();
        self.x[l] = (self.x[l] & !(1 << b)) | ((xb as u64) << b);
        self.z[l] = (self.z[l] & !(1 << b)) | ((zb as u64) << b);
    }

    /// Number of qubits on which the word acts non-trivially.
    pub fn weight(&self) -> usize {
        self.x.iter().zip(&self.z).map(|(x, z)| (x | z).count_ones() as usize).sum()
    }

    /// Qubits acted on non-trivially, ascending.
    pub fn support(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (l, (x, z)) in self.x.iter().zip(&self.z).enumerate() {
            let mut m = x | z;
            while m != 0 {
                let b = m.trailing_zeros() as usize;
                out.push(l * 64 + b);
                m &= m - 1;
            }
        }
        out
    }

    pub fn is_identity(&self) -> bool {
        self.x.iter().all(|&w| w == 0) && self.z.iter().all(|&w| w == 0)
    }

    /// True when the word contains no X or Y factor.
    pub fn is_diagonal(&self) -> bool {
        self.x.iter().all(|&w| w == 0)
    }

    /// A word is Hermitian iff its phase is real.
    pub fn is_hermitian(&self) -> bool {
        self.phase.0.is_multiple_of(2)
    }

    /// Parity of the symplectic product; `true` when the words commute.
    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let mut acc = 0u32;
        for l in 0..self.x.len() {
            acc += ((self.x[l] & other.z[l]) ^ (self.z[l] & other.x[l])).count_ones();
        }
        acc.is_multiple_of(2)
    }

    /// Product `self * other`, phases included.
    pub fn multiply(&self, other: &PauliString) -> Result<PauliString> {
        check_dims("pauli multiply", self.n, other.n)?;
        Ok(self.mul_unchecked(other))
    }

    pub(crate) fn mul_unchecked(&self, other: &PauliString) -> PauliString {
        let l = self.x.len();
        let mut x: Limbs = SmallVec::with_capacity(l);
        let mut z: Limbs = SmallVec::with_capacity(l);
        // i-exponent: |x1&z1| + |x2&z2| + 2|z1&x2| - |x3&z3|
        let mut e: i64 = self.phase.0 as i64 + other.phase.0 as i64;
        for k in 0..l {
            let (x1, z1, x2, z2) = (self.x[k], self.z[k], other.x[k], other.z[k]);
            let (x3, z3) = (x1 ^ x2, z1 ^ z2);
            e += (x1 & z1).count_ones() as i64 + (x2 & z2).count_ones() as i64 + 2 * (z1 & x2).count_ones() as i64
                - (x3 & z3).count_ones() as i64;
            x.push(x3);
            z.push(z3);
        }
        PauliString { n: self.n, x, z, phase: Phase::from_exponent(e) }
    }

    /// `[self, other]` as a sum: zero, or `2 * self * other`.
    pub fn commutator(&self, other: &PauliString) -> Result<PauliSum> {
        check_dims("pauli commutator", self.n, other.n)?;
        let mut out = PauliSum::zero(self.n);
        if !self.commutes_with(other) {
            out.add_term(&self.mul_unchecked(other), Complex64::new(2.0, 0.0));
        }
        Ok(out)
    }

    /// Number of `Y` factors; used when converting to matrices.
    pub fn y_count(&self) -> u32 {
        self.x.iter().zip(&self.z).map(|(x, z)| (x & z).count_ones()).sum()
    }

    /// Word restricted and relabelled onto `qubits` (position `i` takes qubit `qubits[i]`).
    pub fn restrict(&self, qubits: &[usize]) -> PauliString {
        let mut p = PauliString::identity(qubits.len());
        for (i, &q) in qubits.iter().enumerate() {
            p.set(i, self.op(q));
        }
        p.phase = self.phase;
        p
    }

    /// Inverse of [`restrict`](Self::restrict): embeds a local word into `n` qubits.
    pub fn embed(&self, n: usize, qubits: &[usize]) -> PauliString {
        let mut p = PauliString::identity(n);
        for (i, &q) in qubits.iter().enumerate() {
            p.set(q, self.op(i));
        }
        p.phase = self.phase;
        p
    }

    fn ops_string(&self) -> String {
        (0..self.n).map(|q| self.op(q).as_char()).collect()
    }
}

impl Ord for PauliString {
    /// Lexicographic over qubits 0..n with `I < X < Y < Z`, then phase.
    fn cmp(&self, other: &Self) -> Ordering {
        self.n
            .cmp(&other.n)
            .then_with(|| {
                for q in 0..self.n {
                    let c = self.op(q).cmp(&other.op(q));
                    if c != Ordering::Equal {
                        return c;
                    }
                }
                Ordering::Equal
            })
            .then(self.phase.cmp(&other.phase))
    }
}

impl PartialOrd for PauliString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.phase.0 {
            0 => "",
            1 => "i",
            2 => "-",
            _ => "-i",
        };
        write!(f, "{prefix}{}", self.ops_string())
    }
}

impl FromStr for PauliString {
    type Err = SimError;

    /// Parses `[+|-][i]` followed by characters from `IXYZ`, qubit 0 leftmost.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (neg, rest) = match s.strip_prefix('-') {
            Some(r) => (true, r),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let (imag, rest) = match rest.strip_prefix('i') {
            Some(r) => (true, r),
            None => (false, rest),
        };
        if rest.is_empty() {
            return Err(SimError::Parse(format!("empty Pauli word in {s:?}")));
        }
        let n = rest.chars().count();
        let mut p = PauliString::identity(n);
        for (q, c) in rest.chars().enumerate() {
            let op =
                Pauli::from_char(c).ok_or_else(|| SimError::Parse(format!("bad Pauli character {c:?} in {s:?}")))?;
            p.set(q, op);
        }
        p.phase = Phase::from_exponent(2 * neg as i64 + imag as i64);
        Ok(p)
    }
}

/// Sparse linear combination of Pauli words with complex coefficients.
#[derive(Clone, Debug)]
pub struct PauliSum {
    n: usize,
    terms: HashMap<PauliString, Complex64, FixedState>,
    prune: f64,
}

impl PartialEq for PauliSum {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.terms == other.terms
    }
}

impl PauliSum {
    pub fn zero(n: usize) -> Self {
        Self::with_prune(n, DEFAULT_PRUNE)
    }

    pub fn with_prune(n: usize, prune: f64) -> Self {
        PauliSum { n, terms: HashMap::default(), prune }
    }

    pub fn from_word(word: &PauliString, coeff: f64) -> Self {
        let mut s = PauliSum::zero(word.n());
        s.add_term(word, Complex64::new(coeff, 0.0));
        s
    }

    /// Builds a sum from `(coefficient, word text)` pairs.
    pub fn from_pairs(n: usize, pairs: &[(f64, &str)]) -> Result<Self> {
        let mut s = PauliSum::zero(n);
        for &(c, w) in pairs {
            let p: PauliString = w.parse()?;
            check_dims("pauli sum term", n, p.n())?;
            s.add_term(&p, Complex64::new(c, 0.0));
        }
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn prune_threshold(&self) -> f64 {
        self.prune
    }

    pub fn set_prune_threshold(&mut self, prune: f64) {
        self.prune = prune;
        self.prune();
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of a (phase-canonical) word; zero if absent.
    pub fn coeff(&self, word: &PauliString) -> Complex64 {
        let key = word.canonical();
        let c = self.terms.get(&key).copied().unwrap_or_default();
        // coefficient on `word` itself = c * conj(phase)
        c * word.phase().conj().to_complex()
    }

    /// Adds `coeff * word`, folding the word's phase into the coefficient.
    pub fn add_term(&mut self, word: &PauliString, coeff: Complex64) {
        self.accumulate(word, coeff);
        let key = word.canonical();
        if let Some(c) = self.terms.get(&key) {
            if c.norm() < self.prune {
                self.terms.remove(&key);
            }
        }
    }

    /// Adds without pruning; callers must call [`prune`](Self::prune).
    pub(crate) fn accumulate(&mut self, word: &PauliString, coeff: Complex64) {
        let c = coeff * word.phase().to_complex();
        if word.phase() == Phase::ONE {
            *self.terms.entry(word.clone()).or_default() += c;
        } else {
            *self.terms.entry(word.canonical()).or_default() += c;
        }
    }

    pub(crate) fn accumulate_canonical(&mut self, word: PauliString, coeff: Complex64) {
        *self.terms.entry(word).or_default() += coeff;
    }

    pub fn prune(&mut self) {
        let thr = self.prune;
        self.terms.retain(|_, c| c.norm() >= thr);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PauliString, &Complex64)> {
        self.terms.iter()
    }

    /// Terms sorted by word order; the canonical deterministic view.
    pub fn sorted_terms(&self) -> Vec<(PauliString, Complex64)> {
        let mut v: Vec<_> = self.terms.iter().map(|(p, c)| (p.clone(), *c)).collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    }

    pub fn scale(&self, s: Complex64) -> PauliSum {
        let mut out = PauliSum::with_prune(self.n, self.prune);
        for (p, c) in &self.terms {
            out.terms.insert(p.clone(), c * s);
        }
        out.prune();
        out
    }

    pub fn add(&self, other: &PauliSum) -> Result<PauliSum> {
        check_dims("pauli sum add", self.n, other.n)?;
        let mut out = self.clone();
        for (p, c) in &other.terms {
            out.accumulate_canonical(p.clone(), *c);
        }
        out.prune();
        Ok(out)
    }

    pub fn sub(&self, other: &PauliSum) -> Result<PauliSum> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn multiply(&self, other: &PauliSum) -> Result<PauliSum> {
        check_dims("pauli sum multiply", self.n, other.n)?;
        let mut out = PauliSum::with_prune(self.n, self.prune);
        for (p, a) in &self.terms {
            for (q, b) in &other.terms {
                out.accumulate(&p.mul_unchecked(q), a * b);
            }
        }
        out.prune();
        Ok(out)
    }

    /// `[self, other] = self*other - other*self`.
    pub fn commutator(&self, other: &PauliSum) -> Result<PauliSum> {
        check_dims("pauli sum commutator", self.n, other.n)?;
        let mut out = PauliSum::with_prune(self.n, self.prune);
        for (p, a) in &self.terms {
            for (q, b) in &other.terms {
                if !p.commutes_with(q) {
                    out.accumulate(&p.mul_unchecked(q), 2.0 * a * b);
                }
            }
        }
        out.prune();
        Ok(out)
    }

    /// Normalized Hilbert-Schmidt inner product `Tr[a^dag b] / 2^n`.
    pub fn hs_inner(&self, other: &PauliSum) -> Result<Complex64> {
        check_dims("hs_inner", self.n, other.n)?;
        let (small, large, flip) = if self.len() <= other.len() { (self, other, false) } else { (other, self, true) };
        let mut acc = Complex64::new(0.0, 0.0);
        for (p, a) in &small.terms {
            if let Some(b) = large.terms.get(p) {
                acc += if flip { b.conj() * a } else { a.conj() * b };
            }
        }
        Ok(acc)
    }

    /// Squared normalized HS norm, `sum |c|^2`.
    pub fn norm_sq(&self) -> f64 {
        self.terms.values().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Every coefficient real within `tol` (all stored words are Hermitian).
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.terms.values().all(|c| c.im.abs() <= tol)
    }

    /// Drops imaginary parts; callers check [`is_hermitian`](Self::is_hermitian) first.
    pub fn real_part(&self) -> PauliSum {
        let mut out = PauliSum::with_prune(self.n, self.prune);
        for (p, c) in &self.terms {
            out.terms.insert(p.clone(), Complex64::new(c.re, 0.0));
        }
        out.prune();
        out
    }

    /// Largest word weight present (0 for the zero sum).
    pub fn max_weight(&self) -> usize {
        self.terms.keys().map(|p| p.weight()).max().unwrap_or(0)
    }

    /// Union of supports over all terms, ascending.
    pub fn support(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.terms.keys().flat_map(|p| p.support()).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    /// True when all words pairwise commute.
    pub fn terms_commute(&self) -> bool {
        let words: Vec<&PauliString> = self.terms.keys().collect();
        words.iter().enumerate().all(|(i, p)| words[i + 1..].iter().all(|q| p.commutes_with(q)))
    }

    /// Serializes as lines `coeff<TAB>word`, sorted by word.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (p, c) in self.sorted_terms() {
            s.push_str(&format_coeff(c));
            s.push('\t');
            s.push_str(&p.to_string());
            s.push('\n');
        }
        s
    }

    /// Parses the [`to_text`](Self::to_text) format. Blank lines and `#`
    /// comments are skipped. `n` is taken from the words; `n_hint` is used
    /// for an empty sum.
    pub fn from_text(text: &str, n_hint: Option<usize>) -> Result<PauliSum> {
        let mut out: Option<PauliSum> = n_hint.map(PauliSum::zero);
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (c, w) = line
                .split_once('\t')
                .or_else(|| line.split_once(char::is_whitespace))
                .ok_or_else(|| SimError::Parse(format!("line {}: expected coeff<TAB>word", lineno + 1)))?;
            let coeff = parse_coeff(c.trim()).map_err(|e| SimError::Parse(format!("line {}: {e}", lineno + 1)))?;
            let word: PauliString = w.trim().parse()?;
            let sum = out.get_or_insert_with(|| PauliSum::zero(word.n()));
            check_dims("pauli sum text", sum.n(), word.n())?;
            sum.accumulate(&word, coeff);
        }
        let mut s = out.ok_or_else(|| SimError::Parse("empty Pauli sum with no qubit count".into()))?;
        s.prune();
        Ok(s)
    }
}

/// Real coefficients print as plain floats, complex ones as `re+imi`/`re-imi`.
pub fn format_coeff(c: Complex64) -> String {
    if c.im == 0.0 {
        format!("{:?}", c.re)
    } else if c.im.is_sign_negative() {
        format!("{:?}-{:?}i", c.re, -c.im)
    } else {
        format!("{:?}+{:?}i", c.re, c.im)
    }
}

pub fn parse_coeff(s: &str) -> std::result::Result<Complex64, String> {
    if let Some(body) = s.strip_suffix('i') {
        // split at the last sign that is not part of an exponent or leading
        let bytes = body.as_bytes();
        let mut split = None;
        for k in (1..bytes.len()).rev() {
            if (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E') {
                split = Some(k);
                break;
            }
        }
        let k = split.ok_or_else(|| format!("bad complex coefficient {s:?}"))?;
        let re: f64 = body[..k].parse().map_err(|_| format!("bad real part in {s:?}"))?;
        let im: f64 = body[k..].parse().map_err(|_| format!("bad imaginary part in {s:?}"))?;
        Ok(Complex64::new(re, im))
    } else {
        s.parse::<f64>().map(|re| Complex64::new(re, 0.0)).map_err(|_| format!("bad coefficient {s:?}"))
    }
}

/// Total Z, `sum_j Z_j`.
pub fn total_z(n: usize) -> PauliSum {
    let mut s = PauliSum::zero(n);
    for q in 0..n {
        s.add_term(&PauliString::single(n, q, Pauli::Z).unwrap(), Complex64::new(1.0, 0.0));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense;
    use proptest::prelude::*;

    fn w(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn single_qubit_products() {
        assert_eq!(w("X").multiply(&w("Y")).unwrap(), w("iZ"));
        assert_eq!(w("Y").multiply(&w("X")).unwrap(), w("-iZ"));
        assert_eq!(w("Z").multiply(&w("X")).unwrap(), w("iY"));
        assert_eq!(w("Y").multiply(&w("Y")).unwrap(), w("I"));
    }

    #[test]
    fn identity_is_neutral() {
        let id = PauliString::identity(2);
        for s in ["XY", "ZZ", "IY", "-iXZ"] {
            assert_eq!(id.multiply(&w(s)).unwrap(), w(s));
        }
    }

    #[test]
    fn two_qubit_product_matches_dense() {
        let r = w("XZ").multiply(&w("ZZ")).unwrap();
        assert_eq!(r, w("-iYI"));
        let lhs = dense::word_matrix(&w("XZ")) * dense::word_matrix(&w("ZZ"));
        assert!(dense::max_abs_diff(&lhs, &dense::word_matrix(&r)) < 1e-14);
    }

    #[test]
    fn size_mismatch_is_error() {
        assert!(matches!(w("X").multiply(&w("XX")), Err(SimError::Dimension(_))));
        assert!(w("X").commutator(&w("XX")).is_err());
        assert!(PauliSum::from_word(&w("X"), 1.0).hs_inner(&PauliSum::from_word(&w("XX"), 1.0)).is_err());
    }

    #[test]
    fn commutator_examples() {
        let c = w("X").commutator(&w("Z")).unwrap();
        assert_eq!(c.len(), 1);
        assert!((c.coeff(&w("Y")) - Complex64::new(0.0, -2.0)).norm() < 1e-15);
        assert!(w("XX").commutator(&w("ZZ")).unwrap().is_empty());
        let c = w("ZI").commutator(&w("XX")).unwrap();
        assert!((c.coeff(&w("YX")) - Complex64::new(0.0, 2.0)).norm() < 1e-15);
        let dense_c = dense::word_matrix(&w("ZI")) * dense::word_matrix(&w("XX"))
            - dense::word_matrix(&w("XX")) * dense::word_matrix(&w("ZI"));
        assert!(dense::max_abs_diff(&dense_c, &dense::sum_matrix(&c)) < 1e-14);
    }

    #[test]
    fn weights() {
        assert_eq!(w("III").weight(), 0);
        assert_eq!(w("XIZ").weight(), 2);
        assert_eq!(w("YYYY").weight(), 4);
        let mut big = PauliString::identity(130);
        big.set(0, Pauli::X);
        big.set(64, Pauli::Y);
        big.set(129, Pauli::Z);
        assert_eq!(big.weight(), 3);
        assert_eq!(big.support(), vec![0, 64, 129]);
    }

    #[test]
    fn hs_inner_examples() {
        let z = PauliSum::from_word(&w("Z"), 1.0);
        let x = PauliSum::from_word(&w("X"), 1.0);
        assert_eq!(z.hs_inner(&z).unwrap(), Complex64::new(1.0, 0.0));
        assert_eq!(x.hs_inner(&z).unwrap(), Complex64::new(0.0, 0.0));
        let a = PauliSum::from_pairs(1, &[(0.5, "X"), (0.2, "Z")]).unwrap();
        assert!((a.hs_inner(&z).unwrap().re - 0.2).abs() < 1e-15);
    }

    #[test]
    fn phase_folds_into_coefficient() {
        let mut s = PauliSum::zero(1);
        s.add_term(&w("-iY"), Complex64::new(2.0, 0.0));
        assert_eq!(s.coeff(&w("Y")), Complex64::new(0.0, -2.0));
        s.add_term(&w("Y"), Complex64::new(0.0, 2.0));
        assert!(s.is_empty());
    }

    #[test]
    fn text_round_trip_examples() {
        let mut s = PauliSum::zero(3);
        s.add_term(&w("XIZ"), Complex64::new(0.1, 0.0));
        s.add_term(&w("YYY"), Complex64::new(-1e-7, 3.25e10));
        s.add_term(&w("III"), Complex64::new(1.0 / 3.0, -2.0));
        let t = s.to_text();
        assert_eq!(PauliSum::from_text(&t, None).unwrap(), s);
        assert!(PauliSum::from_text("1.0\tXQ\n", None).is_err());
        assert!(PauliSum::from_text("abc\tX\n", None).is_err());
        assert_eq!(PauliSum::from_text("", Some(4)).unwrap().n(), 4);
    }

    fn arb_word(n: usize) -> impl Strategy<Value = PauliString> {
        (proptest::collection::vec(0u8..4, n), 0u8..4).prop_map(move |(ops, ph)| {
            let mut p = PauliString::identity(n);
            for (q, o) in ops.into_iter().enumerate() {
                p.set(q, [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][o as usize]);
            }
            p.with_phase(Phase::from_exponent(ph as i64))
        })
    }

    fn arb_sum(n: usize) -> impl Strategy<Value = PauliSum> {
        proptest::collection::vec((arb_word(n), -1.0f64..1.0, -1.0f64..1.0), 0..8).prop_map(move |ts| {
            let mut s = PauliSum::zero(n);
            for (p, re, im) in ts {
                s.add_term(&p, Complex64::new(re, im));
            }
            s
        })
    }

    proptest! {
        #[test]
        fn multiply_associative((a, b, c) in (1usize..=16).prop_flat_map(|n| (arb_word(n), arb_word(n), arb_word(n)))) {
            let left = a.multiply(&b).unwrap().multiply(&c).unwrap();
            let right = a.multiply(&b.multiply(&c).unwrap()).unwrap();
            prop_assert_eq!(left, right);
            let sq = a.canonical().multiply(&a.canonical()).unwrap();
            prop_assert!(sq.is_identity());
            prop_assert_eq!(sq.phase(), Phase::ONE);
            let sq = a.multiply(&a).unwrap();
            prop_assert!(sq.phase() == Phase::ONE || sq.phase() == Phase::MINUS_ONE);
        }

        #[test]
        fn commutator_antisymmetric_and_symplectic((a, b) in (1usize..=16).prop_flat_map(|n| (arb_word(n), arb_word(n)))) {
            let ab = a.commutator(&b).unwrap();
            let ba = b.commutator(&a).unwrap();
            prop_assert_eq!(ab.clone(), ba.scale(Complex64::new(-1.0, 0.0)));
            let mut parity = 0u32;
            for q in 0..a.n() {
                let (xa, za) = a.op(q).bits();
                let (xb, zb) = b.op(q).bits();
                parity += ((xa && zb) ^ (za && xb)) as u32;
            }
            prop_assert_eq!(ab.is_empty(), parity.is_multiple_of(2));
        }

        #[test]
        fn hs_inner_matches_dense_trace((a, b) in (1usize..=6).prop_flat_map(|n| (arb_sum(n), arb_sum(n)))) {
            let ip = a.hs_inner(&b).unwrap();
            let ma = dense::sum_matrix(&a);
            let mb = dense::sum_matrix(&b);
            let tr = (ma.adjoint() * mb).trace() / (1u64 << a.n()) as f64;
            prop_assert!((ip - tr).norm() < 1e-12);
        }

        #[test]
        fn text_round_trip(s in (1usize..=8).prop_flat_map(arb_sum)) {
            let back = PauliSum::from_text(&s.to_text(), Some(s.n())).unwrap();
            prop_assert_eq!(back, s);
        }

        #[test]
        fn word_text_round_trip(p in (1usize..=70).prop_flat_map(arb_word)) {
            let back: PauliString = p.to_string().parse().unwrap();
            prop_assert_eq!(back, p);
        }
    }
}
