//! Pauli classical shadows sampled from the oracle, median-of-means
//! estimation, and the QCNN sample-count formula.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::circuit::{Circuit, FixedGate};
use crate::error::{check_dims, Result, SimError};
use crate::expectation::{Estimate, ExpectationSource};
use crate::pauli::{Pauli, PauliString, PauliSum};
use crate::seed::{mix_seed, rng_from};
use crate::statevector::{prepare, DenseState};

pub const DEFAULT_BATCHES: usize = 10;
pub const DEFAULT_LOCALITY_BUDGET: usize = 6;
/// Shots carry `u64` masks.
pub const MAX_SHADOW_QUBITS: usize = 64;

/// One measurement: basis in symplectic form (X = x, Y = x and z, Z = z)
/// and the outcome bits, qubit `j` at bit `j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Shot {
    pub x: u64,
    pub z: u64,
    pub bits: u64,
}

impl Shot {
    pub fn basis(&self, q: usize) -> Pauli {
        match ((self.x >> q) & 1, (self.z >> q) & 1) {
            (1, 0) => Pauli::X,
            (1, 1) => Pauli::Y,
            _ => Pauli::Z,
        }
    }

    pub fn bit(&self, q: usize) -> bool {
        (self.bits >> q) & 1 == 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShadowDataset {
    pub n: usize,
    pub seed: u64,
    pub prep_id: String,
    pub shots: Vec<Shot>,
}

/// Stable identifier of a preparation circuit: 16 hex chars of SHA-256 of
/// its JSON form.
pub fn prep_id(circuit: &Circuit) -> String {
    let digest = Sha256::digest(circuit.to_json().as_bytes());
    digest.iter().take(8).fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn draw_basis(n: usize, rng: &mut impl Rng) -> (u64, u64) {
    let (mut x, mut z) = (0u64, 0u64);
    for q in 0..n {
        match rng.random_range(0..3u8) {
            0 => x |= 1 << q,
            1 => {
                x |= 1 << q;
                z |= 1 << q;
            }
            _ => z |= 1 << q,
        }
    }
    (x, z)
}

/// Born distribution after rotating each qubit into its measured basis.
fn basis_probabilities(state: &DenseState, x: u64, z: u64) -> Vec<f64> {
    let mut s = state.clone();
    for q in 0..state.n() {
        if (x >> q) & 1 == 1 {
            // H S^dag maps Y to Z; H alone maps X to Z
            if (z >> q) & 1 == 1 {
                s.apply_fixed(FixedGate::Sdg, &[q]);
            }
            s.apply_fixed(FixedGate::H, &[q]);
        }
    }
    let mut cdf = s.probabilities();
    let mut acc = 0.0;
    for p in cdf.iter_mut() {
        acc += *p;
        *p = acc;
    }
    cdf
}

/// Shots from `|psi> = state_prep |0..0>`.
pub fn acquire(state_prep: &Circuit, n_shots: usize, seed: u64) -> Result<ShadowDataset> {
    let state = prepare(state_prep, &Circuit::new(state_prep.n), &[])?;
    acquire_from_state(&state, &prep_id(state_prep), n_shots, seed)
}

/// Shots from an explicit state. Per-shot RNGs are counter-derived, so the
/// result is independent of thread count.
pub fn acquire_from_state(state: &DenseState, prep_id: &str, n_shots: usize, seed: u64) -> Result<ShadowDataset> {
    let n = state.n();
    if n > MAX_SHADOW_QUBITS {
        return Err(SimError::Resource(format!("{n} qubits exceeds shadow limit {MAX_SHADOW_QUBITS}")));
    }
    // basis and outcome uniform both come from the shot's own stream
    let draws: Vec<(u64, u64, f64)> = (0..n_shots)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from(mix_seed(seed, i as u64));
            let (x, z) = draw_basis(n, &mut rng);
            (x, z, rng.random::<f64>())
        })
        .collect();
    let mut groups: HashMap<(u64, u64), Vec<usize>> = HashMap::new();
    for (i, &(x, z, _)) in draws.iter().enumerate() {
        groups.entry((x, z)).or_default().push(i);
    }
    let groups: Vec<((u64, u64), Vec<usize>)> = groups.into_iter().collect();
    let outcomes: Vec<(usize, u64)> = groups
        .par_iter()
        .flat_map_iter(|((x, z), idx)| {
            let cdf = basis_probabilities(state, *x, *z);
            let total = *cdf.last().unwrap();
            idx.iter()
                .map(|&i| {
                    let u = draws[i].2 * total;
                    let b = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
                    (i, b as u64)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let mut shots: Vec<Shot> = draws.iter().map(|&(x, z, _)| Shot { x, z, bits: 0 }).collect();
    for (i, b) in outcomes {
        shots[i].bits = b;
    }
    Ok(ShadowDataset { n, seed, prep_id: prep_id.to_string(), shots })
}

impl ShadowDataset {
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.shots.len() * (2 * self.n + 2) + 64);
        let _ =
            writeln!(s, "shadow/v1 n={} shots={} seed={} prep={}", self.n, self.shots.len(), self.seed, self.prep_id);
        for shot in &self.shots {
            for q in 0..self.n {
                s.push(shot.basis(q).as_char());
            }
            s.push(' ');
            for q in 0..self.n {
                s.push(if shot.bit(q) { '1' } else { '0' });
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: String| SimError::Parse(m);
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty shadow file".into()))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("shadow/v1") {
            return Err(bad(format!("unknown shadow header {header:?}")));
        }
        let mut kv = HashMap::new();
        for f in fields {
            let (k, v) = f.split_once('=').ok_or_else(|| bad(format!("malformed header field {f:?}")))?;
            kv.insert(k, v);
        }
        let get = |k: &str| kv.get(k).copied().ok_or_else(|| bad(format!("header lacks {k}")));
        let num = |k: &str| -> Result<u64> { get(k)?.parse().map_err(|e| bad(format!("header {k}: {e}"))) };
        let n = num("n")? as usize;
        let count = num("shots")? as usize;
        let seed = num("seed")?;
        let prep_id = get("prep")?.to_string();
        if n > MAX_SHADOW_QUBITS {
            return Err(bad(format!("n = {n} exceeds {MAX_SHADOW_QUBITS}")));
        }
        let mut shots = Vec::with_capacity(count);
        for (ln, line) in lines.enumerate() {
            let (basis, bits) =
                line.split_once(' ').ok_or_else(|| bad(format!("shot {ln}: expected '<basis> <bits>'")))?;
            if basis.len() != n || bits.len() != n {
                return Err(bad(format!("shot {ln}: expected {n} labels and {n} bits")));
            }
            let mut shot = Shot { x: 0, z: 0, bits: 0 };
            for (q, (b, o)) in basis.chars().zip(bits.chars()).enumerate() {
                match b {
                    'X' => shot.x |= 1 << q,
                    'Y' => {
                        shot.x |= 1 << q;
                        shot.z |= 1 << q;
                    }
                    'Z' => shot.z |= 1 << q,
                    _ => return Err(bad(format!("shot {ln}: bad basis label {b:?}"))),
                }
                match o {
                    '0' => {}
                    '1' => shot.bits |= 1 << q,
                    _ => return Err(bad(format!("shot {ln}: bad outcome bit {o:?}"))),
                }
            }
            shots.push(shot);
        }
        if shots.len() != count {
            return Err(bad(format!("header declares {count} shots, found {}", shots.len())));
        }
        Ok(ShadowDataset { n, seed, prep_id, shots })
    }

    /// Single-shot unbiased estimates of `<word>`; the word's real phase is included.
    pub fn shot_estimates(&self, word: &PauliString) -> Result<Vec<f64>> {
        check_dims("word vs shadow qubits", word.n(), self.n)?;
        let sign = match word.phase().exponent() {
            0 => 1.0,
            2 => -1.0,
            _ => return Err(SimError::Argument(format!("word {word} is not Hermitian"))),
        };
        let (wx, wz) = (word.x_mask(), word.z_mask());
        let supp = wx | wz;
        let scale = sign * 3f64.powi(supp.count_ones() as i32);
        Ok(self
            .shots
            .iter()
            .map(|s| {
                if ((s.x ^ wx) | (s.z ^ wz)) & supp != 0 {
                    0.0
                } else if (s.bits & supp).count_ones() % 2 == 0 {
                    scale
                } else {
                    -scale
                }
            })
            .collect())
    }
}

/// Median of batch means; stderr is the batch-mean spread scaled by
/// `sqrt(pi/2)`, the median's asymptotic inflation over the mean.
pub fn median_of_means(samples: &[f64], batches: usize) -> Result<Estimate> {
    let b = batches.max(1);
    if samples.len() < b {
        return Err(SimError::Argument(format!("{} samples cannot fill {b} batches", samples.len())));
    }
    let len = samples.len();
    let mut means: Vec<f64> = (0..b)
        .map(|i| {
            let (lo, hi) = (i * len / b, (i + 1) * len / b);
            samples[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let grand = means.iter().sum::<f64>() / b as f64;
    let sd = if b > 1 { (means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (b - 1) as f64).sqrt() } else { 0.0 };
    means.sort_by(f64::total_cmp);
    let median = if b % 2 == 1 { means[b / 2] } else { 0.5 * (means[b / 2 - 1] + means[b / 2]) };
    Ok(Estimate { value: median, stderr: sd / (b as f64).sqrt() * std::f64::consts::FRAC_PI_2.sqrt() })
}

pub fn estimate_pauli(ds: &ShadowDataset, word: &PauliString, batches: usize) -> Result<Estimate> {
    ShadowEstimator::new(ds).with_batches(batches).word_expectation(word)
}

/// A dataset viewed as an expectation source with a locality budget.
#[derive(Clone, Debug)]
pub struct ShadowEstimator<'a> {
    ds: &'a ShadowDataset,
    batches: usize,
    budget: usize,
}

impl<'a> ShadowEstimator<'a> {
    pub fn new(ds: &'a ShadowDataset) -> Self {
        ShadowEstimator { ds, batches: DEFAULT_BATCHES, budget: DEFAULT_LOCALITY_BUDGET }
    }

    pub fn with_batches(mut self, batches: usize) -> Self {
        self.batches = batches;
        self
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }
}

impl ExpectationSource for ShadowEstimator<'_> {
    fn n(&self) -> usize {
        self.ds.n
    }

    fn locality_budget(&self) -> Option<usize> {
        Some(self.budget)
    }

    fn word_expectation(&self, word: &PauliString) -> Result<Estimate> {
        self.check_answerable(std::iter::once(word))?;
        median_of_means(&self.ds.shot_estimates(word)?, self.batches)
    }

    /// Median of means of the per-shot linear combination, so correlations
    /// between words enter the error bar.
    fn sum_expectation(&self, s: &PauliSum) -> Result<Estimate> {
        check_dims("observable vs shadow qubits", s.n(), self.ds.n)?;
        self.check_answerable(s.iter().map(|(p, _)| p))?;
        let mut combined = vec![0.0; self.ds.shots.len()];
        for (p, c) in s.sorted_terms() {
            let est = self.ds.shot_estimates(&p)?;
            for (acc, e) in combined.iter_mut().zip(est) {
                *acc += c.re * e;
            }
        }
        median_of_means(&combined, self.batches)
    }
}

/// Exact expectations on `state_prep |0..0>`, standing in for a tailored
/// tomography routine.
pub fn direct_expectations(state_prep: &Circuit, observables: &[PauliSum]) -> Result<Vec<f64>> {
    if observables.is_empty() {
        return Ok(Vec::new());
    }
    let state = prepare(state_prep, &Circuit::new(state_prep.n), &[])?;
    observables.iter().map(|o| Ok(state.expectation_sum(o)?.re)).collect()
}

/// `ceil(300 |O|^2 / eps^2 * 2^k * (n^d + n - k + ln(2 / delta)))`.
pub fn qcnn_shadow_count(eps: f64, delta: f64, k: usize, d: u32, n: usize, op_norm: f64) -> Result<u64> {
    if !(eps > 0.0 && eps < 1.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(SimError::Argument(format!("eps and delta must lie in (0, 1), got {eps}, {delta}")));
    }
    if k > n {
        return Err(SimError::Argument(format!("k = {k} exceeds n = {n}")));
    }
    if !(op_norm.is_finite() && op_norm >= 0.0) {
        return Err(SimError::Argument(format!("operator norm must be finite and non-negative, got {op_norm}")));
    }
    let bracket = (n as f64).powi(d as i32) + n as f64 - k as f64 + (2.0 / delta).ln();
    let count = 300.0 * op_norm * op_norm / (eps * eps) * 2f64.powi(k as i32) * bracket;
    if !count.is_finite() || count > u64::MAX as f64 {
        return Err(SimError::Resource("sample count overflows u64".into()));
    }
    Ok(count.ceil() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Gate;

    fn bell() -> Circuit {
        let mut c = Circuit::new(3);
        c.push(Gate::fixed(FixedGate::H, vec![0], 0));
        c.push(Gate::fixed(FixedGate::Cnot, vec![0, 1], 1));
        c
    }

    fn w(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    fn within(e: Estimate, want: f64) -> bool {
        (e.value - want).abs() <= 5.0 * e.stderr.max(1e-12)
    }

    #[test]
    fn zero_state_z_basis_reads_zero() {
        let ds = acquire(&Circuit::new(4), 2000, 1).unwrap();
        let all_z = ds.shots.iter().filter(|s| s.x == 0);
        let mut count = 0;
        for s in all_z {
            assert_eq!(s.bits, 0);
            count += 1;
        }
        assert!(count > 0);
        assert!(ds.shots.iter().all(|s| s.bits & !s.x == 0), "Z-measured qubits of |0> read 0");
    }

    #[test]
    fn basis_marginals_are_uniform() {
        let ds = acquire(&Circuit::new(2), 10_000, 7).unwrap();
        let m = ds.shots.len() as f64;
        for q in 0..2 {
            for p in [Pauli::X, Pauli::Y, Pauli::Z] {
                let k = ds.shots.iter().filter(|s| s.basis(q) == p).count() as f64;
                let sigma = (m * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
                assert!((k - m / 3.0).abs() < 5.0 * sigma);
            }
        }
    }

    #[test]
    fn deterministic_and_round_trips() {
        let a = acquire(&bell(), 500, 42).unwrap();
        let b = acquire(&bell(), 500, 42).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        assert_eq!(ShadowDataset::from_text(&a.to_text()).unwrap(), a);
        assert_ne!(acquire(&bell(), 500, 43).unwrap().to_text(), a.to_text());
        assert_eq!(a.prep_id, prep_id(&bell()));
        assert_ne!(a.prep_id, prep_id(&Circuit::new(3)));
        assert!(a.to_text().starts_with(&format!("shadow/v1 n=3 shots=500 seed=42 prep={}\n", a.prep_id)));
    }

    #[test]
    fn malformed_files_are_rejected() {
        for text in [
            "",
            "shadow/v2 n=1 shots=0 seed=0 prep=a",
            "shadow/v1 n=2 shots=1 seed=0 prep=a\nXQ 00",
            "shadow/v1 n=2 shots=1 seed=0 prep=a\nXZ 0",
            "shadow/v1 n=2 shots=2 seed=0 prep=a\nXZ 01",
            "shadow/v1 n=2 shots=1 prep=a\nXZ 01",
        ] {
            assert!(matches!(ShadowDataset::from_text(text), Err(SimError::Parse(_))), "{text:?}");
        }
    }

    #[test]
    fn estimates_on_known_states() {
        let ds = acquire(&Circuit::new(3), 10_000, 3).unwrap();
        let z = estimate_pauli(&ds, &w("ZII"), 10).unwrap();
        assert!(within(z, 1.0) && z.stderr > 0.0);
        assert!(within(estimate_pauli(&ds, &w("XII"), 10).unwrap(), 0.0));
        let bell = acquire(&bell(), 10_000, 5).unwrap();
        assert!(within(estimate_pauli(&bell, &w("ZZI"), 10).unwrap(), 1.0));
        assert!(within(estimate_pauli(&bell, &w("XXI"), 10).unwrap(), 1.0));
        assert!(within(estimate_pauli(&bell, &w("YYI"), 10).unwrap(), -1.0));
    }

    #[test]
    fn budget_is_enforced() {
        let ds = acquire(&Circuit::new(3), 100, 3).unwrap();
        let est = ShadowEstimator::new(&ds).with_budget(2);
        assert!(matches!(est.word_expectation(&w("ZZZ")), Err(SimError::UnanswerableWord { budget: 2, .. })));
    }

    #[test]
    fn unbiased_over_fresh_datasets() {
        let prep = bell();
        let rho = prepare(&prep, &Circuit::new(3), &[]).unwrap();
        let obs = PauliSum::from_pairs(3, &[(0.5, "XXI"), (0.5, "ZIZ"), (-0.2, "IYI")]).unwrap();
        let want = rho.expectation_sum(&obs).unwrap().re;
        let mut ok = 0;
        let trials = 40;
        for t in 0..trials {
            let ds = acquire(&prep, 3000, 100 + t).unwrap();
            if within(ShadowEstimator::new(&ds).sum_expectation(&obs).unwrap(), want) {
                ok += 1;
            }
        }
        assert!(ok as f64 >= 0.95 * trials as f64, "{ok}/{trials}");
    }

    #[test]
    fn single_shot_variance_grows_like_three_to_the_weight() {
        let ds = acquire(&Circuit::new(3), 20_000, 11).unwrap();
        let var = |word: &str| {
            let e = ds.shot_estimates(&w(word)).unwrap();
            let m = e.iter().sum::<f64>() / e.len() as f64;
            e.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (e.len() - 1) as f64
        };
        let ratio = var("ZZI") / var("ZII");
        assert!(ratio > 1.5 && ratio < 6.0, "{ratio}");
    }

    #[test]
    fn direct_examples() {
        let z = PauliSum::from_pairs(2, &[(1.0, "ZI")]).unwrap();
        assert_eq!(direct_expectations(&Circuit::new(2), &[z]).unwrap(), vec![1.0]);
        assert!(direct_expectations(&Circuit::new(2), &[]).unwrap().is_empty());
    }

    #[test]
    fn sample_count_formula() {
        assert_eq!(qcnn_shadow_count(0.1, 0.01, 2, 1, 8, 1.0).unwrap(), 2_315_799);
        let a = qcnn_shadow_count(0.1, 0.01, 2, 1, 8, 1.0).unwrap();
        let b = qcnn_shadow_count(0.2, 0.01, 2, 1, 8, 1.0).unwrap();
        assert!(b <= a);
        let k0 = qcnn_shadow_count(0.5, 0.5, 0, 1, 4, 1.0).unwrap();
        assert_eq!(k0, (1200.0 * (4.0 + 4.0 + 4f64.ln())).ceil() as u64);
        assert!(qcnn_shadow_count(1.5, 0.1, 1, 1, 4, 1.0).is_err());
        assert!(qcnn_shadow_count(0.1, 0.1, 5, 1, 4, 1.0).is_err());
    }
}
