//! Dynamical Lie algebra of a generator set: closure, orthonormal basis,
//! structure constants and adjoint matrices.
//!
//! Elements are Hermitian Pauli sums with real coefficients. The algebra
//! proper is `i * span(basis)`; all inner products are normalized
//! Hilbert-Schmidt, so a single Pauli word has unit norm.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, GateKind, SCHEMA_VERSION};
use crate::error::{check_dims, Result, SimError};
use crate::pauli::{PauliString, PauliSum};

pub const DEFAULT_DIM_CAP: usize = 4096;
/// Relative residual above which a commutator adds a new basis direction.
pub const RANK_TOL: f64 = 1e-10;
/// Residual tolerated when testing membership in the span.
pub const SPAN_TOL: f64 = 1e-8;

/// Orthonormal basis of `i g` plus a word index for fast projection.
#[derive(Clone, Debug)]
pub struct LieBasis {
    n: usize,
    basis: Vec<PauliSum>,
    index: HashMap<PauliString, Vec<(usize, f64)>>,
}

impl PartialEq for LieBasis {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.basis == other.basis
    }
}

/// Result of projecting an operator onto `span(basis)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub coeffs: Vec<f64>,
    pub residual: f64,
}

impl LieBasis {
    fn empty(n: usize) -> Self {
        LieBasis { n, basis: Vec::new(), index: HashMap::new() }
    }

    /// Wraps elements that are already orthonormal and Hermitian.
    pub fn from_orthonormal(n: usize, elements: Vec<PauliSum>) -> Result<Self> {
        let mut b = Self::empty(n);
        for e in elements {
            check_dims("basis element qubits", e.n(), n)?;
            if !e.is_hermitian(1e-12) {
                return Err(SimError::Argument("basis element is not Hermitian".into()));
            }
            b.push(e.real_part());
        }
        for i in 0..b.dim() {
            let p = b.project_raw(&b.basis[i]);
            for (j, &v) in p.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                if (v.re - want).abs() > 1e-10 {
                    return Err(SimError::Consistency(format!("basis not orthonormal at ({i},{j})")));
                }
            }
        }
        Ok(b)
    }

    fn push(&mut self, e: PauliSum) {
        let k = self.basis.len();
        for (p, c) in e.iter() {
            self.index.entry(p.clone()).or_default().push((k, c.re));
        }
        self.basis.push(e);
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn elements(&self) -> &[PauliSum] {
        &self.basis
    }

    pub fn element(&self, a: usize) -> &PauliSum {
        &self.basis[a]
    }

    /// `<B_a, A>` for every `a`.
    fn project_raw(&self, a: &PauliSum) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim()];
        for (p, c) in a.iter() {
            if let Some(hits) = self.index.get(p) {
                for &(k, b) in hits {
                    out[k] += b * c;
                }
            }
        }
        out
    }

    /// Subtracts `sum_a v_a B_a` from `a` in place (no pruning).
    fn subtract(&self, a: &mut PauliSum, v: &[Complex64]) {
        for (k, &vk) in v.iter().enumerate() {
            if vk.norm() == 0.0 {
                continue;
            }
            for (p, c) in self.basis[k].iter() {
                a.accumulate_canonical(p.clone(), -vk * c.re);
            }
        }
    }

    /// Real coefficients `v_a = <B_a, A>` and `||A - sum v_a B_a||`.
    pub fn project(&self, a: &PauliSum) -> Result<Projection> {
        check_dims("projection qubits", a.n(), self.n)?;
        let raw = self.project_raw(a);
        let coeffs: Vec<f64> = raw.iter().map(|c| c.re).collect();
        let mut r = a.clone();
        let real: Vec<Complex64> = coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect();
        self.subtract(&mut r, &real);
        Ok(Projection { coeffs, residual: r.norm() })
    }

    /// `sum_a v_a B_a`.
    pub fn reconstruct(&self, v: &[f64]) -> Result<PauliSum> {
        check_dims("coefficient vector", v.len(), self.dim())?;
        let mut out = PauliSum::zero(self.n);
        for (k, &vk) in v.iter().enumerate() {
            for (p, c) in self.basis[k].iter() {
                out.accumulate_canonical(p.clone(), c * vk);
            }
        }
        out.prune();
        Ok(out)
    }

    /// Whether `a` lies in the span within [`SPAN_TOL`] (relative to `||a||`).
    pub fn contains(&self, a: &PauliSum) -> Result<bool> {
        let p = self.project(a)?;
        Ok(p.residual <= SPAN_TOL * a.norm().max(1.0))
    }

    /// Projects out the span twice and normalizes; `None` if what is left is
    /// below `RANK_TOL * max(||cand||, floor)`.
    fn orthonormal_residual(&self, cand: &PauliSum, floor: f64) -> Option<PauliSum> {
        let scale = cand.norm().max(floor);
        if scale == 0.0 {
            return None;
        }
        let mut r = cand.clone();
        for _ in 0..2 {
            let v = self.project_raw(&r);
            self.subtract(&mut r, &v);
            r.prune();
        }
        let rn = r.norm();
        if rn <= RANK_TOL * scale {
            return None;
        }
        Some(r.scale(Complex64::new(1.0 / rn, 0.0)).real_part())
    }

    pub fn to_json(&self, f: Option<&StructureConstants>) -> String {
        let doc = LieBasisDoc {
            schema_version: SCHEMA_VERSION,
            n: self.n,
            dim: self.dim(),
            basis: self.basis.iter().map(PauliSum::to_text).collect(),
            f: f.map(|f| f.entries().map(|(a, b, c, value)| FEntry { a, b, c, value }).collect()),
        };
        serde_json::to_string_pretty(&doc).expect("basis serializes")
    }

    /// Parses [`to_json`](Self::to_json) output; structure constants are
    /// returned when present.
    pub fn from_json(text: &str) -> Result<(LieBasis, Option<StructureConstants>)> {
        let doc: LieBasisDoc = serde_json::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(SimError::Parse(format!("unsupported schema_version {}", doc.schema_version)));
        }
        let mut b = LieBasis::empty(doc.n);
        for t in &doc.basis {
            let e = PauliSum::from_text(t, Some(doc.n))?;
            check_dims("basis element qubits", e.n(), doc.n)?;
            b.push(e);
        }
        check_dims("declared dim", doc.dim, b.dim())?;
        let f = doc.f.map(|es| {
            let mut sc = StructureConstants { dim: b.dim(), upper: BTreeMap::new() };
            for e in es {
                if e.a < e.b {
                    sc.upper.insert((e.a, e.b, e.c), e.value);
                }
            }
            sc
        });
        Ok((b, f))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LieBasisDoc {
    schema_version: u32,
    n: usize,
    dim: usize,
    basis: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    f: Option<Vec<FEntry>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FEntry {
    a: usize,
    b: usize,
    c: usize,
    value: f64,
}

fn check_generators(generators: &[PauliSum]) -> Result<usize> {
    let n = generators.first().map(PauliSum::n).ok_or_else(|| SimError::Argument("empty generator set".into()))?;
    for (i, g) in generators.iter().enumerate() {
        check_dims("generator qubits", g.n(), n)?;
        if !g.is_hermitian(1e-12) {
            return Err(SimError::Argument(format!("generator {i} is not Hermitian")));
        }
    }
    Ok(n)
}

/// Lie closure of `i * generators`, returned as an orthonormal Hermitian basis.
///
/// Every new element is commuted with every generator; right-nested brackets
/// of generators span the whole algebra, so this reaches the fixed point.
pub fn lie_closure(generators: &[PauliSum], dim_cap: usize) -> Result<LieBasis> {
    let n = check_generators(generators)?;
    let gens: Vec<PauliSum> = generators.iter().map(PauliSum::real_part).collect();
    // ||i[G, B]|| <= 2 ||G|| for unit B; rounding noise scales with this,
    // not with the (possibly cancelled) candidate norm
    let floor = 2.0 * gens.iter().map(PauliSum::norm).fold(0.0, f64::max);
    let mut basis = LieBasis::empty(n);
    let grow = |basis: &mut LieBasis, cand: &PauliSum| -> Result<bool> {
        match basis.orthonormal_residual(cand, floor) {
            Some(e) => {
                if basis.dim() >= dim_cap {
                    return Err(SimError::DimCapExceeded { cap: dim_cap, reached: basis.dim() + 1 });
                }
                basis.push(e);
                Ok(true)
            }
            None => Ok(false),
        }
    };
    for g in &gens {
        grow(&mut basis, g)?;
    }
    let mut next = 0;
    while next < basis.dim() {
        let b = basis.basis[next].clone();
        next += 1;
        for g in &gens {
            // i[G, B] is Hermitian with real coefficients
            let c = g.commutator(&b)?.scale(Complex64::new(0.0, 1.0));
            grow(&mut basis, &c)?;
        }
    }
    Ok(basis)
}

/// Generators of the algebra a circuit explores: each rotation gate's
/// generator and each word of a fixed gate's rotation decomposition.
pub fn circuit_generators(circuit: &Circuit) -> Vec<PauliSum> {
    let mut out: Vec<PauliSum> = Vec::new();
    for g in &circuit.gates {
        let mut cands = Vec::new();
        match &g.kind {
            GateKind::PauliRotation { generator } => cands.push(generator.clone()),
            GateKind::Fixed { gate, qubits } => {
                for (p, _) in gate.rotations(circuit.n, qubits) {
                    cands.push(PauliSum::from_word(&p, 1.0));
                }
            }
        }
        for c in cands {
            if !out.contains(&c) {
                out.push(c);
            }
        }
    }
    out
}

/// Real structure constants `[B_a, B_b] = i sum_c f_abc B_c`, stored sparse
/// for `a < b`; other index orders follow from antisymmetry.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureConstants {
    dim: usize,
    upper: BTreeMap<(usize, usize, usize), f64>,
}

impl StructureConstants {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        use std::cmp::Ordering::*;
        match a.cmp(&b) {
            Equal => 0.0,
            Less => self.upper.get(&(a, b, c)).copied().unwrap_or(0.0),
            Greater => -self.upper.get(&(b, a, c)).copied().unwrap_or(0.0),
        }
    }

    /// Non-zero entries with `a < b` in lexicographic order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        self.upper.iter().map(|(&(a, b, c), &v)| (a, b, c, v))
    }

    pub fn nnz(&self) -> usize {
        self.upper.len()
    }
}

/// `f_abc = -i <B_c, [B_a, B_b]>`, evaluated in parallel over pairs.
pub fn structure_constants(basis: &LieBasis) -> Result<StructureConstants> {
    let d = basis.dim();
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|a| (a + 1..d).map(move |b| (a, b))).collect();
    type Entry = (usize, usize, usize, f64);
    let rows: Vec<Result<Vec<Entry>>> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let comm = basis.basis[a].commutator(&basis.basis[b])?;
            let mut r = comm.clone();
            let v = basis.project_raw(&comm);
            basis.subtract(&mut r, &v);
            let res = r.norm();
            if res > SPAN_TOL * comm.norm().max(1.0) {
                return Err(SimError::Consistency(format!(
                    "basis not closed: [B_{a}, B_{b}] leaves the span by {res:e}"
                )));
            }
            let mut out = Vec::new();
            for (c, vc) in v.iter().enumerate() {
                let f = (Complex64::new(0.0, -1.0) * vc).re;
                if f.abs() > 1e-13 {
                    out.push((a, b, c, f));
                }
            }
            Ok(out)
        })
        .collect();
    let mut upper = BTreeMap::new();
    for r in rows {
        for (a, b, c, f) in r? {
            upper.insert((a, b, c), f);
        }
    }
    Ok(StructureConstants { dim: d, upper })
}

/// `(ad_H)_{cb} = <B_c, i[H, B_b]>`; real and antisymmetric.
pub fn adjoint_generator(h: &PauliSum, basis: &LieBasis) -> Result<DMatrix<f64>> {
    check_dims("generator qubits", h.n(), basis.n)?;
    if !basis.contains(h)? {
        return Err(SimError::Consistency("generator lies outside the algebra".into()));
    }
    let d = basis.dim();
    let cols: Vec<Vec<f64>> = (0..d)
        .into_par_iter()
        .map(|b| {
            let c = h.commutator(&basis.basis[b]).expect("dims checked");
            basis.project_raw(&c).iter().map(|v| (Complex64::new(0.0, 1.0) * v).re).collect()
        })
        .collect();
    Ok(DMatrix::from_fn(d, d, |r, c| cols[c][r]))
}

/// `v_a = <B_a, A>` and the norm of what lies outside the span.
pub fn project_onto_algebra(a: &PauliSum, basis: &LieBasis) -> Result<Projection> {
    basis.project(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_matchgate, build_sn_equivariant, build_u1_equivariant, sn_generators};
    use crate::dense;
    use crate::seed::rng_from;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn s(n: usize, pairs: &[(f64, &str)]) -> PauliSum {
        PauliSum::from_pairs(n, pairs).unwrap()
    }

    fn su2() -> LieBasis {
        lie_closure(&[s(1, &[(1.0, "X")]), s(1, &[(1.0, "Z")])], 16).unwrap()
    }

    fn matchgate_gens(n: usize) -> Vec<PauliSum> {
        circuit_generators(&build_matchgate(n, 1).unwrap())
    }

    #[test]
    fn small_closures() {
        assert_eq!(lie_closure(&[s(1, &[(1.0, "X")])], 16).unwrap().dim(), 1);
        assert_eq!(su2().dim(), 3);
        assert_eq!(lie_closure(&matchgate_gens(4), DEFAULT_DIM_CAP).unwrap().dim(), 28);
    }

    #[test]
    fn matchgate_dimension_is_n_2n_minus_1() {
        for n in 2..=6 {
            let b = lie_closure(&matchgate_gens(n), DEFAULT_DIM_CAP).unwrap();
            assert_eq!(b.dim(), n * (2 * n - 1), "n={n}");
        }
    }

    #[test]
    fn dim_cap_reports_partial_dimension() {
        // X_1, Z_1, X_1X_2, Z_2, Z_1Z_2 generate su(4), dim 15
        let gens: Vec<PauliSum> = ["XI", "ZI", "XX", "IZ", "ZZ"].iter().map(|w| s(2, &[(1.0, w)])).collect();
        assert_eq!(lie_closure(&gens, 64).unwrap().dim(), 15);
        match lie_closure(&gens, 6) {
            Err(SimError::DimCapExceeded { cap: 6, reached: 7 }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sn_closure_stays_inside_symmetric_operators() {
        // permutation-invariant operators are spanned by multisets of size n
        // over {I, X, Y, Z}: C(n + 3, 3) of them
        let mut prev = 0;
        for n in 3..=6 {
            let d = lie_closure(&sn_generators(n), DEFAULT_DIM_CAP).unwrap().dim();
            let bound = (n + 1) * (n + 2) * (n + 3) / 6;
            assert!(d < bound && d > prev, "n={n} dim={d}");
            prev = d;
        }
    }

    #[test]
    fn basis_is_orthonormal() {
        let b = lie_closure(&sn_generators(4), DEFAULT_DIM_CAP).unwrap();
        for i in 0..b.dim() {
            for j in 0..b.dim() {
                let v = b.element(i).hs_inner(b.element(j)).unwrap();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((v - want).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn closure_independent_of_order() {
        let mut gens = circuit_generators(&build_u1_equivariant(4, 1).unwrap());
        let d0 = lie_closure(&gens, DEFAULT_DIM_CAP).unwrap().dim();
        let mut rng = rng_from(3);
        for _ in 0..3 {
            gens.shuffle(&mut rng);
            assert_eq!(lie_closure(&gens, DEFAULT_DIM_CAP).unwrap().dim(), d0);
        }
    }

    #[test]
    fn su2_structure_constants() {
        let b =
            LieBasis::from_orthonormal(1, vec![s(1, &[(1.0, "X")]), s(1, &[(1.0, "Y")]), s(1, &[(1.0, "Z")])]).unwrap();
        let f = structure_constants(&b).unwrap();
        assert!((f.get(0, 1, 2) - 2.0).abs() < 1e-14);
        assert!((f.get(1, 2, 0) - 2.0).abs() < 1e-14);
        assert!((f.get(2, 0, 1) - 2.0).abs() < 1e-14);
        assert!((f.get(1, 0, 2) + 2.0).abs() < 1e-14);
        for a in 0..3 {
            for c in 0..3 {
                assert_eq!(f.get(a, a, c), 0.0);
            }
        }
        let ab = LieBasis::from_orthonormal(2, vec![s(2, &[(1.0, "ZI")]), s(2, &[(1.0, "IZ")])]).unwrap();
        assert_eq!(structure_constants(&ab).unwrap().nnz(), 0);
    }

    #[test]
    fn non_closed_basis_rejected() {
        let b = LieBasis::from_orthonormal(1, vec![s(1, &[(1.0, "X")]), s(1, &[(1.0, "Z")])]).unwrap();
        assert!(matches!(structure_constants(&b), Err(SimError::Consistency(_))));
    }

    #[test]
    fn jacobi_identity() {
        let b = lie_closure(&circuit_generators(&build_sn_equivariant(3, 1).unwrap()), DEFAULT_DIM_CAP).unwrap();
        let f = structure_constants(&b).unwrap();
        let d = b.dim();
        let mut rng = rng_from(11);
        for _ in 0..40 {
            let (a, bb, c, dd) =
                (rng.random_range(0..d), rng.random_range(0..d), rng.random_range(0..d), rng.random_range(0..d));
            let j: f64 = (0..d)
                .map(|e| {
                    f.get(a, bb, e) * f.get(e, c, dd)
                        + f.get(bb, c, e) * f.get(e, a, dd)
                        + f.get(c, a, e) * f.get(e, bb, dd)
                })
                .sum();
            assert!(j.abs() < 1e-8, "{j}");
        }
    }

    #[test]
    fn adjoint_generator_examples() {
        let b =
            LieBasis::from_orthonormal(1, vec![s(1, &[(1.0, "X")]), s(1, &[(1.0, "Y")]), s(1, &[(1.0, "Z")])]).unwrap();
        let ad = adjoint_generator(&s(1, &[(1.0, "Z")]), &b).unwrap();
        // i[Z, X] = -2Y, i[Z, Y] = 2X
        assert_eq!(ad[(1, 0)], -2.0);
        assert_eq!(ad[(0, 1)], 2.0);
        assert!(ad.row(2).iter().all(|&v| v == 0.0) && ad.column(2).iter().all(|&v| v == 0.0));
        let outside =
            adjoint_generator(&s(1, &[(1.0, "X")]), &LieBasis::from_orthonormal(1, vec![s(1, &[(1.0, "Z")])]).unwrap());
        assert!(matches!(outside, Err(SimError::Consistency(_))));
    }

    #[test]
    fn adjoint_exponential_matches_conjugation() {
        let n = 3;
        let b = lie_closure(&matchgate_gens(n), DEFAULT_DIM_CAP).unwrap();
        let mut rng = rng_from(5);
        let coeffs: Vec<f64> = (0..b.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h = b.reconstruct(&coeffs).unwrap();
        let ad = adjoint_generator(&h, &b).unwrap();
        assert!((&ad + ad.transpose()).amax() < 1e-12);
        let theta = 0.37;
        // U = exp(-i theta H); U^dag B U = exp(theta ad) B
        let u = dense::unitary_exp(&dense::sum_matrix(&h), theta);
        let expo = (ad * theta).exp();
        for col in [0, 4, b.dim() - 1] {
            let bm = dense::sum_matrix(b.element(col));
            let conj = u.adjoint() * bm * &u;
            let mut pred = dense::CMatrix::zeros(1 << n, 1 << n);
            for c in 0..b.dim() {
                pred += dense::sum_matrix(b.element(c)) * Complex64::new(expo[(c, col)], 0.0);
            }
            assert!(dense::max_abs_diff(&conj, &pred) < 1e-10);
        }
    }

    #[test]
    fn projection_examples() {
        let b = su2();
        let p = b.project(b.element(2)).unwrap();
        assert!(p.residual < 1e-14);
        assert!((p.coeffs[2] - 1.0).abs() < 1e-14 && p.coeffs[0].abs() < 1e-14);
        let i = s(1, &[(2.5, "I")]);
        let p = b.project(&i).unwrap();
        assert!(p.coeffs.iter().all(|&c| c == 0.0));
        assert!((p.residual - 2.5).abs() < 1e-14);
    }

    #[test]
    fn json_round_trip() {
        let b = lie_closure(&matchgate_gens(3), DEFAULT_DIM_CAP).unwrap();
        let f = structure_constants(&b).unwrap();
        let text = b.to_json(Some(&f));
        let (b2, f2) = LieBasis::from_json(&text).unwrap();
        assert_eq!(b, b2);
        assert_eq!(Some(f), f2);
        assert_eq!(b2.to_json(f2.as_ref()), text);
        assert!(LieBasis::from_json("{\"n\":1}").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn projection_residual_is_reconstruction_error(seed in any::<u64>()) {
            let b = lie_closure(&matchgate_gens(3), DEFAULT_DIM_CAP).unwrap();
            let mut rng = rng_from(seed);
            let mut a = PauliSum::zero(3);
            for _ in 0..6 {
                let x: u64 = rng.random_range(0..8);
                let z: u64 = rng.random_range(0..8);
                a.add_term(&PauliString::from_masks(3, x, z), Complex64::new(rng.random_range(-1.0..1.0), 0.0));
            }
            let p = b.project(&a).unwrap();
            let rec = b.reconstruct(&p.coeffs).unwrap();
            let err = a.sub(&rec).unwrap().norm();
            prop_assert!((err - p.residual).abs() < 1e-10);
        }
    }
}
