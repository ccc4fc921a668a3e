//! Concentration diagnostics: variance scans with a log-variance fit,
//! variance against DLA dimension, subspace leakage, and the
//! discrete-versus-continuous input-state study.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, ParamDistribution};
use crate::dla::{circuit_generators, lie_closure, LieBasis};
use crate::error::{check_dims, Result, SimError};
use crate::matchgate::pauli_to_majorana;
use crate::pauli::{Pauli, PauliString, PauliSum};
use crate::propagation::{backpropagate_bounded, split_observable};
use crate::seed::derive_seed;
use crate::statevector::loss;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SAMPLES_PER_N: usize = 200;
/// Term cap for untruncated propagation inside leakage and split studies.
pub const DEFAULT_TERM_CAP: usize = 1 << 20;

/// Mean, unbiased variance, and the standard error of that variance from the
/// fourth central moment.
pub fn sample_stats(values: &[f64]) -> Result<(f64, f64, f64)> {
    let m = values.len();
    if m < 2 {
        return Err(SimError::Argument(format!("need at least 2 samples, got {m}")));
    }
    let mf = m as f64;
    let mean = values.iter().sum::<f64>() / mf;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / mf;
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / mf;
    let var = m2 * mf / (mf - 1.0);
    // Var[s^2] ~ (mu4 - (m-3)/(m-1) sigma^4) / m
    let var_of_var = (m4 - (mf - 3.0) / (mf - 1.0) * var * var) / mf;
    Ok((mean, var, var_of_var.max(0.0).sqrt()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares `y = slope x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    check_dims("fit points", x.len(), y.len())?;
    let m = x.len() as f64;
    if x.len() < 2 {
        return Err(SimError::Argument("fit needs at least 2 points".into()));
    }
    let (mx, my) = (x.iter().sum::<f64>() / m, y.iter().sum::<f64>() / m);
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(SimError::Argument("fit abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit { slope, intercept, r2 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    ExponentialDecay,
    PolynomialOrFlat,
    Inconclusive,
}

/// Decision rule on the fit of `ln Var` against `n`. Flat needs `slope >
/// flat_slope_min`, or the same for `ln(Var * n^p)` with some `p <=
/// max_poly_degree`; it is tested first. Otherwise exponential decay needs
/// `slope < exp_slope_max` and `r2 > exp_r2_min`. Variances at or below
/// `zero_tol` count as zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationRule {
    pub exp_slope_max: f64,
    pub exp_r2_min: f64,
    pub flat_slope_min: f64,
    pub max_poly_degree: u32,
    pub zero_tol: f64,
}

impl Default for ClassificationRule {
    fn default() -> Self {
        ClassificationRule {
            exp_slope_max: -0.2,
            exp_r2_min: 0.9,
            flat_slope_min: -0.05,
            max_poly_degree: 2,
            zero_tol: 1e-20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceRecord {
    pub n: usize,
    pub n_samples: usize,
    pub mean: f64,
    pub variance: f64,
    pub stderr_of_variance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub label: String,
    pub seed: u64,
    pub samples_per_n: usize,
    pub rule: ClassificationRule,
    pub records: Vec<VarianceRecord>,
    pub fit: Option<LinearFit>,
    /// Degree `p` that made `Var * n^p` flat, when that clause decided.
    pub poly_degree: Option<u32>,
    pub classification: Classification,
}

impl VarianceReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| SimError::Parse(format!("variance report: {e}")))
    }

    /// One row per size: `schema_version,n,n_samples,mean,variance,stderr_of_variance`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["schema_version", "n", "n_samples", "mean", "variance", "stderr_of_variance"])
            .expect("in-memory csv");
        for r in &self.records {
            w.serialize((self.schema_version, r.n, r.n_samples, r.mean, r.variance, r.stderr_of_variance))
                .expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8 csv")
    }
}

/// Applies the rule; returns the fit (when at least 3 nonzero sizes), the
/// label, and the polynomial degree used by the flat clause.
pub fn classify(
    records: &[VarianceRecord],
    rule: &ClassificationRule,
) -> (Option<LinearFit>, Classification, Option<u32>) {
    if !records.is_empty() && records.iter().all(|r| r.variance <= rule.zero_tol) {
        return (None, Classification::PolynomialOrFlat, None);
    }
    if records.len() < 3 || records.iter().any(|r| r.variance <= rule.zero_tol) {
        return (None, Classification::Inconclusive, None);
    }
    let x: Vec<f64> = records.iter().map(|r| r.n as f64).collect();
    let y: Vec<f64> = records.iter().map(|r| r.variance.ln()).collect();
    let Ok(fit) = linear_fit(&x, &y) else {
        return (None, Classification::Inconclusive, None);
    };
    // A decay that n^p with p <= max_poly_degree explains is polynomial, even
    // when its log-linear fit is also steep.
    if fit.slope > rule.flat_slope_min {
        return (Some(fit), Classification::PolynomialOrFlat, None);
    }
    for p in 1..=rule.max_poly_degree {
        let yp: Vec<f64> = y.iter().zip(&x).map(|(v, n)| v + p as f64 * n.ln()).collect();
        if linear_fit(&x, &yp).is_ok_and(|f| f.slope > rule.flat_slope_min) {
            return (Some(fit), Classification::PolynomialOrFlat, Some(p));
        }
    }
    if fit.slope < rule.exp_slope_max && fit.r2 > rule.exp_r2_min {
        return (Some(fit), Classification::ExponentialDecay, None);
    }
    (Some(fit), Classification::Inconclusive, None)
}

/// Sample variance of `eval(n, seed)` over `samples_per_n` derived seeds per
/// size. Seeds are `derive_seed(seed, "variance/n=<n>/sample=<i>")`.
pub fn variance_scan<F>(
    label: &str,
    eval: F,
    n_list: &[usize],
    samples_per_n: usize,
    seed: u64,
    rule: ClassificationRule,
) -> Result<VarianceReport>
where
    F: Fn(usize, u64) -> Result<f64> + Sync,
{
    if samples_per_n < 2 {
        return Err(SimError::Argument("variance scan needs at least 2 samples per size".into()));
    }
    let tasks: Vec<(usize, u64)> = n_list
        .iter()
        .flat_map(|&n| (0..samples_per_n).map(move |i| (n, derive_seed(seed, &format!("variance/n={n}/sample={i}")))))
        .collect();
    let values: Vec<f64> = tasks
        .par_iter()
        .map(|&(n, s)| eval(n, s).map_err(|e| SimError::Evaluation { n, seed: s, source: Box::new(e) }))
        .collect::<Result<_>>()?;
    let records = n_list
        .iter()
        .zip(values.chunks(samples_per_n))
        .map(|(&n, v)| {
            let (mean, variance, stderr_of_variance) = sample_stats(v)?;
            Ok(VarianceRecord { n, n_samples: v.len(), mean, variance, stderr_of_variance })
        })
        .collect::<Result<Vec<_>>>()?;
    let (fit, classification, poly_degree) = classify(&records, &rule);
    Ok(VarianceReport {
        schema_version: REPORT_SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        label: label.to_string(),
        seed,
        samples_per_n,
        rule,
        records,
        fit,
        poly_degree,
        classification,
    })
}

/// One member of a circuit family: input preparation, ansatz, observable,
/// and parameter law.
#[derive(Clone, Debug)]
pub struct FamilyInstance {
    pub state_prep: Circuit,
    pub circuit: Circuit,
    pub obs: PauliSum,
    pub dist: ParamDistribution,
}

impl FamilyInstance {
    pub fn new(circuit: Circuit, obs: PauliSum, dist: ParamDistribution) -> Self {
        FamilyInstance { state_prep: Circuit::new(circuit.n), circuit, obs, dist }
    }

    /// Oracle loss at parameters drawn with `seed`.
    pub fn sample_loss(&self, seed: u64) -> Result<f64> {
        let p = self.dist.sample(self.circuit.n_params, seed)?;
        loss(&self.state_prep, &self.circuit, &p, &self.obs)
    }
}

/// Builds each size once and returns an evaluator for [`variance_scan`].
pub fn oracle_evaluator<B>(build: B, n_list: &[usize]) -> Result<impl Fn(usize, u64) -> Result<f64> + Sync>
where
    B: Fn(usize) -> Result<FamilyInstance>,
{
    let family: HashMap<usize, FamilyInstance> = n_list.iter().map(|&n| Ok((n, build(n)?))).collect::<Result<_>>()?;
    Ok(move |n: usize, seed: u64| {
        family.get(&n).ok_or_else(|| SimError::Argument(format!("size {n} not prepared")))?.sample_loss(seed)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub n: usize,
    pub dla_dim: usize,
    pub mean: f64,
    pub variance: f64,
    pub stderr_of_variance: f64,
    pub variance_times_dim: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DlaTrend {
    pub schema_version: u32,
    pub seed: u64,
    pub samples: usize,
    pub rows: Vec<TrendRow>,
    /// `max / min` of `variance * dim` over sizes.
    pub flatness_ratio: f64,
}

/// Loss variance next to the DLA dimension of each family member.
pub fn dla_variance_trend<B>(build: B, n_list: &[usize], samples: usize, seed: u64, dim_cap: usize) -> Result<DlaTrend>
where
    B: Fn(usize) -> Result<FamilyInstance>,
{
    let mut dims = HashMap::new();
    for &n in n_list {
        let inst = build(n)?;
        dims.insert(n, lie_closure(&circuit_generators(&inst.circuit), dim_cap)?.dim());
    }
    let scan = variance_scan(
        "dla-trend",
        oracle_evaluator(&build, n_list)?,
        n_list,
        samples,
        seed,
        ClassificationRule::default(),
    )?;
    let rows: Vec<TrendRow> = scan
        .records
        .iter()
        .map(|r| TrendRow {
            n: r.n,
            dla_dim: dims[&r.n],
            mean: r.mean,
            variance: r.variance,
            stderr_of_variance: r.stderr_of_variance,
            variance_times_dim: r.variance * dims[&r.n] as f64,
        })
        .collect();
    let scaled: Vec<f64> = rows.iter().map(|r| r.variance_times_dim).collect();
    let max = scaled.iter().cloned().fold(f64::MIN, f64::max);
    let min = scaled.iter().cloned().fold(f64::MAX, f64::min);
    Ok(DlaTrend { schema_version: REPORT_SCHEMA_VERSION, seed, samples, rows, flatness_ratio: max / min })
}

/// Operator subspaces used for leakage. All are spanned by, or are
/// orthogonal projections within, the Pauli word basis.
#[derive(Clone, Debug)]
pub enum SubspaceDescriptor {
    /// Words of weight at most `k`.
    MaxWeight(usize),
    /// Words supported inside the given qubits.
    SupportWithin(Vec<usize>),
    /// Jordan-Wigner images of degree-`eta` Majorana monomials.
    MajoranaDegree(usize),
    /// Operators commuting with `sum_j Z_j`.
    ChargeConserving,
    /// Operators invariant under every qubit permutation.
    PermutationInvariant,
    /// The real span of an orthonormal algebra basis.
    LieSpan(Arc<LieBasis>),
}

/// Squared mass of `a` inside the subspace.
pub fn mass_inside(a: &PauliSum, subspace: &SubspaceDescriptor) -> Result<f64> {
    let word_mass = |keep: &dyn Fn(&PauliString) -> bool| -> f64 {
        a.iter().filter(|(p, _)| keep(p)).map(|(_, c)| c.norm_sqr()).sum()
    };
    Ok(match subspace {
        SubspaceDescriptor::MaxWeight(k) => word_mass(&|p| p.weight() <= *k),
        SubspaceDescriptor::SupportWithin(q) => {
            let mut inside = vec![false; a.n()];
            for &j in q {
                if j >= a.n() {
                    return Err(SimError::Argument(format!("qubit {j} out of range")));
                }
                inside[j] = true;
            }
            word_mass(&|p| p.support().iter().all(|&j| inside[j]))
        }
        SubspaceDescriptor::MajoranaDegree(eta) => {
            word_mass(&|p| pauli_to_majorana(p).map(|(m, _)| m.degree() == *eta).unwrap_or(false))
        }
        SubspaceDescriptor::ChargeConserving => charge_zero_mass(a),
        SubspaceDescriptor::PermutationInvariant => symmetric_mass(a),
        SubspaceDescriptor::LieSpan(basis) => {
            let p = basis.project(a)?;
            p.coeffs.iter().map(|c| c * c).sum()
        }
    })
}

/// Rewrites X/Y sites in normalized ladder operators
/// (`X = (e+ + e-)/sqrt2`, `Y = (-i e+ + i e-)/sqrt2`) and keeps patterns
/// with as many raising as lowering factors.
fn charge_zero_mass(a: &PauliSum) -> f64 {
    let mut groups: HashMap<(u64, u64), HashMap<u64, Complex64>> = HashMap::new();
    for (p, c) in a.iter() {
        let (x, z) = (p.x_mask(), p.z_mask());
        // y-pattern compressed onto the x sites
        let mut pat = 0u64;
        let mut bit = 0;
        let mut m = x;
        while m != 0 {
            let q = m.trailing_zeros();
            if (z >> q) & 1 == 1 {
                pat |= 1 << bit;
            }
            bit += 1;
            m &= m - 1;
        }
        *groups.entry((x, z & !x)).or_default().entry(pat).or_default() += c;
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let i = Complex64::new(0.0, 1.0);
    let mut total = 0.0;
    for ((x, _), coeffs) in groups {
        let m = x.count_ones() as usize;
        if m % 2 == 1 {
            continue;
        }
        let mut v = vec![Complex64::new(0.0, 0.0); 1 << m];
        for (pat, c) in coeffs {
            v[pat as usize] = c;
        }
        // index bit 0 = X / e+, bit 1 = Y / e-
        for b in 0..m {
            for t in 0..v.len() {
                if t >> b & 1 == 0 {
                    let (ax, ay) = (v[t], v[t | 1 << b]);
                    v[t] = (ax - i * ay) * s;
                    v[t | 1 << b] = (ax + i * ay) * s;
                }
            }
        }
        total += v
            .iter()
            .enumerate()
            .filter(|(t, _)| t.count_ones() as usize * 2 == m)
            .map(|(_, c)| c.norm_sqr())
            .sum::<f64>();
    }
    total
}

fn symmetric_mass(a: &PauliSum) -> f64 {
    let n = a.n();
    let mut orbits: HashMap<[usize; 4], Complex64> = HashMap::new();
    for (p, c) in a.iter() {
        let mut counts = [0usize; 4];
        for q in 0..n {
            counts[match p.op(q) {
                Pauli::I => 0,
                Pauli::X => 1,
                Pauli::Y => 2,
                Pauli::Z => 3,
            }] += 1;
        }
        *orbits.entry(counts).or_default() += c;
    }
    let ln_fact = |k: usize| (1..=k).map(|j| (j as f64).ln()).sum::<f64>();
    orbits
        .into_iter()
        .map(|(counts, s)| {
            let ln_size = ln_fact(n) - counts.iter().map(|&k| ln_fact(k)).sum::<f64>();
            s.norm_sqr() / ln_size.exp()
        })
        .sum()
}

/// Fraction of the squared mass of `U^dag O U` outside the subspace.
pub fn leakage(circuit: &Circuit, params: &[f64], obs: &PauliSum, subspace: &SubspaceDescriptor) -> Result<f64> {
    let evolved = backpropagate_bounded(obs, circuit, params, DEFAULT_TERM_CAP)?;
    leakage_of(&evolved, subspace)
}

/// Outside fraction for an already evolved operator.
pub fn leakage_of(a: &PauliSum, subspace: &SubspaceDescriptor) -> Result<f64> {
    let total = a.norm_sq();
    if total == 0.0 {
        return Ok(0.0);
    }
    let inside = mass_inside(a, subspace)?;
    Ok(((total - inside) / total).clamp(0.0, 1.0))
}

/// `<psi|P|psi>` for `psi = prod_i exp(-i theta_i X_i)|0>`:
/// `<Z> = cos 2theta`, `<Y> = -sin 2theta`, `<X> = 0`.
pub fn product_x_rotation_expectation(word: &PauliString, thetas: &[f64]) -> f64 {
    let mut v = 1.0;
    for &q in &word.support() {
        v *= match word.op(q) {
            Pauli::Z => (2.0 * thetas[q]).cos(),
            Pauli::Y => -(2.0 * thetas[q]).sin(),
            _ => return 0.0,
        };
    }
    v
}

fn sum_on_product(a: &PauliSum, thetas: &[f64]) -> f64 {
    a.iter().map(|(p, c)| c.re * product_x_rotation_expectation(p, thetas)).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRow {
    pub k: usize,
    pub high_terms: usize,
    /// `E |<A_high>|` and `E |<A_low>|` under each law, with standard errors
    /// of the high parts.
    pub disc_high: f64,
    pub disc_high_stderr: f64,
    pub disc_low: f64,
    pub cont_high: f64,
    pub cont_high_stderr: f64,
    pub cont_low: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub schema_version: u32,
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub rows: Vec<SplitRow>,
}

impl SplitReport {
    /// Whether `cont_high` strictly decreases along the rows.
    pub fn continuous_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].cont_high < w[0].cont_high)
    }
}

fn mean_abs(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().map(|v| v.abs()).sum::<f64>() / m;
    let var = values.iter().map(|v| (v.abs() - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
    (mean, (var / m).sqrt())
}

/// Input `prod_i exp(-i theta_i X_i)|0>` followed by `circuit_u`. The
/// observable is propagated through `U` once and split at each `k`; both
/// parts are averaged in magnitude over `theta` drawn from the quarter-turn
/// set and from `Uniform[0, 2pi)`. Draws are shared across `k`.
pub fn discrete_vs_continuous(
    circuit_u: &Circuit,
    obs: &PauliSum,
    ks: &[usize],
    samples: usize,
    seed: u64,
) -> Result<SplitReport> {
    check_dims("observable vs circuit qubits", obs.n(), circuit_u.n)?;
    if circuit_u.n_params != 0 {
        return Err(SimError::Argument("the fixed circuit U must not carry free parameters".into()));
    }
    if samples < 2 {
        return Err(SimError::Argument("need at least 2 samples".into()));
    }
    let n = circuit_u.n;
    let a = backpropagate_bounded(obs, circuit_u, &[], DEFAULT_TERM_CAP)?;
    let disc = ParamDistribution::quarter_turns();
    let cont = ParamDistribution::uniform_angle();
    let draw = |d: &ParamDistribution, tag: &str| -> Result<Vec<Vec<f64>>> {
        (0..samples).map(|i| d.sample(n, derive_seed(seed, &format!("split-ab/{tag}/sample={i}")))).collect()
    };
    let (td, tc) = (draw(&disc, "discrete")?, draw(&cont, "continuous")?);
    let rows = ks
        .par_iter()
        .map(|&k| {
            let (lo, hi) = split_observable(&a, k);
            let eval = |thetas: &[Vec<f64>], part: &PauliSum| -> Vec<f64> {
                thetas.iter().map(|t| sum_on_product(part, t)).collect()
            };
            let (dh, dh_se) = mean_abs(&eval(&td, &hi));
            let (ch, ch_se) = mean_abs(&eval(&tc, &hi));
            SplitRow {
                k,
                high_terms: hi.len(),
                disc_high: dh,
                disc_high_stderr: dh_se,
                disc_low: mean_abs(&eval(&td, &lo)).0,
                cont_high: ch,
                cont_high_stderr: ch_se,
                cont_low: mean_abs(&eval(&tc, &lo)).0,
            }
        })
        .collect();
    Ok(SplitReport { schema_version: REPORT_SCHEMA_VERSION, n, samples, seed, rows })
}

/// CNOT cascade `0 -> 1 -> ... -> n-1`; conjugation sends `Z_j` to the
/// prefix parity `Z_0 ... Z_j`.
pub fn parity_cascade(n: usize) -> Circuit {
    use crate::circuit::{FixedGate, Gate};
    let mut c = Circuit::new(n);
    for j in 0..n.saturating_sub(1) {
        c.push(Gate::fixed(FixedGate::Cnot, vec![j, j + 1], j));
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{
        build_matchgate, build_shallow_hea, build_sn_equivariant, build_u1_equivariant, sn_generators,
    };
    use crate::lightcone::backward_cone;
    use crate::pauli::total_z;
    use proptest::prelude::*;

    fn word_sum(n: usize, w: &str) -> PauliSum {
        PauliSum::from_pairs(n, &[(1.0, w)]).unwrap()
    }

    #[test]
    fn stats_and_fit() {
        let (m, v, se) = sample_stats(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m, 2.5);
        assert!((v - 5.0 / 3.0).abs() < 1e-15);
        assert!(se >= 0.0);
        let f = linear_fit(&[1.0, 2.0, 3.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-15 && (f.intercept + 1.0).abs() < 1e-15 && (f.r2 - 1.0).abs() < 1e-15);
        assert!(sample_stats(&[1.0]).is_err());
    }

    fn rec(n: usize, variance: f64) -> VarianceRecord {
        VarianceRecord { n, n_samples: 10, mean: 0.0, variance, stderr_of_variance: 0.0 }
    }

    #[test]
    fn rule_examples() {
        let rule = ClassificationRule::default();
        let exp: Vec<_> = [4, 6, 8, 10].iter().map(|&n| rec(n, (-0.5 * n as f64).exp())).collect();
        assert_eq!(classify(&exp, &rule).1, Classification::ExponentialDecay);
        let flat: Vec<_> = [4, 6, 8, 10].iter().map(|&n| rec(n, 0.3)).collect();
        assert_eq!(classify(&flat, &rule).1, Classification::PolynomialOrFlat);
        let poly: Vec<_> = [4, 6, 8, 10].iter().map(|&n| rec(n, 1.0 / (n * n) as f64)).collect();
        let (_, c, p) = classify(&poly, &rule);
        assert_eq!((c, p), (Classification::PolynomialOrFlat, Some(2)));
        let zero: Vec<_> = [4, 6].iter().map(|&n| rec(n, 0.0)).collect();
        assert_eq!(classify(&zero, &rule).1, Classification::PolynomialOrFlat);
        assert_eq!(classify(&flat[..2], &rule), (None, Classification::Inconclusive, None));
    }

    #[test]
    fn constant_loss_is_flat_and_reproducible() {
        let eval = |_: usize, _: u64| Ok(0.7);
        let r = variance_scan("const", eval, &[4, 6, 8], 20, 1, ClassificationRule::default()).unwrap();
        assert!(r.records.iter().all(|x| x.variance.abs() < 1e-20 && x.n_samples == 20));
        assert_eq!(r.classification, Classification::PolynomialOrFlat);
        let noisy = |n: usize, s: u64| Ok((s % 1000) as f64 / n as f64);
        let a = variance_scan("noisy", noisy, &[4, 6, 8], 30, 9, ClassificationRule::default()).unwrap();
        let b = variance_scan("noisy", noisy, &[4, 6, 8], 30, 9, ClassificationRule::default()).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(VarianceReport::from_json(&a.to_json()).unwrap(), a);
        let csv = a.to_csv();
        assert!(csv.starts_with("schema_version,n,n_samples,mean,variance,stderr_of_variance\n"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn evaluator_failure_names_size_and_seed() {
        let eval = |n: usize, _: u64| if n == 6 { Err(SimError::Argument("boom".into())) } else { Ok(1.0) };
        match variance_scan("x", eval, &[4, 6], 5, 3, ClassificationRule::default()) {
            Err(SimError::Evaluation { n: 6, seed, .. }) => assert_eq!(seed, derive_seed(3, "variance/n=6/sample=0")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn su2_family_has_finite_variance() {
        let build = |_: usize| {
            let mut c = Circuit::new(1);
            for l in 0..4 {
                c.push_word_param("X".parse().unwrap(), 2 * l);
                c.push_word_param("Y".parse().unwrap(), 2 * l + 1);
            }
            Ok(FamilyInstance::new(c, word_sum(1, "Z"), ParamDistribution::uniform_angle()))
        };
        let t = dla_variance_trend(build, &[1], 400, 2, 64).unwrap();
        assert_eq!(t.rows[0].dla_dim, 3);
        // Haar on SU(2): Var<Z> = 1/3
        assert!((t.rows[0].variance - 1.0 / 3.0).abs() < 0.1);
    }

    #[test]
    fn proper_subspaces_do_not_leak() {
        let mut checks: Vec<(Circuit, PauliSum, SubspaceDescriptor)> = Vec::new();
        let c = build_matchgate(4, 3).unwrap();
        checks.push((c, word_sum(4, "ZIII"), SubspaceDescriptor::MajoranaDegree(2)));
        let c = build_shallow_hea(6, 2, None).unwrap();
        let cone = backward_cone(&c, &[2]).unwrap();
        checks.push((c, word_sum(6, "IIZIII"), SubspaceDescriptor::SupportWithin(cone.qubit_set.clone())));
        let c = build_u1_equivariant(5, 2).unwrap();
        let o = PauliSum::from_pairs(5, &[(1.0, "ZIIII"), (0.5, "XXIII"), (0.5, "YYIII")]).unwrap();
        checks.push((c, o, SubspaceDescriptor::ChargeConserving));
        let c = build_sn_equivariant(4, 2).unwrap();
        checks.push((c, total_z(4), SubspaceDescriptor::PermutationInvariant));
        let c = build_sn_equivariant(3, 2).unwrap();
        let g = Arc::new(lie_closure(&sn_generators(3), 512).unwrap());
        let o = PauliSum::from_pairs(3, &[(1.0, "XII"), (1.0, "IXI"), (1.0, "IIX")]).unwrap();
        checks.push((c, o, SubspaceDescriptor::LieSpan(g)));
        for (i, (c, o, s)) in checks.iter().enumerate() {
            for seed in 0..3 {
                let p = ParamDistribution::uniform_angle().sample(c.n_params, seed).unwrap();
                let l = leakage(c, &p, o, s).unwrap();
                assert!(l <= 1e-10, "case {i} seed {seed}: {l}");
            }
        }
    }

    #[test]
    fn improper_subspaces_leak() {
        let c = build_shallow_hea(4, 2, None).unwrap();
        let p = ParamDistribution::uniform_angle().sample(c.n_params, 1).unwrap();
        let o = word_sum(4, "IZII");
        assert!(leakage(&c, &p, &o, &SubspaceDescriptor::MaxWeight(1)).unwrap() > 1e-3);
        let x = word_sum(3, "XII");
        assert_eq!(leakage_of(&x, &SubspaceDescriptor::ChargeConserving).unwrap(), 1.0);
        assert!((leakage_of(&x, &SubspaceDescriptor::PermutationInvariant).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        let hop = PauliSum::from_pairs(2, &[(1.0, "XY"), (-1.0, "YX")]).unwrap();
        assert!(leakage_of(&hop, &SubspaceDescriptor::ChargeConserving).unwrap() < 1e-15);
        let pair = PauliSum::from_pairs(2, &[(1.0, "XX"), (1.0, "YY")]).unwrap();
        assert!(leakage_of(&pair, &SubspaceDescriptor::ChargeConserving).unwrap() < 1e-15);
        let anti = PauliSum::from_pairs(2, &[(1.0, "XX"), (-1.0, "YY")]).unwrap();
        assert!((leakage_of(&anti, &SubspaceDescriptor::ChargeConserving).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn split_trivial_cases() {
        let n = 4;
        let id = Circuit::new(n);
        let r = discrete_vs_continuous(&id, &word_sum(n, "ZIII"), &[1, 2, n], 50, 1).unwrap();
        for row in &r.rows {
            assert_eq!(row.high_terms, 0);
            assert_eq!((row.disc_high, row.cont_high), (0.0, 0.0));
        }
        let u = parity_cascade(n);
        let r = discrete_vs_continuous(&u, &word_sum(n, "IIIZ"), &[n], 50, 1).unwrap();
        assert_eq!(r.rows[0].high_terms, 0);
        // Z_3 becomes the full parity; on quarter-turn inputs it reads +-1
        let r = discrete_vs_continuous(&u, &word_sum(n, "IIIZ"), &[1], 50, 1).unwrap();
        assert_eq!(r.rows[0].disc_high, 1.0);
        assert!(r.rows[0].cont_high < 0.5);
    }

    #[test]
    fn product_state_matches_oracle() {
        let n = 3;
        let thetas = [0.3, -1.2, 2.0];
        let mut prep = Circuit::new(n);
        for (q, t) in thetas.iter().enumerate() {
            let mut w = PauliString::identity(n);
            w.set(q, Pauli::X);
            prep.push(crate::circuit::Gate::constant_rotation(PauliSum::from_word(&w, 1.0), *t, 0));
        }
        let psi = crate::statevector::prepare(&prep, &Circuit::new(n), &[]).unwrap();
        for w in ["ZII", "IYI", "ZYZ", "XII", "YZY"] {
            let p: PauliString = w.parse().unwrap();
            assert!((product_x_rotation_expectation(&p, &thetas) - psi.expectation(&p)).abs() < 1e-12, "{w}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn leakage_is_a_fraction(seed in any::<u64>(), k in 0usize..4) {
            let c = build_shallow_hea(4, 2, None).unwrap();
            let p = ParamDistribution::uniform_angle().sample(c.n_params, seed).unwrap();
            let o = PauliSum::from_pairs(4, &[(1.0, "ZIII"), (0.3, "XXII")]).unwrap();
            for s in [SubspaceDescriptor::MaxWeight(k), SubspaceDescriptor::ChargeConserving, SubspaceDescriptor::PermutationInvariant] {
                let l = leakage(&c, &p, &o, &s).unwrap();
                prop_assert!((0.0..=1.0).contains(&l));
            }
        }
    }
}
