//! One function per experiment. Each returns the files to write; nothing
//! touches the output directory until every computation has succeeded.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use subspace_sim::diagnostics::{discrete_vs_continuous, leakage, variance_scan, SubspaceDescriptor};
use subspace_sim::dla::{circuit_generators, lie_closure};
use subspace_sim::expectation::{Estimate, ExpectationSource};
use subspace_sim::seed::derive_seed;
use subspace_sim::shadows::{acquire, ShadowDataset, ShadowEstimator};
use subspace_sim::{Circuit, ParamDistribution, PauliSum};

use crate::config::{Engine, Experiment, ExperimentConfig, SubspaceSpec};
use crate::engines::{build_circuit, build_observable, build_observable_n, parse_bits, policy, Runner, Sample};
use crate::error::CliError;

pub const OUTPUT_SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = concat!("subspace-sim ", env!("CARGO_PKG_VERSION"));

pub type Files = Vec<(String, String)>;
type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    tool_version: &'static str,
    experiment: &'static str,
    config: &'a ExperimentConfig,
    result: T,
}

fn envelope<T: Serialize>(cfg: &ExperimentConfig, result: T) -> (String, String) {
    let exp = cfg.experiment.expect("resolved config").name();
    let doc = Envelope {
        schema_version: OUTPUT_SCHEMA_VERSION,
        tool_version: TOOL_VERSION,
        experiment: exp,
        config: cfg,
        result,
    };
    (format!("{exp}.json"), serde_json::to_string_pretty(&doc).expect("output serializes") + "\n")
}

pub fn run(cfg: &ExperimentConfig) -> CliResult<Files> {
    match cfg.experiment.expect("resolved config") {
        Experiment::Dla => dla(cfg),
        Experiment::Simulate => simulate(cfg),
        Experiment::Compare => compare(cfg),
        Experiment::VarianceScan => scan(cfg),
        Experiment::ShadowsAcquire => shadows_acquire(cfg),
        Experiment::ShadowsEstimate => shadows_estimate(cfg),
        Experiment::Leakage => leakage_cmd(cfg),
        Experiment::SplitAb => split_ab(cfg),
    }
}

fn distribution(cfg: &ExperimentConfig) -> CliResult<ParamDistribution> {
    let d = cfg.distribution.clone().expect("resolved config");
    d.validate().map_err(CliError::at("distribution"))?;
    Ok(d)
}

fn positive(v: Option<usize>, field: &str) -> CliResult<usize> {
    match v {
        Some(0) => Err(CliError::schema(field, "must be positive")),
        Some(v) => Ok(v),
        None => Err(CliError::schema(field, "required")),
    }
}

/// Seed of the `i`-th parameter draw.
fn theta_seed(seed: u64, i: usize) -> u64 {
    derive_seed(seed, &format!("theta/sample={i}"))
}

/// Runs `f` on each sample in parallel; the lowest-index failure wins.
fn per_sample<T: Send>(count: usize, f: impl Fn(usize) -> subspace_sim::Result<T> + Sync + Send) -> CliResult<Vec<T>> {
    let out: Vec<subspace_sim::Result<T>> = (0..count).into_par_iter().map(f).collect();
    out.into_iter().collect::<subspace_sim::Result<Vec<T>>>().map_err(CliError::from_sim)
}

fn kebab<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|s| s.as_str().map(str::to_owned)).unwrap_or_default()
}

fn dla(cfg: &ExperimentConfig) -> CliResult<Files> {
    let built = build_circuit(cfg.circuit.as_ref(), None)?;
    let gens = circuit_generators(&built.circuit);
    if gens.is_empty() {
        return Err(CliError::schema("circuit", "has no parameterized generators"));
    }
    let basis = lie_closure(&gens, cfg.dim_cap.expect("resolved")).map_err(CliError::from_sim)?;
    let result = json!({"n": built.circuit.n, "generator_count": gens.len(), "dim": basis.dim()});
    Ok(vec![envelope(cfg, result)])
}

#[derive(Serialize)]
struct SampleRow {
    seed: u64,
    #[serde(flatten)]
    sample: Sample,
}

fn simulate(cfg: &ExperimentConfig) -> CliResult<Files> {
    let built = build_circuit(cfg.circuit.as_ref(), None)?;
    let obs = build_observable(cfg.observable.as_ref(), &built)?;
    let c = &built.circuit;
    let bits = parse_bits(cfg.input_bits.as_deref(), c.n)?;
    let dist = distribution(cfg)?;
    let samples = positive(cfg.samples, "samples")?;
    let engine = cfg.engine.expect("resolved");
    let runner =
        Runner::prepare(engine, c, &obs, &bits, &policy(cfg.truncation.as_ref())).map_err(CliError::from_sim)?;
    let rows = per_sample(samples, |i| {
        let seed = theta_seed(cfg.seed, i);
        let p = dist.sample(c.n_params, seed)?;
        Ok(SampleRow { seed, sample: runner.loss(c, &obs, &p)? })
    })?;
    let mean = rows.iter().map(|r| r.sample.loss).sum::<f64>() / rows.len() as f64;
    let result = json!({"engine": engine, "n": c.n, "n_params": c.n_params, "mean_loss": mean, "samples": rows});
    Ok(vec![envelope(cfg, result)])
}

#[derive(Serialize)]
struct CompareRow {
    seed: u64,
    losses: [f64; 2],
    abs_diff: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    discarded_mass: Option<[Option<f64>; 2]>,
}

fn compare(cfg: &ExperimentConfig) -> CliResult<Files> {
    let engines: [Engine; 2] = cfg
        .engines
        .clone()
        .expect("resolved")
        .try_into()
        .map_err(|_| CliError::schema("engines", "exactly two engines are compared"))?;
    let built = build_circuit(cfg.circuit.as_ref(), None)?;
    let obs = build_observable(cfg.observable.as_ref(), &built)?;
    let c = &built.circuit;
    let bits = parse_bits(cfg.input_bits.as_deref(), c.n)?;
    let dist = distribution(cfg)?;
    let samples = positive(cfg.samples, "samples")?;
    let tol = cfg.tolerance.expect("resolved");
    if tol.is_nan() || tol < 0.0 {
        return Err(CliError::schema("tolerance", "must be a non-negative number"));
    }
    let pol = policy(cfg.truncation.as_ref());
    let runners = [
        Runner::prepare(engines[0], c, &obs, &bits, &pol).map_err(CliError::from_sim)?,
        Runner::prepare(engines[1], c, &obs, &bits, &pol).map_err(CliError::from_sim)?,
    ];
    let rows = per_sample(samples, |i| {
        let seed = theta_seed(cfg.seed, i);
        let p = dist.sample(c.n_params, seed)?;
        let a = runners[0].loss(c, &obs, &p)?;
        let b = runners[1].loss(c, &obs, &p)?;
        let mass = [a.discarded_mass, b.discarded_mass];
        Ok(CompareRow {
            seed,
            losses: [a.loss, b.loss],
            abs_diff: (a.loss - b.loss).abs(),
            discarded_mass: mass.iter().any(Option::is_some).then_some(mass),
        })
    })?;
    let max = rows.iter().map(|r| r.abs_diff).fold(0.0, f64::max);
    let mean = rows.iter().map(|r| r.abs_diff).sum::<f64>() / rows.len() as f64;
    let result = json!({
        "engines": engines,
        "tolerance": tol,
        "max_abs_diff": max,
        "mean_abs_diff": mean,
        "pass": max <= tol,
        "samples": rows,
    });
    Ok(vec![envelope(cfg, result)])
}

fn scan(cfg: &ExperimentConfig) -> CliResult<Files> {
    let n_list = cfg
        .n_list
        .clone()
        .filter(|l| !l.is_empty())
        .ok_or_else(|| CliError::schema("n_list", "required, non-empty"))?;
    if cfg.input_bits.is_some() {
        return Err(CliError::schema("input_bits", "not used by variance-scan; inputs are all-zero at every size"));
    }
    let obs_spec = cfg.observable.as_ref().ok_or_else(|| CliError::schema("observable", "required"))?;
    let dist = distribution(cfg)?;
    let engine = cfg.engine.expect("resolved");
    let pol = policy(cfg.truncation.as_ref());
    let mut family: HashMap<usize, (Circuit, PauliSum, Runner)> = HashMap::new();
    for &n in &n_list {
        let built = build_circuit(cfg.circuit.as_ref(), Some(n))?;
        let obs = build_observable_n(obs_spec, n, built.readout.as_ref())?;
        let runner =
            Runner::prepare(engine, &built.circuit, &obs, &vec![false; n], &pol).map_err(CliError::from_sim)?;
        family.insert(n, (built.circuit, obs, runner));
    }
    let eval = |n: usize, seed: u64| {
        let (c, o, r) = &family[&n];
        let p = dist.sample(c.n_params, seed)?;
        r.loss(c, o, &p).map(|s| s.loss)
    };
    let builder = cfg.circuit.as_ref().and_then(|s| s.builder).map(|b| kebab(&b)).unwrap_or_default();
    let label = format!("{builder}/{}", kebab(&engine));
    let samples = positive(cfg.samples, "samples")?;
    let report = variance_scan(&label, eval, &n_list, samples, cfg.seed, cfg.rule.expect("resolved"))
        .map_err(CliError::from_sim)?;
    let csv = ("variance-scan.csv".to_string(), report.to_csv());
    Ok(vec![envelope(cfg, &report), csv])
}

fn shadow_file_name(cfg: &ExperimentConfig) -> CliResult<String> {
    let path = cfg.shadow_file.as_ref().expect("resolved");
    match path.file_name().and_then(|f| f.to_str()) {
        Some(f) if path.components().count() == 1 => Ok(f.to_string()),
        _ => Err(CliError::schema("shadow_file", "acquire writes a plain file name inside the output directory")),
    }
}

fn shadows_acquire(cfg: &ExperimentConfig) -> CliResult<Files> {
    let built = build_circuit(cfg.circuit.as_ref(), None)?;
    let c = &built.circuit;
    let bits = parse_bits(cfg.input_bits.as_deref(), c.n)?;
    let dist = distribution(cfg)?;
    let shots = positive(cfg.shots, "shots")?;
    let name = shadow_file_name(cfg)?;
    let theta = dist.sample(c.n_params, derive_seed(cfg.seed, "shadows/theta")).map_err(CliError::from_sim)?;
    let bound = c.bind(&theta).and_then(|b| Circuit::basis_state(&bits).then(&b)).map_err(CliError::from_sim)?;
    let ds = acquire(&bound, shots, cfg.seed).map_err(CliError::from_sim)?;
    let result = json!({"n": ds.n, "shots": ds.shots.len(), "prep_id": ds.prep_id, "shadow_file": name});
    let file = (name, ds.to_text());
    Ok(vec![envelope(cfg, result), file])
}

#[derive(Serialize)]
struct TermRow {
    word: String,
    coeff: f64,
    #[serde(flatten)]
    estimate: Estimate,
}

fn shadows_estimate(cfg: &ExperimentConfig) -> CliResult<Files> {
    let path = cfg.shadow_file.as_ref().ok_or_else(|| CliError::schema("shadow_file", "required"))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::schema("shadow_file", format!("{}: {e}", path.display())))?;
    let ds = ShadowDataset::from_text(&text).map_err(CliError::at("shadow_file"))?;
    let spec = cfg.observable.as_ref().ok_or_else(|| CliError::schema("observable", "required"))?;
    let obs = build_observable_n(spec, ds.n, None)?;
    let batches = positive(cfg.batches, "batches")?;
    let est = ShadowEstimator::new(&ds).with_batches(batches).with_budget(cfg.locality_budget.expect("resolved"));
    let total = est.sum_expectation(&obs).map_err(CliError::from_sim)?;
    let terms = obs
        .sorted_terms()
        .into_iter()
        .map(|(p, c)| Ok(TermRow { word: p.to_string(), coeff: c.re, estimate: est.word_expectation(&p)? }))
        .collect::<subspace_sim::Result<Vec<_>>>()
        .map_err(CliError::from_sim)?;
    let result = json!({"n": ds.n, "shots": ds.shots.len(), "prep_id": ds.prep_id, "total": total, "terms": terms});
    Ok(vec![envelope(cfg, result)])
}

fn leakage_cmd(cfg: &ExperimentConfig) -> CliResult<Files> {
    let built = build_circuit(cfg.circuit.as_ref(), None)?;
    let obs = build_observable(cfg.observable.as_ref(), &built)?;
    let c = &built.circuit;
    let dist = distribution(cfg)?;
    let samples = positive(cfg.samples, "samples")?;
    let desc = match cfg.subspace.clone().ok_or_else(|| CliError::schema("subspace", "required"))? {
        SubspaceSpec::MaxWeight(k) => SubspaceDescriptor::MaxWeight(k),
        SubspaceSpec::Support(q) => {
            if let Some(bad) = q.iter().find(|&&x| x >= c.n) {
                return Err(CliError::schema("subspace.support", format!("qubit {bad} out of range")));
            }
            SubspaceDescriptor::SupportWithin(q)
        }
        SubspaceSpec::MajoranaDegree(e) => SubspaceDescriptor::MajoranaDegree(e),
        SubspaceSpec::ChargeConserving => SubspaceDescriptor::ChargeConserving,
        SubspaceSpec::PermutationInvariant => SubspaceDescriptor::PermutationInvariant,
        SubspaceSpec::LieSpan => {
            let basis =
                lie_closure(&circuit_generators(c), cfg.dim_cap.expect("resolved")).map_err(CliError::from_sim)?;
            SubspaceDescriptor::LieSpan(Arc::new(basis))
        }
    };
    let rows = per_sample(samples, |i| {
        let seed = theta_seed(cfg.seed, i);
        let p = dist.sample(c.n_params, seed)?;
        Ok(json!({"seed": seed, "leakage": leakage(c, &p, &obs, &desc)?}))
    })?;
    let mut vals: Vec<f64> = rows.iter().map(|r| r["leakage"].as_f64().unwrap_or(f64::NAN)).collect();
    vals.sort_by(f64::total_cmp);
    let m = vals.len();
    let median = if m % 2 == 1 { vals[m / 2] } else { 0.5 * (vals[m / 2 - 1] + vals[m / 2]) };
    let result = json!({"median_leakage": median, "max_leakage": vals[m - 1], "samples": rows});
    Ok(vec![envelope(cfg, result)])
}

fn split_ab(cfg: &ExperimentConfig) -> CliResult<Files> {
    let built = build_circuit(cfg.circuit.as_ref(), None)?;
    let obs = build_observable(cfg.observable.as_ref(), &built)?;
    if built.circuit.n_params != 0 {
        return Err(CliError::schema("circuit", "split-ab needs a parameter-free circuit U"));
    }
    let samples = cfg.samples.expect("resolved");
    if samples < 2 {
        return Err(CliError::schema("samples", "needs at least 2"));
    }
    let ks = cfg.ks.clone().expect("resolved");
    if ks.is_empty() {
        return Err(CliError::schema("ks", "must be non-empty"));
    }
    let report = discrete_vs_continuous(&built.circuit, &obs, &ks, samples, cfg.seed).map_err(CliError::from_sim)?;
    let last = report.rows.last().expect("one row per k");
    let result = json!({
        "continuous_decreasing": report.continuous_decreasing(),
        "discrete_over_continuous_at_max_k": last.disc_high / last.cont_high,
        "report": report,
    });
    Ok(vec![envelope(cfg, result)])
}
