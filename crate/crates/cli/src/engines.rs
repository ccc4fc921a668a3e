//! Turns config specs into circuits, observables and prepared engines.

use serde::Serialize;
use subspace_sim::circuit::{
    build_hva, build_matchgate, build_qcnn, build_shallow_hea, build_sn_equivariant, build_u1_equivariant, tfim_terms,
};
use subspace_sim::dense::CMatrix;
use subspace_sim::diagnostics::parity_cascade;
use subspace_sim::expectation::BasisState;
use subspace_sim::gsim::GsimInstance;
use subspace_sim::hamming::sector_loss;
use subspace_sim::lightcone::{backward_cone, reduced_loss, LightCone};
use subspace_sim::matchgate::module_loss_from_source;
use subspace_sim::pauli::total_z;
use subspace_sim::propagation::{backpropagate, loss_from_expectations, TruncationPolicy};
use subspace_sim::statevector::{loss, prepare};
use subspace_sim::{Circuit, Pauli, PauliString, PauliSum, Result, SimError};

use crate::config::{Builder, CircuitSpec, Engine, NamedObservable, ObservableSpec, TruncationSpec};
use crate::error::CliError;

/// A resolved circuit; `readout` is set for QCNNs.
pub struct BuiltCircuit {
    pub circuit: Circuit,
    pub readout: Option<PauliSum>,
}

fn need(v: Option<usize>, field: &str) -> std::result::Result<usize, CliError> {
    v.ok_or_else(|| CliError::schema(field, "required by this builder"))
}

/// Builds from `spec`; `n_override` supplies the size for scans.
pub fn build_circuit(
    spec: Option<&CircuitSpec>,
    n_override: Option<usize>,
) -> std::result::Result<BuiltCircuit, CliError> {
    let spec = spec.ok_or_else(|| CliError::schema("circuit", "required"))?;
    match (&spec.builder, &spec.path) {
        (Some(_), Some(_)) => return Err(CliError::schema("circuit", "give either `builder` or `path`, not both")),
        (None, None) => return Err(CliError::schema("circuit", "needs `builder` or `path`")),
        (None, Some(path)) => {
            if n_override.is_some() {
                return Err(CliError::schema("circuit.path", "size scans need a builder"));
            }
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::schema("circuit.path", format!("{}: {e}", path.display())))?;
            let circuit = Circuit::from_json(&text).map_err(CliError::at("circuit.path"))?;
            return Ok(BuiltCircuit { circuit, readout: None });
        }
        (Some(_), None) => {}
    }
    let builder = spec.builder.expect("checked above");
    let n = match n_override {
        Some(n) => {
            if spec.n.is_some() {
                return Err(CliError::schema("circuit.n", "must be omitted when sizes come from n_list"));
            }
            n
        }
        None => need(spec.n, "circuit.n")?,
    };
    let layers = || need(spec.layers, "circuit.layers");
    let at = CliError::at("circuit");
    let built = match builder {
        Builder::Hea => build_shallow_hea(n, layers()?, spec.structure_seed).map_err(at)?,
        Builder::Matchgate => build_matchgate(n, layers()?).map_err(at)?,
        Builder::U1 => build_u1_equivariant(n, layers()?).map_err(at)?,
        Builder::Sn => build_sn_equivariant(n, layers()?).map_err(at)?,
        Builder::TfimHva => build_hva(&tfim_terms(n), layers()?).map_err(at)?,
        Builder::ParityCascade => parity_cascade(n),
        Builder::Qcnn => {
            let q = build_qcnn(n).map_err(at)?;
            let readout = Some(q.observable());
            return Ok(BuiltCircuit { circuit: q.circuit, readout });
        }
    };
    Ok(BuiltCircuit { circuit: built, readout: None })
}

pub fn build_observable(
    spec: Option<&ObservableSpec>,
    built: &BuiltCircuit,
) -> std::result::Result<PauliSum, CliError> {
    let n = built.circuit.n;
    let spec = spec.ok_or_else(|| CliError::schema("observable", "required"))?;
    build_observable_n(spec, n, built.readout.as_ref())
}

pub fn build_observable_n(
    spec: &ObservableSpec,
    n: usize,
    readout: Option<&PauliSum>,
) -> std::result::Result<PauliSum, CliError> {
    let word = |ops: &[(usize, Pauli)]| PauliString::from_ops(n, ops).map_err(CliError::at("observable"));
    let obs = match spec {
        ObservableSpec::Text(t) => PauliSum::from_text(t, Some(n)).map_err(CliError::at("observable"))?,
        ObservableSpec::Named { named } => match named {
            NamedObservable::ZFirst => PauliSum::from_word(&word(&[(0, Pauli::Z)])?, 1.0),
            NamedObservable::ZMiddle => PauliSum::from_word(&word(&[(n / 2, Pauli::Z)])?, 1.0),
            NamedObservable::ZAll => {
                let ops: Vec<(usize, Pauli)> = (0..n).map(|q| (q, Pauli::Z)).collect();
                PauliSum::from_word(&word(&ops)?, 1.0)
            }
            NamedObservable::TotalZ => total_z(n),
            NamedObservable::TotalX => tfim_terms(n).swap_remove(1),
            NamedObservable::QcnnReadout => readout
                .cloned()
                .ok_or_else(|| CliError::schema("observable.named", "qcnn-readout needs the qcnn builder"))?,
        },
    };
    if obs.n() != n {
        return Err(CliError::schema("observable", format!("acts on {} qubits, circuit has {n}", obs.n())));
    }
    if !obs.is_hermitian(1e-12) {
        return Err(CliError::schema("observable", "must be Hermitian (real coefficients)"));
    }
    Ok(obs)
}

pub fn parse_bits(text: Option<&str>, n: usize) -> std::result::Result<Vec<bool>, CliError> {
    let Some(t) = text else { return Ok(vec![false; n]) };
    let bits: Vec<bool> = t
        .chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(CliError::schema("input_bits", format!("unexpected character {c:?}"))),
        })
        .collect::<std::result::Result<_, _>>()?;
    if bits.len() != n {
        return Err(CliError::schema("input_bits", format!("has {} bits, circuit has {n} qubits", bits.len())));
    }
    Ok(bits)
}

pub fn policy(spec: Option<&TruncationSpec>) -> TruncationPolicy {
    let s = spec.cloned().unwrap_or_default();
    TruncationPolicy { max_weight: s.max_weight, min_coeff: s.min_coeff, max_terms: s.max_terms, discard_log: 0.0 }
}

/// One loss evaluation; `discarded_mass` is reported by truncating engines.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Sample {
    pub loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discarded_mass: Option<f64>,
}

/// An engine with its per-instance setup done.
pub enum Runner {
    Oracle { prep: Circuit },
    Gsim(Box<GsimInstance>),
    Lightcone { cone: LightCone, rho: CMatrix },
    Hamming { bits: Vec<bool> },
    Matchgate { source: BasisState },
    PauliProp { source: BasisState, policy: TruncationPolicy },
}

impl Runner {
    pub fn prepare(
        engine: Engine,
        circuit: &Circuit,
        obs: &PauliSum,
        bits: &[bool],
        trunc: &TruncationPolicy,
    ) -> Result<Runner> {
        let source = BasisState::new(bits);
        Ok(match engine {
            Engine::Oracle => Runner::Oracle { prep: Circuit::basis_state(bits) },
            Engine::Gsim => Runner::Gsim(Box::new(GsimInstance::prepare(circuit, obs, &source)?)),
            Engine::Lightcone => {
                let support = obs.support();
                if support.is_empty() {
                    return Err(SimError::InadmissibleObservable(
                        "the lightcone engine needs a non-identity observable".into(),
                    ));
                }
                let cone = backward_cone(circuit, &support)?;
                let local: Vec<bool> = cone.qubit_set.iter().map(|&q| bits[q]).collect();
                let m = local.len();
                let state = prepare(&Circuit::basis_state(&local), &Circuit::new(m), &[])?;
                let rho = state.reduced_density(&(0..m).collect::<Vec<_>>())?;
                Runner::Lightcone { cone, rho }
            }
            Engine::Hamming => Runner::Hamming { bits: bits.to_vec() },
            Engine::Matchgate => Runner::Matchgate { source },
            Engine::PauliProp => Runner::PauliProp { source, policy: trunc.clone() },
        })
    }

    pub fn loss(&self, circuit: &Circuit, obs: &PauliSum, params: &[f64]) -> Result<Sample> {
        let exact = |loss| Sample { loss, discarded_mass: None };
        Ok(match self {
            Runner::Oracle { prep } => exact(loss(prep, circuit, params, obs)?),
            Runner::Gsim(g) => exact(g.loss(params)?),
            Runner::Lightcone { cone, rho } => exact(reduced_loss(cone, rho, obs, params)?),
            Runner::Hamming { bits } => exact(sector_loss(bits, circuit, params, obs)?),
            Runner::Matchgate { source } => exact(module_loss_from_source(circuit, params, obs, source)?.value),
            Runner::PauliProp { source, policy } => {
                let mut pol = policy.clone();
                let prop = backpropagate(obs, circuit, params, &mut pol)?;
                let loss = loss_from_expectations(&prop, source)?.value;
                Sample { loss, discarded_mass: (!pol.is_unlimited()).then_some(pol.discard_log) }
            }
        })
    }
}
