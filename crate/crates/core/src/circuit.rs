//! Circuit description shared by every engine.
//!
//! A parameterized gate is `exp(-i * theta * H)` with `H` a Hermitian sum of
//! mutually commuting Pauli words, so it factors into single-word rotations
//! `exp(-i * theta * c_k * P_k)`. There is no factor 1/2 in the exponent.
//! Fixed gates (Cliffords, Toffoli) carry a name and target qubits; engines
//! that work on Pauli words use their rotation decomposition, which is exact
//! up to a global phase.

use std::f64::consts::FRAC_PI_4;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::pauli::{Pauli, PauliString, PauliSum};

pub mod builders;
pub mod distribution;

pub use builders::*;
pub use distribution::{ParamDistribution, SamplingLaw};

pub const SCHEMA_VERSION: u32 = 1;

/// Named non-parameterized gates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FixedGate {
    H,
    S,
    Sdg,
    X,
    Y,
    Z,
    Cnot,
    Cz,
    Swap,
    Toffoli,
}

impl FixedGate {
    pub fn arity(self) -> usize {
        match self {
            FixedGate::H | FixedGate::S | FixedGate::Sdg | FixedGate::X | FixedGate::Y | FixedGate::Z => 1,
            FixedGate::Cnot | FixedGate::Cz | FixedGate::Swap => 2,
            FixedGate::Toffoli => 3,
        }
    }

    pub fn is_clifford(self) -> bool {
        !matches!(self, FixedGate::Toffoli)
    }

    /// Time-ordered rotations `(word, phi)` with `prod exp(-i phi P)` equal to
    /// the gate up to a global phase.
    pub fn rotations(self, n: usize, qubits: &[usize]) -> Vec<(PauliString, f64)> {
        let w = |ops: &[(usize, Pauli)]| PauliString::from_ops(n, ops).expect("validated qubits");
        let q = qubits;
        let h = std::f64::consts::FRAC_PI_2;
        let e = std::f64::consts::PI / 8.0;
        match self {
            FixedGate::H => vec![(w(&[(q[0], Pauli::Y)]), FRAC_PI_4), (w(&[(q[0], Pauli::X)]), h)],
            FixedGate::S => vec![(w(&[(q[0], Pauli::Z)]), FRAC_PI_4)],
            FixedGate::Sdg => vec![(w(&[(q[0], Pauli::Z)]), -FRAC_PI_4)],
            FixedGate::X => vec![(w(&[(q[0], Pauli::X)]), h)],
            FixedGate::Y => vec![(w(&[(q[0], Pauli::Y)]), h)],
            FixedGate::Z => vec![(w(&[(q[0], Pauli::Z)]), h)],
            FixedGate::Cnot => vec![
                (w(&[(q[0], Pauli::Z)]), FRAC_PI_4),
                (w(&[(q[1], Pauli::X)]), FRAC_PI_4),
                (w(&[(q[0], Pauli::Z), (q[1], Pauli::X)]), -FRAC_PI_4),
            ],
            FixedGate::Cz => vec![
                (w(&[(q[0], Pauli::Z)]), FRAC_PI_4),
                (w(&[(q[1], Pauli::Z)]), FRAC_PI_4),
                (w(&[(q[0], Pauli::Z), (q[1], Pauli::Z)]), -FRAC_PI_4),
            ],
            FixedGate::Swap => vec![
                (w(&[(q[0], Pauli::X), (q[1], Pauli::X)]), FRAC_PI_4),
                (w(&[(q[0], Pauli::Y), (q[1], Pauli::Y)]), FRAC_PI_4),
                (w(&[(q[0], Pauli::Z), (q[1], Pauli::Z)]), FRAC_PI_4),
            ],
            FixedGate::Toffoli => {
                let (a, b, t) = (q[0], q[1], q[2]);
                vec![
                    (w(&[(a, Pauli::Z)]), e),
                    (w(&[(b, Pauli::Z)]), e),
                    (w(&[(t, Pauli::X)]), e),
                    (w(&[(a, Pauli::Z), (b, Pauli::Z)]), -e),
                    (w(&[(a, Pauli::Z), (t, Pauli::X)]), -e),
                    (w(&[(b, Pauli::Z), (t, Pauli::X)]), -e),
                    (w(&[(a, Pauli::Z), (b, Pauli::Z), (t, Pauli::X)]), e),
                ]
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GateKind {
    /// `exp(-i theta H)`; `H` has real coefficients on commuting words.
    PauliRotation {
        generator: PauliSum,
    },
    Fixed {
        gate: FixedGate,
        qubits: Vec<usize>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    pub param_slot: Option<usize>,
    pub constant_angle: Option<f64>,
    pub layer: usize,
}

impl Gate {
    pub fn rotation(generator: PauliSum, slot: usize, layer: usize) -> Self {
        Gate { kind: GateKind::PauliRotation { generator }, param_slot: Some(slot), constant_angle: None, layer }
    }

    pub fn word_rotation(word: PauliString, slot: usize, layer: usize) -> Self {
        Self::rotation(PauliSum::from_word(&word, 1.0), slot, layer)
    }

    pub fn constant_rotation(generator: PauliSum, angle: f64, layer: usize) -> Self {
        Gate { kind: GateKind::PauliRotation { generator }, param_slot: None, constant_angle: Some(angle), layer }
    }

    pub fn fixed(gate: FixedGate, qubits: Vec<usize>, layer: usize) -> Self {
        Gate { kind: GateKind::Fixed { gate, qubits }, param_slot: None, constant_angle: None, layer }
    }

    pub fn generator(&self) -> Option<&PauliSum> {
        match &self.kind {
            GateKind::PauliRotation { generator } => Some(generator),
            GateKind::Fixed { .. } => None,
        }
    }

    /// Qubits the gate acts on, ascending.
    pub fn qubits(&self) -> Vec<usize> {
        match &self.kind {
            GateKind::PauliRotation { generator } => generator.support(),
            GateKind::Fixed { qubits, .. } => {
                let mut q = qubits.clone();
                q.sort_unstable();
                q
            }
        }
    }

    /// Rotation angle for this gate under `params`; fixed gates return 0.
    pub fn angle(&self, params: &[f64]) -> f64 {
        match (self.param_slot, self.constant_angle) {
            (Some(s), _) => params[s],
            (None, Some(a)) => a,
            _ => 0.0,
        }
    }

    /// Time-ordered single-word rotations `(canonical word, phi)` realizing
    /// the gate up to a global phase.
    pub fn rotations(&self, n: usize, params: &[f64]) -> Vec<(PauliString, f64)> {
        match &self.kind {
            GateKind::PauliRotation { generator } => {
                let theta = self.angle(params);
                generator.sorted_terms().into_iter().map(|(p, c)| (p, c.re * theta)).collect()
            }
            GateKind::Fixed { gate, qubits } => gate.rotations(n, qubits),
        }
    }
}

/// Ordered gate list over `n` qubits with a parameter vector of length `n_params`.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    pub n: usize,
    pub gates: Vec<Gate>,
    pub n_params: usize,
}

impl Circuit {
    pub fn new(n: usize) -> Self {
        Circuit { n, gates: Vec::new(), n_params: 0 }
    }

    /// Appends a gate, growing `n_params` to cover its slot.
    pub fn push(&mut self, gate: Gate) {
        if let Some(s) = gate.param_slot {
            self.n_params = self.n_params.max(s + 1);
        }
        self.gates.push(gate);
    }

    /// Adds a rotation on a fresh parameter slot and returns the slot.
    pub fn push_param(&mut self, generator: PauliSum, layer: usize) -> usize {
        let slot = self.n_params;
        self.push(Gate::rotation(generator, slot, layer));
        slot
    }

    pub fn push_word_param(&mut self, word: PauliString, layer: usize) -> usize {
        self.push_param(PauliSum::from_word(&word, 1.0), layer)
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn layer_tags(&self) -> Vec<usize> {
        self.gates.iter().map(|g| g.layer).collect()
    }

    pub fn depth(&self) -> usize {
        self.gates.iter().map(|g| g.layer + 1).max().unwrap_or(0)
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<()> {
        let mut last_layer = 0;
        for (i, g) in self.gates.iter().enumerate() {
            let bad = |reason: String| SimError::InadmissibleCircuit { gate: i, reason };
            if g.layer < last_layer {
                return Err(bad(format!("layer tag {} decreases (previous {last_layer})", g.layer)));
            }
            last_layer = g.layer;
            match &g.kind {
                GateKind::PauliRotation { generator } => {
                    if g.param_slot.is_some() == g.constant_angle.is_some() {
                        return Err(bad("rotation needs exactly one of param_slot/angle".into()));
                    }
                    if let Some(s) = g.param_slot {
                        if s >= self.n_params {
                            return Err(bad(format!("param slot {s} >= n_params {}", self.n_params)));
                        }
                    }
                    if generator.n() != self.n {
                        return Err(bad(format!("generator on {} qubits, circuit has {}", generator.n(), self.n)));
                    }
                    if generator.is_empty() {
                        return Err(bad("empty generator".into()));
                    }
                    if !generator.is_hermitian(1e-12) {
                        return Err(bad("generator is not Hermitian".into()));
                    }
                    if !generator.terms_commute() {
                        return Err(bad("generator terms do not commute".into()));
                    }
                }
                GateKind::Fixed { gate, qubits } => {
                    if g.param_slot.is_some() || g.constant_angle.is_some() {
                        return Err(bad("fixed gate cannot carry a parameter".into()));
                    }
                    if qubits.len() != gate.arity() {
                        return Err(bad(format!("{gate:?} needs {} qubits", gate.arity())));
                    }
                    let mut q = qubits.clone();
                    q.sort_unstable();
                    q.dedup();
                    if q.len() != qubits.len() {
                        return Err(bad("repeated target qubit".into()));
                    }
                    if let Some(&bad_q) = qubits.iter().find(|&&q| q >= self.n) {
                        return Err(bad(format!("target qubit {bad_q} >= n {}", self.n)));
                    }
                }
            }
        }
        Ok(())
    }

    /// `self` followed by `other`; `other`'s slots are shifted past ours and
    /// its layers past our depth.
    pub fn then(&self, other: &Circuit) -> Result<Circuit> {
        crate::error::check_dims("circuit composition", self.n, other.n)?;
        let mut out = self.clone();
        let shift = self.n_params;
        let lshift = self.depth();
        for g in &other.gates {
            let mut g = g.clone();
            g.param_slot = g.param_slot.map(|s| s + shift);
            g.layer += lshift;
            out.gates.push(g);
        }
        out.n_params = shift + other.n_params;
        Ok(out)
    }

    /// The same circuit with every parameter slot replaced by its value.
    pub fn bind(&self, params: &[f64]) -> Result<Circuit> {
        self.check_params(params)?;
        let mut out = self.clone();
        for g in &mut out.gates {
            if let Some(s) = g.param_slot.take() {
                g.constant_angle = Some(params[s]);
            }
        }
        out.n_params = 0;
        Ok(out)
    }

    /// Distinct rotation generators in first-appearance order.
    pub fn generators(&self) -> Vec<PauliSum> {
        let mut out: Vec<PauliSum> = Vec::new();
        for g in &self.gates {
            if let Some(h) = g.generator() {
                if !out.iter().any(|o| o == h) {
                    out.push(h.clone());
                }
            }
        }
        out
    }

    pub fn check_params(&self, params: &[f64]) -> Result<()> {
        crate::error::check_dims("parameter vector length", params.len(), self.n_params)
    }

    /// Circuit preparing the computational basis state `bits` (qubit 0 first).
    pub fn basis_state(bits: &[bool]) -> Circuit {
        let mut c = Circuit::new(bits.len());
        for (q, &b) in bits.iter().enumerate() {
            if b {
                c.push(Gate::fixed(FixedGate::X, vec![q], 0));
            }
        }
        c
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&CircuitDoc::from(self)).expect("circuit serializes")
    }

    pub fn from_json(text: &str) -> Result<Circuit> {
        let doc: CircuitDoc = serde_json::from_str(text).map_err(|e| SimError::Parse(format!("circuit JSON: {e}")))?;
        doc.try_into()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitDoc {
    pub schema_version: u32,
    pub n: usize,
    pub n_params: usize,
    pub gates: Vec<GateDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateDoc {
    /// `"rotation"` or a fixed gate name.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<Vec<(f64, String)>>,
    pub qubits: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param_slot: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
    pub layer: usize,
}

impl From<&Circuit> for CircuitDoc {
    fn from(c: &Circuit) -> Self {
        let gates = c
            .gates
            .iter()
            .map(|g| match &g.kind {
                GateKind::PauliRotation { generator } => GateDoc {
                    kind: "rotation".into(),
                    generator: Some(generator.sorted_terms().into_iter().map(|(p, v)| (v.re, p.to_string())).collect()),
                    qubits: generator.support(),
                    param_slot: g.param_slot,
                    angle: g.constant_angle,
                    layer: g.layer,
                },
                GateKind::Fixed { gate, qubits } => GateDoc {
                    kind: serde_json::to_value(gate).unwrap().as_str().unwrap().to_string(),
                    generator: None,
                    qubits: qubits.clone(),
                    param_slot: None,
                    angle: None,
                    layer: g.layer,
                },
            })
            .collect();
        CircuitDoc { schema_version: SCHEMA_VERSION, n: c.n, n_params: c.n_params, gates }
    }
}

impl TryFrom<CircuitDoc> for Circuit {
    type Error = SimError;

    fn try_from(doc: CircuitDoc) -> Result<Circuit> {
        if doc.schema_version != SCHEMA_VERSION {
            return Err(SimError::Parse(format!("unsupported schema_version {}", doc.schema_version)));
        }
        let mut gates = Vec::with_capacity(doc.gates.len());
        for (i, g) in doc.gates.into_iter().enumerate() {
            let kind = if g.kind == "rotation" {
                let terms = g.generator.ok_or_else(|| SimError::Parse(format!("gates[{i}].generator missing")))?;
                let mut sum = PauliSum::zero(doc.n);
                for (c, w) in terms {
                    let p: PauliString =
                        w.parse().map_err(|e| SimError::Parse(format!("gates[{i}].generator: {e}")))?;
                    if p.n() != doc.n {
                        return Err(SimError::Parse(format!(
                            "gates[{i}].generator: word {w} not on n={} qubits",
                            doc.n
                        )));
                    }
                    sum.add_term(&p, Complex64::new(c, 0.0));
                }
                GateKind::PauliRotation { generator: sum }
            } else {
                let gate: FixedGate = serde_json::from_value(serde_json::Value::String(g.kind.clone()))
                    .map_err(|_| SimError::Parse(format!("gates[{i}].kind: unknown gate {:?}", g.kind)))?;
                GateKind::Fixed { gate, qubits: g.qubits }
            };
            gates.push(Gate { kind, param_slot: g.param_slot, constant_angle: g.angle, layer: g.layer });
        }
        let c = Circuit { n: doc.n, gates, n_params: doc.n_params };
        c.validate()?;
        Ok(c)
    }
}
