//! g-sim: Heisenberg evolution of an observable's coordinates in an
//! orthonormal basis of the circuit's Lie algebra.
//!
//! With `U = exp(-i t H)` and `H` in the algebra, `U^dag B U = exp(t ad_H) B`,
//! so the observable's coefficient vector evolves by orthogonal matrices of
//! size `dim g`. The loss is the dot product with `e_a = Tr[rho B_a]`.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::circuit::{Circuit, GateKind};
use crate::dla::{adjoint_generator, circuit_generators, lie_closure, LieBasis, DEFAULT_DIM_CAP, SPAN_TOL};
use crate::error::{check_dims, Result, SimError};
use crate::expectation::ExpectationSource;
use crate::pauli::PauliSum;

/// Eigendecomposition `i A = V diag(lam) V^dag` of an antisymmetric matrix,
/// so that `exp(t A) = V diag(exp(-i t lam)) V^dag`.
#[derive(Clone, Debug)]
pub struct AdjointEigen {
    vecs: DMatrix<Complex64>,
    vals: DVector<f64>,
}

impl AdjointEigen {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        check_antisymmetric(a)?;
        let ia = a.map(|v| Complex64::new(0.0, v));
        let eig = nalgebra::SymmetricEigen::new(ia);
        Ok(AdjointEigen { vecs: eig.eigenvectors, vals: eig.eigenvalues })
    }

    /// `exp(t A) v`.
    pub fn apply(&self, t: f64, v: &DVector<f64>) -> DVector<f64> {
        let vc = v.map(|x| Complex64::new(x, 0.0));
        let mut w = self.vecs.ad_mul(&vc);
        for (k, wk) in w.iter_mut().enumerate() {
            *wk *= Complex64::from_polar(1.0, -t * self.vals[k]);
        }
        (&self.vecs * w).map(|z| z.re)
    }

    /// `exp(t A)` as a dense matrix.
    pub fn matrix(&self, t: f64) -> DMatrix<f64> {
        let phases = self.vals.map(|l| Complex64::from_polar(1.0, -t * l));
        let m = &self.vecs * DMatrix::from_diagonal(&phases) * self.vecs.adjoint();
        m.map(|z| z.re)
    }
}

fn check_antisymmetric(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(SimError::Dimension(format!("adjoint matrix is {}x{}", a.nrows(), a.ncols())));
    }
    let tol = 1e-9 * a.amax().max(1.0);
    let dev = (a + a.transpose()).amax();
    if dev > tol {
        return Err(SimError::Consistency(format!("matrix is not antisymmetric (deviation {dev:e})")));
    }
    Ok(())
}

/// `exp(angle * matrix)` for an antisymmetric matrix; orthogonal.
pub fn adjoint_gate_action(matrix: &DMatrix<f64>, angle: f64) -> Result<DMatrix<f64>> {
    Ok(AdjointEigen::new(matrix)?.matrix(angle))
}

/// One `exp(-i phi G)` factor; `phi = scale * params[slot]` or a constant.
#[derive(Clone, Debug)]
struct Factor {
    generator: usize,
    slot: Option<usize>,
    scale: f64,
    constant: f64,
}

/// A g-sim problem: basis, observable and state coordinates, and the cached
/// per-generator adjoint eigendecompositions.
#[derive(Clone, Debug)]
pub struct GsimInstance {
    basis: Arc<LieBasis>,
    obs_coeffs: DVector<f64>,
    state_coeffs: DVector<f64>,
    state_stderr: DVector<f64>,
    generators: Vec<AdjointEigen>,
    factors: Vec<Factor>,
    n_params: usize,
}

/// Serializable coordinates of an instance (the basis is stored separately
/// in its own format).
#[derive(Serialize)]
pub struct GsimCoordinates<'a> {
    pub dim: usize,
    pub obs_coeffs: &'a [f64],
    pub state_coeffs: &'a [f64],
    pub state_stderr: &'a [f64],
}

impl GsimInstance {
    /// Closes the circuit's generators into a basis, then prepares.
    pub fn prepare<S: ExpectationSource>(circuit: &Circuit, obs: &PauliSum, source: &S) -> Result<Self> {
        let gens = circuit_generators(circuit);
        if gens.is_empty() {
            return Err(SimError::Argument("circuit has no generators".into()));
        }
        let basis = lie_closure(&gens, DEFAULT_DIM_CAP)?;
        Self::prepare_with_basis(Arc::new(basis), circuit, obs, source)
    }

    pub fn prepare_with_basis<S: ExpectationSource>(
        basis: Arc<LieBasis>,
        circuit: &Circuit,
        obs: &PauliSum,
        source: &S,
    ) -> Result<Self> {
        check_dims("circuit vs basis qubits", circuit.n, basis.n())?;
        check_dims("observable vs basis qubits", obs.n(), basis.n())?;
        check_dims("source vs basis qubits", source.n(), basis.n())?;
        circuit.validate()?;
        if !obs.is_hermitian(1e-12) {
            return Err(SimError::Argument("observable is not Hermitian".into()));
        }
        let proj = basis.project(obs)?;
        if proj.residual > SPAN_TOL * obs.norm().max(1.0) {
            return Err(SimError::InadmissibleObservable(format!(
                "observable leaves the algebra (residual {:e})",
                proj.residual
            )));
        }

        let mut keys: HashMap<String, usize> = HashMap::new();
        let mut generators = Vec::new();
        let mut factors = Vec::new();
        let mut intern = |g: &PauliSum, gi: usize| -> Result<usize> {
            let key = g.to_text();
            if let Some(&k) = keys.get(&key) {
                return Ok(k);
            }
            let ad = adjoint_generator(g, &basis).map_err(|_| SimError::InadmissibleCircuit {
                gate: gi,
                reason: "generator lies outside the algebra".into(),
            })?;
            generators.push(AdjointEigen::new(&ad)?);
            keys.insert(key, generators.len() - 1);
            Ok(generators.len() - 1)
        };
        for (gi, g) in circuit.gates.iter().enumerate() {
            match &g.kind {
                GateKind::PauliRotation { generator } => {
                    let k = intern(&generator.real_part(), gi)?;
                    factors.push(Factor {
                        generator: k,
                        slot: g.param_slot,
                        scale: 1.0,
                        constant: g.constant_angle.unwrap_or(0.0),
                    });
                }
                GateKind::Fixed { gate, qubits } => {
                    for (p, phi) in gate.rotations(circuit.n, qubits) {
                        let k = intern(&PauliSum::from_word(&p, 1.0), gi)?;
                        factors.push(Factor { generator: k, slot: None, scale: 0.0, constant: phi });
                    }
                }
            }
        }

        let d = basis.dim();
        let mut state = DVector::zeros(d);
        let mut stderr = DVector::zeros(d);
        for a in 0..d {
            let e = source.sum_expectation(basis.element(a))?;
            state[a] = e.value;
            stderr[a] = e.stderr;
        }
        Ok(GsimInstance {
            basis,
            obs_coeffs: DVector::from_vec(proj.coeffs),
            state_coeffs: state,
            state_stderr: stderr,
            generators,
            factors,
            n_params: circuit.n_params,
        })
    }

    pub fn basis(&self) -> &LieBasis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn obs_coeffs(&self) -> &[f64] {
        self.obs_coeffs.as_slice()
    }

    pub fn state_coeffs(&self) -> &[f64] {
        self.state_coeffs.as_slice()
    }

    /// `||e||_2`: size of the state's component inside the algebra, in
    /// expectation units.
    pub fn state_projection_norm(&self) -> f64 {
        self.state_coeffs.norm()
    }

    pub fn coordinates(&self) -> GsimCoordinates<'_> {
        GsimCoordinates {
            dim: self.dim(),
            obs_coeffs: self.obs_coeffs.as_slice(),
            state_coeffs: self.state_coeffs.as_slice(),
            state_stderr: self.state_stderr.as_slice(),
        }
    }

    /// Observable coordinates after Heisenberg evolution by the circuit.
    pub fn evolved_obs(&self, params: &[f64]) -> Result<DVector<f64>> {
        check_dims("parameter count", params.len(), self.n_params)?;
        let mut v = self.obs_coeffs.clone();
        for f in self.factors.iter().rev() {
            let phi = match f.slot {
                Some(s) => f.scale * params[s],
                None => f.constant,
            };
            if phi != 0.0 {
                v = self.generators[f.generator].apply(phi, &v);
            }
        }
        Ok(v)
    }

    /// `sum_a e_a v_a(theta)`.
    pub fn loss(&self, params: &[f64]) -> Result<f64> {
        let v = self.evolved_obs(params)?;
        let l = self.state_coeffs.dot(&v);
        let bound = self.state_coeffs.norm() * v.norm();
        if l.abs() > bound * (1.0 + 1e-9) + 1e-12 {
            return Err(SimError::Consistency(format!("|loss| {l} exceeds Cauchy-Schwarz bound {bound}")));
        }
        Ok(l)
    }

    /// Standard error of the loss from the state-coordinate errors, taken
    /// as independent.
    pub fn loss_stderr(&self, params: &[f64]) -> Result<f64> {
        let v = self.evolved_obs(params)?;
        Ok(v.iter().zip(self.state_stderr.iter()).map(|(a, s)| (a * s).powi(2)).sum::<f64>().sqrt())
    }
}

pub fn gsim_loss(instance: &GsimInstance, params: &[f64]) -> Result<f64> {
    instance.loss(params)
}
