//! Projective and POVM measurements on qubit subsets.
//!
//! Both kinds implement [`Measurement`], which exposes each outcome as an
//! unnormalized branch `(probability, K_i s)`. Sampling, exact outcome
//! distributions and branch enumeration in the protocols all go through it.

use std::fmt;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::qmath::{
    apply_matrix, inner_raw, min_eigenvalue_hermitian, norm_sqr, re, Complex, Operator, RegisterSplit, StateVector,
    STATE_TOL, ZERO,
};
use crate::states::{bell, x_minus, x_plus, BellKind};

/// Probabilities below this are treated as exactly zero.
pub const DEGENERATE_PROB: f64 = 1e-15;

/// Tolerance used when a POVM is validated at construction.
pub const POVM_TOL: f64 = 1e-10;

/// An orthonormal basis of a `dim`-dimensional target space.
#[derive(Clone, Debug)]
pub struct ProjectiveBasis {
    dim: usize,
    vectors: Vec<StateVector>,
    labels: Vec<String>,
    reachable: Vec<bool>,
}

impl ProjectiveBasis {
    pub fn new(vectors: Vec<StateVector>, labels: Vec<String>) -> Result<Self> {
        let reachable = vec![true; vectors.len()];
        Self::with_reachability(vectors, labels, reachable)
    }

    /// `reachable[i] == false` marks completion vectors that valid inputs
    /// never populate.
    pub fn with_reachability(vectors: Vec<StateVector>, labels: Vec<String>, reachable: Vec<bool>) -> Result<Self> {
        let dim = vectors.first().map(StateVector::dim).unwrap_or(0);
        if vectors.len() != dim || labels.len() != dim || reachable.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: vectors.len().max(labels.len()),
            });
        }
        for (i, vi) in vectors.iter().enumerate() {
            for (j, vj) in vectors.iter().enumerate() {
                if vj.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: vj.dim(),
                    });
                }
                let want = if i == j { 1.0 } else { 0.0 };
                let dev = (inner_raw(vi.amps(), vj.amps()) - re(want)).norm();
                if dev > STATE_TOL {
                    return Err(Error::InvalidParameter(format!(
                        "basis vectors {i} and {j} deviate from orthonormality by {dev:e}"
                    )));
                }
            }
        }
        Ok(Self {
            dim,
            vectors,
            labels,
            reachable,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vectors(&self) -> &[StateVector] {
        &self.vectors
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn is_reachable(&self, i: usize) -> bool {
        self.reachable[i]
    }
}

pub fn z_basis() -> ProjectiveBasis {
    ProjectiveBasis::new(
        vec![StateVector::basis(1, 0).unwrap(), StateVector::basis(1, 1).unwrap()],
        vec!["z-".into(), "z+".into()],
    )
    .expect("computational basis is orthonormal")
}

pub fn x_basis() -> ProjectiveBasis {
    ProjectiveBasis::new(vec![x_plus(), x_minus()], vec!["x+".into(), "x-".into()]).expect("x basis is orthonormal")
}

/// Ordered psi+, psi-, phi+, phi-.
pub fn bell_basis() -> ProjectiveBasis {
    ProjectiveBasis::new(
        BellKind::ALL.iter().map(|&k| bell(k)).collect(),
        BellKind::ALL.iter().map(|k| k.label().to_string()).collect(),
    )
    .expect("Bell basis is orthonormal")
}

/// GHZ-type three-qubit states, ordered psi+, psi-, phi+, phi-:
/// `(|000> +- |111>)/sqrt2` and `(|011> +- |100>)/sqrt2`.
pub fn ghz_type_states() -> [StateVector; 4] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let pair = |i: usize, j: usize, sign: f64| {
        let mut v = vec![ZERO; 8];
        v[i] = re(h);
        v[j] = re(sign * h);
        StateVector::new(v).expect("normalized")
    };
    [
        pair(0b000, 0b111, 1.0),
        pair(0b000, 0b111, -1.0),
        pair(0b011, 0b100, 1.0),
        pair(0b011, 0b100, -1.0),
    ]
}

/// The four GHZ-type states completed to an orthonormal basis of the
/// three-qubit space by Gram-Schmidt over the computational basis. The
/// completion vectors are labelled `unreachable-k` and flagged as such.
pub fn ghz_type_basis() -> ProjectiveBasis {
    let mut vectors: Vec<StateVector> = ghz_type_states().to_vec();
    let mut labels: Vec<String> = ["ghz-psi+", "ghz-psi-", "ghz-phi+", "ghz-phi-"]
        .map(String::from)
        .to_vec();
    let mut reachable = vec![true; 4];
    for k in 0..8 {
        if vectors.len() == 8 {
            break;
        }
        let mut v = StateVector::basis(3, k).unwrap().into_amps();
        for u in &vectors {
            let ip = inner_raw(u.amps(), &v);
            for (x, y) in v.iter_mut().zip(u.amps()) {
                *x -= ip * y;
            }
        }
        if norm_sqr(&v) > 1e-8 {
            vectors.push(StateVector::normalized(v).unwrap());
            labels.push(format!("unreachable-{}", vectors.len() - 4));
            reachable.push(false);
        }
    }
    ProjectiveBasis::with_reachability(vectors, labels, reachable).expect("Gram-Schmidt output is orthonormal")
}

/// Positivity and completeness report for a set of POVM elements.
#[derive(Clone, Debug, Serialize)]
pub struct PovmReport {
    pub min_eigenvalues: Vec<f64>,
    pub completeness_residual: f64,
    pub kraus_residual: Option<f64>,
    pub tol: f64,
    pub passed: bool,
}

impl PovmReport {
    /// Index and value of the most negative element eigenvalue.
    pub fn worst_element(&self) -> Option<(usize, f64)> {
        self.min_eigenvalues
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

impl fmt::Display for PovmReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (completeness residual {:e}",
            if self.passed { "valid" } else { "invalid" },
            self.completeness_residual
        )?;
        if let Some((i, lo)) = self.worst_element() {
            write!(f, ", min eigenvalue {lo:e} at element {}", i + 1)?;
        }
        if let Some(k) = self.kraus_residual {
            write!(f, ", kraus residual {k:e}")?;
        }
        write!(f, ", tol {:e})", self.tol)
    }
}

/// Checks `M_i >= 0` and `sum M_i = I` to within `tol`. Non-Hermitian
/// elements report a NaN eigenvalue and fail.
pub fn validate_povm_elements(elements: &[Operator], tol: f64) -> PovmReport {
    let dim = elements.first().map(Operator::dim).unwrap_or(0);
    let min_eigenvalues: Vec<f64> = elements
        .iter()
        .map(|m| {
            if m.dim() == dim {
                min_eigenvalue_hermitian(m).unwrap_or(f64::NAN)
            } else {
                f64::NAN
            }
        })
        .collect();
    let completeness_residual = if dim == 0 || elements.iter().any(|m| m.dim() != dim) {
        f64::INFINITY
    } else {
        let sum = elements
            .iter()
            .skip(1)
            .fold(elements[0].clone(), |acc, m| acc.add(m).expect("dimensions checked"));
        sum.max_abs_diff(&Operator::identity(dim))
    };
    let passed = !elements.is_empty() && min_eigenvalues.iter().all(|&l| l >= -tol) && completeness_residual <= tol;
    PovmReport {
        min_eigenvalues,
        completeness_residual,
        kraus_residual: None,
        tol,
        passed,
    }
}

/// A validated POVM with Kraus operators `A_i`, `A_i^dag A_i = M_i`.
#[derive(Clone, Debug)]
pub struct Povm {
    dim: usize,
    elements: Vec<Operator>,
    kraus: Vec<Operator>,
    labels: Vec<String>,
}

impl Povm {
    /// Builds the POVM with canonical Kraus operators `A_i = M_i^{1/2}`.
    pub fn new(elements: Vec<Operator>, labels: Vec<String>) -> Result<Self> {
        let report = validate_povm_elements(&elements, POVM_TOL);
        if !report.passed {
            return Err(Error::InvalidPovm(report));
        }
        let kraus = elements.iter().map(Operator::sqrt_psd).collect::<Result<Vec<_>>>()?;
        Self::with_kraus(elements, kraus, labels)
    }

    pub fn with_kraus(elements: Vec<Operator>, kraus: Vec<Operator>, labels: Vec<String>) -> Result<Self> {
        if kraus.len() != elements.len() || labels.len() != elements.len() {
            return Err(Error::DimensionMismatch {
                expected: elements.len(),
                got: kraus.len(),
            });
        }
        let dim = elements.first().map(Operator::dim).unwrap_or(0);
        let povm = Self {
            dim,
            elements,
            kraus,
            labels,
        };
        let report = povm.validate(POVM_TOL);
        if !report.passed {
            return Err(Error::InvalidPovm(report));
        }
        Ok(povm)
    }

    pub fn validate(&self, tol: f64) -> PovmReport {
        let mut report = validate_povm_elements(&self.elements, tol);
        let kraus_residual = self
            .kraus
            .iter()
            .zip(&self.elements)
            .map(|(a, m)| {
                if a.dim() != m.dim() {
                    return f64::INFINITY;
                }
                a.adjoint()
                    .matmul(a)
                    .map(|aa| aa.max_abs_diff(m))
                    .unwrap_or(f64::INFINITY)
            })
            .fold(0.0, f64::max);
        report.passed &= kraus_residual <= tol;
        report.kraus_residual = Some(kraus_residual);
        report
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn elements(&self) -> &[Operator] {
        &self.elements
    }

    pub fn kraus(&self) -> &[Operator] {
        &self.kraus
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// One outcome of a measurement on a full register.
#[derive(Clone, Debug)]
pub struct OutcomeSample {
    pub index: usize,
    pub label: String,
    pub probability: f64,
    pub post_state: StateVector,
}

/// Common interface of projective bases and POVMs.
pub trait Measurement {
    fn n_outcomes(&self) -> usize;

    /// Dimension of the measured subsystem.
    fn target_dim(&self) -> usize;

    fn label(&self, i: usize) -> &str;

    /// Born probability of outcome `i` and the unnormalized post-measurement
    /// register `K_i s` (identity on non-targets).
    fn branch(&self, amps: &[Complex], n_qubits: usize, targets: &[usize], i: usize) -> Result<(f64, Vec<Complex>)>;
}

fn check_dims(target_dim: usize, n_qubits: usize, amps: &[Complex], targets: &[usize]) -> Result<()> {
    if amps.len() != 1 << n_qubits {
        return Err(Error::DimensionMismatch {
            expected: 1 << n_qubits,
            got: amps.len(),
        });
    }
    if target_dim != 1 << targets.len() {
        return Err(Error::DimensionMismatch {
            expected: target_dim,
            got: 1 << targets.len(),
        });
    }
    Ok(())
}

impl Measurement for ProjectiveBasis {
    fn n_outcomes(&self) -> usize {
        self.vectors.len()
    }

    fn target_dim(&self) -> usize {
        self.dim
    }

    fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    fn branch(&self, amps: &[Complex], n_qubits: usize, targets: &[usize], i: usize) -> Result<(f64, Vec<Complex>)> {
        check_dims(self.dim, n_qubits, amps, targets)?;
        let split = RegisterSplit::new(n_qubits, targets)?;
        let v = self.vectors[i].amps();
        let mut post = vec![ZERO; amps.len()];
        let mut prob = 0.0;
        for r in 0..split.rest_dim {
            let overlap: Complex = (0..split.target_dim)
                .map(|t| v[t].conj() * amps[split.full(t, r)])
                .sum();
            prob += overlap.norm_sqr();
            for t in 0..split.target_dim {
                post[split.full(t, r)] = v[t] * overlap;
            }
        }
        Ok((prob, post))
    }
}

impl Measurement for Povm {
    fn n_outcomes(&self) -> usize {
        self.elements.len()
    }

    fn target_dim(&self) -> usize {
        self.dim
    }

    fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    fn branch(&self, amps: &[Complex], n_qubits: usize, targets: &[usize], i: usize) -> Result<(f64, Vec<Complex>)> {
        check_dims(self.dim, n_qubits, amps, targets)?;
        let measured = apply_matrix(amps, n_qubits, &self.elements[i], targets)?;
        let prob = inner_raw(amps, &measured).re.clamp(0.0, 1.0);
        let post = apply_matrix(amps, n_qubits, &self.kraus[i], targets)?;
        Ok((prob, post))
    }
}

/// Exact outcome probabilities of measuring `targets` of `s`.
pub fn outcome_distribution<M: Measurement + ?Sized>(s: &StateVector, m: &M, targets: &[usize]) -> Result<Vec<f64>> {
    (0..m.n_outcomes())
        .map(|i| m.branch(s.amps(), s.n_qubits(), targets, i).map(|(p, _)| p))
        .collect()
}

/// Inverse-CDF draw from `probs` with one uniform variate. Entries below
/// [`DEGENERATE_PROB`] are never selected; the last selectable entry absorbs
/// any rounding shortfall.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let total: f64 = probs.iter().filter(|&&p| p >= DEGENERATE_PROB).sum();
    let last = probs
        .iter()
        .rposition(|&p| p >= DEGENERATE_PROB)
        .expect("at least one outcome has nonzero probability");
    let target = u * total;
    let mut cum = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        if p < DEGENERATE_PROB {
            continue;
        }
        cum += p;
        if i == last || target < cum {
            return i;
        }
    }
    last
}

/// Samples one outcome and returns it with the renormalized register.
pub fn measure<M: Measurement + ?Sized, R: Rng + ?Sized>(
    s: &StateVector,
    m: &M,
    targets: &[usize],
    rng: &mut R,
) -> Result<OutcomeSample> {
    let probs = outcome_distribution(s, m, targets)?;
    let index = sample_index(&probs, rng);
    let (probability, post) = m.branch(s.amps(), s.n_qubits(), targets, index)?;
    Ok(OutcomeSample {
        index,
        label: m.label(index).to_string(),
        probability,
        post_state: StateVector::normalized(post)?,
    })
}

pub fn measure_projective<R: Rng + ?Sized>(
    s: &StateVector,
    basis: &ProjectiveBasis,
    targets: &[usize],
    rng: &mut R,
) -> Result<OutcomeSample> {
    measure(s, basis, targets, rng)
}

pub fn measure_povm<R: Rng + ?Sized>(
    s: &StateVector,
    povm: &Povm,
    targets: &[usize],
    rng: &mut R,
) -> Result<OutcomeSample> {
    measure(s, povm, targets, rng)
}

/// Standalone validity report for a POVM.
pub fn validate_povm(povm: &Povm, tol: f64) -> PovmReport {
    povm.validate(tol)
}
