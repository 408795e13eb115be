//! End-to-end teleportation of one qubit from Alice to Charlie.
//!
//! Registers are four qubits. Schemes with a Bob use (U, A, B, C): Alice
//! Bell-measures (U, A), Bob measures B, Charlie holds C. Two-party schemes
//! use (U, A, A', C) with Alice measuring all of (U, A, A').
//!
//! A [`PreparedProtocol`] can either sample one run ([`PreparedProtocol::run`])
//! or enumerate every measurement branch exactly
//! ([`PreparedProtocol::distribution`]). Both go through the same branch
//! evaluation, so the sampled and enumerated views cannot drift apart.

use std::fmt;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measurement::{
    bell_basis, ghz_type_basis, outcome_distribution, sample_index, x_basis, z_basis, Measurement, Povm,
    ProjectiveBasis, DEGENERATE_PROB,
};
use crate::qmath::{
    apply_matrix, partial_trace_raw, pauli_x, pauli_z, tensor, Complex, DensityMatrix, Operator, StateVector,
};
use crate::states::{ghz, w, w_general, GeneralWAmplitudes};
use crate::wpovm::{build_w_povm, WPovmParams};

/// Charlie's recovery unitaries. `XZ` is the product `sigma_x sigma_z`
/// (sigma_z acts first).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Correction {
    I,
    X,
    Z,
    XZ,
}

impl Correction {
    pub fn operator(self) -> Operator {
        match self {
            Correction::I => Operator::identity(2),
            Correction::X => pauli_x(),
            Correction::Z => pauli_z(),
            Correction::XZ => pauli_x().matmul(&pauli_z()).expect("2x2 product"),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Correction::I => "I",
            Correction::X => "X",
            Correction::Z => "Z",
            Correction::XZ => "XZ",
        }
    }
}

impl fmt::Display for Correction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Map from measurement records to Charlie's correction. Records without an
/// entry are failures (inconclusive).
#[derive(Clone, Debug, Default)]
pub struct CorrectionTable {
    entries: Vec<(String, Option<String>, Correction)>,
}

impl CorrectionTable {
    fn from_rows(rows: &[(&str, Option<&str>, Correction)]) -> Self {
        Self {
            entries: rows
                .iter()
                .map(|&(a, b, c)| (a.to_string(), b.map(str::to_string), c))
                .collect(),
        }
    }

    pub fn get(&self, alice: &str, bob: Option<&str>) -> Option<Correction> {
        self.entries
            .iter()
            .find(|(a, b, _)| a == alice && b.as_deref() == bob)
            .map(|e| e.2)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, Option<&str>, Correction)> {
        self.entries.iter().map(|(a, b, c)| (a.as_str(), b.as_deref(), *c))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// GHZ channel, Alice Bell measurement, Bob in the x basis.
pub fn ghz_bm_table() -> CorrectionTable {
    use Correction::*;
    CorrectionTable::from_rows(&[
        ("psi+", Some("x+"), I),
        ("psi+", Some("x-"), Z),
        ("phi+", Some("x+"), X),
        ("phi+", Some("x-"), XZ),
        ("psi-", Some("x+"), Z),
        ("psi-", Some("x-"), I),
        ("phi-", Some("x+"), XZ),
        ("phi-", Some("x-"), X),
    ])
}

/// GHZ channel with Alice holding two of its qubits.
pub fn ghz_two_qubit_table() -> CorrectionTable {
    use Correction::*;
    CorrectionTable::from_rows(&[
        ("ghz-psi+", None, I),
        ("ghz-psi-", None, Z),
        ("ghz-phi+", None, X),
        ("ghz-phi-", None, XZ),
    ])
}

/// W channel with Bell measurement; only Bob's `z-` is recoverable.
pub fn w_bm_table() -> CorrectionTable {
    use Correction::*;
    CorrectionTable::from_rows(&[
        ("psi+", Some("z-"), X),
        ("psi-", Some("z-"), XZ),
        ("phi+", Some("z-"), I),
        ("phi-", Some("z-"), Z),
    ])
}

/// Asymmetric W-POVM: outcomes M1..M4 leave Charlie in `a|0>+b|1>`,
/// `a|0>-b|1>`, `b|0>+a|1>`, `b|0>-a|1>`.
pub fn w_povm_table() -> CorrectionTable {
    use Correction::*;
    CorrectionTable::from_rows(&[("M1", None, I), ("M2", None, Z), ("M3", None, X), ("M4", None, XZ)])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "protocol", rename_all = "kebab-case")]
pub enum Protocol {
    GhzBm,
    #[serde(rename = "ghz-2q")]
    GhzTwoQubit,
    WBm,
    WPovm(WPovmParams),
    WGeneralBm(GeneralWAmplitudes),
}

impl Protocol {
    pub fn name(&self) -> &'static str {
        match self {
            Protocol::GhzBm => "ghz-bm",
            Protocol::GhzTwoQubit => "ghz-2q",
            Protocol::WBm => "w-bm",
            Protocol::WPovm(_) => "w-povm",
            Protocol::WGeneralBm(_) => "w-general-bm",
        }
    }

    /// Bits sent to Charlie: two from a Bell measurement plus one from Bob,
    /// two for the four GHZ-type outcomes, three for the five POVM outcomes.
    pub fn classical_bits(&self) -> u32 {
        match self {
            Protocol::GhzTwoQubit => 2,
            Protocol::GhzBm | Protocol::WBm | Protocol::WPovm(_) | Protocol::WGeneralBm(_) => 3,
        }
    }

    pub fn prepare(&self) -> Result<PreparedProtocol> {
        PreparedProtocol::new(*self)
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug)]
enum AliceMeasurement {
    Projective(ProjectiveBasis),
    Povm(Povm),
}

impl AliceMeasurement {
    fn as_measurement(&self) -> &dyn Measurement {
        match self {
            AliceMeasurement::Projective(b) => b,
            AliceMeasurement::Povm(p) => p,
        }
    }
}

const CHARLIE: usize = 3;

/// A protocol with its channel state and measurements built once.
#[derive(Clone, Debug)]
pub struct PreparedProtocol {
    protocol: Protocol,
    channel: StateVector,
    alice: AliceMeasurement,
    alice_targets: Vec<usize>,
    bob: Option<(ProjectiveBasis, usize)>,
    table: CorrectionTable,
    corrections: [Operator; 4],
}

/// One teleportation run.
#[derive(Clone, Debug)]
pub struct ProtocolOutcome {
    pub alice_outcome: String,
    pub bob_outcome: Option<String>,
    pub conclusive: bool,
    pub correction: Option<Correction>,
    pub classical_bits: u32,
    /// Joint Born probability of the realized measurement record.
    pub probability: f64,
    /// Charlie's qubit after correction (dominant eigenvector of `charlie_rho`).
    pub charlie_state: StateVector,
    pub charlie_rho: DensityMatrix,
    /// `<phi_in|charlie_rho|phi_in>`.
    pub fidelity: f64,
}

/// One branch of the exact outcome tree.
#[derive(Clone, Debug)]
pub struct Branch {
    pub alice: String,
    pub bob: Option<String>,
    pub probability: f64,
    pub conclusive: bool,
    pub correction: Option<Correction>,
    /// Charlie's normalized state after correction; `None` for branches of
    /// zero probability.
    pub charlie: Option<DensityMatrix>,
    pub fidelity: Option<f64>,
}

/// Exact distribution over measurement records for one input.
#[derive(Clone, Debug)]
pub struct OutcomeDistribution {
    pub branches: Vec<Branch>,
}

impl OutcomeDistribution {
    pub fn total_probability(&self) -> f64 {
        self.branches.iter().map(|b| b.probability).sum()
    }

    pub fn success_probability(&self) -> f64 {
        self.branches
            .iter()
            .filter(|b| b.conclusive)
            .map(|b| b.probability)
            .sum()
    }

    pub fn get(&self, alice: &str, bob: Option<&str>) -> Option<&Branch> {
        self.branches
            .iter()
            .find(|b| b.alice == alice && b.bob.as_deref() == bob)
    }

    /// Probability that Alice's record is `alice`, summed over Bob.
    pub fn alice_marginal(&self, alice: &str) -> f64 {
        self.branches
            .iter()
            .filter(|b| b.alice == alice)
            .map(|b| b.probability)
            .sum()
    }

    /// `sum_i p_i f_i` over conclusive branches.
    pub fn conclusive_part(&self) -> f64 {
        self.weighted_fidelity(true)
    }

    pub fn inconclusive_part(&self) -> f64 {
        self.weighted_fidelity(false)
    }

    pub fn average_fidelity(&self) -> f64 {
        self.conclusive_part() + self.inconclusive_part()
    }

    fn weighted_fidelity(&self, conclusive: bool) -> f64 {
        self.branches
            .iter()
            .filter(|b| b.conclusive == conclusive)
            .map(|b| b.probability * b.fidelity.unwrap_or(0.0))
            .sum()
    }
}

fn check_input(input: &StateVector) -> Result<()> {
    if input.n_qubits() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: input.dim(),
        });
    }
    Ok(())
}

impl PreparedProtocol {
    pub fn new(protocol: Protocol) -> Result<Self> {
        let bm = |channel: StateVector, bob: ProjectiveBasis, table| PreparedProtocol {
            protocol,
            channel,
            alice: AliceMeasurement::Projective(bell_basis()),
            alice_targets: vec![0, 1],
            bob: Some((bob, 2)),
            table,
            corrections: Self::correction_ops(),
        };
        Ok(match protocol {
            Protocol::GhzBm => bm(ghz(), x_basis(), ghz_bm_table()),
            Protocol::WBm => bm(w(), z_basis(), w_bm_table()),
            Protocol::WGeneralBm(amps) => bm(w_general(amps), z_basis(), w_bm_table()),
            Protocol::GhzTwoQubit => PreparedProtocol {
                protocol,
                channel: ghz(),
                alice: AliceMeasurement::Projective(ghz_type_basis()),
                alice_targets: vec![0, 1, 2],
                bob: None,
                table: ghz_two_qubit_table(),
                corrections: Self::correction_ops(),
            },
            Protocol::WPovm(params) => PreparedProtocol {
                protocol,
                channel: w(),
                alice: AliceMeasurement::Povm(build_w_povm(&params)?),
                alice_targets: vec![0, 1, 2],
                bob: None,
                table: w_povm_table(),
                corrections: Self::correction_ops(),
            },
        })
    }

    fn correction_ops() -> [Operator; 4] {
        [Correction::I, Correction::X, Correction::Z, Correction::XZ].map(Correction::operator)
    }

    fn correction_op(&self, c: Correction) -> &Operator {
        &self.corrections[match c {
            Correction::I => 0,
            Correction::X => 1,
            Correction::Z => 2,
            Correction::XZ => 3,
        }]
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol
    }

    pub fn table(&self) -> &CorrectionTable {
        &self.table
    }

    /// `|phi>_U (x) channel`.
    pub fn total_state(&self, input: &StateVector) -> Result<StateVector> {
        check_input(input)?;
        tensor(input, &self.channel)
    }

    /// Looks up the correction, applies it to Charlie's qubit of the
    /// (unnormalized) post-measurement register and reduces to Charlie.
    fn settle(
        &self,
        input: &StateVector,
        post: &[Complex],
        alice: &str,
        bob: Option<&str>,
    ) -> Result<(Option<Correction>, DensityMatrix, f64)> {
        let correction = self.table.get(alice, bob);
        let corrected;
        let amps = match correction {
            Some(c) => {
                corrected = apply_matrix(post, 4, self.correction_op(c), &[CHARLIE])?;
                &corrected[..]
            }
            None => post,
        };
        let (d, raw) = partial_trace_raw(amps, 4, &[CHARLIE])?;
        let rho = DensityMatrix::from_unnormalized(d, raw)?;
        let fidelity = rho.expectation(input)?.clamp(0.0, 1.0);
        Ok((correction, rho, fidelity))
    }

    /// Samples one run with Born-rule measurements drawn from `rng`.
    pub fn run<R: Rng + ?Sized>(&self, input: &StateVector, rng: &mut R) -> Result<ProtocolOutcome> {
        let total = self.total_state(input)?;
        let alice = self.alice.as_measurement();
        let probs = outcome_distribution(&total, alice, &self.alice_targets)?;
        let ai = sample_index(&probs, rng);
        let (pa, post) = alice.branch(total.amps(), 4, &self.alice_targets, ai)?;
        let mut state = StateVector::normalized(post)?;
        let mut probability = pa;

        let bob_label = match &self.bob {
            Some((basis, q)) => {
                let probs = outcome_distribution(&state, basis, &[*q])?;
                let bi = sample_index(&probs, rng);
                let (pb, post) = basis.branch(state.amps(), 4, &[*q], bi)?;
                state = StateVector::normalized(post)?;
                probability *= pb;
                Some(basis.label(bi).to_string())
            }
            None => None,
        };

        let alice_label = alice.label(ai).to_string();
        let (correction, rho, fidelity) = self.settle(input, state.amps(), &alice_label, bob_label.as_deref())?;
        Ok(ProtocolOutcome {
            alice_outcome: alice_label,
            bob_outcome: bob_label,
            conclusive: correction.is_some(),
            correction,
            classical_bits: self.protocol.classical_bits(),
            probability,
            charlie_state: rho.dominant_state(),
            charlie_rho: rho,
            fidelity,
        })
    }

    /// Every measurement record with its exact probability and Charlie's
    /// corrected state.
    pub fn distribution(&self, input: &StateVector) -> Result<OutcomeDistribution> {
        let total = self.total_state(input)?;
        let alice = self.alice.as_measurement();
        let mut branches = Vec::new();
        for ai in 0..alice.n_outcomes() {
            let alice_label = alice.label(ai);
            let (pa, post) = alice.branch(total.amps(), 4, &self.alice_targets, ai)?;
            let bob_records: Vec<(Option<String>, f64, Option<Vec<Complex>>)> = match &self.bob {
                None => vec![(None, pa, (pa >= DEGENERATE_PROB).then_some(post))],
                Some((basis, q)) => {
                    let normalized = (pa >= DEGENERATE_PROB)
                        .then(|| StateVector::normalized(post))
                        .transpose()?;
                    (0..basis.n_outcomes())
                        .map(|bi| {
                            let label = Some(basis.label(bi).to_string());
                            match &normalized {
                                None => Ok((label, 0.0, None)),
                                Some(s) => {
                                    let (pb, post) = basis.branch(s.amps(), 4, &[*q], bi)?;
                                    let p = pa * pb;
                                    Ok((label, p, (p >= DEGENERATE_PROB).then_some(post)))
                                }
                            }
                        })
                        .collect::<Result<_>>()?
                }
            };
            for (bob, p, post) in bob_records {
                let correction = self.table.get(alice_label, bob.as_deref());
                let (charlie, fidelity) = match post {
                    Some(post) => {
                        let (_, rho, f) = self.settle(input, &post, alice_label, bob.as_deref())?;
                        (Some(rho), Some(f))
                    }
                    None => (None, None),
                };
                branches.push(Branch {
                    alice: alice_label.to_string(),
                    bob,
                    probability: if charlie.is_some() { p } else { 0.0 },
                    conclusive: correction.is_some(),
                    correction,
                    charlie,
                    fidelity,
                });
            }
        }
        Ok(OutcomeDistribution { branches })
    }
}

pub fn teleport_ghz_bm<R: Rng + ?Sized>(input: &StateVector, rng: &mut R) -> Result<ProtocolOutcome> {
    Protocol::GhzBm.prepare()?.run(input, rng)
}

pub fn teleport_ghz_two_qubit<R: Rng + ?Sized>(input: &StateVector, rng: &mut R) -> Result<ProtocolOutcome> {
    Protocol::GhzTwoQubit.prepare()?.run(input, rng)
}

pub fn teleport_w_bm<R: Rng + ?Sized>(input: &StateVector, rng: &mut R) -> Result<ProtocolOutcome> {
    Protocol::WBm.prepare()?.run(input, rng)
}

/// Exact eight-branch distribution of the W Bell-measurement scheme.
pub fn w_bm_distribution(input: &StateVector) -> Result<OutcomeDistribution> {
    Protocol::WBm.prepare()?.distribution(input)
}

pub fn teleport_w_povm<R: Rng + ?Sized>(
    input: &StateVector,
    params: &WPovmParams,
    rng: &mut R,
) -> Result<ProtocolOutcome> {
    Protocol::WPovm(*params).prepare()?.run(input, rng)
}

pub fn teleport_w_general_bm<R: Rng + ?Sized>(
    input: &StateVector,
    amps: &GeneralWAmplitudes,
    rng: &mut R,
) -> Result<ProtocolOutcome> {
    Protocol::WGeneralBm(*amps).prepare()?.run(input, rng)
}
