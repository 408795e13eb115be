//! Average-fidelity estimation over uniformly random input qubits.
//!
//! Two estimators are provided. [`avg_fidelity_mc`] samples inputs from the
//! Bloch sphere and outcomes by the Born rule, one independent ChaCha stream
//! per trial, so results do not depend on how trials are scheduled.
//! [`avg_fidelity_grid`] integrates the exact branch distribution over a
//! Gauss-Legendre grid in `cos(theta)` times a uniform grid in `phi`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::protocols::{PreparedProtocol, Protocol};
use crate::qmath::{DensityMatrix, StateVector};
use crate::states::{haar_random_qubit, unknown_qubit, BlochAngles};
use crate::wpovm::{lambda_max, m5_min_eigenvalue, WPovmParams, LAMBDA_PLATEAU};

pub const DEFAULT_GRID: (usize, usize) = (64, 64);

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::default();
        iter.into_iter().for_each(|x| s.add(x));
        s
    }
}

/// `<phi|rho|phi>` for a single-qubit target.
pub fn state_fidelity(target: &StateVector, rho: &DensityMatrix) -> Result<f64> {
    if target.dim() != 2 || rho.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: if target.dim() != 2 { target.dim() } else { rho.dim() },
        });
    }
    Ok(rho.expectation(target)?.clamp(0.0, 1.0))
}

/// `|<phi|psi>|^2` for single-qubit pure states.
pub fn pure_state_fidelity(target: &StateVector, delivered: &StateVector) -> Result<f64> {
    state_fidelity(target, &delivered.density())
}

/// Aggregated results of many runs (or of a quadrature).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialStats {
    pub n_trials: usize,
    pub success_rate: f64,
    pub success_stderr: f64,
    pub avg_fidelity: f64,
    pub fidelity_stderr: f64,
    /// Mean of `fidelity * [conclusive]`.
    pub conclusive_part: f64,
    pub conclusive_stderr: f64,
    /// Mean of `fidelity * [inconclusive]`.
    pub inconclusive_part: f64,
    pub inconclusive_stderr: f64,
    /// Mean fidelity conditioned on an inconclusive outcome, if any occurred.
    pub inconclusive_fidelity: Option<f64>,
}

impl TrialStats {
    /// Conditional inconclusive fidelity minus the random-guess value 1/2.
    pub fn inconclusive_residual(&self) -> Option<f64> {
        self.inconclusive_fidelity.map(|f| f - 0.5)
    }
}

/// Where each trial's input qubit comes from.
#[derive(Clone, Copy, Debug)]
pub enum InputSource {
    Fixed(BlochAngles),
    Haar,
}

/// One protocol run, flattened for output.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub theta: f64,
    pub phi: f64,
    pub alice_outcome: String,
    pub bob_outcome: Option<String>,
    pub conclusive: bool,
    pub fidelity: f64,
    pub classical_bits: u32,
}

/// Random stream for trial `trial` under `master_seed`.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

/// Runs `n_trials` independent trials in parallel; records are returned in
/// trial order.
pub fn run_trials(
    prepared: &PreparedProtocol,
    source: InputSource,
    n_trials: usize,
    master_seed: u64,
) -> Result<Vec<TrialRecord>> {
    (0..n_trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(master_seed, trial);
            let (angles, input) = match source {
                InputSource::Fixed(angles) => (angles, unknown_qubit(angles)),
                InputSource::Haar => haar_random_qubit(&mut rng),
            };
            let out = prepared.run(&input, &mut rng)?;
            Ok(TrialRecord {
                trial,
                theta: angles.theta(),
                phi: angles.phi(),
                alice_outcome: out.alice_outcome,
                bob_outcome: out.bob_outcome,
                conclusive: out.conclusive,
                fidelity: out.fidelity,
                classical_bits: out.classical_bits,
            })
        })
        .collect()
}

fn mean_and_stderr(xs: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let mean = xs.clone().collect::<CompensatedSum>().value() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.map(|x| (x - mean).powi(2)).collect::<CompensatedSum>().value() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Sample means with standard errors `s / sqrt(n)`, summed in record order.
pub fn summarize(records: &[TrialRecord]) -> Result<TrialStats> {
    let n = records.len();
    if n == 0 {
        return Err(Error::InvalidParameter("no trials to summarize".into()));
    }
    let succ = records.iter().map(|r| if r.conclusive { 1.0 } else { 0.0 });
    let fid = records.iter().map(|r| r.fidelity);
    let con = records.iter().map(|r| if r.conclusive { r.fidelity } else { 0.0 });
    let inc = records.iter().map(|r| if r.conclusive { 0.0 } else { r.fidelity });
    let (success_rate, success_stderr) = mean_and_stderr(succ, n);
    let (avg_fidelity, fidelity_stderr) = mean_and_stderr(fid, n);
    let (conclusive_part, conclusive_stderr) = mean_and_stderr(con, n);
    let (inconclusive_part, inconclusive_stderr) = mean_and_stderr(inc.clone(), n);
    let n_inc = records.iter().filter(|r| !r.conclusive).count();
    let inconclusive_fidelity = (n_inc > 0).then(|| inc.collect::<CompensatedSum>().value() / n_inc as f64);
    Ok(TrialStats {
        n_trials: n,
        success_rate,
        success_stderr,
        avg_fidelity,
        fidelity_stderr,
        conclusive_part,
        conclusive_stderr,
        inconclusive_part,
        inconclusive_stderr,
        inconclusive_fidelity,
    })
}

/// Monte Carlo average fidelity over Haar-random inputs.
pub fn avg_fidelity_mc(protocol: &Protocol, n_trials: usize, master_seed: u64) -> Result<TrialStats> {
    if n_trials == 0 {
        return Err(Error::InvalidParameter("n_trials must be at least 1".into()));
    }
    let prepared = protocol.prepare()?;
    summarize(&run_trials(&prepared, InputSource::Haar, n_trials, master_seed)?)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // P_n(x) and P_n'(x) by the three-term recurrence
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        nodes[n - 1 - i] = -x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Exact average over a product quadrature grid of inputs. Standard errors
/// are reported as zero.
pub fn avg_fidelity_grid(protocol: &Protocol, n_theta: usize, n_phi: usize) -> Result<TrialStats> {
    if n_theta == 0 || n_phi == 0 {
        return Err(Error::InvalidParameter(
            "grid must have at least one node per axis".into(),
        ));
    }
    let prepared = protocol.prepare()?;
    let (nodes, weights) = gauss_legendre(n_theta);
    let per_node: Vec<[f64; 4]> = nodes
        .par_iter()
        .zip(weights.par_iter())
        .flat_map_iter(|(&x, &wt)| {
            let prepared = &prepared;
            (0..n_phi).map(move |j| -> Result<[f64; 4]> {
                let phi = std::f64::consts::TAU * j as f64 / n_phi as f64;
                let angles = BlochAngles::new(x.clamp(-1.0, 1.0).acos(), phi)?;
                let d = prepared.distribution(&unknown_qubit(angles))?;
                let scale = wt / 2.0 / n_phi as f64;
                let p_fail = 1.0 - d.success_probability();
                Ok([
                    scale * d.success_probability(),
                    scale * d.conclusive_part(),
                    scale * d.inconclusive_part(),
                    scale * p_fail,
                ])
            })
        })
        .collect::<Result<_>>()?;
    let col = |k: usize| per_node.iter().map(|v| v[k]).collect::<CompensatedSum>().value();
    let (success_rate, conclusive_part, inconclusive_part, fail_rate) = (col(0), col(1), col(2), col(3));
    Ok(TrialStats {
        n_trials: n_theta * n_phi,
        success_rate,
        success_stderr: 0.0,
        avg_fidelity: conclusive_part + inconclusive_part,
        fidelity_stderr: 0.0,
        conclusive_part,
        conclusive_stderr: 0.0,
        inconclusive_part,
        inconclusive_stderr: 0.0,
        inconclusive_fidelity: (fail_rate > 1e-12).then(|| inconclusive_part / fail_rate),
    })
}

/// Schemes with a closed-form average fidelity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AnalyticScheme {
    WBm,
    /// `lambda` in `[0, 2/3]`.
    WPovm {
        lambda: f64,
    },
}

/// `5/6` for the Bell-measurement scheme, `1/2 + lambda/2` for the POVM
/// scheme. Both assume inconclusive outcomes average to fidelity 1/2.
pub fn avg_fidelity_analytic(scheme: AnalyticScheme) -> Result<f64> {
    match scheme {
        AnalyticScheme::WBm => Ok(5.0 / 6.0),
        AnalyticScheme::WPovm { lambda } => {
            if !(0.0..=LAMBDA_PLATEAU + 1e-12).contains(&lambda) {
                return Err(Error::InvalidParameter(format!(
                    "lambda = {lambda} outside the feasible range [0, 2/3]"
                )));
            }
            Ok(0.5 + 0.5 * lambda)
        }
    }
}

/// Closed-form average fidelity of a protocol where one is known.
pub fn analytic_fidelity(protocol: &Protocol) -> Option<f64> {
    match protocol {
        Protocol::GhzBm | Protocol::GhzTwoQubit => Some(1.0),
        Protocol::WBm => avg_fidelity_analytic(AnalyticScheme::WBm).ok(),
        Protocol::WPovm(p) => avg_fidelity_analytic(AnalyticScheme::WPovm { lambda: p.lambda }).ok(),
        Protocol::WGeneralBm(_) => None,
    }
}

/// Closed-form success probability where one is known.
pub fn analytic_success(protocol: &Protocol) -> Option<f64> {
    match protocol {
        Protocol::GhzBm | Protocol::GhzTwoQubit => Some(1.0),
        Protocol::WBm => Some(2.0 / 3.0),
        Protocol::WPovm(p) => Some(p.lambda),
        Protocol::WGeneralBm(_) => None,
    }
}

/// `steps` evenly spaced points from `from` to `to` inclusive.
pub fn linspace(from: f64, to: f64, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::InvalidParameter("grid needs at least one step".into()));
    }
    if !from.is_finite() || !to.is_finite() {
        return Err(Error::InvalidParameter("grid bounds must be finite".into()));
    }
    if steps == 1 {
        return Ok(vec![from]);
    }
    let h = (to - from) / (steps - 1) as f64;
    Ok((0..steps)
        .map(|i| if i == steps - 1 { to } else { from + h * i as f64 })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    A,
    Lambda,
}

/// One grid point of a W-POVM sweep. Monte Carlo columns are empty for
/// infeasible points.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: f64,
    pub a: f64,
    pub a_prime: f64,
    pub lambda: f64,
    pub feasible: bool,
    pub lambda_max: Option<f64>,
    pub m5_min_eigenvalue: Option<f64>,
    pub analytic_fidelity: Option<f64>,
    pub mc_fidelity: Option<f64>,
    pub stderr: Option<f64>,
    pub success_rate: Option<f64>,
}

/// Sweeps the W-POVM scheme over `values` of `param`, holding the other
/// parameters at `base = (a, a', lambda)`. In an `a` sweep `a'` follows `a`.
/// Point `k` uses master seed `master_seed + k`.
pub fn sweep(
    base: (f64, f64, f64),
    param: SweepParam,
    values: &[f64],
    n_trials: usize,
    master_seed: u64,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("empty sweep grid".into()));
    }
    values
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let (a, a_prime, lambda) = match param {
                SweepParam::A => (v, v, base.2),
                SweepParam::Lambda => (base.0, base.1, v),
            };
            let lmax = lambda_max(a).ok().zip(lambda_max(a_prime).ok()).map(|(x, y)| x.min(y));
            let params = WPovmParams::new(a, a_prime, lambda).ok();
            let min_eig = params.as_ref().and_then(|p| m5_min_eigenvalue(p).ok());
            let protocol = params.map(Protocol::WPovm);
            let prepared_ok = protocol.as_ref().map(|p| p.prepare().is_ok()).unwrap_or(false);
            let mut row = SweepRow {
                param: v,
                a,
                a_prime,
                lambda,
                feasible: prepared_ok,
                lambda_max: lmax,
                m5_min_eigenvalue: min_eig,
                analytic_fidelity: None,
                mc_fidelity: None,
                stderr: None,
                success_rate: None,
            };
            if let (true, Some(protocol)) = (prepared_ok, protocol) {
                let stats = avg_fidelity_mc(&protocol, n_trials, master_seed.wrapping_add(k as u64))?;
                row.analytic_fidelity = analytic_fidelity(&protocol);
                row.mc_fidelity = Some(stats.avg_fidelity);
                row.stderr = Some(stats.fidelity_stderr);
                row.success_rate = Some(stats.success_rate);
            }
            Ok(row)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::re;
    use crate::states::{x_plus, GeneralWAmplitudes};

    #[test]
    fn fidelity_examples() {
        let zm = StateVector::basis(1, 0).unwrap();
        let zp = StateVector::basis(1, 1).unwrap();
        assert!((pure_state_fidelity(&zm, &zm).unwrap() - 1.0).abs() < 1e-12);
        assert!(pure_state_fidelity(&zm, &zp).unwrap().abs() < 1e-12);
        let mixed = DensityMatrix::new(2, vec![re(0.5), re(0.0), re(0.0), re(0.5)]).unwrap();
        assert!((state_fidelity(&x_plus(), &mixed).unwrap() - 0.5).abs() < 1e-12);
        let two = StateVector::basis(2, 0).unwrap();
        assert!(state_fidelity(&two, &mixed).is_err());
    }

    #[test]
    fn compensated_sum_is_accurate() {
        let s: CompensatedSum = [1.0, 1e100, 1.0, -1e100].into_iter().collect();
        assert_eq!(s.value(), 2.0);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(64);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
        let int = |f: &dyn Fn(f64) -> f64| x.iter().zip(&w).map(|(&x, &w)| w * f(x)).sum::<f64>();
        assert!((int(&|t| t * t) - 2.0 / 3.0).abs() < 1e-13);
        assert!((int(&|t| t.powi(10)) - 2.0 / 11.0).abs() < 1e-13);
        let (x3, w3) = gauss_legendre(3);
        assert!((x3[0] - (0.6f64).sqrt()).abs() < 1e-15 && x3[1].abs() < 1e-15);
        assert!((w3[1] - 8.0 / 9.0).abs() < 1e-15);
        let (x1, w1) = gauss_legendre(1);
        assert_eq!((x1[0], w1[0]), (0.0, 2.0));
    }

    #[test]
    fn grid_reproduces_closed_forms() {
        let g = avg_fidelity_grid(&Protocol::WBm, 16, 8).unwrap();
        assert!((g.avg_fidelity - 5.0 / 6.0).abs() < 1e-12);
        assert!((g.conclusive_part - 2.0 / 3.0).abs() < 1e-12);
        assert!((g.inconclusive_part - 1.0 / 6.0).abs() < 1e-12);
        assert!((g.inconclusive_fidelity.unwrap() - 0.5).abs() < 1e-12);
        let g = avg_fidelity_grid(&Protocol::GhzBm, 8, 4).unwrap();
        assert!((g.avg_fidelity - 1.0).abs() < 1e-12);
        assert_eq!(g.inconclusive_fidelity, None);
    }

    #[test]
    fn analytic_examples() {
        assert!((avg_fidelity_analytic(AnalyticScheme::WBm).unwrap() - 0.833_333_333_333).abs() < 1e-12);
        let f = avg_fidelity_analytic(AnalyticScheme::WPovm { lambda: 2.0 / 3.0 }).unwrap();
        assert!((f - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(
            avg_fidelity_analytic(AnalyticScheme::WPovm { lambda: 0.0 }).unwrap(),
            0.5
        );
        assert!(avg_fidelity_analytic(AnalyticScheme::WPovm { lambda: 0.7 }).is_err());
        let general = Protocol::WGeneralBm(GeneralWAmplitudes::equal());
        assert_eq!(analytic_fidelity(&general), None);
    }

    #[test]
    fn mc_is_deterministic_and_decomposes() {
        let a = avg_fidelity_mc(&Protocol::WBm, 2000, 9).unwrap();
        let b = avg_fidelity_mc(&Protocol::WBm, 2000, 9).unwrap();
        assert_eq!(a, b);
        assert!((a.avg_fidelity - (a.conclusive_part + a.inconclusive_part)).abs() < 1e-12);
        let c = avg_fidelity_mc(&Protocol::WBm, 2000, 10).unwrap();
        assert_ne!(a, c);
        assert!(avg_fidelity_mc(&Protocol::WBm, 0, 0).is_err());
    }

    #[test]
    fn ghz_mc_is_exact() {
        let s = avg_fidelity_mc(&Protocol::GhzBm, 500, 1).unwrap();
        assert!((s.avg_fidelity - 1.0).abs() < 1e-12);
        assert!(s.fidelity_stderr < 1e-12);
        assert_eq!(s.success_rate, 1.0);
    }

    #[test]
    fn linspace_examples() {
        let g = linspace(0.1, 2.0, 20).unwrap();
        assert_eq!(g.len(), 20);
        assert!((g[1] - 0.2).abs() < 1e-12 && g[19] == 2.0);
        assert_eq!(linspace(1.0, 5.0, 1).unwrap(), vec![1.0]);
        assert!(linspace(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn sweep_flags_infeasible_points() {
        let rows = sweep((2.0, 2.0, 0.6), SweepParam::Lambda, &[0.05, 0.6], 200, 0).unwrap();
        assert!(rows[0].feasible && rows[0].mc_fidelity.is_some());
        assert!(!rows[1].feasible && rows[1].mc_fidelity.is_none());
        assert!((rows[1].lambda_max.unwrap() - 0.094_591_3).abs() < 1e-6);
        assert!(rows[1].m5_min_eigenvalue.unwrap() < 0.0);
        assert!(sweep((1.0, 1.0, 0.5), SweepParam::A, &[], 10, 0).is_err());
    }

    #[test]
    fn sweep_lambda_max_column_has_plateau_then_decay() {
        let grid = linspace(0.1, 2.0, 20).unwrap();
        let rows = sweep((1.0, 1.0, 0.05), SweepParam::A, &grid, 10, 0).unwrap();
        let lm: Vec<f64> = rows.iter().map(|r| r.lambda_max.unwrap()).collect();
        for (a, l) in grid.iter().zip(&lm) {
            if *a <= crate::wpovm::A_KINK {
                assert_eq!(*l, 2.0 / 3.0);
            } else {
                assert!(*l < 2.0 / 3.0);
            }
        }
        for w in lm.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
    }

    #[test]
    fn run_trials_preserves_order() {
        let prepared = Protocol::WBm.prepare().unwrap();
        let angles = BlochAngles::new(1.0, 0.0).unwrap();
        let recs = run_trials(&prepared, InputSource::Fixed(angles), 64, 3).unwrap();
        assert!(recs.iter().enumerate().all(|(i, r)| r.trial == i as u64));
        assert!(recs.iter().all(|r| r.theta == 1.0));
    }
}
