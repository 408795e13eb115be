//! The asymmetric W-type POVM on Alice's three qubits (U, A, A').
//!
//! Four W-like frame vectors `psi'_i` expand `|phi>_U (x) |W>_{AA'C}`; the
//! unnormalized duals `dual_i` satisfy `<dual_i|psi'_j> = delta_ij`. The POVM
//! is `M_i = lambda |dual_i><dual_i|` for i = 1..4 and `M_5 = I - sum M_i`.
//! `lambda` is feasible exactly when `M_5` is positive semidefinite.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measurement::Povm;
use crate::qmath::{inner_raw, min_eigenvalue_hermitian, re, Complex, Operator, StateVector, PSD_TOL, ZERO};

const HALF_SQRT3: f64 = 0.866_025_403_784_438_6;

/// Parameter `a` at which the two branches of [`lambda_max`] meet.
pub const A_KINK: f64 = HALF_SQRT3;

/// Largest scale on the plateau `a <= sqrt(3)/2`.
pub const LAMBDA_PLATEAU: f64 = 2.0 / 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WPovmParams {
    pub a: f64,
    pub a_prime: f64,
    pub lambda: f64,
}

impl WPovmParams {
    /// `a, a' > 0` and `lambda` in `(0, 1]`. Feasibility is checked by
    /// [`build_w_povm`], not here.
    pub fn new(a: f64, a_prime: f64, lambda: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) || !(a_prime > 0.0 && a_prime.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "a = {a}, a' = {a_prime} must be positive"
            )));
        }
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::InvalidParameter(format!("lambda = {lambda} not in (0, 1]")));
        }
        Ok(Self { a, a_prime, lambda })
    }

    /// `a = a'`, the case the protocol uses by default.
    pub fn symmetric(a: f64, lambda: f64) -> Result<Self> {
        Self::new(a, a, lambda)
    }

    /// `a = a' = sqrt(3)/2`, `lambda = 2/3`: the largest success probability.
    pub fn optimal() -> Self {
        Self {
            a: HALF_SQRT3,
            a_prime: HALF_SQRT3,
            lambda: LAMBDA_PLATEAU,
        }
    }

    /// `min(lambda_max(a), lambda_max(a'))`.
    pub fn lambda_bound(&self) -> f64 {
        lambda_max(self.a).unwrap().min(lambda_max(self.a_prime).unwrap())
    }
}

fn ket3(terms: &[(usize, f64)]) -> Vec<Complex> {
    let mut v = vec![ZERO; 8];
    for &(k, x) in terms {
        v[k] += re(x);
    }
    v
}

/// `psi'_1..psi'_4` on (U, A, A'). These are unit vectors but not mutually
/// orthogonal: `<psi'_1|psi'_2> = <psi'_3|psi'_4> = 1/3`.
pub fn w_primal_basis() -> [StateVector; 4] {
    let s = 3f64.sqrt().recip();
    [
        ket3(&[(0b001, s), (0b010, s), (0b100, s)]),
        ket3(&[(0b001, s), (0b010, s), (0b100, -s)]),
        ket3(&[(0b101, s), (0b110, s), (0b000, s)]),
        ket3(&[(0b101, s), (0b110, s), (0b000, -s)]),
    ]
    .map(|v| StateVector::new(v).expect("frame vectors are unit length"))
}

/// Unnormalized duals of [`w_primal_basis`] with free parameters `a`, `a'`.
pub fn w_dual_basis(a: f64, a_prime: f64) -> Result<[Vec<Complex>; 4]> {
    if !(a > 0.0 && a_prime > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "a = {a}, a' = {a_prime} must be positive"
        )));
    }
    let h = HALF_SQRT3;
    Ok([
        ket3(&[(0b001, a), (0b010, h - a), (0b100, h)]),
        ket3(&[(0b001, a), (0b010, h - a), (0b100, -h)]),
        ket3(&[(0b101, a_prime), (0b110, h - a_prime), (0b000, h)]),
        ket3(&[(0b101, a_prime), (0b110, h - a_prime), (0b000, -h)]),
    ])
}

/// Frame vectors together with their duals.
#[derive(Clone, Debug)]
pub struct WMeasurementFamily {
    pub primal: [StateVector; 4],
    pub dual: [Vec<Complex>; 4],
}

impl WMeasurementFamily {
    pub fn new(a: f64, a_prime: f64) -> Result<Self> {
        Ok(Self {
            primal: w_primal_basis(),
            dual: w_dual_basis(a, a_prime)?,
        })
    }

    /// Matrix of `<dual_i|psi'_j>`.
    pub fn gram(&self) -> [[Complex; 4]; 4] {
        let mut g = [[ZERO; 4]; 4];
        for (i, d) in self.dual.iter().enumerate() {
            for (j, p) in self.primal.iter().enumerate() {
                g[i][j] = inner_raw(d, p.amps());
            }
        }
        g
    }

    /// `max |<dual_i|psi'_j> - delta_ij|`.
    pub fn duality_residual(&self) -> f64 {
        let g = self.gram();
        let mut worst: f64 = 0.0;
        for (i, row) in g.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((x - re(want)).norm());
            }
        }
        worst
    }
}

/// Largest feasible scale for real `a`: `2/3` for `a <= sqrt(3)/2`,
/// `1 / (4a^2 - 2 sqrt(3) a + 3/2)` beyond.
pub fn lambda_max(a: f64) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidParameter(format!("a = {a} must be positive")));
    }
    if a <= A_KINK {
        Ok(LAMBDA_PLATEAU)
    } else {
        Ok(1.0 / (4.0 * a * a - 2.0 * 3f64.sqrt() * a + 1.5))
    }
}

/// `[M_1, .., M_5]` without any positivity check.
pub fn w_povm_elements(params: &WPovmParams) -> Result<Vec<Operator>> {
    let duals = w_dual_basis(params.a, params.a_prime)?;
    let mut elements = duals
        .iter()
        .map(|d| Operator::outer(d).map(|m| m.scale(params.lambda)))
        .collect::<Result<Vec<_>>>()?;
    let conclusive = elements
        .iter()
        .skip(1)
        .try_fold(elements[0].clone(), |acc, m| acc.add(m))?;
    elements.push(Operator::identity(8).sub(&conclusive)?);
    Ok(elements)
}

/// Smallest eigenvalue of `M_5 = I - lambda sum |dual_i><dual_i|`.
pub fn m5_min_eigenvalue(params: &WPovmParams) -> Result<f64> {
    let elements = w_povm_elements(params)?;
    min_eigenvalue_hermitian(&elements[4])
}

/// `max_psi sum_i lambda |<dual_i|psi>|^2`, the largest eigenvalue of the
/// conclusive part. It is at most one iff `M_5 >= 0`.
pub fn conclusive_weight_bound(params: &WPovmParams) -> Result<f64> {
    let elements = w_povm_elements(params)?;
    let conclusive = elements[..4]
        .iter()
        .skip(1)
        .try_fold(elements[0].clone(), |acc, m| acc.add(m))?;
    Ok(*conclusive.eigh()?.values.last().expect("nonempty spectrum"))
}

/// Builds the five-outcome POVM, labelled `M1`..`M5`. Feasibility is decided
/// by the eigenvalues of `M_5`, with slack [`PSD_TOL`].
pub fn build_w_povm(params: &WPovmParams) -> Result<Povm> {
    let elements = w_povm_elements(params)?;
    let lo = min_eigenvalue_hermitian(&elements[4])?;
    if lo < -PSD_TOL {
        return Err(Error::InfeasibleWPovm {
            a: params.a,
            a_prime: params.a_prime,
            lambda: params.lambda,
            min_eigenvalue: lo,
            lambda_max: params.lambda_bound(),
        });
    }
    let labels = (1..=5).map(|i| format!("M{i}")).collect();
    Povm::new(elements, labels)
}

/// Largest `lambda` in `(0, 1]` for which `min eig(M_5) >= -eig_tol`, found by
/// bisection to width `precision`. Independent of the closed form.
pub fn eigen_scan_lambda_max(a: f64, a_prime: f64, eig_tol: f64, precision: f64) -> Result<f64> {
    let feasible = |lambda: f64| -> Result<bool> {
        let p = WPovmParams::new(a, a_prime, lambda)?;
        Ok(m5_min_eigenvalue(&p)? >= -eig_tol)
    };
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    if feasible(hi)? {
        return Ok(hi);
    }
    while hi - lo > precision {
        let mid = 0.5 * (lo + hi);
        if mid > 0.0 && feasible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Charlie's conditional states in the frame expansion of
/// `|phi>_U (x) |W>_{AA'C}`: `a|0>+b|1>`, `a|0>-b|1>`, `b|0>+a|1>`,
/// `b|0>-a|1>` for `|phi> = a|0> + b|1>`.
pub fn conditional_charlie_states(alpha: Complex, beta: Complex) -> [[Complex; 2]; 4] {
    [[alpha, beta], [alpha, -beta], [beta, alpha], [beta, -alpha]]
}

/// `max_k |Psi_tot[k] - (1/2) sum_i (psi'_i (x) c_i)[k]|` for the input
/// `alpha|0> + beta|1>`, with register order (U, A, A', C).
pub fn expansion_residual(input: &StateVector) -> Result<f64> {
    if input.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: input.dim(),
        });
    }
    let total = crate::qmath::tensor(input, &crate::states::w())?;
    let conds = conditional_charlie_states(input.amp(0), input.amp(1));
    let mut expansion = vec![ZERO; 16];
    for (p, cnd) in w_primal_basis().iter().zip(conds) {
        for (k, x) in crate::qmath::kron(p.amps(), &cnd).into_iter().enumerate() {
            expansion[k] += x * 0.5;
        }
    }
    Ok(total
        .amps()
        .iter()
        .zip(&expansion)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::{c, inner, ONE};
    use crate::states::{unknown_qubit, BlochAngles};

    #[test]
    fn primal_examples() {
        let p = w_primal_basis();
        assert!((inner(&p[0], &p[1]).unwrap() - re(1.0 / 3.0)).norm() < 1e-12);
        assert!(inner(&p[0], &p[2]).unwrap().norm() < 1e-12);
        assert!((p[0].norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dual_examples() {
        let d = w_dual_basis(HALF_SQRT3, HALF_SQRT3).unwrap();
        assert!(d[0][0b010].norm() < 1e-15);
        assert!((d[0][0b001] - re(HALF_SQRT3)).norm() < 1e-15);
        assert!((d[0][0b100] - re(HALF_SQRT3)).norm() < 1e-15);
        let p = w_primal_basis();
        for a in [0.1, 0.5, 1.0, 2.7] {
            let d = w_dual_basis(a, 0.3).unwrap();
            assert!((inner_raw(&d[0], p[0].amps()) - ONE).norm() < 1e-12);
            // a/sqrt3 + (sqrt3/2 - a)/sqrt3 - (sqrt3/2)/sqrt3 = 0
            assert!(inner_raw(&d[0], p[1].amps()).norm() < 1e-12);
        }
        assert!(w_dual_basis(0.0, 1.0).is_err());
        assert!(w_dual_basis(1.0, -1.0).is_err());
    }

    #[test]
    fn lambda_max_examples() {
        assert_eq!(lambda_max(0.5).unwrap(), 2.0 / 3.0);
        // branch (ii) at the kink: 4(3/4) - 2 sqrt3 (sqrt3/2) + 3/2 = 3/2
        let right = 1.0 / (4.0 * A_KINK * A_KINK - 2.0 * 3f64.sqrt() * A_KINK + 1.5);
        assert!((right - 2.0 / 3.0).abs() < 1e-12);
        assert!((lambda_max(A_KINK + 1e-12).unwrap() - 2.0 / 3.0).abs() < 1e-10);
        let want = 1.0 / (5.5 - 2.0 * 3f64.sqrt());
        assert!((lambda_max(1.0).unwrap() - want).abs() < 1e-15);
        assert!((lambda_max(1.0).unwrap() - 0.491_183_650).abs() < 1e-8);
        assert!(lambda_max(0.0).is_err());
    }

    #[test]
    fn build_examples() {
        let povm = build_w_povm(&WPovmParams::optimal()).unwrap();
        assert!(povm.validate(1e-10).passed);

        let err = build_w_povm(&WPovmParams::symmetric(0.5, 0.7).unwrap()).unwrap_err();
        assert!(matches!(err, Error::InfeasibleWPovm { min_eigenvalue, .. } if min_eigenvalue < -1e-3));

        let edge = WPovmParams::symmetric(2.0, lambda_max(2.0).unwrap()).unwrap();
        let lo = m5_min_eigenvalue(&edge).unwrap();
        assert!((-1e-10..=1e-3).contains(&lo), "min eig {lo}");
        assert!(build_w_povm(&edge).is_ok());
    }

    #[test]
    fn validation_around_lambda_max_one() {
        use crate::measurement::validate_povm_elements;
        let ok = w_povm_elements(&WPovmParams::symmetric(1.0, 0.49).unwrap()).unwrap();
        assert!(validate_povm_elements(&ok, 1e-10).passed);
        let bad = w_povm_elements(&WPovmParams::symmetric(1.0, 0.60).unwrap()).unwrap();
        let report = validate_povm_elements(&bad, 1e-10);
        assert!(!report.passed);
        assert_eq!(report.worst_element().unwrap().0, 4);
    }

    #[test]
    fn eigen_scan_matches_closed_form() {
        for a in [0.2, 0.5, A_KINK, 1.0, 1.5, 2.0] {
            let scan = eigen_scan_lambda_max(a, a, 1e-9, 1e-7).unwrap();
            let closed = lambda_max(a).unwrap();
            assert!((scan - closed).abs() < 1e-5, "a = {a}: {scan} vs {closed}");
        }
    }

    #[test]
    fn weight_bound_equivalent_to_m5_psd() {
        for (a, lambda) in [
            (0.5, 0.6),
            (0.5, 0.7),
            (1.0, 0.45),
            (1.0, 0.55),
            (2.0, 0.05),
            (2.0, 0.2),
        ] {
            let p = WPovmParams::symmetric(a, lambda).unwrap();
            let bound = conclusive_weight_bound(&p).unwrap();
            let lo = m5_min_eigenvalue(&p).unwrap();
            assert!((bound - (1.0 - lo)).abs() < 1e-10);
            assert_eq!(bound <= 1.0 + 1e-10, lo >= -1e-10);
        }
    }

    #[test]
    fn frame_expansion_holds_exactly() {
        for (t, f) in [(0.0, 0.0), (1.0, 2.0), (2.5, 5.5), (std::f64::consts::PI, 0.3)] {
            let phi = unknown_qubit(BlochAngles::new(t, f).unwrap());
            assert!(expansion_residual(&phi).unwrap() < 1e-15);
        }
        let complex_input = StateVector::new(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        assert!(expansion_residual(&complex_input).unwrap() < 1e-15);
    }

    #[test]
    fn params_validation() {
        assert!(WPovmParams::new(0.0, 1.0, 0.5).is_err());
        assert!(WPovmParams::new(1.0, 1.0, 0.0).is_err());
        assert!(WPovmParams::new(1.0, 1.0, 1.2).is_err());
        let p = WPovmParams::new(0.5, 1.0, 0.4).unwrap();
        assert!((p.lambda_bound() - lambda_max(1.0).unwrap()).abs() < 1e-15);
    }
}
