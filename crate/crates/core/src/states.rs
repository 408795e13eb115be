//! Named states: the unknown input qubit, Bell pairs, GHZ, W (equal and
//! general amplitudes), and Haar-random qubits.
//!
//! Three-qubit channel states are ordered (A, B, C) from the left.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{re, Complex, StateVector, STATE_TOL, ZERO};

/// Bloch-sphere coordinates of a pure qubit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochAngles {
    theta: f64,
    phi: f64,
}

impl BlochAngles {
    /// `theta` in `[0, pi]`, `phi` in `[0, 2pi)`.
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::AngleOutOfRange(format!("theta = {theta} not in [0, pi]")));
        }
        if !(0.0..TAU).contains(&phi) {
            return Err(Error::AngleOutOfRange(format!("phi = {phi} not in [0, 2pi)")));
        }
        Ok(Self { theta, phi })
    }

    /// Angles for the real input `sqrt(p)|z-> + sqrt(1-p)|z+>`.
    pub fn from_alpha_sqr(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("|alpha|^2 = {p} not in [0, 1]")));
        }
        Self::new(2.0 * p.sqrt().acos(), 0.0)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// `|alpha|^2 = cos^2(theta/2)`.
    pub fn alpha_sqr(&self) -> f64 {
        (self.theta / 2.0).cos().powi(2)
    }
}

/// `cos(theta/2)|z-> + e^{i phi} sin(theta/2)|z+>`.
pub fn unknown_qubit(angles: BlochAngles) -> StateVector {
    let (s, co) = (angles.theta / 2.0).sin_cos();
    let beta = Complex::from_polar(s, angles.phi);
    StateVector::new(vec![re(co), beta]).expect("Bloch parametrization is normalized")
}

/// Bell basis labels. `PsiPlus`/`PsiMinus` are the even-parity pair
/// `(|z-z-> +- |z+z+>)/sqrt2`; `PhiPlus`/`PhiMinus` the odd-parity pair
/// `(|z-z+> +- |z+z->)/sqrt2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BellKind {
    PsiPlus,
    PsiMinus,
    PhiPlus,
    PhiMinus,
}

impl BellKind {
    pub const ALL: [BellKind; 4] = [
        BellKind::PsiPlus,
        BellKind::PsiMinus,
        BellKind::PhiPlus,
        BellKind::PhiMinus,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BellKind::PsiPlus => "psi+",
            BellKind::PsiMinus => "psi-",
            BellKind::PhiPlus => "phi+",
            BellKind::PhiMinus => "phi-",
        }
    }
}

impl fmt::Display for BellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub fn bell(kind: BellKind) -> StateVector {
    let h = FRAC_1_SQRT_2;
    let amps = match kind {
        BellKind::PsiPlus => [h, 0.0, 0.0, h],
        BellKind::PsiMinus => [h, 0.0, 0.0, -h],
        BellKind::PhiPlus => [0.0, h, h, 0.0],
        BellKind::PhiMinus => [0.0, h, -h, 0.0],
    };
    StateVector::new(amps.map(re).to_vec()).expect("Bell states are normalized")
}

pub fn ghz() -> StateVector {
    let mut amps = vec![ZERO; 8];
    amps[0b000] = re(FRAC_1_SQRT_2);
    amps[0b111] = re(FRAC_1_SQRT_2);
    StateVector::new(amps).expect("GHZ is normalized")
}

pub fn w() -> StateVector {
    let s = re(3f64.sqrt().recip());
    let mut amps = vec![ZERO; 8];
    amps[0b100] = s;
    amps[0b010] = s;
    amps[0b001] = s;
    StateVector::new(amps).expect("W is normalized")
}

/// Amplitudes of `a|z-z-z+> + b|z-z+z-> + c|z+z-z->` on (A, B, C).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralWAmplitudes {
    a: Complex,
    b: Complex,
    c: Complex,
}

impl GeneralWAmplitudes {
    pub fn new(a: Complex, b: Complex, c: Complex) -> Result<Self> {
        let norm = a.norm_sqr() + b.norm_sqr() + c.norm_sqr();
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { a, b, c })
    }

    pub fn real(a: f64, b: f64, c: f64) -> Result<Self> {
        Self::new(re(a), re(b), re(c))
    }

    pub fn equal() -> Self {
        let s = 3f64.sqrt().recip();
        Self::real(s, s, s).expect("equal weights are normalized")
    }

    pub fn a(&self) -> Complex {
        self.a
    }

    pub fn b(&self) -> Complex {
        self.b
    }

    pub fn c(&self) -> Complex {
        self.c
    }
}

pub fn w_general(amps: GeneralWAmplitudes) -> StateVector {
    let mut v = vec![ZERO; 8];
    v[0b001] = amps.a;
    v[0b010] = amps.b;
    v[0b100] = amps.c;
    StateVector::new(v).expect("GeneralWAmplitudes are normalized")
}

/// `x+` and `x-`: `(|z-> +- |z+>)/sqrt2`.
pub fn x_plus() -> StateVector {
    StateVector::new(vec![re(FRAC_1_SQRT_2), re(FRAC_1_SQRT_2)]).unwrap()
}

pub fn x_minus() -> StateVector {
    StateVector::new(vec![re(FRAC_1_SQRT_2), re(-FRAC_1_SQRT_2)]).unwrap()
}

/// Draws a qubit uniformly from the Bloch sphere: `cos(theta)` uniform on
/// `[-1, 1]`, `phi` uniform on `[0, 2pi)`.
pub fn haar_random_qubit<R: Rng + ?Sized>(rng: &mut R) -> (BlochAngles, StateVector) {
    let u: f64 = rng.random();
    let v: f64 = rng.random();
    let theta = (1.0 - 2.0 * u).clamp(-1.0, 1.0).acos();
    let phi = TAU * v;
    let angles = BlochAngles::new(theta, if phi < TAU { phi } else { 0.0 }).expect("sampled angles are in range");
    (angles, unknown_qubit(angles))
}

/// Convenience used by tests and examples.
pub fn qubit(alpha: Complex, beta: Complex) -> Result<StateVector> {
    StateVector::new(vec![alpha, beta])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::{inner, partial_trace, tensor, ONE};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: Complex, b: f64) -> bool {
        (a - re(b)).norm() < 1e-12
    }

    #[test]
    fn unknown_qubit_examples() {
        let s = unknown_qubit(BlochAngles::new(0.0, 0.0).unwrap());
        assert_eq!(s.amps(), &[ONE, ZERO]);
        let s = unknown_qubit(BlochAngles::new(PI, 0.0).unwrap());
        assert!(close(s.amp(0), 0.0) && close(s.amp(1), 1.0));
        let s = unknown_qubit(BlochAngles::new(PI / 2.0, 0.0).unwrap());
        assert!(close(s.amp(0), FRAC_1_SQRT_2) && close(s.amp(1), FRAC_1_SQRT_2));
    }

    #[test]
    fn angle_ranges_enforced() {
        assert!(BlochAngles::new(-0.1, 0.0).is_err());
        assert!(BlochAngles::new(PI + 1e-9, 0.0).is_err());
        assert!(BlochAngles::new(1.0, TAU).is_err());
        assert!(BlochAngles::new(1.0, -1e-12).is_err());
        assert!(BlochAngles::new(f64::NAN, 0.0).is_err());
        let a = BlochAngles::from_alpha_sqr(0.25).unwrap();
        assert!((a.alpha_sqr() - 0.25).abs() < 1e-12);
        assert!(BlochAngles::from_alpha_sqr(1.5).is_err());
    }

    #[test]
    fn bell_examples() {
        let p = bell(BellKind::PsiPlus);
        for (a, w) in p.amps().iter().zip([FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2]) {
            assert!(close(*a, w));
        }
        let m = bell(BellKind::PhiMinus);
        for (a, w) in m.amps().iter().zip([0.0, FRAC_1_SQRT_2, -FRAC_1_SQRT_2, 0.0]) {
            assert!(close(*a, w));
        }
        for i in BellKind::ALL {
            for j in BellKind::ALL {
                let ip = inner(&bell(i), &bell(j)).unwrap();
                assert!(close(ip, if i == j { 1.0 } else { 0.0 }));
            }
        }
    }

    #[test]
    fn ghz_and_w_amplitudes() {
        let g = ghz();
        for k in 0..8 {
            let want = if k == 0 || k == 7 { FRAC_1_SQRT_2 } else { 0.0 };
            assert!(close(g.amp(k), want));
        }
        let w = w();
        let s = 3f64.sqrt().recip();
        for k in 0..8 {
            let want = if [0b100, 0b010, 0b001].contains(&k) { s } else { 0.0 };
            assert!(close(w.amp(k), want));
        }
        assert!((w.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn w_reduced_states_are_symmetric() {
        let w = w();
        for q in 0..3 {
            let rho = partial_trace(&w, &[q]).unwrap();
            assert!(close(rho.get(0, 0), 2.0 / 3.0));
            assert!(close(rho.get(1, 1), 1.0 / 3.0));
            assert!(close(rho.get(0, 1), 0.0));
        }
    }

    #[test]
    fn w_general_examples() {
        assert_eq!(w_general(GeneralWAmplitudes::equal()), w());
        let prod = w_general(GeneralWAmplitudes::real(1.0, 0.0, 0.0).unwrap());
        assert_eq!(prod, StateVector::basis(3, 0b001).unwrap());
        // b and c terms both leave Charlie in z-
        let bc = w_general(GeneralWAmplitudes::real(0.0, FRAC_1_SQRT_2, FRAC_1_SQRT_2).unwrap());
        let rho = partial_trace(&bc, &[2]).unwrap();
        assert!(close(rho.get(0, 0), 1.0) && close(rho.get(1, 1), 0.0));
        assert!(GeneralWAmplitudes::real(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn haar_sampler_is_deterministic() {
        let mut r1 = ChaCha8Rng::seed_from_u64(17);
        let mut r2 = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            assert_eq!(haar_random_qubit(&mut r1).0, haar_random_qubit(&mut r2).0);
        }
    }

    #[test]
    fn haar_sampler_moments() {
        // |alpha|^2 = (1+u)/2 with u uniform on [-1,1]: E = 1/2, E[(.)^2] = 1/3
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 100_000;
        let (mut m2, mut m4) = (0.0, 0.0);
        for _ in 0..n {
            let (_, s) = haar_random_qubit(&mut rng);
            let p = s.amp(0).norm_sqr();
            m2 += p;
            m4 += p * p;
        }
        m2 /= n as f64;
        m4 /= n as f64;
        assert!((m2 - 0.5).abs() < 0.005, "E|a|^2 = {m2}");
        assert!((m4 - 1.0 / 3.0).abs() < 0.005, "E|a|^4 = {m4}");
    }

    #[test]
    fn haar_cos_theta_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let mut xs: Vec<f64> = (0..n).map(|_| haar_random_qubit(&mut rng).0.theta().cos()).collect();
        xs.sort_by(f64::total_cmp);
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let cdf = (x + 1.0) / 2.0;
                let lo = i as f64 / n as f64;
                let hi = (i + 1) as f64 / n as f64;
                (cdf - lo).abs().max((hi - cdf).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "KS statistic {ks}");
    }

    #[test]
    fn unknown_tensor_w_norm() {
        let phi = unknown_qubit(BlochAngles::new(1.1, 4.0).unwrap());
        let t = tensor(&phi, &w()).unwrap();
        assert!((t.norm_sqr() - 1.0).abs() < 1e-12);
        assert_eq!(qubit(ONE, ZERO).unwrap().amps(), &[ONE, ZERO]);
    }
}
