//! Dense complex linear algebra for registers of one to four qubits.
//!
//! Basis convention: qubit 0 is the most significant bit of a basis index,
//! and the computational value 0 stands for `z-` while 1 stands for `z+`.
//! A three-qubit index `0b100` therefore reads `|z+ z- z->`.

use std::fmt;

pub use num_complex::Complex64 as Complex;

use crate::error::{Error, Result};

pub const MAX_QUBITS: usize = 4;

/// Construction and validation tolerance for norms, unitarity and hermiticity.
pub const STATE_TOL: f64 = 1e-12;

/// Slack allowed below zero when checking positive semidefiniteness.
pub const PSD_TOL: f64 = 1e-10;

/// Tolerance on `|<a|b>|` when comparing states up to a global phase.
pub const PHASE_TOL: f64 = 1e-10;

pub const ZERO: Complex = Complex::new(0.0, 0.0);
pub const ONE: Complex = Complex::new(1.0, 0.0);

pub fn c(re: f64, im: f64) -> Complex {
    Complex::new(re, im)
}

pub fn re(x: f64) -> Complex {
    Complex::new(x, 0.0)
}

fn qubits_for_dim(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(dim));
    }
    let n = dim.trailing_zeros() as usize;
    if n > MAX_QUBITS {
        return Err(Error::TooManyQubits(n));
    }
    Ok(n)
}

/// A normalized pure state of `n_qubits` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex>,
}

impl StateVector {
    /// Wraps `amps`, rejecting vectors whose squared norm is off by more than
    /// [`STATE_TOL`].
    pub fn new(amps: Vec<Complex>) -> Result<Self> {
        let n_qubits = qubits_for_dim(amps.len())?;
        if n_qubits == 0 {
            return Err(Error::NotPowerOfTwo(amps.len()));
        }
        let norm = norm_sqr(&amps);
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { n_qubits, amps })
    }

    /// Rescales an arbitrary nonzero vector to unit norm.
    pub fn normalized(mut amps: Vec<Complex>) -> Result<Self> {
        let norm = norm_sqr(&amps);
        if norm <= f64::MIN_POSITIVE || !norm.is_finite() {
            return Err(Error::NotNormalized(norm));
        }
        let scale = norm.sqrt().recip();
        amps.iter_mut().for_each(|a| *a *= scale);
        Self::new(amps)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::TooManyQubits(n_qubits));
        }
        let dim = 1 << n_qubits;
        if index >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: index,
            });
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[Complex] {
        &self.amps
    }

    pub fn amp(&self, index: usize) -> Complex {
        self.amps[index]
    }

    pub fn into_amps(self) -> Vec<Complex> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amps)
    }

    /// True when the two states differ only by a global phase.
    pub fn equals_up_to_phase(&self, other: &StateVector) -> bool {
        self.dim() == other.dim() && (inner_raw(&self.amps, &other.amps).norm() - 1.0).abs() <= PHASE_TOL
    }

    pub fn density(&self) -> DensityMatrix {
        let d = self.dim();
        let mut entries = vec![ZERO; d * d];
        for i in 0..d {
            for j in 0..d {
                entries[i * d + j] = self.amps[i] * self.amps[j].conj();
            }
        }
        DensityMatrix { dim: d, entries }
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, a) in self.amps.iter().enumerate() {
            if a.norm_sqr() < 1e-24 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({:.6}{:+.6}i)|{:0width$b}>", a.re, a.im, k, width = self.n_qubits)?;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

pub(crate) fn norm_sqr(v: &[Complex]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum()
}

pub(crate) fn inner_raw(a: &[Complex], b: &[Complex]) -> Complex {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `<a|b>`, conjugate-linear in the first argument.
pub fn inner(a: &StateVector, b: &StateVector) -> Result<Complex> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(inner_raw(&a.amps, &b.amps))
}

/// Kronecker product; `a` occupies the leading (most significant) qubits.
pub fn tensor(a: &StateVector, b: &StateVector) -> Result<StateVector> {
    let n = a.n_qubits + b.n_qubits;
    if n > MAX_QUBITS {
        return Err(Error::TooManyQubits(n));
    }
    let amps = kron(&a.amps, &b.amps);
    Ok(StateVector { n_qubits: n, amps })
}

pub(crate) fn kron(a: &[Complex], b: &[Complex]) -> Vec<Complex> {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

/// Index bookkeeping for an operation acting on `targets` of an `n`-qubit
/// register. `index[t * rest_dim + r]` is the full basis index whose target
/// bits spell `t` (first target most significant) and whose remaining bits,
/// in ascending qubit order, spell `r`.
#[derive(Clone, Debug)]
pub(crate) struct RegisterSplit {
    pub target_dim: usize,
    pub rest_dim: usize,
    index: Vec<usize>,
}

impl RegisterSplit {
    pub fn new(n_qubits: usize, targets: &[usize]) -> Result<Self> {
        check_targets(n_qubits, targets)?;
        let rest: Vec<usize> = (0..n_qubits).filter(|q| !targets.contains(q)).collect();
        let target_dim = 1 << targets.len();
        let rest_dim = 1 << rest.len();
        let mut index = vec![0; target_dim * rest_dim];
        for t in 0..target_dim {
            for r in 0..rest_dim {
                let mut k = 0;
                for (pos, &q) in targets.iter().enumerate() {
                    let bit = (t >> (targets.len() - 1 - pos)) & 1;
                    k |= bit << (n_qubits - 1 - q);
                }
                for (pos, &q) in rest.iter().enumerate() {
                    let bit = (r >> (rest.len() - 1 - pos)) & 1;
                    k |= bit << (n_qubits - 1 - q);
                }
                index[t * rest_dim + r] = k;
            }
        }
        Ok(Self {
            target_dim,
            rest_dim,
            index,
        })
    }

    #[inline]
    pub fn full(&self, t: usize, r: usize) -> usize {
        self.index[t * self.rest_dim + r]
    }
}

fn check_targets(n_qubits: usize, targets: &[usize]) -> Result<()> {
    let bad = || Error::BadTargets {
        targets: targets.to_vec(),
        n_qubits,
    };
    if targets.is_empty() || targets.iter().any(|&q| q >= n_qubits) {
        return Err(bad());
    }
    for (i, q) in targets.iter().enumerate() {
        if targets[..i].contains(q) {
            return Err(bad());
        }
    }
    Ok(())
}

/// A dense `dim x dim` complex matrix, row-major, with flags recording which
/// structural properties were verified at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    dim: usize,
    entries: Vec<Complex>,
    unitary: bool,
    hermitian: bool,
}

impl Operator {
    /// An unflagged matrix.
    pub fn new(dim: usize, entries: Vec<Complex>) -> Result<Self> {
        qubits_for_dim(dim)?;
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        Ok(Self {
            dim,
            entries,
            unitary: false,
            hermitian: false,
        })
    }

    pub fn unitary(dim: usize, entries: Vec<Complex>) -> Result<Self> {
        Self::new(dim, entries)?.into_unitary()
    }

    pub fn hermitian(dim: usize, entries: Vec<Complex>) -> Result<Self> {
        Self::new(dim, entries)?.into_hermitian()
    }

    /// Verifies `U^dag U = I` and sets the unitary flag.
    pub fn into_unitary(mut self) -> Result<Self> {
        let resid = self.adjoint().matmul(&self)?.max_abs_diff(&Self::identity(self.dim));
        if resid > STATE_TOL {
            return Err(Error::NotUnitary(resid));
        }
        self.unitary = true;
        self.hermitian = self.hermiticity_residual() <= STATE_TOL;
        Ok(self)
    }

    /// Verifies `A = A^dag` and sets the Hermitian flag.
    pub fn into_hermitian(mut self) -> Result<Self> {
        let resid = self.hermiticity_residual();
        if resid > STATE_TOL {
            return Err(Error::NotHermitian(resid));
        }
        self.hermitian = true;
        Ok(self)
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![ZERO; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = ONE;
        }
        Self {
            dim,
            entries,
            unitary: true,
            hermitian: true,
        }
    }

    /// `|v><v|` for an arbitrary (not necessarily normalized) vector.
    pub fn outer(v: &[Complex]) -> Result<Self> {
        let d = v.len();
        let mut entries = vec![ZERO; d * d];
        for i in 0..d {
            for j in 0..d {
                entries[i * d + j] = v[i] * v[j].conj();
            }
        }
        let mut op = Self::new(d, entries)?;
        op.hermitian = true;
        Ok(op)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_qubits(&self) -> usize {
        self.dim.trailing_zeros() as usize
    }

    pub fn entries(&self) -> &[Complex] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> Complex {
        self.entries[row * self.dim + col]
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn adjoint(&self) -> Self {
        let d = self.dim;
        let mut entries = vec![ZERO; d * d];
        for i in 0..d {
            for j in 0..d {
                entries[j * d + i] = self.entries[i * d + j].conj();
            }
        }
        Self {
            dim: d,
            entries,
            unitary: self.unitary,
            hermitian: self.hermitian,
        }
    }

    /// Matrix product `self * rhs`. Unitarity survives; hermiticity does not.
    pub fn matmul(&self, rhs: &Operator) -> Result<Self> {
        self.same_dim(rhs)?;
        let d = self.dim;
        let mut entries = vec![ZERO; d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.entries[i * d + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..d {
                    entries[i * d + j] += a * rhs.entries[k * d + j];
                }
            }
        }
        Ok(Self {
            dim: d,
            entries,
            unitary: self.unitary && rhs.unitary,
            hermitian: false,
        })
    }

    pub fn add(&self, rhs: &Operator) -> Result<Self> {
        self.same_dim(rhs)?;
        let entries = self.entries.iter().zip(&rhs.entries).map(|(a, b)| a + b).collect();
        Ok(Self {
            dim: self.dim,
            entries,
            unitary: false,
            hermitian: self.hermitian && rhs.hermitian,
        })
    }

    pub fn sub(&self, rhs: &Operator) -> Result<Self> {
        self.same_dim(rhs)?;
        let entries = self.entries.iter().zip(&rhs.entries).map(|(a, b)| a - b).collect();
        Ok(Self {
            dim: self.dim,
            entries,
            unitary: false,
            hermitian: self.hermitian && rhs.hermitian,
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|a| a * s).collect(),
            unitary: self.unitary && (s.abs() - 1.0).abs() <= STATE_TOL,
            hermitian: self.hermitian,
        }
    }

    /// Largest entrywise modulus of `self - rhs`.
    pub fn max_abs_diff(&self, rhs: &Operator) -> f64 {
        assert_eq!(self.dim, rhs.dim, "operator dimensions differ");
        self.entries
            .iter()
            .zip(&rhs.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_residual(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    /// `M v` for a vector of matching length.
    pub fn apply_vec(&self, v: &[Complex]) -> Vec<Complex> {
        let d = self.dim;
        (0..d)
            .map(|i| (0..d).map(|j| self.entries[i * d + j] * v[j]).sum())
            .collect()
    }

    /// `<v|M|v>`.
    pub fn expectation(&self, v: &[Complex]) -> Complex {
        inner_raw(v, &self.apply_vec(v))
    }

    /// Spectral decomposition of a Hermitian-flagged operator.
    pub fn eigh(&self) -> Result<HermitianEigen> {
        if !self.hermitian {
            return Err(Error::NotHermitian(self.hermiticity_residual()));
        }
        Ok(jacobi_eigh(self.dim, &self.entries))
    }

    /// Principal square root of a positive semidefinite operator. Eigenvalues
    /// down to `-PSD_TOL` are clamped to zero.
    pub fn sqrt_psd(&self) -> Result<Self> {
        let eig = self.eigh()?;
        if let Some(&lo) = eig.values.first() {
            if lo < -PSD_TOL {
                return Err(Error::InvalidParameter(format!(
                    "square root of an operator with eigenvalue {lo:e}"
                )));
            }
        }
        let d = self.dim;
        let roots: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0).sqrt()).collect();
        let mut entries = vec![ZERO; d * d];
        for i in 0..d {
            for j in 0..d {
                entries[i * d + j] = (0..d)
                    .map(|k| eig.vector(k)[i] * roots[k] * eig.vector(k)[j].conj())
                    .sum();
            }
        }
        Ok(Self {
            dim: d,
            entries,
            unitary: false,
            hermitian: true,
        })
    }

    fn same_dim(&self, rhs: &Operator) -> Result<()> {
        if self.dim != rhs.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: rhs.dim,
            });
        }
        Ok(())
    }
}

pub fn pauli_x() -> Operator {
    Operator::unitary(2, vec![ZERO, ONE, ONE, ZERO]).expect("sigma_x is unitary")
}

pub fn pauli_z() -> Operator {
    Operator::unitary(2, vec![ONE, ZERO, ZERO, -ONE]).expect("sigma_z is unitary")
}

/// Eigenvalues in ascending order with matching orthonormal eigenvectors.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    vectors: Vec<Vec<Complex>>,
}

impl HermitianEigen {
    pub fn vector(&self, k: usize) -> &[Complex] {
        &self.vectors[k]
    }
}

/// Cyclic complex Jacobi. Each rotation `G` acts on the (p, q) plane and is a
/// phase fix `diag(1, e^{-i arg a_pq})` followed by a real Givens rotation, so
/// that `(G^dag A G)_pq = 0`.
fn jacobi_eigh(d: usize, entries: &[Complex]) -> HermitianEigen {
    let mut a = entries.to_vec();
    let mut v = vec![ZERO; d * d];
    for i in 0..d {
        v[i * d + i] = ONE;
    }
    let scale = a
        .iter()
        .map(|x| x.norm_sqr())
        .sum::<f64>()
        .sqrt()
        .max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let off: f64 = (0..d)
            .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * d + j].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                let mag = apq.norm();
                if mag <= 1e-300 {
                    continue;
                }
                let phase = (apq / mag).conj();
                let app = a[p * d + p].re;
                let aqq = a[q * d + q].re;
                let theta = 0.5 * (2.0 * mag).atan2(aqq - app);
                let (s, cth) = theta.sin_cos();
                // G = [[c, s], [-s e^{-i phi}, c e^{-i phi}]] on rows/cols (p, q)
                let g_pp = re(cth);
                let g_pq = re(s);
                let g_qp = phase * (-s);
                let g_qq = phase * cth;

                // A <- A G
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = akp * g_pp + akq * g_qp;
                    a[k * d + q] = akp * g_pq + akq * g_qq;
                }
                // A <- G^dag A
                for l in 0..d {
                    let apl = a[p * d + l];
                    let aql = a[q * d + l];
                    a[p * d + l] = g_pp.conj() * apl + g_qp.conj() * aql;
                    a[q * d + l] = g_pq.conj() * apl + g_qq.conj() * aql;
                }
                a[p * d + q] = ZERO;
                a[q * d + p] = ZERO;
                // V <- V G
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = vkp * g_pp + vkq * g_qp;
                    v[k * d + q] = vkp * g_pq + vkq * g_qq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| a[i * d + i].re.total_cmp(&a[j * d + j].re));
    let values = order.iter().map(|&i| a[i * d + i].re).collect();
    let vectors = order
        .iter()
        .map(|&col| (0..d).map(|row| v[row * d + col]).collect())
        .collect();
    HermitianEigen { values, vectors }
}

/// Smallest eigenvalue of a Hermitian-flagged operator.
pub fn min_eigenvalue_hermitian(a: &Operator) -> Result<f64> {
    Ok(a.eigh()?.values[0])
}

/// Applies an arbitrary matrix to `targets`, identity elsewhere. The result is
/// not renormalized.
pub fn apply_matrix(amps: &[Complex], n_qubits: usize, m: &Operator, targets: &[usize]) -> Result<Vec<Complex>> {
    if amps.len() != 1 << n_qubits {
        return Err(Error::DimensionMismatch {
            expected: 1 << n_qubits,
            got: amps.len(),
        });
    }
    if m.dim() != 1 << targets.len() {
        return Err(Error::DimensionMismatch {
            expected: 1 << targets.len(),
            got: m.dim(),
        });
    }
    let split = RegisterSplit::new(n_qubits, targets)?;
    let mut out = vec![ZERO; amps.len()];
    for r in 0..split.rest_dim {
        for row in 0..split.target_dim {
            let mut acc = ZERO;
            for col in 0..split.target_dim {
                acc += m.get(row, col) * amps[split.full(col, r)];
            }
            out[split.full(row, r)] = acc;
        }
    }
    Ok(out)
}

/// Applies a unitary-flagged operator on `targets`.
pub fn apply_op(s: &StateVector, u: &Operator, targets: &[usize]) -> Result<StateVector> {
    if !u.is_unitary() {
        let resid = u.adjoint().matmul(u)?.max_abs_diff(&Operator::identity(u.dim()));
        return Err(Error::NotUnitary(resid));
    }
    let amps = apply_matrix(&s.amps, s.n_qubits, u, targets)?;
    Ok(StateVector {
        n_qubits: s.n_qubits,
        amps,
    })
}

/// A validated density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    entries: Vec<Complex>,
}

impl DensityMatrix {
    pub fn new(dim: usize, entries: Vec<Complex>) -> Result<Self> {
        let op = Operator::hermitian(dim, entries)?;
        let trace: Complex = (0..dim).map(|i| op.get(i, i)).sum();
        if (trace - ONE).norm() > STATE_TOL {
            return Err(Error::NotNormalized(trace.re));
        }
        let lo = min_eigenvalue_hermitian(&op)?;
        if lo < -PSD_TOL {
            return Err(Error::InvalidParameter(format!(
                "density matrix has negative eigenvalue {lo:e}"
            )));
        }
        Ok(Self {
            dim,
            entries: op.entries,
        })
    }

    /// Divides by the trace, then validates.
    pub fn from_unnormalized(dim: usize, mut entries: Vec<Complex>) -> Result<Self> {
        let trace: f64 = (0..dim).map(|i| entries[i * dim + i].re).sum();
        if trace <= f64::MIN_POSITIVE {
            return Err(Error::NotNormalized(trace));
        }
        entries.iter_mut().for_each(|x| *x /= trace);
        Self::new(dim, entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex {
        self.entries[row * self.dim + col]
    }

    pub fn entries(&self) -> &[Complex] {
        &self.entries
    }

    pub fn as_operator(&self) -> Operator {
        Operator::hermitian(self.dim, self.entries.clone()).expect("validated at construction")
    }

    pub fn purity(&self) -> f64 {
        self.entries.iter().map(|x| x.norm_sqr()).sum()
    }

    /// Eigenvector of the largest eigenvalue, normalized.
    pub fn dominant_state(&self) -> StateVector {
        let eig = self.as_operator().eigh().expect("density matrices are Hermitian");
        StateVector::normalized(eig.vector(self.dim - 1).to_vec()).expect("eigenvectors are unit vectors")
    }

    /// `<phi|rho|phi>`.
    pub fn expectation(&self, phi: &StateVector) -> Result<f64> {
        if phi.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: phi.dim(),
            });
        }
        Ok(self.as_operator().expectation(phi.amps()).re)
    }
}

/// Reduced state on `keep` (in the order given) of a pure register.
pub fn partial_trace(s: &StateVector, keep: &[usize]) -> Result<DensityMatrix> {
    if keep.is_empty() {
        return Err(Error::EmptyKeep);
    }
    let (d, entries) = partial_trace_raw(s.amps(), s.n_qubits(), keep)?;
    DensityMatrix::new(d, entries)
}

/// Unnormalized reduced operator `Tr_rest |v><v|` for any vector.
pub(crate) fn partial_trace_raw(amps: &[Complex], n_qubits: usize, keep: &[usize]) -> Result<(usize, Vec<Complex>)> {
    if keep.is_empty() {
        return Err(Error::EmptyKeep);
    }
    let split = RegisterSplit::new(n_qubits, keep)?;
    let d = split.target_dim;
    let mut entries = vec![ZERO; d * d];
    for i in 0..d {
        for j in 0..d {
            entries[i * d + j] = (0..split.rest_dim)
                .map(|r| amps[split.full(i, r)] * amps[split.full(j, r)].conj())
                .sum();
        }
    }
    Ok((d, entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn ket(v: &[f64]) -> StateVector {
        StateVector::new(v.iter().map(|&x| re(x)).collect()).unwrap()
    }

    fn close(a: Complex, b: Complex) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(matches!(StateVector::new(vec![ONE, ONE]), Err(Error::NotNormalized(_))));
        assert!(matches!(
            StateVector::new(vec![ONE, ZERO, ZERO]),
            Err(Error::NotPowerOfTwo(3))
        ));
        assert!(matches!(StateVector::new(vec![ZERO; 32]), Err(Error::TooManyQubits(5))));
        assert!(StateVector::normalized(vec![ZERO, ZERO]).is_err());
    }

    #[test]
    fn tensor_examples() {
        let zm = ket(&[1.0, 0.0]);
        let zz = tensor(&zm, &zm).unwrap();
        assert_eq!(zz.amps(), &[ONE, ZERO, ZERO, ZERO]);

        let plus = ket(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]);
        let pz = tensor(&plus, &zm).unwrap();
        let want = [FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2, 0.0];
        for (a, w) in pz.amps().iter().zip(want) {
            assert!(close(*a, re(w)));
        }

        let four = StateVector::basis(4, 0).unwrap();
        assert!(matches!(tensor(&four, &zm), Err(Error::TooManyQubits(5))));
    }

    #[test]
    fn tensor_unknown_with_w_has_expected_support() {
        // (alpha|0> + beta|1>) (x) (|001>+|010>+|100>)/sqrt3, expanded by hand
        let alpha = c(0.6, 0.0);
        let beta = c(0.0, 0.8);
        let phi = StateVector::new(vec![alpha, beta]).unwrap();
        let s3 = 3f64.sqrt().recip();
        let w = ket(&[0.0, s3, s3, 0.0, s3, 0.0, 0.0, 0.0]);
        let t = tensor(&phi, &w).unwrap();
        for k in 0..16 {
            let want = match k {
                0b0001 | 0b0010 | 0b0100 => alpha * s3,
                0b1001 | 0b1010 | 0b1100 => beta * s3,
                _ => ZERO,
            };
            assert!(close(t.amp(k), want), "index {k:04b}");
        }
    }

    #[test]
    fn apply_op_examples() {
        let zm = ket(&[1.0, 0.0]);
        let out = apply_op(&zm, &pauli_x(), &[0]).unwrap();
        assert_eq!(out.amps(), &[ZERO, ONE]);

        let plus = ket(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]);
        let out = apply_op(&plus, &pauli_z(), &[0]).unwrap();
        assert!(close(out.amp(0), re(FRAC_1_SQRT_2)));
        assert!(close(out.amp(1), re(-FRAC_1_SQRT_2)));
    }

    #[test]
    fn sigma_xz_recovers_target_up_to_phase() {
        let (alpha, beta) = (c(0.6, 0.0), c(0.0, 0.8));
        let branch = StateVector::new(vec![beta, -alpha]).unwrap();
        let xz = pauli_x().matmul(&pauli_z()).unwrap();
        let out = apply_op(&branch, &xz, &[0]).unwrap();
        // matrix oracle: [[0,-1],[1,0]] (beta, -alpha) = (alpha, beta)
        assert!(close(out.amp(0), alpha));
        assert!(close(out.amp(1), beta));
        let target = StateVector::new(vec![alpha, beta]).unwrap();
        assert!(out.equals_up_to_phase(&target));
        // the opposite product order gives the same state with phase -1
        let zx = pauli_z().matmul(&pauli_x()).unwrap();
        let out = apply_op(&branch, &zx, &[0]).unwrap();
        assert!(close(out.amp(0), -alpha));
        assert!(out.equals_up_to_phase(&target));
    }

    #[test]
    fn apply_op_errors() {
        let zm = ket(&[1.0, 0.0]);
        let not_unitary = Operator::new(2, vec![ONE, ONE, ZERO, ONE]).unwrap();
        assert!(matches!(apply_op(&zm, &not_unitary, &[0]), Err(Error::NotUnitary(_))));
        assert!(matches!(apply_op(&zm, &pauli_x(), &[1]), Err(Error::BadTargets { .. })));
        let two = tensor(&zm, &zm).unwrap();
        assert!(matches!(
            apply_op(&two, &pauli_x(), &[0, 0]),
            Err(Error::DimensionMismatch { .. })
        ));
        let swap = Operator::unitary(
            4,
            [1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0., 0., 0., 0., 0., 1.]
                .map(re)
                .to_vec(),
        )
        .unwrap();
        assert!(matches!(apply_op(&two, &swap, &[1, 1]), Err(Error::BadTargets { .. })));
    }

    #[test]
    fn apply_op_on_inner_qubit() {
        // X on qubit 1 of |000> gives |010>
        let s = StateVector::basis(3, 0).unwrap();
        let out = apply_op(&s, &pauli_x(), &[1]).unwrap();
        assert_eq!(out, StateVector::basis(3, 0b010).unwrap());
    }

    #[test]
    fn inner_examples() {
        let zm = ket(&[1.0, 0.0]);
        let zp = ket(&[0.0, 1.0]);
        assert!(close(inner(&zm, &zm).unwrap(), ONE));
        assert!(close(inner(&zm, &zp).unwrap(), ZERO));
        let psi_plus = ket(&[FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2]);
        let zz = tensor(&zm, &zm).unwrap();
        assert!(close(inner(&psi_plus, &zz).unwrap(), re(FRAC_1_SQRT_2)));
        assert!(matches!(inner(&zm, &zz), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn partial_trace_examples() {
        let zm = ket(&[1.0, 0.0]);
        let zp = ket(&[0.0, 1.0]);
        let rho = partial_trace(&tensor(&zm, &zp).unwrap(), &[0]).unwrap();
        assert_eq!(rho.entries(), &[ONE, ZERO, ZERO, ZERO]);

        let psi_plus = ket(&[FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2]);
        let rho = partial_trace(&psi_plus, &[0]).unwrap();
        for (a, w) in rho.entries().iter().zip([0.5, 0.0, 0.0, 0.5]) {
            assert!(close(*a, re(w)));
        }

        // W: amplitudes 1/sqrt3 at 001, 010, 100; qubit 2 is 0 in two of them
        let s3 = 3f64.sqrt().recip();
        let w = ket(&[0.0, s3, s3, 0.0, s3, 0.0, 0.0, 0.0]);
        let rho = partial_trace(&w, &[2]).unwrap();
        for (a, want) in rho.entries().iter().zip([2.0 / 3.0, 0.0, 0.0, 1.0 / 3.0]) {
            assert!(close(*a, re(want)));
        }
        assert!(matches!(partial_trace(&w, &[]), Err(Error::EmptyKeep)));
    }

    #[test]
    fn partial_trace_respects_keep_order() {
        // |01> keeping (1, 0) reads as |10>
        let s = StateVector::basis(2, 0b01).unwrap();
        let rho = partial_trace(&s, &[1, 0]).unwrap();
        assert_eq!(rho.get(0b10, 0b10), ONE);
    }

    #[test]
    fn eigenvalue_examples() {
        assert!((min_eigenvalue_hermitian(&Operator::identity(2)).unwrap() - 1.0).abs() < 1e-12);
        assert!((min_eigenvalue_hermitian(&pauli_z()).unwrap() + 1.0).abs() < 1e-12);
        let unflagged = Operator::new(2, vec![ONE, ONE, ZERO, ONE]).unwrap();
        assert!(matches!(
            min_eigenvalue_hermitian(&unflagged),
            Err(Error::NotHermitian(_))
        ));
        // sigma_y has eigenvalues -1, 1 with complex eigenvectors
        let y = Operator::hermitian(2, vec![ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO]).unwrap();
        let eig = y.eigh().unwrap();
        assert!((eig.values[0] + 1.0).abs() < 1e-12 && (eig.values[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigh_reconstructs_hermitian_matrix() {
        // deterministic dense Hermitian test matrix, 8x8
        let d = 8;
        let mut e = vec![ZERO; d * d];
        for i in 0..d {
            for j in i..d {
                let x = c(
                    ((i * 7 + j * 3) % 5) as f64 - 2.0,
                    if i == j { 0.0 } else { ((i + 2 * j) % 3) as f64 - 1.0 },
                );
                e[i * d + j] = x;
                e[j * d + i] = x.conj();
            }
        }
        let a = Operator::hermitian(d, e).unwrap();
        let eig = a.eigh().unwrap();
        for w in eig.values.windows(2) {
            assert!(w[0] <= w[1]);
        }
        for k in 0..d {
            let v = eig.vector(k);
            let av = a.apply_vec(v);
            for i in 0..d {
                assert!((av[i] - v[i] * eig.values[k]).norm() < 1e-10);
            }
            for l in 0..d {
                let ip = inner_raw(eig.vector(l), v);
                let want = if l == k { ONE } else { ZERO };
                assert!((ip - want).norm() < 1e-10);
            }
        }
        // trace equals eigenvalue sum
        let tr: f64 = (0..d).map(|i| a.get(i, i).re).sum();
        assert!((tr - eig.values.iter().sum::<f64>()).abs() < 1e-10);
    }

    #[test]
    fn sqrt_squares_back() {
        let v = [c(0.3, 0.1), c(-0.2, 0.5), c(0.0, 0.0), c(0.7, -0.1)];
        let m = Operator::outer(&v)
            .unwrap()
            .add(&Operator::identity(4).scale(0.25))
            .unwrap();
        let r = m.sqrt_psd().unwrap();
        assert!(r.matmul(&r).unwrap().max_abs_diff(&m) < 1e-12);
        assert!(pauli_z().sqrt_psd().is_err());
    }

    #[test]
    fn display_lists_support() {
        let s = ket(&[FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2]);
        assert_eq!(s.to_string(), "(0.707107+0.000000i)|00> + (0.707107+0.000000i)|11>");
    }
}
