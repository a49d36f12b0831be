//! Spin-1 operator algebra and the small dense complex linear algebra shared by
//! every other module.
//!
//! Basis order is fixed as `(|+1⟩, |0⟩, |−1⟩)`. Two-level operators use the
//! spin-1/2 convention `σ = Pauli / 2`, with index 0 the upper state.
//! Frequencies are angular (rad/μs) and times are in μs throughout.

use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Square complex operator on an `N`-level space.
pub type Op<const N: usize> = SMatrix<C64, N, N>;
pub type ComplexMatrix3 = Op<3>;
pub type ComplexMatrix2 = Op<2>;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Tolerance used when checking that an operator is Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Largest imaginary part tolerated in the expectation of a Hermitian operator.
pub const EXPECTATION_IMAG_TOL: f64 = 1e-10;
/// Normalization tolerance for states handed to the library.
pub const NORM_TOL: f64 = 1e-9;

#[inline]
pub(crate) fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Named spin-1 operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinOp {
    Sx,
    Sy,
    Sz,
    Sz2,
    SxSqMinusSySq,
}

/// Standard spin-1 matrix in the `(|+1⟩, |0⟩, |−1⟩)` ordering.
pub fn spin_operator(which: SpinOp) -> ComplexMatrix3 {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    match which {
        SpinOp::Sx => Op::<3>::new(
            ZERO, c(h), ZERO, //
            c(h), ZERO, c(h), //
            ZERO, c(h), ZERO,
        ),
        SpinOp::Sy => Op::<3>::new(
            ZERO, -I * h, ZERO, //
            I * h, ZERO, -I * h, //
            ZERO, I * h, ZERO,
        ),
        SpinOp::Sz => Op::<3>::from_diagonal(&SVector::<C64, 3>::new(ONE, ZERO, -ONE)),
        SpinOp::Sz2 => Op::<3>::from_diagonal(&SVector::<C64, 3>::new(ONE, ZERO, ONE)),
        SpinOp::SxSqMinusSySq => Op::<3>::new(
            ZERO, ZERO, ONE, //
            ZERO, ZERO, ZERO, //
            ONE, ZERO, ZERO,
        ),
    }
}

/// `|a⟩⟨b|`.
pub fn outer<const N: usize>(a: &SpinState<N>, b: &SpinState<N>) -> Op<N> {
    a.0 * b.0.adjoint()
}

/// `|ψ⟩⟨ψ|`.
pub fn projector<const N: usize>(state: &SpinState<N>) -> Op<N> {
    outer(state, state)
}

pub fn commutator<const N: usize>(a: &Op<N>, b: &Op<N>) -> Op<N> {
    a * b - b * a
}

/// Two-level `σx = (1/2)(|0⟩⟨1| + |1⟩⟨0|)`.
pub fn sigma_x() -> ComplexMatrix2 {
    Op::<2>::new(ZERO, c(0.5), c(0.5), ZERO)
}

/// Two-level `σy = (1/2)(−i|0⟩⟨1| + i|1⟩⟨0|)`.
pub fn sigma_y() -> ComplexMatrix2 {
    Op::<2>::new(ZERO, -I * 0.5, I * 0.5, ZERO)
}

/// Two-level `σz = (1/2)(|0⟩⟨0| − |1⟩⟨1|)`.
pub fn sigma_z() -> ComplexMatrix2 {
    Op::<2>::new(c(0.5), ZERO, ZERO, c(-0.5))
}

/// `‖A − A†‖_F / max(1, ‖A‖_F)`.
pub fn hermiticity_deviation<const N: usize>(op: &Op<N>) -> f64 {
    let diff = (op - op.adjoint()).norm();
    diff / op.norm().max(1.0)
}

pub fn ensure_hermitian<const N: usize>(op: &Op<N>) -> Result<()> {
    let deviation = hermiticity_deviation(op);
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(())
}

/// `‖U†U − I‖_F`.
pub fn unitarity_error<const N: usize>(u: &Op<N>) -> f64 {
    (u.adjoint() * u - Op::<N>::identity()).norm()
}

/// Normalized state vector of an `N`-level system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinState<const N: usize = 3>(pub(crate) SVector<C64, N>);

pub type QubitState = SpinState<2>;

impl<const N: usize> SpinState<N> {
    /// Wraps amplitudes that are already normalized.
    pub fn new(amplitudes: SVector<C64, N>) -> Result<Self> {
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::param(
                "state",
                format!("state norm {norm} differs from 1"),
            ));
        }
        Ok(SpinState(amplitudes))
    }

    /// Normalizes arbitrary (non-zero) amplitudes.
    pub fn normalized(amplitudes: SVector<C64, N>) -> Result<Self> {
        let norm = amplitudes.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::param("state", "cannot normalize a zero vector"));
        }
        Ok(SpinState(amplitudes / c(norm)))
    }

    /// Computational basis vector `index`.
    pub fn basis(index: usize) -> Self {
        let mut v = SVector::<C64, N>::zeros();
        v[index] = ONE;
        SpinState(v)
    }

    pub fn amplitudes(&self) -> &SVector<C64, N> {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn population(&self, index: usize) -> f64 {
        self.0[index].norm_sqr()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> C64 {
        self.0.dotc(&other.0)
    }

    /// Applies an operator without renormalizing.
    pub fn apply(&self, op: &Op<N>) -> Self {
        SpinState(op * self.0)
    }

    /// Equal-weight superposition `(|a⟩ + |b⟩)/√2` of two orthonormal states.
    pub fn even_superposition(a: &Self, b: &Self) -> Result<Self> {
        Self::normalized(a.0 + b.0)
    }
}

impl SpinState<3> {
    pub fn plus1() -> Self {
        Self::basis(0)
    }

    pub fn zero() -> Self {
        Self::basis(1)
    }

    pub fn minus1() -> Self {
        Self::basis(2)
    }

    pub fn from_components(plus1: C64, zero: C64, minus1: C64) -> Result<Self> {
        Self::new(SVector::<C64, 3>::new(plus1, zero, minus1))
    }
}

impl SpinState<2> {
    pub fn from_components(upper: C64, lower: C64) -> Result<Self> {
        Self::new(SVector::<C64, 2>::new(upper, lower))
    }
}

/// `⟨ψ|op|ψ⟩` for a Hermitian observable.
///
/// Errors if the result carries an imaginary part above
/// [`EXPECTATION_IMAG_TOL`], which flags a non-Hermitian operator.
pub fn expectation<const N: usize>(state: &SpinState<N>, op: &Op<N>) -> Result<f64> {
    let value = state.0.dotc(&(op * state.0));
    if value.im.abs() > EXPECTATION_IMAG_TOL {
        return Err(Error::ComplexExpectation { imag: value.im });
    }
    Ok(value.re)
}

/// Real part of `⟨ψ|op|ψ⟩` without the Hermiticity check (hot loop).
#[inline]
pub(crate) fn expectation_unchecked<const N: usize>(state: &SVector<C64, N>, op: &Op<N>) -> f64 {
    state.dotc(&(op * state)).re
}

/// Spectral decomposition of a Hermitian operator: eigenvalues and the unitary
/// whose columns are the matching eigenvectors. Eigenvalues are unordered.
#[derive(Debug, Clone, Copy)]
pub struct Eigen<const N: usize> {
    pub values: [f64; N],
    pub vectors: Op<N>,
}

impl<const N: usize> Eigen<N> {
    /// Eigenvalues in ascending order together with the permuted eigenvectors.
    pub fn sorted(&self) -> Eigen<N> {
        let mut idx: [usize; N] = std::array::from_fn(|i| i);
        idx.sort_by(|&a, &b| self.values[a].total_cmp(&self.values[b]));
        let values = std::array::from_fn(|i| self.values[idx[i]]);
        let vectors = Op::<N>::from_fn(|r, col| self.vectors[(r, idx[col])]);
        Eigen { values, vectors }
    }

    /// `V diag(exp(−i λ dt)) V†`.
    pub fn propagator(&self, dt: f64) -> Op<N> {
        let phases = SVector::<C64, N>::from_fn(|k, _| C64::from_polar(1.0, -self.values[k] * dt));
        let mut scaled = self.vectors;
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= phases[k];
        }
        scaled * self.vectors.adjoint()
    }

    #[inline]
    pub(crate) fn propagate(&self, psi: &SVector<C64, N>, dt: f64) -> SVector<C64, N> {
        let mut coeffs = self.vectors.ad_mul(psi);
        for k in 0..N {
            coeffs[k] *= C64::from_polar(1.0, -self.values[k] * dt);
        }
        self.vectors * coeffs
    }
}

/// Hermitian eigen-solver and exponential for the operator sizes used here.
pub trait HermitianOps<const N: usize> {
    fn eigen_hermitian(h: &Op<N>) -> Eigen<N>;
}

/// Marker carrying the per-dimension implementations.
pub struct Dim<const N: usize>;

impl HermitianOps<3> for Dim<3> {
    fn eigen_hermitian(h: &Op<3>) -> Eigen<3> {
        jacobi_eigen3(h)
    }
}

impl HermitianOps<2> for Dim<2> {
    fn eigen_hermitian(h: &Op<2>) -> Eigen<2> {
        eigen2(h)
    }
}

/// Eigen-decomposition of a Hermitian operator (2×2 or 3×3).
pub fn eigen_hermitian<const N: usize>(h: &Op<N>) -> Result<Eigen<N>>
where
    Dim<N>: HermitianOps<N>,
{
    ensure_hermitian(h)?;
    Ok(<Dim<N> as HermitianOps<N>>::eigen_hermitian(h))
}

/// `exp(−i·h·dt)` for Hermitian `h`, via eigen-decomposition.
pub fn matrix_exponential_skew<const N: usize>(h: &Op<N>, dt: f64) -> Result<Op<N>>
where
    Dim<N>: HermitianOps<N>,
{
    Ok(eigen_hermitian(h)?.propagator(dt))
}

fn eigen2(h: &Op<2>) -> Eigen<2> {
    // h = a·1 + (bx, by, bz)·Pauli
    let a = 0.5 * (h[(0, 0)].re + h[(1, 1)].re);
    let bz = 0.5 * (h[(0, 0)].re - h[(1, 1)].re);
    let off = 0.5 * (h[(0, 1)] + h[(1, 0)].conj());
    let r = (bz * bz + off.norm_sqr()).sqrt();
    if off.norm_sqr() <= f64::MIN_POSITIVE {
        // already diagonal
        return Eigen {
            values: [h[(0, 0)].re, h[(1, 1)].re],
            vectors: Op::<2>::identity(),
        };
    }
    // eigenvector of +r: (bz + r, conj(off)) normalized; the orthogonal one for −r.
    let (u0, u1) = if bz >= 0.0 {
        (c(bz + r), off.conj())
    } else {
        (off, c(r - bz))
    };
    let n = (u0.norm_sqr() + u1.norm_sqr()).sqrt();
    let (u0, u1) = (u0 / n, u1 / n);
    let vectors = Op::<2>::new(u0, -u1.conj(), u1, u0.conj());
    Eigen {
        values: [a + r, a - r],
        vectors,
    }
}

/// Cyclic Jacobi diagonalization of a 3×3 Hermitian matrix.
fn jacobi_eigen3(h: &Op<3>) -> Eigen<3> {
    let mut a = [[ZERO; 3]; 3];
    for r in 0..3 {
        for col in 0..3 {
            a[r][col] = h[(r, col)];
        }
    }
    let mut v = [[ZERO, ZERO, ZERO], [ZERO, ZERO, ZERO], [ZERO, ZERO, ZERO]];
    for (k, row) in v.iter_mut().enumerate() {
        row[k] = ONE;
    }
    let scale = h.norm();
    let eps = 1e-16 * scale.max(f64::MIN_POSITIVE);

    for _sweep in 0..16 {
        let off = a[0][1].norm() + a[0][2].norm() + a[1][2].norm();
        if off <= eps {
            break;
        }
        for &(p, q) in &[(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = a[p][q];
            let r = apq.norm();
            if r <= eps * 1e-3 {
                continue;
            }
            let phase = apq / r; // e^{iφ}
            let theta = (a[q][q].re - a[p][p].re) / (2.0 * r);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let cs = 1.0 / (t * t + 1.0).sqrt();
            let sn = t * cs;
            let ph_conj = phase.conj();
            // A ← A J (columns p, q)
            for row in a.iter_mut() {
                let akp = row[p];
                let akq = row[q];
                row[p] = akp * cs - akq * ph_conj * sn;
                row[q] = akp * sn + akq * ph_conj * cs;
            }
            // A ← J† A (rows p, q)
            for col in 0..3 {
                let apk = a[p][col];
                let aqk = a[q][col];
                a[p][col] = apk * cs - aqk * phase * sn;
                a[q][col] = apk * sn + aqk * phase * cs;
            }
            a[p][q] = ZERO;
            a[q][p] = ZERO;
            a[p][p] = c(a[p][p].re);
            a[q][q] = c(a[q][q].re);
            for row in v.iter_mut() {
                let vkp = row[p];
                let vkq = row[q];
                row[p] = vkp * cs - vkq * ph_conj * sn;
                row[q] = vkp * sn + vkq * ph_conj * cs;
            }
        }
    }
    Eigen {
        values: [a[0][0].re, a[1][1].re, a[2][2].re],
        vectors: Op::<3>::from_fn(|r, col| v[r][col]),
    }
}
