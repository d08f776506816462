//! Dense complex linear algebra and entropy primitives.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`; every operator in the crate
//! lives on a few thousand dimensions at most, so storage is always dense.
//! Entropies are in bits.

use nalgebra::{DMatrix, DVector, Dim, Matrix, RawStorage};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

/// Max-entry Hermiticity tolerance for density operators.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Trace tolerance for density operators.
pub const TRACE_TOL: f64 = 1e-10;
/// Smallest eigenvalue still accepted as positive.
pub const PSD_TOL: f64 = 1e-9;
/// Norm tolerance for pure states.
pub const NORM_TOL: f64 = 1e-12;
/// Relative eigenvalue cutoff separating support from null space.
pub const SUPPORT_CUTOFF: f64 = 1e-10;
/// Probabilities below this are treated as zero inside entropies.
pub const PROB_FLOOR: f64 = 1e-15;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Largest entry of `|M - M†|`.
pub fn hermitian_deviation(m: &ComplexMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Largest entry modulus.
pub fn max_abs<R: Dim, C: Dim, S: RawStorage<C64, R, C>>(m: &Matrix<C64, R, C, S>) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn is_hermitian(m: &ComplexMatrix, tol: f64) -> bool {
    hermitian_deviation(m) <= tol
}

/// `(M + M†) / 2`.
pub fn hermitize(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()) * c(0.5, 0.0)
}

pub fn trace(m: &ComplexMatrix) -> C64 {
    m.diagonal().iter().sum()
}

pub fn identity(dim: usize) -> ComplexMatrix {
    ComplexMatrix::identity(dim, dim)
}

fn require_square(m: &ComplexMatrix, what: &str) -> Result<usize> {
    if m.is_square() {
        Ok(m.nrows())
    } else {
        Err(Error::Dimension(format!(
            "{what} needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// Spectral decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector for `values[k]`.
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }
}

/// Eigendecomposition after re-symmetrizing `m`. The caller is responsible
/// for `m` being Hermitian up to round-off.
pub fn hermitian_eigen(m: &ComplexMatrix) -> Result<HermitianEigen> {
    let n = require_square(m, "eigendecomposition")?;
    if n == 0 {
        return Ok(HermitianEigen {
            values: Vec::new(),
            vectors: ComplexMatrix::zeros(0, 0),
        });
    }
    let eig = hermitize(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(HermitianEigen { values, vectors })
}

pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Result<Vec<f64>> {
    let n = require_square(m, "eigendecomposition")?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut values: Vec<f64> = hermitize(m).symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(|a, b| a.total_cmp(b));
    Ok(values)
}

/// Sum of singular values. Hermitian inputs go through the eigensolver,
/// everything else through the SVD.
pub fn trace_norm(m: &ComplexMatrix) -> Result<f64> {
    require_square(m, "trace norm")?;
    if is_hermitian(m, 1e-12 * (1.0 + max_abs(m))) {
        Ok(hermitian_eigenvalues(m)?.iter().map(|v| v.abs()).sum())
    } else {
        Ok(m.singular_values().iter().sum())
    }
}

/// Largest absolute eigenvalue of a Hermitian matrix.
pub fn operator_norm(m: &ComplexMatrix) -> Result<f64> {
    require_square(m, "operator norm")?;
    let dev = hermitian_deviation(m);
    if dev > 1e-9 {
        return Err(Error::Contract(format!(
            "operator norm needs a Hermitian matrix (deviation {dev:.3e})"
        )));
    }
    Ok(hermitian_eigenvalues(m)?
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs())))
}

/// Projector onto the eigenvectors of `m` whose eigenvalues exceed
/// `SUPPORT_CUTOFF` times the largest one.
pub fn support_projector(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = hermitian_eigen(m)?;
    let cutoff = retained_cutoff(&eig);
    Ok(spectral_sum(&eig, |v| if v > cutoff { 1.0 } else { 0.0 }))
}

fn retained_cutoff(eig: &HermitianEigen) -> f64 {
    let top = eig.values.last().copied().unwrap_or(0.0).max(0.0);
    SUPPORT_CUTOFF * top
}

/// `Σ_k f(λ_k) |v_k⟩⟨v_k|`, skipping zero weights.
pub fn spectral_sum(eig: &HermitianEigen, f: impl Fn(f64) -> f64) -> ComplexMatrix {
    let n = eig.vectors.nrows();
    let mut out = ComplexMatrix::zeros(n, n);
    for (k, &value) in eig.values.iter().enumerate() {
        let w = f(value);
        if w == 0.0 {
            continue;
        }
        let v = eig.vectors.column(k);
        out.ger(c(w, 0.0), &v, &v.conjugate(), c(1.0, 0.0));
    }
    out
}

/// Pseudo-inverse square root of a Hermitian PSD matrix: eigenvalues above the
/// relative cutoff map to `λ^{-1/2}`, the rest to zero.
pub fn hermitian_inv_sqrt(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    require_square(m, "inverse square root")?;
    let dev = hermitian_deviation(m);
    if dev > 1e-9 * (1.0 + max_abs(m)) {
        return Err(Error::Contract(format!(
            "inverse square root needs a Hermitian matrix (deviation {dev:.3e})"
        )));
    }
    let eig = hermitian_eigen(m)?;
    let cutoff = retained_cutoff(&eig);
    Ok(spectral_sum(&eig, |v| if v > cutoff { 1.0 / v.sqrt() } else { 0.0 }))
}

/// Kronecker product, first factor's index major.
pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Shannon entropy in bits. Entries down to `-1e-12` and a total off by up to
/// `1e-9` are tolerated; entries are clamped into `[0, 1]`.
pub fn shannon_entropy(p: &[f64]) -> Result<f64> {
    let total: f64 = p.iter().sum();
    if let Some(bad) = p.iter().find(|&&x| x < -1e-12 || !x.is_finite()) {
        return Err(Error::Domain(format!("probability entry {bad} is negative")));
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!(
            "probabilities sum to {total}, not 1"
        )));
    }
    Ok(entropy_bits(p.iter().copied()))
}

/// `-Σ p log₂ p` with entries clamped to `[0, 1]` and tiny entries dropped.
pub(crate) fn entropy_bits(p: impl IntoIterator<Item = f64>) -> f64 {
    let mut h = 0.0;
    for x in p {
        let x = x.clamp(0.0, 1.0);
        if x > PROB_FLOOR {
            h -= x * x.log2();
        }
    }
    h.max(0.0)
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: ComplexMatrix,
}

impl DensityOperator {
    /// Validates every invariant, including positivity via a full eigensolve.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let n = require_square(&matrix, "density operator")?;
        if n == 0 {
            return Err(Error::Dimension("density operator of dimension 0".into()));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Contract("density operator has non-finite entries".into()));
        }
        let dev = hermitian_deviation(&matrix);
        if dev > HERMITIAN_TOL {
            return Err(Error::Contract(format!(
                "density operator not Hermitian (deviation {dev:.3e})"
            )));
        }
        let tr = trace(&matrix);
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::Contract(format!("density operator trace is {tr}")));
        }
        let min = hermitian_eigenvalues(&matrix)?[0];
        if min < -PSD_TOL {
            return Err(Error::Contract(format!(
                "density operator has eigenvalue {min:.3e}"
            )));
        }
        Ok(Self {
            matrix: hermitize(&matrix),
        })
    }

    /// Wraps the output of a trace-preserving map applied to a valid state.
    pub(crate) fn trusted(matrix: ComplexMatrix) -> Self {
        debug_assert!(matrix.is_square());
        Self {
            matrix: hermitize(&matrix),
        }
    }

    pub fn from_pure(state: &PureState) -> Self {
        Self::trusted(state.projector())
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: identity(dim) * c(1.0 / dim as f64, 0.0),
        }
    }

    /// `Σ p_i ρ_i`; weights must form a distribution.
    pub fn mixture(parts: &[(f64, DensityOperator)]) -> Result<Self> {
        let dim = parts
            .first()
            .map(|(_, r)| r.dim())
            .ok_or_else(|| Error::Domain("empty mixture".into()))?;
        check_distribution(parts.iter().map(|(p, _)| *p))?;
        let mut m = ComplexMatrix::zeros(dim, dim);
        for (p, r) in parts {
            if r.dim() != dim {
                return Err(Error::Dimension("mixture components differ in dimension".into()));
            }
            m += r.matrix() * c(*p, 0.0);
        }
        Ok(Self::trusted(m))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix).expect("density operators are square")
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn fidelity_with(&self, psi: &PureState) -> f64 {
        let v = psi.amplitudes();
        (v.adjoint() * &self.matrix * v)[(0, 0)].re
    }
}

pub(crate) fn check_distribution(weights: impl IntoIterator<Item = f64>) -> Result<()> {
    let mut total = 0.0;
    for w in weights {
        if !(w >= 0.0) {
            return Err(Error::Domain(format!("weight {w} is negative")));
        }
        total += w;
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("weights sum to {total}, not 1")));
    }
    Ok(())
}

/// Unit vector in `C^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: ComplexVector,
}

impl PureState {
    pub fn new(amplitudes: ComplexVector) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::Dimension("pure state of dimension 0".into()));
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Contract(format!("state norm is {norm}")));
        }
        Ok(Self { amplitudes })
    }

    /// Rescales a nonzero vector to unit norm.
    pub fn normalized(v: ComplexVector) -> Result<Self> {
        let norm = v.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Contract("cannot normalize a zero vector".into()));
        }
        Ok(Self {
            amplitudes: v / c(norm, 0.0),
        })
    }

    /// Computational basis vector `|k⟩`.
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::Dimension(format!("basis index {k} outside dimension {dim}")));
        }
        let mut v = ComplexVector::zeros(dim);
        v[k] = c(1.0, 0.0);
        Ok(Self { amplitudes: v })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &ComplexVector {
        &self.amplitudes
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn projector(&self) -> ComplexMatrix {
        &self.amplitudes * self.amplitudes.adjoint()
    }
}

/// Trace-norm distance `‖φφ† − ψψ†‖₁ = 2 sqrt(1 − |⟨φ|ψ⟩|²)`.
pub fn pure_trace_distance(phi: &PureState, psi: &PureState) -> Result<f64> {
    if phi.dim() != psi.dim() {
        return Err(Error::Dimension(format!(
            "states of dimension {} and {}",
            phi.dim(),
            psi.dim()
        )));
    }
    let overlap = phi.inner(psi).norm_sqr().min(1.0);
    Ok(2.0 * (1.0 - overlap).max(0.0).sqrt())
}

/// `C^{dim_a} ⊗ C^{dim_b}`, A-index major.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BipartiteSpace {
    pub dim_a: usize,
    pub dim_b: usize,
}

impl BipartiteSpace {
    pub fn new(dim_a: usize, dim_b: usize) -> Result<Self> {
        if dim_a == 0 || dim_b == 0 {
            return Err(Error::Dimension("bipartite factors must be positive".into()));
        }
        Ok(Self { dim_a, dim_b })
    }

    pub fn total(&self) -> usize {
        self.dim_a * self.dim_b
    }
}

/// The subsystem traced out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    A,
    B,
}

pub fn partial_trace_matrix(
    m: &ComplexMatrix,
    space: BipartiteSpace,
    traced: Side,
) -> Result<ComplexMatrix> {
    if m.nrows() != space.total() || m.ncols() != space.total() {
        return Err(Error::Dimension(format!(
            "{}x{} matrix does not factor as {}x{}",
            m.nrows(),
            m.ncols(),
            space.dim_a,
            space.dim_b
        )));
    }
    let (da, db) = (space.dim_a, space.dim_b);
    Ok(match traced {
        Side::B => ComplexMatrix::from_fn(da, da, |a, a2| {
            (0..db).map(|b| m[(a * db + b, a2 * db + b)]).sum()
        }),
        Side::A => ComplexMatrix::from_fn(db, db, |b, b2| {
            (0..da).map(|a| m[(a * db + b, a * db + b2)]).sum()
        }),
    })
}

/// Reduced state after tracing out `traced`.
pub fn partial_trace(
    rho: &DensityOperator,
    space: BipartiteSpace,
    traced: Side,
) -> Result<DensityOperator> {
    partial_trace_matrix(rho.matrix(), space, traced).map(DensityOperator::trusted)
}

/// Entropy of the spectrum, in bits.
pub fn von_neumann_entropy(rho: &DensityOperator) -> f64 {
    entropy_bits(rho.eigenvalues())
}
