//! Seeded sampling of Haar unitaries and states, Ginibre matrices, Weyl
//! operators and Pauli words.
//!
//! Basis labels run `0..d`. The clock operator is `Z|j⟩ = e^{2πij/d}|j⟩` and
//! the shift is `X|j⟩ = |j+1 mod d⟩`; labelling from 1 instead only changes
//! `Z` by a global phase, which drops out of every conjugation `U ρ U†`.

use std::borrow::Cow;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::matcore::{c, max_abs, ComplexMatrix, ComplexVector, PureState, C64};

/// Ensembles with more dense entries than this are regenerated on demand.
pub const MATERIALIZE_LIMIT: usize = 100_000_000;
/// Pauli words act on at most 12 qubits (matrix side 4096).
pub const MAX_QUBITS: usize = 12;

/// A reproducible random stream identified by a root seed and a derivation
/// path. Equal descriptors always produce bit-identical samples.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeededStream {
    root_seed: u64,
    path: Vec<u64>,
}

impl SeededStream {
    pub fn new(root_seed: u64) -> Self {
        Self {
            root_seed,
            path: Vec::new(),
        }
    }

    /// Child stream one level deeper.
    pub fn derive(&self, index: u64) -> Self {
        let mut path = self.path.clone();
        path.push(index);
        Self {
            root_seed: self.root_seed,
            path,
        }
    }

    pub fn root_seed(&self) -> u64 {
        self.root_seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    fn digest(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update(b"qrand-stream-v1");
        hasher.update(self.root_seed.to_le_bytes());
        hasher.update((self.path.len() as u64).to_le_bytes());
        for step in &self.path {
            hasher.update(step.to_le_bytes());
        }
        let mut out = [0u8; 32];
        out.copy_from_slice(&hasher.finalize());
        out
    }

    pub fn rng(&self) -> ChaCha20Rng {
        ChaCha20Rng::from_seed(self.digest())
    }

    /// Collapses the descriptor to a single 64-bit seed.
    pub fn fold(&self) -> u64 {
        let d = self.digest();
        u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
    }
}

fn standard_complex<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re * std::f64::consts::FRAC_1_SQRT_2, im * std::f64::consts::FRAC_1_SQRT_2)
}

/// `dim × dim` matrix of i.i.d. complex normals, each part with variance ½.
pub fn ginibre<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(dim, dim, |_, _| standard_complex(rng))
}

/// Haar-distributed unitary: QR of a Ginibre sample with the phases of
/// `diag(R)` moved into `Q`, making the factorization unique.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let qr = ginibre(dim, rng).qr();
    let r = qr.r();
    let mut q = qr.q();
    for k in 0..dim {
        let rkk = r[(k, k)];
        let modulus = rkk.norm();
        if modulus > 0.0 {
            let phase = rkk / modulus;
            for row in 0..dim {
                q[(row, k)] *= phase;
            }
        }
    }
    q
}

/// Uniformly random pure state (normalized Ginibre column).
pub fn haar_pure_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> PureState {
    loop {
        let v = ComplexVector::from_fn(dim, |_, _| standard_complex(rng));
        if let Ok(state) = PureState::normalized(v) {
            return state;
        }
    }
}

/// `count` Haar states, state `k` drawn from `stream.derive(k)`.
pub fn haar_states(dim: usize, count: usize, stream: &SeededStream) -> Vec<PureState> {
    (0..count)
        .map(|k| haar_pure_state(dim, &mut stream.derive(k as u64).rng()))
        .collect()
}

/// Unitary with exactly one nonzero entry per column:
/// `U|j⟩ = phase[j] |target[j]⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialUnitary {
    target: Vec<usize>,
    phase: Vec<C64>,
}

impl MonomialUnitary {
    pub fn dim(&self) -> usize {
        self.target.len()
    }

    pub fn to_dense(&self) -> ComplexMatrix {
        let d = self.dim();
        let mut m = ComplexMatrix::zeros(d, d);
        for j in 0..d {
            m[(self.target[j], j)] = self.phase[j];
        }
        m
    }
}

/// Exact `e^{2πi k/d}` with `k` reduced mod `d`.
fn root_of_unity(k: usize, d: usize) -> C64 {
    let (s, co) = (2.0 * PI * ((k % d) as f64) / d as f64).sin_cos();
    c(co, s)
}

/// Weyl operator `X^a Z^b` as a monomial.
pub fn weyl_monomial(dim: usize, a: usize, b: usize) -> Result<MonomialUnitary> {
    if a >= dim || b >= dim {
        return Err(Error::Domain(format!(
            "Weyl exponents ({a}, {b}) must lie in [0, {dim})"
        )));
    }
    Ok(MonomialUnitary {
        target: (0..dim).map(|j| (j + a) % dim).collect(),
        phase: (0..dim).map(|j| root_of_unity(b * j, dim)).collect(),
    })
}

/// Weyl operator `X^a Z^b` as a dense matrix.
pub fn weyl_operator(dim: usize, a: usize, b: usize) -> Result<ComplexMatrix> {
    weyl_monomial(dim, a, b).map(|m| m.to_dense())
}

/// Tensor product of single-qubit `X^x Z^z` factors; qubit 0 is the leftmost
/// factor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PauliWord {
    x_mask: Vec<bool>,
    z_mask: Vec<bool>,
}

impl PauliWord {
    pub fn new(x_mask: Vec<bool>, z_mask: Vec<bool>) -> Result<Self> {
        if x_mask.len() != z_mask.len() || x_mask.is_empty() {
            return Err(Error::Dimension(format!(
                "Pauli masks of length {} and {}",
                x_mask.len(),
                z_mask.len()
            )));
        }
        Ok(Self { x_mask, z_mask })
    }

    /// Masks written as bit strings, e.g. `("10", "01")` for `X ⊗ Z`.
    pub fn from_masks(x: &str, z: &str) -> Result<Self> {
        let parse = |s: &str| -> Result<Vec<bool>> {
            s.chars()
                .map(|ch| match ch {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    other => Err(Error::Domain(format!("bad mask character {other:?}"))),
                })
                .collect()
        };
        Self::new(parse(x)?, parse(z)?)
    }

    pub fn random<R: Rng + ?Sized>(qubits: usize, rng: &mut R) -> Self {
        let x_mask = (0..qubits).map(|_| rng.random::<bool>()).collect();
        let z_mask = (0..qubits).map(|_| rng.random::<bool>()).collect();
        Self { x_mask, z_mask }
    }

    pub fn qubit_count(&self) -> usize {
        self.x_mask.len()
    }

    fn packed(mask: &[bool]) -> usize {
        mask.iter().fold(0, |acc, &bit| (acc << 1) | bit as usize)
    }

    pub fn monomial(&self) -> Result<MonomialUnitary> {
        let q = self.qubit_count();
        if q > MAX_QUBITS {
            return Err(Error::Guard(format!(
                "Pauli word on {q} qubits exceeds the {MAX_QUBITS}-qubit cap"
            )));
        }
        let (x, z) = (Self::packed(&self.x_mask), Self::packed(&self.z_mask));
        let dim = 1usize << q;
        Ok(MonomialUnitary {
            target: (0..dim).map(|j| j ^ x).collect(),
            phase: (0..dim)
                .map(|j| {
                    if (j & z).count_ones() % 2 == 0 {
                        c(1.0, 0.0)
                    } else {
                        c(-1.0, 0.0)
                    }
                })
                .collect(),
        })
    }
}

pub fn pauli_word_unitary(word: &PauliWord) -> Result<ComplexMatrix> {
    word.monomial().map(|m| m.to_dense())
}

/// A unitary stored either densely or as a phased permutation.
#[derive(Debug, Clone, PartialEq)]
pub enum Unitary {
    Dense(ComplexMatrix),
    Monomial(MonomialUnitary),
}

impl Unitary {
    pub fn dim(&self) -> usize {
        match self {
            Unitary::Dense(m) => m.nrows(),
            Unitary::Monomial(m) => m.dim(),
        }
    }

    pub fn to_dense(&self) -> ComplexMatrix {
        match self {
            Unitary::Dense(m) => m.clone(),
            Unitary::Monomial(m) => m.to_dense(),
        }
    }

    /// `U v`.
    pub fn apply(&self, v: &ComplexVector) -> ComplexVector {
        match self {
            Unitary::Dense(m) => m * v,
            Unitary::Monomial(m) => {
                let mut out = ComplexVector::zeros(v.len());
                for j in 0..v.len() {
                    out[m.target[j]] = m.phase[j] * v[j];
                }
                out
            }
        }
    }

    /// `U† v`.
    pub fn apply_adjoint(&self, v: &ComplexVector) -> ComplexVector {
        match self {
            Unitary::Dense(m) => m.ad_mul(v),
            Unitary::Monomial(m) => {
                ComplexVector::from_fn(v.len(), |j, _| m.phase[j].conj() * v[m.target[j]])
            }
        }
    }

    /// `U M` for a block of column vectors.
    pub fn apply_block(&self, block: &ComplexMatrix) -> ComplexMatrix {
        match self {
            Unitary::Dense(m) => m * block,
            Unitary::Monomial(m) => {
                let mut out = ComplexMatrix::zeros(block.nrows(), block.ncols());
                for j in 0..block.nrows() {
                    for col in 0..block.ncols() {
                        out[(m.target[j], col)] = m.phase[j] * block[(j, col)];
                    }
                }
                out
            }
        }
    }

    /// `U M U†`.
    pub fn conjugate(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        match self {
            Unitary::Dense(u) => u * rho * u.adjoint(),
            Unitary::Monomial(m) => {
                let d = m.dim();
                let mut out = ComplexMatrix::zeros(d, d);
                for l in 0..d {
                    let pl = m.phase[l].conj();
                    let tl = m.target[l];
                    for k in 0..d {
                        out[(m.target[k], tl)] = m.phase[k] * rho[(k, l)] * pl;
                    }
                }
                out
            }
        }
    }

    /// `U† M U`.
    pub fn conjugate_adjoint(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        match self {
            Unitary::Dense(u) => u.adjoint() * rho * u,
            Unitary::Monomial(m) => {
                let d = m.dim();
                ComplexMatrix::from_fn(d, d, |k, l| {
                    m.phase[k].conj() * rho[(m.target[k], m.target[l])] * m.phase[l]
                })
            }
        }
    }

    /// `‖U†U − I‖_max`.
    pub fn unitarity_residual(&self) -> f64 {
        unitarity_residual(&self.to_dense())
    }
}

pub fn unitarity_residual(u: &ComplexMatrix) -> f64 {
    let n = u.nrows();
    max_abs(&(u.ad_mul(u) - ComplexMatrix::identity(n, n)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleKind {
    Haar,
    Weyl,
    Pauli,
}

impl fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnsembleKind::Haar => "haar",
            EnsembleKind::Weyl => "weyl",
            EnsembleKind::Pauli => "pauli",
        })
    }
}

impl FromStr for EnsembleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "haar" => Ok(EnsembleKind::Haar),
            "weyl" => Ok(EnsembleKind::Weyl),
            "pauli" => Ok(EnsembleKind::Pauli),
            other => Err(Error::Config(format!("unknown ensemble kind {other:?}"))),
        }
    }
}

/// Ordered list of `n` unitaries on `C^dim`.
///
/// Member `j` is a pure function of `(kind, dim, n, seed, j)`: Haar members
/// and random Weyl/Pauli draws come from `SeededStream::new(seed).derive(j)`.
/// A Weyl ensemble with `n = dim²` is the full group enumerated as
/// `j = a·dim + b ↦ X^a Z^b`.
#[derive(Debug, Clone)]
pub struct UnitaryEnsemble {
    dim: usize,
    size: usize,
    kind: EnsembleKind,
    seed: u64,
    members: Option<Arc<Vec<Unitary>>>,
}

impl PartialEq for UnitaryEnsemble {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.size == other.size
            && self.kind == other.kind
            && self.seed == other.seed
    }
}

/// Builds an ensemble, materializing it when it fits under
/// [`MATERIALIZE_LIMIT`] dense entries (phased permutations always fit).
pub fn build_ensemble(
    dim: usize,
    n: usize,
    kind: EnsembleKind,
    stream: &SeededStream,
) -> Result<UnitaryEnsemble> {
    let ensemble = UnitaryEnsemble::lazy(dim, n, kind, stream.fold())?;
    let fits = match kind {
        EnsembleKind::Haar => n.saturating_mul(dim * dim) <= MATERIALIZE_LIMIT,
        EnsembleKind::Weyl | EnsembleKind::Pauli => n.saturating_mul(dim) <= MATERIALIZE_LIMIT,
    };
    Ok(if fits { ensemble.materialized() } else { ensemble })
}

impl UnitaryEnsemble {
    /// Header-only ensemble; members are generated when requested.
    pub fn lazy(dim: usize, n: usize, kind: EnsembleKind, seed: u64) -> Result<Self> {
        if dim == 0 || n == 0 {
            return Err(Error::Domain("ensemble needs dim ≥ 1 and n ≥ 1".into()));
        }
        if kind == EnsembleKind::Pauli {
            if !dim.is_power_of_two() {
                return Err(Error::Domain(format!(
                    "Pauli ensemble needs a power-of-two dimension, got {dim}"
                )));
            }
            if dim.trailing_zeros() as usize > MAX_QUBITS {
                return Err(Error::Guard(format!("dimension {dim} exceeds the Pauli cap")));
            }
        }
        Ok(Self {
            dim,
            size: n,
            kind,
            seed,
            members: None,
        })
    }

    /// Wraps explicit members (used when loading from disk).
    pub(crate) fn from_members(
        kind: EnsembleKind,
        seed: u64,
        members: Vec<Unitary>,
    ) -> Result<Self> {
        let dim = members.first().map(Unitary::dim).unwrap_or(0);
        let mut e = Self::lazy(dim, members.len(), kind, seed)?;
        e.members = Some(Arc::new(members));
        Ok(e)
    }

    pub fn materialized(mut self) -> Self {
        if self.members.is_none() {
            let members = (0..self.size).map(|j| self.generate(j)).collect();
            self.members = Some(Arc::new(members));
        }
        self
    }

    pub fn into_lazy(mut self) -> Self {
        self.members = None;
        self
    }

    pub fn is_materialized(&self) -> bool {
        self.members.is_some()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn kind(&self) -> EnsembleKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// True for the enumerated full Weyl group.
    pub fn is_full_weyl(&self) -> bool {
        self.kind == EnsembleKind::Weyl && self.size == self.dim * self.dim
    }

    /// Regenerates member `j` from the seed, ignoring any cache.
    pub fn generate(&self, j: usize) -> Unitary {
        assert!(j < self.size, "member {j} out of range");
        let stream = SeededStream::new(self.seed).derive(j as u64);
        match self.kind {
            EnsembleKind::Haar => Unitary::Dense(haar_unitary(self.dim, &mut stream.rng())),
            EnsembleKind::Weyl => {
                let (a, b) = if self.is_full_weyl() {
                    (j / self.dim, j % self.dim)
                } else {
                    let mut rng = stream.rng();
                    (rng.random_range(0..self.dim), rng.random_range(0..self.dim))
                };
                Unitary::Monomial(weyl_monomial(self.dim, a, b).expect("exponents in range"))
            }
            EnsembleKind::Pauli => {
                let qubits = self.dim.trailing_zeros() as usize;
                let word = PauliWord::random(qubits, &mut stream.rng());
                Unitary::Monomial(word.monomial().expect("qubit cap checked"))
            }
        }
    }

    pub fn member(&self, j: usize) -> Cow<'_, Unitary> {
        match &self.members {
            Some(ms) => Cow::Borrowed(&ms[j]),
            None => Cow::Owned(self.generate(j)),
        }
    }

    pub fn members(&self) -> impl Iterator<Item = Cow<'_, Unitary>> + '_ {
        (0..self.size).map(move |j| self.member(j))
    }

    pub fn max_unitarity_residual(&self) -> f64 {
        self.members()
            .map(|u| u.unitarity_residual())
            .fold(0.0, f64::max)
    }
}
