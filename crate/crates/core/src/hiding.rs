//! Data hiding on `C^d ⊗ C^d`.
//!
//! A `p`-dimensional message space `S ⊂ C^{d²}` is randomized by an ensemble
//! `{U_i}`. With `N = Σ_i U_i P U_i†` the decoder has Kraus operators
//! `D_i = P U_i† N^{-1/2}`, written here in the basis of `S` as
//! `W_i† N^{-1/2}` where `W_i = U_i B` and `B` holds the basis of `S` as
//! columns. `Σ_i D_i† D_i` is the support projector `F F†` of `N`, so the
//! failure operator `K₀ = I − F F†` completes the channel.
//!
//! `N` has rank at most `n·p`. When that is below `d²` the orthonormal frame
//! `F` of its support and the spectrum come from the `np × np` Gram matrix
//! `W†W` instead of a `d² × d²` eigendecomposition.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{
    c, hermitian_eigen, hermitian_eigenvalues, identity, max_abs, trace, ComplexMatrix,
    ComplexVector, DensityOperator, PureState, SUPPORT_CUTOFF,
};
use crate::sampler::{build_ensemble, haar_unitary, EnsembleKind, SeededStream, UnitaryEnsemble};

/// Kraus completeness tolerance.
pub const KRAUS_TOL: f64 = 1e-8;
/// Product POVM completeness tolerance.
pub const POVM_TOL: f64 = 1e-8;

/// The constant `(6 ln 2)^{-1}` from the concentration estimate.
pub fn concentration_constant() -> f64 {
    1.0 / (6.0 * std::f64::consts::LN_2)
}

#[derive(Debug, Clone)]
pub struct HidingScheme {
    d: usize,
    p: usize,
    basis: ComplexMatrix,
    ensemble: UnitaryEnsemble,
    images: Vec<ComplexMatrix>,
    /// `N^{-1/2} W_i`; column `j` is `D_i†|j̄⟩`.
    decoder_images: Vec<ComplexMatrix>,
    frame: ComplexMatrix,
    n_op: ComplexMatrix,
    n_inv_sqrt: ComplexMatrix,
    /// `K₀†K₀`.
    failure_effect: ComplexMatrix,
}

/// Orthonormal frame of the support of `N = W W†` and the matching
/// `λ^{-1/2}` weights.
fn support_frame(wide: &ComplexMatrix) -> Result<(ComplexMatrix, Vec<f64>)> {
    let (rows, cols) = wide.shape();
    let use_gram = cols < rows;
    let eig = if use_gram {
        hermitian_eigen(&wide.ad_mul(wide))?
    } else {
        hermitian_eigen(&(wide * wide.adjoint()))?
    };
    let top = eig.values.last().copied().unwrap_or(0.0).max(0.0);
    let kept: Vec<usize> = (0..eig.values.len())
        .filter(|&k| eig.values[k] > SUPPORT_CUTOFF * top)
        .collect();
    let mut frame = ComplexMatrix::zeros(rows, kept.len());
    let mut weights = Vec::with_capacity(kept.len());
    for (col, &k) in kept.iter().enumerate() {
        let w = 1.0 / eig.values[k].sqrt();
        let v = eig.vectors.column(k);
        if use_gram {
            frame.set_column(col, &((wide * v) * c(w, 0.0)));
        } else {
            frame.set_column(col, &v);
        }
        weights.push(w);
    }
    Ok((frame, weights))
}

/// Builds a scheme with `d`-dimensional shares, a `p`-dimensional hidden
/// space and `n` randomizing unitaries on `C^{d²}`.
///
/// The hidden space is spanned by the first `p` columns of one Haar unitary
/// drawn from `stream.derive(0)`; the ensemble comes from `stream.derive(1)`.
/// Haar ensembles must satisfy `n·p ≤ d⁴`.
pub fn build_scheme(
    d: usize,
    p: usize,
    n: usize,
    kind: EnsembleKind,
    stream: &SeededStream,
) -> Result<HidingScheme> {
    if d < 2 || p == 0 || n == 0 {
        return Err(Error::Domain(format!(
            "scheme needs d ≥ 2, p ≥ 1, n ≥ 1; got d={d}, p={p}, n={n}"
        )));
    }
    if p > d {
        return Err(Error::Guard(format!("hidden dimension p={p} exceeds d={d}")));
    }
    let total = d * d;
    if kind == EnsembleKind::Haar && n * p > total * total {
        return Err(Error::Guard(format!(
            "n·p = {} exceeds (d²)² = {}",
            n * p,
            total * total
        )));
    }
    let rotation = haar_unitary(total, &mut stream.derive(0).rng());
    let basis = rotation.columns(0, p).into_owned();
    let ensemble = build_ensemble(total, n, kind, &stream.derive(1))?;
    let images: Vec<ComplexMatrix> = ensemble.members().map(|u| u.apply_block(&basis)).collect();
    let mut wide = ComplexMatrix::zeros(total, n * p);
    for (i, w) in images.iter().enumerate() {
        wide.columns_mut(i * p, p).copy_from(w);
    }
    let n_op = &wide * wide.adjoint();
    let (frame, weights) = support_frame(&wide)?;
    let mut n_inv_sqrt = ComplexMatrix::zeros(total, total);
    for (k, &w) in weights.iter().enumerate() {
        let f = frame.column(k);
        n_inv_sqrt.ger(c(w, 0.0), &f, &f.conjugate(), c(1.0, 0.0));
    }
    let decoder_images = images.iter().map(|w| &n_inv_sqrt * w).collect();
    // (I − FF†)†(I − FF†) = I − 2FF† + F(F†F)F†, exact even if F drifts
    // slightly from orthonormality.
    let gram = frame.ad_mul(&frame);
    let proj = &frame * frame.adjoint();
    let failure_effect = identity(total) - &proj * c(2.0, 0.0) + &frame * gram * frame.adjoint();
    Ok(HidingScheme {
        d,
        p,
        basis,
        ensemble,
        images,
        decoder_images,
        frame,
        n_op,
        n_inv_sqrt,
        failure_effect,
    })
}

/// Residuals of the structural identities of a scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeInvariants {
    pub projector_idempotence: f64,
    pub projector_trace_error: f64,
    pub n_residual: f64,
    pub inv_sqrt_residual: f64,
}

impl SchemeInvariants {
    pub fn hold(&self) -> bool {
        self.projector_idempotence <= 1e-9
            && self.projector_trace_error <= 1e-9
            && self.n_residual <= 1e-9
            && self.inv_sqrt_residual <= 1e-7
    }
}

impl HidingScheme {
    pub fn share_dim(&self) -> usize {
        self.d
    }

    pub fn total_dim(&self) -> usize {
        self.d * self.d
    }

    pub fn hidden_dim(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.ensemble.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ensemble.is_empty()
    }

    pub fn ensemble(&self) -> &UnitaryEnsemble {
        &self.ensemble
    }

    /// Orthonormal basis of the hidden space, one column per vector.
    pub fn subspace_basis(&self) -> &ComplexMatrix {
        &self.basis
    }

    pub fn projector(&self) -> ComplexMatrix {
        &self.basis * self.basis.adjoint()
    }

    pub fn n_operator(&self) -> &ComplexMatrix {
        &self.n_op
    }

    pub fn n_inv_sqrt(&self) -> &ComplexMatrix {
        &self.n_inv_sqrt
    }

    pub fn invariants(&self) -> SchemeInvariants {
        let proj = self.projector();
        let mut n_direct = ComplexMatrix::zeros(self.total_dim(), self.total_dim());
        for u in self.ensemble.members() {
            n_direct += u.conjugate(&proj);
        }
        let support = &self.frame * self.frame.adjoint();
        SchemeInvariants {
            projector_idempotence: max_abs(&(&proj * &proj - &proj)),
            projector_trace_error: (trace(&proj).re - self.p as f64).abs(),
            n_residual: max_abs(&(n_direct - &self.n_op)),
            inv_sqrt_residual: max_abs(&(&self.n_inv_sqrt * &self.n_op * &self.n_inv_sqrt - support)),
        }
    }

    /// Rank of `N`.
    pub fn support_rank(&self) -> usize {
        self.frame.ncols()
    }

    /// `‖Σ_i D_i†D_i + K₀†K₀ − I‖_max`, summing the Kraus terms one by one.
    pub fn kraus_completeness_residual(&self) -> Result<f64> {
        self.check_frame()?;
        let mut sum = self.failure_effect.clone();
        for a in &self.decoder_images {
            sum += a * a.adjoint();
        }
        Ok(max_abs(&(sum - identity(self.total_dim()))))
    }

    /// `K₀ = I − F F†`, the projector onto the kernel of `N`.
    pub fn failure_kraus(&self) -> Result<ComplexMatrix> {
        self.check_frame()?;
        Ok(identity(self.total_dim()) - &self.frame * self.frame.adjoint())
    }

    /// `Σ_i D_i†D_i = F F†` must not exceed the identity.
    fn check_frame(&self) -> Result<()> {
        let values = hermitian_eigenvalues(&self.frame.ad_mul(&self.frame))?;
        if let Some(&top) = values.last() {
            if top > 1.0 + KRAUS_TOL {
                return Err(Error::Contract(format!(
                    "decoder completion has eigenvalue {:.3e}",
                    1.0 - top
                )));
            }
        }
        Ok(())
    }

    fn embed(&self, phi: &PureState) -> Result<ComplexVector> {
        if phi.dim() != self.p {
            return Err(Error::Dimension(format!(
                "hidden state has dimension {}, scheme hides {}",
                phi.dim(),
                self.p
            )));
        }
        Ok(&self.basis * phi.amplitudes())
    }

    /// Column `j` of `U_i B`, i.e. `U_i|j̄⟩`.
    fn image(&self, i: usize, j: usize) -> ComplexVector {
        self.images[i].column(j).into_owned()
    }
}

/// Embeds `φ` into the hidden space; with a key returns the keyed share
/// `U_i ι(φ) U_i†`, without one the keyless average.
pub fn encode(s: &HidingScheme, phi: &PureState, key: Option<usize>) -> Result<DensityOperator> {
    let v = s.embed(phi)?;
    match key {
        Some(i) if i >= s.len() => Err(Error::Domain(format!(
            "key {i} outside ensemble of size {}",
            s.len()
        ))),
        Some(i) => {
            let w = s.ensemble.member(i).apply(&v);
            Ok(DensityOperator::trusted(&w * w.adjoint()))
        }
        None => {
            let total = s.total_dim();
            let mut acc = ComplexMatrix::zeros(total, total);
            for u in s.ensemble.members() {
                let w = u.apply(&v);
                acc.ger(c(1.0, 0.0), &w, &w.conjugate(), c(1.0, 0.0));
            }
            Ok(DensityOperator::trusted(acc * c(1.0 / s.len() as f64, 0.0)))
        }
    }
}

/// Result of running the decoder.
#[derive(Debug, Clone)]
pub struct DecoderOutcome {
    /// State on the hidden space after mixing the success branches.
    pub recovered: DensityOperator,
    /// `Tr(D_i σ D_i†)` for each `i`, then the failure probability.
    pub branch_probabilities: Vec<f64>,
}

impl DecoderOutcome {
    pub fn failure_probability(&self) -> f64 {
        *self.branch_probabilities.last().expect("failure branch present")
    }
}

pub fn decode(s: &HidingScheme, sigma: &DensityOperator) -> Result<DecoderOutcome> {
    if sigma.dim() != s.total_dim() {
        return Err(Error::Dimension(format!(
            "decoder acts on dimension {}, got {}",
            s.total_dim(),
            sigma.dim()
        )));
    }
    let sigma = sigma.matrix();
    let mut recovered = ComplexMatrix::zeros(s.p, s.p);
    let mut probs = Vec::with_capacity(s.len() + 1);
    for a in &s.decoder_images {
        let branch = a.ad_mul(&(sigma * a));
        probs.push(trace(&branch).re);
        recovered += branch;
    }
    let failure = trace_of_product(&s.failure_effect, sigma);
    probs.push(failure);
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Contract(format!(
            "decoder branch probabilities sum to {total}"
        )));
    }
    let success = total - failure;
    if !(success > 1e-14) {
        return Err(Error::Contract("decoder never succeeds on this input".into()));
    }
    Ok(DecoderOutcome {
        recovered: DensityOperator::trusted(recovered * c(1.0 / success, 0.0)),
        branch_probabilities: probs,
    })
}

/// `Tr(A B)` without forming the product.
fn trace_of_product(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let mut acc = c(0.0, 0.0);
    for k in 0..a.nrows() {
        for l in 0..a.ncols() {
            acc += a[(k, l)] * b[(l, k)];
        }
    }
    acc.re
}

/// `⟨φ| D(R(ι(φ))) |φ⟩` for the keyless encoding.
pub fn round_trip_fidelity(s: &HidingScheme, phi: &PureState) -> Result<f64> {
    let out = decode(s, &encode(s, phi, None)?)?;
    Ok(out.recovered.fidelity_with(phi))
}

/// Pretty good measurement `M_ij = N^{-1/2} U_i|j̄⟩⟨j̄|U_i† N^{-1/2}`,
/// ordered with `i` major, followed by the completion `I − Σ M_ij`.
pub fn pgm_povm(s: &HidingScheme) -> Vec<ComplexMatrix> {
    let total = s.total_dim();
    let mut elements = Vec::with_capacity(s.len() * s.p + 1);
    let mut sum = ComplexMatrix::zeros(total, total);
    for a in &s.decoder_images {
        for j in 0..s.p {
            let v = a.column(j);
            let m = v * v.adjoint();
            sum += &m;
            elements.push(m);
        }
    }
    elements.push(identity(total) - sum);
    elements
}

/// `⟨j̄| D_i ρ D_i† |j̄⟩`, the two-stage form of the PGM outcome `(i, j)`.
pub fn decoder_outcome_probability(s: &HidingScheme, rho: &ComplexMatrix, i: usize, j: usize) -> f64 {
    let v = s.decoder_images[i].column(j);
    v.dotc(&(rho * v)).re
}

/// One term of the success criterion for the pretty good measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaTerm {
    pub i: usize,
    pub j: usize,
    /// `Σ_{(i',j') ≠ (i,j)} |⟨j̄|U_i† U_{i'}|j̄'⟩|²`.
    pub delta: f64,
    /// Largest same-key term (`i' = i`, `j' ≠ j`); zero up to round-off.
    pub same_key_max: f64,
    /// `|⟨j̄|D_i U_i|j̄⟩|²`.
    pub recovery: f64,
    /// `1 − recovery ≤ delta + 1e-9`.
    pub criterion_holds: bool,
}

pub fn delta_ij(s: &HidingScheme, i: usize, j: usize) -> Result<DeltaTerm> {
    if i >= s.len() || j >= s.p {
        return Err(Error::Domain(format!(
            "index ({i}, {j}) outside {}×{}",
            s.len(),
            s.p
        )));
    }
    let target = s.image(i, j);
    let mut delta = 0.0;
    let mut same_key_max: f64 = 0.0;
    for (i2, w) in s.images.iter().enumerate() {
        let overlaps = w.ad_mul(&target);
        for (j2, z) in overlaps.iter().enumerate() {
            if i2 == i && j2 == j {
                continue;
            }
            let term = z.norm_sqr();
            if i2 == i {
                same_key_max = same_key_max.max(term);
            }
            delta += term;
        }
    }
    let amplitude = target.dotc(&s.decoder_images[i].column(j));
    let recovery = amplitude.norm_sqr();
    Ok(DeltaTerm {
        i,
        j,
        delta,
        same_key_max,
        recovery,
        criterion_holds: 1.0 - recovery <= delta + 1e-9,
    })
}

pub fn all_deltas(s: &HidingScheme) -> Result<Vec<DeltaTerm>> {
    (0..s.len())
        .flat_map(|i| (0..s.p).map(move |j| (i, j)))
        .map(|(i, j)| delta_ij(s, i, j))
        .collect()
}

/// Haar expectation `(n−1)p/D` of every `Δ_ij`.
pub fn expected_delta(n: usize, p: usize, total_dim: usize) -> f64 {
    (n as f64 - 1.0) * p as f64 / total_dim as f64
}

/// Complete POVM whose elements are products `X_i ⊗ Y_i`.
#[derive(Debug, Clone)]
pub struct ProductPOVM {
    d: usize,
    elements: Vec<(ComplexMatrix, ComplexMatrix)>,
}

impl ProductPOVM {
    pub fn new(d: usize, elements: Vec<(ComplexMatrix, ComplexMatrix)>) -> Result<Self> {
        let mut sum = ComplexMatrix::zeros(d * d, d * d);
        for (x, y) in &elements {
            if x.nrows() != d || x.ncols() != d || y.nrows() != d || y.ncols() != d {
                return Err(Error::Dimension(format!("POVM factors must be {d}×{d}")));
            }
            for f in [x, y] {
                if hermitian_eigenvalues(f)?[0] < -1e-9 {
                    return Err(Error::Contract("POVM factor is not positive".into()));
                }
            }
            sum += x.kronecker(y);
        }
        let residual = max_abs(&(sum - identity(d * d)));
        if residual > POVM_TOL {
            return Err(Error::Contract(format!(
                "product POVM incomplete (residual {residual:.3e})"
            )));
        }
        Ok(Self { d, elements })
    }

    pub fn share_dim(&self) -> usize {
        self.d
    }

    pub fn elements(&self) -> &[(ComplexMatrix, ComplexMatrix)] {
        &self.elements
    }

    /// `Tr(ρ (X_k ⊗ Y_k))` for every element.
    pub fn outcome_distribution(&self, rho: &ComplexMatrix) -> Vec<f64> {
        let d = self.d;
        self.elements
            .iter()
            .map(|(x, y)| {
                let mut acc = c(0.0, 0.0);
                for a in 0..d {
                    for b in 0..d {
                        let row = a * d + b;
                        for a2 in 0..d {
                            let xa = x[(a2, a)];
                            for b2 in 0..d {
                                acc += rho[(row, a2 * d + b2)] * xa * y[(b2, b)];
                            }
                        }
                    }
                }
                acc.re
            })
            .collect()
    }
}

/// Rank-one product basis `{V|a⟩⟨a|V† ⊗ W|b⟩⟨b|W†}` for Haar `V`, `W`.
pub fn random_product_povm<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ProductPOVM {
    let v = haar_unitary(d, rng);
    let w = haar_unitary(d, rng);
    let mut elements = Vec::with_capacity(d * d);
    for a in 0..d {
        let va = v.column(a);
        let x = va * va.adjoint();
        for b in 0..d {
            let wb = w.column(b);
            elements.push((x.clone(), wb * wb.adjoint()));
        }
    }
    ProductPOVM { d, elements }
}

/// ℓ1 distance between the product-POVM statistics of the keyless
/// encodings of `phi0` and `phi1`.
pub fn security_probe(
    s: &HidingScheme,
    phi0: &PureState,
    phi1: &PureState,
    povm: &ProductPOVM,
) -> Result<f64> {
    if povm.d != s.d {
        return Err(Error::Dimension(format!(
            "POVM acts on {}×{} shares, scheme on {}×{}",
            povm.d, povm.d, s.d, s.d
        )));
    }
    let rho0 = encode(s, phi0, None)?;
    let rho1 = encode(s, phi1, None)?;
    let q0 = povm.outcome_distribution(rho0.matrix());
    let q1 = povm.outcome_distribution(rho1.matrix());
    let total: f64 = q0.iter().sum();
    if (total - 1.0).abs() > POVM_TOL {
        return Err(Error::Contract(format!(
            "POVM outcome probabilities sum to {total}"
        )));
    }
    Ok(q0.iter().zip(&q1).map(|(a, b)| (a - b).abs()).sum())
}

/// `2 sqrt(α)`: trace-norm error implied by fidelity deficit `α`.
pub fn correctness_to_trace(alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!("α = {alpha} must lie in [0, 1]")));
    }
    Ok(2.0 * alpha.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    /// `⌊C δ² ε² d / (1188 log₂ d)⌋`.
    pub p: u64,
    pub p_real: f64,
    pub constant: f64,
    /// `d > max(36/(Cδ²), sqrt(15/ε), 21)`.
    pub dimension_condition: bool,
    /// `ε² log₂(40/δ²) < 1`.
    pub epsilon_condition: bool,
    /// `log p / log d²`, tending to ½.
    pub qubit_ratio: f64,
}

pub fn hiding_capacity(d: f64, delta: f64, epsilon: f64) -> CapacityReport {
    let constant = concentration_constant();
    let log_d = d.log2();
    let p_real = constant * delta * delta * epsilon * epsilon * d / (1188.0 * log_d);
    let threshold = (36.0 / (constant * delta * delta))
        .max((15.0 / epsilon).sqrt())
        .max(21.0);
    CapacityReport {
        p: p_real.max(0.0).floor() as u64,
        p_real,
        constant,
        dimension_condition: d > threshold,
        epsilon_condition: epsilon * epsilon * (40.0 / (delta * delta)).log2() < 1.0,
        qubit_ratio: p_real.log2() / (2.0 * log_d),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::haar_pure_state;

    fn scheme(d: usize, p: usize, n: usize) -> HidingScheme {
        build_scheme(d, p, n, EnsembleKind::Haar, &SeededStream::new(77)).unwrap()
    }

    #[test]
    fn small_scheme_satisfies_invariants() {
        let s = scheme(8, 2, 4);
        assert!(s.invariants().hold(), "{:?}", s.invariants());
        assert!(s.kraus_completeness_residual().unwrap() < KRAUS_TOL);
        assert_eq!(s.total_dim(), 64);
    }

    #[test]
    fn single_unitary_scheme_is_perfect() {
        let s = scheme(4, 3, 1);
        let proj = s.projector();
        let conj = s.ensemble().member(0).conjugate(&proj);
        assert!(max_abs(&(s.n_operator() - &conj)) < 1e-12);
        let phi = haar_pure_state(3, &mut SeededStream::new(1).rng());
        assert!((round_trip_fidelity(&s, &phi).unwrap() - 1.0).abs() < 1e-10);
        for term in all_deltas(&s).unwrap() {
            assert!(term.delta < 1e-24);
            assert!((term.recovery - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn single_unitary_pgm_is_the_rotated_basis() {
        let s = scheme(3, 2, 1);
        let povm = pgm_povm(&s);
        assert_eq!(povm.len(), 3);
        for (j, m) in povm.iter().take(2).enumerate() {
            let w = s.ensemble().member(0).apply(&s.subspace_basis().column(j).into_owned());
            assert!(max_abs(&(m - &w * w.adjoint())) < 1e-10);
        }
    }

    #[test]
    fn encodings_have_expected_rank_and_trace() {
        let s = scheme(4, 2, 3);
        let phi = haar_pure_state(2, &mut SeededStream::new(2).rng());
        let keyed = encode(&s, &phi, Some(1)).unwrap();
        let values = keyed.eigenvalues();
        assert!((values[values.len() - 1] - 1.0).abs() < 1e-12);
        let avg = encode(&s, &phi, None).unwrap();
        let rank = avg.eigenvalues().iter().filter(|&&v| v > 1e-10).count();
        assert!(rank <= 3);
        assert!((trace(avg.matrix()).re - 1.0).abs() < 1e-12);
        assert!(matches!(encode(&s, &phi, Some(3)), Err(Error::Domain(_))));
    }

    #[test]
    fn decoder_probabilities_include_failure_branch() {
        let s = scheme(4, 2, 3);
        let out = decode(&s, &DensityOperator::maximally_mixed(16)).unwrap();
        assert_eq!(out.branch_probabilities.len(), 4);
        assert!((out.branch_probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        // N has rank ≤ 6 in dimension 16, so a flat input mostly fails.
        assert!(out.failure_probability() > 0.5);
    }

    #[test]
    fn pgm_matches_two_stage_decoder() {
        let s = scheme(4, 2, 3);
        let povm = pgm_povm(&s);
        let rho = DensityOperator::from_pure(&haar_pure_state(16, &mut SeededStream::new(5).rng()));
        for i in 0..3 {
            for j in 0..2 {
                let m = &povm[i * 2 + j];
                let lhs = (rho.matrix() * m).trace().re;
                let rhs = decoder_outcome_probability(&s, rho.matrix(), i, j);
                assert!((lhs - rhs).abs() < 1e-10);
            }
        }
        for m in &povm {
            assert!(hermitian_eigenvalues(m).unwrap()[0] > -1e-9);
        }
    }

    #[test]
    fn guards_are_enforced() {
        let st = SeededStream::new(0);
        assert!(matches!(build_scheme(4, 5, 2, EnsembleKind::Haar, &st), Err(Error::Guard(_))));
        assert!(matches!(build_scheme(2, 2, 9, EnsembleKind::Haar, &st), Err(Error::Guard(_))));
        assert!(build_scheme(2, 2, 16, EnsembleKind::Weyl, &st).is_ok());
        let s = scheme(4, 2, 2);
        assert!(matches!(delta_ij(&s, 2, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn random_product_povm_is_complete() {
        let povm = random_product_povm(3, &mut SeededStream::new(4).rng());
        assert_eq!(povm.elements().len(), 9);
        let checked = ProductPOVM::new(3, povm.elements().to_vec()).unwrap();
        let flat = DensityOperator::maximally_mixed(9);
        for q in checked.outcome_distribution(flat.matrix()) {
            assert!((q - 1.0 / 9.0).abs() < 1e-12);
        }
    }

    #[test]
    fn incomplete_product_povm_is_rejected() {
        let povm = random_product_povm(2, &mut SeededStream::new(4).rng());
        let mut elements = povm.elements().to_vec();
        elements.pop();
        assert!(matches!(ProductPOVM::new(2, elements), Err(Error::Contract(_))));
    }

    #[test]
    fn outcome_distribution_matches_kronecker_trace() {
        let povm = random_product_povm(3, &mut SeededStream::new(8).rng());
        let rho = DensityOperator::from_pure(&haar_pure_state(9, &mut SeededStream::new(9).rng()));
        let fast = povm.outcome_distribution(rho.matrix());
        for (k, (x, y)) in povm.elements().iter().enumerate() {
            let slow = (rho.matrix() * x.kronecker(y)).trace().re;
            assert!((fast[k] - slow).abs() < 1e-12);
        }
    }

    #[test]
    fn correctness_conversion() {
        assert_eq!(correctness_to_trace(0.0).unwrap(), 0.0);
        let delta = 0.3;
        assert!((correctness_to_trace(delta * delta / 4.0).unwrap() - delta).abs() < 1e-15);
        assert!((correctness_to_trace(0.01).unwrap() - 0.2).abs() < 1e-15);
        assert!(correctness_to_trace(1.5).is_err());
    }

    #[test]
    fn capacity_constant_and_large_d_scaling() {
        assert!((concentration_constant() - 0.240449).abs() < 1e-6);
        let d = 2f64.powi(20);
        let rep = hiding_capacity(d, 1.0 / 16.0, 1.0 / 16.0);
        let expect = (0.240449 / 65536.0 * d / (1188.0 * 20.0)).floor() as u64;
        assert_eq!(rep.p, expect);
        // log p ≥ log d − log log d − 30 for every large d.
        for k in [20, 40, 80, 160] {
            let d = 2f64.powi(k);
            let rep = hiding_capacity(d, 1.0 / 16.0, 1.0 / 16.0);
            assert!(rep.p_real.log2() >= d.log2() - d.log2().log2() - 30.0);
        }
        let far = hiding_capacity(2f64.powi(400), 1.0 / 16.0, 1.0 / 16.0);
        assert!(far.dimension_condition);
        assert!((far.qubit_ratio - 0.5).abs() < 0.05);
    }
}
