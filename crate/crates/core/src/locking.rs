//! Locking of classical correlations.
//!
//! The state `ρ_AB = (1/dn) Σ_{ij} |ij⟩⟨ij| ⊗ U_j|i⟩⟨i|U_j†` is never formed;
//! everything goes through the conditional states `U_j|i⟩`. Bob's
//! accessible information is bounded through the minimum over `φ` of the
//! average measurement entropy `(1/n) Σ_j H(p_j)`, `p_ji = |⟨i|U_j†|φ⟩|²`,
//! which is estimated here by multi-restart projected gradient descent.

use std::f64::consts::LN_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{c, entropy_bits, ComplexMatrix, ComplexVector, PureState, PROB_FLOOR};
use crate::sampler::{build_ensemble, haar_pure_state, EnsembleKind, SeededStream, Unitary, UnitaryEnsemble};
use crate::stats::{mean, std_error, Summary};

/// Lower bound `1/(220 ln 2)` on the constant in Levy's lemma.
pub const LEVY_CONSTANT: f64 = 1.0 / (220.0 * LN_2);
/// `C′/8`, the constant in the entropy concentration estimate.
pub const ENTROPY_CONCENTRATION_CONSTANT: f64 = LEVY_CONSTANT / 8.0;
/// Euler's constant γ.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `n` orthonormal bases of `C^d`, basis `j` being the columns of `U_j`.
#[derive(Debug, Clone)]
pub struct BasisEnsembleState {
    d: usize,
    bases: Vec<Unitary>,
}

impl BasisEnsembleState {
    pub fn from_ensemble(ensemble: &UnitaryEnsemble) -> Self {
        Self {
            d: ensemble.dim(),
            bases: ensemble.members().map(|u| u.into_owned()).collect(),
        }
    }

    /// Computational basis followed by the discrete Fourier basis.
    pub fn mutually_unbiased_pair(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::Domain(format!("need d ≥ 2, got {d}")));
        }
        let scale = 1.0 / (d as f64).sqrt();
        let fourier = ComplexMatrix::from_fn(d, d, |j, k| {
            let angle = 2.0 * std::f64::consts::PI * ((j * k) % d) as f64 / d as f64;
            c(angle.cos() * scale, angle.sin() * scale)
        });
        Ok(Self {
            d,
            bases: vec![Unitary::Dense(ComplexMatrix::identity(d, d)), Unitary::Dense(fourier)],
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn basis_count(&self) -> usize {
        self.bases.len()
    }

    pub fn bases(&self) -> &[Unitary] {
        &self.bases
    }

    /// Bob's conditional state `U_j|i⟩` given Alice's record `(i, j)`.
    pub fn conditional_state(&self, i: usize, j: usize) -> Result<PureState> {
        if i >= self.d || j >= self.bases.len() {
            return Err(Error::Domain(format!(
                "record ({i}, {j}) outside {}×{}",
                self.d,
                self.bases.len()
            )));
        }
        let mut e = ComplexVector::zeros(self.d);
        e[i] = c(1.0, 0.0);
        PureState::normalized(self.bases[j].apply(&e))
    }

    /// `log d + log n`, the correlation available once the basis is known.
    pub fn ic_unlocked(&self) -> f64 {
        (self.d as f64).log2() + (self.bases.len() as f64).log2()
    }

    fn amplitudes(&self, phi: &ComplexVector) -> Vec<ComplexVector> {
        self.bases.iter().map(|u| u.apply_adjoint(phi)).collect()
    }

    fn check(&self, phi: &PureState) -> Result<()> {
        if phi.dim() != self.d {
            return Err(Error::Dimension(format!(
                "state of dimension {} measured in bases of dimension {}",
                phi.dim(),
                self.d
            )));
        }
        Ok(())
    }
}

/// Outcome distributions of measuring `φ` in each basis.
#[derive(Debug, Clone)]
pub struct MeasurementDistribution {
    pub source: PureState,
    pub distributions: Vec<Vec<f64>>,
}

impl MeasurementDistribution {
    pub fn new(state: &BasisEnsembleState, phi: &PureState) -> Result<Self> {
        state.check(phi)?;
        let distributions = state
            .amplitudes(phi.amplitudes())
            .into_iter()
            .map(|a| a.iter().map(|z| z.norm_sqr()).collect())
            .collect();
        Ok(Self {
            source: phi.clone(),
            distributions,
        })
    }

    pub fn entropies(&self) -> Vec<f64> {
        self.distributions
            .iter()
            .map(|p| entropy_bits(p.iter().copied()))
            .collect()
    }
}

/// `(1/n) Σ_j H(p_j)` in bits.
pub fn average_measurement_entropy(state: &BasisEnsembleState, phi: &PureState) -> Result<f64> {
    Ok(mean(&MeasurementDistribution::new(state, phi)?.entropies()))
}

fn entropy_and_gradient(state: &BasisEnsembleState, phi: &ComplexVector) -> (f64, ComplexVector) {
    let n = state.bases.len() as f64;
    let mut total = 0.0;
    let mut grad = ComplexVector::zeros(state.d);
    for u in &state.bases {
        let amps = u.apply_adjoint(phi);
        let q = amps.map(|z| z.norm_sqr());
        total += entropy_bits(q.iter().copied());
        let weighted = ComplexVector::from_fn(state.d, |i, _| {
            let qi = q[i].max(PROB_FLOOR);
            amps[i] * (-2.0 * (qi.ln() + 1.0) / LN_2)
        });
        grad += u.apply(&weighted);
    }
    (total / n, grad / c(n, 0.0))
}

fn entropy_only(state: &BasisEnsembleState, phi: &ComplexVector) -> f64 {
    let n = state.bases.len() as f64;
    state
        .amplitudes(phi)
        .iter()
        .map(|a| entropy_bits(a.iter().map(|z| z.norm_sqr())))
        .sum::<f64>()
        / n
}

/// `(4/ln²2) Σ q_i (1 + ln q_i)²`, the squared norm of the gradient of the
/// entropy of `|⟨i|ψ⟩|²` with respect to `ψ`.
pub fn entropy_gradient_norm_sq(q: &[f64]) -> f64 {
    let sum: f64 = q
        .iter()
        .filter(|&&x| x > PROB_FLOOR)
        .map(|&x| x * (1.0 + x.ln()).powi(2))
        .sum();
    4.0 * sum / (LN_2 * LN_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub iterations: usize,
    pub initial_step: f64,
    /// Also evaluate every basis vector `U_j|i⟩` as a candidate.
    pub basis_candidates: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 50,
            iterations: 500,
            initial_step: 0.25,
            basis_candidates: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerTrace {
    pub restarts: usize,
    pub iterations: usize,
    /// Final average entropy of every restart, in restart order.
    pub restart_values: Vec<f64>,
    /// Best average entropy among basis-vector candidates, if evaluated.
    pub basis_candidate_best: Option<f64>,
    /// Human-readable direction of the estimate.
    pub semantics: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LockingReport {
    pub d: usize,
    pub n: usize,
    /// Smallest average measurement entropy found.
    pub best_average_entropy: f64,
    /// `log d − best_average_entropy`.
    pub ic_upper: f64,
    pub ic_unlocked: f64,
    pub r1_upper: Option<f64>,
    pub r2_upper: Option<f64>,
    pub optimizer_trace: OptimizerTrace,
}

const ESTIMATE_SEMANTICS: &str = "heuristic: the optimizer value bounds the minimum average \
entropy from above, so ic_upper is a lower estimate of log d + max_phi (1/n) sum p log p";

/// Projected gradient descent on the unit sphere from `start`, halving the
/// step whenever a trial step fails to lower the average entropy.
fn descend(state: &BasisEnsembleState, start: ComplexVector, cfg: &OptimizerConfig) -> f64 {
    let mut phi = start;
    let (mut value, mut grad) = entropy_and_gradient(state, &phi);
    let mut step = cfg.initial_step;
    for _ in 0..cfg.iterations {
        let radial = phi.dotc(&grad).re;
        let tangent = &grad - &phi * c(radial, 0.0);
        if tangent.norm() < 1e-13 || step < 1e-12 {
            break;
        }
        let trial = &phi - tangent * c(step, 0.0);
        let trial = &trial / c(trial.norm(), 0.0);
        let (trial_value, trial_grad) = entropy_and_gradient(state, &trial);
        if trial_value < value {
            phi = trial;
            value = trial_value;
            grad = trial_grad;
        } else {
            step *= 0.5;
        }
    }
    value
}

/// Estimates `max_φ (1/n) Σ_ij p_ji log p_ji` by minimizing the average
/// measurement entropy from `restarts` Haar-random starting points.
pub fn ic_upper_bound(
    state: &BasisEnsembleState,
    cfg: &OptimizerConfig,
    stream: &SeededStream,
) -> Result<LockingReport> {
    if cfg.restarts == 0 || cfg.iterations == 0 || !(cfg.initial_step > 0.0) {
        return Err(Error::Domain(
            "optimizer needs positive restarts, iterations and step".into(),
        ));
    }
    let restart_values: Vec<f64> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let start = haar_pure_state(state.d, &mut stream.derive(r as u64).rng());
            descend(state, start.amplitudes().clone(), cfg)
        })
        .collect();
    let basis_candidate_best = cfg.basis_candidates.then(|| {
        (0..state.bases.len())
            .flat_map(|j| (0..state.d).map(move |i| (i, j)))
            .map(|(i, j)| {
                let v = state.conditional_state(i, j).expect("in range");
                entropy_only(state, v.amplitudes())
            })
            .fold(f64::INFINITY, f64::min)
    });
    let best = restart_values
        .iter()
        .copied()
        .chain(basis_candidate_best)
        .fold(f64::INFINITY, f64::min);
    let d = state.d;
    let n = state.bases.len();
    let ic_upper = (d as f64).log2() - best;
    let ic_unlocked = state.ic_unlocked();
    let ratios = figures_of_merit(ic_upper, ic_unlocked, (n as f64).log2()).ok();
    Ok(LockingReport {
        d,
        n,
        best_average_entropy: best,
        ic_upper,
        ic_unlocked,
        r1_upper: ratios.map(|r| r.0),
        r2_upper: ratios.map(|r| r.1),
        optimizer_trace: OptimizerTrace {
            restarts: cfg.restarts,
            iterations: cfg.iterations,
            restart_values,
            basis_candidate_best,
            semantics: ESTIMATE_SEMANTICS.into(),
        },
    })
}

/// `(r₁, r₂) = (I/I′, l/(I′ − I))` with `I = ic_upper`, `I′ = ic_unlocked`
/// and `l` communicated bits.
pub fn figures_of_merit(ic_upper: f64, ic_unlocked: f64, communicated_bits: f64) -> Result<(f64, f64)> {
    if !(ic_unlocked > ic_upper) || !(ic_unlocked > 0.0) {
        return Err(Error::Domain(format!(
            "need ic_unlocked ({ic_unlocked}) > ic_upper ({ic_upper})"
        )));
    }
    Ok((ic_upper / ic_unlocked, communicated_bits / (ic_unlocked - ic_upper)))
}

/// `H_d = 1 + 1/2 + … + 1/d`, compensated and summed smallest term first.
pub fn harmonic_number(d: u64) -> f64 {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for k in (1..=d).rev() {
        let y = 1.0 / k as f64 - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}

/// `Δ(d) = log₂ d − (1/2 + … + 1/d)/ln 2`.
pub fn delta_d(d: u64) -> Result<f64> {
    if d < 2 {
        return Err(Error::Domain(format!("Δ(d) needs d ≥ 2, got {d}")));
    }
    Ok((d as f64).log2() - (harmonic_number(d) - 1.0) / LN_2)
}

/// Haar mean of the entropy of `|⟨i|ψ⟩|²`: `log₂ d − Δ(d)`.
pub fn expected_entropy_haar(d: u64) -> Result<f64> {
    Ok((d as f64).log2() - delta_d(d)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaWindow {
    pub lo: u64,
    pub hi: u64,
    /// `1/2 < Δ(d) < 1` throughout.
    pub window_holds: bool,
    /// `1/(2(d+1)) < H_d − ln d − γ < 1/(2d)` throughout.
    pub sandwich_holds: bool,
    pub min_delta: f64,
    pub max_delta: f64,
}

/// Checks the Δ(d) window and the harmonic sandwich for `lo ≤ d ≤ hi`.
pub fn delta_window(lo: u64, hi: u64) -> Result<DeltaWindow> {
    if lo < 2 || hi < lo {
        return Err(Error::Domain(format!("need 2 ≤ lo ≤ hi, got {lo}..{hi}")));
    }
    let (mut window, mut sandwich) = (true, true);
    let (mut min_delta, mut max_delta) = (f64::INFINITY, f64::NEG_INFINITY);
    for d in lo..=hi {
        let h = harmonic_number(d);
        let df = d as f64;
        let delta = df.log2() - (h - 1.0) / LN_2;
        min_delta = min_delta.min(delta);
        max_delta = max_delta.max(delta);
        window &= 0.5 < delta && delta < 1.0;
        let gap = h - df.ln() - EULER_GAMMA;
        sandwich &= 1.0 / (2.0 * (df + 1.0)) < gap && gap < 1.0 / (2.0 * df);
    }
    Ok(DeltaWindow {
        lo,
        hi,
        window_holds: window,
        sandwich_holds: sandwich,
        min_delta,
        max_delta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzAudit {
    pub d: usize,
    pub samples: usize,
    pub max_observed: f64,
    pub mean_observed: f64,
    /// `8 (log₂ d)²`.
    pub bound: f64,
    pub within_bound: bool,
}

pub fn lipschitz_audit(d: usize, sample_count: usize, stream: &SeededStream) -> Result<LipschitzAudit> {
    if d < 3 {
        return Err(Error::Domain(format!("gradient bound holds for d ≥ 3, got {d}")));
    }
    let values: Vec<f64> = (0..sample_count)
        .into_par_iter()
        .map(|k| {
            let psi = haar_pure_state(d, &mut stream.derive(k as u64).rng());
            let q: Vec<f64> = psi.amplitudes().iter().map(|z| z.norm_sqr()).collect();
            entropy_gradient_norm_sq(&q)
        })
        .collect();
    let bound = 8.0 * (d as f64).log2().powi(2);
    let max_observed = values.iter().copied().fold(0.0, f64::max);
    Ok(LipschitzAudit {
        d,
        samples: sample_count,
        max_observed,
        mean_observed: mean(&values),
        bound,
        within_bound: max_observed <= bound + 1e-6,
    })
}

/// Monte Carlo mean of the Haar entropy with its standard error.
pub fn haar_entropy_sample(d: usize, sample_count: usize, stream: &SeededStream) -> (f64, f64) {
    let values: Vec<f64> = (0..sample_count)
        .into_par_iter()
        .map(|k| {
            let psi = haar_pure_state(d, &mut stream.derive(k as u64).rng());
            entropy_bits(psi.amplitudes().iter().map(|z| z.norm_sqr()))
        })
        .collect();
    (mean(&values), std_error(&values))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFraction {
    pub epsilon: f64,
    /// `(1 − ε/2) log₂ d − 3`.
    pub threshold: f64,
    pub fraction_below: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub d: usize,
    pub n: usize,
    pub trials: usize,
    pub best_entropies: Vec<f64>,
    pub summary: Summary,
    pub thresholds: Vec<ThresholdFraction>,
}

/// Per-trial dense work cap `n·d²`.
pub const CONCENTRATION_BUDGET: usize = 10_000_000;

pub const DEFAULT_EPSILON_GRID: [f64; 4] = [0.1, 0.25, 0.5, 1.0];

/// Draws `trials` Haar ensembles of `n` bases and minimizes the average
/// entropy for each. Trial `t` takes its bases from `stream.derive(t).derive(0)`
/// and its restarts from `stream.derive(t).derive(1)`.
pub fn entropy_concentration_experiment(
    d: usize,
    n: usize,
    trials: usize,
    cfg: &OptimizerConfig,
    epsilons: &[f64],
    stream: &SeededStream,
) -> Result<ConcentrationReport> {
    if d < 2 || n == 0 || trials == 0 {
        return Err(Error::Domain(format!(
            "need d ≥ 2, n ≥ 1, trials ≥ 1; got d={d}, n={n}, trials={trials}"
        )));
    }
    if n.saturating_mul(d * d) > CONCENTRATION_BUDGET {
        return Err(Error::Guard(format!(
            "n·d² = {} exceeds {CONCENTRATION_BUDGET}",
            n * d * d
        )));
    }
    let best_entropies = (0..trials)
        .into_par_iter()
        .map(|t| {
            let trial = stream.derive(t as u64);
            let ensemble = build_ensemble(d, n, EnsembleKind::Haar, &trial.derive(0))?;
            let state = BasisEnsembleState::from_ensemble(&ensemble);
            Ok(ic_upper_bound(&state, cfg, &trial.derive(1))?.best_average_entropy)
        })
        .collect::<Result<Vec<f64>>>()?;
    let log_d = (d as f64).log2();
    let thresholds = epsilons
        .iter()
        .map(|&epsilon| {
            let threshold = (1.0 - epsilon / 2.0) * log_d - 3.0;
            let below = best_entropies.iter().filter(|&&h| h < threshold).count();
            ThresholdFraction {
                epsilon,
                threshold,
                fraction_below: below as f64 / trials as f64,
            }
        })
        .collect();
    Ok(ConcentrationReport {
        d,
        n,
        trials,
        summary: Summary::of(&best_entropies),
        best_entropies,
        thresholds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FannesBound {
    /// `(ε/2) log₂ d − (ε/2) log₂(ε/2)`.
    pub value: f64,
    /// `(ε/2) log₂ d + 1`.
    pub relaxed: f64,
}

pub fn fannes_bound(epsilon: f64, d: usize) -> Result<FannesBound> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Domain(format!("ε = {epsilon} must lie in (0, 1]")));
    }
    let half = epsilon / 2.0;
    let log_d = (d as f64).log2();
    Ok(FannesBound {
        value: half * log_d - half * half.log2(),
        relaxed: half * log_d + 1.0,
    })
}
