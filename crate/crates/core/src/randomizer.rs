//! Randomizing maps `R(ρ) = (1/n) Σ_j U_j ρ U_j†`, empirical ε
//! measurement, greedy state nets and entanglement probes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{
    c, hermitian_eigen, hermitian_eigenvalues, identity, pure_trace_distance, tensor_product,
    trace_norm, ComplexMatrix, DensityOperator, PureState,
};
use crate::sampler::{haar_pure_state, SeededStream, UnitaryEnsemble};

/// Consecutive rejections after which greedy net construction stops.
pub const NET_REJECTION_STREAK: usize = 50_000;
/// Largest `d²` for which the Choi matrix is formed.
pub const CHOI_GUARD: usize = 4096;

/// Uniform mixture of conjugations by the members of an ensemble.
#[derive(Debug, Clone)]
pub struct RandomizingMap {
    ensemble: UnitaryEnsemble,
}

impl RandomizingMap {
    pub fn new(ensemble: UnitaryEnsemble) -> Self {
        Self { ensemble }
    }

    pub fn ensemble(&self) -> &UnitaryEnsemble {
        &self.ensemble
    }

    pub fn dim(&self) -> usize {
        self.ensemble.dim()
    }

    pub fn len(&self) -> usize {
        self.ensemble.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ensemble.is_empty()
    }

    /// Whether the map randomizes perfectly (full Weyl group).
    pub fn is_exact(&self) -> bool {
        self.ensemble.is_full_weyl()
    }

    fn weight(&self) -> f64 {
        1.0 / self.len() as f64
    }

    pub fn apply_matrix(&self, m: &ComplexMatrix) -> ComplexMatrix {
        let d = self.dim();
        let mut out = ComplexMatrix::zeros(d, d);
        for u in self.ensemble.members() {
            out += u.conjugate(m);
        }
        out * c(self.weight(), 0.0)
    }

    /// Dual map `(1/n) Σ_j U_j† M U_j`.
    pub fn apply_adjoint_matrix(&self, m: &ComplexMatrix) -> ComplexMatrix {
        let d = self.dim();
        let mut out = ComplexMatrix::zeros(d, d);
        for u in self.ensemble.members() {
            out += u.conjugate_adjoint(m);
        }
        out * c(self.weight(), 0.0)
    }

    /// `R(φ)` for a pure input, as `(1/n) V V†` with columns `U_j|φ⟩`.
    pub fn output_for_pure(&self, phi: &PureState) -> ComplexMatrix {
        let d = self.dim();
        let mut v = ComplexMatrix::zeros(d, self.len());
        for (j, u) in self.ensemble.members().enumerate() {
            v.set_column(j, &u.apply(phi.amplitudes()));
        }
        (&v * v.adjoint()) * c(self.weight(), 0.0)
    }

    /// `d · ‖R(φ) − I/d‖∞`.
    pub fn deviation(&self, phi: &PureState) -> f64 {
        let d = self.dim() as f64;
        let values = hermitian_eigenvalues(&self.output_for_pure(phi)).expect("square");
        spectral_deviation(&values, d)
    }
}

fn spectral_deviation(values: &[f64], d: f64) -> f64 {
    values
        .iter()
        .fold(0.0_f64, |acc, v| acc.max((v - 1.0 / d).abs()))
        * d
}

fn check_dim(map: &RandomizingMap, dim: usize) -> Result<()> {
    if map.dim() == dim {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "map acts on dimension {}, input has dimension {dim}",
            map.dim()
        )))
    }
}

pub fn apply_map(map: &RandomizingMap, rho: &DensityOperator) -> Result<DensityOperator> {
    check_dim(map, rho.dim())?;
    Ok(DensityOperator::trusted(map.apply_matrix(rho.matrix())))
}

/// Where the probe states of an ε measurement come from.
#[derive(Debug, Clone)]
pub enum StateSource<'a> {
    HaarSamples { count: usize, stream: SeededStream },
    Net(&'a StateNet),
    Explicit(&'a [PureState]),
    /// Alternating eigenvector ascent on `⟨ψ|R(φ)|ψ⟩`, both spectral edges.
    Adversarial {
        restarts: usize,
        iterations: usize,
        stream: SeededStream,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceLabel {
    HaarSamples,
    Net,
    Explicit,
    AdversarialRestarts,
}

/// Empirical ε. Always a lower bound on the map's true ε, since the supremum
/// runs over every state and only finitely many were probed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub epsilon_emp: f64,
    pub sample_count: usize,
    pub source: SourceLabel,
    pub deviations: Vec<f64>,
}

impl DeviationReport {
    fn from_deviations(source: SourceLabel, deviations: Vec<f64>) -> Self {
        let epsilon_emp = deviations.iter().copied().fold(0.0, f64::max);
        Self {
            epsilon_emp,
            sample_count: deviations.len(),
            source,
            deviations,
        }
    }

    pub fn median(&self) -> f64 {
        crate::stats::median(&self.deviations)
    }
}

pub fn measure_epsilon(map: &RandomizingMap, source: StateSource<'_>) -> Result<DeviationReport> {
    let d = map.dim();
    let eval_states = |states: &[PureState]| -> Result<Vec<f64>> {
        for s in states {
            check_dim(map, s.dim())?;
        }
        Ok(states.par_iter().map(|s| map.deviation(s)).collect())
    };
    let report = match source {
        StateSource::HaarSamples { count, stream } => {
            if count == 0 {
                return Err(Error::Domain("no probe states requested".into()));
            }
            let deviations = (0..count)
                .into_par_iter()
                .map(|k| map.deviation(&haar_pure_state(d, &mut stream.derive(k as u64).rng())))
                .collect();
            DeviationReport::from_deviations(SourceLabel::HaarSamples, deviations)
        }
        StateSource::Net(net) => {
            DeviationReport::from_deviations(SourceLabel::Net, eval_states(&net.points)?)
        }
        StateSource::Explicit(states) => {
            if states.is_empty() {
                return Err(Error::Domain("no probe states supplied".into()));
            }
            DeviationReport::from_deviations(SourceLabel::Explicit, eval_states(states)?)
        }
        StateSource::Adversarial {
            restarts,
            iterations,
            stream,
        } => {
            if restarts == 0 {
                return Err(Error::Domain("adversarial search needs a restart".into()));
            }
            let deviations = (0..restarts)
                .into_par_iter()
                .map(|r| {
                    let start = haar_pure_state(d, &mut stream.derive(r as u64).rng());
                    let high = edge_ascent(map, &start, iterations, Edge::Top);
                    let low = edge_ascent(map, &start, iterations, Edge::Bottom);
                    high.max(low)
                })
                .collect();
            DeviationReport::from_deviations(SourceLabel::AdversarialRestarts, deviations)
        }
    };
    Ok(report)
}

#[derive(Clone, Copy)]
enum Edge {
    Top,
    Bottom,
}

/// Pushes one spectral edge of `R(φ)` outward by alternating
/// `ψ ← edge eigenvector of R(φ)` and `φ ← edge eigenvector of R*(ψ)`.
fn edge_ascent(map: &RandomizingMap, start: &PureState, iterations: usize, edge: Edge) -> f64 {
    let d = map.dim() as f64;
    let pick = |m: &ComplexMatrix| -> (f64, PureState) {
        let eig = hermitian_eigen(m).expect("square");
        let k = match edge {
            Edge::Top => eig.values.len() - 1,
            Edge::Bottom => 0,
        };
        let v = eig.vectors.column(k).into_owned();
        (eig.values[k], PureState::normalized(v).expect("unit eigenvector"))
    };
    let mut phi = start.clone();
    let mut best = map.deviation(&phi);
    for _ in 0..iterations {
        let (_, psi) = pick(&map.output_for_pure(&phi));
        let (_, next) = pick(&map.apply_adjoint_matrix(&psi.projector()));
        phi = next;
        let dev = map.deviation(&phi);
        if dev <= best + 1e-13 * d {
            best = best.max(dev);
            break;
        }
        best = dev;
    }
    best
}

/// `⌈134 d log₂ d / ε²⌉`, valid once `d > 10/ε`.
pub fn theoretical_n(d: u64, epsilon: f64) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Domain(format!("ε = {epsilon} must lie in (0, 1]")));
    }
    if !((d as f64) > 10.0 / epsilon) {
        return Err(Error::Domain(format!(
            "requires d > 10/ε, but d = {d} and 10/ε = {}",
            10.0 / epsilon
        )));
    }
    let x = 134.0 * d as f64 * (d as f64).log2() / (epsilon * epsilon);
    Ok(ceil_tolerant(x))
}

/// Ceiling that snaps values within relative 1e-9 of an integer.
pub(crate) fn ceil_tolerant(x: f64) -> u64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r as u64
    } else {
        x.ceil() as u64
    }
}

/// Key bits `log d + log log d + log(1/ε²) + 8`, all base 2.
pub fn key_length(d: u64, epsilon: f64) -> Result<f64> {
    if d < 2 {
        return Err(Error::Domain(format!("key length needs d ≥ 2, got {d}")));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Domain(format!("ε = {epsilon} must lie in (0, 1]")));
    }
    let log_d = (d as f64).log2();
    Ok(log_d + log_d.log2() + (1.0 / (epsilon * epsilon)).log2() + 8.0)
}

/// Packing of pure states with pairwise trace distance at least `radius`.
#[derive(Debug, Clone)]
pub struct StateNet {
    pub dim: usize,
    pub radius: f64,
    pub points: Vec<PureState>,
}

/// Volume bound `(5/ε)^{2d}` on the size of a net.
pub fn net_size_bound(dim: usize, radius: f64) -> f64 {
    (5.0 / radius).powi(2 * dim as i32)
}

/// Greedy maximal packing: Haar candidates are admitted when at distance
/// `≥ radius` from every admitted point; stops after
/// [`NET_REJECTION_STREAK`] consecutive rejections.
pub fn build_state_net(dim: usize, radius: f64, stream: &SeededStream) -> Result<StateNet> {
    if dim == 0 || dim > 4 || !(0.3..1.0).contains(&radius) {
        return Err(Error::Guard(format!(
            "nets are limited to dim ≤ 4 and radius in [0.3, 1); got dim {dim}, radius {radius}"
        )));
    }
    if dim == 1 {
        return Ok(StateNet {
            dim,
            radius,
            points: vec![PureState::basis(1, 0)?],
        });
    }
    let mut rng = stream.rng();
    let mut points: Vec<PureState> = Vec::new();
    let mut streak = 0;
    // Pure distance ≥ r  ⇔  |⟨φ|ψ⟩|² ≤ 1 − r²/4.
    let max_overlap = 1.0 - radius * radius / 4.0;
    while streak < NET_REJECTION_STREAK {
        let candidate = haar_pure_state(dim, &mut rng);
        let admissible = points
            .iter()
            .all(|p| p.inner(&candidate).norm_sqr() <= max_overlap);
        if admissible {
            points.push(candidate);
            streak = 0;
        } else {
            streak += 1;
        }
    }
    Ok(StateNet { dim, radius, points })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageAudit {
    pub samples: usize,
    pub uncovered: usize,
    pub worst_nearest_distance: f64,
    pub min_pairwise_distance: f64,
}

/// Checks the packing property and how many fresh Haar states fall farther
/// than `radius` from every net point.
pub fn audit_net(net: &StateNet, samples: usize, stream: &SeededStream) -> Result<CoverageAudit> {
    let mut min_pair = f64::INFINITY;
    for (i, a) in net.points.iter().enumerate() {
        for b in &net.points[i + 1..] {
            min_pair = min_pair.min(pure_trace_distance(a, b)?);
        }
    }
    let nearest: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let s = haar_pure_state(net.dim, &mut stream.derive(k as u64).rng());
            net.points
                .iter()
                .map(|p| pure_trace_distance(p, &s).expect("same dim"))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    Ok(CoverageAudit {
        samples,
        uncovered: nearest.iter().filter(|&&x| x > net.radius).count(),
        worst_nearest_distance: nearest.iter().copied().fold(0.0, f64::max),
        min_pairwise_distance: min_pair,
    })
}

/// Outcome of applying the map to half of a maximally entangled state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiProbe {
    pub choi_rank: usize,
    pub trace_distance: f64,
    pub ensemble_size: usize,
    /// `2 (1 − rank/d²)`, forced by the rank alone.
    pub distance_floor: f64,
    pub rank_within_bound: bool,
    pub distance_above_floor: bool,
}

/// `(R ⊗ I)(Φ)`, A-index major, accumulated one Kraus vector at a time:
/// `(1/(n d)) Σ_j vec(U_j) vec(U_j)†` with `vec` the row-major flattening.
pub fn choi_matrix(map: &RandomizingMap) -> Result<ComplexMatrix> {
    let d = map.dim();
    let big = d * d;
    if big > CHOI_GUARD {
        return Err(Error::Guard(format!(
            "Choi matrix of side {big} exceeds {CHOI_GUARD}"
        )));
    }
    let mut choi = ComplexMatrix::zeros(big, big);
    let w = c(1.0 / (map.len() * d) as f64, 0.0);
    for u in map.ensemble().members() {
        let u = u.to_dense();
        let vec = crate::matcore::ComplexVector::from_fn(big, |k, _| u[(k / d, k % d)]);
        choi.ger(w, &vec, &vec.conjugate(), c(1.0, 0.0));
    }
    Ok(choi)
}

pub fn entangled_probe(map: &RandomizingMap) -> Result<ChoiProbe> {
    let d = map.dim();
    let big = (d * d) as f64;
    let values = hermitian_eigenvalues(&choi_matrix(map)?)?;
    let top = values.last().copied().unwrap_or(0.0);
    let rank = values.iter().filter(|&&v| v > 1e-8 * top).count();
    let trace_distance: f64 = values.iter().map(|v| (v - 1.0 / big).abs()).sum();
    let distance_floor = 2.0 * (1.0 - rank as f64 / big);
    Ok(ChoiProbe {
        choi_rank: rank,
        trace_distance,
        ensemble_size: map.len(),
        distance_floor,
        rank_within_bound: rank <= map.len(),
        distance_above_floor: trace_distance >= distance_floor - 1e-6,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparableCheck {
    /// `‖(R ⊗ I)(ρ) − I/d ⊗ ρ_B‖₁`.
    pub value: f64,
    /// Largest `d‖R(φ_i) − I/d‖∞` over the A-components.
    pub component_epsilon: f64,
    pub within_bound: bool,
    /// The bound is a hard guarantee only for exact randomizers.
    pub exact: bool,
}

/// Evaluates how far `(R ⊗ I)` leaves a separable mixture
/// `Σ p_i φ_i ⊗ ψ_i` from the product `I/d ⊗ ρ_B`.
pub fn separable_destruction_check(
    map: &RandomizingMap,
    mixture: &[(f64, PureState, PureState)],
) -> Result<SeparableCheck> {
    let d = map.dim();
    let db = mixture
        .first()
        .map(|(_, _, b)| b.dim())
        .ok_or_else(|| Error::Domain("empty separable mixture".into()))?;
    crate::matcore::check_distribution(mixture.iter().map(|(p, _, _)| *p))?;
    let mut diff = ComplexMatrix::zeros(d * db, d * db);
    let mut component_epsilon: f64 = 0.0;
    let flat = identity(d) * c(1.0 / d as f64, 0.0);
    for (p, a, b) in mixture {
        check_dim(map, a.dim())?;
        if b.dim() != db {
            return Err(Error::Dimension("B components differ in dimension".into()));
        }
        let local = map.output_for_pure(a) - &flat;
        component_epsilon = component_epsilon.max(map.deviation(a));
        diff += tensor_product(&local, &b.projector()) * c(*p, 0.0);
    }
    let value = trace_norm(&diff)?;
    Ok(SeparableCheck {
        value,
        component_epsilon,
        within_bound: value <= component_epsilon + 1e-6,
        exact: map.is_exact(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::max_abs;
    use crate::sampler::{build_ensemble, EnsembleKind};

    fn map(dim: usize, n: usize, kind: EnsembleKind, seed: u64) -> RandomizingMap {
        RandomizingMap::new(build_ensemble(dim, n, kind, &SeededStream::new(seed)).unwrap())
    }

    #[test]
    fn full_weyl_map_flattens_pure_states() {
        let r = map(4, 16, EnsembleKind::Weyl, 0);
        assert!(r.is_exact());
        let phi = haar_pure_state(4, &mut SeededStream::new(5).rng());
        let out = apply_map(&r, &DensityOperator::from_pure(&phi)).unwrap();
        let flat = identity(4) * c(0.25, 0.0);
        assert!(max_abs(&(out.matrix() - flat)) < 1e-12);
    }

    #[test]
    fn single_member_map_is_plain_conjugation() {
        let r = map(5, 1, EnsembleKind::Haar, 8);
        let phi = haar_pure_state(5, &mut SeededStream::new(1).rng());
        let out = apply_map(&r, &DensityOperator::from_pure(&phi)).unwrap();
        let expect = r.ensemble().member(0).conjugate(&phi.projector());
        assert!(max_abs(&(out.matrix() - expect)) < 1e-15);
    }

    #[test]
    fn map_is_linear() {
        let r = map(4, 7, EnsembleKind::Haar, 2);
        let a = DensityOperator::from_pure(&haar_pure_state(4, &mut SeededStream::new(1).rng()));
        let b = DensityOperator::from_pure(&haar_pure_state(4, &mut SeededStream::new(2).rng()));
        let mix = DensityOperator::mixture(&[(0.5, a.clone()), (0.5, b.clone())]).unwrap();
        let lhs = apply_map(&r, &mix).unwrap();
        let rhs = (apply_map(&r, &a).unwrap().into_matrix()
            + apply_map(&r, &b).unwrap().into_matrix())
            * c(0.5, 0.0);
        assert!(max_abs(&(lhs.matrix() - rhs)) < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let r = map(4, 3, EnsembleKind::Haar, 2);
        let rho = DensityOperator::maximally_mixed(3);
        assert!(matches!(apply_map(&r, &rho), Err(Error::Dimension(_))));
    }

    #[test]
    fn single_unitary_epsilon_is_d_minus_one() {
        let r = map(8, 1, EnsembleKind::Haar, 11);
        let rep = measure_epsilon(
            &r,
            StateSource::HaarSamples {
                count: 20,
                stream: SeededStream::new(4),
            },
        )
        .unwrap();
        assert_eq!(rep.sample_count, 20);
        for dev in &rep.deviations {
            assert!((dev - 7.0).abs() < 1e-9);
        }
        assert_eq!(rep.epsilon_emp, rep.deviations.iter().copied().fold(0.0, f64::max));
    }

    #[test]
    fn adversarial_search_beats_random_sampling() {
        let r = map(8, 64, EnsembleKind::Haar, 21);
        let sampled = measure_epsilon(
            &r,
            StateSource::HaarSamples {
                count: 20,
                stream: SeededStream::new(1),
            },
        )
        .unwrap();
        let adversarial = measure_epsilon(
            &r,
            StateSource::Adversarial {
                restarts: 20,
                iterations: 50,
                stream: SeededStream::new(1),
            },
        )
        .unwrap();
        assert_eq!(adversarial.source, SourceLabel::AdversarialRestarts);
        assert!(adversarial.epsilon_emp >= sampled.epsilon_emp);
    }

    #[test]
    fn theoretical_n_examples() {
        assert_eq!(theoretical_n(64, 0.5).unwrap(), 205_824);
        assert_eq!(theoretical_n(1024, 1.0).unwrap(), 1_372_160);
        match theoretical_n(16, 0.5) {
            Err(Error::Domain(msg)) => assert!(msg.contains("d > 10/ε")),
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn key_length_examples() {
        let expect = 10.0 + 10f64.log2() + 2.0 + 8.0;
        assert!((key_length(1024, 0.5).unwrap() - expect).abs() < 1e-12);
        assert!((key_length(2, 1.0).unwrap() - 9.0).abs() < 1e-12);
        assert!(key_length(2048, 0.5).unwrap() > key_length(1024, 0.5).unwrap());
        assert!(key_length(1024, 0.25).unwrap() > key_length(1024, 0.5).unwrap());
    }

    #[test]
    fn trivial_net_and_guards() {
        let net = build_state_net(1, 0.5, &SeededStream::new(0)).unwrap();
        assert_eq!(net.points.len(), 1);
        assert!(matches!(
            build_state_net(5, 0.5, &SeededStream::new(0)),
            Err(Error::Guard(_))
        ));
        assert!(matches!(
            build_state_net(2, 0.1, &SeededStream::new(0)),
            Err(Error::Guard(_))
        ));
        assert!((net_size_bound(2, 0.5) - 10_000.0).abs() < 1e-9);
    }

    #[test]
    fn exact_map_destroys_separable_correlations() {
        let r = map(2, 4, EnsembleKind::Weyl, 0);
        let zero = PureState::basis(2, 0).unwrap();
        let one = PureState::basis(2, 1).unwrap();
        let classical = [(0.5, zero.clone(), zero.clone()), (0.5, one.clone(), one.clone())];
        let check = separable_destruction_check(&r, &classical).unwrap();
        assert!(check.exact);
        assert!(check.value < 1e-10);
        let product = [(1.0, zero.clone(), one)];
        assert!(separable_destruction_check(&r, &product).unwrap().value < 1e-10);
        let bad = [(0.7, zero.clone(), zero)];
        assert!(matches!(
            separable_destruction_check(&r, &bad),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn choi_of_exact_map_is_maximally_mixed() {
        let probe = entangled_probe(&map(3, 9, EnsembleKind::Weyl, 0)).unwrap();
        assert_eq!(probe.choi_rank, 9);
        assert!(probe.trace_distance < 1e-12);
        assert!(matches!(
            entangled_probe(&map(65, 1, EnsembleKind::Haar, 0)),
            Err(Error::Guard(_))
        ));
    }

    #[test]
    fn small_ensemble_choi_rank_forces_distance() {
        let probe = entangled_probe(&map(4, 4, EnsembleKind::Haar, 3)).unwrap();
        assert!(probe.choi_rank <= 4);
        assert!(probe.rank_within_bound);
        assert!(probe.trace_distance >= 1.5 - 1e-9);
        assert!(probe.distance_above_floor);
    }
}
