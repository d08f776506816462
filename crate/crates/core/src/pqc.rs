//! Private quantum channel: keyed encryption with one ensemble member,
//! the keyless eavesdropper view, and Holevo accounting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{check_distribution, von_neumann_entropy, DensityOperator};
use crate::randomizer::{apply_map, RandomizingMap};

/// Largest input ensemble accepted by [`holevo_quantity`].
pub const MAX_INPUT_STATES: usize = 64;

/// Index of the ensemble member shared by sender and receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChannelKey(pub usize);

impl ChannelKey {
    /// Two-part key `(a, b)` for `X^a Z^b` in the full Weyl ensemble.
    pub fn weyl(a: usize, b: usize, dim: usize) -> Result<Self> {
        if a >= dim || b >= dim {
            return Err(Error::Domain(format!("Weyl key ({a}, {b}) outside dimension {dim}")));
        }
        Ok(Self(a * dim + b))
    }
}

fn check_key(map: &RandomizingMap, key: ChannelKey, rho: &DensityOperator) -> Result<()> {
    if key.0 >= map.len() {
        return Err(Error::Domain(format!(
            "key {} outside ensemble of size {}",
            key.0,
            map.len()
        )));
    }
    if rho.dim() != map.dim() {
        return Err(Error::Dimension(format!(
            "channel on dimension {}, state of dimension {}",
            map.dim(),
            rho.dim()
        )));
    }
    Ok(())
}

/// `U_j ρ U_j†`.
pub fn encrypt(map: &RandomizingMap, key: ChannelKey, rho: &DensityOperator) -> Result<DensityOperator> {
    check_key(map, key, rho)?;
    let u = map.ensemble().member(key.0);
    Ok(DensityOperator::trusted(u.conjugate(rho.matrix())))
}

/// `U_j† σ U_j`.
pub fn decrypt(map: &RandomizingMap, key: ChannelKey, sigma: &DensityOperator) -> Result<DensityOperator> {
    check_key(map, key, sigma)?;
    let u = map.ensemble().member(key.0);
    Ok(DensityOperator::trusted(u.conjugate_adjoint(sigma.matrix())))
}

/// What an observer without the key holds: the uniform average `R(ρ)`.
pub fn eavesdropper_view(map: &RandomizingMap, rho: &DensityOperator) -> Result<DensityOperator> {
    apply_map(map, rho)
}

/// Weighted family of input states.
#[derive(Debug, Clone)]
pub struct StateEnsembleInput {
    members: Vec<(f64, DensityOperator)>,
}

impl StateEnsembleInput {
    pub fn new(members: Vec<(f64, DensityOperator)>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Domain("empty input ensemble".into()));
        }
        check_distribution(members.iter().map(|(p, _)| *p))?;
        Ok(Self { members })
    }

    /// Equal weights over `states`.
    pub fn uniform(states: Vec<DensityOperator>) -> Result<Self> {
        let w = 1.0 / states.len().max(1) as f64;
        Self::new(states.into_iter().map(|s| (w, s)).collect())
    }

    pub fn members(&self) -> &[(f64, DensityOperator)] {
        &self.members
    }
}

/// `S(Σ p_i R(ρ_i)) − Σ p_i S(R(ρ_i))` in bits.
pub fn holevo_quantity(map: &RandomizingMap, inputs: &StateEnsembleInput) -> Result<f64> {
    if inputs.members.len() > MAX_INPUT_STATES {
        return Err(Error::Guard(format!(
            "{} input states exceed the cap of {MAX_INPUT_STATES}",
            inputs.members.len()
        )));
    }
    let outputs = inputs
        .members
        .iter()
        .map(|(p, rho)| Ok((*p, apply_map(map, rho)?)))
        .collect::<Result<Vec<_>>>()?;
    let conditional: f64 = outputs.iter().map(|(p, s)| p * von_neumann_entropy(s)).sum();
    let average = DensityOperator::mixture(&outputs)?;
    Ok((von_neumann_entropy(&average) - conditional).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolevoBound {
    /// `log₂(1 + ε)`.
    pub tight: f64,
    /// `ε / ln 2`.
    pub linear: f64,
}

pub fn holevo_bound(epsilon: f64) -> Result<HolevoBound> {
    if !(epsilon >= 0.0) {
        return Err(Error::Domain(format!("ε = {epsilon} must be nonnegative")));
    }
    Ok(HolevoBound {
        tight: (1.0 + epsilon).log2(),
        linear: epsilon / std::f64::consts::LN_2,
    })
}
