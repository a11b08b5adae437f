//! Ensembles `{p_j; ω_j}`, convex sums, shortening, and the mutual entropy of a
//! channel with an input ensemble.

use serde::{Deserialize, Serialize};

use crate::channel::{block_entropy, block_relative_entropy, ReductionChannel};
use crate::state::{max_abs_diff, DensityOperator};
use crate::{CMatrix, Error, Result, Tolerances};

/// Weight tolerance for `Σ p_j = 1` and `p_j ≥ 0`.
pub const WEIGHT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnsembleRepr", into = "EnsembleRepr")]
pub struct Ensemble {
    weights: Vec<f64>,
    states: Vec<DensityOperator>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleRepr {
    pub weights: Vec<f64>,
    pub states: Vec<DensityOperator>,
}

impl TryFrom<EnsembleRepr> for Ensemble {
    type Error = Error;

    fn try_from(r: EnsembleRepr) -> Result<Self> {
        Ensemble::new(r.weights, r.states)
    }
}

impl From<Ensemble> for EnsembleRepr {
    fn from(e: Ensemble) -> Self {
        EnsembleRepr {
            weights: e.weights,
            states: e.states,
        }
    }
}

impl Ensemble {
    pub fn new(weights: Vec<f64>, states: Vec<DensityOperator>) -> Result<Self> {
        if weights.len() != states.len() {
            return Err(Error::InvalidEnsemble(format!(
                "{} weights for {} states",
                weights.len(),
                states.len()
            )));
        }
        if states.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        let dim = states[0].dim();
        if let Some(bad) = states.iter().find(|s| s.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        if let Some((j, p)) = weights.iter().enumerate().find(|(_, &p)| !(p >= -WEIGHT_TOL)) {
            return Err(Error::InvalidEnsemble(format!("weight {j} is negative: {p}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidEnsemble(format!("weights sum to {total}, not 1")));
        }
        Ok(Self {
            weights: weights.into_iter().map(|p| p.max(0.0)).collect(),
            states,
        })
    }

    /// Assembles an ensemble from parts already known to satisfy the invariants.
    pub(crate) fn from_parts(weights: Vec<f64>, states: Vec<DensityOperator>) -> Self {
        debug_assert_eq!(weights.len(), states.len());
        Self { weights, states }
    }

    pub fn singleton(state: DensityOperator) -> Self {
        Self {
            weights: vec![1.0],
            states: vec![state],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn states(&self) -> &[DensityOperator] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &DensityOperator)> {
        self.weights.iter().copied().zip(self.states.iter())
    }

    /// `Σ p_j ω_j`.
    pub fn convex_sum(&self) -> DensityOperator {
        let n = self.dim();
        let sum = self
            .iter()
            .fold(CMatrix::zeros(n, n), |acc, (p, s)| acc + s.matrix().scale(p));
        DensityOperator::from_trusted(sum)
    }

    /// Drops members with weight `≤ tol.weight` and merges members closer than
    /// `tol.state` (max-entry norm). A merged member is the weighted average of
    /// its parts, so the convex sum is unchanged.
    pub fn shorten(&self, tol: &Tolerances) -> Ensemble {
        let mut weights: Vec<f64> = Vec::new();
        let mut sums: Vec<CMatrix> = Vec::new();
        let mut reps: Vec<&DensityOperator> = Vec::new();
        let mut merged: Vec<bool> = Vec::new();
        for (p, s) in self.iter() {
            if p <= tol.weight {
                continue;
            }
            match reps.iter().position(|r| max_abs_diff(r.matrix(), s.matrix()) <= tol.state) {
                Some(i) => {
                    weights[i] += p;
                    sums[i] += s.matrix().scale(p);
                    merged[i] = true;
                }
                None => {
                    weights.push(p);
                    sums.push(s.matrix().scale(p));
                    reps.push(s);
                    merged.push(false);
                }
            }
        }
        if weights.is_empty() {
            return self.clone();
        }
        let states = sums
            .into_iter()
            .zip(&weights)
            .zip(reps.into_iter().zip(merged))
            .map(|((m, &p), (rep, merged))| {
                if merged {
                    DensityOperator::from_trusted(m.unscale(p))
                } else {
                    rep.clone()
                }
            })
            .collect();
        Ensemble { weights, states }
    }

    /// Minimum purity `Tr ω_j²` over members.
    pub fn min_purity(&self) -> f64 {
        self.states.iter().map(|s| s.purity()).fold(f64::INFINITY, f64::min)
    }
}

/// Mutual entropy `I(E, α) = Σ p_j S(ω_j∘α, ω∘α)`, evaluated in the Holevo form
/// `S(ω∘α) - Σ p_j S(ω_j∘α)`.
pub fn mutual_entropy(e: &Ensemble, channel: &ReductionChannel, tol: &Tolerances) -> Result<f64> {
    let avg = channel.reduce(&e.convex_sum())?;
    let mut total = block_entropy(&avg, tol)?;
    for (p, s) in e.iter() {
        total -= p * block_entropy(&channel.reduce(s)?, tol)?;
    }
    Ok(total.max(0.0))
}

/// Mutual entropy evaluated as the weighted sum of relative entropies; the
/// cross-check for [`mutual_entropy`].
pub fn mutual_entropy_relative(
    e: &Ensemble,
    channel: &ReductionChannel,
    tol: &Tolerances,
) -> Result<f64> {
    let avg = channel.reduce(&e.convex_sum())?;
    let mut total = 0.0;
    for (p, s) in e.iter() {
        if p == 0.0 {
            continue;
        }
        total += p * block_relative_entropy(&channel.reduce(s)?, &avg, tol)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random;
    use crate::state::PureState;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn convex_sum_examples() {
        let t = tol();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random::ginibre_state(&mut rng, 3, None);
        assert!(max_abs_diff(Ensemble::singleton(rho.clone()).convex_sum().matrix(), rho.matrix()) < 1e-16);

        let zero = PureState::basis(2, 0).density();
        let one = PureState::basis(2, 1).density();
        let half = Ensemble::new(vec![0.5, 0.5], vec![zero.clone(), one.clone()]).unwrap();
        assert!(max_abs_diff(half.convex_sum().matrix(), DensityOperator::maximally_mixed(2).matrix()) < 1e-16);

        let e = Ensemble::new(vec![0.3, 0.7], vec![zero, one]).unwrap();
        let expected = DensityOperator::diagonal(&[0.3, 0.7], &t).unwrap();
        assert!(max_abs_diff(e.convex_sum().matrix(), expected.matrix()) < 1e-16);
    }

    #[test]
    fn ensemble_validation() {
        let rho = DensityOperator::maximally_mixed(2);
        assert!(matches!(Ensemble::new(vec![], vec![]), Err(Error::EmptyEnsemble)));
        assert!(Ensemble::new(vec![0.5], vec![rho.clone()]).is_err());
        assert!(Ensemble::new(vec![1.2, -0.2], vec![rho.clone(), rho.clone()]).is_err());
        assert!(matches!(
            Ensemble::new(vec![0.5, 0.5], vec![rho.clone(), DensityOperator::maximally_mixed(3)]),
            Err(Error::DimensionMismatch { .. })
        ));
        let json = r#"{"weights": [0.5, 0.5], "states": [[[1,0],[0,0]], [[0,0],[0,1]]]}"#;
        let e: Ensemble = serde_json::from_str(json).unwrap();
        assert_eq!(e.len(), 2);
        assert!(serde_json::from_str::<Ensemble>(r#"{"weights": [1], "states": [[[1]]], "x": 0}"#).is_err());
    }

    #[test]
    fn shorten_examples() {
        let t = tol();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = random::ginibre_state(&mut rng, 2, None);
        let sigma = random::ginibre_state(&mut rng, 2, None);
        let dup = Ensemble::new(vec![0.5, 0.5], vec![rho.clone(), rho.clone()]).unwrap().shorten(&t);
        assert_eq!(dup.len(), 1);
        assert_abs_diff_eq!(dup.weights()[0], 1.0);
        let zero = Ensemble::new(vec![1.0, 0.0], vec![rho.clone(), sigma.clone()]).unwrap().shorten(&t);
        assert_eq!(zero.len(), 1);
        assert_eq!(zero.states()[0], rho);
        let short = Ensemble::new(vec![0.4, 0.6], vec![rho, sigma]).unwrap();
        assert_eq!(short.shorten(&t), short);
    }

    #[test]
    fn mutual_entropy_examples() {
        let t = tol();
        let pinch = ReductionChannel::diagonal_pinching(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = random::ginibre_state(&mut rng, 2, None);
        assert_eq!(mutual_entropy(&Ensemble::singleton(rho), &pinch, &t).unwrap(), 0.0);

        let zero = PureState::basis(2, 0).density();
        let one = PureState::basis(2, 1).density();
        let e = Ensemble::new(vec![0.5, 0.5], vec![zero, one]).unwrap();
        assert_abs_diff_eq!(mutual_entropy(&e, &pinch, &t).unwrap(), std::f64::consts::LN_2, epsilon = 1e-14);
        assert_abs_diff_eq!(
            mutual_entropy_relative(&e, &pinch, &t).unwrap(),
            std::f64::consts::LN_2,
            epsilon = 1e-14
        );

        let any = random::random_ensemble(&mut rng, 3, 4);
        let trivial = ReductionChannel::trivial(3);
        assert!(mutual_entropy(&any, &trivial, &t).unwrap().abs() < 1e-14);
        assert!(matches!(
            mutual_entropy(&any, &pinch, &t),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn mutual_entropy_nonnegative_and_forms_agree() {
        let t = tol();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for i in 0..1000 {
            let n = 2 + i % 3;
            let len = 1 + i % 5;
            let e = random::random_ensemble(&mut rng, n, len);
            let ch = random::random_channel(&mut rng, n);
            let holevo = mutual_entropy(&e, &ch, &t).unwrap();
            let rel = mutual_entropy_relative(&e, &ch, &t).unwrap();
            assert!(holevo >= 0.0);
            assert!((holevo - rel).abs() <= 1e-10, "{holevo} vs {rel}");
        }
    }

    proptest! {
        #[test]
        fn shorten_preserves_convex_sum(seed in any::<u64>(), n in 1usize..5, len in 1usize..7, dups in 0usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e = random::random_ensemble(&mut rng, n, len);
            // append duplicates and zero-weight members, then renormalize
            let mut weights: Vec<f64> = e.weights().iter().map(|p| p * 0.5).collect();
            let mut states = e.states().to_vec();
            for k in 0..dups {
                let j = k % len;
                weights.push(0.5 / dups as f64);
                states.push(e.states()[j].clone());
            }
            if dups == 0 {
                weights.iter_mut().for_each(|p| *p *= 2.0);
            }
            weights.push(0.0);
            states.push(random::ginibre_state(&mut rng, n, None));
            let padded = Ensemble::new(weights, states).unwrap();
            let short = padded.shorten(&tol());
            prop_assert!(short.len() <= padded.len());
            prop_assert!(short.len() <= len);
            prop_assert!(max_abs_diff(short.convex_sum().matrix(), padded.convex_sum().matrix()) <= 1e-12);
        }
    }
}
