//! Accessible information of the ensemble induced by a commutative subalgebra.
//!
//! Projections `Q_j` split `ω` into `p_j ϱ_j = √ω Q_j √ω`. Its accessible
//! information (the sup of the mutual entropy over measurements) equals the
//! channel entropy `H_ω(C)` of the subalgebra `C` generated by the `Q_j`.
//! [`benatti_bracket`] brackets it between the best sampled measurement and
//! the solver value; [`holevo_check`] compares the solver value with `S(ω)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{check_projections, KrausOperator, ReductionChannel};
use crate::ensemble::{mutual_entropy, Ensemble};
use crate::random::haar_unitary;
use crate::roof::{solve_r, SolverConfig};
use crate::state::{
    eigh, eigh_unchecked, hermitize, max_abs_diff, orthonormal_columns, von_neumann_entropy, DensityOperator,
};
use crate::{CMatrix, Error, Result, Tolerances, C64};

/// Slack of the bracket and Holevo assertions.
pub const BOUND_TOL: f64 = 1e-6;
const POVM_PSD_TOL: f64 = 1e-9;
const POVM_COMPLETENESS_TOL: f64 = 1e-10;
const SAMPLE_STREAM: u64 = 0xacc1_0000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasurementRepr", into = "MeasurementRepr")]
pub struct Measurement {
    outcomes: Vec<CMatrix>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementRepr {
    #[serde(with = "crate::io::matrix_list")]
    outcomes: Vec<CMatrix>,
}

impl TryFrom<MeasurementRepr> for Measurement {
    type Error = Error;
    fn try_from(r: MeasurementRepr) -> Result<Self> {
        Measurement::new(r.outcomes)
    }
}

impl From<Measurement> for MeasurementRepr {
    fn from(m: Measurement) -> Self {
        MeasurementRepr { outcomes: m.outcomes }
    }
}

impl Measurement {
    /// POVM from its elements: Hermitian, PSD within 1e-9, summing to `1` within 1e-10.
    pub fn new(outcomes: Vec<CMatrix>) -> Result<Self> {
        let first = outcomes
            .first()
            .ok_or_else(|| Error::InvalidMeasurement("no outcomes".into()))?;
        let n = first.nrows();
        let mut sum = CMatrix::zeros(n, n);
        for (i, e) in outcomes.iter().enumerate() {
            if !e.is_square() {
                return Err(Error::NotSquare {
                    rows: e.nrows(),
                    cols: e.ncols(),
                });
            }
            if e.nrows() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: e.nrows(),
                });
            }
            let spec = eigh(e, POVM_PSD_TOL)?;
            if let Some(&min) = spec.values.first() {
                if min < -POVM_PSD_TOL {
                    return Err(Error::InvalidMeasurement(format!(
                        "outcome {i} has eigenvalue {min:.3e}"
                    )));
                }
            }
            sum += e;
        }
        let deviation = max_abs_diff(&sum, &CMatrix::identity(n, n));
        if deviation > POVM_COMPLETENESS_TOL {
            return Err(Error::InvalidMeasurement(format!(
                "outcomes sum to the identity only within {deviation:.3e}"
            )));
        }
        Ok(Self {
            outcomes: outcomes.iter().map(hermitize).collect(),
        })
    }

    /// Rank-one projective measurement in the columns of a unitary.
    pub fn projective(basis: &CMatrix) -> Result<Self> {
        Self::new(
            (0..basis.ncols())
                .map(|k| {
                    let u = basis.column(k);
                    &u * u.adjoint()
                })
                .collect(),
        )
    }

    pub fn from_projections(projections: &[CMatrix]) -> Result<Self> {
        check_projections(projections)?;
        Self::new(projections.to_vec())
    }

    pub fn outcomes(&self) -> &[CMatrix] {
        &self.outcomes
    }

    pub fn dim(&self) -> usize {
        self.outcomes[0].nrows()
    }

    /// Channel onto the outcome distribution: one 1-dimensional block per
    /// outcome, with Kraus rows `√μ u^†` from the spectral decomposition of each element.
    pub fn to_channel(&self) -> Result<ReductionChannel> {
        let n = self.dim();
        let mut kraus = Vec::new();
        for (i, e) in self.outcomes.iter().enumerate() {
            let spec = eigh_unchecked(e);
            let mut any = false;
            for k in 0..spec.dim() {
                let mu = spec.values[k];
                if mu <= 0.0 {
                    continue;
                }
                let u = spec.vector(k);
                let row = CMatrix::from_iterator(1, n, u.iter().map(|x| x.conj() * mu.sqrt()));
                kraus.push(KrausOperator { block: i, matrix: row });
                any = true;
            }
            if !any {
                kraus.push(KrausOperator {
                    block: i,
                    matrix: CMatrix::zeros(1, n),
                });
            }
        }
        ReductionChannel::new(n, vec![1; self.outcomes.len()], kraus)
    }
}

/// Ensemble `p_j ϱ_j = √ω Q_j √ω`; members with `p_j ≤ tol.weight` are dropped.
pub fn ensemble_from_subalgebra(rho: &DensityOperator, projections: &[CMatrix], tol: &Tolerances) -> Result<Ensemble> {
    let n = check_projections(projections)?;
    if n != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: n,
        });
    }
    let root = rho.sqrt();
    let mut weights = Vec::new();
    let mut states = Vec::new();
    for q in projections {
        let part = hermitize(&(&root * q * &root));
        let p = part.trace().re;
        if p <= tol.weight {
            continue;
        }
        weights.push(p);
        states.push(DensityOperator::from_trusted(part.unscale(p)));
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(Ensemble::from_parts(weights, states))
}

/// Mutual entropy of `e` through the channel induced by `m`; the classical
/// mutual information of `p_j Tr(E_i ϱ_j)`.
pub fn measurement_mutual_info(e: &Ensemble, m: &Measurement, tol: &Tolerances) -> Result<f64> {
    if e.dim() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: e.dim(),
            found: m.dim(),
        });
    }
    mutual_entropy(e, &m.to_channel()?, tol)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BracketReport {
    /// Best sampled measurement mutual information.
    pub lower: f64,
    /// `H_ω(C)` from the roof solver.
    pub upper: f64,
    pub gap: f64,
    /// `S(ω) - upper`.
    pub holevo_slack: f64,
    /// Number of measurements evaluated.
    pub samples: usize,
    /// Label of the measurement attaining `lower`.
    pub best_measurement: String,
    /// `lower ≤ upper + 1e-6`.
    pub holds: bool,
}

fn structured_candidates(
    rho: &DensityOperator,
    projections: &[CMatrix],
    ensemble: &Ensemble,
) -> Result<Vec<(String, Measurement)>> {
    let mut bases = vec![("eigenbasis(ω)".to_string(), rho.eigh().vectors)];
    for (j, s) in ensemble.states().iter().enumerate() {
        bases.push((format!("eigenbasis(ϱ_{j})"), s.eigh().vectors));
    }
    let count = bases.len();
    for i in 1..count {
        for j in (i + 1)..count {
            let mid = orthonormal_columns(&(&bases[i].1 + &bases[j].1));
            bases.push((format!("midpoint(ϱ_{}, ϱ_{})", i - 1, j - 1), mid));
        }
    }
    let mut out = Vec::with_capacity(bases.len() + 1);
    out.push(("projections".to_string(), Measurement::from_projections(projections)?));
    for (label, b) in bases {
        // a rank-deficient sum gives no basis; skip it
        if let Ok(m) = Measurement::projective(&b) {
            out.push((label, m));
        }
    }
    Ok(out)
}

/// Brackets the accessible information of the ensemble `√ω Q_j √ω`.
///
/// `lower` maximizes over the structured candidates (the measurement `{Q_j}`,
/// the eigenbases of `ω` and of each `ϱ_j`, orthonormalized pairwise sums of
/// the latter) and `samples` Haar-random bases; ties go to the earliest
/// candidate. `upper` is the solver value of `H_ω(C)`.
pub fn benatti_bracket(
    rho: &DensityOperator,
    projections: &[CMatrix],
    cfg: &SolverConfig,
    samples: usize,
) -> Result<BracketReport> {
    let tol = &cfg.tol;
    let ensemble = ensemble_from_subalgebra(rho, projections, tol)?;
    let channel = ReductionChannel::commutative(projections)?;
    let upper = solve_r(rho, &channel, cfg)?.value_h;
    let entropy = von_neumann_entropy(rho, tol)?;

    let structured = structured_candidates(rho, projections, &ensemble)?;
    let n = rho.dim();
    let mut values: Vec<(String, f64)> = structured
        .par_iter()
        .map(|(label, m)| Ok((label.clone(), measurement_mutual_info(&ensemble, m, tol)?)))
        .collect::<Result<_>>()?;
    let sampled: Vec<(String, f64)> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(SAMPLE_STREAM + i as u64);
            let m = Measurement::projective(&haar_unitary(&mut rng, n))?;
            Ok((format!("haar[{i}]"), measurement_mutual_info(&ensemble, &m, tol)?))
        })
        .collect::<Result<_>>()?;
    values.extend(sampled);

    let mut best = 0;
    for (i, (_, v)) in values.iter().enumerate() {
        if *v > values[best].1 {
            best = i;
        }
    }
    let lower = values[best].1;
    Ok(BracketReport {
        lower,
        upper,
        gap: upper - lower,
        holevo_slack: entropy - upper,
        samples: values.len(),
        best_measurement: values[best].0.clone(),
        holds: lower <= upper + BOUND_TOL,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolevoReport {
    /// `H_ω(C)`.
    pub h: f64,
    /// `S(ω)`.
    pub entropy: f64,
    /// `S(ω) - H_ω(C)`.
    pub gap: f64,
    pub holds: bool,
}

pub fn holevo_check(rho: &DensityOperator, projections: &[CMatrix], cfg: &SolverConfig) -> Result<HolevoReport> {
    let channel = ReductionChannel::commutative(projections)?;
    let h = solve_r(rho, &channel, cfg)?.value_h;
    let entropy = von_neumann_entropy(rho, &cfg.tol)?;
    Ok(HolevoReport {
        h,
        entropy,
        gap: entropy - h,
        holds: h <= entropy + BOUND_TOL,
    })
}

/// Standard rank-one projections `|k⟩⟨k|`.
pub fn standard_projections(n: usize) -> Vec<CMatrix> {
    (0..n)
        .map(|k| {
            let mut q = CMatrix::zeros(n, n);
            q[(k, k)] = C64::new(1.0, 0.0);
            q
        })
        .collect()
}
