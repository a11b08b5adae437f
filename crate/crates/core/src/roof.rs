//! Convex-roof solver for `R(ω) = inf Σ p_j S(ϱ_j∘α)` over pure decompositions.
//!
//! Every length-`m` pure decomposition of a rank-`r` state `ω = Σ λ_k |e_k⟩⟨e_k|`
//! arises from an `m × r` matrix `V` with orthonormal columns through the
//! unnormalized vectors `φ_j = Σ_k V_jk √λ_k e_k`, `p_j = ‖φ_j‖²`. The solver
//! minimizes
//!
//! ```text
//! F(V) = Σ_j p_j S(ϱ_j∘α) = Σ_j [ Σ_b Tr s(B_jb) - s(p_j) ],   B_jb = Σ_{i∈b} K_i φ_j φ_j^† K_i^†
//! ```
//!
//! over the Stiefel manifold by projected gradient descent with a QR retraction
//! and Armijo step halving, from several starting isometries. The gradient of
//! one member with respect to `φ̄` is `(ln p - Σ_i K_i^† ln(B_{b(i)}) K_i) φ`,
//! with the logarithm taken on the support of each block.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{block_entropy, ReductionChannel};
use crate::ensemble::Ensemble;
use crate::random;
use crate::state::{self, orthonormal_columns, DensityOperator};
use crate::{s, CMatrix, CVector, Error, Result, Tolerances, C64};

/// Isometry check tolerance for user-supplied mixing matrices.
pub const ISOMETRY_TOL: f64 = 1e-10;
/// Agreement required by [`affinity_certificate`].
pub const AFFINITY_TOL: f64 = 1e-4;
/// Largest `H` accepted by [`zero_entropy_structure`].
pub const ZERO_ENTROPY_TOL: f64 = 1e-6;
/// Eigenvector-relation tolerance in [`zero_entropy_structure`].
pub const EIGENVECTOR_TOL: f64 = 1e-6;

const ARMIJO: f64 = 1e-4;
const MAX_STEP: f64 = 1e4;
const IMPROVEMENT_WINDOW: usize = 10;
const MEMORY: usize = 8;
const CURVATURE_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    /// Closed-form gradient through the block logarithms.
    #[default]
    Analytic,
    /// Central finite differences on each real parameter of the isometry.
    FiniteDifference,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Decomposition length `m`; `None` means `n²` for input dimension `n`.
    pub max_length: Option<usize>,
    /// Number of starting isometries: identity mixing, Fourier mixing, then Haar-random ones.
    pub restarts: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Stop when the accepted displacement `η‖grad‖` would fall below this.
    pub step_tol: f64,
    /// Stop when the objective improves by less than this over ten accepted steps.
    pub value_tol: f64,
    pub gradient: GradientMode,
    /// Step of the central differences in [`GradientMode::FiniteDifference`].
    pub fd_step: f64,
    pub tol: Tolerances,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_length: None,
            restarts: 64,
            seed: 0,
            max_iters: 5000,
            step_tol: 1e-10,
            value_tol: 1e-9,
            gradient: GradientMode::Analytic,
            fd_step: 1e-6,
            tol: Tolerances::default(),
        }
    }
}

impl SolverConfig {
    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn length_for(&self, n: usize) -> usize {
        self.max_length.unwrap_or(n * n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartKind {
    Identity,
    Fourier,
    Haar,
}

/// Outcome of one local descent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub index: usize,
    pub start: StartKind,
    pub initial_value: f64,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoofResult {
    /// Best value found for `R(ω)`.
    #[serde(rename = "value_R")]
    pub value_r: f64,
    /// `S(ω∘α) - value_r`.
    #[serde(rename = "value_H")]
    pub value_h: f64,
    /// `S(ω∘α)`.
    pub reduced_entropy: f64,
    /// Shortened pure decomposition attaining `value_r`.
    pub optimal_ensemble: Ensemble,
    pub restart_values: Vec<f64>,
    pub best_restart: usize,
    pub converged: bool,
    pub rank: usize,
    pub length: usize,
    pub restarts: Vec<RestartSummary>,
}

/// Rank-`r` square-root factor `E_r diag(√λ)` of a density operator.
struct RootFactor {
    w: CMatrix,
    rank: usize,
}

fn root_factor(rho: &DensityOperator, tol: &Tolerances) -> Result<RootFactor> {
    let e = rho.eigh();
    if let Some(&min) = e.values.first() {
        if min < -tol.psd {
            return Err(Error::NotPositive {
                min_eigenvalue: min,
            });
        }
    }
    let support: Vec<usize> = (0..e.dim()).rev().filter(|&k| e.values[k] > tol.psd).collect();
    let n = rho.dim();
    let mut w = CMatrix::zeros(n, support.len());
    for (c, &k) in support.iter().enumerate() {
        w.set_column(c, &e.vectors.column(k).scale(e.values[k].sqrt()));
    }
    Ok(RootFactor {
        rank: support.len(),
        w,
    })
}

fn check_isometry(v: &CMatrix) -> Result<()> {
    let r = v.ncols();
    let deviation = state::max_abs_diff(&(v.adjoint() * v), &CMatrix::identity(r, r));
    if deviation > ISOMETRY_TOL {
        return Err(Error::NotIsometry { deviation });
    }
    Ok(())
}

/// Pure decomposition of `ω` generated by the isometry `V` (rows index members,
/// columns index the eigenvectors of `ω` with eigenvalue above `tol.psd`, in
/// descending eigenvalue order).
pub fn decomposition_from_isometry(
    rho: &DensityOperator,
    v: &CMatrix,
    tol: &Tolerances,
) -> Result<Ensemble> {
    let root = root_factor(rho, tol)?;
    if v.ncols() != root.rank {
        return Err(Error::DimensionMismatch {
            expected: root.rank,
            found: v.ncols(),
        });
    }
    check_isometry(v)?;
    Ok(ensemble_from_vectors(&root.w, v, tol))
}

fn ensemble_from_vectors(w: &CMatrix, v: &CMatrix, tol: &Tolerances) -> Ensemble {
    let mut weights = Vec::new();
    let mut states = Vec::new();
    for j in 0..v.nrows() {
        let phi = w * v.row(j).transpose();
        let p = phi.norm_squared();
        if p <= tol.weight {
            continue;
        }
        weights.push(p);
        states.push(DensityOperator::from_trusted((&phi * phi.adjoint()).unscale(p)));
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|p| *p /= total);
    Ensemble::from_parts(weights, states)
}

/// `Σ p_j S(ω_j∘α)`.
pub fn objective(e: &Ensemble, channel: &ReductionChannel, tol: &Tolerances) -> Result<f64> {
    let mut total = 0.0;
    for (p, st) in e.iter() {
        total += p * block_entropy(&channel.reduce(st)?, tol)?;
    }
    Ok(total)
}

/// The objective `F(V)` for a fixed state and channel.
struct Landscape<'a> {
    w: CMatrix,
    channel: &'a ReductionChannel,
}

impl Landscape<'_> {
    /// Value and, optionally, `∂/∂φ̄` of `Σ_b Tr s(B_b) - s(p)` for one unnormalized vector.
    fn member(&self, phi: &CVector, want_grad: bool) -> (f64, Option<CVector>) {
        let p = phi.norm_squared();
        if !(p > f64::MIN_POSITIVE) {
            return (0.0, want_grad.then(|| CVector::zeros(phi.len())));
        }
        let kraus = self.channel.kraus();
        let ys: Vec<CVector> = kraus.iter().map(|k| &k.matrix * phi).collect();
        let dims = self.channel.block_dims();
        let mut value = -s(p);
        let mut grad = want_grad.then(|| phi.scale(p.ln()));
        // per block: gather members, build B, take its spectral data
        for (b, &d) in dims.iter().enumerate() {
            if d == 1 {
                let mass: f64 = kraus
                    .iter()
                    .zip(&ys)
                    .filter(|(k, _)| k.block == b)
                    .map(|(_, y)| y[0].norm_sqr())
                    .sum();
                value += s(mass);
                if let Some(g) = grad.as_mut() {
                    if mass > f64::MIN_POSITIVE {
                        let l = mass.ln();
                        for (k, y) in kraus.iter().zip(&ys).filter(|(k, _)| k.block == b) {
                            *g -= k.matrix.adjoint() * y.scale(l);
                        }
                    }
                }
                continue;
            }
            let mut blk = CMatrix::zeros(d, d);
            for (_, y) in kraus.iter().zip(&ys).filter(|(k, _)| k.block == b) {
                blk += y * y.adjoint();
            }
            let e = state::eigh_unchecked(&blk);
            value += e.values.iter().map(|&x| s(x)).sum::<f64>();
            if let Some(g) = grad.as_mut() {
                let log = e.map(|x| if x > f64::MIN_POSITIVE { x.ln() } else { 0.0 });
                for (k, y) in kraus.iter().zip(&ys).filter(|(k, _)| k.block == b) {
                    *g -= k.matrix.adjoint() * (&log * y);
                }
            }
        }
        (value, grad)
    }

    fn phi(&self, v: &CMatrix, j: usize) -> CVector {
        &self.w * v.row(j).transpose()
    }

    fn value(&self, v: &CMatrix) -> f64 {
        (0..v.nrows()).map(|j| self.member(&self.phi(v, j), false).0).sum()
    }

    /// Value and Euclidean gradient `∂F/∂V̄`.
    fn value_and_gradient(&self, v: &CMatrix, mode: GradientMode, h: f64) -> (f64, CMatrix) {
        match mode {
            GradientMode::Analytic => {
                let mut g = CMatrix::zeros(v.nrows(), v.ncols());
                let mut total = 0.0;
                let wa = self.w.adjoint();
                for j in 0..v.nrows() {
                    let (f, gphi) = self.member(&self.phi(v, j), true);
                    total += f;
                    let row = &wa * gphi.expect("gradient requested");
                    g.set_row(j, &row.transpose());
                }
                (total, g)
            }
            GradientMode::FiniteDifference => {
                let mut g = CMatrix::zeros(v.nrows(), v.ncols());
                let mut total = 0.0;
                let mut vp = v.clone();
                for j in 0..v.nrows() {
                    total += self.member(&self.phi(v, j), false).0;
                    for k in 0..v.ncols() {
                        let mut partial = [0.0; 2];
                        for (slot, dir) in [C64::new(h, 0.0), C64::new(0.0, h)].into_iter().enumerate() {
                            vp[(j, k)] = v[(j, k)] + dir;
                            let up = self.member(&self.phi(&vp, j), false).0;
                            vp[(j, k)] = v[(j, k)] - dir;
                            let down = self.member(&self.phi(&vp, j), false).0;
                            vp[(j, k)] = v[(j, k)];
                            partial[slot] = (up - down) / (2.0 * h);
                        }
                        g[(j, k)] = C64::new(partial[0], partial[1]) * 0.5;
                    }
                }
                (total, g)
            }
        }
    }
}

/// Projection of `G` onto the tangent space of the Stiefel manifold at `V`.
fn tangent(v: &CMatrix, g: &CMatrix) -> CMatrix {
    let x = v.adjoint() * g;
    g - v * state::hermitize(&x)
}

struct Descent {
    v: CMatrix,
    value: f64,
    initial_value: f64,
    iterations: usize,
    converged: bool,
}

/// `Re Tr(A^† B)`.
fn inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Riemannian L-BFGS: stored pairs are re-projected onto the current tangent
/// space, steps are retracted by QR, and step lengths satisfy Armijo.
fn descend(land: &Landscape, v0: CMatrix, cfg: &SolverConfig) -> Descent {
    let mut v = v0;
    let (mut f, g) = land.value_and_gradient(&v, cfg.gradient, cfg.fd_step);
    let initial_value = f;
    let mut pg = tangent(&v, &g);
    let mut pairs: VecDeque<(CMatrix, CMatrix)> = VecDeque::with_capacity(MEMORY);
    let mut recent: Vec<f64> = Vec::with_capacity(IMPROVEMENT_WINDOW);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        let gn2 = pg.norm_squared();
        if !(gn2 > 0.0) {
            converged = true;
            break;
        }
        let mut dir = lbfgs_direction(&pg, &pairs);
        let mut slope = inner(&pg, &dir);
        let mut steepest = pairs.is_empty();
        if !(slope < 0.0) {
            dir = -pg.clone();
            slope = -gn2;
            steepest = true;
            pairs.clear();
        }
        let step = line_search(land, &v, f, &dir, slope, cfg.step_tol);
        let Some((eta, trial, ft)) = step else {
            if steepest {
                converged = true;
                break;
            }
            // memory led nowhere; restart from the plain gradient
            pairs.clear();
            continue;
        };
        iterations += 1;
        if recent.len() == IMPROVEMENT_WINDOW {
            recent.remove(0);
        }
        recent.push(f - ft);
        v = trial;
        let (fv, gv) = land.value_and_gradient(&v, cfg.gradient, cfg.fd_step);
        f = fv;
        let pg_new = tangent(&v, &gv);
        let s_k = tangent(&v, &dir.scale(eta));
        let y_k = &pg_new - tangent(&v, &pg);
        for pair in pairs.iter_mut() {
            pair.0 = tangent(&v, &pair.0);
            pair.1 = tangent(&v, &pair.1);
        }
        if inner(&s_k, &y_k) > CURVATURE_FLOOR * s_k.norm() * y_k.norm() {
            if pairs.len() == MEMORY {
                pairs.pop_front();
            }
            pairs.push_back((s_k, y_k));
        }
        pg = pg_new;
        if recent.len() == IMPROVEMENT_WINDOW && recent.iter().sum::<f64>() < cfg.value_tol {
            converged = true;
            break;
        }
    }
    Descent {
        v,
        value: f,
        initial_value,
        iterations,
        converged,
    }
}

/// Two-loop recursion; the plain negative gradient when memory is empty.
fn lbfgs_direction(pg: &CMatrix, pairs: &VecDeque<(CMatrix, CMatrix)>) -> CMatrix {
    let mut q = pg.clone();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y) in pairs.iter().rev() {
        let rho = 1.0 / inner(y, s);
        let a = rho * inner(s, &q);
        q -= y.scale(a);
        alphas.push((rho, a));
    }
    if let Some((s, y)) = pairs.back() {
        q *= C64::new(inner(s, y) / y.norm_squared(), 0.0);
    }
    for ((s, y), (rho, a)) in pairs.iter().zip(alphas.into_iter().rev()) {
        let b = rho * inner(y, &q);
        q += s.scale(a - b);
    }
    -q
}

/// Armijo backtracking from a unit step.
fn line_search(
    land: &Landscape,
    v: &CMatrix,
    f: f64,
    dir: &CMatrix,
    slope: f64,
    step_tol: f64,
) -> Option<(f64, CMatrix, f64)> {
    let dn = dir.norm();
    let mut eta = 1.0f64.min(MAX_STEP / dn.max(f64::MIN_POSITIVE));
    loop {
        if eta * dn < step_tol {
            return None;
        }
        let trial = orthonormal_columns(&(v + dir.scale(eta)));
        let ft = land.value(&trial);
        if ft <= f + ARMIJO * eta * slope {
            return Some((eta, trial, ft));
        }
        eta *= 0.5;
    }
}

/// Identity mixing: the eigen-ensemble of `ω`.
pub fn identity_mixing(m: usize, r: usize) -> CMatrix {
    CMatrix::from_fn(m, r, |j, k| if j == k { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
}

/// Discrete-Fourier mixing `V_jk = e^{2πi jk/m} / √m`.
pub fn fourier_mixing(m: usize, r: usize) -> CMatrix {
    let norm = (m as f64).sqrt();
    CMatrix::from_fn(m, r, |j, k| {
        let angle = 2.0 * std::f64::consts::PI * ((j * k) % m) as f64 / m as f64;
        C64::from_polar(1.0 / norm, angle)
    })
}

fn start_point(index: usize, m: usize, r: usize, seed: u64) -> (StartKind, CMatrix) {
    match index {
        0 => (StartKind::Identity, identity_mixing(m, r)),
        1 => (StartKind::Fourier, fourier_mixing(m, r)),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(index as u64);
            (StartKind::Haar, random::haar_isometry(&mut rng, m, r))
        }
    }
}

/// Computes `R(ω)` and `H_ω(α) = S(ω∘α) - R(ω)` by multi-start descent.
///
/// Restarts run in parallel; the best value wins, ties going to the lowest
/// restart index, so the result does not depend on scheduling.
pub fn solve_r(rho: &DensityOperator, channel: &ReductionChannel, cfg: &SolverConfig) -> Result<RoofResult> {
    let n = rho.dim();
    if n != channel.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: channel.input_dim(),
            found: n,
        });
    }
    if cfg.restarts == 0 {
        return Err(Error::Precondition("restarts must be at least 1".into()));
    }
    let tol = &cfg.tol;
    let reduced_entropy = block_entropy(&channel.reduce(rho)?, tol)?;
    let root = root_factor(rho, tol)?;
    let m = cfg.length_for(n);
    if m < root.rank {
        return Err(Error::Precondition(format!(
            "max_length {m} is below rank {}",
            root.rank
        )));
    }
    let land = Landscape { w: root.w.clone(), channel };
    let runs: Vec<(RestartSummary, CMatrix)> = (0..cfg.restarts)
        .into_par_iter()
        .map(|index| {
            let (start, v0) = start_point(index, m, root.rank, cfg.seed);
            let d = descend(&land, v0, cfg);
            (
                RestartSummary {
                    index,
                    start,
                    initial_value: d.initial_value,
                    value: d.value,
                    iterations: d.iterations,
                    converged: d.converged,
                },
                d.v,
            )
        })
        .collect();
    let best = runs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.value.total_cmp(&b.1 .0.value).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .expect("at least one restart");
    let optimal_ensemble = ensemble_from_vectors(&root.w, &runs[best].1, tol).shorten(tol);
    let value_r = objective(&optimal_ensemble, channel, tol)?;
    let restarts: Vec<RestartSummary> = runs.into_iter().map(|(s, _)| s).collect();
    Ok(RoofResult {
        value_r,
        value_h: reduced_entropy - value_r,
        reduced_entropy,
        optimal_ensemble,
        restart_values: restarts.iter().map(|r| r.value).collect(),
        best_restart: best,
        converged: restarts[best].converged,
        rank: root.rank,
        length: m,
        restarts,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffinitySample {
    pub coefficients: Vec<f64>,
    pub predicted: f64,
    pub resolved: f64,
    pub discrepancy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffinityReport {
    pub members: usize,
    pub samples: Vec<AffinitySample>,
    pub max_discrepancy: f64,
    /// Largest `resolved - predicted`; positive values mean the affine
    /// prediction fell below the re-solved roof.
    pub max_excess: f64,
    pub result_converged: bool,
    pub passed: bool,
}

/// Tests that `R` is affine on the convex hull of the optimal pure states:
/// for random convex recombinations `ω' = Σ q_j ϱ_j` the re-solved `R(ω')`
/// must match `Σ q_j S(ϱ_j∘α)`.
pub fn affinity_certificate(
    result: &RoofResult,
    channel: &ReductionChannel,
    samples: usize,
    cfg: &SolverConfig,
) -> Result<AffinityReport> {
    let tol = &cfg.tol;
    let members = result.optimal_ensemble.states();
    let entropies: Vec<f64> = members
        .iter()
        .map(|st| block_entropy(&channel.reduce(st)?, tol))
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(0xaff1);
    let mut out = Vec::with_capacity(samples);
    for _ in 0..samples {
        let q = random::simplex_point(&mut rng, members.len());
        let n = result.optimal_ensemble.dim();
        let mixed = members
            .iter()
            .zip(&q)
            .fold(CMatrix::zeros(n, n), |acc, (st, &w)| acc + st.matrix().scale(w));
        let mixed = DensityOperator::from_trusted(mixed);
        let predicted: f64 = q.iter().zip(&entropies).map(|(w, h)| w * h).sum();
        let resolved = solve_r(&mixed, channel, cfg)?.value_r;
        out.push(AffinitySample {
            coefficients: q,
            predicted,
            resolved,
            discrepancy: (resolved - predicted).abs(),
        });
    }
    let max_discrepancy = out.iter().map(|a| a.discrepancy).fold(0.0, f64::max);
    let max_excess = out
        .iter()
        .map(|a| a.resolved - a.predicted)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(AffinityReport {
        members: members.len(),
        samples: out,
        max_discrepancy,
        max_excess: if samples == 0 { 0.0 } else { max_excess },
        result_converged: result.converged,
        passed: max_discrepancy <= AFFINITY_TOL,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportVectorCheck {
    pub eigenvalue: f64,
    #[serde(with = "crate::io::vector")]
    pub vector: CVector,
    /// `⟨v, P_b v⟩` for every central block projection `P_b`.
    pub block_weights: Vec<f64>,
    /// Largest `‖P_b v - ⟨v, P_b v⟩ v‖`.
    pub max_residual: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroEntropyReport {
    #[serde(rename = "value_H")]
    pub value_h: f64,
    pub vectors: Vec<SupportVectorCheck>,
    pub pass: bool,
}

/// For a state with `H_ω(α) = 0`, checks that every support eigenvector of `ω`
/// is a common eigenvector of the central projections of the output algebra,
/// i.e. lies in a single block range.
pub fn zero_entropy_structure(
    rho: &DensityOperator,
    channel: &ReductionChannel,
    result: &RoofResult,
    tol: &Tolerances,
) -> Result<ZeroEntropyReport> {
    if result.value_h > ZERO_ENTROPY_TOL {
        return Err(Error::Precondition(format!(
            "H = {:.6e} exceeds {ZERO_ENTROPY_TOL:e}",
            result.value_h
        )));
    }
    if rho.dim() != channel.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: channel.input_dim(),
            found: rho.dim(),
        });
    }
    let projections = channel.block_projections();
    let e = rho.eigh();
    let mut vectors = Vec::new();
    for k in (0..e.dim()).rev().filter(|&k| e.values[k] > tol.psd) {
        let v = e.vector(k);
        let mut block_weights = Vec::with_capacity(projections.len());
        let mut max_residual = 0.0f64;
        for p in &projections {
            let pv = p * &v;
            let w = v.dotc(&pv);
            block_weights.push(w.re);
            max_residual = max_residual.max((pv - v.scale(w.re)).norm());
        }
        vectors.push(SupportVectorCheck {
            eigenvalue: e.values[k],
            vector: v,
            block_weights,
            max_residual,
            pass: max_residual <= EIGENVECTOR_TOL,
        });
    }
    Ok(ZeroEntropyReport {
        value_h: result.value_h,
        pass: vectors.iter().all(|v| v.pass),
        vectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::coordinate_projection;
    use crate::ensemble::mutual_entropy;
    use crate::state::PureState;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, LN_2};

    fn cfg(restarts: usize) -> SolverConfig {
        SolverConfig::default().with_restarts(restarts).with_seed(7)
    }

    fn qubit(z: C64, d0: f64) -> DensityOperator {
        DensityOperator::new(
            CMatrix::from_row_slice(2, 2, &[C64::new(d0, 0.0), z, z.conj(), C64::new(1.0 - d0, 0.0)]),
            &Tolerances::default(),
        )
        .unwrap()
    }

    /// `h((1 + √(1 - 4|z|²)) / 2)` evaluated directly.
    fn qubit_closed_form(z: f64) -> f64 {
        let q = 0.5 + 0.5 * (1.0 - 4.0 * z * z).sqrt();
        s(q) + s(1.0 - q)
    }

    #[test]
    fn identity_isometry_gives_eigen_ensemble() {
        let t = Tolerances::default();
        let rho = DensityOperator::diagonal(&[0.2, 0.3, 0.5], &t).unwrap();
        let e = decomposition_from_isometry(&rho, &identity_mixing(3, 3), &t).unwrap();
        assert_eq!(e.len(), 3);
        let mut w = e.weights().to_vec();
        w.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(w[0], 0.2, epsilon = 1e-14);
        assert_abs_diff_eq!(w[2], 0.5, epsilon = 1e-14);
        assert!(e.states().iter().all(|s| (s.purity() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn pure_state_decompositions_collapse() {
        let t = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let psi = random::haar_pure(&mut rng, 3);
        let v = random::haar_isometry(&mut rng, 5, 1);
        let e = decomposition_from_isometry(&psi.density(), &v, &t).unwrap();
        let short = e.shorten(&t);
        assert_eq!(short.len(), 1);
        assert!(state::max_abs_diff(short.states()[0].matrix(), psi.density().matrix()) < 1e-12);
    }

    #[test]
    fn hadamard_mixing_of_maximally_mixed_qubit() {
        let t = Tolerances::default();
        let h = CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(FRAC_1_SQRT_2, 0.0),
                C64::new(FRAC_1_SQRT_2, 0.0),
                C64::new(FRAC_1_SQRT_2, 0.0),
                C64::new(-FRAC_1_SQRT_2, 0.0),
            ],
        );
        let e = decomposition_from_isometry(&DensityOperator::maximally_mixed(2), &h, &t).unwrap();
        assert_eq!(e.len(), 2);
        for (p, st) in e.iter() {
            assert_abs_diff_eq!(p, 0.5, epsilon = 1e-15);
            // |±⟩⟨±| has all entries of modulus 1/2
            assert!(st.matrix().iter().all(|c| (c.norm() - 0.5).abs() < 1e-15));
        }
        assert!(state::max_abs_diff(e.convex_sum().matrix(), DensityOperator::maximally_mixed(2).matrix()) < 1e-15);
    }

    #[test]
    fn decomposition_rejects_non_isometry_and_wrong_rank() {
        let t = Tolerances::default();
        let rho = DensityOperator::maximally_mixed(2);
        let bad = identity_mixing(3, 2).scale(1.1);
        assert!(matches!(decomposition_from_isometry(&rho, &bad, &t), Err(Error::NotIsometry { .. })));
        assert!(matches!(
            decomposition_from_isometry(&rho, &identity_mixing(3, 1), &t),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn random_isometries_reconstruct_the_state() {
        let t = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for i in 0..100 {
            let n = 2 + i % 3;
            let rank = 1 + i % n;
            let rho = random::ginibre_state(&mut rng, n, Some(rank));
            let m = rank + rng.random_range(0..5);
            let v = random::haar_isometry(&mut rng, m, rank);
            let e = decomposition_from_isometry(&rho, &v, &t).unwrap();
            assert!(state::max_abs_diff(e.convex_sum().matrix(), rho.matrix()) <= 1e-10);
            assert!(e.min_purity() >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn objective_examples() {
        let t = Tolerances::default();
        let pinch = ReductionChannel::diagonal_pinching(2).unwrap();
        let diag = DensityOperator::diagonal(&[0.3, 0.7], &t).unwrap();
        let eig = decomposition_from_isometry(&diag, &identity_mixing(2, 2), &t).unwrap();
        assert!(objective(&eig, &pinch, &t).unwrap().abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = random::ginibre_state(&mut rng, 2, None);
        let single = objective(&Ensemble::singleton(rho.clone()), &pinch, &t).unwrap();
        assert_abs_diff_eq!(single, block_entropy(&pinch.reduce(&rho).unwrap(), &t).unwrap());

        let plus = PureState::normalized(CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)])).unwrap();
        let minus = PureState::normalized(CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)])).unwrap();
        let pm = Ensemble::new(vec![0.5, 0.5], vec![plus.density(), minus.density()]).unwrap();
        assert_abs_diff_eq!(objective(&pm, &pinch, &t).unwrap(), LN_2, epsilon = 1e-15);
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for i in 0..30 {
            let n = 2 + i % 3;
            let rho = random::ginibre_state(&mut rng, n, None);
            let ch = random::random_channel(&mut rng, n);
            let root = root_factor(&rho, &Tolerances::default()).unwrap();
            let land = Landscape { w: root.w, channel: &ch };
            let v = random::haar_isometry(&mut rng, n * n, n);
            let (fa, ga) = land.value_and_gradient(&v, GradientMode::Analytic, 1e-6);
            let (ff, gf) = land.value_and_gradient(&v, GradientMode::FiniteDifference, 1e-6);
            assert_abs_diff_eq!(fa, ff, epsilon = 1e-14);
            assert!(state::max_abs_diff(&ga, &gf) < 1e-7, "{}", state::max_abs_diff(&ga, &gf));
        }
    }

    #[test]
    fn pure_states_have_zero_channel_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 2..5 {
            let psi = random::haar_pure(&mut rng, n);
            let ch = random::random_channel(&mut rng, n);
            let r = solve_r(&psi.density(), &ch, &cfg(4)).unwrap();
            assert!(r.value_h.abs() <= 1e-10);
            assert_abs_diff_eq!(r.value_r, r.reduced_entropy, epsilon = 1e-10);
        }
    }

    #[test]
    fn qubit_with_off_diagonal_point_three() {
        let rho = qubit(C64::new(0.3, 0.0), 0.5);
        let pinch = ReductionChannel::diagonal_pinching(2).unwrap();
        let r = solve_r(&rho, &pinch, &cfg(8)).unwrap();
        // q = 0.9 in the closed form
        assert_abs_diff_eq!(r.value_r, 0.3250829733914482, epsilon = 1e-7);
        assert!(r.converged);
    }

    #[test]
    fn maximally_mixed_qubit_under_pinching() {
        let pinch = ReductionChannel::diagonal_pinching(2).unwrap();
        let r = solve_r(&DensityOperator::maximally_mixed(2), &pinch, &cfg(4)).unwrap();
        assert!(r.value_r.abs() < 1e-12);
        assert_abs_diff_eq!(r.value_h, LN_2, epsilon = 1e-12);
    }

    #[test]
    fn finite_difference_mode_agrees_on_qubits() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let pinch = ReductionChannel::diagonal_pinching(2).unwrap();
        let fd = SolverConfig {
            gradient: GradientMode::FiniteDifference,
            ..cfg(6)
        };
        for _ in 0..5 {
            let rho = random::ginibre_state(&mut rng, 2, None);
            let r = solve_r(&rho, &pinch, &fd).unwrap();
            assert_abs_diff_eq!(r.value_r, qubit_closed_form(rho.matrix()[(0, 1)].norm()), epsilon = 1e-6);
        }
    }

    #[test]
    fn result_invariants_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let c = cfg(6);
        for i in 0..20 {
            let n = 2 + i % 2;
            let rho = random::ginibre_state(&mut rng, n, Some(1 + i % n));
            let ch = random::random_channel(&mut rng, n);
            let r = solve_r(&rho, &ch, &c).unwrap();
            assert!(r.optimal_ensemble.min_purity() >= 1.0 - 1e-8);
            assert!(state::max_abs_diff(r.optimal_ensemble.convex_sum().matrix(), rho.matrix()) <= 1e-7);
            assert!(r.value_r <= r.reduced_entropy + 1e-9);
            assert!(r.value_h >= -1e-8);
            assert_eq!(r.value_h, r.reduced_entropy - r.value_r);
            // eigen-ensemble is start 0
            assert!(r.value_r <= r.restarts[0].initial_value + 1e-12);
            let i_form = mutual_entropy(&r.optimal_ensemble, &ch, &c.tol).unwrap();
            assert!((i_form - r.value_h).abs() <= 1e-6);
            assert_eq!(r.restart_values.len(), c.restarts);
        }
    }

    #[test]
    fn solver_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rho = random::ginibre_state(&mut rng, 3, None);
        let ch = random::random_kraus_channel(&mut rng, 3);
        let a = solve_r(&rho, &ch, &cfg(6)).unwrap();
        let b = solve_r(&rho, &ch, &cfg(6)).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn solver_errors() {
        let rho = DensityOperator::maximally_mixed(3);
        let pinch = ReductionChannel::diagonal_pinching(2).unwrap();
        assert!(matches!(solve_r(&rho, &pinch, &cfg(2)), Err(Error::DimensionMismatch { .. })));
        let pinch3 = ReductionChannel::diagonal_pinching(3).unwrap();
        assert!(matches!(solve_r(&rho, &pinch3, &cfg(0)), Err(Error::Precondition(_))));
        let short = SolverConfig { max_length: Some(2), ..cfg(2) };
        assert!(matches!(solve_r(&rho, &pinch3, &short), Err(Error::Precondition(_))));
    }

    #[test]
    fn non_convergence_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let rho = random::ginibre_state(&mut rng, 2, None);
        let pinch = ReductionChannel::diagonal_pinching(2).unwrap();
        let starved = SolverConfig { max_iters: 1, ..cfg(3) };
        let r = solve_r(&rho, &pinch, &starved).unwrap();
        assert!(!r.converged);
        assert!(r.value_r <= r.reduced_entropy + 1e-9);
    }

    #[test]
    fn affinity_examples() {
        let c = cfg(4);
        let pinch = ReductionChannel::diagonal_pinching(2).unwrap();
        let psi = PureState::normalized(CVector::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)])).unwrap();
        let single = solve_r(&psi.density(), &pinch, &c).unwrap();
        let rep = affinity_certificate(&single, &pinch, 3, &c).unwrap();
        assert_eq!(rep.members, 1);
        assert!(rep.max_discrepancy < 1e-12 && rep.passed);

        let diag = DensityOperator::diagonal(&[0.4, 0.6], &Tolerances::default()).unwrap();
        let r = solve_r(&diag, &pinch, &c).unwrap();
        assert_eq!(r.optimal_ensemble.len(), 2);
        let rep = affinity_certificate(&r, &pinch, 4, &c).unwrap();
        assert!(rep.samples.iter().all(|a| a.predicted.abs() < 1e-15 && a.resolved.abs() < 1e-12));

        let rho = qubit(C64::new(0.1, 0.25), 0.35);
        let r = solve_r(&rho, &pinch, &c).unwrap();
        let rep = affinity_certificate(&r, &pinch, 5, &c).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!(rep.max_excess <= 1e-6);
    }

    #[test]
    fn zero_entropy_structure_examples() {
        let t = Tolerances::default();
        let c = cfg(3);
        let pinch = ReductionChannel::diagonal_pinching(2).unwrap();
        let zero = PureState::basis(2, 0).density();
        let r = solve_r(&zero, &pinch, &c).unwrap();
        assert!(zero_entropy_structure(&zero, &pinch, &r, &t).unwrap().pass);

        // positive H: precondition error
        let mixed = DensityOperator::maximally_mixed(2);
        let r = solve_r(&mixed, &pinch, &c).unwrap();
        assert!(matches!(zero_entropy_structure(&mixed, &pinch, &r, &t), Err(Error::Precondition(_))));

        // a mixed state inside one range of a commutative subalgebra has H = 0
        let com = ReductionChannel::commutative(&[coordinate_projection(3, &[0, 1]), coordinate_projection(3, &[2])]).unwrap();
        let inside = DensityOperator::diagonal(&[0.3, 0.7, 0.0], &t).unwrap();
        let inside = inside.conjugate_by(&{
            let mut u = CMatrix::identity(3, 3);
            let a = FRAC_1_SQRT_2;
            u[(0, 0)] = C64::new(a, 0.0);
            u[(0, 1)] = C64::new(0.0, a);
            u[(1, 0)] = C64::new(0.0, a);
            u[(1, 1)] = C64::new(a, 0.0);
            u
        });
        let r = solve_r(&inside, &com, &c).unwrap();
        let rep = zero_entropy_structure(&inside, &com, &r, &t).unwrap();
        assert_eq!(rep.vectors.len(), 2);
        assert!(rep.pass);

        // pure state in range(Q) under the block compression
        let psi = PureState::basis(3, 2);
        let bc = ReductionChannel::block_compression(&psi).unwrap();
        let v = PureState::normalized(CVector::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8), C64::new(0.0, 0.0)])).unwrap();
        let r = solve_r(&v.density(), &bc, &c).unwrap();
        assert!(zero_entropy_structure(&v.density(), &bc, &r, &t).unwrap().pass);

        // |+⟩ is pure, so H = 0, yet its vector straddles both diagonal blocks
        let plus = PureState::normalized(CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)])).unwrap();
        let r = solve_r(&plus.density(), &pinch, &c).unwrap();
        assert!(r.value_h.abs() < 1e-12);
        let rep = zero_entropy_structure(&plus.density(), &pinch, &r, &t).unwrap();
        assert!(!rep.pass);
        assert_abs_diff_eq!(rep.vectors[0].block_weights[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn coarse_graining_never_increases_h() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c = cfg(8);
        for case in 0..12 {
            let n = 3 + case % 2;
            let rho = random::ginibre_state(&mut rng, n, None);
            let basis = random::haar_unitary(&mut rng, n);
            let mut fine = random::random_partition(&mut rng, n);
            if fine.len() < 2 {
                fine = vec![1; n];
            }
            let mut coarse = fine.clone();
            let merged = coarse.remove(0);
            coarse[0] += merged;

            let h = |parts: &[usize]| {
                let ch = ReductionChannel::commutative(&random::projections_from_partition(&basis, parts)).unwrap();
                solve_r(&rho, &ch, &c).unwrap().value_h
            };
            let (hc, hf) = (h(&coarse), h(&fine));
            assert!(hc <= hf + 2e-4, "case {case}: coarse {hc} > fine {hf}");
        }
    }
}
