//! Closed-form and constructive ground truth.
//!
//! Qubit under the diagonal subalgebra: with `z` the off-diagonal entry of `ω`,
//!
//! ```text
//! R(ω) = s(q) + s(1 - q),   q = 1/2 + 1/2 √(1 - 4|z|²)
//!      = ln 2 - Σ_{k≥1} (1 - 4|z|²)^k / (2k (2k - 1))
//! ```
//!
//! Block example `M_{n+1} → M_n ⊕ M_1`: with `ψ` the distinguished vector,
//! `ψ_k` eigenvectors of `QωQ` phased so that `z_k = ⟨ψ_k, ωψ⟩ ≥ 0`,
//! `z = Σ z_k` and `μ± = (1 ± √(1 - 4z²)) / 2`, the pure states
//! `ϱ±_k` on `span{ψ_k, ψ}` with Gram block `[[μ±, z], [z, μ∓]]` decompose `ω`
//! whenever the solved weights are nonnegative, and give the upper bound
//! `R(ω) ≤ s(μ+) + s(μ-)`.

use serde::{Deserialize, Serialize};

use crate::channel::complement_coisometry;
use crate::ensemble::Ensemble;
use crate::state::{eigh_unchecked, DensityOperator, PureState};
use crate::{s, CMatrix, CVector, Error, Result, Tolerances, C64};

/// Slack on `|z| ≤ 1/2`.
pub const DOMAIN_TOL: f64 = 1e-12;
/// Weights below `-NEGATIVE_WEIGHT_TOL` make the block construction fail.
pub const NEGATIVE_WEIGHT_TOL: f64 = 1e-9;
/// Tolerance of the `⟨ψ, ωψ⟩` consistency check.
pub const CONSISTENCY_TOL: f64 = 1e-8;

const DEGENERATE_GAP: f64 = 1e-9;
const ZERO_OVERLAP: f64 = 1e-15;

fn check_half(z: f64) -> Result<f64> {
    if !(z <= 0.5 + DOMAIN_TOL) {
        return Err(Error::OutOfRange {
            what: "|z| (must be at most 1/2)",
            value: z,
        });
    }
    Ok(z.min(0.5))
}

/// Closed-form roof of the qubit under the diagonal subalgebra; depends on `|z|` only.
pub fn qubit_r(z: C64) -> Result<f64> {
    let a = check_half(z.norm())?;
    let q = 0.5 + 0.5 * (1.0 - 4.0 * a * a).max(0.0).sqrt();
    Ok(s(q) + s(1.0 - q))
}

/// Partial sum `ln 2 - Σ_{k=1}^{terms} (1 - 4|z|²)^k / (2k (2k - 1))`.
pub fn qubit_r_series(z: C64, terms: usize) -> Result<f64> {
    if terms == 0 {
        return Err(Error::OutOfRange {
            what: "series terms",
            value: 0.0,
        });
    }
    let a = check_half(z.norm())?;
    let x = (1.0 - 4.0 * a * a).max(0.0);
    let mut power = 1.0;
    let mut total = std::f64::consts::LN_2;
    for k in 1..=terms {
        power *= x;
        let kf = k as f64;
        total -= power / (2.0 * kf * (2.0 * kf - 1.0));
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockExampleData {
    pub psi: PureState,
    /// Eigenvectors `ψ_k` of `QωQ` in `range(Q)`, as vectors of the input space.
    #[serde(with = "crate::io::vector_list")]
    pub eigvecs: Vec<CVector>,
    /// `λ_k = ⟨ψ_k, ωψ_k⟩`.
    pub eigvals: Vec<f64>,
    /// `z_k = ⟨ψ_k, ωψ⟩ ≥ 0`.
    pub overlaps: Vec<f64>,
    /// `λ = ⟨ψ, ωψ⟩`.
    pub lambda: f64,
    /// `z = Σ z_k`.
    pub z: f64,
    /// `μ±`; absent when `z > 1/2`.
    pub mu_plus: Option<f64>,
    pub mu_minus: Option<f64>,
}

impl BlockExampleData {
    /// Lists violated invariants: negative overlaps, `z_k² > λ_k λ`, and the
    /// `μ±` relations.
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (k, (&zk, &lk)) in self.overlaps.iter().zip(&self.eigvals).enumerate() {
            if zk < 0.0 {
                out.push(format!("z_{k} = {zk} is negative"));
            }
            if zk * zk > lk * self.lambda + 1e-9 {
                out.push(format!("z_{k}² = {} exceeds λ_{k} λ = {}", zk * zk, lk * self.lambda));
            }
        }
        if let (Some(p), Some(m)) = (self.mu_plus, self.mu_minus) {
            if (p + m - 1.0).abs() > 1e-10 {
                out.push(format!("μ+ + μ- = {}", p + m));
            }
            if (p * m - self.z * self.z).abs() > 1e-10 {
                out.push(format!("μ+ μ- = {} but z² = {}", p * m, self.z * self.z));
            }
        }
        out
    }
}

/// Spectral data of the block example for `ω` on `M_{n+1}` and distinguished vector `ψ`.
///
/// Inside a degenerate eigenspace of `QωQ` the basis is chosen so that only
/// its first vector overlaps `ωψ`; this makes `z = Σ z_k` the smallest
/// value over all admissible eigenbases.
pub fn block_example_analyze(rho: &DensityOperator, psi: &PureState) -> Result<BlockExampleData> {
    let n1 = rho.dim();
    if psi.dim() != n1 {
        return Err(Error::DimensionMismatch {
            expected: n1,
            found: psi.dim(),
        });
    }
    if n1 < 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: n1 });
    }
    let w = rho.matrix();
    let v = psi.vector();
    let co = complement_coisometry(v);
    let compressed = &co * w * co.adjoint();
    let e = eigh_unchecked(&compressed);
    let w_psi = w * v;
    // overlap target in range(Q) coordinates: ⟨u, co ωψ⟩
    let target = &co * &w_psi;

    let mut eigvecs = Vec::new();
    let mut eigvals = Vec::new();
    let n = e.dim();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (e.values[end] - e.values[start]).abs() <= DEGENERATE_GAP {
            end += 1;
        }
        let group: Vec<CVector> = (start..end).map(|k| e.vector(k)).collect();
        for u in align_group(&group, &target) {
            let lift = co.adjoint() * &u;
            eigvals.push((lift.dotc(&(w * &lift))).re);
            eigvecs.push(lift);
        }
        start = end;
    }

    let mut overlaps = Vec::with_capacity(eigvecs.len());
    for vk in eigvecs.iter_mut() {
        let zk = vk.dotc(&w_psi);
        let mag = zk.norm();
        if mag > 0.0 {
            // ⟨e^{iθ} ψ_k, ωψ⟩ = e^{-iθ} ⟨ψ_k, ωψ⟩
            let phase = zk / mag;
            *vk *= phase;
        }
        overlaps.push(mag);
    }
    let lambda = v.dotc(&w_psi).re;
    let z: f64 = overlaps.iter().sum();
    let (mu_plus, mu_minus) = if z <= 0.5 + DOMAIN_TOL {
        let root = (1.0 - 4.0 * z * z).max(0.0).sqrt();
        (Some((1.0 + root) / 2.0), Some((1.0 - root) / 2.0))
    } else {
        (None, None)
    };
    Ok(BlockExampleData {
        psi: psi.clone(),
        eigvecs,
        eigvals,
        overlaps,
        lambda,
        z,
        mu_plus,
        mu_minus,
    })
}

/// Rotates an orthonormal group so that the first vector is the normalized
/// projection of `target` onto the group span and the rest are orthogonal to it.
fn align_group(group: &[CVector], target: &CVector) -> Vec<CVector> {
    if group.len() == 1 {
        return group.to_vec();
    }
    let coeffs = CVector::from_iterator(group.len(), group.iter().map(|u| u.dotc(target)));
    let norm = coeffs.norm();
    if norm <= ZERO_OVERLAP {
        return group.to_vec();
    }
    // Householder-free completion: Gram-Schmidt of [c, e_1, e_2, ...] in coefficient space
    let d = group.len();
    let mut basis: Vec<CVector> = vec![coeffs.unscale(norm)];
    for k in 0..d {
        if basis.len() == d {
            break;
        }
        let mut x = CVector::zeros(d);
        x[k] = C64::new(1.0, 0.0);
        for b in &basis {
            let proj = b.dotc(&x);
            x -= b * proj;
        }
        let nx = x.norm();
        if nx > 1e-8 {
            basis.push(x.unscale(nx));
        }
    }
    basis
        .iter()
        .map(|c| {
            group
                .iter()
                .zip(c.iter())
                .fold(CVector::zeros(group[0].len()), |acc, (u, &ck)| acc + u * ck)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockDecomposition {
    pub ensemble: Ensemble,
    /// `s(μ+) + s(μ-)`, the upper bound on `R(ω)`.
    pub candidate: f64,
    /// Solved weights `p_k^+` and `p_k^-` per eigenvector.
    pub weights_plus: Vec<f64>,
    pub weights_minus: Vec<f64>,
    /// Set when `μ+ = μ-` (z = 1/2) and the weights were split symmetrically.
    pub degenerate: bool,
}

/// Explicit pure decomposition of `ω` from the block-example states `ϱ±_k`.
///
/// For each `k` the weights solve `p_k^+ + p_k^- = z_k / z` and
/// `p_k^+ μ+ + p_k^- μ- = λ_k`. When `z = 0` the state is block diagonal
/// and decomposes into the `ψ_k` and `ψ` themselves.
pub fn block_example_decomposition(
    data: &BlockExampleData,
    rho: &DensityOperator,
    tol: &Tolerances,
) -> Result<BlockDecomposition> {
    let z = check_half(data.z)?;
    let (mu_plus, mu_minus) = match (data.mu_plus, data.mu_minus) {
        (Some(p), Some(m)) => (p, m),
        _ => {
            return Err(Error::OutOfRange {
                what: "z (must be at most 1/2)",
                value: data.z,
            })
        }
    };
    if rho.dim() != data.psi.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.psi.dim(),
            found: rho.dim(),
        });
    }
    let psi = data.psi.vector();
    let n = data.eigvecs.len();

    if z <= ZERO_OVERLAP {
        let mut weights = data.eigvals.clone();
        weights.push(data.lambda);
        let mut vectors = data.eigvecs.clone();
        vectors.push(psi.clone());
        let ensemble = pure_ensemble(&weights, &vectors, tol);
        return Ok(BlockDecomposition {
            ensemble: ensemble.shorten(tol),
            candidate: 0.0,
            weights_plus: data.eigvals.clone(),
            weights_minus: vec![0.0; n],
            degenerate: false,
        });
    }

    let gap = mu_plus - mu_minus;
    let degenerate = gap <= DEGENERATE_GAP;
    let mut plus = Vec::with_capacity(n);
    let mut minus = Vec::with_capacity(n);
    for k in 0..n {
        let share = data.overlaps[k] / z;
        let (pp, pm) = if degenerate {
            (share / 2.0, share / 2.0)
        } else {
            let pp = (data.eigvals[k] - share * mu_minus) / gap;
            (pp, share - pp)
        };
        plus.push(pp);
        minus.push(pm);
    }
    let worst = plus.iter().chain(&minus).copied().fold(f64::INFINITY, f64::min);
    if worst < -NEGATIVE_WEIGHT_TOL {
        return Err(Error::ConstructionFailure(format!(
            "negative weight {worst:.3e}; p+ = {plus:?}, p- = {minus:?}, λ_k = {:?}, z_k = {:?}, μ± = ({mu_plus}, {mu_minus})",
            data.eigvals, data.overlaps
        )));
    }
    let consistency: f64 = plus
        .iter()
        .zip(&minus)
        .map(|(pp, pm)| pp * mu_minus + pm * mu_plus)
        .sum();
    if (consistency - data.lambda).abs() > CONSISTENCY_TOL {
        return Err(Error::ConstructionFailure(format!(
            "Σ (p+ μ- + p- μ+) = {consistency} differs from λ = {}",
            data.lambda
        )));
    }
    if degenerate {
        if let Some((k, _)) = data
            .eigvals
            .iter()
            .zip(&data.overlaps)
            .enumerate()
            .find(|(_, (&lk, &zk))| (lk - zk / z / 2.0).abs() > CONSISTENCY_TOL)
        {
            return Err(Error::ConstructionFailure(format!(
                "z = 1/2 requires λ_k = z_k, violated at k = {k}"
            )));
        }
    }

    let (a, b) = (mu_plus.sqrt(), mu_minus.sqrt());
    let mut weights = Vec::with_capacity(2 * n);
    let mut vectors = Vec::with_capacity(2 * n);
    for k in 0..n {
        let vk = &data.eigvecs[k];
        weights.push(plus[k].max(0.0));
        vectors.push(vk.scale(a) + psi.scale(b));
        weights.push(minus[k].max(0.0));
        vectors.push(vk.scale(b) + psi.scale(a));
    }
    let ensemble = pure_ensemble(&weights, &vectors, tol).shorten(tol);
    Ok(BlockDecomposition {
        ensemble,
        candidate: s(mu_plus) + s(mu_minus),
        weights_plus: plus,
        weights_minus: minus,
        degenerate,
    })
}

fn pure_ensemble(weights: &[f64], vectors: &[CVector], tol: &Tolerances) -> Ensemble {
    let mut ws = Vec::new();
    let mut states = Vec::new();
    for (&p, v) in weights.iter().zip(vectors) {
        if p <= tol.weight {
            continue;
        }
        let norm2 = v.norm_squared();
        ws.push(p);
        states.push(DensityOperator::from_trusted((v * v.adjoint()).unscale(norm2)));
    }
    Ensemble::from_parts(ws, states)
}

/// `ω` written in the basis `(ψ_1, …, ψ_n, ψ)`.
pub fn block_example_matrix(data: &BlockExampleData, rho: &DensityOperator) -> CMatrix {
    let mut basis = data.eigvecs.clone();
    basis.push(data.psi.vector().clone());
    let d = basis.len();
    CMatrix::from_fn(d, d, |i, j| basis[i].dotc(&(rho.matrix() * &basis[j])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ReductionChannel;
    use crate::random;
    use crate::roof::{solve_r, SolverConfig};
    use crate::state::max_abs_diff;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::LN_2;

    fn qubit(z: C64) -> DensityOperator {
        DensityOperator::new(
            CMatrix::from_row_slice(2, 2, &[C64::new(0.5, 0.0), z, z.conj(), C64::new(0.5, 0.0)]),
            &Tolerances::default(),
        )
        .unwrap()
    }

    #[test]
    fn qubit_r_examples() {
        assert_eq!(qubit_r(C64::new(0.0, 0.0)).unwrap(), 0.0);
        assert_abs_diff_eq!(qubit_r(C64::new(0.0, 0.5)).unwrap(), LN_2, epsilon = 1e-15);
        // q = 0.9
        assert_abs_diff_eq!(qubit_r(C64::new(0.3, 0.0)).unwrap(), 0.3250829733914482, epsilon = 1e-15);
        assert_abs_diff_eq!(
            qubit_r(C64::from_polar(0.3, 1.1)).unwrap(),
            qubit_r(C64::new(0.3, 0.0)).unwrap(),
            epsilon = 1e-15
        );
        assert!(matches!(qubit_r(C64::new(0.51, 0.0)), Err(Error::OutOfRange { .. })));
        assert!(qubit_r(C64::new(0.5 + 1e-13, 0.0)).is_ok());
    }

    #[test]
    fn qubit_series_examples() {
        for terms in [1, 5, 50] {
            assert_eq!(qubit_r_series(C64::new(0.5, 0.0), terms).unwrap(), LN_2);
        }
        assert!(qubit_r_series(C64::new(0.0, 0.0), 200_000).unwrap() < 1e-5);
        assert_abs_diff_eq!(qubit_r_series(C64::new(0.3, 0.0), 200).unwrap(), 0.3250829733914482, epsilon = 1e-8);
        assert!(qubit_r_series(C64::new(0.3, 0.0), 0).is_err());
        assert!(qubit_r_series(C64::new(0.6, 0.0), 3).is_err());
    }

    #[test]
    fn qubit_r_is_a_convex_function_of_modulus() {
        let h = 1e-3;
        let mut a = h;
        while a + h <= 0.5 {
            let second = qubit_r(C64::new(a + h, 0.0)).unwrap() - 2.0 * qubit_r(C64::new(a, 0.0)).unwrap()
                + qubit_r(C64::new(a - h, 0.0)).unwrap();
            assert!(second >= -1e-9, "second difference {second} at {a}");
            a += h;
        }
    }

    #[test]
    fn series_decreases_towards_closed_form() {
        for i in 0..50 {
            let z = C64::new(i as f64 / 100.0, 0.0);
            let exact = qubit_r(z).unwrap();
            let mut prev = f64::INFINITY;
            for terms in 1..=200 {
                let v = qubit_r_series(z, terms).unwrap();
                assert!(v <= prev);
                assert!(v >= exact - 1e-12);
                prev = v;
            }
        }
    }

    #[test]
    fn analyze_pure_psi() {
        let psi = PureState::basis(3, 1);
        let d = block_example_analyze(&psi.density(), &psi).unwrap();
        assert!(d.overlaps.iter().all(|&z| z < 1e-15));
        assert_abs_diff_eq!(d.lambda, 1.0, epsilon = 1e-15);
        assert_eq!(d.z, 0.0);
        assert_eq!(d.mu_plus, Some(1.0));
        assert_eq!(d.mu_minus, Some(0.0));
        let dec = block_example_decomposition(&d, &psi.density(), &Tolerances::default()).unwrap();
        assert_eq!(dec.candidate, 0.0);
        assert_eq!(dec.ensemble.len(), 1);
    }

    #[test]
    fn analyze_block_diagonal_state() {
        let t = Tolerances::default();
        let rho = DensityOperator::diagonal(&[0.2, 0.5, 0.3], &t).unwrap();
        let d = block_example_analyze(&rho, &PureState::basis(3, 2)).unwrap();
        assert_eq!(d.z, 0.0);
        assert!(d.invariant_violations().is_empty());
        let dec = block_example_decomposition(&d, &rho, &t).unwrap();
        assert!(max_abs_diff(dec.ensemble.convex_sum().matrix(), rho.matrix()) < 1e-15);
        assert_eq!(dec.ensemble.len(), 3);
    }

    #[test]
    fn qubit_reduces_to_closed_form() {
        let t = Tolerances::default();
        let rho = qubit(C64::new(0.3, 0.0));
        let d = block_example_analyze(&rho, &PureState::basis(2, 1)).unwrap();
        assert_abs_diff_eq!(d.z, 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(d.mu_plus.unwrap(), 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(d.mu_minus.unwrap(), 0.1, epsilon = 1e-15);
        let dec = block_example_decomposition(&d, &rho, &t).unwrap();
        assert_abs_diff_eq!(dec.candidate, 0.3250829733914482, epsilon = 1e-15);
        assert_eq!(dec.ensemble.len(), 2);
        assert!(max_abs_diff(dec.ensemble.convex_sum().matrix(), rho.matrix()) < 1e-15);
        // the two members reduce to (0.9, 0.1) and (0.1, 0.9) under pinching
        let pinch = ReductionChannel::diagonal_pinching(2).unwrap();
        for st in dec.ensemble.states() {
            let b = pinch.reduce(st).unwrap();
            let p = b.blocks()[0][(0, 0)].re;
            assert!((p - 0.9).abs() < 1e-14 || (p - 0.1).abs() < 1e-14);
        }
    }

    #[test]
    fn constructed_instances_decompose_exactly() {
        let t = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for i in 0..40 {
            let n = 2 + i % 2;
            let (rho, psi) = random::block_example_state(&mut rng, n);
            let d = block_example_analyze(&rho, &psi).unwrap();
            assert!(d.invariant_violations().is_empty(), "{:?}", d.invariant_violations());
            let dec = block_example_decomposition(&d, &rho, &t).unwrap();
            assert!(max_abs_diff(dec.ensemble.convex_sum().matrix(), rho.matrix()) <= 1e-9);
            assert!(dec.ensemble.min_purity() >= 1.0 - 1e-9);
            // ω in the adapted basis has a diagonal Q-block and real nonnegative couplings
            let m = block_example_matrix(&d, &rho);
            for j in 0..n {
                assert!(m[(j, n)].im.abs() < 1e-12 && m[(j, n)].re >= -1e-12);
            }
        }
    }

    #[test]
    fn candidate_upper_bounds_solver_on_small_instances() {
        let t = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let cfg = SolverConfig::default().with_restarts(6);
        for _ in 0..4 {
            let (rho, psi) = random::block_example_state(&mut rng, 2);
            let d = block_example_analyze(&rho, &psi).unwrap();
            let dec = block_example_decomposition(&d, &rho, &t).unwrap();
            let ch = ReductionChannel::block_compression(&psi).unwrap();
            let r = solve_r(&rho, &ch, &cfg).unwrap();
            assert!(dec.candidate >= r.value_r - 1e-4, "{} vs {}", dec.candidate, r.value_r);
        }
    }

    #[test]
    fn negative_weights_are_reported() {
        let t = Tolerances::default();
        // ω = diag(0.3, 0.2) on range(Q) plus coupling only to ψ_1: ψ_2 has λ_2 > 0 and z_2 = 0
        let c = |x: f64| C64::new(x, 0.0);
        let m = CMatrix::from_row_slice(3, 3, &[c(0.3), c(0.0), c(0.2), c(0.0), c(0.2), c(0.0), c(0.2), c(0.0), c(0.5)]);
        let rho = DensityOperator::new(m, &t).unwrap();
        let d = block_example_analyze(&rho, &PureState::basis(3, 2)).unwrap();
        assert!(matches!(
            block_example_decomposition(&d, &rho, &t),
            Err(Error::ConstructionFailure(_))
        ));
    }

    #[test]
    fn degenerate_eigenspaces_are_aligned() {
        let t = Tolerances::default();
        let c = |x: f64| C64::new(x, 0.0);
        // QωQ = 0.25·1 on range(Q); ωψ couples equally to both basis vectors
        let m = CMatrix::from_row_slice(3, 3, &[c(0.25), c(0.0), c(0.1), c(0.0), c(0.25), c(0.1), c(0.1), c(0.1), c(0.5)]);
        let rho = DensityOperator::new(m, &t).unwrap();
        let d = block_example_analyze(&rho, &PureState::basis(3, 2)).unwrap();
        let mut zs = d.overlaps.clone();
        zs.sort_by(f64::total_cmp);
        assert!(zs[0] < 1e-15);
        assert_abs_diff_eq!(zs[1], 0.1 * 2f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn z_above_half_is_a_domain_error() {
        let t = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let psi = random::haar_pure(&mut rng, 3);
        // a pure state spread evenly across ψ and range(Q) has z = 1/2 at most; build data by hand
        let mut d = block_example_analyze(&psi.density(), &psi).unwrap();
        d.z = 0.6;
        d.mu_plus = None;
        d.mu_minus = None;
        assert!(matches!(
            block_example_decomposition(&d, &psi.density(), &t),
            Err(Error::OutOfRange { .. })
        ));
    }
}
