//! Seeded random states, isometries, and channels for restarts, sampling, and tests.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::channel::{KrausOperator, ReductionChannel};
use crate::ensemble::Ensemble;
use crate::state::{orthonormal_columns, DensityOperator, PureState};
use crate::{CMatrix, CVector, C64};

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Matrix of i.i.d. standard complex Gaussian entries.
pub fn ginibre_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    let mut m = CMatrix::zeros(rows, cols);
    // fill row-major so the stream is independent of nalgebra's storage order
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = complex_gaussian(rng);
        }
    }
    m
}

/// Ginibre density operator `G G^† / Tr(G G^†)` with `G` of shape `n × rank`
/// (`rank = n` when `None`).
pub fn ginibre_state<R: Rng + ?Sized>(rng: &mut R, n: usize, rank: Option<usize>) -> DensityOperator {
    let g = ginibre_matrix(rng, n, rank.unwrap_or(n));
    let w = &g * g.adjoint();
    let tr = w.trace().re;
    DensityOperator::from_trusted(w.unscale(tr))
}

/// Haar-distributed unit vector.
pub fn haar_pure<R: Rng + ?Sized>(rng: &mut R, n: usize) -> PureState {
    loop {
        let v = CVector::from_iterator(n, (0..n).map(|_| complex_gaussian(rng)));
        if let Ok(p) = PureState::normalized(v) {
            return p;
        }
    }
}

/// Haar-distributed `rows × cols` isometry (orthonormal columns).
pub fn haar_isometry<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    orthonormal_columns(&ginibre_matrix(rng, rows, cols))
}

pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    haar_isometry(rng, n, n)
}

/// Uniform point of the probability simplex.
pub fn simplex_point<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let xs: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = xs.iter().sum();
    xs.into_iter().map(|x| x / total).collect()
}

/// `len` Ginibre states of random rank with uniform simplex weights.
pub fn random_ensemble<R: Rng + ?Sized>(rng: &mut R, n: usize, len: usize) -> Ensemble {
    let weights = simplex_point(rng, len);
    let states = (0..len)
        .map(|_| {
            let rank = rng.random_range(1..=n);
            ginibre_state(rng, n, Some(rank))
        })
        .collect();
    Ensemble::from_parts(weights, states)
}

/// Random composition of `n` into positive parts.
pub fn random_partition<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut parts = Vec::new();
    let mut left = n;
    while left > 0 {
        let d = rng.random_range(1..=left);
        parts.push(d);
        left -= d;
    }
    parts
}

/// Orthogonal projections onto consecutive column groups of `basis`.
pub fn projections_from_partition(basis: &CMatrix, parts: &[usize]) -> Vec<CMatrix> {
    let mut out = Vec::with_capacity(parts.len());
    let mut off = 0;
    for &d in parts {
        let cols = basis.columns(off, d);
        out.push(&cols * cols.adjoint());
        off += d;
    }
    out
}

/// Projections of a random partition of a Haar-random basis.
pub fn random_projections<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<CMatrix> {
    let u = haar_unitary(rng, n);
    let parts = random_partition(rng, n);
    projections_from_partition(&u, &parts)
}

/// Pinching onto a random block partition of a Haar-random basis.
pub fn random_pinching<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ReductionChannel {
    ReductionChannel::pinching(&random_projections(rng, n)).expect("partition projections are valid")
}

/// Commutative subalgebra from a random partition of a Haar-random basis.
pub fn random_commutative<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ReductionChannel {
    ReductionChannel::commutative(&random_projections(rng, n)).expect("partition projections are valid")
}

/// Random unital channel: a Haar isometry from `C^n` into `⊕_b (C^{d_b})^{⊕ k_b}`
/// cut into Kraus operators.
pub fn random_kraus_channel<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ReductionChannel {
    let blocks = rng.random_range(1..=3usize);
    let block_dims: Vec<usize> = (0..blocks).map(|_| rng.random_range(1..=n.min(3))).collect();
    let mut layout = Vec::new();
    for (b, &d) in block_dims.iter().enumerate() {
        for _ in 0..rng.random_range(1..=2usize) {
            layout.push((b, d));
        }
    }
    let mut rows: usize = layout.iter().map(|&(_, d)| d).sum();
    while rows < n {
        layout.push((0, block_dims[0]));
        rows += block_dims[0];
    }
    let v = haar_isometry(rng, rows, n);
    let mut kraus = Vec::with_capacity(layout.len());
    let mut off = 0;
    for (block, d) in layout {
        kraus.push(KrausOperator {
            block,
            matrix: v.rows(off, d).into_owned(),
        });
        off += d;
    }
    ReductionChannel::new(n, block_dims, kraus).expect("isometry slices are complete")
}

/// A channel drawn from all supported families: diagonal pinching, block
/// pinching, commutative subalgebra, block compression, or an explicit Kraus list.
pub fn random_channel<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ReductionChannel {
    match rng.random_range(0..5u8) {
        0 if n >= 2 => ReductionChannel::diagonal_pinching(n).expect("n >= 2"),
        1 => random_pinching(rng, n),
        2 => random_commutative(rng, n),
        3 if n >= 2 => {
            let psi = haar_pure(rng, n);
            ReductionChannel::block_compression(&psi).expect("unit vector")
        }
        _ => random_kraus_channel(rng, n),
    }
}

/// State of `M_{n+1}` assembled from the block-example pure states
/// `ϱ^±_k` with nonnegative weights, so that the explicit decomposition of
/// the block example applies. Returns the state and the distinguished vector `ψ`.
///
/// `z` is drawn uniformly from `(0, 1/2]`.
pub fn block_example_state<R: Rng + ?Sized>(rng: &mut R, n: usize) -> (DensityOperator, PureState) {
    let u = haar_unitary(rng, n + 1);
    let psi = u.column(n).into_owned();
    let z: f64 = 0.5 * (1.0 - rng.random::<f64>());
    let root = (1.0 - 4.0 * z * z).max(0.0).sqrt();
    let (mu_plus, mu_minus) = ((1.0 + root) / 2.0, (1.0 - root) / 2.0);
    let shares = simplex_point(rng, n);
    let mut w = CMatrix::zeros(n + 1, n + 1);
    for (k, &share) in shares.iter().enumerate() {
        let t: f64 = rng.random();
        let psi_k = u.column(k);
        for (weight, a, b) in [(t * share, mu_plus, mu_minus), ((1.0 - t) * share, mu_minus, mu_plus)] {
            let v = psi_k.scale(a.sqrt()) + psi.scale(b.sqrt());
            w += (&v * v.adjoint()).scale(weight);
        }
    }
    let state = DensityOperator::from_trusted(w.unscale(w.trace().re));
    (state, PureState::normalized(psi).expect("unit column"))
}
