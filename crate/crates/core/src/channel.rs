//! Reduction channels onto direct sums of full matrix blocks.
//!
//! A channel is stored through its predual action on density operators:
//! block `b` of `ω∘α` is `Σ_{i: block(i) = b} K_i ω K_i^†`. Unitality of `α`
//! is the completeness relation `Σ K_i^† K_i = 1`.

use serde::{Deserialize, Serialize};

use crate::state::{self, DensityOperator, PureState};
use crate::{CMatrix, CVector, Error, Result, Tolerances, C64};

/// Completeness and projection checks use this tolerance.
pub const STRUCTURE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KrausOperator {
    pub block: usize,
    #[serde(with = "crate::io::matrix")]
    pub matrix: CMatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChannelSpec", into = "ExplicitChannel")]
pub struct ReductionChannel {
    input_dim: usize,
    block_dims: Vec<usize>,
    kraus: Vec<KrausOperator>,
}

/// The explicit JSON form of a channel.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitChannel {
    pub input_dim: usize,
    pub block_dims: Vec<usize>,
    pub kraus: Vec<KrausOperator>,
}

/// Channel JSON: either the explicit Kraus form or a shorthand constructor
/// tagged by `"type"`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum ChannelSpec {
    Shorthand(ChannelShorthand),
    Explicit(ExplicitChannel),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelShorthand {
    Diagonal {
        n: usize,
    },
    BlockCompression {
        psi: PureState,
    },
    Commutative {
        #[serde(with = "crate::io::matrix_list")]
        projections: Vec<CMatrix>,
    },
    Pinching {
        #[serde(with = "crate::io::matrix_list")]
        projections: Vec<CMatrix>,
    },
    Identity {
        n: usize,
    },
    Trivial {
        n: usize,
    },
}

impl TryFrom<ChannelSpec> for ReductionChannel {
    type Error = Error;

    fn try_from(spec: ChannelSpec) -> Result<Self> {
        match spec {
            ChannelSpec::Explicit(e) => ReductionChannel::new(e.input_dim, e.block_dims, e.kraus),
            ChannelSpec::Shorthand(s) => s.build(),
        }
    }
}

impl ChannelShorthand {
    pub fn build(self) -> Result<ReductionChannel> {
        match self {
            ChannelShorthand::Diagonal { n } => ReductionChannel::diagonal_pinching(n),
            ChannelShorthand::BlockCompression { psi } => ReductionChannel::block_compression(&psi),
            ChannelShorthand::Commutative { projections } => {
                ReductionChannel::commutative(&projections)
            }
            ChannelShorthand::Pinching { projections } => ReductionChannel::pinching(&projections),
            ChannelShorthand::Identity { n } => Ok(ReductionChannel::identity(n)),
            ChannelShorthand::Trivial { n } => Ok(ReductionChannel::trivial(n)),
        }
    }
}

impl From<ReductionChannel> for ExplicitChannel {
    fn from(c: ReductionChannel) -> Self {
        ExplicitChannel {
            input_dim: c.input_dim,
            block_dims: c.block_dims,
            kraus: c.kraus,
        }
    }
}

/// Reduced density operator `ω∘α`: one positive block per summand of the output algebra.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockDensity {
    #[serde(with = "crate::io::matrix_list")]
    blocks: Vec<CMatrix>,
}

impl BlockDensity {
    /// Validates Hermiticity and positivity of every block and the total trace.
    pub fn new(blocks: Vec<CMatrix>, tol: &Tolerances) -> Result<Self> {
        let mut total = 0.0;
        for b in &blocks {
            if b.nrows() != b.ncols() {
                return Err(Error::NotSquare {
                    rows: b.nrows(),
                    cols: b.ncols(),
                });
            }
            let e = state::eigh(b, tol.herm)?;
            if let Some(&min) = e.values.first() {
                if min < -tol.psd {
                    return Err(Error::NotPositive {
                        min_eigenvalue: min,
                    });
                }
            }
            total += b.trace().re;
        }
        if (total - 1.0).abs() > tol.trace {
            return Err(Error::InvalidTrace { trace: total });
        }
        Ok(Self {
            blocks: blocks.iter().map(state::hermitize).collect(),
        })
    }

    pub fn blocks(&self) -> &[CMatrix] {
        &self.blocks
    }

    pub fn block_dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.nrows()).collect()
    }

    pub fn trace(&self) -> f64 {
        self.blocks.iter().map(|b| b.trace().re).sum()
    }

    /// The block-diagonal matrix `⊕_b block_b`.
    pub fn to_matrix(&self) -> CMatrix {
        let n: usize = self.blocks.iter().map(|b| b.nrows()).sum();
        let mut m = CMatrix::zeros(n, n);
        let mut off = 0;
        for b in &self.blocks {
            let d = b.nrows();
            m.view_mut((off, off), (d, d)).copy_from(b);
            off += d;
        }
        m
    }
}

/// `Σ_b Tr s(block_b)`.
pub fn block_entropy(b: &BlockDensity, tol: &Tolerances) -> Result<f64> {
    b.blocks.iter().map(|m| state::psd_entropy(m, tol.psd)).sum()
}

/// Relative entropy of two reduced states on the same output algebra.
pub fn block_relative_entropy(a: &BlockDensity, b: &BlockDensity, tol: &Tolerances) -> Result<f64> {
    if a.block_dims() != b.block_dims() {
        return Err(Error::InvalidChannel(format!(
            "block structures differ: {:?} vs {:?}",
            a.block_dims(),
            b.block_dims()
        )));
    }
    let mut total = 0.0;
    for (x, y) in a.blocks.iter().zip(&b.blocks) {
        total += state::psd_relative_entropy(x, y, tol)?;
    }
    Ok(total.max(0.0))
}

impl ReductionChannel {
    /// Validates shapes and the completeness relation `Σ K^†K = 1` within [`STRUCTURE_TOL`].
    pub fn new(input_dim: usize, block_dims: Vec<usize>, kraus: Vec<KrausOperator>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidChannel("input dimension must be positive".into()));
        }
        if block_dims.is_empty() || block_dims.contains(&0) {
            return Err(Error::InvalidChannel(format!(
                "block dimensions must be a non-empty list of positive integers, got {block_dims:?}"
            )));
        }
        let mut completeness = CMatrix::zeros(input_dim, input_dim);
        for (i, k) in kraus.iter().enumerate() {
            let Some(&d) = block_dims.get(k.block) else {
                return Err(Error::InvalidChannel(format!(
                    "Kraus operator {i} refers to block {} but there are {} blocks",
                    k.block,
                    block_dims.len()
                )));
            };
            if k.matrix.shape() != (d, input_dim) {
                return Err(Error::InvalidChannel(format!(
                    "Kraus operator {i} has shape {:?}, expected ({d}, {input_dim})",
                    k.matrix.shape()
                )));
            }
            completeness += k.matrix.adjoint() * &k.matrix;
        }
        let dev = state::max_abs_diff(&completeness, &CMatrix::identity(input_dim, input_dim));
        if dev > STRUCTURE_TOL {
            return Err(Error::InvalidChannel(format!(
                "Kraus operators are not complete: max |Σ K^†K - 1| = {dev:.3e}"
            )));
        }
        Ok(Self {
            input_dim,
            block_dims,
            kraus,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    pub fn kraus(&self) -> &[KrausOperator] {
        &self.kraus
    }

    /// The identity channel onto `M_n`.
    pub fn identity(n: usize) -> Self {
        Self {
            input_dim: n,
            block_dims: vec![n],
            kraus: vec![KrausOperator {
                block: 0,
                matrix: CMatrix::identity(n, n),
            }],
        }
    }

    /// The channel onto `M_1`: every state reduces to the number 1.
    pub fn trivial(n: usize) -> Self {
        Self {
            input_dim: n,
            block_dims: vec![1],
            kraus: (0..n).map(|k| KrausOperator { block: 0, matrix: basis_row(n, k) }).collect(),
        }
    }

    /// Restriction to the diagonal subalgebra of `M_n`.
    pub fn diagonal_pinching(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidChannel(format!(
                "diagonal pinching needs n >= 2, got {n}"
            )));
        }
        Ok(Self {
            input_dim: n,
            block_dims: vec![1; n],
            kraus: (0..n).map(|k| KrausOperator { block: k, matrix: basis_row(n, k) }).collect(),
        })
    }

    /// The `M_n ⊕ M_1` reduction of `M_{n+1}` defined by `P = |ψ⟩⟨ψ|`, `Q = 1 - P`.
    ///
    /// Block 0 is `QωQ` written in an orthonormal basis of `range(Q)`, block 1
    /// is `⟨ψ, ωψ⟩`.
    pub fn block_compression(psi: &PureState) -> Result<Self> {
        let n1 = psi.dim();
        if n1 < 2 {
            return Err(Error::InvalidChannel("block compression needs dimension >= 2".into()));
        }
        let norm = psi.vector().norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::NotNormalized { norm });
        }
        let co_iso = complement_coisometry(psi.vector());
        Self::new(
            n1,
            vec![n1 - 1, 1],
            vec![
                KrausOperator { block: 0, matrix: co_iso },
                KrausOperator { block: 1, matrix: row_matrix(psi.vector()) },
            ],
        )
    }

    /// The commutative subalgebra spanned by orthogonal projections `Q_j`
    /// summing to the identity; block `j` of the reduction is `Tr(Q_j ω)`.
    pub fn commutative(projections: &[CMatrix]) -> Result<Self> {
        let n = check_projections(projections)?;
        let mut kraus = Vec::new();
        for (j, q) in projections.iter().enumerate() {
            for row in range_basis(q).into_iter() {
                kraus.push(KrausOperator { block: j, matrix: row });
            }
        }
        Self::new(n, vec![1; projections.len()], kraus)
    }

    /// Block-diagonal compression `ω ↦ ⊕_j Q_j ω Q_j`, each block written in an
    /// orthonormal basis of `range(Q_j)`.
    pub fn pinching(projections: &[CMatrix]) -> Result<Self> {
        let n = check_projections(projections)?;
        let mut kraus = Vec::new();
        let mut dims = Vec::new();
        for (j, q) in projections.iter().enumerate() {
            let rows = range_basis(q);
            let d = rows.len();
            if d == 0 {
                return Err(Error::InvalidChannel(format!("projection {j} is zero")));
            }
            let mut m = CMatrix::zeros(d, n);
            for (r, row) in rows.iter().enumerate() {
                m.set_row(r, &row.row(0));
            }
            dims.push(d);
            kraus.push(KrausOperator { block: j, matrix: m });
        }
        Self::new(n, dims, kraus)
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: n,
            });
        }
        Ok(())
    }

    /// `ω ↦ ω∘α`.
    pub fn reduce(&self, rho: &DensityOperator) -> Result<BlockDensity> {
        self.check_dim(rho.dim())?;
        let mut blocks: Vec<CMatrix> = self.block_dims.iter().map(|&d| CMatrix::zeros(d, d)).collect();
        for k in &self.kraus {
            blocks[k.block] += &k.matrix * rho.matrix() * k.matrix.adjoint();
        }
        Ok(BlockDensity {
            blocks: blocks.iter().map(state::hermitize).collect(),
        })
    }

    /// Unnormalized reduction of the rank-one operator `|φ⟩⟨φ|`.
    pub fn reduce_vector(&self, phi: &CVector) -> Result<Vec<CMatrix>> {
        self.check_dim(phi.len())?;
        let mut blocks: Vec<CMatrix> = self.block_dims.iter().map(|&d| CMatrix::zeros(d, d)).collect();
        for k in &self.kraus {
            let y = &k.matrix * phi;
            blocks[k.block] += &y * y.adjoint();
        }
        Ok(blocks)
    }

    /// Central projections `P_b = Σ_{i ∈ b} K_i^† K_i` of the output algebra, pulled back to the input.
    pub fn block_projections(&self) -> Vec<CMatrix> {
        let n = self.input_dim;
        let mut ps: Vec<CMatrix> = self.block_dims.iter().map(|_| CMatrix::zeros(n, n)).collect();
        for k in &self.kraus {
            ps[k.block] += k.matrix.adjoint() * &k.matrix;
        }
        ps
    }
}

/// `v^†` as a `1 × n` matrix.
fn row_matrix(v: &CVector) -> CMatrix {
    CMatrix::from_iterator(1, v.len(), v.iter().map(|x| x.conj()))
}

fn basis_row(n: usize, k: usize) -> CMatrix {
    let mut r = CMatrix::zeros(1, n);
    r[(0, k)] = C64::new(1.0, 0.0);
    r
}

/// Rows `u^†` for an orthonormal basis `{u}` of the range of a projection,
/// taken from its eigenvectors with eigenvalue near 1.
fn range_basis(q: &CMatrix) -> Vec<CMatrix> {
    let e = state::eigh_unchecked(q);
    (0..e.dim())
        .filter(|&k| e.values[k] > 0.5)
        .map(|k| row_matrix(&e.vector(k)))
        .collect()
}

/// `n × (n+1)` co-isometry whose rows span `range(1 - |ψ⟩⟨ψ|)`.
pub(crate) fn complement_coisometry(psi: &CVector) -> CMatrix {
    let n1 = psi.len();
    let q = CMatrix::identity(n1, n1) - psi * psi.adjoint();
    let rows = range_basis(&q);
    let mut m = CMatrix::zeros(rows.len(), n1);
    for (r, row) in rows.iter().enumerate() {
        m.set_row(r, &row.row(0));
    }
    m
}

/// Checks `Q_i Q_j = δ_ij Q_i` and `Σ Q_j = 1`; returns the common dimension.
pub fn check_projections(projections: &[CMatrix]) -> Result<usize> {
    let Some(first) = projections.first() else {
        return Err(Error::InvalidChannel("no projections given".into()));
    };
    let n = first.nrows();
    for q in projections {
        if q.nrows() != q.ncols() {
            return Err(Error::NotSquare {
                rows: q.nrows(),
                cols: q.ncols(),
            });
        }
        if q.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: q.nrows(),
            });
        }
    }
    for (i, qi) in projections.iter().enumerate() {
        let asym = state::max_asymmetry(qi);
        if asym > STRUCTURE_TOL {
            return Err(Error::ProjectionProduct { i, j: i, deviation: asym });
        }
        for (j, qj) in projections.iter().enumerate().skip(i) {
            let prod = qi * qj;
            let target = if i == j { qi.clone() } else { CMatrix::zeros(n, n) };
            let deviation = state::max_abs_diff(&prod, &target);
            if deviation > STRUCTURE_TOL {
                return Err(Error::ProjectionProduct { i, j, deviation });
            }
        }
    }
    let sum = projections.iter().fold(CMatrix::zeros(n, n), |acc, q| acc + q);
    let deviation = state::max_abs_diff(&sum, &CMatrix::identity(n, n));
    if deviation > STRUCTURE_TOL {
        return Err(Error::ProjectionSum { deviation });
    }
    Ok(n)
}

/// Diagonal projection onto the coordinates in `indices`.
pub fn coordinate_projection(n: usize, indices: &[usize]) -> CMatrix {
    let mut q = CMatrix::zeros(n, n);
    for &i in indices {
        q[(i, i)] = C64::new(1.0, 0.0);
    }
    q
}
