//! Hermitian spectral decomposition, density operators, and the entropy
//! functionals everything else consumes.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::{s, CMatrix, CVector, Error, Result, Tolerances, C64};

/// Eigenvalues in ascending order with matching orthonormal eigenvector columns.
#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Eigh {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> CVector {
        self.vectors.column(k).into_owned()
    }

    /// `V f(Λ) V^†`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for k in 0..n {
            let fk = f(self.values[k]);
            scaled.column_mut(k).scale_mut(fk);
        }
        &scaled * self.vectors.adjoint()
    }
}

/// Largest entry of `|M - M^†|`.
pub fn max_asymmetry(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `(M + M^†) / 2`.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Largest entry of `|a - b|`; `f64::INFINITY` on shape mismatch.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn ensure_square(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

/// Rotates `v` so that its largest-magnitude component (first on ties) is real
/// positive. Returns the index of that component.
pub(crate) fn fix_phase(v: &mut CVector) -> usize {
    let mut idx = 0;
    let mut best = -1.0;
    for (i, c) in v.iter().enumerate() {
        let a = c.norm();
        if a > best * (1.0 + 1e-12) + 1e-15 {
            best = a;
            idx = i;
        }
    }
    if best > 0.0 {
        let phase = v[idx].conj() / best;
        for c in v.iter_mut() {
            *c *= phase;
        }
        v[idx] = C64::new(v[idx].re, 0.0);
    }
    idx
}

/// Spectral decomposition of a Hermitian matrix.
///
/// Eigenvalues come back ascending. Each eigenvector has its largest-magnitude
/// component made real positive; within clusters of numerically equal
/// eigenvalues vectors are ordered by the index of that component, so the
/// output is reproducible.
pub fn eigh(m: &CMatrix, tol_herm: f64) -> Result<Eigh> {
    ensure_square(m)?;
    let asym = max_asymmetry(m);
    if asym > tol_herm {
        return Err(Error::NotHermitian { asymmetry: asym });
    }
    Ok(eigh_unchecked(m))
}

/// [`eigh`] without the Hermiticity check; the input is hermitized first.
pub(crate) fn eigh_unchecked(m: &CMatrix) -> Eigh {
    let n = m.nrows();
    if n == 0 {
        return Eigh {
            values: Vec::new(),
            vectors: CMatrix::zeros(0, 0),
        };
    }
    let dec = SymmetricEigen::new(hermitize(m));
    let mut cols: Vec<(f64, usize, CVector)> = (0..n)
        .map(|k| {
            let mut v: CVector = dec.eigenvectors.column(k).into_owned();
            let lead = fix_phase(&mut v);
            (dec.eigenvalues[k], lead, v)
        })
        .collect();
    cols.sort_by(|a, b| a.0.total_cmp(&b.0));
    // cluster numerically equal eigenvalues and order each cluster by leading index
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (cols[end].0 - cols[start].0).abs() <= 1e-12 * cols[start].0.abs().max(1.0)
        {
            end += 1;
        }
        cols[start..end].sort_by_key(|c| c.1);
        start = end;
    }
    let mut vectors = CMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (k, (val, _, v)) in cols.into_iter().enumerate() {
        values.push(val);
        vectors.set_column(k, &v);
    }
    Eigh { values, vectors }
}

/// Q factor of the thin QR decomposition of `a` (rows ≥ cols), with phases
/// chosen so that `R` has a real positive diagonal. This is the retraction onto
/// matrices with orthonormal columns.
pub fn orthonormal_columns(a: &CMatrix) -> CMatrix {
    let qr = a.clone().qr();
    let r = qr.r();
    let mut q = qr.q();
    for k in 0..q.ncols() {
        let d = r[(k, k)];
        let mag = d.norm();
        if mag > 0.0 {
            let phase = d / mag;
            for x in q.column_mut(k).iter_mut() {
                *x *= phase;
            }
        }
    }
    q
}

/// `Tr s(M)` for a positive semi-definite Hermitian matrix of any trace.
///
/// Eigenvalues in `[-tol_psd, 0]` are clipped; anything lower is an error.
pub fn psd_entropy(m: &CMatrix, tol_psd: f64) -> Result<f64> {
    if m.nrows() == 1 && m.ncols() == 1 {
        let x = m[(0, 0)].re;
        if x < -tol_psd {
            return Err(Error::NotPositive { min_eigenvalue: x });
        }
        return Ok(s(x));
    }
    let e = eigh_unchecked(m);
    spectrum_entropy(&e.values, tol_psd)
}

/// `Σ s(λ_k)` with clipping of slightly negative values.
pub fn spectrum_entropy(values: &[f64], tol_psd: f64) -> Result<f64> {
    let mut total = 0.0;
    for &x in values {
        if x < -tol_psd {
            return Err(Error::NotPositive { min_eigenvalue: x });
        }
        total += s(x);
    }
    Ok(total)
}

/// `Tr A (ln A - ln B)` for PSD matrices. `+∞` when the support of `A` is not
/// inside the support of `B`. Not clamped: with unequal traces it can be negative.
pub fn psd_relative_entropy(a: &CMatrix, b: &CMatrix, tol: &Tolerances) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            expected: b.nrows(),
            found: a.nrows(),
        });
    }
    let eb = eigh_unchecked(b);
    let mut cross = 0.0;
    for k in 0..eb.dim() {
        let u = eb.vectors.column(k);
        let weight = (u.adjoint() * a * u)[(0, 0)].re;
        let mu = eb.values[k];
        if mu <= tol.support {
            if weight > tol.support {
                return Ok(f64::INFINITY);
            }
            continue;
        }
        cross += weight * mu.ln();
    }
    let sa = psd_entropy(a, tol.psd)?;
    Ok(-sa - cross)
}

/// A validated density operator: Hermitian, unit trace, positive semi-definite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "crate::io::MatrixRepr", into = "crate::io::MatrixRepr")]
pub struct DensityOperator {
    matrix: CMatrix,
}

impl DensityOperator {
    pub fn new(matrix: CMatrix, tol: &Tolerances) -> Result<Self> {
        ensure_square(&matrix)?;
        if matrix.nrows() == 0 {
            return Err(Error::OutOfRange {
                what: "dimension",
                value: 0.0,
            });
        }
        let asym = max_asymmetry(&matrix);
        if asym > tol.herm {
            return Err(Error::NotHermitian { asymmetry: asym });
        }
        let matrix = hermitize(&matrix);
        let trace = matrix.trace().re;
        if (trace - 1.0).abs() > tol.trace {
            return Err(Error::InvalidTrace { trace });
        }
        let e = eigh_unchecked(&matrix);
        let min = e.values.first().copied().unwrap_or(0.0);
        if min < -tol.psd {
            return Err(Error::NotPositive {
                min_eigenvalue: min,
            });
        }
        Ok(Self { matrix })
    }

    /// Builds a density operator from a matrix known to be valid up to rounding.
    pub(crate) fn from_trusted(matrix: CMatrix) -> Self {
        Self {
            matrix: hermitize(&matrix),
        }
    }

    pub fn maximally_mixed(n: usize) -> Self {
        Self::from_trusted(CMatrix::identity(n, n).scale(1.0 / n as f64))
    }

    /// Diagonal density operator with the given probability vector.
    pub fn diagonal(probs: &[f64], tol: &Tolerances) -> Result<Self> {
        let n = probs.len();
        let m = CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(probs[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        Self::new(m, tol)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn eigh(&self) -> Eigh {
        eigh_unchecked(&self.matrix)
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Number of eigenvalues above `tol_psd`.
    pub fn rank(&self, tol_psd: f64) -> usize {
        self.eigh().values.iter().filter(|&&x| x > tol_psd).count()
    }

    /// `U ρ U^†`.
    pub fn conjugate_by(&self, u: &CMatrix) -> Self {
        Self::from_trusted(u * &self.matrix * u.adjoint())
    }

    /// Positive square root with eigenvalue clipping.
    pub fn sqrt(&self) -> CMatrix {
        self.eigh().map(|x| x.max(0.0).sqrt())
    }

    /// `t ρ + (1 - t) σ`.
    pub fn mix(&self, other: &Self, t: f64) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(Self::from_trusted(
            self.matrix.scale(t) + other.matrix.scale(1.0 - t),
        ))
    }
}

/// A unit vector; stands for the pure state `|v⟩⟨v|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "crate::io::VectorRepr", into = "crate::io::VectorRepr")]
pub struct PureState {
    vector: CVector,
}

impl PureState {
    pub fn new(vector: CVector, tol: &Tolerances) -> Result<Self> {
        let norm = vector.norm();
        if vector.is_empty() || (norm - 1.0).abs() > tol.norm {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self {
            vector: vector.unscale(norm),
        })
    }

    /// Normalizes `vector`; fails only for the zero vector.
    pub fn normalized(vector: CVector) -> Result<Self> {
        let norm = vector.norm();
        if !(norm > 0.0) {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self {
            vector: vector.unscale(norm),
        })
    }

    /// Standard basis vector `e_k` in dimension `n`.
    pub fn basis(n: usize, k: usize) -> Self {
        let mut v = CVector::zeros(n);
        v[k] = C64::new(1.0, 0.0);
        Self { vector: v }
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    pub fn vector(&self) -> &CVector {
        &self.vector
    }

    pub fn density(&self) -> DensityOperator {
        DensityOperator::from_trusted(&self.vector * self.vector.adjoint())
    }
}

/// Gibbs–von Neumann entropy `Σ s(λ_k)` in nats.
pub fn von_neumann_entropy(rho: &DensityOperator, tol: &Tolerances) -> Result<f64> {
    spectrum_entropy(&rho.eigh().values, tol.psd)
}

/// Relative entropy `Tr ρ (ln ρ - ln σ)`; `+∞` when `supp ρ ⊄ supp σ`.
pub fn relative_entropy(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    tol: &Tolerances,
) -> Result<f64> {
    Ok(psd_relative_entropy(rho.matrix(), sigma.matrix(), tol)?.max(0.0))
}

/// `s(q) + s(1 - q)`.
pub fn binary_entropy(q: f64, tol: f64) -> Result<f64> {
    if !(q >= -tol && q <= 1.0 + tol) {
        return Err(Error::OutOfRange {
            what: "probability",
            value: q,
        });
    }
    let q = q.clamp(0.0, 1.0);
    Ok(s(q) + s(1.0 - q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn real(rows: &[&[f64]]) -> CMatrix {
        let n = rows.len();
        CMatrix::from_fn(n, rows[0].len(), |i, j| c(rows[i][j], 0.0))
    }

    #[test]
    fn eigh_identity() {
        let e = eigh(&CMatrix::identity(2, 2), 1e-9).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0]);
        let gram = e.vectors.adjoint() * &e.vectors;
        assert!(max_abs_diff(&gram, &CMatrix::identity(2, 2)) < 1e-12);
    }

    #[test]
    fn eigh_diagonal_keeps_standard_basis() {
        let e = eigh(&real(&[&[0.9, 0.0], &[0.0, 0.1]]), 1e-9).unwrap();
        assert_abs_diff_eq!(e.values[0], 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(e.values[1], 0.9, epsilon = 1e-15);
        assert!((e.vectors[(1, 0)].norm() - 1.0).abs() < 1e-12);
        assert!((e.vectors[(0, 1)].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigh_pauli_x() {
        // characteristic polynomial λ² - 1
        let e = eigh(&real(&[&[0.0, 1.0], &[1.0, 0.0]]), 1e-9).unwrap();
        assert_abs_diff_eq!(e.values[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn eigh_rejects_non_hermitian() {
        let m = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.5, 0.0), c(0.0, 0.0)]);
        match eigh(&m, 1e-9) {
            Err(Error::NotHermitian { asymmetry }) => assert_abs_diff_eq!(asymmetry, 0.5),
            other => panic!("expected NotHermitian, got {other:?}"),
        }
    }

    #[test]
    fn eigh_reconstructs_random_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..7 {
            let g = random::ginibre_matrix(&mut rng, n, n);
            let h = hermitize(&g);
            let e = eigh(&h, 1e-9).unwrap();
            let recon = e.map(|x| x);
            assert!(max_abs_diff(&recon, &h) <= 1e-10 * n as f64);
            let gram = e.vectors.adjoint() * &e.vectors;
            assert!(max_abs_diff(&gram, &CMatrix::identity(n, n)) <= 1e-10);
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn entropy_examples() {
        let tol = Tolerances::default();
        let mixed = DensityOperator::maximally_mixed(2);
        assert_abs_diff_eq!(
            von_neumann_entropy(&mixed, &tol).unwrap(),
            std::f64::consts::LN_2,
            epsilon = 1e-14
        );
        let d = DensityOperator::diagonal(&[0.9, 0.1], &tol).unwrap();
        // s(0.9) + s(0.1) = 0.0948245... + 0.2302585...
        assert_abs_diff_eq!(von_neumann_entropy(&d, &tol).unwrap(), 0.3250829733914482, epsilon = 1e-13);
        let pure = PureState::normalized(CVector::from_vec(vec![c(1.0, 0.5), c(-0.3, 2.0)])).unwrap();
        assert!(von_neumann_entropy(&pure.density(), &tol).unwrap().abs() < 1e-12);
    }

    #[test]
    fn relative_entropy_examples() {
        let tol = Tolerances::default();
        let zero = PureState::basis(2, 0).density();
        let one = PureState::basis(2, 1).density();
        let mixed = DensityOperator::maximally_mixed(2);
        assert_eq!(relative_entropy(&mixed, &mixed, &tol).unwrap(), 0.0);
        assert_abs_diff_eq!(
            relative_entropy(&zero, &mixed, &tol).unwrap(),
            std::f64::consts::LN_2,
            epsilon = 1e-14
        );
        assert_eq!(relative_entropy(&zero, &one, &tol).unwrap(), f64::INFINITY);
        assert!(matches!(
            relative_entropy(&zero, &DensityOperator::maximally_mixed(3), &tol),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn binary_entropy_examples() {
        assert_eq!(binary_entropy(1.0, 1e-9).unwrap(), 0.0);
        assert_abs_diff_eq!(binary_entropy(0.5, 1e-9).unwrap(), std::f64::consts::LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(binary_entropy(0.9, 1e-9).unwrap(), 0.3250829733914482, epsilon = 1e-14);
        assert_abs_diff_eq!(binary_entropy(0.9, 1e-9).unwrap(), binary_entropy(0.1, 1e-9).unwrap(), epsilon = 1e-15);
        assert!(matches!(binary_entropy(1.1, 1e-9), Err(Error::OutOfRange { .. })));
        assert!(matches!(binary_entropy(-0.01, 1e-9), Err(Error::OutOfRange { .. })));
        assert_eq!(binary_entropy(1.0 + 1e-12, 1e-9).unwrap(), 0.0);
    }

    #[test]
    fn density_validation_errors() {
        let tol = Tolerances::default();
        assert!(matches!(
            DensityOperator::new(real(&[&[0.5, 0.0], &[0.0, 0.4]]), &tol),
            Err(Error::InvalidTrace { .. })
        ));
        assert!(matches!(
            DensityOperator::new(real(&[&[1.5, 0.0], &[0.0, -0.5]]), &tol),
            Err(Error::NotPositive { .. })
        ));
        assert!(matches!(
            DensityOperator::new(real(&[&[0.5, 0.1], &[0.0, 0.5]]), &tol),
            Err(Error::NotHermitian { .. })
        ));
        assert!(matches!(
            DensityOperator::new(CMatrix::zeros(2, 3), &tol),
            Err(Error::NotSquare { rows: 2, cols: 3 })
        ));
        // tiny negative eigenvalue is tolerated and clipped in entropies
        let d = DensityOperator::new(real(&[&[1.0 + 1e-11, 0.0], &[0.0, -1e-11]]), &tol).unwrap();
        assert!(von_neumann_entropy(&d, &tol).unwrap().abs() < 1e-9);
    }

    #[test]
    fn pure_state_validation() {
        let tol = Tolerances::default();
        assert!(PureState::new(CVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]), &tol).is_err());
        let p = PureState::new(CVector::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8)]), &tol).unwrap();
        assert_abs_diff_eq!(p.density().purity(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn entropy_bounds_on_random_states() {
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for i in 0..1000 {
            let n = 1 + i % 6;
            let rho = random::ginibre_state(&mut rng, n, None);
            let h = von_neumann_entropy(&rho, &tol).unwrap();
            assert!(h >= -1e-12 && h <= (n as f64).ln() + 1e-12, "{h} for n = {n}");
        }
    }

    #[test]
    fn joint_identity_on_full_rank_pairs() {
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for i in 0..200 {
            let n = 2 + i % 4;
            let rho = random::ginibre_state(&mut rng, n, None);
            let sigma = random::ginibre_state(&mut rng, n, None);
            let rel = relative_entropy(&rho, &sigma, &tol).unwrap();
            let ln_sigma = sigma.eigh().map(f64::ln);
            let cross = (rho.matrix() * ln_sigma).trace().re;
            let expected = -von_neumann_entropy(&rho, &tol).unwrap() - cross;
            assert!((rel - expected).abs() <= 1e-10, "{rel} vs {expected}");
        }
    }
}
