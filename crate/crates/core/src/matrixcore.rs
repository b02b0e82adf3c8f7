//! Dense real matrix kernels used by every other module.
//!
//! Everything here is a pure function on `nalgebra` dense matrices. Rank
//! decisions use singular-value thresholding relative to the largest
//! singular value; symmetric inputs are validated and symmetrized eagerly.

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

/// Dense real matrix.
pub type Mat = DMatrix<f64>;

/// Default relative rank tolerance for kernel and rank computations.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;
/// Default relative symmetry-defect tolerance.
pub const DEFAULT_SYMMETRY_TOL: f64 = 1e-10;
/// Default condition-number limit for [`sym_inverse`].
pub const DEFAULT_COND_LIMIT: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric (defect {defect:.3e} exceeds tolerance {tolerance:.3e})")]
    NotSymmetric { defect: f64, tolerance: f64 },
    #[error("matrix is ill-conditioned (estimated condition number {cond:.3e} exceeds {limit:.3e})")]
    IllConditioned { cond: f64, limit: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("inconsistent block layout: {0}")]
    InconsistentBlocks(String),
}

/// Symmetric matrix. The stored value is always exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMat(Mat);

impl SymMat {
    /// Validate symmetry at the default tolerance and symmetrize.
    pub fn new(m: Mat) -> Result<Self, MatrixError> {
        Self::with_tolerance(m, DEFAULT_SYMMETRY_TOL)
    }

    pub fn with_tolerance(m: Mat, tol: f64) -> Result<Self, MatrixError> {
        if !m.is_square() {
            return Err(MatrixError::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        let defect = (&m - m.transpose()).amax();
        let tolerance = tol * (1.0 + m.amax());
        if defect > tolerance {
            return Err(MatrixError::NotSymmetric { defect, tolerance });
        }
        Ok(Self::symmetrized(m))
    }

    /// Return `(M + Mᵀ)/2` without validating the defect.
    pub fn symmetrized(m: Mat) -> Self {
        assert!(m.is_square(), "symmetrized() requires a square matrix");
        let t = m.transpose();
        SymMat((m + t) * 0.5)
    }

    pub fn identity(dim: usize) -> Self {
        SymMat(Mat::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        SymMat(Mat::zeros(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymMat(Mat::from_diagonal(&nalgebra::DVector::from_row_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_mat(&self) -> &Mat {
        &self.0
    }

    pub fn into_mat(self) -> Mat {
        self.0
    }

    pub fn scale(&self, c: f64) -> SymMat {
        SymMat(&self.0 * c)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.dim() == 0 {
            return Vec::new();
        }
        let mut ev: Vec<f64> = SymmetricEigen::new(self.0.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(f64::INFINITY)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues().last().copied().unwrap_or(f64::NEG_INFINITY)
    }

    /// Spectral norm `max |λ|`.
    pub fn norm2(&self) -> f64 {
        self.eigenvalues().iter().fold(0.0, |acc, l| acc.max(l.abs()))
    }
}

impl std::ops::Neg for &SymMat {
    type Output = SymMat;
    fn neg(self) -> SymMat {
        SymMat(-&self.0)
    }
}

impl std::ops::Add for &SymMat {
    type Output = SymMat;
    fn add(self, rhs: &SymMat) -> SymMat {
        SymMat(&self.0 + &rhs.0)
    }
}

impl std::ops::Sub for &SymMat {
    type Output = SymMat;
    fn sub(self, rhs: &SymMat) -> SymMat {
        SymMat(&self.0 - &rhs.0)
    }
}

/// Sign classification of a symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Definiteness {
    PositiveDefinite,
    PositiveSemidefinite,
    NegativeDefinite,
    NegativeSemidefinite,
    Indefinite,
}

/// Largest singular value (0 for empty matrices).
pub fn spectral_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().fold(0.0, |acc: f64, s| acc.max(*s))
}

/// Singular values of `m`, descending.
fn sorted_singular_values(m: &Mat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Numerical rank with threshold `rank_tol * σ_max`.
pub fn numerical_rank(m: &Mat, rank_tol: f64) -> usize {
    let sv = sorted_singular_values(m);
    let Some(&smax) = sv.first() else {
        return 0;
    };
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rank_tol * smax).count()
}

/// Orthonormal basis of `ker M`, one basis vector per column.
///
/// The result has `cols(M) - rank(M)` columns; zero columns when `M` has
/// full column rank.
pub fn kernel_basis(m: &Mat, rank_tol: f64) -> Mat {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return Mat::zeros(0, 0);
    }
    if rows == 0 {
        return Mat::identity(cols, cols);
    }
    let smax = spectral_norm(m);
    if smax == 0.0 {
        return Mat::identity(cols, cols);
    }
    // Pad with zero rows so the thin SVD returns a full right basis.
    let padded = if rows < cols {
        let mut p = Mat::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let null_rows: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= rank_tol * smax)
        .map(|(k, _)| k)
        .collect();
    let mut k = Mat::zeros(cols, null_rows.len());
    for (c, &r) in null_rows.iter().enumerate() {
        k.set_column(c, &v_t.row(r).transpose());
    }
    k
}

/// Orthonormal basis of the left null space of `M`: `kernel_basis(Mᵀ)`.
pub fn left_annihilator(m: &Mat, rank_tol: f64) -> Mat {
    kernel_basis(&m.transpose(), rank_tol)
}

/// Inverse of a symmetric matrix through its eigendecomposition.
pub fn sym_inverse(s: &SymMat, cond_limit: f64) -> Result<SymMat, MatrixError> {
    let n = s.dim();
    if n == 0 {
        return Ok(SymMat::zeros(0));
    }
    let eig = SymmetricEigen::new(s.as_mat().clone());
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), l| {
            (lo.min(l.abs()), hi.max(l.abs()))
        });
    let cond = if lo == 0.0 { f64::INFINITY } else { hi / lo };
    if !(cond <= cond_limit) {
        return Err(MatrixError::IllConditioned {
            cond,
            limit: cond_limit,
        });
    }
    let inv_diag = eig.eigenvalues.map(|l| 1.0 / l);
    let q = &eig.eigenvectors;
    let inv = q * Mat::from_diagonal(&inv_diag) * q.transpose();
    Ok(SymMat::symmetrized(inv))
}

/// Classify by eigenvalue signs with threshold `tol * max(1, ‖S‖₂)`.
pub fn definiteness(s: &SymMat, tol: f64) -> Definiteness {
    let ev = s.eigenvalues();
    let (Some(&lmin), Some(&lmax)) = (ev.first(), ev.last()) else {
        return Definiteness::PositiveDefinite;
    };
    let norm = lmin.abs().max(lmax.abs());
    let thr = tol * norm.max(1.0);
    if lmin > thr {
        Definiteness::PositiveDefinite
    } else if lmax < -thr {
        Definiteness::NegativeDefinite
    } else if lmin >= -thr {
        Definiteness::PositiveSemidefinite
    } else if lmax <= thr {
        Definiteness::NegativeSemidefinite
    } else {
        Definiteness::Indefinite
    }
}

/// `TᵀST`, exactly symmetrized.
pub fn congruence(t: &Mat, s: &SymMat) -> Result<SymMat, MatrixError> {
    if t.nrows() != s.dim() {
        return Err(MatrixError::DimensionMismatch(format!(
            "congruence factor has {} rows, middle matrix is {}x{}",
            t.nrows(),
            s.dim(),
            s.dim()
        )));
    }
    Ok(SymMat::symmetrized(t.transpose() * s.as_mat() * t))
}

/// Grid of blocks with explicit row heights and column widths.
///
/// Unset cells are zero blocks of the declared size.
#[derive(Debug, Clone)]
pub struct BlockLayout {
    heights: Vec<usize>,
    widths: Vec<usize>,
    cells: Vec<Vec<Option<Mat>>>,
}

impl BlockLayout {
    pub fn new(heights: Vec<usize>, widths: Vec<usize>) -> Self {
        let cells = vec![vec![None; widths.len()]; heights.len()];
        Self {
            heights,
            widths,
            cells,
        }
    }

    pub fn set(&mut self, row: usize, col: usize, block: Mat) -> Result<&mut Self, MatrixError> {
        if row >= self.heights.len() || col >= self.widths.len() {
            return Err(MatrixError::InconsistentBlocks(format!(
                "block index ({row}, {col}) outside a {}x{} layout",
                self.heights.len(),
                self.widths.len()
            )));
        }
        if block.shape() != (self.heights[row], self.widths[col]) {
            return Err(MatrixError::InconsistentBlocks(format!(
                "block ({row}, {col}) is {}x{}, layout expects {}x{}",
                block.nrows(),
                block.ncols(),
                self.heights[row],
                self.widths[col]
            )));
        }
        self.cells[row][col] = Some(block);
        Ok(self)
    }

    /// Build a layout whose block sizes are inferred from a full grid.
    pub fn from_grid(grid: Vec<Vec<Mat>>) -> Result<Self, MatrixError> {
        let Some(first) = grid.first() else {
            return Ok(Self::new(Vec::new(), Vec::new()));
        };
        let widths: Vec<usize> = first.iter().map(|b| b.ncols()).collect();
        let heights: Vec<usize> = grid
            .iter()
            .map(|row| row.first().map_or(0, |b| b.nrows()))
            .collect();
        let mut layout = Self::new(heights, widths);
        for (i, row) in grid.into_iter().enumerate() {
            if row.len() != layout.widths.len() {
                return Err(MatrixError::InconsistentBlocks(format!(
                    "row {i} has {} blocks, expected {}",
                    row.len(),
                    layout.widths.len()
                )));
            }
            for (j, b) in row.into_iter().enumerate() {
                layout.set(i, j, b)?;
            }
        }
        Ok(layout)
    }

    pub fn row_offsets(&self) -> Vec<usize> {
        offsets(&self.heights)
    }

    pub fn col_offsets(&self) -> Vec<usize> {
        offsets(&self.widths)
    }
}

pub(crate) fn offsets(sizes: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(sizes.len() + 1);
    let mut acc = 0;
    out.push(0);
    for s in sizes {
        acc += s;
        out.push(acc);
    }
    out
}

/// Place the blocks of `layout` contiguously into one dense matrix.
pub fn block_assemble(layout: &BlockLayout) -> Mat {
    let ro = layout.row_offsets();
    let co = layout.col_offsets();
    let mut out = Mat::zeros(*ro.last().unwrap(), *co.last().unwrap());
    for (i, row) in layout.cells.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            if let Some(b) = cell {
                out.view_mut((ro[i], co[j]), b.shape()).copy_from(b);
            }
        }
    }
    out
}

/// Vertical stack of matrices with equal column counts.
pub fn vstack(blocks: &[&Mat]) -> Result<Mat, MatrixError> {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    if let Some(bad) = blocks.iter().find(|b| b.ncols() != cols) {
        return Err(MatrixError::DimensionMismatch(format!(
            "vstack: {} columns vs {}",
            bad.ncols(),
            cols
        )));
    }
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), b.shape()).copy_from(*b);
        r += b.nrows();
    }
    Ok(out)
}

/// Horizontal concatenation of matrices with equal row counts.
pub fn hstack(blocks: &[&Mat]) -> Result<Mat, MatrixError> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    if let Some(bad) = blocks.iter().find(|b| b.nrows() != rows) {
        return Err(MatrixError::DimensionMismatch(format!(
            "hstack: {} rows vs {}",
            bad.nrows(),
            rows
        )));
    }
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        out.view_mut((0, c), b.shape()).copy_from(*b);
        c += b.ncols();
    }
    Ok(out)
}

/// Block-diagonal concatenation.
pub fn block_diag(blocks: &[&Mat]) -> Mat {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(*b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Row selector `[0 … I … 0]` picking `width` coordinates at `offset` out of `total`.
pub fn selector(offset: usize, width: usize, total: usize) -> Mat {
    let mut e = Mat::zeros(width, total);
    for k in 0..width {
        e[(k, offset + k)] = 1.0;
    }
    e
}

/// Spectral radius of a square matrix.
pub fn spectral_radius(a: &Mat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.complex_eigenvalues()
        .iter()
        .fold(0.0, |acc: f64, l| acc.max(l.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
        Mat::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> SymMat {
        let g = random_mat(rng, n, n);
        SymMat::symmetrized(&g * g.transpose() + Mat::identity(n, n) * 0.5)
    }

    /// Rank oracle independent of `numerical_rank`: Gram eigenvalues.
    fn gram_rank(m: &Mat) -> usize {
        let g = SymMat::symmetrized(m.transpose() * m);
        let ev = g.eigenvalues();
        let top = ev.last().copied().unwrap_or(0.0);
        ev.iter().filter(|&&l| l > 1e-12 * top.max(1e-300)).count()
    }

    #[test]
    fn kernel_of_identity_is_empty() {
        let k = kernel_basis(&Mat::identity(2, 2), DEFAULT_RANK_TOL);
        assert_eq!(k.shape(), (2, 0));
    }

    #[test]
    fn kernel_of_row_vector() {
        let m = Mat::from_row_slice(1, 2, &[1.0, 0.0]);
        let k = kernel_basis(&m, DEFAULT_RANK_TOL);
        assert_eq!(k.shape(), (2, 1));
        assert!(k[(0, 0)].abs() < 1e-14);
        assert!((k[(1, 0)].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn kernel_of_random_wide_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_mat(&mut rng, 3, 5);
        assert_eq!(gram_rank(&m), 3);
        let k = kernel_basis(&m, DEFAULT_RANK_TOL);
        assert_eq!(k.shape(), (5, 5 - gram_rank(&m)));
        assert!((&m * &k).amax() <= 1e-10);
        assert!((k.transpose() * &k - Mat::identity(2, 2)).amax() <= 1e-10);
    }

    #[test]
    fn kernel_of_zero_and_empty_rows() {
        assert_eq!(kernel_basis(&Mat::zeros(2, 3), 1e-9), Mat::identity(3, 3));
        assert_eq!(kernel_basis(&Mat::zeros(0, 3), 1e-9), Mat::identity(3, 3));
    }

    #[test]
    fn left_annihilator_cases() {
        let m = Mat::from_column_slice(2, 1, &[1.0, 0.0]);
        let n = left_annihilator(&m, DEFAULT_RANK_TOL);
        assert_eq!(n.shape(), (2, 1));
        assert!(n[(0, 0)].abs() < 1e-14 && (n[(1, 0)].abs() - 1.0).abs() < 1e-14);

        let sq = Mat::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 3.0]);
        assert_eq!(left_annihilator(&sq, 1e-9).ncols(), 0);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tall = random_mat(&mut rng, 6, 3);
        assert_eq!(gram_rank(&tall), 3);
        let n = left_annihilator(&tall, DEFAULT_RANK_TOL);
        assert_eq!(n.shape(), (6, 3));
        assert!((tall.transpose() * &n).amax() <= 1e-10);
    }

    #[test]
    fn sym_inverse_closed_forms() {
        let d = SymMat::from_diagonal(&[2.0, 4.0]);
        let inv = sym_inverse(&d, DEFAULT_COND_LIMIT).unwrap();
        assert!((inv.as_mat() - Mat::from_diagonal(&nalgebra::DVector::from_row_slice(&[0.5, 0.25]))).amax() < 1e-15);

        let s = SymMat::new(Mat::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0])).unwrap();
        let expected = Mat::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]) / 3.0;
        let inv = sym_inverse(&s, DEFAULT_COND_LIMIT).unwrap();
        assert!((inv.as_mat() - expected).amax() < 1e-15);
    }

    #[test]
    fn sym_inverse_random_spd_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = random_spd(&mut rng, 8);
        let inv = sym_inverse(&s, DEFAULT_COND_LIMIT).unwrap();
        let r = s.as_mat() * inv.as_mat() - Mat::identity(8, 8);
        assert!(r.amax() <= 1e-8);
    }

    #[test]
    fn sym_inverse_rejects_ill_conditioned() {
        let s = SymMat::from_diagonal(&[1.0, 1e-14]);
        assert!(matches!(
            sym_inverse(&s, DEFAULT_COND_LIMIT),
            Err(MatrixError::IllConditioned { .. })
        ));
        let singular = SymMat::from_diagonal(&[1.0, 0.0]);
        assert!(sym_inverse(&singular, DEFAULT_COND_LIMIT).is_err());
    }

    #[test]
    fn definiteness_examples() {
        assert_eq!(definiteness(&SymMat::identity(3), 1e-9), Definiteness::PositiveDefinite);
        assert_eq!(
            definiteness(&SymMat::from_diagonal(&[1.0, -1.0]), 1e-9),
            Definiteness::Indefinite
        );
        assert_eq!(
            definiteness(&SymMat::from_diagonal(&[1.0, 0.0]), 1e-9),
            Definiteness::PositiveSemidefinite
        );
        assert_eq!(
            definiteness(&SymMat::from_diagonal(&[-1.0, 0.0]), 1e-9),
            Definiteness::NegativeSemidefinite
        );
    }

    #[test]
    fn asymmetric_input_rejected() {
        let m = Mat::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(SymMat::new(m), Err(MatrixError::NotSymmetric { .. })));
        let tiny = Mat::from_row_slice(2, 2, &[1.0, 1.0 + 1e-13, 1.0, 1.0]);
        let s = SymMat::new(tiny).unwrap();
        assert_eq!(s.as_mat()[(0, 1)], s.as_mat()[(1, 0)]);
    }

    #[test]
    fn congruence_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = SymMat::symmetrized(random_mat(&mut rng, 5, 5));
        assert_eq!(congruence(&Mat::identity(5, 5), &s).unwrap(), s);
        let ones = Mat::from_column_slice(2, 1, &[1.0, 1.0]);
        let r = congruence(&ones, &SymMat::identity(2)).unwrap();
        assert_eq!(r.as_mat()[(0, 0)], 2.0);

        let t = random_mat(&mut rng, 5, 3);
        let r = congruence(&t, &s).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = 0.0;
                for a in 0..5 {
                    for b in 0..5 {
                        acc += t[(a, i)] * s.as_mat()[(a, b)] * t[(b, j)];
                    }
                }
                assert!((r.as_mat()[(i, j)] - acc).abs() <= 1e-12);
            }
        }
        assert!(congruence(&Mat::identity(4, 4), &s).is_err());
    }

    #[test]
    fn block_assemble_examples() {
        let one = Mat::from_element(1, 1, 7.0);
        let l = BlockLayout::from_grid(vec![vec![one.clone()]]).unwrap();
        assert_eq!(block_assemble(&l), one);

        let mut l = BlockLayout::new(vec![1, 2], vec![1, 2]);
        l.set(0, 0, Mat::identity(1, 1)).unwrap();
        l.set(1, 1, Mat::identity(2, 2)).unwrap();
        assert_eq!(block_assemble(&l), Mat::identity(3, 3));
        assert!(l.set(0, 1, Mat::identity(2, 2)).is_err());
    }

    #[test]
    fn block_assemble_data_stack() {
        // [[X-, 0], [U-, 0], [X+, I]] for n = 2, m = 1, N = 3.
        let x = Mat::from_row_slice(2, 4, &[1., 2., 3., 4., 5., 6., 7., 8.]);
        let u = Mat::from_row_slice(1, 3, &[9., 10., 11.]);
        let xm = x.columns(0, 3).into_owned();
        let xp = x.columns(1, 3).into_owned();
        let mut l = BlockLayout::new(vec![2, 1, 2], vec![3, 2]);
        l.set(0, 0, xm).unwrap();
        l.set(1, 0, u).unwrap();
        l.set(2, 0, xp).unwrap();
        l.set(2, 1, Mat::identity(2, 2)).unwrap();
        let m = block_assemble(&l);
        assert_eq!(m.shape(), (5, 5));
        let expected = [
            [1., 2., 3., 0., 0.],
            [5., 6., 7., 0., 0.],
            [9., 10., 11., 0., 0.],
            [2., 3., 4., 1., 0.],
            [6., 7., 8., 0., 1.],
        ];
        for (i, row) in expected.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert_eq!(m[(i, j)], *v, "entry ({i},{j})");
            }
        }
    }

    proptest! {
        #[test]
        fn kernel_completes_rank(r in 1usize..5, c in 1usize..6, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut m = random_mat(&mut rng, r, c);
            if r > 1 && seed % 3 == 0 {
                // force a dependent row
                let row = m.row(0).into_owned() * 2.0;
                m.set_row(r - 1, &row);
            }
            let k = kernel_basis(&m, DEFAULT_RANK_TOL);
            let stacked = vstack(&[&m, &k.transpose()]).unwrap();
            prop_assert_eq!(numerical_rank(&stacked, 1e-9), c);
            prop_assert_eq!(k.ncols(), c - gram_rank(&m));
        }

        #[test]
        fn inverse_is_involutive(n in 1usize..6, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_spd(&mut rng, n);
            let back = sym_inverse(&sym_inverse(&s, 1e12).unwrap(), 1e12).unwrap();
            prop_assert!((back.as_mat() - s.as_mat()).amax() <= 1e-6 * (1.0 + s.as_mat().amax()));
        }

        #[test]
        fn negation_swaps_definiteness(n in 1usize..6, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = SymMat::symmetrized(random_mat(&mut rng, n, n));
            let nd = definiteness(&s, 1e-9) == Definiteness::NegativeDefinite;
            let pd = definiteness(&-&s, 1e-9) == Definiteness::PositiveDefinite;
            prop_assert_eq!(nd, pd);
        }

        #[test]
        fn congruence_preserves_positive_definiteness(n in 2usize..6, k in 1usize..3, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_spd(&mut rng, n);
            let t = random_mat(&mut rng, n, k.min(n));
            prop_assume!(numerical_rank(&t, 1e-6) == t.ncols());
            let r = congruence(&t, &s).unwrap();
            prop_assert_eq!(definiteness(&r, 1e-12), Definiteness::PositiveDefinite);
        }
    }
}
