//! Dense symmetric linear algebra shared by every estimator.
//!
//! All matrices are `nalgebra::DMatrix<f64>`. Eigenpairs are returned in
//! descending order with a fixed sign convention (largest-magnitude entry of
//! each eigenvector is positive, first index wins ties), so repeated fits are
//! reproducible. Subspaces should still be compared with
//! [`projector_distance`] because degenerate eigenvalues leave the basis free.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// Relative asymmetry tolerated before an input is rejected as non-symmetric.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Top-`d` eigenpairs of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct EigenResult {
    /// Eigenvalues, descending.
    pub values: Vec<f64>,
    /// `n x d`, orthonormal columns matching `values`.
    pub vectors: Matrix,
}

pub fn check_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::Input(format!("{what}: empty matrix")));
    }
    if let Some(pos) = m.iter().position(|v| !v.is_finite()) {
        let (r, c) = (pos % m.nrows(), pos / m.nrows());
        return Err(Error::Input(format!(
            "{what}: non-finite entry at ({r}, {c})"
        )));
    }
    Ok(())
}

fn check_square(m: &Matrix, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "{what}: expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Largest entry of `|A - A^T|`.
pub fn asymmetry(m: &Matrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn check_symmetric(m: &Matrix, tol: f64, what: &str) -> Result<()> {
    check_square(m, what)?;
    let scale = m.norm().max(1.0);
    let asym = asymmetry(m);
    if asym > tol * scale {
        return Err(Error::Input(format!(
            "{what}: matrix is not symmetric (max |a_ij - a_ji| = {asym:.3e})"
        )));
    }
    Ok(())
}

/// `(A + A^T) / 2`.
pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Flip each column so its largest-magnitude entry is positive (lowest index
/// wins ties).
pub fn apply_sign_convention(vectors: &mut Matrix) {
    for mut col in vectors.column_iter_mut() {
        let mut best = 0usize;
        let mut best_abs = -1.0_f64;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > best_abs {
                best_abs = v.abs();
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

/// Leading `d` eigenpairs of the symmetric matrix `a`.
///
/// The input is symmetrized as `(A + A^T)/2` before decomposition so round-off
/// asymmetry in assembled matrices does not leak into the spectrum.
pub fn sym_eig_topd(a: &Matrix, d: usize) -> Result<EigenResult> {
    check_finite(a, "eigendecomposition input")?;
    check_symmetric(a, SYMMETRY_TOL, "eigendecomposition input")?;
    let n = a.nrows();
    if d == 0 || d > n {
        return Err(Error::Dimension(format!(
            "requested {d} eigenpairs of a {n}x{n} matrix"
        )));
    }
    let eig = symmetrize(a).symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps the lower index first among exactly equal eigenvalues.
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    order.truncate(d);

    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = Matrix::zeros(n, d);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    apply_sign_convention(&mut vectors);
    Ok(EigenResult { values, vectors })
}

/// All eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(a: &Matrix) -> Vec<f64> {
    let mut vals: Vec<f64> = symmetrize(a)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    vals.sort_by(f64::total_cmp);
    vals
}

/// Solve `(G + eps I) X = B` for symmetric `G`.
///
/// The shifted matrix must be positive definite with smallest eigenvalue above
/// `1e-12 * max(1, ||G||_F)`; otherwise a [`Error::Singular`] is returned.
pub fn ridge_solve(g: &Matrix, eps: f64, b: &Matrix) -> Result<Matrix> {
    check_finite(g, "ridge_solve G")?;
    check_finite(b, "ridge_solve B")?;
    check_symmetric(g, SYMMETRY_TOL, "ridge_solve G")?;
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::Input(format!("ridge shift must be >= 0, got {eps}")));
    }
    let n = g.nrows();
    if b.nrows() != n {
        return Err(Error::Dimension(format!(
            "ridge_solve: G is {n}x{n} but B has {} rows",
            b.nrows()
        )));
    }
    let mut shifted = symmetrize(g);
    for i in 0..n {
        shifted[(i, i)] += eps;
    }
    let min_eig = sym_eigenvalues(&shifted)[0];
    let threshold = 1e-12 * g.norm().max(1.0);
    if min_eig <= threshold {
        return Err(Error::Singular(format!(
            "G + {eps:e} I has smallest eigenvalue {min_eig:.3e} (threshold {threshold:.3e})"
        )));
    }
    let chol = shifted.cholesky().ok_or_else(|| {
        Error::Singular(format!("Cholesky factorization of G + {eps:e} I failed"))
    })?;
    Ok(chol.solve(b))
}

/// `Tr(S L S^T)` for `S` (d x N) and `L` (N x N).
pub fn trace_quadratic(s: &Matrix, l: &Matrix) -> Result<f64> {
    if l.nrows() != l.ncols() || s.ncols() != l.nrows() {
        return Err(Error::Dimension(format!(
            "trace_quadratic: S is {}x{}, L is {}x{}",
            s.nrows(),
            s.ncols(),
            l.nrows(),
            l.ncols()
        )));
    }
    let sl = s * l;
    Ok(sl.component_mul(s).sum())
}

/// `||V1 V1^T - V2 V2^T||_F` for matrices with orthonormal columns.
pub fn projector_distance(v1: &Matrix, v2: &Matrix) -> Result<f64> {
    if v1.nrows() != v2.nrows() {
        return Err(Error::Dimension(format!(
            "projector_distance: {} vs {} rows",
            v1.nrows(),
            v2.nrows()
        )));
    }
    let p1 = v1 * v1.transpose();
    let p2 = v2 * v2.transpose();
    Ok((p1 - p2).norm())
}

/// Row means of a `rows x cols` matrix.
pub fn row_means(m: &Matrix) -> Vec<f64> {
    let n = m.ncols() as f64;
    m.row_iter().map(|r| r.sum() / n).collect()
}

/// Subtract `means[i]` from every entry of row `i`.
pub fn subtract_row_means(m: &Matrix, means: &[f64]) -> Matrix {
    let mut out = m.clone();
    for (i, mu) in means.iter().enumerate() {
        for v in out.row_mut(i).iter_mut() {
            *v -= mu;
        }
    }
    out
}

/// Build a matrix from row-major nested vectors.
pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let nrows = rows.len();
    if nrows == 0 {
        return Err(Error::Input("empty row list".into()));
    }
    let ncols = rows[0].len();
    if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
        return Err(Error::Dimension(format!(
            "row {bad} has {} entries, expected {ncols}",
            rows[bad].len()
        )));
    }
    Ok(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Row-major nested vectors.
pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn assert_eigen_contract(a: &Matrix, res: &EigenResult) {
        let d = res.values.len();
        for w in res.values.windows(2) {
            assert!(w[0] >= w[1]);
        }
        let gram = res.vectors.transpose() * &res.vectors;
        assert!((gram - Matrix::identity(d, d)).amax() <= 1e-10);
        let bound = 1e-8 * a.norm().max(1.0);
        for k in 0..d {
            let v = res.vectors.column(k);
            let r = a * v - v * res.values[k];
            assert!(r.norm() <= bound, "residual {}", r.norm());
            let (imax, _) = v.iter().enumerate().fold((0, -1.0), |acc, (i, x)| {
                if x.abs() > acc.1 {
                    (i, x.abs())
                } else {
                    acc
                }
            });
            assert!(v[imax] > 0.0);
        }
    }

    #[test]
    fn eig_identity_is_degenerate_but_orthonormal() {
        let a = Matrix::identity(3, 3);
        let res = sym_eig_topd(&a, 2).unwrap();
        assert_eq!(res.values, vec![1.0, 1.0]);
        assert_eigen_contract(&a, &res);
    }

    #[test]
    fn eig_diagonal() {
        let a = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let res = sym_eig_topd(&a, 2).unwrap();
        assert!((res.values[0] - 3.0).abs() < 1e-14);
        assert!((res.values[1] - 2.0).abs() < 1e-14);
        let e1 = Matrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let e3 = Matrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0]);
        assert!((res.vectors.column(0) - e1.column(0)).norm() < 1e-12);
        assert!((res.vectors.column(1) - e3.column(0)).norm() < 1e-12);
    }

    #[test]
    fn eig_two_by_two_by_hand() {
        let a = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let res = sym_eig_topd(&a, 1).unwrap();
        assert!((res.values[0] - 3.0).abs() < 1e-12);
        let h = 1.0 / 2f64.sqrt();
        assert!((res.vectors[(0, 0)] - h).abs() < 1e-12);
        assert!((res.vectors[(1, 0)] - h).abs() < 1e-12);
    }

    #[test]
    fn eig_errors() {
        let a = Matrix::identity(2, 2);
        assert!(matches!(sym_eig_topd(&a, 3), Err(Error::Dimension(_))));
        assert!(matches!(sym_eig_topd(&a, 0), Err(Error::Dimension(_))));
        let mut b = a.clone();
        b[(0, 1)] = f64::NAN;
        assert!(matches!(sym_eig_topd(&b, 1), Err(Error::Input(_))));
    }

    #[test]
    fn eig_full_reconstruction_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 2, 5, 17, 40] {
            let r = random(n, n, &mut rng);
            let a = symmetrize(&(&r + r.transpose()));
            let res = sym_eig_topd(&a, n).unwrap();
            assert_eigen_contract(&a, &res);
            let lam = Matrix::from_diagonal(&nalgebra::DVector::from_vec(res.values.clone()));
            let rec = &res.vectors * lam * res.vectors.transpose();
            assert!((rec - &a).norm() <= 1e-7 * a.norm().max(1.0));
        }
    }

    #[test]
    fn ridge_solve_examples() {
        let i2 = Matrix::identity(2, 2);
        let x = ridge_solve(&i2, 0.0, &i2).unwrap();
        assert!((x - &i2).amax() < 1e-15);

        let g = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 3.0]);
        let b = Matrix::from_column_slice(2, 1, &[1.0, 1.0]);
        let x = ridge_solve(&g, 1.0, &b).unwrap();
        assert!((x[(0, 0)] - 0.5).abs() <= 1e-12);
        assert!((x[(1, 0)] - 0.25).abs() <= 1e-12);
    }

    #[test]
    fn ridge_solve_random_spd_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let r = random(5, 5, &mut rng);
        let g = &r * r.transpose();
        let b = random(5, 3, &mut rng);
        let x = ridge_solve(&g, 0.1, &b).unwrap();
        let shifted = &g + Matrix::identity(5, 5) * 0.1;
        let resid = (shifted * x - &b).norm();
        assert!(resid <= 1e-8 * b.norm().max(1.0));
    }

    #[test]
    fn ridge_solve_singular() {
        let g = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = Matrix::identity(2, 2);
        assert!(matches!(ridge_solve(&g, 0.0, &b), Err(Error::Singular(_))));
        assert!(ridge_solve(&g, 1e-3, &b).is_ok());
        assert!(matches!(ridge_solve(&g, -1.0, &b), Err(Error::Input(_))));
    }

    #[test]
    fn trace_quadratic_examples() {
        let s = Matrix::identity(2, 2);
        let l = Matrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        assert!((trace_quadratic(&s, &l).unwrap() - 2.0).abs() < 1e-15);
        let zero = Matrix::zeros(2, 2);
        assert_eq!(trace_quadratic(&s, &zero).unwrap(), 0.0);
        let bad = Matrix::zeros(3, 3);
        assert!(matches!(
            trace_quadratic(&s, &bad),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn trace_quadratic_path_graph_double_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random(3, 5, &mut rng);
        let mut w = Matrix::zeros(5, 5);
        for i in 0..4 {
            let v = rng.random_range(0.1..2.0);
            w[(i, i + 1)] = v;
            w[(i + 1, i)] = v;
        }
        let deg: Vec<f64> = w.row_iter().map(|r| r.sum()).collect();
        let l = Matrix::from_diagonal(&nalgebra::DVector::from_vec(deg)) - &w;
        // Brute-force right-hand side of the smoothness identity. The double
        // sum counts every undirected edge twice, so halve it.
        let mut naive = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                naive += w[(i, j)] * (s.column(i) - s.column(j)).norm_squared();
            }
        }
        let got = trace_quadratic(&s, &l).unwrap();
        assert!((got - naive / 2.0).abs() <= 1e-9 * naive.abs().max(1.0));
    }

    #[test]
    fn projector_distance_is_basis_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = random(6, 6, &mut rng);
        let a = symmetrize(&(&r + r.transpose()));
        let v = sym_eig_topd(&a, 3).unwrap().vectors;
        let rot = nalgebra::Rotation3::from_euler_angles(0.3, -1.1, 2.0);
        let rot = Matrix::from_fn(3, 3, |i, j| rot[(i, j)]);
        let v2 = &v * rot;
        assert!(projector_distance(&v, &v2).unwrap() < 1e-12);
    }
}
