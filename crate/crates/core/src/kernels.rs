//! Kernel matrices (linear and Gaussian) and their double centering.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{asymmetry, check_finite, Matrix};

/// Kernel family plus the parameters needed to re-evaluate it on new data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum KernelSpec {
    Linear,
    /// `exp(-||x - y||^2 / (2 sigma^2))`
    Gaussian {
        sigma: f64,
    },
}

impl KernelSpec {
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
            KernelSpec::Gaussian { sigma } => {
                let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-sq / (2.0 * sigma * sigma)).exp()
            }
        }
    }
}

/// Gaussian bandwidth choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Fixed(f64),
    /// Mean Euclidean distance over all distinct column pairs.
    Auto,
}

#[derive(Debug, Clone)]
pub struct KernelMatrix {
    k: Matrix,
    centered: bool,
    spec: KernelSpec,
}

impl KernelMatrix {
    /// Wrap an existing matrix. The caller vouches for the `centered` flag.
    pub fn from_parts(k: Matrix, centered: bool, spec: KernelSpec) -> Result<Self> {
        check_finite(&k, "kernel matrix")?;
        if k.nrows() != k.ncols() {
            return Err(Error::Dimension(format!(
                "kernel matrix must be square, got {}x{}",
                k.nrows(),
                k.ncols()
            )));
        }
        let asym = asymmetry(&k);
        if asym > 1e-10 * k.norm().max(1.0) {
            return Err(Error::Input(format!(
                "kernel matrix is not symmetric (max asymmetry {asym:.3e})"
            )));
        }
        Ok(Self { k, centered, spec })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.k
    }

    pub fn into_matrix(self) -> Matrix {
        self.k
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn spec(&self) -> KernelSpec {
        self.spec
    }

    pub fn n(&self) -> usize {
        self.k.nrows()
    }

    /// Smallest eigenvalue is at least `-1e-8 * ||K||_F`.
    pub fn is_psd(&self) -> bool {
        let min = crate::linalg::sym_eigenvalues(&self.k)[0];
        min >= -1e-8 * self.k.norm().max(f64::MIN_POSITIVE)
    }
}

fn column(x: &Matrix, j: usize) -> Vec<f64> {
    x.column(j).iter().copied().collect()
}

/// Mean Euclidean distance over the `N(N-1)/2` distinct column pairs of `x`.
pub fn mean_pairwise_distance(x: &Matrix) -> Result<f64> {
    let n = x.ncols();
    if n < 2 {
        return Err(Error::Degenerate(
            "mean pairwise distance needs at least two samples".into(),
        ));
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            total += (x.column(i) - x.column(j)).norm();
        }
    }
    Ok(total / (n * (n - 1) / 2) as f64)
}

pub fn gaussian_kernel(x: &Matrix, bandwidth: Bandwidth) -> Result<KernelMatrix> {
    check_finite(x, "gaussian_kernel input")?;
    let sigma = match bandwidth {
        Bandwidth::Fixed(s) => {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::Input(format!("bandwidth must be > 0, got {s}")));
            }
            s
        }
        Bandwidth::Auto => {
            let s = mean_pairwise_distance(x)?;
            if s <= 0.0 {
                return Err(Error::Degenerate(
                    "all samples identical: mean pairwise distance is zero".into(),
                ));
            }
            s
        }
    };
    let spec = KernelSpec::Gaussian { sigma };
    let n = x.ncols();
    let cols: Vec<Vec<f64>> = (0..n).map(|j| column(x, j)).collect();
    let mut k = Matrix::identity(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = spec.eval(&cols[i], &cols[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(KernelMatrix {
        k,
        centered: false,
        spec,
    })
}

pub fn linear_kernel(x: &Matrix) -> Result<KernelMatrix> {
    check_finite(x, "linear_kernel input")?;
    let k = crate::linalg::symmetrize(&(x.transpose() * x));
    Ok(KernelMatrix {
        k,
        centered: false,
        spec: KernelSpec::Linear,
    })
}

pub fn kernel_from_spec(x: &Matrix, spec: KernelSpec) -> Result<KernelMatrix> {
    match spec {
        KernelSpec::Linear => linear_kernel(x),
        KernelSpec::Gaussian { sigma } => gaussian_kernel(x, Bandwidth::Fixed(sigma)),
    }
}

/// Double-center a kernel: `K = H Kbar H` with `H = I - 11^T/N`.
pub fn center_kernel(kbar: &KernelMatrix) -> Result<KernelMatrix> {
    if kbar.centered {
        return Err(Error::State("kernel matrix is already centered".into()));
    }
    let n = kbar.n();
    let nf = n as f64;
    let k = &kbar.k;
    let row_means: Vec<f64> = k.row_iter().map(|r| r.sum() / nf).collect();
    let col_means: Vec<f64> = k.column_iter().map(|c| c.sum() / nf).collect();
    let grand = k.sum() / (nf * nf);
    let mut out = Matrix::from_fn(n, n, |i, j| k[(i, j)] - col_means[j] - row_means[i] + grand);
    out = crate::linalg::symmetrize(&out);
    Ok(KernelMatrix {
        k: out,
        centered: true,
        spec: kbar.spec,
    })
}

/// Cross kernel `K(i, t) = kappa(train_i, new_t)`, shape `N x T`.
pub fn cross_kernel(spec: KernelSpec, train: &Matrix, new: &Matrix) -> Result<Matrix> {
    if train.nrows() != new.nrows() {
        return Err(Error::Dimension(format!(
            "cross kernel: training features have dimension {}, new data {}",
            train.nrows(),
            new.nrows()
        )));
    }
    let tr: Vec<Vec<f64>> = (0..train.ncols()).map(|j| column(train, j)).collect();
    let nw: Vec<Vec<f64>> = (0..new.ncols()).map(|j| column(new, j)).collect();
    Ok(Matrix::from_fn(tr.len(), nw.len(), |i, t| {
        spec.eval(&tr[i], &nw[t])
    }))
}

/// Center a cross kernel against the (uncentered) training kernel so that the
/// result equals inner products of feature maps centered at the training mean:
/// subtract training row means, new column means, add the training grand mean.
pub fn center_cross_kernel(cross: &Matrix, train_uncentered: &Matrix) -> Result<Matrix> {
    let n = train_uncentered.nrows();
    if cross.nrows() != n {
        return Err(Error::Dimension(format!(
            "cross kernel has {} rows, training kernel is {n}x{n}",
            cross.nrows()
        )));
    }
    let nf = n as f64;
    let train_row_means: Vec<f64> = train_uncentered.row_iter().map(|r| r.sum() / nf).collect();
    let grand = train_uncentered.sum() / (nf * nf);
    let new_col_means: Vec<f64> = cross.column_iter().map(|c| c.sum() / nf).collect();
    Ok(Matrix::from_fn(n, cross.ncols(), |i, t| {
        cross[(i, t)] - train_row_means[i] - new_col_means[t] + grand
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn h_matrix(n: usize) -> Matrix {
        Matrix::identity(n, n) - Matrix::from_element(n, n, 1.0 / n as f64)
    }

    #[test]
    fn gaussian_diagonal_and_closed_form() {
        let sigma = 0.7;
        let d = sigma * 2f64.sqrt();
        let x = Matrix::from_row_slice(2, 2, &[0.0, d, 0.0, 0.0]);
        let k = gaussian_kernel(&x, Bandwidth::Fixed(sigma)).unwrap();
        assert_eq!(k.matrix()[(0, 0)], 1.0);
        assert_eq!(k.matrix()[(1, 1)], 1.0);
        assert!((k.matrix()[(0, 1)] - (-1f64).exp()).abs() < 1e-12);
        assert!((k.matrix()[(0, 1)] - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn gaussian_matches_direct_formula() {
        let x = random(4, 3, 1);
        let sigma = 1.3;
        let k = gaussian_kernel(&x, Bandwidth::Fixed(sigma)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut sq = 0.0;
                for r in 0..4 {
                    sq += (x[(r, i)] - x[(r, j)]).powi(2);
                }
                let want = (-sq / (2.0 * sigma * sigma)).exp();
                assert!((k.matrix()[(i, j)] - want).abs() < 1e-15);
                assert!(k.matrix()[(i, j)] > 0.0 && k.matrix()[(i, j)] <= 1.0);
            }
        }
        assert!(k.is_psd());
    }

    #[test]
    fn gaussian_auto_bandwidth() {
        let x = Matrix::from_row_slice(1, 3, &[0.0, 1.0, 3.0]);
        let k = gaussian_kernel(&x, Bandwidth::Auto).unwrap();
        // distances 1, 3, 2 -> mean 2
        assert_eq!(k.spec(), KernelSpec::Gaussian { sigma: 2.0 });
        let same = Matrix::from_element(2, 4, 0.5);
        assert!(matches!(
            gaussian_kernel(&same, Bandwidth::Auto),
            Err(Error::Degenerate(_))
        ));
        assert!(gaussian_kernel(&same, Bandwidth::Fixed(0.0)).is_err());
    }

    #[test]
    fn linear_kernel_examples() {
        let k = linear_kernel(&Matrix::identity(2, 2)).unwrap();
        assert_eq!(k.matrix(), &Matrix::identity(2, 2));
        let x = Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]);
        let k = linear_kernel(&x).unwrap();
        assert_eq!(
            k.matrix(),
            &Matrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0])
        );
        let x = random(3, 4, 2);
        let k = linear_kernel(&x).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want: f64 = (0..3).map(|r| x[(r, i)] * x[(r, j)]).sum();
                assert!((k.matrix()[(i, j)] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn centering_examples() {
        let ones =
            KernelMatrix::from_parts(Matrix::from_element(4, 4, 1.0), false, KernelSpec::Linear)
                .unwrap();
        let c = center_kernel(&ones).unwrap();
        assert!(c.matrix().amax() < 1e-15);
        assert!(c.is_centered());
        assert!(matches!(center_kernel(&c), Err(Error::State(_))));

        let r = random(5, 5, 3);
        let kbar = KernelMatrix::from_parts(&r * r.transpose(), false, KernelSpec::Linear).unwrap();
        let c = center_kernel(&kbar).unwrap();
        let h = h_matrix(5);
        let oracle = &h * kbar.matrix() * &h;
        assert!((c.matrix() - oracle).amax() < 1e-12);
        for i in 0..5 {
            assert!(c.matrix().row(i).sum().abs() <= 1e-10);
            assert!(c.matrix().column(i).sum().abs() <= 1e-10);
        }
        // Idempotent on an already centered matrix (flag cleared).
        let again =
            KernelMatrix::from_parts(c.matrix().clone(), false, KernelSpec::Linear).unwrap();
        let twice = center_kernel(&again).unwrap();
        assert!((twice.matrix() - c.matrix()).amax() < 1e-12);
    }

    #[test]
    fn centered_linear_kernel_equals_kernel_of_centered_features() {
        let x = random(3, 6, 4);
        let means = crate::linalg::row_means(&x);
        let xc = crate::linalg::subtract_row_means(&x, &means);
        let a = center_kernel(&linear_kernel(&x).unwrap()).unwrap();
        let b = linear_kernel(&xc).unwrap();
        assert!((a.matrix() - b.matrix()).amax() < 1e-9);
    }

    #[test]
    fn cross_kernel_centering_reduces_to_training_centering() {
        let x = random(3, 6, 5);
        let spec = KernelSpec::Gaussian { sigma: 0.9 };
        let kbar = kernel_from_spec(&x, spec).unwrap();
        let cross = cross_kernel(spec, &x, &x).unwrap();
        let cc = center_cross_kernel(&cross, kbar.matrix()).unwrap();
        let c = center_kernel(&kbar).unwrap();
        assert!((cc - c.matrix()).amax() < 1e-12);
    }
}
