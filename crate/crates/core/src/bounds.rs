//! High-probability generalization bound for the pairwise projection error.
//!
//! For loadings `U_m` and samples `x_{m,n}` the error of one sample is
//! `g_n = sum_{m < m'} ||U_m^T x_{m,n} - U_{m'}^T x_{m',n}||^2`. With
//! probability at least `1 - delta` the expected error is at most
//!
//! ```text
//! mean(g_n) + 3 R B sqrt(ln(2/delta) / (2N)) + (4B/N) sqrt(sum_n sum_{m<m'} (k_m(n) + k_m'(n))^2)
//! ```
//!
//! where `k_m(n) = ||x_{m,n}||^2`, `B^2 = sum_{m<m'} ||U_m^T U_m + U_{m'}^T U_{m'}||_F^2`
//! and `R` is the largest per-sample value of the square-rooted pair sum. The
//! distributional maximum in `R` is replaced by the maximum over the samples
//! supplied. The guarantee is stated for optimal loadings; any loadings are
//! accepted here.

use serde::{Deserialize, Serialize};

use crate::data::MultiviewDataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// Empirical mean pairwise error.
    pub g_bar: f64,
    /// `(4B/N) sqrt(sum of squared self-kernel pair sums)`.
    pub trace_term: f64,
    /// `3 R B sqrt(ln(2/delta) / 2N)`.
    pub deviation_term: f64,
    #[serde(rename = "B")]
    pub b: f64,
    /// Empirical `R` (max over the supplied samples).
    #[serde(rename = "R")]
    pub r: f64,
    pub delta: f64,
    pub n: usize,
    pub bound: f64,
}

fn check_shapes(loadings: &[Matrix], data: &MultiviewDataset) -> Result<()> {
    if loadings.len() != data.num_views() {
        return Err(Error::Dimension(format!(
            "{} loading matrices for {} views",
            loadings.len(),
            data.num_views()
        )));
    }
    let d = loadings.first().map(|u| u.ncols()).unwrap_or(0);
    for (m, (u, x)) in loadings.iter().zip(data.views()).enumerate() {
        if u.nrows() != x.nrows() || u.ncols() != d {
            return Err(Error::Dimension(format!(
                "view {m}: loading is {}x{}, data has {} features",
                u.nrows(),
                u.ncols(),
                x.nrows()
            )));
        }
    }
    Ok(())
}

/// Per-sample pairwise errors `g_n`.
pub fn sample_errors(loadings: &[Matrix], data: &MultiviewDataset) -> Result<Vec<f64>> {
    check_shapes(loadings, data)?;
    let proj: Vec<Matrix> = loadings
        .iter()
        .zip(data.views())
        .map(|(u, x)| u.transpose() * x)
        .collect();
    let n = data.num_samples();
    let mut g = vec![0.0; n];
    for a in 0..proj.len() {
        for b in (a + 1)..proj.len() {
            let diff = &proj[a] - &proj[b];
            for (gn, col) in g.iter_mut().zip(diff.column_iter()) {
                *gn += col.norm_squared();
            }
        }
    }
    Ok(g)
}

/// Mean pairwise error over samples; equals the SUMCOR objective divided by N.
pub fn empirical_g(loadings: &[Matrix], data: &MultiviewDataset) -> Result<f64> {
    let g = sample_errors(loadings, data)?;
    Ok(g.iter().sum::<f64>() / g.len() as f64)
}

pub fn compute_b(loadings: &[Matrix]) -> f64 {
    let grams: Vec<Matrix> = loadings.iter().map(|u| u.transpose() * u).collect();
    let mut total = 0.0;
    for a in 0..grams.len() {
        for b in (a + 1)..grams.len() {
            if grams[a].shape() == grams[b].shape() {
                total += (&grams[a] + &grams[b]).norm_squared();
            }
        }
    }
    total.sqrt()
}

/// `sum_{m<m'} (k_m(n) + k_m'(n))^2` for each sample.
fn pair_kernel_sums(data: &MultiviewDataset) -> Vec<f64> {
    let self_k: Vec<Vec<f64>> = data
        .views()
        .iter()
        .map(|x| x.column_iter().map(|c| c.norm_squared()).collect())
        .collect();
    (0..data.num_samples())
        .map(|n| {
            let mut s = 0.0;
            for a in 0..self_k.len() {
                for b in (a + 1)..self_k.len() {
                    let v = self_k[a][n] + self_k[b][n];
                    s += v * v;
                }
            }
            s
        })
        .collect()
}

pub fn compute_r(data: &MultiviewDataset) -> f64 {
    pair_kernel_sums(data)
        .into_iter()
        .fold(0.0_f64, f64::max)
        .sqrt()
}

pub fn generalization_bound(
    loadings: &[Matrix],
    data: &MultiviewDataset,
    delta: f64,
) -> Result<BoundReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Config(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let g_bar = empirical_g(loadings, data)?;
    let b = compute_b(loadings);
    let sums = pair_kernel_sums(data);
    let r = sums.iter().copied().fold(0.0_f64, f64::max).sqrt();
    let n = data.num_samples();
    let nf = n as f64;
    let trace_term = 4.0 * b / nf * sums.iter().sum::<f64>().sqrt();
    let deviation_term = 3.0 * r * b * ((2.0 / delta).ln() / (2.0 * nf)).sqrt();
    Ok(BoundReport {
        g_bar,
        trace_term,
        deviation_term,
        b,
        r,
        delta,
        n,
        bound: g_bar + trace_term + deviation_term,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcca::sumcor_objective;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn empirical_g_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random(2, 3, &mut rng);
        let data = MultiviewDataset::new(vec![x.clone(), x.clone()]).unwrap();
        let u = random(2, 1, &mut rng);
        assert_eq!(empirical_g(&[u.clone(), u], &data).unwrap(), 0.0);

        // M = 2, one sample worth of hand computation.
        let x1 = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 0.0]);
        let x2 = Matrix::from_row_slice(1, 2, &[3.0, 0.0]);
        let data = MultiviewDataset::new(vec![x1, x2]).unwrap();
        let u1 = Matrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let u2 = Matrix::from_row_slice(1, 1, &[2.0]);
        // sample 0: (1 + 2) - 6 = -3 -> 9; sample 1: 0.
        assert_eq!(empirical_g(&[u1, u2], &data).unwrap(), 4.5);
    }

    #[test]
    fn empirical_g_triple_loop_and_sumcor() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 7;
        let views = vec![
            random(3, n, &mut rng),
            random(2, n, &mut rng),
            random(4, n, &mut rng),
        ];
        let us = vec![
            random(3, 2, &mut rng),
            random(2, 2, &mut rng),
            random(4, 2, &mut rng),
        ];
        let data = MultiviewDataset::new(views.clone()).unwrap();
        let mut want = 0.0;
        for s in 0..n {
            for a in 0..3 {
                for b in (a + 1)..3 {
                    let pa = us[a].transpose() * views[a].column(s);
                    let pb = us[b].transpose() * views[b].column(s);
                    want += (pa - pb).norm_squared();
                }
            }
        }
        want /= n as f64;
        let got = empirical_g(&us, &data).unwrap();
        assert!((got - want).abs() < 1e-12);
        let sc = sumcor_objective(&us, &data).unwrap();
        assert!((got - sc / n as f64).abs() <= 1e-10);
    }

    #[test]
    fn b_examples() {
        assert_eq!(compute_b(&[Matrix::zeros(3, 2), Matrix::zeros(2, 2)]), 0.0);
        let q = Matrix::identity(4, 3);
        let b = compute_b(&[q.clone(), q]);
        assert!((b - 2.0 * 3f64.sqrt()).abs() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let us = vec![
            random(3, 2, &mut rng),
            random(5, 2, &mut rng),
            random(2, 2, &mut rng),
        ];
        let mut want = 0.0;
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            want += (us[a].transpose() * &us[a] + us[b].transpose() * &us[b]).norm_squared();
        }
        assert!((compute_b(&us) - want.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn r_examples() {
        let data = MultiviewDataset::new(vec![Matrix::zeros(2, 3), Matrix::zeros(1, 3)]).unwrap();
        assert_eq!(compute_r(&data), 0.0);
        let x1 = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let x2 = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 2f64.sqrt(), 0.0]);
        let data = MultiviewDataset::new(vec![x1, x2]).unwrap();
        assert!((compute_r(&data) - 4.0).abs() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let views = vec![
            random(3, 6, &mut rng),
            random(2, 6, &mut rng),
            random(2, 6, &mut rng),
        ];
        let data = MultiviewDataset::new(views.clone()).unwrap();
        let mut best: f64 = 0.0;
        for s in 0..6 {
            let k: Vec<f64> = views.iter().map(|v| v.column(s).norm_squared()).collect();
            let v = (k[0] + k[1]).powi(2) + (k[0] + k[2]).powi(2) + (k[1] + k[2]).powi(2);
            best = best.max(v.sqrt());
        }
        assert!((compute_r(&data) - best).abs() < 1e-12);
    }

    #[test]
    fn bound_assembly_and_degenerate_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data =
            MultiviewDataset::new(vec![random(3, 6, &mut rng), random(2, 6, &mut rng)]).unwrap();
        let zero =
            generalization_bound(&[Matrix::zeros(3, 2), Matrix::zeros(2, 2)], &data, 0.1).unwrap();
        assert_eq!(zero.bound, 0.0);
        assert_eq!(zero.g_bar, 0.0);

        let us = vec![random(3, 2, &mut rng), random(2, 2, &mut rng)];
        let rep = generalization_bound(&us, &data, 0.1).unwrap();
        assert!(rep.bound >= rep.g_bar);
        assert!((rep.bound - (rep.g_bar + rep.trace_term + rep.deviation_term)).abs() < 1e-12);
        assert!(rep.trace_term >= 0.0 && rep.deviation_term >= 0.0);
        assert!(generalization_bound(&us, &data, 0.0).is_err());
        assert!(generalization_bound(&us, &data, 1.0).is_err());
    }

    #[test]
    fn bound_is_homogeneous_of_degree_two_in_loadings() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let data = MultiviewDataset::new(vec![
            random(3, 9, &mut rng),
            random(4, 9, &mut rng),
            random(2, 9, &mut rng),
        ])
        .unwrap();
        let us = vec![
            random(3, 2, &mut rng),
            random(4, 2, &mut rng),
            random(2, 2, &mut rng),
        ];
        let base = generalization_bound(&us, &data, 0.05).unwrap();
        let c = 1.7;
        let scaled: Vec<Matrix> = us.iter().map(|u| u * c).collect();
        let rep = generalization_bound(&scaled, &data, 0.05).unwrap();
        let c2 = c * c;
        assert!((rep.g_bar - c2 * base.g_bar).abs() <= 1e-12 * rep.g_bar.max(1.0));
        assert!((rep.b - c2 * base.b).abs() <= 1e-12 * rep.b.max(1.0));
        assert!((rep.trace_term - c2 * base.trace_term).abs() <= 1e-12 * rep.trace_term.max(1.0));
        assert!(
            (rep.deviation_term - c2 * base.deviation_term).abs()
                <= 1e-12 * rep.deviation_term.max(1.0)
        );
        assert!((rep.bound - c2 * base.bound).abs() <= 1e-12 * rep.bound.max(1.0));
    }

    #[test]
    fn bound_is_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let data =
            MultiviewDataset::new(vec![random(3, 8, &mut rng), random(2, 8, &mut rng)]).unwrap();
        let us = vec![random(3, 2, &mut rng), random(2, 2, &mut rng)];
        let perm = [5, 2, 7, 0, 1, 6, 3, 4];
        let permuted = data.select(&perm).unwrap();
        let a = generalization_bound(&us, &data, 0.1).unwrap();
        let b = generalization_bound(&us, &permuted, 0.1).unwrap();
        assert!((a.bound - b.bound).abs() <= 1e-12 * a.bound);
        assert_eq!(a.r, b.r);
    }
}
