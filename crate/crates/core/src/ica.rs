//! FastICA with a log-cosh contrast and symmetric decorrelation.
//!
//! Inputs are mixtures in rows and observations in columns. Whitening uses
//! the eigendecomposition of the covariance, computed through the
//! observation-space Gram matrix (same non-zero spectrum) so the cost
//! depends on the number of observations rather than the number of mixtures.

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FastIcaParams {
    /// Bound on `max |1 - |diag(W_new W^T)||`, roughly half the squared
    /// rotation per step. Loose bounds stop early near the symmetric saddle.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// log-cosh parameter.
    pub alpha: f64,
}

impl Default for FastIcaParams {
    fn default() -> Self {
        FastIcaParams {
            tolerance: 1e-8,
            max_iterations: 500,
            alpha: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IcaResult {
    /// `components x observations`, zero mean and unit variance per row.
    pub sources: DMatrix<f64>,
    /// `mixtures x components`; centered input ~= mixing * sources.
    pub mixing: DMatrix<f64>,
    /// `components x mixtures`.
    pub unmixing: DMatrix<f64>,
    pub iterations: usize,
}

/// Relative eigenvalue below which a whitened direction is treated as empty.
const RANK_EPS: f64 = 1e-10;

pub fn fast_ica(x: &DMatrix<f64>, components: usize, params: &FastIcaParams, rng: &mut Rng) -> Result<IcaResult> {
    let (k, t) = x.shape();
    if components == 0 || components > k || components >= t {
        return Err(Error::RankDeficient {
            requested: components,
            rank: k.min(t.saturating_sub(1)),
        });
    }
    let mut xc = x.clone();
    for mut row in xc.row_iter_mut() {
        let mean = row.mean();
        row.add_scalar_mut(-mean);
    }

    let tf = t as f64;
    let gram = xc.transpose() * &xc / tf;
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..t).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]];
    let rank = order
        .iter()
        .take_while(|&&i| top > 0.0 && eig.eigenvalues[i] > top * RANK_EPS)
        .count();
    if rank < components {
        return Err(Error::RankDeficient {
            requested: components,
            rank,
        });
    }
    // Observation-space eigenvectors of the leading components, T x c.
    let v = DMatrix::from_fn(t, components, |r, c| eig.eigenvectors[(r, order[c])]);
    let z = v.transpose() * tf.sqrt();

    let mut w = DMatrix::from_fn(components, components, |_, _| StandardNormal.sample(rng));
    w = symmetric_decorrelation(&w);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iterations {
        iterations += 1;
        let wz = &w * &z;
        let g = wz.map(|u| (params.alpha * u).tanh());
        let g_prime_mean: Vec<f64> = g
            .row_iter()
            .map(|row| row.iter().map(|v| params.alpha * (1.0 - v * v)).sum::<f64>() / tf)
            .collect();
        let mut w_next = &g * z.transpose() / tf;
        for i in 0..components {
            for j in 0..components {
                w_next[(i, j)] -= g_prime_mean[i] * w[(i, j)];
            }
        }
        let w_next = symmetric_decorrelation(&w_next);
        let lim = (&w_next * w.transpose())
            .diagonal()
            .iter()
            .map(|d| (d.abs() - 1.0).abs())
            .fold(0.0, f64::max);
        w = w_next;
        if lim < params.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NotConverged { iterations });
    }

    let sources = &w * &z;
    // Columns of the mixing matrix map each source onto the mixtures.
    let mixing = &xc * &v * w.transpose() / tf.sqrt();
    let unmixing = pseudo_inverse(&mixing)?;
    Ok(IcaResult {
        sources,
        mixing,
        unmixing,
        iterations,
    })
}

/// `(W W^T)^(-1/2) W`
pub fn symmetric_decorrelation(w: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(w * w.transpose());
    let inv_sqrt = eig.eigenvalues.map(|l| 1.0 / l.max(f64::MIN_POSITIVE).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&inv_sqrt) * eig.eigenvectors.transpose() * w
}

fn pseudo_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone()
        .pseudo_inverse(1e-12)
        .map_err(|e| Error::Invariant(format!("pseudo-inverse failed: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn decorrelation_is_orthogonal() {
        let mut rng = substream(1, "t", 0);
        let w = DMatrix::from_fn(4, 4, |_, _| StandardNormal.sample(&mut rng));
        let d = symmetric_decorrelation(&w);
        let eye = &d * d.transpose();
        assert!((eye - DMatrix::identity(4, 4)).amax() < 1e-10);
    }

    #[test]
    fn sources_are_white_and_reconstruct() {
        let t = 200;
        let s1: Vec<f64> = (0..t).map(|i| (i as f64 * 0.3).sin()).collect();
        let s2: Vec<f64> = (0..t).map(|i| if (i / 7) % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let x = DMatrix::from_fn(3, t, |r, c| {
            let a = [[1.0, 0.5], [0.3, 2.0], [-0.7, 0.4]];
            a[r][0] * s1[c] + a[r][1] * s2[c]
        });
        let mut rng = substream(3, "t", 0);
        let res = fast_ica(&x, 2, &FastIcaParams::default(), &mut rng).unwrap();
        let cov = &res.sources * res.sources.transpose() / t as f64;
        assert!((cov - DMatrix::identity(2, 2)).amax() < 1e-8);
        let mut xc = x.clone();
        for mut row in xc.row_iter_mut() {
            let m = row.mean();
            row.add_scalar_mut(-m);
        }
        assert!((&res.mixing * &res.sources - &xc).amax() < 1e-8);
        assert!((&res.unmixing * &xc - &res.sources).amax() < 1e-8);
    }

    #[test]
    fn too_many_components_is_rank_deficient() {
        let x = DMatrix::from_fn(2, 50, |r, c| if r == 0 { c as f64 } else { 2.0 * c as f64 });
        let mut rng = substream(0, "t", 0);
        assert!(matches!(
            fast_ica(&x, 2, &FastIcaParams::default(), &mut rng),
            Err(Error::RankDeficient { .. })
        ));
        assert!(matches!(
            fast_ica(&x, 3, &FastIcaParams::default(), &mut rng),
            Err(Error::RankDeficient { .. })
        ));
    }
}
