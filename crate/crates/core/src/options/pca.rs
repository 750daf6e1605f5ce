use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_SWEEPS: usize = 100;

/// Eigenvalues (descending) and matching unit eigenvectors of a symmetric matrix,
/// each eigenvector oriented so its largest-magnitude component is positive.
pub fn symmetric_eigen(matrix: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(i == j)).collect()).collect();
    for _ in 0..JACOBI_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off < JACOBI_TOL {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                let (row_p, row_q) = (a[p].clone(), a[q].clone());
                for (k, (apk, aqk)) in row_p.into_iter().zip(row_q).enumerate() {
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order
        .iter()
        .map(|&i| {
            let mut e: Vec<f64> = v.iter().map(|row| row[i]).collect();
            let lead = e
                .iter()
                .copied()
                .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if lead < 0.0 {
                e.iter_mut().for_each(|x| *x = -*x);
            }
            e
        })
        .collect();
    (values, vectors)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub points: Vec<[f64; 2]>,
    /// Share of total variance along each output axis.
    pub explained: [f64; 2],
    /// `true` when the input was already 2-D and only centered.
    pub passthrough: bool,
}

/// Centers `points` and projects onto the two leading principal axes. 2-D input
/// is only centered.
pub fn pca_project(points: &[Vec<f64>]) -> Result<Projection> {
    let n = points.len();
    if n == 0 {
        return Err(Error::Degenerate("PCA of an empty dataset".into()));
    }
    let d = points[0].len();
    if d < 2 {
        return Err(Error::Usage(format!("PCA needs d >= 2, got {d}")));
    }
    if points.iter().any(|p| p.len() != d) {
        return Err(Error::Shape("points have mixed dimensions".into()));
    }
    let mean: Vec<f64> = (0..d)
        .map(|j| points.iter().map(|p| p[j]).sum::<f64>() / n as f64)
        .collect();
    let centered: Vec<Vec<f64>> = points
        .iter()
        .map(|p| p.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    let mut cov = vec![vec![0.0; d]; d];
    for p in &centered {
        for i in 0..d {
            for j in 0..d {
                cov[i][j] += p[i] * p[j];
            }
        }
    }
    for row in cov.iter_mut() {
        for c in row.iter_mut() {
            *c /= n as f64;
        }
    }
    let total: f64 = (0..d).map(|i| cov[i][i]).sum();
    if total <= 0.0 {
        return Err(Error::Degenerate("all latent dimensions have zero variance".into()));
    }
    let (values, vectors) = symmetric_eigen(&cov);
    let explained = [values[0].max(0.0) / total, values[1].max(0.0) / total];
    if d == 2 {
        return Ok(Projection {
            points: centered.iter().map(|p| [p[0], p[1]]).collect(),
            explained,
            passthrough: true,
        });
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    Ok(Projection {
        points: centered
            .iter()
            .map(|p| [dot(p, &vectors[0]), dot(p, &vectors[1])])
            .collect(),
        explained,
        passthrough: false,
    })
}
