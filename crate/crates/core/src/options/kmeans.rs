use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nnkit::Rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KmeansParams {
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for KmeansParams {
    fn default() -> Self {
        KmeansParams {
            restarts: 20,
            max_iter: 300,
            tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    pub inertia: f64,
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid; ties go to the lowest index.
pub fn nearest(centroids: &[Vec<f64>], p: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(c, p);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

pub fn inertia(points: &[Vec<f64>], centroids: &[Vec<f64>], assignment: &[usize]) -> f64 {
    points
        .iter()
        .zip(assignment)
        .map(|(p, &a)| sq_dist(p, &centroids[a]))
        .sum()
}

fn check(points: &[Vec<f64>], k: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::Usage("k must be positive".into()));
    }
    if points.len() < k {
        return Err(Error::Usage(format!(
            "k-means needs at least k = {k} records, got {}",
            points.len()
        )));
    }
    let d = points[0].len();
    if points.iter().any(|p| p.len() != d) {
        return Err(Error::Shape("points have mixed dimensions".into()));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            node: "kmeans.input".into(),
        });
    }
    Ok(d)
}

fn plus_plus_seed(points: &[Vec<f64>], k: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.below(points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.uniform() * total;
            let mut chosen = d2.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            while d2[chosen] == 0.0 {
                chosen -= 1;
            }
            chosen
        } else {
            rng.below(points.len())
        };
        let c = points[idx].clone();
        for (p, d) in points.iter().zip(d2.iter_mut()) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn assign_all(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> Vec<usize> {
    points.iter().map(|p| nearest(centroids, p)).collect()
}

/// Gives every empty cluster the point farthest from its current centroid.
fn repair_empty(points: &[Vec<f64>], centroids: &mut [Vec<f64>], assignment: &mut [usize]) {
    let k = centroids.len();
    loop {
        let mut counts = vec![0usize; k];
        for &a in assignment.iter() {
            counts[a] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let mut far = None;
        let mut far_d = -1.0;
        for (i, p) in points.iter().enumerate() {
            if counts[assignment[i]] < 2 {
                continue;
            }
            let d = sq_dist(p, &centroids[assignment[i]]);
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        let i = far.expect("k <= number of points");
        assignment[i] = empty;
        centroids[empty] = points[i].clone();
    }
}

fn means(points: &[Vec<f64>], assignment: &[usize], k: usize, d: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignment) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(p) {
            *s += v;
        }
    }
    for (s, &n) in sums.iter_mut().zip(&counts) {
        for v in s.iter_mut() {
            *v /= n as f64;
        }
    }
    sums
}

fn lloyd(points: &[Vec<f64>], k: usize, d: usize, params: &KmeansParams, rng: &mut Rng) -> ClusterModel {
    let mut centroids = plus_plus_seed(points, k, rng);
    let mut prev = f64::INFINITY;
    for _ in 0..params.max_iter {
        let mut assignment = assign_all(points, &centroids);
        repair_empty(points, &mut centroids, &mut assignment);
        let current = inertia(points, &centroids, &assignment);
        assert!(
            current <= prev + 1e-9 * (1.0 + prev.abs()),
            "k-means inertia increased from {prev} to {current}"
        );
        prev = current;
        let next = means(points, &assignment, k, d);
        let moved = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        if moved < params.tol {
            break;
        }
    }
    let assignment = assign_all(points, &centroids);
    let inertia = inertia(points, &centroids, &assignment);
    ClusterModel {
        k,
        centroids,
        assignment,
        inertia,
    }
}

/// Best of `params.restarts` k-means++ / Lloyd runs. Restart `r` draws from the
/// stream `rng.derive_indexed("kmeans", r)`, so the result does not depend on
/// scheduling; ties in inertia go to the lowest restart index.
pub fn kmeans_with(points: &[Vec<f64>], k: usize, params: &KmeansParams, rng: &Rng) -> Result<ClusterModel> {
    let d = check(points, k)?;
    if params.restarts == 0 {
        return Err(Error::Usage("k-means needs at least one restart".into()));
    }
    let runs: Vec<ClusterModel> = (0..params.restarts)
        .into_par_iter()
        .map(|r| lloyd(points, k, d, params, &mut rng.derive_indexed("kmeans", r as u64)))
        .collect();
    let mut best = 0;
    for (i, m) in runs.iter().enumerate() {
        if m.inertia < runs[best].inertia {
            best = i;
        }
    }
    Ok(runs.into_iter().nth(best).expect("at least one restart"))
}

pub fn kmeans(points: &[Vec<f64>], k: usize, rng: &Rng) -> Result<ClusterModel> {
    kmeans_with(points, k, &KmeansParams::default(), rng)
}

/// Mean silhouette `(b - a) / max(a, b)`; members of singleton clusters count 0.
pub fn silhouette(points: &[Vec<f64>], assignment: &[usize], k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::Usage("silhouette needs k >= 2".into()));
    }
    if points.len() != assignment.len() || points.is_empty() {
        return Err(Error::Shape("silhouette: points and assignment differ in length".into()));
    }
    let mut sizes = vec![0usize; k];
    for &a in assignment {
        sizes[a] += 1;
    }
    let total: f64 = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let own = assignment[i];
            if sizes[own] < 2 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            for (j, q) in points.iter().enumerate() {
                if j != i {
                    sums[assignment[j]] += sq_dist(&points[i], q).sqrt();
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own && sizes[c] > 0)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            if !b.is_finite() {
                return 0.0;
            }
            let m = a.max(b);
            if m == 0.0 {
                0.0
            } else {
                (b - a) / m
            }
        })
        .sum();
    Ok(total / points.len() as f64)
}

/// Silhouette-maximizing k over `range` (ties to the smaller k), with the score
/// of every candidate.
pub fn choose_k(
    points: &[Vec<f64>],
    range: std::ops::RangeInclusive<usize>,
    rng: &Rng,
) -> Result<(usize, Vec<(usize, f64)>)> {
    let mut scores = Vec::new();
    for k in range {
        if k < 2 || k > points.len() {
            continue;
        }
        let m = kmeans(points, k, rng)?;
        scores.push((k, silhouette(points, &m.assignment, k)?));
    }
    let mut best: Option<(usize, f64)> = None;
    for &(k, s) in &scores {
        if best.is_none_or(|(_, bs)| s > bs) {
            best = Some((k, s));
        }
    }
    best.map(|(k, _)| (k, scores.clone()))
        .ok_or_else(|| Error::Usage("no feasible k in range".into()))
}
