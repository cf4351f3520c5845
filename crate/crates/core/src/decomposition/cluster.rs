use std::collections::VecDeque;

use crate::pipeline::{median_sorted, ClusterParams};
use crate::scene::Gaussian3D;
use crate::spatial::PointIndex;
use crate::{Error, Real, Result};

/// Labels after the per-cluster vote; `clusters[i]` is `None` for noise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grouping {
    pub labels: Vec<bool>,
    pub clusters: Vec<Option<usize>>,
    pub cluster_count: usize,
}

/// Density clustering over `[position / scale ; λ_f · feature]`. Returns the
/// cluster id per point (`None` for noise) and the cluster count.
pub fn dbscan<T: Real>(gaussians: &[Gaussian3D<T>], center: [T; 3], scale: T, params: &ClusterParams) -> Result<(Vec<Option<usize>>, usize)> {
    let n = gaussians.len();
    if n == 0 {
        return Ok((Vec::new(), 0));
    }
    let inv = 1.0 / scale.as_f64();
    let pos: Vec<[f64; 3]> = gaussians
        .iter()
        .map(|g| std::array::from_fn(|k| (g.position[k] - center[k]).as_f64() * inv))
        .collect();
    if pos.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite Gaussian position"));
    }
    let lf = params.feature_weight;
    let feat: Vec<Vec<f64>> = gaussians.iter().map(|g| g.feature.iter().map(|v| v.as_f64() * lf).collect()).collect();

    let index = PointIndex::new(&pos);
    let mut nn: Vec<f64> = pos.iter().map(|p| index.nearest_distances(p, 2).get(1).copied().unwrap_or(0.0)).collect();
    nn.sort_by(f64::total_cmp);
    let eps = params.eps_factor * median_sorted(&nn);
    let eps2 = eps * eps;

    // Spatial candidates first; the feature term only adds distance.
    let neighbors = |i: usize| -> Vec<usize> {
        index
            .within(&pos[i], eps2)
            .into_iter()
            .filter(|&j| {
                let dp = nb_dist2(&pos[i], &pos[j]);
                let df: f64 = feat[i].iter().zip(&feat[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                dp + df <= eps2
            })
            .collect()
    };

    let mut cluster: Vec<Option<usize>> = vec![None; n];
    let mut visited = vec![false; n];
    let mut count = 0;
    for i in 0..n {
        if visited[i] {
            continue;
        }
        visited[i] = true;
        let nb = neighbors(i);
        if nb.len() < params.min_pts {
            continue;
        }
        let id = count;
        count += 1;
        cluster[i] = Some(id);
        let mut queue: VecDeque<usize> = nb.into_iter().collect();
        while let Some(j) = queue.pop_front() {
            if cluster[j].is_none() {
                cluster[j] = Some(id);
            }
            if visited[j] {
                continue;
            }
            visited[j] = true;
            let nj = neighbors(j);
            if nj.len() >= params.min_pts {
                queue.extend(nj.into_iter().filter(|&k| !visited[k] || cluster[k].is_none()));
            }
        }
    }
    Ok((cluster, count))
}

fn nb_dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

/// Whole-cluster majority vote: a cluster whose dynamic fraction exceeds the
/// vote threshold turns fully dynamic, otherwise fully static. Noise keeps
/// its label.
pub fn vote(labels: &[bool], clusters: &[Option<usize>], cluster_count: usize, threshold: f64) -> Vec<bool> {
    let mut dynamic = vec![0usize; cluster_count];
    let mut size = vec![0usize; cluster_count];
    for (l, c) in labels.iter().zip(clusters) {
        if let Some(c) = c {
            size[*c] += 1;
            dynamic[*c] += usize::from(*l);
        }
    }
    labels
        .iter()
        .zip(clusters)
        .map(|(&l, c)| match c {
            Some(c) => dynamic[*c] as f64 / size[*c] as f64 > threshold,
            None => l,
        })
        .collect()
}

/// Clusters the Gaussians and applies the majority vote to `labels`
/// (`true` = dynamic).
pub fn cluster_group<T: Real>(gaussians: &[Gaussian3D<T>], labels: &[bool], center: [T; 3], scale: T, params: &ClusterParams) -> Result<Grouping> {
    if labels.len() != gaussians.len() {
        return Err(Error::invalid("one label per Gaussian required"));
    }
    if gaussians.is_empty() {
        return Err(Error::invalid("cannot group an empty Gaussian set"));
    }
    let (clusters, cluster_count) = dbscan(gaussians, center, scale, params)?;
    Ok(Grouping {
        labels: vote(labels, &clusters, cluster_count, params.vote_threshold),
        clusters,
        cluster_count,
    })
}
