//! Partitions of the sample support and assignment of samples to regions.
//!
//! Three construction rules are offered: a random grid, a uniform
//! deterministic grid, and a Voronoi partition from weighted k-means. Grid
//! bins are half-open `[lo, hi)` except the last bin in each dimension, which
//! is closed. Points outside the bounding box used at construction fall into
//! the nearest boundary bin.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::WeightedCloud;
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum PartitionRule {
    /// P1: cut points drawn uniformly inside the per-dimension sample range.
    RandomGrid,
    /// P2: equally spaced cut points over the per-dimension sample range.
    #[default]
    UniformGrid,
    /// P3: nearest-centroid cells of a weighted k-means clustering.
    Voronoi,
}

impl PartitionRule {
    pub fn label(self) -> &'static str {
        match self {
            PartitionRule::RandomGrid => "P1",
            PartitionRule::UniformGrid => "P2",
            PartitionRule::Voronoi => "P3",
        }
    }

    /// Accepts `p1`/`p2`/`p3` in any case.
    pub fn from_label(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "p1" => Some(PartitionRule::RandomGrid),
            "p2" => Some(PartitionRule::UniformGrid),
            "p3" => Some(PartitionRule::Voronoi),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KMeansOptions {
    pub max_iterations: usize,
    pub relative_tolerance: f64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self { max_iterations: 50, relative_tolerance: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Layout {
    Grid {
        /// Interior cut points per dimension, sorted.
        cuts: Vec<Vec<f64>>,
        strides: Vec<usize>,
        cells: usize,
    },
    Voronoi {
        centroids: Vec<f64>,
        k: usize,
        /// `(value, centroid index)` sorted, present only for d = 1.
        sorted: Option<Vec<(f64, usize)>>,
    },
}

/// An immutable partition of R^d into disjoint regions.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    rule: PartitionRule,
    dim: usize,
    requested: usize,
    layout: Layout,
    collapsed: bool,
}

/// Index sets `J_m`: the sample indices falling in each region.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexSets {
    sets: Vec<Vec<usize>>,
}

impl IndexSets {
    pub fn from_sets(sets: Vec<Vec<usize>>) -> Self {
        Self { sets }
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn get(&self, m: usize) -> &[usize] {
        &self.sets[m]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.sets.iter().map(Vec::as_slice)
    }

    pub fn counts(&self) -> Vec<usize> {
        self.sets.iter().map(Vec::len).collect()
    }

    pub fn total(&self) -> usize {
        self.sets.iter().map(Vec::len).sum()
    }

    pub fn nonempty(&self) -> usize {
        self.sets.iter().filter(|s| !s.is_empty()).count()
    }
}

/// Per-dimension bin counts whose product is the smallest balanced product
/// `>= m`: every count starts at `floor(m^(1/d))` and leading dimensions are
/// bumped by one until the product reaches `m`.
pub fn balanced_factorization(m: usize, d: usize) -> Vec<usize> {
    if d == 0 {
        return Vec::new();
    }
    let pow = |b: usize| -> u128 { (0..d).fold(1u128, |acc, _| acc.saturating_mul(b as u128)) };
    let mut base = 1usize;
    while pow(base + 1) <= m as u128 {
        base += 1;
    }
    let mut counts = vec![base; d];
    let product = |c: &[usize]| c.iter().fold(1u128, |acc, &x| acc * x as u128);
    let mut i = 0;
    while product(&counts) < m as u128 {
        counts[i] += 1;
        i += 1;
    }
    counts
}

fn check_count(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidRegionCount { requested: m, reason: "at least one region is required" });
    }
    Ok(())
}

fn grid_counts(bounds: &[(f64, f64)], m: usize) -> (Vec<usize>, bool) {
    let live: Vec<usize> = (0..bounds.len()).filter(|&i| bounds[i].1 > bounds[i].0).collect();
    let mut counts = vec![1; bounds.len()];
    if live.is_empty() {
        return (counts, m > 1);
    }
    for (&i, c) in live.iter().zip(balanced_factorization(m, live.len())) {
        counts[i] = c;
    }
    (counts, false)
}

fn grid_layout(cuts: Vec<Vec<f64>>) -> Layout {
    let d = cuts.len();
    let mut strides = vec![1; d];
    for i in (0..d.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * (cuts[i + 1].len() + 1);
    }
    let cells = cuts.iter().map(|c| c.len() + 1).product();
    Layout::Grid { cuts, strides, cells }
}

/// P1 random grid.
pub fn build_random_grid(cloud: &WeightedCloud, m: usize, rng: &mut RngStream) -> Result<Partition> {
    check_count(m)?;
    let bounds = cloud.bounds();
    let (counts, collapsed) = grid_counts(&bounds, m);
    let cuts = bounds
        .iter()
        .zip(&counts)
        .map(|(&(lo, hi), &c)| {
            let mut v: Vec<f64> = (1..c)
                .map(|_| loop {
                    let x = lo + rng.random::<f64>() * (hi - lo);
                    if x > lo && x < hi {
                        break x;
                    }
                })
                .collect();
            v.sort_by(f64::total_cmp);
            v
        })
        .collect();
    Ok(Partition { rule: PartitionRule::RandomGrid, dim: cloud.dim(), requested: m, layout: grid_layout(cuts), collapsed })
}

/// P2 uniform deterministic grid.
pub fn build_uniform_grid(cloud: &WeightedCloud, m: usize) -> Result<Partition> {
    check_count(m)?;
    let bounds = cloud.bounds();
    let (counts, collapsed) = grid_counts(&bounds, m);
    let cuts = bounds
        .iter()
        .zip(&counts)
        .map(|(&(lo, hi), &c)| (1..c).map(|k| lo + (hi - lo) * (k as f64) / (c as f64)).collect())
        .collect();
    Ok(Partition { rule: PartitionRule::UniformGrid, dim: cloud.dim(), requested: m, layout: grid_layout(cuts), collapsed })
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn sorted_centroids(centroids: &[f64], dim: usize) -> Option<Vec<(f64, usize)>> {
    (dim == 1).then(|| {
        let mut s: Vec<(f64, usize)> = centroids.iter().copied().zip(0..).collect();
        s.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        s
    })
}

/// Nearest centroid in one dimension by binary search; ties go to the
/// lowest centroid index.
fn nearest_sorted(sorted: &[(f64, usize)], v: f64) -> usize {
    let pos = sorted.partition_point(|c| c.0 < v);
    let right = (pos < sorted.len()).then(|| sorted[pos]);
    let left = (pos > 0).then(|| {
        let lv = sorted[pos - 1].0;
        sorted[sorted.partition_point(|c| c.0 < lv)]
    });
    match (left, right) {
        (Some(l), Some(r)) => {
            let (dl, dr) = (v - l.0, r.0 - v);
            if dl < dr || (dl == dr && l.1 < r.1) {
                l.1
            } else {
                r.1
            }
        }
        (Some(l), None) => l.1,
        (None, Some(r)) => r.1,
        (None, None) => 0,
    }
}

fn nearest_scan(centroids: &[f64], dim: usize, x: &[f64]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (k, c) in centroids.chunks_exact(dim).enumerate() {
        let d = dist2(c, x);
        if d < best.0 {
            best = (d, k);
        }
    }
    best.1
}

/// P3 Voronoi partition via weighted k-means with k-means++ seeding.
pub fn build_voronoi(cloud: &WeightedCloud, m: usize, rng: &mut RngStream) -> Result<Partition> {
    build_voronoi_with(cloud, m, rng, KMeansOptions::default())
}

pub fn build_voronoi_with(
    cloud: &WeightedCloud,
    m: usize,
    rng: &mut RngStream,
    opts: KMeansOptions,
) -> Result<Partition> {
    check_count(m)?;
    let n = cloud.len();
    let dim = cloud.dim();
    if m > n {
        return Err(Error::InvalidRegionCount { requested: m, reason: "more regions than samples" });
    }
    let w = cloud.normalized()?;
    let centroids = if m == n {
        // Every sample is its own centroid, the k-means fixed point for M = N.
        cloud.samples().to_vec()
    } else {
        lloyd(cloud, w, kmeans_pp_seed(cloud, w, m, rng), m, opts)
    };
    let sorted = sorted_centroids(&centroids, dim);
    Ok(Partition {
        rule: PartitionRule::Voronoi,
        dim,
        requested: m,
        layout: Layout::Voronoi { centroids, k: m, sorted },
        collapsed: false,
    })
}

fn kmeans_pp_seed(cloud: &WeightedCloud, w: &[f64], m: usize, rng: &mut RngStream) -> Vec<f64> {
    let n = cloud.len();
    let dim = cloud.dim();
    let mut chosen = vec![false; n];
    let mut centroids = Vec::with_capacity(m * dim);
    let pick = |probs: &mut dyn Iterator<Item = f64>, total: f64, rng: &mut RngStream| -> Option<usize> {
        if !(total > 0.0) {
            return None;
        }
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut last = None;
        for (i, p) in probs.enumerate() {
            if p > 0.0 {
                acc += p;
                last = Some(i);
                if u < acc {
                    return Some(i);
                }
            }
        }
        last
    };
    let first = pick(&mut w.iter().copied(), 1.0, rng).unwrap_or(0);
    chosen[first] = true;
    centroids.extend_from_slice(cloud.sample(first));
    let mut d2: Vec<f64> = cloud.iter_samples().map(|x| dist2(x, cloud.sample(first))).collect();
    for _ in 1..m {
        let total: f64 = d2.iter().zip(w).map(|(d, wn)| d * wn).sum();
        let next = pick(&mut d2.iter().zip(w).map(|(d, wn)| d * wn), total, rng).unwrap_or_else(|| {
            // No weighted mass away from the current centroids.
            (0..n)
                .filter(|&i| !chosen[i])
                .max_by(|&a, &b| w[a].total_cmp(&w[b]).then(b.cmp(&a)))
                .unwrap_or(0)
        });
        chosen[next] = true;
        let c = cloud.sample(next).to_vec();
        for (di, x) in d2.iter_mut().zip(cloud.iter_samples()) {
            *di = di.min(dist2(x, &c));
        }
        centroids.extend_from_slice(&c);
    }
    centroids
}

fn lloyd(cloud: &WeightedCloud, w: &[f64], mut centroids: Vec<f64>, k: usize, opts: KMeansOptions) -> Vec<f64> {
    let dim = cloud.dim();
    let n = cloud.len();
    let mut label = vec![0usize; n];
    for _ in 0..opts.max_iterations {
        let sorted = sorted_centroids(&centroids, dim);
        for (l, x) in label.iter_mut().zip(cloud.iter_samples()) {
            *l = match &sorted {
                Some(s) => nearest_sorted(s, x[0]),
                None => nearest_scan(&centroids, dim, x),
            };
        }
        let mut sum = vec![0.0; k * dim];
        let mut plain = vec![0.0; k * dim];
        let mut mass = vec![0.0; k];
        let mut members = vec![0usize; k];
        for ((&l, x), &wn) in label.iter().zip(cloud.iter_samples()).zip(w) {
            mass[l] += wn;
            members[l] += 1;
            for j in 0..dim {
                sum[l * dim + j] += wn * x[j];
                plain[l * dim + j] += x[j];
            }
        }
        let mut next = centroids.clone();
        let mut stolen = vec![false; n];
        for c in 0..k {
            let dst = &mut next[c * dim..(c + 1) * dim];
            if members[c] == 0 {
                // Re-seed at the heaviest sample that is not the sole member
                // of its own cluster.
                let donor = (0..n)
                    .filter(|&i| !stolen[i] && members[label[i]] > 1)
                    .max_by(|&a, &b| w[a].total_cmp(&w[b]).then(b.cmp(&a)));
                if let Some(i) = donor {
                    stolen[i] = true;
                    members[label[i]] -= 1;
                    dst.copy_from_slice(cloud.sample(i));
                }
            } else if mass[c] > 0.0 {
                for j in 0..dim {
                    dst[j] = sum[c * dim + j] / mass[c];
                }
            } else {
                for j in 0..dim {
                    dst[j] = plain[c * dim + j] / members[c] as f64;
                }
            }
        }
        let scale = 1.0 + centroids.chunks_exact(dim).map(|c| dist2(c, &vec![0.0; dim]).sqrt()).fold(0.0, f64::max);
        let shift = centroids
            .chunks_exact(dim)
            .zip(next.chunks_exact(dim))
            .map(|(a, b)| dist2(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        if shift <= opts.relative_tolerance * scale {
            break;
        }
    }
    centroids
}

impl Partition {
    pub fn build(rule: PartitionRule, cloud: &WeightedCloud, m: usize, rng: &mut RngStream) -> Result<Self> {
        match rule {
            PartitionRule::RandomGrid => build_random_grid(cloud, m, rng),
            PartitionRule::UniformGrid => build_uniform_grid(cloud, m),
            PartitionRule::Voronoi => build_voronoi(cloud, m, rng),
        }
    }

    pub fn rule(&self) -> PartitionRule {
        self.rule
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn requested(&self) -> usize {
        self.requested
    }

    /// True when every dimension had zero range and more than one region was
    /// requested, so the grid collapsed to a single cell.
    pub fn collapsed(&self) -> bool {
        self.collapsed
    }

    /// Total number of regions, including cells that may end up empty.
    pub fn region_count(&self) -> usize {
        match &self.layout {
            Layout::Grid { cells, .. } => *cells,
            Layout::Voronoi { k, .. } => *k,
        }
    }

    /// Per-dimension bin counts (grids only).
    pub fn bins_per_dim(&self) -> Option<Vec<usize>> {
        match &self.layout {
            Layout::Grid { cuts, .. } => Some(cuts.iter().map(|c| c.len() + 1).collect()),
            Layout::Voronoi { .. } => None,
        }
    }

    /// Interior cut points of dimension `i` (grids only).
    pub fn cuts(&self, i: usize) -> Option<&[f64]> {
        match &self.layout {
            Layout::Grid { cuts, .. } => cuts.get(i).map(Vec::as_slice),
            Layout::Voronoi { .. } => None,
        }
    }

    pub fn centroids(&self) -> Option<&[f64]> {
        match &self.layout {
            Layout::Voronoi { centroids, .. } => Some(centroids),
            Layout::Grid { .. } => None,
        }
    }

    /// Region containing `x`.
    pub fn region_of(&self, x: &[f64]) -> usize {
        match &self.layout {
            Layout::Grid { cuts, strides, .. } => cuts
                .iter()
                .zip(strides)
                .zip(x)
                .map(|((c, s), &v)| c.partition_point(|&e| e <= v) * s)
                .sum(),
            Layout::Voronoi { centroids, sorted, .. } => match sorted {
                Some(s) => nearest_sorted(s, x[0]),
                None => nearest_scan(centroids, self.dim, x),
            },
        }
    }

    pub fn assign(&self, cloud: &WeightedCloud) -> Result<IndexSets> {
        if cloud.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: cloud.dim() });
        }
        let mut sets = vec![Vec::new(); self.region_count()];
        for (n, x) in cloud.iter_samples().enumerate() {
            sets[self.region_of(x)].push(n);
        }
        Ok(IndexSets { sets })
    }
}

pub fn assign(partition: &Partition, cloud: &WeightedCloud) -> Result<IndexSets> {
    partition.assign(cloud)
}
