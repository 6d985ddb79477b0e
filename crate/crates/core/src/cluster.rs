//! Genre complexity profiles and their agglomerative clustering.
//!
//! Leaves are always ordered by genre label, so node `i < n` is the i-th
//! genre alphabetically and merge `m` creates node `n + m`. This makes the
//! tree independent of input order.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::infotheory::ComplexityProfile;

pub type Point = [f64; 4];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenreProfile {
    pub genre: String,
    pub song_count: usize,
    /// Mean bits per feature in pitch, loudness, timbre, rhythm order.
    pub mean_profile: Point,
}

/// Per-genre feature means over genres with more than `min_songs` songs.
/// Each feature mean uses only the songs where that feature is present;
/// genres missing a feature entirely are dropped.
pub fn genre_profiles<'a, I>(profiles: I, min_songs: usize) -> Vec<GenreProfile>
where
    I: IntoIterator<Item = (&'a str, &'a ComplexityProfile)>,
{
    let mut acc: BTreeMap<&str, (usize, [f64; 4], [usize; 4])> = BTreeMap::new();
    for (genre, profile) in profiles {
        let entry = acc.entry(genre).or_insert((0, [0.0; 4], [0; 4]));
        entry.0 += 1;
        for (i, v) in profile.as_array().into_iter().enumerate() {
            if let Some(v) = v {
                entry.1[i] += v;
                entry.2[i] += 1;
            }
        }
    }
    acc.into_iter()
        .filter(|(_, (count, _, present))| *count > min_songs && present.iter().all(|&p| p > 0))
        .map(|(genre, (count, sums, present))| GenreProfile {
            genre: genre.to_string(),
            song_count: count,
            mean_profile: std::array::from_fn(|i| sums[i] / present[i] as f64),
        })
        .collect()
}

/// Rescales each coordinate to zero mean and unit (population) variance;
/// constant coordinates become 0.
pub fn standardize(points: &[Point]) -> Vec<Point> {
    let n = points.len() as f64;
    let mut out = points.to_vec();
    for d in 0..4 {
        let mean = points.iter().map(|p| p[d]).sum::<f64>() / n;
        let sd = (points.iter().map(|p| (p[d] - mean).powi(2)).sum::<f64>() / n).sqrt();
        for p in out.iter_mut() {
            p[d] = if sd > 0.0 { (p[d] - mean) / sd } else { 0.0 };
        }
    }
    out
}

pub fn euclidean(a: &Point, b: &Point) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    #[default]
    Average,
    Complete,
    Single,
}

impl FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" => Ok(Linkage::Average),
            "complete" => Ok(Linkage::Complete),
            "single" => Ok(Linkage::Single),
            other => Err(Error::InvalidArgument(format!("unknown linkage {other:?}"))),
        }
    }
}

impl Linkage {
    pub fn name(self) -> &'static str {
        match self {
            Linkage::Average => "average",
            Linkage::Complete => "complete",
            Linkage::Single => "single",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterTree {
    pub leaves: Vec<String>,
    pub merges: Vec<Merge>,
}

/// Agglomerative clustering of genre mean profiles under Euclidean distance.
/// Equal-distance candidates are ordered by the pair of their smallest
/// member labels.
pub fn agglomerate(profiles: &[GenreProfile], linkage: Linkage, standardized: bool) -> Result<ClusterTree> {
    if profiles.len() < 2 {
        return Err(Error::InvalidArgument("clustering needs at least 2 profiles".into()));
    }
    let mut sorted: Vec<&GenreProfile> = profiles.iter().collect();
    sorted.sort_by(|a, b| a.genre.cmp(&b.genre));
    let mut points: Vec<Point> = sorted.iter().map(|p| p.mean_profile).collect();
    if standardized {
        points = standardize(&points);
    }
    let leaves = sorted.iter().map(|p| p.genre.clone()).collect();
    Ok(ClusterTree { leaves, merges: agglomerate_points(&points, linkage) })
}

/// Merge list for raw points in the given leaf order.
pub fn agglomerate_points(points: &[Point], linkage: Linkage) -> Vec<Merge> {
    let n = points.len();
    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = euclidean(&points[i], &points[j]);
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    // Active clusters: (node id, size, smallest leaf index). Slot i of
    // `dist` tracks cluster `active[i]`.
    let mut active: Vec<Option<(usize, usize, usize)>> = (0..n).map(|i| Some((i, 1, i))).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for m in 0..n.saturating_sub(1) {
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for i in 0..n {
            let Some((_, _, mi)) = active[i] else { continue };
            for j in (i + 1)..n {
                let Some((_, _, mj)) = active[j] else { continue };
                let key = (mi.min(mj), mi.max(mj));
                let d = dist[i][j];
                let better = match best {
                    None => true,
                    Some((bd, bkey, _, _)) => d < bd || (d == bd && key < bkey),
                };
                if better {
                    best = Some((d, key, i, j));
                }
            }
        }
        let (height, _, i, j) = best.expect("at least two active clusters");
        let (ni, si, mi) = active[i].unwrap();
        let (nj, sj, mj) = active[j].unwrap();
        let (left, right) = if mi < mj { (ni, nj) } else { (nj, ni) };
        merges.push(Merge { left, right, height });
        for k in 0..n {
            if k == i || k == j || active[k].is_none() {
                continue;
            }
            let (dki, dkj) = (dist[k][i], dist[k][j]);
            let d = match linkage {
                Linkage::Single => dki.min(dkj),
                Linkage::Complete => dki.max(dkj),
                Linkage::Average => (si as f64 * dki + sj as f64 * dkj) / (si + sj) as f64,
            };
            dist[k][i] = d;
            dist[i][k] = d;
        }
        active[i] = Some((n + m, si + sj, mi.min(mj)));
        active[j] = None;
    }
    merges
}

/// Community of each leaf after undoing the last `k - 1` merges. Community
/// ids are numbered by first appearance in leaf order.
pub fn cut_assignment(n_leaves: usize, merges: &[Merge], k: usize) -> Result<Vec<usize>> {
    if k < 1 || k > n_leaves {
        return Err(Error::InvalidArgument(format!("cannot cut {n_leaves} leaves into {k} communities")));
    }
    // union-find over node ids, applying the first n - k merges
    let total = n_leaves + merges.len();
    let mut parent: Vec<usize> = (0..total).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (m, merge) in merges.iter().take(n_leaves - k).enumerate() {
        let node = n_leaves + m;
        let l = find(&mut parent, merge.left);
        let r = find(&mut parent, merge.right);
        parent[l] = node;
        parent[r] = node;
    }
    let mut ids: BTreeMap<usize, usize> = BTreeMap::new();
    let mut assignment = Vec::with_capacity(n_leaves);
    for leaf in 0..n_leaves {
        let root = find(&mut parent, leaf);
        let next = ids.len();
        assignment.push(*ids.entry(root).or_insert(next));
    }
    Ok(assignment)
}

/// Mean silhouette width; points alone in their community score 0.
pub fn silhouette(points: &[Point], assignment: &[usize]) -> Result<f64> {
    if points.len() != assignment.len() || points.is_empty() {
        return Err(Error::InvalidArgument("one community label per point required".into()));
    }
    let k = assignment.iter().max().unwrap() + 1;
    let mut sizes = vec![0usize; k];
    for &c in assignment {
        sizes[c] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::InvalidArgument("silhouette needs at least 2 communities".into()));
    }
    let mut total = 0.0;
    for (i, p) in points.iter().enumerate() {
        let own = assignment[i];
        if sizes[own] == 1 {
            continue;
        }
        let mut sums = vec![0.0; k];
        for (j, q) in points.iter().enumerate() {
            if i != j {
                sums[assignment[j]] += euclidean(p, q);
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / points.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cut {
    pub k: usize,
    pub silhouette: f64,
    pub assignment: Vec<usize>,
    /// Silhouette of every k tried.
    pub scores: Vec<(usize, f64)>,
}

/// The k in `k_range` whose cut maximizes the silhouette of `points`
/// (smallest k on ties). `points` must follow the tree's leaf order.
pub fn cut_tree(
    tree: &ClusterTree,
    points: &[Point],
    k_range: std::ops::RangeInclusive<usize>,
) -> Result<Cut> {
    let n = tree.leaves.len();
    let (lo, hi) = (*k_range.start(), *k_range.end());
    if lo < 2 || hi > n || lo > hi {
        return Err(Error::InvalidArgument(format!("k range {lo}..={hi} invalid for {n} leaves")));
    }
    if points.len() != n {
        return Err(Error::InvalidArgument("one point per leaf required".into()));
    }
    let mut best: Option<Cut> = None;
    let mut scores = Vec::new();
    for k in lo..=hi {
        let assignment = cut_assignment(n, &tree.merges, k)?;
        let s = silhouette(points, &assignment)?;
        scores.push((k, s));
        if best.as_ref().is_none_or(|b| s > b.silhouette) {
            best = Some(Cut { k, silhouette: s, assignment, scores: Vec::new() });
        }
    }
    let mut best = best.unwrap();
    best.scores = scores;
    Ok(best)
}

/// Default search range: 2 up to one fewer than the leaves (the all-singleton
/// cut always scores 0).
pub fn default_k_range(n_leaves: usize) -> std::ops::RangeInclusive<usize> {
    2..=n_leaves.saturating_sub(1).max(2)
}

impl ClusterTree {
    /// Newick text with branch lengths as height differences.
    pub fn to_newick(&self) -> String {
        let n = self.leaves.len();
        let height = |node: usize| if node < n { 0.0 } else { self.merges[node - n].height };
        fn render(tree: &ClusterTree, node: usize, n: usize, height: &dyn Fn(usize) -> f64) -> String {
            if node < n {
                return escape_newick(&tree.leaves[node]);
            }
            let m = tree.merges[node - n];
            let h = m.height;
            format!(
                "({}:{},{}:{})",
                render(tree, m.left, n, height),
                h - height(m.left),
                render(tree, m.right, n, height),
                h - height(m.right)
            )
        }
        if self.merges.is_empty() {
            return format!("{};", self.leaves.first().map(|l| escape_newick(l)).unwrap_or_default());
        }
        format!("{};", render(self, n + self.merges.len() - 1, n, &height))
    }
}

fn escape_newick(label: &str) -> String {
    if label.chars().any(|c| "()[]':;, \t".contains(c)) {
        format!("'{}'", label.replace('\'', "''"))
    } else {
        label.to_string()
    }
}
