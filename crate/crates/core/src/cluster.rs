//! Ward-linkage agglomerative clustering and silhouette scores.

/// One merge of the dendrogram. Leaves are `0..n`; the cluster formed by
/// merge `m` has id `n + m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub leaves: usize,
    pub merges: Vec<Merge>,
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn distance_matrix(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = euclidean(&rows[i], &rows[j]);
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

/// Ward linkage through the Lance-Williams recurrence. O(n^3), fine for the
/// few dozen rows a breathing profile has.
pub fn ward_linkage(rows: &[Vec<f64>]) -> Dendrogram {
    let n = rows.len();
    let mut dist = distance_matrix(rows);
    let mut size = vec![1usize; n];
    let mut id: Vec<usize> = (0..n).collect();
    let mut active: Vec<bool> = vec![true; n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for m in 0..n.saturating_sub(1) {
        let mut best = (usize::MAX, usize::MAX, f64::INFINITY);
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in i + 1..n {
                if active[j] && dist[i][j] < best.2 {
                    best = (i, j, dist[i][j]);
                }
            }
        }
        let (i, j, h) = best;
        let (ni, nj) = (size[i] as f64, size[j] as f64);
        for k in 0..n {
            if !active[k] || k == i || k == j {
                continue;
            }
            let nk = size[k] as f64;
            let d2 = ((ni + nk) * dist[i][k].powi(2) + (nj + nk) * dist[j][k].powi(2) - nk * h * h)
                / (ni + nj + nk);
            let d = d2.max(0.0).sqrt();
            dist[i][k] = d;
            dist[k][i] = d;
        }
        let (a, b) = (id[i].min(id[j]), id[i].max(id[j]));
        size[i] += size[j];
        active[j] = false;
        id[i] = n + m;
        merges.push(Merge {
            a,
            b,
            height: h,
            size: size[i],
        });
    }
    Dendrogram { leaves: n, merges }
}

impl Dendrogram {
    /// Flat labels `0..k` from undoing the last `k - 1` merges. Labels are
    /// numbered by first appearance in leaf order.
    pub fn cut(&self, k: usize) -> Vec<usize> {
        let n = self.leaves;
        let k = k.clamp(1.min(n), n);
        // Union-find over the first n - k merges.
        let mut parent: Vec<usize> = (0..2 * n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (m, merge) in self.merges.iter().take(n - k).enumerate() {
            let node = n + m;
            let ra = find(&mut parent, merge.a);
            let rb = find(&mut parent, merge.b);
            parent[ra] = node;
            parent[rb] = node;
        }
        let mut labels = vec![usize::MAX; n];
        let mut map = std::collections::HashMap::new();
        for (leaf, label) in labels.iter_mut().enumerate() {
            let root = find(&mut parent, leaf);
            let next = map.len();
            *label = *map.entry(root).or_insert(next);
        }
        labels
    }
}

fn ordered_sum(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs.into_iter().sum()
}

/// Mean silhouette coefficient. Members of singleton clusters score 0.
///
/// Sums are taken in sorted order so the score does not depend on the
/// order of the rows.
pub fn silhouette(dist: &[Vec<f64>], labels: &[usize]) -> f64 {
    let n = labels.len();
    if n == 0 {
        return 0.0;
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    let mut scores = Vec::with_capacity(n);
    for i in 0..n {
        let own = labels[i];
        if sizes[own] <= 1 {
            scores.push(0.0);
            continue;
        }
        let mut per_cluster: Vec<Vec<f64>> = vec![Vec::new(); k];
        for j in 0..n {
            if j != i {
                per_cluster[labels[j]].push(dist[i][j]);
            }
        }
        let a = ordered_sum(std::mem::take(&mut per_cluster[own])) / (sizes[own] - 1) as f64;
        let b = per_cluster
            .into_iter()
            .enumerate()
            .filter(|(c, ds)| *c != own && !ds.is_empty())
            .map(|(_, ds)| {
                let len = ds.len() as f64;
                ordered_sum(ds) / len
            })
            .fold(f64::INFINITY, f64::min);
        let s = if !b.is_finite() {
            0.0
        } else {
            let m = a.max(b);
            if m > 0.0 {
                (b - a) / m
            } else {
                0.0
            }
        };
        scores.push(s);
    }
    ordered_sum(scores) / n as f64
}
