//! Comparison methods: a think-time cutoff, single-linkage clustering of
//! index vectors with knee detection, and the majority class.

use chrono::Duration;

use crate::error::{Error, Result};
use crate::label::Label;
use crate::workload::Workload;

/// SEGMENT when the gap to the predecessor exceeds `gap_minutes` (strictly).
/// First queries of sessions are SEGMENT.
pub fn timestamp_segment(workload: &Workload, gap_minutes: i64) -> Result<Vec<Label>> {
    let limit = Duration::minutes(gap_minutes);
    let mut out = Vec::with_capacity(workload.num_queries());
    for session in &workload.sessions {
        for (i, q) in session.queries.iter().enumerate() {
            if i == 0 {
                out.push(Label::Segment);
                continue;
            }
            let prev = &session.queries[i - 1];
            let (Some(t), Some(p)) = (q.timestamp, prev.timestamp) else {
                let id = if q.timestamp.is_none() { &q.query_id } else { &prev.query_id };
                return Err(Error::missing(id, "timestamp"));
            };
            out.push(Label::from_bool(t - p > limit));
        }
    }
    Ok(out)
}

/// Never predicts SEGMENT.
pub fn majority_class_baseline(workload: &Workload) -> Vec<Label> {
    vec![Label::Continue; workload.num_queries()]
}

fn euclid(a: &[f64; 5], b: &[f64; 5]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Single-linkage dendrogram as (merge distance, a, b) edges of the minimum
/// spanning tree, sorted by distance. Prim's algorithm, O(n²) time, O(n) memory.
pub fn single_linkage(points: &[[f64; 5]]) -> Vec<(f64, usize, usize)> {
    let n = points.len();
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![0usize; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = usize::MAX;
        let mut next_d = f64::INFINITY;
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            let d = euclid(&points[current], &points[j]);
            if d < best[j] {
                best[j] = d;
                parent[j] = current;
            }
            if best[j] < next_d || next == usize::MAX {
                next_d = best[j];
                next = j;
            }
        }
        in_tree[next] = true;
        edges.push((next_d, parent[next], next));
        current = next;
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    edges
}

/// Number of merges to perform, at the point of the ascending merge-distance
/// curve farthest from the chord joining its endpoints. A flat curve merges
/// everything.
pub fn knee_merges(distances: &[f64]) -> usize {
    let m = distances.len();
    if m < 2 {
        return m;
    }
    let (x0, y0) = (0.0, distances[0]);
    let (x1, y1) = ((m - 1) as f64, distances[m - 1]);
    let (dx, dy) = (x1 - x0, y1 - y0);
    let len = (dx * dx + dy * dy).sqrt();
    let mut best = 0.0;
    let mut knee = None;
    for (i, &y) in distances.iter().enumerate() {
        let d = (dy * (i as f64 - x0) - dx * (y - y0)).abs() / len;
        if d > best + 1e-12 {
            best = d;
            knee = Some(i);
        }
    }
    match knee {
        // merges up to and including the knee point are kept
        Some(i) => i + 1,
        None => m,
    }
}

/// Cluster id per point after cutting the dendrogram at the knee.
pub fn cluster_points(points: &[[f64; 5]]) -> Vec<usize> {
    let edges = single_linkage(points);
    let dists: Vec<f64> = edges.iter().map(|e| e.0).collect();
    let merges = knee_merges(&dists);
    let mut uf: Vec<usize> = (0..points.len()).collect();
    fn find(uf: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while uf[r] != r {
            r = uf[r];
        }
        let mut x = x;
        while uf[x] != r {
            let nx = uf[x];
            uf[x] = r;
            x = nx;
        }
        r
    }
    for &(_, a, b) in &edges[..merges] {
        let (ra, rb) = (find(&mut uf, a), find(&mut uf, b));
        if ra != rb {
            uf[ra.max(rb)] = ra.min(rb);
        }
    }
    (0..points.len()).map(|i| find(&mut uf, i)).collect()
}

/// SEGMENT when a query's cluster differs from its predecessor's; first
/// queries of sessions are SEGMENT. Clusters are computed over the whole
/// workload. With fewer than 3 queries only first queries are SEGMENT.
pub fn clustering_segment(workload: &Workload) -> Result<Vec<Label>> {
    let points: Vec<[f64; 5]> = workload
        .queries()
        .map(|q| {
            q.indexes
                .map(|ix| ix.to_array())
                .ok_or_else(|| Error::missing(&q.query_id, "indexes"))
        })
        .collect::<Result<_>>()?;
    let clusters = if points.len() < 3 {
        vec![0; points.len()]
    } else {
        cluster_points(&points)
    };
    let mut out = Vec::with_capacity(points.len());
    let mut k = 0;
    for session in &workload.sessions {
        for i in 0..session.queries.len() {
            out.push(Label::from_bool(i == 0 || clusters[k] != clusters[k - 1]));
            k += 1;
        }
    }
    Ok(out)
}
