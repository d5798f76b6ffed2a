//! Seeded k-means with greedy farthest/weighted initialisation, plus the
//! compactness-ratio rule for choosing k.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct KMeans {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    /// Sum of squared distances of samples to their assigned center.
    pub compactness: f64,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd iterations from the given starting centers.
fn lloyd(data: &[f64], dim: usize, mut centers: Vec<Vec<f64>>) -> KMeans {
    let n = data.len() / dim;
    let point = |i: usize| &data[i * dim..(i + 1) * dim];
    let mut assignments = vec![0usize; n];
    for _ in 0..100 {
        let mut changed = false;
        for i in 0..n {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let d = dist2(point(i), center);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; dim]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for i in 0..n {
            counts[assignments[i]] += 1;
            for d in 0..dim {
                sums[assignments[i]][d] += point(i)[d];
            }
        }
        for (c, center) in centers.iter_mut().enumerate() {
            if counts[c] > 0 {
                for d in 0..dim {
                    center[d] = sums[c][d] / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let compactness = (0..n)
        .map(|i| dist2(point(i), &centers[assignments[i]]))
        .sum();
    KMeans {
        k: centers.len(),
        assignments,
        centers,
        compactness,
    }
}

/// k-means from weighted (k-means++ style) seeding. `data` is row-major
/// with `dim` values per point; deterministic for a given RNG state.
pub fn kmeans(data: &[f64], dim: usize, k: usize, rng: &mut ChaCha8Rng) -> KMeans {
    assert!(dim >= 1 && data.len() % dim == 0);
    let n = data.len() / dim;
    assert!(n >= 1);
    let k = k.min(n).max(1);
    let point = |i: usize| &data[i * dim..(i + 1) * dim];

    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(point(rng.gen_range(0..n)).to_vec());
    let mut d2: Vec<f64> = (0..n).map(|i| dist2(point(i), &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total <= 0.0 {
            rng.gen_range(0..n)
        } else {
            let mut target = rng.gen_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        };
        centers.push(point(idx).to_vec());
        for i in 0..n {
            d2[i] = d2[i].min(dist2(point(i), centers.last().unwrap()));
        }
    }
    lloyd(data, dim, centers)
}

/// Increases k until the relative compactness change |C_k - C_{k+1}| / C_{k+1}
/// drops below `t_c`, returning the k+1 clustering (k capped at
/// min(point count, max_k); near-zero compactness short-circuits).
///
/// Centers grow greedily: the (k+1)-means starts from the k-means centers plus
/// the point farthest from them, which keeps C_k non-increasing in k.
pub fn kmeans_auto(data: &[f64], dim: usize, t_c: f64, max_k: usize) -> KMeans {
    assert!(dim >= 1 && data.len() % dim == 0);
    let n = data.len() / dim;
    assert!(n >= 1);
    let point = |i: usize| &data[i * dim..(i + 1) * dim];
    let cap = max_k.min(n).max(1);

    // k = 1: the mean is optimal.
    let mean: Vec<f64> = (0..dim)
        .map(|d| (0..n).map(|i| point(i)[d]).sum::<f64>() / n as f64)
        .collect();
    let mut current = lloyd(data, dim, vec![mean]);
    let negligible = (current.compactness * 1e-9).max(1e-12);
    if current.compactness <= 1e-12 || cap == 1 {
        return current;
    }

    for _ in 1..cap {
        let farthest = (0..n)
            .max_by(|&a, &b| {
                let da: f64 = current
                    .centers
                    .iter()
                    .map(|c| dist2(point(a), c))
                    .fold(f64::INFINITY, f64::min);
                let db: f64 = current
                    .centers
                    .iter()
                    .map(|c| dist2(point(b), c))
                    .fold(f64::INFINITY, f64::min);
                da.total_cmp(&db)
            })
            .unwrap();
        let mut centers = current.centers.clone();
        centers.push(point(farthest).to_vec());
        let next = lloyd(data, dim, centers);
        if next.compactness <= negligible {
            return next;
        }
        let ratio = (current.compactness - next.compactness).abs() / next.compactness;
        if ratio < t_c {
            return next;
        }
        current = next;
    }
    current
}
