//! MAP inference on small pairwise MRFs: tree-reweighted min-sum message
//! passing over -log potentials with damping, followed by sequential
//! conditioned decoding.

/// One pairwise factor; `cost[si][sj]` is the -log potential for node `i`
/// in state `si` and node `j` in state `sj`.
#[derive(Debug, Clone)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub cost: Vec<Vec<f64>>,
}

pub const MAX_ITERATIONS: usize = 100;
pub const CONVERGENCE_TOL: f64 = 1e-6;
pub const DAMPING: f64 = 0.5;

/// Uniform edge appearance probabilities per connected component:
/// 1 on trees, (nodes-1)/edges otherwise.
fn edge_probabilities(n_nodes: usize, edges: &[Edge]) -> Vec<f64> {
    let mut parent: Vec<usize> = (0..n_nodes).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        if parent[x] != x {
            let root = find(parent, parent[x]);
            parent[x] = root;
        }
        parent[x]
    }
    for e in edges {
        let (a, b) = (find(&mut parent, e.i), find(&mut parent, e.j));
        if a != b {
            parent[a] = b;
        }
    }
    let mut node_count = vec![0usize; n_nodes];
    let mut edge_count = vec![0usize; n_nodes];
    for v in 0..n_nodes {
        let r = find(&mut parent, v);
        node_count[r] += 1;
    }
    for e in edges.to_vec() {
        let r = find(&mut parent, e.i);
        edge_count[r] += 1;
    }
    edges
        .iter()
        .map(|e| {
            let mut p = e.i;
            let r = find(&mut parent, p);
            p = r;
            let (n, m) = (node_count[p], edge_count[p]);
            if m <= n - 1 {
                1.0
            } else {
                (n - 1) as f64 / m as f64
            }
        })
        .collect()
}

/// Returns the per-node MAP state assignment.
pub fn map_infer(unary: &[Vec<f64>], edges: &[Edge]) -> Vec<usize> {
    let n = unary.len();
    if n == 0 {
        return Vec::new();
    }
    let rho = edge_probabilities(n, edges);

    // adjacency: per node, (edge index, neighbor, true when node is edge.i)
    let mut adj: Vec<Vec<(usize, usize, bool)>> = vec![Vec::new(); n];
    for (e_idx, e) in edges.iter().enumerate() {
        adj[e.i].push((e_idx, e.j, true));
        adj[e.j].push((e_idx, e.i, false));
    }

    // messages[2*e] flows i->j, messages[2*e+1] flows j->i
    let mut messages: Vec<Vec<f64>> = edges
        .iter()
        .flat_map(|e| [vec![0.0; unary[e.j].len()], vec![0.0; unary[e.i].len()]])
        .collect();

    let edge_cost = |e: &Edge, from_is_i: bool, s_from: usize, s_to: usize| {
        if from_is_i {
            e.cost[s_from][s_to]
        } else {
            e.cost[s_to][s_from]
        }
    };

    for _ in 0..MAX_ITERATIONS {
        let mut max_change = 0.0f64;
        for (e_idx, e) in edges.iter().enumerate() {
            for (from, to, from_is_i) in [(e.i, e.j, true), (e.j, e.i, false)] {
                let out_idx = 2 * e_idx + usize::from(!from_is_i);
                let back_idx = 2 * e_idx + usize::from(from_is_i);
                let mut fresh = vec![f64::INFINITY; unary[to].len()];
                for (s_to, slot) in fresh.iter_mut().enumerate() {
                    let mut best = f64::INFINITY;
                    for s_from in 0..unary[from].len() {
                        let mut c =
                            edge_cost(e, from_is_i, s_from, s_to) / rho[e_idx] + unary[from][s_from];
                        for &(k_idx, _, k_from_is_i) in &adj[from] {
                            let incoming = 2 * k_idx + usize::from(k_from_is_i);
                            if k_idx == e_idx {
                                c += (rho[e_idx] - 1.0) * messages[back_idx][s_from];
                                let _ = incoming;
                            } else {
                                c += rho[k_idx] * messages[incoming][s_from];
                            }
                        }
                        if c < best {
                            best = c;
                        }
                    }
                    *slot = best;
                }
                // normalise and damp
                let min = fresh.iter().copied().fold(f64::INFINITY, f64::min);
                for v in &mut fresh {
                    *v -= min;
                }
                for (s, v) in fresh.iter().enumerate() {
                    let old = messages[out_idx][s];
                    let damped = DAMPING * old + (1.0 - DAMPING) * v;
                    max_change = max_change.max((damped - old).abs());
                    messages[out_idx][s] = damped;
                }
            }
        }
        if max_change < CONVERGENCE_TOL {
            break;
        }
    }

    // Sequential conditioned decode: already-decoded neighbors enter via the
    // true pairwise cost, pending ones through their messages.
    let decode_order = |order: &[usize]| -> Vec<usize> {
        let mut assignment = vec![usize::MAX; n];
        for &node in order {
            let mut best_state = 0;
            let mut best_cost = f64::INFINITY;
            for s in 0..unary[node].len() {
                let mut c = unary[node][s];
                for &(e_idx, other, node_is_i) in &adj[node] {
                    if assignment[other] != usize::MAX {
                        let e = &edges[e_idx];
                        c += if node_is_i {
                            e.cost[s][assignment[other]]
                        } else {
                            e.cost[assignment[other]][s]
                        };
                    } else {
                        let incoming = 2 * e_idx + usize::from(node_is_i);
                        c += rho[e_idx] * messages[incoming][s];
                    }
                }
                if c < best_cost {
                    best_cost = c;
                    best_state = s;
                }
            }
            assignment[node] = best_state;
        }
        assignment
    };

    // Coordinate-descent polish on the true objective.
    let icm = |mut assignment: Vec<usize>| -> Vec<usize> {
        for _ in 0..20 {
            let mut improved = false;
            for node in 0..n {
                let mut best_state = assignment[node];
                let mut best_cost = f64::INFINITY;
                for s in 0..unary[node].len() {
                    let mut c = unary[node][s];
                    for &(e_idx, other, node_is_i) in &adj[node] {
                        let e = &edges[e_idx];
                        c += if node_is_i {
                            e.cost[s][assignment[other]]
                        } else {
                            e.cost[assignment[other]][s]
                        };
                    }
                    if c < best_cost - 1e-15 {
                        best_cost = c;
                        best_state = s;
                    }
                }
                if best_state != assignment[node] {
                    assignment[node] = best_state;
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        assignment
    };

    let forward: Vec<usize> = (0..n).collect();
    let backward: Vec<usize> = (0..n).rev().collect();
    [decode_order(&forward), decode_order(&backward)]
        .into_iter()
        .map(icm)
        .min_by(|a, b| {
            assignment_cost(unary, edges, a).total_cmp(&assignment_cost(unary, edges, b))
        })
        .unwrap()
}

/// Total -log cost of a joint assignment.
pub fn assignment_cost(unary: &[Vec<f64>], edges: &[Edge], assignment: &[usize]) -> f64 {
    let mut c: f64 = assignment
        .iter()
        .enumerate()
        .map(|(i, &s)| unary[i][s])
        .sum();
    for e in edges {
        c += e.cost[assignment[e.i]][assignment[e.j]];
    }
    c
}

/// Exhaustive MAP over all joint states (test oracle for small graphs).
pub fn brute_force_map(unary: &[Vec<f64>], edges: &[Edge]) -> Vec<usize> {
    let n = unary.len();
    let mut best = vec![0usize; n];
    let mut best_cost = f64::INFINITY;
    let mut state = vec![0usize; n];
    loop {
        let c = assignment_cost(unary, edges, &state);
        if c < best_cost {
            best_cost = c;
            best = state.clone();
        }
        // odometer increment
        let mut k = n;
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            state[k] += 1;
            if state[k] < unary[k].len() {
                break;
            }
            state[k] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_instance(
        rng: &mut rand_chacha::ChaCha8Rng,
        topology: &[(usize, usize)],
        n: usize,
        states: usize,
    ) -> (Vec<Vec<f64>>, Vec<Edge>) {
        let unary: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..states).map(|_| rng.gen_range(0.0..3.0)).collect())
            .collect();
        let edges: Vec<Edge> = topology
            .iter()
            .map(|&(i, j)| Edge {
                i,
                j,
                cost: (0..states)
                    .map(|_| (0..states).map(|_| rng.gen_range(0.0..3.0)).collect())
                    .collect(),
            })
            .collect();
        (unary, edges)
    }

    #[test]
    fn single_node_argmin() {
        let unary = vec![vec![2.0, 0.5, 1.0]];
        assert_eq!(map_infer(&unary, &[]), vec![1]);
    }

    #[test]
    fn chain_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let (unary, edges) = random_instance(&mut rng, &[(0, 1), (1, 2), (2, 3)], 4, 3);
            assert_eq!(map_infer(&unary, &edges), brute_force_map(&unary, &edges));
        }
    }

    #[test]
    fn loopy_topologies_match_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let topologies: Vec<Vec<(usize, usize)>> = vec![
            vec![(0, 1), (1, 2), (2, 0)],                 // triangle
            vec![(0, 1), (1, 2), (2, 3), (3, 0)],         // 4-cycle
            vec![(0, 1), (0, 2), (0, 3)],                 // star
            vec![(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)], // cycle with chord
        ];
        for topo in &topologies {
            for _ in 0..20 {
                let n = topo.iter().map(|&(a, b)| a.max(b)).max().unwrap() + 1;
                let (unary, edges) = random_instance(&mut rng, topo, n, 3);
                let got = map_infer(&unary, &edges);
                let want = brute_force_map(&unary, &edges);
                let got_cost = assignment_cost(&unary, &edges, &got);
                let want_cost = assignment_cost(&unary, &edges, &want);
                assert!(
                    (got_cost - want_cost).abs() < 1e-9,
                    "topology {topo:?}: {got:?} ({got_cost}) vs {want:?} ({want_cost})"
                );
            }
        }
    }

    #[test]
    fn exclusion_potential_resolved() {
        // two nodes competing for one shared candidate (state 0), terminal
        // state 1; sharing is heavily penalised.
        let unary = vec![vec![0.2, 1.5], vec![0.4, 1.5]];
        let edges = vec![Edge {
            i: 0,
            j: 1,
            cost: vec![vec![1000.0, 0.0], vec![0.0, 0.0]],
        }];
        let got = map_infer(&unary, &edges);
        assert_eq!(got, brute_force_map(&unary, &edges));
        assert_eq!(got, vec![0, 1], "cheaper node wins the candidate");
    }
}
