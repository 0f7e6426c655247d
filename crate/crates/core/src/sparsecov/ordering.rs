//! Fill-reducing minimum-degree ordering.
//!
//! Quotient-graph minimum degree with element absorption and exact external
//! degrees, in the approximate-minimum-degree family. Eliminated pivots
//! become elements; elements adjacent to the pivot are absorbed into the new
//! one, so memory stays proportional to the original graph plus frontier.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Computes an elimination order for a symmetric sparsity pattern given as
/// adjacency lists (no self loops). Returns `perm` with `perm[k]` = the
/// original index eliminated at step `k`.
pub fn min_degree_ordering(n: usize, adjacency: &[Vec<usize>]) -> Vec<usize> {
    assert_eq!(adjacency.len(), n);
    let mut adj_var: Vec<Vec<usize>> = adjacency.to_vec();
    let mut adj_el: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut elements: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut absorbed = vec![false; n];
    let mut alive = vec![true; n];
    let mut degree: Vec<usize> = adj_var.iter().map(Vec::len).collect();
    let mut mark = vec![0u64; n];
    let mut stamp = 0u64;

    let mut heap: BinaryHeap<Reverse<(usize, usize)>> = (0..n)
        .map(|i| Reverse((degree[i], i)))
        .collect();
    let mut perm = Vec::with_capacity(n);

    while perm.len() < n {
        let Reverse((deg, p)) = heap.pop().expect("heap exhausted before full elimination");
        if !alive[p] || deg != degree[p] {
            continue; // stale entry
        }

        // L_p: variables adjacent to p directly or through p's elements
        stamp += 1;
        mark[p] = stamp;
        let mut lp: Vec<usize> = Vec::new();
        for &j in &adj_var[p] {
            if alive[j] && mark[j] != stamp {
                mark[j] = stamp;
                lp.push(j);
            }
        }
        for &e in &adj_el[p] {
            if absorbed[e] {
                continue;
            }
            for &j in &elements[e] {
                if alive[j] && j != p && mark[j] != stamp {
                    mark[j] = stamp;
                    lp.push(j);
                }
            }
        }
        for &e in &adj_el[p] {
            absorbed[e] = true;
            elements[e] = Vec::new();
        }
        alive[p] = false;
        adj_var[p] = Vec::new();
        adj_el[p] = Vec::new();

        // prune covered edges and absorbed elements, attach the new element
        for &i in &lp {
            adj_var[i].retain(|&j| alive[j] && mark[j] != stamp);
            adj_el[i].retain(|&e| !absorbed[e]);
            adj_el[i].push(p);
        }
        elements[p] = lp.clone();

        // exact external degrees for the affected variables
        for &i in &lp {
            stamp += 1;
            mark[i] = stamp;
            let mut deg = 0usize;
            for &j in &adj_var[i] {
                if mark[j] != stamp {
                    mark[j] = stamp;
                    deg += 1;
                }
            }
            for t in 0..adj_el[i].len() {
                let e = adj_el[i][t];
                elements[e].retain(|&j| alive[j]);
                for &j in &elements[e] {
                    if mark[j] != stamp {
                        mark[j] = stamp;
                        deg += 1;
                    }
                }
            }
            degree[i] = deg;
            heap.push(Reverse((deg, i)));
        }

        perm.push(p);
    }
    perm
}
