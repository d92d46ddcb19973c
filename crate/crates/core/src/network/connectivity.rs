use std::collections::{HashSet, VecDeque};

use super::case::GridCase;
use super::contingency::ContingencySpec;

/// Connected components over in-service branches not listed in `removed`.
///
/// Components are returned as sorted bus-id lists, ordered by their smallest id.
pub fn islands(case: &GridCase, removed: &[usize]) -> Vec<Vec<usize>> {
    let n = case.buses.len();
    let removed: HashSet<usize> = removed.iter().copied().collect();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, br) in case.branches.iter().enumerate() {
        if !br.in_service() || removed.contains(&k) {
            continue;
        }
        let f = case.bus_position(br.from).unwrap();
        let t = case.bus_position(br.to).unwrap();
        adj[f].push(t);
        adj[t].push(f);
    }
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![case.buses[start].id];
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &w in &adj[u] {
                if !seen[w] {
                    seen[w] = true;
                    comp.push(case.buses[w].id);
                    queue.push_back(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out.sort_by_key(|c| c[0]);
    out
}

/// Islands of the post-outage network.
pub fn check_connectivity(case: &GridCase, spec: &ContingencySpec) -> Vec<Vec<usize>> {
    islands(case, &spec.branch_indices)
}
