//! Reverse Cuthill-McKee ordering to shrink the band of the assembled
//! operators before banded factorization. Fully deterministic: ties break
//! on vertex index.

use crate::linalg::sparse::Csr;

/// Returns `new_of_old`: position of old index i in the reordered system.
pub fn reverse_cuthill_mckee(a: &Csr) -> Vec<usize> {
    let n = a.n;
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    for i in 0..n {
        for (j, _) in a.row(i) {
            if j != i {
                adj[i].push(j as u32);
            }
        }
    }
    for l in &mut adj {
        l.sort_unstable();
        l.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(|l| l.len()).collect();

    let mut order: Vec<u32> = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    loop {
        // peripheral-ish start: minimum degree among unvisited
        let start = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| (degree[i], i));
        let Some(start) = start else { break };
        visited[start] = true;
        order.push(start as u32);
        let mut head = order.len() - 1;
        while head < order.len() {
            let v = order[head] as usize;
            head += 1;
            let mut next: Vec<u32> = adj[v]
                .iter()
                .copied()
                .filter(|&u| !visited[u as usize])
                .collect();
            next.sort_unstable_by_key(|&u| (degree[u as usize], u));
            for u in next {
                if !visited[u as usize] {
                    visited[u as usize] = true;
                    order.push(u);
                }
            }
        }
    }
    order.reverse();
    let mut new_of_old = vec![0usize; n];
    for (pos, &old) in order.iter().enumerate() {
        new_of_old[old as usize] = pos;
    }
    new_of_old
}
