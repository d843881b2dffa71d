use std::collections::VecDeque;

use super::SparseMatrix;

/// Symmetrized adjacency lists (diagonal excluded), neighbors sorted.
pub(crate) fn adjacency(a: &SparseMatrix) -> Vec<Vec<usize>> {
    let n = a.n_rows();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for (j, _) in a.row(i) {
            if i != j && j < n {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

/// BFS level structure from `root` restricted to unvisited vertices of
/// `mask`. Returns the vertices in BFS order and the index where the last
/// level starts.
fn level_structure(adj: &[Vec<usize>], root: usize, in_component: &[bool]) -> (Vec<usize>, usize, usize) {
    let n = adj.len();
    let mut depth = vec![usize::MAX; n];
    let mut order = vec![root];
    depth[root] = 0;
    let mut head = 0;
    let mut last_level_start = 0;
    while head < order.len() {
        let v = order[head];
        head += 1;
        for &w in &adj[v] {
            if in_component[w] && depth[w] == usize::MAX {
                depth[w] = depth[v] + 1;
                if depth[w] > depth[order[last_level_start]] {
                    last_level_start = order.len();
                }
                order.push(w);
            }
        }
    }
    let ecc = depth[*order.last().unwrap()];
    (order, last_level_start, ecc)
}

fn pseudo_peripheral(adj: &[Vec<usize>], start: usize, in_component: &[bool]) -> usize {
    let mut root = start;
    let (mut order, mut last, mut ecc) = level_structure(adj, root, in_component);
    loop {
        let candidate = order[last..]
            .iter()
            .copied()
            .min_by_key(|&v| (adj[v].len(), v))
            .unwrap();
        let (o2, l2, e2) = level_structure(adj, candidate, in_component);
        if e2 <= ecc {
            return root;
        }
        root = candidate;
        order = o2;
        last = l2;
        ecc = e2;
    }
}

/// Reverse Cuthill–McKee ordering. Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &SparseMatrix) -> Vec<usize> {
    rcm_from_adjacency(&adjacency(a))
}

pub(crate) fn rcm_from_adjacency(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    // Components are processed starting from their lowest-degree vertex.
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (adj[v].len(), v));
    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let mut in_component = vec![false; n];
        let mut stack = vec![seed];
        in_component[seed] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !in_component[w] {
                    in_component[w] = true;
                    stack.push(w);
                }
            }
        }
        let root = pseudo_peripheral(adj, seed, &in_component);
        let mut queue = VecDeque::from([root]);
        visited[root] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (adj[w].len(), w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::Symmetry;

    fn bandwidth(a: &SparseMatrix, perm: &[usize]) -> usize {
        let mut inv = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut bw = 0;
        for i in 0..a.n_rows() {
            for (j, _) in a.row(i) {
                bw = bw.max(inv[i].abs_diff(inv[j]));
            }
        }
        bw
    }

    #[test]
    fn rcm_is_a_permutation_and_reduces_bandwidth() {
        // Path graph numbered in a scrambled order.
        let n = 20;
        let label: Vec<usize> = (0..n).map(|i| (i * 7) % n).collect();
        let mut t = Vec::new();
        for i in 0..n {
            t.push((label[i], label[i], 2.0));
            if i + 1 < n {
                t.push((label[i], label[i + 1], -1.0));
                t.push((label[i + 1], label[i], -1.0));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &t, Symmetry::SymmetricFull).unwrap();
        let perm = reverse_cuthill_mckee(&a);
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..n).collect::<Vec<_>>());
        assert_eq!(bandwidth(&a, &perm), 1);
    }

    #[test]
    fn handles_disconnected_components() {
        let a = SparseMatrix::identity(4);
        let perm = reverse_cuthill_mckee(&a);
        assert_eq!(perm.len(), 4);
    }
}
