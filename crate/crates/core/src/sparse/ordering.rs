use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::csr::CsrMatrix;

/// Symmetric permutation applied before factorization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ordering {
    Natural,
    #[default]
    ReverseCuthillMckee,
    /// Greedy minimum degree on the explicit elimination graph. Memory and
    /// time grow with fill, so it suits moderate `n`.
    MinimumDegree,
}

impl Ordering {
    /// Returns `perm` with `perm[new] = old`.
    pub fn compute(self, a: &CsrMatrix) -> Vec<usize> {
        match self {
            Ordering::Natural => (0..a.n()).collect(),
            Ordering::ReverseCuthillMckee => reverse_cuthill_mckee(a),
            Ordering::MinimumDegree => minimum_degree(a),
        }
    }
}

pub fn inverse_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    inv
}

fn neighbors(a: &CsrMatrix, i: usize) -> impl Iterator<Item = usize> + '_ {
    a.row(i).0.iter().copied().filter(move |&j| j != i)
}

fn degree(a: &CsrMatrix, i: usize) -> usize {
    neighbors(a, i).count()
}

/// BFS levels from `start` restricted to unvisited nodes; returns the last
/// level and the eccentricity.
fn bfs_last_level(
    a: &CsrMatrix,
    start: usize,
    mark: &mut [usize],
    stamp: usize,
) -> (Vec<usize>, usize) {
    let mut level = vec![start];
    mark[start] = stamp;
    let mut depth = 0;
    loop {
        let mut next = Vec::new();
        for &u in &level {
            for v in neighbors(a, u) {
                if mark[v] != stamp {
                    mark[v] = stamp;
                    next.push(v);
                }
            }
        }
        if next.is_empty() {
            return (level, depth);
        }
        depth += 1;
        level = next;
    }
}

fn pseudo_peripheral(a: &CsrMatrix, seed: usize, mark: &mut [usize], stamp: &mut usize) -> usize {
    let mut root = seed;
    *stamp += 1;
    let (mut last, mut ecc) = bfs_last_level(a, root, mark, *stamp);
    loop {
        let cand = *last
            .iter()
            .min_by_key(|&&v| (degree(a, v), v))
            .expect("nonempty level");
        *stamp += 1;
        let (l2, e2) = bfs_last_level(a, cand, mark, *stamp);
        if e2 <= ecc {
            return root;
        }
        root = cand;
        last = l2;
        ecc = e2;
    }
}

pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n();
    let mut visited = vec![false; n];
    let mut mark = vec![0usize; n];
    let mut stamp = 0usize;
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree(a, i), i));
    let mut queue = VecDeque::new();
    let mut nbrs = Vec::new();
    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let root = pseudo_peripheral(a, seed, &mut mark, &mut stamp);
        visited[root] = true;
        queue.push_back(root);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            nbrs.clear();
            nbrs.extend(neighbors(a, u).filter(|&v| !visited[v]));
            nbrs.sort_by_key(|&v| (degree(a, v), v));
            for &v in &nbrs {
                visited[v] = true;
                queue.push_back(v);
            }
        }
    }
    order.reverse();
    order
}

pub fn minimum_degree(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n();
    let mut adj: Vec<BTreeSet<usize>> = (0..n).map(|i| neighbors(a, i).collect()).collect();
    let mut alive = vec![true; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let p = (0..n)
            .filter(|&i| alive[i])
            .min_by_key(|&i| (adj[i].len(), i))
            .expect("a node remains");
        alive[p] = false;
        order.push(p);
        let clique: Vec<usize> = std::mem::take(&mut adj[p]).into_iter().collect();
        for &u in &clique {
            adj[u].remove(&p);
            for &v in &clique {
                if u != v {
                    adj[u].insert(v);
                }
            }
        }
    }
    order
}
