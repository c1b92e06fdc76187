//! Tree-shaped super-structure: the maximum spanning tree of the dependency matrix.

use crate::data::Dataset;
use crate::dependence::{dependency_matrix, DependenceMeasure};
use crate::error::Result;
use crate::graph::{Skeleton, WeightedGraph};

/// Disjoint-set forest with path compression and union by rank.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[x] != root {
            let next = self.parent[x];
            self.parent[x] = root;
            x = next;
        }
        root
    }

    /// Merges the sets of `a` and `b`; `false` if they were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Kruskal over edges ordered by descending weight, then ascending `(i, j)`.
pub fn max_spanning_tree(w: &WeightedGraph) -> Skeleton {
    let p = w.p();
    let mut edges: Vec<(usize, usize)> = (0..p)
        .flat_map(|i| (i + 1..p).map(move |j| (i, j)))
        .collect();
    edges.sort_by(|&(a, b), &(c, d)| {
        w.get(c, d)
            .total_cmp(&w.get(a, b))
            .then((a, b).cmp(&(c, d)))
    });
    let mut uf = UnionFind::new(p);
    let mut tree = Skeleton::empty(p);
    for (i, j) in edges {
        if uf.union(i, j) {
            tree.add_edge(i, j);
            if tree.edge_count() + 1 == p {
                break;
            }
        }
    }
    tree
}

/// Chow–Liu scaffold: dependency matrix followed by its maximum spanning tree.
/// Issues no conditional-independence tests.
pub fn build_super_structure(d: &Dataset, m: &DependenceMeasure) -> Result<Skeleton> {
    let w = dependency_matrix(d, m)?;
    Ok(max_spanning_tree(&w))
}
