//! Undirected skeletons, dense dependence graphs and vertex partitions.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An undirected simple graph over `p` variables. Edges are stored as `(i, j)` with `i < j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Skeleton {
    p: usize,
    edges: BTreeSet<(usize, usize)>,
}

#[inline]
fn canon(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

impl Skeleton {
    pub fn empty(p: usize) -> Self {
        Self {
            p,
            edges: BTreeSet::new(),
        }
    }

    pub fn complete(p: usize) -> Self {
        let edges = (0..p)
            .flat_map(|i| (i + 1..p).map(move |j| (i, j)))
            .collect();
        Self { p, edges }
    }

    pub fn from_edges(p: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = Self::empty(p);
        for (i, j) in edges {
            g.try_add(i, j)?;
        }
        Ok(g)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges in ascending `(i, j)` order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&canon(i, j))
    }

    fn check(&self, i: usize, j: usize) -> Result<()> {
        if i >= self.p || j >= self.p {
            return Err(Error::invalid(format!(
                "edge ({i}, {j}) out of range for p = {}",
                self.p
            )));
        }
        if i == j {
            return Err(Error::invalid(format!("self-loop on vertex {i}")));
        }
        Ok(())
    }

    /// Adds `{i, j}`; returns `false` when the edge was already present.
    ///
    /// Panics on self-loops or out-of-range indices.
    pub fn add_edge(&mut self, i: usize, j: usize) -> bool {
        self.check(i, j).expect("invalid edge");
        self.edges.insert(canon(i, j))
    }

    fn try_add(&mut self, i: usize, j: usize) -> Result<()> {
        self.check(i, j)?;
        if !self.edges.insert(canon(i, j)) {
            return Err(Error::invalid(format!("duplicate edge ({i}, {j})")));
        }
        Ok(())
    }

    pub fn remove_edge(&mut self, i: usize, j: usize) -> bool {
        self.edges.remove(&canon(i, j))
    }

    /// Sorted neighbor lists.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.p];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|&&(i, j)| i == v || j == v).count()
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let adj = self.adjacency();
        let mut seen = vec![false; self.p];
        let mut out = Vec::new();
        for start in 0..self.p {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut stack = vec![start];
            while let Some(v) = stack.pop() {
                for &w in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        comp.push(w);
                        stack.push(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_tree(&self) -> bool {
        self.p > 0 && self.edges.len() + 1 == self.p && self.components().len() == 1
    }

    /// Relabels vertex `v` as `perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> Self {
        let edges = self.edges.iter().map(|&(i, j)| canon(perm[i], perm[j])).collect();
        Self { p: self.p, edges }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&SkeletonDoc::from(self)).expect("skeleton serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SkeletonDoc = serde_json::from_str(text)?;
        Self::from_edges(doc.p, doc.edges.into_iter().map(|[i, j]| (i, j)))
    }
}

#[derive(Serialize, Deserialize)]
struct SkeletonDoc {
    p: usize,
    edges: Vec<[usize; 2]>,
}

impl From<&Skeleton> for SkeletonDoc {
    fn from(g: &Skeleton) -> Self {
        Self {
            p: g.p,
            edges: g.edges.iter().map(|&(i, j)| [i, j]).collect(),
        }
    }
}

impl Serialize for Skeleton {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SkeletonDoc::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Skeleton {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = SkeletonDoc::deserialize(d)?;
        Skeleton::from_edges(doc.p, doc.edges.into_iter().map(|[i, j]| (i, j)))
            .map_err(serde::de::Error::custom)
    }
}

pub fn serialize_skeleton(g: &Skeleton) -> String {
    g.to_json()
}

pub fn parse_skeleton(text: &str) -> Result<Skeleton> {
    Skeleton::from_json(text)
}

/// Symmetric non-negative weights over a complete graph, zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    p: usize,
    weights: Vec<f64>,
}

impl WeightedGraph {
    pub fn zeros(p: usize) -> Self {
        Self {
            p,
            weights: vec![0.0; p * p],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        let mut g = Self::zeros(p);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::invalid("weight matrix is not square"));
            }
            for (j, &w) in row.iter().enumerate() {
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::invalid(format!("weight ({i}, {j}) = {w} is not a finite non-negative number")));
                }
                if i == j && w != 0.0 {
                    return Err(Error::invalid("weight matrix has a non-zero diagonal"));
                }
                if rows[j][i] != w {
                    return Err(Error::invalid(format!("weight matrix is asymmetric at ({i}, {j})")));
                }
                g.weights[i * p + j] = w;
            }
        }
        Ok(g)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.p + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, w: f64) {
        assert!(i != j, "diagonal is fixed at zero");
        assert!(w.is_finite() && w >= 0.0, "weights must be finite and non-negative");
        self.weights[i * self.p + j] = w;
        self.weights[j * self.p + i] = w;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.weights.chunks(self.p).map(<[f64]>::to_vec).collect()
    }

    /// Sum of weights over the given edges.
    pub fn total(&self, g: &Skeleton) -> f64 {
        g.edges().map(|(i, j)| self.get(i, j)).sum()
    }
}

/// An ordered list of variable blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub blocks: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(blocks: Vec<Vec<usize>>) -> Self {
        Self { blocks }
    }

    /// The trivial partition with one block holding every variable.
    pub fn single(p: usize) -> Self {
        Self {
            blocks: vec![(0..p).collect()],
        }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    pub fn covers_vertices(&self, p: usize) -> bool {
        let mut seen = vec![false; p];
        for &v in self.blocks.iter().flatten() {
            if v < p {
                seen[v] = true;
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// True when every edge of `g` has both endpoints inside some block.
    pub fn covers_edges(&self, g: &Skeleton) -> bool {
        let sets: Vec<BTreeSet<usize>> = self.blocks.iter().map(|b| b.iter().copied().collect()).collect();
        g.edges()
            .all(|(i, j)| sets.iter().any(|s| s.contains(&i) && s.contains(&j)))
    }

    pub fn is_disjoint(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.blocks.iter().flatten().all(|&v| seen.insert(v))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("partition serializes")
    }
}
