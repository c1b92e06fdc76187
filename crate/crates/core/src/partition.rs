//! Girvan–Newman division of the scaffold and one-hop causal expansion of the blocks.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Partition, Skeleton};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionConfig {
    /// Every block must end up with at most this many vertices.
    pub max_block_size: usize,
    /// Keep cutting until at least this many blocks exist.
    pub min_blocks: usize,
    /// Hops of scaffold neighbourhood added to each block.
    pub expansion_depth: usize,
}

impl PartitionConfig {
    /// `max(8, ceil(p / 2))` vertices per block, one-hop expansion.
    pub fn for_p(p: usize) -> Self {
        Self {
            max_block_size: 8.max(p.div_ceil(2)),
            min_blocks: 1,
            expansion_depth: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_block_size < 2 {
            return Err(Error::invalid("max block size must be at least 2"));
        }
        if self.min_blocks < 1 {
            return Err(Error::invalid("min blocks must be at least 1"));
        }
        Ok(())
    }
}

/// Exact edge betweenness via Brandes accumulation, aligned with `g.edges()`.
///
/// Each unordered vertex pair contributes once.
pub fn edge_betweenness(g: &Skeleton) -> Vec<f64> {
    let p = g.p();
    let adj = g.adjacency();
    let edges: Vec<(usize, usize)> = g.edges().collect();
    let edge_index = |a: usize, b: usize| -> usize {
        let key = if a < b { (a, b) } else { (b, a) };
        edges.binary_search(&key).expect("edge of g")
    };

    let from_source = |s: usize| -> Vec<f64> {
        let mut credit = vec![0.0; edges.len()];
        let mut sigma = vec![0.0f64; p];
        let mut dist = vec![usize::MAX; p];
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); p];
        let mut stack = Vec::with_capacity(p);
        let mut queue = VecDeque::new();
        sigma[s] = 1.0;
        dist[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for &w in &adj[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        let mut delta = vec![0.0f64; p];
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                let c = sigma[v] / sigma[w] * (1.0 + delta[w]);
                credit[edge_index(v, w)] += c;
                delta[v] += c;
            }
        }
        credit
    };

    #[cfg(feature = "parallel")]
    let per_source: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        (0..p).into_par_iter().map(from_source).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_source: Vec<Vec<f64>> = (0..p).map(from_source).collect();

    // reduce in source order so the sum does not depend on scheduling
    let mut total = vec![0.0; edges.len()];
    for credit in per_source {
        for (t, c) in total.iter_mut().zip(credit) {
            *t += c;
        }
    }
    for t in &mut total {
        *t /= 2.0;
    }
    total
}

fn satisfied(g: &Skeleton, cfg: &PartitionConfig) -> bool {
    let comps = g.components();
    comps.len() >= cfg.min_blocks && comps.iter().all(|c| c.len() <= cfg.max_block_size)
}

/// Girvan–Newman partition, also returning the removed edges in removal order.
pub fn girvan_newman_with_trace(
    g: &Skeleton,
    cfg: &PartitionConfig,
) -> Result<(Partition, Vec<(usize, usize)>)> {
    cfg.validate()?;
    let mut work = g.clone();
    let mut removed = Vec::new();
    while !satisfied(&work, cfg) && work.edge_count() > 0 {
        let scores = edge_betweenness(&work);
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // floating accumulation can split exact ties; treat near-equal scores as tied
        let cutoff = max - 1e-9 * max.max(1.0);
        let (pos, _) = scores
            .iter()
            .enumerate()
            .find(|(_, &s)| s >= cutoff)
            .expect("non-empty edge set");
        let edge = work.edges().nth(pos).expect("aligned with scores");
        work.remove_edge(edge.0, edge.1);
        removed.push(edge);
    }
    Ok((Partition::new(work.components()), removed))
}

/// Repeatedly removes the highest-betweenness edge (ties: smallest `(i, j)`) until
/// every component has at most `max_block_size` vertices and there are at least
/// `min_blocks` components. Blocks are sorted and ordered by smallest member.
pub fn girvan_newman(g: &Skeleton, cfg: &PartitionConfig) -> Result<Partition> {
    girvan_newman_with_trace(g, cfg).map(|(part, _)| part)
}

/// One-hop expansion over the original scaffold.
pub fn causal_expansion(g: &Skeleton, part: &Partition) -> Result<Partition> {
    causal_expansion_depth(g, part, 1)
}

/// Grows each block by every vertex within `depth` hops of it in `g`.
pub fn causal_expansion_depth(g: &Skeleton, part: &Partition, depth: usize) -> Result<Partition> {
    let adj = g.adjacency();
    let mut blocks = Vec::with_capacity(part.len());
    for block in &part.blocks {
        if let Some(&v) = block.iter().find(|&&v| v >= g.p()) {
            return Err(Error::invalid(format!(
                "block vertex {v} out of range for p = {}",
                g.p()
            )));
        }
        let mut set: BTreeSet<usize> = block.iter().copied().collect();
        let mut frontier: Vec<usize> = set.iter().copied().collect();
        for _ in 0..depth {
            let mut next = Vec::new();
            for v in frontier {
                for &w in &adj[v] {
                    if set.insert(w) {
                        next.push(w);
                    }
                }
            }
            frontier = next;
        }
        blocks.push(set.into_iter().collect());
    }
    Ok(Partition::new(blocks))
}

/// Subgraph of `g` on `block`, relabelled to `0..block.len()`.
/// The returned map sends local index `k` to global vertex `map[k]` (ascending).
pub fn induce_subgraph(g: &Skeleton, block: &[usize]) -> Result<(Skeleton, Vec<usize>)> {
    let map: Vec<usize> = block.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if let Some(&v) = map.last().filter(|&&v| v >= g.p()) {
        return Err(Error::invalid(format!(
            "block vertex {v} out of range for p = {}",
            g.p()
        )));
    }
    let mut local_of = vec![usize::MAX; g.p()];
    for (k, &v) in map.iter().enumerate() {
        local_of[v] = k;
    }
    let mut sub = Skeleton::empty(map.len());
    for (i, j) in g.edges() {
        let (a, b) = (local_of[i], local_of[j]);
        if a != usize::MAX && b != usize::MAX {
            sub.add_edge(a, b);
        }
    }
    Ok((sub, map))
}

/// Edges of `truth` with no block containing both endpoints.
pub fn cross_block_edges(truth: &Skeleton, part: &Partition) -> usize {
    let sets: Vec<BTreeSet<usize>> = part.blocks.iter().map(|b| b.iter().copied().collect()).collect();
    truth
        .edges()
        .filter(|&(i, j)| !sets.iter().any(|s| s.contains(&i) && s.contains(&j)))
        .count()
}
