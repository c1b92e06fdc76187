#![allow(dead_code)]

use std::collections::BTreeSet;

use causal_dc::datagen::{GaussianSem, Noise, NoiseFamily};
use causal_dc::graph::Skeleton;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SEM with the given directed arcs `(parent, child, coef)` and standard Gaussian noise.
pub fn sem_from_arcs(p: usize, arcs: &[(usize, usize, f64)]) -> GaussianSem {
    let mut w = vec![vec![0.0; p]; p];
    for &(i, j, c) in arcs {
        w[i][j] = c;
    }
    let names = (0..p).map(|i| format!("X{i}")).collect();
    GaussianSem::new(names, w, vec![Noise::standard(NoiseFamily::Gaussian); p]).unwrap()
}

/// 0 → 1 → ... → p-1 with a common coefficient.
pub fn chain_sem(p: usize, coef: f64) -> GaussianSem {
    let arcs: Vec<_> = (0..p - 1).map(|i| (i, i + 1, coef)).collect();
    sem_from_arcs(p, &arcs)
}

/// Correlated standard-normal pair with correlation `rho`.
pub fn gaussian_pair(rho: f64, n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut r = rng(seed);
    let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut r)).collect();
    let y = x
        .iter()
        .map(|v| {
            let e: f64 = StandardNormal.sample(&mut r);
            rho * v + (1.0 - rho * rho).sqrt() * e
        })
        .collect();
    (x, y)
}

pub fn uniform_pair(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut r = rng(seed);
    let x = (0..n).map(|_| r.random::<f64>()).collect();
    let y = (0..n).map(|_| r.random::<f64>()).collect();
    (x, y)
}

/// Uniformly random labelled tree on `p` vertices via a random Prüfer sequence.
pub fn random_tree(p: usize, r: &mut impl Rng) -> Skeleton {
    if p == 1 {
        return Skeleton::empty(1);
    }
    if p == 2 {
        return Skeleton::complete(2);
    }
    let seq: Vec<usize> = (0..p - 2).map(|_| r.random_range(0..p)).collect();
    prufer_tree(p, &seq)
}

pub fn prufer_tree(p: usize, seq: &[usize]) -> Skeleton {
    let mut degree = vec![1usize; p];
    for &v in seq {
        degree[v] += 1;
    }
    let mut g = Skeleton::empty(p);
    for &v in seq {
        let leaf = (0..p).find(|&u| degree[u] == 1).unwrap();
        g.add_edge(leaf, v);
        degree[leaf] -= 1;
        degree[v] -= 1;
    }
    let rest: Vec<usize> = (0..p).filter(|&u| degree[u] == 1).collect();
    g.add_edge(rest[0], rest[1]);
    g
}

/// Every labelled spanning tree of K_p, enumerated through all p^(p-2) Prüfer sequences.
pub fn all_spanning_trees(p: usize) -> Vec<Skeleton> {
    if p == 2 {
        return vec![Skeleton::complete(2)];
    }
    let len = p - 2;
    let total = p.pow(len as u32);
    (0..total)
        .map(|mut code| {
            let seq: Vec<usize> = (0..len)
                .map(|_| {
                    let d = code % p;
                    code /= p;
                    d
                })
                .collect();
            prufer_tree(p, &seq)
        })
        .collect()
}

/// d-separation of `x` and `y` given `z` in the DAG `arcs[(parent, child)]`,
/// via the moralised ancestral graph.
pub fn d_separated(p: usize, arcs: &[(usize, usize)], x: usize, y: usize, z: &BTreeSet<usize>) -> bool {
    let mut keep: BTreeSet<usize> = [x, y].into_iter().chain(z.iter().copied()).collect();
    loop {
        let before = keep.len();
        for &(a, b) in arcs {
            if keep.contains(&b) {
                keep.insert(a);
            }
        }
        if keep.len() == before {
            break;
        }
    }
    let mut adj = vec![BTreeSet::new(); p];
    for &(a, b) in arcs {
        if keep.contains(&a) && keep.contains(&b) {
            adj[a].insert(b);
            adj[b].insert(a);
        }
    }
    for c in &keep {
        let parents: Vec<usize> = arcs
            .iter()
            .filter(|&&(a, b)| b == *c && keep.contains(&a))
            .map(|&(a, _)| a)
            .collect();
        for (k, &a) in parents.iter().enumerate() {
            for &b in &parents[k + 1..] {
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
    }
    let mut seen = vec![false; p];
    let mut stack = vec![x];
    seen[x] = true;
    while let Some(v) = stack.pop() {
        if v == y {
            return false;
        }
        for &w in &adj[v] {
            if !seen[w] && !z.contains(&w) {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    true
}

/// Pairs not d-separated by any subset of the remaining variables.
pub fn dsep_skeleton(p: usize, arcs: &[(usize, usize)]) -> Skeleton {
    let mut g = Skeleton::empty(p);
    for x in 0..p {
        for y in x + 1..p {
            let others: Vec<usize> = (0..p).filter(|&v| v != x && v != y).collect();
            let separable = (0..1usize << others.len()).any(|mask| {
                let z: BTreeSet<usize> = others
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| mask >> k & 1 == 1)
                    .map(|(_, &v)| v)
                    .collect();
                d_separated(p, arcs, x, y, &z)
            });
            if !separable {
                g.add_edge(x, y);
            }
        }
    }
    g
}

/// Random skeleton on `p` vertices with independent edge probability `q`.
pub fn random_skeleton(p: usize, q: f64, r: &mut impl Rng) -> Skeleton {
    let mut g = Skeleton::empty(p);
    for i in 0..p {
        for j in i + 1..p {
            if r.random_bool(q) {
                g.add_edge(i, j);
            }
        }
    }
    g
}
