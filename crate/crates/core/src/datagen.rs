//! Random DAGs, linear structural equation models and the Gaussian-network JSON format.
//!
//! DAGs follow the usual lower-triangular recipe: every strictly lower-triangular
//! entry of the adjacency pattern is an independent Bernoulli draw, the pattern is
//! relabelled by a uniformly random permutation, and each present edge then gets
//! an i.i.d. uniform coefficient.
//!
//! The default edge probability `0.075 p / (p - 1)` gives an expected edge count of
//! `0.0375 p^2`, i.e. an expected in-degree of `0.0375 p`.

use std::collections::{BTreeMap, BinaryHeap};
use std::cmp::Reverse;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::Skeleton;

/// Noise family tag, used by configs that apply one family to every variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseFamily {
    Gaussian,
    Exponential,
    Gamma,
    Uniform,
}

impl NoiseFamily {
    pub const ALL: [NoiseFamily; 4] = [
        NoiseFamily::Gaussian,
        NoiseFamily::Exponential,
        NoiseFamily::Gamma,
        NoiseFamily::Uniform,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseFamily::Gaussian => "gaussian",
            NoiseFamily::Exponential => "exponential",
            NoiseFamily::Gamma => "gamma",
            NoiseFamily::Uniform => "uniform",
        }
    }
}

impl std::str::FromStr for NoiseFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" | "normal" => Ok(NoiseFamily::Gaussian),
            "exponential" | "exp" => Ok(NoiseFamily::Exponential),
            "gamma" => Ok(NoiseFamily::Gamma),
            "uniform" => Ok(NoiseFamily::Uniform),
            other => Err(Error::invalid(format!("unknown noise family `{other}`"))),
        }
    }
}

/// Additive noise for one variable. Every family is centred to mean zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Noise {
    Gaussian { sd: f64 },
    Exponential { rate: f64 },
    Gamma { shape: f64, scale: f64 },
    Uniform { half_width: f64 },
}

impl Noise {
    /// Standard parameterisation: N(0, 1), Exp(1), Gamma(2, 1), U[-1, 1].
    pub fn standard(family: NoiseFamily) -> Self {
        match family {
            NoiseFamily::Gaussian => Noise::Gaussian { sd: 1.0 },
            NoiseFamily::Exponential => Noise::Exponential { rate: 1.0 },
            NoiseFamily::Gamma => Noise::Gamma {
                shape: 2.0,
                scale: 1.0,
            },
            NoiseFamily::Uniform => Noise::Uniform { half_width: 1.0 },
        }
    }

    pub fn family(&self) -> NoiseFamily {
        match self {
            Noise::Gaussian { .. } => NoiseFamily::Gaussian,
            Noise::Exponential { .. } => NoiseFamily::Exponential,
            Noise::Gamma { .. } => NoiseFamily::Gamma,
            Noise::Uniform { .. } => NoiseFamily::Uniform,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Noise::Gaussian { sd } => sd.is_finite() && sd >= 0.0,
            Noise::Exponential { rate } => rate.is_finite() && rate > 0.0,
            Noise::Gamma { shape, scale } => {
                shape.is_finite() && shape > 0.0 && scale.is_finite() && scale > 0.0
            }
            Noise::Uniform { half_width } => half_width.is_finite() && half_width >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid noise parameters {self:?}")))
        }
    }

    fn fill<R: Rng>(&self, rng: &mut R, out: &mut [f64]) {
        match *self {
            Noise::Gaussian { sd } => {
                for v in out {
                    let z: f64 = StandardNormal.sample(rng);
                    *v = sd * z;
                }
            }
            Noise::Exponential { rate } => {
                let dist = Exp::new(rate).expect("validated rate");
                let mean = 1.0 / rate;
                for v in out {
                    *v = dist.sample(rng) - mean;
                }
            }
            Noise::Gamma { shape, scale } => {
                let dist = Gamma::new(shape, scale).expect("validated gamma");
                let mean = shape * scale;
                for v in out {
                    *v = dist.sample(rng) - mean;
                }
            }
            Noise::Uniform { half_width } => {
                for v in out {
                    *v = if half_width == 0.0 {
                        0.0
                    } else {
                        rng.random_range(-half_width..half_width)
                    };
                }
            }
        }
    }
}

/// A linear SEM. `weights[i][j]` is the coefficient of parent `i` in child `j`'s equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSem {
    names: Vec<String>,
    weights: Vec<Vec<f64>>,
    noise: Vec<Noise>,
}

impl GaussianSem {
    pub fn new(names: Vec<String>, weights: Vec<Vec<f64>>, noise: Vec<Noise>) -> Result<Self> {
        let p = names.len();
        if p < 2 {
            return Err(Error::invalid("a SEM needs at least two variables"));
        }
        if weights.len() != p || weights.iter().any(|r| r.len() != p) || noise.len() != p {
            return Err(Error::invalid("SEM dimensions disagree"));
        }
        if weights.iter().flatten().any(|w| !w.is_finite()) {
            return Err(Error::invalid("SEM coefficients must be finite"));
        }
        if (0..p).any(|i| weights[i][i] != 0.0) {
            return Err(Error::Cycle("self-loop in weight matrix".into()));
        }
        for nz in &noise {
            nz.validate()?;
        }
        topological_order(&weights)?;
        Ok(Self {
            names,
            weights,
            noise,
        })
    }

    pub fn p(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn noise(&self) -> &[Noise] {
        &self.noise
    }

    pub fn node_count(&self) -> usize {
        self.p()
    }

    pub fn arc_count(&self) -> usize {
        self.weights.iter().flatten().filter(|&&w| w != 0.0).count()
    }

    /// Directed arcs `(parent, child)` in row-major order.
    pub fn arcs(&self) -> Vec<(usize, usize)> {
        let p = self.p();
        (0..p)
            .flat_map(|i| (0..p).map(move |j| (i, j)))
            .filter(|&(i, j)| self.weights[i][j] != 0.0)
            .collect()
    }

    /// Undirected version of the arc pattern.
    pub fn skeleton(&self) -> Skeleton {
        let mut g = Skeleton::empty(self.p());
        for (i, j) in self.arcs() {
            g.add_edge(i, j);
        }
        g
    }

    /// Same graph and coefficients with every variable's noise replaced.
    pub fn with_noise(&self, family: NoiseFamily) -> Self {
        Self {
            noise: vec![Noise::standard(family); self.p()],
            ..self.clone()
        }
    }
}

/// Kahn's algorithm over the non-zero pattern, smallest ready index first.
pub fn topological_order(weights: &[Vec<f64>]) -> Result<Vec<usize>> {
    let p = weights.len();
    let mut indeg = vec![0usize; p];
    for row in weights {
        for (j, &w) in row.iter().enumerate() {
            if w != 0.0 {
                indeg[j] += 1;
            }
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..p).filter(|&v| indeg[v] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(p);
    while let Some(Reverse(v)) = ready.pop() {
        order.push(v);
        for (j, &w) in weights[v].iter().enumerate() {
            if w != 0.0 {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    ready.push(Reverse(j));
                }
            }
        }
    }
    if order.len() != p {
        return Err(Error::Cycle(format!(
            "{} of {p} variables lie on or behind a directed cycle",
            p - order.len()
        )));
    }
    Ok(order)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub p: usize,
    pub edge_prob: f64,
    pub weight_range: (f64, f64),
    pub noise: NoiseFamily,
    pub n: usize,
    pub seed: u64,
}

impl GenConfig {
    pub fn new(p: usize, n: usize, seed: u64) -> Self {
        Self {
            p,
            edge_prob: default_edge_prob(p),
            weight_range: (0.5, 0.9),
            noise: NoiseFamily::Gaussian,
            n,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 2 {
            return Err(Error::invalid("p must be at least 2"));
        }
        if self.n < 1 {
            return Err(Error::invalid("n must be at least 1"));
        }
        if !(self.edge_prob > 0.0 && self.edge_prob <= 1.0) {
            return Err(Error::invalid(format!("edge probability {} outside (0, 1]", self.edge_prob)));
        }
        let (lo, hi) = self.weight_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::invalid(format!("weight range [{lo}, {hi}] is invalid")));
        }
        Ok(())
    }
}

/// `0.075 p / (p - 1)`.
pub fn default_edge_prob(p: usize) -> f64 {
    0.075 * p as f64 / (p as f64 - 1.0)
}

/// Edge probability whose expected edge count over `C(p, 2)` pairs is `expected_edges`.
pub fn edge_prob_for(p: usize, expected_edges: f64) -> f64 {
    let pairs = (p * (p - 1) / 2) as f64;
    (expected_edges / pairs).min(1.0)
}

pub fn generate_dag(cfg: &GenConfig) -> Result<(GaussianSem, Skeleton)> {
    cfg.validate()?;
    let p = cfg.p;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut lower = vec![vec![false; p]; p];
    for (i, row) in lower.iter_mut().enumerate() {
        for cell in row.iter_mut().take(i) {
            *cell = rng.random_bool(cfg.edge_prob);
        }
    }

    let mut perm: Vec<usize> = (0..p).collect();
    perm.shuffle(&mut rng);
    let mut pattern = vec![vec![false; p]; p];
    for i in 0..p {
        for j in 0..i {
            if lower[i][j] {
                pattern[perm[i]][perm[j]] = true;
            }
        }
    }

    let (lo, hi) = cfg.weight_range;
    let mut weights = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..p {
            if pattern[i][j] {
                weights[i][j] = if lo == hi { lo } else { rng.random_range(lo..=hi) };
            }
        }
    }

    let names = (0..p).map(|i| format!("X{i}")).collect();
    let sem = GaussianSem::new(names, weights, vec![Noise::standard(cfg.noise); p])?;
    let skeleton = sem.skeleton();
    Ok((sem, skeleton))
}

/// Draws `n` samples from the SEM, visiting variables in topological order.
pub fn sample_sem(sem: &GaussianSem, n: usize, seed: u64) -> Result<Dataset> {
    if n < 1 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let order = topological_order(&sem.weights)?;
    let p = sem.p();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns = vec![Vec::new(); p];
    for &j in &order {
        let mut col = vec![0.0; n];
        sem.noise[j].fill(&mut rng, &mut col);
        for (i, row) in sem.weights.iter().enumerate() {
            let w = row[j];
            if w != 0.0 {
                for (c, &x) in col.iter_mut().zip(&columns[i]) {
                    *c += w * x;
                }
            }
        }
        columns[j] = col;
    }
    Dataset::new(sem.names.clone(), columns)
}

#[derive(Debug, Serialize, Deserialize)]
struct NetworkDoc {
    nodes: Vec<NodeDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeDoc {
    name: String,
    noise_sd: f64,
    #[serde(default)]
    parents: Vec<ParentDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ParentDoc {
    name: String,
    coef: f64,
}

/// Parses a Gaussian network: `{"nodes":[{"name","noise_sd","parents":[{"name","coef"}]}]}`.
pub fn parse_gaussian_network(text: &str) -> Result<GaussianSem> {
    let doc: NetworkDoc = serde_json::from_str(text)?;
    let index: BTreeMap<&str, usize> = doc
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.name.as_str(), i))
        .collect();
    if index.len() != doc.nodes.len() {
        return Err(Error::invalid("duplicate node name in network"));
    }
    let p = doc.nodes.len();
    let mut weights = vec![vec![0.0; p]; p];
    let mut noise = Vec::with_capacity(p);
    for (child, node) in doc.nodes.iter().enumerate() {
        noise.push(Noise::Gaussian { sd: node.noise_sd });
        for parent in &node.parents {
            let &i = index.get(parent.name.as_str()).ok_or_else(|| {
                Error::invalid(format!(
                    "node `{}` lists unknown parent `{}`",
                    node.name, parent.name
                ))
            })?;
            if weights[i][child] != 0.0 {
                return Err(Error::invalid(format!(
                    "parent `{}` listed twice for `{}`",
                    parent.name, node.name
                )));
            }
            if i == child {
                return Err(Error::Cycle(format!("`{}` is its own parent", node.name)));
            }
            weights[i][child] = parent.coef;
        }
    }
    let names = doc.nodes.into_iter().map(|n| n.name).collect();
    GaussianSem::new(names, weights, noise)
}

pub fn load_gaussian_network(path: impl AsRef<Path>) -> Result<GaussianSem> {
    parse_gaussian_network(&std::fs::read_to_string(path)?)
}

/// Serialises a SEM whose noises are all Gaussian into the network format.
pub fn gaussian_network_json(sem: &GaussianSem) -> Result<String> {
    let mut nodes = Vec::with_capacity(sem.p());
    for (j, name) in sem.names.iter().enumerate() {
        let Noise::Gaussian { sd } = sem.noise[j] else {
            return Err(Error::invalid(format!(
                "node `{name}` has non-Gaussian noise; the network format stores only a standard deviation"
            )));
        };
        let parents = (0..sem.p())
            .filter(|&i| sem.weights[i][j] != 0.0)
            .map(|i| ParentDoc {
                name: sem.names[i].clone(),
                coef: sem.weights[i][j],
            })
            .collect();
        nodes.push(NodeDoc {
            name: name.clone(),
            noise_sd: sd,
            parents,
        });
    }
    Ok(serde_json::to_string_pretty(&NetworkDoc { nodes })?)
}
