//! Conditional-independence testing and the canonicalising query cache.
//!
//! The number of distinct canonical queries held by a [`CiCache`] is the cost
//! metric reported for every learner.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::data::Dataset;
use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.05;
const RIDGE: f64 = 1e-8;
const PIVOT_EPS: f64 = 1e-13;
const R_CLAMP: f64 = 1.0 - 1e-12;

/// `X_i ⟂ X_j | X_cond` with `i < j` and `cond` sorted, duplicate-free, excluding `i` and `j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CiQuery {
    i: usize,
    j: usize,
    cond: Vec<usize>,
}

impl CiQuery {
    pub fn new(x: usize, y: usize, cond: &[usize]) -> Result<Self> {
        if x == y {
            return Err(Error::invalid(format!("query tests variable {x} against itself")));
        }
        let (i, j) = if x < y { (x, y) } else { (y, x) };
        let mut cond = cond.to_vec();
        cond.sort_unstable();
        cond.dedup();
        if cond.binary_search(&i).is_ok() || cond.binary_search(&j).is_ok() {
            return Err(Error::invalid(format!(
                "conditioning set {cond:?} contains a tested variable ({i}, {j})"
            )));
        }
        Ok(Self { i, j, cond })
    }

    pub fn i(&self) -> usize {
        self.i
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn cond(&self) -> &[usize] {
        &self.cond
    }

    pub fn order(&self) -> usize {
        self.cond.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiResult {
    pub statistic: f64,
    pub p_value: f64,
    pub independent: bool,
}

impl CiResult {
    pub fn from_p_value(statistic: f64, p_value: f64, alpha: f64) -> Self {
        Self {
            statistic,
            p_value,
            independent: p_value > alpha,
        }
    }
}

/// A conditional-independence test bound to one dataset and significance level.
///
/// Engines must be deterministic: the same query always yields the same result.
pub trait CiEngine: Send + Sync {
    /// Short identifier recorded in run reports.
    fn tag(&self) -> &'static str;
    fn alpha(&self) -> f64;
    fn test(&self, q: &CiQuery) -> Result<CiResult>;
}

/// Fisher's z test on partial correlations from the inverse correlation submatrix.
#[derive(Debug, Clone)]
pub struct FisherZ {
    p: usize,
    n: usize,
    corr: Vec<f64>,
    alpha: f64,
}

impl FisherZ {
    pub fn new(d: &Dataset, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid(format!("alpha = {alpha} outside (0, 1)")));
        }
        let (n, p) = (d.n(), d.p());
        let centred: Vec<Vec<f64>> = d
            .columns()
            .iter()
            .map(|c| {
                let mean = c.iter().sum::<f64>() / n as f64;
                c.iter().map(|v| v - mean).collect()
            })
            .collect();
        let ss: Vec<f64> = centred.iter().map(|c| c.iter().map(|v| v * v).sum()).collect();
        let mut corr = vec![0.0; p * p];
        for a in 0..p {
            corr[a * p + a] = 1.0;
            for b in a + 1..p {
                let sab: f64 = centred[a].iter().zip(&centred[b]).map(|(x, y)| x * y).sum();
                let denom = (ss[a] * ss[b]).sqrt();
                let r = if denom > 0.0 { (sab / denom).clamp(-1.0, 1.0) } else { 0.0 };
                corr[a * p + b] = r;
                corr[b * p + a] = r;
            }
        }
        Ok(Self { p, n, corr, alpha })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn correlation(&self, a: usize, b: usize) -> f64 {
        self.corr[a * self.p + b]
    }

    /// Partial correlation `-P_ij / sqrt(P_ii P_jj)` of the precision matrix over `{i, j} ∪ cond`.
    pub fn partial_correlation(&self, q: &CiQuery) -> Result<f64> {
        if q.j >= self.p || q.cond.last().is_some_and(|&c| c >= self.p) {
            return Err(Error::invalid(format!("query {q:?} out of range for p = {}", self.p)));
        }
        if q.cond.is_empty() {
            return Ok(self.correlation(q.i, q.j));
        }
        let vars: Vec<usize> = [q.i, q.j].into_iter().chain(q.cond.iter().copied()).collect();
        let m = vars.len();
        let mut sub = vec![0.0; m * m];
        for (a, &va) in vars.iter().enumerate() {
            for (b, &vb) in vars.iter().enumerate() {
                sub[a * m + b] = self.correlation(va, vb);
            }
        }
        let prec = match invert(&sub, m) {
            Some(p) => p,
            None => {
                for a in 0..m {
                    sub[a * m + a] += RIDGE;
                }
                invert(&sub, m).ok_or_else(|| Error::Singular {
                    i: q.i,
                    j: q.j,
                    cond: q.cond.clone(),
                })?
            }
        };
        let denom = (prec[0] * prec[m + 1]).sqrt();
        if !(denom > 0.0 && denom.is_finite()) {
            return Err(Error::Singular {
                i: q.i,
                j: q.j,
                cond: q.cond.clone(),
            });
        }
        Ok((-prec[1] / denom).clamp(-1.0, 1.0))
    }
}

impl CiEngine for FisherZ {
    fn tag(&self) -> &'static str {
        "fisher-z"
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn test(&self, q: &CiQuery) -> Result<CiResult> {
        if self.n <= q.order() + 3 {
            return Err(Error::InsufficientSamples {
                n: self.n,
                cond: q.order(),
            });
        }
        let r = self.partial_correlation(q)?;
        Ok(fisher_z_from_r(r, self.n, q.order(), self.alpha))
    }
}

/// `z = atanh(r) sqrt(n - |S| - 3)`, two-sided p-value `2 (1 - Φ(|z|))`.
pub fn fisher_z_from_r(r: f64, n: usize, cond_len: usize, alpha: f64) -> CiResult {
    let r = r.clamp(-R_CLAMP, R_CLAMP);
    let z = 0.5 * ((1.0 + r) / (1.0 - r)).ln() * ((n - cond_len - 3) as f64).sqrt();
    // erfc keeps precision in the far tail where 1 - Φ would cancel
    let p_value = erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0);
    CiResult::from_p_value(z, p_value, alpha)
}

/// One-off Fisher-z test; prefer a [`FisherZ`] engine when issuing many queries.
pub fn fisher_z(d: &Dataset, q: &CiQuery, alpha: f64) -> Result<CiResult> {
    FisherZ::new(d, alpha)?.test(q)
}

/// Gauss–Jordan inverse with partial pivoting; `None` when a pivot vanishes.
fn invert(a: &[f64], m: usize) -> Option<Vec<f64>> {
    let mut a = a.to_vec();
    let mut inv = vec![0.0; m * m];
    for k in 0..m {
        inv[k * m + k] = 1.0;
    }
    for col in 0..m {
        let piv = (col..m).max_by(|&r, &s| a[r * m + col].abs().total_cmp(&a[s * m + col].abs()))?;
        if a[piv * m + col].abs() < PIVOT_EPS {
            return None;
        }
        if piv != col {
            for c in 0..m {
                a.swap(piv * m + c, col * m + c);
                inv.swap(piv * m + c, col * m + c);
            }
        }
        let d = a[col * m + col];
        for c in 0..m {
            a[col * m + c] /= d;
            inv[col * m + c] /= d;
        }
        for r in 0..m {
            if r != col {
                let f = a[r * m + col];
                if f != 0.0 {
                    for c in 0..m {
                        a[r * m + c] -= f * a[col * m + c];
                        inv[r * m + c] -= f * inv[col * m + c];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// A query exactly as a caller issued it, before canonicalisation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssuedQuery {
    pub x: usize,
    pub y: usize,
    pub cond: Vec<usize>,
}

/// Thread-safe memo of CI verdicts keyed by canonical query.
///
/// A cache belongs to a single dataset and engine. Concurrent misses on the same
/// key may both run the engine; the first stored result wins and, because engines
/// are deterministic, all callers observe the same verdict.
#[derive(Debug, Default)]
pub struct CiCache {
    entries: Mutex<HashMap<CiQuery, CiResult>>,
    log: Option<Mutex<Vec<IssuedQuery>>>,
}

impl CiCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// A cache that additionally records every issued query, hits included.
    pub fn with_log() -> Self {
        Self {
            entries: Mutex::default(),
            log: Some(Mutex::default()),
        }
    }

    pub fn test(&self, engine: &dyn CiEngine, x: usize, y: usize, cond: &[usize]) -> Result<CiResult> {
        let q = CiQuery::new(x, y, cond)?;
        if let Some(log) = &self.log {
            log.lock().expect("log lock").push(IssuedQuery {
                x,
                y,
                cond: cond.to_vec(),
            });
        }
        if let Some(hit) = self.entries.lock().expect("cache lock").get(&q) {
            return Ok(*hit);
        }
        let result = engine.test(&q)?;
        Ok(*self
            .entries
            .lock()
            .expect("cache lock")
            .entry(q)
            .or_insert(result))
    }

    pub fn contains(&self, x: usize, y: usize, cond: &[usize]) -> bool {
        CiQuery::new(x, y, cond)
            .map(|q| self.entries.lock().expect("cache lock").contains_key(&q))
            .unwrap_or(false)
    }

    pub fn get(&self, x: usize, y: usize, cond: &[usize]) -> Option<CiResult> {
        let q = CiQuery::new(x, y, cond).ok()?;
        self.entries.lock().expect("cache lock").get(&q).copied()
    }

    /// Number of distinct canonical queries executed.
    pub fn unique_count(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    /// Cached queries in canonical order.
    pub fn queries(&self) -> Vec<CiQuery> {
        let mut keys: Vec<CiQuery> = self.entries.lock().expect("cache lock").keys().cloned().collect();
        keys.sort();
        keys
    }

    /// Issued queries in call order; empty unless built with [`CiCache::with_log`].
    pub fn issued(&self) -> Vec<IssuedQuery> {
        self.log
            .as_ref()
            .map(|l| l.lock().expect("log lock").clone())
            .unwrap_or_default()
    }

    /// Number of issued queries logged so far.
    pub fn issued_len(&self) -> usize {
        self.log
            .as_ref()
            .map(|l| l.lock().expect("log lock").len())
            .unwrap_or(0)
    }
}
