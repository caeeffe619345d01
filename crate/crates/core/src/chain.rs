//! Finite truncations of countable-state stationary Markov chains.
//!
//! States carry string ids but are addressed internally by their position in
//! the declared order. Transition rows are sparse and kept sorted by target.

use std::collections::HashMap;
use std::sync::OnceLock;

use serde::Serialize;

use crate::entropy_term;
use crate::error::{Error, Result};

/// Row sums and the stationary normalization must hold to this tolerance.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Residual at which fixed-point iteration for the stationary law stops.
pub const STATIONARY_RESIDUAL: f64 = 1e-13;
/// Iteration cap for the fixed-point stationary solver.
pub const STATIONARY_MAX_ITERS: usize = 1_000_000;

#[derive(Debug)]
pub struct MarkovChain {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    rows: Vec<Vec<(usize, f64)>>,
    stationary: OnceLock<Vec<f64>>,
}

impl Clone for MarkovChain {
    fn clone(&self) -> Self {
        let stationary = OnceLock::new();
        if let Some(pi) = self.stationary.get() {
            let _ = stationary.set(pi.clone());
        }
        Self {
            ids: self.ids.clone(),
            index: self.index.clone(),
            rows: self.rows.clone(),
            stationary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowDefect {
    pub state: String,
    pub sum: f64,
    /// `1 - sum`.
    pub deficit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NegativeEntry {
    pub from: String,
    pub to: String,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub state_count: usize,
    pub row_defects: Vec<RowDefect>,
    pub negative_entries: Vec<NegativeEntry>,
    pub irreducible: bool,
    /// Sizes of the communicating classes, in order of their first state.
    pub class_sizes: Vec<usize>,
    /// First state (in declared order) of each communicating class.
    pub class_representatives: Vec<String>,
}

impl MarkovChain {
    /// Builds a chain from per-state sparse rows `(target, p)`.
    ///
    /// Structural problems (empty state set, duplicate ids, out-of-range or
    /// repeated targets) are rejected here. Probabilistic problems such as bad
    /// row sums are left for [`MarkovChain::validate`] to report.
    pub fn from_rows(ids: Vec<String>, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::EmptyChain);
        }
        if rows.len() != ids.len() {
            return Err(Error::InvalidChain(format!(
                "{} rows for {} states",
                rows.len(),
                ids.len()
            )));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateState(id.clone()));
            }
        }
        let n = ids.len();
        let mut sorted = Vec::with_capacity(n);
        for (from, mut row) in rows.into_iter().enumerate() {
            row.retain(|&(_, p)| p != 0.0);
            row.sort_by_key(|&(to, _)| to);
            for w in row.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::InvalidChain(format!(
                        "duplicate transition {} -> {}",
                        ids[from], ids[w[0].0]
                    )));
                }
            }
            if let Some(&(to, _)) = row.iter().find(|&&(to, _)| to >= n) {
                return Err(Error::StateOutOfRange(to));
            }
            sorted.push(row);
        }
        Ok(Self {
            ids,
            index,
            rows: sorted,
            stationary: OnceLock::new(),
        })
    }

    /// Builds a chain from `(from, to, p)` triples over string ids.
    pub fn from_transitions(ids: Vec<String>, transitions: &[(String, String, f64)]) -> Result<Self> {
        let lookup: HashMap<&str, usize> =
            ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let mut rows = vec![Vec::new(); ids.len()];
        for (from, to, p) in transitions {
            let a = *lookup
                .get(from.as_str())
                .ok_or_else(|| Error::UnknownState(from.clone()))?;
            let b = *lookup
                .get(to.as_str())
                .ok_or_else(|| Error::UnknownState(to.clone()))?;
            rows[a].push((b, *p));
        }
        Self::from_rows(ids, rows)
    }

    /// Builds a chain from a dense row-stochastic matrix, naming states `0..n`.
    pub fn from_dense(matrix: &[Vec<f64>]) -> Result<Self> {
        let ids = (0..matrix.len()).map(|i| i.to_string()).collect();
        let rows = matrix
            .iter()
            .map(|r| r.iter().copied().enumerate().collect())
            .collect();
        Self::from_rows(ids, rows)
    }

    /// Installs a stationary law known in closed form. The caller is
    /// responsible for its correctness; tests check the balance residual.
    pub(crate) fn with_stationary(self, pi: Vec<f64>) -> Self {
        debug_assert_eq!(pi.len(), self.ids.len());
        let _ = self.stationary.set(pi);
        self
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, state: usize) -> &str {
        &self.ids[state]
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownState(id.to_string()))
    }

    pub fn row(&self, state: usize) -> &[(usize, f64)] {
        &self.rows[state]
    }

    pub fn transition(&self, from: usize, to: usize) -> f64 {
        let row = &self.rows[from];
        match row.binary_search_by_key(&to, |&(t, _)| t) {
            Ok(i) => row[i].1,
            Err(_) => 0.0,
        }
    }

    /// Picks the successor of `from` for a uniform draw `u` in `[0, 1)`.
    pub fn sample_next(&self, from: usize, u: f64) -> usize {
        let row = &self.rows[from];
        let mut acc = 0.0;
        for &(to, p) in row {
            acc += p;
            if u < acc {
                return to;
            }
        }
        row.last().map(|&(to, _)| to).unwrap_or(from)
    }

    pub fn validate(&self) -> ValidationReport {
        let mut row_defects = Vec::new();
        let mut negative_entries = Vec::new();
        for (a, row) in self.rows.iter().enumerate() {
            let sum: f64 = row.iter().map(|&(_, p)| p).sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                row_defects.push(RowDefect {
                    state: self.ids[a].clone(),
                    sum,
                    deficit: 1.0 - sum,
                });
            }
            for &(b, p) in row {
                if p < 0.0 || p.is_nan() {
                    negative_entries.push(NegativeEntry {
                        from: self.ids[a].clone(),
                        to: self.ids[b].clone(),
                        p,
                    });
                }
            }
        }
        let classes = self.communicating_classes();
        let irreducible = classes.len() == 1;
        ValidationReport {
            passed: row_defects.is_empty() && negative_entries.is_empty() && irreducible,
            state_count: self.len(),
            row_defects,
            negative_entries,
            irreducible,
            class_sizes: classes.iter().map(Vec::len).collect(),
            class_representatives: classes
                .iter()
                .map(|c| self.ids[c[0]].clone())
                .collect(),
        }
    }

    /// Strongly connected components of the positive-transition graph
    /// (Kosaraju, iterative). Each class is sorted; classes are ordered by
    /// their smallest state.
    fn communicating_classes(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut order = Vec::with_capacity(n);
        let mut seen = vec![false; n];
        for root in 0..n {
            if seen[root] {
                continue;
            }
            seen[root] = true;
            let mut stack = vec![(root, 0usize)];
            while let Some(&mut (v, ref mut next)) = stack.last_mut() {
                let row = &self.rows[v];
                let mut pushed = false;
                while *next < row.len() {
                    let (w, p) = row[*next];
                    *next += 1;
                    if p > 0.0 && !seen[w] {
                        seen[w] = true;
                        stack.push((w, 0));
                        pushed = true;
                        break;
                    }
                }
                if !pushed {
                    order.push(v);
                    stack.pop();
                }
            }
        }

        let mut reverse = vec![Vec::new(); n];
        for (a, row) in self.rows.iter().enumerate() {
            for &(b, p) in row {
                if p > 0.0 {
                    reverse[b].push(a);
                }
            }
        }
        let mut component = vec![usize::MAX; n];
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for &root in order.iter().rev() {
            if component[root] != usize::MAX {
                continue;
            }
            let id = classes.len();
            let mut members = vec![root];
            component[root] = id;
            let mut stack = vec![root];
            while let Some(v) = stack.pop() {
                for &w in &reverse[v] {
                    if component[w] == usize::MAX {
                        component[w] = id;
                        members.push(w);
                        stack.push(w);
                    }
                }
            }
            members.sort_unstable();
            classes.push(members);
        }
        classes.sort_by_key(|c| c[0]);
        classes
    }

    /// Stationary law, computed on first use and cached.
    ///
    /// Chains with renewal shape (state `i` moves only to the first state or
    /// to `i + 1`) use the closed form `pi_{i+1} = pi_i p_{i,i+1}`; everything
    /// else iterates `pi <- pi P` from the uniform vector.
    pub fn stationary(&self) -> Result<&[f64]> {
        if let Some(pi) = self.stationary.get() {
            return Ok(pi);
        }
        let report = self.validate();
        if !report.passed {
            return Err(Error::InvalidChain(summarize(&report)));
        }
        let pi = match self.renewal_stationary() {
            Some(pi) => pi,
            None => self.iterate_stationary()?,
        };
        let _ = self.stationary.set(pi);
        Ok(self.stationary.get().expect("just set"))
    }

    fn renewal_stationary(&self) -> Option<Vec<f64>> {
        let n = self.len();
        let mut weights = Vec::with_capacity(n);
        weights.push(1.0);
        for (i, row) in self.rows.iter().enumerate() {
            let next = i + 1;
            if row.iter().any(|&(to, _)| to != 0 && to != next) {
                return None;
            }
            if next < n {
                let q = self.transition(i, next);
                if q <= 0.0 {
                    return None;
                }
                weights.push(weights[i] * q);
            }
        }
        let total: f64 = weights.iter().sum();
        Some(weights.into_iter().map(|w| w / total).collect())
    }

    fn iterate_stationary(&self) -> Result<Vec<f64>> {
        let n = self.len();
        let mut pi = vec![1.0 / n as f64; n];
        let mut next = vec![0.0; n];
        let mut residual = f64::INFINITY;
        for _ in 0..STATIONARY_MAX_ITERS {
            self.push_forward(&pi, &mut next);
            residual = pi
                .iter()
                .zip(&next)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let total: f64 = next.iter().sum();
            for v in next.iter_mut() {
                *v /= total;
            }
            std::mem::swap(&mut pi, &mut next);
            if residual <= STATIONARY_RESIDUAL {
                return Ok(pi);
            }
        }
        Err(Error::NoConvergence {
            iterations: STATIONARY_MAX_ITERS,
            residual,
        })
    }

    /// `out = dist * P`.
    pub fn push_forward(&self, dist: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (a, row) in self.rows.iter().enumerate() {
            let m = dist[a];
            if m == 0.0 {
                continue;
            }
            for &(b, p) in row {
                out[b] += m * p;
            }
        }
    }

    /// `max_b |(pi P)_b - pi_b|`.
    pub fn stationarity_residual(&self, pi: &[f64]) -> f64 {
        let mut out = vec![0.0; self.len()];
        self.push_forward(pi, &mut out);
        pi.iter()
            .zip(&out)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Entropy rate `-sum_a pi_a sum_b p_ab ln p_ab` in nats.
    pub fn entropy_rate(&self) -> Result<f64> {
        let pi = self.stationary()?;
        Ok(self
            .rows
            .iter()
            .zip(pi)
            .map(|(row, &w)| w * row_entropy(row))
            .sum())
    }

    /// `-sum pi_a ln pi_a` over the first `prefix_count` states.
    pub fn marginal_entropy_partial(&self, prefix_count: usize) -> Result<f64> {
        if prefix_count == 0 || prefix_count > self.len() {
            return Err(Error::InvalidArgument(format!(
                "prefix_count {prefix_count} not in 1..={}",
                self.len()
            )));
        }
        let pi = self.stationary()?;
        Ok(pi[..prefix_count].iter().map(|&p| entropy_term(p)).sum())
    }
}

/// Shannon entropy of one sparse row, in nats.
pub fn row_entropy(row: &[(usize, f64)]) -> f64 {
    row.iter().map(|&(_, p)| entropy_term(p)).sum()
}

fn summarize(report: &ValidationReport) -> String {
    let mut parts = Vec::new();
    if let Some(d) = report.row_defects.first() {
        parts.push(format!(
            "{} row(s) off by more than {ROW_SUM_TOL:e} (first: `{}` sums to {})",
            report.row_defects.len(),
            d.state,
            d.sum
        ));
    }
    if !report.negative_entries.is_empty() {
        parts.push(format!("{} negative entries", report.negative_entries.len()));
    }
    if !report.irreducible {
        parts.push(format!(
            "{} communicating classes",
            report.class_sizes.len()
        ));
    }
    parts.join("; ")
}
