//! Exact measures of finite forward names of the tower's symbol process.
//!
//! A name `(x_0, ..., x_{n-1})` splits into maximal runs of equal symbols. A
//! change of symbol can only happen when the point drops from the top of one
//! column to the bottom of the next, so every run after the first starts at
//! level 0 and every run before the last ends at a top level. That pins the
//! start height as soon as the name contains a change, and the measure is
//! `gamma * pi_{b_0} * prod p_{b_i, b_{i+1}}` over the base symbols the path
//! visits. Names without any change leave the start height free and their
//! measure sums over it.

use std::fmt;
use std::ops::ControlFlow;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::log_sum_exp;
use crate::tower::Suspension;

/// A finite name of symbols (state indices), in forward time.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Name(Vec<usize>);

impl Name {
    pub fn new(symbols: Vec<usize>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::EmptyName);
        }
        Ok(Self(symbols))
    }

    /// Parses a comma-separated list of state ids.
    pub fn parse(susp: &Suspension, text: &str) -> Result<Self> {
        let symbols = text
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|id| susp.chain().index_of(id))
            .collect::<Result<Vec<_>>>()?;
        Self::new(symbols)
    }

    pub fn symbols(&self) -> &[usize] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }

    pub fn ids(&self, susp: &Suspension) -> Vec<String> {
        self.0.iter().map(|&a| susp.chain().id(a).to_string()).collect()
    }
}

impl std::ops::Deref for Name {
    type Target = [usize];
    fn deref(&self) -> &[usize] {
        &self.0
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Empty,
    /// No change of symbol yet; `len` copies of `symbol`.
    Constant { symbol: usize, len: usize },
    /// At least one change seen; `run` symbols since the last change.
    Jumped { symbol: usize, run: usize },
}

/// Streaming decoder for names: feeds symbols one at a time and keeps the
/// exact log-measure of the prefix seen so far in constant memory.
#[derive(Debug, Clone)]
pub struct NameScanner<'a> {
    susp: &'a Suspension,
    phase: Phase,
    /// `ln` of the path weight accumulated since the first change.
    log_weight: f64,
    pushed: usize,
    invalid_at: Option<usize>,
}

impl<'a> NameScanner<'a> {
    pub fn new(susp: &'a Suspension) -> Self {
        Self {
            susp,
            phase: Phase::Empty,
            log_weight: 0.0,
            pushed: 0,
            invalid_at: None,
        }
    }

    pub fn len(&self) -> usize {
        self.pushed
    }

    pub fn is_empty(&self) -> bool {
        self.pushed == 0
    }

    pub fn is_valid(&self) -> bool {
        self.invalid_at.is_none()
    }

    /// Position of the first symbol no tower point can emit after the prefix.
    pub fn invalid_at(&self) -> Option<usize> {
        self.invalid_at
    }

    /// Last symbol pushed.
    pub fn anchor(&self) -> Option<usize> {
        match self.phase {
            Phase::Empty => None,
            Phase::Constant { symbol, .. } | Phase::Jumped { symbol, .. } => Some(symbol),
        }
    }

    pub fn has_jump(&self) -> bool {
        matches!(self.phase, Phase::Jumped { .. })
    }

    /// Length of the current run of equal symbols.
    pub fn run_length(&self) -> usize {
        match self.phase {
            Phase::Empty => 0,
            Phase::Constant { len, .. } => len,
            Phase::Jumped { run, .. } => run,
        }
    }

    /// Feeds one symbol. Returns `false` once the prefix has become invalid.
    pub fn push(&mut self, b: usize) -> bool {
        if self.invalid_at.is_some() {
            return false;
        }
        let s = self.susp;
        let position = self.pushed;
        self.pushed += 1;
        let next = match self.phase {
            Phase::Empty => (s.pi()[b] > 0.0).then_some(Phase::Constant { symbol: b, len: 1 }),
            Phase::Constant { symbol: a, len } if a == b => {
                (len < s.column_len(a) || s.p(a, a) > 0.0)
                    .then_some(Phase::Constant { symbol: a, len: len + 1 })
            }
            Phase::Constant { symbol: a, len } => {
                let col = s.column_len(a);
                let first = (len - 1) % col + 1;
                let repeats = (len - first) / col;
                let p_ab = s.p(a, b);
                if p_ab > 0.0 && (repeats == 0 || s.p(a, a) > 0.0) {
                    self.log_weight = s.gamma().ln()
                        + s.pi()[a].ln()
                        + power_ln(s.p(a, a), repeats)
                        + p_ab.ln();
                    Some(Phase::Jumped { symbol: b, run: 1 })
                } else {
                    None
                }
            }
            Phase::Jumped { symbol: a, run } if a == b => {
                if run % s.column_len(a) == 0 {
                    let p_aa = s.p(a, a);
                    if p_aa > 0.0 {
                        self.log_weight += p_aa.ln();
                        Some(Phase::Jumped { symbol: a, run: run + 1 })
                    } else {
                        None
                    }
                } else {
                    Some(Phase::Jumped { symbol: a, run: run + 1 })
                }
            }
            Phase::Jumped { symbol: a, run } => {
                let p_ab = s.p(a, b);
                if run % s.column_len(a) == 0 && p_ab > 0.0 {
                    self.log_weight += p_ab.ln();
                    Some(Phase::Jumped { symbol: b, run: 1 })
                } else {
                    None
                }
            }
        };
        match next {
            Some(phase) => {
                self.phase = phase;
                true
            }
            None => {
                self.invalid_at = Some(position);
                false
            }
        }
    }

    /// `ln` of the measure of the cylinder of the symbols pushed so far;
    /// `-inf` when invalid or empty.
    pub fn log_measure(&self) -> f64 {
        if self.invalid_at.is_some() {
            return f64::NEG_INFINITY;
        }
        match self.phase {
            Phase::Empty => f64::NEG_INFINITY,
            Phase::Jumped { .. } => self.log_weight,
            Phase::Constant { symbol, len } => {
                let s = self.susp;
                let terms: Vec<f64> = constant_start_repeats(s, symbol, len)
                    .map(|(_, k)| power_ln(s.p(symbol, symbol), k))
                    .collect();
                s.gamma().ln() + s.pi()[symbol].ln() + log_sum_exp(&terms)
            }
        }
    }

    /// Symbols that can follow the current prefix with positive measure, in
    /// increasing order.
    pub fn successors(&self) -> Vec<usize> {
        if self.invalid_at.is_some() {
            return Vec::new();
        }
        let Some(a) = self.anchor() else {
            return (0..self.susp.len())
                .filter(|&b| self.susp.pi()[b] > 0.0)
                .collect();
        };
        let mut out: Vec<usize> = self
            .susp
            .chain()
            .row(a)
            .iter()
            .map(|&(b, _)| b)
            .collect();
        if let Err(i) = out.binary_search(&a) {
            out.insert(i, a);
        }
        out.retain(|&b| {
            let mut probe = self.clone();
            probe.push(b)
        });
        out
    }
}

/// `k ln p` with `p^0 = 1` even when `p = 0`.
fn power_ln(p: f64, k: usize) -> f64 {
    if k == 0 {
        0.0
    } else {
        k as f64 * p.ln()
    }
}

/// For a constant name of `len` copies of `a`: each start height `u` with the
/// number of self-transitions `k(u, len)` the path needs. The first column
/// supplies `f(a) + 1 - u` symbols.
fn constant_start_repeats(
    susp: &Suspension,
    a: usize,
    len: usize,
) -> impl Iterator<Item = (u32, usize)> {
    let col = susp.column_len(a);
    (0..col).map(move |u| {
        let first = col - u;
        let k = if len <= first {
            0
        } else {
            (len - first).div_ceil(col)
        };
        (u as u32, k)
    })
}

/// One admissible start height of a name.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StartCase {
    pub height: u32,
    /// Self-transitions of the first symbol's column within the window.
    pub repeats: usize,
    /// Measure contributed by this start height.
    pub weight: f64,
    pub log_weight: f64,
    /// Base symbols visited at bottom-level arrivals, initial symbol first.
    pub base_word: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decoded {
    /// Positions `i >= 1` with `x_i != x_{i-1}`.
    pub jump_indices: Vec<usize>,
    /// Reconstructed base word when the name has a jump; empty otherwise
    /// (each start case then carries its own).
    pub base_word: Vec<usize>,
    pub start_cases: Vec<StartCase>,
    pub measure: f64,
    pub log_measure: f64,
}

/// Reconstructs the base-chain data behind a name.
pub fn decode(susp: &Suspension, name: &[usize]) -> Result<Decoded> {
    if name.is_empty() {
        return Err(Error::EmptyName);
    }
    let mut scanner = NameScanner::new(susp);
    for &x in name {
        if !scanner.push(x) {
            return Err(Error::InvalidName {
                position: scanner.invalid_at().expect("invalid"),
            });
        }
    }
    let log_measure = scanner.log_measure();
    let runs = runs(name);
    let jump_indices: Vec<usize> = runs.iter().skip(1).map(|r| r.start).collect();

    if runs.len() == 1 {
        let a = name[0];
        let lead = susp.gamma().ln() + susp.pi()[a].ln();
        let start_cases = constant_start_repeats(susp, a, name.len())
            .map(|(height, repeats)| {
                let log_weight = lead + power_ln(susp.p(a, a), repeats);
                StartCase {
                    height,
                    repeats,
                    weight: log_weight.exp(),
                    log_weight,
                    base_word: vec![a; repeats + 1],
                }
            })
            .collect();
        return Ok(Decoded {
            jump_indices,
            base_word: Vec::new(),
            start_cases,
            measure: log_measure.exp(),
            log_measure,
        });
    }

    let mut base_word = Vec::new();
    let first = &runs[0];
    let col = susp.column_len(first.symbol);
    let first_column = (first.len - 1) % col + 1;
    let repeats = (first.len - first_column) / col;
    let height = (col - first_column) as u32;
    base_word.extend(std::iter::repeat_n(first.symbol, repeats + 1));
    let last = runs.len() - 1;
    for (i, run) in runs.iter().enumerate().skip(1) {
        let col = susp.column_len(run.symbol);
        let columns = if i == last {
            run.len.div_ceil(col)
        } else {
            run.len / col
        };
        base_word.extend(std::iter::repeat_n(run.symbol, columns));
    }
    Ok(Decoded {
        jump_indices,
        start_cases: vec![StartCase {
            height,
            repeats,
            weight: log_measure.exp(),
            log_weight: log_measure,
            base_word: base_word.clone(),
        }],
        base_word,
        measure: log_measure.exp(),
        log_measure,
    })
}

struct Run {
    symbol: usize,
    start: usize,
    len: usize,
}

fn runs(name: &[usize]) -> Vec<Run> {
    let mut out: Vec<Run> = Vec::new();
    for (i, &x) in name.iter().enumerate() {
        match out.last_mut() {
            Some(r) if r.symbol == x => r.len += 1,
            _ => out.push(Run {
                symbol: x,
                start: i,
                len: 1,
            }),
        }
    }
    out
}

/// `ln` of the measure of the forward cylinder of `name`; `-inf` for names
/// no point emits.
pub fn log_cylinder_measure(susp: &Suspension, name: &[usize]) -> f64 {
    let mut scanner = NameScanner::new(susp);
    for &x in name {
        if !scanner.push(x) {
            return f64::NEG_INFINITY;
        }
    }
    scanner.log_measure()
}

pub fn cylinder_measure(susp: &Suspension, name: &[usize]) -> f64 {
    log_cylinder_measure(susp, name).exp()
}

/// Law of the next symbol given the history, as sorted `(symbol, p)` pairs
/// with positive mass.
pub fn conditional_next_distribution(susp: &Suspension, history: &[usize]) -> Result<Vec<(usize, f64)>> {
    if history.is_empty() {
        return Err(Error::EmptyName);
    }
    let mut scanner = NameScanner::new(susp);
    for &x in history {
        scanner.push(x);
    }
    conditional_from_scanner(&scanner)
}

pub(crate) fn conditional_from_scanner(scanner: &NameScanner<'_>) -> Result<Vec<(usize, f64)>> {
    let base = scanner.log_measure();
    if base == f64::NEG_INFINITY {
        return Err(Error::ZeroMeasureHistory);
    }
    Ok(scanner
        .successors()
        .into_iter()
        .map(|b| {
            let mut next = scanner.clone();
            next.push(b);
            (b, (next.log_measure() - base).exp())
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AtomClass {
    /// The run since the last change fills whole columns; the point sits at
    /// a top level and the next symbol follows the chain's row.
    VeryGood,
    /// A change occurred but the point is mid-column; the next symbol is forced.
    GoodNotVeryGood,
    /// Constant history.
    Bad,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AtomInfo {
    pub class: AtomClass,
    pub anchor: usize,
    pub run_length: usize,
    /// Leading-order self-transition exponent `floor(n / (f(a) + 1))`,
    /// present for bad atoms only.
    pub z: Option<usize>,
}

pub fn classify_atom(susp: &Suspension, history: &[usize]) -> Result<AtomInfo> {
    if history.is_empty() {
        return Err(Error::EmptyName);
    }
    let mut scanner = NameScanner::new(susp);
    for &x in history {
        if !scanner.push(x) {
            return Err(Error::InvalidName {
                position: scanner.invalid_at().expect("invalid"),
            });
        }
    }
    Ok(classify_scanner(&scanner))
}

pub(crate) fn classify_scanner(scanner: &NameScanner<'_>) -> AtomInfo {
    let anchor = scanner.anchor().expect("nonempty history");
    let run_length = scanner.run_length();
    let col = scanner.susp.column_len(anchor);
    if !scanner.has_jump() {
        AtomInfo {
            class: AtomClass::Bad,
            anchor,
            run_length,
            z: Some(run_length / col),
        }
    } else if run_length.is_multiple_of(col) {
        AtomInfo {
            class: AtomClass::VeryGood,
            anchor,
            run_length,
            z: None,
        }
    } else {
        AtomInfo {
            class: AtomClass::GoodNotVeryGood,
            anchor,
            run_length,
            z: None,
        }
    }
}

/// Closed-form next-symbol law after a constant history of `a`:
/// `p_ab / (1 + f(a))` off the diagonal, `(p_aa + f(a)) / (1 + f(a))` on it.
/// Exact for one-symbol histories; the leading-order form for longer ones.
pub fn bad_atom_row(susp: &Suspension, a: usize) -> Vec<(usize, f64)> {
    let f = susp.height(a) as f64;
    let mut row: Vec<(usize, f64)> = susp
        .chain()
        .row(a)
        .iter()
        .filter(|&&(b, _)| b != a)
        .map(|&(b, p)| (b, p / (1.0 + f)))
        .collect();
    let stay = (susp.p(a, a) + f) / (1.0 + f);
    let i = row.partition_point(|&(b, _)| b < a);
    row.insert(i, (a, stay));
    row
}

/// Depth-first walk over every valid name of length `len`, in lexicographic
/// state order. The visitor sees the name and the scanner positioned at its
/// end and may stop the walk early.
pub fn for_each_valid_name<F>(susp: &Suspension, len: usize, mut visit: F) -> ControlFlow<()>
where
    F: FnMut(&[usize], &NameScanner<'_>) -> ControlFlow<()>,
{
    let mut name = Vec::with_capacity(len);
    walk_from(&NameScanner::new(susp), len, &mut name, &mut visit)
}

/// Continues the walk from a prefix already fed to `scanner`.
pub(crate) fn walk_from<F>(
    scanner: &NameScanner<'_>,
    len: usize,
    name: &mut Vec<usize>,
    visit: &mut F,
) -> ControlFlow<()>
where
    F: FnMut(&[usize], &NameScanner<'_>) -> ControlFlow<()>,
{
    if name.len() == len {
        return visit(name, scanner);
    }
    for b in scanner.successors() {
        let mut next = scanner.clone();
        next.push(b);
        name.push(b);
        let flow = walk_from(&next, len, name, visit);
        name.pop();
        flow?;
    }
    ControlFlow::Continue(())
}
