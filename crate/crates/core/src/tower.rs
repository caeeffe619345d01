//! The suspension automorphism over a Markov chain with an integer roof.
//!
//! Column `a` has levels `0..=f(a)`, so `f(a) + 1` cells, each carrying mass
//! `gamma * pi_a`. A point climbs one level per step; from the top level it
//! drops to level 0 of a column drawn from the chain's row.

use rand::Rng;
use serde::Serialize;

use crate::chain::MarkovChain;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoofFunction {
    values: Vec<u32>,
}

impl RoofFunction {
    /// Roof values aligned with the chain's state order.
    pub fn new(values: Vec<u32>) -> Self {
        Self { values }
    }

    pub fn constant(states: usize, height: u32) -> Self {
        Self::new(vec![height; states])
    }

    /// Looks every state of `chain` up in `values` by id.
    pub fn from_ids<'a, I>(chain: &MarkovChain, values: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, u32)>,
    {
        let mut out = vec![None; chain.len()];
        for (id, v) in values {
            out[chain.index_of(id)?] = Some(v);
        }
        let values = out
            .into_iter()
            .enumerate()
            .map(|(a, v)| v.ok_or_else(|| Error::RoofMissingState(chain.id(a).to_string())))
            .collect::<Result<_>>()?;
        Ok(Self::new(values))
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn get(&self, state: usize) -> u32 {
        self.values[state]
    }

    pub fn max(&self) -> u32 {
        self.values.iter().copied().max().unwrap_or(0)
    }

    /// `sum_a pi_a f(a)`.
    pub fn mean(&self, pi: &[f64]) -> f64 {
        self.values
            .iter()
            .zip(pi)
            .map(|(&f, &p)| p * f as f64)
            .sum()
    }
}

/// A point of the tower: column (base symbol) and level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct TowerState {
    pub base: usize,
    pub height: u32,
}

impl TowerState {
    /// The symbol emitted at this point: the column's base symbol.
    pub fn symbol(&self) -> usize {
        self.base
    }
}

#[derive(Debug, Clone)]
pub struct Suspension {
    chain: MarkovChain,
    roof: RoofFunction,
    pi: Vec<f64>,
    gamma: f64,
    atom_cdf: Vec<f64>,
}

impl Suspension {
    pub fn new(chain: MarkovChain, roof: RoofFunction) -> Result<Self> {
        if roof.values.len() != chain.len() {
            let missing = roof.values.len().min(chain.len());
            return Err(Error::RoofMissingState(
                chain.ids().get(missing).cloned().unwrap_or_default(),
            ));
        }
        if let Some(a) = roof.values.iter().position(|&f| f < 1) {
            return Err(Error::RoofTooLow {
                state: chain.id(a).to_string(),
                value: roof.values[a],
            });
        }
        let pi = chain.stationary()?.to_vec();
        let levels: f64 = pi
            .iter()
            .zip(&roof.values)
            .map(|(&p, &f)| p * (f as f64 + 1.0))
            .sum();
        let gamma = 1.0 / levels;
        let mut acc = 0.0;
        let atom_cdf = pi
            .iter()
            .zip(&roof.values)
            .map(|(&p, &f)| {
                acc += gamma * p * (f as f64 + 1.0);
                acc
            })
            .collect();
        Ok(Self {
            chain,
            roof,
            pi,
            gamma,
            atom_cdf,
        })
    }

    pub fn chain(&self) -> &MarkovChain {
        &self.chain
    }

    pub fn roof(&self) -> &RoofFunction {
        &self.roof
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// Roof height `f(a)`; the top level of column `a`.
    pub fn height(&self, a: usize) -> u32 {
        self.roof.values[a]
    }

    /// Number of levels in column `a`, `f(a) + 1`.
    pub fn column_len(&self, a: usize) -> usize {
        self.roof.values[a] as usize + 1
    }

    pub fn p(&self, a: usize, b: usize) -> f64 {
        self.chain.transition(a, b)
    }

    /// `ln p_ab`, `-inf` for a forbidden transition.
    pub fn ln_p(&self, a: usize, b: usize) -> f64 {
        self.p(a, b).ln()
    }

    /// Mass of a single cell `(a, u)`: `gamma * pi_a`.
    pub fn cell_mass(&self, a: usize) -> f64 {
        self.gamma * self.pi[a]
    }

    /// Mass of the whole column over `a`: `gamma * pi_a * (f(a) + 1)`.
    pub fn atom_mass(&self, a: usize) -> f64 {
        self.cell_mass(a) * self.column_len(a) as f64
    }

    pub fn atom_mass_by_id(&self, id: &str) -> Result<f64> {
        Ok(self.atom_mass(self.chain.index_of(id)?))
    }

    pub fn atom_masses(&self) -> Vec<f64> {
        (0..self.len()).map(|a| self.atom_mass(a)).collect()
    }

    pub fn mean_roof(&self) -> f64 {
        self.roof.mean(&self.pi)
    }

    pub fn state(&self, base: usize, height: u32) -> Result<TowerState> {
        if base >= self.len() {
            return Err(Error::StateOutOfRange(base));
        }
        if height > self.height(base) {
            return Err(Error::InvalidArgument(format!(
                "height {height} above roof {} of `{}`",
                self.height(base),
                self.chain.id(base)
            )));
        }
        Ok(TowerState { base, height })
    }

    pub fn is_top(&self, s: TowerState) -> bool {
        s.height == self.height(s.base)
    }

    pub fn is_bottom(&self, s: TowerState) -> bool {
        s.height == 0
    }

    /// One application of the tower map.
    pub fn step<R: Rng + ?Sized>(&self, s: TowerState, rng: &mut R) -> TowerState {
        if s.height < self.height(s.base) {
            TowerState {
                base: s.base,
                height: s.height + 1,
            }
        } else {
            TowerState {
                base: self.chain.sample_next(s.base, rng.gen()),
                height: 0,
            }
        }
    }

    /// Draws a point from the invariant law: column by atom mass, level
    /// uniform within the column.
    pub fn stationary_state_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> TowerState {
        let u: f64 = rng.gen();
        let base = self
            .atom_cdf
            .partition_point(|&c| c <= u)
            .min(self.len() - 1);
        let height = rng.gen_range(0..=self.height(base));
        TowerState { base, height }
    }

    /// Exact one-step pushforward of a law over cells, indexed as
    /// `law[a][u]`.
    pub fn push_cells(&self, law: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = (0..self.len()).map(|a| vec![0.0; self.column_len(a)]).collect();
        for (a, column) in law.iter().enumerate() {
            let top = self.height(a) as usize;
            for u in 0..top {
                out[a][u + 1] += column[u];
            }
            for &(b, p) in self.chain.row(a) {
                out[b][0] += column[top] * p;
            }
        }
        out
    }

    /// The invariant law over cells, `law[a][u] = gamma * pi_a`.
    pub fn cell_law(&self) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|a| vec![self.cell_mass(a); self.column_len(a)])
            .collect()
    }
}
