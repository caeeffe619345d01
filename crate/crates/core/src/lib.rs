//! Suspension (tower) automorphisms over countable-state Markov chains.
//!
//! The crate builds the tower over a finitely truncated stationary Markov
//! chain with an integer roof, computes exact measures of finite names of the
//! tower's symbol process, and derives conditional entropies from them. Monte
//! Carlo routines check the Shannon-McMillan-Breiman limit for both the tower
//! and the base chain.
//!
//! All logarithms are natural and all entropies are in nats.

pub mod chain;
pub mod cylinder;
pub mod entropy;
pub mod error;
pub mod model;
pub mod rng;
pub mod smb;
pub mod tower;
pub mod zoo;

pub use chain::{MarkovChain, ValidationReport};
pub use cylinder::{AtomClass, AtomInfo, Decoded, Name, NameScanner, StartCase};

pub use entropy::{EntropyReport, NStepEntropy};
pub use error::{Error, Result};
pub use smb::{SmbRun, SupGReport};

pub use tower::{RoofFunction, Suspension, TowerState};

/// `-p ln p` with `0 ln 0 = 0`.
#[inline]
pub fn entropy_term(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.ln()
    } else {
        0.0
    }
}

/// Stable `ln sum exp(x_i)`; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
pub(crate) mod testkit {
    use proptest::prelude::*;

    use crate::chain::MarkovChain;
    use crate::tower::{RoofFunction, Suspension};

    pub fn dense(m: &[Vec<f64>]) -> MarkovChain {
        MarkovChain::from_dense(m).unwrap()
    }

    /// Irreducible chains on up to `max_states` states. The cycle `i -> i+1`
    /// always carries weight; other entries are zeroed at random.
    pub fn arb_chain(max_states: usize) -> impl Strategy<Value = MarkovChain> {
        (1..=max_states).prop_flat_map(|n| {
            prop::collection::vec(prop::collection::vec((0.05f64..1.0, any::<bool>()), n), n)
                .prop_map(move |w| {
                    let m: Vec<Vec<f64>> = w
                        .iter()
                        .enumerate()
                        .map(|(i, row)| {
                            let raw: Vec<f64> = row
                                .iter()
                                .enumerate()
                                .map(|(j, &(x, keep))| {
                                    if keep || j == (i + 1) % n {
                                        x
                                    } else {
                                        0.0
                                    }
                                })
                                .collect();
                            let s: f64 = raw.iter().sum();
                            raw.into_iter().map(|x| x / s).collect()
                        })
                        .collect();
                    dense(&m)
                })
        })
    }

    pub fn arb_suspension(max_states: usize, max_roof: u32) -> impl Strategy<Value = Suspension> {
        arb_chain(max_states).prop_flat_map(move |c| {
            let n = c.len();
            prop::collection::vec(1..=max_roof, n).prop_map(move |roof| {
                Suspension::new(c.clone(), RoofFunction::new(roof)).unwrap()
            })
        })
    }

    /// Measure of a name by pushing the invariant cell law forward along it,
    /// keeping only cells that emit the required symbol.
    pub fn brute_force_measure(s: &Suspension, name: &[usize]) -> f64 {
        let mut law: Vec<Vec<f64>> = (0..s.len())
            .map(|a| {
                let m = if a == name[0] { s.cell_mass(a) } else { 0.0 };
                vec![m; s.column_len(a)]
            })
            .collect();
        for &x in &name[1..] {
            law = s.push_cells(&law);
            for (a, col) in law.iter_mut().enumerate() {
                if a != x {
                    col.iter_mut().for_each(|m| *m = 0.0);
                }
            }
        }
        law.iter().flatten().sum()
    }

    /// The 3-state test system with roof (1, 2, 3).
    pub fn three_state() -> Suspension {
        let c = dense(&[
            vec![0.2, 0.5, 0.3],
            vec![0.4, 0.1, 0.5],
            vec![0.3, 0.3, 0.4],
        ]);
        Suspension::new(c, RoofFunction::new(vec![1, 2, 3])).unwrap()
    }
}
