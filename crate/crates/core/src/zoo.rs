//! Builtin models and the checks that go with them.
//!
//! The main builtin is a renewal chain on `1..=N` with infinite marginal
//! entropy but finite entropy rate as `N` grows: state `i` returns to `1`
//! with probability `p_i` and advances with probability `q_i`, where the
//! `q_i` are chosen so that `prod_{i<n} q_i = 1 / (n log2^2 n)`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::chain::MarkovChain;
use crate::cylinder::{self, NameScanner};
use crate::entropy_term;
use crate::error::{Error, Result};
use crate::tower::{RoofFunction, Suspension};

pub const DEFAULT_TRUNCATION: usize = 100;

/// Renewal weights `1 / (n log2^2 n)`, with weight 1 at `n = 1`.
fn renewal_weight(n: usize) -> f64 {
    if n == 1 {
        1.0
    } else {
        let l = (n as f64).log2();
        1.0 / (n as f64 * l * l)
    }
}

/// Advance probabilities `q_1, ..., q_{N-1}`.
pub fn pitskel_q(truncation: usize) -> Result<Vec<f64>> {
    if truncation < 2 {
        return Err(Error::InvalidArgument(format!(
            "truncation must be >= 2, got {truncation}"
        )));
    }
    (1..truncation)
        .map(|i| {
            let q = if i == 1 {
                0.5
            } else {
                let (a, b) = ((i as f64).log2(), ((i + 1) as f64).log2());
                (i as f64 * a * a) / ((i + 1) as f64 * b * b)
            };
            if q > 0.0 && q < 1.0 {
                Ok(q)
            } else {
                Err(Error::BadPitskelParameter { index: i, value: q })
            }
        })
        .collect()
}

/// The renewal chain truncated at `N` states; state `N` returns to `1`.
pub fn pitskel_chain(truncation: usize) -> Result<MarkovChain> {
    let q = pitskel_q(truncation)?;
    let ids = (1..=truncation).map(|i| i.to_string()).collect();
    let mut rows: Vec<Vec<(usize, f64)>> = q
        .iter()
        .enumerate()
        .map(|(i, &q)| vec![(0, 1.0 - q), (i + 1, q)])
        .collect();
    rows.push(vec![(0, 1.0)]);
    let weights: Vec<f64> = (1..=truncation).map(renewal_weight).collect();
    let total: f64 = weights.iter().sum();
    let pi = weights.into_iter().map(|w| w / total).collect();
    Ok(MarkovChain::from_rows(ids, rows)?.with_stationary(pi))
}

/// `f(n) = 1 + floor(sqrt(ln(n + 1)))` for the `n`-th state (1-based).
pub fn sqrtlog_roof(states: usize) -> RoofFunction {
    RoofFunction::new(
        (1..=states)
            .map(|n| 1 + ((n as f64 + 1.0).ln().sqrt().floor() as u32))
            .collect(),
    )
}

/// `f = 1, 2, 3, 1, 2, 3, ...` in state order.
pub fn ramp_roof(states: usize) -> RoofFunction {
    RoofFunction::new((0..states).map(|i| 1 + (i % 3) as u32).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RoofBuiltin {
    Sqrtlog,
    Unit,
    Ramp,
}

impl RoofBuiltin {
    pub fn build(self, states: usize) -> RoofFunction {
        match self {
            RoofBuiltin::Sqrtlog => sqrtlog_roof(states),
            RoofBuiltin::Unit => RoofFunction::constant(states, 1),
            RoofBuiltin::Ramp => ramp_roof(states),
        }
    }
}

impl FromStr for RoofBuiltin {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrtlog" => Ok(RoofBuiltin::Sqrtlog),
            "unit" => Ok(RoofBuiltin::Unit),
            "ramp" => Ok(RoofBuiltin::Ramp),
            _ => Err(Error::ModelSpec(format!(
                "unknown roof builtin `{s}` (expected sqrtlog, unit or ramp)"
            ))),
        }
    }
}

impl fmt::Display for RoofBuiltin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RoofBuiltin::Sqrtlog => "sqrtlog",
            RoofBuiltin::Unit => "unit",
            RoofBuiltin::Ramp => "ramp",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainBuiltin {
    Pitskel,
    Coin,
    ThreeState,
    FourState,
}

pub const CHAIN_BUILTINS: [ChainBuiltin; 4] = [
    ChainBuiltin::Pitskel,
    ChainBuiltin::Coin,
    ChainBuiltin::ThreeState,
    ChainBuiltin::FourState,
];

impl ChainBuiltin {
    /// `truncation` only affects `pitskel`.
    pub fn chain(self, truncation: usize) -> Result<MarkovChain> {
        match self {
            ChainBuiltin::Pitskel => pitskel_chain(truncation),
            ChainBuiltin::Coin => MarkovChain::from_dense(&[vec![0.5, 0.5], vec![0.5, 0.5]]),
            ChainBuiltin::ThreeState => MarkovChain::from_dense(&[
                vec![0.2, 0.5, 0.3],
                vec![0.4, 0.1, 0.5],
                vec![0.3, 0.3, 0.4],
            ]),
            ChainBuiltin::FourState => MarkovChain::from_dense(&[
                vec![0.10, 0.40, 0.30, 0.20],
                vec![0.30, 0.20, 0.25, 0.25],
                vec![0.25, 0.25, 0.30, 0.20],
                vec![0.35, 0.15, 0.30, 0.20],
            ]),
        }
    }

    pub fn default_roof(self) -> RoofBuiltin {
        match self {
            ChainBuiltin::Pitskel => RoofBuiltin::Sqrtlog,
            ChainBuiltin::Coin => RoofBuiltin::Unit,
            ChainBuiltin::ThreeState | ChainBuiltin::FourState => RoofBuiltin::Ramp,
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ChainBuiltin::Pitskel => {
                "renewal chain on 1..N with divergent marginal entropy and entropy rate <= ln 2"
            }
            ChainBuiltin::Coin => "fair two-state chain",
            ChainBuiltin::ThreeState => "dense three-state test chain",
            ChainBuiltin::FourState => "dense four-state test chain with small self-loops",
        }
    }

    pub fn suspension(self, truncation: usize, roof: Option<RoofBuiltin>) -> Result<Suspension> {
        let chain = self.chain(truncation)?;
        let roof = roof.unwrap_or(self.default_roof()).build(chain.len());
        Suspension::new(chain, roof)
    }
}

impl FromStr for ChainBuiltin {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pitskel" => Ok(ChainBuiltin::Pitskel),
            "coin" => Ok(ChainBuiltin::Coin),
            "three_state" => Ok(ChainBuiltin::ThreeState),
            "four_state" => Ok(ChainBuiltin::FourState),
            _ => Err(Error::ModelSpec(format!(
                "unknown builtin `{s}` (expected pitskel, coin, three_state or four_state)"
            ))),
        }
    }
}

impl fmt::Display for ChainBuiltin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChainBuiltin::Pitskel => "pitskel",
            ChainBuiltin::Coin => "coin",
            ChainBuiltin::ThreeState => "three_state",
            ChainBuiltin::FourState => "four_state",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionThresholds {
    /// Smallest increment of the marginal entropy between consecutive
    /// truncations that still counts as divergence evidence.
    pub min_entropy_increment: f64,
    /// Largest increment of the mean roof between consecutive truncations
    /// allowed for the Cauchy check.
    pub max_roof_increment: f64,
}

impl Default for ConditionThresholds {
    fn default() -> Self {
        Self {
            min_entropy_increment: 0.01,
            max_roof_increment: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    /// Effective state counts actually evaluated.
    pub truncations: Vec<usize>,
    pub marginal_entropy: Vec<f64>,
    pub entropy_rate: Vec<f64>,
    pub mean_roof: Vec<f64>,
    pub thresholds: ConditionThresholds,
    pub marginal_entropy_diverges: bool,
    pub entropy_rate_finite: bool,
    pub mean_roof_cauchy: bool,
    pub passed: bool,
}

/// Evidence for infinite marginal entropy, finite entropy rate and finite
/// mean roof, gathered across a sequence of truncations of a builtin model.
/// Builtins with a fixed state set evaluate the same chain at every level.
pub fn check_conditions(
    builtin: ChainBuiltin,
    roof: Option<RoofBuiltin>,
    truncations: &[usize],
    thresholds: ConditionThresholds,
) -> Result<ConditionReport> {
    let mut levels = Vec::new();
    let mut marginal_entropy = Vec::new();
    let mut entropy_rate = Vec::new();
    let mut mean_roof = Vec::new();
    for &t in truncations {
        let chain = builtin.chain(t)?;
        let roof = roof.unwrap_or(builtin.default_roof()).build(chain.len());
        let pi = chain.stationary()?;
        levels.push(chain.len());
        marginal_entropy.push(pi.iter().map(|&p| entropy_term(p)).sum());
        entropy_rate.push(chain.entropy_rate()?);
        mean_roof.push(roof.mean(pi));
    }
    let marginal_entropy_diverges = levels.len() >= 2
        && marginal_entropy
            .windows(2)
            .all(|w| w[1] - w[0] >= thresholds.min_entropy_increment);
    let entropy_rate_finite = entropy_rate.iter().all(|h| h.is_finite());
    let mean_roof_cauchy = mean_roof
        .windows(2)
        .all(|w| (w[1] - w[0]).abs() <= thresholds.max_roof_increment);
    Ok(ConditionReport {
        truncations: levels,
        marginal_entropy,
        entropy_rate,
        mean_roof,
        thresholds,
        marginal_entropy_diverges,
        entropy_rate_finite,
        mean_roof_cauchy,
        passed: marginal_entropy_diverges && entropy_rate_finite && mean_roof_cauchy,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub history1: Vec<usize>,
    pub history2: Vec<usize>,
    pub shared_suffix: Vec<usize>,
    pub law1: Vec<(usize, f64)>,
    pub law2: Vec<(usize, f64)>,
    pub tv_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum WitnessSearch {
    Found(Witness),
    NotFound { order: usize, search_depth: usize },
}

/// Half the l1 distance between two sparse laws sorted by symbol.
pub fn total_variation(p: &[(usize, f64)], q: &[(usize, f64)]) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < p.len() || j < q.len() {
        match (p.get(i), q.get(j)) {
            (Some(&(a, x)), Some(&(b, y))) if a == b => {
                acc += (x - y).abs();
                i += 1;
                j += 1;
            }
            (Some(&(a, x)), Some(&(b, _))) if a < b => {
                acc += x;
                i += 1;
            }
            (Some(&(_, x)), None) => {
                acc += x;
                i += 1;
            }
            (_, Some(&(_, y))) => {
                acc += y;
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    0.5 * acc
}

/// A history and its next-symbol law.
type Representative = (Vec<usize>, Vec<(usize, f64)>);

/// Laws closer than this are treated as one representative per suffix.
const SAME_LAW: f64 = 1e-12;

/// Searches for two valid histories that agree in their last `order`
/// symbols but predict the next symbol differently, with total-variation
/// distance at least `min_tv`. Histories of length `order..=search_depth`
/// are visited by increasing length, each length in lexicographic order.
pub fn markov_violation_witness(
    susp: &Suspension,
    order: usize,
    search_depth: usize,
    min_tv: f64,
) -> Result<WitnessSearch> {
    if order == 0 {
        return Err(Error::InvalidArgument("order must be >= 1".into()));
    }
    let mut groups: HashMap<Vec<usize>, Vec<Representative>> = HashMap::new();
    for len in order..=search_depth {
        let mut found = None;
        let _ = cylinder::for_each_valid_name(susp, len, |h, scanner: &NameScanner<'_>| {
            let law = cylinder::conditional_from_scanner(scanner).expect("valid history");
            let suffix = h[len - order..].to_vec();
            let reps = groups.entry(suffix.clone()).or_default();
            let mut duplicate = false;
            for (other, other_law) in reps.iter() {
                let tv = total_variation(other_law, &law);
                if tv >= min_tv && tv > SAME_LAW {
                    found = Some(Witness {
                        history1: other.clone(),
                        history2: h.to_vec(),
                        shared_suffix: suffix,
                        law1: other_law.clone(),
                        law2: law,
                        tv_distance: tv,
                    });
                    return std::ops::ControlFlow::Break(());
                }
                duplicate |= tv <= SAME_LAW;
            }
            if !duplicate {
                reps.push((h.to_vec(), law));
            }
            std::ops::ControlFlow::Continue(())
        });
        if let Some(w) = found {
            return Ok(WitnessSearch::Found(w));
        }
    }
    Ok(WitnessSearch::NotFound {
        order,
        search_depth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cylinder::conditional_next_distribution;
    use approx::assert_abs_diff_eq;

    #[test]
    fn product_identity() {
        let n_max = 5000;
        let q = pitskel_q(n_max).unwrap();
        let mut prod = 1.0;
        for n in 2..=n_max {
            prod *= q[n - 2];
            let l = (n as f64).log2();
            let expected = 1.0 / (n as f64 * l * l);
            assert!((prod - expected).abs() <= 1e-12 * expected.max(1e-300) + 1e-12, "n = {n}");
        }
        assert!(q.iter().all(|&x| x > 0.0 && x < 1.0));
    }

    #[test]
    fn chain_structure_and_stationary() {
        let c = pitskel_chain(50).unwrap();
        let report = c.validate();
        assert!(report.passed);
        for a in 0..50 {
            let s: f64 = c.row(a).iter().map(|&(_, p)| p).sum();
            assert_eq!(s, 1.0);
        }
        assert_eq!(c.row(49), &[(0, 1.0)]);
        let pi = c.stationary().unwrap().to_vec();
        assert!(c.stationarity_residual(&pi) <= 1e-12);
        let q_total: f64 = (1..=50).map(renewal_weight).sum();
        assert_abs_diff_eq!(pi[0], 1.0 / q_total, epsilon = 1e-15);

        // power-iteration oracle from the uniform vector
        let mut v = vec![1.0 / 50.0; 50];
        let mut w = vec![0.0; 50];
        for _ in 0..20_000 {
            c.push_forward(&v, &mut w);
            std::mem::swap(&mut v, &mut w);
        }
        for (a, b) in pi.iter().zip(&v) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn rejects_short_truncation() {
        assert!(pitskel_chain(1).is_err());
    }

    #[test]
    fn entropy_rate_at_most_ln2() {
        for n in [2, 3, 10, 100, 1000, 20_000] {
            let h = pitskel_chain(n).unwrap().entropy_rate().unwrap();
            assert!(h > 0.0 && h <= std::f64::consts::LN_2, "N = {n}: {h}");
        }
    }

    #[test]
    fn gamma_by_direct_summation() {
        let s = ChainBuiltin::Pitskel.suspension(200, None).unwrap();
        let pi = s.pi();
        let mean: f64 = (0..200).map(|a| pi[a] * s.height(a) as f64).sum();
        assert_abs_diff_eq!(s.gamma(), 1.0 / (1.0 + mean), epsilon = 1e-14);
        let total: f64 = s.atom_masses().iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sqrtlog_roof_values() {
        let r = sqrtlog_roof(100_000);
        assert_eq!(r.get(0), 1);
        assert_eq!(r.get(1), 2);
        // sqrt(ln(n+1)) >= 2 once n + 1 >= e^4
        let first_three = (1..=100_000).find(|&n| r.get(n - 1) >= 3).unwrap();
        assert_eq!(first_three, (4f64.exp() - 1.0).ceil() as usize);
        let values = r.values();
        assert!(values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn mean_roof_increments_small() {
        let means: Vec<f64> = [1_000usize, 1_000_000]
            .iter()
            .map(|&n| {
                let c = pitskel_chain(n).unwrap();
                sqrtlog_roof(n).mean(c.stationary().unwrap())
            })
            .collect();
        assert!(means[1] - means[0] <= 0.05, "{means:?}");
        assert!(means[1] > means[0]);
    }

    #[test]
    fn conditions_for_builtins() {
        let pit = check_conditions(
            ChainBuiltin::Pitskel,
            None,
            &[100, 1_000, 10_000, 100_000],
            ConditionThresholds::default(),
        )
        .unwrap();
        assert!(pit.passed, "{pit:?}");
        assert!(pit.entropy_rate.iter().all(|&h| h <= std::f64::consts::LN_2));

        let uniform = check_conditions(
            ChainBuiltin::Coin,
            None,
            &[100, 1_000],
            ConditionThresholds::default(),
        )
        .unwrap();
        assert!(!uniform.marginal_entropy_diverges);
        assert!(uniform.entropy_rate_finite);
        assert!(uniform.mean_roof_cauchy);
        assert!(!uniform.passed);
    }

    #[test]
    fn total_variation_examples() {
        assert_eq!(total_variation(&[(0, 1.0)], &[(1, 1.0)]), 1.0);
        assert_abs_diff_eq!(
            total_variation(&[(0, 0.5), (2, 0.5)], &[(0, 0.25), (1, 0.25), (2, 0.5)]),
            0.25,
            epsilon = 1e-15
        );
    }

    #[test]
    fn single_state_has_no_witness() {
        let s = Suspension::new(
            MarkovChain::from_dense(&[vec![1.0]]).unwrap(),
            RoofFunction::new(vec![3]),
        )
        .unwrap();
        assert_eq!(
            markov_violation_witness(&s, 2, 10, 1e-9).unwrap(),
            WitnessSearch::NotFound { order: 2, search_depth: 10 }
        );
    }

    #[test]
    fn height_phase_breaks_markov_property() {
        // a = 0 with f(a) = 2, b = 1
        let c = MarkovChain::from_dense(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let s = Suspension::new(c, RoofFunction::new(vec![2, 1])).unwrap();
        let pinned = conditional_next_distribution(&s, &[1, 0, 0]).unwrap();
        let mixed = conditional_next_distribution(&s, &[0, 0, 0]).unwrap();
        assert_eq!(pinned, vec![(0, 1.0)]);
        assert!(total_variation(&pinned, &mixed) > 0.0);

        let WitnessSearch::Found(w) = markov_violation_witness(&s, 2, 6, 1e-9).unwrap() else {
            panic!("expected a witness");
        };
        assert_eq!(w.history1[w.history1.len() - 2..], w.shared_suffix[..]);
        assert_eq!(w.history2[w.history2.len() - 2..], w.shared_suffix[..]);
        let l1 = conditional_next_distribution(&s, &w.history1).unwrap();
        let l2 = conditional_next_distribution(&s, &w.history2).unwrap();
        assert_abs_diff_eq!(total_variation(&l1, &l2), w.tv_distance, epsilon = 1e-12);
    }
}
