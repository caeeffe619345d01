//! Exact entropy quantities of the tower's symbol partition.
//!
//! The conditional entropy of the next symbol given the previous `n` splits
//! by the class of the history's atom: very good atoms contribute the base
//! row entropy of their anchor, good-but-not-very-good atoms contribute
//! nothing, and bad (constant) atoms contribute the entropy of their exact
//! conditional row. Two exact routes compute it: a forward pass over tower
//! cells tagged with whether a symbol change has been seen, and a depth-first
//! enumeration of valid names through the cylinder calculus.

use std::ops::ControlFlow;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::Serialize;

use crate::chain::row_entropy;
use crate::cylinder::{self, AtomClass, NameScanner};
use crate::entropy_term;
use crate::error::{Error, Result};
use crate::tower::Suspension;

/// Default cap on the number of valid histories the enumerating route visits.
pub const DEFAULT_ENUMERATION_CAP: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NStepEntropy {
    pub n: usize,
    pub total: f64,
    /// Contribution of very good and good-but-not-very-good atoms.
    pub good_part: f64,
    /// Contribution of constant histories.
    pub bad_part: f64,
    /// Total mass of constant histories.
    pub bad_mass: f64,
    /// `good_part` plus the bad contribution evaluated with the closed-form
    /// bad row and the single exponent `floor(n / (f(a) + 1))`.
    pub leading_order_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyReport {
    pub h_base: f64,
    pub gamma: f64,
    pub h_tilde: f64,
    pub one_step: f64,
    pub n_step: Vec<NStepEntropy>,
    pub tilde_alpha_partials: Vec<(usize, f64)>,
}

/// `-sum m_a ln m_a` over the first `prefix_count` atoms of the tower.
pub fn tilde_alpha_entropy_partial(susp: &Suspension, prefix_count: usize) -> Result<f64> {
    if prefix_count == 0 || prefix_count > susp.len() {
        return Err(Error::InvalidArgument(format!(
            "prefix_count {prefix_count} not in 1..={}",
            susp.len()
        )));
    }
    Ok((0..prefix_count).map(|a| entropy_term(susp.atom_mass(a))).sum())
}

/// Conditional entropy of the next symbol given the current one.
pub fn one_step_conditional_entropy(susp: &Suspension) -> f64 {
    (0..susp.len())
        .map(|a| susp.atom_mass(a) * row_entropy(&cylinder::bad_atom_row(susp, a)))
        .sum()
}

/// `gamma * h`, the entropy of the tower map.
pub fn abramov_entropy(susp: &Suspension) -> Result<f64> {
    Ok(susp.gamma() * susp.chain().entropy_rate()?)
}

/// Exact `H(next | previous n symbols)` for `n = 1..=n_max`.
pub fn n_step_series(susp: &Suspension, n_max: usize) -> Vec<NStepEntropy> {
    let row_h: Vec<f64> = (0..susp.len()).map(|a| row_entropy(susp.chain().row(a))).collect();
    let closed_h: Vec<f64> = (0..susp.len())
        .map(|a| row_entropy(&cylinder::bad_atom_row(susp, a)))
        .collect();
    // mass[a][u] over cells, split by whether the history has changed symbol
    let mut constant: Vec<Vec<f64>> = susp.cell_law();
    let mut jumped: Vec<Vec<f64>> = (0..susp.len()).map(|a| vec![0.0; susp.column_len(a)]).collect();
    let mut out = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        if n > 1 {
            (constant, jumped) = advance(susp, &constant, &jumped);
        }
        let mut good_part = 0.0;
        let mut bad_part = 0.0;
        let mut bad_mass = 0.0;
        let mut leading_bad = 0.0;
        for a in 0..susp.len() {
            let top = susp.height(a) as usize;
            good_part += jumped[a][top] * row_h[a];

            let col = &constant[a];
            let mass: f64 = col.iter().sum();
            if mass > 0.0 {
                let p_aa = susp.p(a, a);
                let stay = col[..top].iter().sum::<f64>() + col[top] * p_aa;
                let mut h = entropy_term(stay / mass);
                for &(b, p) in susp.chain().row(a) {
                    if b != a {
                        h += entropy_term(col[top] * p / mass);
                    }
                }
                bad_part += mass * h;
                bad_mass += mass;
            }
            let z = n / susp.column_len(a);
            let weight = if z == 0 { 1.0 } else { susp.p(a, a).powi(z as i32) };
            leading_bad += susp.atom_mass(a) * weight * closed_h[a];
        }
        out.push(NStepEntropy {
            n,
            total: good_part + bad_part,
            good_part,
            bad_part,
            bad_mass,
            leading_order_total: good_part + leading_bad,
        });
    }
    out
}

fn advance(
    susp: &Suspension,
    constant: &[Vec<f64>],
    jumped: &[Vec<f64>],
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let zeros = || -> Vec<Vec<f64>> { (0..susp.len()).map(|a| vec![0.0; susp.column_len(a)]).collect() };
    let mut c_next = zeros();
    let mut j_next = zeros();
    for a in 0..susp.len() {
        let top = susp.height(a) as usize;
        for u in 0..top {
            c_next[a][u + 1] += constant[a][u];
            j_next[a][u + 1] += jumped[a][u];
        }
        for &(b, p) in susp.chain().row(a) {
            let carried = jumped[a][top] * p;
            if b == a {
                c_next[b][0] += constant[a][top] * p;
                j_next[b][0] += carried;
            } else {
                j_next[b][0] += carried + constant[a][top] * p;
            }
        }
    }
    (c_next, j_next)
}

/// Exact `H(next | previous n symbols)` via the cell forward pass.
pub fn n_step_conditional_entropy(susp: &Suspension, n: usize) -> Result<NStepEntropy> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    Ok(n_step_series(susp, n).pop().expect("n >= 1"))
}

/// Same quantity by enumerating every valid history of length `n` and
/// summing `measure * H(conditional law)`. Fails once more than `cap`
/// histories have been visited.
pub fn n_step_conditional_entropy_enumerated(
    susp: &Suspension,
    n: usize,
    cap: usize,
) -> Result<NStepEntropy> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    let visited = AtomicUsize::new(0);
    let parts: Vec<Option<[f64; 3]>> = (0..susp.len())
        .into_par_iter()
        .map(|first| {
            let mut scanner = NameScanner::new(susp);
            if !scanner.push(first) {
                return Some([0.0; 3]);
            }
            let mut acc = [0.0; 3];
            let mut prefix = vec![first];
            let flow = cylinder::walk_from(&scanner, n, &mut prefix, &mut |_, sc| {
                if visited.fetch_add(1, Ordering::Relaxed) >= cap {
                    return ControlFlow::Break(());
                }
                let m = sc.log_measure().exp();
                let info = cylinder::classify_scanner(sc);
                let h = match info.class {
                    AtomClass::GoodNotVeryGood => 0.0,
                    _ => cylinder::conditional_from_scanner(sc)
                        .expect("valid history")
                        .iter()
                        .map(|&(_, p)| entropy_term(p))
                        .sum(),
                };
                match info.class {
                    AtomClass::Bad => {
                        acc[1] += m * h;
                        acc[2] += m;
                    }
                    _ => acc[0] += m * h,
                }
                ControlFlow::Continue(())
            });
            flow.is_continue().then_some(acc)
        })
        .collect();
    let mut sums = [0.0; 3];
    for part in parts {
        let part = part.ok_or(Error::EnumerationCap { cap, n })?;
        for (s, p) in sums.iter_mut().zip(part) {
            *s += p;
        }
    }
    let [good_part, bad_part, bad_mass] = sums;
    let leading_bad: f64 = (0..susp.len())
        .map(|a| {
            let z = n / susp.column_len(a);
            let w = if z == 0 { 1.0 } else { susp.p(a, a).powi(z as i32) };
            susp.atom_mass(a) * w * row_entropy(&cylinder::bad_atom_row(susp, a))
        })
        .sum();
    Ok(NStepEntropy {
        n,
        total: good_part + bad_part,
        good_part,
        bad_part,
        bad_mass,
        leading_order_total: good_part + leading_bad,
    })
}

pub fn entropy_report(
    susp: &Suspension,
    n_max: usize,
    partial_prefixes: &[usize],
) -> Result<EntropyReport> {
    let h_base = susp.chain().entropy_rate()?;
    let tilde_alpha_partials = partial_prefixes
        .iter()
        .map(|&k| Ok((k, tilde_alpha_entropy_partial(susp, k)?)))
        .collect::<Result<_>>()?;
    Ok(EntropyReport {
        h_base,
        gamma: susp.gamma(),
        h_tilde: susp.gamma() * h_base,
        one_step: one_step_conditional_entropy(susp),
        n_step: n_step_series(susp, n_max),
        tilde_alpha_partials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::{arb_suspension, brute_force_measure, dense, three_state};
    use crate::tower::RoofFunction;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn coin(f: u32) -> Suspension {
        Suspension::new(dense(&[vec![0.5, 0.5], vec![0.5, 0.5]]), RoofFunction::constant(2, f)).unwrap()
    }

    #[test]
    fn single_state_is_zero() {
        let s = Suspension::new(dense(&[vec![1.0]]), RoofFunction::new(vec![3])).unwrap();
        assert_eq!(tilde_alpha_entropy_partial(&s, 1).unwrap(), 0.0);
        assert_eq!(one_step_conditional_entropy(&s), 0.0);
        assert_eq!(abramov_entropy(&s).unwrap(), 0.0);
        for e in n_step_series(&s, 12) {
            assert_abs_diff_eq!(e.total, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn equal_atoms_partial_is_ln2() {
        assert_abs_diff_eq!(
            tilde_alpha_entropy_partial(&coin(1), 2).unwrap(),
            std::f64::consts::LN_2,
            epsilon = 1e-15
        );
        assert!(tilde_alpha_entropy_partial(&coin(1), 3).is_err());
    }

    #[test]
    fn one_step_matches_joint_law() {
        let s = coin(1);
        // H(X1 | X0) = H(X0, X1) - H(X0) from brute-force two-symbol measures
        let mut joint = 0.0;
        let mut marginal = 0.0;
        for a in 0..2 {
            marginal += entropy_term(brute_force_measure(&s, &[a]));
            for b in 0..2 {
                joint += entropy_term(brute_force_measure(&s, &[a, b]));
            }
        }
        assert_abs_diff_eq!(one_step_conditional_entropy(&s), joint - marginal, epsilon = 1e-12);
        assert!(one_step_conditional_entropy(&s) >= abramov_entropy(&s).unwrap());
    }

    #[test]
    fn constant_roof_abramov() {
        let c = dense(&[vec![0.2, 0.8], vec![0.6, 0.4]]);
        let h = c.entropy_rate().unwrap();
        let s = Suspension::new(c, RoofFunction::constant(2, 3)).unwrap();
        assert_abs_diff_eq!(abramov_entropy(&s).unwrap(), h / 4.0, epsilon = 1e-15);
    }

    #[test]
    fn first_step_is_one_step() {
        let s = three_state();
        let e = n_step_conditional_entropy(&s, 1).unwrap();
        assert_abs_diff_eq!(e.total, one_step_conditional_entropy(&s), epsilon = 1e-12);
        assert_abs_diff_eq!(e.leading_order_total, e.total, epsilon = 1e-12);
    }

    #[test]
    fn routes_agree_on_three_state() {
        let s = three_state();
        let series = n_step_series(&s, 9);
        for e in &series {
            let en = n_step_conditional_entropy_enumerated(&s, e.n, DEFAULT_ENUMERATION_CAP).unwrap();
            assert_abs_diff_eq!(e.total, en.total, epsilon = 1e-12);
            assert_abs_diff_eq!(e.good_part, en.good_part, epsilon = 1e-12);
            assert_abs_diff_eq!(e.bad_part, en.bad_part, epsilon = 1e-12);
            assert_abs_diff_eq!(e.bad_mass, en.bad_mass, epsilon = 1e-12);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let s = three_state();
        assert_eq!(
            n_step_conditional_entropy_enumerated(&s, 8, 10).unwrap_err(),
            Error::EnumerationCap { cap: 10, n: 8 }
        );
    }

    #[test]
    fn converges_to_abramov() {
        let s = three_state();
        let target = abramov_entropy(&s).unwrap();
        let series = n_step_series(&s, 80);
        let last = series.last().unwrap();
        assert!((last.total - target).abs() < 1e-6);
        assert!(last.bad_part < 1e-6);
        assert!((last.leading_order_total - last.total).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn series_properties(s in arb_suspension(4, 3)) {
            let h_tilde = abramov_entropy(&s).unwrap();
            let one = one_step_conditional_entropy(&s);
            let series = n_step_series(&s, 24);
            let mut prev = f64::INFINITY;
            for e in &series {
                prop_assert!(e.total <= prev + 1e-12);
                prop_assert!(h_tilde <= e.total + 1e-12);
                prop_assert!(e.total <= one + 1e-12);
                prop_assert!((e.good_part + e.bad_part - e.total).abs() <= 1e-12);
                prev = e.total;
            }
        }

        #[test]
        fn enumeration_matches_cell_pass(s in arb_suspension(3, 3), n in 1usize..=6) {
            let a = n_step_conditional_entropy(&s, n).unwrap();
            let b = n_step_conditional_entropy_enumerated(&s, n, DEFAULT_ENUMERATION_CAP).unwrap();
            prop_assert!((a.total - b.total).abs() <= 1e-12);
            prop_assert!((a.bad_part - b.bad_part).abs() <= 1e-12);
        }
    }

    #[test]
    fn bad_mass_decays_strictly() {
        let c = dense(&[
            vec![0.3, 0.4, 0.3],
            vec![0.2, 0.5, 0.3],
            vec![0.4, 0.4, 0.2],
        ]);
        let s = Suspension::new(c, RoofFunction::new(vec![1, 3, 2])).unwrap();
        let stride = s.roof().max() as usize + 1;
        let series = n_step_series(&s, 60);
        for i in 0..series.len() - stride {
            assert!(series[i + stride].bad_mass < series[i].bad_mass);
        }
    }
}
