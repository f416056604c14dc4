//! Brute-force Gaussian moments by Wick pairing, used as an independent check
//! of the weak-pump heralded state.
//!
//! Operators are linear combinations of field symbols `a_+(t)`, `a_-(t)`,
//! vacuum inputs `v_k(t)` and their adjoints. A moment of `2k` such operators
//! is the sum over the `(2k-1)!!` perfect pairings of products of two-point
//! functions; the only nonzero ones are `<a^dag a>` within a beam and
//! `<a_+ a_->`, `<a_+^dag a_-^dag>` across beams.

use crate::error::{Error, Result};
use crate::fock::{for_each_permutation, permanent};
use crate::kernels::{auto_correlation, cross_correlation, g_value, overlap, ClickTimes, OpoParams};
use num_complex::Complex64;
use serde::Serialize;

/// Largest operator string accepted (10395 pairings).
pub const MAX_OPERATORS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Field {
    /// Trigger beam `a_+`.
    Trigger,
    /// Signal beam `a_-`.
    Signal,
    /// Vacuum input port of a beam splitter.
    Vacuum(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Symbol {
    pub field: Field,
    pub dagger: bool,
    pub time: f64,
}

impl Symbol {
    pub fn ann(field: Field, time: f64) -> Self {
        Symbol { field, dagger: false, time }
    }
    pub fn dag(field: Field, time: f64) -> Self {
        Symbol { field, dagger: true, time }
    }
}

/// `sum_k w_k s_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOp(pub Vec<(Complex64, Symbol)>);

impl LinearOp {
    pub fn single(symbol: Symbol) -> Self {
        LinearOp(vec![(Complex64::new(1.0, 0.0), symbol)])
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        LinearOp(self.0.iter().map(|&(w, sym)| (w * s, sym)).collect())
    }

    /// Hermitian adjoint: conjugated weights, toggled daggers.
    pub fn adjoint(&self) -> Self {
        LinearOp(
            self.0
                .iter()
                .map(|&(w, s)| (w.conj(), Symbol { dagger: !s.dagger, ..s }))
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OperatorString(pub Vec<LinearOp>);

impl OperatorString {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, op: LinearOp) {
        self.0.push(op);
    }

    /// `[prod_i T_i^dag] [prod_j a_-^dag(t'_j)] [prod_k a_-(t''_k)] [prod_q T_q]`
    /// with trigger operators `T_i` (plain `a_+(t_ci)` or detector modes).
    pub fn conditional(triggers: &[LinearOp], primed: &[f64], double_primed: &[f64]) -> Self {
        let mut s = OperatorString::default();
        triggers.iter().for_each(|t| s.push(t.adjoint()));
        primed.iter().for_each(|&t| s.push(LinearOp::single(Symbol::dag(Field::Signal, t))));
        double_primed.iter().for_each(|&t| s.push(LinearOp::single(Symbol::ann(Field::Signal, t))));
        triggers.iter().rev().for_each(|t| s.push(t.clone()));
        s
    }

    /// Only the trigger part of [`OperatorString::conditional`].
    pub fn trigger_only(triggers: &[LinearOp]) -> Self {
        Self::conditional(triggers, &[], &[])
    }
}

fn trigger_ops(clicks: &ClickTimes) -> Vec<LinearOp> {
    clicks
        .times()
        .iter()
        .map(|&t| LinearOp::single(Symbol::ann(Field::Trigger, t)))
        .collect()
}

/// Two-point function `<x y>` of the stationary OPO output (zero means).
pub fn contraction(x: &Symbol, y: &Symbol, params: &OpoParams) -> Result<f64> {
    use Field::*;
    let tau = x.time - y.time;
    match (x.field, y.field) {
        (Trigger, Trigger) | (Signal, Signal) => match (x.dagger, y.dagger) {
            (true, false) => Ok(auto_correlation(params, tau)),
            (false, true) => {
                // a(t) a^dag(t') = a^dag(t') a(t) + delta(t - t')
                if tau == 0.0 {
                    Err(Error::SingularContraction { time: x.time })
                } else {
                    Ok(auto_correlation(params, tau))
                }
            }
            _ => Ok(0.0),
        },
        (Trigger, Signal) | (Signal, Trigger) => Ok(if x.dagger == y.dagger {
            cross_correlation(params, tau)
        } else {
            0.0
        }),
        (Vacuum(i), Vacuum(j)) if i == j && !x.dagger && y.dagger && tau == 0.0 => {
            Err(Error::SingularContraction { time: x.time })
        }
        _ => Ok(0.0),
    }
}

/// Number of perfect pairings of `2k` items, counted by enumeration.
pub fn count_pairings(len: usize) -> usize {
    let mut count = 0;
    let items: Vec<usize> = (0..len).collect();
    visit_pairings(&items, &mut |_| count += 1);
    count
}

/// Calls `visit` with each perfect pairing (as index pairs), matching the
/// first remaining element with every later one in turn.
fn visit_pairings(items: &[usize], visit: &mut impl FnMut(&[(usize, usize)])) {
    fn recurse(rest: &[usize], acc: &mut Vec<(usize, usize)>, visit: &mut impl FnMut(&[(usize, usize)])) {
        if rest.is_empty() {
            visit(acc);
            return;
        }
        let first = rest[0];
        for k in 1..rest.len() {
            let mut remaining = Vec::with_capacity(rest.len() - 2);
            remaining.extend_from_slice(&rest[1..k]);
            remaining.extend_from_slice(&rest[k + 1..]);
            acc.push((first, rest[k]));
            recurse(&remaining, acc, visit);
            acc.pop();
        }
    }
    if items.len() % 2 == 1 {
        return;
    }
    recurse(items, &mut Vec::new(), visit);
}

/// `<A_1 ... A_2k>` by Wick's theorem; odd strings give zero.
pub fn gaussian_moment(ops: &OperatorString, params: &OpoParams) -> Result<Complex64> {
    let n = ops.len();
    if n % 2 == 1 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if n > MAX_OPERATORS {
        return Err(Error::TooLarge {
            what: "operator string",
            size: n,
            limit: MAX_OPERATORS,
        });
    }
    let mut pair = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let mut v = Complex64::new(0.0, 0.0);
            for (wx, x) in &ops.0[i].0 {
                for (wy, y) in &ops.0[j].0 {
                    let c = contraction(x, y, params)?;
                    if c != 0.0 {
                        v += wx * wy * c;
                    }
                }
            }
            pair[i][j] = v;
        }
    }
    let mut total = Complex64::new(0.0, 0.0);
    let items: Vec<usize> = (0..n).collect();
    visit_pairings(&items, &mut |pairs| {
        total += pairs.iter().map(|&(i, j)| pair[i][j]).product::<Complex64>();
    });
    Ok(total)
}

/// Weak-pump extrapolation of a heralded moment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub value: f64,
    /// Size of the `eps^2` correction removed by the extrapolation.
    pub correction: f64,
    /// Set when the removed correction exceeds `1e-6` relative, so that the
    /// neglected `eps^4` terms may matter at the requested tolerance.
    pub warning: bool,
}

fn balanced_lengths(n: usize, m: usize, p: usize) -> bool {
    m == p && m <= n
}

/// Normalised heralded moment at the pump of `params`:
/// `<T^dag.. a_-^dag(t').. a_-(t'').. T..> / <T^dag.. T..>`.
pub fn conditional_moment(
    triggers: &[LinearOp],
    primed: &[f64],
    double_primed: &[f64],
    params: &OpoParams,
) -> Result<Complex64> {
    let den = gaussian_moment(&OperatorString::trigger_only(triggers), params)?;
    if den.norm() == 0.0 {
        return Err(Error::Degenerate("the trigger events have zero probability".into()));
    }
    let num = gaussian_moment(&OperatorString::conditional(triggers, primed, double_primed), params)?;
    Ok(num / den)
}

/// Left side of the weak-pump identity: the heralded moment from full Wick
/// expansion, evaluated at `eps` and `eps/10` and extrapolated in `eps^2`.
///
/// Unbalanced requests (`m != p` or `m > n`) return exactly zero.
pub fn conditional_moment_lhs(
    clicks: &ClickTimes,
    primed: &[f64],
    double_primed: &[f64],
    params: &OpoParams,
) -> Result<MomentEstimate> {
    if !balanced_lengths(clicks.len(), primed.len(), double_primed.len()) {
        return Ok(MomentEstimate {
            value: 0.0,
            correction: 0.0,
            warning: false,
        });
    }
    if params.epsilon() == 0.0 {
        return Err(Error::invalid("epsilon", "the extrapolation needs a nonzero pump"));
    }
    let triggers = trigger_ops(clicks);
    let e1 = params.epsilon();
    let e2 = 0.1 * e1;
    let r1 = conditional_moment(&triggers, primed, double_primed, params)?.re;
    let r2 = conditional_moment(&triggers, primed, double_primed, &params.with_epsilon(e2)?)?.re;
    let value = (r2 * e1 * e1 - r1 * e2 * e2) / (e1 * e1 - e2 * e2);
    let correction = (r2 - value).abs();
    Ok(MomentEstimate {
        value,
        correction,
        warning: correction > 1e-6 * value.abs().max(f64::MIN_POSITIVE),
    })
}

/// Right side of the identity, from the delta-contraction combinatorics:
///
/// ```text
/// 1/(n-m)! sum_{P_i} sum_{P_j} g_{i1}(t'_1)..g_{im}(t'_m) g_{j1}(t''_1)..g_{jm}(t''_m)
///     I_{i(m+1) j(m+1)} .. I_{in jn}  /  perm(I)
/// ```
pub fn conditional_moment_rhs(clicks: &ClickTimes, primed: &[f64], double_primed: &[f64], gamma: f64) -> Result<f64> {
    let n = clicks.len();
    let m = primed.len();
    if !balanced_lengths(n, m, double_primed.len()) {
        return Ok(0.0);
    }
    if m == 0 {
        return Ok(1.0);
    }
    let tc = clicks.times();
    let gram = crate::fock::gram_matrix(clicks, gamma);
    let g = |i: usize, t: f64| g_value(tc[i], gamma, t);
    let mut outer: Vec<usize> = (0..n).collect();
    let mut total = 0.0;
    for_each_permutation(&mut outer, 0, &mut |pi| {
        let head_i: f64 = (0..m).map(|k| g(pi[k], primed[k])).product();
        let mut inner: Vec<usize> = (0..n).collect();
        for_each_permutation(&mut inner, 0, &mut |pj| {
            let head_j: f64 = (0..m).map(|k| g(pj[k], double_primed[k])).product();
            let tail: f64 = (m..n).map(|k| overlap(tc[pi[k]], tc[pj[k]], gamma)).product();
            total += head_i * head_j * tail;
        });
    });
    let fact: f64 = (1..=n - m).map(|k| k as f64).product();
    Ok(total / fact / permanent(&gram)?)
}

/// Trigger beam split into detectors: row `j` holds the coefficient of
/// `a_+` followed by the coefficients of the vacuum inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitCoefficients {
    rows: Vec<Vec<Complex64>>,
}

impl SplitCoefficients {
    pub fn new(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        if rows.is_empty() || rows.iter().any(|r| r.is_empty()) {
            return Err(Error::invalid("split", "need at least one nonempty row"));
        }
        for (j, r) in rows.iter().enumerate() {
            let norm: f64 = r.iter().map(|c| c.norm_sqr()).sum();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(
                    "split",
                    format!("row {j} has squared norm {norm}, expected 1"),
                ));
            }
        }
        Ok(SplitCoefficients { rows })
    }

    /// Balanced two-port splitter.
    pub fn balanced() -> Self {
        let h = Complex64::new(0.5f64.sqrt(), 0.0);
        SplitCoefficients {
            rows: vec![vec![h, h], vec![h, -h]],
        }
    }

    pub fn detectors(&self) -> usize {
        self.rows.len()
    }

    /// Detector mode `b_j(t) = c_j0 a_+(t) + sum_k c_jk v_k(t)`.
    pub fn detector_op(&self, j: usize, t: f64) -> LinearOp {
        let row = &self.rows[j];
        let mut terms = vec![(row[0], Symbol::ann(Field::Trigger, t))];
        for (k, &c) in row.iter().enumerate().skip(1) {
            terms.push((c, Symbol::ann(Field::Vacuum(k), t)));
        }
        LinearOp(terms)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplittingReport {
    /// Normalised moments with the unsplit trigger beam.
    pub direct: Vec<f64>,
    /// The same moments with the clicks assigned to the chosen detectors.
    pub split: Vec<f64>,
    pub max_relative_deviation: f64,
}

/// Signal moments tested by [`detector_splitting_check`]: `(primed, double_primed)`.
fn splitting_probes(clicks: &ClickTimes) -> Vec<(Vec<f64>, Vec<f64>)> {
    let t = clicks.times();
    let mid = 0.5 * (t[0] + t[t.len() - 1]);
    vec![
        (vec![t[0]], vec![t[0]]),
        (vec![mid], vec![mid + 0.3]),
        (vec![t[0], mid + 0.7], vec![t[t.len() - 1], mid - 0.4]),
        (vec![mid], vec![]),
    ]
}

/// Compares heralded signal moments with and without the trigger beam split
/// among detectors; `assignment[i]` is the detector of click `i`.
pub fn detector_splitting_check(
    clicks: &ClickTimes,
    split: &SplitCoefficients,
    assignment: &[usize],
    params: &OpoParams,
) -> Result<SplittingReport> {
    if assignment.len() != clicks.len() {
        return Err(Error::invalid("assignment", "one detector per click is required"));
    }
    if let Some(&j) = assignment.iter().find(|&&j| j >= split.detectors()) {
        return Err(Error::invalid("assignment", format!("no detector {j}")));
    }
    let direct_ops = trigger_ops(clicks);
    let split_ops: Vec<LinearOp> = clicks
        .times()
        .iter()
        .zip(assignment)
        .map(|(&t, &j)| split.detector_op(j, t))
        .collect();
    let mut report = SplittingReport {
        direct: Vec::new(),
        split: Vec::new(),
        max_relative_deviation: 0.0,
    };
    for (primed, double_primed) in splitting_probes(clicks) {
        let a = conditional_moment(&direct_ops, &primed, &double_primed, params)?;
        let b = conditional_moment(&split_ops, &primed, &double_primed, params)?;
        let scale = a.norm().max(b.norm());
        let dev = if scale == 0.0 { 0.0 } else { (a - b).norm() / scale };
        report.max_relative_deviation = report.max_relative_deviation.max(dev);
        report.direct.push(a.re);
        report.split.push(b.re);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(eps: f64) -> OpoParams {
        OpoParams::scaled(eps, 1.0, 1.0).unwrap()
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn pairing_counts() {
        let double_factorial = [1, 1, 3, 15, 105, 945, 10395];
        for k in 1..=6 {
            assert_eq!(count_pairings(2 * k), double_factorial[k]);
        }
        assert_eq!(count_pairings(5), 0);
    }

    #[test]
    fn single_pair_is_the_kernel() {
        let p = params(0.1);
        let mut s = OperatorString::default();
        s.push(LinearOp::single(Symbol::dag(Field::Trigger, 0.2)));
        s.push(LinearOp::single(Symbol::ann(Field::Trigger, 1.0)));
        assert_eq!(gaussian_moment(&s, &p).unwrap().re, auto_correlation(&p, -0.8));
        s.push(LinearOp::single(Symbol::ann(Field::Signal, 0.0)));
        assert_eq!(gaussian_moment(&s, &p).unwrap(), c(0.0));
    }

    #[test]
    fn equal_time_bunching() {
        let p = params(0.1);
        let s = OperatorString::trigger_only(&trigger_ops(&ClickTimes::new(vec![0.5, 0.5]).unwrap()));
        let a0 = auto_correlation(&p, 0.0);
        assert!((gaussian_moment(&s, &p).unwrap().re - 2.0 * a0 * a0).abs() < 1e-18);
    }

    #[test]
    fn anti_normal_equal_time_is_singular() {
        let p = params(0.1);
        let mut s = OperatorString::default();
        s.push(LinearOp::single(Symbol::ann(Field::Signal, 1.0)));
        s.push(LinearOp::single(Symbol::dag(Field::Signal, 1.0)));
        assert!(matches!(gaussian_moment(&s, &p), Err(Error::SingularContraction { .. })));
    }

    #[test]
    fn too_long_strings_are_refused() {
        let mut s = OperatorString::default();
        for k in 0..14 {
            s.push(LinearOp::single(Symbol::ann(Field::Signal, k as f64)));
        }
        assert!(matches!(gaussian_moment(&s, &params(0.1)), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn rhs_simple_cases() {
        let one = ClickTimes::new(vec![0.3]).unwrap();
        let g = g_value(0.3, 1.0, 1.1);
        assert!((conditional_moment_rhs(&one, &[1.1], &[1.1], 1.0).unwrap() - g * g).abs() < 1e-15);
        let two = ClickTimes::pair(1.0).unwrap();
        assert_eq!(conditional_moment_rhs(&two, &[], &[], 1.0).unwrap(), 1.0);
        assert_eq!(conditional_moment_rhs(&two, &[0.0], &[], 1.0).unwrap(), 0.0);
    }

    #[test]
    fn lhs_matches_rhs_for_two_clicks() {
        let clicks = ClickTimes::pair(0.7).unwrap();
        let p = params(1e-3);
        for (pr, dp) in [(vec![0.1], vec![0.5]), (vec![0.0, 0.9], vec![0.2, -0.3])] {
            let lhs = conditional_moment_lhs(&clicks, &pr, &dp, &p).unwrap();
            let rhs = conditional_moment_rhs(&clicks, &pr, &dp, 1.0).unwrap();
            assert!((lhs.value - rhs).abs() < 1e-8 * rhs.abs().max(1.0), "{lhs:?} vs {rhs}");
        }
    }

    #[test]
    fn split_rows_must_be_normalized() {
        assert!(SplitCoefficients::new(vec![vec![c(1.0), c(1.0)]]).is_err());
        assert!(SplitCoefficients::new(vec![vec![c(1.0)]]).is_ok());
    }
}
