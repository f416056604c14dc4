//! Weak-pump analysis for `n` trigger clicks.
//!
//! As `eps -> 0` the heralded signal state is
//! `N [prod_i int g_i(t) a_-^dag(t) dt] |0>`, with `|N|^{-2} = perm(I)` and
//! `I` the Gram matrix of the click modes. Its fidelity with `n` photons in a
//! real mode `f` is `F_n = n!/perm(I) prod_i (int f g_i)^2`; the optimum lies in
//! `span{g_i}`, `f = sum_i c_i g_i`, with
//!
//! ```text
//! xi c_i = prod_{j != i} (I c)_j,    c^T I c = 1
//! ```

use crate::error::{Error, Result};
use crate::kernels::{g_value, overlap, ClickTimes};
use crate::mode::{SampledModeFunction, TimeGrid};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

/// Largest matrix accepted by [`permanent`].
pub const MAX_PERMANENT_DIM: usize = 12;

/// Residual below which a stationary point of the coefficient system is accepted.
pub const STATIONARITY_TOLERANCE: f64 = 1e-10;

/// Permanent by Ryser's inclusion-exclusion formula with Gray-code updates.
pub fn permanent(m: &DMatrix<f64>) -> Result<f64> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::invalid("matrix", "permanent needs a square matrix"));
    }
    if n > MAX_PERMANENT_DIM {
        return Err(Error::TooLarge {
            what: "permanent dimension",
            size: n,
            limit: MAX_PERMANENT_DIM,
        });
    }
    if n == 0 {
        return Ok(1.0);
    }
    let mut row_sums = vec![0.0; n];
    let mut total = 0.0;
    let mut gray = 0usize;
    for k in 1..(1usize << n) {
        let next = k ^ (k >> 1);
        let col = (gray ^ next).trailing_zeros() as usize;
        let sign = if next & (1 << col) != 0 { 1.0 } else { -1.0 };
        for (i, s) in row_sums.iter_mut().enumerate() {
            *s += sign * m[(i, col)];
        }
        gray = next;
        let prod: f64 = row_sums.iter().product();
        let parity = if (n - next.count_ones() as usize) % 2 == 0 { 1.0 } else { -1.0 };
        total += parity * prod;
    }
    Ok(total)
}

/// Permanent as an explicit sum over all `n!` permutations.
pub fn permanent_by_permutations(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut total = 0.0;
    for_each_permutation(&mut perm, 0, &mut |p| {
        total += p.iter().enumerate().map(|(i, &j)| m[(i, j)]).product::<f64>();
    });
    total
}

pub(crate) fn for_each_permutation(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        for_each_permutation(items, k + 1, visit);
        items.swap(k, i);
    }
}

/// `I_ij = (1 + gamma|t_ci - t_cj|/2) exp(-gamma|t_ci - t_cj|/2)`.
pub fn gram_matrix(clicks: &ClickTimes, gamma: f64) -> DMatrix<f64> {
    let t = clicks.times();
    DMatrix::from_fn(t.len(), t.len(), |i, j| overlap(t[i], t[j], gamma))
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `F_n` of the heralded state with `n` photons in the sampled mode `f`.
pub fn fidelity_n(clicks: &ClickTimes, gamma: f64, f: &SampledModeFunction) -> Result<f64> {
    let gram = gram_matrix(clicks, gamma);
    let projections: f64 = clicks
        .times()
        .iter()
        .map(|&tc| f.project(|t| g_value(tc, gamma, t)).powi(2))
        .product();
    Ok(factorial(clicks.len()) / permanent(&gram)? * projections)
}

/// `F_n` for `f = sum_i c_i g_i`, assuming `c^T I c = 1`.
pub fn fidelity_from_coefficients(gram: &DMatrix<f64>, coeffs: &DVector<f64>) -> Result<f64> {
    let u = gram * coeffs;
    Ok(factorial(coeffs.len()) / permanent(gram)? * u.iter().map(|x| x * x).product::<f64>())
}

/// Squared amplitudes of `|2,0>_ab` and `|0,2>_ab` for two clicks, where
/// `f_a ∝ g1 + g2` and `f_b ∝ g1 - g2`.
pub fn two_click_state_decomposition(clicks: &ClickTimes, gamma: f64) -> Result<(f64, f64)> {
    if clicks.len() != 2 {
        return Err(Error::invalid("clicks", "the a/b decomposition needs exactly two clicks"));
    }
    let i = overlap(clicks.times()[0], clicks.times()[1], gamma);
    let denom = 2.0 * (1.0 + i * i);
    Ok(((1.0 + i).powi(2) / denom, (1.0 - i).powi(2) / denom))
}

/// Optimal mode for `n` clicks in the weak-pump limit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GramSolution {
    pub clicks: ClickTimes,
    pub gamma: f64,
    #[serde(skip)]
    pub gram: DMatrix<f64>,
    pub coeffs: Vec<f64>,
    pub xi: f64,
    pub fidelity: f64,
    /// Largest `|xi c_i - prod_{j != i} (I c)_j|`.
    pub residual: f64,
}

impl GramSolution {
    /// Samples `f = sum_i c_i g_i` on `grid`.
    pub fn mode_function(&self, grid: &TimeGrid) -> Result<SampledModeFunction> {
        let values = grid.sample(|t| {
            self.clicks
                .times()
                .iter()
                .zip(&self.coeffs)
                .map(|(&tc, c)| c * g_value(tc, self.gamma, t))
                .sum()
        });
        SampledModeFunction::normalized(*grid, values)
    }
}

/// `(xi, max_i |xi c_i - P_i|)` with `xi` fitted by least squares.
fn stationarity(gram: &DMatrix<f64>, c: &DVector<f64>) -> (f64, f64) {
    let p = products_excluding(&(gram * c));
    let xi = c.dot(&p) / c.dot(c);
    let residual = (c * xi - &p).amax();
    (xi, residual)
}

/// `P_i = prod_{j != i} u_j`.
fn products_excluding(u: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(u.len(), |i, _| {
        u.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, x)| x).product()
    })
}

fn normalize(gram: &DMatrix<f64>, c: DVector<f64>) -> Option<DVector<f64>> {
    let norm2 = c.dot(&(gram * &c));
    (norm2 > 0.0 && norm2.is_finite()).then(|| c / norm2.sqrt())
}

/// Sign convention: `sum_i c_i > 0`.
fn fix_sign(c: DVector<f64>) -> DVector<f64> {
    if c.sum() < 0.0 {
        -c
    } else {
        c
    }
}

/// Damped fixed-point iteration `c <- (1 - a) c + a P(c)/|P(c)|`.
fn fixed_point(gram: &DMatrix<f64>, seed: DVector<f64>) -> Option<DVector<f64>> {
    const DAMPING: f64 = 0.5;
    let mut c = normalize(gram, seed)?;
    for _ in 0..20_000 {
        let p = products_excluding(&(gram * &c));
        let p = normalize(gram, p.clone() * p.dot(&(gram * &c)).signum())?;
        let next = normalize(gram, &c * (1.0 - DAMPING) + p * DAMPING)?;
        let step = (&next - &c).amax();
        c = next;
        if step < 1e-15 {
            break;
        }
    }
    Some(c)
}

/// Newton iterations on `(xi c - P(c), (c^T I c - 1)/2) = 0`.
fn newton_polish(gram: &DMatrix<f64>, mut c: DVector<f64>) -> DVector<f64> {
    let n = c.len();
    let (mut xi, mut best) = stationarity(gram, &c);
    for _ in 0..20 {
        if best < 1e-14 {
            break;
        }
        let u = gram * &c;
        let p = products_excluding(&u);
        let mut jac = DMatrix::<f64>::zeros(n + 1, n + 1);
        let mut rhs = DVector::<f64>::zeros(n + 1);
        for i in 0..n {
            rhs[i] = xi * c[i] - p[i];
            jac[(i, i)] += xi;
            jac[(i, n)] = c[i];
            for k in 0..n {
                // d P_i / d c_k = sum_{j != i} I_jk prod_{l != i, j} u_l
                let mut d = 0.0;
                for j in (0..n).filter(|&j| j != i) {
                    let rest: f64 = (0..n).filter(|&l| l != i && l != j).map(|l| u[l]).product();
                    d += gram[(j, k)] * rest;
                }
                jac[(i, k)] -= d;
            }
        }
        let gc = gram * &c;
        rhs[n] = 0.5 * (c.dot(&gc) - 1.0);
        for k in 0..n {
            jac[(n, k)] = gc[k];
        }
        let Some(delta) = jac.lu().solve(&rhs) else {
            break;
        };
        let trial = &c - delta.rows(0, n);
        let (trial_xi, trial_res) = stationarity(gram, &trial);
        if !(trial_res < best) {
            break;
        }
        c = trial;
        xi = trial_xi;
        best = trial_res;
    }
    c
}

/// Solves the coefficient system from several seeds and keeps the stationary
/// point with the largest `F_n`.
///
/// When all clicks coincide the Gram matrix has rank one and the answer is
/// `c_i = 1/n`, `xi = n`, `F_n = 1`.
pub fn solve_coefficients(clicks: &ClickTimes, gamma: f64) -> Result<GramSolution> {
    let n = clicks.len();
    if n < 2 {
        return Err(Error::invalid("clicks", "need at least two clicks"));
    }
    if !(gamma > 0.0) {
        return Err(Error::invalid("gamma", "must be positive"));
    }
    let gram = gram_matrix(clicks, gamma);
    if clicks.span() == 0.0 {
        let coeffs = vec![1.0 / n as f64; n];
        return Ok(GramSolution {
            clicks: clicks.clone(),
            gamma,
            gram,
            coeffs,
            xi: n as f64,
            fidelity: 1.0,
            residual: 0.0,
        });
    }
    let mut seeds = vec![DVector::from_element(n, 1.0)];
    for k in 0..n {
        let mut e = DVector::from_element(n, 0.05);
        e[k] = 1.0;
        seeds.push(e);
    }
    seeds.push(DVector::from_fn(n, |i, _| 1.0 + 0.3 * (i as f64 * 1.7).sin()));

    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut worst_residual = 0.0f64;
    for seed in seeds {
        let Some(c) = fixed_point(&gram, seed) else {
            continue;
        };
        let c = fix_sign(newton_polish(&gram, c));
        let Some(c) = normalize(&gram, c) else {
            continue;
        };
        let (_, residual) = stationarity(&gram, &c);
        worst_residual = worst_residual.max(residual);
        if residual >= STATIONARITY_TOLERANCE {
            continue;
        }
        let f = fidelity_from_coefficients(&gram, &c)?;
        if best.as_ref().is_none_or(|(bf, _)| f > *bf) {
            best = Some((f, c));
        }
    }
    let Some((fidelity, c)) = best else {
        return Err(Error::NoConvergence(format!(
            "no stationary point with residual below {STATIONARITY_TOLERANCE} (best {worst_residual:e})"
        )));
    };
    let (xi, residual) = stationarity(&gram, &c);
    Ok(GramSolution {
        clicks: clicks.clone(),
        gamma,
        gram,
        coeffs: c.iter().copied().collect(),
        xi,
        fidelity,
        residual,
    })
}

/// Closed form for two clicks: `c1 = c2 = 1/sqrt(2(1 + I12))`, `xi = 1 + I12`.
pub fn closed_form_two(i12: f64) -> ([f64; 2], f64) {
    let c = 1.0 / (2.0 * (1.0 + i12)).sqrt();
    ([c, c], 1.0 + i12)
}

/// Closed form for three equally spaced clicks, returning `[c1, c2, c3]`.
pub fn closed_form_three_equal(i12: f64, i13: f64) -> [f64; 3] {
    let s = 1.0 + i13;
    let c1 = ((i12 * i12 - 2.0 * s + i12 * (i12 * i12 + 4.0 * s).sqrt())
        / (6.0 * (2.0 * i12 * i12 - s) * s))
        .sqrt();
    let c2 = -2.0 * c1 * i12 + (1.0 + 2.0 * c1 * c1 * (2.0 * i12 * i12 - s)).sqrt();
    [c1, c2, c1]
}

/// Closed form for `t_c1 = t_c2 < t_c3`, returning `[c1, c2, c3]`.
///
/// Written as
/// `c1^2 = (4 - I^2 - I sqrt(8 + I^2)) / (24 (1 - I^2))` and
/// `c3 = (sqrt(8 + I^2) - 3I) / (12 c1 (1 - I^2))`, which is the same
/// expression with the `1 - 6 c1^2` cancellation removed.
pub fn closed_form_three_coincident_pair(i13: f64) -> [f64; 3] {
    let root = (8.0 + i13 * i13).sqrt();
    let one_minus = 1.0 - i13 * i13;
    let c1 = ((4.0 - i13 * i13 - i13 * root) / (24.0 * one_minus)).sqrt();
    let c3 = (root - 3.0 * i13) / (12.0 * c1 * one_minus);
    [c1, c1, c3]
}

/// Click arrangements of the three-photon sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpacingMode {
    /// `t_c2 - t_c1 = t_c3 - t_c2`.
    Equal,
    /// `t_c1 = t_c2`.
    CoincidentPair,
}

impl SpacingMode {
    /// `n` click times spanning `span`: equally spaced, or with the first two
    /// coincident and the rest equally spaced.
    pub fn clicks(&self, n: usize, span: f64) -> Result<ClickTimes> {
        if n < 2 {
            return Err(Error::invalid("n", "need at least two clicks"));
        }
        let times = match self {
            SpacingMode::Equal => (0..n).map(|k| span * k as f64 / (n - 1) as f64).collect(),
            SpacingMode::CoincidentPair => {
                if n == 2 {
                    vec![0.0, 0.0]
                } else {
                    std::iter::once(0.0)
                        .chain((0..n - 1).map(|k| span * k as f64 / (n - 2) as f64))
                        .collect()
                }
            }
        };
        ClickTimes::new(times)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FockCurvePoint {
    pub gamma_span: f64,
    pub fidelity: f64,
    pub xi: f64,
}

/// `F_n` of the optimal mode against the span `gamma |t_cn - t_c1|`.
pub fn fock_fidelity_curve(n: usize, spacing: SpacingMode, spans: &[f64]) -> Result<Vec<FockCurvePoint>> {
    spans
        .par_iter()
        .map(|&span| {
            let sol = solve_coefficients(&spacing.clicks(n, span)?, 1.0)?;
            Ok(FockCurvePoint {
                gamma_span: span,
                fidelity: sol.fidelity,
                xi: sol.xi,
            })
        })
        .collect()
}

pub fn three_photon_fidelity_curve(spacing: SpacingMode, spans: &[f64]) -> Result<Vec<FockCurvePoint>> {
    fock_fidelity_curve(3, spacing, spans)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mode::GridSpec;

    #[test]
    fn permanent_small_cases() {
        assert_eq!(permanent(&DMatrix::identity(3, 3)).unwrap(), 1.0);
        assert!((permanent(&DMatrix::from_element(3, 3, 1.0)).unwrap() - 6.0).abs() < 1e-12);
        let i = 0.3;
        let m = DMatrix::from_row_slice(2, 2, &[1.0, i, i, 1.0]);
        assert!((permanent(&m).unwrap() - (1.0 + i * i)).abs() < 1e-15);
        assert_eq!(permanent(&DMatrix::<f64>::zeros(0, 0)).unwrap(), 1.0);
        assert!(matches!(
            permanent(&DMatrix::identity(13, 13)),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn ryser_matches_permutation_sum() {
        let m = DMatrix::from_fn(5, 5, |i, j| ((i * 7 + j * 3) as f64 * 0.37).sin());
        assert!((permanent(&m).unwrap() - permanent_by_permutations(&m)).abs() < 1e-12);
    }

    #[test]
    fn two_click_closed_form() {
        for dt in [0.3, 2.0, 7.5] {
            let clicks = ClickTimes::pair(dt).unwrap();
            let sol = solve_coefficients(&clicks, 1.0).unwrap();
            let (c, xi) = closed_form_two(overlap(0.0, dt, 1.0));
            assert!((sol.coeffs[0] - c[0]).abs() < 1e-12);
            assert!((sol.coeffs[1] - c[1]).abs() < 1e-12);
            assert!((sol.xi - xi).abs() < 1e-12);
            let (pa, pb) = two_click_state_decomposition(&clicks, 1.0).unwrap();
            assert!((pa + pb - 1.0).abs() < 1e-15);
            assert!((sol.fidelity - pa).abs() < 1e-12);
        }
    }

    #[test]
    fn coincident_clicks_are_ideal() {
        let clicks = ClickTimes::new(vec![1.0; 4]).unwrap();
        let sol = solve_coefficients(&clicks, 1.0).unwrap();
        assert_eq!(sol.fidelity, 1.0);
        assert_eq!(sol.xi, 4.0);
    }

    #[test]
    fn sampled_fidelity_matches_coefficients() {
        let clicks = ClickTimes::new(vec![0.0, 1.0, 3.0]).unwrap();
        let sol = solve_coefficients(&clicks, 1.0).unwrap();
        let grid = TimeGrid::around(clicks.times(), 1.0, GridSpec::default()).unwrap();
        let f = sol.mode_function(&grid).unwrap();
        let d = (fidelity_n(&clicks, 1.0, &f).unwrap() - sol.fidelity).abs();
        assert!(d < 1e-4, "{d}");
    }

    #[test]
    fn coincident_pair_forms_agree() {
        // the form printed with the cancellation, at moderate span
        for span in [0.5, 3.0, 9.0] {
            let i = overlap(0.0, span, 1.0);
            let c1 = (((4.0 - i * i) - ((4.0 - i * i).powi(2) - 16.0 * (1.0 - i * i)).sqrt())
                / (24.0 * (1.0 - i * i)))
                .sqrt();
            let c3 = (1.0 - 6.0 * c1 * c1) / (3.0 * c1 * i);
            let stable = closed_form_three_coincident_pair(i);
            assert!((stable[0] - c1).abs() < 1e-12 && (stable[2] - c3).abs() < 1e-9);
        }
    }
}
