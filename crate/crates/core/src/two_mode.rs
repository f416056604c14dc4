//! Single-pulse model: a two-mode squeezed vacuum with two photons removed
//! from the trigger mode.
//!
//! `|psi> = sum_n tanh^n(r)/cosh(r) |n, n>`; subtracting two trigger photons
//! and tracing the trigger leaves `p(n) ∝ tanh^{2n}(r) n(n-1)` in the signal,
//! whose two-photon weight is `1/cosh^6(r)`.

use crate::covariance::XBlock;
use crate::error::{Error, Result};
use crate::phase_space::{ClickPattern, ConditionedGaussian};
use nalgebra::DMatrix;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SqueezingParam(f64);

impl SqueezingParam {
    pub fn new(r: f64) -> Result<Self> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::invalid("r", format!("must be finite and >= 0, got {r}")));
        }
        Ok(SqueezingParam(r))
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    fn require_positive(&self) -> Result<f64> {
        if self.0 == 0.0 {
            return Err(Error::Degenerate(
                "r = 0: the vacuum never produces trigger clicks".into(),
            ));
        }
        Ok(self.0)
    }
}

/// Signal photon-number distribution after the double click.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NumberDistribution {
    /// `p(0) ..= p(n_max)`, normalised against the full infinite sum.
    pub probabilities: Vec<f64>,
    /// Exact probability mass above `n_max`.
    pub tail: f64,
}

/// `p(n)` for `n <= n_max`, using the closed-form normaliser
/// `sum_n x^n n(n-1) = 2x^2/(1-x)^3` with `x = tanh^2 r`.
pub fn conditional_number_distribution(r: SqueezingParam, n_max: usize) -> Result<NumberDistribution> {
    let r = r.require_positive()?;
    if n_max < 2 {
        return Err(Error::invalid("n_max", format!("must be >= 2, got {n_max}")));
    }
    let x = r.tanh().powi(2);
    let one_minus_x = 1.0 / r.cosh().powi(2);
    // p(n) = x^{n-2} n(n-1) (1-x)^3 / 2, built up by ratios
    let mut probabilities = vec![0.0; n_max + 1];
    let mut term = one_minus_x.powi(3);
    probabilities[2] = term;
    for n in 3..=n_max {
        term *= x * (n as f64) / (n as f64 - 2.0);
        probabilities[n] = term;
    }
    Ok(NumberDistribution {
        probabilities,
        tail: tail_mass(x, one_minus_x, n_max + 1),
    })
}

/// `sum_{n >= m} p(n)` in closed form.
fn tail_mass(x: f64, one_minus_x: f64, m: usize) -> f64 {
    let mf = m as f64;
    // x^{m-2} [x(1+x)/(1-x)^3 + (2m-1)x/(1-x)^2 + m(m-1)/(1-x)] (1-x)^3 / 2
    let bracket = x * (1.0 + x) + (2.0 * mf - 1.0) * x * one_minus_x + mf * (mf - 1.0) * one_minus_x.powi(2);
    0.5 * x.powi(m as i32 - 2) * bracket
}

/// `F2 = 1/cosh^6(r)`.
pub fn fidelity_closed_form(r: SqueezingParam) -> f64 {
    r.value().cosh().powi(-6)
}

/// Covariance of the two-mode squeezed vacuum in the order `(x1, p1, x2, p2)`,
/// trigger first.
pub fn two_mode_covariance(r: SqueezingParam) -> DMatrix<f64> {
    let (c, s) = ((2.0 * r.value()).cosh(), (2.0 * r.value()).sinh());
    DMatrix::from_row_slice(
        4,
        4,
        &[
            c, 0.0, s, 0.0, //
            0.0, c, 0.0, -s, //
            s, 0.0, c, 0.0, //
            0.0, -s, 0.0, c,
        ],
    )
}

/// `F2` by conditioning the Gaussian Wigner function on the double click and
/// integrating against the two-photon Wigner function.
pub fn two_mode_fidelity_via_wigner(r: SqueezingParam) -> Result<f64> {
    r.require_positive()?;
    let heralded = ConditionedGaussian::new(&two_mode_covariance(r), ClickPattern::DoubleInOne)?;
    Ok(heralded.fock_fidelity(2))
}

/// The same state with the trigger mode split on a balanced beam splitter,
/// so the double click becomes one click in each output port. Feeding this
/// block to the three-mode Wigner formulas must give `1/cosh^6(r)`.
pub fn split_trigger_block(r: SqueezingParam) -> XBlock {
    let (c, s) = ((2.0 * r.value()).cosh(), (2.0 * r.value()).sinh());
    // cosh(2r) - 1 without cancellation
    let excess = 2.0 * r.value().sinh().powi(2);
    XBlock {
        n11: 0.5 * excess,
        v13: 0.5 * excess,
        v15: s / 2f64.sqrt(),
        n33: 0.5 * excess,
        v35: s / 2f64.sqrt(),
        n55: c - 1.0,
    }
}
