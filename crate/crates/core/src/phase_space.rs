//! Phase-space tools: Fock-state Wigner functions, radial quadrature for
//! rotationally symmetric functions, and heralding by Gaussian conditioning.
//!
//! The Gaussian Wigner function `exp(-y^T V^{-1} y) / (pi^k sqrt(det V))` is a
//! normal density with covariance `V/2`. A photon subtraction `a rho a^dag`
//! followed by tracing the trigger mode acts on it, after integrating by parts,
//! as the weight `(r^2 - 1)/2` on that mode's quadratures (`r^2 = x^2 + p^2`);
//! two subtractions from one mode give `(r^4 - 4 r^2 + 2)/4`. The heralded
//! signal Wigner function is the conditional expectation of that weight given
//! the signal quadratures, times their marginal density.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

/// Laguerre polynomial `L_n(x)` by the three-term recurrence.
pub fn laguerre(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, 1.0 - x);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let next = ((2 * k + 1) as f64 - x) * cur / (k + 1) as f64 - k as f64 * prev / (k + 1) as f64;
        prev = cur;
        cur = next;
    }
    cur
}

/// Wigner function of the Fock state `|n>`,
/// `W_n(x, p) = (-1)^n / pi * exp(-r^2) L_n(2 r^2)`.
pub fn fock_wigner(n: usize, x: f64, p: f64) -> f64 {
    let r2 = x * x + p * p;
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    sign / PI * (-r2).exp() * laguerre(n, 2.0 * r2)
}

/// `int int f(x^2 + p^2) dx dp = pi int_0^inf f(u) du` by composite Simpson on
/// `[0, 60/decay]`, for integrands bounded by a polynomial times `exp(-decay u)`.
pub fn radial_integral(f: impl Fn(f64) -> f64, decay: f64) -> f64 {
    const INTERVALS: usize = 20_000;
    let upper = 60.0 / decay;
    let h = upper / INTERVALS as f64;
    let mut sum = f(0.0) + f(upper);
    for k in 1..INTERVALS {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(k as f64 * h);
    }
    PI * sum * h / 3.0
}

/// Which trigger modes clicked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClickPattern {
    /// Two clicks in the single trigger mode (quadratures 0, 1).
    DoubleInOne,
    /// One click in each of two trigger modes (quadratures 0, 1 and 2, 3).
    SingleInTwo,
}

/// Heralded single-mode Wigner function computed by conditioning the
/// Gaussian state on the signal quadratures (the last two coordinates).
#[derive(Debug, Clone)]
pub struct ConditionedGaussian {
    pattern: ClickPattern,
    /// `Sigma_ts Sigma_ss^{-1}`, mapping signal quadratures to the trigger mean.
    gain: DMatrix<f64>,
    /// Conditional trigger covariance.
    cond_cov: DMatrix<f64>,
    /// `V_ss^{-1}` (the marginal is `exp(-s^T V_ss^{-1} s)`).
    signal_precision: DMatrix<f64>,
    signal_decay: f64,
    normalization: f64,
}

impl ConditionedGaussian {
    pub fn new(v: &DMatrix<f64>, pattern: ClickPattern) -> Result<Self> {
        let dim = match pattern {
            ClickPattern::DoubleInOne => 4,
            ClickPattern::SingleInTwo => 6,
        };
        if v.nrows() != dim || v.ncols() != dim {
            return Err(Error::invalid(
                "covariance",
                format!("expected a {dim}x{dim} matrix for {pattern:?}"),
            ));
        }
        let sigma = v * 0.5;
        let nt = dim - 2;
        let s_tt = sigma.view((0, 0), (nt, nt)).into_owned();
        let s_ts = sigma.view((0, nt), (nt, 2)).into_owned();
        let s_ss = sigma.view((nt, nt), (2, 2)).into_owned();
        let s_ss_inv = s_ss
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("singular signal covariance".into()))?;
        let gain = &s_ts * &s_ss_inv;
        let cond_cov = &s_tt - &gain * s_ts.transpose();
        let signal_precision = v.view((nt, nt), (2, 2)).into_owned().try_inverse().unwrap();
        let signal_decay = signal_precision.symmetric_eigenvalues().min();
        let mut out = ConditionedGaussian {
            pattern,
            gain,
            cond_cov,
            signal_precision,
            signal_decay,
            normalization: 1.0,
        };
        let total = radial_integral(|u| out.unnormalized(u.sqrt(), 0.0), out.signal_decay);
        if !(total.abs() > 0.0 && total.is_finite()) {
            return Err(Error::Degenerate(format!(
                "heralding probability vanishes (integral {total})"
            )));
        }
        out.normalization = 1.0 / total;
        Ok(out)
    }

    fn unnormalized(&self, x: f64, p: f64) -> f64 {
        let s = DVector::from_vec(vec![x, p]);
        let mean = &self.gain * &s;
        let c = &self.cond_cov;
        let m2 = |a: usize| c[(a, a)] + mean[a] * mean[a];
        let m22 = |a: usize, b: usize| {
            m2(a) * m2(b) + 2.0 * c[(a, b)].powi(2) + 4.0 * mean[a] * mean[b] * c[(a, b)]
        };
        let weight = match self.pattern {
            ClickPattern::DoubleInOne => {
                let r4 = m22(0, 0) + 2.0 * m22(0, 1) + m22(1, 1);
                let r2 = m2(0) + m2(1);
                0.25 * (r4 - 4.0 * r2 + 2.0)
            }
            ClickPattern::SingleInTwo => {
                let cross: f64 = [(0, 2), (0, 3), (1, 2), (1, 3)]
                    .iter()
                    .map(|&(a, b)| m22(a, b))
                    .sum();
                0.25 * (cross - m2(0) - m2(1) - m2(2) - m2(3) + 1.0)
            }
        };
        let marginal = (-(s.transpose() * &self.signal_precision * &s)[(0, 0)]).exp();
        weight * marginal
    }

    /// Normalised heralded Wigner function.
    pub fn wigner(&self, x: f64, p: f64) -> f64 {
        self.normalization * self.unnormalized(x, p)
    }

    /// `2 pi int int W W_n dx dp`, assuming rotational symmetry.
    pub fn fock_fidelity(&self, n: usize) -> f64 {
        let decay = self.signal_decay + 1.0;
        2.0 * PI * radial_integral(|u| self.wigner(u.sqrt(), 0.0) * fock_wigner(n, u.sqrt(), 0.0), decay)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laguerre_low_orders() {
        for x in [0.0, 0.3, 2.5] {
            assert!((laguerre(2, x) - (1.0 - 2.0 * x + 0.5 * x * x)).abs() < 1e-14);
            assert!((laguerre(3, x) - (1.0 - 3.0 * x + 1.5 * x * x - x.powi(3) / 6.0)).abs() < 1e-13);
        }
    }

    #[test]
    fn fock_wigner_values_and_norm() {
        assert!((fock_wigner(2, 0.0, 0.0) - 1.0 / PI).abs() < 1e-15);
        assert!((fock_wigner(1, 0.0, 0.0) + 1.0 / PI).abs() < 1e-15);
        for n in 0..6 {
            let total = radial_integral(|u| fock_wigner(n, u.sqrt(), 0.0), 1.0);
            assert!((total - 1.0).abs() < 1e-9, "n = {n}: {total}");
        }
        // orthogonality: 2 pi int W_m W_n = delta_mn
        let o = 2.0 * PI * radial_integral(|u| fock_wigner(1, u.sqrt(), 0.0) * fock_wigner(2, u.sqrt(), 0.0), 2.0);
        assert!(o.abs() < 1e-10);
    }

    #[test]
    fn vacuum_trigger_cannot_herald() {
        let v = DMatrix::<f64>::identity(4, 4);
        assert!(ConditionedGaussian::new(&v, ClickPattern::DoubleInOne).is_err());
    }
}
