//! Two-time correlation functions of the OPO twin beams below threshold,
//! their weak-pump limits, the cusped exponential modes `g_i` tied to click
//! times, and their pairwise overlaps.
//!
//! All kernels are written in a form free of the `lambda - mu` cancellation,
//!
//! ```text
//! <a_+ a_->(tau)   = gamma eps e^{-gamma|tau|/2} [gamma cosh(eps|tau|) + 2 eps sinh(eps|tau|)] / (gamma^2 - 4 eps^2)
//! <a+^dag a_+>(tau) = gamma eps e^{-gamma|tau|/2} [gamma sinh(eps|tau|) + 2 eps cosh(eps|tau|)] / (gamma^2 - 4 eps^2)
//! ```
//!
//! which equals the two-exponential `mu`/`lambda` form exactly and stays
//! accurate as `eps -> 0`.

use crate::error::{Error, Result};
use crate::mode::{SampledModeFunction, TimeGrid};
use serde::{Deserialize, Serialize};

/// Physical parameters of the OPO and the two detectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpoParams {
    epsilon: f64,
    gamma: f64,
    eta_t: f64,
    eta_s: f64,
}

impl OpoParams {
    pub fn new(epsilon: f64, gamma: f64, eta_t: f64, eta_s: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::invalid("gamma", format!("must be positive, got {gamma}")));
        }
        if !(epsilon >= 0.0) {
            return Err(Error::invalid("epsilon", format!("must be >= 0, got {epsilon}")));
        }
        if epsilon >= 0.5 * gamma {
            return Err(Error::AboveThreshold {
                epsilon,
                half_gamma: 0.5 * gamma,
            });
        }
        for (name, eta) in [("eta_t", eta_t), ("eta_s", eta_s)] {
            if !(0.0..=1.0).contains(&eta) {
                return Err(Error::invalid(name, format!("must lie in [0, 1], got {eta}")));
            }
        }
        Ok(OpoParams {
            epsilon,
            gamma,
            eta_t,
            eta_s,
        })
    }

    /// Parameters in units where `gamma = 1`.
    pub fn scaled(eps_over_gamma: f64, eta_t: f64, eta_s: f64) -> Result<Self> {
        Self::new(eps_over_gamma, 1.0, eta_t, eta_s)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn eta_t(&self) -> f64 {
        self.eta_t
    }
    pub fn eta_s(&self) -> f64 {
        self.eta_s
    }
    pub fn eps_over_gamma(&self) -> f64 {
        self.epsilon / self.gamma
    }
    pub fn lambda(&self) -> f64 {
        0.5 * self.gamma + self.epsilon
    }
    pub fn mu(&self) -> f64 {
        0.5 * self.gamma - self.epsilon
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(epsilon, self.gamma, self.eta_t, self.eta_s)
    }
    pub fn with_eta_t(&self, eta_t: f64) -> Result<Self> {
        Self::new(self.epsilon, self.gamma, eta_t, self.eta_s)
    }
    pub fn with_eta_s(&self, eta_s: f64) -> Result<Self> {
        Self::new(self.epsilon, self.gamma, self.eta_t, eta_s)
    }

    /// Common prefactor `gamma eps / (gamma^2 - 4 eps^2)` of both kernels.
    fn prefactor(&self) -> f64 {
        let (e, g) = (self.epsilon, self.gamma);
        g * e / (g * g - 4.0 * e * e)
    }
}

/// Ordered trigger click instants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClickTimes(Vec<f64>);

impl ClickTimes {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::invalid("clicks", "need at least one click"));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("clicks", "click times must be finite"));
        }
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("clicks", "click times must be nondecreasing"));
        }
        Ok(ClickTimes(times))
    }

    /// Two clicks separated by `dt >= 0`, the first at zero.
    pub fn pair(dt: f64) -> Result<Self> {
        Self::new(vec![0.0, dt.abs()])
    }

    pub fn times(&self) -> &[f64] {
        &self.0
    }
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
    pub fn span(&self) -> f64 {
        self.0[self.0.len() - 1] - self.0[0]
    }

    /// Click pattern mirrored in time about its midpoint.
    pub fn reversed(&self) -> ClickTimes {
        let (lo, hi) = (self.0[0], self.0[self.0.len() - 1]);
        ClickTimes(self.0.iter().rev().map(|t| lo + hi - t).collect())
    }
}

/// `<a_+(t) a_-(t')>` as a function of `tau = t - t'`.
pub fn cross_correlation(params: &OpoParams, tau: f64) -> f64 {
    if params.epsilon == 0.0 {
        return 0.0;
    }
    let (e, g, a) = (params.epsilon, params.gamma, tau.abs());
    params.prefactor() * (-0.5 * g * a).exp() * (g * (e * a).cosh() + 2.0 * e * (e * a).sinh())
}

/// `<a_+^dag(t) a_+(t')>` (identical for either beam) as a function of `tau = t - t'`.
pub fn auto_correlation(params: &OpoParams, tau: f64) -> f64 {
    if params.epsilon == 0.0 {
        return 0.0;
    }
    let (e, g, a) = (params.epsilon, params.gamma, tau.abs());
    params.prefactor() * (-0.5 * g * a).exp() * (g * (e * a).sinh() + 2.0 * e * (e * a).cosh())
}

/// Both kernels as `c_mu e^{-mu|tau|} +/- c_lambda e^{-lambda|tau|}`; returns
/// `(c_mu, c_lambda)` with `c = (lambda^2 - mu^2) / (8 rate)`.
pub(crate) fn exponential_weights(params: &OpoParams) -> (f64, f64) {
    let (l, m) = (params.lambda(), params.mu());
    let pre = (l * l - m * m) / 4.0;
    (pre / (2.0 * m), pre / (2.0 * l))
}

/// Weak-pump limit of [`cross_correlation`]: `sqrt(2 eps^2/gamma) sqrt(gamma/2) e^{-gamma|tau|/2}`.
pub fn cross_correlation_weak(params: &OpoParams, tau: f64) -> f64 {
    let g = params.gamma;
    (2.0 * params.epsilon.powi(2) / g).sqrt() * (0.5 * g).sqrt() * (-0.5 * g * tau.abs()).exp()
}

/// Weak-pump limit of [`auto_correlation`]: `(2 eps^2/gamma)(1 + gamma|tau|/2) e^{-gamma|tau|/2}`.
pub fn auto_correlation_weak(params: &OpoParams, tau: f64) -> f64 {
    let g = params.gamma;
    let x = 0.5 * g * tau.abs();
    2.0 * params.epsilon.powi(2) / g * (1.0 + x) * (-x).exp()
}

/// Analytic `g(t) = sqrt(gamma/2) exp(-gamma|t - t_c|/2)`.
pub fn g_value(click_time: f64, gamma: f64, t: f64) -> f64 {
    (0.5 * gamma).sqrt() * (-0.5 * gamma * (t - click_time).abs()).exp()
}

/// Minimum trapezoid norm of a sampled `g` before the grid counts as truncating it.
pub const G_CAPTURE_TOLERANCE: f64 = 1e-6;

/// Samples the cusped exponential mode of a click at `click_time` on `grid`.
///
/// Fails with [`Error::GridTruncation`] when the grid holds less than
/// `1 - 1e-6` of its norm; otherwise the samples are renormalised on the grid.
pub fn g_mode(grid: &TimeGrid, click_time: f64, gamma: f64) -> Result<SampledModeFunction> {
    let values = grid.sample(|t| g_value(click_time, gamma, t));
    let captured = grid.inner(&values, &values);
    if captured < 1.0 - G_CAPTURE_TOLERANCE {
        return Err(Error::GridTruncation {
            captured,
            required: 1.0 - G_CAPTURE_TOLERANCE,
        });
    }
    SampledModeFunction::normalized(*grid, values)
}

/// Closed-form overlap `int g_i g_j dt = (1 + gamma|dt|/2) exp(-gamma|dt|/2)`.
pub fn overlap(t_ci: f64, t_cj: f64, gamma: f64) -> f64 {
    let x = 0.5 * gamma * (t_ci - t_cj).abs();
    (1.0 + x) * (-x).exp()
}

/// Normalised second-order correlation of the trigger clicks,
/// `1 + (<a^dag a>(dt) / <a^dag a>(0))^2`, ranging from 2 at `dt = 0` to 1.
pub fn bunching_ratio(params: &OpoParams, dt: f64) -> Result<f64> {
    if params.epsilon == 0.0 {
        return Err(Error::Degenerate(
            "bunching ratio is 0/0 at zero pump (epsilon = 0)".into(),
        ));
    }
    let r = auto_correlation(params, dt) / auto_correlation(params, 0.0);
    Ok(1.0 + r * r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(eps: f64) -> OpoParams {
        OpoParams::scaled(eps, 1.0, 1.0).unwrap()
    }

    /// Direct transcription of the two-exponential form, used as a reference.
    fn two_exp(params: &OpoParams, tau: f64, sign: f64) -> f64 {
        let (l, m) = (params.lambda(), params.mu());
        (l * l - m * m) / 4.0
            * ((-m * tau.abs()).exp() / (2.0 * m) + sign * (-l * tau.abs()).exp() / (2.0 * l))
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(matches!(
            OpoParams::scaled(0.5, 1.0, 1.0),
            Err(Error::AboveThreshold { .. })
        ));
        assert!(OpoParams::scaled(0.1, 1.2, 1.0).is_err());
        assert!(OpoParams::scaled(0.1, 1.0, -0.1).is_err());
        assert!(OpoParams::new(0.1, 0.0, 1.0, 1.0).is_err());
        assert!(OpoParams::scaled(-0.1, 1.0, 1.0).is_err());
    }

    #[test]
    fn zero_pump_gives_zero_kernels() {
        for tau in [0.0, 0.3, -2.0] {
            assert_eq!(cross_correlation(&p(0.0), tau), 0.0);
            assert_eq!(auto_correlation(&p(0.0), tau), 0.0);
        }
    }

    #[test]
    fn stable_form_matches_two_exponential_form() {
        let params = p(0.08);
        // lambda = 0.58, mu = 0.42
        assert!((params.lambda() - 0.58).abs() < 1e-15);
        assert!((params.mu() - 0.42).abs() < 1e-15);
        let at_zero = (0.58f64.powi(2) - 0.42f64.powi(2)) / 4.0 * (1.0 / 0.84 + 1.0 / 1.16);
        assert!((cross_correlation(&params, 0.0) - at_zero).abs() < 1e-15);
        for tau in [0.0, 0.1, 1.0, 7.5, -3.0] {
            assert!((cross_correlation(&params, tau) - two_exp(&params, tau, 1.0)).abs() < 1e-15);
            assert!((auto_correlation(&params, tau) - two_exp(&params, tau, -1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn weak_pump_limits() {
        let params = p(1e-4);
        for tau in [0.0, 0.5, 2.0, 6.0] {
            let c = cross_correlation(&params, tau);
            assert!((c / cross_correlation_weak(&params, tau) - 1.0).abs() < 1e-3);
            let a = auto_correlation(&params, tau);
            assert!((a / auto_correlation_weak(&params, tau) - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn auto_decays_to_zero() {
        let params = p(0.2);
        let mut prev = auto_correlation(&params, 0.0);
        for k in 1..200 {
            let v = auto_correlation(&params, 0.5 * k as f64);
            assert!(v <= prev && v >= 0.0);
            prev = v;
        }
        assert!(prev < 1e-10);
    }

    #[test]
    fn overlap_closed_form() {
        assert_eq!(overlap(3.0, 3.0, 1.0), 1.0);
        assert!((overlap(0.0, 8.0, 1.0) - 5.0 * (-4.0f64).exp()).abs() < 1e-15);
        assert!((overlap(0.0, 8.0, 1.0) - 0.09158).abs() < 1e-5);
        assert_eq!(overlap(0.0, 4.0, 2.0), overlap(0.0, 8.0, 1.0));
    }

    #[test]
    fn g_mode_peak_and_norm() {
        let grid = TimeGrid::around(&[1.0], 1.0, Default::default()).unwrap();
        let g = g_mode(&grid, 1.0, 1.0).unwrap();
        assert!((g.norm() - 1.0).abs() < 1e-12);
        let k = grid.nearest(1.0);
        // renormalisation on the grid moves the peak by O(step^2)
        assert!((g.values()[k] - 0.5f64.sqrt()).abs() < 1e-5);
    }

    #[test]
    fn g_mode_flags_short_grid() {
        let grid = TimeGrid::new(-5.0, 0.01, 1001).unwrap();
        assert!(matches!(
            g_mode(&grid, 0.0, 1.0),
            Err(Error::GridTruncation { .. })
        ));
    }

    #[test]
    fn bunching_endpoints() {
        let params = p(0.08);
        assert!((bunching_ratio(&params, 0.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((bunching_ratio(&params, 60.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(bunching_ratio(&p(0.0), 1.0).is_err());
    }

    #[test]
    fn click_times_validation() {
        assert!(ClickTimes::new(vec![]).is_err());
        assert!(ClickTimes::new(vec![1.0, 0.5]).is_err());
        let c = ClickTimes::new(vec![0.0, 1.0, 3.0]).unwrap();
        assert_eq!(c.reversed().times(), &[0.0, 2.0, 3.0]);
        assert_eq!(c.span(), 3.0);
    }
}
