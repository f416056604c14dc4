//! Closed-form Wigner function of the signal mode heralded by two trigger
//! clicks, and its two-photon fidelity.
//!
//! With `V` the three-mode covariance and `rho^2 = x3^2 + p3^2`,
//!
//! ```text
//! W(x3, p3) = [C2 + C3 rho^2 + C4 rho^4] exp(-C5 rho^2) / C1
//! D1 = V55^4 [(V11-1)(V33-1) + V13^2]
//! D2 = V55 { 2 V15 V35 (V13 V55 - V15 V35) + V55 [V15^2 (V33-1) + V35^2 (V11-1)] }
//! C1 = pi V55 D1,  C2 = D1 - V55 D2,  C3 = D2 - 2 V55 V15^2 V35^2,
//! C4 = V15^2 V35^2,  C5 = 1/V55
//! ```

use crate::covariance::{CovMatrix6, XBlock};
use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Below this `D1` the closed form is replaced by its zero-intensity limit.
pub const D1_UNDERFLOW: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WignerCoefficients {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub d1: f64,
    pub d2: f64,
}

impl WignerCoefficients {
    /// `(C2/C1, C3/C1, C4/C1, C5)`: the coefficient set with the overall
    /// heralding rate divided out.
    pub fn normalized(&self) -> [f64; 4] {
        [self.c2 / self.c1, self.c3 / self.c1, self.c4 / self.c1, self.c5]
    }

    /// `int int W dx dp`, analytically.
    pub fn total_weight(&self) -> f64 {
        let c5 = self.c5;
        PI / self.c1 * (self.c2 / c5 + self.c3 / (c5 * c5) + 2.0 * self.c4 / c5.powi(3))
    }
}

pub fn wigner_coefficients(v: &CovMatrix6) -> Result<WignerCoefficients> {
    coefficients_from_block(&v.x_block())
}

pub fn coefficients_from_block(b: &XBlock) -> Result<WignerCoefficients> {
    let (d1, d2) = d_terms(b);
    if d1 == 0.0 || !d1.is_finite() {
        return Err(Error::Degenerate(format!(
            "D1 = {d1}: the two-click heralding probability vanishes"
        )));
    }
    let v55 = b.v55();
    let c4 = (b.v15 * b.v35).powi(2);
    Ok(WignerCoefficients {
        c1: d1 * v55 * PI,
        c2: d1 - v55 * d2,
        c3: d2 - 2.0 * v55 * c4,
        c4,
        c5: 1.0 / v55,
        d1,
        d2,
    })
}

fn d_terms(b: &XBlock) -> (f64, f64) {
    let v55 = b.v55();
    let d1 = v55.powi(4) * trigger_bracket(b);
    let d2 = v55
        * (2.0 * b.v15 * b.v35 * (b.v13 * v55 - b.v15 * b.v35)
            + v55 * (b.v15 * b.v15 * b.n33 + b.v35 * b.v35 * b.n11));
    (d1, d2)
}

/// `(V11-1)(V33-1) + V13^2`.
fn trigger_bracket(b: &XBlock) -> f64 {
    b.n11 * b.n33 + b.v13 * b.v13
}

pub fn evaluate_wigner(coeffs: &WignerCoefficients, x: f64, p: f64) -> f64 {
    let r2 = x * x + p * p;
    (coeffs.c2 + coeffs.c3 * r2 + coeffs.c4 * r2 * r2) * (-coeffs.c5 * r2).exp() / coeffs.c1
}

/// Two-photon fidelity `2 pi int int W W_2` in closed form.
///
/// When `D1` underflows (pump so weak that the heralding rate is below
/// `1e-300`) the zero-intensity limit `V15^2 V35^2 / (2 [(V11-1)(V33-1) + V13^2])`
/// is returned instead.
pub fn fidelity_two_photon(v: &CovMatrix6) -> Result<f64> {
    fidelity_from_block(&v.x_block())
}

pub fn fidelity_from_block(b: &XBlock) -> Result<f64> {
    let (d1, d2) = d_terms(b);
    if d1 == 0.0 || !d1.is_finite() {
        return Err(Error::Degenerate(format!(
            "D1 = {d1}: the two-click heralding probability vanishes"
        )));
    }
    if d1.abs() < D1_UNDERFLOW {
        return Ok(zero_intensity_fidelity(b));
    }
    let v = b.v55();
    let one_minus_v = -b.n55;
    let c4 = (b.v15 * b.v35).powi(2);
    let num = d1 * one_minus_v.powi(2) * (1.0 + v).powi(2)
        - d2 * v * v * one_minus_v * (1.0 + v) * (5.0 - v)
        + 2.0 * v.powi(3) * c4 * (4.0 * v - 5.0 * one_minus_v.powi(2));
    Ok(2.0 * num / (d1 * (1.0 + v).powi(5)))
}

/// Weak-pump limit of the two-photon fidelity.
pub fn zero_intensity_fidelity(b: &XBlock) -> f64 {
    // rescale so that subnormal products cannot appear
    let scale = b.n11.abs().max(b.n33.abs()).max(b.v13.abs());
    if scale == 0.0 {
        return f64::NAN;
    }
    let (a, c, d) = (b.n11 / scale, b.n33 / scale, b.v13 / scale);
    (b.v15 * b.v15 / scale) * (b.v35 * b.v35 / scale) / (2.0 * (a * c + d * d))
}
