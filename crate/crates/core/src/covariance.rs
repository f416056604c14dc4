//! Covariance matrix of two trigger modes and one signal mode.
//!
//! Quadratures are ordered `(x1, p1, x2, p2, x3, p3)` with
//! `V_ij = <y_i y_j + y_j y_i>`, so the vacuum is the identity. For real mode
//! functions and real kernels the matrix splits into an x block and a p block
//! that differ only in the sign of the trigger-signal entries:
//!
//! ```text
//! V[x_i, x_j] = K_ij + 2 N_ij + 2 M_ij
//! V[p_i, p_j] = K_ij + 2 N_ij - 2 M_ij
//! ```
//!
//! where `K` holds mode commutators, `N_ij = <a_i^dag a_j>` (same beam, auto
//! kernel, scaled by the detector efficiency) and `M_ij = <a_i a_j>` (trigger
//! with signal, cross kernel, scaled by `sqrt(eta_t eta_s)`).

use crate::error::{Error, Result};
use crate::kernels::{exponential_weights, OpoParams};
use crate::mode::{SampledModeFunction, TimeGrid, NORM_TOLERANCE};
use nalgebra::{DMatrix, Matrix6, SymmetricEigen};

/// Independent entries of the x block, in the 1-based quadrature numbering
/// (`V11 = x1x1`, `V13 = x1x2`, `V15 = x1x3`, ...).
///
/// Diagonal entries are stored as their excess over the vacuum value,
/// `n11 = V11 - 1`, which at weak pump is far below the resolution of `V11`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XBlock {
    pub n11: f64,
    pub v13: f64,
    pub v15: f64,
    pub n33: f64,
    pub v35: f64,
    pub n55: f64,
}

impl XBlock {
    pub fn v11(&self) -> f64 {
        1.0 + self.n11
    }
    pub fn v33(&self) -> f64 {
        1.0 + self.n33
    }
    pub fn v55(&self) -> f64 {
        1.0 + self.n55
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix6 {
    entries: Matrix6<f64>,
    block: XBlock,
}

impl CovMatrix6 {
    /// Builds the full matrix from its x block; the p block repeats it with the
    /// trigger-signal entries negated and all x-p entries vanish.
    pub fn from_x_block(b: XBlock) -> Self {
        let x = [
            [b.v11(), b.v13, b.v15],
            [b.v13, b.v33(), b.v35],
            [b.v15, b.v35, b.v55()],
        ];
        let mut m = Matrix6::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let flip = if (i == 2) != (j == 2) { -1.0 } else { 1.0 };
                m[(2 * i, 2 * j)] = x[i][j];
                m[(2 * i + 1, 2 * j + 1)] = flip * x[i][j];
            }
        }
        CovMatrix6 { entries: m, block: b }
    }

    pub fn x_block(&self) -> XBlock {
        self.block
    }

    pub fn matrix(&self) -> &Matrix6<f64> {
        &self.entries
    }

    /// Entry by 0-based quadrature index.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..6).all(|i| (0..6).all(|j| (self.entries[(i, j)] - self.entries[(j, i)]).abs() <= tol))
    }

    /// Smallest eigenvalue of `V + i Omega` (through its real 12x12 form);
    /// nonnegative for a physical state.
    pub fn min_uncertainty_eigenvalue(&self) -> f64 {
        let mut omega = DMatrix::<f64>::zeros(6, 6);
        for k in 0..3 {
            omega[(2 * k, 2 * k + 1)] = 1.0;
            omega[(2 * k + 1, 2 * k)] = -1.0;
        }
        let mut real = DMatrix::<f64>::zeros(12, 12);
        for i in 0..6 {
            for j in 0..6 {
                real[(i, j)] = self.entries[(i, j)];
                real[(i + 6, j + 6)] = self.entries[(i, j)];
                real[(i, j + 6)] = -omega[(i, j)];
                real[(i + 6, j)] = omega[(i, j)];
            }
        }
        SymmetricEigen::new(real).eigenvalues.min()
    }

    pub fn is_physical(&self, tol: f64) -> bool {
        self.is_symmetric(tol) && self.min_uncertainty_eigenvalue() >= -tol
    }
}

/// Unit-norm top hat of width `width` (rounded to whole grid steps) centred
/// on the grid node nearest `click_time`; its height is `1/sqrt(width)`.
pub fn trigger_top_hat(grid: &TimeGrid, click_time: f64, width: f64) -> Result<SampledModeFunction> {
    let h = grid.step();
    if width < h * (1.0 - 1e-9) {
        return Err(Error::invalid(
            "width",
            format!("top hat width {width} is below the grid step {h}"),
        ));
    }
    let samples = (width / h).round().max(1.0) as usize;
    let center = grid.nearest(click_time);
    let first = center as isize - ((samples - 1) / 2) as isize;
    if first < 1 || first as usize + samples >= grid.len() {
        return Err(Error::invalid("click_time", "top hat does not fit inside the grid"));
    }
    let height = 1.0 / (samples as f64 * h).sqrt();
    let mut values = vec![0.0; grid.len()];
    values[first as usize..first as usize + samples].fill(height);
    SampledModeFunction::new(*grid, values)
}

/// Applies the auto kernel `<a^dag a>(t - t')` to `f` on its grid.
pub fn apply_auto_kernel(params: &OpoParams, grid: &TimeGrid, f: &[f64]) -> Vec<f64> {
    apply_kernel(params, grid, f, -1.0)
}

/// Applies the cross kernel `<a_+ a_->(t - t')` to `f` on its grid.
pub fn apply_cross_kernel(params: &OpoParams, grid: &TimeGrid, f: &[f64]) -> Vec<f64> {
    apply_kernel(params, grid, f, 1.0)
}

fn apply_kernel(params: &OpoParams, grid: &TimeGrid, f: &[f64], sign: f64) -> Vec<f64> {
    if params.epsilon() == 0.0 {
        return vec![0.0; f.len()];
    }
    let (c_mu, c_lambda) = exponential_weights(params);
    let slow = grid.exp_convolve(f, params.mu());
    let fast = grid.exp_convolve(f, params.lambda());
    slow.iter()
        .zip(&fast)
        .map(|(s, q)| c_mu * s + sign * c_lambda * q)
        .collect()
}

/// Precomputed trigger side of the covariance, reusable for many signal modes.
#[derive(Debug, Clone)]
pub struct CovarianceAssembler {
    params: OpoParams,
    grid: TimeGrid,
    n11: f64,
    v13: f64,
    n33: f64,
    /// `2 sqrt(eta_t eta_s) * (cross kernel applied to f_i)`; dotting with the
    /// signal mode gives `V15` / `V35`.
    cross_1: Vec<f64>,
    cross_2: Vec<f64>,
}

impl CovarianceAssembler {
    /// `t1` and `t2` must be orthogonal, or identical: coincident clicks are
    /// treated as two distinct infinitesimal modes at the same instant.
    pub fn new(params: &OpoParams, t1: &SampledModeFunction, t2: &SampledModeFunction) -> Result<Self> {
        let grid = *t1.grid();
        if !grid.same_as(t2.grid()) {
            return Err(Error::GridMismatch);
        }
        check_norm(t1)?;
        check_norm(t2)?;
        let commutator = t1.overlap(t2)?;
        let commutator = if commutator.abs() < 1e-12 || (commutator - 1.0).abs() < 1e-9 {
            0.0
        } else {
            return Err(Error::invalid(
                "trigger modes",
                format!("trigger modes overlap partially (overlap {commutator})"),
            ));
        };
        let eta_t = params.eta_t();
        let auto_1 = apply_auto_kernel(params, &grid, t1.values());
        let auto_2 = apply_auto_kernel(params, &grid, t2.values());
        let n11 = 2.0 * eta_t * grid.inner(t1.values(), &auto_1);
        let n33 = 2.0 * eta_t * grid.inner(t2.values(), &auto_2);
        let v13 = commutator + 2.0 * eta_t * grid.inner(t1.values(), &auto_2);
        let scale = 2.0 * (eta_t * params.eta_s()).sqrt();
        let scaled = |f: &[f64]| -> Vec<f64> {
            apply_cross_kernel(params, &grid, f)
                .into_iter()
                .map(|v| scale * v)
                .collect()
        };
        Ok(CovarianceAssembler {
            params: *params,
            grid,
            n11,
            v13,
            n33,
            cross_1: scaled(t1.values()),
            cross_2: scaled(t2.values()),
        })
    }

    pub fn params(&self) -> &OpoParams {
        &self.params
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Trigger-only entries `(V11 - 1, V13, V33 - 1)`; independent of the signal mode.
    pub fn trigger_entries(&self) -> (f64, f64, f64) {
        (self.n11, self.v13, self.n33)
    }

    /// Signal-dependent entries `(V15, V35, V55 - 1)` for a unit-norm sample vector.
    pub fn signal_entries(&self, f: &[f64]) -> (f64, f64, f64) {
        let v15 = self.grid.inner(f, &self.cross_1);
        let v35 = self.grid.inner(f, &self.cross_2);
        let auto = apply_auto_kernel(&self.params, &self.grid, f);
        let n55 = 2.0 * self.params.eta_s() * self.grid.inner(f, &auto);
        (v15, v35, n55)
    }

    /// Vectors whose inner products with the signal samples give `V15` and `V35`.
    pub fn cross_vectors(&self) -> (&[f64], &[f64]) {
        (&self.cross_1, &self.cross_2)
    }

    pub fn assemble(&self, signal: &SampledModeFunction) -> Result<CovMatrix6> {
        if !self.grid.same_as(signal.grid()) {
            return Err(Error::GridMismatch);
        }
        check_norm(signal)?;
        let (v15, v35, n55) = self.signal_entries(signal.values());
        Ok(CovMatrix6::from_x_block(XBlock {
            n11: self.n11,
            v13: self.v13,
            v15,
            n33: self.n33,
            v35,
            n55,
        }))
    }
}

/// Covariance matrix for trigger modes `t1`, `t2` (trigger beam) and signal
/// mode `signal` (signal beam), all on one grid.
pub fn assemble_covariance(
    params: &OpoParams,
    t1: &SampledModeFunction,
    t2: &SampledModeFunction,
    signal: &SampledModeFunction,
) -> Result<CovMatrix6> {
    CovarianceAssembler::new(params, t1, t2)?.assemble(signal)
}

fn check_norm(f: &SampledModeFunction) -> Result<()> {
    let norm = f.norm();
    if (norm - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::NotNormalized { norm });
    }
    Ok(())
}
