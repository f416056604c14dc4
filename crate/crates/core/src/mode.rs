//! Uniform time grids, sampled real mode functions and the trapezoid
//! quadratures used for every overlap and kernel double integral.

use crate::error::{Error, Result};

/// Tolerance on the unit-norm invariant of [`SampledModeFunction`].
pub const NORM_TOLERANCE: f64 = 1e-8;

/// Uniform time grid `t_k = start + k * step`, `k = 0..len`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    start: f64,
    step: f64,
    len: usize,
}

/// Resolution and extent of the grid built around a set of click times,
/// both in units of `1/gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub step: f64,
    pub half_window: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            step: 0.01,
            half_window: 20.0,
        }
    }
}

impl TimeGrid {
    pub fn new(start: f64, step: f64, len: usize) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::invalid("step", format!("must be positive, got {step}")));
        }
        if !start.is_finite() {
            return Err(Error::invalid("start", "must be finite"));
        }
        if len < 2 {
            return Err(Error::invalid("len", "a grid needs at least two samples"));
        }
        Ok(TimeGrid { start, step, len })
    }

    /// Grid covering `[min(times) - w, max(times) + w]` with `w = half_window/gamma`
    /// and step `spec.step/gamma`.
    ///
    /// When the times are not all commensurate with the requested step, the step
    /// is shrunk so that the first and last time both fall on grid nodes.
    pub fn around(times: &[f64], gamma: f64, spec: GridSpec) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::invalid("times", "need at least one time"));
        }
        if !(gamma > 0.0) {
            return Err(Error::invalid("gamma", "must be positive"));
        }
        if !(spec.step > 0.0 && spec.half_window > 0.0) {
            return Err(Error::invalid("grid", "step and half window must be positive"));
        }
        let lo = times.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut step = spec.step / gamma;
        let span = hi - lo;
        if span > 0.0 {
            let cells = (span / step - 1e-9).ceil().max(1.0);
            step = span / cells;
        }
        let window_cells = (spec.half_window / gamma / step).ceil() as usize;
        let span_cells = (span / step).round() as usize;
        let start = lo - window_cells as f64 * step;
        TimeGrid::new(start, step, span_cells + 2 * window_cells + 1)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn end(&self) -> f64 {
        self.time(self.len - 1)
    }

    pub fn time(&self, k: usize) -> f64 {
        self.start + k as f64 * self.step
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(move |k| self.time(k))
    }

    /// Index of the node nearest to `t`, clamped to the grid.
    pub fn nearest(&self, t: f64) -> usize {
        let k = ((t - self.start) / self.step).round();
        k.clamp(0.0, (self.len - 1) as f64) as usize
    }

    /// Trapezoid weight of node `k`.
    pub fn weight(&self, k: usize) -> f64 {
        if k == 0 || k + 1 == self.len {
            0.5 * self.step
        } else {
            self.step
        }
    }

    pub fn same_as(&self, other: &TimeGrid) -> bool {
        self.len == other.len
            && (self.step - other.step).abs() <= 1e-12 * self.step
            && (self.start - other.start).abs() <= 1e-9 * self.step.max(self.start.abs())
    }

    /// Samples `f` on every node.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.times().map(f).collect()
    }

    /// Trapezoid rule for `sum_k w_k a_k b_k`.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.len);
        debug_assert_eq!(b.len(), self.len);
        a.iter()
            .zip(b)
            .enumerate()
            .map(|(k, (x, y))| self.weight(k) * x * y)
            .sum()
    }

    /// Discrete convolution `y_k = sum_l w_l exp(-rate |t_k - t_l|) f_l`.
    ///
    /// Computed exactly in O(len) by a forward and a backward recursion; the
    /// kink of the kernel sits on the diagonal, so each one-sided sum is a
    /// trapezoid over a smooth integrand.
    pub fn exp_convolve(&self, f: &[f64], rate: f64) -> Vec<f64> {
        debug_assert_eq!(f.len(), self.len);
        let decay = (-rate * self.step).exp();
        let n = self.len;
        let mut out = vec![0.0; n];
        let mut acc = 0.0;
        for k in 0..n {
            acc = acc * decay + self.weight(k) * f[k];
            out[k] = acc;
        }
        acc = 0.0;
        for k in (0..n).rev() {
            acc = acc * decay + self.weight(k) * f[k];
            out[k] += acc - self.weight(k) * f[k];
        }
        out
    }
}

/// Real temporal mode function sampled on a [`TimeGrid`], with unit
/// trapezoid norm.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledModeFunction {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl SampledModeFunction {
    /// Wraps samples that are already unit norm to within [`NORM_TOLERANCE`].
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        check_len(&grid, &values)?;
        let norm = grid.inner(&values, &values).sqrt();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized { norm });
        }
        Ok(SampledModeFunction { grid, values })
    }

    /// Rescales the samples to unit norm.
    pub fn normalized(grid: TimeGrid, mut values: Vec<f64>) -> Result<Self> {
        check_len(&grid, &values)?;
        let norm = grid.inner(&values, &values).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Degenerate(format!(
                "cannot normalize a mode function of norm {norm}"
            )));
        }
        values.iter_mut().for_each(|v| *v /= norm);
        Ok(SampledModeFunction { grid, values })
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.sample(f);
        Self::normalized(grid, values)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.grid.inner(&self.values, &self.values).sqrt()
    }

    pub fn overlap(&self, other: &SampledModeFunction) -> Result<f64> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(self.grid.inner(&self.values, &other.values))
    }

    /// `sum_k w_k f(t_k) h(t_k)` for an analytic `h`.
    pub fn project(&self, h: impl Fn(f64) -> f64) -> f64 {
        self.grid
            .times()
            .zip(&self.values)
            .enumerate()
            .map(|(k, (t, v))| self.grid.weight(k) * v * h(t))
            .sum()
    }

    /// L2 distance to `other`, minimised over the global sign.
    pub fn distance_up_to_sign(&self, other: &SampledModeFunction) -> Result<f64> {
        let s = self.overlap(other)?;
        Ok((2.0 - 2.0 * s.abs()).max(0.0).sqrt())
    }

    /// Value interpolated linearly at `t`; zero outside the grid.
    pub fn value_at(&self, t: f64) -> f64 {
        let x = (t - self.grid.start) / self.grid.step;
        if x < 0.0 || x > (self.grid.len - 1) as f64 {
            return 0.0;
        }
        let k = (x.floor() as usize).min(self.grid.len - 2);
        let frac = x - k as f64;
        self.values[k] * (1.0 - frac) + self.values[k + 1] * frac
    }

    pub fn negated(&self) -> SampledModeFunction {
        SampledModeFunction {
            grid: self.grid,
            values: self.values.iter().map(|v| -v).collect(),
        }
    }
}

fn check_len(grid: &TimeGrid, values: &[f64]) -> Result<()> {
    if values.len() != grid.len() {
        return Err(Error::GridMismatch);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("values", "mode function samples must be finite"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_places_clicks_on_nodes() {
        let grid = TimeGrid::around(&[0.0, 1.0 / 3.0], 1.0, GridSpec::default()).unwrap();
        for t in [0.0, 1.0 / 3.0] {
            let k = grid.nearest(t);
            assert!((grid.time(k) - t).abs() < 1e-12);
        }
        assert!(grid.start() <= -20.0 + 1e-9);
        assert!(grid.end() >= 1.0 / 3.0 + 20.0 - 1e-9);
    }

    #[test]
    fn convolution_matches_direct_sum() {
        let grid = TimeGrid::new(-3.0, 0.1, 61).unwrap();
        let f = grid.sample(|t| (t * 1.3).sin() + 0.2 * t);
        let fast = grid.exp_convolve(&f, 0.7);
        for k in [0, 17, 30, 60] {
            let tk = grid.time(k);
            let direct: f64 = (0..grid.len())
                .map(|l| grid.weight(l) * (-0.7 * (tk - grid.time(l)).abs()).exp() * f[l])
                .sum();
            assert!((fast[k] - direct).abs() < 1e-12, "{k}: {} vs {direct}", fast[k]);
        }
    }

    #[test]
    fn new_rejects_unnormalized() {
        let grid = TimeGrid::new(0.0, 0.5, 3).unwrap();
        assert!(matches!(
            SampledModeFunction::new(grid, vec![2.0, 2.0, 2.0]),
            Err(Error::NotNormalized { .. })
        ));
        assert!(SampledModeFunction::normalized(grid, vec![0.0; 3]).is_err());
    }

    #[test]
    fn overlap_requires_same_grid() {
        let a = SampledModeFunction::from_fn(TimeGrid::new(0.0, 0.1, 10).unwrap(), |_| 1.0).unwrap();
        let b = SampledModeFunction::from_fn(TimeGrid::new(0.0, 0.1, 11).unwrap(), |_| 1.0).unwrap();
        assert_eq!(a.overlap(&b), Err(Error::GridMismatch));
        assert!((a.overlap(&a).unwrap() - 1.0).abs() < 1e-12);
    }
}
