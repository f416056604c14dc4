//! Signal mode optimisation for two trigger clicks.
//!
//! At zero intensity the best mode is `f_a ∝ g1 + g2`. At finite pump the
//! mode is expanded in cusped exponentials `exp(-k|t - t_ci|)` around each
//! click with a few decay rates `k`, orthonormalised on the grid, and the
//! closed-form `F2` is maximised over the unit sphere of coefficients by
//! Nelder-Mead with restarts.

use crate::covariance::{apply_auto_kernel, trigger_top_hat, CovarianceAssembler, XBlock};
use crate::error::{Error, Result};
use crate::kernels::{g_mode, g_value, ClickTimes, OpoParams};
use crate::mode::{GridSpec, SampledModeFunction, TimeGrid};
use crate::wigner::fidelity_from_block;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizerSettings {
    /// Decay rates per click in the expansion basis (at most [`MAX_BASIS_RATES`]).
    pub basis_size: usize,
    pub max_iters: usize,
    /// Convergence threshold on the change of `F2` over `stall_iters` iterations.
    pub tol: f64,
    pub stall_iters: usize,
    /// Extra Nelder-Mead runs from the best point found so far.
    pub restarts: usize,
    pub seed: u64,
    #[serde(skip)]
    pub grid: GridSpec,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            basis_size: 6,
            max_iters: 20_000,
            tol: 1e-9,
            stall_iters: 20,
            restarts: 3,
            seed: 7,
            grid: GridSpec::default(),
        }
    }
}

/// Decay rates, in units of `gamma`, tried in this order; `mu` and `lambda`
/// come second and third.
pub const MAX_BASIS_RATES: usize = 8;

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_BASIS_RATES).contains(&self.basis_size) {
            return Err(Error::invalid(
                "basis_size",
                format!("must lie in 2..={MAX_BASIS_RATES}, got {}", self.basis_size),
            ));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol", "must be positive"));
        }
        if self.max_iters == 0 || self.stall_iters == 0 {
            return Err(Error::invalid("max_iters", "iteration limits must be positive"));
        }
        Ok(())
    }
}

fn basis_rates(params: &OpoParams, count: usize) -> Vec<f64> {
    let g = params.gamma();
    let all = [0.5 * g, params.mu(), params.lambda(), 0.25 * g, g, 2.0 * g, 0.125 * g, 4.0 * g];
    let mut rates: Vec<f64> = Vec::new();
    for r in all.into_iter().take(count) {
        if rates.iter().all(|q| (q - r).abs() > 1e-9 * g) {
            rates.push(r);
        }
    }
    rates
}

/// `N [g1 + g2]` sampled on `grid`.
pub fn optimal_mode_zero_intensity_on(grid: &TimeGrid, t_c1: f64, t_c2: f64, gamma: f64) -> Result<SampledModeFunction> {
    SampledModeFunction::from_fn(*grid, |t| g_value(t_c1, gamma, t) + g_value(t_c2, gamma, t))
}

/// Zero-intensity optimum on the default grid around the two clicks.
pub fn optimal_mode_zero_intensity(t_c1: f64, t_c2: f64, gamma: f64) -> Result<SampledModeFunction> {
    let grid = TimeGrid::around(&[t_c1, t_c2], gamma, GridSpec::default())?;
    optimal_mode_zero_intensity_on(&grid, t_c1, t_c2, gamma)
}

/// Weak-pump limit of `F2` for a mode `f`,
/// `eta_s^2 2 (f.g1)^2 (f.g2)^2 / (1 + I12^2)`.
///
/// The `g_i` are sampled on the grid of `f` and all overlaps are grid inner
/// products, so the result is a true fidelity (at most one) on that grid.
pub fn zero_intensity_fidelity_for_mode(params: &OpoParams, clicks: &ClickTimes, f: &SampledModeFunction) -> Result<f64> {
    let [t1, t2] = two_clicks(clicks)?;
    let g1 = g_mode(f.grid(), t1, params.gamma())?;
    let g2 = g_mode(f.grid(), t2, params.gamma())?;
    let (p1, p2) = (f.overlap(&g1)?, f.overlap(&g2)?);
    let i12 = g1.overlap(&g2)?;
    Ok(params.eta_s().powi(2) * 2.0 * (p1 * p2).powi(2) / (1.0 + i12 * i12))
}

fn two_clicks(clicks: &ClickTimes) -> Result<[f64; 2]> {
    match clicks.times() {
        &[a, b] => Ok([a, b]),
        _ => Err(Error::invalid("clicks", "exactly two clicks are required")),
    }
}

/// `F2` of the state heralded by clicks in one-sample top hats, for signal mode `f`.
pub fn fidelity_for_mode(params: &OpoParams, clicks: &ClickTimes, f: &SampledModeFunction) -> Result<f64> {
    if params.epsilon() == 0.0 {
        return zero_intensity_fidelity_for_mode(params, clicks, f);
    }
    let [t1, t2] = two_clicks(clicks)?;
    let grid = f.grid();
    let asm = CovarianceAssembler::new(
        params,
        &trigger_top_hat(grid, t1, grid.step())?,
        &trigger_top_hat(grid, t2, grid.step())?,
    )?;
    crate::wigner::fidelity_two_photon(&asm.assemble(f)?)
}

/// Precomputed two-click problem: trigger side of the covariance and the
/// orthonormal expansion basis for the signal mode.
#[derive(Debug, Clone)]
pub struct ModeProblem {
    params: OpoParams,
    clicks: [f64; 2],
    assembler: CovarianceAssembler,
    /// Orthonormal basis functions, one sample vector each.
    basis: Vec<Vec<f64>>,
    /// Basis coordinates of the vectors giving `V15`, `V35`.
    cross: [DVector<f64>; 2],
    /// `V55 - 1` as a quadratic form in basis coordinates.
    auto_form: DMatrix<f64>,
    orthonormality_error: f64,
}

impl ModeProblem {
    pub fn new(params: &OpoParams, clicks: &ClickTimes, settings: &OptimizerSettings) -> Result<Self> {
        settings.validate()?;
        let [t1, t2] = two_clicks(clicks)?;
        let g = params.gamma();
        let grid = TimeGrid::around(&[t1, t2], g, settings.grid)?;
        let assembler = CovarianceAssembler::new(
            params,
            &trigger_top_hat(&grid, t1, grid.step())?,
            &trigger_top_hat(&grid, t2, grid.step())?,
        )?;

        let centers: Vec<f64> = if t1 == t2 { vec![t1] } else { vec![t1, t2] };
        let raw: Vec<Vec<f64>> = centers
            .iter()
            .flat_map(|&tc| {
                basis_rates(params, settings.basis_size)
                    .into_iter()
                    .map(move |k| (tc, k))
            })
            .map(|(tc, k)| grid.sample(|t| (-k * (t - tc).abs()).exp()))
            .collect();
        let basis = orthonormalize(&grid, &raw);
        let orthonormality_error = {
            let d = basis.len();
            let mut err = 0.0f64;
            for i in 0..d {
                for j in 0..d {
                    let target = if i == j { 1.0 } else { 0.0 };
                    err = err.max((grid.inner(&basis[i], &basis[j]) - target).abs());
                }
            }
            err
        };

        let (c1, c2) = assembler.cross_vectors();
        let cross = [
            DVector::from_iterator(basis.len(), basis.iter().map(|q| grid.inner(q, c1))),
            DVector::from_iterator(basis.len(), basis.iter().map(|q| grid.inner(q, c2))),
        ];
        let applied: Vec<Vec<f64>> = basis.iter().map(|q| apply_auto_kernel(params, &grid, q)).collect();
        let d = basis.len();
        let mut auto_form = DMatrix::from_fn(d, d, |i, j| 2.0 * params.eta_s() * grid.inner(&basis[i], &applied[j]));
        auto_form = (&auto_form + auto_form.transpose()) * 0.5;

        Ok(ModeProblem {
            params: *params,
            clicks: [t1, t2],
            assembler,
            basis,
            cross,
            auto_form,
            orthonormality_error,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        self.assembler.grid()
    }

    pub fn params(&self) -> &OpoParams {
        &self.params
    }

    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    /// Largest deviation of the basis Gram matrix from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        self.orthonormality_error
    }

    /// The x block for a signal mode given by its samples (assumed unit norm).
    pub fn block_for_samples(&self, f: &[f64]) -> XBlock {
        let (n11, v13, n33) = self.assembler.trigger_entries();
        let (v15, v35, n55) = self.assembler.signal_entries(f);
        XBlock { n11, v13, v15, n33, v35, n55 }
    }

    /// `F2` for a signal mode given by its samples (assumed unit norm).
    pub fn fidelity_of_samples(&self, f: &[f64]) -> Result<f64> {
        if self.params.epsilon() == 0.0 {
            let mode = SampledModeFunction::normalized(*self.grid(), f.to_vec())?;
            return zero_intensity_fidelity_for_mode(&self.params, &ClickTimes::new(self.clicks.to_vec())?, &mode);
        }
        fidelity_from_block(&self.block_for_samples(f))
    }

    /// Vectors `(V15, V35)` are the grid inner products of the signal mode with these.
    pub fn cross_vectors(&self) -> (&[f64], &[f64]) {
        self.assembler.cross_vectors()
    }

    /// `F2` at basis coordinates `a`, after normalising `a`.
    pub fn fidelity_of_coords(&self, a: &DVector<f64>) -> Result<f64> {
        let norm = a.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Degenerate("zero coefficient vector".into()));
        }
        let a = a / norm;
        if self.params.epsilon() == 0.0 {
            return self.fidelity_of_samples(&self.samples(&a));
        }
        let (n11, v13, n33) = self.assembler.trigger_entries();
        let block = XBlock {
            n11,
            v13,
            v15: a.dot(&self.cross[0]),
            n33,
            v35: a.dot(&self.cross[1]),
            n55: a.dot(&(&self.auto_form * &a)),
        };
        fidelity_from_block(&block)
    }

    /// Sampled mode for basis coordinates `a` (not renormalised).
    pub fn samples(&self, a: &DVector<f64>) -> Vec<f64> {
        let mut out = vec![0.0; self.grid().len()];
        for (q, &c) in self.basis.iter().zip(a.iter()) {
            for (o, v) in out.iter_mut().zip(q) {
                *o += c * v;
            }
        }
        out
    }

    /// Basis coordinates of the projection of `f` onto the basis span.
    pub fn coords_of(&self, f: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.basis.len(), self.basis.iter().map(|q| self.grid().inner(q, f)))
    }

    /// Unit-norm mode for coordinates `a`, with the gauge `f(t_c1) > 0`.
    pub fn mode_for_coords(&self, a: &DVector<f64>) -> Result<SampledModeFunction> {
        let f = SampledModeFunction::normalized(*self.grid(), self.samples(a))?;
        Ok(if f.values()[self.grid().nearest(self.clicks[0])] < 0.0 {
            f.negated()
        } else {
            f
        })
    }

    pub fn zero_intensity_mode(&self) -> Result<SampledModeFunction> {
        optimal_mode_zero_intensity_on(self.grid(), self.clicks[0], self.clicks[1], self.params.gamma())
    }
}

/// Orthonormal basis of `span(raw)` under the trapezoid inner product;
/// directions with relative weight below `1e-12` are dropped.
fn orthonormalize(grid: &TimeGrid, raw: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = raw.len();
    let gram = DMatrix::from_fn(n, n, |i, j| grid.inner(&raw[i], &raw[j]));
    let eig = SymmetricEigen::new(gram);
    let top = eig.eigenvalues.max();
    let mut order: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k] > 1e-12 * top).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut basis: Vec<Vec<f64>> = order
        .iter()
        .map(|&k| {
            let scale = 1.0 / eig.eigenvalues[k].sqrt();
            let mut q = vec![0.0; grid.len()];
            for (r, &w) in raw.iter().zip(eig.eigenvectors.column(k).iter()) {
                for (o, v) in q.iter_mut().zip(r) {
                    *o += scale * w * v;
                }
            }
            q
        })
        .collect();
    // one Gram-Schmidt sweep removes the rounding left by the eigen route
    for i in 0..basis.len() {
        for j in 0..i {
            let d = grid.inner(&basis[i], &basis[j]);
            let (head, tail) = basis.split_at_mut(i);
            for (o, v) in tail[0].iter_mut().zip(&head[j]) {
                *o -= d * v;
            }
        }
        let norm = grid.inner(&basis[i], &basis[i]).sqrt();
        basis[i].iter_mut().for_each(|v| *v /= norm);
    }
    basis
}

/// Outcome of [`optimize_mode`].
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizedMode {
    pub mode: SampledModeFunction,
    pub fidelity: f64,
    /// `F2` of `f_a` at the same pump.
    pub zero_intensity_mode_fidelity: f64,
    /// Whether the stopping rule was met rather than the iteration cap.
    pub converged: bool,
    /// Best `F2` after each accepted iteration, over all runs in order.
    pub trace: Vec<f64>,
}

struct SimplexRun {
    best: DVector<f64>,
    value: f64,
    converged: bool,
    trace: Vec<f64>,
}

/// Nelder-Mead maximisation of `objective` from `start`.
fn nelder_mead(
    objective: &impl Fn(&DVector<f64>) -> f64,
    start: &DVector<f64>,
    step: f64,
    settings: &OptimizerSettings,
) -> SimplexRun {
    let d = start.len();
    let mut simplex: Vec<(DVector<f64>, f64)> = (0..=d)
        .map(|k| {
            let mut x = start.clone();
            if k > 0 {
                x[k - 1] += step;
            }
            let v = objective(&x);
            (x, v)
        })
        .collect();
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..settings.max_iters {
        // descending order: best first
        simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
        trace.push(simplex[0].1);
        let len = trace.len();
        if len > settings.stall_iters && trace[len - 1] - trace[len - 1 - settings.stall_iters] < settings.tol {
            converged = true;
            break;
        }
        let centroid = simplex[..d].iter().fold(DVector::zeros(d), |acc, (x, _)| acc + x) / d as f64;
        let worst = simplex[d].clone();
        let toward = |t: f64| &centroid + (&centroid - &worst.0) * t;
        let reflected = toward(1.0);
        let fr = objective(&reflected);
        if fr > simplex[0].1 {
            let expanded = toward(2.0);
            let fe = objective(&expanded);
            simplex[d] = if fe > fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr > simplex[d - 1].1 {
            simplex[d] = (reflected, fr);
        } else {
            let (contracted, fc) = if fr > worst.1 {
                let x = toward(0.5);
                let v = objective(&x);
                (x, v)
            } else {
                let x = toward(-0.5);
                let v = objective(&x);
                (x, v)
            };
            if fc > worst.1.max(fr) {
                simplex[d] = (contracted, fc);
            } else {
                let best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let x = &best + (&entry.0 - &best) * 0.5;
                    let v = objective(&x);
                    *entry = (x, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
    let (best, value) = simplex.swap_remove(0);
    SimplexRun {
        best: &best / best.norm(),
        value,
        converged,
        trace,
    }
}

/// Maximises `F2` over real unit-norm signal modes for two clicks.
///
/// Runs start from `f_a`, from `g1` and from a seeded perturbation of `f_a`;
/// the best result is then restarted with a fresh simplex until a restart
/// gains less than `tol`. At zero pump `f_a` is returned directly.
pub fn optimize_mode(params: &OpoParams, clicks: &ClickTimes, settings: &OptimizerSettings) -> Result<OptimizedMode> {
    let problem = ModeProblem::new(params, clicks, settings)?;
    let f_a = problem.zero_intensity_mode()?;
    let f_a_fidelity = problem.fidelity_of_samples(f_a.values())?;
    if params.epsilon() == 0.0 {
        return Ok(OptimizedMode {
            mode: f_a,
            fidelity: f_a_fidelity,
            zero_intensity_mode_fidelity: f_a_fidelity,
            converged: true,
            trace: vec![f_a_fidelity],
        });
    }

    let objective = |a: &DVector<f64>| problem.fidelity_of_coords(a).unwrap_or(f64::NEG_INFINITY);
    let start_a = problem.coords_of(f_a.values());
    let g1 = SampledModeFunction::from_fn(*problem.grid(), |t| g_value(clicks.times()[0], params.gamma(), t))?;
    let start_g = problem.coords_of(g1.values());
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let start_p = DVector::from_fn(start_a.len(), |i, _| start_a[i] + 0.2 * (rng.random::<f64>() - 0.5));

    let runs: Vec<SimplexRun> = [start_a, start_g, start_p]
        .par_iter()
        .map(|s| nelder_mead(&objective, &(s / s.norm()), 0.1, settings))
        .collect();
    let mut trace = Vec::new();
    let mut best_index = 0;
    for (k, run) in runs.iter().enumerate() {
        if run.value > runs[best_index].value {
            best_index = k;
        }
    }
    let mut best = runs.into_iter().nth(best_index).unwrap();
    let mut converged = best.converged;
    trace.append(&mut best.trace);
    for _ in 0..settings.restarts {
        let mut next = nelder_mead(&objective, &best.best, 0.02, settings);
        let gain = next.value - best.value;
        trace.append(&mut next.trace);
        converged = next.converged;
        if next.value > best.value {
            best.best = next.best;
            best.value = next.value;
        }
        if gain < settings.tol {
            break;
        }
    }
    // keep the recorded values monotone across runs
    for k in 1..trace.len() {
        trace[k] = trace[k].max(trace[k - 1]);
    }

    let mode = problem.mode_for_coords(&best.best)?;
    let fidelity = problem.fidelity_of_samples(mode.values())?;
    if !fidelity.is_finite() {
        return Err(Error::NoConvergence(format!("optimised fidelity is {fidelity}")));
    }
    Ok(OptimizedMode {
        mode,
        fidelity,
        zero_intensity_mode_fidelity: f_a_fidelity,
        converged,
        trace,
    })
}

/// One point of a two-click fidelity sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub gamma_dt: f64,
    pub fidelity: f64,
    pub converged: bool,
}

/// `F2` against `gamma dt`, with the optimised mode or with `f_a`.
pub fn fidelity_curve(
    params: &OpoParams,
    separations: &[f64],
    use_optimal: bool,
    settings: &OptimizerSettings,
) -> Result<Vec<CurvePoint>> {
    settings.validate()?;
    separations
        .par_iter()
        .map(|&sep| {
            let clicks = ClickTimes::pair(sep / params.gamma())?;
            if use_optimal {
                let opt = optimize_mode(params, &clicks, settings)?;
                Ok(CurvePoint {
                    gamma_dt: sep,
                    fidelity: opt.fidelity,
                    converged: opt.converged,
                })
            } else {
                let grid = TimeGrid::around(clicks.times(), params.gamma(), settings.grid)?;
                let [t1, t2] = two_clicks(&clicks)?;
                let f_a = optimal_mode_zero_intensity_on(&grid, t1, t2, params.gamma())?;
                Ok(CurvePoint {
                    gamma_dt: sep,
                    fidelity: fidelity_for_mode(params, &clicks, &f_a)?,
                    converged: true,
                })
            }
        })
        .collect()
}
