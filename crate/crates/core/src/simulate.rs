//! Fixed-step simulation, admissible noise sampling and the finite-horizon
//! direct-transcription value.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::associated::{construct, AssociatedLti};
use crate::dae::ObservedDae;
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::linalg::{block, expm, hstack, inv_spd, norm2, symmetrize, vstack, Mat, Vector};
use crate::lq::LqWeights;
use crate::observer::{EstimationProblem, Observer};

/// Samples of a vector signal on a strictly increasing time grid, one column
/// per time point.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    pub grid: Vec<f64>,
    pub values: Mat,
}

impl SampledSignal {
    pub fn new(grid: Vec<f64>, values: Mat) -> Result<Self> {
        if grid.len() != values.ncols() {
            return Err(Error::dim("sampled signal: samples per grid point", grid.len(), values.ncols()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("time grid must be strictly increasing".into()));
        }
        Ok(SampledSignal { grid, values })
    }

    pub(crate) fn new_unchecked(grid: Vec<f64>, values: Mat) -> Self {
        debug_assert_eq!(grid.len(), values.ncols());
        SampledSignal { grid, values }
    }

    pub fn zeros(grid: &[f64], dim: usize) -> Self {
        SampledSignal::new_unchecked(grid.to_vec(), Mat::zeros(dim, grid.len()))
    }

    pub fn from_fn(grid: &[f64], dim: usize, mut f: impl FnMut(f64) -> Vec<f64>) -> Self {
        let mut values = Mat::zeros(dim, grid.len());
        for (j, &t) in grid.iter().enumerate() {
            let col = f(t);
            assert_eq!(col.len(), dim, "signal sample has the wrong dimension");
            for (i, x) in col.into_iter().enumerate() {
                values[(i, j)] = x;
            }
        }
        SampledSignal::new_unchecked(grid.to_vec(), values)
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn last(&self) -> Vector {
        self.values.column(self.len() - 1).into_owned()
    }

    pub fn scaled(&self, c: f64) -> Self {
        SampledSignal::new_unchecked(self.grid.clone(), &self.values * c)
    }

    /// Row `i` as a plain vector.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    /// Step of a uniform grid; an error if the grid is not uniform.
    pub fn uniform_step(&self) -> Result<f64> {
        uniform_step(&self.grid)
    }
}

pub fn uniform_step(grid: &[f64]) -> Result<f64> {
    if grid.len() < 2 {
        return Ok(0.0);
    }
    let h = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    let tol = 1e-9 * h.max(f64::MIN_POSITIVE) * grid.len() as f64;
    for (j, w) in grid.windows(2).enumerate() {
        if ((w[1] - w[0]) - h).abs() > tol || (grid[0] + j as f64 * h - w[0]).abs() > tol {
            return Err(Error::InvalidInput("integration requires a uniform time grid".into()));
        }
    }
    Ok(h)
}

/// `[0, t1]` split into the smallest number of equal steps not exceeding `h`.
pub fn uniform_grid(t1: f64, h: f64) -> Result<Vec<f64>> {
    if !(t1 >= 0.0) || !t1.is_finite() || !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidInput(format!("invalid horizon {t1} or step {h}")));
    }
    if t1 == 0.0 {
        return Ok(vec![0.0]);
    }
    let steps = ((t1 / h) - 1e-9).ceil().max(1.0) as usize;
    let h = t1 / steps as f64;
    Ok((0..=steps).map(|j| if j == steps { t1 } else { j as f64 * h }).collect())
}

/// Default integration step `min(1e-3, 0.01 / |A|)`.
pub fn default_step(a: &Mat) -> f64 {
    let nrm = norm2(a);
    if nrm > 0.0 {
        1e-3f64.min(0.01 / nrm)
    } else {
        1e-3
    }
}

/// Classical RK4 for `x' = A x + B u` with `u` linearly interpolated at the
/// half steps.
pub fn integrate_lti(a: &Mat, b: &Mat, x0: &Vector, u: &SampledSignal) -> Result<SampledSignal> {
    let n = a.nrows();
    if a.ncols() != n || x0.len() != n || b.nrows() != n {
        return Err(Error::dim(
            "integrate_lti: A, B, x0",
            format!("A {n}x{n}, B {n}x_, x0 {n}"),
            format!("A {:?}, B {:?}, x0 {}", a.shape(), b.shape(), x0.len()),
        ));
    }
    if b.ncols() != u.dim() {
        return Err(Error::dim("integrate_lti: input dimension", b.ncols(), u.dim()));
    }
    if u.is_empty() {
        return Err(Error::InvalidInput("empty time grid".into()));
    }
    let h = u.uniform_step()?;
    let npts = u.len();
    let mut out = Mat::zeros(n, npts);
    out.set_column(0, x0);
    if n == 0 {
        return Ok(SampledSignal::new_unchecked(u.grid.clone(), out));
    }

    let mut x = x0.clone();
    let mut k1 = Vector::zeros(n);
    let mut k2 = Vector::zeros(n);
    let mut k3 = Vector::zeros(n);
    let mut k4 = Vector::zeros(n);
    let mut tmp = Vector::zeros(n);
    let mut bu_prev = Vector::zeros(n);
    let mut bu_next = Vector::zeros(n);
    let mut bu_half = Vector::zeros(n);
    bu_prev.gemv(1.0, b, &u.values.column(0), 0.0);
    for j in 0..npts - 1 {
        bu_next.gemv(1.0, b, &u.values.column(j + 1), 0.0);
        bu_half.copy_from(&bu_prev);
        bu_half.axpy(0.5, &bu_next, 0.5);

        k1.copy_from(&bu_prev);
        k1.gemv(1.0, a, &x, 1.0);

        tmp.copy_from(&x);
        tmp.axpy(0.5 * h, &k1, 1.0);
        k2.copy_from(&bu_half);
        k2.gemv(1.0, a, &tmp, 1.0);

        tmp.copy_from(&x);
        tmp.axpy(0.5 * h, &k2, 1.0);
        k3.copy_from(&bu_half);
        k3.gemv(1.0, a, &tmp, 1.0);

        tmp.copy_from(&x);
        tmp.axpy(h, &k3, 1.0);
        k4.copy_from(&bu_next);
        k4.gemv(1.0, a, &tmp, 1.0);

        x.axpy(h / 6.0, &k1, 1.0);
        x.axpy(h / 3.0, &k2, 1.0);
        x.axpy(h / 3.0, &k3, 1.0);
        x.axpy(h / 6.0, &k4, 1.0);
        out.set_column(j + 1, &x);
        std::mem::swap(&mut bu_prev, &mut bu_next);
    }
    Ok(SampledSignal::new_unchecked(u.grid.clone(), out))
}

/// `∫ s^T W s dt` for the piecewise-linear interpolant of the samples (exact
/// for that interpolant).
pub fn quadratic_energy(s: &SampledSignal, w: &Mat) -> f64 {
    let mut total = 0.0;
    let mut wb = Vector::zeros(s.dim());
    let mut wa = Vector::zeros(s.dim());
    if s.is_empty() || s.dim() == 0 {
        return 0.0;
    }
    wa.gemv(1.0, w, &s.values.column(0), 0.0);
    for j in 0..s.len() - 1 {
        let a = s.values.column(j);
        let b = s.values.column(j + 1);
        wb.gemv(1.0, w, &b, 0.0);
        let h = s.grid[j + 1] - s.grid[j];
        total += h / 3.0 * (a.dot(&wa) + a.dot(&wb) + b.dot(&wb));
        std::mem::swap(&mut wa, &mut wb);
    }
    total
}

/// Sum of a few random low-frequency sinusoids per component.
pub fn smooth_signal<R: Rng + ?Sized>(rng: &mut R, grid: &[f64], dim: usize) -> SampledSignal {
    const TERMS: usize = 3;
    let mut params = Vec::with_capacity(dim * TERMS);
    for _ in 0..dim * TERMS {
        let amp: f64 = rng.sample(StandardNormal);
        let freq = rng.random_range(0.1..2.0);
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        params.push((amp, freq, phase));
    }
    SampledSignal::from_fn(grid, dim, |t| {
        (0..dim).map(|i| params[i * TERMS..(i + 1) * TERMS].iter().map(|&(a, w, p)| a * (w * t + p).sin()).sum()).collect()
    })
}

fn standard_normal_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vector {
    Vector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Associated LTIs of the observed DAE driven by the model error, `(F, A, I)`,
/// and of the undisturbed DAE `(F, A, [])`.
#[derive(Debug, Clone)]
pub struct PrimalModel {
    pub disturbed: AssociatedLti,
    pub autonomous: AssociatedLti,
}

impl PrimalModel {
    pub fn new(obs: &ObservedDae, rank_tol: f64) -> Result<Self> {
        let disturbed = construct(&obs.disturbed_system(), rank_tol)?.lti;
        let autonomous = construct(&obs.autonomous_system(), rank_tol)?.lti;
        Ok(PrimalModel { disturbed, autonomous })
    }
}

/// One element of the noise ellipsoid together with the state trajectory it
/// produces. `x0` is the value `F x(0)`.
#[derive(Debug, Clone)]
pub struct NoiseRealization {
    pub x0: Vector,
    pub f: SampledSignal,
    pub eta: SampledSignal,
    pub rho: f64,
    pub x: SampledSignal,
}

impl NoiseRealization {
    /// The same realization with every component multiplied by `c`; `rho`
    /// scales by `c^2`.
    pub fn scaled(&self, c: f64) -> Self {
        NoiseRealization {
            x0: &self.x0 * c,
            f: self.f.scaled(c),
            eta: self.eta.scaled(c),
            rho: self.rho * c * c,
            x: self.x.scaled(c),
        }
    }
}

/// `x0^T Q0 x0 + ∫ f^T Q f + η^T R η`.
pub fn rho(prob: &EstimationProblem, x0: &Vector, f: &SampledSignal, eta: &SampledSignal) -> f64 {
    (x0.transpose() * &prob.q0 * x0)[(0, 0)] + quadratic_energy(f, &prob.q) + quadratic_energy(eta, &prob.r)
}

/// Random `(x0, f, η)` with `ρ = radius^2`, `radius ~ U[0, 1]`.
///
/// The model error is generated through the disturbed system's associated
/// LTI, so every sample admits a state trajectory.
pub fn sample_admissible<R: Rng + ?Sized>(
    prob: &EstimationProblem,
    model: &PrimalModel,
    grid: &[f64],
    rng: &mut R,
) -> Result<NoiseRealization> {
    let lti = &model.disturbed;
    let v0 = standard_normal_vector(rng, lti.n_hat);
    let g = smooth_signal(rng, grid, lti.k);
    let eta = smooth_signal(rng, grid, prob.obs.p());
    let v = integrate_lti(&lti.a_l, &lti.b_l, &v0, &g)?;
    let (x, f) = lti.outputs(&v, &g);
    let x0 = &lti.e_cs * &v0;
    let raw = NoiseRealization { rho: rho(prob, &x0, &f, &eta), x0, f, eta, x };
    let radius: f64 = rng.random();
    if raw.rho <= 0.0 {
        return Ok(raw);
    }
    Ok(raw.scaled(radius / raw.rho.sqrt()))
}

/// Noise-free run: `f = 0`, `η = 0`, random consistent initial state and a
/// random choice among the (possibly many) solutions.
pub fn sample_clean<R: Rng + ?Sized>(
    prob: &EstimationProblem,
    model: &PrimalModel,
    grid: &[f64],
    rng: &mut R,
) -> Result<NoiseRealization> {
    let lti = &model.autonomous;
    let v0 = standard_normal_vector(rng, lti.n_hat);
    let g = smooth_signal(rng, grid, lti.k);
    let v = integrate_lti(&lti.a_l, &lti.b_l, &v0, &g)?;
    let (x, _) = lti.outputs(&v, &g);
    let x0 = &lti.e_cs * &v0;
    let n = prob.obs.n();
    let f = SampledSignal::zeros(grid, n);
    let eta = SampledSignal::zeros(grid, prob.obs.p());
    let rho = rho(prob, &x0, &f, &eta);
    Ok(NoiseRealization { x0, f, eta, rho, x })
}

/// Observer output from `s(0) = 0` under the measurement `y`.
pub fn run_observer(obsv: &Observer, y: &SampledSignal) -> Result<SampledSignal> {
    if y.dim() != obsv.b_o.ncols() {
        return Err(Error::dim("run_observer: measurement dimension", obsv.b_o.ncols(), y.dim()));
    }
    let s0 = Vector::zeros(obsv.a_o.nrows());
    let s = integrate_lti(&obsv.a_o, &obsv.b_o, &s0, y)?;
    Ok(SampledSignal::new_unchecked(y.grid.clone(), &obsv.c_o * s.values))
}

/// Traces of one estimation run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub y: SampledSignal,
    pub estimate: SampledSignal,
    pub true_value: SampledSignal,
    pub error: SampledSignal,
    pub final_sq_error: f64,
}

pub fn estimation_experiment(prob: &EstimationProblem, obsv: &Observer, realization: &NoiseRealization) -> Result<Experiment> {
    let x = &realization.x;
    let y_values = prob.obs.h() * &x.values + &realization.eta.values;
    let y = SampledSignal::new_unchecked(x.grid.clone(), y_values);
    let estimate = run_observer(obsv, &y)?;
    let functional = Mat::from_row_slice(1, prob.obs.n(), (prob.obs.f().transpose() * &prob.ell).as_slice());
    let true_value = SampledSignal::new_unchecked(x.grid.clone(), functional * &x.values);
    let error = SampledSignal::new_unchecked(x.grid.clone(), &true_value.values - &estimate.values);
    let last = error.values[(0, error.len() - 1)];
    Ok(Experiment { y, estimate, true_value, error, final_sq_error: last * last })
}

/// Largest `|s|` over the trailing `fraction` of the grid (scalar signals).
pub fn trailing_max_abs(s: &SampledSignal, fraction: f64) -> f64 {
    let n = s.len();
    let start = ((1.0 - fraction) * (n - 1) as f64).floor() as usize;
    s.values.columns(start, n - start).amax()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    Noisy,
    Clean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchConfig {
    pub horizon: f64,
    pub step: f64,
    pub runs: usize,
    pub seed: u64,
    pub mode: NoiseMode,
    pub exec: Execution,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub index: usize,
    pub rho: f64,
    pub initial_error: f64,
    pub final_sq_error: f64,
    pub trailing_max_error: f64,
}

/// Generator for run `index` of a seeded batch; independent of scheduling.
pub fn run_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Realization and traces of run `index` of a batch.
pub fn batch_run(
    prob: &EstimationProblem,
    obsv: &Observer,
    model: &PrimalModel,
    grid: &[f64],
    cfg: &BatchConfig,
    index: usize,
) -> Result<(NoiseRealization, Experiment)> {
    let mut rng = run_rng(cfg.seed, index);
    let realization = match cfg.mode {
        NoiseMode::Noisy => sample_admissible(prob, model, grid, &mut rng)?,
        NoiseMode::Clean => sample_clean(prob, model, grid, &mut rng)?,
    };
    let exp = estimation_experiment(prob, obsv, &realization)?;
    Ok((realization, exp))
}

pub fn monte_carlo(prob: &EstimationProblem, obsv: &Observer, model: &PrimalModel, cfg: &BatchConfig) -> Result<Vec<RunSummary>> {
    let grid = uniform_grid(cfg.horizon, cfg.step)?;
    map_indexed(cfg.runs, cfg.exec, |i| {
        let (realization, exp) = batch_run(prob, obsv, model, &grid, cfg, i)?;
        Ok(RunSummary {
            index: i,
            rho: realization.rho,
            initial_error: exp.error.values[(0, 0)].abs(),
            final_sq_error: exp.final_sq_error,
            trailing_max_error: trailing_max_abs(&exp.error, 0.1),
        })
    })
    .into_iter()
    .collect()
}

/// Exact zero-order-hold discretization of `v' = A v + B g` over one step
/// together with the exact running-cost weight over the step:
/// returns `(Φ, Γ, Q_d)` with `Q_d = ∫_0^h e^{A_z^T s} W e^{A_z s} ds`,
/// `A_z = [[A, B], [0, 0]]` and `W = [C D]^T S [C D]`.
pub fn discretize(lti: &AssociatedLti, s: &Mat, h: f64) -> (Mat, Mat, Mat) {
    let (n, k) = (lti.n_hat, lti.k);
    let nz = n + k;
    let mut az = Mat::zeros(nz, nz);
    az.view_mut((0, 0), (n, n)).copy_from(&lti.a_l);
    az.view_mut((0, n), (n, k)).copy_from(&lti.b_l);
    let cd = hstack(&[&lti.c_l, &lti.d_l]);
    let w = cd.transpose() * s * &cd;
    let mut big = Mat::zeros(2 * nz, 2 * nz);
    big.view_mut((0, 0), (nz, nz)).copy_from(&(-az.transpose() * h));
    big.view_mut((0, nz), (nz, nz)).copy_from(&(&w * h));
    big.view_mut((nz, nz), (nz, nz)).copy_from(&(&az * h));
    let ex = expm(&big);
    let f12 = block(&ex, 0, nz, nz, nz);
    let f22 = block(&ex, nz, nz, nz, nz);
    let qd = symmetrize(&(f22.transpose() * f12));
    (block(&f22, 0, 0, n, n), block(&f22, 0, n, n, k), qd)
}

/// Value matrix `P_0` of the discretized problem: the minimum over
/// piecewise-constant `g` of the finite-horizon cost is `v0^T P_0 v0`.
/// Computed by the backward Riccati recursion, which minimizes the same
/// quadratic exactly.
pub fn finite_horizon_value(lti: &AssociatedLti, s: &Mat, terminal: &Mat, t1: f64, n_steps: usize) -> Result<Mat> {
    if n_steps < 1 {
        return Err(Error::InvalidInput("n_steps must be positive".into()));
    }
    let (n, k) = (lti.n_hat, lti.k);
    let h = t1 / n_steps as f64;
    let (phi, gamma, qd) = discretize(lti, s, h);
    let qvv = block(&qd, 0, 0, n, n);
    let qgv = block(&qd, n, 0, k, n);
    let qgg = block(&qd, n, n, k, k);
    let mut p = symmetrize(terminal);
    for _ in 0..n_steps {
        let pg = &p * &gamma;
        let mgg = &qgg + gamma.transpose() * &pg;
        let mgv = &qgv + pg.transpose() * &phi;
        let mvv = &qvv + phi.transpose() * &p * &phi;
        p = if k == 0 {
            symmetrize(&mvv)
        } else {
            let gain = inv_spd(&mgg)? * &mgv;
            symmetrize(&(mvv - mgv.transpose() * gain))
        };
    }
    Ok(p)
}

/// Minimum over piecewise-constant `g` on `n_steps` equal steps of the cost
/// with running weight `diag(Q, R)` and terminal weight `(E C_s)^T Q0 (E C_s)`.
pub fn finite_horizon_infimum(lti: &AssociatedLti, w: &LqWeights, v0: &Vector, t1: f64, n_steps: usize) -> Result<f64> {
    if v0.len() != lti.n_hat {
        return Err(Error::dim("finite_horizon_infimum: v0", lti.n_hat, v0.len()));
    }
    let terminal = lti.e_cs.transpose() * &w.q0 * &lti.e_cs;
    let p = finite_horizon_value(lti, &w.s(), &terminal, t1, n_steps)?;
    Ok((v0.transpose() * p * v0)[(0, 0)])
}

/// Stacks `[x; u]` of a trajectory.
pub fn stack_state_input(x: &SampledSignal, u: &SampledSignal) -> SampledSignal {
    SampledSignal::new_unchecked(x.grid.clone(), vstack(&[&x.values, &u.values]))
}
