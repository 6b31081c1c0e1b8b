//! Minimax observers through the dual control problem.
//!
//! The dual DAE is `d(F^T z)/dt = A^T z - H^T u`. Its LQ problem with weights
//! `X = diag(Q^{-1}, R^{-1})` yields a controller `(A_c, B_c, C_x, C_u)`, and
//! the observer is
//!
//! ```text
//! s' = A_c^T s + C_u^T y,   s(0) = 0,   estimate = ℓ^T F B_c^T s
//! ```
//!
//! with worst-case asymptotic error `σ = ℓ^T F Λ^T P Λ F^T ℓ`. Everything
//! except the output row and `σ` is independent of `ℓ`, so one
//! [`DualSynthesis`] serves every functional.

use crate::associated::{construct, AssociatedLti, Construction};
use crate::dae::{dual_dae, DaeSystem, ObservedDae};
use crate::error::{Error, Result};
use crate::linalg::{
    block_diag, check_spd, expm, inv_spd, kernel_basis, pseudoinverse, symmetrize, Mat, Vector, DEFAULT_SUBSPACE_TOL,
};
use crate::lq::{assemble_controller, solve_are_weighted, DynamicController, RiccatiSolution, SolverOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationProblem {
    pub obs: ObservedDae,
    pub q0: Mat,
    pub q: Mat,
    pub r: Mat,
    pub ell: Vector,
}

impl EstimationProblem {
    /// Checks dimensions and `Q0, Q, R > 0`.
    pub fn new(obs: ObservedDae, q0: Mat, q: Mat, r: Mat, ell: Vector) -> Result<Self> {
        let (n, p) = (obs.n(), obs.p());
        if q0.shape() != (n, n) {
            return Err(Error::dim("estimation problem: Q0", format!("{n}x{n}"), format!("{}x{}", q0.nrows(), q0.ncols())));
        }
        if q.shape() != (n, n) {
            return Err(Error::dim("estimation problem: Q", format!("{n}x{n}"), format!("{}x{}", q.nrows(), q.ncols())));
        }
        if r.shape() != (p, p) {
            return Err(Error::dim("estimation problem: R", format!("{p}x{p}"), format!("{}x{}", r.nrows(), r.ncols())));
        }
        if ell.len() != n {
            return Err(Error::dim("estimation problem: ell", n, ell.len()));
        }
        check_spd(&q0, "Q0")?;
        check_spd(&q, "Q")?;
        check_spd(&r, "R")?;
        Ok(EstimationProblem { obs, q0, q, r, ell })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observer {
    pub a_o: Mat,
    pub b_o: Mat,
    /// `1 x n̂`
    pub c_o: Mat,
    pub sigma: f64,
    /// Dual Riccati solution.
    pub p: Mat,
    /// Dual gain.
    pub k: Mat,
    /// `(F^T C_s)^+` of the dual associated LTI.
    pub lambda: Mat,
    /// `Λ F^T ℓ`, the dual initial state.
    pub v0: Vector,
    /// `C_l - D_l K` of the dual, mapping the dual state to `(z, u)`.
    pub output_map: Mat,
    /// Terminal weight `(F^T C_s)^T Q̄0 (F^T C_s)` of the dual cost.
    pub terminal: Mat,
}

/// The `ℓ`-independent part of an observer synthesis.
#[derive(Debug, Clone)]
pub struct DualSynthesis {
    pub dual: DaeSystem,
    pub construction: Construction,
    pub riccati: RiccatiSolution,
    pub controller: DynamicController,
    pub q0_bar: Mat,
    pub f: Mat,
}

/// `Λ_opt = U (U^T Q0^{-1} U)^{-1} U^T Q0^{-1} F^{T+}` with `Im U = ker F^T`.
pub fn lambda_opt(f: &Mat, q0: &Mat) -> Result<Mat> {
    let n = f.nrows();
    if f.shape() != (n, n) || q0.shape() != (n, n) {
        return Err(Error::dim("lambda_opt", format!("F and Q0 {n}x{n}"), format!("F {:?}, Q0 {:?}", f.shape(), q0.shape())));
    }
    check_spd(q0, "Q0")?;
    let ft = f.transpose();
    let u = kernel_basis(&ft, crate::linalg::DEFAULT_RANK_TOL);
    if u.dim() == 0 {
        return Ok(Mat::zeros(n, n));
    }
    let u = u.basis();
    let q0_inv = inv_spd(q0)?;
    let inner = inv_spd(&symmetrize(&(u.transpose() * &q0_inv * u)))?;
    Ok(u * inner * u.transpose() * q0_inv * pseudoinverse(&ft, crate::linalg::DEFAULT_RANK_TOL))
}

/// `Q̄0 = (F^{T+} - Λ_opt)^T Q0^{-1} (F^{T+} - Λ_opt)`.
pub fn q0_bar(f: &Mat, q0: &Mat) -> Result<Mat> {
    let lam = lambda_opt(f, q0)?;
    let diff = pseudoinverse(&f.transpose(), crate::linalg::DEFAULT_RANK_TOL) - lam;
    Ok(symmetrize(&(diff.transpose() * inv_spd(q0)? * diff)))
}

/// Dual DAE, its associated LTI, the dual Riccati solution with weights
/// `diag(Q^{-1}, R^{-1})` and the dual controller.
pub fn synthesize_dual(obs: &ObservedDae, q0: &Mat, q: &Mat, r: &Mat, opts: &SolverOptions) -> Result<DualSynthesis> {
    let dual = dual_dae(obs);
    let construction = construct(&dual, opts.rank_tol)?;
    let x = block_diag(&inv_spd(q)?, &inv_spd(r)?);
    let riccati = solve_are_weighted(&construction.lti, &x, opts).map_err(|e| match e {
        Error::NotStabilizable(_) => Error::NotStabilizable("dual associated LTI".into()),
        other => other,
    })?;
    let controller = assemble_controller(&construction.lti, dual.e(), &riccati)?;
    Ok(DualSynthesis { q0_bar: q0_bar(obs.f(), q0)?, f: obs.f().clone(), dual, construction, riccati, controller })
}

impl DualSynthesis {
    pub fn lti(&self) -> &AssociatedLti {
        &self.construction.lti
    }

    /// Distance of `F^T ℓ` from the dual consistency space.
    pub fn estimability_residual(&self, ell: &Vector) -> Result<f64> {
        self.lti().consistency_residual(self.dual.e(), ell)
    }

    /// Observer for the functional `ℓ^T F x`.
    pub fn observer(&self, ell: &Vector) -> Result<Observer> {
        let n = self.f.nrows();
        if ell.len() != n {
            return Err(Error::dim("observer: ell", n, ell.len()));
        }
        let ft_ell = self.f.transpose() * ell;
        let residual = self.estimability_residual(ell)?;
        if residual > DEFAULT_SUBSPACE_TOL * (1.0 + ft_ell.norm()) {
            return Err(Error::NotEstimable { residual });
        }
        let lti = self.lti();
        let ctrl = &self.controller;
        let v0 = &lti.lambda * &ft_ell;
        let sigma = (v0.transpose() * &self.riccati.p * &v0)[(0, 0)];
        let output_map = &lti.c_l - &lti.d_l * &self.riccati.k;
        Ok(Observer {
            a_o: ctrl.a_c.transpose(),
            b_o: ctrl.c_u.transpose(),
            c_o: Mat::from_row_slice(1, lti.n_hat, (&ctrl.b_c * &ft_ell).as_slice()),
            sigma,
            p: self.riccati.p.clone(),
            k: self.riccati.k.clone(),
            lambda: lti.lambda.clone(),
            v0,
            output_map,
            terminal: symmetrize(&(lti.e_cs.transpose() * &self.q0_bar * &lti.e_cs)),
        })
    }
}

pub fn synthesize(prob: &EstimationProblem, opts: &SolverOptions) -> Result<Observer> {
    synthesize_dual(&prob.obs, &prob.q0, &prob.q, &prob.r, opts)?.observer(&prob.ell)
}

impl Observer {
    /// Dual closed-loop state at time `t`, `e^{A_c t} Λ F^T ℓ`.
    pub fn dual_state(&self, t: f64) -> Vector {
        expm(&(self.a_o.transpose() * t)) * &self.v0
    }

    /// Guaranteed bound on the squared error at time `t1` for noise with
    /// `ρ <= 1`: the dual cost of the stationary controller over `[0, t1]`,
    /// `σ - s^T P s + s^T W s` with `s` the dual state at `t1` and `W` the
    /// dual terminal weight. Tends to `σ` as `t1` grows.
    pub fn finite_horizon_bound(&self, t1: f64) -> f64 {
        let s = self.dual_state(t1);
        let tail = (s.transpose() * (&self.terminal - &self.p) * &s)[(0, 0)];
        self.sigma + tail
    }
}

/// `Û(t, s) = (C_l - D_l K) e^{A_c (t - s)} Λ F^T ℓ`, a vector of length
/// `n + p`; its last `p` entries weight the measurement `y(s)`.
pub fn observer_kernel(obsv: &Observer, t: f64, s: f64) -> Result<Vector> {
    if s > t {
        return Err(Error::InvalidInput(format!("observer kernel needs s <= t, got s = {s}, t = {t}")));
    }
    Ok(&obsv.output_map * obsv.dual_state(t - s))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(r: usize, c: usize, d: &[f64]) -> Mat {
        Mat::from_row_slice(r, c, d)
    }

    #[test]
    fn lambda_opt_examples() {
        let q0 = m(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        assert_eq!(lambda_opt(&Mat::identity(2, 2), &q0).unwrap().norm(), 0.0);
        assert!(lambda_opt(&Mat::zeros(2, 2), &q0).unwrap().norm() < 1e-15);
        let lam = lambda_opt(&m(2, 2, &[1.0, 0.0, 0.0, 0.0]), &Mat::identity(2, 2)).unwrap();
        assert!(lam.norm() < 1e-15);
    }

    #[test]
    fn q0_bar_examples() {
        let qb = q0_bar(&Mat::identity(2, 2), &Mat::identity(2, 2)).unwrap();
        assert!((qb - Mat::identity(2, 2)).norm() < 1e-14);
        assert!(q0_bar(&Mat::zeros(2, 2), &Mat::identity(2, 2)).unwrap().norm() < 1e-15);
        // F = e1 e1^T, Q0 = diag(2, 3): with w = F^T z, d in span{e2},
        // min over d of (w1 e1 - d)^T Q0^{-1} (w1 e1 - d) = w1^2 / 2.
        let qb = q0_bar(&m(2, 2, &[1.0, 0.0, 0.0, 0.0]), &m(2, 2, &[2.0, 0.0, 0.0, 3.0])).unwrap();
        assert!((qb - m(2, 2, &[0.5, 0.0, 0.0, 0.0])).norm() < 1e-14);
    }

    fn regular_problem(ell: Vector) -> EstimationProblem {
        let obs = ObservedDae::new(Mat::identity(2, 2), m(2, 2, &[-1.0, 1.0, 0.0, -2.0]), Mat::identity(2, 2)).unwrap();
        EstimationProblem::new(obs, Mat::identity(2, 2), Mat::identity(2, 2), Mat::identity(2, 2), ell).unwrap()
    }

    #[test]
    fn zero_functional() {
        let prob = regular_problem(Vector::zeros(2));
        let o = synthesize(&prob, &SolverOptions::default()).unwrap();
        assert_eq!(o.sigma, 0.0);
        assert_eq!(o.c_o.norm(), 0.0);
        assert_eq!(observer_kernel(&o, 1.0, 0.5).unwrap().norm(), 0.0);
    }

    #[test]
    fn regular_observer_is_stable() {
        let prob = regular_problem(Vector::from_vec(vec![1.0, 0.0]));
        let o = synthesize(&prob, &SolverOptions::default()).unwrap();
        assert!(o.sigma > 0.0);
        assert!(crate::linalg::spectral_abscissa(&o.a_o) < 0.0);
        let k0 = observer_kernel(&o, 2.0, 2.0).unwrap();
        assert!((k0 - &o.output_map * &o.v0).norm() < 1e-14);
        assert!(observer_kernel(&o, 1.0, 2.0).is_err());
    }

    #[test]
    fn rejects_bad_q0() {
        let obs = ObservedDae::new(Mat::identity(1, 1), m(1, 1, &[-1.0]), Mat::identity(1, 1)).unwrap();
        let err = EstimationProblem::new(obs, m(1, 1, &[-1.0]), m(1, 1, &[1.0]), m(1, 1, &[1.0]), Vector::zeros(1)).unwrap_err();
        assert_eq!(err.to_string(), "Q0 must be symmetric positive definite");
    }

    #[test]
    fn inestimable_functional_is_rejected() {
        // Dual DAE z1' = z2, 0 = z1 admits only F^T z = 0.
        let obs = ObservedDae::new(m(2, 2, &[1.0, 0.0, 0.0, 0.0]), m(2, 2, &[0.0, 1.0, 1.0, 0.0]), Mat::zeros(1, 2)).unwrap();
        let mk = |ell: Vec<f64>| {
            EstimationProblem::new(
                obs.clone(),
                Mat::identity(2, 2),
                Mat::identity(2, 2),
                Mat::identity(1, 1),
                Vector::from_vec(ell),
            )
            .unwrap()
        };
        let err = synthesize(&mk(vec![1.0, 0.0]), &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NotEstimable { .. }));
        let o = synthesize(&mk(vec![0.0, 1.0]), &SolverOptions::default()).unwrap();
        assert_eq!(o.sigma, 0.0);
    }
}
