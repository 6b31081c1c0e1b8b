//! Infinite-horizon LQ control of the associated LTI and the dynamic
//! controller of the DAE.
//!
//! With `S = diag(Q, R)` and `N = D_l^T S D_l`, the value is `v0^T P v0` where
//! `P` is the stabilizing solution of
//!
//! ```text
//! P A_l + A_l^T P - K^T N K + C_l^T S C_l = 0,   K = N^{-1} (B_l^T P + D_l^T S C_l).
//! ```
//!
//! The cross term is removed by the feedback `F̂ = -N^{-1} D_l^T S C_l` and the
//! input scaling `U = -N^{-1/2}`, leaving a standard Riccati equation that is
//! solved through the ordered Schur form of its Hamiltonian and polished by
//! Newton–Kleinman steps.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::associated::AssociatedLti;
use crate::error::{Error, Result};
use crate::linalg::{
    self, block_diag, check_psd, check_spd, eigenvalues, hstack, inv_spd, inv_sqrt_spd, ordered_real_schur, solve,
    solve_continuous_lyapunov, spectral_abscissa, symmetrize, Mat, Vector, DEFAULT_RANK_TOL,
};
use crate::simulate::{integrate_lti, quadratic_energy, SampledSignal};

pub const DEFAULT_ARE_TOL: f64 = 1e-8;

/// Numerical tolerances shared by the synthesis pipelines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub rank_tol: f64,
    /// Bound on the Riccati residual relative to `1 + |P|`.
    pub are_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { rank_tol: DEFAULT_RANK_TOL, are_tol: DEFAULT_ARE_TOL }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LqWeights {
    pub q: Mat,
    pub r: Mat,
    pub q0: Mat,
}

impl LqWeights {
    /// Checks `Q > 0`, `R > 0`, `Q0 >= 0`.
    pub fn new(q: Mat, r: Mat, q0: Mat) -> Result<Self> {
        if !q.is_square() || !r.is_square() || q0.shape() != q.shape() {
            return Err(Error::dim(
                "LQ weights",
                "square Q, R and Q0 of the size of Q",
                format!("Q {:?}, R {:?}, Q0 {:?}", q.shape(), r.shape(), q0.shape()),
            ));
        }
        check_spd(&q, "Q")?;
        check_spd(&r, "R")?;
        check_psd(&q0, "Q0")?;
        Ok(LqWeights { q, r, q0 })
    }

    /// `S = diag(Q, R)`.
    pub fn s(&self) -> Mat {
        block_diag(&self.q, &self.r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub p: Mat,
    pub k: Mat,
    pub residual: f64,
    pub closed_loop_spectrum: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicController {
    pub a_c: Mat,
    pub b_c: Mat,
    pub c_x: Mat,
    pub c_u: Mat,
}

/// PBH test: `rank [A - λI, B] = n` for every eigenvalue with `Re λ >= 0`.
pub fn is_stabilizable(a: &Mat, b: &Mat) -> bool {
    let n = a.nrows();
    if n == 0 {
        return true;
    }
    let scale = 1.0 + linalg::norm2(a) + linalg::norm2(b);
    for lambda in eigenvalues(a) {
        if lambda.re < -1e-9 * scale {
            continue;
        }
        let mut m = DMatrix::<Complex64>::zeros(n, n + b.ncols());
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = Complex64::new(a[(i, j)], 0.0);
            }
            m[(i, i)] -= lambda;
            for j in 0..b.ncols() {
                m[(i, n + j)] = Complex64::new(b[(i, j)], 0.0);
            }
        }
        let sv =
            m.clone().try_svd(false, false, 1e-20, 100_000).map(|svd| svd.singular_values).unwrap_or_else(|| m.singular_values());
        let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
        if smin <= 1e-8 * scale {
            return false;
        }
    }
    true
}

/// `|P A + A^T P - K^T N K + C^T S C|`.
pub fn riccati_residual(lti: &AssociatedLti, s: &Mat, p: &Mat, k: &Mat) -> f64 {
    let n_mat = lti.d_l.transpose() * s * &lti.d_l;
    let res = p * &lti.a_l + lti.a_l.transpose() * p - k.transpose() * n_mat * k + lti.c_l.transpose() * s * &lti.c_l;
    res.norm()
}

fn gain(lti: &AssociatedLti, s: &Mat, n_inv: &Mat, p: &Mat) -> Mat {
    n_inv * (lti.b_l.transpose() * p + lti.d_l.transpose() * s * &lti.c_l)
}

/// One Newton–Kleinman step: the cost matrix of the closed loop under `k`.
fn kleinman_step(lti: &AssociatedLti, s: &Mat, k: &Mat) -> Result<Mat> {
    let acl = &lti.a_l - &lti.b_l * k;
    let ccl = &lti.c_l - &lti.d_l * k;
    solve_continuous_lyapunov(&acl, &(ccl.transpose() * s * ccl))
}

/// Stabilizing solution for the running weight `S` (any symmetric matrix with
/// `D_l^T S D_l > 0`).
pub fn solve_are_weighted(lti: &AssociatedLti, s: &Mat, opts: &SolverOptions) -> Result<RiccatiSolution> {
    let (n, k) = (lti.n_hat, lti.k);
    let nm = lti.c_l.nrows();
    if s.shape() != (nm, nm) {
        return Err(Error::dim("Riccati weight S", format!("{nm}x{nm}"), format!("{:?}", s.shape())));
    }
    if !is_stabilizable(&lti.a_l, &lti.b_l) {
        return Err(Error::NotStabilizable("associated LTI".into()));
    }
    if n == 0 {
        return Ok(RiccatiSolution { p: Mat::zeros(0, 0), k: Mat::zeros(k, 0), residual: 0.0, closed_loop_spectrum: Vec::new() });
    }
    let n_mat = symmetrize(&(lti.d_l.transpose() * s * &lti.d_l));
    let n_inv = if k == 0 { Mat::zeros(0, 0) } else { inv_spd(&n_mat)? };

    let mut p = if k == 0 {
        solve_continuous_lyapunov(&lti.a_l, &(lti.c_l.transpose() * s * &lti.c_l))?
    } else {
        let f_hat = -(&n_inv * lti.d_l.transpose() * s * &lti.c_l);
        let u = -inv_sqrt_spd(&n_mat)?;
        let a_bar = &lti.a_l + &lti.b_l * &f_hat;
        let b_bar = &lti.b_l * u;
        let c_bar = &lti.c_l + &lti.d_l * &f_hat;
        let q_bar = symmetrize(&(c_bar.transpose() * s * c_bar));
        let top = hstack(&[&a_bar, &(-(&b_bar * b_bar.transpose()))]);
        let bottom = hstack(&[&(-q_bar), &(-a_bar.transpose())]);
        let ham = linalg::vstack(&[&top, &bottom]);
        let schur = ordered_real_schur(&ham, |z| z.re < 0.0)?;
        if schur.n_selected != n {
            return Err(Error::Internal(format!(
                "Hamiltonian has {} stable eigenvalues, expected {n}: eigenvalues on the imaginary axis",
                schur.n_selected
            )));
        }
        let u1 = schur.q.view((0, 0), (n, n)).into_owned();
        let u2 = schur.q.view((n, 0), (n, n)).into_owned();
        let p = solve(&u1.transpose(), &u2.transpose(), "stable invariant subspace basis")?.transpose();
        symmetrize(&p)
    };

    let mut kk = gain(lti, s, &n_inv, &p);
    let mut residual = riccati_residual(lti, s, &p, &kk);
    if k > 0 {
        for _ in 0..6 {
            let tol = opts.are_tol * (1.0 + p.norm());
            if residual <= 0.01 * tol {
                break;
            }
            let Ok(p_next) = kleinman_step(lti, s, &kk) else { break };
            let k_next = gain(lti, s, &n_inv, &p_next);
            let r_next = riccati_residual(lti, s, &p_next, &k_next);
            if !(r_next < residual) {
                break;
            }
            p = p_next;
            kk = k_next;
            residual = r_next;
        }
    }

    let a_cl = &lti.a_l - &lti.b_l * &kk;
    let mut closed_loop_spectrum = eigenvalues(&a_cl);
    closed_loop_spectrum.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let abscissa = spectral_abscissa(&a_cl);
    if !(abscissa < 0.0) {
        return Err(Error::Internal(format!("closed loop not stable (spectral abscissa {abscissa:.3e})")));
    }
    if residual > opts.are_tol * (1.0 + p.norm()) {
        return Err(Error::Internal(format!("Riccati residual {residual:.3e} exceeds tolerance {:.1e}·(1 + |P|)", opts.are_tol)));
    }
    Ok(RiccatiSolution { p, k: kk, residual, closed_loop_spectrum })
}

pub fn solve_are(lti: &AssociatedLti, w: &LqWeights, opts: &SolverOptions) -> Result<RiccatiSolution> {
    if w.q.nrows() != lti.n() || w.r.nrows() != lti.m() {
        return Err(Error::dim(
            "LQ weights",
            format!("Q {0}x{0}, R {1}x{1}", lti.n(), lti.m()),
            format!("Q {:?}, R {:?}", w.q.shape(), w.r.shape()),
        ));
    }
    solve_are_weighted(lti, &w.s(), opts)
}

/// `A_c = A_l - B_l K`, `B_c = Λ`, `C_x = C_s - D_s K`, `C_u = C_inp - D_inp K`.
pub fn assemble_controller(lti: &AssociatedLti, e: &Mat, rs: &RiccatiSolution) -> Result<DynamicController> {
    let ctrl = DynamicController {
        a_c: &lti.a_l - &lti.b_l * &rs.k,
        b_c: lti.lambda.clone(),
        c_x: &lti.c_s - &lti.d_s * &rs.k,
        c_u: &lti.c_inp - &lti.d_inp * &rs.k,
    };
    let defect = ctrl.identity_defect(e);
    if defect > 1e-9 * (1.0 + e.norm() * (1.0 + rs.k.norm())) {
        return Err(Error::Internal(format!("B_c E C_x = I violated (residual {defect:.3e})")));
    }
    Ok(ctrl)
}

impl DynamicController {
    /// `|B_c E C_x - I|`.
    pub fn identity_defect(&self, e: &Mat) -> f64 {
        let r = self.a_c.nrows();
        (&self.b_c * e * &self.c_x - Mat::identity(r, r)).norm()
    }
}

/// `v0^T P v0`.
pub fn optimal_cost(rs: &RiccatiSolution, v0: &Vector) -> f64 {
    (v0.transpose() * &rs.p * v0)[(0, 0)]
}

/// Finite-horizon cost of the input `g` over its grid: running cost
/// `∫ [x; u]^T S [x; u]` plus `v(t1)^T (E C_s)^T Q0 (E C_s) v(t1)`.
pub fn evaluate_cost(lti: &AssociatedLti, w: &LqWeights, v0: &Vector, g: &SampledSignal) -> Result<f64> {
    if g.dim() != lti.k {
        return Err(Error::dim("evaluate_cost: free input g", lti.k, g.dim()));
    }
    if v0.len() != lti.n_hat {
        return Err(Error::dim("evaluate_cost: v0", lti.n_hat, v0.len()));
    }
    let v = integrate_lti(&lti.a_l, &lti.b_l, v0, g)?;
    let xu = SampledSignal { grid: g.grid.clone(), values: &lti.c_l * &v.values + &lti.d_l * &g.values };
    let terminal = &lti.e_cs * v.last();
    Ok(quadratic_energy(&xu, &w.s()) + (terminal.transpose() * &w.q0 * terminal)[(0, 0)])
}
