//! Output-nulling geometry of the auxiliary system
//! `p' = Ã p + G q`, `z = C̃ p + D̃ q`.
//!
//! The weakly observable subspace is the largest `V ⊆ R^r` admitting a
//! feedback `F̃` with `(Ã + G F̃) V ⊆ V` and `(C̃ + D̃ F̃) V = 0`. It is the
//! limit of the nonincreasing sequence
//!
//! ```text
//! V_0 = R^r,   V_{j+1} = { x : ∃q, Ã x + G q ∈ V_j, C̃ x + D̃ q = 0 },
//! ```
//!
//! which stabilizes after at most `r` steps.

use crate::dae::CanonicalForm;
use crate::error::{Error, Result};
use crate::linalg::{self, block, image_basis_scaled, kernel_basis_scaled, norm2, pseudoinverse, vstack, Mat, Subspace};

/// `V`, a friend `F̃` and the input matrix `L` with `Im L = ker D̃ ∩ G^{-1}(V)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputNullingData {
    pub v: Subspace,
    pub f_tilde: Mat,
    pub l: Mat,
    pub k: usize,
}

/// Residual norms of the defining identities, relative to the system scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullingDefects {
    /// `|(I - P_V)(Ã + G F̃) V|`
    pub invariance: f64,
    /// `|(C̃ + D̃ F̃) V|`
    pub output: f64,
    /// `|D̃ L| + |(I - P_V) G L|`
    pub input_kernel: f64,
}

impl NullingDefects {
    pub fn max(&self) -> f64 {
        self.invariance.max(self.output).max(self.input_kernel)
    }
}

/// Norm of the stacked auxiliary system `[[Ã, G], [C̃, D̃]]`, used as the
/// reference scale for every rank decision in this module.
pub fn system_scale(cf: &CanonicalForm) -> f64 {
    let top = linalg::hstack(&[&cf.a_tilde, &cf.g]);
    let bottom = linalg::hstack(&[&cf.c_tilde, &cf.d_tilde]);
    norm2(&vstack(&[&top, &bottom]))
}

fn one_step(cf: &CanonicalForm, v: &Subspace, rank_tol: f64, scale: f64) -> Subspace {
    let r = cf.r;
    let perp = v.complement_projector();
    let top = linalg::hstack(&[&(&perp * &cf.a_tilde), &(&perp * &cf.g)]);
    let bottom = linalg::hstack(&[&cf.c_tilde, &cf.d_tilde]);
    let ker = kernel_basis_scaled(&vstack(&[&top, &bottom]), rank_tol, scale);
    let states = block(ker.basis(), 0, 0, r, ker.dim());
    image_basis_scaled(&states, rank_tol, 1.0)
}

/// Dimensions of the iterates `V_0, V_1, …` up to and including the fixed point.
pub fn weakly_observable_sequence(cf: &CanonicalForm, rank_tol: f64) -> Vec<Subspace> {
    let scale = system_scale(cf);
    let mut seq = vec![Subspace::full(cf.r)];
    loop {
        let cur = seq.last().expect("sequence starts non-empty");
        let next = one_step(cf, cur, rank_tol, scale);
        let done = next.dim() >= cur.dim();
        if done {
            break;
        }
        seq.push(next);
    }
    seq
}

pub fn weakly_observable_subspace(cf: &CanonicalForm, rank_tol: f64) -> Subspace {
    weakly_observable_sequence(cf, rank_tol).pop().expect("sequence starts non-empty")
}

/// Minimum-norm friend: for each basis vector `v_i` of `V` the least-squares
/// solution `u_i` of `[(I - P_V) G; D̃] u = -[(I - P_V) Ã v_i; C̃ v_i]`, extended
/// by zero on the orthogonal complement of `V`.
pub fn friend(cf: &CanonicalForm, v: &Subspace, rank_tol: f64) -> Result<Mat> {
    let r = cf.r;
    if v.ambient_dim() != r {
        return Err(Error::dim("friend: V ambient dimension", r, v.ambient_dim()));
    }
    let q = cf.aux_inputs();
    if v.dim() == 0 {
        return Ok(Mat::zeros(q, r));
    }
    let perp = v.complement_projector();
    let lhs = vstack(&[&(&perp * &cf.g), &cf.d_tilde]);
    let rhs = -vstack(&[&(&perp * &cf.a_tilde * v.basis()), &(&cf.c_tilde * v.basis())]);
    let u = pseudoinverse(&lhs, rank_tol) * &rhs;
    let resid = (&lhs * &u - &rhs).norm();
    let scale = system_scale(cf).max(1.0);
    if resid > 1e-6 * scale {
        return Err(Error::Internal(format!(
            "no friend exists for the computed output-nulling subspace (residual {resid:.3e}); rank tolerance too loose or too tight"
        )));
    }
    Ok(u * v.basis().transpose())
}

/// Orthonormal `L` with `Im L = ker D̃ ∩ G^{-1}(V)`.
pub fn input_kernel_matrix(cf: &CanonicalForm, v: &Subspace, rank_tol: f64) -> Mat {
    let perp = v.complement_projector();
    let stacked = vstack(&[&cf.d_tilde, &(&perp * &cf.g)]);
    let scale = system_scale(cf);
    kernel_basis_scaled(&stacked, rank_tol, scale).basis().clone()
}

pub fn output_nulling(cf: &CanonicalForm, rank_tol: f64) -> Result<OutputNullingData> {
    let v = weakly_observable_subspace(cf, rank_tol);
    let f_tilde = friend(cf, &v, rank_tol)?;
    let l = input_kernel_matrix(cf, &v, rank_tol);
    let k = l.ncols();
    Ok(OutputNullingData { v, f_tilde, l, k })
}

impl OutputNullingData {
    pub fn defects(&self, cf: &CanonicalForm) -> NullingDefects {
        let scale = 1.0 + system_scale(cf);
        let perp = self.v.complement_projector();
        let closed = &cf.a_tilde + &cf.g * &self.f_tilde;
        let invariance = (&perp * closed * self.v.basis()).norm() / scale;
        let output = ((&cf.c_tilde + &cf.d_tilde * &self.f_tilde) * self.v.basis()).norm() / scale;
        let input_kernel = ((&cf.d_tilde * &self.l).norm() + (&perp * &cf.g * &self.l).norm()) / scale;
        NullingDefects { invariance, output, input_kernel }
    }
}
