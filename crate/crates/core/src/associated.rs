//! The linear system whose outputs are exactly the (state, input) trajectories
//! of a DAE.
//!
//! With `V` an orthonormal basis of the weakly observable subspace, a friend
//! `F̃` and an input matrix `L`:
//!
//! ```text
//! A_l = V^T (Ã + G F̃) V      B_l = V^T G L
//! C_l = diag(T, I_m) [I_r; F̃] V
//! D_l = diag(T, I_m) [0; L]
//! ```
//!
//! Every solution of `d(Ex)/dt = Âx + B̂u` is `x = C_s v + D_s g`,
//! `u = C_inp v + D_inp g` for a trajectory of `v' = A_l v + B_l g` with
//! `v(0) = Λ E x(0)`, and conversely.

use crate::dae::{canonical_form, CanonicalForm, DaeSystem};
use crate::error::{Error, Result};
use crate::geometric::{output_nulling, OutputNullingData};
use crate::linalg::{
    block, block_diag, hstack, image_basis, numerical_rank, pseudoinverse, vstack, Mat, Subspace, Vector, DEFAULT_SUBSPACE_TOL,
};
use crate::simulate::{integrate_lti, SampledSignal};

/// Relative tolerance for the structural identities checked on every build.
pub const STRUCTURE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct AssociatedLti {
    pub a_l: Mat,
    pub b_l: Mat,
    pub c_l: Mat,
    pub d_l: Mat,
    pub c_s: Mat,
    pub c_inp: Mat,
    pub d_s: Mat,
    pub d_inp: Mat,
    /// `E C_s`
    pub e_cs: Mat,
    /// The consistency space `Im E C_s`.
    pub x_space: Subspace,
    /// `(E C_s)^+`
    pub lambda: Mat,
    pub n_hat: usize,
    pub k: usize,
}

/// Residuals of the structural identities, each relative to the input scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureDefects {
    /// `|E D_s|`
    pub e_ds: f64,
    /// `|Λ E C_s - I|`
    pub lambda_left_inverse: f64,
    /// `|(I - P_V) G L|`
    pub gl_in_v: f64,
    /// `rank(E C_s) - n̂`, zero when the rank is full.
    pub e_cs_rank_deficit: usize,
    /// `k - rank D_l`, zero when the rank is full.
    pub d_l_rank_deficit: usize,
}

/// Everything one construction produced, kept so two constructions of the
/// same DAE can be compared.
#[derive(Debug, Clone)]
pub struct Construction {
    pub cf: CanonicalForm,
    pub ond: OutputNullingData,
    pub lti: AssociatedLti,
}

/// State, input and LTI-state traces of one DAE solution.
#[derive(Debug, Clone)]
pub struct DaeTrajectory {
    pub x: SampledSignal,
    pub u: SampledSignal,
    pub v: SampledSignal,
}

/// Reference scale for the structural residuals.
pub fn structure_scale(sys: &DaeSystem, cf: &CanonicalForm) -> f64 {
    1.0 + sys.e().norm() * (1.0 + cf.t.norm())
}

pub fn build(sys: &DaeSystem, cf: &CanonicalForm, ond: &OutputNullingData) -> Result<AssociatedLti> {
    let (n, m, r) = (cf.n, cf.m, cf.r);
    let vb = ond.v.basis();
    let n_hat = vb.ncols();
    let k = ond.l.ncols();
    if vb.nrows() != r || ond.f_tilde.shape() != (n - r + m, r) || ond.l.nrows() != n - r + m {
        return Err(Error::dim(
            "associated LTI: output-nulling data",
            format!("V in R^{r}, F̃ {}x{r}", n - r + m),
            format!("V in R^{}, F̃ {:?}", vb.nrows(), ond.f_tilde.shape()),
        ));
    }

    let a_l = vb.transpose() * (&cf.a_tilde + &cf.g * &ond.f_tilde) * vb;
    let gl = &cf.g * &ond.l;
    let b_l = vb.transpose() * &gl;

    let lift = block_diag(&cf.t, &Mat::identity(m, m));
    let c_bar = &lift * vstack(&[&Mat::identity(r, r), &ond.f_tilde]);
    let c_l = c_bar * vb;
    let d_l = &lift * vstack(&[&Mat::zeros(r, k), &ond.l]);

    let c_s = block(&c_l, 0, 0, n, n_hat);
    let c_inp = block(&c_l, n, 0, m, n_hat);
    let d_s = block(&d_l, 0, 0, n, k);
    let d_inp = block(&d_l, n, 0, m, k);

    let e_cs = sys.e() * &c_s;
    let lambda = pseudoinverse(&e_cs, crate::linalg::DEFAULT_RANK_TOL);
    let x_space = image_basis(&e_cs, crate::linalg::DEFAULT_RANK_TOL);

    let lti = AssociatedLti { a_l, b_l, c_l, d_l, c_s, c_inp, d_s, d_inp, e_cs, x_space, lambda, n_hat, k };
    let defects = lti.structure_defects(sys, cf, ond);
    let scale = structure_scale(sys, cf);
    let tol = STRUCTURE_TOL * scale;
    if defects.gl_in_v > tol {
        return Err(Error::Internal(format!("G L is not contained in V (residual {:.3e})", defects.gl_in_v)));
    }
    if defects.e_ds > tol {
        return Err(Error::Internal(format!("E D_s = 0 violated (residual {:.3e})", defects.e_ds)));
    }
    if defects.e_cs_rank_deficit != 0 {
        return Err(Error::Internal(format!("rank E C_s = n̂ violated (deficit {})", defects.e_cs_rank_deficit)));
    }
    if defects.lambda_left_inverse > tol {
        return Err(Error::Internal(format!("Λ E C_s = I violated (residual {:.3e})", defects.lambda_left_inverse)));
    }
    if defects.d_l_rank_deficit != 0 {
        return Err(Error::Internal(format!("rank D_l = k violated (deficit {})", defects.d_l_rank_deficit)));
    }
    Ok(lti)
}

/// Canonical form, output-nulling data and associated LTI in one pass.
pub fn construct(sys: &DaeSystem, rank_tol: f64) -> Result<Construction> {
    let cf = canonical_form(sys, rank_tol)?;
    construct_from(sys, cf, rank_tol)
}

pub fn construct_from(sys: &DaeSystem, cf: CanonicalForm, rank_tol: f64) -> Result<Construction> {
    let ond = output_nulling(&cf, rank_tol)?;
    let lti = build(sys, &cf, &ond)?;
    Ok(Construction { cf, ond, lti })
}

impl AssociatedLti {
    pub fn n(&self) -> usize {
        self.c_s.nrows()
    }

    pub fn m(&self) -> usize {
        self.c_inp.nrows()
    }

    pub fn structure_defects(&self, sys: &DaeSystem, cf: &CanonicalForm, ond: &OutputNullingData) -> StructureDefects {
        let perp = ond.v.complement_projector();
        let e_ds = (sys.e() * &self.d_s).norm();
        let lambda_left_inverse = (&self.lambda * &self.e_cs - Mat::identity(self.n_hat, self.n_hat)).norm();
        let gl_in_v = (perp * &cf.g * &ond.l).norm();
        let rank_tol = crate::linalg::DEFAULT_RANK_TOL;
        let e_cs_rank_deficit = self.n_hat - numerical_rank(&self.e_cs, rank_tol).min(self.n_hat);
        let d_l_rank_deficit = self.k - numerical_rank(&self.d_l, rank_tol).min(self.k);
        StructureDefects { e_ds, lambda_left_inverse, gl_in_v, e_cs_rank_deficit, d_l_rank_deficit }
    }

    /// Whether `E x0` lies in the consistency space.
    pub fn is_consistent(&self, e: &Mat, x0: &Vector) -> Result<bool> {
        Ok(self.consistency_residual(e, x0)? <= DEFAULT_SUBSPACE_TOL * (1.0 + (e * x0).norm()))
    }

    /// Distance from `E x0` to the consistency space.
    pub fn consistency_residual(&self, e: &Mat, x0: &Vector) -> Result<f64> {
        let n = self.n();
        if e.shape() != (n, n) || x0.len() != n {
            return Err(Error::dim(
                "consistency check",
                format!("E {n}x{n}, x0 of length {n}"),
                format!("E {:?}, x0 of length {}", e.shape(), x0.len()),
            ));
        }
        Ok(self.x_space.residual(&(e * x0)))
    }

    /// Combines an LTI state trace with the free input into `(x, u)`.
    pub fn outputs(&self, v: &SampledSignal, g: &SampledSignal) -> (SampledSignal, SampledSignal) {
        let x = &self.c_s * &v.values + &self.d_s * &g.values;
        let u = &self.c_inp * &v.values + &self.d_inp * &g.values;
        (SampledSignal::new_unchecked(v.grid.clone(), x), SampledSignal::new_unchecked(v.grid.clone(), u))
    }

    /// Integrates the LTI from `v(0) = Λ E x0` under `g` and maps to `(x, u)`.
    pub fn output_trajectory(&self, e: &Mat, x0: &Vector, g: &SampledSignal) -> Result<DaeTrajectory> {
        if g.dim() != self.k {
            return Err(Error::dim("output_trajectory: free input g", self.k, g.dim()));
        }
        let resid = self.consistency_residual(e, x0)?;
        if resid > DEFAULT_SUBSPACE_TOL * (1.0 + (e * x0).norm()) {
            return Err(Error::Inconsistent { residual: resid });
        }
        let v0 = &self.lambda * (e * x0);
        let v = integrate_lti(&self.a_l, &self.b_l, &v0, g)?;
        let (x, u) = self.outputs(&v, g);
        Ok(DaeTrajectory { x, u, v })
    }

    /// The free input that reproduces a given solution `(x, u)`, together with
    /// the LTI state `v = Λ E x`.
    pub fn recover_input(&self, e: &Mat, x: &SampledSignal, u: &SampledSignal) -> (SampledSignal, SampledSignal) {
        let v = &self.lambda * e * &x.values;
        let stacked = vstack(&[&x.values, &u.values]);
        let rest = stacked - &self.c_l * &v;
        let g = pseudoinverse(&self.d_l, crate::linalg::DEFAULT_RANK_TOL) * rest;
        (SampledSignal::new_unchecked(x.grid.clone(), v), SampledSignal::new_unchecked(x.grid.clone(), g))
    }

    /// `[C_l, D_l]`, the map from `(v, g)` to `(x, u)`.
    pub fn output_map(&self) -> Mat {
        hstack(&[&self.c_l, &self.d_l])
    }
}
