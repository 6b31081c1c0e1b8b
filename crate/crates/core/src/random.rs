//! Random test instances: DAEs, weights, and alternative constructions of the
//! associated LTI (different canonical forms, friends, input matrices and
//! subspace bases).

use rand::Rng;
use rand_distr::StandardNormal;

use crate::associated::{build, Construction};
use crate::dae::{canonical_form, CanonicalForm, DaeSystem};
use crate::error::Result;
use crate::geometric::{output_nulling, OutputNullingData};
use crate::linalg::{inverse, Mat, Subspace};

pub fn normal_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn orthogonal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Mat {
    if n == 0 {
        return Mat::zeros(0, 0);
    }
    let qr = normal_matrix(rng, n, n).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `U diag(s) V^T` with orthogonal `U, V` and singular values in `[lo, hi]`.
pub fn with_singular_values<R: Rng + ?Sized>(rng: &mut R, n: usize, rank: usize, lo: f64, hi: f64) -> Mat {
    let u = orthogonal(rng, n);
    let v = orthogonal(rng, n);
    let mut d = Mat::zeros(n, n);
    for i in 0..rank.min(n) {
        d[(i, i)] = rng.random_range(lo..=hi);
    }
    u * d * v.transpose()
}

/// Well-conditioned invertible matrix (singular values in `[0.5, 2]`).
pub fn invertible<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Mat {
    with_singular_values(rng, n, n, 0.5, 2.0)
}

/// Symmetric positive definite matrix with eigenvalues in `[lo, hi]`.
pub fn spd<R: Rng + ?Sized>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Mat {
    let q = orthogonal(rng, n);
    let d = Mat::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| rng.random_range(lo..=hi)));
    let m = &q * d * q.transpose();
    (&m + m.transpose()) * 0.5
}

/// DAE with `rank E = rank_e` (nonzero singular values in `[0.5, 2]`) and
/// standard normal `Â`, `B̂`.
pub fn dae<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize, rank_e: usize) -> DaeSystem {
    let e = with_singular_values(rng, n, rank_e, 0.5, 2.0);
    let a = normal_matrix(rng, n, n);
    let b = normal_matrix(rng, n, m);
    DaeSystem::new(e, a, b).expect("generated with consistent dimensions")
}

/// Another valid pair `(S', T') = (S_m S, T T_m)` with
/// `T_m = [[A, 0], [B, C]]` and `S_m = [[A^{-1}, X], [0, Z]]`.
pub fn randomize_canonical_form<R: Rng + ?Sized>(rng: &mut R, sys: &DaeSystem, cf: &CanonicalForm) -> Result<CanonicalForm> {
    let (n, r) = (cf.n, cf.r);
    let q = n - r;
    let a = invertible(rng, r);
    let a_inv = inverse(&a, "random block")?;
    let mut tm = Mat::zeros(n, n);
    tm.view_mut((0, 0), (r, r)).copy_from(&a);
    tm.view_mut((r, 0), (q, r)).copy_from(&(normal_matrix(rng, q, r) * 0.5));
    tm.view_mut((r, r), (q, q)).copy_from(&invertible(rng, q));
    let mut sm = Mat::zeros(n, n);
    sm.view_mut((0, 0), (r, r)).copy_from(&a_inv);
    sm.view_mut((0, r), (r, q)).copy_from(&(normal_matrix(rng, r, q) * 0.5));
    sm.view_mut((r, r), (q, q)).copy_from(&invertible(rng, q));
    CanonicalForm::from_transforms(sys, sm * &cf.s, &cf.t * tm, r)
}

/// Another valid `(V, F̃, L)`: rotated basis of `V`,
/// `F̃' = F̃ + L W V^T + Y (I - V V^T)`, and `L' = L M` with `M` invertible.
pub fn randomize_output_nulling<R: Rng + ?Sized>(rng: &mut R, ond: &OutputNullingData) -> OutputNullingData {
    let vb = ond.v.basis();
    let (r, nh) = vb.shape();
    let q = ond.f_tilde.nrows();
    let k = ond.k;
    let rotated = vb * orthogonal(rng, nh);
    let w = normal_matrix(rng, k, nh) * 0.5;
    let y = normal_matrix(rng, q, r) * 0.5;
    let off_v = Mat::identity(r, r) - vb * vb.transpose();
    let f_tilde = &ond.f_tilde + &ond.l * w * rotated.transpose() + y * off_v;
    let l = &ond.l * invertible(rng, k);
    OutputNullingData { v: Subspace::from_orthonormal(rotated), f_tilde, l, k }
}

/// A full construction with every free choice randomized.
pub fn random_construction<R: Rng + ?Sized>(rng: &mut R, sys: &DaeSystem, rank_tol: f64) -> Result<Construction> {
    let cf0 = canonical_form(sys, rank_tol)?;
    let cf = randomize_canonical_form(rng, sys, &cf0)?;
    let ond = randomize_output_nulling(rng, &output_nulling(&cf, rank_tol)?);
    let lti = build(sys, &cf, &ond)?;
    Ok(Construction { cf, ond, lti })
}
