//! Rank-aware dense linear algebra.
//!
//! Every rank decision in the crate goes through [`numerical_rank`] so that
//! one tolerance governs the whole construction: a singular value `s` counts
//! as nonzero when `s > rank_tol * s_max * max(rows, cols)`.

mod lyapunov;
mod schur;
mod subspace;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub use lyapunov::solve_continuous_lyapunov;
pub use schur::{ordered_real_schur, OrderedSchur};
pub use subspace::{contains, preimage, subspace_intersection, subspace_sum, Subspace, DEFAULT_SUBSPACE_TOL};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Default relative threshold for numerical rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Full singular value decomposition `M = U diag(s) V^T` with `U` (m x m),
/// `V` (n x n) and `s` sorted in descending order (length `min(m, n)`).
pub(crate) struct FullSvd {
    pub u: Mat,
    pub s: Vec<f64>,
    pub v: Mat,
}

pub(crate) fn full_svd(m: &Mat) -> FullSvd {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return FullSvd { u: Mat::identity(rows, rows), s: Vec::new(), v: Mat::identity(cols, cols) };
    }
    let (u_thin, sv, vt_thin) = accurate_svd(m);
    let kmin = rows.min(cols);

    let mut order: Vec<usize> = (0..kmin).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let mut u_sorted = Mat::zeros(rows, kmin);
    let mut v_sorted = Mat::zeros(cols, kmin);
    for (dst, &src) in order.iter().enumerate() {
        u_sorted.set_column(dst, &u_thin.column(src));
        v_sorted.set_column(dst, &vt_thin.row(src).transpose());
    }
    let s: Vec<f64> = order.iter().map(|&i| sv[i]).collect();

    // Singular vectors of exactly-zero singular values carry no information;
    // only the ones paired with nonzero values seed the completed bases.
    let smax = s.first().copied().unwrap_or(0.0);
    let keep = s.iter().filter(|&&x| x > f64::EPSILON * smax * rows.max(cols) as f64 && x > 0.0).count();
    let u = if rows == kmin && keep == kmin { u_sorted } else { complete_basis(&u_sorted, rows, keep) };
    let v = if cols == kmin && keep == kmin { v_sorted } else { complete_basis(&v_sorted, cols, keep) };
    FullSvd { u, s, v }
}

fn svd_parts(svd: nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>) -> (Mat, Vector, Mat) {
    (svd.u.expect("svd requested u"), svd.singular_values, svd.v_t.expect("svd requested v_t"))
}

/// Thin SVD `(U, s, V^T)` with a reconstruction check. The default
/// convergence test of the bidiagonal QR iteration occasionally stops early,
/// so a strict tolerance is tried first and the transpose is used as a fallback.
fn accurate_svd(m: &Mat) -> (Mat, Vector, Mat) {
    let tol = 64.0 * f64::EPSILON * (1.0 + m.norm()) * m.nrows().max(m.ncols()) as f64;
    let recon = |(u, s, vt): &(Mat, Vector, Mat), target: &Mat| (u * Mat::from_diagonal(s) * vt - target).norm();
    let mut best: Option<((Mat, Vector, Mat), f64)> = None;
    let mut consider = |cand: (Mat, Vector, Mat), err: f64| {
        if best.as_ref().is_none_or(|(_, e)| err < *e) {
            best = Some((cand, err));
        }
    };
    if let Some(svd) = m.clone().try_svd(true, true, 1e-20, 100_000) {
        let parts = svd_parts(svd);
        let err = recon(&parts, m);
        if err <= tol {
            return parts;
        }
        consider(parts, err);
    }
    let parts = svd_parts(m.clone().svd(true, true));
    let err = recon(&parts, m);
    if err <= tol {
        return parts;
    }
    consider(parts, err);
    let mt = m.transpose();
    let (u, s, vt) = svd_parts(mt.clone().svd(true, true));
    let parts_t = (vt.transpose(), s, u.transpose());
    let err = recon(&parts_t, m);
    if err <= tol {
        return parts_t;
    }
    consider(parts_t, err);
    let parts_j = jacobi_svd(m);
    let err = recon(&parts_j, m);
    consider(parts_j, err);
    best.expect("at least one candidate").0
}

/// One-sided Jacobi SVD, thin `(U, s, V^T)`. Columns of `U` paired with zero
/// singular values are zero.
fn jacobi_svd(m: &Mat) -> (Mat, Vector, Mat) {
    if m.nrows() < m.ncols() {
        let (u, s, vt) = jacobi_svd(&m.transpose());
        return (vt.transpose(), s, u.transpose());
    }
    let n = m.ncols();
    let mut a = m.clone();
    let mut v = Mat::identity(n, n);
    for _ in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dot(&a.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut a, &mut v] {
                    for i in 0..mat.nrows() {
                        let (xp, xq) = (mat[(i, p)], mat[(i, q)]);
                        mat[(i, p)] = c * xp - s * xq;
                        mat[(i, q)] = s * xp + c * xq;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let s = Vector::from_iterator(n, (0..n).map(|j| a.column(j).norm()));
    let mut u = Mat::zeros(m.nrows(), n);
    for j in 0..n {
        if s[j] > 0.0 {
            u.set_column(j, &(a.column(j) / s[j]));
        }
    }
    (u, s, v.transpose())
}

/// Keep the first `keep` columns (already orthonormal) and extend them to an
/// orthonormal basis of R^dim.
fn complete_basis(cols: &Mat, dim: usize, keep: usize) -> Mat {
    let keep = keep.min(dim);
    let head = cols.columns(0, keep).into_owned();
    let mut out = Mat::zeros(dim, dim);
    out.columns_mut(0, keep).copy_from(&head);
    for filled in keep..dim {
        let mut best = Vector::zeros(dim);
        let mut best_norm = -1.0;
        for e in 0..dim {
            let mut cand = Vector::zeros(dim);
            cand[e] = 1.0;
            for _ in 0..2 {
                for j in 0..filled {
                    let q = out.column(j).into_owned();
                    let proj = q.dot(&cand);
                    cand -= q * proj;
                }
            }
            let nrm = cand.norm();
            if nrm > best_norm {
                best_norm = nrm;
                best = cand;
            }
        }
        out.set_column(filled, &(best / best_norm));
    }
    out
}

/// Threshold below which singular values of `m` count as zero.
pub fn rank_threshold(singular_values: &[f64], rows: usize, cols: usize, rank_tol: f64) -> f64 {
    let smax = singular_values.first().copied().unwrap_or(0.0);
    rank_tol * smax * rows.max(cols) as f64
}

fn rank_from(s: &[f64], rows: usize, cols: usize, rank_tol: f64) -> usize {
    let thr = rank_threshold(s, rows, cols, rank_tol);
    s.iter().filter(|&&x| x > thr && x > 0.0).count()
}

pub fn numerical_rank(m: &Mat, rank_tol: f64) -> usize {
    let svd = full_svd(m);
    rank_from(&svd.s, m.nrows(), m.ncols(), rank_tol)
}

/// Moore-Penrose pseudoinverse with rank truncation.
pub fn pseudoinverse(m: &Mat, rank_tol: f64) -> Mat {
    let (rows, cols) = m.shape();
    let svd = full_svd(m);
    let rank = rank_from(&svd.s, rows, cols, rank_tol);
    let mut out = Mat::zeros(cols, rows);
    for i in 0..rank {
        let vi = svd.v.column(i);
        let ui = svd.u.column(i);
        out += (vi * ui.transpose()) / svd.s[i];
    }
    out
}

/// Orthonormal basis of `{x : M x = 0}`.
pub fn kernel_basis(m: &Mat, rank_tol: f64) -> Subspace {
    let (rows, cols) = m.shape();
    let svd = full_svd(m);
    let rank = rank_from(&svd.s, rows, cols, rank_tol);
    Subspace::from_orthonormal(svd.v.columns(rank, cols - rank).into_owned())
}

/// Kernel basis with the rank threshold measured against `scale` instead of
/// the largest singular value of `m`. Used when `m` is a residual whose own
/// size says nothing about the scale of the problem.
pub fn kernel_basis_scaled(m: &Mat, rank_tol: f64, scale: f64) -> Subspace {
    let (rows, cols) = m.shape();
    let svd = full_svd(m);
    let thr = rank_tol * scale.max(svd.s.first().copied().unwrap_or(0.0)) * rows.max(cols) as f64;
    let rank = svd.s.iter().filter(|&&x| x > thr && x > 0.0).count();
    Subspace::from_orthonormal(svd.v.columns(rank, cols - rank).into_owned())
}

/// Orthonormal basis of the column space of `M`.
pub fn image_basis(m: &Mat, rank_tol: f64) -> Subspace {
    let (rows, cols) = m.shape();
    let svd = full_svd(m);
    let rank = rank_from(&svd.s, rows, cols, rank_tol);
    Subspace::from_orthonormal(svd.u.columns(0, rank).into_owned())
}

/// Image basis with the rank threshold measured against `scale`.
pub fn image_basis_scaled(m: &Mat, rank_tol: f64, scale: f64) -> Subspace {
    let (rows, cols) = m.shape();
    let svd = full_svd(m);
    let thr = rank_tol * scale.max(svd.s.first().copied().unwrap_or(0.0)) * rows.max(cols) as f64;
    let rank = svd.s.iter().filter(|&&x| x > thr && x > 0.0).count();
    Subspace::from_orthonormal(svd.u.columns(0, rank).into_owned())
}

pub fn is_symmetric(m: &Mat, tol: f64) -> bool {
    m.is_square() && (m - m.transpose()).norm() <= tol * (1.0 + m.norm())
}

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_symmetric_eigenvalue(m: &Mat) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    SymmetricEigen::new(symmetrize(m)).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Checks `m` is symmetric and every eigenvalue exceeds `tol * max(1, |m|)`.
pub fn check_spd(m: &Mat, name: &str) -> Result<()> {
    if !m.is_square() || !is_symmetric(m, 1e-10) {
        return Err(Error::NotPositiveDefinite(name.to_string()));
    }
    let floor = 1e-12 * m.norm().max(1.0);
    if m.nrows() > 0 && min_symmetric_eigenvalue(m) <= floor {
        return Err(Error::NotPositiveDefinite(name.to_string()));
    }
    Ok(())
}

/// Checks `m` is symmetric positive semidefinite.
pub fn check_psd(m: &Mat, name: &str) -> Result<()> {
    if !m.is_square() || !is_symmetric(m, 1e-10) {
        return Err(Error::InvalidInput(format!("{name} must be symmetric positive semidefinite")));
    }
    let floor = -1e-10 * m.norm().max(1.0);
    if m.nrows() > 0 && min_symmetric_eigenvalue(m) < floor {
        return Err(Error::InvalidInput(format!("{name} must be symmetric positive semidefinite")));
    }
    Ok(())
}

/// `M^{-1/2}` for symmetric positive definite `M`.
pub fn inv_sqrt_spd(m: &Mat) -> Result<Mat> {
    if !m.is_square() {
        return Err(Error::dim("inv_sqrt_spd", "square", format!("{:?}", m.shape())));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    if !is_symmetric(m, 1e-10) {
        return Err(Error::Internal("input-weight block D^T S D is not symmetric".into()));
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let lmax = eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    let floor = 1e-13 * lmax.max(f64::MIN_POSITIVE);
    let mut d = Mat::zeros(n, n);
    for i in 0..n {
        let l = eig.eigenvalues[i];
        if l <= floor {
            return Err(Error::Internal(format!("input-weight block D^T S D is singular (eigenvalue {l:.3e})")));
        }
        d[(i, i)] = 1.0 / l.sqrt();
    }
    let q = &eig.eigenvectors;
    Ok(symmetrize(&(q * d * q.transpose())))
}

/// Inverse of a symmetric positive definite matrix via its eigendecomposition.
pub fn inv_spd(m: &Mat) -> Result<Mat> {
    let r = inv_sqrt_spd(m)?;
    Ok(symmetrize(&(&r * &r)))
}

/// Solve `A X = B`, returning an internal error when `A` is singular.
pub fn solve(a: &Mat, b: &Mat, what: &str) -> Result<Mat> {
    if a.nrows() == 0 {
        return Ok(Mat::zeros(0, b.ncols()));
    }
    a.clone().lu().solve(b).ok_or_else(|| Error::Internal(format!("{what} is singular")))
}

pub fn inverse(a: &Mat, what: &str) -> Result<Mat> {
    solve(a, &Mat::identity(a.nrows(), a.nrows()), what)
}

/// Eigenvalues of a general real matrix.
pub fn eigenvalues(a: &Mat) -> Vec<Complex64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let t = match schur::real_schur(a) {
        Ok((_, t)) => t,
        Err(_) => return vec![Complex64::new(f64::NAN, 0.0); a.nrows()],
    };
    let n = t.nrows();
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            let (p, q, r, s) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
            let mean = 0.5 * (p + s);
            let disc = Complex64::new(0.25 * (p - s) * (p - s) + q * r, 0.0).sqrt();
            out.push(mean + disc);
            out.push(mean - disc);
            i += 2;
        } else {
            out.push(Complex64::new(t[(i, i)], 0.0));
            i += 1;
        }
    }
    out
}

/// Largest real part over the spectrum; `-inf` for the empty matrix.
pub fn spectral_abscissa(a: &Mat) -> f64 {
    eigenvalues(a).iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Matrix exponential; handles the empty matrix.
pub fn expm(a: &Mat) -> Mat {
    if a.nrows() == 0 {
        return Mat::zeros(0, 0);
    }
    a.exp()
}

pub fn hstack(blocks: &[&Mat]) -> Mat {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        assert_eq!(b.nrows(), rows, "hstack row mismatch");
        out.view_mut((0, c), (rows, b.ncols())).copy_from(*b);
        c += b.ncols();
    }
    out
}

pub fn vstack(blocks: &[&Mat]) -> Mat {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vstack column mismatch");
        out.view_mut((r, 0), (b.nrows(), cols)).copy_from(*b);
        r += b.nrows();
    }
    out
}

pub fn block_diag(a: &Mat, b: &Mat) -> Mat {
    let mut out = Mat::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

/// Sub-block copy `m[r0..r0+nr, c0..c0+nc]`.
pub fn block(m: &Mat, r0: usize, c0: usize, nr: usize, nc: usize) -> Mat {
    m.view((r0, c0), (nr, nc)).into_owned()
}

pub fn all_finite(m: &Mat) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// Spectral norm; zero for empty matrices.
pub fn norm2(m: &Mat) -> f64 {
    full_svd(m).s.first().copied().unwrap_or(0.0)
}
