//! Real Schur decomposition with eigenvalue reordering.
//!
//! Adjacent diagonal blocks are exchanged by the direct swapping method:
//! solve the small Sylvester equation `A11 X - X A22 = -A12`, then rotate the
//! pair with an orthogonal basis of `[X; I]`.

use num_complex::Complex64;

use super::{complete_basis, Mat};
use crate::error::{Error, Result};

/// `A = Q T Q^T` with `T` quasi-upper-triangular and the selected eigenvalues
/// occupying the leading `n_selected` diagonal positions.
#[derive(Debug, Clone)]
pub struct OrderedSchur {
    pub q: Mat,
    pub t: Mat,
    pub n_selected: usize,
}

#[derive(Debug, Clone, Copy)]
struct DiagBlock {
    start: usize,
    size: usize,
}

fn block_eigenvalue(t: &Mat, b: DiagBlock) -> Complex64 {
    let i = b.start;
    if b.size == 1 {
        Complex64::new(t[(i, i)], 0.0)
    } else {
        let (a, bb, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
        let tr = 0.5 * (a + d);
        let disc = 0.25 * (a - d) * (a - d) + bb * c;
        Complex64::new(tr, disc.min(0.0).abs().sqrt())
    }
}

fn apply_rotation(t: &mut Mat, q: &mut Mat, i: usize, g: &Mat) {
    let k = g.nrows();
    let n = t.nrows();
    let rows = t.view((i, 0), (k, n)).into_owned();
    t.view_mut((i, 0), (k, n)).copy_from(&(g.transpose() * rows));
    let cols = t.view((0, i), (n, k)).into_owned();
    t.view_mut((0, i), (n, k)).copy_from(&(cols * g));
    let qc = q.view((0, i), (n, k)).into_owned();
    q.view_mut((0, i), (n, k)).copy_from(&(qc * g));
}

/// Split a 2x2 diagonal block with real eigenvalues into two 1x1 blocks.
fn split_real_pair(t: &mut Mat, q: &mut Mat, i: usize) -> bool {
    let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
    let disc = 0.25 * (a - d) * (a - d) + b * c;
    if disc < 0.0 {
        return false;
    }
    let lambda = 0.5 * (a + d) + disc.sqrt().copysign(0.5 * (a + d));
    // Eigenvector of [[a, b], [c, d]] for lambda.
    let v1 = (b, lambda - a);
    let v2 = (lambda - d, c);
    let (x0, x1) = if v1.0.hypot(v1.1) >= v2.0.hypot(v2.1) { v1 } else { v2 };
    let nrm = x0.hypot(x1);
    if nrm == 0.0 {
        return false;
    }
    let (cs, sn) = (x0 / nrm, x1 / nrm);
    let g = Mat::from_row_slice(2, 2, &[cs, -sn, sn, cs]);
    apply_rotation(t, q, i, &g);
    t[(i + 1, i)] = 0.0;
    true
}

fn swap_blocks(t: &mut Mat, q: &mut Mat, i: usize, p: usize, r: usize) -> Result<()> {
    let a11 = t.view((i, i), (p, p)).into_owned();
    let a22 = t.view((i + p, i + p), (r, r)).into_owned();
    let a12 = t.view((i, i + p), (p, r)).into_owned();

    // (I_r ⊗ A11 - A22^T ⊗ I_p) vec X = -vec A12
    let m = p * r;
    let mut big = Mat::zeros(m, m);
    for b in 0..r {
        for a in 0..p {
            let row = b * p + a;
            for c in 0..p {
                big[(row, b * p + c)] += a11[(a, c)];
            }
            for c in 0..r {
                big[(row, c * p + a)] -= a22[(c, b)];
            }
        }
    }
    let rhs = Mat::from_iterator(m, 1, a12.iter().map(|x| -x));
    let x = big.lu().solve(&rhs).ok_or_else(|| Error::Internal("Schur block swap: blocks share an eigenvalue".into()))?;
    let x = Mat::from_iterator(p, r, x.iter().copied());

    let mut z = Mat::zeros(p + r, r);
    z.view_mut((0, 0), (p, r)).copy_from(&x);
    z.view_mut((p, 0), (r, r)).fill_with_identity();
    let thin = z.qr().q();
    let g = complete_basis(&thin, p + r, r);

    apply_rotation(t, q, i, &g);
    let scale = t.norm().max(1.0);
    let spill = t.view((i + r, i), (p, r)).norm();
    if spill > 1e-8 * scale {
        return Err(Error::Internal(format!("Schur block swap lost accuracy (residual {spill:.3e})")));
    }
    t.view_mut((i + r, i), (p, r)).fill(0.0);
    Ok(())
}

/// Real Schur form `(Q, T)` with `A = Q T Q^T`. The shifted QR iteration can
/// cycle on rare inputs; those are retried with a looser deflation test and
/// then on a fixed orthogonal similarity of `a`.
pub(crate) fn real_schur(a: &Mat) -> Result<(Mat, Mat)> {
    let n = a.nrows();
    let max_iter = 200 * n.max(10);
    let scale = a.norm().max(f64::MIN_POSITIVE);
    let accept = |q: &Mat, t: &Mat| (q * t * q.transpose() - a).norm() <= 1e3 * f64::EPSILON * scale * n as f64;
    for eps in [f64::EPSILON, 16.0 * f64::EPSILON] {
        if let Some(schur) = a.clone().try_schur(eps, max_iter) {
            let (q, t) = schur.unpack();
            if accept(&q, &t) {
                return Ok((q, t));
            }
        }
    }
    let rot = Mat::from_fn(n, n, |i, j| ((i + 2 * j + 1) as f64).sin()).qr().q();
    let rotated = rot.transpose() * a * &rot;
    if let Some(schur) = rotated.try_schur(f64::EPSILON, max_iter) {
        let (q, t) = schur.unpack();
        let q = &rot * q;
        if accept(&q, &t) {
            return Ok((q, t));
        }
    }
    Err(Error::Internal("real Schur iteration did not converge".into()))
}

/// Real Schur form of `a` with every eigenvalue satisfying `select` moved to
/// the leading diagonal positions.
pub fn ordered_real_schur(a: &Mat, select: impl Fn(Complex64) -> bool) -> Result<OrderedSchur> {
    let n = a.nrows();
    if n == 0 {
        return Ok(OrderedSchur { q: Mat::zeros(0, 0), t: Mat::zeros(0, 0), n_selected: 0 });
    }
    let (mut q, mut t) = real_schur(a)?;

    let small = f64::EPSILON * t.norm().max(f64::MIN_POSITIVE);
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)].abs() > small {
            if split_real_pair(&mut t, &mut q, i) {
                blocks.push(DiagBlock { start: i, size: 1 });
                blocks.push(DiagBlock { start: i + 1, size: 1 });
            } else {
                blocks.push(DiagBlock { start: i, size: 2 });
            }
            i += 2;
        } else {
            if i + 1 < n {
                t[(i + 1, i)] = 0.0;
            }
            blocks.push(DiagBlock { start: i, size: 1 });
            i += 1;
        }
    }
    for col in 0..n {
        for row in (col + 2).min(n)..n {
            t[(row, col)] = 0.0;
        }
    }

    let mut selected: Vec<bool> = blocks.iter().map(|&b| select(block_eigenvalue(&t, b))).collect();
    loop {
        let mut swapped = false;
        for j in 0..blocks.len().saturating_sub(1) {
            if !selected[j] && selected[j + 1] {
                let (p, r) = (blocks[j].size, blocks[j + 1].size);
                let start = blocks[j].start;
                swap_blocks(&mut t, &mut q, start, p, r)?;
                blocks[j] = DiagBlock { start, size: r };
                blocks[j + 1] = DiagBlock { start: start + r, size: p };
                selected.swap(j, j + 1);
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }
    let n_selected = blocks.iter().zip(&selected).filter(|(_, &s)| s).map(|(b, _)| b.size).sum();
    Ok(OrderedSchur { q, t, n_selected })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(a: &Mat, s: &OrderedSchur) {
        let n = a.nrows();
        assert!((&s.q * &s.t * s.q.transpose() - a).norm() < 1e-10 * a.norm().max(1.0));
        assert!((s.q.transpose() * &s.q - Mat::identity(n, n)).norm() < 1e-12);
    }

    #[test]
    fn moves_stable_eigenvalues_first() {
        let a = Mat::from_row_slice(4, 4, &[3.0, 1.0, 0.0, 2.0, 0.0, -1.0, 4.0, 1.0, 1.0, 0.0, 2.0, -3.0, 0.5, 2.0, 1.0, -2.0]);
        let s = ordered_real_schur(&a, |z| z.re < 0.0).unwrap();
        check(&a, &s);
        let stable = crate::linalg::eigenvalues(&a).iter().filter(|z| z.re < 0.0).count();
        assert_eq!(s.n_selected, stable);
        let lead = s.t.view((0, 0), (stable, stable)).into_owned();
        assert!(crate::linalg::eigenvalues(&lead).iter().all(|z| z.re < 0.0));
        let tail = s.t.view((stable, stable), (4 - stable, 4 - stable)).into_owned();
        assert!(crate::linalg::eigenvalues(&tail).iter().all(|z| z.re >= 0.0));
    }

    #[test]
    fn handles_complex_pairs() {
        // Eigenvalues 1 ± 2i, -1 ± 3i, -0.5.
        let a = Mat::from_row_slice(
            5,
            5,
            &[
                1.0, 2.0, 0.3, 0.0, 1.0, -2.0, 1.0, 0.0, 0.2, 0.0, 0.0, 0.0, -1.0, 3.0, 0.4, 0.0, 0.0, -3.0, -1.0, 0.0, 0.0, 0.0,
                0.0, 0.0, -0.5,
            ],
        );
        let s = ordered_real_schur(&a, |z| z.re < 0.0).unwrap();
        check(&a, &s);
        assert_eq!(s.n_selected, 3);
        let lead = s.t.view((0, 0), (3, 3)).into_owned();
        assert!(crate::linalg::eigenvalues(&lead).iter().all(|z| z.re < 0.0));
    }
}
