//! DAE systems `d(Ex)/dt = Â x + B̂ u` and their canonical block decomposition.

use crate::error::{Error, Result};
use crate::linalg::{self, block, full_svd, hstack, rank_threshold, Mat};

/// The matrix triple `(E, Â, B̂)` of `d(Ex)/dt = Â x + B̂ u`.
#[derive(Debug, Clone, PartialEq)]
pub struct DaeSystem {
    e: Mat,
    a_hat: Mat,
    b_hat: Mat,
}

impl DaeSystem {
    pub fn new(e: Mat, a_hat: Mat, b_hat: Mat) -> Result<Self> {
        let n = e.nrows();
        if !e.is_square() {
            return Err(Error::dim("DaeSystem E", format!("{n}x{n}"), format!("{:?}", e.shape())));
        }
        if a_hat.shape() != (n, n) {
            return Err(Error::dim("DaeSystem A_hat", format!("{n}x{n}"), format!("{:?}", a_hat.shape())));
        }
        if b_hat.nrows() != n {
            return Err(Error::dim("DaeSystem B_hat rows", n, b_hat.nrows()));
        }
        for (name, m) in [("E", &e), ("A_hat", &a_hat), ("B_hat", &b_hat)] {
            if !linalg::all_finite(m) {
                return Err(Error::InvalidInput(format!("{name} has non-finite entries")));
            }
        }
        Ok(DaeSystem { e, a_hat, b_hat })
    }

    pub fn e(&self) -> &Mat {
        &self.e
    }

    pub fn a_hat(&self) -> &Mat {
        &self.a_hat
    }

    pub fn b_hat(&self) -> &Mat {
        &self.b_hat
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.e.nrows()
    }

    /// Input dimension.
    pub fn m(&self) -> usize {
        self.b_hat.ncols()
    }
}

/// The observed DAE `d(Fx)/dt = A x + f`, `y = H x + η`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedDae {
    f: Mat,
    a: Mat,
    h: Mat,
}

impl ObservedDae {
    pub fn new(f: Mat, a: Mat, h: Mat) -> Result<Self> {
        let n = f.nrows();
        if !f.is_square() {
            return Err(Error::dim("ObservedDae F", format!("{n}x{n}"), format!("{:?}", f.shape())));
        }
        if a.shape() != (n, n) {
            return Err(Error::dim("ObservedDae A", format!("{n}x{n}"), format!("{:?}", a.shape())));
        }
        if h.ncols() != n {
            return Err(Error::dim("ObservedDae H columns", n, h.ncols()));
        }
        for (name, m) in [("F", &f), ("A", &a), ("H", &h)] {
            if !linalg::all_finite(m) {
                return Err(Error::InvalidInput(format!("{name} has non-finite entries")));
            }
        }
        Ok(ObservedDae { f, a, h })
    }

    pub fn f(&self) -> &Mat {
        &self.f
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn h(&self) -> &Mat {
        &self.h
    }

    pub fn n(&self) -> usize {
        self.f.nrows()
    }

    /// Output dimension.
    pub fn p(&self) -> usize {
        self.h.nrows()
    }

    /// The DAE driven by the model error: `(F, A, I)`.
    pub fn disturbed_system(&self) -> DaeSystem {
        let n = self.n();
        DaeSystem::new(self.f.clone(), self.a.clone(), Mat::identity(n, n)).expect("dimensions validated at construction")
    }

    /// The autonomous DAE `(F, A, [])`.
    pub fn autonomous_system(&self) -> DaeSystem {
        let n = self.n();
        DaeSystem::new(self.f.clone(), self.a.clone(), Mat::zeros(n, 0)).expect("dimensions validated at construction")
    }
}

/// Dual DAE `(F^T, A^T, -H^T)`.
pub fn dual_dae(obs: &ObservedDae) -> DaeSystem {
    DaeSystem::new(obs.f.transpose(), obs.a.transpose(), -obs.h.transpose())
        .expect("transposition preserves validated dimensions")
}

/// Block decomposition `S E T = diag(I_r, 0)` with the induced partitions of
/// `S Â T` and `S B̂`, and the auxiliary system `(Ã, G, C̃, D̃)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalForm {
    pub s: Mat,
    pub t: Mat,
    pub s_inv: Mat,
    pub t_inv: Mat,
    pub r: usize,
    pub n: usize,
    pub m: usize,
    pub a_tilde: Mat,
    pub a12: Mat,
    pub a21: Mat,
    pub a22: Mat,
    pub b1: Mat,
    pub b2: Mat,
    /// `[A12, B1]`
    pub g: Mat,
    /// `A21`
    pub c_tilde: Mat,
    /// `[A22, B2]`
    pub d_tilde: Mat,
}

impl CanonicalForm {
    /// Builds the partitions for a given pair `(S, T)`; checks `S E T = diag(I_r, 0)`.
    pub fn from_transforms(sys: &DaeSystem, s: Mat, t: Mat, r: usize) -> Result<Self> {
        let n = sys.n();
        let m = sys.m();
        if s.shape() != (n, n) || t.shape() != (n, n) || r > n {
            return Err(Error::dim(
                "CanonicalForm transforms",
                format!("{n}x{n}, r<={n}"),
                format!("{:?}/{:?}/{r}", s.shape(), t.shape()),
            ));
        }
        let s_inv = linalg::inverse(&s, "S")?;
        let t_inv = linalg::inverse(&t, "T")?;
        let mut target = Mat::zeros(n, n);
        for i in 0..r {
            target[(i, i)] = 1.0;
        }
        let defect = (&s * sys.e() * &t - &target).norm();
        let scale = 1.0 + sys.e().norm() * s.norm() * t.norm();
        if defect > 1e-9 * scale {
            return Err(Error::Internal(format!("S E T differs from diag(I_r, 0) by {defect:.3e}")));
        }
        let sat = &s * sys.a_hat() * &t;
        let sb = &s * sys.b_hat();
        let q = n - r;
        let a_tilde = block(&sat, 0, 0, r, r);
        let a12 = block(&sat, 0, r, r, q);
        let a21 = block(&sat, r, 0, q, r);
        let a22 = block(&sat, r, r, q, q);
        let b1 = block(&sb, 0, 0, r, m);
        let b2 = block(&sb, r, 0, q, m);
        let g = hstack(&[&a12, &b1]);
        let d_tilde = hstack(&[&a22, &b2]);
        let c_tilde = a21.clone();
        Ok(CanonicalForm { s, t, s_inv, t_inv, r, n, m, a_tilde, a12, a21, a22, b1, b2, g, c_tilde, d_tilde })
    }

    /// Dimension `n - r + m` of the auxiliary input `q = (q1, u)`.
    pub fn aux_inputs(&self) -> usize {
        self.n - self.r + self.m
    }

    /// `|S E T - diag(I_r, 0)|` for the system the form was built from.
    pub fn normalization_defect(&self, e: &Mat) -> f64 {
        let mut target = Mat::zeros(self.n, self.n);
        for i in 0..self.r {
            target[(i, i)] = 1.0;
        }
        (&self.s * e * &self.t - target).norm()
    }
}

/// SVD-based canonical form: with `E = U Σ V^T`, `S = diag(Σ_r^{-1}, I) U^T`
/// and `T = V`.
pub fn canonical_form(sys: &DaeSystem, rank_tol: f64) -> Result<CanonicalForm> {
    let n = sys.n();
    let svd = full_svd(sys.e());
    let thr = rank_threshold(&svd.s, n, n, rank_tol);
    let r = svd.s.iter().filter(|&&x| x > thr && x > 0.0).count();
    let mut scale = Mat::identity(n, n);
    for i in 0..r {
        scale[(i, i)] = 1.0 / svd.s[i];
    }
    let s = scale * svd.u.transpose();
    let t = svd.v;
    CanonicalForm::from_transforms(sys, s, t, r)
}
