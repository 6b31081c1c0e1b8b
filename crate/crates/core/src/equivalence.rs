//! Feedback equivalence between two associated LTIs of the same DAE.
//!
//! Two constructions differ by `(S_i, T_i, F̃_i, L_i, V_i)`. Writing
//!
//! ```text
//! T_2^{-1} T_1 = [[R11, 0], [R21, R22]]     S_2 S_1^{-1} = [[R11, H12], [0, H22]]
//! F̂ = [-R22^{-1} R21; 0]                    Û = diag(R22^{-1}, I_m)
//! ```
//!
//! the triple `T = R11`, `U = L_1^+ Û L_2`, `F = L_1^+ (F̂ + Û F̃_2 R11 - F̃_1)`
//! turns the first system into the second.

use crate::associated::{AssociatedLti, Construction};
use crate::error::{Error, Result};
use crate::linalg::{block, block_diag, image_basis, pseudoinverse, vstack, Mat, DEFAULT_RANK_TOL};

/// Relative tolerance for the structural zeros of `T_2^{-1} T_1` and `S_2 S_1^{-1}`.
pub const STRUCTURAL_TOL: f64 = 1e-8;

/// Residual norms of the six defining identities, in order:
///
/// 1. `T V_1 = V_2` (projector distance)
/// 2. `(A_1 + G_1 F̃_1 + G_1 L_1 F) V_1 ⊆ V_1`
/// 3. `T (A_1 + G_1 F̃_1 + G_1 L_1 F) = (A_2 + G_2 F̃_2) T` on `V_1`
/// 4. `T G_1 L_1 U = G_2 L_2`
/// 5. `diag(T_1, I) [0; L_1 U] = diag(T_2, I) [0; L_2]`
/// 6. `diag(T_1, I) [I; F̃_1 + L_1 F] = diag(T_2, I) [I; F̃_2] T` on `V_1`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquationDefects(pub [f64; 6]);

impl EquationDefects {
    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackEquivalence {
    /// `R11`, acting on the full `R^r`.
    pub t: Mat,
    /// `k x r`, acting on `R^r`.
    pub f: Mat,
    pub u: Mat,
    /// `T` in the LTI coordinates: `V_2^T R11 V_1`.
    pub t_lti: Mat,
    /// `F` in the LTI coordinates: `F V_1`.
    pub k_lti: Mat,
    /// Raw residual norms.
    pub defects: EquationDefects,
    /// Reference scale: each defect is compared against `tol * scale`.
    pub scale: f64,
}

impl FeedbackEquivalence {
    pub fn relative_defects(&self) -> EquationDefects {
        EquationDefects(self.defects.0.map(|d| d / self.scale))
    }
}

/// Residuals of the feedback-transformed first system against the second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceReport {
    /// `|T (A_1 + B_1 K) - A_2 T|`
    pub a: f64,
    /// `|T B_1 U - B_2|`
    pub b: f64,
    /// `|C_1 + D_1 K - C_2 T|`
    pub c: f64,
    /// `|D_1 U - D_2|`
    pub d: f64,
    pub scale: f64,
}

impl EquivalenceReport {
    pub fn max_relative(&self) -> f64 {
        self.a.max(self.b).max(self.c).max(self.d) / self.scale
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_relative() <= tol
    }
}

fn lift(t: &Mat, m: usize) -> Mat {
    block_diag(t, &Mat::identity(m, m))
}

pub fn build_equivalence(c1: &Construction, c2: &Construction) -> Result<FeedbackEquivalence> {
    let (cf1, cf2) = (&c1.cf, &c2.cf);
    let (n, r, m) = (cf1.n, cf1.r, cf1.m);
    if (cf2.n, cf2.r, cf2.m) != (n, r, m) {
        return Err(Error::InvalidInput(format!(
            "constructions disagree on (n, r, m): {:?} vs {:?}",
            (n, r, m),
            (cf2.n, cf2.r, cf2.m)
        )));
    }
    if c1.ond.k != c2.ond.k || c1.lti.n_hat != c2.lti.n_hat {
        return Err(Error::Internal(format!(
            "rank L_1 = rank L_2 violated: (k, n̂) = {:?} vs {:?}",
            (c1.ond.k, c1.lti.n_hat),
            (c2.ond.k, c2.lti.n_hat)
        )));
    }
    let q = n - r;
    let rm = &cf2.t_inv * &cf1.t;
    let hm = &cf2.s * &cf1.s_inv;
    let r11 = block(&rm, 0, 0, r, r);
    let r12 = block(&rm, 0, r, r, q);
    let r21 = block(&rm, r, 0, q, r);
    let r22 = block(&rm, r, r, q, q);
    let h11 = block(&hm, 0, 0, r, r);
    let h21 = block(&hm, r, 0, q, r);

    let zero_tol = STRUCTURAL_TOL * (1.0 + rm.norm() + hm.norm());
    let zero_defect = r12.norm().max(h21.norm()).max((&h11 - &r11).norm());
    if zero_defect > zero_tol {
        return Err(Error::Internal(format!(
            "block structure of T_2^-1 T_1 and S_2 S_1^-1 violated (residual {zero_defect:.3e}); the constructions do not come from the same DAE"
        )));
    }

    let r22_inv = crate::linalg::inverse(&r22, "R22")?;
    let f_hat = vstack(&[&(-(&r22_inv * &r21)), &Mat::zeros(m, r)]);
    let u_hat = block_diag(&r22_inv, &Mat::identity(m, m));
    let (l1, l2) = (&c1.ond.l, &c2.ond.l);
    let (f1, f2) = (&c1.ond.f_tilde, &c2.ond.f_tilde);
    let l1_pinv = pseudoinverse(l1, DEFAULT_RANK_TOL);

    let t = r11;
    let u = &l1_pinv * &u_hat * l2;
    let f = &l1_pinv * (&f_hat + &u_hat * f2 * &t - f1);

    let v1 = c1.ond.v.basis();
    let v2 = c2.ond.v.basis();
    let t_lti = v2.transpose() * &t * v1;
    let k_lti = &f * v1;
    let (defects, scale) = equation_defects(c1, c2, &t, &f, &u);
    Ok(FeedbackEquivalence { t, f, u, t_lti, k_lti, defects, scale })
}

/// Residuals of the six defining identities for a candidate triple
/// `(T, F, U)`, together with the reference scale.
pub fn equation_defects(c1: &Construction, c2: &Construction, t: &Mat, f: &Mat, u: &Mat) -> (EquationDefects, f64) {
    let (cf1, cf2) = (&c1.cf, &c2.cf);
    let (r, m) = (cf1.r, cf1.m);
    let (l1, l2) = (&c1.ond.l, &c2.ond.l);
    let (f1, f2) = (&c1.ond.f_tilde, &c2.ond.f_tilde);
    let v1 = c1.ond.v.basis();

    let m1 = &cf1.a_tilde + &cf1.g * f1 + &cf1.g * l1 * f;
    let m2 = &cf2.a_tilde + &cf2.g * f2;
    let tv1 = image_basis(&(t * v1), DEFAULT_RANK_TOL);
    let e1 = tv1.distance(&c2.ond.v).min(1e300);
    let e2 = (c1.ond.v.complement_projector() * &m1 * v1).norm();
    let e3 = (t * &m1 * v1 - &m2 * t * v1).norm();
    let e4 = (t * &cf1.g * l1 * u - &cf2.g * l2).norm();
    let zeros_k = Mat::zeros(r, l1.ncols());
    let e5 = (lift(&cf1.t, m) * vstack(&[&zeros_k, &(l1 * u)]) - lift(&cf2.t, m) * vstack(&[&zeros_k, l2])).norm();
    let id = Mat::identity(r, r);
    let lhs6 = lift(&cf1.t, m) * vstack(&[&id, &(f1 + l1 * f)]) * v1;
    let rhs6 = lift(&cf2.t, m) * vstack(&[&id, f2]) * t * v1;
    let e6 = (lhs6 - rhs6).norm();

    let scale = 1.0
        + (cf1.t.norm() + cf2.t.norm())
            * (1.0 + cf1.a_tilde.norm() + cf1.g.norm() + cf2.a_tilde.norm() + cf2.g.norm())
            * (1.0 + t.norm() + u.norm() + f.norm() + f1.norm() + f2.norm());
    (EquationDefects([e1, e2, e3, e4, e5, e6]), scale)
}

pub fn verify_equivalence(sys1: &AssociatedLti, sys2: &AssociatedLti, eq: &FeedbackEquivalence) -> EquivalenceReport {
    let (t, k, u) = (&eq.t_lti, &eq.k_lti, &eq.u);
    let a1k = &sys1.a_l + &sys1.b_l * k;
    let a = (t * a1k - &sys2.a_l * t).norm();
    let b = (t * &sys1.b_l * u - &sys2.b_l).norm();
    let c = (&sys1.c_l + &sys1.d_l * k - &sys2.c_l * t).norm();
    let d = (&sys1.d_l * u - &sys2.d_l).norm();
    let norms = [&sys1.a_l, &sys1.b_l, &sys1.c_l, &sys1.d_l, &sys2.a_l, &sys2.b_l, &sys2.c_l, &sys2.d_l]
        .iter()
        .map(|x| x.norm())
        .sum::<f64>();
    let scale = 1.0 + norms * (1.0 + t.norm() + k.norm() + u.norm());
    EquivalenceReport { a, b, c, d, scale }
}
