use super::{hstack, image_basis, kernel_basis, kernel_basis_scaled, norm2, vstack, Mat, Vector, DEFAULT_RANK_TOL};
use crate::error::{Error, Result};

/// Containment tolerance for subspaces with orthonormal bases.
pub const DEFAULT_SUBSPACE_TOL: f64 = 1e-8;

/// A linear subspace of R^ambient, stored by an orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: Mat,
    tol: f64,
}

impl Subspace {
    /// Wraps a matrix whose columns are already orthonormal.
    pub fn from_orthonormal(basis: Mat) -> Self {
        Subspace { basis, tol: DEFAULT_SUBSPACE_TOL }
    }

    /// Span of the columns of `m`.
    pub fn span(m: &Mat) -> Self {
        image_basis(m, DEFAULT_RANK_TOL)
    }

    pub fn full(ambient: usize) -> Self {
        Self::from_orthonormal(Mat::identity(ambient, ambient))
    }

    pub fn zero(ambient: usize) -> Self {
        Self::from_orthonormal(Mat::zeros(ambient, 0))
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn basis(&self) -> &Mat {
        &self.basis
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Orthogonal projector onto the subspace.
    pub fn projector(&self) -> Mat {
        &self.basis * self.basis.transpose()
    }

    /// Projector onto the orthogonal complement.
    pub fn complement_projector(&self) -> Mat {
        let n = self.ambient_dim();
        Mat::identity(n, n) - self.projector()
    }

    pub fn orthogonal_complement(&self) -> Subspace {
        kernel_basis(&self.basis.transpose(), DEFAULT_RANK_TOL).with_tol(self.tol)
    }

    /// Distance from `x` to the subspace.
    pub fn residual(&self, x: &Vector) -> f64 {
        (x - &self.basis * (self.basis.transpose() * x)).norm()
    }

    /// `|basis^T basis - I|`, zero for an exactly orthonormal basis.
    pub fn orthonormality_defect(&self) -> f64 {
        let k = self.dim();
        (self.basis.transpose() * &self.basis - Mat::identity(k, k)).norm()
    }

    /// Largest principal-angle sine between two subspaces of equal dimension;
    /// `+inf` when the dimensions differ.
    pub fn distance(&self, other: &Subspace) -> f64 {
        if self.ambient_dim() != other.ambient_dim() || self.dim() != other.dim() {
            return f64::INFINITY;
        }
        (self.projector() - other.projector()).norm()
    }
}

fn check_ambient(v: &Subspace, w: &Subspace, what: &'static str) -> Result<()> {
    if v.ambient_dim() != w.ambient_dim() {
        return Err(Error::dim(what, v.ambient_dim(), w.ambient_dim()));
    }
    Ok(())
}

pub fn subspace_sum(v: &Subspace, w: &Subspace) -> Result<Subspace> {
    check_ambient(v, w, "subspace_sum")?;
    Ok(image_basis(&hstack(&[v.basis(), w.basis()]), DEFAULT_RANK_TOL).with_tol(v.tol.max(w.tol)))
}

/// `V ∩ W` as the common kernel of both complement projectors.
pub fn subspace_intersection(v: &Subspace, w: &Subspace) -> Result<Subspace> {
    check_ambient(v, w, "subspace_intersection")?;
    let stacked = vstack(&[&v.complement_projector(), &w.complement_projector()]);
    Ok(kernel_basis_scaled(&stacked, DEFAULT_RANK_TOL, 1.0).with_tol(v.tol.max(w.tol)))
}

/// `{x : M x ∈ V}`.
pub fn preimage(m: &Mat, v: &Subspace) -> Result<Subspace> {
    if m.nrows() != v.ambient_dim() {
        return Err(Error::dim("preimage", v.ambient_dim(), m.nrows()));
    }
    let lhs = v.complement_projector() * m;
    Ok(kernel_basis_scaled(&lhs, DEFAULT_RANK_TOL, norm2(m)).with_tol(v.tol))
}

/// Whether `W ⊆ V` up to `V`'s tolerance.
pub fn contains(v: &Subspace, w: &Subspace) -> Result<bool> {
    check_ambient(v, w, "contains")?;
    if w.dim() == 0 {
        return Ok(true);
    }
    let resid = v.complement_projector() * w.basis();
    Ok(resid.norm() <= v.tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn e(n: usize, i: usize) -> Mat {
        let mut m = Mat::zeros(n, 1);
        m[(i, 0)] = 1.0;
        m
    }

    #[test]
    fn coordinate_planes_intersect_in_a_line() {
        let v = Subspace::span(&hstack(&[&e(3, 0), &e(3, 1)]));
        let w = Subspace::span(&hstack(&[&e(3, 1), &e(3, 2)]));
        let i = subspace_intersection(&v, &w).unwrap();
        assert_eq!(i.dim(), 1);
        assert!((i.basis()[(1, 0)].abs() - 1.0).abs() < 1e-12);
        assert_eq!(subspace_sum(&v, &w).unwrap().dim(), 3);
    }

    #[test]
    fn preimage_examples() {
        let v = Subspace::span(&e(3, 0));
        let p = preimage(&Mat::identity(3, 3), &v).unwrap();
        assert!(p.distance(&v) < 1e-12);
        let p = preimage(&Mat::zeros(3, 4), &v).unwrap();
        assert_eq!(p.dim(), 4);
        assert!(preimage(&Mat::zeros(2, 4), &v).is_err());
    }

    #[test]
    fn containment_examples() {
        let w = Subspace::span(&e(3, 0));
        assert!(contains(&Subspace::full(3), &w).unwrap());
        assert!(!contains(&Subspace::zero(3), &w).unwrap());
        assert!(contains(&w, &Subspace::zero(3)).unwrap());
        assert!(contains(&w, &Subspace::full(2)).is_err());
    }

    fn arb_matrix(rows: usize, max_cols: usize) -> impl Strategy<Value = Mat> {
        (0..=max_cols)
            .prop_flat_map(move |c| prop::collection::vec(-2.0f64..2.0, rows * c).prop_map(move |d| Mat::from_vec(rows, c, d)))
    }

    proptest! {
        #[test]
        fn modular_law(a in arb_matrix(5, 4), b in arb_matrix(5, 4)) {
            let v = Subspace::span(&a);
            let w = Subspace::span(&b);
            let s = subspace_sum(&v, &w).unwrap();
            let i = subspace_intersection(&v, &w).unwrap();
            prop_assert_eq!(s.dim() + i.dim(), v.dim() + w.dim());
        }

        #[test]
        fn containment_is_reflexive(a in arb_matrix(4, 4)) {
            let v = Subspace::span(&a);
            prop_assert!(contains(&v, &v).unwrap());
            prop_assert!(v.orthonormality_defect() < 1e-10);
        }

        #[test]
        fn kernel_is_annihilated(a in arb_matrix(3, 5)) {
            let k = kernel_basis(&a, DEFAULT_RANK_TOL);
            let scale = a.norm().max(1.0);
            prop_assert!((&a * k.basis()).norm() <= 1e-10 * scale);
        }

        #[test]
        fn preimage_of_own_image_is_everything(a in arb_matrix(4, 5)) {
            let im = image_basis(&a, DEFAULT_RANK_TOL);
            let pre = preimage(&a, &im).unwrap();
            prop_assert_eq!(pre.dim(), a.ncols());
        }
    }
}
