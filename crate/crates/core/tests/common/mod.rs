//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls into the solvers under test: Riccati equations are
//! solved with the matrix sign function, finite-horizon problems as dense
//! quadratic programs, and subspaces are found by simulation.
#![allow(dead_code)]

use daeobs::dae::{CanonicalForm, DaeSystem, ObservedDae};
use daeobs::linalg::{Mat, Subspace, Vector};
use daeobs::observer::EstimationProblem;
use daeobs::random;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn m(r: usize, c: usize, d: &[f64]) -> Mat {
    Mat::from_row_slice(r, c, d)
}

pub fn v(d: &[f64]) -> Vector {
    Vector::from_column_slice(d)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + b.abs())
}

fn inv(a: &Mat) -> Mat {
    a.clone().try_inverse().expect("oracle: singular matrix")
}

/// DAE given in canonical coordinates and mixed by random invertible `S, T`:
/// `E = S^{-1} diag(I_r, 0) T^{-1}` and `[A22 B2]` of rank `rank_d`.
pub fn structured_dae(rng: &mut ChaCha8Rng, n: usize, m: usize, r: usize, rank_d: usize) -> DaeSystem {
    let q = n - r;
    let s_inv = random::invertible(rng, n);
    let t_inv = random::invertible(rng, n);
    let mut e0 = Mat::zeros(n, n);
    for i in 0..r {
        e0[(i, i)] = 1.0;
    }
    let top = random::normal_matrix(rng, r, n + m);
    let bottom = random::normal_matrix(rng, q, rank_d.min(q)) * random::normal_matrix(rng, rank_d.min(q), q + m);
    let mut a0 = Mat::zeros(n, n);
    let mut b0 = Mat::zeros(n, m);
    a0.view_mut((0, 0), (r, n)).copy_from(&top.columns(0, n));
    b0.view_mut((0, 0), (r, m)).copy_from(&top.columns(n, m));
    // bottom acts on [x1; x2; u]; keep the x1 part as a generic coupling
    let a21 = random::normal_matrix(rng, q, r);
    a0.view_mut((r, 0), (q, r)).copy_from(&a21);
    a0.view_mut((r, r), (q, q)).copy_from(&bottom.columns(0, q));
    b0.view_mut((r, 0), (q, m)).copy_from(&bottom.columns(q, m));
    DaeSystem::new(&s_inv * e0 * &t_inv, &s_inv * a0 * &t_inv, &s_inv * b0).unwrap()
}

/// Stabilizing solution of
/// `A^T X + X A - (X B + N) R^{-1} (B^T X + N^T) + Q = 0`
/// by the matrix sign function of the Hamiltonian.
pub fn care_sign(a: &Mat, b: &Mat, q: &Mat, r: &Mat, n_cross: &Mat) -> Mat {
    let n = a.nrows();
    if n == 0 {
        return Mat::zeros(0, 0);
    }
    let r_inv = inv(r);
    let a_bar = a - b * &r_inv * n_cross.transpose();
    let q_bar = q - n_cross * &r_inv * n_cross.transpose();
    let g = b * &r_inv * b.transpose();
    let mut h = Mat::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&a_bar);
    h.view_mut((0, n), (n, n)).copy_from(&(-&g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-&q_bar));
    h.view_mut((n, n), (n, n)).copy_from(&(-a_bar.transpose()));
    let mut z = h;
    for _ in 0..100 {
        let det = z.determinant().abs();
        let c = det.powf(-1.0 / (2.0 * n as f64));
        let zi = inv(&z);
        let next = (&z * c + zi / c) * 0.5;
        let done = (&next - &z).norm() <= 1e-14 * next.norm();
        z = next;
        if done {
            break;
        }
    }
    let w11 = z.view((0, 0), (n, n)).into_owned();
    let w12 = z.view((0, n), (n, n)).into_owned();
    let w21 = z.view((n, 0), (n, n)).into_owned();
    let w22 = z.view((n, n), (n, n)).into_owned();
    let id = Mat::identity(n, n);
    let mut lhs = Mat::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w12);
    lhs.view_mut((n, 0), (n, n)).copy_from(&(&w22 + &id));
    let mut rhs = Mat::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(-(&w11 + &id)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-w21));
    let x = lhs.svd(true, true).solve(&rhs, 1e-14).unwrap();
    (&x + x.transpose()) * 0.5
}

/// Cost data `(C^T S C, C^T S D, D^T S D)` of an output-weighted problem.
pub fn output_weights(c: &Mat, d: &Mat, s: &Mat) -> (Mat, Mat, Mat) {
    (c.transpose() * s * c, c.transpose() * s * d, d.transpose() * s * d)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` (five points).
fn gauss5() -> ([f64; 5], [f64; 5]) {
    let a = (5.0f64 - 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
    let b = (5.0f64 + 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
    let wa = (322.0 + 13.0 * 70.0f64.sqrt()) / 900.0;
    let wb = (322.0 - 13.0 * 70.0f64.sqrt()) / 900.0;
    ([-b, -a, 0.0, a, b], [wb, wa, 128.0 / 225.0, wa, wb])
}

/// Minimum of the discretized finite-horizon problem
/// `∫ |C v + D g|_S^2 + v(t1)^T W v(t1)` over `g` constant on `n_steps` equal
/// steps, written as one dense quadratic program in the stacked inputs.
/// Returns the value matrix `P_0`.
#[allow(clippy::too_many_arguments)]
pub fn dense_finite_horizon(a: &Mat, b: &Mat, c: &Mat, d: &Mat, s: &Mat, terminal: &Mat, t1: f64, n_steps: usize) -> Mat {
    let (n, k) = (a.nrows(), b.ncols());
    let nz = n + k;
    let h = t1 / n_steps as f64;
    let mut az = Mat::zeros(nz, nz);
    az.view_mut((0, 0), (n, n)).copy_from(a);
    az.view_mut((0, n), (n, k)).copy_from(b);
    let step = (&az * h).exp();
    let phi = step.view((0, 0), (n, n)).into_owned();
    let gam = step.view((0, n), (n, k)).into_owned();
    let cd = {
        let mut x = Mat::zeros(c.nrows(), nz);
        x.view_mut((0, 0), (c.nrows(), n)).copy_from(c);
        x.view_mut((0, n), (c.nrows(), k)).copy_from(d);
        x
    };
    let w = cd.transpose() * s * &cd;
    let (nodes, weights) = gauss5();
    let mut qd = Mat::zeros(nz, nz);
    let pieces = 8;
    let hp = h / pieces as f64;
    for piece in 0..pieces {
        for (x, wt) in nodes.iter().zip(weights) {
            let tau = piece as f64 * hp + 0.5 * hp * (x + 1.0);
            let e = (&az * tau).exp();
            qd += e.transpose() * &w * e * (0.5 * hp * wt);
        }
    }
    let nv = n_steps * k;
    // v_i = V_i v0 + G_i g
    let mut vi = Mat::identity(n, n);
    let mut gi = Mat::zeros(n, nv);
    let mut hess = Mat::zeros(nv, nv);
    let mut cross = Mat::zeros(nv, n);
    let mut constant = Mat::zeros(n, n);
    for i in 0..n_steps {
        let mut zv = Mat::zeros(nz, n);
        zv.view_mut((0, 0), (n, n)).copy_from(&vi);
        let mut zg = Mat::zeros(nz, nv);
        zg.view_mut((0, 0), (n, nv)).copy_from(&gi);
        for j in 0..k {
            zg[(n + j, i * k + j)] = 1.0;
        }
        hess += zg.transpose() * &qd * &zg;
        cross += zg.transpose() * &qd * &zv;
        constant += zv.transpose() * &qd * &zv;
        let mut sel = Mat::zeros(k, nv);
        for j in 0..k {
            sel[(j, i * k + j)] = 1.0;
        }
        gi = &phi * gi + &gam * sel;
        vi = &phi * vi;
    }
    hess += gi.transpose() * terminal * &gi;
    cross += gi.transpose() * terminal * &vi;
    constant += vi.transpose() * terminal * &vi;
    if nv == 0 {
        return (&constant + constant.transpose()) * 0.5;
    }
    let sol = hess.clone().cholesky().expect("oracle: Hessian not positive definite").solve(&cross);
    let p = constant - cross.transpose() * sol;
    (&p + p.transpose()) * 0.5
}

/// Minimizer and minimum of `(a - d)^T Q0^{-1} (a - d)` over `{d : F^T d = 0}`,
/// `a = F^{T+} z`, via the KKT system.
pub fn constrained_ls(f: &Mat, q0: &Mat, z: &Vector) -> (Vector, f64) {
    let n = f.nrows();
    let ft = f.transpose();
    let a = ft.clone().pseudo_inverse(1e-12).unwrap() * z;
    let w = inv(q0);
    // independent rows of F^T for the constraint
    let svd = ft.clone().svd(true, true);
    let rank = svd.singular_values.iter().filter(|&&s| s > 1e-10 * (1.0 + ft.norm())).count();
    let vt = svd.v_t.unwrap();
    let cons = vt.rows(0, rank).into_owned();
    let dim = n + rank;
    let mut kkt = Mat::zeros(dim, dim);
    kkt.view_mut((0, 0), (n, n)).copy_from(&(&w * 2.0));
    kkt.view_mut((0, n), (n, rank)).copy_from(&cons.transpose());
    kkt.view_mut((n, 0), (rank, n)).copy_from(&cons);
    let mut rhs = Vector::zeros(dim);
    rhs.rows_mut(0, n).copy_from(&(&w * &a * 2.0));
    let sol = kkt.lu().solve(&rhs).expect("oracle: singular KKT system");
    let d = sol.rows(0, n).into_owned();
    let diff = &a - &d;
    let val = (diff.transpose() * w * &diff)[(0, 0)];
    (d, val)
}

/// Classical RK4 for `x' = A x + B w(t)` with `w` evaluated exactly.
pub fn rk4_exact_input(a: &Mat, b: &Mat, x0: &Vector, t1: f64, steps: usize, w: impl Fn(f64) -> Vector) -> Vec<Vector> {
    let h = t1 / steps as f64;
    let mut x = x0.clone();
    let mut out = vec![x.clone()];
    for i in 0..steps {
        let t = i as f64 * h;
        let f = |t: f64, x: &Vector| a * x + b * w(t);
        let k1 = f(t, &x);
        let k2 = f(t + 0.5 * h, &(&x + &k1 * (0.5 * h)));
        let k3 = f(t + 0.5 * h, &(&x + &k2 * (0.5 * h)));
        let k4 = f(t + h, &(&x + &k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        out.push(x.clone());
    }
    out
}

fn legendre(deg: usize, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if deg == 0 {
        return p0;
    }
    for j in 1..deg {
        let p2 = ((2 * j + 1) as f64 * x * p1 - j as f64 * p0) / (j + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Simulation-based estimate of the largest output-nulling subspace of
/// `x' = Ã x + G w`, `y = C̃ x + D̃ w`.
///
/// For each initial state the output energy is minimized over inputs
/// spanned by Legendre polynomials (degree ≤ 20) and random sinusoids on
/// `[0, 1]`. The nulling states are the near-kernel of the resulting
/// quadratic form. Returns the subspace and the smallest eigenvalue that was
/// classified as nonzero (relative), for diagnostics.
pub fn nulling_subspace_by_simulation(cf: &CanonicalForm, seed: u64) -> (Subspace, f64) {
    let r = cf.r;
    let nw = cf.g.ncols();
    let q = cf.c_tilde.nrows();
    if r == 0 {
        return (Subspace::zero(0), f64::INFINITY);
    }
    if q == 0 {
        return (Subspace::full(r), f64::INFINITY);
    }
    let steps = 2000;
    let t1 = 1.0;
    let mut gen = rng(seed);
    let mut family: Vec<Box<dyn Fn(f64) -> f64>> = Vec::new();
    for deg in 0..=20 {
        family.push(Box::new(move |t| legendre(deg, 2.0 * t - 1.0)));
    }
    for _ in 0..6 {
        use rand::Rng;
        let om: f64 = gen.random_range(0.5..12.0);
        let ph: f64 = gen.random_range(0.0..std::f64::consts::TAU);
        family.push(Box::new(move |t| (om * t + ph).sin()));
    }
    let samples = steps + 1;
    let response = |x0: &Vector, w: &dyn Fn(f64) -> Vector| -> Vector {
        let xs = rk4_exact_input(&cf.a_tilde, &cf.g, x0, t1, steps, w);
        let mut y = Vector::zeros(q * samples);
        for (i, x) in xs.iter().enumerate() {
            let t = i as f64 * t1 / steps as f64;
            let yi = &cf.c_tilde * x + &cf.d_tilde * w(t);
            y.rows_mut(i * q, q).copy_from(&yi);
        }
        y
    };
    let zero_input = |_t: f64| Vector::zeros(nw);
    let mut y0 = Mat::zeros(q * samples, r);
    for j in 0..r {
        let mut e = Vector::zeros(r);
        e[j] = 1.0;
        y0.set_column(j, &response(&e, &zero_input));
    }
    let mut yw = Mat::zeros(q * samples, nw * family.len());
    let x_zero = Vector::zeros(r);
    let mut col = 0;
    for ch in 0..nw {
        for basis in &family {
            let input = |t: f64| {
                let mut w = Vector::zeros(nw);
                w[ch] = basis(t);
                w
            };
            yw.set_column(col, &response(&x_zero, &input));
            col += 1;
        }
    }
    // orthonormal basis of the reachable outputs
    let svd = yw.clone().svd(true, false);
    let smax = svd.singular_values.max();
    let u = svd.u.unwrap();
    let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > 1e-11 * smax).collect();
    let mut ub = Mat::zeros(q * samples, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        ub.set_column(c, &u.column(i));
    }
    let resid = &y0 - &ub * (ub.transpose() * &y0);
    let form = resid.transpose() * &resid;
    let form = (&form + form.transpose()) * 0.5;
    let scale = (y0.transpose() * &y0).norm().max(1e-300);
    let eig = form.symmetric_eigen();
    let mut kernel = Vec::new();
    let mut smallest_nonzero = f64::INFINITY;
    for i in 0..r {
        let lam = eig.eigenvalues[i] / scale;
        if lam <= 1e-8 {
            kernel.push(eig.eigenvectors.column(i).into_owned());
        } else {
            smallest_nonzero = smallest_nonzero.min(lam);
        }
    }
    let basis = if kernel.is_empty() { Mat::zeros(r, 0) } else { Mat::from_columns(&kernel) };
    (Subspace::from_orthonormal(basis), smallest_nonzero)
}

/// Worst central-difference defect of `d(Ex)/dt = Â x + B̂ u` over interior
/// samples, differencing with stride `stride` on a uniform grid of step `h`.
pub fn fd_defect(sys: &DaeSystem, x: &Mat, u: &Mat, h: f64, stride: usize, margin: usize) -> f64 {
    let ex = sys.e() * x;
    let mut worst: f64 = 0.0;
    let cols = x.ncols();
    for i in margin.max(stride)..cols - margin.max(stride) {
        let deriv = (ex.column(i + stride) - ex.column(i - stride)) / (2.0 * stride as f64 * h);
        let rhs = sys.a_hat() * x.column(i) + sys.b_hat() * u.column(i);
        worst = worst.max((deriv - rhs).norm());
    }
    worst
}

pub struct Fixture {
    pub name: &'static str,
    pub prob: EstimationProblem,
}

/// Estimation fixtures shared by the simulation-based tests.
pub fn estimation_fixtures() -> Vec<Fixture> {
    let mk = |name, f: Mat, a: Mat, h: Mat, q0: Mat, q: Mat, r: Mat, ell: Vector| Fixture {
        name,
        prob: EstimationProblem::new(ObservedDae::new(f, a, h).unwrap(), q0, q, r, ell).unwrap(),
    };
    let e1 = m(3, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    vec![
        mk(
            "classical",
            Mat::identity(3, 3),
            m(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.5, -1.0, -1.0]),
            m(1, 3, &[1.0, 0.0, 0.0]),
            Mat::from_diagonal(&v(&[1.0, 2.0, 1.0])),
            Mat::identity(3, 3),
            m(1, 1, &[2.0]),
            v(&[1.0, -0.5, 0.25]),
        ),
        mk(
            "rank_one",
            m(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            m(2, 2, &[-1.0, 1.0, 0.5, -2.0]),
            m(1, 2, &[0.0, 1.0]),
            Mat::identity(2, 2),
            Mat::identity(2, 2),
            m(1, 1, &[1.0]),
            v(&[1.0, 0.0]),
        ),
        mk(
            "nonregular",
            e1,
            m(3, 3, &[-1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0]),
            m(2, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0]),
            Mat::identity(3, 3),
            Mat::from_diagonal(&v(&[1.0, 2.0, 0.5])),
            Mat::identity(2, 2),
            v(&[1.0, 0.0, 0.0]),
        ),
        mk(
            "algebraic",
            Mat::zeros(2, 2),
            m(2, 2, &[1.0, 2.0, 0.0, 1.0]),
            m(1, 2, &[1.0, 0.0]),
            Mat::identity(2, 2),
            Mat::identity(2, 2),
            m(1, 1, &[1.0]),
            v(&[1.0, 1.0]),
        ),
    ]
}
