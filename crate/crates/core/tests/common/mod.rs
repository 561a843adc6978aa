// Independent oracles shared by the integration tests and the acceptance
// runner. Nothing here calls into the closed-form kernel: every reference
// value is rebuilt from the spectral definition of the kernel space.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::Rng;
use satrecon::kernel::BandSpec;

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 48)
}

/// The kernel from its defining integral: the inverse Fourier transform of
/// the indicator of `±[ω0, ω1]`, which reduces to `(1/π) ∫ cos(ωt) dω`.
pub fn kernel_by_quadrature(band: &BandSpec, t: f64) -> f64 {
    adaptive_simpson(&|w: f64| (w * t).cos(), band.omega0(), band.omega1(), 1e-13) / PI
}

/// Gauss-Legendre nodes and weights on `[a, b]` via the Golub-Welsch
/// eigenvalue method.
pub fn gauss_legendre(q: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mut jacobi = DMatrix::<f64>::zeros(q, q);
    for k in 1..q {
        let kf = k as f64;
        let beta = kf / (4.0 * kf * kf - 1.0).sqrt();
        jacobi[(k, k - 1)] = beta;
        jacobi[(k - 1, k)] = beta;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..q)
        .map(|i| (eig.eigenvalues[i], 2.0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    pairs.into_iter().map(|(x, w)| (mid + half * x, half * w)).unzip()
}

/// Squared norm of the minimum-norm function of the band that passes through
/// `(t_i, y_i)`, computed without the kernel.
///
/// The band is discretized into Gauss-Legendre frequencies `ω_m`; a function
/// is `f(t) = Σ_m sqrt(w_m/π) (a_m cos ω_m t + b_m sin ω_m t)` and its norm is
/// the Euclidean norm of `(a, b)`. Interpolation is a set of linear equality
/// constraints `A x = y`, and the constrained minimum of `‖x‖²` comes from the
/// KKT system `[I Aᵀ; A 0] [x; λ] = [0; y]`.
pub fn min_norm_by_kkt(band: &BandSpec, nodes: &[f64], values: &[f64], q: usize) -> f64 {
    let (w, wt) = gauss_legendre(q, band.omega0(), band.omega1());
    let m = 2 * q;
    let k = nodes.len();
    let mut kkt = DMatrix::<f64>::zeros(m + k, m + k);
    for i in 0..m {
        kkt[(i, i)] = 1.0;
    }
    for (r, &t) in nodes.iter().enumerate() {
        for j in 0..q {
            let s = (wt[j] / PI).sqrt();
            let c = s * (w[j] * t).cos();
            let sn = s * (w[j] * t).sin();
            kkt[(m + r, j)] = c;
            kkt[(j, m + r)] = c;
            kkt[(m + r, q + j)] = sn;
            kkt[(q + j, m + r)] = sn;
        }
    }
    let mut rhs = DVector::<f64>::zeros(m + k);
    for (r, &y) in values.iter().enumerate() {
        rhs[m + r] = y;
    }
    let sol = kkt.lu().solve(&rhs).expect("KKT system is nonsingular");
    sol.rows(0, m).norm_squared()
}

pub fn random_band<R: Rng + ?Sized>(rng: &mut R) -> BandSpec {
    let lo = rng.random_range(0.0..PI / 4.0);
    let hi = rng.random_range(3.0 * PI / 4.0..PI);
    BandSpec::new(lo, hi).unwrap()
}

/// Up to `max` distinct sorted locations: a jittered grid with unit spacing,
/// shuffled and truncated, which is how sampling locations look in practice.
pub fn random_nodes<R: Rng + ?Sized>(rng: &mut R, max: usize) -> Vec<f64> {
    let count = rng.random_range(1..=max);
    let mut grid: Vec<f64> = (0..2 * max).map(|i| i as f64 + rng.random_range(-0.25..0.25)).collect();
    grid.shuffle(rng);
    grid.truncate(count);
    grid.sort_by(f64::total_cmp);
    grid
}

pub fn random_values<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Smallest `cᵀ G c` over expansions `Σ c_j φ(· − s_j)` on `centers` that
/// pass through `(t_i, y_i)`, from the KKT system `[G Aᵀ; A 0]`.
///
/// `G` is the Gram matrix of the centers and `A[i][j] = φ(t_i − s_j)`. When
/// the centers include every node, this minimum is the norm of the
/// minimum-norm interpolant.
pub fn min_norm_over_dictionary(band: &BandSpec, centers: &[f64], nodes: &[f64], values: &[f64]) -> f64 {
    let phi = |t: f64| satrecon::kernel::kernel_value(band, t);
    let m = centers.len();
    let k = nodes.len();
    let g = DMatrix::from_fn(m, m, |i, j| phi(centers[i] - centers[j]));
    let mut kkt = DMatrix::<f64>::zeros(m + k, m + k);
    kkt.view_mut((0, 0), (m, m)).copy_from(&g);
    for (r, &t) in nodes.iter().enumerate() {
        for (j, &s) in centers.iter().enumerate() {
            let a = phi(t - s);
            kkt[(m + r, j)] = a;
            kkt[(j, m + r)] = a;
        }
    }
    let mut rhs = DVector::<f64>::zeros(m + k);
    for (r, &y) in values.iter().enumerate() {
        rhs[m + r] = y;
    }
    let sol = kkt.lu().solve(&rhs).expect("KKT system is nonsingular");
    let c = sol.rows(0, m).into_owned();
    (c.transpose() * &g * &c)[(0, 0)]
}
