//! Minimization of a convex Hermitian quadratic over a Euclidean ball:
//! `min s^H A s - 2 Re(s^H b)` subject to `‖s‖² ≤ r²`, with `A ⪰ 0`.
//!
//! The KKT conditions give `s(λ) = (A + λI)⁻¹ b` with a multiplier
//! `λ ≥ 0` found by bisection on `‖s(λ)‖²`. Two backends implement the
//! same contract: a dense eigendecomposition for moderate dimensions and
//! a matrix-free conjugate-gradient path for large ones.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Anything that can apply a Hermitian PSD operator to a vector.
pub trait HermitianApply: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, v: &DVector<Complex64>) -> DVector<Complex64>;
}

impl HermitianApply for DMatrix<Complex64> {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        self * v
    }
}

impl HermitianApply for crate::operators::SignalQuadratic {
    fn dim(&self) -> usize {
        self.dim()
    }
    fn apply(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        self.apply(v)
    }
}

#[derive(Debug, Clone)]
pub struct BallQpOptions {
    /// Relative tolerance of the bisection on `‖s‖² - r²`.
    pub bisection_tol: f64,
    /// Eigenvalues below `rank_threshold · λ_max` count as zero when the
    /// unconstrained candidate is formed.
    pub rank_threshold: f64,
    /// Asymmetry above `hermitian_tol · ‖A‖` rejects the input.
    pub hermitian_tol: f64,
    /// Relative residual target of the inner conjugate-gradient solves.
    pub cg_tol: f64,
    /// Iteration cap per conjugate-gradient solve; 0 picks `4·dim + 200`.
    pub cg_max_iter: usize,
}

impl Default for BallQpOptions {
    fn default() -> Self {
        Self {
            bisection_tol: 1e-10,
            rank_threshold: 1e-12,
            hermitian_tol: 1e-8,
            cg_tol: 1e-12,
            cg_max_iter: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BallQpReport {
    pub solution: DVector<Complex64>,
    /// KKT multiplier of the ball constraint.
    pub multiplier: f64,
    /// `‖(A + λI)s - b‖` at exit.
    pub kkt_residual: f64,
    pub on_boundary: bool,
    /// Total conjugate-gradient iterations (zero on the dense path).
    pub cg_iterations: usize,
}

/// Dense-path solver via Hermitian eigendecomposition.
pub fn solve_ball_qp(
    a: &DMatrix<Complex64>,
    b: &DVector<Complex64>,
    radius_sq: f64,
    opts: &BallQpOptions,
) -> Result<BallQpReport> {
    let dim = a.nrows();
    if a.ncols() != dim {
        return Err(Error::Dimension { what: "ball QP matrix", expected: dim, got: a.ncols() });
    }
    if b.len() != dim {
        return Err(Error::Dimension { what: "ball QP rhs", expected: dim, got: b.len() });
    }
    if !(radius_sq > 0.0) {
        return Err(Error::InvalidOptions(format!("radius² must be positive, got {radius_sq}")));
    }
    // reject clearly non-Hermitian input, then clean up rounding dust
    let mut asym = 0.0f64;
    for i in 0..dim {
        for j in i..dim {
            asym = asym.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    let scale = a.norm().max(1e-300);
    if asym > opts.hermitian_tol * scale {
        return Err(Error::NotHermitian { asymmetry: asym, tolerance: opts.hermitian_tol * scale });
    }
    let mut sym = a.clone();
    let ah = a.adjoint();
    sym += ah;
    sym.scale_mut(0.5);

    if b.norm() == 0.0 {
        return Ok(BallQpReport {
            solution: DVector::zeros(dim),
            multiplier: 0.0,
            kkt_residual: 0.0,
            on_boundary: false,
            cg_iterations: 0,
        });
    }

    let eig = sym.clone().symmetric_eigen();
    let lam_max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = opts.rank_threshold * lam_max;
    let bt = eig.eigenvectors.adjoint() * b;

    // unconstrained candidate on the numerical range of A
    let null_mass: f64 = (0..dim)
        .filter(|&i| eig.eigenvalues[i] <= cutoff)
        .map(|i| bt[i].norm_sqr())
        .sum();
    if null_mass.sqrt() <= 1e-12 * b.norm() {
        let mut st = bt.clone();
        for i in 0..dim {
            st[i] = if eig.eigenvalues[i] > cutoff {
                bt[i] / Complex64::new(eig.eigenvalues[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        let s0 = &eig.eigenvectors * st;
        if s0.norm_squared() <= radius_sq * (1.0 + 1e-12) {
            let residual = (&sym * &s0 - b).norm();
            return Ok(BallQpReport {
                solution: s0,
                multiplier: 0.0,
                kkt_residual: residual,
                on_boundary: false,
                cg_iterations: 0,
            });
        }
    }

    // boundary case: bisect the multiplier; eigenvalues are clamped at 0
    // so the shifted spectrum is strictly positive for λ > 0
    let lam: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    let norm_sq_at = |mu: f64| -> f64 {
        (0..dim).map(|i| bt[i].norm_sqr() / (lam[i] + mu).powi(2)).sum()
    };
    let hi = b.norm() / radius_sq.sqrt();
    let mut lo = 0.0f64;
    let mut hi_cur = hi;
    let mut mu = hi;
    if (norm_sq_at(hi) - radius_sq).abs() > opts.bisection_tol * radius_sq {
        for _ in 0..500 {
            mu = 0.5 * (lo + hi_cur);
            let nsq = norm_sq_at(mu);
            if (nsq - radius_sq).abs() <= opts.bisection_tol * radius_sq {
                break;
            }
            if nsq > radius_sq {
                lo = mu;
            } else {
                hi_cur = mu;
            }
        }
    }
    let mut st = bt.clone();
    for i in 0..dim {
        st[i] = bt[i] / Complex64::new(lam[i] + mu, 0.0);
    }
    let s = &eig.eigenvectors * st;
    let residual = {
        let mut r = &sym * &s - b;
        r.axpy(Complex64::new(mu, 0.0), &s, Complex64::new(1.0, 0.0));
        r.norm()
    };
    Ok(BallQpReport {
        solution: s,
        multiplier: mu,
        kkt_residual: residual,
        on_boundary: true,
        cg_iterations: 0,
    })
}

/// Matrix-free solver; every shifted system is solved by conjugate
/// gradients with warm starts across the bisection.
pub fn solve_ball_qp_operator(
    op: &dyn HermitianApply,
    b: &DVector<Complex64>,
    radius_sq: f64,
    opts: &BallQpOptions,
) -> Result<BallQpReport> {
    let dim = op.dim();
    if b.len() != dim {
        return Err(Error::Dimension { what: "ball QP rhs", expected: dim, got: b.len() });
    }
    if !(radius_sq > 0.0) {
        return Err(Error::InvalidOptions(format!("radius² must be positive, got {radius_sq}")));
    }
    if b.norm() == 0.0 {
        return Ok(BallQpReport {
            solution: DVector::zeros(dim),
            multiplier: 0.0,
            kkt_residual: 0.0,
            on_boundary: false,
            cg_iterations: 0,
        });
    }
    let max_iter = if opts.cg_max_iter == 0 { 4 * dim + 200 } else { opts.cg_max_iter };
    let tol_abs = opts.cg_tol * b.norm();
    let mut total_iters = 0usize;

    // unconstrained attempt, abandoned as soon as the iterates leave the
    // ball (they can only grow when the true solution is outside)
    let guard = (radius_sq * (1.0 + 1e-9)).sqrt();
    let zero_shift = |v: &DVector<Complex64>| op.apply(v);
    let (s0, it0, converged0, guarded0) =
        cg_solve(&zero_shift, b, DVector::zeros(dim), tol_abs, max_iter, Some(guard));
    total_iters += it0;
    if converged0 && !guarded0 && s0.norm_squared() <= radius_sq * (1.0 + 1e-9) {
        let residual = (op.apply(&s0) - b).norm();
        return Ok(BallQpReport {
            solution: s0,
            multiplier: 0.0,
            kkt_residual: residual,
            on_boundary: false,
            cg_iterations: total_iters,
        });
    }

    let hi = b.norm() / radius_sq.sqrt();
    let mut lo = 0.0f64;
    let mut hi_cur = hi;
    let mut mu = hi;
    let mut warm = DVector::<Complex64>::zeros(dim);
    let mut solution = warm.clone();
    for _ in 0..200 {
        let shifted = |v: &DVector<Complex64>| {
            let mut out = op.apply(v);
            out.axpy(Complex64::new(mu, 0.0), v, Complex64::new(1.0, 0.0));
            out
        };
        let (s, it, _, _) = cg_solve(&shifted, b, warm.clone(), tol_abs, max_iter, None);
        total_iters += it;
        warm = s.clone();
        solution = s;
        let nsq = solution.norm_squared();
        if (nsq - radius_sq).abs() <= opts.bisection_tol * radius_sq {
            break;
        }
        if nsq > radius_sq {
            lo = mu;
        } else {
            hi_cur = mu;
        }
        let next = 0.5 * (lo + hi_cur);
        if next == mu {
            break;
        }
        mu = next;
    }
    let residual = {
        let mut r = op.apply(&solution) - b;
        r.axpy(Complex64::new(mu, 0.0), &solution, Complex64::new(1.0, 0.0));
        r.norm()
    };
    Ok(BallQpReport {
        solution,
        multiplier: mu,
        kkt_residual: residual,
        on_boundary: true,
        cg_iterations: total_iters,
    })
}

/// Conjugate gradients for a Hermitian positive (semi)definite map.
/// Returns `(solution, iterations, converged, guard_tripped)`.
fn cg_solve(
    apply: &dyn Fn(&DVector<Complex64>) -> DVector<Complex64>,
    b: &DVector<Complex64>,
    x0: DVector<Complex64>,
    tol_abs: f64,
    max_iter: usize,
    norm_guard: Option<f64>,
) -> (DVector<Complex64>, usize, bool, bool) {
    let mut x = x0;
    let mut r = b - apply(&x);
    if r.norm() <= tol_abs {
        return (x, 0, true, false);
    }
    let mut p = r.clone();
    let mut rs = r.norm_squared();
    for it in 1..=max_iter {
        let ap = apply(&p);
        let denom = p.dotc(&ap).re;
        if denom <= 0.0 {
            // direction of zero curvature: the system is singular along p
            return (x, it, false, true);
        }
        let alpha = rs / denom;
        x.axpy(Complex64::new(alpha, 0.0), &p, Complex64::new(1.0, 0.0));
        r.axpy(Complex64::new(-alpha, 0.0), &ap, Complex64::new(1.0, 0.0));
        if let Some(guard) = norm_guard {
            if x.norm() > guard {
                return (x, it, false, true);
            }
        }
        let rs_new = r.norm_squared();
        if rs_new.sqrt() <= tol_abs {
            return (x, it, true, false);
        }
        let beta = rs_new / rs;
        rs = rs_new;
        let mut p_new = r.clone();
        p_new.axpy(Complex64::new(beta, 0.0), &p, Complex64::new(1.0, 0.0));
        p = p_new;
    }
    (x, max_iter, false, false)
}
