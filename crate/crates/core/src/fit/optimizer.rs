//! BFGS minimisation with a strong-Wolfe line search, followed by a short
//! Newton polish on a finite-difference Hessian of the analytic gradient.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSettings {
    pub max_iterations: usize,
    /// Relative objective change below which an iteration counts as stalled.
    pub rel_tol: f64,
    /// Gradient max-norm required for convergence.
    pub grad_tol: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            max_iterations: 500,
            rel_tol: 1e-10,
            grad_tol: 1e-6,
        }
    }
}

/// Objective returning `(f(x), ∇f(x))`. Non-finite values mark infeasible points.
pub trait Objective {
    fn eval(&mut self, x: &DVector<f64>) -> (f64, DVector<f64>);

    /// Checked after every accepted step; returning a message aborts the run.
    fn abort_reason(&mut self, _x: &DVector<f64>) -> Option<String> {
        None
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: DVector<f64>,
    pub f: f64,
    pub grad: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub diagnostic: Option<String>,
}

pub fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn rel_change(old: f64, new: f64) -> f64 {
    (old - new).abs() / old.abs().max(1.0)
}

struct Point {
    alpha: f64,
    x: DVector<f64>,
    f: f64,
    g: DVector<f64>,
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;

fn line_search<O: Objective>(
    obj: &mut O,
    x: &DVector<f64>,
    f0: f64,
    d: &DVector<f64>,
    dphi0: f64,
    alpha0: f64,
) -> Option<Point> {
    let mut eval = |alpha: f64| {
        let xn = x + d * alpha;
        let (f, g) = obj.eval(&xn);
        let f = if f.is_finite() && g.iter().all(|v| v.is_finite()) {
            f
        } else {
            f64::INFINITY
        };
        let dphi = g.dot(d);
        (Point { alpha, x: xn, f, g }, dphi)
    };

    let mut prev = (0.0, f0, dphi0);
    let mut best: Option<Point> = None;
    let mut alpha = alpha0;
    let mut bracket = None;
    for i in 0..40 {
        let (p, dphi) = eval(alpha);
        if p.f > f0 + C1 * alpha * dphi0 || (i > 0 && p.f >= prev.1) {
            bracket = Some(((prev.0, prev.1, prev.2), (alpha, p.f, dphi)));
            break;
        }
        if dphi.abs() <= -C2 * dphi0 {
            return Some(p);
        }
        if dphi >= 0.0 {
            bracket = Some(((alpha, p.f, dphi), (prev.0, prev.1, prev.2)));
            best = Some(p);
            break;
        }
        prev = (alpha, p.f, dphi);
        best = Some(p);
        alpha *= 2.0;
    }
    let Some((mut lo, mut hi)) = bracket else {
        return best;
    };

    for _ in 0..60 {
        let width = hi.0 - lo.0;
        if width.abs() < 1e-16 * lo.0.abs().max(1e-16) {
            break;
        }
        // Quadratic interpolation from (lo, dphi_lo, hi), safeguarded to the interior.
        let mut a = if hi.1.is_finite() {
            let denom = 2.0 * (hi.1 - lo.1 - lo.2 * width);
            if denom > 0.0 {
                lo.0 - lo.2 * width * width / denom
            } else {
                lo.0 + 0.5 * width
            }
        } else {
            lo.0 + 0.5 * width
        };
        let (min_a, max_a) = if width > 0.0 {
            (lo.0 + 0.1 * width, lo.0 + 0.9 * width)
        } else {
            (lo.0 + 0.9 * width, lo.0 + 0.1 * width)
        };
        if !a.is_finite() || a < min_a || a > max_a {
            a = lo.0 + 0.5 * width;
        }
        let (p, dphi) = eval(a);
        if p.f > f0 + C1 * a * dphi0 || p.f >= lo.1 {
            hi = (a, p.f, dphi);
        } else {
            if dphi.abs() <= -C2 * dphi0 {
                return Some(p);
            }
            if dphi * (hi.0 - lo.0) >= 0.0 {
                hi = lo;
            }
            lo = (a, p.f, dphi);
            best = Some(p);
        }
    }
    best.filter(|p| p.alpha > 0.0 && p.f < f0)
}

/// Central-difference Hessian of the gradient, step 1e-5·(1+|x_j|), symmetrised.
pub fn numerical_hessian<O: Objective>(obj: &mut O, x: &DVector<f64>) -> DMatrix<f64> {
    let p = x.len();
    let mut h = DMatrix::zeros(p, p);
    for j in 0..p {
        let step = 1e-5 * (1.0 + x[j].abs());
        let mut xp = x.clone();
        xp[j] += step;
        let mut xm = x.clone();
        xm[j] -= step;
        let (_, gp) = obj.eval(&xp);
        let (_, gm) = obj.eval(&xm);
        let col = (gp - gm) / (2.0 * step);
        h.set_column(j, &col);
    }
    (&h + h.transpose()) * 0.5
}

fn newton_direction(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = h.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut ridge = 0.0;
    for _ in 0..8 {
        let m = h + DMatrix::identity(h.nrows(), h.ncols()) * ridge;
        if let Some(chol) = m.cholesky() {
            return Some(-chol.solve(g));
        }
        ridge = if ridge == 0.0 { 1e-10 * scale } else { ridge * 100.0 };
    }
    None
}

pub fn minimize<O: Objective>(obj: &mut O, x0: DVector<f64>, settings: OptimizerSettings) -> Minimum {
    let n = x0.len();
    let (mut f, mut g) = obj.eval(&x0);
    let mut x = x0;
    if let Some(reason) = obj.abort_reason(&x) {
        return Minimum {
            x,
            f,
            grad: g,
            iterations: 0,
            converged: false,
            diagnostic: Some(reason),
        };
    }
    if !f.is_finite() {
        return Minimum {
            x,
            f,
            grad: g,
            iterations: 0,
            converged: false,
            diagnostic: Some("objective is not finite at the starting point".into()),
        };
    }
    let mut h_inv = DMatrix::<f64>::identity(n, n);
    let mut first = true;
    let mut iterations = 0;
    let mut last_rel = f64::INFINITY;
    let mut aborted: Option<String> = None;

    while iterations < settings.max_iterations {
        if max_abs(&g) <= settings.grad_tol * 1e-3
            || (max_abs(&g) <= settings.grad_tol && last_rel < settings.rel_tol)
        {
            break;
        }
        let mut d = -(&h_inv * &g);
        let mut dphi0 = g.dot(&d);
        if !(dphi0 < 0.0) {
            h_inv = DMatrix::identity(n, n);
            first = true;
            d = -g.clone();
            dphi0 = g.dot(&d);
        }
        let alpha0 = if first { 1.0 / g.norm().max(1.0) } else { 1.0 };
        let Some(p) = line_search(obj, &x, f, &d, dphi0, alpha0) else {
            if !first {
                // Retry once along steepest descent with a fresh Hessian.
                h_inv = DMatrix::identity(n, n);
                first = true;
                continue;
            }
            break;
        };
        iterations += 1;
        let s = &p.x - &x;
        let y = &p.g - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if first {
                h_inv = DMatrix::identity(n, n) * (sy / y.dot(&y));
            }
            let rho = 1.0 / sy;
            let hy = &h_inv * &y;
            let yhy = y.dot(&hy);
            // H⁺ = H − ρ(s·(Hy)ᵀ + (Hy)·sᵀ) + (ρ²·yᵀHy + ρ)·s·sᵀ
            h_inv -= (&s * hy.transpose() + &hy * s.transpose()) * rho;
            h_inv += (&s * s.transpose()) * (rho * rho * yhy + rho);
            first = false;
        }
        last_rel = rel_change(f, p.f);
        x = p.x;
        f = p.f;
        g = p.g;
        if let Some(reason) = obj.abort_reason(&x) {
            aborted = Some(reason);
            break;
        }
    }

    if aborted.is_none() {
        // Newton polish: quadratic convergence near the optimum tightens the
        // estimate well past the BFGS stopping point.
        for _ in 0..10 {
            if max_abs(&g) <= settings.grad_tol * 1e-3 && last_rel < settings.rel_tol {
                break;
            }
            let h = numerical_hessian(obj, &x);
            let Some(d) = newton_direction(&h, &g) else {
                break;
            };
            let slope = g.dot(&d);
            if !(slope < 0.0) {
                break;
            }
            let mut t = 1.0;
            let mut accepted = false;
            while t > 1e-6 {
                let xn = &x + &d * t;
                let (fn_, gn) = obj.eval(&xn);
                if fn_.is_finite() && fn_ <= f + C1 * t * slope.min(0.0) + 1e-12 * f.abs() {
                    if fn_ > f && max_abs(&gn) >= max_abs(&g) {
                        break;
                    }
                    last_rel = rel_change(f, fn_);
                    x = xn;
                    f = fn_;
                    g = gn;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
            iterations += 1;
            if let Some(reason) = obj.abort_reason(&x) {
                aborted = Some(reason);
                break;
            }
        }
    }

    // A start that is already stationary never records an objective change,
    // so a gradient far below tolerance counts on its own.
    let converged = aborted.is_none()
        && f.is_finite()
        && (max_abs(&g) <= settings.grad_tol * 1e-3
            || (max_abs(&g) <= settings.grad_tol && last_rel < settings.rel_tol));
    let diagnostic = aborted.or_else(|| {
        (!converged).then(|| {
            if iterations >= settings.max_iterations {
                format!("iteration limit {} reached", settings.max_iterations)
            } else {
                format!("optimizer stalled with gradient max-norm {:.3e}", max_abs(&g))
            }
        })
    });
    Minimum {
        x,
        f,
        grad: g,
        iterations,
        converged,
        diagnostic,
    }
}
