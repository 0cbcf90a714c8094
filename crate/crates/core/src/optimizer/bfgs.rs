//! Dense BFGS with a strong-Wolfe line search.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    pub max_iterations: usize,
    /// Stop when |∇f| < grad_rel_tol · |∇f(x₀)|.
    pub grad_rel_tol: f64,
    /// Stop when f decreased by less than this over `stall_window` iterations.
    pub f_tol: f64,
    pub stall_window: usize,
    /// Iterations before the stall test applies, so a fresh start can build curvature.
    pub min_iterations: usize,
    /// Upper bound on the step length |Δx| of one iteration.
    pub max_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            grad_rel_tol: 1e-9,
            f_tol: 1e-12,
            stall_window: 5,
            min_iterations: 20,
            max_step: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Gradient,
    Stalled,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub reason: StopReason,
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;

struct Probe {
    step: f64,
    f: f64,
    dphi: f64,
    grad: DVector<f64>,
}

fn probe<F>(f: &mut F, x: &DVector<f64>, dir: &DVector<f64>, step: f64) -> Probe
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let xt = x + dir * step;
    let (fv, g) = f(xt.as_slice());
    let grad = DVector::from_vec(g);
    Probe { step, f: fv, dphi: grad.dot(dir), grad }
}

/// Minimizer of the cubic through (a, fa, da) and (b, fb, db), clamped into
/// the interior of [a, b].
fn cubic_step(a: &Probe, b: &Probe) -> f64 {
    let (lo, hi) = if a.step < b.step { (a.step, b.step) } else { (b.step, a.step) };
    let d1 = a.dphi + b.dphi - 3.0 * (a.f - b.f) / (a.step - b.step);
    let disc = d1 * d1 - a.dphi * b.dphi;
    let mut t = f64::NAN;
    if disc >= 0.0 {
        let d2 = (b.step - a.step).signum() * disc.sqrt();
        t = b.step - (b.step - a.step) * (b.dphi + d2 - d1) / (b.dphi - a.dphi + 2.0 * d2);
    }
    let margin = 0.1 * (hi - lo);
    if !t.is_finite() || t < lo + margin || t > hi - margin {
        0.5 * (lo + hi)
    } else {
        t
    }
}

fn line_search<F>(
    f: &mut F,
    x: &DVector<f64>,
    f0: f64,
    g0: &DVector<f64>,
    dir: &DVector<f64>,
    first_step: f64,
    step_cap: f64,
) -> Option<Probe>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let d0 = g0.dot(dir);
    if d0 >= 0.0 {
        return None;
    }
    let origin = Probe { step: 0.0, f: f0, dphi: d0, grad: g0.clone() };
    let mut prev = origin;
    let mut step = first_step;
    for i in 0..40 {
        let cur = probe(f, x, dir, step);
        if !cur.f.is_finite() {
            step = 0.5 * (prev.step + step);
            continue;
        }
        if cur.f > f0 + C1 * step * d0 || (i > 0 && cur.f >= prev.f) {
            return zoom(f, x, f0, d0, dir, prev, cur);
        }
        if cur.dphi.abs() <= -C2 * d0 {
            return Some(cur);
        }
        if cur.dphi >= 0.0 {
            return zoom(f, x, f0, d0, dir, cur, prev);
        }
        if step >= step_cap {
            return Some(cur);
        }
        prev = cur;
        step = (step * 2.0).min(step_cap);
    }
    None
}

fn zoom<F>(
    f: &mut F,
    x: &DVector<f64>,
    f0: f64,
    d0: f64,
    dir: &DVector<f64>,
    mut lo: Probe,
    mut hi: Probe,
) -> Option<Probe>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    for _ in 0..60 {
        let step = cubic_step(&lo, &hi);
        if (hi.step - lo.step).abs() < 1e-16 * step.abs().max(1e-300) {
            break;
        }
        let cur = probe(f, x, dir, step);
        if cur.f > f0 + C1 * step * d0 || cur.f >= lo.f {
            hi = cur;
        } else {
            if cur.dphi.abs() <= -C2 * d0 {
                return Some(cur);
            }
            if cur.dphi * (hi.step - lo.step) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
    // Accept the best sufficient-decrease point found, if any.
    if lo.step > 0.0 && lo.f < f0 {
        Some(lo)
    } else {
        None
    }
}

/// Minimizes `f`, which returns the value and gradient at a point.
pub fn minimize<F>(mut f: F, x0: &[f64], opts: &BfgsOptions) -> BfgsOutcome
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let (mut fx, g) = f(x.as_slice());
    let mut g = DVector::from_vec(g);
    let g0_norm = g.norm();
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    let mut history = vec![fx];

    let finish = |x: DVector<f64>, fx, g: &DVector<f64>, it, reason| BfgsOutcome {
        x: x.as_slice().to_vec(),
        f: fx,
        grad_norm: g.norm(),
        iterations: it,
        reason,
    };

    if g0_norm == 0.0 {
        return finish(x, fx, &g, 0, StopReason::Gradient);
    }

    for it in 0..opts.max_iterations {
        if g.norm() < opts.grad_rel_tol * g0_norm {
            return finish(x, fx, &g, it, StopReason::Gradient);
        }
        let dir = -(&h * &g);
        let cap = opts.max_step / dir.norm();
        let first = if fresh { (1.0 / g.norm()).min(1.0) } else { 1.0 }.min(cap);
        let found = match line_search(&mut f, &x, fx, &g, &dir, first, cap) {
            Some(p) => Some((p, dir)),
            None if !fresh => {
                // Restart from steepest descent.
                h = DMatrix::identity(n, n);
                fresh = true;
                let dir = -g.clone();
                let cap = opts.max_step / g.norm();
                let first = (1.0 / g.norm()).min(1.0).min(cap);
                line_search(&mut f, &x, fx, &g, &dir, first, cap).map(|p| (p, dir))
            }
            None => None,
        };
        let Some((p, dir)) = found else {
            return finish(x, fx, &g, it, StopReason::LineSearchFailed);
        };

        let s = &dir * p.step;
        let y = &p.grad - &g;
        let sy = s.dot(&y);
        x += &s;
        fx = p.f;
        g = p.grad;

        if sy > 1e-300 {
            if fresh {
                h *= sy / y.dot(&y);
                fresh = false;
            }
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // H ← (I − ρsyᵀ)H(I − ρysᵀ) + ρssᵀ, expanded.
            h += (&s * s.transpose()) * (rho * rho * yhy + rho) - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }

        history.push(fx);
        let w = opts.stall_window;
        if it + 1 >= opts.min_iterations && history.len() > w && history[history.len() - 1 - w] - fx < opts.f_tol {
            return finish(x, fx, &g, it + 1, StopReason::Stalled);
        }
    }
    let it = opts.max_iterations;
    finish(x, fx, &g, it, StopReason::MaxIterations)
}
