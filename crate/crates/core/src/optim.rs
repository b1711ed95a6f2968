//! Unconstrained minimizers used by the estimator.
//!
//! `bfgs` is a quasi-Newton method with a strong-Wolfe line search (bracketing
//! plus zoom with cubic interpolation). `nelder_mead` is the derivative-free
//! fallback. Objectives may return `+inf` to signal an invalid point.

pub(crate) struct Stopping {
    pub max_iterations: usize,
    pub rel_tol: f64,
    pub grad_tol: f64,
}

pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub f: f64,
    #[cfg_attr(not(test), allow(dead_code))]
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after every accepted step, starting point included.
    pub trace: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn axpy(x: &[f64], a: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(xi, di)| xi + a * di).collect()
}

struct Point {
    a: f64,
    f: f64,
    slope: f64,
    grad: Vec<f64>,
}

/// Minimizer of the cubic through two points with known slopes, kept inside
/// the safeguarded interval; falls back to bisection.
fn interpolate(lo: &Point, hi: &Point) -> f64 {
    let (a0, a1) = (lo.a, hi.a);
    let (left, right) = if a0 < a1 { (a0, a1) } else { (a1, a0) };
    let width = right - left;
    let mid = 0.5 * (a0 + a1);
    if !hi.f.is_finite() {
        return mid;
    }
    let d1 = lo.slope + hi.slope - 3.0 * (lo.f - hi.f) / (a0 - a1);
    let disc = d1 * d1 - lo.slope * hi.slope;
    if disc < 0.0 {
        return mid;
    }
    let d2 = (a1 - a0).signum() * disc.sqrt();
    let denom = hi.slope - lo.slope + 2.0 * d2;
    if denom == 0.0 {
        return mid;
    }
    let a = a1 - (a1 - a0) * (hi.slope + d2 - d1) / denom;
    if a.is_finite() && a > left + 0.1 * width && a < right - 0.1 * width {
        a
    } else {
        mid
    }
}

/// Strong-Wolfe line search along `dir`. Returns the accepted point.
fn line_search<F>(
    fg: &mut F,
    x: &[f64],
    f0: f64,
    g0: &[f64],
    dir: &[f64],
    a_init: f64,
) -> Option<(f64, f64, Vec<f64>)>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    const C1: f64 = 1e-4;
    const C2: f64 = 0.9;
    const MAX_EVALS: usize = 40;

    let slope0 = dot(g0, dir);
    if !(slope0 < 0.0) {
        return None;
    }
    let mut eval = |a: f64| -> Point {
        let (f, grad) = fg(&axpy(x, a, dir));
        let slope = if f.is_finite() { dot(&grad, dir) } else { f64::NAN };
        Point { a, f, slope, grad }
    };

    let mut prev = Point {
        a: 0.0,
        f: f0,
        slope: slope0,
        grad: g0.to_vec(),
    };
    let mut a = a_init;
    let mut evals = 0;
    // bracketing phase
    let (mut lo, mut hi) = loop {
        evals += 1;
        let cur = eval(a);
        if !cur.f.is_finite() || !cur.slope.is_finite() {
            // shrink back toward the last good point
            if evals >= MAX_EVALS {
                return None;
            }
            a = prev.a + 0.25 * (a - prev.a);
            continue;
        }
        if cur.f > f0 + C1 * a * slope0 || (evals > 1 && cur.f >= prev.f) {
            break (prev, cur);
        }
        if cur.slope.abs() <= -C2 * slope0 {
            return Some((cur.a, cur.f, cur.grad));
        }
        if cur.slope >= 0.0 {
            break (cur, prev);
        }
        if evals >= MAX_EVALS {
            return Some((cur.a, cur.f, cur.grad));
        }
        let next = 2.0 * a;
        prev = cur;
        a = next;
    };
    // zoom phase: lo satisfies sufficient decrease and has the lowest f
    while evals < MAX_EVALS {
        evals += 1;
        let a_new = interpolate(&lo, &hi);
        if (a_new - lo.a).abs() < 1e-16 * (1.0 + lo.a.abs()) {
            break;
        }
        let cur = eval(a_new);
        if !cur.f.is_finite() || cur.f > f0 + C1 * a_new * slope0 || cur.f >= lo.f {
            hi = cur;
        } else {
            if cur.slope.abs() <= -C2 * slope0 {
                return Some((cur.a, cur.f, cur.grad));
            }
            if cur.slope * (hi.a - lo.a) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
    // accept the best sufficient-decrease point if any progress was made
    if lo.a > 0.0 && lo.f < f0 {
        Some((lo.a, lo.f, lo.grad))
    } else {
        None
    }
}

pub(crate) fn bfgs<F>(mut fg: F, x0: &[f64], stop: &Stopping) -> Outcome
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut f, mut g) = fg(&x);
    let mut trace = vec![f];
    let identity = |scale: f64| -> Vec<f64> {
        let mut h = vec![0.0; n * n];
        for i in 0..n {
            h[i * n + i] = scale;
        }
        h
    };
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Outcome {
            x,
            f,
            grad: g,
            iterations: 0,
            converged: false,
            trace,
        };
    }
    if n == 0 || max_abs(&g) < stop.grad_tol {
        return Outcome {
            x,
            f,
            grad: g,
            iterations: 0,
            converged: true,
            trace,
        };
    }

    let mut h = identity(1.0);
    let mut fresh = true;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < stop.max_iterations {
        iterations += 1;
        let dir: Vec<f64> = (0..n)
            .map(|i| -(0..n).map(|j| h[i * n + j] * g[j]).sum::<f64>())
            .collect();
        let a_init = if fresh {
            (1.0 / dot(&g, &g).sqrt()).min(1.0)
        } else {
            1.0
        };
        let Some((a, f_new, g_new)) = line_search(&mut fg, &x, f, &g, &dir, a_init) else {
            if fresh {
                break;
            }
            // discard curvature information and retry along steepest descent
            h = identity(1.0);
            fresh = true;
            continue;
        };
        let s: Vec<f64> = dir.iter().map(|d| a * d).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let f_old = f;
        x = axpy(&x, 1.0, &s);
        f = f_new;
        g = g_new;
        trace.push(f);

        let small_change = (f_old - f).abs() <= stop.rel_tol * f.abs().max(1.0);
        if small_change && max_abs(&g) < stop.grad_tol {
            converged = true;
            break;
        }

        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if fresh {
                h = identity(sy / dot(&y, &y));
            }
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n)
                .map(|i| (0..n).map(|j| h[i * n + j] * y[j]).sum())
                .collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j])
                        + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
            fresh = false;
        }
    }
    if !converged && max_abs(&g) < stop.grad_tol {
        // stalled line search at a stationary point
        converged = true;
    }
    Outcome {
        x,
        f,
        grad: g,
        iterations,
        converged,
        trace,
    }
}

/// Nelder-Mead simplex minimization. Returns the best vertex and the number
/// of iterations used.
pub(crate) fn nelder_mead<F>(mut f: F, x0: &[f64], max_iterations: usize) -> (Vec<f64>, f64, usize)
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    if n == 0 {
        let v = f(x0);
        return (x0.to_vec(), v, 0);
    }
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += 0.1 * x0[i].abs().max(0.5);
        let fv = f(&v);
        simplex.push((v, fv));
    }
    let order = |s: &mut Vec<(Vec<f64>, f64)>| {
        s.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Greater))
    };
    let mut it = 0;
    while it < max_iterations {
        it += 1;
        order(&mut simplex);
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let spread = (worst - best).abs();
        let size = simplex[1..]
            .iter()
            .map(|(v, _)| max_abs(&v.iter().zip(&simplex[0].0).map(|(a, b)| a - b).collect::<Vec<_>>()))
            .fold(0.0, f64::max);
        if worst.is_finite() && spread <= 1e-12 * (best.abs() + 1.0) && size < 1e-9 {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(v, _)| v[j]).sum::<f64>() / n as f64)
            .collect();
        let toward = |c: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(m, w)| m + c * (w - m))
                .collect()
        };
        let xr = toward(-1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = toward(-2.0);
            let fe = f(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = toward(-0.5);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = toward(0.5);
                let fc = f(&xc);
                (xc, fc)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let v: Vec<f64> = vertex
                        .0
                        .iter()
                        .zip(&x_best)
                        .map(|(a, b)| b + 0.5 * (a - b))
                        .collect();
                    let fv = f(&v);
                    *vertex = (v, fv);
                }
            }
        }
    }
    order(&mut simplex);
    let (x, fx) = simplex.swap_remove(0);
    (x, fx, it)
}
