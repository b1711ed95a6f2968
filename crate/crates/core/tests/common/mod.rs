#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use ularma::filter::{ModelSpec, ParamVector, SeriesData};
use ularma::forecast::path_rng;
use ularma::simulate::{simulate_path, CovariateRule};
use ularma::LinkChoice;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss-Kronrod (7/15) integral of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, err) = gk15(f, a, b);
        if err <= tol || depth == 0 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, tol / 2.0, depth - 1) + rec(f, m, b, tol / 2.0, depth - 1)
    }
    rec(&f, a, b, tol, 40)
}

/// Fourth-order central difference of a scalar function.
pub fn fd_derivative<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (8.0 * (f(x + h) - f(x - h)) - (f(x + 2.0 * h) - f(x - 2.0 * h))) / (12.0 * h)
}

pub fn spec_with(p: usize, q: usize, r: usize, link: LinkChoice) -> ModelSpec {
    ModelSpec::new(p, q, r, link)
}

/// Stable coefficients for an instance of order `(p, q, r)`.
pub fn random_gamma<R: Rng>(spec: &ModelSpec, rng: &mut R) -> ParamVector {
    let mut g = ParamVector::zeros(spec);
    g.alpha = rng.random_range(-0.6..0.6);
    for b in &mut g.beta {
        *b = rng.random_range(-0.6..0.6);
    }
    for f in &mut g.phi {
        *f = rng.random_range(-0.35..0.35);
    }
    for t in &mut g.theta {
        *t = rng.random_range(-0.3..0.3);
    }
    g
}

/// Observed series (burn-in removed) from the model.
pub fn simulate(spec: &ModelSpec, gamma: &ParamVector, n: usize, seed: u64, m: u64) -> SeriesData {
    let rule = if spec.r == 0 {
        CovariateRule::None
    } else {
        CovariateRule::Sinusoid
    };
    let burnin = 100;
    let mut x = rule.design(n, burnin);
    if spec.r > 1 {
        // extra columns: shifted sinusoids
        x = DMatrix::from_fn(n + burnin, spec.r, |i, l| {
            let t = i as f64 - burnin as f64 + 1.0;
            (std::f64::consts::PI * t / 50.0 + l as f64).sin()
        });
    }
    let mut rng = path_rng(seed, m);
    simulate_path(spec, gamma, n, burnin, &x, &mut rng)
        .expect("simulation")
        .observed()
}

pub fn all_orders() -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for p in 0..=2 {
        for q in 0..=2 {
            v.push((p, q));
        }
    }
    v
}
