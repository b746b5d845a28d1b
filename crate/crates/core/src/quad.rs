//! Gauss-Legendre quadrature and the standard bump mollifier.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// memoized per `n` (the rules are queried thousands of times per run).
pub fn gauss_legendre(n: usize) -> Arc<(Vec<f64>, Vec<f64>)> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().unwrap().get(&n) {
        return rule.clone();
    }
    let rule = Arc::new(compute_gauss_legendre(n));
    cache.lock().unwrap().insert(n, rule.clone());
    rule
}

/// Newton iteration on the Legendre polynomial, seeded with the Chebyshev
/// angle approximation. Accurate to machine precision for n up to a few
/// thousand.
fn compute_gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n(x) and P_n'(x) by the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            dp = (n as f64) * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Integrate `f` over `[a, b]` with an `n`-point Gauss-Legendre budget.
/// Large budgets are split into composite panels of at most 256 points:
/// same accuracy class, and the node tables stay small and cached.
pub fn integrate_gl<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let panels = n.div_ceil(256);
    let per_panel = n.div_ceil(panels).max(1);
    let rule = gauss_legendre(per_panel);
    let (nodes, weights) = (&rule.0, &rule.1);
    let width = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let half = 0.5 * width;
        let mid = lo + half;
        let mut panel = 0.0;
        for (x, w) in nodes.iter().zip(weights) {
            panel += w * f(mid + half * x);
        }
        acc += panel * half;
    }
    acc
}

/// Integrate over `[a, b]` split at the interior `breakpoints`, with `n`
/// Gauss-Legendre points per piece. Breakpoints outside `(a, b)` are ignored.
pub fn integrate_piecewise<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    n: usize,
) -> f64 {
    let mut cuts: Vec<f64> = breakpoints.iter().copied().filter(|&c| c > a && c < b).collect();
    cuts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    cuts.dedup();
    let mut acc = 0.0;
    let mut lo = a;
    for c in cuts.into_iter().chain(std::iter::once(b)) {
        acc += integrate_gl(&f, lo, c, n);
        lo = c;
    }
    acc
}

/// The standard bump mollifier on `[-radius, radius]`, normalized to unit
/// integral: `eta(x) = Z^-1 exp(-1 / (1 - (x/radius)^2))`.
#[derive(Debug, Clone)]
pub struct Bump {
    pub radius: f64,
    norm: f64,
}

impl Bump {
    pub fn new(radius: f64) -> Self {
        assert!(radius > 0.0);
        // Normalize with a finer rule than any caller uses, so the shipped
        // eta integrates to 1 well below the 1e-10 contract.
        let raw = |x: f64| unnormalized_bump(x / radius);
        let z = integrate_piecewise(raw, -radius, radius, &[-0.5 * radius, 0.0, 0.5 * radius], 256);
        Bump { radius, norm: 1.0 / z }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.norm * unnormalized_bump(x / self.radius)
    }
}

fn unnormalized_bump(s: f64) -> f64 {
    let t = 1.0 - s * s;
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}
