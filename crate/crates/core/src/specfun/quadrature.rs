//! Gauss–Legendre and Gauss–Hermite rules, computed once per size and cached.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Nodes in ascending order with matching weights.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrate `f` over `[a, b]`, assuming `self` is a Legendre rule on `[−1, 1]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut sum = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            sum += w * f(mid + half * x);
        }
        half * sum
    }
}

type Cache = OnceLock<Mutex<HashMap<usize, Arc<Rule>>>>;

static LEGENDRE: Cache = OnceLock::new();
static HERMITE: Cache = OnceLock::new();

fn cached(cache: &Cache, n: usize, build: fn(usize) -> Rule) -> Arc<Rule> {
    let map = cache.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = map.lock().unwrap().get(&n) {
        return Arc::clone(rule);
    }
    // Built outside the lock; a concurrent duplicate build is harmless.
    let rule = Arc::new(build(n));
    Arc::clone(map.lock().unwrap().entry(n).or_insert(rule))
}

/// `n`-point Gauss–Legendre rule on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> Arc<Rule> {
    assert!(n > 0, "empty quadrature rule");
    cached(&LEGENDRE, n, build_legendre)
}

/// `n`-point Gauss–Hermite rule for the weight `e^{−x²/2}` (total mass `√(2π)`).
pub fn gauss_hermite(n: usize) -> Arc<Rule> {
    assert!(n > 0, "empty quadrature rule");
    cached(&HERMITE, n, build_hermite)
}

fn build_legendre(n: usize) -> Rule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
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
    Rule { nodes, weights }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let prev = if n == 0 { 0.0 } else { p0 };
    let d = n as f64 * (x * p - prev) / (x * x - 1.0);
    (p, d)
}

/// Golub–Welsch eigenvalues of the Jacobi matrix as starting points, polished by
/// Newton steps on the normalized Hermite recurrence.
fn build_hermite(n: usize) -> Rule {
    let jacobi = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    nodes.sort_by(f64::total_cmp);
    let nf = n as f64;
    let norm = (2.0 * PI).sqrt();
    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        for _ in 0..4 {
            let (h, h_prev) = normalized_pair(n, *x);
            let step = h / (nf.sqrt() * h_prev);
            *x -= step;
            if step.abs() < 1e-15 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, h_prev) = normalized_pair(n, *x);
        weights.push(norm / (nf * h_prev * h_prev));
    }
    Rule { nodes, weights }
}

/// `(h_n(x), h_{n−1}(x))` with `h_k = H_k/√(k!)`.
fn normalized_pair(n: usize, x: f64) -> (f64, f64) {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for k in 0..n {
        let kf = k as f64;
        let next = (x * cur - kf.sqrt() * prev) / (kf + 1.0).sqrt();
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::{hermite, legendre};

    #[test]
    fn legendre_rule_integrates_polynomials_exactly() {
        for &n in &[1usize, 2, 7, 64, 513, 4096] {
            let rule = gauss_legendre(n);
            let total: f64 = rule.weights.iter().sum();
            assert!((total - 2.0).abs() < 1e-13, "n={n}");
            let deg = 2 * n - 2;
            let m = rule.integrate(-1.0, 1.0, |x| x.powi(deg as i32));
            assert!((m - 2.0 / (deg as f64 + 1.0)).abs() < 1e-13, "n={n}");
        }
        let rule = gauss_legendre(40);
        for a in 0..10 {
            for b in 0..10 {
                let v = rule.integrate(-1.0, 1.0, |x| legendre(a, x) * legendre(b, x));
                let want = if a == b { 2.0 / (2 * a + 1) as f64 } else { 0.0 };
                assert!((v - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn hermite_orthogonality() {
        let rule = gauss_hermite(200);
        let norm = (2.0 * PI).sqrt();
        let mut fact = 1.0;
        for p in 0..=10usize {
            if p > 0 {
                fact *= p as f64;
            }
            for q in 0..=10usize {
                let mut s = 0.0;
                for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                    s += w * hermite(p, *x) * hermite(q, *x);
                }
                let want = if p == q { fact } else { 0.0 };
                assert!((s / norm - want).abs() < 1e-8, "p={p} q={q} got {}", s / norm);
            }
        }
    }

    #[test]
    fn cache_returns_same_rule() {
        let a = gauss_legendre(33);
        let b = gauss_legendre(33);
        assert!(Arc::ptr_eq(&a, &b));
    }
}
