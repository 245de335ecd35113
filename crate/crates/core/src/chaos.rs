//! Wiener-chaos coefficient families for the length, area and Defect expansions.
//!
//! * `beta(l, z) = φ(z) H_l(z)`: Hermite coefficients of the level indicator.
//! * `alpha(2n, 2m)`: Hermite coefficients of the Euclidean norm `√(y² + z²)`,
//!   built from the polynomial `p_N` with exact integer arithmetic.
//! * `indicator_chaos(q, z)`: coefficients of `1(x > z)`.
//! * `defect_chaos(k)`: coefficients of `sgn(x)` at odd order `2k+1`.

use crate::specfun::quadrature::gauss_hermite;
use crate::specfun::{gauss_cdf, gauss_pdf, hermite};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::RwLock;

pub fn beta(l: usize, z: f64) -> f64 {
    gauss_pdf(z) * hermite(l, z)
}

fn factorial(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * k)
}

fn binomial(n: u64, k: u64) -> BigInt {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Integer coefficients of `p_N(x) = Σ_j (−1)^{j+N} C(N,j) (2j+1)!/(j!)² x^j`, lowest degree first.
pub fn p_poly_coefficients(n: u64) -> Vec<BigInt> {
    (0..=n)
        .map(|j| {
            let magnitude = binomial(n, j) * factorial(2 * j + 1) / (factorial(j) * factorial(j));
            if (j + n) % 2 == 0 {
                magnitude
            } else {
                -magnitude
            }
        })
        .collect()
}

/// `p_N(x)` in exact rational arithmetic.
pub fn p_poly_exact(n: u64, x: &BigRational) -> BigRational {
    let mut acc = BigRational::zero();
    for c in p_poly_coefficients(n).into_iter().rev() {
        acc = acc * x + BigRational::from_integer(c);
    }
    acc
}

/// `p_N(x)`. The float argument is converted exactly to a dyadic rational, so the
/// only rounding is the final conversion.
pub fn p_poly(n: u64, x: f64) -> f64 {
    let exact = BigRational::from_float(x).expect("finite argument");
    to_f64(&p_poly_exact(n, &exact))
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().expect("representable value")
}

/// The rational factor `r` in `alpha(2n, 2m) = r·√(π/2)`; `None` if either order is odd.
pub fn alpha_rational(a: u64, b: u64) -> Option<BigRational> {
    if a % 2 == 1 || b % 2 == 1 {
        return None;
    }
    let (n, m) = (a / 2, b / 2);
    let quarter = BigRational::new(BigInt::one(), BigInt::from(4));
    let num = factorial(2 * n) * factorial(2 * m);
    let den = factorial(n) * factorial(m) * (BigInt::one() << (n + m) as usize);
    Some(BigRational::new(num, den) * p_poly_exact(n + m, &quarter))
}

/// Hermite coefficient `E[√(Y² + Z²) H_a(Y) H_b(Z)]` of the norm of a standard Gaussian pair.
pub fn alpha(a: u64, b: u64) -> f64 {
    match alpha_rational(a, b) {
        Some(r) => to_f64(&r) * (PI / 2.0).sqrt(),
        None => 0.0,
    }
}

/// `E[√(Y²+Z²) H_a(Y) H_b(Z)]` in polar coordinates: Gauss–Hermite in the radius
/// (the radial integrand is an even polynomial times the Gaussian) and a uniform
/// rule in the angle (a trigonometric polynomial), so both are exact up to rounding.
pub fn alpha_quadrature(a: usize, b: usize) -> f64 {
    let radial = gauss_hermite(64);
    let k = 96;
    let mut total = 0.0;
    for j in 0..k {
        let t = 2.0 * PI * j as f64 / k as f64;
        let (s, c) = t.sin_cos();
        let mut inner = 0.0;
        for (r, w) in radial.nodes.iter().zip(&radial.weights) {
            inner += w * r * r * hermite(a, r * c) * hermite(b, r * s);
        }
        total += 0.5 * inner;
    }
    total / k as f64
}

/// Coefficients of `1(x > z) = Σ_q J_q(z) H_q(x)/q!`.
pub fn indicator_chaos(q: usize, z: f64) -> f64 {
    if q == 0 {
        1.0 - gauss_cdf(z)
    } else {
        gauss_pdf(z) * hermite(q - 1, z)
    }
}

/// Coefficient `J_{2k+1} = E[sgn(Z) H_{2k+1}(Z)] = √(2/π)(−1)^k (2k−1)!!` of the Defect
/// expansion, so that `D_ℓ = Σ_k J_{2k+1}/(2k+1)! · ∫ H_{2k+1}(T_ℓ)`.
pub fn defect_chaos(k: usize) -> f64 {
    let double_fact: f64 = (1..=k).map(|i| (2 * i - 1) as f64).product();
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    (2.0 / PI).sqrt() * sign * double_fact
}

/// Defect coefficient by chaos order: zero for even orders.
pub fn defect_chaos_order(q: usize) -> f64 {
    if q % 2 == 0 {
        0.0
    } else {
        defect_chaos((q - 1) / 2)
    }
}

/// One term of the order-`q` chaos projection of the level length:
/// `coefficient · ∫ H_{value_order}(T) H_{grad1_order}(∂̃₁T) H_{grad2_order}(∂̃₂T)`,
/// to be multiplied by `√(E_ℓ/2)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LengthChaosTerm {
    pub value_order: usize,
    pub grad1_order: usize,
    pub grad2_order: usize,
    pub coefficient: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Key {
    Beta(usize, u64),
    Alpha(u64, u64),
    Indicator(usize, u64),
}

/// Memoized coefficient families up to a configurable truncation order.
#[derive(Debug)]
pub struct ChaosTable {
    max_order: usize,
    memo: RwLock<HashMap<Key, f64>>,
}

impl Default for ChaosTable {
    fn default() -> Self {
        ChaosTable::new(6)
    }
}

impl ChaosTable {
    pub fn new(max_order: usize) -> Self {
        ChaosTable { max_order, memo: RwLock::new(HashMap::new()) }
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    fn memoized(&self, key: Key, compute: impl FnOnce() -> f64) -> f64 {
        if let Some(v) = self.memo.read().unwrap().get(&key) {
            return *v;
        }
        let v = compute();
        *self.memo.write().unwrap().entry(key).or_insert(v)
    }

    pub fn beta(&self, l: usize, z: f64) -> f64 {
        self.memoized(Key::Beta(l, z.to_bits()), || beta(l, z))
    }

    pub fn alpha(&self, a: u64, b: u64) -> f64 {
        let key = Key::Alpha(a.min(b), a.max(b));
        self.memoized(key, || alpha(a, b))
    }

    pub fn indicator(&self, q: usize, z: f64) -> f64 {
        self.memoized(Key::Indicator(q, z.to_bits()), || indicator_chaos(q, z))
    }

    /// Nonzero terms of the order-`q` length projection at level `z`.
    pub fn length_terms(&self, q: usize, z: f64) -> Vec<LengthChaosTerm> {
        let mut out = Vec::new();
        for u in 0..=q {
            for k in 0..=u {
                let a = self.alpha(k as u64, (u - k) as u64);
                if a == 0.0 {
                    continue;
                }
                let b = self.beta(q - u, z);
                let denom = factorial_f64(k) * factorial_f64(u - k) * factorial_f64(q - u);
                out.push(LengthChaosTerm {
                    value_order: q - u,
                    grad1_order: k,
                    grad2_order: u - k,
                    coefficient: a * b / denom,
                });
            }
        }
        out
    }

    /// All `(family, index1, index2, z, value)` rows up to the truncation order.
    pub fn rows(&self, levels: &[f64]) -> Vec<(&'static str, usize, usize, f64, f64)> {
        let mut rows = Vec::new();
        for a in (0..=self.max_order).step_by(2) {
            for b in (0..=self.max_order - a).step_by(2) {
                rows.push(("alpha", a, b, f64::NAN, self.alpha(a as u64, b as u64)));
            }
        }
        for &z in levels {
            for l in 0..=self.max_order {
                rows.push(("beta", l, 0, z, self.beta(l, z)));
            }
            for q in 0..=self.max_order {
                rows.push(("indicator", q, 0, z, self.indicator(q, z)));
            }
        }
        for q in (1..=self.max_order).step_by(2) {
            rows.push(("defect", q, 0, f64::NAN, defect_chaos_order(q)));
        }
        rows
    }
}

fn factorial_f64(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_examples() {
        let inv = 1.0 / (2.0 * PI).sqrt();
        assert!((beta(0, 0.0) - inv).abs() < 1e-15);
        assert!((beta(2, 0.0) + inv).abs() < 1e-15);
        assert!((beta(1, 1.0) - 0.241_970_724_519_143_37).abs() < 1e-15);
    }

    #[test]
    fn p_poly_examples() {
        assert_eq!(p_poly(0, 0.37), 1.0);
        assert_eq!(p_poly(1, 0.25), 0.5);
        assert_eq!(p_poly(2, 0.25), -0.125);
        // p_1(x) = 6x − 1, p_2(x) = 1 − 12x + 30x².
        let c1 = p_poly_coefficients(1);
        assert_eq!(c1, vec![BigInt::from(-1), BigInt::from(6)]);
        let c2 = p_poly_coefficients(2);
        assert_eq!(c2, vec![BigInt::from(1), BigInt::from(-12), BigInt::from(30)]);
    }

    #[test]
    fn alpha_examples() {
        let r = (PI / 2.0).sqrt();
        assert!((alpha(0, 0) - r).abs() < 1e-15);
        assert!((alpha(2, 0) - r / 2.0).abs() < 1e-15);
        assert!((alpha(0, 2) - r / 2.0).abs() < 1e-15);
        assert!((alpha(2, 2) + r / 8.0).abs() < 1e-15);
        assert_eq!(alpha(3, 2), 0.0);
        assert_eq!(alpha(2, 1), 0.0);
    }

    #[test]
    fn indicator_examples() {
        let z = 0.83;
        assert!((indicator_chaos(2, z) - z * gauss_pdf(z)).abs() < 1e-16);
        assert_eq!(indicator_chaos(4, 0.0), 0.0);
        assert!((indicator_chaos(1, 0.0) - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-16);
        assert!((indicator_chaos(0, 0.0) - 0.5).abs() < 1e-16);
    }

    #[test]
    fn defect_coefficients_are_sign_expansion() {
        let r = (2.0 / PI).sqrt();
        assert!((defect_chaos(0) - r).abs() < 1e-15);
        assert!((defect_chaos(1) + r).abs() < 1e-15);
        assert!((defect_chaos(2) - 3.0 * r).abs() < 1e-15);
        assert_eq!(defect_chaos_order(4), 0.0);
        // Each coefficient is twice the indicator coefficient at z = 0.
        for k in 0..10 {
            assert!((defect_chaos(k) - 2.0 * indicator_chaos(2 * k + 1, 0.0)).abs() < 1e-9 * defect_chaos(k).abs());
        }
    }

    #[test]
    fn length_terms_of_order_two() {
        let table = ChaosTable::default();
        let z = 1.3;
        let terms = table.length_terms(2, z);
        assert_eq!(terms.len(), 3);
        let phi = gauss_pdf(z);
        let r8 = (PI / 8.0).sqrt();
        for t in &terms {
            let want = if t.value_order == 2 { r8 * phi * (z * z - 1.0) } else { r8 * phi / 2.0 };
            assert!((t.coefficient - want).abs() < 1e-15, "{t:?}");
        }
        // Order one reduces to β₁(z)α₀₀∫T, which vanishes on the sphere but is a formal term.
        assert_eq!(table.length_terms(1, z).len(), 1);
    }

    #[test]
    fn memo_is_transparent() {
        let table = ChaosTable::new(8);
        assert_eq!(table.alpha(4, 2), alpha(4, 2));
        assert_eq!(table.alpha(2, 4), alpha(4, 2));
        assert_eq!(table.beta(3, -0.4), beta(3, -0.4));
        assert!(!table.rows(&[0.0, 1.0]).is_empty());
    }
}
