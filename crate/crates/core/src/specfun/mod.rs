//! Special functions: normalized Gegenbauer polynomials, Hermite polynomials,
//! Bessel functions of integer and half-integer order, Gaussian density and
//! distribution function, and the dimensional constants of `S^d`.

mod bessel;
pub mod quadrature;

pub use bessel::{bessel_j, bessel_j_zeros};

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Normalized Gegenbauer polynomial `G_{ℓ;d}(t)`, the covariance of the degree-ℓ
/// eigenfunction on `S^d` as a function of `t = cos(distance)`. `G_{ℓ;d}(1) = 1`.
///
/// The recurrence runs on the normalized family directly:
/// `G_{n+1} = (2(n+λ) t G_n − n G_{n−1}) / (n + 2λ)` with `λ = (d−1)/2`.
pub fn gegenbauer(ell: usize, d: usize, t: f64) -> Result<f64> {
    if d < 2 {
        return Err(Error::domain(format!("gegenbauer needs d >= 2, got {d}")));
    }
    if !(t.abs() <= 1.0) {
        return Err(Error::domain(format!("gegenbauer argument {t} outside [-1, 1]")));
    }
    Ok(gegenbauer_unchecked(ell, d, t))
}

pub(crate) fn gegenbauer_unchecked(ell: usize, d: usize, t: f64) -> f64 {
    let lambda = (d as f64 - 1.0) / 2.0;
    if ell == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = t;
    for n in 1..ell {
        let nf = n as f64;
        let next = (2.0 * (nf + lambda) * t * cur - nf * prev) / (nf + 2.0 * lambda);
        prev = cur;
        cur = next;
    }
    cur
}

/// Legendre polynomial `P_ℓ(t)`, i.e. `G_{ℓ;2}`.
pub fn legendre(ell: usize, t: f64) -> f64 {
    gegenbauer_unchecked(ell, 2, t)
}

/// Probabilists' Hermite polynomial, `H_{q+1} = x H_q − q H_{q−1}`.
pub fn hermite(q: usize, x: f64) -> f64 {
    if q == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = x;
    for k in 1..q {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `H_q(x) / √(q!)`, which stays bounded for large `q` where `H_q` itself overflows.
pub fn hermite_normalized(q: usize, x: f64) -> f64 {
    if q == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = x;
    for k in 1..q {
        let kf = k as f64;
        let next = (x * cur - kf.sqrt() * prev) / (kf + 1.0).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// Dimension `n_{ℓ;d}` of the degree-ℓ eigenspace on `S^d`.
pub fn eigenspace_dim(ell: usize, d: usize) -> u64 {
    if ell == 0 {
        return 1;
    }
    let binom = binomial((ell + d - 2) as u64, (ell - 1) as u64);
    (binom * (2 * ell + d - 1) as u128 / ell as u128) as u64
}

/// Exact binomial coefficient in 128-bit arithmetic.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// `Γ(k/2)` for a positive integer `k`, by exact recursion from `Γ(1/2)` and `Γ(1)`.
pub fn gamma_half(k: u32) -> f64 {
    assert!(k > 0, "gamma_half(0) is a pole");
    let mut g = if k % 2 == 0 { 1.0 } else { PI.sqrt() };
    let mut x = if k % 2 == 0 { 1.0 } else { 0.5 };
    while 2.0 * x < k as f64 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Hypersurface volume `μ_d` of the unit sphere `S^d ⊂ R^{d+1}`.
pub fn sphere_volume(d: usize) -> f64 {
    2.0 * PI.powf((d as f64 + 1.0) / 2.0) / gamma_half(d as u32 + 1)
}

/// Laplace eigenvalue `ℓ(ℓ+d−1)`.
pub fn eigenvalue(ell: usize, d: usize) -> f64 {
    (ell * (ell + d - 1)) as f64
}

pub fn gauss_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

pub fn gauss_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Per-dimension constants of `S^d` at degree ℓ.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SphereConstants {
    pub d: usize,
    pub ell: usize,
    pub mu_d: f64,
    pub n_ell_d: u64,
    pub eigenvalue: f64,
}

impl SphereConstants {
    pub fn new(ell: usize, d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::domain(format!("sphere dimension must be >= 2, got {d}")));
        }
        Ok(SphereConstants {
            d,
            ell,
            mu_d: sphere_volume(d),
            n_ell_d: eigenspace_dim(ell, d),
            eigenvalue: eigenvalue(ell, d),
        })
    }
}
