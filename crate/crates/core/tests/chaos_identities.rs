use proptest::prelude::*;
use randwaves::chaos::{alpha, alpha_quadrature, alpha_rational, beta, defect_chaos, indicator_chaos, p_poly};
use randwaves::specfun::{gauss_cdf, gauss_pdf, hermite, hermite_normalized};
use std::f64::consts::PI;

#[test]
fn alpha_matches_two_dimensional_quadrature() {
    for a in 0..=8 {
        for b in 0..=8 {
            let q = alpha_quadrature(a, b);
            let exact = alpha(a as u64, b as u64);
            assert!((q - exact).abs() <= 1e-6, "alpha({a},{b}) = {exact}, quadrature {q}");
        }
    }
    // Higher orders, where the alternating sum inside p_N is badly conditioned in floats.
    for (a, b) in [(12, 6), (16, 0), (10, 10)] {
        let q = alpha_quadrature(a, b);
        let exact = alpha(a as u64, b as u64);
        assert!((q - exact).abs() <= 1e-6 * exact.abs().max(1.0), "alpha({a},{b})");
    }
}

#[test]
fn alpha_is_symmetric_and_zero_on_odd_orders() {
    for a in 0..20u64 {
        for b in 0..20u64 {
            assert_eq!(alpha(a, b), alpha(b, a));
            if a % 2 == 1 || b % 2 == 1 {
                assert_eq!(alpha(a, b), 0.0);
                assert!(alpha_rational(a, b).is_none());
            }
        }
    }
}

#[test]
fn p_poly_large_order_is_exact() {
    // Exact values from an independent rational-arithmetic evaluation (Python fractions).
    // At N = 30 the largest term is ~7e8 while the sum is ~1.7e−3.
    assert_eq!(p_poly(3, 0.25), 0.0625);
    assert_eq!(p_poly(10, 0.25), -0.009_273_529_052_734_375);
    let v = p_poly(30, 0.25);
    assert!((v + 0.001_738_613_101_840_161_3).abs() < 1e-18, "{v}");
}

/// Orthant probability `P(X > z, Y > z)` for a standard pair with correlation ρ, by
/// one-dimensional Gauss–Legendre quadrature of `φ(x)·(1 − Φ((z − ρx)/√(1−ρ²)))`.
fn orthant(z: f64, rho: f64) -> f64 {
    let rule = randwaves::specfun::quadrature::gauss_legendre(400);
    let s = (1.0 - rho * rho).sqrt();
    rule.integrate(z, z + 40.0, |x| gauss_pdf(x) * (1.0 - gauss_cdf((z - rho * x) / s)))
}

#[test]
fn indicator_chaos_mehler_identity() {
    // Σ_{q≥1} J_q² ρ^q / q! = P(X>z, Y>z) − (1−Φ(z))², geometrically convergent for ρ < 1.
    for &z in &[-1.3, 0.0, 0.5, 1.0, 2.0] {
        for &rho in &[0.3, 0.5, 0.7] {
            let mut sum = 0.0;
            let mut rq = 1.0;
            for q in 1..=60 {
                rq *= rho;
                let h = hermite_normalized(q - 1, z);
                sum += gauss_pdf(z).powi(2) * h * h / q as f64 * rq;
            }
            let tail = 1.0 - gauss_cdf(z);
            let want = orthant(z, rho) - tail * tail;
            assert!((sum - want).abs() < 1e-8, "z={z} ρ={rho}: {sum} vs {want}");
        }
    }
}

#[test]
fn indicator_chaos_variance_identity_with_tail() {
    // At ρ = 1 the series sums to Φ(1−Φ) but its terms decay like q^{−3/2}; the
    // truncation deficit after Q terms is φ(z)/(π√Q) to leading order.
    for &z in &[-1.3, 0.0, 0.5, 1.0, 2.0] {
        let target = gauss_cdf(z) * (1.0 - gauss_cdf(z));
        let mut sum = 0.0;
        let mut previous = 0.0;
        for q in 1..=60usize {
            let j = indicator_chaos(q, z);
            // J_q²/q! evaluated through the normalized Hermite value to avoid overflow.
            let h = hermite_normalized(q - 1, z);
            let term = gauss_pdf(z).powi(2) * h * h / q as f64;
            if q <= 12 {
                let fact: f64 = (1..=q).map(|k| k as f64).product();
                assert!((term - j * j / fact).abs() < 1e-14);
            }
            sum += term;
            assert!(sum >= previous && sum <= target + 1e-15);
            previous = sum;
        }
        let deficit = target - sum;
        let predicted = gauss_pdf(z) / (PI * 60f64.sqrt());
        assert!((deficit / predicted - 1.0).abs() < 0.02, "z={z}: deficit {deficit}, predicted {predicted}");
    }
}

#[test]
fn defect_coefficients_reproduce_sign_variance() {
    // J_{2k+1}²/(2k+1)! = (2/π) a_k with a_k the arcsine Taylor coefficients.
    for k in 0..80usize {
        let q = 2 * k + 1;
        let fact: f64 = (1..=q).map(|i| i as f64).product();
        let j = defect_chaos(k);
        let a_k = arcsine_coefficient(k);
        assert!((j * j / fact - 2.0 / PI * a_k).abs() < 1e-12 * a_k, "k={k}");
    }
    // Σ_k (2/π) a_k = (2/π) arcsin(1) = 1 = Var(sgn Z); the tail beyond K is (2/π)/√(πK) to leading order.
    let big_k = 200_000;
    let mut central = 1.0; // (2k)!/(4^k (k!)²)
    let mut sum = 0.0;
    for k in 0..big_k {
        if k > 0 {
            central *= (2 * k - 1) as f64 / (2 * k) as f64;
        }
        sum += 2.0 / PI * central / (2 * k + 1) as f64;
    }
    let tail = 2.0 / PI / (PI * big_k as f64).sqrt();
    assert!((sum + tail - 1.0).abs() < 1e-6, "{}", sum + tail);
}

fn arcsine_coefficient(k: usize) -> f64 {
    // a_k = (2k)!/(4^k (k!)² (2k+1)) via a stable product.
    let mut c = 1.0;
    for i in 1..=k {
        c *= (2 * i - 1) as f64 / (2 * i) as f64;
    }
    c / (2 * k + 1) as f64
}

proptest! {
    #[test]
    fn beta_parity(l in 0usize..30, z in -6.0f64..6.0) {
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        let lhs = beta(l, -z);
        let rhs = sign * beta(l, z);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
    }

    #[test]
    fn beta_is_pdf_times_hermite(l in 0usize..30, z in -6.0f64..6.0) {
        prop_assert_eq!(beta(l, z), gauss_pdf(z) * hermite(l, z));
    }
}
