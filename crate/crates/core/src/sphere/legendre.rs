//! Fully normalized associated Legendre functions for a single degree.

use std::f64::consts::PI;

const RESCALE: f64 = 1e200;
const LN_RESCALE: f64 = 460.517_018_598_809_1; // ln(1e200)

/// `P̄_ℓ^m(x)` and `dP̄_ℓ^m/dθ` for `m = 0..=ℓ`, where `x = cos θ`, `s = sin θ > 0`.
///
/// Normalization: `2π ∫₋₁¹ P̄_ℓ^m(x)² dx = 1`, Condon–Shortley phase included.
/// Each column starts from the sectoral value `P̄_m^m`, tracked in log scale so that
/// `sin^m θ` cannot underflow, and runs the upward recurrence
/// `P̄_n^m = a_{nm}(x P̄_{n−1}^m − P̄_{n−2}^m / a_{n−1,m})`, `a_{nm} = √((4n²−1)/(n²−m²))`.
pub fn normalized_legendre_row(ell: usize, x: f64, s: f64) -> (Vec<f64>, Vec<f64>) {
    let mut p = vec![0.0; ell + 1];
    let mut dp = vec![0.0; ell + 1];
    let lf = ell as f64;
    let ln_s = s.ln();
    // log|P̄_m^m| without the sin^m factor.
    let mut log_sectoral = -(4.0 * PI).ln() * 0.5;
    for m in 0..=ell {
        if m > 0 {
            let mf = m as f64;
            log_sectoral += 0.5 * ((2.0 * mf + 1.0) / (2.0 * mf)).ln();
        }
        let mf = m as f64;
        let mut log_scale = log_sectoral + mf * ln_s;
        let mut prev = 0.0;
        let mut cur = 1.0;
        let mut a_prev = 0.0;
        for n in (m + 1)..=ell {
            let nf = n as f64;
            let a = ((4.0 * nf * nf - 1.0) / (nf * nf - mf * mf)).sqrt();
            let next = if a_prev == 0.0 { a * x * cur } else { a * (x * cur - prev / a_prev) };
            prev = cur;
            cur = next;
            a_prev = a;
            if cur.abs() > RESCALE {
                cur /= RESCALE;
                prev /= RESCALE;
                log_scale += LN_RESCALE;
            }
        }
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let deriv = (lf * x * cur - ((2.0 * lf + 1.0) * (lf * lf - mf * mf) / (2.0 * lf - 1.0)).sqrt() * prev) / s;
        let (p_val, d_val) = if log_scale < -740.0 {
            (0.0, 0.0)
        } else {
            let f = sign * log_scale.exp();
            (f * cur, f * deriv)
        };
        p[m] = p_val;
        dp[m] = if ell == 0 { 0.0 } else { d_val };
    }
    (p, dp)
}
