//! Is the Lévy Brownian kernel `d(x, y)` restricted negative definite on a homogeneous
//! space? Character coefficients on SO(3) and SU(2), Legendre coefficients on S²,
//! and direct Gram-matrix tests on random samples.

use crate::error::{Error, Result};
use crate::specfun::legendre;
use crate::specfun::quadrature::gauss_legendre;
use crate::sphere::mix_seed;
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Tolerance above which a coefficient or eigenvalue counts as positive.
pub const POSITIVITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    S2,
    Su2,
    So3,
}

impl std::str::FromStr for Space {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s2" | "sphere" => Ok(Space::S2),
            "su2" | "s3" => Ok(Space::Su2),
            "so3" => Ok(Space::So3),
            _ => Err(Error::config("space", format!("unknown space '{s}' (expected s2, su2 or so3)"))),
        }
    }
}

impl std::fmt::Display for Space {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Space::S2 => "S2",
            Space::Su2 => "SU2",
            Space::So3 => "SO3",
        })
    }
}

/// `∫₀^π t cos(mt) dt`.
fn t_cos_integral(m: i64) -> f64 {
    match m.unsigned_abs() {
        0 => 0.5 * PI * PI,
        m => {
            let m = m as f64;
            if m % 2.0 == 0.0 {
                0.0
            } else {
                -2.0 / (m * m)
            }
        }
    }
}

/// Rotation-angle law of a Haar rotation in SO(3): `p_T(t) = (1 − cos t)/π` on `[0, π]`.
pub fn so3_angle_density(t: f64) -> f64 {
    if (0.0..=PI).contains(&t) {
        (1.0 - t.cos()) / PI
    } else {
        0.0
    }
}

/// Character of the `(2ℓ+1)`-dimensional representation at rotation angle `t`.
pub fn so3_character(ell: usize, t: f64) -> f64 {
    1.0 + 2.0 * (1..=ell).map(|m| (m as f64 * t).cos()).sum::<f64>()
}

/// Density of `tr(g)` for Haar `g ∈ SO(3)`: `(1/2π) √(3−y) / √(y+1)` on `(−1, 3)`.
pub fn so3_trace_density(y: f64) -> f64 {
    if y <= -1.0 || y >= 3.0 {
        0.0
    } else {
        (3.0 - y).sqrt() / ((y + 1.0).sqrt() * 2.0 * PI)
    }
}

/// `α_ℓ = ∫₀^π t χ_ℓ(t) p_T(t) dt` by partial fractions: `(1 − cos t) cos(mt)` splits into
/// three cosines and each `∫ t cos(kt)` is elementary.
pub fn so3_alpha(ell: usize) -> f64 {
    let mut total = 0.0;
    for m in 0..=ell as i64 {
        let w = if m == 0 { 1.0 } else { 2.0 };
        total += w * (t_cos_integral(m) - 0.5 * (t_cos_integral(m - 1) + t_cos_integral(m + 1)));
    }
    total / PI
}

/// [`so3_alpha`] by Gauss–Legendre quadrature of the defining integral.
pub fn so3_alpha_quadrature(ell: usize) -> f64 {
    gauss_legendre(2 * ell + 64).integrate(0.0, PI, |t| t * so3_character(ell, t) * so3_angle_density(t))
}

/// `(1/π) ∫₀^π t sin((ℓ+1)t) sin t dt`: zero for even `ℓ`, `−(4/π)(ℓ+1)/(ℓ²(ℓ+2)²)` for odd.
pub fn su2_alpha(ell: usize) -> f64 {
    let l = ell as i64;
    (t_cos_integral(l) - t_cos_integral(l + 2)) / (2.0 * PI)
}

pub fn su2_alpha_quadrature(ell: usize) -> f64 {
    let k = (ell + 1) as f64;
    gauss_legendre(ell + 64).integrate(0.0, PI, |t| t * (k * t).sin() * t.sin()) / PI
}

/// `c_ℓ = ∫₋₁¹ arcsin(t) P_ℓ(t) dt = π {(3·5···(ℓ−2)) / (2·4···(ℓ+1))}²` for odd `ℓ`, 0 for even.
pub fn arccos_legendre_coeff(ell: usize) -> f64 {
    if ell % 2 == 0 {
        return 0.0;
    }
    // r_ℓ = (3·5···(ℓ−2)) / (2·4···(ℓ+1)), with r_{ℓ+2} = r_ℓ · ℓ/(ℓ+3).
    let mut r = 0.5;
    let mut l = 1;
    while l < ell {
        r *= l as f64 / (l + 3) as f64;
        l += 2;
    }
    PI * r * r
}

/// `∫₋₁¹ arcsin(t) P_ℓ(t) dt` by quadrature in `u = arcsin t`.
pub fn arccos_legendre_quadrature(ell: usize) -> f64 {
    gauss_legendre(ell + 64).integrate(-0.5 * PI, 0.5 * PI, |u| u * legendre(ell, u.sin()) * u.cos())
}

/// Coefficient `(√π/2) √(2ℓ+1) ∫₀¹ P_ℓ` of the half-sphere indicator on the normalized
/// zonal harmonic; closed form `(−1)^m (1/2) √(2ℓ+1) √c_ℓ` for `ℓ = 2m+1`, 0 for even `ℓ ≥ 2`.
pub fn halfsphere_coeff(ell: usize) -> f64 {
    if ell % 2 == 0 {
        return 0.0;
    }
    let sign = if (ell / 2) % 2 == 0 { 1.0 } else { -1.0 };
    sign * 0.5 * ((2 * ell + 1) as f64).sqrt() * arccos_legendre_coeff(ell).sqrt()
}

pub fn halfsphere_quadrature(ell: usize) -> f64 {
    let integral = gauss_legendre(ell / 2 + 2).integrate(0.0, 1.0, |t| legendre(ell, t));
    0.5 * PI.sqrt() * ((2 * ell + 1) as f64).sqrt() * integral
}

/// Kernel coefficient `α_ℓ` on `space`. On S² this is `∫₀^π t P_ℓ(cos t) (sin t / 2) dt`,
/// i.e. `−c_ℓ/2` for `ℓ ≥ 1`.
pub fn alpha(space: Space, ell: usize) -> f64 {
    match space {
        Space::So3 => so3_alpha(ell),
        Space::Su2 => su2_alpha(ell),
        Space::S2 if ell == 0 => 0.5 * PI,
        Space::S2 => -0.5 * arccos_legendre_coeff(ell),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    RestrictedNegativeDefinite,
    Not,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct KernelVerdict {
    pub space: Space,
    /// `α_0..=α_{ℓ_max}`.
    pub coefficients: Vec<f64>,
    pub verdict: Verdict,
    /// First `ℓ ≥ 1` with `α_ℓ > 0`, if any.
    pub witness: Option<usize>,
}

impl KernelVerdict {
    pub fn witness_text(&self) -> String {
        match self.witness {
            None => format!("all alpha_l <= 0 for 1 <= l <= {}", self.coefficients.len() - 1),
            Some(l) => format!("alpha_{l} = {:.6e} > 0", self.coefficients[l]),
        }
    }
}

/// Characterization by coefficients: the kernel is restricted negative definite iff
/// `α_ℓ ≤ 0` for every `ℓ ≥ 1`, checked here up to `lmax`.
pub fn kernel_verdict(space: Space, lmax: usize) -> Result<KernelVerdict> {
    if lmax == 0 {
        return Err(Error::config("lmax", "must be at least 1"));
    }
    let coefficients: Vec<f64> = (0..=lmax).map(|l| alpha(space, l)).collect();
    let witness = (1..=lmax).find(|&l| coefficients[l] > POSITIVITY_TOLERANCE);
    let verdict = if witness.is_some() { Verdict::Not } else { Verdict::RestrictedNegativeDefinite };
    Ok(KernelVerdict { space, coefficients, verdict, witness })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GramVerdict {
    pub points: usize,
    /// Largest eigenvalue of the distance matrix on the zero-sum subspace.
    pub max_eigenvalue: f64,
    pub verdict: Verdict,
    /// Pairs of coincident points; these make the sample degenerate but not invalid.
    pub coincident_pairs: usize,
}

/// Restricts the distance matrix to `{ξ : Σξᵢ = 0}` and reports its top eigenvalue.
///
/// The restriction is a Householder reflection sending `𝟙/√n` to the last basis
/// vector, after which the leading `(n−1)×(n−1)` block is the operator on the
/// zero-sum subspace.
pub fn gram_restricted_nd_test<P>(points: &[P], dist: impl Fn(&P, &P) -> f64) -> Result<GramVerdict> {
    let n = points.len();
    if n < 2 {
        return Err(Error::domain(format!("need at least 2 points, got {n}")));
    }
    let mut coincident_pairs = 0;
    let d = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            dist(&points[i], &points[j])
        }
    });
    for i in 0..n {
        for j in i + 1..n {
            if d[(i, j)].abs() < 1e-12 {
                coincident_pairs += 1;
            }
        }
    }
    let mut w = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    w[n - 1] -= 1.0;
    let w = w.normalize();
    let dw = &d * &w;
    let wdw = w.dot(&dw);
    // (I − 2wwᵀ) D (I − 2wwᵀ) = D − 2 w (Dw)ᵀ − 2 (Dw) wᵀ + 4 (wᵀDw) wwᵀ
    let projected = &d - 2.0 * &w * dw.transpose() - 2.0 * &dw * w.transpose() + 4.0 * wdw * &w * w.transpose();
    let block = projected.view((0, 0), (n - 1, n - 1)).into_owned();
    let block = 0.5 * (&block + block.transpose());
    let max_eigenvalue = block.symmetric_eigenvalues().max();
    let verdict = if max_eigenvalue <= POSITIVITY_TOLERANCE { Verdict::RestrictedNegativeDefinite } else { Verdict::Not };
    Ok(GramVerdict { points: n, max_eigenvalue, verdict, coincident_pairs })
}

fn uniform_unit_vector(rng: &mut impl Rng) -> Vector3<f64> {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(0.0..2.0 * PI);
    let r = (1.0 - z * z).max(0.0).sqrt();
    Vector3::new(r * phi.cos(), r * phi.sin(), z)
}

/// Inverse of the angle cdf `F(t) = (t − sin t)/π` by bisection-guarded Newton.
fn so3_angle_quantile(u: f64) -> f64 {
    let target = u * PI;
    let (mut lo, mut hi) = (0.0, PI);
    let mut t = (6.0 * target).cbrt().min(PI);
    for _ in 0..100 {
        let f = t - t.sin() - target;
        if f > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let df = 1.0 - t.cos();
        let mut next = if df > 0.0 { t - f / df } else { 0.5 * (lo + hi) };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() < 1e-15 {
            return next;
        }
        t = next;
    }
    t
}

/// Rotation by angle `t` about the unit `axis`.
pub fn rotation(axis: Vector3<f64>, t: f64) -> Matrix3<f64> {
    let k = axis.cross_matrix();
    Matrix3::identity() + t.sin() * k + (1.0 - t.cos()) * k * k
}

/// Uniform points on S².
pub fn sample_sphere_points(count: usize, seed: u64) -> Vec<Vector3<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x5350_4845_5245));
    (0..count).map(|_| uniform_unit_vector(&mut rng)).collect()
}

/// Haar rotations: angle from the rotation-angle law, axis uniform.
pub fn sample_so3(count: usize, seed: u64) -> Vec<Matrix3<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x534f_33));
    (0..count)
        .map(|_| {
            let t = so3_angle_quantile(rng.random::<f64>());
            rotation(uniform_unit_vector(&mut rng), t)
        })
        .collect()
}

pub fn geodesic_distance(x: &Vector3<f64>, y: &Vector3<f64>) -> f64 {
    // atan2 form stays accurate for nearly equal and nearly antipodal points.
    x.cross(y).norm().atan2(x.dot(y))
}

/// Bi-invariant distance `arccos((tr(g hᵀ) − 1)/2)`: the rotation angle of `g h⁻¹`.
pub fn so3_distance(g: &Matrix3<f64>, h: &Matrix3<f64>) -> f64 {
    (0.5 * ((g * h.transpose()).trace() - 1.0)).clamp(-1.0, 1.0).acos()
}

/// Gram test on `count` random points of `space`; SU(2) is treated as S³.
pub fn random_gram_test(space: Space, count: usize, seed: u64) -> Result<GramVerdict> {
    match space {
        Space::S2 => gram_restricted_nd_test(&sample_sphere_points(count, seed), geodesic_distance),
        Space::So3 => gram_restricted_nd_test(&sample_so3(count, seed), so3_distance),
        Space::Su2 => {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x5355_32));
            let pts: Vec<[f64; 4]> = (0..count)
                .map(|_| {
                    let v: [f64; 4] = std::array::from_fn(|_| rng.sample(rand_distr::StandardNormal));
                    let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    v.map(|x| x / r)
                })
                .collect();
            gram_restricted_nd_test(&pts, |a, b| {
                a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>().clamp(-1.0, 1.0).acos()
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn so3_examples() {
        assert!((so3_alpha(2) - 2.0 / (9.0 * PI)).abs() < 1e-14);
        assert!((so3_alpha(0) - (0.5 * PI + 2.0 / PI)).abs() < 1e-14);
        for ell in (2..=50).step_by(2) {
            assert!(so3_alpha(ell) > 0.0, "ℓ={ell}");
        }
    }

    #[test]
    fn so3_closed_form_matches_quadrature() {
        let worst = (0..=100).map(|l| (so3_alpha(l) - so3_alpha_quadrature(l)).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-10, "{worst}");
    }

    #[test]
    fn su2_examples() {
        assert!((su2_alpha(1) + 8.0 / (9.0 * PI)).abs() < 1e-14);
        for ell in 1..=60 {
            let a = su2_alpha(ell);
            assert!((a - su2_alpha_quadrature(ell)).abs() < 1e-12, "ℓ={ell}");
            if ell % 2 == 0 {
                assert!(a.abs() < 1e-12);
            } else {
                let l = ell as f64;
                assert!((a + 4.0 / PI * (l + 1.0) / (l * l * (l + 2.0).powi(2))).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn angle_law_and_characters() {
        let rule = gauss_legendre(64);
        assert!((rule.integrate(0.0, PI, so3_angle_density) - 1.0).abs() < 1e-14);
        for ell in 0..6 {
            assert_eq!(so3_character(ell, 0.0), (2 * ell + 1) as f64);
        }
        // Trace density under y = −1 + 4 sin²u becomes (4/π) cos²u.
        let total = rule.integrate(0.0, 0.5 * PI, |u| {
            let y = -1.0 + 4.0 * u.sin().powi(2);
            so3_trace_density(y) * 8.0 * u.sin() * u.cos()
        });
        assert!((total - 1.0).abs() < 1e-10);
        for k in 1..50 {
            let t = PI * k as f64 / 50.0;
            let pushed = so3_trace_density(1.0 + 2.0 * t.cos()) * 2.0 * t.sin();
            assert!((pushed - so3_angle_density(t)).abs() < 1e-8);
        }
    }

    #[test]
    fn haar_angles_follow_the_law() {
        let rots = sample_so3(4000, 3);
        let mut angles: Vec<f64> =
            rots.iter().map(|g| (0.5 * (g.trace() - 1.0)).clamp(-1.0, 1.0).acos()).collect();
        angles.sort_by(f64::total_cmp);
        let n = angles.len() as f64;
        let ks = angles
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let f = (t - t.sin()) / PI;
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 1.63 / n.sqrt(), "{ks}");
        for g in &rots[..20] {
            assert!((g * g.transpose() - Matrix3::identity()).norm() < 1e-12);
            assert!((g.determinant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn legendre_coefficients() {
        assert_eq!(arccos_legendre_coeff(2), 0.0);
        assert_eq!(halfsphere_coeff(2), 0.0);
        assert!((arccos_legendre_coeff(1) - PI / 4.0).abs() < 1e-15);
        for ell in 1..=21 {
            assert!((arccos_legendre_coeff(ell) - arccos_legendre_quadrature(ell)).abs() < 1e-12, "ℓ={ell}");
            assert!((halfsphere_coeff(ell) - halfsphere_quadrature(ell)).abs() < 1e-12, "ℓ={ell}");
            if ell % 2 == 1 {
                let rel = 0.5 * ((2 * ell + 1) as f64).sqrt() * arccos_legendre_coeff(ell).sqrt();
                assert!((halfsphere_coeff(ell).abs() - rel).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn arccos_series_is_summable() {
        let mut sum = 0.0;
        let mut prev = f64::INFINITY;
        for ell in (1..=10_000).step_by(2) {
            let term = ((2 * ell + 1) as f64).sqrt() * arccos_legendre_coeff(ell);
            assert!(term > 0.0 && term < prev);
            prev = term;
            sum += term;
        }
        // Terms decay like ℓ^{−5/2}: the remainder past 10⁴ is below 1e−5.
        assert!(prev < 1e-9 && sum.is_finite());
    }

    #[test]
    fn verdicts_by_coefficients() {
        assert_eq!(kernel_verdict(Space::S2, 50).unwrap().verdict, Verdict::RestrictedNegativeDefinite);
        assert_eq!(kernel_verdict(Space::Su2, 50).unwrap().verdict, Verdict::RestrictedNegativeDefinite);
        let so3 = kernel_verdict(Space::So3, 50).unwrap();
        assert_eq!(so3.verdict, Verdict::Not);
        assert_eq!(so3.witness, Some(2));
    }

    #[test]
    fn s2_coefficients_match_quadrature() {
        let rule = gauss_legendre(200);
        for ell in 0..12 {
            let q = rule.integrate(0.0, PI, |t| t * legendre(ell, t.cos()) * 0.5 * t.sin());
            assert!((alpha(Space::S2, ell) - q).abs() < 1e-10, "ℓ={ell}");
        }
    }

    #[test]
    fn gram_on_the_sphere_is_negative() {
        let v = random_gram_test(Space::S2, 50, 1).unwrap();
        assert_eq!(v.verdict, Verdict::RestrictedNegativeDefinite, "{}", v.max_eigenvalue);
    }

    #[test]
    fn gram_on_so3_finds_a_positive_direction() {
        let found = (0..20).any(|seed| random_gram_test(Space::So3, 200, seed).unwrap().verdict == Verdict::Not);
        assert!(found);
    }

    #[test]
    fn two_antipodal_points() {
        let pts = [Vector3::new(0.0, 0.0, 1.0), Vector3::new(0.0, 0.0, -1.0)];
        let v = gram_restricted_nd_test(&pts, geodesic_distance).unwrap();
        assert!((v.max_eigenvalue + PI).abs() < 1e-12);
    }

    #[test]
    fn coincident_points_are_flagged() {
        let p = Vector3::new(1.0, 0.0, 0.0);
        let v = gram_restricted_nd_test(&[p, p, Vector3::new(0.0, 1.0, 0.0)], geodesic_distance).unwrap();
        assert_eq!(v.coincident_pairs, 1);
    }
}
