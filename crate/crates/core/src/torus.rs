//! Arithmetic random waves on the flat torus `R²/Z²`.
//!
//! For an energy index `n` (a sum of two squares) the frequency set is
//! `Λ_n = {λ ∈ Z² : |λ|² = n}` and the field is
//! `T_n(x) = N_n^{−1/2} Σ_λ a_λ e^{2πi⟨λ,x⟩}` with `a_{−λ} = conj(a_λ)`.

use crate::error::{Error, Result};
use crate::geomstats::contour::marching_squares;
use crate::sphere::mix_seed;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use std::f64::consts::PI;

const TORUS_STREAM: u64 = 0x7072_7573_0000_0000;

/// Synthesis switches from direct summation to FFT above this many operations.
pub const DIRECT_SYNTHESIS_LIMIT: usize = 100_000_000;

/// `Λ_n`, sorted lexicographically.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSet {
    pub n: u64,
    pub points: Vec<(i64, i64)>,
    pub mu_hat4: f64,
}

impl LatticeSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `E_n = 4π²n`.
    pub fn energy(&self) -> f64 {
        4.0 * PI * PI * self.n as f64
    }

    /// Representatives of `Λ_n / ±`: `λ₂ > 0`, or `λ₂ = 0` and `λ₁ > 0`.
    pub fn half_plane(&self) -> Vec<(i64, i64)> {
        self.points.iter().copied().filter(|&(a, b)| b > 0 || (b == 0 && a > 0)).collect()
    }

    /// `μ̂_n(4)` as an exact rational: `(1/N_n) Σ (λ₁⁴ − 6λ₁²λ₂² + λ₂⁴)/n²`.
    pub fn mu_hat4_exact(&self) -> BigRational {
        let num: BigInt = self
            .points
            .iter()
            .map(|&(a, b)| {
                let (a2, b2) = (BigInt::from(a * a), BigInt::from(b * b));
                &a2 * &a2 - BigInt::from(6) * &a2 * &b2 + &b2 * &b2
            })
            .sum();
        let den = BigInt::from(self.n) * BigInt::from(self.n) * BigInt::from(self.points.len());
        BigRational::new(num, den)
    }
}

/// Enumerate `Λ_n` by scanning `a ∈ [0, √n]`.
pub fn lattice_points(n: u64) -> Result<LatticeSet> {
    if n == 0 {
        return Err(Error::config("n", "energy index must be positive"));
    }
    let mut points = Vec::new();
    let mut a = 0u64;
    while a * a <= n {
        let rest = n - a * a;
        let b = rest.isqrt();
        if b * b == rest {
            let (a, b) = (a as i64, b as i64);
            for (x, y) in [(a, b), (-a, b), (a, -b), (-a, -b)] {
                points.push((x, y));
            }
        }
        a += 1;
    }
    points.sort_unstable();
    points.dedup();
    if points.is_empty() {
        return Err(Error::NotRepresentable(n));
    }
    let mut set = LatticeSet { n, points, mu_hat4: 0.0 };
    set.mu_hat4 = mu_hat4(&set);
    Ok(set)
}

/// `μ̂_n(4) = (1/N_n) Σ_λ e^{4i·arg λ}`. The imaginary part cancels by symmetry.
pub fn mu_hat4(lattice: &LatticeSet) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for &(a, b) in &lattice.points {
        let t = 4.0 * (b as f64).atan2(a as f64);
        re += t.cos();
        im += t.sin();
    }
    let n = lattice.len() as f64;
    debug_assert!((im / n).abs() < 1e-12);
    re / n
}

/// Energies `n ≤ max_n` that are sums of two squares, with `N_n`.
pub fn representable_energies(max_n: u64) -> Vec<(u64, usize)> {
    let mut counts = vec![0usize; max_n as usize + 1];
    let mut a = 0u64;
    while a * a <= max_n {
        let mut b = 0u64;
        while a * a + b * b <= max_n {
            let mult = match (a, b) {
                (0, 0) => 1,
                (0, _) | (_, 0) => 2,
                _ => 4,
            };
            counts[(a * a + b * b) as usize] += mult;
            b += 1;
        }
        a += 1;
    }
    counts.into_iter().enumerate().skip(1).filter(|&(_, c)| c > 0).map(|(n, c)| (n as u64, c)).collect()
}

/// Smallest `n ≤ max_n` with `N_n ≥ min_points`.
pub fn smallest_energy_with(min_points: usize, max_n: u64) -> Option<u64> {
    representable_energies(max_n).into_iter().find(|&(_, c)| c >= min_points).map(|(n, _)| n)
}

/// Independent coefficients of one replicate, aligned with [`LatticeSet::half_plane`].
#[derive(Debug, Clone, PartialEq)]
pub struct ToralCoeffs {
    pub n: u64,
    pub half_coeffs: Vec<Complex<f64>>,
    pub seed: u64,
    pub replicate: u64,
}

impl ToralCoeffs {
    /// All `N_n` coefficients in the order of `lattice.points`.
    pub fn full(&self, lattice: &LatticeSet) -> Vec<Complex<f64>> {
        let half = lattice.half_plane();
        lattice
            .points
            .iter()
            .map(|p| match half.iter().position(|h| h == p) {
                Some(k) => self.half_coeffs[k],
                None => {
                    let k = half.iter().position(|h| *h == (-p.0, -p.1)).expect("lattice closed under negation");
                    self.half_coeffs[k].conj()
                }
            })
            .collect()
    }
}

/// Draw `a_λ = x + iy`, `x, y ~ N(0, 1/2)` independent, for each half-plane frequency.
pub fn sample_toral_coeffs(lattice: &LatticeSet, seed: u64, replicate: u64) -> ToralCoeffs {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed ^ TORUS_STREAM, lattice.n));
    rng.set_stream(replicate);
    let sd = std::f64::consts::FRAC_1_SQRT_2;
    let half_coeffs = (0..lattice.len() / 2)
        .map(|_| {
            let x: f64 = StandardNormal.sample(&mut rng);
            let y: f64 = StandardNormal.sample(&mut rng);
            Complex::new(sd * x, sd * y)
        })
        .collect();
    ToralCoeffs { n: lattice.n, half_coeffs, seed, replicate }
}

/// Field on the uniform `size × size` grid; `values[i·size + j]` sits at `(i/size, j/size)`.
#[derive(Debug, Clone)]
pub struct ToralGrid {
    pub n: u64,
    pub size: usize,
    pub values: Vec<f64>,
    /// Normalized derivatives `∂_j T / √(E_n/2)`.
    pub grad1: Option<Vec<f64>>,
    pub grad2: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthesisMethod {
    Auto,
    Direct,
    Fft,
}

/// Smallest admissible grid size for energy `n`.
pub fn min_grid_size(n: u64) -> usize {
    4 * (n as f64).sqrt().ceil() as usize
}

/// Grid size giving `samples` points per wavelength `1/√n`, never below the floor.
pub fn grid_size_for(n: u64, samples: f64) -> usize {
    ((samples * (n as f64).sqrt()).ceil() as usize).max(min_grid_size(n))
}

pub fn synthesize_torus(
    coeffs: &ToralCoeffs,
    lattice: &LatticeSet,
    size: usize,
    with_gradient: bool,
    method: SynthesisMethod,
) -> Result<ToralGrid> {
    if coeffs.n != lattice.n || coeffs.half_coeffs.len() * 2 != lattice.len() {
        return Err(Error::config("coeffs", "coefficients do not match the lattice"));
    }
    if size < min_grid_size(lattice.n) {
        return Err(Error::config("size", format!("{size} < 4·ceil(√n) = {}", min_grid_size(lattice.n))));
    }
    let half = lattice.half_plane();
    let norm = 1.0 / (lattice.len() as f64).sqrt();
    let grad_norm = 1.0 / (0.5 * lattice.energy()).sqrt();
    let direct = match method {
        SynthesisMethod::Direct => true,
        SynthesisMethod::Fft => false,
        SynthesisMethod::Auto => lattice.len() * size * size <= DIRECT_SYNTHESIS_LIMIT,
    };
    // Each component is 2·Re(Σ_half w_λ a_λ e^{2πi⟨λ,x⟩}) with a per-mode weight w_λ.
    let component = |weight: &dyn Fn(i64, i64) -> Complex<f64>| {
        let modes: Vec<((i64, i64), Complex<f64>)> =
            half.iter().zip(&coeffs.half_coeffs).map(|(&(a, b), &c)| ((a, b), 2.0 * c * weight(a, b))).collect();
        if direct {
            direct_sum(&modes, size)
        } else {
            fft_sum(&modes, size)
        }
    };
    let values = component(&|_, _| Complex::new(norm, 0.0));
    let (grad1, grad2) = if with_gradient {
        let s = 2.0 * PI * norm * grad_norm;
        (
            Some(component(&|a, _| Complex::new(0.0, s * a as f64))),
            Some(component(&|_, b| Complex::new(0.0, s * b as f64))),
        )
    } else {
        (None, None)
    };
    Ok(ToralGrid { n: lattice.n, size, values, grad1, grad2 })
}

/// `Re Σ c_λ e^{2πi(λ₁i + λ₂j)/size}` by separable direct summation.
fn direct_sum(modes: &[((i64, i64), Complex<f64>)], size: usize) -> Vec<f64> {
    let phase = |k: i64| -> Vec<Complex<f64>> {
        (0..size).map(|i| Complex::from_polar(1.0, 2.0 * PI * ((k * i as i64).rem_euclid(size as i64)) as f64 / size as f64)).collect()
    };
    let mut out = vec![0.0; size * size];
    for &((a, b), c) in modes {
        let (ea, eb) = (phase(a), phase(b));
        for i in 0..size {
            let ci = c * ea[i];
            let row = &mut out[i * size..(i + 1) * size];
            for (v, e) in row.iter_mut().zip(&eb) {
                *v += ci.re * e.re - ci.im * e.im;
            }
        }
    }
    out
}

/// Same sum by a 2-D inverse FFT; exact because `size > 2·max|λ_i|` keeps modes distinct.
fn fft_sum(modes: &[((i64, i64), Complex<f64>)], size: usize) -> Vec<f64> {
    let mut spec = vec![Complex::new(0.0, 0.0); size * size];
    let wrap = |k: i64| k.rem_euclid(size as i64) as usize;
    for &((a, b), c) in modes {
        // Real part of Σ c e^{iθ} = ½ Σ (c e^{iθ} + conj(c) e^{−iθ}).
        spec[wrap(a) * size + wrap(b)] += 0.5 * c;
        spec[wrap(-a) * size + wrap(-b)] += 0.5 * c.conj();
    }
    let fft = FftPlanner::new().plan_fft_inverse(size);
    for row in spec.chunks_mut(size) {
        fft.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); size];
    for j in 0..size {
        for i in 0..size {
            col[i] = spec[i * size + j];
        }
        fft.process(&mut col);
        for i in 0..size {
            spec[i * size + j] = col[i];
        }
    }
    spec.into_iter().map(|c| c.re).collect()
}

/// Length of `{T_n = z}` in the unit square with periodic boundary (marching squares).
pub fn level_length_torus(grid: &ToralGrid, z: f64) -> f64 {
    flat_length(&grid.values, grid.size, z)
}

fn flat_length(values: &[f64], size: usize, z: f64) -> f64 {
    let h = 1.0 / size as f64;
    marching_squares(
        values,
        size,
        size,
        true,
        z,
        |i, j, u, v| [(i as f64 + u) * h, (j as f64 + v) * h],
        |p: [f64; 2], q: [f64; 2]| (p[0] - q[0]).hypot(p[1] - q[1]),
    )
}

/// Level length with the `O(h²)` discretization error removed per realization:
/// `(4 L_h − L_{2h})/3`, where `L_{2h}` uses every other grid point. Needs an even
/// grid size.
pub fn level_length_torus_extrapolated(grid: &ToralGrid, z: f64) -> Result<f64> {
    if grid.size % 2 == 1 {
        return Err(Error::config("size", format!("extrapolation needs an even grid size, got {}", grid.size)));
    }
    let half = grid.size / 2;
    let coarse: Vec<f64> = (0..half * half).map(|k| grid.values[2 * (k / half) * grid.size + 2 * (k % half)]).collect();
    let fine = flat_length(&grid.values, grid.size, z);
    Ok((4.0 * fine - flat_length(&coarse, half, z)) / 3.0)
}

pub fn nodal_length_torus(grid: &ToralGrid) -> f64 {
    level_length_torus(grid, 0.0)
}

/// `H = (n√(N_n/2))^{−1} Σ_{half}(|a_λ|² − 1)(n, λ₁², λ₂², λ₁λ₂)`.
pub fn h_vector(coeffs: &ToralCoeffs, lattice: &LatticeSet) -> [f64; 4] {
    let n = lattice.n as f64;
    let scale = 1.0 / (n * (0.5 * lattice.len() as f64).sqrt());
    let mut h = [0.0; 4];
    for (&(a, b), c) in lattice.half_plane().iter().zip(&coeffs.half_coeffs) {
        let w = c.norm_sqr() - 1.0;
        let (a, b) = (a as f64, b as f64);
        h[0] += w * n;
        h[1] += w * a * a;
        h[2] += w * b * b;
        h[3] += w * a * b;
    }
    h.map(|v| v * scale)
}

/// Draws of `M_η = (2 − (1+η)X₁² − (1−η)X₂²) / (2√(1+η²))`.
pub fn sample_m_eta(eta: f64, seed: u64, count: usize) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::config("eta", format!("{eta} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, eta.to_bits()));
    let scale = 1.0 / (2.0 * (1.0 + eta * eta).sqrt());
    Ok((0..count)
        .map(|_| {
            let x1: f64 = StandardNormal.sample(&mut rng);
            let x2: f64 = StandardNormal.sample(&mut rng);
            scale * (2.0 - (1.0 + eta) * x1 * x1 - (1.0 - eta) * x2 * x2)
        })
        .collect())
}

/// Exact `μ̂_n(4)` converted to `f64`; agrees with [`mu_hat4`] to rounding.
pub fn mu_hat4_rational_f64(lattice: &LatticeSet) -> f64 {
    lattice.mu_hat4_exact().to_f64().expect("bounded rational")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_lattices() {
        let l1 = lattice_points(1).unwrap();
        assert_eq!(l1.points, vec![(-1, 0), (0, -1), (0, 1), (1, 0)]);
        assert!((l1.mu_hat4 - 1.0).abs() < 1e-15);
        let l5 = lattice_points(5).unwrap();
        assert_eq!(l5.len(), 8);
        assert_eq!(l5.mu_hat4_exact(), BigRational::new((-7).into(), 25.into()));
        assert!((l5.mu_hat4 + 0.28).abs() < 1e-15);
        assert!(matches!(lattice_points(3), Err(Error::NotRepresentable(3))));
        assert_eq!(l5.half_plane().len(), 4);
    }

    #[test]
    fn lattice_symmetries() {
        for (n, count) in representable_energies(2000) {
            let l = lattice_points(n).unwrap();
            assert_eq!(l.len(), count);
            assert_eq!(l.len() % 4, 0);
            assert!(l.mu_hat4.abs() <= 1.0 + 1e-12);
            for &(a, b) in &l.points {
                assert!(l.points.contains(&(-a, -b)) && l.points.contains(&(b, a)));
            }
            assert!((l.mu_hat4 - mu_hat4_rational_f64(&l)).abs() < 1e-13);
        }
    }

    #[test]
    fn smallest_energy_with_24_points() {
        // Brute-force minimum: 325 = 5²·13 has (2+1)(1+1)·4 = 24 representations.
        assert_eq!(smallest_energy_with(24, 100_000), Some(325));
        assert_eq!(lattice_points(325).unwrap().len(), 24);
    }

    #[test]
    fn direct_and_fft_synthesis_agree() {
        let l = lattice_points(65).unwrap();
        let c = sample_toral_coeffs(&l, 3, 9);
        let size = grid_size_for(65, 6.0);
        let a = synthesize_torus(&c, &l, size, true, SynthesisMethod::Direct).unwrap();
        let b = synthesize_torus(&c, &l, size, true, SynthesisMethod::Fft).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-9);
        }
        for (x, y) in a.grad2.unwrap().iter().zip(b.grad2.as_ref().unwrap()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn synthesis_matches_definition() {
        let l = lattice_points(25).unwrap();
        let c = sample_toral_coeffs(&l, 1, 0);
        let full = c.full(&l);
        let size = min_grid_size(25);
        let g = synthesize_torus(&c, &l, size, false, SynthesisMethod::Auto).unwrap();
        let (i, j) = (7usize, 13usize);
        let x = (i as f64 / size as f64, j as f64 / size as f64);
        let sum: Complex<f64> = l
            .points
            .iter()
            .zip(&full)
            .map(|(&(a, b), &c)| c * Complex::from_polar(1.0, 2.0 * PI * (a as f64 * x.0 + b as f64 * x.1)))
            .sum();
        let want = sum / (l.len() as f64).sqrt();
        assert!(want.im.abs() < 1e-10);
        assert!((g.values[i * size + j] - want.re).abs() < 1e-12);
    }

    #[test]
    fn zero_coefficients_and_guards() {
        let l = lattice_points(5).unwrap();
        let mut c = sample_toral_coeffs(&l, 0, 0);
        c.half_coeffs.iter_mut().for_each(|a| *a = Complex::new(0.0, 0.0));
        let g = synthesize_torus(&c, &l, 16, false, SynthesisMethod::Auto).unwrap();
        assert!(g.values.iter().all(|&v| v == 0.0));
        assert!(synthesize_torus(&c, &l, 8, false, SynthesisMethod::Auto).is_err());
        assert!(h_vector(&sample_unit_modulus(&l), &l).iter().all(|v| v.abs() < 1e-15));
    }

    fn sample_unit_modulus(l: &LatticeSet) -> ToralCoeffs {
        let half_coeffs = (0..l.len() / 2).map(|k| Complex::from_polar(1.0, k as f64)).collect();
        ToralCoeffs { n: l.n, half_coeffs, seed: 0, replicate: 0 }
    }

    #[test]
    fn straight_nodal_lines() {
        // cos(2πx₁) has two vertical nodal lines.
        let size = 64;
        let values = (0..size * size).map(|k| (2.0 * PI * (k / size) as f64 / size as f64).cos()).collect();
        let g = ToralGrid { n: 1, size, values, grad1: None, grad2: None };
        assert!((nodal_length_torus(&g) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn m_eta_support() {
        for eta in [0.0, 0.28, 1.0] {
            let bound = 1.0 / (1.0f64 + eta * eta).sqrt();
            assert!(sample_m_eta(eta, 4, 10_000).unwrap().iter().all(|&m| m <= bound));
        }
        assert!(sample_m_eta(1.5, 0, 1).is_err());
    }
}
