//! Seeded synthesis of the degree-ℓ Gaussian eigenfunction on `S²`.
//!
//! The field is `T_ℓ = Σ_m a_{ℓ,m} Y_{ℓ,m}` in the real orthonormal basis
//!
//! * `Y_{ℓ,0} = P̄_ℓ^0(cos θ)`,
//! * `Y_{ℓ,m} = √2 P̄_ℓ^m(cos θ) cos(mφ)` and `Y_{ℓ,−m} = √2 P̄_ℓ^m(cos θ) sin(mφ)` for `m ≥ 1`,
//!
//! where `P̄_ℓ^m` are the fully normalized associated Legendre functions
//! (`2π ∫ P̄² dx = 1`). The coefficients are i.i.d. `N(0, 4π/(2ℓ+1))`, so that
//! `E[T_ℓ(x)²] = 1` and `Cov(T_ℓ(x), T_ℓ(y)) = P_ℓ(⟨x, y⟩)`. The complex basis
//! has the same law; fixing the real one avoids the conjugation constraint.
//!
//! Grids are Gauss–Legendre in `cos θ` and uniform in `φ`; each row is
//! synthesized with an inverse FFT.

mod legendre;

pub use legendre::normalized_legendre_row;

use crate::error::{Error, Result};
use crate::specfun::quadrature::gauss_legendre;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;
use std::sync::{Arc, Mutex, OnceLock};

/// SplitMix64 finalizer, used to fold several integers into one RNG seed.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Real-basis coefficients of one replicate.
///
/// Layout of `values`: index 0 holds `m = 0`; for `m ≥ 1`, index `2m−1` holds the
/// cosine coefficient `a_{ℓ,m}` and index `2m` the sine coefficient `a_{ℓ,−m}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicCoeffs {
    pub ell: usize,
    pub values: Vec<f64>,
    pub seed: u64,
    pub replicate: u64,
}

impl HarmonicCoeffs {
    pub fn variance(ell: usize) -> f64 {
        4.0 * PI / (2 * ell + 1) as f64
    }

    pub fn from_values(ell: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != 2 * ell + 1 {
            return Err(Error::config("coeffs", format!("expected {} values, got {}", 2 * ell + 1, values.len())));
        }
        Ok(HarmonicCoeffs { ell, values, seed: 0, replicate: 0 })
    }

    pub fn cos_part(&self, m: usize) -> f64 {
        if m == 0 {
            self.values[0]
        } else {
            self.values[2 * m - 1]
        }
    }

    pub fn sin_part(&self, m: usize) -> f64 {
        if m == 0 {
            0.0
        } else {
            self.values[2 * m]
        }
    }

    /// `∫ T_ℓ² = Σ a²` (orthonormal basis).
    pub fn squared_norm(&self) -> f64 {
        self.values.iter().map(|a| a * a).sum()
    }
}

/// Draw the `2ℓ+1` coefficients of replicate `replicate`. The generator is ChaCha8
/// seeded from `(seed, ℓ)` with `replicate` as its stream id, so every replicate is
/// an independent, schedule-free stream.
pub fn sample_coeffs(ell: usize, seed: u64, replicate: u64) -> Result<HarmonicCoeffs> {
    if ell == 0 {
        return Err(Error::config("ell", "degree 0 gives a constant field"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, ell as u64));
    rng.set_stream(replicate);
    let sd = HarmonicCoeffs::variance(ell).sqrt();
    let values = (0..2 * ell + 1)
        .map(|_| {
            let g: f64 = StandardNormal.sample(&mut rng);
            sd * g
        })
        .collect();
    Ok(HarmonicCoeffs { ell, values, seed, replicate })
}

/// Grid dimensions; `n_phi` must be even so that longitudes come in antipodal pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct GridSpec {
    pub n_theta: usize,
    pub n_phi: usize,
    pub with_gradient: bool,
}

impl GridSpec {
    /// Smallest grid above the anti-aliasing floor.
    pub fn minimal(ell: usize) -> Self {
        GridSpec { n_theta: 2 * (ell + 1), n_phi: 2 * (2 * ell + 1), with_gradient: false }
    }

    /// Grid with `samples` points per wavelength `2π/√(ℓ(ℓ+1))` along the equator
    /// and along meridians, never below the anti-aliasing floor.
    pub fn with_samples_per_wavelength(ell: usize, samples: f64) -> Self {
        let k = wavenumber(ell);
        let floor = GridSpec::minimal(ell);
        let mut n_phi = ((samples * k).ceil() as usize).max(floor.n_phi);
        n_phi += n_phi % 2;
        let n_theta = ((0.5 * samples * k).ceil() as usize).max(floor.n_theta);
        GridSpec { n_theta, n_phi, with_gradient: false }
    }

    /// The default grid for length estimation: 6 samples per wavelength.
    pub fn for_length(ell: usize) -> Self {
        GridSpec::with_samples_per_wavelength(ell, 6.0)
    }

    pub fn gradient(mut self, on: bool) -> Self {
        self.with_gradient = on;
        self
    }

    pub fn validate(&self, ell: usize) -> Result<()> {
        if self.n_theta < 2 * (ell + 1) {
            return Err(Error::config("n_theta", format!("{} < 2(ℓ+1) = {}", self.n_theta, 2 * (ell + 1))));
        }
        if self.n_phi < 2 * (2 * ell + 1) {
            return Err(Error::config("n_phi", format!("{} < 2(2ℓ+1) = {}", self.n_phi, 2 * (2 * ell + 1))));
        }
        if self.n_phi % 2 == 1 {
            return Err(Error::config("n_phi", "must be even"));
        }
        Ok(())
    }

    /// Samples per wavelength along the equator and along meridians (the smaller one).
    pub fn samples_per_wavelength(&self, ell: usize) -> f64 {
        let k = wavenumber(ell);
        (self.n_phi as f64 / k).min(2.0 * self.n_theta as f64 / k)
    }
}

/// `√(ℓ(ℓ+1))`.
pub fn wavenumber(ell: usize) -> f64 {
    ((ell * (ell + 1)) as f64).sqrt()
}

/// Precomputed per-(ℓ, grid) tables: nodes, weights, `P̄_ℓ^m` and `dP̄_ℓ^m/dθ` per row,
/// and the FFT plan. Immutable and shared across replicates.
pub struct SphereBasis {
    pub ell: usize,
    pub spec: GridSpec,
    /// `θ_i`, ascending (north to south).
    pub theta: Vec<f64>,
    pub cos_theta: Vec<f64>,
    pub sin_theta: Vec<f64>,
    /// Area weight of each grid cell in row `i`: `w_i · 2π / n_phi`.
    pub cell_weight: Vec<f64>,
    plm: Vec<f64>,
    dplm: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SphereBasis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SphereBasis").field("ell", &self.ell).field("spec", &self.spec).finish()
    }
}

type BasisKey = (usize, usize, usize);
static BASIS_CACHE: OnceLock<Mutex<HashMap<BasisKey, Arc<SphereBasis>>>> = OnceLock::new();

impl SphereBasis {
    pub fn new(ell: usize, spec: GridSpec) -> Result<Self> {
        spec.validate(ell)?;
        let rule = gauss_legendre(spec.n_theta);
        // Rule nodes ascend in x = cos θ; rows run north to south, so reverse.
        let cos_theta: Vec<f64> = rule.nodes.iter().rev().copied().collect();
        let weights: Vec<f64> = rule.weights.iter().rev().copied().collect();
        let theta: Vec<f64> = cos_theta.iter().map(|x| x.acos()).collect();
        let sin_theta: Vec<f64> = theta.iter().map(|t| t.sin()).collect();
        let dphi = 2.0 * PI / spec.n_phi as f64;
        let cell_weight = weights.iter().map(|w| w * dphi).collect();
        let stride = ell + 1;
        let mut plm = vec![0.0; spec.n_theta * stride];
        let mut dplm = vec![0.0; spec.n_theta * stride];
        for i in 0..spec.n_theta {
            let (p, dp) = normalized_legendre_row(ell, cos_theta[i], sin_theta[i]);
            plm[i * stride..(i + 1) * stride].copy_from_slice(&p);
            dplm[i * stride..(i + 1) * stride].copy_from_slice(&dp);
        }
        let fft = FftPlanner::new().plan_fft_inverse(spec.n_phi);
        Ok(SphereBasis { ell, spec, theta, cos_theta, sin_theta, cell_weight, plm, dplm, fft })
    }

    /// Shared instance from a process-wide cache (the gradient flag does not affect the tables).
    pub fn shared(ell: usize, spec: GridSpec) -> Result<Arc<SphereBasis>> {
        let key = (ell, spec.n_theta, spec.n_phi);
        let cache = BASIS_CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(b) = cache.lock().unwrap().get(&key) {
            return Ok(Arc::clone(b));
        }
        let basis = Arc::new(SphereBasis::new(ell, GridSpec { with_gradient: false, ..spec })?);
        Ok(Arc::clone(cache.lock().unwrap().entry(key).or_insert(basis)))
    }

    pub fn n_theta(&self) -> usize {
        self.spec.n_theta
    }

    pub fn n_phi(&self) -> usize {
        self.spec.n_phi
    }

    pub fn phi(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.spec.n_phi as f64
    }

    pub fn plm(&self, row: usize) -> &[f64] {
        let s = self.ell + 1;
        &self.plm[row * s..(row + 1) * s]
    }

    pub fn dplm(&self, row: usize) -> &[f64] {
        let s = self.ell + 1;
        &self.dplm[row * s..(row + 1) * s]
    }

    /// `P̄_ℓ^0(±1) = √((2ℓ+1)/(4π))`; only `m = 0` survives at the poles.
    fn pole_factor(&self) -> f64 {
        ((2 * self.ell + 1) as f64 / (4.0 * PI)).sqrt()
    }
}

/// Sampled field on a Gauss–Legendre × uniform grid, stored row-major (`i·n_phi + j`).
#[derive(Debug, Clone)]
pub struct SphereGrid {
    pub basis: Arc<SphereBasis>,
    pub values: Vec<f64>,
    /// Normalized derivatives `∂̃₁ = ∂_θ/√(E/2)` and `∂̃₂ = (sin θ)^{−1}∂_φ/√(E/2)`.
    pub grad1: Option<Vec<f64>>,
    pub grad2: Option<Vec<f64>>,
    /// Field values at the north and south poles.
    pub poles: (f64, f64),
}

impl SphereGrid {
    pub fn ell(&self) -> usize {
        self.basis.ell
    }

    pub fn n_theta(&self) -> usize {
        self.basis.n_theta()
    }

    pub fn n_phi(&self) -> usize {
        self.basis.n_phi()
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_phi() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n_phi();
        &self.values[i * n..(i + 1) * n]
    }

    /// Grid of an arbitrary function `f(θ, φ)` on the nodes of `basis`.
    pub fn from_fn(basis: Arc<SphereBasis>, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(basis.n_theta() * basis.n_phi());
        for i in 0..basis.n_theta() {
            for j in 0..basis.n_phi() {
                values.push(f(basis.theta[i], basis.phi(j)));
            }
        }
        let poles = (f(0.0, 0.0), f(PI, 0.0));
        SphereGrid { basis, values, grad1: None, grad2: None, poles }
    }

    /// `Σ weights · g(value)` over the grid.
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        let n = self.n_phi();
        let mut total = 0.0;
        for i in 0..self.n_theta() {
            let row: f64 = self.values[i * n..(i + 1) * n].iter().map(|&v| g(v)).sum();
            total += self.basis.cell_weight[i] * row;
        }
        total
    }

    /// Pointwise negation (the field `−T`).
    pub fn negated(&self) -> Self {
        SphereGrid {
            basis: Arc::clone(&self.basis),
            values: self.values.iter().map(|v| -v).collect(),
            grad1: self.grad1.as_ref().map(|g| g.iter().map(|v| -v).collect()),
            grad2: self.grad2.as_ref().map(|g| g.iter().map(|v| -v).collect()),
            poles: (-self.poles.0, -self.poles.1),
        }
    }

    /// Binary dump: header `ℓ, n_theta, n_phi, seed` as little-endian u64, then the
    /// row-major values as little-endian f64.
    pub fn write_binary(&self, mut out: impl Write, seed: u64) -> Result<()> {
        for h in [self.ell() as u64, self.n_theta() as u64, self.n_phi() as u64, seed] {
            out.write_all(&h.to_le_bytes())?;
        }
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }
}

/// Synthesize `coeffs` on `basis`.
pub fn synthesize_on(basis: &Arc<SphereBasis>, coeffs: &HarmonicCoeffs, with_gradient: bool) -> Result<SphereGrid> {
    let ell = basis.ell;
    if coeffs.ell != ell {
        return Err(Error::config("ell", format!("coefficients have ℓ={}, grid has ℓ={ell}", coeffs.ell)));
    }
    let n_theta = basis.n_theta();
    let n = basis.n_phi();
    let mut values = vec![0.0; n_theta * n];
    let mut grad1 = if with_gradient { vec![0.0; n_theta * n] } else { Vec::new() };
    let mut grad2 = if with_gradient { vec![0.0; n_theta * n] } else { Vec::new() };
    let grad_scale = 1.0 / (0.5 * (ell * (ell + 1)) as f64).sqrt();

    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let mut scratch = vec![Complex::new(0.0, 0.0); basis.fft.get_inplace_scratch_len()];
    let sqrt2 = std::f64::consts::SQRT_2;

    // Hermitian spectrum of one real row: X_0 = c_0, X_m = (c_m − i s_m)/2, X_{n−m} = conj.
    // Two rows are packed into one transform as X^a + i X^b.
    let fill = |buf: &mut [Complex<f64>], row_a: Option<(usize, Kind)>, row_b: Option<(usize, Kind)>| {
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for (slot, row) in [(Complex::new(1.0, 0.0), row_a), (Complex::new(0.0, 1.0), row_b)] {
            let Some((i, kind)) = row else { continue };
            let table = match kind {
                Kind::Value | Kind::Azimuthal => basis.plm(i),
                Kind::Polar => basis.dplm(i),
            };
            for m in 0..=ell {
                let p = table[m];
                let (mut c, mut s) = if m == 0 {
                    (coeffs.cos_part(0) * p, 0.0)
                } else {
                    (sqrt2 * coeffs.cos_part(m) * p, sqrt2 * coeffs.sin_part(m) * p)
                };
                if kind == Kind::Azimuthal {
                    // ∂_φ (c cos mφ + s sin mφ) = m s cos mφ − m c sin mφ, then divide by sin θ.
                    let mf = m as f64 / basis.sin_theta[i];
                    (c, s) = (mf * s, -mf * c);
                }
                if m == 0 {
                    buf[0] += slot * c;
                } else {
                    let x = Complex::new(0.5 * c, -0.5 * s);
                    buf[m] += slot * x;
                    buf[n - m] += slot * x.conj();
                }
            }
        }
    };

    let kinds: &[Kind] = if with_gradient { &[Kind::Value, Kind::Polar, Kind::Azimuthal] } else { &[Kind::Value] };
    for &kind in kinds {
        let target: &mut Vec<f64> = match kind {
            Kind::Value => &mut values,
            Kind::Polar => &mut grad1,
            Kind::Azimuthal => &mut grad2,
        };
        let scale = if kind == Kind::Value { 1.0 } else { grad_scale };
        let mut i = 0;
        while i < n_theta {
            let second = if i + 1 < n_theta { Some((i + 1, kind)) } else { None };
            fill(&mut buf, Some((i, kind)), second);
            basis.fft.process_with_scratch(&mut buf, &mut scratch);
            for j in 0..n {
                target[i * n + j] = scale * buf[j].re;
            }
            if second.is_some() {
                for j in 0..n {
                    target[(i + 1) * n + j] = scale * buf[j].im;
                }
            }
            i += 2;
        }
    }

    let pole = coeffs.cos_part(0) * basis.pole_factor();
    let south = if ell % 2 == 0 { pole } else { -pole };
    Ok(SphereGrid {
        basis: Arc::clone(basis),
        values,
        grad1: with_gradient.then_some(grad1),
        grad2: with_gradient.then_some(grad2),
        poles: (pole, south),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Value,
    Polar,
    Azimuthal,
}

/// Synthesize on the grid `spec`, reusing cached tables.
pub fn synthesize(coeffs: &HarmonicCoeffs, spec: GridSpec) -> Result<SphereGrid> {
    let basis = SphereBasis::shared(coeffs.ell, spec)?;
    synthesize_on(&basis, coeffs, spec.with_gradient)
}

/// Field value and normalized gradient `(T, ∂̃₁T, ∂̃₂T)` at an arbitrary point `(θ, φ)`, `0 < θ < π`.
pub fn evaluate(coeffs: &HarmonicCoeffs, theta: f64, phi: f64) -> (f64, f64, f64) {
    let ell = coeffs.ell;
    let (p, dp) = normalized_legendre_row(ell, theta.cos(), theta.sin());
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut v = coeffs.cos_part(0) * p[0];
    let mut d1 = coeffs.cos_part(0) * dp[0];
    let mut d2 = 0.0;
    for m in 1..=ell {
        let (s, c) = (m as f64 * phi).sin_cos();
        let a = coeffs.cos_part(m);
        let b = coeffs.sin_part(m);
        v += sqrt2 * p[m] * (a * c + b * s);
        d1 += sqrt2 * dp[m] * (a * c + b * s);
        d2 += sqrt2 * p[m] * m as f64 * (b * c - a * s);
    }
    let scale = 1.0 / (0.5 * (ell * (ell + 1)) as f64).sqrt();
    (v, scale * d1, scale * d2 / theta.sin())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_quadrature_is_four_pi() {
        for ell in [1usize, 7, 40] {
            let basis = Arc::new(SphereBasis::new(ell, GridSpec::minimal(ell)).unwrap());
            let g = SphereGrid::from_fn(basis, |_, _| 1.0);
            assert!((g.integrate(|v| v) - 4.0 * PI).abs() < 1e-12);
        }
    }

    #[test]
    fn under_resolved_grid_is_rejected() {
        let spec = GridSpec { n_theta: 10, n_phi: 40, with_gradient: false };
        assert!(spec.validate(10).is_err());
        assert!(SphereBasis::new(10, spec).is_err());
        assert!(sample_coeffs(0, 1, 0).is_err());
    }

    #[test]
    fn synthesis_matches_pointwise_evaluation() {
        let ell = 13;
        let c = sample_coeffs(ell, 42, 3).unwrap();
        let spec = GridSpec::with_samples_per_wavelength(ell, 8.0).gradient(true);
        let grid = synthesize(&c, spec).unwrap();
        let b = &grid.basis;
        for &(i, j) in &[(0usize, 0usize), (5, 17), (b.n_theta() - 1, b.n_phi() - 1), (11, 3)] {
            let (v, g1, g2) = evaluate(&c, b.theta[i], b.phi(j));
            let k = i * b.n_phi() + j;
            assert!((grid.values[k] - v).abs() < 1e-12);
            assert!((grid.grad1.as_ref().unwrap()[k] - g1).abs() < 1e-11);
            assert!((grid.grad2.as_ref().unwrap()[k] - g2).abs() < 1e-11);
        }
    }

    #[test]
    fn poles_match_limit_of_rows() {
        let c = sample_coeffs(6, 9, 0).unwrap();
        let (n, s) = synthesize(&c, GridSpec::minimal(6)).unwrap().poles;
        let (vn, _, _) = evaluate(&c, 1e-11, 0.3);
        let (vs, _, _) = evaluate(&c, PI - 1e-11, 0.3);
        assert!((n - vn).abs() < 1e-9 && (s - vs).abs() < 1e-9);
    }

    #[test]
    fn coefficients_are_deterministic() {
        let a = sample_coeffs(10, 5, 77).unwrap();
        let b = sample_coeffs(10, 5, 77).unwrap();
        assert_eq!(a, b);
        let c = sample_coeffs(10, 5, 78).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn binary_dump_layout() {
        let c = sample_coeffs(2, 1, 0).unwrap();
        let g = synthesize(&c, GridSpec::minimal(2)).unwrap();
        let mut out = Vec::new();
        g.write_binary(&mut out, 1).unwrap();
        assert_eq!(out.len(), 32 + 8 * g.values.len());
        assert_eq!(u64::from_le_bytes(out[8..16].try_into().unwrap()), 6);
        assert_eq!(f64::from_le_bytes(out[32..40].try_into().unwrap()), g.values[0]);
    }
}
