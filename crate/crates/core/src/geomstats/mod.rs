//! Geometric functionals of a sampled spherical field.

pub mod contour;

use crate::chaos::ChaosTable;
use crate::error::{Error, Result};
use crate::specfun::{gauss_pdf, hermite};
use crate::sphere::{wavenumber, HarmonicCoeffs, SphereGrid};
use std::f64::consts::PI;

/// Minimum grid resolution accepted by [`level_length`], in samples per wavelength.
pub const MIN_SAMPLES_PER_WAVELENGTH: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalKind {
    Area,
    Defect,
    Length,
    Hermite(usize),
    SecondChaos,
}

impl std::fmt::Display for FunctionalKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FunctionalKind::Area => f.write_str("area"),
            FunctionalKind::Defect => f.write_str("defect"),
            FunctionalKind::Length => f.write_str("length"),
            FunctionalKind::Hermite(q) => write!(f, "hermite_{q}"),
            FunctionalKind::SecondChaos => f.write_str("second_chaos"),
        }
    }
}

/// One measured functional of one replicate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct FunctionalSample {
    pub kind: FunctionalKind,
    pub ell: usize,
    pub z: f64,
    pub value: f64,
    pub n_theta: usize,
    pub n_phi: usize,
}

impl FunctionalSample {
    pub fn measure(grid: &SphereGrid, kind: FunctionalKind, z: f64) -> Result<Self> {
        let value = match kind {
            FunctionalKind::Area => excursion_area(grid, z),
            FunctionalKind::Defect => defect(grid),
            FunctionalKind::Length => level_length(grid, z)?,
            FunctionalKind::Hermite(q) => hermite_functional(grid, q),
            FunctionalKind::SecondChaos => second_chaos_from_grid(grid, z, &ChaosTable::default())?,
        };
        Ok(FunctionalSample { kind, ell: grid.ell(), z, value, n_theta: grid.n_theta(), n_phi: grid.n_phi() })
    }
}

/// Area of `{T > z}`: `Σ weights · 1(T > z)`.
pub fn excursion_area(grid: &SphereGrid, z: f64) -> f64 {
    grid.integrate(|v| if v > z { 1.0 } else { 0.0 })
}

/// Area where `T > 0` minus area where `T < 0`.
pub fn defect(grid: &SphereGrid) -> f64 {
    2.0 * excursion_area(grid, 0.0) - 4.0 * PI
}

/// `∫ H_q(T)` by the grid quadrature.
pub fn hermite_functional(grid: &SphereGrid, q: usize) -> f64 {
    grid.integrate(|v| hermite(q, v))
}

fn unit_vector(theta: f64, phi: f64) -> [f64; 3] {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [st * cp, st * sp, ct]
}

/// Geodesic distance between unit vectors via the chord, `2 asin(|p − q|/2)`.
fn geodesic(p: [f64; 3], q: [f64; 3]) -> f64 {
    let chord = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
    2.0 * (0.5 * chord).min(1.0).asin()
}

/// Length of the level set `{T = z}` by marching squares on the `(θ, φ)` grid.
///
/// Crossings are interpolated linearly in `(θ, φ)` within each cell and joined by
/// great-circle segments. The caps between each pole and its nearest row are fans of
/// triangles sharing the pole as a vertex.
pub fn level_length(grid: &SphereGrid, z: f64) -> Result<f64> {
    let ell = grid.ell();
    let spw = grid.basis.spec.samples_per_wavelength(ell);
    if spw < MIN_SAMPLES_PER_WAVELENGTH {
        return Err(Error::config(
            "grid",
            format!("{spw:.2} samples per wavelength < {MIN_SAMPLES_PER_WAVELENGTH} (wavelength 2π/{:.3})", wavenumber(ell)),
        ));
    }
    let basis = &grid.basis;
    let (rows, cols) = (grid.n_theta(), grid.n_phi());
    let dphi = 2.0 * PI / cols as f64;
    let theta = &basis.theta;
    let body = contour::marching_squares(
        &grid.values,
        rows,
        cols,
        false,
        z,
        |i, j, u, v| unit_vector(theta[i] + u * (theta[i + 1] - theta[i]), (j as f64 + v) * dphi),
        geodesic,
    );
    let north = cap_length(grid.row(0), theta[0], 0.0, grid.poles.0, dphi, z);
    let south = cap_length(grid.row(rows - 1), theta[rows - 1], PI, grid.poles.1, dphi, z);
    Ok(body + north + south)
}

/// Level-set length inside the fan of triangles `(pole, (ring, j), (ring, j+1))`.
fn cap_length(ring: &[f64], ring_theta: f64, pole_theta: f64, pole_value: f64, dphi: f64, z: f64) -> f64 {
    let n = ring.len();
    let pole_above = pole_value > z;
    let spoke = |j: usize| {
        let t = (z - pole_value) / (ring[j] - pole_value);
        unit_vector(pole_theta + t * (ring_theta - pole_theta), j as f64 * dphi)
    };
    let mut total = 0.0;
    for j in 0..n {
        let j1 = (j + 1) % n;
        let (a, b) = (ring[j] > z, ring[j1] > z);
        let rim = || {
            let t = (z - ring[j]) / (ring[j1] - ring[j]);
            unit_vector(ring_theta, (j as f64 + t) * dphi)
        };
        // Each triangle is crossed by at most one segment, joining the two edges whose
        // endpoints disagree.
        total += match (a == pole_above, b == pole_above) {
            (true, true) => 0.0,
            (false, false) => geodesic(spoke(j), spoke(j1)),
            (false, true) => geodesic(spoke(j), rim()),
            (true, false) => geodesic(rim(), spoke(j1)),
        };
    }
    total
}

/// `√(E/2)·√(π/8)·φ(z)·z²·Σ_m (a_m² − 4π/(2ℓ+1))`: the second-order chaos component
/// of the level length, computed from the coefficients alone.
pub fn second_chaos_length(coeffs: &HarmonicCoeffs, z: f64) -> f64 {
    let ell = coeffs.ell;
    let var = HarmonicCoeffs::variance(ell);
    let centred: f64 = coeffs.values.iter().map(|a| a * a - var).sum();
    (0.5 * (ell * (ell + 1)) as f64).sqrt() * (PI / 8.0).sqrt() * gauss_pdf(z) * z * z * centred
}

/// Order-`q` chaos component of the level length, assembled from the grid values
/// and normalized gradient through the coefficient table. Needs a gradient grid.
pub fn chaos_length_from_grid(grid: &SphereGrid, q: usize, z: f64, table: &ChaosTable) -> Result<f64> {
    let (Some(g1), Some(g2)) = (&grid.grad1, &grid.grad2) else {
        return Err(Error::config("grid", "chaos projection needs a gradient grid"));
    };
    let terms = table.length_terms(q, z);
    let n = grid.n_phi();
    let mut total = 0.0;
    for i in 0..grid.n_theta() {
        let mut row = 0.0;
        for j in i * n..(i + 1) * n {
            let (v, a, b) = (grid.values[j], g1[j], g2[j]);
            for t in &terms {
                row += t.coefficient * hermite(t.value_order, v) * hermite(t.grad1_order, a) * hermite(t.grad2_order, b);
            }
        }
        total += grid.basis.cell_weight[i] * row;
    }
    let ell = grid.ell();
    Ok((0.5 * (ell * (ell + 1)) as f64).sqrt() * total)
}

/// [`chaos_length_from_grid`] at order two.
pub fn second_chaos_from_grid(grid: &SphereGrid, z: f64, table: &ChaosTable) -> Result<f64> {
    chaos_length_from_grid(grid, 2, z, table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{sample_coeffs, synthesize, GridSpec, SphereBasis};
    use std::sync::Arc;

    fn analytic(ell: usize, spec: GridSpec, f: impl Fn(f64, f64) -> f64) -> SphereGrid {
        SphereGrid::from_fn(Arc::new(SphereBasis::new(ell, spec).unwrap()), f)
    }

    #[test]
    fn equator_length() {
        let g = analytic(20, GridSpec::for_length(20), |t, _| t.cos());
        let len = level_length(&g, 0.0).unwrap();
        assert!((len / (2.0 * PI) - 1.0).abs() < 5e-3, "{len}");
    }

    #[test]
    fn great_circle_through_the_caps() {
        // Nearly meridional great circle passing 0.005 rad from both poles, inside the caps.
        let tilt: f64 = 0.005;
        let g = analytic(20, GridSpec::for_length(20), |t, p| {
            let x = unit_vector(t, p);
            x[0] * tilt.cos() + x[2] * tilt.sin()
        });
        assert!(g.basis.theta[0] > 2.0 * tilt);
        let len = level_length(&g, 0.0).unwrap();
        assert!((len / (2.0 * PI) - 1.0).abs() < 5e-3, "{len}");
    }

    #[test]
    fn tilted_great_circle() {
        // Level set of x·n for a generic unit normal n is a great circle.
        let n = [0.3f64, -0.5, 0.81];
        let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        let g = analytic(30, GridSpec::for_length(30), |t, p| {
            let x = unit_vector(t, p);
            (x[0] * n[0] + x[1] * n[1] + x[2] * n[2]) / norm
        });
        let len = level_length(&g, 0.0).unwrap();
        assert!((len / (2.0 * PI) - 1.0).abs() < 5e-3, "{len}");
    }

    #[test]
    fn area_and_defect_wiring() {
        let c = sample_coeffs(25, 3, 1).unwrap();
        let g = synthesize(&c, GridSpec::minimal(25)).unwrap();
        assert!((excursion_area(&g, -1e9) - 4.0 * PI).abs() < 1e-12);
        assert_eq!(excursion_area(&g, 1e9), 0.0);
        let total = excursion_area(&g, 0.7) + excursion_area(&g.negated(), -0.7);
        assert!((total - 4.0 * PI).abs() < 1e-9);
        assert_eq!(defect(&g).abs(), (2.0 * excursion_area(&g, 0.0) - 4.0 * PI).abs());
        let positive = analytic(25, GridSpec::minimal(25), |_, _| 1.0);
        assert!((defect(&positive) - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn low_order_hermite_functionals() {
        let c = sample_coeffs(31, 8, 2).unwrap();
        let g = synthesize(&c, GridSpec::minimal(31)).unwrap();
        assert!((hermite_functional(&g, 0) - 4.0 * PI).abs() < 1e-12);
        assert!(hermite_functional(&g, 1).abs() < 1e-9);
        // ∫H₂(T) = Σa² − 4π exactly on the quadrature grid.
        assert!((hermite_functional(&g, 2) - (c.squared_norm() - 4.0 * PI)).abs() < 1e-10);
    }

    #[test]
    fn second_chaos_edge_cases() {
        let c = sample_coeffs(12, 1, 0).unwrap();
        assert_eq!(second_chaos_length(&c, 0.0), 0.0);
        let flat = HarmonicCoeffs::from_values(12, vec![HarmonicCoeffs::variance(12).sqrt(); 25]).unwrap();
        assert!(second_chaos_length(&flat, 1.3).abs() < 1e-12);
    }

    #[test]
    fn second_chaos_grid_projection_matches_coefficients() {
        let table = ChaosTable::default();
        for (ell, z) in [(7usize, 1.0), (40, -0.6), (63, 2.1)] {
            let c = sample_coeffs(ell, 11, ell as u64).unwrap();
            let g = synthesize(&c, GridSpec::minimal(ell).gradient(true)).unwrap();
            let grid_value = second_chaos_from_grid(&g, z, &table).unwrap();
            let exact = second_chaos_length(&c, z);
            assert!((grid_value - exact).abs() < 1e-9 * exact.abs().max(1.0), "ℓ={ell}: {grid_value} vs {exact}");
        }
    }
}
