//! Monte Carlo runner and summary statistics.
//!
//! Replicate `r` of an experiment draws from its own generator stream keyed by
//! (master seed, experiment id, r), so the replicate values do not depend on how the
//! work is scheduled. Summary statistics are then computed in replicate order.

use crate::error::{Error, Result};
use crate::geomstats::{excursion_area, level_length, FunctionalKind};
use crate::geomstats::{defect, hermite_functional, second_chaos_length};
use crate::oracles::{expected_values, torus_oracles};
use crate::sphere::{mix_seed, sample_coeffs, synthesize, GridSpec};
use crate::torus::{
    grid_size_for, h_vector, lattice_points, level_length_torus_extrapolated, sample_toral_coeffs, synthesize_torus, SynthesisMethod,
};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::io::Write;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Lower bound on torus grid resolution; the extrapolation subgrid has half of it.
pub const MIN_TORUS_SPW: f64 = 8.0;

/// FNV-1a, used for seed keys and config hashes; stable across platforms and releases.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Functionals of `T_ℓ` on the sphere. Level-dependent functionals are measured at
    /// every entry of `levels`; a `t_sq` column records the spatial mean of `T²`.
    Sphere { ell: usize, grid: GridSpec, levels: Vec<f64>, functionals: Vec<FunctionalKind> },
    /// Arithmetic wave at energy `n`: the statistic vector `H(n)` and, when
    /// `samples_per_wavelength` is set, the length of the `z`-level set. The length is
    /// extrapolated from the grid and its every-other-point subgrid, which removes the
    /// `O(h²)` discretization error; that error is comparable to the length's own
    /// fluctuations (relative size `√(8c_n)/N_n`) on any affordable grid.
    Torus { n: u64, z: f64, samples_per_wavelength: Option<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Experiment {
    pub id: String,
    pub kind: ExperimentKind,
    pub replicates: usize,
    pub seed: u64,
}

impl Experiment {
    pub fn sphere(
        id: impl Into<String>,
        ell: usize,
        grid: GridSpec,
        levels: &[f64],
        functionals: &[FunctionalKind],
        replicates: usize,
        seed: u64,
    ) -> Self {
        Experiment {
            id: id.into(),
            kind: ExperimentKind::Sphere { ell, grid, levels: levels.to_vec(), functionals: functionals.to_vec() },
            replicates,
            seed,
        }
    }

    pub fn torus(id: impl Into<String>, n: u64, z: f64, samples: Option<f64>, replicates: usize, seed: u64) -> Self {
        Experiment {
            id: id.into(),
            kind: ExperimentKind::Torus { n, z, samples_per_wavelength: samples },
            replicates,
            seed,
        }
    }

    /// Energy `n` of a torus experiment.
    pub fn energy(&self) -> Option<u64> {
        match self.kind {
            ExperimentKind::Torus { n, .. } => Some(n),
            ExperimentKind::Sphere { .. } => None,
        }
    }

    /// Seed shared by all replicates; replicates differ by generator stream.
    pub fn stream_seed(&self) -> u64 {
        mix_seed(self.seed, fnv1a(self.id.as_bytes()))
    }

    pub fn config_hash(&self) -> u64 {
        fnv1a(serde_json::to_string(self).expect("experiment serializes").as_bytes())
    }

    pub fn columns(&self) -> Vec<String> {
        match &self.kind {
            ExperimentKind::Sphere { levels, functionals, .. } => {
                let mut cols = Vec::new();
                for f in functionals {
                    match f {
                        FunctionalKind::Defect | FunctionalKind::Hermite(_) => cols.push(f.to_string()),
                        _ => cols.extend(levels.iter().map(|z| format!("{f}@{z}"))),
                    }
                }
                cols.push("t_sq".into());
                cols
            }
            ExperimentKind::Torus { samples_per_wavelength, .. } => {
                let mut cols: Vec<String> = Vec::new();
                if samples_per_wavelength.is_some() {
                    cols.push("length".into());
                }
                cols.extend(["h1", "h2", "h3", "h4"].map(String::from));
                cols
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::config("replicates", "must be at least 1"));
        }
        match &self.kind {
            ExperimentKind::Sphere { ell, grid, levels, functionals } => {
                if *ell == 0 {
                    return Err(Error::config("ell", "must be at least 1"));
                }
                grid.validate(*ell)?;
                if levels.iter().any(|z| !z.is_finite()) {
                    return Err(Error::config("z", "levels must be finite"));
                }
                let needs_level = functionals
                    .iter()
                    .any(|f| matches!(f, FunctionalKind::Area | FunctionalKind::Length | FunctionalKind::SecondChaos));
                if needs_level && levels.is_empty() {
                    return Err(Error::config("z", "level functionals need at least one level"));
                }
            }
            ExperimentKind::Torus { n, z, samples_per_wavelength } => {
                lattice_points(*n)?;
                if !z.is_finite() {
                    return Err(Error::config("z", "level must be finite"));
                }
                if let Some(s) = samples_per_wavelength {
                    if !(*s >= MIN_TORUS_SPW) {
                        return Err(Error::config("samples_per_wavelength", format!("{s} < {MIN_TORUS_SPW}")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Build the per-replicate measurement for `exp`. Validation happens first so that
/// the closure only sees admissible parameters.
fn replicate_fn(exp: &Experiment) -> Result<Box<dyn Fn(u64) -> Result<Vec<f64>> + Sync + '_>> {
    exp.validate()?;
    let seed = exp.stream_seed();
    match &exp.kind {
        ExperimentKind::Sphere { ell, grid, levels, functionals } => {
            let (ell, grid) = (*ell, *grid);
            let needs_grid = functionals.iter().any(|f| !matches!(f, FunctionalKind::SecondChaos));
            Ok(Box::new(move |r| {
                let coeffs = sample_coeffs(ell, seed, r)?;
                let field = if needs_grid { Some(synthesize(&coeffs, grid)?) } else { None };
                let g = || field.as_ref().expect("grid synthesized");
                let mut row = Vec::new();
                for f in functionals {
                    match f {
                        FunctionalKind::Defect => row.push(defect(g())),
                        FunctionalKind::Hermite(q) => row.push(hermite_functional(g(), *q)),
                        FunctionalKind::Area => row.extend(levels.iter().map(|&z| excursion_area(g(), z))),
                        FunctionalKind::Length => {
                            for &z in levels {
                                row.push(level_length(g(), z)?);
                            }
                        }
                        FunctionalKind::SecondChaos => row.extend(levels.iter().map(|&z| second_chaos_length(&coeffs, z))),
                    }
                }
                // Spatial mean of T²; by Parseval it is |a|²/4π when no grid was built.
                let mean_sq = match &field {
                    Some(f) => f.integrate(|v| v * v) / (4.0 * PI),
                    None => coeffs.values.iter().map(|a| a * a).sum::<f64>() / (4.0 * PI),
                };
                row.push(mean_sq);
                Ok(row)
            }))
        }
        ExperimentKind::Torus { n, z, samples_per_wavelength } => {
            let lattice = lattice_points(*n)?;
            let (n, z) = (*n, *z);
            let size = samples_per_wavelength.map(|s| {
                let size = grid_size_for(n, s);
                size + size % 2
            });
            Ok(Box::new(move |r| {
                let coeffs = sample_toral_coeffs(&lattice, seed, r);
                let mut row = Vec::with_capacity(5);
                if let Some(size) = size {
                    let grid = synthesize_torus(&coeffs, &lattice, size, false, SynthesisMethod::Auto)?;
                    row.push(level_length_torus_extrapolated(&grid, z)?);
                }
                row.extend(h_vector(&coeffs, &lattice));
                Ok(row)
            }))
        }
    }
}

/// Replicate rows `range` of `exp` computed on a pool of `workers` threads.
pub fn run_replicates(exp: &Experiment, range: std::ops::Range<u64>, workers: usize) -> Result<Vec<Vec<f64>>> {
    let f = replicate_fn(exp)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;
    pool.install(|| range.into_par_iter().map(&f).collect())
}

/// Run all replicates, summarize each column and attach the oracle checks.
pub fn run(exp: &Experiment, workers: usize) -> Result<McReport> {
    let rows = run_replicates(exp, 0..exp.replicates as u64, workers)?;
    let columns = exp.columns();
    let stats = columns
        .iter()
        .enumerate()
        .map(|(k, name)| ColumnStats::from_moments(name, &Moments::from_slice(rows.iter().map(|r| r[k]))))
        .collect();
    let mut report = McReport {
        id: exp.id.clone(),
        experiment: exp.clone(),
        version: VERSION.into(),
        config_hash: exp.config_hash(),
        columns,
        rows,
        stats,
        checks: Vec::new(),
    };
    report.checks = oracle_checks(&report)?;
    Ok(report)
}

/// Streaming central moments up to order four, mergeable in any grouping.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.merge(&Moments { n: 1, mean: x, m2: 0.0, m3: 0.0, m4: 0.0 });
    }

    pub fn merge(&mut self, o: &Moments) {
        if o.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *o;
            return;
        }
        let (na, nb) = (self.n as f64, o.n as f64);
        let n = na + nb;
        let d = o.mean - self.mean;
        let (d2, d3, d4) = (d * d, d * d * d, d * d * d * d);
        let m4 = self.m4
            + o.m4
            + d4 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * o.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * d * (na * o.m3 - nb * self.m3) / n;
        let m3 = self.m3 + o.m3 + d3 * na * nb * (na - nb) / (n * n) + 3.0 * d * (na * o.m2 - nb * self.m2) / n;
        let m2 = self.m2 + o.m2 + d2 * na * nb / n;
        self.mean += d * nb / n;
        self.m2 = m2;
        self.m3 = m3;
        self.m4 = m4;
        self.n += o.n;
    }

    pub fn from_slice(xs: impl IntoIterator<Item = f64>) -> Self {
        let mut m = Moments::default();
        for x in xs {
            m.push(x);
        }
        m
    }

    /// Unbiased variance; `NaN` below two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            f64::NAN
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// `k = m₄ − 3m₂²` on central moments.
    pub fn fourth_cumulant(&self) -> f64 {
        let n = self.n as f64;
        self.m4 / n - 3.0 * (self.m2 / n).powi(2)
    }

    pub fn skewness(&self) -> f64 {
        (self.n as f64).sqrt() * self.m3 / self.m2.powf(1.5)
    }

    pub fn excess_kurtosis(&self) -> f64 {
        self.n as f64 * self.m4 / (self.m2 * self.m2) - 3.0
    }

    /// Plug-in standard error of the sample variance, `√((m₄ − m₂²)/n)`.
    pub fn variance_se(&self) -> f64 {
        let n = self.n as f64;
        ((self.m4 / n - (self.m2 / n).powi(2)) / n).max(0.0).sqrt()
    }
}

/// Fourth cumulant `m₄ − 3m₂²` of centred samples; needs at least four samples.
pub fn fourth_cumulant(samples: &[f64]) -> Result<f64> {
    if samples.len() < 4 {
        return Err(Error::config("samples", format!("fourth cumulant needs >= 4 samples, got {}", samples.len())));
    }
    Ok(Moments::from_slice(samples.iter().copied()).fourth_cumulant())
}

/// Third and fourth cumulants with delta-method standard errors:
/// `(k₃, se₃, k₄, se₄)`, using the influence functions
/// `(x−μ)³ − 3σ²(x−μ)` and `(x−μ)⁴ − 4μ₃(x−μ) − 6σ²(x−μ)²`.
pub fn cumulants_with_se(samples: &[f64]) -> Result<(f64, f64, f64, f64)> {
    if samples.len() < 4 {
        return Err(Error::config("samples", format!("need >= 4 samples, got {}", samples.len())));
    }
    let m = Moments::from_slice(samples.iter().copied());
    let n = m.n as f64;
    let (mu, var) = (m.mean, m.m2 / n);
    let mu3 = m.m3 / n;
    let mut if3 = Moments::default();
    let mut if4 = Moments::default();
    for &x in samples {
        let d = x - mu;
        if3.push(d * d * d - 3.0 * var * d);
        if4.push(d * d * d * d - 4.0 * mu3 * d - 6.0 * var * d * d);
    }
    Ok((mu3, (if3.variance() / n).sqrt(), m.fourth_cumulant(), (if4.variance() / n).sqrt()))
}

/// `(x − mean)/sd` with the sample mean and standard deviation.
pub fn standardize(xs: &[f64]) -> Vec<f64> {
    let m = Moments::from_slice(xs.iter().copied());
    let sd = m.variance().sqrt();
    xs.iter().map(|x| (x - m.mean) / sd).collect()
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Err(Error::config("samples", "empty sample"));
    }
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::domain("sample contains NaN"));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// `sup_x |F_M(x) − F(x)|` for the empirical cdf of `samples`.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    let v = sorted(samples)?;
    let n = v.len() as f64;
    Ok(v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max))
}

/// `sup_x |F_a(x) − F_b(x)|` between two empirical cdfs.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    let (a, b) = (sorted(a)?, sorted(b)?);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// `c(α)/√M` critical value of the one-sample Kolmogorov statistic at the 99% level.
pub const KS_99: f64 = 1.63;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnStats {
    pub column: String,
    pub n: u64,
    pub mean: f64,
    pub variance: f64,
    pub se_mean: f64,
    pub se_variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub k4: f64,
}

impl ColumnStats {
    pub fn from_moments(column: &str, m: &Moments) -> Self {
        let variance = m.variance();
        ColumnStats {
            column: column.into(),
            n: m.n,
            mean: m.mean,
            variance,
            se_mean: (variance / m.n as f64).sqrt(),
            se_variance: m.variance_se(),
            skewness: m.skewness(),
            excess_kurtosis: m.excess_kurtosis(),
            k4: m.fourth_cumulant(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Tolerance {
    Absolute { tol: f64 },
    Relative { tol: f64 },
    /// `|measured − oracle| ≤ k · se`.
    StandardErrors { k: f64, se: f64 },
    /// `measured / oracle ∈ [lo, hi]`.
    Ratio { lo: f64, hi: f64 },
    /// `measured ≤ oracle`.
    AtMost,
    /// `measured > oracle`.
    Above,
}

impl Tolerance {
    pub fn accepts(&self, measured: f64, oracle: f64) -> bool {
        match *self {
            Tolerance::Absolute { tol } => (measured - oracle).abs() <= tol,
            Tolerance::Relative { tol } => (measured / oracle - 1.0).abs() <= tol,
            Tolerance::StandardErrors { k, se } => (measured - oracle).abs() <= k * se,
            Tolerance::Ratio { lo, hi } => (lo..=hi).contains(&(measured / oracle)),
            Tolerance::AtMost => measured <= oracle,
            Tolerance::Above => measured > oracle,
        }
    }
}

impl std::fmt::Display for Tolerance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tolerance::Absolute { tol } => write!(f, "abs {tol:.1e}"),
            Tolerance::Relative { tol } => write!(f, "rel {tol}"),
            Tolerance::StandardErrors { k, se } => write!(f, "{k} SE ({se:.3e})"),
            Tolerance::Ratio { lo, hi } => write!(f, "ratio in [{lo}, {hi}]"),
            Tolerance::AtMost => f.write_str("<= oracle"),
            Tolerance::Above => f.write_str("> oracle"),
        }
    }
}

/// A measured statistic against its reference; `passed` is a function of the other three.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub oracle: f64,
    pub tolerance: Tolerance,
    pub passed: bool,
    /// Outcome depends on the random draw (a retry with a fresh seed is meaningful).
    pub stochastic: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, measured: f64, oracle: f64, tolerance: Tolerance) -> Self {
        Check { name: name.into(), measured, oracle, tolerance, passed: tolerance.accepts(measured, oracle), stochastic: false }
    }

    pub fn stochastic(mut self) -> Self {
        self.stochastic = true;
        self
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {}: measured {:.6e}, oracle {:.6e}, {}",
            if self.passed { "ok  " } else { "FAIL" },
            self.name,
            self.measured,
            self.oracle,
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub id: String,
    pub experiment: Experiment,
    pub version: String,
    pub config_hash: u64,
    pub columns: Vec<String>,
    /// One row per replicate, in replicate order.
    #[serde(skip)]
    pub rows: Vec<Vec<f64>>,
    pub stats: Vec<ColumnStats>,
    pub checks: Vec<Check>,
}

impl McReport {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn stats(&self, name: &str) -> Option<&ColumnStats> {
        self.stats.iter().find(|s| s.column == name)
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn header(&self) -> String {
        format!("# randwaves {} seed={} config={:016x}", self.version, self.experiment.seed, self.config_hash)
    }

    /// Header comment, column row, then one row per replicate.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "{}", self.header())?;
        writeln!(out, "replicate,{}", self.columns.join(","))?;
        for (r, row) in self.rows.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            writeln!(out, "{r},{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Mean and variance checks against [`expected_values`] or [`torus_oracles`], with
/// the tolerances of the acceptance suite.
pub fn oracle_checks(report: &McReport) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    match &report.experiment.kind {
        ExperimentKind::Sphere { ell, levels, .. } => {
            for &z in levels {
                let e = expected_values(*ell, 2, z)?;
                if let Some(s) = report.stats(&format!("area@{z}")) {
                    let tol = Tolerance::StandardErrors { k: 3.0, se: s.se_mean };
                    checks.push(Check::new(format!("mean area@{z}"), s.mean, e.area_mean, tol).stochastic());
                    if z != 0.0 {
                        let tol = Tolerance::Ratio { lo: 0.75, hi: 1.25 };
                        checks.push(Check::new(format!("var area@{z}"), s.variance, e.area_variance, tol).stochastic());
                    }
                }
                if let (Some(s), Some(mean)) = (report.stats(&format!("length@{z}")), e.length_mean) {
                    checks.push(Check::new(format!("mean length@{z}"), s.mean, mean, Tolerance::Relative { tol: 0.03 }));
                    if let Some(var) = e.length_variance {
                        let tol = Tolerance::Ratio { lo: 0.7, hi: 1.3 };
                        checks.push(Check::new(format!("var length@{z}"), s.variance, var, tol).stochastic());
                    }
                }
                if let (Some(s), Some(var)) = (report.stats(&format!("second_chaos@{z}")), e.second_chaos_variance) {
                    if z != 0.0 {
                        let tol = Tolerance::Relative { tol: 0.05 };
                        checks.push(Check::new(format!("var second_chaos@{z}"), s.variance, var, tol).stochastic());
                    }
                }
            }
            if let Some(s) = report.stats("t_sq") {
                checks.push(Check::new("mean t_sq", s.mean, 1.0, Tolerance::Relative { tol: 0.02 }).stochastic());
            }
        }
        ExperimentKind::Torus { n, .. } => {
            if let Some(s) = report.stats("length") {
                let o = torus_oracles(&lattice_points(*n)?)?;
                checks.push(Check::new("mean length", s.mean, o.length_mean, Tolerance::Relative { tol: 0.02 }));
                let tol = Tolerance::Ratio { lo: 0.65, hi: 1.35 };
                checks.push(Check::new("var length", s.variance, o.length_variance, tol).stochastic());
            }
        }
    }
    Ok(checks)
}
