//! `randwaves`: run experiments, dump tables, and verify the acceptance suite.
//!
//! Every command prints a CSV table to stdout, preceded by a `#` header line with the
//! tool version, master seed and config hash. With `--out DIR` (or `RANDWAVES_OUT`)
//! the table, per-replicate rows and a JSON summary are also written to `DIR`.
//! Flags override `--config FILE` entries (`key = value`, one per line), which
//! override the defaults.

use clap::{Args, Parser, Subcommand, ValueEnum};
use randwaves::chaos::ChaosTable;
use randwaves::geomstats::FunctionalKind;
use randwaves::harness::{fnv1a, run, Experiment, McReport, VERSION};
use randwaves::kernels::{kernel_verdict, random_gram_test, Space};
use randwaves::oracles::{self, OracleValue, Range};
use randwaves::sphere::GridSpec;
use randwaves::torus::{lattice_points, representable_energies};
use randwaves::verify::{Mode, Settings, Suite};
use randwaves::{Error, Result};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "randwaves", version, about = "Random eigenfunctions on the sphere and the torus", args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Master seed.
    #[arg(long, default_value_t = randwaves::verify::DEFAULT_SEED)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Directory for CSV/JSON output.
    #[arg(long, env = "RANDWAVES_OUT")]
    out: Option<PathBuf>,
    /// `key = value` file with defaults for the other flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Common {
    fn workers(&self) -> usize {
        self.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo functionals of a spherical eigenfunction.
    Sphere(SphereArgs),
    /// Monte Carlo nodal length and H(n) of an arithmetic random wave.
    Torus(TorusArgs),
    /// Lattice-point statistics: n, N_n, mu_n(4), c_n, E_n.
    Lattice(LatticeArgs),
    /// Chaos coefficient table (alpha, beta, indicator, defect).
    ChaosTable(ChaosArgs),
    /// Reference constants with method and error bound.
    Constants(ConstantsArgs),
    /// Kernel coefficients and verdict, or a random Gram test.
    Kernel(KernelArgs),
    /// Acceptance suite; exits 1 if a criterion fails.
    Verify(VerifyArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Functional {
    Area,
    Defect,
    Length,
    SecondChaos,
    H2,
    H3,
    H4,
}

impl From<Functional> for FunctionalKind {
    fn from(f: Functional) -> Self {
        match f {
            Functional::Area => FunctionalKind::Area,
            Functional::Defect => FunctionalKind::Defect,
            Functional::Length => FunctionalKind::Length,
            Functional::SecondChaos => FunctionalKind::SecondChaos,
            Functional::H2 => FunctionalKind::Hermite(2),
            Functional::H3 => FunctionalKind::Hermite(3),
            Functional::H4 => FunctionalKind::Hermite(4),
        }
    }
}

#[derive(Args, Debug)]
struct SphereArgs {
    /// Degree ℓ.
    #[arg(long, default_value_t = 50)]
    ell: usize,
    /// Levels z, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    z: Vec<f64>,
    /// Functionals, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "area,length")]
    functional: Vec<Functional>,
    /// Replicates.
    #[arg(long, short = 'm', default_value_t = 200)]
    m: usize,
    /// Grid samples per wavelength (at least 4).
    #[arg(long, default_value_t = 6.0)]
    spw: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct TorusArgs {
    /// Energy n (a sum of two squares).
    #[arg(long, default_value_t = 325)]
    n: u64,
    #[arg(long, default_value_t = 0.0)]
    z: f64,
    #[arg(long, short = 'm', default_value_t = 200)]
    m: usize,
    /// Grid samples per wavelength (at least 8); 0 skips the length and records only H(n).
    #[arg(long, default_value_t = 10.0)]
    spw: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct LatticeArgs {
    /// Single energy.
    #[arg(long, conflicts_with = "max_n")]
    n: Option<u64>,
    /// List every representable energy up to this bound.
    #[arg(long)]
    max_n: Option<u64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct ChaosArgs {
    #[arg(long, default_value_t = 6)]
    max_order: usize,
    #[arg(long, value_delimiter = ',', default_value = "0,1")]
    z: Vec<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Family {
    Cqd,
    Defect,
    Gegenbauer,
    Expected,
    Torus,
}

#[derive(Args, Debug)]
struct ConstantsArgs {
    #[arg(long, value_enum)]
    family: Family,
    #[arg(long, default_value_t = 3)]
    q: u32,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 100)]
    ell: usize,
    #[arg(long, default_value_t = 1.0)]
    z: f64,
    #[arg(long, default_value_t = 5)]
    n: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct KernelArgs {
    /// s2, su2 or so3.
    #[arg(long, default_value = "so3")]
    space: Space,
    #[arg(long, default_value_t = 10)]
    lmax: usize,
    /// Run a Gram-matrix test on random points instead.
    #[arg(long)]
    gram: bool,
    #[arg(long, default_value_t = 200)]
    points: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Reduced replicate counts and widened tolerances.
    #[arg(long, conflicts_with = "full")]
    quick: bool,
    /// Stated replicate counts and tolerances (default).
    #[arg(long)]
    full: bool,
    /// Run a single criterion.
    #[arg(long)]
    criterion: Option<usize>,
    #[command(flatten)]
    common: Common,
}

/// A CSV table with a provenance header.
struct Table {
    name: &'static str,
    columns: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &'static str, columns: &[&'static str]) -> Self {
        Table { name, columns: columns.to_vec(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    fn render(&self, header: &str) -> String {
        let mut s = format!("{header}\n{}\n", self.columns.join(","));
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

fn oracle_row(o: &OracleValue) -> Vec<String> {
    vec![
        o.name.replace(',', ";"),
        num(o.value),
        o.method.to_string(),
        num(o.error_bound),
        o.order.map(|k| k.to_string()).unwrap_or_default(),
    ]
}

struct Output<'a> {
    header: String,
    out: Option<&'a Path>,
}

impl Output<'_> {
    fn emit(&self, table: &Table) -> Result<()> {
        let text = table.render(&self.header);
        print!("{text}");
        if let Some(dir) = self.out {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(format!("{}.csv", table.name)), text)?;
        }
        Ok(())
    }

    fn emit_report(&self, report: &McReport) -> Result<()> {
        let mut t = Table::new("summary", &["column", "n", "mean", "variance", "se_mean", "skewness", "excess_kurtosis", "k4"]);
        for s in &report.stats {
            t.push(vec![
                s.column.clone(),
                s.n.to_string(),
                num(s.mean),
                num(s.variance),
                num(s.se_mean),
                num(s.skewness),
                num(s.excess_kurtosis),
                num(s.k4),
            ]);
        }
        self.emit(&t)?;
        for c in &report.checks {
            eprintln!("{c}");
        }
        if let Some(dir) = self.out {
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            std::fs::write(dir.join(format!("{}.replicates.csv", report.id)), buf)?;
            std::fs::write(dir.join(format!("{}.json", report.id)), report.to_json()?)?;
        }
        Ok(())
    }

    fn emit_json(&self, name: &str, value: &impl serde::Serialize) -> Result<()> {
        if let Some(dir) = self.out {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(format!("{name}.json")), serde_json::to_string_pretty(value)?)?;
        }
        Ok(())
    }
}

/// Insert `--key=value` pairs from the `--config` file right after the subcommand,
/// so that flags given on the command line (which come later) override them.
fn apply_config_file(mut argv: Vec<String>) -> std::result::Result<Vec<String>, String> {
    let pos = argv.iter().position(|a| a == "--config" || a.starts_with("--config="));
    let Some(pos) = pos else { return Ok(argv) };
    let path = match argv[pos].strip_prefix("--config=") {
        Some(p) => p.to_string(),
        None => argv.get(pos + 1).cloned().ok_or("--config needs a file")?,
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let mut injected = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(format!("{path}:{}: expected key = value", k + 1))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if value == "true" {
            injected.push(format!("--{key}"));
        } else {
            injected.push(format!("--{key}={value}"));
        }
    }
    let sub = argv.iter().skip(1).position(|a| !a.starts_with('-')).map(|i| i + 2).unwrap_or(argv.len());
    argv.splice(sub..sub, injected);
    Ok(argv)
}

fn main() -> ExitCode {
    let argv = match apply_config_file(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn output<'a>(common: &'a Common, cli: &Cli) -> Output<'a> {
    let hash = fnv1a(format!("{:?}", cli.command).as_bytes());
    Output { header: format!("# randwaves {VERSION} seed={} config={hash:016x}", common.seed), out: common.out.as_deref() }
}

/// Returns whether the command succeeded (only `verify` can report a failure).
fn dispatch(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Sphere(a) => {
            let out = output(&a.common, cli);
            let fs: Vec<FunctionalKind> = a.functional.iter().map(|&f| f.into()).collect();
            if !(a.spw >= 4.0) {
                return Err(Error::config("spw", format!("{} < 4 samples per wavelength", a.spw)));
            }
            let grid = GridSpec::with_samples_per_wavelength(a.ell.max(1), a.spw);
            let exp = Experiment::sphere(format!("sphere-l{}", a.ell), a.ell, grid, &a.z, &fs, a.m, a.common.seed);
            out.emit_report(&run(&exp, a.common.workers())?)?;
        }
        Command::Torus(a) => {
            let out = output(&a.common, cli);
            let spw = (a.spw > 0.0).then_some(a.spw);
            let exp = Experiment::torus(format!("torus-n{}", a.n), a.n, a.z, spw, a.m, a.common.seed);
            out.emit_report(&run(&exp, a.common.workers())?)?;
        }
        Command::Lattice(a) => {
            let out = output(&a.common, cli);
            let energies: Vec<u64> = match (a.n, a.max_n) {
                (Some(n), _) => vec![n],
                (None, Some(m)) => representable_energies(m).into_iter().map(|(n, _)| n).collect(),
                (None, None) => return Err(Error::config("n", "give --n or --max-n")),
            };
            let mut t = Table::new("lattice", &["n", "N_n", "mu4", "c_n", "E_n"]);
            for n in energies {
                let o = oracles::torus_oracles(&lattice_points(n)?)?;
                t.push(vec![n.to_string(), o.n_points.to_string(), num(o.mu_hat4), num(o.c_n), num(o.energy)]);
            }
            out.emit(&t)?;
        }
        Command::ChaosTable(a) => {
            let out = output(&a.common, cli);
            let mut t = Table::new("chaos", &["family", "i", "j", "z", "value"]);
            for (fam, i, j, z, v) in ChaosTable::new(a.max_order).rows(&a.z) {
                t.push(vec![fam.into(), i.to_string(), j.to_string(), num(z), num(v)]);
            }
            out.emit(&t)?;
        }
        Command::Constants(a) => constants(a, output(&a.common, cli))?,
        Command::Kernel(a) => {
            let out = output(&a.common, cli);
            if a.gram {
                let v = random_gram_test(a.space, a.points, a.common.seed)?;
                let mut t = Table::new("gram", &["space", "points", "max_eigenvalue", "verdict", "coincident_pairs"]);
                t.push(vec![
                    a.space.to_string(),
                    v.points.to_string(),
                    num(v.max_eigenvalue),
                    format!("{:?}", v.verdict),
                    v.coincident_pairs.to_string(),
                ]);
                out.emit(&t)?;
                out.emit_json("gram", &v)?;
            } else {
                let v = kernel_verdict(a.space, a.lmax)?;
                let mut t = Table::new("kernel", &["l", "alpha"]);
                for (l, c) in v.coefficients.iter().enumerate() {
                    t.push(vec![l.to_string(), num(*c)]);
                }
                out.emit(&t)?;
                println!("# verdict: {:?} ({})", v.verdict, v.witness_text());
                out.emit_json("kernel", &v)?;
            }
        }
        Command::Verify(a) => {
            let out = output(&a.common, cli);
            let mode = if a.quick { Mode::Quick } else { Mode::Full };
            let settings = Settings { mode, workers: a.common.workers(), seed: a.common.seed };
            let suite = Suite::new(settings);
            let ids: Vec<usize> = a.criterion.map_or_else(|| (1..=9).collect(), |c| vec![c]);
            println!("{}", out.header);
            let mut results = Vec::new();
            for id in ids {
                let r = suite.criterion(id)?;
                println!("{}", r.line());
                for c in &r.checks {
                    println!("    {c}");
                }
                results.push(r);
            }
            out.emit_json("verify", &results)?;
            return Ok(results.iter().all(|r| r.passed()));
        }
    }
    Ok(true)
}

fn constants(a: &ConstantsArgs, out: Output) -> Result<()> {
    let mut t = Table::new("constants", &["name", "value", "method", "error_bound", "order"]);
    match a.family {
        Family::Cqd => t.push(oracle_row(&oracles::cqd_constant(a.q, a.d)?)),
        Family::Gegenbauer => {
            for range in [Range::Half, Range::Full] {
                t.push(oracle_row(&oracles::gegenbauer_moment(a.ell, a.q, a.d, range)?));
            }
        }
        Family::Defect => {
            let c = oracles::defect_variance_constant(a.d)?;
            t.push(oracle_row(&c.quadrature));
            t.push(oracle_row(&c.series));
        }
        Family::Expected => {
            let e = oracles::expected_values(a.ell, a.d, a.z)?;
            let closed = |name: &str, v: Option<f64>| {
                v.map(|v| vec![name.to_string(), num(v), "closed-form".into(), "0".into(), String::new()])
            };
            for row in [
                closed("area_mean", Some(e.area_mean)),
                closed("area_variance", Some(e.area_variance)),
                closed("length_mean", e.length_mean),
                closed("length_variance", e.length_variance),
                closed("nodal_variance", e.nodal_variance),
                closed("second_chaos_variance", e.second_chaos_variance),
            ]
            .into_iter()
            .flatten()
            {
                t.push(row);
            }
        }
        Family::Torus => {
            let o = oracles::torus_oracles(&lattice_points(a.n)?)?;
            for (name, v) in [
                ("c_n", o.c_n),
                ("length_mean", o.length_mean),
                ("length_variance", o.length_variance),
                ("psi", o.psi),
                ("kappa3", oracles::m_eta_cumulant(o.eta, 3)),
                ("kappa4", oracles::m_eta_cumulant(o.eta, 4)),
            ] {
                t.push(vec![name.into(), num(v), "closed-form".into(), "0".into(), String::new()]);
            }
        }
    }
    out.emit(&t)
}
