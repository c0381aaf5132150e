//! Subcommand front end: `jost`, `scatter`, `spectrum`, `levinson`, `sweep`.
//!
//! Every subcommand writes one JSON report (stdout or `--out`). Exit codes:
//! 0 when the run verifies, 1 on a verification failure, 2 on input errors.
//! `LEVINSON_LAB_THREADS` caps the worker pool.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};

use levinson_core::io::{parse_potential, write_circle_csv, CircleSample, MatrixJson, RunConfig};
use levinson_core::jost::{jost_minus, jost_plus, residual_check};
use levinson_core::lattice::moment_norms;
use levinson_core::levinson::levinson_with_spectral;
use levinson_core::linalg::{det, identity, op_norm};
use levinson_core::scattering::{coefficients, det_s, identity_suite, time_delay};
use levinson_core::spectral::{dense_truncation, inertia_truncation, oracle_size, spectral_report, DENSE_CAP};
use levinson_core::{LabError, Potential, SpectralReport, Window, C64};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const THREADS_ENV: &str = "LEVINSON_LAB_THREADS";

#[derive(Parser, Debug)]
#[command(name = "levinson-lab", version, about = "Scattering and Levinson-count laboratory for matrix discrete Schrödinger operators")]
struct Cli {
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run configuration (JSON); flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Jost solutions u₊^z and u₋^{1/z} on a window.
    Jost(JostArgs),
    /// Scattering coefficients at one z, or det S and the time delay around the circle.
    Scatter(ScatterArgs),
    /// Bound states, half-bound states and edge exponents, checked against a truncation oracle.
    Spectrum(SpectrumArgs),
    /// Contour integral of the time delay against the spectral counts.
    Levinson(LevinsonArgs),
    /// `levinson` for every *.json potential in a directory.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct JostArgs {
    #[arg(long)]
    potential: PathBuf,
    /// Spectral parameter: `re`, `re,im` or `a+bi`.
    #[arg(long, value_parser = parse_z, allow_hyphen_values = true)]
    z: C64,
    /// Sites `nmin,nmax`; defaults to the support padded by two.
    #[arg(long, value_parser = parse_window, allow_hyphen_values = true)]
    window: Option<Window>,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false, id = "point")]
struct ScatterPoint {
    #[arg(long, value_parser = parse_z, allow_hyphen_values = true)]
    z: Option<C64>,
    /// Number of equally spaced samples on the unit circle (offset from ±1).
    #[arg(long)]
    circle_samples: Option<usize>,
}

#[derive(Args, Debug)]
struct ScatterArgs {
    #[arg(long)]
    potential: PathBuf,
    #[command(flatten)]
    point: ScatterPoint,
    /// CSV destination for circle samples; defaults to the report path with a `.csv` extension.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    #[arg(long)]
    potential: PathBuf,
    /// Truncation half-width for the dense oracle.
    #[arg(long)]
    dense_n: Option<i64>,
}

#[derive(Args, Debug, Clone)]
struct LevinsonArgs {
    #[arg(long)]
    potential: PathBuf,
    /// Strictly decreasing ε values in (0, 0.5), comma separated.
    #[arg(long, value_delimiter = ',')]
    eps_grid: Option<Vec<f64>>,
    #[arg(long)]
    quad_points: Option<usize>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    potential_dir: PathBuf,
    #[arg(long, value_delimiter = ',')]
    eps_grid: Option<Vec<f64>>,
    #[arg(long)]
    quad_points: Option<usize>,
}

fn parse_z(s: &str) -> Result<C64, String> {
    let s = s.trim();
    if let Some((re, im)) = s.split_once(',') {
        let re = re.trim().parse::<f64>().map_err(|e| e.to_string())?;
        let im = im.trim().parse::<f64>().map_err(|e| e.to_string())?;
        return Ok(C64::new(re, im));
    }
    C64::from_str(s).map_err(|_| format!("cannot read `{s}` as a complex number"))
}

fn parse_window(s: &str) -> Result<Window, String> {
    let (a, b) = s.split_once(',').ok_or("window must be `nmin,nmax`")?;
    let a = a.trim().parse::<i64>().map_err(|e| e.to_string())?;
    let b = b.trim().parse::<i64>().map_err(|e| e.to_string())?;
    Window::new(a, b).map_err(|e| e.to_string())
}

/// A failed run: input problems (exit 2) carry a machine-readable kind.
struct Failure {
    kind: &'static str,
    message: String,
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        let kind = match &e {
            LabError::Parse { .. } => "parse",
            LabError::NotHermitian { .. } => "not_hermitian",
            LabError::DuplicateSite(_) => "duplicate_site",
            LabError::Io(_) => "io",
            LabError::Config(_) => "config",
            LabError::Domain(_) => "domain",
            _ => "computation",
        };
        Self { kind, message: e.to_string() }
    }
}

fn input_error(kind: &'static str, message: impl Into<String>) -> Failure {
    Failure { kind, message: message.into() }
}

/// Report plus exit code.
type Outcome = Result<(Value, i32), Failure>;

fn verdict(pass: bool) -> i32 {
    if pass { EXIT_PASS } else { EXIT_FAIL }
}

fn load(path: &Path) -> Result<Potential, Failure> {
    parse_potential(path).map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    })
}

fn input_section(path: &Path, v: &Potential) -> Value {
    let (zeroth, first) = moment_norms(v);
    json!({
        "potential": path.display().to_string(),
        "L": v.dim(),
        "support": v.support(),
        "moments": { "zeroth": zeroth, "first": first },
    })
}

fn cmd_jost(a: &JostArgs) -> Outcome {
    let v = load(&a.potential)?;
    let window = a.window.unwrap_or_else(|| Window::around(&v));
    let plus = jost_plus(a.z, &v, window)?;
    let minus = jost_minus(a.z, &v, window)?;
    let rp = residual_check(&plus, &v)?;
    let rm = residual_check(&minus, &v)?;
    let dump = |u: &levinson_core::JostSolution| -> Vec<Value> {
        u.values().map(|(n, m)| json!({ "n": n, "value": MatrixJson::from(m) })).collect()
    };
    let pass = rp < 1e-10 && rm < 1e-10;
    Ok((
        json!({
            "input": { "z": a.z, "window": [window.nmin, window.nmax], "potential": input_section(&a.potential, &v) },
            "plus": dump(&plus),
            "minus_inverse": dump(&minus),
            "residual": { "plus": rp, "minus": rm },
            "pass": pass,
        }),
        verdict(pass),
    ))
}

fn circle_angles(k: usize) -> Vec<f64> {
    use std::f64::consts::PI;
    (0..k).map(|j| -PI + 2.0 * PI * (j as f64 + 0.5) / k as f64).collect()
}

fn cmd_scatter(a: &ScatterArgs, cfg: &RunConfig, out: Option<&Path>) -> Outcome {
    let v = load(&a.potential)?;
    let tol = cfg.tolerances.unitarity;
    if let Some(z) = a.point.z {
        let d = coefficients(z, &v)?;
        let mut report = json!({
            "input": { "z": z, "potential": input_section(&a.potential, &v) },
            "m_plus": MatrixJson::from(&d.m_plus),
            "m_minus": MatrixJson::from(&d.m_minus),
            "n_plus": MatrixJson::from(&d.n_plus),
            "n_minus": MatrixJson::from(&d.n_minus),
            "condition": d.condition,
            "warnings": d.warnings,
        });
        let mut pass = true;
        if let Some(s) = &d.s {
            let l = d.dim();
            let unitarity = op_norm(&(s.adjoint() * s - identity(2 * l)));
            report["s"] = serde_json::to_value(MatrixJson::from(s)).expect("matrices serialise");
            report["det_s"] = json!(det(s));
            let on_circle = (z.norm() - 1.0).abs() < 1e-12;
            if on_circle {
                let ids = identity_suite(z, &v)?;
                pass = unitarity < tol && ids.max() < tol;
                report["identities"] = serde_json::to_value(&ids).expect("report serialises");
                report["time_delay"] = json!(time_delay(z, &v)?);
            }
            report["residual"] = json!({ "unitarity": unitarity });
        }
        report["pass"] = json!(pass);
        return Ok((report, verdict(pass)));
    }

    let k = a.point.circle_samples.expect("clap enforces one of --z / --circle-samples");
    if k == 0 {
        return Err(input_error("config", "--circle-samples must be positive"));
    }
    let rows: Vec<CircleSample> = circle_angles(k)
        .par_iter()
        .map(|&theta| {
            let z = C64::from_polar(1.0, theta);
            Ok(CircleSample { theta, det_s: det_s(z, &v)?, delay: time_delay(z, &v)? })
        })
        .collect::<Result<_, LabError>>()?;
    let modulus = rows.iter().map(|r| (r.det_s.norm() - 1.0).abs()).fold(0.0, f64::max);
    // z·τ(z) is real on the circle when |det S| = 1
    let phase_purity = rows.iter().map(|r| (C64::from_polar(1.0, r.theta) * r.delay).im.abs() / r.delay.norm().max(1.0)).fold(0.0, f64::max);
    let csv = a.csv.clone().or_else(|| out.map(|p| p.with_extension("csv")));
    let mut report = json!({
        "input": { "circle_samples": k, "potential": input_section(&a.potential, &v) },
        "residual": { "det_s_modulus": modulus, "phase_purity": phase_purity },
    });
    match &csv {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(|e| input_error("io", format!("{}: {e}", path.display())))?;
            write_circle_csv(std::io::BufWriter::new(file), &rows)?;
            report["csv"] = json!(path.display().to_string());
        }
        None => report["samples"] = serde_json::to_value(&rows).expect("samples serialise"),
    }
    let pass = modulus < tol && phase_purity < 1e-8;
    report["pass"] = json!(pass);
    Ok((report, verdict(pass)))
}

fn counts_section(r: &SpectralReport, l: usize) -> Value {
    json!({
        "J_b": r.j_b,
        "J_h": r.j_h(),
        "J_h_plus": r.j_h_plus,
        "J_h_minus": r.j_h_minus,
        "L": l,
        "expected": r.j_b as f64 + 0.5 * r.j_h() as f64 - l as f64,
    })
}

fn half_bound_section(r: &SpectralReport) -> Value {
    json!(r
        .half_bound
        .iter()
        .map(|h| json!({
            "edge": h.edge,
            "count": h.count,
            "singular_values": h.singular_values,
            "threshold": h.threshold,
            "kernel": MatrixJson::from(&h.kernel),
        }))
        .collect::<Vec<_>>())
}

fn bound_states_section(r: &SpectralReport) -> Value {
    json!(r
        .bound_states
        .iter()
        .map(|b| json!({ "z": b.z, "E": b.energy, "multiplicity": b.multiplicity, "kernel": MatrixJson::from(&b.kernel) }))
        .collect::<Vec<_>>())
}

fn cmd_spectrum(a: &SpectrumArgs, cfg: &RunConfig) -> Outcome {
    let v = load(&a.potential)?;
    let r = spectral_report(&v, &cfg.spectral())?;
    let base = a.dense_n.unwrap_or(cfg.dense_n);
    let roots: Vec<f64> = r.bound_states.iter().map(|b| b.z).collect();
    let n = oracle_size(&v, &roots, base);
    let (method, oracle) = if v.dim() * (2 * n as usize + 1) <= DENSE_CAP {
        ("dense", dense_truncation(&v, n, DENSE_CAP)?)
    } else {
        ("inertia", inertia_truncation(&v, n)?)
    };
    // compare states the oracle can see: |E| > 2 + 1e−6
    let mut ours: Vec<f64> = r
        .bound_states
        .iter()
        .filter(|b| b.energy.abs() > 2.0 + 1e-6)
        .flat_map(|b| std::iter::repeat(b.energy).take(b.multiplicity))
        .collect();
    ours.sort_by(f64::total_cmp);
    let max_dev = ours.iter().zip(&oracle.eigenvalues).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let pass = ours.len() == oracle.count && max_dev < 1e-6;
    Ok((
        json!({
            "input": input_section(&a.potential, &v),
            "counts": counts_section(&r, v.dim()),
            "bound_states": bound_states_section(&r),
            "half_bound": half_bound_section(&r),
            "edge_exponents": r.edge_exponents,
            "oracle": { "method": method, "N": n, "eigenvalues": oracle.eigenvalues, "count": oracle.count, "max_deviation": max_dev },
            "warnings": r.warnings,
            "pass": pass,
        }),
        verdict(pass),
    ))
}

fn levinson_config(cfg: &RunConfig, eps: &Option<Vec<f64>>, quad: Option<usize>) -> Result<levinson_core::LevinsonConfig, Failure> {
    let mut c = cfg.clone();
    if let Some(e) = eps {
        c.eps_grid = e.clone();
    }
    if let Some(k) = quad {
        c.quad_points = k;
    }
    c.validate()?;
    Ok(c.levinson())
}

fn levinson_report(path: &Path, cfg: &levinson_core::LevinsonConfig) -> Outcome {
    let v = load(path)?;
    let spectral = spectral_report(&v, &cfg.spectral)?;
    let r = levinson_with_spectral(&v, cfg, &spectral)?;
    Ok((
        json!({
            "input": input_section(path, &v),
            "counts": counts_section(&spectral, v.dim()),
            "bound_states": bound_states_section(&spectral),
            "half_bound": half_bound_section(&spectral),
            "contour": {
                "eps_grid": r.eps_grid,
                "integrals": r.integrals,
                "extrapolated": r.extrapolated,
                "normalized_winding": r.normalized_winding,
                "rounded_count": r.rounded_count,
                "lhs": r.lhs,
            },
            "edge_exponents": r.edge_exponents,
            "residual": r.residual,
            "warnings": r.warnings,
            "pass": r.pass,
        }),
        verdict(r.pass),
    ))
}

fn cmd_sweep(a: &SweepArgs, cfg: &RunConfig) -> Outcome {
    let lc = levinson_config(cfg, &a.eps_grid, a.quad_points)?;
    let dir = std::fs::read_dir(&a.potential_dir).map_err(|e| input_error("io", format!("{}: {e}", a.potential_dir.display())))?;
    let mut files: Vec<PathBuf> = dir
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(input_error("io", format!("no *.json potentials in {}", a.potential_dir.display())));
    }
    let results: Vec<(Value, Option<bool>)> = files
        .par_iter()
        .map(|p| match levinson_report(p, &lc) {
            Ok((mut r, code)) => {
                r["file"] = json!(p.display().to_string());
                (r, Some(code == EXIT_PASS))
            }
            Err(f) => (json!({ "file": p.display().to_string(), "error": { "kind": f.kind, "message": f.message } }), None),
        })
        .collect();
    let failed_inputs = results.iter().filter(|r| r.1.is_none()).count();
    let passed = results.iter().filter(|r| r.1 == Some(true)).count();
    let pass = passed == results.len();
    let report = json!({
        "input": { "potential_dir": a.potential_dir.display().to_string(), "files": files.len() },
        "summary": { "passed": passed, "failed": results.len() - passed - failed_inputs, "input_errors": failed_inputs },
        "results": results.into_iter().map(|r| r.0).collect::<Vec<_>>(),
        "pass": pass,
    });
    // unreadable potentials dominate verification failures
    let code = if failed_inputs > 0 { EXIT_INPUT } else { verdict(pass) };
    Ok((report, code))
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    let Some(p) = path else { return Ok(RunConfig::default()) };
    let text = std::fs::read_to_string(p).map_err(|e| input_error("io", format!("{}: {e}", p.display())))?;
    let c: RunConfig = serde_json::from_str(&text).map_err(|e| input_error("config", format!("{}: {e}", p.display())))?;
    c.validate()?;
    Ok(c)
}

fn dispatch(cli: &Cli) -> Outcome {
    let cfg = load_config(cli.config.as_deref())?;
    let out = cli.out.as_deref().or(cfg.out.as_deref());
    match &cli.command {
        Command::Jost(a) => cmd_jost(a),
        Command::Scatter(a) => {
            let a_csv = ScatterArgs { csv: a.csv.clone().or_else(|| cfg.csv.clone()), potential: a.potential.clone(), point: ScatterPoint { z: a.point.z, circle_samples: a.point.circle_samples } };
            cmd_scatter(&a_csv, &cfg, out)
        }
        Command::Spectrum(a) => cmd_spectrum(a, &cfg),
        Command::Levinson(a) => levinson_report(&a.potential, &levinson_config(&cfg, &a.eps_grid, a.quad_points)?),
        Command::Sweep(a) => cmd_sweep(a, &cfg),
    }
}

fn emit<W: Write>(report: &Value, out: Option<&Path>, stdout: &mut W) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(report).expect("reports serialise") + "\n";
    match out {
        Some(p) => std::fs::write(p, text),
        None => stdout.write_all(text.as_bytes()),
    }
}

fn thread_cap() -> Result<Option<usize>, String> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(format!("{THREADS_ENV} must be a positive integer, got `{s}`")),
        },
    }
}

/// Runs one invocation (`argv[0]` is the program name) and returns the exit code.
pub fn run_subcommand<I, T, W, E>(argv: I, stdout: &mut W, stderr: &mut E) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
    W: Write,
    E: Write,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_PASS };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    let pool = match thread_cap() {
        Ok(cap) => {
            let mut b = rayon::ThreadPoolBuilder::new();
            if let Some(n) = cap {
                b = b.num_threads(n);
            }
            b.build().expect("thread pool")
        }
        Err(msg) => {
            let _ = writeln!(stderr, "error: {msg}");
            return EXIT_INPUT;
        }
    };
    let out = cli.out.clone();
    match pool.install(|| dispatch(&cli)) {
        Ok((report, code)) => {
            if let Err(e) = emit(&report, out.as_deref(), stdout) {
                let _ = writeln!(stderr, "error: cannot write report: {e}");
                return EXIT_INPUT;
            }
            code
        }
        Err(f) => {
            let report = json!({ "error": { "kind": f.kind, "message": f.message }, "pass": false });
            let _ = emit(&report, out.as_deref(), stdout);
            let _ = writeln!(stderr, "error ({}): {}", f.kind, f.message);
            EXIT_INPUT
        }
    }
}
