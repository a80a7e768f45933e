//! Command-line front end. Every run writes its outputs under
//! `<out>/<command>-<hash>.*`, where the hash covers the command and its
//! parameters, so reruns with the same parameters overwrite byte-identical
//! files.
//!
//! Exit codes: 0 success, 1 usage or data error, 2 certificate failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::counterexample::{
    build_u, dual_certificate_g, direction_step, predicted_quotient, w21_partial_sums, OscillatoryProfile, Shape,
};
use crate::data::Data;
use crate::error::{Error, Result};
use crate::grid::{log_grid, make_grid, Grading, Grid};
use crate::ictv::{boundedness_report, denoise_ictv, ictv_optimality, IctvOptions, IctvSource};
use crate::levelset::{auto_levels, diagnose_levels, level_set, perimeter, PerimeterMode, RadialProfile};
use crate::par::Exec;
use crate::radial::{
    classify_general, classify_power, cubic_residual, dual_field_z, explicit_minimizer, inverse_radius,
    switching_inequality,
};
use crate::rof::{denoise, optimality_residuals, RofSolution};
use crate::sweep::{alpha_sweep, beta_sweep, ictv_sweep, refinement_sweep};
use crate::taut_string::kkt_certificate;
use crate::weights::{build_transform, build_tube, Weight, WeightPair};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "tautweight", version, about = "Weighted 1D TV denoising by taut strings, with certificates")]
pub struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "TAUTWEIGHT_OUT", default_value = ".")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Weighted ROF denoising of 1D data.
    Denoise(DenoiseArgs),
    /// Radial minimizer for f = r^{-beta}, explicit when beta = 1, d = 3.
    Radial(RadialArgs),
    /// Boundedness classification of f = r^{-beta}.
    Classify(ClassifyArgs),
    /// Level-set diagnostics of a radial solution.
    Diagnose(DiagnoseArgs),
    /// Infimal-convolution TV + TV^2 denoising.
    Ictv(IctvArgs),
    /// Difference quotients of the oscillatory counterexample.
    Counterexample(CounterexampleArgs),
    /// Parameter sweep; one row per value.
    Sweep(SweepArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct DenoiseArgs {
    /// `builtin:power:beta=..`, `builtin:step`, `builtin:hat`, `builtin:const:value=..` or a CSV path.
    #[arg(long)]
    pub data: String,
    /// Sets both weights: `unit`, `power:d=<n>` or `table:<csv>`.
    #[arg(long, default_value = "unit")]
    pub weight: String,
    /// Overrides the fidelity weight.
    #[arg(long)]
    pub phi: Option<String>,
    /// Overrides the TV weight.
    #[arg(long)]
    pub rho: Option<String>,
    #[arg(long)]
    pub alpha: f64,
    /// Number of cells.
    #[arg(long, default_value_t = 1024)]
    pub n: usize,
    /// `uniform`, `log` or `geometric:<ratio>`.
    #[arg(long, default_value = "uniform")]
    pub grid: String,
    /// Left end of the grid; defaults to 0, or 1e-6 for log grids.
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    #[arg(long, default_value_t = 1e-7)]
    pub kink_tol: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub feas_tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct RadialArgs {
    #[arg(long, default_value_t = 3)]
    pub d: u32,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0, conflicts_with = "data")]
    pub beta: f64,
    /// Tabulated radial data `r,value` instead of a pure power.
    #[arg(long)]
    pub data: Option<String>,
    #[arg(long, default_value_t = 4096)]
    pub n: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct ClassifyArgs {
    #[arg(long, conflicts_with = "data")]
    pub beta: Option<f64>,
    /// Tabulated data classified by its fitted decay at 0.
    #[arg(long)]
    pub data: Option<String>,
    #[arg(long, default_value_t = 3)]
    pub d: u32,
    /// With `--nu`, also evaluates the switching inequality.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Comma-separated switch points.
    #[arg(long)]
    pub nu: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct DiagnoseArgs {
    /// JSON written by `denoise` or `radial`, or `explicit:alpha=<a>`.
    #[arg(long)]
    pub solution: String,
    /// `auto` or a comma-separated list of nonzero levels.
    #[arg(long, default_value = "auto")]
    pub levels: String,
    #[arg(long, default_value_t = 20)]
    pub n_levels: usize,
    /// `relative` or `whole_space`.
    #[arg(long, default_value = "relative")]
    pub mode: String,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct IctvArgs {
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub gamma: f64,
    /// `builtin:step`, `builtin:spike[:exponent=..]` or any denoise data spec.
    #[arg(long, default_value = "builtin:step")]
    pub data: String,
    #[arg(long, default_value_t = 1024)]
    pub n: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub gap_tol: f64,
    #[arg(long, default_value_t = 200_000)]
    pub max_iter: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct CounterexampleArgs {
    /// `hat` or `mollified-step`.
    #[arg(long, default_value = "hat")]
    pub profile: String,
    #[arg(long, default_value_t = 8)]
    pub n_max: usize,
    /// Cells per dyadic support, a power of two >= 8.
    #[arg(long, default_value_t = 64)]
    pub cells: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    /// `alpha`, `n`, `beta` or `ictv`.
    #[arg(long)]
    pub kind: String,
    /// Comma-separated values; an empty list does nothing.
    #[arg(long, default_value = "", allow_hyphen_values = true)]
    pub values: String,
    #[arg(long, default_value_t = 3)]
    pub d: u32,
    /// Fixed alpha for `n`, `beta` and `ictv` sweeps.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    #[arg(long, default_value = "builtin:step")]
    pub data: String,
    /// Switch points for `beta` sweeps.
    #[arg(long, default_value = "1e-1,1e-2,1e-3,1e-4,1e-5,1e-6")]
    pub nu: String,
    /// Cells for `alpha` sweeps.
    #[arg(long, default_value_t = 4096)]
    pub n: usize,
    /// Inner radius of the log grids in `n` sweeps.
    #[arg(long, default_value_t = 1e-6)]
    pub a: f64,
    #[arg(long)]
    pub sequential: bool,
}

/// Result of one command before it is written to disk.
struct Outcome {
    command: &'static str,
    params: Value,
    tolerances: Value,
    json: Value,
    /// `(suffix, bytes)`; the suffix is inserted before `.csv`.
    csv: Vec<(&'static str, Vec<u8>)>,
    failures: Vec<String>,
}

/// The arrays `diagnose` needs from a denoising run.
#[derive(Debug, Serialize, Deserialize)]
pub struct SolutionFile {
    pub data: String,
    pub alpha: f64,
    pub d: Option<u32>,
    pub knots: Vec<f64>,
    pub u: Vec<f64>,
    pub f_bar: Vec<f64>,
}

impl SolutionFile {
    fn new(sol: &RofSolution, data: &str, d: Option<u32>) -> Self {
        Self {
            data: data.to_string(),
            alpha: sol.alpha,
            d,
            knots: sol.grid.knots().to_vec(),
            u: sol.u.clone(),
            f_bar: sol.f_bar.clone(),
        }
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Errors are reported as one JSON object on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    0
                }
                _ => {
                    eprint!("{}", e.render());
                    report_error("usage", &e.kind().to_string());
                    1
                }
            };
        }
    };
    match dispatch(&cli) {
        Ok(Some(o)) => match write_outputs(&cli.out, &o) {
            Ok(files) => {
                let ok = o.failures.is_empty();
                let summary = json!({
                    "status": if ok { "ok" } else { "certificate_failure" },
                    "command": o.command,
                    "files": files,
                    "failures": o.failures,
                });
                if ok {
                    println!("{summary}");
                    0
                } else {
                    eprintln!("{summary}");
                    2
                }
            }
            Err(e) => {
                report_error(e.kind(), &e.to_string());
                1
            }
        },
        Ok(None) => {
            println!("{}", json!({ "status": "ok", "command": "sweep", "files": [], "rows": 0 }));
            0
        }
        Err(e) => {
            report_error(e.kind(), &e.to_string());
            1
        }
    }
}

fn report_error(kind: &str, message: &str) {
    eprintln!("{}", json!({ "status": "error", "kind": kind, "message": message }));
}

fn dispatch(cli: &Cli) -> Result<Option<Outcome>> {
    match &cli.command {
        Command::Denoise(a) => run_denoise(a).map(Some),
        Command::Radial(a) => run_radial(a).map(Some),
        Command::Classify(a) => run_classify(a).map(Some),
        Command::Diagnose(a) => run_diagnose(a).map(Some),
        Command::Ictv(a) => run_ictv(a).map(Some),
        Command::Counterexample(a) => run_counterexample(a).map(Some),
        Command::Sweep(a) => run_sweep(a),
    }
}

/// Short hex digest of the command and its canonical parameter JSON.
pub fn params_hash(command: &str, params: &Value) -> String {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update(b"\n");
    h.update(params.to_string().as_bytes());
    h.finalize().iter().take(6).map(|b| format!("{b:02x}")).collect()
}

fn pretty(v: &Value) -> Result<Vec<u8>> {
    let mut s = serde_json::to_vec_pretty(v)?;
    s.push(b'\n');
    Ok(s)
}

fn write_outputs(dir: &Path, o: &Outcome) -> Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let stem = format!("{}-{}", o.command, params_hash(o.command, &o.params));
    let mut files = Vec::new();
    let mut put = |name: String, bytes: &[u8]| -> Result<()> {
        fs::write(dir.join(&name), bytes)?;
        files.push(name);
        Ok(())
    };
    for (suffix, bytes) in &o.csv {
        put(format!("{stem}{suffix}.csv"), bytes)?;
    }
    put(format!("{stem}.json"), &pretty(&o.json)?)?;
    let manifest = json!({
        "schema_version": SCHEMA_VERSION,
        "command": o.command,
        "params": o.params,
        "versions": { "tautweight": env!("CARGO_PKG_VERSION") },
        "tolerances": o.tolerances,
        "files": files.clone(),
        "pass": o.failures.is_empty(),
        "failures": o.failures,
    });
    let name = format!("{stem}.manifest.json");
    fs::write(dir.join(&name), pretty(&manifest)?)?;
    files.push(name);
    Ok(files)
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| {
            x.parse::<f64>()
                .map_err(|e| Error::InvalidParameter(format!("bad number {x:?}: {e}")))
        })
        .collect()
}

fn parse_counts(s: &str) -> Result<Vec<usize>> {
    parse_list(s)?
        .into_iter()
        .map(|v| {
            if v.fract() == 0.0 && (2.0..=1e9).contains(&v) {
                Ok(v as usize)
            } else {
                Err(Error::InvalidParameter(format!("cell count {v} must be an integer >= 2")))
            }
        })
        .collect()
}

fn parse_grid(kind: &str, a: Option<f64>, b: f64, n: usize) -> Result<Grid> {
    match kind {
        "uniform" => make_grid(a.unwrap_or(0.0), b, n, Grading::Uniform),
        "log" => log_grid(a.unwrap_or(1e-6), b, n),
        other => match other.strip_prefix("geometric:") {
            Some(r) => {
                let ratio = r
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidParameter(format!("geometric ratio: {e}")))?;
                make_grid(a.unwrap_or(0.0), b, n, Grading::Geometric(ratio))
            }
            None => Err(Error::InvalidParameter(format!(
                "unknown grid {other:?}; expected uniform | log | geometric:<ratio>"
            ))),
        },
    }
}

fn to_value<T: Serialize>(t: &T) -> Result<Value> {
    Ok(serde_json::to_value(t)?)
}

fn collect_failures(prefix: &str, rep: &crate::CertificateReport, out: &mut Vec<String>) {
    out.extend(rep.failures().map(|c| format!("{prefix}.{}", c.name)));
}

fn solution_csv(sol: &RofSolution, f: &Data) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    sol.write_csv(f, &mut buf)?;
    Ok(buf)
}

fn run_denoise(a: &DenoiseArgs) -> Result<Outcome> {
    let f = Data::parse(&a.data)?;
    let base = Weight::parse(&a.weight)?;
    let phi = a.phi.as_deref().map(Weight::parse).transpose()?.unwrap_or_else(|| base.clone());
    let rho = a.rho.as_deref().map(Weight::parse).transpose()?.unwrap_or(base);
    let w = WeightPair::new(phi, rho, a.alpha)?;
    let grid = parse_grid(&a.grid, a.a, a.b, a.n)?;
    let sol = denoise(&f, &w, &grid)?;

    let cert = optimality_residuals(&sol, &f, &w)?;
    let tube = build_tube(&f, &w, &build_transform(&w, &sol.grid)?)?;
    let taut = sol.taut.as_ref().ok_or_else(|| Error::Structural("no taut string".into()))?;
    let kkt = kkt_certificate(taut, &tube, a.kink_tol, a.feas_tol);
    let mut failures = Vec::new();
    collect_failures("optimality", &cert, &mut failures);
    if !kkt.pass {
        failures.push("kkt".into());
    }

    let d = match (&w.phi, &w.rho) {
        (Weight::Power { d: p }, Weight::Power { d: r }) if p == r => Some(*p),
        _ => None,
    };
    let mut string_csv = Vec::new();
    taut.write_csv(&tube, &mut string_csv)?;
    let json = json!({
        "solution": SolutionFile::new(&sol, &a.data, d),
        "big_u": sol.big_u,
        "xi": sol.xi,
        "energy": sol.energy,
        "dual_value": sol.dual_value,
        "gap": sol.gap,
        "certificate": cert,
        "kkt": kkt,
    });
    Ok(Outcome {
        command: "denoise",
        params: to_value(a)?,
        tolerances: json!({ "residuals": 1e-6, "kink_tol": a.kink_tol, "feas_tol": a.feas_tol }),
        json,
        csv: vec![("", solution_csv(&sol, &f)?), (".string", string_csv)],
        failures,
    })
}

fn run_radial(a: &RadialArgs) -> Result<Outcome> {
    let tolerances = json!({ "residuals": 1e-6, "dual_field_sup": 1e-10, "dual_field_continuity": 1e-10,
                             "dual_field_divergence": 1e-8 });
    let params = to_value(a)?;
    let mut failures = Vec::new();
    let explicit = if a.data.is_none() && a.beta == 1.0 && a.d == 3 {
        match explicit_minimizer(a.alpha) {
            Ok(s) => Some(s),
            Err(Error::UnsupportedRegime(_)) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let w = WeightPair::radial(a.d, a.alpha)?;

    if let Some(s) = explicit {
        let g = make_grid(0.0, 1.0, a.n, Grading::Uniform)?;
        let dz = dual_field_z(&s, &g);
        let sampled = s.to_rof_solution(&g)?;
        let f = inverse_radius();
        let cert = optimality_residuals(&sampled, &f, &w)?;
        collect_failures("dual_field_z", &dz, &mut failures);
        collect_failures("optimality", &cert, &mut failures);

        let lg = log_grid(1e-6, 1.0, a.n)?;
        let mut wr = csv::Writer::from_writer(Vec::new());
        wr.write_record(["r", "u", "f"])?;
        for &r in lg.knots() {
            wr.write_record([r.to_string(), s.u(r).to_string(), s.f(r).to_string()])?;
        }
        let csv_bytes = wr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        let json = json!({
            "explicit": true,
            "c": s.c,
            "flat_value": s.flat_value(),
            "cubic_residual": cubic_residual(a.alpha, s.c),
            "verdict": classify_power(1.0, 3)?,
            "certificates": { "dual_field_z": dz, "optimality": cert },
            "solution": SolutionFile::new(&sampled, "builtin:power:beta=1", Some(3)),
            "diagnose": format!("explicit:alpha={}", a.alpha),
        });
        return Ok(Outcome { command: "radial", params, tolerances, json, csv: vec![("", csv_bytes)], failures });
    }

    if !(a.alpha > 0.0 && a.alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {}", a.alpha)));
    }
    let (f, spec, grid, verdict) = match &a.data {
        Some(path) => {
            let f = Data::parse(path)?;
            let Data::Sampled(s) = &f else {
                return Err(Error::InvalidParameter("--data expects a CSV path".into()));
            };
            let v = classify_general(s, a.d, 0.05)?;
            let g = s.grid().clone();
            (f, path.clone(), g, v)
        }
        None => {
            let v = classify_power(a.beta, a.d)?;
            let spec = format!("builtin:power:beta={}", a.beta);
            (Data::power(a.beta), spec, log_grid(1e-6, 1.0, a.n)?, v)
        }
    };
    let sol = denoise(&f, &w, &grid)?;
    let cert = optimality_residuals(&sol, &f, &w)?;
    collect_failures("optimality", &cert, &mut failures);
    let mut wr = csv::Writer::from_writer(Vec::new());
    wr.write_record(["r", "u", "f"])?;
    let k = sol.grid.knots();
    for (i, &r) in k.iter().enumerate() {
        let u = sol.u[i.min(sol.u.len() - 1)];
        wr.write_record([r.to_string(), u.to_string(), f.eval(r).to_string()])?;
    }
    let csv_bytes = wr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let json = json!({
        "explicit": false,
        "c": Value::Null,
        "flat_value": Value::Null,
        "verdict": verdict,
        "energy": sol.energy,
        "gap": sol.gap,
        "certificates": { "optimality": cert },
        "solution": SolutionFile::new(&sol, &spec, Some(a.d)),
    });
    Ok(Outcome { command: "radial", params, tolerances, json, csv: vec![("", csv_bytes)], failures })
}

fn run_classify(a: &ClassifyArgs) -> Result<Outcome> {
    let switching = match (&a.nu, a.alpha, a.beta) {
        (Some(nus), Some(alpha), Some(beta)) => parse_list(nus)?
            .into_iter()
            .map(|nu| Ok(json!({ "nu": nu, "integrals": switching_inequality(beta, a.d, alpha, nu)? })))
            .collect::<Result<Vec<_>>>()?,
        (None, _, _) => Vec::new(),
        _ => return Err(Error::InvalidParameter("--nu needs --alpha and --beta".into())),
    };
    let verdict = match (&a.beta, &a.data) {
        (Some(beta), None) => classify_power(*beta, a.d),
        (None, Some(path)) => match Data::parse(path)? {
            Data::Sampled(s) => classify_general(&s, a.d, 0.05),
            Data::Exact(_) => return Err(Error::InvalidParameter("--data expects a CSV path".into())),
        },
        _ => return Err(Error::InvalidParameter("give exactly one of --beta and --data".into())),
    };
    // the switching integrals stay meaningful for data outside L^2
    let json = match verdict {
        Ok(v) => json!({ "verdict": v, "switching": switching }),
        Err(e) if !switching.is_empty() => json!({
            "verdict": Value::Null,
            "verdict_error": { "kind": e.kind(), "message": e.to_string() },
            "switching": switching,
        }),
        Err(e) => return Err(e),
    };
    Ok(Outcome {
        command: "classify",
        params: to_value(a)?,
        tolerances: json!({}),
        json,
        csv: Vec::new(),
        failures: Vec::new(),
    })
}

struct Loaded {
    u: RadialProfile,
    v: RadialProfile,
    f: Data,
    alpha: f64,
    d: u32,
    extra: Vec<f64>,
    cells: bool,
}

fn load_solution(spec: &str) -> Result<Loaded> {
    if let Some(rest) = spec.strip_prefix("explicit:") {
        let alpha = rest
            .strip_prefix("alpha=")
            .and_then(|v| v.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::InvalidParameter(format!("bad explicit solution {spec:?}")))?;
        let s = explicit_minimizer(alpha)?;
        let u = s.profile();
        let Data::Exact(fp) = inverse_radius() else { unreachable!() };
        let v = fp.sub(&u).scale(1.0 / alpha);
        return Ok(Loaded {
            u: RadialProfile::Exact(u),
            v: RadialProfile::Exact(v),
            f: inverse_radius(),
            alpha,
            d: 3,
            extra: vec![s.flat_value(), 2.0 * s.flat_value()],
            cells: false,
        });
    }
    let text = fs::read_to_string(spec)?;
    let root: Value = serde_json::from_str(&text)?;
    // explicit radial runs are diagnosed on the closed form, not the samples
    if let Some(Value::String(src)) = root.get("diagnose") {
        if src.starts_with("explicit:") {
            return load_solution(src);
        }
    }
    let file: SolutionFile = serde_json::from_value(root.get("solution").cloned().unwrap_or(root))?;
    let d = file
        .d
        .ok_or_else(|| Error::Precondition("diagnostics need a radial solution (equal power weights)".into()))?;
    if file.u.len() != file.f_bar.len() {
        return Err(Error::Structural("u and f_bar lengths differ".into()));
    }
    let grid = Grid::from_knots(file.knots)?;
    let v: Vec<f64> = file.f_bar.iter().zip(&file.u).map(|(f, u)| (f - u) / file.alpha).collect();
    Ok(Loaded {
        u: RadialProfile::cells(grid.clone(), file.u)?,
        v: RadialProfile::cells(grid, v)?,
        f: Data::parse(&file.data)?,
        alpha: file.alpha,
        d,
        extra: Vec::new(),
        cells: true,
    })
}

fn run_diagnose(a: &DiagnoseArgs) -> Result<Outcome> {
    let mode: PerimeterMode = a.mode.parse()?;
    let l = load_solution(&a.solution)?;
    let levels = if a.levels == "auto" {
        let lv = auto_levels(&l.u, a.n_levels, &l.extra);
        // cell values are attained on whole cells; sit just above them
        if l.cells {
            lv.into_iter().map(|s| s * (1.0 + 1e-9)).collect()
        } else {
            lv
        }
    } else {
        let lv = parse_list(&a.levels)?;
        if lv.contains(&0.0) {
            return Err(Error::InvalidParameter("levels must be nonzero".into()));
        }
        lv
    };
    let reports = diagnose_levels(&l.u, &l.v, &l.f, l.alpha, l.d, &levels, mode)?;
    let mut failures = Vec::new();
    for r in &reports {
        let ls = level_set(&l.u, r.s, l.d)?;
        let scale = 1.0 + perimeter(&ls, PerimeterMode::WholeSpace);
        if !(r.identity_residual <= a.tol * scale) {
            failures.push(format!("perimeter_identity@{}", r.s));
        }
        if let Some(iso) = &r.isoperimetric {
            if !(iso.ratio >= 1.0 - 1e-9) {
                failures.push(format!("isoperimetric@{}", r.s));
            }
        }
    }
    Ok(Outcome {
        command: "diagnose",
        params: to_value(a)?,
        tolerances: json!({ "identity_relative": a.tol, "isoperimetric_ratio": 1.0 - 1e-9 }),
        json: to_value(&reports)?,
        csv: Vec::new(),
        failures,
    })
}

fn run_ictv(a: &IctvArgs) -> Result<Outcome> {
    let src = IctvSource::parse(&a.data)?;
    let g = make_grid(0.0, 1.0, a.n, Grading::Uniform)?;
    let p = src.problem(&g, a.alpha, a.gamma)?;
    let opts = IctvOptions { gap_tol: a.gap_tol, max_iter: a.max_iter };
    let s = denoise_ictv(&p, &opts)?;
    let cert = ictv_optimality(&s, &p, opts.gap_tol);
    let mut failures = Vec::new();
    if !s.certified {
        failures.push("gap".into());
    }
    collect_failures("optimality", &cert, &mut failures);

    let mut wr = csv::Writer::from_writer(Vec::new());
    wr.write_record(["x", "f", "u", "g", "u_minus_g"])?;
    for i in 0..p.len() {
        wr.write_record([
            s.x[i].to_string(),
            p.f[i].to_string(),
            s.u[i].to_string(),
            s.g[i].to_string(),
            (s.u[i] - s.g[i]).to_string(),
        ])?;
    }
    let csv_bytes = wr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let json = json!({
        "cells": p.len(),
        "h": p.h,
        "primal_energy": s.primal_energy,
        "dual_value": s.dual_value,
        "gap": s.gap,
        "iterations": s.iterations,
        "certified": s.certified,
        "certificate": cert,
        "boundedness": boundedness_report(&s),
    });
    Ok(Outcome {
        command: "ictv",
        params: to_value(a)?,
        tolerances: json!({ "gap": a.gap_tol, "residuals": 10.0 * a.gap_tol }),
        json,
        csv: vec![("", csv_bytes)],
        failures,
    })
}

fn run_counterexample(a: &CounterexampleArgs) -> Result<Outcome> {
    let shape: Shape = a.profile.parse()?;
    let p = OscillatoryProfile::new(shape, a.n_max, a.cells)?;
    let built = build_u(&p)?;
    let mut failures = Vec::new();
    let mut table = Vec::new();
    let mut prev = f64::INFINITY;
    for n in 0..=a.n_max {
        let st = direction_step(&p, n)?;
        let want = predicted_quotient(shape, n);
        let rel = ((st.quotient - want) / want).abs();
        if st.cancellation_residual > 1e-12 {
            failures.push(format!("cancellation@{n}"));
        }
        if shape == Shape::Hat && !(rel <= 1e-6) {
            failures.push(format!("quotient@{n}"));
        }
        if !(st.quotient < prev) {
            failures.push(format!("decrease@{n}"));
        }
        prev = st.quotient;
        table.push(json!({
            "n": n,
            "t_n": st.t_n,
            "quotient": st.quotient,
            "predicted": want,
            "relative_error": rel,
            "tv_v": st.tv_v,
            "norm_v": st.norm_v,
            "cancellation_residual": st.cancellation_residual,
        }));
    }
    let (cert, w21) = if shape == Shape::MollifiedStep {
        let c = dual_certificate_g(&p, 1)?;
        collect_failures("dual_certificate", &c, &mut failures);
        (to_value(&c)?, to_value(&w21_partial_sums(&p)?)?)
    } else {
        (Value::Null, Value::Null)
    };

    let mut wr = csv::Writer::from_writer(Vec::new());
    wr.write_record(["x", "u"])?;
    for (x, u) in built.u.grid().knots().iter().zip(built.u.values()) {
        wr.write_record([x.to_string(), u.to_string()])?;
    }
    let csv_bytes = wr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let json = json!({
        "domain": "(0,2)x(0,1), constant in x2; computed on the 1D reduction",
        "total_variation": built.total_variation,
        "block_norms": built.block_norms,
        "table": table,
        "dual_certificate": cert,
        "w21_partial_sums": w21,
    });
    Ok(Outcome {
        command: "counterexample",
        params: to_value(a)?,
        tolerances: json!({ "quotient_relative": 1e-6, "cancellation": 1e-12, "pairing": 1e-8 }),
        json,
        csv: vec![("", csv_bytes)],
        failures,
    })
}

fn run_sweep(a: &SweepArgs) -> Result<Option<Outcome>> {
    let exec = if a.sequential { Exec::Sequential } else { Exec::Parallel };
    let values = parse_list(&a.values)?;
    if !matches!(a.kind.as_str(), "alpha" | "n" | "beta" | "ictv") {
        return Err(Error::InvalidParameter(format!(
            "unknown sweep kind {:?}; expected alpha | n | beta | ictv",
            a.kind
        )));
    }
    if values.is_empty() {
        return Ok(None);
    }
    let (json, tolerances) = match a.kind.as_str() {
        "alpha" => {
            let s = alpha_sweep(&values, a.n, exec);
            (to_value(&s)?, json!({ "dual_field_sup": 1e-10, "dual_field_divergence": 1e-8 }))
        }
        "n" => {
            let s = refinement_sweep(&parse_counts(&a.values)?, a.alpha.unwrap_or(0.25), a.a, exec);
            (to_value(&s)?, json!({ "residuals": 1e-6 }))
        }
        "beta" => {
            let s = beta_sweep(&values, a.d, a.alpha.unwrap_or(0.1), &parse_list(&a.nu)?, exec);
            (to_value(&s)?, json!({}))
        }
        _ => {
            let src = IctvSource::parse(&a.data)?;
            let opts = IctvOptions::default();
            let s = ictv_sweep(&parse_counts(&a.values)?, &src, a.alpha.unwrap_or(0.05), a.gamma, &opts, exec);
            (to_value(&s)?, json!({ "gap": opts.gap_tol, "residuals": 10.0 * opts.gap_tol }))
        }
    };
    let failures = json["rows"]
        .as_array()
        .map(|rows| {
            rows.iter()
                .filter(|r| r["pass"] != Value::Bool(true))
                .map(|r| format!("row@{}", r["value"]))
                .collect()
        })
        .unwrap_or_default();
    // the parallel flag does not change results, so it stays out of the hash
    let mut params = to_value(a)?;
    if let Some(m) = params.as_object_mut() {
        m.remove("sequential");
    }
    Ok(Some(Outcome { command: "sweep", params, tolerances, json, csv: Vec::new(), failures }))
}
