//! `qrm`: command-line front end for tri-partite reset models.

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array2;
use num_complex::Complex64;
use qrm_core::config::{parse_grid, parse_override, resolve_file, resolve_preset, ResolvedModel};
use qrm_core::dynamics::{propagate_exact, propagate_reduced};
use qrm_core::error::{QrmError, Result};
use qrm_core::examples::{QubitNQubitParams, ThreeQubitParams};
use qrm_core::linalg::{self, fro_norm, trace};
use qrm_core::markov::rate_matrix;
use qrm_core::model::build_lindbladian;
use qrm_core::perturbation::{check_coup, numeric_steady_state, Machinery};
use qrm_core::verify;
use serde::Serialize;
use serde_json::{json, Value};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

const DEFAULT_SEED: u64 = 20240917;

#[derive(Parser, Debug)]
#[command(name = "qrm", version, about = "Perturbative steady states and emergent Markov chains of tri-partite reset models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Eigenvalues of L_g.
    Spectrum(Common),
    /// Perturbative steady state to order K, checked against the numeric kernel.
    Steady(Common),
    /// Second-order map Phi_D and the Coup assumption.
    Coup(Common),
    /// Rate matrix and transition probabilities of the emergent chain.
    Markov(Common),
    /// Exact against reduced dynamics on a time grid.
    Dynamics(Common),
    /// Closed forms of a worked example against the generic machinery.
    Example(Common),
    /// Seeded oracle-equivalence suite.
    Verify(Common),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Model file (JSON, complex entries as [re, im]).
    #[arg(long, conflicts_with = "preset")]
    model: Option<PathBuf>,
    /// three-qubit, three-qubit-driven, qubit-n-qubit or random.
    #[arg(long)]
    preset: Option<String>,
    /// Override a preset parameter or model-file field, e.g. --set u=0.5.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Coupling strength.
    #[arg(long)]
    g: Option<f64>,
    /// a:b:n, a:b:nlog or a comma list.
    #[arg(long = "g-grid")]
    g_grid: Option<String>,
    /// Time grid, same syntax as --g-grid.
    #[arg(long = "t-grid")]
    t_grid: Option<String>,
    /// Series order.
    #[arg(short = 'K', default_value_t = 2)]
    order: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Write <subcommand>.<format> into this directory instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

/// Tabular payload for csv output.
struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

struct Output {
    json: Value,
    table: Table,
}

fn cplx(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

fn cmat(m: &Array2<Complex64>) -> Vec<Vec<[f64; 2]>> {
    m.rows().into_iter().map(|r| r.iter().map(|z| cplx(*z)).collect()).collect()
}

fn rmat(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

impl Common {
    fn resolve(&self) -> Result<ResolvedModel> {
        let overrides = self.set.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>>>()?;
        let mut r = match (&self.model, &self.preset) {
            (Some(path), None) => resolve_file(path, &overrides)?,
            (None, Some(name)) => resolve_preset(name, &overrides, self.seed)?,
            (None, None) => return Err(QrmError::Config("one of --model or --preset is required".into())),
            (Some(_), Some(_)) => unreachable!("clap enforces the conflict"),
        };
        if let Some(g) = self.g {
            r.model = r.model.with_g(g);
            r.config.g = g;
        }
        Ok(r)
    }

    fn g_values(&self, model_g: f64) -> Result<Vec<f64>> {
        match &self.g_grid {
            Some(s) => parse_grid(s),
            None => Ok(vec![model_g]),
        }
    }

    fn t_values(&self, default: &str) -> Result<Vec<f64>> {
        parse_grid(self.t_grid.as_deref().unwrap_or(default))
    }

    fn check_tol(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(QrmError::Config(format!("--tol {} must be positive", self.tol)));
        }
        Ok(())
    }
}

fn spectrum(c: &Common, r: &ResolvedModel) -> Result<Output> {
    let mut per_g = Vec::new();
    let mut rows = Vec::new();
    for g in c.g_values(r.model.g)? {
        let mut ev = linalg::eigvals(&build_lindbladian(&r.model.with_g(g)).matrix)?;
        ev.reverse();
        for z in &ev {
            rows.push(vec![num(g), num(z.re), num(z.im)]);
        }
        per_g.push(json!({ "g": g, "eigenvalues": ev.iter().map(|z| cplx(*z)).collect::<Vec<_>>() }));
    }
    Ok(Output { json: json!({ "spectra": per_g }), table: Table { columns: vec!["g", "re", "im"], rows } })
}

fn steady(c: &Common, r: &ResolvedModel) -> Result<Output> {
    let mach = Machinery::new(&r.model)?;
    let series = mach.steady_state_series(c.order)?;
    let hierarchy = series.hierarchy_residual(&r.model);
    if hierarchy > c.tol {
        return Err(QrmError::residual("series hierarchy", hierarchy, c.tol));
    }
    let mut points = Vec::new();
    let mut rows = Vec::new();
    for g in c.g_values(r.model.g)? {
        let rho = series.partial_sum(g, c.order);
        let m = r.model.with_g(g);
        let lindblad_residual = fro_norm(&build_lindbladian(&m).apply(&rho));
        let (exact, kernel_dim) = if g == 0.0 { (mach.rho0()?, 0) } else { numeric_steady_state(&m)? };
        let deviation = fro_norm(&(&rho - &exact));
        rows.push(vec![num(g), num(trace(&rho).re), num(lindblad_residual), num(deviation), kernel_dim.to_string()]);
        points.push(json!({
            "g": g,
            "rho": cmat(&rho),
            "lindbladian_residual": lindblad_residual,
            "kernel_deviation": deviation,
            "kernel_dim": kernel_dim,
        }));
    }
    let (tr, herm, _) = series.trace_and_hermiticity();
    Ok(Output {
        json: json!({
            "order": c.order,
            "branch": format!("{:?}", mach.branch()),
            "residual": hierarchy,
            "trace_defect": tr,
            "hermiticity_defect": herm,
            "rho_c": series.r_c.iter().map(cmat).collect::<Vec<_>>(),
            "points": points,
        }),
        table: Table { columns: vec!["g", "trace", "lindbladian_residual", "kernel_deviation", "kernel_dim"], rows },
    })
}

fn coup(_c: &Common, r: &ResolvedModel) -> Result<Output> {
    let mach = Machinery::new(&r.model)?;
    let report = check_coup(&mach.phi)?;
    if !report.holds {
        return Err(QrmError::Coup(format!(
            "rank Phi_D = {} < {}, closed classes {}",
            report.rank,
            mach.basis.dim() - 1,
            report.closed_classes
        )));
    }
    let phi_d = &mach.phi.phi_d;
    let rows = phi_d.indexed_iter().map(|((i, j), x)| vec![i.to_string(), j.to_string(), num(*x)]).collect();
    Ok(Output {
        json: json!({
            "basis_energies": mach.basis.energies,
            "phi_d": rmat(phi_d),
            "column_sum_defect": mach.phi.column_sum_defect(),
            "sign_defect": mach.phi.sign_defect(),
            "report": report,
        }),
        table: Table { columns: vec!["row", "col", "phi_d"], rows },
    })
}

fn markov(c: &Common, r: &ResolvedModel) -> Result<Output> {
    let rm = rate_matrix(&r.model)?;
    let pi = rm.stationary_distribution()?;
    let mut kernels = Vec::new();
    let mut rows = Vec::new();
    for s in c.t_values("0:5:6")? {
        let k = rm.transition_probabilities(s)?;
        for ((i, j), x) in k.p.indexed_iter() {
            rows.push(vec![num(s), i.to_string(), j.to_string(), num(*x)]);
        }
        kernels.push(json!({ "s": s, "p": rmat(&k.p), "raw_min": k.raw_min, "clamped": k.clamped }));
    }
    let spectrum: Vec<_> = rm.spectrum()?.into_iter().map(cplx).collect();
    Ok(Output {
        json: json!({ "q": rmat(&rm.q), "stationary": pi, "spectrum": spectrum, "transitions": kernels }),
        table: Table { columns: vec!["s", "from", "to", "p"], rows },
    })
}

fn dynamics(c: &Common, r: &ResolvedModel) -> Result<Output> {
    let g = r.model.g;
    if g <= 0.0 {
        return Err(QrmError::Config("dynamics needs --g > 0".into()));
    }
    let default = format!("0:{}:21", 5.0 / (g * g));
    let times = c.t_values(&default)?;
    let rho0 = linalg::kron3(r.model.tau_a(), &linalg::identity(r.model.dims.n_c).mapv(|z| z / r.model.dims.n_c as f64), r.model.tau_b());
    let ex = propagate_exact(&r.model, &rho0, &times)?;
    let red = propagate_reduced(&r.model, &rho0, &times)?;
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for ((t, a), b) in times.iter().zip(&ex.states).zip(&red.states) {
        let e = fro_norm(&(a - b));
        errors.push(e);
        rows.push(vec![num(*t), num(trace(a).re), num(e)]);
    }
    let (tr, herm) = ex.trace_hermiticity_drift();
    Ok(Output {
        json: json!({
            "initial_state": "tau_a (x) I/n_C (x) tau_b",
            "times": times,
            "reduced_error": errors,
            "trace_drift": tr,
            "hermiticity_drift": herm,
            "min_eigenvalue": ex.min_eigenvalue()?,
        }),
        table: Table { columns: vec!["t", "trace", "reduced_error"], rows },
    })
}

fn example(c: &Common, r: &ResolvedModel) -> Result<Output> {
    let params = r.params.clone().ok_or_else(|| QrmError::Config("example needs --preset three-qubit or qubit-n-qubit".into()))?;
    let name = c.preset.as_deref().unwrap_or_default();
    let bad = |e: serde_json::Error| QrmError::Config(e.to_string());
    let (check, data) = match name {
        "three-qubit" | "three-qubit-driven" => {
            let p: ThreeQubitParams = serde_json::from_value(params).map_err(bad)?;
            let cf = p.closed_forms();
            let s_values = c.t_values("0:2:5")?;
            let transitions: Vec<_> = s_values.iter().map(|&s| json!({ "s": s, "p": p.transition_probabilities(s) })).collect();
            let data = json!({
                "params": p,
                "phi_plus": cf.phi_plus,
                "phi_minus": cf.phi_minus,
                "phi_d": cf.phi_d,
                "phi_d_spectrum": cf.phi_d_spectrum,
                "rho_c0": cmat(&cf.rho_c0),
                "x2": cf.x2,
                "r1": cmat(&cf.r1),
                "r2": cmat(&cf.r2),
                "transitions": transitions,
            });
            (verify::three_qubit_check(&p)?, data)
        }
        "qubit-n-qubit" => {
            let p: QubitNQubitParams = serde_json::from_value(params).map_err(bad)?;
            let (x, z, _) = p.closed_form_rho0()?;
            let data = json!({
                "params": p,
                "hypothesis": p.coupling_hypothesis(),
                "x_recursive": x,
                "x_explicit": p.kernel_explicit()?,
                "z": z,
                "constant_population_defect": p.constant_population_defect(),
            });
            (verify::qubit_n_qubit_check(&p)?, data)
        }
        _ => return Err(QrmError::Config(format!("no closed forms for preset '{name}'"))),
    };
    let tol = c.tol.max(check.tol);
    if !(check.value <= tol) {
        return Err(QrmError::residual(format!("{} ({})", check.name, check.detail), check.value, tol));
    }
    let rows = vec![vec![check.name.to_string(), num(check.value), num(tol)]];
    Ok(Output {
        json: json!({ "closed_forms": data, "check": check }),
        table: Table { columns: vec!["check", "deviation", "tol"], rows },
    })
}

fn verify_all(c: &Common) -> Result<(Output, bool)> {
    let checks = verify::run_all(c.seed);
    let ok = checks.iter().all(|x| x.pass);
    let rows = checks
        .iter()
        .map(|x| vec![x.name.to_string(), num(x.value), num(x.tol), x.pass.to_string()])
        .collect();
    Ok((
        Output { json: json!({ "checks": checks, "all_pass": ok }), table: Table { columns: vec!["check", "value", "tol", "pass"], rows } },
        ok,
    ))
}

#[derive(Serialize)]
struct Header<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'a str,
    model_source: Option<String>,
    model_hash: Option<String>,
    g: Option<f64>,
    order: usize,
    tol: f64,
    seed: u64,
}

fn render(header: &Header, out: &Output, format: Format) -> String {
    match format {
        Format::Json => {
            let v = json!({ "header": header, "result": out.json });
            serde_json::to_string_pretty(&v).expect("json output") + "\n"
        }
        Format::Csv => {
            let mut s = String::new();
            let hv = serde_json::to_value(header).expect("header");
            for (k, v) in hv.as_object().expect("object") {
                s.push_str(&format!("# {k}: {v}\n"));
            }
            s.push_str(&out.table.columns.join(","));
            s.push('\n');
            for row in &out.table.rows {
                s.push_str(&row.join(","));
                s.push('\n');
            }
            s
        }
    }
}

fn emit(name: &str, c: &Common, text: &str) -> Result<()> {
    match &c.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| QrmError::Config(format!("{}: {e}", dir.display())))?;
            let ext = if c.format == Format::Json { "json" } else { "csv" };
            let path = dir.join(format!("{name}.{ext}"));
            std::fs::write(&path, text).map_err(|e| QrmError::Config(format!("{}: {e}", path.display())))
        }
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes()).map_err(|e| QrmError::Config(e.to_string()))
        }
    }
}

fn execute(cmd: &Command) -> Result<()> {
    let (name, c) = match cmd {
        Command::Spectrum(c) => ("spectrum", c),
        Command::Steady(c) => ("steady", c),
        Command::Coup(c) => ("coup", c),
        Command::Markov(c) => ("markov", c),
        Command::Dynamics(c) => ("dynamics", c),
        Command::Example(c) => ("example", c),
        Command::Verify(c) => ("verify", c),
    };
    c.check_tol()?;
    if name == "verify" {
        let (out, ok) = verify_all(c)?;
        let header = Header {
            tool: "qrm",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: name,
            model_source: None,
            model_hash: None,
            g: None,
            order: c.order,
            tol: c.tol,
            seed: c.seed,
        };
        emit(name, c, &render(&header, &out, c.format))?;
        if !ok {
            let failed: Vec<_> = out.json["checks"]
                .as_array()
                .expect("checks")
                .iter()
                .filter(|x| x["pass"] == false)
                .map(|x| x["name"].as_str().unwrap_or_default().to_string())
                .collect();
            return Err(QrmError::residual(format!("verify: {}", failed.join(",")), f64::NAN, 0.0));
        }
        return Ok(());
    }
    let r = c.resolve()?;
    let out = match cmd {
        Command::Spectrum(_) => spectrum(c, &r)?,
        Command::Steady(_) => steady(c, &r)?,
        Command::Coup(_) => coup(c, &r)?,
        Command::Markov(_) => markov(c, &r)?,
        Command::Dynamics(_) => dynamics(c, &r)?,
        Command::Example(_) => example(c, &r)?,
        Command::Verify(_) => unreachable!(),
    };
    let header = Header {
        tool: "qrm",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: name,
        model_source: Some(r.source.clone()),
        model_hash: Some(r.hash()),
        g: Some(r.model.g),
        order: c.order,
        tol: c.tol,
        seed: c.seed,
    };
    emit(name, c, &render(&header, &out, c.format))
}

fn class_name(e: &QrmError) -> &'static str {
    match e.exit_code() {
        1 => "config",
        2 => "model-invariant",
        3 => "assumption",
        _ => "numeric-residual",
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.kind().as_str().unwrap_or("invalid arguments").to_string();
            let _ = e.print();
            eprintln!("qrm: error class=config code=1 message={msg:?}");
            return ExitCode::from(1);
        }
    };
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.exit_code();
            eprintln!("qrm: error class={} code={code} message={:?}", class_name(&e), e.to_string());
            ExitCode::from(code as u8)
        }
    }
}
