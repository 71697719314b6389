//! Subcommand implementations.

use crate::config::{parse_grid, parse_real_grid, ModelArgs, OutputArgs};
use crate::output::{fmt_complex, fmt_f64, Table};
use crate::EXIT_IDENTITY_FAILURE;
use blocktm::duality::band_structure;
use blocktm::numkernel::general_eigenvalues;
use blocktm::qmat::{q_thouless_sum, singular_exponents};
use blocktm::transfer::transfer_product;
use blocktm::verify::{run_identity_suite, IdentityGrid, SuiteOptions};
use blocktm::parallel;
use clap::Args;
use num_complex::Complex64;
use std::io::Write;

fn meta_for(command: &str, model: &ModelArgs, extra: serde_json::Value) -> serde_json::Value {
    serde_json::json!({
        "command": command,
        "model": model.describe(),
        "params": extra,
        "version": env!("CARGO_PKG_VERSION"),
    })
}

// ---------------------------------------------------------------- verify --

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// Energy grid (complex list or real range); defaults to a mixed grid.
    #[arg(long = "E", allow_hyphen_values = true)]
    pub energies: Option<String>,

    /// Twist grid (complex list); defaults to points on and off the circle.
    #[arg(long = "z", allow_hyphen_values = true)]
    pub twists: Option<String>,

    /// Residual threshold for the linear-algebra identities.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,

    /// Skip the quadrature-based sum rules.
    #[arg(long)]
    pub skip_sum_rules: bool,

    /// Corrupt one identity on purpose; the run must then fail (self-test).
    #[arg(long, hide = true)]
    pub sabotage: bool,

    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn run_verify(args: &VerifyArgs) -> Result<i32, String> {
    if !(args.tol > 0.0) {
        return Err(format!("tolerance must be positive, got {}", args.tol));
    }
    let chain = args.model.build(0)?;
    let mut grid = IdentityGrid::default();
    if let Some(spec) = &args.energies {
        grid.energies = parse_grid(spec)?;
    }
    if let Some(spec) = &args.twists {
        grid.twists = parse_grid(spec)?;
    }
    if grid.energies.is_empty() || grid.twists.is_empty() {
        return Err("energy and twist grids must be non-empty".into());
    }
    if grid.twists.iter().any(|z| *z == Complex64::ZERO) {
        return Err("twist grid must not contain z = 0".into());
    }
    let opts = SuiteOptions {
        tol: args.tol,
        sabotage: args.sabotage,
        with_sum_rules: !args.skip_sum_rules,
    };
    let report = run_identity_suite(&chain, &grid, &opts).map_err(|e| e.to_string())?;

    let mut residuals = serde_json::Map::new();
    for (key, value) in &report.residuals {
        residuals.insert(
            key.clone(),
            serde_json::json!({
                "residual": value,
                "threshold": report.threshold_for(key),
            }),
        );
    }
    let audit = report.sign_audit.map(|(lhs, minus, plus)| {
        serde_json::json!({
            "trace_lhs": [lhs.re, lhs.im],
            "derivative_minus_variant": [minus.re, minus.im],
            "derivative_plus_variant": [plus.re, plus.im],
        })
    });
    let doc = serde_json::json!({
        "meta": meta_for("verify", &args.model, serde_json::json!({
            "tol": args.tol,
            "energies": grid.energies.iter().map(|e| [e.re, e.im]).collect::<Vec<_>>(),
            "twists": grid.twists.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
            "sum_rules": !args.skip_sum_rules,
        })),
        "pass": report.pass(),
        "residuals": residuals,
        "sign_audit": audit,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("report serialization");
    text.push('\n');
    match &args.output.out {
        Some(path) => std::fs::write(path, &text).map_err(|e| e.to_string())?,
        None => {
            std::io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string())?;
        }
    }
    Ok(if report.pass() { 0 } else { EXIT_IDENTITY_FAILURE })
}

// ----------------------------------------------------------------- bands --

#[derive(Debug, Args)]
pub struct BandsArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// Number of phase nodes over one period.
    #[arg(long, default_value_t = 64)]
    pub phi_nodes: usize,

    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn run_bands(args: &BandsArgs) -> Result<i32, String> {
    if args.phi_nodes < 8 {
        return Err(format!("need at least 8 phase nodes, got {}", args.phi_nodes));
    }
    let chain = args.model.build(0)?;
    let bs = band_structure(&chain, args.phi_nodes).map_err(|e| e.to_string())?;
    let meta = meta_for(
        "bands",
        &args.model,
        serde_json::json!({ "phi_nodes": bs.phi_grid.len() }),
    );
    let mut table = Table::new(meta, &["phi", "k", "E_k"]);
    for (j, &phi) in bs.phi_grid.iter().enumerate() {
        for (k, track) in bs.levels.iter().enumerate() {
            table.push_row(vec![fmt_f64(phi), k.to_string(), fmt_f64(track[j])]);
        }
    }
    for (k, (lo, hi)) in bs.bands.iter().enumerate() {
        table.trailer.push(format!("band {k} {} {}", fmt_f64(*lo), fmt_f64(*hi)));
    }
    table
        .trailer
        .push(format!("symmetric_point_defect {}", fmt_f64(bs.symmetric_point_defect())));
    table.write(args.output.out.as_deref(), args.output.format).map_err(|e| e.to_string())?;
    Ok(0)
}

// -------------------------------------------------------------- lyapunov --

#[derive(Debug, Args)]
pub struct LyapunovArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// Real energy grid.
    #[arg(long = "E", default_value = "0", allow_hyphen_values = true)]
    pub energies: String,

    /// Disorder realizations.
    #[arg(long, default_value_t = 1)]
    pub realizations: usize,

    /// Append per-energy mean and standard error across realizations.
    #[arg(long)]
    pub aggregate: bool,

    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn run_lyapunov(args: &LyapunovArgs) -> Result<i32, String> {
    let energies = parse_real_grid(&args.energies)?;
    if args.realizations == 0 {
        return Err("need at least one realization".into());
    }
    let model = &args.model;
    let n = model.slices as f64;
    // (energy, realization) grid evaluated in parallel, collected in order
    let jobs: Vec<(usize, usize)> = (0..energies.len())
        .flat_map(|ei| (0..args.realizations).map(move |r| (ei, r)))
        .collect();
    let results: Vec<Result<Vec<f64>, String>> = parallel::map_slice(&jobs, |&(ei, r)| {
        let chain = model.build(r as u64)?;
        singular_exponents(&chain, Complex64::new(energies[ei], 0.0)).map_err(|e| e.to_string())
    });

    let meta = meta_for(
        "lyapunov",
        model,
        serde_json::json!({
            "energies": energies,
            "realizations": args.realizations,
            "aggregate": args.aggregate,
        }),
    );
    let mut table = Table::new(meta, &["E", "realization", "a", "lambda_per_slice"]);
    let mut per_energy: Vec<Vec<Vec<f64>>> = vec![Vec::new(); energies.len()];
    for (&(ei, r), result) in jobs.iter().zip(results) {
        let exps = result?;
        let rates: Vec<f64> = exps.iter().map(|l| l / n).collect();
        for (a, rate) in rates.iter().enumerate() {
            table.push_row(vec![
                fmt_f64(energies[ei]),
                r.to_string(),
                a.to_string(),
                fmt_f64(*rate),
            ]);
        }
        per_energy[ei].push(rates);
    }
    if args.aggregate {
        for (ei, samples) in per_energy.iter().enumerate() {
            let exponents = samples[0].len();
            for a in 0..exponents {
                let values: Vec<f64> = samples.iter().map(|s| s[a]).collect();
                let count = values.len() as f64;
                let mean = parallel::pairwise_sum(&values) / count;
                let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
                let stderr = if values.len() > 1 {
                    (parallel::pairwise_sum(&sq) / (count - 1.0)).sqrt() / count.sqrt()
                } else {
                    0.0
                };
                table.trailer.push(format!(
                    "aggregate E={} a={a} mean={} stderr={}",
                    fmt_f64(energies[ei]),
                    fmt_f64(mean),
                    fmt_f64(stderr)
                ));
            }
        }
    }
    table.write(args.output.out.as_deref(), args.output.format).map_err(|e| e.to_string())?;
    Ok(0)
}

// -------------------------------------------------------------- thouless --

#[derive(Debug, Args)]
pub struct ThoulessArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// Real energy grid.
    #[arg(long = "E", default_value = "0", allow_hyphen_values = true)]
    pub energies: String,

    /// Quadrature convergence tolerance.
    #[arg(long, default_value_t = 1e-9)]
    pub quad_tol: f64,

    /// Unit-circle classification width (default scales with 2 M N).
    #[arg(long)]
    pub eps_circle: Option<f64>,

    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn run_thouless(args: &ThoulessArgs) -> Result<i32, String> {
    let energies = parse_real_grid(&args.energies)?;
    if !(args.quad_tol > 0.0) {
        return Err("quadrature tolerance must be positive".into());
    }
    if let Some(eps) = args.eps_circle {
        if !(eps > 0.0) {
            return Err("eps-circle must be positive".into());
        }
    }
    let chain = args.model.build(0)?;
    let rows: Vec<Result<[String; 9], String>> = parallel::map_slice(&energies, |&e| {
        let t = blocktm::duality::thouless_sum_with(&chain, e, args.quad_tol, args.eps_circle)
            .map_err(|err| err.to_string())?;
        let q = q_thouless_sum(&chain, e, args.quad_tol).map_err(|err| err.to_string())?;
        Ok([
            fmt_f64(e),
            fmt_f64(t.lhs),
            fmt_f64(t.rhs),
            fmt_f64(t.residual),
            t.converged.to_string(),
            fmt_f64(q.lhs),
            fmt_f64(q.rhs),
            fmt_f64(q.residual),
            q.converged.to_string(),
        ])
    });
    let meta = meta_for(
        "thouless",
        &args.model,
        serde_json::json!({ "energies": energies, "quad_tol": args.quad_tol }),
    );
    let mut table = Table::new(
        meta,
        &[
            "E",
            "t_lhs",
            "t_rhs",
            "t_residual",
            "t_converged",
            "q_lhs",
            "q_rhs",
            "q_residual",
            "q_converged",
        ],
    );
    for row in rows {
        table.push_row(row?.to_vec());
    }
    table.write(args.output.out.as_deref(), args.output.format).map_err(|e| e.to_string())?;
    Ok(0)
}

// -------------------------------------------------------------- spectrum --

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// Energies at which the transfer-matrix spectrum is computed.
    #[arg(long = "E", default_value = "0", allow_hyphen_values = true)]
    pub energies: String,

    /// Twists at which the twisted-Hamiltonian spectrum is computed.
    #[arg(long = "z", allow_hyphen_values = true)]
    pub twists: Option<String>,

    /// Unit-circle classification width for the per-energy summary
    /// (default scales with 2 M N).
    #[arg(long)]
    pub eps_circle: Option<f64>,

    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn run_spectrum(args: &SpectrumArgs) -> Result<i32, String> {
    let energies = parse_grid(&args.energies)?;
    let twists = match &args.twists {
        Some(spec) => parse_grid(spec)?,
        None => Vec::new(),
    };
    if twists.iter().any(|z| *z == Complex64::ZERO) {
        return Err("twist grid must not contain z = 0".into());
    }
    let chain = args.model.build(0)?;

    let transfer_rows: Vec<Result<Vec<Vec<String>>, String>> =
        parallel::map_slice(&energies, |&e| {
            let t = transfer_product(&chain, e).map_err(|err| err.to_string())?;
            let spec = general_eigenvalues(t.matrix()).map_err(|err| err.to_string())?;
            Ok(spectrum_rows("transfer", e, &spec))
        });
    let twisted_rows: Vec<Result<Vec<Vec<String>>, String>> = parallel::map_slice(&twists, |&z| {
        let hz = chain.twisted_hamiltonian(z).map_err(|err| err.to_string())?;
        let spec = general_eigenvalues(hz.matrix()).map_err(|err| err.to_string())?;
        Ok(spectrum_rows("hamiltonian", z, &spec))
    });

    let meta = meta_for(
        "spectrum",
        &args.model,
        serde_json::json!({
            "energies": energies.iter().map(|e| [e.re, e.im]).collect::<Vec<_>>(),
            "twists": twists.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
        }),
    );
    let mut table =
        Table::new(meta, &["object", "param_re", "param_im", "index", "value_re", "value_im"]);
    for rows in transfer_rows.into_iter().chain(twisted_rows) {
        for row in rows? {
            table.push_row(row);
        }
    }
    // unit-circle pair counts for the real energies
    for &e in energies.iter().filter(|e| e.im == 0.0) {
        if let Ok(report) = blocktm::duality::spectral_report(&chain, e.re, args.eps_circle) {
            table.trailer.push(format!("nu E={} pairs={}", fmt_f64(e.re), report.nu));
        }
    }
    table.write(args.output.out.as_deref(), args.output.format).map_err(|e| e.to_string())?;
    Ok(0)
}

fn spectrum_rows(object: &str, param: Complex64, values: &[Complex64]) -> Vec<Vec<String>> {
    let (p_re, p_im) = fmt_complex(param);
    values
        .iter()
        .enumerate()
        .map(|(idx, v)| {
            let (re, im) = fmt_complex(*v);
            vec![object.to_string(), p_re.clone(), p_im.clone(), idx.to_string(), re, im]
        })
        .collect()
}
