//! `bachex`: evaluate deformed Riemannian extensions, check their
//! curvature properties, run the worked-example catalog, solve the
//! Bach-flat structure equations on a strip, and build nilpotent
//! normal-form coordinates.

mod catalog;
mod config;
mod error;
mod report;

use catalog::{catalog, RunCtx};
use clap::{Parser, Subcommand, ValueEnum};
use config::ScenarioConfig;
use error::CliError;
use report::{emit_text, sweep_csv, Report, SweepRow};
use serde_json::json;
use std::path::PathBuf;

use bachex_core::{
    bach_values, curvature_pack, einstein_residual, invariant_report, max_abs2,
    normalize_nilpotent, q_identities, quadratic_invariants, solve_p1, solve_p2,
    structural_zeros, walker_invariants, brinkmann_e, ConformalCandidate, MarchMethod,
    StripGrid, VsiVerdict,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Parser)]
#[command(name = "bachex", version, about = "Neutral-signature extension metrics toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Output directory for reports (default: stdout)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed override
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Jet order override
    #[arg(long, global = true)]
    order: Option<usize>,
    /// Tolerance override
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Report format for tabular output
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Subcommand)]
enum Cmd {
    /// Worked-example catalog
    Catalog {
        #[command(subcommand)]
        action: CatalogCmd,
    },
    /// Evaluate curvature quantities at the configured points
    Eval { config: PathBuf },
    /// Assert a property of the configured metric
    Check {
        #[command(subcommand)]
        what: CheckCmd,
    },
    /// Scalar and non-Weyl invariant reports / sweeps
    Invariants { config: PathBuf },
    /// Structure-operator cross-identities for nilpotent data
    Identities { config: PathBuf },
    /// Numerical solvers
    Solve {
        #[command(subcommand)]
        what: SolveCmd,
    },
    /// Nilpotent normal-form coordinates
    Normalize { config: PathBuf },
}

#[derive(Subcommand)]
enum CatalogCmd {
    /// List the entries with citations
    List,
    /// Run one entry, or all with --all
    Run {
        name: Option<String>,
        #[arg(long)]
        all: bool,
    },
}

#[derive(Subcommand)]
enum CheckCmd {
    /// max|B| below tolerance at the evaluation points
    Bachflat { config: PathBuf },
    /// conformally Einstein via the configured candidate factors
    Conformal { config: PathBuf },
    /// all scalar curvature invariants below tolerance
    Vsi { config: PathBuf },
    /// curvature support list and the fixed mixed component
    Zeros { config: PathBuf },
}

#[derive(Subcommand)]
enum SolveCmd {
    /// March the structure equations on a periodic strip
    Pde {
        /// scenario file providing the surface (and optional [pde] section)
        #[arg(long)]
        surface: PathBuf,
        #[arg(long)]
        xi0: Option<String>,
        #[arg(long)]
        alpha0: Option<String>,
        #[arg(long)]
        alpha1: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        length: f64,
        #[arg(long, default_value_t = 64)]
        n1: usize,
        #[arg(long, default_value_t = 32)]
        n2: usize,
    },
}

fn main() {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.code());
        }
    }
}

struct Ctx {
    out: Option<PathBuf>,
    seed: Option<u64>,
    order: Option<usize>,
    tol: Option<f64>,
    format: Format,
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let ctx = Ctx {
        out: cli.out.clone(),
        seed: cli.seed,
        order: cli.order,
        tol: cli.tol,
        format: cli.format,
    };
    match &cli.cmd {
        Cmd::Catalog { action } => run_catalog(&ctx, action),
        Cmd::Eval { config } => run_eval(&ctx, config),
        Cmd::Check { what } => match what {
            CheckCmd::Bachflat { config } => check_bachflat(&ctx, config),
            CheckCmd::Conformal { config } => check_conformal(&ctx, config),
            CheckCmd::Vsi { config } => check_vsi(&ctx, config),
            CheckCmd::Zeros { config } => check_zeros(&ctx, config),
        },
        Cmd::Invariants { config } => run_invariants(&ctx, config),
        Cmd::Identities { config } => run_identities(&ctx, config),
        Cmd::Solve { what } => match what {
            SolveCmd::Pde {
                surface,
                xi0,
                alpha0,
                alpha1,
                length,
                n1,
                n2,
            } => solve_pde(&ctx, surface, xi0, alpha0, alpha1, *length, *n1, *n2),
        },
        Cmd::Normalize { config } => run_normalize(&ctx, config),
    }
}

fn load(path: &PathBuf) -> Result<ScenarioConfig, CliError> {
    ScenarioConfig::load(path)
}

fn params(ctx: &Ctx, cfg: &ScenarioConfig) -> (usize, f64, u64) {
    (
        ctx.order.unwrap_or(cfg.evaluation.order),
        ctx.tol.unwrap_or(cfg.evaluation.tol),
        ctx.seed.unwrap_or(cfg.evaluation.seed),
    )
}

fn run_catalog(ctx: &Ctx, action: &CatalogCmd) -> Result<(), CliError> {
    let entries = catalog();
    match action {
        CatalogCmd::List => {
            for e in &entries {
                println!("{:<24} {}", e.name, e.citation);
            }
            Ok(())
        }
        CatalogCmd::Run { name, all } => {
            let selected: Vec<_> = if *all {
                entries.iter().collect()
            } else {
                let n = name.as_deref().ok_or_else(|| {
                    CliError::Parse("catalog run needs an entry name or --all".into())
                })?;
                let e = entries
                    .iter()
                    .find(|e| e.name == n)
                    .ok_or_else(|| CliError::Parse(format!("unknown catalog entry `{n}`")))?;
                vec![e]
            };
            let rctx = RunCtx {
                seed: ctx.seed.unwrap_or(0),
                tol: ctx.tol.unwrap_or(1e-8),
            };
            let mut all_pass = true;
            let mut results = Vec::new();
            for e in selected {
                let outcome = (e.run)(&rctx)?;
                println!(
                    "{}: {}",
                    e.name,
                    if outcome.pass { "PASS" } else { "FAIL" }
                );
                all_pass &= outcome.pass;
                results.push(json!({
                    "name": e.name,
                    "citation": e.citation,
                    "expected": e.expected,
                    "pass": outcome.pass,
                    "details": outcome.details,
                }));
            }
            let rep = Report::new(
                "catalog run",
                4,
                rctx.tol,
                rctx.seed,
                all_pass,
                json!(results),
            );
            rep.emit(ctx.out.as_deref(), "catalog")?;
            if all_pass {
                Ok(())
            } else {
                Err(CliError::Assertion("catalog entry failed".into()))
            }
        }
    }
}

fn run_eval(ctx: &Ctx, path: &PathBuf) -> Result<(), CliError> {
    let cfg = load(path)?;
    let (order, tol, seed) = params(ctx, &cfg);
    let m = cfg.build_metric()?;
    let pts = cfg.grid_points().unwrap_or_else(|| cfg.eval_points(ctx.seed));
    let mut rows = Vec::new();
    for p in &pts {
        let pack = curvature_pack(&m, p, order.max(2))?;
        let q = quadratic_invariants(&pack);
        let bach = if order >= 4 {
            Some(max_abs2(&bach_values(&m, p)?))
        } else {
            None
        };
        rows.push(json!({
            "point": [p.x1, p.x2, p.y1, p.y2],
            "tau": q.tau,
            "normRho2": q.norm_rho2,
            "normR2": q.norm_r2,
            "max_bach": bach,
        }));
    }
    let rep = Report::new("eval", order, tol, seed, true, json!(rows));
    rep.emit(ctx.out.as_deref(), "eval")
}

fn check_bachflat(ctx: &Ctx, path: &PathBuf) -> Result<(), CliError> {
    let cfg = load(path)?;
    let (order, tol, seed) = params(ctx, &cfg);
    let m = cfg.build_metric()?;
    let pts = cfg.eval_points(ctx.seed);
    let mut worst = 0.0f64;
    for p in &pts {
        worst = worst.max(max_abs2(&bach_values(&m, p)?));
    }
    let pass = worst < tol;
    let rep = Report::new(
        "check bachflat",
        order,
        tol,
        seed,
        pass,
        json!({ "max_bach": worst, "points": pts.len() }),
    );
    rep.emit(ctx.out.as_deref(), "check_bachflat")?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Assertion(format!(
            "max|B| = {worst:.3e} exceeds {tol:.1e}"
        )))
    }
}

fn check_conformal(ctx: &Ctx, path: &PathBuf) -> Result<(), CliError> {
    let cfg = load(path)?;
    let (order, tol, seed) = params(ctx, &cfg);
    let section = cfg.conformal.as_ref().ok_or_else(|| {
        CliError::Parse("check conformal needs a [conformal] section with candidates".into())
    })?;
    let m = cfg.build_metric()?;
    let pts = cfg.eval_points(ctx.seed);
    let consts = cfg.const_table();
    let mut best = f64::INFINITY;
    let mut best_idx = None;
    for (idx, [a, b, psi]) in section.candidates.iter().enumerate() {
        let parse = |t: &str| {
            bachex_core::parse_expr_consts(t, &consts)
                .map_err(|e| CliError::Parse(format!("candidate `{t}`: {e}")))
        };
        let cand = ConformalCandidate::new(parse(a)?, parse(b)?, parse(psi)?);
        let mut worst = 0.0f64;
        let mut usable = true;
        for p in &pts {
            match (brinkmann_e(&m, &cand, p), einstein_residual(&m, &cand, p)) {
                (Ok(e), Ok(r)) => {
                    worst = worst
                        .max(e.iter().flatten().fold(0.0f64, |mx, v| mx.max(v.abs())))
                        .max(r);
                }
                _ => {
                    // nonpositive factor at this point: candidate unusable
                    usable = false;
                    break;
                }
            }
        }
        if usable && worst < best {
            best = worst;
            best_idx = Some(idx);
        }
    }
    let pass = best < tol;
    let rep = Report::new(
        "check conformal",
        order,
        tol,
        seed,
        pass,
        json!({
            "candidates_tried": section.candidates.len(),
            "best_residual": if best.is_finite() { Some(best) } else { None },
            "best_candidate": best_idx,
        }),
    );
    rep.emit(ctx.out.as_deref(), "check_conformal")?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Assertion(format!(
            "no candidate below {tol:.1e} (best {best:.3e})"
        )))
    }
}

fn check_vsi(ctx: &Ctx, path: &PathBuf) -> Result<(), CliError> {
    let cfg = load(path)?;
    let (order, tol, seed) = params(ctx, &cfg);
    let m = cfg.build_metric()?;
    let pts = cfg.eval_points(ctx.seed);
    let mut reports = Vec::new();
    let mut pass = true;
    for p in &pts {
        let rep = invariant_report(&m, p, tol)?;
        if let VsiVerdict::NotVsi { .. } = rep.verdict {
            pass = false;
        }
        reports.push(rep);
    }
    let rep = Report::new(
        "check vsi",
        order,
        tol,
        seed,
        pass,
        serde_json::to_value(&reports).unwrap(),
    );
    rep.emit(ctx.out.as_deref(), "check_vsi")?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Assertion(
            "a scalar curvature invariant is nonzero".into(),
        ))
    }
}

fn check_zeros(ctx: &Ctx, path: &PathBuf) -> Result<(), CliError> {
    let cfg = load(path)?;
    let (order, tol, seed) = params(ctx, &cfg);
    let m = cfg.build_metric()?;
    let pts = cfg.eval_points(ctx.seed);
    let mut worst_off = 0.0f64;
    let mut worst_fixed = 0.0f64;
    for p in &pts {
        let z = structural_zeros(&m, p)?;
        worst_off = worst_off.max(z.off_list_max);
        worst_fixed = worst_fixed.max((z.r_2323 + 1.0).abs());
    }
    let pass = worst_off < tol && worst_fixed < tol;
    let rep = Report::new(
        "check zeros",
        order,
        tol,
        seed,
        pass,
        json!({ "off_list_max": worst_off, "r_2323_deviation": worst_fixed }),
    );
    rep.emit(ctx.out.as_deref(), "check_zeros")?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Assertion(format!(
            "structural zeros violated: off-list {worst_off:.3e}, fixed-component deviation {worst_fixed:.3e}"
        )))
    }
}

fn run_invariants(ctx: &Ctx, path: &PathBuf) -> Result<(), CliError> {
    let cfg = load(path)?;
    let (order, tol, seed) = params(ctx, &cfg);
    let m = cfg.build_metric()?;
    let grid = cfg.grid_points();
    let pts = grid.clone().unwrap_or_else(|| cfg.eval_points(ctx.seed));
    let mut rows = Vec::new();
    for p in &pts {
        let q = quadratic_invariants(&curvature_pack(&m, p, 2)?);
        let w = walker_invariants(&m, p, false)?;
        let mut flags = Vec::new();
        if q.tau.abs() < tol && q.norm_rho2.abs() < tol && q.norm_r2.abs() < tol {
            flags.push("quadratic_zero".to_string());
        }
        if w.degenerate_rho {
            flags.push("degenerate_rho".to_string());
        }
        if w.zero_omega {
            flags.push("zero_omega".to_string());
        }
        rows.push(SweepRow {
            point: [p.x1, p.x2, p.y1, p.y2],
            tau: q.tau,
            norm_rho2: q.norm_rho2,
            norm_r2: q.norm_r2,
            beta1: w.beta1,
            beta2: w.beta2,
            flags,
        });
    }
    if ctx.format == Format::Csv || grid.is_some() {
        let csv = sweep_csv(&rows);
        emit_text(&csv, ctx.out.as_deref(), "invariants.csv")
    } else {
        let json_rows: Vec<_> = rows
            .iter()
            .map(|r| {
                json!({
                    "point": r.point,
                    "tau": r.tau,
                    "normRho2": r.norm_rho2,
                    "normR2": r.norm_r2,
                    "beta1": r.beta1,
                    "beta2": r.beta2,
                    "flags": r.flags,
                })
            })
            .collect();
        let rep = Report::new("invariants", order, tol, seed, true, json!(json_rows));
        rep.emit(ctx.out.as_deref(), "invariants")
    }
}

fn run_identities(ctx: &Ctx, path: &PathBuf) -> Result<(), CliError> {
    let cfg = load(path)?;
    let (order, tol, seed) = params(ctx, &cfg);
    let surface = cfg.build_surface()?;
    let endo = cfg.build_endo()?;
    let phi = cfg.build_deformation()?;
    let pts = cfg.eval_points(ctx.seed);
    let mut reports = Vec::new();
    let mut pass = true;
    for p in &pts {
        let q = q_identities(&surface, &endo, &phi, p)?;
        if q.q3_residual > tol || q.fiber_block_max > tol {
            pass = false;
        }
        if q.p1.abs() < tol && q.b22_p2_residual > tol.max(1e-7) {
            pass = false;
        }
        reports.push(q);
    }
    let rep = Report::new(
        "identities",
        order,
        tol,
        seed,
        pass,
        serde_json::to_value(&reports).unwrap(),
    );
    rep.emit(ctx.out.as_deref(), "identities")?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Assertion(
            "a structure-operator identity exceeded tolerance".into(),
        ))
    }
}

#[allow(clippy::too_many_arguments)]
fn solve_pde(
    ctx: &Ctx,
    surface_cfg: &PathBuf,
    xi0: &Option<String>,
    alpha0: &Option<String>,
    alpha1: &Option<String>,
    length: f64,
    n1: usize,
    n2: usize,
) -> Result<(), CliError> {
    let cfg = load(surface_cfg)?;
    let surface = cfg.build_surface()?;
    // flag values win over the optional [pde] section
    let sec = cfg.pde.as_ref();
    let xi0_text = xi0
        .clone()
        .or_else(|| sec.map(|s| s.xi0.clone()))
        .ok_or_else(|| CliError::Parse("solve pde needs --xi0 or a [pde] section".into()))?;
    let alpha0_text = alpha0.clone().or_else(|| sec.and_then(|s| s.alpha0.clone()));
    let alpha1_text = alpha1.clone().or_else(|| sec.and_then(|s| s.alpha1.clone()));
    let (length, n1, n2) = match sec {
        Some(s) if xi0.is_none() => (s.length, s.n1, s.n2),
        _ => (length, n1, n2),
    };
    let grid = StripGrid::new(length, n1, n2)?;
    let xi0_f = cfg.parse_field(&xi0_text)?;
    let xi = solve_p1(&surface, &xi0_f, &grid, MarchMethod::ClassicalFourth)?;
    let xi_res = bachex_core::p1_residual(&surface, &xi)?;
    // half-resolution run for the convergence ratio
    let coarse = StripGrid::new(length, (n1 / 2).max(4), (n2 / 2).max(8))?;
    let xi_c = solve_p1(&surface, &xi0_f, &coarse, MarchMethod::ClassicalFourth)?;
    let xi_res_c = bachex_core::p1_residual(&surface, &xi_c)?;

    let mut alpha_block = json!(null);
    let mut alpha_sol = None;
    if let (Some(a0), Some(a1)) = (&alpha0_text, &alpha1_text) {
        let a0 = cfg.parse_field(a0)?;
        let a1 = cfg.parse_field(a1)?;
        let alpha = solve_p2(&surface, &xi, &a0, &a1, MarchMethod::ClassicalFourth)?;
        let a_res = bachex_core::p2_residual(&surface, &xi, &alpha)?;
        let alpha_c = solve_p2(&surface, &xi_c, &a0, &a1, MarchMethod::ClassicalFourth)?;
        let a_res_c = bachex_core::p2_residual(&surface, &xi_c, &alpha_c)?;
        alpha_block = json!({
            "residual": a_res,
            "residual_half_resolution": a_res_c,
            "ratio": a_res_c / a_res,
        });
        alpha_sol = Some(alpha);
    }

    if let Some(dir) = ctx.out.as_deref() {
        let mut csv = String::from("i,j,x1,x2,xi,alpha\n");
        for i in 0..=grid.n1 {
            for j in 0..grid.n2 {
                let a = alpha_sol
                    .as_ref()
                    .map(|s| format!("{:.12e}", s.at(i, j)))
                    .unwrap_or_default();
                csv.push_str(&format!(
                    "{i},{j},{},{},{:.12e},{a}\n",
                    grid.x1(i),
                    grid.x2(j),
                    xi.at(i, j)
                ));
            }
        }
        emit_text(&csv, Some(dir), "pde_fields.csv")?;
    }
    let rep = Report::new(
        "solve pde",
        ctx.order.unwrap_or(4),
        ctx.tol.unwrap_or(1e-8),
        ctx.seed.unwrap_or(0),
        true,
        json!({
            "grid": { "length": length, "n1": n1, "n2": n2 },
            "xi_residual": xi_res,
            "xi_residual_half_resolution": xi_res_c,
            "xi_ratio": xi_res_c / xi_res,
            "alpha": alpha_block,
        }),
    );
    rep.emit(ctx.out.as_deref(), "pde")
}

fn run_normalize(ctx: &Ctx, path: &PathBuf) -> Result<(), CliError> {
    let cfg = load(path)?;
    let (order, tol_cfg, seed) = params(ctx, &cfg);
    let tol = ctx.tol.unwrap_or(1e-6).max(tol_cfg.min(1e-6));
    let endo = cfg.build_endo()?;
    let defaults = config::NormalizeSection {
        p0: [0.0, 0.0],
        z_half_width: 0.4,
        n: 32,
        out_half_width: 0.15,
        out_n: 2,
    };
    let sec = cfg.normalize.as_ref().unwrap_or(&defaults);
    let rep_core = normalize_nilpotent(
        &endo,
        (sec.p0[0], sec.p0[1]),
        sec.z_half_width,
        sec.n,
        sec.out_half_width,
        sec.out_n,
    )?;
    let pass = rep_core.max_residual < tol;
    let rep = Report::new(
        "normalize",
        order,
        tol,
        seed,
        pass,
        serde_json::to_value(&rep_core).unwrap(),
    );
    rep.emit(ctx.out.as_deref(), "normalize")?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Assertion(format!(
            "pushforward residual {:.3e} exceeds {tol:.1e}",
            rep_core.max_residual
        )))
    }
}
