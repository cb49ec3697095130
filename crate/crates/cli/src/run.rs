//! Mode dispatch and artifact writing.

use crate::config::{Mode, RunConfig};
use cns_core::energy::{energy_report, EnergyReport, EnergyRow};
use cns_core::io::{read_field, read_surface, write_field, write_surface};
use cns_core::picard::{check_compatibility, positivity, run_with, InitialData, IterateQuintuple, RunFailure};
use cns_core::solvers::{solve_stokes_evolution, StokesProblem};
use cns_core::verify::data::make_compatible_data;
use cns_core::verify::mms::{mms_study, space_grids, time_grids, ConvergenceTable, MmsSolver, Refinement};
use cns_core::verify::oracle::{chain_rule_oracle, oracle_refinement, ManufacturedCase, Term};
use cns_core::{harmonic, transform, CnsError, SlabGrid, VectorField};
use serde::Serialize;
use serde_json::json;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_COMPATIBILITY: i32 = 3;
pub const EXIT_NO_CONVERGENCE: i32 = 4;
pub const EXIT_JACOBIAN: i32 = 5;

/// A failed run: exit status plus the machine-readable error document.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
    pub details: serde_json::Value,
}

impl Failure {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&json!({
            "kind": self.kind,
            "exit_code": self.code,
            "message": self.message,
            "details": self.details,
        }))
        .expect("error document serialises")
    }
}

impl From<CnsError> for Failure {
    fn from(e: CnsError) -> Self {
        let (code, kind, details) = match &e {
            CnsError::Config(_) | CnsError::Grid(_) => (EXIT_CONFIG, "config", json!(null)),
            CnsError::Compatibility(_) => (EXIT_COMPATIBILITY, "compatibility", json!(null)),
            CnsError::Smallness { norm, eps0 } => (EXIT_COMPATIBILITY, "smallness", json!({"data_norm": norm, "eps0": eps0})),
            CnsError::NoConvergence { sweeps, history } => {
                (EXIT_NO_CONVERGENCE, "no_convergence", json!({"sweeps": sweeps, "diff_history": history}))
            }
            CnsError::JacobianWindow { step, jmin, jmax } => {
                (EXIT_JACOBIAN, "jacobian_window", json!({"step": step, "jmin": jmin, "jmax": jmax}))
            }
            CnsError::SingularMap { jmin, node } => (EXIT_JACOBIAN, "singular_map", json!({"jmin": jmin, "node": node})),
            CnsError::Io(_) | CnsError::Format(_) => (EXIT_FAILURE, "io", json!(null)),
            _ => (EXIT_FAILURE, "runtime", json!(null)),
        };
        Failure { code, kind, message: e.to_string(), details }
    }
}

type Outcome = std::result::Result<(), Failure>;

/// Runs `mode` and writes its artifacts under `out`.
pub fn run_mode(mode: Mode, cfg: &RunConfig, out: &Path) -> Outcome {
    std::fs::create_dir_all(out).map_err(|e| Failure::from(CnsError::Config(format!("cannot create {}: {e}", out.display()))))?;
    std::fs::write(out.join("config.json"), cfg.to_json()).map_err(CnsError::from)?;
    match mode {
        Mode::Simulate => simulate(cfg, out),
        Mode::VerifyTransform => verify_transform(cfg, out),
        Mode::Mms => mms(cfg, out),
        Mode::EnergyReport => energy(cfg, out),
        Mode::GenData => gen_data(cfg, out),
    }
}

/// Writes the error document next to the other artifacts.
pub fn write_failure(out: &Path, f: &Failure) -> std::io::Result<()> {
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("error.json"), f.to_json())
}

const DATA_FILES: [&str; 6] = ["w0.cnsf", "h0.cnsf", "v0_1.cnsf", "v0_2.cnsf", "v0_3.cnsf", "eta0.cnss"];

fn initial_data(cfg: &RunConfig) -> cns_core::Result<InitialData> {
    let g = cfg.grid()?;
    match &cfg.data.dir {
        None => make_compatible_data(cfg.data.seed, cfg.data.amplitude, &g),
        Some(dir) => load_data(dir, &g),
    }
}

pub fn load_data(dir: &Path, grid: &SlabGrid) -> cns_core::Result<InitialData> {
    let vol = |name: &str| -> cns_core::Result<cns_core::ScalarField> {
        let f = read_field(&dir.join(name))?;
        if !f.grid().same_space(grid) {
            return Err(CnsError::Config(format!("{} was written on a different grid", dir.join(name).display())));
        }
        // Carry the run's time grid.
        Ok(cns_core::ScalarField::new(*grid, f.into_values())?)
    };
    Ok(InitialData {
        w0: vol(DATA_FILES[0])?,
        h0: vol(DATA_FILES[1])?,
        v0: VectorField::new(vol(DATA_FILES[2])?, vol(DATA_FILES[3])?, vol(DATA_FILES[4])?)?,
        eta0: read_surface(&dir.join(DATA_FILES[5]), grid)?,
    })
}

fn write_data(dir: &Path, d: &InitialData) -> cns_core::Result<()> {
    std::fs::create_dir_all(dir)?;
    write_field(&dir.join(DATA_FILES[0]), &d.w0)?;
    write_field(&dir.join(DATA_FILES[1]), &d.h0)?;
    for c in 0..3 {
        write_field(&dir.join(DATA_FILES[2 + c]), &d.v0.c[c])?;
    }
    write_surface(&dir.join(DATA_FILES[5]), &d.eta0)
}

fn write_json(path: &Path, v: &impl Serialize) -> cns_core::Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(v).expect("serialisable"))?;
    Ok(())
}

fn csv_writer(path: &Path) -> cns_core::Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| CnsError::Format(format!("{}: {e}", path.display())))
}

fn csv_err(e: csv::Error) -> CnsError {
    CnsError::Format(e.to_string())
}

fn gen_data(cfg: &RunConfig, out: &Path) -> Outcome {
    let d = initial_data(cfg)?;
    let rep = check_compatibility(&d, cfg.picard.compat_tol)?;
    write_data(out, &d)?;
    let norm = d.norm()?;
    write_json(
        &out.join("compatibility.json"),
        &json!({
            "seed": cfg.data.seed,
            "amplitude": cfg.data.amplitude,
            "data_norm": norm,
            "tol": rep.tol,
            "pass": rep.pass(),
            "residuals": rep.rows().iter().map(|(k, v)| json!({"condition": k, "residual": v})).collect::<Vec<_>>(),
        }),
    )?;
    if !rep.pass() {
        return Err(CnsError::Compatibility(format!("worst residual {:.3e} above {:.1e}", rep.worst(), rep.tol)).into());
    }
    Ok(())
}

fn write_convergence(path: &Path, rows: &[cns_core::picard::SweepRow]) -> cns_core::Result<()> {
    let mut w = csv_writer(path)?;
    if rows.is_empty() {
        w.write_record(CONVERGENCE_COLUMNS).map_err(csv_err)?;
    }
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub const CONVERGENCE_COLUMNS: [&str; 13] = [
    "sweep",
    "iterate",
    "diff_norm",
    "weighted_diff",
    "ratio",
    "jmin",
    "jmax",
    "iterate_norm",
    "diff_surrogates",
    "w_norm",
    "h_norm",
    "v_norm",
    "final_stokes_energy",
];

pub const ENERGY_COLUMNS: [&str; 14] = [
    "row",
    "t",
    "stokes_energy",
    "dissipation_balance",
    "w_h2",
    "w_h3",
    "h_h2",
    "h_h3",
    "v_h2",
    "v_h3",
    "grad_q_l2",
    "grad_q_h1",
    "eta_h3",
    "grad_eta_h52",
];

fn energy_record(label: &str, r: &EnergyRow) -> Vec<String> {
    let vals = [
        r.t,
        r.stokes_energy,
        r.dissipation_balance,
        r.w_h2,
        r.w_h3,
        r.h_h2,
        r.h_h3,
        r.v_h2,
        r.v_h3,
        r.grad_q_l2,
        r.grad_q_h1,
        r.eta_h3,
        r.grad_eta_h52,
    ];
    std::iter::once(label.to_string()).chain(vals.iter().map(|v| v.to_string())).collect()
}

/// Per-level rows, then a summary row: sup in time of the H²-type columns,
/// (∫ x² dt)^{1/2} of the H³-type columns, the final energy and the largest
/// dissipation balance.
fn write_energy(path: &Path, rep: &EnergyReport, dt: f64) -> cns_core::Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(ENERGY_COLUMNS).map_err(csv_err)?;
    for (n, r) in rep.rows.iter().enumerate() {
        w.write_record(energy_record(&n.to_string(), r)).map_err(csv_err)?;
    }
    let sup = |f: fn(&EnergyRow) -> f64| rep.rows.iter().map(f).fold(0.0, f64::max);
    let l2t = |f: fn(&EnergyRow) -> f64| {
        let n = rep.rows.len();
        rep.rows
            .iter()
            .enumerate()
            .map(|(i, r)| if i == 0 || i + 1 == n { 0.5 } else { 1.0 } * dt * f(r).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let last = rep.rows.last().copied().unwrap_or_default();
    let summary = EnergyRow {
        t: last.t,
        stokes_energy: last.stokes_energy,
        dissipation_balance: rep.rows.iter().skip(1).map(|r| r.dissipation_balance).fold(f64::NEG_INFINITY, f64::max),
        w_h2: sup(|r| r.w_h2),
        w_h3: l2t(|r| r.w_h3),
        h_h2: sup(|r| r.h_h2),
        h_h3: l2t(|r| r.h_h3),
        v_h2: sup(|r| r.v_h2),
        v_h3: l2t(|r| r.v_h3),
        grad_q_l2: sup(|r| r.grad_q_l2),
        grad_q_h1: l2t(|r| r.grad_q_h1),
        eta_h3: sup(|r| r.eta_h3),
        grad_eta_h52: l2t(|r| r.grad_eta_h52),
    };
    w.write_record(energy_record("summary", &summary)).map_err(csv_err)?;
    w.flush()?;
    Ok(())
}

fn write_fields(dir: &Path, sol: &IterateQuintuple, every: usize) -> cns_core::Result<()> {
    std::fs::create_dir_all(dir)?;
    let nt = sol.states.len() - 1;
    for (n, s) in sol.states.iter().enumerate() {
        let emit = n == nt || (every > 0 && n % every == 0);
        if !emit {
            continue;
        }
        let name = |f: &str, ext: &str| dir.join(format!("{f}_{n:06}.{ext}"));
        write_field(&name("w", "cnsf"), &s.w)?;
        write_field(&name("h", "cnsf"), &s.h)?;
        for c in 0..3 {
            write_field(&name(&format!("v{}", c + 1), "cnsf"), &s.v.c[c])?;
        }
        write_field(&name("q", "cnsf"), &s.q)?;
        write_surface(&name("eta", "cnss"), &s.eta)?;
    }
    Ok(())
}

fn simulate(cfg: &RunConfig, out: &Path) -> Outcome {
    let d = initial_data(cfg)?;
    let pc = cfg.picard(d)?;
    let conv_path = out.join("convergence.csv");
    let result = run_with(&pc, |row| {
        eprintln!(
            "sweep {:>2}  diff {:.3e}  ratio {}  J [{:.4}, {:.4}]",
            row.sweep,
            row.diff_norm,
            row.ratio.map_or("-".to_string(), |r| format!("{r:.3}")),
            row.jmin,
            row.jmax
        );
    });
    let (output, report) = match result {
        Ok(o) => {
            let r = o.report.clone();
            (Some(o), r)
        }
        Err(RunFailure { error, report }) => {
            if cfg.output.convergence_csv {
                write_convergence(&conv_path, &report.rows)?;
            }
            write_json(&out.join("convergence.json"), &report)?;
            return Err(error.into());
        }
    };
    if cfg.output.convergence_csv {
        write_convergence(&conv_path, &report.rows)?;
    }
    let sol = output.expect("successful run").solution;
    write_fields(&out.join("fields"), &sol, cfg.output.fields_every)?;
    let (min_m, min_c, positive) = positivity(&sol.states, cfg.physics.c_hat);
    let energy = if cfg.output.energy_csv {
        let rep = energy_report(&sol.states, cfg.physics.gamma, cfg.physics.sigma)?;
        write_energy(&out.join("energy.csv"), &rep, pc.grid.dt)?;
        Some(rep.stokes_energy_nonincreasing)
    } else {
        None
    };
    write_json(
        &out.join("summary.json"),
        &json!({
            "converged": report.converged,
            "sweeps": report.rows.len(),
            "data_norm": report.data_norm,
            "compatibility": report.compatibility,
            "final_diff": report.rows.last().map(|r| r.diff_norm),
            "jmin": sol.jmin,
            "jmax": sol.jmax,
            "norm": sol.norm.rows().iter().map(|(k, v)| json!({"part": k, "value": v})).collect::<Vec<_>>(),
            "min_m": min_m,
            "min_c": min_c,
            "positive": positive,
            "stokes_energy_nonincreasing": energy,
        }),
    )?;
    Ok(())
}

/// Zero-forcing Stokes relaxation from (v₀, η₀).
fn energy(cfg: &RunConfig, out: &Path) -> Outcome {
    let d = initial_data(cfg)?;
    let g = cfg.grid()?;
    let p = StokesProblem::unforced(g, cfg.physics.gamma, cfg.physics.sigma, d.v0, d.eta0);
    let states = solve_stokes_evolution(&p)?;
    let rep = energy_report(&states, cfg.physics.gamma, cfg.physics.sigma)?;
    write_energy(&out.join("energy.csv"), &rep, g.dt)?;
    let max_div = states.iter().map(|s| cns_core::ops::divergence(&s.v).max_abs()).fold(0.0, f64::max);
    write_json(
        &out.join("energy_summary.json"),
        &json!({
            "stokes_energy_nonincreasing": rep.stokes_energy_nonincreasing,
            "initial_energy": rep.rows.first().map(|r| r.stokes_energy),
            "final_energy": rep.rows.last().map(|r| r.stokes_energy),
            "max_divergence": max_div,
            "norm": rep.norm.rows().iter().map(|(k, v)| json!({"part": k, "value": v})).collect::<Vec<_>>(),
        }),
    )?;
    Ok(())
}

fn mms(cfg: &RunConfig, out: &Path) -> Outcome {
    let solvers = match cfg.mms.solver {
        Some(s) => vec![s],
        None => vec![MmsSolver::Parabolic, MmsSolver::Stokes, MmsSolver::Stationary],
    };
    let mut failed = Vec::new();
    for s in solvers {
        let refinements = match (cfg.mms.refinement, s) {
            (Some(r), _) => vec![r],
            (None, MmsSolver::Stationary) => vec![Refinement::Space],
            (None, _) => vec![Refinement::Space, Refinement::Time],
        };
        for r in refinements {
            let grids = match r {
                Refinement::Space => space_grids(),
                Refinement::Time => time_grids(),
            };
            let table = mms_study(s, r, &grids)?;
            write_table(&out.join(format!("mms_{}_{}.csv", s.name(), r.name())), &table)?;
            if !table.pass {
                failed.push(format!("{} {}: orders {:?}", s.name(), r.name(), table.orders));
            }
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_FAILURE,
            kind: "order_below_threshold",
            message: format!("observed order below threshold: {}", failed.join("; ")),
            details: json!(failed),
        })
    }
}

/// Columns: nz, nt, step, then `err_<field>` and `order_<field>` per field,
/// then `threshold` and `pass`. The fitted order repeats on every row.
pub fn write_table(path: &Path, t: &ConvergenceTable) -> cns_core::Result<()> {
    let mut w = csv_writer(path)?;
    let mut head = vec!["nz".to_string(), "nt".into(), "step".into()];
    head.extend(t.fields.iter().map(|f| format!("err_{f}")));
    head.extend(t.fields.iter().map(|f| format!("order_{f}")));
    head.extend(["threshold".to_string(), "pass".to_string()]);
    w.write_record(&head).map_err(csv_err)?;
    for r in &t.rows {
        let mut rec = vec![r.nz.to_string(), r.nt.to_string(), r.step.to_string()];
        rec.extend(r.errors.iter().map(|e| e.to_string()));
        rec.extend(t.orders.iter().map(|o| o.to_string()));
        rec.extend([t.threshold.to_string(), t.pass.to_string()]);
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Chain-rule oracle on the configured horizontal grid with Nz, 2Nz−1,
/// 4Nz−3, plus the flat case and the extension residuals.
fn verify_transform(cfg: &RunConfig, out: &Path) -> Outcome {
    let base = cfg.space_grid()?;
    let two_pi = 2.0 * std::f64::consts::PI;
    if base.l1 != two_pi || base.l2 != two_pi {
        return Err(CnsError::Config("verify-transform needs L1 = L2 = 2π".into()).into());
    }
    let grids: Vec<SlabGrid> = [base.nz, 2 * base.nz - 1, 4 * base.nz - 3]
        .iter()
        .map(|&nz| SlabGrid::new(base.n1, base.n2, nz, base.l1, base.l2, base.b))
        .collect::<cns_core::Result<_>>()?;
    let smooth = ManufacturedCase::smooth(cfg.verify.amplitude);
    let refine = oracle_refinement(&smooth, &grids, cfg.verify.t)?;
    let flat = chain_rule_oracle(&ManufacturedCase::flat(), &base, cfg.verify.t)?;
    let mut w = csv_writer(&out.join("residuals.csv"))?;
    let mut head = vec!["term".to_string()];
    head.extend(grids.iter().map(|g| format!("err_nz{}", g.nz)));
    head.extend(["order".to_string(), "flat".to_string()]);
    w.write_record(&head).map_err(csv_err)?;
    let mut worst_order = f64::INFINITY;
    let mut worst_flat: f64 = 0.0;
    for t in Term::ALL {
        let errs = &refine.errors.iter().find(|(x, _)| *x == t).expect("term").1;
        let order = refine.order(t);
        worst_order = worst_order.min(order);
        worst_flat = worst_flat.max(flat.max(t));
        let mut rec = vec![t.name().to_string()];
        rec.extend(errs.iter().map(|e| e.to_string()));
        rec.extend([order.to_string(), flat.max(t).to_string()]);
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(CnsError::from)?;
    let eta = smooth.surface(&base, cfg.verify.t);
    let ext = harmonic::extend(&eta);
    let (lap, neu) = harmonic::extension_residual(&ext);
    let (jmin, jmax) = transform::jacobian_range(&eta);
    write_json(
        &out.join("verify_summary.json"),
        &json!({
            "min_order": worst_order,
            "max_flat_residual": worst_flat,
            "extension_laplacian_max": lap,
            "extension_bottom_neumann_max": neu,
            "jmin": jmin,
            "jmax": jmax,
        }),
    )?;
    Ok(())
}

/// Output directory: `--out` wins over `output.dir`.
pub fn output_dir(cli: Option<PathBuf>, cfg: &RunConfig) -> std::result::Result<PathBuf, Failure> {
    cli.or_else(|| cfg.output.dir.clone())
        .ok_or_else(|| CnsError::Config("no output directory: pass --out or set output.dir".into()).into())
}
