mod common;

use cns_core::energy::data_norm;
use cns_core::picard::*;
use cns_core::solvers::{solve_stokes_evolution, StokesProblem};
use cns_core::transform::FlatState;
use cns_core::verify::data::make_compatible_data;
use cns_core::{CnsError, ScalarField, SlabGrid, SurfaceField};

fn small_grid() -> SlabGrid {
    SlabGrid::cube(8, 9).unwrap().with_time(1e-2, 20).unwrap()
}

fn config(amplitude: f64) -> PicardConfig {
    let g = small_grid();
    let mut cfg = PicardConfig::new(g, make_compatible_data(7, amplitude, &g).unwrap());
    cfg.potential = Potential::Vertical(1.0);
    cfg
}

#[test]
fn generated_data_pass_compatibility() {
    let g = SlabGrid::cube(16, 9).unwrap();
    for seed in 0..6 {
        let d = make_compatible_data(seed, 0.05, &g).unwrap();
        let r = check_compatibility(&d, 1e-6).unwrap();
        assert!(r.pass(), "seed {seed}: {:?}", r.rows());
    }
}

#[test]
fn data_generation_is_deterministic_and_linear_where_constraints_are() {
    let g = SlabGrid::cube(8, 9).unwrap();
    let a = make_compatible_data(3, 0.02, &g).unwrap();
    assert_eq!(a, make_compatible_data(3, 0.02, &g).unwrap());
    assert_ne!(a, make_compatible_data(4, 0.02, &g).unwrap());
    let b = make_compatible_data(3, 0.04, &g).unwrap();
    assert!(b.eta0.sub(&a.eta0.scale(2.0)).max_abs() < 1e-15);
    assert!(b.h0.sub(&a.h0.scale(2.0)).max_abs() < 1e-15);
    // w₀ and v₀ carry corrections for the nonlinear boundary laws.
    let dw = b.w0.sub(&a.w0.scale(2.0)).max_abs();
    assert!(dw > 0.0 && dw < 0.05 * b.w0.max_abs(), "{dw}");
    assert!(check_compatibility(&b, 1e-6).unwrap().pass());
    assert_eq!(make_compatible_data(3, 0.0, &g).unwrap(), InitialData::zeros(g));
}

#[test]
fn bootstrap_of_pure_surface_data_is_free_relaxation() {
    let g = small_grid();
    let mut d = InitialData::zeros(g);
    d.eta0 = SurfaceField::from_fn(g, |x, _| 0.03 * x.cos());
    let cfg = PicardConfig::new(g, d.clone());
    let boot = bootstrap_iterates(&cfg).unwrap();
    let free = solve_stokes_evolution(&StokesProblem::unforced(g, 1.0, 1.0, d.v0, d.eta0)).unwrap();
    for (a, b) in boot.states.iter().zip(&free) {
        assert!(a.eta.sub(&b.eta).max_abs() < 1e-14);
        assert!(a.v.sub(&b.v).max_abs() < 1e-14);
        assert!(a.w.max_abs() == 0.0 && a.h.max_abs() == 0.0);
    }
}

#[test]
fn zero_data_converge_at_once() {
    let g = small_grid();
    let out = run(&PicardConfig::new(g, InitialData::zeros(g))).ok().unwrap();
    assert!(out.report.converged);
    assert_eq!(out.report.rows.len(), 1);
    assert_eq!(out.report.rows[0].diff_norm, 0.0);
}

#[test]
fn small_data_contract_geometrically() {
    let out = run(&config(0.02)).ok().expect("converges");
    let d = out.report.diff_history();
    assert!(out.report.converged && d.len() <= 30);
    for j in 2..d.len() {
        assert!(d[j] <= 0.75 * d[j - 1].max(d[j - 2]), "sweep {}: {d:?}", j + 1);
    }
    for r in &out.report.rows {
        assert!(r.jmin > 0.5 && r.jmax < 1.5);
    }
}

#[test]
fn converged_trajectory_is_a_fixed_point() {
    let cfg = config(0.02);
    let out = run(&cfg).ok().unwrap();
    let w: Vec<ScalarField> = out.solution.states.iter().map(|s| s.w.clone()).collect();
    let next = picard_step(&w, &out.solution, &cfg).unwrap();
    let d = difference_norm(&next, &out.solution).unwrap().total();
    assert!(d <= cfg.diff_tol, "{d:e}");
}

#[test]
fn smaller_data_contract_faster() {
    let a = run(&config(0.02)).ok().unwrap().report;
    let b = run(&config(0.01)).ok().unwrap().report;
    assert!(b.rows.len() <= a.rows.len());
    let (ra, rb) = (a.ratios_from(3), b.ratios_from(3));
    for (x, y) in ra.iter().zip(&rb) {
        assert!(y <= x, "{rb:?} vs {ra:?}");
    }
}

#[test]
fn bootstrap_norm_is_bounded_by_data_norm() {
    let g = small_grid();
    let ratio = |seed: u64| {
        let d = make_compatible_data(seed, 0.02, &g).unwrap();
        let n = data_norm(&d.w0, &d.h0, &d.v0, &d.eta0).unwrap();
        bootstrap_iterates(&PicardConfig::new(g, d)).unwrap().quintuple_norm() / n
    };
    let c_cal = (0..3).map(ratio).fold(0.0, f64::max);
    for seed in 3..8 {
        assert!(ratio(seed) <= 1.25 * c_cal);
    }
}

#[test]
fn incompatible_data_rejected_with_report() {
    let mut cfg = config(0.02);
    cfg.initial.h0 = cfg.initial.h0.add(&ScalarField::constant(small_grid(), 1e-3));
    let f = run(&cfg).err().expect("rejected");
    assert!(matches!(f.error, CnsError::Compatibility(_)));
    let c = f.report.compatibility.unwrap();
    assert!(c.h_top > 1e-4 && !c.pass());
}

#[test]
fn large_data_rejected_by_smallness() {
    let mut cfg = config(0.02);
    cfg.smallness_threshold = 0.5;
    assert!(matches!(run(&cfg).err().unwrap().error, CnsError::Smallness { .. }));
}

#[test]
fn sweep_budget_exhaustion_reports_history() {
    let mut cfg = config(0.02);
    cfg.max_sweeps = 3;
    match run(&cfg).err().unwrap().error {
        CnsError::NoConvergence { sweeps, history } => {
            assert_eq!(sweeps, 3);
            assert_eq!(history.len(), 3);
        }
        e => panic!("{e}"),
    }
}

#[test]
fn positivity_of_inverted_solution() {
    let out = run(&config(0.02)).ok().unwrap();
    let phys = invert_to_moving_domain(&out.solution.states, 1.0).unwrap();
    assert!(phys.positive && phys.min_m >= -POSITIVITY_TOL && phys.min_c > 0.0);
    let (m, c, ok) = positivity(&out.solution.states, 1.0);
    assert_eq!((m, c, ok), (phys.min_m, phys.min_c, phys.positive));
}

#[test]
fn log_two_snapshot_halves_concentration() {
    let g = SlabGrid::cube(8, 5).unwrap();
    let mut s = FlatState::zeros(g);
    s.h = ScalarField::constant(g, std::f64::consts::LN_2);
    let c_hat = 3.5;
    let phys = invert_to_moving_domain(&[s], c_hat).unwrap();
    let c = &phys.states[0].c;
    assert!((c.max() - c_hat / 2.0).abs() < 1e-12 && (c.min() - c_hat / 2.0).abs() < 1e-12);
}

#[test]
fn invalid_parameters_rejected() {
    let mut cfg = config(0.02);
    cfg.gamma = 0.0;
    assert!(matches!(cfg.validate(), Err(CnsError::Config(_))));
    let mut cfg = config(0.02);
    cfg.initial = InitialData::zeros(SlabGrid::cube(4, 9).unwrap());
    assert!(cfg.validate().is_err());
}
