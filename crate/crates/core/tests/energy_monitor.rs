mod common;

use cns_core::energy::*;
use cns_core::ops::sobolev_norm;
use cns_core::solvers::{solve_stokes_evolution, StokesProblem};
use cns_core::transform::FlatState;
use cns_core::{ScalarField, SlabGrid, SurfaceField, VectorField};
use common::*;
use proptest::prelude::*;

fn decaying(g: SlabGrid, base: &ScalarField) -> Vec<ScalarField> {
    (0..=g.nt).map(|n| base.scale((-(n as f64) * g.dt).exp())).collect()
}

#[test]
fn triple_norm_of_exponential_decay() {
    let t_end: f64 = 1.0;
    let g = SlabGrid::cube(8, 9).unwrap().with_time(1e-3, 1000).unwrap();
    let base = band_field(g, 4, 1.0, 2);
    let p = triple_parts(&decaying(g, &base)).unwrap();
    let n = |m| sobolev_norm(&base, m).unwrap();
    let tail = ((1.0 - (-2.0 * t_end).exp()) / 2.0).sqrt();
    assert!(rel_close(p.sup_h2, n(2), 1e-12));
    assert!(rel_close(p.sup_dt_l2, n(0), 1e-3), "{} {}", p.sup_dt_l2, n(0));
    assert!(rel_close(p.l2_h3, tail * n(3), 1e-3));
    assert!(rel_close(p.l2_dt_h1, tail * n(1), 1e-3));
    assert!(rel_close(triple_norm(&decaying(g, &base)).unwrap(), p.total(), 1e-15));
}

#[test]
fn triple_norm_converges_at_first_order_in_time() {
    let vals: Vec<f64> = [250, 500, 1000]
        .iter()
        .map(|&nt| {
            let g = SlabGrid::cube(8, 9).unwrap().with_time(1.0 / nt as f64, nt).unwrap();
            triple_norm(&decaying(g, &band_field(g, 4, 1.0, 2))).unwrap()
        })
        .collect();
    let ratio = (vals[0] - vals[1]) / (vals[1] - vals[2]);
    assert!((1.8..2.2).contains(&ratio), "{vals:?} ratio {ratio}");
}

#[test]
fn triple_norm_needs_two_levels() {
    let g = SlabGrid::cube(4, 5).unwrap();
    assert!(triple_norm(&[ScalarField::zeros(g)]).is_err());
}

fn states_with_w(g: SlabGrid, w: &[ScalarField]) -> Vec<FlatState> {
    w.iter()
        .enumerate()
        .map(|(n, w)| {
            let mut s = FlatState::zeros(g);
            s.w = w.clone();
            s.t = n as f64 * g.dt;
            s
        })
        .collect()
}

#[test]
fn quintuple_norm_is_additive_over_fields() {
    let g = SlabGrid::cube(8, 9).unwrap().with_time(1e-2, 20).unwrap();
    let zero = quintuple_norm(&vec![FlatState::zeros(g); 21]).unwrap();
    assert_eq!(zero.total(), 0.0);
    let w = decaying(g, &band_field(g, 1, 1.0, 2));
    let q = quintuple_norm(&states_with_w(g, &w)).unwrap();
    let t = triple_parts(&w).unwrap();
    assert!(rel_close(q.total(), t.total(), 1e-12));
    assert!(rel_close(q.w.total(), t.total(), 1e-12));
    let summed: f64 = q.rows().iter().map(|r| r.1).sum();
    assert!(rel_close(summed, q.total(), 1e-12));
    assert!(rel_close(q.total_without_surrogates() + q.surrogates(), q.total(), 1e-15));
}

#[test]
fn estimate_check_on_zero_data() {
    let g = SlabGrid::cube(8, 9).unwrap().with_time(1e-2, 4).unwrap();
    let c = theorem_estimate_check(&vec![FlatState::zeros(g); 5], 0.0, 3.0).unwrap();
    assert_eq!((c.lhs, c.rhs, c.pass), (0.0, 0.0, true));
}

#[test]
fn estimate_lhs_is_quadratic_in_linear_trajectories() {
    let g = SlabGrid::cube(8, 9).unwrap().with_time(1e-2, 10).unwrap();
    let w = decaying(g, &band_field(g, 1, 1.0, 2));
    let half: Vec<ScalarField> = w.iter().map(|f| f.scale(0.5)).collect();
    let a = theorem_estimate_check(&states_with_w(g, &w), 1.0, 1.0).unwrap();
    let b = theorem_estimate_check(&states_with_w(g, &half), 1.0, 1.0).unwrap();
    assert!(rel_close(b.lhs, 0.25 * a.lhs, 1e-12));
}

#[test]
fn energy_report_of_relaxation() {
    let g = SlabGrid::cube(16, 9).unwrap().with_time(1e-2, 30).unwrap();
    let eta0 = SurfaceField::from_fn(g, |x, _| 0.05 * x.cos());
    let traj = solve_stokes_evolution(&StokesProblem::unforced(g, 1.0, 1.0, VectorField::zeros(g), eta0)).unwrap();
    let r = energy_report(&traj, 1.0, 1.0).unwrap();
    assert!(r.stokes_energy_nonincreasing);
    assert_eq!(r.rows.len(), 31);
    // Backward Euler dissipates at least the viscous rate.
    for row in &r.rows[1..] {
        assert!(row.dissipation_balance <= 1e-10, "{}", row.dissipation_balance);
    }
}

#[test]
fn data_norm_adds_pieces() {
    let g = SlabGrid::cube(8, 9).unwrap();
    let (w, h) = (band_field(g, 1, 1.0, 2), band_field(g, 2, 1.0, 2));
    let z = VectorField::zeros(g);
    let zs = SurfaceField::zeros(g);
    let n = data_norm(&w, &h, &z, &zs).unwrap();
    assert!(rel_close(n, sobolev_norm(&w, 2).unwrap() + sobolev_norm(&h, 2).unwrap(), 1e-14));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn quintuple_entries_nonnegative(seed in 0u64..1000, amp in 0.0f64..2.0) {
        let g = SlabGrid::cube(8, 5).unwrap().with_time(0.1, 3).unwrap();
        let states: Vec<FlatState> = (0..4).map(|n| FlatState {
            w: band_field(g, seed + n, amp, 2),
            h: band_field(g, seed + 10 + n, amp, 2),
            v: band_vector(g, seed + 20 + n, amp, 2),
            q: band_field(g, seed + 30 + n, amp, 2),
            eta: band_surface(g, seed + 40 + n, 0.05 * amp, 2),
            t: n as f64 * g.dt,
        }).collect();
        let q = quintuple_norm(&states).unwrap();
        for (name, v) in q.rows() {
            prop_assert!(v >= 0.0 && v.is_finite(), "{} = {}", name, v);
        }
    }
}
