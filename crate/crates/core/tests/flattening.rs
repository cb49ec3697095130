mod common;

use cns_core::harmonic::profile;
use cns_core::transform::*;
use cns_core::{ScalarField, SlabGrid, SurfaceField};
use common::*;
use proptest::prelude::*;
use std::f64::consts::{E, TAU};

#[test]
fn jacobian_of_single_mode_matches_closed_form() {
    let g = SlabGrid::cube(32, 17).unwrap();
    let k = TAU / g.l1;
    let eta = SurfaceField::from_fn(g, |x, _| 0.05 * (k * x).cos());
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for kk in 0..g.nz {
        let y = g.y(kk);
        let (c, s) = profile(k, y, g.b);
        for i in 0..g.n1 {
            let e = 0.05 * (k * g.x1(i)).cos();
            let j = 1.0 + e * c / g.b + e * k * s * (1.0 + y / g.b);
            lo = lo.min(j);
            hi = hi.max(j);
        }
    }
    let (jl, jh) = jacobian_range(&eta);
    assert!((jl - lo).abs() < 1e-13 && (jh - hi).abs() < 1e-13);
    assert!(0.5 < jl && jh < 1.5);
    let geo = geometry_coeffs(&eta, &SurfaceField::zeros(g)).unwrap();
    let (bl, bh) = jacobian_bounds(&geo);
    assert!((bl - lo).abs() < 1e-13 && (bh - hi).abs() < 1e-13);
}

#[test]
fn small_random_surfaces_stay_in_window() {
    let g = SlabGrid::cube(16, 9).unwrap();
    for seed in 0..20 {
        let eta = band_surface(g, seed, 0.02, 4);
        assert!(cns_core::ops::surface_fractional_norm(&eta, 3.0) < cns_core::picard::DEFAULT_SMALLNESS);
        let (lo, hi) = jacobian_range(&eta);
        assert!(lo > 0.5 && hi < 1.5, "seed {seed}: [{lo}, {hi}]");
    }
}

#[test]
fn vertical_coordinate_composition() {
    let g = SlabGrid::cube(16, 9).unwrap();
    let k = TAU / g.l1;
    let eta = SurfaceField::from_fn(g, |x, _| 0.1 * (k * x).cos());
    let f = compose_with_theta(|_, _, z, _| z, &eta, 0.0);
    let exact = ScalarField::from_fn(g, |x, _, y| {
        let eb = 0.1 * (k * x).cos() * profile(k, y, g.b).0;
        eb + y * (1.0 + eb / g.b)
    });
    assert!(f.sub(&exact).max_abs() < 1e-12);
}

#[test]
fn flat_surface_gives_identity_velocity_map() {
    let g = SlabGrid::cube(8, 5).unwrap();
    let z = SurfaceField::zeros(g);
    let geo = geometry_coeffs(&z, &z).unwrap();
    let v = band_vector(g, 1, 1.0, 2);
    assert_eq!(velocity_from_flat(&v, &geo).sub(&v).max_abs(), 0.0);
}

#[test]
fn log_transform_constants() {
    let g = SlabGrid::cube(4, 3).unwrap();
    let c = inverse_log_transform(&ScalarField::zeros(g), 3.0);
    assert!((c.min() - 3.0).abs() < 1e-15 && (c.max() - 3.0).abs() < 1e-15);
    let c = inverse_log_transform(&ScalarField::constant(g, 1.0), 3.0);
    assert!((c.max() - 3.0 / E).abs() < 1e-15);
    assert!(log_transform(&ScalarField::constant(g, 1.0), 0.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn velocity_round_trip(seed in 0u64..10_000, amp in 0.0f64..0.1) {
        let g = SlabGrid::cube(8, 5).unwrap();
        let eta = band_surface(g, seed, amp, 3);
        let eta_t = band_surface(g, seed + 1, amp, 3);
        let geo = geometry_coeffs(&eta, &eta_t).unwrap();
        let v = band_vector(g, seed + 2, 1.0, 3);
        let back = velocity_to_flat(&velocity_from_flat(&v, &geo), &geo);
        prop_assert!(back.sub(&v).max_abs() <= 1e-12 * (1.0 + v.max_abs()));
    }

    #[test]
    fn log_transform_round_trip(vals in prop::collection::vec(1e-6f64..1e6, 48), c_hat in 1e-3f64..1e3) {
        let g = SlabGrid::new(4, 4, 3, TAU, TAU, 1.0).unwrap();
        let c = ScalarField::new(g, vals).unwrap();
        let back = inverse_log_transform(&log_transform(&c, c_hat).unwrap(), c_hat);
        for (a, b) in back.values().iter().zip(c.values()) {
            prop_assert!((a - b).abs() <= 1e-12 * b);
        }
    }
}
