mod common;

use cns_core::harmonic::*;
use cns_core::{ScalarField, SlabGrid, SurfaceField};
use common::*;
use proptest::prelude::*;
use std::f64::consts::TAU;

fn cosh_mode(g: SlabGrid) -> (SurfaceField, ScalarField) {
    let k = TAU / g.l1;
    let eta = SurfaceField::from_fn(g, |x, _| (k * x).cos());
    let exact = ScalarField::from_fn(g, |x, _, y| (k * x).cos() * (k * (y + g.b)).cosh() / (k * g.b).cosh());
    (eta, exact)
}

#[test]
fn single_mode_matches_cosh_profile() {
    for g in [SlabGrid::cube(16, 17).unwrap(), SlabGrid::new(8, 4, 9, 3.0, 5.0, 2.5).unwrap()] {
        let (eta, exact) = cosh_mode(g);
        let e = extend(&eta);
        assert!(e.values.sub(&exact).max_abs() <= 1e-12 * exact.max_abs());
        assert!(e.values.top().sub(&eta).max_abs() < 1e-14);
    }
}

#[test]
fn profile_is_stable_for_large_wavenumbers() {
    let (c, s) = profile(800.0, -1.0, 1.0);
    assert!(c.is_finite() && s.is_finite() && c < 1e-300);
    let (c, s) = profile(800.0, 0.0, 1.0);
    assert!((c - 1.0).abs() < 1e-15 && (s - 1.0).abs() < 1e-15);
}

#[test]
fn residuals_converge_under_vertical_doubling() {
    let res: Vec<(f64, f64)> = [17, 33, 65]
        .iter()
        .map(|&nz| extension_residual(&extend(&cosh_mode(SlabGrid::cube(16, nz).unwrap()).0)))
        .collect();
    for w in res.windows(2) {
        let (a, b) = (w[0].0 / w[1].0, w[0].1 / w[1].1);
        assert!((3.5..=4.5).contains(&a), "laplacian ratio {a}");
        // Every mode is even about y = −b, so ∂₃³η̄ vanishes there and the
        // one-sided stencil error starts at h³∂₃⁴η̄/4.
        assert!((7.0..=9.0).contains(&b), "neumann ratio {b}");
    }
}

#[test]
fn random_surface_residuals_are_second_order() {
    let res = |nz: usize| {
        let g = SlabGrid::cube(16, nz).unwrap();
        let (l, n) = extension_residual(&extend(&band_surface(g, 11, 0.3, 3)));
        (l.max(n), g.hz())
    };
    let (r0, h0) = res(17);
    let (r1, h1) = res(33);
    let c = r0.max(r1 * (h0 / h1).powi(2)) / (h0 * h0);
    let (r2, h2) = res(65);
    assert!(r2.is_finite() && r2 <= 1.1 * c * h2 * h2, "{r2:e} vs {:e}", c * h2 * h2);
}

#[test]
fn norm_bound_ratio_is_finite_over_random_surfaces() {
    let g = SlabGrid::cube(16, 9).unwrap();
    let mut ratios = Vec::new();
    for seed in 0..50 {
        let eta = band_surface(g, seed, 0.1, 4);
        let (lhs, rhs) = extension_norm_bound(&eta, 2).unwrap();
        ratios.push(lhs / rhs);
    }
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(hi.is_finite() && lo > 0.0 && hi / lo < 10.0, "{lo} {hi}");
}

#[test]
fn max_principle_holds() {
    let g = SlabGrid::cube(16, 9).unwrap();
    for seed in 0..5 {
        assert!(satisfies_max_principle(&extend(&band_surface(g, seed, 1.0, 4)), 1e-12));
    }
}

#[test]
fn constant_surface_extends_to_constant() {
    let g = SlabGrid::cube(8, 5).unwrap();
    let e = extend(&SurfaceField::constant(g, 0.25));
    assert!(e.values.sub(&ScalarField::constant(g, 0.25)).max_abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn norm_bound_ratio_invariant_under_scaling(seed in 0u64..1000, lam in prop_oneof![-8.0f64..-0.01, 0.01f64..8.0], m in 1usize..=3) {
        let g = SlabGrid::cube(8, 9).unwrap();
        let eta = band_surface(g, seed, 0.2, 3);
        let (a, b) = extension_norm_bound(&eta, m).unwrap();
        let (c, d) = extension_norm_bound(&eta.scale(lam), m).unwrap();
        prop_assert!(((a / b) - (c / d)).abs() <= 1e-12 * (a / b));
    }

    #[test]
    fn extension_is_linear(s1 in 0u64..1000, s2 in 0u64..1000, lam in -3.0f64..3.0) {
        let g = SlabGrid::cube(8, 5).unwrap();
        let (a, b) = (band_surface(g, s1, 1.0, 3), band_surface(g, s2, 1.0, 3));
        let lhs = extend(&a.add(&b.scale(lam))).values;
        let rhs = extend(&a).values.add(&extend(&b).values.scale(lam));
        prop_assert!(lhs.sub(&rhs).max_abs() < 1e-12 * (1.0 + lam.abs()) * 10.0);
    }
}
