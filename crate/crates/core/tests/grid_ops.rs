mod common;

use cns_core::ops::*;
use cns_core::{CnsError, ScalarField, SlabGrid, SurfaceField};
use common::*;
use proptest::prelude::*;
use std::f64::consts::{PI, TAU};

#[test]
fn grid_rejects_odd_or_tiny_sizes() {
    assert!(SlabGrid::new(7, 8, 9, TAU, TAU, 1.0).is_err());
    assert!(SlabGrid::new(8, 8, 2, TAU, TAU, 1.0).is_err());
    assert!(SlabGrid::new(8, 8, 9, TAU, TAU, -1.0).is_err());
    assert!(SlabGrid::cube(8, 9).unwrap().with_time(0.0, 10).is_err());
}

#[test]
fn spectral_derivative_against_fourth_order_differences() {
    let g = SlabGrid::cube(32, 5).unwrap();
    let f = band_field(g, 3, 1.0, 3);
    let d = d_horizontal(&f, 1, 1).unwrap();
    let h = g.l1 / g.n1 as f64;
    let n1 = g.n1;
    let mut worst: f64 = 0.0;
    for k in 0..g.nz {
        for i1 in 0..n1 {
            for i2 in 0..g.n2 {
                let at = |j: isize| f.at(((i1 as isize + j).rem_euclid(n1 as isize)) as usize, i2, k);
                let fd = (at(-2) - 8.0 * at(-1) + 8.0 * at(1) - at(2)) / (12.0 * h);
                worst = worst.max((fd - d.at(i1, i2, k)).abs());
            }
        }
    }
    // |f⁽⁵⁾| ≤ 3⁵ Σ|coeff| ≲ 3⁵·3·2; the stencil error is h⁴|f⁽⁵⁾|/30.
    assert!(worst < 3f64.powi(5) * 6.0 * h.powi(4) / 30.0, "{worst:e}");
    assert!(worst > 1e-8, "differences should see the truncation error");
}

#[test]
fn spectral_derivative_is_exact_for_resolved_modes() {
    let g = SlabGrid::new(16, 8, 5, 3.0, 5.0, 1.0).unwrap();
    let (k1, k2) = (TAU / 3.0 * 2.0, TAU / 5.0);
    let f = ScalarField::from_fn(g, |x, y, z| (k1 * x + k2 * y).sin() * (1.0 + z));
    let d2 = d_horizontal(&f, 2, 1).unwrap();
    let d11 = d_horizontal(&f, 1, 2).unwrap();
    let e2 = ScalarField::from_fn(g, |x, y, z| k2 * (k1 * x + k2 * y).cos() * (1.0 + z));
    let e11 = f.scale(-k1 * k1);
    assert!(d2.sub(&e2).max_abs() < 1e-12);
    assert!(d11.sub(&e11).max_abs() < 1e-11);
}

#[test]
fn vertical_derivative_is_second_order() {
    let mut errs = Vec::new();
    for nz in [17, 33, 65] {
        let g = SlabGrid::cube(4, nz).unwrap();
        let f = ScalarField::from_fn(g, |_, _, y| (PI * y / g.b).cos());
        let d1 = d_vertical(&f, 1).unwrap();
        let d2 = d_vertical(&f, 2).unwrap();
        let e1 = ScalarField::from_fn(g, |_, _, y| -PI / g.b * (PI * y / g.b).sin());
        let e2 = f.scale(-(PI / g.b).powi(2));
        errs.push((d1.sub(&e1).max_abs(), d2.sub(&e2).max_abs()));
    }
    for w in errs.windows(2) {
        let (r1, r2) = (w[0].0 / w[1].0, w[0].1 / w[1].1);
        assert!((3.5..4.5).contains(&r1), "first derivative ratio {r1}");
        assert!((3.5..4.5).contains(&r2), "second derivative ratio {r2}");
    }
}

#[test]
fn unsupported_orders_are_errors() {
    let g = SlabGrid::cube(4, 3).unwrap();
    let f = ScalarField::zeros(g);
    assert!(matches!(d_vertical(&f, 2), Err(CnsError::Grid(_))));
    assert!(d_vertical(&f, 3).is_err());
    assert!(d_horizontal(&f, 3, 1).is_err());
    assert!(sobolev_norm(&f, 2).is_err());
}

#[test]
fn nonfinite_input_rejected() {
    let g = SlabGrid::cube(4, 3).unwrap();
    let mut f = ScalarField::zeros(g);
    f.values_mut()[5] = f64::NAN;
    assert!(matches!(d_horizontal(&f, 1, 1), Err(CnsError::NonFinite(_))));
}

#[test]
fn h1_norm_of_single_mode() {
    let g = SlabGrid::new(16, 8, 9, 3.0, 2.0, 0.7).unwrap();
    let k = TAU / g.l1;
    let f = ScalarField::from_fn(g, |x, _, _| (k * x).sin());
    let expect = (g.l1 * g.l2 * g.b / 2.0 * (1.0 + k * k)).sqrt();
    assert!(rel_close(sobolev_norm(&f, 1).unwrap(), expect, 1e-10));
    let l2 = (g.l1 * g.l2 * g.b / 2.0).sqrt();
    assert!(rel_close(sobolev_norm(&f, 0).unwrap(), l2, 1e-12));
    assert!(rel_close(l2_norm(&f), l2, 1e-12));
}

#[test]
fn half_order_surface_norm_of_single_mode() {
    let g = SlabGrid::new(16, 8, 5, 3.0, 2.0, 1.0).unwrap();
    let k = TAU / g.l1;
    let eta = SurfaceField::from_fn(g, |x, _| (k * x).cos());
    let expect = (g.l1 * g.l2 / 2.0 * (1.0 + k * k).sqrt()).sqrt();
    assert!(rel_close(surface_fractional_norm(&eta, 0.5), expect, 1e-12));
    assert!(rel_close(surface_fractional_norm(&eta, 0.0).powi(2), surface_l2_sq(&eta), 1e-12));
}

#[test]
fn trapezoid_integrates_linear_profiles_exactly() {
    let g = SlabGrid::new(8, 4, 6, 2.0, 3.0, 1.5).unwrap();
    let f = ScalarField::from_fn(g, |x, _, y| 2.0 + y + 0.1 * (TAU * x / 2.0).cos());
    assert!(rel_close(integrate(&f), (2.0 - 0.75) * 6.0 * 1.5, 1e-13));
}

#[test]
fn divergence_of_solenoidal_polynomial_field() {
    let g = SlabGrid::cube(8, 9).unwrap();
    let v = cns_core::VectorField::from_fn(g, |x, _, y| [y * x.cos(), 0.0, 0.5 * y * y * x.sin()]);
    assert!(divergence(&v).max_abs() < 1e-12);
}

fn small_field() -> impl Strategy<Value = ScalarField> {
    let g = SlabGrid::new(4, 4, 5, TAU, 2.0, 1.0).unwrap();
    prop::collection::vec(-10.0f64..10.0, g.len()).prop_map(move |d| ScalarField::new(g, d).unwrap())
}

proptest! {
    #[test]
    fn sobolev_norm_monotone_in_order(f in small_field()) {
        let n: Vec<f64> = (0..=3).map(|m| sobolev_norm(&f, m).unwrap()).collect();
        for m in 0..3 {
            prop_assert!(n[m] <= n[m + 1] * (1.0 + 1e-12), "{:?}", n);
        }
    }

    #[test]
    fn sobolev_norm_is_homogeneous(f in small_field(), lam in -5.0f64..5.0) {
        for m in 0..=3 {
            let a = sobolev_norm(&f.scale(lam), m).unwrap();
            let b = lam.abs() * sobolev_norm(&f, m).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * b.max(1e-300));
        }
    }

    #[test]
    fn horizontal_derivatives_commute(f in small_field()) {
        let a = d_horizontal(&d_horizontal(&f, 1, 1).unwrap(), 2, 1).unwrap();
        let b = d_horizontal(&d_horizontal(&f, 2, 1).unwrap(), 1, 1).unwrap();
        prop_assert!(a.sub(&b).max_abs() <= 1e-10 * (1.0 + f.max_abs()));
    }
}
