#![allow(dead_code)]

use cns_core::{ScalarField, SlabGrid, SurfaceField, VectorField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random trigonometric polynomial in x₁, x₂ with |kᵢ| ≤ kmax, coefficients
/// damped like 1/(1+|k|²).
pub fn band_surface(g: SlabGrid, seed: u64, amp: f64, kmax: i32) -> SurfaceField {
    let mut r = rng(seed);
    let mut modes = Vec::new();
    for k1 in -kmax..=kmax {
        for k2 in 0..=kmax {
            let w = amp / (1.0 + (k1 * k1 + k2 * k2) as f64);
            modes.push((k1 as f64, k2 as f64, w * r.gen_range(-1.0..1.0), w * r.gen_range(-1.0..1.0)));
        }
    }
    let (s1, s2) = (std::f64::consts::TAU / g.l1, std::f64::consts::TAU / g.l2);
    SurfaceField::from_fn(g, |x, y| {
        modes.iter().map(|&(a, b, c, s)| {
            let ph = a * s1 * x + b * s2 * y;
            c * ph.cos() + s * ph.sin()
        }).sum()
    })
}

/// Band-limited in x and smooth in y: Σ cᵢ(x) pᵢ(y) with a few analytic profiles.
pub fn band_field(g: SlabGrid, seed: u64, amp: f64, kmax: i32) -> ScalarField {
    let parts: Vec<SurfaceField> = (0..3).map(|i| band_surface(g, seed * 7 + i, amp, kmax)).collect();
    let b = g.b;
    let mut f = ScalarField::zeros(g);
    for k in 0..g.nz {
        let y = g.y(k);
        let prof = [1.0, (y / b).powi(2), (1.5 * y / b).cos()];
        let lev = f.level_mut(k);
        for (c, pr) in parts.iter().zip(prof) {
            for (o, x) in lev.iter_mut().zip(c.values()) {
                *o += pr * x;
            }
        }
    }
    f
}

pub fn band_vector(g: SlabGrid, seed: u64, amp: f64, kmax: i32) -> VectorField {
    VectorField::new(
        band_field(g, seed, amp, kmax),
        band_field(g, seed + 1000, amp, kmax),
        band_field(g, seed + 2000, amp, kmax),
    )
    .unwrap()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}
