//! Harmonic extension η ↦ η̄: Δη̄ = 0 in Ω, η̄ = η on Γ, ∂₃η̄ = 0 on S_B.
//!
//! Each horizontal mode is evaluated in closed form,
//! `η̂_k cosh(|k|(y+b)) / cosh(|k|b)`, so no linear solve is involved.

use crate::error::Result;
use crate::grid::{ScalarField, SlabGrid, SurfaceField};
use crate::ops::{derivs, dz_bottom, sobolev_norm, surface_fractional_norm, D};
use crate::spectral::{forward_levels, inverse_levels, inverse_levels_pair, C64};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

#[derive(Clone, Debug)]
pub struct HarmonicExtension {
    pub source: SurfaceField,
    pub values: ScalarField,
}

/// `cosh(κ(y+b))/cosh(κb)` and `sinh(κ(y+b))/cosh(κb)` without overflow.
pub fn profile(kappa: f64, y: f64, b: f64) -> (f64, f64) {
    if kappa == 0.0 {
        return (1.0, 0.0);
    }
    let z = kappa * (y + b);
    let e = (z - kappa * b).exp();
    let ez = (-2.0 * z).exp();
    let d = 1.0 + (-2.0 * kappa * b).exp();
    (e * (1.0 + ez) / d, e * (1.0 - ez) / d)
}

/// Per-node `|k|`, cosh-ratio and sinh-ratio for one grid geometry.
pub(crate) struct ProfileTable {
    pub kabs: Vec<f64>,
    pub c: Vec<f64>,
    pub s: Vec<f64>,
}

type TableKey = (usize, usize, usize, u64, u64, u64);
static TABLES: OnceLock<Mutex<HashMap<TableKey, Arc<ProfileTable>>>> = OnceLock::new();

pub(crate) fn profile_table(g: &SlabGrid) -> Arc<ProfileTable> {
    let key = (g.n1, g.n2, g.nz, g.l1.to_bits(), g.l2.to_bits(), g.b.to_bits());
    let cache = TABLES.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
    map.entry(key)
        .or_insert_with(|| {
            let p = g.plane();
            let kabs: Vec<f64> = (0..p).map(|i| g.ksq(i / g.n2, i % g.n2).sqrt()).collect();
            let mut c = vec![0.0; g.len()];
            let mut s = vec![0.0; g.len()];
            for k in 0..g.nz {
                for i in 0..p {
                    (c[k * p + i], s[k * p + i]) = profile(kabs[i], g.y(k), g.b);
                }
            }
            Arc::new(ProfileTable { kabs, c, s })
        })
        .clone()
}

/// Spectral levels of η̄ and of ∂₃η̄.
pub(crate) fn extension_levels(g: &SlabGrid, eta_hat: &[C64]) -> (Vec<C64>, Vec<C64>) {
    let t = profile_table(g);
    let p = g.plane();
    let val = (0..g.len()).map(|n| eta_hat[n % p] * t.c[n]).collect();
    let d3 = (0..g.len()).map(|n| eta_hat[n % p] * (t.kabs[n % p] * t.s[n])).collect();
    (val, d3)
}

/// η̄ together with ∂₁η̄, ∂₂η̄, ∂₃η̄, all evaluated mode-analytically.
pub fn extend_with_derivatives(eta: &SurfaceField) -> (HarmonicExtension, [ScalarField; 3]) {
    let g = *eta.grid();
    let hat = forward_levels(&g, eta.values());
    let (val, d3) = extension_levels(&g, &hat);
    let p = g.plane();
    let mut d1 = vec![C64::new(0.0, 0.0); g.len()];
    let mut d2 = vec![C64::new(0.0, 0.0); g.len()];
    for (i, z) in val.iter().enumerate() {
        let m = i % p;
        d1[i] = z * C64::new(0.0, g.k1(m / g.n2));
        d2[i] = z * C64::new(0.0, g.k2(m % g.n2));
    }
    let (v, z) = inverse_levels_pair(&g, &val, &d3);
    let (x, y) = inverse_levels_pair(&g, &d1, &d2);
    let mut values = ScalarField::raw(g, v);
    // Γ carries η exactly.
    values.level_mut(g.nz - 1).copy_from_slice(eta.values());
    let ext = HarmonicExtension { source: eta.clone(), values };
    (ext, [ScalarField::raw(g, x), ScalarField::raw(g, y), ScalarField::raw(g, z)])
}

pub fn extend(eta: &SurfaceField) -> HarmonicExtension {
    extend_with_derivatives(eta).0
}

/// ∂₁^{n₀}∂₂^{n₁}∂₃^{n₂}η̄ at every node for each requested multi-index,
/// mode-analytically.
pub(crate) fn extension_derivatives(g: &SlabGrid, eta_hat: &[C64], idx: &[[u32; 3]]) -> Vec<ScalarField> {
    let t = profile_table(g);
    let p = g.plane();
    let spec = |n: [u32; 3]| -> Vec<C64> {
        let hor: Vec<C64> = (0..p)
            .map(|i| {
                let kp = t.kabs[i].powi(n[2] as i32);
                eta_hat[i] * C64::new(0.0, g.k1(i / g.n2)).powu(n[0]) * C64::new(0.0, g.k2(i % g.n2)).powu(n[1]) * kp
            })
            .collect();
        let prof = if n[2] % 2 == 0 { &t.c } else { &t.s };
        (0..g.len()).map(|m| hor[m % p] * prof[m]).collect()
    };
    let mut out = Vec::with_capacity(idx.len());
    for pair in idx.chunks(2) {
        if pair.len() == 2 {
            let (a, b) = inverse_levels_pair(g, &spec(pair[0]), &spec(pair[1]));
            out.push(ScalarField::raw(*g, a));
            out.push(ScalarField::raw(*g, b));
        } else {
            out.push(ScalarField::raw(*g, inverse_levels(g, &spec(pair[0]))));
        }
    }
    out
}

/// (max |discrete Δη̄| over interior nodes, max |discrete ∂₃η̄| on S_B).
pub fn extension_residual(e: &HarmonicExtension) -> (f64, f64) {
    let g = *e.values.grid();
    let [a, b, c] = derivs(&e.values, [D::X11, D::X22, D::ZZ]);
    let p = g.plane();
    let mut lap = 0.0f64;
    for k in 1..g.nz - 1 {
        for i in 0..p {
            let j = k * p + i;
            lap = lap.max((a.values()[j] + b.values()[j] + c.values()[j]).abs());
        }
    }
    (lap, dz_bottom(&e.values).max_abs())
}

/// (‖η̄‖_{Hᵐ}, ‖η‖_{H^{m−1/2}(Γ)}).
pub fn extension_norm_bound(eta: &SurfaceField, m: usize) -> Result<(f64, f64)> {
    let lhs = sobolev_norm(&extend(eta).values, m)?;
    Ok((lhs, surface_fractional_norm(eta, m as f64 - 0.5)))
}

/// min η ≤ η̄ ≤ max η, up to `tol`.
pub fn satisfies_max_principle(e: &HarmonicExtension, tol: f64) -> bool {
    let (lo, hi) = (e.source.min(), e.source.max());
    e.values.values().iter().all(|&v| v >= lo - tol && v <= hi + tol)
}
