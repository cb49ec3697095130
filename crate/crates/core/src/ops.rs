//! Discrete derivatives, quadrature and Sobolev-type norms on the slab.

use crate::error::{CnsError, Result};
use crate::grid::{ScalarField, SlabGrid, SurfaceField, VectorField};
use crate::spectral::{forward_levels, inverse_levels, inverse_levels_pair, C64};
use std::ops::{Add, Mul, Sub};

pub(crate) trait Lin: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + Send + Sync {}
impl<T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T> + Send + Sync> Lin for T {}

/// First vertical derivative, plane by plane: centred inside, one-sided
/// three-point at both ends.
pub(crate) fn dz_levels<T: Lin>(src: &[T], p: usize, nz: usize, h: f64, out: &mut [T]) {
    let r = 0.5 / h;
    for k in 0..nz {
        let o = &mut out[k * p..(k + 1) * p];
        let l = |j: usize| &src[j * p..(j + 1) * p];
        if k == 0 {
            let (a, b, c) = (l(0), l(1), l(2));
            for i in 0..p {
                o[i] = (b[i] * 4.0 - a[i] * 3.0 - c[i]) * r;
            }
        } else if k + 1 == nz {
            let (a, b, c) = (l(k), l(k - 1), l(k - 2));
            for i in 0..p {
                o[i] = (a[i] * 3.0 - b[i] * 4.0 + c[i]) * r;
            }
        } else {
            let (a, c) = (l(k + 1), l(k - 1));
            for i in 0..p {
                o[i] = (a[i] - c[i]) * r;
            }
        }
    }
}

/// Second vertical derivative: three-point inside, four-point one-sided
/// (second order) at both ends. Needs `nz >= 4`.
pub(crate) fn dzz_levels<T: Lin>(src: &[T], p: usize, nz: usize, h: f64, out: &mut [T]) {
    let r = 1.0 / (h * h);
    for k in 0..nz {
        let o = &mut out[k * p..(k + 1) * p];
        let l = |j: usize| &src[j * p..(j + 1) * p];
        if k == 0 || k + 1 == nz {
            let s: [usize; 4] = if k == 0 { [0, 1, 2, 3] } else { [k, k - 1, k - 2, k - 3] };
            let (a, b, c, d) = (l(s[0]), l(s[1]), l(s[2]), l(s[3]));
            for i in 0..p {
                o[i] = (a[i] * 2.0 - b[i] * 5.0 + c[i] * 4.0 - d[i]) * r;
            }
        } else {
            let (a, b, c) = (l(k + 1), l(k), l(k - 1));
            for i in 0..p {
                o[i] = (a[i] - b[i] * 2.0 + c[i]) * r;
            }
        }
    }
}

pub(crate) fn dz_vec<T: Lin + Default>(g: &SlabGrid, src: &[T]) -> Vec<T> {
    let mut out = vec![T::default(); src.len()];
    dz_levels(src, src.len() / g.nz, g.nz, g.hz(), &mut out);
    out
}

pub(crate) fn dzz_vec<T: Lin + Default>(g: &SlabGrid, src: &[T]) -> Vec<T> {
    let mut out = vec![T::default(); src.len()];
    dzz_levels(src, src.len() / g.nz, g.nz, g.hz(), &mut out);
    out
}

pub(crate) fn dz(f: &ScalarField) -> ScalarField {
    ScalarField::raw(*f.grid(), dz_vec(f.grid(), f.values()))
}

pub(crate) fn dzz(f: &ScalarField) -> ScalarField {
    ScalarField::raw(*f.grid(), dzz_vec(f.grid(), f.values()))
}

/// One-sided first vertical derivative on Γ.
pub(crate) fn dz_top(f: &ScalarField) -> SurfaceField {
    let g = f.grid();
    let n = g.nz;
    let r = 0.5 / g.hz();
    let (a, b, c) = (f.level(n - 1), f.level(n - 2), f.level(n - 3));
    SurfaceField::raw(*g, (0..g.plane()).map(|i| (3.0 * a[i] - 4.0 * b[i] + c[i]) * r).collect())
}

/// One-sided first vertical derivative on S_B.
pub(crate) fn dz_bottom(f: &ScalarField) -> SurfaceField {
    let g = f.grid();
    let r = 0.5 / g.hz();
    let (a, b, c) = (f.level(0), f.level(1), f.level(2));
    SurfaceField::raw(*g, (0..g.plane()).map(|i| (4.0 * b[i] - 3.0 * a[i] - c[i]) * r).collect())
}

/// Horizontal derivative operators and their composites with ∂₃.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum D {
    X1,
    X2,
    X11,
    X22,
    X12,
    Z,
    ZZ,
    X1Z,
    X2Z,
}

pub(crate) fn symbol(g: &SlabGrid, j1: usize, j2: usize, op: D) -> C64 {
    let (a, b) = (g.k1(j1), g.k2(j2));
    match op {
        D::X1 => C64::new(0.0, a),
        D::X2 => C64::new(0.0, b),
        D::X11 => C64::new(-a * a, 0.0),
        D::X22 => C64::new(-b * b, 0.0),
        D::X12 => C64::new(-a * b, 0.0),
        _ => unreachable!("vertical operator has no horizontal symbol"),
    }
}

pub(crate) fn apply_symbol(g: &SlabGrid, spec: &[C64], op: D) -> Vec<C64> {
    let p = g.plane();
    let sym: Vec<C64> = (0..g.n1).flat_map(|j1| (0..g.n2).map(move |j2| (j1, j2))).map(|(j1, j2)| symbol(g, j1, j2, op)).collect();
    spec.iter().enumerate().map(|(i, z)| z * sym[i % p]).collect()
}

/// Several derivatives of one field sharing a single forward transform.
pub(crate) fn derivs<const N: usize>(f: &ScalarField, ops: [D; N]) -> [ScalarField; N] {
    let g = *f.grid();
    let needs = |o: D| ops.iter().any(|&x| x == o);
    let horiz_base: Vec<D> = [D::X1, D::X2, D::X11, D::X22, D::X12]
        .into_iter()
        .filter(|&o| needs(o) || (o == D::X1 && needs(D::X1Z)) || (o == D::X2 && needs(D::X2Z)))
        .collect();
    let mut hor: Vec<(D, Vec<f64>)> = Vec::new();
    if !horiz_base.is_empty() {
        let s = forward_levels(&g, f.values());
        let specs: Vec<(D, Vec<C64>)> = horiz_base.iter().map(|&o| (o, apply_symbol(&g, &s, o))).collect();
        for pair in specs.chunks(2) {
            if pair.len() == 2 {
                let (a, b) = inverse_levels_pair(&g, &pair[0].1, &pair[1].1);
                hor.push((pair[0].0, a));
                hor.push((pair[1].0, b));
            } else {
                hor.push((pair[0].0, inverse_levels(&g, &pair[0].1)));
            }
        }
    }
    let get = |o: D| hor.iter().find(|(x, _)| *x == o).map(|(_, v)| v);
    ops.map(|o| match o {
        D::Z => dz(f),
        D::ZZ => dzz(f),
        D::X1Z => ScalarField::raw(g, dz_vec(&g, get(D::X1).unwrap())),
        D::X2Z => ScalarField::raw(g, dz_vec(&g, get(D::X2).unwrap())),
        h => ScalarField::raw(g, get(h).unwrap().clone()),
    })
}

/// Horizontal derivatives of a surface field.
pub(crate) fn sderivs<const N: usize>(f: &SurfaceField, ops: [D; N]) -> [SurfaceField; N] {
    let g = *f.grid();
    let s = forward_levels(&g, f.values());
    ops.map(|o| SurfaceField::raw(g, inverse_levels(&g, &apply_symbol(&g, &s, o))))
}

fn check_axis_order(axis: usize, order: usize) -> Result<D> {
    match (axis, order) {
        (1, 1) => Ok(D::X1),
        (2, 1) => Ok(D::X2),
        (1, 2) => Ok(D::X11),
        (2, 2) => Ok(D::X22),
        _ => Err(CnsError::Domain(format!("unsupported horizontal derivative axis {axis} order {order}"))),
    }
}

/// Spectral derivative along a periodic axis.
pub fn d_horizontal(f: &ScalarField, axis: usize, order: usize) -> Result<ScalarField> {
    let op = check_axis_order(axis, order)?;
    if !f.is_finite() {
        return Err(CnsError::NonFinite("d_horizontal input"));
    }
    let [d] = derivs(f, [op]);
    Ok(d)
}

pub fn d_horizontal_surface(f: &SurfaceField, axis: usize, order: usize) -> Result<SurfaceField> {
    let op = check_axis_order(axis, order)?;
    if f.values().iter().any(|x| !x.is_finite()) {
        return Err(CnsError::NonFinite("d_horizontal input"));
    }
    let [d] = sderivs(f, [op]);
    Ok(d)
}

/// Second-order finite-difference derivative in y.
pub fn d_vertical(f: &ScalarField, order: usize) -> Result<ScalarField> {
    let nz = f.grid().nz;
    match order {
        1 if nz >= 3 => Ok(dz(f)),
        2 if nz >= 4 => Ok(dzz(f)),
        1 | 2 => Err(CnsError::Grid(format!("Nz = {nz} too small for vertical order {order}"))),
        _ => Err(CnsError::Domain(format!("unsupported vertical order {order}"))),
    }
}

/// Discrete ∇·v: spectral ∂₁v₁ + ∂₂v₂ plus the vertical stencil on v₃.
pub fn divergence(v: &VectorField) -> ScalarField {
    let [a] = derivs(&v.c[0], [D::X1]);
    let [b] = derivs(&v.c[1], [D::X2]);
    a.add(&b).add(&dz(&v.c[2]))
}

/// ∫_Ω f (trapezoid in y, mean times area horizontally).
pub fn integrate(f: &ScalarField) -> f64 {
    let g = f.grid();
    let w = g.trapezoid();
    let mut s = 0.0;
    for (k, wk) in w.iter().enumerate() {
        s += wk * f.level(k).iter().sum::<f64>();
    }
    s * g.cell_area()
}

pub fn inner(f: &ScalarField, h: &ScalarField) -> f64 {
    integrate(&f.mul(h))
}

pub fn l2_norm(f: &ScalarField) -> f64 {
    inner(f, f).sqrt()
}

pub fn l2_norm_vec(v: &VectorField) -> f64 {
    v.c.iter().map(|f| inner(f, f)).sum::<f64>().sqrt()
}

/// ∫_Γ η².
pub fn surface_l2_sq(eta: &SurfaceField) -> f64 {
    eta.values().iter().map(|x| x * x).sum::<f64>() * eta.grid().cell_area()
}

/// Vertical derivative of order `n` applied to spectral levels.
fn vertical_power(g: &SlabGrid, s: &[C64], n: usize) -> Vec<C64> {
    match n {
        0 => s.to_vec(),
        1 => dz_vec(g, s),
        2 => dzz_vec(g, s),
        3 => dz_vec(g, &dzz_vec(g, s)),
        4 => dzz_vec(g, &dzz_vec(g, s)),
        _ => unreachable!(),
    }
}

/// Σ_{a1+a2 ≤ n} k1^{2a1} k2^{2a2}.
fn horizontal_weight(a: f64, b: f64, n: usize) -> f64 {
    let (a2, b2) = (a * a, b * b);
    let mut tot = 0.0;
    let mut pa = 1.0;
    for i in 0..=n {
        let mut pb = 1.0;
        for _ in 0..=(n - i) {
            tot += pa * pb;
            pb *= b2;
        }
        pa *= a2;
    }
    tot
}

/// ‖f‖²_{Hᵐ} from the level-wise spectrum of f.
pub(crate) fn sobolev_sq_spec(g: &SlabGrid, s: &[C64], m: usize) -> f64 {
    let p = g.plane();
    let w = g.trapezoid();
    let area = g.l1 * g.l2;
    let mut total = 0.0;
    for a3 in 0..=m {
        let v = vertical_power(g, s, a3);
        let mut e = vec![0.0; p];
        for (k, wk) in w.iter().enumerate() {
            for (i, ei) in e.iter_mut().enumerate() {
                *ei += wk * v[k * p + i].norm_sqr();
            }
        }
        for j1 in 0..g.n1 {
            for j2 in 0..g.n2 {
                total += e[j1 * g.n2 + j2] * horizontal_weight(g.k1(j1), g.k2(j2), m - a3);
            }
        }
    }
    total * area
}

/// `[‖f‖²_{H⁰}, …, ‖f‖²_{H³}]` from the level-wise spectrum of f in one pass.
pub(crate) fn sobolev_orders_spec(g: &SlabGrid, s: &[C64]) -> [f64; 4] {
    let p = g.plane();
    let w = g.trapezoid();
    let mut out = [0.0; 4];
    let d1 = dz_vec(g, s);
    let d2 = dzz_vec(g, s);
    let d3 = dz_vec(g, &d2);
    for (a3, v) in [s, &d1[..], &d2[..], &d3[..]].into_iter().enumerate() {
        let mut e = vec![0.0; p];
        for (k, wk) in w.iter().enumerate() {
            for (i, ei) in e.iter_mut().enumerate() {
                *ei += wk * v[k * p + i].norm_sqr();
            }
        }
        for j1 in 0..g.n1 {
            for j2 in 0..g.n2 {
                let ej = e[j1 * g.n2 + j2];
                let (a2, b2) = (g.k1(j1).powi(2), g.k2(j2).powi(2));
                let hw = [
                    1.0,
                    1.0 + a2 + b2,
                    1.0 + a2 + b2 + a2 * a2 + a2 * b2 + b2 * b2,
                    1.0 + a2 + b2 + a2 * a2 + a2 * b2 + b2 * b2 + a2 * a2 * a2 + a2 * a2 * b2 + a2 * b2 * b2 + b2 * b2 * b2,
                ];
                for m in a3..4 {
                    out[m] += ej * hw[m - a3];
                }
            }
        }
    }
    let area = g.l1 * g.l2;
    out.map(|x| x * area)
}

fn check_m(g: &SlabGrid, m: usize) -> Result<()> {
    if m > 4 {
        return Err(CnsError::Domain(format!("Sobolev order {m} not supported")));
    }
    if (m >= 2 && g.nz < 4) || (m == 1 && g.nz < 3) {
        return Err(CnsError::Grid(format!("Nz = {} too small for H^{m}", g.nz)));
    }
    Ok(())
}

/// Discrete Hᵐ norm: every mixed derivative of order ≤ m, each multi-index once.
pub fn sobolev_norm(f: &ScalarField, m: usize) -> Result<f64> {
    check_m(f.grid(), m)?;
    if !f.is_finite() {
        return Err(CnsError::NonFinite("sobolev_norm input"));
    }
    Ok(sobolev_sq_spec(f.grid(), &forward_levels(f.grid(), f.values()), m).sqrt())
}

pub fn sobolev_norm_vec(v: &VectorField, m: usize) -> Result<f64> {
    let mut s = 0.0;
    for c in &v.c {
        s += sobolev_norm(c, m)?.powi(2);
    }
    Ok(s.sqrt())
}

/// Σ_k (1+|k|²)^s |η̂_k|² · L1·L2, square-rooted.
pub fn surface_fractional_norm(eta: &SurfaceField, s: f64) -> f64 {
    let g = eta.grid();
    let spec = forward_levels(g, eta.values());
    surface_multiplier_sq(g, &spec, |k2| (1.0 + k2).powf(s)).sqrt()
}

pub(crate) fn surface_multiplier_sq(g: &SlabGrid, spec: &[C64], weight: impl Fn(f64) -> f64) -> f64 {
    let mut tot = 0.0;
    for j1 in 0..g.n1 {
        for j2 in 0..g.n2 {
            tot += weight(g.ksq(j1, j2)) * spec[j1 * g.n2 + j2].norm_sqr();
        }
    }
    tot * g.l1 * g.l2
}
