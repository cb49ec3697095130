//! Random band-limited initial data that satisfy the compatibility
//! conditions on the grid.
//!
//! * η₀: zero-mean band-limited surface.
//! * h₀ = A·r(x)·R(y), R = −y(y+2b)/b², so h₀ = 0 on Γ and ∂₃h₀ = 0 on S_B.
//! * w₀ = A(1 + ½r(x))·P(y) + c(x)·Q(y), P = 1 − y²/b², Q = y(y+b)/b. The
//!   correction c fixes the flux law ∂₃w₀ + w₀∂₃h₀ = G₄ on Γ without
//!   touching w₀ on Γ or S_B.
//! * v₀ = discrete curl of (ψ₁, ψ₂, 0), ψᵢ = A·rᵢ(x)·((y+b)/b)² + cᵢ(x)·S(y),
//!   which makes ∇·v₀ vanish at every node and v₀ = 0 on S_B. The corrections
//!   cᵢ enforce the tangential stress laws on Γ. G₁, G₂ depend on v₀, but
//!   linearly and without changing v₀₃ on Γ, so cᵢ solve a linear system
//!   (GMRES).
//!
//! All profiles are quadratics or node-defined so that the grid stencils
//! satisfy the boundary conditions exactly.

use crate::error::{CnsError, Result};
use crate::grid::{ScalarField, SlabGrid, SurfaceField, VectorField};
use crate::nonlinear::{tangential_stress, RhsContext};
use crate::ops::{derivs, dz, dz_top, D};
use crate::picard::InitialData;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Highest horizontal wavenumber index of the random fields.
const BAND: i32 = 2;
const SHEAR_TOL: f64 = 1e-14;
const SHEAR_ACCEPT: f64 = 1e-11;
const SHEAR_RESTART: usize = 60;
const SHEAR_MAX: usize = 20;

/// Σ over |k₁|,|k₂| ≤ BAND, k ≠ 0 of random cos/sin modes, scaled to unit
/// max norm.
fn band_limited(g: &SlabGrid, rng: &mut ChaCha8Rng) -> SurfaceField {
    let mut modes = Vec::new();
    for a in -BAND..=BAND {
        for b in 0..=BAND {
            if b == 0 && a <= 0 {
                continue;
            }
            modes.push((a as f64, b as f64, rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        }
    }
    let (s1, s2) = (2.0 * std::f64::consts::PI / g.l1, 2.0 * std::f64::consts::PI / g.l2);
    let f = SurfaceField::from_fn(*g, |x, y| {
        modes.iter().map(|&(a, b, c, s)| {
            let ph = a * s1 * x + b * s2 * y;
            c * ph.cos() + s * ph.sin()
        }).sum()
    });
    let m = f.max_abs();
    if m > 0.0 {
        f.scale(1.0 / m)
    } else {
        f
    }
}

fn outer(g: &SlabGrid, r: &SurfaceField, prof: &[f64]) -> ScalarField {
    let p = g.plane();
    ScalarField::raw(*g, (0..g.len()).map(|n| r.values()[n % p] * prof[n / p]).collect())
}

/// Node values of S: S = 0 on S_B and Γ, one-sided ∂₃S = 0 on S_B.
fn shear_profile(g: &SlabGrid) -> Vec<f64> {
    let b = g.b;
    let mut s: Vec<f64> = (0..g.nz).map(|k| {
        let y = g.y(k);
        ((y + b) / b).powi(2) * y / b
    }).collect();
    s[0] = 0.0;
    s[1] = s[2] / 4.0;
    s[g.nz - 1] = 0.0;
    s
}

fn curl(psi: &[ScalarField; 2]) -> VectorField {
    let [d21] = derivs(&psi[1], [D::X1]);
    let [d12] = derivs(&psi[0], [D::X2]);
    VectorField { c: [dz(&psi[1]).scale(-1.0), dz(&psi[0]), d21.sub(&d12)] }
}

pub fn make_compatible_data(seed: u64, amplitude: f64, grid: &SlabGrid) -> Result<InitialData> {
    grid.validate()?;
    if !(amplitude >= 0.0 && amplitude.is_finite()) {
        return Err(CnsError::Domain(format!("amplitude must be nonnegative, got {amplitude}")));
    }
    if grid.nz < 5 {
        return Err(CnsError::Grid("compatible data need Nz >= 5".into()));
    }
    let g = *grid;
    if amplitude == 0.0 {
        return Ok(InitialData::zeros(g));
    }
    let a = amplitude;
    let b = g.b;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r_eta = band_limited(&g, &mut rng);
    let r_h = band_limited(&g, &mut rng);
    let r_w = band_limited(&g, &mut rng);
    let r_1 = band_limited(&g, &mut rng);
    let r_2 = band_limited(&g, &mut rng);

    let eta0 = r_eta.scale(a);
    let prof = |f: &dyn Fn(f64) -> f64| -> Vec<f64> { (0..g.nz).map(|k| f(g.y(k))).collect() };
    let rr = prof(&|y| -y * (y + 2.0 * b) / (b * b));
    let pp = prof(&|y| 1.0 - y * y / (b * b));
    let qq = prof(&|y| y * (y + b) / b);
    let p1 = prof(&|y| ((y + b) / b).powi(2));
    let ss = shear_profile(&g);

    let h0 = outer(&g, &r_h.scale(a), &rr);
    let w_base = outer(&g, &r_w.map(|x| a * (1.0 + 0.5 * x)), &pp);

    // Velocity: a linear solve for the shear corrections.
    let kappa = {
        let unit = ScalarField::raw(g, (0..g.len()).map(|n| ss[n / g.plane()]).collect());
        dz_top(&dz(&unit)).values()[0]
    };
    if kappa.abs() < 1e-12 {
        return Err(CnsError::Domain("degenerate shear profile".into()));
    }
    let base = [outer(&g, &r_1.scale(a), &p1), outer(&g, &r_2.scale(a), &p1)];
    let v_base = curl(&base);
    let geo = crate::transform::geometry_coeffs(&eta0, &v_base.c[2].top())?;
    let ctx = RhsContext::new(&geo);
    let p = g.plane();
    // Shear residual of ψ = base + (c₁, c₂)·S. The corrections leave v₃ on Γ
    // unchanged, so the geometry is fixed and the residual is affine in c.
    let residual = |c: &[f64]| -> (VectorField, Vec<f64>) {
        let c1 = SurfaceField::raw(g, c[..p].to_vec());
        let c2 = SurfaceField::raw(g, c[p..].to_vec());
        let v = curl(&[base[0].add(&outer(&g, &c1, &ss)), base[1].add(&outer(&g, &c2, &ss))]);
        let sh = tangential_stress(&v);
        let mut r = sh[0].sub(&ctx.g1(&v)).values().to_vec();
        r.extend_from_slice(sh[1].sub(&ctx.g2(&v)).values());
        (v, r)
    };
    let (_, r0) = residual(&vec![0.0; 2 * p]);
    let apply = |x: &[f64]| -> Vec<f64> {
        let c: Vec<f64> = x.iter().map(|v| v / kappa).collect();
        let (_, r) = residual(&c);
        r.iter().zip(&r0).map(|(a, b)| a - b).collect()
    };
    let rhs: Vec<f64> = r0.iter().map(|x| -x).collect();
    let x = gmres(apply, &rhs, SHEAR_TOL * (1.0 + a), SHEAR_RESTART, SHEAR_MAX)
        .ok_or_else(|| CnsError::Domain("shear correction diverged".into()))?;
    let c: Vec<f64> = x.iter().map(|v| v / kappa).collect();
    let (v0, r) = residual(&c);
    let err = r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if !(err <= SHEAR_ACCEPT * (1.0 + a)) {
        return Err(CnsError::Domain(format!("shear correction left residual {err:.3e}")));
    }

    // Flux law: w₀ on Γ is fixed, so G₄ and w₀∂₃h₀ are known before the correction.
    let target = ctx.g4(&w_base, &h0).sub(&w_base.top().mul(&dz_top(&h0)));
    let cw = target.sub(&dz_top(&w_base));
    let dq = dz_top(&outer(&g, &SurfaceField::constant(g, 1.0), &qq)).values()[0];
    let w0 = w_base.add(&outer(&g, &cw.scale(1.0 / dq), &qq));
    Ok(InitialData { w0, h0, v0, eta0 })
}

/// Restarted GMRES for `A x = b`, stopping when the max-norm of the true
/// residual is below `tol` or after `cycles` restarts. `None` if the
/// iterate stops being finite.
fn gmres(apply: impl Fn(&[f64]) -> Vec<f64>, b: &[f64], tol: f64, restart: usize, cycles: usize) -> Option<Vec<f64>> {
    let n = b.len();
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let mut x = vec![0.0; n];
    for _ in 0..cycles {
        let ax = apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        if r.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= tol {
            return Some(x);
        }
        let beta = dot(&r, &r).sqrt();
        let mut basis = vec![r.iter().map(|v| v / beta).collect::<Vec<f64>>()];
        let mut hess: Vec<Vec<f64>> = Vec::new();
        let (mut cs, mut sn): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
        let mut gvec = vec![beta];
        for j in 0..restart {
            let mut w = apply(&basis[j]);
            let mut col = vec![0.0; j + 2];
            for (i, q) in basis.iter().enumerate() {
                col[i] = dot(&w, q);
                w.iter_mut().zip(q).for_each(|(a, b)| *a -= col[i] * b);
            }
            let norm = dot(&w, &w).sqrt();
            col[j + 1] = norm;
            for i in 0..j {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let d = col[j].hypot(col[j + 1]);
            let (c, s) = if d == 0.0 { (1.0, 0.0) } else { (col[j] / d, col[j + 1] / d) };
            cs.push(c);
            sn.push(s);
            col[j] = d;
            col[j + 1] = 0.0;
            gvec.push(-s * gvec[j]);
            gvec[j] *= c;
            hess.push(col);
            let small = gvec[j + 1].abs() <= tol || norm == 0.0;
            if small || j + 1 == restart {
                break;
            }
            basis.push(w.iter().map(|v| v / norm).collect());
        }
        let m = hess.len();
        let mut yv = vec![0.0; m];
        for i in (0..m).rev() {
            let s: f64 = (i + 1..m).map(|k| hess[k][i] * yv[k]).sum();
            yv[i] = (gvec[i] - s) / hess[i][i];
        }
        for (k, q) in basis.iter().take(m).enumerate() {
            x.iter_mut().zip(q).for_each(|(a, b)| *a += yv[k] * b);
        }
        if !x.iter().all(|v| v.is_finite()) {
            return None;
        }
    }
    Some(x)
}
