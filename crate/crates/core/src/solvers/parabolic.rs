//! The coupled pair
//!
//! ```text
//! w_t − Δw − ∇·(a∇h) = f₄,   h_t − Δh − w = f₅       in Ω
//! ∂₃w + a∂₃h = g₄,           h = 0                   on Γ
//! w = 0,                     ∂₃h = 0                 on S_B
//! ```
//!
//! by backward Euler. The horizontal mean ā(y) of `a` is treated implicitly
//! per mode; the remainder a − ā is iterated on the right-hand side.

use super::{column, dz1_row, dz2_row, solve_complex};
use crate::banded::Banded;
use crate::error::{CnsError, Result};
use crate::grid::{ScalarField, SlabGrid, SurfaceField};
use crate::nonlinear::gradient;
use crate::ops::{derivs, dz_top, D};
use crate::spectral::{forward_levels, forward_levels_pair, inverse_levels_pair, C64};
use rayon::prelude::*;
use std::collections::HashMap;

/// Relative update size that ends the inner iteration.
pub const INNER_TOL: f64 = 1e-14;
/// Below this relative update an iteration that stops contracting has hit
/// roundoff and is accepted.
pub const INNER_FLOOR: f64 = 1e-11;
pub const INNER_MAX: usize = 200;

pub struct ParabolicSolver {
    grid: SlabGrid,
    mass: f64,
}

fn mode_matrix(g: &SlabGrid, mass: f64, k2: f64, abar: &[f64], abz: &[f64]) -> Banded {
    let (nz, h) = (g.nz, g.hz());
    let (w, hh) = (|n: usize| 2 * n, |n: usize| 2 * n + 1);
    let mut m = Banded::new(2 * nz, 6, 6);
    m.add(0, w(0), 1.0);
    for (j, c) in dz1_row(0, nz, h) {
        m.add(1, hh(j), c);
    }
    for n in 1..nz - 1 {
        m.add(2 * n, w(n), mass + k2);
        m.add(2 * n, hh(n), abar[n] * k2);
        for (j, c) in dz2_row(n, h) {
            m.add(2 * n, w(j), -c);
            m.add(2 * n, hh(j), -abar[n] * c);
            m.add(2 * n + 1, hh(j), -c);
        }
        for (j, c) in dz1_row(n, nz, h) {
            m.add(2 * n, hh(j), -abz[n] * c);
        }
        m.add(2 * n + 1, hh(n), mass + k2);
        m.add(2 * n + 1, w(n), -1.0);
    }
    let t = nz - 1;
    for (j, c) in dz1_row(t, nz, h) {
        m.add(2 * t, w(j), c);
        m.add(2 * t, hh(j), abar[t] * c);
    }
    m.add(2 * t + 1, hh(t), 1.0);
    m
}

impl ParabolicSolver {
    pub fn new(grid: SlabGrid) -> Result<Self> {
        grid.validate()?;
        if grid.nz < 4 {
            return Err(CnsError::Grid(format!("parabolic solve needs Nz >= 4, got {}", grid.nz)));
        }
        Ok(ParabolicSolver { grid, mass: 1.0 / grid.dt })
    }

    /// One backward-Euler step; all data at the new time level.
    pub fn step(
        &self,
        w_prev: &ScalarField,
        h_prev: &ScalarField,
        a: &ScalarField,
        f4: &ScalarField,
        f5: &ScalarField,
        g4: &SurfaceField,
    ) -> Result<(ScalarField, ScalarField)> {
        let g = self.grid;
        let (nz, p) = (g.nz, g.plane());
        let abar: Vec<f64> = (0..nz).map(|k| a.level(k).iter().sum::<f64>() / p as f64).collect();
        let abz: Vec<f64> = (0..nz).map(|n| dz1_row(n, nz, g.hz()).iter().map(|&(j, c)| abar[j] * c).sum()).collect();
        let mut ap = a.clone();
        for k in 0..nz {
            ap.level_mut(k).iter_mut().for_each(|x| *x -= abar[k]);
        }
        let varying = ap.max_abs() > 0.0;
        let mut keys: Vec<f64> = (0..p).map(|i| g.ksq(i / g.n2, i % g.n2)).collect();
        keys.sort_by(f64::total_cmp);
        keys.dedup();
        let facs: Vec<(u64, Banded)> = keys
            .par_iter()
            .map(|&k2| {
                let mut m = mode_matrix(&g, self.mass, k2, &abar, &abz);
                m.factor().map_err(|_| CnsError::SingularMode { kabs: k2.sqrt() })?;
                Ok((k2.to_bits(), m))
            })
            .collect::<Result<_>>()?;
        let facs: HashMap<u64, Banded> = facs.into_iter().collect();
        let (bw, bh) =
            forward_levels_pair(&g, w_prev.scale(self.mass).add(f4).values(), h_prev.scale(self.mass).add(f5).values());
        let bg = forward_levels(&g, g4.values());
        let ap_grad = gradient(&ap);
        let ap_top = ap.top();

        let solve = |corr: Option<(Vec<C64>, Vec<C64>)>| -> (ScalarField, ScalarField) {
            let cols: Vec<(Vec<C64>, Vec<C64>)> = (0..p)
                .into_par_iter()
                .map(|i| {
                    let m = &facs[&g.ksq(i / g.n2, i % g.n2).to_bits()];
                    let (cw, ch) = (column(&bw, p, i), column(&bh, p, i));
                    let mut rhs = vec![C64::new(0.0, 0.0); 2 * nz];
                    for n in 1..nz - 1 {
                        rhs[2 * n] = cw[n];
                        rhs[2 * n + 1] = ch[n];
                    }
                    rhs[2 * (nz - 1)] = bg[i];
                    if let Some((c, ct)) = &corr {
                        for n in 1..nz - 1 {
                            rhs[2 * n] += c[n * p + i];
                        }
                        rhs[2 * (nz - 1)] -= ct[i];
                    }
                    let x = solve_complex(m, &rhs);
                    ((0..nz).map(|n| x[2 * n]).collect(), (0..nz).map(|n| x[2 * n + 1]).collect())
                })
                .collect();
            let mut sw = vec![C64::new(0.0, 0.0); g.len()];
            let mut sh = vec![C64::new(0.0, 0.0); g.len()];
            for (i, (cw, ch)) in cols.iter().enumerate() {
                for n in 0..nz {
                    sw[n * p + i] = cw[n];
                    sh[n * p + i] = ch[n];
                }
            }
            let (w, h) = inverse_levels_pair(&g, &sw, &sh);
            let (mut w, mut h) = (ScalarField::raw(g, w), ScalarField::raw(g, h));
            w.level_mut(0).iter_mut().for_each(|x| *x = 0.0);
            h.level_mut(nz - 1).iter_mut().for_each(|x| *x = 0.0);
            (w, h)
        };

        if !varying {
            return Ok(solve(None));
        }
        let (mut w, mut h) = (w_prev.clone(), h_prev.clone());
        let mut last = f64::INFINITY;
        let mut rate = 0.0;
        for sweep in 1..=INNER_MAX {
            let [h1, h2, h3, h11, h22, h33] = derivs(&h, [D::X1, D::X2, D::Z, D::X11, D::X22, D::ZZ]);
            let c = ap_grad.c[0]
                .mul(&h1)
                .add(&ap_grad.c[1].mul(&h2))
                .add(&ap_grad.c[2].mul(&h3))
                .add(&ap.mul(&h11.add(&h22).add(&h33)));
            let ct = ap_top.mul(&dz_top(&h));
            let (wn, hn) = solve(Some((forward_levels(&g, c.values()), forward_levels(&g, ct.values()))));
            let diff = wn.sub(&w).max_abs().max(hn.sub(&h).max_abs());
            let scale = wn.max_abs().max(hn.max_abs()).max(f64::MIN_POSITIVE);
            w = wn;
            h = hn;
            if diff <= INNER_TOL * scale || (diff <= INNER_FLOOR * scale && diff > 0.5 * last) {
                return Ok((w, h));
            }
            if sweep > 1 {
                rate = diff / last;
            }
            if !diff.is_finite() || (sweep > 3 && rate > 1.0 && diff > 1e3 * scale) {
                return Err(CnsError::InnerIteration { sweeps: sweep, contraction: rate });
            }
            last = diff;
        }
        Err(CnsError::InnerIteration { sweeps: INNER_MAX, contraction: rate })
    }
}

/// Data indexed by time level `0..=Nt`; level 0 of `a`, `f4`, `f5`, `g4` is
/// used only for the compatibility report.
#[derive(Clone, Debug)]
pub struct ParabolicProblem {
    pub grid: SlabGrid,
    pub a: Vec<ScalarField>,
    pub f4: Vec<ScalarField>,
    pub f5: Vec<ScalarField>,
    pub g4: Vec<SurfaceField>,
    pub w0: ScalarField,
    pub h0: ScalarField,
}

impl ParabolicProblem {
    pub fn unforced(grid: SlabGrid, w0: ScalarField, h0: ScalarField) -> Self {
        let n = grid.nt + 1;
        ParabolicProblem {
            grid,
            a: vec![ScalarField::zeros(grid); n],
            f4: vec![ScalarField::zeros(grid); n],
            f5: vec![ScalarField::zeros(grid); n],
            g4: vec![SurfaceField::zeros(grid); n],
            w0,
            h0,
        }
    }

    /// (max |∂₃w₀ + a(0)∂₃h₀ − g₄(0)| on Γ, max |h₀| on Γ).
    pub fn compatibility_residual(&self) -> (f64, f64) {
        let flux = dz_top(&self.w0).add(&self.a[0].top().mul(&dz_top(&self.h0)));
        (flux.sub(&self.g4[0]).max_abs(), self.h0.top().max_abs())
    }
}

pub fn solve_parabolic_pair(p: &ParabolicProblem) -> Result<(Vec<ScalarField>, Vec<ScalarField>)> {
    let s = ParabolicSolver::new(p.grid)?;
    let mut w = vec![p.w0.clone()];
    let mut h = vec![p.h0.clone()];
    for n in 1..=p.grid.nt {
        let (wn, hn) = s.step(&w[n - 1], &h[n - 1], &p.a[n], &p.f4[n], &p.f5[n], &p.g4[n])?;
        w.push(wn);
        h.push(hn);
    }
    Ok((w, h))
}
