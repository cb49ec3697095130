//! Free-surface Stokes: backward Euler in time, per-mode direct solve in y.
//!
//! For a wavenumber K ≠ 0 the horizontal velocity splits into a
//! longitudinal part L = K̂·v̂ and a transverse part T = K̂⊥·v̂. Writing
//! L = iL̃ makes the (L̃, v̂₃, q̂) system real and dependent on |K| only:
//!
//! ```text
//! (m+|K|²)L̃ − ∂₃₃L̃ + |K|q̂   = −i·K̂·r̂
//! (m+|K|²)v̂₃ − ∂₃₃v̂₃ + ∂₃q̂  = r̂₃
//! −|K|L̃ + ∂₃v̂₃             = 0          (every node)
//! L̃ = v̂₃ = 0                              on S_B
//! ∂₃L̃ + |K|v̂₃ = −i·K̂·ĝ,  q̂ − 2∂₃v̂₃ − s·v̂₃ = G   on Γ
//! ```
//!
//! with `s = dt(γ+σ|K|²)` and `G = (γ+σ|K|²)η̂ − ĝ₃` for the evolution,
//! `s = 0`, `G = ĝ₃` for the stationary problem.

use super::{column, dz1_row, dz2_row, solve_complex, solve_refined};
use crate::banded::Banded;
use crate::error::{CnsError, Result};
use crate::grid::{ScalarField, SlabGrid, SurfaceField, VectorField};
use crate::nonlinear::gradient;
use crate::spectral::{forward_levels, inverse_levels, inverse_levels_pair, C64};
use crate::transform::FlatState;
use rayon::prelude::*;
use std::collections::HashMap;

struct ModeFactors {
    coupled: Option<(Banded, Banded)>,
    tangential: Banded,
}

/// Factorised per-|K| systems for a fixed (dt, γ, σ).
pub struct StokesSolver {
    grid: SlabGrid,
    gamma: f64,
    sigma: f64,
    dt: f64,
    stationary: bool,
    modes: HashMap<u64, ModeFactors>,
}

fn kabs(g: &SlabGrid, i: usize) -> f64 {
    g.ksq(i / g.n2, i % g.n2).sqrt()
}

fn coupled_matrix(g: &SlabGrid, mass: f64, k: f64, s: f64) -> Banded {
    let (nz, h) = (g.nz, g.hz());
    let mut m = Banded::new(3 * nz, 8, 8);
    let (l, v, q) = (|n: usize| 3 * n, |n: usize| 3 * n + 1, |n: usize| 3 * n + 2);
    m.add(0, l(0), 1.0);
    m.add(1, v(0), 1.0);
    for n in 0..nz {
        let div = 3 * n + 2;
        m.add(div, l(n), -k);
        for (j, c) in dz1_row(n, nz, h) {
            m.add(div, v(j), c);
        }
        if n == 0 || n + 1 == nz {
            continue;
        }
        m.add(3 * n, l(n), mass + k * k);
        m.add(3 * n, q(n), k);
        m.add(3 * n + 1, v(n), mass + k * k);
        for (j, c) in dz2_row(n, h) {
            m.add(3 * n, l(j), -c);
            m.add(3 * n + 1, v(j), -c);
        }
        for (j, c) in dz1_row(n, nz, h) {
            m.add(3 * n + 1, q(j), c);
        }
    }
    let t = nz - 1;
    for (j, c) in dz1_row(t, nz, h) {
        m.add(3 * t, l(j), c);
        m.add(3 * t + 1, v(j), -2.0 * c);
    }
    m.add(3 * t, v(t), k);
    m.add(3 * t + 1, q(t), 1.0);
    m.add(3 * t + 1, v(t), -s);
    m
}

/// (m+|K|²)T − ∂₃₃T = R, T = 0 on S_B, ∂₃T = g on Γ.
pub(crate) fn tangential_matrix(g: &SlabGrid, mass: f64, k: f64) -> Banded {
    let (nz, h) = (g.nz, g.hz());
    let mut m = Banded::new(nz, 2, 2);
    m.add(0, 0, 1.0);
    for n in 1..nz - 1 {
        m.add(n, n, mass + k * k);
        for (j, c) in dz2_row(n, h) {
            m.add(n, j, -c);
        }
    }
    for (j, c) in dz1_row(nz - 1, nz, h) {
        m.add(nz - 1, j, c);
    }
    m
}

/// Output of one solve in physical space.
#[derive(Clone, Debug)]
pub struct StokesOutput {
    pub v: VectorField,
    pub q: ScalarField,
    pub eta: SurfaceField,
}

impl StokesSolver {
    /// Evolution solver for time step `grid.dt`.
    pub fn new(grid: SlabGrid, gamma: f64, sigma: f64) -> Result<Self> {
        if !(gamma > 0.0 && sigma > 0.0) {
            return Err(CnsError::Domain(format!("gamma and sigma must be positive, got {gamma}, {sigma}")));
        }
        Self::build(grid, gamma, sigma, false)
    }

    /// Solver for −Δω + ∇q = F̃ with the same boundary operators and `s = 0`.
    pub fn stationary(grid: SlabGrid) -> Result<Self> {
        Self::build(grid, 0.0, 0.0, true)
    }

    fn build(grid: SlabGrid, gamma: f64, sigma: f64, stationary: bool) -> Result<Self> {
        grid.validate()?;
        if grid.nz < 4 {
            return Err(CnsError::Grid(format!("Stokes solve needs Nz >= 4, got {}", grid.nz)));
        }
        let dt = grid.dt;
        let mass = if stationary { 0.0 } else { 1.0 / dt };
        let mut ks: Vec<f64> = (0..grid.plane()).map(|i| kabs(&grid, i)).collect();
        ks.sort_by(f64::total_cmp);
        ks.dedup();
        let built: Vec<(u64, Result<ModeFactors>)> = ks
            .par_iter()
            .map(|&k| {
                let s = if stationary { 0.0 } else { dt * (gamma + sigma * k * k) };
                let r = (|| {
                    let coupled = if k > 0.0 {
                        let m = coupled_matrix(&grid, mass, k, s);
                        let mut lu = m.clone();
                        lu.factor().map_err(|_| CnsError::SingularMode { kabs: k })?;
                        Some((m, lu))
                    } else {
                        None
                    };
                    let mut t = tangential_matrix(&grid, mass, k);
                    t.factor().map_err(|_| CnsError::SingularMode { kabs: k })?;
                    Ok(ModeFactors { coupled, tangential: t })
                })();
                (k.to_bits(), r)
            })
            .collect();
        let mut modes = HashMap::new();
        for (key, r) in built {
            modes.insert(key, r?);
        }
        Ok(StokesSolver { grid, gamma, sigma, dt, stationary, modes })
    }

    pub fn grid(&self) -> &SlabGrid {
        &self.grid
    }

    fn solve_modes(&self, r: &VectorField, g: [&SurfaceField; 3], eta_prev: Option<&SurfaceField>) -> Result<StokesOutput> {
        let grid = self.grid;
        if !grid.same_space(r.grid()) {
            return Err(CnsError::GridMismatch("Stokes forcing"));
        }
        let (nz, p, h) = (grid.nz, grid.plane(), grid.hz());
        let rh = r.c.each_ref().map(|c| forward_levels(&grid, c.values()));
        let gh = g.map(|s| forward_levels(&grid, s.values()));
        let eh = eta_prev.map(|e| forward_levels(&grid, e.values()));
        let cols: Vec<[Vec<C64>; 4]> = (0..p)
            .into_par_iter()
            .map(|i| {
                let k = kabs(&grid, i);
                let f = &self.modes[&k.to_bits()];
                let (r1, r2, r3) = (column(&rh[0], p, i), column(&rh[1], p, i), column(&rh[2], p, i));
                let big_g = match &eh {
                    Some(e) => e[i] * (self.gamma + self.sigma * k * k) - gh[2][i],
                    None => gh[2][i],
                };
                match &f.coupled {
                    None => {
                        let mut out = [Vec::new(), Vec::new(), vec![C64::new(0.0, 0.0); nz], vec![C64::new(0.0, 0.0); nz]];
                        for (c, rc) in [&r1, &r2].into_iter().enumerate() {
                            let mut b = rc.clone();
                            b[0] = C64::new(0.0, 0.0);
                            b[nz - 1] = gh[c][i];
                            out[c] = solve_complex(&f.tangential, &b);
                        }
                        let q = &mut out[3];
                        q[nz - 1] = big_g;
                        for n in (0..nz - 1).rev() {
                            q[n] = q[n + 1] - (r3[n] + r3[n + 1]) * (0.5 * h);
                        }
                        out
                    }
                    Some(m) => {
                        let (a, b) = (grid.k1(i / grid.n2) / k, grid.k2(i % grid.n2) / k);
                        let mi = C64::new(0.0, -1.0);
                        let mut rhs = vec![C64::new(0.0, 0.0); 3 * nz];
                        let mut rt = vec![C64::new(0.0, 0.0); nz];
                        for n in 1..nz - 1 {
                            rhs[3 * n] = mi * (r1[n] * a + r2[n] * b);
                            rhs[3 * n + 1] = r3[n];
                            rt[n] = r2[n] * a - r1[n] * b;
                        }
                        let t = nz - 1;
                        rhs[3 * t] = mi * (gh[0][i] * a + gh[1][i] * b);
                        rhs[3 * t + 1] = big_g;
                        rt[t] = gh[1][i] * a - gh[0][i] * b;
                        let x = solve_refined(m, &rhs);
                        let tt = solve_complex(&f.tangential, &rt);
                        let iu = C64::new(0.0, 1.0);
                        let mut v1 = vec![C64::new(0.0, 0.0); nz];
                        let mut v2 = vec![C64::new(0.0, 0.0); nz];
                        for n in 0..nz {
                            let lo = iu * x[3 * n];
                            v1[n] = lo * a - tt[n] * b;
                            v2[n] = lo * b + tt[n] * a;
                        }
                        let v3 = (0..nz).map(|n| x[3 * n + 1]).collect();
                        let q = (0..nz).map(|n| x[3 * n + 2]).collect();
                        [v1, v2, v3, q]
                    }
                }
            })
            .collect();
        let mut spec: [Vec<C64>; 4] = std::array::from_fn(|_| vec![C64::new(0.0, 0.0); grid.len()]);
        for (i, c) in cols.iter().enumerate() {
            for (s, col) in spec.iter_mut().zip(c) {
                for n in 0..nz {
                    s[n * p + i] = col[n];
                }
            }
        }
        let eta = match &eh {
            Some(e) => {
                let top: Vec<C64> = (0..p).map(|i| e[i] + spec[2][(nz - 1) * p + i] * self.dt).collect();
                SurfaceField::raw(grid, inverse_levels(&grid, &top))
            }
            None => SurfaceField::zeros(grid),
        };
        let (v1, v2) = inverse_levels_pair(&grid, &spec[0], &spec[1]);
        let (v3, q) = inverse_levels_pair(&grid, &spec[2], &spec[3]);
        let mut v = VectorField { c: [ScalarField::raw(grid, v1), ScalarField::raw(grid, v2), ScalarField::raw(grid, v3)] };
        // Dirichlet rows hold exactly; clear roundoff from the transforms.
        for c in v.c.iter_mut() {
            c.level_mut(0).iter_mut().for_each(|x| *x = 0.0);
        }
        Ok(StokesOutput { v, q: ScalarField::raw(grid, q), eta })
    }

    /// One backward-Euler step. `forcing` is f − w∇φ at the new time level.
    pub fn step(&self, v_prev: &VectorField, eta_prev: &SurfaceField, forcing: &VectorField, g: [&SurfaceField; 3]) -> Result<StokesOutput> {
        if self.stationary {
            return Err(CnsError::Domain("stationary solver used for a time step".into()));
        }
        let m = 1.0 / self.dt;
        let r = VectorField { c: std::array::from_fn(|c| forcing.c[c].add(&v_prev.c[c].scale(m))) };
        self.solve_modes(&r, g, Some(eta_prev))
    }

    /// −Δω + ∇q = F̃, ∇·ω = 0, ω = 0 on S_B, tangential stresses g̃₁, g̃₂ and
    /// q − 2∂₃ω₃ = g̃₃ on Γ.
    pub fn solve_stationary(&self, f: &VectorField, g: [&SurfaceField; 3]) -> Result<(VectorField, ScalarField)> {
        if !self.stationary {
            return Err(CnsError::Domain("evolution solver used for the stationary problem".into()));
        }
        let o = self.solve_modes(f, g, None)?;
        Ok((o.v, o.q))
    }
}

/// Data of the evolution problem, indexed by time level `0..=Nt`.
#[derive(Clone, Debug)]
pub struct StokesProblem {
    pub grid: SlabGrid,
    pub gamma: f64,
    pub sigma: f64,
    pub w: Vec<ScalarField>,
    pub phi: Vec<ScalarField>,
    pub f: Vec<VectorField>,
    pub g: [Vec<SurfaceField>; 3],
    pub v0: VectorField,
    pub eta0: SurfaceField,
}

impl StokesProblem {
    /// Zero forcing and boundary data on the time grid of `grid`.
    pub fn unforced(grid: SlabGrid, gamma: f64, sigma: f64, v0: VectorField, eta0: SurfaceField) -> Self {
        let n = grid.nt + 1;
        StokesProblem {
            grid,
            gamma,
            sigma,
            w: vec![ScalarField::zeros(grid); n],
            phi: vec![ScalarField::zeros(grid); n],
            f: vec![VectorField::zeros(grid); n],
            g: std::array::from_fn(|_| vec![SurfaceField::zeros(grid); n]),
            v0,
            eta0,
        }
    }

    fn forcing(&self, n: usize) -> VectorField {
        let gp = gradient(&self.phi[n]);
        VectorField { c: std::array::from_fn(|c| self.f[n].c[c].sub(&self.w[n].mul(&gp.c[c]))) }
    }

    /// Max |∂₃v₀ₖ + ∂ₖv₀₃ − gₖ(0)| on Γ for k = 1, 2.
    pub fn compatibility_residual(&self) -> f64 {
        let n = crate::nonlinear::tangential_stress(&self.v0);
        (0..2).map(|k| n[k].sub(&self.g[k][0]).max_abs()).fold(0.0, f64::max)
    }
}

/// Advances `prev` (at level `n − 1`) to level `n`.
pub fn solve_stokes_step(prev: &FlatState, p: &StokesProblem, n: usize) -> Result<FlatState> {
    let solver = StokesSolver::new(p.grid, p.gamma, p.sigma)?;
    step_with(&solver, prev, p, n)
}

fn step_with(solver: &StokesSolver, prev: &FlatState, p: &StokesProblem, n: usize) -> Result<FlatState> {
    let o = solver.step(&prev.v, &prev.eta, &p.forcing(n), [&p.g[0][n], &p.g[1][n], &p.g[2][n]])?;
    Ok(FlatState { v: o.v, q: o.q, eta: o.eta, t: n as f64 * p.grid.dt, w: p.w[n].clone(), h: prev.h.clone() })
}

/// The full trajectory, level 0 being the initial data.
pub fn solve_stokes_evolution(p: &StokesProblem) -> Result<Vec<FlatState>> {
    let solver = StokesSolver::new(p.grid, p.gamma, p.sigma)?;
    let mut s = FlatState::zeros(p.grid);
    s.v = p.v0.clone();
    s.eta = p.eta0.clone();
    let mut out = vec![s];
    for n in 1..=p.grid.nt {
        let next = step_with(&solver, out.last().expect("non-empty"), p, n)?;
        out.push(next);
    }
    Ok(out)
}

pub fn solve_stationary_stokes(f: &VectorField, g: [&SurfaceField; 3]) -> Result<(VectorField, ScalarField)> {
    StokesSolver::stationary(*f.grid())?.solve_stationary(f, g)
}
