//! Composite space-time norms of trajectories, the Stokes energy and the
//! shape of the global estimate.
//!
//! Time derivatives are first-order backward differences. Sup norms run over
//! all stored levels; `L²_t` integrals use the trapezoid rule for fields and
//! the exact integral of the piecewise-constant difference quotient for time
//! derivatives. Horizontal quadrature is spectral, vertical is trapezoid.

use crate::error::{CnsError, Result};
use crate::grid::{ScalarField, SlabGrid, SurfaceField, VectorField};
use crate::harmonic::profile_table;
use crate::ops::{dz_vec, sobolev_orders_spec, surface_l2_sq, surface_multiplier_sq};
use crate::solvers::korn_form;
use crate::spectral::{forward_levels, C64};
use crate::transform::FlatState;
use serde::Serialize;

/// The four pieces of |||f|||.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct TripleParts {
    pub sup_h2: f64,
    pub sup_dt_l2: f64,
    pub l2_h3: f64,
    pub l2_dt_h1: f64,
}

impl TripleParts {
    pub fn total(&self) -> f64 {
        self.sup_h2 + self.sup_dt_l2 + self.l2_h3 + self.l2_dt_h1
    }
}

/// Running sums behind one `TripleParts`; squared quantities throughout.
#[derive(Clone, Copy, Debug, Default)]
struct TripleAcc {
    sup_h2: f64,
    sup_dt_l2: f64,
    int_h3: f64,
    int_dt_h1: f64,
}

impl TripleAcc {
    fn level(&mut self, orders: [f64; 4], weight: f64) {
        self.sup_h2 = self.sup_h2.max(orders[2]);
        self.int_h3 += weight * orders[3];
    }

    fn rate(&mut self, orders: [f64; 4], dt: f64) {
        self.sup_dt_l2 = self.sup_dt_l2.max(orders[0]);
        self.int_dt_h1 += dt * orders[1];
    }

    fn parts(&self) -> TripleParts {
        TripleParts {
            sup_h2: self.sup_h2.sqrt(),
            sup_dt_l2: self.sup_dt_l2.sqrt(),
            l2_h3: self.int_h3.max(0.0).sqrt(),
            l2_dt_h1: self.int_dt_h1.sqrt(),
        }
    }
}

fn add_orders(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    std::array::from_fn(|i| a[i] + b[i])
}

fn rate_spec(now: &[C64], prev: &[C64], dt: f64) -> Vec<C64> {
    now.iter().zip(prev).map(|(a, b)| (a - b) / dt).collect()
}

fn level_weight(n: usize, nt: usize, dt: f64) -> f64 {
    if n == 0 || n == nt {
        0.5 * dt
    } else {
        dt
    }
}

/// |||f||| and its pieces for a scalar trajectory on the time grid of its grid.
pub fn triple_parts(traj: &[ScalarField]) -> Result<TripleParts> {
    if traj.len() < 2 {
        return Err(CnsError::Domain("triple norm needs at least two time levels".into()));
    }
    let g = *traj[0].grid();
    let (nt, dt) = (traj.len() - 1, g.dt);
    let mut acc = TripleAcc::default();
    let mut prev: Option<Vec<C64>> = None;
    for (n, f) in traj.iter().enumerate() {
        let s = forward_levels(&g, f.values());
        acc.level(sobolev_orders_spec(&g, &s), level_weight(n, nt, dt));
        if let Some(p) = &prev {
            acc.rate(sobolev_orders_spec(&g, &rate_spec(&s, p, dt)), dt);
        }
        prev = Some(s);
    }
    Ok(acc.parts())
}

pub fn triple_norm(traj: &[ScalarField]) -> Result<f64> {
    Ok(triple_parts(traj)?.total())
}

/// All pieces of ‖{w, h, v, q, η}‖. The two dual-space entries are multiplier
/// surrogates and are kept apart from the rest.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct QuintupleNorm {
    pub w: TripleParts,
    pub h: TripleParts,
    pub v: TripleParts,
    /// ‖∇v_t‖ in L²_t H^{-1/2}(Γ), multiplier (1+|k|²)^{-1/2} on the traces.
    pub grad_v_t_trace_surrogate: f64,
    pub grad_q_sup_l2: f64,
    pub grad_q_l2_h1: f64,
    /// ‖∇q_t‖ in L²_t (₀H¹)′, level-wise multiplier (1+|k|²)^{-1}.
    pub grad_q_t_dual_surrogate: f64,
    pub eta_sup_h3: f64,
    pub grad_eta_l2_h52: f64,
    pub ext_hessian_l2_h2: f64,
}

impl QuintupleNorm {
    pub fn total(&self) -> f64 {
        self.total_without_surrogates() + self.surrogates()
    }

    pub fn surrogates(&self) -> f64 {
        self.grad_v_t_trace_surrogate + self.grad_q_t_dual_surrogate
    }

    pub fn total_without_surrogates(&self) -> f64 {
        self.w.total()
            + self.h.total()
            + self.v.total()
            + self.grad_q_sup_l2
            + self.grad_q_l2_h1
            + self.eta_sup_h3
            + self.grad_eta_l2_h52
            + self.ext_hessian_l2_h2
    }

    /// (name, value) for every scalar entry, in a fixed order.
    pub fn rows(&self) -> Vec<(&'static str, f64)> {
        let mut out = Vec::new();
        for (p, t) in [("w", &self.w), ("h", &self.h), ("v", &self.v)] {
            let names: [&'static str; 4] = match p {
                "w" => ["w_sup_h2", "w_sup_dt_l2", "w_l2_h3", "w_l2_dt_h1"],
                "h" => ["h_sup_h2", "h_sup_dt_l2", "h_l2_h3", "h_l2_dt_h1"],
                _ => ["v_sup_h2", "v_sup_dt_l2", "v_l2_h3", "v_l2_dt_h1"],
            };
            out.extend(names.into_iter().zip([t.sup_h2, t.sup_dt_l2, t.l2_h3, t.l2_dt_h1]));
        }
        out.extend([
            ("grad_v_t_trace_surrogate", self.grad_v_t_trace_surrogate),
            ("grad_q_sup_l2", self.grad_q_sup_l2),
            ("grad_q_l2_h1", self.grad_q_l2_h1),
            ("grad_q_t_dual_surrogate", self.grad_q_t_dual_surrogate),
            ("eta_sup_h3", self.eta_sup_h3),
            ("grad_eta_l2_h52", self.grad_eta_l2_h52),
            ("ext_hessian_l2_h2", self.ext_hessian_l2_h2),
        ]);
        out
    }
}

struct LevelSpectra {
    w: Vec<C64>,
    h: Vec<C64>,
    v: [Vec<C64>; 3],
    grad_q: [Vec<C64>; 3],
}

/// Streaming evaluation of the quintuple norm, one time level at a time.
pub struct QuintupleAccumulator {
    grid: SlabGrid,
    n: usize,
    w: TripleAcc,
    h: TripleAcc,
    v: TripleAcc,
    grad_v_t_trace: f64,
    grad_q_sup: f64,
    grad_q_int_h1: f64,
    grad_q_t_dual: f64,
    eta_sup: f64,
    grad_eta_int: f64,
    ext_hess_int: f64,
    /// Integrands of the latest level, for the closing trapezoid correction.
    last: [f64; 6],
    prev: Option<LevelSpectra>,
}

impl QuintupleAccumulator {
    pub fn new(grid: SlabGrid) -> Self {
        QuintupleAccumulator {
            grid,
            n: 0,
            w: TripleAcc::default(),
            h: TripleAcc::default(),
            v: TripleAcc::default(),
            grad_v_t_trace: 0.0,
            grad_q_sup: 0.0,
            grad_q_int_h1: 0.0,
            grad_q_t_dual: 0.0,
            eta_sup: 0.0,
            grad_eta_int: 0.0,
            ext_hess_int: 0.0,
            last: [0.0; 6],
            prev: None,
        }
    }

    /// Adds time level `n` (levels must arrive in order, starting at 0).
    pub fn push(&mut self, w: &ScalarField, h: &ScalarField, v: &VectorField, q: &ScalarField, eta: &SurfaceField) {
        let g = self.grid;
        let dt = g.dt;
        let wt = if self.n == 0 { 0.5 * dt } else { dt };
        let qs = forward_levels(&g, q.values());
        let p = g.plane();
        let grad_q = [
            (0..g.len()).map(|m| qs[m] * C64::new(0.0, g.k1((m % p) / g.n2))).collect(),
            (0..g.len()).map(|m| qs[m] * C64::new(0.0, g.k2(m % g.n2))).collect(),
            dz_vec(&g, &qs),
        ];
        let cur = LevelSpectra {
            w: forward_levels(&g, w.values()),
            h: forward_levels(&g, h.values()),
            v: v.c.each_ref().map(|c| forward_levels(&g, c.values())),
            grad_q,
        };
        let wo = sobolev_orders_spec(&g, &cur.w);
        let ho = sobolev_orders_spec(&g, &cur.h);
        let vo = cur.v.iter().map(|s| sobolev_orders_spec(&g, s)).fold([0.0; 4], add_orders);
        self.w.level(wo, wt);
        self.h.level(ho, wt);
        self.v.level(vo, wt);
        let qo = cur.grad_q.iter().map(|s| sobolev_orders_spec(&g, s)).fold([0.0; 4], add_orders);
        self.grad_q_sup = self.grad_q_sup.max(qo[0]);
        self.grad_q_int_h1 += wt * qo[1];

        let es = forward_levels(&g, eta.values());
        self.eta_sup = self.eta_sup.max(surface_multiplier_sq(&g, &es, |k2| (1.0 + k2).powi(3)));
        let ge = surface_multiplier_sq(&g, &es, |k2| k2 * (1.0 + k2).powf(2.5));
        let eh = extension_hessian_h2_sq(&g, &es);
        self.grad_eta_int += wt * ge;
        self.ext_hess_int += wt * eh;
        self.last = [wo[3], ho[3], vo[3], qo[1], ge, eh];

        if let Some(prev) = &self.prev {
            let wr = rate_spec(&cur.w, &prev.w, dt);
            let hr = rate_spec(&cur.h, &prev.h, dt);
            self.w.rate(sobolev_orders_spec(&g, &wr), dt);
            self.h.rate(sobolev_orders_spec(&g, &hr), dt);
            let vr: [Vec<C64>; 3] = std::array::from_fn(|c| rate_spec(&cur.v[c], &prev.v[c], dt));
            self.v.rate(vr.iter().map(|s| sobolev_orders_spec(&g, s)).fold([0.0; 4], add_orders), dt);
            self.grad_v_t_trace += dt * trace_gradient_dual_sq(&g, &vr);
            let qr: f64 = (0..3)
                .map(|c| level_dual_sq(&g, &rate_spec(&cur.grad_q[c], &prev.grad_q[c], dt)))
                .sum();
            self.grad_q_t_dual += dt * qr;
        }
        self.prev = Some(cur);
        self.n += 1;
    }

    pub fn push_state(&mut self, s: &FlatState) {
        self.push(&s.w, &s.h, &s.v, &s.q, &s.eta);
    }

    pub fn finish(mut self) -> Result<QuintupleNorm> {
        if self.n < 2 {
            return Err(CnsError::Domain("quintuple norm needs at least two time levels".into()));
        }
        let half = 0.5 * self.grid.dt;
        let l = self.last;
        self.w.int_h3 -= half * l[0];
        self.h.int_h3 -= half * l[1];
        self.v.int_h3 -= half * l[2];
        self.grad_q_int_h1 -= half * l[3];
        self.grad_eta_int -= half * l[4];
        self.ext_hess_int -= half * l[5];
        Ok(QuintupleNorm {
            w: self.w.parts(),
            h: self.h.parts(),
            v: self.v.parts(),
            grad_v_t_trace_surrogate: self.grad_v_t_trace.sqrt(),
            grad_q_sup_l2: self.grad_q_sup.sqrt(),
            grad_q_l2_h1: self.grad_q_int_h1.max(0.0).sqrt(),
            grad_q_t_dual_surrogate: self.grad_q_t_dual.sqrt(),
            eta_sup_h3: self.eta_sup.sqrt(),
            grad_eta_l2_h52: self.grad_eta_int.max(0.0).sqrt(),
            ext_hessian_l2_h2: self.ext_hess_int.max(0.0).sqrt(),
        })
    }
}

pub fn quintuple_norm(states: &[FlatState]) -> Result<QuintupleNorm> {
    let g = *states.first().ok_or_else(|| CnsError::Domain("empty trajectory".into()))?.w.grid();
    let mut acc = QuintupleAccumulator::new(g);
    for s in states {
        acc.push_state(s);
    }
    acc.finish()
}

/// Σ over levels (trapezoid) and modes of (1+|k|²)^{-1}|f̂|².
fn level_dual_sq(g: &SlabGrid, s: &[C64]) -> f64 {
    let p = g.plane();
    let mut tot = 0.0;
    for (k, wk) in g.trapezoid().iter().enumerate() {
        tot += wk * surface_multiplier_sq(g, &s[k * p..(k + 1) * p], |k2| 1.0 / (1.0 + k2));
    }
    tot
}

/// Σ_{i,c} ‖∂ᵢvₜ,c‖²_{H^{-1/2}(Γ)} from the spectra of vₜ.
fn trace_gradient_dual_sq(g: &SlabGrid, vr: &[Vec<C64>; 3]) -> f64 {
    let (p, nz) = (g.plane(), g.nz);
    let r = 0.5 / g.hz();
    let wgt = |k2: f64| 1.0 / (1.0 + k2).sqrt();
    let mut tot = 0.0;
    for s in vr {
        let top = &s[(nz - 1) * p..];
        let d1: Vec<C64> = (0..p).map(|i| top[i] * C64::new(0.0, g.k1(i / g.n2))).collect();
        let d2: Vec<C64> = (0..p).map(|i| top[i] * C64::new(0.0, g.k2(i % g.n2))).collect();
        let d3: Vec<C64> =
            (0..p).map(|i| (s[(nz - 1) * p + i] * 3.0 - s[(nz - 2) * p + i] * 4.0 + s[(nz - 3) * p + i]) * r).collect();
        tot += surface_multiplier_sq(g, &d1, wgt) + surface_multiplier_sq(g, &d2, wgt) + surface_multiplier_sq(g, &d3, wgt);
    }
    tot
}

/// ‖∇²H(η)‖²_{H²} from the surface spectrum of η, with the extension
/// evaluated per mode.
fn extension_hessian_h2_sq(g: &SlabGrid, es: &[C64]) -> f64 {
    let t = profile_table(g);
    let p = g.plane();
    let entry = |i: usize, j: usize| -> Vec<C64> {
        (0..g.len())
            .map(|m| {
                let b = m % p;
                let kv = [g.k1(b / g.n2), g.k2(b % g.n2), t.kabs[b]];
                let e = es[b];
                match (i, j) {
                    (2, 2) => e * (kv[2] * kv[2] * t.c[m]),
                    (a, 2) | (2, a) => e * C64::new(0.0, kv[a] * kv[2] * t.s[m]),
                    (a, c) => e * (-kv[a] * kv[c] * t.c[m]),
                }
            })
            .collect()
    };
    let mut tot = 0.0;
    for i in 0..3 {
        for j in i..3 {
            let mult = if i == j { 1.0 } else { 2.0 };
            tot += mult * sobolev_orders_spec(g, &entry(i, j))[2];
        }
    }
    tot
}

/// ‖v‖² + γ‖η‖²_{L²(Γ)} + σ‖∇₀η‖²_{L²(Γ)}.
pub fn stokes_energy(v: &VectorField, eta: &SurfaceField, gamma: f64, sigma: f64) -> f64 {
    let g = eta.grid();
    let kin: f64 = v.c.iter().map(|c| crate::ops::inner(c, c)).sum();
    let es = forward_levels(g, eta.values());
    kin + gamma * surface_l2_sq(eta) + sigma * surface_multiplier_sq(g, &es, |k2| k2)
}

/// ‖w₀‖_{H²} + ‖h₀‖_{H²} + ‖v₀‖_{H²} + ‖η₀‖_{H³}.
pub fn data_norm(w0: &ScalarField, h0: &ScalarField, v0: &VectorField, eta0: &SurfaceField) -> Result<f64> {
    use crate::ops::{sobolev_norm, sobolev_norm_vec, surface_fractional_norm};
    Ok(sobolev_norm(w0, 2)? + sobolev_norm(h0, 2)? + sobolev_norm_vec(v0, 2)? + surface_fractional_norm(eta0, 3.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EstimateCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Left side of the global estimate on the flattened trajectory:
/// sup_t(‖w‖_{H²}+‖h‖_{H²}+‖v‖_{H²}+‖∇q‖_{L²}+‖η‖_{H³})²
/// + ∫(‖w‖_{H³}+‖h‖_{H³}+‖v‖_{H³}+‖∇q‖_{H¹}+‖∇₀η‖_{H^{5/2}})² dt,
/// against `c_cal · data_norm²`.
pub fn theorem_estimate_check(states: &[FlatState], data_norm: f64, c_cal: f64) -> Result<EstimateCheck> {
    let g = *states.first().ok_or_else(|| CnsError::Domain("empty trajectory".into()))?.w.grid();
    let nt = states.len() - 1;
    let mut sup: f64 = 0.0;
    let mut int = 0.0;
    for (n, s) in states.iter().enumerate() {
        let r = EnergyRow::of(s, 0.0, 0.0);
        sup = sup.max((r.w_h2 + r.h_h2 + r.v_h2 + r.grad_q_l2 + r.eta_h3).powi(2));
        int += level_weight(n, nt, g.dt) * (r.w_h3 + r.h_h3 + r.v_h3 + r.grad_q_h1 + r.grad_eta_h52).powi(2);
    }
    let lhs = sup + int;
    let rhs = c_cal * data_norm * data_norm;
    Ok(EstimateCheck { lhs, rhs, pass: lhs <= rhs })
}

/// Per-level norms of a flattened state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct EnergyRow {
    pub t: f64,
    pub stokes_energy: f64,
    /// ½(E_n − E_{n−1})/dt + [v_n, v_n]; zero for an exactly balanced
    /// unforced step, negative when the scheme dissipates more.
    pub dissipation_balance: f64,
    pub w_h2: f64,
    pub w_h3: f64,
    pub h_h2: f64,
    pub h_h3: f64,
    pub v_h2: f64,
    pub v_h3: f64,
    pub grad_q_l2: f64,
    pub grad_q_h1: f64,
    pub eta_h3: f64,
    pub grad_eta_h52: f64,
}

impl EnergyRow {
    fn of(s: &FlatState, gamma: f64, sigma: f64) -> Self {
        let g = *s.w.grid();
        let p = g.plane();
        let sw = sobolev_orders_spec(&g, &forward_levels(&g, s.w.values()));
        let sh = sobolev_orders_spec(&g, &forward_levels(&g, s.h.values()));
        let sv = s.v.c.iter().map(|c| sobolev_orders_spec(&g, &forward_levels(&g, c.values()))).fold([0.0; 4], add_orders);
        let qs = forward_levels(&g, s.q.values());
        let gq: [Vec<C64>; 3] = [
            (0..g.len()).map(|m| qs[m] * C64::new(0.0, g.k1((m % p) / g.n2))).collect(),
            (0..g.len()).map(|m| qs[m] * C64::new(0.0, g.k2(m % g.n2))).collect(),
            dz_vec(&g, &qs),
        ];
        let sq = gq.iter().map(|x| sobolev_orders_spec(&g, x)).fold([0.0; 4], add_orders);
        let es = forward_levels(&g, s.eta.values());
        EnergyRow {
            t: s.t,
            stokes_energy: stokes_energy(&s.v, &s.eta, gamma, sigma),
            dissipation_balance: 0.0,
            w_h2: sw[2].sqrt(),
            w_h3: sw[3].sqrt(),
            h_h2: sh[2].sqrt(),
            h_h3: sh[3].sqrt(),
            v_h2: sv[2].sqrt(),
            v_h3: sv[3].sqrt(),
            grad_q_l2: sq[0].sqrt(),
            grad_q_h1: sq[1].sqrt(),
            eta_h3: surface_multiplier_sq(&g, &es, |k2| (1.0 + k2).powi(3)).sqrt(),
            grad_eta_h52: surface_multiplier_sq(&g, &es, |k2| k2 * (1.0 + k2).powf(2.5)).sqrt(),
        }
    }
}

/// Everything the energy monitor records for one trajectory.
#[derive(Clone, Debug, Serialize)]
pub struct EnergyReport {
    pub rows: Vec<EnergyRow>,
    pub norm: QuintupleNorm,
    pub stokes_energy_nonincreasing: bool,
}

pub fn energy_report(states: &[FlatState], gamma: f64, sigma: f64) -> Result<EnergyReport> {
    let mut rows: Vec<EnergyRow> = Vec::with_capacity(states.len());
    for s in states {
        let mut r = EnergyRow::of(s, gamma, sigma);
        if let Some(prev) = rows.last() {
            let dt = s.w.grid().dt;
            r.dissipation_balance = 0.5 * (r.stokes_energy - prev.stokes_energy) / dt + korn_form(&s.v, &s.v);
        }
        rows.push(r);
    }
    let stokes_energy_nonincreasing = rows.windows(2).all(|w| w[1].stokes_energy <= w[0].stokes_energy);
    Ok(EnergyReport { rows, norm: quintuple_norm(states)?, stokes_energy_nonincreasing })
}
