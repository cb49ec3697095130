//! Manufactured-solution convergence studies.
//!
//! Every case is separable, `τ(t)·X(x)·Y(y)` with `τ = e^{−t}`. In a space
//! study the forcing uses the backward difference of τ instead of τ', so the
//! manufactured fields solve the time-discrete problem exactly and only the
//! vertical error remains. In a time study the vertical profiles are
//! polynomials of degree ≤ 2 and the horizontal factors single Fourier
//! modes; the grid operators are then exact and only the time error remains.

use crate::error::{CnsError, Result};
use crate::grid::{ScalarField, SlabGrid, SurfaceField, VectorField};
use crate::ops::{l2_norm, l2_norm_vec, surface_l2_sq};
use crate::solvers::{solve_parabolic_pair, solve_stationary_stokes, solve_stokes_evolution, ParabolicProblem, StokesProblem};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const SPACE_ORDER_MIN: f64 = 1.9;
pub const TIME_ORDER_MIN: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MmsSolver {
    Parabolic,
    Stokes,
    Stationary,
}

impl std::str::FromStr for MmsSolver {
    type Err = CnsError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parabolic" => Ok(MmsSolver::Parabolic),
            "stokes" => Ok(MmsSolver::Stokes),
            "stationary" => Ok(MmsSolver::Stationary),
            _ => Err(CnsError::Config(format!("unknown mms solver '{s}' (parabolic|stokes|stationary)"))),
        }
    }
}

impl MmsSolver {
    pub fn name(self) -> &'static str {
        match self {
            MmsSolver::Parabolic => "parabolic",
            MmsSolver::Stokes => "stokes",
            MmsSolver::Stationary => "stationary",
        }
    }

    pub fn fields(self) -> &'static [&'static str] {
        match self {
            MmsSolver::Parabolic => &["w", "h"],
            MmsSolver::Stokes => &["v", "q", "eta"],
            MmsSolver::Stationary => &["v", "q"],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Refinement {
    Space,
    Time,
}

impl std::str::FromStr for Refinement {
    type Err = CnsError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "space" => Ok(Refinement::Space),
            "time" => Ok(Refinement::Time),
            _ => Err(CnsError::Config(format!("unknown refinement '{s}' (space|time)"))),
        }
    }
}

impl Refinement {
    pub fn name(self) -> &'static str {
        match self {
            Refinement::Space => "space",
            Refinement::Time => "time",
        }
    }

    pub fn threshold(self) -> f64 {
        match self {
            Refinement::Space => SPACE_ORDER_MIN,
            Refinement::Time => TIME_ORDER_MIN,
        }
    }
}

/// Vertical refinement Nz = 17, 33, 65 at dt = 0.01, T = 0.1 (8×8 modes).
pub fn space_grids() -> Vec<SlabGrid> {
    [17, 33, 65]
        .iter()
        .map(|&nz| SlabGrid::cube(8, nz).and_then(|g| g.with_time(0.01, 10)).expect("valid grid"))
        .collect()
}

/// dt = 4e-3, 2e-3, 1e-3 to T = 0.2 on an 8×8×9 grid.
pub fn time_grids() -> Vec<SlabGrid> {
    [50, 100, 200]
        .iter()
        .map(|&nt| SlabGrid::cube(8, 9).and_then(|g| g.with_time(0.2 / nt as f64, nt)).expect("valid grid"))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub nz: usize,
    pub nt: usize,
    pub step: f64,
    pub errors: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub solver: MmsSolver,
    pub refinement: Refinement,
    pub fields: Vec<String>,
    pub rows: Vec<ConvergenceRow>,
    pub orders: Vec<f64>,
    pub threshold: f64,
    pub pass: bool,
}

impl ConvergenceTable {
    pub fn order(&self, field: &str) -> Option<f64> {
        self.fields.iter().position(|f| f == field).map(|i| self.orders[i])
    }
}

/// Least-squares slope of log(err) against log(h).
pub fn fit_order(h: &[f64], err: &[f64]) -> f64 {
    let n = h.len() as f64;
    let xs: Vec<f64> = h.iter().map(|x| x.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|x| x.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

pub fn mms_study(solver: MmsSolver, refinement: Refinement, grids: &[SlabGrid]) -> Result<ConvergenceTable> {
    if grids.len() < 3 {
        return Err(CnsError::Domain(format!("a convergence study needs at least 3 grids, got {}", grids.len())));
    }
    if solver == MmsSolver::Stationary && refinement == Refinement::Time {
        return Err(CnsError::Domain("the stationary problem has no time refinement".into()));
    }
    let mut rows = Vec::with_capacity(grids.len());
    for g in grids {
        g.validate()?;
        let errors = match solver {
            MmsSolver::Parabolic => parabolic_errors(g, refinement, refinement == Refinement::Space)?,
            MmsSolver::Stokes => stokes_errors(g, refinement, refinement == Refinement::Space)?,
            MmsSolver::Stationary => stationary_errors(g)?,
        };
        let step = match refinement {
            Refinement::Space => g.hz(),
            Refinement::Time => g.dt,
        };
        rows.push(ConvergenceRow { nz: g.nz, nt: g.nt, step, errors });
    }
    let fields: Vec<String> = solver.fields().iter().map(|s| s.to_string()).collect();
    let steps: Vec<f64> = rows.iter().map(|r| r.step).collect();
    let orders: Vec<f64> = (0..fields.len())
        .map(|i| fit_order(&steps, &rows.iter().map(|r| r.errors[i]).collect::<Vec<_>>()))
        .collect();
    let threshold = refinement.threshold();
    let pass = orders.iter().all(|&o| o >= threshold);
    Ok(ConvergenceTable { solver, refinement, fields, rows, orders, threshold, pass })
}

/// A vertical profile with its first three derivatives.
type Profile = Box<dyn Fn(f64) -> [f64; 4]>;

/// Time factor and its derivative at level n; `discrete` swaps the
/// derivative for the backward difference.
fn tau(g: &SlabGrid, discrete: bool, n: usize) -> (f64, f64) {
    let t = n as f64 * g.dt;
    let e = (-t).exp();
    if discrete {
        (e, e * (1.0 - g.dt.exp()) / g.dt)
    } else {
        (e, -e)
    }
}

fn modes(g: &SlabGrid) -> (f64, f64) {
    (2.0 * PI / g.l1, 2.0 * PI / g.l2)
}

// Parabolic pair: w = τ c₁c₂ W(y), h = τ c₁s₂ H(y),
// a = 0.2 + 0.1 cos(k₂x₂) + 0.1 (y+b)/b.
fn parabolic_profiles(b: f64, r: Refinement) -> (Profile, Profile) {
    match r {
        Refinement::Space => {
            // Generic third derivatives at both walls, so the one-sided
            // boundary stencils contribute at leading order.
            let m = PI / b;
            let b3 = b * b * b;
            (
                Box::new(move |y| {
                    let (s, c) = (m * (y + b)).sin_cos();
                    let z = y + b;
                    [s + z * z / (b * b), m * c + 2.0 * z / (b * b), -m * m * s + 2.0 / (b * b), -m * m * m * c]
                }),
                Box::new(move |y| {
                    let (s, c) = (m * (y + b)).sin_cos();
                    let z = y + b;
                    [c + z * z * z / b3, -m * s + 3.0 * z * z / b3, -m * m * c + 6.0 * z / b3, m * m * m * s + 6.0 / b3]
                }),
            )
        }
        Refinement::Time => (
            Box::new(move |y| [(y + b) / b, 1.0 / b, 0.0, 0.0]),
            Box::new(move |y| [-y * (y + 2.0 * b) / (b * b), -(2.0 * y + 2.0 * b) / (b * b), -2.0 / (b * b), 0.0]),
        ),
    }
}

fn parabolic_errors(g: &SlabGrid, r: Refinement, discrete: bool) -> Result<Vec<f64>> {
    let (k1, k2) = modes(g);
    let kk = k1 * k1 + k2 * k2;
    let b = g.b;
    let (pw, ph) = parabolic_profiles(b, r);
    let a_fn = move |x2: f64, y: f64| 0.2 + 0.1 * (k2 * x2).cos() + 0.1 * (y + b) / b;
    let a = ScalarField::from_fn(*g, |_, x2, y| a_fn(x2, y));
    let w_at = |t: f64| ScalarField::from_fn(*g, |x1, x2, y| t * (k1 * x1).cos() * (k2 * x2).cos() * pw(y)[0]);
    let h_at = |t: f64| ScalarField::from_fn(*g, |x1, x2, y| t * (k1 * x1).cos() * (k2 * x2).sin() * ph(y)[0]);
    let n = g.nt + 1;
    let mut p = ParabolicProblem::unforced(*g, w_at(1.0), h_at(1.0));
    for lvl in 0..n {
        let (t, dt) = tau(g, discrete, lvl);
        p.a[lvl] = a.clone();
        p.f4[lvl] = ScalarField::from_fn(*g, |x1, x2, y| {
            let (c1, (s2, c2)) = ((k1 * x1).cos(), (k2 * x2).sin_cos());
            let (w, h) = (pw(y), ph(y));
            let av = a_fn(x2, y);
            let lap_h = t * c1 * s2 * (h[2] - kk * h[0]);
            let div_ah = av * lap_h - 0.1 * k2 * s2 * (t * c1 * k2 * c2 * h[0]) + 0.1 / b * (t * c1 * s2 * h[1]);
            dt * c1 * c2 * w[0] - t * c1 * c2 * (w[2] - kk * w[0]) - div_ah
        });
        p.f5[lvl] = ScalarField::from_fn(*g, |x1, x2, y| {
            let (c1, (s2, c2)) = ((k1 * x1).cos(), (k2 * x2).sin_cos());
            let (w, h) = (pw(y), ph(y));
            dt * c1 * s2 * h[0] - t * c1 * s2 * (h[2] - kk * h[0]) - t * c1 * c2 * w[0]
        });
        p.g4[lvl] = SurfaceField::from_fn(*g, |x1, x2| {
            let (c1, (s2, c2)) = ((k1 * x1).cos(), (k2 * x2).sin_cos());
            t * c1 * c2 * pw(0.0)[1] + a_fn(x2, 0.0) * t * c1 * s2 * ph(0.0)[1]
        });
    }
    let (w, h) = solve_parabolic_pair(&p)?;
    let (t, _) = tau(g, discrete, g.nt);
    Ok(vec![l2_norm(&w[g.nt].sub(&w_at(t))), l2_norm(&h[g.nt].sub(&h_at(t)))])
}

// Stokes: v = τ(s₁Y', c₁Z + s₂Y', −Y(k₁c₁ + k₂c₂)), q = τ P (c₁c₂ + ½).
struct StokesCase {
    y: Profile,
    z: Profile,
    p: Profile,
    k1: f64,
    k2: f64,
}

impl StokesCase {
    fn new(g: &SlabGrid, r: Refinement) -> Self {
        let b = g.b;
        let (k1, k2) = modes(g);
        match r {
            Refinement::Space => {
                let m = PI / b;
                let k = PI / (2.0 * b);
                StokesCase {
                    y: Box::new(move |y| {
                        let (s, c) = (m * (y + b)).sin_cos();
                        [0.5 * (1.0 - c), 0.5 * m * s, 0.5 * m * m * c, -0.5 * m * m * m * s]
                    }),
                    z: Box::new(move |y| {
                        let (s, c) = (k * (y + b)).sin_cos();
                        [s, k * c, -k * k * s, -k * k * k * c]
                    }),
                    p: Box::new(move |y| {
                        let e = (y / b).exp();
                        [e, e / b, e / (b * b), e / (b * b * b)]
                    }),
                    k1,
                    k2,
                }
            }
            Refinement::Time => StokesCase {
                y: Box::new(move |y| [(y + b).powi(2) / (b * b), 2.0 * (y + b) / (b * b), 2.0 / (b * b), 0.0]),
                z: Box::new(move |y| [(y + b) / b, 1.0 / b, 0.0, 0.0]),
                p: Box::new(move |y| [1.0 + y * y / (b * b), 2.0 * y / (b * b), 2.0 / (b * b), 0.0]),
                k1,
                k2,
            },
        }
    }

    fn trig(&self, x1: f64, x2: f64) -> (f64, f64, f64, f64) {
        let (s1, c1) = (self.k1 * x1).sin_cos();
        let (s2, c2) = (self.k2 * x2).sin_cos();
        (s1, c1, s2, c2)
    }

    fn v(&self, x1: f64, x2: f64, y: f64) -> [f64; 3] {
        let (s1, c1, s2, c2) = self.trig(x1, x2);
        let (yy, z) = ((self.y)(y), (self.z)(y));
        [s1 * yy[1], c1 * z[0] + s2 * yy[1], -yy[0] * (self.k1 * c1 + self.k2 * c2)]
    }

    fn lap_v(&self, x1: f64, x2: f64, y: f64) -> [f64; 3] {
        let (s1, c1, s2, c2) = self.trig(x1, x2);
        let (yy, z) = ((self.y)(y), (self.z)(y));
        let (k1s, k2s) = (self.k1 * self.k1, self.k2 * self.k2);
        [
            s1 * (yy[3] - k1s * yy[1]),
            c1 * (z[2] - k1s * z[0]) + s2 * (yy[3] - k2s * yy[1]),
            -(self.k1 * c1 * (yy[2] - k1s * yy[0]) + self.k2 * c2 * (yy[2] - k2s * yy[0])),
        ]
    }

    fn q(&self, x1: f64, x2: f64, y: f64) -> f64 {
        let (_, c1, _, c2) = self.trig(x1, x2);
        (self.p)(y)[0] * (c1 * c2 + 0.5)
    }

    fn grad_q(&self, x1: f64, x2: f64, y: f64) -> [f64; 3] {
        let (s1, c1, s2, c2) = self.trig(x1, x2);
        let p = (self.p)(y);
        [-self.k1 * s1 * c2 * p[0], -self.k2 * c1 * s2 * p[0], p[1] * (c1 * c2 + 0.5)]
    }

    /// (∂₃v₁ + ∂₁v₃, ∂₃v₂ + ∂₂v₃, q − 2∂₃v₃) on Γ.
    fn stresses(&self, x1: f64, x2: f64) -> [f64; 3] {
        let (s1, c1, s2, c2) = self.trig(x1, x2);
        let (yy, z) = ((self.y)(0.0), (self.z)(0.0));
        [
            s1 * yy[2] + self.k1 * self.k1 * s1 * yy[0],
            c1 * z[1] + s2 * yy[2] + self.k2 * self.k2 * s2 * yy[0],
            self.q(x1, x2, 0.0) + 2.0 * yy[1] * (self.k1 * c1 + self.k2 * c2),
        ]
    }

    /// (v₃ on Γ, its image under γ − σΔ₀).
    fn kinematic(&self, x1: f64, x2: f64, gamma: f64, sigma: f64) -> (f64, f64) {
        let (_, c1, _, c2) = self.trig(x1, x2);
        let y0 = (self.y)(0.0)[0];
        let (k1, k2) = (self.k1, self.k2);
        (
            -y0 * (k1 * c1 + k2 * c2),
            -y0 * ((gamma + sigma * k1 * k1) * k1 * c1 + (gamma + sigma * k2 * k2) * k2 * c2),
        )
    }

    fn eta0(&self, x1: f64, x2: f64, gamma: f64, sigma: f64) -> (f64, f64) {
        let ph = self.k1 * x1 + self.k2 * x2;
        let kk = self.k1 * self.k1 + self.k2 * self.k2;
        (0.05 * ph.cos(), 0.05 * (gamma + sigma * kk) * ph.cos())
    }
}

const MMS_GAMMA: f64 = 1.0;
const MMS_SIGMA: f64 = 1.0;

fn stokes_errors(g: &SlabGrid, r: Refinement, discrete: bool) -> Result<Vec<f64>> {
    let case = StokesCase::new(g, r);
    let (gm, sg) = (MMS_GAMMA, MMS_SIGMA);
    let n = g.nt + 1;
    // η = η₀ + μ(t)·v₃|_Γ-profile, with μ the exact or backward-Euler integral of τ.
    let mut mu = vec![0.0; n];
    for lvl in 1..n {
        let t = lvl as f64 * g.dt;
        mu[lvl] = if discrete { mu[lvl - 1] + g.dt * (-t).exp() } else { 1.0 - (-t).exp() };
    }
    let v0 = VectorField::from_fn(*g, |x1, x2, y| case.v(x1, x2, y));
    let eta0 = SurfaceField::from_fn(*g, |x1, x2| case.eta0(x1, x2, gm, sg).0);
    let mut p = StokesProblem::unforced(*g, gm, sg, v0, eta0);
    for lvl in 0..n {
        let (t, dt) = tau(g, discrete, lvl);
        p.f[lvl] = VectorField::from_fn(*g, |x1, x2, y| {
            let (v, l, gq) = (case.v(x1, x2, y), case.lap_v(x1, x2, y), case.grad_q(x1, x2, y));
            std::array::from_fn(|c| dt * v[c] - t * l[c] + t * gq[c])
        });
        for c in 0..3 {
            p.g[c][lvl] = SurfaceField::from_fn(*g, |x1, x2| {
                let s = case.stresses(x1, x2);
                if c < 2 {
                    return t * s[c];
                }
                let (_, le) = case.kinematic(x1, x2, gm, sg);
                let (_, le0) = case.eta0(x1, x2, gm, sg);
                le0 + mu[lvl] * le - t * s[2]
            });
        }
    }
    let states = solve_stokes_evolution(&p)?;
    let last = &states[g.nt];
    let (t, _) = tau(g, discrete, g.nt);
    let v = VectorField::from_fn(*g, |x1, x2, y| case.v(x1, x2, y).map(|c| c * t));
    let q = ScalarField::from_fn(*g, |x1, x2, y| t * case.q(x1, x2, y));
    let eta = SurfaceField::from_fn(*g, |x1, x2| case.eta0(x1, x2, gm, sg).0 + mu[g.nt] * case.kinematic(x1, x2, gm, sg).0);
    Ok(vec![l2_norm_vec(&last.v.sub(&v)), l2_norm(&last.q.sub(&q)), surface_l2_sq(&last.eta.sub(&eta)).sqrt()])
}

fn stationary_errors(g: &SlabGrid) -> Result<Vec<f64>> {
    let case = StokesCase::new(g, Refinement::Space);
    let f = VectorField::from_fn(*g, |x1, x2, y| {
        let (l, gq) = (case.lap_v(x1, x2, y), case.grad_q(x1, x2, y));
        std::array::from_fn(|c| gq[c] - l[c])
    });
    let gs: [SurfaceField; 3] = std::array::from_fn(|c| SurfaceField::from_fn(*g, |x1, x2| case.stresses(x1, x2)[c]));
    let (v, q) = solve_stationary_stokes(&f, [&gs[0], &gs[1], &gs[2]])?;
    let ve = VectorField::from_fn(*g, |x1, x2, y| case.v(x1, x2, y));
    let qe = ScalarField::from_fn(*g, |x1, x2, y| case.q(x1, x2, y));
    Ok(vec![l2_norm_vec(&v.sub(&ve)), l2_norm(&q.sub(&qe))])
}
