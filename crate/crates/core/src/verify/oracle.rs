//! Chain-rule oracle for the transformed equations.
//!
//! Path one evaluates the flat operators and the term evaluators of
//! [`crate::nonlinear`] on sampled pullbacks. Path two differentiates the
//! Eulerian callbacks directly at the mapped points with sixth-order central
//! differences. Their difference is the discretisation error of path one.

use crate::error::Result;
use crate::grid::{ScalarField, SlabGrid, SurfaceField, VectorField};
use crate::nonlinear::{gradient, RhsContext};
use crate::ops::{derivs, dz_top, sderivs, D};
use crate::transform::{compose_with_theta, geometry_coeffs, theta3, velocity_to_flat, GeometryCoeffs};
use rayon::prelude::*;
use std::sync::Arc;

pub type Eulerian = Arc<dyn Fn(f64, f64, f64, f64) -> f64 + Send + Sync>;
pub type Height = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Analytic fields on the moving domain, all 2π-periodic in x₁ and x₂.
#[derive(Clone)]
pub struct ManufacturedCase {
    pub name: String,
    pub m: Eulerian,
    pub c_tilde: Eulerian,
    pub u: [Eulerian; 3],
    pub p: Eulerian,
    pub phi: Eulerian,
    pub eta: Height,
    pub sigma: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Term {
    F1,
    F2,
    F3,
    F4,
    F5,
    G1,
    G2,
    G3,
    G4,
}

impl Term {
    pub const ALL: [Term; 9] = [Term::F4, Term::F5, Term::F1, Term::F2, Term::F3, Term::G1, Term::G2, Term::G3, Term::G4];

    pub fn name(self) -> &'static str {
        match self {
            Term::F1 => "F1",
            Term::F2 => "F2",
            Term::F3 => "F3",
            Term::F4 => "F4",
            Term::F5 => "F5",
            Term::G1 => "G1",
            Term::G2 => "G2",
            Term::G3 => "G3",
            Term::G4 => "G4",
        }
    }
}

/// Pointwise discrepancy between the two paths, per term group.
#[derive(Clone, Debug)]
pub struct ResidualReport {
    pub volume: Vec<(Term, ScalarField)>,
    pub surface: Vec<(Term, SurfaceField)>,
}

impl ResidualReport {
    pub fn max(&self, t: Term) -> f64 {
        self.volume
            .iter()
            .find(|(x, _)| *x == t)
            .map(|(_, f)| f.max_abs())
            .or_else(|| self.surface.iter().find(|(x, _)| *x == t).map(|(_, f)| f.max_abs()))
            .unwrap_or(f64::NAN)
    }

    pub fn rows(&self) -> Vec<(Term, f64)> {
        Term::ALL.iter().map(|&t| (t, self.max(t))).collect()
    }
}

/// Observed refinement order of every term group.
#[derive(Clone, Debug)]
pub struct OracleRefinement {
    pub hz: Vec<f64>,
    pub errors: Vec<(Term, Vec<f64>)>,
}

impl OracleRefinement {
    pub fn order(&self, t: Term) -> f64 {
        let e = &self.errors.iter().find(|(x, _)| *x == t).expect("term present").1;
        super::mms::fit_order(&self.hz, e)
    }
}

const DELTA: f64 = 1e-2;

fn fd1(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let d = DELTA;
    (-f(x - 3.0 * d) + 9.0 * f(x - 2.0 * d) - 45.0 * f(x - d) + 45.0 * f(x + d) - 9.0 * f(x + 2.0 * d) + f(x + 3.0 * d)) / (60.0 * d)
}

fn fd2(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let d = DELTA;
    (2.0 * f(x - 3.0 * d) - 27.0 * f(x - 2.0 * d) + 270.0 * f(x - d) - 490.0 * f(x) + 270.0 * f(x + d) - 27.0 * f(x + 2.0 * d)
        + 2.0 * f(x + 3.0 * d))
        / (180.0 * d * d)
}

/// (∇f, Δf, ∂ₜf) at (x, t).
fn probe(f: &Eulerian, x: [f64; 3], t: f64) -> ([f64; 3], f64, f64) {
    let [a, b, c] = x;
    let g = [fd1(|s| f(s, b, c, t), a), fd1(|s| f(a, s, c, t), b), fd1(|s| f(a, b, s, t), c)];
    let l = fd2(|s| f(s, b, c, t), a) + fd2(|s| f(a, s, c, t), b) + fd2(|s| f(a, b, s, t), c);
    (g, l, fd1(|s| f(a, b, c, s), t))
}

fn grad(f: &Eulerian, x: [f64; 3], t: f64) -> [f64; 3] {
    let [a, b, c] = x;
    [fd1(|s| f(s, b, c, t), a), fd1(|s| f(a, s, c, t), b), fd1(|s| f(a, b, s, t), c)]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Pulled-back samples at one time.
struct Pullback {
    w: ScalarField,
    h: ScalarField,
    v: VectorField,
    q: ScalarField,
    phi: ScalarField,
}

impl ManufacturedCase {
    pub fn surface(&self, g: &SlabGrid, t: f64) -> SurfaceField {
        SurfaceField::from_fn(*g, |x1, x2| (self.eta)(x1, x2, t))
    }

    fn surface_t(&self, g: &SlabGrid, t: f64) -> SurfaceField {
        SurfaceField::from_fn(*g, |x1, x2| fd1(|s| (self.eta)(x1, x2, s), t))
    }

    fn pullback(&self, g: &SlabGrid, t: f64) -> Result<Pullback> {
        let eta = self.surface(g, t);
        let geo = geometry_coeffs(&eta, &SurfaceField::zeros(*g))?;
        let c = |f: &Eulerian| compose_with_theta(|a, b, z, s| f(a, b, z, s), &eta, t);
        let u = VectorField { c: [c(&self.u[0]), c(&self.u[1]), c(&self.u[2])] };
        Ok(Pullback { w: c(&self.m), h: c(&self.c_tilde), v: velocity_to_flat(&u, &geo), q: c(&self.p), phi: c(&self.phi) })
    }

    /// Sixth-order time derivative of the pulled-back samples at fixed flat nodes.
    fn pullback_t(&self, g: &SlabGrid, t: f64) -> Result<Pullback> {
        let w = [-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0];
        let mut acc: Option<Pullback> = None;
        for (i, &c) in w.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let s = c / (60.0 * DELTA);
            let pb = self.pullback(g, t + (i as f64 - 3.0) * DELTA)?;
            acc = Some(match acc {
                None => Pullback { w: pb.w.scale(s), h: pb.h.scale(s), v: pb.v.scale(s), q: pb.q.scale(s), phi: pb.phi.scale(s) },
                Some(a) => Pullback {
                    w: a.w.add(&pb.w.scale(s)),
                    h: a.h.add(&pb.h.scale(s)),
                    v: a.v.add(&pb.v.scale(s)),
                    q: a.q.add(&pb.q.scale(s)),
                    phi: a.phi.add(&pb.phi.scale(s)),
                },
            });
        }
        Ok(acc.expect("non-empty stencil"))
    }

    /// The same case with x₁ and x₂ exchanged.
    pub fn swapped(&self) -> ManufacturedCase {
        let sw = |f: &Eulerian| -> Eulerian {
            let f = f.clone();
            Arc::new(move |a, b, z, t| f(b, a, z, t))
        };
        let eta = self.eta.clone();
        ManufacturedCase {
            name: format!("{}-swapped", self.name),
            m: sw(&self.m),
            c_tilde: sw(&self.c_tilde),
            u: [sw(&self.u[1]), sw(&self.u[0]), sw(&self.u[2])],
            p: sw(&self.p),
            phi: sw(&self.phi),
            eta: Arc::new(move |a, b, t| eta(b, a, t)),
            sigma: self.sigma,
        }
    }

    /// Flat surface and fields quadratic in the vertical coordinate, so
    /// every grid derivative of path one is exact.
    pub fn flat() -> ManufacturedCase {
        Self::with_surface("flat", Arc::new(|_, _, _| 0.0))
    }

    /// A moving surface of amplitude `eps` with two travelling modes.
    pub fn smooth(eps: f64) -> ManufacturedCase {
        Self::with_surface(
            "smooth",
            Arc::new(move |a, b, t| eps * (a.cos() * (1.0 + 0.3 * t.sin()) + 0.5 * (b - 0.4 * t).sin() + 0.3 * (a + b).cos() * (-t).exp())),
        )
    }

    fn with_surface(name: &str, eta: Height) -> ManufacturedCase {
        // u = ∇ × (0, a₂, a₃) with a₂ = ½s₂(t) sin x₁ cos x₂ (1+z)², a₃ = 0.4 s₃(t) cos(x₁+x₂)(z + z²/2).
        let s2 = |t: f64| 1.0 + 0.5 * t.sin();
        let s3 = |t: f64| (-0.5 * t).exp();
        let u1: Eulerian = Arc::new(move |a, b, z, t| -0.4 * s3(t) * (a + b).sin() * (z + 0.5 * z * z) - s2(t) * a.sin() * b.cos() * (1.0 + z));
        let u2: Eulerian = Arc::new(move |a, b, z, t| 0.4 * s3(t) * (a + b).sin() * (z + 0.5 * z * z));
        let u3: Eulerian = Arc::new(move |a, b, z, t| 0.5 * s2(t) * a.cos() * b.cos() * (1.0 + z) * (1.0 + z));
        ManufacturedCase {
            name: name.into(),
            m: Arc::new(|a, b, z, t| (0.5 + 0.2 * (a - b).cos()) * (1.0 + z) * (1.0 + z) * (-0.5 * t).exp()),
            c_tilde: Arc::new(|a, b, z, t| 0.3 * a.sin() * (z * z + 2.0 * z) * t.cos() + 0.1 * b.cos() * z),
            u: [u1, u2, u3],
            p: Arc::new(|a, b, z, t| 0.4 * a.cos() * b.cos() * (1.0 + z + z * z) * (-t).exp()),
            phi: Arc::new(|a, b, z, _| 0.5 * z + 0.1 * (a + b).sin() * z * z),
            eta,
            sigma: 0.7,
        }
    }
}

/// Flat-side operators of each equation, evaluated with grid derivatives.
fn flat_side(case: &ManufacturedCase, g: &SlabGrid, t: f64, geo: &GeometryCoeffs) -> Result<(Vec<(Term, ScalarField)>, Vec<(Term, SurfaceField)>)> {
    let s = case.pullback(g, t)?;
    let st = case.pullback_t(g, t)?;
    let ctx = RhsContext::new(geo);
    let lap = |f: &ScalarField| {
        let [a, b, c] = derivs(f, [D::X11, D::X22, D::ZZ]);
        a.add(&b).add(&c)
    };
    let (gw, gh) = (gradient(&s.w), gradient(&s.h));
    let div_wgh = gw.c[0].mul(&gh.c[0]).add(&gw.c[1].mul(&gh.c[1])).add(&gw.c[2].mul(&gh.c[2])).add(&s.w.mul(&lap(&s.h)));
    let e4 = st.w.sub(&lap(&s.w)).sub(&div_wgh).sub(&ctx.f4(&s.w, &s.w, &s.h, &s.v));
    let e5 = st.h.sub(&lap(&s.h)).sub(&s.w).sub(&ctx.f5(&s.h, &s.v));
    let gq = gradient(&s.q);
    let gphi = gradient(&s.phi);
    let f = ctx.f123(&s.w, &s.v, &gq, &s.phi);
    let ev: Vec<ScalarField> = (0..3)
        .map(|i| st.v.c[i].sub(&lap(&s.v.c[i])).add(&gq.c[i]).add(&s.w.mul(&gphi.c[i])).sub(&f.c[i]))
        .collect();
    let shear = |k: usize| {
        let [d] = sderivs(&s.v.c[2].top(), [if k == 0 { D::X1 } else { D::X2 }]);
        dz_top(&s.v.c[k]).add(&d)
    };
    let b1 = shear(0).sub(&ctx.g1(&s.v));
    let b2 = shear(1).sub(&ctx.g2(&s.v));
    let b3 = s.q.top().sub(&dz_top(&s.v.c[2]).scale(2.0)).add(&ctx.g3(&s.v, case.sigma));
    let b4 = dz_top(&s.w).add(&s.w.top().mul(&dz_top(&s.h))).sub(&ctx.g4(&s.w, &s.h));
    let [e1, e2, e3] = [ev[0].clone(), ev[1].clone(), ev[2].clone()];
    Ok((
        vec![(Term::F4, e4), (Term::F5, e5), (Term::F1, e1), (Term::F2, e2), (Term::F3, e3)],
        vec![(Term::G1, b1), (Term::G2, b2), (Term::G3, b3), (Term::G4, b4)],
    ))
}

/// The Eulerian residuals at the mapped nodes, in the flat normalisation.
fn eulerian_side(case: &ManufacturedCase, g: &SlabGrid, t: f64, geo: &GeometryCoeffs) -> (Vec<[f64; 5]>, Vec<[f64; 4]>) {
    let th = theta3(&geo.etabar);
    let vol: Vec<[f64; 5]> = (0..g.len())
        .into_par_iter()
        .map(|n| {
            let p = n % g.plane();
            let x = [g.x1(p / g.n2), g.x2(p % g.n2), th.values()[n]];
            let (gm, lm, mt) = probe(&case.m, x, t);
            let (gc, lc, ct) = probe(&case.c_tilde, x, t);
            let m = (case.m)(x[0], x[1], x[2], t);
            let u = case.u.each_ref().map(|f| f(x[0], x[1], x[2], t));
            let gp = grad(&case.p, x, t);
            let gphi = grad(&case.phi, x, t);
            let me = mt + dot(u, gm) - (dot(gm, gc) + m * lc) - lm;
            let ce = ct + dot(u, gc) + dot(gc, gc) - m - lc;
            let mut r = [0.0; 3];
            for i in 0..3 {
                let (gu, lu, ut) = probe(&case.u[i], x, t);
                r[i] = ut + dot(u, gu) + gp[i] + m * gphi[i] - lu;
            }
            let (j, a, b) = (geo.j.values()[n], geo.alpha.values()[n], geo.beta.values()[n]);
            [me, ce, j * r[0], j * r[1], -a * r[0] - b * r[1] + r[2]]
        })
        .collect();
    let jt = geo.j.top();
    let surf: Vec<[f64; 4]> = (0..g.plane())
        .into_par_iter()
        .map(|p| {
            let (a, b) = (g.x1(p / g.n2), g.x2(p % g.n2));
            let eta = |x: f64, y: f64| (case.eta)(x, y, t);
            let z = eta(a, b);
            let (e1, e2) = (fd1(|s| eta(s, b), a), fd1(|s| eta(a, s), b));
            let (e11, e22) = (fd2(|s| eta(s, b), a), fd2(|s| eta(a, s), b));
            let e12 = fd1(|s| fd1(|r| eta(r, s), a), b);
            let nn = 1.0 + e1 * e1 + e2 * e2;
            let kappa = ((1.0 + e2 * e2) * e11 - 2.0 * e1 * e2 * e12 + (1.0 + e1 * e1) * e22) / nn.powf(1.5);
            let x = [a, b, z];
            let gu = case.u.each_ref().map(|f| grad(f, x, t));
            let sym = |i: usize, j: usize| gu[i][j] + gu[j][i];
            let nt = [-e1, -e2, 1.0];
            let sn = |i: usize| (0..3).map(|j| sym(i, j) * nt[j]).sum::<f64>();
            let sn_v = [sn(0), sn(1), sn(2)];
            let gm = grad(&case.m, x, t);
            let gc = grad(&case.c_tilde, x, t);
            let m = (case.m)(a, b, z, t);
            let flux = [gm[0] + m * gc[0], gm[1] + m * gc[1], gm[2] + m * gc[2]];
            [
                dot([1.0, 0.0, e1], sn_v),
                dot([0.0, 1.0, e2], sn_v),
                (case.p)(a, b, z, t) - dot(nt, sn_v) / nn + case.sigma * (kappa - e11 - e22),
                jt.values()[p] / nn * dot(flux, nt),
            ]
        })
        .collect();
    (vol, surf)
}

/// Both paths at time `t` on `grid`, and their pointwise difference.
pub fn chain_rule_oracle(case: &ManufacturedCase, grid: &SlabGrid, t: f64) -> Result<ResidualReport> {
    let eta = case.surface(grid, t);
    let geo = geometry_coeffs(&eta, &case.surface_t(grid, t))?;
    let (vol, surf) = flat_side(case, grid, t, &geo)?;
    let (ev, es) = eulerian_side(case, grid, t, &geo);
    let volume = vol
        .into_iter()
        .enumerate()
        .map(|(c, (term, f))| {
            let d: Vec<f64> = f.values().iter().zip(&ev).map(|(x, e)| x - e[c]).collect();
            (term, ScalarField::raw(*grid, d))
        })
        .collect();
    let surface = surf
        .into_iter()
        .enumerate()
        .map(|(c, (term, f))| {
            let d: Vec<f64> = f.values().iter().zip(&es).map(|(x, e)| x - e[c]).collect();
            (term, SurfaceField::raw(*grid, d))
        })
        .collect();
    Ok(ResidualReport { volume, surface })
}

/// Runs the oracle on each grid and collects the max discrepancies.
pub fn oracle_refinement(case: &ManufacturedCase, grids: &[SlabGrid], t: f64) -> Result<OracleRefinement> {
    let mut errors: Vec<(Term, Vec<f64>)> = Term::ALL.iter().map(|&t| (t, Vec::new())).collect();
    for g in grids {
        let r = chain_rule_oracle(case, g, t)?;
        for (term, e) in errors.iter_mut() {
            e.push(r.max(*term));
        }
    }
    Ok(OracleRefinement { hz: grids.iter().map(|g| g.hz()).collect(), errors })
}
