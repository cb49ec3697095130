//! Right-hand sides and boundary corrections of the flattened system.
//!
//! Notation inside the kernels: `a = J⁻¹α`, `bb = J⁻¹β`, `s = α²+β²+1`,
//! `st = 1 + y/b`, `p0 = J⁻¹∂₃J⁻¹`, `p1 = J⁻¹α∂₃J⁻¹`, `p2 = J⁻¹β∂₃J⁻¹`.
//!
//! Three printed expressions differ from the chain rule and are used here in
//! corrected form: in F₄ and F₅ the normal-velocity factor is
//! `J⁻¹αv₁ + J⁻¹βv₂ + v₃`, and F₄ carries `w·p0·∂₃h`. In F₃ the advection
//! block enters with a minus sign, its last entry is `v₂v₃J⁻²∂₃β`, and the
//! viscous part includes `u₁Δ_θα + 2∇_θα·∇_θu₁` and the β/u₂ analogue.
//! In G₁, G₂ and G₃ the vertical derivatives act on the field
//! `J⁻¹αv₁ + J⁻¹βv₂ + v₃` with α, β depending on y.

use crate::grid::{ScalarField, SlabGrid, SurfaceField, VectorField};
use crate::ops::{derivs, dz_top, sderivs, D};
use crate::harmonic::extension_derivatives;
use crate::spectral::forward_levels;
use crate::transform::{stretch, GeometryCoeffs};
use std::collections::HashMap;

/// Value, gradient and Hessian at one node:
/// `[f, ∂₁f, ∂₂f, ∂₃f, ∂₁₁f, ∂₂₂f, ∂₃₃f, ∂₁₂f, ∂₁₃f, ∂₂₃f]`.
type Jet = [f64; 10];

const HESS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];

fn jadd(a: &Jet, b: &Jet) -> Jet {
    std::array::from_fn(|i| a[i] + b[i])
}

fn jscale(a: &Jet, c: f64) -> Jet {
    a.map(|x| c * x)
}

fn jmul(a: &Jet, b: &Jet) -> Jet {
    let mut o = [0.0; 10];
    o[0] = a[0] * b[0];
    for i in 1..4 {
        o[i] = a[i] * b[0] + a[0] * b[i];
    }
    for (n, &(i, j)) in HESS.iter().enumerate() {
        o[4 + n] = a[4 + n] * b[0] + a[1 + i] * b[1 + j] + a[1 + j] * b[1 + i] + a[0] * b[4 + n];
    }
    o
}

fn jrecip(a: &Jet) -> Jet {
    let r = 1.0 / a[0];
    let mut o = [0.0; 10];
    o[0] = r;
    for i in 1..4 {
        o[i] = -a[i] * r * r;
    }
    for (n, &(i, j)) in HESS.iter().enumerate() {
        o[4 + n] = -a[4 + n] * r * r + 2.0 * a[1 + i] * a[1 + j] * r * r * r;
    }
    o
}

/// Metric quantities shared by all term evaluators at one time level.
pub struct RhsContext<'a> {
    pub geo: &'a GeometryCoeffs,
    grid: SlabGrid,
    st: ScalarField,
    s: ScalarField,
    a: ScalarField,
    bb: ScalarField,
    d1a: ScalarField,
    d2b: ScalarField,
    d3a: ScalarField,
    d3b: ScalarField,
    d1ji: ScalarField,
    d2ji: ScalarField,
    d11ji: ScalarField,
    d22ji: ScalarField,
    d3ji: ScalarField,
    d13ji: ScalarField,
    d23ji: ScalarField,
    p0: ScalarField,
    d3p0: ScalarField,
    d3ji2: ScalarField,
    p1: ScalarField,
    d1p1: ScalarField,
    d3p1: ScalarField,
    p2: ScalarField,
    d2p2: ScalarField,
    d3p2: ScalarField,
    d1aj2: ScalarField,
    d2bj2: ScalarField,
    d3aj2: ScalarField,
    d3bj2: ScalarField,
    /// ∂ᵢα and ∂ᵢβ, i = 1..3.
    dal: [ScalarField; 3],
    dbe: [ScalarField; 3],
    /// Δ_θα, Δ_θβ (moving-domain Laplacian in flat variables).
    lap_al: ScalarField,
    lap_be: ScalarField,
}

/// Everything a Picard step needs from the previous iterate.
#[derive(Clone, Debug)]
pub struct RhsBundle {
    pub f4: ScalarField,
    pub f5: ScalarField,
    pub f: VectorField,
    pub g1: SurfaceField,
    pub g2: SurfaceField,
    pub g3: SurfaceField,
    pub g4: SurfaceField,
}

impl<'a> RhsContext<'a> {
    pub fn new(geo: &'a GeometryCoeffs) -> Self {
        let grid = *geo.grid();
        let n = grid.len();
        let hat = forward_levels(&grid, geo.eta().values());
        const OFFS: [[u32; 3]; 10] =
            [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [2, 0, 0], [0, 2, 0], [0, 0, 2], [1, 1, 0], [1, 0, 1], [0, 1, 1]];
        let bases = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]];
        let mut keys: Vec<[u32; 3]> = bases.iter().flat_map(|m| OFFS.iter().map(move |e| [m[0] + e[0], m[1] + e[1], m[2] + e[2]])).collect();
        keys.sort();
        keys.dedup();
        let fields = extension_derivatives(&grid, &hat, &keys);
        let table: HashMap<[u32; 3], &ScalarField> = keys.iter().copied().zip(fields.iter()).collect();
        let parts: [[&[f64]; 10]; 4] =
            bases.map(|m| OFFS.map(|e| table[&[m[0] + e[0], m[1] + e[1], m[2] + e[2]]].values()));
        let (b, p) = (grid.b, grid.plane());
        let mut one = [0.0; 10];
        one[0] = 1.0;
        const NF: usize = 35;
        let rows: Vec<[f64; NF]> = (0..n)
            .map(|i| {
                let [e0, e1, e2, e3] = parts.map(|q| q.map(|x| x[i]));
                let mut stj = [0.0; 10];
                stj[0] = 1.0 + grid.y(i / p) / b;
                stj[3] = 1.0 / b;
                let al = jmul(&stj, &e1);
                let be = jmul(&stj, &e2);
                let ji = jrecip(&jadd(&jadd(&one, &jscale(&e0, 1.0 / b)), &jmul(&stj, &e3)));
                let a = jmul(&ji, &al);
                let bb = jmul(&ji, &be);
                let ji2 = jmul(&ji, &ji);
                let aj2 = jmul(&al, &ji2);
                let bj2 = jmul(&be, &ji2);
                let s = al[0] * al[0] + be[0] * be[0] + 1.0;
                let p0 = ji[0] * ji[3];
                let m = ji[0] * ji[0] * s - 1.0;
                let lower = -a[1] - bb[2] + a[0] * a[3] + bb[0] * bb[3] + p0;
                let lap = |f: &Jet| {
                    f[4] + f[5] + f[6] + m * f[6] - 2.0 * a[0] * f[8] - 2.0 * bb[0] * f[9] + lower * f[3]
                };
                [
                    s,
                    a[0],
                    bb[0],
                    a[1],
                    bb[2],
                    a[3],
                    bb[3],
                    ji[1],
                    ji[2],
                    ji[4],
                    ji[5],
                    ji[3],
                    ji[8],
                    ji[9],
                    p0,
                    ji[3] * ji[3] + ji[0] * ji[6],
                    ji2[3],
                    a[0] * ji[3],
                    a[1] * ji[3] + a[0] * ji[8],
                    a[3] * ji[3] + a[0] * ji[6],
                    bb[0] * ji[3],
                    bb[2] * ji[3] + bb[0] * ji[9],
                    bb[3] * ji[3] + bb[0] * ji[6],
                    aj2[1],
                    bj2[2],
                    aj2[3],
                    bj2[3],
                    al[1],
                    al[2],
                    al[3],
                    be[1],
                    be[2],
                    be[3],
                    lap(&al),
                    lap(&be),
                ]
            })
            .collect();
        let f = |c: usize| ScalarField::raw(grid, rows.iter().map(|r| r[c]).collect());
        RhsContext {
            geo,
            grid,
            st: stretch(&grid),
            s: f(0),
            a: f(1),
            bb: f(2),
            d1a: f(3),
            d2b: f(4),
            d3a: f(5),
            d3b: f(6),
            d1ji: f(7),
            d2ji: f(8),
            d11ji: f(9),
            d22ji: f(10),
            d3ji: f(11),
            d13ji: f(12),
            d23ji: f(13),
            p0: f(14),
            d3p0: f(15),
            d3ji2: f(16),
            p1: f(17),
            d1p1: f(18),
            d3p1: f(19),
            p2: f(20),
            d2p2: f(21),
            d3p2: f(22),
            d1aj2: f(23),
            d2bj2: f(24),
            d3aj2: f(25),
            d3bj2: f(26),
            dal: [f(27), f(28), f(29)],
            dbe: [f(30), f(31), f(32)],
            lap_al: f(33),
            lap_be: f(34),
        }
    }

    /// F₄ with the lagged density `w_lag` in its leading second-order block.
    pub fn f4(&self, w_lag: &ScalarField, w: &ScalarField, h: &ScalarField, v: &VectorField) -> ScalarField {
        let [w1, w2, w3, w33, w13, w23] = derivs(w, [D::X1, D::X2, D::Z, D::ZZ, D::X1Z, D::X2Z]);
        let [h1, h2, h3, h33, h13, h23] = derivs(h, [D::X1, D::X2, D::Z, D::ZZ, D::X1Z, D::X2Z]);
        let [wl3] = derivs(w_lag, [D::Z]);
        let g = self.geo;
        let (ji, s, a, bb, st) = (g.jinv.values(), self.s.values(), self.a.values(), self.bb.values(), self.st.values());
        let (d1a, d2b, d3a, d3b, p0) = (self.d1a.values(), self.d2b.values(), self.d3a.values(), self.d3b.values(), self.p0.values());
        let et = g.etabar_t.values();
        let (v1, v2, v3) = (v.c[0].values(), v.c[1].values(), v.c[2].values());
        let (wv, wl) = (w.values(), w_lag.values());
        let out = (0..self.grid.len())
            .map(|i| {
                let (w1, w2, w3) = (w1.values()[i], w2.values()[i], w3.values()[i]);
                let (h1, h2, h3) = (h1.values()[i], h2.values()[i], h3.values()[i]);
                let m = ji[i] * ji[i] * s[i] - 1.0;
                let lead = m * (w33.values()[i] + wl3.values()[i] * h3 + wl[i] * h33.values()[i])
                    - 2.0 * a[i] * (w13.values()[i] + wl[i] * h13.values()[i])
                    - 2.0 * bb[i] * (w23.values()[i] + wl[i] * h23.values()[i]);
                let adv = -ji[i] * v1[i] * (w1 - a[i] * w3) - ji[i] * v2[i] * (w2 - bb[i] * w3)
                    - ji[i] * (a[i] * v1[i] + bb[i] * v2[i] + v3[i]) * w3;
                let geom = (-d1a[i] - d2b[i] + a[i] * d3a[i] + bb[i] * d3b[i] + p0[i]) * (w3 + wv[i] * h3);
                let cross = -a[i] * (w1 * h3 + w3 * h1) - bb[i] * (w2 * h3 + w3 * h2);
                let time = ji[i] * w3 * st[i] * et[i];
                lead + adv + geom + cross + time
            })
            .collect();
        ScalarField::raw(self.grid, out)
    }

    pub fn f5(&self, h: &ScalarField, v: &VectorField) -> ScalarField {
        let [h1, h2, h3, h33, h13, h23] = derivs(h, [D::X1, D::X2, D::Z, D::ZZ, D::X1Z, D::X2Z]);
        let g = self.geo;
        let (ji, s, a, bb, st) = (g.jinv.values(), self.s.values(), self.a.values(), self.bb.values(), self.st.values());
        let (d1a, d2b, d3a, d3b, p0) = (self.d1a.values(), self.d2b.values(), self.d3a.values(), self.d3b.values(), self.p0.values());
        let et = g.etabar_t.values();
        let (v1, v2, v3) = (v.c[0].values(), v.c[1].values(), v.c[2].values());
        let out = (0..self.grid.len())
            .map(|i| {
                let (h1, h2, h3) = (h1.values()[i], h2.values()[i], h3.values()[i]);
                let m = ji[i] * ji[i] * s[i] - 1.0;
                let lead = m * h33.values()[i] - 2.0 * a[i] * h13.values()[i] - 2.0 * bb[i] * h23.values()[i];
                let g1 = h1 - a[i] * h3;
                let g2 = h2 - bb[i] * h3;
                let adv = -ji[i] * v1[i] * g1 - ji[i] * v2[i] * g2 - ji[i] * (a[i] * v1[i] + bb[i] * v2[i] + v3[i]) * h3;
                let geom = (-d1a[i] - d2b[i] + a[i] * d3a[i] + bb[i] * d3b[i] + p0[i]) * h3;
                let quad = -g1 * g1 - g2 * g2 - ji[i] * ji[i] * h3 * h3;
                lead + adv + geom + quad + ji[i] * h3 * st[i] * et[i]
            })
            .collect();
        ScalarField::raw(self.grid, out)
    }

    /// F₁ (k = 0) or F₂ (k = 1); F₂ is F₁ with v₁ → v₂, α → β, ∂₁ → ∂₂ in the
    /// potential and pressure blocks.
    fn f12(&self, k: usize, w: &ScalarField, v: &VectorField, grad_q: &VectorField, dphi: &[ScalarField; 3]) -> ScalarField {
        let vk = &v.c[k];
        let [k1, k2, k3, k33, k13, k23] = derivs(vk, [D::X1, D::X2, D::Z, D::ZZ, D::X1Z, D::X2Z]);
        let uk = self.geo.jinv.mul(vk);
        let [u1, u2, u3] = derivs(&uk, [D::X1, D::X2, D::Z]);
        let g = self.geo;
        let (ji, j, s, a, bb, st) = (g.jinv.values(), g.j.values(), self.s.values(), self.a.values(), self.bb.values(), self.st.values());
        let (al, be) = (g.alpha.values(), g.beta.values());
        let ak = if k == 0 { al } else { be };
        let (d1ji, d2ji, d11ji, d22ji, d3ji, d13ji, d23ji) = (
            self.d1ji.values(),
            self.d2ji.values(),
            self.d11ji.values(),
            self.d22ji.values(),
            self.d3ji.values(),
            self.d13ji.values(),
            self.d23ji.values(),
        );
        let (p0, d3p0, d3ji2) = (self.p0.values(), self.d3p0.values(), self.d3ji2.values());
        let (p1, d1p1, d3p1, p2, d2p2, d3p2) =
            (self.p1.values(), self.d1p1.values(), self.d3p1.values(), self.p2.values(), self.d2p2.values(), self.d3p2.values());
        let (d1aj2, d2bj2, d3aj2, d3bj2) = (self.d1aj2.values(), self.d2bj2.values(), self.d3aj2.values(), self.d3bj2.values());
        let (et, et3) = (g.etabar_t.values(), g.etabar_t_d[2].values());
        let b = self.grid.b;
        let (v1, v2, v3, vv, wv) = (v.c[0].values(), v.c[1].values(), v.c[2].values(), vk.values(), w.values());
        let (qk, q3) = (grad_q.c[k].values(), grad_q.c[2].values());
        let (phik, phi3) = (dphi[k].values(), dphi[2].values());
        let out = (0..self.grid.len())
            .map(|i| {
                let (x1, x2, x3) = (k1.values()[i], k2.values()[i], k3.values()[i]);
                let m = ji[i] * ji[i] * s[i] - 1.0;
                let vi = vv[i];
                let visc = m * k33.values()[i] - 2.0 * a[i] * k13.values()[i] - 2.0 * bb[i] * k23.values()[i]
                    + 2.0 * j[i] * d1ji[i] * x1
                    + j[i] * d11ji[i] * vi
                    + 2.0 * j[i] * d2ji[i] * x2
                    + j[i] * d22ji[i] * vi
                    + d3p0[i] * vi
                    + p0[i] * x3
                    + d3ji2[i] * x3
                    - j[i] * (d1p1[i] * vi + p1[i] * x1)
                    - j[i] * d1aj2[i] * x3
                    - j[i] * (d2p2[i] * vi + p2[i] * x2)
                    - j[i] * d2bj2[i] * x3
                    - al[i] * (x3 * d1ji[i] + vi * d13ji[i])
                    - al[i] * d3ji[i] * x1
                    - be[i] * (x3 * d2ji[i] + vi * d23ji[i])
                    - be[i] * d3ji[i] * x2
                    + al[i] * (d3p1[i] * vi + p1[i] * x3)
                    + al[i] * d3aj2[i] * x3
                    + be[i] * (d3p2[i] * vi + p2[i] * x3)
                    + be[i] * d3bj2[i] * x3;
                let adv = -v1[i] * u1.values()[i] - v2[i] * u2.values()[i] - v3[i] * u3.values()[i];
                let time = ji[i] * vi * (et[i] / b + et3[i] * st[i]) + u3.values()[i] * st[i] * et[i];
                let pres = wv[i] * ak[i] * phi3[i] + wv[i] * (1.0 - j[i]) * phik[i] + ak[i] * q3[i] + (1.0 - j[i]) * qk[i];
                visc + adv + time + pres
            })
            .collect();
        ScalarField::raw(self.grid, out)
    }

    fn f3(&self, w: &ScalarField, v: &VectorField, grad_q: &VectorField, dphi: &[ScalarField; 3]) -> ScalarField {
        let [z1, z2, z3, z33, z13, z23] = derivs(&v.c[2], [D::X1, D::X2, D::Z, D::ZZ, D::X1Z, D::X2Z]);
        let g = self.geo;
        let u1 = g.jinv.mul(&v.c[0]);
        let u2 = g.jinv.mul(&v.c[1]);
        let du1 = derivs(&u1, [D::X1, D::X2, D::Z]);
        let du2 = derivs(&u2, [D::X1, D::X2, D::Z]);
        let (ji, s, a, bb, st) = (g.jinv.values(), self.s.values(), self.a.values(), self.bb.values(), self.st.values());
        let (al, be) = (g.alpha.values(), g.beta.values());
        let (d1a, d2b, d3a, d3b, p0) = (self.d1a.values(), self.d2b.values(), self.d3a.values(), self.d3b.values(), self.p0.values());
        let [al1, al2, al3] = self.dal.each_ref().map(|f| f.values());
        let [be1, be2, be3] = self.dbe.each_ref().map(|f| f.values());
        let (lal, lbe) = (self.lap_al.values(), self.lap_be.values());
        let (et, et1, et2) = (g.etabar_t.values(), g.etabar_t_d[0].values(), g.etabar_t_d[1].values());
        let (v1, v2, v3, wv) = (v.c[0].values(), v.c[1].values(), v.c[2].values(), w.values());
        let (q1, q2, q3) = (grad_q.c[0].values(), grad_q.c[1].values(), grad_q.c[2].values());
        let (f1, f2, f3) = (dphi[0].values(), dphi[1].values(), dphi[2].values());
        let out = (0..self.grid.len())
            .map(|i| {
                let (x1, x2, x3) = (z1.values()[i], z2.values()[i], z3.values()[i]);
                let m = ji[i] * ji[i] * s[i] - 1.0;
                let visc = m * z33.values()[i] - 2.0 * a[i] * z13.values()[i] - 2.0 * bb[i] * z23.values()[i]
                    + (p0[i] - d1a[i] - d2b[i] + a[i] * d3a[i] + bb[i] * d3b[i]) * x3;
                let mgrad = |d: &[ScalarField; 3]| {
                    let (g1, g2, g3) = (d[0].values()[i], d[1].values()[i], d[2].values()[i]);
                    [g1 - a[i] * g3, g2 - bb[i] * g3, ji[i] * g3]
                };
                let (m1, m2) = (mgrad(&du1), mgrad(&du2));
                let ma = [al1[i] - a[i] * al3[i], al2[i] - bb[i] * al3[i], ji[i] * al3[i]];
                let mb = [be1[i] - a[i] * be3[i], be2[i] - bb[i] * be3[i], ji[i] * be3[i]];
                let dot = |x: [f64; 3], y: [f64; 3]| x[0] * y[0] + x[1] * y[1] + x[2] * y[2];
                let cross = u1.values()[i] * lal[i] + 2.0 * dot(ma, m1) + u2.values()[i] * lbe[i] + 2.0 * dot(mb, m2);
                let j2 = ji[i] * ji[i];
                let adv = v1[i] * ji[i] * x1
                    + v2[i] * ji[i] * x2
                    + v3[i] * ji[i] * x3
                    + v1[i] * v1[i] * j2 * al1[i]
                    + v1[i] * v2[i] * j2 * (be1[i] + al2[i])
                    + v2[i] * v2[i] * j2 * be2[i]
                    + v1[i] * v3[i] * j2 * al3[i]
                    + v2[i] * v3[i] * j2 * be3[i];
                let time = ji[i] * (v1[i] * ji[i] * al3[i] + v2[i] * ji[i] * be3[i] + x3) * st[i] * et[i]
                    - ji[i] * v1[i] * st[i] * et1[i]
                    - ji[i] * v2[i] * st[i] * et2[i];
                let c = 1.0 - ji[i] * s[i];
                let pres = wv[i] * (al[i] * f1[i] + be[i] * f2[i] + c * f3[i]) + al[i] * q1[i] + be[i] * q2[i] + c * q3[i];
                visc + cross - adv + time + pres
            })
            .collect();
        ScalarField::raw(self.grid, out)
    }

    pub fn f123(&self, w: &ScalarField, v: &VectorField, grad_q: &VectorField, phi: &ScalarField) -> VectorField {
        let dphi = derivs(phi, [D::X1, D::X2, D::Z]);
        VectorField {
            c: [self.f12(0, w, v, grad_q, &dphi), self.f12(1, w, v, grad_q, &dphi), self.f3(w, v, grad_q, &dphi)],
        }
    }

    /// Traces on Γ of U = (J⁻¹v₁, J⁻¹v₂, J⁻¹αv₁ + J⁻¹βv₂ + v₃) and their
    /// boundary derivatives D₁ = ∂₁ − J⁻¹∂₁η∂₃, D₂ = ∂₂ − J⁻¹∂₂η∂₃, D₃ = J⁻¹∂₃.
    /// Returns `du[i][j] = D_j U_i` on Γ.
    fn surface_velocity_gradient(&self, v: &VectorField) -> [[SurfaceField; 3]; 3] {
        let g = self.geo;
        let u = crate::transform::velocity_from_flat(v, g);
        let jt = g.jinv.top();
        let [e1, e2] = [&g.eta_d[0], &g.eta_d[1]];
        u.c.each_ref().map(|ui| {
            let [x1, x2] = sderivs(&ui.top(), [D::X1, D::X2]);
            let x3 = dz_top(ui);
            let n = self.grid.plane();
            let mk = |f: &dyn Fn(usize) -> f64| SurfaceField::raw(self.grid, (0..n).map(f).collect());
            let (jv, e1v, e2v) = (jt.values(), e1.values(), e2.values());
            [
                mk(&|i| x1.values()[i] - jv[i] * e1v[i] * x3.values()[i]),
                mk(&|i| x2.values()[i] - jv[i] * e2v[i] * x3.values()[i]),
                mk(&|i| jv[i] * x3.values()[i]),
            ]
        })
    }

    fn flat_shear(v: &VectorField, k: usize) -> SurfaceField {
        let [dk] = sderivs(&v.c[2].top(), [if k == 0 { D::X1 } else { D::X2 }]);
        dz_top(&v.c[k]).add(&dk)
    }

    fn g12(&self, k: usize, v: &VectorField, du: &[[SurfaceField; 3]; 3]) -> SurfaceField {
        let n = self.grid.plane();
        let base = Self::flat_shear(v, k);
        let (e1, e2) = (self.geo.eta_d[0].values(), self.geo.eta_d[1].values());
        let d = |i: usize, j: usize, p: usize| du[i][j].values()[p];
        let sym = |i: usize, j: usize, p: usize| d(i, j, p) + d(j, i, p);
        let (kk, ll) = if k == 0 { (0, 1) } else { (1, 0) };
        let out = (0..n)
            .map(|p| {
                let (ek, el) = if k == 0 { (e1[p], e2[p]) } else { (e2[p], e1[p]) };
                base.values()[p] - (1.0 - ek * ek) * sym(kk, 2, p) + 2.0 * ek * d(kk, kk, p) + el * sym(kk, ll, p)
                    + ek * el * sym(ll, 2, p)
                    - 2.0 * ek * d(2, 2, p)
            })
            .collect();
        SurfaceField::raw(self.grid, out)
    }

    pub fn g1(&self, v: &VectorField) -> SurfaceField {
        self.g12(0, v, &self.surface_velocity_gradient(v))
    }

    pub fn g2(&self, v: &VectorField) -> SurfaceField {
        self.g12(1, v, &self.surface_velocity_gradient(v))
    }

    /// G₃ = σ[∇₀·(∇₀η/√(1+|∇₀η|²)) − Δ₀η] + G̃₃.
    pub fn g3(&self, v: &VectorField, sigma: f64) -> SurfaceField {
        let du = self.surface_velocity_gradient(v);
        let n = self.grid.plane();
        let (e1, e2) = (self.geo.eta_d[0].values(), self.geo.eta_d[1].values());
        let v33 = dz_top(&v.c[2]);
        let d = |i: usize, j: usize, p: usize| du[i][j].values()[p];
        let gt: Vec<f64> = (0..n)
            .map(|p| {
                let nn = 1.0 + e1[p] * e1[p] + e2[p] * e2[p];
                (2.0 * nn * v33.values()[p]
                    - 2.0 * e1[p] * e1[p] * d(0, 0, p)
                    - 2.0 * e2[p] * e2[p] * d(1, 1, p)
                    - 2.0 * d(2, 2, p)
                    - 2.0 * e1[p] * e2[p] * (d(0, 1, p) + d(1, 0, p))
                    + 2.0 * e1[p] * (d(0, 2, p) + d(2, 0, p))
                    + 2.0 * e2[p] * (d(1, 2, p) + d(2, 1, p)))
                    / nn
            })
            .collect();
        let curv = curvature_excess(self.geo.eta());
        SurfaceField::raw(self.grid, (0..n).map(|p| sigma * curv.values()[p] + gt[p]).collect())
    }

    /// G₄ = J(α²+β²+1)⁻¹[∂₁η(∂₁w + w∂₁h) + ∂₂η(∂₂w + w∂₂h)] on Γ.
    pub fn g4(&self, w: &ScalarField, h: &ScalarField) -> SurfaceField {
        let (wt, ht) = (w.top(), h.top());
        let [w1, w2] = sderivs(&wt, [D::X1, D::X2]);
        let [h1, h2] = sderivs(&ht, [D::X1, D::X2]);
        let jt = self.geo.j.top();
        let (e1, e2) = (self.geo.eta_d[0].values(), self.geo.eta_d[1].values());
        let out = (0..self.grid.plane())
            .map(|p| {
                let s = 1.0 + e1[p] * e1[p] + e2[p] * e2[p];
                let wv = wt.values()[p];
                jt.values()[p] / s
                    * (e1[p] * (w1.values()[p] + wv * h1.values()[p]) + e2[p] * (w2.values()[p] + wv * h2.values()[p]))
            })
            .collect();
        SurfaceField::raw(self.grid, out)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn bundle(
        &self,
        w_lag: &ScalarField,
        w: &ScalarField,
        h: &ScalarField,
        v: &VectorField,
        grad_q: &VectorField,
        phi: &ScalarField,
        sigma: f64,
    ) -> RhsBundle {
        let du = self.surface_velocity_gradient(v);
        RhsBundle {
            f4: self.f4(w_lag, w, h, v),
            f5: self.f5(h, v),
            f: self.f123(w, v, grad_q, phi),
            g1: self.g12(0, v, &du),
            g2: self.g12(1, v, &du),
            g3: self.g3(v, sigma),
            g4: self.g4(w, h),
        }
    }
}

/// Flat tangential stresses ∂₃v₁ + ∂₁v₃ and ∂₃v₂ + ∂₂v₃ on Γ.
pub fn tangential_stress(v: &VectorField) -> [SurfaceField; 2] {
    [RhsContext::flat_shear(v, 0), RhsContext::flat_shear(v, 1)]
}

/// ∇₀·(∇₀η/√(1+|∇₀η|²)) − Δ₀η.
pub fn curvature_excess(eta: &SurfaceField) -> SurfaceField {
    let g = *eta.grid();
    let [e1, e2, lap1, lap2] = sderivs(eta, [D::X1, D::X2, D::X11, D::X22]);
    let n = g.plane();
    let r: Vec<f64> = (0..n).map(|p| 1.0 / (1.0 + e1.values()[p].powi(2) + e2.values()[p].powi(2)).sqrt()).collect();
    let n1 = SurfaceField::raw(g, (0..n).map(|p| e1.values()[p] * r[p]).collect());
    let n2 = SurfaceField::raw(g, (0..n).map(|p| e2.values()[p] * r[p]).collect());
    let [d1] = sderivs(&n1, [D::X1]);
    let [d2] = sderivs(&n2, [D::X2]);
    SurfaceField::raw(g, (0..n).map(|p| d1.values()[p] + d2.values()[p] - lap1.values()[p] - lap2.values()[p]).collect())
}

pub fn eval_f4(w_lag: &ScalarField, w: &ScalarField, h: &ScalarField, v: &VectorField, g: &GeometryCoeffs) -> ScalarField {
    RhsContext::new(g).f4(w_lag, w, h, v)
}

pub fn eval_f5(h: &ScalarField, v: &VectorField, g: &GeometryCoeffs) -> ScalarField {
    RhsContext::new(g).f5(h, v)
}

pub fn eval_f123(w: &ScalarField, v: &VectorField, grad_q: &VectorField, phi: &ScalarField, g: &GeometryCoeffs) -> VectorField {
    RhsContext::new(g).f123(w, v, grad_q, phi)
}

pub fn eval_g1(v: &VectorField, g: &GeometryCoeffs) -> SurfaceField {
    RhsContext::new(g).g1(v)
}

pub fn eval_g2(v: &VectorField, g: &GeometryCoeffs) -> SurfaceField {
    RhsContext::new(g).g2(v)
}

pub fn eval_g3(v: &VectorField, g: &GeometryCoeffs, sigma: f64) -> SurfaceField {
    RhsContext::new(g).g3(v, sigma)
}

pub fn eval_g4(w: &ScalarField, h: &ScalarField, g: &GeometryCoeffs) -> SurfaceField {
    RhsContext::new(g).g4(w, h)
}

/// Gradient of a scalar with the grid operators.
pub fn gradient(q: &ScalarField) -> VectorField {
    let [a, b, c] = derivs(q, [D::X1, D::X2, D::Z]);
    VectorField { c: [a, b, c] }
}
