//! The projection P onto fields orthogonal to {∇ρ : ρ = 0 on Γ}.

use super::{column, dz1_row};
use crate::banded::Banded;
use crate::grid::{ScalarField, VectorField};
use crate::ops::dz_vec;
use crate::spectral::{forward_levels, inverse_levels, inverse_levels_pair, C64};
use rayon::prelude::*;

/// u − ∇ρ with −|K|²ρ̂ + ∂₃(∂₃ρ̂) = (∇·u)^ at interior nodes, ρ = 0 on Γ and
/// ∂₃ρ = u₃ on S_B. The composite ∂₃∘∂₃ makes the discrete divergence of
/// the result vanish at every interior node.
pub fn leray_projection(u: &VectorField) -> VectorField {
    let g = *u.grid();
    let (nz, p, h) = (g.nz, g.plane(), g.hz());
    let s = u.c.each_ref().map(|c| forward_levels(&g, c.values()));
    let d3 = dz_vec(&g, &s[2]);
    let cols: Vec<[Vec<C64>; 3]> = (0..p)
        .into_par_iter()
        .map(|i| {
            let (a, b) = (g.k1(i / g.n2), g.k2(i % g.n2));
            let k2 = a * a + b * b;
            let (u1, u2, u3) = (column(&s[0], p, i), column(&s[1], p, i), column(&s[2], p, i));
            if k2 == 0.0 {
                return [u1, u2, vec![C64::new(0.0, 0.0); nz]];
            }
            let mut m = Banded::new(nz, 3, 3);
            for (j, c) in dz1_row(0, nz, h) {
                m.add(0, j, c);
            }
            let r = 0.5 / h;
            for n in 1..nz - 1 {
                m.add(n, n, -k2);
                for (j, c) in dz1_row(n + 1, nz, h) {
                    m.add(n, j, r * c);
                }
                for (j, c) in dz1_row(n - 1, nz, h) {
                    m.add(n, j, -r * c);
                }
            }
            m.add(nz - 1, nz - 1, 1.0);
            m.factor().expect("projection system is nonsingular for K != 0");
            let d3c = column(&d3, p, i);
            let mut rhs = vec![C64::new(0.0, 0.0); nz];
            rhs[0] = u3[0];
            for n in 1..nz - 1 {
                rhs[n] = C64::new(0.0, a) * u1[n] + C64::new(0.0, b) * u2[n] + d3c[n];
            }
            let rho = super::solve_complex(&m, &rhs);
            let drho: Vec<C64> = (0..nz).map(|n| dz1_row(n, nz, h).iter().map(|&(j, c)| rho[j] * c).sum()).collect();
            [
                (0..nz).map(|n| u1[n] - C64::new(0.0, a) * rho[n]).collect(),
                (0..nz).map(|n| u2[n] - C64::new(0.0, b) * rho[n]).collect(),
                (0..nz).map(|n| u3[n] - drho[n]).collect(),
            ]
        })
        .collect();
    let mut spec: [Vec<C64>; 3] = std::array::from_fn(|_| vec![C64::new(0.0, 0.0); g.len()]);
    for (i, c) in cols.iter().enumerate() {
        for (sp, col) in spec.iter_mut().zip(c) {
            for n in 0..nz {
                sp[n * p + i] = col[n];
            }
        }
    }
    let (a, b) = inverse_levels_pair(&g, &spec[0], &spec[1]);
    let c = inverse_levels(&g, &spec[2]);
    VectorField { c: [ScalarField::raw(g, a), ScalarField::raw(g, b), ScalarField::raw(g, c)] }
}
