//! The symmetric-gradient form [v, u] = ½∫(∂ⱼvᵢ + ∂ᵢvⱼ)(∂ⱼuᵢ + ∂ᵢuⱼ).

use crate::grid::{ScalarField, VectorField};
use crate::nonlinear::gradient;
use crate::ops::integrate;

pub fn korn_form(v: &VectorField, u: &VectorField) -> f64 {
    let gv = v.c.each_ref().map(gradient);
    let gu = u.c.each_ref().map(gradient);
    let mut acc = ScalarField::zeros(*v.grid());
    for i in 0..3 {
        for j in 0..3 {
            let sv = gv[i].c[j].add(&gv[j].c[i]);
            let su = gu[i].c[j].add(&gu[j].c[i]);
            acc.axpy(0.5, &sv.mul(&su));
        }
    }
    integrate(&acc)
}
