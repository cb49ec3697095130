//! The flattening map θ(x₁,x₂,y,t) = (x₁, x₂, η̄ + y(1 + η̄/b)) and the field
//! transforms it induces.

use crate::error::{CnsError, Result};
use crate::grid::{ScalarField, SlabGrid, SurfaceField, VectorField};
use crate::harmonic::{extend_with_derivatives, HarmonicExtension};
use crate::ops::{sderivs, D};

#[derive(Clone, Debug)]
pub struct GeometryCoeffs {
    pub alpha: ScalarField,
    pub beta: ScalarField,
    pub j: ScalarField,
    pub jinv: ScalarField,
    /// Third row of ξ = (∂θ)⁻¹: (−J⁻¹α, −J⁻¹β, J⁻¹). The first two rows are (1,0,0), (0,1,0).
    pub xi: [ScalarField; 3],
    pub etabar: HarmonicExtension,
    pub etabar_t: ScalarField,
    /// ∂₁η̄, ∂₂η̄, ∂₃η̄.
    pub etabar_d: [ScalarField; 3],
    /// ∂₁η̄_t, ∂₂η̄_t, ∂₃η̄_t.
    pub etabar_t_d: [ScalarField; 3],
    /// ∂₁η, ∂₂η on Γ.
    pub eta_d: [SurfaceField; 2],
}

impl GeometryCoeffs {
    pub fn grid(&self) -> &SlabGrid {
        self.j.grid()
    }

    pub fn eta(&self) -> &SurfaceField {
        &self.etabar.source
    }
}

/// 1 + y/b at every node.
pub(crate) fn stretch(g: &SlabGrid) -> ScalarField {
    ScalarField::from_fn(*g, |_, _, y| 1.0 + y / g.b)
}

pub fn geometry_coeffs(eta: &SurfaceField, eta_t: &SurfaceField) -> Result<GeometryCoeffs> {
    let g = *eta.grid();
    if !g.same_space(eta_t.grid()) {
        return Err(CnsError::GridMismatch("eta and eta_t"));
    }
    let (etabar, etabar_d) = extend_with_derivatives(eta);
    let (ext_t, etabar_t_d) = extend_with_derivatives(eta_t);
    let s = stretch(&g);
    let alpha = s.mul(&etabar_d[0]);
    let beta = s.mul(&etabar_d[1]);
    let mut j = ScalarField::zeros(g);
    for (n, jv) in j.values_mut().iter_mut().enumerate() {
        *jv = 1.0 + etabar.values.values()[n] / g.b + etabar_d[2].values()[n] * s.values()[n];
    }
    if let Some((node, &jmin)) = j.values().iter().enumerate().find(|(_, &x)| !(x > 0.0)) {
        return Err(CnsError::SingularMap { jmin, node });
    }
    let jinv = j.map(|x| 1.0 / x);
    let xi = [
        jinv.mul(&alpha).scale(-1.0),
        jinv.mul(&beta).scale(-1.0),
        jinv.clone(),
    ];
    let eta_d = sderivs(eta, [D::X1, D::X2]);
    Ok(GeometryCoeffs {
        alpha,
        beta,
        j,
        jinv,
        xi,
        etabar,
        etabar_t: ext_t.values,
        etabar_d,
        etabar_t_d,
        eta_d,
    })
}

/// Pointwise (min J, max J).
pub fn jacobian_bounds(g: &GeometryCoeffs) -> (f64, f64) {
    (g.j.min(), g.j.max())
}

/// Samples of u∘θ from flat v: u₁ = J⁻¹v₁, u₂ = J⁻¹v₂, u₃ = J⁻¹αv₁ + J⁻¹βv₂ + v₃.
pub fn velocity_from_flat(v: &VectorField, g: &GeometryCoeffs) -> VectorField {
    let ji = g.jinv.values();
    let (a, b) = (g.alpha.values(), g.beta.values());
    let [v1, v2, v3] = [0, 1, 2].map(|i| v.c[i].values());
    let grid = *v.grid();
    let u1: Vec<f64> = (0..grid.len()).map(|n| ji[n] * v1[n]).collect();
    let u2: Vec<f64> = (0..grid.len()).map(|n| ji[n] * v2[n]).collect();
    let u3: Vec<f64> = (0..grid.len()).map(|n| ji[n] * (a[n] * v1[n] + b[n] * v2[n]) + v3[n]).collect();
    VectorField { c: [ScalarField::raw(grid, u1), ScalarField::raw(grid, u2), ScalarField::raw(grid, u3)] }
}

/// Inverse of [`velocity_from_flat`]: v₁ = Ju₁, v₂ = Ju₂, v₃ = u₃ − αu₁ − βu₂.
pub fn velocity_to_flat(u: &VectorField, g: &GeometryCoeffs) -> VectorField {
    let j = g.j.values();
    let (a, b) = (g.alpha.values(), g.beta.values());
    let [u1, u2, u3] = [0, 1, 2].map(|i| u.c[i].values());
    let grid = *u.grid();
    let v1: Vec<f64> = (0..grid.len()).map(|n| j[n] * u1[n]).collect();
    let v2: Vec<f64> = (0..grid.len()).map(|n| j[n] * u2[n]).collect();
    let v3: Vec<f64> = (0..grid.len()).map(|n| u3[n] - a[n] * u1[n] - b[n] * u2[n]).collect();
    VectorField { c: [ScalarField::raw(grid, v1), ScalarField::raw(grid, v2), ScalarField::raw(grid, v3)] }
}

/// c̃ = −ln c + ln ĉ.
pub fn log_transform(c: &ScalarField, c_hat: f64) -> Result<ScalarField> {
    if !(c_hat > 0.0) {
        return Err(CnsError::Domain(format!("c_hat must be positive, got {c_hat}")));
    }
    if let Some(x) = c.values().iter().find(|&&x| !(x > 0.0)) {
        return Err(CnsError::Domain(format!("log transform needs c > 0, found {x}")));
    }
    Ok(c.map(|x| -x.ln() + c_hat.ln()))
}

/// c = ĉ·exp(−h).
pub fn inverse_log_transform(h: &ScalarField, c_hat: f64) -> ScalarField {
    h.map(|x| c_hat * (-x).exp())
}

/// Vertical coordinate of θ at every node: η̄ + y(1 + η̄/b).
pub fn theta3(ext: &HarmonicExtension) -> ScalarField {
    let g = *ext.values.grid();
    let s = ScalarField::from_fn(g, |_, _, y| y);
    ext.values.zip(&s, |e, y| e + y * (1.0 + e / g.b))
}

/// Samples f(θ(x₁,x₂,y), t) for an analytic f(x₁, x₂, x₃, t).
pub fn compose_with_theta(f: impl Fn(f64, f64, f64, f64) -> f64, eta: &SurfaceField, t: f64) -> ScalarField {
    let g = *eta.grid();
    let th = theta3(&crate::harmonic::extend(eta));
    let mut out = ScalarField::zeros(g);
    for k in 0..g.nz {
        for i1 in 0..g.n1 {
            for i2 in 0..g.n2 {
                let n = g.idx(i1, i2, k);
                out.values_mut()[n] = f(g.x1(i1), g.x2(i2), th.values()[n], t);
            }
        }
    }
    out
}

/// The flattened unknowns at one time.
#[derive(Clone, Debug)]
pub struct FlatState {
    pub w: ScalarField,
    pub h: ScalarField,
    pub v: VectorField,
    pub q: ScalarField,
    pub eta: SurfaceField,
    pub t: f64,
}

impl FlatState {
    pub fn zeros(grid: SlabGrid) -> Self {
        FlatState {
            w: ScalarField::zeros(grid),
            h: ScalarField::zeros(grid),
            v: VectorField::zeros(grid),
            q: ScalarField::zeros(grid),
            eta: SurfaceField::zeros(grid),
            t: 0.0,
        }
    }
}

/// (min J, max J) for the map built from η alone.
pub fn jacobian_range(eta: &SurfaceField) -> (f64, f64) {
    let g = *eta.grid();
    let (ext, d) = extend_with_derivatives(eta);
    let p = g.plane();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (n, (e, d3)) in ext.values.values().iter().zip(d[2].values()).enumerate() {
        let j = 1.0 + e / g.b + d3 * (1.0 + g.y(n / p) / g.b);
        lo = lo.min(j);
        hi = hi.max(j);
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_surface_is_identity() {
        let g = SlabGrid::cube(8, 5).unwrap();
        let z = SurfaceField::zeros(g);
        let geo = geometry_coeffs(&z, &z).unwrap();
        assert_eq!(jacobian_bounds(&geo), (1.0, 1.0));
        assert_eq!(geo.alpha.max_abs(), 0.0);
        assert_eq!(geo.xi[2].min(), 1.0);
    }

    #[test]
    fn collapsing_surface_rejected() {
        let g = SlabGrid::cube(8, 5).unwrap();
        let eta = SurfaceField::constant(g, -1.5);
        assert!(matches!(geometry_coeffs(&eta, &SurfaceField::zeros(g)), Err(CnsError::SingularMap { .. })));
    }

    #[test]
    fn log_transform_domain() {
        let g = SlabGrid::cube(4, 3).unwrap();
        assert!(log_transform(&ScalarField::zeros(g), 1.0).is_err());
        let h = log_transform(&ScalarField::constant(g, 2.0 / std::f64::consts::E), 2.0).unwrap();
        assert!((h.max() - 1.0).abs() < 1e-15 && (h.min() - 1.0).abs() < 1e-15);
    }
}
