//! Linear sub-solvers: the parabolic pair for (w, h), free-surface Stokes
//! for (v, q, η), the stationary Stokes problem and the projection P.
//!
//! Every solver works mode by mode: horizontal Fourier transform, then a
//! banded boundary-value problem in y per wavenumber.

pub mod korn;
pub mod parabolic;
pub mod projection;
pub mod stokes;

pub use korn::korn_form;
pub use parabolic::{solve_parabolic_pair, ParabolicProblem, ParabolicSolver};
pub use projection::leray_projection;
pub use stokes::{solve_stationary_stokes, solve_stokes_evolution, solve_stokes_step, StokesProblem, StokesSolver};

use crate::spectral::C64;

/// Nodes and weights of the first vertical derivative at node `k`.
pub(crate) fn dz1_row(k: usize, nz: usize, h: f64) -> [(usize, f64); 3] {
    let r = 0.5 / h;
    if k == 0 {
        [(0, -3.0 * r), (1, 4.0 * r), (2, -r)]
    } else if k + 1 == nz {
        [(k, 3.0 * r), (k - 1, -4.0 * r), (k - 2, r)]
    } else {
        [(k + 1, r), (k - 1, -r), (k, 0.0)]
    }
}

/// Nodes and weights of the second vertical derivative at an interior node.
pub(crate) fn dz2_row(k: usize, h: f64) -> [(usize, f64); 3] {
    let r = 1.0 / (h * h);
    [(k - 1, r), (k, -2.0 * r), (k + 1, r)]
}

/// Gathers the column of bin `i` from level-major spectra.
pub(crate) fn column(spec: &[C64], plane: usize, i: usize) -> Vec<C64> {
    spec.iter().skip(i).step_by(plane).copied().collect()
}

/// Solves a real factorised system for a complex right-hand side.
pub(crate) fn solve_complex(m: &crate::banded::Banded, b: &[C64]) -> Vec<C64> {
    let mut re: Vec<f64> = b.iter().map(|z| z.re).collect();
    let mut im: Vec<f64> = b.iter().map(|z| z.im).collect();
    m.solve(&mut re);
    m.solve(&mut im);
    re.into_iter().zip(im).map(|(a, b)| C64::new(a, b)).collect()
}

/// One step of iterative refinement on top of `solve_complex`.
pub(crate) fn solve_refined((a, lu): &(crate::banded::Banded, crate::banded::Banded), b: &[C64]) -> Vec<C64> {
    let mut x = solve_complex(lu, b);
    let re: Vec<f64> = x.iter().map(|z| z.re).collect();
    let im: Vec<f64> = x.iter().map(|z| z.im).collect();
    let (ar, ai) = (a.mul(&re), a.mul(&im));
    let r: Vec<C64> = b.iter().enumerate().map(|(i, z)| C64::new(z.re - ar[i], z.im - ai[i])).collect();
    let d = solve_complex(lu, &r);
    x.iter_mut().zip(d).for_each(|(a, b)| *a += b);
    x
}
