//! Horizontal 2D FFTs, level by level. Coefficients are normalised so the
//! k = 0 entry is the horizontal mean.

use crate::grid::SlabGrid;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

pub(crate) type C64 = Complex64;

pub(crate) struct Plans {
    n1: usize,
    n2: usize,
    fwd1: Arc<dyn Fft<f64>>,
    fwd2: Arc<dyn Fft<f64>>,
    inv1: Arc<dyn Fft<f64>>,
    inv2: Arc<dyn Fft<f64>>,
}

static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Plans>>>> = OnceLock::new();

pub(crate) fn plans(n1: usize, n2: usize) -> Arc<Plans> {
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
    map.entry((n1, n2))
        .or_insert_with(|| {
            let mut p = FftPlanner::new();
            Arc::new(Plans {
                n1,
                n2,
                fwd1: p.plan_fft_forward(n1),
                fwd2: p.plan_fft_forward(n2),
                inv1: p.plan_fft_inverse(n1),
                inv2: p.plan_fft_inverse(n2),
            })
        })
        .clone()
}

impl Plans {
    fn transpose(&self, src: &[C64], dst: &mut [C64], rows: usize, cols: usize) {
        for r in 0..rows {
            for c in 0..cols {
                dst[c * rows + r] = src[r * cols + c];
            }
        }
    }

    fn run(&self, plane: &mut [C64], tmp: &mut [C64], forward: bool) {
        let (a, b) = if forward { (&self.fwd2, &self.fwd1) } else { (&self.inv2, &self.inv1) };
        a.process(plane);
        self.transpose(plane, tmp, self.n1, self.n2);
        b.process(tmp);
        self.transpose(tmp, plane, self.n2, self.n1);
    }

    pub(crate) fn forward(&self, plane: &mut [C64], tmp: &mut [C64]) {
        self.run(plane, tmp, true);
        let s = 1.0 / (self.n1 * self.n2) as f64;
        plane.iter_mut().for_each(|z| *z *= s);
    }

    pub(crate) fn inverse(&self, plane: &mut [C64], tmp: &mut [C64]) {
        self.run(plane, tmp, false);
    }
}

/// Index of the bin holding wavenumber `-k` for the bin at `j`.
pub(crate) fn mirror(j: usize, n: usize) -> usize {
    (n - j) % n
}

/// Forward transform of every level of a real array.
pub(crate) fn forward_levels(g: &SlabGrid, data: &[f64]) -> Vec<C64> {
    let p = g.plane();
    let plans = plans(g.n1, g.n2);
    let mut out: Vec<C64> = data.iter().map(|&x| C64::new(x, 0.0)).collect();
    out.par_chunks_mut(p).for_each_init(
        || vec![C64::new(0.0, 0.0); p],
        |tmp, plane| plans.forward(plane, tmp),
    );
    out
}

/// Forward transforms of two real arrays at the cost of one complex transform.
pub(crate) fn forward_levels_pair(g: &SlabGrid, a: &[f64], b: &[f64]) -> (Vec<C64>, Vec<C64>) {
    let p = g.plane();
    let plans = plans(g.n1, g.n2);
    let mut z: Vec<C64> = a.iter().zip(b).map(|(&x, &y)| C64::new(x, y)).collect();
    z.par_chunks_mut(p).for_each_init(
        || vec![C64::new(0.0, 0.0); p],
        |tmp, plane| plans.forward(plane, tmp),
    );
    let mut sa = vec![C64::new(0.0, 0.0); z.len()];
    let mut sb = vec![C64::new(0.0, 0.0); z.len()];
    let (n1, n2) = (g.n1, g.n2);
    sa.par_chunks_mut(p).zip(sb.par_chunks_mut(p)).zip(z.par_chunks(p)).for_each(|((pa, pb), pz)| {
        for j1 in 0..n1 {
            let m1 = mirror(j1, n1);
            for j2 in 0..n2 {
                let zk = pz[j1 * n2 + j2];
                let zm = pz[m1 * n2 + mirror(j2, n2)].conj();
                pa[j1 * n2 + j2] = (zk + zm) * 0.5;
                pb[j1 * n2 + j2] = (zk - zm) * C64::new(0.0, -0.5);
            }
        }
    });
    (sa, sb)
}

/// Inverse transform keeping the real part.
pub(crate) fn inverse_levels(g: &SlabGrid, spec: &[C64]) -> Vec<f64> {
    let p = g.plane();
    let plans = plans(g.n1, g.n2);
    let mut z = spec.to_vec();
    z.par_chunks_mut(p).for_each_init(
        || vec![C64::new(0.0, 0.0); p],
        |tmp, plane| plans.inverse(plane, tmp),
    );
    z.into_iter().map(|c| c.re).collect()
}

/// Inverse transforms of two Hermitian spectra in one complex pass.
pub(crate) fn inverse_levels_pair(g: &SlabGrid, a: &[C64], b: &[C64]) -> (Vec<f64>, Vec<f64>) {
    let p = g.plane();
    let plans = plans(g.n1, g.n2);
    let mut z: Vec<C64> = a.iter().zip(b).map(|(&x, &y)| x + C64::new(0.0, 1.0) * y).collect();
    z.par_chunks_mut(p).for_each_init(
        || vec![C64::new(0.0, 0.0); p],
        |tmp, plane| plans.inverse(plane, tmp),
    );
    z.into_iter().map(|c| (c.re, c.im)).unzip()
}
