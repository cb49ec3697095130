//! The slab `-b < y < 0` on a periodic horizontal torus, and the sampled
//! fields that live on it.
//!
//! Storage is level-major: index `k * N1 * N2 + i1 * N2 + i2`, so every
//! horizontal plane is contiguous and vertical stencils act plane-wise.

use crate::error::{CnsError, Result};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlabGrid {
    pub n1: usize,
    pub n2: usize,
    pub nz: usize,
    pub l1: f64,
    pub l2: f64,
    pub b: f64,
    pub nt: usize,
    pub dt: f64,
}

impl SlabGrid {
    pub fn new(n1: usize, n2: usize, nz: usize, l1: f64, l2: f64, b: f64) -> Result<Self> {
        let g = SlabGrid { n1, n2, nz, l1, l2, b, nt: 0, dt: 1.0 };
        g.validate()?;
        Ok(g)
    }

    /// Square 2π-periodic slab of depth 1.
    pub fn cube(n: usize, nz: usize) -> Result<Self> {
        Self::new(n, n, nz, 2.0 * PI, 2.0 * PI, 1.0)
    }

    pub fn with_time(mut self, dt: f64, nt: usize) -> Result<Self> {
        self.dt = dt;
        self.nt = nt;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, n) in [("N1", self.n1), ("N2", self.n2)] {
            if n < 4 || n % 2 != 0 {
                return Err(CnsError::Grid(format!("{name} must be ≥4 and even")));
            }
        }
        if self.nz < 3 {
            return Err(CnsError::Grid("Nz must be ≥3".into()));
        }
        for (name, x) in [("L1", self.l1), ("L2", self.l2), ("b", self.b), ("dt", self.dt)] {
            if !(x.is_finite() && x > 0.0) {
                return Err(CnsError::Grid(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    pub fn t_final(&self) -> f64 {
        self.nt as f64 * self.dt
    }

    pub fn hz(&self) -> f64 {
        self.b / (self.nz - 1) as f64
    }

    pub fn y(&self, k: usize) -> f64 {
        if k + 1 == self.nz {
            0.0
        } else {
            -self.b + k as f64 * self.hz()
        }
    }

    pub fn x1(&self, i: usize) -> f64 {
        i as f64 * self.l1 / self.n1 as f64
    }

    pub fn x2(&self, i: usize) -> f64 {
        i as f64 * self.l2 / self.n2 as f64
    }

    pub fn plane(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn len(&self) -> usize {
        self.plane() * self.nz
    }

    pub fn idx(&self, i1: usize, i2: usize, k: usize) -> usize {
        (k * self.n1 + i1) * self.n2 + i2
    }

    pub fn same_space(&self, o: &SlabGrid) -> bool {
        self.n1 == o.n1 && self.n2 == o.n2 && self.nz == o.nz && self.l1 == o.l1 && self.l2 == o.l2 && self.b == o.b
    }

    /// Signed integer index of FFT bin `i` out of `n`; the Nyquist bin maps to 0.
    fn signed_bin(i: usize, n: usize) -> f64 {
        if 2 * i < n {
            i as f64
        } else if 2 * i == n {
            0.0
        } else {
            i as f64 - n as f64
        }
    }

    /// Derivative wavenumber along axis 1. The Nyquist bin carries no
    /// derivative, so `d^2 = d∘d` holds exactly on the grid.
    pub fn k1(&self, i: usize) -> f64 {
        2.0 * PI / self.l1 * Self::signed_bin(i, self.n1)
    }

    pub fn k2(&self, i: usize) -> f64 {
        2.0 * PI / self.l2 * Self::signed_bin(i, self.n2)
    }

    pub fn ksq(&self, i1: usize, i2: usize) -> f64 {
        let (a, b) = (self.k1(i1), self.k2(i2));
        a * a + b * b
    }

    /// Trapezoid weights in y (sum to b).
    pub fn trapezoid(&self) -> Vec<f64> {
        let h = self.hz();
        (0..self.nz).map(|k| if k == 0 || k + 1 == self.nz { 0.5 * h } else { h }).collect()
    }

    pub fn cell_area(&self) -> f64 {
        self.l1 * self.l2 / self.plane() as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: SlabGrid,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: SlabGrid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(CnsError::Grid(format!("expected {} values, got {}", grid.len(), data.len())));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(CnsError::NonFinite("scalar field"));
        }
        Ok(ScalarField { grid, data })
    }

    pub(crate) fn raw(grid: SlabGrid, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), grid.len());
        ScalarField { grid, data }
    }

    pub fn zeros(grid: SlabGrid) -> Self {
        ScalarField { grid, data: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: SlabGrid, c: f64) -> Self {
        ScalarField { grid, data: vec![c; grid.len()] }
    }

    /// Sample `f(x1, x2, y)` at every node.
    pub fn from_fn(grid: SlabGrid, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for k in 0..grid.nz {
            let y = grid.y(k);
            for i1 in 0..grid.n1 {
                let x1 = grid.x1(i1);
                for i2 in 0..grid.n2 {
                    data.push(f(x1, grid.x2(i2), y));
                }
            }
        }
        ScalarField { grid, data }
    }

    pub fn grid(&self) -> &SlabGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_values(self) -> Vec<f64> {
        self.data
    }

    pub fn at(&self, i1: usize, i2: usize, k: usize) -> f64 {
        self.data[self.grid.idx(i1, i2, k)]
    }

    pub fn level(&self, k: usize) -> &[f64] {
        let p = self.grid.plane();
        &self.data[k * p..(k + 1) * p]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut [f64] {
        let p = self.grid.plane();
        &mut self.data[k * p..(k + 1) * p]
    }

    /// Trace on Γ (y = 0).
    pub fn top(&self) -> SurfaceField {
        SurfaceField::raw(self.grid, self.level(self.grid.nz - 1).to_vec())
    }

    /// Trace on the bottom S_B (y = −b).
    pub fn bottom(&self) -> SurfaceField {
        SurfaceField::raw(self.grid, self.level(0).to_vec())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField { grid: self.grid, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn zip(&self, o: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert!(self.grid.same_space(&o.grid));
        ScalarField { grid: self.grid, data: self.data.iter().zip(&o.data).map(|(&a, &b)| f(a, b)).collect() }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|x| c * x)
    }

    pub fn add(&self, o: &ScalarField) -> Self {
        self.zip(o, |a, b| a + b)
    }

    pub fn sub(&self, o: &ScalarField) -> Self {
        self.zip(o, |a, b| a - b)
    }

    pub fn mul(&self, o: &ScalarField) -> Self {
        self.zip(o, |a, b| a * b)
    }

    pub fn axpy(&mut self, a: f64, x: &ScalarField) {
        for (s, &v) in self.data.iter_mut().zip(&x.data) {
            *s += a * v;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub c: [ScalarField; 3],
}

impl VectorField {
    pub fn new(c1: ScalarField, c2: ScalarField, c3: ScalarField) -> Result<Self> {
        if !(c1.grid.same_space(&c2.grid) && c1.grid.same_space(&c3.grid)) {
            return Err(CnsError::GridMismatch("vector components"));
        }
        Ok(VectorField { c: [c1, c2, c3] })
    }

    pub fn zeros(grid: SlabGrid) -> Self {
        VectorField { c: [ScalarField::zeros(grid), ScalarField::zeros(grid), ScalarField::zeros(grid)] }
    }

    pub fn from_fn(grid: SlabGrid, f: impl Fn(f64, f64, f64) -> [f64; 3]) -> Self {
        let c = [0, 1, 2].map(|i| ScalarField::from_fn(grid, |a, b, y| f(a, b, y)[i]));
        VectorField { c }
    }

    pub fn grid(&self) -> &SlabGrid {
        self.c[0].grid()
    }

    pub fn scale(&self, s: f64) -> Self {
        VectorField { c: [self.c[0].scale(s), self.c[1].scale(s), self.c[2].scale(s)] }
    }

    pub fn sub(&self, o: &VectorField) -> Self {
        VectorField { c: [self.c[0].sub(&o.c[0]), self.c[1].sub(&o.c[1]), self.c[2].sub(&o.c[2])] }
    }

    pub fn add(&self, o: &VectorField) -> Self {
        VectorField { c: [self.c[0].add(&o.c[0]), self.c[1].add(&o.c[1]), self.c[2].add(&o.c[2])] }
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().map(|f| f.max_abs()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceField {
    grid: SlabGrid,
    data: Vec<f64>,
}

impl SurfaceField {
    pub fn new(grid: SlabGrid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.plane() {
            return Err(CnsError::Grid(format!("expected {} values, got {}", grid.plane(), data.len())));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(CnsError::NonFinite("surface field"));
        }
        Ok(SurfaceField { grid, data })
    }

    pub(crate) fn raw(grid: SlabGrid, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), grid.plane());
        SurfaceField { grid, data }
    }

    pub fn zeros(grid: SlabGrid) -> Self {
        SurfaceField { grid, data: vec![0.0; grid.plane()] }
    }

    pub fn constant(grid: SlabGrid, c: f64) -> Self {
        SurfaceField { grid, data: vec![c; grid.plane()] }
    }

    pub fn from_fn(grid: SlabGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.plane());
        for i1 in 0..grid.n1 {
            for i2 in 0..grid.n2 {
                data.push(f(grid.x1(i1), grid.x2(i2)));
            }
        }
        SurfaceField { grid, data }
    }

    pub fn grid(&self) -> &SlabGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn at(&self, i1: usize, i2: usize) -> f64 {
        self.data[i1 * self.grid.n2 + i2]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        SurfaceField { grid: self.grid, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn zip(&self, o: &SurfaceField, f: impl Fn(f64, f64) -> f64) -> Self {
        SurfaceField { grid: self.grid, data: self.data.iter().zip(&o.data).map(|(&a, &b)| f(a, b)).collect() }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|x| c * x)
    }

    pub fn add(&self, o: &SurfaceField) -> Self {
        self.zip(o, |a, b| a + b)
    }

    pub fn sub(&self, o: &SurfaceField) -> Self {
        self.zip(o, |a, b| a - b)
    }

    pub fn mul(&self, o: &SurfaceField) -> Self {
        self.zip(o, |a, b| a * b)
    }
}
