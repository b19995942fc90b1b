//! Discretisation of the closed unit disk.
//!
//! The square `[-1,1]²` is split into `n × n` cells of side `h = 2/n`. A cell
//! belongs to the disk when its centre satisfies `|c| ≤ 1`; every field in the
//! crate lives on those masked cells and integrals use the midpoint rule.
//! With `n` even the centres have half-integer coordinates (in units of `h`),
//! so the mask is symmetric under `z ↦ -z`, `z ↦ z̄` and `z ↦ iz`, and odd
//! moments vanish exactly.

use std::fmt;
use std::io::{Read, Write};
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible number of cells per axis.
pub const MIN_CELLS: usize = 8;

/// Uniform grid over `[-1,1]²` with a cell-centre disk mask.
#[derive(Clone, PartialEq)]
pub struct DiskGrid {
    n: usize,
    h: f64,
    /// Flat index `j * n + i` of every masked cell, row-major in `(j, i)`.
    cells: Vec<usize>,
    /// Inverse of `cells`; `usize::MAX` for cells outside the disk.
    slot: Vec<usize>,
    centers: Vec<Complex64>,
}

impl fmt::Debug for DiskGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiskGrid")
            .field("n", &self.n)
            .field("h", &self.h)
            .field("masked", &self.cells.len())
            .finish()
    }
}

impl DiskGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < MIN_CELLS || !n.is_multiple_of(2) {
            return Err(Error::InvalidGridSize(n));
        }
        let h = 2.0 / n as f64;
        let mut cells = Vec::new();
        let mut centers = Vec::new();
        let mut slot = vec![usize::MAX; n * n];
        for j in 0..n {
            for i in 0..n {
                let c = Self::center_of(n, h, i, j);
                if c.norm_sqr() <= 1.0 {
                    slot[j * n + i] = cells.len();
                    cells.push(j * n + i);
                    centers.push(c);
                }
            }
        }
        Ok(Self {
            n,
            h,
            cells,
            slot,
            centers,
        })
    }

    fn center_of(n: usize, h: f64, i: usize, j: usize) -> Complex64 {
        debug_assert!(i < n && j < n);
        Complex64::new((i as f64 + 0.5) * h - 1.0, (j as f64 + 0.5) * h - 1.0)
    }

    /// Cells per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Cell side length.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn cell_area(&self) -> f64 {
        self.h * self.h
    }

    /// Number of masked cells.
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Total area of the masked cells; tends to π.
    pub fn area(&self) -> f64 {
        self.len() as f64 * self.cell_area()
    }

    /// Centres of masked cells in storage order.
    pub fn centers(&self) -> &[Complex64] {
        &self.centers
    }

    /// Column/row `(i, j)` of the masked cell stored at `slot`.
    pub fn cell_indices(&self, slot: usize) -> (usize, usize) {
        let flat = self.cells[slot];
        (flat % self.n, flat / self.n)
    }

    /// Storage slot of cell `(i, j)` if that cell is masked.
    pub fn slot_of(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.n || j >= self.n {
            return None;
        }
        match self.slot[j * self.n + i] {
            usize::MAX => None,
            s => Some(s),
        }
    }

    /// Column/row of the grid cell containing `z`, masked or not. Points on a
    /// shared edge belong to the cell above/right of it.
    pub fn cell_containing(&self, z: Complex64) -> Option<(usize, usize)> {
        let fi = ((z.re + 1.0) / self.h).floor();
        let fj = ((z.im + 1.0) / self.h).floor();
        if fi < 0.0 || fj < 0.0 || fi >= self.n as f64 || fj >= self.n as f64 {
            return None;
        }
        Some((fi as usize, fj as usize))
    }

    /// Storage slot of the masked cell containing `z`.
    pub fn masked_cell_containing(&self, z: Complex64) -> Option<usize> {
        self.cell_containing(z)
            .and_then(|(i, j)| self.slot_of(i, j))
    }
}

/// Build a shared grid. Errors unless `n` is even and at least 8.
pub fn build_grid(n: usize) -> Result<Arc<DiskGrid>> {
    DiskGrid::new(n).map(Arc::new)
}

/// Integrability exponent for `L^q` norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    /// Accepts `q ≥ 1`; `f64::INFINITY` maps to the sup norm.
    pub fn new(q: f64) -> Result<Self> {
        if q == f64::INFINITY {
            Ok(Exponent::Infinity)
        } else if q.is_finite() && q >= 1.0 {
            Ok(Exponent::Finite(q))
        } else {
            Err(Error::InvalidExponent { q, min: 1.0 })
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Exponent::Finite(q) => q,
            Exponent::Infinity => f64::INFINITY,
        }
    }
}

/// Complex field sampled on the masked cells of a [`DiskGrid`].
#[derive(Clone, Debug)]
pub struct GridFunction {
    grid: Arc<DiskGrid>,
    values: Vec<Complex64>,
}

impl PartialEq for GridFunction {
    fn eq(&self, other: &Self) -> bool {
        self.grid.n == other.grid.n && self.values == other.values
    }
}

impl GridFunction {
    pub fn zeros(grid: &Arc<DiskGrid>) -> Self {
        Self::constant(grid, Complex64::new(0.0, 0.0))
    }

    pub fn constant(grid: &Arc<DiskGrid>, value: Complex64) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: vec![value; grid.len()],
        }
    }

    /// Sample `f` at every masked cell centre.
    pub fn from_fn(grid: &Arc<DiskGrid>, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: grid.centers().iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn from_values(grid: &Arc<DiskGrid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid with {} masked cells",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub fn grid(&self) -> &Arc<DiskGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Value on cell `(i, j)`; zero off the disk.
    pub fn at_cell(&self, i: usize, j: usize) -> Complex64 {
        self.grid
            .slot_of(i, j)
            .map_or(Complex64::new(0.0, 0.0), |s| self.values[s])
    }

    /// Piecewise-constant evaluation: value of the cell containing `z`, zero
    /// outside the support.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.grid
            .masked_cell_containing(z)
            .map_or(Complex64::new(0.0, 0.0), |s| self.values[s])
    }

    /// Apply `f(centre, value)` cell-wise.
    pub fn map(&self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        let values = self
            .grid
            .centers()
            .iter()
            .zip(&self.values)
            .map(|(&z, &v)| f(z, v))
            .collect();
        Self {
            grid: Arc::clone(&self.grid),
            values,
        }
    }

    pub fn zip_with(
        &self,
        other: &GridFunction,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Self {
        assert!(
            self.same_grid(other),
            "grid functions live on different grids"
        );
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self {
            grid: Arc::clone(&self.grid),
            values,
        }
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid.n == other.grid.n
    }

    /// Midpoint quadrature `Σ f(c) h²` over the masked cells.
    pub fn integrate(&self) -> Complex64 {
        let s: Complex64 = self.values.iter().sum();
        s * self.grid.cell_area()
    }

    /// Discrete `L^q` norm; `max |f|` for the sup norm.
    pub fn norm(&self, q: Exponent) -> f64 {
        match q {
            Exponent::Infinity => self.sup_norm(),
            Exponent::Finite(2.0) => {
                let s: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
                (s * self.grid.cell_area()).sqrt()
            }
            Exponent::Finite(q) => {
                let s: f64 = self.values.iter().map(|v| v.norm().powf(q)).sum();
                (s * self.grid.cell_area()).powf(1.0 / q)
            }
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Write the field as CSV rows `x,y,re,im`, one per masked cell.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "re", "im"])?;
        for (c, v) in self.grid.centers().iter().zip(&self.values) {
            w.serialize((c.re, c.im, v.re, v.im))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a CSV dump produced by [`GridFunction::write_csv`]. Rows must
    /// match the masked cells of `grid` exactly (same count, same centres).
    pub fn read_csv<R: Read>(grid: &Arc<DiskGrid>, input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut values = vec![None; grid.len()];
        let tol = 1e-9 * grid.h();
        for row in r.deserialize() {
            let (x, y, re, im): (f64, f64, f64, f64) = row?;
            let z = Complex64::new(x, y);
            let slot = grid
                .masked_cell_containing(z)
                .filter(|&s| (grid.centers()[s] - z).norm() <= tol)
                .ok_or_else(|| {
                    Error::GridMismatch(format!(
                        "point ({x}, {y}) is not a masked cell centre of the n = {} grid",
                        grid.n()
                    ))
                })?;
            if values[slot].replace(Complex64::new(re, im)).is_some() {
                return Err(Error::GridMismatch(format!("duplicate cell ({x}, {y})")));
            }
        }
        let missing = values.iter().filter(|v| v.is_none()).count();
        if missing > 0 {
            return Err(Error::GridMismatch(format!(
                "{missing} masked cells of the n = {} grid have no value",
                grid.n()
            )));
        }
        Self::from_values(grid, values.into_iter().map(Option::unwrap).collect())
    }
}

/// Midpoint-rule integral of `f` over the disk.
pub fn integrate(f: &GridFunction) -> Complex64 {
    f.integrate()
}

/// `L^q` norm of `f`; rejects `q < 1`. Pass `f64::INFINITY` for the sup norm.
pub fn norm(f: &GridFunction, q: f64) -> Result<f64> {
    Ok(f.norm(Exponent::new(q)?))
}

impl Add for &GridFunction {
    type Output = GridFunction;
    fn add(self, rhs: &GridFunction) -> GridFunction {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &GridFunction {
    type Output = GridFunction;
    fn sub(self, rhs: &GridFunction) -> GridFunction {
        self.zip_with(rhs, |a, b| a - b)
    }
}

/// Pointwise product.
impl Mul for &GridFunction {
    type Output = GridFunction;
    fn mul(self, rhs: &GridFunction) -> GridFunction {
        self.zip_with(rhs, |a, b| a * b)
    }
}

impl Mul<Complex64> for &GridFunction {
    type Output = GridFunction;
    fn mul(self, rhs: Complex64) -> GridFunction {
        self.map(|_, v| v * rhs)
    }
}

impl Mul<f64> for &GridFunction {
    type Output = GridFunction;
    fn mul(self, rhs: f64) -> GridFunction {
        self.map(|_, v| v * rhs)
    }
}

impl Neg for &GridFunction {
    type Output = GridFunction;
    fn neg(self) -> GridFunction {
        self.map(|_, v| -v)
    }
}
