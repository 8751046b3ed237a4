//! Real and complex fields on masked grids.

use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{LandisError, Result};
use crate::grid::Grid;

pub trait FieldValue:
    Copy + Default + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + 'static
{
    fn magnitude(&self) -> f64;
    fn finite(&self) -> bool;
}

impl FieldValue for f64 {
    fn magnitude(&self) -> f64 {
        self.abs()
    }
    fn finite(&self) -> bool {
        self.is_finite()
    }
}

impl FieldValue for C64 {
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Values on the masked nodes of a grid.
///
/// `margin` is the ring depth below which values are meaningless: every
/// difference operator adds one ring. Such nodes hold the default value
/// and are skipped by norms and quadrature.
#[derive(Clone, Debug)]
pub struct Field<T> {
    grid: Arc<Grid>,
    values: Vec<T>,
    margin: u16,
}

pub type ScalarField = Field<f64>;
pub type ComplexField = Field<C64>;

impl<T: FieldValue> Field<T> {
    pub fn new(grid: Arc<Grid>, values: Vec<T>) -> Result<Self> {
        Self::with_margin(grid, values, 0)
    }

    pub fn with_margin(grid: Arc<Grid>, values: Vec<T>, margin: u16) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(LandisError::InvalidArgument(format!(
                "{} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = (0..values.len()).find(|&k| grid.depth(k) >= margin && !values[k].finite()) {
            let p = grid.point(k);
            return Err(LandisError::Invariant(format!("non-finite value at ({}, {})", p.re, p.im)));
        }
        Ok(Self { grid, values, margin })
    }

    /// Internal constructor for operator outputs; finiteness is the caller's job.
    pub(crate) fn raw(grid: Arc<Grid>, values: Vec<T>, margin: u16) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values, margin }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(C64) -> T) -> Result<Self> {
        let values = (0..grid.len()).map(|k| f(grid.point(k))).collect();
        Self::new(grid, values)
    }

    pub fn constant(grid: Arc<Grid>, c: T) -> Self {
        let n = grid.len();
        Self { grid, values: vec![c; n], margin: 0 }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn margin(&self) -> u16 {
        self.margin
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_valid(&self, k: usize) -> bool {
        self.grid.depth(k) >= self.margin
    }

    pub fn get(&self, k: usize) -> T {
        self.values[k]
    }

    /// Value at the node nearest `p`, which must be valid.
    pub fn at(&self, p: C64) -> Result<T> {
        match self.grid.nearest_node(p) {
            Some(k) if self.is_valid(k) => Ok(self.values[k]),
            _ => Err(LandisError::OutsideGrid(p.re, p.im)),
        }
    }

    pub fn map<U: FieldValue>(&self, f: impl Fn(T) -> U) -> Field<U> {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, &v)| if self.is_valid(k) { f(v) } else { U::default() })
            .collect();
        Field::raw(self.grid.clone(), values, self.margin)
    }

    /// `f(point, value)` on valid nodes.
    pub fn map_with_point<U: FieldValue>(&self, f: impl Fn(C64, T) -> U) -> Field<U> {
        let values = (0..self.len())
            .map(|k| if self.is_valid(k) { f(self.grid.point(k), self.values[k]) } else { U::default() })
            .collect();
        Field::raw(self.grid.clone(), values, self.margin)
    }

    pub fn zip_with<S: FieldValue, U: FieldValue>(&self, other: &Field<S>, f: impl Fn(T, S) -> U) -> Result<Field<U>> {
        if !self.grid.same_as(&other.grid) {
            return Err(LandisError::GridMismatch);
        }
        let margin = self.margin.max(other.margin);
        let values = (0..self.len())
            .map(|k| {
                if self.grid.depth(k) >= margin {
                    f(self.values[k], other.values[k])
                } else {
                    U::default()
                }
            })
            .collect();
        Ok(Field::raw(self.grid.clone(), values, margin))
    }

    /// Raise the margin (values below it are zeroed).
    pub fn with_min_margin(mut self, margin: u16) -> Self {
        if margin > self.margin {
            self.margin = margin;
            for k in 0..self.values.len() {
                if self.grid.depth(k) < margin {
                    self.values[k] = T::default();
                }
            }
        }
        self
    }

    /// Max |value| over valid nodes in the closed disc.
    pub fn sup_norm(&self, c: C64, r: f64) -> Result<f64> {
        let mut best: Option<f64> = None;
        self.grid.for_each_in_disc(c, r, |k| {
            if self.is_valid(k) {
                let m = self.values[k].magnitude();
                best = Some(best.map_or(m, |b: f64| b.max(m)));
            }
        });
        best.ok_or(LandisError::EmptyDisc(c.re, c.im, r))
    }

    /// Max |value| over all valid nodes.
    pub fn sup(&self) -> f64 {
        (0..self.len())
            .filter(|&k| self.is_valid(k))
            .map(|k| self.values[k].magnitude())
            .fold(0.0, f64::max)
    }

    /// Node of maximal |value| in the closed disc.
    pub fn argmax_in_disc(&self, c: C64, r: f64) -> Result<usize> {
        let mut best: Option<(usize, f64)> = None;
        self.grid.for_each_in_disc(c, r, |k| {
            if self.is_valid(k) {
                let m = self.values[k].magnitude();
                if best.map_or(true, |(_, b)| m > b) {
                    best = Some((k, m));
                }
            }
        });
        best.map(|(k, _)| k).ok_or(LandisError::EmptyDisc(c.re, c.im, r))
    }

    /// Nodal quadrature `Σ f(z_k, v_k)·h²` over valid nodes where `keep` holds.
    pub fn integrate(&self, keep: impl Fn(C64) -> bool, f: impl Fn(C64, T) -> f64) -> f64 {
        let h2 = self.grid.h() * self.grid.h();
        (0..self.len())
            .filter(|&k| self.is_valid(k))
            .map(|k| {
                let p = self.grid.point(k);
                if keep(p) {
                    f(p, self.values[k])
                } else {
                    0.0
                }
            })
            .sum::<f64>()
            * h2
    }

    /// Copy onto a sub-disc of the same lattice. All new nodes must be valid here.
    pub fn restrict(&self, center: C64, radius: f64) -> Result<Self> {
        let g = Arc::new(self.grid.restrict(center, radius)?);
        let mut values = Vec::with_capacity(g.len());
        for k in 0..g.len() {
            let (kx, ky) = g.lattice_index(k);
            let m = self.grid.node_at(kx, ky).expect("restrict checked containment");
            if !self.is_valid(m) {
                let p = g.point(k);
                return Err(LandisError::Precondition(format!(
                    "restriction reaches invalid ring at ({}, {})",
                    p.re, p.im
                )));
            }
            values.push(self.values[m]);
        }
        Ok(Self { grid: g, values, margin: 0 })
    }

    /// Subsample onto the stride-`s` sub-lattice (margin reset to 0; invalid
    /// parent nodes are dropped by shrinking the disc).
    pub fn coarsen(&self, stride: usize) -> Result<Self> {
        if stride == 1 {
            return Ok(self.clone());
        }
        let shrink = self.margin as f64 * self.grid.h();
        let coarse = Grid::on_lattice_like(&self.grid, stride, shrink)?;
        let g = Arc::new(coarse);
        let values = (0..g.len())
            .map(|k| {
                let (kx, ky) = g.lattice_index(k);
                let m = self.grid.node_at(kx * stride as i64, ky * stride as i64);
                m.filter(|&m| self.is_valid(m)).map(|m| self.values[m]).unwrap_or_default()
            })
            .collect();
        Ok(Self { grid: g, values, margin: 0 })
    }

    /// Bilinear interpolation at an arbitrary point.
    pub fn sample(&self, p: C64) -> Option<T> {
        let (c, tx, ty) = self.grid.cell(p)?;
        if c.iter().any(|&k| !self.is_valid(k)) {
            return None;
        }
        let v = |k: usize| self.values[c[k]];
        Some((v(0) * (1.0 - tx) + v(1) * tx) * (1.0 - ty) + (v(2) * (1.0 - tx) + v(3) * tx) * ty)
    }

    /// Interpolate onto another grid; `fallback` evaluates points no cell covers.
    pub fn resample_onto(&self, grid: Arc<Grid>, fallback: impl Fn(C64) -> Option<T>) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for k in 0..grid.len() {
            let p = grid.point(k);
            let v = self
                .sample(p)
                .or_else(|| fallback(p))
                .ok_or(LandisError::OutsideGrid(p.re, p.im))?;
            values.push(v);
        }
        Self::new(grid, values)
    }
}

impl Grid {
    /// Stride-`s` sub-lattice over a disc shrunk by `shrink`.
    pub(crate) fn on_lattice_like(g: &Grid, stride: usize, shrink: f64) -> Result<Grid> {
        let coarse = g.coarsen(stride)?;
        let r = g.radius() - shrink;
        if r <= 0.0 {
            return Err(LandisError::InvalidGrid("coarsened disc is empty".into()));
        }
        coarse.restrict(g.center(), r)
    }
}

impl ScalarField {
    pub fn to_complex(&self) -> ComplexField {
        self.map(|v| C64::new(v, 0.0))
    }

    pub fn min_in_disc(&self, c: C64, r: f64) -> Result<f64> {
        let mut best: Option<f64> = None;
        self.grid.for_each_in_disc(c, r, |k| {
            if self.is_valid(k) {
                let v = self.values[k];
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        });
        best.ok_or(LandisError::EmptyDisc(c.re, c.im, r))
    }

    pub fn max_in_disc(&self, c: C64, r: f64) -> Result<f64> {
        let mut best: Option<f64> = None;
        self.grid.for_each_in_disc(c, r, |k| {
            if self.is_valid(k) {
                let v = self.values[k];
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            }
        });
        best.ok_or(LandisError::EmptyDisc(c.re, c.im, r))
    }
}

impl ComplexField {
    pub fn re(&self) -> ScalarField {
        self.map(|v| v.re)
    }

    pub fn im(&self) -> ScalarField {
        self.map(|v| v.im)
    }

    pub fn abs(&self) -> ScalarField {
        self.map(|v| v.norm())
    }
}
