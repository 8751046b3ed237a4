//! Uniform lattices masked to closed discs.
//!
//! Node coordinates are `anchor + k·h` for integer `k`, so restricted and
//! coarsened grids reproduce the parent's coordinates bit for bit.

use std::collections::VecDeque;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{LandisError, Result};

const NONE: u32 = u32::MAX;

/// Disc discretization request: `n` cells across the diameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub center: (f64, f64),
    pub radius: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn new(center: C64, radius: f64, n: usize) -> Result<Self> {
        if n < 16 {
            return Err(LandisError::GridTooCoarse(format!("n = {n} < 16")));
        }
        if !(radius > 0.0 && radius.is_finite()) || !center.re.is_finite() || !center.im.is_finite() {
            return Err(LandisError::InvalidGrid(format!("radius {radius}")));
        }
        Ok(Self { center: (center.re, center.im), radius, n })
    }

    /// Disc of radius `radius` about the origin.
    pub fn disc(radius: f64, n: usize) -> Result<Self> {
        Self::new(C64::new(0.0, 0.0), radius, n)
    }

    pub fn h(&self) -> f64 {
        2.0 * self.radius / self.n as f64
    }

    pub fn center(&self) -> C64 {
        C64::new(self.center.0, self.center.1)
    }

    pub fn build(&self) -> Arc<Grid> {
        let h = self.h();
        // Odd n puts the center between nodes.
        let shift = if self.n % 2 == 1 { 0.5 * h } else { 0.0 };
        let c = self.center();
        let anchor = C64::new(c.re - shift, c.im - shift);
        Arc::new(Grid::on_lattice(anchor, h, c, self.radius))
    }
}

#[derive(Clone, Copy, Debug)]
struct RowSpan {
    first: u32,
    i_first: u32,
    len: u32,
}

/// Masked lattice. Nodes are numbered row-major: `y` outer, `x` inner.
#[derive(Debug)]
pub struct Grid {
    center: C64,
    radius: f64,
    h: f64,
    anchor: C64,
    k0: (i64, i64),
    nx: usize,
    ny: usize,
    node_of: Vec<u32>,
    ij: Vec<(u32, u32)>,
    depth: Vec<u16>,
    nbr: Vec<[u32; 4]>,
    rows: Vec<RowSpan>,
}

/// Neighbor slots in `Grid::neighbors`.
pub const EAST: usize = 0;
pub const WEST: usize = 1;
pub const NORTH: usize = 2;
pub const SOUTH: usize = 3;

impl Grid {
    fn eps(h: f64) -> f64 {
        1e-9 * h
    }

    pub(crate) fn on_lattice(anchor: C64, h: f64, center: C64, radius: f64) -> Self {
        let e = Self::eps(h);
        let kx_lo = ((center.re - radius - anchor.re) / h - 1e-9).ceil() as i64;
        let kx_hi = ((center.re + radius - anchor.re) / h + 1e-9).floor() as i64;
        let ky_lo = ((center.im - radius - anchor.im) / h - 1e-9).ceil() as i64;
        let ky_hi = ((center.im + radius - anchor.im) / h + 1e-9).floor() as i64;
        let nx = (kx_hi - kx_lo + 1).max(0) as usize;
        let ny = (ky_hi - ky_lo + 1).max(0) as usize;
        let rr = (radius + e) * (radius + e);

        let mut node_of = vec![NONE; nx * ny];
        let mut ij = Vec::new();
        let mut rows = Vec::with_capacity(ny);
        for j in 0..ny {
            let y = anchor.im + (ky_lo + j as i64) as f64 * h;
            let dy = y - center.im;
            let mut span = RowSpan { first: ij.len() as u32, i_first: 0, len: 0 };
            for i in 0..nx {
                let x = anchor.re + (kx_lo + i as i64) as f64 * h;
                let dx = x - center.re;
                if dx * dx + dy * dy <= rr {
                    if span.len == 0 {
                        span.i_first = i as u32;
                    }
                    span.len += 1;
                    node_of[j * nx + i] = ij.len() as u32;
                    ij.push((i as u32, j as u32));
                }
            }
            rows.push(span);
        }

        let n = ij.len();
        let mut nbr = vec![[NONE; 4]; n];
        for (k, &(i, j)) in ij.iter().enumerate() {
            let (i, j) = (i as usize, j as usize);
            let at = |ii: isize, jj: isize| -> u32 {
                if ii < 0 || jj < 0 || ii as usize >= nx || jj as usize >= ny {
                    NONE
                } else {
                    node_of[jj as usize * nx + ii as usize]
                }
            };
            nbr[k] = [
                at(i as isize + 1, j as isize),
                at(i as isize - 1, j as isize),
                at(i as isize, j as isize + 1),
                at(i as isize, j as isize - 1),
            ];
        }

        // Multi-source BFS: depth 0 on nodes missing a neighbor.
        let mut depth = vec![u16::MAX; n];
        let mut queue = VecDeque::new();
        for k in 0..n {
            if nbr[k].iter().any(|&m| m == NONE) {
                depth[k] = 0;
                queue.push_back(k);
            }
        }
        while let Some(k) = queue.pop_front() {
            let d = depth[k];
            for &m in &nbr[k] {
                if m != NONE && depth[m as usize] == u16::MAX {
                    depth[m as usize] = d.saturating_add(1);
                    queue.push_back(m as usize);
                }
            }
        }

        Self {
            center,
            radius,
            h,
            anchor,
            k0: (kx_lo, ky_lo),
            nx,
            ny,
            node_of,
            ij,
            depth,
            nbr,
            rows,
        }
    }

    pub fn len(&self) -> usize {
        self.ij.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ij.is_empty()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn center(&self) -> C64 {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Global lattice index of node `k`.
    pub fn lattice_index(&self, k: usize) -> (i64, i64) {
        let (i, j) = self.ij[k];
        (self.k0.0 + i as i64, self.k0.1 + j as i64)
    }

    pub fn point(&self, k: usize) -> C64 {
        let (kx, ky) = self.lattice_index(k);
        C64::new(self.anchor.re + kx as f64 * self.h, self.anchor.im + ky as f64 * self.h)
    }

    pub fn points(&self) -> Vec<C64> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }

    /// Ring depth: 0 on nodes lacking a 4-neighbor, growing inward.
    pub fn depth(&self, k: usize) -> u16 {
        self.depth[k]
    }

    pub fn neighbor(&self, k: usize, slot: usize) -> Option<usize> {
        let m = self.nbr[k][slot];
        (m != NONE).then_some(m as usize)
    }

    pub(crate) fn neighbors_raw(&self, k: usize) -> [u32; 4] {
        self.nbr[k]
    }

    /// Node at global lattice index, if masked.
    pub fn node_at(&self, kx: i64, ky: i64) -> Option<usize> {
        let i = kx - self.k0.0;
        let j = ky - self.k0.1;
        if i < 0 || j < 0 || i as usize >= self.nx || j as usize >= self.ny {
            return None;
        }
        let m = self.node_of[j as usize * self.nx + i as usize];
        (m != NONE).then_some(m as usize)
    }

    /// Continuous lattice coordinates of a point.
    pub fn lattice_coords(&self, p: C64) -> (f64, f64) {
        ((p.re - self.anchor.re) / self.h, (p.im - self.anchor.im) / self.h)
    }

    pub fn nearest_node(&self, p: C64) -> Option<usize> {
        let (fx, fy) = self.lattice_coords(p);
        self.node_at(fx.round() as i64, fy.round() as i64)
    }

    /// Nodes in the closed disc `|z - c| <= r` (with a 1e-9·h tolerance).
    pub fn nodes_in_disc(&self, c: C64, r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_in_disc(c, r, |k| out.push(k));
        out
    }

    pub fn for_each_in_disc(&self, c: C64, r: f64, mut f: impl FnMut(usize)) {
        if r < 0.0 || self.ny == 0 {
            return;
        }
        let rr = r + Self::eps(self.h);
        let rr2 = rr * rr;
        let (_, fy_lo) = self.lattice_coords(C64::new(c.re, c.im - rr));
        let (_, fy_hi) = self.lattice_coords(C64::new(c.re, c.im + rr));
        let j_lo = (fy_lo.ceil() as i64 - self.k0.1).max(0);
        let j_hi = (fy_hi.floor() as i64 - self.k0.1).min(self.ny as i64 - 1);
        for j in j_lo..=j_hi {
            let span = self.rows[j as usize];
            if span.len == 0 {
                continue;
            }
            let y = self.anchor.im + (self.k0.1 + j) as f64 * self.h;
            let dy = y - c.im;
            let rem = rr2 - dy * dy;
            if rem < 0.0 {
                continue;
            }
            let half = rem.sqrt();
            let (fx_lo, _) = self.lattice_coords(C64::new(c.re - half, 0.0));
            let (fx_hi, _) = self.lattice_coords(C64::new(c.re + half, 0.0));
            let i_lo = (fx_lo.ceil() as i64 - self.k0.0).max(span.i_first as i64);
            let i_hi = (fx_hi.floor() as i64 - self.k0.0).min((span.i_first + span.len) as i64 - 1);
            for i in i_lo..=i_hi {
                let k = span.first as usize + (i - span.i_first as i64) as usize;
                let x = self.anchor.re + (self.k0.0 + i) as f64 * self.h;
                let dx = x - c.re;
                if dx * dx + dy * dy <= rr2 {
                    f(k);
                }
            }
        }
    }

    /// Same lattice, smaller disc. Every node of the new disc must be masked here.
    pub fn restrict(&self, center: C64, radius: f64) -> Result<Grid> {
        let g = Grid::on_lattice(self.anchor, self.h, center, radius);
        if g.is_empty() {
            return Err(LandisError::EmptyDisc(center.re, center.im, radius));
        }
        for k in 0..g.len() {
            let (kx, ky) = g.lattice_index(k);
            if self.node_at(kx, ky).is_none() {
                let p = g.point(k);
                return Err(LandisError::OutsideGrid(p.re, p.im));
            }
        }
        Ok(g)
    }

    /// Lattice nodes inside a disc, without containment checks.
    pub(crate) fn restrict_loose(&self, center: C64, radius: f64) -> Grid {
        Grid::on_lattice(self.anchor, self.h, center, radius)
    }

    /// Sub-lattice with spacing `stride·h` sharing the anchor.
    pub fn coarsen(&self, stride: usize) -> Result<Grid> {
        if stride == 0 {
            return Err(LandisError::InvalidArgument("stride 0".into()));
        }
        Ok(Grid::on_lattice(self.anchor, self.h * stride as f64, self.center, self.radius))
    }

    /// True when both grids have identical geometry.
    pub fn same_as(&self, other: &Grid) -> bool {
        std::ptr::eq(self, other)
            || (self.h == other.h
                && self.anchor == other.anchor
                && self.center == other.center
                && self.radius == other.radius
                && self.len() == other.len())
    }

    /// Cell containing `p` for bilinear interpolation: four corner nodes
    /// (sw, se, nw, ne) and the fractional offsets.
    pub fn cell(&self, p: C64) -> Option<([usize; 4], f64, f64)> {
        let (fx, fy) = self.lattice_coords(p);
        let (bx, by) = (fx.floor(), fy.floor());
        let (tx, ty) = (fx - bx, fy - by);
        let (kx, ky) = (bx as i64, by as i64);
        let sw = self.node_at(kx, ky)?;
        // Points exactly on a node or edge need fewer corners.
        let se = if tx > 0.0 { self.node_at(kx + 1, ky)? } else { sw };
        let nw = if ty > 0.0 { self.node_at(kx, ky + 1)? } else { sw };
        let ne = if tx > 0.0 && ty > 0.0 {
            self.node_at(kx + 1, ky + 1)?
        } else if tx > 0.0 {
            se
        } else {
            nw
        };
        Some(([sw, se, nw, ne], tx, ty))
    }
}
