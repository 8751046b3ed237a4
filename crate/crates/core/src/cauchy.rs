//! Cauchy transform T f(z) = −(1/π)∫ f(ζ)/(ζ − z) dA(ζ), so ∂̄T f = f.
//!
//! Far cells use the midpoint rule. Cells within `NEAR` spacings of the
//! target use the closed-form integral of 1/(ζ − z) over the square.
//! On the full lattice the rule is a discrete convolution and runs through
//! FFTs; direct summation (O(N_sources·N_targets)) serves off-lattice targets
//! and strided plans.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{LandisError, Result};
use crate::field::ComplexField;
use crate::grid::Grid;
use crate::ops::dbar;

const NEAR: f64 = 2.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SingularRule {
    /// Exact kernel integrals over the cells near the target.
    ExactCell,
    /// Midpoint everywhere, dropping the cell that contains the target.
    PolarCorrected,
}

/// Quadrature plan. Strides > 1 aggregate sources onto a coarser lattice
/// and/or evaluate on a coarser lattice and interpolate.
#[derive(Clone, Copy, Debug)]
pub struct CauchyQuadrature {
    pub rule: SingularRule,
    pub source_stride: usize,
    pub target_stride: usize,
}

impl Default for CauchyQuadrature {
    fn default() -> Self {
        Self { rule: SingularRule::ExactCell, source_stride: 1, target_stride: 1 }
    }
}

impl CauchyQuadrature {
    pub fn strided(source_stride: usize, target_stride: usize) -> Self {
        Self { rule: SingularRule::ExactCell, source_stride: source_stride.max(1), target_stride: target_stride.max(1) }
    }
}

/// s log s − s antiderivative piece; −i(s log s − s) has ∂x∂y = 1/s.
fn prim(x: f64, y: f64) -> C64 {
    let s = C64::new(x, y);
    if x == 0.0 && y == 0.0 {
        return C64::new(0.0, 0.0);
    }
    -C64::i() * (s * s.ln() - s)
}

/// ∫∫_{[x0,x1]×[y0,y1]} dx dy / (x + iy).
pub fn rect_integral(x0: f64, x1: f64, y0: f64, y1: f64) -> C64 {
    if x0 < 0.0 && x1 > 0.0 {
        return rect_integral(x0, 0.0, y0, y1) + rect_integral(0.0, x1, y0, y1);
    }
    if x1 <= 0.0 {
        // 1/(−s) = −1/s keeps the evaluation off the log branch cut.
        return -rect_integral(-x1, -x0, -y1, -y0);
    }
    prim(x1, y1) - prim(x0, y1) - prim(x1, y0) + prim(x0, y0)
}

/// Fraction of the square cell of side `h` at `p` inside the closed disc.
pub fn cell_fraction(p: C64, h: f64, c: C64, r: f64) -> f64 {
    let d = (p - c).norm();
    let half_diag = h * std::f64::consts::FRAC_1_SQRT_2;
    if d + half_diag <= r {
        return 1.0;
    }
    if d - half_diag >= r {
        return 0.0;
    }
    const S: usize = 16;
    let mut inside = 0;
    for a in 0..S {
        for b in 0..S {
            let q = p + C64::new(((a as f64 + 0.5) / S as f64 - 0.5) * h, ((b as f64 + 0.5) / S as f64 - 0.5) * h);
            if (q - c).norm() <= r {
                inside += 1;
            }
        }
    }
    inside as f64 / (S * S) as f64
}

/// Point sources c_s = ∫_{cell s} f, on a lattice of spacing `cell`.
struct Sources {
    pos: Vec<C64>,
    strength: Vec<C64>,
    cell: f64,
    lattice: Arc<Grid>,
    /// Dense lookup from lattice node to source index.
    index: Vec<u32>,
}

impl Sources {
    fn build(f: &ComplexField, stride: usize) -> Result<Self> {
        let g = f.grid();
        let h = g.h();
        let (c, r) = (g.center(), g.radius());
        // Lattice that holds every aggregated source.
        let lattice = Arc::new(g.coarsen(stride)?.restrict_loose(c, r + stride as f64 * h));
        let mut strength = vec![C64::new(0.0, 0.0); lattice.len()];
        let s = stride as i64;
        for k in 0..f.len() {
            if !f.is_valid(k) {
                continue;
            }
            let frac = cell_fraction(g.point(k), h, c, r);
            if frac == 0.0 {
                continue;
            }
            let (kx, ky) = g.lattice_index(k);
            let target = lattice
                .node_at(div_round(kx, s), div_round(ky, s))
                .ok_or_else(|| LandisError::Invariant("source lattice misses a node".into()))?;
            strength[target] += f.get(k) * (frac * h * h);
        }
        let mut pos = Vec::new();
        let mut st = Vec::new();
        let mut index = vec![u32::MAX; lattice.len()];
        for (k, s) in strength.iter().enumerate() {
            if s.re != 0.0 || s.im != 0.0 {
                index[k] = pos.len() as u32;
                pos.push(lattice.point(k));
                st.push(*s);
            }
        }
        Ok(Self { pos, strength: st, cell: lattice.h(), lattice, index })
    }

    fn eval(&self, z: C64, rule: SingularRule) -> C64 {
        let mut sre = 0.0;
        let mut sim = 0.0;
        for (p, c) in self.pos.iter().zip(&self.strength) {
            let dx = p.re - z.re;
            let dy = p.im - z.im;
            let r2 = dx * dx + dy * dy;
            if r2 > 0.0 {
                sre += (c.re * dx + c.im * dy) / r2;
                sim += (c.im * dx - c.re * dy) / r2;
            }
        }
        let mut sum = C64::new(sre, sim);

        let hh = self.cell;
        let (fx, fy) = self.lattice.lattice_coords(z);
        let reach = match rule {
            SingularRule::ExactCell => NEAR,
            SingularRule::PolarCorrected => 0.5,
        };
        for kx in (fx - reach).ceil() as i64..=(fx + reach).floor() as i64 {
            for ky in (fy - reach).ceil() as i64..=(fy + reach).floor() as i64 {
                let Some(node) = self.lattice.node_at(kx, ky) else { continue };
                let si = self.index[node];
                if si == u32::MAX {
                    continue;
                }
                let p = self.pos[si as usize];
                let c = self.strength[si as usize];
                let d = p - z;
                if d.norm_sqr() > 0.0 {
                    sum -= c / d;
                }
                if rule == SingularRule::ExactCell {
                    let exact = rect_integral(d.re - 0.5 * hh, d.re + 0.5 * hh, d.im - 0.5 * hh, d.im + 0.5 * hh);
                    sum += c * exact / (hh * hh);
                }
            }
        }
        -sum / PI
    }
}

fn div_round(a: i64, s: i64) -> i64 {
    (a as f64 / s as f64).round() as i64
}

/// Prepared transform of one field; evaluation at arbitrary points.
pub struct CauchyEvaluator {
    sources: Sources,
    rule: SingularRule,
}

impl CauchyEvaluator {
    pub fn new(f: &ComplexField, q: &CauchyQuadrature) -> Result<Self> {
        Ok(Self { sources: Sources::build(f, q.source_stride)?, rule: q.rule })
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.sources.eval(z, self.rule)
    }

    /// Total source area weight over the domain (equals π r² up to O(h²)).
    pub fn total_strength(&self) -> C64 {
        self.sources.strength.iter().sum()
    }
}

/// T f on every node of f's grid.
pub fn cauchy_transform(f: &ComplexField, q: &CauchyQuadrature) -> Result<ComplexField> {
    if q.source_stride <= 1 && q.target_stride <= 1 {
        return lattice_transform(f, q.rule);
    }
    let ev = CauchyEvaluator::new(f, q)?;
    let g = f.grid().clone();
    if q.target_stride <= 1 {
        let values: Vec<C64> = g.points().par_iter().map(|&z| ev.eval(z)).collect();
        return ComplexField::new(g, values);
    }
    let coarse = Arc::new(g.coarsen(q.target_stride)?);
    let values: Vec<C64> = coarse.points().par_iter().map(|&z| ev.eval(z)).collect();
    let wc = ComplexField::new(coarse, values)?;
    let pts = g.points();
    let values: Vec<C64> = pts.par_iter().map(|&z| wc.sample(z).unwrap_or_else(|| ev.eval(z))).collect();
    ComplexField::new(g, values)
}

/// Kernel of the quadrature at lattice offset (dx, dy) = source − target, in units of h.
fn lattice_kernel(dx: i64, dy: i64, h: f64, rule: SingularRule) -> C64 {
    let d = C64::new(dx as f64 * h, dy as f64 * h);
    let near = match rule {
        SingularRule::ExactCell => NEAR as i64,
        SingularRule::PolarCorrected => 0,
    };
    if dx.abs() <= near && dy.abs() <= near {
        return match rule {
            SingularRule::ExactCell => rect_integral(d.re - 0.5 * h, d.re + 0.5 * h, d.im - 0.5 * h, d.im + 0.5 * h) / (h * h),
            SingularRule::PolarCorrected => C64::new(0.0, 0.0),
        };
    }
    d.inv()
}

/// In-place 2-D FFT of a row-major `px × py` buffer.
fn fft2(buf: &mut [C64], px: usize, py: usize, rows: &dyn Fft<f64>, cols: &dyn Fft<f64>) {
    rows.process(buf);
    let mut t = vec![C64::new(0.0, 0.0); buf.len()];
    transpose(buf, &mut t, px, py);
    cols.process(&mut t);
    transpose(&t, buf, py, px);
}

fn transpose(src: &[C64], dst: &mut [C64], w: usize, h: usize) {
    for y in 0..h {
        for x in 0..w {
            dst[x * h + y] = src[y * w + x];
        }
    }
}

/// Same quadrature as the direct sum with stride 1, evaluated by zero-padded FFT convolution.
fn lattice_transform(f: &ComplexField, rule: SingularRule) -> Result<ComplexField> {
    let g = f.grid();
    let h = g.h();
    let (c, r) = (g.center(), g.radius());
    let idx: Vec<(i64, i64)> = (0..g.len()).map(|k| g.lattice_index(k)).collect();
    let x0 = idx.iter().map(|p| p.0).min().unwrap_or(0);
    let y0 = idx.iter().map(|p| p.1).min().unwrap_or(0);
    let nx = (idx.iter().map(|p| p.0).max().unwrap_or(0) - x0 + 1) as usize;
    let ny = (idx.iter().map(|p| p.1).max().unwrap_or(0) - y0 + 1) as usize;
    let px = (2 * nx).next_power_of_two();
    let py = (2 * ny).next_power_of_two();

    let mut src = vec![C64::new(0.0, 0.0); px * py];
    for (k, &(ix, iy)) in idx.iter().enumerate() {
        if !f.is_valid(k) {
            continue;
        }
        let frac = cell_fraction(g.point(k), h, c, r);
        if frac > 0.0 {
            src[(iy - y0) as usize * px + (ix - x0) as usize] = f.get(k) * (frac * h * h);
        }
    }
    // T(t) = Σ_s c_s K(s − t): convolve with K(−e) stored at e mod p.
    let mut kern = vec![C64::new(0.0, 0.0); px * py];
    for ey in -(ny as i64 - 1)..ny as i64 {
        let row = ey.rem_euclid(py as i64) as usize * px;
        for ex in -(nx as i64 - 1)..nx as i64 {
            kern[row + ex.rem_euclid(px as i64) as usize] = lattice_kernel(-ex, -ey, h, rule);
        }
    }
    let mut planner = FftPlanner::new();
    let (fr, fc) = (planner.plan_fft_forward(px), planner.plan_fft_forward(py));
    let (ir, ic) = (planner.plan_fft_inverse(px), planner.plan_fft_inverse(py));
    fft2(&mut src, px, py, fr.as_ref(), fc.as_ref());
    fft2(&mut kern, px, py, fr.as_ref(), fc.as_ref());
    for (a, b) in src.iter_mut().zip(&kern) {
        *a *= b;
    }
    fft2(&mut src, px, py, ir.as_ref(), ic.as_ref());
    let scale = -1.0 / (PI * (px * py) as f64);
    let values: Vec<C64> = idx.iter().map(|&(ix, iy)| src[(iy - y0) as usize * px + (ix - x0) as usize] * scale).collect();
    ComplexField::new(g.clone(), values)
}

/// w(z) = T f(ẑ) − T f(z): ∂̄w = −f and w(ẑ) = 0.
pub fn anchored_cauchy_transform(f: &ComplexField, zhat: C64, q: &CauchyQuadrature) -> Result<ComplexField> {
    let g = f.grid();
    if (zhat - g.center()).norm() > g.radius() + 1e-12 {
        return Err(LandisError::OutsideGrid(zhat.re, zhat.im));
    }
    let ev = CauchyEvaluator::new(f, q)?;
    let t_hat = ev.eval(zhat);
    let t = cauchy_transform(f, q)?;
    let mut w = t.map(|v| t_hat - v);
    if let Some(k) = g.nearest_node(zhat).filter(|&k| g.point(k) == zhat) {
        // Exactly zero at a node anchor, independent of summation order.
        let mut vals = w.into_values();
        vals[k] = C64::new(0.0, 0.0);
        w = ComplexField::new(g.clone(), vals)?;
    }
    Ok(w)
}

/// Smallest C with |w(z)| ≤ C·‖f‖∞·|z−ẑ|·log(C'/|z−ẑ|) over nodes with |z − ẑ| ≥ h.
pub fn envelope_constant(w: &ComplexField, f_sup: f64, zhat: C64, c_prime: f64) -> Result<f64> {
    let g = w.grid();
    let mut best = 0.0f64;
    for k in 0..w.len() {
        let d = (g.point(k) - zhat).norm();
        if d < g.h() || !w.is_valid(k) {
            continue;
        }
        let env = d * (c_prime / d).ln();
        if !(env > 0.0) {
            return Err(LandisError::InvalidArgument(format!("C' = {c_prime} too small for distance {d}")));
        }
        best = best.max(w.get(k).norm() / (f_sup.max(1e-300) * env));
    }
    Ok(best)
}

#[derive(Clone, Debug, Serialize)]
pub struct Factorization {
    /// ‖∂̄h‖∞ on interior nodes.
    pub dbar_residual: f64,
    /// ‖∂̄h‖∞ / (‖h‖∞ / radius): scale-free holomorphy defect.
    pub relative_residual: f64,
    pub w_sup: f64,
}

/// w = T(coeff), h = e^{−w}g; g = e^w h holds nodewise by construction.
pub fn similarity_factorize(
    g: &ComplexField,
    coeff: &ComplexField,
    q: &CauchyQuadrature,
) -> Result<(ComplexField, ComplexField, Factorization)> {
    let w = cauchy_transform(coeff, q)?;
    let w_sup = w.sup();
    if w_sup > 700.0 {
        return Err(LandisError::Invariant(format!("‖w‖ = {w_sup} overflows exp(−w)")));
    }
    let h = g.zip_with(&w, |gv, wv| (-wv).exp() * gv)?;
    let report = holomorphy_defect(&h)?;
    Ok((w, h, Factorization { w_sup, ..report }))
}

/// ∂̄ defect of a field on its interior.
pub fn holomorphy_defect(h: &ComplexField) -> Result<Factorization> {
    let d = dbar(h);
    let dbar_residual = d.sup();
    let hs = h.sup();
    let r = h.grid().radius();
    let relative_residual = if hs > 0.0 { dbar_residual * r / hs } else { 0.0 };
    Ok(Factorization { dbar_residual, relative_residual, w_sup: 0.0 })
}

#[derive(Clone, Debug, Serialize)]
pub struct ModelOrder {
    /// Certified exponent at each probe radius.
    pub radii: Vec<f64>,
    pub certified: Vec<f64>,
    pub measured: Vec<f64>,
    /// max certified exponent over the probe radii.
    pub exponent: f64,
    /// exponent / M (the fitted c in r^{cM}).
    pub c_fit: f64,
    pub w_sup: f64,
}

/// Model problem ∂̄u = Vu on B_2: u = e^w f with w = T V, then the three-circle
/// chain with r1 = 1, r2 = 3/2 on the holomorphic factor.
pub fn model_dbar_order(
    v: &ComplexField,
    m: f64,
    f: impl Fn(C64) -> C64,
    q: &CauchyQuadrature,
    radii: &[f64],
) -> Result<ModelOrder> {
    let g = v.grid().clone();
    let vs = v.sup();
    if vs > m * (1.0 + 1e-12) {
        return Err(LandisError::Precondition(format!("‖V‖ = {vs} > M = {m}")));
    }
    let w = cauchy_transform(v, q)?;
    let u = ComplexField::from_fn(g.clone(), |z| z)?.zip_with(&w, |z, wv| wv.exp() * f(z))?;
    let c = g.center();
    let u1 = u.sup_norm(c, 1.0)?;
    if u1 < 1.0 - 1e-9 {
        return Err(LandisError::Precondition(format!("‖u‖_(B_1) = {u1} < 1")));
    }
    // Holomorphic factor f = e^{−w}u and the Re w bounds of the premultiplier.
    let hol = u.zip_with(&w, |uv, wv| (-wv).exp() * uv)?;
    let (r1, r2) = (1.0, 1.5);
    let f1 = hol.sup_norm(c, r1)?;
    let f2 = hol.sup_norm(c, r2)?;
    if f1 <= 0.0 {
        return Err(LandisError::Invariant("degenerate certificate: f vanishes on B_1".into()));
    }
    let min_re_w = (0..w.len()).map(|k| w.get(k).re).fold(f64::INFINITY, f64::min);
    let mut certified = Vec::new();
    let mut measured = Vec::new();
    for &r in radii {
        if !(r > 0.0 && r < 1.0) {
            return Err(LandisError::InvalidArgument(format!("radius {r} not in (0, 1)")));
        }
        let th = crate::order::theta_standard(r, r1, r2)?;
        // log ‖u‖_r ≥ min Re w + log ‖f‖_r ≥ min Re w + [log f1 − (1−θ) log f2]/θ
        let log_lower = min_re_w + ((f1.ln() - (1.0 - th) * f2.ln()) / th);
        certified.push(log_lower / r.ln());
        measured.push(u.sup_norm(c, r)?.ln() / r.ln());
    }
    let exponent = certified.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(ModelOrder {
        radii: radii.to_vec(),
        certified,
        measured,
        exponent,
        c_fit: exponent / m,
        w_sup: w.sup(),
    })
}
