//! u ↦ v = u/φ, stream functions, g = χφ²v + iṽ and its ∂̄ coefficients.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{LandisError, Result};
use crate::field::{ComplexField, ScalarField};
use crate::grid::{EAST, NORTH, SOUTH, WEST};
use crate::multiplier::Multiplier;
use crate::ops::{dbar, dbar_real, del_real, gradient, gradient_norm};

pub type Drift = (ScalarField, ScalarField);

/// Relative floor below which g counts as a zero of g.
pub const G_FLOOR: f64 = 1e-12;

/// Loop defect (relative to perimeter × flux scale) that rejects a stream function.
pub const MAX_LOOP_DEFECT: f64 = 0.05;
/// Flux scale relative to sup|φ²v|/R below which the loop check is skipped.
pub const NEGLIGIBLE_FLUX: f64 = 1e-6;

/// v = u/φ.
pub fn to_divergence_form(u: &ScalarField, m: &Multiplier) -> Result<ScalarField> {
    if let Some(k) = (0..m.phi.len()).find(|&k| m.phi.is_valid(k) && !(m.phi.get(k) > 1e-300)) {
        let p = m.phi.grid().point(k);
        return Err(LandisError::Precondition(format!("φ below positivity floor at ({}, {})", p.re, p.im)));
    }
    u.zip_with(&m.phi, |a, b| a / b)
}

/// ∇·(φ²(∇v − Wv)) with face-averaged φ² on the diffusive part.
pub fn divergence_residual(v: &ScalarField, m: &Multiplier, w: Option<&Drift>) -> Result<ScalarField> {
    let g = v.grid().clone();
    if !g.same_as(m.phi.grid()) {
        return Err(LandisError::GridMismatch);
    }
    let h = g.h();
    let margin = v.margin().max(m.phi.margin()) + 1;
    let p2 = m.phi.map(|p| p * p);
    let drift = match w {
        Some((w1, w2)) => Some((
            p2.zip_with(v, |a, b| a * b)?.zip_with(w1, |a, b| a * b)?,
            p2.zip_with(v, |a, b| a * b)?.zip_with(w2, |a, b| a * b)?,
        )),
        None => None,
    };
    let values = (0..g.len())
        .map(|k| {
            if g.depth(k) < margin {
                return 0.0;
            }
            let n = g.neighbors_raw(k).map(|x| x as usize);
            let (c, pc) = (v.get(k), p2.get(k));
            let flux = |j: usize| 0.5 * (pc + p2.get(j)) * (v.get(j) - c);
            let mut r = (flux(n[EAST]) + flux(n[WEST]) + flux(n[NORTH]) + flux(n[SOUTH])) / (h * h);
            if let Some((d1, d2)) = &drift {
                r -= (d1.get(n[EAST]) - d1.get(n[WEST])) / (2.0 * h) + (d2.get(n[NORTH]) - d2.get(n[SOUTH])) / (2.0 * h);
            }
            r
        })
        .collect();
    ScalarField::with_margin(g, values, margin)
}

/// Fluxes (∂yṽ, ∂xṽ) = (φ²(∂xv − W₁v), −φ²(∂yv − W₂v)).
fn stream_fluxes(v: &ScalarField, m: &Multiplier, w: Option<&Drift>) -> Result<(ScalarField, ScalarField)> {
    let (vx, vy) = gradient(v);
    let p2 = m.phi.map(|p| p * p);
    let (mut dx, mut dy) = (vx, vy);
    if let Some((w1, w2)) = w {
        let w1v = w1.zip_with(v, |a, b| a * b)?;
        let w2v = w2.zip_with(v, |a, b| a * b)?;
        dx = dx.zip_with(&w1v, |a, b| a - b)?;
        dy = dy.zip_with(&w2v, |a, b| a - b)?;
    }
    Ok((p2.zip_with(&dx, |a, b| a * b)?, p2.zip_with(&dy, |a, b| -a * b)?))
}

#[derive(Clone, Debug, Serialize)]
pub struct StreamReport {
    pub base: (f64, f64),
    pub rectangles: usize,
    /// max over rectangles of |∮| / (perimeter · flux scale).
    pub loop_defect: f64,
}

/// Exact stream function: ∂yṽ = P, ∂xṽ = Q with ṽ(0) = 0, trapezoid rule
/// up the base column then along rows.
pub fn stream_function(v: &ScalarField, m: &Multiplier, w: Option<&Drift>) -> Result<(ScalarField, StreamReport)> {
    let (p, q) = stream_fluxes(v, m, w)?;
    let g = v.grid().clone();
    let h = g.h();
    let base = g
        .nearest_node(C64::new(0.0, 0.0))
        .filter(|&k| p.is_valid(k))
        .ok_or_else(|| LandisError::Precondition("origin is not an interior node".into()))?;
    let (bx, by) = g.lattice_index(base);
    let mut vt = vec![0.0; g.len()];
    let mut reached = vec![false; g.len()];
    reached[base] = true;

    // Column through the base.
    for dir in [1i64, -1] {
        let mut prev = base;
        let mut ky = by + dir;
        while let Some(k) = g.node_at(bx, ky).filter(|&k| p.is_valid(k)) {
            vt[k] = vt[prev] + dir as f64 * 0.5 * h * (p.get(prev) + p.get(k));
            reached[k] = true;
            prev = k;
            ky += dir;
        }
    }
    // Rows.
    for k0 in 0..g.len() {
        if !reached[k0] || g.lattice_index(k0).0 != bx {
            continue;
        }
        let (_, ky) = g.lattice_index(k0);
        for dir in [1i64, -1] {
            let mut prev = k0;
            let mut kx = bx + dir;
            while let Some(k) = g.node_at(kx, ky).filter(|&k| q.is_valid(k)) {
                vt[k] = vt[prev] + dir as f64 * 0.5 * h * (q.get(prev) + q.get(k));
                reached[k] = true;
                prev = k;
                kx += dir;
            }
        }
    }
    if (0..g.len()).any(|k| p.is_valid(k) && !reached[k]) {
        return Err(LandisError::Precondition("valid region not reachable by L-paths from the origin".into()));
    }
    let vt = ScalarField::with_margin(g.clone(), vt, p.margin())?;
    let (rectangles, loop_defect) = loop_defect(&p, &q, 16, 0)?;
    let report = StreamReport { base: (g.point(base).re, g.point(base).im), rectangles, loop_defect };
    // Fluxes at solver-noise level relative to φ²v/R carry no circulation information.
    let level = m.phi.zip_with(v, |a, b| a * a * b)?.sup() / g.radius();
    let negligible = p.sup().max(q.sup()) <= NEGLIGIBLE_FLUX * level;
    if loop_defect > MAX_LOOP_DEFECT && !negligible {
        return Err(LandisError::Invariant(format!(
            "stream function loop defect {loop_defect:.3e} > {MAX_LOOP_DEFECT}"
        )));
    }
    Ok((vt, report))
}

/// Max relative circulation of (Q dx + P dy) over seeded lattice rectangles.
pub fn loop_defect(p: &ScalarField, q: &ScalarField, count: usize, seed: u64) -> Result<(usize, f64)> {
    let g = p.grid();
    let h = g.h();
    let c = g.center();
    let r_in = 0.7 * g.radius();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut done = 0;
    let (cx, cy) = g.lattice_coords(c);
    let span = (r_in / h / std::f64::consts::SQRT_2).floor() as i64;
    if span < 2 {
        return Ok((0, 0.0));
    }
    for _ in 0..count {
        let x0 = cx.round() as i64 + rng.gen_range(-span..span - 1);
        let y0 = cy.round() as i64 + rng.gen_range(-span..span - 1);
        let x1 = rng.gen_range(x0 + 1..=span + cx.round() as i64);
        let y1 = rng.gen_range(y0 + 1..=span + cy.round() as i64);
        let node = |kx: i64, ky: i64| g.node_at(kx, ky).filter(|&k| p.is_valid(k) && q.is_valid(k));
        let mut circ = 0.0;
        let mut scale = 0.0f64;
        let mut ok = true;
        let mut edge = |from: (i64, i64), to: (i64, i64), use_q: bool, sign: f64| {
            let steps = (to.0 - from.0).abs().max((to.1 - from.1).abs());
            let d = ((to.0 - from.0).signum(), (to.1 - from.1).signum());
            for s in 0..steps {
                let a = node(from.0 + d.0 * s, from.1 + d.1 * s);
                let b = node(from.0 + d.0 * (s + 1), from.1 + d.1 * (s + 1));
                match (a, b) {
                    (Some(a), Some(b)) => {
                        let f = if use_q { (q.get(a), q.get(b)) } else { (p.get(a), p.get(b)) };
                        circ += sign * 0.5 * h * (f.0 + f.1);
                        scale = scale.max(f.0.abs()).max(f.1.abs());
                    }
                    _ => ok = false,
                }
            }
        };
        edge((x0, y0), (x1, y0), true, 1.0);
        edge((x1, y0), (x1, y1), false, 1.0);
        edge((x1, y1), (x0, y1), true, -1.0);
        edge((x0, y1), (x0, y0), false, -1.0);
        if !ok || scale == 0.0 {
            continue;
        }
        let perimeter = 2.0 * h * ((x1 - x0) + (y1 - y0)) as f64;
        worst = worst.max(circ.abs() / (perimeter * scale));
        done += 1;
    }
    Ok((done, worst))
}

#[derive(Clone, Debug, Serialize)]
pub struct ApproxStreamReport {
    pub anchor_a: f64,
    /// sup |∂xṽ + χφ²∂yv| relative to sup |χφ²∇v|, off the χ transition.
    pub equ6_residual: f64,
    /// sup |(∂yṽ − χφ²∂xv) + I| relative to sup |χφ²∇v|, off the χ transition.
    pub equ5_residual: f64,
    /// sup |I| outside {x ≤ a, |y| ≤ support half-width}, padded by 2h.
    pub correction_leak: f64,
    pub unreached: usize,
}

/// Cutoff χ used by the approximate stream function.
pub trait Cutoff: Sync {
    fn chi(&self, z: C64) -> f64;
    fn grad_chi(&self, z: C64) -> (f64, f64);
    /// Base column x = a.
    fn anchor(&self) -> f64;
    /// z lies within `pad` of the set where χ is not locally constant.
    fn near_transition(&self, z: C64, pad: f64) -> bool;
    /// Half-width in y of the support of the correction integral, if bounded.
    fn support_half_width(&self) -> Option<f64>;
}

/// χ ≡ 1 with base column x = a.
pub struct NoCutoff {
    pub a: f64,
}

impl Cutoff for NoCutoff {
    fn chi(&self, _: C64) -> f64 {
        1.0
    }
    fn grad_chi(&self, _: C64) -> (f64, f64) {
        (0.0, 0.0)
    }
    fn anchor(&self) -> f64 {
        self.a
    }
    fn near_transition(&self, _: C64, _: f64) -> bool {
        false
    }
    fn support_half_width(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// ṽ(x,y) = ∫_a^x −χφ²∂yv(s,y) ds + ∫_0^y χφ²∂xv(a,s) ds and the
/// correction I(x,y) = ∫_a^x (∇χ·φ²∇v)(s,y) ds, so ∂yṽ = χφ²∂xv − I.
pub struct ApproxStream {
    pub vtilde: ScalarField,
    pub correction: ScalarField,
    pub report: ApproxStreamReport,
}

/// Sub-samples per cell for integrals against χ and ∇χ.
const SUB: usize = 8;

/// ∫ over [p, q] (a horizontal or vertical segment) of weight(s)·F(s), F linear
/// between fp and fq; midpoint rule on `SUB` pieces.
fn segment(p: C64, q: C64, fp: f64, fq: f64, weight: impl Fn(C64) -> f64) -> f64 {
    let len = (q - p).norm() * if (q.re - p.re) + (q.im - p.im) < 0.0 { -1.0 } else { 1.0 };
    let mut acc = 0.0;
    for j in 0..SUB {
        let t = (j as f64 + 0.5) / SUB as f64;
        acc += weight(p + (q - p) * t) * (fp + (fq - fp) * t);
    }
    acc * len / SUB as f64
}

pub fn approximate_stream_function(v: &ScalarField, m: &Multiplier, cut: &(impl Cutoff + ?Sized)) -> Result<ApproxStream> {
    let g = v.grid().clone();
    let h = g.h();
    let a = cut.anchor();
    let (vx, vy) = gradient(v);
    let p2 = m.phi.map(|p| p * p);
    let n = g.len();
    let valid = |k: usize| vx.is_valid(k);
    let f1: Vec<f64> = (0..n).map(|k| if valid(k) { p2.get(k) * vx.get(k) } else { 0.0 }).collect();
    let f2: Vec<f64> = (0..n).map(|k| if valid(k) { p2.get(k) * vy.get(k) } else { 0.0 }).collect();
    let scale = (0..n)
        .filter(|&k| valid(k) && (g.point(k) - g.center()).norm() <= 1.4)
        .map(|k| cut.chi(g.point(k)) * f1[k].abs().max(f2[k].abs()))
        .fold(0.0, f64::max)
        .max(1e-300);
    let chi = |z: C64| cut.chi(z);
    let src = |z: C64, (a1, a2): (f64, f64)| {
        let (cx, cy) = cut.grad_chi(z);
        cx * a1 + cy * a2
    };

    let (fa, fy0) = g.lattice_coords(C64::new(a, 0.0));
    let ia = fa.floor() as i64;
    let t = fa - ia as f64;
    let jy0 = fy0.round() as i64;
    if (fy0 - jy0 as f64).abs() > 1e-9 {
        return Err(LandisError::Precondition("y = 0 is not a lattice row".into()));
    }
    let pair = |ky: i64| -> Option<(usize, usize)> {
        let l = g.node_at(ia, ky).filter(|&k| valid(k))?;
        let r = g.node_at(ia + 1, ky).filter(|&k| valid(k))?;
        Some((l, r))
    };
    let lerp = |vals: &[f64], (l, r): (usize, usize)| (1.0 - t) * vals[l] + t * vals[r];
    let at_a = |ky: i64| C64::new(a, g.point(g.node_at(ia, ky).unwrap()).im);

    // base(y) = ∫_0^y χφ²∂xv(a, s) ds
    let Some(p0) = pair(jy0) else {
        return Err(LandisError::Precondition("column x = a misses the row y = 0".into()));
    };
    let mut base = std::collections::BTreeMap::new();
    base.insert(jy0, (0.0, p0));
    for dir in [1i64, -1] {
        let mut prev = (0.0, p0, jy0);
        let mut ky = jy0 + dir;
        while let Some(pr) = pair(ky) {
            let val = prev.0 + segment(at_a(prev.2), at_a(ky), lerp(&f1, prev.1), lerp(&f1, pr), chi);
            base.insert(ky, (val, pr));
            prev = (val, pr, ky);
            ky += dir;
        }
    }

    let mut vt = vec![0.0; n];
    let mut corr = vec![0.0; n];
    let mut reached = vec![false; n];
    for (&ky, &(b, (l, r))) in &base {
        let za = at_a(ky);
        let q_a = -lerp(&f2, (l, r));
        let s_a = (lerp(&f1, (l, r)), lerp(&f2, (l, r)));
        for (start, dir) in [(r, 1i64), (l, -1)] {
            let zs = g.point(start);
            vt[start] = b + segment(za, zs, q_a, -f2[start], chi);
            corr[start] = segment(za, zs, 1.0, 1.0, |z| {
                let tt = if zs.re != za.re { (z.re - za.re) / (zs.re - za.re) } else { 0.0 };
                src(z, (s_a.0 + (f1[start] - s_a.0) * tt, s_a.1 + (f2[start] - s_a.1) * tt))
            });
            reached[start] = true;
            let mut prev = start;
            let mut kx = g.lattice_index(start).0 + dir;
            while let Some(k) = g.node_at(kx, ky).filter(|&k| valid(k)) {
                let (zp, zk) = (g.point(prev), g.point(k));
                vt[k] = vt[prev] + segment(zp, zk, -f2[prev], -f2[k], chi);
                corr[k] = corr[prev]
                    + segment(zp, zk, 1.0, 1.0, |z| {
                        let tt = (z.re - zp.re) / (zk.re - zp.re);
                        src(z, (f1[prev] + (f1[k] - f1[prev]) * tt, f2[prev] + (f2[k] - f2[prev]) * tt))
                    });
                reached[k] = true;
                prev = k;
                kx += dir;
            }
        }
    }
    let unreached = (0..n).filter(|&k| valid(k) && !reached[k]).count();
    let margin = vx.margin();
    let vtilde = ScalarField::with_margin(g.clone(), vt, margin)?;
    let correction = ScalarField::with_margin(g.clone(), corr, margin)?;

    // Identity checks on B_{7/5} at nodes whose stencil was reached, away from x = a and the χ ring.
    let (vtx, vty) = gradient(&vtilde);
    let mut e6 = 0.0f64;
    let mut e5 = 0.0f64;
    let mut leak = 0.0f64;
    let hw = cut.support_half_width();
    for k in 0..n {
        if !vtx.is_valid(k) || !reached[k] || g.neighbors_raw(k).iter().any(|&j| !reached[j as usize]) {
            continue;
        }
        let z = g.point(k);
        if let Some(w) = hw {
            if z.re > a + 2.0 * h || z.im.abs() > w + 2.0 * h {
                leak = leak.max(correction.get(k).abs());
            }
        }
        if (z.re - a).abs() <= 1.5 * h || cut.near_transition(z, 2.0 * h) || (z - g.center()).norm() > 1.4 {
            continue;
        }
        let c = cut.chi(z);
        e6 = e6.max((vtx.get(k) + c * f2[k]).abs());
        e5 = e5.max((vty.get(k) - c * f1[k] + correction.get(k)).abs());
    }
    let report = ApproxStreamReport {
        anchor_a: a,
        equ6_residual: e6 / scale,
        equ5_residual: e5 / scale,
        correction_leak: leak / scale,
        unreached,
    };
    Ok(ApproxStream { vtilde, correction, report })
}

/// g = χφ²v + iṽ (χ ≡ 1 when absent).
pub fn assemble_g(v: &ScalarField, vtilde: &ScalarField, m: &Multiplier, chi: Option<&ScalarField>) -> Result<ComplexField> {
    let p2v = m.phi.zip_with(v, |p, vv| p * p * vv)?;
    let re = match chi {
        Some(c) => p2v.zip_with(c, |a, b| a * b)?,
        None => p2v,
    };
    re.zip_with(vtilde, C64::new)
}

/// Coefficient pair (base, tilde): α = ∂̄ψ or γ = ∂̄ψ + ¼(W₁ + iW₂), and the
/// similarity coefficient base·(1 + ḡ/g), set to 0 at zeros of g.
pub struct Coefficients {
    pub base: ComplexField,
    pub tilde: ComplexField,
    pub degenerate_nodes: usize,
}

pub fn coefficients(m: &Multiplier, w: Option<&Drift>, g: &ComplexField) -> Result<Coefficients> {
    let mut base = dbar_real(&m.psi);
    if let Some((w1, w2)) = w {
        let wc = w1.zip_with(w2, |a, b| C64::new(0.25 * a, 0.25 * b))?;
        base = base.zip_with(&wc, |a, b| a + b)?;
    }
    let zero = zero_mask(g);
    let grid = g.grid().clone();
    let margin = base.margin().max(g.margin());
    let mut degenerate = 0;
    let values = (0..grid.len())
        .map(|k| {
            if grid.depth(k) < margin {
                return C64::new(0.0, 0.0);
            }
            if zero[k] {
                degenerate += 1;
                return C64::new(0.0, 0.0);
            }
            let gv = g.get(k);
            base.get(k) * (C64::new(1.0, 0.0) + gv.conj() / gv)
        })
        .collect();
    let tilde = ComplexField::with_margin(grid, values, margin)?;
    Ok(Coefficients { base, tilde, degenerate_nodes: degenerate })
}

/// Zeros of g: |g| below `G_FLOOR` times the largest |g| on the node's 5-point star.
///
/// A global floor would zero the coefficient wherever g is merely small
/// relative to a distant maximum, which happens routinely at large M.
pub fn zero_mask(g: &ComplexField) -> Vec<bool> {
    let grid = g.grid();
    (0..grid.len())
        .map(|k| {
            let a = g.get(k).norm();
            if a == 0.0 {
                return true;
            }
            let local = grid
                .neighbors_raw(k)
                .iter()
                .filter(|&&j| j != u32::MAX)
                .map(|&j| g.get(j as usize).norm())
                .fold(a, f64::max);
            a < G_FLOOR * local
        })
        .collect()
}

/// sup over the disc of |∂̄g − coeff·g − sources|.
pub fn dbar_residual(
    g: &ComplexField,
    coeff: &ComplexField,
    sources: Option<&ComplexField>,
    center: C64,
    r: f64,
) -> Result<f64> {
    let d = dbar(g);
    if !g.grid().same_as(coeff.grid()) {
        return Err(LandisError::GridMismatch);
    }
    let grid = g.grid();
    let mut worst: Option<f64> = None;
    let margin = d.margin().max(coeff.margin()).max(sources.map_or(0, |s| s.margin()));
    grid.for_each_in_disc(center, r, |k| {
        if grid.depth(k) < margin {
            return;
        }
        let mut e = d.get(k) - coeff.get(k) * g.get(k);
        if let Some(s) = sources {
            e -= s.get(k);
        }
        worst = Some(worst.map_or(e.norm(), |w: f64| w.max(e.norm())));
    });
    worst.ok_or(LandisError::EmptyDisc(center.re, center.im, r))
}

/// max(‖∂̄g‖, ‖g‖/r) on B_r(c).
pub fn dbar_scale(g: &ComplexField, c: C64, r: f64) -> Result<f64> {
    Ok(dbar(g).sup_norm(c, r)?.max(g.sup_norm(c, r)? / r))
}

/// Everything produced by one reduction of u.
pub struct ReducedSystem {
    pub v: ScalarField,
    pub vtilde: ScalarField,
    pub g: ComplexField,
    pub coeff: ComplexField,
    pub chi: Option<ScalarField>,
    pub anchor_a: Option<f64>,
    /// Only for the exterior construction: (∂̄χ)φu + ½I.
    pub sources: Option<ComplexField>,
    pub report: ReductionReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReductionReport {
    pub divergence_residual: f64,
    pub divergence_scale: f64,
    pub stream: Option<StreamReport>,
    pub approx_stream: Option<ApproxStreamReport>,
    pub degenerate_nodes: usize,
    /// sup over B_{7/5} of |∂̄g − coeff·g − sources|.
    pub dbar_residual: f64,
    /// max(‖∂̄g‖, ‖g‖/r) over the same disc.
    pub dbar_scale: f64,
}

impl ReductionReport {
    pub fn relative_residual(&self) -> f64 {
        if self.dbar_scale > 0.0 {
            self.dbar_residual / self.dbar_scale
        } else {
            0.0
        }
    }
}

/// Interior chain (exact stream function), or the exterior chain with cutoff χ when `geom` is given.
pub fn reduce(u: &ScalarField, m: &Multiplier, w: Option<&Drift>, geom: Option<&dyn Cutoff>) -> Result<ReducedSystem> {
    let v = to_divergence_form(u, m)?;
    let div = divergence_residual(&v, m, w)?;
    let grid = v.grid().clone();
    let c = grid.center();
    let inner = 1.4f64.min(grid.radius() - 4.0 * grid.h());
    let divergence_residual = div.sup_norm(c, inner)?;
    let (fx, fy) = stream_fluxes(&v, m, w)?;
    let divergence_scale = fx.sup_norm(c, inner)?.max(fy.sup_norm(c, inner)?) / grid.h();

    let (vtilde, chi, anchor_a, stream, approx, correction) = match geom {
        None => {
            let (vt, rep) = stream_function(&v, m, w)?;
            (vt, None, None, Some(rep), None, None)
        }
        Some(geo) => {
            if w.is_some() {
                return Err(LandisError::InvalidArgument("the exterior construction has W = 0".into()));
            }
            let ap = approximate_stream_function(&v, m, geo)?;
            let chi = ScalarField::from_fn(grid.clone(), |z| geo.chi(z))?;
            (ap.vtilde, Some(chi), Some(geo.anchor()), None, Some(ap.report), Some(ap.correction))
        }
    };
    let g = assemble_g(&v, &vtilde, m, chi.as_ref())?;
    let co = coefficients(m, w, &g)?;
    let sources = match (geom, &correction) {
        (Some(geo), Some(corr)) => {
            let phi_u = m.phi.zip_with(u, |a, b| a * b)?;
            Some(exterior_sources(geo, &phi_u, corr)?)
        }
        _ => None,
    };
    let rr = 1.4f64.min(grid.radius() - 3.0 * grid.h());
    let dres = dbar_residual(&g, &co.tilde, sources.as_ref(), c, rr)?;
    let dbar_scale = dbar_scale(&g, c, rr)?;
    let report = ReductionReport {
        divergence_residual,
        divergence_scale,
        stream,
        approx_stream: approx,
        degenerate_nodes: co.degenerate_nodes,
        dbar_residual: dres,
        dbar_scale,
    };
    Ok(ReducedSystem { v, vtilde, g, coeff: co.tilde, chi, anchor_a, sources, report })
}

/// (∂̄χ)φu + ½I, the inhomogeneity of ∂̄g = α̃g + sources.
pub fn exterior_sources(geo: &dyn Cutoff, phi_u: &ScalarField, correction: &ScalarField) -> Result<ComplexField> {
    let grid = phi_u.grid().clone();
    let margin = phi_u.margin().max(correction.margin());
    let values = (0..grid.len())
        .map(|k| {
            if grid.depth(k) < margin {
                return C64::new(0.0, 0.0);
            }
            let (cx, cy) = geo.grad_chi(grid.point(k));
            C64::new(0.5 * cx, 0.5 * cy) * phi_u.get(k) + 0.5 * correction.get(k)
        })
        .collect();
    ComplexField::with_margin(grid, values, margin)
}

/// sup_{B_r}|ṽ| / (r·e^{2λ}·sup_{B_r}|∇v|) for each r.
pub fn vtilde_smallness(vtilde: &ScalarField, v: &ScalarField, m: &Multiplier, radii: &[f64]) -> Result<Vec<f64>> {
    let gn = gradient_norm(v);
    let c = v.grid().center();
    let e = (2.0 * m.lambda()).exp();
    radii
        .iter()
        .map(|&r| {
            let num = vtilde.sup_norm(c, r)?;
            let den = r * e * gn.sup_norm(c, r)?;
            Ok(if den > 0.0 { num / den } else { 0.0 })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct DriftReduction {
    /// G = ∂v.
    pub g: ComplexField,
    /// W̃ with ∂̄G = W̃G, zero at zeros of G.
    pub wtilde: ComplexField,
    pub residual: f64,
    /// max(‖∂̄G‖, ‖G‖/r) on the residual disc.
    pub scale: f64,
    pub degenerate_fraction: f64,
}

/// Gradient form: Δv + β·∇v = 0 with β = 2∇ψ + W becomes ∂̄G = W̃G, G = ∂v,
/// W̃ = −¼(b + b̄·Ḡ/G), b = β₁ + iβ₂.
pub fn drift_reduction(v: &ScalarField, m: &Multiplier, w: Option<&Drift>) -> Result<DriftReduction> {
    let gfield = del_real(v);
    let (px, py) = gradient(&m.psi);
    let mut b = px.zip_with(&py, |a, c| C64::new(2.0 * a, 2.0 * c))?;
    if let Some((w1, w2)) = w {
        let wc = w1.zip_with(w2, C64::new)?;
        b = b.zip_with(&wc, |a, c| a + c)?;
    }
    let zero = zero_mask(&gfield);
    let grid = v.grid().clone();
    let margin = b.margin().max(gfield.margin());
    let mut degenerate = 0usize;
    let mut counted = 0usize;
    let values = (0..grid.len())
        .map(|k| {
            if grid.depth(k) < margin {
                return C64::new(0.0, 0.0);
            }
            counted += 1;
            if zero[k] {
                degenerate += 1;
                return C64::new(0.0, 0.0);
            }
            let gv = gfield.get(k);
            let bv = b.get(k);
            -0.25 * (bv + bv.conj() * gv.conj() / gv)
        })
        .collect();
    let wtilde = ComplexField::with_margin(grid.clone(), values, margin)?;
    let c = grid.center();
    let r = 1.4f64.min(grid.radius() - 3.0 * grid.h());
    let residual = dbar_residual(&gfield, &wtilde, None, c, r)?;
    let scale = dbar_scale(&gfield, c, r)?;
    Ok(DriftReduction {
        scale,
        g: gfield,
        wtilde,
        residual,
        degenerate_fraction: degenerate as f64 / counted.max(1) as f64,
    })
}

#[derive(Clone, Debug, Serialize)]
pub enum GradientCase {
    /// min u < a on B_{6/5}: ‖∇v‖_{B_{6/5}} ≥ bound.
    Gradient { a: f64, bound: f64, measured: f64, z1: (f64, f64) },
    /// u ≥ a on B_{6/5}.
    Uniform { a: f64, min_u: f64 },
}

/// a = ½e^{−4(√M+K)}.
pub fn dichotomy_threshold(m: f64, k: f64) -> f64 {
    0.5 * (-4.0 * (m.sqrt() + k)).exp()
}

/// ½e^{−2(√M+K)}.
pub fn gradient_lower_bound(m: f64, k: f64) -> f64 {
    0.5 * (-2.0 * (m.sqrt() + k)).exp()
}

/// Gradient-form dichotomy on B_{6/5}. If u only reaches −1 on B_1 the sign is flipped.
pub fn gradient_case_analysis(u: &ScalarField, m: &Multiplier) -> Result<GradientCase> {
    let c = u.grid().center();
    let max1 = u.max_in_disc(c, 1.0)?;
    let min1 = u.min_in_disc(c, 1.0)?;
    if max1.max(-min1) < 1.0 - 1e-12 {
        return Err(LandisError::Precondition(format!("‖u‖_(B_1) = {} < 1", max1.max(-min1))));
    }
    let u = if max1 >= 1.0 - 1e-12 { u.clone() } else { u.map(|x| -x) };
    let a = dichotomy_threshold(m.m, m.k);
    let k1 = {
        let mut best: Option<(usize, f64)> = None;
        u.grid().for_each_in_disc(c, 1.2, |k| {
            if u.is_valid(k) && best.map_or(true, |(_, b)| u.get(k) < b) {
                best = Some((k, u.get(k)));
            }
        });
        best.ok_or(LandisError::EmptyDisc(c.re, c.im, 1.2))?
    };
    if k1.1 >= a {
        return Ok(GradientCase::Uniform { a, min_u: k1.1 });
    }
    let v = to_divergence_form(&u, m)?;
    let measured = gradient_norm(&v).sup_norm(c, 1.2)?;
    let z1 = u.grid().point(k1.0);
    Ok(GradientCase::Gradient { a, bound: gradient_lower_bound(m.m, m.k), measured, z1: (z1.re, z1.im) })
}
