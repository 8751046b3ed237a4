//! Positive multiplier φ with L*φ = Δφ + W·∇φ − Vφ = 0 on a disc.
//!
//! Built by monotone red–black Gauss–Seidel from the subsolution
//! e^{λx}, λ = √M + K, under Dirichlet data e^{2λ}. The iteration works on
//! φ̂ = φ·e^{−2λ} so the boundary data is 1.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{LandisError, Result};
use crate::field::ScalarField;
use crate::ops::{gradient, gradient_norm};
use crate::potential::PotentialPair;

/// Solver knobs.
#[derive(Clone, Copy, Debug)]
pub struct BuildOptions {
    /// Stop once every node changes by less than `tol` relative to its value.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_sweeps: 2_000_000 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BuildReport {
    pub sweeps: usize,
    pub tol: f64,
    /// ‖L*_h φ̂‖∞ over interior nodes, in units of the normalized φ̂ = φ e^{−2λ}.
    pub residual: f64,
    /// Node updates that decreased the iterate beyond rounding.
    pub monotone_violations: usize,
    /// Largest iterate value seen relative to the supersolution (≤ 1).
    pub max_over_super: f64,
}

#[derive(Clone, Debug)]
pub struct Multiplier {
    pub phi: ScalarField,
    pub psi: ScalarField,
    pub m: f64,
    pub k: f64,
    pub normalization_point: Option<C64>,
    pub report: Option<BuildReport>,
}

impl Multiplier {
    /// Wrap a known positive φ (tests and injected closed forms).
    pub fn from_phi(phi: ScalarField, m: f64, k: f64) -> Result<Self> {
        if (0..phi.len()).any(|i| phi.is_valid(i) && !(phi.get(i) > 0.0)) {
            return Err(LandisError::Precondition("φ must be positive".into()));
        }
        let psi = phi.map(f64::ln);
        Ok(Self { phi, psi, m, k, normalization_point: None, report: None })
    }

    /// Wrap a known ψ = log φ.
    pub fn from_psi(psi: ScalarField, m: f64, k: f64) -> Self {
        let phi = psi.map(f64::exp);
        Self { phi, psi, m, k, normalization_point: None, report: None }
    }

    pub fn lambda(&self) -> f64 {
        self.m.sqrt() + self.k
    }

    /// Interpolate ψ onto a finer grid covering the same disc.
    pub fn resample(&self, grid: std::sync::Arc<crate::grid::Grid>) -> Result<Self> {
        let psi = &self.psi;
        // Off the coarse disc: nearest valid coarse node within two spacings.
        let psi_fine = psi.resample_onto(grid, |p| {
            let g = psi.grid();
            let (fx, fy) = g.lattice_coords(p);
            let (ix, iy) = (fx.round() as i64, fy.round() as i64);
            (ix - 2..=ix + 2)
                .flat_map(|a| (iy - 2..=iy + 2).map(move |b| (a, b)))
                .filter_map(|(a, b)| g.node_at(a, b))
                .filter(|&k| psi.is_valid(k))
                .min_by(|&a, &b| (g.point(a) - p).norm().total_cmp(&(g.point(b) - p).norm()))
                .map(|k| psi.get(k))
        })?;
        let mut m = Self::from_psi(psi_fine, self.m, self.k);
        m.normalization_point = self.normalization_point;
        m.report = self.report.clone();
        Ok(m)
    }
}

/// L*φ₁ for φ₁ = e^{λx}: (λ² − V)e^{λx} + λe^{λx}W₁.
pub fn check_subsolution(lambda: f64, p: &PotentialPair) -> Result<ScalarField> {
    if !(lambda > 0.0) {
        return Err(LandisError::InvalidArgument("lambda must be positive".into()));
    }
    let g = p.grid().clone();
    let values = (0..g.len())
        .map(|k| {
            let e = (lambda * g.point(k).re).exp();
            (lambda * lambda - p.v.get(k)) * e + lambda * e * p.w.0.get(k)
        })
        .collect();
    ScalarField::new(g, values)
}

struct Row {
    k: u32,
    nbr: [u32; 4],
    coef: [f64; 4],
}

/// Per-node stencil of L*_h, normalized by the diagonal.
fn assemble(p: &PotentialPair) -> Result<(Vec<Row>, Vec<Row>)> {
    let g = p.grid();
    let h = g.h();
    let ih2 = 1.0 / (h * h);
    let mut red = Vec::new();
    let mut black = Vec::new();
    for k in 0..g.len() {
        if g.depth(k) == 0 {
            continue;
        }
        let (w1, w2) = (p.w.0.get(k), p.w.1.get(k));
        let a = [ih2 + 0.5 * w1 / h, ih2 - 0.5 * w1 / h, ih2 + 0.5 * w2 / h, ih2 - 0.5 * w2 / h];
        if a.iter().any(|&c| c < 0.0) {
            return Err(LandisError::GridTooCoarse(format!(
                "drift |W|·h/2 = {} > 1 breaks monotonicity",
                0.5 * h * w1.abs().max(w2.abs())
            )));
        }
        let d = 4.0 * ih2 + p.v.get(k);
        let row = Row { k: k as u32, nbr: g.neighbors_raw(k), coef: a.map(|c| c / d) };
        let (kx, ky) = g.lattice_index(k);
        if (kx + ky).rem_euclid(2) == 0 {
            red.push(row);
        } else {
            black.push(row);
        }
    }
    Ok((red, black))
}

/// Monotone iteration for φ on the potential's grid.
pub fn build_multiplier(p: &PotentialPair, opts: BuildOptions) -> Result<Multiplier> {
    let g = p.grid().clone();
    if !(opts.tol > 0.0) {
        return Err(LandisError::InvalidArgument("tol must be positive".into()));
    }
    let c = g.center();
    if c.re - g.radius() < -2.0 - 1e-12 || c.re + g.radius() > 2.0 + 1e-12 {
        return Err(LandisError::Precondition("the sandwich needs the disc inside -2 <= x <= 2".into()));
    }
    let lambda = p.lambda();
    let (red, black) = assemble(p)?;

    let mut phi: Vec<f64> = (0..g.len())
        .map(|k| if g.depth(k) == 0 { 1.0 } else { (lambda * (g.point(k).re - 2.0)).exp() })
        .collect();

    let mut violations = 0usize;
    let mut max_over = phi.iter().copied().fold(0.0, f64::max);
    let mut sweeps = 0usize;
    loop {
        let mut change = 0.0f64;
        for rows in [&red, &black] {
            for r in rows.iter() {
                let n = r.nbr;
                let new = r.coef[0] * phi[n[0] as usize]
                    + r.coef[1] * phi[n[1] as usize]
                    + r.coef[2] * phi[n[2] as usize]
                    + r.coef[3] * phi[n[3] as usize];
                let old = phi[r.k as usize];
                if new < old * (1.0 - 1e-13) {
                    violations += 1;
                }
                let rel = (new - old).abs() / new;
                if rel > change {
                    change = rel;
                }
                if new > max_over {
                    max_over = new;
                }
                phi[r.k as usize] = new;
            }
        }
        sweeps += 1;
        if change < opts.tol {
            break;
        }
        if sweeps >= opts.max_sweeps {
            return Err(LandisError::NoConvergence { iterations: sweeps, last_change: change });
        }
    }

    let phat = ScalarField::new(g.clone(), phi)?;
    let residual = operator_residual(p, &phat)?.sup();
    let report = BuildReport { sweeps, tol: opts.tol, residual, monotone_violations: violations, max_over_super: max_over };
    let psi = phat.map(|v| v.ln() + 2.0 * lambda);
    let mut m = Multiplier::from_psi(psi, p.m, p.k);
    m.report = Some(report);
    Ok(m)
}

/// Discrete L*_h f on interior nodes (centered drift).
pub fn operator_residual(p: &PotentialPair, f: &ScalarField) -> Result<ScalarField> {
    let g = f.grid().clone();
    let h = g.h();
    let ih2 = 1.0 / (h * h);
    let margin = f.margin() + 1;
    let values = (0..g.len())
        .map(|k| {
            if g.depth(k) < margin {
                return 0.0;
            }
            let n = g.neighbors_raw(k).map(|m| f.get(m as usize));
            let c = f.get(k);
            let lap = (n[0] + n[1] + n[2] + n[3] - 4.0 * c) * ih2;
            let drift = p.w.0.get(k) * (n[0] - n[1]) * 0.5 / h + p.w.1.get(k) * (n[2] - n[3]) * 0.5 / h;
            lap + drift - p.v.get(k) * c
        })
        .collect();
    ScalarField::with_margin(g, values, margin)
}

/// (∂xψ, ∂yψ).
pub fn grad_log(m: &Multiplier) -> (ScalarField, ScalarField) {
    gradient(&m.psi)
}

/// sup over B_r(center) of |∇ψ|.
pub fn lipschitz_constant(m: &Multiplier, r: f64) -> Result<f64> {
    if r > 1.4 + 1e-12 {
        return Err(LandisError::InvalidArgument(format!("r = {r} > 7/5")));
    }
    gradient_norm(&m.psi).sup_norm(m.psi.grid().center(), r)
}

/// ∫_{B_r(z)} |∇ψ|² / (C²(M+K²)r²).
pub fn morrey_check(m: &Multiplier, z: C64, r: f64, c: f64) -> Result<f64> {
    let lam = m.m.sqrt() + m.k;
    if (z - m.psi.grid().center()).norm() > 1.4 {
        return Err(LandisError::InvalidArgument("z outside B_{7/5}".into()));
    }
    if !(r > 1.0 / (c * lam) && r < 0.2) {
        return Err(LandisError::InvalidArgument(format!(
            "r = {r} outside the window ({}, 1/5)",
            1.0 / (c * lam)
        )));
    }
    let gn = gradient_norm(&m.psi);
    let integral = gn.integrate(|p| (p - z).norm() <= r + 1e-9 * gn.grid().h(), |_, v| v * v);
    Ok(integral / (c * c * (m.m + m.k * m.k) * r * r))
}

/// r·‖∇φ‖_{B_{a1 r}} / ((M+K)·‖φ‖_{B_{a2 r}}), the constant of the interior gradient estimate.
pub fn interior_gradient_ratio(m: &Multiplier, a1: f64, a2: f64, r: f64) -> Result<f64> {
    if !(a1 < a2) {
        return Err(LandisError::InvalidArgument("need a1 < a2".into()));
    }
    let c = m.phi.grid().center();
    let grad = gradient_norm(&m.phi).sup_norm(c, a1 * r)?;
    let sup = m.phi.sup_norm(c, a2 * r)?;
    Ok(r * grad / ((m.m + m.k) * sup))
}

#[derive(Clone, Debug, Serialize)]
pub struct NormalizationCheck {
    pub radius: f64,
    pub lipschitz: f64,
    pub c2: f64,
    pub min_phi: f64,
    pub max_phi: f64,
}

/// Scale φ so φ(ẑ) = 1 and verify 1/C₂ ≤ φ ≤ C₂ on B_{c/(√M+K)}(ẑ), C₂ = e^{cL}.
pub fn normalize_at(m: &Multiplier, zhat: C64, c: f64) -> Result<(Multiplier, NormalizationCheck)> {
    let g = m.psi.grid();
    if (zhat - g.center()).norm() > 1.4 + 1e-12 {
        return Err(LandisError::InvalidArgument("ẑ outside B_{7/5}".into()));
    }
    let shift = m.psi.sample(zhat).ok_or(LandisError::OutsideGrid(zhat.re, zhat.im))?;
    let psi = m.psi.map(|v| v - shift);
    let mut out = Multiplier::from_psi(psi, m.m, m.k);
    out.normalization_point = Some(zhat);
    out.report = m.report.clone();

    let radius = c / (m.m.sqrt() + m.k);
    let lipschitz = gradient_norm(&m.psi).sup_norm(g.center(), 1.4)?;
    let c2 = (c * lipschitz).exp();
    let mut min_phi = f64::INFINITY;
    let mut max_phi = 0.0f64;
    g.for_each_in_disc(zhat, radius, |k| {
        if out.phi.is_valid(k) {
            min_phi = min_phi.min(out.phi.get(k));
            max_phi = max_phi.max(out.phi.get(k));
        }
    });
    if !min_phi.is_finite() {
        // Ball thinner than the grid: the value at ẑ is 1 by construction.
        min_phi = 1.0;
        max_phi = 1.0;
    }
    let check = NormalizationCheck { radius, lipschitz, c2, min_phi, max_phi };
    if max_phi > c2 || min_phi < 1.0 / c2 {
        return Err(LandisError::Invariant(format!(
            "normalized φ leaves [1/C2, C2] = [{}, {}] on the ẑ-ball: [{min_phi}, {max_phi}]",
            1.0 / c2,
            c2
        )));
    }
    Ok((out, check))
}
