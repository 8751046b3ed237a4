//! Exterior-domain machinery: Carleman weight, cutoff geometry, the weighted
//! right-hand-side terms and the τ schedule.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cauchy::{anchored_cauchy_transform, CauchyQuadrature};
use crate::error::{LandisError, Result};
use crate::field::{ComplexField, ScalarField};
use crate::grid::{Grid, GridSpec};
use crate::multiplier::{build_multiplier, normalize_at, BuildOptions, Multiplier};
use crate::ops::{dbar, del, laplacian};
use crate::potential::PotentialPair;
use crate::reduction::{approximate_stream_function, assemble_g, coefficients, to_divergence_form, ApproxStreamReport, Cutoff};

/// 6t⁵ − 15t⁴ + 10t³ clamped to [0, 1].
pub fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

pub fn smoothstep_deriv(t: f64) -> f64 {
    if !(0.0..=1.0).contains(&t) {
        return 0.0;
    }
    30.0 * t * t * (t - 1.0) * (t - 1.0)
}

/// φ_τ(z) = −τ log|z| + |z|².
pub fn weight(tau: f64, z: C64) -> Result<f64> {
    let r = z.norm();
    if r == 0.0 {
        return Err(LandisError::InvalidArgument("the Carleman weight is singular at 0".into()));
    }
    Ok(radial_weight(tau, r))
}

pub fn radial_weight(tau: f64, r: f64) -> f64 {
    -tau * r.ln() + r * r
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CarlemanWeight {
    pub tau: f64,
}

impl CarlemanWeight {
    /// τ > 8 keeps φ_τ decreasing on (0, 7/5].
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau > 8.0) {
            return Err(LandisError::InvalidArgument(format!("τ = {tau} must exceed 8")));
        }
        Ok(Self { tau })
    }

    pub fn eval(&self, z: C64) -> Result<f64> {
        weight(self.tau, z)
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LaplacianCheck {
    pub min: f64,
    pub max: f64,
}

/// Discrete Δφ_τ over nodes with 0.2 ≤ |z| ≤ 1.3 (exactly 4 in the continuum).
pub fn weight_laplacian_check(tau: f64, grid: &std::sync::Arc<Grid>) -> Result<LaplacianCheck> {
    let f = ScalarField::from_fn(grid.clone(), |z| radial_weight(tau, z.norm().max(1e-300)))?;
    let lap = laplacian(&f);
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for k in 0..grid.len() {
        let r = grid.point(k).norm();
        if lap.is_valid(k) && (0.2..=1.3).contains(&r) {
            min = min.min(lap.get(k));
            max = max.max(lap.get(k));
        }
    }
    if !min.is_finite() {
        return Err(LandisError::EmptyDisc(0.0, 0.0, 1.3));
    }
    Ok(LaplacianCheck { min, max })
}

/// Rescaled exterior geometry, with s = AR:
/// z1 = −(1/A + 5/(2s)), ẑ = −1/A, a = −1/A − 11/(8s),
/// χ = 0 on |z−z1| ≤ 17/(16s) and 1 on |z−z1| ≥ 9/(8s),
/// ζ = 1 on 1/(2s) ≤ |z| ≤ 1 and 0 off 1/(4s) < |z| < 6/5.
#[derive(Clone, Debug, Serialize)]
pub struct CutoffGeometry {
    pub big_a: f64,
    pub r: f64,
    /// (R, 0) before rescaling.
    pub z0: (f64, f64),
    pub z1: f64,
    pub zhat: f64,
    pub a: f64,
}

impl CutoffGeometry {
    pub fn new(big_a: f64, r: f64) -> Result<Self> {
        if !(big_a > 0.0 && r > 0.0) {
            return Err(LandisError::InvalidArgument("A and R must be positive".into()));
        }
        let s = big_a * r;
        let geo = Self {
            big_a,
            r,
            z0: (r, 0.0),
            z1: -(1.0 / big_a + 2.5 / s),
            zhat: -1.0 / big_a,
            a: -1.0 / big_a - 11.0 / (8.0 * s),
        };
        geo.check()?;
        Ok(geo)
    }

    pub fn scale(&self) -> f64 {
        self.big_a * self.r
    }

    fn check(&self) -> Result<()> {
        let s = self.scale();
        let fail = |what: &str| Err(LandisError::Invariant(format!("geometry (A={}, R={}): {what}", self.big_a, self.r)));
        if self.z1.abs() + 1.0 / s > 1.4 {
            return fail("B_{1/(AR)}(z1) ⊄ B_{7/5}");
        }
        let zh = self.zhat.abs();
        if zh - 1.0 / s <= 0.5 / s || zh + 1.0 / s >= 1.0 {
            return fail("ẑ-ball ⊄ Z");
        }
        if (self.zhat - self.z1).abs() - 1.0 / s < 9.0 / (8.0 * s) {
            return fail("ẑ-ball meets the χ transition");
        }
        Ok(())
    }

    pub fn zhat_point(&self) -> C64 {
        C64::new(self.zhat, 0.0)
    }

    pub fn z1_point(&self) -> C64 {
        C64::new(self.z1, 0.0)
    }

    /// ρ₀ = 1/A + 1/(AR), the largest |z| on the ẑ-ball.
    pub fn rho0(&self) -> f64 {
        1.0 / self.big_a + 1.0 / self.scale()
    }

    pub fn zeta(&self, z: C64) -> f64 {
        let s = self.scale();
        let r = z.norm();
        if r <= 0.5 / s {
            smoothstep((r - 0.25 / s) * 4.0 * s)
        } else if r <= 1.0 {
            1.0
        } else {
            smoothstep((1.2 - r) * 5.0)
        }
    }

    pub fn grad_zeta(&self, z: C64) -> (f64, f64) {
        let s = self.scale();
        let r = z.norm();
        if r == 0.0 {
            return (0.0, 0.0);
        }
        let d = if r <= 0.5 / s {
            smoothstep_deriv((r - 0.25 / s) * 4.0 * s) * 4.0 * s
        } else if r <= 1.0 {
            0.0
        } else {
            -smoothstep_deriv((1.2 - r) * 5.0) * 5.0
        };
        (d * z.re / r, d * z.im / r)
    }

    pub fn in_x(&self, z: C64) -> bool {
        let (s, r) = (self.scale(), z.norm());
        r > 0.25 / s && r < 0.5 / s
    }

    pub fn in_y(&self, z: C64) -> bool {
        let r = z.norm();
        r > 1.0 && r < 1.2
    }

    pub fn in_z(&self, z: C64) -> bool {
        let (s, r) = (self.scale(), z.norm());
        r > 0.5 / s && r < 1.0
    }

    pub fn in_ztilde(&self, z: C64) -> bool {
        let (s, r) = (self.scale(), z.norm());
        r > 0.25 / s && r < 1.2
    }

    pub fn in_g(&self, z: C64) -> bool {
        let s = self.scale();
        let d = (z - self.z1_point()).norm();
        (17.0 / (16.0 * s)..=9.0 / (8.0 * s)).contains(&d)
    }

    pub fn in_zhat_ball(&self, z: C64) -> bool {
        (z - self.zhat_point()).norm() <= 1.0 / self.scale()
    }

    /// {−6/5 < x < a, |y| < 9/(8AR)}.
    pub fn in_h2_support(&self, z: C64) -> bool {
        z.re > -1.2 && z.re < self.a && z.im.abs() < 9.0 / (8.0 * self.scale())
    }
}

impl Cutoff for CutoffGeometry {
    fn chi(&self, z: C64) -> f64 {
        let s = self.scale();
        let d = (z - self.z1_point()).norm();
        smoothstep((d - 17.0 / (16.0 * s)) * 16.0 * s)
    }

    fn grad_chi(&self, z: C64) -> (f64, f64) {
        let s = self.scale();
        let dz = z - self.z1_point();
        let d = dz.norm();
        if d == 0.0 {
            return (0.0, 0.0);
        }
        let g = smoothstep_deriv((d - 17.0 / (16.0 * s)) * 16.0 * s) * 16.0 * s;
        (g * dz.re / d, g * dz.im / d)
    }

    fn anchor(&self) -> f64 {
        self.a
    }

    fn near_transition(&self, z: C64, pad: f64) -> bool {
        let s = self.scale();
        let d = (z - self.z1_point()).norm();
        d >= 17.0 / (16.0 * s) - pad && d <= 9.0 / (8.0 * s) + pad
    }

    fn support_half_width(&self) -> Option<f64> {
        Some(9.0 / (8.0 * self.scale()))
    }
}

/// τ = C̃·AR·log(AR).
pub fn tau_schedule(big_a: f64, r: f64, c_tilde: f64) -> Result<f64> {
    let s = big_a * r;
    if !(s > std::f64::consts::E) {
        return Err(LandisError::InvalidArgument(format!("AR = {s} must exceed e")));
    }
    let tau = c_tilde * s * s.ln();
    if !(tau > 8.0) {
        return Err(LandisError::InvalidArgument(format!("τ = {tau} does not exceed 8")));
    }
    Ok(tau)
}

/// Natural logs of the four right-hand factors with unit constants, s = AR,
/// ρ₀ = 1/A + 1/s:
/// (i) log s + s log s + φ_τ(1/(4s)) − φ_τ(ρ₀), multiplying ∫_{B_{1/s}(0)}|u|²;
/// (ii) log s + s log s + φ_τ(1) − φ_τ(ρ₀);
/// (iii) log s + φ_τ(1/A + 29/(8s)) − φ_τ(ρ₀);
/// (iv) (s log s − τ)·11/(8s).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ClosedTerms {
    pub tau: f64,
    pub log_term1_factor: f64,
    pub log_term2: f64,
    pub log_term3: f64,
    pub log_term4: f64,
    /// s log s − τ < 0, so term (iv) decays.
    pub term4_valid: bool,
}

pub fn closed_terms(big_a: f64, r: f64, tau: f64) -> ClosedTerms {
    let s = big_a * r;
    let ls = s.ln();
    let rho0 = 1.0 / big_a + 1.0 / s;
    let p0 = radial_weight(tau, rho0);
    ClosedTerms {
        tau,
        log_term1_factor: ls + s * ls + radial_weight(tau, 0.25 / s) - p0,
        log_term2: ls + s * ls + radial_weight(tau, 1.0) - p0,
        log_term3: ls + radial_weight(tau, 1.0 / big_a + 29.0 / (8.0 * s)) - p0,
        log_term4: (s * ls - tau) * 11.0 / (8.0 * s),
        term4_valid: s * ls - tau < 0.0,
    }
}

/// Running log Σ e^{l_i}.
#[derive(Clone, Copy, Debug)]
pub struct LogAcc {
    max: f64,
    sum: f64,
}

impl Default for LogAcc {
    fn default() -> Self {
        Self { max: f64::NEG_INFINITY, sum: 0.0 }
    }
}

impl LogAcc {
    pub fn add(&mut self, l: f64) {
        if l == f64::NEG_INFINITY {
            return;
        }
        if l > self.max {
            self.sum = self.sum * (self.max - l).exp() + 1.0;
            self.max = l;
        } else {
            self.sum += (l - self.max).exp();
        }
    }

    pub fn value(&self) -> f64 {
        if self.sum == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

/// log(a + b + ...) from logs.
pub fn log_sum(ls: &[f64]) -> f64 {
    let mut acc = LogAcc::default();
    ls.iter().for_each(|&l| acc.add(l));
    acc.value()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CarlemanCheck {
    pub log_lhs: f64,
    pub log_rhs: f64,
    /// lhs/rhs, 1 when both vanish.
    pub ratio: f64,
}

impl CarlemanCheck {
    pub fn lhs(&self) -> f64 {
        self.log_lhs.exp()
    }
    pub fn rhs(&self) -> f64 {
        self.log_rhs.exp()
    }
}

/// ∫|∂̄h|²e^{φ_τ} against ∫|h|²e^{φ_τ} by nodal quadrature, in log space.
/// h must vanish on the nodes within two rings of the origin and of ∂B_{7/5}.
pub fn carleman_verify(h: &ComplexField, tau: f64) -> Result<CarlemanCheck> {
    CarlemanWeight::new(tau)?;
    let g = h.grid();
    if g.center().norm() > 1e-12 {
        return Err(LandisError::InvalidArgument("test functions live on a grid centered at 0".into()));
    }
    let hh = g.h();
    let pad = 2.0 * hh * std::f64::consts::SQRT_2;
    if g.radius() < 1.4 {
        return Err(LandisError::GridTooCoarse("grid must cover B_{7/5}".into()));
    }
    let scale = h.sup().max(1e-300);
    for k in 0..g.len() {
        let r = g.point(k).norm();
        let near_edge = r <= pad || r >= 1.4 - pad || g.depth(k) < 3;
        if near_edge && h.get(k).norm() > 1e-14 * scale {
            let p = g.point(k);
            return Err(LandisError::Precondition(format!(
                "support condition violated at ({}, {})",
                p.re, p.im
            )));
        }
    }
    let d = dbar(h);
    let mut lhs = LogAcc::default();
    let mut rhs = LogAcc::default();
    let lh2 = (hh * hh).ln();
    for k in 0..g.len() {
        let z = g.point(k);
        let r = z.norm();
        if r <= pad || !d.is_valid(k) {
            continue;
        }
        let wgt = radial_weight(tau, r) + lh2;
        let dv = d.get(k).norm_sqr();
        let hv = h.get(k).norm_sqr();
        if dv > 0.0 {
            lhs.add(dv.ln() + wgt);
        }
        if hv > 0.0 {
            rhs.add(hv.ln() + wgt);
        }
    }
    let (log_lhs, log_rhs) = (lhs.value(), rhs.value());
    let ratio = if log_rhs == f64::NEG_INFINITY {
        if log_lhs == f64::NEG_INFINITY {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        (log_lhs - log_rhs).exp()
    };
    Ok(CarlemanCheck { log_lhs, log_rhs, ratio })
}

/// exp(−1/(1 − s²)) for |s| < 1, else 0.
pub fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

/// Seeded smooth test function supported in 0.12 ≤ |z| ≤ 1.28: either a disc
/// bump times a random polynomial or a radial ring bump times a random zⁿ.
pub fn random_test_function(grid: &std::sync::Arc<Grid>, seed: u64) -> Result<ComplexField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<C64> = (0..5).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    if rng.gen_bool(0.5) {
        let rc = rng.gen_range(0.45..0.95);
        let c = C64::from_polar(rc, rng.gen_range(0.0..std::f64::consts::TAU));
        let rho = (rc - 0.12).min(1.28 - rc).min(0.5) * rng.gen_range(0.5..1.0);
        ComplexField::from_fn(grid.clone(), |z| {
            let b = bump((z - c).norm() / rho);
            if b == 0.0 {
                return C64::new(0.0, 0.0);
            }
            let dz = (z - c) / rho;
            let p = coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &a| acc * dz + a);
            p * b
        })
    } else {
        let mid: f64 = rng.gen_range(0.5..0.9);
        let width = (mid - 0.12).min(1.28 - mid) * rng.gen_range(0.5..1.0);
        let n = rng.gen_range(0..5);
        ComplexField::from_fn(grid.clone(), |z| coeffs[0] * z.powu(n) * bump((z.norm() - mid) / width))
    }
}

/// Logs of the right-hand terms: measured unweighted integrals times the
/// largest weight ratio e^{φ_τ(ρ) − φ_τ(ρ₀)} on each region, ρ₀ = 1/A + 1/(AR).
#[derive(Clone, Debug, Serialize)]
pub struct MeasuredTerms {
    pub tau: f64,
    /// log κ + log ∫_{ẑ-ball}|u_R|², a lower bound for ∫_{ẑ-ball}|ζh|²e^{φ_τ − φ_τ(ρ₀)}.
    pub log_lhs: f64,
    /// (i) e^{φ_τ(1/(4AR)) − φ_τ(ρ₀)}·2∫_X |∂̄ζ|²|h|².
    pub log_x: f64,
    /// (ii) e^{φ_τ(1) − φ_τ(ρ₀)}·2∫_Y |∂̄ζ|²|h|².
    pub log_y: f64,
    /// (iii) e^{φ_τ(1/A + 11/(8AR)) − φ_τ(ρ₀)}·6∫ζ²|H1|² over G.
    pub log_g: f64,
    /// (iv) e^{φ_τ(1/A + 11/(8AR)) − φ_τ(ρ₀)}·6∫ζ²|H2|².
    pub log_h2: f64,
    /// log min over the ẑ-ball of e^{2Re w}φ².
    pub log_kappa: f64,
    /// log ∫_{ẑ-ball}|u_R|².
    pub log_mass_zhat: f64,
    /// log ∫_{B_{1/AR}(0)}|u_R|².
    pub log_mass_origin: f64,
    /// log of K_i = 2∫_X|∂̄ζ|²|h|² / ∫_{B_{1/AR}(0)}|u_R|².
    pub log_k_interior: f64,
    /// φ_τ(1/(4AR)) − φ_τ(ρ₀).
    pub delta_phi_x: f64,
    /// Terms (ii)–(iv) together are at most half the left side.
    pub absorbed: bool,
    /// sup |∂̄h − H1 − H2| / sup(|∂h| + |h|) on Z̃ off the χ ring (discrete identity check, unweighted).
    pub identity_defect: f64,
    /// max |I| off {x < a, |y| < 9/(8AR)}, relative.
    pub h2_support_leak: f64,
    pub stream: ApproxStreamReport,
}

/// Reduces u_R with the normalized multiplier and evaluates the right-hand
/// terms of the Carleman inequality applied to ζh, h = e^w g.
pub fn rhs_terms(
    u: &ScalarField,
    m: &Multiplier,
    geom: &CutoffGeometry,
    tau: f64,
    q: &CauchyQuadrature,
) -> Result<MeasuredTerms> {
    CarlemanWeight::new(tau)?;
    let grid = u.grid().clone();
    if !grid.same_as(m.phi.grid()) {
        return Err(LandisError::GridMismatch);
    }
    let hh = grid.h();
    let lh2 = (hh * hh).ln();
    let s = geom.scale();
    let zhat = geom.zhat_point();
    let p0 = radial_weight(tau, geom.rho0());
    let ratio = |rho: f64| radial_weight(tau, rho) - p0;

    let v = to_divergence_form(u, m)?;
    let ap = approximate_stream_function(&v, m, geom)?;
    let chi = ScalarField::from_fn(grid.clone(), |z| geom.chi(z))?;
    let g = assemble_g(&v, &ap.vtilde, m, Some(&chi))?;
    let co = coefficients(m, None, &g)?;
    let alpha_t = co.tilde.map_with_point(|z, a| if z.norm() <= 1.4 { a } else { C64::new(0.0, 0.0) });
    let w = anchored_cauchy_transform(&alpha_t, zhat, q)?;
    let h = w.zip_with(&g, |wv, gv| wv.exp() * gv)?;
    let phi_u = m.phi.zip_with(u, |a, b| a * b)?;
    let h1 = phi_u.map_with_point(|z, pu| {
        let (cx, cy) = geom.grad_chi(z);
        C64::new(0.5 * cx, 0.5 * cy) * pu
    });
    let h1 = h1.zip_with(&w, |x, wv| x * wv.exp())?;
    let h2 = ap.correction.zip_with(&w, |i, wv| 0.5 * i * wv.exp())?;
    let dh = dbar(&h);
    let delh = del(&h);
    let rew = w.re();

    let mut tx = LogAcc::default();
    let mut ty = LogAcc::default();
    let mut th2 = LogAcc::default();
    let mut mz = LogAcc::default();
    let mut m0 = LogAcc::default();
    let mut log_kappa = f64::INFINITY;
    let ln2 = 2f64.ln();
    let ln6 = 6f64.ln();
    let mut leak = 0.0f64;
    let mut iscale = 0.0f64;
    let mut defect = 0.0f64;
    let mut dscale = 0.0f64;
    for k in 0..grid.len() {
        let z = grid.point(k);
        let uk = u.get(k);
        if (z - zhat).norm() <= 1.0 / s {
            mz.add(2.0 * uk.abs().ln() + lh2);
            if w.is_valid(k) {
                log_kappa = log_kappa.min(2.0 * rew.get(k) + 2.0 * m.psi.get(k));
            }
        }
        if z.norm() <= 1.0 / s {
            m0.add(2.0 * uk.abs().ln() + lh2);
        }
        if !geom.in_ztilde(z) || !h.is_valid(k) {
            continue;
        }
        let lhk = 2.0 * h.get(k).norm().ln();
        let (zx, zy) = geom.grad_zeta(z);
        let dz2 = 0.25 * (zx * zx + zy * zy);
        if dz2 > 0.0 {
            if geom.in_x(z) {
                tx.add(ln2 + dz2.ln() + lhk + lh2);
            } else if geom.in_y(z) {
                ty.add(ln2 + dz2.ln() + lhk + lh2);
            }
        }
        let zeta = geom.zeta(z);
        if zeta == 0.0 {
            continue;
        }
        let ic = ap.correction.get(k).abs();
        iscale = iscale.max(ic);
        if !geom.in_h2_support(z) && (z.re > geom.a + 2.0 * hh || z.im.abs() > 9.0 / (8.0 * s) + 2.0 * hh) {
            leak = leak.max(ic);
        }
        let h2k = h2.get(k).norm();
        if h2k > 0.0 {
            th2.add(ln6 + 2.0 * zeta.ln() + 2.0 * h2k.ln() + lh2);
        }
        if dh.is_valid(k) && !geom.near_transition(z, 2.0 * hh) {
            defect = defect.max((dh.get(k) - h1.get(k) - h2.get(k)).norm());
            dscale = dscale.max(delh.get(k).norm() + h.get(k).norm());
        }
    }

    // H1 lives on the χ transition, narrower than a cell: sub-sample ∂̄χ
    // against bilinear Re w and φu.
    let tg = ring_integral(&grid, geom, |z| {
        let (cx, cy) = geom.grad_chi(z);
        let d2 = 0.25 * (cx * cx + cy * cy);
        if d2 == 0.0 {
            return f64::NEG_INFINITY;
        }
        let (Some(wr), Some(pu)) = (rew.sample(z), phi_u.sample(z)) else {
            return f64::NEG_INFINITY;
        };
        ln6 + 2.0 * geom.zeta(z).ln() + d2.ln() + 2.0 * wr + 2.0 * pu.abs().ln()
    });

    let near_hole = 1.0 / geom.big_a + 11.0 / (8.0 * s);
    let log_mass_zhat = mz.value();
    let log_lhs = log_kappa + log_mass_zhat;
    let log_x = tx.value() + ratio(0.25 / s);
    let log_y = ty.value() + ratio(1.0);
    let log_g = tg + ratio(near_hole);
    let log_h2 = th2.value() + ratio(near_hole);
    let log_mass_origin = m0.value();
    let rest = log_sum(&[log_y, log_g, log_h2]);
    Ok(MeasuredTerms {
        tau,
        log_lhs,
        log_x,
        log_y,
        log_g,
        log_h2,
        log_kappa,
        log_mass_zhat,
        log_mass_origin,
        log_k_interior: tx.value() - log_mass_origin,
        delta_phi_x: ratio(0.25 / s),
        absorbed: rest <= log_lhs - ln2,
        identity_defect: if dscale > 0.0 { defect / dscale } else { 0.0 },
        h2_support_leak: if iscale > 0.0 { leak / iscale } else { 0.0 },
        stream: ap.report,
    })
}

/// log ∫ e^{f(z)} over cells meeting the χ transition, 8×8 midpoints per cell.
fn ring_integral(grid: &Grid, geom: &CutoffGeometry, f: impl Fn(C64) -> f64) -> f64 {
    const SUB: usize = 8;
    let h = grid.h();
    let mut acc = LogAcc::default();
    let lsub = (h * h / (SUB * SUB) as f64).ln();
    for k in 0..grid.len() {
        let z = grid.point(k);
        // Cell [z, z + h]², kept if its center is near the ring.
        let c = z + C64::new(0.5 * h, 0.5 * h);
        if !geom.near_transition(c, h) {
            continue;
        }
        for i in 0..SUB {
            for j in 0..SUB {
                let p = z + C64::new((i as f64 + 0.5) * h / SUB as f64, (j as f64 + 0.5) * h / SUB as f64);
                acc.add(f(p) + lsub);
            }
        }
    }
    acc.value()
}

/// Entire test families on B₁ᶜ, all with V ≡ 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ExteriorFamily {
    /// e^{−x}.
    Exp,
    /// u ≡ 0 (fails the a-priori mass condition).
    Zero,
}

impl ExteriorFamily {
    pub fn eval(&self, z: C64) -> f64 {
        match self {
            ExteriorFamily::Exp => (-z.re).exp(),
            ExteriorFamily::Zero => 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ExteriorOptions {
    /// Fine grid size on B_2; by default 48·AR rounded up to a multiple of 8.
    pub n_fine: Option<usize>,
    /// Multiplier grid size on B_2 (then interpolated).
    pub n_multiplier: usize,
    pub quadrature: CauchyQuadrature,
    pub build: BuildOptions,
}

impl Default for ExteriorOptions {
    fn default() -> Self {
        Self {
            n_fine: None,
            n_multiplier: 512,
            quadrature: CauchyQuadrature::default(),
            build: BuildOptions { tol: 1e-10, ..BuildOptions::default() },
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExteriorReport {
    /// |z0| in the original coordinates.
    pub r: f64,
    /// R − 5/2, the radius after moving the origin to distance 5/2 from the hole.
    pub r_int: f64,
    pub big_a: f64,
    pub tau: f64,
    pub n_fine: usize,
    /// Normalization 1/S applied when the footprint sup S exceeds 1.
    pub footprint_sup: f64,
    /// min over |p| = 5/2 of ∫_{B_1(p)}|u|².
    pub apriori_mass: f64,
    pub closed: ClosedTerms,
    pub measured: MeasuredTerms,
    /// log of the interior constant used: max(K_i, model AR·(AR)^{AR}).
    pub log_k_used: f64,
    pub interior_within_model: bool,
    /// Certified lower bound on log ∫_{B_1(z0)}|u|².
    pub log_certified_mass: f64,
    /// Quadrature value of log ∫_{B_1(z0)}|u|².
    pub log_measured_mass: f64,
    /// C' with certified sup ≥ exp(−C'R(log R)²), sup ≥ (mass/π)^{1/2}.
    pub c_prime: f64,
}

/// min over `angles` points p on |p| = 5/2 of ∫_{B_1(p)}|u|², polar midpoint rule.
pub fn apriori_mass(u: impl Fn(C64) -> f64, angles: usize) -> f64 {
    const NR: usize = 32;
    const NT: usize = 64;
    (0..angles)
        .map(|i| {
            let p = C64::from_polar(2.5, std::f64::consts::TAU * i as f64 / angles as f64);
            let mut acc = 0.0;
            for a in 0..NR {
                let rho = (a as f64 + 0.5) / NR as f64;
                for b in 0..NT {
                    let t = std::f64::consts::TAU * (b as f64 + 0.5) / NT as f64;
                    let val = u(p + C64::from_polar(rho, t));
                    acc += val * val * rho;
                }
            }
            acc * (1.0 / NR as f64) * (std::f64::consts::TAU / NT as f64)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Direction of the worst z0 on |z0| = R: min over angles of the sampled sup on B_1(z0).
fn worst_direction(u: impl Fn(C64) -> f64, r: f64, angles: usize) -> f64 {
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..angles {
        let t = std::f64::consts::TAU * i as f64 / angles as f64;
        let z0 = C64::from_polar(r, t);
        let mut sup = 0.0f64;
        for a in 0..=8 {
            for b in 0..32 {
                let p = z0 + C64::from_polar(a as f64 / 8.0, std::f64::consts::TAU * b as f64 / 32.0);
                sup = sup.max(u(p).abs());
            }
        }
        if sup < best.0 {
            best = (sup, t);
        }
    }
    best.1
}

/// Full exterior run at |z0| = R: rotate the worst direction onto e₁, move the
/// origin to 5/2 from the hole, rescale by s = A(R − 5/2), build and
/// normalize φ at ẑ, reduce, and evaluate the weighted terms with τ = C̃ s log s.
pub fn exterior_pipeline(
    family: ExteriorFamily,
    big_a: f64,
    r: f64,
    c_tilde: f64,
    opts: &ExteriorOptions,
) -> Result<ExteriorReport> {
    let r_int = r - 2.5;
    if r_int < 4.0 {
        return Err(LandisError::InvalidArgument(format!("R = {r} must be at least 6.5")));
    }
    let geom = CutoffGeometry::new(big_a, r_int)?;
    let s = geom.scale();
    let tau = tau_schedule(big_a, r_int, c_tilde)?;
    let c0 = apriori_mass(|z| family.eval(z), 64);
    if !(c0 > 0.0) {
        return Err(LandisError::Precondition("a-priori mass condition fails: inf ∫_{B_1(p)}|u|² = 0".into()));
    }
    let angle = worst_direction(|z| family.eval(z), r, 64);
    let rot = C64::from_polar(1.0, angle);

    let n = match opts.n_fine {
        Some(n) => n,
        None => ((48.0 * s / 8.0).ceil() as usize * 8).max(256),
    };
    if n > 2048 {
        return Err(LandisError::GridTooCoarse(format!("AR = {s} needs a {n}-node fine grid")));
    }
    let grid = GridSpec::disc(2.0, n)?.build();
    let map = |z: C64| rot * (z * s + r);
    let raw = ScalarField::from_fn(grid.clone(), |z| family.eval(map(z)))?;
    // Sup over the footprint outside the hole |original| < 1.
    let mut sup = 0.0f64;
    for k in 0..grid.len() {
        if map(grid.point(k)).norm() >= 1.0 {
            sup = sup.max(raw.get(k).abs());
        }
    }
    let norm = if sup > 1.0 { 1.0 / sup } else { 1.0 };
    let u = raw.map(|x| x * norm);

    let mgrid = GridSpec::disc(2.0, opts.n_multiplier.min(n))?.build();
    let pot = PotentialPair::constant(mgrid, s * s, (0.0, 0.0), s * s, 1.0)?;
    let m = build_multiplier(&pot, opts.build)?;
    let (m, _) = normalize_at(&m, geom.zhat_point(), 2.0)?;
    let m = m.resample(grid.clone())?;

    let measured = rhs_terms(&u, &m, &geom, tau, &opts.quadrature)?;
    let closed = closed_terms(big_a, r_int, tau);
    let log_k_model = s.ln() + s * s.ln();
    let interior_within_model = measured.log_k_interior <= log_k_model;
    let log_k_used = measured.log_k_interior.max(log_k_model);
    // ∫_{B_{1/s}(0)}|u_R|² ≥ κ ∫_{ẑ-ball}|u_R|² / (2 K e^{Δφ_X}); undo the
    // rescaling (factor s²) and the normalization.
    let log_back = 2.0 * s.ln() - 2.0 * norm.ln();
    let log_certified_mass = if measured.absorbed {
        measured.log_lhs - 2f64.ln() - log_k_used - measured.delta_phi_x + log_back
    } else {
        f64::NEG_INFINITY
    };
    let log_measured_mass = measured.log_mass_origin + log_back;
    let log_sup = 0.5 * (log_certified_mass - PI.ln());
    let c_prime = -log_sup / (r * r.ln() * r.ln());
    Ok(ExteriorReport {
        r,
        r_int,
        big_a,
        tau,
        n_fine: n,
        footprint_sup: sup,
        apriori_mass: c0,
        closed,
        measured,
        log_k_used,
        interior_within_model,
        log_certified_mass,
        log_measured_mass,
        c_prime,
    })
}
