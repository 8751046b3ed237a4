//! Three-circle certificates and vanishing-order estimates.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::cauchy::{similarity_factorize, CauchyQuadrature};
use crate::error::{LandisError, Result};
use crate::field::{ComplexField, ScalarField};
use crate::multiplier::{build_multiplier, BuildOptions, Multiplier};
use crate::ops::{dbar, del};
use crate::potential::PotentialPair;
use crate::reduction::{drift_reduction, gradient_case_analysis, reduce, to_divergence_form, GradientCase};

/// Relative ∂̄ defect r2·‖∂̄h‖/‖h‖ above which h is not treated as holomorphic.
pub const HOLOMORPHY_TOL: f64 = 0.05;
/// Residual of ∂̄g = coeff·g relative to max(‖∂̄g‖, ‖g‖/r) accepted by the pipeline.
pub const REDUCTION_TOL: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ThetaVariant {
    /// Inner radius r: θ = log(r2/r1)/log(r2/r).
    Standard,
    /// Inner radius r/2: θ = log(r2/r1)/log(2r2/r).
    Paper,
}

impl ThetaVariant {
    pub fn inner_radius(self, r: f64) -> f64 {
        match self {
            ThetaVariant::Standard => r,
            ThetaVariant::Paper => 0.5 * r,
        }
    }

    pub fn theta(self, r: f64, r1: f64, r2: f64) -> Result<f64> {
        match self {
            ThetaVariant::Standard => theta_standard(r, r1, r2),
            ThetaVariant::Paper => theta(r, r1, r2),
        }
    }
}

/// θ = log(r2/r1)/log(2r2/r).
pub fn theta(r: f64, r1: f64, r2: f64) -> Result<f64> {
    if !(r > 0.0 && 0.5 * r < r1 && r1 < r2) {
        return Err(LandisError::InvalidArgument(format!("need r/2 < r1 < r2 (got r={r}, r1={r1}, r2={r2})")));
    }
    Ok((r2 / r1).ln() / (2.0 * r2 / r).ln())
}

/// θ = log(r2/r1)/log(r2/r).
pub fn theta_standard(r: f64, r1: f64, r2: f64) -> Result<f64> {
    if !(r > 0.0 && r < r1 && r1 < r2) {
        return Err(LandisError::InvalidArgument(format!("need r < r1 < r2 (got r={r}, r1={r1}, r2={r2})")));
    }
    Ok((r2 / r1).ln() / (r2 / r).ln())
}

#[derive(Clone, Debug, Serialize)]
pub struct ThreeCircleCertificate {
    pub r: f64,
    pub r1: f64,
    pub r2: f64,
    pub variant: ThetaVariant,
    pub theta: f64,
    pub sup_inner: f64,
    pub sup_mid: f64,
    pub sup_outer: f64,
    pub premultiplier: f64,
    pub log_premultiplier: f64,
    pub order_bound: f64,
}

impl ThreeCircleCertificate {
    fn assemble(
        r: f64,
        r1: f64,
        r2: f64,
        variant: ThetaVariant,
        sups: (f64, f64, f64),
        log_premultiplier: f64,
    ) -> Result<Self> {
        let th = variant.theta(r, r1, r2)?;
        let (sup_inner, sup_mid, sup_outer) = sups;
        let order_bound = (sup_mid.ln() - log_premultiplier - (1.0 - th) * sup_outer.ln()) / (th * r.ln());
        Ok(Self {
            r,
            r1,
            r2,
            variant,
            theta: th,
            sup_inner,
            sup_mid,
            sup_outer,
            premultiplier: log_premultiplier.exp(),
            log_premultiplier,
            order_bound,
        })
    }

    /// log(sup_mid) − θ·log(sup_inner) − (1−θ)·log(sup_outer); ≤ 0 for holomorphic input.
    pub fn slack(&self) -> f64 {
        self.sup_mid.ln() - self.theta * self.sup_inner.ln() - (1.0 - self.theta) * self.sup_outer.ln()
    }

    /// Lower bound on log ‖·‖ on the inner disc implied by the mid and outer norms.
    pub fn log_inner_lower(&self) -> f64 {
        (self.sup_mid.ln() - (1.0 - self.theta) * self.sup_outer.ln()) / self.theta
    }
}

fn check_radii(r: f64, r1: f64, r2: f64) -> Result<()> {
    if r2 > 1.4 + 1e-12 {
        return Err(LandisError::InvalidArgument(format!("r2 = {r2} exceeds 7/5")));
    }
    if r1 >= r2 || r <= 0.0 {
        return Err(LandisError::InvalidArgument("radii out of order".into()));
    }
    Ok(())
}

/// Three-circle check on grid sup-norms over closed discs about the grid center.
pub fn hadamard_check(h: &ComplexField, r: f64, r1: f64, r2: f64, variant: ThetaVariant) -> Result<ThreeCircleCertificate> {
    check_radii(r, r1, r2)?;
    let c = h.grid().center();
    let defect = relative_dbar_defect(h, r2)?;
    if defect > HOLOMORPHY_TOL {
        return Err(LandisError::Precondition(format!("∂̄ defect {defect:.3e} on B_{r2}: input is not holomorphic")));
    }
    let rin = variant.inner_radius(r);
    let sups = (h.sup_norm(c, rin)?, h.sup_norm(c, r1)?, h.sup_norm(c, r2)?);
    ThreeCircleCertificate::assemble(r, r1, r2, variant, sups, 0.0)
}

/// ‖∂̄h‖ / max(‖∂h‖, ‖h‖/r2) on B_r2: scale-free, 1 for conj(z).
pub fn relative_dbar_defect(h: &ComplexField, r2: f64) -> Result<f64> {
    let c = h.grid().center();
    let d = dbar(h).sup_norm(c, r2)?;
    let scale = del(h).sup_norm(c, r2)?.max(h.sup_norm(c, r2)? / r2);
    Ok(if scale > 0.0 { d / scale } else { 0.0 })
}

/// Three-circle check with sup-norms of a holomorphic function taken on the
/// circles themselves (maximum principle): dense sampling plus golden-section
/// refinement around the best samples.
pub fn hadamard_check_analytic(
    f: impl Fn(C64) -> C64,
    r: f64,
    r1: f64,
    r2: f64,
    variant: ThetaVariant,
) -> Result<ThreeCircleCertificate> {
    check_radii(r, r1, r2)?;
    let rin = variant.inner_radius(r);
    let sups = (circle_sup(&f, rin), circle_sup(&f, r1), circle_sup(&f, r2));
    ThreeCircleCertificate::assemble(r, r1, r2, variant, sups, 0.0)
}

/// max over |z| = ρ of |f(z)|.
pub fn circle_sup(f: &impl Fn(C64) -> C64, rho: f64) -> f64 {
    const SAMPLES: usize = 2048;
    let step = std::f64::consts::TAU / SAMPLES as f64;
    let val = |t: f64| f(C64::from_polar(rho, t)).norm();
    let mut samples: Vec<(f64, f64)> = (0..SAMPLES).map(|i| (val(i as f64 * step), i as f64 * step)).collect();
    samples.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = samples[0].0;
    for &(_, t0) in samples.iter().take(8) {
        let (mut a, mut b) = (t0 - step, t0 + step);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        for _ in 0..60 {
            if val(c) > val(d) {
                b = d;
            } else {
                a = c;
            }
            c = b - g * (b - a);
            d = a + g * (b - a);
        }
        best = best.max(val(0.5 * (a + b)));
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DriftForm {
    /// Δu − ∇·(Wu) − Vu = 0.
    Divergence,
    /// Δu + W·∇u − Vu = 0.
    Gradient,
}

#[derive(Clone, Copy, Debug)]
pub struct OrderOptions {
    pub form: DriftForm,
    pub build: BuildOptions,
    pub quadrature: CauchyQuadrature,
}

impl Default for OrderOptions {
    fn default() -> Self {
        Self { form: DriftForm::Divergence, build: BuildOptions::default(), quadrature: CauchyQuadrature::default() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StageCheck {
    pub stage: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl StageCheck {
    fn new(stage: &'static str, value: f64, threshold: f64) -> Self {
        Self { stage, value, threshold, pass: value <= threshold }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OrderEstimate {
    pub r: f64,
    /// Certified E with sup_{B_r}|u| ≥ r^E.
    pub exponent: f64,
    /// E / (√M + K).
    pub constant: f64,
    pub certificate: Option<ThreeCircleCertificate>,
    /// "three-circle", or "uniform" for the gradient-form branch u ≥ a on B_{6/5}.
    pub branch: &'static str,
    /// Measured transfer constant Γ between the reduced function and u.
    pub transfer: f64,
    pub min_re_w: f64,
    pub checks: Vec<StageCheck>,
    /// All stage checks passed.
    pub valid: bool,
    /// r below the smallest resolvable radius 4h.
    pub extrapolated: bool,
}

/// Geometric probe radii in [max(4h, 0.02), 1/2] for the transfer constant.
fn transfer_radii(h: f64) -> Vec<f64> {
    let lo = (4.0 * h).max(0.02);
    let hi = 0.5;
    if lo >= hi {
        return vec![hi];
    }
    (0..8).map(|i| lo * (hi / lo).powf(i as f64 / 7.0)).collect()
}

/// Certified vanishing order at radius r. Runs the multiplier, the reduction
/// to a ∂̄ system, the similarity factorization and the three-circle chain
/// (r1, r2) = (1, 6/5) for divergence drift or (6/5, 7/5) for gradient drift.
pub fn vanishing_order_bound(
    u: &ScalarField,
    p: &PotentialPair,
    c0: f64,
    r: f64,
    opts: &OrderOptions,
) -> Result<OrderEstimate> {
    let m = build_multiplier(p, opts.build)?;
    vanishing_order_bound_with(u, p, &m, c0, r, opts)
}

/// As `vanishing_order_bound` with a prebuilt multiplier.
pub fn vanishing_order_bound_with(
    u: &ScalarField,
    p: &PotentialPair,
    m: &Multiplier,
    c0: f64,
    r: f64,
    opts: &OrderOptions,
) -> Result<OrderEstimate> {
    let grid = u.grid().clone();
    if !grid.same_as(p.grid()) {
        return Err(LandisError::GridMismatch);
    }
    let c = grid.center();
    let lambda = p.lambda();
    let h = grid.h();
    if !(r > 0.0 && r < 1.0) {
        return Err(LandisError::InvalidArgument(format!("radius {r} not in (0, 1)")));
    }
    let u2 = u.sup();
    if u2 > (c0 * lambda).exp() * (1.0 + 1e-12) {
        return Err(LandisError::Precondition(format!("‖u‖_(B_2) = {u2} exceeds exp(C0(√M+K))")));
    }
    let u1 = u.sup_norm(c, 1.0)?;
    if u1 < 1.0 - 1e-12 {
        return Err(LandisError::Precondition(format!("‖u‖_(B_1) = {u1} < 1")));
    }
    let extrapolated = r < 4.0 * h;
    let w = match opts.form {
        DriftForm::Divergence if p.w.0.sup() == 0.0 && p.w.1.sup() == 0.0 => None,
        _ => Some(&p.w),
    };
    let mut checks = vec![StageCheck::new(
        "multiplier",
        m.report.as_ref().map_or(0.0, |b| b.residual * h * h),
        10.0 * opts.build.tol,
    )];

    // Reduced function F (g or G = ∂v), its coefficient, and the radii.
    let (fred, coeff, r1, r2, grad_scale) = match opts.form {
        DriftForm::Divergence => {
            let red = reduce(u, m, w, None)?;
            checks.push(StageCheck::new("reduction", red.report.relative_residual(), REDUCTION_TOL));
            (red.g, red.coeff, 1.0, 1.2, false)
        }
        DriftForm::Gradient => {
            match gradient_case_analysis(u, m)? {
                GradientCase::Uniform { a, .. } => {
                    let exponent = a.ln() / r.ln();
                    return Ok(OrderEstimate {
                        r,
                        exponent,
                        constant: exponent / lambda,
                        certificate: None,
                        branch: "uniform",
                        transfer: 1.0,
                        min_re_w: 0.0,
                        valid: checks.iter().all(|c| c.pass),
                        checks,
                        extrapolated,
                    });
                }
                GradientCase::Gradient { bound, measured, .. } => {
                    checks.push(StageCheck::new("gradient-branch", bound, measured));
                }
            }
            let v = to_divergence_form(u, m)?;
            let dr = drift_reduction(&v, m, Some(&p.w))?;
            checks.push(StageCheck::new("reduction", dr.residual / dr.scale.max(1e-300), REDUCTION_TOL));
            (dr.g, dr.wtilde, 1.2, 1.4, true)
        }
    };
    let (wfield, hfield, fact) = similarity_factorize(&fred, &coeff, &opts.quadrature)?;
    let defect = relative_dbar_defect(&hfield, r2)?;
    checks.push(StageCheck::new("holomorphy", defect, HOLOMORPHY_TOL));
    let _ = fact;

    // Grid sup on B_{r1} is a lower bound; pad the outer disc by h for an upper one.
    let sup_mid = hfield.sup_norm(c, r1)?;
    let sup_outer = hfield.sup_norm(c, r2 + h)?;
    let rin = ThetaVariant::Paper.inner_radius(r);
    let sup_inner = hfield.sup_norm(c, rin.max(h)).unwrap_or(0.0);
    let min_re_w = {
        let mut best = f64::INFINITY;
        grid.for_each_in_disc(c, r2, |k| {
            if wfield.is_valid(k) {
                best = best.min(wfield.get(k).re);
            }
        });
        best
    };
    // Γ = max over probe radii ρ of (ρ if gradient)·‖F‖_{B_{ρ/2 + h}} / ‖u‖_{B_ρ}.
    let mut transfer = 0.0f64;
    for rho in transfer_radii(h) {
        let num = fred.sup_norm(c, 0.5 * rho + h)?;
        let den = u.sup_norm(c, rho)?;
        if den > 0.0 {
            let scale = if grad_scale { rho } else { 1.0 };
            transfer = transfer.max(scale * num / den);
        }
    }
    if !(transfer > 0.0) {
        return Err(LandisError::Invariant("u vanishes on every probe disc".into()));
    }
    let th = theta(r, r1, r2)?;
    let log_prem = th * (transfer.ln() - min_re_w - if grad_scale { r.ln() } else { 0.0 });
    let cert = ThreeCircleCertificate::assemble(r, r1, r2, ThetaVariant::Paper, (sup_inner, sup_mid, sup_outer), log_prem)?;
    if !cert.order_bound.is_finite() {
        return Err(LandisError::Invariant("degenerate certificate".into()));
    }
    let exponent = cert.order_bound;
    Ok(OrderEstimate {
        r,
        exponent,
        constant: exponent / lambda,
        certificate: Some(cert),
        branch: "three-circle",
        transfer,
        min_re_w,
        valid: checks.iter().all(|c| c.pass),
        checks,
        extrapolated,
    })
}

/// Least-squares slope of log sup_{B_r}|u| against log r; ∞ on exact vanishing.
pub fn empirical_order<T: crate::field::FieldValue>(u: &crate::field::Field<T>, radii: &[f64]) -> Result<f64> {
    let g = u.grid();
    if radii.len() < 4 {
        return Err(LandisError::InvalidArgument("need at least 4 radii".into()));
    }
    let lo = radii.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = radii.iter().copied().fold(0.0, f64::max);
    if hi < 10.0 * lo * (1.0 - 1e-12) {
        return Err(LandisError::InvalidArgument("radii must span a decade".into()));
    }
    if lo < 4.0 * g.h() * (1.0 - 1e-12) {
        return Err(LandisError::InvalidArgument(format!("radius {lo} below 4h = {}", 4.0 * g.h())));
    }
    let mut pts = Vec::with_capacity(radii.len());
    for &r in radii {
        let s = u.sup_norm(g.center(), r)?;
        if s == 0.0 {
            return Ok(f64::INFINITY);
        }
        pts.push((r.ln(), s.ln()));
    }
    Ok(slope(&pts))
}

pub(crate) fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Least-squares slope of ys against xs in log-log coordinates.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).map(|(x, y)| (x.ln(), y.ln())).collect();
    slope(&pts)
}
