//! Rescaling of entire solutions onto B_2 and Landis-type decay curves.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LandisError, Result};
use crate::field::ScalarField;
use crate::grid::GridSpec;
use crate::multiplier::{build_multiplier, BuildOptions};
use crate::order::{vanishing_order_bound_with, OrderEstimate, OrderOptions, StageCheck};
use crate::potential::{zero_drift, PotentialPair};

/// Relative change of the inf-sup under doubling the angle count that flags a run.
pub const DOUBLING_TOL: f64 = 0.05;

/// Grid spacing of entire samples.
pub const SAMPLE_H: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Family {
    /// u = e^{−x}, V ≡ 1.
    Exp,
    /// u = 1 + Re zⁿ, V ≡ 0.
    Harmonic(u32),
    /// Gridded data only.
    Csv,
}

impl Family {
    pub fn exact(&self, z: C64) -> Option<f64> {
        match self {
            Family::Exp => Some((-z.re).exp()),
            Family::Harmonic(n) => Some(1.0 + z.powu(*n).re),
            Family::Csv => None,
        }
    }

    pub fn potential(&self) -> Option<f64> {
        match self {
            Family::Exp => Some(1.0),
            Family::Harmonic(_) => Some(0.0),
            Family::Csv => None,
        }
    }

    /// Smallest C0 with |u(z)| ≤ exp(C0|z|) for |z| ≤ radius.
    pub fn growth_constant(&self, radius: f64) -> f64 {
        match self {
            Family::Exp => 1.0,
            Family::Harmonic(n) => {
                // ln(1 + ρⁿ)/ρ on a fine radial grid, padded for the gaps.
                (1..=4000)
                    .map(|i| {
                        let rho = radius * i as f64 / 4000.0;
                        (1.0 + rho.powi(*n as i32)).ln() / rho
                    })
                    .fold(0.0, f64::max)
                    * 1.001
            }
            Family::Csv => f64::NAN,
        }
    }
}

/// Entire solution sampled on B_{R+2}(0). W ≡ 0.
#[derive(Clone, Debug)]
pub struct EntireSample {
    pub family: Family,
    pub u: ScalarField,
    pub v: ScalarField,
    pub c0: f64,
}

impl EntireSample {
    pub fn closed_form(family: Family, radius: f64) -> Result<Self> {
        let vconst = family
            .potential()
            .ok_or_else(|| LandisError::InvalidArgument("csv samples need data".into()))?;
        let n = (2.0 * radius / SAMPLE_H).round() as usize;
        let grid = GridSpec::disc(radius, n)?.build();
        let u = ScalarField::from_fn(grid.clone(), |z| family.exact(z).unwrap_or(0.0))?;
        let v = ScalarField::constant(grid, vconst);
        let c0 = family.growth_constant(radius);
        Self::new(family, u, v, c0)
    }

    /// Checks |u| ≤ exp(C0|z|)(1 + 1e-9) and u(0) = 1 ± 1e-9.
    pub fn new(family: Family, u: ScalarField, v: ScalarField, c0: f64) -> Result<Self> {
        let g = u.grid().clone();
        if !g.same_as(v.grid()) {
            return Err(LandisError::GridMismatch);
        }
        if g.center().norm() > 1e-12 {
            return Err(LandisError::InvalidArgument("entire samples are centered at 0".into()));
        }
        for k in 0..g.len() {
            let z = g.point(k);
            if u.get(k).abs() > (c0 * z.norm()).exp() * (1.0 + 1e-9) {
                return Err(LandisError::Precondition(format!("growth bound fails at ({}, {})", z.re, z.im)));
            }
        }
        let u0 = u.at(C64::new(0.0, 0.0))?;
        if (u0 - 1.0).abs() > 1e-9 {
            return Err(LandisError::Precondition(format!("u(0) = {u0}, expected 1")));
        }
        Ok(Self { family, u, v, c0 })
    }

    pub fn radius(&self) -> f64 {
        self.u.grid().radius()
    }

    /// u at an arbitrary point: exact evaluator, else bilinear on the grid.
    pub fn eval(&self, z: C64) -> Result<f64> {
        match self.family.exact(z) {
            Some(v) => Ok(v),
            None => self.u.sample(z).ok_or(LandisError::OutsideGrid(z.re, z.im)),
        }
    }

    fn eval_v(&self, z: C64) -> Result<f64> {
        match self.family.potential() {
            Some(v) => Ok(v),
            None => self.v.sample(z).ok_or(LandisError::OutsideGrid(z.re, z.im)),
        }
    }

    /// Copy of the sample rotated by `angle` (u'(z) = u(e^{−i·angle}z)).
    pub fn rotated(&self, angle: f64) -> Result<Self> {
        let rot = C64::from_polar(1.0, -angle);
        let g = self.u.grid().clone();
        let src = &self.u;
        let u = ScalarField::from_fn(g.clone(), |z| src.sample(z * rot).unwrap_or_else(|| src.at(z * rot).unwrap_or(0.0)))?;
        let v = self.v.clone();
        Ok(Self { family: Family::Csv, u, v, c0: self.c0 })
    }
}

/// (u_R, V_R) on B_2 with u_R(z) = u(ARz + z0), V_R = (AR)²V(ARz + z0).
#[derive(Clone, Debug)]
pub struct LocalProblem {
    pub u: ScalarField,
    pub potential: PotentialPair,
    pub zhat: C64,
    pub scale: f64,
    pub z0: C64,
    /// ‖u_R‖_{B_2} ≤ exp(c0_local(√M+K)).
    pub c0_local: f64,
}

pub fn rescale(s: &EntireSample, z0: C64, a: f64, n: usize) -> Result<LocalProblem> {
    let r = z0.norm();
    if r < 4.0 - 1e-12 {
        return Err(LandisError::InvalidArgument(format!("|z0| = {r} < 4")));
    }
    if a < 1.0 {
        return Err(LandisError::InvalidArgument("A must be at least 1".into()));
    }
    let scale = a * r;
    if s.family.exact(z0).is_none() && r + 2.0 * scale > s.radius() {
        return Err(LandisError::GridTooCoarse(format!(
            "sample radius {} does not cover B_{}(z0)",
            s.radius(),
            2.0 * scale
        )));
    }
    let grid = GridSpec::disc(2.0, n)?.build();
    let map = |z: C64| z * scale + z0;
    let pts = grid.points();
    let u_vals: Result<Vec<f64>> = pts.par_iter().map(|&z| s.eval(map(z))).collect();
    let v_vals: Result<Vec<f64>> = pts.par_iter().map(|&z| Ok(scale * scale * s.eval_v(map(z))?)).collect();
    let u = ScalarField::new(grid.clone(), u_vals?)?;
    let v = ScalarField::new(grid.clone(), v_vals?)?;
    let m = v.sup().max(1.0);
    let potential = PotentialPair::new(v, zero_drift(&grid), m, 1.0)?;
    let c0_local = s.c0 * (r + 2.0 * scale) / potential.lambda();
    Ok(LocalProblem { u, potential, zhat: -z0 / scale, scale, z0, c0_local })
}

/// exp(−E·log R).
pub fn landis_bound(order_exponent: f64, r: f64) -> f64 {
    log_landis_bound(order_exponent, r).exp()
}

pub fn log_landis_bound(order_exponent: f64, r: f64) -> f64 {
    -order_exponent * r.ln()
}

#[derive(Clone, Debug, Serialize)]
pub struct InfSup {
    pub value: f64,
    pub argmin: (f64, f64),
    pub doubled: f64,
    /// Doubling the angle count moved the result by more than 5%.
    pub flagged: bool,
}

/// min over `n_angles` equally spaced z0 on |z0| = R of sup_{B_1(z0)}|u|.
pub fn inf_sup_measure(s: &EntireSample, r: f64, n_angles: usize) -> Result<InfSup> {
    if n_angles < 8 {
        return Err(LandisError::InvalidArgument("n_angles must be at least 8".into()));
    }
    if r + 1.0 > s.radius() + 1e-9 {
        return Err(LandisError::GridTooCoarse(format!("B_1 discs at radius {r} leave the sample")));
    }
    if s.u.grid().h() > 0.25 {
        return Err(LandisError::GridTooCoarse("sample spacing does not resolve unit discs".into()));
    }
    let sweep = |count: usize| -> Result<(f64, C64)> {
        let vals: Result<Vec<(f64, C64)>> = (0..count)
            .into_par_iter()
            .map(|i| {
                let z0 = C64::from_polar(r, std::f64::consts::TAU * i as f64 / count as f64);
                Ok((s.u.sup_norm(z0, 1.0)?, z0))
            })
            .collect();
        Ok(vals?.into_iter().fold((f64::INFINITY, C64::new(0.0, 0.0)), |a, b| if b.0 < a.0 { b } else { a }))
    };
    let (value, arg) = sweep(n_angles)?;
    let (doubled, _) = sweep(2 * n_angles)?;
    let flagged = (value - doubled).abs() > DOUBLING_TOL * value.abs().max(1e-300);
    Ok(InfSup { value, argmin: (arg.re, arg.im), doubled, flagged })
}

#[derive(Clone, Debug, Serialize)]
pub struct LandisPoint {
    pub r: f64,
    pub measured_infsup: f64,
    pub exponent: f64,
    pub log_certified_bound: f64,
    pub certified_bound: f64,
    pub valid: bool,
    pub extrapolated: bool,
    pub flagged: bool,
    pub checks: Vec<StageCheck>,
}

#[derive(Clone, Copy, Debug)]
pub struct CurveOptions {
    pub a: f64,
    pub n_angles: usize,
    pub build: BuildOptions,
}

impl Default for CurveOptions {
    fn default() -> Self {
        Self { a: 2.0, n_angles: 64, build: BuildOptions { tol: 1e-9, ..BuildOptions::default() } }
    }
}

/// Largest local grid the curve will build.
pub const MAX_LOCAL_N: usize = 1024;

/// Local grid size for scale AR: h·AR ≤ 1/8 up to `MAX_LOCAL_N`.
pub fn local_grid_n(scale: f64) -> usize {
    let n = (16.0 * scale).max(128.0);
    ((n / 8.0).ceil() as usize * 8).min(MAX_LOCAL_N)
}

/// Measured inf-sup against the certified bound (AR)^{−E}, with E the order
/// of u_R at r = 1/(AR) about the worst point z0 of the sweep.
pub fn landis_point(family: &Family, r: f64, opts: &CurveOptions) -> Result<LandisPoint> {
    let sample = EntireSample::closed_form(family.clone(), r + 2.0)?;
    landis_point_for(&sample, r, opts)
}

/// As `landis_point` for a given sample; gridded samples must cover B_{(1+2A)R}.
pub fn landis_point_for(sample: &EntireSample, r: f64, opts: &CurveOptions) -> Result<LandisPoint> {
    let inf = inf_sup_measure(sample, r, opts.n_angles)?;
    let z0 = C64::new(inf.argmin.0, inf.argmin.1);
    let z0 = z0 * (r / z0.norm());
    let scale = opts.a * r;
    let n = local_grid_n(scale);
    let local = rescale(sample, z0, opts.a, n)?;
    let m = build_multiplier(&local.potential, opts.build)?;
    let order_opts = OrderOptions { build: opts.build, ..OrderOptions::default() };
    let est: OrderEstimate = vanishing_order_bound_with(&local.u, &local.potential, &m, local.c0_local, 1.0 / scale, &order_opts)?;
    let log_bound = log_landis_bound(est.exponent, scale);
    Ok(LandisPoint {
        r,
        measured_infsup: inf.value,
        exponent: est.exponent,
        log_certified_bound: log_bound,
        certified_bound: log_bound.exp(),
        valid: est.valid,
        extrapolated: est.extrapolated,
        flagged: inf.flagged,
        checks: est.checks,
    })
}

pub fn landis_curve(family: &Family, radii: &[f64], opts: &CurveOptions) -> Result<Vec<LandisPoint>> {
    radii.iter().map(|&r| landis_point(family, r, opts)).collect()
}
