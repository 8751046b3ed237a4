//! Potential/drift pairs (V, W) and seeded random families.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{LandisError, Result};
use crate::field::ScalarField;
use crate::grid::Grid;

/// Nodes with V in [-1e-9, 0) are clamped to 0; below that is an error.
pub const NEGATIVE_V_CLAMP: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct PotentialPair {
    pub v: ScalarField,
    pub w: (ScalarField, ScalarField),
    pub m: f64,
    pub k: f64,
}

impl PotentialPair {
    /// Validates V ≥ 0, sup V ≤ M, sup |W| ≤ K (each with relative slack 1e-12).
    pub fn new(v: ScalarField, w: (ScalarField, ScalarField), m: f64, k: f64) -> Result<Self> {
        if !(m >= 1.0) || !(k >= 1.0) {
            return Err(LandisError::InvalidArgument(format!("need M, K >= 1 (got {m}, {k})")));
        }
        if !v.grid().same_as(w.0.grid()) || !v.grid().same_as(w.1.grid()) {
            return Err(LandisError::GridMismatch);
        }
        let v = clamp_nonnegative(v)?;
        let vmax = v.sup();
        if vmax > m * (1.0 + 1e-12) {
            return Err(LandisError::Precondition(format!("sup V = {vmax} exceeds M = {m}")));
        }
        let wmax = w.0.zip_with(&w.1, f64::hypot)?.sup();
        if wmax > k * (1.0 + 1e-12) {
            return Err(LandisError::Precondition(format!("sup |W| = {wmax} exceeds K = {k}")));
        }
        Ok(Self { v, w, m, k })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.v.grid()
    }

    /// √M + K.
    pub fn lambda(&self) -> f64 {
        self.m.sqrt() + self.k
    }

    pub fn constant(grid: Arc<Grid>, v: f64, w: (f64, f64), m: f64, k: f64) -> Result<Self> {
        Self::new(
            ScalarField::constant(grid.clone(), v),
            (ScalarField::constant(grid.clone(), w.0), ScalarField::constant(grid, w.1)),
            m,
            k,
        )
    }

    /// V = M on {x > 0}, 0 elsewhere; W ≡ 0.
    pub fn half_plane(grid: Arc<Grid>, m: f64, k: f64) -> Result<Self> {
        let v = ScalarField::from_fn(grid.clone(), |z| if z.re > 0.0 { m } else { 0.0 })?;
        Self::new(v, zero_drift(&grid), m, k)
    }

    /// Smooth random V with max exactly M and W with max |W| exactly `w_max`
    /// (use 0 for no drift; K is then the bound carried for the theory).
    pub fn random(grid: Arc<Grid>, m: f64, k: f64, w_max: f64, seed: u64) -> Result<Self> {
        if w_max > k {
            return Err(LandisError::InvalidArgument("drift amplitude exceeds K".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vs = RandomWave::new(&mut rng);
        let ws = RandomWave::new(&mut rng);
        let th = RandomWave::new(&mut rng);
        let raw_v: Vec<f64> = grid.points().iter().map(|&z| vs.eval(z)).collect();
        let raw_w: Vec<f64> = grid.points().iter().map(|&z| ws.eval(z)).collect();
        let unit_v = unit_range(&raw_v);
        let unit_w = unit_range(&raw_w);
        let v = ScalarField::new(grid.clone(), unit_v.iter().map(|s| m * s).collect())?;
        let pts = grid.points();
        let angle: Vec<f64> = pts.iter().map(|&z| 2.0 * th.eval(z)).collect();
        let w1 = ScalarField::new(
            grid.clone(),
            unit_w.iter().zip(&angle).map(|(s, a)| w_max * s * a.cos()).collect(),
        )?;
        let w2 = ScalarField::new(
            grid.clone(),
            unit_w.iter().zip(&angle).map(|(s, a)| w_max * s * a.sin()).collect(),
        )?;
        Self::new(v, (w1, w2), m, k)
    }
}

pub fn zero_drift(grid: &Arc<Grid>) -> (ScalarField, ScalarField) {
    (ScalarField::constant(grid.clone(), 0.0), ScalarField::constant(grid.clone(), 0.0))
}

fn clamp_nonnegative(v: ScalarField) -> Result<ScalarField> {
    if let Some(k) = (0..v.len()).find(|&k| v.is_valid(k) && v.get(k) < -NEGATIVE_V_CLAMP) {
        return Err(LandisError::NegativePotential { node: k, value: v.get(k) });
    }
    Ok(v.map(|x| x.max(0.0)))
}

/// Affine map of samples onto [0, 1] (constant samples map to 1).
fn unit_range(xs: &[f64]) -> Vec<f64> {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 1e-300 {
        return vec![1.0; xs.len()];
    }
    xs.iter().map(|x| (x - lo) / (hi - lo)).collect()
}

/// Sum of eight plane waves with frequencies in [1, 4].
struct RandomWave {
    terms: Vec<(f64, C64, f64)>,
}

impl RandomWave {
    fn new(rng: &mut ChaCha8Rng) -> Self {
        let terms = (0..8)
            .map(|_| {
                let amp = rng.gen_range(0.2..1.0);
                let freq = rng.gen_range(1.0..4.0);
                let dir = rng.gen_range(0.0..std::f64::consts::TAU);
                let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                (amp, C64::from_polar(freq, dir), phase)
            })
            .collect();
        Self { terms }
    }

    fn eval(&self, z: C64) -> f64 {
        self.terms
            .iter()
            .map(|(a, k, p)| a * (k.re * z.re + k.im * z.im + p).cos())
            .sum()
    }
}
