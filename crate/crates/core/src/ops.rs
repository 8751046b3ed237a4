//! Centered finite differences. Each operator consumes one ring.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::field::{ComplexField, Field, FieldValue, ScalarField};
use crate::grid::{EAST, NORTH, SOUTH, WEST};

const HALF_I: C64 = C64 { re: 0.0, im: 0.5 };

fn stencil<T: FieldValue, U: FieldValue>(f: &Field<T>, op: impl Fn([T; 4], T) -> U + Sync) -> Field<U> {
    let g = f.grid().clone();
    let margin = f.margin() + 1;
    let vals = f.values();
    let out: Vec<U> = (0..g.len())
        .into_par_iter()
        .map(|k| {
            if g.depth(k) < margin {
                return U::default();
            }
            let n = g.neighbors_raw(k);
            op(
                [vals[n[EAST] as usize], vals[n[WEST] as usize], vals[n[NORTH] as usize], vals[n[SOUTH] as usize]],
                vals[k],
            )
        })
        .collect();
    Field::raw(g, out, margin)
}

/// 5-point Laplacian.
pub fn laplacian<T: FieldValue>(f: &Field<T>) -> Field<T> {
    let ih2 = 1.0 / (f.grid().h() * f.grid().h());
    stencil(f, move |n, c| (n[0] + n[1] + n[2] + n[3] - c * 4.0) * ih2)
}

pub fn partial_x<T: FieldValue>(f: &Field<T>) -> Field<T> {
    let s = 0.5 / f.grid().h();
    stencil(f, move |n, _| (n[0] - n[1]) * s)
}

pub fn partial_y<T: FieldValue>(f: &Field<T>) -> Field<T> {
    let s = 0.5 / f.grid().h();
    stencil(f, move |n, _| (n[2] - n[3]) * s)
}

/// (∂x f, ∂y f).
pub fn gradient(f: &ScalarField) -> (ScalarField, ScalarField) {
    (partial_x(f), partial_y(f))
}

/// |∇f| nodewise.
pub fn gradient_norm(f: &ScalarField) -> ScalarField {
    let s = 0.5 / f.grid().h();
    stencil(f, move |n, _| ((n[0] - n[1]) * s).hypot((n[2] - n[3]) * s))
}

/// ∂̄ = ½(∂x + i∂y).
pub fn dbar(f: &ComplexField) -> ComplexField {
    let s = 0.5 / f.grid().h();
    stencil(f, move |n, _| (n[0] - n[1]) * (0.5 * s) + HALF_I * ((n[2] - n[3]) * s))
}

/// ∂ = ½(∂x − i∂y).
pub fn del(f: &ComplexField) -> ComplexField {
    let s = 0.5 / f.grid().h();
    stencil(f, move |n, _| (n[0] - n[1]) * (0.5 * s) - HALF_I * ((n[2] - n[3]) * s))
}

/// ∂̄ of a real field.
pub fn dbar_real(f: &ScalarField) -> ComplexField {
    let s = 0.5 / f.grid().h();
    stencil(f, move |n, _| C64::new(0.5 * (n[0] - n[1]) * s, 0.5 * (n[2] - n[3]) * s))
}

/// ∂ of a real field.
pub fn del_real(f: &ScalarField) -> ComplexField {
    let s = 0.5 / f.grid().h();
    stencil(f, move |n, _| C64::new(0.5 * (n[0] - n[1]) * s, -0.5 * (n[2] - n[3]) * s))
}
