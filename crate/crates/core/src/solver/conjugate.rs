//! Stream functions of planar fluxes.
//!
//! For `p`-harmonic `h` the rotated flux `rot90(A(∇h))` is curl free, so it
//! has a potential `z`; that `z` is `p'`-harmonic and satisfies
//! `A_{p'}(∇z) = rot90(∇h)`. The potential is recovered per triangle in the
//! least-squares sense with one node pinned to zero.

use super::mesh::Mesh;
use super::sparse::SpdSystem;
use crate::error::{Error, Result};
use crate::field::{Field, ScalarField};
use crate::orlicz::{a_map, ExponentCtx, Mat2};

/// Largest accepted relative least-squares residual.
pub const CONJUGATE_RESIDUAL_THRESHOLD: f64 = 0.2;

#[derive(Clone, Debug)]
pub struct ConjugateSolution {
    pub z: ScalarField,
    /// `‖∇z − rot90(A(∇h))‖ / ‖rot90(A(∇h))‖` in the triangle-weighted L² norm.
    pub relative_residual: f64,
}

pub fn conjugate_solution(h: &ScalarField, ctx: &ExponentCtx) -> Result<ConjugateSolution> {
    let g = *h.grid();
    let mesh = Mesh::new(g, |_| true);
    let target: Vec<_> = mesh
        .triangles
        .iter()
        .map(|t| a_map(ctx, t.gradient(h.values())).rot90())
        .collect();

    // Node 0 is pinned; every other node is an unknown numbered k - 1.
    let unknown: Vec<Option<usize>> = (0..g.len()).map(|k| k.checked_sub(1)).collect();
    let n = g.len() - 1;
    let sys = SpdSystem::new(&mesh, &unknown, n)?;
    let coeff = vec![Mat2::IDENTITY; mesh.triangles.len()];
    let mut rhs = vec![0.0; n];
    for (t, tau) in mesh.triangles.iter().zip(&target) {
        for l in 0..3 {
            if let Some(r) = unknown[t.nodes[l]] {
                rhs[r] += mesh.weight * tau.dot(t.basis[l]);
            }
        }
    }
    let vals = sys.assemble(&mesh, &unknown, &coeff, 0.0);
    let x = sys.solve(&vals, &rhs)?;
    let mut z = vec![0.0; g.len()];
    z[1..].copy_from_slice(&x);

    let (mut num, mut den) = (0.0, 0.0);
    for (t, tau) in mesh.triangles.iter().zip(&target) {
        num += (t.gradient(&z) - *tau).norm_sq();
        den += tau.norm_sq();
    }
    let relative_residual = if den == 0.0 { 0.0 } else { (num / den).sqrt() };
    if relative_residual > CONJUGATE_RESIDUAL_THRESHOLD {
        return Err(Error::Inconsistency {
            residual: relative_residual,
            threshold: CONJUGATE_RESIDUAL_THRESHOLD,
        });
    }
    Ok(ConjugateSolution {
        z: Field::from_parts_unchecked(g, z),
        relative_residual,
    })
}
