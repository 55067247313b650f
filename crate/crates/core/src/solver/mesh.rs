//! P1 discretisation on both diagonal splittings of every grid cell.
//!
//! Each cell contributes its four corner triangles, each weighted by `h²/4`.
//! The union of the two splittings has no checkerboard null modes, is exact
//! on affine data, reproduces the five-point Laplacian at `p = 2` and is
//! invariant under the reflections of the square.

use crate::field::{Grid2D, VectorField};
use crate::orlicz::Vec2;

/// One corner triangle: the corner node followed by its x- and y-neighbours,
/// and the gradient of each nodal hat function on the triangle.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Triangle {
    pub nodes: [usize; 3],
    pub basis: [Vec2; 3],
}

impl Triangle {
    #[inline]
    pub fn gradient(&self, u: &[f64]) -> Vec2 {
        self.basis[0] * u[self.nodes[0]]
            + self.basis[1] * u[self.nodes[1]]
            + self.basis[2] * u[self.nodes[2]]
    }
}

pub(crate) struct Mesh {
    pub triangles: Vec<Triangle>,
    /// Quadrature weight shared by all triangles.
    pub weight: f64,
}

impl Mesh {
    /// Triangles with at least one vertex selected by `keep`.
    pub fn new(grid: Grid2D, keep: impl Fn(usize) -> bool) -> Self {
        let h = grid.h();
        let inv = 1.0 / h;
        let mut triangles = Vec::new();
        for j in 0..grid.ny() - 1 {
            for i in 0..grid.nx() - 1 {
                let sw = grid.index(i, j);
                let se = grid.index(i + 1, j);
                let nw = grid.index(i, j + 1);
                let ne = grid.index(i + 1, j + 1);
                // (corner, x-neighbour, y-neighbour, sx, sy)
                let corners = [
                    (sw, se, nw, 1.0, 1.0),
                    (se, sw, ne, -1.0, 1.0),
                    (nw, ne, sw, 1.0, -1.0),
                    (ne, nw, se, -1.0, -1.0),
                ];
                for (c, xn, yn, sx, sy) in corners {
                    if keep(c) || keep(xn) || keep(yn) {
                        triangles.push(Triangle {
                            nodes: [c, xn, yn],
                            basis: [
                                Vec2::new(-sx * inv, -sy * inv),
                                Vec2::new(sx * inv, 0.0),
                                Vec2::new(0.0, sy * inv),
                            ],
                        });
                    }
                }
            }
        }
        Self {
            triangles,
            weight: 0.25 * h * h,
        }
    }

    /// Vertex average of a nodal vector field on every triangle.
    pub fn triangle_means(&self, f: &VectorField) -> Vec<Vec2> {
        let v = f.values();
        self.triangles
            .iter()
            .map(|t| (v[t.nodes[0]] + v[t.nodes[1]] + v[t.nodes[2]]) * (1.0 / 3.0))
            .collect()
    }
}
