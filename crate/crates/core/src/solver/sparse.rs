//! Symmetric positive definite systems assembled triangle by triangle.
//!
//! The sparsity pattern and the symbolic Cholesky factorisation are built
//! once per problem and reused for every Newton step.

use faer::prelude::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{Argsort, Pair, SparseColMat, SymbolicSparseColMat};
use faer::{Mat, Side};

use super::mesh::Mesh;
use crate::error::{Error, Result};
use crate::orlicz::Mat2;

pub(crate) struct SpdSystem {
    n: usize,
    pairs: Vec<Pair<usize, usize>>,
    symbolic: SymbolicSparseColMat<usize>,
    argsort: Argsort<usize>,
    llt: SymbolicLlt<usize>,
}

impl SpdSystem {
    /// Lower-triangular pattern over the unknowns, plus one explicit diagonal
    /// slot per unknown used for stabilising shifts.
    pub fn new(mesh: &Mesh, unknown: &[Option<usize>], n: usize) -> Result<Self> {
        let mut pairs = Vec::with_capacity(mesh.triangles.len() * 6 + n);
        for t in &mesh.triangles {
            for a in 0..3 {
                let Some(ra) = unknown[t.nodes[a]] else { continue };
                for b in 0..3 {
                    let Some(cb) = unknown[t.nodes[b]] else { continue };
                    if ra >= cb {
                        pairs.push(Pair { row: ra, col: cb });
                    }
                }
            }
        }
        pairs.extend((0..n).map(|k| Pair { row: k, col: k }));
        let (symbolic, argsort) = SymbolicSparseColMat::try_new_from_indices(n, n, &pairs)
            .map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
        let llt = SymbolicLlt::try_new(symbolic.as_ref(), Side::Lower)
            .map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
        Ok(Self {
            n,
            pairs,
            symbolic,
            argsort,
            llt,
        })
    }

    /// Values in pattern order for `Σ_T w ∇φ_a · M_T ∇φ_b`, with `shift`
    /// added on the diagonal.
    pub fn assemble(&self, mesh: &Mesh, unknown: &[Option<usize>], coeff: &[Mat2], shift: f64) -> Vec<f64> {
        let mut vals = Vec::with_capacity(self.pairs.len());
        for (t, m) in mesh.triangles.iter().zip(coeff) {
            let mb = [m.mul_vec(t.basis[0]), m.mul_vec(t.basis[1]), m.mul_vec(t.basis[2])];
            for a in 0..3 {
                let Some(ra) = unknown[t.nodes[a]] else { continue };
                for b in 0..3 {
                    let Some(cb) = unknown[t.nodes[b]] else { continue };
                    if ra >= cb {
                        vals.push(mesh.weight * t.basis[a].dot(mb[b]));
                    }
                }
            }
        }
        vals.extend(std::iter::repeat(shift).take(self.n));
        vals
    }

    /// Largest diagonal entry of an assembled matrix.
    pub fn max_diagonal(&self, vals: &[f64]) -> f64 {
        let mut diag = vec![0.0; self.n];
        for (p, v) in self.pairs.iter().zip(vals) {
            if p.row == p.col {
                diag[p.row] += v;
            }
        }
        diag.into_iter().fold(0.0, f64::max)
    }

    fn matvec(&self, vals: &[f64], x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (p, &v) in self.pairs.iter().zip(vals) {
            y[p.row] += v * x[p.col];
            if p.row != p.col {
                y[p.col] += v * x[p.row];
            }
        }
        y
    }

    /// Direct solve followed by one step of iterative refinement.
    pub fn solve(&self, vals: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
        let a = SparseColMat::new_from_argsort(self.symbolic.clone(), &self.argsort, vals)
            .map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
        let llt = Llt::try_new_with_symbolic(self.llt.clone(), a.as_ref(), Side::Lower)
            .map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
        let b = Mat::<f64>::from_fn(self.n, 1, |i, _| rhs[i]);
        let x = llt.solve(&b);
        let mut x: Vec<f64> = (0..self.n).map(|i| x[(i, 0)]).collect();
        let ax = self.matvec(vals, &x);
        let r = Mat::<f64>::from_fn(self.n, 1, |i, _| rhs[i] - ax[i]);
        let dx = llt.solve(&r);
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += dx[(i, 0)];
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolve("non-finite solution".into()));
        }
        Ok(x)
    }

    /// `‖A x − b‖_∞ / max(‖b‖_∞, tiny)`.
    pub fn relative_residual(&self, vals: &[f64], x: &[f64], rhs: &[f64]) -> f64 {
        let ax = self.matvec(vals, x);
        let num = ax.iter().zip(rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let den = rhs.iter().map(|b| b.abs()).fold(0.0, f64::max);
        num / den.max(f64::MIN_POSITIVE)
    }
}
