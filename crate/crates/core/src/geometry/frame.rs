//! Pointwise extrinsic geometry from the unit normal frame.
//!
//! With `ν_j = ∇g_j / |∇g_j|` the projector is `P = I − Σ ν_j ν_jᵀ`; every
//! derivative below follows from `Dν_j(u) = (I − ν_j ν_jᵀ) Hess g_j u / |∇g_j|`.

use smallvec::SmallVec;

use super::manifold::{Manifold, Normals};
use crate::linalg::Vector;

pub struct Frame<'a> {
    manifold: &'a Manifold,
    x: &'a Vector,
    normals: Normals,
    grad_norms: SmallVec<[f64; 2]>,
}

impl<'a> Frame<'a> {
    pub fn new(manifold: &'a Manifold, x: &'a Vector) -> Self {
        let mut normals = Normals::new();
        let mut grad_norms = SmallVec::new();
        for j in 0..manifold.codim() {
            let g = manifold.grad(j, x);
            let n = g.norm();
            normals.push(g * (1.0 / n));
            grad_norms.push(n);
        }
        Frame { manifold, x, normals, grad_norms }
    }

    pub fn point(&self) -> &Vector {
        self.x
    }

    pub fn normals(&self) -> &[Vector] {
        &self.normals
    }

    pub fn project(&self, e: &Vector) -> Vector {
        let mut out = e.clone();
        for nu in &self.normals {
            let k = nu.dot(e);
            out.axpy(-k, nu);
        }
        out
    }

    pub fn normal_part(&self, e: &Vector) -> Vector {
        let mut out = Vector::zeros(e.len());
        for nu in &self.normals {
            out.axpy(nu.dot(e), nu);
        }
        out
    }

    /// Directional derivative of the `j`-th unit normal field along `u`.
    pub fn dnormal(&self, j: usize, u: &Vector) -> Vector {
        let nu = &self.normals[j];
        let mut h = self.manifold.hess_apply(j, self.x, u);
        let k = nu.dot(&h);
        h.axpy(-k, nu);
        h * (1.0 / self.grad_norms[j])
    }

    /// All `Dν_j(u)` at once.
    pub fn dnormals(&self, u: &Vector) -> Normals {
        (0..self.normals.len()).map(|j| self.dnormal(j, u)).collect()
    }

    /// Shape operator `A(u, w) = −Σ_j ⟨ν_j, w⟩ P Dν_j(u)`.
    pub fn shape(&self, u: &Vector, w: &Vector) -> Vector {
        let mut out = Vector::zeros(u.len());
        for j in 0..self.normals.len() {
            let c = self.normals[j].dot(w);
            if c != 0.0 {
                out.axpy(-c, &self.project(&self.dnormal(j, u)));
            }
        }
        out
    }

    /// Second fundamental form `α(u, v) = −Σ_j ⟨Dν_j(u), v⟩ ν_j`.
    pub fn alpha(&self, u: &Vector, v: &Vector) -> Vector {
        let mut out = Vector::zeros(u.len());
        for j in 0..self.normals.len() {
            let c = self.dnormal(j, u).dot(v);
            out.axpy(-c, &self.normals[j]);
        }
        out
    }

    /// `(D_u P) e` for the extension `P(y) = I − Σ ν_j(y) ν_j(y)ᵀ`, given
    /// precomputed `Dν_j(u)`.
    pub fn dproj_with(&self, dn: &[Vector], e: &Vector) -> Vector {
        let mut out = Vector::zeros(e.len());
        for (nu, d) in self.normals.iter().zip(dn) {
            out.axpy(-nu.dot(e), d);
            out.axpy(-d.dot(e), nu);
        }
        out
    }

    pub fn dproj(&self, u: &Vector, e: &Vector) -> Vector {
        self.dproj_with(&self.dnormals(u), e)
    }

    /// `∇X^i(v) = A(v, Z e_i)`, zero-based `i`.
    pub fn nabla_x(&self, v: &Vector, i: usize) -> Vector {
        let mut out = Vector::zeros(v.len());
        for j in 0..self.normals.len() {
            let c = self.normals[j][i];
            if c != 0.0 {
                out.axpy(-c, &self.project(&self.dnormal(j, v)));
            }
        }
        out
    }

    /// Orthonormal basis of the tangent space: pivoted Gram–Schmidt on the
    /// projected standard basis (largest residual first, ties by index).
    pub fn tangent_basis(&self) -> Vec<Vector> {
        let m = self.x.len();
        let mut cands: Vec<Vector> = (0..m).map(|i| self.project(&Vector::basis(m, i))).collect();
        let mut basis: Vec<Vector> = Vec::with_capacity(self.manifold.intrinsic_dim());
        while basis.len() < self.manifold.intrinsic_dim() {
            let (k, _) = cands
                .iter()
                .enumerate()
                .fold((0, -1.0), |best, (i, c)| {
                    let n = c.norm_squared();
                    if n > best.1 {
                        (i, n)
                    } else {
                        best
                    }
                });
            let e = crate::linalg::orthonormalize(&[cands[k].clone()], &basis, 0.0);
            let e = e.into_iter().next().expect("non-degenerate tangent space");
            for c in cands.iter_mut() {
                let d = c.dot(&e);
                c.axpy(-d, &e);
            }
            basis.push(e);
        }
        basis
    }

    /// Mean curvature vector `tr α`.
    pub fn trace_alpha(&self, basis: &[Vector]) -> Vector {
        let mut h = Vector::zeros(self.x.len());
        for e in basis {
            h += &self.alpha(e, e);
        }
        h
    }

    /// `Ric(u, w)` by Gauss: `⟨α(u, w), tr α⟩ − Σ_k ⟨α(u, e_k), α(w, e_k)⟩`.
    pub fn ricci(&self, u: &Vector, w: &Vector, basis: &[Vector]) -> f64 {
        let h = self.trace_alpha(basis);
        let mut r = self.alpha(u, w).dot(&h);
        for e in basis {
            r -= self.alpha(u, e).dot(&self.alpha(w, e));
        }
        r
    }

    /// `|α(v, ·)|²` in Hilbert–Schmidt norm.
    pub fn alpha_hs_squared(&self, v: &Vector, basis: &[Vector]) -> f64 {
        basis.iter().map(|e| self.alpha(v, e).norm_squared()).sum()
    }
}
