//! Small linear-algebra toolkit: structured sparse ladder-type operators and
//! Hermitian eigensolvers that exploit exact block structure.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::SymmetricEigen;

use crate::{CMatrix, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

/// A linear operator with at most one nonzero entry per column.
///
/// Ladder operators, number operators, mode-hopping products such as a₁†a₂
/// and the atom-resolved collision propagator pieces all have this shape, so
/// every generator in the crate can be applied in O(dim²) without ever
/// forming a dense product.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftOp {
    target: Vec<usize>,
    coeff: Vec<C64>,
}

impl ShiftOp {
    pub fn zero(dim: usize) -> Self {
        ShiftOp {
            target: vec![0; dim],
            coeff: vec![ZERO; dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        ShiftOp {
            target: (0..dim).collect(),
            coeff: vec![C64::new(1.0, 0.0); dim],
        }
    }

    /// Builds the operator from its column map: column `j` is sent to
    /// `coeff · e_target`. Returning `None` leaves column `j` empty.
    pub fn from_fn(dim: usize, mut column: impl FnMut(usize) -> Option<(usize, C64)>) -> Self {
        let mut op = ShiftOp::zero(dim);
        for j in 0..dim {
            if let Some((i, c)) = column(j) {
                assert!(i < dim, "target row {i} out of range for dimension {dim}");
                op.target[j] = i;
                op.coeff[j] = c;
            }
        }
        op
    }

    /// Recovers the sparse form of a dense matrix, if every column has at
    /// most one nonzero entry.
    pub fn from_dense(m: &CMatrix) -> Option<Self> {
        let dim = m.nrows();
        if m.ncols() != dim {
            return None;
        }
        let mut op = ShiftOp::zero(dim);
        for j in 0..dim {
            let mut found = false;
            for i in 0..dim {
                let v = m[(i, j)];
                if v != ZERO {
                    if found {
                        return None;
                    }
                    found = true;
                    op.target[j] = i;
                    op.coeff[j] = v;
                }
            }
        }
        Some(op)
    }

    pub fn dim(&self) -> usize {
        self.target.len()
    }

    /// Image of basis column `j`, if nonzero.
    pub fn column(&self, j: usize) -> Option<(usize, C64)> {
        let c = self.coeff[j];
        (c != ZERO).then_some((self.target[j], c))
    }

    pub fn to_dense(&self) -> CMatrix {
        let dim = self.dim();
        let mut m = CMatrix::zeros(dim, dim);
        for j in 0..dim {
            if let Some((i, c)) = self.column(j) {
                m[(i, j)] = c;
            }
        }
        m
    }

    pub fn scaled(&self, s: C64) -> Self {
        ShiftOp {
            target: self.target.clone(),
            coeff: self.coeff.iter().map(|&c| c * s).collect(),
        }
    }

    /// Operator product `self · rhs`.
    pub fn compose(&self, rhs: &ShiftOp) -> ShiftOp {
        assert_eq!(self.dim(), rhs.dim());
        ShiftOp::from_fn(self.dim(), |j| {
            let (k, c) = rhs.column(j)?;
            let (i, d) = self.column(k)?;
            Some((i, d * c))
        })
    }

    /// Hermitian adjoint. Requires distinct targets for the nonzero columns,
    /// which holds for every operator this crate builds.
    pub fn adjoint(&self) -> Option<ShiftOp> {
        let dim = self.dim();
        let mut adj = ShiftOp::zero(dim);
        for j in 0..dim {
            if let Some((i, c)) = self.column(j) {
                if adj.coeff[i] != ZERO {
                    return None;
                }
                adj.target[i] = j;
                adj.coeff[i] = c.conj();
            }
        }
        Some(adj)
    }

    /// `out += scale · X ρ Y†` with `X = self`.
    pub fn sandwich_acc(&self, rho: &CMatrix, y: &ShiftOp, scale: C64, out: &mut CMatrix) {
        let dim = self.dim();
        debug_assert_eq!(rho.nrows(), dim);
        let src = rho.as_slice();
        let dst = out.as_mut_slice();
        for l in 0..dim {
            let cy = y.coeff[l];
            if cy == ZERO {
                continue;
            }
            let w = scale * cy.conj();
            let col_out = y.target[l] * dim;
            let col_in = &src[l * dim..(l + 1) * dim];
            for (k, &r) in col_in.iter().enumerate() {
                // exact zeros are common: the dynamics preserve block structure
                if r == ZERO {
                    continue;
                }
                let cx = self.coeff[k];
                if cx != ZERO {
                    dst[col_out + self.target[k]] += cx * r * w;
                }
            }
        }
    }

    /// `out += scale · A ρ` with `A = self`.
    pub fn left_acc(&self, rho: &CMatrix, scale: C64, out: &mut CMatrix) {
        let dim = self.dim();
        let src = rho.as_slice();
        let dst = out.as_mut_slice();
        for k in 0..dim {
            let c = self.coeff[k];
            if c == ZERO {
                continue;
            }
            let w = scale * c;
            let i = self.target[k];
            for l in 0..dim {
                let r = src[l * dim + k];
                if r != ZERO {
                    dst[l * dim + i] += w * r;
                }
            }
        }
    }

    /// `out += scale · ρ A` with `A = self`.
    pub fn right_acc(&self, rho: &CMatrix, scale: C64, out: &mut CMatrix) {
        let dim = self.dim();
        let src = rho.as_slice();
        let dst = out.as_mut_slice();
        for j in 0..dim {
            let c = self.coeff[j];
            if c == ZERO {
                continue;
            }
            let w = scale * c;
            let col_in = &src[self.target[j] * dim..(self.target[j] + 1) * dim];
            let col_out = &mut dst[j * dim..(j + 1) * dim];
            for (o, &r) in col_out.iter_mut().zip(col_in) {
                if r != ZERO {
                    *o += w * r;
                }
            }
        }
    }
}

/// Nonzero entries `(row, col, value)` of a square matrix.
///
/// The states met in practice are block sparse (the dynamics conserve the
/// photon-number difference between ket and bra), so the sparse kernels run
/// over this list instead of the dense storage.
#[derive(Debug, Clone, Default)]
pub struct Entries {
    dim: usize,
    items: Vec<(u32, u32, C64)>,
}

impl Entries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn of(m: &CMatrix) -> Self {
        let mut e = Self::new();
        e.refill(m);
        e
    }

    /// Rebuilds the list from `m`, reusing the allocation.
    pub fn refill(&mut self, m: &CMatrix) {
        let dim = m.nrows();
        self.dim = dim;
        self.items.clear();
        for (idx, &v) in m.as_slice().iter().enumerate() {
            if v != ZERO {
                self.items.push(((idx % dim) as u32, (idx / dim) as u32, v));
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

impl ShiftOp {
    /// `out += scale · X ρ Y†` over the entries of ρ.
    pub fn sandwich_entries_acc(&self, rho: &Entries, y: &ShiftOp, scale: C64, out: &mut CMatrix) {
        let dim = self.dim();
        debug_assert_eq!(rho.dim, dim);
        let dst = out.as_mut_slice();
        for &(k, l, r) in &rho.items {
            let (k, l) = (k as usize, l as usize);
            let (cx, cy) = (self.coeff[k], y.coeff[l]);
            if cx != ZERO && cy != ZERO {
                dst[y.target[l] * dim + self.target[k]] += cx * r * cy.conj() * scale;
            }
        }
    }

    /// `out += scale · A ρ` over the entries of ρ.
    pub fn left_entries_acc(&self, rho: &Entries, scale: C64, out: &mut CMatrix) {
        let dim = self.dim();
        let dst = out.as_mut_slice();
        for &(k, l, r) in &rho.items {
            let c = self.coeff[k as usize];
            if c != ZERO {
                dst[l as usize * dim + self.target[k as usize]] += c * r * scale;
            }
        }
    }

    /// `out += scale · ρ A` over the entries of ρ, where `self = A†`.
    pub fn right_adjoint_entries_acc(&self, rho: &Entries, scale: C64, out: &mut CMatrix) {
        let dim = self.dim();
        let dst = out.as_mut_slice();
        // (ρA)[i, j] = ρ[i, k] A[k, j] and A[k, j] = conj(A†[j, k])
        for &(i, k, r) in &rho.items {
            let c = self.coeff[k as usize];
            if c != ZERO {
                dst[self.target[k as usize] * dim + i as usize] += r * c.conj() * scale;
            }
        }
    }
}

/// Partition of `0..dim` into the connected components of the sparsity graph
/// of `m` (an edge wherever `m[i,j]` or `m[j,i]` is exactly nonzero).
///
/// A symmetric permutation brings `m` into block-diagonal form with one block
/// per component, so spectral quantities can be computed block by block.
pub fn sparsity_components(m: &CMatrix) -> Vec<Vec<usize>> {
    let dim = m.nrows();
    let mut parent: Vec<usize> = (0..dim).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for j in 0..dim {
        for i in 0..j {
            if m[(i, j)] != ZERO || m[(j, i)] != ZERO {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut slot = vec![usize::MAX; dim];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for i in 0..dim {
        let root = find(&mut parent, i);
        if slot[root] == usize::MAX {
            slot[root] = comps.len();
            comps.push(Vec::new());
        }
        comps[slot[root]].push(i);
    }
    comps
}

fn submatrix(m: &CMatrix, idx: &[usize]) -> CMatrix {
    CMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

/// Eigenvalues (ascending) of a Hermitian matrix. Only the Hermitian part
/// is used.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut values = Vec::with_capacity(m.nrows());
    for idx in sparsity_components(m) {
        if idx.len() == 1 {
            values.push(m[(idx[0], idx[0])].re);
            continue;
        }
        let sub = hermitian_part(&submatrix(m, &idx));
        values.extend(sub.symmetric_eigenvalues().iter().copied());
    }
    values.sort_by(|a, b| a.total_cmp(b));
    values
}

/// Full eigendecomposition of a Hermitian matrix, stored per sparsity block.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    dim: usize,
    blocks: Vec<(Vec<usize>, Vec<f64>, CMatrix)>,
}

impl HermitianEigen {
    pub fn new(m: &CMatrix) -> Self {
        let blocks = sparsity_components(m)
            .into_iter()
            .map(|idx| {
                let sub = hermitian_part(&submatrix(m, &idx));
                let eig = SymmetricEigen::new(sub);
                (idx, eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
            })
            .collect();
        HermitianEigen {
            dim: m.nrows(),
            blocks,
        }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.blocks.iter().flat_map(|b| b.1.iter().copied()).collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }

    /// `exp(-i t H)` assembled from the spectral decomposition.
    pub fn exp_neg_i(&self, t: f64) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for (idx, values, vectors) in &self.blocks {
            let n = idx.len();
            let phases: Vec<C64> = values
                .iter()
                .map(|&l| C64::new(libm::cos(l * t), -libm::sin(l * t)))
                .collect();
            for a in 0..n {
                for b in 0..n {
                    let mut s = ZERO;
                    for (k, p) in phases.iter().enumerate() {
                        s += vectors[(a, k)] * p * vectors[(b, k)].conj();
                    }
                    out[(idx[a], idx[b])] = s;
                }
            }
        }
        out
    }
}

/// `(m + m†) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    let mut h = m.clone();
    symmetrize_in_place(&mut h);
    h
}

/// Replaces `m` by `(m + m†) / 2` without allocating.
pub fn symmetrize_in_place(m: &mut CMatrix) {
    let dim = m.nrows();
    for j in 0..dim {
        m[(j, j)].im = 0.0;
        for i in 0..j {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

/// `max |m − m†|` over all entries.
pub fn hermiticity_error(m: &CMatrix) -> f64 {
    let dim = m.nrows();
    let mut err: f64 = 0.0;
    for j in 0..dim {
        for i in 0..=j {
            err = err.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    err
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn frobenius_norm(m: &CMatrix) -> f64 {
    libm::sqrt(m.iter().map(|z| z.norm_sqr()).sum())
}

pub fn trace(m: &CMatrix) -> C64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Least-squares slope of `ln y` against `ln x`; the observed order of a
/// power law `y ∝ x^p`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (lx, ly) = (libm::log(x), libm::log(y));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn hop(dim: usize) -> ShiftOp {
        ShiftOp::from_fn(dim, |j| (j + 1 < dim).then(|| (j + 1, c(1.0 + j as f64, 0.5))))
    }

    #[test]
    fn sparse_kernels_match_dense_products() {
        let dim = 5;
        let x = hop(dim);
        let y = ShiftOp::from_fn(dim, |j| Some(((j + 2) % dim, c(0.3, -(j as f64)))));
        let rho = CMatrix::from_fn(dim, dim, |i, j| c(i as f64 - 0.5 * j as f64, (i * j) as f64 * 0.1));
        let (xd, yd) = (x.to_dense(), y.to_dense());
        let s = c(0.7, 0.2);

        let mut out = CMatrix::zeros(dim, dim);
        x.sandwich_acc(&rho, &y, s, &mut out);
        assert!(max_abs_diff(&out, &(&xd * &rho * yd.adjoint() * s)) < 1e-12);

        let mut out = CMatrix::zeros(dim, dim);
        x.left_acc(&rho, s, &mut out);
        assert!(max_abs_diff(&out, &(&xd * &rho * s)) < 1e-12);

        let mut out = CMatrix::zeros(dim, dim);
        x.right_acc(&rho, s, &mut out);
        assert!(max_abs_diff(&out, &(&rho * &xd * s)) < 1e-12);

        assert!(max_abs_diff(&x.compose(&y).to_dense(), &(&xd * &yd)) < 1e-12);
        assert!(max_abs_diff(&x.adjoint().unwrap().to_dense(), &xd.adjoint()) < 1e-15);
        assert_eq!(ShiftOp::from_dense(&xd), Some(x));
    }

    #[test]
    fn non_injective_operator_has_no_sparse_adjoint() {
        let op = ShiftOp::from_fn(3, |_| Some((0, c(1.0, 0.0))));
        assert!(op.adjoint().is_none());
    }

    #[test]
    fn block_eigenvalues_match_dense_solver() {
        // Two decoupled blocks {0, 2} and {1, 3}.
        let mut m = CMatrix::zeros(4, 4);
        m[(0, 0)] = c(1.0, 0.0);
        m[(2, 2)] = c(-1.0, 0.0);
        m[(0, 2)] = c(0.0, 2.0);
        m[(2, 0)] = c(0.0, -2.0);
        m[(1, 1)] = c(3.0, 0.0);
        m[(3, 3)] = c(0.5, 0.0);
        m[(1, 3)] = c(0.25, 0.0);
        m[(3, 1)] = c(0.25, 0.0);
        assert_eq!(sparsity_components(&m), vec![vec![0, 2], vec![1, 3]]);
        let mut dense: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
        dense.sort_by(|a, b| a.total_cmp(b));
        for (a, b) in hermitian_eigenvalues(&m).iter().zip(&dense) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn exponential_is_unitary_and_matches_rotation() {
        // σ_x: exp(-i t σ_x) = cos t − i sin t σ_x
        let mut sx = CMatrix::zeros(2, 2);
        sx[(0, 1)] = c(1.0, 0.0);
        sx[(1, 0)] = c(1.0, 0.0);
        let u = HermitianEigen::new(&sx).exp_neg_i(0.3);
        assert_abs_diff_eq!(u[(0, 0)].re, libm::cos(0.3), epsilon = 1e-14);
        assert_abs_diff_eq!(u[(0, 1)].im, -libm::sin(0.3), epsilon = 1e-14);
        let id = &u * u.adjoint();
        assert!(max_abs_diff(&id, &CMatrix::identity(2, 2)) < 1e-14);
    }
}
