//! Composite Hilbert space of cavity, molecule and amplifier, and the dense
//! complex operator algebra used everywhere else.
//!
//! Factors are always ordered (cavity `a`, molecule `F`, amplifier `c`).
//! Basis indices follow the Kronecker convention: the first factor is the
//! most significant digit.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// A square matrix acting on a single tensor factor.
pub type LocalOp = DMatrix<C64>;

pub const CAVITY: usize = 0;
pub const MOLECULE: usize = 1;
pub const AMPLIFIER: usize = 2;

pub const CAVITY_DIM: usize = 2;
pub const MOLECULE_DIM: usize = 3;

#[derive(Clone, PartialEq, Eq)]
pub struct CompositeSpace {
    factor_dims: Vec<usize>,
    total_dim: usize,
}

impl CompositeSpace {
    pub fn new(factor_dims: Vec<usize>) -> Result<Self> {
        if factor_dims.is_empty() {
            return Err(Error::InvalidParameter {
                name: "factor_dims",
                reason: "at least one factor is required".into(),
            });
        }
        if let Some(&d) = factor_dims.iter().find(|&&d| d == 0) {
            return Err(Error::InvalidParameter {
                name: "factor_dims",
                reason: format!("factor dimension {d} must be positive"),
            });
        }
        if factor_dims.len() > MOLECULE && factor_dims[MOLECULE] != MOLECULE_DIM {
            return Err(Error::InvalidParameter {
                name: "factor_dims",
                reason: format!(
                    "molecule factor must have dimension {MOLECULE_DIM}, got {}",
                    factor_dims[MOLECULE]
                ),
            });
        }
        let total_dim = factor_dims.iter().product();
        Ok(Self { factor_dims, total_dim })
    }

    /// Full model space: two-level cavity, Λ molecule, amplifier truncated at `n_c` quanta.
    pub fn model(n_c: usize) -> Self {
        Self::new(vec![CAVITY_DIM, MOLECULE_DIM, n_c + 1]).expect("model dimensions are valid")
    }

    /// Cavity and molecule only.
    pub fn reduced() -> Self {
        Self::new(vec![CAVITY_DIM, MOLECULE_DIM]).expect("reduced dimensions are valid")
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.factor_dims
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn num_factors(&self) -> usize {
        self.factor_dims.len()
    }

    pub fn has_amplifier(&self) -> bool {
        self.factor_dims.len() > AMPLIFIER
    }

    /// Amplifier truncation `n_c`, i.e. amplifier dimension minus one.
    pub fn amplifier_cutoff(&self) -> Option<usize> {
        self.factor_dims.get(AMPLIFIER).map(|d| d - 1)
    }

    /// Flat basis index for per-factor occupation indices.
    pub fn index(&self, levels: &[usize]) -> Result<usize> {
        if levels.len() != self.factor_dims.len() {
            return Err(Error::DimensionMismatch {
                expected: self.factor_dims.len(),
                got: levels.len(),
            });
        }
        let mut idx = 0;
        for (&l, &d) in levels.iter().zip(&self.factor_dims) {
            if l >= d {
                return Err(Error::DimensionMismatch { expected: d, got: l + 1 });
            }
            idx = idx * d + l;
        }
        Ok(idx)
    }

    /// Inverse of [`CompositeSpace::index`].
    pub fn levels(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.factor_dims.len()];
        for (slot, &d) in out.iter_mut().zip(&self.factor_dims).rev() {
            *slot = idx % d;
            idx /= d;
        }
        out
    }

    pub fn basis_vector(&self, levels: &[usize]) -> Result<DVector<C64>> {
        let mut v = DVector::zeros(self.total_dim);
        v[self.index(levels)?] = C64::new(1.0, 0.0);
        Ok(v)
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::SpaceMismatch {
                left: self.factor_dims.clone(),
                right: other.factor_dims.clone(),
            })
        }
    }
}

impl fmt::Debug for CompositeSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CompositeSpace{:?}", self.factor_dims)
    }
}

/// Dense operator on a [`CompositeSpace`].
///
/// The arithmetic operator impls panic on a space mismatch; use the
/// `try_*` methods or the free functions when the spaces are not known to
/// agree.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    space: CompositeSpace,
    entries: DMatrix<C64>,
}

impl OperatorMatrix {
    pub fn new(space: CompositeSpace, entries: DMatrix<C64>) -> Result<Self> {
        let n = space.total_dim();
        if entries.nrows() != n || entries.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: entries.nrows().max(entries.ncols()),
            });
        }
        Ok(Self { space, entries })
    }

    pub fn identity(space: &CompositeSpace) -> Self {
        let n = space.total_dim();
        Self { space: space.clone(), entries: DMatrix::identity(n, n) }
    }

    pub fn zeros(space: &CompositeSpace) -> Self {
        let n = space.total_dim();
        Self { space: space.clone(), entries: DMatrix::zeros(n, n) }
    }

    /// `|ket⟩⟨bra|` for two basis states given by per-factor levels.
    pub fn outer(space: &CompositeSpace, ket: &[usize], bra: &[usize]) -> Result<Self> {
        let mut op = Self::zeros(space);
        op.entries[(space.index(ket)?, space.index(bra)?)] = C64::new(1.0, 0.0);
        Ok(op)
    }

    pub fn space(&self) -> &CompositeSpace {
        &self.space
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<C64> {
        self.entries
    }

    pub fn dim(&self) -> usize {
        self.space.total_dim()
    }

    pub fn adjoint(&self) -> Self {
        Self { space: self.space.clone(), entries: self.entries.adjoint() }
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self { space: self.space.clone(), entries: &self.entries * factor }
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(C64::new(factor, 0.0))
    }

    pub fn try_mul(&self, rhs: &Self) -> Result<Self> {
        self.space.check_same(&rhs.space)?;
        Ok(Self { space: self.space.clone(), entries: &self.entries * &rhs.entries })
    }

    pub fn try_add(&self, rhs: &Self) -> Result<Self> {
        self.space.check_same(&rhs.space)?;
        Ok(Self { space: self.space.clone(), entries: &self.entries + &rhs.entries })
    }

    pub fn try_sub(&self, rhs: &Self) -> Result<Self> {
        self.space.check_same(&rhs.space)?;
        Ok(Self { space: self.space.clone(), entries: &self.entries - &rhs.entries })
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.entries
            .iter()
            .zip(other.entries.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        hermiticity_defect(&self.entries) <= tol
    }

    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        &self.entries * v
    }

    /// `⟨u| X |v⟩`.
    pub fn matrix_element(&self, u: &DVector<C64>, v: &DVector<C64>) -> C64 {
        u.dotc(&(&self.entries * v))
    }
}

pub(crate) fn hermiticity_defect(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

macro_rules! binop {
    ($trait:ident, $method:ident, $try:ident) => {
        impl $trait<&OperatorMatrix> for &OperatorMatrix {
            type Output = OperatorMatrix;
            fn $method(self, rhs: &OperatorMatrix) -> OperatorMatrix {
                self.$try(rhs).expect("operators on the same space")
            }
        }
        impl $trait<OperatorMatrix> for OperatorMatrix {
            type Output = OperatorMatrix;
            fn $method(self, rhs: OperatorMatrix) -> OperatorMatrix {
                (&self).$try(&rhs).expect("operators on the same space")
            }
        }
    };
}

binop!(Mul, mul, try_mul);
binop!(Add, add, try_add);
binop!(Sub, sub, try_sub);

impl Mul<C64> for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, rhs: C64) -> OperatorMatrix {
        self.scale(rhs)
    }
}

impl Mul<f64> for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, rhs: f64) -> OperatorMatrix {
        self.scale_real(rhs)
    }
}

impl Neg for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn neg(self) -> OperatorMatrix {
        self.scale_real(-1.0)
    }
}

/// `I ⊗ … ⊗ local_op ⊗ … ⊗ I` with `local_op` on factor `factor_index`.
pub fn embed(local_op: &LocalOp, factor_index: usize, space: &CompositeSpace) -> Result<OperatorMatrix> {
    let dims = space.factor_dims();
    let Some(&d) = dims.get(factor_index) else {
        return Err(Error::DimensionMismatch { expected: dims.len(), got: factor_index + 1 });
    };
    if local_op.nrows() != d || local_op.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: local_op.nrows().max(local_op.ncols()),
        });
    }
    let left: usize = dims[..factor_index].iter().product();
    let right: usize = dims[factor_index + 1..].iter().product();
    let entries = DMatrix::<C64>::identity(left, left)
        .kronecker(local_op)
        .kronecker(&DMatrix::<C64>::identity(right, right));
    OperatorMatrix::new(space.clone(), entries)
}

/// Truncated bosonic annihilation operator with `√n` on the `(n−1, n)` entries.
pub fn annihilation(dim: usize) -> Result<LocalOp> {
    if dim < 2 {
        return Err(Error::InvalidParameter {
            name: "dim",
            reason: format!("bosonic truncation needs dim >= 2, got {dim}"),
        });
    }
    let mut m = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    Ok(m)
}

pub fn creation(dim: usize) -> Result<LocalOp> {
    Ok(annihilation(dim)?.adjoint())
}

/// `|j⟩⟨k|` on a `dim`-level factor.
pub fn flip(dim: usize, j: usize, k: usize) -> LocalOp {
    let mut m = DMatrix::zeros(dim, dim);
    m[(j, k)] = C64::new(1.0, 0.0);
    m
}

pub fn projector(dim: usize, k: usize) -> LocalOp {
    flip(dim, k, k)
}

/// Hilbert–Schmidt inner product `tr(A† B)`.
pub fn hs_inner(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<C64> {
    a.space.check_same(&b.space)?;
    Ok(a.entries.dotc(&b.entries))
}

pub fn commutator(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<OperatorMatrix> {
    a.try_mul(b)?.try_sub(&b.try_mul(a)?)
}

pub fn anticommutator(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<OperatorMatrix> {
    a.try_mul(b)?.try_add(&b.try_mul(a)?)
}

/// Density matrix on a [`CompositeSpace`], validated on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct StateMatrix {
    space: CompositeSpace,
    entries: DMatrix<C64>,
}

impl StateMatrix {
    /// Validates Hermiticity, unit trace and `λ_min ≥ −tol`.
    pub fn new(space: CompositeSpace, entries: DMatrix<C64>, tol: f64) -> Result<Self> {
        let op = OperatorMatrix::new(space, entries)?;
        let state = Self { space: op.space, entries: op.entries };
        state.validate(tol)?;
        Ok(state)
    }

    pub(crate) fn new_unchecked(space: CompositeSpace, entries: DMatrix<C64>) -> Self {
        Self { space, entries }
    }

    pub fn pure(space: &CompositeSpace, psi: &DVector<C64>) -> Result<Self> {
        if psi.len() != space.total_dim() {
            return Err(Error::DimensionMismatch { expected: space.total_dim(), got: psi.len() });
        }
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let psi = psi / C64::new(norm, 0.0);
        Ok(Self { space: space.clone(), entries: &psi * psi.adjoint() })
    }

    /// Product basis state, e.g. `&[1, 0, 0]` for `|1, F₀, 0⟩`.
    pub fn basis(space: &CompositeSpace, levels: &[usize]) -> Result<Self> {
        Self::pure(space, &space.basis_vector(levels)?)
    }

    pub fn space(&self) -> &CompositeSpace {
        &self.space
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    /// `tr(O ρ)`.
    pub fn expectation(&self, op: &OperatorMatrix) -> Result<C64> {
        self.space.check_same(op.space())?;
        // tr(Oρ) = Σ_ij O_ij ρ_ji = Σ conj(O†)_ji ρ_ji
        Ok(op.entries.adjoint().dotc(&self.entries))
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        let herm = hermiticity_defect(&self.entries);
        if herm > tol {
            return Err(Error::InvalidState(format!("not Hermitian (defect {herm:.3e})")));
        }
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > tol {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        if !self.is_positive(tol) {
            return Err(Error::InvalidState(format!(
                "minimum eigenvalue {:.3e} below -{tol:.1e}",
                self.min_eigenvalue()
            )));
        }
        Ok(())
    }

    /// `λ_min(ρ) ≥ −tol`, tested by a Cholesky factorisation of `ρ + 2·tol·I`.
    pub fn is_positive(&self, tol: f64) -> bool {
        let n = self.entries.nrows();
        let shifted = self.hermitian_part() + DMatrix::<C64>::identity(n, n) * C64::new(2.0 * tol, 0.0);
        Cholesky::new(shifted).is_some()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.hermitian_part()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    fn hermitian_part(&self) -> DMatrix<C64> {
        (&self.entries + self.entries.adjoint()) * C64::new(0.5, 0.0)
    }
}

/// Compressed form of an operator: its nonzero entries as `(row, col, value)`.
///
/// Model operators have O(total_dim) nonzeros, so products against dense
/// matrices cost O(nnz · total_dim) rather than O(total_dim³).
#[derive(Clone, Debug)]
pub struct SparseOperator {
    dim: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl SparseOperator {
    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        let mut entries = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let v = m[(i, j)];
                if v != C64::new(0.0, 0.0) {
                    entries.push((i, j, v));
                }
            }
        }
        Self { dim: m.nrows(), entries }
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// `√(‖S‖₁ ‖S‖_∞)`, an upper bound on the spectral norm.
    pub fn norm_bound(&self) -> f64 {
        let mut rows = vec![0.0; self.dim];
        let mut cols = vec![0.0; self.dim];
        for &(i, j, v) in &self.entries {
            rows[i] += v.norm();
            cols[j] += v.norm();
        }
        let max = |v: Vec<f64>| v.into_iter().fold(0.0, f64::max);
        (max(rows) * max(cols)).sqrt()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|&(i, j, v)| (j, i, v.conj())).collect(),
        }
    }

    /// `out += scale · S · x`.
    pub fn left_mul_acc(&self, x: &DMatrix<C64>, out: &mut DMatrix<C64>, scale: C64) {
        let n = x.nrows();
        let scaled: Vec<(usize, usize, C64)> = self.entries.iter().map(|&(i, j, v)| (i, j, scale * v)).collect();
        let xs = x.as_slice();
        let os = out.as_mut_slice();
        for (xc, oc) in xs.chunks_exact(n).zip(os.chunks_exact_mut(n)) {
            for &(i, j, v) in &scaled {
                oc[i] += v * xc[j];
            }
        }
    }

    /// `out += scale · x · S`.
    pub fn right_mul_acc(&self, x: &DMatrix<C64>, out: &mut DMatrix<C64>, scale: C64) {
        let n = x.nrows();
        let xs = x.as_slice();
        let os = out.as_mut_slice();
        for &(i, j, v) in &self.entries {
            let w = scale * v;
            let src = &xs[i * n..(i + 1) * n];
            let dst = &mut os[j * n..(j + 1) * n];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
    }

    pub fn left_mul(&self, x: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(self.dim, x.ncols());
        self.left_mul_acc(x, &mut out, C64::new(1.0, 0.0));
        out
    }

    pub fn right_mul(&self, x: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(x.nrows(), self.dim);
        self.right_mul_acc(x, &mut out, C64::new(1.0, 0.0));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn space(dims: &[usize]) -> CompositeSpace {
        CompositeSpace::new(dims.to_vec()).unwrap()
    }

    fn random_local(dim: usize, vals: &[(f64, f64)]) -> LocalOp {
        DMatrix::from_fn(dim, dim, |i, j| {
            let (re, im) = vals[(i * dim + j) % vals.len()];
            C64::new(re + i as f64 * 0.1, im - j as f64 * 0.2)
        })
    }

    #[test]
    fn space_invariants() {
        assert!(CompositeSpace::new(vec![]).is_err());
        assert!(CompositeSpace::new(vec![2, 0]).is_err());
        assert!(CompositeSpace::new(vec![2, 4, 3]).is_err());
        let s = space(&[2, 3, 4]);
        assert_eq!(s.total_dim(), 24);
        assert_eq!(s.index(&[1, 2, 3]).unwrap(), 23);
        assert_eq!(s.levels(17), vec![1, 1, 1]);
        assert!(s.index(&[2, 0, 0]).is_err());
    }

    #[test]
    fn embed_identity_is_identity() {
        let s = space(&[2, 3, 4]);
        let op = embed(&DMatrix::identity(2, 2), CAVITY, &s).unwrap();
        assert_eq!(op, OperatorMatrix::identity(&s));
    }

    #[test]
    fn embed_rejects_wrong_dimension() {
        let s = space(&[2, 3, 4]);
        assert!(matches!(
            embed(&DMatrix::identity(3, 3), CAVITY, &s),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(embed(&DMatrix::identity(2, 2), 5, &s).is_err());
    }

    #[test]
    fn embedded_cavity_annihilation_connects_one_photon_to_zero() {
        let s = space(&[2, 3, 2]);
        let a = embed(&annihilation(2).unwrap(), CAVITY, &s).unwrap();
        for i in 0..s.total_dim() {
            for j in 0..s.total_dim() {
                let v = a.entries()[(i, j)];
                if v.norm() > 0.0 {
                    let (li, lj) = (s.levels(i), s.levels(j));
                    assert_eq!((li[0], lj[0]), (0, 1));
                    assert_eq!(li[1..], lj[1..]);
                }
            }
        }
        assert_eq!(a.entries().iter().filter(|z| z.norm() > 0.0).count(), 6);
    }

    #[test]
    fn embed_trace_matches_brute_force_kron() {
        // tr(I_2 ⊗ X ⊗ I_2) = 4 tr(X); the reference is built by explicit index loops.
        let s = space(&[2, 3, 2]);
        let x = random_local(3, &[(0.3, -1.0), (2.0, 0.5), (-0.7, 0.1)]);
        let op = embed(&x, MOLECULE, &s).unwrap();
        let mut brute = DMatrix::<C64>::zeros(12, 12);
        for a in 0..2 {
            for f in 0..3 {
                for g in 0..3 {
                    for cc in 0..2 {
                        brute[((a * 3 + f) * 2 + cc, (a * 3 + g) * 2 + cc)] = x[(f, g)];
                    }
                }
            }
        }
        assert_eq!(op.entries(), &brute);
        assert_abs_diff_eq!(op.trace().re, 4.0 * x.trace().re, epsilon = 1e-12);
        assert_abs_diff_eq!(op.trace().im, 4.0 * x.trace().im, epsilon = 1e-12);
    }

    #[test]
    fn annihilation_entries() {
        assert!(annihilation(1).is_err());
        let a2 = annihilation(2).unwrap();
        let one = DVector::from_vec(vec![c(0.0), c(1.0)]);
        assert_eq!(&a2 * one, DVector::from_vec(vec![c(1.0), c(0.0)]));
        let a4 = annihilation(4).unwrap();
        assert_abs_diff_eq!(a4[(2, 3)].re, 3f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn truncated_commutator_has_top_level_artifact() {
        for n in 2..7 {
            let a = annihilation(n).unwrap();
            let comm = &a * a.adjoint() - a.adjoint() * &a;
            for i in 0..n {
                for j in 0..n {
                    let expected = match (i == j, i == n - 1) {
                        (true, true) => -((n - 1) as f64),
                        (true, false) => 1.0,
                        _ => 0.0,
                    };
                    assert_abs_diff_eq!(comm[(i, j)].re, expected, epsilon = 1e-12);
                    assert_abs_diff_eq!(comm[(i, j)].im, 0.0, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn commutator_edge_cases() {
        let s = space(&[2, 3, 3]);
        let p2 = embed(&projector(3, 2), MOLECULE, &s).unwrap();
        let p0 = embed(&projector(3, 0), MOLECULE, &s).unwrap();
        assert_eq!(commutator(&p2, &p2).unwrap().max_abs(), 0.0);
        assert_eq!(commutator(&p2, &p0).unwrap().max_abs(), 0.0);
        let a = embed(&annihilation(2).unwrap(), CAVITY, &s).unwrap();
        let cd = embed(&creation(3).unwrap(), AMPLIFIER, &s).unwrap();
        assert_eq!(commutator(&a, &cd).unwrap().max_abs(), 0.0);
        let ac = anticommutator(&p2, &p2).unwrap();
        assert_eq!(ac, p2.scale_real(2.0));
        let other = OperatorMatrix::identity(&space(&[2, 3]));
        assert!(matches!(commutator(&a, &other), Err(Error::SpaceMismatch { .. })));
        assert!(hs_inner(&a, &other).is_err());
    }

    #[test]
    fn hs_inner_identity_is_dimension() {
        let s = space(&[2, 3, 4]);
        let id = OperatorMatrix::identity(&s);
        assert_eq!(hs_inner(&id, &id).unwrap(), c(24.0));
    }

    #[test]
    fn sparse_products_match_dense() {
        let s = space(&[2, 3, 3]);
        let a = embed(&annihilation(2).unwrap(), CAVITY, &s).unwrap();
        let x = embed(&random_local(3, &[(1.0, 2.0), (-0.5, 0.25)]), MOLECULE, &s).unwrap()
            + embed(&annihilation(3).unwrap(), AMPLIFIER, &s).unwrap();
        let sa = SparseOperator::from_dense(a.entries());
        assert_eq!(sa.nnz(), 9);
        let dense_left = a.entries() * x.entries();
        let dense_right = x.entries() * a.entries();
        assert!((sa.left_mul(x.entries()) - dense_left).norm() < 1e-13);
        assert!((sa.right_mul(x.entries()) - dense_right).norm() < 1e-13);
        let adj = sa.adjoint();
        assert!((adj.left_mul(x.entries()) - a.adjoint().entries() * x.entries()).norm() < 1e-13);
    }

    #[test]
    fn state_validation() {
        let s = space(&[2, 3]);
        let rho = StateMatrix::basis(&s, &[1, 0]).unwrap();
        assert!(rho.validate(1e-12).is_ok());
        assert_abs_diff_eq!(rho.min_eigenvalue(), 0.0, epsilon = 1e-12);
        let mut bad = rho.entries().clone();
        bad[(0, 0)] = c(-0.1);
        bad[(3, 3)] = c(0.1);
        assert!(StateMatrix::new(s.clone(), bad, 1e-9).is_err());
        let twice = rho.entries() * c(2.0);
        assert!(StateMatrix::new(s.clone(), twice, 1e-9).is_err());
        let mut nonherm = rho.entries().clone();
        nonherm[(0, 1)] = c(0.3);
        assert!(StateMatrix::new(s, nonherm, 1e-9).is_err());
    }

    fn small_matrix(dim: usize) -> impl Strategy<Value = LocalOp> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim * dim).prop_map(move |v| {
            DMatrix::from_iterator(dim, dim, v.into_iter().map(|(re, im)| C64::new(re, im)))
        })
    }

    proptest! {
        #[test]
        fn embed_is_multiplicative(x in small_matrix(3), y in small_matrix(3)) {
            let s = space(&[2, 3, 2]);
            let lhs = embed(&(&x * &y), MOLECULE, &s).unwrap();
            let rhs = embed(&x, MOLECULE, &s).unwrap() * embed(&y, MOLECULE, &s).unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        }

        #[test]
        fn different_factors_commute(x in small_matrix(2), y in small_matrix(3), z in small_matrix(2)) {
            let s = space(&[2, 3, 2]);
            let ex = embed(&x, CAVITY, &s).unwrap();
            let ey = embed(&y, MOLECULE, &s).unwrap();
            let ez = embed(&z, AMPLIFIER, &s).unwrap();
            prop_assert!(commutator(&ex, &ey).unwrap().max_abs() < 1e-12);
            prop_assert!(commutator(&ex, &ez).unwrap().max_abs() < 1e-12);
            prop_assert!(commutator(&ey, &ez).unwrap().max_abs() < 1e-12);
        }

        #[test]
        fn adjoint_is_involutive_antihomomorphism(x in small_matrix(6), y in small_matrix(6)) {
            let s = space(&[2, 3]);
            let a = OperatorMatrix::new(s.clone(), x).unwrap();
            let b = OperatorMatrix::new(s, y).unwrap();
            prop_assert_eq!(a.adjoint().adjoint(), a.clone());
            let lhs = (&a * &b).adjoint();
            let rhs = &b.adjoint() * &a.adjoint();
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        }

        #[test]
        fn hs_inner_is_positive_definite(x in small_matrix(6), y in small_matrix(6)) {
            let s = space(&[2, 3]);
            let a = OperatorMatrix::new(s.clone(), x).unwrap();
            let b = OperatorMatrix::new(s, y).unwrap();
            let aa = hs_inner(&a, &a).unwrap();
            prop_assert!(aa.re >= 0.0 && aa.im.abs() < 1e-12);
            prop_assert!((aa.re == 0.0) == (a.max_abs() == 0.0));
            let ab = hs_inner(&a, &b).unwrap();
            let ba = hs_inner(&b, &a).unwrap();
            prop_assert!((ab - ba.conj()).norm() < 1e-12);
            // Cauchy–Schwarz
            let bb = hs_inner(&b, &b).unwrap().re;
            prop_assert!(ab.norm_sqr() <= aa.re * bb * (1.0 + 1e-12) + 1e-12);
        }
    }
}
