//! Dense Hermitian operators, spectral projections and tensor bookkeeping.
//!
//! Everything here is stored as a column-major `DMatrix<Complex<f64>>`.
//! Multi-partite operators use the Kronecker convention: the first factor of a
//! [`SubsystemShape`] is the most significant digit of the basis index.

use std::ops::Deref;

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type Matrix = DMatrix<C64>;
pub type Vector = DVector<C64>;

/// Entrywise tolerance for Hermiticity.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Eigenvalues this close to a threshold count as equal to it.
pub const TIE_TOL: f64 = 1e-12;
/// Trace and positivity tolerance for density matrices.
pub const STATE_TOL: f64 = 1e-10;
/// Idempotence tolerance for projectors.
pub const PROJECTOR_TOL: f64 = 1e-9;

pub(crate) fn c(re: f64) -> C64 {
    Complex::new(re, 0.0)
}

/// Largest entry modulus.
pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entrywise deviation `|A - A^H|`.
pub fn max_asymmetry(m: &Matrix) -> f64 {
    let n = m.nrows().min(m.ncols());
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

fn symmetrize(m: Matrix) -> Matrix {
    let adj = m.adjoint();
    (m + adj) * c(0.5)
}

/// Kronecker product `A ⊗ B`.
pub fn tensor(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

/// `A^{⊗n}`; the zeroth power is the 1x1 identity.
pub fn tensor_power(a: &Matrix, n: usize) -> Matrix {
    let mut out = Matrix::identity(1, 1);
    for _ in 0..n {
        out = out.kronecker(a);
    }
    out
}

/// Real part of `Tr[A B]`.
pub fn trace_product(a: &Matrix, b: &Matrix) -> f64 {
    // Tr[AB] = sum_ij A_ij B_ji
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..a.ncols() {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

/// A self-adjoint operator on a finite-dimensional space.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    entries: Matrix,
}

/// Eigendecomposition with ascending eigenvalues; `vectors` is unitary.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl Eigen {
    pub fn reconstruct(&self) -> Matrix {
        let d = DVector::from_iterator(self.values.len(), self.values.iter().map(|&v| c(v)));
        &self.vectors * Matrix::from_diagonal(&d) * self.vectors.adjoint()
    }

    pub fn vector(&self, i: usize) -> Vector {
        self.vectors.column(i).into_owned()
    }
}

impl HermitianOperator {
    /// Validates Hermiticity (entrywise within `1e-12`) and stores the
    /// symmetrized matrix.
    pub fn new(entries: Matrix) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::NotSquare { rows: entries.nrows(), cols: entries.ncols() });
        }
        if entries.nrows() == 0 {
            return Err(Error::InvalidArgument("operator dimension must be positive".into()));
        }
        let max_asymmetry = max_asymmetry(&entries);
        if max_asymmetry > HERMITIAN_TOL {
            return Err(Error::NotHermitian { max_asymmetry });
        }
        Ok(Self { entries: symmetrize(entries) })
    }

    /// For matrices that are Hermitian by construction up to rounding.
    pub(crate) fn from_matrix_unchecked(entries: Matrix) -> Self {
        debug_assert_eq!(entries.nrows(), entries.ncols());
        Self { entries: symmetrize(entries) }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d = DVector::from_iterator(diag.len(), diag.iter().map(|&v| c(v)));
        Self { entries: Matrix::from_diagonal(&d) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { entries: Matrix::identity(dim, dim) }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { entries: Matrix::zeros(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.entries
    }

    pub fn into_matrix(self) -> Matrix {
        self.entries
    }

    pub fn trace(&self) -> f64 {
        self.entries.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn eig(&self) -> Eigen {
        eig(self)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.entries.clone().symmetric_eigenvalues().iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { entries: &self.entries * c(s) }
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self { entries: &self.entries - &other.entries })
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self { entries: &self.entries + &other.entries })
    }

    /// `A - s B`.
    pub fn minus_scaled(&self, s: f64, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self { entries: &self.entries - &other.entries * c(s) })
    }

    /// `Tr[A B]` (real for Hermitian pairs).
    pub fn trace_with(&self, other: &Self) -> Result<f64> {
        self.check_same_dim(other)?;
        Ok(trace_product(&self.entries, &other.entries))
    }

    pub fn tensor(&self, other: &Self) -> Self {
        Self { entries: tensor(&self.entries, &other.entries) }
    }

    pub fn tensor_power(&self, n: usize) -> Self {
        Self { entries: tensor_power(&self.entries, n) }
    }

    /// `U A U^H`.
    pub fn conjugate_by(&self, u: &Matrix) -> Self {
        Self::from_matrix_unchecked(u * &self.entries * u.adjoint())
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol
    }

    /// `max |AB - BA|`.
    pub fn commutator_norm(&self, other: &Self) -> f64 {
        max_abs(&(&self.entries * &other.entries - &other.entries * &self.entries))
    }

    pub fn partial_trace(&self, shape: &SubsystemShape, keep: &[usize]) -> Result<Self> {
        Ok(Self::from_matrix_unchecked(partial_trace(&self.entries, shape, keep)?))
    }
}

/// Eigendecomposition of a Hermitian operator, eigenvalues ascending.
pub fn eig(h: &HermitianOperator) -> Eigen {
    let se = h.entries.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..se.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let values = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let d = h.dim();
    let vectors = Matrix::from_fn(d, d, |r, col| se.eigenvectors[(r, order[col])]);
    Eigen { values, vectors }
}

/// Ordering relation used to select eigenvalues against a threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Relation {
    Geq,
    Gt,
    Leq,
    Lt,
}

impl Relation {
    /// Ties within [`TIE_TOL`] satisfy the closed relations and fail the open ones.
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        let tie = (value - threshold).abs() <= TIE_TOL;
        match self {
            Relation::Geq => tie || value > threshold,
            Relation::Gt => !tie && value > threshold,
            Relation::Leq => tie || value < threshold,
            Relation::Lt => !tie && value < threshold,
        }
    }

    pub fn complement(self) -> Relation {
        match self {
            Relation::Geq => Relation::Lt,
            Relation::Gt => Relation::Leq,
            Relation::Leq => Relation::Gt,
            Relation::Lt => Relation::Geq,
        }
    }
}

/// Orthogonal projector stored together with an orthonormal basis of its range.
#[derive(Clone, Debug)]
pub struct Projector {
    op: HermitianOperator,
    basis: Matrix,
}

impl Projector {
    /// Projector onto the span of the (orthonormal) columns of `basis`.
    pub fn from_orthonormal_basis(basis: Matrix) -> Self {
        let op = HermitianOperator::from_matrix_unchecked(&basis * basis.adjoint());
        Self { op, basis }
    }

    /// Validates idempotence and a {0, 1} spectrum within `1e-9`.
    pub fn new(entries: Matrix) -> Result<Self> {
        let op = HermitianOperator::new(entries)?;
        let idem = max_abs(&(op.matrix() * op.matrix() - op.matrix()));
        if idem > PROJECTOR_TOL {
            return Err(Error::InvalidProjector(format!("|P^2 - P| = {idem:.3e}")));
        }
        let e = op.eig();
        if let Some(bad) = e.values.iter().find(|&&v| v.abs() > PROJECTOR_TOL && (v - 1.0).abs() > PROJECTOR_TOL) {
            return Err(Error::InvalidProjector(format!("eigenvalue {bad} not in {{0, 1}}")));
        }
        let cols: Vec<usize> = (0..e.values.len()).filter(|&i| e.values[i] > 0.5).collect();
        let basis = select_columns(&e.vectors, &cols);
        Ok(Self { op, basis })
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_orthonormal_basis(Matrix::identity(dim, dim))
    }

    pub fn zero(dim: usize) -> Self {
        Self::from_orthonormal_basis(Matrix::zeros(dim, 0))
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.op
    }

    /// Orthonormal basis of the orthogonal complement of the range.
    pub fn complement_basis(&self) -> Matrix {
        let d = self.op.dim();
        if self.rank() == 0 {
            return Matrix::identity(d, d);
        }
        let e = HermitianOperator::from_matrix_unchecked(Matrix::identity(d, d) - self.op.matrix()).eig();
        let cols: Vec<usize> = (0..d).filter(|&i| e.values[i] > 0.5).collect();
        select_columns(&e.vectors, &cols)
    }

    pub fn complement(&self) -> Projector {
        Projector::from_orthonormal_basis(self.complement_basis())
    }

    /// `max |P·v - v|` over the entries of `v`.
    pub fn contains(&self, v: &Vector, tol: f64) -> bool {
        let pv = self.op.matrix() * v;
        (pv - v).iter().all(|z| z.norm() <= tol)
    }
}

impl Deref for Projector {
    type Target = HermitianOperator;

    fn deref(&self) -> &HermitianOperator {
        &self.op
    }
}

pub(crate) fn select_columns(m: &Matrix, cols: &[usize]) -> Matrix {
    Matrix::from_fn(m.nrows(), cols.len(), |r, k| m[(r, cols[k])])
}

/// `{A ⋈ threshold}`: projector onto eigenvectors whose eigenvalue satisfies the relation.
pub fn spectral_projection(a: &HermitianOperator, relation: Relation, threshold: f64) -> Projector {
    let e = a.eig();
    spectral_projection_from_eigen(&e, relation, threshold)
}

pub fn spectral_projection_from_eigen(e: &Eigen, relation: Relation, threshold: f64) -> Projector {
    let cols: Vec<usize> = (0..e.values.len()).filter(|&i| relation.holds(e.values[i], threshold)).collect();
    Projector::from_orthonormal_basis(select_columns(&e.vectors, &cols))
}

/// `{A ⋈ B}` := `{A - B ⋈ 0}`.
pub fn relative_projection(a: &HermitianOperator, b: &HermitianOperator, relation: Relation) -> Result<Projector> {
    let diff = a.checked_sub(b)?;
    Ok(spectral_projection(&diff, relation, 0.0))
}

/// Positive-part summary of a Hermitian difference operator `Π`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PositivePart {
    /// `Tr[{Π ≥ 0} Π]`.
    pub excess: f64,
    /// `Tr[{Π ≥ 0} ρ]` for the state the caller supplied.
    pub mass: f64,
}

/// `Tr[{Π ≥ 0} Π]` and `Tr[{Π ≥ 0} ρ]` from a single eigendecomposition.
pub fn positive_part(pi: &HermitianOperator, rho: &HermitianOperator) -> Result<PositivePart> {
    if pi.dim() != rho.dim() {
        return Err(Error::DimensionMismatch { expected: pi.dim(), found: rho.dim() });
    }
    let e = pi.eig();
    let mut excess = 0.0;
    let mut mass = 0.0;
    for (i, &lambda) in e.values.iter().enumerate() {
        if Relation::Geq.holds(lambda, 0.0) {
            excess += lambda.max(0.0);
            let v = e.vectors.column(i);
            mass += (v.adjoint() * rho.matrix() * v)[(0, 0)].re;
        }
    }
    Ok(PositivePart { excess, mass })
}

/// Ordered tensor factor dimensions of a composite space.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SubsystemShape {
    factor_dims: Vec<usize>,
}

impl SubsystemShape {
    pub fn new(factor_dims: Vec<usize>) -> Result<Self> {
        if factor_dims.is_empty() {
            return Err(Error::InvalidShape("no factors".into()));
        }
        if factor_dims.contains(&0) {
            return Err(Error::InvalidShape(format!("zero factor dimension in {factor_dims:?}")));
        }
        Ok(Self { factor_dims })
    }

    pub fn bipartite(a: usize, b: usize) -> Result<Self> {
        Self::new(vec![a, b])
    }

    pub fn factors(&self) -> &[usize] {
        &self.factor_dims
    }

    pub fn len(&self) -> usize {
        self.factor_dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factor_dims.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.factor_dims.iter().product()
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::InvalidShape(format!(
                "shape {:?} has dimension {} but operator has dimension {}",
                self.factor_dims,
                self.dim(),
                dim
            )));
        }
        Ok(())
    }

    /// `n` copies of this shape, concatenated.
    pub fn repeat(&self, n: usize) -> Self {
        let mut dims = Vec::with_capacity(self.len() * n);
        for _ in 0..n {
            dims.extend_from_slice(&self.factor_dims);
        }
        Self { factor_dims: dims }
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.len()];
        for k in (0..self.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.factor_dims[k + 1];
        }
        strides
    }

    /// For a subset of factors, the flat-index offset of every joint index on those factors.
    fn offsets(&self, subset: &[usize]) -> Vec<usize> {
        let strides = self.strides();
        let mut offsets = vec![0usize];
        for &k in subset {
            let mut next = Vec::with_capacity(offsets.len() * self.factor_dims[k]);
            for &o in &offsets {
                for digit in 0..self.factor_dims[k] {
                    next.push(o + digit * strides[k]);
                }
            }
            offsets = next;
        }
        offsets
    }
}

fn validate_subset(shape: &SubsystemShape, keep: &[usize]) -> Result<Vec<usize>> {
    let mut sorted = keep.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != keep.len() {
        return Err(Error::InvalidShape(format!("repeated factor index in {keep:?}")));
    }
    if let Some(&bad) = sorted.iter().find(|&&k| k >= shape.len()) {
        return Err(Error::InvalidShape(format!("factor index {bad} out of range for {} factors", shape.len())));
    }
    Ok(sorted)
}

/// Partial trace keeping the factors listed in `keep` (in their original order).
pub fn partial_trace(op: &Matrix, shape: &SubsystemShape, keep: &[usize]) -> Result<Matrix> {
    if op.nrows() != op.ncols() {
        return Err(Error::NotSquare { rows: op.nrows(), cols: op.ncols() });
    }
    shape.check_dim(op.nrows())?;
    let keep = validate_subset(shape, keep)?;
    let traced: Vec<usize> = (0..shape.len()).filter(|k| !keep.contains(k)).collect();
    let kept_offsets = shape.offsets(&keep);
    let traced_offsets = shape.offsets(&traced);
    let dk = kept_offsets.len();
    let mut out = Matrix::zeros(dk, dk);
    for (cidx, &co) in kept_offsets.iter().enumerate() {
        for (ridx, &ro) in kept_offsets.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for &t in &traced_offsets {
                acc += op[(ro + t, co + t)];
            }
            out[(ridx, cidx)] = acc;
        }
    }
    Ok(out)
}

/// Reorders tensor factors: factor `i` of the result is factor `order[i]` of the input.
pub fn permute_subsystems(op: &Matrix, shape: &SubsystemShape, order: &[usize]) -> Result<(Matrix, SubsystemShape)> {
    shape.check_dim(op.nrows())?;
    let sorted = validate_subset(shape, order)?;
    if sorted.len() != shape.len() {
        return Err(Error::InvalidShape(format!("{order:?} is not a permutation of {} factors", shape.len())));
    }
    // offsets() enumerates joint indices with the first listed factor most significant,
    // which is exactly the flat index in the permuted shape.
    let map = shape.offsets(order);
    let d = map.len();
    let out = Matrix::from_fn(d, d, |i, j| op[(map[i], map[j])]);
    let new_shape = SubsystemShape::new(order.iter().map(|&k| shape.factor_dims[k]).collect())?;
    Ok((out, new_shape))
}

/// A positive semidefinite, unit-trace operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    op: HermitianOperator,
}

impl DensityMatrix {
    pub fn new(entries: Matrix) -> Result<Self> {
        Self::from_operator(HermitianOperator::new(entries)?)
    }

    pub fn from_operator(op: HermitianOperator) -> Result<Self> {
        let tr = op.trace();
        if (tr - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = op.min_eigenvalue();
        if min < -STATE_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(Self { op })
    }

    pub(crate) fn from_matrix_unchecked(m: Matrix) -> Self {
        Self { op: HermitianOperator::from_matrix_unchecked(m) }
    }

    /// `|ψ⟩⟨ψ|` for the normalized `ψ`.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let v = Vector::from_column_slice(psi);
        let norm = v.norm();
        if psi.is_empty() || norm < 1e-15 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let v = v / c(norm);
        Ok(Self::from_matrix_unchecked(&v * v.adjoint()))
    }

    pub fn basis_state(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::InvalidArgument(format!("basis index {index} >= dimension {dim}")));
        }
        let mut psi = vec![c(0.0); dim];
        psi[index] = c(1.0);
        Self::pure(&psi)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { op: HermitianOperator::identity(dim).scaled(1.0 / dim as f64) }
    }

    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        Self::from_operator(HermitianOperator::from_real_diagonal(probs))
    }

    /// Convex combination `t·a + (1-t)·b`.
    pub fn mixture(t: f64, a: &Self, b: &Self) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidArgument(format!("mixing weight {t} outside [0, 1]")));
        }
        let op = a.op.scaled(t).checked_add(&b.op.scaled(1.0 - t))?;
        Ok(Self { op })
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn tensor(&self, other: &Self) -> Self {
        Self { op: self.op.tensor(&other.op) }
    }

    pub fn tensor_power(&self, n: usize) -> Self {
        Self { op: self.op.tensor_power(n) }
    }

    pub fn partial_trace(&self, shape: &SubsystemShape, keep: &[usize]) -> Result<Self> {
        Ok(Self { op: self.op.partial_trace(shape, keep)? })
    }

    pub fn conjugate_by(&self, u: &Matrix) -> Self {
        Self { op: self.op.conjugate_by(u) }
    }

    pub fn von_neumann_entropy(&self) -> f64 {
        von_neumann_entropy(self)
    }
}

impl Deref for DensityMatrix {
    type Target = HermitianOperator;

    fn deref(&self) -> &HermitianOperator {
        &self.op
    }
}

/// Shannon entropy (nats) of a list of probabilities; entries below `1e-14` contribute 0.
pub fn shannon_entropy(probs: impl IntoIterator<Item = f64>) -> f64 {
    probs.into_iter().filter(|&p| p > 1e-14).map(|p| -p * p.ln()).sum()
}

/// `S(ρ) = -Tr ρ log ρ` in nats.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    shannon_entropy(rho.eigenvalues())
}
