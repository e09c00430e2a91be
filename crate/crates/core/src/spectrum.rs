//! Information-spectrum functionals of `Π_n(γ) = ρ_n - e^{nγ} ω_n`.
//!
//! Two evaluation paths share one interface. Sources whose factors commute
//! with their references are reduced to a [`JointSpectrum`] of classes
//! `(multiplicity, state eigenvalue, reference eigenvalue)`, built by type-class
//! enumeration, so `n` is limited by the number of types rather than `d^n`.
//! Everything else is materialized densely up to [`DENSE_DIM_CAP`].

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::operator::{
    max_abs, positive_part, DensityMatrix, Eigen, HermitianOperator, Matrix, Relation, SubsystemShape, TIE_TOL,
};

/// Largest `d_n` the dense path will diagonalize.
pub const DENSE_DIM_CAP: usize = 512;

/// Largest number of type classes the fast path will enumerate.
pub const MAX_TYPE_CLASSES: usize = 4_000_000;

const JOINT_DIAG_TOL: f64 = 1e-9;
const CLUSTER_TOL: f64 = 1e-10;
const LETTER_MERGE_TOL: f64 = 1e-13;

/// One sample of the spectral curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralPoint {
    pub gamma: f64,
    /// `Tr[{Π ≥ 0} Π]`.
    pub excess: f64,
    /// `Tr[{Π ≥ 0} ρ_n]`.
    pub mass: f64,
}

/// `T = Tr[{Π_n(γ) ≥ 0} Π_n(γ)]` on the dense path.
pub fn difference_trace(rho: &HermitianOperator, omega: &HermitianOperator, n: usize, gamma: f64) -> Result<f64> {
    Ok(spectral_point(rho, omega, n, gamma)?.excess)
}

pub fn spectral_point(rho: &HermitianOperator, omega: &HermitianOperator, n: usize, gamma: f64) -> Result<SpectralPoint> {
    let pi = rho.minus_scaled(scale(n, gamma), omega)?;
    let p = positive_part(&pi, rho)?;
    Ok(SpectralPoint { gamma, excess: p.excess, mass: p.mass })
}

fn scale(n: usize, gamma: f64) -> f64 {
    (n as f64 * gamma).exp()
}

// ---------------------------------------------------------------------------
// Joint spectra

/// Eigenvalue class of a jointly diagonal pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralClass {
    pub multiplicity: f64,
    pub state: f64,
    pub reference: f64,
}

/// Joint eigenvalue bookkeeping of commuting `(ρ_n, ω_n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointSpectrum {
    classes: Vec<SpectralClass>,
}

/// Single-copy eigen-letter carrying one state value per mixture component.
#[derive(Clone, Debug, PartialEq)]
struct Letter {
    values: Vec<f64>,
    reference: f64,
    degeneracy: f64,
}

/// Common eigenbasis of pairwise commuting Hermitian matrices, or `None`.
///
/// Diagonalizes each operator inside the eigenspaces left by the previous
/// ones, then verifies every operator is diagonal in the result.
pub(crate) fn joint_diagonalize(ops: &[&Matrix]) -> Option<(Matrix, Vec<Vec<f64>>)> {
    let d = ops.first()?.nrows();
    let mut blocks = vec![Matrix::identity(d, d)];
    for op in ops {
        let mut next = Vec::with_capacity(blocks.len());
        for b in blocks {
            if b.ncols() == 1 {
                next.push(b);
                continue;
            }
            let compressed = HermitianOperator::from_matrix_unchecked(b.adjoint() * *op * &b);
            let e = compressed.eig();
            let scale = e.values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
            let mut start = 0;
            for i in 1..=e.values.len() {
                if i == e.values.len() || e.values[i] - e.values[i - 1] > CLUSTER_TOL * scale {
                    let v = e.vectors.columns(start, i - start).into_owned();
                    next.push(&b * v);
                    start = i;
                }
            }
        }
        blocks = next;
    }
    let mut u = Matrix::zeros(d, d);
    let mut col = 0;
    for b in &blocks {
        u.columns_mut(col, b.ncols()).copy_from(b);
        col += b.ncols();
    }
    let mut diagonals = Vec::with_capacity(ops.len());
    for op in ops {
        let mut m = u.adjoint() * *op * &u;
        let diag: Vec<f64> = (0..d).map(|i| m[(i, i)].re).collect();
        m.fill_diagonal(crate::operator::c(0.0));
        if max_abs(&m) > JOINT_DIAG_TOL * (1.0 + max_abs(op)) {
            return None;
        }
        diagonals.push(diag);
    }
    Some((u, diagonals))
}

fn letters_from_operators(components: &[&HermitianOperator], reference: &HermitianOperator) -> Result<Vec<Letter>> {
    let mut ops: Vec<&Matrix> = components.iter().map(|c| c.matrix()).collect();
    ops.push(reference.matrix());
    let (_, diags) = joint_diagonalize(&ops)
        .ok_or_else(|| Error::Unsupported("state and reference factors do not commute".into()))?;
    let (comp_diags, ref_diag) = diags.split_at(components.len());
    let d = reference.dim();
    if ref_diag[0].iter().any(|&m| m < -TIE_TOL) {
        return Err(Error::Unsupported("fast path needs a positive semidefinite reference".into()));
    }
    let raw = (0..d)
        .map(|i| Letter {
            values: comp_diags.iter().map(|v| clamp_zero(v[i])).collect(),
            reference: clamp_zero(ref_diag[0][i]),
            degeneracy: 1.0,
        })
        .collect();
    Ok(merge_letters(raw))
}

fn clamp_zero(x: f64) -> f64 {
    if x.abs() <= TIE_TOL {
        0.0
    } else {
        x
    }
}

/// Merges equal letters and drops those with zero state weight in every component
/// (their products contribute nothing to either functional).
fn merge_letters(mut raw: Vec<Letter>) -> Vec<Letter> {
    raw.retain(|l| l.values.iter().any(|&v| v != 0.0));
    raw.sort_by(|a, b| {
        a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.reference.total_cmp(&b.reference))
    });
    let mut out: Vec<Letter> = Vec::with_capacity(raw.len());
    for l in raw {
        if let Some(last) = out.last_mut() {
            let same = (last.reference - l.reference).abs() <= LETTER_MERGE_TOL
                && last.values.iter().zip(&l.values).all(|(a, b)| (a - b).abs() <= LETTER_MERGE_TOL);
            if same {
                last.degeneracy += l.degeneracy;
                continue;
            }
        }
        out.push(l);
    }
    out
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n + 1];
    for k in 1..=n {
        t[k] = t[k - 1] + (k as f64).ln();
    }
    t
}

fn type_class_count(n: usize, k: usize) -> f64 {
    // C(n + k - 1, k - 1)
    if k == 0 {
        return 0.0;
    }
    let mut c = 1.0;
    for i in 1..k {
        c *= (n + i) as f64 / i as f64;
    }
    c
}

/// Enumerates the type classes of `letters^{⊗n}` and mixes component products with `weights`.
fn iid_classes(letters: &[Letter], weights: &[f64], n: usize) -> Result<Vec<SpectralClass>> {
    let k = letters.len();
    if k == 0 {
        return Ok(Vec::new());
    }
    let count = type_class_count(n, k);
    if count > MAX_TYPE_CLASSES as f64 {
        return Err(Error::Unsupported(format!("{count:.0} type classes exceed the fast-path limit")));
    }
    let lf = ln_factorials(n);
    let ln_deg: Vec<f64> = letters.iter().map(|l| l.degeneracy.ln()).collect();
    let mut out = Vec::with_capacity(count as usize);
    let mut counts = vec![0usize; k];
    enumerate_types(&mut counts, 0, n, &mut |c: &[usize]| {
        let mut ln_mult = lf[n];
        let mut reference = 1.0;
        let mut products = vec![1.0; weights.len()];
        for (j, &cj) in c.iter().enumerate() {
            if cj == 0 {
                continue;
            }
            ln_mult += cj as f64 * ln_deg[j] - lf[cj];
            reference *= letters[j].reference.powi(cj as i32);
            for (p, v) in products.iter_mut().zip(&letters[j].values) {
                *p *= v.powi(cj as i32);
            }
        }
        let state = products.iter().zip(weights).map(|(p, w)| p * w).sum();
        out.push(SpectralClass { multiplicity: ln_mult.exp(), state, reference });
    });
    Ok(out)
}

fn enumerate_types(counts: &mut [usize], j: usize, remaining: usize, f: &mut impl FnMut(&[usize])) {
    if j + 1 == counts.len() {
        counts[j] = remaining;
        f(counts);
        return;
    }
    for c in 0..=remaining {
        counts[j] = c;
        enumerate_types(counts, j + 1, remaining - c, f);
    }
}

impl JointSpectrum {
    pub fn new(classes: Vec<SpectralClass>) -> Self {
        Self { classes }
    }

    /// One class of multiplicity one per `(state, reference)` eigenvalue pair.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        Self {
            classes: pairs
                .iter()
                .map(|&(state, reference)| SpectralClass { multiplicity: 1.0, state, reference })
                .collect(),
        }
    }

    /// Joint spectrum of a commuting pair; [`Error::Unsupported`] otherwise.
    pub fn from_commuting(rho: &HermitianOperator, omega: &HermitianOperator) -> Result<Self> {
        if rho.dim() != omega.dim() {
            return Err(Error::DimensionMismatch { expected: rho.dim(), found: omega.dim() });
        }
        let letters = letters_from_operators(&[rho], omega)?;
        Ok(Self::from_letters(&letters))
    }

    fn from_letters(letters: &[Letter]) -> Self {
        Self {
            classes: letters
                .iter()
                .map(|l| SpectralClass { multiplicity: l.degeneracy, state: l.values[0], reference: l.reference })
                .collect(),
        }
    }

    fn as_letters(&self) -> Vec<Letter> {
        let raw = self
            .classes
            .iter()
            .map(|c| Letter { values: vec![c.state], reference: c.reference, degeneracy: c.multiplicity })
            .collect();
        merge_letters(raw)
    }

    /// Spectrum of the `n`-fold tensor power.
    pub fn iid_power(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("block length must be positive".into()));
        }
        Ok(Self { classes: iid_classes(&self.as_letters(), &[1.0], n)? })
    }

    /// Spectrum of the tensor product of two commuting pairs.
    pub fn product(&self, other: &Self) -> Self {
        let mut classes = Vec::with_capacity(self.classes.len() * other.classes.len());
        for a in &self.classes {
            for b in &other.classes {
                classes.push(SpectralClass {
                    multiplicity: a.multiplicity * b.multiplicity,
                    state: a.state * b.state,
                    reference: a.reference * b.reference,
                });
            }
        }
        Self { classes }
    }

    /// Spectrum of `Σ_c w_c ρ_c^{⊗n}` against `ω^{⊗n}` when every `ρ_c` and `ω` commute.
    pub fn iid_mixture(components: &[(f64, &HermitianOperator)], reference: &HermitianOperator, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("block length must be positive".into()));
        }
        let ops: Vec<&HermitianOperator> = components.iter().map(|c| c.1).collect();
        let weights: Vec<f64> = components.iter().map(|c| c.0).collect();
        let letters = letters_from_operators(&ops, reference)?;
        Ok(Self { classes: iid_classes(&letters, &weights, n)? })
    }

    pub fn classes(&self) -> &[SpectralClass] {
        &self.classes
    }

    /// `Σ multiplicity · state`, which is `Tr ρ_n`.
    pub fn state_trace(&self) -> f64 {
        self.classes.iter().map(|c| c.multiplicity * c.state).sum()
    }

    pub fn point(&self, n: usize, gamma: f64) -> SpectralPoint {
        let s = scale(n, gamma);
        let mut excess = 0.0;
        let mut mass = 0.0;
        for c in &self.classes {
            let pi = c.state - s * c.reference;
            if Relation::Geq.holds(pi, 0.0) {
                excess += c.multiplicity * pi.max(0.0);
                mass += c.multiplicity * c.state;
            }
        }
        SpectralPoint { gamma, excess, mass }
    }

    /// Eigenvalues of `ρ_n` with multiplicities, largest first.
    pub fn state_eigenvalues(&self) -> Vec<(f64, f64)> {
        let mut v: Vec<(f64, f64)> = self.classes.iter().map(|c| (c.state, c.multiplicity)).collect();
        v.sort_by(|a, b| b.0.total_cmp(&a.0));
        v
    }
}

/// `T` for `ρ^{⊗n}` against `ω^{⊗n}` from factor eigenvalues alone.
///
/// The two lists are the diagonals of the factors in a common eigenbasis.
pub fn product_trace_from_eigenvalues(rho_eigs: &[f64], omega_eigs: &[f64], n: usize, gamma: f64) -> Result<f64> {
    if rho_eigs.len() != omega_eigs.len() {
        return Err(Error::DimensionMismatch { expected: rho_eigs.len(), found: omega_eigs.len() });
    }
    let pairs: Vec<(f64, f64)> = rho_eigs.iter().copied().zip(omega_eigs.iter().copied()).collect();
    Ok(JointSpectrum::from_pairs(&pairs).iid_power(n)?.point(n, gamma).excess)
}

/// `T` for `ρ^{⊗n}` against `ω^{⊗n}`; errors with [`Error::Unsupported`] if the factors do not commute.
pub fn product_trace_fastpath(rho: &HermitianOperator, omega: &HermitianOperator, n: usize, gamma: f64) -> Result<f64> {
    Ok(JointSpectrum::from_commuting(rho, omega)?.iid_power(n)?.point(n, gamma).excess)
}

// ---------------------------------------------------------------------------
// Sources

type Generator = Arc<dyn Fn(usize) -> Result<(DensityMatrix, HermitianOperator)> + Send + Sync>;

/// How the `n`-th pair of a source is produced.
#[derive(Clone)]
pub enum SourceKind {
    General(Generator),
    Iid { rho: DensityMatrix, omega: HermitianOperator },
    /// `ρ_n = ⊗_{j<n} factors[j mod L]`, likewise for the reference.
    Product { factors: Vec<(DensityMatrix, HermitianOperator)> },
    /// `t σ_n + (1 - t) ω_n`, referenced against the common reference of both parts.
    Mixed { t: f64, sigma: Box<SourceSequence>, omega: Box<SourceSequence> },
}

/// Sequence `n ↦ (ρ_n, ω_n)` with declared growth bound `(1/n) log d_n ≤ β`.
#[derive(Clone)]
pub struct SourceSequence {
    kind: SourceKind,
    beta: f64,
}

impl fmt::Debug for SourceSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            SourceKind::General(_) => "general".to_string(),
            SourceKind::Iid { rho, .. } => format!("iid(d={})", rho.dim()),
            SourceKind::Product { factors } => format!("product({} factors)", factors.len()),
            SourceKind::Mixed { t, sigma, omega } => format!("mixed(t={t}, {sigma:?}, {omega:?})"),
        };
        f.debug_struct("SourceSequence").field("kind", &kind).field("beta", &self.beta).finish()
    }
}

fn check_pair(rho: &DensityMatrix, omega: &HermitianOperator) -> Result<()> {
    if rho.dim() != omega.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), found: omega.dim() });
    }
    Ok(())
}

fn is_scaled_identity(m: &Matrix) -> Option<f64> {
    let s = m[(0, 0)].re;
    let d = m.nrows();
    let dev = max_abs(&(m - Matrix::identity(d, d) * crate::operator::c(s)));
    (dev <= 1e-12).then_some(s)
}

impl SourceSequence {
    /// Arbitrary sequence; `generator` must be a pure function of `n`.
    pub fn general<F>(beta: f64, generator: F) -> Self
    where
        F: Fn(usize) -> Result<(DensityMatrix, HermitianOperator)> + Send + Sync + 'static,
    {
        Self { kind: SourceKind::General(Arc::new(generator)), beta }
    }

    pub fn iid(rho: DensityMatrix, omega: HermitianOperator) -> Result<Self> {
        check_pair(&rho, &omega)?;
        let beta = (rho.dim() as f64).ln();
        Ok(Self { kind: SourceKind::Iid { rho, omega }, beta })
    }

    /// `ρ^{⊗n}` against the identity.
    pub fn iid_entropy(rho: DensityMatrix) -> Self {
        let omega = HermitianOperator::identity(rho.dim());
        let beta = (rho.dim() as f64).ln();
        Self { kind: SourceKind::Iid { rho, omega }, beta }
    }

    pub fn product(factors: Vec<(DensityMatrix, HermitianOperator)>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidArgument("product source needs at least one factor".into()));
        }
        for (r, w) in &factors {
            check_pair(r, w)?;
        }
        let beta = factors.iter().map(|(r, _)| (r.dim() as f64).ln()).fold(0.0, f64::max);
        Ok(Self { kind: SourceKind::Product { factors }, beta })
    }

    pub fn mixed(t: f64, sigma: SourceSequence, omega: SourceSequence) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidArgument(format!("mixing weight {t} outside [0, 1]")));
        }
        let beta = sigma.beta.max(omega.beta);
        Ok(Self { kind: SourceKind::Mixed { t, sigma: Box::new(sigma), omega: Box::new(omega) }, beta })
    }

    pub fn kind(&self) -> &SourceKind {
        &self.kind
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `d_n` without materializing, when the structure allows it.
    pub fn dim_hint(&self, n: usize) -> Option<f64> {
        match &self.kind {
            SourceKind::General(_) => None,
            SourceKind::Iid { rho, .. } => Some((rho.dim() as f64).powi(n as i32)),
            SourceKind::Product { factors } => {
                Some((0..n).map(|j| factors[j % factors.len()].0.dim() as f64).product())
            }
            SourceKind::Mixed { sigma, .. } => sigma.dim_hint(n),
        }
    }

    /// Dense `(ρ_n, ω_n)`; refuses dimensions above [`DENSE_DIM_CAP`].
    pub fn materialize(&self, n: usize) -> Result<(DensityMatrix, HermitianOperator)> {
        if n == 0 {
            return Err(Error::InvalidArgument("block length must be positive".into()));
        }
        if let Some(d) = self.dim_hint(n) {
            if d > DENSE_DIM_CAP as f64 {
                return Err(Error::Unsupported(format!(
                    "dimension {d:.0} exceeds the dense limit {DENSE_DIM_CAP} and no fast path applies"
                )));
            }
        }
        let (rho, omega) = match &self.kind {
            SourceKind::General(g) => g(n)?,
            SourceKind::Iid { rho, omega } => (rho.tensor_power(n), omega.tensor_power(n)),
            SourceKind::Product { factors } => {
                let (mut r, mut w) = factors[0].clone();
                for j in 1..n {
                    let (fr, fw) = &factors[j % factors.len()];
                    r = r.tensor(fr);
                    w = w.tensor(fw);
                }
                (r, w)
            }
            SourceKind::Mixed { t, sigma, omega } => {
                let (s, ref_s) = sigma.materialize(n)?;
                let (o, ref_o) = omega.materialize(n)?;
                if s.dim() != o.dim() {
                    return Err(Error::DimensionMismatch { expected: s.dim(), found: o.dim() });
                }
                if max_abs(&(ref_s.matrix() - ref_o.matrix())) > 1e-10 {
                    return Err(Error::InvalidArgument("mixed components must share a reference".into()));
                }
                (DensityMatrix::mixture(*t, &s, &o)?, ref_s)
            }
        };
        check_pair(&rho, &omega)?;
        if rho.dim() > DENSE_DIM_CAP {
            return Err(Error::Unsupported(format!(
                "dimension {} exceeds the dense limit {DENSE_DIM_CAP}",
                rho.dim()
            )));
        }
        if (rho.dim() as f64).ln() / n as f64 > self.beta + 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "(1/n) log d_n = {:.4} exceeds declared beta {:.4}",
                (rho.dim() as f64).ln() / n as f64,
                self.beta
            )));
        }
        Ok((rho, omega))
    }

    /// Joint spectrum at block length `n` if the structure is commuting; `Ok(None)` otherwise.
    pub fn joint_spectrum(&self, n: usize) -> Result<Option<JointSpectrum>> {
        if n == 0 {
            return Err(Error::InvalidArgument("block length must be positive".into()));
        }
        let attempt = match &self.kind {
            SourceKind::General(_) => return Ok(None),
            SourceKind::Iid { rho, omega } => JointSpectrum::from_commuting(rho, omega).and_then(|j| j.iid_power(n)),
            SourceKind::Product { factors } => {
                let l = factors.len();
                let mut acc: Option<JointSpectrum> = None;
                let mut res = Ok(());
                for (k, (r, w)) in factors.iter().enumerate() {
                    let count = n / l + usize::from(k < n % l);
                    if count == 0 {
                        continue;
                    }
                    match JointSpectrum::from_commuting(r, w).and_then(|j| j.iid_power(count)) {
                        Ok(j) => acc = Some(acc.map_or(j.clone(), |a| a.product(&j))),
                        Err(e) => {
                            res = Err(e);
                            break;
                        }
                    }
                }
                res.map(|_| acc.expect("n > 0 leaves at least one factor"))
            }
            SourceKind::Mixed { t, sigma, omega } => match (&sigma.kind, &omega.kind) {
                (SourceKind::Iid { rho: s, omega: ws }, SourceKind::Iid { rho: o, omega: wo })
                    if s.dim() == o.dim() && max_abs(&(ws.matrix() - wo.matrix())) <= 1e-12 =>
                {
                    JointSpectrum::iid_mixture(&[(*t, s.operator()), (1.0 - *t, o.operator())], ws, n)
                }
                _ => return Ok(None),
            },
        };
        match attempt {
            Ok(j) => Ok(Some(j)),
            Err(Error::Unsupported(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Fast path when available, dense otherwise.
    pub fn evaluator(&self, n: usize) -> Result<SpectrumEvaluator> {
        if let Some(j) = self.joint_spectrum(n)? {
            return Ok(SpectrumEvaluator::Joint { n, spectrum: j });
        }
        let (rho, omega) = self.materialize(n)?;
        let identity_scale = is_scaled_identity(omega.matrix());
        let rho_eigen = identity_scale.map(|_| rho.eig());
        Ok(SpectrumEvaluator::Dense { n, rho, omega, identity_scale, rho_eigen })
    }

    /// `T` and mass at every `γ` in `gammas`, evaluated in parallel.
    pub fn curve(&self, n: usize, gammas: &[f64]) -> Result<SpectralTraceCurve> {
        self.evaluator(n)?.curve(gammas)
    }

    /// True when `ω_n = I` for every `n` (checked on the factors, or at `n` for general sources).
    pub fn reference_is_identity(&self, n: usize) -> Result<bool> {
        let is_id = |w: &HermitianOperator| is_scaled_identity(w.matrix()).is_some_and(|s| (s - 1.0).abs() <= 1e-12);
        Ok(match &self.kind {
            SourceKind::General(_) => is_id(&self.materialize(n)?.1),
            SourceKind::Iid { omega, .. } => is_id(omega),
            SourceKind::Product { factors } => factors.iter().all(|(_, w)| is_id(w)),
            SourceKind::Mixed { sigma, omega, .. } => sigma.reference_is_identity(n)? && omega.reference_is_identity(n)?,
        })
    }
}

/// Precomputed state for repeated evaluation at one block length.
#[derive(Clone, Debug)]
pub enum SpectrumEvaluator {
    Joint {
        n: usize,
        spectrum: JointSpectrum,
    },
    Dense {
        n: usize,
        rho: DensityMatrix,
        omega: HermitianOperator,
        identity_scale: Option<f64>,
        rho_eigen: Option<Eigen>,
    },
}

impl SpectrumEvaluator {
    pub fn n(&self) -> usize {
        match self {
            SpectrumEvaluator::Joint { n, .. } | SpectrumEvaluator::Dense { n, .. } => *n,
        }
    }

    pub fn is_fast_path(&self) -> bool {
        matches!(self, SpectrumEvaluator::Joint { .. })
    }

    pub fn point(&self, gamma: f64) -> Result<SpectralPoint> {
        match self {
            SpectrumEvaluator::Joint { n, spectrum } => Ok(spectrum.point(*n, gamma)),
            SpectrumEvaluator::Dense { n, rho_eigen: Some(e), identity_scale: Some(s), .. } => {
                let shift = scale(*n, gamma) * s;
                let mut excess = 0.0;
                let mut mass = 0.0;
                for &lambda in &e.values {
                    let pi = lambda - shift;
                    if Relation::Geq.holds(pi, 0.0) {
                        excess += pi.max(0.0);
                        mass += lambda;
                    }
                }
                Ok(SpectralPoint { gamma, excess, mass })
            }
            SpectrumEvaluator::Dense { n, rho, omega, .. } => spectral_point(rho, omega, *n, gamma),
        }
    }

    pub fn curve(&self, gammas: &[f64]) -> Result<SpectralTraceCurve> {
        let samples = gammas.par_iter().map(|&g| self.point(g)).collect::<Result<Vec<_>>>()?;
        Ok(SpectralTraceCurve { n: self.n(), samples })
    }
}

/// Sampled `γ ↦ (T, mass)` at a fixed block length.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralTraceCurve {
    pub n: usize,
    pub samples: Vec<SpectralPoint>,
}

impl SpectralTraceCurve {
    /// Largest increase of `T` between consecutive samples (zero for a monotone curve).
    pub fn max_excess_increase(&self) -> f64 {
        self.samples.windows(2).map(|w| w[1].excess - w[0].excess).fold(0.0, f64::max)
    }

    pub fn excess_in_unit_interval(&self, tol: f64) -> bool {
        self.samples.iter().all(|p| p.excess >= -tol && p.excess <= 1.0 + tol)
    }
}

/// `n` uniformly spaced points covering `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![lo],
        _ => (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect(),
    }
}

// ---------------------------------------------------------------------------
// Estimators

/// Which functional the estimator thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CrossingCurve {
    /// `Tr[{Π ≥ 0} ρ_n]`: exact step functions for flat spectra.
    Mass,
    /// `Tr[{Π ≥ 0} Π]`: biased by about `log(1/ε)/n` even for flat spectra.
    Excess,
}

impl CrossingCurve {
    fn value(self, p: &SpectralPoint) -> f64 {
        match self {
            CrossingCurve::Mass => p.mass,
            CrossingCurve::Excess => p.excess,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    /// Smallest `γ` where the curve drops to `ε`.
    Sup,
    /// Largest `γ` where the curve is still at least `1 - ε`.
    Inf,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorConfig {
    pub window: (f64, f64),
    pub points: usize,
    pub epsilon: f64,
    pub bisection_steps: u32,
    pub curve: CrossingCurve,
    /// Retry once on a window twice as wide before failing.
    pub auto_widen: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { window: (-4.0, 4.0), points: 64, epsilon: 0.01, bisection_steps: 10, curve: CrossingCurve::Mass, auto_widen: true }
    }
}

impl EstimatorConfig {
    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidArgument(format!("epsilon {} outside (0, 1)", self.epsilon)));
        }
        if self.points < 2 || !(self.window.0 < self.window.1) {
            return Err(Error::InvalidArgument("window needs lo < hi and at least two points".into()));
        }
        Ok(())
    }
}

/// Finite-`n` threshold-crossing surrogate for a sup or inf divergence rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateEstimate {
    pub gamma_hat: f64,
    pub n: usize,
    pub epsilon: f64,
    pub side: Side,
    pub window: (f64, f64),
}

fn locate(eval: &SpectrumEvaluator, cfg: &EstimatorConfig, side: Side) -> Result<RateEstimate> {
    Ok(locate_sides(eval, cfg, &[side])?[0])
}

/// Shares the grid evaluation between sides; widening is retried only for sides still unbracketed.
fn locate_sides(eval: &SpectrumEvaluator, cfg: &EstimatorConfig, sides: &[Side]) -> Result<Vec<RateEstimate>> {
    cfg.validate()?;
    let mut window = cfg.window;
    let mut found: Vec<Option<RateEstimate>> = vec![None; sides.len()];
    let attempts = if cfg.auto_widen { 2 } else { 1 };
    for attempt in 0..attempts {
        if attempt == 1 {
            let mid = 0.5 * (window.0 + window.1);
            let half = window.1 - window.0;
            window = (mid - half, mid + half);
        }
        let grid = linspace(window.0, window.1, cfg.points);
        let curve = eval.curve(&grid)?;
        let values: Vec<f64> = curve.samples.iter().map(|p| cfg.curve.value(p)).collect();
        for (slot, &side) in found.iter_mut().zip(sides) {
            if slot.is_none() {
                if let Some(g) = bracket_and_bisect(eval, cfg, side, &grid, &values)? {
                    *slot = Some(RateEstimate { gamma_hat: g, n: eval.n(), epsilon: cfg.epsilon, side, window });
                }
            }
        }
        if found.iter().all(Option::is_some) {
            return Ok(found.into_iter().flatten().collect());
        }
    }
    Err(Error::WindowTooNarrow { lo: window.0, hi: window.1 })
}

fn bracket_and_bisect(
    eval: &SpectrumEvaluator,
    cfg: &EstimatorConfig,
    side: Side,
    grid: &[f64],
    values: &[f64],
) -> Result<Option<f64>> {
    let eps = cfg.epsilon;
    let (mut inside, mut outside, satisfied): (f64, f64, Box<dyn Fn(f64) -> bool>) = match side {
        Side::Sup => {
            let Some(i) = values.iter().position(|&v| v <= eps) else { return Ok(None) };
            if i == 0 {
                return Ok(None);
            }
            (grid[i], grid[i - 1], Box::new(move |v| v <= eps))
        }
        Side::Inf => {
            let Some(i) = values.iter().rposition(|&v| v >= 1.0 - eps) else { return Ok(None) };
            if i + 1 == values.len() {
                return Ok(None);
            }
            (grid[i], grid[i + 1], Box::new(move |v| v >= 1.0 - eps))
        }
    };
    for _ in 0..cfg.bisection_steps {
        let mid = 0.5 * (inside + outside);
        if satisfied(cfg.curve.value(&eval.point(mid)?)) {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    Ok(Some(inside))
}

pub fn sup_divergence_estimate(src: &SourceSequence, n: usize, cfg: &EstimatorConfig) -> Result<RateEstimate> {
    locate(&src.evaluator(n)?, cfg, Side::Sup)
}

pub fn inf_divergence_estimate(src: &SourceSequence, n: usize, cfg: &EstimatorConfig) -> Result<RateEstimate> {
    locate(&src.evaluator(n)?, cfg, Side::Inf)
}

/// Upper and lower rate estimates derived from one evaluator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateBounds {
    /// Sup-type rate (`S̄` for entropies, `D̄` for divergences).
    pub upper: f64,
    /// Inf-type rate (`S̲`, `D̲`).
    pub lower: f64,
    pub sup_divergence: RateEstimate,
    pub inf_divergence: RateEstimate,
}

impl RateBounds {
    pub fn n(&self) -> usize {
        self.sup_divergence.n
    }

    pub fn gap(&self) -> f64 {
        (self.upper - self.lower).abs()
    }
}

fn divergence_pair(src: &SourceSequence, n: usize, cfg: &EstimatorConfig) -> Result<(RateEstimate, RateEstimate)> {
    let eval = src.evaluator(n)?;
    let both = locate_sides(&eval, cfg, &[Side::Sup, Side::Inf])?;
    Ok((both[0], both[1]))
}

/// `(D̄, D̲)` estimates.
pub fn divergence_estimates(src: &SourceSequence, n: usize, cfg: &EstimatorConfig) -> Result<RateBounds> {
    let (sup, inf) = divergence_pair(src, n, cfg)?;
    Ok(RateBounds { upper: sup.gamma_hat, lower: inf.gamma_hat, sup_divergence: sup, inf_divergence: inf })
}

/// `S̄ = -D̲(ρ‖I)` and `S̲ = -D̄(ρ‖I)`.
pub fn spectral_entropy_estimates(src: &SourceSequence, n: usize, cfg: &EstimatorConfig) -> Result<RateBounds> {
    if !src.reference_is_identity(n)? {
        return Err(Error::InvalidArgument("entropy estimates need the identity reference".into()));
    }
    entropy_like(src, n, cfg)
}

fn entropy_like(src: &SourceSequence, n: usize, cfg: &EstimatorConfig) -> Result<RateBounds> {
    let (sup, inf) = divergence_pair(src, n, cfg)?;
    Ok(RateBounds { upper: -inf.gamma_hat, lower: -sup.gamma_hat, sup_divergence: sup, inf_divergence: inf })
}

type BipartiteGenerator = Arc<dyn Fn(usize) -> Result<(DensityMatrix, SubsystemShape)> + Send + Sync>;

/// Bipartite sequence `ρ_n^{AB}` on a two-factor shape `(A_n, B_n)`.
#[derive(Clone)]
pub enum BipartiteSource {
    Iid { state: DensityMatrix, shape: SubsystemShape },
    General { beta: f64, generator: BipartiteGenerator },
}

impl fmt::Debug for BipartiteSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BipartiteSource::Iid { shape, .. } => write!(f, "BipartiteSource::Iid({:?})", shape.factors()),
            BipartiteSource::General { beta, .. } => write!(f, "BipartiteSource::General(beta={beta})"),
        }
    }
}

fn bipartite_check(state: &DensityMatrix, shape: &SubsystemShape) -> Result<()> {
    if shape.len() != 2 {
        return Err(Error::InvalidShape(format!("expected two factors, got {}", shape.len())));
    }
    shape.check_dim(state.dim())
}

/// `I^A ⊗ ρ^B`.
pub fn conditional_reference(state: &DensityMatrix, shape: &SubsystemShape) -> Result<HermitianOperator> {
    bipartite_check(state, shape)?;
    let rho_b = state.partial_trace(shape, &[1])?;
    Ok(HermitianOperator::identity(shape.factors()[0]).tensor(rho_b.operator()))
}

/// `ρ^A ⊗ ρ^B`.
pub fn product_reference(state: &DensityMatrix, shape: &SubsystemShape) -> Result<HermitianOperator> {
    bipartite_check(state, shape)?;
    let rho_a = state.partial_trace(shape, &[0])?;
    let rho_b = state.partial_trace(shape, &[1])?;
    Ok(rho_a.operator().tensor(rho_b.operator()))
}

impl BipartiteSource {
    pub fn iid(state: DensityMatrix, shape: SubsystemShape) -> Result<Self> {
        bipartite_check(&state, &shape)?;
        Ok(BipartiteSource::Iid { state, shape })
    }

    pub fn general<F>(beta: f64, generator: F) -> Self
    where
        F: Fn(usize) -> Result<(DensityMatrix, SubsystemShape)> + Send + Sync + 'static,
    {
        BipartiteSource::General { beta, generator: Arc::new(generator) }
    }

    fn with_reference(
        &self,
        reference: fn(&DensityMatrix, &SubsystemShape) -> Result<HermitianOperator>,
    ) -> Result<SourceSequence> {
        match self {
            BipartiteSource::Iid { state, shape } => SourceSequence::iid(state.clone(), reference(state, shape)?),
            BipartiteSource::General { beta, generator } => {
                let g = Arc::clone(generator);
                Ok(SourceSequence::general(*beta, move |n| {
                    let (state, shape) = g(n)?;
                    let omega = reference(&state, &shape)?;
                    Ok((state, omega))
                }))
            }
        }
    }

    /// Source against `I^A ⊗ ρ^B_n`.
    pub fn conditional_source(&self) -> Result<SourceSequence> {
        self.with_reference(conditional_reference)
    }

    /// Source against `ρ^A_n ⊗ ρ^B_n`.
    pub fn mutual_source(&self) -> Result<SourceSequence> {
        self.with_reference(product_reference)
    }
}

/// `S̄(A|B) = -D̲(ρ‖I ⊗ ρ_B)` and `S̲(A|B) = -D̄(ρ‖I ⊗ ρ_B)`.
pub fn conditional_entropy_estimate(src: &BipartiteSource, n: usize, cfg: &EstimatorConfig) -> Result<RateBounds> {
    entropy_like(&src.conditional_source()?, n, cfg)
}

/// `S̄(A:B) = D̄(ρ‖ρ_A ⊗ ρ_B)` and `S̲(A:B) = D̲(ρ‖ρ_A ⊗ ρ_B)`.
pub fn mutual_information_estimate(src: &BipartiteSource, n: usize, cfg: &EstimatorConfig) -> Result<RateBounds> {
    divergence_estimates(&src.mutual_source()?, n, cfg)
}
