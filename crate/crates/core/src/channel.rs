//! CPTP maps in Kraus form and POVMs.

use crate::error::{Error, Result};
use crate::operator::{c, max_abs, trace_product, DensityMatrix, HermitianOperator, Matrix, Vector, STATE_TOL};
use crate::random::{random_isometry, rng};

/// Entrywise tolerance on `Σ K^H K = I`.
pub const TRACE_PRESERVATION_TOL: f64 = 1e-9;

/// Completely positive trace-preserving map `B(C^in) -> B(C^out)`.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    in_dim: usize,
    out_dim: usize,
    kraus: Vec<Matrix>,
}

fn tp_deviation(kraus: &[Matrix], in_dim: usize) -> f64 {
    let mut sum = Matrix::zeros(in_dim, in_dim);
    for k in kraus {
        sum += k.adjoint() * k;
    }
    max_abs(&(sum - Matrix::identity(in_dim, in_dim)))
}

impl KrausChannel {
    pub fn new(kraus: Vec<Matrix>) -> Result<Self> {
        let first = kraus.first().ok_or_else(|| Error::InvalidArgument("empty Kraus list".into()))?;
        let (out_dim, in_dim) = first.shape();
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidArgument("Kraus operators must be nonempty matrices".into()));
        }
        for k in &kraus {
            if k.nrows() != out_dim {
                return Err(Error::DimensionMismatch { expected: out_dim, found: k.nrows() });
            }
            if k.ncols() != in_dim {
                return Err(Error::DimensionMismatch { expected: in_dim, found: k.ncols() });
            }
        }
        let deviation = tp_deviation(&kraus, in_dim);
        if deviation > TRACE_PRESERVATION_TOL {
            return Err(Error::NotTracePreserving { deviation });
        }
        Ok(Self { in_dim, out_dim, kraus })
    }

    pub fn identity(dim: usize) -> Self {
        Self { in_dim: dim, out_dim: dim, kraus: vec![Matrix::identity(dim, dim)] }
    }

    pub fn unitary(u: Matrix) -> Result<Self> {
        Self::new(vec![u])
    }

    /// Complete dephasing in the computational basis, Kraus `{|k⟩⟨k|}`.
    pub fn dephasing(dim: usize) -> Self {
        let kraus = (0..dim)
            .map(|k| {
                let mut m = Matrix::zeros(dim, dim);
                m[(k, k)] = c(1.0);
                m
            })
            .collect();
        Self { in_dim: dim, out_dim: dim, kraus }
    }

    /// `σ ↦ Tr[σ] I/d`, Kraus `{|i⟩⟨j| / √d}`.
    pub fn completely_depolarizing(dim: usize) -> Self {
        let s = 1.0 / (dim as f64).sqrt();
        let mut kraus = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                let mut m = Matrix::zeros(dim, dim);
                m[(i, j)] = c(s);
                kraus.push(m);
            }
        }
        Self { in_dim: dim, out_dim: dim, kraus }
    }

    /// `σ ↦ Tr[σ] |χ⟩⟨χ|`, Kraus `{|χ⟩⟨j|}`.
    pub fn replacement(in_dim: usize, target: &Vector) -> Result<Self> {
        let norm = target.norm();
        if norm < 1e-15 {
            return Err(Error::InvalidArgument("zero replacement vector".into()));
        }
        let chi = target / c(norm);
        let kraus = (0..in_dim)
            .map(|j| {
                let mut m = Matrix::zeros(chi.len(), in_dim);
                m.set_column(j, &chi);
                m
            })
            .collect();
        Ok(Self { in_dim, out_dim: chi.len(), kraus })
    }

    /// Qubit bit flip with probability `f`: Kraus `{√(1-f) I, √f X}`.
    pub fn bit_flip(f: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::InvalidArgument(format!("flip probability {f} outside [0, 1]")));
        }
        let i = Matrix::identity(2, 2) * c((1.0 - f).sqrt());
        let mut x = Matrix::zeros(2, 2);
        x[(0, 1)] = c(f.sqrt());
        x[(1, 0)] = c(f.sqrt());
        Self::new(vec![i, x])
    }

    /// Kraus operators `(I_out ⊗ ⟨e|) V` of a Stinespring isometry `V: in -> out ⊗ env`.
    pub fn from_isometry(v: &Matrix, out_dim: usize, env_dim: usize) -> Result<Self> {
        if v.nrows() != out_dim * env_dim {
            return Err(Error::DimensionMismatch { expected: out_dim * env_dim, found: v.nrows() });
        }
        let in_dim = v.ncols();
        let kraus = (0..env_dim)
            .map(|e| Matrix::from_fn(out_dim, in_dim, |o, i| v[(o * env_dim + e, i)]))
            .collect();
        Self::new(kraus)
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn kraus_ops(&self) -> &[Matrix] {
        &self.kraus
    }

    pub fn trace_preservation_deviation(&self) -> f64 {
        tp_deviation(&self.kraus, self.in_dim)
    }

    fn check_input(&self, dim: usize) -> Result<()> {
        if dim != self.in_dim {
            return Err(Error::DimensionMismatch { expected: self.in_dim, found: dim });
        }
        Ok(())
    }

    /// `Σ K M K^H` for an arbitrary input matrix.
    pub fn apply_matrix(&self, m: &Matrix) -> Result<Matrix> {
        self.check_input(m.nrows())?;
        let mut out = Matrix::zeros(self.out_dim, self.out_dim);
        for k in &self.kraus {
            out += k * m * k.adjoint();
        }
        Ok(out)
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        Ok(DensityMatrix::from_matrix_unchecked(self.apply_matrix(rho.matrix())?))
    }

    pub fn apply_operator(&self, a: &HermitianOperator) -> Result<HermitianOperator> {
        Ok(HermitianOperator::from_matrix_unchecked(self.apply_matrix(a.matrix())?))
    }

    /// `Φ ⊗ id_other`, acting on the first tensor factor.
    pub fn on_first_factor(&self, other_dim: usize) -> Self {
        let id = Matrix::identity(other_dim, other_dim);
        Self {
            in_dim: self.in_dim * other_dim,
            out_dim: self.out_dim * other_dim,
            kraus: self.kraus.iter().map(|k| k.kronecker(&id)).collect(),
        }
    }

    /// `id_other ⊗ Φ`, acting on the second tensor factor.
    pub fn on_second_factor(&self, other_dim: usize) -> Self {
        let id = Matrix::identity(other_dim, other_dim);
        Self {
            in_dim: self.in_dim * other_dim,
            out_dim: self.out_dim * other_dim,
            kraus: self.kraus.iter().map(|k| id.kronecker(k)).collect(),
        }
    }

    /// `Φ^{⊗n}`; the Kraus count grows as `r^n`.
    pub fn tensor_power(&self, n: usize) -> Self {
        let mut kraus = vec![Matrix::identity(1, 1)];
        for _ in 0..n {
            kraus = kraus.iter().flat_map(|a| self.kraus.iter().map(move |k| a.kronecker(k))).collect();
        }
        Self { in_dim: self.in_dim.pow(n as u32), out_dim: self.out_dim.pow(n as u32), kraus }
    }
}

/// `Φ2 ∘ Φ1` with Kraus list `{K2 K1}`.
pub fn compose(second: &KrausChannel, first: &KrausChannel) -> Result<KrausChannel> {
    if first.out_dim != second.in_dim {
        return Err(Error::DimensionMismatch { expected: second.in_dim, found: first.out_dim });
    }
    let kraus = second.kraus.iter().flat_map(|k2| first.kraus.iter().map(move |k1| k2 * k1)).collect();
    Ok(KrausChannel { in_dim: first.in_dim, out_dim: second.out_dim, kraus })
}

/// `F(ρ, Φ) = Σ_k |Tr(K_k ρ)|²`.
pub fn entanglement_fidelity(rho: &DensityMatrix, channel: &KrausChannel) -> Result<f64> {
    channel.check_input(rho.dim())?;
    if channel.out_dim != channel.in_dim {
        return Err(Error::DimensionMismatch { expected: channel.in_dim, found: channel.out_dim });
    }
    Ok(channel.kraus.iter().map(|k| (k * rho.matrix()).trace().norm_sqr()).sum())
}

/// Channel from a Haar-random isometry `in -> out ⊗ env`, deterministic in `seed`.
pub fn random_cptp(in_dim: usize, out_dim: usize, env_dim: usize, seed: u64) -> Result<KrausChannel> {
    if env_dim == 0 || in_dim == 0 || out_dim == 0 {
        return Err(Error::InvalidArgument("channel dimensions must be positive".into()));
    }
    if out_dim * env_dim < in_dim {
        return Err(Error::InvalidArgument(format!(
            "isometry {in_dim} -> {out_dim}x{env_dim} impossible: output smaller than input"
        )));
    }
    let v = random_isometry(out_dim * env_dim, in_dim, &mut rng(seed, 0x5eed));
    KrausChannel::from_isometry(&v, out_dim, env_dim)
}

/// Sub-normalized POVM `{E_i}` with `Σ E_i ≤ I`; the deficit `E_0 = I - Σ E_i` is implicit.
#[derive(Clone, Debug)]
pub struct Povm {
    dim: usize,
    elements: Vec<HermitianOperator>,
}

impl Povm {
    pub fn new(dim: usize, elements: Vec<HermitianOperator>) -> Result<Self> {
        let mut sum = HermitianOperator::zeros(dim);
        for (i, e) in elements.iter().enumerate() {
            if e.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: e.dim() });
            }
            let min = e.min_eigenvalue();
            if min < -STATE_TOL {
                return Err(Error::InvalidPovm(format!("element {i} has eigenvalue {min:.3e}")));
            }
            sum = sum.checked_add(e)?;
        }
        let deficit = HermitianOperator::identity(dim).checked_sub(&sum)?;
        let min = deficit.min_eigenvalue();
        if min < -TRACE_PRESERVATION_TOL {
            return Err(Error::InvalidPovm(format!("elements sum above identity by {:.3e}", -min)));
        }
        Ok(Self { dim, elements })
    }

    pub(crate) fn from_elements_unchecked(dim: usize, elements: Vec<HermitianOperator>) -> Self {
        Self { dim, elements }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn elements(&self) -> &[HermitianOperator] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// `E_0 = I - Σ_i E_i`.
    pub fn completion(&self) -> HermitianOperator {
        let mut m = Matrix::identity(self.dim, self.dim);
        for e in &self.elements {
            m -= e.matrix();
        }
        HermitianOperator::from_matrix_unchecked(m)
    }

    /// `Tr[E_i ρ]` for every explicit element.
    pub fn probabilities(&self, rho: &DensityMatrix) -> Result<Vec<f64>> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: rho.dim() });
        }
        Ok(self.elements.iter().map(|e| trace_product(e.matrix(), rho.matrix())).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_density, random_pure_state, random_unitary};

    #[test]
    fn identity_channel_leaves_state() {
        let rho = random_density(3, 3, &mut rng(1, 0));
        let out = KrausChannel::identity(3).apply(&rho).unwrap();
        assert!(max_abs(&(out.matrix() - rho.matrix())) < 1e-14);
    }

    #[test]
    fn dephasing_plus_state() {
        let plus = DensityMatrix::new(Matrix::from_element(2, 2, c(0.5))).unwrap();
        let out = KrausChannel::dephasing(2).apply(&plus).unwrap();
        assert!(max_abs(&(out.matrix() - Matrix::identity(2, 2) * c(0.5))) < 1e-14);
    }

    #[test]
    fn depolarizing_maps_to_maximally_mixed() {
        let rho = random_density(4, 2, &mut rng(2, 0));
        let out = KrausChannel::completely_depolarizing(4).apply(&rho).unwrap();
        assert!(max_abs(&(out.matrix() - Matrix::identity(4, 4) * c(0.25))) < 1e-12);
    }

    #[test]
    fn apply_rejects_wrong_dimension() {
        let err = KrausChannel::identity(2).apply(&DensityMatrix::maximally_mixed(3)).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 2, found: 3 });
    }

    #[test]
    fn kraus_validation() {
        assert!(KrausChannel::new(vec![Matrix::identity(2, 2) * c(0.5)]).is_err());
        assert!(KrausChannel::new(vec![]).is_err());
    }

    #[test]
    fn fidelity_examples() {
        let rho = random_density(3, 3, &mut rng(3, 0));
        assert!((entanglement_fidelity(&rho, &KrausChannel::identity(3)).unwrap() - 1.0).abs() < 1e-12);

        let half = DensityMatrix::maximally_mixed(2);
        assert!((entanglement_fidelity(&half, &KrausChannel::dephasing(2)).unwrap() - 0.5).abs() < 1e-14);

        let zero = Vector::from_column_slice(&[c(1.0), c(0.0)]);
        let replace = KrausChannel::replacement(2, &zero).unwrap();
        assert!((entanglement_fidelity(&half, &replace).unwrap() - 0.25).abs() < 1e-14);
    }

    #[test]
    fn fidelity_of_pure_state_is_expectation() {
        let mut r = rng(4, 0);
        for seed in 0..10 {
            let psi = random_pure_state(3, &mut r);
            let ch = random_cptp(3, 3, 2, seed).unwrap();
            let f = entanglement_fidelity(&psi, &ch).unwrap();
            let out = ch.apply(&psi).unwrap();
            let direct = trace_product(psi.matrix(), out.matrix());
            assert!((f - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn fidelity_is_invariant_under_kraus_mixing() {
        let rho = random_density(3, 3, &mut rng(6, 0));
        let ch = random_cptp(3, 3, 3, 17).unwrap();
        let w = random_unitary(3, &mut rng(6, 1));
        let mixed: Vec<Matrix> = (0..3)
            .map(|i| {
                let mut acc = Matrix::zeros(3, 3);
                for (j, k) in ch.kraus_ops().iter().enumerate() {
                    acc += k * w[(i, j)];
                }
                acc
            })
            .collect();
        let other = KrausChannel::new(mixed).unwrap();
        let f1 = entanglement_fidelity(&rho, &ch).unwrap();
        let f2 = entanglement_fidelity(&rho, &other).unwrap();
        assert!((f1 - f2).abs() < 1e-10);
        assert!((0.0..=1.0 + 1e-10).contains(&f1));
    }

    #[test]
    fn compose_matches_sequential_application() {
        let a = random_cptp(2, 3, 2, 1).unwrap();
        let b = random_cptp(3, 2, 3, 2).unwrap();
        let ab = compose(&b, &a).unwrap();
        assert!(ab.trace_preservation_deviation() < 1e-9);
        let mut r = rng(7, 0);
        for _ in 0..5 {
            let rho = random_density(2, 2, &mut r);
            let seq = b.apply(&a.apply(&rho).unwrap()).unwrap();
            let one = ab.apply(&rho).unwrap();
            assert!(max_abs(&(seq.matrix() - one.matrix())) < 1e-9);
        }
        let id = compose(&KrausChannel::identity(3), &a).unwrap();
        let rho = random_density(2, 2, &mut r);
        assert!(max_abs(&(id.apply(&rho).unwrap().matrix() - a.apply(&rho).unwrap().matrix())) < 1e-12);
        assert!(compose(&a, &a).is_err());
    }

    #[test]
    fn dephasing_twice_is_dephasing() {
        let d = KrausChannel::dephasing(3);
        let dd = compose(&d, &d).unwrap();
        let rho = random_density(3, 3, &mut rng(8, 0));
        assert!(max_abs(&(dd.apply(&rho).unwrap().matrix() - d.apply(&rho).unwrap().matrix())) < 1e-12);
    }

    #[test]
    fn random_cptp_is_deterministic_and_valid() {
        let a = random_cptp(3, 2, 4, 99).unwrap();
        let b = random_cptp(3, 2, 4, 99).unwrap();
        assert_eq!(a, b);
        assert!(a.trace_preservation_deviation() < 1e-9);
        let u = random_cptp(3, 3, 1, 5).unwrap();
        assert_eq!(u.kraus_ops().len(), 1);
        let k = &u.kraus_ops()[0];
        assert!(max_abs(&(k * k.adjoint() - Matrix::identity(3, 3))) < 1e-12);
    }

    #[test]
    fn povm_validation() {
        let half = HermitianOperator::identity(2).scaled(0.5);
        assert!(Povm::new(2, vec![half.clone(), half.clone()]).is_ok());
        assert!(Povm::new(2, vec![half.clone(), half.clone(), half.clone()]).is_err());
        assert!(Povm::new(2, vec![HermitianOperator::from_real_diagonal(&[1.0, -0.1])]).is_err());
        let p = Povm::new(2, vec![half]).unwrap();
        assert!((p.completion().trace() - 1.0).abs() < 1e-14);
    }
}
