//! Classical-quantum ensembles, random coding with a pretty-good decoder, and
//! the achievability and converse error bounds.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;

use crate::channel::{KrausChannel, Povm};
use crate::error::{Error, Result};
use crate::operator::{
    c, positive_part, spectral_projection, DensityMatrix, HermitianOperator, Matrix, Relation, SubsystemShape,
};
use crate::random::rng;
use crate::spectrum::{mutual_information_estimate, BipartiteSource, EstimatorConfig, RateBounds};

/// Eigenvalues of `S` below this are treated as zero when forming `S^{-1/2}`.
pub const PSEUDO_INVERSE_CUTOFF: f64 = 1e-10;

/// Prior-weighted family of states on a common space.
#[derive(Clone, Debug)]
pub struct CQEnsemble {
    priors: Vec<f64>,
    states: Vec<DensityMatrix>,
}

impl CQEnsemble {
    pub fn new(priors: Vec<f64>, states: Vec<DensityMatrix>) -> Result<Self> {
        if states.is_empty() || priors.len() != states.len() {
            return Err(Error::InvalidArgument(format!(
                "{} priors for {} states",
                priors.len(),
                states.len()
            )));
        }
        if priors.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(Error::InvalidArgument("priors must be nonnegative".into()));
        }
        let total: f64 = priors.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!("priors sum to {total}")));
        }
        let d = states[0].dim();
        if let Some(s) = states.iter().find(|s| s.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: s.dim() });
        }
        Ok(Self { priors, states })
    }

    pub fn uniform(states: Vec<DensityMatrix>) -> Result<Self> {
        let k = states.len().max(1);
        Self::new(vec![1.0 / k as f64; states.len()], states)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    /// `ρ̄ = Σ_x p_x ρ_x`.
    pub fn average(&self) -> DensityMatrix {
        let mut m = Matrix::zeros(self.dim(), self.dim());
        for (p, s) in self.priors.iter().zip(&self.states) {
            m += s.matrix() * c(*p);
        }
        DensityMatrix::from_matrix_unchecked(m)
    }

    /// Every state sent through `channel`.
    pub fn through(&self, channel: &KrausChannel) -> Result<Self> {
        let states = self.states.iter().map(|s| channel.apply(s)).collect::<Result<Vec<_>>>()?;
        Ok(Self { priors: self.priors.clone(), states })
    }

    /// Product ensemble over length-`n` words; labels are base-`|X|` digits, first letter most significant.
    pub fn tensor_power(&self, n: usize) -> Self {
        let mut priors = vec![1.0];
        let mut states = vec![DensityMatrix::from_matrix_unchecked(Matrix::identity(1, 1))];
        for _ in 0..n {
            let mut np = Vec::with_capacity(priors.len() * self.len());
            let mut ns = Vec::with_capacity(states.len() * self.len());
            for (p, s) in priors.iter().zip(&states) {
                for (q, t) in self.priors.iter().zip(&self.states) {
                    np.push(p * q);
                    ns.push(s.tensor(t));
                }
            }
            priors = np;
            states = ns;
        }
        Self { priors, states }
    }
}

/// `Σ_x p_x |x⟩⟨x| ⊗ ρ_x` on `B ⊗ Q`.
pub fn cq_state(ens: &CQEnsemble) -> DensityMatrix {
    let k = ens.len();
    let d = ens.dim();
    let mut m = Matrix::zeros(k * d, k * d);
    for (x, (p, s)) in ens.priors.iter().zip(&ens.states).enumerate() {
        m.view_mut((x * d, x * d), (d, d)).copy_from(&(s.matrix() * c(*p)));
    }
    DensityMatrix::from_matrix_unchecked(m)
}

pub fn cq_shape(ens: &CQEnsemble) -> SubsystemShape {
    SubsystemShape::new(vec![ens.len(), ens.dim()]).expect("nonempty ensemble")
}

/// `Tr[{ρ_x - e^{nγ} ρ̄ ≤ 0} ρ_x]`.
fn miss_probability(state: &DensityMatrix, average: &DensityMatrix, scale: f64) -> Result<f64> {
    let diff = state.minus_scaled(scale, average)?;
    spectral_projection(&diff, Relation::Leq, 0.0).trace_with(state)
}

/// `2 Σ_x p_x Tr[{ρ_x - e^{nγ}ρ̄ ≤ 0} ρ_x] + 4 e^{-nγ} M` for an ensemble of `n`-block states.
pub fn random_coding_bound(ens: &CQEnsemble, n: usize, gamma: f64, m: usize) -> Result<f64> {
    let scale = (n as f64 * gamma).exp();
    let avg = ens.average();
    let mut first = 0.0;
    for (p, s) in ens.priors.iter().zip(&ens.states) {
        if *p > 0.0 {
            first += p * miss_probability(s, &avg, scale)?;
        }
    }
    Ok(2.0 * first + 4.0 * m as f64 / scale)
}

/// Random code with its decoding measurement.
#[derive(Clone, Debug)]
pub struct CodeBook {
    /// Ensemble label of each message.
    pub codewords: Vec<usize>,
    pub decoder: Povm,
}

impl CodeBook {
    pub fn size(&self) -> usize {
        self.codewords.len()
    }
}

/// `E_i = S^{-1/2} A_i S^{-1/2}` with `S = Σ_j A_j`, pseudo-inverted on `range(S)`.
pub fn pretty_good_measurement(parts: &[HermitianOperator]) -> Result<Povm> {
    let first = parts.first().ok_or_else(|| Error::InvalidArgument("no measurement parts".into()))?;
    let d = first.dim();
    let mut s = HermitianOperator::zeros(d);
    for p in parts {
        s = s.checked_add(p)?;
    }
    let e = s.eig();
    if e.values.iter().all(|&v| v <= PSEUDO_INVERSE_CUTOFF) {
        return Err(Error::ThresholdTooHigh);
    }
    let mut inv_sqrt = Matrix::zeros(d, d);
    for (i, &v) in e.values.iter().enumerate() {
        if v > PSEUDO_INVERSE_CUTOFF {
            let u = e.vectors.column(i);
            inv_sqrt += (u * u.adjoint()) * c(1.0 / v.sqrt());
        }
    }
    let elements = parts
        .iter()
        .map(|p| HermitianOperator::from_matrix_unchecked(&inv_sqrt * p.matrix() * &inv_sqrt))
        .collect();
    Ok(Povm::from_elements_unchecked(d, elements))
}

/// Decoder built from `Π_i = {ρ_{x_i} ≥ e^{nγ} ρ̄}` for fixed codewords.
pub fn pgm_for_codewords(ens: &CQEnsemble, codewords: &[usize], n: usize, gamma: f64) -> Result<Povm> {
    let scale = (n as f64 * gamma).exp();
    let avg = ens.average();
    let parts = codewords
        .iter()
        .map(|&x| {
            let diff = ens.states[x].minus_scaled(scale, &avg)?;
            Ok(spectral_projection(&diff, Relation::Geq, 0.0).operator().clone())
        })
        .collect::<Result<Vec<_>>>()?;
    pretty_good_measurement(&parts)
}

/// `M` codewords drawn i.i.d. from the priors (with replacement) and the thresholded PGM.
pub fn pgm_codebook(ens: &CQEnsemble, n: usize, m: usize, gamma: f64, seed: u64) -> Result<CodeBook> {
    if m == 0 {
        return Err(Error::InvalidArgument("code size must be at least 1".into()));
    }
    let codewords = draw_codewords(ens, m, seed)?;
    let decoder = pgm_for_codewords(ens, &codewords, n, gamma)?;
    Ok(CodeBook { codewords, decoder })
}

pub fn draw_codewords(ens: &CQEnsemble, m: usize, seed: u64) -> Result<Vec<usize>> {
    let dist = WeightedIndex::new(&ens.priors).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut r = rng(seed, 0xc0de);
    Ok((0..m).map(|_| dist.sample(&mut r)).collect())
}

/// `(1/M) Σ_i (1 - Tr[σ_i E_i])` for explicit codeword states.
pub fn average_error_for_states(decoder: &Povm, states: &[&DensityMatrix]) -> Result<f64> {
    if states.len() != decoder.len() {
        return Err(Error::DimensionMismatch { expected: decoder.len(), found: states.len() });
    }
    let mut total = 0.0;
    for (e, s) in decoder.elements().iter().zip(states) {
        total += 1.0 - e.trace_with(s)?;
    }
    Ok((total / states.len() as f64).clamp(0.0, 1.0))
}

pub fn average_error(code: &CodeBook, ens: &CQEnsemble) -> Result<f64> {
    let states: Vec<&DensityMatrix> = code.codewords.iter().map(|&x| &ens.states[x]).collect();
    average_error_for_states(&code.decoder, &states)
}

/// `1 - Tr[{Π ≥ 0}Π] - e^{nγ}/M` with `Π = ρ^{AQ} - e^{nγ} ρ^A ⊗ ρ^Q` on a two-factor shape.
pub fn converse_error_bound(rho_aq: &DensityMatrix, shape: &SubsystemShape, n: usize, gamma: f64, m: usize) -> Result<f64> {
    let reference = crate::spectrum::product_reference(rho_aq, shape)?;
    let scale = (n as f64 * gamma).exp();
    let t = positive_part(&rho_aq.minus_scaled(scale, &reference)?, rho_aq)?.excess;
    Ok(1.0 - t - scale / m as f64)
}

/// The same bound for a uniform-marginal code, evaluated block by block.
pub fn code_converse_bound(states: &[&DensityMatrix], n: usize, gamma: f64) -> Result<f64> {
    let m = states.len();
    if m == 0 {
        return Err(Error::InvalidArgument("empty code".into()));
    }
    let d = states[0].dim();
    let mut avg = Matrix::zeros(d, d);
    for s in states {
        avg += s.matrix() * c(1.0 / m as f64);
    }
    let avg = HermitianOperator::from_matrix_unchecked(avg);
    let scale = (n as f64 * gamma).exp();
    let mut t = 0.0;
    for s in states {
        t += positive_part(&s.minus_scaled(scale, &avg)?, s)?.excess / m as f64;
    }
    Ok(1.0 - t - scale / m as f64)
}

/// Uniform-marginal code `(1/M) Σ_i |i⟩⟨i| ⊗ σ_i`.
pub fn code_state(states: &[&DensityMatrix]) -> Result<(DensityMatrix, SubsystemShape)> {
    let ens = CQEnsemble::uniform(states.iter().map(|s| (*s).clone()).collect())?;
    Ok((cq_state(&ens), cq_shape(&ens)))
}

/// Outcome of one simulated code.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CodeTrial {
    pub seed: u64,
    pub error: f64,
    pub bound: f64,
}

/// Random codeword draw decoded by the square-root measurement, with the converse value for that code.
pub fn uniform_marginal_trial(ens: &CQEnsemble, n: usize, m: usize, gamma: f64, seed: u64) -> Result<CodeTrial> {
    let codewords = draw_codewords(ens, m, seed)?;
    let states: Vec<&DensityMatrix> = codewords.iter().map(|&x| &ens.states[x]).collect();
    let parts: Vec<HermitianOperator> = states.iter().map(|s| s.operator().clone()).collect();
    let decoder = pretty_good_measurement(&parts)?;
    Ok(CodeTrial { seed, error: average_error_for_states(&decoder, &states)?, bound: code_converse_bound(&states, n, gamma)? })
}

/// One row of a capacity sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct CapacityRow {
    pub n: usize,
    /// Mutual-information estimates of each candidate ensemble.
    pub candidates: Vec<RateBounds>,
    pub best_candidate: usize,
    /// `max_candidates S̲(B:ΛQ)`.
    pub capacity: f64,
}

/// `max` over candidate input ensembles of the inf-spectral mutual information of the cq state through a memoryless channel.
pub fn capacity_estimate(
    candidates: &[CQEnsemble],
    channel: &KrausChannel,
    ns: &[usize],
    cfg: &EstimatorConfig,
) -> Result<Vec<CapacityRow>> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidate ensembles".into()));
    }
    let sources = candidates
        .iter()
        .map(|e| {
            let out = e.through(channel)?;
            BipartiteSource::iid(cq_state(&out), cq_shape(&out))
        })
        .collect::<Result<Vec<_>>>()?;
    ns.par_iter()
        .map(|&n| {
            let est = sources.iter().map(|s| mutual_information_estimate(s, n, cfg)).collect::<Result<Vec<_>>>()?;
            let (best, cap) = est
                .iter()
                .enumerate()
                .map(|(i, r)| (i, r.lower))
                .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
            Ok(CapacityRow { n, candidates: est, best_candidate: best, capacity: cap })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::max_abs;
    use crate::random::{random_density, random_pure_state};

    const LN2: f64 = std::f64::consts::LN_2;

    fn basis(d: usize, i: usize) -> DensityMatrix {
        DensityMatrix::basis_state(d, i).unwrap()
    }

    fn orthogonal_qubits() -> CQEnsemble {
        CQEnsemble::uniform(vec![basis(2, 0), basis(2, 1)]).unwrap()
    }

    #[test]
    fn ensemble_validation() {
        assert!(CQEnsemble::new(vec![0.5, 0.6], vec![basis(2, 0), basis(2, 1)]).is_err());
        assert!(CQEnsemble::new(vec![1.0], vec![basis(2, 0), basis(2, 1)]).is_err());
        assert!(CQEnsemble::new(vec![0.5, 0.5], vec![basis(2, 0), basis(3, 1)]).is_err());
    }

    #[test]
    fn cq_state_examples() {
        let rho = random_density(3, 3, &mut rng(1, 0));
        let single = cq_state(&CQEnsemble::new(vec![1.0], vec![rho.clone()]).unwrap());
        assert!(max_abs(&(single.matrix() - rho.matrix())) < 1e-15);

        let two = cq_state(&orthogonal_qubits());
        let expected = HermitianOperator::from_real_diagonal(&[0.5, 0.0, 0.0, 0.5]);
        assert!(max_abs(&(two.matrix() - expected.matrix())) < 1e-15);

        let mut r = rng(2, 0);
        let ens = CQEnsemble::new(vec![0.2, 0.3, 0.5], (0..3).map(|_| random_density(2, 2, &mut r)).collect()).unwrap();
        let joint = cq_state(&ens);
        let q = joint.partial_trace(&cq_shape(&ens), &[1]).unwrap();
        assert!(max_abs(&(q.matrix() - ens.average().matrix())) < 1e-10);
        let b = joint.partial_trace(&cq_shape(&ens), &[0]).unwrap();
        assert!(max_abs(&(b.matrix() - HermitianOperator::from_real_diagonal(&[0.2, 0.3, 0.5]).matrix())) < 1e-12);
    }

    #[test]
    fn random_coding_bound_examples() {
        let ens = orthogonal_qubits();
        let b = random_coding_bound(&ens, 1, 0.3, 2).unwrap();
        assert!((b - 8.0 * (-0.3f64).exp()).abs() < 1e-12);
        let b0 = random_coding_bound(&ens, 1, 0.3, 0).unwrap();
        assert!(b0.abs() < 1e-12);

        let rho = random_density(2, 2, &mut rng(3, 0));
        let same = CQEnsemble::uniform(vec![rho.clone(), rho]).unwrap();
        assert!(random_coding_bound(&same, 1, 0.2, 0).unwrap() >= 2.0 - 1e-12);
    }

    #[test]
    fn pgm_single_codeword_projects_on_range() {
        let mut r = rng(4, 0);
        let ens = CQEnsemble::uniform((0..3).map(|_| random_density(3, 2, &mut r)).collect()).unwrap();
        let code = pgm_codebook(&ens, 1, 1, -0.5, 9).unwrap();
        let e = &code.decoder.elements()[0];
        assert!(max_abs(&(e.matrix() * e.matrix() - e.matrix())) < 1e-9);
    }

    #[test]
    fn pgm_orthogonal_codewords_decode_perfectly() {
        let ens = orthogonal_qubits();
        let codewords = vec![0, 1];
        let decoder = pgm_for_codewords(&ens, &codewords, 1, 0.1).unwrap();
        for (i, e) in decoder.elements().iter().enumerate() {
            assert!(max_abs(&(e.matrix() - basis(2, i).matrix())) < 1e-12);
        }
        let code = CodeBook { codewords, decoder };
        assert!(average_error(&code, &ens).unwrap() < 1e-12);
    }

    #[test]
    fn pgm_is_valid_povm_and_deterministic() {
        let mut r = rng(5, 0);
        let ens = CQEnsemble::uniform((0..4).map(|_| random_density(4, 4, &mut r)).collect()).unwrap();
        let a = pgm_codebook(&ens, 1, 3, -0.2, 77).unwrap();
        let b = pgm_codebook(&ens, 1, 3, -0.2, 77).unwrap();
        assert_eq!(a.codewords, b.codewords);
        assert!(Povm::new(4, a.decoder.elements().to_vec()).is_ok());
    }

    #[test]
    fn threshold_too_high_is_reported() {
        let ens = orthogonal_qubits();
        assert_eq!(pgm_codebook(&ens, 1, 2, 5.0, 0).unwrap_err(), Error::ThresholdTooHigh);
    }

    #[test]
    fn uniform_decoder_error() {
        let states: Vec<DensityMatrix> = (0..3).map(|i| basis(3, i)).collect();
        let refs: Vec<&DensityMatrix> = states.iter().collect();
        let uniform = Povm::new(3, vec![HermitianOperator::identity(3).scaled(1.0 / 3.0); 3]).unwrap();
        assert!((average_error_for_states(&uniform, &refs).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn converse_examples() {
        let a = DensityMatrix::maximally_mixed(2);
        let q = random_density(2, 2, &mut rng(6, 0));
        let shape = SubsystemShape::bipartite(2, 2).unwrap();
        let b = converse_error_bound(&a.tensor(&q), &shape, 1, 0.0, 2).unwrap();
        assert!((b - 0.5).abs() < 1e-12);

        let states = [basis(2, 0), basis(2, 1)];
        let refs: Vec<&DensityMatrix> = states.iter().collect();
        assert!(code_converse_bound(&refs, 1, LN2 - 1e-3).unwrap() <= 1e-12);

        let big = converse_error_bound(&a.tensor(&q), &shape, 1, 0.0, 1 << 40).unwrap();
        assert!((big - 1.0).abs() < 1e-9);
    }

    #[test]
    fn block_and_joint_converse_agree() {
        let mut r = rng(7, 0);
        let states: Vec<DensityMatrix> = (0..3).map(|_| random_density(2, 2, &mut r)).collect();
        let refs: Vec<&DensityMatrix> = states.iter().collect();
        let (joint, shape) = code_state(&refs).unwrap();
        for g in [-0.5, 0.0, 0.4] {
            let a = converse_error_bound(&joint, &shape, 1, g, 3).unwrap();
            let b = code_converse_bound(&refs, 1, g).unwrap();
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn simulated_codes_respect_both_bounds() {
        let mut r = rng(8, 0);
        for trial in 0..20u64 {
            let ens = CQEnsemble::uniform((0..3).map(|_| random_pure_state(3, &mut r)).collect()).unwrap();
            let gamma = 0.1 * (trial % 5) as f64;
            let t = uniform_marginal_trial(&ens, 1, 2, gamma, trial).unwrap();
            assert!(t.error >= t.bound - 1e-9);
        }
    }

    #[test]
    fn noiseless_channel_capacity() {
        let cfg = EstimatorConfig::default();
        let rows = capacity_estimate(&[orthogonal_qubits()], &KrausChannel::identity(2), &[10], &cfg).unwrap();
        assert!((rows[0].capacity - LN2).abs() < 0.01);
    }

    #[test]
    fn depolarizing_channel_has_zero_capacity() {
        let cfg = EstimatorConfig::default();
        let mut r = rng(9, 0);
        let random = CQEnsemble::uniform((0..3).map(|_| random_density(2, 2, &mut r)).collect()).unwrap();
        let rows =
            capacity_estimate(&[orthogonal_qubits(), random], &KrausChannel::completely_depolarizing(2), &[6], &cfg).unwrap();
        assert!(rows[0].capacity.abs() < 0.01);
    }

    #[test]
    fn commuting_cq_matches_classical_spectrum() {
        // Classical joint distribution p(x, y) with BSC(0.2) and uniform input.
        let cfg = EstimatorConfig::default();
        let ens = CQEnsemble::uniform(vec![
            DensityMatrix::diagonal(&[0.8, 0.2]).unwrap(),
            DensityMatrix::diagonal(&[0.2, 0.8]).unwrap(),
        ])
        .unwrap();
        let n = 8;
        let rows = capacity_estimate(&[ens], &KrausChannel::identity(2), &[n], &cfg).unwrap();
        // Classical oracle: i(x;y) = log(p(y|x)/p(y)) takes log 1.6 w.p. 0.8 and log 0.4 w.p. 0.2 per letter.
        let mass_at = |g: f64| -> f64 {
            let mut m = 0.0;
            let mut binom = 1.0;
            for k in 0..=n {
                if k > 0 {
                    binom *= (n - k + 1) as f64 / k as f64;
                }
                let rate = (k as f64 * 0.4f64.ln() + (n - k) as f64 * 1.6f64.ln()) / n as f64;
                if rate >= g - 1e-12 {
                    m += binom * 0.2f64.powi(k as i32) * 0.8f64.powi((n - k) as i32);
                }
            }
            m
        };
        let mut kinks: Vec<f64> =
            (0..=n).map(|k| (k as f64 * 0.4f64.ln() + (n - k) as f64 * 1.6f64.ln()) / n as f64).collect();
        kinks.sort_by(f64::total_cmp);
        let inf = kinks.iter().rev().copied().find(|&g| mass_at(g) >= 1.0 - cfg.epsilon).unwrap();
        assert!((rows[0].capacity - inf).abs() < 8.0 / 63.0 / 1024.0 + 1e-9);
    }

    #[test]
    fn extension_does_not_lower_mutual_information() {
        // B = A A' purifies a classical register; S̲(AA':Q) ≥ S̲(A:Q).
        let cfg = EstimatorConfig::default();
        let mut r = rng(10, 0);
        let s0 = random_density(2, 2, &mut r);
        let s1 = random_density(2, 2, &mut r);
        let small = CQEnsemble::uniform(vec![s0.clone(), s1.clone()]).unwrap();
        let ext = CQEnsemble::new(vec![0.3, 0.2, 0.3, 0.2], vec![s0.clone(), s0, s1.clone(), s1]).unwrap();
        for n in [1, 2] {
            let a = mutual_information_estimate(&BipartiteSource::iid(cq_state(&small), cq_shape(&small)).unwrap(), n, &cfg)
                .unwrap();
            let b =
                mutual_information_estimate(&BipartiteSource::iid(cq_state(&ext), cq_shape(&ext)).unwrap(), n, &cfg).unwrap();
            assert!(b.lower >= a.lower - 1e-9);
        }
    }
}
