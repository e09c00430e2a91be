//! Dense coding with Weyl encodings and a preprocessing channel on the sender's half.

use std::f64::consts::PI;

use rand::seq::index::sample;
use rayon::prelude::*;

use crate::capacity::{average_error_for_states, pretty_good_measurement};
use crate::channel::{compose, KrausChannel};
use crate::error::{Error, Result};
use crate::operator::{
    c, permute_subsystems, positive_part, spectral_projection, DensityMatrix, HermitianOperator, Matrix, Relation,
    SubsystemShape, C64,
};
use crate::random::{orthonormalize_columns, random_isometry, rng};
use crate::spectrum::{conditional_entropy_estimate, BipartiteSource, EstimatorConfig, RateBounds};

/// `U_{(p,q)} |j⟩ = e^{2πi pj/D} |j + q mod D⟩`.
pub fn weyl(dim: usize, p: usize, q: usize) -> Result<Matrix> {
    if p >= dim || q >= dim {
        return Err(Error::InvalidArgument(format!("Weyl index ({p}, {q}) out of range for D = {dim}")));
    }
    let mut u = Matrix::zeros(dim, dim);
    for j in 0..dim {
        let phase = 2.0 * PI * ((p * j) % dim) as f64 / dim as f64;
        u[((j + q) % dim, j)] = C64::from_polar(1.0, phase);
    }
    Ok(u)
}

/// All `D²` Weyl operators, indexed by `p·D + q`.
#[derive(Clone, Debug)]
pub struct WeylSet {
    dim: usize,
    ops: Vec<Matrix>,
}

impl WeylSet {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("Weyl dimension must be positive".into()));
        }
        let mut ops = Vec::with_capacity(dim * dim);
        for p in 0..dim {
            for q in 0..dim {
                ops.push(weyl(dim, p, q)?);
            }
        }
        Ok(Self { dim, ops })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn get(&self, index: usize) -> &Matrix {
        &self.ops[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Matrix> {
        self.ops.iter()
    }

    /// `(p, q)` of a flat index.
    pub fn label(&self, index: usize) -> (usize, usize) {
        (index / self.dim, index % self.dim)
    }
}

fn bipartite(shape: &SubsystemShape, dim: usize) -> Result<(usize, usize)> {
    if shape.len() != 2 {
        return Err(Error::InvalidShape(format!("expected two factors, got {}", shape.len())));
    }
    shape.check_dim(dim)?;
    Ok((shape.factors()[0], shape.factors()[1]))
}

/// `(1/D²) Σ_{p,q} (U ⊗ I) ρ (U ⊗ I)^H`.
pub fn weyl_twirl(rho: &DensityMatrix, shape: &SubsystemShape) -> Result<DensityMatrix> {
    let (da, db) = bipartite(shape, rho.dim())?;
    let set = WeylSet::new(da)?;
    let id = Matrix::identity(db, db);
    let mut acc = Matrix::zeros(rho.dim(), rho.dim());
    for u in set.iter() {
        let w = u.kronecker(&id);
        acc += &w * rho.matrix() * w.adjoint();
    }
    Ok(DensityMatrix::from_matrix_unchecked(acc * c(1.0 / set.len() as f64)))
}

/// `I/D ⊗ ρ_B`.
pub fn twirled_reference(rho: &DensityMatrix, shape: &SubsystemShape) -> Result<DensityMatrix> {
    let (da, _) = bipartite(shape, rho.dim())?;
    let rho_b = rho.partial_trace(shape, &[1])?;
    Ok(DensityMatrix::maximally_mixed(da).tensor(&rho_b))
}

/// Shared state with a preprocessing channel on `A`.
#[derive(Clone, Debug)]
pub struct DenseCodingInstance {
    state: DensityMatrix,
    shape: SubsystemShape,
    lambda: KrausChannel,
}

impl DenseCodingInstance {
    pub fn new(state: DensityMatrix, shape: SubsystemShape, lambda: KrausChannel) -> Result<Self> {
        let (da, _) = bipartite(&shape, state.dim())?;
        if lambda.in_dim() != da || lambda.out_dim() != da {
            return Err(Error::DimensionMismatch { expected: da, found: lambda.out_dim() });
        }
        Ok(Self { state, shape, lambda })
    }

    pub fn identity(state: DensityMatrix, shape: SubsystemShape) -> Result<Self> {
        let da = shape.factors().first().copied().unwrap_or(0);
        Self::new(state, shape, KrausChannel::identity(da))
    }

    pub fn state(&self) -> &DensityMatrix {
        &self.state
    }

    pub fn shape(&self) -> &SubsystemShape {
        &self.shape
    }

    pub fn lambda(&self) -> &KrausChannel {
        &self.lambda
    }

    pub fn a_dim(&self) -> usize {
        self.shape.factors()[0]
    }

    pub fn b_dim(&self) -> usize {
        self.shape.factors()[1]
    }

    /// `(Λ ⊗ id) ρ`.
    pub fn preprocessed(&self) -> Result<DensityMatrix> {
        self.lambda.on_first_factor(self.b_dim()).apply(&self.state)
    }

    /// `n` copies regrouped as `A^n ⊗ B^n`, with `Λ^{⊗n}`.
    pub fn block(&self, n: usize) -> Result<Self> {
        let (state, shape) = block_state(&self.state, &self.shape, n)?;
        Self::new(state, shape, self.lambda.tensor_power(n))
    }

    /// `(U_x Λ ⊗ id) ρ (U_x Λ ⊗ id)^H` for every Weyl index.
    pub fn codewords(&self) -> Result<Vec<DensityMatrix>> {
        let base = self.preprocessed()?;
        let set = WeylSet::new(self.a_dim())?;
        let id = Matrix::identity(self.b_dim(), self.b_dim());
        Ok(set.iter().map(|u| base.conjugate_by(&u.kronecker(&id))).collect())
    }
}

/// `ρ^{⊗n}` on `(AB)^n` regrouped as `A^n ⊗ B^n`.
pub fn block_state(rho: &DensityMatrix, shape: &SubsystemShape, n: usize) -> Result<(DensityMatrix, SubsystemShape)> {
    let (da, db) = bipartite(shape, rho.dim())?;
    if n == 0 {
        return Err(Error::InvalidArgument("block length must be positive".into()));
    }
    let order: Vec<usize> = (0..n).map(|k| 2 * k).chain((0..n).map(|k| 2 * k + 1)).collect();
    let (m, _) = permute_subsystems(rho.tensor_power(n).matrix(), &shape.repeat(n), &order)?;
    Ok((DensityMatrix::from_matrix_unchecked(m), SubsystemShape::bipartite(da.pow(n as u32), db.pow(n as u32))?))
}

/// `S̄(ΛA|B)` and `S̲(ΛA|B)` of `((Λ ⊗ id)ρ)^{⊗n}` against `I^A ⊗ ρ_B^{⊗n}`.
pub fn conditional_sup_entropy(
    rho: &DensityMatrix,
    shape: &SubsystemShape,
    lambda: &KrausChannel,
    n: usize,
    cfg: &EstimatorConfig,
) -> Result<RateBounds> {
    let inst = DenseCodingInstance::new(rho.clone(), shape.clone(), lambda.clone())?;
    let src = BipartiteSource::iid(inst.preprocessed()?, shape.clone())?;
    conditional_entropy_estimate(&src, n, cfg)
}

// ---------------------------------------------------------------------------
// Channel search

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MinimizerOptions {
    pub restarts: usize,
    pub seed: u64,
    /// Stinespring environment dimension; defaults to the channel dimension.
    pub env_dim: Option<usize>,
    pub max_sweeps: usize,
    pub initial_step: f64,
    pub min_step: f64,
}

impl Default for MinimizerOptions {
    fn default() -> Self {
        Self { restarts: 16, seed: 0, env_dim: None, max_sweeps: 20, initial_step: 0.5, min_step: 1e-3 }
    }
}

/// Best channel found, with the value reached from every start.
#[derive(Clone, Debug)]
pub struct ChannelSearch {
    pub channel: KrausChannel,
    pub value: f64,
    pub restart_values: Vec<f64>,
    pub best_restart: usize,
    /// Objective at the identity channel.
    pub identity_value: f64,
}

fn isometry_channel(params: &[f64], dim: usize, env: usize) -> Option<KrausChannel> {
    let rows = dim * env;
    let raw = Matrix::from_fn(rows, dim, |r, k| {
        let i = 2 * (r * dim + k);
        C64::new(params[i], params[i + 1])
    });
    let v = orthonormalize_columns(&raw)?;
    KrausChannel::from_isometry(&v, dim, env).ok()
}

fn params_of(v: &Matrix) -> Vec<f64> {
    let mut p = Vec::with_capacity(2 * v.len());
    for r in 0..v.nrows() {
        for k in 0..v.ncols() {
            p.push(v[(r, k)].re);
            p.push(v[(r, k)].im);
        }
    }
    p
}

/// Starting isometries: identity, replacement by `|0⟩` (when `env ≥ dim`), then seeded random.
fn starts(dim: usize, env: usize, opts: &MinimizerOptions) -> Vec<Matrix> {
    let rows = dim * env;
    let mut out = Vec::with_capacity(opts.restarts.max(1));
    out.push(Matrix::from_fn(rows, dim, |r, k| if r == k * env { c(1.0) } else { c(0.0) }));
    if env >= dim && opts.restarts > 1 {
        out.push(Matrix::from_fn(rows, dim, |r, k| if r == k { c(1.0) } else { c(0.0) }));
    }
    let mut k = 0;
    while out.len() < opts.restarts {
        out.push(random_isometry(rows, dim, &mut rng(opts.seed, k)));
        k += 1;
    }
    out
}

/// Local coordinate descent over Stinespring parameters from several starts.
///
/// Objective failures count as `+∞`. The returned value is the best found,
/// an upper bound on the true minimum.
pub fn minimize_channel<F>(dim: usize, opts: &MinimizerOptions, objective: F) -> Result<ChannelSearch>
where
    F: Fn(&KrausChannel) -> Result<f64> + Sync,
{
    let env = opts.env_dim.unwrap_or(dim).max(1);
    let eval = |p: &[f64]| -> f64 {
        isometry_channel(p, dim, env).and_then(|ch| objective(&ch).ok()).filter(|v| v.is_finite()).unwrap_or(f64::INFINITY)
    };
    let identity_value = objective(&KrausChannel::identity(dim))?;
    let results: Vec<(Vec<f64>, f64)> = starts(dim, env, opts)
        .par_iter()
        .map(|v0| {
            let mut p = params_of(v0);
            let mut best = eval(&p);
            let mut step = opts.initial_step;
            for _ in 0..opts.max_sweeps {
                let mut improved = false;
                for i in 0..p.len() {
                    for sign in [1.0, -1.0] {
                        let old = p[i];
                        p[i] = old + sign * step;
                        let f = eval(&p);
                        if f < best - 1e-12 {
                            best = f;
                            improved = true;
                            break;
                        }
                        p[i] = old;
                    }
                }
                if !improved {
                    step *= 0.5;
                    if step < opts.min_step {
                        break;
                    }
                }
            }
            (p, best)
        })
        .collect();
    let restart_values: Vec<f64> = results.iter().map(|r| r.1).collect();
    let (best_restart, value) = restart_values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    if !value.is_finite() {
        return Err(Error::Unsupported("objective failed at every start".into()));
    }
    let channel = isometry_channel(&results[best_restart].0, dim, env).expect("finite value implies a valid isometry");
    Ok(ChannelSearch { channel, value, restart_values, best_restart, identity_value })
}

/// `min_Λ S̄(ΛA|B)` at block length `n`.
pub fn minimize_lambda(
    rho: &DensityMatrix,
    shape: &SubsystemShape,
    n: usize,
    opts: &MinimizerOptions,
    cfg: &EstimatorConfig,
) -> Result<ChannelSearch> {
    let (da, _) = bipartite(shape, rho.dim())?;
    minimize_channel(da, opts, |lambda| Ok(conditional_sup_entropy(rho, shape, lambda, n, cfg)?.upper))
}

#[derive(Clone, Debug)]
pub struct DcCapacityRow {
    pub n: usize,
    pub min_conditional: f64,
    /// `log d - min_Λ S̄(ΛA|B)`.
    pub capacity: f64,
    pub identity_capacity: f64,
    pub search: ChannelSearch,
}

pub fn dc_capacity_estimate(
    rho: &DensityMatrix,
    shape: &SubsystemShape,
    ns: &[usize],
    opts: &MinimizerOptions,
    cfg: &EstimatorConfig,
) -> Result<Vec<DcCapacityRow>> {
    let (da, _) = bipartite(shape, rho.dim())?;
    let log_d = (da as f64).ln();
    ns.iter()
        .map(|&n| {
            let search = minimize_lambda(rho, shape, n, opts, cfg)?;
            Ok(DcCapacityRow {
                n,
                min_conditional: search.value,
                capacity: log_d - search.value,
                identity_capacity: log_d - search.identity_value,
                search,
            })
        })
        .collect()
}

/// Single-letter formula evaluated on `N` copies.
#[derive(Clone, Debug)]
pub struct CopyFormulaEstimate {
    pub copies: usize,
    /// `min_Λ S((Λ ⊗ id) ρ^{⊗N}) / N`.
    pub min_entropy_rate: f64,
    /// `log d + S(ρ_B) - min_entropy_rate`.
    pub capacity: f64,
    pub search: ChannelSearch,
}

/// `log d + S(B) - (1/N) min_Λ S((Λ ⊗ id) ρ^{⊗N})`, with `Λ` acting jointly on `A^N`.
pub fn copy_formula_capacity(rho: &DensityMatrix, shape: &SubsystemShape, copies: usize, opts: &MinimizerOptions) -> Result<CopyFormulaEstimate> {
    let (da, _) = bipartite(shape, rho.dim())?;
    let s_b = rho.partial_trace(shape, &[1])?.von_neumann_entropy();
    let (block, block_shape) = block_state(rho, shape, copies)?;
    let db_n = block_shape.factors()[1];
    let dim = block_shape.factors()[0];
    let search = minimize_channel(dim, opts, |lambda| Ok(lambda.on_first_factor(db_n).apply(&block)?.von_neumann_entropy()))?;
    let rate = search.value / copies as f64;
    Ok(CopyFormulaEstimate { copies, min_entropy_rate: rate, capacity: (da as f64).ln() + s_b - rate, search })
}

// ---------------------------------------------------------------------------
// Protocol simulation and bounds

#[derive(Clone, Debug, PartialEq)]
pub struct DcSimulation {
    /// Weyl labels `(p, q)` of the messages.
    pub encodings: Vec<(usize, usize)>,
    pub per_message_error: Vec<f64>,
    pub error: f64,
    /// `2·avg_x Tr[{σ_x - e^{nγ}ρ̄ ≤ 0} σ_x] + 4 e^{-nγ} M` over all `D²` encodings.
    pub random_coding_bound: f64,
}

/// Random dense code on `n` copies: `M` distinct Weyl encodings after `Λ^{⊗n}`, thresholded PGM decoder.
#[allow(clippy::too_many_arguments)]
pub fn dc_simulate(
    rho: &DensityMatrix,
    shape: &SubsystemShape,
    lambda: &KrausChannel,
    n: usize,
    m: usize,
    gamma: f64,
    seed: u64,
) -> Result<DcSimulation> {
    let inst = DenseCodingInstance::new(rho.clone(), shape.clone(), lambda.clone())?.block(n)?;
    let d = inst.a_dim();
    let total = d * d;
    if m == 0 || m > total {
        return Err(Error::InvalidArgument(format!("code size {m} outside 1..={total}")));
    }
    let all = inst.codewords()?;
    let avg = twirled_reference(&inst.preprocessed()?, inst.shape())?;
    let scale = (n as f64 * gamma).exp();
    let chosen: Vec<usize> = if m == total { (0..total).collect() } else { sample(&mut rng(seed, 0xdc), total, m).into_vec() };
    let parts = chosen
        .iter()
        .map(|&x| Ok(spectral_projection(&all[x].minus_scaled(scale, &avg)?, Relation::Geq, 0.0).operator().clone()))
        .collect::<Result<Vec<HermitianOperator>>>()?;
    let decoder = pretty_good_measurement(&parts)?;
    let states: Vec<&DensityMatrix> = chosen.iter().map(|&x| &all[x]).collect();
    let per_message_error = decoder
        .elements()
        .iter()
        .zip(&states)
        .map(|(e, s)| Ok(1.0 - e.trace_with(s)?))
        .collect::<Result<Vec<f64>>>()?;
    let error = average_error_for_states(&decoder, &states)?;
    let mut miss = 0.0;
    for s in &all {
        let diff = s.minus_scaled(scale, &avg)?;
        miss += spectral_projection(&diff, Relation::Leq, 0.0).trace_with(s)?;
    }
    let random_coding_bound = 2.0 * miss / total as f64 + 4.0 * m as f64 / scale;
    let set = WeylSet::new(d)?;
    Ok(DcSimulation { encodings: chosen.iter().map(|&x| set.label(x)).collect(), per_message_error, error, random_coding_bound })
}

/// Average over Weyl codewords of `Tr[{σ_x - e^{nγ}ρ̄ ≥ 0}(σ_x - e^{nγ}ρ̄)]`, and the same
/// quantity for `(Λ ⊗ id)ρ` against `I/D ⊗ ρ_B`. The two agree by unitary invariance.
pub fn unitary_invariance_pair(
    rho: &DensityMatrix,
    shape: &SubsystemShape,
    lambda: &KrausChannel,
    n: usize,
    gamma: f64,
) -> Result<(f64, f64)> {
    let inst = DenseCodingInstance::new(rho.clone(), shape.clone(), lambda.clone())?.block(n)?;
    let base = inst.preprocessed()?;
    let reference = twirled_reference(&base, inst.shape())?;
    let scale = (n as f64 * gamma).exp();
    let all = inst.codewords()?;
    let mut avg = 0.0;
    for s in &all {
        avg += positive_part(&s.minus_scaled(scale, &reference)?, s)?.excess;
    }
    let single = positive_part(&base.minus_scaled(scale, &reference)?, &base)?.excess;
    Ok((avg / all.len() as f64, single))
}

/// Channels `U_x ∘ Λ` for every Weyl index on `A`.
pub fn weyl_encodings(lambda: &KrausChannel) -> Result<Vec<KrausChannel>> {
    let set = WeylSet::new(lambda.out_dim())?;
    set.iter().map(|u| compose(&KrausChannel::unitary(u.clone())?, lambda)).collect()
}

/// `1 - max_i Tr[{σ_i - e^{-nγ} I ⊗ ρ_B ≥ 0}(σ_i - e^{-nγ} I ⊗ ρ_B)] - e^{n(log d - γ)}/M`
/// for codewords `σ_i = (E_i ⊗ id) ρ^{⊗n}`; `encodings` act on `A^n`.
pub fn dc_converse_bound(
    rho: &DensityMatrix,
    shape: &SubsystemShape,
    encodings: &[KrausChannel],
    n: usize,
    gamma: f64,
    m: usize,
) -> Result<f64> {
    let (da, _) = bipartite(shape, rho.dim())?;
    let (block, block_shape) = block_state(rho, shape, n)?;
    let db_n = block_shape.factors()[1];
    let reference = crate::spectrum::conditional_reference(&block, &block_shape)?;
    let scale = (-(n as f64) * gamma).exp();
    let mut max_t = f64::NEG_INFINITY;
    for e in encodings {
        let sigma = e.on_first_factor(db_n).apply(&block)?;
        let t = positive_part(&sigma.minus_scaled(scale, &reference)?, &sigma)?.excess;
        max_t = max_t.max(t);
    }
    if encodings.is_empty() {
        return Err(Error::InvalidArgument("no encodings".into()));
    }
    Ok(1.0 - max_t - (n as f64 * ((da as f64).ln() - gamma)).exp() / m as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::max_abs;
    use crate::random::random_density;

    const LN2: f64 = std::f64::consts::LN_2;

    fn bell() -> DensityMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        DensityMatrix::pure(&[c(s), c(0.0), c(0.0), c(s)]).unwrap()
    }

    fn qubits() -> SubsystemShape {
        SubsystemShape::bipartite(2, 2).unwrap()
    }

    #[test]
    fn weyl_qubit_is_pauli() {
        let x = Matrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
        let z = Matrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)]);
        assert!(max_abs(&(weyl(2, 0, 1).unwrap() - x)) < 1e-15);
        assert!(max_abs(&(weyl(2, 1, 0).unwrap() - z)) < 1e-15);
        for d in 1..5 {
            assert!(max_abs(&(weyl(d, 0, 0).unwrap() - Matrix::identity(d, d))) < 1e-15);
        }
        assert!(weyl(3, 3, 0).is_err());
    }

    #[test]
    fn weyl_qutrit_is_unitary_and_composes() {
        for p in 0..3 {
            for q in 0..3 {
                let u = weyl(3, p, q).unwrap();
                assert!(max_abs(&(u.adjoint() * &u - Matrix::identity(3, 3))) < 1e-12);
                for p2 in 0..3 {
                    for q2 in 0..3 {
                        let prod = &u * weyl(3, p2, q2).unwrap();
                        let target = weyl(3, (p + p2) % 3, (q + q2) % 3).unwrap();
                        // Equal up to a global phase.
                        let (r, col) = (q2 % 3, 0);
                        let phase = prod[((r + q) % 3, col)] / target[((r + q) % 3, col)];
                        assert!((phase.norm() - 1.0).abs() < 1e-12);
                        assert!(max_abs(&(prod - target * phase)) < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn twirl_examples() {
        let sigma = random_density(3, 3, &mut rng(1, 0));
        let fixed = DensityMatrix::maximally_mixed(2).tensor(&sigma);
        let shape = SubsystemShape::bipartite(2, 3).unwrap();
        assert!(max_abs(&(weyl_twirl(&fixed, &shape).unwrap().matrix() - fixed.matrix())) < 1e-12);

        let tw = weyl_twirl(&bell(), &qubits()).unwrap();
        assert!(max_abs(&(tw.matrix() - Matrix::identity(4, 4) * c(0.25))) < 1e-12);

        let rho = random_density(4, 4, &mut rng(2, 0));
        let out = weyl_twirl(&rho, &qubits()).unwrap();
        let a = out.partial_trace(&qubits(), &[0]).unwrap();
        assert!(max_abs(&(a.matrix() - Matrix::identity(2, 2) * c(0.5))) < 1e-10);
        let expected = twirled_reference(&rho, &qubits()).unwrap();
        assert!(max_abs(&(out.matrix() - expected.matrix())) < 1e-9);
    }

    #[test]
    fn block_state_regroups_factors() {
        let rho = random_density(4, 4, &mut rng(3, 0));
        let (block, shape) = block_state(&rho, &qubits(), 2).unwrap();
        let b = block.partial_trace(&shape, &[1]).unwrap();
        let rho_b = rho.partial_trace(&qubits(), &[1]).unwrap();
        assert!(max_abs(&(b.matrix() - rho_b.tensor(&rho_b).matrix())) < 1e-12);
        let a = block.partial_trace(&shape, &[0]).unwrap();
        let rho_a = rho.partial_trace(&qubits(), &[0]).unwrap();
        assert!(max_abs(&(a.matrix() - rho_a.tensor(&rho_a).matrix())) < 1e-12);
    }

    #[test]
    fn conditional_examples() {
        let cfg = EstimatorConfig::default();
        let id = KrausChannel::identity(2);
        let e = conditional_sup_entropy(&bell(), &qubits(), &id, 10, &cfg).unwrap();
        assert!((e.upper + LN2).abs() < 0.01);

        let prod = DensityMatrix::maximally_mixed(2).tensor(&DensityMatrix::diagonal(&[0.8, 0.2]).unwrap());
        let e = conditional_sup_entropy(&prod, &qubits(), &id, 10, &cfg).unwrap();
        assert!((e.upper - LN2).abs() < 0.01);

        let dep = KrausChannel::completely_depolarizing(2);
        let e = conditional_sup_entropy(&bell(), &qubits(), &dep, 10, &cfg).unwrap();
        assert!((e.upper - LN2).abs() < 0.01);
    }

    #[test]
    fn minimizer_never_exceeds_identity() {
        let cfg = EstimatorConfig::default();
        let opts = MinimizerOptions { restarts: 4, max_sweeps: 4, ..Default::default() };
        let bell_search = minimize_lambda(&bell(), &qubits(), 6, &opts, &cfg).unwrap();
        assert!(bell_search.value <= bell_search.identity_value + 1e-9);
        assert!((bell_search.value + LN2).abs() < 0.01);

        let prod = DensityMatrix::diagonal(&[0.7, 0.3]).unwrap().tensor(&DensityMatrix::diagonal(&[0.6, 0.4]).unwrap());
        let s = minimize_lambda(&prod, &qubits(), 6, &opts, &cfg).unwrap();
        assert!(s.value <= s.identity_value + 1e-9);
        assert!(s.value.abs() < 0.01);
    }

    #[test]
    fn separable_state_stays_nonnegative() {
        let cfg = EstimatorConfig::default();
        let opts = MinimizerOptions { restarts: 6, max_sweeps: 4, seed: 3, ..Default::default() };
        let rho = DensityMatrix::diagonal(&[0.5, 0.0, 0.0, 0.5]).unwrap();
        let s = minimize_lambda(&rho, &qubits(), 6, &opts, &cfg).unwrap();
        assert!(s.value >= -1e-3);
    }

    #[test]
    fn copy_formula_examples() {
        let opts = MinimizerOptions { restarts: 4, max_sweeps: 6, ..Default::default() };
        let h = copy_formula_capacity(&bell(), &qubits(), 1, &opts).unwrap();
        assert!((h.capacity - 2.0 * LN2).abs() < 1e-6);
        let pure_prod = DensityMatrix::basis_state(4, 0).unwrap();
        let h = copy_formula_capacity(&pure_prod, &qubits(), 1, &opts).unwrap();
        assert!((h.capacity - LN2).abs() < 1e-6);
    }

    #[test]
    fn bell_protocol_is_error_free() {
        let sim = dc_simulate(&bell(), &qubits(), &KrausChannel::identity(2), 1, 4, 4f64.ln() - 0.1, 0).unwrap();
        assert!(sim.error.abs() < 1e-12);
        let one = dc_simulate(&bell(), &qubits(), &KrausChannel::identity(2), 1, 1, 0.0, 5).unwrap();
        assert!(one.error.abs() < 1e-12);
    }

    #[test]
    fn product_state_protocol_respects_converse() {
        let rho = DensityMatrix::basis_state(4, 0).unwrap();
        let id = KrausChannel::identity(2);
        let sim = dc_simulate(&rho, &qubits(), &id, 1, 4, 0.2, 1).unwrap();
        assert!(sim.per_message_error.iter().any(|&e| e >= 0.5 - 1e-9));
        let enc = weyl_encodings(&id).unwrap();
        for g in [0.0, 0.3, LN2, 1.0] {
            assert!(sim.error >= dc_converse_bound(&rho, &qubits(), &enc, 1, g, 4).unwrap() - 1e-9);
        }
    }

    #[test]
    fn converse_examples() {
        let id = KrausChannel::identity(2);
        let enc = weyl_encodings(&id).unwrap();
        let mixed = DensityMatrix::maximally_mixed(4);
        let b = dc_converse_bound(&mixed, &qubits(), &enc, 1, LN2, 4).unwrap();
        assert!((b - 0.75).abs() < 1e-12);
        let b = dc_converse_bound(&bell(), &qubits(), &enc, 1, 2.0 * LN2 - 0.05, 4).unwrap();
        assert!(b <= 1e-12);
        let big = dc_converse_bound(&bell(), &qubits(), &enc, 1, 0.3, usize::MAX).unwrap();
        let t = 1.0 - (-0.3f64).exp() / 2.0;
        assert!((big - (1.0 - t)).abs() < 1e-9);
    }

    #[test]
    fn unitary_invariance_holds() {
        let mut r = rng(4, 0);
        let rho = random_density(4, 4, &mut r);
        let lambda = crate::channel::random_cptp(2, 2, 2, 8).unwrap();
        for n in [1, 2] {
            for g in [-0.2, 0.3, 0.9] {
                let (avg, single) = unitary_invariance_pair(&rho, &qubits(), &lambda, n, g).unwrap();
                assert!((avg - single).abs() < 1e-9);
            }
        }
    }
}
