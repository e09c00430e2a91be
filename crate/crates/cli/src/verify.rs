//! Built-in verification suites.
//!
//! Each suite runs a fixed scenario and reports named checks. Instance
//! randomness derives from the base seed, so a suite is reproducible.

use infospec::capacity::{
    capacity_estimate, random_coding_bound, pgm_codebook, average_error, uniform_marginal_trial, CQEnsemble,
};
use infospec::channel::random_cptp;
use infospec::compression::{
    mixed_projector, mixed_chain, mixed_rate_estimate, source_spectrum, spectral_best_case, spectral_scheme_at_rate,
    strong_converse_probe, tightest_converse_bound,
};
use infospec::dense_coding::{dc_capacity_estimate, dc_simulate, copy_formula_capacity, weyl_twirl, MinimizerOptions};
use infospec::operator::{max_abs, positive_part, spectral_projection, Relation};
use infospec::random::{random_density, random_distribution, random_hermitian, random_isometry, random_psd, random_unitary, rng};
use infospec::spectrum::{difference_trace, linspace, product_trace_fastpath, spectral_entropy_estimates};
use infospec::{DensityMatrix, EstimatorConfig, Error, HermitianOperator, KrausChannel, Projector, SourceSequence, SubsystemShape};
use rand::Rng;

use crate::config::{NAMED_STATES, StateSpec};
use crate::table::ResultRow;

pub const TOL: f64 = 1e-9;
/// Allowed distance between a finite-`n` rate estimate and its limit.
pub const RATE_TOL: f64 = 0.05;

/// Suite names in their canonical order.
pub const SUITES: &[&str] = &[
    "operator-inequalities",
    "fastpath-equivalence",
    "entropy-convergence",
    "compression-pincer",
    "mixed-source",
    "classical-coding",
    "dense-coding",
];

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub metric: String,
    pub value: f64,
    pub passed: bool,
    pub n: Option<usize>,
}

impl Check {
    fn new(metric: impl Into<String>, value: f64, passed: bool) -> Self {
        Self { metric: metric.into(), value, passed: passed && value.is_finite(), n: None }
    }

    fn at(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    fn count(metric: impl Into<String>, violations: usize) -> Self {
        Self::new(metric, violations as f64, violations == 0)
    }

    fn at_most(metric: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::new(metric, value, value <= limit)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
    /// Set when the suite could not run to completion.
    pub error: Option<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.error.is_none() && !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    pub fn summary_line(&self) -> String {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        let ok = self.checks.iter().filter(|c| c.passed).count();
        let mut line = format!("{verdict} {} ({ok}/{} checks)", self.suite, self.checks.len());
        let failed: Vec<String> = self
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| match c.n {
                Some(n) => format!("{}[n={n}]={:.4}", c.metric, c.value),
                None => format!("{}={:.4}", c.metric, c.value),
            })
            .collect();
        if !failed.is_empty() {
            line.push_str(&format!(" failed: {}", failed.join(", ")));
        }
        if let Some(e) = &self.error {
            line.push_str(&format!(" error: {e}"));
        }
        line
    }

    pub fn rows(&self, experiment: &str, seed: u64) -> Vec<ResultRow> {
        let mut rows: Vec<ResultRow> = self
            .checks
            .iter()
            .map(|c| {
                let mut r = ResultRow::new(experiment, c.metric.clone(), c.value).seed(seed).params(self.suite.clone());
                if let Some(n) = c.n {
                    r = r.n(n);
                }
                r.verdict(c.passed)
            })
            .collect();
        let summary = match &self.error {
            Some(e) => ResultRow::error(experiment, "suite", e).seed(seed).params(self.suite.clone()),
            None => {
                let failed = self.checks.iter().filter(|c| !c.passed).count();
                ResultRow::new(experiment, "suite_failed_checks", failed as f64)
                    .seed(seed)
                    .params(self.suite.clone())
                    .verdict(self.passed())
            }
        };
        rows.push(summary);
        rows
    }
}

pub fn run_suite(name: &str, seed: u64) -> SuiteReport {
    let result = match name {
        "operator-inequalities" => operator_inequalities(seed, 1000),
        "fastpath-equivalence" => fastpath_equivalence(seed, 200),
        "entropy-convergence" => entropy_convergence(),
        "compression-pincer" => compression_pincer(),
        "mixed-source" => mixed_source(seed, 100),
        "classical-coding" => classical_coding(seed),
        "dense-coding" => dense_coding(seed),
        other => Err(Error::InvalidArgument(format!("unknown suite `{other}`"))),
    };
    match result {
        Ok(checks) => SuiteReport { suite: name.into(), checks, error: None },
        Err(e) => SuiteReport { suite: name.into(), checks: Vec::new(), error: Some(e.to_string()) },
    }
}

fn h(p: f64) -> f64 {
    -(p * p.ln() + (1.0 - p) * (1.0 - p).ln())
}

fn positive_eigen_sum(h: &HermitianOperator) -> f64 {
    h.eigenvalues().into_iter().filter(|&x| x > 0.0).sum()
}

/// Positive-part bounds on `instances` random operators per inequality, dimensions cycling through 2..=8.
pub fn operator_inequalities(seed: u64, instances: usize) -> infospec::Result<Vec<Check>> {
    let mut proj_violations = 0;
    let mut oracle_dev: f64 = 0.0;
    let mut channel_violations = 0;
    let mut weight_violations = 0;
    for i in 0..instances {
        let dim = 2 + i % 7;
        let mut r = rng(seed, i as u64);

        let a = random_hermitian(dim, &mut r);
        let b = random_hermitian(dim, &mut r);
        let diff = a.checked_sub(&b)?;
        let t = positive_part(&diff, &HermitianOperator::identity(dim))?.excess;
        oracle_dev = oracle_dev.max((t - positive_eigen_sum(&diff)).abs());
        let rank = r.random_range(0..=dim);
        let p = Projector::from_orthonormal_basis(random_isometry(dim, rank, &mut r));
        if p.trace_with(&diff)? > t + TOL {
            proj_violations += 1;
        }

        let out = 2 + (i / 7) % 7;
        let env = dim.div_ceil(out).max(1) + r.random_range(0..2);
        let ch = random_cptp(dim, out, env, seed ^ (i as u64).wrapping_mul(0x9e37_79b9))?;
        let (pa, pb) = (random_psd(dim, &mut r), random_psd(dim, &mut r));
        let before = positive_eigen_sum(&pa.checked_sub(&pb)?);
        let after = positive_eigen_sum(&ch.apply_operator(&pa)?.checked_sub(&ch.apply_operator(&pb)?)?);
        if after > before + TOL {
            channel_violations += 1;
        }

        let rho = random_density(dim, 1 + r.random_range(0..dim), &mut r);
        let omega = random_psd(dim, &mut r);
        let gamma: f64 = r.random_range(-2.0..2.0);
        let scale = gamma.exp();
        let proj = spectral_projection(&rho.minus_scaled(scale, &omega)?, Relation::Geq, 0.0);
        if proj.trace_with(&omega)? > 1.0 / scale + TOL {
            weight_violations += 1;
        }
    }
    Ok(vec![
        Check::count("projection_bound_violations", proj_violations),
        Check::at_most("positive_part_oracle_deviation", oracle_dev, TOL),
        Check::count("channel_monotonicity_violations", channel_violations),
        Check::count("reference_weight_violations", weight_violations),
        Check::new("instances", instances as f64, instances > 0),
    ])
}

/// Type-class evaluation against dense eigendecomposition on random commuting pairs.
pub fn fastpath_equivalence(seed: u64, instances: usize) -> infospec::Result<Vec<Check>> {
    let mut worst: f64 = 0.0;
    for i in 0..instances {
        let mut r = rng(seed, 0x1000 + i as u64);
        let (d, max_n) = [(2, 6), (3, 5), (4, 4)][i % 3];
        let n = 1 + (i / 3) % max_n;
        let u = random_unitary(d, &mut r);
        let rho = DensityMatrix::diagonal(&random_distribution(d, &mut r))?.conjugate_by(&u);
        let w: Vec<f64> = (0..d).map(|_| r.random_range(0.05..1.5)).collect();
        let omega = HermitianOperator::from_real_diagonal(&w).conjugate_by(&u);
        let gamma = r.random_range(-2.0..1.5);
        let fast = product_trace_fastpath(rho.operator(), &omega, n, gamma)?;
        let dense = difference_trace(&rho.operator().tensor_power(n), &omega.tensor_power(n), n, gamma)?;
        worst = worst.max((fast - dense).abs());
    }
    Ok(vec![Check::at_most("max_abs_difference", worst, TOL), Check::new("instances", instances as f64, instances > 0)])
}

pub const ENTROPY_P: f64 = 0.25;
pub const ENTROPY_NS: [usize; 3] = [4, 8, 12];

/// Sup and inf entropy estimates of `diag(.25, .75)^{⊗n}` against the binary entropy.
pub fn entropy_convergence() -> infospec::Result<Vec<Check>> {
    let src = SourceSequence::iid_entropy(DensityMatrix::diagonal(&[ENTROPY_P, 1.0 - ENTROPY_P])?);
    let cfg = EstimatorConfig::default();
    let target = h(ENTROPY_P);
    let mut checks = Vec::new();
    let mut gaps = Vec::new();
    for &n in &ENTROPY_NS {
        checks.push(Check::new("fast_path", 1.0, src.evaluator(n)?.is_fast_path()).at(n));
        let b = spectral_entropy_estimates(&src, n, &cfg)?;
        gaps.push(b.gap());
        checks.push(Check::new("gap", b.gap(), true).at(n));
        if n == *ENTROPY_NS.last().unwrap() {
            checks.push(Check::at_most("upper_error", (b.upper - target).abs(), RATE_TOL).at(n));
            checks.push(Check::at_most("lower_error", (b.lower - target).abs(), RATE_TOL).at(n));
        }
    }
    let increases = gaps.windows(2).filter(|w| w[1] > w[0] + TOL).count();
    checks.push(Check::count("gap_increases", increases));
    Ok(checks)
}

/// Achievability, converse and strong converse for the same source at spectrum level.
pub fn compression_pincer() -> infospec::Result<Vec<Check>> {
    let rho = DensityMatrix::diagonal(&[ENTROPY_P, 1.0 - ENTROPY_P])?;
    let src = SourceSequence::iid_entropy(rho);
    let hv = h(ENTROPY_P);
    let n = 10;
    let spec = source_spectrum(&src, n)?;
    let good = spectral_scheme_at_rate(&spec, n, hv + 0.1)?;
    let best = spectral_best_case(&spec, n, hv - 0.15)?;
    let (_, bound) = tightest_converse_bound(&spec, n, hv - 0.15, &linspace(-4.0, 4.0, 401));
    let probe = strong_converse_probe(&src, hv - 0.2, &ENTROPY_NS)?;
    let increases = probe.windows(2).filter(|w| w[1].1 >= w[0].1).count();
    let last = probe.last().map_or(f64::NAN, |p| p.1);
    Ok(vec![
        Check::new("fidelity_above_entropy", good.fidelity(), good.fidelity() >= 0.9).at(n),
        Check::new("best_case_fidelity_below_entropy", best.fidelity(), best.fidelity() <= bound + TOL).at(n),
        Check::at_most("converse_bound", bound, 0.7 - f64::EPSILON).at(n),
        Check::count("strong_converse_non_decreases", increases),
        Check::at_most("strong_converse_fidelity", last, 0.2 - f64::EPSILON).at(*ENTROPY_NS.last().unwrap()),
    ])
}

/// Mixture rates at `n = 12` and projector union invariants on random instances.
pub fn mixed_source(seed: u64, instances: usize) -> infospec::Result<Vec<Check>> {
    let (ps, po, t) = (0.1, 0.4, 0.3);
    let sigma = SourceSequence::iid_entropy(DensityMatrix::diagonal(&[ps, 1.0 - ps])?);
    let omega = SourceSequence::iid_entropy(DensityMatrix::diagonal(&[po, 1.0 - po])?);
    let n = 12;
    let row = mixed_rate_estimate(&sigma, &omega, t, &[n], &EstimatorConfig::default())?[0];
    let mut rank_violations = 0;
    let mut containment: f64 = 0.0;
    let mut chain_violations = 0;
    for i in 0..instances {
        let mut r = rng(seed, 0x2000 + i as u64);
        let d = 2 + i % 3;
        let blocks = if d == 2 { 1 + (i / 3) % 3 } else { 1 };
        let s = random_density(d, d, &mut r).tensor_power(blocks);
        let o = random_density(d, d, &mut r).tensor_power(blocks);
        let alpha = r.random_range(0.2..1.6);
        let gamma = alpha + r.random_range(0.05..1.0);
        let weight = r.random_range(0.05..0.95);
        let mp = mixed_projector(&s, &o, blocks, alpha)?;
        if mp.pk.rank() > mp.p0.rank() + mp.q.rank() {
            rank_violations += 1;
        }
        containment = containment.max(max_abs(&(mp.pk.matrix() * mp.p0.matrix() - mp.p0.matrix())));
        let (lhs, rhs) = mixed_chain(&mp, &s, &o, weight, blocks, gamma, alpha)?;
        if lhs < rhs - TOL {
            chain_violations += 1;
        }
    }
    Ok(vec![
        Check::at_most("optimal_rate_error", (row.optimal_rate() - h(po)).abs(), RATE_TOL).at(n),
        Check::at_most("strong_converse_rate_error", (row.strong_converse_rate() - h(ps)).abs(), RATE_TOL).at(n),
        Check::count("rank_violations", rank_violations),
        Check::at_most("containment_deviation", containment, TOL),
        Check::count("chain_violations", chain_violations),
    ])
}

fn basis_ensemble(d: usize, priors: Vec<f64>) -> infospec::Result<CQEnsemble> {
    let states = (0..d).map(|i| DensityMatrix::basis_state(d, i)).collect::<infospec::Result<Vec<_>>>()?;
    CQEnsemble::new(priors, states)
}

/// Thresholded PGM error against its random-coding bound, the BSC capacity estimate, and the converse.
pub fn classical_coding(seed: u64) -> infospec::Result<Vec<Check>> {
    let mut bound_violations = 0;
    let mut worst_excess: f64 = f64::NEG_INFINITY;
    let instances = 200;
    for i in 0..instances {
        let mut r = rng(seed, 0x3000 + i as u64);
        let k = 2 + i % 2;
        let states: Vec<DensityMatrix> = (0..k).map(|_| random_density(2, 1 + r.random_range(0..2), &mut r)).collect();
        let ens = CQEnsemble::new(random_distribution(k, &mut r), states)?;
        let n = 1 + (i / 2) % 3;
        let gamma = r.random_range(0.0..2.5);
        let m = r.random_range(2..=4);
        let block = ens.tensor_power(n);
        let code_seed = seed.wrapping_add(i as u64);
        let error = match pgm_codebook(&block, n, m, gamma, code_seed) {
            Ok(code) => average_error(&code, &block)?,
            Err(Error::ThresholdTooHigh) => 1.0,
            Err(e) => return Err(e),
        };
        let bound = random_coding_bound(&block, n, gamma, m)?;
        worst_excess = worst_excess.max(error - bound);
        if error > bound + TOL {
            bound_violations += 1;
        }
    }

    let f = 0.1;
    let channel = KrausChannel::bit_flip(f)?;
    let n = 12;
    let cap = capacity_estimate(&[basis_ensemble(2, vec![0.5, 0.5])?], &channel, &[n], &EstimatorConfig::default())?;
    let target = std::f64::consts::LN_2 - h(f);

    let block = basis_ensemble(2, vec![0.5, 0.5])?.through(&channel)?.tensor_power(3);
    let gaps = (0..100)
        .map(|s| uniform_marginal_trial(&block, 3, 8, 0.4, seed.wrapping_add(s)).map(|t| t.error - t.bound))
        .collect::<infospec::Result<Vec<f64>>>()?;
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let sd = (gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (gaps.len() - 1) as f64).sqrt();
    let strict = gaps.iter().filter(|&&g| g < -TOL).count();

    Ok(vec![
        Check::count("pgm_bound_violations", bound_violations),
        Check::new("pgm_worst_excess", worst_excess, true),
        Check::at_most("capacity_error", (cap[0].capacity - target).abs(), RATE_TOL).at(n),
        Check::new("converse_mean_gap", mean, mean >= -3.0 * sd / (gaps.len() as f64).sqrt()),
        Check::count("converse_violations", strict),
    ])
}

fn named(name: &str) -> infospec::Result<DensityMatrix> {
    StateSpec::Named { name: name.into() }.build("preset").map_err(|e| Error::InvalidArgument(e.to_string()))
}

pub const DC_N: usize = 10;
/// The multi-copy entropy search starts from identity, replacement, then random isometries.
pub const FORMULA_RESTARTS: usize = 4;

/// Twirl identity, Bell-pair capacity, the Bell protocol, and agreement with the multi-copy entropy formula.
pub fn dense_coding(seed: u64) -> infospec::Result<Vec<Check>> {
    let mut twirl_dev: f64 = 0.0;
    for d in 2..=4 {
        for db in 1..=3 {
            let mut r = rng(seed, 0x4000 + (d * 10 + db) as u64);
            let shape = SubsystemShape::bipartite(d, db)?;
            let rho = random_density(d * db, d * db, &mut r);
            let tw = weyl_twirl(&rho, &shape)?;
            let expected = DensityMatrix::maximally_mixed(d).tensor(&rho.partial_trace(&shape, &[1])?);
            twirl_dev = twirl_dev.max(max_abs(&(tw.matrix() - expected.matrix())));
        }
    }
    let mut checks = vec![Check::at_most("twirl_deviation", twirl_dev, TOL)];

    let shape = SubsystemShape::bipartite(2, 2)?;
    let opts = MinimizerOptions { restarts: 16, seed, ..Default::default() };
    let formula_opts = MinimizerOptions { restarts: FORMULA_RESTARTS, ..opts };
    let cfg = EstimatorConfig::default();
    let bell = named("bell")?;
    let sim = dc_simulate(&bell, &shape, &KrausChannel::identity(2), 1, 4, 0.5, seed)?;
    checks.push(Check::at_most("bell_protocol_error", sim.error, TOL).at(1));

    for name in NAMED_STATES {
        let rho = named(name)?;
        let row = dc_capacity_estimate(&rho, &shape, &[DC_N], &opts, &cfg)?.remove(0);
        if *name == "bell" {
            let err = (row.capacity - 2.0 * std::f64::consts::LN_2).abs();
            checks.push(Check::at_most("bell_capacity_error", err, RATE_TOL).at(DC_N));
        }
        for copies in [1, 2] {
            let formula = copy_formula_capacity(&rho, &shape, copies, &formula_opts)?;
            let metric = format!("{name}_single_letter_gap_{copies}");
            checks.push(Check::at_most(metric, (row.capacity - formula.capacity).abs(), RATE_TOL).at(DC_N));
        }
        if *name == "plus-minus-mix" {
            let gain = row.search.identity_value - row.search.value;
            checks.push(Check::at_most("identity_optimality_gain", gain, RATE_TOL).at(DC_N));
        }
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_operator_suite_passes() {
        let checks = operator_inequalities(1, 30).unwrap();
        assert!(checks.iter().all(|c| c.passed), "{checks:?}");
    }

    #[test]
    fn small_fastpath_suite_passes() {
        let checks = fastpath_equivalence(1, 12).unwrap();
        assert!(checks.iter().all(|c| c.passed), "{checks:?}");
    }

    #[test]
    fn unknown_suite_reports_error() {
        let rep = run_suite("nope", 0);
        assert!(!rep.passed());
        assert!(rep.summary_line().starts_with("FAIL nope"));
        assert!(rep.rows("verify", 0).last().unwrap().is_error());
    }

    #[test]
    fn summary_lists_failed_checks() {
        let rep = SuiteReport {
            suite: "s".into(),
            checks: vec![Check::at_most("a", 0.5, 0.1).at(3), Check::count("b", 0)],
            error: None,
        };
        assert_eq!(rep.summary_line(), "FAIL s (1/2 checks) failed: a[n=3]=0.5000");
        let rows = rep.rows("verify", 9);
        assert_eq!(rows.len(), 3);
        assert!(rows[0].is_failure());
        assert!(rows[2].is_failure());
    }
}
