//! Sweep orchestration.
//!
//! A config expands into independent work items. Items run on a rayon pool
//! and each returns its own rows; the merged table is sorted, so the output
//! does not depend on scheduling.

use infospec::capacity::{average_error, code_converse_bound, capacity_estimate, random_coding_bound, pgm_codebook, CQEnsemble};
use infospec::compression::{
    mixed_rate_estimate, source_spectrum, spectral_best_case, spectral_scheme_at_rate, tightest_converse_bound,
};
use infospec::dense_coding::{dc_capacity_estimate, dc_simulate, copy_formula_capacity, MinimizerOptions};
use infospec::spectrum::{divergence_estimates, linspace, spectral_entropy_estimates};
use infospec::{DensityMatrix, Error, KrausChannel, SourceSequence, SubsystemShape};
use rayon::prelude::*;

use crate::config::{ConfigError, ExperimentConfig, ExperimentKind, SimulateSection};
use crate::table::{sort_rows, ResultRow};
use crate::verify::run_suite;

type Rows = Vec<ResultRow>;
type Job<'a> = Box<dyn Fn() -> Rows + Send + Sync + 'a>;

/// Runs on a dedicated pool of `workers` threads (`None`: available parallelism).
pub fn run_with_workers(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<Rows, ConfigError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder.build().map_err(|e| ConfigError::Invalid { field: "workers".into(), message: e.to_string() })?;
    pool.install(|| run(cfg))
}

/// Rows sorted by `(n, γ, seed)`. Numerical failures become error rows.
pub fn run(cfg: &ExperimentConfig) -> Result<Rows, ConfigError> {
    cfg.validate()?;
    let jobs = jobs(cfg)?;
    let mut rows: Rows = jobs.par_iter().flat_map_iter(|job| job()).collect();
    sort_rows(&mut rows);
    Ok(rows)
}

fn or_error(id: &str, metric: &str, result: infospec::Result<Rows>, tag: impl Fn(ResultRow) -> ResultRow) -> Rows {
    match result {
        Ok(rows) => rows,
        Err(e) => vec![tag(ResultRow::error(id, metric, e))],
    }
}

fn jobs(cfg: &ExperimentConfig) -> Result<Vec<Job<'_>>, ConfigError> {
    let id = cfg.id();
    let est = cfg.estimator.to_config();
    let mut jobs: Vec<Job<'_>> = Vec::new();
    match cfg.experiment {
        ExperimentKind::Spectrum => {
            let s = cfg.spectrum.as_ref().expect("validated");
            let rho = s.source.build("spectrum.source")?;
            let reference = s.reference_operator(rho.dim())?;
            let params = s.source.label();
            let src = match &reference {
                None => SourceSequence::iid_entropy(rho.clone()),
                Some(w) => SourceSequence::iid(rho.clone(), w.clone())
                    .map_err(|e| ConfigError::Invalid { field: "spectrum.reference".into(), message: e.to_string() })?,
            };
            let entropy = reference.is_none();
            let grid = (s.curve_points >= 2).then(|| linspace(est.window.0, est.window.1, s.curve_points));
            for &n in &cfg.ns {
                let (id, params, src, rho, grid) = (id.clone(), params.clone(), src.clone(), rho.clone(), grid.clone());
                jobs.push(Box::new(move || {
                    let tag = |r: ResultRow| r.n(n).params(params.clone());
                    let result = (|| {
                        let mut rows = Vec::new();
                        let row = |m: &str, v: f64| tag(ResultRow::new(&id, m, v));
                        rows.push(row("fast_path", f64::from(u8::from(src.evaluator(n)?.is_fast_path()))));
                        if entropy {
                            let b = spectral_entropy_estimates(&src, n, &est)?;
                            rows.push(row("entropy_upper", b.upper));
                            rows.push(row("entropy_lower", b.lower));
                            rows.push(row("gap", b.gap()));
                            rows.push(row("von_neumann_rate", rho.von_neumann_entropy()));
                        } else {
                            let b = divergence_estimates(&src, n, &est)?;
                            rows.push(row("divergence_upper", b.upper));
                            rows.push(row("divergence_lower", b.lower));
                            rows.push(row("gap", b.gap()));
                        }
                        if let Some(g) = &grid {
                            let curve = src.curve(n, g)?;
                            for p in &curve.samples {
                                rows.push(row("excess", p.excess).gamma(p.gamma));
                                rows.push(row("mass", p.mass).gamma(p.gamma));
                            }
                        }
                        Ok(rows)
                    })();
                    or_error(&id, "spectrum", result, tag)
                }));
            }
        }
        ExperimentKind::Compress => {
            let s = cfg.compress.as_ref().expect("validated");
            let rho = s.source.build("compress.source")?;
            let entropy = rho.von_neumann_entropy();
            let src = SourceSequence::iid_entropy(rho);
            let gammas = linspace(est.window.0, est.window.1, s.converse_points);
            for &n in &cfg.ns {
                let (id, src, gammas, label) = (id.clone(), src.clone(), gammas.clone(), s.source.label());
                let offsets = s.rate_offsets.clone();
                jobs.push(Box::new(move || {
                    let spec = match source_spectrum(&src, n) {
                        Ok(s) => s,
                        Err(e) => return vec![ResultRow::error(&id, "spectrum", e).n(n).params(label.clone())],
                    };
                    let mut rows = Vec::new();
                    for &off in &offsets {
                        let rate = entropy + off;
                        let params = format!("{label};rate_offset={off}");
                        let tag = |r: ResultRow| r.n(n).gamma(rate).params(params.clone());
                        let result = (|| {
                            let row = |m: &str, v: f64| tag(ResultRow::new(&id, m, v));
                            let scheme = spectral_scheme_at_rate(&spec, n, rate)?;
                            let best = spectral_best_case(&spec, n, rate)?;
                            let (g, bound) = tightest_converse_bound(&spec, n, rate, &gammas);
                            Ok(vec![
                                row("fidelity", scheme.fidelity()),
                                row("rank", scheme.rank as f64),
                                row("best_case_fidelity", best.fidelity()),
                                row("converse_bound", bound),
                                row("converse_gamma", g),
                            ])
                        })();
                        rows.extend(or_error(&id, "compress", result, tag));
                    }
                    rows
                }));
            }
        }
        ExperimentKind::Mixed => {
            let s = cfg.mixed.as_ref().expect("validated");
            let sigma = SourceSequence::iid_entropy(s.sigma.build("mixed.sigma")?);
            let omega = SourceSequence::iid_entropy(s.omega.build("mixed.omega")?);
            let t = s.t;
            let params = format!("sigma={};omega={};t={t}", s.sigma.label(), s.omega.label());
            for &n in &cfg.ns {
                let (id, sigma, omega, params) = (id.clone(), sigma.clone(), omega.clone(), params.clone());
                jobs.push(Box::new(move || {
                    let tag = |r: ResultRow| r.n(n).params(params.clone());
                    let result = mixed_rate_estimate(&sigma, &omega, t, &[n], &est).map(|rows| {
                        let r = rows[0];
                        let row = |m: &str, v: f64| tag(ResultRow::new(&id, m, v));
                        vec![
                            row("optimal_rate", r.optimal_rate()),
                            row("strong_converse_rate", r.strong_converse_rate()),
                            row("sigma_upper", r.sigma.upper),
                            row("sigma_lower", r.sigma.lower),
                            row("omega_upper", r.omega.upper),
                            row("omega_lower", r.omega.lower),
                            row("component_max_upper", r.component_max_upper()),
                            row("component_min_lower", r.component_min_lower()),
                        ]
                    });
                    or_error(&id, "mixed", result, tag)
                }));
            }
        }
        ExperimentKind::Capacity => {
            let s = cfg.capacity.as_ref().expect("validated");
            let channel = s.channel.build("capacity.channel")?;
            let candidates = s
                .priors
                .iter()
                .map(|p| basis_ensemble(p.clone()))
                .collect::<infospec::Result<Vec<_>>>()
                .map_err(|e| ConfigError::Invalid { field: "capacity.priors".into(), message: e.to_string() })?;
            let label = s.channel.label();
            for &n in &cfg.ns {
                let (id, channel, candidates, label) = (id.clone(), channel.clone(), candidates.clone(), label.clone());
                jobs.push(Box::new(move || {
                    let tag = |r: ResultRow| r.n(n).params(label.clone());
                    let result = capacity_estimate(&candidates, &channel, &[n], &est).map(|rows| {
                        let r = &rows[0];
                        let row = |m: &str, v: f64| tag(ResultRow::new(&id, m, v));
                        let mut out = vec![row("capacity", r.capacity), row("best_candidate", r.best_candidate as f64)];
                        for (k, c) in r.candidates.iter().enumerate() {
                            out.push(row(&format!("candidate_{k}_lower"), c.lower));
                            out.push(row(&format!("candidate_{k}_upper"), c.upper));
                        }
                        out
                    });
                    or_error(&id, "capacity", result, tag)
                }));
            }
            if let Some(sim) = &s.simulate {
                let block = candidates[0].through(&channel).map(|e| e.tensor_power(sim.n));
                for &seed in &cfg.seeds {
                    let (id, label, block) = (id.clone(), s.channel.label(), block.clone());
                    jobs.push(Box::new(move || capacity_simulation(&id, &label, block.clone(), sim, seed)));
                }
            }
        }
        ExperimentKind::Densecode => {
            let s = cfg.densecode.as_ref().expect("validated");
            let rho = s.state.build("densecode.state")?;
            let shape = SubsystemShape::bipartite(s.shape[0], s.shape[1])
                .map_err(|e| ConfigError::Invalid { field: "densecode.shape".into(), message: e.to_string() })?;
            let label = s.state.label();
            for &seed in &cfg.seeds {
                let opts = MinimizerOptions { restarts: s.restarts, seed, ..Default::default() };
                let formula_opts = MinimizerOptions { restarts: s.formula_restarts.unwrap_or(s.restarts), ..opts };
                for &n in &cfg.ns {
                    let (id, rho, shape, label) = (id.clone(), rho.clone(), shape.clone(), label.clone());
                    jobs.push(Box::new(move || {
                        let tag = |r: ResultRow| r.n(n).seed(seed).params(label.clone());
                        let result = dc_capacity_estimate(&rho, &shape, &[n], &opts, &est).map(|rows| {
                            let r = &rows[0];
                            let row = |m: &str, v: f64| tag(ResultRow::new(&id, m, v));
                            vec![
                                row("capacity", r.capacity),
                                row("identity_capacity", r.identity_capacity),
                                row("min_conditional_entropy", r.min_conditional),
                                row("best_restart", r.search.best_restart as f64),
                            ]
                        });
                        or_error(&id, "densecode", result, tag)
                    }));
                }
                for &copies in &s.formula_copies {
                    let (id, rho, shape, label) = (id.clone(), rho.clone(), shape.clone(), label.clone());
                    jobs.push(Box::new(move || {
                        let tag = |r: ResultRow| r.n(copies).seed(seed).params(format!("{label};copies={copies}"));
                        let result = copy_formula_capacity(&rho, &shape, copies, &formula_opts).map(|h| {
                            vec![
                                tag(ResultRow::new(&id, "single_letter_capacity", h.capacity)),
                                tag(ResultRow::new(&id, "min_entropy_rate", h.min_entropy_rate)),
                            ]
                        });
                        or_error(&id, "single_letter", result, tag)
                    }));
                }
                if let Some(sim) = &s.simulate {
                    let (id, rho, shape, label) = (id.clone(), rho.clone(), shape.clone(), label.clone());
                    jobs.push(Box::new(move || {
                        let tag = |r: ResultRow| r.n(sim.n).gamma(sim.gamma).seed(seed).params(format!("{label};m={}", sim.m));
                        let lambda = KrausChannel::identity(shape.factors()[0]);
                        let result = dc_simulate(&rho, &shape, &lambda, sim.n, sim.m, sim.gamma, seed).map(|d| {
                            vec![
                                tag(ResultRow::new(&id, "protocol_error", d.error)),
                                tag(ResultRow::new(&id, "protocol_bound", d.random_coding_bound)),
                            ]
                        });
                        or_error(&id, "protocol", result, tag)
                    }));
                }
            }
        }
        ExperimentKind::Verify => {
            let s = cfg.verify.as_ref().expect("validated");
            for &seed in &cfg.seeds {
                for suite in &s.suites {
                    let id = id.clone();
                    jobs.push(Box::new(move || run_suite(suite, seed).rows(&id, seed)));
                }
            }
        }
    }
    Ok(jobs)
}

fn basis_ensemble(priors: Vec<f64>) -> infospec::Result<CQEnsemble> {
    let d = priors.len();
    let states = (0..d).map(|i| DensityMatrix::basis_state(d, i)).collect::<infospec::Result<Vec<_>>>()?;
    CQEnsemble::new(priors, states)
}

fn capacity_simulation(id: &str, label: &str, block: infospec::Result<CQEnsemble>, sim: &SimulateSection, seed: u64) -> Rows {
    let tag = |r: ResultRow| r.n(sim.n).gamma(sim.gamma).seed(seed).params(format!("{label};m={}", sim.m));
    let result = (|| {
        let block = block?;
        let bound = random_coding_bound(&block, sim.n, sim.gamma, sim.m)?;
        let (error, converse) = match pgm_codebook(&block, sim.n, sim.m, sim.gamma, seed) {
            Ok(code) => {
                let states: Vec<&DensityMatrix> = code.codewords.iter().map(|&x| &block.states()[x]).collect();
                (average_error(&code, &block)?, code_converse_bound(&states, sim.n, sim.gamma)?)
            }
            Err(Error::ThresholdTooHigh) => (1.0, f64::NAN),
            Err(e) => return Err(e),
        };
        let mut rows = vec![
            tag(ResultRow::new(id, "pgm_error", error)),
            tag(ResultRow::new(id, "random_coding_bound", bound)),
        ];
        if converse.is_finite() {
            rows.push(tag(ResultRow::new(id, "code_converse_bound", converse)));
        }
        Ok(rows)
    })();
    or_error(id, "simulate", result, tag)
}

/// True when any row is a failed verification.
pub fn has_failures(rows: &[ResultRow]) -> bool {
    rows.iter().any(ResultRow::is_failure)
}
