//! Blind projective compression of a source and its fidelity bounds.
//!
//! The encoder keeps the compression subspace and sends everything else to a
//! fixed vector `χ0` inside it; the decoder is the identity embedding. The
//! entanglement fidelity of that pair has the closed form
//! `(Tr Pρ)² + ⟨χ0|ρ(I-P)ρ|χ0⟩`, which for spectral projectors collapses to
//! the squared kept mass and lets large blocks be handled from the spectrum.

use rayon::prelude::*;

use crate::channel::{compose, entanglement_fidelity, KrausChannel};
use crate::error::{Error, Result};
use crate::operator::{
    c, select_columns, spectral_projection, DensityMatrix, HermitianOperator, Matrix, Projector, Relation, Vector,
};
use crate::random::orthonormalize_columns;
use crate::spectrum::{EstimatorConfig, JointSpectrum, RateBounds, SourceSequence};

/// Norm below which a candidate direction counts as already spanned.
pub const GRAM_SCHMIDT_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct CompressionScheme {
    n: usize,
    projector: Projector,
    chi0: Vector,
    encoder: KrausChannel,
    decoder: KrausChannel,
}

impl CompressionScheme {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn projector(&self) -> &Projector {
        &self.projector
    }

    pub fn chi0(&self) -> &Vector {
        &self.chi0
    }

    pub fn encoder(&self) -> &KrausChannel {
        &self.encoder
    }

    pub fn decoder(&self) -> &KrausChannel {
        &self.decoder
    }

    /// `M_n = Tr P_n`.
    pub fn compressed_dim(&self) -> usize {
        self.projector.rank()
    }

    pub fn channel(&self) -> Result<KrausChannel> {
        compose(&self.decoder, &self.encoder)
    }
}

/// Scheme around an arbitrary nonzero projector; `χ0` is the top eigenvector of `PρP`.
pub fn scheme_from_projector(rho: &DensityMatrix, n: usize, projector: Projector) -> Result<CompressionScheme> {
    if projector.dim() != rho.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), found: projector.dim() });
    }
    if projector.rank() == 0 {
        return Err(Error::EmptyProjector);
    }
    let b = projector.basis();
    let compressed = HermitianOperator::from_matrix_unchecked(b.adjoint() * rho.matrix() * b).eig();
    let top = compressed.values.len() - 1;
    let chi0: Vector = b * compressed.vector(top);
    let d = rho.dim();
    let complement = projector.complement_basis();
    let mut kraus = Vec::with_capacity(1 + complement.ncols());
    kraus.push(projector.matrix().clone());
    for k in 0..complement.ncols() {
        kraus.push(&chi0 * complement.column(k).adjoint());
    }
    let encoder = KrausChannel::new(kraus)?;
    Ok(CompressionScheme { n, projector, chi0, encoder, decoder: KrausChannel::identity(d) })
}

/// `P_n = {ρ_n ≥ e^{-nγ} I}`.
pub fn build_scheme(rho: &DensityMatrix, n: usize, gamma: f64) -> Result<CompressionScheme> {
    let threshold = (-(n as f64) * gamma).exp();
    scheme_from_projector(rho, n, spectral_projection(rho, Relation::Geq, threshold))
}

/// Largest spectral projector `{ρ_n ≥ c I}` whose rank is at most `⌊e^{nR}⌋`.
pub fn build_scheme_at_rate(rho: &DensityMatrix, n: usize, rate: f64) -> Result<CompressionScheme> {
    let e = rho.eig();
    let budget = rate_budget(n, rate);
    let mut cols = Vec::new();
    let mut i = e.values.len();
    while i > 0 {
        let top = e.values[i - 1];
        let mut j = i - 1;
        while j > 0 && (e.values[j - 1] - top).abs() <= 1e-12 * top.abs().max(1e-300) {
            j -= 1;
        }
        if (cols.len() + (i - j)) as f64 > budget {
            break;
        }
        cols.extend(j..i);
        i = j;
    }
    scheme_from_projector(rho, n, Projector::from_orthonormal_basis(select_columns(&e.vectors, &cols)))
}

/// Projector onto the top `⌊e^{nR}⌋` eigenvectors (capped at `d`).
pub fn best_case_scheme(rho: &DensityMatrix, n: usize, rate: f64) -> Result<CompressionScheme> {
    let e = rho.eig();
    let d = e.values.len();
    let m = (rate_budget(n, rate).min(d as f64)) as usize;
    let cols: Vec<usize> = (d - m..d).collect();
    scheme_from_projector(rho, n, Projector::from_orthonormal_basis(select_columns(&e.vectors, &cols)))
}

fn rate_budget(n: usize, rate: f64) -> f64 {
    ((n as f64) * rate).exp().floor()
}

/// `F(ρ, D∘C)` through the composed Kraus channel.
pub fn scheme_fidelity(rho: &DensityMatrix, scheme: &CompressionScheme) -> Result<f64> {
    entanglement_fidelity(rho, &scheme.channel()?)
}

/// `(Tr Pρ)² + ⟨χ0|ρ(I-P)ρ|χ0⟩` without forming the channel.
pub fn closed_form_fidelity(rho: &DensityMatrix, projector: &Projector, chi0: &Vector) -> f64 {
    let kept = projector.trace_with(rho).unwrap_or(f64::NAN);
    let r_chi = rho.matrix() * chi0;
    let leaked = &r_chi - projector.matrix() * &r_chi;
    kept * kept + leaked.norm_squared()
}

/// `Tr[{ρ ≥ e^{-nγ}I}(ρ - e^{-nγ}I)]` from a state spectrum.
fn entropy_trace(spectrum: &[(f64, f64)], n: usize, gamma: f64) -> f64 {
    let threshold = (-(n as f64) * gamma).exp();
    spectrum
        .iter()
        .filter(|(v, _)| Relation::Geq.holds(*v, threshold))
        .map(|(v, m)| m * (v - threshold).max(0.0))
        .sum()
}

/// Lower bound `T²` on the fidelity of `build_scheme(ρ, n, γ)`.
pub fn achievability_bound(rho: &DensityMatrix, n: usize, gamma: f64) -> f64 {
    let t = entropy_trace(&dense_spectrum(rho), n, gamma);
    t * t
}

/// Upper bound `T(γ) + e^{-n(γ-R)}` on every scheme of rank at most `e^{nR}`.
pub fn converse_fidelity_bound(rho: &DensityMatrix, n: usize, rate: f64, gamma: f64) -> f64 {
    spectral_converse_bound(&dense_spectrum(rho), n, rate, gamma)
}

fn dense_spectrum(rho: &DensityMatrix) -> Vec<(f64, f64)> {
    rho.eigenvalues().into_iter().rev().map(|v| (v, 1.0)).collect()
}

// ---------------------------------------------------------------------------
// Spectrum-only evaluation

/// Eigenvalues of `ρ_n` as `(value, multiplicity)`, largest first, merging equal values.
pub fn source_spectrum(src: &SourceSequence, n: usize) -> Result<Vec<(f64, f64)>> {
    let raw = match src.joint_spectrum(n)? {
        Some(j) => j.state_eigenvalues(),
        None => dense_spectrum(&src.materialize(n)?.0),
    };
    Ok(merge_spectrum(raw))
}

pub fn joint_state_spectrum(j: &JointSpectrum) -> Vec<(f64, f64)> {
    merge_spectrum(j.state_eigenvalues())
}

fn merge_spectrum(mut raw: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    raw.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
    for (v, m) in raw {
        match out.last_mut() {
            Some(last) if (last.0 - v).abs() <= 1e-12 * v.abs().max(1e-300) => last.1 += m,
            _ => out.push((v, m)),
        }
    }
    out
}

/// Rank and fidelity of a spectral scheme; `χ0` is an eigenvector so `F = (kept mass)²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralScheme {
    pub n: usize,
    pub rank: f64,
    pub kept_mass: f64,
}

impl SpectralScheme {
    pub fn fidelity(&self) -> f64 {
        self.kept_mass * self.kept_mass
    }
}

/// Spectral analogue of [`build_scheme`].
pub fn spectral_scheme(spectrum: &[(f64, f64)], n: usize, gamma: f64) -> Result<SpectralScheme> {
    let threshold = (-(n as f64) * gamma).exp();
    let (rank, kept_mass) = spectrum
        .iter()
        .filter(|(v, _)| Relation::Geq.holds(*v, threshold))
        .fold((0.0, 0.0), |(r, k), (v, m)| (r + m, k + v * m));
    if rank == 0.0 {
        return Err(Error::EmptyProjector);
    }
    Ok(SpectralScheme { n, rank, kept_mass })
}

/// Spectral analogue of [`build_scheme_at_rate`]: whole eigenvalue groups only.
pub fn spectral_scheme_at_rate(spectrum: &[(f64, f64)], n: usize, rate: f64) -> Result<SpectralScheme> {
    let budget = rate_budget(n, rate);
    let mut rank = 0.0;
    let mut kept_mass = 0.0;
    for &(v, m) in spectrum {
        if rank + m > budget {
            break;
        }
        rank += m;
        kept_mass += v * m;
    }
    if rank == 0.0 {
        return Err(Error::EmptyProjector);
    }
    Ok(SpectralScheme { n, rank, kept_mass })
}

/// Spectral analogue of [`best_case_scheme`]: top `⌊e^{nR}⌋` eigenvalues, splitting groups.
pub fn spectral_best_case(spectrum: &[(f64, f64)], n: usize, rate: f64) -> Result<SpectralScheme> {
    let budget = rate_budget(n, rate);
    let mut rank = 0.0;
    let mut kept_mass = 0.0;
    for &(v, m) in spectrum {
        let take = m.min(budget - rank);
        if take <= 0.0 {
            break;
        }
        rank += take;
        kept_mass += v * take;
    }
    if rank == 0.0 {
        return Err(Error::EmptyProjector);
    }
    Ok(SpectralScheme { n, rank, kept_mass })
}

pub fn spectral_achievability_bound(spectrum: &[(f64, f64)], n: usize, gamma: f64) -> f64 {
    let t = entropy_trace(spectrum, n, gamma);
    t * t
}

pub fn spectral_converse_bound(spectrum: &[(f64, f64)], n: usize, rate: f64, gamma: f64) -> f64 {
    entropy_trace(spectrum, n, gamma) + (-(n as f64) * (gamma - rate)).exp()
}

/// Smallest converse bound over the supplied `γ` values, with its minimizer.
pub fn tightest_converse_bound(spectrum: &[(f64, f64)], n: usize, rate: f64, gammas: &[f64]) -> (f64, f64) {
    gammas
        .iter()
        .map(|&g| (g, spectral_converse_bound(spectrum, n, rate, g)))
        .fold((f64::NAN, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

/// Best-case fidelity at a fixed rate across a sweep of block lengths.
pub fn strong_converse_probe(src: &SourceSequence, rate: f64, ns: &[usize]) -> Result<Vec<(usize, f64)>> {
    ns.par_iter()
        .map(|&n| {
            let spectrum = source_spectrum(src, n)?;
            Ok((n, spectral_best_case(&spectrum, n, rate)?.fidelity()))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Mixed sources

/// Union of the two components' compression subspaces.
#[derive(Clone, Debug)]
pub struct MixedSourceProjector {
    /// `{σ_n ≥ e^{-nα} I}`.
    pub p0: Projector,
    /// `{ω_n ≥ e^{-nα} I}`.
    pub q: Projector,
    /// `P0` extended by the independent parts of `Q`'s eigenvectors.
    pub pk: Projector,
    /// Number of `Q` directions that were adjoined.
    pub adjoined: usize,
}

/// Extends `P0`'s basis one `Q` eigenvector at a time, keeping orthogonal residues above [`GRAM_SCHMIDT_TOL`].
pub fn mixed_projector(sigma: &DensityMatrix, omega: &DensityMatrix, n: usize, alpha: f64) -> Result<MixedSourceProjector> {
    if sigma.dim() != omega.dim() {
        return Err(Error::DimensionMismatch { expected: sigma.dim(), found: omega.dim() });
    }
    let threshold = (-(n as f64) * alpha).exp();
    let p0 = spectral_projection(sigma, Relation::Geq, threshold);
    let q = spectral_projection(omega, Relation::Geq, threshold);
    let d = sigma.dim();
    let mut basis: Vec<Vector> = (0..p0.rank()).map(|k| p0.basis().column(k).into_owned()).collect();
    let mut adjoined = 0;
    for k in 0..q.rank() {
        let mut v: Vector = q.basis().column(k).into_owned();
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dotc(&v);
                v -= b * proj;
            }
        }
        let norm = v.norm();
        if norm > GRAM_SCHMIDT_TOL {
            basis.push(v / c(norm));
            adjoined += 1;
        }
    }
    let mut m = Matrix::zeros(d, basis.len());
    for (k, b) in basis.iter().enumerate() {
        m.set_column(k, b);
    }
    let m = orthonormalize_columns(&m).unwrap_or(m);
    Ok(MixedSourceProjector { p0, q, pk: Projector::from_orthonormal_basis(m), adjoined })
}

/// Both sides of the mixed-source chain for `ρ = tσ + (1-t)ω`:
/// `Tr[P_K(ρ - e^{-nγ}I)]` and `t·Tr[P0 σ] + (1-t)·Tr[Q ω] - 2e^{-n(γ-α)}`.
pub fn mixed_chain(
    proj: &MixedSourceProjector,
    sigma: &DensityMatrix,
    omega: &DensityMatrix,
    t: f64,
    n: usize,
    gamma: f64,
    alpha: f64,
) -> Result<(f64, f64)> {
    let rho = DensityMatrix::mixture(t, sigma, omega)?;
    let shift = (-(n as f64) * gamma).exp();
    let lhs = proj.pk.trace_with(&rho)? - shift * proj.pk.rank() as f64;
    let rhs = t * proj.p0.trace_with(sigma)? + (1.0 - t) * proj.q.trace_with(omega)?
        - 2.0 * (-(n as f64) * (gamma - alpha)).exp();
    Ok((lhs, rhs))
}

/// Spectral rates of a mixture and of its parts at one block length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixedRateRow {
    pub n: usize,
    pub mixture: RateBounds,
    pub sigma: RateBounds,
    pub omega: RateBounds,
}

impl MixedRateRow {
    /// `R̂ = S̄` of the mixture.
    pub fn optimal_rate(&self) -> f64 {
        self.mixture.upper
    }

    /// `R̂* = S̲` of the mixture.
    pub fn strong_converse_rate(&self) -> f64 {
        self.mixture.lower
    }

    pub fn component_max_upper(&self) -> f64 {
        self.sigma.upper.max(self.omega.upper)
    }

    pub fn component_min_lower(&self) -> f64 {
        self.sigma.lower.min(self.omega.lower)
    }
}

/// Rates of `tσ + (1-t)ω` and its components over an `n` sweep.
pub fn mixed_rate_estimate(
    sigma: &SourceSequence,
    omega: &SourceSequence,
    t: f64,
    ns: &[usize],
    cfg: &EstimatorConfig,
) -> Result<Vec<MixedRateRow>> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidArgument(format!("mixing weight {t} outside (0, 1)")));
    }
    let mixture = SourceSequence::mixed(t, sigma.clone(), omega.clone())?;
    ns.par_iter()
        .map(|&n| {
            use crate::spectrum::spectral_entropy_estimates as est;
            Ok(MixedRateRow { n, mixture: est(&mixture, n, cfg)?, sigma: est(sigma, n, cfg)?, omega: est(omega, n, cfg)? })
        })
        .collect()
}
