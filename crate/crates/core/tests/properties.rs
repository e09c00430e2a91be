use infospec::capacity::pretty_good_measurement;
use infospec::channel::random_cptp;
use infospec::compression::{closed_form_fidelity, scheme_fidelity, scheme_from_projector};
use infospec::dense_coding::weyl_twirl;
use infospec::operator::{max_abs, partial_trace, positive_part, spectral_projection, Relation};
use infospec::random::{random_density, random_hermitian, random_psd, random_unit_vector, rng};
use infospec::spectrum::{difference_trace, product_trace_fastpath, spectral_point};
use infospec::{DensityMatrix, HermitianOperator, Matrix, Projector, SubsystemShape};
use proptest::prelude::*;

const TOL: f64 = 1e-9;

fn positive_eigen_sum(h: &HermitianOperator) -> f64 {
    h.eigenvalues().into_iter().filter(|&x| x > 0.0).sum()
}

fn random_projector(dim: usize, rank: usize, seed: u64) -> Projector {
    let mut r = rng(seed, 1);
    let basis = infospec::random::random_isometry(dim, rank, &mut r);
    Projector::from_orthonormal_basis(basis)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn positive_projection_maximizes_trace(dim in 2usize..=8, rank_frac in 0.0f64..1.0, seed in any::<u64>()) {
        let mut r = rng(seed, 0);
        let a = random_hermitian(dim, &mut r);
        let b = random_hermitian(dim, &mut r);
        let diff = a.checked_sub(&b).unwrap();
        let rhs = positive_part(&diff, &HermitianOperator::identity(dim)).unwrap().excess;
        prop_assert!((rhs - positive_eigen_sum(&diff)).abs() < TOL);
        let rank = ((dim as f64) * rank_frac) as usize;
        let p = random_projector(dim, rank, seed);
        prop_assert!(p.trace_with(&diff).unwrap() <= rhs + TOL);
        let c = infospec::random::random_contraction(dim, &mut r);
        prop_assert!(c.trace_with(&diff).unwrap() <= rhs + TOL);
    }

    #[test]
    fn channels_do_not_increase_positive_part(din in 2usize..=4, dout in 2usize..=4, env in 1usize..=3, seed in any::<u64>()) {
        prop_assume!(dout * env >= din);
        let mut r = rng(seed, 0);
        let a = random_psd(din, &mut r);
        let b = random_psd(din, &mut r);
        let ch = random_cptp(din, dout, env, seed).unwrap();
        let before = positive_eigen_sum(&a.checked_sub(&b).unwrap());
        let after = positive_eigen_sum(&ch.apply_operator(&a).unwrap().checked_sub(&ch.apply_operator(&b).unwrap()).unwrap());
        prop_assert!(after <= before + TOL);
    }

    #[test]
    fn reference_weight_on_positive_projection(dim in 2usize..=4, n in 1usize..=2, gamma in -2.0f64..2.0, seed in any::<u64>()) {
        let mut r = rng(seed, 0);
        let rho = random_density(dim, dim, &mut r).tensor_power(n);
        let omega = random_psd(dim, &mut r).tensor_power(n);
        let scale = (n as f64 * gamma).exp();
        let diff = rho.minus_scaled(scale, &omega).unwrap();
        let p = spectral_projection(&diff, Relation::Geq, 0.0);
        let w = p.trace_with(&omega).unwrap();
        prop_assert!(w <= p.trace_with(&rho).unwrap() / scale + TOL);
        prop_assert!(w <= 1.0 / scale + TOL);
    }

    #[test]
    fn partial_trace_is_linear(da in 1usize..=3, db in 1usize..=3, s in -2.0f64..2.0, seed in any::<u64>()) {
        let mut r = rng(seed, 0);
        let shape = SubsystemShape::bipartite(da, db).unwrap();
        let x = random_hermitian(da * db, &mut r);
        let y = random_hermitian(da * db, &mut r);
        let combo: Matrix = x.matrix() + y.matrix() * infospec::C64::new(s, 0.0);
        for keep in [[0usize], [1usize]] {
            let lhs = partial_trace(&combo, &shape, &keep).unwrap();
            let rhs = partial_trace(x.matrix(), &shape, &keep).unwrap()
                + partial_trace(y.matrix(), &shape, &keep).unwrap() * infospec::C64::new(s, 0.0);
            prop_assert!(max_abs(&(lhs - rhs)) < TOL);
        }
    }

    #[test]
    fn excess_is_nonincreasing_and_bounded(dim in 2usize..=4, n in 1usize..=3, seed in any::<u64>()) {
        let mut r = rng(seed, 0);
        let rho = random_density(dim, dim, &mut r);
        let omega = random_psd(dim, &mut r);
        let (rho_n, omega_n) = (rho.operator().tensor_power(n), omega.tensor_power(n));
        let mut prev = f64::INFINITY;
        for k in 0..24 {
            let gamma = -3.0 + 0.25 * k as f64;
            let pt = spectral_point(&rho_n, &omega_n, n, gamma).unwrap();
            prop_assert!(pt.excess <= prev + TOL);
            prop_assert!(pt.excess >= -TOL && pt.excess <= 1.0 + TOL);
            prop_assert!(pt.excess <= pt.mass + TOL);
            prev = pt.excess;
        }
    }

    #[test]
    fn fastpath_matches_dense(dim in 2usize..=3, n in 1usize..=4, gamma in -2.0f64..2.0, seed in any::<u64>()) {
        let mut r = rng(seed, 0);
        let p: Vec<f64> = infospec::random::random_distribution(dim, &mut r);
        let q: Vec<f64> = (0..dim).map(|_| 0.1 + rand::Rng::random::<f64>(&mut r)).collect();
        let u = infospec::random::random_unitary(dim, &mut r);
        let rho = DensityMatrix::diagonal(&p).unwrap().conjugate_by(&u);
        let omega = HermitianOperator::from_real_diagonal(&q).conjugate_by(&u);
        let fast = product_trace_fastpath(rho.operator(), &omega, n, gamma).unwrap();
        let dense = difference_trace(&rho.operator().tensor_power(n), &omega.tensor_power(n), n, gamma).unwrap();
        prop_assert!((fast - dense).abs() < TOL, "fast {fast} dense {dense}");
    }

    #[test]
    fn twirl_maximally_mixes_first_factor(d in 2usize..=4, db in 1usize..=2, seed in any::<u64>()) {
        let mut r = rng(seed, 0);
        let shape = SubsystemShape::bipartite(d, db).unwrap();
        let rho = random_density(d * db, d * db, &mut r);
        let tw = weyl_twirl(&rho, &shape).unwrap();
        let rho_b = rho.partial_trace(&shape, &[1]).unwrap();
        let expected = DensityMatrix::maximally_mixed(d).tensor(&rho_b);
        prop_assert!(max_abs(&(tw.matrix() - expected.matrix())) < TOL);
    }

    #[test]
    fn pgm_is_a_subnormalized_povm(dim in 2usize..=5, m in 1usize..=4, seed in any::<u64>()) {
        let mut r = rng(seed, 0);
        let parts: Vec<HermitianOperator> = (0..m).map(|_| random_psd(dim, &mut r)).collect();
        let povm = pretty_good_measurement(&parts).unwrap();
        let mut sum = HermitianOperator::zeros(dim);
        for e in povm.elements() {
            prop_assert!(e.min_eigenvalue() >= -TOL);
            sum = sum.checked_add(e).unwrap();
        }
        prop_assert!(sum.eigenvalues().into_iter().all(|x| x <= 1.0 + TOL));
    }

    #[test]
    fn closed_form_fidelity_matches_channel(dim in 2usize..=5, rank_frac in 0.2f64..=1.0, seed in any::<u64>()) {
        let mut r = rng(seed, 0);
        let rho = random_density(dim, dim, &mut r);
        let rank = ((dim as f64 * rank_frac).ceil() as usize).clamp(1, dim);
        let proj = random_projector(dim, rank, seed);
        let scheme = scheme_from_projector(&rho, 1, proj.clone()).unwrap();
        let via_channel = scheme_fidelity(&rho, &scheme).unwrap();
        let closed = closed_form_fidelity(&rho, &proj, scheme.chi0());
        prop_assert!((via_channel - closed).abs() < TOL);
        let chi = random_unit_vector(dim, &mut r);
        prop_assert!(closed_form_fidelity(&rho, &proj, &chi) <= 1.0 + TOL);
    }
}
