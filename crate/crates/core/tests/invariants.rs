//! Property tests of the model, dynamics, sampler and operator invariants.

use num_complex::Complex;
use proptest::prelude::*;
use snls_core::convexity::{convexity_certificate, Region};
use snls_core::gibbs::{sample_expectations, McmcConfig};
use snls_core::langevin::{run_trajectory, SdeConfig};
use snls_core::observables::Observable;
use snls_core::spectral::checks::witten_algebra;
use snls_core::spectral::eigen::compute_spectrum;
use snls_core::spectral::galerkin::HermiteGalerkin;
use snls_core::spectral::operator::OperatorTag;
use snls_core::spectral::potential::PotentialDescriptor;
use snls_core::{DomainKind, FieldState64, Hamiltonian64, ModelParams, TangentVector64};

type C = Complex<f64>;

fn family() -> impl Strategy<Value = (usize, u32, usize)> {
    prop_oneof![Just((1, 4, 2)), Just((1, 6, 2)), Just((2, 4, 1)), Just((1, 4, 0))]
}

fn model(dim: usize, p: u32, n: usize, coupling: f64) -> ModelParams {
    ModelParams {
        dim,
        exponent: p,
        cutoff: n,
        coupling,
        ..ModelParams::default()
    }
}

fn coeffs(len: usize, scale: f64) -> impl Strategy<Value = Vec<C>> {
    proptest::collection::vec((-scale..scale, -scale..scale), len).prop_map(|v| v.into_iter().map(|(a, b)| C::new(a, b)).collect())
}

/// A model and a random state and direction of matching length.
fn case() -> impl Strategy<Value = (ModelParams, Vec<C>, Vec<C>)> {
    (family(), -0.5f64..0.5).prop_flat_map(|((d, p, n), lam)| {
        let m = model(d, p, n, lam);
        let len = m.mode_count();
        (Just(m), coeffs(len, 0.5), coeffs(len, 1.0))
    })
}

/// `|u|^{p−2}u` coefficients by direct summation.
fn brute(ham: &Hamiltonian64, a: &[C], p: usize) -> Vec<C> {
    let lat = ham.lattice();
    let m = a.len();
    let mut out = vec![C::new(0.0, 0.0); m];
    let mut idx = vec![0usize; p - 1];
    loop {
        let mut n = vec![0i32; lat.dim()];
        let mut prod = C::new(1.0, 0.0);
        for (j, &k) in idx.iter().enumerate() {
            let s = if j % 2 == 1 { -1 } else { 1 };
            for (c, v) in n.iter_mut().zip(lat.mode(k)) {
                *c += s * v;
            }
            prod *= if j % 2 == 1 { a[k].conj() } else { a[k] };
        }
        if let Some(t) = lat.index_of(&n) {
            out[t] += prod;
        }
        let mut j = 0;
        while j < idx.len() {
            idx[j] += 1;
            if idx[j] < m {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
        if j == idx.len() {
            return out;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gauge_invariance((m, a, _) in case(), theta in 0.0f64..6.3) {
        let ham = Hamiltonian64::new(&m).unwrap();
        let s = FieldState64::from_coeffs(a);
        let phi = ham.reduced_hamiltonian(&s).unwrap();
        let rot = ham.reduced_hamiltonian(&s.rotate(theta)).unwrap();
        prop_assert!((phi - rot).abs() <= 1e-13 * phi.abs().max(1.0));
    }

    #[test]
    fn gradient_matches_central_differences((m, a, v) in case()) {
        let ham = Hamiltonian64::new(&m).unwrap();
        let eps = 1e-5;
        let at = |t: f64| ham.reduced_hamiltonian_unchecked(&a.iter().zip(&v).map(|(x, y)| x + y * t).collect::<Vec<_>>());
        let fd = (at(eps) - at(-eps)) / (2.0 * eps);
        let (_, g) = ham.energy_and_gradient_unchecked(&a);
        let exact: f64 = 2.0 * g.iter().zip(&v).map(|(g, v)| (g.conj() * v).re).sum::<f64>();
        prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1e-3), "{fd} vs {exact}");
    }

    #[test]
    fn hessian_is_symmetric_and_matches_the_form((m, a, v) in case(), w in coeffs(25, 1.0)) {
        let ham = Hamiltonian64::new(&m).unwrap();
        let s = FieldState64::from_coeffs(a.clone());
        let v = TangentVector64::real_direction(v);
        let w = TangentVector64::real_direction(w[..a.len()].to_vec());
        let hv = ham.hessian_apply(&s, &v).unwrap();
        let hw = ham.hessian_apply(&s, &w).unwrap();
        let scale = hv.inner(&hv).sqrt() * w.inner(&w).sqrt();
        prop_assert!((v.inner(&hw) - hv.inner(&w)).abs() <= 1e-12 * scale);
        let form = ham.hessian_quadratic_form(&s, &v).unwrap();
        prop_assert!((v.inner(&hv) - form).abs() <= 1e-12 * form.abs().max(1.0));
        let eps = 1e-4;
        let at = |t: f64| ham.reduced_hamiltonian_unchecked(&a.iter().zip(&v.w).map(|(x, y)| x + y * t).collect::<Vec<_>>());
        let second = (at(eps) - 2.0 * at(0.0) + at(-eps)) / (eps * eps);
        prop_assert!((second - form).abs() <= 1e-5 * form.abs().max(1.0));
    }

    #[test]
    fn vector_field_is_tangent_to_energy_and_mass((m, a, _) in case()) {
        let ham = Hamiltonian64::new(&m).unwrap();
        let s = FieldState64::from_coeffs(a.clone());
        let h = ham.hamiltonian_vector_field(&s).unwrap();
        let g = ham.paired_gradient(&s).unwrap();
        let mass = TangentVector64::real_direction(a);
        let n = |x: &TangentVector64| x.inner(x).sqrt();
        prop_assert!(h.inner(&g).abs() <= 1e-12 * n(&h) * n(&g));
        prop_assert!(h.inner(&mass).abs() <= 1e-12 * n(&h) * n(&mass));
    }

    #[test]
    fn free_closed_forms((m, a, _) in case()) {
        let m = ModelParams { coupling: 0.0, ..m };
        let ham = Hamiltonian64::new(&m).unwrap();
        let lat = ham.lattice();
        let closed: f64 = a.iter().enumerate().map(|(k, c)| (lat.norm_sq(k) + 1) as f64 * c.norm_sqr()).sum();
        prop_assert!((ham.reduced_hamiltonian_unchecked(&a) - closed).abs() <= 1e-13 * closed.max(1.0));
        let s = FieldState64::from_coeffs(a.clone());
        for k in 0..a.len() {
            let mut e = vec![C::new(0.0, 0.0); a.len()];
            e[k] = C::new(0.0, 1.0);
            let q = ham.hessian_quadratic_form(&s, &TangentVector64::real_direction(e)).unwrap();
            prop_assert!((q - 2.0 * (lat.norm_sq(k) + 1) as f64).abs() <= 1e-12);
        }
    }

    #[test]
    fn dealiased_term_equals_convolution((m, a, _) in case()) {
        prop_assume!(m.coupling != 0.0);
        let ham = Hamiltonian64::new(&m).unwrap();
        let (_, g) = ham.energy_and_gradient_unchecked(&a);
        let b = brute(&ham, &a, m.exponent as usize);
        let lat = ham.lattice();
        let scale = b.iter().map(|c| c.norm()).fold(0.0, f64::max) * m.coupling.abs();
        for k in 0..a.len() {
            let nl = g[k] - a[k] * (lat.norm_sq(k) + 1) as f64;
            prop_assert!((nl - b[k] * m.coupling).norm() <= 1e-12 * scale.max(1e-300));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn trajectories_are_deterministic_and_stay_inside(
        seed in any::<u64>(),
        domain in prop_oneof![Just(DomainKind::HamiltonianBall), Just(DomainKind::L2Ball)],
        n in 0usize..3,
    ) {
        let m = ModelParams { cutoff: n, domain, ..ModelParams::default() };
        let ham = Hamiltonian64::new(&m).unwrap();
        let cfg = SdeConfig { dt: 2e-3, t_max: 4.0, record_stride: 1, rng_seed: seed, burn_in: 0.5, ..SdeConfig::default() };
        let a = run_trajectory(&ham, &ham.zero_state(), &cfg).unwrap();
        let b = run_trajectory(&ham, &ham.zero_state(), &cfg).unwrap();
        prop_assert_eq!(&a.phi, &b.phi);
        prop_assert!(ham.in_domain(&a.final_state).unwrap().inside);
        let lat = ham.lattice();
        for i in 0..a.len() {
            let inside = match domain {
                DomainKind::L2Ball => a.l2sq[i] < m.ball,
                _ => {
                    let h1: f64 = a.mode_power[i].iter().enumerate().map(|(k, p)| (lat.norm_sq(k) + 1) as f64 * p).sum();
                    a.phi[i].abs() < m.ball && h1 < 5.0 * m.ball
                }
            };
            prop_assert!(inside, "record {i} left the domain");
        }
    }

    #[test]
    fn metropolis_is_seeded(seed in any::<u64>()) {
        let ham = Hamiltonian64::new(&ModelParams::default()).unwrap();
        let cfg = McmcConfig { n_steps: 4000, burn_in: 400, rng_seed: seed, chains: 2, batches: 10, ..McmcConfig::default() };
        let obs = Observable::standard_set(ham.len());
        prop_assert_eq!(sample_expectations(&ham, &cfg, &obs).unwrap(), sample_expectations(&ham, &cfg, &obs).unwrap());
    }

    #[test]
    fn galerkin_identities_hold_for_random_potentials(c in proptest::array::uniform4(-0.15f64..0.15), nu in 0.2f64..2.0) {
        let pot = PotentialDescriptor::cubic_quadratic(c).unwrap();
        let r = witten_algebra(&HermiteGalerkin::new(&pot, nu).unwrap(), 5).unwrap();
        prop_assert!(r.worst() <= 1e-10, "{r:?}");
    }

    #[test]
    fn free_field_spectrum_is_in_the_sector_with_simple_kernel(nu in 0.1f64..3.0) {
        let pot = PotentialDescriptor::from_model(&ModelParams::free_field(1, 0, nu)).unwrap();
        let op = HermiteGalerkin::new(&pot, nu).unwrap().operator(OperatorTag::L, 8).unwrap();
        let r = compute_spectrum(&op, 10).unwrap();
        prop_assert!(r.sector_margin >= -1e-9 * nu.max(1.0));
        prop_assert!(r.simple);
        prop_assert!(r.ground_overlap.unwrap() >= 1.0 - 1e-10);
        prop_assert!((r.gap - nu).abs() <= 1e-9 * nu);
    }

    #[test]
    fn free_certificate_is_exact(n in 1usize..6, seed in any::<u64>()) {
        let m = ModelParams::free_field(1, n, 1.0);
        let c = convexity_certificate::<f64>(&m, Region::convexity_set(m.ball), 8, seed).unwrap();
        prop_assert!((c.c_min - 2.0).abs() <= 1e-9);
        prop_assert!((c.c_max - 2.0 * ((n * n) as f64 + 1.0)).abs() <= 1e-8 * c.c_max);
    }
}
