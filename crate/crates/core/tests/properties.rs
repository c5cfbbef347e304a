use proptest::prelude::*;
use rand::Rng;

use freecert::certs::{lmi_dominate, psatz, verify_bundle, CertBundle, DominationOutcome, PsatzOutcome};
use freecert::freemap::{self, check_direct_sums, check_intertwining, CheckConfig};
use freecert::linalg::{self, c, CMat};
use freecert::ncalg::{parse_poly, FreePoly, LinearPencil, MatrixTuple, Word};
use freecert::ncdomain::{closure_properties_test, Domain};
use freecert::par::{trial_rng, Exec};
use freecert::powerseries::{extract_coeffs, PowerSeries};
use freecert::sdp::{self, SdpProblem, SdpStatus, SolveOptions};

fn random_poly(rng: &mut impl Rng, g: usize, deg: usize, shape: (usize, usize)) -> FreePoly {
    let mut terms: Vec<(Word, CMat)> = Vec::new();
    for w in Word::enumerate_plain(g, deg) {
        if rng.random_bool(0.5) {
            terms.push((w, linalg::random_matrix(rng, shape.0, shape.1)));
        }
    }
    FreePoly::from_terms(g, shape, terms).unwrap()
}

fn random_tuple(rng: &mut impl Rng, g: usize, n: usize) -> MatrixTuple {
    MatrixTuple::new((0..g).map(|_| linalg::random_matrix(rng, n, n) * c(0.5, 0.0)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn polynomials_respect_direct_sums_and_similarity(seed in any::<u64>(), g in 1usize..=3, deg in 0usize..=3) {
        let mut rng = trial_rng(seed, 0);
        let p = random_poly(&mut rng, g, deg, (2, 1));
        let x = random_tuple(&mut rng, g, 2);
        let y = random_tuple(&mut rng, g, 3);
        let lhs = p.eval(&x.direct_sum(&y).unwrap()).unwrap();
        let (px, py) = (p.eval(&x).unwrap(), p.eval(&y).unwrap());
        // Row blocks of p(X⊕Y) are p_i(X) ⊕ p_i(Y)
        for i in 0..2 {
            let blk = lhs.view((5 * i, 0), (5, 5));
            prop_assert!((blk.view((0, 0), (2, 2)) - px.view((2 * i, 0), (2, 2))).norm() < 1e-9);
            prop_assert!((blk.view((2, 2), (3, 3)) - py.view((3 * i, 0), (3, 3))).norm() < 1e-9);
            prop_assert!(blk.view((0, 2), (2, 3)).norm() < 1e-12);
        }
        let u = linalg::random_unitary(&mut rng, 2);
        let conj = p.eval(&x.unitary_conj(&u).unwrap()).unwrap();
        for i in 0..2 {
            let want = u.adjoint() * px.view((2 * i, 0), (2, 2)) * &u;
            prop_assert!((conj.view((2 * i, 0), (2, 2)) - &want).norm() < 1e-9 * (1.0 + want.norm()));
        }
    }

    #[test]
    fn json_round_trips(seed in any::<u64>(), g in 1usize..=3) {
        let mut rng = trial_rng(seed, 1);
        let p = random_poly(&mut rng, g, 2, (1, 2));
        let back: FreePoly = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        prop_assert_eq!(&back, &p);
        let x = random_tuple(&mut rng, g, 3);
        let back: MatrixTuple = serde_json::from_str(&serde_json::to_string(&x).unwrap()).unwrap();
        prop_assert_eq!(&back, &x);
        let l = LinearPencil::hermitian((0..g).map(|_| linalg::random_matrix(&mut rng, 2, 2)).collect()).unwrap();
        let back: LinearPencil = serde_json::from_str(&serde_json::to_string(&l).unwrap()).unwrap();
        prop_assert_eq!(&back, &l);
        let s = PowerSeries::from_poly(&random_poly(&mut rng, g, 2, (2, 1)), 3).unwrap();
        let back: PowerSeries = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        prop_assert_eq!(&back, &s);
    }

    #[test]
    fn random_feasible_sdps_are_solved(seed in any::<u64>(), n in 1usize..=4, m in 1usize..=5) {
        let mut rng = trial_rng(seed, 2);
        let z0 = {
            let a = linalg::random_matrix(&mut rng, n, n);
            &a * a.adjoint() + linalg::eye(n) * c(0.1, 0.0)
        };
        let mut p = SdpProblem::new(vec![n]);
        for _ in 0..m {
            let a = linalg::random_hermitian(&mut rng, n);
            let b = sdp::inner(&a, &z0);
            p.add_constraint(vec![(0, a)], b).unwrap();
        }
        let s = sdp::solve(&p, &SolveOptions::default()).unwrap();
        prop_assert_eq!(s.status, SdpStatus::Feasible);
        let r = p.residual(&s.z).unwrap();
        let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(rn <= 1e-6, "residual {}", rn);
        prop_assert!(linalg::min_eig(&s.z[0]) >= -1e-8);
    }
}

#[test]
fn infeasible_sdp_certificate_checks_independently() {
    // Z ⪰ 0 with tr Z = 1 and ⟨diag(1, 2), Z⟩ = 3 is impossible
    let mut p = SdpProblem::new(vec![2]);
    p.add_constraint(vec![(0, linalg::eye(2))], 1.0).unwrap();
    p.add_constraint(vec![(0, linalg::from_real(2, 2, &[1.0, 0.0, 0.0, 2.0]))], 3.0).unwrap();
    let s = sdp::solve(&p, &SolveOptions::default()).unwrap();
    assert_eq!(s.status, SdpStatus::Infeasible);
    let y = s.certificate.unwrap().y;
    let combo = linalg::eye(2) * c(y[0], 0.0) + linalg::from_real(2, 2, &[1.0, 0.0, 0.0, 2.0]) * c(y[1], 0.0);
    assert!(linalg::max_eig(&combo) < -1e-7);
    assert!(y[0] + 3.0 * y[1] >= 0.0);
}

#[test]
fn checks_are_identical_sequential_and_parallel() {
    let f = freemap::ftheta(0.6);
    let seq = CheckConfig { trials: 24, sizes: vec![1, 2, 3], seed: 9, exec: Exec::Sequential };
    let par = CheckConfig { exec: Exec::Parallel, ..seq.clone() };
    for check in [check_direct_sums, check_intertwining] {
        let a = serde_json::to_string(&check(&f, &seq).unwrap()).unwrap();
        let b = serde_json::to_string(&check(&f, &par).unwrap()).unwrap();
        assert_eq!(a, b);
    }
    let d = Domain::lmi(LinearPencil::cube(2)).unwrap();
    let a = closure_properties_test(&d, 16, 4, Exec::Sequential).unwrap();
    let b = closure_properties_test(&d, 16, 4, Exec::Parallel).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn random_lmi_domains_are_closed() {
    for seed in 0..4 {
        let mut rng = trial_rng(77, seed);
        let l = LinearPencil::hermitian((0..2).map(|_| linalg::random_matrix(&mut rng, 3, 3)).collect()).unwrap();
        let rep = closure_properties_test(&Domain::lmi(l).unwrap(), 20, seed, Exec::Parallel).unwrap();
        assert!(rep.passed, "{rep:?}");
    }
}

#[test]
fn series_of_a_polynomial_map_matches_its_coefficients() {
    let mut rng = trial_rng(5, 0);
    let p = random_poly(&mut rng, 2, 3, (2, 1));
    let f = freemap::poly_map(p.clone()).unwrap();
    let s = extract_coeffs(&f, 3, Some(0.5)).unwrap();
    assert!(s.distance_to_poly(&p).unwrap() < 1e-10);
}

#[test]
fn certificates_survive_serialization() {
    let cube = LinearPencil::cube(2);
    let half = LinearPencil::monic(vec![CMat::from_element(1, 1, c(0.5, 0.0)); 2]).unwrap();
    let DominationOutcome::Dominated { certificate } = lmi_dominate(&cube, &half, &SolveOptions::default()).unwrap() else {
        panic!("expected domination")
    };
    let bundle = CertBundle::Domination { l1: cube, l2: half, certificate };
    let back: CertBundle = serde_json::from_str(&serde_json::to_string(&bundle).unwrap()).unwrap();
    assert!(verify_bundle(&back).unwrap().residual <= 1e-7);

    let p = parse_poly("2 - x^2 - y^2", None).unwrap();
    let PsatzOutcome::Certified { certificate } = psatz(&p, &LinearPencil::cube(2), &SolveOptions::default()).unwrap() else {
        panic!("expected a certificate")
    };
    let bundle = CertBundle::Psatz { p, l: LinearPencil::cube(2), certificate };
    let back: CertBundle = serde_json::from_str(&serde_json::to_string(&bundle).unwrap()).unwrap();
    assert!(verify_bundle(&back).unwrap().residual <= 1e-7);
}
