use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};

use matrange::choi::ChoiMatrix;
use matrange::essential::BlockRepetitionModel;
use matrange::herm::{isometry_defect, kron, pencil_norm, psd_project, spectral_norm, HermTuple};
use matrange::lambda::lambda_realize;
use matrange::membership::{certificate_residual, membership, MembershipOptions, Status};
use matrange::sampling;
use matrange::simplex::{
    barycentric_povm, dilation_compression, naimark_dilate, povm_reconstruction,
    simplex_norm_bound, Simplex,
};
use matrange::spatial::block_compress_auto;
use matrange::witness::{check_inequality, search_witness, vertex_pencil_norm, WitnessOptions};

fn config(cases: u32) -> Config {
    Config {
        cases,
        rng_seed: RngSeed::Fixed(0x6d61_7472),
        failure_persistence: None,
        ..Config::default()
    }
}

fn compression(seed: u64, a: &HermTuple, q: usize) -> HermTuple {
    let mut rng = sampling::rng(seed);
    sampling::isometry(&mut rng, a.dim(), q)
        .compress(a)
        .unwrap()
}

fn random_simplex(seed: u64) -> Simplex {
    let mut rng = sampling::rng(seed);
    loop {
        let v: Vec<Vec<f64>> = (0..3)
            .map(|_| {
                vec![
                    sampling::uniform(&mut rng, -2.0, 2.0),
                    sampling::uniform(&mut rng, -2.0, 2.0),
                ]
            })
            .collect();
        let area = ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1])
            - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]))
            .abs();
        if area > 0.3 {
            return Simplex::new(v).unwrap();
        }
    }
}

fn model(seed: u64, d: usize, level: usize) -> BlockRepetitionModel {
    let mut rng = sampling::rng(seed);
    let body = sampling::hermitian_tuple(&mut rng, 2, d);
    let head = sampling::hermitian_tuple(&mut rng, 2, 2)
        .map(|h| Ok(h.scale(3.0)))
        .unwrap();
    BlockRepetitionModel::new(Some(head), body, level).unwrap()
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn kron_is_bilinear_with_mixed_product(seed in any::<u64>(), s in -3.0f64..3.0, t in -3.0f64..3.0) {
        let mut rng = sampling::rng(seed);
        let a = sampling::gaussian_matrix(&mut rng, 2, 3);
        let a2 = sampling::gaussian_matrix(&mut rng, 2, 3);
        let b = sampling::gaussian_matrix(&mut rng, 3, 2);
        let c = sampling::gaussian_matrix(&mut rng, 3, 2);
        let d = sampling::gaussian_matrix(&mut rng, 2, 2);
        let lin = kron(&(a.scale(s) + a2.scale(t)), &b) - (kron(&a, &b).scale(s) + kron(&a2, &b).scale(t));
        prop_assert!(lin.norm() < 1e-10);
        let mixed = kron(&a, &b) * kron(&c, &d) - kron(&(&a * &c), &(&b * &d));
        prop_assert!(mixed.norm() < 1e-10);
    }

    #[test]
    fn spectral_norm_submultiplicative_and_unitarily_invariant(seed in any::<u64>(), n in 1usize..6) {
        let mut rng = sampling::rng(seed);
        let a = sampling::gaussian_matrix(&mut rng, n, n);
        let b = sampling::gaussian_matrix(&mut rng, n, n);
        prop_assert!(spectral_norm(&(&a * &b)) <= spectral_norm(&a) * spectral_norm(&b) + 1e-9);
        let u = sampling::unitary(&mut rng, n);
        let v = sampling::unitary(&mut rng, n);
        prop_assert!((spectral_norm(&(&u * &a * &v)) - spectral_norm(&a)).abs() < 1e-9);
    }

    #[test]
    fn psd_projection_is_nearest(seed in any::<u64>(), n in 1usize..6) {
        let mut rng = sampling::rng(seed);
        let a = sampling::hermitian(&mut rng, n);
        let p = psd_project(&a).unwrap();
        prop_assert!(p.min_eigenvalue().unwrap() > -1e-12);
        let dist = (a.as_mat() - p.as_mat()).norm();
        for _ in 0..10 {
            let g = sampling::gaussian_matrix(&mut rng, n, n);
            let other = &g * g.adjoint();
            prop_assert!(dist <= (a.as_mat() - other).norm() + 1e-12);
        }
    }

    #[test]
    fn pencil_norm_unitarily_invariant(seed in any::<u64>(), n in 1usize..6, q in 1usize..3) {
        let mut rng = sampling::rng(seed);
        let t = sampling::hermitian_tuple(&mut rng, 2, n);
        let r = sampling::norm_test_tuple(&mut rng, q, 2);
        let u = sampling::unitary(&mut rng, n);
        let rotated = t.congruence(&u).unwrap();
        prop_assert!((pencil_norm(&r, &rotated).unwrap() - pencil_norm(&r, &t).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn inequality_scales_with_pencil(seed in any::<u64>(), c in 0.01f64..100.0) {
        let mut rng = sampling::rng(seed);
        let a = sampling::hermitian_tuple(&mut rng, 2, 4);
        let b = sampling::hermitian_tuple(&mut rng, 2, 2);
        let r = sampling::norm_test_tuple(&mut rng, 2, 2);
        let base = check_inequality(&r, &b, |r| pencil_norm(r, &a)).unwrap();
        let scaled = check_inequality(&r.scaled(c), &b, |r| pencil_norm(r, &a)).unwrap();
        prop_assert!((scaled.lhs - c * base.lhs).abs() <= 1e-9 * c.max(1.0) * base.lhs.max(1.0));
        prop_assert!((scaled.rhs - c * base.rhs).abs() <= 1e-9 * c.max(1.0) * base.rhs.max(1.0));
        prop_assert_eq!(scaled.holds, base.holds);
    }

    #[test]
    fn vertex_norm_matches_diagonal_tuple(seed in any::<u64>(), q in 1usize..4) {
        let s = random_simplex(seed);
        let mut rng = sampling::rng(seed ^ 1);
        let r = sampling::norm_test_tuple(&mut rng, q, 2);
        let direct = pencil_norm(&r, &s.vertex_tuple()).unwrap();
        prop_assert!((vertex_pencil_norm(&r, &s).unwrap() - direct).abs() < 1e-10);
    }

    #[test]
    fn simplex_dilation_invariants(seed in any::<u64>(), q in 1usize..4) {
        let s = random_simplex(seed);
        let mut rng = sampling::rng(seed ^ 2);
        let phi = sampling::ucp_map(&mut rng, 3, q, 3).unwrap();
        let t = phi.apply_tuple(&s.vertex_tuple()).unwrap();
        let povm = barycentric_povm(&t, &s).unwrap();
        prop_assert!(povm_reconstruction(&povm, &s).unwrap().max_distance(&t).unwrap() < 1e-10);
        let x = naimark_dilate(&povm).unwrap();
        prop_assert!(x.defect() <= 1e-9);
        prop_assert!(dilation_compression(&x, &s).unwrap().max_distance(&t).unwrap() <= 1e-8);
        for _ in 0..200 {
            let r = sampling::norm_test_tuple(&mut rng, 2, 2);
            let nb = simplex_norm_bound(&r, &t, &s).unwrap();
            prop_assert!(nb.lhs <= nb.bound + 1e-9);
        }
    }

    #[test]
    fn vertex_tuple_attains_bound(seed in any::<u64>()) {
        let s = random_simplex(seed);
        let t = s.vertex_tuple();
        let mut rng = sampling::rng(seed ^ 3);
        for _ in 0..50 {
            let r = sampling::norm_test_tuple(&mut rng, 2, 2);
            let nb = simplex_norm_bound(&r, &t, &s).unwrap();
            prop_assert!((nb.lhs - nb.bound).abs() <= 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn member_certificates_reproduce_targets(seed in any::<u64>()) {
        let mut rng = sampling::rng(seed);
        let a = sampling::hermitian_tuple(&mut rng, 2, 4);
        let b = compression(seed ^ 5, &a, 2);
        let v = membership(&b, &a, &MembershipOptions::default().with_seed(seed)).unwrap();
        prop_assert_eq!(v.status, Status::Member);
        let cert = v.certificate.unwrap();
        prop_assert!(certificate_residual(&cert, &a, &b).unwrap() <= 1e-6);
        prop_assert!(cert.min_eigenvalue().unwrap() >= -1e-8);
        prop_assert!(cert.unital_defect() <= 1e-8);

        // Composition with a UCP map on M_q stays inside.
        let psi = sampling::ucp_map(&mut rng, 2, 2, 2).unwrap();
        let image = psi.apply_tuple(&b).unwrap();
        let w = membership(&image, &a, &MembershipOptions::default().with_seed(seed)).unwrap();
        prop_assert_eq!(w.status, Status::Member);

        // Midpoint of two members.
        let other = compression(seed ^ 6, &a, 2);
        let mid = b.add(&other).unwrap().map(|m| Ok(m.scale(0.5))).unwrap();
        let w = membership(&mid, &a, &MembershipOptions::default().with_seed(seed)).unwrap();
        prop_assert_eq!(w.status, Status::Member);
    }

    #[test]
    fn refutations_are_sound(seed in any::<u64>(), stretch in 1.3f64..3.0) {
        let mut rng = sampling::rng(seed);
        let a = sampling::hermitian_tuple(&mut rng, 2, 4);
        let b = compression(seed ^ 7, &a, 2).map(|m| Ok(m.scale(stretch))).unwrap();
        let opts = MembershipOptions::default().with_seed(seed);
        let v = membership(&b, &a, &opts).unwrap();
        if v.status == Status::NotMember {
            let w = v.witness.unwrap();
            let fresh = check_inequality(&w.r, &b, |r| pencil_norm(r, &a)).unwrap();
            prop_assert!(fresh.lhs > fresh.rhs + opts.gap_tol);
        }
        let found = search_witness(&b, |r| pencil_norm(r, &a), &WitnessOptions { seed, budget: 4000, ..Default::default() }).unwrap();
        if let Some(w) = found {
            let fresh = check_inequality(&w.r, &b, |r| pencil_norm(r, &a)).unwrap();
            prop_assert!(fresh.lhs > fresh.rhs - 1e-9);
            prop_assert!(!fresh.holds);
        }
    }

    #[test]
    fn essential_membership_ignores_head_and_level(seed in any::<u64>()) {
        let m = model(seed, 3, 2);
        let b = compression(seed ^ 8, m.body(), 2);
        let opts = MembershipOptions::default().with_seed(seed);
        let base = m.essential_membership(&b, &opts).unwrap().status;
        let mut rng = sampling::rng(seed ^ 9);
        let new_head = sampling::hermitian_tuple(&mut rng, 2, 3);
        let swapped = BlockRepetitionModel::new(Some(new_head), m.body().clone(), m.level()).unwrap();
        prop_assert_eq!(swapped.essential_membership(&b, &opts).unwrap().status, base);
        prop_assert_eq!(m.with_level(m.level() + 1).essential_membership(&b, &opts).unwrap().status, base);
    }

    #[test]
    fn essential_members_survive_head_perturbations(seed in any::<u64>()) {
        let m = model(seed, 3, 3);
        let b = compression(seed ^ 10, m.body(), 2);
        let v = m.essential_membership(&b, &MembershipOptions::default().with_seed(seed)).unwrap();
        prop_assert_eq!(v.status, Status::Member);
        let mut rng = sampling::rng(seed ^ 11);
        for _ in 0..3 {
            let k = sampling::hermitian_tuple(&mut rng, 2, m.head_dim()).map(|h| Ok(h.scale(5.0))).unwrap();
            let a = m.with_head_perturbation(&k).unwrap().materialize().unwrap();
            for _ in 0..50 {
                let r = sampling::norm_test_tuple(&mut rng, 2, 2);
                prop_assert!(check_inequality(&r, &b, |r| pencil_norm(r, &a)).unwrap().holds);
            }
        }
    }

    #[test]
    fn block_compression_invariants(seed in any::<u64>()) {
        let m = model(seed, 3, 2);
        let targets: Vec<HermTuple> = (0..3).map(|i| compression(seed ^ (20 + i), m.body(), 1)).collect();
        let opts = MembershipOptions::default().with_seed(seed);
        let c = block_compress_auto(&m, &targets, 1e-6, &opts).unwrap();
        prop_assert!(isometry_defect(c.z.as_mat()) <= 1e-9);
        for s in &c.stages {
            prop_assert!(s.complement_overlap <= 1e-9);
            prop_assert!(s.complement_coupling <= 1e-9);
        }
        prop_assert!(c.max_offdiag <= 1e-9);
        prop_assert!(c.max_deviation <= 1e-6);
        for block in &c.blocks {
            prop_assert_ne!(membership(block, m.body(), &opts).unwrap().status, Status::NotMember);
        }
    }

    #[test]
    fn lambda_realizations_are_sound_and_monotone(seed in any::<u64>()) {
        let m = model(seed, 3, 1);
        let b = compression(seed ^ 12, m.body(), 1);
        let opts = MembershipOptions::default().with_seed(seed);
        let phi: ChoiMatrix = m.essential_membership(&b, &opts).unwrap().certificate.unwrap();
        let rank = phi.kraus_decomposition().unwrap().len();
        let host = m.with_level(2 * rank);
        let a = host.materialize().unwrap();
        let w = lambda_realize(&b, &host, 2, &phi).unwrap();
        prop_assert!(w.x.defect() <= 1e-9);
        prop_assert!(w.x.compress(&a).unwrap().max_distance(&b.amplify(2).unwrap()).unwrap() <= 1e-7);
        prop_assert!(lambda_realize(&b, &host, 1, &phi).is_ok());
        let amplified = b.amplify(2).unwrap();
        prop_assert_ne!(membership(&amplified, &a, &opts).unwrap().status, Status::NotMember);
    }
}
