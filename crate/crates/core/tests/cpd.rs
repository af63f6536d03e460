use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tvsvm::cpd::{
    berg_transform, berg_witness, check_kernel, composition_closure_check, cpd_sampled_check, default_tolerance,
    is_known_cpd, pd_check, CpdError, GramMatrix, Verdict,
};
use tvsvm::linalg::symmetric_eigen;
use tvsvm::{ActivationMode, DeepKernelNet, KernelFamily, KernelSpec, Matrix};

fn points(n: usize, dim: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(n, dim, |_, _| rng.random_range(0.0..1.0))
}

fn cpd_specs() -> Vec<KernelSpec> {
    KernelFamily::ALL
        .into_iter()
        .filter(|f| is_known_cpd(*f))
        .map(KernelSpec::default_for)
        .collect()
}

#[test]
fn known_families_pass_and_berg_is_psd() {
    for seed in 0..3 {
        let pts = points(10, 3, seed);
        for spec in cpd_specs() {
            let report = check_kernel(&spec, &pts, 300, seed).unwrap();
            assert!(report.passed(), "{spec}: {report:?}");
            assert!(report.min_eig_after_berg >= -1e-8, "{spec}: {}", report.min_eig_after_berg);
        }
    }
}

#[test]
fn multiquadratic_witness_is_genuine() {
    let pts = points(10, 3, 1);
    let spec = KernelSpec::MultiQuadratic { b: 1.0 };
    let report = check_kernel(&spec, &pts, 1000, 1).unwrap();
    assert_eq!(report.verdict, Verdict::FailedWithWitness);
    let w = report.witness.unwrap();
    let gram = GramMatrix::for_spec(&spec, &pts).unwrap();
    assert!(w.c.iter().sum::<f64>().abs() < 1e-12);
    let q = gram.values().quadratic_form(&w.c);
    assert!((q - w.quadratic_form).abs() < 1e-12 && q < 0.0);
}

#[test]
fn berg_witness_sums_to_zero_and_is_negative() {
    let pts = points(8, 2, 3);
    let gram = GramMatrix::for_spec(&KernelSpec::Sigmoid { beta: 3.0 }, &pts).unwrap();
    let (psd, min) = pd_check(&berg_transform(&gram).unwrap(), 1e-8).unwrap();
    if !psd {
        let w = berg_witness(&gram).unwrap();
        assert!(w.c.iter().sum::<f64>().abs() < 1e-12);
        assert!(w.quadratic_form < 0.0, "{} with min eigenvalue {min}", w.quadratic_form);
    }
}

#[test]
fn non_cpd_input_is_a_precondition_error() {
    let pts = points(10, 3, 2);
    let net = DeepKernelNet::with_hidden(2, &[3], 0.01, ActivationMode::SmoothedLeakyRelu).unwrap();
    let specs = [KernelSpec::Gaussian { beta: 1.0 }, KernelSpec::MultiQuadratic { b: 1.0 }];
    match composition_closure_check(&net, &specs, &pts, 500, 0) {
        Err(CpdError::Precondition { spec, .. }) => assert_eq!(spec, specs[1]),
        other => panic!("expected precondition failure, got {other:?}"),
    }
}

#[test]
fn asymmetric_and_non_square_grams_are_rejected() {
    let m = Matrix::from_rows(&[[1.0, 2.0], [2.5, 1.0]]).unwrap();
    assert!(matches!(GramMatrix::new(m, "x"), Err(CpdError::Asymmetric(_))));
    let m = Matrix::zeros(2, 3);
    assert!(matches!(GramMatrix::new(m, "x"), Err(CpdError::NotSquare)));
}

fn symmetric(n: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-3.0..3.0f64, n * n).prop_map(move |v| {
        Matrix::from_fn(n, n, |i, j| if i <= j { v[i * n + j] } else { v[j * n + i] })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jacobi_agrees_with_nalgebra(m in (1..9usize).prop_flat_map(symmetric)) {
        let n = m.rows();
        let ours = symmetric_eigen(&m);
        let theirs = DMatrix::from_row_slice(n, n, m.as_slice()).symmetric_eigen();
        let mut want: Vec<f64> = theirs.eigenvalues.iter().copied().collect();
        want.sort_by(f64::total_cmp);
        for (a, b) in ours.values.iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-10 * want.iter().fold(1.0_f64, |s, v| s.max(v.abs())), "{a} vs {b}");
        }
        // A v = λ v for every returned pair.
        for k in 0..n {
            let v = ours.vector(k);
            for i in 0..n {
                let av: f64 = (0..n).map(|j| m[(i, j)] * v[j]).sum();
                prop_assert!((av - ours.values[k] * v[i]).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn positive_definite_implies_cpd(seed in any::<u64>(), n in 2..10usize, rank in 1..5usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Matrix::from_fn(n, rank, |_, _| rng.random_range(-1.0..1.0));
        let gram = GramMatrix::new(a.matmul(&a.transpose()).unwrap(), "A Aᵀ").unwrap();
        let (pd, min) = pd_check(&gram, default_tolerance(n)).unwrap();
        prop_assert!(pd, "min eigenvalue {min}");
        let report = cpd_sampled_check(&gram, 200, default_tolerance(n), seed).unwrap();
        prop_assert!(report.passed());
    }

    #[test]
    fn berg_anchor_choice_does_not_matter(seed in any::<u64>(), family in prop::sample::select(cpd_specs())) {
        let pts = points(8, 2, seed);
        let gram = GramMatrix::for_spec(&family, &pts).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let mut perm: Vec<usize> = (0..8).collect();
        use rand::seq::SliceRandom;
        perm.shuffle(&mut rng);
        for g in [gram.clone(), gram.permuted(&perm)] {
            let (psd, min) = pd_check(&berg_transform(&g).unwrap(), 1e-8).unwrap();
            prop_assert!(psd, "{family}: {min}");
        }
    }

    #[test]
    fn sampled_check_is_seed_deterministic(seed in any::<u64>()) {
        let gram = GramMatrix::for_spec(&KernelSpec::Gaussian { beta: 1.0 }, &points(6, 2, seed)).unwrap();
        let a = cpd_sampled_check(&gram, 50, 1e-7, seed).unwrap();
        let b = cpd_sampled_check(&gram, 50, 1e-7, seed).unwrap();
        prop_assert_eq!(a.min_quadratic_form.to_bits(), b.min_quadratic_form.to_bits());
    }
}
