use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tvsvm::kernel::{encode_support, kernel_forward, kernel_gradient, neural_backward, neural_forward};
use tvsvm::{KernelFamily, KernelSpec};

fn smooth_families() -> Vec<KernelSpec> {
    KernelFamily::ALL
        .into_iter()
        .filter(|f| *f != KernelFamily::HistogramIntersection)
        .map(KernelSpec::default_for)
        .collect()
}

/// Closed forms written out independently of the library.
fn oracle(spec: &KernelSpec, x: &[f64], z: &[f64]) -> f64 {
    let dot: f64 = x.iter().zip(z).map(|(a, b)| a * b).sum();
    let d2: f64 = x.iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum();
    let d = d2.sqrt();
    match *spec {
        KernelSpec::Linear => dot,
        KernelSpec::Polynomial { p } => dot.powf(p),
        KernelSpec::Sigmoid { beta } => 1.0 / (1.0 + (-beta * dot).exp()),
        KernelSpec::Tanh { a, b } => (a * dot + b).tanh(),
        KernelSpec::Gaussian { beta } => (-beta * d2).exp(),
        KernelSpec::Laplacian { beta } => (-beta * d).exp(),
        KernelSpec::Power { p } => -d.powf(p),
        KernelSpec::MultiQuadratic { b } => (d2 + b * b).sqrt(),
        KernelSpec::InverseMultiQuadratic { b } => 1.0 / (d2 + b * b).sqrt(),
        KernelSpec::Log { p } => -(d.powf(p) + 1.0).ln(),
        KernelSpec::Cauchy { sigma } => 1.0 / (1.0 + d2 / (sigma * sigma)),
        KernelSpec::HistogramIntersection { .. } => x.iter().zip(z).map(|(a, b)| a.min(*b)).sum(),
    }
}

#[test]
fn neural_path_matches_closed_form_for_eleven_families() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for spec in smooth_families() {
        let mut worst = 0.0_f64;
        for _ in 0..1000 {
            let dim = rng.random_range(1..=5);
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let z: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let w = encode_support(&spec, &z).unwrap();
            let neural = neural_forward(&spec, &x, &w).unwrap();
            let closed = kernel_forward(&spec, &x, &z).unwrap();
            worst = worst.max((neural - closed).abs());
        }
        assert!(worst <= 1e-9, "{spec}: worst gap {worst:e}");
    }
}

#[test]
fn closed_forms_match_independent_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut specs = smooth_families();
    specs.push(KernelSpec::HistogramIntersection { hi_beta: 100.0 });
    for spec in specs {
        for _ in 0..200 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
            let z: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
            let got = kernel_forward(&spec, &x, &z).unwrap();
            let want = oracle(&spec, &x, &z);
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{spec}: {got} vs {want}");
        }
    }
}

#[test]
fn histogram_gap_bounded_and_shrinking_in_beta() {
    let x = [0.1, 0.45, 0.8, 0.5];
    let z = [0.3, 0.45, 0.2, 0.9];
    let exact = oracle(&KernelSpec::HistogramIntersection { hi_beta: 1.0 }, &x, &z);
    let mut previous = f64::INFINITY;
    for hi_beta in [10.0, 100.0, 1000.0] {
        let spec = KernelSpec::HistogramIntersection { hi_beta };
        let w = encode_support(&spec, &z).unwrap();
        let gap = (neural_forward(&spec, &x, &w).unwrap() - exact).abs();
        assert!(gap <= x.len() as f64 * std::f64::consts::LN_2 / hi_beta, "beta {hi_beta}: gap {gap}");
        assert!(gap < previous, "beta {hi_beta}: gap {gap} not below {previous}");
        previous = gap;
    }
}

fn spec_strategy() -> impl Strategy<Value = KernelSpec> {
    (0..11usize).prop_map(|i| smooth_families()[i])
}

fn pair(dim: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (prop::collection::vec(-1.0..1.0f64, dim), prop::collection::vec(-1.0..1.0f64, dim))
}

proptest! {
    #[test]
    fn kernels_are_symmetric(spec in spec_strategy(), (x, z) in (1..5usize).prop_flat_map(pair)) {
        let a = kernel_forward(&spec, &x, &z).unwrap();
        let b = kernel_forward(&spec, &z, &x).unwrap();
        prop_assert!((a - b).abs() <= 1e-13 * a.abs().max(1.0));
    }

    #[test]
    fn closed_form_gradient_matches_differences(spec in spec_strategy(), (x, z) in (1..5usize).prop_flat_map(pair)) {
        // Cone tips have no derivative.
        let d2: f64 = x.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum();
        prop_assume!(d2 > 1e-4);
        let (gx, gz) = kernel_gradient(&spec, &x, &z).unwrap();
        let h = 1e-6;
        for d in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[d] += h;
            xm[d] -= h;
            let fd = (oracle(&spec, &xp, &z) - oracle(&spec, &xm, &z)) / (2.0 * h);
            prop_assert!((fd - gx[d]).abs() <= 1e-5 * fd.abs().max(1.0), "{spec} dx[{d}]: {} vs {fd}", gx[d]);
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[d] += h;
            zm[d] -= h;
            let fd = (oracle(&spec, &x, &zp) - oracle(&spec, &x, &zm)) / (2.0 * h);
            prop_assert!((fd - gz[d]).abs() <= 1e-5 * fd.abs().max(1.0), "{spec} dz[{d}]: {} vs {fd}", gz[d]);
        }
    }

    #[test]
    fn neural_backward_matches_closed_form_gradient(spec in spec_strategy(), (x, z) in (1..5usize).prop_flat_map(pair), up in -2.0..2.0f64) {
        let d2: f64 = x.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum();
        prop_assume!(d2 > 1e-4);
        let w = encode_support(&spec, &z).unwrap();
        let (nx, _) = neural_backward(&spec, &x, &w, up).unwrap();
        let (gx, _) = kernel_gradient(&spec, &x, &z).unwrap();
        for d in 0..x.len() {
            prop_assert!((nx[d] - up * gx[d]).abs() <= 1e-8 * (up * gx[d]).abs().max(1.0));
        }
    }

    #[test]
    fn histogram_soft_min_never_exceeds_exact(x in prop::collection::vec(0.0..1.0f64, 3), z in prop::collection::vec(0.0..1.0f64, 3), hi_beta in 5.0..500.0f64) {
        let spec = KernelSpec::HistogramIntersection { hi_beta };
        let w = encode_support(&spec, &z).unwrap();
        let soft = neural_forward(&spec, &x, &w).unwrap();
        let exact = oracle(&spec, &x, &z);
        prop_assert!(soft <= exact + 1e-12);
        prop_assert!(exact - soft <= 3.0 * std::f64::consts::LN_2 / hi_beta + 1e-12);
    }

    #[test]
    fn spec_text_round_trips(spec in spec_strategy()) {
        let back: KernelSpec = spec.to_string().parse().unwrap();
        prop_assert_eq!(back, spec);
    }
}
