use proptest::prelude::*;
use tvsvm::data::{
    featurize, make_two_moons, make_xor_gaussians, normalize, parse_skeletons, read_csv, split, write_csv, Dataset,
    NormalizeMode, SplitSpec,
};
use tvsvm::Matrix;

fn dataset_strategy() -> impl Strategy<Value = Dataset> {
    (1..20usize, 1..5usize).prop_flat_map(|(n, d)| {
        (prop::collection::vec(-1e6..1e6f64, n * d), prop::collection::vec(-3..4i64, n)).prop_map(move |(v, y)| {
            Dataset::new(Matrix::from_vec(n, d, v).unwrap(), y, None).unwrap()
        })
    })
}

#[test]
fn generators_are_seeded_and_balanced() {
    let a = make_two_moons(400, 0.2, 7).unwrap();
    let b = make_two_moons(400, 0.2, 7).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, make_two_moons(400, 0.2, 8).unwrap());
    assert_eq!(a.y.iter().filter(|&&l| l == 1).count(), 200);
    let x = make_xor_gaussians(400, 0.3, 7).unwrap();
    assert_eq!(x.classes(), vec![-1, 1]);
    assert_eq!(x.len(), 400);
}

#[test]
fn noise_free_moons_lie_on_their_circles() {
    let d = make_two_moons(100, 0.0, 1).unwrap();
    for (row, &label) in d.x.iter_rows().zip(&d.y) {
        let (cx, cy) = if label == -1 { (0.0, 0.0) } else { (1.0, 0.5) };
        let r = ((row[0] - cx).powi(2) + (row[1] - cy).powi(2)).sqrt();
        assert!((r - 1.0).abs() < 1e-12);
    }
}

#[test]
fn skeleton_json_featurizes_to_expected_width() {
    let text = r#"{"videos": [
        {"label": 1, "frames": [[[0,0,0],[1,1,1]], [[2,2,2],[3,3,3]]]},
        {"label": 2, "frames": [[[0,1,2],[3,4,5]]]}
    ]}"#;
    let videos = parse_skeletons(text).unwrap();
    let d = featurize(&videos, 2).unwrap();
    assert_eq!(d.dim(), 2 * 3 * 2);
    assert_eq!(d.y, vec![1, 2]);
    assert_eq!(d.feature_names[0], "j0_c0_x");
    assert_eq!(d.x.row(0)[..6], [0.0, 0.0, 0.0, 2.0, 2.0, 2.0]);
}

proptest! {
    #[test]
    fn csv_round_trip_is_bit_exact(d in dataset_strategy()) {
        let mut buf = Vec::new();
        write_csv(&d, &mut buf).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, d);
    }

    #[test]
    fn split_partitions_rows(d in dataset_strategy(), f in 0.1..0.9f64, seed in any::<u64>(), stratified in any::<bool>()) {
        prop_assume!(d.len() >= 2);
        if let Ok((train, test)) = split(&d, &SplitSpec { train_fraction: f, seed, stratified }) {
            prop_assert_eq!(train.len() + test.len(), d.len());
            let mut all: Vec<Vec<u64>> = train
                .x
                .iter_rows()
                .chain(test.x.iter_rows())
                .map(|r| r.iter().map(|v| v.to_bits()).collect())
                .collect();
            let mut orig: Vec<Vec<u64>> = d.x.iter_rows().map(|r| r.iter().map(|v| v.to_bits()).collect()).collect();
            all.sort();
            orig.sort();
            prop_assert_eq!(all, orig);
        }
    }

    #[test]
    fn minmax_maps_train_into_unit_box(d in dataset_strategy()) {
        let (n, norm) = normalize(&d, NormalizeMode::MinMaxPerDim).unwrap();
        prop_assert!(n.x.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
        let again = norm.apply(&d.x).unwrap();
        prop_assert_eq!(again, n.x);
    }

    #[test]
    fn unit_sum_rows_sum_to_one(d in dataset_strategy()) {
        let positive = Dataset::new(
            Matrix::from_fn(d.len(), d.dim(), |i, j| d.x[(i, j)].abs() + 1.0),
            d.y.clone(),
            None,
        )
        .unwrap();
        let (n, _) = normalize(&positive, NormalizeMode::UnitSumRows).unwrap();
        for row in n.x.iter_rows() {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }
}
