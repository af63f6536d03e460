use proptest::prelude::*;
use tvsvm::skeleton::{temporal_chunking, video_descriptor, SkeletonSequence, VideoDescriptor};
use tvsvm::Matrix;

/// Chunk means computed from explicit frame ranges `[c·T/M, (c+1)·T/M)`.
fn oracle_chunks(traj: &[Vec<f64>], m: usize) -> Vec<Vec<f64>> {
    let t = traj.len();
    let k = traj[0].len();
    (0..m)
        .map(|c| {
            let lo = (c * t).div_ceil(m);
            let hi = ((c + 1) * t).div_ceil(m);
            let mut mean = vec![0.0; k];
            for row in &traj[lo..hi] {
                for (a, v) in mean.iter_mut().zip(row) {
                    *a += v / (hi - lo) as f64;
                }
            }
            mean
        })
        .collect()
}

fn frames_strategy() -> impl Strategy<Value = Vec<Vec<Vec<f64>>>> {
    (1..5usize, prop::sample::select(vec![2usize, 3])).prop_flat_map(|(joints, k)| {
        prop::collection::vec(prop::collection::vec(prop::collection::vec(-2.0..2.0f64, k), joints), 1..30)
    })
}

#[test]
fn eight_frames_into_four_chunks() {
    let traj = Matrix::from_vec(8, 1, (1..=8).map(f64::from).collect()).unwrap();
    assert_eq!(temporal_chunking(&traj, 4).unwrap().as_slice(), &[1.5, 3.5, 5.5, 7.5]);
}

#[test]
fn descriptor_orders_joint_then_chunk_then_coordinate() {
    // Joint j, frame t: (10 j + t, -t).
    let frames: Vec<Vec<Vec<f64>>> = (0..4)
        .map(|t| (0..3).map(|j| vec![10.0 * j as f64 + t as f64, -(t as f64)]).collect())
        .collect();
    let seq = SkeletonSequence::new(&frames).unwrap();
    let d = video_descriptor(&seq, 2).unwrap();
    assert_eq!(d.values.len(), 3 * 2 * 2);
    assert_eq!(d.values[d.index(2, 1, 0)], 22.5);
    assert_eq!(d.values[d.index(0, 0, 1)], -0.5);
    let names = VideoDescriptor::feature_names(3, 2, 2);
    assert_eq!(names[d.index(1, 1, 1)], "j1_c1_y");
}

#[test]
fn invalid_sequences_are_rejected() {
    assert!(SkeletonSequence::new(&[]).is_err());
    assert!(SkeletonSequence::new(&[vec![vec![0.0; 4]]]).is_err());
    assert!(SkeletonSequence::new(&[vec![vec![0.0; 3]], vec![vec![0.0; 3], vec![0.0; 3]]]).is_err());
}

proptest! {
    #[test]
    fn descriptor_length_is_joints_times_dim_times_chunks(frames in frames_strategy(), m in 1..7usize) {
        let seq = SkeletonSequence::new(&frames).unwrap();
        let d = video_descriptor(&seq, m).unwrap();
        prop_assert_eq!(d.values.len(), seq.n_joints() * seq.dim() * m);
    }

    #[test]
    fn chunks_match_oracle_when_every_chunk_is_filled(frames in frames_strategy(), m in 1..7usize) {
        prop_assume!(frames.len() >= m);
        let seq = SkeletonSequence::new(&frames).unwrap();
        for j in 0..seq.n_joints() {
            let traj: Vec<Vec<f64>> = frames.iter().map(|f| f[j].clone()).collect();
            let want = oracle_chunks(&traj, m);
            let got = temporal_chunking(&seq.trajectory(j), m).unwrap();
            for c in 0..m {
                for (a, b) in got.row(c).iter().zip(&want[c]) {
                    prop_assert!((a - b).abs() <= 1e-12, "chunk {c}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn repeating_frames_keeps_descriptor(frames in frames_strategy(), m in 1..5usize, r in 2..4usize) {
        // Frame count a multiple of M, then every frame repeated r times.
        let t = frames.len() / m * m;
        prop_assume!(t > 0);
        let base = &frames[..t];
        let repeated: Vec<_> = base.iter().flat_map(|f| std::iter::repeat_n(f.clone(), r)).collect();
        let a = video_descriptor(&SkeletonSequence::new(base).unwrap(), m).unwrap();
        let b = video_descriptor(&SkeletonSequence::new(&repeated).unwrap(), m).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn chunk_means_stay_inside_trajectory_range(frames in frames_strategy(), m in 1..9usize) {
        let seq = SkeletonSequence::new(&frames).unwrap();
        let traj = seq.trajectory(0);
        let out = temporal_chunking(&traj, m).unwrap();
        for k in 0..traj.cols() {
            let lo = (0..traj.rows()).map(|t| traj[(t, k)]).fold(f64::INFINITY, f64::min);
            let hi = (0..traj.rows()).map(|t| traj[(t, k)]).fold(f64::NEG_INFINITY, f64::max);
            for c in 0..m {
                prop_assert!(out[(c, k)] >= lo - 1e-12 && out[(c, k)] <= hi + 1e-12);
            }
        }
    }
}
