//! Fixed-length descriptors for skeleton sequences.
//!
//! Each joint trajectory is cut into `M` balanced temporal chunks and each
//! chunk is replaced by its mean position. Concatenating the chunk means of
//! every joint gives a vector whose length does not depend on the number of
//! frames but still encodes temporal order.

use thiserror::Error;

use crate::linalg::Matrix;

/// Number of chunks used when none is given.
pub const DEFAULT_CHUNKS: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum SkeletonError {
    #[error("sequence has no frames")]
    NoFrames,
    #[error("frame has no joints")]
    NoJoints,
    #[error("coordinates must be 2-D or 3-D, got {0}")]
    BadCoordinateDim(usize),
    #[error("frame {frame}: expected {expected_joints} joints of dimension {expected_dim}, found {found_joints} joints of dimension {found_dim}")]
    InconsistentFrame {
        frame: usize,
        expected_joints: usize,
        expected_dim: usize,
        found_joints: usize,
        found_dim: usize,
    },
    #[error("non-finite coordinate in frame {0}")]
    NonFinite(usize),
    #[error("number of chunks must be positive")]
    ZeroChunks,
}

pub type Result<T> = std::result::Result<T, SkeletonError>;

/// `T` frames of `J` joints in `K` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSequence {
    n_frames: usize,
    n_joints: usize,
    dim: usize,
    /// Frame-major, then joint, then coordinate.
    coords: Vec<f64>,
}

impl SkeletonSequence {
    /// Builds a sequence from `frames[t][j][k]`.
    pub fn new(frames: &[Vec<Vec<f64>>]) -> Result<Self> {
        let first = frames.first().ok_or(SkeletonError::NoFrames)?;
        let n_joints = first.len();
        if n_joints == 0 {
            return Err(SkeletonError::NoJoints);
        }
        let dim = first[0].len();
        if !(dim == 2 || dim == 3) {
            return Err(SkeletonError::BadCoordinateDim(dim));
        }
        let mut coords = Vec::with_capacity(frames.len() * n_joints * dim);
        for (t, frame) in frames.iter().enumerate() {
            let bad = frame.len() != n_joints || frame.iter().any(|p| p.len() != dim);
            if bad {
                let found_dim = frame.iter().map(Vec::len).find(|&k| k != dim).unwrap_or(dim);
                return Err(SkeletonError::InconsistentFrame {
                    frame: t,
                    expected_joints: n_joints,
                    expected_dim: dim,
                    found_joints: frame.len(),
                    found_dim,
                });
            }
            for p in frame {
                if !p.iter().all(|v| v.is_finite()) {
                    return Err(SkeletonError::NonFinite(t));
                }
                coords.extend_from_slice(p);
            }
        }
        Ok(Self {
            n_frames: frames.len(),
            n_joints,
            dim,
            coords,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_joints(&self) -> usize {
        self.n_joints
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Position of joint `j` at frame `t`.
    pub fn joint(&self, t: usize, j: usize) -> &[f64] {
        let start = (t * self.n_joints + j) * self.dim;
        &self.coords[start..start + self.dim]
    }

    /// The `T × K` trajectory of one joint.
    pub fn trajectory(&self, j: usize) -> Matrix {
        Matrix::from_fn(self.n_frames, self.dim, |t, k| self.joint(t, j)[k])
    }
}

/// Chunk index of frame `t` out of `n_frames`, for `m` chunks.
pub fn chunk_of(t: usize, n_frames: usize, m: usize) -> usize {
    t * m / n_frames
}

/// Per-chunk coordinate means of a `T × K` trajectory, as an `M × K` matrix.
///
/// Frame `t` goes to chunk `⌊t·M/T⌋`. When `T < M` some chunks are empty and
/// copy the preceding chunk's mean.
pub fn temporal_chunking(trajectory: &Matrix, m: usize) -> Result<Matrix> {
    if m == 0 {
        return Err(SkeletonError::ZeroChunks);
    }
    let n_frames = trajectory.rows();
    if n_frames == 0 {
        return Err(SkeletonError::NoFrames);
    }
    let k = trajectory.cols();
    let mut sums = Matrix::zeros(m, k);
    let mut counts = vec![0usize; m];
    for (t, row) in trajectory.iter_rows().enumerate() {
        let c = chunk_of(t, n_frames, m);
        counts[c] += 1;
        for (s, v) in sums.row_mut(c).iter_mut().zip(row) {
            *s += v;
        }
    }
    let mut out = Matrix::zeros(m, k);
    for c in 0..m {
        if counts[c] > 0 {
            let n = counts[c] as f64;
            for (o, s) in out.row_mut(c).iter_mut().zip(sums.row(c)) {
                *o = s / n;
            }
        } else if c > 0 {
            let prev = out.row(c - 1).to_vec();
            out.row_mut(c).copy_from_slice(&prev);
        } else {
            // Unreachable with the floor rule (frame 0 always lands in chunk 0).
            out.row_mut(0).copy_from_slice(trajectory.row(0));
        }
    }
    Ok(out)
}

/// Concatenated chunk means of every joint.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoDescriptor {
    /// Joints outer, chunks middle, coordinates inner.
    pub values: Vec<f64>,
    pub n_joints: usize,
    pub n_chunks: usize,
    pub dim: usize,
}

impl VideoDescriptor {
    /// Flat index of (joint, chunk, coordinate).
    pub fn index(&self, joint: usize, chunk: usize, coord: usize) -> usize {
        (joint * self.n_chunks + chunk) * self.dim + coord
    }

    /// Column names matching [`VideoDescriptor::values`].
    pub fn feature_names(n_joints: usize, n_chunks: usize, dim: usize) -> Vec<String> {
        const AXES: [&str; 3] = ["x", "y", "z"];
        let mut names = Vec::with_capacity(n_joints * n_chunks * dim);
        for j in 0..n_joints {
            for c in 0..n_chunks {
                for axis in &AXES[..dim] {
                    names.push(format!("j{j}_c{c}_{axis}"));
                }
            }
        }
        names
    }
}

pub fn video_descriptor(seq: &SkeletonSequence, m: usize) -> Result<VideoDescriptor> {
    let mut values = Vec::with_capacity(seq.n_joints() * m * seq.dim());
    for j in 0..seq.n_joints() {
        values.extend_from_slice(temporal_chunking(&seq.trajectory(j), m)?.as_slice());
    }
    Ok(VideoDescriptor {
        values,
        n_joints: seq.n_joints(),
        n_chunks: m,
        dim: seq.dim(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(values: &[f64]) -> Matrix {
        Matrix::from_vec(values.len(), 1, values.to_vec()).unwrap()
    }

    #[test]
    fn eight_frames_four_chunks() {
        let traj = column(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        let out = temporal_chunking(&traj, 4).unwrap();
        assert_eq!(out.as_slice(), &[1.5, 3.5, 5.5, 7.5]);
    }

    #[test]
    fn single_frame_fills_every_chunk() {
        let traj = Matrix::from_rows(&[[0.3, -2.0]]).unwrap();
        let out = temporal_chunking(&traj, 5).unwrap();
        for row in out.iter_rows() {
            assert_eq!(row, &[0.3, -2.0]);
        }
    }

    #[test]
    fn short_sequence_copies_preceding_chunk() {
        // T=2, M=4: frames land in chunks 0 and 2.
        let traj = column(&[1.0, 9.0]);
        let out = temporal_chunking(&traj, 4).unwrap();
        assert_eq!(out.as_slice(), &[1.0, 1.0, 9.0, 9.0]);
    }

    #[test]
    fn ten_frames_chunk_sizes() {
        let sizes = (0..4)
            .map(|c| (0..10).filter(|&t| chunk_of(t, 10, 4) == c).count())
            .collect::<Vec<_>>();
        assert_eq!(sizes, vec![3, 2, 3, 2]);
    }

    #[test]
    fn errors() {
        assert_eq!(temporal_chunking(&column(&[1.0]), 0), Err(SkeletonError::ZeroChunks));
        assert_eq!(temporal_chunking(&Matrix::zeros(0, 2), 4), Err(SkeletonError::NoFrames));
        let bad = vec![
            vec![vec![0.0, 0.0], vec![1.0, 1.0]],
            vec![vec![0.0, 0.0]],
        ];
        assert!(matches!(
            SkeletonSequence::new(&bad),
            Err(SkeletonError::InconsistentFrame { frame: 1, .. })
        ));
        assert_eq!(SkeletonSequence::new(&[vec![vec![1.0]]]), Err(SkeletonError::BadCoordinateDim(1)));
    }

    #[test]
    fn descriptor_layout() {
        let frames = vec![
            vec![vec![0.0, 1.0], vec![10.0, 11.0]],
            vec![vec![2.0, 3.0], vec![12.0, 13.0]],
        ];
        let seq = SkeletonSequence::new(&frames).unwrap();
        let d = video_descriptor(&seq, 2).unwrap();
        assert_eq!(d.values, vec![0.0, 1.0, 2.0, 3.0, 10.0, 11.0, 12.0, 13.0]);
        assert_eq!(d.values[d.index(1, 0, 1)], 11.0);
        assert_eq!(
            VideoDescriptor::feature_names(1, 2, 2),
            vec!["j0_c0_x", "j0_c0_y", "j0_c1_x", "j0_c1_y"]
        );
    }
}
