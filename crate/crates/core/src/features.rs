//! Network inputs: context stacking, standardization, file-level pooling.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::dsp::DctFrame;
use crate::error::{Error, Result};
use crate::label::{Label, TargetClass};
use crate::linalg::Matrix;
use crate::math;

/// One speech frame with its surrounding context, flattened
/// oldest-to-newest with each frame's coefficients contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedFeature {
    pub values: Vec<f64>,
    pub label: Option<TargetClass>,
    pub source_id: String,
    pub center_index: usize,
}

/// Stacked vectors of one file as matrix rows, plus the centre frame index
/// of each row.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedMatrix {
    pub rows: Matrix,
    pub centers: Vec<usize>,
}

/// Stacks `context` frames on each side of every speech frame.
///
/// Context comes from the whole frame stream, silence included. Positions
/// past either end of the file repeat the nearest frame.
pub fn stack_matrix(frames: &[DctFrame], context: usize) -> Result<StackedMatrix> {
    let first = frames.first().ok_or(Error::Empty("frame sequence"))?;
    let dim = first.coeffs.len();
    if let Some(bad) = frames.iter().find(|f| f.coeffs.len() != dim) {
        return Err(Error::Shape { expected: dim, actual: bad.coeffs.len() });
    }
    let width = (2 * context + 1) * dim;
    let centers: Vec<usize> =
        frames.iter().enumerate().filter(|(_, f)| f.is_speech).map(|(i, _)| i).collect();
    let last = frames.len() - 1;
    let mut rows = Matrix::zeros(centers.len(), width);
    for (r, &c) in centers.iter().enumerate() {
        let row = rows.row_mut(r);
        for (slot, chunk) in row.chunks_exact_mut(dim).enumerate() {
            let src = (c + slot).saturating_sub(context).min(last);
            chunk.copy_from_slice(&frames[src].coeffs);
        }
    }
    Ok(StackedMatrix { rows, centers })
}

pub fn stack_context(frames: &[DctFrame], context: usize, source_id: &str) -> Result<Vec<StackedFeature>> {
    let StackedMatrix { rows, centers } = stack_matrix(frames, context)?;
    Ok(rows
        .iter_rows()
        .zip(centers)
        .map(|(values, center_index)| StackedFeature {
            values: values.to_vec(),
            label: None,
            source_id: source_id.into(),
            center_index,
        })
        .collect())
}

/// Per-dimension mean and standard deviation of the training inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub const STD_FLOOR: f64 = 1e-8;

impl NormStats {
    /// Population moments of the rows of `data`; std floored at [`STD_FLOOR`].
    pub fn fit(data: &Matrix) -> Result<Self> {
        let n = data.rows();
        if n < 2 {
            return Err(Error::insufficient(format!("need at least 2 vectors, got {n}")));
        }
        let dim = data.cols();
        let mut mean = vec![0.0; dim];
        for row in data.iter_rows() {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut var = vec![0.0; dim];
        for row in data.iter_rows() {
            for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var.into_iter().map(|v| math::sqrt(v / n as f64).max(STD_FLOOR)).collect();
        Ok(NormStats { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &mut [f64]) -> Result<()> {
        crate::error::check_dim(self.dim(), x.len())?;
        for ((v, m), s) in x.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s;
        }
        Ok(())
    }

    pub fn apply_rows(&self, data: &mut Matrix) -> Result<()> {
        crate::error::check_dim(self.dim(), data.cols())?;
        for r in 0..data.rows() {
            self.apply(data.row_mut(r))?;
        }
        Ok(())
    }

    pub fn invert(&self, x: &mut [f64]) -> Result<()> {
        crate::error::check_dim(self.dim(), x.len())?;
        for ((v, m), s) in x.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = *v * s + m;
        }
        Ok(())
    }
}

pub fn fit_norm_stats(data: &Matrix) -> Result<NormStats> {
    NormStats::fit(data)
}

pub fn apply_norm(feature: &[f64], stats: &NormStats) -> Result<Vec<f64>> {
    let mut out = feature.to_vec();
    stats.apply(&mut out)?;
    Ok(out)
}

/// Last-hidden-layer activations for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct BottleneckVector {
    pub values: Vec<f64>,
    pub source_id: String,
}

/// Arithmetic mean of per-frame vectors.
pub fn pool_rows<'a, I>(rows: I) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut iter = rows.into_iter();
    let first = iter.next().ok_or(Error::Empty("no frames to pool"))?;
    let mut sum = first.to_vec();
    let mut count = 1usize;
    for row in iter {
        crate::error::check_dim(sum.len(), row.len())?;
        for (s, x) in sum.iter_mut().zip(row) {
            *s += x;
        }
        count += 1;
    }
    for s in &mut sum {
        *s /= count as f64;
    }
    Ok(sum)
}

pub fn pool_file(bottlenecks: &[BottleneckVector]) -> Result<Vec<f64>> {
    pool_rows(bottlenecks.iter().map(|b| b.values.as_slice()))
}

/// One-hot network target: human, S1, or any of S2..S5.
pub fn label_to_target(label: Label) -> Result<[f64; 3]> {
    TargetClass::try_from(label).map(TargetClass::one_hot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{DCT_COEFFS, STACKED_DIM};

    fn frames(n: usize, speech: impl Fn(usize) -> bool) -> Vec<DctFrame> {
        (0..n)
            .map(|i| DctFrame {
                coeffs: (0..DCT_COEFFS).map(|k| (i * 1000 + k) as f64).collect(),
                is_speech: speech(i),
            })
            .collect()
    }

    #[test]
    fn one_vector_per_speech_frame() {
        let f = frames(50, |i| i % 5 != 0 && i % 7 != 3);
        let n_speech = f.iter().filter(|x| x.is_speech).count();
        let stacked = stack_context(&f, 10, "a").unwrap();
        assert_eq!(stacked.len(), n_speech);
        assert!(stacked.iter().all(|s| s.values.len() == STACKED_DIM));
    }

    #[test]
    fn thirty_of_fifty() {
        let f = frames(50, |i| i < 30);
        let stacked = stack_context(&f, 10, "a").unwrap();
        assert_eq!(stacked.len(), 30);
        assert!(stacked.iter().all(|s| s.values.len() == 2688));
    }

    #[test]
    fn left_edge_replicates_first_frame() {
        let f = frames(30, |i| i == 0);
        let s = &stack_context(&f, 10, "a").unwrap()[0];
        assert_eq!(s.center_index, 0);
        for slot in 0..=10 {
            assert_eq!(&s.values[slot * 128..(slot + 1) * 128], &f[0].coeffs[..]);
        }
        for slot in 11..21 {
            assert_eq!(&s.values[slot * 128..(slot + 1) * 128], &f[slot - 10].coeffs[..]);
        }
    }

    #[test]
    fn right_edge_replicates_last_frame() {
        let f = frames(30, |i| i == 25);
        let s = &stack_context(&f, 10, "a").unwrap()[0];
        for slot in 0..21 {
            let src = (25 + slot - 10).min(29);
            assert_eq!(&s.values[slot * 128..(slot + 1) * 128], &f[src].coeffs[..]);
        }
    }

    #[test]
    fn center_slot_holds_center_frame() {
        let f = frames(40, |i| i % 3 == 0);
        for s in stack_context(&f, 10, "a").unwrap() {
            assert_eq!(&s.values[1280..1408], &f[s.center_index].coeffs[..]);
        }
    }

    #[test]
    fn silence_only_yields_nothing() {
        assert!(stack_context(&frames(30, |_| false), 10, "a").unwrap().is_empty());
        assert!(stack_context(&[], 10, "a").is_err());
    }

    #[test]
    fn norm_of_symmetric_pair() {
        let v = [1.0, -2.0, 4.0];
        let data = Matrix::from_rows(&[v, v.map(|x| -x)]).unwrap();
        let stats = NormStats::fit(&data).unwrap();
        assert_eq!(stats.mean, vec![0.0; 3]);
        let out = apply_norm(&v, &stats).unwrap();
        for ((o, x), s) in out.iter().zip(v).zip(&stats.std) {
            assert_eq!(*o, x / s);
        }
    }

    #[test]
    fn degenerate_dimension_floors_std() {
        let data = Matrix::from_rows(&[[3.0, 1.0], [3.0, 2.0], [3.0, 5.0]]).unwrap();
        let stats = NormStats::fit(&data).unwrap();
        assert_eq!(stats.std[0], STD_FLOOR);
        assert_eq!(apply_norm(&[3.0, 1.0], &stats).unwrap()[0], 0.0);
    }

    #[test]
    fn norm_needs_two_vectors() {
        let data = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        assert!(matches!(NormStats::fit(&data), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn pooling() {
        let v = BottleneckVector { values: vec![0.2, 0.4], source_id: "a".into() };
        let w = BottleneckVector { values: vec![0.6, 0.1], source_id: "a".into() };
        assert_eq!(pool_file(&[v.clone()]).unwrap(), v.values);
        let p = pool_file(&[v.clone(), w]).unwrap();
        assert!((p[0] - 0.4).abs() < 1e-15 && (p[1] - 0.25).abs() < 1e-15);
        let copies = vec![v.clone(); 7];
        let p = pool_file(&copies).unwrap();
        for (a, b) in p.iter().zip(&v.values) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(matches!(pool_file(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn targets_follow_three_class_scheme() {
        assert_eq!(label_to_target(Label::Human).unwrap(), [1.0, 0.0, 0.0]);
        assert_eq!(label_to_target(Label::Known(1)).unwrap(), [0.0, 1.0, 0.0]);
        for n in 2..=5 {
            assert_eq!(label_to_target(Label::Known(n)).unwrap(), [0.0, 0.0, 1.0]);
        }
        assert!(label_to_target(Label::Unknown(2)).is_err());
    }
}
