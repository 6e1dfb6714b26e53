use crate::error::{Error, Result};
use crate::ndcore::{Matrix, Scalar};

/// Mini-batch of utterances padded to a common length. Padded rows are never
/// read: compute paths strip them with [`SequenceBatch::valid_frames`], so
/// loss, gradients and metrics are invariant to whatever the padding holds.
#[derive(Debug, Clone)]
pub struct SequenceBatch<F> {
    frames: Vec<Matrix<F>>,
    lengths: Vec<usize>,
    labels: Vec<usize>,
    subjects: Vec<u32>,
}

impl<F: Scalar> SequenceBatch<F> {
    pub fn new(items: Vec<(Matrix<F>, usize, u32)>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let dim = items[0].0.cols();
        if items.iter().any(|(m, _, _)| m.cols() != dim) {
            return Err(Error::invalid("utterances in a batch must share feature dim"));
        }
        if items.iter().any(|(m, _, _)| m.rows() == 0) {
            return Err(Error::invalid("zero-length utterance in batch"));
        }
        let max_len = items.iter().map(|(m, _, _)| m.rows()).max().unwrap();
        let mut frames = Vec::with_capacity(items.len());
        let mut lengths = Vec::with_capacity(items.len());
        let mut labels = Vec::with_capacity(items.len());
        let mut subjects = Vec::with_capacity(items.len());
        for (m, label, subject) in items {
            lengths.push(m.rows());
            labels.push(label);
            subjects.push(subject);
            let mut padded = Matrix::zeros(max_len, dim);
            for t in 0..m.rows() {
                padded.row_mut(t).copy_from_slice(m.row(t));
            }
            frames.push(padded);
        }
        Ok(SequenceBatch {
            frames,
            lengths,
            labels,
            subjects,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn length(&self, i: usize) -> usize {
        self.lengths[i]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn subject(&self, i: usize) -> u32 {
        self.subjects[i]
    }

    /// Valid frames of utterance `i` with padding stripped.
    pub fn valid_frames(&self, i: usize) -> Matrix<F> {
        self.frames[i].top_rows(self.lengths[i])
    }

    /// Per-frame validity flags for utterance `i`.
    pub fn mask(&self, i: usize) -> Vec<bool> {
        let max_len = self.frames[i].rows();
        (0..max_len).map(|t| t < self.lengths[i]).collect()
    }

    /// Raw padded storage, exposed so tests can poke padding bytes.
    pub fn padded_mut(&mut self, i: usize) -> &mut Matrix<F> {
        &mut self.frames[i]
    }
}
