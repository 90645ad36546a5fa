use rand::seq::SliceRandom;
use rand::Rng;

use super::{TransitionDataset, TransitionSchema};
use crate::error::{Error, Result};

/// Fixed-capacity FIFO store of rows; the oldest row is overwritten first.
#[derive(Debug, Clone)]
pub struct RingBuffer {
    row_dim: usize,
    capacity: usize,
    data: Vec<f32>,
    head: usize,
    len: usize,
}

impl RingBuffer {
    pub fn new(row_dim: usize, capacity: usize) -> Self {
        assert!(row_dim > 0 && capacity > 0, "ring buffer needs positive row_dim and capacity");
        Self {
            row_dim,
            capacity,
            data: Vec::new(),
            head: 0,
            len: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn row_dim(&self) -> usize {
        self.row_dim
    }

    pub fn push(&mut self, row: &[f32]) {
        assert_eq!(row.len(), self.row_dim, "row width mismatch");
        if self.data.len() < self.capacity * self.row_dim {
            self.data.extend_from_slice(row);
        } else {
            let start = self.head * self.row_dim;
            self.data[start..start + self.row_dim].copy_from_slice(row);
        }
        self.head = (self.head + 1) % self.capacity;
        self.len = (self.len + 1).min(self.capacity);
    }

    pub fn extend_from_rows(&mut self, rows: &[f32]) {
        for row in rows.chunks_exact(self.row_dim) {
            self.push(row);
        }
    }

    /// Row `i`, counted from the oldest retained row.
    pub fn get(&self, i: usize) -> &[f32] {
        assert!(i < self.len, "index {i} out of range for buffer of length {}", self.len);
        let slot = if self.len < self.capacity {
            i
        } else {
            (self.head + i) % self.capacity
        };
        &self.data[slot * self.row_dim..(slot + 1) * self.row_dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f32]> {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Appends `n` rows drawn uniformly with replacement.
    pub fn sample_into<R: Rng + ?Sized>(&self, n: usize, rng: &mut R, out: &mut Vec<f32>) {
        for _ in 0..n {
            let i = rng.random_range(0..self.len);
            out.extend_from_slice(self.get(i));
        }
    }

    pub fn to_dataset(&self, schema: TransitionSchema) -> TransitionDataset {
        let mut rows = Vec::with_capacity(self.len * self.row_dim);
        for row in self.iter() {
            rows.extend_from_slice(row);
        }
        TransitionDataset::from_parts_unchecked(schema, rows)
    }
}

/// Real and synthetic replay buffers sampled as a mixture with real fraction `ratio`.
#[derive(Debug, Clone)]
pub struct ReplayPair {
    schema: TransitionSchema,
    pub real: RingBuffer,
    pub synthetic: RingBuffer,
    ratio: f64,
}

/// Default synthetic buffer capacity.
pub const DEFAULT_SYNTHETIC_CAPACITY: usize = 1_000_000;

impl ReplayPair {
    pub fn new(
        schema: TransitionSchema,
        real_capacity: usize,
        synthetic_capacity: usize,
        ratio: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&ratio) {
            return Err(Error::invalid(format!("real ratio {ratio} outside [0, 1]")));
        }
        if real_capacity == 0 || synthetic_capacity == 0 {
            return Err(Error::invalid("buffer capacities must be positive"));
        }
        let dim = schema.row_dim();
        Ok(Self {
            schema,
            real: RingBuffer::new(dim, real_capacity),
            synthetic: RingBuffer::new(dim, synthetic_capacity),
            ratio,
        })
    }

    pub fn schema(&self) -> TransitionSchema {
        self.schema
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn set_ratio(&mut self, ratio: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&ratio) {
            return Err(Error::invalid(format!("real ratio {ratio} outside [0, 1]")));
        }
        self.ratio = ratio;
        Ok(())
    }

    /// Number of real rows in a mixed batch of `batch_size`.
    pub fn real_count(&self, batch_size: usize) -> usize {
        (self.ratio * batch_size as f64).round() as usize
    }

    /// Draws `round(ratio * batch_size)` rows uniformly from the real buffer and
    /// the rest uniformly from the synthetic buffer, then shuffles the batch.
    ///
    /// Single-source batches are not shuffled, so a ratio of 1 consumes the
    /// generator exactly like plain uniform replay from the real buffer.
    pub fn mixed_sample<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<TransitionDataset> {
        let n_real = self.real_count(batch_size);
        let n_syn = batch_size - n_real;
        if n_real > 0 && self.real.is_empty() {
            return Err(Error::UnavailableData("real buffer is empty".into()));
        }
        if n_syn > 0 && self.synthetic.is_empty() {
            return Err(Error::UnavailableData("synthetic buffer is empty".into()));
        }
        let dim = self.schema.row_dim();
        let mut rows = Vec::with_capacity(batch_size * dim);
        self.real.sample_into(n_real, rng, &mut rows);
        self.synthetic.sample_into(n_syn, rng, &mut rows);
        if n_real > 0 && n_syn > 0 {
            let mut order: Vec<usize> = (0..batch_size).collect();
            order.shuffle(rng);
            let mut shuffled = Vec::with_capacity(rows.len());
            for i in order {
                shuffled.extend_from_slice(&rows[i * dim..(i + 1) * dim]);
            }
            rows = shuffled;
        }
        Ok(TransitionDataset::from_parts_unchecked(self.schema, rows))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    fn schema() -> TransitionSchema {
        TransitionSchema::new(1, 1, false).unwrap()
    }

    #[test]
    fn ring_eviction() {
        let mut b = RingBuffer::new(1, 3);
        for i in 0..5 {
            b.push(&[i as f32]);
        }
        assert_eq!(b.len(), 3);
        let kept: Vec<f32> = b.iter().map(|r| r[0]).collect();
        assert_eq!(kept, vec![2.0, 3.0, 4.0]);
    }

    proptest! {
        #[test]
        fn ring_keeps_newest(cap in 1usize..50, extra in 0usize..80) {
            let mut b = RingBuffer::new(2, cap);
            for i in 0..cap + extra {
                b.push(&[i as f32, -(i as f32)]);
            }
            prop_assert_eq!(b.len(), cap);
            let kept: Vec<usize> = b.iter().map(|r| r[0] as usize).collect();
            prop_assert_eq!(kept, (extra..cap + extra).collect::<Vec<_>>());
        }
    }

    fn filled_pair(ratio: f64) -> ReplayPair {
        let s = schema();
        let mut p = ReplayPair::new(s, 100, 100, ratio).unwrap();
        for i in 0..50 {
            // real rows are tagged with reward +1, synthetic with -1
            p.real.push(&[i as f32, 0.0, 1.0, 0.0]);
            p.synthetic.push(&[i as f32, 0.0, -1.0, 0.0]);
        }
        p
    }

    #[test]
    fn mixture_composition() {
        let mut rng = rng::seeded(3);
        for (ratio, batch) in [(0.0, 256), (0.25, 256), (0.5, 256), (1.0, 256), (0.25, 7), (0.5, 1)] {
            let p = filled_pair(ratio);
            let b = p.mixed_sample(batch, &mut rng).unwrap();
            assert_eq!(b.count(), batch);
            let real = b.rows().filter(|r| r[2] > 0.0).count();
            assert_eq!(real, (ratio * batch as f64).round() as usize, "ratio {ratio}");
        }
        assert_eq!(filled_pair(0.5).real_count(256), 128);
    }

    #[test]
    fn mixture_is_shuffled() {
        let p = filled_pair(0.5);
        let b = p.mixed_sample(256, &mut rng::seeded(1)).unwrap();
        let first_half_real = b.rows().take(128).filter(|r| r[2] > 0.0).count();
        assert!(first_half_real > 30 && first_half_real < 98);
    }

    #[test]
    fn empty_buffer_errors() {
        let s = schema();
        let mut p = ReplayPair::new(s, 10, 10, 0.5).unwrap();
        p.real.push(&[0.0; 4]);
        assert!(matches!(
            p.mixed_sample(8, &mut rng::seeded(0)),
            Err(Error::UnavailableData(_))
        ));
        p.set_ratio(1.0).unwrap();
        assert!(p.mixed_sample(8, &mut rng::seeded(0)).is_ok());
        assert!(ReplayPair::new(s, 10, 10, 1.5).is_err());
    }

    #[test]
    fn full_ratio_matches_plain_replay() {
        let p = filled_pair(1.0);
        let a = p.mixed_sample(64, &mut rng::seeded(11)).unwrap();
        let mut plain = Vec::new();
        p.real.sample_into(64, &mut rng::seeded(11), &mut plain);
        assert_eq!(a.as_slice(), &plain[..]);
    }
}
