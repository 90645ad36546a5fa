use rand::seq::index;

use super::TransitionSchema;
use crate::error::{Error, Result};
use crate::rng;

/// An immutable, row-major table of flattened transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionDataset {
    schema: TransitionSchema,
    rows: Vec<f32>,
}

impl TransitionDataset {
    /// Builds a dataset, checking the shape, finiteness and terminal values.
    pub fn new(schema: TransitionSchema, rows: Vec<f32>) -> Result<Self> {
        let dim = schema.row_dim();
        if !rows.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "row payload of {} values is not a multiple of row_dim {dim}",
                rows.len()
            )));
        }
        if let Some(pos) = rows.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value at row {}, column {}",
                pos / dim,
                pos % dim
            )));
        }
        if let Some(t) = schema.terminal_index() {
            if let Some(row) = rows.chunks_exact(dim).position(|r| r[t] != 0.0 && r[t] != 1.0) {
                return Err(Error::invalid(format!(
                    "terminal value {} at row {row} is not 0 or 1",
                    rows[row * dim + t]
                )));
            }
        }
        Ok(Self { schema, rows })
    }

    pub(crate) fn from_parts_unchecked(schema: TransitionSchema, rows: Vec<f32>) -> Self {
        debug_assert_eq!(rows.len() % schema.row_dim(), 0);
        Self { schema, rows }
    }

    pub fn empty(schema: TransitionSchema) -> Self {
        Self {
            schema,
            rows: Vec::new(),
        }
    }

    pub fn schema(&self) -> TransitionSchema {
        self.schema
    }

    pub fn count(&self) -> usize {
        self.rows.len() / self.schema.row_dim()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row_dim(&self) -> usize {
        self.schema.row_dim()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let d = self.row_dim();
        &self.rows[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> {
        self.rows.chunks_exact(self.row_dim())
    }

    /// Flat row-major payload.
    pub fn as_slice(&self) -> &[f32] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<f32> {
        self.rows
    }

    /// Values of column `col` across all rows.
    pub fn column(&self, col: usize) -> Vec<f32> {
        self.rows().map(|r| r[col]).collect()
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let d = self.row_dim();
        let mut rows = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            rows.extend_from_slice(self.row(i));
        }
        Self::from_parts_unchecked(self.schema, rows)
    }

    /// Concatenates two datasets with the same schema.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.schema != other.schema {
            return Err(Error::invalid("cannot concatenate datasets with different schemas"));
        }
        let mut rows = self.rows.clone();
        rows.extend_from_slice(&other.rows);
        Ok(Self::from_parts_unchecked(self.schema, rows))
    }

    /// Splits off the first `n` rows and returns `(head, tail)`.
    pub fn split_at(&self, n: usize) -> (Self, Self) {
        let n = n.min(self.count()) * self.row_dim();
        (
            Self::from_parts_unchecked(self.schema, self.rows[..n].to_vec()),
            Self::from_parts_unchecked(self.schema, self.rows[n..].to_vec()),
        )
    }

    /// Uniform subsample without replacement of `round(fraction * count)` rows.
    ///
    /// Rows come back in draw order, so `fraction = 1.0` yields a permutation.
    pub fn subsample(&self, fraction: f64, seed: u64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::invalid(format!("subsample fraction {fraction} outside (0, 1]")));
        }
        let n = (fraction * self.count() as f64).round() as usize;
        if n == 0 {
            return Err(Error::invalid(format!(
                "fraction {fraction} of {} rows selects no rows",
                self.count()
            )));
        }
        Ok(self.take_random(n, seed))
    }

    /// Uniform sample without replacement of `min(n, count)` rows.
    pub fn take_random(&self, n: usize, seed: u64) -> Self {
        let n = n.min(self.count());
        let mut rng = rng::seeded(seed);
        let picked = index::sample(&mut rng, self.count(), n).into_vec();
        self.select(&picked)
    }
}

/// Rounds the terminal column of raw rows to {0, 1}; ties at 0.5 go to 1.
pub fn threshold_terminals(schema: &TransitionSchema, rows: &mut [f32]) {
    let Some(t) = schema.terminal_index() else {
        return;
    };
    for row in rows.chunks_exact_mut(schema.row_dim()) {
        row[t] = if row[t] >= 0.5 { 1.0 } else { 0.0 };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn schema() -> TransitionSchema {
        TransitionSchema::new(2, 1, true).unwrap()
    }

    fn numbered(count: usize) -> TransitionDataset {
        let s = schema();
        let mut rows = Vec::new();
        for i in 0..count {
            let mut r = vec![i as f32; s.row_dim()];
            r[s.terminal_index().unwrap()] = (i % 2) as f32;
            rows.extend(r);
        }
        TransitionDataset::new(s, rows).unwrap()
    }

    #[test]
    fn rejects_bad_rows() {
        let s = schema();
        assert!(TransitionDataset::new(s, vec![0.0; 5]).is_err());
        let mut rows = vec![0.0; 7];
        rows[6] = 0.5;
        assert!(TransitionDataset::new(s, rows).is_err());
        let mut rows = vec![0.0; 7];
        rows[2] = f32::NAN;
        assert!(TransitionDataset::new(s, rows).is_err());
        assert_eq!(TransitionDataset::new(s, vec![]).unwrap().count(), 0);
    }

    #[test]
    fn threshold_rule() {
        let s = schema();
        let mut rows = vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.7, 9.0, 9.0, 9.0, 9.0, 9.0, 9.0, 0.3];
        rows.extend([1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.5]);
        threshold_terminals(&s, &mut rows);
        assert_eq!(rows[6], 1.0);
        assert_eq!(rows[13], 0.0);
        assert_eq!(rows[20], 1.0);
        assert_eq!(rows[7], 9.0);

        let before = rows.clone();
        threshold_terminals(&s, &mut rows);
        assert_eq!(before, rows);
    }

    #[test]
    fn subsample_counts() {
        let d = numbered(100_000);
        assert_eq!(d.subsample(0.15, 1).unwrap().count(), 15_000);
        assert_eq!(d.subsample(0.03, 1).unwrap().count(), 3_000);
        assert!(d.subsample(0.0, 1).is_err());
        assert!(d.subsample(1.5, 1).is_err());
        assert!(numbered(10).subsample(0.01, 1).is_err());
    }

    #[test]
    fn full_fraction_is_permutation() {
        let d = numbered(500);
        let p = d.subsample(1.0, 9).unwrap();
        let mut ids: Vec<u32> = p.rows().map(|r| r[0] as u32).collect();
        ids.sort_unstable();
        assert_eq!(ids, (0..500).collect::<Vec<_>>());
    }

    proptest! {
        #[test]
        fn subsample_deterministic_and_unique(count in 1usize..400, frac in 0.01f64..=1.0, seed: u64) {
            let d = numbered(count);
            let n = (frac * count as f64).round() as usize;
            prop_assume!(n >= 1);
            let a = d.subsample(frac, seed).unwrap();
            let b = d.subsample(frac, seed).unwrap();
            prop_assert_eq!(&a, &b);
            let mut ids: Vec<u32> = a.rows().map(|r| r[0] as u32).collect();
            ids.sort_unstable();
            ids.dedup();
            prop_assert_eq!(ids.len(), n);
        }
    }
}
