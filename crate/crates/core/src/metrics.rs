//! Synthetic-data fidelity: marginal KS complement, correlation similarity,
//! nearest-neighbour diversity, dynamics error against a ground-truth oracle
//! and compression accounting.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;

use crate::data::{Normalizer, TransitionDataset};
use crate::envs::EnvOracle;
use crate::error::{Error, Result};

/// Per-side sample cap used by [`MetricReport::compute`] by default.
pub const DEFAULT_MAX_SAMPLES: usize = 100_000;

/// Which correlation coefficient [`correlation_score`] compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorrelationKind {
    #[default]
    Pearson,
    Spearman,
}

impl CorrelationKind {
    pub fn name(&self) -> &'static str {
        match self {
            CorrelationKind::Pearson => "pearson",
            CorrelationKind::Spearman => "spearman",
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "pearson" => Ok(CorrelationKind::Pearson),
            "spearman" => Ok(CorrelationKind::Spearman),
            other => Err(Error::Config(format!("unknown correlation kind {other:?}"))),
        }
    }
}

fn check_same_schema(a: &TransitionDataset, b: &TransitionDataset) -> Result<()> {
    if a.schema() != b.schema() {
        return Err(Error::invalid(format!(
            "schema mismatch: {:?} vs {:?}",
            a.schema(),
            b.schema()
        )));
    }
    Ok(())
}

fn column_f64(d: &TransitionDataset, j: usize) -> Vec<f64> {
    d.rows().map(|r| f64::from(r[j])).collect()
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a − F_b|`.
///
/// Both empirical CDFs are compared after each distinct value has been fully
/// consumed, so ties across samples are handled exactly.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = if a[i].total_cmp(&b[j]) == Ordering::Greater { b[j] } else { a[i] };
        while i < a.len() && a[i] == v {
            i += 1;
        }
        while j < b.len() && b[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Per-dimension KS complements; the terminal column uses `1 − TV` of the two
/// Bernoulli frequencies.
pub fn marginal_scores(real: &TransitionDataset, synth: &TransitionDataset) -> Result<Vec<f64>> {
    check_same_schema(real, synth)?;
    if real.count() < 2 || synth.count() < 2 {
        return Err(Error::invalid("marginal score needs at least 2 rows per side"));
    }
    let term = real.schema().terminal_index();
    Ok((0..real.row_dim())
        .into_par_iter()
        .map(|j| {
            let a = column_f64(real, j);
            let b = column_f64(synth, j);
            if Some(j) == term {
                let pa = a.iter().sum::<f64>() / a.len() as f64;
                let pb = b.iter().sum::<f64>() / b.len() as f64;
                1.0 - (pa - pb).abs()
            } else {
                1.0 - ks_statistic(&a, &b)
            }
        })
        .collect())
}

pub fn marginal_score(real: &TransitionDataset, synth: &TransitionDataset) -> Result<f64> {
    Ok(mean(&marginal_scores(real, synth)?))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Average ranks (ties share the mean of their positions), 1-based.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut k = i;
        while k + 1 < idx.len() && v[idx[k + 1]] == v[idx[i]] {
            k += 1;
        }
        let r = (i + k) as f64 / 2.0 + 1.0;
        for &p in &idx[i..=k] {
            out[p] = r;
        }
        i = k + 1;
    }
    out
}

struct Centered {
    values: Vec<f64>,
    norm: f64,
}

fn center(v: Vec<f64>) -> Centered {
    let m = mean(&v);
    let values: Vec<f64> = v.into_iter().map(|x| x - m).collect();
    let norm = values.iter().map(|x| x * x).sum::<f64>().sqrt();
    Centered { values, norm }
}

fn columns(d: &TransitionDataset, kind: CorrelationKind) -> Vec<Centered> {
    (0..d.row_dim())
        .map(|j| {
            let c = column_f64(d, j);
            center(match kind {
                CorrelationKind::Pearson => c,
                CorrelationKind::Spearman => ranks(&c),
            })
        })
        .collect()
}

fn corr(a: &Centered, b: &Centered) -> f64 {
    if a.norm == 0.0 || b.norm == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    (dot / (a.norm * b.norm)).clamp(-1.0, 1.0)
}

/// Similarity `1 − |ρ_real − ρ_synth| / 2` of one column pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairScore {
    pub i: usize,
    pub j: usize,
    pub real: f64,
    pub synth: f64,
    pub score: f64,
}

/// Per-pair correlation similarities over columns that vary in the real data.
///
/// A column that is constant in the synthetic data only is given correlation 0
/// there rather than being dropped, so a collapsed generator is penalized.
pub fn correlation_pairs(
    real: &TransitionDataset,
    synth: &TransitionDataset,
    kind: CorrelationKind,
) -> Result<Vec<PairScore>> {
    check_same_schema(real, synth)?;
    if real.count() < 3 || synth.count() < 3 {
        return Err(Error::invalid("correlation score needs at least 3 rows per side"));
    }
    if real.row_dim() < 2 {
        return Err(Error::invalid("correlation score needs at least 2 columns"));
    }
    let (cr, cs) = rayon::join(|| columns(real, kind), || columns(synth, kind));
    let live: Vec<usize> = (0..cr.len()).filter(|&j| cr[j].norm > 0.0).collect();
    if live.len() < 2 {
        return Err(Error::UndefinedMetric(format!(
            "only {} non-constant column(s) in the real data",
            live.len()
        )));
    }
    let pairs: Vec<(usize, usize)> = live
        .iter()
        .enumerate()
        .flat_map(|(k, &i)| live[k + 1..].iter().map(move |&j| (i, j)))
        .collect();
    Ok(pairs
        .into_par_iter()
        .map(|(i, j)| {
            let real = corr(&cr[i], &cr[j]);
            let synth = corr(&cs[i], &cs[j]);
            PairScore { i, j, real, synth, score: 1.0 - (real - synth).abs() / 2.0 }
        })
        .collect())
}

pub fn correlation_score(
    real: &TransitionDataset,
    synth: &TransitionDataset,
    kind: CorrelationKind,
) -> Result<f64> {
    let p = correlation_pairs(real, synth, kind)?;
    Ok(p.iter().map(|s| s.score).sum::<f64>() / p.len() as f64)
}

/// Aggregate fidelity of a synthetic dataset against real data.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub marginal: f64,
    pub correlation: f64,
    pub correlation_kind: CorrelationKind,
    pub per_dim_marginal: Vec<f64>,
    pub pairs: Vec<PairScore>,
    pub real_count: usize,
    pub synth_count: usize,
}

impl MetricReport {
    /// Scores at most `max_samples` uniformly drawn rows from each side.
    pub fn compute(
        real: &TransitionDataset,
        synth: &TransitionDataset,
        kind: CorrelationKind,
        max_samples: usize,
        seed: u64,
    ) -> Result<Self> {
        let cap = |d: &TransitionDataset, salt| {
            if d.count() > max_samples {
                d.take_random(max_samples, crate::rng::derive_seed(seed, salt))
            } else {
                d.clone()
            }
        };
        let (real, synth) = (cap(real, 1), cap(synth, 2));
        let per_dim_marginal = marginal_scores(&real, &synth)?;
        let pairs = correlation_pairs(&real, &synth, kind)?;
        Ok(Self {
            marginal: mean(&per_dim_marginal),
            correlation: pairs.iter().map(|p| p.score).sum::<f64>() / pairs.len() as f64,
            correlation_kind: kind,
            per_dim_marginal,
            pairs,
            real_count: real.count(),
            synth_count: synth.count(),
        })
    }

    /// Flat `key=value` summary.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "marginal={}", self.marginal);
        let _ = writeln!(s, "correlation={}", self.correlation);
        let _ = writeln!(s, "correlation_kind={}", self.correlation_kind.name());
        let _ = writeln!(s, "real_count={}", self.real_count);
        let _ = writeln!(s, "synth_count={}", self.synth_count);
        s
    }

    /// Per-item CSV: `metric,i,j,real,synth,score`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["metric", "i", "j", "real", "synth", "score"])?;
        for (d, s) in self.per_dim_marginal.iter().enumerate() {
            csv.write_record(["marginal", &d.to_string(), "", "", "", &s.to_string()])?;
        }
        for p in &self.pairs {
            csv.write_record([
                "correlation",
                &p.i.to_string(),
                &p.j.to_string(),
                &p.real.to_string(),
                &p.synth.to_string(),
                &p.score.to_string(),
            ])?;
        }
        csv.flush()?;
        Ok(())
    }
}

/// Nearest-neighbour search mode for [`min_l2_distances`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighborMode {
    Exact,
    /// Search a uniform subsample of this many real rows.
    Subsampled { rows: usize, seed: u64 },
}

/// Distance from each synthetic row to its nearest real row, in the space
/// normalized by `normalizer`.
pub fn min_l2_distances(
    synth: &TransitionDataset,
    real: &TransitionDataset,
    normalizer: &Normalizer,
    mode: NeighborMode,
) -> Result<Vec<f64>> {
    check_same_schema(real, synth)?;
    if real.is_empty() {
        return Err(Error::invalid("min-L2 needs a non-empty real dataset"));
    }
    let real = match mode {
        NeighborMode::Exact => real.clone(),
        NeighborMode::Subsampled { rows, seed } => {
            if rows == 0 {
                return Err(Error::invalid("subsample size must be at least 1"));
            }
            real.take_random(rows.min(real.count()), seed)
        }
    };
    if normalizer.dim() != real.row_dim() {
        return Err(Error::invalid("normalizer width does not match the datasets"));
    }
    let (mu, sd, mask) = (normalizer.mean(), normalizer.std(), normalizer.terminal_mask());
    let to_f64 = |d: &TransitionDataset| -> Vec<f64> {
        d.rows()
            .flat_map(|row| {
                row.iter().enumerate().map(|(j, &v)| {
                    if mask[j] {
                        f64::from(v)
                    } else {
                        (f64::from(v) - mu[j]) / sd[j]
                    }
                })
            })
            .collect()
    };
    let dim = real.row_dim();
    let r = to_f64(&real);
    let s = to_f64(synth);
    Ok(s.par_chunks_exact(dim)
        .map(|x| {
            r.chunks_exact(dim)
                .map(|y| x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect())
}

/// Dynamics error of each row against the ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsReport {
    /// Squared error averaged over `[s', r]`; `None` where the oracle rejected
    /// the row's state.
    pub per_row: Vec<Option<f64>>,
    pub excluded: usize,
}

impl DynamicsReport {
    pub fn valid(&self) -> impl Iterator<Item = f64> + '_ {
        self.per_row.iter().flatten().copied()
    }

    pub fn mean(&self) -> Option<f64> {
        let n = self.per_row.len() - self.excluded;
        (n > 0).then(|| self.valid().sum::<f64>() / n as f64)
    }

    pub fn median(&self) -> Option<f64> {
        median(&self.valid().collect::<Vec<_>>())
    }
}

/// Mean squared deviation of each row's `(s', r)` from `oracle.step(s, a)`,
/// in raw units.
pub fn dynamics_mse(synth: &TransitionDataset, oracle: &dyn EnvOracle) -> Result<DynamicsReport> {
    let schema = synth.schema();
    if oracle.spec().schema() != schema {
        return Err(Error::invalid(format!(
            "dataset schema {schema:?} does not match environment {}",
            oracle.spec().name
        )));
    }
    let per_row: Vec<Option<f64>> = synth
        .as_slice()
        .par_chunks_exact(schema.row_dim())
        .map(|row| -> Result<Option<f64>> {
            match oracle.oracle_step(&row[schema.state_range()], &row[schema.action_range()]) {
                Ok(truth) => {
                    let ns = &row[schema.next_state_range()];
                    let sq: f64 = ns
                        .iter()
                        .zip(&truth.next_obs)
                        .chain(std::iter::once((&row[schema.reward_index()], &truth.reward)))
                        .map(|(a, b)| (f64::from(*a) - f64::from(*b)).powi(2))
                        .sum();
                    Ok(Some(sq / (ns.len() + 1) as f64))
                }
                Err(Error::InvalidDomain(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let excluded = per_row.iter().filter(|v| v.is_none()).count();
    Ok(DynamicsReport { per_row, excluded })
}

pub fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    Some(if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) })
}

/// Writes the per-row `(min_l2, dynamics_mse)` scatter as CSV; excluded rows
/// have an empty MSE field.
pub fn write_scatter_csv<W: Write>(w: W, distances: &[f64], dynamics: &DynamicsReport) -> Result<()> {
    if distances.len() != dynamics.per_row.len() {
        return Err(Error::invalid("distance and dynamics row counts differ"));
    }
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["row", "min_l2", "dynamics_mse"])?;
    for (i, (d, m)) in distances.iter().zip(&dynamics.per_row).enumerate() {
        csv.write_record([i.to_string(), d.to_string(), m.map(|v| v.to_string()).unwrap_or_default()])?;
    }
    csv.flush()?;
    Ok(())
}

/// Stored floats per model parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompressionReport {
    pub floats: f64,
    pub params: f64,
    pub ratio: f64,
}

impl CompressionReport {
    pub fn new(floats: f64, params: f64) -> Result<Self> {
        if !(floats >= 0.0 && params > 0.0 && floats.is_finite() && params.is_finite()) {
            return Err(Error::invalid("compression needs finite counts and a positive parameter count"));
        }
        Ok(Self { floats, params, ratio: floats / params })
    }

    pub fn for_dataset(dataset: &TransitionDataset, param_count: usize) -> Result<Self> {
        Self::new((dataset.count() * dataset.row_dim()) as f64, param_count as f64)
    }

    /// Ratio to one decimal, e.g. `12.9×`.
    pub fn formatted(&self) -> String {
        format!("{:.1}×", self.ratio)
    }
}
