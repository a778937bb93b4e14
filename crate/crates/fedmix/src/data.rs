//! LibSVM-format parsing, row normalization and device partitioning.
//!
//! Lines have the form `<label> <idx>:<val> ...` with strictly increasing
//! 1-based feature indices. Labels are mapped to {-1,+1} (a {0,1} source maps
//! 0 to -1). Partitioning is either homogeneous (seeded reshuffle, then
//! contiguous chunks) or heterogeneous (stable sort by label, then chunks);
//! both drop the `N mod n` trailing rows so every device owns exactly
//! `m = floor(N/n)` rows.

use std::io::BufRead;

use log::warn;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::losses::{DeviceFiniteSum, LossComponent, SparseRow};
use crate::objective::MixtureProblem;

/// Sparse rows with {-1,+1} labels; `d` is the largest feature index seen.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub rows: Vec<SparseRow>,
    pub labels: Vec<f64>,
    pub d: usize,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// How rows are assigned to devices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    Homogeneous,
    Heterogeneous,
}

impl std::str::FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "homogeneous" | "homo" => Ok(SplitMode::Homogeneous),
            "heterogeneous" | "hetero" => Ok(SplitMode::Heterogeneous),
            other => Err(Error::invalid("split mode", format!("unknown mode `{other}`"))),
        }
    }
}

/// Assignment of rows to devices: `assignment[i]` lists the dataset row
/// indices owned by device i, each of length exactly `m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub assignment: Vec<Vec<usize>>,
    pub m: usize,
    pub dropped: usize,
}

impl Partition {
    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    /// Manifest lines `device_id<TAB>row_index`, devices in order.
    pub fn manifest(&self) -> String {
        let mut out = String::new();
        for (dev, rows) in self.assignment.iter().enumerate() {
            for r in rows {
                out.push_str(&format!("{dev}\t{r}\n"));
            }
        }
        out
    }
}

/// Parses LibSVM text. Reports the 1-based line number of the first
/// malformed line; an input without any data rows is an error.
pub fn parse_libsvm<R: BufRead>(reader: R) -> Result<LabeledDataset> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut d = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut tokens = trimmed.split_ascii_whitespace();
        let label_tok = tokens.next().expect("nonempty line has a first token");
        let label = match label_tok {
            "+1" | "1" | "1.0" | "+1.0" => 1.0,
            "-1" | "-1.0" => -1.0,
            "0" | "0.0" => -1.0,
            other => {
                return Err(Error::Parse {
                    line: lineno,
                    reason: format!("label `{other}` is not in {{-1,0,+1}}"),
                })
            }
        };
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut prev: u64 = 0;
        for tok in tokens {
            let (idx_s, val_s) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno,
                reason: format!("feature `{tok}` is not idx:val"),
            })?;
            let idx: u64 = idx_s.parse().map_err(|_| Error::Parse {
                line: lineno,
                reason: format!("bad feature index `{idx_s}`"),
            })?;
            let val: f64 = val_s.parse().map_err(|_| Error::Parse {
                line: lineno,
                reason: format!("bad feature value `{val_s}`"),
            })?;
            if idx == 0 {
                return Err(Error::Parse { line: lineno, reason: "feature indices are 1-based".into() });
            }
            if idx <= prev {
                return Err(Error::Parse {
                    line: lineno,
                    reason: format!("indices not strictly increasing at `{tok}`"),
                });
            }
            if !val.is_finite() {
                return Err(Error::Parse { line: lineno, reason: format!("non-finite value `{val_s}`") });
            }
            prev = idx;
            indices.push((idx - 1) as u32);
            values.push(val);
        }
        d = d.max(prev as usize);
        rows.push(SparseRow::new(indices, values));
        labels.push(label);
    }
    if rows.is_empty() {
        return Err(Error::NoData);
    }
    Ok(LabeledDataset { rows, labels, d })
}

/// Rows flagged untouched by [`normalize_rows`].
#[derive(Debug, Clone, Default)]
pub struct NormalizeReport {
    pub zero_rows: Vec<usize>,
}

/// Scales every nonzero row to Euclidean norm `2 sqrt(target)`, so the
/// logistic component smoothness `||a||^2 / 4` equals `target`. Zero rows
/// pass through unchanged and are listed in the report.
pub fn normalize_rows(ds: &mut LabeledDataset, target_smoothness: f64) -> Result<NormalizeReport> {
    if !(target_smoothness > 0.0) {
        return Err(Error::invalid("target_smoothness", "must be positive"));
    }
    let target_norm = 2.0 * target_smoothness.sqrt();
    let mut report = NormalizeReport::default();
    for (i, row) in ds.rows.iter_mut().enumerate() {
        let norm = row.norm();
        if norm == 0.0 {
            report.zero_rows.push(i);
        } else {
            row.scale(target_norm / norm);
        }
    }
    if !report.zero_rows.is_empty() {
        warn!("{} zero rows left unnormalized", report.zero_rows.len());
    }
    Ok(report)
}

/// Splits `N` rows across `n` devices with `m = floor(N/n)` rows each.
/// Homogeneous: seeded Fisher-Yates shuffle, then contiguous chunks.
/// Heterogeneous: stable sort by label (-1 before +1), then chunks.
/// Trailing `N - n*m` rows are dropped and the count recorded.
pub fn split(ds: &LabeledDataset, n: usize, mode: SplitMode, seed: u64) -> Result<Partition> {
    let total = ds.len();
    if n == 0 {
        return Err(Error::invalid("n", "device count must be positive"));
    }
    if n > total {
        return Err(Error::invalid("n", format!("{n} devices but only {total} rows")));
    }
    let mut order: Vec<usize> = (0..total).collect();
    match mode {
        SplitMode::Homogeneous => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // Fisher-Yates
            for i in (1..total).rev() {
                let j = rng.gen_range(0..=i);
                order.swap(i, j);
            }
        }
        SplitMode::Heterogeneous => {
            order.sort_by_key(|&i| if ds.labels[i] < 0.0 { 0u8 } else { 1u8 });
        }
    }
    let m = total / n;
    let dropped = total - n * m;
    if dropped > 0 {
        warn!("dropping {dropped} trailing rows so every device owns exactly {m}");
    }
    let assignment: Vec<Vec<usize>> = (0..n).map(|i| order[i * m..(i + 1) * m].to_vec()).collect();
    Ok(Partition { assignment, m, dropped })
}

/// Assembles the mixture problem over a partitioned dataset: device i owns
/// the logistic losses of its assigned rows, each carrying the ridge share
/// `mu`, so the device objective is `(1/m) sum_j log(1+exp(b_j <a_j, z>)) +
/// (mu/2)||z||^2`.
pub fn build_problem(
    ds: &LabeledDataset,
    partition: &Partition,
    lambda: f64,
    mu: f64,
) -> Result<MixtureProblem> {
    let d = ds.d;
    let devices = partition
        .assignment
        .iter()
        .map(|rows| {
            let comps: Vec<LossComponent> = rows
                .iter()
                .map(|&r| LossComponent::Logistic { row: ds.rows[r].clone(), label: ds.labels[r] })
                .collect();
            DeviceFiniteSum::new(d, comps, mu)
        })
        .collect::<Result<Vec<_>>>()?;
    MixtureProblem::new(lambda, devices)
}
