//! Selection-count depth. Every MOM descent step trains on one median block;
//! points that are never part of it are the ones the estimator keeps pushing
//! to the tails, which is where planted outliers end up.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{check_dim, MomError, Result};
use crate::optim::TrainTrace;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionCounts {
    /// `counts[i] = #{t : i in B_med(t)}`.
    pub counts: Vec<u64>,
    pub iterations: usize,
    /// Size of the selected block, `floor(N/K)`.
    pub block_size: usize,
}

impl SelectionCounts {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Indices ordered by increasing count, ties by index.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.counts.len()).collect();
        idx.sort_by_key(|&i| (self.counts[i], i));
        idx
    }

    /// 1-based competition rank of every sample: one plus the number of
    /// samples with a strictly smaller count, so equal counts share a rank.
    pub fn ranks(&self) -> Vec<usize> {
        let mut sorted = self.counts.clone();
        sorted.sort_unstable();
        self.counts
            .iter()
            .map(|c| 1 + sorted.partition_point(|s| s < c))
            .collect()
    }

    /// CSV with columns `index,count[,is_outlier]`.
    pub fn write_csv<W: Write>(&self, w: W, flags: Option<&[bool]>) -> Result<()> {
        if let Some(f) = flags {
            check_dim(self.counts.len(), f.len())?;
        }
        let mut out = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| MomError::io("<counts>", std::io::Error::other(e));
        let mut header = vec!["index", "count"];
        if flags.is_some() {
            header.push("is_outlier");
        }
        out.write_record(&header).map_err(csv_err)?;
        for (i, c) in self.counts.iter().enumerate() {
            let mut row = vec![i.to_string(), c.to_string()];
            if let Some(f) = flags {
                row.push(u8::from(f[i]).to_string());
            }
            out.write_record(&row).map_err(csv_err)?;
        }
        out.flush().map_err(|e| MomError::io("<counts>", e))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, flags: Option<&[bool]>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| MomError::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file), flags)
    }
}

/// Tallies median-block membership over a recorded trace of `n` samples.
pub fn selection_counts(trace: &TrainTrace, n: usize) -> Result<SelectionCounts> {
    let records = trace
        .selections
        .as_ref()
        .ok_or_else(|| MomError::argument("trace did not record median-block selections"))?;
    let mut counts = vec![0u64; n];
    let mut block_size = 0;
    for rec in records {
        block_size = rec.members.len();
        for &i in &rec.members {
            if i >= n {
                return Err(MomError::argument(format!(
                    "step {} selects index {i} but the dataset has {n} samples",
                    rec.t
                )));
            }
            counts[i] += 1;
        }
    }
    Ok(SelectionCounts {
        counts,
        iterations: records.len(),
        block_size,
    })
}

/// `{i : counts[i] < threshold}`, in increasing index order.
pub fn flag_outliers(sc: &SelectionCounts, threshold: u64) -> Vec<usize> {
    (0..sc.counts.len())
        .filter(|&i| sc.counts[i] < threshold)
        .collect()
}

/// Precision and recall of `flagged` against the dataset's outlier flags.
/// An empty flagged set has precision 1.
pub fn detection_metrics(flagged: &[usize], ds: &Dataset) -> Result<(f64, f64)> {
    let truth = ds
        .outlier_flags()
        .ok_or_else(|| MomError::argument("dataset carries no is_outlier ground truth"))?;
    if let Some(&bad) = flagged.iter().find(|&&i| i >= truth.len()) {
        return Err(MomError::argument(format!(
            "flagged index {bad} out of range"
        )));
    }
    let hits = flagged.iter().filter(|&&i| truth[i]).count() as f64;
    let positives = truth.iter().filter(|&&f| f).count() as f64;
    let precision = if flagged.is_empty() {
        1.0
    } else {
        hits / flagged.len() as f64
    };
    let recall = if positives == 0.0 {
        0.0
    } else {
        hits / positives
    };
    Ok((precision, recall))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_toy, Label};
    use crate::optim::SelectionRecord;
    use crate::rng::RngSeed;
    use proptest::prelude::*;
    use rand::seq::index::sample;

    fn trace_of(steps: &[Vec<usize>]) -> TrainTrace {
        TrainTrace {
            selections: Some(
                steps
                    .iter()
                    .enumerate()
                    .map(|(t, m)| SelectionRecord {
                        t,
                        partition_seed: 0,
                        k_med: 0,
                        members: m.clone(),
                        objective: 0.0,
                    })
                    .collect(),
            ),
            ..Default::default()
        }
    }

    #[test]
    fn single_step_counts() {
        let sc = selection_counts(&trace_of(&[vec![2, 5]]), 7).unwrap();
        assert_eq!(sc.counts, vec![0, 0, 1, 0, 0, 1, 0]);
        assert_eq!(sc.total(), 2);
        assert!(selection_counts(&TrainTrace::default(), 7).is_err());
        assert_eq!(sc.ranks(), vec![1, 1, 6, 1, 1, 6, 1]);
        assert!(selection_counts(&trace_of(&[vec![9]]), 7).is_err());
    }

    #[test]
    fn thresholds() {
        let sc = selection_counts(&trace_of(&[vec![0, 1], vec![1, 2], vec![1, 3]]), 5).unwrap();
        assert!(flag_outliers(&sc, 0).is_empty());
        assert_eq!(flag_outliers(&sc, 1), vec![4]);
        assert_eq!(flag_outliers(&sc, 4).len(), 5);
        assert_eq!(sc.ranking()[0], 4);
        assert_eq!(*sc.ranking().last().unwrap(), 1);
    }

    proptest! {
        #[test]
        fn flagging_is_monotone(counts in prop::collection::vec(0u64..20, 1..50), a in 0u64..25, b in 0u64..25) {
            let sc = SelectionCounts { counts, iterations: 20, block_size: 1 };
            let (lo, hi) = (a.min(b), a.max(b));
            let small = flag_outliers(&sc, lo);
            let large = flag_outliers(&sc, hi);
            prop_assert!(small.iter().all(|i| large.contains(i)));
            prop_assert_eq!(flag_outliers(&sc, 21).len(), sc.len());
        }
    }

    #[test]
    fn metrics() {
        let ds = generate_toy(20, 4, RngSeed(3)).unwrap();
        let truth: Vec<usize> = (0..ds.len())
            .filter(|&i| ds.outlier_flags().unwrap()[i])
            .collect();
        assert_eq!(detection_metrics(&truth, &ds).unwrap(), (1.0, 1.0));
        assert_eq!(detection_metrics(&[], &ds).unwrap(), (1.0, 0.0));
        let bare = Dataset::new(1, vec![0.0, 1.0], vec![Label::Positive, Label::Negative]).unwrap();
        assert!(detection_metrics(&[0], &bare).is_err());
    }

    #[test]
    fn random_flagging_precision() {
        let ds = generate_toy(600, 30, RngSeed(5)).unwrap();
        let mut rng = RngSeed(6).rng();
        let reps = 2000;
        let mean: f64 = (0..reps)
            .map(|_| {
                detection_metrics(&sample(&mut rng, 630, 30).into_vec(), &ds)
                    .unwrap()
                    .0
            })
            .sum::<f64>()
            / reps as f64;
        // E = 30/630 = 0.0476; sd of the mean is about 0.0008.
        assert!((mean - 30.0 / 630.0).abs() < 0.004, "{mean}");
    }

    #[test]
    fn csv_export() {
        let sc = SelectionCounts {
            counts: vec![3, 0],
            iterations: 3,
            block_size: 1,
        };
        let mut buf = Vec::new();
        sc.write_csv(&mut buf, Some(&[false, true])).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "index,count,is_outlier\n0,3,0\n1,0,1\n"
        );
        assert!(sc.write_csv(Vec::new(), Some(&[true])).is_err());
    }
}
