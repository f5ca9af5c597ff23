//! Chronological dataset partitioning, including the nested reconciler
//! split carved out of the base validation set.

use super::window::FeatureWindow;
use crate::error::{Error, Result};
use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Window origins strictly before this go to the base training set.
    pub train_end: NaiveDateTime,
    /// Origins in [train_end, val_end) go to base validation; the rest test.
    pub val_end: NaiveDateTime,
    /// Leading fraction of base validation used to train the reconciler.
    pub reconciler_fraction: f64,
}

impl SplitSpec {
    pub fn new(
        train_end: NaiveDateTime,
        val_end: NaiveDateTime,
        reconciler_fraction: f64,
    ) -> Result<Self> {
        if train_end >= val_end {
            return Err(Error::Config(
                "split boundaries must be strictly increasing".into(),
            ));
        }
        if !(0.0 < reconciler_fraction && reconciler_fraction < 1.0) {
            return Err(Error::Config(format!(
                "reconciler fraction must lie in (0,1), got {reconciler_fraction}"
            )));
        }
        Ok(SplitSpec {
            train_end,
            val_end,
            reconciler_fraction,
        })
    }
}

/// Index partitions into the window list (indices refer to the sorted-by-
/// origin order, which is also the returned canonical order).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub base_train: Vec<usize>,
    pub base_val: Vec<usize>,
    pub test: Vec<usize>,
    pub dcl_train: Vec<usize>,
    pub dcl_val: Vec<usize>,
}

/// Partition windows chronologically by origin. Unsorted input is sorted
/// internally; returned indices refer to the input order.
pub fn split_windows(windows: &[FeatureWindow], spec: &SplitSpec) -> Result<SplitIndices> {
    let mut order: Vec<usize> = (0..windows.len()).collect();
    order.sort_by_key(|&i| windows[i].origin);

    let mut base_train = Vec::new();
    let mut base_val = Vec::new();
    let mut test = Vec::new();
    for &i in &order {
        let origin = windows[i].origin;
        if origin < spec.train_end {
            base_train.push(i);
        } else if origin < spec.val_end {
            base_val.push(i);
        } else {
            test.push(i);
        }
    }
    let cut = (base_val.len() as f64 * spec.reconciler_fraction).floor() as usize;
    let dcl_train: Vec<usize> = base_val[..cut].to_vec();
    let dcl_val: Vec<usize> = base_val[cut..].to_vec();

    for (name, part) in [
        ("base_train", &base_train),
        ("base_val", &base_val),
        ("test", &test),
        ("dcl_train", &dcl_train),
        ("dcl_val", &dcl_val),
    ] {
        if part.is_empty() {
            return Err(Error::Config(format!("partition `{name}` is empty")));
        }
    }
    Ok(SplitIndices {
        base_train,
        base_val,
        test,
        dcl_train,
        dcl_val,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::session::parse_timestamp;
    use chrono::Duration;

    fn window_at(origin: NaiveDateTime) -> FeatureWindow {
        FeatureWindow {
            origin,
            context: vec![vec![0.0]],
            future_covariates: vec![vec![0.0]],
            horizon: vec![0.0],
        }
    }

    fn windows(n: usize) -> Vec<FeatureWindow> {
        let start = parse_timestamp("2024-01-01T00:00").unwrap();
        (0..n)
            .map(|i| window_at(start + Duration::hours(i as i64)))
            .collect()
    }

    fn spec(train_h: i64, val_h: i64) -> SplitSpec {
        let start = parse_timestamp("2024-01-01T00:00").unwrap();
        SplitSpec::new(
            start + Duration::hours(train_h),
            start + Duration::hours(val_h),
            0.8,
        )
        .unwrap()
    }

    #[test]
    fn eighty_twenty_reconciler_split() {
        let ws = windows(300);
        let s = spec(150, 250); // 100 validation windows
        let idx = split_windows(&ws, &s).unwrap();
        assert_eq!(idx.base_val.len(), 100);
        assert_eq!(idx.dcl_train.len(), 80);
        assert_eq!(idx.dcl_val.len(), 20);
        assert_eq!(idx.test.len(), 50);
    }

    #[test]
    fn empty_partition_is_named() {
        let ws = windows(100);
        let s = spec(50, 100); // nothing after val_end
        let err = split_windows(&ws, &s).unwrap_err();
        assert!(err.to_string().contains("test"), "{err}");
    }

    #[test]
    fn unsorted_input_partitions_identically() {
        let mut ws = windows(50);
        let s = spec(20, 40);
        let sorted = split_windows(&ws, &s).unwrap();
        ws.reverse();
        let reversed = split_windows(&ws, &s).unwrap();
        // same origins in each partition regardless of input order
        let origins = |idx: &[usize], ws: &[FeatureWindow]| -> Vec<NaiveDateTime> {
            idx.iter().map(|&i| ws[i].origin).collect()
        };
        let w_sorted = windows(50);
        assert_eq!(origins(&sorted.base_train, &w_sorted), origins(&reversed.base_train, &ws));
        assert_eq!(origins(&sorted.test, &w_sorted), origins(&reversed.test, &ws));
    }

    #[test]
    fn splits_are_disjoint_and_ordered() {
        let ws = windows(200);
        let s = spec(100, 160);
        let idx = split_windows(&ws, &s).unwrap();
        let last_train = idx.base_train.iter().map(|&i| ws[i].origin).max().unwrap();
        let first_val = idx.base_val.iter().map(|&i| ws[i].origin).min().unwrap();
        let last_val = idx.base_val.iter().map(|&i| ws[i].origin).max().unwrap();
        let first_test = idx.test.iter().map(|&i| ws[i].origin).min().unwrap();
        assert!(last_train < first_val);
        assert!(last_val < first_test);
        let total = idx.base_train.len() + idx.base_val.len() + idx.test.len();
        assert_eq!(total, ws.len());
        // dcl split stays inside base_val and keeps order
        let last_dcl_train = idx.dcl_train.iter().map(|&i| ws[i].origin).max().unwrap();
        let first_dcl_val = idx.dcl_val.iter().map(|&i| ws[i].origin).min().unwrap();
        assert!(last_dcl_train < first_dcl_val);
    }

    #[test]
    fn bad_spec_rejected() {
        let start = parse_timestamp("2024-01-01T00:00").unwrap();
        assert!(SplitSpec::new(start, start, 0.8).is_err());
        assert!(SplitSpec::new(start, start + Duration::hours(1), 0.0).is_err());
        assert!(SplitSpec::new(start, start + Duration::hours(1), 1.0).is_err());
    }
}
