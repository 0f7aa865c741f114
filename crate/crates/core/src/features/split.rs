//! Chronological 50/25/25 dataset splitting by reach.

use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::synth::ReachTrajectory;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Val,
    Test,
}

/// Reach indices assigned to each partition. Reaches stay in chronological
/// order and the partitions are contiguous in time: the first half of the
/// reaches train, the next quarter validate, the rest test.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<u32>,
    pub val: Vec<u32>,
    pub test: Vec<u32>,
}

impl DatasetSplit {
    pub fn partition_of(&self, reach: u32) -> Option<Partition> {
        if self.train.contains(&reach) {
            Some(Partition::Train)
        } else if self.val.contains(&reach) {
            Some(Partition::Val)
        } else if self.test.contains(&reach) {
            Some(Partition::Test)
        } else {
            None
        }
    }

    pub fn reaches(&self, partition: Partition) -> &[u32] {
        match partition {
            Partition::Train => &self.train,
            Partition::Val => &self.val,
            Partition::Test => &self.test,
        }
    }

    pub fn n_reaches(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }
}

/// Splits a trajectory's reaches chronologically. The boundaries come from
/// target-position changes, which the trajectory already carries.
pub fn segment_and_split(traj: &ReachTrajectory) -> Result<DatasetSplit, FeatureError> {
    split_reach_count(traj.n_reaches())
}

/// Pure arithmetic of the 50/25/25 chronological split: sizes are the rounded
/// quotas, within one reach of exact.
pub fn split_reach_count(n_reaches: usize) -> Result<DatasetSplit, FeatureError> {
    if n_reaches < 4 {
        return Err(FeatureError::TooFewReaches(n_reaches));
    }
    let n_train = (n_reaches as f64 * 0.5).round() as usize;
    let n_val = (n_reaches as f64 * 0.25).round() as usize;
    let train = (0..n_train as u32).collect();
    let val = (n_train as u32..(n_train + n_val) as u32).collect();
    let test = ((n_train + n_val) as u32..n_reaches as u32).collect();
    Ok(DatasetSplit { train, val, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_reaches_split_4_2_2() {
        let s = split_reach_count(8).unwrap();
        assert_eq!(s.train, vec![0, 1, 2, 3]);
        assert_eq!(s.val, vec![4, 5]);
        assert_eq!(s.test, vec![6, 7]);
    }

    #[test]
    fn four_reaches_split_2_1_1() {
        let s = split_reach_count(4).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (2, 1, 1));
    }

    #[test]
    fn sizes_stay_within_one_of_quota() {
        for n in 4..200usize {
            let s = split_reach_count(n).unwrap();
            assert_eq!(s.n_reaches(), n, "union must cover all reaches");
            assert!((s.train.len() as f64 - n as f64 * 0.5).abs() <= 1.0);
            assert!((s.val.len() as f64 - n as f64 * 0.25).abs() <= 1.0);
            assert!((s.test.len() as f64 - n as f64 * 0.25).abs() <= 1.0);
            assert!(!s.val.is_empty() && !s.test.is_empty());
            // contiguous and disjoint by construction; spot-check ordering
            assert!(s.train.last().unwrap() < s.val.first().unwrap());
            assert!(s.val.last().unwrap() < s.test.first().unwrap());
        }
    }

    #[test]
    fn too_few_reaches_is_an_error() {
        assert!(matches!(
            split_reach_count(3),
            Err(FeatureError::TooFewReaches(3))
        ));
    }

    #[test]
    fn partition_lookup_works() {
        let s = split_reach_count(10).unwrap();
        assert_eq!(s.partition_of(0), Some(Partition::Train));
        assert_eq!(s.partition_of(9), Some(Partition::Test));
        assert_eq!(s.partition_of(99), None);
    }
}
