//! Comment records, per-video streams, filtering and train/test/validation splits.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One time-sync comment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TscRecord {
    pub video_id: String,
    /// Playback time in seconds.
    pub timestamp: f64,
    pub raw_text: String,
    pub tokens: Vec<String>,
    /// 1 = spoiler. Absent for unlabeled inference data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
}

/// All comments of one video in playback order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoStream {
    pub video_id: String,
    /// Corpus tag such as `tv`, `movie` or `sport`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    pub duration: f64,
    pub records: Vec<TscRecord>,
}

impl VideoStream {
    /// Sorts `records` by timestamp (stable, so equal timestamps keep input
    /// order). Without explicit metadata the duration is the last timestamp.
    pub fn new(video_id: String, mut records: Vec<TscRecord>, duration: Option<f64>) -> Self {
        records.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        let last = records.last().map(|r| r.timestamp).unwrap_or(0.0);
        let duration = duration.unwrap_or(last).max(last);
        VideoStream {
            video_id,
            category: None,
            duration,
            records,
        }
    }

    pub fn with_category(mut self, category: Option<String>) -> Self {
        self.category = category;
        self
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Comments per second; zero for a zero-length video.
    pub fn density(&self) -> f64 {
        if self.duration > 0.0 {
            self.records.len() as f64 / self.duration
        } else {
            0.0
        }
    }

    pub fn timestamps(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.timestamp)
    }
}

pub const DEFAULT_MIN_COUNT: usize = 300;
pub const DEFAULT_MIN_DENSITY: f64 = 0.1;

/// Keeps videos with at least `min_count` comments and a density of at least
/// `min_density` comments per second. Both bounds are inclusive.
pub fn filter_videos(videos: Vec<VideoStream>, min_count: usize, min_density: f64) -> Vec<VideoStream> {
    videos
        .into_iter()
        .filter(|v| v.len() >= min_count && v.density() >= min_density)
        .collect()
}

/// Disjoint train/test/validation partition of example indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub validation: Vec<usize>,
}

impl DatasetSplit {
    pub fn len(&self) -> usize {
        self.train.len() + self.test.len() + self.validation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// 70/20/10 counts for `n` items; validation takes the rounding remainder.
pub fn split_counts(n: usize) -> (usize, usize, usize) {
    let train = libm::round(n as f64 * 0.7) as usize;
    let test = (libm::round(n as f64 * 0.2) as usize).min(n - train);
    (train, test, n - train - test)
}

fn split_slice(items: &mut [usize], rng: &mut ChaCha8Rng, out: &mut DatasetSplit) {
    items.shuffle(rng);
    let (train, test, _) = split_counts(items.len());
    out.train.extend_from_slice(&items[..train]);
    out.test.extend_from_slice(&items[train..train + test]);
    out.validation.extend_from_slice(&items[train + test..]);
}

/// Random 70/20/10 split of `n` examples, deterministic for a given seed.
pub fn split_dataset(n: usize, seed: u64) -> Result<DatasetSplit> {
    if n < 10 {
        return Err(Error::TooFewExamples(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut items: Vec<usize> = (0..n).collect();
    let mut out = DatasetSplit::default();
    split_slice(&mut items, &mut rng, &mut out);
    Ok(out)
}

/// Split stratified by group: every group is split 70/20/10 on its own so each
/// contributes to all three sets. `groups[i]` lists the example indices of group `i`.
pub fn split_stratified(groups: &[Vec<usize>], seed: u64) -> Result<DatasetSplit> {
    let n: usize = groups.iter().map(Vec::len).sum();
    if n < 10 {
        return Err(Error::TooFewExamples(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DatasetSplit::default();
    for g in groups {
        let mut items = g.clone();
        split_slice(&mut items, &mut rng, &mut out);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::string::ToString;
    use proptest::prelude::*;

    fn rec(t: f64) -> TscRecord {
        TscRecord {
            video_id: "v1".to_string(),
            timestamp: t,
            raw_text: String::new(),
            tokens: vec!["x".to_string()],
            label: None,
        }
    }

    fn video(count: usize, duration: f64) -> VideoStream {
        let step = duration / count as f64;
        let records = (0..count).map(|i| rec(i as f64 * step)).collect();
        VideoStream::new("v".to_string(), records, Some(duration))
    }

    #[test]
    fn records_are_sorted_by_timestamp() {
        let v = VideoStream::new("v1".to_string(), vec![rec(5.0), rec(1.0), rec(3.0)], None);
        let ts: Vec<f64> = v.timestamps().collect();
        assert_eq!(ts, vec![1.0, 3.0, 5.0]);
        assert_eq!(v.duration, 5.0);
    }

    #[test]
    fn filter_boundaries() {
        let kept = filter_videos(vec![video(299, 299.0 / 4.0)], 300, 0.1);
        assert!(kept.is_empty());
        let kept = filter_videos(vec![video(500, 10_000.0)], 300, 0.1);
        assert!(kept.is_empty(), "density 0.05 must be discarded");
        let kept = filter_videos(vec![video(300, 3000.0)], 300, 0.1);
        assert_eq!(kept.len(), 1, "boundary is inclusive");
    }

    #[test]
    fn split_sizes() {
        let s = split_dataset(100, 3).unwrap();
        assert_eq!((s.train.len(), s.test.len(), s.validation.len()), (70, 20, 10));
        let s = split_dataset(10, 3).unwrap();
        assert_eq!((s.train.len(), s.test.len(), s.validation.len()), (7, 2, 1));
        assert_eq!(split_dataset(9, 3), Err(Error::TooFewExamples(9)));
    }

    #[test]
    fn split_is_deterministic() {
        assert_eq!(split_dataset(57, 42).unwrap(), split_dataset(57, 42).unwrap());
        assert_ne!(split_dataset(57, 42).unwrap(), split_dataset(57, 43).unwrap());
    }

    #[test]
    fn stratified_split_touches_every_group() {
        let groups = vec![(0..40).collect::<Vec<_>>(), (40..100).collect()];
        let s = split_stratified(&groups, 1).unwrap();
        for g in &groups {
            assert!(s.train.iter().any(|i| g.contains(i)));
            assert!(s.test.iter().any(|i| g.contains(i)));
            assert!(s.validation.iter().any(|i| g.contains(i)));
        }
    }

    proptest! {
        #[test]
        fn split_is_a_partition(n in 10usize..400, seed in any::<u64>()) {
            let s = split_dataset(n, seed).unwrap();
            let mut all: Vec<usize> = s.train.iter().chain(&s.test).chain(&s.validation).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }

        #[test]
        fn filtering_is_monotone(
            sizes in proptest::collection::vec((1usize..600, 10.0f64..4000.0), 1..20),
            c1 in 0usize..600, c2 in 0usize..600, d1 in 0.0f64..1.0, d2 in 0.0f64..1.0,
        ) {
            let videos: Vec<VideoStream> = sizes.iter().map(|&(n, d)| video(n, d)).collect();
            let (lo_c, hi_c) = (c1.min(c2), c1.max(c2));
            let (lo_d, hi_d) = (d1.min(d2), d1.max(d2));
            let loose = filter_videos(videos.clone(), lo_c, lo_d);
            let strict = filter_videos(videos, hi_c, hi_d);
            prop_assert!(strict.len() <= loose.len());
            for v in &strict {
                prop_assert!(loose.contains(v));
            }
        }

        #[test]
        fn streams_are_sorted(ts in proptest::collection::vec(0.0f64..1e4, 0..50)) {
            let v = VideoStream::new("v".to_string(), ts.iter().map(|&t| rec(t)).collect(), None);
            let out: Vec<f64> = v.timestamps().collect();
            prop_assert!(out.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
