//! Keyframe extraction: the densest fixed-length windows in the last quarter
//! of a video.

use alloc::string::ToString;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::VideoStream;
use crate::error::{Error, Result};

pub const DEFAULT_FRAME_LEN: f64 = 10.0;
pub const DEFAULT_KEYFRAMES: usize = 3;

/// Fraction of the video before the keyframe search region starts.
pub const LAST_QUARTER_START: f64 = 0.75;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub start: f64,
    pub end: f64,
    /// Indices into `VideoStream::records` with `start <= t < end`.
    pub member_indices: Vec<usize>,
}

impl Keyframe {
    pub fn count(&self) -> usize {
        self.member_indices.len()
    }
}

/// Tiles `[0.75 * duration, duration]` with consecutive windows of
/// `frame_len` seconds and returns the `p` windows holding the most comments,
/// ordered by start time. Empty windows are never returned; ties go to the
/// earlier window.
pub fn extract_keyframes(video: &VideoStream, p: usize, frame_len: f64) -> Result<Vec<Keyframe>> {
    if p == 0 {
        return Err(Error::InvalidConfig("keyframe count must be at least 1".to_string()));
    }
    if !(frame_len > 0.0) {
        return Err(Error::InvalidConfig("frame length must be positive".to_string()));
    }
    if video.is_empty() {
        return Err(Error::Empty("video"));
    }
    if !(video.duration > 0.0) {
        return Err(Error::ZeroDuration(video.video_id.clone()));
    }
    let origin = LAST_QUARTER_START * video.duration;
    let ts: Vec<f64> = video.timestamps().collect();

    let mut windows: Vec<Keyframe> = Vec::new();
    let mut k = 0usize;
    loop {
        let start = origin + k as f64 * frame_len;
        if start > video.duration {
            break;
        }
        let end = start + frame_len;
        let lo = ts.partition_point(|&t| t < start);
        let hi = ts.partition_point(|&t| t < end);
        if hi > lo {
            windows.push(Keyframe {
                start,
                end,
                member_indices: (lo..hi).collect(),
            });
        }
        k += 1;
    }
    // Stable sort keeps earlier windows first among equal counts.
    windows.sort_by(|a, b| b.count().cmp(&a.count()));
    windows.truncate(p);
    windows.sort_by(|a, b| a.start.total_cmp(&b.start));
    Ok(windows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TscRecord;
    use alloc::string::String;
    use alloc::vec;

    fn stream(ts: &[f64], duration: Option<f64>) -> VideoStream {
        let records = ts
            .iter()
            .map(|&t| TscRecord {
                video_id: "v".to_string(),
                timestamp: t,
                raw_text: String::new(),
                tokens: vec!["a".to_string()],
                label: None,
            })
            .collect();
        VideoStream::new("v".to_string(), records, duration)
    }

    #[test]
    fn two_bursts_in_last_quarter() {
        let mut ts = Vec::new();
        for i in 0..50 {
            ts.push(370.0 + i as f64 * 0.19);
        }
        for i in 0..30 {
            ts.push(390.0 + i as f64 * 0.3);
        }
        for i in 0..40 {
            ts.push(i as f64 * 7.0);
        }
        let v = stream(&ts, Some(400.0));
        let kf = extract_keyframes(&v, 2, 10.0).unwrap();
        assert_eq!(kf.len(), 2);
        assert_eq!((kf[0].start, kf[0].end), (370.0, 380.0));
        assert_eq!((kf[1].start, kf[1].end), (390.0, 400.0));
        assert_eq!(kf[0].count(), 50);
        assert_eq!(kf[1].count(), 30);
    }

    #[test]
    fn nothing_in_last_quarter() {
        let v = stream(&[1.0, 2.0, 10.0, 40.0], Some(100.0));
        assert!(extract_keyframes(&v, 3, 10.0).unwrap().is_empty());
    }

    #[test]
    fn single_burst() {
        let v = stream(&[5.0, 80.0, 81.0, 82.0, 99.0], Some(100.0));
        let kf = extract_keyframes(&v, 1, 10.0).unwrap();
        assert_eq!(kf.len(), 1);
        assert_eq!(kf[0].start, 75.0);
        assert_eq!(kf[0].member_indices, vec![1, 2, 3]);
    }

    #[test]
    fn ties_prefer_earlier_windows() {
        let v = stream(&[76.0, 86.0, 96.0], Some(100.0));
        let kf = extract_keyframes(&v, 2, 10.0).unwrap();
        assert_eq!(kf.iter().map(|k| k.start).collect::<Vec<_>>(), vec![75.0, 85.0]);
    }

    #[test]
    fn final_partial_window_and_endpoint() {
        // 0.75 * 100 = 75; windows 75, 85, 95; t = 100 falls in none unless
        // a window starts at or before 100.
        let v = stream(&[100.0, 100.0], Some(100.0));
        let kf = extract_keyframes(&v, 1, 10.0).unwrap();
        assert_eq!(kf[0].start, 95.0);
        let v = stream(&[100.0], Some(100.0));
        let kf = extract_keyframes(&v, 1, 5.0).unwrap();
        assert_eq!(kf[0].start, 100.0);
    }

    #[test]
    fn zero_duration_is_an_error() {
        let v = stream(&[0.0, 0.0], None);
        assert!(matches!(extract_keyframes(&v, 1, 10.0), Err(Error::ZeroDuration(_))));
    }
}
