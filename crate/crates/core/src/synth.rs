//! Seeded synthetic corpus with planted spoilers.
//!
//! Each video walks through a sequence of scene topics during its first three
//! quarters, then ends with a few dense bursts of comments about an ending
//! topic. Spoilers are ending-topic comments posted before the last quarter,
//! surrounded by scene chatter. Character names appear everywhere, so a
//! keyword list containing them over-triggers. Noise comments use a separate
//! vocabulary and can replace any non-spoiler comment.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{TscRecord, VideoStream};
use crate::error::{Error, Result};
use crate::evaluator::KeywordList;

pub const CATEGORIES: [&str; 3] = ["tv", "movie", "sport"];

const SCENE_TOPICS: usize = 24;
const SCENE_WORDS: usize = 8;
const PLOT_TOPICS: usize = 12;
const PLOT_WORDS: usize = 6;
const NAMES: usize = 20;
const NAMES_PER_VIDEO: usize = 3;
const NOISE_WORDS: usize = 80;
const REACTIONS: [&str; 5] = ["wow", "omg", "nooo", "finally", "tears"];
/// Ending words that go into the keyword list; every spoiler uses one.
const KEYWORDS_PER_PLOT: usize = 4;
const NAME_RATE: f64 = 0.3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub videos: usize,
    pub comments_per_video: usize,
    /// Seconds.
    pub duration: f64,
    /// Fraction of comments that are spoilers.
    pub spoiler_rate: f64,
    /// Probability that a non-spoiler comment is replaced by noise.
    pub noise_rate: f64,
    pub bursts: usize,
    pub burst_size: usize,
    /// Ordinary comments in the last quarter, outside the bursts.
    pub tail_comments: usize,
    /// Seconds per scene topic.
    pub scene_len: f64,
    /// Probability that a chatter comment repeats the previous one.
    pub herding_rate: f64,
    /// Short on-screen scenes about the ending topic during the body, each
    /// drawing `flashback_size` comments that use ending words but describe
    /// current content (label 0).
    pub flashbacks: usize,
    pub flashback_len: f64,
    pub flashback_size: usize,
    /// Probability that a spoiler is reposted right after it (also label 1).
    pub echo_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            videos: 50,
            comments_per_video: 500,
            duration: 1200.0,
            spoiler_rate: 0.2,
            noise_rate: 0.1,
            bursts: 3,
            burst_size: 8,
            tail_comments: 40,
            scene_len: 60.0,
            herding_rate: 0.1,
            flashbacks: 0,
            flashback_len: 20.0,
            flashback_size: 16,
            echo_rate: 0.0,
            seed: 1,
        }
    }
}

impl SynthConfig {
    fn spoilers(&self) -> usize {
        libm::round(self.comments_per_video as f64 * self.spoiler_rate) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(String::from(m)));
        if !(self.duration >= 40.0) {
            return bad("duration must be at least 40 seconds");
        }
        if !(0.0..=1.0).contains(&self.spoiler_rate)
            || !(0.0..=1.0).contains(&self.noise_rate)
            || !(0.0..=1.0).contains(&self.herding_rate)
            || !(0.0..=1.0).contains(&self.echo_rate)
        {
            return bad("rates must lie in [0, 1]");
        }
        if !(self.scene_len > 0.0) {
            return bad("scene_len must be positive");
        }
        if self.flashbacks > 0 && !(self.flashback_len > 0.0 && self.flashbacks as f64 * self.flashback_len <= 0.375 * self.duration) {
            return bad("flashbacks must fit in half of the body");
        }
        let tiles = (0.25 * self.duration / 10.0) as usize;
        if self.bursts == 0 || self.bursts > tiles {
            return bad("bursts must be between 1 and the number of last-quarter windows");
        }
        let fixed = self.spoilers()
            + self.bursts * self.burst_size
            + self.tail_comments
            + self.flashbacks * self.flashback_size;
        if fixed >= self.comments_per_video {
            return bad("comments_per_video too small for the spoilers, bursts and tail");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthCorpus {
    pub videos: Vec<VideoStream>,
    pub keywords: KeywordList,
}

fn scene_word(topic: usize, k: usize) -> String {
    format!("scene{topic}_w{k}")
}

fn plot_word(topic: usize, k: usize) -> String {
    format!("plot{topic}_w{k}")
}

/// Index in `0..n` with weight `1/(k+1)`.
fn zipf<R: Rng>(rng: &mut R, n: usize) -> usize {
    let total: f64 = (1..=n).map(|k| 1.0 / k as f64).sum();
    let mut x = rng.gen::<f64>() * total;
    for k in 0..n {
        x -= 1.0 / (k + 1) as f64;
        if x <= 0.0 {
            return k;
        }
    }
    n - 1
}

struct VideoPlan {
    names: Vec<String>,
    plot: usize,
    scenes: Vec<usize>,
    tail_scene: usize,
}

impl VideoPlan {
    fn maybe_name<R: Rng>(&self, rng: &mut R, tokens: &mut Vec<String>) {
        if rng.gen_bool(NAME_RATE) {
            tokens.push(self.names.choose(rng).expect("names").clone());
        }
    }

    fn chatter<R: Rng>(&self, rng: &mut R, topic: usize) -> Vec<String> {
        let n = rng.gen_range(2..=5);
        let mut t: Vec<String> = (0..n).map(|_| scene_word(topic, zipf(rng, SCENE_WORDS))).collect();
        self.maybe_name(rng, &mut t);
        t.shuffle(rng);
        t
    }

    fn spoiler<R: Rng>(&self, rng: &mut R) -> Vec<String> {
        let mut t = alloc::vec![plot_word(self.plot, rng.gen_range(0..KEYWORDS_PER_PLOT))];
        for _ in 0..rng.gen_range(1..=2) {
            t.push(plot_word(self.plot, zipf(rng, PLOT_WORDS)));
        }
        self.maybe_name(rng, &mut t);
        t.shuffle(rng);
        t
    }

    fn flashback<R: Rng>(&self, rng: &mut R) -> Vec<String> {
        let mut t: Vec<String> = (0..rng.gen_range(2..=3))
            .map(|_| plot_word(self.plot, zipf(rng, PLOT_WORDS)))
            .collect();
        self.maybe_name(rng, &mut t);
        t.shuffle(rng);
        t
    }

    fn burst<R: Rng>(&self, rng: &mut R) -> Vec<String> {
        let mut t: Vec<String> = (0..rng.gen_range(1..=2))
            .map(|_| plot_word(self.plot, zipf(rng, PLOT_WORDS)))
            .collect();
        if rng.gen_bool(0.7) {
            t.push(String::from(*REACTIONS.choose(rng).expect("reactions")));
        }
        self.maybe_name(rng, &mut t);
        t.shuffle(rng);
        t
    }
}

fn noise<R: Rng>(rng: &mut R) -> Vec<String> {
    (0..rng.gen_range(2..=4))
        .map(|_| format!("noise{}", rng.gen_range(0..NOISE_WORDS)))
        .collect()
}

fn round_time(t: f64) -> f64 {
    libm::round(t * 100.0) / 100.0
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Chatter,
    Spoiler(usize),
    Echo(usize),
    Flashback,
    Tail,
    Burst,
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut keywords = KeywordList::default();
    let mut videos = Vec::with_capacity(cfg.videos);
    let d = cfg.duration;
    let body_end = 0.75 * d;
    let tiles = (0.25 * d / 10.0) as usize;

    for v in 0..cfg.videos {
        let video_id = format!("v{v:03}");
        let all_names: Vec<usize> = (0..NAMES).collect();
        let names = all_names
            .choose_multiple(&mut rng, NAMES_PER_VIDEO)
            .map(|n| format!("name{n}"))
            .collect();
        let n_scenes = libm::ceil(body_end / cfg.scene_len) as usize;
        let mut scenes = Vec::with_capacity(n_scenes);
        while scenes.len() < n_scenes {
            let s = rng.gen_range(0..SCENE_TOPICS);
            if scenes.last() != Some(&s) {
                scenes.push(s);
            }
        }
        let plan = VideoPlan {
            names,
            plot: rng.gen_range(0..PLOT_TOPICS),
            tail_scene: rng.gen_range(0..SCENE_TOPICS),
            scenes,
        };
        for k in 0..KEYWORDS_PER_PLOT {
            keywords.insert(&video_id, &plot_word(plan.plot, k));
        }
        for n in &plan.names {
            keywords.insert(&video_id, n);
        }

        let spoilers = cfg.spoilers();
        let flashback_total = cfg.flashbacks * cfg.flashback_size;
        let chatter = cfg.comments_per_video
            - spoilers
            - cfg.bursts * cfg.burst_size
            - cfg.tail_comments
            - flashback_total;
        let mut slots: Vec<(f64, Kind)> = Vec::with_capacity(cfg.comments_per_video);
        let mut windows: Vec<(f64, f64)> = Vec::with_capacity(cfg.flashbacks);
        while windows.len() < cfg.flashbacks {
            let start = round_time(rng.gen_range(0.0..body_end - cfg.flashback_len));
            let end = start + cfg.flashback_len;
            if windows.iter().all(|&(a, b)| end <= a || start >= b) {
                windows.push((start, end));
            }
        }
        let in_flashback = |t: f64| windows.iter().any(|&(a, b)| t >= a && t < b);
        for &(a, b) in &windows {
            for _ in 0..cfg.flashback_size {
                slots.push((round_time(rng.gen_range(a..b)), Kind::Flashback));
            }
        }
        let mut placed = 0;
        while placed < chatter {
            let t = round_time(rng.gen_range(0.0..body_end));
            if !in_flashback(t) {
                slots.push((t, Kind::Chatter));
                placed += 1;
            }
        }
        let mut placed = 0;
        while placed < spoilers {
            let t = round_time(rng.gen_range(0.0..body_end));
            if in_flashback(t) {
                continue;
            }
            slots.push((t, Kind::Spoiler(placed)));
            placed += 1;
            if placed < spoilers && rng.gen_bool(cfg.echo_rate) {
                let echo = round_time((t + rng.gen_range(0.2..1.5)).min(body_end));
                slots.push((echo, Kind::Echo(placed - 1)));
                placed += 1;
            }
        }
        for _ in 0..cfg.tail_comments {
            slots.push((round_time(rng.gen_range(body_end..d)), Kind::Tail));
        }
        let all_tiles: Vec<usize> = (0..tiles).collect();
        for &tile in all_tiles.choose_multiple(&mut rng, cfg.bursts) {
            let start = body_end + tile as f64 * 10.0;
            for _ in 0..cfg.burst_size {
                slots.push((round_time(start + rng.gen_range(0.5..9.5)), Kind::Burst));
            }
        }
        // Stable sort: an echo at its parent's timestamp stays after it.
        slots.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut records = Vec::with_capacity(slots.len());
        let mut last_chatter: Option<Vec<String>> = None;
        let mut spoiler_tokens: Vec<Vec<String>> = alloc::vec![Vec::new(); spoilers];
        for (t, kind) in slots {
            let (mut tokens, label) = match kind {
                Kind::Spoiler(k) => {
                    spoiler_tokens[k] = plan.spoiler(&mut rng);
                    (spoiler_tokens[k].clone(), 1)
                }
                Kind::Echo(k) => (spoiler_tokens[k].clone(), 1),
                Kind::Flashback => (plan.flashback(&mut rng), 0),
                Kind::Chatter => {
                    let tokens = match &last_chatter {
                        Some(prev) if rng.gen_bool(cfg.herding_rate) => prev.clone(),
                        _ => {
                            let scene = ((t / cfg.scene_len) as usize).min(plan.scenes.len() - 1);
                            plan.chatter(&mut rng, plan.scenes[scene])
                        }
                    };
                    last_chatter = Some(tokens.clone());
                    (tokens, 0)
                }
                Kind::Tail => (plan.chatter(&mut rng, plan.tail_scene), 0),
                Kind::Burst => (plan.burst(&mut rng), 0),
            };
            if label == 0 && rng.gen_bool(cfg.noise_rate) {
                tokens = noise(&mut rng);
            }
            records.push(TscRecord {
                video_id: video_id.clone(),
                timestamp: t,
                raw_text: tokens.join(" "),
                tokens,
                label: Some(label),
            });
        }
        let category = String::from(CATEGORIES[v % CATEGORIES.len()]);
        videos.push(VideoStream::new(video_id, records, Some(d)).with_category(Some(category)));
    }
    Ok(SynthCorpus { videos, keywords })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keyframes::extract_keyframes;

    fn small() -> SynthConfig {
        SynthConfig {
            videos: 4,
            seed: 9,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn shape_and_rates() {
        let c = generate(&small()).unwrap();
        assert_eq!(c.videos.len(), 4);
        for v in &c.videos {
            assert_eq!(v.len(), 500);
            assert_eq!(v.duration, 1200.0);
            let spoilers = v.records.iter().filter(|r| r.label == Some(1)).count();
            assert_eq!(spoilers, 100);
            assert!(v.records.iter().all(|r| !r.tokens.is_empty()));
        }
    }

    #[test]
    fn bursts_become_keyframes() {
        let c = generate(&small()).unwrap();
        for v in &c.videos {
            let kf = extract_keyframes(v, 3, 10.0).unwrap();
            assert_eq!(kf.len(), 3);
            assert!(kf.iter().all(|k| k.count() >= 8));
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(generate(&small()).unwrap(), generate(&small()).unwrap());
    }

    #[test]
    fn every_spoiler_matches_a_keyword() {
        let c = generate(&small()).unwrap();
        for v in &c.videos {
            let kw = c.keywords.keywords_for(&v.video_id, None);
            for r in v.records.iter().filter(|r| r.label == Some(1)) {
                assert!(r.tokens.iter().any(|t| kw.contains(t.as_str())));
            }
        }
    }
}
