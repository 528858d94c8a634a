//! Verification scoring and Equal Error Rate.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::signal::AudioBuffer;

pub const SEGMENT_S: f64 = 4.0;
pub const SEGMENT_HOP_S: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trial {
    pub enroll_utterance_id: String,
    pub test_utterance_id: String,
    pub target: bool,
}

/// Parses `<label 0|1> <enroll> <test>` lines; blank lines and `#` comments are skipped.
pub fn parse_trial_list(text: &str) -> Result<Vec<Trial>> {
    let mut trials = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [label, enroll, test] = fields[..] else {
            return Err(Error::Format(format!(
                "trial line {}: expected 3 fields, got {}",
                lineno + 1,
                fields.len()
            )));
        };
        let target = match label {
            "1" => true,
            "0" => false,
            other => {
                return Err(Error::Format(format!(
                    "trial line {}: label {other:?} is not 0 or 1",
                    lineno + 1
                )))
            }
        };
        trials.push(Trial {
            enroll_utterance_id: enroll.to_string(),
            test_utterance_id: test.to_string(),
            target,
        });
    }
    Ok(trials)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreSet {
    pub scores: Vec<(f64, bool)>,
}

impl ScoreSet {
    pub fn new(scores: Vec<(f64, bool)>) -> Self {
        Self { scores }
    }

    pub fn push(&mut self, score: f64, target: bool) {
        self.scores.push((score, target));
    }

    /// `<score> <label>` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (s, t) in &self.scores {
            writeln!(out, "{s} {}", u8::from(*t)).unwrap();
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EerResult {
    pub eer: f64,
    pub threshold: f64,
}

/// FAR and FRR are kept as counts (`far = accepted / n_nontarget`,
/// `frr = rejected / n_target`) so hull tests and the crossing are exact.
#[derive(Debug, Clone, Copy)]
struct OperatingPoint {
    threshold: f64,
    accepted: i128,
    rejected: i128,
}

/// Operating points for "accept if score >= threshold" at every unique score, plus reject-all.
fn operating_points(scores: &ScoreSet) -> Result<(Vec<OperatingPoint>, i128, i128)> {
    let n_target = scores.scores.iter().filter(|(_, t)| *t).count();
    let n_nontarget = scores.scores.len() - n_target;
    if n_target == 0 || n_nontarget == 0 {
        return Err(Error::Domain(format!(
            "EER needs both classes; got {n_target} target and {n_nontarget} non-target trials"
        )));
    }
    if scores.scores.iter().any(|(s, _)| !s.is_finite()) {
        return Err(Error::Domain("non-finite score".into()));
    }
    let mut sorted = scores.scores.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut points = Vec::new();
    let (mut targets_below, mut nontargets_below) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let threshold = sorted[i].0;
        points.push(OperatingPoint {
            threshold,
            accepted: (n_nontarget - nontargets_below) as i128,
            rejected: targets_below as i128,
        });
        while i < sorted.len() && sorted[i].0 == threshold {
            if sorted[i].1 {
                targets_below += 1;
            } else {
                nontargets_below += 1;
            }
            i += 1;
        }
    }
    points.push(OperatingPoint {
        threshold: f64::INFINITY,
        accepted: 0,
        rejected: n_target as i128,
    });
    Ok((points, n_target as i128, n_nontarget as i128))
}

/// Sign of the turn o -> a -> b in the (FRR, FAR) plane; count units differ from
/// rates by the positive factor `n_target · n_nontarget`.
fn cross(o: &OperatingPoint, a: &OperatingPoint, b: &OperatingPoint) -> i128 {
    (a.rejected - o.rejected) * (b.accepted - o.accepted) - (a.accepted - o.accepted) * (b.rejected - o.rejected)
}

/// Equal Error Rate of the ROC convex hull.
///
/// Operating points sweep the sorted unique scores with FAR = share of
/// non-targets scoring `>= θ` and FRR = share of targets scoring `< θ`. The EER is
/// read off the lower convex hull of these points by linear interpolation
/// between the two adjacent hull vertices where FAR − FRR changes sign; a vertex
/// lying exactly on FAR = FRR is returned as is (the lower threshold wins).
pub fn compute_eer(scores: &ScoreSet) -> Result<EerResult> {
    let (points, n_target, n_nontarget) = operating_points(scores)?;
    // Points are ordered by increasing FRR and decreasing FAR; keep the lower hull.
    let mut hull: Vec<OperatingPoint> = Vec::with_capacity(points.len());
    for p in points {
        while hull.len() >= 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], &p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    // (FAR - FRR) · n_target · n_nontarget
    let gap = |p: &OperatingPoint| p.accepted * n_target - p.rejected * n_nontarget;
    for pair in hull.windows(2) {
        let (p, q) = (pair[0], pair[1]);
        let (dp, dq) = (gap(&p), gap(&q));
        if dp == 0 {
            return Ok(EerResult {
                eer: p.accepted as f64 / n_nontarget as f64,
                threshold: p.threshold,
            });
        }
        if dp > 0 && dq <= 0 {
            // FAR at the crossing as one ratio of integers; a single rounding while both fit in 2^53.
            let num = dp * q.accepted - dq * p.accepted;
            let den = n_nontarget * (dp - dq);
            let eer = num as f64 / den as f64;
            let s = dp as f64 / (dp - dq) as f64;
            let threshold = if q.threshold.is_finite() {
                p.threshold + s * (q.threshold - p.threshold)
            } else {
                p.threshold
            };
            return Ok(EerResult { eer, threshold });
        }
    }
    Err(Error::Invariant("ROC hull never crosses FAR = FRR".into()))
}

/// Maps an audio buffer to a speaker embedding.
pub trait Embedder {
    fn embed(&self, audio: &AudioBuffer) -> Result<Vec<f64>>;
}

/// Start offsets (samples) of the 4 s segments with 3 s overlap; segments that would
/// overrun the utterance are dropped.
pub fn segment_offsets(n_samples: usize, sample_rate: u32) -> Result<Vec<usize>> {
    let seg = (SEGMENT_S * sample_rate as f64).round() as usize;
    let hop = (SEGMENT_HOP_S * sample_rate as f64).round() as usize;
    if n_samples < seg {
        return Err(Error::TooShort(format!(
            "{:.3} s utterance is shorter than one {SEGMENT_S} s segment",
            n_samples as f64 / sample_rate as f64
        )));
    }
    Ok((0..=(n_samples - seg) / hop).map(|k| k * hop).collect())
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Embeddings of every 4 s segment of `audio`.
pub fn segment_embeddings(audio: &AudioBuffer, model: &impl Embedder) -> Result<Vec<Vec<f64>>> {
    let seg = (SEGMENT_S * audio.sample_rate() as f64).round() as usize;
    segment_offsets(audio.len(), audio.sample_rate())?
        .into_iter()
        .map(|off| model.embed(&audio.slice(off, seg)?))
        .collect()
}

/// Mean cosine similarity over all enrollment × test segment pairs.
pub fn score_segments(enroll: &[Vec<f64>], test: &[Vec<f64>]) -> f64 {
    let total: f64 = enroll
        .iter()
        .flat_map(|a| test.iter().map(move |b| cosine_similarity(a, b)))
        .sum();
    total / (enroll.len() * test.len()) as f64
}

pub fn score_trial(enroll: &AudioBuffer, test: &AudioBuffer, model: &impl Embedder) -> Result<f64> {
    Ok(score_segments(&segment_embeddings(enroll, model)?, &segment_embeddings(test, model)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(targets: &[f64], nontargets: &[f64]) -> ScoreSet {
        ScoreSet::new(
            targets
                .iter()
                .map(|&s| (s, true))
                .chain(nontargets.iter().map(|&s| (s, false)))
                .collect(),
        )
    }

    #[test]
    fn separable_scores() {
        let r = compute_eer(&set(&[0.9, 0.8], &[0.1, 0.2])).unwrap();
        assert_eq!(r.eer, 0.0);
        assert!(r.threshold > 0.2 && r.threshold <= 0.8);
    }

    #[test]
    fn interleaved_example() {
        let r = compute_eer(&set(&[0.6, 0.4], &[0.5, 0.3])).unwrap();
        assert!((r.eer - 0.25).abs() < 1e-15);
    }

    #[test]
    fn fully_inverted_scores_hit_the_chance_diagonal() {
        let r = compute_eer(&set(&[0.1, 0.2], &[0.8, 0.9])).unwrap();
        assert_eq!(r.eer, 0.5);
    }

    #[test]
    fn single_class_is_an_error() {
        assert!(matches!(compute_eer(&set(&[0.1], &[])), Err(Error::Domain(_))));
        assert!(matches!(compute_eer(&set(&[], &[0.3])), Err(Error::Domain(_))));
        assert!(compute_eer(&set(&[f64::NAN], &[0.3])).is_err());
    }

    #[test]
    fn tied_scores() {
        let r = compute_eer(&set(&[0.5, 0.5], &[0.5, 0.5])).unwrap();
        assert!((r.eer - 0.5).abs() < 1e-15);
    }

    #[test]
    fn segmentation() {
        assert_eq!(segment_offsets(64000, 16000).unwrap(), vec![0]);
        assert_eq!(segment_offsets(96000, 16000).unwrap(), vec![0, 16000, 32000]);
        assert_eq!(segment_offsets(95999, 16000).unwrap(), vec![0, 16000]);
        assert!(matches!(segment_offsets(63999, 16000), Err(Error::TooShort(_))));
    }

    #[test]
    fn trial_list_round_trip() {
        let trials = parse_trial_list("1 a.wav b.wav\n\n# comment\n0 a.wav c.wav\n").unwrap();
        assert_eq!(trials.len(), 2);
        assert!(trials[0].target && !trials[1].target);
        assert_eq!(trials[1].test_utterance_id, "c.wav");
        assert!(parse_trial_list("2 a b").is_err());
        assert!(parse_trial_list("1 a").is_err());
        assert_eq!(set(&[0.5], &[0.25]).to_text(), "0.5 1\n0.25 0\n");
    }

    struct Constant(Vec<f64>);

    impl Embedder for Constant {
        fn embed(&self, _: &AudioBuffer) -> Result<Vec<f64>> {
            Ok(self.0.clone())
        }
    }

    /// Embeds by the sign of the first sample, giving orthogonal vectors for +/- inputs.
    struct BySign;

    impl Embedder for BySign {
        fn embed(&self, audio: &AudioBuffer) -> Result<Vec<f64>> {
            Ok(if audio.samples()[0] >= 0.0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] })
        }
    }

    #[test]
    fn score_trial_stub_backbones() {
        let pos = AudioBuffer::new(vec![0.5; 6 * 8000], 8000).unwrap();
        let neg = AudioBuffer::new(vec![-0.5; 4 * 8000], 8000).unwrap();
        assert_eq!(score_trial(&pos, &neg, &BySign).unwrap(), 0.0);
        let s = score_trial(&pos, &pos, &Constant(vec![0.3, -2.0, 1.0])).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
        let short = AudioBuffer::new(vec![0.5; 3 * 8000], 8000).unwrap();
        assert!(matches!(score_trial(&short, &pos, &BySign), Err(Error::TooShort(_))));
    }
}
