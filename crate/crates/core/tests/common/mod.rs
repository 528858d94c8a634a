//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls into the code under test except for plain data types.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_signal(len: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..len).map(|_| r.gen_range(-1.0..1.0)).collect()
}

/// Periodic window of length `len`, written out from the textbook formulas.
pub fn window_oracle(kind: &str, len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| {
            let x = 2.0 * PI * n as f64 / len as f64;
            match kind {
                "hann" => 0.5 - 0.5 * x.cos(),
                "hamming" => 0.54 - 0.46 * x.cos(),
                _ => 1.0,
            }
        })
        .collect()
}

/// O(N^2) DFT power or magnitude spectrum, bins `0..n_fft/2` (Nyquist dropped).
/// Angles are reduced exactly through `(k * n) mod n_fft`.
pub fn brute_spectrum(
    samples: &[f64],
    win: &[f64],
    hop: usize,
    n_fft: usize,
    power: bool,
) -> (usize, Vec<f64>) {
    let w = win.len();
    let n_frames = (samples.len() - w) / hop + 1;
    let n_bins = n_fft / 2;
    let table: Vec<(f64, f64)> = (0..n_fft)
        .map(|j| {
            let a = 2.0 * PI * j as f64 / n_fft as f64;
            (a.cos(), a.sin())
        })
        .collect();
    let mut out = Vec::with_capacity(n_frames * n_bins);
    for t in 0..n_frames {
        let frame = &samples[t * hop..t * hop + w];
        for k in 0..n_bins {
            let (mut re, mut im) = (0.0, 0.0);
            for n in 0..w {
                let (c, s) = table[(k * n) % n_fft];
                let x = frame[n] * win[n];
                re += x * c;
                im -= x * s;
            }
            let p = re * re + im * im;
            out.push(if power { p } else { p.sqrt() });
        }
    }
    (n_frames, out)
}

/// Symmetric-triangle Mel bank: `M + 2` points equispaced on the natural-log Mel
/// scale `1127 ln(1 + f/700)` between 0 and Nyquist, bin = f / Nyquist * (N - 1);
/// filter `i` peaks at point `i + 1` and reaches zero half the outer span away.
pub fn mel_bank_oracle(n_filters: usize, n_bins: usize, sample_rate: f64) -> Vec<Vec<f64>> {
    let nyq = sample_rate / 2.0;
    let top = 1127.0 * (1.0 + nyq / 700.0).ln();
    let pts: Vec<f64> = (0..n_filters + 2)
        .map(|k| {
            let m = top * k as f64 / (n_filters + 1) as f64;
            let hz = 700.0 * ((m / 1127.0).exp() - 1.0);
            hz / nyq * (n_bins - 1) as f64
        })
        .collect();
    (0..n_filters)
        .map(|i| {
            let center = pts[i + 1];
            let half = (pts[i + 2] - pts[i]) / 2.0;
            (0..n_bins)
                .map(|n| {
                    let v = 1.0 - (n as f64 - center).abs() / half;
                    if v > 0.0 {
                        v
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// `10 log10(spectrum · bank + eps)`, frames-major.
pub fn log_mel_oracle(spectrum: &[f64], n_frames: usize, n_bins: usize, bank: &[Vec<f64>], eps: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_frames * bank.len());
    for t in 0..n_frames {
        let row = &spectrum[t * n_bins..(t + 1) * n_bins];
        for filt in bank {
            let e: f64 = row.iter().zip(filt).map(|(s, w)| s * w).sum();
            out.push(10.0 * (e + eps).log10());
        }
    }
    out
}

/// Equal error rate by brute force: all operating points at every threshold
/// (each score plus ±∞), then the lowest crossing of the FAR = FRR line over
/// every pair of points on opposite sides of it. Points are integer counts
/// (rejected targets `a`, accepted non-targets `b`); each crossing is the exact
/// ratio `(d1·b2 − d2·b1) / (nn·(d1 − d2))` with `d = b·nt − a·nn`, so any two
/// points on one line give the same float.
pub fn exhaustive_eer(targets: &[f64], nontargets: &[f64]) -> f64 {
    let (nt, nn) = (targets.len() as i128, nontargets.len() as i128);
    let mut thresholds: Vec<f64> = targets.iter().chain(nontargets).copied().collect();
    thresholds.push(f64::INFINITY);
    thresholds.push(f64::NEG_INFINITY);
    let points: Vec<(i128, i128)> = thresholds
        .iter()
        .map(|&th| {
            let a = targets.iter().filter(|&&s| s < th).count() as i128;
            let b = nontargets.iter().filter(|&&s| s >= th).count() as i128;
            (a, b)
        })
        .collect();
    let mut best = f64::INFINITY;
    for &(a1, b1) in &points {
        for &(a2, b2) in &points {
            let (d1, d2) = (b1 * nt - a1 * nn, b2 * nt - a2 * nn);
            if d1 >= 0 && d2 <= 0 {
                let v = if d1 == d2 {
                    b1 as f64 / nn as f64
                } else {
                    (d1 * b2 - d2 * b1) as f64 / (nn * (d1 - d2)) as f64
                };
                best = best.min(v);
            }
        }
    }
    best
}

/// Plain softmax cross-entropy of one row of logits, via log-sum-exp.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}

pub fn normalize(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

/// Central difference `(f(x + h) - f(x - h)) / 2h` along coordinate `i`.
pub fn central_diff(x: &[f64], i: usize, h: f64, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let mut p = x.to_vec();
    p[i] += h;
    let up = f(&p);
    p[i] = x[i] - h;
    let down = f(&p);
    (up - down) / (2.0 * h)
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

pub fn write_wav(path: &Path, samples: &[f64], sample_rate: u32) {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).unwrap();
    for &s in samples {
        w.write_sample((s * 32768.0).round().clamp(-32768.0, 32767.0) as i16).unwrap();
    }
    w.finalize().unwrap();
}
