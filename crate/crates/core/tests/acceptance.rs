//! Acceptance criteria 1–8, one PASS/FAIL line each.
//!
//! Criteria 1–7 each return a digest of every number they computed; criterion 8
//! reruns them and requires identical digests.

mod common;

use std::fs;
use std::time::{Duration, Instant};

use common::*;
use lff_core::bench::BenchSpec;
use lff_core::commands::cmd_bench;
use lff_core::eval::{compute_eer, ScoreSet};
use lff_core::experiment::{run_toy_experiment, ToySpec};
use lff_core::filterbank::{self, mel_init, DEFAULT_EPSILON};
use lff_core::io::config_hash;
use lff_core::signal::{load_wav, synth_speaker_utterance, SyntheticSpeakerProfile};
use lff_core::stft::{compute_spectrum, compute_spectrum_conv};
use lff_core::trainer::{am_softmax_loss, FrontendSpec, TrainConfig, TrainedModel};
use lff_core::{AudioBuffer, FilterBankParams, FilterShape, SpectrumKind, SpectrumMatrix, StftConfig, WindowKind};
use rand::seq::SliceRandom;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
    digest: Vec<f64>,
}

fn digest_hex(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_bits().to_le_bytes()).collect();
    config_hash(&bytes)
}

// ---------------------------------------------------------------- criterion 1

fn criterion_1() -> Outcome {
    let mut digest = Vec::new();
    let mut worst: f64 = 0.0;
    let cfg = StftConfig::default();
    let mut r = rng(101);

    for case in 0..100 {
        let m = if case % 2 == 0 { 64 } else { 40 };
        let n_frames = r.gen_range(1..5);
        let values: Vec<f64> = (0..n_frames * 512).map(|_| 10f64.powf(r.gen_range(-3.0..3.0))).collect();
        let spectrum = SpectrumMatrix::from_values(values.clone(), n_frames, 512, cfg).unwrap();
        let params = mel_init(m, 512, 16000, FilterShape::Triangle).unwrap();
        let got = filterbank::forward(&spectrum, &params, DEFAULT_EPSILON).unwrap();
        let want = log_mel_oracle(&values, n_frames, 512, &mel_bank_oracle(m, 512, 16000.0), 1e-10);
        for (g, w) in got.values().iter().zip(&want) {
            worst = worst.max((g - w).abs());
        }
        digest.extend_from_slice(got.values());
    }

    let dir = tempfile::tempdir().unwrap();
    let bank = mel_bank_oracle(64, 512, 16000.0);
    for k in 0..10u64 {
        let profile = SyntheticSpeakerProfile {
            fundamental_hz: 90.0 + 17.0 * k as f64,
            harmonic_amplitudes: (0..12).map(|h| 1.0 / (1.0 + ((h + k as usize) % 5) as f64)).collect(),
            spectral_tilt_db_per_octave: -3.0 - k as f64 * 0.5,
            jitter_fraction: 0.01,
        };
        let audio = synth_speaker_utterance(&profile, 1.0, 16000, k).unwrap();
        let path = dir.path().join(format!("utt{k}.wav"));
        write_wav(&path, audio.samples(), 16000);

        let loaded = load_wav(&path).unwrap();
        let spectrum = compute_spectrum(&loaded, &cfg).unwrap();
        let params = mel_init(64, 512, 16000, FilterShape::Triangle).unwrap();
        let got = filterbank::forward(&spectrum, &params, DEFAULT_EPSILON).unwrap();

        let samples: Vec<f64> = hound::WavReader::open(&path)
            .unwrap()
            .samples::<i16>()
            .map(|s| s.unwrap() as f64 / 32768.0)
            .collect();
        let (n_frames, power) = brute_spectrum(&samples, &window_oracle("hann", 400), 160, 1024, true);
        let want = log_mel_oracle(&power, n_frames, 512, &bank, 1e-10);
        for (g, w) in got.values().iter().zip(&want) {
            worst = worst.max((g - w).abs());
        }
        digest.extend_from_slice(got.values());
    }
    Outcome {
        pass: worst < 1e-6,
        detail: format!("100 spectra + 10 WAVs, max |Δ| = {worst:.2e} dB (tol 1e-6)"),
        digest,
    }
}

// ---------------------------------------------------------------- criterion 2

fn criterion_2() -> Outcome {
    let configs = [
        (StftConfig::default(), "hann", true),
        (
            StftConfig {
                window_len_samples: 256,
                hop_samples: 100,
                n_fft: 512,
                window_kind: WindowKind::Hamming,
                spectrum_kind: SpectrumKind::Magnitude,
            },
            "hamming",
            false,
        ),
        (
            StftConfig {
                window_len_samples: 512,
                hop_samples: 128,
                n_fft: 512,
                window_kind: WindowKind::Rectangular,
                spectrum_kind: SpectrumKind::Power,
            },
            "rect",
            true,
        ),
    ];
    let mut r = rng(202);
    let (mut dft_err, mut conv_err): (f64, f64) = (0.0, 0.0);
    let mut digest = Vec::new();
    for case in 0..24 {
        let (cfg, wname, power) = &configs[case % configs.len()];
        let len = r.gen_range(512..=4096);
        let samples = random_signal(len, 1000 + case as u64);
        let audio = AudioBuffer::new(samples.clone(), 16000).unwrap();
        let fft = compute_spectrum(&audio, cfg).unwrap();
        let conv = compute_spectrum_conv(&audio, cfg).unwrap();
        let (n_frames, want) = brute_spectrum(
            &samples,
            &window_oracle(wname, cfg.window_len_samples),
            cfg.hop_samples,
            cfg.n_fft,
            *power,
        );
        assert_eq!(fft.n_frames(), n_frames);
        for ((f, c), w) in fft.values().iter().zip(conv.values()).zip(&want) {
            dft_err = dft_err.max((f - w).abs());
            conv_err = conv_err.max((f - c).abs());
        }
        digest.extend_from_slice(fft.values());
        digest.extend_from_slice(conv.values());
    }
    Outcome {
        pass: dft_err < 1e-8 && conv_err < 1e-9,
        detail: format!("24 signals, FFT vs DFT {dft_err:.2e} (tol 1e-8), conv vs FFT {conv_err:.2e} (tol 1e-9)"),
        digest,
    }
}

// ---------------------------------------------------------------- criterion 3

const KINK_EXCLUSION: f64 = 0.1;

fn near_kink(alpha: f64, beta: f64, n_bins: usize) -> bool {
    (0..n_bins).any(|n| {
        let d = (n as f64 - alpha).abs();
        d < KINK_EXCLUSION || (d - beta / 2.0).abs() < KINK_EXCLUSION
    })
}

fn random_instance(shape: FilterShape, r: &mut impl Rng) -> (SpectrumMatrix, FilterBankParams, Vec<f64>) {
    let n_bins = r.gen_range(16..=64);
    let m = r.gen_range(1..=6);
    let n_frames = r.gen_range(1..=4);
    let cfg = StftConfig {
        window_len_samples: 2 * (n_bins - 1),
        hop_samples: 1,
        n_fft: 2 * n_bins,
        ..StftConfig::default()
    };
    let values: Vec<f64> = (0..n_frames * n_bins).map(|_| r.gen_range(0.1..10.0)).collect();
    let spectrum = SpectrumMatrix::from_values(values, n_frames, n_bins, cfg).unwrap();
    let (mut alphas, mut betas) = (Vec::new(), Vec::new());
    while alphas.len() < m {
        let a = r.gen_range(2.0..(n_bins - 3) as f64);
        let b = match shape {
            FilterShape::Triangle => r.gen_range(2.0..(n_bins as f64 / 2.0)),
            FilterShape::Bell => r.gen_range(0.8..(n_bins as f64 / 4.0)),
        };
        if shape == FilterShape::Triangle && near_kink(a, b, n_bins) {
            continue;
        }
        alphas.push(a);
        betas.push(b);
    }
    let params = FilterBankParams::new(shape, n_bins, alphas, betas).unwrap();
    let upstream = (0..n_frames * m).map(|_| r.gen_range(-1.0..1.0)).collect();
    (spectrum, params, upstream)
}

fn filterbank_grad_check(shape: FilterShape, instances: usize, r: &mut impl Rng, digest: &mut Vec<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    let h = 1e-4;
    for _ in 0..instances {
        let (spectrum, params, upstream) = random_instance(shape, r);
        let g = filterbank::backward(&spectrum, &params, &upstream, DEFAULT_EPSILON).unwrap();
        let loss = |p: &FilterBankParams| -> f64 {
            let f = filterbank::forward(&spectrum, p, DEFAULT_EPSILON).unwrap();
            f.values().iter().zip(&upstream).map(|(a, b)| a * b).sum()
        };
        for i in 0..params.n_filters() {
            let fd_a = central_diff(&params.alphas, i, h, |a| {
                loss(&FilterBankParams { alphas: a.to_vec(), ..params.clone() })
            });
            let fd_b = central_diff(&params.betas, i, h, |b| {
                loss(&FilterBankParams { betas: b.to_vec(), ..params.clone() })
            });
            worst = worst.max(rel_err(g.d_alpha[i], fd_a, 1e-3));
            worst = worst.max(rel_err(g.d_beta[i], fd_b, 1e-3));
        }
        digest.extend_from_slice(&g.d_alpha);
        digest.extend_from_slice(&g.d_beta);
    }
    worst
}

fn toy_model(shape: FilterShape, seed: u64) -> (TrainedModel, Vec<lff_core::trainer::PreparedInput>, Vec<usize>) {
    let spec = FrontendSpec {
        shape,
        n_filters: 8,
        ..FrontendSpec::default()
    };
    let config = TrainConfig {
        hidden: 8,
        embedding_dim: 4,
        ..TrainConfig::default()
    };
    let mut r = rng(seed);
    let frontend = spec.build(16000, 0.0, &mut r).unwrap();
    let model = TrainedModel::init(frontend, 2, 16000, &config, &mut r);
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    for (label, f0) in [(0usize, 130.0), (1, 210.0)] {
        for k in 0..2u64 {
            let profile = SyntheticSpeakerProfile {
                fundamental_hz: f0,
                harmonic_amplitudes: vec![1.0, 0.6, 0.4, 0.3, 0.2],
                spectral_tilt_db_per_octave: -4.0,
                jitter_fraction: 0.02,
            };
            let audio = synth_speaker_utterance(&profile, 0.3, 16000, seed * 10 + k).unwrap();
            inputs.push(model.prepare(&audio).unwrap());
            labels.push(label);
        }
    }
    (model, inputs, labels)
}

fn end_to_end_check(shape: FilterShape, digest: &mut Vec<f64>) -> (f64, usize) {
    let (model, inputs, labels) = toy_model(shape, 7);
    let (_, grads) = model.batch_loss_and_grads(&inputs, &labels, 30.0, 0.2).unwrap();
    let g = grads.filters.unwrap();
    let base = model.frontend.filter_params().unwrap().clone();
    let loss_with = |p: FilterBankParams| {
        let mut m = model.clone();
        *m.frontend.filter_params_mut().unwrap() = p;
        m.batch_loss(&inputs, &labels, 30.0, 0.2).unwrap()
    };
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for i in 0..base.n_filters() {
        if shape == FilterShape::Triangle && near_kink(base.alphas[i], base.betas[i], base.n_bins) {
            continue;
        }
        checked += 1;
        let fd_a = central_diff(&base.alphas, i, h, |a| loss_with(FilterBankParams { alphas: a.to_vec(), ..base.clone() }));
        let fd_b = central_diff(&base.betas, i, h, |b| loss_with(FilterBankParams { betas: b.to_vec(), ..base.clone() }));
        worst = worst.max(rel_err(g.d_alpha[i], fd_a, 1e-6));
        worst = worst.max(rel_err(g.d_beta[i], fd_b, 1e-6));
    }
    digest.extend_from_slice(&g.d_alpha);
    digest.extend_from_slice(&g.d_beta);
    (worst, checked)
}

fn criterion_3() -> Outcome {
    let mut r = rng(303);
    let mut digest = Vec::new();
    let tri = filterbank_grad_check(FilterShape::Triangle, 60, &mut r, &mut digest);
    let bell = filterbank_grad_check(FilterShape::Bell, 60, &mut r, &mut digest);
    let (e2e_bell, n_bell) = end_to_end_check(FilterShape::Bell, &mut digest);
    let (e2e_tri, n_tri) = end_to_end_check(FilterShape::Triangle, &mut digest);
    Outcome {
        pass: tri < 1e-4 && bell < 1e-4 && e2e_bell < 1e-3 && e2e_tri < 1e-3 && n_bell > 0 && n_tri > 0,
        detail: format!(
            "60+60 instances: triangle {tri:.1e}, bell {bell:.1e} (tol 1e-4); end-to-end bell {e2e_bell:.1e} ({n_bell} filters), triangle {e2e_tri:.1e} ({n_tri} filters) (tol 1e-3)"
        ),
        digest,
    }
}

// ---------------------------------------------------------------- criterion 4

fn criterion_4() -> Outcome {
    let mut r = rng(404);
    let mut digest = Vec::new();
    let (mut reduction, mut grad): (f64, f64) = (0.0, 0.0);
    for _ in 0..20 {
        let (batch, classes, dim) = (r.gen_range(1..6), r.gen_range(2..6), r.gen_range(2..8));
        let emb: Vec<f64> = (0..batch * dim).map(|_| r.gen_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..classes * dim).map(|_| r.gen_range(-1.0..1.0)).collect();
        let labels: Vec<usize> = (0..batch).map(|_| r.gen_range(0..classes)).collect();

        let out = am_softmax_loss(&emb, &w, &labels, dim, 1.0, 0.0).unwrap();
        let oracle: f64 = (0..batch)
            .map(|b| {
                let e = normalize(&emb[b * dim..(b + 1) * dim]);
                let logits: Vec<f64> = (0..classes)
                    .map(|c| {
                        let wc = normalize(&w[c * dim..(c + 1) * dim]);
                        e.iter().zip(&wc).map(|(x, y)| x * y).sum()
                    })
                    .collect();
                cross_entropy(&logits, labels[b])
            })
            .sum::<f64>()
            / batch as f64;
        reduction = reduction.max((out.loss - oracle).abs());

        let (s, m) = (30.0, 0.2);
        let out = am_softmax_loss(&emb, &w, &labels, dim, s, m).unwrap();
        let h = 1e-6;
        for i in 0..emb.len() {
            let fd = central_diff(&emb, i, h, |e| am_softmax_loss(e, &w, &labels, dim, s, m).unwrap().loss);
            grad = grad.max(rel_err(out.grad_embeddings[i], fd, 1e-4));
        }
        for i in 0..w.len() {
            let fd = central_diff(&w, i, h, |wv| am_softmax_loss(&emb, wv, &labels, dim, s, m).unwrap().loss);
            grad = grad.max(rel_err(out.grad_class_weights[i], fd, 1e-4));
        }
        digest.push(out.loss);
        digest.extend_from_slice(&out.grad_embeddings);
    }
    Outcome {
        pass: reduction < 1e-9 && grad < 1e-4,
        detail: format!("20 instances: m=0,s=1 vs cross-entropy {reduction:.1e} (tol 1e-9); s=30,m=0.2 gradients {grad:.1e} (tol 1e-4)"),
        digest,
    }
}

// ---------------------------------------------------------------- criterion 5

fn criterion_5() -> Outcome {
    let mut r = rng(505);
    let mut digest = Vec::new();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let nt = r.gen_range(1..=10);
        let nn = r.gen_range(1..=10);
        // Coarse grid so ties are common.
        let t: Vec<f64> = (0..nt).map(|_| r.gen_range(0..8) as f64 / 4.0).collect();
        let n: Vec<f64> = (0..nn).map(|_| r.gen_range(0..8) as f64 / 4.0 - 0.5).collect();
        let set = ScoreSet::new(t.iter().map(|&s| (s, true)).chain(n.iter().map(|&s| (s, false))).collect());
        let eer = compute_eer(&set).unwrap().eer;
        worst = worst.max((eer - exhaustive_eer(&t, &n)).abs());
        digest.push(eer);
    }

    let mut separable: f64 = 0.0;
    for _ in 0..20 {
        let t: Vec<(f64, bool)> = (0..50).map(|_| (r.gen_range(0.5..1.0), true)).collect();
        let n: Vec<(f64, bool)> = (0..50).map(|_| (r.gen_range(-1.0..0.4), false)).collect();
        separable = separable.max(compute_eer(&ScoreSet::new([t, n].concat())).unwrap().eer);
    }

    let mut shuffled_worst: f64 = 0.0;
    for _ in 0..10 {
        let scores: Vec<f64> = (0..2000).map(|_| r.gen::<f64>()).collect();
        let mut labels: Vec<bool> = (0..2000).map(|i| scores[i] > 0.5).collect();
        labels.shuffle(&mut r);
        let eer = compute_eer(&ScoreSet::new(scores.into_iter().zip(labels).collect())).unwrap().eer;
        shuffled_worst = shuffled_worst.max((eer - 0.5).abs());
        digest.push(eer);
    }
    Outcome {
        pass: worst == 0.0 && separable == 0.0 && shuffled_worst <= 0.05,
        detail: format!(
            "1000 sets vs exhaustive sweep max |Δ| = {worst:.1e}; separable EER {separable}; shuffled max |EER-0.5| = {shuffled_worst:.3}"
        ),
        digest,
    }
}

// ---------------------------------------------------------------- criterion 6

fn criterion_6() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let spec = BenchSpec {
        repeats: 1,
        ..BenchSpec::default()
    };
    let spec_path = dir.path().join("sweep.json");
    fs::write(&spec_path, serde_json::to_vec(&spec).unwrap()).unwrap();
    let out = dir.path().join("bench.csv");
    cmd_bench(&spec_path, &out, Some(6)).unwrap();

    // frontend, stride, pool, n_frames, fft, filter, conv, total, ...
    let text = fs::read_to_string(&out).unwrap();
    let rows: Vec<Vec<String>> = text.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    let num = |row: &Vec<String>, col: usize| row[col].parse::<f64>().unwrap();
    let mut digest = Vec::new();
    let mut conv_ratio_err: f64 = 0.0;
    let mut lff_constant = true;
    let l = 60 * 16000;
    let t = (l - 400) / 160 + 1;
    for name in ["lff-t", "sinc", "gabor"] {
        let mut cells: Vec<&Vec<String>> = rows.iter().filter(|r| r[0] == name).collect();
        cells.sort_by_key(|r| std::cmp::Reverse(r[1].parse::<usize>().unwrap()));
        for row in &cells {
            digest.extend([num(row, 4), num(row, 5), num(row, 6)]);
        }
        if name == "lff-t" {
            lff_constant = cells.iter().all(|r| num(r, 5) == (t * 512 * 64) as f64);
        } else {
            for pair in cells.windows(2) {
                let (s_big, s_small) = (num(pair[0], 1), num(pair[1], 1));
                assert_eq!(s_big, 2.0 * s_small);
                let ratio = num(pair[1], 6) / num(pair[0], 6);
                conv_ratio_err = conv_ratio_err.max((ratio - 2.0).abs() / 2.0);
            }
        }
    }
    Outcome {
        pass: conv_ratio_err < 1e-3 && lff_constant && rows.len() == 9,
        detail: format!(
            "strides 160/80/40 on 60 s: conv count(s/2)/count(s) off 2 by {:.4}% (tol 0.1%); LFF filter MACs constant = T·N·M: {lff_constant}",
            conv_ratio_err * 100.0
        ),
        digest,
    }
}

// ---------------------------------------------------------------- criterion 7

fn criterion_7() -> Outcome {
    let spec = ToySpec {
        seed: 1,
        ..ToySpec::default()
    };
    let outcome = run_toy_experiment(&spec, "acceptance").unwrap();
    let get = |name: &str| outcome.metrics.frontends.iter().find(|f| f.name == name).unwrap();
    let (mel, lff) = (get("mel"), get("lff-t"));
    let d_beta = lff.mean_abs_delta_beta.unwrap();
    let mut digest = vec![mel.eer, lff.eer, mel.final_loss, lff.final_loss, d_beta];
    for run in &outcome.runs {
        digest.extend(run.history.epochs.iter().map(|e| e.loss));
    }
    Outcome {
        pass: lff.epochs <= 20 && lff.eer <= mel.eer + 0.02 && d_beta > 0.1 && lff.final_loss < lff.initial_loss,
        detail: format!(
            "{} speakers x {} utts x {} s, {} epochs: EER lff-t {:.4} vs mel {:.4} (+0.02 allowed); mean |Δβ| {:.3} bin (> 0.1)",
            outcome.metrics.n_speakers,
            spec.data.utterances_per_speaker,
            spec.data.utterance_s,
            lff.epochs,
            lff.eer,
            mel.eer,
            d_beta
        ),
        digest,
    }
}

// ----------------------------------------------------------------------------

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 7] = [
        ("mel equivalence", criterion_1, Duration::from_secs(10)),
        ("STFT correctness", criterion_2, Duration::from_secs(30)),
        ("gradient suite", criterion_3, Duration::from_secs(60)),
        ("AM-Softmax", criterion_4, Duration::from_secs(60)),
        ("EER estimator", criterion_5, Duration::from_secs(60)),
        ("cost law", criterion_6, Duration::from_secs(120)),
        ("desk-scale training", criterion_7, Duration::from_secs(300)),
    ];
    let mut all_pass = true;
    let mut digests = Vec::new();
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let pass = outcome.pass && elapsed < *limit;
        all_pass &= pass;
        println!(
            "criterion {} ({name}): {} | {} | {:.1} s (limit {} s)",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
        digests.push(digest_hex(&outcome.digest));
    }

    let start = Instant::now();
    let rerun: Vec<String> = criteria.iter().map(|(_, run, _)| digest_hex(&run().digest)).collect();
    let same = rerun == digests;
    all_pass &= same;
    println!(
        "criterion 8 (determinism): {} | reran 1-7, digests {} [{}] | {:.1} s",
        if same { "PASS" } else { "FAIL" },
        if same { "identical" } else { "differ" },
        digests.join(" "),
        start.elapsed().as_secs_f64()
    );

    if !all_pass {
        std::process::exit(1);
    }
}
