mod common;

use lff_core::stft::{compute_spectrum, compute_spectrum_conv};
use lff_core::{AudioBuffer, SpectrumKind, StftConfig, WindowKind};
use proptest::prelude::*;

fn audio(samples: Vec<f64>) -> AudioBuffer {
    AudioBuffer::new(samples, 16000).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Rectangular window with w = n_fft, power mode: the full spectrum (both halves,
    /// reconstructed by conjugate symmetry) sums to n_fft · Σx².
    #[test]
    fn parseval(seed in any::<u64>(), log_n in 4u32..10) {
        let n_fft = 1usize << log_n;
        let x = common::random_signal(n_fft, seed);
        let cfg = StftConfig {
            window_len_samples: n_fft,
            hop_samples: 1,
            n_fft,
            window_kind: WindowKind::Rectangular,
            spectrum_kind: SpectrumKind::Power,
        };
        let s = compute_spectrum(&audio(x.clone()), &cfg).unwrap();
        prop_assert_eq!(s.n_frames(), 1);
        // Kept bins are 0..n_fft/2; Nyquist is recomputed directly.
        let nyquist: f64 = x.iter().enumerate().map(|(n, v)| if n % 2 == 0 { *v } else { -v }).sum::<f64>().powi(2);
        let kept = s.frame(0);
        let full = kept[0] + 2.0 * kept[1..].iter().sum::<f64>() + nyquist;
        let energy: f64 = x.iter().map(|v| v * v).sum();
        prop_assert!((full - n_fft as f64 * energy).abs() <= 1e-6 * n_fft as f64 * energy);
    }

    /// Shifting the input by one hop shifts the frames by exactly one.
    #[test]
    fn time_shift_covariance(seed in any::<u64>(), extra in 0usize..600, hop in prop::sample::select(vec![80usize, 160, 200])) {
        let cfg = StftConfig { hop_samples: hop, ..StftConfig::default() };
        let x = common::random_signal(400 + 3 * hop + extra + hop, seed);
        let original = compute_spectrum(&audio(x[hop..].to_vec()), &cfg).unwrap();
        let shifted = compute_spectrum(&audio(x.clone()), &cfg).unwrap();
        prop_assert_eq!(shifted.n_frames(), original.n_frames() + 1);
        for t in 1..shifted.n_frames() {
            prop_assert_eq!(shifted.frame(t), original.frame(t - 1));
        }
    }

    #[test]
    fn spectra_are_non_negative(seed in any::<u64>(), len in 400usize..3000, magnitude in any::<bool>()) {
        let cfg = StftConfig {
            spectrum_kind: if magnitude { SpectrumKind::Magnitude } else { SpectrumKind::Power },
            ..StftConfig::default()
        };
        let a = audio(common::random_signal(len, seed));
        for s in [compute_spectrum(&a, &cfg).unwrap(), compute_spectrum_conv(&a, &cfg).unwrap()] {
            prop_assert!(s.values().iter().all(|v| *v >= 0.0 && v.is_finite()));
        }
    }
}

#[test]
fn two_seconds_give_198_frames_of_512_bins() {
    let s = compute_spectrum(&audio(vec![0.1; 32000]), &StftConfig::default()).unwrap();
    assert_eq!((s.n_frames(), s.n_bins()), (198, 512));
}
