//! On-disk formats shared by spectra and features.
//!
//! Binary matrix layout, all little-endian:
//!
//! | offset | type     | field                                   |
//! |--------|----------|-----------------------------------------|
//! | 0      | [u8; 4]  | magic `LFFM`                            |
//! | 4      | u32      | rows (frames, `T`)                      |
//! | 8      | u32      | columns (`N` bins or `M` filters)       |
//! | 12     | u32      | spectrum kind (0 magnitude, 1 power)    |
//! | 16     | u32      | window / kernel length                  |
//! | 20     | u32      | hop (samples between output rows)       |
//! | 24     | u32      | FFT size (0 for time-domain front-ends) |
//! | 28     | f32 × TC | values, row-major (time-major)          |

use std::io::Write;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::filterbank::{bin_to_hz, mel_init, FeatureMatrix, FilterBankParams};
use crate::stft::{SpectrumKind, SpectrumMatrix, StftConfig};

pub const MATRIX_MAGIC: [u8; 4] = *b"LFFM";
pub const MATRIX_HEADER_LEN: usize = 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatrixHeader {
    pub rows: u32,
    pub cols: u32,
    pub spectrum_kind: SpectrumKind,
    pub window_len: u32,
    pub hop: u32,
    pub n_fft: u32,
}

impl MatrixHeader {
    pub fn from_stft(rows: usize, cols: usize, config: &StftConfig) -> Self {
        Self {
            rows: rows as u32,
            cols: cols as u32,
            spectrum_kind: config.spectrum_kind,
            window_len: config.window_len_samples as u32,
            hop: config.hop_samples as u32,
            n_fft: config.n_fft as u32,
        }
    }
}

pub fn encode_matrix(header: &MatrixHeader, values: &[f64]) -> Result<Vec<u8>> {
    if values.len() != header.rows as usize * header.cols as usize {
        return Err(Error::Shape(format!(
            "{} values for a {}x{} matrix",
            values.len(),
            header.rows,
            header.cols
        )));
    }
    let mut out = Vec::with_capacity(MATRIX_HEADER_LEN + 4 * values.len());
    out.extend_from_slice(&MATRIX_MAGIC);
    for field in [
        header.rows,
        header.cols,
        header.spectrum_kind.code(),
        header.window_len,
        header.hop,
        header.n_fft,
    ] {
        out.extend_from_slice(&field.to_le_bytes());
    }
    for v in values {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_matrix(bytes: &[u8]) -> Result<(MatrixHeader, Vec<f32>)> {
    if bytes.len() < MATRIX_HEADER_LEN || bytes[..4] != MATRIX_MAGIC {
        return Err(Error::Format("missing LFFM matrix header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let header = MatrixHeader {
        rows: word(0),
        cols: word(1),
        spectrum_kind: SpectrumKind::from_code(word(2))
            .ok_or_else(|| Error::Format(format!("unknown spectrum kind {}", word(2))))?,
        window_len: word(3),
        hop: word(4),
        n_fft: word(5),
    };
    let count = header.rows as usize * header.cols as usize;
    let payload = &bytes[MATRIX_HEADER_LEN..];
    if payload.len() != 4 * count {
        return Err(Error::Format(format!(
            "payload of {} bytes for a {}x{} matrix",
            payload.len(),
            header.rows,
            header.cols
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Ok((header, values))
}

pub fn encode_spectrum(spectrum: &SpectrumMatrix) -> Result<Vec<u8>> {
    let header = MatrixHeader::from_stft(spectrum.n_frames(), spectrum.n_bins(), spectrum.config());
    encode_matrix(&header, spectrum.values())
}

/// Features share the spectrum layout with `M` in the column field; the remaining
/// header fields describe the analysis that produced the rows.
pub fn encode_features(features: &FeatureMatrix, analysis: &MatrixHeader) -> Result<Vec<u8>> {
    let header = MatrixHeader {
        rows: features.n_frames() as u32,
        cols: features.n_filters() as u32,
        ..*analysis
    };
    encode_matrix(&header, features.values())
}

/// Debug CSV: a header row `frame,c0,c1,...` then one row per frame.
pub fn write_matrix_csv(mut w: impl Write, rows: usize, cols: usize, values: &[f64]) -> Result<()> {
    let mut line = String::from("frame");
    for c in 0..cols {
        line.push_str(&format!(",c{c}"));
    }
    writeln!(w, "{line}")?;
    for r in 0..rows {
        let row = &values[r * cols..(r + 1) * cols];
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{r},{}", cells.join(","))?;
    }
    Ok(())
}

/// Columns of [`write_filter_csv`].
pub const FILTER_CSV_COLUMNS: [&str; 10] = [
    "filter_index",
    "alpha_bins",
    "beta_bins",
    "alpha_hz",
    "bandwidth_hz",
    "mel_alpha_bins",
    "mel_beta_bins",
    "mel_alpha_hz",
    "mel_bandwidth_hz",
    "config_hash",
];

/// Learned filter centers and bandwidths next to the Mel initialization for the same
/// `M`, `N` and shape. Values are written at f32 precision, the storage precision of
/// model files, so a freshly initialized model reproduces the Mel columns exactly.
pub fn write_filter_csv(mut w: impl Write, params: &FilterBankParams, sample_rate: u32, hash: &str) -> Result<()> {
    params.validate()?;
    let reference = mel_init(params.n_filters(), params.n_bins, sample_rate, params.shape)?;
    let hz = |bins: f64| bin_to_hz(bins, params.n_bins, sample_rate);
    let r = |v: f64| v as f32;
    writeln!(w, "{}", FILTER_CSV_COLUMNS.join(","))?;
    for i in 0..params.n_filters() {
        let (a, b) = (r(params.alphas[i]) as f64, r(params.betas[i]) as f64);
        let (ma, mb) = (r(reference.alphas[i]) as f64, r(reference.betas[i]) as f64);
        writeln!(
            w,
            "{i},{},{},{},{},{},{},{},{},{hash}",
            r(a),
            r(b),
            r(hz(a)),
            r(hz(b)),
            r(ma),
            r(mb),
            r(hz(ma)),
            r(hz(mb))
        )?;
    }
    Ok(())
}

/// First 16 hex digits of the SHA-256 of `bytes`; stamped on outputs for provenance.
pub fn config_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    hex::encode(&digest[..8])
}
