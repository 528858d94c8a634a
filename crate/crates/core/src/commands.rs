//! The four `lff` subcommands as library functions.
//!
//! Every command validates all inputs before it creates any output, and stamps a
//! configuration hash (see [`config_hash`]) into everything it writes.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bench::{write_bench_csv, BenchRow, BenchSpec};
use crate::error::{Error, Result};
use crate::experiment::{run_toy_experiment, ToyMetrics, ToySpec};
use crate::filterbank::{self, mel_init, FeatureMatrix, FilterBankParams, DEFAULT_EPSILON};
use crate::io::{config_hash, encode_features, write_filter_csv, MatrixHeader};
use crate::signal::{load_wav, AudioBuffer};
use crate::stft::{SpectrumKind, StftConfig, StftPlan};
use crate::timedomain::{frontend_forward, KernelBank, TimeKernelParams};
use crate::trainer::{Frontend, FrontendKind, FrontendSpec, TrainedModel};

/// Name of the sidecar manifest written next to extracted features.
pub const MANIFEST_NAME: &str = "manifest.csv";

/// Parameters for `extract`; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractConfig {
    pub n_filters: usize,
    pub stft: StftConfig,
    /// Time-domain front-ends only.
    pub kernel_len: usize,
    pub stride: usize,
    pub pool: usize,
    /// Explicit filter parameters for `lff-t` / `lff-b`; Mel initialization when absent.
    pub filters: Option<FilterBankParams>,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        let fs = FrontendSpec::default();
        Self {
            n_filters: fs.n_filters,
            stft: fs.stft,
            kernel_len: fs.kernel_len,
            stride: fs.stride,
            pool: fs.pool,
            filters: None,
        }
    }
}

/// One row of the extraction manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedFile {
    pub input: PathBuf,
    pub output: PathBuf,
    pub rows: usize,
    pub cols: usize,
}

/// Front-end fixed at extraction time for one sample rate.
enum Extractor {
    Filterbank { plan: StftPlan, params: FilterBankParams },
    TimeDomain(TimeKernelParams),
}

impl Extractor {
    fn new(name: &str, config: &ExtractConfig, sample_rate: u32) -> Result<Self> {
        let spec = FrontendSpec::named(name)?;
        match spec.kind {
            FrontendKind::Lff | FrontendKind::MelFrozen => {
                config.stft.validate()?;
                let n_bins = config.stft.n_bins();
                let params = match &config.filters {
                    Some(_) if spec.kind == FrontendKind::MelFrozen => {
                        return Err(Error::Config("the mel front-end takes no explicit filters".into()))
                    }
                    Some(p) => {
                        if p.shape != spec.shape || p.n_bins != n_bins {
                            return Err(Error::Config(format!(
                                "filters are {:?} over {} bins; {name} needs {:?} over {n_bins}",
                                p.shape, p.n_bins, spec.shape
                            )));
                        }
                        p.clone()
                    }
                    None => mel_init(config.n_filters, n_bins, sample_rate, spec.shape)?,
                };
                Ok(Extractor::Filterbank {
                    plan: StftPlan::new(config.stft)?,
                    params,
                })
            }
            FrontendKind::Sinc | FrontendKind::Gabor => {
                if config.filters.is_some() {
                    return Err(Error::Config(format!("{name} takes no filterbank parameters")));
                }
                let make = if spec.kind == FrontendKind::Sinc {
                    TimeKernelParams::mel_sinc
                } else {
                    TimeKernelParams::mel_gabor
                };
                Ok(Extractor::TimeDomain(make(
                    config.n_filters,
                    sample_rate,
                    config.kernel_len,
                    config.stride,
                    config.pool,
                )?))
            }
        }
    }

    fn header(&self) -> MatrixHeader {
        match self {
            Extractor::Filterbank { plan, .. } => MatrixHeader::from_stft(0, 0, plan.config()),
            Extractor::TimeDomain(p) => MatrixHeader {
                rows: 0,
                cols: 0,
                spectrum_kind: match p.bank {
                    KernelBank::Sinc { .. } => SpectrumKind::Magnitude,
                    KernelBank::Gabor { .. } => SpectrumKind::Power,
                },
                window_len: p.kernel_len as u32,
                hop: (p.stride * p.pool) as u32,
                n_fft: 0,
            },
        }
    }

    fn run(&self, audio: &AudioBuffer) -> Result<FeatureMatrix> {
        match self {
            Extractor::Filterbank { plan, params } => {
                filterbank::forward(&plan.compute(audio)?, params, DEFAULT_EPSILON)
            }
            Extractor::TimeDomain(p) => frontend_forward(audio, p, DEFAULT_EPSILON),
        }
    }
}

/// `.wav` files (case-insensitive) directly inside `dir`, sorted by name.
fn wav_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Extracts features for a WAV file or every WAV in a directory into `out_dir`:
/// one `<stem>.feat` per input plus [`MANIFEST_NAME`].
pub fn cmd_extract(frontend: &str, config_path: &Path, input: &Path, out_dir: &Path) -> Result<Vec<ExtractedFile>> {
    let config: ExtractConfig = serde_json::from_slice(&fs::read(config_path)?)?;
    FrontendSpec::named(frontend)?;
    let hash = config_hash(format!("{frontend}\n{}", serde_json::to_string(&config)?).as_bytes());

    let inputs = if input.is_dir() {
        wav_files(input)?
    } else {
        vec![input.to_path_buf()]
    };
    if inputs.is_empty() {
        return Err(Error::EmptyInput(format!("no .wav files in {}", input.display())));
    }

    let mut results = Vec::with_capacity(inputs.len());
    let mut extractor: Option<(u32, Extractor)> = None;
    for path in &inputs {
        let audio = load_wav(path).map_err(|e| match e {
            Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
            other => other,
        })?;
        let sr = audio.sample_rate();
        if extractor.as_ref().map_or(true, |(rate, _)| *rate != sr) {
            extractor = Some((sr, Extractor::new(frontend, &config, sr)?));
        }
        let ex = &extractor.as_ref().unwrap().1;
        let features = ex.run(&audio)?;
        let bytes = encode_features(&features, &ex.header())?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("input");
        results.push((
            ExtractedFile {
                input: path.clone(),
                output: out_dir.join(format!("{stem}.feat")),
                rows: features.n_frames(),
                cols: features.n_filters(),
            },
            bytes,
        ));
    }

    fs::create_dir_all(out_dir)?;
    let mut manifest = BufWriter::new(File::create(out_dir.join(MANIFEST_NAME))?);
    writeln!(manifest, "file,input,rows,cols,frontend,config_hash")?;
    for (entry, bytes) in &results {
        fs::write(&entry.output, bytes)?;
        writeln!(
            manifest,
            "{},{},{},{},{frontend},{hash}",
            entry.output.file_name().unwrap().to_string_lossy(),
            entry.input.display(),
            entry.rows,
            entry.cols
        )?;
    }
    manifest.flush()?;
    Ok(results.into_iter().map(|(e, _)| e).collect())
}

/// Writes the learned filters of a saved model next to their Mel reference.
pub fn cmd_export_filters(model_path: &Path, out: &Path) -> Result<usize> {
    let bytes = fs::read(model_path)?;
    let model = TrainedModel::from_bytes(&bytes)?;
    let Frontend::Filterbank { params, .. } = &model.frontend else {
        return Err(Error::Config(format!(
            "model front-end is {}, not a learnable filterbank",
            model.frontend.kind().name()
        )));
    };
    let mut w = BufWriter::new(File::create(out)?);
    write_filter_csv(&mut w, params, model.sample_rate, &config_hash(&bytes))?;
    w.flush()?;
    Ok(params.n_filters())
}

pub fn cmd_bench(spec_path: &Path, out: &Path, seed: Option<u64>) -> Result<Vec<BenchRow>> {
    let mut spec: BenchSpec = serde_json::from_slice(&fs::read(spec_path)?)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let hash = config_hash(&serde_json::to_vec(&spec)?);
    let rows = spec.run()?;
    let mut w = BufWriter::new(File::create(out)?);
    write_bench_csv(&mut w, &rows, spec.repeats, &hash)?;
    w.flush()?;
    Ok(rows)
}

/// Sidecar path `<out without extension>.<name>.<suffix>`.
pub fn toy_artifact_path(out: &Path, name: &str, suffix: &str) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("toy");
    out.with_file_name(format!("{stem}.{name}.{suffix}"))
}

/// Runs the toy experiment and writes the metrics JSON to `out`. Alongside it, each
/// run leaves `<stem>.<name>.model` and `<stem>.<name>.history.csv`; filterbank runs
/// also leave `<stem>.<name>.filters.csv` in the `export-filters` schema.
pub fn cmd_toy(spec_path: &Path, out: &Path, seed: Option<u64>) -> Result<ToyMetrics> {
    let mut spec: ToySpec = serde_json::from_slice(&fs::read(spec_path)?)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let hash = config_hash(&serde_json::to_vec(&spec)?);
    let outcome = run_toy_experiment(&spec, &hash)?;
    for run in &outcome.runs {
        run.model.save(&toy_artifact_path(out, &run.name, "model"))?;
        let mut w = BufWriter::new(File::create(toy_artifact_path(out, &run.name, "history.csv"))?);
        run.history.write_csv(&mut w)?;
        w.flush()?;
        if let Some(params) = run.model.frontend.filter_params() {
            let mut w = BufWriter::new(File::create(toy_artifact_path(out, &run.name, "filters.csv"))?);
            write_filter_csv(&mut w, params, run.model.sample_rate, &hash)?;
            w.flush()?;
        }
    }
    let mut json = serde_json::to_string_pretty(&outcome.metrics)?;
    json.push('\n');
    fs::write(out, json)?;
    Ok(outcome.metrics)
}
