//! Experiment harness: clean corpus × noises × SNRs × methods, scored with
//! ESTOI, plus the asymmetry and gain sweeps.
//!
//! Everything runs sequentially in manifest order and every random draw is
//! seeded from the manifest, so a fixed manifest gives byte-identical
//! output files.

mod manifest;
mod sweep;

pub use manifest::{JobManifest, Method, NoiseSource, SyntheticCorpus};
pub use sweep::{
    c_sweep, greedy_gains, value_range, write_c_sweep_csv, write_greedy_csv, CSweep, CSweepRow, GreedyOptions,
    GreedyResult, GreedyStep,
};

use std::collections::btree_map::{BTreeMap, Entry};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::Config;
use crate::enhance::{analyze_signal, split_bands, synthesize, SignalAnalysis};
use crate::error::{Error, Result};
use crate::filterbank::FilterbankConfig;
use crate::metrics::{estoi_with, resample};
use crate::pitch::VoicingLabels;
use crate::signal::{mix_at_snr, read_wav, write_wav, AudioSignal, MixSpec};
use crate::synth::{speech_shaped_noise, synth_utterance, white_noise, UtteranceSpec, VowelSpec};

/// Sidecar holding frame labels for `wav`: `name.wav` → `name.labels.txt`.
pub fn labels_path(wav: &Path) -> PathBuf {
    wav.with_extension("labels.txt")
}

#[derive(Debug, Clone)]
pub struct CleanItem {
    pub name: String,
    pub signal: AudioSignal,
    pub labels: Option<VoicingLabels>,
}

/// Clean files of the manifest in run order, with their label sidecars.
pub fn clean_paths(m: &JobManifest) -> Result<Vec<PathBuf>> {
    if let Some(split) = &m.split {
        return Ok(m.splits.get(split).cloned().unwrap_or_default());
    }
    let mut paths = m.files.clone();
    if let Some(dir) = &m.clean_dir {
        let mut found: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
            .collect();
        found.sort();
        paths.extend(found);
    }
    Ok(paths)
}

pub fn load_corpus(m: &JobManifest) -> Result<Vec<CleanItem>> {
    let mut items = Vec::new();
    for path in clean_paths(m)? {
        let signal = read_wav(&path)?;
        let lp = labels_path(&path);
        let labels = if lp.exists() { Some(VoicingLabels::read(&lp)?) } else { None };
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        items.push(CleanItem { name, signal, labels });
    }
    if let Some(s) = &m.synthetic {
        let spec = UtteranceSpec {
            vowel: VowelSpec::open_vowel(s.f0_hz),
            duration_s: s.duration_s,
            frame_ms: m.config.frame.frame_ms,
            ..UtteranceSpec::default()
        };
        for i in 0..s.count {
            let u = synth_utterance(&spec, s.sample_rate_hz, m.seed.wrapping_add(i as u64))?;
            items.push(CleanItem {
                name: format!("synth_{i:03}"),
                signal: u.signal,
                labels: Some(u.labels),
            });
        }
    }
    if items.is_empty() {
        return Err(Error::Degenerate("the manifest selects no clean files".into()));
    }
    Ok(items)
}

/// SplitMix64 finalizer, used to derive independent per-cell seeds.
fn mix_seed(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the noise added to clean file `file` for noise `noise`. The same
/// noise sample is used at every SNR.
pub fn noise_seed(seed: u64, file: usize, noise: usize) -> u64 {
    mix_seed(mix_seed(seed ^ file as u64).wrapping_add(noise as u64))
}

/// Builds noise signals on demand, caching file noises.
pub struct NoiseBank<'a> {
    corpus: &'a [CleanItem],
    sources: Vec<NoiseSource>,
    files: BTreeMap<usize, AudioSignal>,
}

impl<'a> NoiseBank<'a> {
    pub fn new(corpus: &'a [CleanItem], sources: Vec<NoiseSource>) -> Self {
        Self {
            corpus,
            sources,
            files: BTreeMap::new(),
        }
    }

    pub fn sources(&self) -> &[NoiseSource] {
        &self.sources
    }

    /// Noise `j` with the length and rate of `clean`. File noises are
    /// resampled if needed and read from a seeded offset with wraparound.
    pub fn noise_for(&mut self, j: usize, clean: &AudioSignal, seed: u64) -> Result<AudioSignal> {
        let (len, fs) = (clean.len(), clean.sample_rate_hz());
        match &self.sources[j] {
            NoiseSource::White => white_noise(len, fs, seed),
            NoiseSource::SpeechShaped => {
                let same_rate: Vec<&AudioSignal> = self
                    .corpus
                    .iter()
                    .map(|c| &c.signal)
                    .filter(|s| s.sample_rate_hz() == fs)
                    .collect();
                speech_shaped_noise(len, &same_rate, seed)
            }
            NoiseSource::File(path) => {
                if let Entry::Vacant(slot) = self.files.entry(j) {
                    let n = read_wav(path)?;
                    if n.is_empty() {
                        return Err(Error::Degenerate(format!("noise file {} is empty", path.display())));
                    }
                    slot.insert(n);
                }
                let mut n = self.files[&j].clone();
                if n.sample_rate_hz() != fs {
                    n = AudioSignal::new(resample(n.samples(), n.sample_rate_hz(), fs)?, fs)?;
                }
                let src = n.samples();
                let offset = ChaCha8Rng::seed_from_u64(seed).random_range(0..src.len());
                let out = (0..len).map(|i| src[(offset + i) % src.len()]).collect();
                AudioSignal::new(out, fs)
            }
        }
    }
}

/// One noisy mixture of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub file: usize,
    pub noise: usize,
    pub snr: usize,
}

/// Grid cells in manifest order: files, then noises, then SNRs.
pub fn cells(files: usize, noises: usize, snrs: usize) -> Vec<Cell> {
    let mut out = Vec::with_capacity(files * noises * snrs);
    for file in 0..files {
        for noise in 0..noises {
            for snr in 0..snrs {
                out.push(Cell { file, noise, snr });
            }
        }
    }
    out
}

/// A mixture with its pitch analysis, shared by every method and sweep
/// step that uses the same pitch settings.
#[derive(Debug, Clone)]
pub struct PreparedCell {
    pub cell: Cell,
    pub noisy: AudioSignal,
    pub analysis: SignalAnalysis,
}

pub fn prepare_cell(
    m: &JobManifest,
    corpus: &[CleanItem],
    noises: &mut NoiseBank<'_>,
    cell: Cell,
) -> Result<PreparedCell> {
    let item = &corpus[cell.file];
    let noise = noises.noise_for(cell.noise, &item.signal, noise_seed(m.seed, cell.file, cell.noise))?;
    let noisy = mix_at_snr(&item.signal, &noise, &MixSpec::full(m.snr_list_db[cell.snr]))?;
    let analysis = analyze_signal(&noisy, &m.config, item.labels.as_ref())?;
    Ok(PreparedCell { cell, noisy, analysis })
}

/// Output of `method` for a prepared mixture.
pub fn process(prepared: &PreparedCell, method: Method, cfg: &Config) -> Result<AudioSignal> {
    let fb = match method {
        Method::Unprocessed => return Ok(prepared.noisy.clone()),
        Method::Hdag => cfg.filterbank.clone(),
        Method::GtfF0 => FilterbankConfig::gtf_f0(),
    };
    let split = split_bands(&prepared.analysis, &fb, cfg.enhance.boundary)?;
    Ok(synthesize(&prepared.analysis, &split, &fb, &cfg.enhance)?.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub file: String,
    pub noise: String,
    pub snr_db: f64,
    pub method: Method,
    pub estoi: Option<f64>,
    /// `estoi` minus the unprocessed score of the same mixture.
    pub delta_estoi: Option<f64>,
    pub error: Option<String>,
}

/// Mean over files; `snr_db == None` averages over every SNR as well.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub noise: String,
    pub snr_db: Option<f64>,
    pub method: Method,
    pub mean_estoi: Option<f64>,
    pub mean_delta: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Evaluation {
    pub rows: Vec<EvalRow>,
    pub summary: Vec<SummaryRow>,
}

impl Evaluation {
    pub fn failures(&self) -> impl Iterator<Item = &EvalRow> {
        self.rows.iter().filter(|r| r.error.is_some())
    }

    pub fn mean(&self, noise: &str, snr_db: Option<f64>, method: Method) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.noise == noise && s.snr_db == snr_db && s.method == method)
            .and_then(|s| s.mean_estoi)
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn summarize(rows: &[EvalRow], noises: &[String], snrs: &[f64], methods: &[Method]) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for noise in noises {
        let snr_keys = snrs.iter().map(|&s| Some(s)).chain(std::iter::once(None));
        for snr in snr_keys {
            for &method in methods {
                let sel: Vec<&EvalRow> = rows
                    .iter()
                    .filter(|r| &r.noise == noise && r.method == method && snr.is_none_or(|s| r.snr_db == s))
                    .filter(|r| r.estoi.is_some())
                    .collect();
                out.push(SummaryRow {
                    noise: noise.clone(),
                    snr_db: snr,
                    method,
                    mean_estoi: mean(sel.iter().filter_map(|r| r.estoi)),
                    mean_delta: mean(sel.iter().filter_map(|r| r.delta_estoi)),
                    count: sel.len(),
                });
            }
        }
    }
    out
}

fn snr_tag(snr: f64) -> String {
    format!("{snr}dB")
}

/// Scores every cell of the grid. A cell that fails is recorded with its
/// error and the run continues.
pub fn evaluate(m: &JobManifest) -> Result<Evaluation> {
    m.validate()?;
    let corpus = load_corpus(m)?;
    let mut noises = NoiseBank::new(&corpus, m.noise_sources());
    let noise_names: Vec<String> = noises.sources().iter().map(NoiseSource::name).collect();
    let audio_dir = m.output_dir.join("audio");
    if m.write_audio {
        fs::create_dir_all(&audio_dir).map_err(|e| Error::io(&audio_dir, e))?;
    }
    let mut rows = Vec::new();
    for cell in cells(corpus.len(), noise_names.len(), m.snr_list_db.len()) {
        let item = &corpus[cell.file];
        let snr_db = m.snr_list_db[cell.snr];
        let row = |method, estoi, delta_estoi, error| EvalRow {
            file: item.name.clone(),
            noise: noise_names[cell.noise].clone(),
            snr_db,
            method,
            estoi,
            delta_estoi,
            error,
        };
        let prepared = match prepare_cell(m, &corpus, &mut noises, cell) {
            Ok(p) => p,
            Err(e) => {
                rows.extend(m.methods.iter().map(|&mt| row(mt, None, None, Some(e.to_string()))));
                continue;
            }
        };
        let score = |y: &AudioSignal| estoi_with(&item.signal, y, &m.config.estoi).map(|s| s.value);
        let baseline = score(&prepared.noisy).ok();
        for &method in &m.methods {
            let result = process(&prepared, method, &m.config).and_then(|y| {
                if m.write_audio {
                    let name = format!(
                        "{}_{}_{}_{}.wav",
                        item.name,
                        noise_names[cell.noise],
                        snr_tag(snr_db),
                        method
                    );
                    write_wav(audio_dir.join(name), &y)?;
                }
                score(&y)
            });
            rows.push(match result {
                Ok(v) => row(method, Some(v), baseline.map(|b| v - b), None),
                Err(e) => row(method, None, None, Some(e.to_string())),
            });
        }
    }
    let summary = summarize(&rows, &noise_names, &m.snr_list_db, &m.methods);
    Ok(Evaluation { rows, summary })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v:.6}"))
}

/// Writes `# `-prefixed header lines followed by the score table:
/// `file,noise,snr_db,method,estoi,delta_estoi,status`. Per-noise means
/// follow the grid rows with `file = mean` (`snr_db = all` for the mean over
/// SNRs).
pub fn write_evaluation_csv(mut out: impl Write, eval: &Evaluation, header: &str) -> Result<()> {
    let io = |e: std::io::Error| Error::io("<csv output>", e);
    out.write_all(header.as_bytes()).map_err(io)?;
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(["file", "noise", "snr_db", "method", "estoi", "delta_estoi", "status"])
        .map_err(csv_err)?;
    for r in &eval.rows {
        let status = r.error.as_ref().map_or_else(|| "ok".to_string(), |e| format!("failed: {e}"));
        w.write_record([
            r.file.as_str(),
            &r.noise,
            &r.snr_db.to_string(),
            r.method.as_str(),
            &fmt_opt(r.estoi),
            &fmt_opt(r.delta_estoi),
            &status,
        ])
        .map_err(csv_err)?;
    }
    for s in &eval.summary {
        let snr = s.snr_db.map_or_else(|| "all".to_string(), |v| v.to_string());
        w.write_record([
            "mean",
            &s.noise,
            &snr,
            s.method.as_str(),
            &fmt_opt(s.mean_estoi),
            &fmt_opt(s.mean_delta),
            &format!("n={}", s.count),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(io)
}

/// Header lines echoing the manifest's effective config.
pub fn report_header(title: &str, m: &JobManifest) -> String {
    format!("# {title}\n# seed = {}\n{}", m.seed, m.config.header())
}
