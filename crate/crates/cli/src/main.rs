//! `hdag`: enhance WAV files, score experiment grids, sweep parameters and
//! generate synthetic test material.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use hdag::config::Config;
use hdag::enhance::{enhance_signal, EnhancementReport};
use hdag::experiment::{
    c_sweep, evaluate, greedy_gains, labels_path, report_header, value_range, write_c_sweep_csv,
    write_evaluation_csv, write_greedy_csv, GreedyOptions, JobManifest, Method,
};
use hdag::filterbank::FilterbankConfig;
use hdag::pitch::{FrameClass, VoicingLabels};
use hdag::signal::{read_wav, write_wav};
use hdag::synth::{synth_utterance, UtteranceSpec, VowelSpec, VOWEL_A, VOWEL_I, VOWEL_U};
use hdag::Error;

#[derive(Parser)]
#[command(name = "hdag", version, about = "Harmonic detection and auditory gain speech enhancement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enhance one WAV file and write a per-frame report.
    Enhance(EnhanceArgs),
    /// Score every (file, noise, SNR, method) cell of a manifest with ESTOI.
    Evaluate(EvaluateArgs),
    /// Sweep the gammachirp asymmetry or search gains greedily.
    Sweep(SweepArgs),
    /// Write a synthetic voiced utterance and its frame-label sidecar.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Hdag,
    #[value(name = "gtf_f0")]
    GtfF0,
    Unprocessed,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Hdag => Method::Hdag,
            MethodArg::GtfF0 => Method::GtfF0,
            MethodArg::Unprocessed => Method::Unprocessed,
        }
    }
}

#[derive(clap::Args)]
struct EnhanceArgs {
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "hdag")]
    method: MethodArg,
    /// TOML config; missing keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Frame labels. Defaults to `<input>.labels.txt` when that file exists.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Ignore any label sidecar and detect voicing from the signal.
    #[arg(long, conflicts_with = "labels")]
    no_labels: bool,
    /// Per-frame report. Defaults to the output path with a `.report.tsv`
    /// extension.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(clap::Args)]
struct EvaluateArgs {
    manifest: PathBuf,
    /// Score table. Defaults to `scores.csv` in the manifest's output_dir.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepParam {
    C,
    Gains,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassArg {
    Low,
    High,
}

#[derive(clap::Args)]
struct SweepArgs {
    manifest: PathBuf,
    #[arg(long, value_enum)]
    param: SweepParam,
    /// First value of `c`.
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    from: f64,
    /// Last value of `c`, inclusive.
    #[arg(long, default_value_t = -2.0, allow_negative_numbers = true)]
    to: f64,
    /// Increment: the c spacing, or the gain increment for `--param gains`.
    /// Its sign is taken from the direction of the range.
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    step: f64,
    /// Gain set searched by `--param gains`.
    #[arg(long, value_enum, default_value = "low")]
    class: ClassArg,
    #[arg(long, default_value_t = 20.0)]
    max_gain: f64,
    /// Result table. Defaults to a file in the manifest's output_dir.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum VowelArg {
    /// Rotate /a/, /i/ and /u/ between segments.
    Mixed,
    A,
    I,
    U,
    /// No formant shaping, only the spectral rolloff.
    Flat,
}

#[derive(clap::Args)]
struct SynthArgs {
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = 120.0)]
    f0: f64,
    /// Number of harmonics. Defaults to those below 4 kHz.
    #[arg(long)]
    harmonics: Option<usize>,
    #[arg(long, default_value_t = 2.0)]
    duration: f64,
    /// Peak F0 deviation as a fraction of F0.
    #[arg(long, default_value_t = 0.0)]
    vibrato: f64,
    #[arg(long, default_value_t = 5.0)]
    vibrato_rate: f64,
    /// Random per-segment F0 offset as a fraction of F0.
    #[arg(long, default_value_t = 0.0)]
    f0_spread: f64,
    #[arg(long, default_value_t = 6.0)]
    rolloff: f64,
    #[arg(long, value_enum, default_value = "mixed")]
    vowel: VowelArg,
    /// Level of the noise filling unvoiced gaps, in dB re the peak.
    #[arg(long, default_value_t = -35.0, allow_negative_numbers = true)]
    gap_noise_db: f64,
    /// Leave unvoiced gaps silent.
    #[arg(long, conflicts_with = "gap_noise_db")]
    silent_gaps: bool,
    #[arg(long, default_value_t = 16_000)]
    sample_rate: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Failure with its exit status: 1 usage, 2 I/O, 3 numerical.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParameter(_) | Error::Config(_) => 1,
            Error::Io { .. } | Error::Format(_) => 2,
            _ => 3,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 2,
        message: format!("{}: {e}", path.display()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Enhance(a) => cmd_enhance(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("hdag: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| io_failure(path, e))
}

fn cmd_enhance(a: EnhanceArgs) -> Result<(), Failure> {
    let mut cfg = match &a.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let method = Method::from(a.method);
    if method == Method::GtfF0 {
        cfg.filterbank = FilterbankConfig::gtf_f0();
    }
    let input = read_wav(&a.input)?;
    let labels = if a.no_labels {
        None
    } else {
        match &a.labels {
            Some(p) => Some(VoicingLabels::read(p)?),
            None => {
                let p = labels_path(&a.input);
                p.exists().then(|| VoicingLabels::read(&p)).transpose()?
            }
        }
    };
    let (output, report) = match method {
        Method::Unprocessed => (
            input.clone(),
            EnhancementReport {
                frames: Vec::new(),
                normalization_scale: 1.0,
            },
        ),
        _ => enhance_signal(&input, &cfg, labels.as_ref())?,
    };
    write_wav(&a.output, &output)?;
    let report_path = a.report.unwrap_or_else(|| a.output.with_extension("report.tsv"));
    let header = format!(
        "# hdag enhance\n# input = {}\n# method = {method}\n# labels = {}\n{}",
        a.input.display(),
        if labels.is_some() { "yes" } else { "no" },
        cfg.header()
    );
    fs::write(&report_path, report.to_text(&header)).map_err(|e| io_failure(&report_path, e))?;
    eprintln!(
        "hdag: {} voiced frames of {}, wrote {}",
        report.voiced_frames(),
        report.frames.len(),
        a.output.display()
    );
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<(), Failure> {
    let m = JobManifest::load(&a.manifest)?;
    let eval = evaluate(&m)?;
    for r in eval.failures() {
        eprintln!(
            "hdag: {} {} {} dB {} failed: {}",
            r.file,
            r.noise,
            r.snr_db,
            r.method,
            r.error.as_deref().unwrap_or("")
        );
    }
    let path = a.output.unwrap_or_else(|| m.output_dir.join("scores.csv"));
    write_evaluation_csv(create(&path)?, &eval, &report_header("hdag evaluate", &m))?;
    eprintln!("hdag: {} rows, wrote {}", eval.rows.len(), path.display());
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<(), Failure> {
    if a.step == 0.0 || !a.step.is_finite() {
        return Err(Failure::usage("--step must be nonzero"));
    }
    let m = JobManifest::load(&a.manifest)?;
    match a.param {
        SweepParam::C => {
            let step = a.step.abs().copysign(a.to - a.from);
            let values = value_range(a.from, a.to, step).map_err(|e| Failure::usage(e.to_string()))?;
            let sweep = c_sweep(&m, &values)?;
            for f in &sweep.failures {
                eprintln!("hdag: failed: {f}");
            }
            let path = a.output.unwrap_or_else(|| m.output_dir.join("sweep_c.csv"));
            write_c_sweep_csv(create(&path)?, &sweep, &m)?;
            match sweep.best_value() {
                Some((c, v)) => println!("best c = {c} (mean ESTOI {v:.6})"),
                None => println!("no value could be scored"),
            }
        }
        SweepParam::Gains => {
            if a.step < 0.0 {
                return Err(Failure::usage("gain --step must be positive"));
            }
            let class = match a.class {
                ClassArg::Low => FrameClass::LowPitch,
                ClassArg::High => FrameClass::HighPitch,
            };
            let opts = GreedyOptions {
                class,
                step: a.step,
                max_gain: a.max_gain,
            };
            let result = greedy_gains(&m, &opts)?;
            for f in &result.failures {
                eprintln!("hdag: failed: {f}");
            }
            let path = a
                .output
                .unwrap_or_else(|| m.output_dir.join(format!("sweep_gains_{}.csv", class.as_str())));
            write_greedy_csv(create(&path)?, &result, &m, class)?;
            let gains: Vec<String> = result.gains.iter().map(|g| g.to_string()).collect();
            println!("gains_{} = [{}]", class.as_str(), gains.join(", "));
        }
    }
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<(), Failure> {
    if !(50.0..=400.0).contains(&a.f0) {
        return Err(Failure::usage(format!("--f0 {} outside [50, 400] Hz", a.f0)));
    }
    if !(a.duration > 0.0) {
        return Err(Failure::usage("--duration must be positive"));
    }
    let mut vowel = VowelSpec::open_vowel(a.f0);
    vowel.rolloff_db_per_octave = a.rolloff;
    vowel.vibrato_depth = a.vibrato;
    vowel.vibrato_rate_hz = a.vibrato_rate;
    if let Some(h) = a.harmonics {
        vowel.harmonics = h;
    }
    let formant_sets = match a.vowel {
        VowelArg::Mixed => vec![VOWEL_A.to_vec(), VOWEL_I.to_vec(), VOWEL_U.to_vec()],
        VowelArg::A => vec![VOWEL_A.to_vec()],
        VowelArg::I => vec![VOWEL_I.to_vec()],
        VowelArg::U => vec![VOWEL_U.to_vec()],
        VowelArg::Flat => vec![Vec::new()],
    };
    let spec = UtteranceSpec {
        vowel,
        duration_s: a.duration,
        f0_spread: a.f0_spread,
        formant_sets,
        gap_noise_db: (!a.silent_gaps).then_some(a.gap_noise_db),
        ..UtteranceSpec::default()
    };
    let u = synth_utterance(&spec, a.sample_rate, a.seed)?;
    write_wav(&a.output, &u.signal)?;
    let lp = labels_path(&a.output);
    u.labels.write(&lp)?;
    eprintln!("hdag: wrote {} and {}", a.output.display(), lp.display());
    Ok(())
}
