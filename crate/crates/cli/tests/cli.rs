use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rustfft::{num_complex::Complex, FftPlanner};

fn hdag(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdag"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("run hdag")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read_samples(path: &Path) -> Vec<i16> {
    hound::WavReader::open(path)
        .unwrap()
        .samples::<i16>()
        .map(|s| s.unwrap())
        .collect()
}

fn synth(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let mut args = vec!["synth", "-o", name];
    args.extend_from_slice(extra);
    let o = hdag(&args, dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    dir.join(name)
}

/// Manifest over a small generated corpus with a cheap EEMD.
fn write_manifest(dir: &Path, methods: &str, snrs: &str) -> PathBuf {
    let text = format!(
        r#"
noises = ["white"]
snr_list_db = [{snrs}]
methods = [{methods}]
output_dir = "out"
seed = 11

[synthetic]
count = 2
duration_s = 1.0

[config.eemd]
ensemble_size = 4
"#
    );
    let path = dir.join("job.toml");
    fs::write(&path, text).unwrap();
    path
}

/// Data rows of a CSV written with `#` header lines.
fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn synth_spectrum_peaks_at_harmonics() {
    let dir = tempfile::tempdir().unwrap();
    let wav = synth(
        dir.path(),
        "h.wav",
        &["--f0", "120", "--harmonics", "5", "--vowel", "flat", "--silent-gaps", "--duration", "2"],
    );
    let x: Vec<f64> = read_samples(&wav).iter().map(|&s| s as f64).collect();
    // Welch average of 4096-point Hann frames, 3.9 Hz bins.
    let n = 4096;
    let fft = FftPlanner::new().plan_fft_forward(n);
    let mut power = vec![0.0; n / 2];
    for start in (0..x.len() - n).step_by(n / 2) {
        let mut buf: Vec<Complex<f64>> = x[start..start + n]
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos();
                Complex::new(v * w, 0.0)
            })
            .collect();
        fft.process(&mut buf);
        for (p, c) in power.iter_mut().zip(&buf) {
            *p += c.norm_sqr();
        }
    }
    let mut peaks: Vec<usize> = (1..power.len() - 1)
        .filter(|&k| power[k] > power[k - 1] && power[k] >= power[k + 1])
        .collect();
    peaks.sort_by(|&a, &b| power[b].total_cmp(&power[a]));
    let bin_hz = 16_000.0 / n as f64;
    let mut top: Vec<f64> = peaks[..5].iter().map(|&k| k as f64 * bin_hz).collect();
    top.sort_by(f64::total_cmp);
    for (h, f) in top.iter().enumerate() {
        let want = 120.0 * (h + 1) as f64;
        assert!((f - want).abs() <= bin_hz, "peaks {top:?}");
    }
}

#[test]
fn synth_writes_label_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "s.wav", &["--f0", "150", "--seed", "3"]);
    let labels = fs::read_to_string(dir.path().join("s.labels.txt")).unwrap();
    let voiced: Vec<f64> = labels
        .lines()
        .filter(|l| !l.starts_with('#'))
        .filter_map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            (f[1] == "v").then(|| f[2].parse().unwrap())
        })
        .collect();
    assert!(!voiced.is_empty());
    assert!(voiced.iter().all(|&f| (f - 150.0).abs() < 1e-6));
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), "a.wav", &["--seed", "42", "--f0-spread", "0.1", "--vibrato", "0.05"]);
    let b = synth(dir.path(), "b.wav", &["--seed", "42", "--f0-spread", "0.1", "--vibrato", "0.05"]);
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn synth_rejects_bad_arguments() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["synth", "-o", "x.wav", "--duration", "0"],
        vec!["synth", "-o", "x.wav", "--f0", "40"],
        vec!["synth", "-o", "x.wav", "--f0", "401"],
    ] {
        let o = hdag(&args, dir.path());
        assert_eq!(code(&o), 1, "{args:?}");
        assert!(!o.stderr.is_empty());
    }
    assert!(!dir.path().join("x.wav").exists());
}

#[test]
fn enhance_missing_input_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = hdag(&["enhance", "nope.wav", "-o", "y.wav"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.wav"));
    assert!(!dir.path().join("y.wav").exists());
}

#[test]
fn enhance_with_unit_gains_reproduces_input() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "in.wav", &["--seed", "5", "--duration", "1"]);
    let ones = ["1.0"; 10].join(", ");
    fs::write(
        dir.path().join("unity.toml"),
        format!(
            "[eemd]\nensemble_size = 4\n[filterbank]\ngains_low = [{ones}]\ngains_high = [{ones}]\n[enhance]\nnormalize = false\n"
        ),
    )
    .unwrap();
    let o = hdag(&["enhance", "in.wav", "-o", "out.wav", "--config", "unity.toml"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let x = read_samples(&dir.path().join("in.wav"));
    let y = read_samples(&dir.path().join("out.wav"));
    assert_eq!(x.len(), y.len());
    // Both sides are 16-bit; allow one step of requantization.
    assert!(x.iter().zip(&y).all(|(a, b)| (a - b).abs() <= 1));

    let report = fs::read_to_string(dir.path().join("out.report.tsv")).unwrap();
    let rows: Vec<Vec<&str>> = report
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split('\t').collect())
        .collect();
    let voiced: Vec<&Vec<&str>> = rows.iter().filter(|r| r[1] != "unvoiced").collect();
    assert!(!voiced.is_empty());
    for r in voiced {
        assert!(r[6].split(',').all(|g| g == "1"), "{r:?}");
    }
    assert!(report.contains("# normalization_scale = 1.000000000"));
}

#[test]
fn enhance_gtf_f0_reports_four_gammatones() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "in.wav", &["--seed", "6", "--duration", "1"]);
    fs::write(dir.path().join("fast.toml"), "[eemd]\nensemble_size = 4\n").unwrap();
    let o = hdag(
        &["enhance", "in.wav", "-o", "g.wav", "--method", "gtf_f0", "--config", "fast.toml", "--report", "g.tsv"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(dir.path().join("g.tsv")).unwrap();
    assert!(report.contains("# method = gtf_f0"));
    assert!(report.lines().any(|l| l == "# c = 0.0"), "{report}");
    let voiced: Vec<&str> = report
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .filter(|l| !l.contains("unvoiced"))
        .collect();
    assert!(!voiced.is_empty());
    assert!(voiced.iter().all(|l| l.split('\t').nth(5) == Some("4")));
}

#[test]
fn evaluate_empty_manifest_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("empty.toml"), "").unwrap();
    let o = hdag(&["evaluate", "empty.toml", "-o", "scores.csv"], dir.path());
    assert_ne!(code(&o), 0);
    assert!(!o.stderr.is_empty());
    assert!(!dir.path().join("scores.csv").exists());
}

#[test]
fn evaluate_unprocessed_decreases_with_noise() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(dir.path(), r#""unprocessed""#, "10.0, 0.0, -10.0");
    let o = hdag(&["evaluate", m.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&dir.path().join("out/scores.csv"));
    // 2 files × 1 noise × 3 SNRs, then 3 per-SNR means and one overall mean.
    assert_eq!(rows.len(), 6 + 4);
    let means: Vec<f64> = rows
        .iter()
        .filter(|r| r[0] == "mean" && r[2] != "all")
        .map(|r| r[4].parse().unwrap())
        .collect();
    assert!(means[0] > means[1] && means[1] > means[2], "{means:?}");
}

#[test]
fn evaluate_delta_is_difference_to_unprocessed() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(dir.path(), r#""unprocessed", "hdag""#, "0.0");
    let o = hdag(&["evaluate", m.to_str().unwrap(), "-o", "s.csv"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&dir.path().join("s.csv"));
    let grid: Vec<&Vec<String>> = rows.iter().filter(|r| r[0] != "mean").collect();
    assert_eq!(grid.len(), 4);
    for pair in grid.chunks(2) {
        let (u, h) = (pair[0], pair[1]);
        assert_eq!((u[3].as_str(), h[3].as_str()), ("unprocessed", "hdag"));
        let (ue, he): (f64, f64) = (u[4].parse().unwrap(), h[4].parse().unwrap());
        let d: f64 = h[5].parse().unwrap();
        assert!((d - (he - ue)).abs() <= 2e-6, "{d} vs {}", he - ue);
        assert_eq!(u[5], "0.000000");
    }
}

#[test]
fn evaluate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(dir.path(), r#""unprocessed", "gtf_f0""#, "0.0");
    let text = fs::read_to_string(&m).unwrap().replace("seed = 11", "seed = 11\nwrite_audio = true");
    fs::write(&m, text).unwrap();
    let read_all = |dir: &Path| -> Vec<(String, Vec<u8>)> {
        let mut files: Vec<PathBuf> = fs::read_dir(dir.join("out/audio"))
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        files.sort();
        files.push(dir.join("out/scores.csv"));
        files
            .into_iter()
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
            .collect()
    };
    assert_eq!(code(&hdag(&["evaluate", "job.toml"], dir.path())), 0);
    let first = read_all(dir.path());
    fs::remove_dir_all(dir.path().join("out")).unwrap();
    assert_eq!(code(&hdag(&["evaluate", "job.toml"], dir.path())), 0);
    let second = read_all(dir.path());
    assert_eq!(first.len(), 2 * 2 + 1);
    assert_eq!(first, second);
}

#[test]
fn sweep_zero_step_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(dir.path(), r#""hdag""#, "0.0");
    let o = hdag(&["sweep", m.to_str().unwrap(), "--param", "c", "--step", "0"], dir.path());
    assert_eq!(code(&o), 1);
    let o = hdag(&["sweep", m.to_str().unwrap(), "--param", "alpha"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(!dir.path().join("out").exists());
}

#[test]
fn c_sweep_table_layout() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(dir.path(), r#""hdag""#, "0.0");
    let o = hdag(
        &["sweep", m.to_str().unwrap(), "--param", "c", "--from", "1", "--to", "-1", "--step", "1"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.starts_with("best c = "), "{stdout}");
    let text = fs::read_to_string(dir.path().join("out/sweep_c.csv")).unwrap();
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "noise,snr_db,c=1.0,c=0.0,c=-1.0");
    assert!(body[1].starts_with("white,0,"));
    assert!(body[2].starts_with("mean,all,"));
    assert_eq!(body.len(), 3);
    assert!(text.contains("# best c = "));
}

#[test]
fn greedy_gains_stay_at_one_without_voiced_frames() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "u.wav", &["--seed", "2", "--duration", "1"]);
    // Relabel every frame unvoiced: the objective is flat in every gain.
    let labels: String = fs::read_to_string(dir.path().join("u.labels.txt"))
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{} uv 0\n", l.split_whitespace().next().unwrap()))
        .collect();
    fs::write(dir.path().join("u.labels.txt"), labels).unwrap();
    fs::write(
        dir.path().join("g.toml"),
        "files = [\"u.wav\"]\nnoises = [\"white\"]\nsnr_list_db = [0.0]\nmethods = [\"hdag\"]\noutput_dir = \"out\"\n",
    )
    .unwrap();
    let o = hdag(
        &["sweep", "g.toml", "--param", "gains", "--class", "high", "--step", "1", "--max-gain", "3"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.trim(), format!("gains_high = [{}]", ["1"; 10].join(", ")));
    let rows = csv_rows(&dir.path().join("out/sweep_gains_high.csv"));
    assert_eq!(rows.iter().filter(|r| r[3] == "true").count(), 10);
    assert_eq!(rows[0][0], "F1");
}
