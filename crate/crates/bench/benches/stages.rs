use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use hdag::config::Config;
use hdag::emd::{eemd_decompose, emd_decompose, EemdConfig};
use hdag::enhance::{analyze_signal, enhance_signal, split_bands, synthesize};
use hdag::filterbank::{Filterbank, FilterbankConfig};
use hdag::metrics::estoi;
use hdag::signal::{mix_at_snr, MixSpec};
use hdag::synth::{steady_vowel, synth_utterance, white_noise, UtteranceSpec, VowelSpec};

const FS: u32 = 16_000;

fn vowel_frame() -> Vec<f64> {
    steady_vowel(&VowelSpec::open_vowel(120.0), 512, FS, 1).unwrap().0
}

fn bench_emd(c: &mut Criterion) {
    let frame = vowel_frame();
    c.bench_function("emd_512", |b| b.iter(|| emd_decompose(black_box(&frame), 8).unwrap()));
    let cfg = EemdConfig::default();
    c.bench_function("eemd_512_x50", |b| b.iter(|| eemd_decompose(black_box(&frame), &cfg).unwrap()));
}

fn bench_filterbank(c: &mut Criterion) {
    let frame = vowel_frame();
    let cfg = FilterbankConfig::default();
    c.bench_function("filterbank_design", |b| {
        b.iter(|| Filterbank::design(&cfg, black_box(120.0), FS, 512).unwrap())
    });
    let bank = Filterbank::design(&cfg, 120.0, FS, 512).unwrap();
    c.bench_function("filterbank_process_512", |b| {
        b.iter(|| bank.process(black_box(&frame), &cfg.gains_low).unwrap())
    });
}

fn noisy_utterance(seconds: f64) -> (hdag::signal::AudioSignal, hdag::pitch::VoicingLabels) {
    let spec = UtteranceSpec {
        duration_s: seconds,
        ..UtteranceSpec::default()
    };
    let u = synth_utterance(&spec, FS, 3).unwrap();
    let n = white_noise(u.signal.len(), FS, 4).unwrap();
    (mix_at_snr(&u.signal, &n, &MixSpec::full(0.0)).unwrap(), u.labels)
}

fn bench_estoi(c: &mut Criterion) {
    let spec = UtteranceSpec::default();
    let clean = synth_utterance(&spec, FS, 3).unwrap().signal;
    let n = white_noise(clean.len(), FS, 4).unwrap();
    let noisy = mix_at_snr(&clean, &n, &MixSpec::full(0.0)).unwrap();
    c.bench_function("estoi_2s", |b| b.iter(|| estoi(black_box(&clean), &noisy).unwrap()));
}

fn bench_pipeline(c: &mut Criterion) {
    let (noisy, labels) = noisy_utterance(1.0);
    let mut cfg = Config::default();
    cfg.eemd.ensemble_size = 10;
    let mut group = c.benchmark_group("pipeline_1s");
    group.sample_size(10);
    group.bench_function("enhance_eemd10", |b| {
        b.iter(|| enhance_signal(black_box(&noisy), &cfg, Some(&labels)).unwrap())
    });
    // The stage reused by sweeps: split and resynthesis without pitch analysis.
    let analysis = analyze_signal(&noisy, &cfg, Some(&labels)).unwrap();
    group.bench_function("split_and_synthesize", |b| {
        b.iter(|| {
            let split = split_bands(&analysis, &cfg.filterbank, cfg.enhance.boundary).unwrap();
            synthesize(&analysis, &split, &cfg.filterbank, &cfg.enhance).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, bench_emd, bench_filterbank, bench_estoi, bench_pipeline);
criterion_main!(benches);
