//! Parameter sweeps over the HDAG filterbank: the asymmetry `c`, and a
//! greedy per-filter gain search.

use std::io::Write;

use super::{cells, load_corpus, mean, prepare_cell, report_header, JobManifest, NoiseBank, NoiseSource};
use crate::enhance::{split_bands, synthesize, BandSplit};
use crate::error::{Error, Result};
use crate::metrics::estoi_with;
use crate::pitch::FrameClass;

/// `start, start + step, ...` up to and including `stop`.
///
/// Values are rounded to 1e-9 so that decimal steps print cleanly.
pub fn value_range(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
        return Err(Error::InvalidParameter("range bounds must be finite".into()));
    }
    if step == 0.0 {
        return Err(Error::InvalidParameter("step must be nonzero".into()));
    }
    if (stop - start) * step < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "step {step} does not lead from {start} to {stop}"
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    if n > 100_000 {
        return Err(Error::InvalidParameter("range has too many values".into()));
    }
    Ok((0..=n)
        .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CSweepRow {
    pub noise: String,
    pub snr_db: f64,
    /// Mean HDAG ESTOI over files, one entry per swept value.
    pub means: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CSweep {
    pub values: Vec<f64>,
    pub rows: Vec<CSweepRow>,
    /// Mean over every noise and SNR.
    pub overall: Vec<Option<f64>>,
    /// Index of the best overall value.
    pub best: Option<usize>,
    /// Cells that could not be scored, with the reason.
    pub failures: Vec<String>,
}

impl CSweep {
    pub fn best_value(&self) -> Option<(f64, f64)> {
        self.best
            .and_then(|i| self.overall[i].map(|v| (self.values[i], v)))
    }
}

fn argmax(values: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.iter().enumerate() {
        if let Some(v) = *v {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Mean HDAG ESTOI for each value of `c`, per noise and SNR.
///
/// The pitch analysis of each mixture is done once and shared by all values.
pub fn c_sweep(m: &JobManifest, values: &[f64]) -> Result<CSweep> {
    m.validate()?;
    if values.is_empty() {
        return Err(Error::InvalidParameter("no values to sweep".into()));
    }
    let corpus = load_corpus(m)?;
    let mut noises = NoiseBank::new(&corpus, m.noise_sources());
    let noise_names: Vec<String> = noises.sources().iter().map(NoiseSource::name).collect();
    let (nn, ns, nv) = (noise_names.len(), m.snr_list_db.len(), values.len());
    // scores[noise][snr][value] collects one score per file.
    let mut scores = vec![vec![vec![Vec::new(); nv]; ns]; nn];
    let mut failures = Vec::new();
    for cell in cells(corpus.len(), nn, ns) {
        let prepared = match prepare_cell(m, &corpus, &mut noises, cell) {
            Ok(p) => p,
            Err(e) => {
                failures.push(format!("{}: {e}", corpus[cell.file].name));
                continue;
            }
        };
        for (v, &c) in values.iter().enumerate() {
            let mut fb = m.config.filterbank.clone();
            fb.c = c;
            let scored = split_bands(&prepared.analysis, &fb, m.config.enhance.boundary)
                .and_then(|split| synthesize(&prepared.analysis, &split, &fb, &m.config.enhance))
                .and_then(|(y, _)| estoi_with(&corpus[cell.file].signal, &y, &m.config.estoi));
            match scored {
                Ok(s) => scores[cell.noise][cell.snr][v].push(s.value),
                Err(e) => failures.push(format!("{} c={c}: {e}", corpus[cell.file].name)),
            }
        }
    }
    let mut rows = Vec::new();
    for (j, name) in noise_names.iter().enumerate() {
        for (k, &snr_db) in m.snr_list_db.iter().enumerate() {
            rows.push(CSweepRow {
                noise: name.clone(),
                snr_db,
                means: scores[j][k].iter().map(|s| mean(s.iter().copied())).collect(),
            });
        }
    }
    let overall: Vec<Option<f64>> = (0..nv)
        .map(|v| mean(scores.iter().flatten().flat_map(|by_value| by_value[v].iter().copied())))
        .collect();
    let best = argmax(&overall);
    Ok(CSweep {
        values: values.to_vec(),
        rows,
        overall,
        best,
        failures,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v:.6}"))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// Table layout: one row per noise and SNR, one column per value of `c`,
/// then a `mean,all` row. The best value is echoed in the header.
pub fn write_c_sweep_csv(mut out: impl Write, sweep: &CSweep, m: &JobManifest) -> Result<()> {
    let io = |e: std::io::Error| Error::io("<csv output>", e);
    let mut header = report_header("hdag sweep c", m);
    if let Some((c, v)) = sweep.best_value() {
        header.push_str(&format!("# best c = {c} (mean ESTOI {v:.6})\n"));
    }
    out.write_all(header.as_bytes()).map_err(io)?;
    let mut w = csv::Writer::from_writer(out);
    let mut head = vec!["noise".to_string(), "snr_db".to_string()];
    head.extend(sweep.values.iter().map(|c| format!("c={c:.1}")));
    w.write_record(&head).map_err(csv_err)?;
    for r in &sweep.rows {
        let mut rec = vec![r.noise.clone(), r.snr_db.to_string()];
        rec.extend(r.means.iter().map(|&v| fmt_opt(v)));
        w.write_record(&rec).map_err(csv_err)?;
    }
    let mut rec = vec!["mean".to_string(), "all".to_string()];
    rec.extend(sweep.overall.iter().map(|&v| fmt_opt(v)));
    w.write_record(&rec).map_err(csv_err)?;
    w.flush().map_err(io)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreedyOptions {
    /// Which gain set is searched; the other keeps its configured values.
    pub class: FrameClass,
    pub step: f64,
    pub max_gain: f64,
}

impl Default for GreedyOptions {
    fn default() -> Self {
        Self {
            class: FrameClass::LowPitch,
            step: 0.5,
            max_gain: 20.0,
        }
    }
}

/// One evaluation of the objective during the search.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyStep {
    /// Zero-based filter index.
    pub filter: usize,
    pub gain: f64,
    pub objective: f64,
    /// The step that fixed this filter's gain.
    pub frozen: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyResult {
    pub gains: Vec<f64>,
    pub objective: f64,
    pub trace: Vec<GreedyStep>,
    pub failures: Vec<String>,
}

/// Greedy per-filter gain search for one pitch class.
///
/// All gains of the class start at 1. Starting with the first filter, its
/// gain is raised by `step` while mean HDAG ESTOI over the grid strictly
/// improves, then frozen at the best value before the next filter is
/// searched. Band splits are computed once and reused for every step.
pub fn greedy_gains(m: &JobManifest, opts: &GreedyOptions) -> Result<GreedyResult> {
    m.validate()?;
    if opts.class == FrameClass::Unvoiced {
        return Err(Error::InvalidParameter("greedy search needs a voiced class".into()));
    }
    if !(opts.step > 0.0 && opts.step.is_finite()) {
        return Err(Error::InvalidParameter("gain step must be positive".into()));
    }
    if !(opts.max_gain >= 1.0) {
        return Err(Error::InvalidParameter("max gain must be at least 1".into()));
    }
    let corpus = load_corpus(m)?;
    let mut noises = NoiseBank::new(&corpus, m.noise_sources());
    let nn = noises.sources().len();
    let fb0 = &m.config.filterbank;
    let mut failures = Vec::new();
    let mut prepared: Vec<(usize, crate::enhance::SignalAnalysis, BandSplit)> = Vec::new();
    for cell in cells(corpus.len(), nn, m.snr_list_db.len()) {
        let result = prepare_cell(m, &corpus, &mut noises, cell).and_then(|p| {
            let split = split_bands(&p.analysis, fb0, m.config.enhance.boundary)?;
            Ok((cell.file, p.analysis, split))
        });
        match result {
            Ok(p) => prepared.push(p),
            Err(e) => failures.push(format!("{}: {e}", corpus[cell.file].name)),
        }
    }
    if prepared.is_empty() {
        return Err(Error::Degenerate("no grid cell could be prepared".into()));
    }
    let objective = |fb: &crate::filterbank::FilterbankConfig| -> Result<f64> {
        let mut sum = 0.0;
        for (file, analysis, split) in &prepared {
            let (y, _) = synthesize(analysis, split, fb, &m.config.enhance)?;
            sum += estoi_with(&corpus[*file].signal, &y, &m.config.estoi)?.value;
        }
        Ok(sum / prepared.len() as f64)
    };
    let mut fb = fb0.clone();
    *fb.gains_mut(opts.class).expect("voiced class") = vec![1.0; fb.num_filters];
    let mut best = objective(&fb)?;
    let mut trace = Vec::new();
    for k in 0..fb.num_filters {
        let mut best_gain = 1.0;
        trace.push(GreedyStep {
            filter: k,
            gain: best_gain,
            objective: best,
            frozen: false,
        });
        loop {
            let g = best_gain + opts.step;
            if g > opts.max_gain + 1e-12 {
                break;
            }
            fb.gains_mut(opts.class).expect("voiced class")[k] = g;
            let v = objective(&fb)?;
            trace.push(GreedyStep {
                filter: k,
                gain: g,
                objective: v,
                frozen: false,
            });
            if v > best {
                best = v;
                best_gain = g;
            } else {
                break;
            }
        }
        fb.gains_mut(opts.class).expect("voiced class")[k] = best_gain;
        if let Some(s) = trace
            .iter_mut()
            .rev()
            .find(|s| s.filter == k && s.gain == best_gain)
        {
            s.frozen = true;
        }
    }
    Ok(GreedyResult {
        gains: fb.gains(opts.class).expect("voiced class").to_vec(),
        objective: best,
        trace,
        failures,
    })
}

/// Trace table `filter,gain,mean_estoi,frozen` with 1-based filter numbers.
/// The final gains are echoed in the header.
pub fn write_greedy_csv(mut out: impl Write, result: &GreedyResult, m: &JobManifest, class: FrameClass) -> Result<()> {
    let io = |e: std::io::Error| Error::io("<csv output>", e);
    let mut header = report_header(&format!("hdag sweep gains ({})", class.as_str()), m);
    let gains: Vec<String> = result.gains.iter().map(|g| g.to_string()).collect();
    header.push_str(&format!(
        "# gains = [{}] (mean ESTOI {:.6})\n",
        gains.join(", "),
        result.objective
    ));
    out.write_all(header.as_bytes()).map_err(io)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["filter", "gain", "mean_estoi", "frozen"]).map_err(csv_err)?;
    for s in &result.trace {
        w.write_record([
            format!("F{}", s.filter + 1),
            s.gain.to_string(),
            format!("{:.6}", s.objective),
            s.frozen.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(io)
}
