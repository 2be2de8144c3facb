//! Low/high pitch separation from per-IMF F0 estimates, and the octave
//! corrections that follow from it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of leading IMFs that feed the per-IMF F0 vector.
pub const FSFFE_MODES: usize = 4;

/// Default low/high separation threshold in Hz.
pub const DEFAULT_GAMMA_HZ: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FrameClass {
    LowPitch,
    HighPitch,
    Unvoiced,
}

impl FrameClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            FrameClass::LowPitch => "low",
            FrameClass::HighPitch => "high",
            FrameClass::Unvoiced => "unvoiced",
        }
    }

    /// Class implied by a single F0 value against `gamma_hz` (inclusive low).
    pub fn from_f0(f0_hz: f64, gamma_hz: f64) -> Self {
        if f0_hz <= gamma_hz {
            FrameClass::LowPitch
        } else {
            FrameClass::HighPitch
        }
    }
}

/// Pairwise normalized F0 distances between the leading IMFs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    pub values: [[f64; FSFFE_MODES]; FSFFE_MODES],
    /// Row sums over valid entries; `None` for IMFs without an estimate.
    pub row_sums: [Option<f64>; FSFFE_MODES],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FsffeResult {
    pub class: FrameClass,
    pub f_bar_hz: f64,
    pub distances: DistanceMatrix,
    /// Indices of the two IMFs with the smallest row sums.
    pub selected: (usize, usize),
}

/// `|(a - b) / (a + b)|`.
pub fn normalized_distance(a: f64, b: f64) -> f64 {
    ((a - b) / (a + b)).abs()
}

/// Builds the distance matrix, averages the two most consistent estimates,
/// and thresholds the mean at `gamma_hz`.
///
/// Ties in row sum go to the lower IMF index.
pub fn fsffe_classify(vector: &[Option<f64>; FSFFE_MODES], gamma_hz: f64) -> Result<FsffeResult> {
    let valid = vector.iter().filter(|v| v.is_some()).count();
    if valid < 2 {
        return Err(Error::InsufficientEstimates { valid });
    }
    let mut values = [[0.0; FSFFE_MODES]; FSFFE_MODES];
    for (k, row) in values.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            if let (Some(a), Some(b)) = (vector[k], vector[j]) {
                *cell = normalized_distance(a, b);
            }
        }
    }
    let mut row_sums: [Option<f64>; FSFFE_MODES] = [None; FSFFE_MODES];
    for k in 0..FSFFE_MODES {
        if vector[k].is_some() {
            row_sums[k] = Some(values[k].iter().sum());
        }
    }
    let mut order: Vec<usize> = (0..FSFFE_MODES).filter(|&k| row_sums[k].is_some()).collect();
    order.sort_by(|&a, &b| {
        row_sums[a]
            .unwrap()
            .total_cmp(&row_sums[b].unwrap())
            .then(a.cmp(&b))
    });
    let (i, j) = (order[0].min(order[1]), order[0].max(order[1]));
    let f_bar_hz = 0.5 * (vector[i].unwrap() + vector[j].unwrap());
    Ok(FsffeResult {
        class: FrameClass::from_f0(f_bar_hz, gamma_hz),
        f_bar_hz,
        distances: DistanceMatrix { values, row_sums },
        selected: (i, j),
    })
}

/// Octave correction of an F0 estimate given the frame class.
///
/// Low-pitch frames halve estimates in [200, 400] Hz. High-pitch frames
/// quadruple estimates in [50, 100] Hz and double those in (100, 200] Hz.
/// Everything else passes through.
pub fn adjust_f0(f_est_hz: f64, class: FrameClass) -> f64 {
    match class {
        FrameClass::LowPitch if (200.0..=400.0).contains(&f_est_hz) => 0.5 * f_est_hz,
        FrameClass::HighPitch if (50.0..=100.0).contains(&f_est_hz) => 4.0 * f_est_hz,
        FrameClass::HighPitch if f_est_hz > 100.0 && f_est_hz <= 200.0 => 2.0 * f_est_hz,
        _ => f_est_hz,
    }
}
