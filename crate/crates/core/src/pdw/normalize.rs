use super::{column, PulseTrain, N_FEATURES};

/// Per-train normalized features, one row per pulse in ToA order.
///
/// ToA is min-max scaled to `[0, 1]`, AoA is divided by 360 and the
/// frequency, pulse-width and amplitude columns are z-scored within the
/// train (population standard deviation; a constant column maps to zeros).
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedTrain {
    pub train_id: String,
    features: Vec<[f64; N_FEATURES]>,
}

impl NormalizedTrain {
    pub fn from_rows(train_id: impl Into<String>, features: Vec<[f64; N_FEATURES]>) -> Self {
        Self {
            train_id: train_id.into(),
            features,
        }
    }

    pub fn rows(&self) -> &[[f64; N_FEATURES]] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Row-major `n x 5` copy.
    pub fn to_flat(&self) -> Vec<f64> {
        self.features.iter().flatten().copied().collect()
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        self.features.iter().map(|r| r[c]).collect()
    }

    /// Rows reordered so that `out[i] = self[order[i]]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            train_id: self.train_id.clone(),
            features: order.iter().map(|&i| self.features[i]).collect(),
        }
    }
}

pub fn normalize_train(train: &PulseTrain) -> NormalizedTrain {
    let rows: Vec<[f64; N_FEATURES]> = train.pulses().iter().map(|p| p.to_array()).collect();
    NormalizedTrain {
        train_id: train.train_id.clone(),
        features: normalize_rows(&rows),
    }
}

pub(crate) fn normalize_rows(rows: &[[f64; N_FEATURES]]) -> Vec<[f64; N_FEATURES]> {
    let mut out = rows.to_vec();
    if rows.is_empty() {
        return out;
    }
    min_max(&mut out, column::TOA);
    for c in [column::FREQUENCY, column::PULSE_WIDTH, column::AMPLITUDE] {
        z_score(&mut out, c);
    }
    for r in &mut out {
        r[column::AOA] /= 360.0;
    }
    out
}

fn min_max(rows: &mut [[f64; N_FEATURES]], c: usize) {
    let lo = rows.iter().map(|r| r[c]).fold(f64::INFINITY, f64::min);
    let hi = rows.iter().map(|r| r[c]).fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    for r in rows.iter_mut() {
        r[c] = if span > 0.0 { (r[c] - lo) / span } else { 0.0 };
    }
}

fn z_score(rows: &mut [[f64; N_FEATURES]], c: usize) {
    let n = rows.len() as f64;
    let mean = rows.iter().map(|r| r[c]).sum::<f64>() / n;
    let var = rows.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    // Relative guard: a column whose spread is pure rounding is constant.
    let constant = std <= mean.abs() * 1e-12;
    for r in rows.iter_mut() {
        r[c] = if constant { 0.0 } else { (r[c] - mean) / std };
    }
}
