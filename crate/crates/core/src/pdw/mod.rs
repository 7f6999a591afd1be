//! Pulse descriptor words, pulse trains and the partition representations
//! shared by every other module.

mod dataset;
mod normalize;
mod partition;

pub use dataset::{read_dataset, read_dataset_all, write_dataset, DatasetReader, DatasetWriter};
pub use normalize::{normalize_train, NormalizedTrain};
pub use partition::{labels_from_partition, partition_from_labels, LabelVector, Partition, NOISE};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Number of features in a pulse descriptor word.
pub const N_FEATURES: usize = 5;

/// Column indices in the feature matrix layout.
pub mod column {
    pub const TOA: usize = 0;
    pub const FREQUENCY: usize = 1;
    pub const PULSE_WIDTH: usize = 2;
    pub const AOA: usize = 3;
    pub const AMPLITUDE: usize = 4;
}

/// One received pulse.
///
/// Units: ToA and pulse width in seconds, centre frequency in hertz, angle of
/// arrival in degrees in `[0, 360)`, amplitude in dB (the simulator's
/// convention; normalization does not depend on it).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseDescriptorWord {
    pub toa: f64,
    pub frequency: f64,
    pub pulse_width: f64,
    pub aoa: f64,
    pub amplitude: f64,
}

impl PulseDescriptorWord {
    pub fn new(toa: f64, frequency: f64, pulse_width: f64, aoa: f64, amplitude: f64) -> Result<Self> {
        let pdw = Self {
            toa,
            frequency,
            pulse_width,
            aoa,
            amplitude,
        };
        pdw.validate()?;
        Ok(pdw)
    }

    pub fn from_array(values: [f64; N_FEATURES]) -> Result<Self> {
        Self::new(values[0], values[1], values[2], values[3], values[4])
    }

    pub fn to_array(&self) -> [f64; N_FEATURES] {
        [self.toa, self.frequency, self.pulse_width, self.aoa, self.amplitude]
    }

    pub fn validate(&self) -> Result<()> {
        if !self.to_array().iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("pulse {:?}", self.to_array())));
        }
        if self.toa < 0.0 {
            return Err(Error::Validation(format!("negative toa {}", self.toa)));
        }
        if self.frequency <= 0.0 {
            return Err(Error::Validation(format!("non-positive frequency {}", self.frequency)));
        }
        if self.pulse_width <= 0.0 {
            return Err(Error::Validation(format!(
                "non-positive pulse width {}",
                self.pulse_width
            )));
        }
        if !(0.0..360.0).contains(&self.aoa) {
            return Err(Error::Validation(format!("aoa {} outside [0, 360)", self.aoa)));
        }
        Ok(())
    }
}

/// An ordered pulse train, optionally with ground-truth emitter labels.
///
/// Pulses are always held sorted by ToA; the constructor sorts (stably) and
/// permutes labels along with the pulses.
#[derive(Clone, Debug, PartialEq)]
pub struct PulseTrain {
    pub train_id: String,
    pulses: Vec<PulseDescriptorWord>,
    labels: Option<LabelVector>,
}

impl PulseTrain {
    pub fn new(
        train_id: impl Into<String>,
        pulses: Vec<PulseDescriptorWord>,
        labels: Option<LabelVector>,
    ) -> Result<Self> {
        if let Some(labels) = &labels {
            if labels.len() != pulses.len() {
                return Err(Error::Validation(format!(
                    "{} labels for {} pulses",
                    labels.len(),
                    pulses.len()
                )));
            }
            if labels.has_noise() {
                return Err(Error::Validation("ground-truth labels must be non-negative".into()));
            }
        }
        let mut order: Vec<usize> = (0..pulses.len()).collect();
        let sorted = pulses.windows(2).all(|w| w[0].toa <= w[1].toa);
        if !sorted {
            order.sort_by(|&a, &b| pulses[a].toa.total_cmp(&pulses[b].toa));
        }
        let (pulses, labels) = if sorted {
            (pulses, labels)
        } else {
            let p = order.iter().map(|&i| pulses[i]).collect();
            let l = labels.map(|l| LabelVector::new(order.iter().map(|&i| l.as_slice()[i]).collect()));
            (p, l)
        };
        Ok(Self {
            train_id: train_id.into(),
            pulses,
            labels,
        })
    }

    pub fn pulses(&self) -> &[PulseDescriptorWord] {
        &self.pulses
    }

    pub fn labels(&self) -> Option<&LabelVector> {
        self.labels.as_ref()
    }

    pub fn len(&self) -> usize {
        self.pulses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty()
    }

    /// Number of distinct ground-truth emitters, if labelled.
    pub fn n_emitters(&self) -> Option<usize> {
        self.labels.as_ref().map(LabelVector::n_clusters)
    }

    /// Ground-truth partition, if labelled.
    pub fn truth(&self) -> Option<Partition> {
        self.labels.as_ref().map(Partition::from_labels)
    }
}
