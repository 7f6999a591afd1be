//! JSON-lines dataset files: one train per line,
//! `{"train_id": "...", "pulses": [[toa, freq, pw, aoa, amp], ...], "labels": [...]}`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Lines, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{LabelVector, PulseDescriptorWord, PulseTrain, N_FEATURES};
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
struct Record {
    train_id: String,
    pulses: Vec<[f64; N_FEATURES]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<i64>>,
}

/// Streaming reader over a dataset file.
pub struct DatasetReader {
    path: PathBuf,
    lines: Lines<BufReader<File>>,
    line_no: usize,
}

impl Iterator for DatasetReader {
    type Item = Result<PulseTrain>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(e) => return Some(Err(Error::io(&self.path, e))),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            return Some(self.parse(&line));
        }
    }
}

impl DatasetReader {
    fn parse(&self, line: &str) -> Result<PulseTrain> {
        let err = |message: String| Error::Parse {
            path: self.path.clone(),
            line: self.line_no,
            message,
        };
        let record: Record = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        let pulses = record
            .pulses
            .iter()
            .map(|&values| PulseDescriptorWord::from_array(values))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| err(e.to_string()))?;
        let labels = record.labels.map(LabelVector::new);
        PulseTrain::new(record.train_id, pulses, labels).map_err(|e| err(e.to_string()))
    }
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<DatasetReader> {
    let path = path.as_ref().to_path_buf();
    let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
    Ok(DatasetReader {
        path,
        lines: BufReader::new(file).lines(),
        line_no: 0,
    })
}

pub fn read_dataset_all(path: impl AsRef<Path>) -> Result<Vec<PulseTrain>> {
    read_dataset(path)?.collect()
}

/// Incremental writer; call [`DatasetWriter::finish`] to flush.
pub struct DatasetWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl DatasetWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            path,
            out: BufWriter::new(file),
        })
    }

    pub fn write(&mut self, train: &PulseTrain) -> Result<()> {
        let record = Record {
            train_id: train.train_id.clone(),
            pulses: train.pulses().iter().map(PulseDescriptorWord::to_array).collect(),
            labels: train.labels().map(|l| l.as_slice().to_vec()),
        };
        serde_json::to_writer(&mut self.out, &record).map_err(|e| Error::io(&self.path, e.into()))?;
        self.out.write_all(b"\n").map_err(|e| Error::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn write_dataset<'a>(trains: impl IntoIterator<Item = &'a PulseTrain>, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = DatasetWriter::create(path)?;
    for train in trains {
        writer.write(train)?;
    }
    writer.finish()
}
