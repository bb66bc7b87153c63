//! Dataset evaluation and the confusion matrix.

use rayon::prelude::*;

use crate::correcting::CorrectingLayer;
use crate::dataio::encode::{encode_image, EncodingSpec};
use crate::dataio::idx::Dataset;
use crate::error::Result;
use crate::network::{classify, DiffractiveNetwork};

/// 10x10 count table, rows = true class, columns = predicted class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 10]; 10],
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        Self {
            counts: [[0; 10]; 10],
        }
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..10).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return f64::NAN;
        }
        self.trace() as f64 / total as f64
    }

    /// Count of samples whose true class is `i` (row sum).
    pub fn class_total(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    /// Ten comma-separated rows followed by an `accuracy,<value>` line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.counts {
            let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out.push_str(&format!("accuracy,{}\n", self.accuracy()));
        out
    }
}

impl Default for ConfusionMatrix {
    fn default() -> Self {
        Self::new()
    }
}

/// Evaluate a network over a dataset, optionally through the correcting
/// layer. Returns accuracy and the confusion matrix.
pub fn evaluate(
    net: &DiffractiveNetwork,
    correcting: Option<&CorrectingLayer>,
    data: &Dataset,
    encoding: &EncodingSpec,
) -> Result<(f64, ConfusionMatrix)> {
    encoding.validate(net.grid())?;
    let predictions: Vec<usize> = data
        .images
        .par_iter()
        .map(|img| {
            let field = encode_image(img, encoding, *net.grid())?;
            let (x, _) = net.forward(&field)?;
            Ok(match correcting {
                Some(c) => c.classify(&x),
                None => classify(&x),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut matrix = ConfusionMatrix::new();
    for (&label, &pred) in data.labels.iter().zip(&predictions) {
        matrix.record(label as usize, pred);
    }
    Ok((matrix.accuracy(), matrix))
}
