//! Steering datasets: balancing, mirror expansion, augmentation, splitting,
//! batching, and the `DDDS1` file format.

pub mod augment;
pub mod batch;
pub mod io;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame::GrayFrame;

pub use augment::{augment, AugmentConfig, Augmentation};
pub use batch::{batch, Batch, BatchStream};
pub use io::{read_dataset, write_dataset, DatasetFormatError};

/// A frame and its steering label: −1 full left, +1 full right.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub frame: GrayFrame,
    pub angle: f32,
}

impl Sample {
    pub fn new(frame: GrayFrame, angle: f32) -> Result<Self> {
        if !(-1.0..=1.0).contains(&angle) {
            return Err(Error::config(format!("steering angle {angle} outside [-1, 1]")));
        }
        Ok(Self { frame, angle })
    }

    pub fn mirrored(&self) -> Self {
        Self {
            frame: self.frame.mirrored(),
            angle: -self.angle,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Provenance {
    Raw,
    Balanced,
    Mirrored,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    samples: Vec<Sample>,
    provenance: Vec<Provenance>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        let mut ds = Self {
            samples: Vec::with_capacity(samples.len()),
            provenance: vec![Provenance::Raw],
        };
        for s in samples {
            ds.push(s)?;
        }
        Ok(ds)
    }

    /// Appends a sample; its frame must match the existing frame size.
    pub fn push(&mut self, sample: Sample) -> Result<()> {
        if let Some(first) = self.samples.first() {
            if (first.frame.width(), first.frame.height()) != (sample.frame.width(), sample.frame.height()) {
                return Err(Error::shape(format!(
                    "frame {}x{} differs from dataset frames {}x{}",
                    sample.frame.width(),
                    sample.frame.height(),
                    first.frame.width(),
                    first.frame.height()
                )));
            }
        }
        self.samples.push(sample);
        Ok(())
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn angles(&self) -> Vec<f32> {
        self.samples.iter().map(|s| s.angle).collect()
    }

    fn derived(&self, samples: Vec<Sample>, tag: Provenance) -> Self {
        let mut provenance = self.provenance.clone();
        provenance.push(tag);
        Self { samples, provenance }
    }

    fn select(&self, indices: &[usize]) -> Self {
        Self {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            provenance: self.provenance.clone(),
        }
    }
}

/// Equal-width histogram bin of `angle` over `[-1, 1]`.
pub fn angle_bin(angle: f32, bins: usize) -> usize {
    let t = ((angle + 1.0) / 2.0).clamp(0.0, 1.0);
    ((t * bins as f32) as usize).min(bins - 1)
}

pub fn histogram(dataset: &Dataset, bins: usize) -> Vec<usize> {
    let mut h = vec![0; bins];
    for s in dataset.samples() {
        h[angle_bin(s.angle, bins)] += 1;
    }
    h
}

/// Number of survivors [`balance`] keeps for a given histogram and cap.
pub fn balanced_len(histogram: &[usize], cap: usize) -> usize {
    histogram.iter().map(|&c| c.min(cap)).sum()
}

/// Truncates every angle bin to `cap_per_bin` samples by uniform random
/// removal. Survivors keep their original order.
pub fn balance(dataset: &Dataset, bins: usize, cap_per_bin: usize, seed: u64) -> Result<Dataset> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if bins < 3 {
        return Err(Error::config(format!("balance needs at least 3 bins, got {bins}")));
    }
    if cap_per_bin == 0 {
        return Err(Error::config("cap per bin must be positive"));
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); bins];
    for (i, s) in dataset.samples().iter().enumerate() {
        members[angle_bin(s.angle, bins)].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![false; dataset.len()];
    for bin in &members {
        if bin.len() <= cap_per_bin {
            bin.iter().for_each(|&i| keep[i] = true);
        } else {
            for j in index::sample(&mut rng, bin.len(), cap_per_bin) {
                keep[bin[j]] = true;
            }
        }
    }
    let samples = dataset
        .samples()
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(s, _)| s.clone())
        .collect();
    Ok(dataset.derived(samples, Provenance::Balanced))
}

/// Appends the horizontal mirror of every sample with its angle negated.
pub fn mirror_expand(dataset: &Dataset) -> Dataset {
    let mut samples = dataset.samples().to_vec();
    samples.extend(dataset.samples().iter().map(Sample::mirrored));
    dataset.derived(samples, Provenance::Mirrored)
}

/// Random disjoint `(train, test)` index sets, each in ascending order.
pub fn split_indices(len: usize, train_count: usize, test_count: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if train_count + test_count > len {
        return Err(Error::config(format!(
            "split {train_count} + {test_count} exceeds dataset size {len}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = index::sample(&mut rng, len, train_count + test_count).into_vec();
    let mut train = picked[..train_count].to_vec();
    let mut test = picked[train_count..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split(dataset: &Dataset, train_count: usize, test_count: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(dataset.len(), train_count, test_count, seed)?;
    Ok((dataset.select(&train), dataset.select(&test)))
}
