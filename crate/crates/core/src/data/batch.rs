use std::sync::mpsc::{sync_channel, Receiver};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{augment, AugmentConfig, Dataset};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct Batch {
    pub inputs: Vec<Tensor>,
    pub targets: Vec<f32>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// Draws `batch_size` samples uniformly with replacement and augments each.
pub fn batch<R: Rng + ?Sized>(dataset: &Dataset, rng: &mut R, batch_size: usize, aug: &AugmentConfig) -> Result<Batch> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if batch_size == 0 {
        return Err(Error::EmptyBatch);
    }
    let mut inputs = Vec::with_capacity(batch_size);
    let mut targets = Vec::with_capacity(batch_size);
    for _ in 0..batch_size {
        let s = &dataset.samples()[rng.random_range(0..dataset.len())];
        let a = augment(s, rng, aug);
        inputs.push(a.frame.to_tensor());
        targets.push(a.angle);
    }
    Ok(Batch { inputs, targets })
}

/// Background producer of a fixed number of batches, a few ahead of the
/// consumer. Output is identical to calling [`batch`] in a loop with a
/// `ChaCha8Rng` seeded from `seed`.
pub struct BatchStream {
    rx: Receiver<Result<Batch>>,
    worker: Option<JoinHandle<()>>,
}

impl BatchStream {
    pub fn spawn(dataset: Arc<Dataset>, count: usize, batch_size: usize, aug: AugmentConfig, seed: u64) -> Self {
        let (tx, rx) = sync_channel(2);
        let worker = thread::spawn(move || {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..count {
                let b = batch(&dataset, &mut rng, batch_size, &aug);
                let failed = b.is_err();
                if tx.send(b).is_err() || failed {
                    break;
                }
            }
        });
        Self { rx, worker: Some(worker) }
    }
}

impl Iterator for BatchStream {
    type Item = Result<Batch>;

    fn next(&mut self) -> Option<Self::Item> {
        self.rx.recv().ok()
    }
}

impl Drop for BatchStream {
    fn drop(&mut self) {
        // Unblock a producer waiting on a full channel before joining it.
        let (_, dead) = sync_channel(0);
        drop(std::mem::replace(&mut self.rx, dead));
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Sample;
    use crate::frame::GrayFrame;

    fn ds() -> Dataset {
        Dataset::new(
            (0..10)
                .map(|i| Sample::new(GrayFrame::filled(4, 3, i as u8 * 20), i as f32 / 10.0).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn shapes_and_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = batch(&ds(), &mut rng, 7, &AugmentConfig::disabled()).unwrap();
        assert_eq!(b.len(), 7);
        for (x, &t) in b.inputs.iter().zip(&b.targets) {
            assert_eq!(x.shape(), &[3, 4, 1]);
            assert!((x.data()[0] / 20.0 - t * 10.0).abs() < 1e-4);
        }
    }

    #[test]
    fn errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(batch(&ds(), &mut rng, 0, &AugmentConfig::default()), Err(Error::EmptyBatch)));
        assert!(matches!(
            batch(&Dataset::default(), &mut rng, 4, &AugmentConfig::default()),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn stream_matches_direct_sampling() {
        let d = Arc::new(ds());
        let aug = AugmentConfig::default();
        let streamed: Vec<Batch> = BatchStream::spawn(d.clone(), 5, 3, aug, 9).map(|b| b.unwrap()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(streamed.len(), 5);
        for s in streamed {
            let b = batch(&d, &mut rng, 3, &aug).unwrap();
            assert_eq!(s.targets, b.targets);
            assert_eq!(s.inputs, b.inputs);
        }
    }

    #[test]
    fn early_drop_does_not_hang() {
        let mut s = BatchStream::spawn(Arc::new(ds()), 1000, 2, AugmentConfig::default(), 0);
        assert!(s.next().is_some());
        drop(s);
    }
}
