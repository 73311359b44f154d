use crate::numerics::{RngStream, StreamPurpose, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Labeled inputs: `[N, features]` for flat models, `[N, c, h, w]` for
/// convolutional ones.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub inputs: Tensor,
    pub labels: Vec<usize>,
    pub split: Split,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.iter().copied().max().map_or(0, |m| m + 1)
    }

    /// Rows `indices` of the dataset as a batch.
    pub fn batch(&self, indices: &[usize]) -> (Tensor, Vec<usize>) {
        let feat: usize = self.inputs.shape()[1..].iter().product();
        let mut shape = self.inputs.shape().to_vec();
        shape[0] = indices.len();
        let mut data = Vec::with_capacity(indices.len() * feat);
        for &i in indices {
            data.extend_from_slice(&self.inputs.data()[i * feat..(i + 1) * feat]);
        }
        (
            Tensor::new(shape, data).expect("batch slices stay finite"),
            indices.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    /// Deterministic train/test partition: the first `train` rows go to the
    /// train split, the rest to test.
    pub fn split_at(&self, train: usize) -> (Dataset, Dataset) {
        let idx_train: Vec<usize> = (0..train).collect();
        let idx_test: Vec<usize> = (train..self.len()).collect();
        let (ti, tl) = self.batch(&idx_train);
        let (si, sl) = self.batch(&idx_test);
        (
            Dataset {
                inputs: ti,
                labels: tl,
                split: Split::Train,
            },
            Dataset {
                inputs: si,
                labels: sl,
                split: Split::Test,
            },
        )
    }
}

/// Two interleaved half-circles with Gaussian noise, the classic binary
/// benchmark. `noise = 0` puts every point exactly on its arc.
pub fn make_two_moons(seed: u64, n: usize, noise: f64) -> Dataset {
    let mut rng = RngStream::new(seed, StreamPurpose::Data);
    let mut data = Vec::with_capacity(n * 2);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % 2;
        let t = std::f64::consts::PI * rng.next_f64();
        let (x, y) = if label == 0 {
            (t.cos(), t.sin())
        } else {
            (1.0 - t.cos(), 0.5 - t.sin())
        };
        data.push(x + noise * rng.next_normal());
        data.push(y + noise * rng.next_normal());
        labels.push(label);
    }
    Dataset {
        inputs: Tensor::new(vec![n, 2], data).expect("finite"),
        labels,
        split: Split::Train,
    }
}

/// Isotropic Gaussian blobs, one per class, centers on a circle.
pub fn make_blobs(seed: u64, n: usize, classes: usize) -> Dataset {
    let mut rng = RngStream::new(seed, StreamPurpose::Data);
    let mut data = Vec::with_capacity(n * 2);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % classes;
        let angle = 2.0 * std::f64::consts::PI * label as f64 / classes as f64;
        data.push(3.0 * angle.cos() + rng.next_normal());
        data.push(3.0 * angle.sin() + rng.next_normal());
        labels.push(label);
    }
    Dataset {
        inputs: Tensor::new(vec![n, 2], data).expect("finite"),
        labels,
        split: Split::Train,
    }
}

/// Single-channel `size x size` images with class-dependent oriented
/// patterns plus noise, a desk-scale stand-in for an image benchmark.
///
/// Class c draws a stripe of orientation `c * pi / classes` through a random
/// offset, so the task needs real spatial filters.
pub fn make_pattern_images(seed: u64, n: usize, classes: usize, size: usize, noise: f64) -> Dataset {
    let mut rng = RngStream::new(seed, StreamPurpose::Data);
    let mut data = Vec::with_capacity(n * size * size);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % classes;
        let angle = std::f64::consts::PI * label as f64 / classes as f64;
        let (dx, dy) = (angle.cos(), angle.sin());
        let offset = (rng.next_f64() - 0.5) * size as f64 * 0.5;
        let phase = rng.next_f64() * std::f64::consts::PI;
        for r in 0..size {
            for c in 0..size {
                let x = c as f64 - size as f64 / 2.0;
                let y = r as f64 - size as f64 / 2.0;
                // signed distance to the stripe axis
                let d = dx * y - dy * x - offset;
                let v = (d * 1.2 + phase).sin();
                data.push(v + noise * rng.next_normal());
            }
        }
        labels.push(label);
    }
    Dataset {
        inputs: Tensor::new(vec![n, 1, size, size], data).expect("finite"),
        labels,
        split: Split::Train,
    }
}
