/// Purpose label of a random stream. Each purpose gets an independent
/// sub-stream of the master seed so that, e.g., changing the batch shuffle
/// never perturbs the initialization draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamPurpose {
    Init,
    Shuffle,
    Data,
    Noise,
}

impl StreamPurpose {
    fn tag(self) -> u64 {
        match self {
            StreamPurpose::Init => 0x1,
            StreamPurpose::Shuffle => 0x2,
            StreamPurpose::Data => 0x3,
            StreamPurpose::Noise => 0x4,
        }
    }
}

/// Counter-based deterministic random stream. Identical (seed, purpose) pairs
/// yield identical value sequences on every platform.
///
/// Output i is `mix(key + i)` with the SplitMix64 finalizer, so streams can
/// be cheaply forked without shared state.
#[derive(Debug, Clone)]
pub struct RngStream {
    key: u64,
    counter: u64,
    cached_normal: Option<f64>,
}

const GOLDEN: u64 = 0x9E3779B97F4A7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, purpose: StreamPurpose) -> Self {
        // fold the purpose tag into the key so sub-streams are independent
        let key = mix(seed ^ purpose.tag().wrapping_mul(GOLDEN));
        Self {
            key,
            counter: 0,
            cached_normal: None,
        }
    }

    /// Derives an independent child stream, e.g. one per layer or per seed.
    pub fn fork(&self, label: u64) -> Self {
        Self {
            key: mix(self.key ^ label.wrapping_mul(GOLDEN)),
            counter: 0,
            cached_normal: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform integer in [0, n).
    pub fn next_below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_f64() * n as f64) as usize % n
    }

    /// Standard normal via Box-Muller (deterministic, no rejection loop over
    /// platform-dependent trig would change sequences: libm sin/cos are
    /// correctly rounded for f64 on the targets we support).
    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.cached_normal.take() {
            return z;
        }
        let u1 = (1.0 - self.next_f64()).max(f64::MIN_POSITIVE);
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.cached_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Fisher-Yates shuffle of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.next_below(i + 1);
            p.swap(i, j);
        }
        p
    }
}
