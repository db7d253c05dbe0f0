//! Reproducible random streams.
//!
//! Every Monte-Carlo sample owns a stream keyed by `(seed, stream)`, so
//! results do not depend on how samples are scheduled across threads.
//! Standard normals come from the Box–Muller transform applied to pairs of
//! uniforms; the second variate of each pair is cached.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream offset separating the channels of vector-valued noise.
pub const CHANNEL_STRIDE: u64 = 1 << 40;

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self {
            seed,
            stream,
            rng,
            spare: None,
        }
    }

    /// Stream for channel `channel` of sample `sample`.
    pub fn for_channel(seed: u64, sample: u64, channel: u64) -> Self {
        Self::new(seed, sample.wrapping_add(channel.wrapping_mul(CHANNEL_STRIDE)))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 1 - U lies in (0, 1], keeping the logarithm finite
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    pub fn normals(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }

    pub fn fill_normals(&mut self, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = self.normal());
    }
}
