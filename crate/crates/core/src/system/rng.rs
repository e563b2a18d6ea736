use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Offset separating evaluation seeds from training seeds.
pub const EVAL_SEED_OFFSET: u64 = 1_000_000_000;

/// Independent noise sources of one simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseStream {
    Process = 0,
    Sensor = 1,
    Input = 2,
    Innovation = 3,
}

/// Standard normal draws by Box–Muller over a ChaCha8 stream.
///
/// Each `(seed, stream)` pair selects a distinct ChaCha stream, so the process,
/// sensor and input noises of one replication never share random bits.
#[derive(Debug, Clone)]
pub struct GaussianStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64, stream: NoiseStream) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream as u64);
        GaussianStream { rng, spare: None }
    }

    fn uniform_open(&mut self) -> f64 {
        // 53 random bits mapped to (0, 1]
        ((self.rng.next_u64() >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform_open();
        let u2 = self.uniform_open();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.next();
        }
    }
}
