//! Deterministic random number generation.
//!
//! All randomness in the crate flows through SplitMix64, a fixed 64-bit
//! mixing generator: the same `(seed, draw sequence)` always reproduces the
//! identical bit stream, across runs and across threads. Gaussian variates
//! are produced by the Box–Muller transform on that uniform stream, so the
//! Gaussian draw order is part of the contract as well.

/// The single generator algorithm the crate supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GeneratorId {
    /// SplitMix64: `state += 0x9E3779B97F4A7C15`, then two xor-shift
    /// multiplies (Steele, Lea & Flood's `splitmix64` finalizer).
    #[default]
    SplitMix64,
}

/// Seed plus generator choice; the unit of reproducibility.
///
/// Identical specs yield bit-identical streams. Derived streams (one per
/// trial, per matrix, ...) come from [`RngSpec::substream`], so parallel
/// workers can draw independently with schedule-independent results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngSpec {
    pub seed: u64,
    pub generator: GeneratorId,
}

impl RngSpec {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            generator: GeneratorId::SplitMix64,
        }
    }

    /// Deterministically derive the spec for the `index`-th substream.
    pub fn substream(&self, index: u64) -> Self {
        let mut mixer = SplitMix64::new(self.seed);
        let base = mixer.next_u64();
        let mut derived = SplitMix64::new(base ^ index.wrapping_mul(0xA24BAED4963EE407));
        Self {
            seed: derived.next_u64(),
            generator: self.generator,
        }
    }

    /// Uniform `u64` stream for this spec.
    pub fn uniform_stream(&self) -> SplitMix64 {
        let GeneratorId::SplitMix64 = self.generator;
        SplitMix64::new(self.seed)
    }

    /// Standard-normal stream (Box–Muller over the uniform stream).
    pub fn gaussian_stream(&self) -> GaussianStream {
        GaussianStream::new(self.uniform_stream())
    }
}

/// SplitMix64 generator state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Next 64-bit value.
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `(0, 1]`; safe as a logarithm argument.
    #[inline]
    fn next_f64_open_low(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, upper)`.
    #[inline]
    pub fn next_bounded(&mut self, upper: u64) -> u64 {
        if upper == 0 {
            return 0;
        }
        self.next_u64() % upper
    }
}

/// Standard-normal stream: classic Box–Muller, one cached spare per pair.
///
/// Draw `u1 ∈ (0,1]`, `u2 ∈ [0,1)`; emit `√(−2 ln u1)·cos(2π u2)` now and
/// `√(−2 ln u1)·sin(2π u2)` on the following call.
#[derive(Debug, Clone)]
pub struct GaussianStream {
    rng: SplitMix64,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(rng: SplitMix64) -> Self {
        Self { rng, spare: None }
    }

    /// Next standard-normal variate.
    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.rng.next_f64_open_low();
        let u2 = self.rng.next_f64();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }
}
