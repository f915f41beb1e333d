//! Counter-based pseudo-random source.
//!
//! The contract is `(seed, stream, counter) -> value`: every draw is a pure
//! function of those three integers, so replica `r` of a run seeded with `S`
//! reproduces bit-identically no matter how work is scheduled, and a stream
//! can be split into per-walker substreams without coordination.
//!
//! The mixing function is the SplitMix64 finalizer applied to
//! `key + counter * golden_gamma`, i.e. the classic SplitMix64 sequence with
//! a per-stream key.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A keyed random stream. Copyable; all methods are pure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    key: u64,
}

impl RngStream {
    /// Stream `stream` of the generator seeded with `seed`.
    pub fn new(seed: u64, stream: u64) -> Self {
        let key = mix64(
            mix64(seed ^ 0x6A09_E667_F3BC_C909)
                ^ mix64(stream.wrapping_mul(GOLDEN_GAMMA) ^ 0xBB67_AE85_84CA_A73B),
        );
        RngStream { key }
    }

    /// Derives an independent substream (e.g. one per walker).
    pub fn substream(&self, index: u64) -> RngStream {
        RngStream {
            key: mix64(self.key ^ mix64(index.wrapping_mul(GOLDEN_GAMMA) ^ 0x3C6E_F372_FE94_F82B)),
        }
    }

    /// The `counter`-th 64-bit word of this stream.
    #[inline]
    pub fn value_at(&self, counter: u64) -> u64 {
        mix64(self.key.wrapping_add(counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform variate in the open interval `(0, 1)`.
    ///
    /// Uses the top 53 bits offset by half an ulp, so neither endpoint is
    /// ever returned (inverse-transform sampling may divide by `u` or take
    /// `ln u`).
    #[inline]
    pub fn open01_at<F: crate::Real>(&self, counter: u64) -> F {
        let bits = self.value_at(counter) >> 11;
        crate::lit::<F>((bits as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0))
    }
}

/// Stateful convenience wrapper advancing a counter through a stream.
#[derive(Debug, Clone)]
pub struct CounterRng {
    stream: RngStream,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        CounterRng {
            stream: RngStream::new(seed, stream),
            counter: 0,
        }
    }

    pub fn from_stream(stream: RngStream) -> Self {
        CounterRng { stream, counter: 0 }
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = self.stream.value_at(self.counter);
        self.counter += 1;
        v
    }

    pub fn next_open01<F: crate::Real>(&mut self) -> F {
        let v = self.stream.open01_at(self.counter);
        self.counter += 1;
        v
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }
}
