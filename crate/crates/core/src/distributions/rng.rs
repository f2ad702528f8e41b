use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Domain tag mixed into the ChaCha key so streams here never collide with a
/// generator seeded directly from the same integers elsewhere.
const DOMAIN_TAG: [u8; 16] = *b"zicount/streamv1";

/// A counter-based random stream addressed by `(key, stream_id, substream_id)`.
///
/// `key` and `stream_id` form the ChaCha key together with a fixed tag,
/// `substream_id` selects the ChaCha stream nonce, and the block counter is
/// the position within that stream. The output is a pure function of these
/// fields, so replications can run on any thread in any order.
#[derive(Debug, Clone)]
pub struct RngStream {
    key: u64,
    stream_id: u64,
    substream_id: u64,
    inner: ChaCha12Rng,
}

impl RngStream {
    pub fn new(key: u64, stream_id: u64, substream_id: u64) -> Self {
        let mut seed = [0u8; 32];
        seed[..8].copy_from_slice(&key.to_le_bytes());
        seed[8..16].copy_from_slice(&stream_id.to_le_bytes());
        seed[16..].copy_from_slice(&DOMAIN_TAG);
        let mut inner = ChaCha12Rng::from_seed(seed);
        inner.set_stream(substream_id);
        Self { key, stream_id, substream_id, inner }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn substream_id(&self) -> u64 {
        self.substream_id
    }

    /// Position in the stream, in 32-bit words consumed.
    pub fn counter(&self) -> u128 {
        self.inner.get_word_pos()
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
