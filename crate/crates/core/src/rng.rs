//! Counter-based random streams so parallel work is reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream families, so that different pipelines never share a stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    TomographyShots = 1,
    Bootstrap = 2,
    CertifySamples = 3,
    TruthTableShots = 4,
}

/// Generator for task `index` of `domain` under `seed`. The result depends
/// only on the three arguments, never on which thread asks for it.
pub fn task_rng(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed ^ (domain as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(index);
    rng
}
