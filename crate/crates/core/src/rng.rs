use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent sub-streams derived from one user seed.
pub(crate) mod salt {
    pub const EMISSION: u64 = 0x01;
    pub const BACKGROUND: u64 = 0x02;
    pub const POISSON_SOURCE: u64 = 0x03;
    pub const ROUTING: u64 = 0x10;
    pub const DETECTION: u64 = 0x20;
    pub const AFTERPULSE: u64 = 0x21;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn rng_for(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(salt)))
}

/// Rounds a non-negative picosecond offset to the integer grid.
pub(crate) fn to_ps(x: f64) -> u64 {
    if x <= 0.0 {
        0
    } else {
        x.round() as u64
    }
}
