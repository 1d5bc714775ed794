//! Counter-based random streams: one independent ChaCha stream per
//! (seed, purpose, index), so results never depend on worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const PURPOSE_T_DRAWS: u64 = 1;
pub const PURPOSE_GAUSSIAN: u64 = 2;
pub const PURPOSE_DICTIONARY: u64 = 3;
pub const PURPOSE_DENSITY_MC: u64 = 4;
pub const PURPOSE_BL_REFERENCE: u64 = 5;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn stream(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let a = splitmix(seed);
    let b = splitmix(a ^ purpose.wrapping_mul(0xd6e8_feb8_6659_fd93));
    let c = splitmix(b);
    let d = splitmix(c ^ 0x5851_f42d_4c95_7f2d);
    for (k, w) in [a, b, c, d].iter().enumerate() {
        key[8 * k..8 * k + 8].copy_from_slice(&w.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
