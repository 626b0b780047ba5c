use xxhash_rust::xxh64::xxh64;

use super::DataplaneError;

/// Seeded hash of `bytes` reduced into `[0, modulus)`.
///
/// The mixer is XXH64; the 64-bit digest is mapped onto the modulus with a
/// multiply-shift range reduction, so power-of-two and odd moduli both draw
/// on the high-quality upper bits.
pub fn hash_lane(bytes: &[u8], seed: u64, modulus: u64) -> Result<u64, DataplaneError> {
    if modulus == 0 {
        return Err(DataplaneError::InvalidArgument("hash modulus must be at least 1".into()));
    }
    let digest = xxh64(bytes, seed);
    Ok(((digest as u128 * modulus as u128) >> 64) as u64)
}
