//! Stable 64-bit hashing used wherever a value must map to the same bucket
//! on every platform and in every release: session-to-arm assignment and
//! coin-stream seeding. FNV-1a is trivial to port, which keeps replay logs
//! comparable across reimplementations.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x100_0000_01b3;

/// FNV-1a over a single byte slice.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    fnv1a64_parts(&[bytes])
}

/// FNV-1a over the concatenation of `parts`, without allocating.
pub fn fnv1a64_parts(parts: &[&[u8]]) -> u64 {
    let mut hash = FNV_OFFSET;
    for part in parts {
        for &byte in *part {
            hash ^= u64::from(byte);
            hash = hash.wrapping_mul(FNV_PRIME);
        }
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_vectors() {
        // Published FNV-1a 64 test vectors.
        assert_eq!(fnv1a64(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a64(b"a"), 0xaf63_dc4c_8601_ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn parts_concatenate() {
        assert_eq!(fnv1a64_parts(&[b"foo", b"bar"]), fnv1a64(b"foobar"));
        assert_ne!(fnv1a64_parts(&[b"foo", b"bar"]), fnv1a64_parts(&[b"foob", b"ar", b"x"]));
    }
}
