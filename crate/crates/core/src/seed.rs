//! Seed derivation for independent random streams.

/// Stream tags keep training, evaluation and traffic draws apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    TrainChannel = 1,
    TrainTraffic = 2,
    EvalChannel = 3,
    EvalTraffic = 4,
    Agent = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `(base, stream, index)`.
pub fn derive(base: u64, stream: Stream, index: u64) -> u64 {
    let a = splitmix64(base ^ (stream as u64).wrapping_mul(0xA24B_AED4_963E_E407));
    splitmix64(a ^ splitmix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}
