//! Block-time arithmetic at a nominal 7 second block time.

/// Nominal seconds per block.
pub const BLOCK_TIME_SECONDS: u64 = 7;

/// Blocks per minute rounded to the three decimals used for height
/// projections (`60/7 ≈ 8.571`), as a per-mille integer.
pub const PROJECTED_BLOCKS_PER_MINUTE_MILLI: u64 = 8_571;

pub const MINUTES_PER_DAY: u64 = 24 * 60;

/// Height projection over `days` with the 8.571 blocks-per-minute rate,
/// truncated. This is how the governance gate heights were derived.
pub fn projected_blocks(days: u64) -> u64 {
    days * MINUTES_PER_DAY * PROJECTED_BLOCKS_PER_MINUTE_MILLI / 1_000
}

/// Exact block count for a duration at one block every 7 seconds, truncated.
pub fn blocks_for_seconds(seconds: u64) -> u64 {
    seconds / BLOCK_TIME_SECONDS
}

pub fn blocks_for_days(days: u64) -> u64 {
    blocks_for_seconds(days * MINUTES_PER_DAY * 60)
}

/// Timestamp of `height` given the genesis anchor.
pub fn block_time(genesis_time: u64, genesis_height: u64, height: u64) -> u64 {
    genesis_time + BLOCK_TIME_SECONDS * height.saturating_sub(genesis_height)
}
