//! Regenerates the register table in `driving::lfsr::TABLE`.
//!
//! Usage: `cargo run --release --example lfsr_search [t_max]`

use mpqmc::driving::lfsr;

fn main() {
    let t_max: u32 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(8);
    for m in 10..=20 {
        let (p, gap) = lfsr::search(m, t_max, 4096);
        println!(
            "    LfsrParams {{ m: {}, poly: {:#x}, stride: {} }}, // gap {}",
            p.m, p.poly, p.stride, gap
        );
    }
}
