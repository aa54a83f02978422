//! Tausworthe-style linear feedback shift register over GF(2).
//!
//! The register holds `m` consecutive bits of an m-sequence generated by a
//! primitive polynomial. Reading the register as an m-bit fraction and skipping
//! `stride` steps between outputs visits every non-zero state exactly once per
//! period, so the emitted values are exactly `{k / 2^m : 1 <= k < 2^m}` in a
//! scrambled order. None of them is 0 or 1.

/// One entry of the register table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LfsrParams {
    /// Register size.
    pub m: u32,
    /// Characteristic polynomial, bit `k` is the coefficient of `x^k` (bit `m` set).
    pub poly: u64,
    /// Register steps between two emitted values, coprime to `2^m - 1`.
    pub stride: u64,
}

/// Embedded table, one entry per register size 10..=20.
///
/// Produced by `cargo run --release --example lfsr_search`. Primitive
/// polynomials are scanned in increasing numeric order and, for each, strides
/// `m..4m` coprime to the period; the first pair whose overlapping `t`-tuples,
/// `t = 2..=8`, reach resolution `floor(m/t)` is kept.
pub const TABLE: [LfsrParams; 11] = [
    LfsrParams { m: 10, poly: 0x409, stride: 16 },
    LfsrParams { m: 11, poly: 0x805, stride: 14 },
    LfsrParams { m: 12, poly: 0x107b, stride: 41 },
    LfsrParams { m: 13, poly: 0x201b, stride: 15 },
    LfsrParams { m: 14, poly: 0x402b, stride: 16 },
    LfsrParams { m: 15, poly: 0x8003, stride: 38 },
    LfsrParams { m: 16, poly: 0x1003f, stride: 29 },
    LfsrParams { m: 17, poly: 0x20009, stride: 26 },
    LfsrParams { m: 18, poly: 0x40027, stride: 50 },
    LfsrParams { m: 19, poly: 0x80027, stride: 27 },
    LfsrParams { m: 20, poly: 0x100065, stride: 49 },
];

/// Looks up the table entry for register size `m`.
pub fn params_for(m: u32) -> Option<LfsrParams> {
    TABLE.iter().copied().find(|p| p.m == m)
}

fn degree(p: u64) -> u32 {
    63 - p.leading_zeros()
}

fn mulmod(a: u64, b: u64, p: u64) -> u64 {
    let m = degree(p);
    let top = 1u64 << m;
    let mut a = a;
    let mut b = b;
    let mut r = 0u64;
    while b != 0 {
        if b & 1 == 1 {
            r ^= a;
        }
        b >>= 1;
        a <<= 1;
        if a & top != 0 {
            a ^= p;
        }
    }
    r
}

fn powmod_x(e: u64, p: u64) -> u64 {
    let mut base = 2u64; // the polynomial x
    let mut acc = 1u64;
    let mut e = e;
    while e > 0 {
        if e & 1 == 1 {
            acc = mulmod(acc, base, p);
        }
        base = mulmod(base, base, p);
        e >>= 1;
    }
    acc
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut q = 2u64;
    while q * q <= n {
        if n.is_multiple_of(q) {
            out.push(q);
            while n.is_multiple_of(q) {
                n /= q;
            }
        }
        q += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Whether `p` (degree 2..=32) is primitive over GF(2): `x` has order `2^m - 1`.
pub fn is_primitive(p: u64) -> bool {
    if p & 1 == 0 || p < 4 {
        return false;
    }
    let m = degree(p);
    if m > 32 {
        return false;
    }
    let order = (1u64 << m) - 1;
    if powmod_x(order, p) != 1 {
        return false;
    }
    prime_factors(order)
        .into_iter()
        .all(|q| powmod_x(order / q, p) != 1)
}

fn tap_mask(params: &LfsrParams) -> u64 {
    let m = params.m;
    (0..m)
        .filter(|k| params.poly >> k & 1 == 1)
        .fold(0u64, |acc, k| acc | 1u64 << (m - 1 - k))
}

#[inline]
fn step(state: u64, taps: u64, mask: u64) -> u64 {
    let bit = (state & taps).count_ones() as u64 & 1;
    ((state << 1) | bit) & mask
}

/// Register states in emission order, starting from the all-ones-at-bottom state `1`.
pub fn states(params: &LfsrParams) -> Vec<u32> {
    let m = params.m;
    let len = (1usize << m) - 1;
    let mask = (1u64 << m) - 1;
    let taps = tap_mask(params);
    let mut s = 1u64;
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(s as u32);
        for _ in 0..params.stride {
            s = step(s, taps, mask);
        }
    }
    out
}

fn gf2_rank(mut vecs: Vec<u64>) -> u32 {
    let mut rank = 0;
    let mut row = 0usize;
    for bit in (0..64).rev() {
        let Some(pivot) = (row..vecs.len()).find(|&i| vecs[i] >> bit & 1 == 1) else {
            continue;
        };
        vecs.swap(row, pivot);
        let pv = vecs[row];
        for (i, v) in vecs.iter_mut().enumerate() {
            if i != row && *v >> bit & 1 == 1 {
                *v ^= pv;
            }
        }
        row += 1;
        rank += 1;
    }
    rank
}

/// Largest `l` such that the top `l` bits of `t` successive outputs are
/// equidistributed over a full period.
pub fn resolution(params: &LfsrParams, t: u32) -> u32 {
    let m = params.m;
    let mask = (1u64 << m) - 1;
    let taps = tap_mask(params);
    // Output j bits for each basis start state.
    let traces: Vec<Vec<u64>> = (0..m)
        .map(|b| {
            let mut s = 1u64 << b;
            let mut outs = Vec::with_capacity(t as usize);
            for j in 0..t {
                if j > 0 {
                    for _ in 0..params.stride {
                        s = step(s, taps, mask);
                    }
                }
                outs.push(s);
            }
            outs
        })
        .collect();
    for l in (1..=m / t).rev() {
        let cols: Vec<u64> = traces
            .iter()
            .map(|outs| {
                outs.iter()
                    .fold(0u64, |acc, &s| (acc << l) | (s >> (m - l)))
            })
            .collect();
        if gf2_rank(cols) == t * l {
            return l;
        }
    }
    0
}

/// Sum over `t = 2..=t_max` of `floor(m/t) - resolution`.
pub fn equidistribution_gap(params: &LfsrParams, t_max: u32) -> u32 {
    (2..=t_max.min(params.m))
        .map(|t| params.m / t - resolution(params, t))
        .sum()
}

/// Scans primitive polynomials and strides for the smallest equidistribution gap.
pub fn search(m: u32, t_max: u32, max_polys: usize) -> (LfsrParams, u32) {
    let period = (1u64 << m) - 1;
    let mut best: Option<(LfsrParams, u32)> = None;
    let mut seen = 0usize;
    let mut low = 1u64;
    while low < 1u64 << m && seen < max_polys {
        let poly = (1u64 << m) | low;
        low += 2;
        if !is_primitive(poly) {
            continue;
        }
        seen += 1;
        for stride in m as u64..(4 * m as u64) {
            if gcd(stride, period) != 1 {
                continue;
            }
            let p = LfsrParams { m, poly, stride };
            let gap = equidistribution_gap(&p, t_max);
            if best.as_ref().is_none_or(|(_, g)| gap < *g) {
                best = Some((p, gap));
            }
            if gap == 0 {
                return (p, 0);
            }
        }
    }
    best.expect("no primitive polynomial of this degree")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_primitive_polynomials() {
        // x^4 + x + 1 is primitive, x^4 + x^3 + x^2 + x + 1 is irreducible but not.
        assert!(is_primitive(0b10011));
        assert!(!is_primitive(0b11111));
        assert!(!is_primitive(0b10101));
    }

    #[test]
    fn full_period_small_register() {
        let p = LfsrParams { m: 4, poly: 0b10011, stride: 1 };
        let mut s = states(&p);
        assert_eq!(s.len(), 15);
        s.sort_unstable();
        assert_eq!(s, (1..16).collect::<Vec<u32>>());
    }

    #[test]
    fn table_entries_are_primitive_with_coprime_stride() {
        for p in TABLE {
            assert_eq!(degree(p.poly), p.m);
            assert!(is_primitive(p.poly), "m={}", p.m);
            assert_eq!(gcd(p.stride, (1u64 << p.m) - 1), 1);
        }
    }

    #[test]
    fn table_entries_are_maximally_equidistributed() {
        for p in TABLE {
            assert_eq!(equidistribution_gap(&p, 8), 0, "m={}", p.m);
        }
    }

    #[test]
    fn states_cover_all_nonzero_values() {
        let p = params_for(10).unwrap();
        let mut s = states(&p);
        s.sort_unstable();
        assert_eq!(s, (1..1024).collect::<Vec<u32>>());
    }

    #[test]
    fn pairs_are_equidistributed_on_coarse_grid() {
        // 2-tuples at resolution floor(m/2): every cell except (0,0) hit 2^(m-2l)... times.
        let p = params_for(10).unwrap();
        let s = states(&p);
        let l = 5;
        let mut counts = vec![0u32; 1 << (2 * l)];
        let n = s.len();
        for i in 0..n {
            let a = s[i] >> (10 - l);
            let b = s[(i + 1) % n] >> (10 - l);
            counts[((a << l) | b) as usize] += 1;
        }
        assert_eq!(counts[0], 0);
        assert!(counts[1..].iter().all(|&c| c == 1));
    }
}
