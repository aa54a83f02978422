//! Driving sequences: seeded pseudo-random streams, LFSR-based CUD sequences
//! with the run-through tuple schedule, and Van der Corput as a negative control.

pub mod lfsr;
mod schedule;

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use schedule::{Driver, TupleSchedule};

/// Value of every coordinate of the prepended first tuple.
pub const NEAR_ZERO: f64 = 1.0 / 4_294_967_296.0;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DrivingError {
    #[error("sequence exhausted after {len} values")]
    SequenceExhausted { len: u64 },
    #[error("no register table entry for m = {0} (supported: 10..=20)")]
    UnsupportedRegisterSize(u32),
    #[error("tuple width {d} invalid for trimmed length {len}")]
    InvalidWidth { d: usize, len: u64 },
    #[error("Van der Corput base must be at least 2, got {0}")]
    InvalidBase(u32),
    #[error("tuple schedules need a finite stream")]
    Unbounded,
}

/// Kind of a uniform stream plus its construction parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StreamKind {
    PseudoRandom,
    CudLfsr { m: u32 },
    VanDerCorput { base: u32 },
}

impl StreamKind {
    pub fn label(&self) -> String {
        match self {
            StreamKind::PseudoRandom => "pseudo_random".into(),
            StreamKind::CudLfsr { m } => format!("cud_lfsr_m{m}"),
            StreamKind::VanDerCorput { base } => format!("van_der_corput_b{base}"),
        }
    }

    pub fn is_cud(&self) -> bool {
        matches!(self, StreamKind::CudLfsr { .. })
    }
}

#[derive(Clone)]
enum Source {
    Prng { key: u64 },
    Lfsr { states: Arc<[u32]>, scale: f64, offset: usize },
    Vdc { base: u32 },
}

/// A deterministic stream of values in the open unit interval.
#[derive(Clone)]
pub struct UniformStream {
    kind: StreamKind,
    seed: u64,
    cursor: u64,
    source: Source,
}

impl std::fmt::Debug for UniformStream {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("UniformStream")
            .field("kind", &self.kind)
            .field("seed", &self.seed)
            .field("cursor", &self.cursor)
            .finish()
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Maps 64 random bits to the midpoint of one of 2^52 equal cells of (0,1).
#[inline]
pub fn bits_to_open_unit(x: u64) -> f64 {
    ((x >> 12) as f64 + 0.5) * (1.0 / 4_503_599_627_370_496.0)
}

fn radical_inverse(mut k: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut r = 0.0;
    while k > 0 {
        r += (k % b) as f64 * scale;
        k /= b;
        scale *= inv;
    }
    r
}

fn lfsr_states(m: u32) -> Result<Arc<[u32]>, DrivingError> {
    static CACHE: [OnceLock<Arc<[u32]>>; 11] = [const { OnceLock::new() }; 11];
    let params = lfsr::params_for(m).ok_or(DrivingError::UnsupportedRegisterSize(m))?;
    let slot = &CACHE[(m - 10) as usize];
    Ok(slot.get_or_init(|| lfsr::states(&params).into()).clone())
}

impl UniformStream {
    /// Counter-based SplitMix64 stream: value `k` is a pure function of `(seed, k)`.
    pub fn pseudo_random(seed: u64) -> Self {
        UniformStream {
            kind: StreamKind::PseudoRandom,
            seed,
            cursor: 0,
            source: Source::Prng { key: mix64(seed ^ 0x6A09_E667_F3BC_C909) },
        }
    }

    /// Full-period LFSR sequence of length `2^m - 1`; the seed picks the starting state.
    pub fn lfsr(m: u32, seed: u64) -> Result<Self, DrivingError> {
        let states = lfsr_states(m)?;
        let offset = (seed % states.len() as u64) as usize;
        Ok(UniformStream {
            kind: StreamKind::CudLfsr { m },
            seed,
            cursor: 0,
            source: Source::Lfsr { states, scale: 1.0 / (1u64 << m) as f64, offset },
        })
    }

    /// Radical-inverse sequence of `1, 2, 3, ...`. The seed is ignored.
    pub fn van_der_corput(base: u32) -> Result<Self, DrivingError> {
        if base < 2 {
            return Err(DrivingError::InvalidBase(base));
        }
        Ok(UniformStream {
            kind: StreamKind::VanDerCorput { base },
            seed: 0,
            cursor: 0,
            source: Source::Vdc { base },
        })
    }

    pub fn new(kind: StreamKind, seed: u64) -> Result<Self, DrivingError> {
        match kind {
            StreamKind::PseudoRandom => Ok(Self::pseudo_random(seed)),
            StreamKind::CudLfsr { m } => Self::lfsr(m, seed),
            StreamKind::VanDerCorput { base } => Self::van_der_corput(base),
        }
    }

    pub fn kind(&self) -> StreamKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn cursor(&self) -> u64 {
        self.cursor
    }

    /// Total length for finite kinds.
    pub fn len(&self) -> Option<u64> {
        match &self.source {
            Source::Lfsr { states, .. } => Some(states.len() as u64),
            _ => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }

    /// Element `i` without moving the cursor.
    pub fn get(&self, i: u64) -> Result<f64, DrivingError> {
        match &self.source {
            Source::Prng { key } => {
                Ok(bits_to_open_unit(mix64(key.wrapping_add((i + 1).wrapping_mul(GOLDEN)))))
            }
            Source::Lfsr { states, scale, offset } => {
                let n = states.len();
                if i >= n as u64 {
                    return Err(DrivingError::SequenceExhausted { len: n as u64 });
                }
                Ok(states[(i as usize + offset) % n] as f64 * scale)
            }
            Source::Vdc { base } => Ok(radical_inverse(i + 1, *base)),
        }
    }

    pub fn next_uniform(&mut self) -> Result<f64, DrivingError> {
        let v = self.get(self.cursor)?;
        self.cursor += 1;
        Ok(v)
    }

    /// Fills `out` with the next `out.len()` values.
    pub fn fill(&mut self, out: &mut [f64]) -> Result<(), DrivingError> {
        if let Some(len) = self.len() {
            if self.cursor + out.len() as u64 > len {
                return Err(DrivingError::SequenceExhausted { len });
            }
        }
        for v in out.iter_mut() {
            *v = self.next_uniform()?;
        }
        Ok(())
    }

    /// Collects the first `n` values (or fewer for a shorter finite stream).
    pub fn prefix(&self, n: usize) -> Vec<f64> {
        let n = self.len().map_or(n, |l| n.min(l as usize));
        (0..n as u64).map(|i| self.get(i).expect("index in range")).collect()
    }
}

impl Iterator for UniformStream {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        self.next_uniform().ok()
    }
}

/// Builds the CUD stream for register size `m` with the default start state.
pub fn build_lfsr_cud(m: u32) -> Result<UniformStream, DrivingError> {
    UniformStream::lfsr(m, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn van_der_corput_base_two() {
        let v = UniformStream::van_der_corput(2).unwrap().prefix(3);
        assert_eq!(v, vec![0.5, 0.25, 0.75]);
        let v3 = UniformStream::van_der_corput(3).unwrap().prefix(4);
        assert_eq!(v3[0], 1.0 / 3.0);
        assert_eq!(v3[2], 1.0 / 9.0);
        assert_eq!(v3[3], 1.0 / 3.0 + 1.0 / 9.0);
        assert!(UniformStream::van_der_corput(1).is_err());
    }

    #[test]
    fn lfsr_length_and_open_interval() {
        let mut s = build_lfsr_cud(10).unwrap();
        assert_eq!(s.len(), Some(1023));
        let mut count = 0;
        while let Ok(v) = s.next_uniform() {
            assert!(v > 0.0 && v < 1.0);
            count += 1;
        }
        assert_eq!(count, 1023);
        assert_eq!(
            s.next_uniform(),
            Err(DrivingError::SequenceExhausted { len: 1023 })
        );
    }

    #[test]
    fn lfsr_values_are_the_dyadic_grid() {
        let s = build_lfsr_cud(10).unwrap();
        let mut k: Vec<u32> = s.prefix(2000).iter().map(|v| (v * 1024.0) as u32).collect();
        k.sort_unstable();
        assert_eq!(k, (1..1024).collect::<Vec<_>>());
    }

    #[test]
    fn unsupported_register_sizes() {
        assert_eq!(
            build_lfsr_cud(9).unwrap_err(),
            DrivingError::UnsupportedRegisterSize(9)
        );
        assert!(build_lfsr_cud(21).is_err());
        for m in 10..=20 {
            assert_eq!(build_lfsr_cud(m).unwrap().len(), Some((1 << m) - 1));
        }
    }

    #[test]
    fn seed_rotates_the_lfsr() {
        let a = UniformStream::lfsr(10, 0).unwrap().prefix(1023);
        let b = UniformStream::lfsr(10, 5).unwrap().prefix(1023);
        assert_eq!(&a[5..], &b[..1018]);
        let c = UniformStream::lfsr(10, 1023 + 5).unwrap().prefix(1023);
        assert_eq!(b, c);
    }

    #[test]
    fn pseudo_random_is_deterministic_and_open() {
        let a = UniformStream::pseudo_random(42).prefix(10_000);
        let b = UniformStream::pseudo_random(42).prefix(10_000);
        let c = UniformStream::pseudo_random(43).prefix(10_000);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.iter().all(|&v| v > 0.0 && v < 1.0));
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        assert!((mean - 0.5).abs() < 0.01);
    }

    #[test]
    fn extreme_bits_stay_inside() {
        assert!(bits_to_open_unit(0) > 0.0);
        assert!(bits_to_open_unit(u64::MAX) < 1.0);
    }

    #[test]
    fn clone_at_cursor_continues_identically() {
        let mut s = UniformStream::pseudo_random(7);
        for _ in 0..5 {
            s.next_uniform().unwrap();
        }
        let mut t = s.clone();
        assert_eq!(s.next_uniform(), t.next_uniform());
        assert_eq!(t.cursor(), 6);
    }
}
