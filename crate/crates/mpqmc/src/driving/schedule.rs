use super::{DrivingError, UniformStream, NEAR_ZERO};

/// The width-`d` run-through schedule of a finite stream.
///
/// Tuple 0 is `d` copies of [`NEAR_ZERO`]. The remaining tuples are the `d`
/// cyclic shifts of the trimmed sequence `u_1..u_T` cut into blocks of `d`.
#[derive(Debug, Clone)]
pub struct TupleSchedule {
    stream: UniformStream,
    d: usize,
    trimmed: u64,
}

impl TupleSchedule {
    pub fn new(stream: UniformStream, d: usize) -> Result<Self, DrivingError> {
        let len = stream.len().ok_or(DrivingError::Unbounded)?;
        if d < 1 || d as u64 > len {
            return Err(DrivingError::InvalidWidth { d, len });
        }
        let trimmed = len / d as u64 * d as u64;
        Ok(TupleSchedule { stream, d, trimmed })
    }

    pub fn width(&self) -> usize {
        self.d
    }

    /// Trimmed length `T`.
    pub fn trimmed_len(&self) -> u64 {
        self.trimmed
    }

    /// Number of tuples including the prepended one.
    pub fn len(&self) -> usize {
        1 + self.trimmed as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn stream(&self) -> &UniformStream {
        &self.stream
    }

    /// Writes tuple `k` into `out` (length `d`).
    pub fn tuple_into(&self, k: usize, out: &mut [f64]) -> Result<(), DrivingError> {
        debug_assert_eq!(out.len(), self.d);
        if k >= self.len() {
            return Err(DrivingError::SequenceExhausted { len: self.len() as u64 });
        }
        if k == 0 {
            out.fill(NEAR_ZERO);
            return Ok(());
        }
        let d = self.d as u64;
        let per = self.trimmed / d;
        let j = (k - 1) as u64;
        let (r, p) = (j / per, j % per);
        for (c, v) in out.iter_mut().enumerate() {
            let idx = (r + p * d + c as u64) % self.trimmed;
            *v = self.stream.get(idx)?;
        }
        Ok(())
    }

    pub fn tuple(&self, k: usize) -> Result<Vec<f64>, DrivingError> {
        let mut v = vec![0.0; self.d];
        self.tuple_into(k, &mut v)?;
        Ok(v)
    }
}

/// Where a sampler pulls its per-iteration uniforms from.
#[derive(Debug, Clone)]
pub enum Driver {
    /// Consecutive values of a stream.
    Stream(UniformStream),
    /// One schedule tuple per request.
    Schedule { schedule: TupleSchedule, next: usize },
}

impl Driver {
    pub fn schedule(schedule: TupleSchedule) -> Self {
        Driver::Schedule { schedule, next: 0 }
    }

    /// Fills `out` with the next tuple.
    pub fn next_tuple(&mut self, out: &mut [f64]) -> Result<(), DrivingError> {
        match self {
            Driver::Stream(s) => s.fill(out),
            Driver::Schedule { schedule, next } => {
                if out.len() != schedule.width() {
                    return Err(DrivingError::InvalidWidth {
                        d: out.len(),
                        len: schedule.trimmed_len(),
                    });
                }
                schedule.tuple_into(*next, out)?;
                *next += 1;
                Ok(())
            }
        }
    }

    /// Scalars handed out so far.
    pub fn consumed(&self) -> u64 {
        match self {
            Driver::Stream(s) => s.cursor(),
            Driver::Schedule { schedule, next } => (*next * schedule.width()) as u64,
        }
    }

    /// Tuples of width `w` that can still be drawn, `None` when unbounded.
    pub fn remaining_tuples(&self, w: usize) -> Option<u64> {
        match self {
            Driver::Stream(s) => s.len().map(|l| (l - s.cursor()) / w as u64),
            Driver::Schedule { schedule, next } => {
                if w != schedule.width() {
                    Some(0)
                } else {
                    Some((schedule.len() - *next) as u64)
                }
            }
        }
    }
}
