//! Exact star discrepancy for small point sets in one to three dimensions.
//!
//! Anchored boxes `[0, a)` only need upper corners drawn from the coordinate
//! grid of the points plus `1.0`. At each grid corner the open count (points
//! strictly inside) bounds `vol - count/n` and the closed count bounds
//! `count/n - vol`.

use thiserror::Error;

use crate::par;

/// Largest point count accepted per dimension.
pub const MAX_POINTS: [usize; 3] = [1 << 22, 1 << 16, 1024];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiscrepancyError {
    #[error("exact discrepancy limited to dim <= 3 and n <= {limit}, got dim {dim} with {n} points")]
    TooLarge { dim: usize, n: usize, limit: usize },
    #[error("coordinate {0} outside [0, 1)")]
    OutOfRange(f64),
    #[error("point set is empty")]
    Empty,
    #[error("sequence of length {len} too short for width {d}")]
    TooShort { len: usize, d: usize },
}

/// Points in `[0,1)^dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self, DiscrepancyError> {
        if dim == 0 || coords.is_empty() || !coords.len().is_multiple_of(dim) {
            return Err(DiscrepancyError::Empty);
        }
        if let Some(&bad) = coords.iter().find(|&&c| !(0.0..1.0).contains(&c)) {
            return Err(DiscrepancyError::OutOfRange(bad));
        }
        Ok(PointSet { dim, coords })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }
}

/// The `n - d + 1` overlapping windows of width `d`.
pub fn overlapping_tuples(seq: &[f64], d: usize) -> Result<PointSet, DiscrepancyError> {
    if d == 0 || seq.len() < d {
        return Err(DiscrepancyError::TooShort { len: seq.len(), d });
    }
    let coords = seq.windows(d).flatten().copied().collect();
    PointSet::new(d, coords)
}

/// The `floor(n / d)` consecutive disjoint blocks of width `d`.
pub fn nonoverlapping_tuples(seq: &[f64], d: usize) -> Result<PointSet, DiscrepancyError> {
    if d == 0 || seq.len() < d {
        return Err(DiscrepancyError::TooShort { len: seq.len(), d });
    }
    let coords = seq.chunks_exact(d).flatten().copied().collect();
    PointSet::new(d, coords)
}

/// Sorted distinct values plus the rank of every input.
fn ranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut grid: Vec<f64> = values.to_vec();
    grid.sort_by(|a, b| a.total_cmp(b));
    grid.dedup();
    let rank = values
        .iter()
        .map(|v| grid.partition_point(|g| g < v))
        .collect();
    (grid, rank)
}

/// Extremes over corners `(b, c)` of the 2-d slab with counts per y-rank:
/// returns `(max scale*b - open/n, max closed/n - scale*b)` where `b` ranges
/// over the y-grid and 1.
fn sweep_1d(counts: &[u32], grid: &[f64], scale: f64, inv_n: f64) -> (f64, f64) {
    let mut below = 0u32; // points with y-rank < k
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::NEG_INFINITY;
    for (k, &b) in grid.iter().enumerate() {
        hi = hi.max(scale * b - below as f64 * inv_n);
        below += counts[k];
        lo = lo.max(below as f64 * inv_n - scale * b);
    }
    hi = hi.max(scale - below as f64 * inv_n);
    lo = lo.max(below as f64 * inv_n - scale);
    (hi, lo)
}

fn d1(xs: &[f64]) -> f64 {
    let (grid, rank) = ranks(xs);
    let mut counts = vec![0u32; grid.len()];
    for r in rank {
        counts[r] += 1;
    }
    let (hi, lo) = sweep_1d(&counts, &grid, 1.0, 1.0 / xs.len() as f64);
    hi.max(lo)
}

/// Columns `x`, `y` given as ranks into their grids; `scale` multiplies volumes
/// (the third coordinate's corner in 3-d), `inv_n` normalizes counts.
fn d2_ranked(
    xr: &[usize],
    xg: &[f64],
    yr: &[usize],
    yg: &[f64],
    scale: f64,
    inv_n: f64,
    parallel: bool,
) -> f64 {
    // points bucketed by x-rank
    let mut by_x: Vec<Vec<usize>> = vec![Vec::new(); xg.len()];
    for (i, &r) in xr.iter().enumerate() {
        by_x[r].push(yr[i]);
    }
    let nx = xg.len();
    let chunk = if parallel { nx.div_ceil(64).max(64) } else { nx + 1 };
    let starts: Vec<usize> = (0..=nx).step_by(chunk).collect();
    let eval = |&start: &usize| -> f64 {
        let mut counts = vec![0u32; yg.len()];
        for bucket in &by_x[..start] {
            for &r in bucket {
                counts[r] += 1;
            }
        }
        let mut best = 0.0f64;
        let end = (start + chunk).min(nx + 1);
        for a_idx in start..end {
            let a = if a_idx < nx { xg[a_idx] } else { 1.0 };
            // open: x strictly below a
            let (hi, _) = sweep_1d(&counts, yg, scale * a, inv_n);
            best = best.max(hi);
            if a_idx < nx {
                for &r in &by_x[a_idx] {
                    counts[r] += 1;
                }
            }
            let (_, lo) = sweep_1d(&counts, yg, scale * a, inv_n);
            best = best.max(lo);
        }
        best
    };
    let parts = if parallel {
        par::map_slice(&starts, eval)
    } else {
        starts.iter().map(eval).collect()
    };
    parts.into_iter().fold(0.0, f64::max)
}

fn d2(ps: &PointSet) -> f64 {
    let xs: Vec<f64> = (0..ps.len()).map(|i| ps.point(i)[0]).collect();
    let ys: Vec<f64> = (0..ps.len()).map(|i| ps.point(i)[1]).collect();
    let (xg, xr) = ranks(&xs);
    let (yg, yr) = ranks(&ys);
    d2_ranked(&xr, &xg, &yr, &yg, 1.0, 1.0 / ps.len() as f64, true)
}

fn d3(ps: &PointSet) -> f64 {
    let n = ps.len();
    let col = |c: usize| (0..n).map(|i| ps.point(i)[c]).collect::<Vec<f64>>();
    let (zg, zr) = ranks(&col(2));
    let (xg, xr) = ranks(&col(0));
    let (yg, yr) = ranks(&col(1));
    let inv_n = 1.0 / n as f64;
    // For each z corner, the open (z < c) and closed (z <= c) subsets.
    let corners: Vec<usize> = (0..=zg.len()).collect();
    let parts = par::map_slice(&corners, |&k| {
        let c = if k < zg.len() { zg[k] } else { 1.0 };
        let pick = |closed: bool| -> (Vec<usize>, Vec<usize>) {
            (0..n)
                .filter(|&i| if closed { zr[i] <= k } else { zr[i] < k })
                .map(|i| (xr[i], yr[i]))
                .unzip()
        };
        // open subset: vol - count; closed subset: count - vol
        let (ox, oy) = pick(false);
        let open_best = signed_2d(&ox, &xg, &oy, &yg, c, inv_n, true);
        let (cx, cy) = pick(true);
        let closed_best = signed_2d(&cx, &xg, &cy, &yg, c, inv_n, false);
        open_best.max(closed_best)
    });
    parts.into_iter().fold(0.0, f64::max)
}

/// One-sided 2-d sweep used by the 3-d slicing: `upper` selects
/// `vol - open/n`, otherwise `closed/n - vol`.
fn signed_2d(
    xr: &[usize],
    xg: &[f64],
    yr: &[usize],
    yg: &[f64],
    scale: f64,
    inv_n: f64,
    upper: bool,
) -> f64 {
    let nx = xg.len();
    let mut by_x: Vec<Vec<usize>> = vec![Vec::new(); nx];
    for (i, &r) in xr.iter().enumerate() {
        by_x[r].push(yr[i]);
    }
    let mut counts = vec![0u32; yg.len()];
    let mut best = f64::NEG_INFINITY;
    for a_idx in 0..=nx {
        let a = if a_idx < nx { xg[a_idx] } else { 1.0 };
        if upper {
            best = best.max(sweep_1d(&counts, yg, scale * a, inv_n).0);
        }
        if a_idx < nx {
            for &r in &by_x[a_idx] {
                counts[r] += 1;
            }
        }
        if !upper {
            best = best.max(sweep_1d(&counts, yg, scale * a, inv_n).1);
        }
    }
    best
}

/// Exact star discrepancy.
pub fn star_discrepancy(ps: &PointSet) -> Result<f64, DiscrepancyError> {
    let (dim, n) = (ps.dim(), ps.len());
    if dim == 0 || dim > 3 || n > MAX_POINTS[dim - 1] {
        let limit = if (1..=3).contains(&dim) { MAX_POINTS[dim - 1] } else { 0 };
        return Err(DiscrepancyError::TooLarge { dim, n, limit });
    }
    let v = match dim {
        1 => d1(&ps.coords),
        2 => d2(ps),
        _ => d3(ps),
    };
    Ok(v.clamp(0.0, 1.0))
}

/// Reference implementation: every corner of the grid, counts by full scan.
/// Exponentially slower; for testing only.
pub fn star_discrepancy_brute_force(ps: &PointSet) -> f64 {
    let dim = ps.dim();
    let n = ps.len();
    let grids: Vec<Vec<f64>> = (0..dim)
        .map(|c| {
            let mut g: Vec<f64> = (0..n).map(|i| ps.point(i)[c]).collect();
            g.push(1.0);
            g.sort_by(|a, b| a.total_cmp(b));
            g.dedup();
            g
        })
        .collect();
    let mut idx = vec![0usize; dim];
    let mut best = 0.0f64;
    loop {
        let corner: Vec<f64> = (0..dim).map(|c| grids[c][idx[c]]).collect();
        let vol: f64 = corner.iter().product();
        let open = (0..n)
            .filter(|&i| ps.point(i).iter().zip(&corner).all(|(x, a)| x < a))
            .count();
        let closed = (0..n)
            .filter(|&i| ps.point(i).iter().zip(&corner).all(|(x, a)| x <= a))
            .count();
        best = best.max(vol - open as f64 / n as f64);
        best = best.max(closed as f64 / n as f64 - vol);
        let mut c = 0;
        loop {
            if c == dim {
                return best.clamp(0.0, 1.0);
            }
            idx[c] += 1;
            if idx[c] < grids[c].len() {
                break;
            }
            idx[c] = 0;
            c += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driving::UniformStream;

    fn ps(dim: usize, c: &[f64]) -> PointSet {
        PointSet::new(dim, c.to_vec()).unwrap()
    }

    #[test]
    fn single_midpoint() {
        assert_eq!(star_discrepancy(&ps(1, &[0.5])).unwrap(), 0.5);
    }

    #[test]
    fn two_quarter_points() {
        assert!((star_discrepancy(&ps(1, &[0.25, 0.75])).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn tuple_builders() {
        let o = overlapping_tuples(&[0.1, 0.2, 0.3], 2).unwrap();
        assert_eq!(o.len(), 2);
        assert_eq!(o.point(1), &[0.2, 0.3]);
        let n = nonoverlapping_tuples(&[0.1, 0.2, 0.3, 0.4, 0.5], 2).unwrap();
        assert_eq!(n.len(), 2);
        assert_eq!(n.point(1), &[0.3, 0.4]);
        assert_eq!(overlapping_tuples(&[0.1, 0.2], 1).unwrap().len(), 2);
        assert!(overlapping_tuples(&[0.1], 2).is_err());
    }

    #[test]
    fn rejects_out_of_range_and_too_large() {
        assert!(PointSet::new(1, vec![1.0]).is_err());
        let big = PointSet::new(3, vec![0.5; 3 * 1025]).unwrap();
        assert!(matches!(
            star_discrepancy(&big),
            Err(DiscrepancyError::TooLarge { .. })
        ));
        let four = PointSet::new(4, vec![0.5; 4]).unwrap();
        assert!(star_discrepancy(&four).is_err());
    }

    #[test]
    fn matches_brute_force_on_random_sets() {
        for dim in 1..=3 {
            for seed in 0..6 {
                let n = 5 + 7 * seed as usize;
                let u = UniformStream::pseudo_random(seed + 100 * dim as u64).prefix(n * dim);
                let p = ps(dim, &u);
                let fast = star_discrepancy(&p).unwrap();
                let slow = star_discrepancy_brute_force(&p);
                assert!((fast - slow).abs() < 1e-14, "dim {dim} seed {seed}: {fast} vs {slow}");
            }
        }
    }

    #[test]
    fn ties_are_handled() {
        let p = ps(2, &[0.5, 0.5, 0.5, 0.5, 0.0, 0.5, 0.5, 0.0]);
        assert!((star_discrepancy(&p).unwrap() - star_discrepancy_brute_force(&p)).abs() < 1e-15);
    }

    #[test]
    fn uniform_grid_bound() {
        for k in 2..8usize {
            let pts1: Vec<f64> = (0..k).map(|i| i as f64 / k as f64).collect();
            assert!(star_discrepancy(&ps(1, &pts1)).unwrap() <= 1.0 / k as f64 + 1e-15);
            let pts2: Vec<f64> = (0..k * k)
                .flat_map(|i| [(i / k) as f64 / k as f64, (i % k) as f64 / k as f64])
                .collect();
            assert!(star_discrepancy(&ps(2, &pts2)).unwrap() <= 2.0 / k as f64 + 1e-15);
        }
    }

    #[test]
    fn van_der_corput_pairs_miss_lower_square() {
        let v = UniformStream::van_der_corput(2).unwrap().prefix(100);
        let o = overlapping_tuples(&v, 2).unwrap();
        for i in 0..o.len() {
            let p = o.point(i);
            assert!(!(p[0] < 0.5 && p[1] < 0.5));
        }
        assert!(star_discrepancy(&o).unwrap() >= 0.25);
    }
}
