//! Exact truncated Euclidean distance transform over a union of grid cubes.
//!
//! This is Meijster's separable three-pass transform (a 1D scan along x,
//! then lower envelopes of parabolas along y and z) with two changes:
//!
//! * every running distance is capped at `b + 1`, so values never exceed
//!   the truncation constant and the passes stay in small integers;
//! * the passes only visit runs of consecutive *work* cubes, where the work
//!   set is the active region grown by one cube.
//!
//! For a region voxel `v` whose nearest source `u` is closer than `b + 1`,
//! each intermediate point of the separable minimisation differs from `v` by
//! at most `b` along every axis. With cube edge `s >= b` those points lie
//! within one cube of `v`, so the one-cube margin is enough for the result to
//! equal the brute-force `min(b + 1, EDT)` exactly while the cost stays
//! linear in the number of active voxels.
//!
//! Distances are kept as squared integers; conversion to `f64` happens only
//! when the caller reads them.

use std::ops::Range;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::OccupancyGrid;
use crate::volume::Dims;

/// Squared truncated distances for the voxels of an active region.
///
/// Values outside the last region passed to [`TruncatedDistance::compute`]
/// are left as they were.
#[derive(Clone, Debug)]
pub struct TruncatedDistance {
    dims: Dims,
    band: u32,
    squared: Vec<u32>,
    scratch: Vec<u32>,
}

impl TruncatedDistance {
    pub fn new(dims: Dims, band: u32) -> Result<Self> {
        if band == 0 {
            return Err(Error::Config("band b must be at least 1".into()));
        }
        let cap = (band + 1) * (band + 1);
        Ok(TruncatedDistance {
            dims,
            band,
            squared: vec![cap; dims.len()],
            scratch: vec![0; dims.len()],
        })
    }

    pub fn band(&self) -> u32 {
        self.band
    }

    /// `(b + 1)^2`, the squared truncation constant.
    pub fn cap_squared(&self) -> u32 {
        (self.band + 1) * (self.band + 1)
    }

    #[inline]
    pub fn squared(&self, idx: usize) -> u32 {
        self.squared[idx]
    }

    #[inline]
    pub fn distance(&self, idx: usize) -> f64 {
        (self.squared[idx] as f64).sqrt()
    }

    /// Recomputes distances for every voxel covered by `region`.
    ///
    /// `sources[i]` marks DT sites; only sources inside the region count.
    pub fn compute(&mut self, sources: &[bool], region: &OccupancyGrid) -> Result<()> {
        let dims = self.dims;
        if sources.len() != dims.len() || region.voxel_dims() != dims {
            return Err(Error::Dimensions(format!(
                "distance transform over {dims} given {} sources and a grid for {}",
                sources.len(),
                region.voxel_dims()
            )));
        }
        let s = region.cube_edge();
        if s < self.band as usize {
            return Err(Error::Config(format!(
                "cube edge s = {s} must be at least the band b = {}",
                self.band
            )));
        }
        if region.count() == 0 {
            return Ok(());
        }
        let work = region.dilated();
        let band = self.band;
        let cap = self.cap_squared();

        // Passes 1 and 2 stay inside one z-slice.
        let slice_len = dims.slice_len();
        self.scratch
            .par_chunks_mut(slice_len)
            .enumerate()
            .for_each(|(z, slice)| {
                let cz = z / s;
                if !layer_has_cells(&work, cz) {
                    return;
                }
                scan_rows_x(slice, z, sources, region, &work, band);
                envelope_columns_y(slice, z, &work);
            });

        // Pass 3 reads finished slices and emits values for region voxels.
        let cells = work.cells();
        let scratch = &self.scratch;
        let columns: Vec<(usize, usize)> = (0..cells.ny)
            .flat_map(|cy| (0..cells.nx).map(move |cx| (cx, cy)))
            .filter(|&(cx, cy)| (0..cells.nz).any(|cz| work.get_xyz(cx, cy, cz)))
            .collect();
        let results: Vec<Vec<(usize, u32)>> = columns
            .par_iter()
            .map(|&(cx, cy)| envelope_column_z(scratch, dims, cx, cy, region, &work, cap))
            .collect();
        for column in results {
            for (idx, d) in column {
                self.squared[idx] = d;
            }
        }
        Ok(())
    }
}

/// One-shot transform returning a fresh distance map.
pub fn tedt_block_union(
    sources: &[bool],
    region: &OccupancyGrid,
    band: u32,
) -> Result<TruncatedDistance> {
    let mut out = TruncatedDistance::new(region.voxel_dims(), band)?;
    out.compute(sources, region)?;
    Ok(out)
}

fn layer_has_cells(grid: &OccupancyGrid, cz: usize) -> bool {
    let c = grid.cells();
    (0..c.ny).any(|cy| (0..c.nx).any(|cx| grid.get_xyz(cx, cy, cz)))
}

/// Maximal runs of consecutive set cells, in voxel coordinates along the axis.
fn runs(set: impl Iterator<Item = bool>, s: usize, extent: usize) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = None;
    let mut n = 0;
    for (i, on) in set.enumerate() {
        match (on, start) {
            (true, None) => start = Some(i),
            (false, Some(b)) => {
                out.push(b * s..(i * s).min(extent));
                start = None;
            }
            _ => {}
        }
        n = i + 1;
    }
    if let Some(b) = start {
        out.push(b * s..(n * s).min(extent));
    }
    out
}

/// Pass 1: capped 1D distance along x, stored unsquared.
fn scan_rows_x(
    slice: &mut [u32],
    z: usize,
    sources: &[bool],
    region: &OccupancyGrid,
    work: &OccupancyGrid,
    band: u32,
) {
    let dims = work.voxel_dims();
    let cells = work.cells();
    let s = work.cube_edge();
    let cz = z / s;
    let far = band + 1;
    for cy in 0..cells.ny {
        let row_runs = runs((0..cells.nx).map(|cx| work.get_xyz(cx, cy, cz)), s, dims.nx);
        if row_runs.is_empty() {
            continue;
        }
        for y in cy * s..((cy + 1) * s).min(dims.ny) {
            let row = &mut slice[y * dims.nx..(y + 1) * dims.nx];
            let base = dims.index(0, y, z);
            for run in &row_runs {
                let mut d = far;
                for x in run.clone() {
                    let src = sources[base + x] && region.get_xyz(x / s, cy, cz);
                    d = if src { 0 } else { (d + 1).min(far) };
                    row[x] = d;
                }
                d = far;
                for x in run.clone().rev() {
                    d = if row[x] == 0 { 0 } else { (d + 1).min(far) };
                    row[x] = row[x].min(d);
                }
            }
        }
    }
}

/// Pass 2: squares the pass-1 values and takes the parabola envelope along y.
fn envelope_columns_y(slice: &mut [u32], z: usize, work: &OccupancyGrid) {
    let dims = work.voxel_dims();
    let cells = work.cells();
    let s = work.cube_edge();
    let cz = z / s;
    let mut env = Envelope::default();
    let mut f = Vec::new();
    let mut out = Vec::new();
    for cx in 0..cells.nx {
        let col_runs = runs((0..cells.ny).map(|cy| work.get_xyz(cx, cy, cz)), s, dims.ny);
        for run in &col_runs {
            for x in cx * s..((cx + 1) * s).min(dims.nx) {
                f.clear();
                f.extend(run.clone().map(|y| {
                    let g = slice[y * dims.nx + x];
                    g * g
                }));
                out.resize(f.len(), 0);
                env.apply(&f, &mut out);
                for (y, &d) in run.clone().zip(out.iter()) {
                    slice[y * dims.nx + x] = d;
                }
            }
        }
    }
}

/// Pass 3: envelope along z for one column of cubes; returns region voxels only.
fn envelope_column_z(
    scratch: &[u32],
    dims: Dims,
    cx: usize,
    cy: usize,
    region: &OccupancyGrid,
    work: &OccupancyGrid,
    cap: u32,
) -> Vec<(usize, u32)> {
    let s = work.cube_edge();
    let cells = work.cells();
    let col_runs = runs((0..cells.nz).map(|cz| work.get_xyz(cx, cy, cz)), s, dims.nz);
    let mut env = Envelope::default();
    let mut f = Vec::new();
    let mut out = Vec::new();
    let mut emitted = Vec::new();
    for run in &col_runs {
        let wanted: Vec<bool> = run.clone().map(|z| region.get_xyz(cx, cy, z / s)).collect();
        if !wanted.iter().any(|&w| w) {
            continue;
        }
        for y in cy * s..((cy + 1) * s).min(dims.ny) {
            for x in cx * s..((cx + 1) * s).min(dims.nx) {
                f.clear();
                f.extend(run.clone().map(|z| scratch[dims.index(x, y, z)]));
                out.resize(f.len(), 0);
                env.apply(&f, &mut out);
                for (i, z) in run.clone().enumerate() {
                    if wanted[i] {
                        emitted.push((dims.index(x, y, z), out[i].min(cap)));
                    }
                }
            }
        }
    }
    emitted
}

/// Reusable stacks for Meijster's lower envelope of parabolas.
#[derive(Default)]
struct Envelope {
    sites: Vec<i64>,
    starts: Vec<i64>,
}

impl Envelope {
    /// `out[u] = min_i f[i] + (u - i)^2`, exactly, in O(n).
    fn apply(&mut self, f: &[u32], out: &mut [u32]) {
        let n = f.len() as i64;
        if n == 0 {
            return;
        }
        let fi = |i: i64| f[i as usize] as i64;
        let eval = |x: i64, i: i64| (x - i) * (x - i) + fi(i);
        // First u at which parabola u is no worse than parabola i (i < u).
        let sep = |i: i64, u: i64| (u * u - i * i + fi(u) - fi(i)).div_euclid(2 * (u - i));

        self.sites.clear();
        self.starts.clear();
        self.sites.push(0);
        self.starts.push(0);
        for u in 1..n {
            while let (Some(&sq), Some(&tq)) = (self.sites.last(), self.starts.last()) {
                if eval(tq, sq) > eval(tq, u) {
                    self.sites.pop();
                    self.starts.pop();
                } else {
                    break;
                }
            }
            match self.sites.last() {
                None => {
                    self.sites.push(u);
                    self.starts.push(0);
                }
                Some(&sq) => {
                    let w = 1 + sep(sq, u);
                    if w < n {
                        self.sites.push(u);
                        self.starts.push(w);
                    }
                }
            }
        }
        let mut q = self.sites.len() - 1;
        for u in (0..n).rev() {
            out[u as usize] = eval(u, self.sites[q]) as u32;
            if u == self.starts[q] && q > 0 {
                q -= 1;
            }
        }
    }
}
