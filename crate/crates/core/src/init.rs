//! Initial foreground from hand-marked slices.
//!
//! A user paints foreground over a few exported slices in red. Each marked
//! image is named `init_<axis>_<index>.png` (for example `init_z_120.png`),
//! which places it in the volume. Only pixels that are clearly red count:
//! `R >= 128`, `R >= 2G` and `R >= 2B`. Anti-aliased brush edges are then
//! tolerated, while unmodified grey pixels never qualify.

use std::collections::BTreeSet;
use std::path::Path;

use image::{Rgb, RgbImage};
use log::warn;

use crate::error::{Error, Result};
use crate::volume::{list_images, Volume, VoxelCoord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn parse(s: &str) -> Option<Axis> {
        match s {
            "x" | "X" => Some(Axis::X),
            "y" | "Y" => Some(Axis::Y),
            "z" | "Z" => Some(Axis::Z),
            _ => None,
        }
    }
}

/// Width and height of the cross-section perpendicular to `axis`.
///
/// A Z slice is indexed by `(x, y)`, a Y slice by `(x, z)` and an X slice by
/// `(y, z)`.
pub fn cross_section(vol: &Volume, axis: Axis) -> (usize, usize) {
    let d = vol.dims();
    match axis {
        Axis::X => (d.ny, d.nz),
        Axis::Y => (d.nx, d.nz),
        Axis::Z => (d.nx, d.ny),
    }
}

fn axis_len(vol: &Volume, axis: Axis) -> usize {
    let d = vol.dims();
    match axis {
        Axis::X => d.nx,
        Axis::Y => d.ny,
        Axis::Z => d.nz,
    }
}

/// Voxel hit by pixel `(u, v)` of slice `index` along `axis`.
pub fn slice_to_voxel(axis: Axis, index: usize, u: usize, v: usize) -> VoxelCoord {
    match axis {
        Axis::X => VoxelCoord::new(index, u, v),
        Axis::Y => VoxelCoord::new(u, index, v),
        Axis::Z => VoxelCoord::new(u, v, index),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarkedSlice {
    pub axis: Axis,
    pub index: usize,
    pub width: usize,
    pub height: usize,
    /// Row-major, `width * height`.
    pub mask: Vec<bool>,
}

impl MarkedSlice {
    pub fn marked(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| (i % self.width, i / self.width))
    }
}

#[inline]
pub fn is_marked_pixel(p: Rgb<u8>) -> bool {
    let [r, g, b] = p.0.map(u16::from);
    r >= 128 && r >= 2 * g && r >= 2 * b
}

/// Extracts the marks of an edited slice.
///
/// `original` is the size of the unedited slice the user painted on.
pub fn parse_marked_slice(marked: &RgbImage, original: (usize, usize)) -> Result<Vec<bool>> {
    let (w, h) = (marked.width() as usize, marked.height() as usize);
    if (w, h) != original {
        return Err(Error::Dimensions(format!(
            "marked slice is {w}x{h} but the original slice is {}x{}",
            original.0, original.1
        )));
    }
    Ok(marked.pixels().map(|&p| is_marked_pixel(p)).collect())
}

/// Parses a marked image and ties it to a slice position in `vol`.
pub fn marked_slice(
    marked: &RgbImage,
    axis: Axis,
    index: usize,
    vol: &Volume,
) -> Result<MarkedSlice> {
    if index >= axis_len(vol, axis) {
        return Err(Error::Dimensions(format!(
            "slice index {index} out of range along {axis:?}"
        )));
    }
    let (width, height) = cross_section(vol, axis);
    let mask = parse_marked_slice(marked, (width, height))?;
    Ok(MarkedSlice {
        axis,
        index,
        width,
        height,
        mask,
    })
}

/// Splits `init_<axis>_<index>.png` into its axis and index.
pub fn parse_init_name(name: &str) -> Option<(Axis, usize)> {
    let stem = name.strip_suffix(".png").or_else(|| name.strip_suffix(".PNG"))?;
    let rest = stem.strip_prefix("init_")?;
    let (axis, index) = rest.split_once('_')?;
    Some((Axis::parse(axis)?, index.parse().ok()?))
}

/// Reads every `init_<axis>_<index>.png` in `dir`.
pub fn load_init_dir(dir: impl AsRef<Path>, vol: &Volume) -> Result<Vec<MarkedSlice>> {
    let dir = dir.as_ref();
    let mut slices = Vec::new();
    for path in list_images(dir)? {
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default();
        let Some((axis, index)) = parse_init_name(name) else {
            warn!("ignoring {}: not named init_<axis>_<index>.png", path.display());
            continue;
        };
        let img = image::open(&path)
            .map_err(|source| Error::Image {
                path: path.clone(),
                source,
            })?
            .into_rgb8();
        let slice = marked_slice(&img, axis, index, vol).map_err(|e| Error::SliceMismatch {
            path: path.clone(),
            detail: e.to_string(),
        })?;
        slices.push(slice);
    }
    Ok(slices)
}

/// Greylevel conditions a seed must meet.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedGate {
    pub min_grey: u16,
    pub root_band: (u16, u16),
}

impl SeedGate {
    pub fn accepts(&self, g: u16) -> bool {
        g >= self.min_grey && g >= self.root_band.0 && g <= self.root_band.1
    }
}

/// The initial foreground set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Seeds {
    /// Linear voxel indices, ascending and unique.
    pub voxels: Vec<usize>,
    /// Marked voxels removed by the greylevel gate.
    pub dropped: usize,
}

/// Union of all marks as voxel indices, with gated voxels dropped.
pub fn embed_marks(slices: &[MarkedSlice], vol: &Volume, gate: SeedGate) -> Result<Seeds> {
    let dims = vol.dims();
    let mut all = BTreeSet::new();
    for s in slices {
        if s.index >= axis_len(vol, s.axis) || (s.width, s.height) != cross_section(vol, s.axis) {
            return Err(Error::Dimensions(format!(
                "marked {:?} slice {} does not fit volume {dims}",
                s.axis, s.index
            )));
        }
        for (u, v) in s.marked() {
            let c = slice_to_voxel(s.axis, s.index, u, v);
            all.insert(dims.index(c.x, c.y, c.z));
        }
    }
    let total = all.len();
    let voxels: Vec<usize> = all.into_iter().filter(|&i| gate.accepts(vol.at(i))).collect();
    let dropped = total - voxels.len();
    if dropped > 0 {
        warn!("{dropped} marked voxels fail the greylevel gate and were dropped");
    }
    if voxels.is_empty() {
        return Err(Error::NoInitVoxels);
    }
    Ok(Seeds { voxels, dropped })
}
