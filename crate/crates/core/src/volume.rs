//! Dense greylevel volumes, binary masks and their on-disk forms.
//!
//! Voxels are stored x-fastest, then y, then z, so one z-slice is a
//! contiguous run of `nx * ny` samples. Greylevels are kept at their native
//! bit depth in a `u16` buffer.

use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage};

use crate::error::{Error, Result};

/// Voxel counts along x, y and z.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub const fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Dims { nx, ny, nz }
    }

    pub const fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn slice_len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub const fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    #[inline]
    pub const fn coords(&self, idx: usize) -> [usize; 3] {
        let x = idx % self.nx;
        let yz = idx / self.nx;
        [x, yz % self.ny, yz / self.ny]
    }

    pub const fn contains(&self, x: i64, y: i64, z: i64) -> bool {
        x >= 0
            && y >= 0
            && z >= 0
            && (x as usize) < self.nx
            && (y as usize) < self.ny
            && (z as usize) < self.nz
    }

    pub const fn as_array(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.nx, self.ny, self.nz)
    }
}

/// A voxel position inside a volume.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VoxelCoord {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl VoxelCoord {
    pub const fn new(x: usize, y: usize, z: usize) -> Self {
        VoxelCoord { x, y, z }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn from_bits(bits: u32) -> Result<Self> {
        match bits {
            8 => Ok(BitDepth::Eight),
            16 => Ok(BitDepth::Sixteen),
            other => Err(Error::BitDepth(other)),
        }
    }

    pub const fn bits(self) -> u32 {
        match self {
            BitDepth::Eight => 8,
            BitDepth::Sixteen => 16,
        }
    }

    pub const fn max_value(self) -> u16 {
        match self {
            BitDepth::Eight => u8::MAX as u16,
            BitDepth::Sixteen => u16::MAX,
        }
    }

    /// Number of distinct greylevels, i.e. histogram bins.
    pub const fn levels(self) -> usize {
        self.max_value() as usize + 1
    }

    const fn bytes(self) -> usize {
        (self.bits() / 8) as usize
    }
}

/// Immutable greylevel volume.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume {
    dims: Dims,
    depth: BitDepth,
    /// Physical voxel edge in micrometres. Metadata only: every algorithm
    /// works in voxel units.
    pitch_um: Option<f64>,
    data: Vec<u16>,
}

impl Volume {
    pub fn new(dims: Dims, depth: BitDepth, data: Vec<u16>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::Dimensions(format!(
                "volume {dims} needs {} samples, got {}",
                dims.len(),
                data.len()
            )));
        }
        let max = depth.max_value();
        if let Some(bad) = data.iter().position(|&g| g > max) {
            return Err(Error::Dimensions(format!(
                "sample {bad} has greylevel {} above the {}-bit range",
                data[bad],
                depth.bits()
            )));
        }
        Ok(Volume {
            dims,
            depth,
            pitch_um: None,
            data,
        })
    }

    pub fn with_pitch(mut self, pitch_um: f64) -> Self {
        self.pitch_um = Some(pitch_um);
        self
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn depth(&self) -> BitDepth {
        self.depth
    }

    pub fn pitch_um(&self) -> Option<f64> {
        self.pitch_um
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> u16 {
        self.data[self.dims.index(x, y, z)]
    }

    #[inline]
    pub fn at(&self, idx: usize) -> u16 {
        self.data[idx]
    }

    /// One z-slice as a contiguous row-major slice.
    pub fn slice_z(&self, z: usize) -> &[u16] {
        let n = self.dims.slice_len();
        &self.data[z * n..(z + 1) * n]
    }

    /// Headerless little-endian serialization at the native bit depth.
    pub fn to_raw_bytes(&self) -> Vec<u8> {
        match self.depth {
            BitDepth::Eight => self.data.iter().map(|&g| g as u8).collect(),
            BitDepth::Sixteen => self.data.iter().flat_map(|g| g.to_le_bytes()).collect(),
        }
    }

    pub fn from_raw_bytes(bytes: &[u8], dims: Dims, depth: BitDepth) -> Result<Self> {
        let expected = (dims.len() * depth.bytes()) as u64;
        if bytes.len() as u64 != expected {
            return Err(Error::RawSize {
                expected,
                actual: bytes.len() as u64,
            });
        }
        let data = match depth {
            BitDepth::Eight => bytes.iter().map(|&b| b as u16).collect(),
            BitDepth::Sixteen => bytes
                .chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]))
                .collect(),
        };
        Volume::new(dims, depth, data)
    }
}

/// Loads a headerless little-endian volume.
pub fn load_raw(path: impl AsRef<Path>, dims: Dims, depth: BitDepth) -> Result<Volume> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Volume::from_raw_bytes(&bytes, dims, depth)
}

fn is_slice_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "tif" | "tiff"))
        .unwrap_or(false)
}

/// Lists the slice images of a directory in alphabetical order.
pub(crate) fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && is_slice_image(&path) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Loads an alphabetically ordered stack of single-channel 8- or 16-bit
/// images. Image `i` becomes the slice `z = i`.
pub fn load_slice_stack(dir: impl AsRef<Path>) -> Result<Volume> {
    let dir = dir.as_ref();
    let files = list_images(dir)?;
    if files.is_empty() {
        return Err(Error::EmptyStack(dir.to_path_buf()));
    }

    let mut layout: Option<(u32, u32, BitDepth)> = None;
    let mut data = Vec::new();
    for path in &files {
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.clone(),
            source,
        })?;
        let (w, h, depth, samples): (u32, u32, BitDepth, Vec<u16>) = match img {
            DynamicImage::ImageLuma8(buf) => (
                buf.width(),
                buf.height(),
                BitDepth::Eight,
                buf.into_raw().into_iter().map(u16::from).collect(),
            ),
            DynamicImage::ImageLuma16(buf) => {
                (buf.width(), buf.height(), BitDepth::Sixteen, buf.into_raw())
            }
            other => {
                return Err(Error::SliceMismatch {
                    path: path.clone(),
                    detail: format!(
                        "expected a single-channel 8- or 16-bit image, found {:?}",
                        other.color()
                    ),
                })
            }
        };
        match layout {
            None => layout = Some((w, h, depth)),
            Some((w0, h0, d0)) => {
                if (w, h) != (w0, h0) {
                    return Err(Error::SliceMismatch {
                        path: path.clone(),
                        detail: format!("slice is {w}x{h}, expected {w0}x{h0}"),
                    });
                }
                if depth != d0 {
                    return Err(Error::SliceMismatch {
                        path: path.clone(),
                        detail: format!(
                            "slice is {}-bit, expected {}-bit",
                            depth.bits(),
                            d0.bits()
                        ),
                    });
                }
            }
        }
        data.extend(samples);
    }
    let (w, h, depth) = layout.expect("at least one slice");
    Volume::new(Dims::new(w as usize, h as usize, files.len()), depth, data)
}

/// Per-voxel boolean field with the same layout as [`Volume`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    dims: Dims,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(dims: Dims) -> Self {
        Mask {
            dims,
            data: vec![false; dims.len()],
        }
    }

    pub fn from_vec(dims: Dims, data: Vec<bool>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::Dimensions(format!(
                "mask {dims} needs {} voxels, got {}",
                dims.len(),
                data.len()
            )));
        }
        Ok(Mask { dims, data })
    }

    /// Foreground wherever the volume is non-zero.
    pub fn from_nonzero(vol: &Volume) -> Self {
        Mask {
            dims: vol.dims(),
            data: vol.data().iter().map(|&g| g != 0).collect(),
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [bool] {
        &mut self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.data[self.dims.index(x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, value: bool) {
        let i = self.dims.index(x, y, z);
        self.data[i] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn into_vec(self) -> Vec<bool> {
        self.data
    }
}

/// Writes one 8-bit PNG per z-slice (`mask_00000.png`, ...), 255 for
/// foreground and 0 for background.
pub fn write_mask_stack(mask: &Mask, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let dims = mask.dims();
    let n = dims.slice_len();
    for z in 0..dims.nz {
        let pixels = mask.data[z * n..(z + 1) * n]
            .iter()
            .map(|&b| if b { 255u8 } else { 0 })
            .collect();
        let img = GrayImage::from_raw(dims.nx as u32, dims.ny as u32, pixels)
            .expect("buffer sized from dims");
        let path = dir.join(format!("mask_{z:05}.png"));
        img.save(&path).map_err(|source| match source {
            image::ImageError::IoError(e) => Error::io(&path, e),
            source => Error::Image { path, source },
        })?;
    }
    Ok(())
}
