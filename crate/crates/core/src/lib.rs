//! Narrow-band level-set segmentation of thin tubular structures (plant roots)
//! in large greylevel volumes.
//!
//! The pipeline:
//!
//! 1. [`volume`] loads a slice stack or raw file into a [`Volume`].
//! 2. [`init`] turns hand-marked slices into the initial foreground set.
//! 3. [`engine`] evolves a two-class Gaussian level set. Work is confined to
//!    occupancy-grid cubes around the *active* part of the contour, distances
//!    come from the block-restricted truncated EDT in [`dt`], and class
//!    statistics are kept incrementally in [`stats`].
//! 4. [`postproc`] keeps only the foreground components touching a seed.
//!
//! [`phantom`] produces synthetic ground truth, and [`cli`] wires everything
//! into the `rootlevel` batch driver. The `book/` directory at the repository
//! root walks through the method chapter by chapter.
//!
//! ```
//! use rootlevel::engine::{EngineConfig, Engine};
//! use rootlevel::volume::{BitDepth, Dims, Volume};
//!
//! // A bright 3-voxel-wide bar along x in a dark medium.
//! let dims = Dims::new(24, 24, 24);
//! let mut data = vec![60u16; dims.len()];
//! for z in 11..14 {
//!     for y in 11..14 {
//!         for x in 0..24 {
//!             data[dims.index(x, y, z)] = 200;
//!         }
//!     }
//! }
//! let vol = Volume::new(dims, BitDepth::Eight, data).unwrap();
//! let seeds = vec![dims.index(12, 12, 12), dims.index(12, 11, 12), dims.index(11, 12, 12)];
//!
//! let cfg = EngineConfig { band: 3, cube: 4, min_active: 1, ..EngineConfig::default() };
//! let outcome = Engine::new(&vol, &seeds, cfg).unwrap().run().unwrap();
//! assert!(outcome.foreground().iter().filter(|&&f| f).count() >= 24 * 9);
//! ```

pub mod cli;
pub mod dt;
pub mod engine;
mod error;
pub mod grid;
pub mod init;
mod kv;
pub mod phantom;
pub mod postproc;
pub mod stats;
pub mod volume;

pub use error::{Error, Result};
pub use volume::Volume;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/volumes.md")]
    mod volumes {}
    #[doc = include_str!("../../../book/src/initialization.md")]
    mod initialization {}
    #[doc = include_str!("../../../book/src/distance-transform.md")]
    mod distance_transform {}
    #[doc = include_str!("../../../book/src/statistics.md")]
    mod statistics {}
    #[doc = include_str!("../../../book/src/front-evolution.md")]
    mod front_evolution {}
    #[doc = include_str!("../../../book/src/components.md")]
    mod components {}
    #[doc = include_str!("../../../book/src/phantoms.md")]
    mod phantoms {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
