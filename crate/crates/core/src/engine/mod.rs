//! Narrow-band front evolution with active-region occupancy grids.
//!
//! One iteration of [`Engine::step`]:
//!
//! 1. The active contour `C_a` is the set of contour voxels that have been
//!    foreground for at most `t` iterations. The rest of the contour is
//!    static and never moves again.
//! 2. If `|C_a| < k` the run stops.
//! 3. The active grid `G_a` marks each cube holding a `C_a` voxel plus its
//!    26 neighbours.
//! 4. With exploration on, active cubes not yet in the history grid `G_h`
//!    are explored. Their unlabeled voxels become background and join the
//!    background histogram.
//! 5. `phi` is rebuilt inside `G_a` from the truncated distance to the
//!    contour, negative on the foreground.
//! 6. Both classes are re-estimated from their histograms.
//! 7. Band voxels (`|phi| <= b`) in `G_a` take one explicit step of
//!    `nu * kappa + data term`. Sign changes move voxels between classes.
//! 8. Every foreground voxel's membership count goes up by one.
//!
//! All data-parallel phases collect their results in a fixed order, so a run
//! is bit-identical for any number of rayon workers.

mod contour;
mod curvature;

use log::{debug, warn};
use rayon::prelude::*;

pub use contour::{locate_contour, mark_active_grid, split_contour};
pub use curvature::{curvature, curvature_of_patch};

use crate::dt::TruncatedDistance;
use crate::error::{Error, Result};
use crate::grid::OccupancyGrid;
use crate::stats::{speed_term, ClassHistogram, GaussianParams, SIGMA_FLOOR};
use crate::volume::{Mask, Volume};

/// Value given to a background voxel whose flip to the foreground was vetoed.
pub const VETO_PHI: f32 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Label {
    /// Not explored yet, or below the minimum greylevel.
    Unlabeled,
    /// Non-root class, `phi >= 0`.
    Background,
    /// Root class, `phi <= 0`.
    Foreground,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EngineConfig {
    /// Narrow band half-width `b`, in voxels.
    pub band: u32,
    /// Curvature weight `nu`.
    pub nu: f64,
    /// Occupancy cube edge `s`; must be at least `band`.
    pub cube: usize,
    /// A contour voxel stays active while its membership count is `<= t`.
    pub max_count: u32,
    /// Stop once fewer than `k` contour voxels are active.
    pub min_active: usize,
    /// Explicit time step.
    pub dt_step: f64,
    /// Voxels darker than this never join either class.
    pub min_grey: u16,
    /// Greylevels a voxel needs to switch from background to foreground.
    pub root_band: (u16, u16),
    /// Grow the background class cube by cube. When off, every voxel at or
    /// above `min_grey` starts as background.
    pub explore: bool,
    pub max_iters: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            band: 10,
            nu: 1.0,
            cube: 10,
            max_count: 1,
            min_active: 100,
            dt_step: 1.0,
            min_grey: 1,
            root_band: (0, u16::MAX),
            explore: true,
            max_iters: 5000,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.band < 1 {
            return fail("band b must be at least 1".into());
        }
        if self.cube < self.band as usize {
            return fail(format!(
                "cube edge s = {} must be at least b = {}",
                self.cube, self.band
            ));
        }
        if self.min_active < 1 {
            return fail("termination size k must be at least 1".into());
        }
        if !self.dt_step.is_finite() || self.dt_step <= 0.0 {
            return fail(format!("time step must be positive, got {}", self.dt_step));
        }
        if !self.nu.is_finite() || self.nu < 0.0 {
            return fail(format!("nu must be non-negative, got {}", self.nu));
        }
        if self.root_band.0 > self.root_band.1 {
            return fail(format!(
                "root band [{}, {}] is empty",
                self.root_band.0, self.root_band.1
            ));
        }
        if self.max_count >= u32::from(u16::MAX) {
            return fail(format!("t = {} is too large", self.max_count));
        }
        if self.max_iters == 0 {
            return fail("max_iters must be at least 1".into());
        }
        Ok(())
    }

    fn in_root_band(&self, g: u16) -> bool {
        g >= self.root_band.0 && g <= self.root_band.1
    }
}

/// Quantities recorded once per iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationMetrics {
    pub iteration: usize,
    /// `|C_a|` at the start of the iteration.
    pub c_active: usize,
    /// `|C_s|` at the start of the iteration.
    pub c_static: usize,
    pub ga_cubes: usize,
    pub gh_cubes: usize,
    /// Energy at the end of the iteration.
    pub energy: f64,
}

impl IterationMetrics {
    pub const CSV_HEADER: &'static str = "iter,c_active,c_static,ga_cubes,gh_cubes,energy";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.iteration, self.c_active, self.c_static, self.ga_cubes, self.gh_cubes, self.energy
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub labels: Vec<Label>,
    pub metrics: Vec<IterationMetrics>,
    pub seeds: Vec<usize>,
    /// False if `max_iters` ran out before `|C_a| < k`.
    pub converged: bool,
    dims: crate::volume::Dims,
}

impl Outcome {
    pub fn iterations(&self) -> usize {
        self.metrics.len()
    }

    pub fn foreground(&self) -> Vec<bool> {
        self.labels.iter().map(|&l| l == Label::Foreground).collect()
    }

    pub fn foreground_mask(&self) -> Mask {
        Mask::from_vec(self.dims, self.foreground()).expect("labels sized from dims")
    }
}

/// Whether the loop should keep going after a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepStatus {
    Continue,
    Converged,
}

pub struct Engine<'v> {
    vol: &'v Volume,
    cfg: EngineConfig,
    phi: Vec<f32>,
    labels: Vec<Label>,
    counts: Vec<u16>,
    contour: Vec<bool>,
    contour_len: usize,
    pinned: Vec<bool>,
    seeds: Vec<usize>,
    /// Foreground voxels with `count <= t`, ascending.
    young: Vec<usize>,
    active: OccupancyGrid,
    history: OccupancyGrid,
    background: ClassHistogram,
    foreground: ClassHistogram,
    distance: TruncatedDistance,
    iteration: usize,
    metrics: Vec<IterationMetrics>,
}

impl<'v> Engine<'v> {
    /// Sets up labels, `phi`, counts, grids and histograms from the seeds.
    pub fn new(vol: &'v Volume, seeds: &[usize], cfg: EngineConfig) -> Result<Self> {
        cfg.validate()?;
        let dims = vol.dims();
        let n = dims.len();
        let mut seeds = seeds.to_vec();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.is_empty() {
            return Err(Error::NoInitVoxels);
        }
        if let Some(&bad) = seeds.iter().find(|&&i| i >= n) {
            return Err(Error::Dimensions(format!("seed index {bad} outside volume {dims}")));
        }

        let far = (cfg.band + 1) as f32;
        let levels = vol.depth().levels();
        let mut phi = vec![far; n];
        let mut labels = vec![Label::Unlabeled; n];
        let mut counts = vec![0u16; n];
        let mut pinned = vec![false; n];
        let mut foreground = ClassHistogram::new(levels);
        for &i in &seeds {
            phi[i] = -1.0;
            labels[i] = Label::Foreground;
            counts[i] = 1;
            pinned[i] = true;
            foreground.add(vol.at(i));
        }
        // A single seed is allowed here; estimation rejects n < 2 later.

        let mut background = ClassHistogram::new(levels);
        let history = if cfg.explore {
            OccupancyGrid::new(dims, cfg.cube)
        } else {
            for (i, l) in labels.iter_mut().enumerate() {
                let g = vol.at(i);
                if *l == Label::Unlabeled && g >= cfg.min_grey {
                    *l = Label::Background;
                    background.add(g);
                }
            }
            if background.n() == 0 {
                return Err(Error::InsufficientSamples {
                    class: "background",
                    n: 0,
                });
            }
            OccupancyGrid::filled(dims, cfg.cube)
        };

        let mut contour = vec![false; n];
        let mut contour_len = 0;
        for &i in &seeds {
            if contour::is_contour(&labels, dims, i) {
                contour[i] = true;
                contour_len += 1;
            }
        }
        let young = if cfg.max_count >= 1 {
            seeds.clone()
        } else {
            Vec::new()
        };

        Ok(Engine {
            vol,
            distance: TruncatedDistance::new(dims, cfg.band)?,
            active: OccupancyGrid::new(dims, cfg.cube),
            cfg,
            phi,
            labels,
            counts,
            contour,
            contour_len,
            pinned,
            seeds,
            young,
            history,
            background,
            foreground,
            iteration: 0,
            metrics: Vec::new(),
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn volume(&self) -> &Volume {
        self.vol
    }

    pub fn phi(&self) -> &[f32] {
        &self.phi
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn counts(&self) -> &[u16] {
        &self.counts
    }

    pub fn seeds(&self) -> &[usize] {
        &self.seeds
    }

    pub fn active_grid(&self) -> &OccupancyGrid {
        &self.active
    }

    pub fn history_grid(&self) -> &OccupancyGrid {
        &self.history
    }

    pub fn background_histogram(&self) -> &ClassHistogram {
        &self.background
    }

    pub fn foreground_histogram(&self) -> &ClassHistogram {
        &self.foreground
    }

    /// Contour voxels as tracked incrementally by the engine, ascending.
    pub fn contour(&self) -> Vec<usize> {
        (0..self.contour.len()).filter(|&i| self.contour[i]).collect()
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn metrics(&self) -> &[IterationMetrics] {
        &self.metrics
    }

    /// Runs to convergence or `max_iters`.
    pub fn run(self) -> Result<Outcome> {
        self.run_with(|_, _| {})
    }

    /// Like [`Engine::run`], calling `observe` after every iteration.
    pub fn run_with(mut self, mut observe: impl FnMut(&Engine, &IterationMetrics)) -> Result<Outcome> {
        let mut converged = false;
        while self.iteration < self.cfg.max_iters {
            let status = self.step()?;
            let row = *self.metrics.last().expect("step records metrics");
            observe(&self, &row);
            if status == StepStatus::Converged {
                converged = true;
                break;
            }
        }
        if !converged {
            warn!(
                "stopped after max_iters = {} without reaching |C_a| < k",
                self.cfg.max_iters
            );
        }
        Ok(Outcome {
            dims: self.vol.dims(),
            labels: self.labels,
            metrics: self.metrics,
            seeds: self.seeds,
            converged,
        })
    }

    /// Performs one iteration.
    pub fn step(&mut self) -> Result<StepStatus> {
        self.iteration += 1;
        let active_contour: Vec<usize> = self
            .young
            .iter()
            .copied()
            .filter(|&i| self.contour[i])
            .collect();
        let c_active = active_contour.len();
        let c_static = self.contour_len - c_active;

        self.active.clear();
        for &i in &active_contour {
            self.active.mark_with_neighbors(i);
        }

        if c_active < self.cfg.min_active {
            self.record(c_active, c_static);
            debug!("iteration {}: |C_a| = {c_active} < k, stopping", self.iteration);
            return Ok(StepStatus::Converged);
        }

        if self.cfg.explore {
            self.explore();
        }
        self.rebuild_phi()?;
        let bg = self.background.estimate().map_err(|_| Error::InsufficientSamples {
            class: "background",
            n: self.background.n(),
        })?;
        let fg = self.foreground.estimate().map_err(|_| Error::InsufficientSamples {
            class: "foreground",
            n: self.foreground.n(),
        })?;
        let updates = self.evolve_band(&bg, &fg);
        let joined = self.apply_updates(&updates);
        self.advance_counts(joined);
        self.record(c_active, c_static);
        Ok(StepStatus::Continue)
    }

    fn record(&mut self, c_active: usize, c_static: usize) {
        let energy = self.energy();
        self.metrics.push(IterationMetrics {
            iteration: self.iteration,
            c_active,
            c_static,
            ga_cubes: self.active.count(),
            gh_cubes: self.history.count(),
            energy,
        });
    }

    /// Adds the contents of newly active, unexplored cubes to the background.
    fn explore(&mut self) {
        let far = (self.cfg.band + 1) as f32;
        let cells: Vec<usize> = self.active.iter_set().collect();
        for cell in cells {
            if !self.history.set(cell) {
                continue;
            }
            let voxels: Vec<usize> = self.history.voxels_of(cell).collect();
            for i in voxels {
                let g = self.vol.at(i);
                if self.labels[i] == Label::Unlabeled && g >= self.cfg.min_grey {
                    self.labels[i] = Label::Background;
                    self.phi[i] = far;
                    self.background.add(g);
                }
            }
        }
    }

    /// Signed truncated distance to the contour inside the active cubes.
    fn rebuild_phi(&mut self) -> Result<()> {
        self.distance.compute(&self.contour, &self.active)?;
        let far = (self.cfg.band + 1) as f32;
        for cell in self.active.iter_set() {
            for i in self.active.voxels_of(cell) {
                let d = self.distance.distance(i) as f32;
                self.phi[i] = match self.labels[i] {
                    Label::Foreground => -d,
                    Label::Background => d,
                    Label::Unlabeled => far,
                };
            }
        }
        Ok(())
    }

    /// New `phi` for every evolving band voxel, ascending by voxel index
    /// within each active cube.
    fn evolve_band(&self, bg: &GaussianParams, fg: &GaussianParams) -> Vec<(usize, f32)> {
        let cfg = &self.cfg;
        let dims = self.vol.dims();
        let band = cfg.band as f32;
        let far = (cfg.band + 1) as f64;
        let cells: Vec<usize> = self.active.iter_set().collect();
        cells
            .par_iter()
            .map(|&cell| {
                let mut out = Vec::new();
                for i in self.active.voxels_of(cell) {
                    let p = self.phi[i];
                    let g = self.vol.at(i);
                    if p.abs() > band
                        || self.labels[i] == Label::Unlabeled
                        || g < cfg.min_grey
                        || u32::from(self.counts[i]) > cfg.max_count
                        || self.pinned[i]
                    {
                        continue;
                    }
                    let [x, y, z] = dims.coords(i);
                    let kappa = if cfg.nu == 0.0 {
                        0.0
                    } else {
                        curvature(&self.phi, dims, x, y, z)
                    };
                    let speed = cfg.nu * kappa + speed_term(g as f64, bg, fg);
                    let next = (p as f64 + cfg.dt_step * speed).clamp(-far, far);
                    out.push((i, next as f32));
                }
                out
            })
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    }

    /// Writes new `phi` values and moves voxels whose sign changed.
    /// Returns the voxels that joined the foreground.
    fn apply_updates(&mut self, updates: &[(usize, f32)]) -> Vec<usize> {
        let mut joined = Vec::new();
        for &(i, next) in updates {
            let g = self.vol.at(i);
            match self.labels[i] {
                Label::Background if next < 0.0 => {
                    if self.cfg.in_root_band(g) {
                        self.phi[i] = next;
                        self.relabel(i, Label::Foreground);
                        joined.push(i);
                    } else {
                        self.phi[i] = VETO_PHI;
                    }
                }
                Label::Foreground if next > 0.0 => {
                    self.phi[i] = next;
                    self.relabel(i, Label::Background);
                }
                _ => self.phi[i] = next,
            }
        }
        joined
    }

    fn relabel(&mut self, i: usize, to: Label) {
        let g = self.vol.at(i);
        match to {
            Label::Foreground => {
                self.background.remove(g);
                self.foreground.add(g);
            }
            Label::Background => {
                self.foreground.remove(g);
                self.background.add(g);
            }
            Label::Unlabeled => unreachable!("voxels never return to the unlabeled set"),
        }
        self.labels[i] = to;
        let dims = self.vol.dims();
        self.refresh_contour(i);
        for n in contour::face_neighbors(dims, i) {
            self.refresh_contour(n);
        }
    }

    fn refresh_contour(&mut self, i: usize) {
        let now = contour::is_contour(&self.labels, self.vol.dims(), i);
        if now != self.contour[i] {
            self.contour[i] = now;
            if now {
                self.contour_len += 1;
            } else {
                self.contour_len -= 1;
            }
        }
    }

    /// One more iteration of membership for every young foreground voxel.
    /// Voxels whose count passes `t` leave the young list for good.
    fn advance_counts(&mut self, mut joined: Vec<usize>) {
        let t = self.cfg.max_count;
        let mut young = std::mem::take(&mut self.young);
        young.append(&mut joined);
        young.sort_unstable();
        young.retain(|&i| {
            if self.labels[i] != Label::Foreground {
                return false;
            }
            self.counts[i] = self.counts[i].saturating_add(1);
            u32::from(self.counts[i]) <= t
        });
        self.young = young;
    }

    /// Current energy from the class moments and the contour size.
    pub fn energy(&self) -> f64 {
        class_energy(&self.background)
            + class_energy(&self.foreground)
            + self.cfg.nu * self.contour_len as f64
    }
}

/// Parameters for energy bookkeeping; a single sample gets the sigma floor.
fn lenient_params(h: &ClassHistogram) -> Option<GaussianParams> {
    match h.n() {
        0 => None,
        1 => Some(GaussianParams::floored(h.sum() as f64, SIGMA_FLOOR)),
        _ => h.estimate().ok(),
    }
}

fn class_energy(h: &ClassHistogram) -> f64 {
    match lenient_params(h) {
        None => 0.0,
        Some(p) => {
            h.squared_deviation(p.mu) / (2.0 * p.sigma * p.sigma)
                + h.n() as f64 * (p.sigma * (2.0 * std::f64::consts::PI).sqrt()).ln()
        }
    }
}

/// Energy by direct summation: negative log-likelihood of every labeled
/// voxel under its class plus `nu` times the number of contour voxels.
pub fn energy(
    labels: &[Label],
    vol: &Volume,
    background: &GaussianParams,
    foreground: &GaussianParams,
    nu: f64,
) -> f64 {
    let data: f64 = labels
        .iter()
        .zip(vol.data())
        .map(|(l, &g)| match l {
            Label::Background => background.neg_log_pdf(g as f64),
            Label::Foreground => foreground.neg_log_pdf(g as f64),
            Label::Unlabeled => 0.0,
        })
        .sum();
    data + nu * locate_contour(labels, vol.dims()).len() as f64
}
