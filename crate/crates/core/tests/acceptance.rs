//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the report prints in order.
//! Exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rootlevel::cli::{execute, Input, RunConfig};
use rootlevel::dt::{tedt_block_union, TruncatedDistance};
use rootlevel::engine::{curvature, locate_contour, Engine, EngineConfig, IterationMetrics, Label};
use rootlevel::grid::OccupancyGrid;
use rootlevel::phantom::{dice, generate, sample_seeds, Phantom, PhantomSpec};
use rootlevel::postproc::filter_components;
use rootlevel::stats::{speed_term, ClassHistogram, GaussianParams};
use rootlevel::volume::Dims;

const BRANCHING: &str = include_str!("../../../configs/branching.phantom");
const LEAK: &str = include_str!("../../../configs/leak.phantom");

// Pinned tolerances.
const DT_RUNTIME_LIMIT: Duration = Duration::from_secs(60);
const DT_LINEARITY_MAX_RATIO: f64 = 2.5;
const HIST_REL_TOL: f64 = 1e-12;
const CURVATURE_MAX_REL_ERR: f64 = 0.20;
const PLANE_MAX_KAPPA: f64 = 1e-6;
const SPEED_TOL: f64 = 1e-12;
const PHANTOM_MIN_DICE: f64 = 0.90;
const PHANTOM_TIME_LIMIT: Duration = Duration::from_secs(600);
const GH_PLATEAU_MAX_GROWTH: f64 = 0.05;
const GA_FINAL_MAX_FRACTION: f64 = 0.5;

type Verdict = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn FnOnce() -> Verdict + 'a>);

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- 1

/// Exact truncated squared distances by scanning the `(b+1)`-box around each
/// source.
fn brute_tedt(sources: &[bool], region: &OccupancyGrid, band: u32) -> Vec<u32> {
    let dims = region.voxel_dims();
    let cap = (band + 1) * (band + 1);
    let r = band as i64 + 1;
    let mut out = vec![cap; dims.len()];
    for (i, _) in sources.iter().enumerate().filter(|(i, &s)| s && region.covers(*i)) {
        let [x, y, z] = dims.coords(i).map(|c| c as i64);
        for dz in -r..=r {
            for dy in -r..=r {
                for dx in -r..=r {
                    let (px, py, pz) = (x + dx, y + dy, z + dz);
                    if !dims.contains(px, py, pz) {
                        continue;
                    }
                    let j = dims.index(px as usize, py as usize, pz as usize);
                    let d2 = (dx * dx + dy * dy + dz * dz) as u32;
                    if d2 < out[j] {
                        out[j] = d2;
                    }
                }
            }
        }
    }
    out
}

fn dt_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let start = Instant::now();
    let (mut volumes, mut checked, mut mismatches) = (0, 0usize, 0usize);
    for trial in 0..240 {
        let band = [3u32, 5, 10][trial % 3];
        let dims = Dims::new(
            rng.random_range(1..=50),
            rng.random_range(1..=50),
            rng.random_range(1..=50),
        );
        let cube = band as usize + rng.random_range(0..=3);
        let density = [0.0, 0.0005, 0.005, 0.03][rng.random_range(0..4)];
        let sources: Vec<bool> = (0..dims.len()).map(|_| rng.random_bool(density)).collect();
        let mut region = OccupancyGrid::new(dims, cube);
        let fill = [0.3, 0.7, 1.0][rng.random_range(0..3)];
        for c in 0..region.len() {
            if rng.random_bool(fill) {
                region.set(c);
            }
        }
        let fast = tedt_block_union(&sources, &region, band).map_err(|e| e.to_string())?;
        let slow = brute_tedt(&sources, &region, band);
        for i in (0..dims.len()).filter(|&i| region.covers(i)) {
            checked += 1;
            if fast.squared(i) != slow[i] {
                mismatches += 1;
            }
        }
        volumes += 1;
    }
    let t = start.elapsed();
    check(
        mismatches == 0 && volumes >= 200 && t < DT_RUNTIME_LIMIT,
        format!(
            "{volumes} volumes, {checked} in-region voxels, {mismatches} mismatches, {:.1} s",
            t.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- 2

fn random_region(dims: Dims, cube: usize, count: usize, rng: &mut ChaCha8Rng) -> OccupancyGrid {
    let mut g = OccupancyGrid::new(dims, cube);
    while g.count() < count {
        g.set(rng.random_range(0..g.len()));
    }
    g
}

fn dt_linearity() -> Verdict {
    let dims = Dims::new(300, 300, 300);
    let (band, cube) = (10, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let sources: Vec<bool> = (0..dims.len()).map(|_| rng.random_bool(0.002)).collect();
    let mut dt = TruncatedDistance::new(dims, band).map_err(|e| e.to_string())?;
    let time = |dt: &mut TruncatedDistance, region: &OccupancyGrid| -> Result<f64, String> {
        let t = Instant::now();
        dt.compute(&sources, region).map_err(|e| e.to_string())?;
        Ok(t.elapsed().as_secs_f64())
    };
    let (mut small, mut large) = (0.0, 0.0);
    let n = 500;
    let trials = 5;
    for _ in 0..trials {
        let a = random_region(dims, cube, n, &mut rng);
        let b = random_region(dims, cube, 2 * n, &mut rng);
        small += time(&mut dt, &a)?;
        large += time(&mut dt, &b)?;
    }
    let ratio = large / small;
    check(
        ratio <= DT_LINEARITY_MAX_RATIO,
        format!(
            "{n} -> {} cubes: {:.1} ms -> {:.1} ms, ratio {ratio:.2}",
            2 * n,
            1e3 * small / trials as f64,
            1e3 * large / trials as f64
        ),
    )
}

// ---------------------------------------------------------------- 3

fn two_pass(samples: &[u16]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mu = samples.iter().map(|&g| g as f64).sum::<f64>() / n;
    let var = samples.iter().map(|&g| (g as f64 - mu).powi(2)).sum::<f64>() / n;
    (mu, var.sqrt())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn histogram_equivalence() -> Verdict {
    let levels = 1 << 16;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    let mut pools: [Vec<u16>; 2] = [Vec::new(), Vec::new()];
    let mut hists = [ClassHistogram::new(levels), ClassHistogram::new(levels)];
    let ops = 100_000;
    let (mut rebuild_mismatch, mut worst) = (0, 0.0f64);
    for op in 0..ops {
        let c = rng.random_range(0..2);
        match rng.random_range(0..3) {
            0 => {
                // Clustered greylevels keep the variance small relative to the mean.
                let g = (30_000 + rng.random_range(0..2_000)) as u16;
                pools[c].push(g);
                hists[c].add(g);
            }
            1 if !pools[c].is_empty() => {
                let k = rng.random_range(0..pools[c].len());
                let g = pools[c].swap_remove(k);
                hists[c].remove(g);
            }
            _ if !pools[c].is_empty() => {
                let k = rng.random_range(0..pools[c].len());
                let g = pools[c].swap_remove(k);
                hists[c].remove(g);
                pools[1 - c].push(g);
                hists[1 - c].add(g);
            }
            _ => {}
        }
        if op % 1000 == 999 || op == ops - 1 {
            for c in 0..2 {
                let full = ClassHistogram::from_samples(levels, pools[c].iter().copied());
                if full != hists[c] {
                    rebuild_mismatch += 1;
                }
                if pools[c].len() >= 2 {
                    let est = hists[c].estimate().map_err(|e| e.to_string())?;
                    let (mu, sigma) = two_pass(&pools[c]);
                    let expect = GaussianParams::floored(mu, sigma);
                    worst = worst.max(rel(est.mu, expect.mu)).max(rel(est.sigma, expect.sigma));
                }
            }
        }
    }
    check(
        rebuild_mismatch == 0 && worst <= HIST_REL_TOL,
        format!("{ops} ops, {rebuild_mismatch} rebuild mismatches, worst relative error {worst:.1e}"),
    )
}

// ---------------------------------------------------------------- 4

/// Signed distance to a digital ball, built the way the engine builds `phi`.
fn ball_phi(dims: Dims, center: f64, radius: f64, band: u32) -> Vec<f32> {
    let inside: Vec<Label> = (0..dims.len())
        .map(|i| {
            let [x, y, z] = dims.coords(i).map(|c| c as f64 - center);
            if x * x + y * y + z * z <= radius * radius {
                Label::Foreground
            } else {
                Label::Background
            }
        })
        .collect();
    let mut sources = vec![false; dims.len()];
    for i in locate_contour(&inside, dims) {
        sources[i] = true;
    }
    let region = OccupancyGrid::filled(dims, band as usize);
    let d = tedt_block_union(&sources, &region, band).unwrap();
    (0..dims.len())
        .map(|i| {
            let v = d.distance(i) as f32;
            if inside[i] == Label::Foreground {
                -v
            } else {
                v
            }
        })
        .collect()
}

/// Mean absolute relative error and mean of `kappa` against `2/R` over
/// `|phi| <= 1`.
fn sphere_stats(phi: &[f32], dims: Dims, radius: f64) -> (f64, f64) {
    let expect = 2.0 / radius;
    let (mut err, mut sum, mut count) = (0.0, 0.0, 0usize);
    for i in (0..dims.len()).filter(|&i| phi[i].abs() <= 1.0) {
        let [x, y, z] = dims.coords(i);
        let k = curvature(phi, dims, x, y, z);
        err += rel(k, expect);
        sum += k;
        count += 1;
    }
    (err / count as f64, sum / count as f64)
}

fn curvature_check() -> Verdict {
    let band = 4;
    let mut details = Vec::new();
    let mut ok = true;
    let mut prev = f64::INFINITY;
    for radius in [10.0, 20.0, 40.0] {
        let n = 2 * (radius as usize + band as usize + 2) + 1;
        let dims = Dims::new(n, n, n);
        let c = (n / 2) as f64;
        let sdf: Vec<f32> = (0..dims.len())
            .map(|i| {
                let [x, y, z] = dims.coords(i).map(|v| v as f64 - c);
                ((x * x + y * y + z * z).sqrt() - radius) as f32
            })
            .collect();
        let (err, mean) = sphere_stats(&sdf, dims, radius);
        // Same sphere through the truncated transform of its digital boundary;
        // reported for reference only.
        let (dt_err, dt_mean) = sphere_stats(&ball_phi(dims, c, radius, band), dims, radius);
        ok &= err <= CURVATURE_MAX_REL_ERR && mean < prev;
        prev = mean;
        details.push(format!(
            "R={radius}: mean {mean:.4} vs {:.4}, err {:.1}% (via DT: mean {dt_mean:.4}, err {:.0}%)",
            2.0 / radius,
            100.0 * err,
            100.0 * dt_err
        ));
    }
    let dims = Dims::new(16, 16, 16);
    let mut worst_plane = 0.0f64;
    for axis in 0..3 {
        let phi: Vec<f32> = (0..dims.len())
            .map(|i| dims.coords(i)[axis] as f32 - 7.5)
            .collect();
        for i in 0..dims.len() {
            let [x, y, z] = dims.coords(i);
            let interior = [x, y, z].iter().all(|&c| c > 0 && c < 15);
            if interior {
                worst_plane = worst_plane.max(curvature(&phi, dims, x, y, z).abs());
            }
        }
    }
    ok &= worst_plane <= PLANE_MAX_KAPPA;
    details.push(format!("planes: max |kappa| {worst_plane:.1e}"));
    check(ok, details.join("; "))
}

// ---------------------------------------------------------------- 5

fn speed_substitutions() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let mu1 = rng.random_range(0.0..200.0);
        let mu2 = rng.random_range(0.0..65_535.0);
        let sigma = rng.random_range(1.0..500.0);
        let g = rng.random_range(0.0..65_535.0);
        let a = GaussianParams { mu: mu1, sigma };
        let b = GaussianParams { mu: mu2, sigma };
        worst = worst.max(speed_term(g, &a, &a).abs());
        let gap = (mu2 - mu1).powi(2) / (2.0 * sigma * sigma);
        worst = worst.max(rel(speed_term(mu2, &a, &b), -gap));
        worst = worst.max(rel(speed_term(mu1, &a, &b), gap));
    }
    check(
        worst <= SPEED_TOL,
        format!("10000 random parameter sets, worst error {worst:.1e}"),
    )
}

// ---------------------------------------------------------------- 6, 8, 11

struct PhantomRun {
    dice: f64,
    converged: bool,
    iterations: usize,
    elapsed: Duration,
    metrics: Vec<IterationMetrics>,
    violations: Vec<String>,
}

/// Per-iteration invariant checks.
struct Invariants {
    prev_history: Vec<bool>,
    prev_counts: Vec<u16>,
    frozen: Vec<Option<Label>>,
    violations: Vec<String>,
}

impl Invariants {
    fn new(n: usize) -> Self {
        Invariants {
            prev_history: Vec::new(),
            prev_counts: vec![0; n],
            frozen: vec![None; n],
            violations: Vec::new(),
        }
    }

    fn fail(&mut self, it: usize, what: String) {
        if self.violations.len() < 5 {
            self.violations.push(format!("iteration {it}: {what}"));
        }
    }

    fn observe(&mut self, e: &Engine, m: &IterationMetrics) {
        let it = m.iteration;
        let cfg = e.config();
        let far = (cfg.band + 1) as f32;
        let (labels, phi, counts, vol) = (e.labels(), e.phi(), e.counts(), e.volume());
        for i in 0..labels.len() {
            let ok = match labels[i] {
                Label::Foreground => phi[i] <= 0.0,
                Label::Background => phi[i] >= 0.0,
                Label::Unlabeled => phi[i] == far,
            };
            if !ok {
                self.fail(it, format!("label {:?} with phi {} at {i}", labels[i], phi[i]));
            }
            let g = vol.at(i);
            if g < cfg.min_grey && labels[i] != Label::Unlabeled {
                self.fail(it, format!("voxel {i} below g_min is labelled"));
            }
            let in_band = g >= cfg.root_band.0 && g <= cfg.root_band.1;
            if labels[i] == Label::Foreground && !in_band && e.seeds().binary_search(&i).is_err() {
                self.fail(it, format!("voxel {i} with greylevel {g} joined the foreground"));
            }
            if counts[i] < self.prev_counts[i] {
                self.fail(it, format!("count of {i} decreased"));
            }
            match self.frozen[i] {
                Some(l) if l != labels[i] => self.fail(it, format!("static voxel {i} changed label")),
                None if u32::from(counts[i]) > cfg.max_count => self.frozen[i] = Some(labels[i]),
                _ => {}
            }
        }
        self.prev_counts.copy_from_slice(counts);
        for &s in e.seeds() {
            if labels[s] != Label::Foreground {
                self.fail(it, format!("seed {s} lost"));
            }
        }
        let h = e.history_grid();
        let now: Vec<bool> = (0..h.len()).map(|c| h.get(c)).collect();
        if self.prev_history.iter().zip(&now).any(|(&a, &b)| a && !b) {
            self.fail(it, "history grid lost a cube".into());
        }
        self.prev_history = now;
    }
}

fn run_phantom(phantom: &Phantom, spec: &PhantomSpec, cfg: EngineConfig) -> Result<PhantomRun, String> {
    let truth = phantom.truth();
    let seeds = sample_seeds(&truth, &spec.seed_slices, spec.seed_stride);
    let start = Instant::now();
    let mut inv = Invariants::new(spec.dims.len());
    let engine = Engine::new(&phantom.volume, &seeds, cfg).map_err(|e| e.to_string())?;
    let mut out = engine
        .run_with(|e, m| inv.observe(e, m))
        .map_err(|e| e.to_string())?;
    filter_components(&mut out.labels, spec.dims, &out.seeds);
    let elapsed = start.elapsed();
    Ok(PhantomRun {
        dice: dice(&out.foreground_mask(), &truth).map_err(|e| e.to_string())?,
        converged: out.converged,
        iterations: out.iterations(),
        elapsed,
        metrics: out.metrics,
        violations: inv.violations,
    })
}

fn branching() -> (PhantomSpec, Phantom) {
    let spec = PhantomSpec::parse(BRANCHING).expect("branching phantom spec");
    let p = generate(&spec).expect("branching phantom");
    (spec, p)
}

fn end_to_end(run: &PhantomRun, spec: &PhantomSpec) -> Verdict {
    let radii_ok = spec.tubes.iter().all(|t| (2.0..=6.0).contains(&t.radius));
    let contrast_ok =
        spec.root.mu - spec.medium.mu >= 3.0 * spec.root.sigma.max(spec.medium.sigma);
    check(
        radii_ok
            && contrast_ok
            && spec.dims == Dims::new(200, 200, 200)
            && spec.seed_slices.len() == 3
            && run.dice >= PHANTOM_MIN_DICE
            && run.converged
            && run.elapsed <= PHANTOM_TIME_LIMIT,
        format!(
            "Dice {:.4}, {} iterations, converged {}, {:.1} s",
            run.dice,
            run.iterations,
            run.converged,
            run.elapsed.as_secs_f64()
        ),
    )
}

fn invariant_suite(runs: &[(&str, &PhantomRun)]) -> Verdict {
    let mut detail = Vec::new();
    let mut ok = true;
    for (name, r) in runs {
        ok &= r.violations.is_empty();
        if r.violations.is_empty() {
            detail.push(format!("{name}: {} iterations clean", r.iterations));
        } else {
            detail.push(format!("{name}: {}", r.violations.join("; ")));
        }
    }
    check(ok, detail.join("; "))
}

fn metric_shape(run: &PhantomRun, k: usize) -> Verdict {
    let m = &run.metrics;
    let gh: Vec<usize> = m.iter().map(|r| r.gh_cubes).collect();
    let ga: Vec<usize> = m.iter().map(|r| r.ga_cubes).collect();
    let monotone = gh.windows(2).all(|w| w[0] <= w[1]);
    let last = *gh.last().unwrap_or(&0);
    let tail_start = gh[gh.len() - gh.len().div_ceil(4).max(1)];
    let growth = (last - tail_start) as f64 / last.max(1) as f64;
    let (peak_at, &peak) = ga.iter().enumerate().max_by_key(|(i, &v)| (v, usize::MAX - i)).unwrap();
    let final_ga = *ga.last().unwrap();
    let final_active = m.last().map_or(usize::MAX, |r| r.c_active);
    check(
        monotone
            && growth <= GH_PLATEAU_MAX_GROWTH
            && peak_at + 1 < ga.len()
            && (final_ga as f64) <= GA_FINAL_MAX_FRACTION * peak as f64
            && final_active < k,
        format!(
            "G_h {:?}; G_a {:?}; final |C_a| {final_active} < k = {k}",
            gh, ga
        ),
    )
}

// ---------------------------------------------------------------- 7

fn leak_regression() -> Verdict {
    let spec = PhantomSpec::parse(LEAK).map_err(|e| e.to_string())?;
    let p = generate(&spec).map_err(|e| e.to_string())?;
    let cores = p.granule_cores();
    let seeds = sample_seeds(&p.truth(), &spec.seed_slices, spec.seed_stride);
    let mut fp = Vec::new();
    for nu in [1.0, 1.5] {
        let cfg = EngineConfig { nu, ..EngineConfig::default() };
        let mut out = Engine::new(&p.volume, &seeds, cfg)
            .and_then(|e| e.run())
            .map_err(|e| e.to_string())?;
        filter_components(&mut out.labels, spec.dims, &out.seeds);
        let n = out
            .labels
            .iter()
            .zip(cores.data())
            .filter(|(l, &c)| c && **l == Label::Foreground)
            .count();
        fp.push(n);
    }
    check(
        fp[0] > 0 && fp[1] < fp[0],
        format!(
            "granule-interior false positives: {} at nu=1, {} at nu=1.5 (of {})",
            fp[0],
            fp[1],
            cores.count()
        ),
    )
}

// ---------------------------------------------------------------- 9

fn determinism(spec_path: &Path) -> Verdict {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for workers in [1, 4, 8] {
        let out = root.path().join(format!("w{workers}"));
        let cfg = RunConfig {
            engine: EngineConfig::default(),
            input: Input::Phantom(spec_path.to_path_buf()),
            init_dir: None,
            out: out.clone(),
            workers,
            strict: false,
            checkpoint: None,
            log_level: log::LevelFilter::Warn,
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| e.to_string())?;
        pool.install(|| execute(&cfg)).map_err(|e| e.to_string())?;
        let mut files: Vec<_> = std::fs::read_dir(&out)
            .map_err(|e| e.to_string())?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.file_name().is_some_and(|n| n != "summary.txt"))
            .collect();
        files.sort();
        let bytes: Vec<(String, Vec<u8>)> = files
            .iter()
            .map(|p| {
                let name = p.file_name().unwrap().to_string_lossy().into_owned();
                (name, std::fs::read(p).unwrap())
            })
            .collect();
        outputs.push(bytes);
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    check(
        same,
        format!(
            "workers 1, 4, 8: {} output files each, identical {same}",
            outputs[0].len()
        ),
    )
}

// ---------------------------------------------------------------- 10

fn component_filtering() -> Verdict {
    let dims = Dims::new(20, 10, 10);
    let mut labels = vec![Label::Background; dims.len()];
    let blob = |labels: &mut Vec<Label>, x0: usize| {
        for z in 3..7 {
            for y in 3..7 {
                for x in x0..x0 + 4 {
                    labels[dims.index(x, y, z)] = Label::Foreground;
                }
            }
        }
    };
    blob(&mut labels, 2);
    blob(&mut labels, 12);
    let seed = dims.index(3, 4, 4);
    let first = filter_components(&mut labels, dims, &[seed]);
    let kept = labels.iter().filter(|&&l| l == Label::Foreground).count();
    let unseeded_gone = labels[dims.index(13, 4, 4)] == Label::Background;
    let snapshot = labels.clone();
    let second = filter_components(&mut labels, dims, &[seed]);
    check(
        first.removed == vec![(2, 64)] && kept == 64 && unseeded_gone && second.removed.is_empty() && labels == snapshot,
        format!(
            "first pass removed {:?}, kept {kept}; second pass removed {:?}",
            first.removed, second.removed
        ),
    )
}

// ---------------------------------------------------------------- report

fn guarded(f: impl FnOnce() -> Verdict) -> Verdict {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(v) => v,
        Err(p) => Err(format!(
            "panicked: {}",
            p.downcast_ref::<String>()
                .map(String::as_str)
                .or_else(|| p.downcast_ref::<&str>().copied())
                .unwrap_or("?")
        )),
    }
}

fn main() {
    let spec_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/branching.phantom");
    let (spec, phantom) = branching();
    let default_run = run_phantom(&phantom, &spec, EngineConfig::default());
    let gated_run = run_phantom(
        &phantom,
        &spec,
        EngineConfig {
            min_grey: 30,
            root_band: (110, 255),
            ..EngineConfig::default()
        },
    );

    let criteria: Vec<Criterion> = vec![
        ("DT oracle equivalence", Box::new(dt_oracle)),
        ("DT linearity", Box::new(dt_linearity)),
        ("histogram incremental equivalence", Box::new(histogram_equivalence)),
        ("curvature on spheres and planes", Box::new(curvature_check)),
        ("data term substitutions", Box::new(speed_substitutions)),
        (
            "end-to-end phantom",
            Box::new(|| end_to_end(default_run.as_ref().map_err(Clone::clone)?, &spec)),
        ),
        ("leak regression", Box::new(leak_regression)),
        (
            "engine invariant suite",
            Box::new(|| {
                let d = default_run.as_ref().map_err(Clone::clone)?;
                let g = gated_run.as_ref().map_err(Clone::clone)?;
                invariant_suite(&[("default", d), ("gated", g)])
            }),
        ),
        ("determinism across workers", Box::new(|| determinism(&spec_path))),
        ("component filtering", Box::new(component_filtering)),
        (
            "metric shape",
            Box::new(|| {
                let r = default_run.as_ref().map_err(Clone::clone)?;
                metric_shape(r, EngineConfig::default().min_active)
            }),
        ),
    ];

    let mut failed = 0;
    for (n, (name, f)) in criteria.into_iter().enumerate() {
        let t = Instant::now();
        let v = guarded(f);
        let (tag, detail) = match &v {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        failed += v.is_err() as usize;
        println!(
            "criterion {:>2} {tag} {name}: {detail} [{:.1} s]",
            n + 1,
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of 11 criteria passed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
