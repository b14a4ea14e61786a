//! Synthetic ground truth: polyline tubes and optional granules in a noisy
//! medium.
//!
//! Every voxel belongs to one [`Material`]. Tubes win over granules and
//! granules win over the medium. Greylevels are drawn independently per
//! voxel from the material's normal distribution, rounded and clamped to the
//! bit depth. Each z-slice has its own RNG stream, so output depends only on
//! the `PhantomSpec`, including its RNG seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kv;
use crate::volume::{BitDepth, Dims, Mask, Volume};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassDist {
    pub mu: f64,
    pub sigma: f64,
}

/// A polyline swept by a ball. Branches share control points.
#[derive(Clone, Debug, PartialEq)]
pub struct Tube {
    pub points: Vec<[f64; 3]>,
    pub radius: f64,
}

/// A solid sphere. `core` and `rim` override the field's mean greylevels for
/// this granule only.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Granule {
    pub center: [f64; 3],
    pub radius: f64,
    pub core: Option<f64>,
    pub rim: Option<f64>,
}

impl Granule {
    pub fn new(center: [f64; 3], radius: f64) -> Self {
        Granule { center, radius, core: None, rim: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GranuleField {
    /// Placed at these positions.
    pub explicit: Vec<Granule>,
    /// Plus this many at random positions.
    pub count: usize,
    pub radius_range: (f64, f64),
    pub grey: ClassDist,
    /// Mean greylevel of a 2-voxel shell; the shell uses `grey.sigma`.
    /// Granules without a rim mean of their own get one only if this is set.
    pub rim: Option<f64>,
}

impl Default for GranuleField {
    fn default() -> Self {
        GranuleField {
            explicit: Vec::new(),
            count: 0,
            radius_range: (3.0, 6.0),
            grey: ClassDist { mu: 0.0, sigma: 0.0 },
            rim: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhantomSpec {
    pub dims: Dims,
    pub depth: BitDepth,
    pub tubes: Vec<Tube>,
    pub medium: ClassDist,
    pub root: ClassDist,
    pub granules: GranuleField,
    pub seed: u64,
    /// z-slices used for self-seeding.
    pub seed_slices: Vec<usize>,
    /// Keep every n-th tube voxel on a seed slice.
    pub seed_stride: usize,
}

/// Material of a voxel; granule variants carry the granule's index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Material {
    Medium,
    Root,
    GranuleCore(u32),
    GranuleRim(u32),
}

#[derive(Clone, Debug)]
pub struct Phantom {
    pub volume: Volume,
    pub materials: Vec<Material>,
}

impl Phantom {
    fn mask_where(&self, f: impl Fn(Material) -> bool) -> Mask {
        Mask::from_vec(self.volume.dims(), self.materials.iter().map(|&m| f(m)).collect())
            .expect("materials sized from dims")
    }

    /// Ground-truth foreground.
    pub fn truth(&self) -> Mask {
        self.mask_where(|m| m == Material::Root)
    }

    /// Interior (non-rim) voxels of all granules.
    pub fn granule_cores(&self) -> Mask {
        self.mask_where(|m| matches!(m, Material::GranuleCore(_)))
    }

    /// Interior voxels of granule `id`.
    pub fn granule_core(&self, id: u32) -> Mask {
        self.mask_where(|m| m == Material::GranuleCore(id))
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(Error::Config("phantom dims must be non-zero".into()));
        }
        for t in &self.tubes {
            if t.points.is_empty() {
                return Err(Error::Config("tube without control points".into()));
            }
            if t.radius < 1.0 {
                return Err(Error::Config(format!("tube radius {} is below 1", t.radius)));
            }
        }
        let (lo, hi) = self.granules.radius_range;
        if self.granules.count > 0 && !(lo > 0.0 && lo <= hi) {
            return Err(Error::Config(format!("bad granule radius range {lo}..{hi}")));
        }
        for d in [self.medium, self.root, self.granules.grey] {
            if d.sigma < 0.0 || !d.mu.is_finite() {
                return Err(Error::Config(format!("bad class distribution {d:?}")));
            }
        }
        if self.seed_stride == 0 {
            return Err(Error::Config("seed_stride must be at least 1".into()));
        }
        Ok(())
    }

    /// Reads a spec from `key = value` lines.
    ///
    /// ```text
    /// dims = 200,200,200
    /// depth = 8
    /// seed = 7
    /// medium = 80,20          # mu,sigma
    /// root = 180,20
    /// tube = 6 : 100,100,0 ; 100,100,199     # radius : points
    /// granule = 60,60,60,8                    # x,y,z,radius[,core[,rim]]
    /// granule = 30,40,50,6,140,200
    /// granule_count = 20
    /// granule_radius = 3,6
    /// granule_grey = 150,20
    /// granule_rim = 220
    /// seed_slices = 40,100,160
    /// seed_stride = 2
    /// ```
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = PhantomSpec {
            dims: Dims::new(0, 0, 0),
            depth: BitDepth::Eight,
            tubes: Vec::new(),
            medium: ClassDist { mu: 80.0, sigma: 20.0 },
            root: ClassDist { mu: 180.0, sigma: 20.0 },
            granules: GranuleField::default(),
            seed: 0,
            seed_slices: Vec::new(),
            seed_stride: 1,
        };
        let dist = |e: &kv::Entry| -> Result<ClassDist> {
            let v: Vec<f64> = e.list(2)?;
            Ok(ClassDist { mu: v[0], sigma: v[1] })
        };
        for e in kv::parse(text)? {
            match e.key.as_str() {
                "dims" => {
                    let d: Vec<usize> = e.list(3)?;
                    spec.dims = Dims::new(d[0], d[1], d[2]);
                }
                "depth" => spec.depth = BitDepth::from_bits(e.parse()?).map_err(|x| e.err(x))?,
                "seed" => spec.seed = e.parse()?,
                "medium" => spec.medium = dist(&e)?,
                "root" => spec.root = dist(&e)?,
                "tube" => spec.tubes.push(parse_tube(&e.value).map_err(|x| e.err(x))?),
                "granule" => {
                    let v: Vec<f64> = e.list(0)?;
                    if !(4..=6).contains(&v.len()) {
                        return Err(e.err("expected x,y,z,radius[,core[,rim]]"));
                    }
                    spec.granules.explicit.push(Granule {
                        center: [v[0], v[1], v[2]],
                        radius: v[3],
                        core: v.get(4).copied(),
                        rim: v.get(5).copied(),
                    });
                }
                "granule_count" => spec.granules.count = e.parse()?,
                "granule_radius" => {
                    let v: Vec<f64> = e.list(2)?;
                    spec.granules.radius_range = (v[0], v[1]);
                }
                "granule_grey" => spec.granules.grey = dist(&e)?,
                "granule_rim" => spec.granules.rim = Some(e.parse()?),
                "seed_slices" => spec.seed_slices = e.list(0)?,
                "seed_stride" => spec.seed_stride = e.parse()?,
                _ => return Err(e.err("unknown phantom key")),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn parse_tube(s: &str) -> std::result::Result<Tube, String> {
    let (r, pts) = s
        .split_once(':')
        .ok_or_else(|| "expected `radius : x,y,z ; x,y,z ...`".to_string())?;
    let radius = kv::parse_value(r)?;
    let points = pts
        .split(';')
        .map(|p| kv::parse_list::<f64>(p, 3).map(|v| [v[0], v[1], v[2]]))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(Tube { points, radius })
}

/// Distance from `p` to the segment `a`-`b`.
pub fn point_segment_distance(p: [f64; 3], a: [f64; 3], b: [f64; 3]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let ap = [p[0] - a[0], p[1] - a[1], p[2] - a[2]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
    let t = if len2 == 0.0 {
        0.0
    } else {
        ((ap[0] * ab[0] + ap[1] * ab[1] + ap[2] * ab[2]) / len2).clamp(0.0, 1.0)
    };
    let d = [ap[0] - t * ab[0], ap[1] - t * ab[1], ap[2] - t * ab[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Voxel index ranges of the box `[lo - r, hi + r]`, clipped to the volume.
fn voxel_box(dims: Dims, lo: [f64; 3], hi: [f64; 3], r: f64) -> [std::ops::Range<usize>; 3] {
    let ext = dims.as_array();
    std::array::from_fn(|a| {
        let from = (lo[a] - r).floor().max(0.0) as usize;
        let to = ((hi[a] + r).ceil() + 1.0).clamp(0.0, ext[a] as f64) as usize;
        from.min(to)..to
    })
}

fn paint_tube(materials: &mut [Material], dims: Dims, tube: &Tube) {
    let segments: Vec<([f64; 3], [f64; 3])> = if tube.points.len() == 1 {
        vec![(tube.points[0], tube.points[0])]
    } else {
        tube.points.windows(2).map(|w| (w[0], w[1])).collect()
    };
    for (a, b) in segments {
        let lo = std::array::from_fn(|k| a[k].min(b[k]));
        let hi = std::array::from_fn(|k| a[k].max(b[k]));
        let [xs, ys, zs] = voxel_box(dims, lo, hi, tube.radius);
        for z in zs {
            for y in ys.clone() {
                for x in xs.clone() {
                    let p = [x as f64, y as f64, z as f64];
                    if point_segment_distance(p, a, b) <= tube.radius {
                        materials[dims.index(x, y, z)] = Material::Root;
                    }
                }
            }
        }
    }
}

fn paint_granule(materials: &mut [Material], dims: Dims, id: u32, g: &Granule, rim: bool) {
    let [xs, ys, zs] = voxel_box(dims, g.center, g.center, g.radius);
    for z in zs {
        for y in ys.clone() {
            for x in xs.clone() {
                let i = dims.index(x, y, z);
                if materials[i] == Material::Root {
                    continue;
                }
                let p = [x as f64, y as f64, z as f64];
                let d = point_segment_distance(p, g.center, g.center);
                if d <= g.radius {
                    materials[i] = if rim && d > g.radius - 2.0 {
                        Material::GranuleRim(id)
                    } else {
                        Material::GranuleCore(id)
                    };
                }
            }
        }
    }
}

/// Builds the phantom volume and its material map.
pub fn generate(spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    let dims = spec.dims;
    let mut materials = vec![Material::Medium; dims.len()];

    let mut granules = spec.granules.explicit.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (rlo, rhi) = spec.granules.radius_range;
    for _ in 0..spec.granules.count {
        let center = [
            rng.random_range(0.0..dims.nx as f64),
            rng.random_range(0.0..dims.ny as f64),
            rng.random_range(0.0..dims.nz as f64),
        ];
        let radius = if rhi > rlo { rng.random_range(rlo..=rhi) } else { rlo };
        granules.push(Granule::new(center, radius));
    }
    for t in &spec.tubes {
        paint_tube(&mut materials, dims, t);
    }
    for (id, g) in granules.iter().enumerate() {
        let rim = g.rim.is_some() || spec.granules.rim.is_some();
        paint_granule(&mut materials, dims, id as u32, g, rim);
    }

    let max = spec.depth.max_value() as f64;
    let field = &spec.granules;
    let dist = |m: Material| match m {
        Material::Medium => spec.medium,
        Material::Root => spec.root,
        Material::GranuleCore(id) => ClassDist {
            mu: granules[id as usize].core.unwrap_or(field.grey.mu),
            sigma: field.grey.sigma,
        },
        Material::GranuleRim(id) => ClassDist {
            mu: granules[id as usize].rim.or(field.rim).unwrap_or(field.grey.mu),
            sigma: field.grey.sigma,
        },
    };
    let mut data = vec![0u16; dims.len()];
    data.par_chunks_mut(dims.slice_len())
        .zip(materials.par_chunks(dims.slice_len()))
        .enumerate()
        .for_each(|(z, (out, mats))| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(z as u64 + 1);
            for (g, &m) in out.iter_mut().zip(mats) {
                let d = dist(m);
                let z: f64 = StandardNormal.sample(&mut rng);
                *g = (d.mu + d.sigma * z).round().clamp(0.0, max) as u16;
            }
        });
    Ok(Phantom {
        volume: Volume::new(dims, spec.depth, data)?,
        materials,
    })
}

/// Sparse marks: every `stride`-th foreground voxel (scan order) on each
/// listed z-slice.
pub fn sample_seeds(truth: &Mask, slices: &[usize], stride: usize) -> Vec<usize> {
    let dims = truth.dims();
    let stride = stride.max(1);
    let mut seeds: Vec<usize> = slices
        .iter()
        .filter(|&&z| z < dims.nz)
        .flat_map(|&z| {
            let base = z * dims.slice_len();
            (base..base + dims.slice_len())
                .filter(|&i| truth.data()[i])
                .step_by(stride)
        })
        .collect();
    seeds.sort_unstable();
    seeds.dedup();
    seeds
}

/// Dice overlap `2|A and B| / (|A| + |B|)`; 1 when both are empty.
pub fn dice(a: &Mask, b: &Mask) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::Dimensions(format!(
            "dice of masks {} and {}",
            a.dims(),
            b.dims()
        )));
    }
    let (mut both, mut na, mut nb) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.data().iter().zip(b.data()) {
        na += x as usize;
        nb += y as usize;
        both += (x && y) as usize;
    }
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * both as f64 / (na + nb) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(dims: Dims) -> PhantomSpec {
        PhantomSpec {
            dims,
            depth: BitDepth::Eight,
            tubes: vec![],
            medium: ClassDist { mu: 50.0, sigma: 0.0 },
            root: ClassDist { mu: 200.0, sigma: 0.0 },
            granules: GranuleField::default(),
            seed: 1,
            seed_slices: vec![],
            seed_stride: 1,
        }
    }

    #[test]
    fn noiseless_volume_matches_mask() {
        let mut s = spec(Dims::new(20, 20, 20));
        s.tubes.push(Tube {
            points: vec![[2.0, 3.0, 4.0], [15.0, 12.0, 17.0]],
            radius: 2.5,
        });
        let p = generate(&s).unwrap();
        let truth = p.truth();
        assert!(truth.count() > 0);
        for (i, &g) in p.volume.data().iter().enumerate() {
            assert_eq!(g, if truth.data()[i] { 200 } else { 50 });
        }
    }

    #[test]
    fn straight_tube_matches_cylinder_count() {
        let dims = Dims::new(20, 20, 30);
        let mut s = spec(dims);
        let (a, b) = ([10.0, 10.0, 5.0], [10.0, 10.0, 24.0]);
        s.tubes.push(Tube { points: vec![a, b], radius: 3.0 });
        let p = generate(&s).unwrap();
        let brute = (0..dims.len())
            .filter(|&i| {
                let [x, y, z] = dims.coords(i);
                point_segment_distance([x as f64, y as f64, z as f64], a, b) <= 3.0
            })
            .count();
        assert_eq!(p.truth().count(), brute);
    }

    #[test]
    fn single_point_tube_is_a_ball() {
        let mut s = spec(Dims::new(11, 11, 11));
        s.tubes.push(Tube { points: vec![[5.0, 5.0, 5.0]], radius: 1.0 });
        assert_eq!(generate(&s).unwrap().truth().count(), 7);
    }

    #[test]
    fn same_seed_same_volume() {
        let mut s = spec(Dims::new(16, 16, 16));
        s.medium.sigma = 12.0;
        s.root.sigma = 9.0;
        s.tubes.push(Tube { points: vec![[0.0, 8.0, 8.0], [15.0, 8.0, 8.0]], radius: 2.0 });
        s.granules.count = 3;
        s.granules.grey = ClassDist { mu: 150.0, sigma: 5.0 };
        let a = generate(&s).unwrap();
        let b = generate(&s).unwrap();
        assert_eq!(a.volume, b.volume);
        assert_eq!(a.materials, b.materials);
        s.seed = 2;
        assert_ne!(generate(&s).unwrap().volume, a.volume);
    }

    #[test]
    fn rim_is_two_voxels_thick() {
        let mut s = spec(Dims::new(21, 21, 21));
        s.granules.explicit.push(Granule::new([10.0, 10.0, 10.0], 6.0));
        s.granules.grey = ClassDist { mu: 120.0, sigma: 0.0 };
        s.granules.rim = Some(230.0);
        let p = generate(&s).unwrap();
        let d = s.dims;
        assert_eq!(p.materials[d.index(10, 10, 10)], Material::GranuleCore(0));
        assert_eq!(p.materials[d.index(14, 10, 10)], Material::GranuleCore(0));
        assert_eq!(p.materials[d.index(15, 10, 10)], Material::GranuleRim(0));
        assert_eq!(p.materials[d.index(16, 10, 10)], Material::GranuleRim(0));
        assert_eq!(p.materials[d.index(17, 10, 10)], Material::Medium);
        assert_eq!(p.volume.get(16, 10, 10), 230);
    }

    #[test]
    fn per_granule_means_override_the_field() {
        let mut s = spec(Dims::new(30, 12, 12));
        s.granules.grey = ClassDist { mu: 120.0, sigma: 0.0 };
        s.granules.explicit.push(Granule::new([6.0, 6.0, 6.0], 4.0));
        s.granules.explicit.push(Granule {
            core: Some(140.0),
            rim: Some(210.0),
            ..Granule::new([20.0, 6.0, 6.0], 4.0)
        });
        let p = generate(&s).unwrap();
        let d = s.dims;
        assert_eq!(p.volume.get(6, 6, 6), 120);
        assert_eq!(p.volume.get(9, 6, 6), 120);
        assert_eq!(p.volume.get(20, 6, 6), 140);
        assert_eq!(p.volume.get(23, 6, 6), 210);
        assert_eq!(p.materials[d.index(23, 6, 6)], Material::GranuleRim(1));
        assert_eq!(p.granule_core(1).count() + p.granule_core(0).count(), p.granule_cores().count());
    }

    #[test]
    fn dice_values() {
        let d = Dims::new(10, 10, 2);
        let mut a = Mask::new(d);
        let mut b = Mask::new(d);
        assert_eq!(dice(&a, &b).unwrap(), 1.0);
        for i in 0..100 {
            a.data_mut()[i] = true;
        }
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        for i in 100..200 {
            b.data_mut()[i] = true;
        }
        assert_eq!(dice(&a, &b).unwrap(), 0.0);
        let mut c = Mask::new(d);
        for i in 20..120 {
            c.data_mut()[i] = true;
        }
        assert!((dice(&a, &c).unwrap() - 0.8).abs() < 1e-15);
        assert!(dice(&a, &Mask::new(Dims::new(1, 1, 1))).is_err());
    }

    #[test]
    fn self_seeding_takes_every_nth() {
        let d = Dims::new(4, 4, 3);
        let m = Mask::from_vec(d, vec![true; d.len()]).unwrap();
        let s = sample_seeds(&m, &[1, 9], 5);
        assert_eq!(s, vec![16, 21, 26, 31]);
    }

    #[test]
    fn spec_parsing() {
        let text = "dims = 30,20,10\nseed = 3\nroot = 190, 15\n\
                    tube = 2.5 : 1,2,3 ; 4,5,6 ; 7,8,9\ngranule = 5,5,5,2\ngranule = 9,9,9,3,120,200\n\
                    granule_rim = 240\nseed_slices = 2,5\nseed_stride = 4\n";
        let s = PhantomSpec::parse(text).unwrap();
        assert_eq!(s.dims, Dims::new(30, 20, 10));
        assert_eq!(s.tubes[0].points.len(), 3);
        assert_eq!(s.tubes[0].radius, 2.5);
        assert_eq!(s.root, ClassDist { mu: 190.0, sigma: 15.0 });
        assert_eq!(s.granules.explicit.len(), 2);
        assert_eq!((s.granules.explicit[1].core, s.granules.explicit[1].rim), (Some(120.0), Some(200.0)));
        assert!(PhantomSpec::parse("dims = 3,3,3\ngranule = 1,1,1\n").is_err());
        assert_eq!(s.granules.rim, Some(240.0));
        assert_eq!((s.seed_slices.clone(), s.seed_stride), (vec![2, 5], 4));
        assert!(PhantomSpec::parse("dims = 3,3,3\ncolour = red\n").is_err());
        assert!(PhantomSpec::parse("dims = 3,3,3\ntube = 0.5 : 1,1,1\n").is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(16))]

            #[test]
            fn dice_is_symmetric(a in proptest::collection::vec(any::<bool>(), 64),
                                 b in proptest::collection::vec(any::<bool>(), 64)) {
                let d = Dims::new(4, 4, 4);
                let a = Mask::from_vec(d, a).unwrap();
                let b = Mask::from_vec(d, b).unwrap();
                prop_assert_eq!(dice(&a, &b).unwrap(), dice(&b, &a).unwrap());
            }

            #[test]
            fn translation_moves_the_mask(shift in 0usize..6, r in 1.0f64..3.0) {
                let dims = Dims::new(24, 14, 14);
                let mut s = spec(dims);
                s.tubes.push(Tube { points: vec![[4.0, 7.0, 7.0], [12.0, 6.0, 8.0]], radius: r });
                let base = generate(&s).unwrap().truth();
                for p in s.tubes[0].points.iter_mut() { p[0] += shift as f64; }
                let moved = generate(&s).unwrap().truth();
                for z in 0..dims.nz { for y in 0..dims.ny { for x in 0..dims.nx - shift {
                    prop_assert_eq!(base.get(x, y, z), moved.get(x + shift, y, z));
                }}}
            }
        }
    }
}
