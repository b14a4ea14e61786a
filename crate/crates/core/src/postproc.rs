//! Removal of foreground components that do not touch a seed.

use log::{debug, info};

use crate::engine::Label;
use crate::volume::Dims;

/// 26-connected components of the foreground.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentLabeling {
    /// Component id per voxel, `0` for non-foreground; ids start at 1 and
    /// follow the order of each component's lowest voxel index.
    pub ids: Vec<u32>,
    /// `sizes[id - 1]` is the voxel count of component `id`.
    pub sizes: Vec<usize>,
}

impl ComponentLabeling {
    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }
}

/// Union-find whose roots are always the smallest index of their set.
struct Forest {
    parent: Vec<u32>,
}

impl Forest {
    fn find(&mut self, mut i: u32) -> u32 {
        while self.parent[i as usize] != i {
            let p = self.parent[i as usize];
            self.parent[i as usize] = self.parent[p as usize];
            i = p;
        }
        i
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Labels foreground components under 26-connectivity.
pub fn label_components(foreground: &[bool], dims: Dims) -> ComponentLabeling {
    assert_eq!(foreground.len(), dims.len());
    assert!(dims.len() <= u32::MAX as usize, "volume too large for u32 labels");
    let mut forest = Forest {
        parent: (0..dims.len() as u32).collect(),
    };
    // Half of the 26 neighbours: the ones already visited in scan order.
    let back: Vec<(i64, i64, i64)> = (-1..=1)
        .flat_map(|dz| (-1..=1).flat_map(move |dy| (-1..=1).map(move |dx| (dx, dy, dz))))
        .filter(|&(dx, dy, dz)| (dz, dy, dx) < (0, 0, 0))
        .collect();
    for z in 0..dims.nz {
        for y in 0..dims.ny {
            for x in 0..dims.nx {
                let i = dims.index(x, y, z);
                if !foreground[i] {
                    continue;
                }
                for &(dx, dy, dz) in &back {
                    let (nx, ny, nz) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
                    if dims.contains(nx, ny, nz) {
                        let j = dims.index(nx as usize, ny as usize, nz as usize);
                        if foreground[j] {
                            forest.union(i as u32, j as u32);
                        }
                    }
                }
            }
        }
    }
    let mut ids = vec![0u32; dims.len()];
    let mut sizes = Vec::new();
    for i in 0..dims.len() {
        if !foreground[i] {
            continue;
        }
        let root = forest.find(i as u32) as usize;
        if root == i {
            sizes.push(0);
            ids[i] = sizes.len() as u32;
        } else {
            ids[i] = ids[root];
        }
        sizes[ids[i] as usize - 1] += 1;
    }
    ComponentLabeling { ids, sizes }
}

/// Result of [`filter_components`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FilterReport {
    pub components: usize,
    /// `(id, size)` of every dropped component.
    pub removed: Vec<(u32, usize)>,
}

/// Keeps the foreground components containing a seed; all other foreground
/// voxels become background.
pub fn filter_components(labels: &mut [Label], dims: Dims, seeds: &[usize]) -> FilterReport {
    let fg: Vec<bool> = labels.iter().map(|&l| l == Label::Foreground).collect();
    let comps = label_components(&fg, dims);
    let mut keep = vec![false; comps.len() + 1];
    for &s in seeds {
        keep[comps.ids[s] as usize] = true;
    }
    for (l, &id) in labels.iter_mut().zip(&comps.ids) {
        if id != 0 && !keep[id as usize] {
            *l = Label::Background;
        }
    }
    let removed: Vec<(u32, usize)> = comps
        .sizes
        .iter()
        .enumerate()
        .map(|(k, &size)| (k as u32 + 1, size))
        .filter(|&(id, _)| !keep[id as usize])
        .collect();
    for &(id, size) in &removed {
        debug!("removed component {id} ({size} voxels)");
    }
    if !removed.is_empty() {
        let voxels: usize = removed.iter().map(|r| r.1).sum();
        info!("removed {} unseeded components ({voxels} voxels)", removed.len());
    }
    FilterReport {
        components: comps.len(),
        removed,
    }
}
