//! Coarse boolean grids over `s x s x s` voxel cubes.
//!
//! The engine keeps two of these: the active grid, rebuilt every iteration
//! around the active contour, and the history grid of cubes whose contents
//! have been added to the background statistics.

use std::ops::Range;

use crate::volume::Dims;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OccupancyGrid {
    cube: usize,
    voxels: Dims,
    cells: Dims,
    bits: Vec<bool>,
    set: usize,
}

impl OccupancyGrid {
    /// An all-clear grid with cube edge `cube` covering a volume of `voxels`.
    ///
    /// Panics if `cube` is zero.
    pub fn new(voxels: Dims, cube: usize) -> Self {
        assert!(cube > 0, "cube edge must be positive");
        let cells = Dims::new(
            voxels.nx.div_ceil(cube),
            voxels.ny.div_ceil(cube),
            voxels.nz.div_ceil(cube),
        );
        OccupancyGrid {
            cube,
            voxels,
            cells,
            bits: vec![false; cells.len()],
            set: 0,
        }
    }

    pub fn filled(voxels: Dims, cube: usize) -> Self {
        let mut g = Self::new(voxels, cube);
        g.bits.fill(true);
        g.set = g.bits.len();
        g
    }

    pub fn cube_edge(&self) -> usize {
        self.cube
    }

    /// Grid dimensions in cubes.
    pub fn cells(&self) -> Dims {
        self.cells
    }

    pub fn voxel_dims(&self) -> Dims {
        self.voxels
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Number of set cubes.
    pub fn count(&self) -> usize {
        self.set
    }

    #[inline]
    pub fn get(&self, cell: usize) -> bool {
        self.bits[cell]
    }

    #[inline]
    pub fn get_xyz(&self, cx: usize, cy: usize, cz: usize) -> bool {
        self.bits[self.cells.index(cx, cy, cz)]
    }

    /// Sets a cube; returns true if it was previously clear.
    pub fn set(&mut self, cell: usize) -> bool {
        let fresh = !self.bits[cell];
        if fresh {
            self.bits[cell] = true;
            self.set += 1;
        }
        fresh
    }

    pub fn clear(&mut self) {
        self.bits.fill(false);
        self.set = 0;
    }

    /// Cube containing a voxel (by linear voxel index).
    #[inline]
    pub fn cell_of(&self, voxel: usize) -> usize {
        let [x, y, z] = self.voxels.coords(voxel);
        self.cells
            .index(x / self.cube, y / self.cube, z / self.cube)
    }

    /// Sets the cube of `voxel` and its existing 26 neighbours.
    pub fn mark_with_neighbors(&mut self, voxel: usize) {
        let [cx, cy, cz] = self.cells.coords(self.cell_of(voxel));
        self.mark_cell_with_neighbors(cx, cy, cz);
    }

    fn mark_cell_with_neighbors(&mut self, cx: usize, cy: usize, cz: usize) {
        let c = self.cells;
        for z in cz.saturating_sub(1)..(cz + 2).min(c.nz) {
            for y in cy.saturating_sub(1)..(cy + 2).min(c.ny) {
                for x in cx.saturating_sub(1)..(cx + 2).min(c.nx) {
                    self.set(c.index(x, y, z));
                }
            }
        }
    }

    /// This grid grown by one cube in every direction (26-neighbourhood).
    pub fn dilated(&self) -> OccupancyGrid {
        let mut out = OccupancyGrid::new(self.voxels, self.cube);
        for cell in self.iter_set() {
            let [cx, cy, cz] = self.cells.coords(cell);
            out.mark_cell_with_neighbors(cx, cy, cz);
        }
        out
    }

    /// Set cubes in ascending index order.
    pub fn iter_set(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    /// Voxel ranges `[x, y, z]` covered by a cube, clipped to the volume.
    pub fn voxel_ranges(&self, cell: usize) -> [Range<usize>; 3] {
        let [cx, cy, cz] = self.cells.coords(cell);
        let s = self.cube;
        let v = self.voxels;
        [
            cx * s..((cx + 1) * s).min(v.nx),
            cy * s..((cy + 1) * s).min(v.ny),
            cz * s..((cz + 1) * s).min(v.nz),
        ]
    }

    /// Linear voxel indices of one cube, z-major then y then x.
    pub fn voxels_of(&self, cell: usize) -> impl Iterator<Item = usize> + '_ {
        let [xs, ys, zs] = self.voxel_ranges(cell);
        let v = self.voxels;
        zs.flat_map(move |z| {
            let xs = xs.clone();
            ys.clone()
                .flat_map(move |y| xs.clone().map(move |x| v.index(x, y, z)))
        })
    }

    /// Whether a voxel lies in a set cube.
    #[inline]
    pub fn covers(&self, voxel: usize) -> bool {
        self.bits[self.cell_of(voxel)]
    }
}
