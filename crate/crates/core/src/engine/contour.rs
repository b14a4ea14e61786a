//! Discrete contour: foreground voxels with a 6-neighbour outside the foreground.

use crate::grid::OccupancyGrid;
use crate::volume::Dims;

use super::Label;

/// In-bounds 6-neighbours of a voxel.
#[inline]
pub(crate) fn face_neighbors(dims: Dims, idx: usize) -> impl Iterator<Item = usize> {
    let [x, y, z] = dims.coords(idx);
    let sx = 1;
    let sy = dims.nx;
    let sz = dims.nx * dims.ny;
    [
        (x > 0).then(|| idx - sx),
        (x + 1 < dims.nx).then(|| idx + sx),
        (y > 0).then(|| idx - sy),
        (y + 1 < dims.ny).then(|| idx + sy),
        (z > 0).then(|| idx - sz),
        (z + 1 < dims.nz).then(|| idx + sz),
    ]
    .into_iter()
    .flatten()
}

#[inline]
pub(crate) fn is_contour(labels: &[Label], dims: Dims, idx: usize) -> bool {
    labels[idx] == Label::Foreground
        && face_neighbors(dims, idx).any(|n| labels[n] != Label::Foreground)
}

/// All contour voxels, ascending. Neighbours outside the volume do not count.
pub fn locate_contour(labels: &[Label], dims: Dims) -> Vec<usize> {
    (0..labels.len())
        .filter(|&i| is_contour(labels, dims, i))
        .collect()
}

/// Splits a contour into its active part (`count <= t`) and static part.
pub fn split_contour(contour: &[usize], counts: &[u16], max_count: u32) -> (Vec<usize>, Vec<usize>) {
    contour
        .iter()
        .partition(|&&i| u32::from(counts[i]) <= max_count)
}

/// Cubes holding an active contour voxel, plus their 26 neighbours.
pub fn mark_active_grid(active: &[usize], dims: Dims, cube: usize) -> OccupancyGrid {
    let mut grid = OccupancyGrid::new(dims, cube);
    for &i in active {
        grid.mark_with_neighbors(i);
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels_with(dims: Dims, fg: impl IntoIterator<Item = usize>) -> Vec<Label> {
        let mut l = vec![Label::Background; dims.len()];
        for i in fg {
            l[i] = Label::Foreground;
        }
        l
    }

    #[test]
    fn isolated_voxel_is_its_own_contour() {
        let d = Dims::new(5, 5, 5);
        let l = labels_with(d, [d.index(2, 2, 2)]);
        assert_eq!(locate_contour(&l, d), vec![d.index(2, 2, 2)]);
    }

    #[test]
    fn solid_block_contour_is_its_shell() {
        let d = Dims::new(7, 7, 7);
        let block: Vec<usize> = (2..5)
            .flat_map(|z| (2..5).flat_map(move |y| (2..5).map(move |x| d.index(x, y, z))))
            .collect();
        let c = locate_contour(&labels_with(d, block), d);
        assert_eq!(c.len(), 26);
        assert!(!c.contains(&d.index(3, 3, 3)));
    }

    #[test]
    fn empty_foreground_has_no_contour() {
        let d = Dims::new(4, 4, 4);
        assert!(locate_contour(&labels_with(d, []), d).is_empty());
    }

    #[test]
    fn split_by_count() {
        let counts = [1u16, 2, 1, 0];
        let (a, s) = split_contour(&[0, 1, 2], &counts, 1);
        assert_eq!((a, s), (vec![0, 2], vec![1]));
        let (a, s) = split_contour(&[0, 1, 2], &counts, 0);
        assert!(a.is_empty());
        assert_eq!(s.len(), 3);
    }

    #[test]
    fn active_grid_marking() {
        let d = Dims::new(40, 40, 40);
        assert_eq!(mark_active_grid(&[d.index(15, 15, 15)], d, 10).count(), 27);
        assert_eq!(mark_active_grid(&[d.index(1, 1, 1)], d, 10).count(), 8);
        assert_eq!(mark_active_grid(&[], d, 10).count(), 0);
    }
}
