//! Mean curvature of the level sets of `phi` by differences of normals.
//!
//! Normals are evaluated on the six faces of a voxel's cell. On the face
//! between `x` and `x + e_a` the `a` component of the gradient is a one-sided
//! difference and the two tangential components are averages of central
//! differences on both sides of the face. The curvature is the discrete
//! divergence `sum_a n_a(x + e_a / 2) - n_a(x - e_a / 2)`.

use crate::volume::Dims;

/// Gradient magnitudes below this are treated as this.
const GRAD_EPS: f64 = 1e-8;

/// Curvature at `(x, y, z)`; samples outside the volume are clamped to the
/// nearest edge voxel.
pub fn curvature(phi: &[f32], dims: Dims, x: usize, y: usize, z: usize) -> f64 {
    let mut n = [[[0f64; 3]; 3]; 3];
    let clamp = |c: usize, d: i64, len: usize| (c as i64 + d).clamp(0, len as i64 - 1) as usize;
    for (dz, plane) in n.iter_mut().enumerate() {
        let zz = clamp(z, dz as i64 - 1, dims.nz);
        for (dy, row) in plane.iter_mut().enumerate() {
            let yy = clamp(y, dy as i64 - 1, dims.ny);
            let base = dims.index(0, yy, zz);
            for (dx, v) in row.iter_mut().enumerate() {
                *v = phi[base + clamp(x, dx as i64 - 1, dims.nx)] as f64;
            }
        }
    }
    curvature_of_patch(&n)
}

/// Curvature at the centre of a 3x3x3 patch indexed `[z][y][x]`.
pub fn curvature_of_patch(p: &[[[f64; 3]; 3]; 3]) -> f64 {
    let at = |o: [i64; 3]| p[(o[2] + 1) as usize][(o[1] + 1) as usize][(o[0] + 1) as usize];
    let mut k = 0.0;
    for axis in 0..3 {
        for side in [1i64, -1] {
            let mut e = [0i64; 3];
            e[axis] = side;
            let mut grad = [0f64; 3];
            grad[axis] = (at(e) - at([0, 0, 0])) * side as f64;
            for (o, g) in grad.iter_mut().enumerate() {
                if o == axis {
                    continue;
                }
                let mut t = [0i64; 3];
                t[o] = 1;
                let plus = at(t) + at(add(e, t));
                t[o] = -1;
                let minus = at(t) + at(add(e, t));
                *g = (plus - minus) / 4.0;
            }
            let norm = (grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2])
                .sqrt()
                .max(GRAD_EPS);
            k += side as f64 * grad[axis] / norm;
        }
    }
    k
}

fn add(a: [i64; 3], b: [i64; 3]) -> [i64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}
