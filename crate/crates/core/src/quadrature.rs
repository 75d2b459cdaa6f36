//! Symmetric Gauss rules on triangles, in barycentric coordinates with
//! weights summing to one (multiply by the element area).

/// Degree-2, three points.
pub const DEGREE2: [([f64; 3], f64); 3] = [
    ([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0], 1.0 / 3.0),
];

const A4: f64 = 0.445_948_490_915_964_886_32;
const W4A: f64 = 0.223_381_589_678_011_465_70;
const B4: f64 = 0.091_576_213_509_770_743_46;
const W4B: f64 = 0.109_951_743_655_321_867_64;

/// Degree-4, six points.
pub const DEGREE4: [([f64; 3], f64); 6] = [
    ([A4, A4, 1.0 - 2.0 * A4], W4A),
    ([A4, 1.0 - 2.0 * A4, A4], W4A),
    ([1.0 - 2.0 * A4, A4, A4], W4A),
    ([B4, B4, 1.0 - 2.0 * B4], W4B),
    ([B4, 1.0 - 2.0 * B4, B4], W4B),
    ([1.0 - 2.0 * B4, B4, B4], W4B),
];

/// Value of the P1 interpolant with nodal values `v` at barycentric point `l`.
#[inline]
pub fn interpolate(l: &[f64; 3], v: [f64; 3]) -> f64 {
    l[0] * v[0] + l[1] * v[1] + l[2] * v[2]
}
