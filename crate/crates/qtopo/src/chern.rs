//! Ground-truth lattice Chern number from oriented solid angles.
//!
//! Each plaquette is split into two triangles with a consistent orientation;
//! the signed solid angles then sum to an exact multiple of `4 pi` for any
//! texture whose triangles stay away from degeneracy, so the rounded sum is
//! a reliable integer label and the residual a conditioning diagnostic.

use crate::error::{Error, Result};
use crate::spin::{HField, SpinTexture};

/// Residual beyond which the lattice sum is considered ill-conditioned.
pub const RESIDUAL_LIMIT: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChernMeasurement {
    pub chern: i32,
    /// Distance of the raw sum over `4 pi` from the nearest integer.
    pub residual: f64,
}

#[inline]
fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn triple(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) + a[1] * (b[2] * c[0] - b[0] * c[2])
        + a[2] * (b[0] * c[1] - b[1] * c[0])
}

/// Signed solid angle subtended by three unit vectors, in `(-2 pi, 2 pi)`.
///
/// The numerator keeps the sign of the oriented triple product so that the
/// plaquette sum can integrate to negative totals.
pub fn solid_angle(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> Result<f64> {
    debug_assert!((dot(a, a).sqrt() - 1.0).abs() < 1e-6);
    debug_assert!((dot(b, b).sqrt() - 1.0).abs() < 1e-6);
    debug_assert!((dot(c, c).sqrt() - 1.0).abs() < 1e-6);
    let denom = 1.0 + dot(a, b) + dot(b, c) + dot(c, a);
    if denom.abs() <= 1e-12 {
        return Err(Error::DegenerateTriple { denom });
    }
    Ok(2.0 * triple(a, b, c).atan2(denom))
}

/// Raw lattice sum: total signed solid angle over `4 pi`, with the rounding
/// residual.
///
/// A triple with a vanishing denominator sits on the `±2 pi` ambiguity: it
/// is either genuinely zero-area (coplanar textures such as vortices, where
/// the numerator also vanishes) or a half-wrapped triangle whose true angle
/// is near `±2 pi`. Both count as zero here; in the second case the total
/// is then off by about half a unit and the residual gate rejects it.
pub fn chern_measurement(t: &SpinTexture) -> Result<ChernMeasurement> {
    let l = t.l;
    let mut total = 0.0;
    for ix in 0..l {
        let ix1 = (ix + 1) % l;
        for iy in 0..l {
            let iy1 = (iy + 1) % l;
            // counterclockwise plaquette corners
            let n1 = t.spin(ix, iy);
            let n2 = t.spin(ix1, iy);
            let n3 = t.spin(ix1, iy1);
            let n4 = t.spin(ix, iy1);
            total += solid_angle(n1, n2, n3).unwrap_or(0.0);
            total += solid_angle(n1, n3, n4).unwrap_or(0.0);
        }
    }
    // the occupied band carries minus the winding of the field direction
    let value = -total / (4.0 * std::f64::consts::PI);
    let chern = value.round();
    Ok(ChernMeasurement {
        chern: chern as i32,
        residual: (value - chern).abs(),
    })
}

/// Integer Chern number; errors when the rounding residual is too large.
pub fn chern_number(t: &SpinTexture) -> Result<i32> {
    let m = chern_measurement(t)?;
    if m.residual > RESIDUAL_LIMIT {
        return Err(Error::IllConditioned {
            residual: m.residual,
            limit: RESIDUAL_LIMIT,
        });
    }
    Ok(m.chern)
}

/// Band gap of the two-band model: twice the smallest field magnitude.
pub fn min_gap(h: &HField) -> f64 {
    2.0 * h.min_norm().0
}
