//! Brillouin-zone grid conventions.
//!
//! Momenta live on an `L x L` grid with `k = -pi + 2 pi (i + 1) / L` for
//! array index `i = 0 .. L-1`, i.e. `k` in `(-pi, pi]` with both the zone
//! center and the zone corner `(pi, pi)` on the grid.

use std::f64::consts::{PI, TAU};

/// Default lattice size used throughout.
pub const DEFAULT_L: usize = 40;

/// Momentum value for grid index `i` on an `L`-site axis.
pub fn momentum(i: usize, l: usize) -> f64 {
    debug_assert!(i < l);
    -PI + TAU * (i as f64 + 1.0) / l as f64
}

/// Wrap a (possibly negative) index onto the periodic axis.
pub fn wrap(i: isize, l: usize) -> usize {
    i.rem_euclid(l as isize) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_covers_half_open_zone() {
        let l = 40;
        assert!((momentum(l - 1, l) - PI).abs() < 1e-15);
        assert!(momentum(0, l) > -PI);
        // zone center and corner are grid points
        assert_eq!(momentum(l / 2 - 1, l), 0.0);
        let corner = momentum(l - 1, l);
        assert!((corner - PI).abs() < 1e-15);
    }

    #[test]
    fn wrap_is_periodic() {
        assert_eq!(wrap(-1, 40), 39);
        assert_eq!(wrap(40, 40), 0);
        assert_eq!(wrap(79, 40), 39);
        assert_eq!(wrap(5, 40), 5);
    }
}
