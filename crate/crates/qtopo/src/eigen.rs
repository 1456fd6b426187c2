//! Gauge-fixed two-band eigenstates and their quaternion encoding.
//!
//! The Bloch vector `h` fixes a 2x2 Hamiltonian `h . sigma`; the eigenstates
//! below use one analytic gauge for `h3 >= 0` and another for `h3 < 0`, which
//! keeps one spinor component real in each region. The phase mismatch along
//! the `h3 = 0` line is what the map built on top of this module detects.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quaternion::Quaternion;

/// Two-component spinor amplitudes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spinor {
    pub alpha: Complex64,
    pub beta: Complex64,
}

impl Spinor {
    pub fn new(alpha: Complex64, beta: Complex64) -> Self {
        Self { alpha, beta }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.alpha.norm_sqr() + self.beta.norm_sqr()
    }

    pub fn inner(&self, other: &Spinor) -> Complex64 {
        self.alpha.conj() * other.alpha + self.beta.conj() * other.beta
    }
}

/// Pack spinor amplitudes into quaternion components
/// `(Re a, Im a, Re b, Im b)`.
pub fn spinor_to_quaternion(s: &Spinor) -> Quaternion {
    Quaternion::new(s.alpha.re, s.alpha.im, s.beta.re, s.beta.im)
}

/// Upper- and lower-band eigenstates of `h . sigma` in the fixed gauge.
///
/// At the gauge-singular momenta (`h1 = h2 = 0`) the undetermined spinor is
/// pinned to `(0, 1)` / `(1, 0)` so the encoding stays deterministic there.
pub fn eigenstates(h: [f64; 3]) -> Result<(Spinor, Spinor)> {
    eigenstates_in_region(h, h[2] >= 0.0)
}

/// Eigenstates with the gauge branch fixed externally.
///
/// The two analytic branches belong to the regions of the underlying model,
/// not to the momentary field value: perturbed fields keep the clean model's
/// region split (`upper_region` is that sign), which keeps the encoding a
/// smooth function of the perturbation.
pub fn eigenstates_in_region(h: [f64; 3], upper_region: bool) -> Result<(Spinor, Spinor)> {
    let [h1, h2, h3] = h;
    let norm = (h1 * h1 + h2 * h2 + h3 * h3).sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroField);
    }
    let planar = (h1 * h1 + h2 * h2).sqrt();

    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    if planar <= 1e-9 * norm {
        // spin aligned with the branch axis: pin the undetermined phases
        return Ok(if upper_region == (h3 >= 0.0) {
            if upper_region {
                (Spinor::new(one, zero), Spinor::new(zero, one))
            } else {
                (Spinor::new(zero, one), Spinor::new(one, zero))
            }
        } else if upper_region {
            // branch formulas degenerate when the spin opposes the region axis
            (Spinor::new(zero, one), Spinor::new(one, zero))
        } else {
            (Spinor::new(one, zero), Spinor::new(zero, one))
        });
    }

    if upper_region {
        // the shared denominator stays away from zero for h3 >= 0
        let d = (2.0 * norm * (norm + h3)).sqrt();
        let upper = Spinor::new(
            Complex64::new((norm + h3) / d, 0.0),
            Complex64::new(h1 / d, h2 / d),
        );
        let lower = Spinor::new(
            Complex64::new(-h1 / d, h2 / d),
            Complex64::new((norm + h3) / d, 0.0),
        );
        Ok((upper, lower))
    } else {
        let d = (2.0 * norm * (norm - h3)).sqrt();
        let upper = Spinor::new(
            Complex64::new(h1 / d, -h2 / d),
            Complex64::new((norm - h3) / d, 0.0),
        );
        let lower = Spinor::new(
            Complex64::new((norm - h3) / d, 0.0),
            Complex64::new(-h1 / d, -h2 / d),
        );
        Ok((upper, lower))
    }
}
