//! The band-resolved quaternion autocorrelation map `F`.
//!
//! For each momentum `p` the map accumulates `q*(k) q(p - k)` over the zone
//! with periodic wrap-around, taking the upper band minus the lower band.
//! The vector part of that sum cancels pairwise (circular convolution
//! commutes), so `F` is real; the direct quadruple loop verifies the
//! cancellation numerically while the production path computes the scalar
//! part as four circular convolutions via FFT per band.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::eigen::{eigenstates_in_region, spinor_to_quaternion};
use crate::error::{Error, Result};
use crate::grid::wrap;
use crate::quaternion::Quaternion;
use crate::spin::{Family, HField, SpinTexture};

/// The two-branch gauge split of the zone, one flag per site
/// (`true` = the branch used where the model's third component is
/// non-negative).
///
/// The split belongs to the underlying model: a perturbed field is encoded
/// in its parent's region so the encoding responds smoothly to the
/// perturbation instead of flickering across the branch boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeRegion(pub Vec<bool>);

impl GaugeRegion {
    pub fn from_field(h: &HField) -> Self {
        GaugeRegion(h.data.iter().map(|v| v[2] >= 0.0).collect())
    }
}

/// Tolerance on the vector part of the full quaternion sum.
pub const VECTOR_RESIDUE_LIMIT: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct FMapMeta {
    pub family: Family,
    pub c: u32,
    pub m: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

/// Real-valued `L x L` map over the zone, physical labeling (the zone center
/// sits at grid index `L/2 - 1` on each axis).
#[derive(Clone, Debug, PartialEq)]
pub struct FMap {
    pub l: usize,
    pub values: Vec<f64>,
    pub meta: FMapMeta,
}

impl FMap {
    #[inline]
    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[ix * self.l + iy]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn with_provenance(mut self, noise_sd: f64, seed: u64) -> Self {
        self.meta.noise_sd = noise_sd;
        self.meta.seed = seed;
        self
    }

    /// Plain CSV, one grid row per line, full decimal precision.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for row in self.values.chunks(self.l) {
            let line = row
                .iter()
                .map(|v| format!("{v:.17e}"))
                .collect::<Vec<_>>()
                .join(",");
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// 8-bit PGM (P5) with affine min-max scaling recorded in the header.
    ///
    /// Maps with negligible spread render uniformly mid-gray.
    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let min = self.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let spread = max - min;
        let flat = spread <= 1e-8;
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(
            out,
            "P5\n# affine min-max scaling: min={min:.17e} max={max:.17e} flat={flat}\n{} {}\n255\n",
            self.l, self.l
        )?;
        let bytes: Vec<u8> = self
            .values
            .iter()
            .map(|&v| {
                if flat {
                    128
                } else {
                    ((v - min) / spread * 255.0).round().clamp(0.0, 255.0) as u8
                }
            })
            .collect();
        out.write_all(&bytes)?;
        Ok(())
    }
}

/// Quaternion encodings of the upper and lower band eigenstates on the
/// grid, self-gauged (the field is its own region reference).
pub fn band_quaternions(h: &HField) -> Result<(Vec<Quaternion>, Vec<Quaternion>)> {
    band_quaternions_in(h, &GaugeRegion::from_field(h))
}

/// Band quaternions with an explicit gauge region.
pub fn band_quaternions_in(
    h: &HField,
    region: &GaugeRegion,
) -> Result<(Vec<Quaternion>, Vec<Quaternion>)> {
    assert_eq!(h.data.len(), region.0.len());
    let mut plus = Vec::with_capacity(h.data.len());
    let mut minus = Vec::with_capacity(h.data.len());
    for (idx, (&hv, &upper)) in h.data.iter().zip(&region.0).enumerate() {
        let (up, dn) = eigenstates_in_region(hv, upper).map_err(|e| match e {
            Error::ZeroField => Error::GapClosed {
                i: idx / h.l,
                j: idx % h.l,
                min_h: 0.0,
            },
            other => other,
        })?;
        plus.push(spinor_to_quaternion(&up));
        minus.push(spinor_to_quaternion(&dn));
    }
    Ok((plus, minus))
}

/// Move the index-space convolution output onto the physical momentum grid.
///
/// With both factors sampled on the `(-pi, pi]` grid, the sum for physical
/// momentum `p` at index `j` lands at index-space position
/// `j + L/2 - 1 (mod L)` per axis; this undoes that offset. Requires even `L`.
fn roll_to_physical<T: Copy + Default>(vals: &[T], l: usize) -> Vec<T> {
    assert!(l % 2 == 0, "physical labeling requires an even grid");
    let off = (l / 2 - 1) as isize;
    let mut out = vec![T::default(); vals.len()];
    for j1 in 0..l {
        let s1 = wrap(j1 as isize + off, l);
        for j2 in 0..l {
            let s2 = wrap(j2 as isize + off, l);
            out[j1 * l + j2] = vals[s1 * l + s2];
        }
    }
    out
}

/// Full quaternion autocorrelation by the direct quadruple loop,
/// physically labeled. The reference path for everything FFT-accelerated.
pub fn autocorr_direct(q: &[Quaternion], l: usize) -> Vec<Quaternion> {
    assert_eq!(q.len(), l * l);
    let conj: Vec<Quaternion> = q.iter().map(|v| v.conj()).collect();
    let mut raw = vec![Quaternion::ZERO; l * l];
    for j1 in 0..l {
        for j2 in 0..l {
            let mut acc = Quaternion::ZERO;
            for i1 in 0..l {
                let d1 = wrap(j1 as isize - i1 as isize, l);
                for i2 in 0..l {
                    let d2 = wrap(j2 as isize - i2 as isize, l);
                    acc = acc + conj[i1 * l + i2] * q[d1 * l + d2];
                }
            }
            raw[j1 * l + j2] = acc;
        }
    }
    roll_to_physical(&raw, l)
}

fn fft2(buf: &mut [Complex64], l: usize, planner: &mut FftPlanner<f64>, inverse: bool) {
    let fft = planner.plan_fft(
        l,
        if inverse {
            rustfft::FftDirection::Inverse
        } else {
            rustfft::FftDirection::Forward
        },
    );
    for row in buf.chunks_exact_mut(l) {
        fft.process(row);
    }
    // columns via transpose, process, transpose back
    let mut t = vec![Complex64::default(); l * l];
    for i in 0..l {
        for j in 0..l {
            t[j * l + i] = buf[i * l + j];
        }
    }
    for row in t.chunks_exact_mut(l) {
        fft.process(row);
    }
    for i in 0..l {
        for j in 0..l {
            buf[i * l + j] = t[j * l + i];
        }
    }
}

/// Scalar part of the quaternion autocorrelation via FFT.
///
/// `Re(q*(k) q(p-k))` is the plain componentwise product sum, so the scalar
/// part of the full map is the sum of four real circular self-convolutions,
/// done here in a single spectral pass.
pub fn autocorr_fft_scalar(q: &[Quaternion], l: usize) -> Vec<f64> {
    assert_eq!(q.len(), l * l);
    let mut planner = FftPlanner::new();
    let mut acc = vec![Complex64::default(); l * l];
    for comp in 0..4 {
        let mut buf: Vec<Complex64> = q
            .iter()
            .map(|v| Complex64::new(v.components()[comp], 0.0))
            .collect();
        fft2(&mut buf, l, &mut planner, false);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b * b;
        }
    }
    fft2(&mut acc, l, &mut planner, true);
    let scale = 1.0 / (l * l) as f64;
    let real: Vec<f64> = acc.iter().map(|v| v.re * scale).collect();
    roll_to_physical(&real, l)
}

fn meta_for(h: &HField) -> FMapMeta {
    FMapMeta {
        family: h.family,
        c: h.c,
        m: h.m,
        noise_sd: 0.0,
        seed: 0,
    }
}

/// Band-difference map via the FFT path, self-gauged.
pub fn f_map(h: &HField) -> Result<FMap> {
    f_map_in(h, &GaugeRegion::from_field(h))
}

/// Band-difference map via the FFT path with an explicit gauge region.
pub fn f_map_in(h: &HField, region: &GaugeRegion) -> Result<FMap> {
    let (plus, minus) = band_quaternions_in(h, region)?;
    let p = autocorr_fft_scalar(&plus, h.l);
    let m = autocorr_fft_scalar(&minus, h.l);
    let values = p.iter().zip(&m).map(|(a, b)| a - b).collect();
    Ok(FMap {
        l: h.l,
        values,
        meta: meta_for(h),
    })
}

/// Band-difference map via the direct loop, returning the largest vector
/// residue of the full quaternion sum. Residues above
/// [`VECTOR_RESIDUE_LIMIT`] fail: the map must be real.
pub fn f_map_direct(h: &HField) -> Result<(FMap, f64)> {
    f_map_direct_in(h, &GaugeRegion::from_field(h))
}

/// Direct-loop map with an explicit gauge region.
pub fn f_map_direct_in(h: &HField, region: &GaugeRegion) -> Result<(FMap, f64)> {
    let (plus, minus) = band_quaternions_in(h, region)?;
    let p = autocorr_direct(&plus, h.l);
    let m = autocorr_direct(&minus, h.l);
    let mut residue = 0.0f64;
    let mut values = Vec::with_capacity(p.len());
    for (a, b) in p.iter().zip(&m) {
        let q = *a - *b;
        let [_, va, vb, vc] = q.components();
        residue = residue.max((va * va + vb * vb + vc * vc).sqrt());
        values.push(q.r);
    }
    if residue >= VECTOR_RESIDUE_LIMIT {
        return Err(Error::VectorResidue(residue));
    }
    Ok((
        FMap {
            l: h.l,
            values,
            meta: meta_for(h),
        },
        residue,
    ))
}

/// Pure-spin encoding of a texture: `(0, n_x, n_y, n_z)` per site.
pub fn pure_spin_quaternions(t: &SpinTexture) -> Vec<Quaternion> {
    t.spins.iter().map(|&s| Quaternion::pure(s)).collect()
}

/// Autocorrelation of the pure-spin encoding.
///
/// This encoding is blind to the sign of the mass parameter, which is the
/// reason the eigenstate encoding exists; it is kept for exactly that
/// comparison.
pub fn f_map_pure_spin(t: &SpinTexture) -> FMap {
    let q = pure_spin_quaternions(t);
    let values = autocorr_fft_scalar(&q, t.l);
    FMap {
        l: t.l,
        values,
        meta: FMapMeta {
            family: t.meta.family,
            c: t.meta.c,
            m: t.meta.m,
            noise_sd: 0.0,
            seed: 0,
        },
    }
}
