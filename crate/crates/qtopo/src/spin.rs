//! Spin-texture generation: the two-band model field, its normalized
//! textures, vortex/helical/conical/ferromagnet families, component
//! transforms, and the translate/rotate/noise augmentation pipeline.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::chern;
use crate::error::{Error, Result};
use crate::grid::{self, wrap};
use crate::quaternion::Quaternion;
use crate::rng;

/// Sites polluted by the noise augmentation on the default 40x40 grid.
pub const NOISE_SITES: usize = 30;
/// Per-component standard deviation of the site noise.
pub const NOISE_SD: f64 = 0.1 * PI;
/// Fields with `|h|` below this anywhere are treated as gapless.
pub const GAP_EPS: f64 = 1e-9;

const MAX_NOISE_ATTEMPTS: u32 = 100;

/// Texture family, also the tag byte used in dataset files.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Chern,
    VortexYz,
    VortexXz,
    VortexXy,
    Helical,
    Conical,
    Fm,
    FlipZ,
    SwapYz,
}

impl Family {
    pub fn tag(self) -> u8 {
        match self {
            Family::Chern => 0,
            Family::VortexYz => 1,
            Family::VortexXz => 2,
            Family::VortexXy => 3,
            Family::Helical => 4,
            Family::Conical => 5,
            Family::Fm => 6,
            Family::FlipZ => 7,
            Family::SwapYz => 8,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => Family::Chern,
            1 => Family::VortexYz,
            2 => Family::VortexXz,
            3 => Family::VortexXy,
            4 => Family::Helical,
            5 => Family::Conical,
            6 => Family::Fm,
            7 => Family::FlipZ,
            8 => Family::SwapYz,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Chern => "chern",
            Family::VortexYz => "vortex_yz",
            Family::VortexXz => "vortex_xz",
            Family::VortexXy => "vortex_xy",
            Family::Helical => "helical",
            Family::Conical => "conical",
            Family::Fm => "fm",
            Family::FlipZ => "flip_z",
            Family::SwapYz => "swap_yz",
        }
    }
}

/// Vortex plane: which field component of the model is zeroed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VortexPlane {
    Yz,
    Xz,
    Xy,
}

impl VortexPlane {
    pub fn family(self) -> Family {
        match self {
            VortexPlane::Yz => Family::VortexYz,
            VortexPlane::Xz => Family::VortexXz,
            VortexPlane::Xy => Family::VortexXy,
        }
    }

    pub const ALL: [VortexPlane; 3] = [VortexPlane::Yz, VortexPlane::Xz, VortexPlane::Xy];
}

/// Record of the augmentation applied to a texture.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentRecord {
    /// Seed the whole augmentation was derived from.
    pub seed: u64,
    pub shift: (usize, usize),
    pub rotation: Quaternion,
    pub noise_seed: u64,
    pub noise_attempt: u32,
}

/// Texture provenance carried alongside the spin data.
#[derive(Clone, Debug, PartialEq)]
pub struct TextureMeta {
    pub family: Family,
    pub c: u32,
    /// Mass parameter for model families; cone parameter or magnetization
    /// sign for the trivial families.
    pub m: f64,
    /// Chern class of the texture.
    pub label: i32,
    pub augmentation: Option<AugmentRecord>,
}

/// `L x L` grid of unit spins over the Brillouin zone.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinTexture {
    pub l: usize,
    /// Row-major over (ix, iy): index `ix * l + iy`.
    pub spins: Vec<[f64; 3]>,
    pub meta: TextureMeta,
}

impl SpinTexture {
    #[inline]
    pub fn spin(&self, ix: usize, iy: usize) -> [f64; 3] {
        self.spins[ix * self.l + iy]
    }

    /// Largest deviation from unit norm over the grid.
    pub fn max_norm_error(&self) -> f64 {
        self.spins
            .iter()
            .map(|s| ((s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Raw (unnormalized) field vectors on the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct HField {
    pub l: usize,
    pub family: Family,
    pub c: u32,
    pub m: f64,
    pub data: Vec<[f64; 3]>,
}

/// Model field at one momentum: the planar components wind `c` times while
/// the third component `cos kx + cos ky + m` controls the phase.
pub fn h_field(c: u32, m: f64, k: [f64; 2]) -> [f64; 3] {
    let z = Complex64::new(k[0].sin(), -k[1].sin());
    let mut w = Complex64::new(1.0, 0.0);
    for _ in 0..c {
        w *= z;
    }
    [w.re, -w.im, k[0].cos() + k[1].cos() + m]
}

impl HField {
    pub fn chern(c: u32, m: f64, l: usize) -> HField {
        let mut data = Vec::with_capacity(l * l);
        for ix in 0..l {
            let kx = grid::momentum(ix, l);
            for iy in 0..l {
                let ky = grid::momentum(iy, l);
                data.push(h_field(c, m, [kx, ky]));
            }
        }
        HField {
            l,
            family: Family::Chern,
            c,
            m,
            data,
        }
    }

    /// Model field with one component zeroed, giving an in-plane vortex.
    pub fn vortex(plane: VortexPlane, c: u32, m: f64, l: usize) -> HField {
        let mut f = HField::chern(c, m, l);
        let zeroed = match plane {
            VortexPlane::Yz => 0,
            VortexPlane::Xz => 1,
            VortexPlane::Xy => 2,
        };
        for h in &mut f.data {
            h[zeroed] = 0.0;
        }
        f.family = plane.family();
        if plane == VortexPlane::Xy {
            f.m = 0.0; // the in-plane vortex has no mass parameter
        }
        f
    }

    /// Gaussian perturbation of every site, used by the map experiments.
    pub fn with_noise(&self, sd: f64, rng: &mut impl Rng) -> HField {
        if sd == 0.0 {
            return self.clone();
        }
        let normal = Normal::new(0.0, sd).expect("valid noise sd");
        let mut out = self.clone();
        for h in &mut out.data {
            for v in h.iter_mut() {
                *v += normal.sample(rng);
            }
        }
        out
    }

    pub fn flip_z(&self) -> HField {
        let mut out = self.clone();
        for h in &mut out.data {
            h[2] = -h[2];
        }
        out.family = Family::FlipZ;
        out
    }

    pub fn swap_yz(&self) -> HField {
        let mut out = self.clone();
        for h in &mut out.data {
            h.swap(1, 2);
        }
        out.family = Family::SwapYz;
        out
    }

    /// Smallest field magnitude and where it occurs.
    pub fn min_norm(&self) -> (f64, usize, usize) {
        let mut best = (f64::INFINITY, 0, 0);
        for ix in 0..self.l {
            for iy in 0..self.l {
                let h = self.data[ix * self.l + iy];
                let n = (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt();
                if n < best.0 {
                    best = (n, ix, iy);
                }
            }
        }
        best
    }

    /// Normalize into a spin texture with the given label.
    ///
    /// Fails if the gap closes anywhere, except that the in-plane vortex is
    /// patched at the four zone momenta where its field vanishes identically:
    /// those sites get the fixed in-plane spin `(1, 0, 0)`, keeping the
    /// texture coplanar.
    pub fn normalize(&self, label: i32) -> Result<SpinTexture> {
        let mut spins = Vec::with_capacity(self.data.len());
        for (idx, h) in self.data.iter().enumerate() {
            let n = (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt();
            if n < GAP_EPS {
                if self.family == Family::VortexXy {
                    spins.push([1.0, 0.0, 0.0]);
                    continue;
                }
                return Err(Error::GapClosed {
                    i: idx / self.l,
                    j: idx % self.l,
                    min_h: n,
                });
            }
            spins.push([h[0] / n, h[1] / n, h[2] / n]);
        }
        Ok(SpinTexture {
            l: self.l,
            spins,
            meta: TextureMeta {
                family: self.family,
                c: self.c,
                m: self.m,
                label,
                augmentation: None,
            },
        })
    }
}

/// Chern class of the model from its parameters.
pub fn model_label(c: u32, m: f64) -> i32 {
    if m.abs() > 2.0 {
        0
    } else {
        m.signum() as i32 * c as i32
    }
}

/// Normalized model texture, labeled by its phase diagram.
pub fn texture(c: u32, m: f64, l: usize) -> Result<SpinTexture> {
    HField::chern(c, m, l).normalize(model_label(c, m))
}

/// Normalized in-plane vortex texture; always topologically trivial.
pub fn vortex_texture(plane: VortexPlane, c: u32, m: f64, l: usize) -> Result<SpinTexture> {
    HField::vortex(plane, c, m, l).normalize(0)
}

/// Conical spin spiral along the zone diagonal; `eps = 0` is the helical state.
pub fn helical_conical(eps: f64, l: usize) -> Result<SpinTexture> {
    if eps.abs() >= 1.0 {
        return Err(Error::InvalidEpsilon(eps));
    }
    let planar = (1.0 - eps * eps).sqrt();
    let mut spins = Vec::with_capacity(l * l);
    for ix in 0..l {
        let kx = grid::momentum(ix, l);
        for iy in 0..l {
            let ky = grid::momentum(iy, l);
            let phase = kx + ky;
            spins.push([planar * phase.cos(), planar * phase.sin(), eps]);
        }
    }
    Ok(SpinTexture {
        l,
        spins,
        meta: TextureMeta {
            family: if eps == 0.0 { Family::Helical } else { Family::Conical },
            c: 0,
            m: eps,
            label: 0,
            augmentation: None,
        },
    })
}

/// Constant ferromagnetic texture `n = (0, 0, s)` with `s = ±1`.
pub fn fm_texture(s: i32, l: usize) -> SpinTexture {
    debug_assert!(s == 1 || s == -1);
    SpinTexture {
        l,
        spins: vec![[0.0, 0.0, s as f64]; l * l],
        meta: TextureMeta {
            family: Family::Fm,
            c: 0,
            m: s as f64,
            label: 0,
            augmentation: None,
        },
    }
}

/// Flip the z component; the label is recomputed from the lattice sum,
/// never copied.
pub fn flip_z(t: &SpinTexture) -> Result<SpinTexture> {
    let mut out = t.clone();
    for s in &mut out.spins {
        s[2] = -s[2];
    }
    out.meta.family = Family::FlipZ;
    out.meta.label = chern::chern_number(&out)?;
    Ok(out)
}

/// Swap the y and z components; the label is recomputed from the lattice sum.
pub fn swap_yz(t: &SpinTexture) -> Result<SpinTexture> {
    let mut out = t.clone();
    for s in &mut out.spins {
        s.swap(1, 2);
    }
    out.meta.family = Family::SwapYz;
    out.meta.label = chern::chern_number(&out)?;
    Ok(out)
}

/// Cyclic grid shift; an exact symmetry under periodic boundaries.
pub fn translate(t: &SpinTexture, dx: usize, dy: usize) -> SpinTexture {
    let l = t.l;
    let mut spins = vec![[0.0; 3]; l * l];
    for ix in 0..l {
        for iy in 0..l {
            let sx = wrap(ix as isize + dx as isize, l);
            let sy = wrap(iy as isize + dy as isize, l);
            spins[ix * l + iy] = t.spin(sx, sy);
        }
    }
    SpinTexture {
        l,
        spins,
        meta: t.meta.clone(),
    }
}

/// Apply one global rotation to every spin.
pub fn rotate(t: &SpinTexture, q: Quaternion) -> SpinTexture {
    let mut out = t.clone();
    for s in &mut out.spins {
        *s = q.rotate_vector(*s);
    }
    out
}

/// Which augmentation stages to apply.
#[derive(Clone, Copy, Debug)]
pub struct AugmentOpts {
    pub translate: bool,
    pub rotate: bool,
    pub noise: bool,
}

impl AugmentOpts {
    pub const ALL: Self = Self {
        translate: true,
        rotate: true,
        noise: true,
    };
    pub const NO_NOISE: Self = Self {
        translate: true,
        rotate: true,
        noise: false,
    };
}

/// Augment a texture: cyclic shift, one global rotation, then Gaussian noise
/// on a fixed number of sites (renormalized afterwards).
///
/// If the noise collapses some spin below `GAP_EPS` before renormalization,
/// the noise alone is regenerated from the next substream, up to 100 tries.
pub fn augment(t: &SpinTexture, seed: u64, opts: AugmentOpts) -> Result<SpinTexture> {
    let mut rng = rng::stream(seed, &[]);

    let shift = if opts.translate {
        (rng.gen_range(0..t.l), rng.gen_range(0..t.l))
    } else {
        (0, 0)
    };
    let rotation = if opts.rotate {
        rng::random_rotation(&mut rng)
    } else {
        Quaternion::ONE
    };
    let noise_seed: u64 = rng.gen();

    let mut out = translate(t, shift.0, shift.1);
    if opts.rotate {
        out = rotate(&out, rotation);
    }

    let mut noise_attempt = 0;
    if opts.noise {
        let n_sites = NOISE_SITES.min(t.l * t.l);
        let normal = Normal::new(0.0, NOISE_SD).expect("valid noise sd");
        'attempts: loop {
            if noise_attempt >= MAX_NOISE_ATTEMPTS {
                return Err(Error::NoiseExhausted(noise_attempt));
            }
            let mut noise_rng = rng::stream(noise_seed, &[noise_attempt as u64]);
            let sites = rand::seq::index::sample(&mut noise_rng, t.l * t.l, n_sites);
            let mut spins = out.spins.clone();
            for site in sites.iter() {
                let s = &mut spins[site];
                for v in s.iter_mut() {
                    *v += normal.sample(&mut noise_rng);
                }
                let n = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
                if n < GAP_EPS {
                    noise_attempt += 1;
                    continue 'attempts;
                }
                *s = [s[0] / n, s[1] / n, s[2] / n];
            }
            out.spins = spins;
            break;
        }
    }

    out.meta.augmentation = Some(AugmentRecord {
        seed,
        shift,
        rotation,
        noise_seed,
        noise_attempt,
    });
    Ok(out)
}
