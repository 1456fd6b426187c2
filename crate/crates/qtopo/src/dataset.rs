//! Corpus assembly and serialization.
//!
//! Builders generate the training/validation, testing, and prediction
//! corpora with per-sample seeded streams; every stored label is verified
//! against the lattice oracle at build time (draws that close the gap or
//! move the invariant are regenerated from the next substream). Files use a
//! fixed little-endian binary container that round-trips byte-identically.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::chern::{self, RESIDUAL_LIMIT};
use crate::error::{Error, Result};
use crate::grid::DEFAULT_L;
use crate::nn::class_index;
use crate::rng::{self, domain};
use crate::spin::{
    self, augment, AugmentOpts, Family, SpinTexture, TextureMeta, VortexPlane,
};

const MAGIC: &[u8; 4] = b"QDS1";
const VERSION: u32 = 1;
const LAYOUT_SPIN3: u32 = 0;
const MAX_ATTEMPTS: u64 = 100;

/// Training-corpus composition per vorticity `c`: two nontrivial mass bands
/// and the two trivial masses, plus vortices per `(c, plane)`.
pub const TRAIN_PER_BAND: usize = 640;
pub const TRAIN_PER_TRIVIAL: usize = 80;
pub const TRAIN_PER_VORTEX: usize = 30;
/// Testing keeps the same composition at one fifth the size.
pub const TEST_PER_BAND: usize = 128;
pub const TEST_PER_TRIVIAL: usize = 16;
pub const TEST_PER_VORTEX: usize = 6;

pub const TRAIN_TOTAL: usize = 6120;
pub const VAL_TOTAL: usize = 1530;
pub const TEST_TOTAL: usize = 1224;

/// One stored sample: texture, one-hot class index, augmentation seed.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    pub texture: SpinTexture,
    pub class: u8,
    pub aug_seed: u64,
}

impl LabeledSample {
    fn from_texture(texture: SpinTexture) -> Self {
        let class = class_index(texture.meta.label) as u8;
        let aug_seed = texture
            .meta
            .augmentation
            .map(|a| a.seed)
            .unwrap_or_default();
        Self {
            texture,
            class,
            aug_seed,
        }
    }

    pub fn chern(&self) -> i32 {
        self.class as i32 - 4
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub l: usize,
    pub samples: Vec<LabeledSample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample count per class index `0..9`.
    pub fn class_counts(&self) -> [usize; 9] {
        let mut counts = [0usize; 9];
        for s in &self.samples {
            counts[s.class as usize] += 1;
        }
        counts
    }

    pub fn family_count(&self, family: Family) -> usize {
        self.samples
            .iter()
            .filter(|s| s.texture.meta.family == family)
            .count()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&(self.samples.len() as u32).to_le_bytes())?;
        out.write_all(&(self.l as u32).to_le_bytes())?;
        out.write_all(&LAYOUT_SPIN3.to_le_bytes())?;
        for s in &self.samples {
            out.write_all(&(s.class as i8).to_le_bytes())?;
            out.write_all(&s.texture.meta.family.tag().to_le_bytes())?;
            out.write_all(&(s.texture.meta.c as f64).to_le_bytes())?;
            out.write_all(&s.texture.meta.m.to_le_bytes())?;
            out.write_all(&s.aug_seed.to_le_bytes())?;
            for spin in &s.texture.spins {
                for &v in spin {
                    debug_assert!(v.is_finite());
                    out.write_all(&(v as f32).to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Dataset> {
        let file = std::fs::File::open(path)?;
        let mut r = FormatReader {
            inner: std::io::BufReader::new(file),
            offset: 0,
        };
        let magic: [u8; 4] = r.bytes()?;
        if &magic != MAGIC {
            return Err(r.fail("bad magic, not a dataset container"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(r.fail(format!("unsupported dataset version {version}")));
        }
        let count = r.u32()? as usize;
        let l = r.u32()? as usize;
        if l == 0 || l > 4096 {
            return Err(r.fail(format!("implausible lattice size {l}")));
        }
        let layout = r.u32()?;
        if layout != LAYOUT_SPIN3 {
            return Err(r.fail(format!("unknown layout tag {layout}")));
        }

        let mut samples = Vec::with_capacity(count);
        for _ in 0..count {
            let class = i8::from_le_bytes(r.bytes()?);
            if !(0..=8).contains(&class) {
                return Err(r.fail(format!("class index {class} out of range")));
            }
            let family_tag = u8::from_le_bytes(r.bytes()?);
            let family = Family::from_tag(family_tag)
                .ok_or_else(|| r.fail(format!("unknown family tag {family_tag}")))?;
            let c = r.f64()?;
            let m = r.f64()?;
            let aug_seed = r.u64()?;
            let mut spins = Vec::with_capacity(l * l);
            for _ in 0..l * l {
                let x = r.f32()? as f64;
                let y = r.f32()? as f64;
                let z = r.f32()? as f64;
                spins.push([x, y, z]);
            }
            samples.push(LabeledSample {
                texture: SpinTexture {
                    l,
                    spins,
                    meta: TextureMeta {
                        family,
                        c: c as u32,
                        m,
                        label: class as i32 - 4,
                        augmentation: None,
                    },
                },
                class: class as u8,
                aug_seed,
            });
        }
        Ok(Dataset { l, samples })
    }
}

struct FormatReader<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> FormatReader<R> {
    fn fail(&self, msg: impl Into<String>) -> Error {
        Error::Format {
            offset: self.offset,
            msg: msg.into(),
        }
    }

    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf).map_err(|e| Error::Format {
            offset: self.offset,
            msg: format!("unexpected end of dataset: {e}"),
        })?;
        self.offset += N as u64;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
}

/// How to draw the mass parameter for one sample.
#[derive(Clone, Copy, Debug)]
enum MassDraw {
    Fixed(f64),
    Range(f64, f64),
}

#[derive(Clone, Copy, Debug)]
enum SampleSpec {
    Model { c: u32, m: MassDraw },
    Vortex { plane: VortexPlane, c: u32 },
}

/// Generate one sample with retries: a draw is discarded when the gap
/// closes, the noise budget runs out, or the oracle label disagrees with
/// the intended class.
fn generate(master: u64, domain_tag: u64, index: usize, spec: SampleSpec) -> Result<LabeledSample> {
    for attempt in 0..MAX_ATTEMPTS {
        let sample_seed = rng::derive_seed(master, &[domain_tag, index as u64, attempt]);
        let mut rng = rng::stream(sample_seed, &[]);

        let built: Result<SpinTexture> = (|| {
            let (base, opts) = match spec {
                SampleSpec::Model { c, m } => {
                    let m = match m {
                        MassDraw::Fixed(v) => v,
                        MassDraw::Range(lo, hi) => rng.gen_range(lo..hi),
                    };
                    (spin::texture(c, m, DEFAULT_L)?, AugmentOpts::ALL)
                }
                SampleSpec::Vortex { plane, c } => {
                    let m = if plane == VortexPlane::Xy {
                        0.0
                    } else {
                        rng.gen_range(-3.0..3.0)
                    };
                    (
                        spin::vortex_texture(plane, c, m, DEFAULT_L)?,
                        AugmentOpts::NO_NOISE,
                    )
                }
            };
            let aug_seed: u64 = rng.gen();
            augment(&base, aug_seed, opts)
        })();

        match built {
            Ok(texture) => match chern::chern_number(&texture) {
                Ok(found) if found == texture.meta.label => {
                    return Ok(LabeledSample::from_texture(texture))
                }
                Ok(_) | Err(Error::IllConditioned { .. }) => continue,
                Err(e) => return Err(e),
            },
            Err(Error::GapClosed { .. }) | Err(Error::NoiseExhausted(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::NoiseExhausted(MAX_ATTEMPTS as u32))
}

fn build_corpus(
    seed: u64,
    domain_tag: u64,
    per_band: usize,
    per_trivial: usize,
    per_vortex: usize,
) -> Result<Dataset> {
    let mut specs = Vec::new();
    for c in 1..=4u32 {
        for _ in 0..per_band {
            specs.push(SampleSpec::Model {
                c,
                m: MassDraw::Range(-1.9, -0.1),
            });
        }
        for _ in 0..per_band {
            specs.push(SampleSpec::Model {
                c,
                m: MassDraw::Range(0.1, 1.9),
            });
        }
        for _ in 0..per_trivial {
            specs.push(SampleSpec::Model {
                c,
                m: MassDraw::Fixed(-3.0),
            });
        }
        for _ in 0..per_trivial {
            specs.push(SampleSpec::Model {
                c,
                m: MassDraw::Fixed(3.0),
            });
        }
    }
    for c in 1..=4u32 {
        for plane in VortexPlane::ALL {
            for _ in 0..per_vortex {
                specs.push(SampleSpec::Vortex { plane, c });
            }
        }
    }

    let samples: Result<Vec<LabeledSample>> = specs
        .into_par_iter()
        .enumerate()
        .map(|(index, spec)| generate(seed, domain_tag, index, spec))
        .collect();
    Ok(Dataset {
        l: DEFAULT_L,
        samples: samples?,
    })
}

/// Stratified split: one quarter of each class goes to validation.
pub fn split_validation(dataset: Dataset, seed: u64) -> (Dataset, Dataset) {
    let l = dataset.l;
    let mut is_val = vec![false; dataset.len()];
    for class in 0..9u8 {
        let mut indices: Vec<usize> = dataset
            .samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.class == class)
            .map(|(i, _)| i)
            .collect();
        let mut rng = rng::stream(seed, &[domain::SPLIT, class as u64]);
        use rand::seq::SliceRandom;
        indices.shuffle(&mut rng);
        let take = indices.len() / 4;
        for &i in indices.iter().take(take) {
            is_val[i] = true;
        }
    }
    let mut train = Dataset {
        l,
        samples: Vec::new(),
    };
    let mut val = Dataset {
        l,
        samples: Vec::new(),
    };
    for (sample, to_val) in dataset.samples.into_iter().zip(is_val) {
        if to_val {
            val.samples.push(sample);
        } else {
            train.samples.push(sample);
        }
    }
    (train, val)
}

/// Full training pool with its stratified validation split.
pub fn build_training(seed: u64) -> Result<(Dataset, Dataset)> {
    let pool = build_corpus(
        seed,
        domain::TRAIN,
        TRAIN_PER_BAND,
        TRAIN_PER_TRIVIAL,
        TRAIN_PER_VORTEX,
    )?;
    debug_assert_eq!(pool.len(), TRAIN_TOTAL);
    Ok(split_validation(pool, seed))
}

/// Testing corpus: same composition as training at one fifth the size.
pub fn build_testing(seed: u64) -> Result<Dataset> {
    build_corpus(
        seed,
        domain::TEST,
        TEST_PER_BAND,
        TEST_PER_TRIVIAL,
        TEST_PER_VORTEX,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredictionCategory {
    Chern,
    FlipZ,
    SwapYz,
    Helical,
    Conical,
    Fm,
}

impl PredictionCategory {
    pub const ALL: [PredictionCategory; 6] = [
        PredictionCategory::Chern,
        PredictionCategory::FlipZ,
        PredictionCategory::SwapYz,
        PredictionCategory::Helical,
        PredictionCategory::Conical,
        PredictionCategory::Fm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PredictionCategory::Chern => "chern",
            PredictionCategory::FlipZ => "flip_z",
            PredictionCategory::SwapYz => "swap_yz",
            PredictionCategory::Helical => "helical",
            PredictionCategory::Conical => "conical",
            PredictionCategory::Fm => "fm",
        }
    }
}

/// One out-of-distribution category with near-transition samples flagged.
#[derive(Clone, Debug)]
pub struct PredictionSet {
    pub category: PredictionCategory,
    pub dataset: Dataset,
    /// `(sample index, oracle residual)` for samples near a phase boundary.
    pub flagged: Vec<(usize, f64)>,
}

fn predict_one(
    master: u64,
    category: PredictionCategory,
    index: usize,
    total: usize,
) -> Result<(LabeledSample, Option<f64>)> {
    let tag = domain::PREDICT ^ ((category as u64) << 32);
    for attempt in 0..MAX_ATTEMPTS {
        let sample_seed = rng::derive_seed(master, &[tag, index as u64, attempt]);
        let mut rng = rng::stream(sample_seed, &[]);

        let built: Result<(SpinTexture, bool)> = (|| {
            match category {
                PredictionCategory::Chern => {
                    // 30 masses evenly spanning [-3, 3] for each vorticity
                    let per_c = total / 4;
                    let c = 1 + (index / per_c) as u32;
                    let i = (index % per_c) as f64;
                    let m = -3.0 + 6.0 * i / (per_c as f64 - 1.0);
                    let base = spin::texture(c, m, DEFAULT_L)?;
                    let aug_seed: u64 = rng.gen();
                    let t = augment(&base, aug_seed, AugmentOpts::NO_NOISE)?;
                    let near_boundary =
                        m.abs().min((m.abs() - 2.0).abs()) <= 0.05;
                    Ok((t, near_boundary))
                }
                PredictionCategory::FlipZ | PredictionCategory::SwapYz => {
                    // 15 samples per (c, sign of m)
                    let per_cell = total / 8;
                    let cell = index / per_cell;
                    let c = 1 + (cell / 2) as u32;
                    let m = if cell % 2 == 0 { 1.0 } else { -1.0 };
                    let base = spin::texture(c, m, DEFAULT_L)?;
                    let transformed = if category == PredictionCategory::FlipZ {
                        spin::flip_z(&base)?
                    } else {
                        spin::swap_yz(&base)?
                    };
                    let aug_seed: u64 = rng.gen();
                    Ok((augment(&transformed, aug_seed, AugmentOpts::NO_NOISE)?, false))
                }
                PredictionCategory::Helical => {
                    let base = spin::helical_conical(0.0, DEFAULT_L)?;
                    let aug_seed: u64 = rng.gen();
                    Ok((augment(&base, aug_seed, AugmentOpts::NO_NOISE)?, false))
                }
                PredictionCategory::Conical => {
                    let magnitude = rng.gen_range(0.1..0.9);
                    let eps = if rng.gen_bool(0.5) { magnitude } else { -magnitude };
                    let base = spin::helical_conical(eps, DEFAULT_L)?;
                    let aug_seed: u64 = rng.gen();
                    Ok((augment(&base, aug_seed, AugmentOpts::NO_NOISE)?, false))
                }
                PredictionCategory::Fm => {
                    let s = if index % 2 == 0 { 1 } else { -1 };
                    let base = spin::fm_texture(s, DEFAULT_L);
                    let aug_seed: u64 = rng.gen();
                    Ok((augment(&base, aug_seed, AugmentOpts::NO_NOISE)?, false))
                }
            }
        })();

        match built {
            Ok((mut texture, near_boundary)) => {
                let measured = chern::chern_measurement(&texture)?;
                // the oracle labels every prediction sample
                texture.meta.label = measured.chern;
                let flag = (near_boundary || measured.residual > RESIDUAL_LIMIT)
                    .then_some(measured.residual);
                return Ok((LabeledSample::from_texture(texture), flag));
            }
            Err(Error::GapClosed { .. }) | Err(Error::NoiseExhausted(_)) => {
                let _ = attempt;
                continue;
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::NoiseExhausted(MAX_ATTEMPTS as u32))
}

pub const PREDICTION_CATEGORY_SIZE: usize = 120;

/// The six out-of-distribution categories, 120 samples each.
pub fn build_prediction(seed: u64) -> Result<Vec<PredictionSet>> {
    PredictionCategory::ALL
        .iter()
        .map(|&category| {
            let total = PREDICTION_CATEGORY_SIZE;
            let results: Result<Vec<(LabeledSample, Option<f64>)>> = (0..total)
                .into_par_iter()
                .map(|index| predict_one(seed, category, index, total))
                .collect();
            let results = results?;
            let mut dataset = Dataset {
                l: DEFAULT_L,
                samples: Vec::with_capacity(total),
            };
            let mut flagged = Vec::new();
            for (index, (sample, flag)) in results.into_iter().enumerate() {
                if let Some(residual) = flag {
                    flagged.push((index, residual));
                }
                dataset.samples.push(sample);
            }
            Ok(PredictionSet {
                category,
                dataset,
                flagged,
            })
        })
        .collect()
}

/// Plain-text manifest: counts per class and family, seeds, format version.
pub fn write_manifest(
    dataset: &Dataset,
    kind: &str,
    seed: u64,
    extra: &[(String, String)],
    path: &Path,
) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "kind={kind}")?;
    writeln!(out, "seed={seed}")?;
    writeln!(out, "format_version={VERSION}")?;
    writeln!(out, "count={}", dataset.len())?;
    writeln!(out, "l={}", dataset.l)?;
    let counts = dataset.class_counts();
    for (i, n) in counts.iter().enumerate() {
        writeln!(out, "class_{}={n}", i as i32 - 4)?;
    }
    for family in [
        Family::Chern,
        Family::VortexYz,
        Family::VortexXz,
        Family::VortexXy,
        Family::Helical,
        Family::Conical,
        Family::Fm,
        Family::FlipZ,
        Family::SwapYz,
    ] {
        let n = dataset.family_count(family);
        if n > 0 {
            writeln!(out, "family_{}={n}", family.name())?;
        }
    }
    for (k, v) in extra {
        writeln!(out, "{k}={v}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_dataset() -> Dataset {
        let t1 = spin::texture(1, 1.0, DEFAULT_L).unwrap();
        let t2 = spin::texture(2, -1.0, DEFAULT_L).unwrap();
        Dataset {
            l: DEFAULT_L,
            samples: vec![
                LabeledSample::from_texture(t1),
                LabeledSample::from_texture(t2),
            ],
        }
    }

    #[test]
    fn container_round_trips_byte_identically() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.qds");
        let b = dir.path().join("b.qds");
        let ds = tiny_dataset();
        ds.save(&a).unwrap();
        let loaded = Dataset::load(&a).unwrap();
        loaded.save(&b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        assert_eq!(loaded.len(), ds.len());
        assert_eq!(loaded.samples[0].class, ds.samples[0].class);
        assert_eq!(loaded.samples[1].texture.meta.family, Family::Chern);
    }

    #[test]
    fn truncated_container_reports_offset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("full.qds");
        tiny_dataset().save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let cut = dir.path().join("cut.qds");
        std::fs::write(&cut, &bytes[..bytes.len() - 100]).unwrap();
        match Dataset::load(&cut) {
            Err(Error::Format { offset, .. }) => assert!(offset > 0),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn corrupt_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.qds");
        std::fs::write(&path, b"WHO?aaaaaaaaaaaaaaaaaaaa").unwrap();
        assert!(matches!(Dataset::load(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn loaded_labels_survive_the_oracle() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("check.qds");
        tiny_dataset().save(&path).unwrap();
        let loaded = Dataset::load(&path).unwrap();
        for s in &loaded.samples {
            // storage is f32; labels must still round to the same integer
            assert_eq!(chern::chern_number(&s.texture).unwrap(), s.chern());
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SampleSpec::Model {
            c: 2,
            m: MassDraw::Range(0.1, 1.9),
        };
        let a = generate(42, domain::TRAIN, 7, spec).unwrap();
        let b = generate(42, domain::TRAIN, 7, spec).unwrap();
        assert_eq!(a, b);
        let c = generate(43, domain::TRAIN, 7, spec).unwrap();
        assert_ne!(a.texture.spins, c.texture.spins);
    }

    #[test]
    fn vortex_generation_is_trivial_and_augmented() {
        let spec = SampleSpec::Vortex {
            plane: VortexPlane::Xy,
            c: 3,
        };
        let s = generate(5, domain::TRAIN, 0, spec).unwrap();
        assert_eq!(s.chern(), 0);
        assert_eq!(s.texture.meta.family, Family::VortexXy);
        assert!(s.texture.meta.augmentation.is_some());
    }

    #[test]
    fn stratified_split_takes_a_quarter_per_class() {
        // synthetic dataset with known class layout
        let base = spin::texture(1, 1.0, DEFAULT_L).unwrap();
        let mut samples = Vec::new();
        for class in [3u8, 4, 5] {
            for _ in 0..40 {
                let mut s = LabeledSample::from_texture(base.clone());
                s.class = class;
                samples.push(s);
            }
        }
        let ds = Dataset {
            l: DEFAULT_L,
            samples,
        };
        let (train, val) = split_validation(ds, 9);
        assert_eq!(train.len(), 90);
        assert_eq!(val.len(), 30);
        for class in [3u8, 4, 5] {
            let n = val.samples.iter().filter(|s| s.class == class).count();
            assert_eq!(n, 10);
        }
    }
}
