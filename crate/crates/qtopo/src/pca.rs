//! Principal component analysis over flattened maps, written from scratch:
//! mean centering, a cyclic Jacobi eigensolver, and nearest-centroid
//! cluster diagnostics.
//!
//! Inputs are mean-centered only (no per-feature standardization); the
//! choice is recorded in the CSV metadata emitted by the CLI.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::chern;
use crate::error::{Error, Result};
use crate::fmap::{f_map_in, FMap, GaugeRegion};
use crate::grid::DEFAULT_L;
use crate::rng::{self, domain};
use crate::spin::{HField, GAP_EPS};

/// Fitted PCA basis.
///
/// `axes` are orthonormal rows in descending eigenvalue order, each signed so
/// that its largest-magnitude entry is positive; `lambdas` holds the full
/// eigenvalue spectrum (including entries below the rank cutoff).
#[derive(Clone, Debug)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    pub axes: Vec<Vec<f64>>,
    pub lambdas: Vec<f64>,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.axes.len()
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi sweeps.
/// Returns eigenvalues (descending) and matching eigenvectors as rows.
fn jacobi_symmetric(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }

    let off_norm = |a: &Vec<Vec<f64>>| -> f64 {
        let mut s = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                s += a[p][q] * a[p][q];
            }
        }
        s
    };
    let scale: f64 = (0..n).map(|i| a[i][i].abs()).fold(0.0, f64::max).max(1e-300);

    for _sweep in 0..64 {
        if off_norm(&a) <= (1e-14 * scale).powi(2) * (n * n) as f64 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for i in 0..n {
                    let aip = a[i][p];
                    let aiq = a[i][q];
                    a[i][p] = c * aip - s * aiq;
                    a[i][q] = s * aip + c * aiq;
                }
                for i in 0..n {
                    let api = a[p][i];
                    let aqi = a[q][i];
                    a[p][i] = c * api - s * aqi;
                    a[q][i] = s * api + c * aqi;
                }
                for row in v.iter_mut() {
                    let vip = row[p];
                    let viq = row[q];
                    row[p] = c * vip - s * viq;
                    row[q] = s * vip + c * viq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).unwrap());
    let lambdas: Vec<f64> = order.iter().map(|&i| a[i][i]).collect();
    let vectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&col| (0..n).map(|row| v[row][col]).collect())
        .collect();
    (lambdas, vectors)
}

fn apply_sign_convention(axis: &mut [f64]) {
    let mut best = 0usize;
    for (i, v) in axis.iter().enumerate() {
        if v.abs() > axis[best].abs() {
            best = i;
        }
    }
    if axis[best] < 0.0 {
        for v in axis.iter_mut() {
            *v = -*v;
        }
    }
}

/// Fit a PCA basis to row-vector samples.
///
/// Uses the covariance matrix when the feature count is small, otherwise the
/// Gram matrix of the centered rows (exact for the leading components, and
/// the only practical route for the `L^2`-dimensional maps). Degenerate
/// all-identical input yields a rank-0 model.
pub fn fit(samples: &[Vec<f64>]) -> PcaModel {
    let n = samples.len();
    assert!(n >= 1, "PCA needs at least one sample");
    let d = samples[0].len();

    let mut mean = vec![0.0; d];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }

    let centered: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| s.iter().zip(&mean).map(|(v, m)| v - m).collect())
        .collect();
    let denom = (n.max(2) - 1) as f64;

    let (lambdas, mut axes);
    if d <= n {
        let mut cov = vec![vec![0.0; d]; d];
        for row in &centered {
            for i in 0..d {
                if row[i] == 0.0 {
                    continue;
                }
                for j in i..d {
                    cov[i][j] += row[i] * row[j];
                }
            }
        }
        for i in 0..d {
            for j in i..d {
                cov[i][j] /= denom;
                cov[j][i] = cov[i][j];
            }
        }
        let (vals, vecs) = jacobi_symmetric(cov);
        lambdas = vals.iter().map(|&v| v.max(0.0)).collect::<Vec<_>>();
        let cutoff = lambdas.first().copied().unwrap_or(0.0) * 1e-12;
        axes = Vec::new();
        for (lam, vec) in lambdas.iter().zip(vecs) {
            if *lam > cutoff && *lam > 0.0 {
                axes.push(vec);
            }
        }
    } else {
        let gram: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| {
                        centered[i]
                            .iter()
                            .zip(&centered[j])
                            .map(|(a, b)| a * b)
                            .sum()
                    })
                    .collect()
            })
            .collect();
        let (gvals, gvecs) = jacobi_symmetric(gram);
        let cutoff = gvals.first().copied().unwrap_or(0.0).max(0.0) * 1e-12;
        lambdas = gvals.iter().map(|&g| g.max(0.0) / denom).collect();
        axes = Vec::new();
        for (g, u) in gvals.iter().zip(&gvecs) {
            if *g <= cutoff || *g <= 0.0 {
                continue;
            }
            let inv_sigma = 1.0 / g.sqrt();
            let mut axis = vec![0.0; d];
            for (ui, row) in u.iter().zip(&centered) {
                if *ui == 0.0 {
                    continue;
                }
                for (av, rv) in axis.iter_mut().zip(row) {
                    *av += ui * rv;
                }
            }
            for av in axis.iter_mut() {
                *av *= inv_sigma;
            }
            axes.push(axis);
        }
    }

    for axis in axes.iter_mut() {
        apply_sign_convention(axis);
    }
    PcaModel { mean, axes, lambdas }
}

/// Centered inner products with the first `n` axes.
pub fn project(model: &PcaModel, sample: &[f64], n: usize) -> Vec<f64> {
    assert!(n <= model.axes.len(), "requested more components than fitted");
    model.axes[..n]
        .iter()
        .map(|axis| {
            axis.iter()
                .zip(sample.iter().zip(&model.mean))
                .map(|(a, (v, m))| a * (v - m))
                .sum()
        })
        .collect()
}

/// Inverse of [`project`] restricted to the fitted subspace.
pub fn reconstruct(model: &PcaModel, coords: &[f64]) -> Vec<f64> {
    let mut out = model.mean.clone();
    for (w, axis) in coords.iter().zip(&model.axes) {
        for (o, a) in out.iter_mut().zip(axis) {
            *o += w * a;
        }
    }
    out
}

/// Per-class centroids, spreads, and the nearest-centroid confusion matrix.
#[derive(Clone, Debug)]
pub struct ClusterReport {
    pub classes: Vec<i32>,
    pub centroids: Vec<Vec<f64>>,
    /// RMS distance of each class's samples to its own centroid.
    pub within_rms: Vec<f64>,
    /// Pairwise centroid distances, indexed like `classes`.
    pub between: Vec<Vec<f64>>,
    /// `confusion[true][predicted]` under nearest-centroid assignment.
    pub confusion: Vec<Vec<usize>>,
    pub accuracy: f64,
}

pub fn cluster_report(projections: &[Vec<f64>], labels: &[i32]) -> ClusterReport {
    assert_eq!(projections.len(), labels.len());
    let mut classes: Vec<i32> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let class_index = |label: i32| classes.iter().position(|&c| c == label).unwrap();

    let dim = projections.first().map_or(0, Vec::len);
    let mut centroids = vec![vec![0.0; dim]; classes.len()];
    let mut counts = vec![0usize; classes.len()];
    for (p, &lab) in projections.iter().zip(labels) {
        let ci = class_index(lab);
        counts[ci] += 1;
        for (c, v) in centroids[ci].iter_mut().zip(p) {
            *c += v;
        }
    }
    for (c, &n) in centroids.iter_mut().zip(&counts) {
        for v in c.iter_mut() {
            *v /= n.max(1) as f64;
        }
    }

    let dist2 = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    };

    let mut within = vec![0.0; classes.len()];
    let mut confusion = vec![vec![0usize; classes.len()]; classes.len()];
    let mut correct = 0usize;
    for (p, &lab) in projections.iter().zip(labels) {
        let ci = class_index(lab);
        within[ci] += dist2(p, &centroids[ci]);

        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (j, c) in centroids.iter().enumerate() {
            let d = dist2(p, c);
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        confusion[ci][best] += 1;
        if best == ci {
            correct += 1;
        }
    }
    let within_rms: Vec<f64> = within
        .iter()
        .zip(&counts)
        .map(|(w, &n)| (w / n.max(1) as f64).sqrt())
        .collect();
    let between: Vec<Vec<f64>> = centroids
        .iter()
        .map(|a| centroids.iter().map(|b| dist2(a, b).sqrt()).collect())
        .collect();

    ClusterReport {
        classes,
        centroids,
        within_rms,
        between,
        confusion,
        accuracy: correct as f64 / projections.len().max(1) as f64,
    }
}

/// One map per sample of the seven-phase corpus: thirty maps per nontrivial
/// class from the model at `|m| = 1`, and thirty trivial maps drawn five
/// each from the six `(c, m = ±3)` combinations. Site noise of the given
/// standard deviation is applied to the field, regenerating any draw that
/// closes the gap or moves the lattice invariant off its class.
pub fn build_pca_dataset(sd: f64, seed: u64) -> Result<Vec<(FMap, i32)>> {
    let mut recipe: Vec<(u32, f64, i32)> = Vec::with_capacity(210);
    for c in 1..=3u32 {
        for m in [1.0f64, -1.0] {
            for _ in 0..30 {
                recipe.push((c, m, m.signum() as i32 * c as i32));
            }
        }
    }
    for c in 1..=3u32 {
        for m in [-3.0f64, 3.0] {
            for _ in 0..5 {
                recipe.push((c, m, 0));
            }
        }
    }
    debug_assert_eq!(recipe.len(), 210);

    recipe
        .into_par_iter()
        .enumerate()
        .map(|(idx, (c, m, label))| {
            let base = HField::chern(c, m, DEFAULT_L);
            // the gauge split belongs to the clean model; noise only
            // perturbs the amplitudes fed through it
            let region = GaugeRegion::from_field(&base);
            for attempt in 0..100u64 {
                let sample_seed = rng::derive_seed(seed, &[domain::PCA, idx as u64, attempt]);
                let mut noise_rng = rng::stream(sample_seed, &[]);
                let field = base.with_noise(sd, &mut noise_rng);
                if field.min_norm().0 < GAP_EPS {
                    continue;
                }
                if sd > 0.0 {
                    let texture = field.normalize(label)?;
                    match chern::chern_number(&texture) {
                        Ok(found) if found == label => {}
                        _ => continue,
                    }
                }
                let map = f_map_in(&field, &region)?.with_provenance(sd, sample_seed);
                return Ok((map, label));
            }
            Err(Error::NoiseExhausted(100))
        })
        .collect()
}

/// Spectrum CSV: `index, lambda, lambda / lambda_1`.
pub fn write_spectrum_csv(lambdas: &[f64], path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "index,lambda,lambda_ratio")?;
    let top = lambdas.first().copied().unwrap_or(0.0).max(1e-300);
    for (i, lam) in lambdas.iter().enumerate() {
        writeln!(out, "{},{:.17e},{:.17e}", i + 1, lam, lam / top)?;
    }
    Ok(())
}

/// Projection CSV: `id, label, pc1..pcn`.
pub fn write_projections_csv(
    labels: &[i32],
    projections: &[Vec<f64>],
    path: &Path,
) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let n = projections.first().map_or(0, Vec::len);
    let header: Vec<String> = (1..=n).map(|i| format!("pc{i}")).collect();
    writeln!(out, "id,label,{}", header.join(","))?;
    for (i, (lab, p)) in labels.iter().zip(projections).enumerate() {
        let vals = p
            .iter()
            .map(|v| format!("{v:.17e}"))
            .collect::<Vec<_>>()
            .join(",");
        writeln!(out, "{i},{lab},{vals}")?;
    }
    Ok(())
}

/// Confusion-matrix CSV with class headers.
pub fn write_confusion_csv(report: &ClusterReport, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header: Vec<String> = report.classes.iter().map(|c| format!("pred_{c}")).collect();
    writeln!(out, "true_class,{}", header.join(","))?;
    for (c, row) in report.classes.iter().zip(&report.confusion) {
        let vals = row
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(",");
        writeln!(out, "{c},{vals}")?;
    }
    Ok(())
}

/// Centroid/within/between diagnostics CSV.
pub fn write_report_csv(report: &ClusterReport, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "class,count,within_rms,centroid...")?;
    for (i, c) in report.classes.iter().enumerate() {
        let count: usize = report.confusion[i].iter().sum();
        let centroid = report.centroids[i]
            .iter()
            .map(|v| format!("{v:.17e}"))
            .collect::<Vec<_>>()
            .join(",");
        writeln!(out, "{c},{count},{:.17e},{centroid}", report.within_rms[i])?;
    }
    writeln!(out, "accuracy,{:.6}", report.accuracy)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn identical_rows_give_rank_zero() {
        let samples = vec![vec![1.0, 2.0, 3.0]; 8];
        let model = fit(&samples);
        assert!(model.axes.is_empty());
        assert!(model.lambdas.iter().all(|&l| l.abs() < 1e-12));
    }

    #[test]
    fn leading_axis_follows_the_long_direction() {
        let theta: f64 = 0.5;
        let dir = [theta.cos(), theta.sin()];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<Vec<f64>> = (0..4000)
            .map(|_| {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                let long = 3.0 * a;
                let short = 0.2 * b;
                vec![
                    long * dir[0] - short * dir[1],
                    long * dir[1] + short * dir[0],
                ]
            })
            .collect();
        let model = fit(&samples);
        let axis = &model.axes[0];
        let align = (axis[0] * dir[0] + axis[1] * dir[1]).abs();
        assert!(align > (1.0f64).to_radians().cos(), "alignment {align}");
        assert!(model.lambdas[0] > model.lambdas[1] * 50.0);
    }

    #[test]
    fn axes_are_orthonormal_and_projections_uncorrelated() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        // tall data (gram route): 12 samples of dimension 40
        let samples: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let model = fit(&samples);
        assert!(!model.axes.is_empty());
        for i in 0..model.axes.len() {
            for j in 0..model.axes.len() {
                let dot: f64 = model.axes[i]
                    .iter()
                    .zip(&model.axes[j])
                    .map(|(a, b)| a * b)
                    .sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-10, "axes {i},{j}: {dot}");
            }
        }

        let n = model.axes.len();
        let projections: Vec<Vec<f64>> =
            samples.iter().map(|s| project(&model, s, n)).collect();
        let scale = model.lambdas[0].max(1.0);
        for i in 0..n {
            for j in (i + 1)..n {
                let cov: f64 = projections
                    .iter()
                    .map(|p| p[i] * p[j])
                    .sum::<f64>()
                    / (projections.len() - 1) as f64;
                assert!(cov.abs() < 1e-8 * scale, "pc{i}/pc{j} covariance {cov}");
            }
        }
    }

    #[test]
    fn full_rank_projection_reconstructs_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for (n, d) in [(30usize, 10usize), (10, 30)] {
            let samples: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let model = fit(&samples);
            for s in &samples {
                let coords = project(&model, s, model.axes.len());
                let back = reconstruct(&model, &coords);
                let err = s
                    .iter()
                    .zip(&back)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                assert!(err < 1e-8, "reconstruction error {err} for {n}x{d}");
            }
        }
    }

    #[test]
    fn mean_vector_projects_to_zero() {
        let samples = vec![
            vec![1.0, 0.0, 2.0],
            vec![3.0, 1.0, 0.0],
            vec![-1.0, 2.0, 1.0],
            vec![0.5, -1.0, 4.0],
        ];
        let model = fit(&samples);
        let p = project(&model, &model.mean.clone(), model.axes.len());
        assert!(p.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn separated_blobs_classify_diagonally() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut projections = Vec::new();
        let mut labels = Vec::new();
        for (label, center) in [(0i32, [0.0, 0.0]), (1, [10.0, 0.0]), (2, [0.0, 10.0])] {
            for _ in 0..20 {
                projections.push(vec![
                    center[0] + rng.gen_range(-0.5..0.5),
                    center[1] + rng.gen_range(-0.5..0.5),
                ]);
                labels.push(label);
            }
        }
        let report = cluster_report(&projections, &labels);
        assert_eq!(report.accuracy, 1.0);
        for (i, row) in report.confusion.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(v, if i == j { 20 } else { 0 });
            }
        }
    }

    #[test]
    fn sign_convention_is_deterministic() {
        let samples = vec![
            vec![1.0, -2.0],
            vec![-1.0, 2.0],
            vec![2.0, -4.0],
            vec![-2.0, 4.0],
        ];
        let model = fit(&samples);
        // largest-magnitude entry of each axis must be positive
        for axis in &model.axes {
            let max = axis.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = axis.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(max.abs() >= min.abs());
            assert!(max > 0.0);
        }
    }
}
