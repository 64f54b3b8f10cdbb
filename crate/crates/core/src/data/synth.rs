//! Synthetic thermograms separable by construction.
//!
//! Each image is a temperature field `t(x, y)` in `[0, 1]`: a warm body
//! whose intensity falls off quadratically from a jittered centre, plus
//! pixel noise. Malignant samples add 2–4 Gaussian hot spots. The field is
//! mapped to RGB through a monotone thermal palette and written as PNG.

use std::fs;
use std::path::Path;

use super::manifest::{DatasetManifest, Record, CLASS_NAMES};
use super::preprocess::IMAGE_SIZE;
use super::split::{stratified_split, Split};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HotSpot {
    pub x: f64,
    pub y: f64,
    pub sigma: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub manifest: DatasetManifest,
    /// Hot spots per record, empty for normal samples.
    pub hot_spots: Vec<Vec<HotSpot>>,
}

const SYNTH_TAG: u64 = 0x7379_6e74; // "synt"

fn palette(t: f64) -> [f64; 3] {
    let c = |v: f64| v.clamp(0.0, 1.0);
    [c(1.6 * t), c(1.6 * t - 0.5), c(0.35 - 0.6 * t) + c(2.0 * t - 1.6)]
}

fn field(rng: &mut Rng, spots: &[HotSpot]) -> Vec<f64> {
    let n = IMAGE_SIZE as f64;
    let (cx, cy) = (n / 2.0 + rng.uniform_range(-6.0, 6.0), n / 2.0 + rng.uniform_range(-6.0, 6.0));
    let base = rng.uniform_range(0.35, 0.5);
    let radius = rng.uniform_range(0.55, 0.7) * n;
    let mut t = Vec::with_capacity(IMAGE_SIZE * IMAGE_SIZE);
    for y in 0..IMAGE_SIZE {
        for x in 0..IMAGE_SIZE {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let r2 = ((px - cx).powi(2) + (py - cy).powi(2)) / (radius * radius);
            let mut v = base * (1.0 - r2).max(0.0) + 0.03 * rng.normal();
            for s in spots {
                let d2 = (px - s.x).powi(2) + (py - s.y).powi(2);
                v += s.amplitude * (-d2 / (2.0 * s.sigma * s.sigma)).exp();
            }
            t.push(v.clamp(0.0, 1.0));
        }
    }
    t
}

fn draw_spots(rng: &mut Rng) -> Vec<HotSpot> {
    let n = IMAGE_SIZE as f64;
    let k = 2 + rng.below(3);
    (0..k)
        .map(|_| {
            let (r, a) = (rng.uniform_range(0.0, 0.3 * n), rng.uniform_range(0.0, std::f64::consts::TAU));
            HotSpot {
                x: n / 2.0 + r * a.cos(),
                y: n / 2.0 + r * a.sin(),
                sigma: rng.uniform_range(5.0, 8.0),
                amplitude: rng.uniform_range(0.5, 0.65),
            }
        })
        .collect()
}

/// Writes `n_per_class` images of each class under `out/<class>/` plus
/// `out/manifest.tsv` with a seeded stratified split.
pub fn synth_dataset(out: &Path, n_per_class: usize, seed: u64) -> Result<SynthOutput> {
    if n_per_class < 4 {
        return Err(Error::config(format!("synthetic dataset needs at least 4 images per class, got {n_per_class}")));
    }
    let mut records = Vec::new();
    let mut hot_spots = Vec::new();
    for (label, name) in CLASS_NAMES.iter().enumerate() {
        let dir = out.join(name);
        fs::create_dir_all(&dir).map_err(|e| Error::file(&dir, e))?;
        for i in 0..n_per_class {
            let mut rng = Rng::substream(seed, &[SYNTH_TAG, label as u64, i as u64]);
            let spots = if label == 1 { draw_spots(&mut rng) } else { Vec::new() };
            let t = field(&mut rng, &spots);
            let mut img = image::RgbImage::new(IMAGE_SIZE as u32, IMAGE_SIZE as u32);
            for (px, &v) in img.pixels_mut().zip(&t) {
                let rgb = palette(v);
                px.0 = rgb.map(|c| (c * 255.0).round() as u8);
            }
            let rel = Path::new(name).join(format!("{name}_{i:03}.png"));
            let path = out.join(&rel);
            img.save(&path).map_err(|e| Error::Image { path: path.clone(), detail: e.to_string() })?;
            records.push(Record { path: rel, label, split: Split::Train });
            hot_spots.push(spots);
        }
    }
    let labels: Vec<usize> = records.iter().map(|r| r.label).collect();
    for (r, s) in records.iter_mut().zip(stratified_split(&labels, (80, 20), seed)?) {
        r.split = s;
    }
    let manifest = DatasetManifest {
        records,
        seed,
        source: format!("synthetic n_per_class={n_per_class}"),
        root: out.to_path_buf(),
    };
    manifest.write(&out.join("manifest.tsv"))?;
    Ok(SynthOutput { manifest, hot_spots })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::preprocess::decode_image;

    #[test]
    fn palette_intensity_is_monotone() {
        let mut prev = -1.0;
        for k in 0..=100 {
            let s: f64 = palette(k as f64 / 100.0).iter().sum();
            assert!(s >= prev - 1e-12);
            prev = s;
        }
    }

    #[test]
    fn counts_determinism_and_hot_spot_contrast() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let out = synth_dataset(a.path(), 12, 42).unwrap();
        synth_dataset(b.path(), 12, 42).unwrap();
        assert_eq!(out.manifest.records.len(), 24);
        assert_eq!(out.manifest.counts(Split::Train), [9, 9]);
        for r in &out.manifest.records {
            assert_eq!(fs::read(a.path().join(&r.path)).unwrap(), fs::read(b.path().join(&r.path)).unwrap());
        }
        assert_eq!(
            fs::read(a.path().join("manifest.tsv")).unwrap().len(),
            fs::read(b.path().join("manifest.tsv")).unwrap().len()
        );
        // hot-spot discs are brighter than the same discs in the paired normal image
        let mut wins = 0;
        let mut total = 0;
        for i in 0..12 {
            let normal = decode_image(&a.path().join(&out.manifest.records[i].path)).unwrap();
            let sick = decode_image(&a.path().join(&out.manifest.records[12 + i].path)).unwrap();
            for s in &out.hot_spots[12 + i] {
                let disc = |img: &crate::tensor::Tensor| {
                    let (mut acc, mut n) = (0.0, 0);
                    for y in 0..IMAGE_SIZE {
                        for x in 0..IMAGE_SIZE {
                            if (x as f64 + 0.5 - s.x).powi(2) + (y as f64 + 0.5 - s.y).powi(2) <= s.sigma.powi(2) {
                                acc += (0..3).map(|c| img.data()[c * 4096 + y * 64 + x]).sum::<f64>();
                                n += 1;
                            }
                        }
                    }
                    acc / n.max(1) as f64
                };
                total += 1;
                wins += (disc(&sick) > disc(&normal)) as usize;
            }
            assert!(out.hot_spots[i].is_empty());
            assert!((2..=4).contains(&out.hot_spots[12 + i].len()));
        }
        assert!(wins as f64 >= 0.95 * total as f64, "{wins}/{total}");
    }

    #[test]
    fn too_few_per_class() {
        let d = tempfile::tempdir().unwrap();
        assert!(matches!(synth_dataset(d.path(), 2, 0), Err(Error::Config(_))));
    }
}
