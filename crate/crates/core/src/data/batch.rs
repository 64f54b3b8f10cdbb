//! In-memory datasets and mini-batch iteration.

use super::augment::augment;
use super::manifest::DatasetManifest;
use super::preprocess::{decode_image, normalize, resize_bilinear};
use super::split::{stratified_split, Split};
use crate::error::{Error, Result};
use crate::par;
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Index batches covering `split` once, in manifest order or shuffled.
pub fn batch_iter(
    manifest: &DatasetManifest,
    split: Split,
    batch: usize,
    shuffle: bool,
    rng: &mut Rng,
) -> Result<Vec<Vec<usize>>> {
    if batch == 0 {
        return Err(Error::config("batch size must be positive"));
    }
    let mut idx = manifest.indices(split);
    if idx.is_empty() {
        return Err(Error::data(format!("{split} split is empty")));
    }
    if shuffle {
        rng.shuffle(&mut idx);
    }
    Ok(idx.chunks(batch).map(<[usize]>::to_vec).collect())
}

#[derive(Debug, Clone)]
pub struct Batch {
    pub indices: Vec<usize>,
    /// Normalised pixels `[B, 3, S, S]`.
    pub pixels: Tensor,
    pub labels: Vec<usize>,
}

/// Decoded and resized images held in `[0, 1]` space, so augmentation and
/// normalisation can be applied per epoch.
#[derive(Debug, Clone)]
pub struct Dataset {
    manifest: DatasetManifest,
    images: Vec<Tensor>,
    size: usize,
}

const AUGMENT_TAG: u64 = 0x6175_676d; // "augm"

impl Dataset {
    pub fn load(manifest: DatasetManifest, size: usize) -> Result<Self> {
        let images = par::map_indexed(manifest.records.len(), |i| {
            let raw = decode_image(&manifest.resolve(&manifest.records[i]))?;
            resize_bilinear(&raw, size, size)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        Ok(Self { manifest, images, size })
    }

    /// Same images with the train/val assignment redrawn for `seed`; test
    /// records keep their split.
    pub fn resplit(&self, seed: u64) -> Result<Self> {
        let mut manifest = self.manifest.clone();
        let pool: Vec<usize> = (0..manifest.records.len())
            .filter(|&i| manifest.records[i].split != Split::Test)
            .collect();
        let labels: Vec<usize> = pool.iter().map(|&i| manifest.records[i].label).collect();
        for (&i, s) in pool.iter().zip(stratified_split(&labels, (80, 20), seed)?) {
            manifest.records[i].split = s;
        }
        manifest.seed = seed;
        Ok(Self { manifest, images: self.images.clone(), size: self.size })
    }

    pub fn manifest(&self) -> &DatasetManifest {
        &self.manifest
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn raw(&self, i: usize) -> &Tensor {
        &self.images[i]
    }

    /// Normalised pixels of record `i`. With `augment = Some((seed, epoch))`
    /// a train sample is augmented from the `(seed, epoch, i)` substream.
    pub fn sample(&self, i: usize, augment_key: Option<(u64, u64)>) -> Result<Tensor> {
        match augment_key {
            None => normalize(&self.images[i]),
            Some((seed, epoch)) => {
                let mut rng = Rng::substream(seed, &[AUGMENT_TAG, epoch, i as u64]);
                normalize(&augment(&self.images[i], self.manifest.records[i].split, &mut rng)?)
            }
        }
    }

    pub fn batch(&self, indices: &[usize], augment_key: Option<(u64, u64)>) -> Result<Batch> {
        let per = 3 * self.size * self.size;
        let samples = par::map_indexed(indices.len(), |k| self.sample(indices[k], augment_key));
        let mut data = Vec::with_capacity(indices.len() * per);
        for s in samples {
            data.extend_from_slice(s?.data());
        }
        Ok(Batch {
            indices: indices.to_vec(),
            pixels: Tensor::new(vec![indices.len(), 3, self.size, self.size], data)?,
            labels: indices.iter().map(|&i| self.manifest.records[i].label).collect(),
        })
    }

    pub fn batches(
        &self,
        split: Split,
        batch: usize,
        shuffle: bool,
        rng: &mut Rng,
        augment_key: Option<(u64, u64)>,
    ) -> Result<impl Iterator<Item = Result<Batch>> + '_> {
        let plan = batch_iter(&self.manifest, split, batch, shuffle, rng)?;
        Ok(plan.into_iter().map(move |idx| self.batch(&idx, augment_key)))
    }
}
