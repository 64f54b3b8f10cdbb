//! Train-time augmentation in `[0, 1]` pixel space.

use super::split::Split;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{shape_str, Tensor};

/// One draw of augmentation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentParams {
    pub flip: bool,
    pub angle_deg: f64,
    pub brightness: f64,
    pub contrast: f64,
}

impl AugmentParams {
    pub fn identity() -> Self {
        Self { flip: false, angle_deg: 0.0, brightness: 1.0, contrast: 1.0 }
    }

    /// Draws flip, angle, brightness, contrast in that order.
    pub fn sample(rng: &mut Rng) -> Self {
        Self {
            flip: rng.bernoulli(0.5),
            angle_deg: rng.uniform_range(-10.0, 10.0),
            brightness: rng.uniform_range(0.8, 1.2),
            contrast: rng.uniform_range(0.8, 1.2),
        }
    }

    /// flip → rotate → brightness → contrast, clamping after each
    /// photometric step.
    pub fn apply(&self, img: &Tensor) -> Result<Tensor> {
        let s = img.shape();
        if s.len() != 3 || s[0] != 3 {
            return Err(Error::dim(format!("augment expects [3, H, W], got {}", shape_str(s))));
        }
        let mut out = img.clone();
        if self.flip {
            out = hflip(&out);
        }
        if self.angle_deg != 0.0 {
            out = rotate(&out, self.angle_deg);
        }
        if self.brightness != 1.0 {
            out.data_mut().iter_mut().for_each(|x| *x = (*x * self.brightness).clamp(0.0, 1.0));
        }
        if self.contrast != 1.0 {
            let mean = gray_mean(&out);
            let c = self.contrast;
            out.data_mut()
                .iter_mut()
                .for_each(|x| *x = (c * *x + (1.0 - c) * mean).clamp(0.0, 1.0));
        }
        Ok(out)
    }
}

fn hflip(img: &Tensor) -> Tensor {
    let w = img.shape()[2];
    Tensor::from_fn(img.shape(), |k| {
        let (row, x) = (k / w, k % w);
        img.data()[row * w + (w - 1 - x)]
    })
}

/// Counter-clockwise rotation about the image centre; samples outside
/// the source take the nearest edge value.
fn rotate(img: &Tensor, deg: f64) -> Tensor {
    let (h, w) = (img.shape()[1], img.shape()[2]);
    let (sin, cos) = deg.to_radians().sin_cos();
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let src = img.data();
    Tensor::from_fn(img.shape(), |k| {
        let (c, y, x) = (k / (h * w), (k / w) % h, k % w);
        let (dy, dx) = (y as f64 - cy, x as f64 - cx);
        // inverse map: rotate the output coordinate back by −deg
        let sx = (cos * dx - sin * dy + cx).clamp(0.0, (w - 1) as f64);
        let sy = (sin * dx + cos * dy + cy).clamp(0.0, (h - 1) as f64);
        let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
        let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
        let p = &src[c * h * w..];
        let top = p[y0 * w + x0] * (1.0 - fx) + p[y0 * w + x1] * fx;
        let bot = p[y1 * w + x0] * (1.0 - fx) + p[y1 * w + x1] * fx;
        top * (1.0 - fy) + bot * fy
    })
}

/// Mean of the ITU-R 601 luma over all pixels.
fn gray_mean(img: &Tensor) -> f64 {
    let plane = img.shape()[1] * img.shape()[2];
    let d = img.data();
    (0..plane)
        .map(|i| 0.299 * d[i] + 0.587 * d[plane + i] + 0.114 * d[2 * plane + i])
        .sum::<f64>()
        / plane as f64
}

/// Random augmentation of a training sample.
pub fn augment(img: &Tensor, split: Split, rng: &mut Rng) -> Result<Tensor> {
    if split != Split::Train {
        return Err(Error::contract(format!("augmentation applied to a {split} sample")));
    }
    AugmentParams::sample(rng).apply(img)
}
