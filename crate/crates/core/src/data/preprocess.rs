//! Decoding, bilinear resizing and per-channel normalisation.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{shape_str, Tensor};

pub const IMAGE_SIZE: usize = 64;
pub const MEAN: [f64; 3] = [0.485, 0.456, 0.406];
pub const STD: [f64; 3] = [0.229, 0.224, 0.225];

/// Decodes a PNG/PNM file to `[3, H, W]` with values in `[0, 1]`.
pub fn decode_image(path: &Path) -> Result<Tensor> {
    let img = image::open(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let plane = w * h;
    let mut data = vec![0.0; 3 * plane];
    let wide = matches!(
        img.color(),
        image::ColorType::Rgb16 | image::ColorType::Rgba16 | image::ColorType::L16 | image::ColorType::La16
    );
    if wide {
        for (i, px) in img.into_rgb16().pixels().enumerate() {
            for c in 0..3 {
                data[c * plane + i] = px.0[c] as f64 / 65535.0;
            }
        }
    } else {
        for (i, px) in img.into_rgb8().pixels().enumerate() {
            for c in 0..3 {
                data[c * plane + i] = px.0[c] as f64 / 255.0;
            }
        }
    }
    Tensor::new(vec![3, h, w], data)
}

/// Bilinear resampling with half-pixel centres and edge clamping.
pub fn resize_bilinear(img: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let s = img.shape();
    if s.len() != 3 || out_h == 0 || out_w == 0 {
        return Err(Error::dim(format!(
            "resize {} to {out_h}×{out_w}",
            shape_str(s)
        )));
    }
    let (c, h, w) = (s[0], s[1], s[2]);
    // (index, weight of the upper neighbour) per output coordinate
    let taps = |n_in: usize, n_out: usize| -> Vec<(usize, usize, f64)> {
        let scale = n_in as f64 / n_out as f64;
        (0..n_out)
            .map(|o| {
                let src = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (n_in - 1) as f64);
                let lo = src.floor() as usize;
                let hi = (lo + 1).min(n_in - 1);
                (lo, hi, src - lo as f64)
            })
            .collect()
    };
    let (ty, tx) = (taps(h, out_h), taps(w, out_w));
    let src = img.data();
    let mut out = Vec::with_capacity(c * out_h * out_w);
    for ch in 0..c {
        let p = &src[ch * h * w..(ch + 1) * h * w];
        for &(y0, y1, fy) in &ty {
            for &(x0, x1, fx) in &tx {
                let top = p[y0 * w + x0] * (1.0 - fx) + p[y0 * w + x1] * fx;
                let bot = p[y1 * w + x0] * (1.0 - fx) + p[y1 * w + x1] * fx;
                out.push(top * (1.0 - fy) + bot * fy);
            }
        }
    }
    Tensor::new(vec![c, out_h, out_w], out)
}

fn per_channel(img: &Tensor, f: impl Fn(usize, f64) -> f64) -> Result<Tensor> {
    let s = img.shape();
    if s.len() != 3 || s[0] != 3 {
        return Err(Error::dim(format!("expected [3, H, W], got {}", shape_str(s))));
    }
    let plane = s[1] * s[2];
    Ok(Tensor::from_fn(s, |i| f(i / plane, img.data()[i])))
}

/// `(x − mean_c) / std_c` per channel.
pub fn normalize(img: &Tensor) -> Result<Tensor> {
    per_channel(img, |c, x| (x - MEAN[c]) / STD[c])
}

pub fn denormalize(img: &Tensor) -> Result<Tensor> {
    per_channel(img, |c, x| x * STD[c] + MEAN[c])
}

/// decode → resize to `size`×`size` → normalise.
pub fn load_and_preprocess(path: &Path, size: usize) -> Result<Tensor> {
    let raw = decode_image(path)?;
    normalize(&resize_bilinear(&raw, size, size)?)
}
