//! The three augmentation pipelines: none, simple (crop + flip), and random
//! augmentation over a small op pool.
//!
//! Rasters are `[c,h,w]` tensors with values in `[0,1]`; that range doubles as
//! the clip range after value ops. Vector samples fall back to Gaussian jitter
//! so every pipeline also runs on non-image data.

use alloc::vec::Vec;
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Error;
use crate::tensor::Tensor;
use crate::Result;

/// Which augmentation pipeline a training run uses.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum AugMode {
    None,
    /// Random crop with padding of 4 plus horizontal flips.
    Simple,
    /// `n` ops drawn uniformly from the pool, each at magnitude `m` (0-30).
    RandAug { n: usize, m: u8 },
}

impl AugMode {
    pub fn validate(&self) -> Result<()> {
        match self {
            AugMode::RandAug { n, m } => {
                if *n == 0 {
                    return Err(Error::invalid("randaug N must be at least 1"));
                }
                if *m > 30 {
                    return Err(Error::invalid("randaug M must lie in 0..=30"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AugMode::None => "none",
            AugMode::Simple => "simple",
            AugMode::RandAug { .. } => "randaug",
        }
    }
}

fn raster_dims(img: &Tensor) -> Result<(usize, usize, usize)> {
    match img.shape() {
        [c, h, w] => Ok((*c, *h, *w)),
        other => Err(Error::ShapeMismatch { expected: vec![0, 0, 0], got: other.to_vec() }),
    }
}

/// Mirror a raster along its width axis.
pub fn hflip(img: &Tensor) -> Result<Tensor> {
    let (c, h, w) = raster_dims(img)?;
    let src = img.data();
    let mut out = vec![0.0; src.len()];
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                out[(ch * h + y) * w + x] = src[(ch * h + y) * w + (w - 1 - x)];
            }
        }
    }
    Tensor::new(vec![c, h, w], out)
}

/// Zero-pad by `pad` on every side, then crop back to the original size at the
/// given offset in `0..=2*pad`. Offset `(pad, pad)` is the identity.
pub fn crop_padded(img: &Tensor, pad: usize, off_y: usize, off_x: usize) -> Result<Tensor> {
    let (c, h, w) = raster_dims(img)?;
    if off_y > 2 * pad || off_x > 2 * pad {
        return Err(Error::invalid("crop offset exceeds padding"));
    }
    let src = img.data();
    let mut out = vec![0.0; src.len()];
    for ch in 0..c {
        for y in 0..h {
            let sy = y as isize + off_y as isize - pad as isize;
            if sy < 0 || sy >= h as isize {
                continue;
            }
            for x in 0..w {
                let sx = x as isize + off_x as isize - pad as isize;
                if sx < 0 || sx >= w as isize {
                    continue;
                }
                out[(ch * h + y) * w + x] = src[(ch * h + sy as usize) * w + sx as usize];
            }
        }
    }
    Tensor::new(vec![c, h, w], out)
}

/// Gaussian jitter for vector samples: sigma = 0.05 * feature std.
pub fn gaussian_jitter<R: Rng>(x: &Tensor, rng: &mut R) -> Tensor {
    let n = x.numel() as f64;
    let mean = x.data().iter().sum::<f64>() / n;
    let var = x.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sigma = 0.05 * Float::sqrt(var);
    let data = x
        .data()
        .iter()
        .map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Tensor::new(x.shape().to_vec(), data).expect("same shape")
}

/// Random crop (padding 4) plus horizontal flip; vectors get Gaussian jitter.
pub fn simple_augment<R: Rng>(x: &Tensor, rng: &mut R) -> Tensor {
    if x.rank() != 3 {
        return gaussian_jitter(x, rng);
    }
    let pad = 4;
    let off_y = rng.random_range(0..=2 * pad);
    let off_x = rng.random_range(0..=2 * pad);
    let cropped = crop_padded(x, pad, off_y, off_x).expect("offset within padding");
    if rng.random_bool(0.5) {
        hflip(&cropped).expect("raster input")
    } else {
        cropped
    }
}

// ---- random-augmentation op pool --------------------------------------------

const OP_POOL: [&str; 8] = [
    "translate-x",
    "translate-y",
    "rotate",
    "shear-x",
    "shear-y",
    "brightness",
    "contrast",
    "cutout",
];

fn clip01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Inverse-map every output pixel through an affine transform, nearest neighbor.
fn warp(img: &Tensor, m: [f64; 4], t: [f64; 2]) -> Result<Tensor> {
    let (c, h, w) = raster_dims(img)?;
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let src = img.data();
    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            let dy = y as f64 - cy;
            let dx = x as f64 - cx;
            let sy = Float::round(m[0] * dy + m[1] * dx + cy + t[0]);
            let sx = Float::round(m[2] * dy + m[3] * dx + cx + t[1]);
            if sy < 0.0 || sy >= h as f64 || sx < 0.0 || sx >= w as f64 {
                continue;
            }
            let (sy, sx) = (sy as usize, sx as usize);
            for ch in 0..c {
                out[(ch * h + y) * w + x] = src[(ch * h + sy) * w + sx];
            }
        }
    }
    Tensor::new(vec![c, h, w], out)
}

fn apply_op<R: Rng>(name: &str, img: &Tensor, m: u8, rng: &mut R) -> Result<Tensor> {
    let (_, h, w) = raster_dims(img)?;
    let frac = m as f64 / 30.0;
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    match name {
        // magnitude maps linearly: max shift = w/3 (or h/3) pixels at M=30
        "translate-x" => {
            let shift = Float::round(frac * w as f64 / 3.0) * sign;
            warp(img, [1.0, 0.0, 0.0, 1.0], [0.0, -shift])
        }
        "translate-y" => {
            let shift = Float::round(frac * h as f64 / 3.0) * sign;
            warp(img, [1.0, 0.0, 0.0, 1.0], [-shift, 0.0])
        }
        // max angle 30 degrees at M=30
        "rotate" => {
            let theta = sign * frac * 30.0 * core::f64::consts::PI / 180.0;
            let (s, c) = (Float::sin(theta), Float::cos(theta));
            warp(img, [c, s, -s, c], [0.0, 0.0])
        }
        // max shear factor 0.3 at M=30
        "shear-x" => warp(img, [1.0, 0.0, sign * frac * 0.3, 1.0], [0.0, 0.0]),
        "shear-y" => warp(img, [1.0, sign * frac * 0.3, 0.0, 1.0], [0.0, 0.0]),
        // max brightness delta 0.4 at M=30
        "brightness" => {
            let delta = sign * frac * 0.4;
            let data = img.data().iter().map(|v| clip01(v + delta)).collect();
            Tensor::new(img.shape().to_vec(), data)
        }
        // contrast scales around the mean, max factor change 0.6 at M=30
        "contrast" => {
            let factor = 1.0 + sign * frac * 0.6;
            let mean = img.data().iter().sum::<f64>() / img.numel() as f64;
            let data = img.data().iter().map(|v| clip01((v - mean) * factor + mean)).collect();
            Tensor::new(img.shape().to_vec(), data)
        }
        // square of side min(h,w)/2 at M=30, zeroed at a random center
        "cutout" => {
            let side = Float::round(frac * h.min(w) as f64 / 2.0) as usize;
            let mut out = img.clone();
            if side > 0 {
                let cy = rng.random_range(0..h);
                let cx = rng.random_range(0..w);
                let (c, _, _) = raster_dims(img)?;
                for ch in 0..c {
                    for y in cy.saturating_sub(side / 2)..(cy + side.div_ceil(2)).min(h) {
                        for x in cx.saturating_sub(side / 2)..(cx + side.div_ceil(2)).min(w) {
                            out.data_mut()[(ch * h + y) * w + x] = 0.0;
                        }
                    }
                }
            }
            Ok(out)
        }
        other => Err(Error::invalid(format!("unknown augmentation op {other}"))),
    }
}

/// Apply exactly `n` ops drawn uniformly from the pool, each at magnitude `m`.
/// Returns the augmented raster and the drawn op names.
pub fn rand_augment<R: Rng>(
    x: &Tensor,
    n: usize,
    m: u8,
    rng: &mut R,
) -> Result<(Tensor, Vec<&'static str>)> {
    if n == 0 {
        return Err(Error::invalid("randaug N must be at least 1"));
    }
    if m > 30 {
        return Err(Error::invalid("randaug M must lie in 0..=30"));
    }
    if x.rank() != 3 {
        return Ok((gaussian_jitter(x, rng), vec!["gaussian-jitter"]));
    }
    let mut img = x.clone();
    let mut log = Vec::with_capacity(n);
    for _ in 0..n {
        let name = OP_POOL[rng.random_range(0..OP_POOL.len())];
        img = apply_op(name, &img, m, rng)?;
        log.push(name);
    }
    Ok((img, log))
}

/// Dispatch on the configured mode. `AugMode::None` clones the input.
pub fn augment<R: Rng>(x: &Tensor, mode: &AugMode, rng: &mut R) -> Result<Tensor> {
    match mode {
        AugMode::None => Ok(x.clone()),
        AugMode::Simple => Ok(simple_augment(x, rng)),
        AugMode::RandAug { n, m } => Ok(rand_augment(x, *n, *m, rng)?.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rngutil::stream_rng;

    fn raster_8x8(seed: u64) -> Tensor {
        let mut rng = stream_rng(seed, 0);
        let data: Vec<f64> = (0..64).map(|_| rng.random_range(0.0..1.0)).collect();
        Tensor::new(vec![1, 8, 8], data).unwrap()
    }

    #[test]
    fn flip_is_an_involution() {
        let img = raster_8x8(1);
        let twice = hflip(&hflip(&img).unwrap()).unwrap();
        assert_eq!(twice, img);
    }

    #[test]
    fn center_crop_is_identity() {
        let img = raster_8x8(2);
        assert_eq!(crop_padded(&img, 4, 4, 4).unwrap(), img);
    }

    #[test]
    fn crop_offset_bounds_checked() {
        let img = raster_8x8(3);
        assert!(crop_padded(&img, 4, 9, 0).is_err());
    }

    #[test]
    fn simple_augment_preserves_shape_and_range() {
        let img = raster_8x8(4);
        let mut rng = stream_rng(11, 0);
        for _ in 0..100 {
            let out = simple_augment(&img, &mut rng);
            assert_eq!(out.shape(), &[1, 8, 8]);
            assert!(out.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn zero_magnitude_randaug_is_identity() {
        let img = raster_8x8(5);
        let mut rng = stream_rng(12, 0);
        for _ in 0..50 {
            let (out, ops) = rand_augment(&img, 2, 0, &mut rng).unwrap();
            assert_eq!(out, img, "op sequence {ops:?} changed the image at M=0");
        }
    }

    #[test]
    fn randaug_draws_n_ops_and_logs_names() {
        let img = raster_8x8(6);
        let mut rng = stream_rng(13, 0);
        let (out, ops) = rand_augment(&img, 2, 10, &mut rng).unwrap();
        assert_eq!(ops.len(), 2);
        assert_eq!(out.shape(), img.shape());
        for op in ops {
            assert!(OP_POOL.contains(&op));
        }
    }

    #[test]
    fn randaug_deterministic_under_fixed_seed() {
        let img = raster_8x8(7);
        let a = rand_augment(&img, 2, 10, &mut stream_rng(42, 0)).unwrap();
        let b = rand_augment(&img, 2, 10, &mut stream_rng(42, 0)).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn vector_falls_back_to_jitter() {
        let x = Tensor::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let mut rng = stream_rng(8, 0);
        let out = simple_augment(&x, &mut rng);
        assert_eq!(out.shape(), x.shape());
        assert_ne!(out, x);
        let (r, ops) = rand_augment(&x, 2, 10, &mut rng).unwrap();
        assert_eq!(r.shape(), x.shape());
        assert_eq!(ops, vec!["gaussian-jitter"]);
    }
}
