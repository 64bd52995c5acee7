//! Affine image transforms.
//!
//! The same warping machinery serves two purposes: the fixed test-time
//! augmentation catalogue used by the quality metric, and the seeded random
//! augmentation used when training a classifier.

use crate::types::Frame;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TransformError {
    #[error("invalid transform spec: {0}")]
    InvalidSpec(String),
    #[error("invalid catalogue: {0}")]
    InvalidCatalogue(String),
}

/// One affine transform. Angles are degrees, translations are fractions of
/// the frame dimensions, and `Scale` zooms in (center crop of the `1/factor`
/// region resampled to full size).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AffineSpec {
    Identity,
    HorizontalFlip,
    VerticalFlip,
    Rotate { angle: f64 },
    Translate { dx: f64, dy: f64 },
    Scale { factor: f64 },
}

impl AffineSpec {
    pub fn validate(&self) -> Result<(), TransformError> {
        match *self {
            AffineSpec::Identity | AffineSpec::HorizontalFlip | AffineSpec::VerticalFlip => Ok(()),
            AffineSpec::Rotate { angle } => {
                if angle.is_finite() && (-180.0..=180.0).contains(&angle) {
                    Ok(())
                } else {
                    Err(TransformError::InvalidSpec(format!(
                        "rotation angle {angle} outside [-180, 180]"
                    )))
                }
            }
            AffineSpec::Translate { dx, dy } => {
                if dx.is_finite() && dy.is_finite() && dx.abs() <= 0.5 && dy.abs() <= 0.5 {
                    Ok(())
                } else {
                    Err(TransformError::InvalidSpec(format!(
                        "translation ({dx}, {dy}) outside +-0.5"
                    )))
                }
            }
            AffineSpec::Scale { factor } => {
                if factor.is_finite() && (1.0..=2.0).contains(&factor) {
                    Ok(())
                } else {
                    Err(TransformError::InvalidSpec(format!(
                        "scale factor {factor} outside [1, 2]"
                    )))
                }
            }
        }
    }
}

/// Ordered list of transforms for test-time augmentation. The untransformed
/// video always comes first as `Identity`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtaCatalogue {
    specs: Vec<AffineSpec>,
}

impl TtaCatalogue {
    pub fn new(specs: Vec<AffineSpec>) -> Result<TtaCatalogue, TransformError> {
        if specs.first() != Some(&AffineSpec::Identity) {
            return Err(TransformError::InvalidCatalogue(
                "first entry must be identity".into(),
            ));
        }
        for spec in &specs {
            spec.validate()?;
        }
        for (i, a) in specs.iter().enumerate() {
            if specs[..i].contains(a) {
                return Err(TransformError::InvalidCatalogue(format!(
                    "duplicate entry at index {i}: {a:?}"
                )));
            }
        }
        Ok(TtaCatalogue { specs })
    }

    /// Parse a catalogue from its JSON document form (an array of specs).
    pub fn from_json(text: &str) -> Result<TtaCatalogue, TransformError> {
        let specs: Vec<AffineSpec> = serde_json::from_str(text)
            .map_err(|e| TransformError::InvalidCatalogue(format!("parse error: {e}")))?;
        TtaCatalogue::new(specs)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.specs).unwrap()
    }

    pub fn specs(&self) -> &[AffineSpec] {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }
}

/// The 14-entry default catalogue: identity, horizontal flip, rotations by
/// +-15, +-10 and +-5 degrees, diagonal translations by +-10%, and zoom by
/// 5/10/15/20%.
pub fn default_tta_catalogue() -> TtaCatalogue {
    let specs = vec![
        AffineSpec::Identity,
        AffineSpec::HorizontalFlip,
        AffineSpec::Rotate { angle: 15.0 },
        AffineSpec::Rotate { angle: -15.0 },
        AffineSpec::Rotate { angle: 10.0 },
        AffineSpec::Rotate { angle: -10.0 },
        AffineSpec::Rotate { angle: 5.0 },
        AffineSpec::Rotate { angle: -5.0 },
        AffineSpec::Translate { dx: 0.10, dy: 0.10 },
        AffineSpec::Translate {
            dx: -0.10,
            dy: -0.10,
        },
        AffineSpec::Scale { factor: 1.05 },
        AffineSpec::Scale { factor: 1.10 },
        AffineSpec::Scale { factor: 1.15 },
        AffineSpec::Scale { factor: 1.20 },
    ];
    TtaCatalogue::new(specs).expect("default catalogue is valid")
}

/// Apply one transform to a frame. Output dimensions equal input dimensions,
/// out-of-source pixels are filled with 0, sampling is bilinear, and rotation
/// and scaling are about the frame center. Flips are exact index mirrors.
pub fn apply_affine(frame: &Frame, spec: &AffineSpec) -> Frame {
    let (w, h) = (frame.width(), frame.height());
    match *spec {
        AffineSpec::Identity => frame.clone(),
        AffineSpec::HorizontalFlip => {
            let mut out = vec![0.0f32; w * h];
            for y in 0..h {
                for x in 0..w {
                    out[y * w + x] = frame.get(w - 1 - x, y);
                }
            }
            Frame::new(out, w, h).unwrap()
        }
        AffineSpec::VerticalFlip => {
            let mut out = vec![0.0f32; w * h];
            for y in 0..h {
                for x in 0..w {
                    out[y * w + x] = frame.get(x, h - 1 - y);
                }
            }
            Frame::new(out, w, h).unwrap()
        }
        AffineSpec::Rotate { angle } => {
            let (cx, cy) = center(w, h);
            // Inverse map: rotate destination coords back by -angle.
            let t = -angle.to_radians();
            let (sin, cos) = t.sin_cos();
            warp(frame, |x, y| {
                let (dx, dy) = (x - cx, y - cy);
                (cx + cos * dx - sin * dy, cy + sin * dx + cos * dy)
            })
        }
        AffineSpec::Translate { dx, dy } => {
            let (tx, ty) = (dx * w as f64, dy * h as f64);
            warp(frame, |x, y| (x - tx, y - ty))
        }
        AffineSpec::Scale { factor } => {
            let (cx, cy) = center(w, h);
            warp(frame, |x, y| {
                (cx + (x - cx) / factor, cy + (y - cy) / factor)
            })
        }
    }
}

/// Seeded random training augmentation: a composition of scale in [0.9, 1.1],
/// horizontal and vertical flips (each p = 0.5), translation within +-10% and
/// rotation within +-15 degrees. Deterministic for a fixed seed.
pub fn random_train_augment(frame: &Frame, rng_seed: u64) -> Frame {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let scale: f64 = rng.gen_range(0.9..=1.1);
    let flip_h: bool = rng.gen();
    let flip_v: bool = rng.gen();
    let dx: f64 = rng.gen_range(-0.1..=0.1);
    let dy: f64 = rng.gen_range(-0.1..=0.1);
    let angle: f64 = rng.gen_range(-15.0..=15.0);

    let (w, h) = (frame.width(), frame.height());
    let (cx, cy) = center(w, h);
    let (tx, ty) = (dx * w as f64, dy * h as f64);
    let t = angle.to_radians();
    let (sin, cos) = t.sin_cos();
    let (fx, fy) = (
        if flip_h { -1.0 } else { 1.0 },
        if flip_v { -1.0 } else { 1.0 },
    );

    // Inverse of flip . translate . rotate . scale, all about the center.
    warp(frame, move |x, y| {
        let (mut dxp, mut dyp) = (x - cx, y - cy);
        dxp *= fx;
        dyp *= fy;
        dxp -= tx;
        dyp -= ty;
        let (rx, ry) = (cos * dxp + sin * dyp, -sin * dxp + cos * dyp);
        (cx + rx / scale, cy + ry / scale)
    })
}

/// Bilinear resize to the given dimensions, pixel-center aligned.
pub fn resize_bilinear(frame: &Frame, new_w: usize, new_h: usize) -> Frame {
    if new_w == frame.width() && new_h == frame.height() {
        return frame.clone();
    }
    let sx = frame.width() as f64 / new_w as f64;
    let sy = frame.height() as f64 / new_h as f64;
    let mut out = vec![0.0f32; new_w * new_h];
    for y in 0..new_h {
        for x in 0..new_w {
            let src_x = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, frame.width() as f64 - 1.0);
            let src_y = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, frame.height() as f64 - 1.0);
            out[y * new_w + x] = sample_bilinear(frame, src_x, src_y);
        }
    }
    Frame::new(out, new_w, new_h).expect("resize preserves range")
}

fn center(w: usize, h: usize) -> (f64, f64) {
    ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0)
}

/// Inverse-mapped warp with bilinear sampling and zero fill.
fn warp(frame: &Frame, inverse: impl Fn(f64, f64) -> (f64, f64)) -> Frame {
    let (w, h) = (frame.width(), frame.height());
    let mut out = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = inverse(x as f64, y as f64);
            out[y * w + x] = sample_bilinear(frame, sx, sy);
        }
    }
    Frame::new(out, w, h).expect("warp preserves shape and range")
}

fn sample_bilinear(frame: &Frame, x: f64, y: f64) -> f32 {
    let (w, h) = (frame.width() as i64, frame.height() as i64);
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (x0, y0) = (x0 as i64, y0 as i64);

    let at = |xi: i64, yi: i64| -> f64 {
        if xi < 0 || yi < 0 || xi >= w || yi >= h {
            0.0
        } else {
            frame.get(xi as usize, yi as usize) as f64
        }
    };

    let v = at(x0, y0) * (1.0 - fx) * (1.0 - fy)
        + at(x0 + 1, y0) * fx * (1.0 - fy)
        + at(x0, y0 + 1) * (1.0 - fx) * fy
        + at(x0 + 1, y0 + 1) * fx * fy;
    v.clamp(0.0, 1.0) as f32
}
