//! Synthetic sequence generation: a textured rectangle moving over a textured
//! background, with optional illumination, occlusion, and noise events. The
//! rendered challenges are desk-scale stand-ins for the aberrant-appearance
//! conditions UAV footage produces.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bench::loader::{groundtruth_text, save_frame};
use crate::error::Result;
use crate::imaging::{BBox, Frame};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MotionSpec {
    /// Constant-velocity translation in pixels per frame.
    Linear { vx: f64, vy: f64 },
    /// Sinusoidal sweep around the starting point.
    Sine {
        amplitude_x: f64,
        amplitude_y: f64,
        period: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventSpec {
    /// Scale every pixel of the frame by `factor` (clipped to 8 bits).
    Illumination { frame: usize, duration: usize, factor: f64 },
    /// Opaque textured strip covering `coverage` of the object width.
    Occlusion { frame: usize, duration: usize, coverage: f64 },
    /// Full-frame additive Gaussian noise.
    Noise { frame: usize, duration: usize, sigma: f64 },
}

impl EventSpec {
    fn active(&self, t: usize) -> bool {
        let (start, duration) = match self {
            EventSpec::Illumination { frame, duration, .. }
            | EventSpec::Occlusion { frame, duration, .. }
            | EventSpec::Noise { frame, duration, .. } => (*frame, *duration),
        };
        t >= start && t < start + duration
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub w: usize,
    pub h: usize,
    pub x0: f64,
    pub y0: f64,
}

/// Full description of a synthetic sequence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSpec {
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub seed: u64,
    pub object: ObjectSpec,
    pub motion: MotionSpec,
    #[serde(default)]
    pub events: Vec<EventSpec>,
}

/// A generated sequence held in memory.
#[derive(Debug, Clone)]
pub struct SyntheticSequence {
    pub name: String,
    pub frames: Vec<Frame>,
    pub groundtruth: Vec<BBox>,
}

fn object_position(spec: &SynthSpec, t: usize) -> (f64, f64) {
    match &spec.motion {
        MotionSpec::Linear { vx, vy } => (
            spec.object.x0 + vx * t as f64,
            spec.object.y0 + vy * t as f64,
        ),
        MotionSpec::Sine {
            amplitude_x,
            amplitude_y,
            period,
        } => {
            let phase = 2.0 * std::f64::consts::PI * t as f64 / period;
            (
                spec.object.x0 + amplitude_x * phase.sin(),
                spec.object.y0 + amplitude_y * (1.0 - phase.cos()),
            )
        }
    }
}

/// Render the sequence described by `spec`. Textures are seeded, so identical
/// specs generate identical pixel data.
pub fn make_synthetic(spec: &SynthSpec) -> SyntheticSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (w, h) = (spec.width, spec.height);
    let background: Vec<u8> = (0..w * h).map(|_| rng.random_range(40..100)).collect();
    // Object texture sampled bilinearly so sub-pixel motion stays smooth.
    let (ow, oh) = (spec.object.w, spec.object.h);
    let texture: Vec<f64> = (0..(ow + 1) * (oh + 1))
        .map(|_| rng.random_range(130.0..240.0))
        .collect();
    let tex = |x: f64, y: f64| -> f64 {
        let xc = x.clamp(0.0, ow as f64 - 1e-9);
        let yc = y.clamp(0.0, oh as f64 - 1e-9);
        let (x0, y0) = (xc.floor() as usize, yc.floor() as usize);
        let (ax, ay) = (xc - x0 as f64, yc - y0 as f64);
        let at = |xx: usize, yy: usize| texture[yy * (ow + 1) + xx];
        at(x0, y0) * (1.0 - ax) * (1.0 - ay)
            + at(x0 + 1, y0) * ax * (1.0 - ay)
            + at(x0, y0 + 1) * (1.0 - ax) * ay
            + at(x0 + 1, y0 + 1) * ax * ay
    };
    let occluder: Vec<u8> = (0..w * h).map(|_| rng.random_range(0..40)).collect();
    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9e3779b97f4a7c15);

    let mut frames = Vec::with_capacity(spec.frames);
    let mut groundtruth = Vec::with_capacity(spec.frames);
    for t in 0..spec.frames {
        let (ox, oy) = object_position(spec, t);
        let mut pixels: Vec<f64> = background.iter().map(|&v| v as f64).collect();
        for py in 0..h {
            for px in 0..w {
                let rx = px as f64 - ox;
                let ry = py as f64 - oy;
                if rx >= 0.0 && ry >= 0.0 && rx < ow as f64 && ry < oh as f64 {
                    pixels[py * w + px] = tex(rx, ry);
                }
            }
        }
        for event in &spec.events {
            if !event.active(t) {
                continue;
            }
            match event {
                EventSpec::Illumination { factor, .. } => {
                    for v in pixels.iter_mut() {
                        *v *= factor;
                    }
                }
                EventSpec::Occlusion { coverage, .. } => {
                    // Strip over the leading part of the object box only.
                    let strip_w = (ow as f64 * coverage).round() as usize;
                    let x0 = ox.round().max(0.0) as usize;
                    let y0 = oy.round().max(0.0) as usize;
                    for py in y0..(y0 + oh).min(h) {
                        for px in x0..(x0 + strip_w).min(w) {
                            pixels[py * w + px] = occluder[py * w + px] as f64;
                        }
                    }
                }
                EventSpec::Noise { sigma, .. } => {
                    let normal = rand_distr::Normal::new(0.0, *sigma).expect("sigma >= 0");
                    for v in pixels.iter_mut() {
                        *v += noise_rng.sample(normal);
                    }
                }
            }
        }
        let data: Vec<u8> = pixels
            .iter()
            .map(|&v| v.round().clamp(0.0, 255.0) as u8)
            .collect();
        frames.push(Frame::new(w, h, 1, data).expect("valid synthetic frame"));
        groundtruth.push(BBox::new(ox, oy, ow as f64, oh as f64));
    }
    SyntheticSequence {
        name: spec.name.clone(),
        frames,
        groundtruth,
    }
}

/// Write a generated sequence in the on-disk layout the loader expects.
pub fn write_synthetic(seq: &SyntheticSequence, dir: &Path) -> Result<()> {
    let img = dir.join("img");
    std::fs::create_dir_all(&img)?;
    for (i, frame) in seq.frames.iter().enumerate() {
        save_frame(frame, &img.join(format!("{:04}.png", i + 1)))?;
    }
    std::fs::write(
        dir.join("groundtruth_rect.txt"),
        groundtruth_text(&seq.groundtruth),
    )?;
    Ok(())
}

/// The bundled three-sequence suite: plain translation, an illumination
/// surge, and a partial occlusion, all over the same 3 px/frame path.
pub fn desk_suite() -> Vec<SynthSpec> {
    let base = SynthSpec {
        name: "translate".to_string(),
        width: 400,
        height: 160,
        frames: 100,
        seed: 20,
        object: ObjectSpec {
            w: 40,
            h: 40,
            x0: 24.0,
            y0: 60.0,
        },
        motion: MotionSpec::Linear { vx: 3.0, vy: 0.0 },
        events: Vec::new(),
    };
    let mut illumination = base.clone();
    illumination.name = "illumination".to_string();
    illumination.events = vec![EventSpec::Illumination {
        frame: 40,
        duration: 20,
        factor: 1.8,
    }];
    let mut occlusion = base.clone();
    occlusion.name = "occlusion".to_string();
    occlusion.events = vec![EventSpec::Occlusion {
        frame: 50,
        duration: 12,
        coverage: 0.5,
    }];
    vec![base, illumination, occlusion]
}
