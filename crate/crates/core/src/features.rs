//! Hand-crafted feature extraction: 31-channel gradient histograms (FHOG)
//! plus a centered grayscale channel, with optional color-attribute channels,
//! and the Hann windowing applied before spectral transforms.
//!
//! Channel layout: 18 signed orientations, 9 unsigned orientations, 4 block
//! energies, 1 grayscale, then (optionally) 11 color attributes.

use ndarray::{Array1, Array2, Array3};

use crate::error::{Error, Result};
use crate::imaging::Frame;

const ORIENTATIONS: usize = 9;
const SIGNED_ORIENTATIONS: usize = 2 * ORIENTATIONS;
const TEXTURE_CHANNELS: usize = 4;
/// FHOG channels before the grayscale channel is appended.
pub const FHOG_CHANNELS: usize = SIGNED_ORIENTATIONS + ORIENTATIONS + TEXTURE_CHANNELS;
const TRUNCATION: f64 = 0.2;
const NORM_EPS: f64 = 1e-10;

/// Multi-channel feature stack over a cell grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    /// (H_f, W_f, K), K innermost.
    pub data: Array3<f64>,
    /// Pixels per feature cell.
    pub cell_size: usize,
}

impl FeatureTensor {
    pub fn shape(&self) -> (usize, usize, usize) {
        let s = self.data.shape();
        (s[0], s[1], s[2])
    }
}

/// Which channel groups to extract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureChannels {
    pub grayscale: bool,
    pub color_names: bool,
}

impl Default for FeatureChannels {
    fn default() -> Self {
        FeatureChannels {
            grayscale: true,
            color_names: false,
        }
    }
}

impl FeatureChannels {
    pub fn count(&self) -> usize {
        FHOG_CHANNELS
            + usize::from(self.grayscale)
            + if self.color_names { COLOR_PROTOTYPES.len() } else { 0 }
    }
}

/// Extract the feature tensor for a patch. The patch is replicated on the
/// right/bottom edges to the next multiple of `cell_size` before binning.
pub fn extract_features(
    patch: &Frame,
    cell_size: usize,
    channels: FeatureChannels,
) -> Result<FeatureTensor> {
    assert!(cell_size >= 1);
    if patch.width() < cell_size || patch.height() < cell_size {
        return Err(Error::PatchTooSmall {
            width: patch.width(),
            height: patch.height(),
            cell_size,
        });
    }
    let gray = patch.to_gray();
    let padded_w = patch.width().div_ceil(cell_size) * cell_size;
    let padded_h = patch.height().div_ceil(cell_size) * cell_size;
    let mut lum = vec![0u8; padded_h * padded_w];
    for r in 0..padded_h {
        for c in 0..padded_w {
            lum[r * padded_w + c] = gray.get_clamped(c as i64, r as i64, 0);
        }
    }
    let hf = padded_h / cell_size;
    let wf = padded_w / cell_size;
    let k = channels.count();
    let mut out = Array3::zeros((hf, wf, k));

    fhog_into(&lum, padded_h, padded_w, cell_size, &mut out);

    let mut next = FHOG_CHANNELS;
    if channels.grayscale {
        // Cell-averaged luminance shifted to [-0.5, 0.5].
        for fr in 0..hf {
            for fc in 0..wf {
                let mut acc = 0.0;
                for dy in 0..cell_size {
                    for dx in 0..cell_size {
                        acc +=
                            lum[(fr * cell_size + dy) * padded_w + fc * cell_size + dx] as f64
                                / 255.0;
                    }
                }
                out[[fr, fc, next]] = acc / (cell_size * cell_size) as f64 - 0.5;
            }
        }
        next += 1;
    }
    if channels.color_names {
        color_names_into(patch, cell_size, hf, wf, next, &mut out);
    }

    Ok(FeatureTensor {
        data: out,
        cell_size,
    })
}

/// Orientation lookup: gradients are differences of 8-bit values, so the
/// signed-bin position of atan2(dy, dx) has only 511*511 possible inputs.
/// The table stores `angle / (2*pi) * 18` exactly as atan2 would produce it.
fn orientation_table() -> &'static [f64] {
    use std::sync::OnceLock;
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = vec![0.0f64; 511 * 511];
        for dy in -255i32..=255 {
            for dx in -255i32..=255 {
                let mut angle = (dy as f64 / 510.0).atan2(dx as f64 / 510.0);
                if angle < 0.0 {
                    angle += 2.0 * std::f64::consts::PI;
                }
                table[((dy + 255) * 511 + (dx + 255)) as usize] =
                    angle / (2.0 * std::f64::consts::PI) * SIGNED_ORIENTATIONS as f64;
            }
        }
        table
    })
}

/// Bilinear cell weights for one axis: pixel p contributes `w0` to cell `i0`
/// and `1 - w0` to cell `i0 + 1` (indices outside the grid are dropped).
fn axis_cell_weights(n_px: usize, cell: usize) -> Vec<(i64, f64)> {
    (0..n_px)
        .map(|p| {
            let cpos = (p as f64 + 0.5) / cell as f64 - 0.5;
            let i0 = cpos.floor();
            (i0 as i64, 1.0 - (cpos - i0))
        })
        .collect()
}

/// Felzenszwalb-style 31-channel gradient histogram features over an 8-bit
/// luminance grid of `h` x `w` pixels.
fn fhog_into(lum: &[u8], h: usize, w: usize, cell: usize, out: &mut Array3<f64>) {
    let hf = h / cell;
    let wf = w / cell;

    // Soft-binned signed orientation histograms per cell.
    let mut hist = vec![0.0f64; hf * wf * SIGNED_ORIENTATIONS];
    let idx = |fr: usize, fc: usize, o: usize| (fr * wf + fc) * SIGNED_ORIENTATIONS + o;
    let table = orientation_table();
    let row_w = axis_cell_weights(h, cell);
    let col_w = axis_cell_weights(w, cell);

    // Orientation vote of one pixel from its integer gradients.
    #[inline]
    fn vote(table: &[f64], dxi: i32, dyi: i32) -> (f64, usize, usize, f64, f64) {
        let dx = dxi as f64 / 510.0;
        let dy = dyi as f64 / 510.0;
        let mag = (dx * dx + dy * dy).sqrt();
        let pos = table[((dyi + 255) * 511 + dxi + 255) as usize];
        let o0 = pos as usize;
        let o1 = if o0 + 1 == SIGNED_ORIENTATIONS { 0 } else { o0 + 1 };
        let wo1 = pos - pos.floor();
        (mag, o0, o1, 1.0 - wo1, wo1)
    }

    #[allow(clippy::too_many_arguments)]
    fn scatter_checked(
        hist: &mut [f64],
        hf: usize,
        wf: usize,
        y_targets: [(i64, f64); 2],
        x_targets: [(i64, f64); 2],
        mag: f64,
        o0: usize,
        o1: usize,
        wo0: f64,
        wo1: f64,
    ) {
        for (fy, wy) in y_targets {
            if fy < 0 || fy >= hf as i64 {
                continue;
            }
            for (fx, wx) in x_targets {
                if fx < 0 || fx >= wf as i64 {
                    continue;
                }
                let weight = wy * wx * mag;
                let base = (fy as usize * wf + fx as usize) * SIGNED_ORIENTATIONS;
                hist[base + o0] += weight * wo0;
                hist[base + o1] += weight * wo1;
            }
        }
    }

    // Columns whose two target cells are both inside the grid; the fast path
    // also reads x-1 and x+1 directly, so stay off the pixel border.
    let x_lo = col_w
        .iter()
        .position(|&(i0, _)| i0 >= 0)
        .unwrap_or(w)
        .max(1);
    let x_hi = col_w
        .iter()
        .rposition(|&(i0, _)| i0 + 1 < wf as i64)
        .map_or(0, |i| i + 1)
        .min(w.saturating_sub(1))
        .max(x_lo);

    for y in 0..h {
        let row = &lum[y * w..(y + 1) * w];
        let above = &lum[y.saturating_sub(1) * w..y.saturating_sub(1) * w + w];
        let below = &lum[(y + 1).min(h - 1) * w..(y + 1).min(h - 1) * w + w];
        let (fy0, wy0) = row_w[y];
        let y_targets = [(fy0, wy0), (fy0 + 1, 1.0 - wy0)];
        let y_interior = fy0 >= 0 && fy0 + 1 < hf as i64;

        let checked_range = |hist: &mut Vec<f64>, xs: std::ops::Range<usize>| {
            for x in xs {
                let dxi = row[(x + 1).min(w - 1)] as i32 - row[x.saturating_sub(1)] as i32;
                let dyi = below[x] as i32 - above[x] as i32;
                if dxi == 0 && dyi == 0 {
                    continue;
                }
                let (mag, o0, o1, wo0, wo1) = vote(table, dxi, dyi);
                let (fx0, wx0) = col_w[x];
                scatter_checked(
                    hist,
                    hf,
                    wf,
                    y_targets,
                    [(fx0, wx0), (fx0 + 1, 1.0 - wx0)],
                    mag,
                    o0,
                    o1,
                    wo0,
                    wo1,
                );
            }
        };

        if !y_interior {
            checked_range(&mut hist, 0..w);
            continue;
        }
        checked_range(&mut hist, 0..x_lo);
        // Interior fast path: all four cell targets are valid by
        // construction, so the bounds branches drop out.
        let rb0 = (fy0 as usize * wf) * SIGNED_ORIENTATIONS;
        let rb1 = rb0 + wf * SIGNED_ORIENTATIONS;
        let wy1 = 1.0 - wy0;
        for x in x_lo..x_hi {
            let dxi = row[x + 1] as i32 - row[x - 1] as i32;
            let dyi = below[x] as i32 - above[x] as i32;
            if dxi == 0 && dyi == 0 {
                continue;
            }
            let (mag, o0, o1, wo0, wo1) = vote(table, dxi, dyi);
            let (fx0, wx0) = col_w[x];
            let cb0 = fx0 as usize * SIGNED_ORIENTATIONS;
            let cb1 = cb0 + SIGNED_ORIENTATIONS;
            let v00 = wy0 * wx0 * mag;
            let v01 = wy0 * (1.0 - wx0) * mag;
            let v10 = wy1 * wx0 * mag;
            let v11 = wy1 * (1.0 - wx0) * mag;
            hist[rb0 + cb0 + o0] += v00 * wo0;
            hist[rb0 + cb0 + o1] += v00 * wo1;
            hist[rb0 + cb1 + o0] += v01 * wo0;
            hist[rb0 + cb1 + o1] += v01 * wo1;
            hist[rb1 + cb0 + o0] += v10 * wo0;
            hist[rb1 + cb0 + o1] += v10 * wo1;
            hist[rb1 + cb1 + o0] += v11 * wo0;
            hist[rb1 + cb1 + o1] += v11 * wo1;
        }
        checked_range(&mut hist, x_hi..w);
    }

    // Per-cell contrast energy over folded (unsigned) orientations.
    let mut energy = Array2::zeros((hf, wf));
    for fr in 0..hf {
        for fc in 0..wf {
            let mut e = 0.0;
            for o in 0..ORIENTATIONS {
                let v = hist[idx(fr, fc, o)] + hist[idx(fr, fc, o + ORIENTATIONS)];
                e += v * v;
            }
            energy[[fr, fc]] = e;
        }
    }

    let clamp = |v: i64, hi: usize| v.clamp(0, hi as i64 - 1) as usize;
    let cell_energy =
        |fr: i64, fc: i64| energy[[clamp(fr, hf), clamp(fc, wf)]];
    for fr in 0..hf {
        for fc in 0..wf {
            let r = fr as i64;
            let c = fc as i64;
            // The four 2x2 blocks containing this cell, border-replicated.
            let norms: [f64; 4] = [(-1i64, -1i64), (-1, 1), (1, -1), (1, 1)].map(|(dr, dc)| {
                let sum = cell_energy(r, c)
                    + cell_energy(r + dr, c)
                    + cell_energy(r, c + dc)
                    + cell_energy(r + dr, c + dc);
                1.0 / (sum + NORM_EPS).sqrt()
            });

            let mut texture = [0.0f64; TEXTURE_CHANNELS];
            for o in 0..SIGNED_ORIENTATIONS {
                let v = hist[idx(fr, fc, o)];
                let mut acc = 0.0;
                for (t, n) in norms.iter().enumerate() {
                    let clipped = (v * n).min(TRUNCATION);
                    acc += clipped;
                    texture[t] += clipped;
                }
                out[[fr, fc, o]] = acc * 0.5;
            }
            for o in 0..ORIENTATIONS {
                let v = hist[idx(fr, fc, o)] + hist[idx(fr, fc, o + ORIENTATIONS)];
                let acc: f64 = norms.iter().map(|n| (v * n).min(TRUNCATION)).sum();
                out[[fr, fc, SIGNED_ORIENTATIONS + o]] = acc * 0.5;
            }
            let texture_scale = 1.0 / (SIGNED_ORIENTATIONS as f64).sqrt();
            for t in 0..TEXTURE_CHANNELS {
                out[[fr, fc, SIGNED_ORIENTATIONS + ORIENTATIONS + t]] = texture[t] * texture_scale;
            }
        }
    }
}

/// RGB prototypes for the eleven basic color attributes.
const COLOR_PROTOTYPES: [[f64; 3]; 11] = [
    [0.0, 0.0, 0.0],       // black
    [0.0, 0.0, 255.0],     // blue
    [139.0, 69.0, 19.0],   // brown
    [128.0, 128.0, 128.0], // gray
    [0.0, 255.0, 0.0],     // green
    [255.0, 165.0, 0.0],   // orange
    [255.0, 192.0, 203.0], // pink
    [128.0, 0.0, 128.0],   // purple
    [255.0, 0.0, 0.0],     // red
    [255.0, 255.0, 255.0], // white
    [255.0, 255.0, 0.0],   // yellow
];
const COLOR_SOFTNESS: f64 = 60.0;

/// Cell-averaged soft assignments to the nearest color prototypes.
fn color_names_into(
    patch: &Frame,
    cell: usize,
    hf: usize,
    wf: usize,
    base: usize,
    out: &mut Array3<f64>,
) {
    let area = (cell * cell) as f64;
    for fr in 0..hf {
        for fc in 0..wf {
            let mut acc = [0.0f64; COLOR_PROTOTYPES.len()];
            for dy in 0..cell {
                for dx in 0..cell {
                    let x = (fc * cell + dx) as i64;
                    let y = (fr * cell + dy) as i64;
                    let (r, g, b) = if patch.channels() == 3 {
                        (
                            patch.get_clamped(x, y, 0) as f64,
                            patch.get_clamped(x, y, 1) as f64,
                            patch.get_clamped(x, y, 2) as f64,
                        )
                    } else {
                        let v = patch.get_clamped(x, y, 0) as f64;
                        (v, v, v)
                    };
                    let mut weights = [0.0f64; COLOR_PROTOTYPES.len()];
                    let mut total = 0.0;
                    for (i, p) in COLOR_PROTOTYPES.iter().enumerate() {
                        let d2 = (r - p[0]).powi(2) + (g - p[1]).powi(2) + (b - p[2]).powi(2);
                        let w = (-d2 / (2.0 * COLOR_SOFTNESS * COLOR_SOFTNESS)).exp();
                        weights[i] = w;
                        total += w;
                    }
                    if total > 0.0 {
                        for (a, w) in acc.iter_mut().zip(weights) {
                            *a += w / total;
                        }
                    }
                }
            }
            for (i, a) in acc.iter().enumerate() {
                out[[fr, fc, base + i]] = a / area;
            }
        }
    }
}

/// Symmetric Hann window of length `n`; length 1 degenerates to [1].
pub fn hann(n: usize) -> Array1<f64> {
    if n == 1 {
        return Array1::ones(1);
    }
    Array1::from_shape_fn(n, |i| {
        0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (n as f64 - 1.0)).cos())
    })
}

/// Multiply every channel elementwise by the outer product of 1-D Hann
/// windows, attenuating border cells toward zero.
pub fn apply_window(features: &FeatureTensor) -> FeatureTensor {
    let mut out = features.clone();
    apply_window_in_place(&mut out);
    out
}

/// In-place variant of [`apply_window`].
pub fn apply_window_in_place(features: &mut FeatureTensor) {
    let (h, w, k) = features.shape();
    let wh = hann(h);
    let ww = hann(w);
    let data = features.data.as_slice_mut().expect("standard layout");
    for r in 0..h {
        for c in 0..w {
            let scale = wh[r] * ww[c];
            let base = (r * w + c) * k;
            for v in &mut data[base..base + k] {
                *v *= scale;
            }
        }
    }
}
