//! Per-channel 2-D discrete Fourier transforms and spectral algebra.
//!
//! Convention: the forward transform is unnormalized and the inverse carries
//! the 1/T factor (T = H*W). Under this convention Parseval reads
//! `sum(|X|^2) = T * sum(|x|^2)`, and an elementwise product of spectra is the
//! spectrum of a circular convolution.

use std::collections::HashMap;
use std::sync::Arc;

use ndarray::{Array2, Array3, ArrayView2, ArrayView3};
use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};

/// Per-channel complex spectra of a feature tensor or filter bank, shape
/// (H, W, K) with K innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBank {
    pub data: Array3<Complex64>,
}

impl SpectralBank {
    pub fn zeros(shape: (usize, usize, usize)) -> Self {
        SpectralBank {
            data: Array3::zeros(shape),
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        let s = self.data.shape();
        (s[0], s[1], s[2])
    }

    pub fn same_shape(&self, other: &SpectralBank) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::BankShapeMismatch {
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(())
    }
}

/// Total spectral energy `sum(|b|^2)`; equals `T * sum(x^2)` of the spatial
/// signal under this transform convention.
pub fn parseval_norm(bank: &SpectralBank) -> f64 {
    bank.data.iter().map(|c| c.norm_sqr()).sum()
}

/// 2-D FFT engine. Caches rustfft plans per axis length and owns scratch
/// buffers, so a single instance must not be shared across threads; create
/// one per tracker.
pub struct Fft2 {
    planner: FftPlanner<f64>,
    plans: HashMap<(usize, bool), Arc<dyn Fft<f64>>>,
    plane: Vec<Complex64>,
    transposed: Vec<Complex64>,
    scratch: Vec<Complex64>,
    /// Channel-major staging for bank transforms (pixel-major input is
    /// cache-hostile when gathering one channel at a time).
    staging: Vec<Complex64>,
}

impl Default for Fft2 {
    fn default() -> Self {
        Self::new()
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    for r in 0..rows {
        let row = &src[r * cols..(r + 1) * cols];
        for (c, v) in row.iter().enumerate() {
            dst[c * rows + r] = *v;
        }
    }
}

impl Fft2 {
    pub fn new() -> Self {
        Fft2 {
            planner: FftPlanner::new(),
            plans: HashMap::new(),
            plane: Vec::new(),
            transposed: Vec::new(),
            scratch: Vec::new(),
            staging: Vec::new(),
        }
    }

    fn plan(&mut self, n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
        self.plans
            .entry((n, forward))
            .or_insert_with(|| {
                let dir = if forward {
                    FftDirection::Forward
                } else {
                    FftDirection::Inverse
                };
                self.planner.plan_fft(n, dir)
            })
            .clone()
    }

    /// Unnormalized in-place 2-D transform of one row-major plane held in
    /// `self.plane`: row FFTs, transpose, row FFTs again, transpose back.
    fn transform_plane(&mut self, h: usize, w: usize, forward: bool) {
        let row_plan = self.plan(w, forward);
        let col_plan = self.plan(h, forward);
        let scratch_len = row_plan
            .get_inplace_scratch_len()
            .max(col_plan.get_inplace_scratch_len());
        self.scratch.resize(scratch_len, Complex64::default());
        for row in self.plane.chunks_exact_mut(w) {
            row_plan.process_with_scratch(row, &mut self.scratch);
        }
        self.transposed.resize(h * w, Complex64::default());
        transpose(&self.plane, &mut self.transposed, h, w);
        for col in self.transposed.chunks_exact_mut(h) {
            col_plan.process_with_scratch(col, &mut self.scratch);
        }
        transpose(&self.transposed, &mut self.plane, w, h);
    }

    /// Forward transform of a single real map.
    pub fn dft2_map(&mut self, map: ArrayView2<'_, f64>) -> Array2<Complex64> {
        let (h, w) = map.dim();
        self.plane.clear();
        self.plane
            .extend(map.iter().map(|&v| Complex64::new(v, 0.0)));
        self.transform_plane(h, w, true);
        Array2::from_shape_vec((h, w), self.plane.clone()).expect("plane shape")
    }

    /// Per-channel forward transform of a real (H, W, K) tensor. Channel
    /// pairs share one complex transform (pack a + ib, separate by conjugate
    /// symmetry), which halves the transform count for real inputs.
    pub fn dft2(&mut self, tensor: ArrayView3<'_, f64>) -> SpectralBank {
        let (h, w, k) = tensor.dim();
        let t = h * w;
        let owned;
        let src: &[f64] = match tensor.as_slice() {
            Some(s) => s,
            None => {
                owned = tensor.to_owned();
                owned.as_slice().expect("owned standard layout")
            }
        };

        // Stage pixel-major input as packed channel-pair planes in one pass.
        let pairs = k / 2;
        self.staging.resize((pairs + k % 2) * t, Complex64::default());
        for (i, px) in src.chunks_exact(k).enumerate() {
            for p in 0..pairs {
                self.staging[p * t + i] = Complex64::new(px[2 * p], px[2 * p + 1]);
            }
            if k % 2 == 1 {
                self.staging[pairs * t + i] = Complex64::new(px[k - 1], 0.0);
            }
        }

        let mut out = Array3::zeros((h, w, k));
        let out_slice = out.as_slice_mut().expect("standard layout");
        for p in 0..pairs {
            let ch = 2 * p;
            self.plane.clear();
            self.plane.extend_from_slice(&self.staging[p * t..(p + 1) * t]);
            self.transform_plane(h, w, true);
            for r in 0..h {
                let mr = ((h - r) % h) * w;
                for c in 0..w {
                    let i = r * w + c;
                    let z = self.plane[i];
                    let zm = self.plane[mr + (w - c) % w].conj();
                    out_slice[i * k + ch] = (z + zm) * 0.5;
                    let diff = (z - zm) * 0.5;
                    out_slice[i * k + ch + 1] = Complex64::new(diff.im, -diff.re);
                }
            }
        }
        if k % 2 == 1 {
            self.plane.clear();
            self.plane
                .extend_from_slice(&self.staging[pairs * t..(pairs + 1) * t]);
            self.transform_plane(h, w, true);
            for (i, v) in self.plane.iter().enumerate() {
                out_slice[i * k + k - 1] = *v;
            }
        }
        SpectralBank { data: out }
    }

    /// Inverse transform (scaled by 1/T) of one plane, checked to be real.
    pub fn idft2_map_real(&mut self, spectrum: &Array2<Complex64>) -> Result<Array2<f64>> {
        let (h, w) = spectrum.dim();
        let t = (h * w) as f64;
        self.plane.clear();
        self.plane.extend(spectrum.iter());
        self.transform_plane(h, w, false);
        let mut real = Array2::zeros((h, w));
        let real_slice = real.as_slice_mut().expect("standard layout");
        let mut imag_sq = 0.0;
        let mut real_sq = 0.0;
        for (dst, src) in real_slice.iter_mut().zip(self.plane.iter()) {
            let re = src.re / t;
            let im = src.im / t;
            *dst = re;
            real_sq += re * re;
            imag_sq += im * im;
        }
        check_real_residual(imag_sq.sqrt(), real_sq.sqrt())?;
        Ok(real)
    }

    /// Per-channel real inverse of a bank; errors if the imaginary residual of
    /// any channel exceeds 1e-6 of the signal norm. Channel pairs share one
    /// complex transform: two conjugate-symmetric spectra packed as a + ib
    /// invert to real and imaginary parts respectively, and each channel's
    /// residual is its conjugate-asymmetric energy, measured on the spectrum
    /// (by Parseval it equals the imaginary output energy a full complex
    /// inverse would produce).
    pub fn idft2_real(&mut self, bank: &SpectralBank) -> Result<Array3<f64>> {
        let (h, w, k) = bank.shape();
        let t = (h * w) as f64;
        let n = h * w;
        let src = bank.data.as_slice().expect("standard layout");

        // Stage channel-major once; every later pass is then sequential.
        self.staging.resize(k * n, Complex64::default());
        for (i, px) in src.chunks_exact(k).enumerate() {
            for (ch, v) in px.iter().enumerate() {
                self.staging[ch * n + i] = *v;
            }
        }

        // Conjugate-symmetry residual per channel, in spatial-domain units:
        // by Parseval the asymmetric spectral energy is exactly the imaginary
        // output energy a full complex inverse would produce.
        for ch in 0..k {
            let plane = &self.staging[ch * n..(ch + 1) * n];
            let mut odd_sq = 0.0;
            let mut even_sq = 0.0;
            for r in 0..h {
                let mr = ((h - r) % h) * w;
                for c in 0..w {
                    let z = plane[r * w + c];
                    let zm = plane[mr + (w - c) % w].conj();
                    even_sq += ((z + zm) * 0.5).norm_sqr();
                    odd_sq += ((z - zm) * 0.5).norm_sqr();
                }
            }
            check_real_residual((odd_sq / t).sqrt(), (even_sq / t).sqrt())?;
        }

        let mut out = Array3::zeros((h, w, k));
        let out_slice = out.as_slice_mut().expect("standard layout");
        let mut ch = 0;
        while ch + 1 < k {
            // Two conjugate-symmetric spectra packed as a + ib invert to a
            // real part / imaginary part pair.
            self.plane.clear();
            self.plane.extend(
                self.staging[ch * n..(ch + 1) * n]
                    .iter()
                    .zip(&self.staging[(ch + 1) * n..(ch + 2) * n])
                    .map(|(a, b)| a + b * Complex64::new(0.0, 1.0)),
            );
            self.transform_plane(h, w, false);
            for (i, v) in self.plane.iter().enumerate() {
                out_slice[i * k + ch] = v.re / t;
                out_slice[i * k + ch + 1] = v.im / t;
            }
            ch += 2;
        }
        if ch < k {
            self.plane.clear();
            self.plane
                .extend_from_slice(&self.staging[ch * n..(ch + 1) * n]);
            self.transform_plane(h, w, false);
            for (i, v) in self.plane.iter().enumerate() {
                out_slice[i * k + ch] = v.re / t;
            }
        }
        Ok(out)
    }
}

fn check_real_residual(imag_norm: f64, real_norm: f64) -> Result<()> {
    let tolerance = 1e-6 * real_norm.max(1e-9);
    if imag_norm > tolerance {
        return Err(Error::NonRealInverse {
            residual: imag_norm,
            tolerance,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;
    use rand::Rng;
    use rand::SeedableRng;

    fn random_tensor(h: usize, w: usize, k: usize, seed: u64) -> Array3<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Array3::from_shape_fn((h, w, k), |_| rng.random_range(-1.0..1.0))
    }

    /// Direct O(T^2) DFT used as an independent oracle.
    fn naive_dft2(x: &Array2<f64>) -> Array2<Complex64> {
        let (h, w) = x.dim();
        let mut out = Array2::zeros((h, w));
        for u in 0..h {
            for v in 0..w {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..h {
                    for j in 0..w {
                        let phase = -2.0
                            * std::f64::consts::PI
                            * (u as f64 * i as f64 / h as f64 + v as f64 * j as f64 / w as f64);
                        acc += Complex64::from_polar(x[[i, j]], phase);
                    }
                }
                out[[u, v]] = acc;
            }
        }
        out
    }

    /// Direct circular cross-correlation style product oracle:
    /// spatial signal whose spectrum is conj(a_hat) * b_hat.
    fn naive_corr(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
        let (h, w) = a.dim();
        let mut out = Array2::zeros((h, w));
        for dr in 0..h {
            for dc in 0..w {
                let mut acc = 0.0;
                for i in 0..h {
                    for j in 0..w {
                        acc += a[[i, j]] * b[[(i + dr) % h, (j + dc) % w]];
                    }
                }
                out[[dr, dc]] = acc;
            }
        }
        out
    }

    #[test]
    fn zeros_transform_to_zeros() {
        let mut fft = Fft2::new();
        let bank = fft.dft2(Array3::<f64>::zeros((6, 5, 2)).view());
        assert!(bank.data.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let mut fft = Fft2::new();
        let mut x = Array3::<f64>::zeros((4, 4, 1));
        x[[0, 0, 0]] = 1.0;
        let bank = fft.dft2(x.view());
        for c in bank.data.iter() {
            assert!((c - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn matches_naive_dft_oracle() {
        let mut fft = Fft2::new();
        let x = random_tensor(8, 8, 1, 11);
        let plane = x.index_axis(ndarray::Axis(2), 0).to_owned();
        let got = fft.dft2_map(plane.view());
        let want = naive_dft2(&plane);
        let scale: f64 = want.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).norm() <= 1e-10 * scale, "{g} vs {w}");
        }
    }

    #[test]
    fn round_trip_identity() {
        let mut fft = Fft2::new();
        for (h, w, k) in [(4, 4, 1), (8, 6, 3), (64, 64, 4), (5, 7, 2)] {
            let x = random_tensor(h, w, k, h as u64 * 31 + w as u64);
            let bank = fft.dft2(x.view());
            let back = fft.idft2_real(&bank).unwrap();
            let err = (&back - &x).iter().map(|v| v * v).sum::<f64>().sqrt();
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(err <= 1e-10 * norm.max(1.0), "round trip err {err}");
        }
    }

    #[test]
    fn non_contiguous_input_is_handled() {
        let mut fft = Fft2::new();
        let x = random_tensor(8, 8, 3, 77);
        let view = x.slice(ndarray::s![.., .., ..;2]); // strided channel view
        let bank = fft.dft2(view);
        let dense = fft.dft2(view.to_owned().view());
        assert_eq!(bank.data, dense.data);
    }

    #[test]
    fn constant_spectrum_is_impulse() {
        let mut fft = Fft2::new();
        let (h, w) = (6, 4);
        let spectrum = Array2::from_elem((h, w), Complex64::new(3.0, 0.0));
        let x = fft.idft2_map_real(&spectrum).unwrap();
        assert!((x[[0, 0]] - 3.0).abs() < 1e-12);
        for r in 0..h {
            for c in 0..w {
                if (r, c) != (0, 0) {
                    assert!(x[[r, c]].abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn product_of_spectra_is_circular_correlation() {
        let mut fft = Fft2::new();
        for (h, w) in [(4, 4), (8, 8), (16, 16), (5, 3)] {
            let a = random_tensor(h, w, 1, 100 + h as u64);
            let b = random_tensor(h, w, 1, 200 + w as u64);
            let ap = a.index_axis(ndarray::Axis(2), 0).to_owned();
            let bp = b.index_axis(ndarray::Axis(2), 0).to_owned();
            let ah = fft.dft2_map(ap.view());
            let bh = fft.dft2_map(bp.view());
            let prod = ndarray::Zip::from(&ah).and(&bh).map_collect(|x, y| x.conj() * y);
            let got = fft.idft2_map_real(&prod).unwrap();
            let want = naive_corr(&ap, &bp);
            let scale: f64 = want.iter().map(|v| v.abs()).fold(0.0, f64::max);
            for (g, w_) in got.iter().zip(want.iter()) {
                assert!((g - w_).abs() <= 1e-10 * scale.max(1.0));
            }
        }
    }

    #[test]
    fn parseval_identities() {
        let mut fft = Fft2::new();
        assert_eq!(parseval_norm(&SpectralBank::zeros((4, 4, 2))), 0.0);

        let mut delta = Array3::<f64>::zeros((4, 4, 1));
        delta[[2, 1, 0]] = 1.0;
        let bank = fft.dft2(delta.view());
        assert!((parseval_norm(&bank) - 16.0).abs() < 1e-10);

        let x = random_tensor(8, 8, 3, 7);
        let bank = fft.dft2(x.view());
        let spatial: f64 = x.iter().map(|v| v * v).sum();
        let t = 64.0;
        assert!((parseval_norm(&bank) / t - spatial).abs() <= 1e-10 * spatial);
    }

    #[test]
    fn non_real_inverse_is_rejected() {
        let mut fft = Fft2::new();
        // A spectrum that is not conjugate-symmetric has a complex inverse.
        let mut spectrum = Array2::from_elem((4, 4), Complex64::new(0.0, 0.0));
        spectrum[[1, 0]] = Complex64::new(0.0, 2.0);
        let err = fft.idft2_map_real(&spectrum).unwrap_err();
        assert!(err.to_string().contains("non-real-inverse"));
    }

    #[test]
    fn linearity_on_random_inputs() {
        let mut fft = Fft2::new();
        let x = random_tensor(16, 12, 2, 21);
        let y = random_tensor(16, 12, 2, 22);
        let combo = &x * 2.5 + &y * (-1.25);
        let lhs = fft.dft2(combo.view());
        let xh = fft.dft2(x.view());
        let yh = fft.dft2(y.view());
        let scale = parseval_norm(&lhs).sqrt().max(1.0);
        for ((l, a), b) in lhs.data.iter().zip(xh.data.iter()).zip(yh.data.iter()) {
            assert!((l - (a * 2.5 + b * (-1.25))).norm() <= 1e-10 * scale);
        }
    }
}
