//! Detection responses and response-variation statistics.
//!
//! Detection correlates the sample spectra with the filter bank: the sample
//! spectrum is conjugated so that a trained filter reproduces its Gaussian
//! label at zero shift (a plain product would compute a convolution and flip
//! detection offsets).

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::Result;
use crate::spectral::{Fft2, SpectralBank};

/// Real detection surface with peak metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMap {
    pub values: Array2<f64>,
    /// Integer argmax (row, col); ties break to the smallest row, then column.
    pub peak_pos: (usize, usize),
    /// Sub-cell quadratic refinement of the peak, each component in (-0.5, 0.5).
    pub peak_subcell: (f64, f64),
    pub peak_value: f64,
}

/// Local response variation: elementwise relative change between peak-aligned
/// consecutive responses, plus its Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationVector {
    pub pi: Array2<f64>,
    pub global_norm: f64,
}

impl VariationVector {
    pub fn zeros(shape: (usize, usize)) -> Self {
        VariationVector {
            pi: Array2::zeros(shape),
            global_norm: 0.0,
        }
    }
}

/// Correlate sample spectra `z_hat` with the filter bank `g_hat`:
/// `R = IDFT(sum_k conj(z^k) * g^k)`, with peak fields populated.
pub fn detect(z_hat: &SpectralBank, g_hat: &SpectralBank, fft: &mut Fft2) -> Result<ResponseMap> {
    z_hat.same_shape(g_hat)?;
    let (h, w, k) = z_hat.shape();
    let zs = z_hat.data.as_slice().expect("standard layout");
    let gs = g_hat.data.as_slice().expect("standard layout");
    let mut spectrum = Array2::from_elem((h, w), Complex64::new(0.0, 0.0));
    for (px, dst) in spectrum.iter_mut().enumerate() {
        let base = px * k;
        let mut acc = Complex64::new(0.0, 0.0);
        for ch in 0..k {
            acc += zs[base + ch].conj() * gs[base + ch];
        }
        *dst = acc;
    }
    let values = fft.idft2_map_real(&spectrum)?;
    Ok(ResponseMap::from_values(values))
}

impl ResponseMap {
    pub fn from_values(values: Array2<f64>) -> Self {
        let (h, w) = values.dim();
        let mut peak_pos = (0, 0);
        let mut peak_value = f64::NEG_INFINITY;
        for r in 0..h {
            for c in 0..w {
                if values[[r, c]] > peak_value {
                    peak_value = values[[r, c]];
                    peak_pos = (r, c);
                }
            }
        }
        let mut map = ResponseMap {
            values,
            peak_pos,
            peak_subcell: (0.0, 0.0),
            peak_value,
        };
        map.peak_subcell = subcell_peak(&map);
        map
    }

    /// Peak position wrapped to a signed displacement about the origin,
    /// including the sub-cell offset.
    pub fn signed_peak(&self) -> (f64, f64) {
        let (h, w) = self.values.dim();
        let wrap = |p: usize, n: usize| {
            let p = p as f64;
            if p > n as f64 / 2.0 {
                p - n as f64
            } else {
                p
            }
        };
        (
            wrap(self.peak_pos.0, h) + self.peak_subcell.0,
            wrap(self.peak_pos.1, w) + self.peak_subcell.1,
        )
    }
}

/// Refine the integer peak by fitting a 1-D quadratic through the peak and its
/// circular neighbors along each axis. Degenerate (non-concave) curvature
/// returns a zero offset.
pub fn subcell_peak(map: &ResponseMap) -> (f64, f64) {
    let (h, w) = map.values.dim();
    let (pr, pc) = map.peak_pos;
    let fit = |minus: f64, center: f64, plus: f64| -> f64 {
        let curvature = minus - 2.0 * center + plus;
        if curvature >= 0.0 {
            return 0.0;
        }
        let offset = (minus - plus) / (2.0 * curvature);
        offset.clamp(-0.499_999, 0.499_999)
    };
    let dr = fit(
        map.values[[(pr + h - 1) % h, pc]],
        map.values[[pr, pc]],
        map.values[[(pr + 1) % h, pc]],
    );
    let dc = fit(
        map.values[[pr, (pc + w - 1) % w]],
        map.values[[pr, pc]],
        map.values[[pr, (pc + 1) % w]],
    );
    (dr, dc)
}

/// Circularly shift `map` so that entry (r, c) moves to (r + dr, c + dc).
pub fn circular_shift(map: &Array2<f64>, shift: (i64, i64)) -> Array2<f64> {
    let (h, w) = map.dim();
    let mut out = Array2::zeros((h, w));
    for r in 0..h {
        for c in 0..w {
            let nr = (r as i64 + shift.0).rem_euclid(h as i64) as usize;
            let nc = (c as i64 + shift.1).rem_euclid(w as i64) as usize;
            out[[nr, nc]] = map[[r, c]];
        }
    }
    out
}

/// Peak-aligned relative change between consecutive responses: the current
/// map is circularly shifted so both peaks coincide (removing the motion
/// component), then `pi[i] = |(curr[i] - prev[i]) / prev[i]|` with the
/// denominator magnitude clamped at `max(1e-4, 1e-2 * |prev peak|)`.
pub fn local_variation(r_curr: &ResponseMap, r_prev: &ResponseMap) -> VariationVector {
    assert_eq!(
        r_curr.values.dim(),
        r_prev.values.dim(),
        "variation requires same-shape responses"
    );
    let shift = (
        r_prev.peak_pos.0 as i64 - r_curr.peak_pos.0 as i64,
        r_prev.peak_pos.1 as i64 - r_curr.peak_pos.1 as i64,
    );
    let aligned = circular_shift(&r_curr.values, shift);
    let eps = (1e-2 * r_prev.peak_value.abs()).max(1e-4);
    let mut pi = Array2::zeros(r_curr.values.dim());
    let mut sum_sq = 0.0;
    for (dst, (curr, prev)) in pi.iter_mut().zip(aligned.iter().zip(r_prev.values.iter())) {
        let denom = if prev.abs() >= eps {
            *prev
        } else if *prev < 0.0 {
            -eps
        } else {
            eps
        };
        let v = ((curr - prev) / denom).abs();
        *dst = v;
        sum_sq += v * v;
    }
    VariationVector {
        pi,
        global_norm: sum_sq.sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Fft2;
    use ndarray::Array3;
    use rand::Rng;
    use rand::SeedableRng;

    fn random_bank(h: usize, w: usize, k: usize, seed: u64, fft: &mut Fft2) -> SpectralBank {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let t = Array3::from_shape_fn((h, w, k), |_| rng.random_range(-1.0..1.0));
        fft.dft2(t.view())
    }

    #[test]
    fn zero_filter_gives_zero_response() {
        let mut fft = Fft2::new();
        let z = random_bank(8, 8, 2, 1, &mut fft);
        let g = SpectralBank::zeros((8, 8, 2));
        let r = detect(&z, &g, &mut fft).unwrap();
        assert!(r.values.iter().all(|v| v.abs() < 1e-12));
        assert_eq!(r.peak_pos, (0, 0));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut fft = Fft2::new();
        let z = random_bank(8, 8, 2, 1, &mut fft);
        let g = SpectralBank::zeros((8, 8, 3));
        let err = detect(&z, &g, &mut fft).unwrap_err();
        assert!(err.to_string().contains("bank-shape-mismatch"));
    }

    #[test]
    fn autocorrelation_peaks_at_zero_lag() {
        let mut fft = Fft2::new();
        let z = random_bank(16, 12, 3, 2, &mut fft);
        let r = detect(&z, &z, &mut fft).unwrap();
        assert_eq!(r.peak_pos, (0, 0));
    }

    #[test]
    fn detect_is_linear_in_each_argument() {
        let mut fft = Fft2::new();
        let z = random_bank(8, 8, 2, 3, &mut fft);
        let g1 = random_bank(8, 8, 2, 4, &mut fft);
        let g2 = random_bank(8, 8, 2, 5, &mut fft);
        let combined = SpectralBank {
            data: &g1.data * Complex64::new(2.0, 0.0) + &g2.data * Complex64::new(-0.5, 0.0),
        };
        let lhs = detect(&z, &combined, &mut fft).unwrap();
        let r1 = detect(&z, &g1, &mut fft).unwrap();
        let r2 = detect(&z, &g2, &mut fft).unwrap();
        for ((l, a), b) in lhs.values.iter().zip(r1.values.iter()).zip(r2.values.iter()) {
            assert!((l - (2.0 * a - 0.5 * b)).abs() < 1e-10);
        }
    }

    #[test]
    fn subcell_symmetric_neighborhood_gives_zero() {
        let mut v = Array2::zeros((5, 5));
        v[[2, 2]] = 1.0;
        v[[1, 2]] = 0.5;
        v[[3, 2]] = 0.5;
        v[[2, 1]] = 0.25;
        v[[2, 3]] = 0.25;
        let r = ResponseMap::from_values(v);
        assert_eq!(r.peak_subcell, (0.0, 0.0));
    }

    #[test]
    fn subcell_recovers_quadratic_vertex() {
        // Samples of v(d) = 1 - (d - 0.2)^2 at d = -1, 0, 1 along the column axis.
        let mut v = Array2::zeros((5, 5));
        v[[2, 1]] = 1.0 - (-1.0f64 - 0.2).powi(2);
        v[[2, 2]] = 1.0 - (0.2f64).powi(2);
        v[[2, 3]] = 1.0 - (1.0f64 - 0.2).powi(2);
        let r = ResponseMap::from_values(v);
        assert!((r.peak_subcell.1 - 0.2).abs() < 1e-12);
    }

    #[test]
    fn subcell_flat_response_degenerates_to_zero() {
        let r = ResponseMap::from_values(Array2::from_elem((4, 4), 0.5));
        assert_eq!(r.peak_pos, (0, 0));
        assert_eq!(r.peak_subcell, (0.0, 0.0));
    }

    fn positive_response(seed: u64) -> ResponseMap {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut v = Array2::from_shape_fn((6, 6), |_| rng.random_range(0.5..0.9));
        v[[2, 3]] = 1.0;
        ResponseMap::from_values(v)
    }

    #[test]
    fn identical_responses_have_zero_variation() {
        let r = positive_response(1);
        let var = local_variation(&r, &r);
        assert!(var.pi.iter().all(|v| *v == 0.0));
        assert_eq!(var.global_norm, 0.0);
    }

    #[test]
    fn pure_shift_is_removed_by_peak_alignment() {
        let prev = positive_response(2);
        let curr = ResponseMap::from_values(circular_shift(&prev.values, (2, 5)));
        let var = local_variation(&curr, &prev);
        assert!(var.global_norm < 1e-12, "norm = {}", var.global_norm);
    }

    #[test]
    fn doubling_gives_unit_variation() {
        let prev = positive_response(3);
        let curr = ResponseMap::from_values(&prev.values * 2.0);
        let var = local_variation(&curr, &prev);
        for v in var.pi.iter() {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert!((var.global_norm - 36.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn variation_is_shift_invariant() {
        let prev = positive_response(4);
        let curr = positive_response(5);
        let base = local_variation(&curr, &prev);
        let shifted = local_variation(
            &ResponseMap::from_values(circular_shift(&curr.values, (1, 4))),
            &ResponseMap::from_values(circular_shift(&prev.values, (1, 4))),
        );
        assert!((base.global_norm - shifted.global_norm).abs() < 1e-12);
    }

    #[test]
    fn global_norm_squared_matches_elementwise_sum() {
        let prev = positive_response(6);
        let curr = positive_response(7);
        let var = local_variation(&curr, &prev);
        let sum: f64 = var.pi.iter().map(|v| v * v).sum();
        assert!((var.global_norm.powi(2) - sum).abs() <= 1e-9 * sum.max(1.0));
    }
}
