//! Spatial and temporal regularization built from response-variation
//! statistics: a bowl-shaped base weight map with a crop mask over the object
//! region, the variation-driven spatial weights, and the adaptive temporal
//! reference with its cease-learning gate.

use ndarray::Array2;

use crate::response::VariationVector;

/// Log base used by the variation-driven terms; the natural log is the
/// default, base 10 is kept as an alternative reading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum LogBase {
    Natural,
    Ten,
}

impl LogBase {
    #[inline]
    pub fn log(self, v: f64) -> f64 {
        match self {
            LogBase::Natural => v.ln(),
            LogBase::Ten => v.log10(),
        }
    }
}

/// Parameters of the regularization terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegParams {
    /// Weight of the local-variation spatial penalty.
    pub delta: f64,
    /// Scale applied to the global variation inside the temporal reference.
    pub nu: f64,
    /// Maximum temporal reference, attained at zero variation.
    pub zeta: f64,
    /// Global-variation threshold beyond which learning stops.
    pub phi: f64,
    /// Base bowl minimum (at the map center).
    pub u_min: f64,
    /// Base bowl quadratic slope.
    pub u_slope: f64,
    pub log_base: LogBase,
}

impl Default for RegParams {
    fn default() -> Self {
        RegParams {
            delta: 0.2,
            nu: 2e-5,
            zeta: 13.0,
            phi: 3000.0,
            u_min: 0.1,
            u_slope: 3.0,
            log_base: LogBase::Natural,
        }
    }
}

/// Per-tracker regularization state: the fixed base bowl and crop mask plus
/// the per-frame spatial weights and temporal reference.
#[derive(Debug, Clone)]
pub struct RegularizationState {
    pub u_base: Array2<f64>,
    /// 1 inside the centered object rectangle, 0 outside.
    pub crop_mask: Array2<f64>,
    pub u_tilde: Array2<f64>,
    pub theta_ref: f64,
    pub theta_opt: f64,
    pub params: RegParams,
}

impl RegularizationState {
    pub fn new(shape: (usize, usize), object_cells: (usize, usize), params: RegParams) -> Self {
        let (u_base, crop_mask) = build_base_weights(shape, object_cells, &params);
        let u_tilde = u_base.clone();
        RegularizationState {
            u_base,
            crop_mask,
            u_tilde,
            theta_ref: params.zeta,
            theta_opt: params.zeta,
            params,
        }
    }
}

/// Bowl-shaped base weights and the central object crop mask.
///
/// `u[i, j] = u_min + u_slope * ((di/h_o)^2 + (dj/w_o)^2)` with (di, dj) the
/// circular distance from the map center; the mask covers the centered
/// `object_cells` rectangle.
pub fn build_base_weights(
    shape: (usize, usize),
    object_cells: (usize, usize),
    params: &RegParams,
) -> (Array2<f64>, Array2<f64>) {
    let (h, w) = shape;
    let (ho, wo) = object_cells;
    assert!(ho >= 1 && wo >= 1 && ho <= h && wo <= w, "object exceeds map");
    let cr = h / 2;
    let cc = w / 2;
    let circ = |i: usize, c: usize, n: usize| -> f64 {
        let d = (i as i64 - c as i64).unsigned_abs() as usize;
        d.min(n - d) as f64
    };
    let mut u = Array2::zeros((h, w));
    for r in 0..h {
        for c in 0..w {
            let di = circ(r, cr, h) / ho as f64;
            let dj = circ(c, cc, w) / wo as f64;
            u[[r, c]] = params.u_min + params.u_slope * (di * di + dj * dj);
        }
    }
    let mut mask = Array2::zeros((h, w));
    let r0 = cr - ho / 2;
    let c0 = cc - wo / 2;
    for r in r0..(r0 + ho).min(h) {
        for c in c0..(c0 + wo).min(w) {
            mask[[r, c]] = 1.0;
        }
    }
    (u, mask)
}

/// Variation-adapted spatial weights:
/// `u_tilde[i] = mask[i] * delta * log(pi[i] + 1) + u_base[i]`.
pub fn spatial_regularizer(
    pi: &VariationVector,
    u_base: &Array2<f64>,
    crop_mask: &Array2<f64>,
    delta: f64,
    log_base: LogBase,
) -> Array2<f64> {
    assert_eq!(pi.pi.dim(), u_base.dim(), "variation/weight shape mismatch");
    let mut out = u_base.clone();
    for ((dst, &p), &m) in out.iter_mut().zip(pi.pi.iter()).zip(crop_mask.iter()) {
        *dst += m * delta * log_base.log(p + 1.0);
    }
    out
}

/// Temporal reference and learn gate from the global variation:
/// above `phi` learning stops for the frame; otherwise
/// `theta_ref = zeta / (1 + log(nu * global_norm + 1))`.
pub fn temporal_reference(global_norm: f64, params: &RegParams) -> (f64, bool) {
    debug_assert!(global_norm >= 0.0);
    if global_norm > params.phi {
        return (params.zeta, false);
    }
    let theta_ref = params.zeta / (1.0 + params.log_base.log(params.nu * global_norm + 1.0));
    (theta_ref, true)
}
