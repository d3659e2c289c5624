//! Per-frame tracking pipeline: scale-searched detection, bounding-box
//! update, response-variation statistics, regularizer construction, and
//! conditional filter training.

use ndarray::Array2;
use num_complex::Complex64;

use crate::admm::{self, AdmmProblem, ThetaMode};
use crate::config::{CeaseMode, TrackerConfig};
use crate::error::{Error, Result};
use crate::features::{apply_window, apply_window_in_place, extract_features, FeatureChannels};
use crate::imaging::{extract_patch, resize, BBox, Frame};
use crate::regularization::{
    spatial_regularizer, temporal_reference, RegularizationState,
};
use crate::response::{detect, local_variation, ResponseMap};
use crate::spectral::{Fft2, SpectralBank};

/// Temporal penalty used for frames gated by the variation threshold when the
/// cease mode trains with an effectively infinite penalty instead of skipping.
const PENALIZED_THETA: f64 = 1e6;

/// Mutable tracking state carried across frames.
#[derive(Debug, Clone)]
pub struct TrackState {
    pub bbox: BBox,
    pub scale: f64,
    /// Filter bank trained on the most recent learned frame.
    pub g_hat: SpectralBank,
    /// Detection response of the most recent learned frame.
    pub r_prev: ResponseMap,
    pub theta_last: f64,
    pub frame_idx: usize,
}

/// Per-frame diagnostics, one record per processed frame.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FrameTrace {
    pub frame: usize,
    pub bbox: BBox,
    pub pi_norm: f64,
    pub theta: f64,
    pub learned: bool,
    /// Norm of the variation-driven excess over the base spatial weights.
    pub u_extra_norm: f64,
}

/// Single-object tracker; owns its transform plans and filter state.
pub struct Tracker {
    cfg: TrackerConfig,
    fft: Fft2,
    state: TrackState,
    reg: RegularizationState,
    /// Search-region size in image pixels at unit scale (w, h).
    base_patch: (f64, f64),
    /// Fixed resampled patch size in pixels (w, h).
    model_size: (usize, usize),
    /// Feature grid (rows, cols).
    feature_shape: (usize, usize),
    object_size: (f64, f64),
    y_hat: Array2<Complex64>,
    channels: FeatureChannels,
    last_trace: FrameTrace,
    last_objective_trace: Vec<f64>,
}

impl Tracker {
    /// Initialize on the first frame: train the initial filter without a
    /// temporal term and store its self-response as the variation reference.
    pub fn init(frame: &Frame, bbox: BBox, cfg: TrackerConfig) -> Result<Tracker> {
        cfg.validate()?;
        if !bbox.intersects_frame(frame) {
            return Err(Error::InvalidInitBox);
        }
        let side_ratio = cfg.padding.sqrt();
        let base_patch = (bbox.w * side_ratio, bbox.h * side_ratio);
        let cell = cfg.cell_size as f64;
        let model_scale =
            (cfg.model_max_side as f64 / base_patch.0.max(base_patch.1)).min(1.0);
        let to_cells = |px: f64| ((px * model_scale / cell).round() as usize).max(4);
        let feature_shape = (to_cells(base_patch.1), to_cells(base_patch.0));
        let model_size = (
            feature_shape.1 * cfg.cell_size,
            feature_shape.0 * cfg.cell_size,
        );
        let object_cells = (
            ((feature_shape.0 as f64 / side_ratio).round() as usize)
                .clamp(1, feature_shape.0),
            ((feature_shape.1 as f64 / side_ratio).round() as usize)
                .clamp(1, feature_shape.1),
        );

        let mut fft = Fft2::new();
        let reg = RegularizationState::new(feature_shape, object_cells, cfg.reg_params());
        let sigma = ((object_cells.0 * object_cells.1) as f64).sqrt() / 10.0;
        let label = gaussian_label(feature_shape, sigma);
        let y_hat = fft.dft2_map(label.view());

        let channels = FeatureChannels {
            grayscale: true,
            color_names: cfg.use_color_names,
        };

        let center = bbox.center();
        let patch = extract_patch(
            frame,
            center,
            (
                base_patch.0.round().max(1.0) as usize,
                base_patch.1.round().max(1.0) as usize,
            ),
        );
        let model_patch = resize(&patch, model_size);
        let feats = apply_window(&extract_features(&model_patch, cfg.cell_size, channels)?);
        let x_hat = fft.dft2(feats.data.view());

        let problem = AdmmProblem {
            x_hat: &x_hat,
            y_hat: &y_hat,
            g_prev_hat: None,
            u_tilde: &reg.u_base,
            theta: ThetaMode::Fixed(0.0),
            gamma0: cfg.gamma0,
            beta: cfg.beta,
            gamma_max: cfg.gamma_max,
            iters: cfg.admm_iters,
        };
        let solution = admm::solve(&problem, &mut fft)?;
        let r_prev = detect(&x_hat, &solution.g_hat, &mut fft)?;

        let theta_last = if cfg.variant.uses_atr() {
            cfg.zeta
        } else {
            cfg.fixed_theta
        };
        let last_trace = FrameTrace {
            frame: 1,
            bbox,
            pi_norm: 0.0,
            theta: theta_last,
            learned: true,
            u_extra_norm: 0.0,
        };
        Ok(Tracker {
            cfg,
            fft,
            state: TrackState {
                bbox,
                scale: 1.0,
                g_hat: solution.g_hat,
                r_prev,
                theta_last,
                frame_idx: 1,
            },
            reg,
            base_patch,
            model_size,
            feature_shape,
            object_size: (bbox.w, bbox.h),
            y_hat,
            channels,
            last_trace,
            last_objective_trace: solution.objective_trace,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    pub fn state(&self) -> &TrackState {
        &self.state
    }

    pub fn bbox(&self) -> BBox {
        self.state.bbox
    }

    pub fn last_trace(&self) -> &FrameTrace {
        &self.last_trace
    }

    /// Objective values of the most recent training run, one per iteration.
    pub fn last_objective_trace(&self) -> &[f64] {
        &self.last_objective_trace
    }

    fn featurize(&mut self, frame: &Frame, center: (f64, f64), patch_px: (f64, f64)) -> Result<(SpectralBank, (f64, f64))> {
        let size = (
            patch_px.0.round().max(1.0) as usize,
            patch_px.1.round().max(1.0) as usize,
        );
        let patch = extract_patch(frame, center, size);
        let model_patch = resize(&patch, self.model_size);
        let mut feats = extract_features(&model_patch, self.cfg.cell_size, self.channels)
            .map_err(|e| Error::FrameDegenerate(e.to_string()))?;
        apply_window_in_place(&mut feats);
        let ratio = (
            size.0 as f64 / self.model_size.0 as f64,
            size.1 as f64 / self.model_size.1 as f64,
        );
        Ok((self.fft.dft2(feats.data.view()), ratio))
    }

    /// Advance one frame: detect, update the box and scale, evaluate the
    /// response variation, rebuild the regularizers, and (unless gated) train.
    /// The state is mutated only when the whole step succeeds.
    pub fn update(&mut self, frame: &Frame) -> Result<BBox> {
        let center = self.state.bbox.center();
        let half = (self.cfg.scales / 2) as i32;

        // Scale-searched detection with multiplicative damping away from the
        // current scale.
        let mut best: Option<(ResponseMap, f64, f64, (f64, f64))> = None;
        for i in 0..self.cfg.scales {
            let sf = self.cfg.scale_step.powi(i as i32 - half);
            let patch_px = (
                self.base_patch.0 * self.state.scale * sf,
                self.base_patch.1 * self.state.scale * sf,
            );
            let (z_hat, ratio) = self.featurize(frame, center, patch_px)?;
            let response = detect(&z_hat, &self.state.g_hat, &mut self.fft)?;
            let damping = if i as i32 - half == 0 {
                1.0
            } else {
                self.cfg.scale_damping
            };
            let score = response.peak_value * damping;
            if best.as_ref().is_none_or(|(_, s, _, _)| score > *s) {
                best = Some((response, score, sf, ratio));
            }
        }
        let (response, _, sf_best, ratio) = best.expect("at least one scale");

        // Peak displacement, sub-cell refined, mapped back to image pixels.
        let (dr, dc) = response.signed_peak();
        let cell = self.cfg.cell_size as f64;
        let dx = -dc * cell * ratio.0;
        let dy = -dr * cell * ratio.1;
        let new_scale = self.state.scale * sf_best;
        let new_center = (
            (center.0 + dx).clamp(0.0, frame.width() as f64 - 1.0),
            (center.1 + dy).clamp(0.0, frame.height() as f64 - 1.0),
        );
        let new_bbox = BBox::from_center(
            new_center.0,
            new_center.1,
            self.object_size.0 * new_scale,
            self.object_size.1 * new_scale,
        );

        // Response variation against the stored reference response.
        let variation = local_variation(&response, &self.state.r_prev);
        let pi_norm = variation.global_norm;

        let params = self.cfg.reg_params();
        let u_tilde = spatial_regularizer(
            &variation,
            &self.reg.u_base,
            &self.reg.crop_mask,
            params.delta,
            params.log_base,
        );
        let u_extra_norm = u_tilde
            .iter()
            .zip(self.reg.u_base.iter())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();

        // Temporal branch: adaptive reference plus the learn gate.
        let (theta_mode, learn) = if self.cfg.variant.uses_atr() {
            let (theta_ref, learn) = temporal_reference(pi_norm, &params);
            if learn {
                (Some(ThetaMode::Optimized { theta_ref }), true)
            } else {
                match self.cfg.cease_mode {
                    CeaseMode::Skip => (None, false),
                    CeaseMode::Penalize => (Some(ThetaMode::Fixed(PENALIZED_THETA)), false),
                }
            }
        } else {
            (Some(ThetaMode::Fixed(self.cfg.fixed_theta)), true)
        };

        let mut new_g = None;
        let mut theta = self.state.theta_last;
        let mut objective_trace = None;
        if let Some(mode) = theta_mode {
            // Train on a patch re-centered at the updated box.
            let train_px = (
                self.base_patch.0 * new_scale,
                self.base_patch.1 * new_scale,
            );
            let (x_hat, _) = self.featurize(frame, new_center, train_px)?;
            let problem = AdmmProblem {
                x_hat: &x_hat,
                y_hat: &self.y_hat,
                g_prev_hat: Some(&self.state.g_hat),
                u_tilde: &u_tilde,
                theta: mode,
                gamma0: self.cfg.gamma0,
                beta: self.cfg.beta,
                gamma_max: self.cfg.gamma_max,
                iters: self.cfg.admm_iters,
            };
            let solution = admm::solve(&problem, &mut self.fft)?;
            theta = solution.theta_opt;
            objective_trace = Some(solution.objective_trace);
            new_g = Some(solution.g_hat);
        }

        // Commit.
        self.state.bbox = new_bbox;
        self.state.scale = new_scale;
        self.state.frame_idx += 1;
        self.state.theta_last = theta;
        if let Some(g) = new_g {
            self.state.g_hat = g;
            // The reference response follows the filter: frames whose
            // training is gated keep the previous reference as well.
            self.state.r_prev = response;
        }
        if let Some(trace) = objective_trace {
            self.last_objective_trace = trace;
        }
        self.last_trace = FrameTrace {
            frame: self.state.frame_idx,
            bbox: new_bbox,
            pi_norm,
            theta,
            learned: learn,
            u_extra_norm,
        };
        Ok(new_bbox)
    }

    pub fn feature_shape(&self) -> (usize, usize) {
        self.feature_shape
    }
}

/// Gaussian label peaked at the origin with circular wrap-around.
pub fn gaussian_label(shape: (usize, usize), sigma: f64) -> Array2<f64> {
    let (h, w) = shape;
    Array2::from_shape_fn((h, w), |(r, c)| {
        let dr = if r as f64 > h as f64 / 2.0 {
            r as f64 - h as f64
        } else {
            r as f64
        };
        let dc = if c as f64 > w as f64 / 2.0 {
            c as f64 - w as f64
        } else {
            c as f64
        };
        (-(dr * dr + dc * dc) / (2.0 * sigma * sigma)).exp()
    })
}
