//! Joint optimization of the filter bank and the temporal penalty by
//! alternating four subproblem updates on the augmented Lagrangian of the
//! regularized correlation objective.
//!
//! The objective being minimized, stated at spatial scale (T = H*W):
//!
//! ```text
//! E(H, theta) = 1/2 ||y - sum_k corr(x^k, h^k)||^2
//!             + 1/(2T) sum_k ||u_tilde . h^k||^2
//!             + theta/2 sum_k ||h^k - h_prev^k||^2
//!             + 1/2 (theta - theta_ref)^2
//! ```
//!
//! with `corr` the circular correlation whose spectrum is `conj(x_hat) * g_hat`.
//! The constraint `g_hat^k = dft2(h^k)` is handled with a scaled multiplier;
//! each update below is the exact minimizer of its block. All spectral norms
//! follow the unnormalized-forward convention, so spectral energies are `T`
//! times their spatial counterparts; the theta subproblem therefore divides
//! the filter-change energy by `T` to keep theta on the scale of the
//! reference value.

use ndarray::{Array2, Array3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{Fft2, SpectralBank};

/// Whether the temporal penalty is jointly optimized or held fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaMode {
    /// Constant penalty, no theta subproblem (the non-adaptive baseline).
    Fixed(f64),
    /// Jointly optimized around the given reference.
    Optimized { theta_ref: f64 },
}

impl ThetaMode {
    fn initial(&self) -> f64 {
        match *self {
            ThetaMode::Fixed(v) => v,
            ThetaMode::Optimized { theta_ref } => theta_ref,
        }
    }
}

/// One training problem: sample spectra, label spectrum, previous filter,
/// spatial weights, temporal mode, and the step-size schedule.
pub struct AdmmProblem<'a> {
    pub x_hat: &'a SpectralBank,
    pub y_hat: &'a Array2<Complex64>,
    /// Previous filter bank; `None` drops the temporal term (first frame).
    pub g_prev_hat: Option<&'a SpectralBank>,
    pub u_tilde: &'a Array2<f64>,
    pub theta: ThetaMode,
    pub gamma0: f64,
    pub beta: f64,
    pub gamma_max: f64,
    pub iters: usize,
}

/// Solver output: the spectral filter bank, its spatial-domain counterpart,
/// the optimized temporal penalty, and the per-iteration objective values.
#[derive(Debug, Clone)]
pub struct AdmmSolution {
    pub g_hat: SpectralBank,
    pub h: Array3<f64>,
    pub theta_opt: f64,
    pub objective_trace: Vec<f64>,
    /// Relative constraint violation `||g_hat - dft2(h)|| / ||g_hat||` at exit.
    pub constraint_residual: f64,
}

/// Filter-bank subproblem: independent per-pixel ridge systems across the K
/// channels, solved in closed form via the Sherman-Morrison identity.
///
/// At pixel j with sample vector `X = x_hat[j, :]`:
/// `(X X^H + (gamma + theta) I) G_j = rho_j`,
/// `rho_j = X y_hat_j + theta g_prev_j - gamma v_j + gamma h_hat_j`.
pub fn update_g(
    x_hat: &SpectralBank,
    y_hat: &Array2<Complex64>,
    g_prev_hat: Option<&SpectralBank>,
    v_hat: &SpectralBank,
    h_hat: &SpectralBank,
    gamma: f64,
    theta: f64,
) -> SpectralBank {
    assert!(gamma + theta > 0.0, "update_g needs gamma + theta > 0");
    let (h, w, k) = x_hat.shape();
    let c = gamma + theta;
    let mut out = Array3::zeros((h, w, k));
    let out_px = out.as_slice_mut().expect("standard layout");
    let xs = x_hat.data.as_slice().expect("standard layout");
    let vs = v_hat.data.as_slice().expect("standard layout");
    let hs = h_hat.data.as_slice().expect("standard layout");
    let gs = g_prev_hat.map(|g| g.data.as_slice().expect("standard layout"));
    let ys = y_hat.as_slice().expect("standard layout");

    for (j, &y) in ys.iter().enumerate().take(h * w) {
        let base = j * k;
        let x = &xs[base..base + k];
        let v = &vs[base..base + k];
        let hh = &hs[base..base + k];
        let rho = &mut out_px[base..base + k];
        let mut xhx = 0.0;
        let mut xh_rho = Complex64::new(0.0, 0.0);
        match gs {
            Some(gp) => {
                let g = &gp[base..base + k];
                for ch in 0..k {
                    let xc = x[ch];
                    let p = xc * y + theta * g[ch] + gamma * (hh[ch] - v[ch]);
                    rho[ch] = p;
                    xhx += xc.norm_sqr();
                    xh_rho += xc.conj() * p;
                }
            }
            None => {
                for ch in 0..k {
                    let xc = x[ch];
                    let p = xc * y + gamma * (hh[ch] - v[ch]);
                    rho[ch] = p;
                    xhx += xc.norm_sqr();
                    xh_rho += xc.conj() * p;
                }
            }
        }
        let correction = xh_rho / (c + xhx);
        for ch in 0..k {
            rho[ch] = (rho[ch] - x[ch] * correction) / c;
        }
    }
    SpectralBank { data: out }
}

/// Spatial-filter subproblem, elementwise closed form on the spatial signals:
/// `h = gamma T (v + g) / (u_tilde^2 + gamma T)`.
pub fn update_h(
    g_hat: &SpectralBank,
    v_hat: &SpectralBank,
    u_tilde: &Array2<f64>,
    gamma: f64,
    fft: &mut Fft2,
) -> Result<Array3<f64>> {
    let g = fft.idft2_real(g_hat)?;
    let v = fft.idft2_real(v_hat)?;
    Ok(update_h_spatial(&g, &v, u_tilde, gamma))
}

/// Spatial-domain core of the H update.
pub fn update_h_spatial(
    g: &Array3<f64>,
    v: &Array3<f64>,
    u_tilde: &Array2<f64>,
    gamma: f64,
) -> Array3<f64> {
    assert!(gamma > 0.0, "update_h needs gamma > 0");
    let (hh, ww, k) = {
        let s = g.shape();
        (s[0], s[1], s[2])
    };
    let t = (hh * ww) as f64;
    let gt = gamma * t;
    let mut out = Array3::zeros((hh, ww, k));
    let out_px = out.as_slice_mut().expect("standard layout");
    let gs = g.as_slice().expect("standard layout");
    let vs = v.as_slice().expect("standard layout");
    let us = u_tilde.as_slice().expect("standard layout");
    for (j, &u) in us.iter().enumerate() {
        let scale = gt / (u * u + gt);
        let base = j * k;
        for ch in 0..k {
            out_px[base + ch] = scale * (vs[base + ch] + gs[base + ch]);
        }
    }
    out
}

/// Normalized filter-change energy `sum_k |g^k - g_prev^k|^2 / T`, the scale
/// at which the theta subproblem operates.
pub fn filter_change_energy(g_hat: &SpectralBank, g_prev_hat: &SpectralBank) -> f64 {
    let t = {
        let (h, w, _) = g_hat.shape();
        (h * w) as f64
    };
    g_hat
        .data
        .iter()
        .zip(g_prev_hat.data.iter())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        / t
}

/// Temporal-penalty subproblem: `theta* = max(0, theta_ref - S/2)` where `S`
/// is the normalized filter-change energy. Clamped at zero since a negative
/// temporal penalty would make the objective non-convex in the filter.
pub fn update_theta(g_hat: &SpectralBank, g_prev_hat: &SpectralBank, theta_ref: f64) -> f64 {
    let s = filter_change_energy(g_hat, g_prev_hat);
    (theta_ref - s / 2.0).max(0.0)
}

/// Scaled-multiplier update: add the raw constraint residual and grow the
/// step size geometrically up to its cap.
pub fn update_multiplier(
    v_hat: &mut SpectralBank,
    g_hat: &SpectralBank,
    h_hat: &SpectralBank,
    gamma: f64,
    beta: f64,
    gamma_max: f64,
) -> f64 {
    for ((v, g), h) in v_hat
        .data
        .iter_mut()
        .zip(g_hat.data.iter())
        .zip(h_hat.data.iter())
    {
        *v += g - h;
    }
    (beta * gamma).min(gamma_max)
}

/// Objective value with the data and temporal terms evaluated on `g_hat` and
/// the spatial penalty on `h`. Passing `dft2(h)` as the bank evaluates the
/// primal objective at the feasible point `h`, which is what the solver's
/// per-iteration trace records. The theta prior is included only when theta
/// is jointly optimized.
pub fn objective(
    problem: &AdmmProblem<'_>,
    g_hat: &SpectralBank,
    h: &Array3<f64>,
    theta: f64,
) -> f64 {
    let (hh, ww, k) = problem.x_hat.shape();
    let t = (hh * ww) as f64;
    let xs = problem.x_hat.data.as_slice().expect("standard layout");
    let gs = g_hat.data.as_slice().expect("standard layout");
    let ys = problem.y_hat.as_slice().expect("standard layout");
    let us = problem.u_tilde.as_slice().expect("standard layout");
    let hs = h.as_slice().expect("standard layout");

    let mut data = 0.0;
    let mut spatial = 0.0;
    for (j, (&y, &u)) in ys.iter().zip(us).enumerate() {
        let base = j * k;
        let mut acc = Complex64::new(0.0, 0.0);
        for ch in 0..k {
            acc += xs[base + ch].conj() * gs[base + ch];
            spatial += (u * hs[base + ch]).powi(2);
        }
        data += (y - acc).norm_sqr();
    }
    data /= 2.0 * t;
    spatial /= 2.0 * t;

    let temporal = match problem.g_prev_hat {
        Some(g_prev) => theta / 2.0 * filter_change_energy(g_hat, g_prev),
        None => 0.0,
    };

    let prior = match problem.theta {
        ThetaMode::Optimized { theta_ref } => 0.5 * (theta - theta_ref).powi(2),
        ThetaMode::Fixed(_) => 0.0,
    };

    data + spatial + temporal + prior
}

/// Run the configured number of update rounds starting from the previous
/// filter, recording the objective after every round.
pub fn solve(problem: &AdmmProblem<'_>, fft: &mut Fft2) -> Result<AdmmSolution> {
    assert!(problem.iters >= 1, "need at least one iteration");
    let shape = problem.x_hat.shape();
    assert_eq!(
        (shape.0, shape.1),
        problem.y_hat.dim(),
        "label/sample shape mismatch"
    );
    assert_eq!(
        (shape.0, shape.1),
        problem.u_tilde.dim(),
        "weights/sample shape mismatch"
    );
    if let Some(g_prev) = problem.g_prev_hat {
        problem.x_hat.same_shape(g_prev)?;
    }

    let mut g_hat = match problem.g_prev_hat {
        Some(g_prev) => g_prev.clone(),
        None => SpectralBank::zeros(shape),
    };
    let mut h = fft.idft2_real(&g_hat)?;
    let mut h_hat = fft.dft2(h.view());
    let mut v_hat = SpectralBank::zeros(shape);
    let mut v_spatial = Array3::zeros((shape.0, shape.1, shape.2));
    let mut gamma = problem.gamma0;
    let mut theta = problem.theta.initial();
    let mut trace = Vec::with_capacity(problem.iters);

    for iteration in 0..problem.iters {
        g_hat = update_g(
            problem.x_hat,
            problem.y_hat,
            problem.g_prev_hat,
            &v_hat,
            &h_hat,
            gamma,
            theta,
        );
        let g_spatial = fft.idft2_real(&g_hat)?;
        h = update_h_spatial(&g_spatial, &v_spatial, problem.u_tilde, gamma);
        if let (ThetaMode::Optimized { theta_ref }, Some(g_prev)) =
            (problem.theta, problem.g_prev_hat)
        {
            theta = update_theta(&g_hat, g_prev, theta_ref);
        }
        h_hat = fft.dft2(h.view());
        // Scaled multiplier in both domains; the spatial copy tracks
        // idft(v_hat) exactly by linearity and saves a transform per round.
        gamma = update_multiplier(&mut v_hat, &g_hat, &h_hat, gamma, problem.beta, problem.gamma_max);
        for ((v, g), hv) in v_spatial.iter_mut().zip(g_spatial.iter()).zip(h.iter()) {
            *v += g - hv;
        }

        let value = objective(problem, &h_hat, &h, theta);
        if !value.is_finite() || !theta.is_finite() {
            return Err(Error::AdmmDiverged { iteration });
        }
        trace.push(value);
    }

    let diff: f64 = g_hat
        .data
        .iter()
        .zip(h_hat.data.iter())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let g_norm = crate::spectral::parseval_norm(&g_hat).sqrt();
    let constraint_residual = if g_norm > 0.0 { diff / g_norm } else { diff };

    Ok(AdmmSolution {
        g_hat,
        h,
        theta_opt: theta,
        objective_trace: trace,
        constraint_residual,
    })
}
