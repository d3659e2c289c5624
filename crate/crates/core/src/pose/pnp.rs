//! Pose estimation primitives: the forward projection model with
//! radial-tangential distortion, linear pose initialization from four points
//! (homography decomposition for coplanar markers, three-point resection plus
//! disambiguation otherwise), and Gauss-Newton reprojection refinement.
//!
//! Distortion is applied in the forward model only; observed centers are
//! never pre-undistorted for refinement, so a single model serves both the
//! residuals and the Jacobian. Initialization undistorts internally to get
//! bearing rays.

use nalgebra::{DMatrix, Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};

/// Pinhole intrinsics with radial-tangential distortion [k1, k2, p1, p2].
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub dist: [f64; 4],
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::ConfigInvalid {
                key: "camera".to_string(),
                reason: "focal lengths must be positive".to_string(),
            });
        }
        Ok(())
    }

    /// Distort normalized coordinates.
    fn distort(&self, x: f64, y: f64) -> (f64, f64) {
        let [k1, k2, p1, p2] = self.dist;
        let r2 = x * x + y * y;
        let radial = 1.0 + k1 * r2 + k2 * r2 * r2;
        let xd = x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x);
        let yd = y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y;
        (xd, yd)
    }

    /// Project a camera-frame point to pixels; `None` behind the camera.
    pub fn project(&self, p_cam: &Vector3<f64>) -> Option<Vector2<f64>> {
        if p_cam.z <= 1e-9 {
            return None;
        }
        let (xd, yd) = self.distort(p_cam.x / p_cam.z, p_cam.y / p_cam.z);
        Some(Vector2::new(self.fx * xd + self.cx, self.fy * yd + self.cy))
    }

    /// Undistorted normalized coordinates for a pixel (fixed-point iteration).
    pub fn undistort_normalized(&self, pixel: (f64, f64)) -> Vector2<f64> {
        let xd = (pixel.0 - self.cx) / self.fx;
        let yd = (pixel.1 - self.cy) / self.fy;
        let (mut x, mut y) = (xd, yd);
        for _ in 0..12 {
            let [k1, k2, p1, p2] = self.dist;
            let r2 = x * x + y * y;
            let radial = 1.0 + k1 * r2 + k2 * r2 * r2;
            let tx = 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x);
            let ty = p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y;
            x = (xd - tx) / radial;
            y = (yd - ty) / radial;
        }
        Vector2::new(x, y)
    }

    /// Unit bearing ray for a pixel.
    pub fn bearing(&self, pixel: (f64, f64)) -> Vector3<f64> {
        let n = self.undistort_normalized(pixel);
        Vector3::new(n.x, n.y, 1.0).normalize()
    }
}

/// Rigid world-to-camera pose with its reprojection quality.
#[derive(Debug, Clone)]
pub struct PoseEstimate {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub reprojection_rmse: f64,
    /// `correspondence[i]` is the observed-center index of world point i.
    pub correspondence: [usize; 4],
    /// Set when refinement hit a singular normal system and returned its
    /// initial pose unimproved.
    pub degenerate: bool,
}

impl PoseEstimate {
    pub fn transform(&self, p_world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p_world + self.translation
    }
}

/// Root-mean-square reprojection error in pixels; points behind the camera
/// yield infinity so broken assignments lose every comparison.
pub fn reprojection_rmse(
    rotation: &Matrix3<f64>,
    translation: &Vector3<f64>,
    world: &[Vector3<f64>],
    observed: &[Vector2<f64>],
    cam: &CameraIntrinsics,
) -> f64 {
    let mut acc = 0.0;
    for (p, obs) in world.iter().zip(observed.iter()) {
        match cam.project(&(rotation * p + translation)) {
            Some(proj) => acc += (proj - obs).norm_squared(),
            None => return f64::INFINITY,
        }
    }
    (acc / world.len() as f64).sqrt()
}

/// Rodrigues exponential of an axis-angle vector.
pub fn rotation_exp(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta = w.norm();
    let k = skew(w);
    if theta < 1e-12 {
        Matrix3::identity() + k
    } else {
        Matrix3::identity() + k * (theta.sin() / theta)
            + k * k * ((1.0 - theta.cos()) / (theta * theta))
    }
}

fn skew(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Angle of the relative rotation between two rotation matrices, radians.
pub fn rotation_distance(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let r = a.transpose() * b;
    (((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0)).acos()
}

/// Closest rotation matrix (Frobenius) with determinant +1.
fn orthonormalize(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd u");
    let vt = svd.v_t.expect("svd v_t");
    let mut r = u * vt;
    if r.determinant() < 0.0 {
        let mut u2 = u;
        u2.column_mut(2).neg_mut();
        r = u2 * vt;
    }
    r
}

/// Absolute orientation from point correspondences (cam ~ R * world + t).
fn rigid_from_points(world: &[Vector3<f64>], cam: &[Vector3<f64>]) -> (Matrix3<f64>, Vector3<f64>) {
    let n = world.len() as f64;
    let wc: Vector3<f64> = world.iter().sum::<Vector3<f64>>() / n;
    let cc: Vector3<f64> = cam.iter().sum::<Vector3<f64>>() / n;
    let mut h = Matrix3::zeros();
    for (w, c) in world.iter().zip(cam.iter()) {
        h += (c - cc) * (w - wc).transpose();
    }
    let r = orthonormalize(&h);
    (r, cc - r * wc)
}

/// Plane fit of the world points: (centroid, e1, e2, flatness ratio).
fn plane_basis(points: &[Vector3<f64>]) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>, f64) {
    let n = points.len() as f64;
    let centroid: Vector3<f64> = points.iter().sum::<Vector3<f64>>() / n;
    let mut m = DMatrix::zeros(points.len(), 3);
    for (i, p) in points.iter().enumerate() {
        let d = p - centroid;
        m[(i, 0)] = d.x;
        m[(i, 1)] = d.y;
        m[(i, 2)] = d.z;
    }
    let svd = m.svd(true, true);
    let vt = svd.v_t.expect("v_t");
    let e1 = Vector3::new(vt[(0, 0)], vt[(0, 1)], vt[(0, 2)]);
    let e2 = Vector3::new(vt[(1, 0)], vt[(1, 1)], vt[(1, 2)]);
    let flatness = svd.singular_values[2] / svd.singular_values[0].max(1e-300);
    (centroid, e1.normalize(), e2.normalize(), flatness)
}

const COPLANAR_RATIO: f64 = 1e-6;

/// Linear pose from four correspondences: homography decomposition when the
/// world points are coplanar, three-point resection with fourth-point
/// disambiguation otherwise.
pub fn linear_pose(
    world: &[Vector3<f64>; 4],
    observed: &[Vector2<f64>; 4],
    cam: &CameraIntrinsics,
) -> Option<(Matrix3<f64>, Vector3<f64>)> {
    let (centroid, e1, e2, flatness) = plane_basis(world);
    if flatness < COPLANAR_RATIO {
        homography_pose(world, observed, cam, centroid, e1, e2)
    } else {
        resection_pose(world, observed, cam)
    }
}

fn homography_pose(
    world: &[Vector3<f64>; 4],
    observed: &[Vector2<f64>; 4],
    cam: &CameraIntrinsics,
    centroid: Vector3<f64>,
    e1: Vector3<f64>,
    e2: Vector3<f64>,
) -> Option<(Matrix3<f64>, Vector3<f64>)> {
    // Plane coordinates of each marker and undistorted normalized targets.
    let plane: Vec<Vector2<f64>> = world
        .iter()
        .map(|p| Vector2::new(e1.dot(&(p - centroid)), e2.dot(&(p - centroid))))
        .collect();
    let norm: Vec<Vector2<f64>> = observed
        .iter()
        .map(|px| cam.undistort_normalized((px.x, px.y)))
        .collect();

    // Direct linear transform for the 3x3 plane-to-normalized homography.
    let mut a = DMatrix::zeros(8, 9);
    for i in 0..4 {
        let (qx, qy) = (plane[i].x, plane[i].y);
        let (mx, my) = (norm[i].x, norm[i].y);
        let r = 2 * i;
        a[(r, 0)] = qx;
        a[(r, 1)] = qy;
        a[(r, 2)] = 1.0;
        a[(r, 6)] = -mx * qx;
        a[(r, 7)] = -mx * qy;
        a[(r, 8)] = -mx;
        a[(r + 1, 3)] = qx;
        a[(r + 1, 4)] = qy;
        a[(r + 1, 5)] = 1.0;
        a[(r + 1, 6)] = -my * qx;
        a[(r + 1, 7)] = -my * qy;
        a[(r + 1, 8)] = -my;
    }
    // The null vector of the 8x9 system is the eigenvector of A^T A with the
    // smallest eigenvalue (a thin SVD of A does not carry it).
    let ata = a.transpose() * &a;
    let eig = nalgebra::SymmetricEigen::new(ata);
    let min_idx = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .map(|(i, _)| i)?;
    let hvec = eig.eigenvectors.column(min_idx);
    let h = Matrix3::new(
        hvec[0], hvec[1], hvec[2], hvec[3], hvec[4], hvec[5], hvec[6], hvec[7], hvec[8],
    );

    let h1 = h.column(0).into_owned();
    let h2 = h.column(1).into_owned();
    let h3 = h.column(2).into_owned();
    let scale = 2.0 / (h1.norm() + h2.norm());
    if !scale.is_finite() || scale == 0.0 {
        return None;
    }
    // Cheirality: the plane origin maps to t, which must sit in front.
    let lambda = if (h3 * scale).z < 0.0 { -scale } else { scale };
    let r1 = h1 * lambda;
    let r2 = h2 * lambda;
    let t = h3 * lambda;
    let approx = Matrix3::from_columns(&[r1, r2, r1.cross(&r2)]);
    let r_plane = orthonormalize(&approx);

    let e3 = e1.cross(&e2);
    let basis = Matrix3::from_columns(&[e1, e2, e3]);
    let rotation = r_plane * basis.transpose();
    let translation = t - rotation * centroid;
    Some((rotation, translation))
}

/// Distances from the camera center to three world points along their
/// bearing rays, solved by sampling and bisecting the law-of-cosines system.
fn resection_depths(
    world: &[Vector3<f64>; 3],
    bearings: &[Vector3<f64>; 3],
) -> Vec<[f64; 3]> {
    let a = (world[1] - world[2]).norm();
    let b = (world[0] - world[2]).norm();
    let c = (world[0] - world[1]).norm();
    let cos_alpha = bearings[1].dot(&bearings[2]);
    let cos_beta = bearings[0].dot(&bearings[2]);
    let cos_gamma = bearings[0].dot(&bearings[1]);
    let sin2_beta = 1.0 - cos_beta * cos_beta;
    let sin2_gamma = 1.0 - cos_gamma * cos_gamma;
    if sin2_beta < 1e-14 || sin2_gamma < 1e-14 {
        return Vec::new();
    }
    let s_max = (b / sin2_beta.sqrt()).min(c / sin2_gamma.sqrt());

    let mut solutions = Vec::new();
    for (sign3, sign2) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
        let eval = |s: f64| -> Option<f64> {
            let d3 = b * b - s * s * sin2_beta;
            let d2 = c * c - s * s * sin2_gamma;
            if d3 < 0.0 || d2 < 0.0 {
                return None;
            }
            let s3 = s * cos_beta + sign3 * d3.sqrt();
            let s2 = s * cos_gamma + sign2 * d2.sqrt();
            if s3 <= 0.0 || s2 <= 0.0 {
                return None;
            }
            Some(s2 * s2 + s3 * s3 - 2.0 * s2 * s3 * cos_alpha - a * a)
        };
        const SAMPLES: usize = 4096;
        let mut prev: Option<(f64, f64)> = None;
        for i in 1..=SAMPLES {
            let s = s_max * i as f64 / SAMPLES as f64;
            let Some(g) = eval(s) else {
                prev = None;
                continue;
            };
            if let Some((ps, pg)) = prev {
                if pg == 0.0 || pg.signum() != g.signum() {
                    // Bisect the bracketed root.
                    let (mut lo, mut hi) = (ps, s);
                    let mut glo = pg;
                    for _ in 0..90 {
                        let mid = 0.5 * (lo + hi);
                        let gm = eval(mid).unwrap_or(0.0);
                        if gm == 0.0 {
                            lo = mid;
                            hi = mid;
                            break;
                        }
                        if glo.signum() == gm.signum() {
                            lo = mid;
                            glo = gm;
                        } else {
                            hi = mid;
                        }
                    }
                    let s1 = 0.5 * (lo + hi);
                    let d3 = (b * b - s1 * s1 * sin2_beta).max(0.0);
                    let d2 = (c * c - s1 * s1 * sin2_gamma).max(0.0);
                    let s3 = s1 * cos_beta + sign3 * d3.sqrt();
                    let s2 = s1 * cos_gamma + sign2 * d2.sqrt();
                    if s1 > 0.0 && s2 > 0.0 && s3 > 0.0 {
                        solutions.push([s1, s2, s3]);
                    }
                }
            }
            prev = Some((s, g));
        }
    }
    solutions
}

fn resection_pose(
    world: &[Vector3<f64>; 4],
    observed: &[Vector2<f64>; 4],
    cam: &CameraIntrinsics,
) -> Option<(Matrix3<f64>, Vector3<f64>)> {
    let bearings: Vec<Vector3<f64>> = observed.iter().map(|p| cam.bearing((p.x, p.y))).collect();
    let mut best: Option<(f64, Matrix3<f64>, Vector3<f64>)> = None;
    // Try each 3-subset; the left-out point disambiguates the solutions.
    for left_out in (0..4).rev() {
        let idx: Vec<usize> = (0..4).filter(|&i| i != left_out).collect();
        let tri_world = [world[idx[0]], world[idx[1]], world[idx[2]]];
        let tri_bearings = [bearings[idx[0]], bearings[idx[1]], bearings[idx[2]]];
        for depths in resection_depths(&tri_world, &tri_bearings) {
            let cam_pts: Vec<Vector3<f64>> = (0..3)
                .map(|i| tri_bearings[i] * depths[i])
                .collect();
            let (r, t) = rigid_from_points(&tri_world, &cam_pts);
            let rmse = reprojection_rmse(
                &r,
                &t,
                world.as_slice(),
                observed.as_slice(),
                cam,
            );
            if best.as_ref().is_none_or(|(b, _, _)| rmse < *b) {
                best = Some((rmse, r, t));
            }
        }
        if best.as_ref().is_some_and(|(rmse, _, _)| *rmse < 1e-9) {
            break;
        }
    }
    best.map(|(_, r, t)| (r, t))
}

const REFINE_MAX_ITERS: usize = 50;
const REFINE_STEP_TOL: f64 = 1e-10;

/// Gauss-Newton reprojection refinement over a six-parameter local chart
/// (axis-angle increment composed on the left, plus translation). Steps are
/// halved until the RMSE does not increase, so accepted iterations are
/// monotone; a singular normal system returns the input pose flagged
/// `degenerate`.
pub fn refine_pose(
    observed: &[Vector2<f64>; 4],
    correspondence: [usize; 4],
    world: &[Vector3<f64>; 4],
    cam: &CameraIntrinsics,
    init_rotation: Matrix3<f64>,
    init_translation: Vector3<f64>,
) -> PoseEstimate {
    let matched: Vec<Vector2<f64>> = correspondence.iter().map(|&j| observed[j]).collect();
    let mut rotation = init_rotation;
    let mut translation = init_translation;
    let mut rmse = reprojection_rmse(&rotation, &translation, world.as_slice(), &matched, cam);
    let [k1, k2, p1, p2] = cam.dist;

    for _ in 0..REFINE_MAX_ITERS {
        // Assemble J^T J and J^T r analytically.
        let mut jtj = nalgebra::Matrix6::<f64>::zeros();
        let mut jtr = nalgebra::Vector6::<f64>::zeros();
        let mut ok = true;
        for (p, obs) in world.iter().zip(matched.iter()) {
            let prot = rotation * p;
            let pc = prot + translation;
            if pc.z <= 1e-9 {
                ok = false;
                break;
            }
            let (x, y) = (pc.x / pc.z, pc.y / pc.z);
            let proj = {
                let (xd, yd) = cam.distort(x, y);
                Vector2::new(cam.fx * xd + cam.cx, cam.fy * yd + cam.cy)
            };
            let r = proj - obs;

            let r2 = x * x + y * y;
            let radial = 1.0 + k1 * r2 + k2 * r2 * r2;
            let dradial = k1 + 2.0 * k2 * r2; // d(radial)/d(r2) ... times 2x|2y below
            let dxd_dx = radial + 2.0 * x * x * dradial + 2.0 * p1 * y + 6.0 * p2 * x;
            let dxd_dy = 2.0 * x * y * dradial + 2.0 * p1 * x + 2.0 * p2 * y;
            let dyd_dx = 2.0 * x * y * dradial + 2.0 * p1 * x + 2.0 * p2 * y;
            let dyd_dy = radial + 2.0 * y * y * dradial + 6.0 * p1 * y + 2.0 * p2 * x;
            let j_dist = nalgebra::Matrix2::new(
                cam.fx * dxd_dx,
                cam.fx * dxd_dy,
                cam.fy * dyd_dx,
                cam.fy * dyd_dy,
            );
            let iz = 1.0 / pc.z;
            let j_proj = nalgebra::Matrix2x3::new(
                iz,
                0.0,
                -pc.x * iz * iz,
                0.0,
                iz,
                -pc.y * iz * iz,
            );
            // Left-composed increment acts on the rotated point only:
            // d(exp(w) R p + t)/dw = -[R p]x at w = 0.
            let mut j_pose = nalgebra::Matrix3x6::zeros();
            j_pose.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-skew(&prot)));
            j_pose
                .fixed_view_mut::<3, 3>(0, 3)
                .copy_from(&Matrix3::identity());
            let j = j_dist * j_proj * j_pose; // 2x6
            jtj += j.transpose() * j;
            jtr += j.transpose() * r;
        }
        if !ok {
            break;
        }

        let Some(delta) = jtj.lu().solve(&(-jtr)) else {
            return PoseEstimate {
                rotation,
                translation,
                reprojection_rmse: rmse,
                correspondence,
                degenerate: true,
            };
        };
        if !delta.iter().all(|v| v.is_finite()) {
            return PoseEstimate {
                rotation,
                translation,
                reprojection_rmse: rmse,
                correspondence,
                degenerate: true,
            };
        }

        // Step halving keeps the RMSE non-increasing.
        let mut step = 1.0;
        let mut accepted = false;
        let mut step_norm = delta.norm();
        for _ in 0..25 {
            let w = Vector3::new(delta[0], delta[1], delta[2]) * step;
            let dt = Vector3::new(delta[3], delta[4], delta[5]) * step;
            let cand_r = rotation_exp(&w) * rotation;
            let cand_t = translation + dt;
            let cand_rmse =
                reprojection_rmse(&cand_r, &cand_t, world.as_slice(), &matched, cam);
            if cand_rmse <= rmse {
                rotation = cand_r;
                translation = cand_t;
                rmse = cand_rmse;
                accepted = true;
                step_norm = delta.norm() * step;
                break;
            }
            step *= 0.5;
        }
        if !accepted || step_norm < REFINE_STEP_TOL {
            break;
        }
    }

    PoseEstimate {
        rotation,
        translation,
        reprojection_rmse: rmse,
        correspondence,
        degenerate: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn camera() -> CameraIntrinsics {
        CameraIntrinsics {
            fx: 800.0,
            fy: 790.0,
            cx: 640.0,
            cy: 360.0,
            dist: [0.02, -0.008, 0.001, -0.0004],
        }
    }

    #[test]
    fn undistort_inverts_distortion() {
        let cam = camera();
        for (x, y) in [(0.1, -0.2), (0.0, 0.0), (0.3, 0.25), (-0.35, 0.1)] {
            let (xd, yd) = cam.distort(x, y);
            let px = (cam.fx * xd + cam.cx, cam.fy * yd + cam.cy);
            let n = cam.undistort_normalized(px);
            assert!((n.x - x).abs() < 1e-10 && (n.y - y).abs() < 1e-10);
        }
    }

    #[test]
    fn rodrigues_matches_small_angle_and_is_orthonormal() {
        let w = Vector3::new(0.3, -0.2, 0.5);
        let r = rotation_exp(&w);
        let err = (r.transpose() * r - Matrix3::identity()).norm();
        assert!(err < 1e-12);
        assert!((r.determinant() - 1.0).abs() < 1e-12);
        assert!(rotation_distance(&r, &Matrix3::identity()) - w.norm() < 1e-12);
    }

    fn planar_markers() -> [Vector3<f64>; 4] {
        [
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(0.52, 0.03, 0.0),
            Vector3::new(0.49, 0.47, 0.0),
            Vector3::new(-0.05, 0.5, 0.0),
        ]
    }

    fn nonplanar_markers() -> [Vector3<f64>; 4] {
        [
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(0.5, 0.0, 0.02),
            Vector3::new(0.45, 0.5, -0.04),
            Vector3::new(0.02, 0.48, 0.12),
        ]
    }

    fn planted_pose() -> (Matrix3<f64>, Vector3<f64>) {
        let r = rotation_exp(&Vector3::new(0.12, -0.2, 0.05));
        let c = Vector3::new(0.25, 0.25, -2.0);
        (r, -r * c)
    }

    fn observe(
        world: &[Vector3<f64>; 4],
        r: &Matrix3<f64>,
        t: &Vector3<f64>,
        cam: &CameraIntrinsics,
    ) -> [Vector2<f64>; 4] {
        let mut out = [Vector2::zeros(); 4];
        for (o, p) in out.iter_mut().zip(world.iter()) {
            *o = cam.project(&(r * p + t)).expect("in front");
        }
        out
    }

    #[test]
    fn linear_pose_recovers_planar_plant() {
        let cam = camera();
        let world = planar_markers();
        let (r, t) = planted_pose();
        let obs = observe(&world, &r, &t, &cam);
        let (lr, lt) = linear_pose(&world, &obs, &cam).expect("pose");
        assert!(rotation_distance(&lr, &r) < 1e-6, "rotation off by {}", rotation_distance(&lr, &r));
        assert!((lt - t).norm() < 1e-6, "translation off by {}", (lt - t).norm());
    }

    #[test]
    fn linear_pose_recovers_nonplanar_plant() {
        let cam = camera();
        let world = nonplanar_markers();
        let (r, t) = planted_pose();
        let obs = observe(&world, &r, &t, &cam);
        let (lr, lt) = linear_pose(&world, &obs, &cam).expect("pose");
        assert!(rotation_distance(&lr, &r) < 1e-6, "rotation off by {}", rotation_distance(&lr, &r));
        assert!((lt - t).norm() < 1e-6, "translation off by {}", (lt - t).norm());
    }

    #[test]
    fn refine_recovers_exactly_from_noiseless_data() {
        let cam = camera();
        let world = planar_markers();
        let (r, t) = planted_pose();
        let obs = observe(&world, &r, &t, &cam);
        let (lr, lt) = linear_pose(&world, &obs, &cam).unwrap();
        let est = refine_pose(&obs, [0, 1, 2, 3], &world, &cam, lr, lt);
        assert!(!est.degenerate);
        assert!(est.reprojection_rmse < 1e-6, "rmse {}", est.reprojection_rmse);
        assert!(rotation_distance(&est.rotation, &r) < 1e-6);
        assert!((est.translation - t).norm() < 1e-6);
    }

    #[test]
    fn refine_converges_from_ten_degree_perturbation() {
        let cam = camera();
        let world = nonplanar_markers();
        let (r, t) = planted_pose();
        let obs = observe(&world, &r, &t, &cam);
        let perturb = rotation_exp(&Vector3::new(0.0, 10.0f64.to_radians(), 0.0));
        let est = refine_pose(&obs, [0, 1, 2, 3], &world, &cam, perturb * r, t);
        assert!(est.reprojection_rmse < 1e-6, "rmse {}", est.reprojection_rmse);
        assert!(rotation_distance(&est.rotation, &r) < 1e-6);
    }

    #[test]
    fn refine_keeps_rotation_orthonormal() {
        let cam = camera();
        let world = planar_markers();
        let (r, t) = planted_pose();
        let obs = observe(&world, &r, &t, &cam);
        let perturb = rotation_exp(&Vector3::new(0.05, -0.08, 0.02));
        let est = refine_pose(&obs, [0, 1, 2, 3], &world, &cam, perturb * r, t);
        let err = (est.rotation.transpose() * est.rotation - Matrix3::identity()).norm();
        assert!(err < 1e-9, "orthonormality residual {err}");
    }

    #[test]
    fn pose_estimation_is_equivariant_under_world_motion() {
        let cam = camera();
        let world = nonplanar_markers();
        let (r, t) = planted_pose();
        let obs = observe(&world, &r, &t, &cam);

        // Rigidly move the world frame; the recovered pose must compose with
        // the inverse motion.
        let r0 = rotation_exp(&Vector3::new(-0.3, 0.1, 0.25));
        let t0 = Vector3::new(0.4, -0.2, 0.7);
        let moved: [Vector3<f64>; 4] = std::array::from_fn(|i| r0 * world[i] + t0);
        let (lr, lt) = linear_pose(&moved, &obs, &cam).unwrap();
        let est = refine_pose(&obs, [0, 1, 2, 3], &moved, &cam, lr, lt);

        let expected_r = r * r0.transpose();
        let expected_t = t - expected_r * t0;
        // Frobenius difference: the acos-based angle saturates near sqrt(eps)
        // and cannot certify agreement this tight.
        assert!((est.rotation - expected_r).norm() < 1e-8);
        assert!((est.translation - expected_t).norm() < 1e-8);
    }
}
