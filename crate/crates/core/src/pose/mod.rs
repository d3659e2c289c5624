//! Localization by tracking: four independent trackers follow configured
//! markers; each frame the 2D-3D correspondence is resolved over all 24
//! assignments and the 6-DoF camera pose is refined by reprojection error.

pub mod pnp;

use std::path::Path;

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::config::TrackerConfig;
use crate::error::{Error, Result};
use crate::imaging::{BBox, Frame};
use crate::tracker::Tracker;
pub use pnp::{refine_pose, CameraIntrinsics, PoseEstimate};

/// Marker rig: world positions (meters) of four non-symmetric markers plus
/// the image boxes used to initialize their trackers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarkerConfig {
    pub points_world: [[f64; 3]; 4],
    pub init_boxes: [[f64; 4]; 4],
}

impl MarkerConfig {
    pub fn world_points(&self) -> [Vector3<f64>; 4] {
        std::array::from_fn(|i| Vector3::from_column_slice(&self.points_world[i]))
    }

    pub fn boxes(&self) -> [BBox; 4] {
        std::array::from_fn(|i| {
            let [x, y, w, h] = self.init_boxes[i];
            BBox::new(x, y, w, h)
        })
    }

    /// Reject configurations a rigid motion can map onto themselves: any
    /// nontrivial permutation preserving the pairwise distance matrix would
    /// make the correspondence search ambiguous.
    pub fn validate(&self) -> Result<()> {
        let pts = self.world_points();
        for b in &self.boxes() {
            if !b.is_valid() {
                return Err(Error::ConfigInvalid {
                    key: "init_boxes".to_string(),
                    reason: "boxes must have positive extent".to_string(),
                });
            }
        }
        let mut dist = [[0.0f64; 4]; 4];
        let mut scale = 0.0f64;
        for i in 0..4 {
            for j in 0..4 {
                dist[i][j] = (pts[i] - pts[j]).norm();
                scale = scale.max(dist[i][j]);
            }
        }
        if scale == 0.0 {
            return Err(Error::ConfigInvalid {
                key: "points_world".to_string(),
                reason: "markers are coincident".to_string(),
            });
        }
        let tol = 1e-6 * scale;
        for perm in permutations4() {
            if perm == [0, 1, 2, 3] {
                continue;
            }
            let preserved = (0..4).all(|i| {
                (0..4).all(|j| (dist[perm[i]][perm[j]] - dist[i][j]).abs() <= tol)
            });
            if preserved {
                return Err(Error::MarkersSymmetric(perm.to_vec()));
            }
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<MarkerConfig> {
        let cfg: MarkerConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn load_camera(path: &Path) -> Result<CameraIntrinsics> {
    let cam: CameraIntrinsics = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    cam.validate()?;
    Ok(cam)
}

/// All 24 assignments of four markers to four observations.
pub fn permutations4() -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(24);
    let mut items = [0usize, 1, 2, 3];
    permute(&mut items, 0, &mut out);
    out
}

fn permute(items: &mut [usize; 4], k: usize, out: &mut Vec<[usize; 4]>) {
    if k == 4 {
        out.push(*items);
        return;
    }
    for i in k..4 {
        items.swap(k, i);
        permute(items, k + 1, out);
        items.swap(k, i);
    }
}

/// Resolve the marker-to-observation assignment: every permutation gets a
/// linear pose and is ranked by reprojection RMSE. When a previous assignment
/// is supplied it is kept unless its RMSE exceeds three times the best
/// alternative (hysteresis against flicker).
pub fn correspondence_search(
    centers: &[(f64, f64); 4],
    markers: &MarkerConfig,
    cam: &CameraIntrinsics,
    previous: Option<[usize; 4]>,
) -> Result<[usize; 4]> {
    let world = markers.world_points();
    let observed: [Vector2<f64>; 4] =
        std::array::from_fn(|i| Vector2::new(centers[i].0, centers[i].1));

    let mut rmses: Vec<([usize; 4], f64)> = Vec::with_capacity(24);
    for perm in permutations4() {
        let matched: [Vector2<f64>; 4] = std::array::from_fn(|i| observed[perm[i]]);
        let rmse = match pnp::linear_pose(&world, &matched, cam) {
            Some((r, t)) => pnp::reprojection_rmse(&r, &t, world.as_slice(), &matched, cam),
            None => f64::INFINITY,
        };
        rmses.push((perm, rmse));
    }
    let best = rmses
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("24 candidates");
    if !best.1.is_finite() {
        return Err(Error::CorrespondenceFailed);
    }
    if let Some(prev) = previous {
        let prev_rmse = rmses
            .iter()
            .find(|(p, _)| *p == prev)
            .map(|(_, r)| *r)
            .unwrap_or(f64::INFINITY);
        if prev_rmse <= 3.0 * best.1 {
            return Ok(prev);
        }
    }
    Ok(best.0)
}

/// Advance the four marker trackers one frame and return their box centers.
/// Per-marker failures surface as errors; pose estimation requires all four.
pub fn track_markers(frame: &Frame, trackers: &mut [Tracker; 4]) -> Result<[(f64, f64); 4]> {
    let mut centers = [(0.0, 0.0); 4];
    for (i, tracker) in trackers.iter_mut().enumerate() {
        let bbox = tracker.update(frame)?;
        centers[i] = bbox.center();
    }
    Ok(centers)
}

/// Per-frame pose record emitted by the streaming pipeline.
#[derive(Debug, Clone, Serialize)]
pub struct PoseRecord {
    pub frame: usize,
    /// Row-major rotation matrix.
    pub r: [f64; 9],
    pub t: [f64; 3],
    pub rmse_px: f64,
    pub permutation: [usize; 4],
    pub degenerate: bool,
}

impl PoseRecord {
    pub fn from_estimate(frame: usize, est: &PoseEstimate) -> Self {
        let mut r = [0.0; 9];
        for row in 0..3 {
            for col in 0..3 {
                r[row * 3 + col] = est.rotation[(row, col)];
            }
        }
        PoseRecord {
            frame,
            r,
            t: [est.translation.x, est.translation.y, est.translation.z],
            rmse_px: est.reprojection_rmse,
            permutation: est.correspondence,
            degenerate: est.degenerate,
        }
    }
}

/// Four-marker pose pipeline over a frame stream.
pub struct PoseTracker {
    markers: MarkerConfig,
    cam: CameraIntrinsics,
    trackers: [Tracker; 4],
    prev_permutation: Option<[usize; 4]>,
    frame_idx: usize,
}

impl PoseTracker {
    pub fn init(
        frame: &Frame,
        markers: MarkerConfig,
        cam: CameraIntrinsics,
        cfg: &TrackerConfig,
    ) -> Result<PoseTracker> {
        markers.validate()?;
        cam.validate()?;
        let boxes = markers.boxes();
        let mut trackers = Vec::with_capacity(4);
        for b in boxes {
            trackers.push(Tracker::init(frame, b, cfg.clone())?);
        }
        let trackers: [Tracker; 4] = match trackers.try_into() {
            Ok(t) => t,
            Err(_) => unreachable!("four boxes produce four trackers"),
        };
        Ok(PoseTracker {
            markers,
            cam,
            trackers,
            prev_permutation: None,
            frame_idx: 1,
        })
    }

    /// Pose from the initialization boxes themselves (frame 1).
    pub fn estimate_initial(&mut self) -> Result<PoseEstimate> {
        let centers: [(f64, f64); 4] =
            std::array::from_fn(|i| self.trackers[i].bbox().center());
        self.estimate_from_centers(&centers)
    }

    /// Track the markers through `frame` and estimate the camera pose.
    pub fn step(&mut self, frame: &Frame) -> Result<PoseEstimate> {
        let centers = track_markers(frame, &mut self.trackers)?;
        self.frame_idx += 1;
        self.estimate_from_centers(&centers)
    }

    fn estimate_from_centers(&mut self, centers: &[(f64, f64); 4]) -> Result<PoseEstimate> {
        let perm =
            correspondence_search(centers, &self.markers, &self.cam, self.prev_permutation)?;
        self.prev_permutation = Some(perm);
        let world = self.markers.world_points();
        let observed: [Vector2<f64>; 4] =
            std::array::from_fn(|i| Vector2::new(centers[i].0, centers[i].1));
        let matched: [Vector2<f64>; 4] = std::array::from_fn(|i| observed[perm[i]]);
        let (r0, t0) = pnp::linear_pose(&world, &matched, &self.cam)
            .ok_or(Error::CorrespondenceFailed)?;
        Ok(pnp::refine_pose(&observed, perm, &world, &self.cam, r0, t0))
    }

    pub fn frame_idx(&self) -> usize {
        self.frame_idx
    }

    pub fn trackers(&self) -> &[Tracker; 4] {
        &self.trackers
    }
}

/// Rotation helper shared by tests and the CLI.
pub fn rotation_from_record(r: &[f64; 9]) -> Matrix3<f64> {
    Matrix3::new(r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8])
}

#[cfg(test)]
mod tests {
    use super::*;
    use pnp::{rotation_distance, rotation_exp};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn camera() -> CameraIntrinsics {
        CameraIntrinsics {
            fx: 800.0,
            fy: 800.0,
            cx: 640.0,
            cy: 360.0,
            dist: [0.0, 0.0, 0.0, 0.0],
        }
    }

    fn markers() -> MarkerConfig {
        MarkerConfig {
            points_world: [
                [0.0, 0.0, 0.0],
                [0.52, 0.03, 0.0],
                [0.49, 0.47, 0.0],
                [-0.05, 0.5, 0.0],
            ],
            init_boxes: [[0.0; 4]; 4],
        }
    }

    fn planted() -> (Matrix3<f64>, Vector3<f64>) {
        let r = rotation_exp(&Vector3::new(0.1, -0.15, 0.04));
        let c = Vector3::new(0.25, 0.25, -2.0);
        (r, -r * c)
    }

    fn centers_for(
        markers: &MarkerConfig,
        r: &Matrix3<f64>,
        t: &Vector3<f64>,
        cam: &CameraIntrinsics,
    ) -> [(f64, f64); 4] {
        let world = markers.world_points();
        std::array::from_fn(|i| {
            let p = cam.project(&(r * world[i] + t)).expect("in front");
            (p.x, p.y)
        })
    }

    #[test]
    fn symmetric_marker_sets_are_rejected() {
        let square = MarkerConfig {
            points_world: [
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [1.0, 1.0, 0.0],
                [0.0, 1.0, 0.0],
            ],
            init_boxes: [[0.0, 0.0, 1.0, 1.0]; 4],
        };
        let err = square.validate().unwrap_err();
        assert!(err.to_string().contains("markers-symmetric"));

        let mut irregular = markers();
        irregular.init_boxes = [[0.0, 0.0, 1.0, 1.0]; 4];
        assert!(irregular.validate().is_ok());
    }

    #[test]
    fn identity_permutation_is_recovered() {
        let cam = camera();
        let m = markers();
        let (r, t) = planted();
        let centers = centers_for(&m, &r, &t, &cam);
        let perm = correspondence_search(&centers, &m, &cam, None).unwrap();
        assert_eq!(perm, [0, 1, 2, 3]);
    }

    #[test]
    fn planted_swap_is_recovered() {
        let cam = camera();
        let m = markers();
        let (r, t) = planted();
        let straight = centers_for(&m, &r, &t, &cam);
        // Swap observations 1 and 2: world point 1 is now observation 2.
        let swapped = [straight[0], straight[2], straight[1], straight[3]];
        let perm = correspondence_search(&swapped, &m, &cam, None).unwrap();
        assert_eq!(perm, [0, 2, 1, 3]);
    }

    #[test]
    fn noisy_monte_carlo_recovers_permutation_and_pose() {
        let cam = camera();
        let m = markers();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut translation_errors = Vec::new();
        for trial in 0..100 {
            let axis = Vector3::new(
                rng.random_range(-0.2..0.2),
                rng.random_range(-0.2..0.2),
                rng.random_range(-0.2..0.2),
            );
            let r = rotation_exp(&axis);
            let c = Vector3::new(
                0.25 + rng.random_range(-0.3..0.3),
                0.25 + rng.random_range(-0.3..0.3),
                -2.0 + rng.random_range(-0.2..0.2),
            );
            let t = -r * c;
            let mut centers = centers_for(&m, &r, &t, &cam);
            for ctr in centers.iter_mut() {
                ctr.0 += rng.random_range(-0.5..0.5);
                ctr.1 += rng.random_range(-0.5..0.5);
            }
            let perm = correspondence_search(&centers, &m, &cam, None).unwrap();
            assert_eq!(perm, [0, 1, 2, 3], "trial {trial} picked {perm:?}");
            let world = m.world_points();
            let observed: [Vector2<f64>; 4] =
                std::array::from_fn(|i| Vector2::new(centers[i].0, centers[i].1));
            let (r0, t0) = pnp::linear_pose(&world, &observed, &cam).unwrap();
            let est = refine_pose(&observed, perm, &world, &cam, r0, t0);
            translation_errors.push((est.translation - t).norm());
        }
        let mean = translation_errors.iter().sum::<f64>() / translation_errors.len() as f64;
        assert!(mean < 0.02, "mean translation error {mean} m");
    }

    #[test]
    fn hysteresis_keeps_previous_assignment_under_noise() {
        let cam = camera();
        let m = markers();
        let (r, t) = planted();
        let mut centers = centers_for(&m, &r, &t, &cam);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for c in centers.iter_mut() {
            c.0 += rng.random_range(-0.3..0.3);
            c.1 += rng.random_range(-0.3..0.3);
        }
        let perm = correspondence_search(&centers, &m, &cam, Some([0, 1, 2, 3])).unwrap();
        assert_eq!(perm, [0, 1, 2, 3]);
    }

    fn marker_frame(positions: &[(f64, f64); 4]) -> crate::imaging::Frame {
        let mut frame = crate::imaging::Frame::filled(240, 160, 1, 55).unwrap();
        for (m, (cx, cy)) in positions.iter().enumerate() {
            for dy in 0..20usize {
                for dx in 0..20usize {
                    let x = (*cx as i64) - 10 + dx as i64;
                    let y = (*cy as i64) - 10 + dy as i64;
                    if x >= 0 && y >= 0 && (x as usize) < 240 && (y as usize) < 160 {
                        let tex = 150 + ((dx * (13 + 3 * m) + dy * 7) % 90) as u8;
                        frame.set(x as usize, y as usize, 0, tex);
                    }
                }
            }
        }
        frame
    }

    fn marker_trackers(positions: &[(f64, f64); 4]) -> [Tracker; 4] {
        let frame = marker_frame(positions);
        let cfg = crate::config::TrackerConfig::default();
        let trackers: Vec<Tracker> = positions
            .iter()
            .map(|(cx, cy)| {
                Tracker::init(
                    &frame,
                    crate::imaging::BBox::from_center(*cx, *cy, 20.0, 20.0),
                    cfg.clone(),
                )
                .unwrap()
            })
            .collect();
        trackers.try_into().map_err(|_| ()).unwrap()
    }

    #[test]
    fn static_markers_stay_put() {
        let positions = [(40.0, 40.0), (180.0, 45.0), (175.0, 120.0), (45.0, 115.0)];
        let mut trackers = marker_trackers(&positions);
        let frame = marker_frame(&positions);
        let centers = track_markers(&frame, &mut trackers).unwrap();
        for (got, want) in centers.iter().zip(positions.iter()) {
            let d = ((got.0 - want.0).powi(2) + (got.1 - want.1).powi(2)).sqrt();
            // Within one feature cell at unit scale.
            assert!(d <= 4.0, "marker drifted {d} px");
        }
    }

    #[test]
    fn rigid_translation_moves_all_centers_together() {
        let positions = [(40.0, 40.0), (180.0, 45.0), (175.0, 120.0), (45.0, 115.0)];
        let mut trackers = marker_trackers(&positions);
        // Rig slides 2 px/frame for four frames.
        let mut centers = [(0.0, 0.0); 4];
        for step in 1..=4 {
            let moved: [(f64, f64); 4] = std::array::from_fn(|i| {
                (
                    positions[i].0 + 2.0 * step as f64,
                    positions[i].1 + 1.0 * step as f64,
                )
            });
            let frame = marker_frame(&moved);
            centers = track_markers(&frame, &mut trackers).unwrap();
        }
        // All four displacement vectors agree with their common mean.
        let d: Vec<(f64, f64)> = centers
            .iter()
            .zip(positions.iter())
            .map(|(c, p)| (c.0 - p.0, c.1 - p.1))
            .collect();
        let mean = (
            d.iter().map(|v| v.0).sum::<f64>() / 4.0,
            d.iter().map(|v| v.1).sum::<f64>() / 4.0,
        );
        for v in &d {
            assert!(
                (v.0 - mean.0).abs() <= 2.0 && (v.1 - mean.1).abs() <= 2.0,
                "displacement {v:?} deviates from common {mean:?}"
            );
        }
        // And the common motion matches the true rig translation.
        assert!((mean.0 - 8.0).abs() <= 2.0, "x motion {:.2}", mean.0);
        assert!((mean.1 - 4.0).abs() <= 2.0, "y motion {:.2}", mean.1);
    }

    #[test]
    fn rotation_distance_of_recovered_pose_is_tiny() {
        let cam = camera();
        let m = markers();
        let (r, t) = planted();
        let centers = centers_for(&m, &r, &t, &cam);
        let world = m.world_points();
        let observed: [Vector2<f64>; 4] =
            std::array::from_fn(|i| Vector2::new(centers[i].0, centers[i].1));
        let (r0, t0) = pnp::linear_pose(&world, &observed, &cam).unwrap();
        let est = refine_pose(&observed, [0, 1, 2, 3], &world, &cam, r0, t0);
        assert!(rotation_distance(&est.rotation, &r) < 1e-6);
        assert!((est.translation - t).norm() < 1e-6);
        assert!(est.reprojection_rmse < 1e-6);
    }
}
