//! Seeded synthetic scenes and noisy correspondences.
//!
//! Two correspondence formats are produced: the eight corners of the object's
//! 3D bounding box paired with their projections (BB), and a coarse location
//! field that pairs a lattice of image cells over the object with the visible
//! surface point seen through each cell (LF). A log-normal focal length
//! predictor stands in for a learned regressor.

use alloc::vec::Vec;

use num_traits::Float;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::correspondence::{Correspondence, CorrespondenceSet};
use crate::error::{Error, Result};
use crate::geometry::{project, transform_point, PinholeCamera, RigidPose, Rotation, Vec2, Vec3};
use crate::metrics::median;

/// Attempts allowed when rejection-sampling a visible scene.
pub const MAX_SAMPLING_ATTEMPTS: usize = 1000;

/// Log-space sigma whose median relative focal error is 0.175.
pub const CALIBRATED_LOG_SIGMA: f64 = 0.261_691_359_390_189_7;

/// Default location field resolution.
pub const DEFAULT_LF_GRID: usize = 28;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum ObjectModel {
    /// Axis-aligned box centered on the object origin, dimensions in meters.
    Box {
        dims: Vec3,
    },
    PointCloud {
        points: Vec<Vec3>,
    },
}

impl ObjectModel {
    /// Points used for evaluation: box corners or the cloud itself.
    pub fn model_points(&self) -> Vec<Vec3> {
        match self {
            ObjectModel::Box { dims } => box_corners(&Vec3::zeros(), dims).to_vec(),
            ObjectModel::PointCloud { points } => points.clone(),
        }
    }

    /// Center and extent of the axis-aligned 3D bounding box.
    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        match self {
            ObjectModel::Box { dims } => (Vec3::zeros(), *dims),
            ObjectModel::PointCloud { points } => {
                let mut lo = Vec3::repeat(f64::INFINITY);
                let mut hi = Vec3::repeat(f64::NEG_INFINITY);
                for p in points {
                    lo = lo.inf(p);
                    hi = hi.sup(p);
                }
                ((lo + hi) / 2.0, hi - lo)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ObjectModel::Box { dims } if dims.iter().all(|d| *d > 0.0 && d.is_finite()) => Ok(()),
            ObjectModel::Box { .. } => Err(Error::InvalidArgument("box dims must be positive")),
            ObjectModel::PointCloud { points } if points.len() >= 4 => Ok(()),
            ObjectModel::PointCloud { .. } => Err(Error::InvalidArgument(
                "point cloud needs at least 4 points",
            )),
        }
    }
}

/// The eight corners of a box, in a fixed order (x slowest, z fastest).
pub fn box_corners(center: &Vec3, dims: &Vec3) -> [Vec3; 8] {
    let h = dims / 2.0;
    core::array::from_fn(|i| {
        let sx = if i & 4 == 0 { -1.0 } else { 1.0 };
        let sy = if i & 2 == 0 { -1.0 } else { 1.0 };
        let sz = if i & 1 == 0 { -1.0 } else { 1.0 };
        center + Vec3::new(sx * h.x, sy * h.y, sz * h.z)
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum RotationDistribution {
    UniformSo3,
    /// `Rz(in_plane) * Rx(elevation) * Ry(azimuth)`, each angle uniform in
    /// its range (radians). All-zero ranges give the identity.
    ViewSphere {
        azimuth: (f64, f64),
        elevation: (f64, f64),
        in_plane: (f64, f64),
    },
}

impl RotationDistribution {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Rotation {
        match *self {
            RotationDistribution::UniformSo3 => {
                let mut q = [0.0; 4];
                loop {
                    for v in &mut q {
                        *v = StandardNormal.sample(rng);
                    }
                    if let Ok(r) = Rotation::from_quaternion_wxyz(q) {
                        return r;
                    }
                }
            }
            RotationDistribution::ViewSphere {
                azimuth,
                elevation,
                in_plane,
            } => {
                let az = uniform(rng, azimuth);
                let el = uniform(rng, elevation);
                let roll = uniform(rng, in_plane);
                Rotation::from_axis_angle(&Vec3::z(), roll)
                    * Rotation::from_axis_angle(&Vec3::x(), el)
                    * Rotation::from_axis_angle(&Vec3::y(), az)
            }
        }
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, range: (f64, f64)) -> f64 {
    if range.1 > range.0 {
        rng.random_range(range.0..range.1)
    } else {
        range.0
    }
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, range: (f64, f64)) -> f64 {
    if range.1 <= range.0 {
        return range.0;
    }
    Float::exp(uniform(rng, (Float::ln(range.0), Float::ln(range.1))))
}

fn normal<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    z * sigma
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SceneSpec {
    pub model: ObjectModel,
    /// Object depth range along the optical axis, meters.
    pub distance_range: (f64, f64),
    pub rotation_distribution: RotationDistribution,
    /// Sampled log-uniformly.
    pub focal_range_px: (f64, f64),
    pub image_size: (u32, u32),
    pub rng_seed: u64,
    /// Object center offset from the principal point, as a fraction of the
    /// half image size.
    pub placement_jitter: f64,
    /// Smallest accepted ratio of projected bbox diagonal to image diagonal.
    pub min_bbox_fraction: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            model: ObjectModel::Box {
                dims: Vec3::new(1.0, 0.8, 0.6),
            },
            distance_range: (2.0, 12.0),
            rotation_distribution: RotationDistribution::UniformSo3,
            focal_range_px: (300.0, 3000.0),
            image_size: (640, 480),
            rng_seed: 0,
            placement_jitter: 0.5,
            min_bbox_fraction: 0.1,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let (d0, d1) = self.distance_range;
        if !(d0 > 0.0 && d0 <= d1 && d1.is_finite()) {
            return Err(Error::InvalidArgument(
                "distance_range must satisfy 0 < min <= max",
            ));
        }
        let (f0, f1) = self.focal_range_px;
        if !(f0 > 0.0 && f0 <= f1 && f1.is_finite()) {
            return Err(Error::InvalidArgument(
                "focal_range_px must satisfy 0 < min <= max",
            ));
        }
        if self.image_size.0 == 0 || self.image_size.1 == 0 {
            return Err(Error::InvalidArgument("image_size must be non-zero"));
        }
        if let RotationDistribution::ViewSphere {
            azimuth,
            elevation,
            in_plane,
        } = self.rotation_distribution
        {
            if [azimuth, elevation, in_plane].iter().any(|r| r.0 > r.1) {
                return Err(Error::InvalidArgument("angle ranges must be non-empty"));
            }
        }
        if !(self.placement_jitter >= 0.0 && self.min_bbox_fraction >= 0.0) {
            return Err(Error::InvalidArgument(
                "placement parameters must be non-negative",
            ));
        }
        Ok(())
    }
}

/// Independent random stream for one `(seed, index, purpose)` triple.
pub fn stream_rng(seed: u64, index: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ purpose.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    rng.set_stream(index);
    rng
}

/// Stream tags used by the pipeline.
pub mod purpose {
    pub const SCENE: u64 = 1;
    pub const CORRESPONDENCES: u64 = 2;
    pub const FOCAL_PREDICTION: u64 = 3;
    pub const RANSAC: u64 = 4;
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthScene {
    pub index: u64,
    pub model: ObjectModel,
    pub pose_gt: RigidPose,
    pub camera_gt: PinholeCamera,
    pub model_points: Vec<Vec3>,
    /// Diagonal of the tight 2D box around the projected model points.
    pub bbox_diag_px: f64,
    pub image_diag_px: f64,
    pub dims_gt: Vec3,
}

impl GroundTruthScene {
    /// Tight image-space box `(min, max)` of the projected model points.
    pub fn bbox_2d(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::repeat(f64::INFINITY);
        let mut hi = Vec2::repeat(f64::NEG_INFINITY);
        for p in &self.model_points {
            if let Ok(uv) = project(p, &self.pose_gt, &self.camera_gt) {
                lo = lo.inf(&uv);
                hi = hi.sup(&uv);
            }
        }
        (lo, hi)
    }
}

/// Deterministic scene number `index` of `spec`.
pub fn sample_scene(spec: &SceneSpec, index: u64) -> Result<GroundTruthScene> {
    spec.validate()?;
    let mut rng = stream_rng(spec.rng_seed, index, purpose::SCENE);
    let (w, h) = spec.image_size;
    let model_points = spec.model.model_points();
    let (_, dims_gt) = spec.model.bounding_box();

    // the focal length is drawn once so that visibility rejection cannot
    // skew its log-uniform distribution
    let focal = log_uniform(&mut rng, spec.focal_range_px);
    let camera = PinholeCamera::new(focal, w, h)?;
    for _ in 0..MAX_SAMPLING_ATTEMPTS {
        let rotation = spec.rotation_distribution.sample(&mut rng);
        let depth = uniform(&mut rng, spec.distance_range);
        let j = spec.placement_jitter;
        let du = uniform(&mut rng, (-j, j)) * f64::from(w) / 2.0;
        let dv = uniform(&mut rng, (-j, j)) * f64::from(h) / 2.0;
        let translation = Vec3::new(depth * du / focal, depth * dv / focal, depth);
        let pose = RigidPose::new(rotation, translation);

        let mut lo = Vec2::repeat(f64::INFINITY);
        let mut hi = Vec2::repeat(f64::NEG_INFINITY);
        let visible = model_points
            .iter()
            .all(|p| match project(p, &pose, &camera) {
                Ok(uv) => {
                    lo = lo.inf(&uv);
                    hi = hi.sup(&uv);
                    camera.contains(&uv)
                }
                Err(_) => false,
            });
        if !visible {
            continue;
        }
        let bbox_diag = (hi - lo).norm();
        let image_diag = camera.image_diagonal();
        if bbox_diag < spec.min_bbox_fraction * image_diag || bbox_diag <= 0.0 {
            continue;
        }
        return Ok(GroundTruthScene {
            index,
            model: spec.model.clone(),
            pose_gt: pose,
            camera_gt: camera,
            model_points,
            bbox_diag_px: bbox_diag,
            image_diag_px: image_diag,
            dims_gt,
        });
    }
    Err(Error::SamplingExhausted {
        attempts: MAX_SAMPLING_ATTEMPTS,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum OutlierModel {
    /// Replace the 2D location with a uniform draw over the image.
    #[default]
    UniformInImage,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct NoiseSpec {
    /// Gaussian sigma on 2D locations, pixels.
    pub pixel_sigma: f64,
    /// Gaussian sigma on 3D points (LF only), meters.
    pub point3_sigma: f64,
    pub outlier_rate: f64,
    pub outlier_model: OutlierModel,
    /// Relative Gaussian sigma on predicted box dimensions (BB only).
    pub dims_rel_sigma: f64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v >= 0.0 && v.is_finite();
        if !(ok(self.pixel_sigma) && ok(self.point3_sigma) && ok(self.dims_rel_sigma)) {
            return Err(Error::InvalidArgument("noise sigmas must be >= 0"));
        }
        if !(self.outlier_rate >= 0.0 && self.outlier_rate < 1.0) {
            return Err(Error::InvalidArgument("outlier_rate must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Perturbs an exact 2D location with pixel noise, then possibly replaces it
/// with an outlier. The number of draws is fixed per call.
fn corrupt_2d<R: Rng + ?Sized>(
    rng: &mut R,
    exact: Vec2,
    noise: &NoiseSpec,
    camera: &PinholeCamera,
) -> Vec2 {
    let noisy = exact
        + Vec2::new(
            normal(rng, noise.pixel_sigma),
            normal(rng, noise.pixel_sigma),
        );
    let is_outlier = rng.random::<f64>() < noise.outlier_rate;
    let ou = rng.random::<f64>() * f64::from(camera.width);
    let ov = rng.random::<f64>() * f64::from(camera.height);
    if is_outlier {
        Vec2::new(ou, ov)
    } else {
        noisy
    }
}

/// Eight box-corner correspondences plus the predicted box dimensions.
pub fn generate_bb_correspondences<R: RngCore + ?Sized>(
    scene: &GroundTruthScene,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Result<(CorrespondenceSet, Vec3)> {
    noise.validate()?;
    let (center, dims_gt) = scene.model.bounding_box();
    let dims_pred = dims_gt.map(|d| d * (1.0 + normal(rng, noise.dims_rel_sigma)).max(0.05));
    let gt_corners = box_corners(&center, &dims_gt);
    let pred_corners = box_corners(&center, &dims_pred);
    let mut items = Vec::with_capacity(8);
    for (gt, pred) in gt_corners.iter().zip(&pred_corners) {
        let exact = project(gt, &scene.pose_gt, &scene.camera_gt)?;
        let uv = corrupt_2d(rng, exact, noise, &scene.camera_gt);
        items.push(Correspondence::new(*pred, uv));
    }
    Ok((CorrespondenceSet::new(items)?, dims_pred))
}

/// Ray/box intersection in the object frame; returns the entry distance.
fn ray_box_entry(origin: &Vec3, dir: &Vec3, lo: &Vec3, hi: &Vec3) -> Option<f64> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    for k in 0..3 {
        if dir[k].abs() < 1e-300 {
            if origin[k] < lo[k] || origin[k] > hi[k] {
                return None;
            }
            continue;
        }
        let a = (lo[k] - origin[k]) / dir[k];
        let b = (hi[k] - origin[k]) / dir[k];
        t_near = t_near.max(a.min(b));
        t_far = t_far.min(a.max(b));
    }
    (t_near <= t_far && t_near > 0.0).then_some(t_near)
}

/// Samples a `grid x grid` location field over the object's 2D box.
pub fn generate_lf_correspondences<R: RngCore + ?Sized>(
    scene: &GroundTruthScene,
    grid: usize,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Result<CorrespondenceSet> {
    if grid < 4 {
        return Err(Error::InvalidArgument("location field grid must be >= 4"));
    }
    noise.validate()?;
    let (lo, hi) = scene.bbox_2d();
    let cell = (hi - lo) / grid as f64;
    let cam = &scene.camera_gt;
    let pose = &scene.pose_gt;
    let cell_center =
        |i: usize, j: usize| lo + Vec2::new((i as f64 + 0.5) * cell.x, (j as f64 + 0.5) * cell.y);

    // surface point seen through each cell, row-major over (row j, column i)
    let mut hits: Vec<Option<(Vec3, Vec2)>> = alloc::vec![None; grid * grid];
    match &scene.model {
        ObjectModel::Box { dims } => {
            let rt = pose.rotation.transpose();
            let origin = -(&rt * pose.translation);
            let (blo, bhi) = (-dims / 2.0, dims / 2.0);
            for j in 0..grid {
                for i in 0..grid {
                    let uv = cell_center(i, j);
                    let ray = Vec3::new(
                        (uv.x - cam.principal_point.x) / cam.focal_px,
                        (uv.y - cam.principal_point.y) / cam.focal_px,
                        1.0,
                    );
                    let dir = &rt * ray;
                    if let Some(s) = ray_box_entry(&origin, &dir, &blo, &bhi) {
                        hits[j * grid + i] = Some((origin + dir * s, uv));
                    }
                }
            }
        }
        ObjectModel::PointCloud { points } => {
            // z-buffer: the nearest point per cell is the visible one
            let mut depth = alloc::vec![f64::INFINITY; grid * grid];
            for p in points {
                let p_cam = transform_point(pose, p);
                let Ok(uv) = project(p, pose, cam) else {
                    continue;
                };
                let fi = ((uv.x - lo.x) / cell.x).floor();
                let fj = ((uv.y - lo.y) / cell.y).floor();
                let i = (fi.max(0.0) as usize).min(grid - 1);
                let j = (fj.max(0.0) as usize).min(grid - 1);
                let k = j * grid + i;
                if p_cam.z < depth[k] {
                    depth[k] = p_cam.z;
                    hits[k] = Some((*p, cell_center(i, j)));
                }
            }
        }
    }

    let mut items = Vec::new();
    for (point3, uv) in hits.into_iter().flatten() {
        let noisy3 = point3
            + Vec3::new(
                normal(rng, noise.point3_sigma),
                normal(rng, noise.point3_sigma),
                normal(rng, noise.point3_sigma),
            );
        let uv = corrupt_2d(rng, uv, noise, cam);
        items.push(Correspondence::new(noisy3, uv));
    }
    if items.is_empty() {
        return Err(Error::EmptyField);
    }
    CorrespondenceSet::new(items)
}

/// Log-normal focal length predictor.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct FocalPredictorModel {
    pub log_sigma: f64,
    pub bias: f64,
}

impl Default for FocalPredictorModel {
    fn default() -> Self {
        Self {
            log_sigma: CALIBRATED_LOG_SIGMA,
            bias: 0.0,
        }
    }
}

/// `exp(ln f_gt + bias + N(0, log_sigma^2))`.
pub fn simulate_focal_prediction<R: RngCore + ?Sized>(
    f_gt: f64,
    model: &FocalPredictorModel,
    rng: &mut R,
) -> Result<f64> {
    if !(f_gt > 0.0 && f_gt.is_finite()) {
        return Err(Error::Domain("focal length must be positive"));
    }
    if !(model.log_sigma >= 0.0) {
        return Err(Error::InvalidArgument("log_sigma must be >= 0"));
    }
    let z = normal(rng, model.log_sigma);
    Ok(Float::exp(Float::ln(f_gt) + model.bias + z))
}

/// Median ground-truth focal length of a training split.
pub fn constant_focal_baseline(training_scenes: &[GroundTruthScene]) -> Result<f64> {
    let mut focals: Vec<f64> = training_scenes
        .iter()
        .map(|s| s.camera_gt.focal_px)
        .collect();
    median(&mut focals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pinned_spec() -> SceneSpec {
        SceneSpec {
            model: ObjectModel::Box {
                dims: Vec3::new(2.0, 1.0, 1.0),
            },
            distance_range: (4.0, 4.0),
            rotation_distribution: RotationDistribution::ViewSphere {
                azimuth: (0.0, 0.0),
                elevation: (0.0, 0.0),
                in_plane: (0.0, 0.0),
            },
            focal_range_px: (800.0, 800.0),
            placement_jitter: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn degenerate_ranges_pin_the_scene() {
        let s = sample_scene(&pinned_spec(), 0).unwrap();
        assert_eq!(s.pose_gt.translation, Vec3::new(0.0, 0.0, 4.0));
        assert_eq!(s.pose_gt.rotation, Rotation::identity());
        assert_eq!(s.camera_gt.focal_px, 800.0);
    }

    #[test]
    fn scenes_are_deterministic() {
        let spec = SceneSpec {
            rng_seed: 77,
            ..Default::default()
        };
        assert_eq!(
            sample_scene(&spec, 5).unwrap(),
            sample_scene(&spec, 5).unwrap()
        );
        assert_ne!(
            sample_scene(&spec, 5).unwrap(),
            sample_scene(&spec, 6).unwrap()
        );
    }

    #[test]
    fn scenes_are_visible_and_in_front() {
        let spec = SceneSpec::default();
        for i in 0..50 {
            let s = sample_scene(&spec, i).unwrap();
            for p in &s.model_points {
                let uv = project(p, &s.pose_gt, &s.camera_gt).unwrap();
                assert!(s.camera_gt.contains(&uv));
            }
        }
    }

    #[test]
    fn impossible_spec_exhausts_sampling() {
        let spec = SceneSpec {
            distance_range: (0.5, 0.5),
            focal_range_px: (3000.0, 3000.0),
            ..pinned_spec()
        };
        assert!(matches!(
            sample_scene(&spec, 0),
            Err(Error::SamplingExhausted { attempts: 1000 })
        ));
    }

    #[test]
    fn zero_noise_bb_is_exact() {
        let scene = sample_scene(&SceneSpec::default(), 3).unwrap();
        let mut rng = stream_rng(1, 3, purpose::CORRESPONDENCES);
        let (set, dims) =
            generate_bb_correspondences(&scene, &NoiseSpec::default(), &mut rng).unwrap();
        assert_eq!(set.len(), 8);
        assert_eq!(dims, scene.dims_gt);
        for c in &set {
            let uv = project(&c.point3, &scene.pose_gt, &scene.camera_gt).unwrap();
            assert!((uv - c.point2).norm() < 1e-9);
        }
    }

    #[test]
    fn grid_below_four_is_rejected() {
        let scene = sample_scene(&SceneSpec::default(), 0).unwrap();
        let mut rng = stream_rng(1, 0, purpose::CORRESPONDENCES);
        assert!(matches!(
            generate_lf_correspondences(&scene, 3, &NoiseSpec::default(), &mut rng),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn zero_noise_lf_box_is_exact() {
        let scene = sample_scene(&SceneSpec::default(), 4).unwrap();
        let mut rng = stream_rng(1, 4, purpose::CORRESPONDENCES);
        let set = generate_lf_correspondences(&scene, 28, &NoiseSpec::default(), &mut rng).unwrap();
        for c in &set {
            let uv = project(&c.point3, &scene.pose_gt, &scene.camera_gt).unwrap();
            assert!((uv - c.point2).norm() < 1e-6);
        }
    }

    #[test]
    fn point_cloud_lf_within_quantization() {
        let mut points = Vec::new();
        for i in 0..30 {
            for j in 0..30 {
                let a = i as f64 / 29.0 * core::f64::consts::TAU;
                let b = j as f64 / 29.0 * core::f64::consts::PI;
                points.push(Vec3::new(
                    a.cos() * b.sin(),
                    a.sin() * b.sin(),
                    b.cos() * 0.5,
                ));
            }
        }
        let spec = SceneSpec {
            model: ObjectModel::PointCloud { points },
            ..Default::default()
        };
        let scene = sample_scene(&spec, 2).unwrap();
        let mut rng = stream_rng(1, 2, purpose::CORRESPONDENCES);
        let set = generate_lf_correspondences(&scene, 28, &NoiseSpec::default(), &mut rng).unwrap();
        let bound = scene.bbox_diag_px / (28.0 * core::f64::consts::SQRT_2);
        for c in &set {
            let uv = project(&c.point3, &scene.pose_gt, &scene.camera_gt).unwrap();
            assert!((uv - c.point2).norm() <= bound);
        }
    }

    #[test]
    fn predictor_degenerate_cases() {
        let mut rng = stream_rng(0, 0, purpose::FOCAL_PREDICTION);
        let exact = FocalPredictorModel {
            log_sigma: 0.0,
            bias: 0.0,
        };
        assert_relative_eq!(
            simulate_focal_prediction(700.0, &exact, &mut rng).unwrap(),
            700.0,
            epsilon = 1e-9
        );
        let doubled = FocalPredictorModel {
            log_sigma: 0.0,
            bias: core::f64::consts::LN_2,
        };
        assert_relative_eq!(
            simulate_focal_prediction(700.0, &doubled, &mut rng).unwrap(),
            1400.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn constant_baseline_medians() {
        let base = sample_scene(&pinned_spec(), 0).unwrap();
        let with_focals = |fs: &[f64]| -> Vec<GroundTruthScene> {
            fs.iter()
                .map(|f| GroundTruthScene {
                    camera_gt: base.camera_gt.with_focal(*f),
                    ..base.clone()
                })
                .collect()
        };
        assert_eq!(
            constant_focal_baseline(&with_focals(&[800.0])).unwrap(),
            800.0
        );
        assert_eq!(
            constant_focal_baseline(&with_focals(&[600.0, 800.0, 1000.0])).unwrap(),
            800.0
        );
        assert_eq!(
            constant_focal_baseline(&with_focals(&[600.0, 800.0, 1000.0, 4000.0])).unwrap(),
            900.0
        );
        assert_eq!(constant_focal_baseline(&[]), Err(Error::EmptyInput));
    }
}
