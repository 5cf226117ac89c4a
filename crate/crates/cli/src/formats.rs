//! JSON and CSV interchange formats.

use std::path::Path;

use pnpf_core::metrics::accuracy_curve;
use pnpf_core::pipeline::SceneInput;
use pnpf_core::{
    Correspondence, CorrespondenceSet, EvalSample, PinholeCamera, RigidPose, Rotation, SolveResult,
    Vec2, Vec3,
};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseJson {
    /// Unit quaternion `[w, x, y, z]` with `w >= 0`.
    pub quaternion: [f64; 4],
    pub translation: [f64; 3],
}

impl PoseJson {
    pub fn from_pose(pose: &RigidPose) -> Self {
        let t = pose.translation;
        Self {
            quaternion: pose.rotation.to_quaternion_wxyz(),
            translation: [t.x, t.y, t.z],
        }
    }

    pub fn to_pose(&self) -> Result<RigidPose> {
        let r = Rotation::from_quaternion_wxyz(self.quaternion)?;
        Ok(RigidPose::new(r, Vec3::from(self.translation)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrespondenceJson {
    #[serde(rename = "X")]
    pub point3: [f64; 3],
    #[serde(rename = "x")]
    pub point2: [f64; 2],
    pub weight: f64,
}

/// One synthetic scene: ground truth plus the 2D-3D correspondences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrespondenceFile {
    pub scene_id: u64,
    pub f_gt: f64,
    pub f_pred: f64,
    pub image_size: [u32; 2],
    pub pose_gt: PoseJson,
    pub correspondences: Vec<CorrespondenceJson>,
    pub bbox_diag: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_points: Option<Vec<[f64; 3]>>,
}

impl CorrespondenceFile {
    pub fn from_input(input: &SceneInput) -> Self {
        let s = &input.scene;
        Self {
            scene_id: s.index,
            f_gt: s.camera_gt.focal_px,
            f_pred: input.f_pred,
            image_size: [s.camera_gt.width, s.camera_gt.height],
            pose_gt: PoseJson::from_pose(&s.pose_gt),
            correspondences: input
                .correspondences
                .iter()
                .map(|c| CorrespondenceJson {
                    point3: [c.point3.x, c.point3.y, c.point3.z],
                    point2: [c.point2.x, c.point2.y],
                    weight: c.weight,
                })
                .collect(),
            bbox_diag: s.bbox_diag_px,
            model_points: Some(s.model_points.iter().map(|p| [p.x, p.y, p.z]).collect()),
        }
    }

    /// Ground-truth camera; only its geometry matters to the solvers.
    pub fn camera(&self) -> Result<PinholeCamera> {
        Ok(PinholeCamera::new(
            self.f_gt,
            self.image_size[0],
            self.image_size[1],
        )?)
    }

    pub fn correspondence_set(&self) -> Result<CorrespondenceSet> {
        let items = self
            .correspondences
            .iter()
            .map(|c| Correspondence::weighted(Vec3::from(c.point3), Vec2::from(c.point2), c.weight))
            .collect();
        Ok(CorrespondenceSet::new(items)?)
    }

    /// Evaluation record of `pose`/`focal` against this file's ground truth.
    pub fn eval_sample(&self, pose: &RigidPose, focal: f64) -> Result<EvalSample> {
        let camera = self.camera()?;
        let model_points = self
            .model_points
            .as_ref()
            .ok_or_else(|| {
                CliError::Experiment(format!("scene {} has no model_points", self.scene_id))
            })?
            .iter()
            .map(|p| Vec3::from(*p))
            .collect();
        Ok(EvalSample {
            model_points,
            pose_gt: self.pose_gt.to_pose()?,
            pose_pred: *pose,
            f_gt: self.f_gt,
            f_pred: focal,
            principal_point: camera.principal_point,
            image_size: (camera.width, camera.height),
            bbox_diag_px: self.bbox_diag,
            image_diag_px: camera.image_diagonal(),
        })
    }

    /// Short content hash identifying the scene across runs.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scene serializes");
        sha256_hex(&bytes)[..16].to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveResultJson {
    pub pose: PoseJson,
    pub focal_px: f64,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub inlier_mask: Vec<bool>,
    pub per_iteration_cost: Vec<f64>,
}

impl From<&SolveResult> for SolveResultJson {
    fn from(r: &SolveResult) -> Self {
        Self {
            pose: PoseJson::from_pose(&r.pose),
            focal_px: r.focal_px,
            initial_cost: r.initial_cost,
            final_cost: r.final_cost,
            iterations: r.iterations,
            converged: r.converged,
            inlier_mask: r.inlier_mask.clone(),
            per_iteration_cost: r.per_iteration_cost.clone(),
        }
    }
}

/// Output of `solve` for one scene. Exactly one of `result` and `failure`
/// is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionFile {
    pub scene_id: u64,
    pub f_init: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<SolveResultJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(CliError::io(path))?;
    serde_json::from_slice(&bytes).map_err(|source| CliError::Format {
        path: path.to_path_buf(),
        source,
    })
}

/// Pretty JSON with a trailing newline.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("value serializes");
    bytes.push(b'\n');
    bytes
}

/// Two-column `threshold,fraction` table.
pub fn curve_csv(errors: &[f64], thresholds: &[f64]) -> Result<Vec<u8>> {
    let curve = accuracy_curve(errors, thresholds)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["threshold", "fraction"]).map_err(csv_err)?;
    for (t, f) in curve {
        w.write_record([t.to_string(), f.to_string()])
            .map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| CliError::Experiment(e.to_string()))
}

pub(crate) fn csv_err(e: csv::Error) -> CliError {
    CliError::Experiment(format!("csv: {e}"))
}
