//! Joint refinement of pose and focal length by damped Gauss-Newton.
//!
//! The parameter vector per object is a right-multiplied rotation increment
//! and a translation; a single `ln f` coordinate is shared by all objects.
//! Squared loss runs plain Levenberg-Marquardt. Cauchy loss runs the same
//! loop on IRLS-weighted normal equations and only accepts steps that lower
//! the true robust cost. With several objects the normal equations are
//! block-diagonal apart from the focal row, which is eliminated with a Schur
//! complement.

use alloc::vec::Vec;

use nalgebra::{Cholesky, Matrix6, Vector6};
use num_traits::Float;

use crate::correspondence::{CorrespondenceSet, MIN_CORRESPONDENCES};
use crate::error::{Error, Result};
use crate::geometry::{linearize, project, PinholeCamera, RigidPose, Vec2, Vec3};
use crate::loss::{loss_value_and_weight, LossKind};

/// Consecutive rejected steps tolerated before giving up.
pub const MAX_CONSECUTIVE_REJECTIONS: usize = 20;

const MIN_DAMPING: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SolverOptions {
    pub loss: LossKind,
    pub max_iterations: usize,
    pub cost_rel_tol: f64,
    pub step_tol: f64,
    pub initial_damping: f64,
    pub damping_up: f64,
    pub damping_down: f64,
    pub refine_focal: bool,
    /// `[f_min, f_max]` in pixels.
    pub focal_bounds: (f64, f64),
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            loss: LossKind::Squared,
            max_iterations: 100,
            cost_rel_tol: 1e-10,
            step_tol: 1e-12,
            initial_damping: 1e-3,
            damping_up: 10.0,
            damping_down: 0.1,
            refine_focal: true,
            focal_bounds: (50.0, 50_000.0),
        }
    }
}

impl SolverOptions {
    pub fn with_loss(mut self, loss: LossKind) -> Self {
        self.loss = loss;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !(positive(self.cost_rel_tol) && positive(self.step_tol)) {
            return Err(Error::InvalidOptions("tolerances must be positive"));
        }
        if !positive(self.initial_damping) {
            return Err(Error::InvalidOptions("initial damping must be positive"));
        }
        if !(self.damping_up > 1.0 && self.damping_down > 0.0 && self.damping_down < 1.0) {
            return Err(Error::InvalidOptions(
                "damping factors must satisfy up > 1 > down > 0",
            ));
        }
        let (lo, hi) = self.focal_bounds;
        if !(positive(lo) && positive(hi) && lo < hi) {
            return Err(Error::InvalidOptions(
                "focal bounds must satisfy 0 < f_min < f_max",
            ));
        }
        Ok(())
    }

    fn check_focal(&self, focal: f64) -> Result<()> {
        let (lo, hi) = self.focal_bounds;
        if focal >= lo && focal <= hi {
            Ok(())
        } else {
            Err(Error::InvalidOptions("focal length outside focal_bounds"))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub pose: RigidPose,
    pub focal_px: f64,
    pub final_cost: f64,
    pub initial_cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub inlier_mask: Vec<bool>,
    /// Cost at the start and after every accepted step.
    pub per_iteration_cost: Vec<f64>,
}

/// Outcome of a shared-focal refinement over several objects.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiObjectResult {
    /// Per-object pose with that object's own cost before and after.
    pub objects: Vec<SolveResult>,
    pub focal_px: f64,
    /// Mean of the per-object costs, before and after every accepted step.
    pub per_iteration_cost: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Residuals `project(X_i) - x_i` and the mean loss over all correspondences.
pub fn residuals_and_cost(
    corrs: &CorrespondenceSet,
    pose: &RigidPose,
    focal: f64,
    camera: &PinholeCamera,
    loss: LossKind,
) -> Result<(Vec<Vec2>, f64)> {
    let cam = camera.with_focal(focal);
    let mut residuals = Vec::with_capacity(corrs.len());
    let mut total = 0.0;
    for c in corrs {
        let r = project(&c.point3, pose, &cam)? - c.point2;
        total += c.weight * loss.value(r.norm());
        residuals.push(r);
    }
    let cost = if corrs.is_empty() {
        0.0
    } else {
        total / corrs.len() as f64
    };
    Ok((residuals, cost))
}

/// Refines pose and, when `opts.refine_focal` is set, focal length.
pub fn refine(
    corrs: &CorrespondenceSet,
    init: &RigidPose,
    init_focal: f64,
    camera_geom: &PinholeCamera,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    opts.validate()?;
    opts.check_focal(init_focal)?;
    corrs.require(MIN_CORRESPONDENCES)?;
    let mut problem = Problem::new(
        alloc::vec![ObjectState { corrs, pose: *init }],
        init_focal,
        camera_geom,
        opts,
    );
    let run = problem.run()?;
    let pose = problem.objects[0].pose;
    Ok(SolveResult {
        pose,
        focal_px: problem.focal(),
        final_cost: run.final_cost,
        initial_cost: run.initial_cost,
        iterations: run.iterations,
        converged: run.converged,
        inlier_mask: alloc::vec![true; corrs.len()],
        per_iteration_cost: run.trace,
    })
}

/// Jointly refines rotation, translation and focal length (7 parameters).
pub fn refine_joint(
    corrs: &CorrespondenceSet,
    init: &RigidPose,
    init_focal: f64,
    camera_geom: &PinholeCamera,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    let opts = SolverOptions {
        refine_focal: true,
        ..*opts
    };
    refine(corrs, init, init_focal, camera_geom, &opts)
}

/// Refines rotation and translation at a fixed focal length (6 parameters).
pub fn refine_pose_fixed_focal(
    corrs: &CorrespondenceSet,
    init: &RigidPose,
    fixed_focal: f64,
    camera_geom: &PinholeCamera,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    let opts = SolverOptions {
        refine_focal: false,
        ..*opts
    };
    refine(corrs, init, fixed_focal, camera_geom, &opts)
}

/// Refines `1 + 6N` parameters: one shared focal length and a pose per object.
/// The objective is the mean of the per-object costs.
pub fn refine_multi_object(
    objects: &[(CorrespondenceSet, RigidPose)],
    init_focal: f64,
    camera_geom: &PinholeCamera,
    opts: &SolverOptions,
) -> Result<MultiObjectResult> {
    let opts = &SolverOptions {
        refine_focal: true,
        ..*opts
    };
    opts.validate()?;
    opts.check_focal(init_focal)?;
    if objects.is_empty() {
        return Err(Error::EmptyInput);
    }
    let total: usize = objects.iter().map(|(c, _)| c.len()).sum();
    let needed = MIN_CORRESPONDENCES + 3 * (objects.len() - 1);
    if total < needed {
        return Err(Error::NotEnoughCorrespondences { needed, got: total });
    }
    for (c, _) in objects {
        // each pose alone has six unknowns
        c.require(3)?;
    }
    let initial_costs = objects
        .iter()
        .map(|(c, p)| residuals_and_cost(c, p, init_focal, camera_geom, opts.loss).map(|r| r.1))
        .collect::<Result<Vec<_>>>()?;

    let mut problem = Problem::new(
        objects
            .iter()
            .map(|(corrs, pose)| ObjectState { corrs, pose: *pose })
            .collect(),
        init_focal,
        camera_geom,
        opts,
    );
    let run = problem.run()?;
    let focal = problem.focal();
    let mut results = Vec::with_capacity(objects.len());
    for (state, initial_cost) in problem.objects.iter().zip(initial_costs) {
        let (_, final_cost) =
            residuals_and_cost(state.corrs, &state.pose, focal, camera_geom, opts.loss)?;
        results.push(SolveResult {
            pose: state.pose,
            focal_px: focal,
            final_cost,
            initial_cost,
            iterations: run.iterations,
            converged: run.converged,
            inlier_mask: alloc::vec![true; state.corrs.len()],
            per_iteration_cost: run.trace.clone(),
        });
    }
    Ok(MultiObjectResult {
        objects: results,
        focal_px: focal,
        per_iteration_cost: run.trace,
        iterations: run.iterations,
        converged: run.converged,
    })
}

struct ObjectState<'a> {
    corrs: &'a CorrespondenceSet,
    pose: RigidPose,
}

/// Normal equations of one object.
#[derive(Clone, Copy)]
struct BlockSystem {
    h_pp: Matrix6<f64>,
    h_pf: Vector6<f64>,
    g_p: Vector6<f64>,
}

struct System {
    blocks: Vec<BlockSystem>,
    h_ff: f64,
    g_f: f64,
}

struct RunSummary {
    initial_cost: f64,
    final_cost: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

struct Problem<'a> {
    objects: Vec<ObjectState<'a>>,
    log_focal: f64,
    /// The caller's focal length, returned untouched when it is not refined.
    fixed_focal: Option<f64>,
    pp: Vec2,
    opts: SolverOptions,
}

impl<'a> Problem<'a> {
    fn new(
        objects: Vec<ObjectState<'a>>,
        focal: f64,
        camera: &PinholeCamera,
        opts: &SolverOptions,
    ) -> Self {
        Self {
            objects,
            log_focal: Float::ln(focal),
            fixed_focal: (!opts.refine_focal).then_some(focal),
            pp: camera.principal_point,
            opts: *opts,
        }
    }

    fn focal(&self) -> f64 {
        self.fixed_focal
            .unwrap_or_else(|| Float::exp(self.log_focal))
    }

    fn object_scale(&self, corrs: &CorrespondenceSet) -> f64 {
        1.0 / (self.objects.len() as f64 * corrs.len() as f64)
    }

    fn cost_at(&self, poses: &[RigidPose], log_focal: f64) -> Result<f64> {
        let focal = self.fixed_focal.unwrap_or_else(|| Float::exp(log_focal));
        let mut total = 0.0;
        for (obj, pose) in self.objects.iter().zip(poses) {
            let scale = self.object_scale(obj.corrs);
            let mut sum = 0.0;
            for c in obj.corrs {
                let p_cam = pose.rotation.matrix() * c.point3 + pose.translation;
                let uv = crate::geometry::project_camera_point(&p_cam, focal, &self.pp)?;
                sum += c.weight * self.opts.loss.value((uv - c.point2).norm());
            }
            total += scale * sum;
        }
        Ok(total)
    }

    fn assemble(&self) -> Result<System> {
        let focal = self.focal();
        let mut blocks = Vec::with_capacity(self.objects.len());
        let mut h_ff = 0.0;
        let mut g_f = 0.0;
        for obj in &self.objects {
            let scale = self.object_scale(obj.corrs);
            let mut b = BlockSystem {
                h_pp: Matrix6::zeros(),
                h_pf: Vector6::zeros(),
                g_p: Vector6::zeros(),
            };
            for c in obj.corrs {
                let lin = linearize(&c.point3, &obj.pose, focal, &self.pp)?;
                let r = lin.projection - c.point2;
                let (_, irls) = loss_value_and_weight(self.opts.loss, r.norm());
                let w = scale * c.weight * irls;
                let jt = lin.pose.transpose();
                b.h_pp.syger(w, &jt.column(0), &jt.column(0), 1.0);
                b.h_pp.syger(w, &jt.column(1), &jt.column(1), 1.0);
                b.g_p += jt * r * w;
                if self.opts.refine_focal {
                    b.h_pf += jt * lin.log_focal * w;
                    h_ff += w * lin.log_focal.norm_squared();
                    g_f += w * lin.log_focal.dot(&r);
                }
            }
            b.h_pp.fill_upper_triangle_with_lower_triangle();
            blocks.push(b);
        }
        Ok(System { blocks, h_ff, g_f })
    }

    /// Damped step for every object plus the focal increment.
    fn solve(&self, sys: &System, lambda: f64) -> Option<(Vec<Vector6<f64>>, f64)> {
        let mut factors = Vec::with_capacity(sys.blocks.len());
        for b in &sys.blocks {
            let mut a = b.h_pp;
            let floor = 1e-12 * a.diagonal().max().max(f64::MIN_POSITIVE);
            for i in 0..6 {
                a[(i, i)] += lambda * a[(i, i)].max(floor);
            }
            factors.push(Cholesky::new(a)?);
        }

        let mut delta_f = 0.0;
        if self.opts.refine_focal {
            let floor = 1e-12 * sys.h_ff.max(f64::MIN_POSITIVE);
            let mut s = sys.h_ff + lambda * sys.h_ff.max(floor);
            let mut rhs = -sys.g_f;
            for (b, chol) in sys.blocks.iter().zip(&factors) {
                let a_inv_hpf = chol.solve(&b.h_pf);
                s -= b.h_pf.dot(&a_inv_hpf);
                rhs += a_inv_hpf.dot(&b.g_p);
            }
            if !(s > 0.0) {
                return None;
            }
            delta_f = rhs / s;
        }
        let steps = sys
            .blocks
            .iter()
            .zip(&factors)
            .map(|(b, chol)| -chol.solve(&(b.g_p + b.h_pf * delta_f)))
            .collect::<Vec<_>>();
        if !steps.iter().all(|s| s.iter().all(|v| v.is_finite())) || !delta_f.is_finite() {
            return None;
        }
        Some((steps, delta_f))
    }

    fn param_norm(&self) -> f64 {
        let sq: f64 = self
            .objects
            .iter()
            .map(|o| o.pose.rotation.log().norm_squared() + o.pose.translation.norm_squared())
            .sum();
        Float::sqrt(sq + self.log_focal * self.log_focal)
    }

    fn run(&mut self) -> Result<RunSummary> {
        let poses: Vec<RigidPose> = self.objects.iter().map(|o| o.pose).collect();
        let initial_cost = self.cost_at(&poses, self.log_focal)?;
        let (log_lo, log_hi) = (
            Float::ln(self.opts.focal_bounds.0),
            Float::ln(self.opts.focal_bounds.1),
        );
        let mut cost = initial_cost;
        let mut trace = alloc::vec![cost];
        let mut lambda = self.opts.initial_damping;
        let mut rejections = 0usize;
        let mut iterations = 0usize;
        let mut converged = cost == 0.0;
        let mut system = None;

        while !converged && iterations < self.opts.max_iterations {
            iterations += 1;
            if system.is_none() {
                system = Some(self.assemble()?);
            }
            let sys = system.as_ref().expect("assembled above");
            let grad_sq: f64 =
                sys.blocks.iter().map(|b| b.g_p.norm_squared()).sum::<f64>() + sys.g_f * sys.g_f;
            if grad_sq == 0.0 {
                converged = true;
                break;
            }

            let Some((steps, delta_f)) = self.solve(sys, lambda) else {
                lambda *= self.opts.damping_up;
                rejections += 1;
                if rejections >= MAX_CONSECUTIVE_REJECTIONS {
                    return Err(Error::Diverged { rejections });
                }
                continue;
            };

            let step_norm = Float::sqrt(
                steps.iter().map(|s| s.norm_squared()).sum::<f64>() + delta_f * delta_f,
            );
            if step_norm <= self.opts.step_tol * (self.param_norm() + self.opts.step_tol) {
                converged = true;
                break;
            }

            let trial: Vec<RigidPose> = self
                .objects
                .iter()
                .zip(&steps)
                .map(|(o, s)| {
                    let w = Vec3::new(s[0], s[1], s[2]);
                    let t = Vec3::new(s[3], s[4], s[5]);
                    RigidPose::new(o.pose.rotation.retract(&w), o.pose.translation + t)
                })
                .collect();
            let trial_log_f = (self.log_focal + delta_f).clamp(log_lo, log_hi);

            match self.cost_at(&trial, trial_log_f) {
                Ok(new_cost) if new_cost.is_finite() && new_cost < cost => {
                    let rel = (cost - new_cost) / cost;
                    for (o, p) in self.objects.iter_mut().zip(trial) {
                        o.pose = p;
                    }
                    self.log_focal = trial_log_f;
                    cost = new_cost;
                    trace.push(cost);
                    lambda = (lambda * self.opts.damping_down).max(MIN_DAMPING);
                    rejections = 0;
                    system = None;
                    if rel < self.opts.cost_rel_tol || cost == 0.0 {
                        converged = true;
                    }
                }
                // cheirality violations and cost increases both shrink the step
                _ => {
                    lambda *= self.opts.damping_up;
                    rejections += 1;
                    if rejections >= MAX_CONSECUTIVE_REJECTIONS {
                        return Err(Error::Diverged { rejections });
                    }
                }
            }
        }

        for o in &mut self.objects {
            o.pose.rotation = o.pose.rotation.renormalized();
        }
        Ok(RunSummary {
            initial_cost,
            final_cost: cost,
            iterations,
            converged,
            trace,
        })
    }
}

/// Stacked `2N x 7` (or `2N x 6`) Jacobian of all correspondences, the same
/// rows the refiner accumulates into its normal equations.
pub fn stacked_jacobian(
    corrs: &CorrespondenceSet,
    pose: &RigidPose,
    camera: &PinholeCamera,
    refine_focal: bool,
) -> Result<nalgebra::DMatrix<f64>> {
    let cols = if refine_focal { 7 } else { 6 };
    let mut j = nalgebra::DMatrix::zeros(2 * corrs.len(), cols);
    for (i, c) in corrs.iter().enumerate() {
        let lin = linearize(&c.point3, pose, camera.focal_px, &camera.principal_point)?;
        j.view_mut((2 * i, 0), (2, 6)).copy_from(&lin.pose);
        if refine_focal {
            j.view_mut((2 * i, 6), (2, 1)).copy_from(&lin.log_focal);
        }
    }
    Ok(j)
}
