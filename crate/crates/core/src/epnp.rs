//! EPnP: closed-form pose from correspondences at a known focal length.
//!
//! Each 3D point is written as a barycentric combination of four control
//! points (three for planar sets). The camera-frame control points span the
//! null space of a `2N x 12` linear system; the combination coefficients are
//! recovered from the object-frame control point distances and polished with
//! a few Gauss-Newton steps. The pose follows from a rigid alignment of the
//! reconstructed camera-frame points with the object points.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen};
use num_traits::Float;

use crate::correspondence::{Correspondence, CorrespondenceSet, MIN_CORRESPONDENCES};
use crate::error::{Error, Result};
use crate::geometry::{project, PinholeCamera, RigidPose, Rotation, Vec3};
use crate::loss::{loss_value_and_weight, LossKind};
use crate::p3p::solve_p3p;

/// Relative singular value below which the point set counts as planar.
pub const PLANAR_RATIO: f64 = 1e-8;

const BETA_GAUSS_NEWTON_ITERS: usize = 10;

/// Sets up to this size also get closed-form three-point candidates.
pub const P3P_MAX_POINTS: usize = 5;

/// Control points and the barycentric coordinates of every 3D point.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPointBasis {
    /// Centroid first, then one point per principal axis.
    pub control_points: Vec<Vec3>,
    /// `N x control_points.len()`; rows sum to one.
    pub alphas: DMatrix<f64>,
}

impl ControlPointBasis {
    pub fn is_planar(&self) -> bool {
        self.control_points.len() == 3
    }

    /// Reconstructs point `i` from its barycentric row.
    pub fn reconstruct(&self, i: usize) -> Vec3 {
        self.control_points
            .iter()
            .enumerate()
            .fold(Vec3::zeros(), |acc, (j, c)| acc + c * self.alphas[(i, j)])
    }
}

/// Builds the control point basis from the principal axes of the 3D points.
pub fn select_control_points(corrs: &CorrespondenceSet) -> Result<ControlPointBasis> {
    corrs.require(MIN_CORRESPONDENCES)?;
    let n = corrs.len() as f64;
    let centroid = corrs.iter().fold(Vec3::zeros(), |a, c| a + c.point3) / n;
    let mut cov = Matrix3::zeros();
    for c in corrs {
        let d = c.point3 - centroid;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov / n);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let spread: [f64; 3] =
        core::array::from_fn(|k| Float::sqrt(eig.eigenvalues[order[k]].max(0.0)));
    let axes: [Vec3; 3] = core::array::from_fn(|k| eig.eigenvectors.column(order[k]).into_owned());

    let scale = 1.0 + centroid.norm();
    if spread[0] <= 1e-12 * scale {
        return Err(Error::DegenerateGeometry);
    }
    if spread[1] < PLANAR_RATIO * spread[0] {
        // collinear points do not fix the rotation about their line
        return Err(Error::DegenerateGeometry);
    }
    let n_axes = if spread[2] < PLANAR_RATIO * spread[0] {
        2
    } else {
        3
    };

    let mut control_points = Vec::with_capacity(n_axes + 1);
    control_points.push(centroid);
    for k in 0..n_axes {
        control_points.push(centroid + axes[k] * spread[k]);
    }

    let mut alphas = DMatrix::zeros(corrs.len(), n_axes + 1);
    for (i, c) in corrs.iter().enumerate() {
        let d = c.point3 - centroid;
        let mut sum = 0.0;
        for k in 0..n_axes {
            let a = axes[k].dot(&d) / spread[k];
            alphas[(i, k + 1)] = a;
            sum += a;
        }
        alphas[(i, 0)] = 1.0 - sum;
    }
    Ok(ControlPointBasis {
        control_points,
        alphas,
    })
}

/// One EPnP hypothesis, kept for diagnostics and selection.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    pose: RigidPose,
    mean_reprojection: f64,
    all_in_front: bool,
}

impl Candidate {
    /// Candidates with every point in front of the camera win; among equals
    /// the lower reprojection error does.
    fn beats(&self, other: &Option<Candidate>) -> bool {
        other.is_none_or(|o| {
            (!self.all_in_front, self.mean_reprojection) < (!o.all_in_front, o.mean_reprojection)
        })
    }
}

/// Closed-form pose at the focal length of `camera`.
pub fn solve_epnp(corrs: &CorrespondenceSet, camera: &PinholeCamera) -> Result<RigidPose> {
    if !(camera.focal_px > 0.0) {
        return Err(Error::Domain("focal length must be positive"));
    }
    let basis = select_control_points(corrs)?;
    let nc = basis.control_points.len();
    let dim = 3 * nc;

    // Normal matrix of the projection constraints in normalized image coordinates.
    let mut mtm = DMatrix::<f64>::zeros(dim, dim);
    let mut row_u = DVector::<f64>::zeros(dim);
    let mut row_v = DVector::<f64>::zeros(dim);
    let f = camera.focal_px;
    let pp = camera.principal_point;
    for (i, c) in corrs.iter().enumerate() {
        let sw = Float::sqrt(c.weight);
        let xn = (c.point2.x - pp.x) / f;
        let yn = (c.point2.y - pp.y) / f;
        for j in 0..nc {
            let a = basis.alphas[(i, j)] * sw;
            row_u[3 * j] = a;
            row_u[3 * j + 1] = 0.0;
            row_u[3 * j + 2] = -a * xn;
            row_v[3 * j] = 0.0;
            row_v[3 * j + 1] = a;
            row_v[3 * j + 2] = -a * yn;
        }
        mtm.syger(1.0, &row_u, &row_u, 1.0);
        mtm.syger(1.0, &row_v, &row_v, 1.0);
    }
    mtm.fill_upper_triangle_with_lower_triangle();

    let eig = SymmetricEigen::new(mtm);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let max_null = if nc == 4 { 4 } else { 2 };
    let null_vectors: Vec<DVector<f64>> = order[..max_null]
        .iter()
        .map(|&k| eig.eigenvectors.column(k).into_owned())
        .collect();

    let pairs: Vec<(usize, usize)> = (0..nc)
        .flat_map(|a| (a + 1..nc).map(move |b| (a, b)))
        .collect();
    let rho: Vec<f64> = pairs
        .iter()
        .map(|&(a, b)| (basis.control_points[a] - basis.control_points[b]).norm_squared())
        .collect();
    // per pair, the control point difference carried by each null vector
    let diffs: Vec<Vec<Vec3>> = pairs
        .iter()
        .map(|&(a, b)| {
            null_vectors
                .iter()
                .map(|v| block(v, a) - block(v, b))
                .collect()
        })
        .collect();

    let mut best: Option<Candidate> = None;
    for k in 1..=max_null {
        let Some(mut betas) = initial_betas(k, &diffs, &rho) else {
            continue;
        };
        refine_betas(&mut betas, &diffs, &rho);
        let Some(cand) = candidate_from_betas(&betas, &null_vectors, &basis, corrs, camera) else {
            continue;
        };
        if cand.beats(&best) {
            best = Some(cand);
        }
    }
    if corrs.len() <= P3P_MAX_POINTS {
        // With so few points the null space is too large for the linearized
        // coefficient estimates; every triple gives closed-form candidates.
        for cand in p3p_candidates(corrs, camera) {
            if cand.beats(&best) {
                best = Some(cand);
            }
        }
    }
    best.map(|c| c.pose).ok_or(Error::NoValidCandidate)
}

/// EPnP under a robust loss: each round re-solves with the loss's IRLS
/// weights at the previous pose. Points behind the camera get zero weight.
/// A round that fails keeps the previous pose.
pub fn solve_epnp_irls(
    corrs: &CorrespondenceSet,
    camera: &PinholeCamera,
    loss: LossKind,
    rounds: usize,
) -> Result<RigidPose> {
    let mut pose = solve_epnp(corrs, camera)?;
    if loss == LossKind::Squared {
        return Ok(pose);
    }
    for _ in 0..rounds {
        let items: Vec<Correspondence> = corrs
            .iter()
            .map(|c| {
                let w = project(&c.point3, &pose, camera).map_or(0.0, |uv| {
                    loss_value_and_weight(loss, (uv - c.point2).norm()).1
                });
                Correspondence::weighted(c.point3, c.point2, c.weight * w)
            })
            .collect();
        match CorrespondenceSet::new(items).and_then(|set| solve_epnp(&set, camera)) {
            Ok(p) => pose = p,
            Err(_) => break,
        }
    }
    Ok(pose)
}

fn block(v: &DVector<f64>, j: usize) -> Vec3 {
    Vec3::new(v[3 * j], v[3 * j + 1], v[3 * j + 2])
}

fn least_squares(a: DMatrix<f64>, b: DVector<f64>) -> Option<DVector<f64>> {
    a.svd(true, true).solve(&b, 1e-14).ok()
}

/// Linearized estimate of the first `k` null-space coefficients.
fn initial_betas(k: usize, diffs: &[Vec<Vec3>], rho: &[f64]) -> Option<Vec<f64>> {
    let np = rho.len();
    let b = DVector::from_column_slice(rho);
    match k {
        1 => {
            let (num, den) = diffs.iter().zip(rho).fold((0.0, 0.0), |(n, d), (dv, r)| {
                let s = dv[0].norm_squared();
                (n + r * s, d + s * s)
            });
            (den > 0.0).then(|| alloc::vec![Float::sqrt((num / den).max(0.0))])
        }
        2 => {
            let a = DMatrix::from_fn(np, 3, |p, c| {
                let d = &diffs[p];
                match c {
                    0 => d[0].norm_squared(),
                    1 => 2.0 * d[0].dot(&d[1]),
                    _ => d[1].norm_squared(),
                }
            });
            let s = least_squares(a, b)?;
            let b1 = Float::sqrt(s[0].abs());
            let b2 = Float::sqrt(s[2].abs()) * sign(s[1]);
            Some(alloc::vec![b1, b2])
        }
        3 => {
            // quadratic terms b11 b12 b13 b22 b23 b33
            let a = DMatrix::from_fn(np, 6, |p, c| {
                let d = &diffs[p];
                match c {
                    0 => d[0].norm_squared(),
                    1 => 2.0 * d[0].dot(&d[1]),
                    2 => 2.0 * d[0].dot(&d[2]),
                    3 => d[1].norm_squared(),
                    4 => 2.0 * d[1].dot(&d[2]),
                    _ => d[2].norm_squared(),
                }
            });
            let s = least_squares(a, b)?;
            let b1 = Float::sqrt(s[0].abs());
            let b2 = Float::sqrt(s[3].abs()) * sign(s[1]);
            let b3 = Float::sqrt(s[5].abs()) * sign(s[2]);
            Some(alloc::vec![b1, b2, b3])
        }
        4 => {
            // keep only the products with the first coefficient: b11 b12 b13 b14
            let a = DMatrix::from_fn(np, 4, |p, c| {
                let d = &diffs[p];
                if c == 0 {
                    d[0].norm_squared()
                } else {
                    2.0 * d[0].dot(&d[c])
                }
            });
            let s = least_squares(a, b)?;
            let b1 = Float::sqrt(s[0].abs());
            if b1 == 0.0 {
                return None;
            }
            Some(alloc::vec![b1, s[1] / b1, s[2] / b1, s[3] / b1])
        }
        _ => None,
    }
}

fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Gauss-Newton on the control point distance constraints.
fn refine_betas(betas: &mut [f64], diffs: &[Vec<Vec3>], rho: &[f64]) {
    let k = betas.len();
    let np = rho.len();
    for _ in 0..BETA_GAUSS_NEWTON_ITERS {
        let mut jac = DMatrix::zeros(np, k);
        let mut res = DVector::zeros(np);
        for p in 0..np {
            let d = &diffs[p];
            let combined = (0..k).fold(Vec3::zeros(), |acc, j| acc + d[j] * betas[j]);
            res[p] = rho[p] - combined.norm_squared();
            for j in 0..k {
                jac[(p, j)] = 2.0 * combined.dot(&d[j]);
            }
        }
        let Some(step) = least_squares(jac, res) else {
            return;
        };
        if !step.iter().all(|s| s.is_finite()) {
            return;
        }
        for j in 0..k {
            betas[j] += step[j];
        }
    }
}

fn candidate_from_betas(
    betas: &[f64],
    null_vectors: &[DVector<f64>],
    basis: &ControlPointBasis,
    corrs: &CorrespondenceSet,
    camera: &PinholeCamera,
) -> Option<Candidate> {
    let nc = basis.control_points.len();
    let ctrl_cam: Vec<Vec3> = (0..nc)
        .map(|j| {
            betas
                .iter()
                .zip(null_vectors)
                .fold(Vec3::zeros(), |acc, (b, v)| acc + block(v, j) * *b)
        })
        .collect();
    let mut cam_points: Vec<Vec3> = (0..corrs.len())
        .map(|i| {
            (0..nc).fold(Vec3::zeros(), |acc, j| {
                acc + ctrl_cam[j] * basis.alphas[(i, j)]
            })
        })
        .collect();
    let in_front = cam_points.iter().filter(|p| p.z > 0.0).count();
    if 2 * in_front < cam_points.len() {
        for p in &mut cam_points {
            *p = -*p;
        }
    }

    let obj: Vec<Vec3> = corrs.iter().map(|c| c.point3).collect();
    let weights: Vec<f64> = corrs.iter().map(|c| c.weight).collect();
    let pose = rigid_alignment(&obj, &cam_points, &weights)?;
    score(pose, corrs, camera)
}

fn p3p_candidates(corrs: &CorrespondenceSet, camera: &PinholeCamera) -> Vec<Candidate> {
    let items: Vec<_> = corrs.iter().collect();
    let pp = camera.principal_point;
    let ray = |i: usize| {
        let uv = items[i].point2;
        Vec3::new(
            (uv.x - pp.x) / camera.focal_px,
            (uv.y - pp.y) / camera.focal_px,
            1.0,
        )
    };
    let n = items.len();
    let mut out = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                let points = [items[a].point3, items[b].point3, items[c].point3];
                for pose in solve_p3p(&points, &[ray(a), ray(b), ray(c)]) {
                    out.extend(score(pose, corrs, camera));
                }
            }
        }
    }
    out
}

/// Mean reprojection error of a pose; `None` unless most points project.
fn score(pose: RigidPose, corrs: &CorrespondenceSet, camera: &PinholeCamera) -> Option<Candidate> {
    let mut valid = 0usize;
    let mut err = 0.0;
    for c in corrs {
        if let Ok(uv) = project(&c.point3, &pose, camera) {
            valid += 1;
            err += (uv - c.point2).norm();
        }
    }
    if 2 * valid <= corrs.len() || !err.is_finite() {
        return None;
    }
    Some(Candidate {
        pose,
        mean_reprojection: err / valid as f64,
        all_in_front: valid == corrs.len(),
    })
}

/// Weighted rigid alignment `dst ≈ R * src + t` without scale.
pub fn rigid_alignment(src: &[Vec3], dst: &[Vec3], weights: &[f64]) -> Option<RigidPose> {
    let wsum: f64 = weights.iter().sum();
    if !(wsum > 0.0) {
        return None;
    }
    let cs = src
        .iter()
        .zip(weights)
        .fold(Vec3::zeros(), |a, (p, w)| a + p * *w)
        / wsum;
    let cd = dst
        .iter()
        .zip(weights)
        .fold(Vec3::zeros(), |a, (p, w)| a + p * *w)
        / wsum;
    let mut h = Matrix3::zeros();
    for ((s, d), w) in src.iter().zip(dst).zip(weights) {
        h += (d - cd) * (s - cs).transpose() * *w;
    }
    let svd = h.svd(true, true);
    let u = svd.u?;
    let v_t = svd.v_t?;
    let mut fix = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        fix[(2, 2)] = -1.0;
    }
    let r = u * fix * v_t;
    if !r.iter().all(|x| x.is_finite()) {
        return None;
    }
    let rotation = Rotation::from_matrix_unchecked(r).renormalized();
    let translation = cd - &rotation * cs;
    Some(RigidPose::new(rotation, translation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correspondence::Correspondence;
    use crate::geometry::{geodesic_distance, Vec2};
    use approx::assert_relative_eq;

    fn cube() -> Vec<Vec3> {
        let mut v = Vec::new();
        for &x in &[-1.0, 1.0] {
            for &y in &[-1.0, 1.0] {
                for &z in &[-1.0, 1.0] {
                    v.push(Vec3::new(x, y, z));
                }
            }
        }
        v
    }

    fn with_dummy_2d(points: &[Vec3]) -> CorrespondenceSet {
        CorrespondenceSet::new(
            points
                .iter()
                .map(|p| Correspondence::new(*p, Vec2::zeros()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn cube_control_points_are_axis_aligned() {
        let basis = select_control_points(&with_dummy_2d(&cube())).unwrap();
        assert_eq!(basis.control_points.len(), 4);
        assert_relative_eq!(basis.control_points[0], Vec3::zeros(), epsilon = 1e-12);
        for c in &basis.control_points[1..] {
            // unit spread along one coordinate axis
            let mut mags: Vec<f64> = c.iter().map(|v| v.abs()).collect();
            mags.sort_by(f64::total_cmp);
            assert_relative_eq!(mags[2], 1.0, epsilon = 1e-9);
            assert!(mags[0] < 1e-9 && mags[1] < 1e-9);
        }
    }

    #[test]
    fn barycentric_rows_reconstruct_points() {
        let pts: Vec<Vec3> = (0..20)
            .map(|i| {
                let t = i as f64;
                Vec3::new(t.sin() * 2.0, (t * 0.7).cos(), 0.3 * t - 1.0)
            })
            .collect();
        let basis = select_control_points(&with_dummy_2d(&pts)).unwrap();
        for (i, p) in pts.iter().enumerate() {
            assert!((basis.reconstruct(i) - p).norm() < 1e-9);
            assert_relative_eq!(basis.alphas.row(i).sum(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn coplanar_points_use_three_control_points() {
        let pts: Vec<Vec3> = (0..10)
            .map(|i| {
                let t = i as f64;
                Vec3::new(t.cos() * (1.0 + t), t.sin() * 0.5, 0.0)
            })
            .collect();
        let basis = select_control_points(&with_dummy_2d(&pts)).unwrap();
        assert!(basis.is_planar());
        assert_eq!(basis.alphas.ncols(), 3);
        for (i, p) in pts.iter().enumerate() {
            assert!((basis.reconstruct(i) - p).norm() < 1e-9);
        }
    }

    #[test]
    fn coincident_points_are_degenerate() {
        let pts = alloc::vec![Vec3::new(1.0, 2.0, 3.0); 6];
        assert_eq!(
            select_control_points(&with_dummy_2d(&pts)).unwrap_err(),
            Error::DegenerateGeometry
        );
    }

    #[test]
    fn three_correspondences_are_rejected() {
        let set = with_dummy_2d(&cube()[..3]);
        let cam = PinholeCamera::new(800.0, 640, 480).unwrap();
        assert!(matches!(
            solve_epnp(&set, &cam),
            Err(Error::NotEnoughCorrespondences { needed: 4, got: 3 })
        ));
    }

    #[test]
    fn cube_pose_is_recovered_exactly() {
        let cam = PinholeCamera::new(800.0, 640, 480).unwrap();
        let gt = RigidPose::new(
            Rotation::exp(&Vec3::new(0.4, -0.3, 0.8)),
            Vec3::new(0.3, -0.2, 6.0),
        );
        let pts = cube();
        let uv: Vec<Vec2> = pts.iter().map(|p| project(p, &gt, &cam).unwrap()).collect();
        let set = CorrespondenceSet::from_pairs(&pts, &uv).unwrap();
        let pose = solve_epnp(&set, &cam).unwrap();
        assert!(geodesic_distance(&pose.rotation, &gt.rotation) < 1e-6);
        assert!((pose.translation - gt.translation).norm() < 1e-6);
    }

    #[test]
    fn alignment_recovers_rigid_motion() {
        let pts = cube();
        let gt = RigidPose::new(
            Rotation::exp(&Vec3::new(1.0, 2.0, -0.5)),
            Vec3::new(4.0, 5.0, 6.0),
        );
        let moved: Vec<Vec3> = pts
            .iter()
            .map(|p| crate::geometry::transform_point(&gt, p))
            .collect();
        let w = alloc::vec![1.0; pts.len()];
        let est = rigid_alignment(&pts, &moved, &w).unwrap();
        assert_relative_eq!(est.rotation.matrix(), gt.rotation.matrix(), epsilon = 1e-12);
        assert_relative_eq!(est.translation, gt.translation, epsilon = 1e-12);
    }
}
