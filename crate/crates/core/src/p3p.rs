//! Closed-form pose from three points (Grunert's quartic).
//!
//! With depths `s_i` along unit rays, `u = s2/s1` and `v = s3/s1`, the
//! law of cosines for the three point pairs eliminates to a quartic in `v`.
//! Each real root with positive depths gives one candidate pose.

use alloc::vec::Vec;

use nalgebra::Matrix4;
use num_traits::Float;

use crate::epnp::rigid_alignment;
use crate::geometry::{RigidPose, Vec3};

type Poly = [f64; 5];

fn mul(a: &[f64], b: &[f64]) -> Poly {
    let mut out = [0.0; 5];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn eval(p: &Poly, x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn derivative_at(p: &Poly, x: f64) -> f64 {
    (1..5).rev().fold(0.0, |acc, k| acc * x + k as f64 * p[k])
}

/// Real roots of a polynomial of degree at most four (low order first).
fn real_roots(p: &Poly) -> Vec<f64> {
    let lead = p[4];
    let scale = p.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if !(scale > 0.0) || !scale.is_finite() || lead.abs() < 1e-14 * scale {
        return Vec::new();
    }
    let companion = Matrix4::new(
        0.0,
        0.0,
        0.0,
        -p[0] / lead,
        1.0,
        0.0,
        0.0,
        -p[1] / lead,
        0.0,
        1.0,
        0.0,
        -p[2] / lead,
        0.0,
        0.0,
        1.0,
        -p[3] / lead,
    );
    let mut roots = Vec::new();
    for z in companion.complex_eigenvalues().iter() {
        if Float::abs(z.im) > 1e-6 * (1.0 + Float::abs(z.re)) {
            continue;
        }
        // a few Newton steps recover the precision lost in the eigensolver
        let mut x = z.re;
        for _ in 0..5 {
            let d = derivative_at(p, x);
            if d == 0.0 {
                break;
            }
            let step = eval(p, x) / d;
            if !step.is_finite() {
                break;
            }
            x -= step;
        }
        roots.push(x);
    }
    roots
}

/// All poses mapping `points` onto the unit `rays` (camera frame) with
/// positive depths. Up to four solutions; none for degenerate input.
pub fn solve_p3p(points: &[Vec3; 3], rays: &[Vec3; 3]) -> Vec<RigidPose> {
    let j: [Vec3; 3] = core::array::from_fn(|i| rays[i].normalize());
    let a2 = (points[1] - points[2]).norm_squared();
    let b2 = (points[0] - points[2]).norm_squared();
    let c2 = (points[0] - points[1]).norm_squared();
    let (ca, cb, cg) = (j[1].dot(&j[2]), j[0].dot(&j[2]), j[0].dot(&j[1]));
    if !(a2 > 0.0 && b2 > 0.0 && c2 > 0.0) {
        return Vec::new();
    }

    // u = n(v) / d(v), from subtracting the two equations quadratic in u
    let k = a2 - c2;
    let n = [b2 + k, -2.0 * k * cb, k - b2];
    let d = [2.0 * b2 * cg, -2.0 * b2 * ca];
    let q = [1.0, -2.0 * cb, 1.0];
    let d2 = mul(&d, &d);
    let nn = mul(&n, &n);
    let nd = mul(&n, &d);
    let qd2 = mul(&q, &d2[..3]);
    let quartic: Poly =
        core::array::from_fn(|i| b2 * (d2[i] + nn[i] - 2.0 * cg * nd[i]) - c2 * qd2[i]);

    let mut poses = Vec::new();
    for v in real_roots(&quartic) {
        let dv = d[0] + d[1] * v;
        if dv.abs() < 1e-12 * b2 {
            continue;
        }
        let u = (n[0] + n[1] * v + n[2] * v * v) / dv;
        let denom = 1.0 + v * v - 2.0 * v * cb;
        if !(u > 0.0 && v > 0.0 && denom > 0.0) {
            continue;
        }
        let s1 = Float::sqrt(b2 / denom);
        let cam = [j[0] * s1, j[1] * (u * s1), j[2] * (v * s1)];
        if let Some(pose) = rigid_alignment(points, &cam, &[1.0; 3]) {
            poses.push(pose);
        }
    }
    poses
}
