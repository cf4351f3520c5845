use serde::{Deserialize, Serialize};

use super::TrajectoryStep;
use crate::dynamics::apply_deformation;
use crate::scene::linalg::{dot3, mat3_tvec, Vec3};
use crate::scene::HybridScene;
use crate::{Real, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollisionParams {
    /// Ego box half extents along the camera axes (right, down, forward).
    pub half_extents: [f64; 3],
    /// Falloff of the soft cost with distance to the box.
    pub sigma: f64,
    /// Gaussians less opaque than this are ignored.
    pub opacity_threshold: f64,
    /// Gaussians at or below this height percentile are treated as ground.
    pub ground_percentile: f64,
    /// World up direction used for the height filter.
    pub up: [f64; 3],
}

impl Default for CollisionParams {
    fn default() -> Self {
        CollisionParams {
            half_extents: [0.5, 0.5, 1.0],
            sigma: 0.5,
            opacity_threshold: 0.1,
            ground_percentile: 0.15,
            up: [0.0, -1.0, 0.0],
        }
    }
}

/// Occupied points per step: `(position, opacity)` after both filters.
fn occupancy<T: Real>(scene: &HybridScene<T>, steps: &[TrajectoryStep<T>], params: &CollisionParams) -> Result<Vec<Vec<(Vec3<f64>, f64)>>> {
    let all = scene.static_gaussians.iter().chain(&scene.dynamic_gaussians);
    let mut heights: Vec<f64> = all.map(|g| dot3(g.position.map(|v| v.as_f64()), params.up)).collect();
    heights.sort_by(f64::total_cmp);
    let ground = if heights.is_empty() {
        f64::NEG_INFINITY
    } else {
        let rank = ((params.ground_percentile * heights.len() as f64).floor() as usize).min(heights.len() - 1);
        if params.ground_percentile <= 0.0 { f64::NEG_INFINITY } else { heights[rank] }
    };
    let keep = |p: Vec3<f64>, a: f64| a >= params.opacity_threshold && dot3(p, params.up) > ground;
    let statics: Vec<(Vec3<f64>, f64)> = scene
        .static_gaussians
        .iter()
        .map(|g| (g.position.map(|v| v.as_f64()), g.opacity().as_f64()))
        .filter(|&(p, a)| keep(p, a))
        .collect();
    steps
        .iter()
        .map(|s| {
            let mut pts = statics.clone();
            if let (Some(field), false) = (&scene.deformation, scene.dynamic_gaussians.is_empty()) {
                for g in apply_deformation(&scene.dynamic_gaussians, field, s.t)? {
                    let p = g.position.map(|v| v.as_f64());
                    let a = g.opacity().as_f64();
                    if keep(p, a) {
                        pts.push((p, a));
                    }
                }
            }
            Ok(pts)
        })
        .collect()
}

/// Distance from `p` (world) to the ego box of a camera with rotation `r`
/// centered at `c`. Zero inside.
fn box_distance(p: Vec3<f64>, c: Vec3<f64>, r: &[[f64; 3]; 3], half: &[f64; 3]) -> f64 {
    let d = [p[0] - c[0], p[1] - c[1], p[2] - c[2]];
    let local = [dot3(r[0], d), dot3(r[1], d), dot3(r[2], d)];
    let mut s = 0.0;
    for k in 0..3 {
        let e = (local[k].abs() - half[k]).max(0.0);
        s += e * e;
    }
    s.sqrt()
}

fn step_cost(points: &[(Vec3<f64>, f64)], center: Vec3<f64>, rot: &[[f64; 3]; 3], params: &CollisionParams) -> f64 {
    let inv = 1.0 / (params.sigma * params.sigma);
    points
        .iter()
        .map(|&(p, a)| {
            let d = box_distance(p, center, rot, &params.half_extents);
            a * (-0.5 * d * d * inv).exp()
        })
        .sum()
}

fn rotation_f64<T: Real>(s: &TrajectoryStep<T>) -> [[f64; 3]; 3] {
    s.pose.rotation.map(|row| row.map(|v| v.as_f64()))
}

/// `Σ αᵢ exp(−½ dᵢ² / σ²)` per step over the filtered Gaussians, where `dᵢ`
/// is the distance from the Gaussian center to the ego box at that step.
pub fn collision_cost<T: Real>(scene: &HybridScene<T>, steps: &[TrajectoryStep<T>], params: &CollisionParams) -> Result<Vec<f64>> {
    let occ = occupancy(scene, steps, params)?;
    Ok(steps
        .iter()
        .zip(&occ)
        .map(|(s, pts)| step_cost(pts, s.pose.center().map(|v| v.as_f64()), &rotation_f64(s), params))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanParams {
    pub collision: CollisionParams,
    /// Maximum number of trial moves.
    pub step_budget: usize,
    /// First lateral step length (meters).
    pub initial_step: f64,
    /// The step is halved after a sweep without improvement, until below this.
    pub min_step: f64,
    /// Allowed maximum norm of the second difference of camera centers.
    pub smoothness_bound: f64,
}

impl Default for PlanParams {
    fn default() -> Self {
        PlanParams {
            collision: CollisionParams::default(),
            step_budget: 2000,
            initial_step: 0.5,
            min_step: 0.01,
            smoothness_bound: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult<T> {
    pub trajectory: Vec<TrajectoryStep<T>>,
    /// Per-step lateral offsets applied (meters, along camera right).
    pub offsets: Vec<f64>,
    pub initial_costs: Vec<f64>,
    pub final_costs: Vec<f64>,
    /// Total cost after each accepted move, starting with the initial total.
    pub accepted_totals: Vec<f64>,
}

/// Largest norm of `c[k-1] − 2c[k] + c[k+1]`.
pub fn second_difference_max(centers: &[Vec3<f64>]) -> f64 {
    centers
        .windows(3)
        .map(|w| {
            let d: [f64; 3] = std::array::from_fn(|k| w[0][k] - 2.0 * w[1][k] + w[2][k]);
            dot3(d, d).sqrt()
        })
        .fold(0.0, f64::max)
}

/// Rounding slack when comparing second differences against the bound.
const SMOOTH_TOL: f64 = 1e-9;

/// Derivative-free coordinate descent on per-step lateral offsets plus
/// whole-trajectory shifts. A move is kept only if it lowers the total cost
/// and keeps the second difference within the bound (or no worse than the
/// input when the input already exceeds it).
pub fn optimize_trajectory<T: Real>(scene: &HybridScene<T>, steps: &[TrajectoryStep<T>], params: &PlanParams) -> Result<PlanResult<T>> {
    let occ = occupancy(scene, steps, &params.collision)?;
    let n = steps.len();
    let base: Vec<Vec3<f64>> = steps.iter().map(|s| s.pose.center().map(|v| v.as_f64())).collect();
    let rots: Vec<[[f64; 3]; 3]> = steps.iter().map(rotation_f64).collect();
    let right: Vec<Vec3<f64>> = rots.iter().map(|r| mat3_tvec(r, [1.0, 0.0, 0.0])).collect();
    let centers = |off: &[f64]| -> Vec<Vec3<f64>> { (0..n).map(|k| std::array::from_fn(|a| base[k][a] + off[k] * right[k][a])).collect() };
    let costs = |off: &[f64]| -> Vec<f64> {
        let c = centers(off);
        (0..n).map(|k| step_cost(&occ[k], c[k], &rots[k], &params.collision)).collect()
    };
    let limit = params.smoothness_bound.max(second_difference_max(&base)) + SMOOTH_TOL;

    let mut off = vec![0.0; n];
    let initial_costs = costs(&off);
    let mut cur = initial_costs.clone();
    let mut total: f64 = cur.iter().sum();
    let mut accepted_totals = vec![total];
    let mut step = params.initial_step;
    let mut budget = params.step_budget;

    'outer: while step >= params.min_step && total > 0.0 {
        let mut improved = false;
        // Moves: every single step, then the whole trajectory.
        for k in 0..=n {
            for sign in [1.0, -1.0] {
                if budget == 0 {
                    break 'outer;
                }
                budget -= 1;
                let mut trial = off.clone();
                if k < n {
                    trial[k] += sign * step;
                } else {
                    trial.iter_mut().for_each(|o| *o += sign * step);
                }
                if second_difference_max(&centers(&trial)) > limit {
                    continue;
                }
                let c = costs(&trial);
                let t: f64 = c.iter().sum();
                if t < total {
                    off = trial;
                    cur = c;
                    total = t;
                    accepted_totals.push(t);
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }

    let trajectory = steps
        .iter()
        .zip(&off)
        .zip(&right)
        .map(|((s, &o), r)| TrajectoryStep {
            pose: s.pose.translated(r.map(|v| T::lit(v * o))),
            t: s.t,
        })
        .collect();
    Ok(PlanResult {
        trajectory,
        offsets: off,
        initial_costs,
        final_costs: cur,
        accepted_totals,
    })
}
