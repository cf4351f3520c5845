//! Ready-made oracle scenes: a short street segment with a forward-moving
//! camera, optionally with a sphere crossing in front of it.

use crate::spec::{DynamicPrimitive, Jitter, Motion, OracleSceneSpec, Shape, StaticPrimitive, Trajectory};
use crate::trace::Albedo;

fn waves(base: [f64; 3], amplitude: f64, period: f64) -> Albedo {
    Albedo::Waves {
        base,
        amplitude: [amplitude; 3],
        period,
    }
}

/// Ground, back wall, left wall and two boxes (`y` points down, the ground
/// sits at `y = 1`). The camera starts at the origin looking along `+z` and
/// advances 0.1 m per frame.
pub fn street(width: usize, height: usize, frames: usize) -> OracleSceneSpec {
    OracleSceneSpec {
        width,
        height,
        focal: None,
        frames,
        feature_dim: crate::spec::DEFAULT_FEATURE_DIM,
        background: [0.0; 3],
        statics: vec![
            StaticPrimitive::Plane {
                center: [0.0, 1.0, 5.0],
                normal: [0.0, -1.0, 0.0],
                u_axis: [1.0, 0.0, 0.0],
                half_size: [4.0, 6.0],
                albedo: waves([0.45, 0.42, 0.40], 0.12, 2.0),
            },
            StaticPrimitive::Plane {
                center: [0.0, -1.5, 9.0],
                normal: [0.0, 0.0, -1.0],
                u_axis: [1.0, 0.0, 0.0],
                half_size: [4.5, 2.5],
                albedo: waves([0.62, 0.52, 0.36], 0.15, 1.6),
            },
            StaticPrimitive::Plane {
                center: [-3.0, -1.5, 4.0],
                normal: [1.0, 0.0, 0.0],
                u_axis: [0.0, 0.0, 1.0],
                half_size: [5.0, 2.5],
                albedo: waves([0.35, 0.48, 0.60], 0.15, 1.8),
            },
            StaticPrimitive::Box {
                center: [-1.2, 0.6, 5.0],
                half_size: [0.4, 0.4, 0.4],
                rotation: [0.0, 0.5, 0.0],
                albedo: Albedo::Solid { rgb: [0.8, 0.3, 0.25] },
            },
            StaticPrimitive::Box {
                center: [1.3, 0.45, 6.5],
                half_size: [0.6, 0.55, 0.5],
                rotation: [0.0, -0.3, 0.0],
                albedo: waves([0.3, 0.6, 0.3], 0.1, 1.2),
            },
        ],
        dynamics: vec![],
        trajectory: Trajectory::Linear {
            start: [0.0, 0.0, 0.0],
            velocity: [0.0, 0.0, 0.1],
            forward: [0.0, 0.0, 1.0],
            down: [0.0, 1.0, 0.0],
        },
        jitter: Jitter::None,
        supersample: 2,
    }
}

/// [`street`] plus a sphere of radius 0.45 rolling along `+x` at
/// `speed` m/frame, 4 m ahead of the starting camera.
pub fn moving_sphere(width: usize, height: usize, frames: usize, speed: f64) -> OracleSceneSpec {
    let mut s = street(width, height, frames);
    let travel = speed * (frames.saturating_sub(1)) as f64;
    s.dynamics.push(DynamicPrimitive {
        shape: Shape::Sphere { radius: 0.45 },
        motion: Motion::Linear {
            start: [-0.5 * travel, 0.55, 4.0],
            direction: [1.0, 0.0, 0.0],
            speed,
        },
        albedo: waves([0.9, 0.75, 0.15], 0.1, 0.8),
    });
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        street(32, 24, 4).validate().unwrap();
        moving_sphere(32, 24, 8, 0.1).validate().unwrap();
    }
}
