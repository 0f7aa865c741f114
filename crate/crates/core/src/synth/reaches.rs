//! Center-out reach generation with minimum-jerk profiles.

use rand::Rng;

use super::ReachTrajectory;
use crate::seeds;

/// Hold time at the target between reaches.
const HOLD_US: u64 = 100_000;
/// Movement time range, drawn per reach.
const MOVE_US_RANGE: (u64, u64) = (500_000, 800_000);

/// Generates `n_reaches` center-out reaches inside a square workspace of the
/// given extent (side length, centered on the origin).
///
/// Each reach moves from the current position to a uniformly drawn target on
/// a minimum-jerk profile, then holds for 100 ms. Velocity is the forward
/// difference of position.
pub fn gen_reaches(
    n_reaches: usize,
    sample_period_us: u64,
    workspace_extent: f64,
    seed: u64,
) -> ReachTrajectory {
    assert!(n_reaches >= 1, "need at least one reach");
    assert!(sample_period_us > 0);

    let mut rng = seeds::rng(seed, 0x7261_6368); // "rach"
    let half = workspace_extent / 2.0;
    let ts_s = sample_period_us as f64 * 1e-6;

    let mut positions: Vec<[f64; 2]> = Vec::new();
    let mut target_positions: Vec<[f64; 2]> = Vec::new();
    let mut reach_boundaries = Vec::with_capacity(n_reaches);

    let mut pos = [0.0f64, 0.0];
    for _ in 0..n_reaches {
        let target = if half > 0.0 {
            [rng.gen_range(-half..=half), rng.gen_range(-half..=half)]
        } else {
            [0.0, 0.0]
        };
        let move_us = rng.gen_range(MOVE_US_RANGE.0..=MOVE_US_RANGE.1);
        let move_samples = (move_us / sample_period_us).max(1) as usize;
        let hold_samples = (HOLD_US / sample_period_us) as usize;

        reach_boundaries.push(positions.len());
        for k in 0..move_samples {
            let s = k as f64 / move_samples as f64;
            let blend = min_jerk(s);
            positions.push([
                pos[0] + (target[0] - pos[0]) * blend,
                pos[1] + (target[1] - pos[1]) * blend,
            ]);
            target_positions.push(target);
        }
        for _ in 0..hold_samples {
            positions.push(target);
            target_positions.push(target);
        }
        pos = target;
    }

    let n = positions.len();
    let mut velocities = vec![[0.0f64; 2]; n];
    for i in 0..n.saturating_sub(1) {
        velocities[i] = [
            (positions[i + 1][0] - positions[i][0]) / ts_s,
            (positions[i + 1][1] - positions[i][1]) / ts_s,
        ];
    }

    let traj = ReachTrajectory {
        sample_period_us,
        positions,
        velocities,
        target_positions,
        reach_boundaries,
    };
    debug_assert!(traj.validate().is_ok());
    traj
}

/// Minimum-jerk blend: 10s^3 - 15s^4 + 6s^5 on [0, 1].
fn min_jerk(s: f64) -> f64 {
    let s3 = s * s * s;
    s3 * (10.0 - 15.0 * s + 6.0 * s * s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_reach_has_zero_velocity() {
        // zero-extent workspace: start == target for every reach
        let traj = gen_reaches(1, 4000, 0.0, 9);
        assert!(traj
            .velocities
            .iter()
            .all(|v| v[0] == 0.0 && v[1] == 0.0));
        assert!(traj.positions.iter().all(|p| *p == [0.0, 0.0]));
    }

    #[test]
    fn velocity_is_position_finite_difference() {
        let traj = gen_reaches(5, 4000, 2.0, 123);
        let ts_s = traj.sample_period_us as f64 * 1e-6;
        for i in 0..traj.n_samples() - 1 {
            for d in 0..2 {
                let step = traj.positions[i + 1][d] - traj.positions[i][d];
                let pred = traj.velocities[i][d] * ts_s;
                let scale = step.abs().max(pred.abs()).max(1e-12);
                assert!(
                    ((step - pred) / scale).abs() < 1e-9,
                    "sample {i} dim {d}: {step} vs {pred}"
                );
            }
        }
    }

    #[test]
    fn same_seed_is_bitwise_identical() {
        let a = gen_reaches(8, 4000, 2.0, 77);
        let b = gen_reaches(8, 4000, 2.0, 77);
        assert_eq!(a, b);
        let c = gen_reaches(8, 4000, 2.0, 78);
        assert_ne!(a, c);
    }

    #[test]
    fn boundaries_match_reach_count_and_targets() {
        let traj = gen_reaches(6, 4000, 2.0, 5);
        assert_eq!(traj.n_reaches(), 6);
        traj.validate().unwrap();
        // each reach ends at its target
        for r in 0..traj.n_reaches() {
            let end = if r + 1 < traj.n_reaches() {
                traj.reach_boundaries[r + 1] - 1
            } else {
                traj.n_samples() - 1
            };
            assert_eq!(traj.positions[end], traj.target_positions[end]);
        }
    }

    #[test]
    fn reach_ids_follow_boundaries() {
        let traj = gen_reaches(3, 4000, 2.0, 11);
        let ids = traj.reach_ids();
        assert_eq!(ids[0], 0);
        assert_eq!(*ids.last().unwrap(), 2);
        assert_eq!(ids[traj.reach_boundaries[1]], 1);
        assert_eq!(ids[traj.reach_boundaries[1] - 1], 0);
    }
}
