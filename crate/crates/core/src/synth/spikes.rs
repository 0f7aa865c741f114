//! Inhomogeneous Poisson spike generation with cosine direction tuning.

use rand::Rng;

use super::{ReachTrajectory, TuningModel};
use crate::event::SpikeTrain;
use crate::seeds;

/// Absolute refractory period enforced on every channel.
const REFRACTORY_US: u64 = 1000;

/// Draws spike trains whose instantaneous rate follows
/// `max(0, baseline + depth * speed * cos(theta_v - theta_pref))`,
/// realized by per-sample Bernoulli thinning at the trajectory rate.
///
/// Each channel uses its own RNG stream derived from `(seed, channel)`, so
/// channels can be generated in any order with identical results.
pub fn gen_spikes(traj: &ReachTrajectory, tuning: &TuningModel, seed: u64) -> SpikeTrain {
    let n_channels = tuning.n_channels();
    let ts_us = traj.sample_period_us;
    let ts_s = ts_us as f64 * 1e-6;

    let mut all_times: Vec<Vec<u64>> = Vec::with_capacity(n_channels as usize);
    for (ch, tune) in tuning.channels.iter().enumerate() {
        let mut rng = seeds::rng(seed, ch as u64);
        let mut times = Vec::new();
        let mut last_spike: Option<u64> = None;
        for (i, v) in traj.velocities.iter().enumerate() {
            let speed = (v[0] * v[0] + v[1] * v[1]).sqrt();
            let theta_v = if speed > 0.0 { v[1].atan2(v[0]) } else { 0.0 };
            let rate = (tune.baseline_hz
                + tune.modulation_depth * speed * (theta_v - tune.preferred_direction).cos())
            .max(0.0);
            let p = (rate * ts_s).min(1.0);
            if rng.gen_range(0.0..1.0) < p {
                let jitter: u64 = rng.gen_range(0..ts_us);
                let t = i as u64 * ts_us + jitter;
                if last_spike.is_none_or(|lp| t >= lp + REFRACTORY_US) {
                    times.push(t);
                    last_spike = Some(t);
                }
            }
        }
        all_times.push(times);
    }

    SpikeTrain::new(n_channels, traj.duration_us(), all_times)
        .expect("generated spike times are strictly increasing")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_reaches, ChannelTuning};

    fn constant_velocity_traj(v: [f64; 2], n_samples: usize) -> ReachTrajectory {
        let ts_us = 4000u64;
        let ts_s = ts_us as f64 * 1e-6;
        let positions = (0..n_samples)
            .map(|i| [v[0] * ts_s * i as f64, v[1] * ts_s * i as f64])
            .collect::<Vec<_>>();
        let mut velocities = vec![v; n_samples];
        *velocities.last_mut().unwrap() = [0.0, 0.0];
        ReachTrajectory {
            sample_period_us: ts_us,
            positions,
            velocities,
            target_positions: vec![[0.0, 0.0]; n_samples],
            reach_boundaries: vec![0],
        }
    }

    fn flat_tuning(n: u16, baseline: f64, depth: f64, pref: f64) -> TuningModel {
        TuningModel {
            channels: (0..n)
                .map(|_| ChannelTuning {
                    preferred_direction: pref,
                    baseline_hz: baseline,
                    modulation_depth: depth,
                })
                .collect(),
        }
    }

    #[test]
    fn baseline_rate_matches_poisson_statistics() {
        // zero velocity, baseline 10 Hz, 100 s: expect 1000 +- 4*sqrt(1000)
        let traj = constant_velocity_traj([0.0, 0.0], 25_000);
        let tuning = flat_tuning(1, 10.0, 5.0, 0.0);
        let spikes = gen_spikes(&traj, &tuning, 42);
        let count = spikes.channel(0).len() as f64;
        let sigma = 1000.0f64.sqrt();
        assert!(
            (count - 1000.0).abs() <= 4.0 * sigma,
            "count {count} outside 1000 +- {}",
            4.0 * sigma
        );
    }

    #[test]
    fn silent_tuning_yields_no_spikes() {
        let traj = gen_reaches(2, 4000, 2.0, 1);
        let tuning = flat_tuning(4, 0.0, 0.0, 0.0);
        let spikes = gen_spikes(&traj, &tuning, 42);
        assert_eq!(spikes.total_spikes(), 0);
    }

    #[test]
    fn preferred_direction_fires_more() {
        // fixed speed along +x for 100 s; preferred channel vs anti-preferred
        let traj = constant_velocity_traj([1.0, 0.0], 25_000);
        let preferred = flat_tuning(1, 10.0, 8.0, 0.0);
        let anti = flat_tuning(1, 10.0, 8.0, std::f64::consts::PI);
        let n_pref = gen_spikes(&traj, &preferred, 7).channel(0).len();
        let n_anti = gen_spikes(&traj, &anti, 7).channel(0).len();
        // rates 18 Hz vs 2 Hz over 100 s; overlap probability is negligible
        assert!(
            n_pref > n_anti,
            "preferred {n_pref} should exceed anti-preferred {n_anti}"
        );
    }

    #[test]
    fn refractory_period_is_respected() {
        // rate high enough to hit the refractory limit
        let traj = constant_velocity_traj([0.0, 0.0], 5_000);
        let tuning = flat_tuning(3, 240.0, 0.0, 0.0);
        let spikes = gen_spikes(&traj, &tuning, 3);
        for ch in 0..3 {
            for w in spikes.channel(ch).windows(2) {
                assert!(w[1] - w[0] >= REFRACTORY_US);
            }
        }
    }

    #[test]
    fn same_seed_identical_trains() {
        let traj = gen_reaches(3, 4000, 2.0, 2);
        let tuning = TuningModel::random(8, (5.0, 15.0), (2.0, 6.0), 10);
        let a = gen_spikes(&traj, &tuning, 5);
        let b = gen_spikes(&traj, &tuning, 5);
        assert_eq!(a, b);
    }
}
