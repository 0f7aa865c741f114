//! Trajectory CSV: `t_us,x,y,vx,vy,target_x,target_y`, one sample per line.
//!
//! Reach boundaries are not stored; they are reconstructed on read by
//! detecting target-position changes, which is also how external recordings
//! are segmented into reaches.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{ReachTrajectory, SynthError};

const HEADER: &str = "t_us,x,y,vx,vy,target_x,target_y";

pub fn write_trajectory_csv(
    traj: &ReachTrajectory,
    path: impl AsRef<Path>,
) -> Result<(), SynthError> {
    let path = path.as_ref();
    let io_err = |source| SynthError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    writeln!(w, "{HEADER}").map_err(io_err)?;
    for i in 0..traj.n_samples() {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            i as u64 * traj.sample_period_us,
            traj.positions[i][0],
            traj.positions[i][1],
            traj.velocities[i][0],
            traj.velocities[i][1],
            traj.target_positions[i][0],
            traj.target_positions[i][1],
        )
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn read_trajectory_csv(path: impl AsRef<Path>) -> Result<ReachTrajectory, SynthError> {
    let path = path.as_ref();
    let p = path.display().to_string();
    let io_err = |source| SynthError::Io {
        path: p.clone(),
        source,
    };
    let bad = |line, message: String| SynthError::MalformedCsv {
        path: p.clone(),
        line,
        message,
    };

    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut positions = Vec::new();
    let mut velocities = Vec::new();
    let mut target_positions = Vec::new();
    let mut sample_period_us = 0u64;
    let mut prev_t: Option<u64> = None;

    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        let lineno = idx + 1;
        if idx == 0 {
            if line.trim() != HEADER {
                return Err(bad(lineno, format!("expected header `{HEADER}`")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(bad(lineno, format!("expected 7 fields, got {}", fields.len())));
        }
        let t: u64 = fields[0]
            .trim()
            .parse()
            .map_err(|_| bad(lineno, format!("cannot parse t_us from `{}`", fields[0])))?;
        let mut vals = [0.0f64; 6];
        for (k, v) in vals.iter_mut().enumerate() {
            *v = fields[k + 1].trim().parse().map_err(|_| {
                bad(lineno, format!("cannot parse field {} from `{}`", k + 1, fields[k + 1]))
            })?;
        }
        if let Some(pt) = prev_t {
            let step = t.checked_sub(pt).filter(|&s| s > 0).ok_or_else(|| {
                bad(lineno, format!("non-increasing t_us ({pt} then {t})"))
            })?;
            if sample_period_us == 0 {
                sample_period_us = step;
            } else if step != sample_period_us {
                return Err(bad(
                    lineno,
                    format!("irregular sample period: {step} vs {sample_period_us}"),
                ));
            }
        }
        prev_t = Some(t);
        positions.push([vals[0], vals[1]]);
        velocities.push([vals[2], vals[3]]);
        target_positions.push([vals[4], vals[5]]);
    }

    if positions.is_empty() {
        return Err(bad(1, "trajectory has no samples".into()));
    }
    if sample_period_us == 0 {
        sample_period_us = 1; // single-sample file
    }

    // segment into reaches wherever the target changes
    let mut reach_boundaries = vec![0usize];
    for i in 1..target_positions.len() {
        if target_positions[i] != target_positions[i - 1] {
            reach_boundaries.push(i);
        }
    }

    let traj = ReachTrajectory {
        sample_period_us,
        positions,
        velocities,
        target_positions,
        reach_boundaries,
    };
    traj.validate()?;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::gen_reaches;

    #[test]
    fn csv_round_trip_preserves_trajectory() {
        let traj = gen_reaches(5, 4000, 2.0, 31);
        let mut path = std::env::temp_dir();
        path.push(format!("evdec-traj-{}.csv", std::process::id()));
        write_trajectory_csv(&traj, &path).unwrap();
        let back = read_trajectory_csv(&path).unwrap();
        std::fs::remove_file(&path).ok();

        assert_eq!(back.sample_period_us, traj.sample_period_us);
        assert_eq!(back.positions, traj.positions);
        assert_eq!(back.velocities, traj.velocities);
        assert_eq!(back.reach_boundaries, traj.reach_boundaries);
    }

    #[test]
    fn malformed_line_is_reported() {
        let mut path = std::env::temp_dir();
        path.push(format!("evdec-traj-bad-{}.csv", std::process::id()));
        std::fs::write(&path, format!("{HEADER}\n0,0,0,nope,0,0,0\n")).unwrap();
        let err = read_trajectory_csv(&path).unwrap_err();
        std::fs::remove_file(&path).ok();
        assert!(matches!(err, SynthError::MalformedCsv { line: 2, .. }));
    }
}
