//! Tabular trajectory export and import.
//!
//! Layout: one metadata comment line, then a CSV table with columns
//! `n, k, count_<label>.., p_<label>..`. The derived `p` columns use the
//! shortest round-trip decimal representation, so identical runs diff as
//! identical files. The metadata line records the config digest, seed, RNG,
//! and sampler, keeping every reproducibility-relevant choice in the file
//! itself:
//!
//! ```text
//! # urnsim digest=<hex> seed=<u64> rng=chacha8 sampler=categorical-cdf map=<desc> schedule=<desc>
//! ```

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::engine::{EngineError, Snapshot, Trajectory, RNG_NAME, SAMPLER_NAME};

/// Writes a trajectory as commented CSV.
pub fn write_trajectory_csv<W: Write>(
    writer: &mut W,
    trajectory: &Trajectory,
    digest: &str,
) -> Result<(), EngineError> {
    writeln!(
        writer,
        "# urnsim digest={} seed={} rng={} sampler={} map={} schedule={}",
        digest,
        trajectory.seed,
        RNG_NAME,
        SAMPLER_NAME,
        trajectory.map_desc,
        trajectory.schedule_desc,
    )?;
    let mut csv = csv::Writer::from_writer(writer);
    let mut header = vec!["n".to_string(), "k".to_string()];
    header.extend(trajectory.labels.iter().map(|l| format!("count_{l}")));
    header.extend(trajectory.labels.iter().map(|l| format!("p_{l}")));
    csv.write_record(&header)?;
    for snap in &trajectory.snapshots {
        let mut row = vec![snap.step.to_string(), snap.total.to_string()];
        row.extend(snap.counts.iter().map(u64::to_string));
        row.extend(
            snap.counts
                .iter()
                .map(|&c| format!("{}", c as f64 / snap.total as f64)),
        );
        csv.write_record(&row)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_trajectory_file(
    path: impl AsRef<Path>,
    trajectory: &Trajectory,
    digest: &str,
) -> Result<(), EngineError> {
    let mut file = std::fs::File::create(path)?;
    write_trajectory_csv(&mut file, trajectory, digest)
}

/// Reads a trajectory back, returning it with the recorded config digest.
pub fn read_trajectory_csv<R: Read>(reader: R) -> Result<(Trajectory, String), EngineError> {
    let mut reader = BufReader::new(reader);
    let mut meta_line = String::new();
    reader.read_line(&mut meta_line)?;
    let meta = parse_metadata(meta_line.trim())?;

    let mut csv = csv::Reader::from_reader(reader);
    let headers = csv.headers()?.clone();
    let columns: Vec<&str> = headers.iter().collect();
    if columns.len() < 4 || columns[0] != "n" || columns[1] != "k" {
        return Err(EngineError::MalformedTrajectory(
            "expected columns n, k, count_*, p_*".into(),
        ));
    }
    let labels: Vec<String> = columns[2..]
        .iter()
        .take_while(|c| c.starts_with("count_"))
        .map(|c| c["count_".len()..].to_string())
        .collect();
    if labels.is_empty() || columns.len() != 2 + 2 * labels.len() {
        return Err(EngineError::MalformedTrajectory(
            "count_/p_ column mismatch".into(),
        ));
    }

    let mut snapshots = Vec::new();
    for record in csv.records() {
        let record = record?;
        let parse_u64 = |field: &str| {
            field
                .parse::<u64>()
                .map_err(|e| EngineError::MalformedTrajectory(format!("{field:?}: {e}")))
        };
        let step = parse_u64(&record[0])? as usize;
        let total = parse_u64(&record[1])?;
        let counts = (0..labels.len())
            .map(|i| parse_u64(&record[2 + i]))
            .collect::<Result<Vec<_>, _>>()?;
        if counts.iter().sum::<u64>() != total {
            return Err(EngineError::MalformedTrajectory(format!(
                "counts at step {step} sum to {} but k = {total}",
                counts.iter().sum::<u64>()
            )));
        }
        snapshots.push(Snapshot {
            step,
            total,
            counts,
        });
    }
    if snapshots.is_empty() {
        return Err(EngineError::MalformedTrajectory("no snapshot rows".into()));
    }
    Ok((
        Trajectory {
            seed: meta.seed,
            map_desc: meta.map_desc,
            schedule_desc: meta.schedule_desc,
            labels,
            snapshots,
        },
        meta.digest,
    ))
}

pub fn read_trajectory_file(path: impl AsRef<Path>) -> Result<(Trajectory, String), EngineError> {
    read_trajectory_csv(std::fs::File::open(path)?)
}

struct Metadata {
    digest: String,
    seed: u64,
    map_desc: String,
    schedule_desc: String,
}

fn parse_metadata(line: &str) -> Result<Metadata, EngineError> {
    let malformed = |msg: &str| EngineError::MalformedTrajectory(msg.into());
    let body = line
        .strip_prefix("# urnsim ")
        .ok_or_else(|| malformed("missing '# urnsim' metadata line"))?;
    let mut digest = None;
    let mut seed = None;
    let mut map_desc = None;
    let mut schedule_desc = None;
    for token in body.split_whitespace() {
        let Some((key, value)) = token.split_once('=') else {
            continue;
        };
        match key {
            "digest" => digest = Some(value.to_string()),
            "seed" => {
                seed = Some(value.parse::<u64>().map_err(|e| {
                    malformed(&format!("bad seed {value:?}: {e}"))
                })?)
            }
            "map" => map_desc = Some(value.to_string()),
            "schedule" => schedule_desc = Some(value.to_string()),
            _ => {}
        }
    }
    Ok(Metadata {
        digest: digest.ok_or_else(|| malformed("metadata missing digest"))?,
        seed: seed.ok_or_else(|| malformed("metadata missing seed"))?,
        map_desc: map_desc.unwrap_or_default(),
        schedule_desc: schedule_desc.unwrap_or_default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run, GrowthSchedule, RunConfig, StopRule};
    use crate::group::FiniteGroup;
    use crate::simplex::SimplexMap;

    fn sample_trajectory() -> Trajectory {
        let config = RunConfig {
            map: SimplexMap::convolution(FiniteGroup::symmetric(3).unwrap().into_arc()),
            schedule: GrowthSchedule::unit(2).unwrap(),
            initial_counts: vec![0, 0, 1, 1, 0, 0],
            stop: StopRule::max_steps(50),
            stride: 5,
        };
        run(&config, 77).unwrap()
    }

    #[test]
    fn round_trip_preserves_everything() {
        let traj = sample_trajectory();
        let mut buffer = Vec::new();
        write_trajectory_csv(&mut buffer, &traj, "cafe0123").unwrap();
        let (read, digest) = read_trajectory_csv(buffer.as_slice()).unwrap();
        assert_eq!(digest, "cafe0123");
        assert_eq!(read, traj);
    }

    #[test]
    fn writes_are_deterministic() {
        let traj = sample_trajectory();
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_trajectory_csv(&mut a, &traj, "d").unwrap();
        write_trajectory_csv(&mut b, &traj, "d").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(matches!(
            read_trajectory_csv("no metadata\n".as_bytes()),
            Err(EngineError::MalformedTrajectory(_))
        ));
        let bad_counts = "# urnsim digest=x seed=1 rng=chacha8 sampler=categorical-cdf map=m schedule=s\n\
                          n,k,count_0,count_1,p_0,p_1\n\
                          0,3,1,1,0.5,0.5\n";
        let err = read_trajectory_csv(bad_counts.as_bytes()).unwrap_err();
        assert!(matches!(err, EngineError::MalformedTrajectory(msg) if msg.contains("sum")));
    }

    #[test]
    fn labels_with_commas_survive_quoting() {
        let c2 = FiniteGroup::cyclic(2).unwrap();
        let klein = FiniteGroup::direct_product(&c2, &c2).unwrap();
        let config = RunConfig {
            schedule: GrowthSchedule::unit(4).unwrap(),
            initial_counts: vec![1, 1, 1, 1],
            map: SimplexMap::convolution(klein.into_arc()),
            stop: StopRule::max_steps(10),
            stride: 1,
        };
        let traj = run(&config, 5).unwrap();
        assert!(traj.labels[0].contains(','), "product labels contain commas");
        let mut buffer = Vec::new();
        write_trajectory_csv(&mut buffer, &traj, "k4").unwrap();
        let (read, _) = read_trajectory_csv(buffer.as_slice()).unwrap();
        assert_eq!(read.labels, traj.labels);
        assert_eq!(read, traj);
    }
}
