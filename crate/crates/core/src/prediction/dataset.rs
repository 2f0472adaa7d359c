//! Training sequences sampled from simulated obstacle trajectories.
//!
//! Coordinates are stored normalized to `[0, 1]` by the map size. CSV rows are
//! `sequence_id,step,x,y,mask`: steps `-(L-1)..=0` hold the observation window
//! (padding rows carry `(-1, -1)` and mask 0), steps `1..=H` hold the labels.

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::prediction::PredictionConfig;
use crate::seeds;
use crate::world::{MapSpec, World, WorldConfig};

/// Normalized padding coordinate; always masked out.
pub const PADDING: f64 = -1.0;

const EPISODE_LENGTH: usize = 200;
const SEQUENCES_PER_EPISODE: usize = 64;

/// Where a generated sequence came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SequenceSource {
    pub episode: usize,
    pub obstacle: usize,
    /// Observation time of the newest history entry.
    pub end_time: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    /// Normalized observations, oldest first; 1..=history entries.
    pub history: Vec<Point2>,
    /// Normalized true positions at `t = 1..=H`.
    pub future: Vec<Point2>,
    pub source: Option<SequenceSource>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingDataset {
    pub map: MapSpec,
    pub history: usize,
    pub horizon: usize,
    pub sequences: Vec<Sequence>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    sequence_id: usize,
    step: i64,
    x: f64,
    y: f64,
    mask: u8,
}

pub fn normalize(map: &MapSpec, p: Point2) -> Point2 {
    Point2::new(p.x / map.width, p.y / map.height)
}

pub fn denormalize(map: &MapSpec, p: Point2) -> Point2 {
    Point2::new(p.x * map.width, p.y * map.height)
}

impl TrainingDataset {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// Builds a dataset from map-coordinate sequences `(history, future)`.
    pub fn from_map_sequences(
        map: MapSpec,
        config: &PredictionConfig,
        sequences: impl IntoIterator<Item = (Vec<Point2>, Vec<Point2>)>,
    ) -> Result<Self> {
        let sequences = sequences
            .into_iter()
            .map(|(h, f)| {
                if h.is_empty() || h.len() > config.history || f.len() != config.horizon {
                    return Err(Error::Precondition(format!(
                        "sequence needs 1..={} observations and {} labels",
                        config.history, config.horizon
                    )));
                }
                Ok(Sequence {
                    history: h.iter().map(|&p| normalize(&map, p)).collect(),
                    future: f.iter().map(|&p| normalize(&map, p)).collect(),
                    source: None,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { map, history: config.history, horizon: config.horizon, sequences })
    }

    /// Deterministic split into `(train, held_out)`; the last share is held out.
    pub fn split(&self, held_out_fraction: f64) -> (TrainingDataset, TrainingDataset) {
        let n_held = ((self.sequences.len() as f64) * held_out_fraction).round() as usize;
        let n_held = n_held.min(self.sequences.len().saturating_sub(1));
        let cut = self.sequences.len() - n_held;
        let part = |seqs: &[Sequence]| TrainingDataset {
            map: self.map,
            history: self.history,
            horizon: self.horizon,
            sequences: seqs.to_vec(),
        };
        (part(&self.sequences[..cut]), part(&self.sequences[cut..]))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for (id, seq) in self.sequences.iter().enumerate() {
            let pad = self.history - seq.history.len();
            for k in 0..self.history {
                let step = k as i64 - (self.history as i64 - 1);
                let row = if k < pad {
                    CsvRow { sequence_id: id, step, x: PADDING, y: PADDING, mask: 0 }
                } else {
                    let p = seq.history[k - pad];
                    CsvRow { sequence_id: id, step, x: p.x, y: p.y, mask: 1 }
                };
                w.serialize(row)?;
            }
            for (k, p) in seq.future.iter().enumerate() {
                w.serialize(CsvRow { sequence_id: id, step: k as i64 + 1, x: p.x, y: p.y, mask: 1 })?;
            }
        }
        w.flush().map_err(|e| Error::io("dataset csv", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, map: MapSpec, config: &PredictionConfig) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut sequences: Vec<Sequence> = Vec::new();
        let mut current: Option<usize> = None;
        for row in r.deserialize::<CsvRow>() {
            let row = row?;
            if current != Some(row.sequence_id) {
                if row.sequence_id != sequences.len() {
                    return Err(Error::Precondition(format!("sequence ids must be consecutive, got {}", row.sequence_id)));
                }
                current = Some(row.sequence_id);
                sequences.push(Sequence { history: Vec::new(), future: Vec::new(), source: None });
            }
            let seq = sequences.last_mut().expect("pushed above");
            let p = Point2::new(row.x, row.y);
            if row.step <= 0 {
                if row.mask != 0 {
                    seq.history.push(p);
                }
            } else {
                seq.future.push(p);
            }
        }
        for (id, seq) in sequences.iter().enumerate() {
            if seq.history.is_empty() || seq.history.len() > config.history || seq.future.len() != config.horizon {
                return Err(Error::Precondition(format!("sequence {id} is malformed")));
            }
        }
        Ok(Self { map, history: config.history, horizon: config.horizon, sequences })
    }
}

/// Seed of the world simulated for dataset episode `episode`.
pub fn episode_seed(master_seed: u64, episode: usize) -> u64 {
    seeds::indexed_stream(master_seed, seeds::DATASET, episode as u64).gen()
}

/// Samples `n_sequences` windows from freshly simulated worlds. Window
/// lengths are uniform over `1..=history`.
pub fn generate_training_data(
    world: &WorldConfig,
    config: &PredictionConfig,
    n_sequences: usize,
    master_seed: u64,
) -> Result<TrainingDataset> {
    if n_sequences == 0 {
        return Err(Error::Precondition("n_sequences must be at least 1".into()));
    }
    world.validate()?;
    config.validate()?;
    let mut rng = seeds::stream(master_seed, seeds::DATASET);
    let mut sequences = Vec::with_capacity(n_sequences);
    let mut episode = 0;
    while sequences.len() < n_sequences {
        let mut sim = World::new(world.clone(), episode_seed(master_seed, episode))?;
        let obstacles = sim.obstacles().len();
        if obstacles == 0 {
            return Err(Error::Config("dataset generation needs at least one obstacle".into()));
        }
        let last = EPISODE_LENGTH as f64;
        sim.advance_to(last);
        let tracks: Vec<Vec<Point2>> =
            (0..obstacles).map(|o| sim.history(o, last, EPISODE_LENGTH + 1)).collect::<Result<_>>()?;
        let take = SEQUENCES_PER_EPISODE.min(n_sequences - sequences.len());
        for _ in 0..take {
            let obstacle = rng.gen_range(0..obstacles);
            let len = rng.gen_range(1..=config.history);
            let end = rng.gen_range(len - 1..=EPISODE_LENGTH - config.horizon);
            let track = &tracks[obstacle];
            sequences.push(Sequence {
                history: track[end + 1 - len..=end].iter().map(|&p| normalize(&world.map, p)).collect(),
                future: track[end + 1..=end + config.horizon].iter().map(|&p| normalize(&world.map, p)).collect(),
                source: Some(SequenceSource { episode, obstacle, end_time: end }),
            });
        }
        episode += 1;
    }
    Ok(TrainingDataset { map: world.map, history: config.history, horizon: config.horizon, sequences })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (WorldConfig, PredictionConfig) {
        (WorldConfig::default(), PredictionConfig::default())
    }

    #[test]
    fn deterministic_given_seed() {
        let (w, p) = small();
        let a = generate_training_data(&w, &p, 1, 42).unwrap();
        let b = generate_training_data(&w, &p, 1, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_training_data(&w, &p, 1, 43).unwrap());
    }

    #[test]
    fn labels_match_trajectory_log() {
        let (w, p) = small();
        let data = generate_training_data(&w, &p, 100, 7).unwrap();
        for seq in &data.sequences {
            let src = seq.source.unwrap();
            let world = World::new(w.clone(), episode_seed(7, src.episode)).unwrap();
            let mut world = world;
            world.advance_to((src.end_time + p.horizon) as f64);
            for (k, label) in seq.future.iter().enumerate() {
                let truth = world.log().position_at(src.obstacle, (src.end_time + k + 1) as f64).unwrap();
                assert_eq!(*label, normalize(&w.map, truth));
            }
            let newest = world.log().position_at(src.obstacle, src.end_time as f64).unwrap();
            assert_eq!(*seq.history.last().unwrap(), normalize(&w.map, newest));
        }
    }

    #[test]
    fn coordinates_are_normalized_and_lengths_vary() {
        let (w, p) = small();
        let data = generate_training_data(&w, &p, 500, 3).unwrap();
        let mut lengths = std::collections::BTreeSet::new();
        for seq in &data.sequences {
            lengths.insert(seq.history.len());
            for q in seq.history.iter().chain(&seq.future) {
                assert!((0.0..=1.0).contains(&q.x) && (0.0..=1.0).contains(&q.y));
            }
        }
        assert_eq!(lengths.len(), 16);
    }

    #[test]
    fn csv_roundtrip() {
        let (w, p) = small();
        let data = generate_training_data(&w, &p, 20, 9).unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("sequence_id,step,x,y,mask\n"));
        let back = TrainingDataset::read_csv(buf.as_slice(), w.map, &p).unwrap();
        assert_eq!(back.len(), data.len());
        for (a, b) in back.sequences.iter().zip(&data.sequences) {
            assert_eq!(a.history, b.history);
            assert_eq!(a.future, b.future);
        }
    }

    #[test]
    fn zero_sequences_rejected() {
        let (w, p) = small();
        assert!(generate_training_data(&w, &p, 0, 1).is_err());
    }
}
