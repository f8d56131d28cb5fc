//! Line-oriented record files and the versioned config format.
//!
//! Detections and trajectories travel as JSONL, one record per line, so
//! files stream, diff and append cleanly. Floats round-trip exactly through
//! the shortest-representation formatting of the JSON layer. Config files
//! are TOML with a mandatory `schema_version` field; an unknown version is
//! a hard error.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::ExperimentSpec;
use crate::simgen::{RenderedFrame, SceneSpec};
use crate::trajectory::{TrajectoryRecord, TrajectorySet};
use crate::types::{Detection, FeatureVector, Gaussian3};

pub const SCHEMA_VERSION: u32 = 1;

/// One detection line. `pos_cov` is row-major; when absent the consumer
/// applies its configured default. `gt_id` is the simulator's ground-truth
/// side channel; the tracker never reads it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    pub frame: u64,
    pub pos: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos_cov: Option<[f64; 9]>,
    pub feat: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_id: Option<u64>,
}

/// One trajectory line, shared by ground-truth and prediction files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryLine {
    pub frame: u64,
    pub id: u64,
    pub pos: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<[f64; 4]>,
}

/// Unknown-field handling: reject in strict mode, warn in lenient mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseMode {
    Strict,
    Lenient,
}

/// A non-fatal parse note, carrying the 1-based line number.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseWarning {
    pub line: usize,
    pub message: String,
}

fn parse_jsonl<T: serde::de::DeserializeOwned>(
    reader: impl BufRead,
    path_label: &str,
    mode: ParseMode,
    known_fields: &[&str],
) -> Result<(Vec<T>, Vec<ParseWarning>)> {
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path_label.to_string(),
            line: line_no,
            message,
        };
        match mode {
            ParseMode::Strict => {
                records.push(serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?);
            }
            ParseMode::Lenient => {
                let mut value: serde_json::Value =
                    serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
                if let Some(object) = value.as_object_mut() {
                    let unknown: Vec<String> = object
                        .keys()
                        .filter(|k| !known_fields.contains(&k.as_str()))
                        .cloned()
                        .collect();
                    for key in unknown {
                        warnings.push(ParseWarning {
                            line: line_no,
                            message: format!("ignoring unknown field \"{key}\""),
                        });
                        object.remove(&key);
                    }
                }
                records.push(
                    serde_json::from_value(value).map_err(|e| parse_err(e.to_string()))?,
                );
            }
        }
    }
    Ok((records, warnings))
}

const DETECTION_FIELDS: &[&str] = &["frame", "pos", "pos_cov", "feat", "bbox", "gt_id"];
const TRAJECTORY_FIELDS: &[&str] = &["frame", "id", "pos", "bbox"];

pub fn parse_detections(
    reader: impl BufRead,
    path_label: &str,
    mode: ParseMode,
) -> Result<(Vec<DetectionRecord>, Vec<ParseWarning>)> {
    parse_jsonl(reader, path_label, mode, DETECTION_FIELDS)
}

pub fn parse_trajectories(
    reader: impl BufRead,
    path_label: &str,
    mode: ParseMode,
) -> Result<(Vec<TrajectoryLine>, Vec<ParseWarning>)> {
    parse_jsonl(reader, path_label, mode, TRAJECTORY_FIELDS)
}

pub fn read_detections_file(
    path: &Path,
    mode: ParseMode,
) -> Result<(Vec<DetectionRecord>, Vec<ParseWarning>)> {
    let file = File::open(path).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })?;
    parse_detections(BufReader::new(file), &path.display().to_string(), mode)
}

pub fn read_trajectories_file(
    path: &Path,
    mode: ParseMode,
) -> Result<(Vec<TrajectoryLine>, Vec<ParseWarning>)> {
    let file = File::open(path).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })?;
    parse_trajectories(BufReader::new(file), &path.display().to_string(), mode)
}

pub fn emit_jsonl<T: Serialize>(mut writer: impl Write, records: &[T]) -> Result<()> {
    for record in records {
        serde_json::to_writer(&mut writer, record)
            .map_err(|e| Error::Config(format!("serialization failed: {e}")))?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_jsonl_file<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut file = File::create(path)?;
    emit_jsonl(&mut file, records)?;
    Ok(())
}

/// Converts parsed records into per-frame detection sets, applying the
/// default measurement covariance where a record carries none. Frames come
/// back ascending.
pub fn detections_from_records(
    records: &[DetectionRecord],
    default_cov: &Matrix3<f64>,
) -> Result<Vec<(u64, Vec<Detection>)>> {
    let mut by_frame: std::collections::BTreeMap<u64, Vec<Detection>> = Default::default();
    for record in records {
        let cov = match record.pos_cov {
            Some(flat) => Matrix3::from_row_slice(&flat),
            None => *default_cov,
        };
        let position = Gaussian3::new(Vector3::from(record.pos), cov)?;
        let feature = FeatureVector::new(record.feat.clone())?;
        let det = Detection::new(position, record.bbox, feature, record.frame)?;
        by_frame.entry(record.frame).or_default().push(det);
    }
    Ok(by_frame.into_iter().collect())
}

/// Flattens rendered frames into detection records, with the ground-truth
/// side channel in `gt_id`.
pub fn records_from_rendered(frames: &[RenderedFrame]) -> Vec<DetectionRecord> {
    let mut out = Vec::new();
    for frame in frames {
        for (det, gt_id) in frame.detections.iter().zip(&frame.gt_ids) {
            out.push(DetectionRecord {
                frame: frame.viewpoint as u64,
                pos: (*det.position.mean()).into(),
                pos_cov: Some({
                    let mut flat = [0.0; 9];
                    for r in 0..3 {
                        for c in 0..3 {
                            flat[r * 3 + c] = det.position.cov()[(r, c)];
                        }
                    }
                    flat
                }),
                feat: det.feature.values().to_vec(),
                bbox: det.bbox,
                gt_id: *gt_id,
            });
        }
    }
    out
}

pub fn trajectory_lines(set: &TrajectorySet) -> Vec<TrajectoryLine> {
    set.records()
        .iter()
        .map(|r| TrajectoryLine {
            frame: r.frame,
            id: r.id,
            pos: r.pos,
            bbox: r.bbox,
        })
        .collect()
}

pub fn trajectory_set_from_lines(lines: &[TrajectoryLine]) -> Result<TrajectorySet> {
    TrajectorySet::from_records(
        lines
            .iter()
            .map(|l| TrajectoryRecord {
                frame: l.frame,
                id: l.id,
                pos: l.pos,
                bbox: l.bbox,
            })
            .collect(),
    )
}

/// (id, feature) pairs from records that carry a ground-truth id, for gate
/// calibration.
pub fn labeled_features_from_records(
    records: &[DetectionRecord],
) -> Result<Vec<(u64, FeatureVector)>> {
    records
        .iter()
        .filter_map(|r| {
            r.gt_id
                .map(|id| FeatureVector::new(r.feat.clone()).map(|f| (id, f)))
        })
        .collect()
}

/// Top-level config file: a schema version plus optional scene and
/// experiment sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<SceneSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentSpec>,
}

pub fn parse_config(text: &str) -> Result<ConfigFile> {
    let config: ConfigFile =
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))?;
    if config.schema_version != SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            got: config.schema_version,
            expected: SCHEMA_VERSION,
        });
    }
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_record(rng: &mut ChaCha8Rng) -> DetectionRecord {
        DetectionRecord {
            frame: rng.random_range(0..1000),
            pos: [
                rng.random_range(-10.0..10.0),
                rng.random_range(-10.0..10.0),
                rng.random_range(-10.0..10.0),
            ],
            pos_cov: if rng.random_bool(0.5) {
                let d: f64 = rng.random_range(1e-6..1e-2);
                Some([d, 0.0, 0.0, 0.0, d, 0.0, 0.0, 0.0, d])
            } else {
                None
            },
            feat: (0..8).map(|_| rng.random_range(-1.0..1.0)).collect(),
            bbox: if rng.random_bool(0.3) {
                Some([
                    rng.random_range(0.0..100.0),
                    rng.random_range(0.0..100.0),
                    rng.random_range(1.0..50.0),
                    rng.random_range(1.0..50.0),
                ])
            } else {
                None
            },
            gt_id: if rng.random_bool(0.5) {
                Some(rng.random_range(0..50))
            } else {
                None
            },
        }
    }

    #[test]
    fn empty_file_is_a_valid_zero_frame_sequence() {
        let (records, warnings) =
            parse_detections("".as_bytes(), "empty.jsonl", ParseMode::Strict).unwrap();
        assert!(records.is_empty());
        assert!(warnings.is_empty());
        let frames =
            detections_from_records(&records, &(Matrix3::identity() * 1e-4)).unwrap();
        assert!(frames.is_empty());
    }

    #[test]
    fn emit_then_parse_round_trips_ten_thousand_records() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let records: Vec<DetectionRecord> = (0..10_000).map(|_| sample_record(&mut rng)).collect();
        let mut buffer = Vec::new();
        emit_jsonl(&mut buffer, &records).unwrap();
        let (parsed, warnings) =
            parse_detections(buffer.as_slice(), "round.jsonl", ParseMode::Strict).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(parsed, records);
    }

    #[test]
    fn strict_mode_rejects_unknown_fields_with_line_number() {
        let text = concat!(
            r#"{"frame":0,"pos":[0,0,0],"feat":[1,0]}"#,
            "\n",
            r#"{"frame":1,"pos":[0,0,0],"feat":[1,0],"mystery":3}"#,
            "\n"
        );
        let err =
            parse_detections(text.as_bytes(), "in.jsonl", ParseMode::Strict).unwrap_err();
        match err {
            Error::Parse { path, line, message } => {
                assert_eq!(path, "in.jsonl");
                assert_eq!(line, 2);
                assert!(message.contains("mystery"), "message: {message}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn lenient_mode_warns_and_ignores_unknown_fields() {
        let text = concat!(
            r#"{"frame":0,"pos":[0,0,0],"feat":[1,0],"mystery":3}"#,
            "\n"
        );
        let (records, warnings) =
            parse_detections(text.as_bytes(), "in.jsonl", ParseMode::Lenient).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(warnings.len(), 1);
        assert_eq!(warnings[0].line, 1);
        assert!(warnings[0].message.contains("mystery"));
    }

    #[test]
    fn malformed_json_names_the_line() {
        let text = "{\"frame\":0,\"pos\":[0,0,0],\"feat\":[1,0]}\nnot json\n";
        let err = parse_detections(text.as_bytes(), "d.jsonl", ParseMode::Strict).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn detections_group_by_frame_ascending_with_default_covariance() {
        let records = vec![
            DetectionRecord {
                frame: 5,
                pos: [1.0, 2.0, 3.0],
                pos_cov: None,
                feat: vec![1.0, 0.0],
                bbox: None,
                gt_id: None,
            },
            DetectionRecord {
                frame: 2,
                pos: [0.0, 0.0, 0.0],
                pos_cov: Some([1e-2, 0.0, 0.0, 0.0, 1e-2, 0.0, 0.0, 0.0, 1e-2]),
                feat: vec![0.0, 1.0],
                bbox: None,
                gt_id: Some(3),
            },
        ];
        let default_cov = Matrix3::identity() * 1e-4;
        let frames = detections_from_records(&records, &default_cov).unwrap();
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[0].0, 2);
        assert_eq!(frames[0].1[0].position.cov()[(0, 0)], 1e-2);
        assert_eq!(frames[1].0, 5);
        assert_eq!(frames[1].1[0].position.cov()[(0, 0)], 1e-4);
    }

    #[test]
    fn config_requires_known_schema_version() {
        let ok = parse_config("schema_version = 1\n").unwrap();
        assert_eq!(ok.schema_version, 1);
        assert!(matches!(
            parse_config("schema_version = 99\n"),
            Err(Error::SchemaVersion { got: 99, .. })
        ));
        assert!(parse_config("").is_err());
    }

    #[test]
    fn config_parses_scene_and_experiment_sections() {
        let text = r#"
schema_version = 1

[scene]
seed = 7
n_trusses = 3

[experiment]
seed = 11
lambda_grid = [0.0, 1.0]
"#;
        let config = parse_config(text).unwrap();
        let scene = config.scene.unwrap();
        assert_eq!(scene.seed, 7);
        assert_eq!(scene.n_trusses, 3);
        // Unspecified fields fall back to defaults.
        assert_eq!(scene.tomato_radius, 0.03);
        let experiment = config.experiment.unwrap();
        assert_eq!(experiment.seed, 11);
        assert_eq!(experiment.lambda_grid, vec![0.0, 1.0]);
    }
}
