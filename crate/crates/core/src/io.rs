//! File formats: series CSV, model JSON, and the segmentation, track,
//! detection and trace outputs.
//!
//! State indices and sample positions are 1-based in every file.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::basis::{BasisConfig, BasisFamily, TimeConvention};
use crate::duration::DurationModel;
use crate::error::{Error, Result};
use crate::lattice::{Segment, Segmentation};
use crate::model::{EmissionParams, Model, Series};
use crate::recognizer::{Detection, ScoreTrack};
use crate::train::FitTrace;

pub const MODEL_VERSION: u32 = 1;
/// Sampling period assumed when a series file carries no `# fs=` line.
pub const DEFAULT_SAMPLING_PERIOD: f64 = 1.0 / 360.0;

fn parse_error(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Parses series CSV text; `path` only labels errors.
pub fn parse_series(text: &str, path: &Path) -> Result<Series> {
    let mut period = DEFAULT_SAMPLING_PERIOD;
    for (i, line) in text.lines().enumerate() {
        if let Some(rest) = line.trim().strip_prefix('#') {
            if let Some(fs) = rest.trim().strip_prefix("fs=") {
                let hz: f64 = fs
                    .trim()
                    .parse()
                    .map_err(|_| parse_error(path, i + 1, format!("bad sampling rate {fs:?}")))?;
                if !(hz > 0.0 && hz.is_finite()) {
                    return Err(parse_error(
                        path,
                        i + 1,
                        format!("sampling rate must be positive, got {hz}"),
                    ));
                }
                period = 1.0 / hz;
            }
        }
    }
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let with_index = match header
        .iter()
        .map(String::as_str)
        .collect::<Vec<_>>()
        .as_slice()
    {
        ["t", "value"] => true,
        ["value"] => false,
        _ => {
            return Err(parse_error(
                path,
                1,
                format!(
                    "expected header `t,value` or `value`, got `{}`",
                    header.join(",")
                ),
            ))
        }
    };
    let mut values = Vec::new();
    let mut last_t: Option<f64> = None;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let field = |k: usize| -> Result<f64> {
            let raw = rec.get(k).unwrap_or("");
            let v: f64 = raw
                .parse()
                .map_err(|_| parse_error(path, line, format!("not a number: {raw:?}")))?;
            if !v.is_finite() {
                return Err(parse_error(path, line, format!("non-finite value {raw:?}")));
            }
            Ok(v)
        };
        if with_index {
            let t = field(0)?;
            if last_t.is_some_and(|prev| t <= prev) {
                return Err(parse_error(
                    path,
                    line,
                    format!("t = {t} does not increase"),
                ));
            }
            last_t = Some(t);
            values.push(field(1)?);
        } else {
            values.push(field(0)?);
        }
    }
    if values.is_empty() {
        return Err(parse_error(path, 1, "series has no samples"));
    }
    Series::new(values, period)
}

pub fn load_series(path: &Path) -> Result<Series> {
    parse_series(&fs::read_to_string(path)?, path)
}

/// `# fs=` line, `t,value` header, shortest round-trip decimal values.
pub fn format_series(series: &Series) -> String {
    let mut out = format!("# fs={}\nt,value\n", 1.0 / series.sampling_period);
    for (t, v) in series.values.iter().enumerate() {
        let _ = writeln!(out, "{t},{v}");
    }
    out
}

pub fn save_series(series: &Series, path: &Path) -> Result<()> {
    fs::write(path, format_series(series))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BasisDoc {
    family: BasisFamily,
    max_order: usize,
    orders: Vec<usize>,
    scale: f64,
    time_convention: TimeConvention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    version: u32,
    n_states: usize,
    sampling_period: f64,
    basis: BasisDoc,
    pi: Vec<f64>,
    trans: Vec<Vec<f64>>,
    topology_mask: Vec<Vec<bool>>,
    durations: Vec<DurationModel>,
    emissions: Vec<EmissionParams>,
}

pub fn model_to_json(model: &Model) -> Result<String> {
    let doc = ModelDoc {
        version: MODEL_VERSION,
        n_states: model.n_states,
        sampling_period: model.sampling_period,
        basis: BasisDoc {
            family: model.basis.family,
            max_order: model.basis.max_order,
            orders: model.emissions.iter().map(EmissionParams::order).collect(),
            scale: model.basis.scale,
            time_convention: model.basis.time_convention,
        },
        pi: model.pi.clone(),
        trans: model.trans.clone(),
        topology_mask: model.topology_mask.clone(),
        durations: model.durations.clone(),
        emissions: model.emissions.clone(),
    };
    let mut s = serde_json::to_string_pretty(&doc)?;
    s.push('\n');
    Ok(s)
}

/// Parses and validates a model document.
pub fn model_from_json(text: &str) -> Result<Model> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    match value.get("version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == u64::from(MODEL_VERSION) => {}
        Some(v) => {
            return Err(Error::Schema(format!(
                "unsupported model version {v}, expected {MODEL_VERSION}"
            )))
        }
        None => {
            return Err(Error::Schema(
                "model document has no integer `version`".into(),
            ))
        }
    }
    let doc: ModelDoc = serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))?;
    if doc.basis.orders.len() != doc.emissions.len()
        || doc
            .basis
            .orders
            .iter()
            .zip(&doc.emissions)
            .any(|(&o, em)| o != em.order())
    {
        return Err(Error::Schema(
            "basis.orders disagree with the emission weight counts".into(),
        ));
    }
    let model = Model {
        n_states: doc.n_states,
        pi: doc.pi,
        trans: doc.trans,
        topology_mask: doc.topology_mask,
        durations: doc.durations,
        emissions: doc.emissions,
        basis: BasisConfig {
            family: doc.basis.family,
            max_order: doc.basis.max_order,
            scale: doc.basis.scale,
            time_convention: doc.basis.time_convention,
        },
        sampling_period: doc.sampling_period,
    };
    model.check()?;
    Ok(model)
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    fs::write(path, model_to_json(model)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model> {
    model_from_json(&fs::read_to_string(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct SegmentDoc {
    state: usize,
    start: usize,
    duration: usize,
}

pub fn segmentation_to_json(seg: &Segmentation) -> Result<String> {
    let docs: Vec<SegmentDoc> = seg
        .segments
        .iter()
        .map(|s| SegmentDoc {
            state: s.state + 1,
            start: s.start + 1,
            duration: s.duration,
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&docs)?;
    s.push('\n');
    Ok(s)
}

/// Segments from a segmentation document (the log joint is not stored).
pub fn segments_from_json(text: &str) -> Result<Vec<Segment>> {
    let docs: Vec<SegmentDoc> = serde_json::from_str(text)?;
    docs.into_iter()
        .map(|d| {
            if d.state == 0 || d.start == 0 || d.duration == 0 {
                return Err(Error::Schema(
                    "segment state, start and duration are 1-based and positive".into(),
                ));
            }
            Ok(Segment {
                state: d.state - 1,
                start: d.start - 1,
                duration: d.duration,
            })
        })
        .collect()
}

pub fn save_segmentation(seg: &Segmentation, path: &Path) -> Result<()> {
    fs::write(path, segmentation_to_json(seg)?)?;
    Ok(())
}

/// `window_start,loglik` with 1-based starts; infeasible windows read `-inf`.
pub fn format_track(track: &ScoreTrack) -> String {
    let mut out = String::from("window_start,loglik\n");
    for (k, s) in track.scores.iter().enumerate() {
        let _ = writeln!(out, "{},{}", track.start(k) + 1, s);
    }
    out
}

pub fn save_track(track: &ScoreTrack, path: &Path) -> Result<()> {
    fs::write(path, format_track(track))?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct DetectionDoc {
    window: usize,
    window_start: usize,
    score: f64,
    peak: bool,
}

pub fn detections_to_json(dets: &[Detection], track: &ScoreTrack) -> Result<String> {
    let docs: Vec<DetectionDoc> = dets
        .iter()
        .map(|d| DetectionDoc {
            window: d.window + 1,
            window_start: track.start(d.window) + 1,
            score: d.score,
            peak: d.peak,
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&docs)?;
    s.push('\n');
    Ok(s)
}

pub fn save_detections(dets: &[Detection], track: &ScoreTrack, path: &Path) -> Result<()> {
    fs::write(path, detections_to_json(dets, track)?)?;
    Ok(())
}

/// `iteration,loglik,millis`; iteration 0 is the initial model.
pub fn format_trace(trace: &FitTrace) -> String {
    let mut out = String::from("iteration,loglik,millis\n");
    for (k, ll) in trace.logliks.iter().enumerate() {
        let ms = trace.millis.get(k).copied().unwrap_or(0.0);
        let _ = writeln!(out, "{k},{ll},{ms:.3}");
    }
    out
}

pub fn save_trace(trace: &FitTrace, path: &Path) -> Result<()> {
    fs::write(path, format_trace(trace))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::duration::{DiscreteDuration, GammaDuration};

    fn p() -> &'static Path {
        Path::new("test.csv")
    }

    fn model() -> Model {
        Model::left_to_right(
            vec![
                DurationModel::Discrete(DiscreteDuration::new(2, 4, vec![0.1, 0.2, 0.7]).unwrap()),
                DurationModel::Gamma(GammaDuration::new(3.3, 0.7, 20).unwrap()),
            ],
            vec![
                EmissionParams::new(vec![0.1, -2.0 / 3.0], 12.5).unwrap(),
                EmissionParams::new(vec![std::f64::consts::PI], 1e-3).unwrap(),
            ],
            BasisConfig::default(),
            1.0 / 360.0,
        )
        .unwrap()
    }

    #[test]
    fn single_value_column() {
        let s = parse_series("value\n0.5\n", p()).unwrap();
        assert_eq!(s.values, vec![0.5]);
        assert_eq!(s.sampling_period, DEFAULT_SAMPLING_PERIOD);
    }

    #[test]
    fn fs_comment_sets_period() {
        let s = parse_series("# fs=360\nt,value\n0,1\n1,2\n", p()).unwrap();
        assert_eq!(s.sampling_period, 1.0 / 360.0);
        let s = parse_series("# fs=250\nvalue\n1\n", p()).unwrap();
        assert_eq!(s.sampling_period, 1.0 / 250.0);
    }

    #[test]
    fn malformed_row_reports_line() {
        match parse_series("t,value\n0,1\n1,abc\n", p()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_series("value\nNaN\n", p()),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_series("value\ninf\n", p()),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_series("t,value\n1,0\n1,0\n", p()),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            parse_series("x,y\n1,0\n", p()),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_series("value\n", p()),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn series_round_trip_is_exact() {
        let values: Vec<f64> = (0..200)
            .map(|k| (k as f64 * 0.123).sin() / 7.0 + 1e-17 * k as f64)
            .collect();
        let s = Series::new(values, 1.0 / 360.0).unwrap();
        let back = parse_series(&format_series(&s), p()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn model_round_trip_is_exact() {
        let m = model();
        let text = model_to_json(&m).unwrap();
        assert_eq!(model_from_json(&text).unwrap(), m);
        assert_eq!(
            model_to_json(&model_from_json(&text).unwrap()).unwrap(),
            text
        );
    }

    #[test]
    fn tampered_self_transition_rejected() {
        let mut v: serde_json::Value =
            serde_json::from_str(&model_to_json(&model()).unwrap()).unwrap();
        v["trans"][0][0] = serde_json::json!(0.2);
        match model_from_json(&v.to_string()) {
            Err(Error::InvalidModel(vs)) => {
                assert_eq!(vs.len(), 1);
                assert_eq!(vs[0].class(), "self-transition");
                assert!(vs[0].to_string().contains("state 1"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn version_and_schema_checked() {
        let mut v: serde_json::Value =
            serde_json::from_str(&model_to_json(&model()).unwrap()).unwrap();
        v["version"] = serde_json::json!(2);
        assert!(matches!(
            model_from_json(&v.to_string()),
            Err(Error::Schema(_))
        ));
        let mut v: serde_json::Value =
            serde_json::from_str(&model_to_json(&model()).unwrap()).unwrap();
        v["basis"]["orders"] = serde_json::json!([3, 0]);
        assert!(matches!(
            model_from_json(&v.to_string()),
            Err(Error::Schema(_))
        ));
        let mut v: serde_json::Value =
            serde_json::from_str(&model_to_json(&model()).unwrap()).unwrap();
        v["extra"] = serde_json::json!(1);
        assert!(matches!(
            model_from_json(&v.to_string()),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn segmentation_is_one_based() {
        let seg = Segmentation {
            segments: vec![
                Segment {
                    state: 0,
                    start: 0,
                    duration: 2,
                },
                Segment {
                    state: 1,
                    start: 2,
                    duration: 3,
                },
            ],
            log_joint: -1.0,
        };
        let text = segmentation_to_json(&seg).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v[1]["state"], 2);
        assert_eq!(v[1]["start"], 3);
        assert_eq!(segments_from_json(&text).unwrap(), seg.segments);
    }

    #[test]
    fn track_format() {
        let t = ScoreTrack {
            scores: vec![-1.5, f64::NEG_INFINITY],
            width: 4,
            stride: 3,
        };
        assert_eq!(format_track(&t), "window_start,loglik\n1,-1.5\n4,-inf\n");
    }
}
