//! Instance files, solution reports, measured-score files and LUT aggregation.
//!
//! All documents are UTF-8 JSON. Writers are deterministic: keys come out in
//! declaration order, numbers use the shortest decimal that round-trips, and
//! integral reals (including `-0.0`) are written without a fraction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize, Serializer};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::model::{validate_instance, CandidateOp, LayerTable, SearchInstance, Selection, COST_UNIT};
use crate::solver::{ReportedSolution, SolveReport, SolveStatus};

pub const FORMAT_VERSION: u32 = 1;

/// Parsed instance document: the instance plus its free-form provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceFile {
    pub instance: SearchInstance,
    pub provenance: Map<String, Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    LatencyMs,
    LossDelta,
}

/// Raw repeated-run observations for one (layer, op, metric) key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSample {
    pub op_id: String,
    pub layer_index: usize,
    pub metric: Metric,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LutKey {
    pub layer_index: usize,
    pub op_id: String,
    pub metric: Metric,
}

/// Externally measured score for one architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredEntry {
    pub choices: Selection,
    #[serde(serialize_with = "canonical_f64")]
    pub measured: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredScores {
    pub instance: String,
    pub entries: Vec<MeasuredEntry>,
}

// ---------------------------------------------------------------------------
// wire structs

#[derive(Deserialize)]
struct InstanceDocIn {
    format_version: u32,
    name: String,
    cost_unit: String,
    #[serde(default)]
    scores_absolute: bool,
    #[serde(default)]
    provenance: Option<Map<String, Value>>,
    layers: Vec<LayerDocIn>,
}

#[derive(Deserialize)]
struct LayerDocIn {
    layer_index: usize,
    teacher_index: usize,
    ops: Vec<CandidateOp>,
}

#[derive(Serialize)]
struct InstanceDocOut<'a> {
    format_version: u32,
    name: &'a str,
    cost_unit: &'static str,
    #[serde(skip_serializing_if = "Map::is_empty")]
    provenance: &'a Map<String, Value>,
    layers: Vec<LayerDocOut<'a>>,
}

#[derive(Serialize)]
struct LayerDocOut<'a> {
    layer_index: usize,
    teacher_index: usize,
    ops: Vec<OpDocOut<'a>>,
}

#[derive(Serialize)]
struct OpDocOut<'a> {
    op_id: &'a str,
    #[serde(serialize_with = "canonical_f64")]
    score_delta: f64,
    #[serde(serialize_with = "canonical_f64")]
    cost: f64,
    #[serde(skip_serializing_if = "<[String]>::is_empty")]
    tags: &'a [String],
}

#[derive(Serialize, Deserialize)]
struct ReportDoc {
    instance: String,
    #[serde(serialize_with = "canonical_f64")]
    budget_ms: f64,
    overlap_limit: usize,
    solutions: Vec<SolutionDoc>,
    #[serde(serialize_with = "canonical_f64")]
    wall_time_s: f64,
}

#[derive(Serialize, Deserialize)]
struct SolutionDoc {
    choices: Vec<usize>,
    #[serde(serialize_with = "canonical_f64")]
    objective: f64,
    #[serde(serialize_with = "canonical_f64")]
    cost_ms: f64,
    status: SolveStatus,
    #[serde(serialize_with = "canonical_f64")]
    gap: f64,
}

/// Integral values print as integers; everything else as the shortest
/// round-trip decimal. Non-finite values have no JSON form.
fn canonical_f64<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    const EXACT_INT: f64 = 9_007_199_254_740_992.0; // 2^53
    if !x.is_finite() {
        return Err(serde::ser::Error::custom(format!(
            "non-finite number {x} cannot be written"
        )));
    }
    if x.fract() == 0.0 && x.abs() < EXACT_INT {
        s.serialize_i64(*x as i64)
    } else {
        s.serialize_f64(*x)
    }
}

fn map_json_error(e: serde_json::Error) -> Error {
    use serde_json::error::Category;
    match e.classify() {
        Category::Syntax | Category::Eof => Error::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        },
        Category::Data | Category::Io => Error::Schema(e.to_string()),
    }
}

fn to_pretty<T: Serialize>(doc: &T) -> Result<String> {
    let mut out = serde_json::to_string_pretty(doc)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    out.push('\n');
    Ok(out)
}

// ---------------------------------------------------------------------------
// instances

pub fn parse_instance(text: &str) -> Result<SearchInstance> {
    parse_instance_file(text).map(|f| f.instance)
}

/// Parses and validates an instance document, converting absolute scores to
/// teacher-relative deltas when `scores_absolute` is set.
pub fn parse_instance_file(text: &str) -> Result<InstanceFile> {
    let doc: InstanceDocIn = serde_json::from_str(text).map_err(map_json_error)?;
    if doc.format_version != FORMAT_VERSION {
        return Err(Error::Schema(format!(
            "unsupported format_version {} (expected {FORMAT_VERSION})",
            doc.format_version
        )));
    }
    if doc.cost_unit != COST_UNIT {
        return Err(Error::Schema(format!(
            "cost_unit must be {COST_UNIT:?}, found {:?}",
            doc.cost_unit
        )));
    }

    let mut layers = Vec::with_capacity(doc.layers.len());
    for l in doc.layers {
        let mut ops = l.ops;
        if doc.scores_absolute {
            let base = ops.get(l.teacher_index).map(|o| o.score_delta).ok_or_else(|| {
                Error::Schema(format!(
                    "layer {}: teacher_index {} out of range",
                    l.layer_index, l.teacher_index
                ))
            })?;
            for op in &mut ops {
                op.score_delta -= base;
            }
            ops[l.teacher_index].score_delta = 0.0;
        }
        for op in &mut ops {
            // fold -0.0 into +0.0
            op.score_delta += 0.0;
        }
        layers.push(LayerTable {
            layer_index: l.layer_index,
            ops,
            teacher_index: l.teacher_index,
        });
    }

    let instance = SearchInstance {
        name: doc.name,
        layers,
    };
    let violations = validate_instance(&instance);
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    Ok(InstanceFile {
        instance,
        provenance: doc.provenance.unwrap_or_default(),
    })
}

pub fn write_instance(instance: &SearchInstance) -> String {
    write_instance_file(instance, &Map::new())
}

pub fn write_instance_file(instance: &SearchInstance, provenance: &Map<String, Value>) -> String {
    let doc = InstanceDocOut {
        format_version: FORMAT_VERSION,
        name: &instance.name,
        cost_unit: COST_UNIT,
        provenance,
        layers: instance
            .layers
            .iter()
            .map(|l| LayerDocOut {
                layer_index: l.layer_index,
                teacher_index: l.teacher_index,
                ops: l
                    .ops
                    .iter()
                    .map(|o| OpDocOut {
                        op_id: &o.op_id,
                        score_delta: o.score_delta,
                        cost: o.cost,
                        tags: &o.tags,
                    })
                    .collect(),
            })
            .collect(),
    };
    // a validated instance only holds finite numbers
    to_pretty(&doc).expect("valid instance serializes")
}

// ---------------------------------------------------------------------------
// reports

pub fn write_report(report: &SolveReport) -> Result<String> {
    let doc = ReportDoc {
        instance: report.instance.clone(),
        budget_ms: report.budget_ms,
        overlap_limit: report.overlap_limit,
        solutions: report
            .solutions
            .iter()
            .map(|s| SolutionDoc {
                choices: s.selection.0.clone(),
                objective: s.objective,
                cost_ms: s.cost_ms,
                status: s.status,
                gap: s.gap,
            })
            .collect(),
        wall_time_s: report.wall_time_s,
    };
    to_pretty(&doc)
}

pub fn parse_report(text: &str) -> Result<SolveReport> {
    let doc: ReportDoc = serde_json::from_str(text).map_err(map_json_error)?;
    Ok(SolveReport {
        instance: doc.instance,
        budget_ms: doc.budget_ms,
        overlap_limit: doc.overlap_limit,
        solutions: doc
            .solutions
            .into_iter()
            .map(|s| ReportedSolution {
                selection: Selection(s.choices),
                objective: s.objective,
                cost_ms: s.cost_ms,
                status: s.status,
                gap: s.gap,
            })
            .collect(),
        wall_time_s: doc.wall_time_s,
    })
}

pub fn parse_measured(text: &str) -> Result<MeasuredScores> {
    let doc: MeasuredScores = serde_json::from_str(text).map_err(map_json_error)?;
    if let Some(e) = doc.entries.iter().find(|e| !e.measured.is_finite()) {
        return Err(Error::Schema(format!(
            "non-finite measured value for choices {:?}",
            e.choices.0
        )));
    }
    Ok(doc)
}

pub fn write_measured(scores: &MeasuredScores) -> Result<String> {
    to_pretty(scores)
}

// ---------------------------------------------------------------------------
// LUT aggregation and pool restriction

/// Median of the pooled values for each (layer, op, metric) key; even counts
/// take the lower of the two middle values.
pub fn aggregate_samples(samples: &[MeasurementSample]) -> Result<BTreeMap<LutKey, f64>> {
    let mut groups: BTreeMap<LutKey, Vec<f64>> = BTreeMap::new();
    for s in samples {
        if s.values.is_empty() {
            return Err(Error::EmptyGroup {
                layer: s.layer_index,
                op_id: s.op_id.clone(),
            });
        }
        if s.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "layer {} op {:?}: non-finite measurement",
                s.layer_index, s.op_id
            )));
        }
        groups
            .entry(LutKey {
                layer_index: s.layer_index,
                op_id: s.op_id.clone(),
                metric: s.metric,
            })
            .or_default()
            .extend_from_slice(&s.values);
    }
    Ok(groups
        .into_iter()
        .map(|(k, mut v)| {
            v.sort_by(f64::total_cmp);
            let m = v[(v.len() - 1) / 2];
            (k, m)
        })
        .collect())
}

/// Keeps only ops accepted by `keep`; the teacher op must survive in every layer.
pub fn restrict_pool<F>(instance: &SearchInstance, keep: F) -> Result<SearchInstance>
where
    F: Fn(&CandidateOp) -> bool,
{
    let dropped: Vec<usize> = instance
        .layers
        .iter()
        .enumerate()
        .filter(|(_, l)| !keep(l.teacher()))
        .map(|(i, _)| i)
        .collect();
    if !dropped.is_empty() {
        return Err(Error::TeacherDropped(dropped));
    }

    let layers = instance
        .layers
        .iter()
        .map(|l| {
            let mut teacher_index = 0;
            let mut ops = Vec::new();
            for (j, op) in l.ops.iter().enumerate() {
                if keep(op) {
                    if j == l.teacher_index {
                        teacher_index = ops.len();
                    }
                    ops.push(op.clone());
                }
            }
            LayerTable {
                layer_index: l.layer_index,
                ops,
                teacher_index,
            }
        })
        .collect();
    SearchInstance::new(instance.name.clone(), layers)
}

/// Teacher + identity pool. Layers without `identity_id` are an error unless
/// `allow_missing` is set, in which case they keep only the teacher.
pub fn zero_shot_pool(
    instance: &SearchInstance,
    identity_id: &str,
    allow_missing: bool,
) -> Result<SearchInstance> {
    let missing: Vec<usize> = instance
        .layers
        .iter()
        .enumerate()
        .filter(|(_, l)| l.position(identity_id).is_none())
        .map(|(i, _)| i)
        .collect();
    if !missing.is_empty() && !allow_missing {
        return Err(Error::InvalidInput(format!(
            "op {identity_id:?} missing at layer(s) {missing:?}"
        )));
    }
    let layers = instance
        .layers
        .iter()
        .map(|l| {
            let keep = |j: usize| j == l.teacher_index || l.ops[j].op_id == identity_id;
            let mut teacher_index = 0;
            let mut ops = Vec::new();
            for j in (0..l.ops.len()).filter(|&j| keep(j)) {
                if j == l.teacher_index {
                    teacher_index = ops.len();
                }
                ops.push(l.ops[j].clone());
            }
            LayerTable {
                layer_index: l.layer_index,
                ops,
                teacher_index,
            }
        })
        .collect();
    SearchInstance::new(format!("{}-zeroshot", instance.name), layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{random_instance, SyntheticConfig};

    const MINIMAL: &str = r#"{
        "format_version": 1, "name": "one", "cost_unit": "ms",
        "layers": [ { "layer_index": 0, "teacher_index": 0,
            "ops": [ { "op_id": "teacher", "score_delta": 0, "cost": 2.5 },
                     { "op_id": "identity", "score_delta": 0.4, "cost": 0.01, "tags": ["skip"] } ] } ]
    }"#;

    #[test]
    fn minimal_document() {
        let inst = parse_instance(MINIMAL).unwrap();
        assert_eq!(inst.num_layers(), 1);
        assert_eq!(inst.layers[0].ops.len(), 2);
        assert_eq!(inst.layers[0].ops[1].tags, vec!["skip"]);
    }

    #[test]
    fn absolute_scores_become_deltas() {
        let text = MINIMAL
            .replace("\"cost_unit\": \"ms\",", "\"cost_unit\": \"ms\", \"scores_absolute\": true,")
            .replace("\"score_delta\": 0,", "\"score_delta\": 1.25,")
            .replace("\"score_delta\": 0.4,", "\"score_delta\": 1.75,");
        let inst = parse_instance(&text).unwrap();
        assert_eq!(inst.layers[0].ops[0].score_delta, 0.0);
        assert_eq!(inst.layers[0].ops[1].score_delta, 0.5);
    }

    #[test]
    fn missing_teacher_index_names_the_field() {
        let text = MINIMAL.replace("\"teacher_index\": 0,", "");
        match parse_instance(&text) {
            Err(Error::Schema(msg)) => assert!(msg.contains("teacher_index"), "{msg}"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn syntax_error_has_position() {
        match parse_instance("{\n  \"name\": ,\n}") {
            Err(Error::Syntax { line, column, .. }) => {
                assert_eq!(line, 2);
                assert!(column > 0);
            }
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn invariant_violations_fail_parse() {
        let text = MINIMAL.replace("\"op_id\": \"identity\"", "\"op_id\": \"teacher\"");
        assert!(matches!(parse_instance(&text), Err(Error::Validation(v)) if v.len() == 1));
        let text = MINIMAL.replace("\"format_version\": 1", "\"format_version\": 2");
        assert!(matches!(parse_instance(&text), Err(Error::Schema(_))));
        let text = MINIMAL.replace("\"cost_unit\": \"ms\"", "\"cost_unit\": \"us\"");
        assert!(matches!(parse_instance(&text), Err(Error::Schema(_))));
    }

    #[test]
    fn writes_are_deterministic_and_canonical() {
        let mut inst = parse_instance(MINIMAL).unwrap();
        inst.layers[0].ops.push(CandidateOp::new("neg_zero", -0.0, 1.0));
        let a = write_instance(&inst);
        assert_eq!(a, write_instance(&inst));
        assert!(a.contains("\"score_delta\": 0,"), "{a}");
        assert!(!a.contains("-0"), "{a}");
        assert!(a.contains("\"cost\": 2.5"), "{a}");
        assert_eq!(parse_instance(&a).unwrap(), {
            inst.layers[0].ops[2].score_delta = 0.0;
            inst
        });
    }

    #[test]
    fn provenance_round_trips() {
        let inst = random_instance(&SyntheticConfig::new(3, 4), 5);
        let mut prov = Map::new();
        prov.insert("hardware".into(), Value::from("cpu"));
        prov.insert("batch_size".into(), Value::from(128));
        let text = write_instance_file(&inst, &prov);
        let back = parse_instance_file(&text).unwrap();
        assert_eq!(back.instance, inst);
        assert_eq!(back.provenance, prov);
    }

    fn sample(values: &[f64]) -> MeasurementSample {
        MeasurementSample {
            op_id: "op".into(),
            layer_index: 0,
            metric: Metric::LatencyMs,
            values: values.to_vec(),
        }
    }

    #[test]
    fn median_aggregation() {
        let one = |v: &[f64]| *aggregate_samples(&[sample(v)]).unwrap().values().next().unwrap();
        assert_eq!(one(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(one(&[4.0, 2.0]), 2.0);
        assert!(matches!(
            aggregate_samples(&[sample(&[])]),
            Err(Error::EmptyGroup { .. })
        ));
        assert!(aggregate_samples(&[sample(&[f64::NAN])]).is_err());
    }

    #[test]
    fn samples_with_same_key_are_pooled() {
        let mut other = sample(&[10.0]);
        other.metric = Metric::LossDelta;
        let agg = aggregate_samples(&[sample(&[5.0, 1.0]), sample(&[3.0]), other]).unwrap();
        assert_eq!(agg.len(), 2);
        let key = LutKey {
            layer_index: 0,
            op_id: "op".into(),
            metric: Metric::LatencyMs,
        };
        assert_eq!(agg[&key], 3.0);
    }

    #[test]
    fn restrict_to_teacher_only() {
        let inst = random_instance(&SyntheticConfig::new(4, 5), 1);
        let r = restrict_pool(&inst, |op| op.op_id == "teacher").unwrap();
        assert!(r.layers.iter().all(|l| l.ops.len() == 1 && l.teacher_index == 0));
    }

    #[test]
    fn restrict_dropping_teacher_names_layers() {
        let inst = random_instance(&SyntheticConfig::new(3, 4), 1);
        match restrict_pool(&inst, |op| op.op_id != "teacher") {
            Err(Error::TeacherDropped(layers)) => assert_eq!(layers, vec![0, 1, 2]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn restrict_remaps_teacher_index() {
        let mut inst = random_instance(&SyntheticConfig::new(2, 4), 3);
        inst.layers[1].ops.swap(0, 3);
        inst.layers[1].teacher_index = 3;
        let r = restrict_pool(&inst, |op| op.op_id == "teacher" || op.op_id == "identity").unwrap();
        assert_eq!(r.layers[1].teacher().op_id, "teacher");
        assert_eq!(r.layers[1].ops.len(), 2);
    }

    #[test]
    fn zero_shot_requires_identity_everywhere() {
        let mut inst = random_instance(&SyntheticConfig::new(3, 4), 2);
        let z = zero_shot_pool(&inst, "identity", false).unwrap();
        assert!(z.layers.iter().all(|l| l.ops.len() == 2));

        inst.layers[1].ops.retain(|o| o.op_id != "identity");
        let err = zero_shot_pool(&inst, "identity", false).unwrap_err();
        assert!(err.to_string().contains("[1]"), "{err}");
        let z = zero_shot_pool(&inst, "identity", true).unwrap();
        assert_eq!(z.pool_sizes(), vec![2, 1, 2]);
    }

    #[test]
    fn report_round_trip() {
        let report = SolveReport {
            instance: "x".into(),
            budget_ms: 12.5,
            overlap_limit: 7,
            solutions: vec![ReportedSolution {
                selection: Selection::new(vec![0, 2, 1]),
                objective: 0.125,
                cost_ms: 12.0,
                status: SolveStatus::Optimal,
                gap: 0.0,
            }],
            wall_time_s: 0.0,
        };
        let text = write_report(&report).unwrap();
        assert!(text.contains("\"status\": \"optimal\""));
        assert_eq!(parse_report(&text).unwrap(), report);
    }

    #[test]
    fn measured_file() {
        let text = r#"{"instance": "x", "entries": [{"choices": [0, 1], "measured": 0.5}]}"#;
        let m = parse_measured(text).unwrap();
        assert_eq!(m.entries[0].choices, Selection::new(vec![0, 1]));
        assert_eq!(parse_measured(&write_measured(&m).unwrap()).unwrap(), m);
    }
}
