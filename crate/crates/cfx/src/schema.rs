//! Feature schemas, plausibility constraints, perturbation annotations, and
//! dataset i/o.
//!
//! An annotated dataset is a pair of files: a JSON annotation describing every
//! feature (kind, bounds, plausibility constraint, perturbation envelope)
//! together with the class names and target class, and an RFC-4180 CSV whose
//! columns follow the annotation order with the class label as the final
//! column. Categorical values are stored as strings in files and as dense ids
//! (`0..k-1`, in annotation order) in memory.

use std::fs;
use std::ops::Index;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default absolute tolerance used to decide whether a numerical feature
/// value counts as changed.
pub const DEFAULT_TOL_ABS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numerical,
    Categorical,
}

/// Plausibility constraint on interventions for one feature.
///
/// Categorical features only admit `None` and `Frozen`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    #[default]
    None,
    IncreaseOnly,
    DecreaseOnly,
    Frozen,
}

/// Value domain of a feature.
#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    Numerical { min: f64, max: f64 },
    Categorical { categories: Vec<String> },
}

/// What the world may do to a feature after an intervention is chosen.
///
/// For numerical features the envelope is `[-max_decrease, +max_increase]`
/// around the intended value; with `relative = true` the two bounds are
/// fractions (in `[0, 1]`) of the intended value's magnitude. For categorical
/// features it is the set of category ids the value may spontaneously move to.
#[derive(Clone, Debug, PartialEq)]
pub enum Perturbation {
    Numerical { max_decrease: f64, max_increase: f64, relative: bool },
    Categorical { reachable: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Feature {
    pub name: String,
    pub domain: Domain,
    pub constraint: Constraint,
    pub perturbation: Perturbation,
}

impl Feature {
    pub fn kind(&self) -> FeatureKind {
        match self.domain {
            Domain::Numerical { .. } => FeatureKind::Numerical,
            Domain::Categorical { .. } => FeatureKind::Categorical,
        }
    }

    pub fn is_numerical(&self) -> bool {
        matches!(self.domain, Domain::Numerical { .. })
    }

    pub fn min(&self) -> f64 {
        match self.domain {
            Domain::Numerical { min, .. } => min,
            Domain::Categorical { .. } => panic!("min() on categorical feature {}", self.name),
        }
    }

    pub fn max(&self) -> f64 {
        match self.domain {
            Domain::Numerical { max, .. } => max,
            Domain::Categorical { .. } => panic!("max() on categorical feature {}", self.name),
        }
    }

    /// Width of the numerical domain. Strictly positive by construction.
    pub fn range(&self) -> f64 {
        self.max() - self.min()
    }

    pub fn categories(&self) -> &[String] {
        match &self.domain {
            Domain::Categorical { categories } => categories,
            Domain::Numerical { .. } => panic!("categories() on numerical feature {}", self.name),
        }
    }

    pub fn n_categories(&self) -> usize {
        self.categories().len()
    }

    pub fn category_id(&self, name: &str) -> Option<usize> {
        self.categories().iter().position(|c| c == name)
    }

    /// Reachable category ids annotated for this feature (categorical only).
    pub fn reachable(&self) -> &[usize] {
        match &self.perturbation {
            Perturbation::Categorical { reachable } => reachable,
            Perturbation::Numerical { .. } => panic!("reachable() on numerical feature {}", self.name),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Schema {
    pub features: Vec<Feature>,
    pub class_names: Vec<String>,
    /// Id of the desired (target) class within `class_names`.
    pub target_class: usize,
}

impl Schema {
    /// Number of features.
    pub fn d(&self) -> usize {
        self.features.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_id(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == name)
    }

    pub fn target_name(&self) -> &str {
        &self.class_names[self.target_class]
    }

    /// Checks kinds, category ids, and numerical box membership.
    pub fn validate_instance(&self, x: &Instance) -> Result<()> {
        if x.len() != self.d() {
            return Err(Error::SchemaViolation(format!(
                "instance has {} values, schema has {} features",
                x.len(),
                self.d()
            )));
        }
        for (i, feature) in self.features.iter().enumerate() {
            match (&feature.domain, &x[i]) {
                (Domain::Numerical { min, max }, Value::Num(v)) => {
                    if !(*v >= *min && *v <= *max) {
                        return Err(Error::SchemaViolation(format!(
                            "feature {:?}: value {} outside [{}, {}]",
                            feature.name, v, min, max
                        )));
                    }
                }
                (Domain::Categorical { categories }, Value::Cat(c)) => {
                    if *c >= categories.len() {
                        return Err(Error::SchemaViolation(format!(
                            "feature {:?}: category id {} out of range (k = {})",
                            feature.name,
                            c,
                            categories.len()
                        )));
                    }
                }
                _ => {
                    return Err(Error::SchemaViolation(format!(
                        "feature {:?}: value kind does not match feature kind",
                        feature.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One feature value: a number or a dense category id.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Num(f64),
    Cat(usize),
}

impl Value {
    pub fn num(&self) -> f64 {
        match self {
            Value::Num(v) => *v,
            Value::Cat(_) => panic!("num() on categorical value"),
        }
    }

    pub fn cat(&self) -> usize {
        match self {
            Value::Cat(c) => *c,
            Value::Num(_) => panic!("cat() on numerical value"),
        }
    }
}

/// A feature vector in schema order.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub values: Vec<Value>,
}

impl Instance {
    pub fn new(values: Vec<Value>) -> Self {
        Instance { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn num(&self, i: usize) -> f64 {
        self.values[i].num()
    }

    pub fn cat(&self, i: usize) -> usize {
        self.values[i].cat()
    }
}

impl Index<usize> for Instance {
    type Output = Value;

    fn index(&self, i: usize) -> &Value {
        &self.values[i]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub schema: Schema,
    pub instances: Vec<Instance>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.instances.len()
    }

    /// Rows selected by index, in the given order. Shares the schema.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            instances: idx.iter().map(|&i| self.instances[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.schema.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

/// Formats a value the way data files store it: shortest round-trip decimal
/// text for numbers, the category name for categoricals.
pub fn value_to_string(feature: &Feature, value: &Value) -> String {
    match value {
        Value::Num(v) => format!("{}", v),
        Value::Cat(c) => feature.categories()[*c].clone(),
    }
}

// ---------------------------------------------------------------------------
// Wire format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct AnnotationFile {
    class_names: Vec<String>,
    target_class: String,
    features: Vec<FeatureFile>,
}

#[derive(Serialize, Deserialize)]
struct FeatureFile {
    name: String,
    kind: FeatureKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    categories: Option<Vec<String>>,
    #[serde(default)]
    constraint: Constraint,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    perturbation: Option<PerturbationFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PerturbationFile {
    Categorical {
        reachable_categories: Vec<String>,
    },
    Numerical {
        max_decrease: f64,
        max_increase: f64,
        #[serde(default)]
        relative: bool,
    },
}

fn resolve_feature(raw: FeatureFile) -> Result<Feature> {
    let violation = |msg: String| Error::SchemaViolation(format!("feature {:?}: {}", raw.name, msg));
    if raw.name.is_empty() {
        return Err(Error::SchemaViolation("feature with empty name".into()));
    }
    let domain = match raw.kind {
        FeatureKind::Numerical => {
            let (min, max) = match (raw.min, raw.max) {
                (Some(min), Some(max)) => (min, max),
                _ => return Err(violation("numerical feature needs min and max".into())),
            };
            if !(min.is_finite() && max.is_finite() && min < max) {
                return Err(violation(format!("invalid bounds [{}, {}]", min, max)));
            }
            if raw.categories.is_some() {
                return Err(violation("numerical feature must not declare categories".into()));
            }
            Domain::Numerical { min, max }
        }
        FeatureKind::Categorical => {
            let categories = raw
                .categories
                .ok_or_else(|| violation("categorical feature needs categories".into()))?;
            if categories.is_empty() {
                return Err(violation("empty category list".into()));
            }
            for (i, c) in categories.iter().enumerate() {
                if categories[..i].contains(c) {
                    return Err(violation(format!("duplicate category {:?}", c)));
                }
            }
            if raw.min.is_some() || raw.max.is_some() {
                return Err(violation("categorical feature must not declare min/max".into()));
            }
            Domain::Categorical { categories }
        }
    };
    if !domain_supports_constraint(&domain, raw.constraint) {
        return Err(violation(format!(
            "constraint {:?} is not valid for a categorical feature",
            raw.constraint
        )));
    }
    let perturbation = match (&domain, raw.perturbation) {
        (Domain::Numerical { .. }, None) => {
            Perturbation::Numerical { max_decrease: 0.0, max_increase: 0.0, relative: false }
        }
        (Domain::Numerical { .. }, Some(PerturbationFile::Numerical { max_decrease, max_increase, relative })) => {
            if !(max_decrease.is_finite() && max_increase.is_finite() && max_decrease >= 0.0 && max_increase >= 0.0)
            {
                return Err(violation(format!(
                    "perturbation bounds must be finite and non-negative, got -{} / +{}",
                    max_decrease, max_increase
                )));
            }
            if relative && (max_decrease > 1.0 || max_increase > 1.0) {
                return Err(violation("relative perturbation bounds must lie in [0, 1]".into()));
            }
            Perturbation::Numerical { max_decrease, max_increase, relative }
        }
        (Domain::Categorical { categories }, None) => {
            let _ = categories;
            Perturbation::Categorical { reachable: Vec::new() }
        }
        (Domain::Categorical { categories }, Some(PerturbationFile::Categorical { reachable_categories })) => {
            let mut reachable = Vec::with_capacity(reachable_categories.len());
            for name in &reachable_categories {
                let id = categories
                    .iter()
                    .position(|c| c == name)
                    .ok_or_else(|| violation(format!("unknown reachable category {:?}", name)))?;
                if reachable.contains(&id) {
                    return Err(violation(format!("duplicate reachable category {:?}", name)));
                }
                reachable.push(id);
            }
            Perturbation::Categorical { reachable }
        }
        _ => return Err(violation("perturbation kind does not match feature kind".into())),
    };
    Ok(Feature { name: raw.name, domain, constraint: raw.constraint, perturbation })
}

fn domain_supports_constraint(domain: &Domain, constraint: Constraint) -> bool {
    match domain {
        Domain::Numerical { .. } => true,
        Domain::Categorical { .. } => matches!(constraint, Constraint::None | Constraint::Frozen),
    }
}

fn feature_to_file(feature: &Feature) -> FeatureFile {
    let (min, max, categories) = match &feature.domain {
        Domain::Numerical { min, max } => (Some(*min), Some(*max), None),
        Domain::Categorical { categories } => (None, None, Some(categories.clone())),
    };
    let perturbation = match &feature.perturbation {
        Perturbation::Numerical { max_decrease, max_increase, relative } => {
            Some(PerturbationFile::Numerical {
                max_decrease: *max_decrease,
                max_increase: *max_increase,
                relative: *relative,
            })
        }
        Perturbation::Categorical { reachable } => Some(PerturbationFile::Categorical {
            reachable_categories: reachable.iter().map(|&id| feature.categories()[id].clone()).collect(),
        }),
    };
    FeatureFile {
        name: feature.name.clone(),
        kind: feature.kind(),
        min,
        max,
        categories,
        constraint: feature.constraint,
        perturbation,
    }
}

pub fn load_schema(annotation_path: impl AsRef<Path>) -> Result<Schema> {
    let path = annotation_path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: AnnotationFile =
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
    if raw.class_names.len() < 2 {
        return Err(Error::SchemaViolation("need at least two classes".into()));
    }
    for (i, c) in raw.class_names.iter().enumerate() {
        if raw.class_names[..i].contains(c) {
            return Err(Error::SchemaViolation(format!("duplicate class name {:?}", c)));
        }
    }
    let target_class = raw
        .class_names
        .iter()
        .position(|c| *c == raw.target_class)
        .ok_or_else(|| Error::SchemaViolation(format!("unknown target class {:?}", raw.target_class)))?;
    if raw.features.is_empty() {
        return Err(Error::SchemaViolation("annotation declares no features".into()));
    }
    let mut features = Vec::with_capacity(raw.features.len());
    for f in raw.features {
        let feature = resolve_feature(f)?;
        if features.iter().any(|g: &Feature| g.name == feature.name) {
            return Err(Error::SchemaViolation(format!("duplicate feature name {:?}", feature.name)));
        }
        features.push(feature);
    }
    Ok(Schema { features, class_names: raw.class_names, target_class })
}

pub fn save_schema(schema: &Schema, annotation_path: impl AsRef<Path>) -> Result<()> {
    let path = annotation_path.as_ref();
    let raw = AnnotationFile {
        class_names: schema.class_names.clone(),
        target_class: schema.target_name().to_string(),
        features: schema.features.iter().map(feature_to_file).collect(),
    };
    let mut text = serde_json::to_string_pretty(&raw).expect("annotation serialization");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads an annotated dataset from an annotation JSON and a data CSV.
///
/// The CSV header must list the feature names in annotation order followed by
/// one label column; every value is validated against the schema.
pub fn load_dataset(
    annotation_path: impl AsRef<Path>,
    data_path: impl AsRef<Path>,
) -> Result<Dataset> {
    let schema = load_schema(annotation_path)?;
    let path = data_path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::parse(path, e.to_string()))?;
    let headers = reader.headers().map_err(|e| Error::parse(path, e.to_string()))?.clone();
    if headers.len() != schema.d() + 1 {
        return Err(Error::SchemaViolation(format!(
            "data file has {} columns, expected {} features plus a label column",
            headers.len(),
            schema.d()
        )));
    }
    for (i, feature) in schema.features.iter().enumerate() {
        if headers.get(i) != Some(feature.name.as_str()) {
            return Err(Error::SchemaViolation(format!(
                "column {} is {:?}, expected feature {:?}",
                i,
                headers.get(i).unwrap_or(""),
                feature.name
            )));
        }
    }
    let mut instances = Vec::new();
    let mut labels = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::parse(path, e.to_string()))?;
        if record.len() != schema.d() + 1 {
            return Err(Error::parse(
                path,
                format!("row {}: {} fields, expected {}", row_idx + 1, record.len(), schema.d() + 1),
            ));
        }
        let mut values = Vec::with_capacity(schema.d());
        for (i, feature) in schema.features.iter().enumerate() {
            let field = record.get(i).unwrap();
            let value = match &feature.domain {
                Domain::Numerical { .. } => {
                    let v: f64 = field.trim().parse().map_err(|_| {
                        Error::parse(
                            path,
                            format!("row {}: feature {:?}: not a number: {:?}", row_idx + 1, feature.name, field),
                        )
                    })?;
                    Value::Num(v)
                }
                Domain::Categorical { .. } => {
                    let id = feature.category_id(field).ok_or_else(|| {
                        Error::SchemaViolation(format!(
                            "row {}: feature {:?}: unknown category {:?}",
                            row_idx + 1,
                            feature.name,
                            field
                        ))
                    })?;
                    Value::Cat(id)
                }
            };
            values.push(value);
        }
        let label_field = record.get(schema.d()).unwrap();
        let label = schema.class_id(label_field).ok_or_else(|| {
            Error::SchemaViolation(format!("row {}: unknown class {:?}", row_idx + 1, label_field))
        })?;
        let instance = Instance::new(values);
        schema.validate_instance(&instance).map_err(|e| match e {
            Error::SchemaViolation(msg) => {
                Error::SchemaViolation(format!("row {}: {}", row_idx + 1, msg))
            }
            other => other,
        })?;
        instances.push(instance);
        labels.push(label);
    }
    Ok(Dataset { schema, instances, labels })
}

/// Writes the annotation JSON and data CSV for a dataset.
///
/// Numbers are written as shortest round-trip decimal text, so a save/load
/// cycle reproduces the dataset exactly.
pub fn save_dataset(
    dataset: &Dataset,
    annotation_path: impl AsRef<Path>,
    data_path: impl AsRef<Path>,
) -> Result<()> {
    save_schema(&dataset.schema, annotation_path)?;
    let path = data_path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
    let schema = &dataset.schema;
    let mut header: Vec<&str> = schema.features.iter().map(|f| f.name.as_str()).collect();
    header.push("label");
    writer.write_record(&header).map_err(|e| Error::parse(path, e.to_string()))?;
    for (instance, &label) in dataset.instances.iter().zip(&dataset.labels) {
        let mut record: Vec<String> = Vec::with_capacity(schema.d() + 1);
        for (i, feature) in schema.features.iter().enumerate() {
            record.push(value_to_string(feature, &instance[i]));
        }
        record.push(schema.class_names[label].clone());
        writer.write_record(&record).map_err(|e| Error::parse(path, e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Changed/unchanged partition and plausibility
// ---------------------------------------------------------------------------

/// The partition of feature indices induced by an intervention: `c` holds the
/// features `z` changed relative to `x`, `k` the untouched rest.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    changed: Vec<bool>,
    pub c: Vec<usize>,
    pub k: Vec<usize>,
}

impl Partition {
    pub fn in_c(&self, i: usize) -> bool {
        self.changed[i]
    }
}

/// Whether a single feature value counts as changed: strict `|b - a| > tol`
/// for numericals, id inequality for categoricals.
pub fn value_changed(feature: &Feature, a: &Value, b: &Value, tol_abs: f64) -> bool {
    match feature.domain {
        Domain::Numerical { .. } => (b.num() - a.num()).abs() > tol_abs,
        Domain::Categorical { .. } => a.cat() != b.cat(),
    }
}

/// Splits feature indices into changed (`c`) and unchanged (`k`) sets.
pub fn induced_partition(schema: &Schema, x: &Instance, z: &Instance, tol_abs: f64) -> Partition {
    debug_assert_eq!(x.len(), schema.d());
    debug_assert_eq!(z.len(), schema.d());
    let mut changed = vec![false; schema.d()];
    let mut c = Vec::new();
    let mut k = Vec::new();
    for (i, feature) in schema.features.iter().enumerate() {
        if value_changed(feature, &x[i], &z[i], tol_abs) {
            changed[i] = true;
            c.push(i);
        } else {
            k.push(i);
        }
    }
    Partition { changed, c, k }
}

/// Componentwise plausibility of the intervention taking `x` to `z`.
///
/// Box membership is checked separately by [`Schema::validate_instance`]; this
/// only tests the declared constraints.
pub fn check_plausible(schema: &Schema, x: &Instance, z: &Instance) -> bool {
    schema.features.iter().enumerate().all(|(i, feature)| match feature.constraint {
        Constraint::None => true,
        Constraint::IncreaseOnly => z.num(i) >= x.num(i),
        Constraint::DecreaseOnly => z.num(i) <= x.num(i),
        Constraint::Frozen => match feature.domain {
            Domain::Numerical { .. } => z.num(i) == x.num(i),
            Domain::Categorical { .. } => z.cat(i) == x.cat(i),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy_schema() -> Schema {
        Schema {
            features: vec![
                Feature {
                    name: "a".into(),
                    domain: Domain::Numerical { min: 0.0, max: 10.0 },
                    constraint: Constraint::None,
                    perturbation: Perturbation::Numerical {
                        max_decrease: 1.0,
                        max_increase: 2.0,
                        relative: false,
                    },
                },
                Feature {
                    name: "b".into(),
                    domain: Domain::Categorical { categories: vec!["x".into(), "y".into(), "z".into()] },
                    constraint: Constraint::None,
                    perturbation: Perturbation::Categorical { reachable: vec![0, 1] },
                },
                Feature {
                    name: "c".into(),
                    domain: Domain::Numerical { min: -5.0, max: 5.0 },
                    constraint: Constraint::IncreaseOnly,
                    perturbation: Perturbation::Numerical {
                        max_decrease: 0.0,
                        max_increase: 0.5,
                        relative: false,
                    },
                },
            ],
            class_names: vec!["bad".into(), "good".into()],
            target_class: 1,
        }
    }

    fn inst(a: f64, b: usize, c: f64) -> Instance {
        Instance::new(vec![Value::Num(a), Value::Cat(b), Value::Num(c)])
    }

    #[test]
    fn partition_uses_strict_tolerance() {
        let schema = toy_schema();
        let x = inst(1.0, 0, 3.0);
        let z = inst(1.0 + 5e-10, 1, 2.0);
        let p = induced_partition(&schema, &x, &z, DEFAULT_TOL_ABS);
        assert_eq!(p.c, vec![1, 2]);
        assert_eq!(p.k, vec![0]);
        assert!(!p.in_c(0));
        assert!(p.in_c(1) && p.in_c(2));
    }

    #[test]
    fn partition_of_identical_instances_is_all_k() {
        let schema = toy_schema();
        let x = inst(1.0, 2, -4.5);
        let p = induced_partition(&schema, &x, &x, DEFAULT_TOL_ABS);
        assert!(p.c.is_empty());
        assert_eq!(p.k, vec![0, 1, 2]);
    }

    #[test]
    fn plausibility_cases() {
        let mut schema = toy_schema();
        let x = inst(5.0, 0, 0.0);
        assert!(check_plausible(&schema, &x, &x), "identity intervention is plausible");
        assert!(check_plausible(&schema, &x, &inst(9.0, 2, 1.0)));
        // c is increase-only
        assert!(!check_plausible(&schema, &x, &inst(5.0, 0, -0.1)));
        // freeze the categorical feature
        schema.features[1].constraint = Constraint::Frozen;
        assert!(!check_plausible(&schema, &x, &inst(5.0, 1, 0.0)));
        assert!(check_plausible(&schema, &x, &inst(4.0, 0, 0.0)));
    }

    #[test]
    fn validate_instance_rejects_out_of_domain_values() {
        let schema = toy_schema();
        assert!(schema.validate_instance(&inst(5.0, 1, 0.0)).is_ok());
        let err = schema.validate_instance(&inst(11.0, 1, 0.0)).unwrap_err();
        assert!(matches!(err, Error::SchemaViolation(_)));
        let err = schema.validate_instance(&inst(5.0, 3, 0.0)).unwrap_err();
        assert!(matches!(err, Error::SchemaViolation(_)));
        let bad_kind = Instance::new(vec![Value::Cat(0), Value::Cat(0), Value::Num(0.0)]);
        assert!(schema.validate_instance(&bad_kind).is_err());
    }

    fn write_files(dir: &std::path::Path, annotation: &str, data: &str) -> (std::path::PathBuf, std::path::PathBuf) {
        let ann = dir.join("toy.annotation.json");
        let dat = dir.join("toy.data.csv");
        fs::write(&ann, annotation).unwrap();
        fs::write(&dat, data).unwrap();
        (ann, dat)
    }

    const TOY_ANNOTATION: &str = r#"{
        "class_names": ["bad", "good"],
        "target_class": "good",
        "features": [
            {"name": "a", "kind": "numerical", "min": 0.0, "max": 10.0,
             "constraint": "none",
             "perturbation": {"max_decrease": 1.0, "max_increase": 2.0}},
            {"name": "b", "kind": "categorical", "categories": ["x", "y", "z"],
             "perturbation": {"reachable_categories": ["x", "y"]}}
        ]
    }"#;

    #[test]
    fn load_dataset_happy_path() {
        let dir = tempfile::tempdir().unwrap();
        let (ann, dat) =
            write_files(dir.path(), TOY_ANNOTATION, "a,b,label\n0.5,x,bad\n9.25,z,good\n");
        let ds = load_dataset(&ann, &dat).unwrap();
        assert_eq!(ds.n(), 2);
        assert_eq!(ds.schema.target_class, 1);
        assert_eq!(ds.instances[0], Instance::new(vec![Value::Num(0.5), Value::Cat(0)]));
        assert_eq!(ds.labels, vec![0, 1]);
        assert_eq!(ds.schema.features[1].reachable(), &[0, 1]);
    }

    #[test]
    fn load_dataset_rejects_bad_rows() {
        let dir = tempfile::tempdir().unwrap();
        let cases = [
            ("a,b,label\n11.0,x,bad\n", "out of range"),
            ("a,b,label\n1.0,q,bad\n", "unknown category"),
            ("a,b,label\n1.0,x,meh\n", "unknown class"),
            ("a,label\n1.0,bad\n", "missing column"),
        ];
        for (data, why) in cases {
            let (ann, dat) = write_files(dir.path(), TOY_ANNOTATION, data);
            let err = load_dataset(&ann, &dat).unwrap_err();
            assert!(
                matches!(err, Error::SchemaViolation(_) | Error::Parse { .. }),
                "{}: unexpected error {:?}",
                why,
                err
            );
        }
        let (ann, dat) = write_files(dir.path(), TOY_ANNOTATION, "a,b,label\nnope,x,bad\n");
        assert!(matches!(load_dataset(&ann, &dat).unwrap_err(), Error::Parse { .. }));
    }

    #[test]
    fn constraint_rejected_on_categorical() {
        let annotation = r#"{
            "class_names": ["n", "p"], "target_class": "p",
            "features": [
                {"name": "b", "kind": "categorical", "categories": ["x", "y"],
                 "constraint": "increase_only"}
            ]
        }"#;
        let dir = tempfile::tempdir().unwrap();
        let (ann, _) = write_files(dir.path(), annotation, "");
        assert!(matches!(load_schema(&ann).unwrap_err(), Error::SchemaViolation(_)));
    }

    #[test]
    fn save_load_roundtrip_is_exact() {
        let schema = toy_schema();
        let dataset = Dataset {
            schema,
            instances: vec![
                inst(0.1 + 0.2, 2, -4.999999999),
                inst(10.0, 0, 5.0),
                inst(1e-9, 1, 0.3333333333333333),
            ],
            labels: vec![0, 1, 0],
        };
        let dir = tempfile::tempdir().unwrap();
        let ann = dir.path().join("rt.annotation.json");
        let dat = dir.path().join("rt.data.csv");
        save_dataset(&dataset, &ann, &dat).unwrap();
        let loaded = load_dataset(&ann, &dat).unwrap();
        assert_eq!(loaded, dataset);
    }

    proptest! {
        #[test]
        fn roundtrip_random_numeric_values(values in proptest::collection::vec((0f64..=10f64, -5f64..=5f64), 1..40)) {
            let schema = toy_schema();
            let instances: Vec<Instance> =
                values.iter().map(|&(a, c)| inst(a, (a as usize) % 3, c)).collect();
            let labels: Vec<usize> = values.iter().map(|&(a, _)| (a > 5.0) as usize).collect();
            let dataset = Dataset { schema, instances, labels };
            let dir = tempfile::tempdir().unwrap();
            let ann = dir.path().join("p.annotation.json");
            let dat = dir.path().join("p.data.csv");
            save_dataset(&dataset, &ann, &dat).unwrap();
            let loaded = load_dataset(&ann, &dat).unwrap();
            prop_assert_eq!(loaded, dataset);
        }

        #[test]
        fn partition_is_a_partition(
            xa in 0f64..=10f64, xc in -5f64..=5f64,
            za in 0f64..=10f64, zc in -5f64..=5f64,
            xb in 0usize..3, zb in 0usize..3,
        ) {
            let schema = toy_schema();
            let x = inst(xa, xb, xc);
            let z = inst(za, zb, zc);
            let p = induced_partition(&schema, &x, &z, DEFAULT_TOL_ABS);
            let mut all: Vec<usize> = p.c.iter().chain(p.k.iter()).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, vec![0, 1, 2]);
            for i in 0..3 {
                let changed = value_changed(&schema.features[i], &x[i], &z[i], DEFAULT_TOL_ABS);
                prop_assert_eq!(p.in_c(i), changed);
                prop_assert_eq!(p.c.contains(&i), changed);
                prop_assert_eq!(p.k.contains(&i), !changed);
            }
        }
    }
}
