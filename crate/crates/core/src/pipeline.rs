//! End-to-end evaluation runs: outlier filter, split, fit, predict, score.

use serde::{Deserialize, Serialize};

use crate::dataset::{
    remove_outliers, split_stratified, Feature, FeatureEncoder, FeatureSet, SensorRecord,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    confusion, prediction_table, ConfusionMatrix, MetricsReport, PredictionTable,
};
use crate::knn::{ModelSummary, Prediction, TrainedKnn, Vote};
use crate::labels::{Behavior, EMERGENCY, NON_EMERGENCY};

pub const BEHAVIOR_K: usize = 11;
pub const EMERGENCY_K: usize = 5;
pub const TRAIN_FRACTION: f64 = 0.75;
pub const OUTLIER_Z: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub seed: u64,
    pub train_fraction: f64,
    pub k: usize,
    pub vote: Vote,
    #[serde(with = "feature_set_str")]
    pub features: FeatureSet,
    /// `None` disables the outlier filter.
    pub outlier_z: Option<f64>,
    pub min_max_scaling: bool,
    /// Neighbors for the behavior model that feeds the emergency model's
    /// behavior feature.
    pub behavior_k: usize,
}

mod feature_set_str {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::dataset::FeatureSet;

    pub fn serialize<S: Serializer>(f: &FeatureSet, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&f.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<FeatureSet, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

impl EvalConfig {
    pub fn behavior_default() -> Self {
        EvalConfig {
            seed: 0,
            train_fraction: TRAIN_FRACTION,
            k: BEHAVIOR_K,
            vote: Vote::InverseDistance,
            features: FeatureSet::behavior_default(),
            outlier_z: Some(OUTLIER_Z),
            min_max_scaling: false,
            behavior_k: BEHAVIOR_K,
        }
    }

    pub fn emergency_default() -> Self {
        EvalConfig {
            k: EMERGENCY_K,
            features: FeatureSet::emergency_default(),
            ..Self::behavior_default()
        }
    }
}

/// Everything a run produces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub records_in: usize,
    pub records_after_outliers: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub model: ModelSummary,
    pub matrix: ConfusionMatrix,
    pub metrics: MetricsReport,
    pub table: PredictionTable,
}

fn filtered(records: &[SensorRecord], config: &EvalConfig) -> Result<Vec<SensorRecord>> {
    match config.outlier_z {
        Some(z) => remove_outliers(records, z),
        None => Ok(records.to_vec()),
    }
}

fn fit(
    encoder: &FeatureEncoder,
    train: &[SensorRecord],
    labels: &[String],
    classes: &[String],
    k: usize,
    config: &EvalConfig,
) -> Result<TrainedKnn> {
    let x = train
        .iter()
        .map(|r| encoder.encode(r, None))
        .collect::<Result<Vec<_>>>()?;
    let model = TrainedKnn::fit_with_classes(&x, labels, classes, k, config.vote)?;
    Ok(if config.min_max_scaling {
        model.with_min_max_scaling()
    } else {
        model
    })
}

fn behavior_label(r: &SensorRecord) -> Result<String> {
    r.behavior
        .map(|b| b.to_string())
        .ok_or_else(|| Error::validation("record without a behavior label"))
}

fn emergency_label(r: &SensorRecord) -> Result<String> {
    r.emergency_label()
        .map(str::to_string)
        .ok_or_else(|| Error::validation("record without an activity label"))
}

fn behavior_classes() -> Vec<String> {
    Behavior::ALL.iter().map(|b| b.to_string()).collect()
}

/// Behavior model: classify lying / standing / sitting / walking.
pub fn run_behavior(records: &[SensorRecord], config: &EvalConfig) -> Result<EvalOutcome> {
    if config.features.contains(Feature::Behavior) {
        return Err(Error::validation(
            "the behavior model cannot use the behavior label as a feature",
        ));
    }
    for r in records {
        behavior_label(r)?;
    }
    let clean = filtered(records, config)?;
    let split = split_stratified(&clean, config.train_fraction, config.seed, |r| {
        r.behavior.map(|b| b.to_string()).unwrap_or_default()
    })?;
    let classes = behavior_classes();
    let encoder = FeatureEncoder::fit(config.features.clone(), &split.train);
    let train_labels = split
        .train
        .iter()
        .map(behavior_label)
        .collect::<Result<Vec<_>>>()?;
    let model = fit(
        &encoder,
        &split.train,
        &train_labels,
        &classes,
        config.k,
        config,
    )?;

    let queries = split
        .test
        .iter()
        .map(|r| encoder.encode(r, None))
        .collect::<Result<Vec<_>>>()?;
    let predictions = model.predict_batch(&queries)?;
    let truth = split
        .test
        .iter()
        .map(behavior_label)
        .collect::<Result<Vec<_>>>()?;
    finish(
        records.len(),
        clean.len(),
        &split.train,
        truth,
        predictions,
        classes,
        &model,
        "behavior",
    )
}

/// Emergency model: binary emergency / non-emergency. When the feature set
/// includes the behavior index, test records get the behavior predicted by a
/// behavior model trained on the same training split; training records use
/// their ground-truth behavior.
pub fn run_emergency(records: &[SensorRecord], config: &EvalConfig) -> Result<EvalOutcome> {
    for r in records {
        emergency_label(r)?;
    }
    let clean = filtered(records, config)?;
    let split = split_stratified(&clean, config.train_fraction, config.seed, |r| {
        r.emergency_label().unwrap_or_default().to_string()
    })?;

    let test_behaviors: Vec<Option<Behavior>> = if config.features.contains(Feature::Behavior) {
        let enc = FeatureEncoder::fit(FeatureSet::behavior_default(), &split.train);
        let labels = split
            .train
            .iter()
            .map(behavior_label)
            .collect::<Result<Vec<_>>>()?;
        let bk = config.behavior_k.min(split.train.len());
        let behavior_model = fit(&enc, &split.train, &labels, &behavior_classes(), bk, config)?;
        split
            .test
            .iter()
            .map(|r| {
                let p = behavior_model.predict(&enc.encode(r, None)?)?;
                Ok(Some(p.label.parse::<Behavior>()?))
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        vec![None; split.test.len()]
    };

    let classes = vec![NON_EMERGENCY.to_string(), EMERGENCY.to_string()];
    let encoder = FeatureEncoder::fit(config.features.clone(), &split.train);
    let train_labels = split
        .train
        .iter()
        .map(emergency_label)
        .collect::<Result<Vec<_>>>()?;
    let model = fit(
        &encoder,
        &split.train,
        &train_labels,
        &classes,
        config.k,
        config,
    )?;
    let queries = split
        .test
        .iter()
        .zip(&test_behaviors)
        .map(|(r, b)| encoder.encode(r, *b))
        .collect::<Result<Vec<_>>>()?;
    let predictions = model.predict_batch(&queries)?;
    let truth = split
        .test
        .iter()
        .map(emergency_label)
        .collect::<Result<Vec<_>>>()?;
    finish(
        records.len(),
        clean.len(),
        &split.train,
        truth,
        predictions,
        classes,
        &model,
        "emergency",
    )
}

#[allow(clippy::too_many_arguments)]
fn finish(
    records_in: usize,
    records_after_outliers: usize,
    train: &[SensorRecord],
    truth: Vec<String>,
    predictions: Vec<Prediction>,
    classes: Vec<String>,
    model: &TrainedKnn,
    target: &str,
) -> Result<EvalOutcome> {
    let predicted: Vec<&str> = predictions.iter().map(|p| p.label.as_str()).collect();
    let matrix: ConfusionMatrix = confusion(&truth, &predicted, &classes)?;
    let metrics = matrix.report()?;
    let table = prediction_table(target, &classes, &truth, &predictions)?;
    Ok(EvalOutcome {
        records_in,
        records_after_outliers,
        train_size: train.len(),
        test_size: truth.len(),
        model: model.summary(),
        matrix,
        metrics,
        table,
    })
}
