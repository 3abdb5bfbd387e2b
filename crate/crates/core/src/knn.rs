//! Brute-force k-nearest-neighbor classification under Euclidean distance.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Offset added to distances before inverting them for weighted votes.
pub const INVERSE_DISTANCE_EPSILON: f64 = 1e-9;

const CONFIDENCE_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Vote {
    /// Every neighbor counts once.
    Uniform,
    /// Every neighbor counts `1 / (d + 1e-9)`.
    #[default]
    #[serde(rename = "inverse")]
    InverseDistance,
}

impl fmt::Display for Vote {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Vote::Uniform => "uniform",
            Vote::InverseDistance => "inverse",
        })
    }
}

impl FromStr for Vote {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(Vote::Uniform),
            "inverse" | "inverse-distance" => Ok(Vote::InverseDistance),
            other => Err(Error::validation(format!(
                "unknown vote scheme '{}'",
                other
            ))),
        }
    }
}

/// Euclidean distance between two points of equal dimension.
pub fn euclidean_distance(m: &[f64], n: &[f64]) -> Result<f64> {
    if m.len() != n.len() {
        return Err(Error::Dimension {
            expected: m.len(),
            got: n.len(),
        });
    }
    Ok(squared_distance(m, n).sqrt())
}

fn squared_distance(m: &[f64], n: &[f64]) -> f64 {
    m.iter().zip(n).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Per-feature min-max scaling fitted on the training matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MinMax {
    min: Vec<f64>,
    range: Vec<f64>,
}

impl MinMax {
    fn fit(rows: &[Vec<f64>]) -> Self {
        let p = rows[0].len();
        let mut min = vec![f64::INFINITY; p];
        let mut max = vec![f64::NEG_INFINITY; p];
        for r in rows {
            for j in 0..p {
                min[j] = min[j].min(r[j]);
                max[j] = max[j].max(r[j]);
            }
        }
        let range = min.iter().zip(&max).map(|(lo, hi)| hi - lo).collect();
        MinMax { min, range }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.min.iter().zip(&self.range))
            .map(|(v, (lo, r))| if *r > 0.0 { (v - lo) / r } else { 0.0 })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: String,
    /// Confidence per class, in the model's class order.
    pub confidences: IndexMap<String, f64>,
}

/// A fitted (stored) k-NN model.
#[derive(Debug, Clone)]
pub struct TrainedKnn {
    k: usize,
    points: Vec<Vec<f64>>,
    labels: Vec<usize>,
    classes: Vec<String>,
    vote: Vote,
    scaling: Option<MinMax>,
}

/// Compact description of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub k: usize,
    pub n: usize,
    pub p: usize,
    pub classes: Vec<String>,
    pub vote: Vote,
    pub min_max_scaling: bool,
}

impl TrainedKnn {
    /// Fit with classes ordered lexicographically.
    pub fn fit<S: AsRef<str>>(
        features: &[Vec<f64>],
        labels: &[S],
        k: usize,
        vote: Vote,
    ) -> Result<Self> {
        let mut classes: Vec<String> = labels.iter().map(|l| l.as_ref().to_string()).collect();
        classes.sort();
        classes.dedup();
        Self::fit_with_classes(features, labels, &classes, k, vote)
    }

    /// Fit with an explicit class order, which also fixes the confidence
    /// column order and the argmax tie-break. Classes absent from the training
    /// labels are allowed and simply never receive votes.
    pub fn fit_with_classes<S: AsRef<str>, C: AsRef<str>>(
        features: &[Vec<f64>],
        labels: &[S],
        classes: &[C],
        k: usize,
        vote: Vote,
    ) -> Result<Self> {
        let classes: Vec<String> = classes.iter().map(|c| c.as_ref().to_string()).collect();
        if features.is_empty() {
            return Err(Error::validation("no training examples"));
        }
        if features.len() != labels.len() {
            return Err(Error::validation(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        if k == 0 || k > features.len() {
            return Err(Error::validation(format!(
                "k must lie in 1..={}, got {}",
                features.len(),
                k
            )));
        }
        let p = features[0].len();
        if p == 0 {
            return Err(Error::validation("feature dimension is zero"));
        }
        for (i, row) in features.iter().enumerate() {
            if row.len() != p {
                return Err(Error::Dimension {
                    expected: p,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation(format!(
                    "training row {} is not finite",
                    i + 1
                )));
            }
        }
        for (i, c) in classes.iter().enumerate() {
            if classes[..i].contains(c) {
                return Err(Error::validation(format!("class '{}' listed twice", c)));
            }
        }
        let labels = labels
            .iter()
            .map(|l| {
                let l = l.as_ref();
                classes.iter().position(|c| c == l).ok_or_else(|| {
                    Error::validation(format!("label '{}' is not a declared class", l))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TrainedKnn {
            k,
            points: features.to_vec(),
            labels,
            classes,
            vote,
            scaling: None,
        })
    }

    /// Rescale every feature to [0, 1] using the training minima and maxima.
    pub fn with_min_max_scaling(mut self) -> Self {
        let scaler = MinMax::fit(&self.points);
        self.points = self.points.iter().map(|r| scaler.apply(r)).collect();
        self.scaling = Some(scaler);
        self
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn dimension(&self) -> usize {
        self.points[0].len()
    }

    pub fn summary(&self) -> ModelSummary {
        ModelSummary {
            k: self.k,
            n: self.points.len(),
            p: self.dimension(),
            classes: self.classes.clone(),
            vote: self.vote,
            min_max_scaling: self.scaling.is_some(),
        }
    }

    /// Indices and distances of the k nearest training points, closest first;
    /// equal distances keep training-row order.
    pub fn neighbors(&self, query: &[f64]) -> Result<Vec<(usize, f64)>> {
        if query.len() != self.dimension() {
            return Err(Error::Dimension {
                expected: self.dimension(),
                got: query.len(),
            });
        }
        let scaled;
        let query = match &self.scaling {
            Some(s) => {
                scaled = s.apply(query);
                &scaled[..]
            }
            None => query,
        };
        let mut dist: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (squared_distance(p, query), i))
            .collect();
        let by_distance =
            |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, by_distance);
            dist.truncate(self.k);
        }
        dist.sort_by(by_distance);
        Ok(dist.into_iter().map(|(d2, i)| (i, d2.sqrt())).collect())
    }

    pub fn predict(&self, query: &[f64]) -> Result<Prediction> {
        let mut votes = vec![0.0; self.classes.len()];
        for (i, d) in self.neighbors(query)? {
            votes[self.labels[i]] += match self.vote {
                Vote::Uniform => 1.0,
                Vote::InverseDistance => 1.0 / (d + INVERSE_DISTANCE_EPSILON),
            };
        }
        let total: f64 = votes.iter().sum();
        let confidences: IndexMap<String, f64> = self
            .classes
            .iter()
            .zip(&votes)
            .map(|(c, v)| (c.clone(), v / total))
            .collect();
        let label = argmax(&confidences).to_string();
        Ok(Prediction { label, confidences })
    }

    /// Predict every query; the output order matches the input order.
    pub fn predict_batch(&self, queries: &[Vec<f64>]) -> Result<Vec<Prediction>> {
        queries.par_iter().map(|q| self.predict(q)).collect()
    }
}

fn argmax(confidences: &IndexMap<String, f64>) -> &str {
    let mut best: Option<(&str, f64)> = None;
    for (c, &v) in confidences {
        match best {
            Some((_, b)) if v.partial_cmp(&b) != Some(Ordering::Greater) => {}
            _ => best = Some((c, v)),
        }
    }
    best.map(|(c, _)| c).unwrap_or_default()
}

/// The class with the highest confidence; ties go to the earliest class.
pub fn select_prediction(confidences: &IndexMap<String, f64>) -> Result<String> {
    if confidences.is_empty() {
        return Err(Error::validation("no confidences to choose from"));
    }
    if confidences.values().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::validation(
            "confidences must be finite and nonnegative",
        ));
    }
    let total: f64 = confidences.values().sum();
    if (total - 1.0).abs() > CONFIDENCE_SUM_TOLERANCE {
        return Err(Error::validation(format!(
            "confidences sum to {}, expected 1",
            total
        )));
    }
    Ok(argmax(confidences).to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conf(pairs: &[(&str, f64)]) -> IndexMap<String, f64> {
        pairs.iter().map(|(c, v)| (c.to_string(), *v)).collect()
    }

    #[test]
    fn distances() {
        assert_eq!(euclidean_distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(euclidean_distance(&[1.5, -2.0], &[1.5, -2.0]).unwrap(), 0.0);
        assert_eq!(
            euclidean_distance(&[1.0, 2.0, 3.0], &[4.0, 6.0, 3.0]).unwrap(),
            5.0
        );
        assert!(matches!(
            euclidean_distance(&[1.0], &[1.0, 2.0]),
            Err(Error::Dimension {
                expected: 1,
                got: 2
            })
        ));
    }

    #[test]
    fn select_from_confidences() {
        let row2 = conf(&[
            ("lying", 0.818),
            ("standing", 0.182),
            ("sitting", 0.0),
            ("walking", 0.0),
        ]);
        assert_eq!(select_prediction(&row2).unwrap(), "lying");
        let e = conf(&[("non-emergency", 0.811), ("emergency", 0.189)]);
        assert_eq!(select_prediction(&e).unwrap(), "non-emergency");
        let e = conf(&[("non-emergency", 0.220), ("emergency", 0.780)]);
        assert_eq!(select_prediction(&e).unwrap(), "emergency");
        let tie = conf(&[("b", 0.5), ("a", 0.5)]);
        assert_eq!(select_prediction(&tie).unwrap(), "b");
        assert!(select_prediction(&IndexMap::new()).is_err());
        assert!(select_prediction(&conf(&[("a", 0.5)])).is_err());
    }

    #[test]
    fn single_point_model() {
        let m = TrainedKnn::fit(&[vec![1.0, 1.0]], &["only"], 1, Vote::InverseDistance).unwrap();
        for q in [[0.0, 0.0], [100.0, -3.0], [1.0, 1.0]] {
            let p = m.predict(&q).unwrap();
            assert_eq!(p.label, "only");
            assert_eq!(p.confidences["only"], 1.0);
        }
    }

    #[test]
    fn exact_match_k1() {
        let x = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let m = TrainedKnn::fit(&x, &["a", "b", "c"], 1, Vote::Uniform).unwrap();
        let p = m.predict(&[1.0, 0.0]).unwrap();
        assert_eq!(p.label, "b");
        assert_eq!(p.confidences["b"], 1.0);
        assert_eq!(p.confidences["a"], 0.0);
    }

    #[test]
    fn zero_distance_dominates_inverse_vote() {
        let x = vec![vec![0.0], vec![1.0], vec![1.1]];
        let m = TrainedKnn::fit(&x, &["a", "b", "b"], 3, Vote::InverseDistance).unwrap();
        let p = m.predict(&[0.0]).unwrap();
        assert_eq!(p.label, "a");
        assert!(p.confidences["a"] > 0.999_999);
        let u = TrainedKnn::fit(&x, &["a", "b", "b"], 3, Vote::Uniform).unwrap();
        assert_eq!(u.predict(&[0.0]).unwrap().label, "b");
    }

    #[test]
    fn distance_ties_use_row_order() {
        let x = vec![vec![1.0], vec![-1.0], vec![1.0]];
        let m = TrainedKnn::fit(&x, &["x", "y", "z"], 1, Vote::Uniform).unwrap();
        assert_eq!(m.neighbors(&[0.0]).unwrap()[0].0, 0);
        let m = TrainedKnn::fit(&x, &["x", "y", "z"], 2, Vote::Uniform).unwrap();
        let ids: Vec<usize> = m
            .neighbors(&[0.0])
            .unwrap()
            .into_iter()
            .map(|(i, _)| i)
            .collect();
        assert_eq!(ids, [0, 1]);
    }

    #[test]
    fn fit_errors() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(TrainedKnn::fit(&x, &["a", "b"], 3, Vote::Uniform).is_err());
        assert!(TrainedKnn::fit(&x, &["a", "b"], 0, Vote::Uniform).is_err());
        assert!(TrainedKnn::fit(&x, &["a"], 1, Vote::Uniform).is_err());
        assert!(
            TrainedKnn::fit(&[vec![0.0], vec![1.0, 2.0]], &["a", "b"], 1, Vote::Uniform).is_err()
        );
        assert!(
            TrainedKnn::fit_with_classes(&x, &["a", "c"], &["a", "b"], 1, Vote::Uniform).is_err()
        );
        let m = TrainedKnn::fit(&x, &["a", "b"], 1, Vote::Uniform).unwrap();
        assert!(matches!(
            m.predict(&[0.0, 0.0]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn declared_class_order() {
        let x = vec![vec![0.0], vec![1.0]];
        let m = TrainedKnn::fit_with_classes(
            &x,
            &["sitting", "lying"],
            &["lying", "standing", "sitting"],
            1,
            Vote::Uniform,
        )
        .unwrap();
        let p = m.predict(&[0.1]).unwrap();
        let keys: Vec<&str> = p.confidences.keys().map(String::as_str).collect();
        assert_eq!(keys, ["lying", "standing", "sitting"]);
        assert_eq!(p.label, "sitting");
        assert_eq!(m.summary().classes.len(), 3);
    }

    #[test]
    fn min_max_scaling() {
        // x spans 0..1000 and y spans 0..1, so raw distances ignore y
        let x = vec![vec![0.0, 1.0], vec![1000.0, 0.0]];
        let labels = ["a", "b"];
        let raw = TrainedKnn::fit(&x, &labels, 1, Vote::Uniform).unwrap();
        assert_eq!(raw.predict(&[100.0, 0.0]).unwrap().label, "a");
        let scaled = raw.clone().with_min_max_scaling();
        // scaled query (0.1, 0): distance 1.005 to a, 0.9 to b
        assert_eq!(scaled.predict(&[100.0, 0.0]).unwrap().label, "b");
        assert!(scaled.summary().min_max_scaling);
        assert!(!raw.summary().min_max_scaling);
    }

    #[test]
    fn vote_parsing() {
        assert_eq!("uniform".parse::<Vote>().unwrap(), Vote::Uniform);
        assert_eq!("inverse".parse::<Vote>().unwrap(), Vote::InverseDistance);
        assert!("majority".parse::<Vote>().is_err());
        assert_eq!(
            serde_json::to_string(&Vote::InverseDistance).unwrap(),
            "\"inverse\""
        );
    }
}
