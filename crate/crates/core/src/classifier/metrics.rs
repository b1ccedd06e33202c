use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::model::{Classifier, LabeledFace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelAccuracy {
    pub faces: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub micro_accuracy: f64,
    pub per_label: BTreeMap<String, LabelAccuracy>,
    /// Correlation between a label's test face count and its accuracy;
    /// absent with fewer than two labels or a constant series.
    pub frequency_accuracy_r: Option<f64>,
}

/// Pearson's r, or `None` when it is undefined.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Micro accuracy, per-label accuracy, and the frequency/accuracy
/// correlation over labels present in `test`.
pub fn evaluate_accuracy<C: Classifier + ?Sized>(model: &C, test: &[LabeledFace]) -> AccuracyReport {
    let space = model.label_space();
    let mut tally: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for face in test {
        let hit = model.predict_label(&face.x) == face.label;
        let e = tally.entry(face.label).or_default();
        e.0 += 1;
        e.1 += usize::from(hit);
    }
    let total: usize = tally.values().map(|t| t.0).sum();
    let correct: usize = tally.values().map(|t| t.1).sum();
    let per_label: BTreeMap<String, LabelAccuracy> = tally
        .iter()
        .map(|(&y, &(faces, correct))| {
            (
                space.name(y).to_string(),
                LabelAccuracy {
                    faces,
                    correct,
                    accuracy: correct as f64 / faces as f64,
                },
            )
        })
        .collect();
    let freq: Vec<f64> = per_label.values().map(|l| l.faces as f64).collect();
    let acc: Vec<f64> = per_label.values().map(|l| l.accuracy).collect();
    AccuracyReport {
        micro_accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
        per_label,
        frequency_accuracy_r: pearson(&freq, &acc),
    }
}
