//! Training history, metrics, ROC, prediction and trial-log outputs.

use std::fmt::Write as _;

use mimd_core::metrics::{ConfusionMatrix, CvSummary, FoldReport, RocPoint};
use mimd_core::trainer::{EpochRecord, Prediction};
use mimd_core::tuner::TrialResult;
use serde::{Deserialize, Serialize};

fn csv_text<T: Serialize>(header: &[&str], rows: impl IntoIterator<Item = T>) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).expect("in-memory CSV write");
    for r in rows {
        w.serialize(r).expect("in-memory CSV write");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("UTF-8 CSV")
}

pub fn history_csv(history: &[EpochRecord]) -> String {
    csv_text(
        &["epoch", "train_loss", "val_loss", "val_accuracy", "lr"],
        history
            .iter()
            .map(|e| (e.epoch, e.train_loss, e.val_loss, e.val_accuracy, e.lr)),
    )
}

pub fn roc_csv(points: &[RocPoint]) -> String {
    csv_text(
        &["fpr", "tpr", "threshold"],
        points.iter().map(|p| (p.fpr, p.tpr, p.threshold)),
    )
}

pub fn predictions_csv(preds: &[Prediction]) -> String {
    csv_text(
        &["subject_id", "label", "prob_ad", "predicted"],
        preds
            .iter()
            .map(|p| (&p.subject_id, p.label.as_str(), p.prob_ad, p.predicted.as_str())),
    )
}

pub fn trials_csv(log: &[TrialResult]) -> String {
    csv_text(
        &["trial_id", "bracket", "round", "resource", "score", "config"],
        log.iter().map(|t| {
            (
                t.trial_id,
                t.bracket,
                t.round,
                t.resource,
                t.score,
                serde_json::to_string(&t.config).expect("serializable config"),
            )
        }),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfusionJson {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl From<ConfusionMatrix> for ConfusionJson {
    fn from(c: ConfusionMatrix) -> Self {
        Self {
            tp: c.tp,
            fp: c.fp,
            tn: c.tn,
            fn_: c.fn_,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoldJson {
    pub fold: usize,
    pub accuracy: f64,
    pub auc: f64,
    pub confusion: ConfusionJson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryJson {
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub auc_mean: f64,
    pub auc_std: f64,
}

impl From<CvSummary> for SummaryJson {
    fn from(s: CvSummary) -> Self {
        Self {
            accuracy_mean: s.accuracy_mean,
            accuracy_std: s.accuracy_std,
            auc_mean: s.auc_mean,
            auc_std: s.auc_std,
        }
    }
}

/// `{folds: [...], summary: {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsJson {
    pub folds: Vec<FoldJson>,
    pub summary: SummaryJson,
}

impl MetricsJson {
    pub fn new(folds: &[FoldReport], summary: CvSummary) -> Self {
        Self {
            folds: folds
                .iter()
                .map(|f| FoldJson {
                    fold: f.fold,
                    accuracy: f.accuracy,
                    auc: f.auc,
                    confusion: f.confusion.into(),
                })
                .collect(),
            summary: summary.into(),
        }
    }

    pub fn accuracies(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.accuracy).collect()
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// A 400×400 plot with the chance diagonal drawn as a line and the curve as
/// the only polyline.
pub fn roc_svg(points: &[RocPoint], auc: f64, label: &str) -> String {
    const SIZE: f64 = 400.0;
    const PAD: f64 = 40.0;
    let span = SIZE - 2.0 * PAD;
    let mut coords = String::new();
    for (i, p) in points.iter().enumerate() {
        if i > 0 {
            coords.push(' ');
        }
        let x = PAD + p.fpr * span;
        let y = SIZE - PAD - p.tpr * span;
        write!(coords, "{x:.2},{y:.2}").expect("string write");
    }
    let title = xml_escape(&format!("{label} ROC (AUC = {auc:.3})"));
    format!(
        concat!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n",
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{s}\" height=\"{s}\" viewBox=\"0 0 {s} {s}\">\n",
            "<title>{title}</title>\n",
            "<rect x=\"{p}\" y=\"{p}\" width=\"{w}\" height=\"{w}\" fill=\"none\" stroke=\"#888\"/>\n",
            "<line x1=\"{p}\" y1=\"{b}\" x2=\"{b}\" y2=\"{p}\" stroke=\"#bbb\" stroke-dasharray=\"4 4\"/>\n",
            "<polyline points=\"{coords}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n",
            "<text x=\"{cx}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{title}</text>\n",
            "<text x=\"{cx}\" y=\"{xl}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">False positive rate</text>\n",
            "<text x=\"14\" y=\"{cx}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 14 {cx})\">True positive rate</text>\n",
            "</svg>\n"
        ),
        s = SIZE,
        p = PAD,
        w = span,
        b = SIZE - PAD,
        cx = SIZE / 2.0,
        xl = SIZE - 10.0,
        title = title,
        coords = coords,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use mimd_core::data::Class;
    use mimd_core::metrics::{auc_trapezoid, roc_points};

    #[test]
    fn trial_log_quotes_config() {
        let mut config = mimd_core::tuner::Config::new();
        config.insert("initial_lr".into(), 1e-4);
        config.insert("dropout".into(), 0.2);
        let log = [TrialResult {
            trial_id: 0,
            bracket: 2,
            round: 1,
            resource: 3,
            score: 0.5,
            config,
        }];
        assert_eq!(
            trials_csv(&log),
            "trial_id,bracket,round,resource,score,config\n0,2,1,3,0.5,\"{\"\"dropout\"\":0.2,\"\"initial_lr\"\":0.0001}\"\n"
        );
    }

    #[test]
    fn svg_has_one_polyline_and_auc() {
        let pts = roc_points(&[0.9, 0.1], &[Class::Ad, Class::Cn]).unwrap();
        let svg = roc_svg(&pts, auc_trapezoid(&pts), "fold 0");
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains("AUC = 1.000"));
    }

    #[test]
    fn metrics_json_keys() {
        let m = MetricsJson {
            folds: vec![FoldJson {
                fold: 0,
                accuracy: 1.0,
                auc: 1.0,
                confusion: ConfusionJson { tp: 1, fp: 0, tn: 1, fn_: 0 },
            }],
            summary: SummaryJson {
                accuracy_mean: 1.0,
                accuracy_std: 0.0,
                auc_mean: 1.0,
                auc_std: 0.0,
            },
        };
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.contains("\"fn\":0"));
        assert_eq!(serde_json::from_str::<MetricsJson>(&text).unwrap(), m);
    }
}
