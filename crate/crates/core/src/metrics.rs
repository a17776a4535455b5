//! Edge-level detection metrics. Scores are anomaly scores: higher means more suspicious,
//! and an edge is flagged when its score is at least the threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Orientation note carried in every report.
pub const SCORE_ORIENTATION: &str = "anomaly score = 1 - decoder edge probability";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoredEdges {
    pub scores: Vec<f64>,
    /// `true` for malicious edges.
    pub labels: Vec<bool>,
}

impl ScoredEdges {
    pub fn new(scores: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} scores for {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument("non-finite anomaly score".into()));
        }
        Ok(Self { scores, labels })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub fn negatives(&self) -> usize {
        self.len() - self.positives()
    }

    pub fn push(&mut self, score: f64, label: bool) {
        self.scores.push(score);
        self.labels.push(label);
    }

    /// `(score, positives, negatives)` per distinct score, highest score first.
    fn groups(&self) -> Vec<(f64, usize, usize)> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]));
        let mut out: Vec<(f64, usize, usize)> = Vec::new();
        for i in order {
            let (s, l) = (self.scores[i], self.labels[i]);
            match out.last_mut() {
                Some(g) if g.0 == s => {
                    if l { g.1 += 1 } else { g.2 += 1 }
                }
                _ => out.push((s, l as usize, !l as usize)),
            }
        }
        out
    }
}

/// Precision and recall when flagging every score `>= threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// One point per distinct score, in decreasing threshold order.
pub fn pr_curve(s: &ScoredEdges) -> Result<Vec<PrPoint>> {
    let pos = s.positives();
    if pos == 0 {
        return Err(Error::Metric {
            metric: "average precision",
            requirement: "at least one positive label",
        });
    }
    let (mut tp, mut fp) = (0usize, 0usize);
    Ok(s.groups()
        .into_iter()
        .map(|(score, p, n)| {
            tp += p;
            fp += n;
            PrPoint {
                threshold: score,
                precision: tp as f64 / (tp + fp) as f64,
                recall: tp as f64 / pos as f64,
            }
        })
        .collect())
}

/// `sum_n (R_n - R_{n-1}) P_n` over a curve that starts at recall 0.
pub fn step_area(points: &[PrPoint]) -> f64 {
    let mut prev = 0.0;
    let mut ap = 0.0;
    for p in points {
        ap += (p.recall - prev) * p.precision;
        prev = p.recall;
    }
    ap
}

/// Step-wise average precision; tied scores form one threshold.
pub fn average_precision(s: &ScoredEdges) -> Result<f64> {
    Ok(step_area(&pr_curve(s)?))
}

/// Probability that a random positive outscores a random negative, ties counting half.
pub fn roc_auc(s: &ScoredEdges) -> Result<f64> {
    let (pos, neg) = (s.positives(), s.negatives());
    if pos == 0 || neg == 0 {
        return Err(Error::Metric {
            metric: "ROC AUC",
            requirement: "both labels present",
        });
    }
    // scan from the highest score: each negative beats nobody above it
    let mut pos_above = 0usize;
    let mut wins = 0.0;
    for (_, p, n) in s.groups() {
        wins += n as f64 * (pos_above as f64 + 0.5 * p as f64);
        pos_above += p;
    }
    Ok(wins / (pos as f64 * neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum ThresholdObjective {
    F1,
    /// Largest tolerated conventional false positive rate.
    FprTarget(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub tau: f64,
    /// All validation scores were equal.
    pub degenerate: bool,
}

/// Threshold learnt on validation scores.
///
/// Candidates are the distinct scores; the chosen one is moved to the midpoint of the
/// gap below it, which keeps every validation decision unchanged.
/// `F1` keeps the lowest threshold among equal F1 values; `FprTarget(x)` takes the lowest
/// threshold whose conventional FPR is at most `x`.
pub fn select_threshold(validation: &ScoredEdges, objective: ThresholdObjective) -> Result<Threshold> {
    let (pos, neg) = (validation.positives(), validation.negatives());
    if pos == 0 || neg == 0 {
        return Err(Error::Metric {
            metric: "threshold selection",
            requirement: "both labels present",
        });
    }
    let groups = validation.groups();
    if groups.len() == 1 {
        return Ok(Threshold {
            tau: groups[0].0,
            degenerate: true,
        });
    }
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut chosen = None;
    let mut best_f1 = f64::NEG_INFINITY;
    for (i, &(_, p, n)) in groups.iter().enumerate() {
        tp += p;
        fp += n;
        match objective {
            ThresholdObjective::F1 => {
                let f1 = 2.0 * tp as f64 / (2 * tp + fp + (pos - tp)) as f64;
                if f1 >= best_f1 {
                    best_f1 = f1;
                    chosen = Some(i);
                }
            }
            ThresholdObjective::FprTarget(x) => {
                if fp as f64 / neg as f64 <= x {
                    chosen = Some(i);
                }
            }
        }
    }
    // FPR only grows as the threshold drops, so no candidate means even the top
    // group is too noisy: flag nothing (finite, so reports stay valid JSON).
    let Some(i) = chosen else {
        return Ok(Threshold {
            tau: f64::MAX,
            degenerate: false,
        });
    };
    let tau = match groups.get(i + 1) {
        Some(&(lower, _, _)) => midpoint(groups[i].0, lower),
        None => groups[i].0,
    };
    Ok(Threshold {
        tau,
        degenerate: false,
    })
}

fn midpoint(hi: f64, lo: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    // adjacent floats: the midpoint may round onto `lo`
    if m > lo {
        m
    } else {
        hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// `TP / (TP + FP)`, 0 when nothing is flagged.
    pub precision: f64,
    pub recall: f64,
    /// `FP / (TP + FP)`, the formula as printed in the original evaluation.
    pub fpr_printed: f64,
    /// `FP / (FP + TN)`.
    pub fpr_conventional: f64,
    /// False when nothing was flagged and precision is reported as 0.
    pub precision_defined: bool,
}

pub fn confusion(s: &ScoredEdges, tau: f64) -> Confusion {
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&score, &label) in s.scores.iter().zip(&s.labels) {
        match (score >= tau, label) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Confusion {
        tp,
        fp,
        tn,
        fn_,
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        fpr_printed: ratio(fp, tp + fp),
        fpr_conventional: ratio(fp, fp + tn),
        precision_defined: tp + fp > 0,
    }
}

/// Fraction of malicious edges scored below `tau`, i.e. missed.
pub fn attack_success_rate(malicious_scores: &[f64], tau: f64) -> Result<f64> {
    if malicious_scores.is_empty() {
        return Err(Error::Metric {
            metric: "attack success rate",
            requirement: "at least one malicious edge",
        });
    }
    let missed = malicious_scores.iter().filter(|&&s| s < tau).count();
    Ok(missed as f64 / malicious_scores.len() as f64)
}

/// Serialised evaluation summary; all rates are fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsReport {
    pub ap: f64,
    pub auc: f64,
    pub precision: f64,
    pub recall: f64,
    pub fpr_printed: f64,
    pub fpr_conventional: f64,
    pub tau: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epm: Option<f64>,
    pub base_rate: f64,
    pub degenerate_threshold: bool,
    pub precision_defined: bool,
    pub score_orientation: String,
}

impl MetricsReport {
    /// Ranking metrics on `test`, decision metrics at a threshold learnt on `validation`.
    pub fn evaluate(test: &ScoredEdges, validation: &ScoredEdges, objective: ThresholdObjective) -> Result<Self> {
        let threshold = select_threshold(validation, objective)?;
        let c = confusion(test, threshold.tau);
        Ok(Self {
            ap: average_precision(test)?,
            auc: roc_auc(test)?,
            precision: c.precision,
            recall: c.recall,
            fpr_printed: c.fpr_printed,
            fpr_conventional: c.fpr_conventional,
            tau: threshold.tau,
            sr: None,
            epm: None,
            base_rate: test.positives() as f64 / test.len() as f64,
            degenerate_threshold: threshold.degenerate,
            precision_defined: c.precision_defined,
            score_orientation: SCORE_ORIENTATION.to_string(),
        })
    }
}
