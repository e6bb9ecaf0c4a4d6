//! Class-weighted soft-margin SVM over pair feature vectors.

mod ensemble;
mod smo;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pairs::FeatureVector;
use crate::relation::PairKey;

pub use ensemble::{binary_entropy, disagreement, ensemble_scores, EnsembleScore};

/// Stopping tolerance on the maximal KKT violation.
pub const SOLVER_TOLERANCE: f64 = 1e-3;
pub const DEFAULT_C: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Duplicate,
    NotDuplicate,
}

impl Label {
    pub fn from_bool(dup: bool) -> Label {
        if dup {
            Label::Duplicate
        } else {
            Label::NotDuplicate
        }
    }

    pub fn is_duplicate(self) -> bool {
        self == Label::Duplicate
    }

    /// Positive decision values mean duplicate; exactly zero does not.
    pub fn from_decision(decision: f64) -> Label {
        Label::from_bool(decision > 0.0)
    }

    fn sign(self) -> f64 {
        if self.is_duplicate() {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub pair: PairKey,
    pub features: Vec<f64>,
    pub label: Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Kernel {
    #[default]
    Linear,
    /// `gamma` defaults to `1 / num_features`.
    Gaussian { gamma: Option<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub kernel: Kernel,
    pub c: f64,
    pub tolerance: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            kernel: Kernel::Linear,
            c: DEFAULT_C,
            tolerance: SOLVER_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Body {
    /// Single-class training data: ±1 everywhere.
    Constant(f64),
    Linear { w: Vec<f64>, b: f64 },
    Gaussian { gamma: f64, support: Vec<Vec<f64>>, coef: Vec<f64>, b: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    arity: usize,
    /// Per-class penalty multipliers `(w₊, w₋)`.
    class_weights: (f64, f64),
    body: Body,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub pair: PairKey,
    pub label: Label,
    pub decision: f64,
}

/// `w_c = N / (2 n_c)`: reciprocal class cardinalities scaled so a balanced
/// set gets weight 1 on both classes.
pub fn class_weights(positives: usize, negatives: usize) -> (f64, f64) {
    let n = (positives + negatives) as f64;
    let w = |k: usize| if k == 0 { 0.0 } else { n / (2.0 * k as f64) };
    (w(positives), w(negatives))
}

fn gaussian(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    (-gamma * d2).exp()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Trains on `data`. Deterministic: no randomness is involved.
pub fn train(data: &[LabeledPair], cfg: &TrainConfig) -> Result<Model> {
    let first = data.first().ok_or(Error::EmptyTrainingSet)?;
    let arity = first.features.len();
    if let Some(bad) = data.iter().find(|d| d.features.len() != arity) {
        return Err(Error::Arity {
            expected: arity,
            got: bad.features.len(),
        });
    }
    if !(cfg.c > 0.0) {
        return Err(Error::Config(format!("penalty C must be positive, got {}", cfg.c)));
    }
    let positives = data.iter().filter(|d| d.label.is_duplicate()).count();
    let negatives = data.len() - positives;
    let class_weights = class_weights(positives, negatives);
    if positives == 0 || negatives == 0 {
        return Ok(Model {
            arity,
            class_weights,
            body: Body::Constant(first.label.sign()),
        });
    }

    let gamma = match cfg.kernel {
        Kernel::Linear => None,
        Kernel::Gaussian { gamma } => Some(gamma.unwrap_or(1.0 / arity.max(1) as f64)),
    };
    let n = data.len();
    let mut kernel = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let (a, b) = (&data[i].features, &data[j].features);
            let v = match gamma {
                None => dot(a, b),
                Some(g) => gaussian(g, a, b),
            };
            kernel[i * n + j] = v;
            kernel[j * n + i] = v;
        }
    }
    let y: Vec<f64> = data.iter().map(|d| d.label.sign()).collect();
    let upper: Vec<f64> = data
        .iter()
        .map(|d| {
            cfg.c * if d.label.is_duplicate() {
                class_weights.0
            } else {
                class_weights.1
            }
        })
        .collect();
    let sol = smo::solve(&kernel, &y, &upper, cfg.tolerance);

    let body = match gamma {
        None => {
            let mut w = vec![0.0; arity];
            for (d, (a, yi)) in data.iter().zip(sol.alpha.iter().zip(&y)) {
                for (wk, xk) in w.iter_mut().zip(&d.features) {
                    *wk += a * yi * xk;
                }
            }
            Body::Linear { w, b: -sol.rho }
        }
        Some(gamma) => {
            let (mut support, mut coef) = (Vec::new(), Vec::new());
            for (d, (a, yi)) in data.iter().zip(sol.alpha.iter().zip(&y)) {
                if *a > 0.0 {
                    support.push(d.features.clone());
                    coef.push(a * yi);
                }
            }
            Body::Gaussian { gamma, support, coef, b: -sol.rho }
        }
    };
    Ok(Model {
        arity,
        class_weights,
        body,
    })
}

impl Model {
    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn class_weights(&self) -> (f64, f64) {
        self.class_weights
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.body, Body::Constant(_))
    }

    /// Signed distance-like score; positive means duplicate.
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.arity {
            return Err(Error::Arity {
                expected: self.arity,
                got: x.len(),
            });
        }
        Ok(match &self.body {
            Body::Constant(c) => *c,
            Body::Linear { w, b } => dot(w, x) + b,
            Body::Gaussian { gamma, support, coef, b } => {
                support
                    .iter()
                    .zip(coef)
                    .map(|(s, c)| c * gaussian(*gamma, s, x))
                    .sum::<f64>()
                    + b
            }
        })
    }

    pub fn predict_one(&self, v: &FeatureVector) -> Result<Prediction> {
        let decision = self.decision(&v.features)?;
        Ok(Prediction {
            pair: v.pair,
            label: Label::from_decision(decision),
            decision,
        })
    }

    pub fn predict(&self, vectors: &[FeatureVector]) -> Result<Vec<Prediction>> {
        vectors.iter().map(|v| self.predict_one(v)).collect()
    }

    /// Human-readable parameter listing.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let (wp, wn) = self.class_weights;
        let _ = writeln!(out, "arity {}", self.arity);
        let _ = writeln!(out, "class_weights {wp} {wn}");
        match &self.body {
            Body::Constant(c) => {
                let _ = writeln!(out, "constant {c}");
            }
            Body::Linear { w, b } => {
                let _ = writeln!(out, "linear b {b}");
                let _ = writeln!(out, "w {}", join(w));
            }
            Body::Gaussian { gamma, support, coef, b } => {
                let _ = writeln!(out, "gaussian gamma {gamma} b {b} support {}", support.len());
                for (s, c) in support.iter().zip(coef) {
                    let _ = writeln!(out, "sv {c} {}", join(s));
                }
            }
        }
        out
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

/// F1 of the duplicate class. With no positives either present or
/// predicted the score is 1; any other 0/0 is 0.
pub fn f1_on_holdout(model: &Model, holdout: &[LabeledPair]) -> Result<f64> {
    if holdout.is_empty() {
        return Err(Error::EmptyHoldout);
    }
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for d in holdout {
        let predicted = Label::from_decision(model.decision(&d.features)?).is_duplicate();
        match (predicted, d.label.is_duplicate()) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(f1(tp, fp, fn_))
}

pub fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    if tp + fp + fn_ == 0 {
        return 1.0;
    }
    let denom = 2 * tp + fp + fn_;
    2.0 * tp as f64 / denom as f64
}
