//! JSON coefficient files.
//!
//! Either a builtin reference
//!
//! ```json
//! { "builtin": "shifted_drift_pair", "params": { "c": 1.0 } }
//! ```
//!
//! or expression entries
//!
//! ```json
//! {
//!   "d": 1, "m": 1, "r0": 0.0,
//!   "marks": [{ "label": "z1", "weight": 2.0, "value": 1.0 }],
//!   "b": ["-x[1](0)"],
//!   "sigma": [["x[1](0)"]],
//!   "gamma": { "z1": ["1"] },
//!   "barred": { "b": ["-x[1](0) + 1"] }
//! }
//! ```
//!
//! Missing unbarred entries are zero; missing barred entries copy the unbarred ones.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::expr::{parse_expr, Expr, ExprContext};
use super::{builtin, BuiltinParams, CoeffError, CoefficientSet, Coefficients, Shape};
use crate::noise::{Mark, MarkMeasure};
use crate::segment::Segment;

/// A list of entry expressions; a single nested row `[[..]]` is accepted too.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExprList {
    Flat(Vec<String>),
    Nested(Vec<Vec<String>>),
}

impl ExprList {
    fn flatten(&self) -> Vec<String> {
        match self {
            ExprList::Flat(v) => v.clone(),
            ExprList::Nested(rows) => rows.iter().flatten().cloned().collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HalfConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<ExprList>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<BTreeMap<String, Vec<String>>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CoefficientConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<BuiltinParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub marks: Vec<Mark>,
    #[serde(flatten)]
    pub plain: HalfConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub barred: Option<HalfConfig>,
}

impl CoefficientConfig {
    pub fn from_json(text: &str) -> Result<Self, CoeffError> {
        serde_json::from_str(text).map_err(|e| CoeffError::Config(e.to_string()))
    }

    pub fn build(&self) -> Result<CoefficientSet, CoeffError> {
        if let Some(name) = &self.builtin {
            return builtin(name, &self.params.clone().unwrap_or_default());
        }
        let dim = self.d.ok_or_else(|| CoeffError::Config("missing `d`".into()))?;
        let noise_dim = self.m.unwrap_or(1);
        let r0 = self.r0.unwrap_or(0.0);
        if dim == 0 || !(r0.is_finite() && r0 >= 0.0) {
            return Err(CoeffError::Config("need d >= 1 and finite r0 >= 0".into()));
        }
        let marks = MarkMeasure::new(self.marks.clone()).map_err(|e| CoeffError::Config(e.to_string()))?;
        let shape = Shape { dim, noise_dim, r0, marks };
        let plain = ExprCoefficients::compile(&shape, &self.plain, None)?;
        let barred = match &self.barred {
            Some(h) => ExprCoefficients::compile(&shape, h, Some(&plain))?,
            None => plain.clone(),
        };
        let label = self.label.clone().unwrap_or_else(|| "expression".into());
        Ok(CoefficientSet::new(label, shape, Arc::new(plain), Arc::new(barred)))
    }
}

/// Coefficients compiled from expression entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprCoefficients {
    noise_dim: usize,
    drift: Vec<Expr>,
    diffusion: Vec<Expr>,
    /// Per mark, `d` entries.
    jump: Vec<Vec<Expr>>,
    mark_values: Vec<f64>,
}

impl ExprCoefficients {
    pub fn compile(shape: &Shape, half: &HalfConfig, fallback: Option<&ExprCoefficients>) -> Result<Self, CoeffError> {
        let d = shape.dim;
        let ctx = ExprContext { dim: d, r0: shape.r0, allow_mark: false };
        let jctx = ExprContext { allow_mark: true, ..ctx };
        let parse_all = |texts: &[String], ctx: &ExprContext| -> Result<Vec<Expr>, CoeffError> {
            texts.iter().map(|s| parse_expr(s, ctx)).collect()
        };
        let zeros = |n: usize| vec![Expr::Const(0.0); n];

        let drift = match &half.b {
            Some(list) => {
                let v = parse_all(&list.flatten(), &ctx)?;
                if v.len() != d {
                    return Err(CoeffError::Config(format!("b has {} entries, expected {d}", v.len())));
                }
                v
            }
            None => fallback.map_or_else(|| zeros(d), |f| f.drift.clone()),
        };
        let diffusion = match &half.sigma {
            Some(rows) => {
                if rows.len() != d || rows.iter().any(|r| r.len() != shape.noise_dim) {
                    return Err(CoeffError::Config(format!("sigma must be {d} rows of {} entries", shape.noise_dim)));
                }
                parse_all(&rows.concat(), &ctx)?
            }
            None => fallback.map_or_else(|| zeros(d * shape.noise_dim), |f| f.diffusion.clone()),
        };
        let jump = match &half.gamma {
            Some(map) => {
                for label in map.keys() {
                    if shape.marks.index_of(label).is_none() {
                        return Err(CoeffError::Config(format!("gamma refers to unknown mark `{label}`")));
                    }
                }
                shape
                    .marks
                    .marks()
                    .iter()
                    .map(|mk| match map.get(&mk.label) {
                        Some(texts) if texts.len() == d => parse_all(texts, &jctx),
                        Some(texts) => Err(CoeffError::Config(format!(
                            "gamma[{}] has {} entries, expected {d}",
                            mk.label,
                            texts.len()
                        ))),
                        None => Ok(zeros(d)),
                    })
                    .collect::<Result<Vec<_>, _>>()?
            }
            None => fallback.map_or_else(|| vec![zeros(d); shape.marks.len()], |f| f.jump.clone()),
        };
        Ok(ExprCoefficients {
            noise_dim: shape.noise_dim,
            drift,
            diffusion,
            jump,
            mark_values: shape.marks.marks().iter().map(|m| m.value).collect(),
        })
    }
}

impl Coefficients for ExprCoefficients {
    fn drift(&self, t: f64, x: &Segment, out: &mut [f64]) {
        for (o, e) in out.iter_mut().zip(&self.drift) {
            *o = e.eval(t, x, 0.0);
        }
    }

    fn diffusion(&self, t: f64, x: &Segment, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.drift.len() * self.noise_dim);
        for (o, e) in out.iter_mut().zip(&self.diffusion) {
            *o = e.eval(t, x, 0.0);
        }
    }

    fn jump(&self, t: f64, x: &Segment, mark: usize, out: &mut [f64]) {
        let z = self.mark_values[mark];
        for (o, e) in out.iter_mut().zip(&self.jump[mark]) {
            *o = e.eval(t, x, z);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expression_config_builds_both_halves() {
        let text = r#"{
            "d": 1, "m": 1, "r0": 1.0,
            "marks": [{"label": "up", "weight": 2.0, "value": 0.5}],
            "b": [["-x[1](0) + x[1](-1)"]],
            "sigma": [["x[1](0)"]],
            "gamma": {"up": ["z * 2"]},
            "barred": {"b": ["1"]}
        }"#;
        let cs = CoefficientConfig::from_json(text).unwrap().build().unwrap();
        let x = Segment::new(1, 1.0, vec![(-1.0, vec![3.0]), (0.0, vec![1.0])], vec![]).unwrap();
        assert_eq!(cs.plain_equation().drift_vec(0.0, &x), vec![2.0]);
        assert_eq!(cs.barred_equation().drift_vec(0.0, &x), vec![1.0]);
        assert_eq!(cs.barred_equation().diffusion_vec(0.0, &x), vec![1.0]);
        assert_eq!(cs.plain_equation().jump_vec(0.0, &x, 0), vec![1.0]);
        assert_eq!(cs.shape.marks.total_mass(), 2.0);
    }

    #[test]
    fn builtin_reference() {
        let cs = CoefficientConfig::from_json(r#"{"builtin": "delayed_diffusion", "params": {"r0": 2.0}}"#)
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(cs.shape.r0, 2.0);
        assert_eq!(cs.label, "delayed_diffusion");
    }

    #[test]
    fn shape_errors() {
        let bad = [
            r#"{"m": 1, "b": ["0"]}"#,
            r#"{"d": 2, "b": ["0"]}"#,
            r#"{"d": 1, "m": 2, "sigma": [["0"]]}"#,
            r#"{"d": 1, "gamma": {"nope": ["1"]}}"#,
            r#"{"d": 1, "b": ["x[1](-1)"]}"#,
        ];
        for text in bad {
            assert!(CoefficientConfig::from_json(text).unwrap().build().is_err(), "{text}");
        }
        assert!(CoefficientConfig::from_json("{ not json").is_err());
    }
}
