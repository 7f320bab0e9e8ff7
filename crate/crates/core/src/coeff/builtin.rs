//! Catalogue of coefficient pairs with known behaviour under the three order conditions.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{CoeffError, CoefficientSet, FnCoefficients, Shape};
use crate::noise::{Mark, MarkMeasure};

/// Dimensions and named numeric parameters; unset dimensions take per-builtin defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuiltinParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marks: Option<Vec<Mark>>,
    #[serde(flatten)]
    pub values: BTreeMap<String, f64>,
}

impl BuiltinParams {
    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.values.insert(key.to_string(), value);
        self
    }

    pub fn dims(mut self, d: usize, m: usize, r0: f64) -> Self {
        self.d = Some(d);
        self.m = Some(m);
        self.r0 = Some(r0);
        self
    }
}

/// Catalogue entry with the expected verdict of the drift, diffusion and jump conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuiltinInfo {
    pub name: &'static str,
    pub summary: &'static str,
    pub params: &'static [&'static str],
    /// `[drift, diffusion, jump]`, `true` = condition holds.
    pub expected: [bool; 3],
}

pub const CATALOGUE: &[BuiltinInfo] = &[
    BuiltinInfo { name: "zero", summary: "all coefficients vanish", params: &[], expected: [true, true, true] },
    BuiltinInfo {
        name: "linear_drift",
        summary: "b^i = -a x^i(0), sigma^ij = s x^i(0), same for both equations",
        params: &["a", "s"],
        expected: [true, true, true],
    },
    BuiltinInfo {
        name: "shifted_drift_pair",
        summary: "b^i = -x^i(0), b_bar^i = -x^i(0) + c, sigma^ij = x^i(0)",
        params: &["c"],
        expected: [true, true, true],
    },
    BuiltinInfo {
        name: "delayed_drift",
        summary: "b^i = a x^i(-r0), no noise coefficients (default r0 = 1)",
        params: &["a"],
        expected: [true, true, true],
    },
    BuiltinInfo {
        name: "geometric_diffusion",
        summary: "b^i = mu x^i(0), sigma^ij = s x^i(0)",
        params: &["mu", "s"],
        expected: [true, true, true],
    },
    BuiltinInfo {
        name: "delayed_diffusion",
        summary: "sigma^ij = s x^i(-r0) for both equations (default r0 = 1)",
        params: &["s"],
        expected: [true, false, true],
    },
    BuiltinInfo {
        name: "constant_jump",
        summary: "gamma^i(z) = gamma_bar^i(z) = c * value(z), pure jump (default one mark, nu = 1)",
        params: &["c"],
        expected: [true, true, true],
    },
    BuiltinInfo {
        name: "negating_jump",
        summary: "gamma^i = -x^i(0), gamma_bar = 0 (default one mark, nu = 1)",
        params: &[],
        expected: [true, true, false],
    },
    BuiltinInfo { name: "abs_drift", summary: "b^i = |x^i(0)|", params: &[], expected: [true, true, true] },
    BuiltinInfo {
        name: "log_lipschitz_drift",
        summary: "b^i = x sqrt(log(e + 1/x^2)) with x = x^i(0), b = 0 at x = 0",
        params: &[],
        expected: [true, true, true],
    },
];

pub fn info(name: &str) -> Option<&'static BuiltinInfo> {
    CATALOGUE.iter().find(|b| b.name == name)
}

/// `x sqrt(log(e + 1/x^2))`, continuous at 0.
pub fn log_lipschitz(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (std::f64::consts::E + 1.0 / (x * x)).ln().sqrt()
    }
}

pub fn builtin(name: &str, params: &BuiltinParams) -> Result<CoefficientSet, CoeffError> {
    let entry = info(name).ok_or_else(|| CoeffError::UnknownName(name.to_string()))?;
    for key in params.values.keys() {
        if !entry.params.contains(&key.as_str()) {
            return Err(CoeffError::BadParams(format!("`{name}` has no parameter `{key}`")));
        }
    }
    let get = |key: &str, default: f64| -> Result<f64, CoeffError> {
        let v = params.values.get(key).copied().unwrap_or(default);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(CoeffError::BadParams(format!("`{key}` must be finite")))
        }
    };
    let delayed = matches!(name, "delayed_drift" | "delayed_diffusion");
    let jumpy = matches!(name, "constant_jump" | "negating_jump");
    let d = params.d.unwrap_or(1);
    let m = params.m.unwrap_or(1);
    let r0 = params.r0.unwrap_or(if delayed { 1.0 } else { 0.0 });
    if d == 0 {
        return Err(CoeffError::BadParams("d must be >= 1".into()));
    }
    if !(r0.is_finite() && r0 >= 0.0) {
        return Err(CoeffError::BadParams("r0 must be finite and >= 0".into()));
    }
    let marks = match &params.marks {
        Some(list) => MarkMeasure::new(list.clone()).map_err(|e| CoeffError::BadParams(e.to_string()))?,
        None if jumpy => MarkMeasure::single(1.0),
        None => MarkMeasure::empty(),
    };
    let shape = Shape { dim: d, noise_dim: m, r0, marks: marks.clone() };

    let set = match name {
        "zero" => CoefficientSet::symmetric(name, shape, FnCoefficients::zero().into_arc()),
        "linear_drift" => {
            let (a, s) = (get("a", 1.0)?, get("s", 0.5)?);
            let c = FnCoefficients::zero()
                .with_drift(move |_, x, out| {
                    for (o, v) in out.iter_mut().zip(x.head()) {
                        *o = -a * v;
                    }
                })
                .with_diffusion(move |_, x, out| diagonal_rows(x.head(), m, s, out));
            CoefficientSet::symmetric(name, shape, c.into_arc())
        }
        "shifted_drift_pair" => {
            let c = get("c", 1.0)?;
            let sigma =
                move |_: f64, x: &crate::segment::Segment, out: &mut [f64]| diagonal_rows(x.head(), m, 1.0, out);
            let plain = FnCoefficients::zero()
                .with_drift(|_, x, out| {
                    for (o, v) in out.iter_mut().zip(x.head()) {
                        *o = -v;
                    }
                })
                .with_diffusion(sigma);
            let barred = FnCoefficients::zero()
                .with_drift(move |_, x, out| {
                    for (o, v) in out.iter_mut().zip(x.head()) {
                        *o = -v + c;
                    }
                })
                .with_diffusion(sigma);
            CoefficientSet::new(name, shape, plain.into_arc(), barred.into_arc())
        }
        "delayed_drift" => {
            let a = get("a", 1.0)?;
            let c = FnCoefficients::zero().with_drift(move |_, x, out| {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = a * x.node(0)[i];
                }
            });
            CoefficientSet::symmetric(name, shape, c.into_arc())
        }
        "geometric_diffusion" => {
            let (mu, s) = (get("mu", 0.0)?, get("s", 1.0)?);
            let c = FnCoefficients::zero()
                .with_drift(move |_, x, out| {
                    for (o, v) in out.iter_mut().zip(x.head()) {
                        *o = mu * v;
                    }
                })
                .with_diffusion(move |_, x, out| diagonal_rows(x.head(), m, s, out));
            CoefficientSet::symmetric(name, shape, c.into_arc())
        }
        "delayed_diffusion" => {
            let s = get("s", 1.0)?;
            let c = FnCoefficients::zero().with_diffusion(move |_, x, out| diagonal_rows(x.node(0), m, s, out));
            CoefficientSet::symmetric(name, shape, c.into_arc())
        }
        "constant_jump" => {
            let c = get("c", 1.0)?;
            let values: Arc<Vec<f64>> = Arc::new(marks.marks().iter().map(|mk| mk.value).collect());
            let g = FnCoefficients::zero().with_jump(move |_, _, k, out| out.fill(c * values[k]));
            CoefficientSet::symmetric(name, shape, g.into_arc())
        }
        "negating_jump" => {
            let plain = FnCoefficients::zero().with_jump(|_, x, _, out| {
                for (o, v) in out.iter_mut().zip(x.head()) {
                    *o = -v;
                }
            });
            CoefficientSet::new(name, shape, plain.into_arc(), FnCoefficients::zero().into_arc())
        }
        "abs_drift" => {
            let c = FnCoefficients::zero().with_drift(|_, x, out| {
                for (o, v) in out.iter_mut().zip(x.head()) {
                    *o = v.abs();
                }
            });
            CoefficientSet::symmetric(name, shape, c.into_arc())
        }
        "log_lipschitz_drift" => {
            let c = FnCoefficients::zero().with_drift(|_, x, out| {
                for (o, v) in out.iter_mut().zip(x.head()) {
                    *o = log_lipschitz(*v);
                }
            });
            CoefficientSet::symmetric(name, shape, c.into_arc())
        }
        _ => unreachable!("catalogue and constructor out of sync"),
    };
    Ok(set)
}

/// `out[i][j] = s * v[i]` for every column `j`.
fn diagonal_rows(v: &[f64], m: usize, s: f64, out: &mut [f64]) {
    for (i, row) in out.chunks_mut(m.max(1)).enumerate() {
        row.fill(s * v[i]);
    }
}
