//! Problem files.
//!
//! ```json
//! {"n":1,"m":1,"T":1.0,"delta":0.5,
//!  "coefficients":{"A":[[0]],"Abar":[[0]],"B":[[1]],"Bbar":[[0]],
//!                  "C":[[1]],"Cbar":[[0]],"D":[[0]],"Dbar":[[0]]},
//!  "weights":{"Q":[[0]],"Qbar":[[0]],"R":[[1]],"Rbar":[[0]],"G":[[0]],"Gbar":[[1]]}}
//! ```
//!
//! A matrix entry is nested arrays, or one of
//! `{"kind":"exp_discount","lambda":λ,"base":M}` (e^{−λ(s−t)}·M; for
//! functions of one time, e^{−λ(T−t)}·M), `"hyperbolic_discount"`
//! (M/(1+λ(s−t))), `{"kind":"samples","times":[..],"values":[M,..]}` and
//! `{"kind":"polynomial","coeffs":[M0,M1,..]}`. Two-time samples and
//! polynomials take an optional `"axis":"s"|"t"` (default `s`). Bar entries may
//! be omitted and default to zero. An optional `"monotone": true` requests
//! the monotonicity check.

use serde_json::Value;

use crate::error::{MflqError, Result};
use crate::func::{Discount, MatrixFn, TwoTimeMatrixFn};
use crate::linalg::{zeros, Mat};
use crate::problem::ProblemData;

fn perr(msg: impl Into<String>) -> MflqError {
    MflqError::Parse(msg.into())
}

fn num(v: &Value, what: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| perr(format!("{what}: expected a number")))
}

/// Nested arrays (or a bare number for 1×1) to a matrix.
pub fn parse_matrix(v: &Value, name: &str) -> Result<Mat> {
    if let Some(x) = v.as_f64() {
        return Ok(Mat::from_element(1, 1, x));
    }
    let rows = v
        .as_array()
        .ok_or_else(|| perr(format!("{name}: expected a matrix")))?;
    if rows.is_empty() {
        return Ok(zeros(0, 0));
    }
    let mut data = Vec::new();
    let mut cols = None;
    for r in rows {
        let r = r
            .as_array()
            .ok_or_else(|| perr(format!("{name}: rows must be arrays")))?;
        if *cols.get_or_insert(r.len()) != r.len() {
            return Err(perr(format!("{name}: ragged rows")));
        }
        for x in r {
            data.push(num(x, name)?);
        }
    }
    let c = cols.unwrap_or(0);
    Ok(Mat::from_row_slice(rows.len(), c, &data))
}

fn kernel(obj: &Value, kind: &str, name: &str) -> Result<(Discount, Mat)> {
    let lambda = num(obj.get("lambda").unwrap_or(&Value::Null), &format!("{name}.lambda"))?;
    let base = parse_matrix(obj.get("base").unwrap_or(&Value::Null), &format!("{name}.base"))?;
    let k = match kind {
        "exp_discount" => Discount::Exponential { lambda },
        _ => Discount::Hyperbolic { lambda },
    };
    Ok((k, base))
}

fn matrix_list(v: Option<&Value>, name: &str) -> Result<Vec<Mat>> {
    v.and_then(|x| x.as_array())
        .ok_or_else(|| perr(format!("{name}: expected a list of matrices")))?
        .iter()
        .map(|m| parse_matrix(m, name))
        .collect()
}

fn time_list(v: Option<&Value>, name: &str) -> Result<Vec<f64>> {
    v.and_then(|x| x.as_array())
        .ok_or_else(|| perr(format!("{name}: expected a list of times")))?
        .iter()
        .map(|x| num(x, name))
        .collect()
}

fn one_time_body(obj: &Value, kind: &str, name: &str, horizon: f64) -> Result<MatrixFn> {
    match kind {
        "exp_discount" | "hyperbolic_discount" => {
            let (kernel, base) = kernel(obj, kind, name)?;
            Ok(MatrixFn::Discounted { kernel, horizon, base })
        }
        "samples" => {
            let times = time_list(obj.get("times"), name)?;
            let values = matrix_list(obj.get("values"), name)?;
            if times.len() != values.len() || times.is_empty() {
                return Err(perr(format!("{name}: times and values differ in length")));
            }
            if times.windows(2).any(|w| w[1] <= w[0]) {
                return Err(perr(format!("{name}: sample times must increase")));
            }
            Ok(MatrixFn::Samples { times, values })
        }
        "polynomial" => Ok(MatrixFn::Polynomial(matrix_list(obj.get("coeffs"), name)?)),
        other => Err(perr(format!("{name}: unknown kind {other:?}"))),
    }
}

fn kind_of(v: &Value) -> Option<&str> {
    v.as_object()?.get("kind")?.as_str()
}

pub fn parse_time_fn(v: &Value, name: &str, horizon: f64) -> Result<MatrixFn> {
    match kind_of(v) {
        None => Ok(MatrixFn::Constant(parse_matrix(v, name)?)),
        Some(k) => one_time_body(v, k, name, horizon),
    }
}

pub fn parse_two_time_fn(v: &Value, name: &str, horizon: f64) -> Result<TwoTimeMatrixFn> {
    match kind_of(v) {
        None => Ok(TwoTimeMatrixFn::Constant(parse_matrix(v, name)?)),
        Some(k @ ("exp_discount" | "hyperbolic_discount")) => {
            let (kernel, base) = kernel(v, k, name)?;
            Ok(TwoTimeMatrixFn::Discounted { kernel, base })
        }
        Some(k) => {
            let f = one_time_body(v, k, name, horizon)?;
            match v.get("axis").and_then(|a| a.as_str()).unwrap_or("s") {
                "s" => Ok(TwoTimeMatrixFn::OfS(f)),
                "t" => Ok(TwoTimeMatrixFn::OfT(f)),
                a => Err(perr(format!("{name}: axis must be \"s\" or \"t\", got {a:?}"))),
            }
        }
    }
}

fn usize_field(v: &Value, key: &str) -> Result<usize> {
    v.get(key)
        .and_then(|x| x.as_u64())
        .map(|x| x as usize)
        .ok_or_else(|| perr(format!("missing or invalid \"{key}\"")))
}

/// Parse a problem document; shapes are checked afterwards.
pub fn problem_from_value(v: &Value) -> Result<ProblemData> {
    let n = usize_field(v, "n")?;
    let m = usize_field(v, "m")?;
    let horizon = num(v.get("T").unwrap_or(&Value::Null), "T")?;
    let delta = num(v.get("delta").unwrap_or(&Value::Null), "delta")?;
    let coeffs = v.get("coefficients").ok_or_else(|| perr("missing \"coefficients\""))?;
    let weights = v.get("weights").ok_or_else(|| perr("missing \"weights\""))?;

    let one = |obj: &Value, key: &str, shape: (usize, usize), required: bool| -> Result<MatrixFn> {
        match obj.get(key) {
            Some(x) => parse_time_fn(x, key, horizon),
            None if !required => Ok(MatrixFn::zeros(shape.0, shape.1)),
            None => Err(perr(format!("missing \"{key}\""))),
        }
    };
    let two = |key: &str, shape: (usize, usize), required: bool| -> Result<TwoTimeMatrixFn> {
        match weights.get(key) {
            Some(x) => parse_two_time_fn(x, key, horizon),
            None if !required => Ok(TwoTimeMatrixFn::zeros(shape.0, shape.1)),
            None => Err(perr(format!("missing \"{key}\""))),
        }
    };

    let p = ProblemData {
        n,
        m,
        horizon,
        a: one(coeffs, "A", (n, n), true)?,
        a_bar: one(coeffs, "Abar", (n, n), false)?,
        b: one(coeffs, "B", (n, m), true)?,
        b_bar: one(coeffs, "Bbar", (n, m), false)?,
        c: one(coeffs, "C", (n, n), true)?,
        c_bar: one(coeffs, "Cbar", (n, n), false)?,
        d: one(coeffs, "D", (n, m), true)?,
        d_bar: one(coeffs, "Dbar", (n, m), false)?,
        q: two("Q", (n, n), true)?,
        q_bar: two("Qbar", (n, n), false)?,
        r: two("R", (m, m), true)?,
        r_bar: two("Rbar", (m, m), false)?,
        g: one(weights, "G", (n, n), true)?,
        g_bar: one(weights, "Gbar", (n, n), false)?,
        delta,
        monotone: v.get("monotone").and_then(|x| x.as_bool()).unwrap_or(false),
    };
    p.check_shapes()?;
    Ok(p)
}

pub fn problem_from_str(text: &str) -> Result<ProblemData> {
    let v: Value = serde_json::from_str(text).map_err(|e| perr(e.to_string()))?;
    problem_from_value(&v)
}

/// Apply `key=value` where `key` is a dotted path (`weights.G`) and `value`
/// is JSON (a bare word is taken as a string).
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| MflqError::Config(format!("override {assignment:?} is not key=value")))?;
    let raw = raw.trim().trim_matches('"');
    let val: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = doc;
    let parts: Vec<&str> = key.trim().split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| MflqError::Config(format!("override path {key:?} crosses a non-object")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), val);
            return Ok(());
        }
        cur = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Err(MflqError::Config("empty override key".into()))
}
