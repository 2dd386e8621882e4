//! Browser bindings for a static demo page: LDLR curves and SDA for a
//! problem file pasted into the page, and a Bernoulli cloning check.

use lowdeg::cloning::bernoulli_clone_gof;
use lowdeg::ldlr::{ldlr_norm, SamplewiseDegree};
use lowdeg::measures::{AtomPlan, Degree};
use lowdeg::problem_file::ProblemFile;
use lowdeg::sda::sda;
use wasm_bindgen::prelude::*;

const PLAN: AtomPlan = AtomPlan::Auto {
    seed: 0,
    budget: 5_000,
};

fn degree(d: i32) -> Degree {
    if d < 0 {
        Degree::Unbounded
    } else {
        Degree::Finite(d as u32)
    }
}

/// Squared `(d, k)`-LDLR at each `m` in `ms`; a negative `d` means no limit.
pub fn ldlr_curve(problem_toml: &str, d: i32, k: u32, ms: &[u64]) -> Result<Vec<f64>, String> {
    let loaded = ProblemFile::parse(problem_toml)
        .and_then(|f| f.build())
        .map_err(|e| e.to_string())?;
    ms.iter()
        .map(|&m| {
            ldlr_norm(loaded.source(), m, SamplewiseDegree::new(degree(d), k), PLAN)
                .map(|r| r.value)
                .map_err(|e| e.to_string())
        })
        .collect()
}

/// SDA at oracle parameter `m`, as text (`>=q` when capped).
pub fn sda_text(problem_toml: &str, m: f64) -> Result<String, String> {
    let loaded = ProblemFile::parse(problem_toml)
        .and_then(|f| f.build())
        .map_err(|e| e.to_string())?;
    sda(loaded.source(), m, PLAN)
        .map(|r| r.value.to_string())
        .map_err(|e| e.to_string())
}

/// Chi-square p-value of the joint law of `m` Bernoulli clones.
pub fn clone_p_value(gamma: f64, m: usize, trials: usize, seed: u64) -> Result<f64, String> {
    bernoulli_clone_gof(gamma, m, trials, seed)
        .map(|r| r.p_value)
        .map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = ldlrCurve)]
pub fn ldlr_curve_js(problem_toml: &str, d: i32, k: u32, ms: Vec<u64>) -> Result<Vec<f64>, JsValue> {
    ldlr_curve(problem_toml, d, k, &ms).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = sdaAt)]
pub fn sda_js(problem_toml: &str, m: f64) -> Result<String, JsValue> {
    sda_text(problem_toml, m).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = cloneCheck)]
pub fn clone_check_js(gamma: f64, m: usize, trials: usize, seed: u64) -> Result<f64, JsValue> {
    clone_p_value(gamma, m, trials, seed).map_err(|e| JsValue::from_str(&e))
}
