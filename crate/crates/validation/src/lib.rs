//! Independent oracles and reference field specs for the acceptance suite.

use temperfield::fields::FieldSpec;
use temperfield::quad::{integrate_half_line, integrate_interval, integrate_segments, QuadratureConfig, Tail};

/// `R(a) = ∫_0^∞ (cos(ar) − 1) r^{−α−1} e^{−λr} dr` straight from its definition.
///
/// The head up to a few periods is integrated with `cos − 1 = −2 sin²`, the rest
/// as the non-oscillating `−∫ amp` plus an alternating series over half periods
/// accelerated by repeated averaging.
pub fn radial_defining_integral(alpha: f64, lambda: f64, a: f64) -> f64 {
    let cfg = QuadratureConfig { abs_tol: 0.0, ..QuadratureConfig::default().with_tol(1e-11) };
    let amp = |r: f64| r.powf(-alpha - 1.0) * (-lambda * r).exp();
    let half = std::f64::consts::PI / a;
    let r0 = 8.0 * half;
    let bps: Vec<f64> = (-30..64).map(|k| 2f64.powi(k)).take_while(|b| *b < r0).collect();
    let head = integrate_segments(
        &|r: f64| -2.0 * ((0.5 * a * r).sin() / r).powi(2) * r.powf(1.0 - alpha) * (-lambda * r).exp(),
        0.0,
        r0,
        &bps,
        &cfg,
    )
    .value;
    let minus = integrate_half_line(&amp, r0, 1.0, &cfg.with_box(r0), Tail::Empirical, 1).value;
    let mut partial = Vec::with_capacity(24);
    let mut s = 0.0;
    for k in 0..24 {
        let lo = r0 + k as f64 * half;
        s += integrate_interval(&|r: f64| (a * r).cos() * amp(r), lo, lo + half, &cfg).value;
        partial.push(s);
    }
    while partial.len() > 1 {
        partial = partial.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    head - minus + partial[0]
}

pub fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        (a - b).abs() / b.abs()
    }
}

pub fn ma_1d(alpha: f64, lambda: f64, h: f64) -> FieldSpec {
    FieldSpec::from_json(&format!(
        r#"{{"n":1,"d":1,"alpha":{alpha},"lambda":{lambda},"E":[[1]],"D":[[{h}]],
        "sigma":{{"dim":1,"atoms":[{{"dir":[1],"w":0.5}}]}},"kind":"moving_average","phi":"abs","beta":1}}"#
    ))
    .unwrap()
}

/// One-dimensional harmonizable field; `nodes = 0` keeps the lifted measure as given.
pub fn harm_1d(alpha: f64, lambda: f64, h: f64, nodes: usize) -> FieldSpec {
    FieldSpec::from_json(&format!(
        r#"{{"n":1,"d":1,"alpha":{alpha},"lambda":{lambda},"E":[[1]],"D":[[{h}]],
        "sigma":{{"dim":2,"atoms":[{{"dir":[1,0],"w":0.25}},{{"dir":[0,1],"w":0.25}}]}},
        "kind":"harmonizable","phi":"abs","orbit_nodes":{nodes}}}"#
    ))
    .unwrap()
}

pub fn ma_2d(alpha: f64, lambda: f64) -> FieldSpec {
    FieldSpec::from_json(&format!(
        r#"{{"n":2,"d":2,"alpha":{alpha},"lambda":{lambda},"E":[[1,0],[0,1]],"D":[[0.6,0.2],[-0.1,0.8]],
        "sigma":{{"dim":2,"atoms":[{{"dir":[1,0],"w":0.3}},{{"dir":[0.6,0.8],"w":0.2}}]}},
        "kind":"moving_average","phi":"radial","beta":1}}"#
    ))
    .unwrap()
}

pub fn harm_2d(alpha: f64, lambda: f64) -> FieldSpec {
    FieldSpec::from_json(&format!(
        r#"{{"n":2,"d":2,"alpha":{alpha},"lambda":{lambda},"E":[[1,0],[0,1]],"D":[[0.5,0.1],[0,0.6]],
        "sigma":{{"dim":4,"atoms":[{{"dir":[1,0,0,0],"w":0.25}},{{"dir":[0,1,0,0],"w":0.25}},
        {{"dir":[0,0,1,0],"w":0.25}},{{"dir":[0,0,0,1],"w":0.25}}]}},
        "kind":"harmonizable","phi":"radial","orbit_nodes":0}}"#
    ))
    .unwrap()
}
