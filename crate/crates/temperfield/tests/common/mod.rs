use temperfield::fields::FieldSpec;

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
