use std::collections::BTreeMap;

use standage_core::models::builtin::PUBLISHED_MODELS;
use standage_core::{ModelRegistry, Species};

struct GoldenModel {
    rows: Vec<[String; 5]>,
    sigma: String,
}

fn golden() -> BTreeMap<(Species, u8), GoldenModel> {
    let text = include_str!("golden/published_models.tsv");
    let mut out: BTreeMap<(Species, u8), GoldenModel> = BTreeMap::new();
    for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split('\t').collect();
        let key = (f[0].parse::<Species>().unwrap(), f[1].parse::<u8>().unwrap());
        let entry = out.entry(key).or_insert_with(|| GoldenModel {
            rows: Vec::new(),
            sigma: String::new(),
        });
        if f[2] == "sigma" {
            entry.sigma = f[3].to_string();
        } else {
            entry.rows.push([f[2], f[3], f[4], f[5], f[6]].map(str::to_string));
        }
    }
    out
}

#[test]
fn embedded_tables_match_golden_file() {
    let golden = golden();
    assert_eq!(golden.len(), 22);
    assert_eq!(PUBLISHED_MODELS.len(), 22);
    for m in &PUBLISHED_MODELS {
        let g = &golden[&(m.species, m.si)];
        assert_eq!(m.sigma, g.sigma, "{} {} sigma", m.species, m.si);
        assert_eq!(m.rows.len(), g.rows.len(), "{} {}", m.species, m.si);
        for (r, gr) in m.rows.iter().zip(&g.rows) {
            assert_eq!([r.variable, r.estimate, r.std_error, r.t_value, r.p_value], gr.each_ref().map(String::as_str));
        }
    }
}

#[test]
fn registry_values_equal_printed_strings() {
    let reg = ModelRegistry::builtin();
    assert_eq!(reg.len(), 22);
    for ((species, si), g) in golden() {
        let m = reg.get(species, si).unwrap();
        assert_eq!(m.sigma, g.sigma.parse::<f64>().unwrap());
        assert_eq!(g.rows[0][0], "Intercept");
        assert_eq!(m.intercept, g.rows[0][1].parse::<f64>().unwrap());
        let names: Vec<&str> = m.terms.iter().map(|(n, _)| n.as_str()).collect();
        let gnames: Vec<&str> = g.rows[1..].iter().map(|r| r[0].as_str()).collect();
        assert_eq!(names, gnames);
        for ((_, b), r) in m.terms.iter().zip(&g.rows[1..]) {
            assert_eq!(*b, r[1].parse::<f64>().unwrap(), "{species} {si} {}", r[0]);
        }
    }
}
