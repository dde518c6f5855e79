//! Named closed-form Hamiltonians.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::harness::config::PresetSpec;
use crate::sphere::{HamiltonianPath, Polynomial, Term, TimeProfile, Vec3};

use TimeProfile::{Constant, CosPi, Linear, SinPi};

struct Entry {
    id: &'static str,
    formula: &'static str,
    params: &'static [(&'static str, f64)],
    /// Flow is a family of rotations, hence preserves the round structure.
    holomorphic: bool,
    terms: fn(&dyn Fn(&str) -> f64) -> Vec<Term>,
}

const X1: [u32; 3] = [1, 0, 0];
const X2: [u32; 3] = [0, 1, 0];
const X3: [u32; 3] = [0, 0, 1];
const ONE: [u32; 3] = [0, 0, 0];

const CATALOG: &[Entry] = &[
    Entry { id: "zero", formula: "0", params: &[], holomorphic: true, terms: |_| vec![] },
    Entry {
        id: "constant",
        formula: "c",
        params: &[("c", 1.0)],
        holomorphic: true,
        terms: |p| vec![Term::new(p("c"), Constant, ONE)],
    },
    Entry { id: "x1", formula: "a·x₁", params: &[("a", 1.0)], holomorphic: true, terms: |p| vec![Term::new(p("a"), Constant, X1)] },
    Entry { id: "x2", formula: "a·x₂", params: &[("a", 1.0)], holomorphic: true, terms: |p| vec![Term::new(p("a"), Constant, X2)] },
    Entry { id: "x3", formula: "a·x₃", params: &[("a", 1.0)], holomorphic: true, terms: |p| vec![Term::new(p("a"), Constant, X3)] },
    Entry {
        id: "const_plus_x3",
        formula: "c + a·x₃",
        params: &[("c", 1.0), ("a", 1.0)],
        holomorphic: true,
        terms: |p| vec![Term::new(p("c"), Constant, ONE), Term::new(p("a"), Constant, X3)],
    },
    Entry {
        id: "rotation_pulse",
        formula: "c + a·cos(πt)·x₂ + b·x₃",
        params: &[("c", 0.5), ("a", 1.0), ("b", 1.0)],
        holomorphic: true,
        terms: |p| {
            vec![Term::new(p("c"), Constant, ONE), Term::new(p("a"), CosPi, X2), Term::new(p("b"), Constant, X3)]
        },
    },
    Entry {
        id: "x3_squared",
        formula: "a·x₃²",
        params: &[("a", 1.0)],
        holomorphic: false,
        terms: |p| vec![Term::new(p("a"), Constant, [0, 0, 2])],
    },
    Entry {
        id: "x1_squared",
        formula: "a·x₁²",
        params: &[("a", 1.0)],
        holomorphic: false,
        terms: |p| vec![Term::new(p("a"), Constant, [2, 0, 0])],
    },
    Entry {
        id: "saddle",
        formula: "a·x₁x₂",
        params: &[("a", 1.0)],
        holomorphic: false,
        terms: |p| vec![Term::new(p("a"), Constant, [1, 1, 0])],
    },
    Entry {
        id: "mixed",
        formula: "a·sin(πt)·x₁ + b·t·x₃²",
        params: &[("a", 1.0), ("b", 1.0)],
        holomorphic: false,
        terms: |p| vec![Term::new(p("a"), SinPi, X1), Term::new(p("b"), Linear, [0, 0, 2])],
    },
];

/// A built preset.
#[derive(Clone, Debug)]
pub struct Preset {
    pub id: String,
    pub path: HamiltonianPath,
    pub holomorphic: bool,
    /// `sup_{t, x} |H_t(x)|` bounded by the sum of absolute coefficients.
    pub sup_bound: f64,
    /// For autonomous `c + a·x`: the vector `a`.
    pub rotation_axis: Option<Vec3>,
    pub time_independent: bool,
    pub polynomial_degree: u32,
}

pub fn build(spec: &PresetSpec) -> Result<Preset> {
    let entry = CATALOG
        .iter()
        .find(|e| e.id == spec.id)
        .ok_or_else(|| Error::Config(format!("unknown preset `{}` (see --list-presets)", spec.id)))?;
    for name in spec.params.keys() {
        if !entry.params.iter().any(|(p, _)| p == name) {
            return Err(Error::Config(format!("preset `{}` has no parameter `{name}`", spec.id)));
        }
    }
    let mut values: BTreeMap<&str, f64> = entry.params.iter().copied().collect();
    for (name, v) in &spec.params {
        if !v.is_finite() {
            return Err(Error::Config(format!("parameter `{name}` of `{}` is not finite", spec.id)));
        }
        values.insert(name.as_str(), *v);
    }
    let terms = (entry.terms)(&|name| values[name]);
    let poly = Polynomial::new(terms.clone());
    let sup_bound = terms.iter().map(|t| t.coeff.abs()).sum();
    let time_independent = terms.iter().all(|t| t.profile == Constant);
    let linear = terms.iter().all(|t| t.powers.iter().sum::<u32>() <= 1);
    let rotation_axis = (time_independent && linear).then(|| {
        terms.iter().fold(Vec3::zeros(), |acc, t| match t.powers {
            X1 => acc + Vec3::x() * t.coeff,
            X2 => acc + Vec3::y() * t.coeff,
            X3 => acc + Vec3::z() * t.coeff,
            _ => acc,
        })
    });
    let label = if spec.params.is_empty() {
        spec.id.clone()
    } else {
        let args: Vec<String> = spec.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("{}({})", spec.id, args.join(","))
    };
    Ok(Preset {
        id: spec.id.clone(),
        polynomial_degree: poly.degree(),
        path: HamiltonianPath::new(label, poly),
        holomorphic: entry.holomorphic,
        sup_bound,
        rotation_axis,
        time_independent,
    })
}

/// Human-readable catalog for `--list-presets`.
pub fn catalog() -> String {
    let mut out = String::new();
    for e in CATALOG {
        let params: Vec<String> = e.params.iter().map(|(n, v)| format!("{n}={v}")).collect();
        let kind = if e.holomorphic { "rotation family" } else { "general" };
        let _ = writeln!(out, "{:<16} H = {:<26} [{}] {}", e.id, e.formula, params.join(", "), kind);
    }
    out
}

pub fn ids() -> impl Iterator<Item = &'static str> {
    CATALOG.iter().map(|e| e.id)
}
