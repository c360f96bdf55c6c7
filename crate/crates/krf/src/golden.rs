//! Canned cohomology examples and their checked-in verdicts.

use serde_json::Value;

use crate::manifold::{ManifoldSpec, Scalar};

pub struct GoldenCase {
    pub id: &'static str,
    pub description: &'static str,
    pub manifold: fn() -> ManifoldSpec,
    pub omega0: &'static [&'static str],
    pub golden: &'static str,
}

impl GoldenCase {
    pub fn omega0(&self) -> Vec<Scalar> {
        self.omega0.iter().map(|s| Scalar::from(*s)).collect()
    }

    pub fn expected(&self) -> Value {
        serde_json::from_str(self.golden).expect("golden files are valid JSON")
    }
}

pub const CASES: &[GoldenCase] = &[
    GoldenCase {
        id: "9.2",
        description: "sphere minus a point, area 10",
        manifold: || ManifoldSpec::builtin("s2-1pt"),
        omega0: &["10"],
        golden: include_str!("../golden/9.2.json"),
    },
    GoldenCase {
        id: "9.3a",
        description: "S2 x S2, first factor binds first",
        manifold: || ManifoldSpec::builtin("s2xs2"),
        omega0: &["4*pi", "4*pi"],
        golden: include_str!("../golden/9.3a.json"),
    },
    GoldenCase {
        id: "9.3b",
        description: "S2 x S2, both factors bind together",
        manifold: || ManifoldSpec::builtin("s2xs2"),
        omega0: &["8*pi", "4*pi"],
        golden: include_str!("../golden/9.3b.json"),
    },
    GoldenCase {
        id: "9.3c",
        description: "S2 x S2, second factor binds first",
        manifold: || ManifoldSpec::builtin("s2xs2"),
        omega0: &["8*pi", "2*pi"],
        golden: include_str!("../golden/9.3c.json"),
    },
    GoldenCase {
        id: "9.4-klt",
        description: "CP2 with one line",
        manifold: || ManifoldSpec::cpn(2, 1),
        omega0: &["6"],
        golden: include_str!("../golden/9.4-klt.json"),
    },
    GoldenCase {
        id: "9.4-keq",
        description: "CP2 with three lines",
        manifold: || ManifoldSpec::cpn(2, 3),
        omega0: &["6"],
        golden: include_str!("../golden/9.4-keq.json"),
    },
    GoldenCase {
        id: "9.4-kgt",
        description: "CP2 with four lines",
        manifold: || ManifoldSpec::cpn(2, 4),
        omega0: &["6"],
        golden: include_str!("../golden/9.4-kgt.json"),
    },
];

pub fn find(id: &str) -> Option<&'static GoldenCase> {
    CASES.iter().find(|c| c.id == id)
}

pub fn ids() -> Vec<&'static str> {
    CASES.iter().map(|c| c.id).collect()
}

/// Line-by-line difference of two pretty-printed JSON values.
pub fn diff(expected: &Value, actual: &Value) -> String {
    let a = serde_json::to_string_pretty(expected).unwrap_or_default();
    let b = serde_json::to_string_pretty(actual).unwrap_or_default();
    let left: Vec<&str> = a.lines().collect();
    let right: Vec<&str> = b.lines().collect();
    let mut out = String::new();
    for i in 0..left.len().max(right.len()) {
        match (left.get(i), right.get(i)) {
            (Some(l), Some(r)) if l == r => {}
            (l, r) => {
                if let Some(l) = l {
                    out.push_str(&format!("- {l}\n"));
                }
                if let Some(r) = r {
                    out.push_str(&format!("+ {r}\n"));
                }
            }
        }
    }
    out
}
