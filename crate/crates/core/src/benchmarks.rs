//! Bundled reversible benchmark circuits and the FakeLagos device file.
//!
//! The circuits are small reconstructions with the published qubit and CNOT
//! counts, not the original RevLib netlists.

use crate::circuit::{parse_qasm, Circuit};

pub const FAKELAGOS_JSON: &str = include_str!("../data/devices/fakelagos.json");

/// `(name, qasm)` for every bundled benchmark, in table order.
pub const BENCHMARKS: [(&str, &str); 6] = [
    ("fredkin_n3", include_str!("../data/benchmarks/fredkin_n3.qasm")),
    ("ex-1_166", include_str!("../data/benchmarks/ex-1_166.qasm")),
    ("decod24-v2_43", include_str!("../data/benchmarks/decod24-v2_43.qasm")),
    ("rd32-v1_68", include_str!("../data/benchmarks/rd32-v1_68.qasm")),
    ("alu-v0_27", include_str!("../data/benchmarks/alu-v0_27.qasm")),
    ("4gt11_84", include_str!("../data/benchmarks/4gt11_84.qasm")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    BENCHMARKS.iter().map(|(n, _)| *n)
}

pub fn qasm(name: &str) -> Option<&'static str> {
    BENCHMARKS.iter().find(|(n, _)| *n == name).map(|(_, q)| *q)
}

pub fn load(name: &str) -> Option<Circuit> {
    qasm(name).map(|q| parse_qasm(q).expect("bundled benchmark parses"))
}

pub fn all() -> Vec<Circuit> {
    BENCHMARKS
        .iter()
        .map(|(_, q)| parse_qasm(q).expect("bundled benchmark parses"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{emit_qasm, CountKind};

    #[test]
    fn qubit_and_cnot_counts() {
        let expected = [
            ("fredkin_n3", 3, 8),
            ("ex-1_166", 3, 9),
            ("decod24-v2_43", 4, 22),
            ("rd32-v1_68", 4, 16),
            ("alu-v0_27", 5, 17),
            ("4gt11_84", 5, 9),
        ];
        for (name, n, cx) in expected {
            let c = load(name).unwrap();
            assert_eq!(c.name, name);
            assert_eq!(c.num_qubits(), n, "{name}");
            assert_eq!(c.count_gates(CountKind::Cnot), cx, "{name}");
            assert_eq!(c.count_gates(CountKind::Measure), n, "{name}");
        }
    }

    #[test]
    fn emission_is_stable() {
        for c in all() {
            let once = emit_qasm(&c);
            let again = emit_qasm(&parse_qasm(&once).unwrap());
            assert_eq!(once, again);
        }
    }
}
