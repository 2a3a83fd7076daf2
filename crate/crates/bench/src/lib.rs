//! Benchmark fixtures.

use qcwm_core::linalg::random_unitary;
use qcwm_core::{benchmarks, Circuit, DeviceModel, UnitaryMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Haar-random target on `n` qubits, fixed by `seed`.
pub fn haar(n: usize, seed: u64) -> UnitaryMatrix {
    random_unitary(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn circuit(name: &str) -> Circuit {
    benchmarks::load(name).unwrap_or_else(|| panic!("no bundled benchmark `{name}`"))
}

pub fn lagos() -> DeviceModel {
    DeviceModel::load("fakelagos").expect("bundled preset")
}
