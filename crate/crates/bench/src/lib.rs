//! Shared fixtures for the benchmarks.

use gpdc::{linspace, FilterSpec, KernelSpec, ObservationSet};

/// Smooth deterministic observations of an SE/SE model on `[0, 10]`.
pub fn fixture(n: usize) -> (KernelSpec, FilterSpec, ObservationSet) {
    let source = KernelSpec::se(1.0, 0.5).expect("valid kernel");
    let filter = FilterSpec::se_normalized(0.3).expect("valid filter");
    let t = linspace(0.0, 10.0, n);
    let y = t.iter().map(|&s| (1.3 * s).sin() + 0.4 * (0.37 * s).cos()).collect();
    let obs = ObservationSet::one_d(t, y, 1e-2).expect("valid observations");
    (source, filter, obs)
}
