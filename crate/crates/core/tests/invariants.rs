//! Property tests for the structural invariants that hold for *every*
//! admissible input, not just the worked examples.

use proptest::prelude::*;
use pn_core::grid::Grid2D;
use pn_core::kernel::KernelEval;
use pn_core::params::{ElasticParams, MisfitPotential};
use pn_core::spectral::SpectralField2D;
use std::sync::OnceLock;

fn kernel_table() -> &'static KernelEval {
    static KE: OnceLock<KernelEval> = OnceLock::new();
    KE.get_or_init(|| {
        KernelEval::build(ElasticParams::with_beta(4.0 / 3.0).unwrap()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Forward-then-inverse transform reproduces any finite field to 1e-12.
    #[test]
    fn fourier_round_trip(
        n1 in (4usize..16).prop_map(|k| 2 * k),
        n2 in (4usize..16).prop_map(|k| 2 * k),
        seed in any::<u64>(),
    ) {
        let grid = Grid2D::new(3.7, 9.1, n1, n2).unwrap();
        let mut state = seed;
        let vals: Vec<f64> = (0..grid.len())
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0
            })
            .collect();
        let field = SpectralField2D::new(grid, vals).unwrap();
        prop_assert!(field.round_trip_error() <= 1e-12);
    }

    // Kbar is even and homogeneous of degree -3 at every point and scale.
    #[test]
    fn kernel_evenness_and_homogeneity(
        angle in 0.0..(2.0 * std::f64::consts::PI),
        radius in 0.05f64..50.0,
        scale in prop::sample::select(vec![0.5f64, 2.0, 10.0]),
    ) {
        let ke = kernel_table();
        let y = (radius * angle.cos(), radius * angle.sin());
        let k = ke.kernel_bar(y).unwrap();
        let even = ke.kernel_bar((-y.0, -y.1)).unwrap();
        prop_assert!((k - even).abs() <= 1e-12 * k.abs());
        let scaled = ke.kernel_bar((scale * y.0, scale * y.1)).unwrap();
        prop_assert!((scaled - k / (scale * scale * scale)).abs() <= 1e-12 * k.abs());
    }

    // Sampled well structure and the finite-difference consistency of W'.
    #[test]
    fn potential_well_and_derivative(u in -0.999f64..0.999) {
        let w = MisfitPotential::sinusoidal();
        let floor = w.value(-1.0).max(w.value(1.0));
        prop_assert!(w.value(u) > floor);
        let h = 1e-4;
        let fd = (w.value(u + h) - w.value(u - h)) / (2.0 * h);
        prop_assert!((fd - w.deriv(u)).abs() <= 2.0 * h * h);
    }
}
