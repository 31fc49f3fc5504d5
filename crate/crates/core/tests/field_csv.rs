//! Property tests for the field CSV format. The format promises bit
//! exact round trips, so the values here are drawn from raw bit
//! patterns rather than from a nice numeric range.

use num_complex::Complex64;
use proptest::prelude::*;

use elastoscope_core::{Grid, ScalarField, VectorField};

fn finite(bits: u64) -> f64 {
    let v = f64::from_bits(bits);
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

proptest! {
    #[test]
    fn scalar_round_trip_is_bit_exact(
        nx in 3usize..7,
        ny in 3usize..7,
        raw in proptest::collection::vec(any::<(u64, u64)>(), 36),
    ) {
        let grid = Grid::new(nx, ny, 10.0, 8.0).unwrap();
        let values: Vec<Complex64> = raw
            .iter()
            .cycle()
            .take(grid.len())
            .map(|(a, b)| Complex64::new(finite(*a), finite(*b)))
            .collect();
        let field = ScalarField::from_values(grid, values).unwrap();
        let back = ScalarField::from_csv_string(&field.to_csv_string()).unwrap();
        prop_assert_eq!(back.grid, grid);
        for (a, b) in back.values().iter().zip(field.values()) {
            prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
            prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn vector_round_trip_is_bit_exact(
        nx in 3usize..7,
        ny in 3usize..7,
        raw in proptest::collection::vec(any::<(u64, u64)>(), 36),
    ) {
        let grid = Grid::new(nx, ny, 5.0, 5.0).unwrap();
        let mut field = VectorField::zeros(grid);
        for (k, (a, b)) in raw.iter().cycle().take(grid.len()).enumerate() {
            field.comp_mut(0)[k] = Complex64::new(finite(*a), finite(*b));
            field.comp_mut(1)[k] = Complex64::new(finite(*b), finite(*a));
        }
        let back = VectorField::from_csv_string(&field.to_csv_string()).unwrap();
        prop_assert_eq!(back.grid, grid);
        for k in 0..2 {
            for (a, b) in back.comp(k).iter().zip(field.comp(k)) {
                prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
                prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
            }
        }
    }

    #[test]
    fn scalar_and_vector_headers_do_not_cross_parse(
        nx in 3usize..6,
        ny in 3usize..6,
    ) {
        let grid = Grid::new(nx, ny, 1.0, 2.0).unwrap();
        let s = ScalarField::zeros(grid).to_csv_string();
        let v = VectorField::zeros(grid).to_csv_string();
        prop_assert!(VectorField::from_csv_string(&s).is_err());
        prop_assert!(ScalarField::from_csv_string(&v).is_err());
    }
}
