#![allow(dead_code)]

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tangent_plane_llg::diagnostics::random_unit_field;
use tangent_plane_llg::fem::FemSpace;
use tangent_plane_llg::{generate_structured_cube, Box3, MagnetizationField};

pub fn cube(n: usize) -> Arc<FemSpace> {
    Arc::new(FemSpace::new(generate_structured_cube(Box3::unit(), [n, n, n]).unwrap()))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_field(n: usize, seed: u64) -> MagnetizationField {
    MagnetizationField::new(random_unit_field(&mut rng(seed), n)).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn norm2(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
