#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use parbot::robots::{Cdr4, Cdr4Params, Rpr2, Rpr2Params};
use parbot::{RobotModel, TaskState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rpr2() -> Rpr2 {
    Rpr2::new(Rpr2Params::default()).unwrap()
}

pub fn cdr4() -> Cdr4 {
    Cdr4::new(Cdr4Params::default()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn vector(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-scale..scale))
}

pub fn matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-scale..scale))
}

pub fn state(model: &dyn RobotModel, rng: &mut ChaCha8Rng) -> TaskState {
    let x = model.workspace().sample_position(rng);
    let n = x.len();
    TaskState::new(x, vector(rng, n, 1.0))
}

/// `|a - b| / max(|b|, floor)` in the max norm.
pub fn rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1e-12)
}

pub fn rel_m(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1e-12)
}
