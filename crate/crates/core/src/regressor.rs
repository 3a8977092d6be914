//! Jacobian factorization, adjugate/determinant split and regressor assembly.
//!
//! Layout conventions used throughout:
//! * `Y_a` is m x r, `Y_b` is 1 x k, `Y_c` is n x p.
//! * `Y_eta` is l x (l m r); row `i` holds the rows of `Y_a` concatenated,
//!   placed in column block `i`.
//! * `Y_mu` is p x (p k); row `i` holds `Y_b` in column block `i`.
//! * `Y_F` is n x q with column blocks ordered `(a, eta, mu, b)`.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{ModelDims, RobotModel, TaskState};
use crate::linalg;
use crate::{Error, Result, EPS_DET, EPS_LEN};

/// `J^T = J_new^T diag(L)^-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianFactorization {
    pub j_new_t: DMatrix<f64>,
    pub lengths: DVector<f64>,
}

impl JacobianFactorization {
    /// Recombine into `J^T`.
    pub fn jacobian_transpose(&self) -> DMatrix<f64> {
        let mut jt = self.j_new_t.clone();
        for (j, mut col) in jt.column_iter_mut().enumerate() {
            col /= self.lengths[j];
        }
        jt
    }
}

/// `J_new^T = base + Y Theta` (n x m).
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicRegressor {
    /// State-only part (n x m); zero when the decomposition is purely linear.
    pub base: DMatrix<f64>,
    /// n x l.
    pub y: DMatrix<f64>,
    /// l x m, at the parameters of the model that produced it.
    pub theta: DMatrix<f64>,
}

impl KinematicRegressor {
    pub fn j_new_t(&self) -> DMatrix<f64> {
        self.j_new_t_with(&self.theta)
    }

    /// `base + Y Theta_hat` for an arbitrary estimate.
    pub fn j_new_t_with(&self, theta: &DMatrix<f64>) -> DMatrix<f64> {
        &self.base + &self.y * theta
    }
}

/// `R / T` equals the right pseudo-inverse of `J_new^T` (or its inverse).
#[derive(Debug, Clone, PartialEq)]
pub struct AdjugateSplit {
    /// m x n.
    pub r: DMatrix<f64>,
    pub t: f64,
}

impl AdjugateSplit {
    pub fn pseudo_inverse(&self) -> Result<DMatrix<f64>> {
        if self.t.abs() <= EPS_DET {
            return Err(Error::Singular(format!("|T| = {:.3e}", self.t.abs())));
        }
        Ok(&self.r / self.t)
    }
}

/// Parameter vectors of one robot evaluated at one physical parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    /// Kinematic parameter matrix `Theta` (l x m).
    pub theta_kin: DMatrix<f64>,
    pub theta_a: DVector<f64>,
    pub theta_b: DVector<f64>,
    pub theta_c: DVector<f64>,
}

/// Index ranges of the four partitions of `theta_F`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThetaLayout {
    pub dims: ModelDims,
}

impl ThetaLayout {
    pub fn new(dims: ModelDims) -> Self {
        Self { dims }
    }
    pub fn len(&self) -> usize {
        self.dims.q()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn a(&self) -> Range<usize> {
        0..self.dims.r
    }
    pub fn eta(&self) -> Range<usize> {
        let start = self.dims.r;
        start..start + self.dims.m * self.dims.r * self.dims.l
    }
    pub fn mu(&self) -> Range<usize> {
        let start = self.eta().end;
        start..start + self.dims.p * self.dims.k
    }
    pub fn b(&self) -> Range<usize> {
        let start = self.mu().end;
        start..start + self.dims.k
    }

    /// Concatenate the four partitions in canonical order.
    pub fn concat(
        &self,
        a: &DVector<f64>,
        eta: &DVector<f64>,
        mu: &DVector<f64>,
        b: &DVector<f64>,
    ) -> DVector<f64> {
        assert_eq!(a.len(), self.a().len());
        assert_eq!(eta.len(), self.eta().len());
        assert_eq!(mu.len(), self.mu().len());
        assert_eq!(b.len(), self.b().len());
        DVector::from_iterator(
            self.len(),
            a.iter().chain(eta.iter()).chain(mu.iter()).chain(b.iter()).copied(),
        )
    }
}

/// Every regressor block at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorBundle {
    pub y_a: DMatrix<f64>,
    pub y_b: DMatrix<f64>,
    pub y_c: DMatrix<f64>,
    pub y_eta: DMatrix<f64>,
    pub y_mu: DMatrix<f64>,
    pub y_f: DMatrix<f64>,
    /// `Y_b theta_b_hat`.
    pub t_hat: f64,
}

pub fn factorize_jacobian(model: &dyn RobotModel, s: &TaskState) -> Result<JacobianFactorization> {
    model.check_configuration(&s.x)?;
    let (j_new_t, lengths) = model.jacobian_factors(&s.x)?;
    if let Some((i, &len)) = lengths.iter().enumerate().find(|(_, l)| **l <= EPS_LEN) {
        return Err(Error::DegenerateGeometry { link: i, length: len });
    }
    Ok(JacobianFactorization { j_new_t, lengths })
}

pub fn kinematic_regressor(model: &dyn RobotModel, s: &TaskState) -> Result<KinematicRegressor> {
    model.check_configuration(&s.x)?;
    model.kinematic_regressor(&s.x)
}

/// Square case: `R = adj(J_new^T)`, `T = det(J_new^T)`.
/// Redundant case: `R = J_new adj(J_new^T J_new)`, `T = det(J_new^T J_new)`.
pub fn adjugate_determinant(j_new_t: &DMatrix<f64>, redundant: bool) -> AdjugateSplit {
    if redundant {
        let gram = j_new_t * j_new_t.transpose();
        AdjugateSplit {
            r: j_new_t.transpose() * linalg::adjugate(&gram),
            t: linalg::determinant(&gram),
        }
    } else {
        AdjugateSplit {
            r: linalg::adjugate(j_new_t),
            t: linalg::determinant(j_new_t),
        }
    }
}

/// `(Y_b, theta_b)` at the model's parameters.
pub fn assemble_yb(model: &dyn RobotModel, s: &TaskState) -> Result<(DMatrix<f64>, DVector<f64>)> {
    Ok((model.determinant_regressor(&s.x)?, model.parameters().theta_b))
}

/// `(Y_a, theta_a)` at the model's parameters.
pub fn assemble_ya(
    model: &dyn RobotModel,
    s: &TaskState,
    v_ref: &DVector<f64>,
    a_ref: &DVector<f64>,
    ks: &DVector<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    Ok((model.adjugate_regressor(s, v_ref, a_ref, ks)?, model.parameters().theta_a))
}

/// `Y_eta` (l x l m r) so that `Theta_err (Y_a theta_a_err) = Y_eta theta_eta`.
pub fn assemble_yeta(l: usize, y_a: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, r) = y_a.shape();
    let block = m * r;
    let mut out = DMatrix::zeros(l, l * block);
    for i in 0..l {
        for j in 0..m {
            for s in 0..r {
                out[(i, i * block + j * r + s)] = y_a[(j, s)];
            }
        }
    }
    out
}

/// Row-stacking of `Theta_err (x) theta_a_err`: entry `(i m + j) r + s` is
/// `Theta_err[i, j] * theta_a_err[s]`.
pub fn theta_eta(theta_kin_err: &DMatrix<f64>, theta_a_err: &DVector<f64>) -> DVector<f64> {
    let (l, m) = theta_kin_err.shape();
    let r = theta_a_err.len();
    DVector::from_fn(l * m * r, |idx, _| {
        let s = idx % r;
        let j = (idx / r) % m;
        let i = idx / (r * m);
        theta_kin_err[(i, j)] * theta_a_err[s]
    })
}

/// `Y_mu` (p x p k) so that `(Y_b theta_b_err) (Y_c theta_c_err) = Y_c Y_mu theta_mu`.
pub fn assemble_ymu(p: usize, y_b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(y_b.nrows(), 1, "Y_b must be a row");
    let k = y_b.ncols();
    let mut out = DMatrix::zeros(p, p * k);
    for i in 0..p {
        for j in 0..k {
            out[(i, i * k + j)] = y_b[(0, j)];
        }
    }
    out
}

/// Row-stacking of `theta_c_err theta_b_err^T`.
pub fn theta_mu(theta_c_err: &DVector<f64>, theta_b_err: &DVector<f64>) -> DVector<f64> {
    let k = theta_b_err.len();
    DVector::from_fn(theta_c_err.len() * k, |idx, _| theta_c_err[idx / k] * theta_b_err[idx % k])
}

/// Inputs of [`assemble_yf`] that do not depend on the adapted estimates.
#[derive(Debug, Clone)]
pub struct YfParts<'a> {
    pub kin: &'a KinematicRegressor,
    pub y_a: &'a DMatrix<f64>,
    pub y_b: &'a DMatrix<f64>,
    pub y_c: &'a DMatrix<f64>,
    pub ks: &'a DVector<f64>,
}

/// Closed-loop regressor `Y_F` with `M Sdot + C S + K S = Y_F theta_F_err`.
///
/// Blocks, all divided by `T_hat = Y_b theta_b_hat`:
/// `[ J_hat_new^T Y_a | -Y Y_eta | Y_c Y_mu | -(Y_c theta_c_hat - KS) Y_b ]`
/// where `J_hat_new^T = base + Y Theta_hat`.
pub fn assemble_yf(
    parts: &YfParts<'_>,
    theta_kin_hat: &DMatrix<f64>,
    theta_c_hat: &DVector<f64>,
    theta_b_hat: &DVector<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let t_hat = (parts.y_b * theta_b_hat)[0];
    if !t_hat.is_finite() {
        return Err(Error::NonFinite("estimated determinant".into()));
    }
    if t_hat.abs() <= EPS_DET {
        return Err(Error::EstimatedSingularity { value: t_hat, threshold: EPS_DET });
    }
    let n = parts.y_c.nrows();
    let l = parts.kin.y.ncols();
    let p = parts.y_c.ncols();

    let y_eta = assemble_yeta(l, parts.y_a);
    let y_mu = assemble_ymu(p, parts.y_b);
    let j_hat = parts.kin.j_new_t_with(theta_kin_hat);
    let w_hat = parts.y_c * theta_c_hat - parts.ks;

    let block_a = &j_hat * parts.y_a;
    let block_eta = -(&parts.kin.y * &y_eta);
    let block_mu = parts.y_c * &y_mu;
    let block_b = -(&w_hat * parts.y_b);

    let widths = [block_a.ncols(), block_eta.ncols(), block_mu.ncols(), block_b.ncols()];
    let mut y_f = DMatrix::zeros(n, widths.iter().sum());
    let mut col = 0;
    for block in [&block_a, &block_eta, &block_mu, &block_b] {
        y_f.columns_mut(col, block.ncols()).copy_from(block);
        col += block.ncols();
    }
    y_f /= t_hat;
    Ok((y_f, y_eta, y_mu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-2.0..2.0))
    }

    fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0))
    }

    #[test]
    fn yeta_factorization_matches_direct_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (n, l, m, r) = (3, 3, 4, 16);
        for _ in 0..50 {
            let y = random_matrix(&mut rng, n, l);
            let y_a = random_matrix(&mut rng, m, r);
            let theta_err = random_matrix(&mut rng, l, m);
            let a_err = random_vector(&mut rng, r);
            let direct = &y * &theta_err * (&y_a * &a_err);
            let via = &y * assemble_yeta(l, &y_a) * theta_eta(&theta_err, &a_err);
            assert!(linalg::rel_residual_vec(&via, &direct, 1e-12) < 1e-12);
        }
    }

    #[test]
    fn yeta_zero_kinematic_error_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y_a = random_matrix(&mut rng, 2, 5);
        let eta = theta_eta(&DMatrix::zeros(1, 2), &random_vector(&mut rng, 5));
        assert_eq!(assemble_yeta(1, &y_a) * eta, DVector::zeros(1));
    }

    #[test]
    fn yeta_scalar_case_collapses() {
        let y_a = DMatrix::from_row_slice(1, 3, &[1.0, -2.0, 0.5]);
        assert_eq!(assemble_yeta(1, &y_a), y_a);
        let a_err = DVector::from_vec(vec![0.1, 0.2, 0.3]);
        let eta = theta_eta(&DMatrix::from_element(1, 1, 2.0), &a_err);
        assert_eq!(eta, a_err * 2.0);
    }

    #[test]
    fn ymu_factorization_matches_direct_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (n, p, k) = (2, 17, 1);
        for _ in 0..50 {
            let y_c = random_matrix(&mut rng, n, p);
            let y_b = random_matrix(&mut rng, 1, k);
            let c_err = random_vector(&mut rng, p);
            let b_err = random_vector(&mut rng, k);
            let direct = &y_c * &c_err * (&y_b * &b_err)[0];
            let via = &y_c * assemble_ymu(p, &y_b) * theta_mu(&c_err, &b_err);
            assert!(linalg::rel_residual_vec(&via, &direct, 1e-12) < 1e-12);
        }
    }

    #[test]
    fn ymu_zero_determinant_error_vanishes() {
        let y_b = DMatrix::from_row_slice(1, 3, &[4.0, -8.0, 4.0]);
        let mu = theta_mu(&DVector::from_vec(vec![2.0]), &DVector::zeros(3));
        assert_eq!(assemble_ymu(1, &y_b) * mu, DVector::zeros(1));
    }

    #[test]
    fn ymu_with_single_determinant_term_is_scaled_identity() {
        let y_b = DMatrix::from_element(1, 1, 0.7);
        assert_eq!(assemble_ymu(4, &y_b), DMatrix::identity(4, 4) * 0.7);
    }

    #[test]
    fn square_split_satisfies_cramer() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in 1..=3 {
            let j = random_matrix(&mut rng, n, n);
            let split = adjugate_determinant(&j, false);
            let lhs = &split.r * &j;
            let rhs = DMatrix::identity(n, n) * split.t;
            assert!(linalg::rel_residual(&lhs, &rhs, 1e-12) < 1e-12);
        }
    }

    #[test]
    fn redundant_split_is_right_pseudo_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let j = random_matrix(&mut rng, 3, 4);
        let split = adjugate_determinant(&j, true);
        let pinv = j.clone().pseudo_inverse(1e-14).unwrap();
        assert!(linalg::rel_residual(&split.pseudo_inverse().unwrap(), &pinv, 1e-12) < 1e-10);
        let jr = &j * &split.r;
        assert!(linalg::rel_residual(&jr, &(DMatrix::identity(3, 3) * split.t), 1e-12) < 1e-10);
    }

    #[test]
    fn singular_split_keeps_finite_adjugate() {
        let j = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.5, 1.0]);
        let split = adjugate_determinant(&j, false);
        assert_eq!(split.t, 0.0);
        assert!(split.r.iter().all(|v| v.is_finite()));
        assert!(split.pseudo_inverse().is_err());
    }

    #[test]
    fn layout_partitions_tile_the_vector() {
        let dims = ModelDims { n: 3, m: 4, l: 3, r: 16, k: 3, p: 1 };
        let layout = ThetaLayout::new(dims);
        assert_eq!(layout.a(), 0..16);
        assert_eq!(layout.eta(), 16..208);
        assert_eq!(layout.mu(), 208..211);
        assert_eq!(layout.b(), 211..214);
        assert_eq!(layout.len(), 214);
    }
}
