//! Linear Kalman filtering and the random-acceleration box tracking model.
//!
//! Everything here is value-semantic: `kf_predict` and `kf_update` take a
//! belief by reference and return a new one, so filters can be moved across
//! threads or run side by side without coordination.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::voting::BoundingBox;

/// Symmetry tolerance used when validating covariances.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Largest innovation-covariance condition number accepted by `kf_update`.
pub const MAX_CONDITION: f64 = 1e12;

/// Gaussian belief: mean vector plus covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianState {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let state = Self { mean, cov };
        state.validate()?;
        Ok(state)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.mean.len();
        check_square("state covariance", &self.cov, n)?;
        check_finite_vec("state mean", &self.mean)?;
        check_finite_mat("state covariance", &self.cov)?;
        if !is_symmetric(&self.cov, SYMMETRY_TOL) {
            return Err(invalid("state covariance", "not symmetric"));
        }
        Ok(())
    }
}

/// Matrices defining one linear-Gaussian filter:
/// `x' = A x + B u + w`, `y = C x + v`, `w ~ N(0, Rww)`, `v ~ N(0, Rvv)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub rww: DMatrix<f64>,
    pub rvv: DMatrix<f64>,
}

impl LinearModel {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        rww: DMatrix<f64>,
        rvv: DMatrix<f64>,
    ) -> Result<Self> {
        let model = Self { a, b, c, rww, rvv };
        model.validate()?;
        Ok(model)
    }

    /// State dimension.
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    /// Measurement dimension.
    pub fn meas_dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn control_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.nrows();
        check_square("A", &self.a, n)?;
        if self.b.nrows() != n {
            return Err(mismatch("B rows", n, self.b.nrows()));
        }
        if self.c.ncols() != n {
            return Err(mismatch("C columns", n, self.c.ncols()));
        }
        check_square("Rww", &self.rww, n)?;
        check_square("Rvv", &self.rvv, self.c.nrows())?;
        for (name, m) in [
            ("A", &self.a),
            ("B", &self.b),
            ("C", &self.c),
            ("Rww", &self.rww),
            ("Rvv", &self.rvv),
        ] {
            check_finite_mat(name, m)?;
        }
        for (name, m) in [("Rww", &self.rww), ("Rvv", &self.rvv)] {
            if !is_symmetric(m, SYMMETRY_TOL) {
                return Err(invalid(name, "not symmetric"));
            }
            if !is_psd(m, SYMMETRY_TOL) {
                return Err(invalid(name, "not positive semidefinite"));
            }
        }
        Ok(())
    }
}

/// Outcome of a measurement update.
#[derive(Debug, Clone, PartialEq)]
pub struct Update {
    pub state: GaussianState,
    /// `y - C mean` against the prior.
    pub innovation: DVector<f64>,
    /// `C cov C^T + Rvv` against the prior.
    pub innovation_cov: DMatrix<f64>,
}

/// Time update: `mean' = A mean + B u`, `cov' = A cov A^T + Rww`.
pub fn kf_predict(
    state: &GaussianState,
    model: &LinearModel,
    control: &DVector<f64>,
) -> Result<GaussianState> {
    let n = model.state_dim();
    if state.dim() != n {
        return Err(mismatch("predict state", n, state.dim()));
    }
    check_square("predict covariance", &state.cov, n)?;
    if control.len() != model.control_dim() {
        return Err(mismatch("control", model.control_dim(), control.len()));
    }
    check_finite_vec("predict mean", &state.mean)?;
    check_finite_mat("predict covariance", &state.cov)?;
    check_finite_vec("control", control)?;

    let mean = &model.a * &state.mean + &model.b * control;
    let cov = symmetrize(&model.a * &state.cov * model.a.transpose() + &model.rww);
    Ok(GaussianState { mean, cov })
}

/// Prediction without a control input.
pub fn kf_predict_free(state: &GaussianState, model: &LinearModel) -> Result<GaussianState> {
    kf_predict(state, model, &DVector::zeros(model.control_dim()))
}

/// Measurement update with the model's own `C` and `Rvv`.
pub fn kf_update(state: &GaussianState, model: &LinearModel, y: &DVector<f64>) -> Result<Update> {
    update_with(state, &model.c, &model.rvv, y)
}

/// Predicted measurement `C mean` and innovation covariance `C cov C^T + Rvv`.
pub fn predict_measurement(
    state: &GaussianState,
    c: &DMatrix<f64>,
    rvv: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if c.ncols() != state.dim() {
        return Err(mismatch("C columns", state.dim(), c.ncols()));
    }
    check_square("Rvv", rvv, c.nrows())?;
    let mu = c * &state.mean;
    let s = symmetrize(c * &state.cov * c.transpose() + rvv);
    Ok((mu, s))
}

/// Measurement update with an explicit observation matrix and noise.
///
/// Uses the Joseph form `(I-KC) P (I-KC)^T + K R K^T` followed by explicit
/// symmetrization. Innovation covariances whose condition number exceeds
/// [`MAX_CONDITION`] are rejected.
pub fn update_with(
    state: &GaussianState,
    c: &DMatrix<f64>,
    rvv: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<Update> {
    let n = state.dim();
    check_square("update covariance", &state.cov, n)?;
    if y.len() != c.nrows() {
        return Err(mismatch("measurement", c.nrows(), y.len()));
    }
    check_finite_vec("measurement", y)?;
    check_finite_vec("update mean", &state.mean)?;
    check_finite_mat("update covariance", &state.cov)?;
    check_finite_mat("Rvv", rvv)?;

    let (mu, s) = predict_measurement(state, c, rvv)?;
    let chol = checked_cholesky("innovation covariance", &s)?;

    // K^T = S^-1 C P, valid because S and P are symmetric.
    let kt = chol.solve(&(c * &state.cov));
    let k = kt.transpose();
    let innovation = y - mu;
    let mean = &state.mean + &k * &innovation;

    let ikc = DMatrix::<f64>::identity(n, n) - &k * c;
    let cov = symmetrize(&ikc * &state.cov * ikc.transpose() + &k * rvv * &kt);

    Ok(Update {
        state: GaussianState { mean, cov },
        innovation,
        innovation_cov: s,
    })
}

/// Cholesky factor of a symmetric matrix after a condition-number check.
pub(crate) fn checked_cholesky(
    context: &'static str,
    s: &DMatrix<f64>,
) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let condition = condition_number(s);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Degenerate { context, condition });
    }
    s.clone()
        .cholesky()
        .ok_or(Error::Degenerate { context, condition })
}

/// Eigenvalue-ratio condition number of a symmetric matrix; infinite when
/// the smallest eigenvalue is not positive.
pub fn condition_number(s: &DMatrix<f64>) -> f64 {
    if s.is_empty() {
        return 1.0;
    }
    let eig = s.clone().symmetric_eigenvalues();
    let min = eig.min();
    let max = eig.max();
    if min <= 0.0 || !min.is_finite() || !max.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Parameters of the random-acceleration (white-noise acceleration) model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Frame period.
    pub dt: f64,
    /// Acceleration variance, (units/frame^2)^2.
    pub accel_var: f64,
    /// Measurement variance of each observed coordinate.
    pub meas_var: f64,
    /// Initial velocity variance used when a filter (re)initializes.
    #[serde(default = "default_init_vel_var")]
    pub init_vel_var: f64,
}

fn default_init_vel_var() -> f64 {
    100.0
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            dt: 1.0,
            accel_var: 1.0,
            meas_var: 4.0,
            init_vel_var: default_init_vel_var(),
        }
    }
}

/// Constant-velocity kinematics over `axes` independent coordinates driven by
/// white acceleration noise.
///
/// The state is laid out as all positions followed by all velocities, so for
/// `axes = 4` it is `[u v h w du dv dh dw]`. Only positions are observed and
/// `B` has zero columns since the tracker has no exogenous input.
pub fn random_acceleration_model(
    axes: usize,
    dt: f64,
    accel_var: f64,
    meas_var: f64,
) -> Result<LinearModel> {
    if axes == 0 {
        return Err(invalid("axes", "must be at least 1"));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(invalid("dt", format!("must be positive, got {dt}")));
    }
    if !(accel_var >= 0.0) || !accel_var.is_finite() {
        return Err(invalid(
            "accel_var",
            format!("must be >= 0, got {accel_var}"),
        ));
    }
    if !(meas_var >= 0.0) || !meas_var.is_finite() {
        return Err(invalid("meas_var", format!("must be >= 0, got {meas_var}")));
    }

    let n = 2 * axes;
    let mut a = DMatrix::identity(n, n);
    let mut c = DMatrix::zeros(axes, n);
    let mut rww = DMatrix::zeros(n, n);
    let q_pp = accel_var * dt.powi(4) / 4.0;
    let q_pv = accel_var * dt.powi(3) / 2.0;
    let q_vv = accel_var * dt * dt;
    for i in 0..axes {
        a[(i, axes + i)] = dt;
        c[(i, i)] = 1.0;
        rww[(i, i)] = q_pp;
        rww[(i, axes + i)] = q_pv;
        rww[(axes + i, i)] = q_pv;
        rww[(axes + i, axes + i)] = q_vv;
    }
    LinearModel::new(
        a,
        DMatrix::zeros(n, 0),
        c,
        rww,
        DMatrix::identity(axes, axes) * meas_var,
    )
}

/// The 8-state box tracking model observing `(u, v, h, w)`.
pub fn build_track_model(dt: f64, accel_var: f64, meas_var: f64) -> Result<LinearModel> {
    random_acceleration_model(TrackState::AXES, dt, accel_var, meas_var)
}

/// Covariance for a freshly initialized random-acceleration filter: the
/// measurement noise on observed coordinates and `vel_var` on velocities.
pub fn initial_covariance(model: &LinearModel, vel_var: f64) -> DMatrix<f64> {
    let n = model.state_dim();
    let ct = model.c.transpose();
    let observed = &ct * &model.c;
    let mut cov = &ct * &model.rvv * &model.c;
    for i in 0..n {
        if observed[(i, i)] == 0.0 {
            cov[(i, i)] = vel_var;
        }
    }
    cov
}

/// Box tracking state `[u v h w du dv dh dw]` in pixels and pixels/frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackState(pub [f64; 8]);

impl TrackState {
    pub const AXES: usize = 4;

    pub fn from_box(bbox: &BoundingBox) -> Self {
        Self([bbox.u, bbox.v, bbox.h, bbox.w, 0.0, 0.0, 0.0, 0.0])
    }

    pub fn from_vector(v: &DVector<f64>) -> Result<Self> {
        if v.len() != 8 {
            return Err(mismatch("track state", 8, v.len()));
        }
        let mut out = [0.0; 8];
        out.copy_from_slice(v.as_slice());
        Ok(Self(out))
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }

    /// Position part as a box. Sizes are passed through unclamped.
    pub fn bbox(&self) -> BoundingBox {
        BoundingBox {
            u: self.0[0],
            v: self.0[1],
            h: self.0[2],
            w: self.0[3],
        }
    }

    pub fn velocity(&self) -> [f64; 4] {
        [self.0[4], self.0[5], self.0[6], self.0[7]]
    }
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let scale = m.amax().max(1.0);
    (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol * scale))
}

/// All eigenvalues >= -tol (relative to the largest entry when that exceeds 1).
pub fn is_psd(m: &DMatrix<f64>, tol: f64) -> bool {
    if m.is_empty() {
        return true;
    }
    let scale = m.amax().max(1.0);
    m.clone().symmetric_eigenvalues().min() >= -tol * scale
}

pub(crate) fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

pub(crate) fn mismatch(context: &'static str, expected: usize, found: usize) -> Error {
    Error::DimensionMismatch {
        context,
        expected,
        found,
    }
}

fn check_square(context: &'static str, m: &DMatrix<f64>, n: usize) -> Result<()> {
    if m.nrows() != n {
        return Err(mismatch(context, n, m.nrows()));
    }
    if m.ncols() != n {
        return Err(mismatch(context, n, m.ncols()));
    }
    Ok(())
}

pub(crate) fn check_finite_vec(context: &'static str, v: &DVector<f64>) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(context))
    }
}

fn check_finite_mat(context: &'static str, m: &DMatrix<f64>) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(context))
    }
}
