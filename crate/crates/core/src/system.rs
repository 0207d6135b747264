//! Zone data in observable canonical form and the two-zone system.

use nalgebra::{Matrix2, Matrix3, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};

/// Minimum accepted imaginary part of the complex eigenvalue pair.
pub const BETA_TOL: f64 = 1e-12;

/// Zone selector: `Minus` governs `x1 < 0`, `Plus` governs `x1 >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ZoneSide {
    Minus,
    Plus,
}

impl ZoneSide {
    pub fn name(self) -> &'static str {
        match self {
            ZoneSide::Minus => "minus",
            ZoneSide::Plus => "plus",
        }
    }

    pub fn other(self) -> Self {
        match self {
            ZoneSide::Minus => ZoneSide::Plus,
            ZoneSide::Plus => ZoneSide::Minus,
        }
    }
}

/// Spectrum of a focus-type zone: real eigenvalue `lambda` and the pair
/// `alpha +- i beta` with `beta > 0`, plus the shape ratio
/// `gamma = (alpha - lambda) / beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenTriple {
    lambda: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
}

impl EigenTriple {
    pub fn new(lambda: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !(beta > BETA_TOL) || !lambda.is_finite() || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::NotFocusType(format!(
                "eigen triple (lambda={lambda}, alpha={alpha}, beta={beta}) needs finite values and beta > {BETA_TOL:e}"
            )));
        }
        Ok(Self { lambda, alpha, beta, gamma: (alpha - lambda) / beta })
    }

    /// Build from `(lambda, gamma, beta)`, recovering `alpha = lambda + gamma * beta`.
    pub fn from_gamma(lambda: f64, gamma: f64, beta: f64) -> Result<Self> {
        Self::new(lambda, lambda + gamma * beta, beta)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `alpha^2 + beta^2`, squared modulus of the complex pair.
    pub fn modulus_sq(&self) -> f64 {
        self.alpha * self.alpha + self.beta * self.beta
    }

    pub fn max_abs(&self) -> f64 {
        self.lambda.abs().max(self.alpha.abs()).max(self.beta)
    }
}

/// Coefficients of `p(s) = s^3 - delta s^2 + m s - d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CanonicalCoeffs {
    pub delta: f64,
    pub m: f64,
    pub d: f64,
}

impl CanonicalCoeffs {
    pub fn new(delta: f64, m: f64, d: f64) -> Self {
        Self { delta, m, d }
    }

    /// Characteristic polynomial coefficients of an arbitrary 3x3 matrix.
    pub fn of_matrix(a: &Matrix3<f64>) -> Self {
        let minors = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)]
            + a[(0, 0)] * a[(2, 2)]
            - a[(0, 2)] * a[(2, 0)]
            + a[(1, 1)] * a[(2, 2)]
            - a[(1, 2)] * a[(2, 1)];
        Self { delta: a.trace(), m: minors, d: a.determinant() }
    }

    /// Evaluate `p(s)`.
    pub fn eval(&self, s: f64) -> f64 {
        ((s - self.delta) * s + self.m) * s - self.d
    }

    fn eval_prime(&self, s: f64) -> f64 {
        (3.0 * s - 2.0 * self.delta) * s + self.m
    }

    fn scale(&self) -> f64 {
        self.delta.abs().max(self.m.abs()).max(self.d.abs()).max(1.0)
    }
}

/// Euclidean norm that does not overflow for components beyond `1e154`.
pub fn scaled_norm(v: &Vector3<f64>) -> f64 {
    let m = v.amax();
    if m == 0.0 || !m.is_finite() {
        m
    } else {
        m * (v / m).norm()
    }
}

pub fn coeffs_from_eigen(eigen: &EigenTriple) -> CanonicalCoeffs {
    let (l, a) = (eigen.lambda, eigen.alpha);
    let rho = eigen.modulus_sq();
    CanonicalCoeffs { delta: l + 2.0 * a, m: 2.0 * l * a + rho, d: l * rho }
}

/// Invert `coeffs_from_eigen`.
///
/// The single real root comes from Cardano's formula (the depressed cubic
/// has a positive discriminant exactly in the focus case) and is polished by
/// Newton; the complex pair follows by deflation. A final Newton step on the
/// full `(lambda, alpha, beta)` system is kept only if it lowers the
/// coefficient residual.
pub fn eigen_from_coeffs(coeffs: &CanonicalCoeffs) -> Result<EigenTriple> {
    let CanonicalCoeffs { delta, m, d } = *coeffs;
    if !(delta.is_finite() && m.is_finite() && d.is_finite()) {
        return Err(Error::NotFocusType("non-finite coefficients".into()));
    }
    let shift = delta / 3.0;
    let p = m - delta * delta / 3.0;
    let q = -d + m * delta / 3.0 - 2.0 * delta * delta * delta / 27.0;
    let disc = 0.25 * q * q + p * p * p / 27.0;
    if !(disc > 0.0) {
        return Err(Error::NotFocusType(format!(
            "characteristic polynomial (delta={delta}, m={m}, d={d}) has three real roots"
        )));
    }
    let big = -0.5 * q - q.signum() * disc.sqrt();
    let u = big.cbrt();
    let t = if u == 0.0 { 0.0 } else { u - p / (3.0 * u) };
    let mut root = t + shift;
    for _ in 0..4 {
        let dp = coeffs.eval_prime(root);
        if dp == 0.0 {
            break;
        }
        let next = root - coeffs.eval(root) / dp;
        if coeffs.eval(next).abs() < coeffs.eval(root).abs() {
            root = next;
        } else {
            break;
        }
    }
    let alpha = 0.5 * (delta - root);
    let rho = if root.abs() > 1e-8 * coeffs.scale().sqrt() { d / root } else { m - 2.0 * root * alpha };
    let beta_sq = rho - alpha * alpha;
    if !(beta_sq > BETA_TOL * BETA_TOL) {
        return Err(Error::NotFocusType(format!(
            "complex pair degenerates (beta^2 = {beta_sq:e}) for delta={delta}, m={m}, d={d}"
        )));
    }
    let mut eigen = EigenTriple::new(root, alpha, beta_sq.sqrt())?;
    if let Some(refined) = refine(&eigen, coeffs) {
        eigen = refined;
    }
    Ok(eigen)
}

fn coeff_residual(e: &EigenTriple, target: &CanonicalCoeffs) -> Vector3<f64> {
    let c = coeffs_from_eigen(e);
    Vector3::new(c.delta - target.delta, c.m - target.m, c.d - target.d)
}

fn refine(e: &EigenTriple, target: &CanonicalCoeffs) -> Option<EigenTriple> {
    let r = coeff_residual(e, target);
    let (l, a, b) = (e.lambda, e.alpha, e.beta);
    let jac = Matrix3::new(
        1.0,
        2.0,
        0.0,
        2.0 * a,
        2.0 * l + 2.0 * a,
        2.0 * b,
        e.modulus_sq(),
        2.0 * l * a,
        2.0 * l * b,
    );
    let step = jac.lu().solve(&(-r))?;
    let cand = EigenTriple::new(l + step.x, a + step.y, b + step.z).ok()?;
    if coeff_residual(&cand, target).norm() < r.norm() {
        Some(cand)
    } else {
        None
    }
}

/// Companion matrix `[[delta, -1, 0], [m, 0, -1], [d, 0, 0]]`.
pub fn companion_matrix(coeffs: &CanonicalCoeffs) -> Matrix3<f64> {
    Matrix3::new(coeffs.delta, -1.0, 0.0, coeffs.m, 0.0, -1.0, coeffs.d, 0.0, 0.0)
}

/// One zone: coefficients, spectrum and companion matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZoneSpec {
    pub coeffs: CanonicalCoeffs,
    pub eigen: EigenTriple,
    pub matrix: Matrix3<f64>,
}

impl ZoneSpec {
    pub fn from_eigen(eigen: EigenTriple) -> Self {
        let coeffs = coeffs_from_eigen(&eigen);
        Self { coeffs, eigen, matrix: companion_matrix(&coeffs) }
    }

    pub fn from_coeffs(coeffs: CanonicalCoeffs) -> Result<Self> {
        let eigen = eigen_from_coeffs(&coeffs)?;
        Ok(Self { coeffs, eigen, matrix: companion_matrix(&coeffs) })
    }

    pub fn focus_plane(&self) -> FocusPlane {
        focus_plane(&self.eigen)
    }

    pub fn invariant_line(&self) -> Vector3<f64> {
        invariant_line(&self.eigen)
    }
}

/// Two-zone system: `minus` for `x1 < 0`, `plus` for `x1 >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PwlSystem {
    pub minus: ZoneSpec,
    pub plus: ZoneSpec,
}

impl PwlSystem {
    pub fn new(minus: ZoneSpec, plus: ZoneSpec) -> Result<Self> {
        let gap = column_gap(&minus.matrix, &plus.matrix);
        if gap > continuity_tol(&minus.matrix, &plus.matrix) {
            return Err(Error::NotContinuous { gap });
        }
        Ok(Self { minus, plus })
    }

    pub fn from_eigen(minus: EigenTriple, plus: EigenTriple) -> Result<Self> {
        Self::new(ZoneSpec::from_eigen(minus), ZoneSpec::from_eigen(plus))
    }

    pub fn zone(&self, side: ZoneSide) -> &ZoneSpec {
        match side {
            ZoneSide::Minus => &self.minus,
            ZoneSide::Plus => &self.plus,
        }
    }

    /// Zone owning a point off the plane, by the sign of `x1`.
    pub fn side_of(x: &Vector3<f64>) -> ZoneSide {
        if x.x < 0.0 {
            ZoneSide::Minus
        } else {
            ZoneSide::Plus
        }
    }

    /// Vector field at `x`.
    pub fn field(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.zone(Self::side_of(x)).matrix * x
    }

    /// The same system with the roles of the zones exchanged.
    pub fn swapped(&self) -> Self {
        Self { minus: self.plus, plus: self.minus }
    }
}

fn column_gap(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let mut gap = 0.0f64;
    for col in 1..3 {
        for row in 0..3 {
            gap = gap.max((a[(row, col)] - b[(row, col)]).abs());
        }
    }
    gap
}

fn continuity_tol(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    1e-12 * a.amax().max(b.amax()).max(1.0)
}

/// Observability matrix with rows `e1^T`, `e1^T A`, `e1^T A^2`.
pub fn observability_matrix(a: &Matrix3<f64>) -> Matrix3<f64> {
    let r1 = a.row(0).into_owned();
    let r2 = r1 * a;
    Matrix3::from_rows(&[Vector3::x().transpose(), r1, r2])
}

/// Change of basis `x -> T x` that puts `a` into companion form.
///
/// `T = L O` with `O` the observability matrix and
/// `L = [[1, 0, 0], [delta, -1, 0], [m, -delta, 1]]` built from the
/// characteristic coefficients of `a`. The first row of `T` is `e1^T`, so the
/// separation plane and the sign of `x1` are preserved.
pub fn canonical_transform(a: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let obs = observability_matrix(a);
    let det = obs.determinant();
    let scale = obs.row(0).norm() * obs.row(1).norm() * obs.row(2).norm();
    if !(det.abs() > 1e-12 * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::NotObservable { det });
    }
    let c = CanonicalCoeffs::of_matrix(a);
    let lower = Matrix3::new(1.0, 0.0, 0.0, c.delta, -1.0, 0.0, c.m, -c.delta, 1.0);
    Ok(lower * obs)
}

/// Bring a raw continuous pair `(A+, A-)` into canonical form.
pub fn canonicalize(raw_plus: &Matrix3<f64>, raw_minus: &Matrix3<f64>) -> Result<PwlSystem> {
    let gap = column_gap(raw_minus, raw_plus);
    if gap > continuity_tol(raw_minus, raw_plus) {
        return Err(Error::NotContinuous { gap });
    }
    let t = canonical_transform(raw_minus)?;
    let t_inv = t.try_inverse().ok_or(Error::NotObservable { det: 0.0 })?;
    let into = |a: &Matrix3<f64>| -> Result<ZoneSpec> {
        let b = t * a * t_inv;
        let coeffs = CanonicalCoeffs::new(b[(0, 0)], b[(1, 0)], b[(2, 0)]);
        // characteristic coefficients are similarity invariants; prefer the
        // ones of the raw matrix when they agree
        let direct = CanonicalCoeffs::of_matrix(a);
        let coeffs = if close(&coeffs, &direct) { direct } else { coeffs };
        ZoneSpec::from_coeffs(coeffs)
    };
    PwlSystem::new(into(raw_minus)?, into(raw_plus)?)
}

fn close(a: &CanonicalCoeffs, b: &CanonicalCoeffs) -> bool {
    let s = a.scale().max(b.scale());
    (a.delta - b.delta).abs() <= 1e-9 * s && (a.m - b.m).abs() <= 1e-9 * s && (a.d - b.d).abs() <= 1e-9 * s
}

/// Focus plane `lambda^2 x1 - lambda y + z = 0`, the invariant plane of the
/// complex pair of one zone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FocusPlane {
    pub normal: Vector3<f64>,
}

impl FocusPlane {
    pub fn eval(&self, x: &Vector3<f64>) -> f64 {
        self.normal.dot(x)
    }

    pub fn contains(&self, x: &Vector3<f64>, tol: f64) -> bool {
        self.eval(x).abs() <= tol * self.normal.norm() * x.norm().max(1.0)
    }

    /// Two independent vectors spanning the plane.
    pub fn basis(&self) -> (Vector3<f64>, Vector3<f64>) {
        let n = self.normal;
        // normal has a unit z-component, so these are always independent
        (Vector3::new(1.0, 0.0, -n.x), Vector3::new(0.0, 1.0, -n.y))
    }
}

pub fn focus_plane(eigen: &EigenTriple) -> FocusPlane {
    let l = eigen.lambda;
    FocusPlane { normal: Vector3::new(l * l, -l, 1.0) }
}

/// Direction `(1, 2 alpha, alpha^2 + beta^2)` of the real eigenvector.
pub fn invariant_line(eigen: &EigenTriple) -> Vector3<f64> {
    Vector3::new(1.0, 2.0 * eigen.alpha, eigen.modulus_sq())
}

/// Modal matrix whose columns are the real and imaginary parts of the
/// complex eigenvector and the real eigenvector.
pub fn modal_matrix(eigen: &EigenTriple) -> Matrix3<f64> {
    let (l, a, b) = (eigen.lambda, eigen.alpha, eigen.beta);
    Matrix3::new(1.0, 0.0, 1.0, l + a, b, 2.0 * a, l * a, l * b, eigen.modulus_sq())
}

pub(crate) fn rotation(angle: f64) -> Matrix2<f64> {
    let (s, c) = angle.sin_cos();
    Matrix2::new(c, -s, s, c)
}
