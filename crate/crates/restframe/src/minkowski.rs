//! Four-vectors, Wigner boosts for time-like momenta and helicity tetrads
//! for null momenta.
//!
//! Signature is (+,−,−,−). Tetrad columns are stored as [`FourVector`]s in
//! the order τ, 1, 2, 3.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix2, Matrix4, Vector3, Vector4};
use num_complex::Complex64;

/// Distance from the excluded ray `k̂ = −ẑ`, relative to `|k|`, below which
/// the helicity boost is rejected.
pub const REFERENCE_RAY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MinkowskiError {
    #[error("wave vector has zero length")]
    ZeroWaveVector,
    #[error("wave vector lies on the excluded ray k^3 = -|k| (|k| + k^3 = {gap:e})")]
    ExcludedRay { gap: f64 },
    #[error("reference scale omega_s must be positive, got {0}")]
    BadScale(f64),
    #[error("SL(2,C) determinant is {0}, expected 1")]
    NotUnimodular(Complex64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FourVector {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl FourVector {
    pub const fn new(t: f64, x: f64, y: f64, z: f64) -> Self {
        Self { t, x, y, z }
    }

    pub fn from_parts(t: f64, v: &Vector3<f64>) -> Self {
        Self::new(t, v.x, v.y, v.z)
    }

    pub fn spatial(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn to_vector(self) -> Vector4<f64> {
        Vector4::new(self.t, self.x, self.y, self.z)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn dot(&self, other: &Self) -> f64 {
        minkowski_dot(self, other)
    }

    pub fn transform(&self, lorentz: &Matrix4<f64>) -> Self {
        Self::from_vector(&(lorentz * self.to_vector()))
    }

    pub fn max_abs(&self) -> f64 {
        self.to_vector().amax()
    }
}

impl Add for FourVector {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.t + o.t, self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for FourVector {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.t - o.t, self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for FourVector {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.t, -self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for FourVector {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.t * s, self.x * s, self.y * s, self.z * s)
    }
}

pub fn minkowski_dot(a: &FourVector, b: &FourVector) -> f64 {
    a.t * b.t - a.x * b.x - a.y * b.y - a.z * b.z
}

/// The metric `diag(1,−1,−1,−1)`.
pub fn metric() -> Matrix4<f64> {
    Matrix4::from_diagonal(&Vector4::new(1.0, -1.0, -1.0, -1.0))
}

/// Columns of the standard Wigner boost taking `(1;0,0,0)` to `(√(1+h²); h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerTetrad {
    pub h: Vector3<f64>,
    /// `ε^μ_A` for `A = τ, 1, 2, 3`.
    pub columns: [FourVector; 4],
}

impl WignerTetrad {
    pub fn matrix(&self) -> Matrix4<f64> {
        columns_matrix(&self.columns)
    }

    pub fn time_column(&self) -> FourVector {
        self.columns[0]
    }

    /// `ε^μ_r` for `r = 1, 2, 3`, zero-based.
    pub fn space_column(&self, r: usize) -> FourVector {
        self.columns[r + 1]
    }
}

fn columns_matrix(cols: &[FourVector; 4]) -> Matrix4<f64> {
    Matrix4::from_columns(&cols.map(|c| c.to_vector()))
}

pub fn wigner_boost_columns(h: &Vector3<f64>) -> WignerTetrad {
    let g = (1.0 + h.norm_squared()).sqrt();
    let mut columns = [FourVector::from_parts(g, h); 4];
    for r in 0..3 {
        let mut space = Vector3::zeros();
        space[r] = 1.0;
        space += h * (h[r] / (1.0 + g));
        columns[r + 1] = FourVector::from_parts(h[r], &space);
    }
    WignerTetrad { h: *h, columns }
}

/// Null-orbit tetrad with its dual null vector.
#[derive(Debug, Clone, PartialEq)]
pub struct HelicityTetrad {
    pub k: Vector3<f64>,
    pub omega_s: f64,
    /// `ε^μ_A(k)` for `A = τ, 1, 2, 3`.
    pub columns: [FourVector; 4],
    pub ktilde: FourVector,
}

impl HelicityTetrad {
    pub fn null_vector(&self) -> FourVector {
        FourVector::from_parts(self.k.norm(), &self.k)
    }

    /// Transverse polarization `ε^μ_λ`, `λ ∈ {0, 1}` for helicity labels 1, 2.
    pub fn polarization(&self, lambda: usize) -> FourVector {
        self.columns[lambda + 1]
    }

    pub fn matrix(&self) -> Matrix4<f64> {
        columns_matrix(&self.columns)
    }
}

/// Spatial polarization vectors `ε⃗_1(k), ε⃗_2(k)` of the helicity frame.
///
/// Shared with the mode grids, which call it once per node.
pub fn helicity_polarizations(k: &Vector3<f64>) -> Result<[Vector3<f64>; 2], MinkowskiError> {
    let kn = k.norm();
    if kn == 0.0 {
        return Err(MinkowskiError::ZeroWaveVector);
    }
    let gap = kn + k.z;
    if gap <= REFERENCE_RAY_TOLERANCE * kn {
        return Err(MinkowskiError::ExcludedRay { gap });
    }
    let pol = |l: usize| {
        let mut e = Vector3::zeros();
        e[l] = 1.0;
        e.x -= k.x * k[l] / (kn * gap);
        e.y -= k.y * k[l] / (kn * gap);
        e.z = -k[l] / kn;
        e
    };
    Ok([pol(0), pol(1)])
}

pub fn helicity_tetrad(k: &Vector3<f64>, omega_s: f64) -> Result<HelicityTetrad, MinkowskiError> {
    if !(omega_s > 0.0) {
        return Err(MinkowskiError::BadScale(omega_s));
    }
    let [e1, e2] = helicity_polarizations(k)?;
    let kn = k.norm();
    let khat = k / kn;
    let plus = 0.5 * (kn / omega_s + omega_s / kn);
    let minus = 0.5 * (kn / omega_s - omega_s / kn);
    let columns = [
        FourVector::from_parts(plus, &(khat * minus)),
        FourVector::from_parts(0.0, &e1),
        FourVector::from_parts(0.0, &e2),
        FourVector::from_parts(minus, &(khat * plus)),
    ];
    let ktilde = FourVector::from_parts(kn, &(-k)) * (1.0 / (2.0 * kn * kn));
    Ok(HelicityTetrad { k: *k, omega_s, columns, ktilde })
}

/// `ε_(±) = (ε_1 ± i ε_2)/√2` as complex four-vectors.
pub fn circular_basis(t: &HelicityTetrad) -> [[Complex64; 4]; 2] {
    let e1 = t.polarization(0).to_vector();
    let e2 = t.polarization(1).to_vector();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let build = |sign: f64| {
        let mut out = [Complex64::new(0.0, 0.0); 4];
        for mu in 0..4 {
            out[mu] = Complex64::new(e1[mu] * s, sign * e2[mu] * s);
        }
        out
    };
    [build(1.0), build(-1.0)]
}

/// Minkowski product of complex four-vectors, conjugating the second.
pub fn complex_dot_conj(a: &[Complex64; 4], b: &[Complex64; 4]) -> Complex64 {
    a[0] * b[0].conj() - a[1] * b[1].conj() - a[2] * b[2].conj() - a[3] * b[3].conj()
}

/// Unimodular 2×2 complex matrix `[[α, β], [γ, δ]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sl2c {
    pub alpha: Complex64,
    pub beta: Complex64,
    pub gamma: Complex64,
    pub delta: Complex64,
}

impl Sl2c {
    pub fn new(
        alpha: Complex64,
        beta: Complex64,
        gamma: Complex64,
        delta: Complex64,
    ) -> Result<Self, MinkowskiError> {
        let det = alpha * delta - beta * gamma;
        if (det - 1.0).norm() > 1e-10 {
            return Err(MinkowskiError::NotUnimodular(det));
        }
        Ok(Self { alpha, beta, gamma, delta })
    }

    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Self { alpha: one, beta: zero, gamma: zero, delta: one }
    }

    /// Rotation by `angle` about the unit vector `axis`.
    pub fn rotation(axis: &Vector3<f64>, angle: f64) -> Self {
        let n = axis.normalize();
        let (s, c) = (0.5 * angle).sin_cos();
        let i = Complex64::i();
        Self {
            alpha: Complex64::new(c, 0.0) - i * s * n.z,
            beta: -i * s * Complex64::new(n.x, -n.y),
            gamma: -i * s * Complex64::new(n.x, n.y),
            delta: Complex64::new(c, 0.0) + i * s * n.z,
        }
    }

    /// Pure boost with rapidity `rapidity` along the unit vector `axis`.
    pub fn boost(axis: &Vector3<f64>, rapidity: f64) -> Self {
        let n = axis.normalize();
        let (s, c) = ((0.5 * rapidity).sinh(), (0.5 * rapidity).cosh());
        Self {
            alpha: Complex64::new(c + s * n.z, 0.0),
            beta: Complex64::new(s * n.x, -s * n.y),
            gamma: Complex64::new(s * n.x, s * n.y),
            delta: Complex64::new(c - s * n.z, 0.0),
        }
    }

    fn as_matrix(&self) -> Matrix2<Complex64> {
        Matrix2::new(self.alpha, self.beta, self.gamma, self.delta)
    }

    pub fn compose(&self, rhs: &Self) -> Self {
        let m = self.as_matrix() * rhs.as_matrix();
        Self { alpha: m[(0, 0)], beta: m[(0, 1)], gamma: m[(1, 0)], delta: m[(1, 1)] }
    }

    /// Lorentz matrix acting as `X ↦ A X A†` on `X = x^μ σ_μ`.
    pub fn lorentz(&self) -> Matrix4<f64> {
        let a = self.as_matrix();
        let mut out = Matrix4::zeros();
        for nu in 0..4 {
            let mut e = Vector4::zeros();
            e[nu] = 1.0;
            let y = a * hermitian_of(&e) * a.adjoint();
            out.set_column(nu, &four_of(&y));
        }
        out
    }
}

fn hermitian_of(x: &Vector4<f64>) -> Matrix2<Complex64> {
    Matrix2::new(
        Complex64::new(x[0] + x[3], 0.0),
        Complex64::new(x[1], -x[2]),
        Complex64::new(x[1], x[2]),
        Complex64::new(x[0] - x[3], 0.0),
    )
}

fn four_of(m: &Matrix2<Complex64>) -> Vector4<f64> {
    Vector4::new(
        0.5 * (m[(0, 0)].re + m[(1, 1)].re),
        m[(1, 0)].re,
        m[(1, 0)].im,
        0.5 * (m[(0, 0)].re - m[(1, 1)].re),
    )
}

/// Little-group element of the null reference orbit.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerRotation {
    pub u1: f64,
    pub u2: f64,
    /// Branch `(−π, π]`; only `2θ` is physical.
    pub theta: f64,
    pub lorentz: Matrix4<f64>,
    /// Polarizations at `Λk` obtained from the little-group law.
    pub transformed: [FourVector; 4],
    pub transformed_ktilde: FourVector,
}

impl WignerRotation {
    /// The 4×4 little-group matrix in tetrad indices.
    pub fn matrix(&self) -> Matrix4<f64> {
        e2_matrix(self.u1, self.u2, self.theta)
    }
}

/// E₂ matrix in the (τ, 1, 2, 3) tetrad basis.
pub fn e2_matrix(u1: f64, u2: f64, theta: f64) -> Matrix4<f64> {
    let (s, c) = (2.0 * theta).sin_cos();
    let uu = u1 * u1 + u2 * u2;
    let a = u1 * c + u2 * s;
    let b = -u1 * s + u2 * c;
    Matrix4::new(
        1.0 + 0.5 * uu, u1, u2, -0.5 * uu,
        a, c, s, -a,
        b, -s, c, -b,
        0.5 * uu, u1, u2, 1.0 - 0.5 * uu,
    )
}

/// Little-group parameters and transformed polarizations for `Λ(A)` acting on `k`.
pub fn wigner_rotation(
    k: &Vector3<f64>,
    omega_s: f64,
    a: &Sl2c,
) -> Result<WignerRotation, MinkowskiError> {
    let tetrad = helicity_tetrad(k, omega_s)?;
    let lorentz = a.lorentz();
    let kv = tetrad.null_vector().transform(&lorentz);
    // the image must stay off the excluded ray
    helicity_polarizations(&kv.spatial())?;

    let kn = k.norm();
    let (al, be, ga, de) = (a.alpha, a.beta, a.gamma, a.delta);
    let kp = Complex64::new(k.x, k.y);
    let km = kp.conj();
    let s = kn + k.z;
    let ca = de * s - ga * km;
    let cb = -be * s + al * km;
    let cc = -ga * s - de * kp;
    let cd = al * s + be * kp;
    let phase = cd.conj() / cd.norm();
    let theta = phase.arg();
    let w = (ca * cc.conj() + cb * cd.conj()) * (omega_s / kn) / (cc.norm_sqr() + cd.norm_sqr());
    let (s2, c2) = (2.0 * theta).sin_cos();
    // w = (u1 c2 + u2 s2) + i (u1 s2 − u2 c2)
    let u1 = w.re * c2 + w.im * s2;
    let u2 = w.re * s2 - w.im * c2;

    let cols = tetrad.columns;
    let kvec = tetrad.null_vector();
    let e1 = cols[1] * c2 - cols[2] * s2 + kvec * (u1 / omega_s);
    let e2 = cols[1] * s2 + cols[2] * c2 + kvec * (u2 / omega_s);
    let uu = u1 * u1 + u2 * u2;
    let a_coef = u1 * c2 + u2 * s2;
    let b_coef = u1 * s2 - u2 * c2;
    let kt = tetrad.ktilde + kvec * (0.5 * uu / (omega_s * omega_s)) + cols[1] * (a_coef / omega_s)
        - cols[2] * (b_coef / omega_s);
    let et = kvec * (1.0 / (2.0 * omega_s)) + kt * omega_s;
    let e3 = kvec * (1.0 / (2.0 * omega_s)) - kt * omega_s;
    let transformed = [et, e1, e2, e3].map(|v| v.transform(&lorentz));
    Ok(WignerRotation {
        u1,
        u2,
        theta,
        transformed_ktilde: kt.transform(&lorentz),
        transformed,
        lorentz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_examples() {
        let e0 = FourVector::new(1.0, 0.0, 0.0, 0.0);
        assert_eq!(minkowski_dot(&e0, &e0), 1.0);
        let n = FourVector::new(1.0, 1.0, 0.0, 0.0);
        assert_eq!(minkowski_dot(&n, &n), 0.0);
        let a = FourVector::new(2.0, 1.0, 1.0, 0.0);
        let b = FourVector::new(3.0, 0.0, 1.0, 2.0);
        assert_eq!(minkowski_dot(&a, &b), 5.0);
    }

    #[test]
    fn boost_at_rest_is_identity() {
        let w = wigner_boost_columns(&Vector3::zeros());
        assert_eq!(w.matrix(), Matrix4::identity());
    }

    #[test]
    fn boost_time_column_matches_generic_boost() {
        let h = Vector3::new(0.6, 0.0, 0.0);
        let w = wigner_boost_columns(&h);
        // generic boost with velocity β = h/γ, γ = √(1+h²)
        let gamma = 1.36f64.sqrt();
        let beta = 0.6 / gamma;
        let mut lam = Matrix4::identity();
        lam[(0, 0)] = gamma;
        lam[(1, 1)] = gamma;
        lam[(0, 1)] = gamma * beta;
        lam[(1, 0)] = gamma * beta;
        let rest = FourVector::new(1.0, 0.0, 0.0, 0.0).transform(&lam);
        assert!((w.time_column() - rest).max_abs() < 1e-15);
        assert!((w.time_column().t - 1.166_190_378_969_06).abs() < 1e-12);
    }

    #[test]
    fn boost_columns_orthonormal() {
        let eta = metric();
        for h in [Vector3::new(0.3, -2.0, 1.1), Vector3::new(7.0, 5.0, -3.0), Vector3::new(0.0, 0.0, 10.0)] {
            let m = wigner_boost_columns(&h).matrix();
            let r = m.transpose() * eta * m - eta;
            assert!(r.amax() < 1e-12, "{h:?}");
        }
    }

    #[test]
    fn tetrad_at_reference_point() {
        let t = helicity_tetrad(&Vector3::new(0.0, 0.0, 1.5), 1.5).unwrap();
        assert!((t.matrix() - Matrix4::identity()).amax() < 1e-15);
    }

    #[test]
    fn tetrad_rejects_singular_inputs() {
        assert_eq!(helicity_tetrad(&Vector3::zeros(), 1.0), Err(MinkowskiError::ZeroWaveVector));
        assert!(matches!(
            helicity_tetrad(&Vector3::new(0.0, 0.0, -2.0), 1.0),
            Err(MinkowskiError::ExcludedRay { .. })
        ));
        assert!(matches!(
            helicity_tetrad(&Vector3::new(1e-13, 0.0, -1.0), 1.0),
            Err(MinkowskiError::ExcludedRay { .. })
        ));
        assert!(helicity_tetrad(&Vector3::new(1e-3, 0.0, -1.0), 1.0).is_ok());
    }

    #[test]
    fn tetrad_null_identities_along_x() {
        let t = helicity_tetrad(&Vector3::new(1.0, 0.0, 0.0), 1.0).unwrap();
        let k = t.null_vector();
        assert!(k.dot(&k).abs() < 1e-15);
        assert!(t.ktilde.dot(&t.ktilde).abs() < 1e-15);
        assert!((k.dot(&t.ktilde) - 1.0).abs() < 1e-15);
        // columns straight from the boost matrix: ε_1 = (0; 0, 0, −1), ε_3 = (0; 1, 0, 0)
        assert!((t.columns[1] - FourVector::new(0.0, 0.0, 0.0, -1.0)).max_abs() < 1e-15);
        assert!((t.columns[2] - FourVector::new(0.0, 0.0, 1.0, 0.0)).max_abs() < 1e-15);
        assert!((t.columns[3] - FourVector::new(0.0, 1.0, 0.0, 0.0)).max_abs() < 1e-15);
    }

    #[test]
    fn circular_basis_at_reference_point() {
        let t = helicity_tetrad(&Vector3::new(0.0, 0.0, 1.0), 1.0).unwrap();
        let [p, m] = circular_basis(&t);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let i = Complex64::i();
        assert!((p[1] - s).norm() < 1e-15 && (p[2] - i * s).norm() < 1e-15);
        assert!((m[1] - s).norm() < 1e-15 && (m[2] + i * s).norm() < 1e-15);
        assert!((complex_dot_conj(&p, &p) + 1.0).norm() < 1e-15);
        assert!(complex_dot_conj(&p, &m).norm() < 1e-15);
    }

    fn sample_wave_vectors() -> Vec<Vector3<f64>> {
        vec![
            Vector3::new(0.4, -1.2, 0.7),
            Vector3::new(-2.0, 0.3, -1.1),
            Vector3::new(0.05, 0.02, -0.9),
            Vector3::new(0.0, 3.0, 0.0),
        ]
    }

    #[test]
    fn null_basis_completeness() {
        let eta = metric();
        for k in sample_wave_vectors() {
            let t = helicity_tetrad(&k, 0.8).unwrap();
            let e = t.matrix();
            assert!((e * eta * e.transpose() - eta).amax() < 1e-12);
            let (kv, kt) = (t.null_vector().to_vector(), t.ktilde.to_vector());
            let mut sum = kv * kt.transpose() + kt * kv.transpose();
            for l in 0..2 {
                let p = t.polarization(l).to_vector();
                sum -= p * p.transpose();
                assert!(t.null_vector().dot(&t.polarization(l)).abs() < 1e-12);
                assert!(t.ktilde.dot(&t.polarization(l)).abs() < 1e-12);
            }
            assert!((sum - eta).amax() < 1e-12);
        }
    }

    #[test]
    fn circular_basis_phase_under_axial_rotation() {
        for k in sample_wave_vectors() {
            for phi in [0.3, -1.7, 2.9] {
                let rot = Sl2c::rotation(&Vector3::z(), phi).lorentz();
                let t = helicity_tetrad(&k, 1.0).unwrap();
                let rotated = helicity_tetrad(&t.null_vector().transform(&rot).spatial(), 1.0).unwrap();
                let before = circular_basis(&t);
                let after = circular_basis(&rotated);
                for (h, sign) in [(0, -1.0), (1, 1.0)] {
                    let phase = Complex64::from_polar(1.0, sign * phi);
                    for mu in 0..4 {
                        let moved: Complex64 = (0..4).map(|nu| before[h][nu] * rot[(mu, nu)]).sum();
                        assert!((moved - phase * after[h][mu]).norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn identity_transformation_has_trivial_little_group() {
        let k = Vector3::new(0.4, -1.2, 0.7);
        let w = wigner_rotation(&k, 1.0, &Sl2c::identity()).unwrap();
        assert!(w.u1.abs() < 1e-15 && w.u2.abs() < 1e-15 && w.theta.abs() < 1e-15);
        let t = helicity_tetrad(&k, 1.0).unwrap();
        for a in 0..4 {
            assert!((w.transformed[a] - t.columns[a]).max_abs() < 1e-14);
        }
    }

    #[test]
    fn sl2c_rejects_non_unimodular() {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        assert!(Sl2c::new(one, zero, zero, one * 2.0).is_err());
    }

    #[test]
    fn sl2c_rotation_is_spatial_rotation() {
        let r = Sl2c::rotation(&Vector3::z(), 0.5).lorentz();
        let v = FourVector::new(0.0, 1.0, 0.0, 0.0).transform(&r);
        assert!((v - FourVector::new(0.0, 0.5f64.cos(), 0.5f64.sin(), 0.0)).max_abs() < 1e-15);
        let b = Sl2c::boost(&Vector3::x(), 0.3).lorentz();
        let eta = metric();
        assert!((b.transpose() * eta * b - eta).amax() < 1e-14);
        assert!((b[(0, 0)] - 0.3f64.cosh()).abs() < 1e-14);
    }

    fn direct_little_group(k: &Vector3<f64>, omega_s: f64, a: &Sl2c) -> Matrix4<f64> {
        let lam = a.lorentz();
        let t = helicity_tetrad(k, omega_s).unwrap();
        let kv = t.null_vector().transform(&lam);
        let t2 = helicity_tetrad(&kv.spatial(), omega_s).unwrap();
        t.matrix().try_inverse().unwrap() * lam.try_inverse().unwrap() * t2.matrix()
    }

    fn sample_transformations() -> Vec<Sl2c> {
        vec![
            Sl2c::rotation(&Vector3::new(0.2, 1.0, -0.4), 0.9),
            Sl2c::boost(&Vector3::new(1.0, -0.3, 0.5), 0.7),
            Sl2c::boost(&Vector3::x(), 1.3).compose(&Sl2c::rotation(&Vector3::z(), 2.1)),
            Sl2c::rotation(&Vector3::y(), -0.6).compose(&Sl2c::boost(&Vector3::new(0.1, 0.4, 1.0), 0.5)),
        ]
    }

    #[test]
    fn closed_form_matches_direct_little_group() {
        for omega_s in [1.0, 2.5] {
            for k in [Vector3::new(0.4, -1.2, 0.7), Vector3::new(2.0, 0.5, -0.3)] {
                for a in sample_transformations() {
                    let w = wigner_rotation(&k, omega_s, &a).unwrap();
                    let direct = direct_little_group(&k, omega_s, &a);
                    let diff = (w.matrix() - direct).amax();
                    assert!(diff < 1e-11, "omega_s={omega_s} k={k:?} diff={diff}\n{direct}\n{}", w.matrix());
                }
            }
        }
    }

    #[test]
    fn transformed_tetrad_matches_tetrad_at_image() {
        let k = Vector3::new(0.4, -1.2, 0.7);
        for a in sample_transformations() {
            let w = wigner_rotation(&k, 1.0, &a).unwrap();
            let kv = FourVector::from_parts(k.norm(), &k).transform(&w.lorentz);
            let t2 = helicity_tetrad(&kv.spatial(), 1.0).unwrap();
            for c in 0..4 {
                assert!((w.transformed[c] - t2.columns[c]).max_abs() < 1e-11);
            }
            assert!((w.transformed_ktilde - t2.ktilde).max_abs() < 1e-11);
        }
    }

    #[test]
    fn little_group_composes() {
        let k = Vector3::new(0.4, -1.2, 0.7);
        let s = sample_transformations();
        let (a1, a2) = (s[1], s[3]);
        let r1 = wigner_rotation(&k, 1.0, &a1).unwrap();
        let k1 = FourVector::from_parts(k.norm(), &k).transform(&a1.lorentz()).spatial();
        let r2 = wigner_rotation(&k1, 1.0, &a2).unwrap();
        let r21 = wigner_rotation(&k, 1.0, &a2.compose(&a1)).unwrap();
        assert!((r21.matrix() - r1.matrix() * r2.matrix()).amax() < 1e-11);
    }
}
