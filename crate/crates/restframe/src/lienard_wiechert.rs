//! Transverse Liénard–Wiechert potential and fields of a single charge in
//! closed form, their `1/c` expansion coefficients and Fourier transforms.
//!
//! All quantities are per unit charge; multiply by the (Grassmann) charge.
//! The core formulas are generic over [`DualNum`] so that gradients with
//! respect to positions and momenta come from forward-mode differentiation.

use std::f64::consts::PI;

use nalgebra::Vector3;
use num_complex::Complex64;
use num_dual::DualNum;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LwError {
    #[error("field point coincides with the particle position")]
    Coincident,
    #[error("wave vector has zero length")]
    ZeroWaveVector,
    #[error("mass and c must be positive (m = {mass}, c = {c})")]
    InvalidParticle { mass: f64, c: f64 },
}

/// Position, momentum and mass of one particle together with `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleKinematics {
    pub eta: Vector3<f64>,
    pub kappa: Vector3<f64>,
    pub mass: f64,
    pub c: f64,
}

impl ParticleKinematics {
    pub fn new(eta: Vector3<f64>, kappa: Vector3<f64>, mass: f64, c: f64) -> Result<Self, LwError> {
        if !(mass > 0.0 && c > 0.0) {
            return Err(LwError::InvalidParticle { mass, c });
        }
        Ok(Self { eta, kappa, mass, c })
    }

    pub fn mc2(&self) -> f64 {
        let mc = self.mass * self.c;
        mc * mc
    }

    /// `√(m²c² + κ²)`.
    pub fn energy_factor(&self) -> f64 {
        (self.mc2() + self.kappa.norm_squared()).sqrt()
    }

    /// `dη/dτ = κ/√(m²c² + κ²)`.
    pub fn velocity(&self) -> Vector3<f64> {
        self.kappa / self.energy_factor()
    }

    fn separation(&self, sigma: &Vector3<f64>) -> Result<Vector3<f64>, LwError> {
        let r = sigma - self.eta;
        if r.norm_squared() == 0.0 {
            return Err(LwError::Coincident);
        }
        Ok(r)
    }
}

pub(crate) type V3<T> = [T; 3];

pub(crate) fn dot<T: DualNum<f64> + Copy>(a: &V3<T>, b: &V3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross<T: DualNum<f64> + Copy>(a: &V3<T>, b: &V3<T>) -> V3<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn to_array(v: &Vector3<f64>) -> V3<f64> {
    [v.x, v.y, v.z]
}

pub(crate) fn from_array(v: V3<f64>) -> Vector3<f64> {
    Vector3::new(v[0], v[1], v[2])
}

/// `A_⊥` of a unit charge at separation `r = σ − η`.
pub(crate) fn potential_core<T: DualNum<f64> + Copy>(r: &V3<T>, kappa: &V3<T>, mc2: f64) -> V3<T> {
    let rn = dot(r, r).sqrt();
    let rh = r.map(|x| x / rn);
    let x = dot(kappa, &rh);
    let e = (dot(kappa, kappa) + mc2).sqrt();
    let ex = (x * x + mc2).sqrt();
    let pref = ((e + ex) * rn * (4.0 * PI)).recip();
    let along = x * e / ex;
    [0, 1, 2].map(|a| (kappa[a] + rh[a] * along) * pref)
}

/// `π_⊥ = +(κ·∂_σ/√(m²c²+κ²)) A_⊥`. It is radial: the full field of a
/// uniformly moving charge minus its Coulomb part.
pub(crate) fn electric_core<T: DualNum<f64> + Copy>(r: &V3<T>, kappa: &V3<T>, mc2: f64) -> V3<T> {
    let r2 = dot(r, r);
    let rn = r2.sqrt();
    let x = dot(kappa, r) / rn;
    let k2 = dot(kappa, kappa);
    let e = (k2 + mc2).sqrt();
    let ex2 = x * x + mc2;
    let ex = ex2.sqrt();
    // m²c²√(m²c²+κ²) − (m²c²+x²)^{3/2}, written without cancellation
    let excess = (k2 - x * x) * mc2 / (e + ex) - x * x * ex;
    let pref = excess / (ex2 * ex * r2 * rn * (4.0 * PI));
    r.map(|v| v * pref)
}

pub(crate) fn magnetic_core<T: DualNum<f64> + Copy>(r: &V3<T>, kappa: &V3<T>, mc2: f64) -> V3<T> {
    let r2 = dot(r, r);
    let rn = r2.sqrt();
    let rh = r.map(|x| x / rn);
    let x = dot(kappa, &rh);
    let ex2 = x * x + mc2;
    let pref = (r2 * ex2 * ex2.sqrt() * (4.0 * PI)).recip() * mc2;
    cross(kappa, &rh).map(|v| v * pref)
}

pub fn lw_potential(sigma: &Vector3<f64>, p: &ParticleKinematics) -> Result<Vector3<f64>, LwError> {
    let r = p.separation(sigma)?;
    Ok(from_array(potential_core(&to_array(&r), &to_array(&p.kappa), p.mc2())))
}

pub fn lw_electric(sigma: &Vector3<f64>, p: &ParticleKinematics) -> Result<Vector3<f64>, LwError> {
    let r = p.separation(sigma)?;
    Ok(from_array(electric_core(&to_array(&r), &to_array(&p.kappa), p.mc2())))
}

pub fn lw_magnetic(sigma: &Vector3<f64>, p: &ParticleKinematics) -> Result<Vector3<f64>, LwError> {
    let r = p.separation(sigma)?;
    Ok(from_array(magnetic_core(&to_array(&r), &to_array(&p.kappa), p.mc2())))
}

/// Fourier transforms `∫d³σ e^{−ik·σ} F(σ)` of the three fields.
#[derive(Debug, Clone, PartialEq)]
pub struct LwFourier {
    pub potential: Vector3<Complex64>,
    pub electric: Vector3<Complex64>,
    pub magnetic: Vector3<Complex64>,
}

/// Real profile `P_⊥(k̂)κ √(m²c²+κ²) / (k² (m²c²+κ²−(κ·k̂)²))` of the
/// potential transform, without the phase `e^{−ik·η}`.
pub fn lw_fourier_profile(k: &Vector3<f64>, kappa: &Vector3<f64>, mc2: f64) -> Vector3<f64> {
    let k2 = k.norm_squared();
    let kh = k / k2.sqrt();
    let x = kappa.dot(&kh);
    let e2 = mc2 + kappa.norm_squared();
    let transverse = kappa - kh * x;
    transverse * (e2.sqrt() / (k2 * (e2 - x * x)))
}

pub fn lw_fourier(k: &Vector3<f64>, p: &ParticleKinematics) -> Result<LwFourier, LwError> {
    if k.norm_squared() == 0.0 {
        return Err(LwError::ZeroWaveVector);
    }
    let phase = Complex64::from_polar(1.0, -k.dot(&p.eta));
    let profile = lw_fourier_profile(k, &p.kappa, p.mc2());
    let potential = profile.map(|v| phase * v);
    let i = Complex64::i();
    let rate = k.dot(&p.velocity());
    let electric = potential.map(|v| i * rate * v);
    let kc = k.map(|v| Complex64::new(v, 0.0));
    let magnetic = kc.cross(&potential).map(|v| i * v);
    Ok(LwFourier { potential, electric, magnetic })
}

/// `(k² − (k·κ)²/(m²c²+κ²)) Ã_⊥ − j̃_⊥`, which vanishes identically.
pub fn lw_wave_residual(k: &Vector3<f64>, p: &ParticleKinematics) -> Result<Vector3<Complex64>, LwError> {
    let f = lw_fourier(k, p)?;
    let e2 = p.mc2() + p.kappa.norm_squared();
    let kk = k.dot(&p.kappa);
    let op = k.norm_squared() - kk * kk / e2;
    let kh = k.normalize();
    let jt = (p.kappa - kh * p.kappa.dot(&kh)) / e2.sqrt();
    let phase = Complex64::from_polar(1.0, -k.dot(&p.eta));
    Ok(f.potential.zip_map(&jt, |a, j| a * op - phase * j))
}

/// Coefficients of `c A_⊥ = α₁ + α₃/c² + …`, `c² π_⊥ = β₂ + …` and
/// `c B = γ₁ + γ₃/c² + …`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionCoeffs {
    pub alpha1: Vector3<f64>,
    pub alpha3: Vector3<f64>,
    pub beta2: Vector3<f64>,
    pub gamma1: Vector3<f64>,
    pub gamma3: Vector3<f64>,
}

pub fn lw_expansion_coeffs(sigma: &Vector3<f64>, p: &ParticleKinematics) -> Result<ExpansionCoeffs, LwError> {
    let r = p.separation(sigma)?;
    let rn = r.norm();
    let rh = r / rn;
    let m = p.mass;
    let kappa = p.kappa;
    let x = kappa.dot(&rh);
    let k2 = kappa.norm_squared();
    let base = kappa + rh * x;
    let alpha1 = base / (8.0 * PI * m * rn);
    let alpha3 = (base * (-0.25 * (k2 + x * x)) + rh * (0.5 * x * (k2 - x * x))) / (8.0 * PI * m.powi(3) * rn);
    let beta2 = rh * ((k2 - 3.0 * x * x) / (8.0 * PI * m * m * rn * rn));
    let kr = kappa.cross(&rh);
    let gamma1 = kr / (4.0 * PI * m * rn * rn);
    let gamma3 = -kr * (3.0 * x * x) / (8.0 * PI * m.powi(3) * rn * rn);
    Ok(ExpansionCoeffs { alpha1, alpha3, beta2, gamma1, gamma3 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn particle(c: f64) -> ParticleKinematics {
        ParticleKinematics::new(Vector3::new(0.1, -0.2, 0.3), Vector3::new(0.7, 0.4, -0.5), 1.3, c).unwrap()
    }

    fn jacobian_fd(f: impl Fn(&Vector3<f64>) -> Vector3<f64>, at: &Vector3<f64>, h: f64) -> [[f64; 3]; 3] {
        // 4th-order central differences; row = component, column = direction
        let mut out = [[0.0; 3]; 3];
        for d in 0..3 {
            let mut e = Vector3::zeros();
            e[d] = h;
            let g = (f(&(at - 2.0 * e)) - 8.0 * f(&(at - e)) + 8.0 * f(&(at + e)) - f(&(at + 2.0 * e))) / (12.0 * h);
            for a in 0..3 {
                out[a][d] = g[a];
            }
        }
        out
    }

    #[test]
    fn static_particle_has_no_transverse_field() {
        let p = ParticleKinematics::new(Vector3::zeros(), Vector3::zeros(), 1.0, 3.0).unwrap();
        let s = Vector3::new(0.3, 1.0, -0.2);
        assert_eq!(lw_potential(&s, &p).unwrap(), Vector3::zeros());
        assert_eq!(lw_electric(&s, &p).unwrap(), Vector3::zeros());
        assert_eq!(lw_magnetic(&s, &p).unwrap(), Vector3::zeros());
        let e = lw_expansion_coeffs(&s, &p).unwrap();
        for v in [e.alpha1, e.alpha3, e.beta2, e.gamma1, e.gamma3] {
            assert_eq!(v, Vector3::zeros());
        }
        let f = lw_fourier(&s, &p).unwrap();
        assert!(f.potential.norm() == 0.0 && f.electric.norm() == 0.0 && f.magnetic.norm() == 0.0);
    }

    #[test]
    fn rejects_singular_points() {
        let p = particle(2.0);
        assert_eq!(lw_potential(&p.eta, &p), Err(LwError::Coincident));
        assert_eq!(lw_electric(&p.eta, &p), Err(LwError::Coincident));
        assert_eq!(lw_magnetic(&p.eta, &p), Err(LwError::Coincident));
        assert_eq!(lw_fourier(&Vector3::zeros(), &p).unwrap_err(), LwError::ZeroWaveVector);
        assert!(ParticleKinematics::new(Vector3::zeros(), Vector3::zeros(), 0.0, 1.0).is_err());
    }

    #[test]
    fn potential_is_divergence_free() {
        let p = particle(1.5);
        for s in [Vector3::new(1.0, 0.5, -0.7), Vector3::new(-0.4, 0.9, 1.3)] {
            let j = jacobian_fd(|x| lw_potential(x, &p).unwrap(), &s, 1e-3);
            let div = j[0][0] + j[1][1] + j[2][2];
            let scale = lw_potential(&s, &p).unwrap().norm() / (s - p.eta).norm();
            assert!(div.abs() < 1e-8 * scale.max(1.0), "div = {div:e}");
        }
    }

    #[test]
    fn electric_is_directional_derivative_of_potential() {
        for c in [1.0, 4.0] {
            let p = particle(c);
            let s = Vector3::new(1.0, 0.5, -0.7);
            let j = jacobian_fd(|x| lw_potential(x, &p).unwrap(), &s, 1e-3);
            let v = p.velocity();
            let fd = Vector3::from_fn(|a, _| j[a][0] * v.x + j[a][1] * v.y + j[a][2] * v.z);
            let e = lw_electric(&s, &p).unwrap();
            assert!((e - fd).norm() < 1e-6 * e.norm(), "c={c}: {e:?} vs {fd:?}");
        }
    }

    #[test]
    fn electric_is_smooth_through_line_of_sight() {
        let p = ParticleKinematics::new(Vector3::zeros(), Vector3::new(0.0, 0.0, 0.8), 1.0, 1.0).unwrap();
        let on = lw_electric(&Vector3::new(0.0, 0.0, 1.0), &p).unwrap();
        let near = lw_electric(&Vector3::new(1e-7, 0.0, 1.0), &p).unwrap();
        assert!(on.iter().all(|v| v.is_finite()));
        assert!((on - near).norm() < 1e-6 * on.norm());
    }

    #[test]
    fn electric_is_accurate_for_slow_particles() {
        let p = ParticleKinematics::new(Vector3::zeros(), Vector3::new(3e-7, 0.0, 0.0), 1.0, 1.0).unwrap();
        let s = Vector3::new(0.6, 0.8, 0.0);
        let e = lw_electric(&s, &p).unwrap();
        let c = lw_expansion_coeffs(&s, &p).unwrap();
        assert!((e - c.beta2).norm() < 1e-10 * c.beta2.norm());
    }

    #[test]
    fn magnetic_is_curl_of_potential() {
        let p = particle(1.5);
        let s = Vector3::new(-0.4, 0.9, 1.3);
        let j = jacobian_fd(|x| lw_potential(x, &p).unwrap(), &s, 1e-3);
        let curl = Vector3::new(j[2][1] - j[1][2], j[0][2] - j[2][0], j[1][0] - j[0][1]);
        let b = lw_magnetic(&s, &p).unwrap();
        assert!((b - curl).norm() < 1e-6 * b.norm());
    }

    #[test]
    fn parity_of_potential_and_magnetic_field_under_inversion() {
        let m2 = 2.0;
        let r = [0.3, -1.1, 0.6];
        let k = [0.9, 0.2, -0.4];
        let neg = |v: [f64; 3]| v.map(|x| -x);
        let a = potential_core(&r, &k, m2);
        let a_flip = potential_core(&neg(r), &neg(k), m2);
        let b = magnetic_core(&r, &k, m2);
        let b_flip = magnetic_core(&neg(r), &neg(k), m2);
        for d in 0..3 {
            assert!((a[d] + a_flip[d]).abs() < 1e-15);
            assert!((b[d] - b_flip[d]).abs() < 1e-15);
        }
    }

    #[test]
    fn leading_coefficient_examples() {
        let p = particle(1.0);
        let s = Vector3::new(1.0, 0.5, -0.7);
        let r = s - p.eta;
        let rh = r.normalize();
        let e = lw_expansion_coeffs(&s, &p).unwrap();
        let want = (p.kappa + rh * p.kappa.dot(&rh)) / (8.0 * PI * p.mass * r.norm());
        assert!((e.alpha1 - want).norm() < 1e-15);
    }

    #[test]
    fn expansions_match_large_c_sweep() {
        let s = Vector3::new(1.0, 0.5, -0.7);
        // residual after subtracting two terms scales as 1/c⁴
        let resid = |c: f64| {
            let p = particle(c);
            let e = lw_expansion_coeffs(&s, &p).unwrap();
            let a = lw_potential(&s, &p).unwrap() * c - e.alpha1 - e.alpha3 / (c * c);
            let b = lw_magnetic(&s, &p).unwrap() * c - e.gamma1 - e.gamma3 / (c * c);
            let pi = lw_electric(&s, &p).unwrap() * (c * c) - e.beta2;
            (a.norm(), b.norm(), pi.norm())
        };
        let (a1, b1, p1) = resid(10.0);
        let (a2, b2, p2) = resid(20.0);
        let (a3, b3, p3) = resid(40.0);
        for (x, y, z) in [(a1, a2, a3), (b1, b2, b3)] {
            assert!((x / y).log2() > 3.8 && (y / z).log2() > 3.8, "{x:e} {y:e} {z:e}");
        }
        // the electric series has only even powers: next term is β₄/c²
        assert!((p1 / p2).log2() > 1.9 && (p2 / p3).log2() > 1.9);
    }

    #[test]
    fn fourier_forms_are_transverse() {
        let p = particle(1.2);
        let k = Vector3::new(0.8, -0.3, 1.7);
        let f = lw_fourier(&k, &p).unwrap();
        let kc = k.map(|v| Complex64::new(v, 0.0));
        assert!(kc.dot(&f.potential).norm() < 1e-15);
        assert!(kc.dot(&f.electric).norm() < 1e-15);
        assert!(kc.dot(&f.magnetic).norm() < 1e-15);
    }

    #[test]
    fn wave_residual_vanishes_for_perpendicular_momentum() {
        let p = ParticleKinematics::new(Vector3::new(0.2, 0.0, 0.0), Vector3::new(0.0, 0.9, 0.0), 1.0, 1.0).unwrap();
        let k = Vector3::new(1.3, 0.0, -0.4);
        let res = lw_wave_residual(&k, &p).unwrap();
        let jt = (p.kappa / p.energy_factor()).norm();
        assert!(res.norm() < 1e-12 * jt);
    }
}
