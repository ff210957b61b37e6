//! External sector: the decoupled centre of mass, the external Poincaré
//! generators and the three collective 4-positions built from them.

use nalgebra::{Matrix3, Matrix4, Vector3};

use crate::minkowski::{metric, wigner_boost_columns, FourVector};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KinematicsError {
    #[error("invariant mass times c must be positive, got {0}")]
    NonPositiveMass(f64),
    #[error("no particles given")]
    Empty,
    #[error("transformation is not orthochronous (Λ⁰₀ = {0})")]
    NotOrthochronous(f64),
    #[error("generators do not determine the Jacobi data")]
    Degenerate,
}

/// Non-evolving Jacobi data of the external centre of mass.
///
/// `z` has dimensions of mass × length, `h` is dimensionless.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExternalState {
    pub z: Vector3<f64>,
    pub h: Vector3<f64>,
    mc: f64,
    pub spin: Vector3<f64>,
}

impl ExternalState {
    pub fn new(z: Vector3<f64>, h: Vector3<f64>, mc: f64, spin: Vector3<f64>) -> Result<Self, KinematicsError> {
        if !(mc > 0.0 && mc.is_finite()) {
            return Err(KinematicsError::NonPositiveMass(mc));
        }
        Ok(Self { z, h, mc, spin })
    }

    pub fn mc(&self) -> f64 {
        self.mc
    }

    /// `√(1 + h²)`.
    pub fn gamma(&self) -> f64 {
        (1.0 + self.h.norm_squared()).sqrt()
    }

    /// Unit timelike `h^μ`.
    pub fn velocity(&self) -> FourVector {
        FourVector::from_parts(self.gamma(), &self.h)
    }
}

/// Ten Poincaré generators; `angular_momentum` holds `J^k = ½ε^{kij}J^{ij}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoincareGenerators {
    pub energy: f64,
    pub momentum: Vector3<f64>,
    pub angular_momentum: Vector3<f64>,
    pub boost: Vector3<f64>,
}

impl PoincareGenerators {
    /// Components in the fixed order `P⁰, P, J, K`.
    pub fn to_array(&self) -> [f64; 10] {
        let mut out = [0.0; 10];
        out[0] = self.energy;
        for i in 0..3 {
            out[1 + i] = self.momentum[i];
            out[4 + i] = self.angular_momentum[i];
            out[7 + i] = self.boost[i];
        }
        out
    }
}

pub fn external_generators(s: &ExternalState) -> PoincareGenerators {
    let g = s.gamma();
    PoincareGenerators {
        energy: s.mc * g,
        momentum: s.h * s.mc,
        angular_momentum: s.z.cross(&s.h) + s.spin,
        boost: -s.z * g + s.spin.cross(&s.h) / (1.0 + g),
    }
}

/// Canonical, Fokker–Pryce and Møller collective 4-positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollectiveVariables {
    pub canonical: FourVector,
    pub fokker_pryce: FourVector,
    pub moller: FourVector,
}

pub fn collective_variables(tau: f64, s: &ExternalState) -> CollectiveVariables {
    let g = s.gamma();
    let t = tau + s.h.dot(&s.z) / s.mc;
    let canonical = FourVector::from_parts(g * t, &(s.z / s.mc + s.h * t));
    let sxh = s.spin.cross(&s.h) / s.mc;
    let fokker_pryce = canonical + FourVector::from_parts(0.0, &(sxh / (1.0 + g)));
    let moller = fokker_pryce - FourVector::from_parts(0.0, &(sxh / g));
    CollectiveVariables { canonical, fokker_pryce, moller }
}

/// Radius `|S̄|/(Mc)` of the world tube of the non-covariant centroids.
pub fn moller_radius(mc: f64, spin: &Vector3<f64>) -> Result<f64, KinematicsError> {
    if !(mc > 0.0) {
        return Err(KinematicsError::NonPositiveMass(mc));
    }
    Ok(spin.norm() / mc)
}

/// `x_i^μ = Y^μ(τ) + ε^μ_r(h) η_i^r`.
pub fn world_line(tau: f64, s: &ExternalState, eta: &Vector3<f64>) -> FourVector {
    let y = collective_variables(tau, s).fokker_pryce;
    y + spatial_embedding(&s.h, eta)
}

fn spatial_embedding(h: &Vector3<f64>, v: &Vector3<f64>) -> FourVector {
    let tetrad = wigner_boost_columns(h);
    (0..3).fold(FourVector::default(), |acc, r| acc + tetrad.space_column(r) * v[r])
}

/// `p_i^μ = √(m²c² + κ²) h^μ + ε^μ_r(h) κ^r`, tangent to the world line.
pub fn derived_momentum(s: &ExternalState, kappa: &Vector3<f64>, mass: f64, c: f64) -> FourVector {
    let e = ((mass * c).powi(2) + kappa.norm_squared()).sqrt();
    s.velocity() * e + spatial_embedding(&s.h, kappa)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeParticle {
    pub eta: Vector3<f64>,
    pub kappa: Vector3<f64>,
    pub mass: f64,
}

/// Internal quantities of non-interacting particles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeInternal {
    pub mc: f64,
    pub spin: Vector3<f64>,
    pub momentum: Vector3<f64>,
    /// `−Σ η_i √(m_i²c² + κ_i²)`.
    pub boost: Vector3<f64>,
}

pub fn free_invariant_mass(particles: &[FreeParticle], c: f64) -> Result<FreeInternal, KinematicsError> {
    if particles.is_empty() {
        return Err(KinematicsError::Empty);
    }
    let mut out = FreeInternal { mc: 0.0, spin: Vector3::zeros(), momentum: Vector3::zeros(), boost: Vector3::zeros() };
    for p in particles {
        let e = ((p.mass * c).powi(2) + p.kappa.norm_squared()).sqrt();
        out.mc += e;
        out.spin += p.eta.cross(&p.kappa);
        out.momentum += p.kappa;
        out.boost -= p.eta * e;
    }
    Ok(out)
}

/// Spatial block of `L(Λh)⁻¹ Λ L(h)`, the Wigner rotation of the rest spin.
pub fn wigner_spin_rotation(lorentz: &Matrix4<f64>, h: &Vector3<f64>) -> Matrix3<f64> {
    let hp = FourVector::from_parts((1.0 + h.norm_squared()).sqrt(), h).transform(lorentz).spatial();
    let l = wigner_boost_columns(h).matrix();
    let lp = wigner_boost_columns(&hp).matrix();
    let g = metric();
    let lp_inv = g * lp.transpose() * g;
    (lp_inv * lorentz * l).fixed_view::<3, 3>(1, 1).into_owned()
}

/// Recovers the Jacobi data from external generators and `Mc`.
pub fn external_state_from_generators(g: &PoincareGenerators, mc: f64) -> Result<ExternalState, KinematicsError> {
    let h = g.momentum / mc;
    let gamma = (1.0 + h.norm_squared()).sqrt();
    // J = z×h + S̄ and K = −γz + S̄×h/(1+γ) are linear in (z, S̄)
    let hx = h.cross_matrix();
    let mut m = nalgebra::Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-hx));
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(&Matrix3::identity());
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(&(-Matrix3::identity() * gamma));
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&(-hx / (1.0 + gamma)));
    let mut rhs = nalgebra::Vector6::zeros();
    rhs.fixed_rows_mut::<3>(0).copy_from(&g.angular_momentum);
    rhs.fixed_rows_mut::<3>(3).copy_from(&g.boost);
    let x = m.lu().solve(&rhs).ok_or(KinematicsError::Degenerate)?;
    ExternalState::new(x.fixed_rows::<3>(0).into_owned(), h, mc, x.fixed_rows::<3>(3).into_owned())
}

/// `J^{μν}` with `J^{ij} = ε^{ijk}J^k` and `J^{0i} = K^i`.
fn angular_tensor(g: &PoincareGenerators) -> Matrix4<f64> {
    let mut t = Matrix4::zeros();
    for i in 0..3 {
        t[(0, i + 1)] = g.boost[i];
        t[(i + 1, 0)] = -g.boost[i];
    }
    let j = g.angular_momentum;
    t[(1, 2)] = j.z;
    t[(2, 1)] = -j.z;
    t[(2, 3)] = j.x;
    t[(3, 2)] = -j.x;
    t[(3, 1)] = j.y;
    t[(1, 3)] = -j.y;
    t
}

/// Generators seen after `x ↦ Λx + a`.
pub fn transform_generators(g: &PoincareGenerators, lorentz: &Matrix4<f64>, a: &FourVector) -> PoincareGenerators {
    let p = FourVector::from_parts(g.energy, &g.momentum).transform(lorentz);
    let pv = p.to_vector();
    let av = a.to_vector();
    let t = lorentz * angular_tensor(g) * lorentz.transpose() + av * pv.transpose() - pv * av.transpose();
    PoincareGenerators {
        energy: p.t,
        momentum: p.spatial(),
        angular_momentum: Vector3::new(t[(2, 3)], t[(3, 1)], t[(1, 2)]),
        boost: Vector3::new(t[(0, 1)], t[(0, 2)], t[(0, 3)]),
    }
}

/// Image of the Jacobi data under `x ↦ Λx + a`, with the new value of `τ`.
///
/// The generators transform as a tensor and the data are read back from
/// them; `τ` shifts by `h'_μ a^μ`, the rest time of the translation.
pub fn transform_external(
    s: &ExternalState,
    tau: f64,
    lorentz: &Matrix4<f64>,
    a: &FourVector,
) -> Result<(ExternalState, f64), KinematicsError> {
    let l00 = lorentz[(0, 0)];
    if !(l00 >= 1.0 - 1e-12) {
        return Err(KinematicsError::NotOrthochronous(l00));
    }
    let image = external_state_from_generators(&transform_generators(&external_generators(s), lorentz, a), s.mc)?;
    let tau_new = tau + image.velocity().dot(a);
    Ok((image, tau_new))
}

/// Spin-free transformation law of `z`:
/// `z' = (Λ^i_j − h'^i Λ^0_j/h'^0) z^j + Mc(a^i − h'^i a^0/h'^0)`.
pub fn transform_z_spinless(s: &ExternalState, lorentz: &Matrix4<f64>, a: &FourVector) -> Vector3<f64> {
    let hp4 = lorentz * s.velocity().to_vector();
    let mut z = Vector3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            z[i] += (lorentz[(i + 1, j + 1)] - hp4[i + 1] * lorentz[(0, j + 1)] / hp4[0]) * s.z[j];
        }
    }
    let hp = hp4.fixed_rows::<3>(1).into_owned();
    z + (a.spatial() - hp * (a.t / hp4[0])) * s.mc
}

/// Central-difference Poisson bracket on `(z, h, S̄)` with `{z^i, h^j} = δ^{ij}`
/// and `{S̄^i, S̄^j} = ε^{ijk} S̄^k`.
pub fn external_bracket(
    f: impl Fn(&ExternalState) -> f64,
    g: impl Fn(&ExternalState) -> f64,
    s: &ExternalState,
    step: f64,
) -> f64 {
    let grad = |func: &dyn Fn(&ExternalState) -> f64| {
        let mut out = [[0.0; 3]; 3];
        for (block, row) in out.iter_mut().enumerate() {
            for (i, slot) in row.iter_mut().enumerate() {
                let shifted = |d: f64| {
                    let mut t = *s;
                    match block {
                        0 => t.z[i] += d,
                        1 => t.h[i] += d,
                        _ => t.spin[i] += d,
                    }
                    func(&t)
                };
                *slot = (shifted(step) - shifted(-step)) / (2.0 * step);
            }
        }
        out
    };
    let df = grad(&f);
    let dg = grad(&g);
    let mut b = 0.0;
    for i in 0..3 {
        b += df[0][i] * dg[1][i] - df[1][i] * dg[0][i];
    }
    let fs = Vector3::from(df[2]);
    let gs = Vector3::from(dg[2]);
    b + s.spin.dot(&fs.cross(&gs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minkowski::{minkowski_dot, Sl2c};

    fn sample() -> ExternalState {
        ExternalState::new(Vector3::new(0.4, -1.2, 0.7), Vector3::new(0.3, 0.5, -0.2), 2.5, Vector3::new(0.6, 0.1, -0.9))
            .unwrap()
    }

    #[test]
    fn rest_values() {
        let s = ExternalState::new(Vector3::new(1.0, 2.0, 3.0), Vector3::zeros(), 2.0, Vector3::new(0.0, 0.0, 1.0)).unwrap();
        let g = external_generators(&s);
        assert_eq!(g.energy, 2.0);
        assert_eq!(g.boost, -s.z);
        let spinless = ExternalState { spin: Vector3::zeros(), ..sample() };
        let g = external_generators(&spinless);
        assert!((g.boost + spinless.z * spinless.gamma()).norm() < 1e-15);
        assert!(ExternalState::new(Vector3::zeros(), Vector3::zeros(), 0.0, Vector3::zeros()).is_err());
    }

    #[test]
    fn collective_variables_offsets() {
        let s = sample();
        let cv = collective_variables(0.8, &s);
        let g = s.gamma();
        let sxh = s.spin.cross(&s.h);
        let d1 = cv.fokker_pryce - cv.canonical;
        let d2 = cv.moller - cv.fokker_pryce;
        assert!((d1 - FourVector::from_parts(0.0, &(sxh / (s.mc() * (1.0 + g))))).max_abs() < 1e-15);
        assert!((d2 - FourVector::from_parts(0.0, &(-sxh / (s.mc() * g)))).max_abs() < 1e-15);
        let spinless = ExternalState { spin: Vector3::zeros(), ..s };
        let cv = collective_variables(0.8, &spinless);
        assert_eq!(cv.canonical, cv.fokker_pryce);
        assert_eq!(cv.canonical, cv.moller);
        let rest = ExternalState { h: Vector3::zeros(), ..s };
        let cv = collective_variables(1.5, &rest);
        let want = FourVector::from_parts(1.5, &(s.z / s.mc()));
        for v in [cv.canonical, cv.fokker_pryce, cv.moller] {
            assert!((v - want).max_abs() < 1e-15);
        }
    }

    #[test]
    fn fokker_pryce_rest_time_is_tau() {
        let s = sample();
        let y = collective_variables(2.3, &s).fokker_pryce;
        assert!((minkowski_dot(&s.velocity(), &y) - 2.3).abs() < 1e-13);
    }

    #[test]
    fn moller_radius_values() {
        assert_eq!(moller_radius(1.0, &Vector3::zeros()).unwrap(), 0.0);
        assert_eq!(moller_radius(2.0, &Vector3::new(0.0, 1.0, 0.0)).unwrap(), 0.5);
        let s = Vector3::new(0.3, -0.4, 1.1);
        let a = moller_radius(1.7, &s).unwrap();
        let b = moller_radius(1.7 * 3.2, &(s * 3.2)).unwrap();
        assert!((a - b).abs() < 1e-15);
        assert!(moller_radius(-1.0, &s).is_err());
    }

    #[test]
    fn world_line_and_momentum() {
        let s = sample();
        assert_eq!(world_line(0.4, &s, &Vector3::zeros()), collective_variables(0.4, &s).fokker_pryce);
        let rest = ExternalState { h: Vector3::zeros(), ..s };
        let eta = Vector3::new(0.1, 0.2, 0.3);
        let x = world_line(0.4, &rest, &eta);
        assert!((x - collective_variables(0.4, &rest).fokker_pryce - FourVector::from_parts(0.0, &eta)).max_abs() < 1e-15);
        let (m, c) = (1.3, 2.0);
        assert!((derived_momentum(&s, &Vector3::zeros(), m, c) - s.velocity() * (m * c)).max_abs() < 1e-14);
        let kappa = Vector3::new(0.7, -1.1, 0.4);
        let p = derived_momentum(&s, &kappa, m, c);
        assert!((minkowski_dot(&p, &p) - (m * c).powi(2)).abs() < 1e-12);
        // free motion: the world-line tangent is parallel to p
        let e = ((m * c).powi(2) + kappa.norm_squared()).sqrt();
        let v = kappa / e;
        let dt = 1e-3;
        let tangent = (world_line(1.0 + dt, &s, &(eta + v * (1.0 + dt))) - world_line(1.0, &s, &(eta + v))) * (1.0 / dt);
        assert!((tangent * e - p).max_abs() < 1e-10);
    }

    #[test]
    fn free_pair_sums() {
        let c = 1.0;
        let ps = [
            FreeParticle { eta: Vector3::new(1.0, 0.0, 0.0), kappa: Vector3::new(3.0, 0.0, 0.0), mass: 1.0 },
            FreeParticle { eta: Vector3::new(-1.0, 0.0, 0.0), kappa: Vector3::new(-3.0, 0.0, 0.0), mass: 1.0 },
        ];
        let f = free_invariant_mass(&ps, c).unwrap();
        assert!((f.mc - 2.0 * 10f64.sqrt()).abs() < 1e-14);
        assert_eq!(f.momentum, Vector3::zeros());
        assert_eq!(f.boost, Vector3::zeros());
        let at_rest = [FreeParticle { kappa: Vector3::zeros(), ..ps[0] }, FreeParticle { kappa: Vector3::zeros(), mass: 2.0, ..ps[1] }];
        let f = free_invariant_mass(&at_rest, 1.5).unwrap();
        assert!((f.mc - 4.5).abs() < 1e-15);
        assert_eq!(f.spin, Vector3::zeros());
        assert!(free_invariant_mass(&[], 1.0).is_err());
    }

    #[test]
    fn boost_balance_by_translation() {
        let c = 1.3;
        let mut ps = [
            FreeParticle { eta: Vector3::new(0.9, 0.2, -0.1), kappa: Vector3::new(0.5, 0.1, 0.0), mass: 1.0 },
            FreeParticle { eta: Vector3::new(-0.4, 0.3, 0.6), kappa: Vector3::new(-0.5, -0.1, 0.0), mass: 2.5 },
        ];
        let f = free_invariant_mass(&ps, c).unwrap();
        let d = f.boost / f.mc;
        for p in &mut ps {
            p.eta += d;
        }
        assert!(free_invariant_mass(&ps, c).unwrap().boost.norm() < 1e-14);
    }

    #[test]
    fn lorentz_image_keeps_fokker_pryce_covariant() {
        let s = sample();
        let lam = Sl2c::boost(&Vector3::new(0.2, -0.7, 0.4), 0.6).compose(&Sl2c::rotation(&Vector3::new(1.0, 1.0, 0.0), 0.9));
        let l = lam.lorentz();
        let a = FourVector::new(0.3, -0.5, 1.2, 0.8);
        let tau = 0.7;
        let (sp, taup) = transform_external(&s, tau, &l, &a).unwrap();
        let y = collective_variables(tau, &s).fokker_pryce.transform(&l) + a;
        let yp = collective_variables(taup, &sp).fokker_pryce;
        assert!((y - yp).max_abs() < 1e-12, "{y:?} {yp:?}");
        let x = collective_variables(tau, &s).canonical.transform(&l) + a;
        let xp = collective_variables(taup, &sp).canonical;
        assert!((x - xp).max_abs() > 1e-6);
        assert!((sp.spin - wigner_spin_rotation(&l, &s.h) * s.spin).norm() < 1e-12);
        let r = collective_variables(tau, &s).moller.transform(&l) + a;
        assert!((r - collective_variables(taup, &sp).moller).max_abs() > 1e-6);
    }

    #[test]
    fn spinless_image_matches_closed_form() {
        let s = ExternalState { spin: Vector3::zeros(), ..sample() };
        let l = Sl2c::boost(&Vector3::new(-0.3, 0.1, 0.9), 0.8).compose(&Sl2c::rotation(&Vector3::z(), 1.3)).lorentz();
        let a = FourVector::new(-0.6, 0.2, 0.4, 1.0);
        let (sp, _) = transform_external(&s, 0.0, &l, &a).unwrap();
        assert!((sp.z - transform_z_spinless(&s, &l, &a)).norm() < 1e-12);
        assert!(sp.spin.norm() < 1e-12);
    }

    #[test]
    fn generators_roundtrip_through_state() {
        let s = sample();
        let back = external_state_from_generators(&external_generators(&s), s.mc()).unwrap();
        assert!((back.z - s.z).norm() < 1e-13 && (back.spin - s.spin).norm() < 1e-13);
    }

    #[test]
    fn poincare_algebra_closes() {
        let s = sample();
        let step = 1e-5;
        let gen = |k: usize| move |t: &ExternalState| external_generators(t).to_array()[k];
        let br = |a: usize, b: usize| external_bracket(gen(a), gen(b), &s, step);
        let v = external_generators(&s);
        let eps = |i: usize, j: usize, k: usize| -> f64 {
            match (i, j, k) {
                (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
                (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
                _ => 0.0,
            }
        };
        let tol = 1e-8;
        for i in 0..3 {
            assert!(br(0, 1 + i).abs() < tol);
            assert!(br(0, 4 + i).abs() < tol);
            assert!((br(7 + i, 0) + v.momentum[i]).abs() < tol);
            for j in 0..3 {
                assert!(br(1 + i, 1 + j).abs() < tol);
                let d = if i == j { 1.0 } else { 0.0 };
                assert!((br(7 + i, 1 + j) + d * v.energy).abs() < tol);
                let mut jj = 0.0;
                let mut jp = 0.0;
                let mut jk = 0.0;
                for k in 0..3 {
                    jj += eps(i, j, k) * v.angular_momentum[k];
                    jp += eps(i, j, k) * v.momentum[k];
                    jk += eps(i, j, k) * v.boost[k];
                }
                assert!((br(4 + i, 4 + j) - jj).abs() < tol);
                assert!((br(4 + i, 1 + j) - jp).abs() < tol);
                assert!((br(4 + i, 7 + j) - jk).abs() < tol);
                assert!((br(7 + i, 7 + j) + jj).abs() < tol);
            }
        }
    }
}
