//! Continuum two-particle functionals built from the Liénard–Wiechert
//! fields of two charges.
//!
//! Every functional is a `d³k` integral of a profile that is homogeneous in
//! `|k|`. The radial integral is done in closed form, which leaves either a
//! signed integral `∫dΩ f(k̂) sgn(k̂·r)` or a great-circle integral over
//! `k̂ ⊥ r`, with `r = η_a − η_b`. Both are evaluated with a rule whose pole
//! points along `r`, so each hemisphere sees a smooth integrand.

use std::f64::consts::PI;
use std::ops::{Add, Mul};

use nalgebra::{SVector, Vector3};
use num_dual::{gradient, DualNum, DualSVec64};

use crate::lienard_wiechert::{cross, dot, potential_core, to_array, LwError, ParticleKinematics, V3};
use crate::quadrature::{gauss_legendre, uniform_azimuth, QuadratureError, Rule};

/// `1/(16π²)`, the common prefactor of the signed integrals.
const SIGNED_NORM: f64 = 1.0 / (16.0 * PI * PI);

/// Angular rule aligned with the separation of a pair.
#[derive(Debug, Clone)]
pub struct PairRule {
    mu: Rule,
    phi: Rule,
}

impl PairRule {
    /// `n_mu` Gauss–Legendre nodes per hemisphere, `n_phi` azimuths.
    pub fn new(n_mu: usize, n_phi: usize) -> Result<Self, QuadratureError> {
        Ok(Self { mu: gauss_legendre(n_mu, 0.0, 1.0)?, phi: uniform_azimuth(n_phi)? })
    }

    /// `∫dΩ f(k̂) sgn(k̂·r)`.
    fn signed<T>(&self, r: &Vector3<f64>, zero: T, f: impl Fn(&Vector3<f64>) -> T) -> T
    where
        T: Add<Output = T> + Mul<f64, Output = T>,
    {
        let (e1, e2, e3) = frame(r);
        let mut acc = zero;
        for (&mu, &wm) in self.mu.nodes.iter().zip(&self.mu.weights) {
            let st = (1.0 - mu * mu).sqrt();
            for (&phi, &wp) in self.phi.nodes.iter().zip(&self.phi.weights) {
                let side = (e1 * phi.cos() + e2 * phi.sin()) * st;
                acc = acc + f(&(side + e3 * mu)) * (wm * wp) + f(&(side - e3 * mu)) * (-wm * wp);
            }
        }
        acc
    }

    /// `∮ f(k̂) dφ` over the great circle `k̂ ⊥ r`.
    fn circle<T>(&self, r: &Vector3<f64>, zero: T, f: impl Fn(&Vector3<f64>) -> T) -> T
    where
        T: Add<Output = T> + Mul<f64, Output = T>,
    {
        let (e1, e2, _) = frame(r);
        let mut acc = zero;
        for (&phi, &wp) in self.phi.nodes.iter().zip(&self.phi.weights) {
            acc = acc + f(&(e1 * phi.cos() + e2 * phi.sin())) * wp;
        }
        acc
    }
}

impl Default for PairRule {
    fn default() -> Self {
        Self::new(24, 48).expect("valid default rule")
    }
}

fn frame(r: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
    let e3 = r.normalize();
    let seed = if e3.x.abs() < 0.8 { Vector3::x() } else { Vector3::y() };
    let e1 = (seed - e3 * seed.dot(&e3)).normalize();
    (e1, e3.cross(&e1), e3)
}

fn lift<T: DualNum<f64> + Copy>(v: &Vector3<f64>) -> V3<T> {
    [T::from(v.x), T::from(v.y), T::from(v.z)]
}

/// `√(m²c²+κ²)`, `κ·k̂` and `D = m²c² + κ² − (κ·k̂)²`.
fn denominators<T: DualNum<f64> + Copy>(kh: &V3<T>, kappa: &V3<T>, mc2: f64) -> (T, T, T) {
    let k2 = dot(kappa, kappa);
    let x = dot(kappa, kh);
    ((k2 + mc2).sqrt(), x, k2 + mc2 - x * x)
}

/// `(P_⊥κ_a·κ_b)(√_a + k̂·κ_a)(√_b + k̂·κ_b)/(D_a D_b)`: the polarization sum
/// of the two mode profiles times `ω²`.
fn coupling_profile<T: DualNum<f64> + Copy>(kh: &V3<T>, ka: &V3<T>, mca: f64, kb: &V3<T>, mcb: f64) -> T {
    let (ea, xa, da) = denominators(kh, ka, mca);
    let (eb, xb, db) = denominators(kh, kb, mcb);
    (dot(ka, kb) - xa * xb) * (ea + xa) * (eb + xb) / (da * db)
}

/// Angular profiles of the electric and magnetic fields: their transforms
/// are `i e^{−ik·η} F(k̂)/|k|`.
fn field_profiles<T: DualNum<f64> + Copy>(kh: &V3<T>, kappa: &V3<T>, mc2: f64) -> [V3<T>; 2] {
    let (e, x, d) = denominators(kh, kappa, mc2);
    let electric = [0, 1, 2].map(|c| x * (kappa[c] - kh[c] * x) / d);
    let magnetic = cross(kh, kappa).map(|v| v * e / d);
    [electric, magnetic]
}

fn separation(a: &ParticleKinematics, b: &ParticleKinematics) -> Result<Vector3<f64>, LwError> {
    let r = a.eta - b.eta;
    if r.norm_squared() == 0.0 {
        return Err(LwError::Coincident);
    }
    Ok(r)
}

/// Continuum value of the pair functional
/// `𝒦_ab = −2 ∫d³k/(2ω(2π)³) (g_a·g_b) sin(k·(η_a − η_b))` and its gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCoupling {
    pub value: f64,
    /// Gradient in `η_a`; the gradient in `η_b` is its negative.
    pub d_eta: Vector3<f64>,
    pub d_kappa_a: Vector3<f64>,
    pub d_kappa_b: Vector3<f64>,
}

pub fn coupling(a: &ParticleKinematics, b: &ParticleKinematics, rule: &PairRule) -> Result<PairCoupling, LwError> {
    let r = separation(a, b)?;
    let (mca, mcb) = (a.mc2(), b.mc2());
    let x = SVector::<f64, 6>::from([a.kappa.x, a.kappa.y, a.kappa.z, b.kappa.x, b.kappa.y, b.kappa.z]);
    let (value, grad) = gradient(
        |v: SVector<DualSVec64<6>, 6>| {
            let ka = [v[0], v[1], v[2]];
            let kb = [v[3], v[4], v[5]];
            rule.signed(&r, DualSVec64::<6>::from(0.0), |kh| coupling_profile(&lift(kh), &ka, mca, &kb, mcb))
                * (-SIGNED_NORM)
        },
        &x,
    );
    let ka = to_array(&a.kappa);
    let kb = to_array(&b.kappa);
    // only the jump of sgn(k̂·r) across the great circle depends on r
    let d_eta = rule.circle(&r, Vector3::zeros(), |kh| *kh * coupling_profile(&to_array(kh), &ka, mca, &kb, mcb))
        * (-2.0 * SIGNED_NORM / r.norm());
    Ok(PairCoupling {
        value,
        d_eta,
        d_kappa_a: Vector3::new(grad[0], grad[1], grad[2]),
        d_kappa_b: Vector3::new(grad[3], grad[4], grad[5]),
    })
}

/// `∫d³σ π_b(σ)/(4π|σ − η_a|)`, the Coulomb potential of particle `a`
/// weighted by the transverse electric field of particle `b`.
pub fn coulomb_moment(a: &ParticleKinematics, b: &ParticleKinematics, rule: &PairRule) -> Result<Vector3<f64>, LwError> {
    let r = separation(a, b)?;
    let kb = to_array(&b.kappa);
    let mcb = b.mc2();
    let out = rule.signed(&r, Vector3::zeros(), |kh| {
        let [e, _] = field_profiles(&to_array(kh), &kb, mcb);
        Vector3::new(e[0], e[1], e[2])
    });
    Ok(out * (-SIGNED_NORM))
}

fn profile_product(kh: &Vector3<f64>, a: &ParticleKinematics, b: &ParticleKinematics) -> f64 {
    let kh = to_array(kh);
    let fa = field_profiles(&kh, &to_array(&a.kappa), a.mc2());
    let fb = field_profiles(&kh, &to_array(&b.kappa), b.mc2());
    dot(&fa[0], &fb[0]) + dot(&fa[1], &fb[1])
}

/// `∫d³σ (π_a·π_b + B_a·B_b)`.
pub fn field_overlap(a: &ParticleKinematics, b: &ParticleKinematics, rule: &PairRule) -> Result<f64, LwError> {
    let r = separation(a, b)?;
    let ring = rule.circle(&r, 0.0, |kh| profile_product(kh, a, b));
    Ok(ring / (8.0 * PI * PI * r.norm()))
}

/// `∫d³σ σ (π_a·π_b + B_a·B_b)`.
pub fn field_moment(a: &ParticleKinematics, b: &ParticleKinematics, rule: &PairRule) -> Result<Vector3<f64>, LwError> {
    let r = separation(a, b)?;
    let ka = to_array(&a.kappa);
    let kb = to_array(&b.kappa);
    let (mca, mcb) = (a.mc2(), b.mc2());
    let tangential = rule.signed(&r, Vector3::zeros(), |kh| {
        let fa = field_profiles(&to_array(kh), &ka, mca);
        let fb = field_profiles(&to_array(kh), &kb, mcb);
        let kbd: V3<DualSVec64<3>> = kb.map(DualSVec64::<3>::from);
        let mut m = -*kh * (dot(&fa[0], &fb[0]) + dot(&fa[1], &fb[1]));
        // Σ_c F_a^c ∇_Ω F_b^c from the degree-zero extension of F_b
        let (_, g) = gradient(
            |n: SVector<DualSVec64<3>, 3>| {
                let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
                let nh = [n[0] / len, n[1] / len, n[2] / len];
                let fb = field_profiles(&nh, &kbd, mcb);
                let fa_d = fa.map(|v| v.map(DualSVec64::<3>::from));
                dot(&fa_d[0], &fb[0]) + dot(&fa_d[1], &fb[1])
            },
            &SVector::<f64, 3>::from([kh.x, kh.y, kh.z]),
        );
        m += Vector3::new(g[0], g[1], g[2]);
        m
    });
    let overlap = field_overlap(a, b, rule)?;
    Ok(b.eta * overlap - tangential * (1.0 / (16.0 * PI * PI)))
}

/// Darwin interaction of an ordered pair per unit charge product,
/// `−½ v_a·A_⊥b(η_a − η_b)`, with gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DarwinPair {
    pub value: f64,
    /// Gradient in `η_a`; the gradient in `η_b` is its negative.
    pub d_eta: Vector3<f64>,
    pub d_kappa_a: Vector3<f64>,
    pub d_kappa_b: Vector3<f64>,
}

pub fn darwin_pair(a: &ParticleKinematics, b: &ParticleKinematics) -> Result<DarwinPair, LwError> {
    let r = separation(a, b)?;
    let (mca, mcb) = (a.mc2(), b.mc2());
    let mut x = SVector::<f64, 9>::zeros();
    for c in 0..3 {
        x[c] = r[c];
        x[3 + c] = a.kappa[c];
        x[6 + c] = b.kappa[c];
    }
    let (value, g) = gradient(
        |v: SVector<DualSVec64<9>, 9>| {
            let r = [v[0], v[1], v[2]];
            let ka = [v[3], v[4], v[5]];
            let kb = [v[6], v[7], v[8]];
            let ea = (dot(&ka, &ka) + mca).sqrt();
            dot(&ka, &potential_core(&r, &kb, mcb)) / ea * (-0.5)
        },
        &x,
    );
    Ok(DarwinPair {
        value,
        d_eta: Vector3::new(g[0], g[1], g[2]),
        d_kappa_a: Vector3::new(g[3], g[4], g[5]),
        d_kappa_b: Vector3::new(g[6], g[7], g[8]),
    })
}

/// Smooth step: 1 for `t ≥ 1`, 0 for `t ≤ 0`, infinitely differentiable.
fn smooth_step(t: f64) -> f64 {
    let h = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    let (a, b) = (h(t), h(1.0 - t));
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

/// `∫d³σ f(σ)` for an integrand with `|σ−a|⁻²` and `|σ−b|⁻²` singularities
/// and `|σ|⁻⁴` decay. A smooth cutoff splits it into a ball around `b`,
/// done in spherical coordinates about `b`, and the rest, done in spherical
/// coordinates about `a` with the pole through `b`; the Jacobian `ρ²`
/// cancels the singularity at each centre.
fn two_centre_integral(a: &Vector3<f64>, b: &Vector3<f64>, n: usize, f: impl Fn(&Vector3<f64>) -> f64 + Sync) -> f64 {
    use rayon::prelude::*;
    let d = (b - a).norm();
    let ball = 0.5 * d;
    let chi = |sigma: &Vector3<f64>| smooth_step(((ball - (sigma - b).norm()) / (0.5 * ball)).clamp(-1.0, 2.0));
    let (e1, e2, e3) = frame(&(b - a));
    let phi = uniform_azimuth(2 * n).expect("n > 0");
    let shell = |centre: &Vector3<f64>, rho: f64, mus: &[(f64, f64)], weight: &(dyn Fn(&Vector3<f64>) -> f64 + Sync)| {
        let mut acc = 0.0;
        for &(mu, wm) in mus {
            let st = (1.0 - mu * mu).max(0.0).sqrt();
            for (&p, &wp) in phi.nodes.iter().zip(&phi.weights) {
                let dir = (e1 * p.cos() + e2 * p.sin()) * st + e3 * mu;
                let sigma = centre + dir * rho;
                acc += wm * wp * weight(&sigma) * f(&sigma);
            }
        }
        acc * rho * rho
    };
    let pairs = |r: &Rule| r.nodes.iter().copied().zip(r.weights.iter().copied()).collect::<Vec<_>>();
    let full_mu = pairs(&gauss_legendre(n, -1.0, 1.0).expect("valid"));
    // the cutoff ball subtends 30° from a
    let cone = (1.0 - 0.25_f64).sqrt();
    let mut split_mu = pairs(&gauss_legendre(n, -1.0, cone).expect("valid"));
    split_mu.extend(pairs(&gauss_legendre(n, cone, 1.0).expect("valid")));
    let inner = |sigma: &Vector3<f64>| chi(sigma);
    let outer = |sigma: &Vector3<f64>| 1.0 - chi(sigma);
    let mut radial: Vec<(Vector3<f64>, f64, f64, bool)> = vec![];
    for (lo, hi) in [(0.0, 0.5 * ball), (0.5 * ball, ball)] {
        for (x, w) in pairs(&gauss_legendre(n, lo, hi).expect("valid")) {
            radial.push((*b, x, w, true));
        }
    }
    for (lo, hi) in [(0.0, 0.5 * d), (0.5 * d, 0.75 * d), (0.75 * d, d), (d, 1.25 * d), (1.25 * d, 1.5 * d)] {
        for (x, w) in pairs(&gauss_legendre(n, lo, hi).expect("valid")) {
            radial.push((*a, x, w, false));
        }
    }
    // tail ρ = 1.5d/u
    for (u, w) in pairs(&gauss_legendre(n, 0.0, 1.0).expect("valid")) {
        let rho = 1.5 * d / u;
        radial.push((*a, rho, w * 1.5 * d / (u * u), false));
    }
    radial
        .par_iter()
        .map(|(centre, rho, w, is_ball)| {
            let v = if *is_ball {
                shell(centre, *rho, &full_mu, &inner)
            } else {
                shell(centre, *rho, &split_mu, &outer)
            };
            w * v
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .sum()
}

/// `∫d³σ γ_a·γ_b` for the leading magnetic coefficients `γ = lim cB` of two
/// particles, by direct position-space quadrature.
pub fn leading_magnetic_overlap(a: &ParticleKinematics, b: &ParticleKinematics) -> Result<f64, LwError> {
    separation(a, b)?;
    let gamma = |p: &ParticleKinematics, sigma: &Vector3<f64>| {
        let r = sigma - p.eta;
        p.kappa.cross(&r) / (4.0 * PI * p.mass * r.norm().powi(3))
    };
    Ok(two_centre_integral(&a.eta, &b.eta, 32, |sigma| {
        if *sigma == a.eta || *sigma == b.eta {
            return 0.0;
        }
        gamma(a, sigma).dot(&gamma(b, sigma))
    }))
}
