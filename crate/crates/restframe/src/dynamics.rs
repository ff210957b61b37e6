//! Internal Poincaré generators in the original and dressed frames, the
//! Darwin interaction, Hamilton's equations for the dressed particles and
//! their integration.
//!
//! In the dressed frame the radiation field is free and evolves by an exact
//! phase rotation, so only the particle sector is stepped. Interactions are
//! pairwise and proportional to `Q_iQ_j`: they are evaluated at the constant
//! parts of the coordinates and multiplied by the charge product, which is
//! exact through degree two in the generators.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::atomic::{AtomicBool, Ordering};

use nalgebra::{SVector, Vector3};
use num_complex::Complex64;
use num_dual::{jacobian, DualNum, DualSVec64};
use rayon::prelude::*;

use crate::canonical_transform::{
    grid_darwin_pair, t_gradients_base, ChargeModel, Frame, ModeAmplitude, Particle,
    ParticleInit, PhaseSpaceState, TransformError,
};
use crate::grassmann::{Grassmann, GrassmannVec3, Scalar};
use crate::lienard_wiechert::{dot, lw_expansion_coeffs, lw_potential, LwError, ParticleKinematics, V3};
use crate::pair_integrals::{
    coulomb_moment, coupling, darwin_pair, field_moment, leading_magnetic_overlap, PairRule,
};
use crate::radiation::{eval_radiation_fields, CVector3, ModeGrid, RadiationError, RadiationState};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Lw(#[from] LwError),
    #[error(transparent)]
    Radiation(#[from] RadiationError),
    #[error("particles {i} and {j} approached to {distance:e}, below the minimum separation {min:e}")]
    Singular { i: usize, j: usize, distance: f64, min: f64 },
    #[error("time step and span must be positive and finite (dt = {dt}, span = {span})")]
    Step { dt: f64, span: f64 },
    #[error("relative matter-energy drift {drift:e} at τ = {tau} exceeds {limit:e}")]
    Drift { tau: f64, drift: f64, limit: f64 },
    #[error("need at least two c values, got {0}")]
    Ladder(usize),
}

/// The ten generators, Grassmann-valued.
#[derive(Debug, Clone, PartialEq)]
pub struct Generators {
    pub energy: Grassmann,
    pub momentum: GrassmannVec3,
    pub angular_momentum: GrassmannVec3,
    pub boost: GrassmannVec3,
}

impl Generators {
    pub fn zero(n: usize) -> Self {
        Self {
            energy: Grassmann::zero(n),
            momentum: GrassmannVec3::zero(n),
            angular_momentum: GrassmannVec3::zero(n),
            boost: GrassmannVec3::zero(n),
        }
    }

    fn sum(&self, other: &Self) -> Self {
        Self {
            energy: &self.energy + &other.energy,
            momentum: &self.momentum + &other.momentum,
            angular_momentum: &self.angular_momentum + &other.angular_momentum,
            boost: &self.boost + &other.boost,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSplit {
    pub matter: Generators,
    pub radiation: Generators,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InternalGenerators {
    pub total: Generators,
    /// Matter and radiation parts; present in the dressed frame only.
    pub split: Option<GeneratorSplit>,
}

impl InternalGenerators {
    /// Internal center of energy `R₊ = −c𝒦/ℰ` from the constant parts.
    pub fn center_of_energy(&self, c: f64) -> Vector3<f64> {
        self.total.boost.base() * (-c / self.total.energy.base())
    }
}

/// How the pair terms of the dressed-frame energy are summed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairSums {
    /// Closed-form continuum Darwin term; what the equations of motion use.
    #[default]
    Continuum,
    /// The same term summed over the state's mode grid, which makes the
    /// energy agree with the original frame on that grid.
    ModeGrid,
}

static TRUNCATION_WARNED: AtomicBool = AtomicBool::new(false);

fn warn_truncation() {
    if !TRUNCATION_WARNED.swap(true, Ordering::Relaxed) {
        log::warn!("dropping terms of degree 3 and higher in the charges; only pairwise interactions are kept");
    }
}

fn degree(mask: u32) -> u32 {
    mask.count_ones()
}

/// Splits Grassmann mode amplitudes into one real field per monomial.
fn field_components(s: &PhaseSpaceState) -> BTreeMap<u32, RadiationState> {
    let grid = s.grid().clone();
    let mut out: BTreeMap<u32, RadiationState> = BTreeMap::new();
    for (n, modes) in s.field.iter().enumerate() {
        for (l, a) in modes.iter().enumerate() {
            for (mask, v) in a.re.terms() {
                out.entry(mask).or_insert_with(|| RadiationState::zero(grid.clone())).amplitudes[n][l].re += v;
            }
            for (mask, v) in a.im.terms() {
                out.entry(mask).or_insert_with(|| RadiationState::zero(grid.clone())).amplitudes[n][l].im += v;
            }
        }
    }
    out
}

struct FieldDerivatives {
    v: Vec<CVector3>,
    /// `L V` per Cartesian component of `V`: `[component][axis][node]`.
    rotation: Vec<[Vec<Complex64>; 3]>,
    /// `∂_k V` per Cartesian component of `V`: `[component][node]`.
    gradient: Vec<Vec<CVector3>>,
}

fn field_derivatives(state: &RadiationState) -> Result<FieldDerivatives, RadiationError> {
    let grid = &state.grid;
    let v: Vec<CVector3> = (0..grid.len()).map(|n| state.vector_amplitude(n)).collect();
    let per: Vec<([Vec<Complex64>; 3], Vec<CVector3>)> = (0..3)
        .into_par_iter()
        .map(|a| {
            let f: Vec<Complex64> = v.iter().map(|x| x[a]).collect();
            Ok((grid.angular_momentum_of(&f)?, grid.gradient_of(&f)?))
        })
        .collect::<Result<_, RadiationError>>()?;
    let (rotation, gradient) = per.into_iter().unzip();
    Ok(FieldDerivatives { v, rotation, gradient })
}

/// Generators of a free field whose amplitudes are Grassmann-valued. Each
/// ordered pair of disjoint monomials contributes the bilinear form of the
/// real-field generators.
fn field_generators(s: &PhaseSpaceState) -> Result<Generators, RadiationError> {
    let n_gen = s.generators();
    let c = s.c();
    let comps = field_components(s);
    let derived: Vec<(u32, FieldDerivatives)> = comps
        .iter()
        .map(|(&m, st)| Ok((m, field_derivatives(st)?)))
        .collect::<Result<_, RadiationError>>()?;
    let grid = s.grid();
    let mut acc: BTreeMap<u32, [f64; 10]> = BTreeMap::new();
    for (m1, d1) in &derived {
        for (m2, d2) in &derived {
            if m1 & m2 != 0 {
                continue;
            }
            let mask = m1 | m2;
            if degree(mask) > 2 {
                warn_truncation();
                continue;
            }
            let e = acc.entry(mask).or_insert([0.0; 10]);
            for (n, node) in grid.nodes().iter().enumerate() {
                let mu = grid.measure(n);
                let (a, b) = (&d1.v[n], &d2.v[n]);
                let ab: Complex64 = (0..3).map(|r| a[r].conj() * b[r]).sum();
                e[0] += mu * node.omega * ab.re;
                for r in 0..3 {
                    e[1 + r] += mu * node.k[r] * ab.re / c;
                }
                let spin = a.map(|x| x.conj()).cross(b);
                for r in 0..3 {
                    let orbital: f64 = (0..3).map(|q| (a[q].conj() * d2.rotation[q][r][n]).re).sum();
                    e[4 + r] += mu * (orbital + spin[r].im) / c;
                    let boost: f64 = (0..3).map(|q| (a[q].conj() * d2.gradient[q][n][r]).im).sum();
                    e[7 + r] += mu * node.omega * boost / c;
                }
            }
        }
    }
    let pick = |i: usize| Grassmann::from_terms(n_gen, acc.iter().map(|(&m, v)| (m, v[i])));
    Ok(Generators {
        energy: pick(0),
        momentum: GrassmannVec3([pick(1), pick(2), pick(3)]),
        angular_momentum: GrassmannVec3([pick(4), pick(5), pick(6)]),
        boost: GrassmannVec3([pick(7), pick(8), pick(9)]),
    })
}

/// Transverse potential `A_⊥(η)` and `∫d³σ π_⊥(σ)/(4π|σ−η|)` of the stored
/// field at a Grassmann-valued point.
fn field_at_point(s: &PhaseSpaceState, eta: &GrassmannVec3) -> (GrassmannVec3, GrassmannVec3) {
    let n = s.generators();
    let grid = s.grid();
    let mut pot = GrassmannVec3::zero(n);
    let mut coul = GrassmannVec3::zero(n);
    for (m, node) in grid.nodes().iter().enumerate() {
        let amp = &s.field[m];
        let zero = Grassmann::zero(n);
        if amp.iter().all(|a| a.re.is_zero() && a.im.is_zero()) {
            continue;
        }
        let phase = eta.dot(&GrassmannVec3::from_real(n, &node.k));
        let (cs, sn) = (phase.cos(), phase.sin());
        let w = 2.0 * grid.measure(m);
        for r in 0..3 {
            let mut vre = zero.clone();
            let mut vim = zero.clone();
            for (l, a) in amp.iter().enumerate() {
                let e = node.polarization[l][r];
                vre += &(&a.re * e);
                vim += &(&a.im * e);
            }
            // Re[V e^{ik·η}] and Re[i V e^{ik·η}]/ω
            pot.0[r] += &((&(&vre * &cs) - &(&vim * &sn)) * w);
            coul.0[r] -= &((&(&vre * &sn) + &(&vim * &cs)) * (w / node.omega));
        }
    }
    (pot, coul)
}

fn expect_frame(s: &PhaseSpaceState, expected: Frame) -> Result<(), DynamicsError> {
    if s.frame() == expected {
        Ok(())
    } else {
        Err(TransformError::WrongFrame { expected, found: s.frame() }.into())
    }
}

fn charges(s: &PhaseSpaceState) -> Vec<Grassmann> {
    (0..s.particles.len()).map(|i| s.charge(i)).collect()
}

fn coulomb_factor(ei: &GrassmannVec3, ej: &GrassmannVec3) -> Grassmann {
    let r = ei - ej;
    Scalar::recip(&Scalar::sqrt(&r.dot(&r))) * (0.25 / PI)
}

/// Generators of a state in the original frame: particles minimally coupled
/// to the full transverse field, the Coulomb double sum and the field.
pub fn internal_generators_original(s: &PhaseSpaceState) -> Result<InternalGenerators, DynamicsError> {
    expect_frame(s, Frame::Original)?;
    let n = s.generators();
    let c = s.c();
    let q = charges(s);
    let mut g = Generators::zero(n);
    for (i, p) in s.particles.iter().enumerate() {
        let (pot, coul) = field_at_point(s, &p.eta);
        let shift = pot.scale(&(&q[i] * (1.0 / c)));
        let kin = &p.kappa - &shift;
        let root = Scalar::sqrt(&(kin.dot(&kin) + Grassmann::constant(n, (p.mass * c).powi(2))));
        g.energy += &(&root * c);
        g.momentum += &p.kappa;
        g.angular_momentum += &p.eta.cross(&p.kappa);
        g.boost = &g.boost - &p.eta.scale(&root);
        g.boost = &g.boost - &coul.scale(&(&q[i] * (1.0 / c)));
    }
    for i in 0..q.len() {
        for j in i + 1..q.len() {
            let (a, b) = (&s.particles[i], &s.particles[j]);
            let qq = &q[i] * &q[j];
            let inv = coulomb_factor(&a.eta, &b.eta);
            g.energy += &(&qq * &inv);
            let centroid = &a.eta + &b.eta;
            g.boost = &g.boost - &centroid.scale(&(&qq * &inv * (0.5 / c)));
        }
    }
    let field = field_generators(s)?;
    Ok(InternalGenerators { total: g.sum(&field), split: None })
}

fn base_kinematics(p: &Particle, c: f64) -> Result<ParticleKinematics, LwError> {
    ParticleKinematics::new(p.eta.base(), p.kappa.base(), p.mass, c)
}

/// Boost terms of an ordered pair `(a, b)` per unit charge product.
fn pair_boost(a: &ParticleKinematics, b: &ParticleKinematics, rule: &PairRule) -> Result<Vector3<f64>, LwError> {
    let cp = coupling(a, b, rule)?;
    let v = a.velocity();
    let along = v.dot(&lw_potential(&a.eta, b)?) - 0.5 * v.dot(&cp.d_eta);
    let w = cp.d_kappa_a * (0.5 * a.energy_factor()) + a.eta * along
        - coulomb_moment(a, b, rule)?
        - field_moment(a, b, rule)? * 0.5;
    Ok(w / a.c)
}

/// Matter generators of the dressed frame.
fn matter_generators(
    particles: &[Particle],
    q: &[Grassmann],
    c: f64,
    sums: PairSums,
    grid: &ModeGrid,
    rule: &PairRule,
    with_boost: bool,
) -> Result<Generators, DynamicsError> {
    let n = q.first().map_or(0, |x| x.generators());
    let mut g = Generators::zero(n);
    for p in particles {
        let root = Scalar::sqrt(&(p.kappa.dot(&p.kappa) + Grassmann::constant(n, (p.mass * c).powi(2))));
        g.energy += &(&root * c);
        g.momentum += &p.kappa;
        g.angular_momentum += &p.eta.cross(&p.kappa);
        if with_boost {
            g.boost = &g.boost - &p.eta.scale(&root);
        }
    }
    let kin: Vec<ParticleKinematics> = particles.iter().map(|p| base_kinematics(p, c)).collect::<Result<_, _>>()?;
    for i in 0..kin.len() {
        for j in i + 1..kin.len() {
            let qq = &q[i] * &q[j];
            if qq.is_zero() {
                continue;
            }
            let (a, b) = (&kin[i], &kin[j]);
            let r = (a.eta - b.eta).norm();
            if r == 0.0 {
                return Err(LwError::Coincident.into());
            }
            let darwin = match sums {
                PairSums::Continuum => darwin_pair(a, b)?.value + darwin_pair(b, a)?.value,
                PairSums::ModeGrid => {
                    let (ma, mb) = (a.mc2(), b.mc2());
                    grid_darwin_pair(grid, (&a.eta, &a.kappa, ma), (&b.eta, &b.kappa, mb))
                        + grid_darwin_pair(grid, (&b.eta, &b.kappa, mb), (&a.eta, &a.kappa, ma))
                }
            };
            g.energy += &(&qq * (0.25 / (PI * r) + darwin));
            if !with_boost {
                continue;
            }
            let w = pair_boost(a, b, rule)? + pair_boost(b, a, rule)? - (a.eta + b.eta) / (8.0 * PI * r * c);
            g.boost += &GrassmannVec3::scaled(&qq, &w);
        }
    }
    Ok(g)
}

/// Generators of a dressed-frame state with their matter/radiation split.
pub fn internal_generators_hatted(
    s: &PhaseSpaceState,
    sums: PairSums,
    rule: &PairRule,
) -> Result<InternalGenerators, DynamicsError> {
    expect_frame(s, Frame::Hatted)?;
    hatted_generators(s, sums, rule, true)
}

fn hatted_generators(
    s: &PhaseSpaceState,
    sums: PairSums,
    rule: &PairRule,
    with_boost: bool,
) -> Result<InternalGenerators, DynamicsError> {
    let matter = matter_generators(&s.particles, &charges(s), s.c(), sums, s.grid(), rule, with_boost)?;
    let mut radiation = field_generators(s)?;
    if !with_boost {
        radiation.boost = GrassmannVec3::zero(s.generators());
    }
    Ok(InternalGenerators { total: matter.sum(&radiation), split: Some(GeneratorSplit { matter, radiation }) })
}

/// Coefficient of `Q_1Q_2` in the Darwin interaction of two particles at
/// separation `r = η_1 − η_2`.
pub fn darwin_potential(
    r: &Vector3<f64>,
    kappa1: &Vector3<f64>,
    kappa2: &Vector3<f64>,
    m1: f64,
    m2: f64,
    c: f64,
) -> Result<f64, LwError> {
    let a = ParticleKinematics::new(*r, *kappa1, m1, c)?;
    let b = ParticleKinematics::new(Vector3::zeros(), *kappa2, m2, c)?;
    Ok(darwin_pair(&a, &b)?.value + darwin_pair(&b, &a)?.value)
}

/// Mixed particle–radiation terms that appear when the original-frame
/// generators are written in dressed variables. Entry `i` is the
/// coefficient of `Q_i`; each vanishes mode by mode.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossTerms {
    pub energy: Vec<f64>,
    pub momentum: Vec<Vector3<f64>>,
    pub angular_momentum: Vec<Vector3<f64>>,
    pub boost: Vec<Vector3<f64>>,
}

impl CrossTerms {
    pub fn max_abs(&self) -> f64 {
        let vmax = |v: &[Vector3<f64>]| v.iter().fold(0.0_f64, |a, x| a.max(x.amax()));
        self.energy
            .iter()
            .fold(0.0_f64, |a, x| a.max(x.abs()))
            .max(vmax(&self.momentum))
            .max(vmax(&self.angular_momentum))
            .max(vmax(&self.boost))
    }
}

/// `V_s(k) = P_⊥κ (ω√(m²c²+κ²) + k·κ)/(k² D)`, the vector amplitude of a
/// unit charge without its phase.
fn lw_vector_profile<T: DualNum<f64> + Copy>(k: &V3<T>, kappa: &Vector3<f64>, mc2: f64) -> V3<T> {
    let k2 = dot(k, k);
    let om = k2.sqrt();
    let kk = k[0] * kappa.x + k[1] * kappa.y + k[2] * kappa.z;
    let e2 = kappa.norm_squared() + mc2;
    let x = kk / om;
    let d = -x * x + e2;
    let fac = (om * e2.sqrt() + kk) / (k2 * d);
    let kap = [kappa.x, kappa.y, kappa.z];
    [0, 1, 2].map(|r| (k[r] * (-kk / k2) + kap[r]) * fac)
}

/// Cross terms at the constant parts of a dressed-frame state.
pub fn cross_terms(s: &PhaseSpaceState) -> Result<CrossTerms, DynamicsError> {
    expect_frame(s, Frame::Hatted)?;
    let c = s.c();
    let grid = s.grid();
    let rad = s.radiation_base();
    let mut out = CrossTerms { energy: vec![], momentum: vec![], angular_momentum: vec![], boost: vec![] };
    for (i, p) in s.particles.iter().enumerate() {
        let kin = base_kinematics(p, c)?;
        let (_, dt_eta, dt_kappa) = t_gradients_base(s, i)?;
        let a_rad = eval_radiation_fields(&rad, 0.0, &kin.eta).potential;
        let v = kin.velocity();
        let mut e_f = 0.0;
        let mut p_f = Vector3::zeros();
        let mut j_f = Vector3::zeros();
        let mut k_f = Vector3::zeros();
        let mut coul = Vector3::zeros();
        for (n, node) in grid.nodes().iter().enumerate() {
            let va = rad.vector_amplitude(n);
            if va.iter().all(|z| z.norm_sqr() == 0.0) {
                continue;
            }
            let mu = grid.measure(n);
            let ph = Complex64::from_polar(1.0, -node.k.dot(&kin.eta));
            let (prof, jac) = jacobian(
                |k: SVector<DualSVec64<3>, 3>| SVector::from(lw_vector_profile(&[k[0], k[1], k[2]], &kin.kappa, kin.mc2())),
                &SVector::<f64, 3>::from([node.k.x, node.k.y, node.k.z]),
            );
            let vs = CVector3::from_fn(|r, _| ph * prof[r]);
            // ∂_q V_s,b = e^{−ik·η}(∂_q G_b − iη_q G_b)
            let dvs = |b: usize, q: usize| ph * Complex64::new(jac[(b, q)], -kin.eta[q] * prof[b]);
            let ab: Complex64 = (0..3).map(|b| va[b].conj() * vs[b]).sum();
            e_f += 2.0 * mu * node.omega * ab.re;
            p_f += node.k * (2.0 * mu * ab.re / c);
            let spin = va.map(|z| z.conj()).cross(&vs);
            for a in 0..3 {
                let (a1, a2) = ((a + 1) % 3, (a + 2) % 3);
                let mut orbital = Complex64::new(0.0, 0.0);
                let mut grad = Complex64::new(0.0, 0.0);
                for b in 0..3 {
                    // (L V)_a = −i (k_{a1} ∂_{a2} − k_{a2} ∂_{a1}) V
                    let lv = -Complex64::i() * (dvs(b, a2) * node.k[a1] - dvs(b, a1) * node.k[a2]);
                    orbital += va[b].conj() * lv;
                    grad += va[b].conj() * dvs(b, a);
                }
                j_f[a] += 2.0 * mu * (orbital.re + spin[a].im) / c;
                k_f[a] += 2.0 * mu * node.omega * grad.im / c;
            }
            let z = va.map(|x| x * Complex64::from_polar(1.0, node.k.dot(&kin.eta)));
            coul -= z.map(|x| x.im) * (2.0 * mu / node.omega);
        }
        let d_eta = -dt_kappa / c;
        let d_kappa = dt_eta / c;
        out.energy.push(v.dot(&dt_eta) - v.dot(&a_rad) + e_f);
        out.momentum.push(dt_eta / c + p_f);
        out.angular_momentum.push(d_eta.cross(&kin.kappa) + kin.eta.cross(&d_kappa) + j_f);
        let root = kin.energy_factor();
        out.boost.push(-d_eta * root - kin.eta * v.dot(&(d_kappa - a_rad / c)) - coul / c + k_f);
    }
    Ok(out)
}

/// Time derivative of a dressed-frame state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDerivative {
    pub eta: Vec<GrassmannVec3>,
    pub kappa: Vec<GrassmannVec3>,
    /// `d(Re a, Im a)/dτ = (ω Im a, −ω Re a)`.
    pub field: Vec<[ModeAmplitude; 2]>,
}

struct Couplings<S> {
    masses: Vec<f64>,
    c: f64,
    pairs: Vec<(usize, usize, S)>,
    min_separation: f64,
}

fn particle_rhs<S: Scalar>(x: &[S], cp: &Couplings<S>) -> Result<Vec<S>, DynamicsError> {
    let c = cp.c;
    let np = cp.masses.len();
    let mut out: Vec<S> = x.iter().map(|v| v.lift(0.0)).collect();
    let mut kin = Vec::with_capacity(np);
    for i in 0..np {
        let kappa = &x[6 * i + 3..6 * i + 6];
        let k2 = kappa[0].clone() * kappa[0].clone() + kappa[1].clone() * kappa[1].clone() + kappa[2].clone() * kappa[2].clone();
        let inv = (k2.clone() + k2.lift((cp.masses[i] * c).powi(2))).sqrt().recip();
        for r in 0..3 {
            out[6 * i + r] = kappa[r].clone() * inv.clone();
        }
        let base = |o: usize| Vector3::new(x[o].base(), x[o + 1].base(), x[o + 2].base());
        kin.push(ParticleKinematics::new(base(6 * i), base(6 * i + 3), cp.masses[i], c)?);
    }
    for (i, j, qq) in &cp.pairs {
        let (a, b) = (&kin[*i], &kin[*j]);
        let r = a.eta - b.eta;
        let distance = r.norm();
        if distance < cp.min_separation {
            return Err(DynamicsError::Singular { i: *i, j: *j, distance, min: cp.min_separation });
        }
        let ab = darwin_pair(a, b)?;
        let ba = darwin_pair(b, a)?;
        let grad_eta = -r / (4.0 * PI * distance.powi(3)) + ab.d_eta - ba.d_eta;
        let grad_ka = ab.d_kappa_a + ba.d_kappa_b;
        let grad_kb = ab.d_kappa_b + ba.d_kappa_a;
        for rr in 0..3 {
            out[6 * i + rr] = out[6 * i + rr].clone() + qq.clone() * (grad_ka[rr] / c);
            out[6 * j + rr] = out[6 * j + rr].clone() + qq.clone() * (grad_kb[rr] / c);
            let f = qq.clone() * (grad_eta[rr] / c);
            out[6 * i + 3 + rr] = out[6 * i + 3 + rr].clone() - f.clone();
            out[6 * j + 3 + rr] = out[6 * j + 3 + rr].clone() + f;
        }
    }
    Ok(out)
}

fn particle_vector(s: &PhaseSpaceState) -> Vec<Grassmann> {
    s.particles.iter().flat_map(|p| p.eta.0.iter().chain(p.kappa.0.iter()).cloned()).collect()
}

fn pair_products(s: &PhaseSpaceState) -> Vec<(usize, usize, Grassmann)> {
    let q = charges(s);
    let mut out = vec![];
    for i in 0..q.len() {
        for j in i + 1..q.len() {
            out.push((i, j, &q[i] * &q[j]));
        }
    }
    out
}

fn min_distance(s: &PhaseSpaceState) -> f64 {
    let mut d = f64::INFINITY;
    for i in 0..s.particles.len() {
        for j in i + 1..s.particles.len() {
            d = d.min((s.particles[i].eta.base() - s.particles[j].eta.base()).norm());
        }
    }
    d
}

/// Right-hand side of Hamilton's equations with `H = ℰ_matter/c + ℰ_rad/c`.
pub fn hamilton_rhs(s: &PhaseSpaceState) -> Result<StateDerivative, DynamicsError> {
    expect_frame(s, Frame::Hatted)?;
    let cp = Couplings {
        masses: s.particles.iter().map(|p| p.mass).collect(),
        c: s.c(),
        pairs: pair_products(s),
        min_separation: 0.0,
    };
    let d = particle_rhs(&particle_vector(s), &cp)?;
    let vec3 = |o: usize| GrassmannVec3([d[o].clone(), d[o + 1].clone(), d[o + 2].clone()]);
    let field = s
        .field
        .iter()
        .zip(s.grid().nodes())
        .map(|(m, node)| {
            m.clone().map(|a| ModeAmplitude { re: &a.im * node.omega, im: &a.re * (-node.omega) })
        })
        .collect();
    Ok(StateDerivative {
        eta: (0..s.particles.len()).map(|i| vec3(6 * i)).collect(),
        kappa: (0..s.particles.len()).map(|i| vec3(6 * i + 3)).collect(),
        field,
    })
}

/// Mode amplitudes multiplied by `e^{−iωτ}`.
fn rotate_field(field: &[[ModeAmplitude; 2]], grid: &ModeGrid, tau: f64) -> Vec<[ModeAmplitude; 2]> {
    field
        .iter()
        .zip(grid.nodes())
        .map(|(m, node)| {
            let (sn, cs) = (node.omega * tau).sin_cos();
            m.clone().map(|a| ModeAmplitude {
                re: &(&a.re * cs) + &(&a.im * sn),
                im: &(&a.im * cs) - &(&a.re * sn),
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct FlowOptions {
    pub dt: f64,
    pub tau_span: f64,
    /// Recorded samples after the initial one.
    pub samples: usize,
    /// Minimum particle separation; by default `1e−3` of the initial one.
    pub min_separation: Option<f64>,
    /// Abort when the relative matter-energy drift at a sample exceeds this.
    pub max_energy_drift: Option<f64>,
    /// Evaluate the boost at samples (the costliest generator).
    pub boost: bool,
    pub rule: PairRule,
}

impl FlowOptions {
    pub fn new(tau_span: f64, dt: f64) -> Self {
        Self { dt, tau_span, samples: 100, min_separation: None, max_energy_drift: None, boost: true, rule: PairRule::default() }
    }
}

#[derive(Debug, Clone)]
pub struct TrajectorySample {
    pub tau: f64,
    pub state: PhaseSpaceState,
    pub generators: InternalGenerators,
}

/// Samples of a dressed-frame run, in increasing `τ`.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub samples: Vec<TrajectorySample>,
    pub steps: usize,
    pub dt: f64,
}

impl TrajectoryRecord {
    /// Largest `|f(τ) − f(τ₀)|` over the samples.
    pub fn max_deviation(&self, f: impl Fn(&InternalGenerators) -> f64) -> f64 {
        let f0 = f(&self.samples[0].generators);
        self.samples.iter().map(|s| (f(&s.generators) - f0).abs()).fold(0.0, f64::max)
    }

    pub fn last(&self) -> &TrajectorySample {
        self.samples.last().expect("a record holds at least the initial sample")
    }
}

pub fn integrate(s: &PhaseSpaceState, tau_span: f64, dt: f64) -> Result<TrajectoryRecord, DynamicsError> {
    integrate_with(s, &FlowOptions::new(tau_span, dt))
}

/// Classic fourth-order stepping of the particles; the radiation field is
/// rotated exactly to each sample time.
pub fn integrate_with(s: &PhaseSpaceState, opts: &FlowOptions) -> Result<TrajectoryRecord, DynamicsError> {
    expect_frame(s, Frame::Hatted)?;
    if !(opts.dt > 0.0 && opts.dt.is_finite() && opts.tau_span >= 0.0 && opts.tau_span.is_finite()) {
        return Err(DynamicsError::Step { dt: opts.dt, span: opts.tau_span });
    }
    let min_separation = opts.min_separation.unwrap_or(1e-3 * min_distance(s));
    let masses: Vec<f64> = s.particles.iter().map(|p| p.mass).collect();
    let x0 = particle_vector(s);
    match s.charge_model() {
        ChargeModel::Commuting(e) => {
            let mut pairs = vec![];
            for i in 0..e.len() {
                for j in i + 1..e.len() {
                    pairs.push((i, j, e[i] * e[j]));
                }
            }
            let cp = Couplings { masses, c: s.c(), pairs, min_separation };
            run(s, x0.iter().map(|g| g.base()).collect(), &cp, opts, |_| {})
        }
        ChargeModel::Nilpotent => {
            let cp = Couplings { masses, c: s.c(), pairs: pair_products(s), min_separation };
            let truncate = s.generators() > 2;
            run(s, x0, &cp, opts, |x: &mut [Grassmann]| {
                if truncate {
                    if x.iter().any(|g| g.degree() > 2) {
                        warn_truncation();
                    }
                    for g in x.iter_mut() {
                        *g = g.truncate(2);
                    }
                }
            })
        }
    }
}

fn run<S: Scalar>(
    s: &PhaseSpaceState,
    mut x: Vec<S>,
    cp: &Couplings<S>,
    opts: &FlowOptions,
    post: impl Fn(&mut [S]),
) -> Result<TrajectoryRecord, DynamicsError> {
    let n = s.generators();
    let steps = (opts.tau_span / opts.dt).round() as usize;
    let stride = (steps / opts.samples.max(1)).max(1);
    let field0 = s.field.clone();
    let sample = |tau: f64, x: &[S]| -> Result<TrajectorySample, DynamicsError> {
        let mut state = s.clone();
        for (i, p) in state.particles.iter_mut().enumerate() {
            let g = |o: usize| x[6 * i + o].clone().into_grassmann(n);
            p.eta = GrassmannVec3([g(0), g(1), g(2)]);
            p.kappa = GrassmannVec3([g(3), g(4), g(5)]);
        }
        // the field boost comes from the initial amplitudes, 𝒦_rad(τ) = 𝒦_rad(0) − τ𝒫_rad
        let mut generators = hatted_generators(&state, PairSums::Continuum, &opts.rule, opts.boost)?;
        if opts.boost {
            let sp = generators.split.as_mut().expect("dressed frame has a split");
            let shift = sp.radiation.momentum.scale(&Grassmann::constant(n, tau));
            sp.radiation.boost = &sp.radiation.boost - &shift;
            generators.total.boost = &generators.total.boost - &shift;
        }
        state.field = rotate_field(&field0, s.grid(), tau);
        Ok(TrajectorySample { tau, state, generators })
    };
    let mut samples = vec![sample(0.0, &x)?];
    let e0 = matter_energy(&samples[0].generators);
    let axpy = |x: &[S], k: &[S], h: f64| -> Vec<S> { x.iter().zip(k).map(|(a, b)| a.clone() + b.clone() * h).collect() };
    for step in 1..=steps {
        let h = opts.dt;
        let k1 = particle_rhs(&x, cp)?;
        let k2 = particle_rhs(&axpy(&x, &k1, 0.5 * h), cp)?;
        let k3 = particle_rhs(&axpy(&x, &k2, 0.5 * h), cp)?;
        let k4 = particle_rhs(&axpy(&x, &k3, h), cp)?;
        for (i, xi) in x.iter_mut().enumerate() {
            let inc = (k1[i].clone() + k2[i].clone() * 2.0 + k3[i].clone() * 2.0 + k4[i].clone()) * (h / 6.0);
            *xi = xi.clone() + inc;
        }
        post(&mut x);
        if step % stride == 0 || step == steps {
            let smp = sample(step as f64 * h, &x)?;
            if let Some(limit) = opts.max_energy_drift {
                let drift = ((matter_energy(&smp.generators) - e0) / e0).abs();
                if drift > limit {
                    return Err(DynamicsError::Drift { tau: smp.tau, drift, limit });
                }
            }
            samples.push(smp);
        }
    }
    Ok(TrajectoryRecord { samples, steps, dt: opts.dt })
}

fn matter_energy(g: &InternalGenerators) -> f64 {
    g.split.as_ref().map_or(g.total.energy.base(), |sp| sp.matter.energy.base())
}

/// `(𝒫_int, 𝒦_int)`, which vanish on the rest-frame constraint surface.
pub fn constraint_residuals(s: &PhaseSpaceState, rule: &PairRule) -> Result<(GrassmannVec3, GrassmannVec3), DynamicsError> {
    let g = match s.frame() {
        Frame::Original => internal_generators_original(s)?,
        Frame::Hatted => internal_generators_hatted(s, PairSums::Continuum, rule)?,
    };
    Ok((g.total.momentum, g.total.boost))
}

/// Moves a dressed-frame state onto the rest-frame constraint surface:
/// each `κ̂_i` is shifted by `−(m_i/M)𝒫_int`, then all positions are
/// translated by `c𝒦_int/ℰ_matter`. Both shifts may be Grassmann-valued.
pub fn project_rest_frame(s: &PhaseSpaceState, rule: &PairRule) -> Result<PhaseSpaceState, DynamicsError> {
    expect_frame(s, Frame::Hatted)?;
    let n = s.generators();
    let total_mass: f64 = s.particles.iter().map(|p| p.mass).sum();
    let g = internal_generators_hatted(s, PairSums::Continuum, rule)?;
    let mut out = s.clone();
    for p in out.particles.iter_mut() {
        let shift = g.total.momentum.scale(&Grassmann::constant(n, p.mass / total_mass));
        p.kappa = &p.kappa - &shift;
    }
    let g = internal_generators_hatted(&out, PairSums::Continuum, rule)?;
    let energy = &g.split.as_ref().expect("dressed frame has a split").matter.energy;
    let d = g.total.boost.scale(&(Scalar::recip(energy) * s.c()));
    for p in out.particles.iter_mut() {
        p.eta += &d;
    }
    Ok(out)
}

/// One rung of the non-relativistic ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NrRow {
    pub c: f64,
    /// `ℰ − Σmc² − Σκ²/2m − Coulomb`.
    pub energy_residual: f64,
    /// The `1/c²` term predicted from the leading expansion coefficients.
    pub energy_prediction: f64,
    /// `c²` times the charge-weighted Darwin interaction.
    pub darwin_scaled: f64,
    /// Its `c → ∞` limit from the leading field coefficients.
    pub darwin_limit: f64,
    /// `|𝒦/c + Σ m η|`.
    pub boost_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NrLimitReport {
    pub rows: Vec<NrRow>,
    /// Fitted slopes of `log|residual|` against `log c`.
    pub energy_order: f64,
    pub darwin_order: f64,
    pub boost_order: f64,
}

fn fitted_order(c: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = c.iter().zip(y).map(|(c, y)| (c.ln(), y.abs().ln())).collect();
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Sweeps `c` at fixed positions, momenta, masses and real charges.
pub fn nr_limit_report(
    particles: &[ParticleInit],
    charges: &[f64],
    c_values: &[f64],
    rule: &PairRule,
) -> Result<NrLimitReport, DynamicsError> {
    if c_values.len() < 2 {
        return Err(DynamicsError::Ladder(c_values.len()));
    }
    if charges.len() != particles.len() {
        return Err(TransformError::ChargeCount { expected: particles.len(), got: charges.len() }.into());
    }
    let n = particles.len();
    let q: Vec<Grassmann> = charges.iter().map(|&e| Grassmann::constant(n, e)).collect();
    let parts: Vec<Particle> = particles
        .iter()
        .map(|p| Particle { eta: GrassmannVec3::from_real(n, &p.eta), kappa: GrassmannVec3::from_real(n, &p.kappa), mass: p.mass })
        .collect();
    let unused = ModeGrid::from_nodes(&[])?;
    let mut rows = vec![];
    for &c in c_values {
        let g = matter_generators(&parts, &q, c, PairSums::Continuum, &unused, rule, true)?;
        let kin: Vec<ParticleKinematics> = particles
            .iter()
            .map(|p| ParticleKinematics::new(p.eta, p.kappa, p.mass, c))
            .collect::<Result<_, _>>()?;
        let mut newtonian = 0.0;
        let mut quartic = 0.0;
        let mut centroid = Vector3::zeros();
        for p in particles {
            let k2 = p.kappa.norm_squared();
            newtonian += p.mass * c * c + k2 / (2.0 * p.mass);
            quartic -= k2 * k2 / (8.0 * p.mass.powi(3));
            centroid += p.eta * p.mass;
        }
        let mut darwin = 0.0;
        let mut limit = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let ee = charges[i] * charges[j];
                if i < j {
                    newtonian += ee / (4.0 * PI * (kin[i].eta - kin[j].eta).norm());
                }
                darwin += ee * darwin_pair(&kin[i], &kin[j])?.value;
                let alpha = lw_expansion_coeffs(&kin[i].eta, &kin[j])?.alpha1;
                let overlap = leading_magnetic_overlap(&kin[i], &kin[j])?;
                limit += ee * (-(kin[i].kappa / kin[i].mass).dot(&alpha) + 0.5 * overlap);
            }
        }
        rows.push(NrRow {
            c,
            energy_residual: g.energy.base() - newtonian,
            energy_prediction: (quartic + limit) / (c * c),
            darwin_scaled: c * c * darwin,
            darwin_limit: limit,
            boost_residual: (g.boost.base() / c + centroid).norm(),
        });
    }
    let cs: Vec<f64> = rows.iter().map(|r| r.c).collect();
    Ok(NrLimitReport {
        energy_order: fitted_order(&cs, &rows.iter().map(|r| r.energy_residual).collect::<Vec<_>>()),
        darwin_order: fitted_order(&cs, &rows.iter().map(|r| r.darwin_scaled - r.darwin_limit).collect::<Vec<_>>()),
        boost_order: fitted_order(&cs, &rows.iter().map(|r| r.boost_residual).collect::<Vec<_>>()),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::canonical_transform::forward_transform;
    use crate::radiation::{radiation_generators, GridSpec};

    fn grid(n_polar: usize, n_azimuth: usize) -> Arc<ModeGrid> {
        Arc::new(
            ModeGrid::spherical(GridSpec { k_min: 0.4, k_max: 2.5, n_radial: 3, n_polar, n_azimuth }).unwrap(),
        )
    }

    fn packet(g: Arc<ModeGrid>) -> RadiationState {
        RadiationState::from_vector_amplitude(g, |k| {
            let env = (-0.5 * (k - Vector3::new(0.3, -0.2, 1.1)).norm_squared()).exp();
            CVector3::new(Complex64::new(0.3 * k.y, 0.2), Complex64::new(-0.1, 0.4 * k.x), Complex64::new(0.25, -0.15 * k.z))
                * Complex64::new(env, 0.0)
        })
    }

    fn pair() -> [ParticleInit; 2] {
        [
            ParticleInit { eta: Vector3::new(0.4, -0.3, 0.2), kappa: Vector3::new(0.5, 0.2, -0.3), mass: 1.0 },
            ParticleInit { eta: Vector3::new(-0.5, 0.6, -0.1), kappa: Vector3::new(-0.4, 0.1, 0.6), mass: 1.7 },
        ]
    }

    fn hatted(charges: ChargeModel, radiation: &RadiationState) -> PhaseSpaceState {
        PhaseSpaceState::new(&pair(), radiation, charges, 1.3, Frame::Hatted).unwrap()
    }

    fn gap(a: &Generators, b: &Generators) -> [f64; 4] {
        [
            (&a.energy - &b.energy).max_abs(),
            (&a.momentum - &b.momentum).max_abs(),
            (&a.angular_momentum - &b.angular_momentum).max_abs(),
            (&a.boost - &b.boost).max_abs(),
        ]
    }

    #[test]
    fn cross_terms_vanish_mode_by_mode() {
        let s = hatted(ChargeModel::Nilpotent, &packet(grid(6, 12)));
        let ct = cross_terms(&s).unwrap();
        assert!(ct.max_abs() < 1e-12, "{ct:?}");
    }

    #[test]
    fn frames_agree_on_energy_momentum_angular_momentum() {
        let s = PhaseSpaceState::new(&pair(), &packet(grid(8, 16)), ChargeModel::Nilpotent, 1.3, Frame::Original).unwrap();
        let o = internal_generators_original(&s).unwrap();
        let h = internal_generators_hatted(&forward_transform(&s).unwrap(), PairSums::ModeGrid, &PairRule::default()).unwrap();
        let [e, p, j, _] = gap(&o.total, &h.total);
        assert!(e < 1e-7 && p < 1e-7 && j < 1e-7, "{e:e} {p:e} {j:e}");
    }

    #[test]
    fn uncharged_particles_are_free() {
        let c = 1.3;
        let s = hatted(ChargeModel::Commuting(vec![0.0, 0.0]), &RadiationState::zero(grid(4, 8)));
        let g = internal_generators_hatted(&s, PairSums::Continuum, &PairRule::default()).unwrap();
        let n = s.generators();
        let mut want = Generators::zero(n);
        let mut e = 0.0;
        let (mut p, mut j, mut k) = (Vector3::zeros(), Vector3::zeros(), Vector3::zeros());
        for q in pair() {
            let root = (q.mass * q.mass * c * c + q.kappa.norm_squared()).sqrt();
            e += c * root;
            p += q.kappa;
            j += q.eta.cross(&q.kappa);
            k -= q.eta * root;
        }
        want.energy = Grassmann::constant(n, e);
        want.momentum = GrassmannVec3::from_real(n, &p);
        want.angular_momentum = GrassmannVec3::from_real(n, &j);
        want.boost = GrassmannVec3::from_real(n, &k);
        assert!(gap(&g.total, &want).iter().all(|d| *d < 1e-12), "{:?}", gap(&g.total, &want));
        let d = hamilton_rhs(&s).unwrap();
        assert!(d.kappa.iter().all(|v| v.max_abs() == 0.0));
    }

    #[test]
    fn radiation_sector_matches_free_field() {
        let r = packet(grid(6, 12));
        let s = hatted(ChargeModel::Nilpotent, &r);
        let split = internal_generators_hatted(&s, PairSums::Continuum, &PairRule::default()).unwrap().split.unwrap();
        let f = radiation_generators(&r, 1.3, 0.0).unwrap();
        let rad = &split.radiation;
        assert!((rad.energy.base() - f.energy).abs() < 1e-12);
        assert!((rad.momentum.base() - f.momentum).norm() < 1e-12);
        assert!((rad.angular_momentum.base() - f.angular_momentum).norm() < 1e-12);
        assert!((rad.boost.base() - f.boost).norm() < 1e-12);
        assert!(rad.energy.correction().is_zero());
    }

    #[test]
    fn pair_forces_balance() {
        let s = hatted(ChargeModel::Nilpotent, &packet(grid(4, 8)));
        let d = hamilton_rhs(&s).unwrap();
        let total = d.kappa.iter().fold(GrassmannVec3::zero(2), |acc, v| &acc + v);
        assert!(total.max_abs() < 1e-12, "{total:?}");
        assert!(d.kappa[0].max_abs() > 1e-3);
    }

    #[test]
    fn nilpotent_flow_conserves_generators() {
        let s = hatted(ChargeModel::Nilpotent, &packet(grid(6, 12)));
        let mut o = FlowOptions::new(4.0, 0.01);
        o.samples = 8;
        let rec = integrate_with(&s, &o).unwrap();
        let g0 = &rec.samples[0].generators.total;
        for smp in &rec.samples {
            let g = &smp.generators.total;
            let drifted = &g.boost + &g.momentum.scale(&Grassmann::constant(2, smp.tau));
            assert!((&drifted - &g0.boost).max_abs() < 1e-10, "τ = {}", smp.tau);
            assert!((&g.energy - &g0.energy).max_abs() < 1e-10);
            assert!((&g.momentum - &g0.momentum).max_abs() < 1e-12);
            assert!((&g.angular_momentum - &g0.angular_momentum).max_abs() < 1e-10);
        }
    }

    #[test]
    fn projection_reaches_rest_frame() {
        let rule = PairRule::default();
        let s = hatted(ChargeModel::Nilpotent, &packet(grid(6, 12)));
        let (p0, k0) = constraint_residuals(&s, &rule).unwrap();
        assert!(p0.max_abs() > 0.1 && k0.max_abs() > 0.1);
        let (p, k) = constraint_residuals(&project_rest_frame(&s, &rule).unwrap(), &rule).unwrap();
        assert!(p.max_abs() < 1e-10 && k.max_abs() < 1e-10, "{p:?} {k:?}");
    }

    #[test]
    fn nr_ladder_is_second_order() {
        let e = (4.0 * PI).sqrt();
        let r = nr_limit_report(&pair(), &[e, -0.7 * e], &[8.0, 16.0, 32.0, 64.0], &PairRule::default()).unwrap();
        for order in [r.energy_order, r.darwin_order, r.boost_order] {
            assert!((order + 2.0).abs() < 0.1, "{r:?}");
        }
        let last = r.rows.last().unwrap();
        assert!((last.energy_residual / last.energy_prediction - 1.0).abs() < 1e-3);
        assert!(matches!(nr_limit_report(&pair(), &[1.0, 1.0], &[8.0], &PairRule::default()), Err(DynamicsError::Ladder(1))));
    }

    #[test]
    fn darwin_potential_symmetry() {
        let r = Vector3::new(0.3, -0.8, 0.5);
        let (k1, k2) = (Vector3::new(0.4, 0.1, -0.2), Vector3::new(-0.3, 0.5, 0.2));
        let a = darwin_potential(&r, &k1, &k2, 1.0, 1.7, 2.0).unwrap();
        let b = darwin_potential(&(-r), &k2, &k1, 1.7, 1.0, 2.0).unwrap();
        assert!((a - b).abs() < 1e-14 * a.abs().max(1.0));
        assert!(a.abs() > 1e-4);
        assert!(darwin_potential(&r, &Vector3::zeros(), &k2, 1.0, 1.7, 2.0).unwrap().abs() < 1e-15);
    }
}
