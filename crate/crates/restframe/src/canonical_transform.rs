//! Canonical separation of the transverse field into the Liénard–Wiechert
//! fields of the charges plus a free radiation field, together with the
//! dressed particle variables and a finite-difference Poisson-bracket engine.
//!
//! Field pairings are evaluated on the mode grid. For two fields with mode
//! amplitudes `α`, `β` one has `∫d³σ (π_α·A_β − A_α·π_β) = −2∫d̃k Im(α·β*)`,
//! and the Liénard–Wiechert amplitude of particle `i` is
//! `s_i(k) = e^{−ik·η_i} g_i(k)` with a real profile `g_i`.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;

use crate::grassmann::{exp_flow_series, Grassmann, GrassmannError, GrassmannVec3, Scalar};
use crate::lienard_wiechert::LwError;
use crate::radiation::{ModeGrid, ModeNode, RadiationError, RadiationState};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransformError {
    #[error("state is in the {found:?} frame, expected {expected:?}")]
    WrongFrame { expected: Frame, found: Frame },
    #[error("particle index {index} out of range for {n} particles")]
    ParticleIndex { index: usize, n: usize },
    #[error("coordinates carry nilpotent parts where a real state is required")]
    NotReal,
    #[error("coordinate vector has length {got}, expected {expected}")]
    Length { expected: usize, got: usize },
    #[error("finite-difference derivative unstable: Richardson estimates differ by {disagreement:e}")]
    Unstable { disagreement: f64 },
    #[error("mass must be positive, got {0}")]
    Mass(f64),
    #[error("c must be positive, got {0}")]
    SpeedOfLight(f64),
    #[error("{expected} commuting charges required, got {got}")]
    ChargeCount { expected: usize, got: usize },
    #[error(transparent)]
    Grassmann(#[from] GrassmannError),
    #[error(transparent)]
    Lw(#[from] LwError),
    #[error(transparent)]
    Radiation(#[from] RadiationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    /// Particles with the full transverse field.
    Original,
    /// Dressed particles with the free radiation field.
    Hatted,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChargeModel {
    /// Each `Q_i` is an independent nilpotent generator.
    Nilpotent,
    /// Ordinary real charges; self-interaction terms no longer drop out.
    Commuting(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub eta: GrassmannVec3,
    pub kappa: GrassmannVec3,
    pub mass: f64,
}

/// Real and imaginary part of one mode amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeAmplitude {
    pub re: Grassmann,
    pub im: Grassmann,
}

#[derive(Debug, Clone)]
pub struct PhaseSpaceState {
    pub particles: Vec<Particle>,
    pub field: Vec<[ModeAmplitude; 2]>,
    grid: Arc<ModeGrid>,
    charges: ChargeModel,
    c: f64,
    frame: Frame,
}

/// Initial data of one particle: position, momentum, mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleInit {
    pub eta: Vector3<f64>,
    pub kappa: Vector3<f64>,
    pub mass: f64,
}

/// `(Re a, Im a)` for both polarizations of one mode.
type ModePair<S> = [(S, S); 2];

impl PhaseSpaceState {
    pub fn new(
        particles: &[ParticleInit],
        radiation: &RadiationState,
        charges: ChargeModel,
        c: f64,
        frame: Frame,
    ) -> Result<Self, TransformError> {
        if !(c > 0.0) {
            return Err(TransformError::SpeedOfLight(c));
        }
        let n = particles.len();
        if let ChargeModel::Commuting(q) = &charges {
            if q.len() != n {
                return Err(TransformError::ChargeCount { expected: n, got: q.len() });
            }
        }
        let particles = particles
            .iter()
            .map(|p| {
                if !(p.mass > 0.0) {
                    return Err(TransformError::Mass(p.mass));
                }
                Ok(Particle {
                    eta: GrassmannVec3::from_real(n, &p.eta),
                    kappa: GrassmannVec3::from_real(n, &p.kappa),
                    mass: p.mass,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let field = radiation
            .amplitudes
            .iter()
            .map(|a| a.map(|z| ModeAmplitude { re: Grassmann::constant(n, z.re), im: Grassmann::constant(n, z.im) }))
            .collect();
        Ok(Self { particles, field, grid: radiation.grid.clone(), charges, c, frame })
    }

    pub fn grid(&self) -> &Arc<ModeGrid> {
        &self.grid
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn charge_model(&self) -> &ChargeModel {
        &self.charges
    }

    /// Number of nilpotent generators, one per particle.
    pub fn generators(&self) -> usize {
        self.particles.len()
    }

    pub fn charge(&self, i: usize) -> Grassmann {
        let n = self.generators();
        match &self.charges {
            ChargeModel::Nilpotent => Grassmann::generator(n, i).expect("index checked by caller"),
            ChargeModel::Commuting(q) => Grassmann::constant(n, q[i]),
        }
    }

    pub fn layout(&self) -> CoordinateLayout {
        CoordinateLayout { particles: self.particles.len(), modes: self.field.len() }
    }

    /// True when no coordinate has a nilpotent part.
    pub fn is_real(&self) -> bool {
        self.coordinates().iter().all(|g| g.degree() == 0)
    }

    /// Constant parts of the mode amplitudes.
    pub fn radiation_base(&self) -> RadiationState {
        let amplitudes = self.field.iter().map(|m| m.clone().map(|a| Complex64::new(a.re.base(), a.im.base()))).collect();
        RadiationState { grid: self.grid.clone(), amplitudes }
    }

    fn check_particle(&self, i: usize) -> Result<(), TransformError> {
        if i < self.particles.len() {
            Ok(())
        } else {
            Err(TransformError::ParticleIndex { index: i, n: self.particles.len() })
        }
    }

    fn mode_scale(&self, n: usize) -> f64 {
        self.grid.bracket_scale(n, self.c).sqrt()
    }

    /// Darboux coordinates: per particle `η, κ`, then per mode and
    /// polarization `(Re α, Im α)/√g` with `g = cΩ_n/(2w_n)`.
    pub fn coordinates(&self) -> Vec<Grassmann> {
        let mut out = Vec::with_capacity(self.layout().len());
        for p in &self.particles {
            out.extend(p.eta.0.iter().cloned());
            out.extend(p.kappa.0.iter().cloned());
        }
        for (n, m) in self.field.iter().enumerate() {
            let s = 1.0 / self.mode_scale(n);
            for a in m {
                out.push(&a.re * s);
                out.push(&a.im * s);
            }
        }
        out
    }

    pub fn base_coordinates(&self) -> Result<Vec<f64>, TransformError> {
        let coords = self.coordinates();
        if coords.iter().any(|g| g.degree() > 0) {
            return Err(TransformError::NotReal);
        }
        Ok(coords.iter().map(|g| g.base()).collect())
    }

    pub fn with_coordinates(&self, x: &[Grassmann]) -> Result<Self, TransformError> {
        let layout = self.layout();
        if x.len() != layout.len() {
            return Err(TransformError::Length { expected: layout.len(), got: x.len() });
        }
        let mut out = self.clone();
        for (i, p) in out.particles.iter_mut().enumerate() {
            let b = 6 * i;
            p.eta = GrassmannVec3([x[b].clone(), x[b + 1].clone(), x[b + 2].clone()]);
            p.kappa = GrassmannVec3([x[b + 3].clone(), x[b + 4].clone(), x[b + 5].clone()]);
        }
        let off = 6 * layout.particles;
        for (n, m) in out.field.iter_mut().enumerate() {
            let s = self.mode_scale(n);
            for (l, a) in m.iter_mut().enumerate() {
                let b = off + 4 * n + 2 * l;
                a.re = &x[b] * s;
                a.im = &x[b + 1] * s;
            }
        }
        Ok(out)
    }

    pub fn with_base_coordinates(&self, x: &[f64]) -> Result<Self, TransformError> {
        let n = self.generators();
        let g: Vec<Grassmann> = x.iter().map(|&v| Grassmann::constant(n, v)).collect();
        self.with_coordinates(&g)
    }

    fn vars<S: Scalar>(&self, lift: impl Fn(&Grassmann) -> S) -> (Vec<Vars<S>>, Vec<ModePair<S>>) {
        let vars = self
            .particles
            .iter()
            .map(|p| Vars {
                eta: [0, 1, 2].map(|r| lift(&p.eta.0[r])),
                kappa: [0, 1, 2].map(|r| lift(&p.kappa.0[r])),
                mc2: (p.mass * self.c).powi(2),
            })
            .collect();
        let field = self.field.iter().map(|m| [0, 1].map(|l| (lift(&m[l].re), lift(&m[l].im)))).collect();
        (vars, field)
    }
}

/// Ordering of the Darboux coordinates and their symplectic partners.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoordinateLayout {
    pub particles: usize,
    pub modes: usize,
}

impl CoordinateLayout {
    pub fn len(&self) -> usize {
        6 * self.particles + 4 * self.modes
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(b, s)` such that `{x_a, x_b} = s` is the only non-zero bracket of `x_a`.
    pub fn partner(&self, a: usize) -> (usize, f64) {
        let np = 6 * self.particles;
        if a < np {
            let r = a % 6;
            if r < 3 {
                (a + 3, 1.0)
            } else {
                (a - 3, -1.0)
            }
        } else if (a - np).is_multiple_of(2) {
            (a + 1, 1.0)
        } else {
            (a - 1, -1.0)
        }
    }

    pub fn is_particle(&self, a: usize) -> bool {
        a < 6 * self.particles
    }
}

struct Vars<S> {
    eta: [S; 3],
    kappa: [S; 3],
    mc2: f64,
}

fn dot_real<S: Scalar>(k: &Vector3<f64>, a: &[S; 3]) -> S {
    a[0].clone() * k.x + a[1].clone() * k.y + a[2].clone() * k.z
}

fn dot3<S: Scalar>(a: &[S; 3], b: &[S; 3]) -> S {
    a[0].clone() * b[0].clone() + a[1].clone() * b[1].clone() + a[2].clone() * b[2].clone()
}

/// Real profile `g_λ(k; κ)` of the Liénard–Wiechert mode amplitude and its
/// κ-gradient.
struct Profile<S> {
    g: [S; 2],
    dg: [[S; 3]; 2],
}

fn profile<S: Scalar>(node: &ModeNode, kappa: &[S; 3], mc2: f64) -> Profile<S> {
    let om = node.omega;
    let inv_k2 = 1.0 / (om * om);
    let kk = dot_real(&node.k, kappa);
    let kap2 = dot3(kappa, kappa);
    let e = (kap2.clone() + kap2.lift(mc2)).sqrt();
    let inv_e = e.recip();
    let x = kk.clone() * (1.0 / om);
    let d = kap2.lift(mc2) + kap2.clone() - x.clone() * x.clone();
    let inv_d = d.recip();
    // g = (ε·κ)(ω√ + k·κ)/(k² D), D = m²c² + κ² − (κ·k̂)²
    let fac = e * om + kk;
    let g = [0, 1].map(|l| dot_real(&node.polarization[l], kappa) * fac.clone() * inv_d.clone() * inv_k2);
    let dd = [0, 1, 2].map(|r| kappa[r].clone() * 2.0 - x.clone() * (2.0 * node.k[r] / om));
    let dg = [0, 1].map(|l| {
        let eps = &node.polarization[l];
        let ek = dot_real(eps, kappa);
        [0, 1, 2].map(|r| {
            let dn = fac.clone() * eps[r] + ek.clone() * (kappa[r].clone() * inv_e.clone() * om + kap2.lift(node.k[r]));
            dn * inv_d.clone() * inv_k2 - g[l].clone() * dd[r].clone() * inv_d.clone()
        })
    });
    Profile { g, dg }
}

/// Per-particle mode data: profiles and `cos, sin` of `k·η`.
struct ModeData<S> {
    profiles: Vec<Profile<S>>,
    cos: Vec<S>,
    sin: Vec<S>,
}

fn mode_data<S: Scalar>(grid: &ModeGrid, p: &Vars<S>) -> ModeData<S> {
    let nodes = grid.nodes();
    let mut out = ModeData { profiles: Vec::with_capacity(nodes.len()), cos: vec![], sin: vec![] };
    for node in nodes {
        out.profiles.push(profile(node, &p.kappa, p.mc2));
        let ph = dot_real(&node.k, &p.eta);
        out.cos.push(ph.cos());
        out.sin.push(ph.sin());
    }
    out
}

struct FunctionalTerms<S> {
    value: S,
    d_eta: [S; 3],
    d_kappa: [S; 3],
}

fn zero_terms<S: Scalar>(like: &S) -> FunctionalTerms<S> {
    let z = like.lift(0.0);
    FunctionalTerms { value: z.clone(), d_eta: [z.clone(), z.clone(), z.clone()], d_kappa: [z.clone(), z.clone(), z] }
}

/// `T_i = −2 Σ W Σ_λ g_λ Im(α_λ e^{ik·η_i})` with its particle gradients.
fn t_terms<S: Scalar>(grid: &ModeGrid, field: &[[(S, S); 2]], md: &ModeData<S>, like: &S) -> FunctionalTerms<S> {
    let mut t = zero_terms(like);
    for (n, node) in grid.nodes().iter().enumerate() {
        let w = -2.0 * grid.measure(n);
        let (c, s) = (&md.cos[n], &md.sin[n]);
        let pr = &md.profiles[n];
        for l in 0..2 {
            let (x, y) = &field[n][l];
            let im = x.clone() * s.clone() + y.clone() * c.clone();
            let re = x.clone() * c.clone() - y.clone() * s.clone();
            t.value = t.value.clone() + pr.g[l].clone() * im.clone() * w;
            let gre = pr.g[l].clone() * re;
            for r in 0..3 {
                t.d_eta[r] = t.d_eta[r].clone() + gre.clone() * (w * node.k[r]);
                t.d_kappa[r] = t.d_kappa[r].clone() + pr.dg[l][r].clone() * im.clone() * w;
            }
        }
    }
    t
}

/// `𝒦_ik = −2 Σ W (g_i·g_k) sin(k·(η_i − η_k))` with gradients in particle `i`.
fn k_terms<S: Scalar>(grid: &ModeGrid, mi: &ModeData<S>, mk: &ModeData<S>, like: &S) -> FunctionalTerms<S> {
    let mut t = zero_terms(like);
    for (n, node) in grid.nodes().iter().enumerate() {
        let w = -2.0 * grid.measure(n);
        let (pi, pk) = (&mi.profiles[n], &mk.profiles[n]);
        let gg = pi.g[0].clone() * pk.g[0].clone() + pi.g[1].clone() * pk.g[1].clone();
        let c = mi.cos[n].clone() * mk.cos[n].clone() + mi.sin[n].clone() * mk.sin[n].clone();
        let s = mi.sin[n].clone() * mk.cos[n].clone() - mi.cos[n].clone() * mk.sin[n].clone();
        t.value = t.value.clone() + gg.clone() * s.clone() * w;
        for r in 0..3 {
            t.d_eta[r] = t.d_eta[r].clone() + gg.clone() * c.clone() * (w * node.k[r]);
            let dgg = pi.dg[0][r].clone() * pk.g[0].clone() + pi.dg[1][r].clone() * pk.g[1].clone();
            t.d_kappa[r] = t.d_kappa[r].clone() + dgg * s.clone() * w;
        }
    }
    t
}

/// Liénard–Wiechert mode amplitudes `ε_λ·(ωÃ − iπ̃)` of a unit charge.
pub fn lw_mode_amplitude(node: &ModeNode, eta: &Vector3<f64>, kappa: &Vector3<f64>, mass: f64, c: f64) -> [Complex64; 2] {
    let pr = profile(node, &[kappa.x, kappa.y, kappa.z], (mass * c).powi(2));
    let ph = Complex64::from_polar(1.0, -node.k.dot(eta));
    pr.g.map(|g| ph * g)
}

/// Everything the transformation needs, evaluated once.
struct Coefficients<S> {
    t: Vec<FunctionalTerms<S>>,
    /// `k[i][k]` for `i ≠ k`.
    k: Vec<Vec<Option<FunctionalTerms<S>>>>,
    data: Vec<ModeData<S>>,
}

fn coefficients<S: Scalar>(grid: &ModeGrid, vars: &[Vars<S>], field: &[[(S, S); 2]]) -> Coefficients<S> {
    let data: Vec<ModeData<S>> = vars.iter().map(|v| mode_data(grid, v)).collect();
    let like = &vars[0].kappa[0];
    let t = data.iter().map(|md| t_terms(grid, field, md, like)).collect();
    let k = (0..vars.len())
        .map(|i| (0..vars.len()).map(|j| (i != j).then(|| k_terms(grid, &data[i], &data[j], like))).collect())
        .collect();
    Coefficients { t, k, data }
}

fn apply_map<S: Scalar>(
    s: &PhaseSpaceState,
    vars: Vec<Vars<S>>,
    field: Vec<[(S, S); 2]>,
    sign: f64,
) -> (Vec<Particle>, Vec<[ModeAmplitude; 2]>) {
    let n = s.generators();
    let inv_c = 1.0 / s.c;
    let co = coefficients(&s.grid, &vars, &field);
    let q: Vec<Grassmann> = (0..s.particles.len()).map(|i| s.charge(i)).collect();
    let lift = |v: &S| v.clone().into_grassmann(n);
    let particles = s
        .particles
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut eta = p.eta.clone();
            let mut kappa = p.kappa.clone();
            for r in 0..3 {
                let mut de = lift(&co.t[i].d_kappa[r]) * sign;
                let mut dk = lift(&co.t[i].d_eta[r]) * (-sign);
                for (k, qk) in q.iter().enumerate() {
                    if let Some(kt) = &co.k[i][k] {
                        de -= &(qk * &lift(&kt.d_kappa[r]) * 0.5);
                        dk += &(qk * &lift(&kt.d_eta[r]) * 0.5);
                    }
                }
                eta.0[r] += &(&q[i] * &de * inv_c);
                kappa.0[r] += &(&q[i] * &dk * inv_c);
            }
            Particle { eta, kappa, mass: p.mass }
        })
        .collect();
    let field = s
        .field
        .iter()
        .enumerate()
        .map(|(m, amp)| {
            let mut out = amp.clone();
            for (i, qi) in q.iter().enumerate() {
                let md = &co.data[i];
                for l in 0..2 {
                    // s_i = e^{−ik·η} g
                    let g = &md.profiles[m].g[l];
                    let re = lift(&(g.clone() * md.cos[m].clone()));
                    let im = lift(&(-(g.clone() * md.sin[m].clone())));
                    out[l].re -= &(qi * &re * sign);
                    out[l].im -= &(qi * &im * sign);
                }
            }
            out
        })
        .collect();
    (particles, field)
}

fn run_map(s: &PhaseSpaceState, sign: f64) -> (Vec<Particle>, Vec<[ModeAmplitude; 2]>) {
    if s.is_real() {
        let (v, f) = s.vars(|g| g.base());
        apply_map(s, v, f, sign)
    } else {
        let (v, f) = s.vars(|g| g.clone());
        apply_map(s, v, f, sign)
    }
}

fn expect_frame(s: &PhaseSpaceState, expected: Frame) -> Result<(), TransformError> {
    if s.frame == expected {
        Ok(())
    } else {
        Err(TransformError::WrongFrame { expected, found: s.frame })
    }
}

/// Original → dressed particles and radiation field.
///
/// `α_rad = α − Σ Q_i s_i`,
/// `η̂_i = η_i + (Q_i/c)[∂_κ T_i − ½Σ_k Q_k ∂_κ 𝒦_ik]`,
/// `κ̂_i = κ_i − (Q_i/c)[∂_η T_i − ½Σ_k Q_k ∂_η 𝒦_ik]`.
pub fn forward_transform(s: &PhaseSpaceState) -> Result<PhaseSpaceState, TransformError> {
    expect_frame(s, Frame::Original)?;
    if s.particles.is_empty() {
        return Ok(PhaseSpaceState { frame: Frame::Hatted, ..s.clone() });
    }
    let (particles, field) = run_map(s, 1.0);
    Ok(PhaseSpaceState { particles, field, frame: Frame::Hatted, ..s.clone() })
}

/// Inverse map, with `T̂_i` built from the radiation field and dressed variables.
pub fn inverse_transform(s: &PhaseSpaceState) -> Result<PhaseSpaceState, TransformError> {
    expect_frame(s, Frame::Hatted)?;
    if s.particles.is_empty() {
        return Ok(PhaseSpaceState { frame: Frame::Original, ..s.clone() });
    }
    let (particles, field) = run_map(s, -1.0);
    Ok(PhaseSpaceState { particles, field, frame: Frame::Original, ..s.clone() })
}

fn functional<R>(
    s: &PhaseSpaceState,
    real: impl FnOnce(Vec<Vars<f64>>, Vec<[(f64, f64); 2]>) -> R,
    nil: impl FnOnce(Vec<Vars<Grassmann>>, Vec<[(Grassmann, Grassmann); 2]>) -> R,
) -> R {
    if s.is_real() {
        let (v, f) = s.vars(|g| g.base());
        real(v, f)
    } else {
        let (v, f) = s.vars(|g| g.clone());
        nil(v, f)
    }
}

/// `T_i = ∫d³σ [π⃗_⊥·A⃗_⊥Si − A⃗_⊥·π⃗_⊥Si]` for the field stored in `s`.
pub fn functional_t(s: &PhaseSpaceState, i: usize) -> Result<Grassmann, TransformError> {
    s.check_particle(i)?;
    let n = s.generators();
    let grid = s.grid.clone();
    Ok(functional(
        s,
        |v, f| t_terms(&grid, &f, &mode_data(&grid, &v[i]), &0.0).value.into_grassmann(n),
        |v, f| {
            let like = v[i].kappa[0].clone();
            t_terms(&grid, &f, &mode_data(&grid, &v[i]), &like).value
        },
    ))
}

/// `𝒦_ij = ∫d³σ [A⃗_⊥Si·π⃗_⊥Sj − π⃗_⊥Si·A⃗_⊥Sj]` on the mode grid.
pub fn functional_k(s: &PhaseSpaceState, i: usize, j: usize) -> Result<Grassmann, TransformError> {
    s.check_particle(i)?;
    s.check_particle(j)?;
    let n = s.generators();
    if i == j {
        return Ok(Grassmann::zero(n));
    }
    let grid = s.grid.clone();
    Ok(functional(
        s,
        |v, _| k_terms(&grid, &mode_data(&grid, &v[i]), &mode_data(&grid, &v[j]), &0.0).value.into_grassmann(n),
        |v, _| {
            let like = v[i].kappa[0].clone();
            k_terms(&grid, &mode_data(&grid, &v[i]), &mode_data(&grid, &v[j]), &like).value
        },
    ))
}

/// `T_i` and its gradients in `η_i`, `κ_i`, built from the constant parts of
/// the state.
pub(crate) fn t_gradients_base(s: &PhaseSpaceState, i: usize) -> Result<(f64, Vector3<f64>, Vector3<f64>), TransformError> {
    s.check_particle(i)?;
    let (v, f) = s.vars(|g| g.base());
    let t = t_terms(&s.grid, &f, &mode_data(&s.grid, &v[i]), &0.0);
    Ok((t.value, Vector3::from(t.d_eta), Vector3::from(t.d_kappa)))
}

/// Mode sum `Σ W (k·v_a − ω)(g_a·g_b) cos(k·(η_a − η_b))`, the Darwin term of
/// an ordered pair on the grid. Equals `−½ v_a·A[s_b](η_a)` for the grid field.
pub(crate) fn grid_darwin_pair(
    grid: &ModeGrid,
    a: (&Vector3<f64>, &Vector3<f64>, f64),
    b: (&Vector3<f64>, &Vector3<f64>, f64),
) -> f64 {
    let (ka, kb) = ([a.1.x, a.1.y, a.1.z], [b.1.x, b.1.y, b.1.z]);
    let va = a.1 / (a.2 + a.1.norm_squared()).sqrt();
    let r = a.0 - b.0;
    grid.nodes()
        .iter()
        .enumerate()
        .map(|(n, node)| {
            let (pa, pb) = (profile(node, &ka, a.2), profile(node, &kb, b.2));
            let gg = pa.g[0] * pb.g[0] + pa.g[1] * pb.g[1];
            grid.measure(n) * (node.k.dot(&va) - node.omega) * gg * node.k.dot(&r).cos()
        })
        .sum()
}

/// Step control for the finite-difference bracket engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketOptions {
    pub step: f64,
    /// Largest accepted gap between the `h` and `h/2` estimates, relative to
    /// `max(1, |∂f|)`.
    pub max_disagreement: f64,
}

impl Default for BracketOptions {
    fn default() -> Self {
        Self { step: 1e-3, max_disagreement: 1e-4 }
    }
}

fn grassmann_max_abs_diff(a: &Grassmann, b: &Grassmann) -> f64 {
    (a - b).max_abs()
}

/// Richardson-extrapolated central difference of a Grassmann-valued map
/// along one coordinate.
fn directional<F>(f: &F, x: &[f64], a: usize, opts: &BracketOptions) -> Result<Vec<Grassmann>, TransformError>
where
    F: Fn(&[f64]) -> Vec<Grassmann> + ?Sized,
{
    let central = |h: f64| {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[a] += h;
        xm[a] -= h;
        let (fp, fm) = (f(&xp), f(&xm));
        fp.iter().zip(&fm).map(|(p, m)| (p - m) * (0.5 / h)).collect::<Vec<_>>()
    };
    let d1 = central(opts.step);
    let d2 = central(0.5 * opts.step);
    let mut out = Vec::with_capacity(d1.len());
    for (a1, a2) in d1.iter().zip(&d2) {
        let r = (a2 * 4.0 - a1) * (1.0 / 3.0);
        let gap = grassmann_max_abs_diff(a1, a2);
        if gap > opts.max_disagreement * r.max_abs().max(1.0) {
            return Err(TransformError::Unstable { disagreement: gap });
        }
        out.push(r);
    }
    Ok(out)
}

pub fn gradient(
    f: &dyn Fn(&[f64]) -> Grassmann,
    x: &[f64],
    opts: &BracketOptions,
) -> Result<Vec<Grassmann>, TransformError> {
    let wrapped = |y: &[f64]| vec![f(y)];
    (0..x.len()).map(|a| directional(&wrapped, x, a, opts).map(|mut v| v.remove(0))).collect()
}

/// `{f, g}` on the Darboux coordinates described by `layout`.
pub fn poisson_bracket(
    f: &dyn Fn(&[f64]) -> Grassmann,
    g: &dyn Fn(&[f64]) -> Grassmann,
    x: &[f64],
    layout: &CoordinateLayout,
    opts: &BracketOptions,
) -> Result<Grassmann, TransformError> {
    if x.len() != layout.len() {
        return Err(TransformError::Length { expected: layout.len(), got: x.len() });
    }
    let df = gradient(f, x, opts)?;
    let dg = gradient(g, x, opts)?;
    Ok(contract(&df, &dg, layout))
}

fn contract(df: &[Grassmann], dg: &[Grassmann], layout: &CoordinateLayout) -> Grassmann {
    let mut acc = df[0].lift(0.0);
    for (a, d) in df.iter().enumerate() {
        if d.is_zero() {
            continue;
        }
        let (b, sign) = layout.partner(a);
        acc += &(d * &dg[b] * sign);
    }
    acc
}

/// `{x_a, g} = s·∂g/∂x_b` for the partner `(b, s)` of coordinate `a`.
pub fn bracket_with_coordinate(
    a: usize,
    g: &dyn Fn(&[f64]) -> Grassmann,
    x: &[f64],
    layout: &CoordinateLayout,
    opts: &BracketOptions,
) -> Result<Grassmann, TransformError> {
    let (b, sign) = layout.partner(a);
    let wrapped = |y: &[f64]| vec![g(y)];
    Ok(directional(&wrapped, x, b, opts)?.remove(0) * sign)
}

/// Jacobian of a Grassmann-valued map, split by monomial: `J[mask][(row, col)]`.
pub fn jacobian(
    f: &(dyn Fn(&[f64]) -> Vec<Grassmann> + Sync),
    x: &[f64],
    opts: &BracketOptions,
) -> Result<BTreeMap<u32, DMatrix<f64>>, TransformError> {
    use rayon::prelude::*;
    let cols: Vec<Vec<Grassmann>> = (0..x.len()).into_par_iter().map(|a| directional(f, x, a, opts)).collect::<Result<_, _>>()?;
    let rows = cols.first().map_or(0, |c| c.len());
    let mut out: BTreeMap<u32, DMatrix<f64>> = BTreeMap::new();
    for (j, col) in cols.iter().enumerate() {
        for (i, g) in col.iter().enumerate() {
            for (m, v) in g.terms() {
                out.entry(m).or_insert_with(|| DMatrix::zeros(rows, x.len()))[(i, j)] = v;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum BracketBlock {
    ParticleParticle,
    ParticleField,
    FieldField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BracketCheck {
    pub block: BracketBlock,
    /// Monomial in the charges (bit `i` for `Q_{i+1}`).
    pub mask: u32,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicityReport {
    pub checks: Vec<BracketCheck>,
    /// Largest single contribution to a second-order monomial before the
    /// contributions are summed; shows that the vanishing is a cancellation.
    pub cancelled_scale: f64,
}

impl CanonicityReport {
    pub fn max_deviation(&self) -> f64 {
        self.checks.iter().fold(0.0, |a, c| a.max(c.deviation))
    }
}

/// Brackets of all new coordinates, from the Jacobian of the forward map.
pub fn verify_canonicity(s: &PhaseSpaceState, opts: &BracketOptions) -> Result<CanonicityReport, TransformError> {
    expect_frame(s, Frame::Original)?;
    let x = s.base_coordinates()?;
    let layout = s.layout();
    let map = |y: &[f64]| -> Vec<Grassmann> {
        let st = s.with_base_coordinates(y).expect("length fixed");
        forward_transform(&st).expect("frame fixed").coordinates()
    };
    let jac = jacobian(&map, &x, opts)?;
    let dim = layout.len();
    let sym = |j: &DMatrix<f64>| {
        // P[b, c] = s_c J[b, partner(c)]
        let mut p = DMatrix::zeros(dim, dim);
        for c in 0..dim {
            let (pc, sign) = layout.partner(c);
            p.set_column(c, &(j.column(pc) * sign));
        }
        p
    };
    let mut table: BTreeMap<u32, DMatrix<f64>> = BTreeMap::new();
    let mut cancelled_scale: f64 = 0.0;
    for (&m1, j1) in &jac {
        for (&m2, j2) in &jac {
            if m1 & m2 != 0 {
                continue;
            }
            let b = j1 * sym(j2).transpose();
            if (m1 | m2).count_ones() == 2 {
                cancelled_scale = cancelled_scale.max(b.amax());
            }
            *table.entry(m1 | m2).or_insert_with(|| DMatrix::zeros(dim, dim)) += b;
        }
    }
    let mut canonical = DMatrix::zeros(dim, dim);
    for a in 0..dim {
        let (b, sign) = layout.partner(a);
        canonical[(a, b)] = sign;
    }
    let mut checks = Vec::new();
    table.entry(0).or_insert_with(|| DMatrix::zeros(dim, dim));
    for (&mask, b) in &table {
        let mut worst: BTreeMap<BracketBlock, f64> = BTreeMap::new();
        for i in 0..dim {
            for j in 0..dim {
                let want = if mask == 0 { canonical[(i, j)] } else { 0.0 };
                let block = match (layout.is_particle(i), layout.is_particle(j)) {
                    (true, true) => BracketBlock::ParticleParticle,
                    (false, false) => BracketBlock::FieldField,
                    _ => BracketBlock::ParticleField,
                };
                let e = worst.entry(block).or_insert(0.0);
                *e = e.max((b[(i, j)] - want).abs());
            }
        }
        checks.extend(worst.into_iter().map(|(block, deviation)| BracketCheck { block, mask, deviation }));
    }
    Ok(CanonicityReport { checks, cancelled_scale })
}

/// `S = (1/c) Σ_i Q_i T_i` as a function of the Darboux coordinates.
pub fn generating_function(s: &PhaseSpaceState) -> impl Fn(&[f64]) -> Grassmann + '_ {
    move |y: &[f64]| {
        let st = s.with_base_coordinates(y).expect("length fixed");
        let mut acc = Grassmann::zero(s.generators());
        for i in 0..s.particles.len() {
            acc += &(s.charge(i) * functional_t(&st, i).expect("index in range") * (1.0 / s.c));
        }
        acc
    }
}

/// Hatted coordinates as `x + {x, S} + ½{{x, S}, S}`, every bracket taken
/// by finite differences.
pub fn generating_flow(s: &PhaseSpaceState, opts: &BracketOptions) -> Result<PhaseSpaceState, TransformError> {
    expect_frame(s, Frame::Original)?;
    let x = s.base_coordinates()?;
    let layout = s.layout();
    let gen = generating_function(s);
    let dgen = gradient(&gen, &x, opts)?;
    let n = s.generators();
    let coords = (0..layout.len())
        .map(|a| {
            let first_fn = |y: &[f64]| bracket_with_coordinate(a, &gen, y, &layout, opts).expect("stable first bracket");
            let first = first_fn(&x);
            let dfirst = gradient(&first_fn, &x, opts)?;
            let second = contract(&dfirst, &dgen, &layout);
            Ok(exp_flow_series(&Grassmann::constant(n, x[a]), &first, &second))
        })
        .collect::<Result<Vec<_>, TransformError>>()?;
    let mut out = s.with_coordinates(&coords)?;
    out.frame = Frame::Hatted;
    Ok(out)
}
