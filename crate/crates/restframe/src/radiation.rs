//! Truncated mode representation of the free transverse field.
//!
//! A grid node carries `k_n` and a volume weight `w_n ≈ Δ³k`; the invariant
//! measure `d̃k = d³k/(2ω(2π)³)` becomes [`ModeGrid::measure`]. Amplitudes are
//! the `a_λ(k)` of the free solution, so the field at parameter `τ` carries
//! the phase `e^{−iωτ}`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::minkowski::{helicity_polarizations, MinkowskiError};
use crate::quadrature::{self, QuadratureError, SphericalTransform};

pub type CVector3 = Vector3<Complex64>;

const TWO_PI_CUBED: f64 = 8.0 * PI * PI * PI;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RadiationError {
    #[error("invalid radial cutoffs k_min = {k_min}, k_max = {k_max}")]
    Cutoffs { k_min: f64, k_max: f64 },
    #[error("non-positive node weight {0}")]
    Weight(f64),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Tetrad(#[from] MinkowskiError),
    #[error("grid has no product structure; k-derivatives need a spherical product grid")]
    Unstructured,
    #[error("grid too coarse for the derivative stencil: need {need} radial nodes, have {have}")]
    TooCoarse { need: usize, have: usize },
    #[error("amplitude count {got} does not match the grid size {expected}")]
    Length { expected: usize, got: usize },
}

/// Resolution of a spherical product grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub k_min: f64,
    pub k_max: f64,
    pub n_radial: usize,
    /// Gauss–Legendre nodes in `cos θ`.
    pub n_polar: usize,
    /// Uniform nodes in `φ`; at least `2·n_polar − 1`.
    pub n_azimuth: usize,
}

impl GridSpec {
    pub fn len(&self) -> usize {
        self.n_radial * self.n_polar * self.n_azimuth
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeNode {
    pub k: Vector3<f64>,
    pub omega: f64,
    pub weight: f64,
    /// Helicity-frame polarizations `ε⃗_1, ε⃗_2`.
    pub polarization: [Vector3<f64>; 2],
}

#[derive(Debug, Clone)]
struct Structure {
    spec: GridSpec,
    radial_diff: DMatrix<f64>,
    sphere: SphericalTransform,
}

#[derive(Debug, Clone)]
pub struct ModeGrid {
    nodes: Vec<ModeNode>,
    structure: Option<Structure>,
}

impl ModeGrid {
    pub fn spherical(spec: GridSpec) -> Result<Self, RadiationError> {
        if !(spec.k_min > 0.0 && spec.k_max > spec.k_min && spec.k_max.is_finite()) {
            return Err(RadiationError::Cutoffs { k_min: spec.k_min, k_max: spec.k_max });
        }
        let radial = quadrature::gauss_legendre(spec.n_radial, spec.k_min, spec.k_max)?;
        let sphere = SphericalTransform::new(spec.n_polar, spec.n_azimuth)?;
        let mut nodes = Vec::with_capacity(spec.len());
        for (&kr, &wr) in radial.nodes.iter().zip(&radial.weights) {
            for (&mu, &wm) in sphere.mu.nodes.iter().zip(&sphere.mu.weights) {
                let s = (1.0 - mu * mu).sqrt();
                for (&phi, &wp) in sphere.phi.nodes.iter().zip(&sphere.phi.weights) {
                    let k = Vector3::new(s * phi.cos(), s * phi.sin(), mu) * kr;
                    nodes.push(ModeNode {
                        k,
                        omega: kr,
                        weight: kr * kr * wr * wm * wp,
                        polarization: helicity_polarizations(&k)?,
                    });
                }
            }
        }
        let radial_diff = quadrature::differentiation_matrix(&radial.nodes);
        Ok(Self { nodes, structure: Some(Structure { spec, radial_diff, sphere }) })
    }

    /// Grid from explicit `(k, w)` pairs; k-derivatives are unavailable.
    pub fn from_nodes(points: &[(Vector3<f64>, f64)]) -> Result<Self, RadiationError> {
        let nodes = points
            .iter()
            .map(|(k, w)| {
                if !(*w > 0.0) {
                    return Err(RadiationError::Weight(*w));
                }
                Ok(ModeNode { k: *k, omega: k.norm(), weight: *w, polarization: helicity_polarizations(k)? })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { nodes, structure: None })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[ModeNode] {
        &self.nodes
    }

    pub fn spec(&self) -> Option<GridSpec> {
        self.structure.as_ref().map(|s| s.spec)
    }

    /// `w_n/(2ω_n(2π)³)`, the discrete `d̃k`.
    pub fn measure(&self, n: usize) -> f64 {
        let node = &self.nodes[n];
        node.weight / (2.0 * node.omega * TWO_PI_CUBED)
    }

    /// `Ω_n = 2ω_n(2π)³`.
    pub fn big_omega(&self, n: usize) -> f64 {
        2.0 * self.nodes[n].omega * TWO_PI_CUBED
    }

    /// `{Re a, Im a} = cΩ_n/(2w_n)` for each polarization of node `n`.
    pub fn bracket_scale(&self, n: usize, c: f64) -> f64 {
        c * self.big_omega(n) / (2.0 * self.nodes[n].weight)
    }

    /// Index of the node at `−k_n` when the grid is inversion symmetric.
    pub fn partner(&self, n: usize) -> Option<usize> {
        let st = self.structure.as_ref()?;
        let (nm, np) = (st.spec.n_polar, st.spec.n_azimuth);
        if np % 2 != 0 {
            return None;
        }
        let ip = n % np;
        let im = (n / np) % nm;
        let ir = n / (np * nm);
        Some((ir * nm + (nm - 1 - im)) * np + (ip + np / 2) % np)
    }

    fn structure(&self) -> Result<&Structure, RadiationError> {
        self.structure.as_ref().ok_or(RadiationError::Unstructured)
    }

    /// `L f` (with `L = −i k̂×∂_k̂`) of a per-node complex field, shell by shell.
    pub fn angular_momentum_of(&self, f: &[Complex64]) -> Result<[Vec<Complex64>; 3], RadiationError> {
        let st = self.structure()?;
        let shell = st.sphere.grid_len();
        let mut out: [Vec<Complex64>; 3] = std::array::from_fn(|_| Vec::with_capacity(f.len()));
        for chunk in f.chunks(shell) {
            let l = st.sphere.angular_momentum(chunk)?;
            for a in 0..3 {
                out[a].extend_from_slice(&l[a]);
            }
        }
        Ok(out)
    }

    /// Cartesian gradient `∂f/∂k` of a per-node complex field.
    pub fn gradient_of(&self, f: &[Complex64]) -> Result<Vec<CVector3>, RadiationError> {
        let st = self.structure()?;
        if st.spec.n_radial < 2 {
            return Err(RadiationError::TooCoarse { need: 2, have: st.spec.n_radial });
        }
        let shell = st.sphere.grid_len();
        let nr = st.spec.n_radial;
        let ang = self.angular_momentum_of(f)?;
        let mut out = vec![CVector3::zeros(); f.len()];
        for j in 0..shell {
            for ir in 0..nr {
                let n = ir * shell + j;
                let dk: Complex64 = (0..nr).map(|q| f[q * shell + j] * st.radial_diff[(ir, q)]).sum();
                let node = &self.nodes[n];
                let kh = node.k / node.omega;
                let lf = CVector3::new(ang[0][n], ang[1][n], ang[2][n]);
                // ∇_⊥ f = −i k̂×(L f)/|k|
                let khc = kh.map(|v| Complex64::new(v, 0.0));
                let transverse = khc.cross(&lf) * Complex64::new(0.0, -1.0 / node.omega);
                out[n] = khc * dk + transverse;
            }
        }
        Ok(out)
    }
}

/// Mode amplitudes `a_λ(k_n)` on a shared grid.
#[derive(Debug, Clone)]
pub struct RadiationState {
    pub grid: Arc<ModeGrid>,
    pub amplitudes: Vec<[Complex64; 2]>,
}

impl RadiationState {
    pub fn zero(grid: Arc<ModeGrid>) -> Self {
        let n = grid.len();
        Self { grid, amplitudes: vec![[Complex64::new(0.0, 0.0); 2]; n] }
    }

    pub fn new(grid: Arc<ModeGrid>, amplitudes: Vec<[Complex64; 2]>) -> Result<Self, RadiationError> {
        if amplitudes.len() != grid.len() {
            return Err(RadiationError::Length { expected: grid.len(), got: amplitudes.len() });
        }
        Ok(Self { grid, amplitudes })
    }

    /// Projects a transverse vector amplitude `V(k) = Σ_λ ε⃗_λ a_λ` onto the
    /// helicity frame; any longitudinal part of `f` is discarded.
    pub fn from_vector_amplitude(grid: Arc<ModeGrid>, f: impl Fn(&Vector3<f64>) -> CVector3) -> Self {
        let amplitudes = grid
            .nodes()
            .iter()
            .map(|node| {
                let v = f(&node.k);
                node.polarization.map(|e| project(&e, &v))
            })
            .collect();
        Self { grid, amplitudes }
    }

    pub fn vector_amplitude(&self, n: usize) -> CVector3 {
        let [e1, e2] = self.grid.nodes()[n].polarization;
        let [a1, a2] = self.amplitudes[n];
        e1.map(|v| a1 * v) + e2.map(|v| a2 * v)
    }

    /// Amplitudes multiplied by `e^{−iωτ}`.
    pub fn advanced(&self, tau: f64) -> Self {
        let amplitudes = self
            .amplitudes
            .iter()
            .zip(self.grid.nodes())
            .map(|(a, node)| {
                let ph = Complex64::from_polar(1.0, -node.omega * tau);
                a.map(|x| x * ph)
            })
            .collect();
        Self { grid: self.grid.clone(), amplitudes }
    }

    pub fn is_zero(&self) -> bool {
        self.amplitudes.iter().all(|a| a[0].norm_sqr() + a[1].norm_sqr() == 0.0)
    }

    /// `(Ã_⊥, π̃_⊥)` at node `n` and parameter `τ`, including the `−k`
    /// partner term when the grid contains it.
    pub fn fourier_fields(&self, n: usize, tau: f64) -> (CVector3, CVector3) {
        let node = &self.grid.nodes()[n];
        let ph = Complex64::from_polar(1.0, -node.omega * tau);
        let pos = self.vector_amplitude(n) * ph;
        let neg = match self.grid.partner(n) {
            Some(p) => self.vector_amplitude(p).map(|v| v.conj() * ph.conj()),
            None => CVector3::zeros(),
        };
        let i = Complex64::i();
        let a = (pos + neg) / Complex64::new(2.0 * node.omega, 0.0);
        let pi = (pos - neg) * (0.5 * i);
        (a, pi)
    }
}

fn project(e: &Vector3<f64>, v: &CVector3) -> Complex64 {
    e.x * v.x + e.y * v.y + e.z * v.z
}

/// Real transverse fields at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub potential: Vector3<f64>,
    pub electric: Vector3<f64>,
    pub magnetic: Vector3<f64>,
}

pub fn eval_radiation_fields(s: &RadiationState, tau: f64, sigma: &Vector3<f64>) -> FieldSample {
    let grid = &s.grid;
    let i = Complex64::i();
    let mut out = FieldSample { potential: Vector3::zeros(), electric: Vector3::zeros(), magnetic: Vector3::zeros() };
    for (n, node) in grid.nodes().iter().enumerate() {
        let v = s.vector_amplitude(n);
        let w = 2.0 * grid.measure(n);
        let z = v * Complex64::from_polar(1.0, node.k.dot(sigma) - node.omega * tau);
        let kc = node.k.map(|x| Complex64::new(x, 0.0));
        out.potential += z.map(|c| c.re) * w;
        out.electric += z.map(|c| (i * c).re) * (w * node.omega);
        out.magnetic += kc.cross(&z).map(|c| (i * c).re) * w;
    }
    out
}

/// `ε_λ(k)·[ω Ã_⊥ − i π̃_⊥]` for both helicity-frame polarizations.
pub fn extract_a_em(a_tilde: &CVector3, pi_tilde: &CVector3, k: &Vector3<f64>) -> Result<[Complex64; 2], MinkowskiError> {
    let omega = k.norm();
    let pol = helicity_polarizations(k)?;
    let g = a_tilde * Complex64::new(omega, 0.0) - pi_tilde * Complex64::i();
    Ok(pol.map(|e| project(&e, &g)))
}

/// Internal Poincaré generators of the free field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiationGenerators {
    pub energy: f64,
    pub momentum: Vector3<f64>,
    pub angular_momentum: Vector3<f64>,
    pub boost: Vector3<f64>,
    pub helicity: f64,
}

/// Energy, momentum and helicity: these need no k-derivatives.
pub fn radiation_energy_momentum(s: &RadiationState, c: f64) -> (f64, Vector3<f64>, f64) {
    let grid = &s.grid;
    let mut e = 0.0;
    let mut p = Vector3::zeros();
    let mut h = 0.0;
    for (n, node) in grid.nodes().iter().enumerate() {
        let [a1, a2] = s.amplitudes[n];
        let dens = grid.measure(n) * (a1.norm_sqr() + a2.norm_sqr());
        e += dens * node.omega;
        p += node.k * dens;
        h += 2.0 * grid.measure(n) * (a1.conj() * a2).im;
    }
    (e, p / c, h / c)
}

/// All ten generators at parameter `τ`.
///
/// With `V = Σ_λ ε⃗_λ a_λ` and `L = −i k×∂_k`:
/// `𝒥 = (1/c)∫d̃k [Re(V*·L V) − i V*×V]` and
/// `𝒦 = (1/c)∫d̃k ω Im(V*·∂_k V) − τ𝒫`. Expanding `V` in the helicity frame
/// gives the orbital term plus the two polarization-frame terms.
pub fn radiation_generators(s: &RadiationState, c: f64, tau: f64) -> Result<RadiationGenerators, RadiationError> {
    let grid = &s.grid;
    let (energy, momentum, helicity) = radiation_energy_momentum(s, c);
    let n = grid.len();
    let v: Vec<CVector3> = (0..n).map(|i| s.vector_amplitude(i)).collect();
    let comps: Vec<Vec<Complex64>> = (0..3).map(|a| v.iter().map(|x| x[a]).collect()).collect();
    let per_comp: Vec<([Vec<Complex64>; 3], Vec<CVector3>)> = comps
        .par_iter()
        .map(|f| Ok((grid.angular_momentum_of(f)?, grid.gradient_of(f)?)))
        .collect::<Result<_, RadiationError>>()?;
    let mut j = Vector3::zeros();
    let mut k = Vector3::zeros();
    for i in 0..n {
        let mu = grid.measure(i);
        let node = &grid.nodes()[i];
        for (a, (lf, grad)) in per_comp.iter().enumerate() {
            let vc = v[i][a].conj();
            for r in 0..3 {
                j[r] += mu * (vc * lf[r][i]).re;
                k[r] += mu * node.omega * (vc * grad[i][r]).im;
            }
        }
        let spin = v[i].map(|x| x.conj()).cross(&v[i]);
        j += spin.map(|x| x.im) * mu;
    }
    Ok(RadiationGenerators {
        energy,
        momentum,
        angular_momentum: j / c,
        boost: k / c - momentum * tau,
        helicity,
    })
}
