//! Gauss–Legendre rules, product rules on the sphere, a spherical-harmonic
//! transform on the product grid, and polynomial differentiation matrices.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use nalgebra::DMatrix;
use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QuadratureError {
    #[error("rule needs at least {min} nodes, got {got}")]
    TooFewNodes { min: usize, got: usize },
    #[error("invalid interval [{a}, {b}]")]
    BadInterval { a: f64, b: f64 },
    #[error("expected {expected} grid values, got {got}")]
    SizeMismatch { expected: usize, got: usize },
}

/// Nodes (ascending) and weights of a one-dimensional rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<Rule, QuadratureError> {
    let nz = NonZeroUsize::new(n).ok_or(QuadratureError::TooFewNodes { min: 1, got: 0 })?;
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(QuadratureError::BadInterval { a, b });
    }
    let rule = GaussLegendre::new(nz);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    let mut pairs: Vec<(f64, f64)> = rule.iter().map(|(x, w)| (mid + half * x, half * w)).collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    let (nodes, weights) = pairs.into_iter().unzip();
    Ok(Rule { nodes, weights })
}

/// Uniform periodic rule on `[0, 2π)` with nodes at `(j + ½)·2π/n`.
pub fn uniform_azimuth(n: usize) -> Result<Rule, QuadratureError> {
    if n == 0 {
        return Err(QuadratureError::TooFewNodes { min: 1, got: 0 });
    }
    let h = 2.0 * PI / n as f64;
    Ok(Rule {
        nodes: (0..n).map(|j| (j as f64 + 0.5) * h).collect(),
        weights: vec![h; n],
    })
}

/// Derivative matrix of the interpolating polynomial through `nodes`.
pub fn differentiation_matrix(nodes: &[f64]) -> DMatrix<f64> {
    let n = nodes.len();
    let bary: Vec<f64> = (0..n)
        .map(|j| {
            let p: f64 = (0..n).filter(|&k| k != j).map(|k| nodes[j] - nodes[k]).product();
            1.0 / p
        })
        .collect();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let v = bary[j] / bary[i] / (nodes[i] - nodes[j]);
                d[(i, j)] = v;
                diag -= v;
            }
        }
        d[(i, i)] = diag;
    }
    d
}

/// Spherical-harmonic transform on a Gauss–Legendre (in `cos θ`) × uniform
/// (in `φ`) grid. Exact for functions band-limited to degree `lmax`.
#[derive(Debug, Clone)]
pub struct SphericalTransform {
    pub lmax: usize,
    pub mu: Rule,
    pub phi: Rule,
    /// Orthonormal `P̄_l^m(μ_j)` for `m ≥ 0`, indexed `[j][lm_index(l, m)]`.
    legendre: Vec<Vec<f64>>,
}

fn lm_index(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

/// Spectral coefficients `c_{l,m}` for `|m| ≤ l ≤ lmax`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicCoeffs {
    pub lmax: usize,
    data: Vec<Complex64>,
}

impl HarmonicCoeffs {
    pub fn zeros(lmax: usize) -> Self {
        Self { lmax, data: vec![Complex64::new(0.0, 0.0); (lmax + 1) * (lmax + 1)] }
    }

    fn idx(l: usize, m: i64) -> usize {
        l * l + (m + l as i64) as usize
    }

    pub fn get(&self, l: usize, m: i64) -> Complex64 {
        if l > self.lmax || m.unsigned_abs() as usize > l {
            return Complex64::new(0.0, 0.0);
        }
        self.data[Self::idx(l, m)]
    }

    pub fn set(&mut self, l: usize, m: i64, v: Complex64) {
        self.data[Self::idx(l, m)] = v;
    }

    /// Applies `L_z`, `L_x`, `L_y` with `L = −i k̂×∇`.
    pub fn angular_momentum(&self) -> [HarmonicCoeffs; 3] {
        let mut lx = Self::zeros(self.lmax);
        let mut ly = Self::zeros(self.lmax);
        let mut lz = Self::zeros(self.lmax);
        let i = Complex64::i();
        for l in 0..=self.lmax {
            let lf = l as f64;
            for m in -(l as i64)..=(l as i64) {
                let mf = m as f64;
                lz.set(l, m, self.get(l, m) * mf);
                // (L₊c)_m = √(l(l+1) − (m−1)m) c_{m−1}, (L₋c)_m = √(l(l+1) − (m+1)m) c_{m+1}
                let up = (lf * (lf + 1.0) - (mf - 1.0) * mf).max(0.0).sqrt() * self.get(l, m - 1);
                let down = (lf * (lf + 1.0) - (mf + 1.0) * mf).max(0.0).sqrt() * self.get(l, m + 1);
                lx.set(l, m, 0.5 * (up + down));
                ly.set(l, m, -0.5 * i * (up - down));
            }
        }
        [lx, ly, lz]
    }
}

impl SphericalTransform {
    pub fn new(n_mu: usize, n_phi: usize) -> Result<Self, QuadratureError> {
        if n_mu < 1 {
            return Err(QuadratureError::TooFewNodes { min: 1, got: n_mu });
        }
        let lmax = n_mu - 1;
        if n_phi < 2 * lmax + 1 {
            return Err(QuadratureError::TooFewNodes { min: 2 * lmax + 1, got: n_phi });
        }
        let mu = gauss_legendre(n_mu, -1.0, 1.0)?;
        let phi = uniform_azimuth(n_phi)?;
        let legendre = mu.nodes.iter().map(|&x| normalized_legendre(lmax, x)).collect();
        Ok(Self { lmax, mu, phi, legendre })
    }

    pub fn grid_len(&self) -> usize {
        self.mu.len() * self.phi.len()
    }

    /// Grid values ordered `[μ index][φ index]` to coefficients.
    pub fn analyze(&self, f: &[Complex64]) -> Result<HarmonicCoeffs, QuadratureError> {
        let (nm, np) = (self.mu.len(), self.phi.len());
        if f.len() != nm * np {
            return Err(QuadratureError::SizeMismatch { expected: nm * np, got: f.len() });
        }
        let mut out = HarmonicCoeffs::zeros(self.lmax);
        let lmax = self.lmax as i64;
        for j in 0..nm {
            let row = &f[j * np..(j + 1) * np];
            for m in -lmax..=lmax {
                let fm: Complex64 = row
                    .iter()
                    .zip(&self.phi.nodes)
                    .map(|(v, &p)| v * Complex64::from_polar(1.0, -(m as f64) * p))
                    .sum::<Complex64>()
                    * self.phi.weights[0];
                let am = m.unsigned_abs() as usize;
                let sign = if m < 0 && am % 2 == 1 { -1.0 } else { 1.0 };
                for l in am..=self.lmax {
                    let p = sign * self.legendre[j][lm_index(l, am)];
                    let cur = out.get(l, m);
                    out.set(l, m, cur + fm * (p * self.mu.weights[j]));
                }
            }
        }
        Ok(out)
    }

    pub fn synthesize(&self, c: &HarmonicCoeffs) -> Vec<Complex64> {
        let (nm, np) = (self.mu.len(), self.phi.len());
        let lmax = self.lmax.min(c.lmax) as i64;
        let mut out = vec![Complex64::new(0.0, 0.0); nm * np];
        for j in 0..nm {
            for m in -lmax..=lmax {
                let am = m.unsigned_abs() as usize;
                let sign = if m < 0 && am % 2 == 1 { -1.0 } else { 1.0 };
                let fm: Complex64 =
                    (am..=lmax as usize).map(|l| c.get(l, m) * (sign * self.legendre[j][lm_index(l, am)])).sum();
                for (k, &p) in self.phi.nodes.iter().enumerate() {
                    out[j * np + k] += fm * Complex64::from_polar(1.0, m as f64 * p);
                }
            }
        }
        out
    }

    /// `[L_x f, L_y f, L_z f]` on the grid for band-limited `f`.
    pub fn angular_momentum(&self, f: &[Complex64]) -> Result<[Vec<Complex64>; 3], QuadratureError> {
        let c = self.analyze(f)?;
        Ok(c.angular_momentum().map(|l| self.synthesize(&l)))
    }
}

/// `P̄_l^m(x)` for `0 ≤ m ≤ l ≤ lmax`, normalized so that
/// `P̄_l^m(cos θ) e^{imφ}` are orthonormal on the sphere (Condon–Shortley phase).
fn normalized_legendre(lmax: usize, x: f64) -> Vec<f64> {
    let mut p = vec![0.0; lm_index(lmax, lmax) + 1];
    let s = (1.0 - x * x).max(0.0).sqrt();
    p[0] = (1.0 / (4.0 * PI)).sqrt();
    for m in 1..=lmax {
        let mf = m as f64;
        p[lm_index(m, m)] = -((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s * p[lm_index(m - 1, m - 1)];
    }
    for m in 0..lmax {
        p[lm_index(m + 1, m)] = (2.0 * m as f64 + 3.0).sqrt() * x * p[lm_index(m, m)];
    }
    for m in 0..=lmax {
        let mf = m as f64;
        for l in (m + 2)..=lmax {
            let lf = l as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            p[lm_index(l, m)] = a * (x * p[lm_index(l - 1, m)] - b * p[lm_index(l - 2, m)]);
        }
    }
    p
}
