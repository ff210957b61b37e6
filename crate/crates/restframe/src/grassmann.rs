//! Commutative nilpotent charge algebra.
//!
//! Elements are polynomials in generators `Q_1..Q_N` with `Q_i^2 = 0`.
//! Monomials are keyed by a bitmask of the generators they contain, so a
//! product of two monomials that share a bit vanishes.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::Vector3;

/// Hard limit imposed by the `u32` monomial key.
pub const MAX_GENERATORS: usize = 32;

/// Default cap on the generator count accepted by state constructors.
pub const DEFAULT_GENERATOR_CAP: usize = 16;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GrassmannError {
    #[error("generator count mismatch: {left} vs {right}")]
    CountMismatch { left: usize, right: usize },
    #[error("{0} generators exceed the supported maximum of {MAX_GENERATORS}")]
    TooManyGenerators(usize),
    #[error("generator index {index} out of range for {n} generators")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("charge vector has length {got}, expected {expected}")]
    ChargeLength { got: usize, expected: usize },
    #[error("element with vanishing constant term is not invertible")]
    NotInvertible,
}

/// Multilinear polynomial in nilpotent commuting generators.
#[derive(Clone, PartialEq)]
pub struct Grassmann {
    n: usize,
    terms: BTreeMap<u32, f64>,
}

impl Grassmann {
    pub fn zero(n: usize) -> Self {
        assert!(n <= MAX_GENERATORS, "{}", GrassmannError::TooManyGenerators(n));
        Self { n, terms: BTreeMap::new() }
    }

    pub fn constant(n: usize, value: f64) -> Self {
        let mut g = Self::zero(n);
        g.insert(0, value);
        g
    }

    /// The generator `Q_index` (zero-based).
    pub fn generator(n: usize, index: usize) -> Result<Self, GrassmannError> {
        if n > MAX_GENERATORS {
            return Err(GrassmannError::TooManyGenerators(n));
        }
        if index >= n {
            return Err(GrassmannError::IndexOutOfRange { index, n });
        }
        let mut g = Self::zero(n);
        g.insert(1 << index, 1.0);
        Ok(g)
    }

    /// Single monomial `value * Q^mask`.
    pub fn monomial(n: usize, mask: u32, value: f64) -> Self {
        let mut g = Self::zero(n);
        assert!(n == 32 || mask >> n == 0, "monomial uses generators beyond {n}");
        g.insert(mask, value);
        g
    }

    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut g = Self::zero(n);
        for (mask, value) in terms {
            g.insert(mask, g.coeff(mask) + value);
        }
        g
    }

    fn insert(&mut self, mask: u32, value: f64) {
        if value == 0.0 {
            self.terms.remove(&mask);
        } else {
            self.terms.insert(mask, value);
        }
    }

    pub fn generators(&self) -> usize {
        self.n
    }

    pub fn coeff(&self, mask: u32) -> f64 {
        self.terms.get(&mask).copied().unwrap_or(0.0)
    }

    /// Constant (body) part.
    pub fn base(&self) -> f64 {
        self.coeff(0)
    }

    /// Everything except the constant part.
    pub fn correction(&self) -> Self {
        let mut g = self.clone();
        g.terms.remove(&0);
        g
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.terms.iter().map(|(&m, &v)| (m, v))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Highest monomial degree present, 0 for constants and zero.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|m| m.count_ones()).max().unwrap_or(0)
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.terms.values().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Drop monomials above `max_degree`.
    pub fn truncate(&self, max_degree: u32) -> Self {
        let mut g = self.clone();
        g.terms.retain(|m, _| m.count_ones() <= max_degree);
        g
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut g = Self::zero(self.n);
        for (&m, &v) in &self.terms {
            g.insert(m, v * s);
        }
        g
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self, GrassmannError> {
        self.check(other)?;
        let mut out = BTreeMap::new();
        for (&ma, &va) in &self.terms {
            for (&mb, &vb) in &other.terms {
                if ma & mb == 0 {
                    *out.entry(ma | mb).or_insert(0.0) += va * vb;
                }
            }
        }
        out.retain(|_, v: &mut f64| *v != 0.0);
        Ok(Self { n: self.n, terms: out })
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, GrassmannError> {
        self.check(other)?;
        let mut g = self.clone();
        for (&m, &v) in &other.terms {
            g.insert(m, g.coeff(m) + v);
        }
        Ok(g)
    }

    fn check(&self, other: &Self) -> Result<(), GrassmannError> {
        if self.n == other.n {
            Ok(())
        } else {
            Err(GrassmannError::CountMismatch { left: self.n, right: other.n })
        }
    }

    /// Substitute `Q_i -> charges[i]`.
    pub fn project(&self, charges: &[f64]) -> Result<f64, GrassmannError> {
        if charges.len() != self.n {
            return Err(GrassmannError::ChargeLength { got: charges.len(), expected: self.n });
        }
        Ok(self
            .terms
            .iter()
            .map(|(&m, &v)| {
                let mut p = v;
                let mut bits = m;
                while bits != 0 {
                    let i = bits.trailing_zeros() as usize;
                    p *= charges[i];
                    bits &= bits - 1;
                }
                p
            })
            .sum())
    }

    /// Evaluate an analytic function at this element.
    ///
    /// `derivs[k]` must hold the k-th derivative at the constant part.
    /// The Taylor series stops at order N since the nilpotent part `ν`
    /// satisfies `ν^{N+1} = 0`.
    pub fn apply(&self, derivs: &[f64]) -> Self {
        let nu = self.correction();
        let mut out = Self::constant(self.n, derivs[0]);
        let mut power = Self::constant(self.n, 1.0);
        let mut fact = 1.0;
        for (k, d) in derivs.iter().enumerate().skip(1) {
            power = &power * &nu;
            if power.is_zero() {
                break;
            }
            fact *= k as f64;
            out += &power.scale(d / fact);
        }
        out
    }

    fn taylor_order(&self) -> usize {
        self.n + 1
    }

    pub fn sqrt(&self) -> Self {
        self.powf(0.5)
    }

    pub fn powf(&self, exponent: f64) -> Self {
        let a = self.base();
        let orders = self.taylor_order();
        let mut derivs = Vec::with_capacity(orders);
        let mut coef = 1.0;
        let mut p = exponent;
        for _ in 0..orders {
            derivs.push(coef * a.powf(p));
            coef *= p;
            p -= 1.0;
        }
        self.apply(&derivs)
    }

    pub fn recip(&self) -> Result<Self, GrassmannError> {
        if self.base() == 0.0 {
            return Err(GrassmannError::NotInvertible);
        }
        Ok(self.powf(-1.0))
    }

    pub fn sin(&self) -> Self {
        let a = self.base();
        let derivs: Vec<f64> = (0..self.taylor_order())
            .map(|k| match k % 4 {
                0 => a.sin(),
                1 => a.cos(),
                2 => -a.sin(),
                _ => -a.cos(),
            })
            .collect();
        self.apply(&derivs)
    }

    pub fn cos(&self) -> Self {
        let a = self.base();
        let derivs: Vec<f64> = (0..self.taylor_order())
            .map(|k| match k % 4 {
                0 => a.cos(),
                1 => -a.sin(),
                2 => -a.cos(),
                _ => a.sin(),
            })
            .collect();
        self.apply(&derivs)
    }
}

impl fmt::Debug for Grassmann {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Grassmann {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (&m, &v) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{v:e}")?;
            let mut bits = m;
            while bits != 0 {
                write!(f, "·Q{}", bits.trailing_zeros() + 1)?;
                bits &= bits - 1;
            }
        }
        Ok(())
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $body:expr) => {
        impl $tr<&Grassmann> for &Grassmann {
            type Output = Grassmann;
            fn $method(self, rhs: &Grassmann) -> Grassmann {
                let f: fn(&Grassmann, &Grassmann) -> Result<Grassmann, GrassmannError> = $body;
                f(self, rhs).unwrap_or_else(|e| panic!("{e}"))
            }
        }
        impl $tr<Grassmann> for Grassmann {
            type Output = Grassmann;
            fn $method(self, rhs: Grassmann) -> Grassmann {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&Grassmann> for Grassmann {
            type Output = Grassmann;
            fn $method(self, rhs: &Grassmann) -> Grassmann {
                (&self).$method(rhs)
            }
        }
        impl $tr<Grassmann> for &Grassmann {
            type Output = Grassmann;
            fn $method(self, rhs: Grassmann) -> Grassmann {
                self.$method(&rhs)
            }
        }
    };
}

binop!(Add, add, |a, b| a.try_add(b));
binop!(Sub, sub, |a, b| a.try_add(&-b));
binop!(Mul, mul, |a, b| a.try_mul(b));

impl Neg for &Grassmann {
    type Output = Grassmann;
    fn neg(self) -> Grassmann {
        self.scale(-1.0)
    }
}

impl Neg for Grassmann {
    type Output = Grassmann;
    fn neg(self) -> Grassmann {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &Grassmann {
    type Output = Grassmann;
    fn mul(self, rhs: f64) -> Grassmann {
        self.scale(rhs)
    }
}

impl Mul<f64> for Grassmann {
    type Output = Grassmann;
    fn mul(self, rhs: f64) -> Grassmann {
        self.scale(rhs)
    }
}

impl AddAssign<&Grassmann> for Grassmann {
    fn add_assign(&mut self, rhs: &Grassmann) {
        assert_eq!(self.n, rhs.n, "{}", GrassmannError::CountMismatch { left: self.n, right: rhs.n });
        for (&m, &v) in &rhs.terms {
            let x = self.coeff(m) + v;
            self.insert(m, x);
        }
    }
}

impl AddAssign<Grassmann> for Grassmann {
    fn add_assign(&mut self, rhs: Grassmann) {
        *self += &rhs;
    }
}

impl SubAssign<&Grassmann> for Grassmann {
    fn sub_assign(&mut self, rhs: &Grassmann) {
        *self += &(-rhs);
    }
}

/// Three Grassmann components.
#[derive(Clone, Debug, PartialEq)]
pub struct GrassmannVec3(pub [Grassmann; 3]);

impl GrassmannVec3 {
    pub fn zero(n: usize) -> Self {
        Self([Grassmann::zero(n), Grassmann::zero(n), Grassmann::zero(n)])
    }

    pub fn from_real(n: usize, v: &Vector3<f64>) -> Self {
        Self([Grassmann::constant(n, v.x), Grassmann::constant(n, v.y), Grassmann::constant(n, v.z)])
    }

    /// `coefficient * v` for a real vector.
    pub fn scaled(coefficient: &Grassmann, v: &Vector3<f64>) -> Self {
        Self([coefficient * v.x, coefficient * v.y, coefficient * v.z])
    }

    pub fn base(&self) -> Vector3<f64> {
        Vector3::new(self.0[0].base(), self.0[1].base(), self.0[2].base())
    }

    /// Real vector of the coefficients of one monomial.
    pub fn component(&self, mask: u32) -> Vector3<f64> {
        Vector3::new(self.0[0].coeff(mask), self.0[1].coeff(mask), self.0[2].coeff(mask))
    }

    pub fn project(&self, charges: &[f64]) -> Result<Vector3<f64>, GrassmannError> {
        Ok(Vector3::new(
            self.0[0].project(charges)?,
            self.0[1].project(charges)?,
            self.0[2].project(charges)?,
        ))
    }

    pub fn dot(&self, other: &Self) -> Grassmann {
        &(&self.0[0] * &other.0[0] + &self.0[1] * &other.0[1]) + &self.0[2] * &other.0[2]
    }

    pub fn cross(&self, other: &Self) -> Self {
        let [a0, a1, a2] = &self.0;
        let [b0, b1, b2] = &other.0;
        Self([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0])
    }

    pub fn scale(&self, s: &Grassmann) -> Self {
        Self([&self.0[0] * s, &self.0[1] * s, &self.0[2] * s])
    }

    /// Largest coefficient over components and monomials.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |a, g| a.max(g.max_abs()))
    }

    /// Every monomial key present in any component.
    pub fn masks(&self) -> Vec<u32> {
        let mut m: Vec<u32> = self.0.iter().flat_map(|g| g.terms().map(|(k, _)| k)).collect();
        m.sort_unstable();
        m.dedup();
        m
    }
}

impl Add<&GrassmannVec3> for &GrassmannVec3 {
    type Output = GrassmannVec3;
    fn add(self, rhs: &GrassmannVec3) -> GrassmannVec3 {
        GrassmannVec3([&self.0[0] + &rhs.0[0], &self.0[1] + &rhs.0[1], &self.0[2] + &rhs.0[2]])
    }
}

impl Sub<&GrassmannVec3> for &GrassmannVec3 {
    type Output = GrassmannVec3;
    fn sub(self, rhs: &GrassmannVec3) -> GrassmannVec3 {
        GrassmannVec3([&self.0[0] - &rhs.0[0], &self.0[1] - &rhs.0[1], &self.0[2] - &rhs.0[2]])
    }
}

impl AddAssign<&GrassmannVec3> for GrassmannVec3 {
    fn add_assign(&mut self, rhs: &GrassmannVec3) {
        for (a, b) in self.0.iter_mut().zip(&rhs.0) {
            *a += b;
        }
    }
}

/// Truncated exponential of a nilpotent flow: `a + {a,S} + ½{{a,S},S}`.
///
/// The caller supplies the first two brackets; higher terms vanish when `S`
/// has degree ≥ 1 and only pairwise products survive.
pub fn exp_flow_series(value: &Grassmann, first: &Grassmann, second: &Grassmann) -> Grassmann {
    value + first + &second.scale(0.5)
}

/// Scalar arithmetic shared by `f64` and [`Grassmann`], so closed-form
/// kernels can be evaluated at nilpotent arguments.
pub trait Scalar:
    Clone + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self> + Mul<f64, Output = Self>
{
    /// A constant in the same algebra as `self`.
    fn lift(&self, value: f64) -> Self;
    fn sqrt(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    /// Reciprocal; the constant part must be non-zero.
    fn recip(&self) -> Self;
    fn base(&self) -> f64;
    fn into_grassmann(self, n: usize) -> Grassmann;
}

impl Scalar for f64 {
    fn lift(&self, value: f64) -> Self {
        value
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn recip(&self) -> Self {
        f64::recip(*self)
    }
    fn base(&self) -> f64 {
        *self
    }
    fn into_grassmann(self, n: usize) -> Grassmann {
        Grassmann::constant(n, self)
    }
}

impl Scalar for Grassmann {
    fn lift(&self, value: f64) -> Self {
        Grassmann::constant(self.n, value)
    }
    fn sqrt(&self) -> Self {
        Grassmann::sqrt(self)
    }
    fn sin(&self) -> Self {
        Grassmann::sin(self)
    }
    fn cos(&self) -> Self {
        Grassmann::cos(self)
    }
    fn recip(&self) -> Self {
        self.powf(-1.0)
    }
    fn base(&self) -> f64 {
        Grassmann::base(self)
    }
    fn into_grassmann(self, n: usize) -> Grassmann {
        assert_eq!(self.n, n, "{}", GrassmannError::CountMismatch { left: self.n, right: n });
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: usize, i: usize) -> Grassmann {
        Grassmann::generator(n, i).unwrap()
    }

    #[test]
    fn nilpotent_generator() {
        assert!((&q(2, 0) * &q(2, 0)).is_zero());
    }

    #[test]
    fn product_of_shifted_units() {
        let one = Grassmann::constant(2, 1.0);
        let p = (&one + &q(2, 0)) * (&one + &q(2, 1));
        assert_eq!(p.coeff(0b00), 1.0);
        assert_eq!(p.coeff(0b01), 1.0);
        assert_eq!(p.coeff(0b10), 1.0);
        assert_eq!(p.coeff(0b11), 1.0);
    }

    #[test]
    fn square_of_linear_form() {
        let (a, b) = (3.0, -5.0);
        let x = q(2, 0).scale(a) + q(2, 1).scale(b);
        let sq = &x * &x;
        assert_eq!(sq, Grassmann::monomial(2, 0b11, 2.0 * a * b));
    }

    #[test]
    fn projection_examples() {
        let e = 1.7;
        let qq = &q(2, 0) * &q(2, 1);
        assert!((qq.project(&[e, e]).unwrap() - e * e).abs() < 1e-15);
        assert_eq!(Grassmann::zero(2).project(&[4.0, 5.0]).unwrap(), 0.0);
        let x = Grassmann::constant(2, 1.0) + q(2, 0) + qq;
        assert_eq!(x.project(&[2.0, 3.0]).unwrap(), 9.0);
    }

    #[test]
    fn mismatched_generator_count() {
        let a = Grassmann::constant(2, 1.0);
        let b = Grassmann::constant(3, 1.0);
        assert_eq!(a.try_mul(&b), Err(GrassmannError::CountMismatch { left: 2, right: 3 }));
        assert!(matches!(a.project(&[1.0]), Err(GrassmannError::ChargeLength { .. })));
    }

    #[test]
    fn sqrt_squares_back() {
        let x = Grassmann::constant(3, 4.0) + q(3, 0).scale(0.3) + q(3, 1).scale(-0.7)
            + (&q(3, 0) * &q(3, 2)).scale(1.1);
        let r = x.sqrt();
        let back = &r * &r;
        for (m, v) in x.terms() {
            assert!((back.coeff(m) - v).abs() < 1e-14, "mask {m}");
        }
        assert!((back.coeff(0b011) - x.coeff(0b011)).abs() < 1e-14);
    }

    #[test]
    fn recip_inverts() {
        let x = Grassmann::constant(2, -2.5) + q(2, 0).scale(0.4) + q(2, 1).scale(1.3);
        let one = &x * &x.recip().unwrap();
        assert!((one.base() - 1.0).abs() < 1e-15);
        assert!(one.correction().max_abs() < 1e-15);
        assert_eq!(Grassmann::zero(2).recip(), Err(GrassmannError::NotInvertible));
    }

    #[test]
    fn trig_identity() {
        let x = Grassmann::constant(2, 0.4) + q(2, 0).scale(0.9) + q(2, 1).scale(-0.2);
        let s = x.sin();
        let c = x.cos();
        let one = &s * &s + &c * &c;
        assert!((one.base() - 1.0).abs() < 1e-15);
        assert!(one.correction().max_abs() < 1e-15);
    }

    #[test]
    fn cross_product_antisymmetric() {
        let n = 2;
        let a = GrassmannVec3([q(n, 0), Grassmann::constant(n, 1.0), q(n, 1)]);
        let b = GrassmannVec3([Grassmann::constant(n, 2.0), q(n, 1), q(n, 0)]);
        let ab = a.cross(&b);
        let ba = b.cross(&a);
        assert!((&ab + &ba).max_abs() == 0.0);
        assert!(a.dot(&ab).max_abs() < 1e-15);
    }
}
