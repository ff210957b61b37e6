//! Rest-frame instant form of dynamics for positive-energy charged scalar
//! particles coupled to the transverse electromagnetic field.
//!
//! Charges are nilpotent generators (see [`grassmann`]), which removes the
//! self-energies and makes the particle/radiation splitting canonical order
//! by order. Units are Heaviside–Lorentz with `c` explicit and the evolution
//! parameter `τ` carrying dimensions of length.

// `!(x > 0.0)` guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Polarization loops index several per-mode arrays in step.
#![allow(clippy::needless_range_loop)]

pub mod canonical_transform;
pub mod dynamics;
pub mod grassmann;
pub mod kinematics;
pub mod minkowski;
pub mod pair_integrals;
pub mod lienard_wiechert;
pub mod quadrature;
pub mod radiation;
