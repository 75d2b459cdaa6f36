//! Responsive isotropic Hooke's laws, `σ = ℂ(e − β s I)`, in plane strain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::DIM;

/// Symmetric 2×2 tensor stored as `(xx, yy, xy)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sym2 {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 {
        xx: 1.0,
        yy: 1.0,
        xy: 0.0,
    };

    pub fn new(xx: f64, yy: f64, xy: f64) -> Self {
        Sym2 { xx, yy, xy }
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    /// Frobenius inner product `A : B`.
    pub fn dot(&self, other: &Sym2) -> f64 {
        self.xx * other.xx + self.yy * other.yy + 2.0 * self.xy * other.xy
    }

    pub fn scale(&self, a: f64) -> Sym2 {
        Sym2::new(a * self.xx, a * self.yy, a * self.xy)
    }

    pub fn add(&self, other: &Sym2) -> Sym2 {
        Sym2::new(self.xx + other.xx, self.yy + other.yy, self.xy + other.xy)
    }

    /// Symmetric gradient of a P1 field from its nodal values and the
    /// element shape-function gradients.
    pub fn strain(grads: &[[f64; 2]; 3], nodal: [[f64; 2]; 3]) -> Sym2 {
        let mut du = [[0.0; 2]; 2];
        for k in 0..3 {
            for c in 0..2 {
                for d in 0..2 {
                    du[c][d] += nodal[k][c] * grads[k][d];
                }
            }
        }
        Sym2::new(du[0][0], du[1][1], 0.5 * (du[0][1] + du[1][0]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    pub young: f64,
    pub poisson: f64,
    #[serde(default)]
    pub beta: f64,
}

impl Material {
    pub fn new(young: f64, poisson: f64, beta: f64) -> Result<Self> {
        let m = Material {
            young,
            poisson,
            beta,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.young >= 0.0) || !self.young.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "Young's modulus must be finite and non-negative, got {}",
                self.young
            )));
        }
        if !(self.poisson > -1.0 && self.poisson < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "Poisson ratio must lie in (-1, 0.5), got {}",
                self.poisson
            )));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "responsiveness beta must be finite and non-negative, got {}",
                self.beta
            )));
        }
        Ok(())
    }

    pub fn lame_mu(&self) -> f64 {
        self.young / (2.0 * (1.0 + self.poisson))
    }

    /// Plane-strain first Lamé parameter.
    pub fn lame_lambda(&self) -> f64 {
        self.young * self.poisson / ((1.0 + self.poisson) * (1.0 - 2.0 * self.poisson))
    }

    /// `κ = (dλ + 2μ)/d` with `d = 2`.
    pub fn bulk(&self) -> f64 {
        (DIM as f64 * self.lame_lambda() + 2.0 * self.lame_mu()) / DIM as f64
    }

    /// `ℂ e : e` for a strain tensor.
    pub fn energy_density(&self, e: &Sym2) -> f64 {
        2.0 * self.lame_mu() * e.dot(e) + self.lame_lambda() * e.trace() * e.trace()
    }

    pub fn stress(&self, strain: &Sym2, s: f64) -> Sym2 {
        let (mu, lambda) = (self.lame_mu(), self.lame_lambda());
        let elastic = strain.add(&Sym2::IDENTITY.scale(-self.beta * s));
        elastic
            .scale(2.0 * mu)
            .add(&Sym2::IDENTITY.scale(lambda * elastic.trace()))
    }
}

/// Void, passive and responsive phases, in the order of `ρ1, ρ2, ρ3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSet {
    pub void: Material,
    pub passive: Material,
    pub responsive: Material,
    pub eta: f64,
}

impl PhaseSet {
    /// The void phase is the passive law scaled by `eta` with no response.
    pub fn new(passive: Material, responsive: Material, eta: f64) -> Result<Self> {
        passive.validate()?;
        responsive.validate()?;
        if !(eta > 0.0 && eta <= 1e-2) {
            return Err(Error::InvalidParameter(format!(
                "void stiffness scale eta must lie in (0, 1e-2], got {eta}"
            )));
        }
        if passive.young <= 0.0 || responsive.young <= 0.0 {
            return Err(Error::InvalidParameter(
                "solid phases need a positive Young's modulus".into(),
            ));
        }
        let void = Material {
            young: eta * passive.young,
            poisson: passive.poisson,
            beta: 0.0,
        };
        Ok(PhaseSet {
            void,
            passive,
            responsive,
            eta,
        })
    }

    pub fn phases(&self) -> [&Material; 3] {
        [&self.void, &self.passive, &self.responsive]
    }
}

/// Material interpolation `a(ρ) = ρ²`, even on `[-1, 1]`.
pub fn interp(rho: f64) -> f64 {
    let r = rho.clamp(-1.0, 1.0);
    r * r
}

pub fn interp_derivative(rho: f64) -> f64 {
    2.0 * rho.clamp(-1.0, 1.0)
}
