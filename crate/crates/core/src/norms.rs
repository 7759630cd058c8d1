//! Weighted majorant norms on analytic Poisson series and the quantitative
//! calculus built on them.
//!
//! The domain is a product `G_rho x T_sigma x B_R`: actions within `rho` of
//! a reference ball, angles in a complex strip of width `sigma`, Cartesian
//! variables in a polydisc of radius `R`. The norm of a series is the
//! weighted coefficient mass
//!
//! `|g| = sum |c| rho^{|mp|} R^{|mz| + |mw|} e^{|k| sigma}`
//!
//! which dominates the sup of `g` on the domain. Restricting the domain by
//! a factor `1 - d` buys derivative bounds (Cauchy), a bound on one Poisson
//! bracket in terms of the norms of its factors, and a bound on iterated
//! brackets `L_X^j g`. All estimates here are upper bounds that hold with
//! the stated restrictions; they never consult coefficient signs.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::series::{Coeff, PoissonSeries};

/// Analyticity radii of the working domain. All strictly positive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DomainParams {
    /// Action radius.
    pub rho: f64,
    /// Angle strip half-width.
    pub sigma: f64,
    /// Cartesian polydisc radius.
    pub r_cart: f64,
}

impl DomainParams {
    pub fn new(rho: f64, sigma: f64, r_cart: f64) -> Result<Self> {
        for (name, v) in [("rho", rho), ("sigma", sigma), ("R", r_cart)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!(
                    "domain radius {name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(DomainParams {
            rho,
            sigma,
            r_cart,
        })
    }

    /// The domain shrunk by the factor `1 - d`.
    pub fn restrict(&self, d: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&d) {
            return Err(Error::invalid(format!(
                "restriction fraction must lie in [0, 1), got {d}"
            )));
        }
        DomainParams::new(
            self.rho * (1.0 - d),
            self.sigma * (1.0 - d),
            self.r_cart * (1.0 - d),
        )
    }

    /// `Xi = 2/(e rho sigma) + 1/R^2`, the bracket constant of the domain.
    pub fn xi(&self) -> f64 {
        2.0 / (std::f64::consts::E * self.rho * self.sigma) + self.r_cart.powi(-2)
    }
}

/// Domain restriction data for the bracket estimate: the bracket of
/// functions controlled after losing `d_prime` (first factor additionally
/// `d`) is measured after losing another `delta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Restriction {
    pub d: f64,
    pub d_prime: f64,
    pub delta: f64,
}

impl Restriction {
    pub fn new(d: f64, d_prime: f64, delta: f64) -> Result<Self> {
        if !(d > 0.0) || !(delta > 0.0) || d_prime < 0.0 {
            return Err(Error::invalid(format!(
                "restriction needs d > 0, delta > 0, d_prime >= 0; got d = {d}, d_prime = {d_prime}, delta = {delta}"
            )));
        }
        if d + d_prime + delta >= 1.0 {
            return Err(Error::invalid(format!(
                "total restriction d + d_prime + delta = {} must stay below 1",
                d + d_prime + delta
            )));
        }
        Ok(Restriction { d, d_prime, delta })
    }
}

/// Majorant norm of `g` on the domain.
pub fn weighted_norm<T: Coeff>(g: &PoissonSeries<T>, domain: &DomainParams) -> f64 {
    let mut total = 0.0;
    for (key, c) in g.terms() {
        let trig = f64::exp(key.trig_degree() as f64 * domain.sigma);
        let action = domain.rho.powi(key.mp.iter().sum::<u32>() as i32);
        let cart = domain
            .r_cart
            .powi((key.mz.iter().sum::<u32>() + key.mw.iter().sum::<u32>()) as i32);
        total += crate::series::magnitude(c) * action * cart * trig;
    }
    total
}

/// Sup bounds for first derivatives on the domain shrunk by `1 - d`, given
/// the norm of `g` on the full domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CauchyBounds {
    /// Any action derivative `dg/dp_j`.
    pub action: f64,
    /// Any angle derivative `dg/dq_j`.
    pub angle: f64,
    /// Any Cartesian derivative `dg/dz_j` or `dg/dw_j`.
    pub cartesian: f64,
}

pub fn cauchy_bounds(norm_g: f64, d: f64, domain: &DomainParams) -> Result<CauchyBounds> {
    if !(d > 0.0 && d < 1.0) {
        return Err(Error::invalid(format!(
            "Cauchy estimate needs 0 < d < 1, got {d}"
        )));
    }
    Ok(CauchyBounds {
        action: norm_g / (d * domain.rho),
        angle: norm_g / (std::f64::consts::E * d * domain.sigma),
        cartesian: norm_g / (d * domain.r_cart),
    })
}

/// Norm bound for `{g, g_prime}` after the extra loss `delta`, where `g` is
/// controlled after losing `d + d_prime` and `g_prime` after `d_prime`.
pub fn bracket_bound(
    norm_g: f64,
    norm_g_prime: f64,
    restriction: &Restriction,
    domain: &DomainParams,
) -> f64 {
    let r = restriction;
    domain.xi() / ((r.d + r.delta) * r.delta) * norm_g * norm_g_prime
}

/// Norm bound for the iterated bracket `L_X^j g` after losing `d` beyond the
/// common loss `d_prime`:
///
/// `|L_X^j g| <= (j!/e^2) (e^2 Xi / d^2)^j |X|^j |g|`
///
/// The factorial is computed in double precision and overflows to infinity
/// past `j = 170`; an infinite bound is a valid (useless) answer.
pub fn multi_bracket_bound(
    j: u32,
    norm_x: f64,
    norm_g: f64,
    d: f64,
    domain: &DomainParams,
) -> Result<f64> {
    if !(d > 0.0 && d <= 1.0) {
        return Err(Error::invalid(format!(
            "multi-bracket estimate needs 0 < d <= 1, got {d}"
        )));
    }
    let e2 = std::f64::consts::E * std::f64::consts::E;
    let factor = e2 * domain.xi() / (d * d);
    let fact: f64 = (1..=j).map(|i| i as f64).product();
    Ok(fact / e2 * factor.powi(j as i32) * norm_x.powi(j as i32) * norm_g)
}
