//! Run configuration: a single TOML (or JSON) file describing the problem,
//! the analyticity domain, the algorithm parameters, and the verification
//! setup. Unknown keys are rejected; every default is spelled out here so a
//! config echoed into a certificate reparses to the identical struct.

use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use num::complex::Complex64;
use num::BigRational;
use serde::{Deserialize, Serialize};

use releg_core::engine::{EngineParams, Hamiltonian};
use releg_core::norms::DomainParams;
use releg_core::resonance::{resonance_module, FrequencyVector, ResonanceModule};
use releg_core::series::{Dims, Series, TermKey};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemBlock,
    pub domain: DomainBlock,
    pub algorithm: AlgorithmBlock,
    #[serde(default)]
    pub verify: VerifyBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    pub n1: usize,
    #[serde(default)]
    pub n2: usize,
    /// Rational frequency entries as strings, e.g. `["1", "-3/2"]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Vec<String>>,
    /// Float frequency entries; requires `resonance_basis` (possibly empty).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_float: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resonance_basis: Option<Vec<Vec<i64>>>,
    /// Tolerance for declaring `k . omega = 0` in the float case.
    #[serde(default = "default_zero_tol")]
    pub zero_tol: f64,
    /// Diophantine constants of the frequency; zero means undeclared.
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub tau: f64,
    #[serde(default)]
    pub f0: Vec<TermSpec>,
    #[serde(default)]
    pub h1: Vec<TermSpec>,
    #[serde(default)]
    pub mu: f64,
    pub epsilon: f64,
}

/// One term of a configured series. `k`, `p`, `z`, `w` default to all
/// zeros. With `cosine` (or `sine`) the harmonic is symmetrised:
/// `coeff cos(k.q)` (resp. `sin`) times the polynomial part, and the
/// coefficient must be real.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub coeff: f64,
    #[serde(default)]
    pub coeff_im: f64,
    #[serde(default)]
    pub k: Vec<i32>,
    #[serde(default)]
    pub p: Vec<u32>,
    #[serde(default)]
    pub z: Vec<u32>,
    #[serde(default)]
    pub w: Vec<u32>,
    #[serde(default)]
    pub cosine: bool,
    #[serde(default)]
    pub sine: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainBlock {
    pub rho: f64,
    pub sigma: f64,
    #[serde(rename = "R")]
    pub r_cart: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmBlock {
    #[serde(rename = "K")]
    pub k_split: u32,
    #[serde(rename = "Kprime", default, skip_serializing_if = "Option::is_none")]
    pub k_prime: Option<u32>,
    #[serde(rename = "L")]
    pub depth: u32,
    pub r: u32,
    #[serde(default = "default_d")]
    pub d: f64,
    /// Extra Lie orders kept when measuring the back-transform residual.
    #[serde(default = "default_buffer")]
    pub buffer: u32,
    #[serde(default = "default_floor")]
    pub small_divisor_floor: f64,
    #[serde(default = "default_budget")]
    pub term_budget: usize,
    /// `"nonresonant"` requests the exponential-stability certificate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyBlock {
    /// Sample points for residual checks and orbit starts.
    pub points: usize,
    pub t_span: f64,
    pub dt: f64,
    /// Covector of the slow observable `Phi0 = lambda . p`; defaults to
    /// `e_1`.
    pub lambda: Option<Vec<f64>>,
    /// Starting points are drawn in this fraction of the real domain.
    pub fraction: f64,
}

impl Default for VerifyBlock {
    fn default() -> Self {
        VerifyBlock {
            points: 100,
            t_span: 100.0,
            dt: 0.01,
            lambda: None,
            fraction: 0.625,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub manifest: String,
    pub certificate: String,
    pub drift_csv: String,
    pub summary: String,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            manifest: "manifest.json".into(),
            certificate: "certificate.json".into(),
            drift_csv: "drift.csv".into(),
            summary: "summary.json".into(),
        }
    }
}

fn default_zero_tol() -> f64 {
    1e-9
}
fn default_d() -> f64 {
    0.125
}
fn default_buffer() -> u32 {
    1
}
fn default_floor() -> f64 {
    1e-10
}
fn default_budget() -> usize {
    4_000_000
}

impl RunConfig {
    /// Parse a config file; the format is chosen by extension (`.json` is
    /// JSON, everything else TOML). Parse errors carry line/column info.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let cfg: RunConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)
                .with_context(|| format!("invalid JSON config {}", path.display()))?
        } else {
            toml::from_str(&text)
                .with_context(|| format!("invalid TOML config {}", path.display()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.problem;
        if p.n1 == 0 {
            bail!("problem.n1 must be at least 1");
        }
        match (&p.omega, &p.omega_float) {
            (Some(v), None) => {
                if v.len() != p.n1 {
                    bail!("problem.omega has {} entries, problem.n1 = {}", v.len(), p.n1);
                }
                if p.resonance_basis.is_some() {
                    bail!("problem.resonance_basis only applies to problem.omega_float");
                }
            }
            (None, Some(v)) => {
                if v.len() != p.n1 {
                    bail!(
                        "problem.omega_float has {} entries, problem.n1 = {}",
                        v.len(),
                        p.n1
                    );
                }
                if p.resonance_basis.is_none() {
                    bail!("problem.omega_float requires problem.resonance_basis (may be empty)");
                }
            }
            (Some(_), Some(_)) => {
                bail!("problem.omega and problem.omega_float are mutually exclusive")
            }
            (None, None) => bail!("one of problem.omega or problem.omega_float is required"),
        }
        if !(p.epsilon >= 0.0 && p.epsilon.is_finite()) {
            bail!("problem.epsilon must be finite and non-negative");
        }
        if !(p.mu >= 0.0 && p.mu.is_finite()) {
            bail!("problem.mu must be finite and non-negative");
        }
        for (name, terms) in [("f0", &p.f0), ("h1", &p.h1)] {
            for (i, t) in terms.iter().enumerate() {
                t.validate(p.n1, p.n2)
                    .with_context(|| format!("problem.{name} term {}", i + 1))?;
            }
        }
        let d = &self.domain;
        for (name, v) in [("rho", d.rho), ("sigma", d.sigma), ("R", d.r_cart)] {
            if !(v > 0.0 && v.is_finite()) {
                bail!("domain.{name} must be positive and finite");
            }
        }
        let a = &self.algorithm;
        if a.k_split == 0 {
            bail!("algorithm.K must be at least 1");
        }
        if a.depth == 0 {
            bail!("algorithm.L must be at least 1");
        }
        if a.r == 0 {
            bail!("algorithm.r must be at least 1");
        }
        if !(a.d > 0.0 && a.d < 0.5) {
            bail!("algorithm.d must lie in (0, 1/2)");
        }
        if a.small_divisor_floor < 0.0 || !a.small_divisor_floor.is_finite() {
            bail!("algorithm.small_divisor_floor must be finite and non-negative");
        }
        if a.term_budget == 0 {
            bail!("algorithm.term_budget must be positive");
        }
        if let Some(c) = &a.certificate {
            if c != "nonresonant" {
                bail!("algorithm.certificate must be \"nonresonant\" when present");
            }
        }
        let v = &self.verify;
        if v.points == 0 {
            bail!("verify.points must be at least 1");
        }
        if !(v.t_span > 0.0 && v.t_span.is_finite()) {
            bail!("verify.t_span must be positive and finite");
        }
        if !(v.dt > 0.0 && v.dt.is_finite()) {
            bail!("verify.dt must be positive and finite");
        }
        if let Some(l) = &v.lambda {
            if l.len() != p.n1 {
                bail!("verify.lambda has {} entries, problem.n1 = {}", l.len(), p.n1);
            }
        }
        if !(v.fraction > 0.0 && v.fraction <= 1.0) {
            bail!("verify.fraction must lie in (0, 1]");
        }
        Ok(())
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.problem.n1, self.problem.n2)
    }

    pub fn frequency(&self) -> Result<FrequencyVector> {
        let p = &self.problem;
        if let Some(strings) = &p.omega {
            let entries: Result<Vec<BigRational>> = strings
                .iter()
                .map(|s| {
                    BigRational::from_str(s.trim())
                        .map_err(|e| anyhow!("problem.omega entry {s:?}: {e}"))
                })
                .collect();
            Ok(FrequencyVector::rational(entries?, p.gamma, p.tau)?)
        } else {
            let omega = p.omega_float.clone().expect("validated");
            let basis = p.resonance_basis.clone().expect("validated");
            Ok(FrequencyVector::float_with_basis(
                omega, basis, p.zero_tol, p.gamma, p.tau,
            )?)
        }
    }

    pub fn hamiltonian(&self) -> Result<Hamiltonian> {
        let dims = self.dims();
        Ok(Hamiltonian {
            dims,
            freq: self.frequency()?,
            f0: build_series(dims, &self.problem.f0)?,
            mu: self.problem.mu,
            h1: build_series(dims, &self.problem.h1)?,
            epsilon: self.problem.epsilon,
        })
    }

    pub fn module(&self) -> Result<ResonanceModule> {
        Ok(resonance_module(&self.frequency()?)?)
    }

    pub fn domain_params(&self) -> Result<DomainParams> {
        Ok(DomainParams::new(
            self.domain.rho,
            self.domain.sigma,
            self.domain.r_cart,
        )?)
    }

    pub fn engine_params(&self) -> EngineParams {
        let a = &self.algorithm;
        let mut params = EngineParams::new(a.k_split, a.depth, a.r);
        params.k_prime = a.k_prime;
        params.d = a.d;
        params.tail_buffer = a.buffer;
        params.small_divisor_floor = a.small_divisor_floor;
        params.term_budget = a.term_budget;
        params
    }

    /// `lambda` with its default filled in.
    pub fn lambda(&self) -> Vec<f64> {
        self.verify.lambda.clone().unwrap_or_else(|| {
            let mut l = vec![0.0; self.problem.n1];
            l[0] = 1.0;
            l
        })
    }
}

impl TermSpec {
    fn validate(&self, n1: usize, n2: usize) -> Result<()> {
        if !self.coeff.is_finite() || !self.coeff_im.is_finite() {
            bail!("coefficient must be finite");
        }
        if self.cosine && self.sine {
            bail!("cosine and sine are mutually exclusive");
        }
        if (self.cosine || self.sine) && self.coeff_im != 0.0 {
            bail!("cosine/sine terms take a real coefficient");
        }
        if !self.k.is_empty() && self.k.len() != n1 {
            bail!("k has {} entries, expected {}", self.k.len(), n1);
        }
        if !self.p.is_empty() && self.p.len() != n1 {
            bail!("p has {} entries, expected {}", self.p.len(), n1);
        }
        if !self.z.is_empty() && self.z.len() != n2 {
            bail!("z has {} entries, expected {}", self.z.len(), n2);
        }
        if !self.w.is_empty() && self.w.len() != n2 {
            bail!("w has {} entries, expected {}", self.w.len(), n2);
        }
        Ok(())
    }

    fn padded(v: &[u32], n: usize) -> Vec<u32> {
        if v.is_empty() {
            vec![0; n]
        } else {
            v.to_vec()
        }
    }
}

fn build_series(dims: Dims, terms: &[TermSpec]) -> Result<Series> {
    let mut out = Series::zero(dims);
    for t in terms {
        let k = if t.k.is_empty() {
            vec![0; dims.n1]
        } else {
            t.k.clone()
        };
        let mp = TermSpec::padded(&t.p, dims.n1);
        let mz = TermSpec::padded(&t.z, dims.n2);
        let mw = TermSpec::padded(&t.w, dims.n2);
        if t.cosine || t.sine {
            let neg: Vec<i32> = k.iter().map(|v| -v).collect();
            let half = 0.5 * t.coeff;
            let (c_pos, c_neg) = if t.cosine {
                (Complex64::new(half, 0.0), Complex64::new(half, 0.0))
            } else {
                (Complex64::new(0.0, -half), Complex64::new(0.0, half))
            };
            out.insert_add(TermKey::new(k, mp.clone(), mz.clone(), mw.clone()), c_pos);
            out.insert_add(TermKey::new(neg, mp, mz, mw), c_neg);
        } else {
            out.insert_add(
                TermKey::new(k, mp, mz, mw),
                Complex64::new(t.coeff, t.coeff_im),
            );
        }
    }
    Ok(out)
}
