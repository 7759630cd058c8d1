//! The relegated normal-form construction.
//!
//! Input: `H = h0 + mu f0 + eps H1` with `h0 = omega . p`, where `f0` is
//! already in normal form (its harmonics lie in the resonance module of
//! `omega`) and `eps H1` is the perturbation. Classical normalisation would
//! use `h0 + mu f0` to solve the homological equations; here only the
//! linear flow of `h0` is inverted, and the effect of `f0` is relegated: at
//! every order `s` an inner chain of `L` corrections
//!
//! `Z_{s,0} - {h0, X_{s,0}} = Psi_s`
//! `Z_{s,j} - {h0, X_{s,j}} = {mu f0, X_{s,j-1}}`   for `j = 1..L`
//!
//! pushes the coupling with `f0` to ever higher order, leaving the single
//! leftover bracket `{mu f0, X_{s,L}}` for the next orders to absorb. The
//! outer recursion assembles each right-hand side `Psi_s` from the Fourier
//! shells of the perturbation and the lower-order generators, following the
//! Lie-series composition rule, so that the full generator sequence
//! `X_s = sum_j X_{s,j}` transforms the normal form `Z` back into `H` up to
//! a tail controlled by the estimate pipeline.
//!
//! Everything in this module is exact series algebra apart from the f64
//! coefficient arithmetic; the analytic content (norms, smallness
//! conditions, remainder bounds) lives in `estimates`.

use num::complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimates::EstimateInputs;
use crate::norms::{weighted_norm, DomainParams};
use crate::resonance::{resonance_module, FrequencyVector, ResonanceModule};
use crate::series::{lie_derivative, poisson_bracket, ClassTag, Dims, Series, TermKey};

/// A Hamiltonian in the three-part shape the algorithm consumes.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    pub dims: Dims,
    pub freq: FrequencyVector,
    /// The intermediate term; must be in normal form already.
    pub f0: Series,
    pub mu: f64,
    /// The perturbation, without its size factor.
    pub h1: Series,
    pub epsilon: f64,
}

impl Hamiltonian {
    /// `omega . p` as a series.
    pub fn h0_series(&self) -> Series {
        let mut terms = Vec::with_capacity(self.dims.n1);
        for j in 0..self.dims.n1 {
            let mut mp = vec![0u32; self.dims.n1];
            mp[j] = 1;
            let key = TermKey::new(
                vec![0; self.dims.n1],
                mp,
                vec![0; self.dims.n2],
                vec![0; self.dims.n2],
            );
            terms.push((Complex64::new(self.freq.omega_f64()[j], 0.0), key));
        }
        Series::from_terms(self.dims, terms).expect("h0 keys are well-formed")
    }

    /// The full Hamiltonian `h0 + mu f0 + eps H1`.
    pub fn total(&self) -> Series {
        self.h0_series()
            .add(&self.f0.scale_re(&self.mu))
            .and_then(|s| s.add(&self.h1.scale_re(&self.epsilon)))
            .expect("components share dimensions after validation")
    }
}

/// Tunable knobs of the construction.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EngineParams {
    /// Fourier shell width `K`.
    pub k_split: u32,
    /// Relegation depth `L >= 1`.
    pub depth: u32,
    /// Normalisation order `r >= 1`.
    pub order: u32,
    /// Trigonometric degree bound `K'` of `f0`; `None` infers it.
    pub k_prime: Option<u32>,
    /// Per-step domain loss used when estimates are derived from these
    /// parameters.
    pub d: f64,
    /// Extra Lie orders summed when diagnosing the back-transform residual.
    pub tail_buffer: u32,
    /// Non-resonant divisors smaller than this abort the run.
    pub small_divisor_floor: f64,
    /// Cap on the total number of stored coefficients.
    pub term_budget: usize,
}

impl EngineParams {
    pub fn new(k_split: u32, depth: u32, order: u32) -> Self {
        EngineParams {
            k_split,
            depth,
            order,
            k_prime: None,
            d: 0.125,
            tail_buffer: 2,
            small_divisor_floor: 1e-10,
            term_budget: 4_000_000,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k_split == 0 {
            return Err(Error::invalid("shell width K must be at least 1"));
        }
        if self.depth == 0 {
            return Err(Error::invalid("relegation depth L must be at least 1"));
        }
        if self.order == 0 {
            return Err(Error::invalid("normalisation order r must be at least 1"));
        }
        if !(self.d > 0.0 && self.d < 0.5) {
            return Err(Error::invalid(format!(
                "per-step loss d must lie in (0, 1/2), got {}",
                self.d
            )));
        }
        if self.small_divisor_floor < 0.0 || !self.small_divisor_floor.is_finite() {
            return Err(Error::invalid("small-divisor floor must be finite and >= 0"));
        }
        if self.term_budget == 0 {
            return Err(Error::invalid("term budget must be positive"));
        }
        Ok(())
    }
}

/// Composition of the time-one flows of a generator sequence `X_1, X_2, ...`
/// in graded Lie-series form: `T_X f = sum_j E_j f` with
///
/// `E_0 f = f`,  `E_j f = sum_{i=1}^{j} (i/j) L_{X_i} E_{j-i} f`.
#[derive(Clone, Debug)]
pub struct LieTransform {
    gens: Vec<Series>,
}

impl LieTransform {
    pub fn new(gens: Vec<Series>) -> Self {
        LieTransform { gens }
    }

    pub fn generators(&self) -> &[Series] {
        &self.gens
    }

    /// The ladder `[E_0 f, ..., E_n f]`.
    pub fn expand(&self, f: &Series, n: u32) -> Result<Vec<Series>> {
        let mut ladder = vec![f.clone()];
        for j in 1..=n as usize {
            let mut acc = Series::zero(f.dims());
            for i in 1..=j.min(self.gens.len()) {
                let term = lie_derivative(&self.gens[i - 1], &ladder[j - i])?;
                acc.add_scaled_assign(&Complex64::new(i as f64 / j as f64, 0.0), &term)?;
            }
            ladder.push(acc);
        }
        Ok(ladder)
    }

    /// `sum_{j=0}^{n} E_j f`, the transform truncated at order `n`.
    pub fn apply(&self, f: &Series, n: u32) -> Result<Series> {
        let mut total = Series::zero(f.dims());
        for term in self.expand(f, n)? {
            total.add_assign(&term)?;
        }
        Ok(total)
    }

    /// The ladder `[D_0 f, ..., D_n f]` of the inverse transform,
    ///
    /// `D_0 f = f`,  `D_j f = -sum_{i=1}^{j} (i/j) D_{j-i}(L_{X_i} f)`.
    ///
    /// The recursion re-derives subtrees instead of memoising (the operator
    /// argument changes at every level), so cost grows exponentially with
    /// `n`; it is meant for low-order diagnostics.
    pub fn expand_inverse(&self, f: &Series, n: u32) -> Result<Vec<Series>> {
        (0..=n).map(|j| self.d_op(j, f)).collect()
    }

    pub fn apply_inverse(&self, f: &Series, n: u32) -> Result<Series> {
        let mut total = Series::zero(f.dims());
        for term in self.expand_inverse(f, n)? {
            total.add_assign(&term)?;
        }
        Ok(total)
    }

    fn d_op(&self, j: u32, f: &Series) -> Result<Series> {
        if j == 0 {
            return Ok(f.clone());
        }
        let mut acc = Series::zero(f.dims());
        for i in 1..=(j as usize).min(self.gens.len()) {
            let bracket = lie_derivative(&self.gens[i - 1], f)?;
            let sub = self.d_op(j - i as u32, &bracket)?;
            acc.add_scaled_assign(&Complex64::new(-(i as f64 / j as f64), 0.0), &sub)?;
        }
        Ok(acc)
    }
}

/// Output of the construction.
#[derive(Clone, Debug)]
pub struct NormalFormResult {
    pub dims: Dims,
    pub module: ResonanceModule,
    /// `h0 + mu f0`, the order-zero normal form.
    pub z0: Series,
    /// Normal-form corrections `Z_s`, `s = 1..=r` (index `s-1`). Their
    /// harmonics lie in the resonance module.
    pub z_terms: Vec<Series>,
    /// Full generators `X_s = sum_j X_{s,j}`.
    pub x_full: Vec<Series>,
    /// Inner chain parts `X_{s,j}`, `j = 0..=L`.
    pub x_parts: Vec<Vec<Series>>,
    /// Assembled right-hand sides `Psi_s`.
    pub psi: Vec<Series>,
    /// Relegation leftovers `{mu f0, X_{s,L}}`.
    pub leftovers: Vec<Series>,
    /// Fourier shells `h_s` of `eps H1` (all of them, also past `r`).
    pub shells: Vec<Series>,
    /// Per-order relative residual of the chain identity
    /// `Z_s - {h0, X_s} = Psi_s + sum_{j<L} {mu f0, X_{s,j}}`.
    pub chain_residuals: Vec<f64>,
    /// Trigonometric classes of `Psi_s` and of each `X_{s,j}`.
    pub psi_tags: Vec<ClassTag>,
    pub x_tags: Vec<Vec<ClassTag>>,
    /// Whether every class respected its predicted cap.
    pub tags_within_caps: bool,
    pub warnings: Vec<String>,
    /// Total stored coefficients across all recursion outputs.
    pub term_count: usize,
}

impl NormalFormResult {
    /// The normal form `Z = z0 + sum_s Z_s`.
    pub fn normal_form(&self) -> Series {
        let mut z = self.z0.clone();
        for t in &self.z_terms {
            z.add_assign(t).expect("normal-form parts share dimensions");
        }
        z
    }

    pub fn transform(&self) -> LieTransform {
        LieTransform::new(self.x_full.clone())
    }

    /// The input truncated at the normalisation order:
    /// `h0 + mu f0 + h_1 + ... + h_r`.
    pub fn truncated_hamiltonian(&self) -> Series {
        let mut h = self.z0.clone();
        for shell in self.shells.iter().take(self.z_terms.len()) {
            h.add_assign(shell).expect("shells share dimensions");
        }
        h
    }

    /// Defect of the defining identity of the scheme,
    /// `sum_{a+b <= r} E_a Z_b - (h0 + mu f0 + h_1 + ... + h_r)`,
    /// with `Z_0 = h0 + mu f0`. The truncation is triangular: order `b`
    /// content is expanded only through `E_{r-b}`, because pairs with
    /// `a + b > r` belong to the remainder tail, not to the identity. What
    /// survives is the relegated coupling, suppressed by `mu^{L+1}`, plus
    /// floating-point noise. This is the strongest internal check
    /// available: every `Psi_s` enters it.
    pub fn normalization_defect(&self) -> Result<Series> {
        let r = self.z_terms.len() as u32;
        let transform = self.transform();
        let mut total = transform.apply(&self.z0, r)?;
        for (i, z) in self.z_terms.iter().enumerate() {
            for term in transform.expand(z, r - (i as u32 + 1))? {
                total.add_assign(&term)?;
            }
        }
        total.sub(&self.truncated_hamiltonian())
    }

    /// Back-transform defect against the full input:
    /// `sum_{j <= r + buffer} E_j Z - H`. The normalised content cancels,
    /// leaving the dropped shells plus the leading Lie tail, so the norm of
    /// this series measures the actual remainder at the chosen truncation.
    pub fn transform_residual(&self, ham: &Hamiltonian, buffer: u32) -> Result<Series> {
        let orders = self.z_terms.len() as u32 + buffer;
        let transformed = self.transform().apply(&self.normal_form(), orders)?;
        transformed.sub(&ham.total())
    }
}

struct Budget {
    used: usize,
    cap: usize,
}

impl Budget {
    fn add(&mut self, series: &Series) -> Result<()> {
        self.used += series.len();
        if self.used > self.cap {
            return Err(Error::budget(format!(
                "term budget exhausted: {} coefficients stored, cap {}",
                self.used, self.cap
            )));
        }
        Ok(())
    }
}

/// Split a right-hand side along the resonance module: harmonics in the
/// module stay in the normal form, the rest are divided by `i k.omega` to
/// form a generator part.
fn homological_solve(
    rhs: &Series,
    freq: &FrequencyVector,
    module: &ResonanceModule,
    floor: f64,
) -> Result<(Series, Series)> {
    let mut z = Series::zero(rhs.dims());
    let mut x = Series::zero(rhs.dims());
    for (key, c) in rhs.terms() {
        if freq.is_resonant(&key.k, module) {
            z.insert_add(key.clone(), *c);
        } else {
            let dot = freq.dot_f64(&key.k);
            if dot.abs() < floor {
                return Err(Error::SmallDivisor {
                    k: key.k.clone(),
                    value: dot,
                    floor,
                });
            }
            // c / (i dot)
            x.insert_add(key.clone(), Complex64::new(c.im / dot, -c.re / dot));
        }
    }
    Ok((z, x))
}

struct OrderOutput {
    z: Series,
    x_parts: Vec<Series>,
    x_full: Series,
    leftover: Series,
    chain_residual: f64,
}

/// Run the inner relegation chain for one right-hand side.
fn relegation_chain(
    psi: &Series,
    mu_f0: &Series,
    freq: &FrequencyVector,
    module: &ResonanceModule,
    params: &EngineParams,
    budget: &mut Budget,
) -> Result<OrderOutput> {
    let mut z_total = Series::zero(psi.dims());
    let mut x_parts = Vec::with_capacity(params.depth as usize + 1);
    let mut rhs = psi.clone();
    for j in 0..=params.depth {
        let (z_j, x_j) = homological_solve(&rhs, freq, module, params.small_divisor_floor)?;
        budget.add(&z_j)?;
        budget.add(&x_j)?;
        z_total.add_assign(&z_j)?;
        if j < params.depth {
            rhs = poisson_bracket(mu_f0, &x_j)?;
        }
        x_parts.push(x_j);
    }
    let leftover = poisson_bracket(mu_f0, x_parts.last().expect("depth >= 1"))?;
    budget.add(&leftover)?;

    let mut x_full = Series::zero(psi.dims());
    for part in &x_parts {
        x_full.add_assign(part)?;
    }

    // Z_s - {h0, X_s} must reproduce Psi_s plus the absorbed brackets; the
    // defect is pure floating-point noise and a cheap sanity signal.
    let expected_rhs = {
        let mut expect = psi.clone();
        for (j, part) in x_parts.iter().enumerate() {
            if j < params.depth as usize {
                expect.add_assign(&poisson_bracket(mu_f0, part)?)?;
            }
        }
        expect
    };
    let h0 = h0_series_for(freq, psi.dims());
    let mut defect = z_total.clone();
    defect.add_scaled_assign(
        &Complex64::new(-1.0, 0.0),
        &poisson_bracket(&h0, &x_full)?,
    )?;
    defect.add_scaled_assign(&Complex64::new(-1.0, 0.0), &expected_rhs)?;
    let scale = expected_rhs.linf().max(1.0);
    Ok(OrderOutput {
        z: z_total,
        x_parts,
        x_full,
        leftover,
        chain_residual: defect.linf() / scale,
    })
}

fn h0_series_for(freq: &FrequencyVector, dims: Dims) -> Series {
    let mut terms = Vec::with_capacity(dims.n1);
    for j in 0..dims.n1 {
        let mut mp = vec![0u32; dims.n1];
        mp[j] = 1;
        terms.push((
            Complex64::new(freq.omega_f64()[j], 0.0),
            TermKey::new(vec![0; dims.n1], mp, vec![0; dims.n2], vec![0; dims.n2]),
        ));
    }
    Series::from_terms(dims, terms).expect("h0 keys are well-formed")
}

fn validate(ham: &Hamiltonian, params: &EngineParams, module: &ResonanceModule) -> Result<u32> {
    params.validate()?;
    if ham.dims.n1 == 0 {
        return Err(Error::invalid("at least one angle variable is required"));
    }
    if ham.freq.n1() != ham.dims.n1 {
        return Err(Error::dims(format!(
            "frequency vector has {} entries, Hamiltonian has n1 = {}",
            ham.freq.n1(),
            ham.dims.n1
        )));
    }
    for (name, s) in [("f0", &ham.f0), ("H1", &ham.h1)] {
        if s.dims() != ham.dims {
            return Err(Error::dims(format!(
                "{name} has dimensions {}, Hamiltonian declares {}",
                s.dims(),
                ham.dims
            )));
        }
    }
    for (name, v) in [("mu", ham.mu), ("epsilon", ham.epsilon)] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::invalid(format!(
                "{name} must be finite and non-negative, got {v}"
            )));
        }
    }
    for (key, _) in ham.f0.terms() {
        if !ham.freq.is_resonant(&key.k, module) {
            return Err(Error::invalid(format!(
                "f0 is not in normal form: harmonic {:?} lies outside the resonance module",
                key.k
            )));
        }
    }
    let f0_degree = ham.f0.max_trig_degree();
    let k_prime = match params.k_prime {
        Some(kp) if kp < f0_degree => {
            return Err(Error::invalid(format!(
                "declared K' = {kp} but f0 has trigonometric degree {f0_degree}"
            )));
        }
        Some(kp) => kp,
        None => f0_degree,
    };
    Ok(k_prime)
}

/// Assemble the order-`s` right-hand side from the shells and the already
/// computed data. `leftover[i]` holds `{mu f0, X_{i+1,L}}`.
fn assemble_psi(
    s: usize,
    dims: Dims,
    shells: &[Series],
    transform: &LieTransform,
    z_terms: &[Series],
    leftovers: &[Series],
) -> Result<Series> {
    let shell = |i: usize| -> Series {
        shells
            .get(i - 1)
            .cloned()
            .unwrap_or_else(|| Series::zero(dims))
    };
    let mut psi = shell(s);
    if s == 1 {
        return Ok(psi);
    }
    let gens = transform.generators();
    let sf = s as f64;
    for j in 1..s {
        let minus_w = Complex64::new(-(j as f64) / sf, 0.0);
        let plus_w = Complex64::new(j as f64 / sf, 0.0);
        let x_j = &gens[j - 1];
        // -(j/s) L_{X_j} h_{s-j}
        psi.add_scaled_assign(&minus_w, &lie_derivative(x_j, &shell(s - j))?)?;
        // -(j/s) E_{s-j} Z_j
        let e_ladder = transform.expand(&z_terms[j - 1], (s - j) as u32)?;
        psi.add_scaled_assign(&minus_w, &e_ladder[s - j])?;
        // +(j/s) L_{X_j}(leftover_{s-j} - leftover_{s-j-1})
        let mut step = leftovers[s - j - 1].clone();
        if s - j - 1 >= 1 {
            step.add_scaled_assign(&Complex64::new(-1.0, 0.0), &leftovers[s - j - 2])?;
        }
        psi.add_scaled_assign(&plus_w, &lie_derivative(x_j, &step)?)?;
    }
    // + leftover_{s-1}
    psi.add_assign(&leftovers[s - 2])?;
    Ok(psi)
}

/// Run the full construction.
pub fn relegate(ham: &Hamiltonian, params: &EngineParams) -> Result<NormalFormResult> {
    let module = resonance_module(&ham.freq)?;
    let k_prime = validate(ham, params, &module)?;

    let mut warnings = Vec::new();
    if !ham.f0.is_zero() && ham.mu > 0.0 && ham.epsilon >= ham.mu {
        warnings.push(format!(
            "relegation targets the regime mu > epsilon; got mu = {}, epsilon = {}",
            ham.mu, ham.epsilon
        ));
    }

    let mut budget = Budget {
        used: 0,
        cap: params.term_budget,
    };
    let h0 = ham.h0_series();
    let mu_f0 = ham.f0.scale_re(&ham.mu);
    let z0 = h0.add(&mu_f0)?;
    budget.add(&z0)?;

    let shells = ham.h1.scale_re(&ham.epsilon).fourier_split(params.k_split)?;
    for sh in &shells {
        budget.add(sh)?;
    }

    let r = params.order as usize;
    let mut z_terms: Vec<Series> = Vec::with_capacity(r);
    let mut x_full: Vec<Series> = Vec::with_capacity(r);
    let mut x_parts: Vec<Vec<Series>> = Vec::with_capacity(r);
    let mut psi_list: Vec<Series> = Vec::with_capacity(r);
    let mut leftovers: Vec<Series> = Vec::with_capacity(r);
    let mut chain_residuals: Vec<f64> = Vec::with_capacity(r);

    for s in 1..=r {
        let transform = LieTransform::new(x_full.clone());
        let psi = assemble_psi(s, ham.dims, &shells, &transform, &z_terms, &leftovers)?;
        budget.add(&psi)?;
        let out = relegation_chain(&psi, &mu_f0, &ham.freq, &module, params, &mut budget)?;
        psi_list.push(psi);
        z_terms.push(out.z);
        x_full.push(out.x_full);
        x_parts.push(out.x_parts);
        leftovers.push(out.leftover);
        chain_residuals.push(out.chain_residual);
    }

    // Class bookkeeping. The small-divisor ledger K1 is additive in the
    // order indices, so Psi_s and every chain part stay within s K of the
    // module; each relegation step can add K' of plain trigonometric
    // degree on top of the measured degree of Psi_s. The total degree of
    // Psi_s itself has no fixed multiple of s as a cap (the leftover
    // brackets compound), so it is recorded but not gated.
    let mut tags_within_caps = true;
    let mut psi_tags = Vec::with_capacity(r);
    let mut x_tags = Vec::with_capacity(r);
    for s in 1..=r {
        let tag = psi_list[s - 1].class_of(&module)?;
        let su = s as u32;
        if tag.k1 > su * params.k_split {
            tags_within_caps = false;
            warnings.push(format!(
                "Psi_{s} sits {} away from the module, cap is {}",
                tag.k1,
                su * params.k_split
            ));
        }
        let mut row = Vec::with_capacity(params.depth as usize + 1);
        for (j, part) in x_parts[s - 1].iter().enumerate() {
            let pt = part.class_of(&module)?;
            if pt.k1 > su * params.k_split || pt.k2 > tag.k2 + j as u32 * k_prime {
                tags_within_caps = false;
                warnings.push(format!(
                    "X_({s},{j}) class ({}, {}) exceeds its predicted cap ({}, {})",
                    pt.k1,
                    pt.k2,
                    su * params.k_split,
                    tag.k2 + j as u32 * k_prime
                ));
            }
            row.push(pt);
        }
        psi_tags.push(tag);
        x_tags.push(row);
    }

    Ok(NormalFormResult {
        dims: ham.dims,
        module,
        z0,
        z_terms,
        x_full,
        x_parts,
        psi: psi_list,
        leftovers,
        shells,
        chain_residuals,
        psi_tags,
        x_tags,
        tags_within_caps,
        warnings,
        term_count: budget.used,
    })
}

/// Measure the norm inputs of the estimate pipeline on a concrete
/// Hamiltonian: `|H1|` on the doubled angle strip and the norm bound for
/// `f0`, combined with the engine parameters.
pub fn measured_inputs(
    ham: &Hamiltonian,
    params: &EngineParams,
    domain: &DomainParams,
    alpha: f64,
) -> Result<EstimateInputs> {
    let doubled = DomainParams::new(domain.rho, 2.0 * domain.sigma, domain.r_cart)?;
    Ok(EstimateInputs {
        domain: *domain,
        n1: ham.dims.n1,
        epsilon: ham.epsilon,
        mu: ham.mu,
        h1_norm_2sigma: weighted_norm(&ham.h1, &doubled),
        f0_norm: weighted_norm(&ham.f0, domain),
        k_split: params.k_split,
        depth: params.depth,
        order: params.order,
        alpha,
        d: params.d,
    })
}
