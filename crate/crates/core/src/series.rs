//! Sparse Poisson series: trigonometric polynomials in the angles with
//! polynomial coefficients in the actions and the Cartesian pair.
//!
//! A term is `c * e^{i k.q} * p^mp * z^mz * w^mw` where `w` stands for the
//! complexified partner of `z` (the combination `i zbar` on the real slice),
//! `k` ranges over `Z^n1`, and the exponents are non-negative. Series are
//! canonical maps from term keys to complex coefficients: no explicit zero
//! coefficients are stored, and iteration order is the lexicographic key
//! order, so equal series have equal representations and all reductions are
//! reproducible.
//!
//! The Poisson bracket uses the pairing `{q_j, p_j} = 1`, `{w_j, z_j} = 1`:
//!
//! `{g, g'} = sum_j (dg/dq_j dg'/dp_j - dg/dp_j dg'/dq_j)
//!          + sum_j (dg/dw_j dg'/dz_j - dg/dz_j dg'/dw_j)`
//!
//! so that `{p_1, e^{i q_1}} = -i e^{i q_1}` and `{z_1, w_1} = -1`.
//!
//! Coefficients are `Complex<T>` for any field `T` implementing [`Coeff`];
//! `f64` is the working choice, `BigRational` the exact mode used by
//! correctness tests.

use std::collections::BTreeMap;
use std::fmt;

use num::complex::Complex;
use num::rational::BigRational;
use num::traits::{FromPrimitive, Num, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::resonance::ResonanceModule;

/// Scalar fields usable as coefficient components.
pub trait Coeff:
    Clone + PartialEq + fmt::Debug + Num + std::ops::Neg<Output = Self> + FromPrimitive + ToPrimitive
{
}

impl<T> Coeff for T where
    T: Clone
        + PartialEq
        + fmt::Debug
        + Num
        + std::ops::Neg<Output = T>
        + FromPrimitive
        + ToPrimitive
{
}

/// Number of angle/action pairs (`n1`) and Cartesian pairs (`n2`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n1: usize,
    pub n2: usize,
}

impl Dims {
    pub fn new(n1: usize, n2: usize) -> Self {
        Dims { n1, n2 }
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(n1 = {}, n2 = {})", self.n1, self.n2)
    }
}

/// Exponent data of one term. Lexicographic order on `(k, mp, mz, mw)` is
/// the canonical term order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TermKey {
    pub k: Vec<i32>,
    pub mp: Vec<u32>,
    pub mz: Vec<u32>,
    pub mw: Vec<u32>,
}

impl TermKey {
    pub fn new(k: Vec<i32>, mp: Vec<u32>, mz: Vec<u32>, mw: Vec<u32>) -> Self {
        TermKey { k, mp, mz, mw }
    }

    /// Purely trigonometric key, no polynomial part.
    pub fn harmonic(k: Vec<i32>, n2: usize) -> Self {
        let n1 = k.len();
        TermKey {
            k,
            mp: vec![0; n1],
            mz: vec![0; n2],
            mw: vec![0; n2],
        }
    }

    pub fn trig_degree(&self) -> u32 {
        self.k.iter().map(|v| v.unsigned_abs()).sum()
    }

    pub fn taylor_degree(&self) -> u32 {
        self.mp.iter().sum::<u32>() + self.mz.iter().sum::<u32>() + self.mw.iter().sum::<u32>()
    }

    fn matches(&self, dims: Dims) -> bool {
        self.k.len() == dims.n1
            && self.mp.len() == dims.n1
            && self.mz.len() == dims.n2
            && self.mw.len() == dims.n2
    }

    fn checked_product(&self, other: &TermKey) -> Result<TermKey> {
        let overflow = || Error::invalid("exponent overflow in series product");
        let mut k = Vec::with_capacity(self.k.len());
        for (a, b) in self.k.iter().zip(&other.k) {
            k.push(a.checked_add(*b).ok_or_else(overflow)?);
        }
        let addu = |x: &[u32], y: &[u32]| -> Result<Vec<u32>> {
            x.iter()
                .zip(y)
                .map(|(a, b)| a.checked_add(*b).ok_or_else(overflow))
                .collect()
        };
        Ok(TermKey {
            k,
            mp: addu(&self.mp, &other.mp)?,
            mz: addu(&self.mz, &other.mz)?,
            mw: addu(&self.mw, &other.mw)?,
        })
    }
}

/// Class of trigonometric support: every stored harmonic `k` decomposes as
/// `k' + k''` with `k'` in the resonance module, `|k''| <= k1`, and
/// `|k| <= k2` (l1 norms).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassTag {
    pub k1: u32,
    pub k2: u32,
}

/// What `truncate` removed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct TruncationLoss {
    pub dropped_terms: usize,
    /// Sum of coefficient magnitudes of the dropped terms.
    pub dropped_mass: f64,
}

/// A sparse Poisson series over the coefficient field `Complex<T>`.
#[derive(Clone, Debug)]
pub struct PoissonSeries<T: Coeff> {
    dims: Dims,
    terms: BTreeMap<TermKey, Complex<T>>,
    trig_bound: Option<u32>,
    taylor_bound: Option<u32>,
}

/// Working alias: double-precision coefficients.
pub type Series = PoissonSeries<f64>;
/// Exact mode for small correctness tests.
pub type RationalSeries = PoissonSeries<BigRational>;

fn is_zero_c<T: Coeff>(c: &Complex<T>) -> bool {
    c.re.is_zero() && c.im.is_zero()
}

fn mul_i<T: Coeff>(c: &Complex<T>) -> Complex<T> {
    Complex::new(-c.im.clone(), c.re.clone())
}

fn scale_u32<T: Coeff>(c: &Complex<T>, n: u32) -> Complex<T> {
    let f = T::from_u32(n).expect("small integer embeds in coefficient field");
    Complex::new(c.re.clone() * f.clone(), c.im.clone() * f)
}

/// `|c|` as an f64, independent of the coefficient field.
pub fn magnitude<T: Coeff>(c: &Complex<T>) -> f64 {
    let re = c.re.to_f64().unwrap_or(f64::NAN);
    let im = c.im.to_f64().unwrap_or(f64::NAN);
    re.hypot(im)
}

impl<T: Coeff> PartialEq for PoissonSeries<T> {
    /// Structural equality of dimensions and canonical term maps; the cached
    /// degree bounds are diagnostics and do not participate.
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims && self.terms == other.terms
    }
}

impl<T: Coeff> PoissonSeries<T> {
    pub fn zero(dims: Dims) -> Self {
        PoissonSeries {
            dims,
            terms: BTreeMap::new(),
            trig_bound: None,
            taylor_bound: None,
        }
    }

    pub fn from_terms(
        dims: Dims,
        terms: impl IntoIterator<Item = (Complex<T>, TermKey)>,
    ) -> Result<Self> {
        let mut s = Self::zero(dims);
        for (c, key) in terms {
            if !key.matches(dims) {
                return Err(Error::dims(format!(
                    "term key {key:?} does not match dimensions {dims}"
                )));
            }
            s.insert_add(key, c);
        }
        Ok(s)
    }

    /// Single-term convenience constructor.
    pub fn monomial(dims: Dims, c: Complex<T>, key: TermKey) -> Result<Self> {
        Self::from_terms(dims, [(c, key)])
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn n1(&self) -> usize {
        self.dims.n1
    }

    pub fn n2(&self) -> usize {
        self.dims.n2
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&TermKey, &Complex<T>)> {
        self.terms.iter()
    }

    pub fn get(&self, key: &TermKey) -> Option<&Complex<T>> {
        self.terms.get(key)
    }

    /// Add `c` to the coefficient at `key`, keeping the map canonical.
    pub fn insert_add(&mut self, key: TermKey, c: Complex<T>) {
        debug_assert!(key.matches(self.dims));
        if is_zero_c(&c) {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(key) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                let sum = Complex::new(
                    e.get().re.clone() + c.re,
                    e.get().im.clone() + c.im,
                );
                if is_zero_c(&sum) {
                    e.remove();
                } else {
                    e.insert(sum);
                }
            }
        }
    }

    fn check_dims(&self, other: &Self) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::dims(format!(
                "cannot combine series with dimensions {} and {}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.add_assign(other)?;
        Ok(out)
    }

    /// In-place `self += other`; the workhorse behind every accumulation.
    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.check_dims(other)?;
        for (key, c) in &other.terms {
            self.insert_add(key.clone(), c.clone());
        }
        self.trig_bound = join_bounds_max(self.trig_bound, other.trig_bound);
        self.taylor_bound = join_bounds_max(self.taylor_bound, other.taylor_bound);
        Ok(())
    }

    /// In-place `self += factor * other`.
    pub fn add_scaled_assign(&mut self, factor: &Complex<T>, other: &Self) -> Result<()> {
        self.check_dims(other)?;
        if is_zero_c(factor) {
            return Ok(());
        }
        for (key, c) in &other.terms {
            self.insert_add(key.clone(), c * factor);
        }
        self.trig_bound = join_bounds_max(self.trig_bound, other.trig_bound);
        self.taylor_bound = join_bounds_max(self.taylor_bound, other.taylor_bound);
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        self.map_coeffs(|c| Complex::new(-c.re.clone(), -c.im.clone()))
    }

    pub fn scale(&self, factor: &Complex<T>) -> Self {
        if is_zero_c(factor) {
            return Self::zero(self.dims);
        }
        self.map_coeffs(|c| c * factor)
    }

    pub fn scale_re(&self, factor: &T) -> Self {
        self.scale(&Complex::new(factor.clone(), T::zero()))
    }

    fn map_coeffs(&self, f: impl Fn(&Complex<T>) -> Complex<T>) -> Self {
        let mut out = Self::zero(self.dims);
        out.trig_bound = self.trig_bound;
        out.taylor_bound = self.taylor_bound;
        for (key, c) in &self.terms {
            let v = f(c);
            if !is_zero_c(&v) {
                out.terms.insert(key.clone(), v);
            }
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_dims(other)?;
        let mut out = Self::zero(self.dims);
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                let key = ka.checked_product(kb)?;
                out.insert_add(key, ca * cb);
            }
        }
        out.trig_bound = join_bounds_sum(self.trig_bound, other.trig_bound);
        out.taylor_bound = join_bounds_sum(self.taylor_bound, other.taylor_bound);
        Ok(out)
    }

    /// d/dp_j
    pub fn dp(&self, j: usize) -> Self {
        assert!(j < self.dims.n1, "action index out of range");
        self.derive(
            |key| key.mp[j] > 0,
            |key| {
                let mut k = key.clone();
                k.mp[j] -= 1;
                (k, key.mp[j])
            },
        )
    }

    /// d/dq_j (multiplies by `i k_j`)
    pub fn dq(&self, j: usize) -> Self {
        assert!(j < self.dims.n1, "angle index out of range");
        let mut out = Self::zero(self.dims);
        out.trig_bound = self.trig_bound;
        out.taylor_bound = self.taylor_bound;
        for (key, c) in &self.terms {
            let kj = key.k[j];
            if kj == 0 {
                continue;
            }
            let f = T::from_i32(kj).expect("small integer embeds in coefficient field");
            let scaled = Complex::new(c.re.clone() * f.clone(), c.im.clone() * f);
            out.terms.insert(key.clone(), mul_i(&scaled));
        }
        out
    }

    /// d/dz_j
    pub fn dz(&self, j: usize) -> Self {
        assert!(j < self.dims.n2, "cartesian index out of range");
        self.derive(
            |key| key.mz[j] > 0,
            |key| {
                let mut k = key.clone();
                k.mz[j] -= 1;
                (k, key.mz[j])
            },
        )
    }

    /// d/dw_j
    pub fn dw(&self, j: usize) -> Self {
        assert!(j < self.dims.n2, "cartesian index out of range");
        self.derive(
            |key| key.mw[j] > 0,
            |key| {
                let mut k = key.clone();
                k.mw[j] -= 1;
                (k, key.mw[j])
            },
        )
    }

    fn derive(
        &self,
        keep: impl Fn(&TermKey) -> bool,
        step: impl Fn(&TermKey) -> (TermKey, u32),
    ) -> Self {
        let mut out = Self::zero(self.dims);
        out.trig_bound = self.trig_bound;
        out.taylor_bound = self.taylor_bound;
        for (key, c) in &self.terms {
            if !keep(key) {
                continue;
            }
            let (new_key, exp) = step(key);
            out.insert_add(new_key, scale_u32(c, exp));
        }
        out
    }

    /// Largest coefficient magnitude; zero for the empty series.
    pub fn linf(&self) -> f64 {
        self.terms
            .values()
            .map(magnitude)
            .fold(0.0, f64::max)
    }

    /// Sum of coefficient magnitudes.
    pub fn coeff_mass(&self) -> f64 {
        self.terms.values().map(magnitude).sum()
    }

    pub fn max_trig_degree(&self) -> u32 {
        self.terms.keys().map(|k| k.trig_degree()).max().unwrap_or(0)
    }

    pub fn max_taylor_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|k| k.taylor_degree())
            .max()
            .unwrap_or(0)
    }

    pub fn trig_bound(&self) -> Option<u32> {
        self.trig_bound
    }

    pub fn taylor_bound(&self) -> Option<u32> {
        self.taylor_bound
    }

    /// Declare degree bounds; they must dominate the actual degrees.
    pub fn with_declared_bounds(mut self, trig: Option<u32>, taylor: Option<u32>) -> Result<Self> {
        if let Some(b) = trig {
            if b < self.max_trig_degree() {
                return Err(Error::invalid(format!(
                    "declared trigonometric bound {b} below actual degree {}",
                    self.max_trig_degree()
                )));
            }
        }
        if let Some(b) = taylor {
            if b < self.max_taylor_degree() {
                return Err(Error::invalid(format!(
                    "declared polynomial bound {b} below actual degree {}",
                    self.max_taylor_degree()
                )));
            }
        }
        self.trig_bound = trig;
        self.taylor_bound = taylor;
        Ok(self)
    }

    /// Split into shells by trigonometric degree: shell `s` (1-based) holds
    /// the harmonics with `(s-1) K <= |k|_1 < s K`. The returned vector ends
    /// at the last non-empty shell; interior empty shells are kept so that
    /// indices line up.
    pub fn fourier_split(&self, k_split: u32) -> Result<Vec<Self>> {
        if k_split == 0 {
            return Err(Error::invalid("fourier_split needs K >= 1"));
        }
        let mut shells: Vec<Self> = Vec::new();
        for (key, c) in &self.terms {
            let idx = (key.trig_degree() / k_split) as usize;
            while shells.len() <= idx {
                shells.push(Self::zero(self.dims));
            }
            shells[idx].terms.insert(key.clone(), c.clone());
        }
        for shell in shells.iter_mut() {
            shell.trig_bound = Some(shell.max_trig_degree());
            shell.taylor_bound = Some(shell.max_taylor_degree());
        }
        Ok(shells)
    }

    /// Drop terms above the given degree caps, reporting what was removed.
    pub fn truncate(&self, trig: Option<u32>, taylor: Option<u32>) -> (Self, TruncationLoss) {
        let mut out = Self::zero(self.dims);
        let mut loss = TruncationLoss::default();
        for (key, c) in &self.terms {
            let keep = trig.map_or(true, |b| key.trig_degree() <= b)
                && taylor.map_or(true, |b| key.taylor_degree() <= b);
            if keep {
                out.terms.insert(key.clone(), c.clone());
            } else {
                loss.dropped_terms += 1;
                loss.dropped_mass += magnitude(c);
            }
        }
        out.trig_bound = meet_bounds(self.trig_bound, trig);
        out.taylor_bound = meet_bounds(self.taylor_bound, taylor);
        (out, loss)
    }

    /// Smallest class `P_{k1,k2}` containing the trigonometric support,
    /// relative to the given resonance module.
    pub fn class_of(&self, module: &ResonanceModule) -> Result<ClassTag> {
        if module.dim() != self.dims.n1 {
            return Err(Error::dims(
                "resonance module dimension does not match series",
            ));
        }
        let mut k1: u64 = 0;
        let mut k2: u32 = 0;
        let mut last_k: Option<&[i32]> = None;
        for key in self.terms.keys() {
            // keys are sorted with k leading, so repeated harmonics are adjacent
            if last_k == Some(key.k.as_slice()) {
                continue;
            }
            last_k = Some(key.k.as_slice());
            k2 = k2.max(key.trig_degree());
            k1 = k1.max(module.l1_distance(&key.k)?);
        }
        Ok(ClassTag {
            k1: u32::try_from(k1).map_err(|_| Error::invalid("class bound overflows u32"))?,
            k2,
        })
    }
}

impl RationalSeries {
    /// Exact coefficients rounded into the working field.
    pub fn to_f64(&self) -> Series {
        let mut out = Series::zero(self.dims);
        out.trig_bound = self.trig_bound;
        out.taylor_bound = self.taylor_bound;
        for (key, c) in &self.terms {
            let v = Complex::new(
                c.re.to_f64().unwrap_or(f64::NAN),
                c.im.to_f64().unwrap_or(f64::NAN),
            );
            if !is_zero_c(&v) {
                out.terms.insert(key.clone(), v);
            }
        }
        out
    }
}

fn join_bounds_max(a: Option<u32>, b: Option<u32>) -> Option<u32> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        _ => None,
    }
}

fn join_bounds_sum(a: Option<u32>, b: Option<u32>) -> Option<u32> {
    match (a, b) {
        (Some(x), Some(y)) => x.checked_add(y),
        _ => None,
    }
}

fn meet_bounds(existing: Option<u32>, cap: Option<u32>) -> Option<u32> {
    match (existing, cap) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (None, Some(y)) => Some(y),
        (x, None) => x,
    }
}

/// Accumulate `sign * x * y` into `acc` without materialising the product.
fn mul_into<T: Coeff>(
    x: &PoissonSeries<T>,
    y: &PoissonSeries<T>,
    negate: bool,
    acc: &mut PoissonSeries<T>,
) -> Result<()> {
    for (ka, ca) in &x.terms {
        for (kb, cb) in &y.terms {
            let key = ka.checked_product(kb)?;
            let prod = ca * cb;
            acc.insert_add(
                key,
                if negate {
                    Complex::new(-prod.re, -prod.im)
                } else {
                    prod
                },
            );
        }
    }
    Ok(())
}

/// Poisson bracket `{a, b}` in the convention of this crate.
pub fn poisson_bracket<T: Coeff>(
    a: &PoissonSeries<T>,
    b: &PoissonSeries<T>,
) -> Result<PoissonSeries<T>> {
    if a.dims() != b.dims() {
        return Err(Error::dims(format!(
            "cannot bracket series with dimensions {} and {}",
            a.dims(),
            b.dims()
        )));
    }
    let dims = a.dims();
    let mut acc = PoissonSeries::zero(dims);
    for j in 0..dims.n1 {
        mul_into(&a.dq(j), &b.dp(j), false, &mut acc)?;
        mul_into(&a.dp(j), &b.dq(j), true, &mut acc)?;
    }
    for j in 0..dims.n2 {
        mul_into(&a.dw(j), &b.dz(j), false, &mut acc)?;
        mul_into(&a.dz(j), &b.dw(j), true, &mut acc)?;
    }
    acc.trig_bound = join_bounds_sum(a.trig_bound, b.trig_bound);
    acc.taylor_bound = join_bounds_sum(a.taylor_bound, b.taylor_bound);
    Ok(acc)
}

/// Lie derivative along `x`: `L_x g = {x, g}`.
pub fn lie_derivative<T: Coeff>(
    x: &PoissonSeries<T>,
    g: &PoissonSeries<T>,
) -> Result<PoissonSeries<T>> {
    poisson_bracket(x, g)
}
