//! Frequency vectors, resonance lattices, and small-divisor surveys.
//!
//! A frequency vector `omega` induces the resonance module
//! `M = { k in Z^n1 : k . omega = 0 }`, a saturated sublattice of `Z^n1`.
//! Everything downstream (which harmonics can be eliminated, how small the
//! divisors get) is a question about this lattice, so the exact arithmetic
//! lives here: kernel computation over the integers, lattice membership,
//! closest-point distances in the l1 metric, and exhaustive scans for the
//! minimal divisor `alpha_r` over a truncated harmonic ball.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};

/// Frequency entries: exact rationals, or floats with a declared resonance basis.
///
/// In float mode there is no way to decide `k . omega = 0` exactly, so the
/// caller must declare the resonance lattice up front; `zero_tol` is the
/// numerical slack used to sanity-check that declaration.
#[derive(Clone, Debug)]
pub enum FrequencyData {
    Rational(Vec<BigRational>),
    Float {
        omega: Vec<f64>,
        basis: Vec<Vec<i64>>,
        zero_tol: f64,
    },
}

/// A frequency vector together with its declared Diophantine pair `(gamma, tau)`.
#[derive(Clone, Debug)]
pub struct FrequencyVector {
    data: FrequencyData,
    pub gamma: f64,
    pub tau: f64,
}

impl FrequencyVector {
    pub fn rational(entries: Vec<BigRational>, gamma: f64, tau: f64) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("frequency vector must be non-empty"));
        }
        check_dioph_pair(gamma, tau)?;
        Ok(FrequencyVector {
            data: FrequencyData::Rational(entries),
            gamma,
            tau,
        })
    }

    /// Convenience constructor for integer frequencies.
    pub fn from_integers(entries: &[i64], gamma: f64, tau: f64) -> Result<Self> {
        Self::rational(
            entries
                .iter()
                .map(|&v| BigRational::from_integer(BigInt::from(v)))
                .collect(),
            gamma,
            tau,
        )
    }

    /// Float entries with a declared resonance basis.
    ///
    /// Each declared basis vector `k` must satisfy `|k . omega| < zero_tol`,
    /// and the basis must be linearly independent over the rationals.
    pub fn float_with_basis(
        omega: Vec<f64>,
        basis: Vec<Vec<i64>>,
        zero_tol: f64,
        gamma: f64,
        tau: f64,
    ) -> Result<Self> {
        if omega.is_empty() {
            return Err(Error::invalid("frequency vector must be non-empty"));
        }
        if !omega.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("frequency entries must be finite"));
        }
        if !(zero_tol.is_finite() && zero_tol >= 0.0) {
            return Err(Error::invalid("zero_tol must be finite and non-negative"));
        }
        check_dioph_pair(gamma, tau)?;
        let n = omega.len();
        for k in &basis {
            if k.len() != n {
                return Err(Error::dims(format!(
                    "resonance basis vector has length {}, expected {}",
                    k.len(),
                    n
                )));
            }
            let dot: f64 = k.iter().zip(&omega).map(|(&ki, &wi)| ki as f64 * wi).sum();
            if dot.abs() > zero_tol {
                return Err(Error::invalid(format!(
                    "declared resonance vector {:?} has |k.omega| = {:.3e} > zero_tol",
                    k,
                    dot.abs()
                )));
            }
        }
        let cols: Vec<Vec<BigInt>> = basis
            .iter()
            .map(|k| k.iter().map(|&v| BigInt::from(v)).collect())
            .collect();
        if ratlin::rank(&cols, n) != basis.len() {
            return Err(Error::invalid(
                "declared resonance basis is linearly dependent",
            ));
        }
        Ok(FrequencyVector {
            data: FrequencyData::Float {
                omega,
                basis,
                zero_tol,
            },
            gamma,
            tau,
        })
    }

    pub fn n1(&self) -> usize {
        match &self.data {
            FrequencyData::Rational(v) => v.len(),
            FrequencyData::Float { omega, .. } => omega.len(),
        }
    }

    pub fn is_rational(&self) -> bool {
        matches!(self.data, FrequencyData::Rational(_))
    }

    pub fn data(&self) -> &FrequencyData {
        &self.data
    }

    pub fn omega_f64(&self) -> Vec<f64> {
        match &self.data {
            FrequencyData::Rational(v) => v
                .iter()
                .map(|r| r.to_f64().unwrap_or(f64::NAN))
                .collect(),
            FrequencyData::Float { omega, .. } => omega.clone(),
        }
    }

    /// `k . omega` in floating point.
    pub fn dot_f64(&self, k: &[i32]) -> f64 {
        match &self.data {
            FrequencyData::Rational(v) => {
                // Exact dot first, one rounding at the end: keeps equal-value
                // candidates bit-identical regardless of summation order.
                let mut acc = BigRational::zero();
                for (ki, wi) in k.iter().zip(v) {
                    acc += wi * BigRational::from_integer(BigInt::from(*ki));
                }
                acc.to_f64().unwrap_or(f64::NAN)
            }
            FrequencyData::Float { omega, .. } => k
                .iter()
                .zip(omega)
                .map(|(&ki, &wi)| ki as f64 * wi)
                .sum(),
        }
    }

    /// Exact `k . omega`; `None` in float mode.
    pub fn dot_exact(&self, k: &[i32]) -> Option<BigRational> {
        match &self.data {
            FrequencyData::Rational(v) => {
                let mut acc = BigRational::zero();
                for (ki, wi) in k.iter().zip(v) {
                    acc += wi * BigRational::from_integer(BigInt::from(*ki));
                }
                Some(acc)
            }
            FrequencyData::Float { .. } => None,
        }
    }

    /// Resonance test: exact `k . omega = 0` for rational entries, declared
    /// lattice membership for float entries.
    pub fn is_resonant(&self, k: &[i32], module: &ResonanceModule) -> bool {
        match &self.data {
            FrequencyData::Rational(_) => self
                .dot_exact(k)
                .map(|d| d.is_zero())
                .unwrap_or(false),
            FrequencyData::Float { .. } => module.contains(k),
        }
    }
}

fn check_dioph_pair(gamma: f64, tau: f64) -> Result<()> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::invalid("gamma must be finite and non-negative"));
    }
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::invalid("tau must be finite and non-negative"));
    }
    Ok(())
}

/// The resonance module `M_omega` as an explicit integer lattice basis.
///
/// The basis is in canonical form: vectors are sign-normalised (first
/// non-zero entry positive) and sorted, so equal lattices compare equal.
/// An empty basis is the trivial module `{0}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResonanceModule {
    dim: usize,
    basis: Vec<Vec<i64>>,
}

impl ResonanceModule {
    pub fn trivial(dim: usize) -> Self {
        ResonanceModule { dim, basis: vec![] }
    }

    pub fn from_basis(dim: usize, basis: Vec<Vec<i64>>) -> Result<Self> {
        for v in &basis {
            if v.len() != dim {
                return Err(Error::dims(format!(
                    "basis vector length {} does not match dimension {}",
                    v.len(),
                    dim
                )));
            }
        }
        let cols: Vec<Vec<BigInt>> = basis
            .iter()
            .map(|k| k.iter().map(|&v| BigInt::from(v)).collect())
            .collect();
        if ratlin::rank(&cols, dim) != basis.len() {
            return Err(Error::invalid("resonance basis is linearly dependent"));
        }
        let mut basis = basis;
        canonicalise(&mut basis);
        Ok(ResonanceModule { dim, basis })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<i64>] {
        &self.basis
    }

    pub fn is_trivial(&self) -> bool {
        self.basis.is_empty()
    }

    /// Exact membership: is `k` an integer combination of the basis?
    pub fn contains(&self, k: &[i32]) -> bool {
        assert_eq!(k.len(), self.dim, "harmonic dimension mismatch");
        if self.basis.is_empty() {
            return k.iter().all(|&v| v == 0);
        }
        let cols: Vec<Vec<BigInt>> = self
            .basis
            .iter()
            .map(|b| b.iter().map(|&v| BigInt::from(v)).collect())
            .collect();
        let target: Vec<BigInt> = k.iter().map(|&v| BigInt::from(v)).collect();
        match ratlin::solve(&cols, &target, self.dim) {
            Some(sol) => sol.iter().all(|c| c.is_integer()),
            None => false,
        }
    }

    /// Exact l1 distance from `k` to the lattice (closest-point problem).
    ///
    /// Solved by exhaustive enumeration of coefficient vectors inside a box
    /// derived from the pseudo-inverse of the basis; intended for the small
    /// dimensions and degrees this library works at.
    pub fn l1_distance(&self, k: &[i32]) -> Result<u64> {
        assert_eq!(k.len(), self.dim, "harmonic dimension mismatch");
        let kl1: u64 = k.iter().map(|&v| v.unsigned_abs() as u64).sum();
        if self.basis.is_empty() || kl1 == 0 {
            return Ok(kl1);
        }
        let m = self.basis.len();
        // Any coefficient vector a beating a = 0 satisfies |Ba|_1 <= 2 |k|_1,
        // hence |a_i| <= max_j |pinv(B)_ij| * 2 |k|_1.
        let pinv = ratlin::pseudo_inverse(&self.int_cols(), self.dim).ok_or_else(|| {
            Error::invalid("resonance basis is singular in closest-point search")
        })?;
        let two_kl1 = BigRational::from_integer(BigInt::from(2u64 * kl1));
        let mut bounds = Vec::with_capacity(m);
        let mut combos: u128 = 1;
        for row in &pinv {
            let row_max = row
                .iter()
                .map(|x| x.abs())
                .max()
                .unwrap_or_else(BigRational::zero);
            let b = (row_max * &two_kl1).ceil().to_integer();
            let b = b.to_i64().ok_or_else(|| {
                Error::budget("closest-point coefficient bound overflows i64")
            })?;
            combos = combos.saturating_mul((2 * b as u128) + 1);
            bounds.push(b);
        }
        if combos > 20_000_000 {
            return Err(Error::budget(format!(
                "closest-point enumeration needs {combos} candidates"
            )));
        }
        let mut best = kl1;
        let mut coeff = vec![0i64; m];
        self.cvp_scan(k, &bounds, &mut coeff, 0, &mut best);
        Ok(best)
    }

    fn int_cols(&self) -> Vec<Vec<BigInt>> {
        self.basis
            .iter()
            .map(|b| b.iter().map(|&v| BigInt::from(v)).collect())
            .collect()
    }

    fn cvp_scan(&self, k: &[i32], bounds: &[i64], coeff: &mut Vec<i64>, depth: usize, best: &mut u64) {
        if depth == bounds.len() {
            let mut dist: u64 = 0;
            for (i, &ki) in k.iter().enumerate() {
                let mut v = ki as i64;
                for (a, b) in coeff.iter().zip(&self.basis) {
                    v -= a * b[i];
                }
                dist += v.unsigned_abs();
                if dist >= *best {
                    return;
                }
            }
            *best = dist;
            return;
        }
        let b = bounds[depth];
        for a in -b..=b {
            coeff[depth] = a;
            self.cvp_scan(k, bounds, coeff, depth + 1, best);
        }
        coeff[depth] = 0;
    }
}

fn canonicalise(basis: &mut [Vec<i64>]) {
    for v in basis.iter_mut() {
        if let Some(first) = v.iter().find(|&&x| x != 0) {
            if *first < 0 {
                for x in v.iter_mut() {
                    *x = -*x;
                }
            }
        }
    }
    basis.sort();
}

/// Compute the resonance module of a frequency vector.
///
/// Rational mode: the full integer kernel of `k -> k . omega`, obtained by
/// unimodular column reduction, so the result is saturated (membership is
/// equivalent to `k . omega = 0`). Float mode: the declared basis.
pub fn resonance_module(freq: &FrequencyVector) -> Result<ResonanceModule> {
    let n = freq.n1();
    match freq.data() {
        FrequencyData::Float { basis, .. } => ResonanceModule::from_basis(n, basis.clone()),
        FrequencyData::Rational(entries) => {
            // Clear denominators; the kernel is unchanged by scaling.
            let mut lcm = BigInt::one();
            for e in entries {
                lcm = num::integer::lcm(lcm, e.denom().clone());
            }
            let ints: Vec<BigInt> = entries
                .iter()
                .map(|e| e.numer() * (&lcm / e.denom()))
                .collect();
            let kernel = integer_kernel(&ints);
            let mut basis: Vec<Vec<i64>> = Vec::with_capacity(kernel.len());
            for col in kernel {
                let mut v = Vec::with_capacity(n);
                for x in col {
                    v.push(x.to_i64().ok_or_else(|| {
                        Error::budget("kernel basis entry overflows i64")
                    })?);
                }
                basis.push(v);
            }
            canonicalise(&mut basis);
            Ok(ResonanceModule { dim: n, basis })
        }
    }
}

/// Kernel of the linear form `x -> w . x` on `Z^n`, as a lattice basis.
///
/// Column reduction with 2x2 unimodular blocks built from extended gcds:
/// starting from the identity, pairs of columns are combined so that the
/// form vanishes on all but one of them. Determinant-one blocks guarantee
/// the surviving columns generate the full kernel, not a sublattice.
fn integer_kernel(w: &[BigInt]) -> Vec<Vec<BigInt>> {
    let n = w.len();
    let mut vals: Vec<BigInt> = w.to_vec();
    let mut cols: Vec<Vec<BigInt>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { BigInt::one() } else { BigInt::zero() })
                .collect()
        })
        .collect();
    let mut pivot: Option<usize> = None;
    for i in 0..n {
        if vals[i].is_zero() {
            continue;
        }
        match pivot {
            None => pivot = Some(i),
            Some(p) => {
                let (g, a, b) = extended_gcd(&vals[p], &vals[i]);
                let u = &vals[i] / &g;
                let v = &vals[p] / &g;
                let col_p = cols[p].clone();
                let col_i = cols[i].clone();
                for j in 0..n {
                    cols[p][j] = &a * &col_p[j] + &b * &col_i[j];
                    cols[i][j] = &v * &col_i[j] - &u * &col_p[j];
                }
                vals[p] = g;
                vals[i] = BigInt::zero();
            }
        }
    }
    (0..n)
        .filter(|&i| vals[i].is_zero() && Some(i) != pivot)
        .map(|i| cols[i].clone())
        .collect()
}

/// Extended gcd: returns `(g, a, b)` with `a x + b y = g > 0`.
fn extended_gcd(x: &BigInt, y: &BigInt) -> (BigInt, BigInt, BigInt) {
    let (mut r0, mut r1) = (x.clone(), y.clone());
    let (mut s0, mut s1) = (BigInt::one(), BigInt::zero());
    let (mut t0, mut t1) = (BigInt::zero(), BigInt::one());
    while !r1.is_zero() {
        let q = &r0 / &r1;
        let r = &r0 - &q * &r1;
        r0 = std::mem::replace(&mut r1, r);
        let s = &s0 - &q * &s1;
        s0 = std::mem::replace(&mut s1, s);
        let t = &t0 - &q * &t1;
        t0 = std::mem::replace(&mut t1, t);
    }
    if r0.is_negative() {
        (-r0, -s0, -t0)
    } else {
        (r0, s0, t0)
    }
}

/// Result of an `alpha_r` survey: the smallest non-resonant divisor in the
/// ball `0 < |k|_1 <= rk`.
#[derive(Clone, Debug, Serialize)]
pub struct AlphaReport {
    pub value: f64,
    pub argmin: Vec<i32>,
    pub rk: u32,
    pub scanned: u64,
}

/// Minimal divisor `alpha_r = min { |k . omega| : k non-resonant, 0 < |k|_1 <= rk }`.
///
/// Exhaustive scan of the l1 ball. Errors when the ball exceeds `budget`
/// points or contains no non-resonant harmonic at all.
pub fn alpha_r(
    freq: &FrequencyVector,
    module: &ResonanceModule,
    rk: u32,
    budget: u64,
) -> Result<AlphaReport> {
    let n = freq.n1();
    if module.dim() != n {
        return Err(Error::dims(
            "resonance module dimension does not match frequency vector",
        ));
    }
    if rk == 0 {
        return Err(Error::invalid("alpha_r needs rk >= 1"));
    }
    let total = l1_ball_count(n, rk as u64);
    if total > budget as u128 {
        return Err(Error::budget(format!(
            "alpha_r ball has {total} points, budget is {budget}"
        )));
    }

    use rayon::prelude::*;
    let rad = rk as i64;
    let best = (-rad..=rad)
        .into_par_iter()
        .map(|k0| {
            let mut local: Option<(f64, Vec<i32>)> = None;
            let mut scanned = 0u64;
            let rem = (rad - k0.abs()) as u32;
            let mut k = vec![0i32; n];
            k[0] = k0 as i32;
            scan_suffix(&mut k, 1, rem, &mut |k: &[i32]| {
                scanned += 1;
                if k.iter().all(|&v| v == 0) || freq.is_resonant(k, module) {
                    return;
                }
                let v = freq.dot_f64(k).abs();
                let better = match &local {
                    None => true,
                    Some((bv, bk)) => v < *bv || (v == *bv && k < bk.as_slice()),
                };
                if better {
                    local = Some((v, k.to_vec()));
                }
            });
            (local, scanned)
        })
        .reduce(
            || (None, 0u64),
            |(a, ca), (b, cb)| {
                let merged = match (a, b) {
                    (None, x) | (x, None) => x,
                    (Some(x), Some(y)) => {
                        if y.0 < x.0 || (y.0 == x.0 && y.1 < x.1) {
                            Some(y)
                        } else {
                            Some(x)
                        }
                    }
                };
                (merged, ca + cb)
            },
        );

    match best {
        (Some((value, argmin)), scanned) => Ok(AlphaReport {
            value,
            argmin,
            rk,
            scanned,
        }),
        (None, _) => Err(Error::invalid(
            "every harmonic in the ball is resonant; alpha_r is undefined",
        )),
    }
}

/// Visit every suffix `k[from..]` with `|k[from..]|_1 <= rem`.
fn scan_suffix(k: &mut Vec<i32>, from: usize, rem: u32, visit: &mut impl FnMut(&[i32])) {
    if from == k.len() {
        visit(k);
        return;
    }
    let r = rem as i32;
    for v in -r..=r {
        k[from] = v;
        scan_suffix(k, from + 1, rem - v.unsigned_abs(), visit);
    }
    k[from] = 0;
}

/// Number of lattice points with `|k|_1 <= rad` in `Z^n`.
fn l1_ball_count(n: usize, rad: u64) -> u128 {
    let mut row = vec![0u128; rad as usize + 1];
    for r in 0..=rad as usize {
        row[r] = 1; // n = 0: only the empty point
    }
    for _ in 0..n {
        let mut next = vec![0u128; rad as usize + 1];
        for r in 0..=rad as usize {
            // new coordinate v with |v| <= r, then radius r - |v| remains
            let mut acc = row[r];
            for v in 1..=r {
                acc += 2 * row[r - v];
            }
            next[r] = acc;
        }
        row = next;
    }
    row[rad as usize]
}

/// Result of a Diophantine survey over the ball `0 < |k|_1 <= rk`.
#[derive(Clone, Debug, Serialize)]
pub struct DiophantineReport {
    pub holds: bool,
    /// Smallest ratio `|k . omega| * |k|_1^tau / gamma` over the scan.
    pub worst_ratio: f64,
    pub worst_k: Vec<i32>,
    pub gamma: f64,
    pub tau: f64,
    pub rk: u32,
}

/// Check `|k . omega| >= gamma / |k|_1^tau` for every non-resonant harmonic
/// in the ball. `gamma = 0` holds vacuously.
pub fn diophantine_check(
    freq: &FrequencyVector,
    module: &ResonanceModule,
    rk: u32,
    budget: u64,
) -> Result<DiophantineReport> {
    let n = freq.n1();
    if rk == 0 {
        return Err(Error::invalid("diophantine_check needs rk >= 1"));
    }
    let total = l1_ball_count(n, rk as u64);
    if total > budget as u128 {
        return Err(Error::budget(format!(
            "diophantine ball has {total} points, budget is {budget}"
        )));
    }
    let gamma = freq.gamma;
    let tau = freq.tau;
    let mut worst: Option<(f64, Vec<i32>)> = None;
    let mut k = vec![0i32; n];
    scan_suffix(&mut k, 0, rk, &mut |k: &[i32]| {
        if k.iter().all(|&v| v == 0) || freq.is_resonant(k, module) {
            return;
        }
        let kl1: u32 = k.iter().map(|v| v.unsigned_abs()).sum();
        let ratio = if gamma == 0.0 {
            f64::INFINITY
        } else {
            freq.dot_f64(k).abs() * (kl1 as f64).powf(tau) / gamma
        };
        let better = match &worst {
            None => true,
            Some((wv, wk)) => ratio < *wv || (ratio == *wv && k < wk.as_slice()),
        };
        if better {
            worst = Some((ratio, k.to_vec()));
        }
    });
    let (worst_ratio, worst_k) = worst.unwrap_or((f64::INFINITY, vec![]));
    Ok(DiophantineReport {
        holds: worst_ratio >= 1.0,
        worst_ratio,
        worst_k,
        gamma,
        tau,
        rk,
    })
}

/// Exact linear algebra over the rationals, sized for resonance lattices.
mod ratlin {
    use num::bigint::BigInt;
    use num::rational::BigRational;
    use num::{Signed, Zero};

    fn to_rat(m: &[Vec<BigInt>], dim: usize) -> Vec<Vec<BigRational>> {
        // columns -> row-major rational matrix, dim rows
        let cols = m.len();
        (0..dim)
            .map(|r| {
                (0..cols)
                    .map(|c| BigRational::from_integer(m[c][r].clone()))
                    .collect()
            })
            .collect()
    }

    fn eliminate(mat: &mut [Vec<BigRational>]) -> Vec<usize> {
        let rows = mat.len();
        if rows == 0 {
            return vec![];
        }
        let cols = mat[0].len();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..cols {
            let Some(p) = (r..rows).find(|&i| !mat[i][c].is_zero()) else {
                continue;
            };
            mat.swap(r, p);
            let inv = mat[r][c].clone();
            for x in mat[r].iter_mut() {
                *x = &*x / &inv;
            }
            for i in 0..rows {
                if i != r && !mat[i][c].is_zero() {
                    let f = mat[i][c].clone();
                    for j in 0..cols {
                        let sub = &f * &mat[r][j];
                        mat[i][j] = &mat[i][j] - &sub;
                    }
                }
            }
            pivots.push(c);
            r += 1;
            if r == rows {
                break;
            }
        }
        pivots
    }

    /// Rank of a set of integer columns of length `dim`.
    pub fn rank(cols: &[Vec<BigInt>], dim: usize) -> usize {
        if cols.is_empty() {
            return 0;
        }
        let mut mat = to_rat(cols, dim);
        eliminate(&mut mat).len()
    }

    /// Solve `B a = target` over the rationals; `None` if inconsistent.
    /// Assumes the columns of `B` are independent.
    pub fn solve(cols: &[Vec<BigInt>], target: &[BigInt], dim: usize) -> Option<Vec<BigRational>> {
        let m = cols.len();
        let mut mat = to_rat(cols, dim);
        for (r, row) in mat.iter_mut().enumerate() {
            row.push(BigRational::from_integer(target[r].clone()));
        }
        let pivots = eliminate(&mut mat);
        // Inconsistent iff some pivot lands in the augmented column.
        if pivots.iter().any(|&c| c == m) {
            return None;
        }
        let mut sol = vec![BigRational::zero(); m];
        for (row, &c) in pivots.iter().enumerate() {
            sol[c] = mat[row][m].clone();
        }
        Some(sol)
    }

    /// Moore-Penrose pseudo-inverse `(B^T B)^{ -1 } B^T` of independent
    /// integer columns, as a row-major rational matrix (m x dim).
    pub fn pseudo_inverse(cols: &[Vec<BigInt>], dim: usize) -> Option<Vec<Vec<BigRational>>> {
        let m = cols.len();
        // Gram matrix m x m
        let gram: Vec<Vec<BigRational>> = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        let mut acc = BigInt::zero();
                        for r in 0..dim {
                            acc += &cols[i][r] * &cols[j][r];
                        }
                        BigRational::from_integer(acc)
                    })
                    .collect()
            })
            .collect();
        let inv = invert(gram)?;
        // (inv * B^T)_{i,r} = sum_j inv[i][j] * B[r][j]
        Some(
            (0..m)
                .map(|i| {
                    (0..dim)
                        .map(|r| {
                            let mut acc = BigRational::zero();
                            for (j, col) in cols.iter().enumerate() {
                                acc += &inv[i][j]
                                    * BigRational::from_integer(col[r].clone());
                            }
                            acc
                        })
                        .collect()
                })
                .collect(),
        )
    }

    fn invert(mat: Vec<Vec<BigRational>>) -> Option<Vec<Vec<BigRational>>> {
        let n = mat.len();
        let mut aug: Vec<Vec<BigRational>> = mat
            .into_iter()
            .enumerate()
            .map(|(i, mut row)| {
                for j in 0..n {
                    row.push(if i == j {
                        BigRational::from_integer(1.into())
                    } else {
                        BigRational::zero()
                    });
                }
                row
            })
            .collect();
        let pivots = eliminate(&mut aug);
        if pivots.len() != n || pivots.iter().any(|&c| c >= n) {
            return None;
        }
        Some(
            aug.into_iter()
                .map(|row| row[n..].to_vec())
                .collect(),
        )
    }

    #[allow(dead_code)]
    fn abs_max(v: &[BigRational]) -> BigRational {
        v.iter().map(|x| x.abs()).max().unwrap_or_else(BigRational::zero)
    }
}
