//! Numerical ground truth: point evaluation of series on a real chart,
//! Hamiltonian flows integrated to high order, drift measurement against
//! resonance planes, and a brute-force oracle for the Lie transform.
//!
//! Everything upstream of this module is formal algebra and inequalities;
//! here series become functions and the certified statements are checked
//! against actual orbits. The Cartesian block uses the chart
//!
//! `z = (x + i y)/sqrt(2)`,  `w = (y + i x)/sqrt(2)`,
//!
//! chosen so that the series-level pairing `{w_j, z_j} = 1` transports to
//! the real pairing `{y_j, x_j} = 1`; the transport is re-verified
//! numerically the first time a flow is integrated.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};
use std::sync::OnceLock;

use num::complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::LieTransform;
use crate::error::{Error, Result};
use crate::norms::DomainParams;
use crate::resonance::ResonanceModule;
use crate::series::{poisson_bracket, Dims, Series, TermKey};

/// A real phase-space point. Angles are stored reduced to `[0, 2*pi)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl PhasePoint {
    pub fn new(p: Vec<f64>, q: Vec<f64>, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if p.len() != q.len() || x.len() != y.len() {
            return Err(Error::dims(format!(
                "phase point blocks disagree: p/q have {}/{} entries, x/y have {}/{}",
                p.len(),
                q.len(),
                x.len(),
                y.len()
            )));
        }
        if p.iter()
            .chain(&q)
            .chain(&x)
            .chain(&y)
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("phase point entries must be finite"));
        }
        let q = q.into_iter().map(|a| a.rem_euclid(TAU)).collect();
        Ok(PhasePoint { p, q, x, y })
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.p.len(), self.x.len())
    }
}

/// Value of a series at a real point through the chart.
pub fn evaluate(g: &Series, pt: &PhasePoint) -> Result<Complex64> {
    if g.dims() != pt.dims() {
        return Err(Error::dims(format!(
            "series has dimensions {}, point has {}",
            g.dims(),
            pt.dims()
        )));
    }
    Ok(eval_raw(g, &pt.p, &pt.q, &pt.x, &pt.y))
}

/// Value of a declared-real series. Fails if the imaginary part exceeds
/// `1e-10 * (1 + |value|)`.
pub fn evaluate_real(g: &Series, pt: &PhasePoint) -> Result<f64> {
    let v = evaluate(g, pt)?;
    if v.im.abs() > 1e-10 * (1.0 + v.norm()) {
        return Err(Error::invalid(format!(
            "series declared real evaluates to {v} (imaginary part too large)"
        )));
    }
    Ok(v.re)
}

fn eval_raw(g: &Series, p: &[f64], q: &[f64], x: &[f64], y: &[f64]) -> Complex64 {
    let z: Vec<Complex64> = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| Complex64::new(a, b) * FRAC_1_SQRT_2)
        .collect();
    let w: Vec<Complex64> = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| Complex64::new(b, a) * FRAC_1_SQRT_2)
        .collect();
    let mut total = Complex64::new(0.0, 0.0);
    for (key, c) in g.terms() {
        let mut phase = 0.0;
        for (j, &kj) in key.k.iter().enumerate() {
            phase += f64::from(kj) * q[j];
        }
        let mut v = c * Complex64::from_polar(1.0, phase);
        for (j, &m) in key.mp.iter().enumerate() {
            if m > 0 {
                v *= p[j].powi(m as i32);
            }
        }
        for (j, &m) in key.mz.iter().enumerate() {
            if m > 0 {
                v *= z[j].powu(m);
            }
        }
        for (j, &m) in key.mw.iter().enumerate() {
            if m > 0 {
                v *= w[j].powu(m);
            }
        }
        total += v;
    }
    total
}

/// Real section of the analyticity domain: a box for the actions, a disc
/// per Cartesian pair.
#[derive(Clone, Copy, Debug)]
pub struct RealDomain {
    /// Bound on every `|p_j|`.
    pub p_box: f64,
    /// Bound on every `|z_j| = sqrt((x_j^2 + y_j^2)/2)`.
    pub cart_radius: f64,
}

impl RealDomain {
    pub fn from_params(domain: &DomainParams, fraction: f64) -> Self {
        RealDomain {
            p_box: fraction * domain.rho,
            cart_radius: fraction * domain.r_cart,
        }
    }

    pub fn contains(&self, pt: &PhasePoint) -> bool {
        contains_raw(self, &pt.p, &pt.x, &pt.y)
    }
}

fn contains_raw(domain: &RealDomain, p: &[f64], x: &[f64], y: &[f64]) -> bool {
    p.iter().all(|v| v.abs() <= domain.p_box)
        && x.iter()
            .zip(y)
            .all(|(&a, &b)| (0.5 * (a * a + b * b)).sqrt() <= domain.cart_radius)
}

/// Slow observable `Phi0 = lambda . p` and its transformed counterpart
/// `Phi = T_X Phi0`, tracked along orbits to measure fast drift.
#[derive(Clone, Debug)]
pub struct Observables {
    pub lambda: Vec<f64>,
    pub phi0: Series,
    pub phi: Series,
}

impl Observables {
    /// The untransformed form: `Phi = Phi0`.
    pub fn slow_form(lambda: &[f64], dims: Dims) -> Result<Self> {
        let phi0 = linear_form(lambda, dims)?;
        Ok(Observables {
            lambda: lambda.to_vec(),
            phi0: phi0.clone(),
            phi: phi0,
        })
    }

    /// `Phi = sum_{j <= orders} E_j Phi0` through the generator sequence.
    pub fn transformed(
        lambda: &[f64],
        transform: &LieTransform,
        orders: u32,
        dims: Dims,
    ) -> Result<Self> {
        let phi0 = linear_form(lambda, dims)?;
        let phi = transform.apply(&phi0, orders)?;
        Ok(Observables {
            lambda: lambda.to_vec(),
            phi0,
            phi,
        })
    }
}

fn linear_form(lambda: &[f64], dims: Dims) -> Result<Series> {
    if lambda.len() != dims.n1 {
        return Err(Error::dims(format!(
            "covector has {} entries, dimensions are {dims}",
            lambda.len()
        )));
    }
    let mut terms = Vec::new();
    for (j, &l) in lambda.iter().enumerate() {
        if l == 0.0 {
            continue;
        }
        let mut mp = vec![0u32; dims.n1];
        mp[j] = 1;
        terms.push((
            Complex64::new(l, 0.0),
            TermKey::new(vec![0; dims.n1], mp, vec![0; dims.n2], vec![0; dims.n2]),
        ));
    }
    Series::from_terms(dims, terms)
}

/// Orbit data from the integrator. The observable paths are empty when no
/// observables were supplied, otherwise they match `times` in length.
#[derive(Clone, Debug, Default)]
pub struct DriftRecord {
    pub times: Vec<f64>,
    pub p_path: Vec<Vec<f64>>,
    pub phi0_path: Vec<f64>,
    pub phi_path: Vec<f64>,
    /// Max `|H(t) - H(0)|` over the recorded nodes.
    pub energy_error: f64,
    /// Set when the orbit left the declared domain; the path stops there.
    pub exit_time: Option<f64>,
    /// Filled by `measure_drift`.
    pub max_fast_drift_distance: f64,
}

/// Integration request. `dt` is rounded so that an integer number of steps
/// covers `t_span` exactly.
#[derive(Clone, Copy, Debug)]
pub struct FlowSpec {
    pub t_span: f64,
    pub dt: f64,
    pub domain: Option<RealDomain>,
    /// Record every this many steps; the endpoints are always recorded.
    pub record_stride: usize,
}

impl FlowSpec {
    pub fn new(t_span: f64, dt: f64) -> Self {
        FlowSpec {
            t_span,
            dt,
            domain: None,
            record_stride: 1,
        }
    }
}

/// Integrate Hamilton's equations for `h` from `pt0`, recording every step.
pub fn integrate_flow(h: &Series, pt0: &PhasePoint, t_span: f64, dt: f64) -> Result<DriftRecord> {
    integrate_orbit(h, None, pt0, &FlowSpec::new(t_span, dt))
}

/// Full-control entry point: optional observables, domain watch, stride.
pub fn integrate_orbit(
    h: &Series,
    obs: Option<&Observables>,
    pt0: &PhasePoint,
    spec: &FlowSpec,
) -> Result<DriftRecord> {
    chart_startup_check();
    if h.dims() != pt0.dims() {
        return Err(Error::dims(format!(
            "Hamiltonian has dimensions {}, initial point has {}",
            h.dims(),
            pt0.dims()
        )));
    }
    if let Some(o) = obs {
        if o.phi0.dims() != h.dims() || o.phi.dims() != h.dims() {
            return Err(Error::dims("observables do not match the Hamiltonian"));
        }
    }
    if !(spec.dt > 0.0 && spec.dt.is_finite()) {
        return Err(Error::invalid("dt must be positive and finite"));
    }
    if !(spec.t_span > 0.0 && spec.t_span.is_finite()) {
        return Err(Error::invalid("t_span must be positive and finite"));
    }
    let stride = spec.record_stride.max(1) as u64;
    let steps = (spec.t_span / spec.dt).round().max(1.0) as u64;
    let dt = spec.t_span / steps as f64;

    let field = FlowField::new(h);
    let n1 = field.n1;
    let n2 = field.n2;
    let mut u = Vec::with_capacity(2 * (n1 + n2));
    u.extend_from_slice(&pt0.p);
    u.extend_from_slice(&pt0.q);
    u.extend_from_slice(&pt0.x);
    u.extend_from_slice(&pt0.y);

    let e0 = evaluate_real(h, pt0)?;
    let mut rec = DriftRecord::default();
    let record = |rec: &mut DriftRecord, t: f64, u: &[f64]| {
        let (p, rest) = u.split_at(n1);
        let (q, rest) = rest.split_at(n1);
        let (x, y) = rest.split_at(n2);
        rec.times.push(t);
        rec.p_path.push(p.to_vec());
        let energy = eval_raw(h, p, q, x, y).re;
        rec.energy_error = rec.energy_error.max((energy - e0).abs());
        if let Some(o) = obs {
            rec.phi0_path.push(eval_raw(&o.phi0, p, q, x, y).re);
            rec.phi_path.push(eval_raw(&o.phi, p, q, x, y).re);
        }
    };
    record(&mut rec, 0.0, &u);
    if let Some(domain) = &spec.domain {
        if !contains_raw(domain, &u[..n1], &u[2 * n1..2 * n1 + n2], &u[2 * n1 + n2..]) {
            rec.exit_time = Some(0.0);
            return Ok(rec);
        }
    }

    for step in 1..=steps {
        u = gbs_step(&field, &u, dt);
        let t = step as f64 * dt;
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "flow produced a non-finite state at t = {t}"
            )));
        }
        let exited = spec.domain.as_ref().is_some_and(|domain| {
            !contains_raw(domain, &u[..n1], &u[2 * n1..2 * n1 + n2], &u[2 * n1 + n2..])
        });
        if exited || step % stride == 0 || step == steps {
            record(&mut rec, t, &u);
        }
        if exited {
            rec.exit_time = Some(t);
            break;
        }
    }
    Ok(rec)
}

/// Hamilton's equations, differentiated symbolically once and evaluated
/// pointwise afterwards: `dq/dt = dH/dp`, `dp/dt = -dH/dq`, and on the
/// chart `dx/dt = Re(-dH/dw - i dH/dz)/sqrt(2)`,
/// `dy/dt = Re(dH/dz + i dH/dw)/sqrt(2)`.
struct FlowField {
    n1: usize,
    n2: usize,
    dp: Vec<Series>,
    dq: Vec<Series>,
    dz: Vec<Series>,
    dw: Vec<Series>,
}

impl FlowField {
    fn new(h: &Series) -> Self {
        let dims = h.dims();
        FlowField {
            n1: dims.n1,
            n2: dims.n2,
            dp: (0..dims.n1).map(|j| h.dp(j)).collect(),
            dq: (0..dims.n1).map(|j| h.dq(j)).collect(),
            dz: (0..dims.n2).map(|j| h.dz(j)).collect(),
            dw: (0..dims.n2).map(|j| h.dw(j)).collect(),
        }
    }

    // State layout: [p, q, x, y].
    fn deriv(&self, u: &[f64], out: &mut [f64]) {
        let (n1, n2) = (self.n1, self.n2);
        let (p, rest) = u.split_at(n1);
        let (q, rest) = rest.split_at(n1);
        let (x, y) = rest.split_at(n2);
        for j in 0..n1 {
            out[j] = -eval_raw(&self.dq[j], p, q, x, y).re;
            out[n1 + j] = eval_raw(&self.dp[j], p, q, x, y).re;
        }
        for j in 0..n2 {
            let gz = eval_raw(&self.dz[j], p, q, x, y);
            let gw = eval_raw(&self.dw[j], p, q, x, y);
            out[2 * n1 + j] = FRAC_1_SQRT_2 * (gz.im - gw.re);
            out[2 * n1 + n2 + j] = FRAC_1_SQRT_2 * (gz.re - gw.im);
        }
    }
}

const SUBSTEPS: [usize; 4] = [2, 4, 6, 8];

/// One macro step of the extrapolated midpoint scheme: four midpoint passes
/// with endpoint smoothing, combined by polynomial extrapolation in `h^2`.
/// The error expansion of the smoothed midpoint rule is even in `h`, so
/// four passes give a fixed-step explicit method of order 8.
fn gbs_step(field: &FlowField, u: &[f64], h: f64) -> Vec<f64> {
    let dim = u.len();
    let mut f = vec![0.0; dim];
    let mut rows: Vec<Vec<Vec<f64>>> = Vec::with_capacity(SUBSTEPS.len());
    for (i, &n) in SUBSTEPS.iter().enumerate() {
        let hs = h / n as f64;
        let mut prev = u.to_vec();
        field.deriv(&prev, &mut f);
        let mut cur: Vec<f64> = (0..dim).map(|d| prev[d] + hs * f[d]).collect();
        for _ in 1..n {
            field.deriv(&cur, &mut f);
            for d in 0..dim {
                let next = prev[d] + 2.0 * hs * f[d];
                prev[d] = cur[d];
                cur[d] = next;
            }
        }
        field.deriv(&cur, &mut f);
        let smoothed: Vec<f64> = (0..dim)
            .map(|d| 0.5 * (cur[d] + prev[d] + hs * f[d]))
            .collect();
        let mut row = vec![smoothed];
        for k in 1..=i {
            let ratio = (SUBSTEPS[i] as f64 / SUBSTEPS[i - k] as f64).powi(2);
            let below = &rows[i - 1][k - 1];
            let this = &row[k - 1];
            let next: Vec<f64> = (0..dim)
                .map(|d| this[d] + (this[d] - below[d]) / (ratio - 1.0))
                .collect();
            row.push(next);
        }
        rows.push(row);
    }
    rows.last().unwrap().last().unwrap().clone()
}

/// Euclidean distance from each `p(t)` to the plane `p(0) + span(M)`.
pub fn drift_distances(rec: &DriftRecord, module: &ResonanceModule) -> Result<Vec<f64>> {
    let first = rec
        .p_path
        .first()
        .ok_or_else(|| Error::invalid("drift record is empty"))?;
    if module.dim() != first.len() {
        return Err(Error::dims(format!(
            "module lives in dimension {}, actions have {}",
            module.dim(),
            first.len()
        )));
    }
    let basis = orthonormal_basis(module.basis());
    Ok(rec
        .p_path
        .iter()
        .map(|p| {
            let mut v: Vec<f64> = p.iter().zip(first).map(|(a, b)| a - b).collect();
            project_out(&mut v, &basis);
            norm2(&v)
        })
        .collect())
}

/// Max drift distance over the path; also stored on the record.
pub fn measure_drift(rec: &mut DriftRecord, module: &ResonanceModule) -> Result<f64> {
    let max = drift_distances(rec, module)?
        .into_iter()
        .fold(0.0, f64::max);
    rec.max_fast_drift_distance = max;
    Ok(max)
}

fn orthonormal_basis(vectors: &[Vec<i64>]) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for ints in vectors {
        let mut v: Vec<f64> = ints.iter().map(|&a| a as f64).collect();
        project_out(&mut v, &basis);
        let norm = norm2(&v);
        if norm > 1e-12 {
            for vi in &mut v {
                *vi /= norm;
            }
            basis.push(v);
        }
    }
    basis
}

fn project_out(v: &mut [f64], orthonormal: &[Vec<f64>]) {
    for e in orthonormal {
        let c: f64 = v.iter().zip(e).map(|(a, b)| a * b).sum();
        for (vi, ei) in v.iter_mut().zip(e) {
            *vi -= c * ei;
        }
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Grades `[E_0 g, ..., E_n g]` computed the slow way: every composition of
/// each grade is expanded to an explicit nested bracket with its product
/// weight, nothing shared, nothing memoized. Agreement with the engine's
/// ladder recursion is the evidence that both are right.
pub fn oracle_lie_expand(gens: &[Series], g: &Series, order: u32) -> Result<Vec<Series>> {
    let mut grades = vec![g.clone()];
    for s in 1..=order {
        let mut acc = Series::zero(g.dims());
        for comp in compositions(s, gens.len() as u32) {
            let mut weight = 1.0;
            let mut tail = 0u32;
            for &part in comp.iter().rev() {
                tail += part;
                weight *= f64::from(part) / f64::from(tail);
            }
            let mut term = g.clone();
            for &part in comp.iter().rev() {
                term = poisson_bracket(&gens[part as usize - 1], &term)?;
            }
            acc.add_scaled_assign(&Complex64::new(weight, 0.0), &term)?;
        }
        grades.push(acc);
    }
    Ok(grades)
}

/// `sum_{s <= order} E_s g` through the oracle grades.
pub fn oracle_lie_apply(gens: &[Series], g: &Series, order: u32) -> Result<Series> {
    let mut total = Series::zero(g.dims());
    for grade in oracle_lie_expand(gens, g, order)? {
        total.add_assign(&grade)?;
    }
    Ok(total)
}

fn compositions(total: u32, max_part: u32) -> Vec<Vec<u32>> {
    fn extend(rem: u32, max_part: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if rem == 0 {
            out.push(cur.clone());
            return;
        }
        for part in 1..=rem.min(max_part) {
            cur.push(part);
            extend(rem - part, max_part, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if max_part > 0 {
        extend(total, max_part, &mut Vec::new(), &mut out);
    }
    out
}

/// Deterministic sample of real points in the `fraction`-scaled domain:
/// actions uniform in the box, angles uniform on the torus, Cartesian pairs
/// uniform on the disc of radius `fraction * R` in `|z|`.
pub fn sample_points(
    domain: &DomainParams,
    fraction: f64,
    dims: Dims,
    count: usize,
    seed: u64,
) -> Vec<PhasePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p_box = fraction * domain.rho;
    let z_rad = fraction * domain.r_cart;
    (0..count)
        .map(|_| {
            let p = (0..dims.n1).map(|_| rng.gen_range(-p_box..=p_box)).collect();
            let q = (0..dims.n1).map(|_| rng.gen_range(0.0..TAU)).collect();
            let mut x = Vec::with_capacity(dims.n2);
            let mut y = Vec::with_capacity(dims.n2);
            for _ in 0..dims.n2 {
                // |(x, y)| = sqrt(2) |z|; sqrt of a uniform gives a uniform
                // area density on the disc
                let rad = z_rad * std::f64::consts::SQRT_2 * rng.gen::<f64>().sqrt();
                let ang = rng.gen_range(0.0..TAU);
                x.push(rad * ang.cos());
                y.push(rad * ang.sin());
            }
            PhasePoint::new(p, q, x, y).expect("sampled entries are finite")
        })
        .collect()
}

/// How far the chart is from canonical: compares the series-level bracket
/// `{w_1, z_1} = 1` with the same bracket computed from finite differences
/// of the chart functions in the real pairing `(y, x)`. Both must equal 1.
pub fn chart_transport_defect() -> f64 {
    let dims = Dims::new(0, 1);
    let one = Complex64::new(1.0, 0.0);
    let z = Series::monomial(dims, one, TermKey::new(vec![], vec![], vec![1], vec![0]))
        .expect("z key is well-formed");
    let w = Series::monomial(dims, one, TermKey::new(vec![], vec![], vec![0], vec![1]))
        .expect("w key is well-formed");
    let pt = PhasePoint::new(vec![], vec![], vec![0.7], vec![-0.4]).expect("finite entries");

    let series_val = evaluate(&poisson_bracket(&w, &z).expect("dims match"), &pt)
        .expect("dims match");

    let h = 1e-5;
    let at = |g: &Series, x: f64, y: f64| -> Complex64 {
        let shifted = PhasePoint::new(vec![], vec![], vec![x], vec![y]).expect("finite entries");
        evaluate(g, &shifted).expect("dims match")
    };
    let (x0, y0) = (pt.x[0], pt.y[0]);
    let dzdx = (at(&z, x0 + h, y0) - at(&z, x0 - h, y0)) / (2.0 * h);
    let dzdy = (at(&z, x0, y0 + h) - at(&z, x0, y0 - h)) / (2.0 * h);
    let dwdx = (at(&w, x0 + h, y0) - at(&w, x0 - h, y0)) / (2.0 * h);
    let dwdy = (at(&w, x0, y0 + h) - at(&w, x0, y0 - h)) / (2.0 * h);
    let real_val = dwdy * dzdx - dwdx * dzdy;

    (series_val - real_val)
        .norm()
        .max((series_val - one).norm())
}

static CHART_OK: OnceLock<()> = OnceLock::new();

fn chart_startup_check() {
    CHART_OK.get_or_init(|| {
        let defect = chart_transport_defect();
        assert!(
            defect < 1e-8,
            "real chart is inconsistent with the bracket convention: defect {defect}"
        );
    });
}
