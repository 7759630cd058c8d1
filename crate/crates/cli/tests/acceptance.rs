//! Acceptance suite: one check per release criterion, each printing a
//! single PASS/FAIL line (also written to `acceptance_report.txt` at the
//! workspace root). Two criteria are expected to FAIL as stated; the
//! assertions pin the measured deviation and the proven replacement, so a
//! change in either direction fails this test. See the README for the
//! analysis.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use num::complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use releg_core::engine::{
    measured_inputs, relegate, EngineParams, Hamiltonian, LieTransform,
};
use releg_core::estimates::{
    big_a, catalan_sequence, check_conditions, eta_theta_cap, eta_theta_sequences,
    generating_bounds, local_stability_parts, nonresonant_certificate, remainder_bound,
};
use releg_core::norms::{
    bracket_bound, cauchy_bounds, multi_bracket_bound, weighted_norm, DomainParams, Restriction,
};
use releg_core::resonance::{alpha_r, resonance_module, FrequencyVector, ResonanceModule};
use releg_core::series::{lie_derivative, poisson_bracket, Dims, Series, TermKey};
use releg_core::textio::{load_series, series_from_str, series_to_string};
use releg_core::verify::{
    evaluate_real, integrate_orbit, oracle_lie_expand, sample_points, FlowSpec, Observables,
    RealDomain,
};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `cos(k . q)` times an optional monomial.
fn cosine(dims: Dims, k: Vec<i32>) -> Series {
    let neg: Vec<i32> = k.iter().map(|v| -v).collect();
    Series::from_terms(
        dims,
        [
            (c(0.5, 0.0), TermKey::harmonic(k, dims.n2)),
            (c(0.5, 0.0), TermKey::harmonic(neg, dims.n2)),
        ],
    )
    .unwrap()
}

fn action_power(dims: Dims, j: usize, pow: u32) -> Series {
    let mut mp = vec![0u32; dims.n1];
    mp[j] = pow;
    Series::monomial(
        dims,
        c(1.0, 0.0),
        TermKey::new(vec![0; dims.n1], mp, vec![0; dims.n2], vec![0; dims.n2]),
    )
    .unwrap()
}

/// Random sparse series with harmonics in `|k_i| <= max_k` and total
/// polynomial degree at most `max_deg`.
fn random_series(r: &mut ChaCha8Rng, dims: Dims, max_k: i32, max_deg: u32, terms: usize) -> Series {
    let mut out = Series::zero(dims);
    let slots = dims.n1 + 2 * dims.n2;
    for _ in 0..terms {
        let k: Vec<i32> = (0..dims.n1).map(|_| r.gen_range(-max_k..=max_k)).collect();
        let mut exps = vec![0u32; slots];
        if slots > 0 {
            for _ in 0..r.gen_range(0..=max_deg) {
                exps[r.gen_range(0..slots)] += 1;
            }
        }
        let (mp, rest) = exps.split_at(dims.n1);
        let (mz, mw) = rest.split_at(dims.n2);
        out.insert_add(
            TermKey::new(k, mp.to_vec(), mz.to_vec(), mw.to_vec()),
            c(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)),
        );
    }
    out
}

fn scale_of(series: &[&Series]) -> f64 {
    series.iter().map(|s| s.linf()).fold(1.0, f64::max)
}

fn drift_free(freq: &[i64], h1: Series, epsilon: f64) -> Hamiltonian {
    let dims = h1.dims();
    Hamiltonian {
        dims,
        freq: FrequencyVector::from_integers(freq, 0.0, 0.0).unwrap(),
        f0: Series::zero(dims),
        mu: 0.0,
        h1,
        epsilon,
    }
}

/// Single-frequency pendulum chain with a quadratic intermediate part.
fn pendulum_suite_problem() -> (Hamiltonian, EngineParams) {
    let dims = Dims::new(1, 0);
    let h1 = cosine(dims, vec![1])
        .add(&cosine(dims, vec![2]).scale(&c(0.3, 0.0)))
        .unwrap()
        .add(&cosine(dims, vec![3]).scale(&c(0.1, 0.0)))
        .unwrap();
    let ham = Hamiltonian {
        dims,
        freq: FrequencyVector::from_integers(&[1], 0.0, 0.0).unwrap(),
        f0: action_power(dims, 0, 2).scale(&c(0.5, 0.0)),
        mu: 1e-3,
        h1,
        epsilon: 1e-3,
    };
    (ham, EngineParams::new(2, 2, 4))
}

/// Two frequencies in resonance, with an angle-bearing intermediate part
/// that forces the inner relegation chain to widen harmonic support.
fn resonant_chain_problem() -> (Hamiltonian, EngineParams) {
    let dims = Dims::new(2, 0);
    let f0 = action_power(dims, 0, 1)
        .mul(&action_power(dims, 1, 1))
        .unwrap()
        .mul(&cosine(dims, vec![1, 1]))
        .unwrap();
    let h1 = cosine(dims, vec![1, 0])
        .add(&cosine(dims, vec![1, -1]))
        .unwrap()
        .add(&cosine(dims, vec![2, 1]))
        .unwrap();
    let ham = Hamiltonian {
        dims,
        freq: FrequencyVector::from_integers(&[1, -1], 0.0, 0.0).unwrap(),
        f0,
        mu: 1e-3,
        h1,
        epsilon: 1e-4,
    };
    (ham, EngineParams::new(2, 3, 3))
}

/// `x = (z - i w)/sqrt(2)` as a series factor.
fn cartesian_x(dims: Dims) -> Series {
    let inv = 1.0 / f64::sqrt(2.0);
    Series::from_terms(
        dims,
        [
            (
                c(inv, 0.0),
                TermKey::new(vec![0; dims.n1], vec![0; dims.n1], vec![1], vec![0]),
            ),
            (
                c(0.0, -inv),
                TermKey::new(vec![0; dims.n1], vec![0; dims.n1], vec![0], vec![1]),
            ),
        ],
    )
    .unwrap()
}

/// One rotor coupled to an oscillator block through the perturbation.
fn oscillator_chain_problem() -> (Hamiltonian, EngineParams) {
    let dims = Dims::new(1, 1);
    // -i z w = (x^2 + y^2)/2, the harmonic energy of the Cartesian pair.
    let f0 = Series::monomial(
        dims,
        c(0.0, -1.0),
        TermKey::new(vec![0], vec![0], vec![1], vec![1]),
    )
    .unwrap();
    let h1 = cosine(dims, vec![1])
        .mul(&cartesian_x(dims))
        .unwrap()
        .add(&cosine(dims, vec![2]))
        .unwrap();
    let ham = Hamiltonian {
        dims,
        freq: FrequencyVector::from_integers(&[1], 0.0, 0.0).unwrap(),
        f0,
        mu: 1e-3,
        h1,
        epsilon: 1e-4,
    };
    (ham, EngineParams::new(2, 2, 3))
}

/// The pendulum chain inside the certified regime.
fn certified_pendulum() -> (Hamiltonian, EngineParams, DomainParams) {
    let (mut ham, mut params) = pendulum_suite_problem();
    ham.mu = 1e-8;
    ham.epsilon = 1e-12;
    params.k_split = 5;
    params.order = 3;
    (ham, params, DomainParams::new(1.0, 1.0, 1.0).unwrap())
}

/// The rotor-oscillator problem inside the certified regime.
fn certified_oscillator() -> (Hamiltonian, EngineParams, DomainParams) {
    let (mut ham, mut params) = oscillator_chain_problem();
    ham.mu = 1e-8;
    ham.epsilon = 1e-12;
    params.k_split = 5;
    params.order = 3;
    (ham, params, DomainParams::new(1.0, 1.0, 1.0).unwrap())
}

/// Shell-graded perturbation whose residual decay is visible over four
/// orders: harmonics at 1, 6, 11, 16, 21 land in shells 1..=5 at `K = 5`,
/// and the coefficients `e^{-2.2 k}` keep the doubled-strip norm near 1 so
/// the perturbation can be large enough for orbits to feel it. The deep
/// inner chain keeps relegation leftovers (scale `eps mu^{L+1}`) below the
/// top-shell residual signal.
fn graded_shell_problem() -> (Hamiltonian, EngineParams, DomainParams) {
    let dims = Dims::new(1, 0);
    let mut h1 = Series::zero(dims);
    for k in [1i32, 6, 11, 16, 21] {
        h1.add_assign(&cosine(dims, vec![k]).scale(&c(f64::exp(-2.2 * f64::from(k)), 0.0)))
            .unwrap();
    }
    let ham = Hamiltonian {
        dims,
        freq: FrequencyVector::from_integers(&[1], 0.0, 0.0).unwrap(),
        f0: action_power(dims, 0, 2).scale(&c(0.5, 0.0)),
        mu: 1e-5,
        h1,
        epsilon: 1e-10,
    };
    let params = EngineParams::new(5, 4, 4);
    (ham, params, DomainParams::new(1.0, 1.0, 1e6).unwrap())
}

struct Criterion {
    number: usize,
    title: &'static str,
    budget: f64,
    passed: bool,
    expected: bool,
    detail: String,
    elapsed: f64,
}

fn trivial_module(n: usize) -> ResonanceModule {
    ResonanceModule::trivial(n)
}

// 1. Bracket algebra on random sparse series.
fn bracket_algebra() -> (bool, String) {
    let dims = Dims::new(2, 2);
    let tol = 1e-12;
    let mut worst = 0.0_f64;
    for seed in 0..200 {
        let mut r = rng(seed);
        let f = random_series(&mut r, dims, 2, 3, 8);
        let g = random_series(&mut r, dims, 2, 3, 8);
        let h = random_series(&mut r, dims, 2, 3, 8);

        let fg = poisson_bracket(&f, &g).unwrap();
        let anti = fg.add(&poisson_bracket(&g, &f).unwrap()).unwrap();
        worst = worst.max(anti.linf() / scale_of(&[&fg]));

        let ffg_h = poisson_bracket(&fg, &h).unwrap();
        let fgh_f = poisson_bracket(&poisson_bracket(&g, &h).unwrap(), &f).unwrap();
        let fhf_g = poisson_bracket(&poisson_bracket(&h, &f).unwrap(), &g).unwrap();
        let jac = ffg_h.add(&fgh_f).unwrap().add(&fhf_g).unwrap();
        worst = worst.max(jac.linf() / scale_of(&[&ffg_h, &fgh_f, &fhf_g]));

        let gh = g.mul(&h).unwrap();
        let leib = poisson_bracket(&f, &gh)
            .unwrap()
            .sub(&poisson_bracket(&f, &g).unwrap().mul(&h).unwrap())
            .unwrap()
            .sub(&g.mul(&poisson_bracket(&f, &h).unwrap()).unwrap())
            .unwrap();
        worst = worst.max(leib.linf() / scale_of(&[&gh, &f]));
    }

    // Canonical pairs: the Cartesian one directly, the action-angle one
    // through the exponential surrogate {p_j, e^{i q_j}} = -i e^{i q_j}.
    let mut pairs_exact = true;
    for j in 0..dims.n2 {
        let mut mz = vec![0u32; dims.n2];
        mz[j] = 1;
        let z = Series::monomial(
            dims,
            c(1.0, 0.0),
            TermKey::new(vec![0; dims.n1], vec![0; dims.n1], mz.clone(), vec![0; dims.n2]),
        )
        .unwrap();
        let mut mw = vec![0u32; dims.n2];
        mw[j] = 1;
        let w = Series::monomial(
            dims,
            c(1.0, 0.0),
            TermKey::new(vec![0; dims.n1], vec![0; dims.n1], vec![0; dims.n2], mw),
        )
        .unwrap();
        let wz = poisson_bracket(&w, &z).unwrap();
        let key = TermKey::new(
            vec![0; dims.n1],
            vec![0; dims.n1],
            vec![0; dims.n2],
            vec![0; dims.n2],
        );
        pairs_exact &= wz.len() == 1 && wz.get(&key) == Some(&c(1.0, 0.0));
    }
    for j in 0..dims.n1 {
        let p = action_power(dims, j, 1);
        let mut k = vec![0i32; dims.n1];
        k[j] = 1;
        let e = Series::monomial(dims, c(1.0, 0.0), TermKey::harmonic(k.clone(), dims.n2)).unwrap();
        let pe = poisson_bracket(&p, &e).unwrap();
        pairs_exact &=
            pe.len() == 1 && pe.get(&TermKey::harmonic(k, dims.n2)) == Some(&c(0.0, -1.0));
    }

    let ok = worst <= tol && pairs_exact;
    (
        ok,
        format!(
            "antisymmetry/Jacobi/Leibniz on 200 random triples, worst relative defect {worst:.2e} \
             (tol 1e-12); {{iz̄_j,z_j}} = 1 exact, {{q_j,p_j}} = 1 via {{p_j, e^{{iq_j}}}} = -i e^{{iq_j}}"
        ),
    )
}

// 2. Homological exactness through the engine.
fn homological_exactness() -> (bool, String) {
    let freqs: [&[i64]; 3] = [&[1], &[1, -1], &[1, 2]];
    let counts = [34usize, 33, 33];
    let mut worst = 0.0_f64;
    let mut solved = 0usize;
    for (freq, count) in freqs.iter().zip(counts) {
        for seed in 0..count as u64 {
            let mut r = rng(2000 + seed + 97 * freq.len() as u64);
            let dims = Dims::new(freq.len(), 1);
            let psi = random_series(&mut r, dims, 3, 2, 8);
            let ham = drift_free(freq, psi.clone(), 1.0);
            let nf = relegate(&ham, &EngineParams::new(10, 1, 1)).unwrap();
            let residual = nf.z_terms[0]
                .sub(&poisson_bracket(&ham.h0_series(), &nf.x_full[0]).unwrap())
                .unwrap()
                .sub(&psi)
                .unwrap();
            worst = worst.max(residual.linf() / scale_of(&[&psi, &nf.x_full[0]]));
            solved += 1;
        }
    }
    let ok = worst <= 1e-13 && solved == 100;
    (
        ok,
        format!(
            "{solved} random right-hand sides over omega = (1), (1,-1), (1,2); \
             worst |Z - {{h0,X}} - Psi| = {worst:.2e} (tol 1e-13)"
        ),
    )
}

// 3. Relegation chain identities and class containments.
fn relegation_chain() -> (bool, String) {
    let fixtures: Vec<(&str, Hamiltonian, EngineParams)> = {
        let (h1, p1) = pendulum_suite_problem();
        let (h2, p2) = resonant_chain_problem();
        let (h3, p3) = oscillator_chain_problem();
        vec![("pendulum", h1, p1), ("resonant", h2, p2), ("oscillator", h3, p3)]
    };
    let mut worst_residual = 0.0_f64;
    let mut z_brackets_zero = true;
    let mut x_containments = true;
    let mut psi_k1_ok = true;
    let mut psi_k2_excesses: Vec<String> = Vec::new();

    for (name, ham, params) in &fixtures {
        let nf = relegate(ham, params).unwrap();
        for res in &nf.chain_residuals {
            worst_residual = worst_residual.max(*res);
        }
        let h0 = ham.h0_series();
        for z in &nf.z_terms {
            z_brackets_zero &= poisson_bracket(z, &h0).unwrap().linf() == 0.0;
        }
        let k = params.k_split;
        let k_prime = ham.f0.max_trig_degree();
        let l = params.depth;
        for (j, tag) in nf.x_tags[0].iter().enumerate() {
            x_containments &= tag.k1 <= k && tag.k2 <= k + j as u32 * k_prime;
        }
        for (s0, tag) in nf.psi_tags.iter().enumerate() {
            let s = s0 as u32 + 1;
            psi_k1_ok &= tag.k1 <= s * k;
            let cap = s * (k + l * k_prime);
            if tag.k2 > cap {
                psi_k2_excesses.push(format!(
                    "{name}: K2(Psi_{s}) = {} > {} at K = {k}, K' = {k_prime}, L = {l}",
                    tag.k2, cap
                ));
            }
        }
    }

    // The FAIL below must mean exactly one thing: the stated Psi_s class.
    // Everything else in this criterion is required to hold.
    assert!(worst_residual <= 1e-12, "chain residual {worst_residual:.2e}");
    assert!(z_brackets_zero, "a normal-form term leaked a fast harmonic");
    assert!(x_containments, "X_1j left its class");
    assert!(psi_k1_ok, "Psi_s exceeded the fast class sK");
    let ok = psi_k2_excesses.is_empty();
    let detail = if psi_k2_excesses.is_empty() {
        format!(
            "3 fixtures: worst chain residual {worst_residual:.2e} (tol 1e-12), \
             {{Z_s, h0}} identically zero, all class containments hold"
        )
    } else {
        format!(
            "chain residuals <= {worst_residual:.2e} and {{Z_s, h0}} = 0 hold, \
             X_1j and fast-harmonic classes hold, but the stated Psi_s class is exceeded: {} \
             (inner-chain brackets re-expand slow harmonics; only the fast class K1 <= sK \
             and the relative X-growth K2(X_sj) <= K2(Psi_s) + jK' are provable)",
            psi_k2_excesses.join("; ")
        )
    };
    (ok, detail)
}

// 4. Lie-transform round trip and oracle agreement.
fn lie_transform_identity() -> (bool, String) {
    let dims = Dims::new(2, 1);
    let r_max = 4u32;
    let tol = 1e-12;
    let mut worst_roundtrip = 0.0_f64;
    let mut worst_oracle = 0.0_f64;
    for seed in 0..6 {
        let mut r = rng(4000 + seed);
        let gens: Vec<Series> = (0..r_max)
            .map(|_| random_series(&mut r, dims, 2, 2, 5).scale(&c(0.1, 0.0)))
            .collect();
        let g = random_series(&mut r, dims, 2, 2, 6);
        let transform = LieTransform::new(gens.clone());

        let forward = transform.expand(&g, r_max).unwrap();
        let scale = scale_of(&[&g]);
        // Grade-by-grade inverse composition: grade 0 returns g, grades
        // 1..=r cancel.
        for s in 0..=r_max as usize {
            let mut total = Series::zero(dims);
            for (b, e_b) in forward.iter().enumerate().take(s + 1) {
                let back = transform.expand_inverse(e_b, (s - b) as u32).unwrap();
                total.add_assign(&back[s - b]).unwrap();
            }
            let defect = if s == 0 {
                total.sub(&g).unwrap().linf()
            } else {
                total.linf()
            };
            worst_roundtrip = worst_roundtrip.max(defect / scale);
        }

        let oracle = oracle_lie_expand(&gens, &g, r_max).unwrap();
        for (a, b) in forward.iter().zip(&oracle) {
            worst_oracle = worst_oracle.max(a.sub(b).unwrap().linf() / scale);
        }
    }
    let ok = worst_roundtrip <= tol && worst_oracle <= tol;
    (
        ok,
        format!(
            "6 random generator sequences, grades <= 4: inverse-composition defect \
             {worst_roundtrip:.2e}, oracle disagreement {worst_oracle:.2e} (tol 1e-12)"
        ),
    )
}

// 5. Derivative and bracket estimates dominate measured norms.
fn inequality_suite() -> (bool, String) {
    let dims = Dims::new(2, 1);
    let slack = 1.0 + 1e-12;
    let mut violations = 0usize;
    let mut checked = 0usize;

    for seed in 0..100u64 {
        let mut r = rng(5000 + seed);
        let domain = DomainParams::new(
            r.gen_range(0.4..1.8),
            r.gen_range(0.4..1.8),
            r.gen_range(0.4..1.8),
        )
        .unwrap();
        let s = random_series(&mut r, dims, 3, 3, 10);
        let d = r.gen_range(0.05..0.9);
        let inner = domain.restrict(d).unwrap();
        let bounds = cauchy_bounds(weighted_norm(&s, &domain), d, &domain).unwrap();
        for j in 0..dims.n1 {
            checked += 2;
            violations += usize::from(weighted_norm(&s.dp(j), &inner) > bounds.action * slack);
            violations += usize::from(weighted_norm(&s.dq(j), &inner) > bounds.angle * slack);
        }
        for j in 0..dims.n2 {
            checked += 2;
            violations += usize::from(weighted_norm(&s.dz(j), &inner) > bounds.cartesian * slack);
            violations += usize::from(weighted_norm(&s.dw(j), &inner) > bounds.cartesian * slack);
        }
    }

    for seed in 0..100u64 {
        let mut r = rng(6000 + seed);
        let domain = DomainParams::new(1.0, 1.0, 1.0).unwrap();
        let g = random_series(&mut r, dims, 2, 2, 7);
        let gp = random_series(&mut r, dims, 2, 2, 7);
        let d = r.gen_range(0.05..0.4);
        let d_prime = r.gen_range(0.0..0.3);
        let delta = r.gen_range(0.05..0.25);
        let restriction = Restriction::new(d, d_prime, delta).unwrap();
        let bound = bracket_bound(
            weighted_norm(&g, &domain.restrict(d + d_prime).unwrap()),
            weighted_norm(&gp, &domain.restrict(d_prime).unwrap()),
            &restriction,
            &domain,
        );
        let measured = weighted_norm(
            &poisson_bracket(&g, &gp).unwrap(),
            &domain.restrict(d + d_prime + delta).unwrap(),
        );
        checked += 1;
        violations += usize::from(measured > bound * slack);
    }

    for seed in 0..100u64 {
        let mut r = rng(7000 + seed);
        let domain = DomainParams::new(1.0, 1.0, 1.0).unwrap();
        let x = random_series(&mut r, dims, 2, 2, 5);
        let g = random_series(&mut r, dims, 2, 2, 5);
        let d = r.gen_range(0.1..0.9);
        let j = (seed % 5 + 1) as u32;
        let bound = multi_bracket_bound(
            j,
            weighted_norm(&x, &domain),
            weighted_norm(&g, &domain),
            d,
            &domain,
        )
        .unwrap();
        let mut iterated = g.clone();
        for _ in 0..j {
            iterated = lie_derivative(&x, &iterated).unwrap();
        }
        checked += 1;
        violations += usize::from(weighted_norm(&iterated, &domain.restrict(d).unwrap()) > bound * slack);
    }

    (
        violations == 0,
        format!(
            "Cauchy, bracket, and iterated-bracket (j <= 5) estimates on 100 random \
             instances each: {violations} violations over {checked} comparisons"
        ),
    )
}

// 6. Fourier-shell decay under the analyticity weight.
fn shell_decay() -> (bool, String) {
    let dims = Dims::new(1, 0);
    let sigma = 1.0;
    let domain = DomainParams::new(1.0, sigma, 1.0).unwrap();
    let doubled = DomainParams::new(1.0, 2.0 * sigma, 1.0).unwrap();
    let k_max = 18i32;
    let mut h1 = Series::zero(dims);
    for k in -k_max..=k_max {
        h1.insert_add(
            TermKey::harmonic(vec![k], 0),
            c(f64::exp(-2.0 * sigma * f64::from(k.abs())), 0.0),
        );
    }
    let ratio = {
        let e_half = f64::exp(-sigma / 2.0);
        (1.0 + e_half) / (1.0 - e_half)
    };
    let cap_f = ratio * weighted_norm(&h1, &doubled);

    let mut worst_ratio = 0.0_f64;
    let mut checked = 0usize;
    for k_split in [1u32, 2, 3] {
        let zeta = f64::exp(-f64::from(k_split) * sigma / 2.0);
        let shells = h1.fourier_split(k_split).unwrap();
        for (idx, shell) in shells.iter().enumerate().take(6) {
            let cap = zeta.powi(idx as i32) * cap_f;
            worst_ratio = worst_ratio.max(weighted_norm(shell, &domain) / cap);
            checked += 1;
        }
    }
    (
        worst_ratio <= 1.0,
        format!(
            "perturbation with coefficients e^{{-2 sigma |k|}}: {checked} shells over \
             K = 1, 2, 3; worst |h_s| / (zeta^{{s-1}} F) = {worst_ratio:.3}"
        ),
    )
}

// 7. The closed-form cap of the estimate recursion. Known to fail as
// stated; the recursion is verified against the proven majorant instead.
fn estimate_recursion() -> (bool, String) {
    let cat = catalan_sequence(5);
    let catalan_ok = cat == vec![1.0, 1.0, 2.0, 5.0, 14.0];

    let mut r = rng(7);
    let mut violations = Vec::new();
    let mut bad_pairs = 0usize;
    let mut majorant_ok = true;
    for _ in 0..50 {
        let c_r: f64 = r.gen_range(0.0..1.0);
        let zeta: f64 = r.gen_range(0.0..1.0);
        let (eta, _) = eta_theta_sequences(c_r, zeta, 20);
        let caps = eta_theta_cap(c_r, zeta, 20);
        let base10 = 10.0 * (c_r + zeta);
        let before = violations.len();
        for (i, (e, cap)) in eta.iter().zip(&caps).enumerate() {
            if *e > cap * (1.0 + 1e-12) {
                violations.push((c_r, zeta, i + 1, *e, *cap));
            }
            majorant_ok &= *e <= base10.powi(i as i32) / (i as f64 + 1.0) * (1.0 + 1e-9);
        }
        bad_pairs += usize::from(violations.len() > before);
    }
    // The recursion itself is sound: it must obey the provable majorant
    // with base 10(C_r + zeta), and the Catalan skeleton must be exact.
    // Only the stated base-4 cap is allowed to fail here.
    assert!(majorant_ok, "a sequence exceeded the provable majorant");
    assert!(catalan_ok, "Catalan values wrong: {cat:?}");
    let stated_ok = violations.is_empty();
    let detail = if let Some((c_r, zeta, s, e, cap)) = violations.first() {
        format!(
            "eta_s <= (4(C_r+zeta))^{{s-1}}/s fails for {bad_pairs} of 50 random pairs \
             ({} (pair, s) combinations with s <= 20), first at C_r = {c_r:.4}, \
             zeta = {zeta:.4}, s = {s}: eta = {e:.6e} > cap = {cap:.6e}; the provable \
             majorant (10(C_r+zeta))^{{s-1}}/s holds for all pairs, and the Catalan \
             values 1, 1, 2, 5, 14 are exact",
            violations.len()
        )
    } else {
        "all 50 pairs below the closed-form cap; Catalan exact".to_string()
    };
    (stated_ok, detail)
}

// 8. Measured generator norms against the certified bounds.
fn a_posteriori_domination() -> (bool, String) {
    let fixtures = [certified_pendulum(), certified_oscillator()];
    let mut certified_runs = 0usize;
    let mut dominated = true;
    let mut worst_margin = 0.0_f64;
    for (ham, params, domain) in fixtures {
        let module = resonance_module(&ham.freq).unwrap();
        let alpha = alpha_r(&ham.freq, &module, params.k_split * params.order, 50_000_000)
            .unwrap()
            .value;
        let inputs = measured_inputs(&ham, &params, &domain, alpha).unwrap();
        if !check_conditions(&inputs).unwrap().all_ok() {
            continue;
        }
        certified_runs += 1;
        let bounds = generating_bounds(&inputs).unwrap();
        let nf = relegate(&ham, &params).unwrap();
        let inner = domain.restrict(params.d).unwrap();
        for s in 0..params.order as usize {
            let psi_ratio = weighted_norm(&nf.psi[s], &inner) / bounds.psi_bounds[s];
            let x_ratio = weighted_norm(&nf.x_full[s], &inner) / bounds.x_bounds[s];
            dominated &= psi_ratio <= 1.0 && x_ratio <= 1.0;
            worst_margin = worst_margin.max(psi_ratio).max(x_ratio);
        }
    }
    let ok = certified_runs == 2 && dominated;
    (
        ok,
        format!(
            "{certified_runs}/2 fixtures inside the certified regime; measured \
             |Psi_s|, |X_s| vs b^{{s-1}}F/s and b^{{s-1}}2F/(s alpha): worst ratio {worst_margin:.3e}"
        ),
    )
}

// 9. Closed-form constants of the stability statement.
fn statement_constants() -> (bool, String) {
    let (ham, params, domain) = certified_pendulum();
    let module = trivial_module(1);
    let alpha = 1.0;
    let mut inputs = measured_inputs(&ham, &params, &domain, alpha).unwrap();

    let cert = nonresonant_certificate(&inputs, &module, 0.5, 1.0).unwrap();
    let k_opt_ok = cert.k_opt == 7;

    // r_real scales like eps^{-1/(4+2tau)} across three decades.
    let tau = 1.0;
    let mut scaling_ok = true;
    let mut worst_rel = 0.0_f64;
    for decades in 1..=3 {
        let factor = 10f64.powi(decades);
        let mut small = inputs;
        small.epsilon = inputs.epsilon / factor;
        let a = nonresonant_certificate(&inputs, &module, 0.5, tau).unwrap();
        let b = nonresonant_certificate(&small, &module, 0.5, tau).unwrap();
        let expected = factor.powf(1.0 / (4.0 + 2.0 * tau));
        let rel = ((b.r_real / a.r_real) / expected - 1.0).abs();
        worst_rel = worst_rel.max(rel);
        scaling_ok &= rel <= 1e-9;
    }

    // The certified window saturates the drift budget exactly: rate times
    // t_star is rho/4.
    inputs.epsilon = 1e-12;
    let report = check_conditions(&inputs).unwrap();
    let parts = local_stability_parts(
        big_a(&inputs),
        report.eta,
        inputs.order,
        inputs.epsilon,
        &domain,
    );
    let identity = (parts.drift_rate * parts.t_star / (domain.rho / 4.0) - 1.0).abs();
    let identity_ok = identity <= 1e-12;

    let ok = k_opt_ok && scaling_ok && identity_ok;
    (
        ok,
        format!(
            "K_opt = {} at sigma = 1 (expected 7); r_real scaling defect {worst_rel:.2e} \
             over 3 decades (tol 1e-9); rate * t_star = rho/4 to {identity:.2e} (tol 1e-12)",
            cert.k_opt
        ),
    )
}

// 10. Residual decay and the drift-rate bound on a certified run.
fn residual_and_rate() -> (bool, String) {
    let (ham, params, domain) = graded_shell_problem();
    let module = resonance_module(&ham.freq).unwrap();
    let alpha = alpha_r(&ham.freq, &module, params.k_split * params.order, 50_000_000)
        .unwrap()
        .value;
    let inputs = measured_inputs(&ham, &params, &domain, alpha).unwrap();
    let conditions = check_conditions(&inputs).unwrap();
    if !conditions.all_ok() {
        return (false, "fixture left the certified regime".into());
    }

    let points = sample_points(&domain, 0.625, ham.dims, 100, 11);
    let mut residuals = Vec::new();
    let mut within_bound = true;
    let mut final_nf = None;
    for order in 1..=params.order {
        let mut p = params.clone();
        p.order = order;
        let nf = relegate(&ham, &p).unwrap();
        let residual_series = nf.transform_residual(&ham, p.tail_buffer).unwrap();
        let mut worst = 0.0_f64;
        for pt in &points {
            worst = worst.max(evaluate_real(&residual_series, pt).unwrap().abs());
        }
        let mut at_order = inputs;
        at_order.order = order;
        within_bound &= worst <= remainder_bound(&at_order).unwrap().bound;
        residuals.push(worst);
        if order == params.order {
            final_nf = Some(nf);
        }
    }
    let monotone = residuals.windows(2).all(|w| w[1] < w[0]);

    let stability = local_stability_parts(
        big_a(&inputs),
        conditions.eta,
        inputs.order,
        inputs.epsilon,
        &domain,
    );
    let t_end = stability.t_star.min(1e3);
    let allowance = domain.rho / 8.0;
    let obs = Observables::transformed(
        &[1.0],
        &final_nf.expect("top order ran").transform(),
        params.order,
        ham.dims,
    )
    .unwrap();
    // Short enough to resolve the fastest retained harmonic (k = 21).
    let mut spec = FlowSpec::new(t_end, 0.02);
    spec.domain = Some(RealDomain::from_params(&domain, 1.0));
    let total = ham.total();
    let mut rate_ok = true;
    let mut worst_energy = 0.0_f64;
    let mut worst_excursion = 0.0_f64;
    for pt in points.iter().take(5) {
        let rec = integrate_orbit(&total, Some(&obs), pt, &spec).unwrap();
        worst_energy = worst_energy.max(rec.energy_error);
        let phi0 = rec.phi_path[0];
        for (t, phi) in rec.times.iter().zip(&rec.phi_path) {
            let excursion = (phi - phi0).abs();
            worst_excursion = worst_excursion.max(excursion);
            rate_ok &= excursion <= stability.drift_rate * t + allowance;
        }
    }
    let drift_budget = stability.drift_rate * t_end + allowance;
    let energy_ok = worst_energy <= drift_budget / 100.0;

    let ok = monotone && within_bound && rate_ok && energy_ok;
    (
        ok,
        format!(
            "residuals over 100 points for r = 1..4: {} (monotone: {monotone}, within \
             remainder bound: {within_bound}); 5 orbits to t = {t_end:.0}: max excursion \
             {worst_excursion:.2e} vs rate bound {:.2e} t + {allowance}; energy error \
             {worst_energy:.2e} <= budget/100 = {:.2e}",
            residuals
                .iter()
                .map(|v| format!("{v:.2e}"))
                .collect::<Vec<_>>()
                .join(" -> "),
            stability.drift_rate,
            drift_budget / 100.0
        ),
    )
}

// 11. Small-divisor survey against an independent enumeration.
fn divisor_survey() -> (bool, String) {
    let golden = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let cases: Vec<FrequencyVector> = vec![
        FrequencyVector::from_integers(&[1], 0.0, 0.0).unwrap(),
        FrequencyVector::from_integers(&[1, 2], 0.0, 0.0).unwrap(),
        FrequencyVector::float_with_basis(vec![1.0, golden], Vec::new(), 1e-9, 0.0, 0.0).unwrap(),
    ];
    let mut agree = true;
    let mut monotone = true;
    for freq in &cases {
        let module = resonance_module(freq).unwrap();
        let n = freq.n1();
        let mut best = f64::INFINITY;
        let mut prev = f64::INFINITY;
        for rk in 1..=8u32 {
            // Shell-by-shell enumeration of |k|_1 = rk, fused into a
            // running minimum: an independent order from the scan above.
            let m = rk as i32;
            if n == 1 {
                for k in [[m].to_vec(), [-m].to_vec()] {
                    if !freq.is_resonant(&k, &module) {
                        best = best.min(freq.dot_f64(&k).abs());
                    }
                }
            } else {
                for k1 in -m..=m {
                    let rest = m - k1.abs();
                    let tails: &[i32] = if rest == 0 { &[0] } else { &[rest, -rest] };
                    for &k2 in tails {
                        let k = vec![k1, k2];
                        if !freq.is_resonant(&k, &module) {
                            best = best.min(freq.dot_f64(&k).abs());
                        }
                    }
                }
            }
            let report = alpha_r(freq, &module, rk, 50_000_000).unwrap();
            agree &= report.value == best;
            monotone &= report.value <= prev;
            prev = report.value;
        }
    }
    (
        agree && monotone,
        format!(
            "brute-force scan vs shell-by-shell enumeration over rK <= 8 for omega = (1), \
             (1,2), (1, golden): exact agreement {agree}, non-increasing {monotone}"
        ),
    )
}

// 12. CLI determinism and round trips.
fn cli_determinism() -> (bool, String) {
    let tmp = tempfile::TempDir::new().unwrap();
    let config = r#"
[problem]
n1 = 1
omega = ["1"]
mu = 1e-3
epsilon = 1e-3

[[problem.f0]]
coeff = 0.5
p = [2]

[[problem.h1]]
coeff = 1.0
k = [1]
cosine = true

[[problem.h1]]
coeff = 0.3
k = [2]
cosine = true

[domain]
rho = 1.0
sigma = 1.0
R = 1.0

[algorithm]
K = 2
L = 2
r = 4
"#;
    let cfg_path = tmp.path().join("run.toml");
    fs::write(&cfg_path, config).unwrap();
    let run = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_releg"))
            .args(args)
            .current_dir(tmp.path())
            .output()
            .expect("binary runs")
    };
    let cfg = cfg_path.to_str().unwrap();

    for dir in ["a", "b"] {
        let out = run(&["--config", cfg, "--out", dir, "relegate"]);
        if out.status.code() != Some(2) {
            return (false, format!("relegate exited with {:?}", out.status.code()));
        }
    }
    let strip = |text: &str| -> String {
        text.lines()
            .filter(|l| !l.contains("\"timestamp\""))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let mut identical = true;
    let mut names: Vec<String> = fs::read_dir(tmp.path().join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    for name in &names {
        let a = fs::read_to_string(tmp.path().join("a").join(name)).unwrap();
        let b = fs::read_to_string(tmp.path().join("b").join(name)).unwrap();
        identical &= strip(&a) == strip(&b);
    }

    // Series text round trip is the identity.
    let x1 = fs::read_to_string(tmp.path().join("a/X_1.txt")).unwrap();
    let reparsed = series_from_str(&x1).unwrap();
    let roundtrip = series_to_string(&reparsed).unwrap() == x1;
    let loaded = load_series(tmp.path().join("a/X_1.txt")).unwrap();
    let load_matches = loaded.sub(&reparsed).unwrap().is_zero();

    // The config echoed into a certificate reproduces the certificate.
    let est = run(&["--config", cfg, "--out", "c1", "estimate"]);
    let first = fs::read_to_string(tmp.path().join("c1/certificate.json")).unwrap();
    let cert: serde_json::Value = serde_json::from_str(&first).unwrap();
    let echo = tmp.path().join("echo.json");
    fs::write(&echo, serde_json::to_string_pretty(&cert["config"]).unwrap()).unwrap();
    let est2 = run(&["--config", echo.to_str().unwrap(), "--out", "c2", "estimate"]);
    let second = fs::read_to_string(tmp.path().join("c2/certificate.json")).unwrap();
    let echo_matches = est.status.code() == est2.status.code() && strip(&first) == strip(&second);

    let ok = identical && roundtrip && load_matches && echo_matches;
    (
        ok,
        format!(
            "{} artifacts byte-identical across two runs (timestamp excluded): {identical}; \
             series serialize/parse identity: {roundtrip}; config echo re-run equality: {echo_matches}",
            names.len()
        ),
    )
}

#[test]
fn acceptance_criteria_report() {
    let checks: Vec<(&'static str, f64, bool, fn() -> (bool, String))> = vec![
        ("bracket algebra", 10.0, true, bracket_algebra),
        ("homological exactness", 5.0, true, homological_exactness),
        ("relegation chain", 60.0, false, relegation_chain),
        ("Lie-transform identity", 30.0, true, lie_transform_identity),
        ("inequality suite", 30.0, true, inequality_suite),
        ("shell decay", 5.0, true, shell_decay),
        ("estimate recursion cap", 1.0, false, estimate_recursion),
        ("a-posteriori domination", 60.0, true, a_posteriori_domination),
        ("statement constants", 1.0, true, statement_constants),
        ("residual decay + rate bound", 300.0, true, residual_and_rate),
        ("small-divisor survey", 10.0, true, divisor_survey),
        ("CLI determinism", 30.0, true, cli_determinism),
    ];

    let mut rows = Vec::new();
    for (i, (title, budget, expected, check)) in checks.into_iter().enumerate() {
        let start = Instant::now();
        let (passed, detail) = check();
        rows.push(Criterion {
            number: i + 1,
            title,
            budget,
            passed,
            expected,
            detail,
            elapsed: start.elapsed().as_secs_f64(),
        });
    }

    let mut report = String::new();
    for row in &rows {
        writeln!(
            report,
            "acceptance {:02} {} ({:.2}s of {:.0}s) {}: {}",
            row.number,
            if row.passed { "PASS" } else { "FAIL" },
            row.elapsed,
            row.budget,
            row.title,
            row.detail
        )
        .unwrap();
    }
    println!("{report}");
    let report_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../acceptance_report.txt");
    fs::write(&report_path, &report).unwrap();

    for row in &rows {
        assert!(
            row.elapsed <= row.budget,
            "criterion {} took {:.2}s, budget {:.0}s",
            row.number,
            row.elapsed,
            row.budget
        );
        assert_eq!(
            row.passed, row.expected,
            "criterion {} diverged from its documented outcome: {}",
            row.number, row.detail
        );
    }
}
