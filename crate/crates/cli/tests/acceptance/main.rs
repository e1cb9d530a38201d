//! Acceptance criteria 1 to 13. Each test prints one PASS/FAIL line.
//! Run with `cargo test -p qrl-runner --test acceptance -- --nocapture --test-threads=1` to see them in order.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::type_complexity)]

mod cli;

use std::collections::BTreeSet;
use std::fmt::Display;
use std::time::Instant;

use qrl_core::complexity::{counting_check, qk_eps, PrefixFreeMachine, Program};
use qrl_core::entropy::{
    chapter4_rate_series, eigenmass_concentration_test, entropy_rate_series, flattened_distribution, flattened_entropy,
    flattened_entropy_bound, top_k_mass, von_neumann_entropy,
};
use qrl_core::linalg::{inner, product_vector, projector_from, trace_inner, DensityMatrix, C64};
use qrl_core::measurement::{
    build_premeasure, empirical_entropy, lln_statistic, mlt_pullback, premeasure, sample, BasisGenerator,
    MeasurementSystem,
};
use qrl_core::oracles::{random_density, random_unit_pair, run_checks, Check, SweepConfig};
use qrl_core::qtests::{
    build_chapter4_mlt, chapter4_n_of_m, chapter4_projector, diagonal_mlt_conversion, evaluate, factored_trace,
    level_trace, lln_count, lln_member, solovay_to_mlt_diagonal, ClassicalMlt, ClassicalSigma, MassMeasure, Members,
    QSigmaSet, QTest, SpecialProjection, TestKind,
};
use qrl_core::rng::rng_for;
use qrl_core::states::{
    bernoulli_prefix, chapter4_block, chapter4_prefix, check_coherence, classical_prefix, diagonal_f_prefix,
    tracial_prefix, DensityFn, StatePrefix,
};
use qrl_core::{BitString, Rational};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha20Rng;

fn verdict(id: u32, what: &str, ok: bool, detail: impl Display) {
    println!("criterion {id:>2} {}: {what} [{detail}]", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {id} failed: {what} [{detail}]");
}

fn r(s: &str) -> Rational {
    s.parse().unwrap()
}

fn random_bits(rng: &mut ChaCha20Rng, n: usize) -> BitString {
    BitString((0..n).map(|_| rng.gen_bool(0.5)).collect())
}

fn gauss(rng: &mut ChaCha20Rng) -> C64 {
    let u: f64 = rng.gen::<f64>().max(1e-300);
    let v: f64 = rng.gen();
    C64::from_polar((-u.ln()).sqrt(), std::f64::consts::TAU * v)
}

/// k orthonormal vectors in ℂ^dim by Gram-Schmidt on Gaussian columns.
fn random_orthonormal(dim: usize, k: usize, rng: &mut ChaCha20Rng) -> Vec<Vec<C64>> {
    let mut out: Vec<Vec<C64>> = Vec::new();
    while out.len() < k {
        let mut v: Vec<C64> = (0..dim).map(|_| gauss(rng)).collect();
        for _ in 0..2 {
            for u in &out {
                let c = inner(u, &v);
                for (x, y) in v.iter_mut().zip(u) {
                    *x -= c * y;
                }
            }
        }
        let nv = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if nv > 1e-8 {
            out.push(v.into_iter().map(|x| x / nv).collect());
        }
    }
    out
}

fn random_system(rng: &mut ChaCha20Rng, qubits: usize) -> [MeasurementSystem; 4] {
    let periodic =
        MeasurementSystem::new(BasisGenerator::Periodic { vectors: (0..3).map(|_| random_unit_pair(rng)).collect() })
            .unwrap();
    let explicit = MeasurementSystem::new(BasisGenerator::Explicit {
        bases: (0..qubits)
            .map(|_| {
                let v = random_unit_pair(rng);
                [v, [-v[1].conj(), v[0].conj()]]
            })
            .collect(),
    })
    .unwrap();
    [MeasurementSystem::standard(), MeasurementSystem::hadamard(), periodic, explicit]
}

#[test]
fn c01_coherence_suite() {
    let t0 = Instant::now();
    let mut rng = rng_for(101, 0);
    let mut states: Vec<(String, StatePrefix)> = Vec::new();
    for n in 1..=11 {
        states.push((format!("tracial N={n}"), tracial_prefix(n).unwrap()));
    }
    let x = random_bits(&mut rng, 20);
    for n in 1..=20 {
        states.push((format!("classical N={n}"), classical_prefix(&x, n).unwrap()));
    }
    for p in [0.1, 0.25, 0.5, 0.9] {
        states.push((format!("bernoulli p={p} N=16"), bernoulli_prefix(p, 16).unwrap()));
    }
    for n in [5, 6] {
        states.push((format!("chapter4 N={n}"), chapter4_prefix(n).unwrap()));
    }
    states.push(("chapter4 N=16".into(), chapter4_prefix(16).unwrap()));
    for f in [DensityFn::F1, DensityFn::F2] {
        states.push((format!("diagonal {f:?} N=20"), diagonal_f_prefix(f, 20).unwrap()));
    }
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    for (label, s) in &states {
        let rep = check_coherence(s);
        worst = worst.max(rep.max_deviation);
        if !rep.pass || rep.levels.len() + 1 != s.depth().max(1) {
            bad.push(label.clone());
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        1,
        "partial-trace coherence of every builder at every level",
        bad.is_empty() && worst <= 1e-10 && secs < 60.0,
        format!("{} states, max deviation {worst:.2e}, failures {bad:?}, {secs:.1}s", states.len()),
    );
}

#[test]
fn c02_d3_matches_display() {
    let d3 = chapter4_block(3).unwrap();
    let e = 0.125;
    let mut want = [[0.0f64; 8]; 8];
    for i in 0..8 {
        want[i][i] = e;
    }
    for (i, j) in [(0, 7), (1, 6), (6, 1), (7, 0)] {
        want[i][j] = e;
    }
    let mut mismatches = 0;
    for i in 0..8 {
        for j in 0..8 {
            if d3.matrix().get(i, j) != C64::new(want[i][j], 0.0) {
                mismatches += 1;
            }
        }
    }
    let r3 = qrl_core::states::r_n(3);
    verdict(
        2,
        "d_3 entry-for-entry and r_3 = 2",
        mismatches == 0 && r3 == 2,
        format!("{mismatches} mismatches, r_3 = {r3}"),
    );
}

#[test]
fn c03_chapter4_detection() {
    let t0 = Instant::now();
    let mut ok = true;
    let mut detail = Vec::new();
    let mut m = 0;
    while chapter4_n_of_m(m) <= 16 {
        let big_n = chapter4_n_of_m(m);
        let t = build_chapter4_mlt(m, 16).unwrap();
        let product: f64 = (5..=big_n).map(|n| 1.0 - ((1u64 << n) / n as u64) as f64 / (1u64 << n) as f64).product();
        let state = chapter4_prefix(big_n).unwrap();
        let Members::Sets(sets) = t.test.members() else { unreachable!() };
        let tr = evaluate(&state, &sets[m]).unwrap();
        let p = chapter4_projector(big_n).unwrap();
        let tr2 = factored_trace(&state, &p).unwrap();
        let good = (t.tau - product).abs() <= 1e-15
            && t.tau < 2f64.powi(-(m as i32))
            && (tr - 1.0).abs() <= 1e-9
            && (tr2 - 1.0).abs() <= 1e-9;
        ok &= good;
        detail.push(format!("m={m} N={big_n} tau={:.6} trace={tr:.12}", t.tau));
        m += 1;
    }
    ok &= m == 2;
    let state = chapter4_prefix(6).unwrap();
    let p = chapter4_projector(6).unwrap();
    let dense = trace_inner(state.level(11).unwrap(), &p.to_matrix().unwrap()).unwrap();
    let factored = factored_trace(&state, &p).unwrap();
    let dev = (dense - factored).abs();
    ok &= dev <= 1e-10;
    let secs = t0.elapsed().as_secs_f64();
    ok &= secs < 30.0;
    verdict(
        3,
        "T_m has tau < 2^-m and captures all trace mass",
        ok,
        format!("{}; dense vs factored at N=6 {dev:.1e}; {secs:.1}s", detail.join(", ")),
    );
}

/// Binomial row by Pascal's rule.
fn pascal(n: usize) -> Vec<u128> {
    let mut row = vec![1u128];
    for _ in 0..n {
        let mut next = vec![1u128; row.len() + 1];
        for k in 1..row.len() {
            next[k] = row[k - 1] + row[k];
        }
        row = next;
    }
    row
}

#[test]
fn c04_lln_bound() {
    let t0 = Instant::now();
    let delta = r("1/5");
    let mut ok = true;
    let mut worst = f64::INFINITY;
    for n in 1..=64usize {
        // k > n(1/2 + 1/10) ⇔ 5k > 3n
        let count: u128 = pascal(n).iter().enumerate().filter(|(k, _)| 5 * k > 3 * n).map(|(_, c)| *c).sum();
        let lib = lln_count(&delta, n).to_string();
        let member = lln_member(&delta, n).unwrap().rank().to_string();
        ok &= lib == count.to_string() && member == lib;
        let mass = count as f64 / 2f64.powi(n as i32);
        let bound = 2.0 * (-0.5 * n as f64 * 0.04).exp();
        worst = worst.min(bound - mass);
        ok &= mass <= bound;
    }
    ok &= lln_count(&delta, 20).to_string() == "137980";
    let tau = tracial_prefix(11).unwrap();
    let exact = (1..=11).all(|n| lln_statistic(tau.level(n).unwrap()) == 0.5);
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        4,
        "2^-n|C_n| <= 2exp(-n delta^2/2) for n <= 64 and lln_statistic(tau_n) = 1/2",
        ok && exact && secs < 5.0,
        format!("min slack {worst:.3e}, |C_20| = 137980, {secs:.2}s"),
    );
}

fn h2(p: f64) -> f64 {
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

#[test]
fn c05_smb_identity() {
    let t0 = Instant::now();
    let mut ok = true;
    let mut detail = Vec::new();
    for p in [0.1, 0.25, 0.4] {
        let h = h2(p);
        let s = bernoulli_prefix(p, 20).unwrap();
        let worst =
            (1..=20).map(|n| (empirical_entropy(s.level(n).unwrap(), p).unwrap() - h).abs()).fold(0.0, f64::max);
        ok &= worst <= 1e-9;
        let n = 10_000;
        let big = bernoulli_prefix(p, n).unwrap();
        let b = MeasurementSystem::standard();
        let (lp, lq) = (p.log2(), (1.0 - p).log2());
        let mut total = 0.0;
        for seed in 0..1000u64 {
            let x = sample(&big, &b, n, 50_000 + seed).unwrap();
            total += -(x.zeros() as f64 * lp + x.ones() as f64 * lq) / n as f64;
        }
        let mean = total / 1000.0;
        ok &= (mean - h).abs() <= 0.02;
        detail.push(format!("p={p}: identity dev {worst:.1e}, sampled mean {mean:.5} vs h {h:.5}"));
    }
    let secs = t0.elapsed().as_secs_f64();
    ok &= secs < 120.0;
    verdict(
        5,
        "n^-1 Tr(mu_n L_n) = h(p) and sampled -log mu / n near h(p)",
        ok,
        format!("{}; {secs:.1}s", detail.join("; ")),
    );
}

#[test]
fn c06_theorem_oracles() {
    let t0 = Instant::now();
    let cfg = SweepConfig::default();
    let sizes_ok = cfg.lina_families >= 50
        && cfg.lina_samples >= 200
        && cfg.lemma30_trials >= 1000
        && cfg.kron_trials >= 100
        && cfg.dn_trials >= 1000
        && cfg.atomic_trials >= 200;
    let outcomes = run_checks(Check::All, 2024, &cfg).unwrap();
    let summary: Vec<String> =
        outcomes.iter().map(|o| format!("{} {}/{} violations", o.name, o.violations, o.trials)).collect();
    let kron_ok = outcomes.iter().find(|o| o.name == "kron_antidiagonal").is_some_and(|o| o.worst_margin >= 0.0);
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        6,
        "lina, lemma30, kron, d_n quadform and atomic probe oracles",
        sizes_ok && outcomes.len() == 5 && outcomes.iter().all(|o| o.passed()) && kron_ok && secs < 300.0,
        format!("{}; {secs:.1}s", summary.join(", ")),
    );
}

#[test]
fn c07_top_k_bound() {
    let mut exceptions = 0;
    let mut worst = f64::INFINITY;
    for n in 1..=8usize {
        let dim = 1usize << n;
        let mut rng = rng_for(707, n as u64);
        for _ in 0..500 {
            let rho = DensityMatrix::new(random_density(dim, &mut rng)).unwrap();
            let k = rng.gen_range(1..=dim);
            let g = projector_from(dim, &random_orthonormal(dim, k, &mut rng)).unwrap();
            let lhs = trace_inner(&rho, &g).unwrap();
            let rhs = top_k_mass(&rho, k).unwrap();
            worst = worst.min(rhs - lhs);
            if lhs > rhs + 1e-10 {
                exceptions += 1;
            }
        }
    }
    verdict(
        7,
        "Tr(rho G) <= top-k eigenvalue mass, 500 pairs per n <= 8",
        exceptions == 0,
        format!("{exceptions} exceptions, min slack {worst:.2e}"),
    );
}

fn block_entropy(n: usize) -> f64 {
    n as f64 - ((1u64 << n) / n as u64) as f64 * 2f64.powi(1 - n as i32)
}

#[test]
fn c08_entropy() {
    let mut ok = true;
    let mut notes = Vec::new();
    let tau = tracial_prefix(11).unwrap();
    let dev =
        (1..=11).map(|n| (von_neumann_entropy(tau.level(n).unwrap()).unwrap() - n as f64).abs()).fold(0.0, f64::max);
    ok &= dev <= 1e-8;
    notes.push(format!("H(tau_n) dev {dev:.1e}"));

    let dev = (3..=12)
        .map(|n| (von_neumann_entropy(&chapter4_block(n).unwrap()).unwrap() - block_entropy(n)).abs())
        .fold(0.0, f64::max);
    ok &= dev <= 1e-8;
    notes.push(format!("H(d_n) dev {dev:.1e}"));

    let series = chapter4_rate_series(20).unwrap();
    let mut closed = Vec::new();
    let (mut h, mut g) = (0.0, 0.0);
    for n in 5..=20 {
        h += block_entropy(n);
        g += n as f64;
        closed.push(h / g);
    }
    let dev = series.iter().zip(&closed).map(|((_, a), b)| (a - b).abs()).fold(0.0, f64::max);
    let tail: Vec<f64> = series.iter().filter(|(n, _)| *n >= 7).map(|r| r.1).collect();
    let increasing = tail.windows(2).all(|w| w[1] > w[0]);
    ok &= dev <= 1e-9 && increasing;
    notes.push(format!("rate increasing over 7..20: {increasing}, rate(20) = {:.6}", series.last().unwrap().1));

    let f2 = diagonal_f_prefix(DensityFn::F2, 20).unwrap();
    let rep = entropy_rate_series(&f2).unwrap();
    let sup = rep.rows.iter().map(|r| r.excess.abs()).fold(0.0, f64::max);
    let mut riemann_dev = 0.0f64;
    for row in &rep.rows {
        let n = row.n;
        let mesh = 2f64.powi(-(n as i32));
        // each cell is tagged at its mean-value point, where f equals the cell average
        let riemann: f64 = f2
            .level(n)
            .unwrap()
            .diagonal_weights()
            .iter()
            .map(|&w| {
                let fx = w / mesh;
                if fx > 0.0 {
                    -fx * fx.log2() * mesh
                } else {
                    0.0
                }
            })
            .sum();
        riemann_dev = riemann_dev.max((row.excess - riemann).abs());
    }
    ok &= sup <= 1.0 && riemann_dev <= 1e-6;
    notes.push(format!("f2 sup|H-n| = {sup:.4}, Riemann dev {riemann_dev:.1e}"));

    let f1 = diagonal_f_prefix(DensityFn::F1, 20).unwrap();
    let rep = entropy_rate_series(&f1).unwrap();
    ok &= rep.excess_strictly_decreasing && rep.rows.len() == 20;
    notes.push(format!(
        "f1 H-n strictly decreasing: {}, H_20 - 20 = {:.4}",
        rep.excess_strictly_decreasing, rep.rows[19].excess
    ));

    verdict(
        8,
        "entropy values, chapter-4 monotone rate, f2 bounded excess, f1 decreasing excess",
        ok,
        notes.join("; "),
    );
}

#[test]
fn c08_chapter4_rate_above_0_99_at_n20() {
    let series = chapter4_rate_series(20).unwrap();
    let (n, rate) = *series.last().unwrap();
    verdict(8, "chapter-4 entropy rate at N=20 exceeds 0.99", n == 20 && rate > 0.99, format!("rate(20) = {rate:.6}"));
}

#[test]
fn c09_flattened_bound() {
    let mut states: Vec<(&str, StatePrefix)> = vec![
        ("tracial", tracial_prefix(11).unwrap()),
        ("chapter4", chapter4_prefix(6).unwrap()),
        ("f1", diagonal_f_prefix(DensityFn::F1, 12).unwrap()),
        ("f2", diagonal_f_prefix(DensityFn::F2, 12).unwrap()),
    ];
    states.push(("bernoulli", bernoulli_prefix(0.2, 12).unwrap()));
    let mut checked = 0;
    let mut bad = Vec::new();
    for (label, s) in &states {
        for n in 1..=s.materialized_depth().min(12) {
            let rho = s.level(n).unwrap();
            let h = von_neumann_entropy(rho).unwrap();
            for m in 0..=4usize.min(n - 1) {
                let b = flattened_entropy_bound(rho, m).unwrap();
                checked += 1;
                if !(b.holds && h <= 1.0 - m as f64 * b.s + n as f64 + 1e-8) {
                    bad.push(format!("{label} n={n} m={m}"));
                }
                if m == 0 {
                    continue;
                }
                let rdist = flattened_distribution(rho, m).unwrap();
                let sum: f64 = rdist.iter().sum();
                let hr: f64 = rdist.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum();
                let closed = flattened_entropy(b.s, m, n);
                if (sum - 1.0).abs() > 1e-9 || (hr - closed).abs() > 1e-9 || h > hr + 1e-8 || hr > b.bound + 1e-8 {
                    bad.push(format!("{label} n={n} m={m} flattened"));
                }
            }
        }
    }
    verdict(
        9,
        "H(rho_n) <= 1 - m S + n with the flattened distribution in between",
        bad.is_empty(),
        format!("{checked} cases, failures {bad:?}"),
    );
}

/// Upward-closed sets A^m_i, i = m+1..=top, with |A^m_i| <= 2^{i-m}.
fn random_classical_member(rng: &mut ChaCha20Rng, m: usize, top: usize) -> ClassicalSigma {
    let mut levels = Vec::new();
    let mut cur: BTreeSet<usize> = BTreeSet::from([rng.gen_range(0..1usize << (m + 1))]);
    levels.push((m + 1, cur.clone()));
    for i in m + 2..=top {
        let mut next: BTreeSet<usize> = cur.iter().flat_map(|&s| [2 * s, 2 * s + 1]).collect();
        if next.len() < 1usize << (i - m) {
            next.insert(rng.gen_range(0..1usize << i));
        }
        levels.push((i, next.clone()));
        cur = next;
    }
    ClassicalSigma::from_strings(
        levels.into_iter().map(|(i, s)| (i, s.into_iter().map(|x| BitString::from_index(i, x)).collect())).collect(),
    )
    .unwrap()
}

#[test]
fn c10_measurement() {
    let mut ok = true;
    let mut notes = Vec::new();
    let mut rng = rng_for(1010, 0);

    let x = random_bits(&mut rng, 11);
    let states = [
        tracial_prefix(11).unwrap(),
        classical_prefix(&x, 11).unwrap(),
        bernoulli_prefix(0.3, 11).unwrap(),
        chapter4_prefix(6).unwrap(),
        diagonal_f_prefix(DensityFn::F1, 11).unwrap(),
        diagonal_f_prefix(DensityFn::F2, 11).unwrap(),
    ];
    let systems = random_system(&mut rng, 11);
    let mut worst = 0.0f64;
    for s in &states {
        for b in &systems {
            let t = build_premeasure(s, b, 11).unwrap();
            worst = worst.max(t.max_additivity_deviation).max((t.level(0)[0] - 1.0).abs());
        }
    }
    ok &= worst <= 1e-10;
    notes.push(format!("additivity {worst:.1e} over {} tables", states.len() * systems.len()));

    let trials = 100_000u64;
    let mut max_z = 0.0f64;
    for (s, b, depth) in [(&states[3], &systems[2], 5usize), (&states[2], &systems[1], 4), (&states[5], &systems[3], 4)]
    {
        let table = build_premeasure(s, b, depth).unwrap();
        let mut counts = vec![0u64; 1 << depth];
        for seed in 0..trials {
            counts[sample(s, b, depth, 900_000 + seed).unwrap().index()] += 1;
        }
        for (i, k) in counts.iter().enumerate() {
            let p = table.level(depth)[i];
            let sd = (p * (1.0 - p) / trials as f64).sqrt();
            let diff = (*k as f64 / trials as f64 - p).abs();
            if diff > 5.0 * sd + 1e-12 {
                ok = false;
            }
            if sd > 0.0 {
                max_z = max_z.max(diff / sd);
            }
        }
    }
    notes.push(format!("max cylinder z-score {max_z:.2}"));

    let y = random_bits(&mut rng, 40);
    let rho_x = classical_prefix(&y, 40).unwrap();
    let det = (0..20).all(|seed| sample(&rho_x, &MeasurementSystem::standard(), 40, seed).unwrap() == y)
        && sample(&states[3], &systems[1], 11, 5).unwrap() == sample(&states[3], &systems[1], 11, 5).unwrap();
    ok &= det;
    notes.push(format!("rho_X sampling deterministic: {det}"));

    let members: Vec<ClassicalSigma> = (1..=3).map(|m| random_classical_member(&mut rng, m, m + 5)).collect();
    let mlt = ClassicalMlt { first_index: 1, members };
    mlt.validate().unwrap();
    let mut exact = true;
    for b in &systems {
        let q = mlt_pullback(&mlt, b).unwrap();
        let Members::Sets(sets) = q.members() else { unreachable!() };
        for (a, g) in mlt.members.iter().zip(sets) {
            for (&i, set) in &a.levels {
                let p = g.level(i).unwrap();
                exact &= p.rank().to_string() == set.len().to_string();
                exact &= p.tau() == set.len() as f64 / (1u64 << i) as f64;
            }
        }
    }
    ok &= exact;
    notes.push(format!("pullback tau exact: {exact}"));

    // failing instances: rho_X in the standard basis, chapter-4 in the Hadamard basis
    let mut chain_dev = 0.0f64;
    let mut chain_ok = true;
    let z = random_bits(&mut rng, 8);
    let c4 = chapter4_prefix(6).unwrap();
    let instances: Vec<(StatePrefix, MeasurementSystem)> =
        vec![(classical_prefix(&z, 8).unwrap(), MeasurementSystem::standard()), (c4, MeasurementSystem::hadamard())];
    let level = 8;
    for (s, b) in &instances {
        let table = build_premeasure(s, b, level).unwrap();
        let mut order: Vec<usize> = (0..1usize << level).collect();
        order.sort_by(|&i, &j| table.level(level)[j].total_cmp(&table.level(level)[i]).then(i.cmp(&j)));
        for m in 2..=4usize {
            let a: Vec<BitString> =
                order[..1usize << (level - m)].iter().map(|&i| BitString::from_index(level, i)).collect();
            let mass: f64 = a.iter().map(|t| premeasure(s, b, t).unwrap()).sum();
            let delta = 0.9 * mass;
            let rank_one: f64 = a
                .iter()
                .map(|t| {
                    let factors: Vec<[C64; 2]> =
                        (0..level).map(|q| b.basis(q + 1).unwrap()[t.bit(q) as usize]).collect();
                    s.level(level).unwrap().matrix().quad_form(&product_vector(&factors)).unwrap().re
                })
                .sum();
            let classical = ClassicalMlt {
                first_index: m,
                members: vec![ClassicalSigma::from_strings(vec![(level, a.clone())]).unwrap()],
            };
            let q = mlt_pullback(&classical, b).unwrap();
            let Members::Sets(sets) = q.members() else { unreachable!() };
            let tr = level_trace(s, sets[0].level(level).unwrap()).unwrap();
            let sup = evaluate(s, &sets[0]).unwrap();
            chain_dev = chain_dev.max((mass - rank_one).abs()).max((rank_one - tr).abs());
            chain_ok &= delta < mass && tr <= sup + 1e-12;
        }
    }
    ok &= chain_ok && chain_dev <= 1e-12;
    notes.push(format!("pullback chain deviation {chain_dev:.1e}"));

    verdict(10, "premeasure additivity, sampler frequencies, determinism, pullback", ok, notes.join("; "));
}

/// Random prefix-free machine: leaves of a random binary tree, each with a random orthonormal output.
fn random_machine(rng: &mut ChaCha20Rng, dims: std::ops::RangeInclusive<usize>) -> PrefixFreeMachine {
    let mut leaves: Vec<BitString> = vec![BitString::new()];
    let splits = rng.gen_range(1..=12);
    for _ in 0..splits {
        let i = rng.gen_range(0..leaves.len());
        let l = leaves.swap_remove(i);
        leaves.push(l.pushed(false));
        leaves.push(l.pushed(true));
    }
    leaves.shuffle(rng);
    let keep = rng.gen_range(1..=leaves.len());
    let programs = leaves[..keep]
        .iter()
        .map(|sigma| {
            let q = rng.gen_range(dims.clone());
            let dim = 1usize << q;
            let k = rng.gen_range(1..=dim.min(16));
            Program { sigma: sigma.clone(), dim_qubits: q, vectors: random_orthonormal(dim, k, rng) }
        })
        .collect();
    PrefixFreeMachine { programs, declared_measure: None }
}

#[test]
fn c11_complexity() {
    let mut rng = rng_for(1111, 0);
    let mut ok = true;
    let mut notes = Vec::new();

    let mut caught = 0;
    let mut seeded = 0;
    for _ in 0..20 {
        let m = random_machine(&mut rng, 1..=3);
        ok &= m.validate().valid;
        let p0 = m.programs[0].clone();
        let mut negatives: Vec<PrefixFreeMachine> = Vec::new();
        let mut ext = m.clone();
        ext.programs.push(Program { sigma: p0.sigma.pushed(true), ..p0.clone() });
        negatives.push(ext);
        let mut dup = m.clone();
        dup.programs.push(p0.clone());
        negatives.push(dup);
        let mut skew = m.clone();
        skew.programs[0].vectors[0] = skew.programs[0].vectors[0].iter().map(|x| x * 1.1).collect();
        negatives.push(skew);
        let mut wrong_dim = m.clone();
        wrong_dim.programs[0].vectors[0].push(C64::new(0.0, 0.0));
        negatives.push(wrong_dim);
        let mut declared = m.clone();
        declared.declared_measure = Some(m.kraft_sum() + 0.125);
        negatives.push(declared);
        for neg in &negatives {
            seeded += 1;
            if !neg.validate().valid {
                caught += 1;
            }
        }
    }
    let over = PrefixFreeMachine {
        programs: ["0", "1", "00"]
            .iter()
            .map(|s| Program {
                sigma: s.parse().unwrap(),
                dim_qubits: 1,
                vectors: vec![vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]],
            })
            .collect(),
        declared_measure: None,
    };
    let rep = over.validate();
    seeded += 1;
    if !rep.kraft_ok && !rep.prefix_free {
        caught += 1;
    }
    ok &= caught == seeded;
    notes.push(format!("caught {caught}/{seeded} seeded negatives"));

    let mut exceptions = 0;
    let mut finite = 0;
    for _ in 0..50 {
        let m = random_machine(&mut rng, 1..=8);
        for n in 1..=8 {
            let tau = DensityMatrix::maximally_mixed(n);
            for eps in [0.1, 0.25, 0.5, 0.9] {
                let q = qk_eps(&m, &tau, eps).unwrap();
                if q.is_finite() {
                    finite += 1;
                }
                if q < n as f64 + eps.log2() - 1e-12 {
                    exceptions += 1;
                }
            }
        }
    }
    ok &= exceptions == 0 && finite > 0;
    notes.push(format!("tracial lower bound: {exceptions} exceptions, {finite} finite values"));

    let mut passes = 0;
    for _ in 0..100 {
        let m = random_machine(&mut rng, 1..=3);
        let s = rng.gen_range(1..=3);
        let big_b = rng.gen_range(1.0..8.0);
        let eps = rng.gen_range(0.1..0.9);
        let rep = counting_check(&m, s, big_b, eps).unwrap();
        let mut good = rep.pass && rep.found as f64 <= 2f64.powf(big_b) / eps;
        for (i, v) in rep.vectors.iter().enumerate() {
            for w in &rep.vectors[i..] {
                let want = if std::ptr::eq(v, w) { 1.0 } else { 0.0 };
                good &= (inner(v, w).norm() - want).abs() < 1e-8;
            }
            good &= qk_eps(&m, &DensityMatrix::pure(v).unwrap(), eps).unwrap() <= big_b;
        }
        if good {
            passes += 1;
        }
    }
    ok &= passes == 100;
    notes.push(format!("counting check {passes}/100"));

    verdict(11, "machine validation, tracial QK lower bound, counting check", ok, notes.join("; "));
}

fn diagonal_set(n: usize, idx: &[usize]) -> QSigmaSet {
    QSigmaSet::single(SpecialProjection::diagonal(n, idx).unwrap())
}

#[test]
fn c12_diagonal_conversions() {
    let mut ok = true;
    let mut notes = Vec::new();

    // instances failing a q-MLT: the f1 eigenmass test and rho_X against its own prefixes
    let delta = r("3/10");
    let f1 = diagonal_f_prefix(DensityFn::F1, 18).unwrap();
    let em = eigenmass_concentration_test(&f1, &r("1/2"), &delta, 6).unwrap().expect("f1 fails the eigenmass test");
    let mut instances: Vec<(StatePrefix, QTest, Rational, Vec<(usize, usize)>)> =
        vec![(f1, em.test.clone(), delta, em.witnesses.iter().map(|w| (w.m, w.n)).collect())];
    let mut rng = rng_for(1212, 0);
    let x = random_bits(&mut rng, 12);
    let sets: Vec<QSigmaSet> = (1..=10).map(|m| diagonal_set(m, &[x.prefix(m).index()])).collect();
    let test = QTest::new(TestKind::Mlt, 1, Members::Sets(sets), None, MassMeasure::Tracial).unwrap();
    instances.push((classical_prefix(&x, 12).unwrap(), test, r("1/2"), (1..=10).map(|m| (m, m)).collect()));

    let mut members_checked = 0;
    for (state, g, delta, witnesses) in &instances {
        let d = delta.to_f64();
        let c = diagonal_mlt_conversion(g, delta).unwrap();
        for &(m, n) in witnesses {
            let Members::Sets(gs) = g.members() else { unreachable!() };
            let j = m - g.first_index();
            ok &= level_trace(state, gs[j].level(n).unwrap()).unwrap() > d;
            let cm = &c.members[j];
            let captured = cm.mass_under(state, n).unwrap();
            let measure = cm.lebesgue_union();
            ok &= captured >= 0.75 * d && measure < 4.0 / d * 2f64.powi(-(m as i32));
            members_checked += 1;
        }
    }
    notes.push(format!("C^m checked on {members_checked} members"));

    let delta = r("1/4");
    let n = 10;
    let mut worst = f64::INFINITY;
    for (label, state) in
        [("bernoulli", bernoulli_prefix(0.3, n).unwrap()), ("f2", diagonal_f_prefix(DensityFn::F2, n).unwrap())]
    {
        let w = state.level(n).unwrap().diagonal_weights();
        for m in 1..=3usize {
            let sets: Vec<QSigmaSet> = (0..1usize << m)
                .map(|_| {
                    let mut idx: Vec<usize> = (0..1usize << n).collect();
                    idx.shuffle(&mut rng);
                    let mut mass = 0.0;
                    let mut chosen = Vec::new();
                    for i in idx {
                        chosen.push(i);
                        mass += w[i];
                        if mass > 0.25 {
                            break;
                        }
                    }
                    diagonal_set(n, &chosen)
                })
                .collect();
            let s = QTest::new(TestKind::Solovay, 1, Members::Sets(sets.clone()), None, MassMeasure::Tracial).unwrap();
            ok &= sets.iter().all(|g| level_trace(&state, g.level(n).unwrap()).unwrap() > 0.25);
            let j = solovay_to_mlt_diagonal(&s, &delta, m).unwrap();
            let mass = j.mass_under(&state, n).unwrap();
            worst = worst.min(mass - 0.125);
            if !(mass > 0.125) {
                ok = false;
                notes.push(format!("{label} m={m}: mu(J) = {mass}"));
            }
        }
    }
    notes.push(format!("J^m min slack over delta/2: {worst:.4}"));

    verdict(12, "diagonal conversions C^m and J^m keep the promised mass", ok, notes.join("; "));
}

#[test]
fn c13_cli_determinism() {
    let t0 = Instant::now();
    let (a, b) = (cli::workspace(), cli::workspace());
    let mut differing = Vec::new();
    let mut failed = Vec::new();
    for args in cli::COMMANDS {
        let x = cli::qrl(a.path(), args);
        let y = cli::qrl(b.path(), args);
        if !x.status.success() || x.stdout.is_empty() {
            failed.push(args.join(" "));
        }
        if x.stdout != y.stdout {
            differing.push(args.join(" "));
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        13,
        "every CLI command is byte-reproducible under a fixed seed",
        differing.is_empty() && failed.is_empty(),
        format!("{} commands run twice, differing {differing:?}, failed {failed:?}, {secs:.1}s", cli::COMMANDS.len()),
    );
}
