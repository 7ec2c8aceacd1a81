//! End-to-end acceptance suite.
//!
//! Each test exercises one shipped guarantee end to end and prints a single
//! `acceptance <label>: PASS/FAIL — <numbers>` line (visible with
//! `--nocapture`). Budgets are asserted where a test carries one; they are
//! sized for a debug build on a single core.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use steinchen::bootstrap::{
    drive, estimate_rho, m_t, mc_t_distribution, percolation_run, regime_classify, Regime,
    TorusState, UpdateEngine,
};
use steinchen::bounds::{
    barbour_hall_lower, classical_bounds, local_bounds, monotone_coupling_bound, size_bias_bound,
    sum_of_squares, IndicatorSystem, MonotoneRelation,
};
use steinchen::dist::{
    binomial_pmf, cp_pmf_convolution, cp_pmf_panjer, poisson_pmf, tv_distance, CompoundSpec,
};
use steinchen::oracle::{exact_size_bias_gap, exact_tv_to_poisson, exact_variance, JointTable};
use steinchen::seq::{
    ap_index_count, ap_index_count_brute, ap_mc_estimate, ap_overlap_profile,
    ap_threshold_from_offset, headrun_bound, headrun_enumerate, headrun_exact,
    headrun_exact_tail, ApModel, HeadRunModel,
};
use steinchen::stein::{verify_cp_solution_bounds, verify_poisson_solution_bounds};

fn report(label: &str, ok: bool, detail: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!("acceptance {label}: {verdict} — {detail}");
    assert!(ok, "acceptance {label}: {detail}");
}

// ---------------------------------------------------------------------------
// 1. Exact total variation is dominated by every applicable upper bound.
// ---------------------------------------------------------------------------

/// Normalizes a positive weight vector into a probability vector whose sum
/// is exactly 1 up to one ulp, by folding the rounding residue into the
/// heaviest entry.
fn normalize(mut w: Vec<f64>) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    let resid = 1.0 - w.iter().sum::<f64>();
    let heaviest = (0..w.len())
        .max_by(|&a, &b| w[a].total_cmp(&w[b]))
        .expect("nonempty weights");
    w[heaviest] += resid;
    w
}

/// A fully specified small system together with what is claimed about it.
struct TestSystem {
    table: JointTable,
    hoods: Vec<Vec<usize>>,
    /// Marginals are independent (classical bounds and trivial monotone
    /// couplings apply).
    independent: bool,
    kind: &'static str,
}

fn independent_case(rng: &mut ChaCha8Rng, n: usize) -> TestSystem {
    let ps: Vec<f64> = (0..n).map(|_| 0.02 + 0.40 * rng.random::<f64>()).collect();
    TestSystem {
        table: JointTable::independent(&ps).expect("product table"),
        hoods: (0..n).map(|a| vec![a]).collect(),
        independent: true,
        kind: "independent",
    }
}

/// Product of dense joint blocks of size at most 3; the block members are
/// each indicator's dependence neighbourhood, so the residual term of the
/// local bound vanishes while pair correlations inside blocks are arbitrary.
fn block_product_case(rng: &mut ChaCha8Rng, n: usize) -> TestSystem {
    let mut blocks: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    while start < n {
        let size = (1 + rng.random_range(0..3usize)).min(n - start);
        blocks.push((start, size));
        start += size;
    }
    let block_laws: Vec<Vec<f64>> = blocks
        .iter()
        .map(|&(_, s)| {
            normalize(
                (0..1usize << s)
                    .map(|_| 0.05 + 0.95 * rng.random::<f64>())
                    .collect(),
            )
        })
        .collect();
    let mut dense = vec![0.0f64; 1 << n];
    for (mask, slot) in dense.iter_mut().enumerate() {
        let mut p = 1.0;
        for (law, &(st, s)) in block_laws.iter().zip(&blocks) {
            p *= law[(mask >> st) & ((1 << s) - 1)];
        }
        *slot = p;
    }
    let mut hoods = vec![Vec::new(); n];
    for &(st, s) in &blocks {
        for a in st..st + s {
            hoods[a] = (st..st + s).collect();
        }
    }
    TestSystem {
        table: JointTable::from_dense(normalize(dense)).expect("block product table"),
        hoods,
        independent: false,
        kind: "block-product",
    }
}

/// Exponentially tilted product law with nearest-neighbour ring
/// interactions of random sign. The declared ring neighbourhoods are
/// deliberately too small — the chain is not independent beyond distance
/// one — so the residual term of the local bound is genuinely positive.
fn tilted_ring_case(rng: &mut ChaCha8Rng, n: usize) -> TestSystem {
    let ps: Vec<f64> = (0..n).map(|_| 0.05 + 0.40 * rng.random::<f64>()).collect();
    let js: Vec<f64> = (0..n).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
    let mut dense = vec![0.0f64; 1 << n];
    for (mask, slot) in dense.iter_mut().enumerate() {
        let mut logw = 0.0;
        for a in 0..n {
            let xa = (mask >> a) & 1;
            logw += if xa == 1 { ps[a].ln() } else { (1.0 - ps[a]).ln() };
            let b = (a + 1) % n;
            if xa == 1 && (mask >> b) & 1 == 1 {
                logw += 0.4 * js[a];
            }
        }
        *slot = logw.exp();
    }
    let hoods = (0..n)
        .map(|a| {
            let mut h = vec![(a + n - 1) % n, a, (a + 1) % n];
            h.sort_unstable();
            h.dedup();
            h
        })
        .collect();
    TestSystem {
        table: JointTable::from_dense(normalize(dense)).expect("tilted table"),
        hoods,
        independent: false,
        kind: "tilted-ring",
    }
}

/// Tracks the tightest margin seen across all bound comparisons.
struct SlackLedger {
    min_slack: f64,
    worst: String,
    comparisons: usize,
    ok: bool,
}

impl SlackLedger {
    fn new() -> Self {
        SlackLedger {
            min_slack: f64::INFINITY,
            worst: String::new(),
            comparisons: 0,
            ok: true,
        }
    }

    fn record(&mut self, slack: f64, allowance: f64, context: String) {
        self.comparisons += 1;
        if slack < self.min_slack {
            self.min_slack = slack;
            self.worst = context.clone();
        }
        if slack < -allowance {
            self.ok = false;
            println!("  violated: {context} (slack {slack:.3e})");
        }
    }
}

#[test]
fn a01_exact_tv_dominated_by_upper_bounds() {
    let start = Instant::now();
    let mut ledger = SlackLedger::new();
    let mut kinds = [0usize; 3];
    let total = 504;

    for idx in 0..total {
        let mut rng = ChaCha8Rng::seed_from_u64(0xD0_711A);
        rng.set_stream(idx as u64);
        let n = 3 + idx % 10;
        let case = match idx % 3 {
            0 => independent_case(&mut rng, n),
            1 => block_product_case(&mut rng, n),
            _ => tilted_ring_case(&mut rng, n),
        };
        kinds[idx % 3] += 1;

        let sys = IndicatorSystem::from_joint(case.table.clone(), case.hoods.clone(), None)
            .expect("system assembles");
        let lambda = sys.lambda();
        let tv = exact_tv_to_poisson(&case.table).expect("exact tv");
        let allowance = 1e-10 + tv.error_bar;
        let tag = |bound_name: &str| format!("{} #{idx} n={n} {bound_name}", case.kind);

        let local = local_bounds(&sys).expect("local bounds");
        ledger.record(local.tv_bound - tv.value, allowance, tag("local"));

        let coupling = exact_size_bias_gap(&case.table).expect("coupling gap");
        let sb = size_bias_bound(lambda, coupling.mean_abs_gap).expect("size-bias bound");
        ledger.record(sb - tv.value, allowance, tag("size-bias"));

        if case.independent {
            let ps = sys.marginals().to_vec();
            let cb = classical_bounds(&ps).expect("classical bounds");
            ledger.record(cb.lecam1 - tv.value, allowance, tag("lecam-sum-squares"));
            if let Some(l2) = cb.lecam2 {
                ledger.record(l2 - tv.value, allowance, tag("lecam-scaled"));
            }
            ledger.record(cb.combined - tv.value, allowance, tag("classical-combined"));

            let var = exact_variance(&case.table).expect("variance");
            let sq = sum_of_squares(&ps);
            for (rel, name) in [
                (MonotoneRelation::Negative, "monotone-negative"),
                (MonotoneRelation::Positive, "monotone-positive"),
            ] {
                let mb = monotone_coupling_bound(lambda, var, sq, rel).expect("monotone bound");
                ledger.record(mb - tv.value, allowance, tag(name));
            }

            let lower = barbour_hall_lower(&ps).expect("lower bound");
            ledger.record(tv.value - lower, allowance, tag("matching-lower"));
        }
    }

    let elapsed = start.elapsed().as_secs_f64();
    let ok = ledger.ok && elapsed < 120.0;
    report(
        "01 exact-tv dominance",
        ok,
        &format!(
            "{total} systems ({} independent / {} block-product / {} tilted-ring), \
             {} comparisons, min slack {:.3e} at [{}], {elapsed:.1}s (budget 120s)",
            kinds[0], kinds[1], kinds[2], ledger.comparisons, ledger.min_slack, ledger.worst
        ),
    );
}

// ---------------------------------------------------------------------------
// 2. Stein solution smoothness caps hold across intensity scales.
// ---------------------------------------------------------------------------

fn cp_spec_for_caps(i: u64) -> CompoundSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC2_5EED);
    rng.set_stream(i);
    let clusters = 2 + (i as usize % 4);
    let head = 0.3 + 1.2 * rng.random::<f64>();
    let decay = 0.15 + 0.35 * rng.random::<f64>();
    let mut rates: Vec<f64> = (0..clusters)
        .map(|j| head * decay.powi(j as i32))
        .collect();
    loop {
        let spec = CompoundSpec::new(rates.clone()).expect("cluster rates");
        if spec.theta() < 0.45 {
            return spec;
        }
        for rate in rates.iter_mut().skip(1) {
            *rate *= 0.5;
        }
    }
}

#[test]
fn a02_stein_solution_caps_across_scales() {
    let start = Instant::now();
    let mut ok = true;

    let mut worst_f = 0.0f64;
    let mut worst_df = 0.0f64;
    let mut sets = 0usize;
    for (i, lambda) in [0.05, 0.5, 1.0, 2.0, 10.0, 100.0].into_iter().enumerate() {
        let check = verify_poisson_solution_bounds(lambda, 12, 0x51_E1 + i as u64)
            .expect("solution sweep");
        ok &= check.passed();
        ok &= check.worst_f_ratio <= 1.0 + 1e-9 && check.worst_delta_ratio <= 1.0 + 1e-9;
        worst_f = worst_f.max(check.worst_f_ratio);
        worst_df = worst_df.max(check.worst_delta_ratio);
        sets += check.n_sets_tested;
    }

    let mut worst_exp = 0.0f64;
    let mut worst_pert = 0.0f64;
    for i in 0..50u64 {
        let spec = cp_spec_for_caps(i);
        assert!(spec.theta() < 0.5, "generator must keep theta below 1/2");
        let k_max = spec.cutoff(1e-14).expect("tail cutoff") + 120;
        let check =
            verify_cp_solution_bounds(&spec, k_max, 8, 0xCF_00 + i).expect("cp solution sweep");
        ok &= check.passed();
        worst_exp = worst_exp
            .max(check.worst_exp_f_ratio)
            .max(check.worst_exp_delta_ratio);
        let (pf, pd) = (
            check.worst_perturbation_f_ratio,
            check.worst_perturbation_delta_ratio,
        );
        ok &= pf <= 1.0 + 1e-9 && pd <= 1.0 + 1e-9;
        worst_pert = worst_pert.max(pf).max(pd);
    }

    let elapsed = start.elapsed().as_secs_f64();
    ok &= elapsed < 300.0;
    report(
        "02 stein solution caps",
        ok,
        &format!(
            "6 intensities x {sets} sets: worst |f| ratio {worst_f:.12}, worst |df| ratio \
             {worst_df:.12}; 50 cluster specs: worst exponential ratio {worst_exp:.12}, worst \
             perturbation ratio {worst_pert:.12}; {elapsed:.1}s (budget 300s)"
        ),
    );
}

// ---------------------------------------------------------------------------
// 3. The two compound pmf algorithms agree entrywise.
// ---------------------------------------------------------------------------

fn cp_spec_for_pmfs(i: u64) -> CompoundSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC3_5EED);
    rng.set_stream(i);
    let clusters = 1 + (i as usize % 6);
    let mut rates: Vec<f64> = (0..clusters)
        .map(|_| 0.05 + 1.15 * rng.random::<f64>())
        .collect();
    let nu: f64 = rates.iter().sum();
    if nu > 5.0 {
        let scale = 5.0 * (0.5 + 0.5 * rng.random::<f64>()) / nu;
        for r in &mut rates {
            *r *= scale;
        }
    }
    CompoundSpec::new(rates).expect("cluster rates")
}

#[test]
fn a03_panjer_matches_convolution() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut worst_spec = 0;
    for i in 0..100u64 {
        let spec = cp_spec_for_pmfs(i);
        assert!(spec.nu() <= 5.0 + 1e-12, "generator must keep nu <= 5");
        assert!(spec.max_cluster() <= 6, "generator must keep clusters <= 6");
        let recursive = cp_pmf_panjer(&spec, 60, 1e-12).expect("recursive pmf");
        let convolved = cp_pmf_convolution(&spec, 60).expect("convolved pmf");
        for k in 0..=60 {
            let diff = (recursive.pmf.prob(k) - convolved.prob(k)).abs();
            if diff > worst {
                worst = diff;
                worst_spec = i;
            }
        }
    }
    let ok = worst <= 1e-12;
    let elapsed = start.elapsed().as_secs_f64();
    report(
        "03 panjer vs convolution",
        ok,
        &format!(
            "100 specs, support 0..=60: max entrywise gap {worst:.3e} (spec #{worst_spec}), \
             tolerance 1e-12, {elapsed:.1}s"
        ),
    );
}

// ---------------------------------------------------------------------------
// 4. Head-run probabilities: closed bound holds exactly, recursion matches
//    full enumeration.
// ---------------------------------------------------------------------------

#[test]
fn a04_head_run_bound_and_enumeration() {
    let start = Instant::now();
    let mut ok = true;
    let mut worst_slack = f64::INFINITY;
    let mut worst_enum = 0.0f64;
    let mut grid = 0usize;
    for n in 1..=20usize {
        for t in 1..=n {
            for p in [0.2, 0.5, 0.8] {
                let m = HeadRunModel::new(n, t, p).expect("model");
                grid += 1;
                let exact = headrun_exact(&m);
                // |P[R < t] − e^{−λ}| equals |P[R ≥ t] − (1 − e^{−λ})|; the
                // first form cancels catastrophically when both sides sit
                // within an ulp of 1, the second when both sit near 0, so
                // evaluate whichever is well conditioned.
                let gap_below = (exact - (-m.lambda()).exp()).abs();
                let gap_tail = (headrun_exact_tail(&m) - (-(-m.lambda()).exp_m1())).abs();
                let gap = gap_below.min(gap_tail);
                let slack = headrun_bound(&m).bound - gap;
                worst_slack = worst_slack.min(slack);
                if slack < 0.0 {
                    println!(
                        "  violated: n={n} t={t} p={p}: gap {gap:.3e} exceeds bound {:.17e}",
                        headrun_bound(&m).bound
                    );
                }
                ok &= slack >= 0.0;
                let enumerated = headrun_enumerate(&m).expect("enumeration");
                worst_enum = worst_enum.max((enumerated - exact).abs());
            }
        }
    }
    ok &= worst_enum <= 1e-12;
    let elapsed = start.elapsed().as_secs_f64();
    report(
        "04 head-run bound + enumeration",
        ok,
        &format!(
            "{grid} (n,t,p) cells, n <= 20: min bound slack {worst_slack:.3e} (>= 0 required), \
             max recursion-vs-enumeration gap {worst_enum:.3e} (<= 1e-12), {elapsed:.1}s"
        ),
    );
}

// ---------------------------------------------------------------------------
// 5. Large-intensity binomial: exact distance tracks the scaling constant.
// ---------------------------------------------------------------------------

#[test]
fn a05_binomial_large_intensity_scaling() {
    let start = Instant::now();
    let (n, p) = (100_000usize, 1e-3f64);
    let lambda = n as f64 * p;
    let exact = tv_distance(
        &binomial_pmf(n, p).expect("binomial pmf"),
        &poisson_pmf(lambda, 1e-16).expect("poisson pmf"),
    );
    let scale = (2.0 * std::f64::consts::PI * std::f64::consts::E).sqrt().recip() / lambda
        * n as f64
        * p
        * p;
    let ratio = exact.value / scale;
    let ok = (0.85..=1.15).contains(&ratio);
    let elapsed = start.elapsed().as_secs_f64();
    report(
        "05 binomial scaling constant",
        ok,
        &format!(
            "Bi({n}, {p}) vs intensity {lambda}: exact distance {:.6e}, scaling term {scale:.6e}, \
             ratio {ratio:.4} (required within [0.85, 1.15]), {elapsed:.1}s",
            exact.value
        ),
    );
}

// ---------------------------------------------------------------------------
// 6. Arithmetic progressions: Monte Carlo matches the limit, the index-count
//    formula matches brute force, overlap ceilings hold.
// ---------------------------------------------------------------------------

#[test]
fn a06_progression_poisson_approximation() {
    let start = Instant::now();
    let mut ok = true;

    let (t, _delta) = ap_threshold_from_offset(4096, 0.5, 0.0).expect("threshold");
    let model = ApModel::new(4096, t, 0.5).expect("model");
    let lambda = model.lambda();
    ok &= lambda > 0.1 && lambda < 3.0;
    let mc = ap_mc_estimate(&model, 2000, 0xA6).expect("monte carlo");
    let target = (-lambda).exp();
    let mc_gap = (mc.estimate - target).abs();
    ok &= mc_gap <= 4.0 * mc.std_error;

    let mut count_mismatches = 0usize;
    for n in 1..=200u64 {
        for tt in 1..=20u64 {
            if ap_index_count(n, tt) != ap_index_count_brute(n, tt) {
                count_mismatches += 1;
            }
        }
    }
    ok &= count_mismatches == 0;

    let full = ap_overlap_profile(200, 5, usize::MAX, 0xA6).expect("full overlap profile");
    let sampled = ap_overlap_profile(1024, 12, 50, 0xA6).expect("sampled overlap profile");
    ok &= full.passed() && sampled.passed();

    let elapsed = start.elapsed().as_secs_f64();
    ok &= elapsed < 600.0;
    report(
        "06 progression approximation",
        ok,
        &format!(
            "n=4096 p=0.5: t={t}, intensity {lambda:.4}, MC {:.4} vs limit {target:.4} \
             (gap {mc_gap:.4} <= 4se = {:.4}); index-count mismatches {count_mismatches}/4000; \
             overlap ceilings {} (full n=200) / {} (sampled n=1024); {elapsed:.1}s (budget 600s)",
            mc.estimate,
            4.0 * mc.std_error,
            full.bases_checked,
            sampled.bases_checked
        ),
    );
}

// ---------------------------------------------------------------------------
// 7. Percolation dynamics: coupling monotonicity, exact one-step survival,
//    fast-regime concentration, engine equivalence.
// ---------------------------------------------------------------------------

#[test]
fn a07_percolation_property_suite() {
    let start = Instant::now();
    let mut ok = true;

    // (a) Pathwise monotonicity: a denser seeding from shared uniforms
    // never percolates later.
    let mut order_failures = 0usize;
    for i in 0..200u64 {
        let (low, high) =
            TorusState::seeded_coupled(2, 12, 0.55, 0.75, 0xA7, i).expect("coupled seeding");
        let run_low = drive(low, UpdateEngine::FrontierQueue);
        let run_high = drive(high, UpdateEngine::FrontierQueue);
        if !run_high.outcome.le(&run_low.outcome) {
            order_failures += 1;
        }
    }
    ok &= order_failures == 0;

    // (b) One-dimensional one-step survival has a closed form: the centre
    // stays healthy iff it and at least one side of it are unseeded.
    let rho = estimate_rho(1, 1, 0.7, 200_000, 0xB7).expect("survival estimate");
    let rho_exact = 0.3f64.powi(3);
    let rho_gap = (rho.estimate - rho_exact).abs();
    ok &= rho_gap <= 4.0 * rho.std_error;

    // (c) Mid-window density for one-step concentration: nearly every run
    // finishes at exactly t = 1.
    let (d, n, omega) = (2usize, 128usize, (128f64).ln());
    let volume = (n as f64).powi(d as i32);
    let lower = (omega / volume).powf(1.0 / m_t(d, 0).expect("exponent") as f64);
    let upper = (1.0 / (omega * volume)).powf(1.0 / m_t(d, 1).expect("exponent") as f64);
    let q = (lower * upper).sqrt();
    ok &= regime_classify(d, n, 1, q, None).expect("classification") == Regime::Fast(1);
    let dist = mc_t_distribution(d, n, 1.0 - q, 400, 0xC7).expect("time distribution");
    let p_one = dist.prob(1);
    ok &= p_one > 0.9;

    // (d) The frontier engine and the full-sweep engine produce identical
    // runs, outcome and trajectory and final lattice alike.
    let mut engine_mismatches = 0usize;
    for i in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0xD7);
        rng.set_stream(i);
        let d = 1 + rng.random_range(0..3usize);
        let n = match d {
            1 => 8 + rng.random_range(0..57usize),
            2 => 4 + rng.random_range(0..21usize),
            _ => 3 + rng.random_range(0..8usize),
        };
        let p = 0.25 + 0.70 * rng.random::<f64>();
        let sweep = percolation_run(d, n, p, 0xD7, i, UpdateEngine::FullSweep).expect("sweep run");
        let frontier =
            percolation_run(d, n, p, 0xD7, i, UpdateEngine::FrontierQueue).expect("frontier run");
        if sweep != frontier {
            engine_mismatches += 1;
        }
    }
    ok &= engine_mismatches == 0;

    let elapsed = start.elapsed().as_secs_f64();
    ok &= elapsed < 600.0;
    report(
        "07 percolation properties",
        ok,
        &format!(
            "coupling order failures {order_failures}/200; 1-d survival {:.5} vs exact \
             {rho_exact:.5} (gap {rho_gap:.1e} <= 4se = {:.1e}); mid-window q {q:.4e} classified \
             fast with P[T=1] = {p_one:.4} (> 0.9); engine mismatches {engine_mismatches}/50; \
             {elapsed:.1}s (budget 600s)",
            rho.estimate,
            4.0 * rho.std_error
        ),
    );
}

// ---------------------------------------------------------------------------
// 8. CLI determinism: the same seed yields byte-identical results across
//    thread counts and repeated runs.
// ---------------------------------------------------------------------------

fn run_cli(args: &[String], threads: usize, out: &Path) -> Vec<u8> {
    let status = Command::new(env!("CARGO_BIN_EXE_steinchen"))
        .args(args)
        .arg("--threads")
        .arg(threads.to_string())
        .arg("--out")
        .arg(out)
        .status()
        .expect("spawn cli");
    assert!(status.success(), "cli run failed: {args:?}");
    let mut bytes = std::fs::read(out.join("results.csv")).expect("results.csv");
    let snapshots = out.join("snapshots.csv");
    if snapshots.exists() {
        bytes.extend(std::fs::read(snapshots).expect("snapshots.csv"));
    }
    bytes
}

#[test]
fn a08_cli_byte_identical_across_thread_counts() {
    let start = Instant::now();
    let scratch = tempfile::tempdir().expect("tempdir");

    // A two-block product system for the bounds/oracle subcommands.
    let block_a = [0.5, 0.2, 0.2, 0.1];
    let block_b = [0.6, 0.25, 0.1, 0.05];
    let joint: Vec<serde_json::Value> = (0..16usize)
        .map(|mask| {
            let p = block_a[mask & 3] * block_b[(mask >> 2) & 3];
            serde_json::json!([mask, p])
        })
        .collect();
    let spec = serde_json::json!({
        "indices": 4,
        "marginals": [0.3, 0.3, 0.3, 0.15],
        "neighbourhoods": [[0, 1], [0, 1], [2, 3], [2, 3]],
        "outer_neighbourhoods": [[0, 1], [0, 1], [2, 3], [2, 3]],
        "joint": joint,
    });
    let sys_path = scratch.path().join("sys.json");
    std::fs::write(&sys_path, serde_json::to_vec_pretty(&spec).expect("json")).expect("write");
    let sys = sys_path.to_str().expect("utf-8 path").to_string();

    let cases: Vec<Vec<String>> = vec![
        vec!["bounds", "--system", &sys, "--seed", "42"],
        vec!["oracle", "--system", &sys, "--seed", "42"],
        vec!["stein-check", "--lambda", "2", "--K", "8", "--seed", "42"],
        vec!["stein-check", "--spec", "0.9,0.3,0.1", "--K", "8", "--seed", "42"],
        vec!["headrun", "--n", "200", "--t", "6", "--p", "0.5", "--reps", "400", "--seed", "42"],
        vec!["ap", "--n", "256", "--t", "10", "--p", "0.5", "--reps", "300", "--seed", "42"],
        vec![
            "bootstrap", "--mode", "time-dist", "--d", "2", "--n", "16", "--p", "0.85", "--reps",
            "100", "--snapshots", "--seed", "42",
        ],
        vec![
            "bootstrap", "--mode", "rho", "--d", "2", "--n", "32", "--t", "1", "--p", "0.97",
            "--reps", "5000", "--seed", "42",
        ],
        vec![
            "bootstrap", "--mode", "classify", "--d", "2", "--n", "128", "--t", "1", "--q",
            "0.004", "--seed", "42",
        ],
    ]
    .into_iter()
    .map(|v| v.into_iter().map(String::from).collect())
    .collect();

    let mut compared = 0usize;
    for (ci, case) in cases.iter().enumerate() {
        let mut outputs = Vec::new();
        for threads in [1usize, 4, 2] {
            let dir = scratch.path().join(format!("case{ci}-t{threads}"));
            std::fs::create_dir_all(&dir).expect("case dir");
            outputs.push(run_cli(case, threads, &dir));
        }
        assert_eq!(
            outputs[0], outputs[1],
            "results differ between --threads 1 and --threads 4 for {case:?}"
        );
        assert_eq!(
            outputs[0], outputs[2],
            "results differ between runs at --threads 1 and --threads 2 for {case:?}"
        );
        compared += 1;
    }

    let elapsed = start.elapsed().as_secs_f64();
    report(
        "08 cli determinism",
        true,
        &format!(
            "{compared} subcommand configurations x 3 runs (threads 1/4/2): all results.csv \
             byte-identical; {elapsed:.1}s"
        ),
    );
}
