//! Acceptance run: one PASS/FAIL line per criterion. Pass a substring to run
//! only the matching criteria.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;

use igw_lab::analytics::{
    height_cdf, lagrange_round_trip_residual, lagrange_w_coeffs, lagrange_w_coeffs_exact, length_cdf,
    length_cdf_bessel, length_pdf, length_pdf_bessel, size_pmf_exact, SeriesEvalPolicy,
};
use igw_lab::experiments::{
    length_tail_report, run_attractor_gf, run_attractor_mc, run_coloring, run_invariance, run_semigroup,
    run_thinning, run_uniqueness_falsification, run_verify_height, run_verify_length, run_verify_size,
    size_tail_report, ExperimentError, ExperimentReport, ExperimentSpec,
};
use igw_lab::offspring::OffspringDistribution;
use igw_lab::pruning::{semigroup_check, PhiFunctional, SemigroupOutcome};
use igw_lab::tree::from_newick;

type Outcome = Result<(bool, Vec<String>), ExperimentError>;

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/length_semigroup_counterexample.nwk");

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Collects the verdicts of every check in `report`.
fn checks(report: &ExperimentReport, ok: &mut bool, lines: &mut Vec<String>) {
    for c in &report.checks {
        *ok &= c.passed();
        lines.push(format!(
            "{}/{}: {} = {:.6} vs {:.6} [{}]",
            report.name,
            c.test,
            if c.p_value.is_some() { "stat" } else { "value" },
            c.statistic,
            c.threshold,
            if c.passed() { "ok" } else { "fail" }
        ));
    }
}

fn spec(name: &str, dist: &str) -> ExperimentSpec {
    ExperimentSpec::new(name, dist)
}

fn height_law() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    for (name, dist) in [("height_q1/2", "igw:0.5"), ("height_q2/3", "igw:0.6666666666666666")] {
        let mut s = spec(name, dist);
        s.replicates = 200_000;
        s.budget = 1_000_000;
        checks(&run_verify_height(&s)?, &mut ok, &mut lines);
    }
    let mut worst: f64 = 0.0;
    for lambda in [0.5, 1.0, 2.5] {
        for i in 0..=1000 {
            let x = i as f64 * 0.05;
            let closed = lambda * x / (lambda * x + 2.0);
            worst = worst.max((height_cdf(0.5, lambda, x)? - closed).abs());
        }
    }
    ok &= worst <= 1e-12;
    lines.push(format!("closed form at q = 1/2: max error {worst:.3e} (tol 1e-12)"));
    Ok((ok, lines))
}

fn height_ode() -> Outcome {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for q in [0.5, 2.0 / 3.0, 0.9] {
        let d = OffspringDistribution::igw(q)?;
        for lambda in [1.0, 2.0] {
            worst = worst.max(height_cdf(q, lambda, 0.0)?.abs());
            for i in 1..=100 {
                let x = i as f64 * 0.1;
                let dh = (height_cdf(q, lambda, x + h)? - height_cdf(q, lambda, x - h)?) / (2.0 * h);
                let rhs = lambda * d.q_minus_id(height_cdf(q, lambda, x)?);
                worst = worst.max((dh - rhs).abs());
            }
        }
    }
    Ok((worst <= 1e-8, vec![format!("max residual of H' = λ(Q(H) - H) on 100 points: {worst:.3e} (tol 1e-8)")]))
}

fn length_law() -> Outcome {
    let policy = SeriesEvalPolicy::default();
    let mut worst: f64 = 0.0;
    for lambda in [1.0, 2.0] {
        for x in [0.5, 1.0, 2.0] {
            worst = worst.max((length_cdf(0.5, lambda, x, &policy)? - length_cdf_bessel(lambda, x, &policy)).abs());
            worst = worst.max((length_pdf(0.5, lambda, x, &policy)? - length_pdf_bessel(lambda, x, &policy)).abs());
        }
    }
    let mut ok = worst <= 1e-8;
    let mut lines = vec![format!("series vs Bessel form at x = 0.5, 1, 2: max diff {worst:.3e} (tol 1e-8)")];
    for (name, dist) in [("length_q1/2", "igw:0.5"), ("length_q2/3", "igw:0.6666666666666666")] {
        let mut s = spec(name, dist);
        s.replicates = 200_000;
        s.budget = 1_000_000;
        s.tolerance = Some(0.012);
        checks(&run_verify_length(&s)?, &mut ok, &mut lines);
    }
    Ok((ok, lines))
}

fn length_tail() -> Outcome {
    let a = length_tail_report(0.5, 1.0, &[50.0])?;
    let b = length_tail_report(2.0 / 3.0, 1.0, &[10.0, 30.0, 50.0])?;
    let lines = [&a, &b]
        .iter()
        .map(|r| format!("{}: |ratio - 1| = {:.4} {:?}", r.test, r.statistic, r.extra))
        .collect();
    Ok((a.passed() && b.passed(), lines))
}

fn size_law() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    let half = ratio(1, 2);
    let spots = [(1, ratio(1, 2)), (2, ratio(0, 1)), (3, ratio(1, 8))];
    for (n, want) in &spots {
        let got = size_pmf_exact(&half, *n)?;
        ok &= got == *want;
        lines.push(format!("α({n}) = {got} (want {want})"));
    }
    for (name, dist) in [("size_q1/2", "igw:0.5"), ("size_q2/3", "igw:0.6666666666666666")] {
        let mut s = spec(name, dist);
        s.replicates = 100_000;
        s.budget = 64;
        s.repeats = 5;
        let r = run_verify_size(&s)?;
        ok &= r.check("size_exact_vs_recursion").is_some();
        checks(&r, &mut ok, &mut lines);
    }
    Ok((ok, lines))
}

fn size_tail() -> Outcome {
    let r = size_tail_report(&ratio(1, 2), 1000.0, 0.1)?;
    Ok((r.passed(), vec![format!("relative error {:.4} (tol 0.1) {:?}", r.statistic, r.extra)]))
}

fn pruning_invariance() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    for (name, phi) in [("invariance_length", PhiFunctional::Length), ("invariance_height", PhiFunctional::Height)] {
        let mut s = spec(name, "igw:0.6666666666666666");
        s.phi = Some(phi);
        s.target_p = vec![0.5];
        s.survivors = 100_000;
        s.budget = 100_000;
        s.repeats = 5;
        checks(&run_invariance(&s)?, &mut ok, &mut lines);
    }
    Ok((ok, lines))
}

fn first_vertex_thinning() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    let mut s = spec("thinning_binary_height", "binary");
    s.phi = Some(PhiFunctional::Height);
    s.target_p = vec![0.5];
    s.survivors = 100_000;
    s.budget = 10_000;
    s.repeats = 5;
    checks(&run_thinning(&s)?, &mut ok, &mut lines);
    Ok((ok, lines))
}

fn pushforward_attractor() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    for (name, dist) in [("gf_zipf", "zipf:1.5"), ("gf_geometric", "geometric:0.5"), ("gf_subcritical", "pmf:0.6,0,0.4")] {
        let mut s = spec(name, dist);
        s.p_grid = vec![1e-1, 1e-2, 1e-3, 1e-4];
        let r = run_attractor_gf(&s)?;
        if name == "gf_subcritical" {
            let g0 = r.tables[0].rows.last().map(|row| row[1]).unwrap_or(0.0);
            ok &= g0 > 0.999;
            lines.push(format!("{name}: g0 = {g0:.6} at p = 1e-4 (want > 0.999)"));
        }
        checks(&r, &mut ok, &mut lines);
    }
    Ok((ok, lines))
}

fn shape_attractor() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();

    let mut s = spec("mc_geometric_horton", "geometric:0.5");
    s.horton_k = vec![1, 2, 3, 4, 5];
    s.verdict_at = Some(3.0);
    s.replicates = 400_000;
    s.budget = 100_000;
    checks(&run_attractor_mc(&s)?, &mut ok, &mut lines);

    let mut s = spec("mc_zipf_leaves", "zipf:1.5");
    s.phi = Some(PhiFunctional::Leaves);
    s.target_p = vec![0.5, 0.2, 0.05, 0.01];
    s.tolerance = Some(0.03);
    s.replicates = 2_000_000;
    s.budget = 100_000;
    checks(&run_attractor_mc(&s)?, &mut ok, &mut lines);

    let mut s = spec("mc_igw_control", "igw:0.6666666666666666");
    s.phi = Some(PhiFunctional::Leaves);
    s.target_p = vec![0.5, 0.2, 0.05];
    s.replicates = 400_000;
    s.budget = 100_000;
    checks(&run_attractor_mc(&s)?, &mut ok, &mut lines);

    let mut s = spec("coloring_zipf_drift", "zipf:1.5");
    s.p_grid = vec![0.5, 0.9, 0.99];
    s.survivors = 20_000;
    s.budget = 100_000;
    s.max_trees = 50_000_000;
    let r = run_coloring(&s)?;
    if let Some(c) = r.check("attractor_g0") {
        ok &= c.passed();
        lines.push(format!("{}/attractor_g0: |g0 - q| = {:.4} (tol {}) {:?}", r.name, c.statistic, c.threshold, c.extra));
    } else {
        ok = false;
    }

    for (name, dist, phi) in [
        ("falsify_zipf_length", "zipf:1.5", PhiFunctional::Length),
        ("falsify_geometric_height", "geometric:0.5", PhiFunctional::Height),
        ("falsify_igw_control", "igw:0.6666666666666666", PhiFunctional::Length),
    ] {
        let mut s = spec(name, dist);
        s.phi = Some(phi);
        s.target_p = vec![0.5];
        s.survivors = 100_000;
        s.budget = 100_000;
        s.repeats = 5;
        checks(&run_uniqueness_falsification(&s)?, &mut ok, &mut lines);
    }
    Ok((ok, lines))
}

fn semigroup() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    let out = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("length_counterexample.nwk");
    let mut s = spec("semigroup", "igw:0.5");
    s.replicates = 1000;
    s.budget = 100_000;
    s.output = Some(out.clone());
    checks(&run_semigroup(&s)?, &mut ok, &mut lines);
    ok &= out.exists();
    let archived = std::fs::read_to_string(FIXTURE)?;
    let tree = from_newick(archived.trim()).map_err(|e| ExperimentError::Spec(e.to_string()))?;
    let outcome = semigroup_check(&tree, &PhiFunctional::Length, 1.0, 1.0)?;
    let reproduces = matches!(outcome, SemigroupOutcome::Counterexample { .. });
    ok &= reproduces;
    lines.push(format!("archived counterexample {} reproduces: {reproduces}", archived.trim()));
    Ok((ok, lines))
}

fn lagrange_inversion() -> Outcome {
    let catalan: [i64; 10] = [1, 2, 5, 14, 42, 132, 429, 1430, 4862, 16796];
    let exact = lagrange_w_coeffs_exact(&ratio(1, 2), 10);
    let floats = lagrange_w_coeffs(0.5, 10)?;
    let mut ok = true;
    for (i, c) in catalan.iter().enumerate() {
        let signed = if i % 2 == 0 { *c } else { -c };
        ok &= exact[i] == BigRational::from_integer(signed.into());
        ok &= (floats[i] - signed as f64).abs() <= 1e-12 * *c as f64;
    }
    let mut lines = vec![format!("signed Catalan numbers for n ≤ 10: {ok}")];
    let mut worst: f64 = 0.0;
    for q in [0.5, 2.0 / 3.0, 0.9] {
        for z in [-0.1, -0.05, 0.02, 0.05, 0.1] {
            worst = worst.max(lagrange_round_trip_residual(q, z, 120)?);
        }
    }
    ok &= worst <= 1e-10;
    lines.push(format!("round-trip residual {worst:.3e} (tol 1e-10)"));
    Ok((ok, lines))
}

fn bernoulli_coloring() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    let mut s = spec("coloring_binary", "binary");
    s.p_grid = vec![0.5];
    s.survivors = 100_000;
    s.budget = 100_000;
    s.repeats = 5;
    checks(&run_coloring(&s)?, &mut ok, &mut lines);
    let mut s = spec("coloring_igw", "igw:0.6666666666666666");
    s.p_grid = vec![0.7];
    s.survivors = 100_000;
    s.budget = 100_000;
    s.repeats = 5;
    let r = run_coloring(&s)?;
    ok &= r.check("igw_invariance_p0.7").is_some();
    checks(&r, &mut ok, &mut lines);
    Ok((ok, lines))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("01_height_law", height_law),
        ("02_height_ode", height_ode),
        ("03_length_law", length_law),
        ("04_length_tail", length_tail),
        ("05_size_law", size_law),
        ("06_size_tail", size_tail),
        ("07_pruning_invariance", pruning_invariance),
        ("08_first_vertex_thinning", first_vertex_thinning),
        ("09_pushforward_attractor", pushforward_attractor),
        ("10_shape_attractor", shape_attractor),
        ("11_semigroup", semigroup),
        ("12_lagrange_inversion", lagrange_inversion),
        ("13_bernoulli_coloring", bernoulli_coloring),
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut out = std::io::stdout().lock();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let (ok, lines) = match run() {
            Ok(x) => x,
            Err(e) => (false, vec![format!("error: {e}")]),
        };
        for l in &lines {
            writeln!(out, "    {l}").unwrap();
        }
        writeln!(out, "{} {name} ({:.1} s)", if ok { "PASS" } else { "FAIL" }, start.elapsed().as_secs_f64()).unwrap();
        out.flush().unwrap();
        failed += usize::from(!ok);
    }
    if failed > 0 {
        writeln!(out, "{failed} criteria failed").unwrap();
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
