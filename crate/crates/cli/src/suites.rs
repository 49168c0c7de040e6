//! Randomized property suites behind `minkbill verify`.
//!
//! Each suite draws seeded instances, runs the corresponding verifier from
//! the library, and counts violations. One CSV row per instance is emitted
//! with a suite-specific primary value and a margin whose sign decides the
//! instance (`ok` iff the margin clears the suite's slack). Violations drive
//! the exit code: a nonzero count means a monitored inequality failed on a
//! concrete instance, which is exit 2, not an input error.

use std::path::Path;

use anyhow::{bail, Context};
use nalgebra::DVector;

use minkbill_core::capacity::{two_bounce_capacity, SearchOptions};
use minkbill_core::exports::csv_document;
use minkbill_core::path::{
    antipodal_split, random_cover_instance, random_equality_instance, random_normal_instance,
    random_outer_instance, random_split_instance, shortcut, simplex_cover, verify_length_bound,
    verify_normal_length_bound,
};
use minkbill_core::{ConvexBody, Tolerances};

use crate::{write_text, RunManifest, VerifyArgs};

const ALL_SUITES: [&str; 6] =
    ["len-bound", "normal-bound", "shortcut", "split", "cover", "criticality"];

struct Row {
    suite: &'static str,
    instance: u64,
    m: usize,
    value: f64,
    margin: f64,
    ok: bool,
}

impl Row {
    fn to_fields(&self) -> Vec<String> {
        vec![
            self.suite.to_string(),
            self.instance.to_string(),
            self.m.to_string(),
            format!("{:.12}", self.value),
            format!("{:.3e}", self.margin),
            self.ok.to_string(),
        ]
    }
}

pub fn cmd_verify(args: VerifyArgs) -> anyhow::Result<i32> {
    let (tol, overrides) = args.tol.apply();
    let suites: Vec<&str> = match args.suite.as_str() {
        "all" => ALL_SUITES.to_vec(),
        name if ALL_SUITES.contains(&name) => vec![name],
        other => bail!(
            "unknown suite '{other}'; expected one of {} or 'all'",
            ALL_SUITES.join(", ")
        ),
    };

    let mut rows: Vec<Row> = Vec::new();
    let mut total_violations = 0usize;
    for suite in &suites {
        let before = rows.len();
        let violations = match *suite {
            "len-bound" => suite_len_bound(args.instances, args.seed, &tol, &mut rows)?,
            "normal-bound" => suite_normal_bound(args.instances, args.seed, &tol, &mut rows)?,
            "shortcut" => suite_shortcut(args.instances, args.seed, &mut rows)?,
            "split" => suite_split(args.instances, args.seed, &tol, &mut rows)?,
            "cover" => suite_cover(args.instances, args.seed, &tol, &mut rows)?,
            "criticality" => suite_criticality(args.instances, args.seed, &tol, &mut rows)?,
            _ => unreachable!(),
        };
        println!(
            "suite {suite}: {} instances, {} violations",
            rows.len() - before,
            violations
        );
        total_violations += violations;
    }

    if let Some(out) = &args.out {
        let manifest = RunManifest::new("verify", &[] as &[&Path], args.seed, overrides)
            .with_outputs(&[&args.out])
            .note("suite", &args.suite)
            .note("instances", args.instances)
            .json()?;
        let fields: Vec<Vec<String>> = rows.iter().map(Row::to_fields).collect();
        let doc = csv_document(
            &manifest,
            &["suite", "instance", "m", "value", "margin", "ok"],
            &fields,
        )?;
        write_text(out, &doc)?;
    }

    if total_violations > 0 {
        println!("FALSIFICATION-CANDIDATE: {total_violations} property violations");
        Ok(2)
    } else {
        println!("all suites passed");
        Ok(0)
    }
}

/// Gauge bodies across dimensions 2-4 for the length-bound suites.
fn gauge_bodies() -> anyhow::Result<Vec<ConvexBody>> {
    let mut bodies = Vec::new();
    for n in 2..=4 {
        bodies.push(ConvexBody::ball(n));
        bodies.push(ConvexBody::cube(n));
        bodies.push(ConvexBody::lp_ball_unit(n, 1.5).context("l_1.5 ball")?);
    }
    Ok(bodies)
}

/// Smooth bodies for the suites that need gradients.
fn smooth_bodies() -> anyhow::Result<Vec<ConvexBody>> {
    let mut bodies = Vec::new();
    for n in 2..=3 {
        bodies.push(ConvexBody::ball(n));
        let axes: Vec<f64> = (0..n).map(|i| 1.0 + 0.45 * i as f64).collect();
        bodies.push(ConvexBody::ellipsoid_diag(&axes).context("ellipsoid")?);
        bodies.push(ConvexBody::lp_ball_unit(n, 3.0).context("l_3 ball")?);
    }
    Ok(bodies)
}

/// Closed cycles on or outside the body with the origin in the vertex hull:
/// gauge length at least 4, antipodal pairs exactly 4.
fn suite_len_bound(
    instances: u64,
    seed: u64,
    tol: &Tolerances,
    rows: &mut Vec<Row>,
) -> anyhow::Result<usize> {
    let bodies = gauge_bodies()?;
    let mut violations = 0;
    for i in 0..instances {
        let body = &bodies[(i as usize) % bodies.len()];
        let m = 2 + ((i / bodies.len() as u64) % 5) as usize;
        let (points, is_equality) = if i % 7 == 3 {
            (random_equality_instance(body, seed, i)?, true)
        } else {
            (random_outer_instance(body, m, seed, i)?.0, false)
        };
        let report = verify_length_bound(body, &points, tol)?;
        let slack = if is_equality { 1e-12 } else { 1e-9 };
        let ok = report.margin >= -slack && report.chain_consistent;
        if !ok {
            violations += 1;
        }
        rows.push(Row {
            suite: "len-bound",
            instance: i,
            m: points.len(),
            value: report.length,
            margin: report.margin,
            ok,
        });
    }
    Ok(violations)
}

/// Boundary cycles whose outward normals surround the origin: same bound
/// through the normal-fan certificate.
fn suite_normal_bound(
    instances: u64,
    seed: u64,
    tol: &Tolerances,
    rows: &mut Vec<Row>,
) -> anyhow::Result<usize> {
    let bodies = smooth_bodies()?;
    let mut violations = 0;
    for i in 0..instances {
        let body = &bodies[(i as usize) % bodies.len()];
        let m = 3 + ((i / bodies.len() as u64) % 4) as usize;
        let points = random_normal_instance(body, m, seed, i)?;
        let report = verify_normal_length_bound(body, &points, tol)?;
        let ok = report.margin >= -1e-6;
        if !ok {
            violations += 1;
        }
        rows.push(Row {
            suite: "normal-bound",
            instance: i,
            m: points.len(),
            value: report.length,
            margin: report.margin,
            ok,
        });
    }
    Ok(violations)
}

/// Closed-chain comparison against the two-edge shortcut through a hull
/// point; also checks the collinearity identity of the proof point.
fn suite_shortcut(instances: u64, seed: u64, rows: &mut Vec<Row>) -> anyhow::Result<usize> {
    let bodies = gauge_bodies()?;
    let mut violations = 0;
    for i in 0..instances {
        let n = 2 + (i % 3) as usize;
        let m = 3 + ((i / 3) % 4) as usize;
        let (points, weights) = random_split_instance(n, m, seed, i);
        let body = bodies
            .iter()
            .find(|b| b.dim() == n)
            .expect("bodies cover dimensions 2-4");
        let zero = DVector::zeros(n);
        let check = shortcut(body, &points, &zero, &weights)?;
        let ok = check.margin >= -1e-9 && check.collinearity_gap <= 1e-9;
        if !ok {
            violations += 1;
        }
        rows.push(Row {
            suite: "shortcut",
            instance: i,
            m,
            value: check.lhs,
            margin: check.margin,
            ok,
        });
    }
    Ok(violations)
}

/// Cycle splitting: both arcs must carry valid certificates of an antipodal
/// pair and keep at least two vertices each.
fn suite_split(
    instances: u64,
    seed: u64,
    tol: &Tolerances,
    rows: &mut Vec<Row>,
) -> anyhow::Result<usize> {
    let mut violations = 0;
    for i in 0..instances {
        let n = 2 + (i % 3) as usize;
        let m = 3 + ((i / 3) % 5) as usize;
        let (points, weights) = random_split_instance(n, m, seed, i);
        let split = antipodal_split(&points, &weights)?;
        let residual = split.cert_a.residual.max(split.cert_b.residual);
        let sides_ok = split.j0 >= 1 && split.j0 <= m - 2;
        let ok = residual <= tol.hull_tol && sides_ok;
        if !ok {
            violations += 1;
        }
        rows.push(Row {
            suite: "split",
            instance: i,
            m,
            value: residual,
            margin: tol.hull_tol - residual,
            ok,
        });
    }
    Ok(violations)
}

/// Facet-point replacement on simplices: a sub-collection of the replacement
/// points must still surround the origin, with at least two members.
fn suite_cover(
    instances: u64,
    seed: u64,
    tol: &Tolerances,
    rows: &mut Vec<Row>,
) -> anyhow::Result<usize> {
    let mut violations = 0;
    for i in 0..instances {
        let k_dim = 2 + (i % 3) as usize;
        let (x, q) = random_cover_instance(k_dim, seed, i);
        let cover = simplex_cover(&x, &q, tol)?;
        let ok = cover.cert.residual <= tol.hull_tol && cover.subset.len() >= 2;
        if !ok {
            violations += 1;
        }
        rows.push(Row {
            suite: "cover",
            instance: i,
            m: cover.subset.len(),
            value: cover.cert.residual,
            margin: tol.hull_tol - cover.cert.residual,
            ok,
        });
    }
    Ok(violations)
}

/// Two-bounce witnesses on random smooth pairs must satisfy the reflection
/// law: small residual, nonnegative multipliers, vanishing normal sum.
fn suite_criticality(
    instances: u64,
    seed: u64,
    tol: &Tolerances,
    rows: &mut Vec<Row>,
) -> anyhow::Result<usize> {
    use rand::Rng;
    let mut violations = 0;
    for i in 0..instances {
        let mut rng = minkbill_core::numeric::stream_rng(seed ^ 0x6372_6974, i);
        let n = 2 + (i % 2) as usize;
        let axes_k: Vec<f64> = (0..n).map(|_| rng.gen_range(0.6..1.8)).collect();
        let k = ConvexBody::ellipsoid_diag(&axes_k)?;
        let t = if i % 3 == 0 {
            let axes_t: Vec<f64> = (0..n).map(|_| rng.gen_range(0.6..1.8)).collect();
            ConvexBody::ellipsoid_diag(&axes_t)?
        } else {
            let p = if i % 3 == 1 { 1.5 } else { 3.0 };
            ConvexBody::lp_ball_unit(n, p)?.scale(rng.gen_range(0.7..1.5))?
        };
        let opts = SearchOptions { m_max: 2, starts: 8, seed: seed.wrapping_add(i), tol: tol.clone() };
        let est = two_bounce_capacity(&k, &t, &opts)?;
        let d = &est.diagnostics;
        let ok = d.witness_residual <= tol.criticality_tol
            && d.witness_min_multiplier >= -1e-8
            && d.witness_closure_residual <= tol.criticality_tol;
        if !ok {
            violations += 1;
        }
        rows.push(Row {
            suite: "criticality",
            instance: i,
            m: 2,
            value: est.value,
            margin: tol.criticality_tol - d.witness_residual,
            ok,
        });
    }
    Ok(violations)
}
