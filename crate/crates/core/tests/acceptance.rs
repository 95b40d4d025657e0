//! Acceptance suite: one PASS/FAIL line per criterion, then a single assert.
//!
//! Run with `cargo test -p slopekit-core --test acceptance -- --nocapture`.

use std::time::{Duration, Instant};

use slopekit::suites::{self, OMS_CASES, OMS_CUTOFF, OMS_PRECISION};

const SEED: u64 = 20240601;

const LIMIT_TEICHMULLER: Duration = Duration::from_secs(5);
const LIMIT_SPECIALIZATION: Duration = Duration::from_secs(30);
const LIMIT_RIESZ: Duration = Duration::from_secs(60);
const LIMIT_OMS: Duration = Duration::from_secs(600);

/// Largest allowed `loss` in `p^(N - loss)` for the specialization square.
const SPECIALIZATION_LOSS: u32 = 2;
const RIESZ_OPERATORS: usize = 200;
const TOWER_LEVELS: u32 = 6;
const MULTI_TUPLES: usize = 50;
const FIL_ELEMENTS: usize = 50;
const FIL_GROUP_ELEMENTS: usize = 20;
const TWIG_INPUTS: usize = 20;

struct Line {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

#[test]
fn acceptance() {
    let mut lines = Vec::new();

    let (teich, t) = timed(suites::teichmuller_suite);
    lines.push(Line {
        id: 1,
        name: "Teichmuller and one-unit powers",
        pass: teich.failures.is_empty() && teich.checked > 0 && t < LIMIT_TEICHMULLER,
        detail: format!("{} units checked, {} failures, {:.2?}", teich.checked, teich.failures.len(), t),
    });

    let twig = suites::twig_normalization_suite(SEED);
    lines.push(Line {
        id: 2,
        name: "twig normalization at the u-point",
        pass: twig.failures.is_empty() && twig.bf_weights.len() == 20 && twig.tp_weights.len() == 20,
        detail: format!(
            "{} BF and {} TP weights, failures {:?}",
            twig.bf_weights.len(),
            twig.tp_weights.len(),
            twig.failures
        ),
    });

    let (spec, t) = timed(|| suites::specialization_suite(SEED, TWIG_INPUTS));
    lines.push(match spec {
        Ok(s) => Line {
            id: 3,
            name: "specialization square",
            pass: s.pass(SPECIALIZATION_LOSS) && s.checked == 2 * 3 * TWIG_INPUTS && t < LIMIT_SPECIALIZATION,
            detail: format!(
                "{} values at N={} D={}, max loss {}, {} failures, {:.2?}",
                s.checked,
                s.precision,
                s.degree,
                s.max_loss,
                s.failures.len(),
                t
            ),
        },
        Err(e) => Line {
            id: 3,
            name: "specialization square",
            pass: false,
            detail: e.to_string(),
        },
    });

    let (riesz, t) = timed(|| suites::riesz_suite(SEED, RIESZ_OPERATORS, TOWER_LEVELS));
    lines.push(Line {
        id: 4,
        name: "Riesz identities",
        pass: riesz.identities_pass() && riesz.cases.len() == RIESZ_OPERATORS && t < LIMIT_RIESZ,
        detail: format!(
            "{} verified, {} refused {:?}, {} wrong, {} rank mismatches, {:.2?}",
            riesz.verified,
            riesz.refused,
            riesz.refusals(),
            riesz.wrong,
            riesz.rank_mismatches,
            t
        ),
    });

    let full_depth = riesz
        .cases
        .iter()
        .filter(|c| c.tower_levels == TOWER_LEVELS)
        .count();
    lines.push(Line {
        id: 6,
        name: "projector tower",
        pass: riesz.tower_pass(),
        detail: format!(
            "{} towers checked ({} to r = {}), {} refused for precision, {} failures",
            riesz.tower_checked, full_depth, TOWER_LEVELS, riesz.tower_refused, riesz.tower_failures
        ),
    });

    let multi = suites::multi_slope_suite(SEED, MULTI_TUPLES);
    lines.push(Line {
        id: 5,
        name: "multi-slope iterated = intersection",
        pass: multi.pass() && multi.cases.len() == MULTI_TUPLES,
        detail: format!("{} agreed, {} refused, {} disagreed", multi.agreed, multi.refused, multi.disagreed),
    });

    lines.push(match suites::fil_suite(SEED, FIL_ELEMENTS, FIL_GROUP_ELEMENTS) {
        Ok(f) => Line {
            id: 7,
            name: "Fil^1 invariance",
            pass: f.pass() && f.actions == FIL_ELEMENTS * FIL_GROUP_ELEMENTS,
            detail: format!(
                "{}/{} actions stay in Fil^1, {}/{} compact actions keep fil_degree",
                f.kept_fil1, f.actions, f.compact_non_decreasing, f.compact_checked
            ),
        },
        Err(e) => Line {
            id: 7,
            name: "Fil^1 invariance",
            pass: false,
            detail: e.to_string(),
        },
    });

    let (oms, t) = timed(suites::oms_suite);
    let summary: Vec<String> = oms
        .iter()
        .map(|c| match (&c.comparison, &c.error) {
            (Some(cmp), _) => format!(
                "({},{},{}) {} vs {} slope-0",
                c.tame_level,
                c.k,
                c.p,
                cmp.overconvergent_slopes.len(),
                cmp.classical_slopes.len()
            ),
            (None, Some(e)) => format!("({},{},{}) error {e}", c.tame_level, c.k, c.p),
            (None, None) => "no result".into(),
        })
        .collect();
    lines.push(Line {
        id: 8,
        name: "OMS classicality",
        pass: oms.len() == OMS_CASES.len() && oms.iter().all(|c| c.matches()) && t < LIMIT_OMS,
        detail: format!(
            "cutoff {OMS_CUTOFF}, p^{OMS_PRECISION}: {}, {:.2?}",
            summary.join("; "),
            t
        ),
    });

    let gsp4 = suites::gsp4_suite();
    lines.push(Line {
        id: 9,
        name: "GSp4 weight combinatorics",
        pass: gsp4.failures.is_empty() && gsp4.checked > 0,
        detail: format!("{} tuples, {} failures", gsp4.checked, gsp4.failures.len()),
    });

    let a = serde_json::to_string(&suites::selftest(SEED, false)).expect("serializes");
    let b = serde_json::to_string(&suites::selftest(SEED, false)).expect("serializes");
    lines.push(Line {
        id: 10,
        name: "selftest determinism",
        pass: a == b,
        detail: format!("{} bytes, identical: {}", a.len(), a == b),
    });

    lines.sort_by_key(|l| l.id);
    for l in &lines {
        println!(
            "criterion {:>2} {} {}: {}",
            l.id,
            if l.pass { "PASS" } else { "FAIL" },
            l.name,
            l.detail
        );
    }
    let failed: Vec<u32> = lines.iter().filter(|l| !l.pass).map(|l| l.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
