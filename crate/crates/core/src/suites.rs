//! Seeded property suites: random compact operators with prescribed column
//! valuations, commuting tuples, random `Fil^1` elements, and the exhaustive
//! character and weight checks. Each suite returns a serializable report.

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::branching::{
    self, big_twig_bf, big_twig_tp, classical_twig_bf, classical_twig_tp, first_row, gsp4_weights, SphericalPairData,
};
use crate::coeff::{act_compact, act_group, fil_degree, GroupElement, LIFunction, Payload, TwistedFunction};
use crate::matrix::Matrix;
use crate::padic::{self, PadicNum, PadicRing};
use crate::slope::{
    multi_slope_decompose, projector_poly_tower, riesz_decompose, scaled_eq_mod, verify_riesz, CompactOperator,
    SlopeError,
};
use crate::weights::{Character, ExampleTag, WeightDisc};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn unit<R: Rng>(rng: &mut R, ring: PadicRing) -> PadicNum {
    loop {
        let x = rng.gen_range(0..ring.modulus());
        if x % ring.p() != 0 {
            return ring.elem(x as i128);
        }
    }
}

fn any<R: Rng>(rng: &mut R, ring: PadicRing) -> PadicNum {
    ring.elem(rng.gen_range(0..ring.modulus()) as i128)
}

/// A nondecreasing column-valuation profile starting at 0.
pub fn random_profile<R: Rng>(rng: &mut R, size: usize) -> Vec<u32> {
    let mut v = 0;
    (0..size)
        .map(|j| {
            if j > 0 {
                v += [0, 1, 1, 2][rng.gen_range(0..4)];
            }
            v
        })
        .collect()
}

/// A random operator whose column `j` is divisible by `p^profile[j]`. The
/// matrix is the whole operator, so it is declared finite rank.
pub fn random_compact<R: Rng>(rng: &mut R, ring: PadicRing, profile: &[u32]) -> Result<CompactOperator, SlopeError> {
    let t = profile.len();
    let m = Matrix::from_fn(ring, t, t, |_, j| any(rng, ring).mul_p_power(profile[j]));
    operator_at(&m, profile, ring.precision())
}

/// The operator `m` reduced to `p^n`, with its profile as certificate.
pub fn operator_at(m: &Matrix, profile: &[u32], n: u32) -> Result<CompactOperator, SlopeError> {
    let reduced = m.reduced_to(n);
    let cert = profile.iter().map(|c| (*c).min(n)).collect();
    let labels = (0..m.cols()).map(|j| format!("e{j}")).collect();
    Ok(CompactOperator::new(reduced, cert, labels)?.into_finite_rank())
}

/// Working precisions tried in turn: a decomposition refused for lack of
/// precision is retried with more digits, up to the `u64` limit.
pub fn precision_ladder(p: u64) -> Vec<u32> {
    let top = padic::max_precision(p);
    let mut ladder: Vec<u32> = [top / 2, 3 * top / 4, top].into_iter().filter(|n| *n >= 4).collect();
    ladder.dedup();
    ladder
}

/// A random matrix invertible over `Z_p`.
fn random_unimodular<R: Rng>(rng: &mut R, ring: PadicRing, t: usize) -> Matrix {
    loop {
        let m = Matrix::from_fn(ring, t, t, |_, _| any(rng, ring));
        if m.det().is_ok_and(|d| d.is_unit()) {
            return m;
        }
    }
}

/// Short name of an error variant, used to tally refusals.
pub fn error_kind(e: &SlopeError) -> &'static str {
    match e {
        SlopeError::Certificate(_) => "certificate",
        SlopeError::Unstable { .. } => "unstable",
        SlopeError::InsufficientPrecision { .. } => "insufficient-precision",
        SlopeError::VertexAmbiguous { .. } => "vertex-ambiguous",
        SlopeError::NoIntegralSeparation { .. } => "no-integral-separation",
        SlopeError::RankMismatch { .. } => "rank-mismatch",
        SlopeError::ComplementSingular => "complement-singular",
        SlopeError::PrecisionFloor { .. } => "precision-floor",
        SlopeError::NotCommuting(..) => "not-commuting",
        SlopeError::AuxTooSmall { .. } => "aux-too-small",
        SlopeError::TowerInstability(_) => "tower-instability",
        SlopeError::Dimension(_) => "dimension",
        SlopeError::Matrix(_) => "matrix",
        SlopeError::Series(_) => "series",
        SlopeError::Padic(_) => "padic",
    }
}

/// Errors that are refusals (precision or spectral degeneracy) rather than
/// malformed input.
fn is_refusal(e: &SlopeError) -> bool {
    !matches!(
        e,
        SlopeError::Certificate(_)
            | SlopeError::Dimension(_)
            | SlopeError::NotCommuting(..)
            | SlopeError::AuxTooSmall { .. }
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct RieszCase {
    pub p: u64,
    pub size: usize,
    pub h: String,
    pub profile: Vec<u32>,
    /// `verified`, `refused` or `wrong`.
    pub outcome: String,
    pub degree: Option<usize>,
    pub rank: Option<usize>,
    pub certified_precision: Option<u32>,
    /// Working precision of the last attempt.
    pub working_precision: u32,
    /// Error kind when refused.
    pub refusal: Option<String>,
    pub detail: String,
    /// Projector tower levels checked (0 when refused or not built).
    pub tower_levels: u32,
    pub tower_ok: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RieszSuite {
    pub seed: u64,
    pub cases: Vec<RieszCase>,
    pub verified: usize,
    pub refused: usize,
    pub wrong: usize,
    pub rank_mismatches: usize,
    pub tower_checked: usize,
    /// Verified nontrivial cases whose tower exhausted the precision.
    pub tower_refused: usize,
    pub tower_failures: usize,
}

impl RieszSuite {
    pub fn identities_pass(&self) -> bool {
        self.wrong == 0 && self.rank_mismatches == 0 && self.verified > 0
    }

    /// Refused cases by error kind.
    pub fn refusals(&self) -> std::collections::BTreeMap<String, usize> {
        let mut out = std::collections::BTreeMap::new();
        for c in self.cases.iter().filter(|c| c.outcome == "refused") {
            *out.entry(c.refusal.clone().unwrap_or_default()).or_insert(0) += 1;
        }
        out
    }

    pub fn tower_pass(&self) -> bool {
        self.tower_failures == 0 && self.tower_checked > 0
    }
}

/// Random operators of size `<= 12` over `p in {3, 5}`: every decomposition
/// that is returned must satisfy all projector identities, and the projector
/// tower is checked on levels `1..=tower_levels`.
pub fn riesz_suite(seed: u64, count: usize, tower_levels: u32) -> RieszSuite {
    let mut rng = rng(seed);
    let mut cases = Vec::with_capacity(count);
    for i in 0..count {
        let p = if i % 2 == 0 { 3 } else { 5 };
        let ladder = precision_ladder(p);
        let top = PadicRing::new(p, *ladder.last().expect("nonempty")).expect("valid ring");
        let size = rng.gen_range(2..=12);
        let profile = random_profile(&mut rng, size);
        let h = Ratio::from_integer(rng.gen_range(0..=2));
        let master = Matrix::from_fn(top, size, size, |_, j| any(&mut rng, top).mul_p_power(profile[j]));
        let mut case = RieszCase {
            p,
            size,
            h: h.to_string(),
            profile: profile.clone(),
            outcome: String::new(),
            degree: None,
            rank: None,
            certified_precision: None,
            working_precision: 0,
            refusal: None,
            detail: String::new(),
            tower_levels: 0,
            tower_ok: None,
        };
        let mut attempt = None;
        for &n in &ladder {
            case.working_precision = n;
            let u = match operator_at(&master, &profile, n) {
                Ok(u) => u,
                Err(e) => {
                    attempt = Some(Err(e));
                    break;
                }
            };
            match riesz_decompose(&u, h) {
                Ok(dec) => {
                    attempt = Some(Ok((u, dec)));
                    break;
                }
                Err(e) => {
                    let retry = is_refusal(&e);
                    attempt = Some(Err(e));
                    if !retry {
                        break;
                    }
                }
            }
        }
        match attempt.expect("ladder is nonempty") {
            Err(e) => {
                case.outcome = if is_refusal(&e) { "refused" } else { "wrong" }.into();
                case.refusal = Some(error_kind(&e).to_string());
                case.detail = e.to_string();
            }
            Ok((u, dec)) => {
                case.degree = Some(dec.degree);
                case.rank = Some(dec.rank());
                case.certified_precision = Some(dec.certified_precision);
                match verify_riesz(&u, &dec) {
                    Ok(report) if report.all_hold() => case.outcome = "verified".into(),
                    Ok(report) => {
                        case.outcome = "wrong".into();
                        case.detail = format!("{report:?}");
                    }
                    Err(e) => {
                        case.outcome = "wrong".into();
                        case.detail = e.to_string();
                    }
                }
                if case.outcome == "verified" && dec.degree > 0 {
                    // The tower carries a p^-shift scaling, so it is checked at
                    // the top of the ladder against the projector found there.
                    let top_n = top.precision();
                    let at_top = if case.working_precision == top_n {
                        Ok((u, dec))
                    } else {
                        operator_at(&master, &profile, top_n)
                            .and_then(|ut| riesz_decompose(&ut, h).map(|dt| (ut, dt)))
                    };
                    match at_top.and_then(|(ut, dt)| check_tower(&ut, &dt, h, tower_levels)) {
                        Ok((levels, ok)) => {
                            case.tower_levels = levels;
                            case.tower_ok = Some(ok);
                        }
                        Err(e) => case.detail = format!("tower refused: {e}"),
                    }
                }
            }
        }
        cases.push(case);
    }
    let count_of = |s: &str| cases.iter().filter(|c| c.outcome == s).count();
    RieszSuite {
        seed,
        verified: count_of("verified"),
        refused: count_of("refused"),
        wrong: count_of("wrong"),
        rank_mismatches: cases
            .iter()
            .filter(|c| c.outcome == "verified" && c.degree != c.rank)
            .count(),
        tower_checked: cases.iter().filter(|c| c.tower_ok.is_some()).count(),
        tower_refused: cases
            .iter()
            .filter(|c| c.outcome == "verified" && c.degree.is_some_and(|d| d > 0) && c.tower_ok.is_none())
            .count(),
        tower_failures: cases.iter().filter(|c| c.tower_ok == Some(false)).count(),
        cases,
    }
}

/// Checks `e_r = e mod p^r` and `e_r = e_(r-1) mod p^(r-1)` for
/// `r <= min(levels, certified precision)`; returns the depth and verdict.
fn check_tower(
    u: &CompactOperator,
    dec: &crate::slope::SlopeDecomposition,
    h: Ratio<i64>,
    levels: u32,
) -> Result<(u32, bool), SlopeError> {
    let levels = levels.min(dec.certified_precision);
    let tower = projector_poly_tower(std::slice::from_ref(u), &[h], levels)?;
    let mut ok = true;
    let mut prev: Option<(Matrix, u32)> = None;
    for r in 1..=levels {
        let (er, s) = tower.apply(std::slice::from_ref(u), r)?;
        ok &= scaled_eq_mod(&er, s, &dec.projector, dec.shift, r);
        if let Some((pm, ps)) = &prev {
            ok &= scaled_eq_mod(&er, s, pm, *ps, r - 1);
        }
        prev = Some((er, s));
    }
    Ok((levels, ok))
}

#[derive(Debug, Clone, Serialize)]
pub struct MultiSlopeCase {
    pub p: u64,
    pub size: usize,
    pub operators: usize,
    pub hs: Vec<String>,
    pub outcome: String,
    pub dimension: Option<usize>,
    pub orderings_checked: usize,
    pub working_precision: u32,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct MultiSlopeSuite {
    pub seed: u64,
    pub cases: Vec<MultiSlopeCase>,
    pub agreed: usize,
    pub refused: usize,
    pub disagreed: usize,
}

impl MultiSlopeSuite {
    pub fn pass(&self) -> bool {
        self.disagreed == 0 && self.agreed > 0
    }
}

/// Commuting tuples `u_i = P D_i P^-1`, with `P` invertible over `Z_p` and
/// `D_i` diagonal with prescribed valuations, or polynomials in one random
/// compact operator.
pub fn random_commuting<R: Rng>(rng: &mut R, ring: PadicRing, size: usize, n: usize) -> Vec<CompactOperator> {
    if rng.gen_bool(0.5) {
        let pm = random_unimodular(rng, ring, size);
        let pinv = pm.inverse().expect("unimodular");
        (0..n)
            .map(|_| {
                let diag: Vec<PadicNum> = (0..size)
                    .map(|_| unit(rng, ring).mul_p_power(rng.gen_range(0..=3)))
                    .collect();
                let m = pm.mul(&Matrix::diagonal(ring, &diag)).and_then(|x| x.mul(&pinv)).expect("square");
                CompactOperator::finite(m)
            })
            .collect()
    } else {
        let profile = random_profile(rng, size);
        let base = Matrix::from_fn(ring, size, size, |_, j| any(rng, ring).mul_p_power(profile[j]));
        (0..n)
            .map(|_| {
                let coeffs: Vec<PadicNum> = (0..3).map(|_| any(rng, ring)).collect();
                CompactOperator::finite(base.poly_eval(&coeffs).expect("square"))
            })
            .collect()
    }
}

/// Multi-slope decompositions of commuting tuples: the iterated construction
/// must equal the intersection for every ordering.
pub fn multi_slope_suite(seed: u64, count: usize) -> MultiSlopeSuite {
    let mut rng = rng(seed);
    let mut cases = Vec::with_capacity(count);
    for i in 0..count {
        let p = if i % 2 == 0 { 3 } else { 5 };
        let ladder = precision_ladder(p);
        let top = PadicRing::new(p, *ladder.last().expect("nonempty")).expect("valid ring");
        let size = rng.gen_range(2..=7);
        let n = rng.gen_range(1..=3);
        let master = random_commuting(&mut rng, top, size, n);
        let hs: Vec<Ratio<i64>> = (0..n).map(|_| Ratio::from_integer(rng.gen_range(0..=1))).collect();
        let h_aux = hs.iter().sum();
        let mut case = MultiSlopeCase {
            p,
            size,
            operators: n,
            hs: hs.iter().map(|h| h.to_string()).collect(),
            outcome: String::new(),
            dimension: None,
            orderings_checked: 0,
            working_precision: 0,
            detail: String::new(),
        };
        for &prec in &ladder {
            let us: Vec<CompactOperator> =
                master.iter().map(|u| CompactOperator::finite(u.matrix().reduced_to(prec))).collect();
            case.working_precision = prec;
            match multi_slope_decompose(&us, &hs, h_aux) {
                Ok(res) => {
                    case.dimension = Some(res.dimension);
                    case.orderings_checked = res.orderings_checked;
                    case.detail.clear();
                    case.outcome = if res.iterated_equals_intersection && res.orderings_agree {
                        "agreed"
                    } else {
                        "disagreed"
                    }
                    .into();
                    break;
                }
                Err(e) => {
                    case.outcome = if is_refusal(&e) { "refused" } else { "disagreed" }.into();
                    case.detail = e.to_string();
                    if !is_refusal(&e) {
                        break;
                    }
                }
            }
        }
        cases.push(case);
    }
    let count_of = |s: &str| cases.iter().filter(|c| c.outcome == s).count();
    MultiSlopeSuite {
        seed,
        agreed: count_of("agreed"),
        refused: count_of("refused"),
        disagreed: count_of("disagreed"),
        cases,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FilSuite {
    pub seed: u64,
    pub elements: usize,
    pub group_elements: usize,
    pub actions: usize,
    pub kept_fil1: usize,
    pub compact_checked: usize,
    pub compact_non_decreasing: usize,
}

impl FilSuite {
    pub fn pass(&self) -> bool {
        self.kept_fil1 == self.actions && self.compact_non_decreasing == self.compact_checked && self.actions > 0
    }
}

/// Random `Fil^1` elements of the two-variable LI module (the BF coordinates)
/// under random Iwahori elements, and `fil_degree` under the `A^-` action.
pub fn fil_suite(seed: u64, elements: usize, group_elements: usize) -> Result<FilSuite, crate::coeff::CoeffError> {
    let mut rng = rng(seed);
    let ring = PadicRing::new(3, 6)?;
    let kappa = Character::algebraic(ring, &[2, 1, 0, 1]);
    let gs: Vec<GroupElement> = (0..group_elements)
        .map(|_| GroupElement::random(&mut rng, ring, Some(ExampleTag::Bf), 2))
        .collect::<Result<_, _>>()?;
    let mut report = FilSuite {
        seed,
        elements,
        group_elements,
        actions: 0,
        kept_fil1: 0,
        compact_checked: 0,
        compact_non_decreasing: 0,
    };
    for _ in 0..elements {
        let f = LIFunction::random(&mut rng, ring, 2, 1, 4, 1)?;
        let tf = TwistedFunction::new(kappa.clone(), Payload::Li(f.clone()))?;
        for g in &gs {
            let out = act_group(g, &tf)?;
            report.actions += 1;
            if let Payload::Li(h) = out.payload() {
                if fil_degree(h).at_least(1) {
                    report.kept_fil1 += 1;
                }
            }
        }
        // The A^- action lowers the analyticity level, so it starts at level 2.
        let g2 = LIFunction::random(&mut rng, ring, 2, 2, 4, 1)?;
        let flat = TwistedFunction::new(Character::algebraic(ring, &[0, 0, 0, 0]), Payload::Li(g2.clone()))?;
        let out = act_compact(&[1, 1], &flat)?;
        report.compact_checked += 1;
        if let Payload::Li(h) = out.payload() {
            if fil_degree(h) >= fil_degree(&g2) {
                report.compact_non_decreasing += 1;
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct TeichmullerSuite {
    pub checked: usize,
    pub failures: Vec<String>,
}

/// For `p in {3, 5, 7}`, `N <= 10` and every unit mod `p^2`: `omega(z)^(p-1) = 1`,
/// `omega(z) = z mod p`, and `one_unit_pow` agrees with repeated
/// multiplication for exponents up to 50.
pub fn teichmuller_suite() -> TeichmullerSuite {
    let mut checked = 0;
    let mut failures = Vec::new();
    for p in [3u64, 5, 7] {
        for n in 2..=10u32 {
            let ring = PadicRing::new(p, n).expect("valid ring");
            for z in (1..p * p).filter(|z| z % p != 0) {
                let x = ring.elem(z as i128);
                checked += 1;
                let w = match padic::teichmuller(&x) {
                    Ok(w) => w,
                    Err(e) => {
                        failures.push(format!("p={p} N={n} z={z}: {e}"));
                        continue;
                    }
                };
                if w.pow(p - 1) != ring.one() || !w.eq_mod(&x, 1) {
                    failures.push(format!("p={p} N={n} z={z}: omega fails"));
                }
                let u = padic::one_unit_part(&x).expect("unit");
                let mut acc = ring.one();
                for e in 1..=50i64 {
                    acc = acc * u;
                    let got = padic::one_unit_pow(&u, &ring.elem(e as i128)).expect("one-unit");
                    let int = padic::one_unit_pow_int(&u, e).expect("one-unit");
                    if got != acc || int != acc {
                        failures.push(format!("p={p} N={n} z={z} e={e}: power mismatch"));
                        break;
                    }
                }
            }
        }
    }
    TeichmullerSuite { checked, failures }
}

#[derive(Debug, Clone, Serialize)]
pub struct TwigNormalizationSuite {
    pub bf_weights: Vec<[i64; 3]>,
    pub tp_weights: Vec<[i64; 3]>,
    pub failures: Vec<String>,
}

/// Classical twigs at the `u`-point for 20 weights per example; the value
/// must be exactly 1 mod `p^N`.
pub fn twig_normalization_suite(seed: u64) -> TwigNormalizationSuite {
    let mut rng = rng(seed);
    let ring = PadicRing::new(5, 8).expect("valid ring");
    let mut failures = Vec::new();
    let mut bf_weights = Vec::new();
    while bf_weights.len() < 20 {
        let k = rng.gen_range(0..=12);
        let kp = rng.gen_range(0..=12);
        let j = rng.gen_range(0..=k.min(kp));
        if !bf_weights.contains(&[k, kp, j]) {
            bf_weights.push([k, kp, j]);
        }
    }
    let u = [ring.one(), ring.zero(), ring.one(), ring.one()];
    for w in &bf_weights {
        match classical_twig_bf(w[0], w[1], w[2], u) {
            Ok(t) if t.as_scalar() == Some(ring.one()) => {}
            Ok(t) => failures.push(format!("BF {w:?}: {:?}", t.as_scalar())),
            Err(e) => failures.push(format!("BF {w:?}: {e}")),
        }
    }
    let pair = SphericalPairData::new(ExampleTag::Tp);
    let rows: Vec<[PadicNum; 2]> = pair.u_matrices(ring).iter().map(first_row).collect();
    let rows = [rows[0], rows[1], rows[2]];
    let mut tp_weights = Vec::new();
    while tp_weights.len() < 20 {
        let r: [i64; 3] = [rng.gen_range(0..=10), rng.gen_range(0..=10), rng.gen_range(0..=10)];
        let sum: i64 = r.iter().sum();
        let triangle = r.iter().all(|x| 2 * x <= sum);
        if sum % 2 == 0 && triangle && !tp_weights.contains(&r) {
            tp_weights.push(r);
        }
    }
    for w in &tp_weights {
        match classical_twig_tp(*w, rows) {
            Ok(t) if t.as_scalar() == Some(ring.one()) => {}
            Ok(t) => failures.push(format!("TP {w:?}: {:?}", t.as_scalar())),
            Err(e) => failures.push(format!("TP {w:?}: {e}")),
        }
    }
    TwigNormalizationSuite {
        bf_weights,
        tp_weights,
        failures,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpecializationSuite {
    pub p: u64,
    pub precision: u32,
    pub degree: u32,
    pub checked: usize,
    pub max_loss: u32,
    pub failures: Vec<String>,
}

impl SpecializationSuite {
    pub fn pass(&self, loss_bound: u32) -> bool {
        self.failures.is_empty() && self.max_loss <= loss_bound && self.checked > 0
    }
}

/// Family Big Twigs over a weight disc specialized at algebraic weights,
/// against the algebraic Big Twig: `inputs` random inputs times 3 weights
/// for each of BF and TP.
pub fn specialization_suite(seed: u64, inputs: usize) -> Result<SpecializationSuite, branching::BranchError> {
    let mut rng = rng(seed);
    let (p, n, d) = (3u64, 8u32, 20u32);
    let ring = PadicRing::new(p, n)?;
    let mut report = SpecializationSuite {
        p,
        precision: n,
        degree: d,
        checked: 0,
        max_loss: 0,
        failures: Vec::new(),
    };
    let record = |report: &mut SpecializationSuite, label: String, got: PadicNum, want: PadicNum| {
        let loss = n.saturating_sub(got.precision());
        report.max_loss = report.max_loss.max(loss);
        report.checked += 1;
        if !got.eq_mod(&want, got.precision()) {
            report.failures.push(label);
        }
    };
    let disc = WeightDisc::new(ring, vec![4, 3, 1], 0, d);
    let kappa = disc.universal();
    let bf_weights = disc.algebraic_points(3);
    for _ in 0..inputs {
        let (z1, z2) = (any(&mut rng, ring), any(&mut rng, ring));
        let i = [unit(&mut rng, ring), any(&mut rng, ring), any(&mut rng, ring), unit(&mut rng, ring)];
        let big = big_twig_bf(&kappa, z1, z2, i)?;
        for w in &bf_weights {
            let alg = big_twig_bf(&Character::algebraic(ring, w), z1, z2, i)?;
            let want = alg.as_scalar().ok_or(branching::BranchError::FamilyWeight)?;
            record(&mut report, format!("BF {w:?}"), big.specialize(&disc, w)?, want);
        }
    }
    // TP weights step by 2(p-1) so the starred torsion parts stay fixed.
    let disc = WeightDisc::new(ring, vec![2, 2, 2], 0, d);
    let kappa = disc.universal();
    let tp_weights = [[2, 2, 2], [6, 6, 6], [6, 2, 6]];
    for _ in 0..inputs {
        let t = [unit(&mut rng, ring), unit(&mut rng, ring), unit(&mut rng, ring)];
        let z = [any(&mut rng, ring), any(&mut rng, ring), any(&mut rng, ring)];
        let h = loop {
            let h = [any(&mut rng, ring), any(&mut rng, ring), any(&mut rng, ring), any(&mut rng, ring)];
            if (h[0] * h[3] - h[1] * h[2]).is_unit() {
                break h;
            }
        };
        let big = big_twig_tp(&kappa, t, z, h)?;
        for w in &tp_weights {
            let alg = big_twig_tp(&Character::algebraic(ring, w), t, z, h)?;
            let want = alg.as_scalar().ok_or(branching::BranchError::FamilyWeight)?;
            record(&mut report, format!("TP {w:?}"), big.specialize(&disc, w)?, want);
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct Gsp4Suite {
    pub checked: usize,
    pub failures: Vec<String>,
}

/// Every `0 <= a, b <= 5` and legal `(q, r)`: `(c, d)` and the exponent
/// vector against the closed formulas, plus the pullback through `omega`.
pub fn gsp4_suite() -> Gsp4Suite {
    let ring = PadicRing::new(7, 4).expect("valid ring");
    let mut checked = 0;
    let mut failures = Vec::new();
    for a in 0..=5i64 {
        for b in 0..=5i64 {
            for q in 0..=a {
                for r in 0..=b {
                    checked += 1;
                    let w = match gsp4_weights(a, b, q, r) {
                        Ok(w) => w,
                        Err(e) => {
                            failures.push(format!("({a},{b},{q},{r}): {e}"));
                            continue;
                        }
                    };
                    let (c, d) = (a + b - q - r, a - q + r);
                    let exps = [a + b, a, -2 * a - b, r - q + a, q];
                    let lam = Character::algebraic(ring, &exps);
                    let pulled = crate::weights::omega_pullback(&lam, ExampleTag::Gsp4)
                        .ok()
                        .and_then(|mu| mu.algebraic_weights());
                    if (w.c, w.d) != (c, d) || w.exponents != exps || pulled != Some(vec![c, d, -(c + d), -d, 0]) {
                        failures.push(format!("({a},{b},{q},{r}): got {w:?}"));
                    }
                }
            }
        }
    }
    Gsp4Suite { checked, failures }
}

/// Parameters of the criterion-8 comparison: `(N, k, p)` with `h = 0`,
/// `m = 1`, moment cutoff 10 and precision `p^8`.
pub const OMS_CASES: [(u64, u32, u64); 3] = [(11, 2, 3), (11, 2, 11), (14, 2, 3)];
pub const OMS_CUTOFF: usize = 10;
pub const OMS_PRECISION: u32 = 8;

#[derive(Debug, Clone, Serialize)]
pub struct OmsCase {
    pub tame_level: u64,
    pub k: u32,
    pub p: u64,
    pub comparison: Option<crate::oms::SlopeComparison>,
    pub error: Option<String>,
}

impl OmsCase {
    pub fn matches(&self) -> bool {
        self.comparison.as_ref().is_some_and(|c| c.matches)
    }
}

pub fn oms_suite() -> Vec<OmsCase> {
    OMS_CASES
        .iter()
        .map(|&(n, k, p)| {
            let res = crate::oms::up_slopes(n, k, p, 1, Ratio::from_integer(0), OMS_CUTOFF, OMS_PRECISION);
            OmsCase {
                tame_level: n,
                k,
                p,
                error: res.as_ref().err().map(|e| e.to_string()),
                comparison: res.ok(),
            }
        })
        .collect()
}

/// Every suite under one seed. Contains no timings, so equal seeds give
/// byte-identical JSON.
#[derive(Debug, Clone, Serialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub teichmuller: TeichmullerSuite,
    pub twig_normalization: TwigNormalizationSuite,
    pub specialization: Option<SpecializationSuite>,
    pub riesz: RieszSuite,
    pub multi_slope: MultiSlopeSuite,
    pub filtration: Option<FilSuite>,
    pub oms: Vec<OmsCase>,
    pub gsp4: Gsp4Suite,
    pub errors: Vec<String>,
    pub passed: bool,
}

/// Runs all suites; `include_oms` adds the overconvergent comparison.
pub fn selftest(seed: u64, include_oms: bool) -> SelftestReport {
    let mut errors = Vec::new();
    let teichmuller = teichmuller_suite();
    let twig_normalization = twig_normalization_suite(seed);
    let specialization = specialization_suite(seed, 20)
        .map_err(|e| errors.push(format!("specialization: {e}")))
        .ok();
    let riesz = riesz_suite(seed, 200, 6);
    let multi_slope = multi_slope_suite(seed, 50);
    let filtration = fil_suite(seed, 50, 20)
        .map_err(|e| errors.push(format!("filtration: {e}")))
        .ok();
    let oms = if include_oms { oms_suite() } else { Vec::new() };
    let gsp4 = gsp4_suite();
    let passed = errors.is_empty()
        && teichmuller.failures.is_empty()
        && twig_normalization.failures.is_empty()
        && specialization.as_ref().is_some_and(|s| s.pass(2))
        && riesz.identities_pass()
        && riesz.tower_pass()
        && multi_slope.pass()
        && filtration.as_ref().is_some_and(|f| f.pass())
        && oms.iter().all(|c| c.matches())
        && gsp4.failures.is_empty();
    SelftestReport {
        seed,
        teichmuller,
        twig_normalization,
        specialization,
        riesz,
        multi_slope,
        filtration,
        oms,
        gsp4,
        errors,
        passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_and_operators() {
        let mut r = rng(1);
        let ring = PadicRing::new(3, 10).unwrap();
        let prof = random_profile(&mut r, 8);
        assert_eq!(prof[0], 0);
        assert!(prof.windows(2).all(|w| w[0] <= w[1]));
        let u = random_compact(&mut r, ring, &prof).unwrap();
        for (j, v) in prof.iter().enumerate() {
            assert!(u.matrix().column_valuation(j) >= *v);
        }
        for us in (0..4).map(|_| random_commuting(&mut r, ring, 4, 3)) {
            let a = us[0].matrix().mul(us[1].matrix()).unwrap();
            let b = us[1].matrix().mul(us[0].matrix()).unwrap();
            assert!(a.eq_mod(&b, 10));
        }
    }

    #[test]
    fn small_suites_pass() {
        let s = riesz_suite(3, 12, 4);
        assert!(s.identities_pass(), "{s:?}");
        let m = multi_slope_suite(4, 6);
        assert!(m.pass(), "{m:?}");
        assert!(gsp4_suite().failures.is_empty());
        assert!(twig_normalization_suite(5).failures.is_empty());
    }

    #[test]
    fn filtration_suite_small() {
        let f = fil_suite(2, 4, 3).unwrap();
        assert!(f.pass(), "{f:?}");
        assert_eq!(f.actions, 12);
    }

    #[test]
    fn teichmuller_suite_passes() {
        let t = teichmuller_suite();
        assert!(t.failures.is_empty(), "{:?}", t.failures);
        // (p - 1) p units mod p^2 for each of nine precisions.
        assert_eq!(t.checked, 9 * (6 + 20 + 42));
    }

    #[test]
    fn suites_are_deterministic() {
        let a = serde_json::to_string(&riesz_suite(9, 6, 3)).unwrap();
        let b = serde_json::to_string(&riesz_suite(9, 6, 3)).unwrap();
        assert_eq!(a, b);
    }
}
