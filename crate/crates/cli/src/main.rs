//! `slopekit`: JSON front end for the slopekit library.
//!
//! Every subcommand prints one JSON object on stdout carrying the run
//! configuration `{p, N, D, m, seed, certified_precision}`; diagnostics go to
//! stderr. Exit status is 0 on success, 2 when a result falls below its
//! precision floor, and 1 for usage and other errors.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use slopekit::branching::{
    big_twig_bf, big_twig_tp, classical_twig_bf, classical_twig_tp, first_row, gsp4_weights, SphericalPairData, TwigValue,
};
use slopekit::coeff::{moment, FiniteDistribution};
use slopekit::matrix::Matrix;
use slopekit::oms::{up_slopes, OmsError};
use slopekit::padic::{PadicNum, PadicRing};
use slopekit::slope::{
    multi_slope_decompose, newton_slopes, parse_ratio, riesz_decompose, slope_factor, CompactOperator,
    FredholmSeries, NewtonPolygon, SlopeError,
};
use slopekit::suites;
use slopekit::weights::{parse_weight_literal, Character, ExampleTag, WeightDisc};

#[derive(Parser, Debug)]
#[command(name = "slopekit", version, about = "p-adic slope decompositions, twigs and overconvergent symbols")]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

/// Run configuration shared by all subcommands. A `--config` JSON file may
/// set the same keys; flags given on the command line win.
#[derive(Args, Debug, Clone)]
struct ConfigArgs {
    /// Prime p.
    #[arg(long, global = true)]
    p: Option<u64>,
    /// Absolute precision N (work mod p^N).
    #[arg(long = "N", alias = "precision", global = true)]
    n: Option<u32>,
    /// Degree bound D for series.
    #[arg(long = "D", global = true)]
    d: Option<u32>,
    /// Analyticity or disc level m.
    #[arg(long, global = true)]
    m: Option<u32>,
    /// Seed for randomized inputs.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON file with any of the keys p, N, D, m, seed.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy)]
struct RunConfig {
    p: u64,
    n: u32,
    d: u32,
    m: u32,
    seed: u64,
}

impl RunConfig {
    fn resolve(args: &ConfigArgs) -> Result<Self> {
        let file: Map<String, Value> = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).context("config file must be a JSON object")?
            }
            None => Map::new(),
        };
        let get = |key: &str| -> Result<Option<u64>> {
            match file.get(key) {
                None => Ok(None),
                Some(v) => v.as_u64().map(Some).ok_or_else(|| anyhow!("config key {key} must be a nonnegative integer")),
            }
        };
        let cfg = RunConfig {
            p: args.p.or(get("p")?).unwrap_or(3),
            n: args.n.or(get("N")?.map(|x| x as u32)).unwrap_or(10),
            d: args.d.or(get("D")?.map(|x| x as u32)).unwrap_or(20),
            m: args.m.or(get("m")?.map(|x| x as u32)).unwrap_or(0),
            seed: args.seed.or(get("seed")?).unwrap_or(0),
        };
        if cfg.n == 0 || cfg.d == 0 {
            bail!("N and D must be positive");
        }
        Ok(cfg)
    }

    fn ring(&self) -> Result<PadicRing> {
        Ok(PadicRing::new(self.p, self.n)?)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Newton polygon of a Fredholm series.
    Newton {
        /// Series literal `c0,c1@v1,...`: term i is c_i p^(v_i) t^i.
        #[arg(long)]
        series: String,
    },
    /// Factor a Fredholm series into slope <= h and slope > h parts.
    SlopeFactor {
        #[arg(long)]
        series: String,
        /// Slope bound h, an integer or fraction `a/b`.
        #[arg(long, default_value = "0")]
        h: String,
    },
    /// Riesz decomposition of an operator (a matrix literal, or random of size T).
    Riesz {
        #[command(flatten)]
        op: OperatorArgs,
        /// Slope bound h, an integer or fraction `a/b`.
        #[arg(long, default_value = "0")]
        h: String,
    },
    /// Common slope <= h part of commuting operators.
    MultiSlope {
        /// Matrix literals separated by `|`; random commuting tuple if absent.
        #[arg(long)]
        matrices: Option<String>,
        /// Number of random operators.
        #[arg(long, default_value_t = 2)]
        count: usize,
        /// Size of random operators.
        #[arg(long, default_value_t = 4)]
        size: usize,
        /// Slope bounds, comma separated.
        #[arg(long)]
        h: String,
        /// Auxiliary bound (default: sum of the h).
        #[arg(long)]
        h_aux: Option<String>,
    },
    /// Evaluate a classical twig, or a Big Twig over a disc with `--disc`.
    TwigEval {
        #[arg(long, value_enum)]
        example: Example,
        /// Weights: `(k,k',j)` for bf, `(r1,r2,r3)` for tp.
        #[arg(long)]
        weights: String,
        /// Comma-separated integers: bf `x1,x2,y1,y2`; tp the first rows of the
        /// three matrices; `u` for the u-point. With `--disc`: bf `z1,z2,i1,i2,i3,i4`, tp `t1..t3,z1..z3,h1..h4`.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        /// Disc level for a Big Twig over the weight disc centered at the weights.
        #[arg(long)]
        disc: Option<u32>,
    },
    /// Specialize a Big Twig over a disc at an algebraic weight and compare.
    Specialize {
        #[arg(long, value_enum)]
        example: Example,
        /// Disc center.
        #[arg(long)]
        center: String,
        /// Algebraic weight in the disc.
        #[arg(long)]
        weight: String,
        /// Inputs as for `twig-eval --disc`; random from the seed if absent.
        #[arg(long, allow_hyphen_values = true)]
        point: Option<String>,
    },
    /// Moments of the Dirac distribution at an integer point.
    Moment {
        #[arg(long, allow_hyphen_values = true)]
        x: i64,
        /// Moment cutoff M (< N).
        #[arg(long, default_value_t = 4)]
        cutoff: u32,
        /// Highest moment returned.
        #[arg(long, default_value_t = 4)]
        k: u32,
    },
    /// Overconvergent modular symbols.
    Oms {
        #[command(subcommand)]
        command: OmsCommand,
    },
    /// GSp4 branching weights for `k=(a,b,q,r)`.
    Gsp4Weights {
        /// Comma-separated `a,b,q,r` with 0 <= q <= a and 0 <= r <= b.
        #[arg(long)]
        weights: String,
    },
    /// Run every property suite for the seed.
    Selftest {
        /// Skip the overconvergent symbol comparison.
        #[arg(long)]
        no_oms: bool,
    },
}

#[derive(Subcommand, Debug)]
enum OmsCommand {
    /// Compare slope <= h multisets of U_p with the classical oracle.
    Slopes {
        /// Tame level.
        #[arg(long = "level")]
        level: u64,
        /// Weight k.
        #[arg(long)]
        k: u32,
        /// Slope bound h.
        #[arg(long, default_value = "0")]
        h: String,
        /// Moment cutoff.
        #[arg(long, default_value_t = 10)]
        cutoff: usize,
    },
}

#[derive(Args, Debug)]
struct OperatorArgs {
    /// Matrix literal, rows separated by `;`, entries by `,`.
    #[arg(long, allow_hyphen_values = true)]
    matrix: Option<String>,
    /// Size of a random operator with a random column-valuation profile.
    #[arg(long, default_value_t = 6)]
    size: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Example {
    Bf,
    Tp,
}

fn parse_ints(s: &str) -> Result<Vec<i64>> {
    let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
    inner
        .split(',')
        .map(|x| x.trim().parse::<i64>().with_context(|| format!("bad integer {x:?} in {s:?}")))
        .collect()
}

fn parse_weights(s: &str, len: usize) -> Result<Vec<i64>> {
    let (ks, _) = parse_weight_literal(s).map_err(|e| anyhow!("{e}"))?;
    if ks.len() != len {
        bail!("expected {len} weights, got {}", ks.len());
    }
    Ok(ks)
}

/// `c0,c1@v1,...`: term `i` is `c_i p^(v_i) t^i`, with `v_i = 0` when omitted.
fn parse_series(s: &str, ring: PadicRing) -> Result<Vec<PadicNum>> {
    s.split(',')
        .map(|term| {
            let (c, v) = match term.split_once('@') {
                Some((c, v)) => (c, v.trim().parse::<u32>().with_context(|| format!("bad exponent in {term:?}"))?),
                None => (term, 0),
            };
            let c: i128 = c.trim().parse().with_context(|| format!("bad coefficient in {term:?}"))?;
            Ok(ring.elem(c).mul_p_power(v))
        })
        .collect()
}

fn parse_matrix(s: &str, ring: PadicRing) -> Result<Matrix> {
    let rows: Vec<Vec<i64>> = s.split(';').map(parse_ints).collect::<Result<_>>()?;
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        bail!("matrix literal must be square");
    }
    Ok(Matrix::from_fn(ring, n, n, |i, j| ring.elem(rows[i][j] as i128)))
}

fn parse_h(s: &str) -> Result<num_rational::Ratio<i64>> {
    parse_ratio(s).ok_or_else(|| anyhow!("bad slope bound {s:?}"))
}

fn polygon_json(poly: &NewtonPolygon) -> Value {
    json!({ "slopes": poly.segments, "vertices": poly.vertices })
}

fn residues(xs: &[PadicNum]) -> Vec<u64> {
    xs.iter().map(|x| x.residue()).collect()
}

fn twig_json(t: &TwigValue) -> Result<Value> {
    Ok(serde_json::to_value(t.to_record())?)
}

fn elems(ring: PadicRing, xs: &[i64]) -> Vec<PadicNum> {
    xs.iter().map(|x| ring.elem(*x as i128)).collect()
}

/// Inputs of a Big Twig: `(z1, z2, i)` for bf, `(t, z, h)` for tp.
fn big_twig(example: Example, kappa: &Character, ring: PadicRing, xs: &[i64]) -> Result<TwigValue> {
    let e = elems(ring, xs);
    match example {
        Example::Bf => {
            if e.len() != 6 {
                bail!("bf Big Twig takes z1,z2,i1,i2,i3,i4");
            }
            Ok(big_twig_bf(kappa, e[0], e[1], [e[2], e[3], e[4], e[5]])?)
        }
        Example::Tp => {
            if e.len() != 10 {
                bail!("tp Big Twig takes t1,t2,t3,z1,z2,z3,h1,h2,h3,h4");
            }
            Ok(big_twig_tp(kappa, [e[0], e[1], e[2]], [e[3], e[4], e[5]], [e[6], e[7], e[8], e[9]])?)
        }
    }
}

fn random_big_inputs(example: Example, cfg: &RunConfig) -> Vec<i64> {
    use rand::Rng;
    let mut rng = suites::rng(cfg.seed);
    let modulus = (cfg.p as i64).pow(cfg.n.min(12));
    let mut unit = || loop {
        let x = rng.gen_range(1..modulus);
        if x % cfg.p as i64 != 0 {
            break x;
        }
    };
    match example {
        // Units on the diagonal of i keep it in the Iwahori subgroup.
        Example::Bf => vec![unit(), unit(), unit(), 0, 0, unit()],
        Example::Tp => vec![unit(), unit(), unit(), unit(), unit(), unit(), 1, 0, 0, 1],
    }
}

/// Runs a subcommand; returns the payload and its certified precision.
fn run(command: &Command, cfg: &RunConfig) -> Result<(Value, u32)> {
    match command {
        Command::Newton { series } => {
            let ring = cfg.ring()?;
            let f = FredholmSeries::from_coeffs(ring, &parse_series(series, ring)?)?;
            let poly = newton_slopes(&f, (cfg.d as usize).min(f.degree()))?;
            Ok((polygon_json(&poly), f.precision()))
        }
        Command::SlopeFactor { series, h } => {
            let ring = cfg.ring()?;
            let f = FredholmSeries::from_coeffs(ring, &parse_series(series, ring)?)?;
            let fac = slope_factor(&f, parse_h(h)?)?;
            let poly = newton_slopes(&f, (cfg.d as usize).min(f.degree()))?;
            Ok((
                json!({
                    "slopes": poly.segments,
                    "degree": fac.degree,
                    "Q": fac.q.series().to_record().entries,
                    "S": fac.s.series().to_record().entries,
                }),
                fac.certified_precision,
            ))
        }
        Command::Riesz { op, h } => {
            let ring = cfg.ring()?;
            let (u, profile) = match &op.matrix {
                Some(lit) => (CompactOperator::finite(parse_matrix(lit, ring)?), None),
                None => {
                    let mut rng = suites::rng(cfg.seed);
                    let profile = suites::random_profile(&mut rng, op.size);
                    (suites::random_compact(&mut rng, ring, &profile)?, Some(profile))
                }
            };
            let h = parse_h(h)?;
            let dec = riesz_decompose(&u, h)?;
            let f = slopekit::slope::fredholm_det(&u, u.size())?;
            let poly = newton_slopes(&f, u.size())?;
            Ok((
                json!({
                    "slopes": poly.segments,
                    "profile": profile,
                    "Q": dec.q.series().to_record().entries,
                    "projector": {
                        "rank": dec.rank(),
                        "degree": dec.degree,
                        "shift": dec.shift,
                        "certified_precision": dec.certified_precision,
                    },
                }),
                dec.certified_precision,
            ))
        }
        Command::MultiSlope { matrices, count, size, h, h_aux } => {
            let ring = cfg.ring()?;
            let us: Vec<CompactOperator> = match matrices {
                Some(lits) => lits
                    .split('|')
                    .map(|m| parse_matrix(m, ring).map(CompactOperator::finite))
                    .collect::<Result<_>>()?,
                None => suites::random_commuting(&mut suites::rng(cfg.seed), ring, *size, *count),
            };
            let hs: Vec<_> = h.split(',').map(parse_h).collect::<Result<_>>()?;
            if hs.len() != us.len() {
                bail!("{} slope bounds for {} operators", hs.len(), us.len());
            }
            let h_aux = match h_aux {
                Some(s) => parse_h(s)?,
                None => hs.iter().sum(),
            };
            let res = multi_slope_decompose(&us, &hs, h_aux)?;
            Ok((
                json!({
                    "dimension": res.dimension,
                    "iterated_equals_intersection": res.iterated_equals_intersection,
                    "orderings_agree": res.orderings_agree,
                    "orderings_checked": res.orderings_checked,
                    "projector": { "rank": res.dimension, "shift": res.shift, "certified_precision": res.certified_precision },
                }),
                res.certified_precision,
            ))
        }
        Command::TwigEval { example, weights, point, disc } => {
            let ring = cfg.ring()?;
            let u_point = point.trim() == "u";
            let xs = if u_point { Vec::new() } else { parse_ints(point)? };
            let t = match (example, disc) {
                (_, Some(level)) => {
                    let w = parse_weights(weights, 3)?;
                    let dw = WeightDisc::new(ring, w, *level, cfg.d);
                    big_twig(*example, &dw.universal(), ring, &xs)?
                }
                (Example::Bf, None) => {
                    let w = parse_weights(weights, 3)?;
                    let e = if u_point { elems(ring, &[1, 0, 1, 1]) } else { elems(ring, &xs) };
                    if e.len() != 4 {
                        bail!("bf point takes x1,x2,y1,y2");
                    }
                    classical_twig_bf(w[0], w[1], w[2], [e[0], e[1], e[2], e[3]])?
                }
                (Example::Tp, None) => {
                    let w = parse_weights(weights, 3)?;
                    let rows = if u_point {
                        let pair = SphericalPairData::new(ExampleTag::Tp);
                        let r: Vec<[PadicNum; 2]> = pair.u_matrices(ring).iter().map(first_row).collect();
                        [r[0], r[1], r[2]]
                    } else {
                        let e = elems(ring, &xs);
                        if e.len() != 6 {
                            bail!("tp point takes the first rows of three matrices (6 integers)");
                        }
                        [[e[0], e[1]], [e[2], e[3]], [e[4], e[5]]]
                    };
                    classical_twig_tp([w[0], w[1], w[2]], rows)?
                }
            };
            let prec = t.precision();
            Ok((twig_json(&t)?, prec))
        }
        Command::Specialize { example, center, weight, point } => {
            let ring = cfg.ring()?;
            let c = parse_weights(center, 3)?;
            let w = parse_weights(weight, 3)?;
            let xs = match point {
                Some(s) => parse_ints(s)?,
                None => random_big_inputs(*example, cfg),
            };
            let disc = WeightDisc::new(ring, c, cfg.m, cfg.d);
            let family = big_twig(*example, &disc.universal(), ring, &xs)?;
            let got = family.specialize(&disc, &w)?;
            let alg = big_twig(*example, &Character::algebraic(ring, &w), ring, &xs)?;
            let want = alg.as_scalar().ok_or_else(|| anyhow!("algebraic Big Twig is not a scalar"))?;
            let prec = got.precision();
            Ok((
                json!({
                    "inputs": xs,
                    "specialized": got.residue(),
                    "algebraic": want.reduce(prec).residue(),
                    "loss": cfg.n.saturating_sub(prec),
                    "match": got.eq_mod(&want, prec),
                }),
                prec,
            ))
        }
        Command::Moment { x, cutoff, k } => {
            let ring = cfg.ring()?;
            let mu = FiniteDistribution::dirac(ring, cfg.m, *cutoff, &ring.elem(*x as i128))?;
            let ms = moment(&mu, *k)?;
            let prec = ms.iter().map(|v| v.precision()).min().unwrap_or(cfg.n);
            let precisions: Vec<u32> = ms.iter().map(|v| v.precision()).collect();
            Ok((
                json!({ "moments": residues(&ms), "precisions": precisions, "distribution": mu.to_record() }),
                prec,
            ))
        }
        Command::Oms {
            command: OmsCommand::Slopes { level, k, h, cutoff },
        } => {
            let cmp = up_slopes(*level, *k, cfg.p, cfg.m, parse_h(h)?, *cutoff, cfg.n)?;
            let prec = cmp.certified_precision;
            Ok((serde_json::to_value(&cmp)?, prec))
        }
        Command::Gsp4Weights { weights } => {
            let w = parse_weights(weights, 4)?;
            let out = gsp4_weights(w[0], w[1], w[2], w[3])?;
            Ok((json!({ "c": out.c, "d": out.d, "exponents": out.exponents }), cfg.n))
        }
        Command::Selftest { no_oms } => {
            let report = suites::selftest(cfg.seed, !no_oms);
            let passed = report.passed;
            let mut v = serde_json::to_value(&report)?;
            if !passed {
                eprintln!("selftest: some suites failed");
            }
            v["passed"] = Value::Bool(passed);
            Ok((v, cfg.n))
        }
    }
}

fn is_precision_floor(err: &anyhow::Error) -> bool {
    if let Some(e) = err.downcast_ref::<SlopeError>() {
        return matches!(e, SlopeError::PrecisionFloor { .. });
    }
    if let Some(e) = err.downcast_ref::<OmsError>() {
        return matches!(e, OmsError::PrecisionFloor(_));
    }
    false
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Newton { .. } => "newton",
        Command::SlopeFactor { .. } => "slope-factor",
        Command::Riesz { .. } => "riesz",
        Command::MultiSlope { .. } => "multi-slope",
        Command::TwigEval { .. } => "twig-eval",
        Command::Specialize { .. } => "specialize",
        Command::Moment { .. } => "moment",
        Command::Oms { .. } => "oms slopes",
        Command::Gsp4Weights { .. } => "gsp4-weights",
        Command::Selftest { .. } => "selftest",
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cfg = match RunConfig::resolve(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    match run(&cli.command, &cfg) {
        Ok((payload, certified)) => {
            let mut out = BTreeMap::new();
            out.insert("command".to_string(), json!(command_name(&cli.command)));
            out.insert("p".to_string(), json!(cfg.p));
            out.insert("N".to_string(), json!(cfg.n));
            out.insert("D".to_string(), json!(cfg.d));
            out.insert("m".to_string(), json!(cfg.m));
            out.insert("seed".to_string(), json!(cfg.seed));
            out.insert("certified_precision".to_string(), json!(certified));
            out.insert("result".to_string(), payload);
            let text = serde_json::to_string_pretty(&out).expect("JSON values serialize");
            // A closed pipe on stdout is not an error worth a panic.
            let _ = writeln!(std::io::stdout(), "{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_precision_floor(&e) { 2 } else { 1 })
        }
    }
}
