//! Command-line front end. JSON output uses sorted keys and echoes the
//! normalized input together with every seed that was used.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::brauer::{self, BrauerClass};
use crate::density;
use crate::error::{Error, Result};
use crate::fields::{parse_field, AbelianField, CyclicExtension, DirichletCharacter};
use crate::heights::{self, HeightResult, StandardBounds};
use crate::local::{self, Place};
use crate::metacyclic;
use crate::primesets::{self, PrimeSetSpec};
use crate::selftest::{CheckRegistry, CorruptedBounds};

pub const DEFAULT_SIEVE_LIMIT: u64 = 10_000;
pub const SIEVE_ENV: &str = "WITT_SIEVE_LIMIT";

#[derive(Parser, Debug)]
#[command(name = "witt", version, about = "Heights, fiber classification and noncrossed-product witnesses over Q")]
pub struct Cli {
    /// Emit JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    /// key=value config file (keys: sieve_limit).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Global p-height of K/k.
    Height {
        #[arg(long)]
        ext: String,
        /// Base field, Q by default.
        #[arg(long)]
        base: Option<String>,
        #[arg(long)]
        p: u64,
    },
    /// Case I / Case II for the fiber of a character and m.
    Classify {
        #[arg(long)]
        chi: String,
        #[arg(long)]
        m: u64,
    },
    /// Crossed or noncrossed for alpha + chi.
    Decide {
        #[arg(long)]
        chi: String,
        /// Invariants, e.g. "5:1/8,11:7/8" (inf for the real place).
        #[arg(long)]
        alpha: String,
        #[arg(long)]
        limit: Option<u64>,
    },
    /// Witness prime sets P0, P1, P2.
    Primesets {
        #[arg(long)]
        ext: String,
        #[arg(long)]
        base: Option<String>,
        #[arg(long)]
        p: u64,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        limit: Option<u64>,
    },
    /// Density of noncrossed classes with support up to x.
    Density {
        #[arg(long)]
        chi: String,
        #[arg(long)]
        m: u64,
        #[arg(long)]
        x: u64,
        #[arg(long, default_value_t = 0)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Decomposition, inertia and Frobenius at a place.
    LocalData {
        #[arg(long)]
        ext: String,
        #[arg(long)]
        base: Option<String>,
        /// A prime, or inf.
        #[arg(long)]
        place: String,
    },
    /// Checks on E_{s,t} and its kernels.
    Metacyclic {
        #[arg(long, value_enum, default_value_t = Verify::All)]
        verify: Verify,
        #[arg(long)]
        s: u32,
        #[arg(long)]
        t: u32,
        /// Random modules for the H^1 comparison.
        #[arg(long, default_value_t = 50)]
        instances: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Built-in acceptance checks.
    Selftest {
        /// A check id or group.
        #[arg(long)]
        only: Option<String>,
        /// Run with b_p raised by one over Q.
        #[arg(long)]
        corrupt_bp: bool,
        /// List check ids and groups.
        #[arg(long)]
        list: bool,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Verify {
    All,
    Iso,
    H1,
    E2,
}

impl Verify {
    fn label(self) -> &'static str {
        match self {
            Verify::All => "all",
            Verify::Iso => "iso",
            Verify::H1 => "h1",
            Verify::E2 => "e2",
        }
    }
}

/// Where the sieve limit came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SieveLimit {
    pub value: u64,
    pub source: &'static str,
}

/// Parses `key=value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<Option<u64>> {
    let mut limit = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) =
            line.split_once('=').ok_or_else(|| Error::invalid(format!("config line {}: expected key=value", i + 1)))?;
        match k.trim() {
            "sieve_limit" => {
                limit = Some(
                    v.trim().parse().map_err(|_| Error::invalid(format!("config line {}: bad sieve_limit", i + 1)))?,
                )
            }
            other => return Err(Error::invalid(format!("config line {}: unknown key '{other}'", i + 1))),
        }
    }
    Ok(limit)
}

fn sieve_limit(config: Option<&PathBuf>, flag: Option<u64>) -> Result<SieveLimit> {
    if let Some(v) = flag {
        return Ok(SieveLimit { value: v, source: "flag" });
    }
    if let Ok(v) = std::env::var(SIEVE_ENV) {
        let value = v.trim().parse().map_err(|_| Error::invalid(format!("{SIEVE_ENV} must be an integer")))?;
        return Ok(SieveLimit { value, source: "env" });
    }
    if let Some(path) = config {
        let text = std::fs::read_to_string(path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        if let Some(value) = parse_config(&text)? {
            return Ok(SieveLimit { value, source: "config" });
        }
    }
    Ok(SieveLimit { value: DEFAULT_SIEVE_LIMIT, source: "default" })
}

fn extension(ext: &str, base: Option<&str>) -> Result<CyclicExtension> {
    let top = parse_field(ext)?;
    match base {
        None => CyclicExtension::over_q(&top),
        Some(b) => CyclicExtension::new(&parse_field(b)?, &top),
    }
}

fn field_label(k: &AbelianField) -> String {
    if k.is_rationals() {
        "Q".into()
    } else {
        k.to_string()
    }
}

fn ext_input(e: &CyclicExtension) -> Value {
    json!({"base": field_label(e.base()), "top": field_label(e.top()), "degree": e.degree()})
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("serializable")
}

fn height_json(h: &HeightResult) -> Value {
    let breakdown: Vec<Value> =
        h.breakdown.iter().map(|(pl, v)| json!({"place": pl.to_string(), "height": to_value(v)})).collect();
    json!({
        "lower": to_value(&h.lower),
        "upper": to_value(&h.upper),
        "exact": h.exact,
        "breakdown": breakdown,
        "special_cap": h.special_cap,
    })
}

fn spec_json(spec: &PrimeSetSpec, limit: u64) -> Value {
    json!({
        "role": spec.role.to_string(),
        "modulus": spec.modulus,
        "residues": spec.residues,
        "note": spec.note,
        "density": spec.density(),
        "primes": primesets::enumerate(spec, limit),
    })
}

/// Result of one command before rendering.
struct Output {
    command: &'static str,
    input: Value,
    result: Value,
    /// Exit code 1 when a verification inside the result failed.
    ok: bool,
}

fn dispatch(cmd: &Command, config: Option<&PathBuf>) -> Result<Output> {
    match cmd {
        Command::Height { ext, base, p } => {
            let e = extension(ext, base.as_deref())?;
            let h = heights::global_height(&e, *p)?;
            Ok(Output {
                command: "height",
                input: json!({"ext": ext_input(&e), "p": p}),
                result: height_json(&h),
                ok: true,
            })
        }
        Command::Classify { chi, m } => {
            let c = DirichletCharacter::parse(chi)?.reduced();
            let r = brauer::classify_fiber(&c, *m)?;
            Ok(Output {
                command: "classify",
                input: json!({"chi": c.to_string(), "m": m}),
                result: to_value(&r),
                ok: true,
            })
        }
        Command::Decide { chi, alpha, limit } => {
            let c = DirichletCharacter::parse(chi)?.reduced();
            let a = BrauerClass::parse(alpha)?;
            let lim = sieve_limit(config, *limit)?;
            let r = brauer::decide_crossed(&a, &c, lim.value)?;
            Ok(Output {
                command: "decide",
                input: json!({"chi": c.to_string(), "alpha": a.to_string(), "sieve_limit": lim.value, "sieve_limit_source": lim.source}),
                result: to_value(&r),
                ok: true,
            })
        }
        Command::Primesets { ext, base, p, n, limit } => {
            let e = extension(ext, base.as_deref())?;
            let lim = sieve_limit(config, *limit)?;
            let pp = p.checked_pow(*n).ok_or_else(|| Error::invalid("p^n overflows"))?;
            let p0 = primesets::p0_spec(e.top(), pp)?;
            let choice = primesets::witness_sets(&e, *p, *n)?;
            let first = &choice.candidates[0];
            let alts: Vec<Value> = choice
                .candidates
                .iter()
                .map(|w| json!({"strategy": w.strategy, "P1": spec_json(&w.p1, lim.value), "P2": spec_json(&w.p2, lim.value)}))
                .collect();
            Ok(Output {
                command: "primesets",
                input: json!({"ext": ext_input(&e), "p": p, "n": n, "sieve_limit": lim.value, "sieve_limit_source": lim.source}),
                result: json!({
                    "P0": spec_json(&p0, lim.value),
                    "P1": spec_json(&first.p1, lim.value),
                    "P2": spec_json(&first.p2, lim.value),
                    "strategy": first.strategy,
                    "dual": choice.dual,
                    "candidates": alts,
                }),
                ok: true,
            })
        }
        Command::Density { chi, m, x, samples, seed } => {
            let c = DirichletCharacter::parse(chi)?.reduced();
            let r = density::noncrossed_density_report(&c, *m, *x, *seed, *samples)?;
            Ok(Output {
                command: "density",
                input: json!({"chi": c.to_string(), "m": m, "x": x, "samples": samples, "seed": seed}),
                result: to_value(&r),
                ok: true,
            })
        }
        Command::LocalData { ext, base, place } => {
            let e = extension(ext, base.as_deref())?;
            let pl = if place == "inf" {
                Place::Infinite
            } else {
                Place::prime(place.parse().map_err(|_| Error::invalid(format!("bad place '{place}'")))?)?
            };
            let d = local::local_data(&e, pl)?;
            let presentation = match pl {
                Place::Finite(q) => {
                    local::tame_presentation(&e, q).ok().map(|t| json!({"e": t.e, "f": t.f, "t": t.t, "q": t.q}))
                }
                Place::Infinite => None,
            };
            Ok(Output {
                command: "local-data",
                input: json!({"ext": ext_input(&e), "place": pl.to_string()}),
                result: json!({
                    "place": pl.to_string(),
                    "e": d.e,
                    "f": d.f,
                    "g": d.g,
                    "frobenius_residue": d.frobenius_residue,
                    "residue_norm": d.residue_norm,
                    "base_local_degree": d.base_local_degree,
                    "presentation": presentation,
                }),
                ok: true,
            })
        }
        Command::Metacyclic { verify, s, t, instances, seed } => {
            let (result, ok) = metacyclic_report(*verify, *s, *t, *instances, *seed)?;
            Ok(Output {
                command: "metacyclic",
                input: json!({"verify": verify.label(), "s": s, "t": t, "instances": instances, "seed": seed}),
                result,
                ok,
            })
        }
        Command::Selftest { only, corrupt_bp, list } => {
            let reg = CheckRegistry::with_defaults();
            if *list {
                return Ok(Output {
                    command: "selftest",
                    input: json!({"list": true}),
                    result: json!({"ids": reg.ids(), "groups": reg.groups()}),
                    ok: true,
                });
            }
            if let Some(o) = only {
                if !reg.ids().contains(&o.as_str()) && !reg.groups().contains(&o.as_str()) {
                    return Err(Error::invalid(format!("unknown check or group '{o}'")));
                }
            }
            let rep = if *corrupt_bp {
                reg.run(&CorruptedBounds, only.as_deref())
            } else {
                reg.run(&StandardBounds, only.as_deref())
            };
            Ok(Output {
                command: "selftest",
                input: json!({"only": only, "corrupt_bp": corrupt_bp}),
                ok: rep.pass,
                result: to_value(&rep),
            })
        }
    }
}

fn metacyclic_report(verify: Verify, s: u32, t: u32, instances: u32, seed: u64) -> Result<(Value, bool)> {
    let mut checks: Vec<Value> = Vec::new();
    let mut counterexamples: Vec<Value> = Vec::new();
    let mut ok = true;
    let mut push = |section: &str, c: &metacyclic::Check| {
        ok &= c.pass;
        checks.push(json!({"section": section, "name": c.name, "pass": c.pass, "detail": c.detail}));
    };
    let all = verify == Verify::All;
    if all || verify == Verify::Iso {
        for c in &metacyclic::structure_invariants(s, t)?.checks {
            push("structure", c);
        }
        for c in metacyclic::presentation_isomorphism_check(s, t)? {
            push("isomorphism", &c);
        }
        for l in 1..t {
            for d in metacyclic::kernel_decomposition(s, t, l)? {
                for c in &d.checks {
                    push(&format!("kernel l={l} {}", d.case), c);
                }
            }
        }
    }
    if all || verify == Verify::H1 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut agree = 0;
        for i in 0..instances {
            let b = metacyclic::random_bicyclic(&mut rng, 100_000);
            let q = metacyclic::h1_restriction_kernel_q(&b);
            let bf = metacyclic::h1_bruteforce(&b)?;
            if q.order == bf.kernel_order {
                agree += 1;
            } else {
                counterexamples.push(
                    json!({"instance": i, "module": to_value(&b), "q": to_value(&q), "brute_force": to_value(&bf)}),
                );
            }
        }
        push(
            "h1",
            &metacyclic::Check {
                name: "Q equals brute-force restriction kernel".into(),
                pass: agree == instances,
                detail: format!("{agree}/{instances}"),
            },
        );
    }
    if all || verify == Verify::E2 {
        let mut any = false;
        for l in 1..t {
            let h = t - l;
            if h == 0 || h > s {
                continue;
            }
            any = true;
            let r = metacyclic::lemma_e2_verify(s, l, h)?;
            let section = format!("e2 l={l} h={h}");
            for c in &r.checks {
                push(&section, c);
            }
            push(
                &section,
                &metacyclic::Check { name: "Q = 0".into(), pass: r.q.order == 1, detail: format!("{:?}", r.q.factors) },
            );
            push(
                &section,
                &metacyclic::Check {
                    name: "brute-force kernel = 0".into(),
                    pass: r.brute_force_kernel == 1,
                    detail: String::new(),
                },
            );
            push(
                &section,
                &metacyclic::Check { name: "ep hypothesis".into(), pass: r.ep_hypothesis, detail: String::new() },
            );
            if !r.pass() {
                counterexamples.push(json!({"l": l, "h": h, "report": to_value(&r)}));
            }
        }
        if !any {
            push(
                "e2",
                &metacyclic::Check { name: "some l with 0 < t - l <= s".into(), pass: false, detail: String::new() },
            );
        }
    }
    Ok((json!({"pass": ok, "checks": checks, "counterexamples": counterexamples}), ok))
}

fn render_text(v: &Value, prefix: &str, out: &mut String) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                render_text(x, &p, out);
            }
        }
        Value::Array(xs) if xs.iter().all(|x| !x.is_object() && !x.is_array()) => {
            let items: Vec<String> = xs.iter().map(scalar).collect();
            out.push_str(&format!("{prefix:<40} [{}]\n", items.join(", ")));
        }
        Value::Array(xs) => {
            for (i, x) in xs.iter().enumerate() {
                render_text(x, &format!("{prefix}[{i}]"), out);
            }
        }
        x => out.push_str(&format!("{prefix:<40} {}\n", scalar(x))),
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "-".into(),
        x => x.to_string(),
    }
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    let Some(cmd) = cli.command.as_ref() else {
        use clap::CommandFactory;
        let _ = writeln!(err, "{}", Cli::command().render_usage());
        let _ = writeln!(err, "run with --help for the list of subcommands");
        return 2;
    };
    match dispatch(cmd, cli.config.as_ref()) {
        Ok(o) => {
            let doc = json!({"command": o.command, "input": o.input, "result": o.result});
            if cli.json {
                let _ = writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("serializable"));
            } else {
                let mut text = String::new();
                render_text(&doc, "", &mut text);
                let _ = write!(out, "{text}");
            }
            if o.ok {
                0
            } else {
                1
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
