//! Built-in acceptance checks, registered by id and group, run against a
//! chosen [`BoundsProvider`] so a corrupted provider can serve as a negative
//! control.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::arith;
use crate::brauer::{self, BrauerClass, Decision, FiberElement};
use crate::density::{self, SupportWindow};
use crate::error::Result;
use crate::fields::{AbelianField, CyclicExtension, DirichletCharacter};
use crate::heights::{self, BoundsProvider, ExtInt, FiberCase, PrimeBounds, Tri};
use crate::local::Place;
use crate::metacyclic;
use crate::primesets;

/// Outcome detail; `Err` marks a failed check.
pub type Outcome = std::result::Result<String, String>;

pub trait SelfCheck: Send + Sync {
    fn id(&self) -> &'static str;
    fn group(&self) -> &'static str;
    fn run(&self, provider: &dyn BoundsProvider) -> Outcome;
}

struct FnCheck {
    id: &'static str,
    group: &'static str,
    f: fn(&dyn BoundsProvider) -> Result<Outcome>,
}

impl SelfCheck for FnCheck {
    fn id(&self) -> &'static str {
        self.id
    }

    fn group(&self) -> &'static str {
        self.group
    }

    fn run(&self, provider: &dyn BoundsProvider) -> Outcome {
        match (self.f)(provider) {
            Ok(o) => o,
            Err(e) => Err(format!("error: {e}")),
        }
    }
}

#[derive(Default)]
pub struct CheckRegistry {
    checks: BTreeMap<&'static str, Arc<dyn SelfCheck>>,
    order: Vec<&'static str>,
}

impl CheckRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, c: Arc<dyn SelfCheck>) {
        if self.checks.insert(c.id(), c.clone()).is_none() {
            self.order.push(c.id());
        }
    }

    pub fn with_defaults() -> Self {
        let mut r = Self::new();
        let table: [(&'static str, &'static str, fn(&dyn BoundsProvider) -> Result<Outcome>); 13] = [
            ("app-a", "heights", app_a),
            ("app-b", "heights", app_b),
            ("ht-closed-form", "heights", ht_closed_form),
            ("typeii", "primesets", typeii),
            ("tensor", "brauer", tensor),
            ("oracle", "heights", oracle),
            ("anchors", "heights", anchors),
            ("special", "heights", special),
            ("brauer", "brauer", brauer_arith),
            ("density", "density", density_checks),
            ("metacyclic", "metacyclic", metacyclic_suite),
            ("h1", "metacyclic", h1_suite),
            ("chebotarev", "primesets", chebotarev),
        ];
        for (id, group, f) in table {
            r.register(Arc::new(FnCheck { id, group, f }));
        }
        r
    }

    pub fn ids(&self) -> Vec<&'static str> {
        self.order.clone()
    }

    pub fn groups(&self) -> Vec<&'static str> {
        let mut g: Vec<_> = self.checks.values().map(|c| c.group()).collect();
        g.sort_unstable();
        g.dedup();
        g
    }

    /// Runs every check whose id or group equals `only`, or all of them.
    pub fn run(&self, provider: &dyn BoundsProvider, only: Option<&str>) -> SelftestReport {
        let items: Vec<SelftestItem> = self
            .order
            .iter()
            .map(|id| &self.checks[id])
            .filter(|c| only.map_or(true, |o| c.id() == o || c.group() == o))
            .map(|c| {
                let (pass, detail) = match c.run(provider) {
                    Ok(d) => (true, d),
                    Err(d) => (false, d),
                };
                SelftestItem { id: c.id().to_string(), group: c.group().to_string(), pass, detail }
            })
            .collect();
        SelftestReport {
            provider: provider.name().to_string(),
            only: only.map(str::to_string),
            pass: items.iter().all(|i| i.pass),
            items,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SelftestItem {
    pub id: String,
    pub group: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SelftestReport {
    pub provider: String,
    pub only: Option<String>,
    pub pass: bool,
    pub items: Vec<SelftestItem>,
}

/// Adds one to `b_p` over the rationals.
pub struct CorruptedBounds;

impl BoundsProvider for CorruptedBounds {
    fn name(&self) -> &str {
        "corrupted"
    }

    fn bounds(&self, ext: &CyclicExtension, p: u64) -> Result<PrimeBounds> {
        let mut b = heights::b_p(ext, p)?;
        if ext.base().is_rationals() {
            b.b_lower = b.b_lower.add(1);
            b.b_upper = b.b_upper.add(1);
        }
        Ok(b)
    }
}

fn ensure(cond: bool, what: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

fn outcome(r: std::result::Result<(), String>, ok: &str) -> Result<Outcome> {
    Ok(r.map(|_| ok.to_string()))
}

fn quad3() -> DirichletCharacter {
    DirichletCharacter::of_cyclic_field(&AbelianField::quadratic(-3).expect("valid")).expect("cyclic")
}

fn cubic7() -> DirichletCharacter {
    DirichletCharacter::new(7, 3, &[1]).expect("valid")
}

/// `(s_p, h_p, b_p)` through the provider, plus the classification for each `m`.
fn verdicts(
    chi: &DirichletCharacter,
    p: u64,
    ms: &[u64],
    provider: &dyn BoundsProvider,
) -> Result<(PrimeBounds, Vec<FiberCase>)> {
    let ext = CyclicExtension::of_character(chi);
    let b = provider.bounds(&ext, p)?;
    let cases = ms
        .iter()
        .map(|&m| Ok(brauer::classify_fiber_with(&ext, chi.to_string(), m, provider)?.overall))
        .collect::<Result<Vec<_>>>()?;
    Ok((b, cases))
}

fn app_a(provider: &dyn BoundsProvider) -> Result<Outcome> {
    let (b, cases) = verdicts(&quad3(), 2, &[4, 2], provider)?;
    let r = (|| {
        ensure(b.s_p == 1, || format!("s_2 = {}", b.s_p))?;
        ensure(b.height.exact && b.height.lower == ExtInt::Fin(0), || format!("h_2 = {:?}", b.height))?;
        ensure(b.b_exact() == Some(ExtInt::Fin(1)), || format!("b_2 = [{}, {}]", b.b_lower, b.b_upper))?;
        ensure(cases[0] == FiberCase::CaseII { primes: vec![2] }, || format!("m = 4: {:?}", cases[0]))?;
        ensure(cases[1] == FiberCase::CaseI, || format!("m = 2: {:?}", cases[1]))
    })();
    outcome(r, "s_2 = 1, h_2 = 0, b_2 = 1; m = 4 CaseII, m = 2 CaseI")
}

fn app_b(provider: &dyn BoundsProvider) -> Result<Outcome> {
    let (b, cases) = verdicts(&cubic7(), 3, &[3], provider)?;
    let r = (|| {
        ensure(b.s_p == 0, || format!("s_3 = {}", b.s_p))?;
        ensure(b.height.exact && b.height.lower == ExtInt::Fin(0), || format!("h_3 = {:?}", b.height))?;
        ensure(b.b_exact() == Some(ExtInt::Fin(0)), || format!("b_3 = [{}, {}]", b.b_lower, b.b_upper))?;
        ensure(cases[0] == FiberCase::CaseII { primes: vec![3] }, || format!("m = 3: {:?}", cases[0]))
    })();
    outcome(r, "s_3 = 0, h_3 = 0, b_3 = 0; m = 3 CaseII")
}

/// The degree `p^m` subfield of `Q(mu_q)`.
pub fn cyclotomic_subfield(q: u64, degree: u64) -> Result<AbelianField> {
    let g = arith::primitive_root_prime_power(q, 1);
    AbelianField::new(q, &[arith::pow_mod(g, degree, q) as i64])
}

fn ht_closed_form(_: &dyn BoundsProvider) -> Result<Outcome> {
    let mut done = 0;
    for (p, q) in [(2u64, 17u64), (3, 7), (5, 11), (2, 257)] {
        let n = arith::valuation(q - 1, p);
        for m in 1..=n {
            let k = cyclotomic_subfield(q, p.pow(m))?;
            let h = heights::global_height(&CyclicExtension::over_q(&k)?, p)?;
            if !(h.exact && h.lower == ExtInt::Fin((n - m) as u64)) {
                return Ok(Err(format!("p = {p}, q = {q}, m = {m}: {:?}", h)));
            }
            done += 1;
        }
    }
    Ok(Ok(format!("{done} instances equal n - m")))
}

fn typeii(_: &dyn BoundsProvider) -> Result<Outcome> {
    let ext = CyclicExtension::of_character(&quad3());
    for n in 2u32..=5 {
        let spec = primesets::p1_spec(&ext, 2, n)?;
        let modulus = 3u64 << n;
        let r = if n % 2 == 0 { 1 + (1u64 << n) } else { (1 + (1u64 << (n + 1))) % modulus };
        if spec.modulus != modulus || spec.residues != vec![r] {
            return Ok(Err(format!("n = {n}: {} {:?}", spec.modulus, spec.residues)));
        }
    }
    let p2 = primesets::p2_spec(&ext, 2)?;
    let ok = p2.len() == 1 && p2[0].modulus == 12 && p2[0].residues == vec![11];
    Ok(if ok { Ok("P1 for n = 2..5 and P2 = {-1 mod 12}".into()) } else { Err(format!("P2 = {p2:?}")) })
}

fn tensor(provider: &dyn BoundsProvider) -> Result<Outcome> {
    let k = cubic7().field();
    let alpha = brauer::sample_class(&k, 3, &[2, 19], 0)?;
    let x = FiberElement::new(alpha.clone(), cubic7());
    let d1 = brauer::decide_crossed_with(&alpha, &cubic7(), 1000, provider)?;
    let y = x.tensor(&FiberElement::new(BrauerClass::zero(), quad3()));
    let d2 = brauer::decide_crossed_with(&y.alpha, &y.chi, 1000, provider)?;
    let r = (|| {
        ensure(x.index() == 9, || format!("index {}", x.index()))?;
        ensure(matches!(d1.decision, Decision::Noncrossed { .. }), || format!("{:?}", d1.decision))?;
        ensure(y.index() == 18, || format!("tensor index {}", y.index()))?;
        ensure(d2.classification.overall == FiberCase::CaseI, || format!("{:?}", d2.classification.overall))?;
        ensure(d2.decision == Decision::Crossed, || format!("{:?}", d2.decision))
    })();
    outcome(r, "noncrossed index 9, tensor crossed index 18")
}

/// Oracle concordance on characters of small conductor.
fn oracle(_: &dyn BoundsProvider) -> Result<Outcome> {
    let mut checked = 0;
    for n in 3..=40u64 {
        for chi in DirichletCharacter::all_of_modulus(n) {
            if chi.field().conductor() != n {
                continue;
            }
            for p in [2u64, 3] {
                let ext = CyclicExtension::of_character(&chi).p_part(p);
                if ext.is_trivial() {
                    continue;
                }
                let h = heights::global_height(&ext, p)?;
                let bound = (16 * n).min(heights::ORACLE_MODULUS_CAP);
                for r in 1..=3 {
                    if heights::height_divisibility_oracle(&chi.p_part(p), p, r, bound)?.is_some() {
                        if h.at_least(r as u64) == Tri::No {
                            return Ok(Err(format!("{chi} p = {p}: witness at {r}, height {:?}", h)));
                        }
                    }
                }
                checked += 1;
            }
        }
    }
    Ok(Ok(format!("{checked} (character, p) pairs")))
}

fn anchors(_: &dyn BoundsProvider) -> Result<Outcome> {
    let hi = heights::global_height(&CyclicExtension::over_q(&AbelianField::quadratic(-1)?)?, 2)?;
    let h2 = heights::global_height(&CyclicExtension::over_q(&AbelianField::quadratic(2)?)?, 2)?;
    let r = (|| {
        ensure(hi.exact && hi.lower == ExtInt::Fin(0), || format!("Q(i): {hi:?}"))?;
        ensure(h2.exact && h2.lower == ExtInt::Inf, || format!("Q(sqrt 2): {h2:?}"))
    })();
    outcome(r, "h_2(Q(i)) = 0, h_2(Q(sqrt 2)) = inf")
}

fn special(_: &dyn BoundsProvider) -> Result<Outcome> {
    let k14 = AbelianField::quadratic(-14)?;
    let top = k14.compositum(&AbelianField::quadratic(-1)?);
    let ex = heights::is_exceptional(&CyclicExtension::new(&k14, &top)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut over_q = 0;
    while over_q < 25 {
        let n = rng.gen_range(3..120u64);
        let all = DirichletCharacter::all_of_modulus(n);
        let chi = &all[rng.gen_range(0..all.len())];
        if chi.order() == 1 {
            continue;
        }
        let v = heights::is_exceptional(&CyclicExtension::of_character(chi))?;
        if v != Tri::No {
            return Ok(Err(format!("{chi} exceptional over Q: {v:?}")));
        }
        over_q += 1;
    }
    let r = (|| {
        ensure(heights::is_special(&AbelianField::rationals()).is_none(), || "Q special".into())?;
        ensure(heights::is_special(&k14) == Some(2), || format!("{:?}", heights::is_special(&k14)))?;
        ensure(ex == Tri::Yes, || format!("Q(sqrt -14, i): {ex:?}"))
    })();
    outcome(r, "special/exceptional verdicts")
}

fn brauer_arith(provider: &dyn BoundsProvider) -> Result<Outcome> {
    let chi = quad3();
    let k = chi.field();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let alpha = random_class(&mut rng)?;
        let res = alpha.restrict(&k);
        if !num_traits::Zero::is_zero(&res.total()) {
            return Ok(Err(format!("{alpha}: restriction does not sum to zero")));
        }
        if brauer::fiber_index(&alpha, &chi) != chi.order() * res.index() {
            return Ok(Err(format!("{alpha}: index formula")));
        }
    }
    let alpha = BrauerClass::parse("5:1/8,11:7/8")?;
    let d = brauer::decide_crossed_with(&alpha, &chi, 1000, provider)?;
    let r = ensure(matches!(d.decision, Decision::Noncrossed { .. }), || format!("{:?}", d.decision));
    outcome(r, "zero sum, index formula, witness instance")
}

/// A random class supported on a few small primes, real place included sometimes.
pub fn random_class<R: Rng>(rng: &mut R) -> Result<BrauerClass> {
    const PRIMES: [u64; 10] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29];
    let count = rng.gen_range(1..5);
    let mut places: Vec<u64> = Vec::new();
    while places.len() < count {
        let q = PRIMES[rng.gen_range(0..PRIMES.len())];
        if !places.contains(&q) {
            places.push(q);
        }
    }
    let mut entries = Vec::new();
    let mut total = brauer::Inv::from_integer(0);
    for &q in &places {
        let den = rng.gen_range(1..=12i64);
        let x = brauer::reduce(brauer::Inv::new(rng.gen_range(0..den), den));
        total = brauer::reduce(total + x);
        entries.push((Place::Finite(q), x));
    }
    if rng.gen_bool(0.3) {
        let x = brauer::Inv::new(1, 2);
        total = brauer::reduce(total + x);
        entries.push((Place::Infinite, x));
    }
    let close = brauer::reduce(-total);
    let q = 31;
    entries.push((Place::Finite(q), close));
    let entries: Vec<_> = entries.into_iter().filter(|(_, x)| !num_traits::Zero::is_zero(x)).collect();
    BrauerClass::new(&entries)
}

fn density_checks(_: &dyn BoundsProvider) -> Result<Outcome> {
    let k = AbelianField::quadratic(-3)?;
    let w = SupportWindow::explicit(&k, 20, 5, &[2, 7, 11, 13])?;
    let y = density::count_y(&w, 2);
    let yb = density::count_y_bruteforce(&w, 2)?;
    if y != yb.into() {
        return Ok(Err(format!("count_y {y} vs {yb}")));
    }
    let chi = quad3();
    let rep = density::noncrossed_density_report(&chi, 4, 200, 0, 0)?;
    let d = rep.exact_density.unwrap_or(0.0);
    let r = ensure(d + 1e-12 >= rep.lower_bound && d > 0.5, || format!("d = {d}, bound {}", rep.lower_bound));
    outcome(r, &format!("count_y brute force, d_200 = {d:.4}"))
}

fn metacyclic_suite(_: &dyn BoundsProvider) -> Result<Outcome> {
    for s in 2..=3 {
        for t in 2..=3 {
            let r = metacyclic::structure_invariants(s, t)?;
            if !r.pass() {
                return Ok(Err(format!("structure ({s}, {t})")));
            }
            if metacyclic::presentation_isomorphism_check(s, t)?.iter().any(|c| !c.pass) {
                return Ok(Err(format!("isomorphism ({s}, {t})")));
            }
            for l in 1..t {
                for d in metacyclic::kernel_decomposition(s, t, l)? {
                    if d.checks.iter().any(|c| !c.pass) {
                        return Ok(Err(format!("kernel ({s}, {t}, {l})")));
                    }
                }
            }
        }
    }
    Ok(Ok("2 <= s, t <= 3".into()))
}

fn h1_suite(_: &dyn BoundsProvider) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..20 {
        let b = metacyclic::random_bicyclic(&mut rng, 20_000);
        let q = metacyclic::h1_restriction_kernel_q(&b);
        let bf = metacyclic::h1_bruteforce(&b)?;
        if q.order != bf.kernel_order {
            return Ok(Err(format!("instance {i}: Q = {}, brute force {}", q.order, bf.kernel_order)));
        }
    }
    for s in 2..=3 {
        let r = metacyclic::lemma_e2_verify(s, 1, s)?;
        if !r.pass() {
            return Ok(Err(format!("E2 s = {s}")));
        }
    }
    Ok(Ok("20 random modules, E2 for s = 2, 3".into()))
}

fn chebotarev(_: &dyn BoundsProvider) -> Result<Outcome> {
    let ext = CyclicExtension::of_character(&quad3());
    let p1 = primesets::p1_spec(&ext, 2, 2)?;
    let p2 = primesets::p2_spec(&ext, 2)?.remove(0);
    for spec in [p1, p2] {
        let rep = primesets::chebotarev_check(&spec, 200_000);
        if rep.relative_error() > 0.03 {
            return Ok(Err(format!("{:?}", rep)));
        }
    }
    Ok(Ok("P1, P2 within 3% at 2e5".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heights::StandardBounds;

    #[test]
    fn quick_items_pass() {
        let reg = CheckRegistry::with_defaults();
        let rep = reg.run(&StandardBounds, Some("app-a"));
        assert_eq!(rep.items.len(), 1);
        assert!(rep.pass, "{rep:?}");
        assert!(reg.run(&StandardBounds, Some("brauer")).pass);
    }

    #[test]
    fn corrupted_provider_fails_examples() {
        let reg = CheckRegistry::with_defaults();
        let a = reg.run(&CorruptedBounds, Some("app-a"));
        let b = reg.run(&CorruptedBounds, Some("app-b"));
        assert!(!a.pass && !b.pass);
    }

    #[test]
    fn random_classes_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            random_class(&mut rng).unwrap();
        }
    }
}
