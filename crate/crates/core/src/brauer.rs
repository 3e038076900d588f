//! Brauer classes of `Q` as vectors of local invariants, restriction to
//! abelian fields, fiber indices and crossed-product decisions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::arith::{self, prime_divisors, valuation};
use crate::error::{Error, Result};
use crate::fields::{AbelianField, CyclicExtension, DirichletCharacter};
use crate::heights::{self, BoundsProvider, FiberBounds, FiberCase, StandardBounds};
use crate::local::{self, Place};
use crate::primesets::{self, PrimeSetSpec};

pub type Inv = Ratio<i64>;

/// Reduces into `[0, 1)`.
pub fn reduce(x: Inv) -> Inv {
    x - Inv::from_integer(x.floor().to_integer())
}

fn order(x: Inv) -> u64 {
    reduce(x).denom().unsigned_abs()
}

fn parse_inv(text: &str) -> Result<Inv> {
    let bad = || Error::invalid(format!("bad invariant {text:?}"));
    let t = text.trim();
    let (a, b) = match t.split_once('/') {
        Some((a, b)) => (a.trim().parse::<i64>().map_err(|_| bad())?, b.trim().parse::<i64>().map_err(|_| bad())?),
        None => (t.parse::<i64>().map_err(|_| bad())?, 1),
    };
    if b <= 0 {
        return Err(bad());
    }
    Ok(Inv::new(a, b))
}

fn fmt_inv(x: Inv) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

fn ser_invariants<K: fmt::Display, S: Serializer>(m: &BTreeMap<K, Inv>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let mut map = s.serialize_map(Some(m.len()))?;
    for (k, v) in m {
        map.serialize_entry(&k.to_string(), &fmt_inv(*v))?;
    }
    map.end()
}

/// Element of `Br(Q)`, by its nonzero local invariants.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct BrauerClass {
    inv: BTreeMap<Place, Inv>,
}

impl Serialize for BrauerClass {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ser_invariants(&self.inv, s)
    }
}

impl fmt::Display for BrauerClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.inv.iter().map(|(q, x)| format!("{q}:{}", fmt_inv(*x))).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl BrauerClass {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Validates the entries: distinct primes, real invariant in `{0, 1/2}`, zero sum.
    pub fn new(entries: &[(Place, Inv)]) -> Result<Self> {
        let mut inv = BTreeMap::new();
        let mut total = Inv::zero();
        for &(place, x) in entries {
            if let Place::Finite(q) = place {
                if !arith::is_prime(q) {
                    return Err(Error::invalid(format!("{q} is not prime")));
                }
            }
            let x = reduce(x);
            if place == Place::Infinite && !(x.is_zero() || x == Inv::new(1, 2)) {
                return Err(Error::invalid(format!("real invariant must be 0 or 1/2, got {}", fmt_inv(x))));
            }
            if inv.insert(place, x).is_some() {
                return Err(Error::invalid(format!("place {place} given twice")));
            }
            total += x;
        }
        if !reduce(total).is_zero() {
            return Err(Error::invalid(format!("invariants sum to {}, not 0", fmt_inv(reduce(total)))));
        }
        inv.retain(|_, x| !x.is_zero());
        Ok(BrauerClass { inv })
    }

    /// Parses `q1:a/b,q2:c/d,...`; `inf` names the real place.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if t.is_empty() || t == "0" {
            return Ok(Self::zero());
        }
        let mut entries = Vec::new();
        for part in t.split(',') {
            let (q, x) = part.split_once(':').ok_or_else(|| Error::invalid(format!("bad entry {part:?}")))?;
            let place = match q.trim() {
                "inf" | "infinity" => Place::Infinite,
                q => Place::Finite(q.parse().map_err(|_| Error::invalid(format!("bad place {q:?}")))?),
            };
            entries.push((place, parse_inv(x)?));
        }
        Self::new(&entries)
    }

    pub fn invariants(&self) -> &BTreeMap<Place, Inv> {
        &self.inv
    }

    pub fn invariant(&self, place: Place) -> Inv {
        self.inv.get(&place).copied().unwrap_or_else(Inv::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.inv.is_empty()
    }

    pub fn index(&self) -> u64 {
        self.inv.values().fold(1, |acc, &x| arith::lcm(acc, order(x)))
    }

    pub fn support(&self) -> BTreeSet<Place> {
        self.inv.keys().copied().collect()
    }

    /// Places with full local index.
    pub fn restricted_support(&self) -> BTreeSet<Place> {
        full_index_places(&self.inv, self.index())
    }

    pub fn add(&self, other: &BrauerClass) -> BrauerClass {
        let mut inv = self.inv.clone();
        for (&q, &x) in &other.inv {
            let e = inv.entry(q).or_insert_with(Inv::zero);
            *e = reduce(*e + x);
        }
        inv.retain(|_, x| !x.is_zero());
        BrauerClass { inv }
    }

    pub fn restrict(&self, k: &AbelianField) -> RestrictedClass {
        let d = k.degree();
        let mut inv = BTreeMap::new();
        for (&place, &x) in &self.inv {
            let n = local::local_degree(k, place);
            let y = reduce(x * Inv::from_integer(n as i64));
            if y.is_zero() {
                continue;
            }
            for j in 0..d / n {
                inv.insert(KPlace { place, coset: j }, y);
            }
        }
        RestrictedClass { field: k.clone(), inv }
    }
}

fn full_index_places<K: Ord + Copy + HasPlace>(inv: &BTreeMap<K, Inv>, ind: u64) -> BTreeSet<K> {
    inv.iter()
        .filter(|(k, &x)| {
            let need = if k.place() == Place::Infinite { arith::gcd(2, ind) } else { ind };
            order(x) == need
        })
        .map(|(&k, _)| k)
        .collect()
}

trait HasPlace {
    fn place(&self) -> Place;
}

impl HasPlace for Place {
    fn place(&self) -> Place {
        *self
    }
}

/// A place of `K`: the rational place below it and an index among its conjugates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KPlace {
    pub place: Place,
    pub coset: u64,
}

impl HasPlace for KPlace {
    fn place(&self) -> Place {
        self.place
    }
}

impl fmt::Display for KPlace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.place, self.coset)
    }
}

/// Restriction `alpha^K` of a class of `Q` to an abelian field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RestrictedClass {
    pub field: AbelianField,
    inv: BTreeMap<KPlace, Inv>,
}

impl Serialize for RestrictedClass {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ser_invariants(&self.inv, s)
    }
}

impl RestrictedClass {
    pub fn invariants(&self) -> &BTreeMap<KPlace, Inv> {
        &self.inv
    }

    pub fn index(&self) -> u64 {
        self.inv.values().fold(1, |acc, &x| arith::lcm(acc, order(x)))
    }

    pub fn support(&self) -> BTreeSet<KPlace> {
        self.inv.keys().copied().collect()
    }

    pub fn restricted_support(&self) -> BTreeSet<KPlace> {
        full_index_places(&self.inv, self.index())
    }

    /// Rational primes below places of the restricted support.
    pub fn restricted_support_primes(&self) -> BTreeSet<u64> {
        self.restricted_support()
            .into_iter()
            .filter_map(|k| match k.place {
                Place::Finite(q) => Some(q),
                Place::Infinite => None,
            })
            .collect()
    }

    pub fn total(&self) -> Inv {
        reduce(self.inv.values().fold(Inv::zero(), |a, &b| a + b))
    }
}

/// `ind(alpha + chi) = |chi| ind(alpha^{Q(chi)})`.
pub fn fiber_index(alpha: &BrauerClass, chi: &DirichletCharacter) -> u64 {
    chi.order() * alpha.restrict(&chi.field()).index()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PrimeVerdict {
    pub p: u64,
    pub n_p: u32,
    pub b_lower: heights::ExtInt,
    pub b_upper: heights::ExtInt,
    pub exceptional: heights::Tri,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FiberClassification {
    pub chi: String,
    pub m: u64,
    pub factorization: BTreeMap<u64, u32>,
    pub primes: Vec<PrimeVerdict>,
    pub overall: FiberCase,
}

pub fn classify_fiber_with(
    ext: &CyclicExtension,
    label: String,
    m: u64,
    provider: &dyn BoundsProvider,
) -> Result<FiberClassification> {
    if m == 0 {
        return Err(Error::invalid("m must be positive".to_string()));
    }
    let bounds: FiberBounds = heights::fiber_bounds(ext, provider)?;
    let overall = heights::classify(&bounds, m);
    let primes = bounds
        .primes
        .iter()
        .map(|b| PrimeVerdict {
            p: b.p,
            n_p: valuation(m, b.p),
            b_lower: b.b_lower,
            b_upper: b.b_upper,
            exceptional: b.exceptional,
        })
        .collect();
    let factorization = arith::factorize(m).into_iter().collect();
    Ok(FiberClassification { chi: label, m, factorization, primes, overall })
}

pub fn classify_fiber(chi: &DirichletCharacter, m: u64) -> Result<FiberClassification> {
    classify_fiber_with(&CyclicExtension::of_character(chi), chi.to_string(), m, &StandardBounds)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub p: u64,
    pub q0: Option<u64>,
    pub q1: u64,
    pub q2: u64,
    pub strategy: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict")]
pub enum Decision {
    Crossed,
    Noncrossed { witness: Witness },
    Undecided { reason: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DecisionReport {
    pub index: u64,
    pub restricted_index: u64,
    pub classification: FiberClassification,
    pub decision: Decision,
}

pub const DEFAULT_PRIMESET_LIMIT: u64 = 1_000_000;

fn first_member(spec: &PrimeSetSpec, candidates: &BTreeSet<u64>, limit: u64) -> Option<u64> {
    candidates.iter().copied().find(|&q| q <= limit && spec.contains(q))
}

pub fn decide_crossed(alpha: &BrauerClass, chi: &DirichletCharacter, limit: u64) -> Result<DecisionReport> {
    decide_crossed_with(alpha, chi, limit, &StandardBounds)
}

pub fn decide_crossed_with(
    alpha: &BrauerClass,
    chi: &DirichletCharacter,
    limit: u64,
    provider: &dyn BoundsProvider,
) -> Result<DecisionReport> {
    let k = chi.field();
    let ext = CyclicExtension::over_q(&k)?;
    let res = alpha.restrict(&k);
    let m = res.index();
    let classification = classify_fiber_with(&ext, chi.to_string(), m, provider)?;
    let report = |decision| DecisionReport {
        index: chi.order() * m,
        restricted_index: m,
        classification: classification.clone(),
        decision,
    };
    let bad = match &classification.overall {
        FiberCase::CaseI => return Ok(report(Decision::Crossed)),
        FiberCase::Indeterminate { primes } => {
            return Ok(report(Decision::Undecided { reason: format!("b_p undecided at {primes:?}") }));
        }
        FiberCase::CaseII { primes } => primes.clone(),
    };
    let sa = res.restricted_support_primes();
    let prime_power = prime_divisors(m).len() <= 1;
    let q0 = if prime_power { None } else { first_member(&primesets::p0_spec(&k, m)?, &sa, limit) };
    if !prime_power && q0.is_none() {
        return Ok(report(Decision::Undecided { reason: "no restricted-support place in P0".into() }));
    }
    for p in bad {
        let n = valuation(m, p);
        let choice = primesets::witness_sets(&ext, p, n)?;
        // with two candidate strategies a witness must work for both
        let mut found = None;
        for sets in &choice.candidates {
            let (Some(q1), Some(q2)) = (first_member(&sets.p1, &sa, limit), first_member(&sets.p2, &sa, limit)) else {
                found = None;
                break;
            };
            if found.is_none() {
                found = Some(Witness { p, q0, q1, q2, strategy: sets.strategy.clone() });
            }
        }
        if let Some(w) = found {
            return Ok(report(Decision::Noncrossed { witness: w }));
        }
    }
    Ok(report(Decision::Undecided { reason: "no witness pair in the restricted support".into() }))
}

/// A class with `ind alpha^K = m` whose restricted support lies over each of
/// `required`. Missing balance goes to the smallest suitable unramified prime.
pub fn sample_class(k: &AbelianField, m: u64, required: &[u64], seed: u64) -> Result<BrauerClass> {
    if m == 0 {
        return Err(Error::invalid("m must be positive".to_string()));
    }
    if m == 1 {
        return Ok(BrauerClass::zero());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mi = m as i64;
    let units: Vec<i64> = (1..mi).filter(|&u| u.gcd(&mi) == 1).collect();
    let mut req: Vec<u64> = required.to_vec();
    req.sort_unstable();
    req.dedup();
    let mut entries = Vec::new();
    let mut total = Inv::zero();
    for (idx, &q) in req.iter().enumerate() {
        if !arith::is_prime(q) {
            return Err(Error::invalid(format!("{q} is not prime")));
        }
        let n = local::local_degree(k, Place::Finite(q)) as i64;
        let last = idx + 1 == req.len() && req.len() > 1;
        let x = if last {
            // try to close the sum here
            let y = reduce(-total);
            if order(y * Inv::from_integer(n)) == m {
                y
            } else {
                Inv::new(units[rng.gen_range(0..units.len())], n * mi)
            }
        } else {
            Inv::new(units[rng.gen_range(0..units.len())], n * mi)
        };
        total = reduce(total + x);
        entries.push((Place::Finite(q), x));
    }
    if !total.is_zero() {
        let y = reduce(-total);
        let aux = (2u64..100_000)
            .filter(|&q| arith::is_prime(q) && !req.contains(&q) && k.conductor() % q != 0)
            .find(|&q| m % order(y * Inv::from_integer(local::local_degree(k, Place::Finite(q)) as i64)) == 0)
            .ok_or_else(|| Error::Guard("no balancing prime below 100000".into()))?;
        entries.push((Place::Finite(aux), y));
    }
    if entries.is_empty() {
        // no required places: put 1/m at a split prime and balance at another
        let split: Vec<u64> = (2u64..100_000)
            .filter(|&q| arith::is_prime(q) && k.conductor() % q != 0 && local::local_degree(k, Place::Finite(q)) == 1)
            .take(2)
            .collect();
        if split.len() < 2 {
            return Err(Error::Guard("no split primes below 100000".into()));
        }
        entries.push((Place::Finite(split[0]), Inv::new(1, mi)));
        entries.push((Place::Finite(split[1]), Inv::new(mi - 1, mi)));
    }
    let alpha = BrauerClass::new(&entries)?;
    let res = alpha.restrict(k);
    if res.index() != m || !req.iter().all(|q| res.restricted_support_primes().contains(q)) {
        return Err(Error::invalid(format!("cannot realize index {m} with full local index over {req:?}")));
    }
    Ok(alpha)
}

/// Element `alpha + chi` of the fiber over `chi`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiberElement {
    pub alpha: BrauerClass,
    pub chi: DirichletCharacter,
}

impl FiberElement {
    pub fn new(alpha: BrauerClass, chi: DirichletCharacter) -> Self {
        FiberElement { alpha, chi: chi.reduced() }
    }

    pub fn index(&self) -> u64 {
        fiber_index(&self.alpha, &self.chi)
    }

    pub fn tensor(&self, other: &FiberElement) -> FiberElement {
        FiberElement::new(self.alpha.add(&other.alpha), self.chi.mul(&other.chi))
    }
}

impl Zero for FiberElement {
    fn zero() -> Self {
        FiberElement::new(BrauerClass::zero(), DirichletCharacter::trivial())
    }

    fn is_zero(&self) -> bool {
        self.alpha.is_zero() && self.chi.order() == 1
    }
}

impl std::ops::Add for FiberElement {
    type Output = FiberElement;

    fn add(self, other: FiberElement) -> FiberElement {
        self.tensor(&other)
    }
}
