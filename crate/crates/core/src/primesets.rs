//! Congruence descriptions of the witness prime sets `P0`, `P1`, `P2`, the
//! strategies that choose them, and sieving.
//!
//! Only primes of the base of residue degree one are used, so a set is a set
//! of rational primes `q` given by residues modulo one conductor, and the
//! Frobenius of the prime of the base over `q` is the class of `q` itself.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{self, gcd};
use crate::error::{Error, Result};
use crate::fields::{AbelianField, CyclicExtension};
use crate::heights::{self, Case, ExtInt, Tri};
use crate::residue::UnitGroup;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Role {
    P0,
    P1,
    P2,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PrimeSetSpec {
    pub role: Role,
    pub modulus: u64,
    /// Sorted residues modulo `modulus`.
    pub residues: Vec<u64>,
    pub note: String,
}

impl PrimeSetSpec {
    pub fn contains(&self, q: u64) -> bool {
        gcd(q, self.modulus) == 1 && self.residues.binary_search(&(q % self.modulus)).is_ok()
    }

    /// Expected share of all primes, `|R| / phi(N)`.
    pub fn density(&self) -> f64 {
        self.residues.len() as f64 / arith::euler_phi(self.modulus) as f64
    }
}

/// Condition on the Frobenius of a degree-one prime of the base.
#[derive(Clone, Debug)]
enum Cond {
    /// Trivial on the field.
    Split(AbelianField),
    /// Generates the (cyclic) Galois group of the field over the base.
    Inert(AbelianField),
}

/// Residues `x` in `H_base` modulo the common conductor meeting all conditions.
fn compile(role: Role, base: &AbelianField, conds: &[Cond], note: String) -> Result<PrimeSetSpec> {
    let n = conds.iter().fold(base.conductor(), |acc, c| match c {
        Cond::Split(f) | Cond::Inert(f) => arith::lcm(acc, f.conductor()),
    });
    let g = UnitGroup::new(n);
    let h_base = base.subgroup_in(&g);
    let mut tests = Vec::new();
    for c in conds {
        let (f, inert) = match c {
            Cond::Split(f) => (f, false),
            Cond::Inert(f) => (f, true),
        };
        let h_f = f.subgroup_in(&g);
        if !h_f.is_subgroup_of(&h_base) {
            return Err(Error::Internal(format!("{f} does not contain {base}")));
        }
        let q = h_base.quotient_by(&h_f);
        if inert && !q.is_cyclic() {
            return Err(Error::NotCyclic(q.factors().to_vec()));
        }
        tests.push((inert, q));
    }
    let mut residues: Vec<u64> = h_base
        .elements()
        .into_iter()
        .filter(|&x| {
            tests
                .iter()
                .all(|(inert, q)| if *inert { q.element_order(x) == q.order() } else { q.element_order(x) == 1 })
        })
        .collect();
    residues.sort_unstable();
    if residues.is_empty() {
        return Err(Error::Internal(format!("empty residue set for {role}")));
    }
    Ok(PrimeSetSpec { role, modulus: n, residues, note })
}

/// Primes splitting completely in `K(mu_m)`.
pub fn p0_spec(k: &AbelianField, m: u64) -> Result<PrimeSetSpec> {
    if m < 2 {
        return Err(Error::invalid("m must be at least 2".to_string()));
    }
    let f = k.compositum(&AbelianField::cyclotomic(m));
    compile(Role::P0, &AbelianField::rationals(), &[Cond::Split(f)], format!("split completely in K(mu_{m})"))
}

/// Primes of the cyclotomic part `T` inert in `K` and split in `T(mu_{p^n})`.
pub fn p1_spec(ext: &CyclicExtension, p: u64, n: u32) -> Result<PrimeSetSpec> {
    let t = ext.top().cyclotomic_part(ext.base(), p);
    let f = t.compositum(&AbelianField::cyclotomic(p.pow(n)));
    compile(
        Role::P1,
        &t,
        &[Cond::Split(f), Cond::Inert(ext.top().clone())],
        format!("inert in K over T = {t}, split completely in T(mu_{})", p.pow(n)),
    )
}

fn inert_in_both(role: Role, ext: &CyclicExtension, other: AbelianField, label: &str) -> Result<PrimeSetSpec> {
    compile(
        role,
        ext.base(),
        &[Cond::Inert(ext.top().clone()), Cond::Inert(other)],
        format!("inert in K and in k({label})"),
    )
}

fn eta_field(ext: &CyclicExtension, s: u32) -> AbelianField {
    ext.base().compositum(&AbelianField::real_cyclotomic(1 << (s + 1)))
}

/// Witness sets for `2^n`- or `p^n`-covers with `n` above `b_p`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WitnessSets {
    pub strategy: String,
    pub p1: PrimeSetSpec,
    pub p2: PrimeSetSpec,
}

/// One way of producing `P1`, `P2` for a given kind of extension.
pub trait WitnessStrategy: Send + Sync {
    fn name(&self) -> &'static str;
    fn build(&self, ext: &CyclicExtension, p: u64, n: u32) -> Result<WitnessSets>;
}

/// Case A: `P2` inert in `K` and in `k(mu_{p^{s+1}})`.
struct CaseA;

impl WitnessStrategy for CaseA {
    fn name(&self) -> &'static str {
        "case-a"
    }

    fn build(&self, ext: &CyclicExtension, p: u64, n: u32) -> Result<WitnessSets> {
        let s = ext.top().s_p(p);
        let cyc = ext.base().compositum(&AbelianField::cyclotomic(p.pow(s + 1)));
        Ok(WitnessSets {
            strategy: self.name().into(),
            p1: p1_spec(ext, p, n)?,
            p2: inert_in_both(Role::P2, ext, cyc, &format!("mu_{}", p.pow(s + 1)))?,
        })
    }
}

/// Case B with `h_2 = 0`: Frobenius behaviour in `k(eta_{2^{s+1}})` separates the sets.
struct CaseBSplit;

impl WitnessStrategy for CaseBSplit {
    fn name(&self) -> &'static str {
        "case-b-eta"
    }

    fn build(&self, ext: &CyclicExtension, _p: u64, _n: u32) -> Result<WitnessSets> {
        let s = ext.top().s_p(2);
        let eta = eta_field(ext, s);
        let label = format!("eta_{}", 1u64 << (s + 1));
        let p1 = compile(
            Role::P1,
            ext.base(),
            &[Cond::Inert(ext.top().clone()), Cond::Split(eta.clone())],
            format!("inert in K, split completely in k({label})"),
        )?;
        Ok(WitnessSets { strategy: self.name().into(), p1, p2: inert_in_both(Role::P2, ext, eta, &label)? })
    }
}

/// Case B with `h_2(K/T) = h_2(K/k)`: pass to `K/T`, which is Case A.
struct CaseBReduce;

impl WitnessStrategy for CaseBReduce {
    fn name(&self) -> &'static str {
        "case-b-over-t"
    }

    fn build(&self, ext: &CyclicExtension, p: u64, n: u32) -> Result<WitnessSets> {
        let t = ext.top().cyclotomic_part(ext.base(), p);
        let over_t = CyclicExtension::new(&t, ext.top())?;
        let mut sets = CaseA.build(&over_t, p, n)?;
        sets.strategy = self.name().into();
        Ok(sets)
    }
}

/// Exceptional extensions: `P1` as in Case A, `P2` inert in `K` and `k(eta_{2^{s+1}})`.
struct Exceptional;

impl WitnessStrategy for Exceptional {
    fn name(&self) -> &'static str {
        "exceptional"
    }

    fn build(&self, ext: &CyclicExtension, p: u64, n: u32) -> Result<WitnessSets> {
        let s = ext.top().s_p(2);
        let eta = eta_field(ext, s);
        Ok(WitnessSets {
            strategy: self.name().into(),
            p1: p1_spec(ext, p, n)?,
            p2: inert_in_both(Role::P2, ext, eta, &format!("eta_{}", 1u64 << (s + 1)))?,
        })
    }
}

pub struct StrategyRegistry {
    strategies: BTreeMap<&'static str, Arc<dyn WitnessStrategy>>,
}

impl StrategyRegistry {
    pub fn new() -> Self {
        StrategyRegistry { strategies: BTreeMap::new() }
    }

    pub fn with_defaults() -> Self {
        let mut r = Self::new();
        r.register(Arc::new(CaseA));
        r.register(Arc::new(CaseBSplit));
        r.register(Arc::new(CaseBReduce));
        r.register(Arc::new(Exceptional));
        r
    }

    pub fn register(&mut self, s: Arc<dyn WitnessStrategy>) {
        self.strategies.insert(s.name(), s);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn WitnessStrategy>> {
        self.strategies.get(name).cloned().ok_or_else(|| Error::invalid(format!("unknown strategy {name:?}")))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.strategies.keys().copied().collect()
    }
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}

pub fn registry() -> &'static StrategyRegistry {
    static REG: OnceLock<StrategyRegistry> = OnceLock::new();
    REG.get_or_init(StrategyRegistry::with_defaults)
}

/// Names of the strategies that apply to `K/k` and `p`. Two names mean the
/// exceptionality of `K/k` is undecided and both candidates are returned.
pub fn select_strategies(ext: &CyclicExtension, p: u64) -> Result<Vec<&'static str>> {
    if ext.p_part(p).is_trivial() {
        return Err(Error::invalid(format!("{p} does not divide the degree")));
    }
    if heights::case_ab(ext, p)? == Case::A {
        return Ok(vec!["case-a"]);
    }
    Ok(match heights::is_exceptional(ext)? {
        Tri::Yes => vec!["exceptional"],
        Tri::Indeterminate => vec!["exceptional", "case-b-over-t"],
        Tri::No => {
            let h = heights::global_height(ext, 2)?;
            if h.value() == Some(ExtInt::Fin(0)) {
                vec!["case-b-eta"]
            } else {
                vec!["case-b-over-t"]
            }
        }
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WitnessChoice {
    /// More than one entry when exceptionality is undecided.
    pub candidates: Vec<WitnessSets>,
    pub dual: bool,
}

pub fn witness_sets(ext: &CyclicExtension, p: u64, n: u32) -> Result<WitnessChoice> {
    let names = select_strategies(ext, p)?;
    let candidates = names.iter().map(|name| registry().get(name)?.build(ext, p, n)).collect::<Result<Vec<_>>>()?;
    Ok(WitnessChoice { dual: candidates.len() > 1, candidates })
}

pub fn p2_spec(ext: &CyclicExtension, p: u64) -> Result<Vec<PrimeSetSpec>> {
    let n = ext.top().s_p(p) + 1;
    Ok(witness_sets(ext, p, n)?.candidates.into_iter().map(|w| w.p2).collect())
}

/// Primes up to `limit` in the set, ascending.
pub fn enumerate(spec: &PrimeSetSpec, limit: u64) -> Vec<u64> {
    const CHUNK: u64 = 1 << 16;
    let primes = arith::primes_up_to(limit);
    primes
        .par_chunks(CHUNK as usize)
        .flat_map_iter(|c| c.iter().copied().filter(|&q| spec.contains(q)).collect::<Vec<_>>())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChebotarevReport {
    pub limit: u64,
    pub count: usize,
    pub pi: usize,
    pub observed: f64,
    pub predicted: f64,
}

impl ChebotarevReport {
    pub fn relative_error(&self) -> f64 {
        (self.observed - self.predicted).abs() / self.predicted
    }
}

pub fn chebotarev_check(spec: &PrimeSetSpec, limit: u64) -> ChebotarevReport {
    let pi = arith::primes_up_to(limit).len();
    let count = enumerate(spec, limit).len();
    ChebotarevReport {
        limit,
        count,
        pi,
        observed: if pi == 0 { 0.0 } else { count as f64 / pi as f64 },
        predicted: spec.density(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn over_q(k: &AbelianField) -> CyclicExtension {
        CyclicExtension::over_q(k).unwrap()
    }

    fn sqrt(d: i64) -> AbelianField {
        AbelianField::quadratic(d).unwrap()
    }

    #[test]
    fn examples_sqrt_minus_3() {
        let e = over_q(&sqrt(-3));
        let p1 = p1_spec(&e, 2, 2).unwrap();
        assert_eq!((p1.modulus, p1.residues.clone()), (12, vec![5]));
        let p1 = p1_spec(&e, 2, 3).unwrap();
        assert_eq!((p1.modulus, p1.residues.clone()), (24, vec![17]));
        let p2 = p2_spec(&e, 2).unwrap();
        assert_eq!((p2[0].modulus, p2[0].residues.clone()), (12, vec![11]));
        let p0 = p0_spec(&sqrt(-3), 4).unwrap();
        assert_eq!((p0.modulus, p0.residues.clone()), (12, vec![1]));
        assert_eq!(enumerate(&p1_spec(&e, 2, 2).unwrap(), 60), vec![5, 17, 29, 41, 53]);
        assert_eq!(enumerate(&p2[0], 60), vec![11, 23, 47, 59]);
    }

    #[test]
    fn examples_p0() {
        let p0 = p0_spec(&AbelianField::rationals(), 2).unwrap();
        assert_eq!((p0.modulus, p0.residues.clone()), (1, vec![0]));
        let p0 = p0_spec(&AbelianField::cyclotomic(4), 3).unwrap();
        assert_eq!((p0.modulus, p0.residues.clone()), (12, vec![1]));
    }

    #[test]
    fn gaussian_case_b() {
        let e = over_q(&AbelianField::cyclotomic(4));
        let w = witness_sets(&e, 2, 3).unwrap();
        assert_eq!(w.candidates[0].strategy, "case-b-eta");
        assert_eq!(w.candidates[0].p1.residues, vec![7]);
        assert_eq!(w.candidates[0].p2.residues, vec![3]);
        assert_eq!(w.candidates[0].p2.modulus, 8);
    }

    #[test]
    fn trivial_top() {
        let q = AbelianField::rationals();
        let e = CyclicExtension::new(&q, &q).unwrap();
        let p1 = p1_spec(&e, 2, 2).unwrap();
        assert_eq!((p1.modulus, p1.residues.clone()), (4, vec![1]));
        assert!(p2_spec(&e, 2).is_err());
    }

    #[test]
    fn density_of_residue_class() {
        let e = over_q(&sqrt(-3));
        let r = chebotarev_check(&p2_spec(&e, 2).unwrap()[0], 100_000);
        assert!(r.relative_error() < 0.02, "{r:?}");
    }
}
