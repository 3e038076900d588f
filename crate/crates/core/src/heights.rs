//! Local and global heights `h_p(K/k)`, special bases, Case A/B, exceptional
//! extensions, the bounds `b_p` and cyclic covers.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::arith::{self, prime_divisors, valuation};
use crate::error::{Error, Result};
use crate::fields::{AbelianField, CyclicExtension, DirichletCharacter};
use crate::local::{self, decomposition_group, Place, Root};
use crate::residue::UnitGroup;

/// A non-negative integer or infinity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExtInt {
    Fin(u64),
    Inf,
}

impl ExtInt {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtInt::Fin(_))
    }

    pub fn finite(self) -> Option<u64> {
        match self {
            ExtInt::Fin(x) => Some(x),
            ExtInt::Inf => None,
        }
    }

    pub fn add(self, x: u64) -> ExtInt {
        match self {
            ExtInt::Fin(a) => ExtInt::Fin(a + x),
            ExtInt::Inf => ExtInt::Inf,
        }
    }

    pub fn parse(text: &str) -> Result<ExtInt> {
        match text.trim() {
            "inf" | "∞" => Ok(ExtInt::Inf),
            t => t.parse().map(ExtInt::Fin).map_err(|_| Error::invalid(format!("bad height value {t:?}"))),
        }
    }
}

impl fmt::Display for ExtInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtInt::Fin(x) => write!(f, "{x}"),
            ExtInt::Inf => write!(f, "inf"),
        }
    }
}

impl Serialize for ExtInt {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtInt::Fin(x) => s.serialize_u64(*x),
            ExtInt::Inf => s.serialize_str("inf"),
        }
    }
}

/// Three-valued verdict for questions that the special-base interval can leave open.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Tri {
    Yes,
    No,
    Indeterminate,
}

impl Tri {
    pub fn from_bool(b: bool) -> Tri {
        if b {
            Tri::Yes
        } else {
            Tri::No
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HeightResult {
    pub lower: ExtInt,
    pub upper: ExtInt,
    pub exact: bool,
    pub breakdown: Vec<(Place, ExtInt)>,
    pub special_cap: Option<u32>,
}

impl HeightResult {
    pub fn exact(h: ExtInt, breakdown: Vec<(Place, ExtInt)>) -> Self {
        HeightResult { lower: h, upper: h, exact: true, breakdown, special_cap: None }
    }

    pub fn value(&self) -> Option<ExtInt> {
        self.exact.then_some(self.lower)
    }

    /// Whether `h >= r`, as far as the interval decides.
    pub fn at_least(&self, r: u64) -> Tri {
        if self.lower >= ExtInt::Fin(r) {
            Tri::Yes
        } else if self.upper < ExtInt::Fin(r) {
            Tri::No
        } else {
            Tri::Indeterminate
        }
    }
}

/// Local height of `K/k` at `place` for the prime `p`.
pub fn local_height(ext: &CyclicExtension, place: Place, p: u64) -> Result<ExtInt> {
    if !arith::is_prime(p) {
        return Err(Error::invalid(format!("{p} is not prime")));
    }
    let ext = ext.p_part(p);
    if ext.is_trivial() {
        return Ok(ExtInt::Inf);
    }
    match place {
        Place::Infinite => {
            let ramified = p == 2 && ext.base().is_real() && !ext.top().is_real();
            Ok(if ramified { ExtInt::Fin(0) } else { ExtInt::Inf })
        }
        Place::Finite(q) if q != p => {
            let ld = local::local_data(&ext, place)?;
            if ld.e % p != 0 {
                return Ok(ExtInt::Inf);
            }
            let s = valuation(ld.residue_norm.unwrap() - 1, p) as u64;
            Ok(ExtInt::Fin(s - valuation(ld.e, p) as u64))
        }
        Place::Finite(q) => wild_height(&ext, q, p),
    }
}

/// Height from norm tests of the local roots of unity, for places over `p`.
/// Returns infinity once the full local group `mu_{p^s}` consists of norms.
fn wild_height(ext: &CyclicExtension, q: u64, p: u64) -> Result<ExtInt> {
    let s = local::local_s_p(ext, q, p)?;
    if s == 0 {
        return Ok(ExtInt::Inf);
    }
    let mut best = 0;
    for r in 1..=s {
        if local::root_is_local_norm(ext, q, Root::primitive(p, r))? {
            best = r;
        } else {
            break;
        }
    }
    Ok(if best == s { ExtInt::Inf } else { ExtInt::Fin(best as u64) })
}

/// Same as [`local_height`] at a place over `q != p`, but by norm tests rather
/// than the closed form. Used to cross-check the two.
pub fn tame_height_by_norms(ext: &CyclicExtension, q: u64, p: u64) -> Result<ExtInt> {
    if q == p {
        return Err(Error::invalid("place is wild for p".to_string()));
    }
    let ext = ext.p_part(p);
    if ext.is_trivial() {
        return Ok(ExtInt::Inf);
    }
    wild_height(&ext, q, p)
}

/// Places where a local height can be finite.
pub fn relevant_places(ext: &CyclicExtension, p: u64) -> Vec<Place> {
    let mut qs = prime_divisors(ext.modulus());
    qs.push(2);
    qs.push(p);
    qs.sort_unstable();
    qs.dedup();
    let mut out: Vec<Place> = qs.into_iter().map(Place::Finite).collect();
    out.push(Place::Infinite);
    out
}

pub fn global_height(ext: &CyclicExtension, p: u64) -> Result<HeightResult> {
    if !arith::is_prime(p) {
        return Err(Error::invalid(format!("{p} is not prime")));
    }
    let ext_p = ext.p_part(p);
    if ext_p.is_trivial() {
        return Ok(HeightResult::exact(ExtInt::Inf, Vec::new()));
    }
    let breakdown: Vec<(Place, ExtInt)> = relevant_places(&ext_p, p)
        .into_par_iter()
        .map(|v| local_height(&ext_p, v, p).map(|h| (v, h)))
        .collect::<Result<_>>()?;
    let upper = breakdown.iter().map(|&(_, h)| h).min().unwrap_or(ExtInt::Inf);
    if p == 2 {
        if let Some(s) = is_special(ext.base()) {
            if upper > ExtInt::Fin(s as u64) {
                return Ok(HeightResult {
                    lower: ExtInt::Fin(s as u64),
                    upper,
                    exact: false,
                    breakdown,
                    special_cap: Some(s),
                });
            }
        }
    }
    Ok(HeightResult::exact(upper, breakdown))
}

/// Index `s` of a special field, if it is one.
pub fn is_special(k: &AbelianField) -> Option<u32> {
    let s = k.two_tilde().eta_index()?;
    let top = 1u64 << (s + 1);
    let candidates = [AbelianField::real_cyclotomic(top), AbelianField::i_eta(s + 1), AbelianField::cyclotomic(1 << s)];
    let n = arith::lcm(k.conductor(), top);
    let g = UnitGroup::new(n);
    let d_k = decomposition_group(&g, 2).intersect(&k.subgroup_in(&g));
    candidates.iter().any(|f| d_k.is_subgroup_of(&f.subgroup_in(&g))).then_some(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Case {
    A,
    B,
}

/// Case A when `k(mu_{p^{s+1}})/k` is cyclic, `s = s_p(K)`.
pub fn case_ab(ext: &CyclicExtension, p: u64) -> Result<Case> {
    if ext.is_trivial() {
        return Ok(Case::A);
    }
    let k = ext.base();
    let s = ext.top().s_p(p);
    let f = k.compositum(&AbelianField::cyclotomic(p.pow(s + 1)));
    let g = UnitGroup::new(f.conductor());
    let q = k.subgroup_in(&g).quotient_by(f.subgroup());
    if q.is_cyclic() {
        return Ok(Case::A);
    }
    let sk = k.s_p(2);
    if p != 2 || sk != 1 || s <= sk {
        return Err(Error::Internal(format!("Case B with p = {p}, s_p(K) = {s}, s_p(k) = {sk}")));
    }
    let t = ext.top().cyclotomic_part(k, 2);
    if t != k.compositum(&AbelianField::cyclotomic(4)) {
        return Err(Error::Internal(format!("Case B but T = {t} is not k(i)")));
    }
    Ok(Case::B)
}

/// `k = Q(sqrt(-2a))` with `a = 7 mod 8`: then `k(i)/k` is exceptional.
fn literature_exceptional_base(k: &AbelianField) -> bool {
    let n = k.conductor();
    if k.degree() != 2 || n % 8 != 0 {
        return false;
    }
    let a = n / 8;
    a % 8 == 7 && AbelianField::quadratic(-2 * a as i64).map(|f| &f == k).unwrap_or(false)
}

pub fn is_exceptional(ext: &CyclicExtension) -> Result<Tri> {
    let k = ext.base();
    let Some(s) = is_special(k) else {
        return Ok(Tri::No);
    };
    let top = ext.top();
    if !top.contains_i() || k.contains_i() {
        return Ok(Tri::No);
    }
    let ext2 = ext.p_part(2);
    let ki = k.compositum(&AbelianField::cyclotomic(4));
    let h = global_height(&ext2, 2)?;
    let h_i = global_height(&CyclicExtension::new(&ki, ext2.top())?, 2)?;
    // k(i) contains i, so it is not special and this height is exact
    let hi = h_i.lower;
    if let Some(v) = h.value() {
        return Ok(Tri::from_bool(hi > v && v > ExtInt::Fin(0)));
    }
    // an exceptional extension has h_2 = s exactly
    if hi <= ExtInt::Fin(s as u64) {
        return Ok(Tri::No);
    }
    if ext2.top() == &ki && literature_exceptional_base(k) {
        return Ok(Tri::Yes);
    }
    Ok(Tri::Indeterminate)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PrimeBounds {
    pub p: u64,
    pub height: HeightResult,
    pub s_p: u32,
    pub exceptional: Tri,
    pub b_lower: ExtInt,
    pub b_upper: ExtInt,
}

impl PrimeBounds {
    pub fn b_exact(&self) -> Option<ExtInt> {
        (self.b_lower == self.b_upper).then_some(self.b_lower)
    }
}

/// Provider of the bounds `b_p`; the self-test swaps in corrupted providers.
pub trait BoundsProvider: Send + Sync {
    fn name(&self) -> &str;
    fn bounds(&self, ext: &CyclicExtension, p: u64) -> Result<PrimeBounds>;
}

pub struct StandardBounds;

impl BoundsProvider for StandardBounds {
    fn name(&self) -> &str {
        "standard"
    }

    fn bounds(&self, ext: &CyclicExtension, p: u64) -> Result<PrimeBounds> {
        b_p(ext, p)
    }
}

pub fn b_p(ext: &CyclicExtension, p: u64) -> Result<PrimeBounds> {
    let height = global_height(ext, p)?;
    let s_p = ext.top().s_p(p);
    let exceptional = if p == 2 { is_exceptional(ext)? } else { Tri::No };
    let sp = s_p as u64;
    let (b_lower, b_upper) = match exceptional {
        Tri::Yes => {
            let s = is_special(ext.base()).expect("exceptional implies special") as u64;
            (ExtInt::Fin(s + sp + 1), ExtInt::Fin(s + sp + 1))
        }
        Tri::No => (height.lower.add(sp), height.upper.add(sp)),
        Tri::Indeterminate => {
            let lo = height.lower.add(sp);
            (lo, height.upper.add(sp).max(lo.add(1)))
        }
    };
    Ok(PrimeBounds { p, height, s_p, exceptional, b_lower, b_upper })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FiberBounds {
    pub degree: u64,
    pub primes: Vec<PrimeBounds>,
}

pub fn fiber_bounds(ext: &CyclicExtension, provider: &dyn BoundsProvider) -> Result<FiberBounds> {
    let primes = prime_divisors(ext.degree()).into_iter().map(|p| provider.bounds(ext, p)).collect::<Result<_>>()?;
    Ok(FiberBounds { degree: ext.degree(), primes })
}

/// Whether `K/k` embeds in a cyclic extension of degree `m [K:k]`.
pub fn cyclic_cover_exists(ext: &CyclicExtension, m: u64) -> Result<Tri> {
    if m == 0 {
        return Err(Error::invalid("m must be positive".to_string()));
    }
    let mut verdict = Tri::Yes;
    for p in prime_divisors(m) {
        match global_height(ext, p)?.at_least(valuation(m, p) as u64) {
            Tri::No => return Ok(Tri::No),
            Tri::Indeterminate => verdict = Tri::Indeterminate,
            Tri::Yes => {}
        }
    }
    Ok(verdict)
}

pub const ORACLE_MODULUS_CAP: u64 = 10_000;

/// Searches for `psi` with `psi^{p^r} = chi` among characters of modulus at
/// most `bound`. `None` does not prove that no such character exists.
pub fn height_divisibility_oracle(
    chi: &DirichletCharacter,
    p: u64,
    r: u32,
    bound: u64,
) -> Result<Option<DirichletCharacter>> {
    if !arith::is_prime(p) {
        return Err(Error::invalid(format!("{p} is not prime")));
    }
    if bound > ORACLE_MODULUS_CAP {
        return Err(Error::Guard(format!("modulus bound {bound} exceeds {ORACLE_MODULUS_CAP}")));
    }
    let pr = p.checked_pow(r).filter(|&x| x <= 1 << 20);
    let Some(pr) = pr else {
        return Err(Error::Guard(format!("{p}^{r} is too large")));
    };
    let chi = chi.reduced();
    let n = chi.modulus();
    let mut big_n = n;
    while big_n <= bound {
        if let Some(psi) = root_mod(&chi, pr, &UnitGroup::new(big_n)) {
            return Ok(Some(psi));
        }
        big_n += n;
    }
    Ok(None)
}

/// A character mod `N` whose `pr`-th power is `chi`, coordinate by coordinate.
fn root_mod(chi: &DirichletCharacter, pr: u64, g: &Arc<UnitGroup>) -> Option<DirichletCharacter> {
    let lifted = chi.lift(g.modulus());
    let d = lifted.order();
    let big_d = d * pr;
    let mut images = Vec::with_capacity(g.rank());
    for (&c, &(_, ord)) in lifted.images().iter().zip(g.basis()) {
        let t = (0..pr).find(|&t| (ord as u128 * (c + d * t) as u128) % big_d as u128 == 0)?;
        images.push((c + d * t) as i64);
    }
    DirichletCharacter::new(g.modulus(), big_d, &images).ok()
}

/// Largest `r <= r_max` with an oracle witness within `bound`.
pub fn oracle_certified_height(chi: &DirichletCharacter, p: u64, bound: u64, r_max: u32) -> Result<u32> {
    let mut r = 0;
    while r < r_max && height_divisibility_oracle(chi, p, r + 1, bound)?.is_some() {
        r += 1;
    }
    Ok(r)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict")]
pub enum FiberCase {
    /// `n_p <= b_p` for every `p`.
    CaseI,
    /// Primes with `n_p > b_p`.
    CaseII { primes: Vec<u64> },
    /// Primes where the interval for `b_p` straddles `n_p`.
    Indeterminate { primes: Vec<u64> },
}

/// Compares `n_p = v_p(m)` with `b_p` for the primes dividing the degree.
pub fn classify(bounds: &FiberBounds, m: u64) -> FiberCase {
    let mut bad = Vec::new();
    let mut open = Vec::new();
    for b in &bounds.primes {
        let np = ExtInt::Fin(valuation(m, b.p) as u64);
        if np > b.b_upper {
            bad.push(b.p);
        } else if np > b.b_lower {
            open.push(b.p);
        }
    }
    if !bad.is_empty() {
        FiberCase::CaseII { primes: bad }
    } else if !open.is_empty() {
        FiberCase::Indeterminate { primes: open }
    } else {
        FiberCase::CaseI
    }
}

pub fn classify_fiber(ext: &CyclicExtension, m: u64) -> Result<FiberCase> {
    Ok(classify(&fiber_bounds(ext, &StandardBounds)?, m))
}
