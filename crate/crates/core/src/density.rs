//! Counting classes of `Br(Q)` supported on a finite window of primes: the
//! fiber `Y_S`, the witnessed subsets `X_S`, the lower bound for `|X_S|/|Y_S|`
//! and a Monte Carlo estimate.
//!
//! A window is `S = S' + {q0}` with `q0` inert in `K`. A class in `Y_S` is
//! determined by its invariants on `S'`, where `inv_q` ranges over
//! `(1/(n_q m))Z/Z`; `q0` carries minus their sum.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{self, divisors, euler_phi, gcd, lcm, prime_divisors, valuation};
use crate::brauer;
use crate::error::{Error, Result};
use crate::fields::{AbelianField, CyclicExtension, DirichletCharacter};
use crate::heights::{FiberCase, StandardBounds};
use crate::local::{self, Place};
use crate::primesets::{self, PrimeSetSpec};

pub const BRUTE_FORCE_GUARD: u64 = 10_000_000;
pub const MC_BLOCK: u64 = 4096;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SupportWindow {
    pub x: u64,
    /// Degree of `K`.
    pub n: u64,
    pub q0: u64,
    /// `S'` ascending, with local degrees `n_q`.
    pub primes: Vec<u64>,
    pub local_degrees: Vec<u64>,
}

impl SupportWindow {
    /// Primes up to `x` with `q0` the smallest inert prime in none of `avoid`.
    pub fn pinned(k: &AbelianField, x: u64, avoid: &[PrimeSetSpec]) -> Result<Self> {
        let n = k.degree();
        if n == 1 {
            return Err(Error::invalid("K must be a nontrivial extension".to_string()));
        }
        let primes = arith::primes_up_to(x);
        let q0 = primes
            .iter()
            .copied()
            .find(|&q| {
                k.conductor() % q != 0
                    && local::local_degree(k, Place::Finite(q)) == n
                    && !avoid.iter().any(|s| s.contains(q))
            })
            .ok_or_else(|| Error::invalid(format!("no inert prime up to {x} outside the prime sets")))?;
        let rest: Vec<u64> = primes.into_iter().filter(|&q| q != q0).collect();
        Self::explicit(k, x, q0, &rest)
    }

    pub fn explicit(k: &AbelianField, x: u64, q0: u64, primes: &[u64]) -> Result<Self> {
        let n = k.degree();
        if !arith::is_prime(q0) || k.conductor() % q0 == 0 || local::local_degree(k, Place::Finite(q0)) != n {
            return Err(Error::invalid(format!("{q0} is not inert in {k}")));
        }
        let mut ps = primes.to_vec();
        ps.sort_unstable();
        ps.dedup();
        if let Some(&q) = ps.iter().find(|&&q| !arith::is_prime(q) || q == q0) {
            return Err(Error::invalid(format!("bad window prime {q}")));
        }
        let local_degrees = ps.iter().map(|&q| local::local_degree(k, Place::Finite(q))).collect();
        Ok(SupportWindow { x, n, q0, primes: ps, local_degrees })
    }
}

/// Which places must carry full restricted local index: a class is counted
/// when its hit mask contains one of `alternatives`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Criterion {
    pub specs: Vec<PrimeSetSpec>,
    pub alternatives: Vec<u32>,
}

impl Criterion {
    pub fn single(spec: PrimeSetSpec) -> Self {
        Criterion { specs: vec![spec], alternatives: vec![1] }
    }

    fn accepts(&self, mask: u32) -> bool {
        self.alternatives.iter().any(|&a| mask & a == a)
    }

    fn bits(&self, q: u64) -> u32 {
        self.specs.iter().enumerate().filter(|(_, s)| s.contains(q)).fold(0, |b, (i, _)| b | 1 << i)
    }
}

/// `|Y_S| = prod n_q m` over `S'`.
pub fn count_y(w: &SupportWindow, m: u64) -> BigUint {
    w.local_degrees.iter().fold(BigUint::one(), |acc, &nq| acc * BigUint::from(nq * m))
}

/// Counts all invariant vectors on `S' + {q0}` with zero sum whose
/// restrictions have index dividing `m`, without the identification.
pub fn count_y_bruteforce(w: &SupportWindow, m: u64) -> Result<u64> {
    let radices: Vec<u64> = w.local_degrees.iter().chain(std::iter::once(&w.n)).map(|&nq| nq * m).collect();
    let total = radices.iter().try_fold(1u64, |a, &r| a.checked_mul(r)).filter(|&t| t <= BRUTE_FORCE_GUARD);
    let Some(total) = total else {
        return Err(Error::Guard(format!("brute force over more than {BRUTE_FORCE_GUARD} vectors")));
    };
    let big = w.n * m;
    // numerators over the common denominator n m
    let scale: Vec<u64> = radices.iter().map(|&r| big / r).collect();
    let count = (0..total)
        .into_par_iter()
        .filter(|&idx| {
            let mut rest = idx;
            let mut sum = 0;
            for (r, s) in radices.iter().zip(&scale) {
                sum += (rest % r) * s;
                rest /= r;
            }
            sum % big == 0
        })
        .count();
    Ok(count as u64)
}

struct Transition {
    order_idx: usize,
    bits: u32,
    inc: u64,
    mult: u64,
}

fn place_transitions(nq: u64, n: u64, m: u64, bits: u32, divs: &[u64]) -> Vec<Transition> {
    let mut agg: BTreeMap<(usize, u32, u64), u64> = BTreeMap::new();
    for a in 0..nq * m {
        let o = m / gcd(a % m, m);
        let idx = divs.binary_search(&o).unwrap();
        let b = if o == m { bits } else { 0 };
        *agg.entry((idx, b, a * (n / nq))).or_default() += 1;
    }
    agg.into_iter().map(|((order_idx, bits, inc), mult)| Transition { order_idx, bits, inc, mult }).collect()
}

/// Exact `|X_S|` by dynamic programming over (index so far, hit mask, sum).
pub fn count_x(w: &SupportWindow, m: u64, crit: &Criterion) -> Result<BigUint> {
    if m < 2 {
        return Ok(BigUint::zero());
    }
    let divs = divisors(m);
    let nd = divs.len();
    let masks = 1usize << crit.specs.len();
    let big = (w.n * m) as usize;
    let states = nd * masks * big;
    if states > 1 << 22 {
        return Err(Error::Guard(format!("{states} counting states")));
    }
    let lcm_idx: Vec<Vec<usize>> =
        divs.iter().map(|&a| divs.iter().map(|&b| divs.binary_search(&lcm(a, b)).unwrap()).collect()).collect();
    let at = |d: usize, mask: usize, s: usize| (d * masks + mask) * big + s;
    let mut cur = vec![BigUint::zero(); states];
    cur[at(0, 0, 0)] = BigUint::one();
    for (&q, &nq) in w.primes.iter().zip(&w.local_degrees) {
        let trans = place_transitions(nq, w.n, m, crit.bits(q), &divs);
        let mut next = vec![BigUint::zero(); states];
        for d in 0..nd {
            for mask in 0..masks {
                for s in 0..big {
                    let c = &cur[at(d, mask, s)];
                    if c.is_zero() {
                        continue;
                    }
                    for t in &trans {
                        let j = at(lcm_idx[d][t.order_idx], mask | t.bits as usize, (s + t.inc as usize) % big);
                        next[j] += c * t.mult;
                    }
                }
            }
        }
        cur = next;
    }
    let bits0 = crit.bits(w.q0);
    let mut total = BigUint::zero();
    for d in 0..nd {
        for mask in 0..masks {
            for s in 0..big {
                // q0 has local degree n, so its restricted invariant is -s/m
                let o0 = m / gcd(s as u64 % m, m);
                let full = if o0 == m { bits0 } else { 0 };
                if lcm(divs[d], o0) == m && crit.accepts(mask as u32 | full) {
                    total += &cur[at(d, mask, s)];
                }
            }
        }
    }
    Ok(total)
}

/// `|X_S|` by enumerating invariant vectors and restricting each class.
pub fn count_x_bruteforce(k: &AbelianField, w: &SupportWindow, m: u64, crit: &Criterion) -> Result<u64> {
    if m < 2 {
        return Ok(0);
    }
    let radices: Vec<u64> = w.local_degrees.iter().map(|&nq| nq * m).collect();
    let total = radices.iter().try_fold(1u64, |a, &r| a.checked_mul(r)).filter(|&t| t <= BRUTE_FORCE_GUARD);
    let Some(total) = total else {
        return Err(Error::Guard(format!("brute force over more than {BRUTE_FORCE_GUARD} vectors")));
    };
    let count = (0..total)
        .into_par_iter()
        .filter(|&idx| {
            let mut rest = idx;
            let mut entries = Vec::with_capacity(radices.len() + 1);
            let mut sum = brauer::Inv::zero();
            for (&q, &r) in w.primes.iter().zip(&radices) {
                let y = brauer::Inv::new((rest % r) as i64, r as i64);
                rest /= r;
                sum += y;
                entries.push((Place::Finite(q), y));
            }
            entries.push((Place::Finite(w.q0), -sum));
            let alpha = brauer::BrauerClass::new(&entries).expect("balanced by construction");
            let res = alpha.restrict(k);
            if res.index() != m {
                return false;
            }
            let mask = res.restricted_support_primes().iter().fold(0, |b, &q| b | crit.bits(q));
            crit.accepts(mask)
        })
        .count();
    Ok(count as u64)
}

/// `1 - (1 - phi(nm)/nm)^c`.
pub fn density_bound(n: u64, m: u64, c: u64) -> BigRational {
    let nm = BigInt::from(n * m);
    let miss = BigRational::new(&nm - BigInt::from(euler_phi(n * m)), nm);
    BigRational::one() - pow_rational(&miss, c)
}

fn pow_rational(x: &BigRational, e: u64) -> BigRational {
    let mut out = BigRational::one();
    for _ in 0..e {
        out *= x;
    }
    out
}

/// `1 - sum_j (1 - phi(nm)/nm)^{c_j}`, clamped at 0.
pub fn composed_bound(n: u64, m: u64, counts: &[u64]) -> BigRational {
    let total = counts.iter().fold(BigRational::zero(), |a, &c| a + (BigRational::one() - density_bound(n, m, c)));
    let b = BigRational::one() - total;
    if b < BigRational::zero() {
        BigRational::zero()
    } else {
        b
    }
}

fn ratio_f64(num: &BigUint, den: &BigUint) -> f64 {
    if den.is_zero() {
        return 0.0;
    }
    let r = BigRational::new(BigInt::from(num.clone()), BigInt::from(den.clone()));
    r.to_f64().unwrap_or(0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonteCarlo {
    pub samples: u64,
    pub seed: u64,
    pub hits: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Wilson score interval at 95%.
pub fn wilson(hits: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let nf = n as f64;
    let p = hits as f64 / nf;
    let denom = 1.0 + z * z / nf;
    let centre = (p + z * z / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Uniform samples from `Y_S`; block `b` uses stream `b` of the seeded generator,
/// so the result does not depend on the thread count.
pub fn monte_carlo(w: &SupportWindow, m: u64, crit: &Criterion, samples: u64, seed: u64) -> MonteCarlo {
    let bits: Vec<u32> = w.primes.iter().map(|&q| crit.bits(q)).collect();
    let blocks = samples.div_ceil(MC_BLOCK);
    let hits: u64 = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let count = MC_BLOCK.min(samples - b * MC_BLOCK);
            let mut hits = 0;
            for _ in 0..count {
                let mut ind = 1;
                let mut mask = 0;
                let mut sum = 0;
                for (i, &nq) in w.local_degrees.iter().enumerate() {
                    let a = rng.gen_range(0..nq * m);
                    let o = m / gcd(a % m, m);
                    ind = lcm(ind, o);
                    if o == m {
                        mask |= bits[i];
                    }
                    sum = (sum + a * (w.n / nq)) % (w.n * m);
                }
                ind = lcm(ind, m / gcd(sum % m, m));
                if ind == m && crit.accepts(mask) {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    let (ci_low, ci_high) = wilson(hits, samples);
    MonteCarlo {
        samples,
        seed,
        hits,
        estimate: if samples == 0 { 0.0 } else { hits as f64 / samples as f64 },
        ci_low,
        ci_high,
    }
}

/// Classes with a witness in the sense of the crossed-product decision: for
/// some prime where the fiber is Case II, full local index over `P1` and `P2`
/// (and over `P0` when `m` is not a prime power).
pub fn noncrossed_criterion(chi: &DirichletCharacter, m: u64) -> Result<Criterion> {
    let k = chi.field();
    let ext = CyclicExtension::over_q(&k)?;
    let cls = brauer::classify_fiber_with(&ext, chi.to_string(), m, &StandardBounds)?;
    let bad = match cls.overall {
        FiberCase::CaseII { primes } => primes,
        other => return Err(Error::invalid(format!("fiber is not Case II: {other:?}"))),
    };
    let mut specs = Vec::new();
    let mut base = 0u32;
    if prime_divisors(m).len() > 1 {
        specs.push(primesets::p0_spec(&k, m)?);
        base = 1;
    }
    let mut alternatives = Vec::new();
    for p in bad {
        let choice = primesets::witness_sets(&ext, p, valuation(m, p))?;
        let mut alt = base;
        for sets in choice.candidates {
            alt |= 1 << specs.len();
            specs.push(sets.p1);
            alt |= 1 << specs.len();
            specs.push(sets.p2);
        }
        alternatives.push(alt);
    }
    if specs.len() > 12 {
        return Err(Error::Guard("too many prime sets".to_string()));
    }
    Ok(Criterion { specs, alternatives })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityReport {
    pub chi: String,
    pub m: u64,
    pub x: u64,
    pub q0: u64,
    pub window_size: usize,
    pub prime_sets: Vec<PrimeSetSpec>,
    /// `|S' ∩ P|` per prime set.
    pub hits_in_window: Vec<u64>,
    pub y_count: String,
    pub x_count: Option<String>,
    pub exact_density: Option<f64>,
    pub lower_bound: f64,
    pub lower_bound_exact: String,
    pub monte_carlo: Option<MonteCarlo>,
}

pub fn noncrossed_density_report(
    chi: &DirichletCharacter,
    m: u64,
    x: u64,
    seed: u64,
    samples: u64,
) -> Result<DensityReport> {
    let crit = noncrossed_criterion(chi, m)?;
    let k = chi.field();
    let w = SupportWindow::pinned(&k, x, &crit.specs)?;
    let hits_in_window: Vec<u64> =
        crit.specs.iter().map(|s| w.primes.iter().filter(|&&q| s.contains(q)).count() as u64).collect();
    // the bound for the first alternative
    let alt = crit.alternatives[0];
    let counts: Vec<u64> =
        hits_in_window.iter().enumerate().filter(|(i, _)| alt & (1 << i) != 0).map(|(_, &c)| c).collect();
    let bound = composed_bound(k.degree(), m, &counts);
    let y = count_y(&w, m);
    let xc = count_x(&w, m, &crit).ok();
    let exact_density = xc.as_ref().map(|c| ratio_f64(c, &y));
    let mc = (samples > 0).then(|| monte_carlo(&w, m, &crit, samples, seed));
    Ok(DensityReport {
        chi: chi.to_string(),
        m,
        x,
        q0: w.q0,
        window_size: w.primes.len(),
        prime_sets: crit.specs.clone(),
        hits_in_window,
        y_count: y.to_string(),
        x_count: xc.map(|c| c.to_string()),
        exact_density,
        lower_bound: bound.to_f64().unwrap_or(0.0),
        lower_bound_exact: bound.to_string(),
        monte_carlo: mc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k3() -> AbelianField {
        AbelianField::quadratic(-3).unwrap()
    }

    fn spec(modulus: u64, residues: Vec<u64>) -> PrimeSetSpec {
        PrimeSetSpec { role: primesets::Role::P1, modulus, residues, note: String::new() }
    }

    #[test]
    fn y_counts() {
        let w = SupportWindow::explicit(&k3(), 11, 11, &[5, 7]).unwrap();
        assert_eq!(count_y(&w, 4), BigUint::from(32u32));
        assert_eq!(count_y_bruteforce(&w, 4).unwrap(), 32);
        let w = SupportWindow::explicit(&k3(), 11, 11, &[]).unwrap();
        assert_eq!(count_y(&w, 4), BigUint::one());
        let w = SupportWindow::explicit(&k3(), 11, 11, &[7]).unwrap();
        assert_eq!(count_y(&w, 2), BigUint::from(2u32));
    }

    #[test]
    fn x_counts() {
        let w = SupportWindow::explicit(&k3(), 11, 11, &[5, 7]).unwrap();
        let crit = Criterion::single(spec(12, vec![5]));
        assert_eq!(count_x(&w, 4, &crit).unwrap(), BigUint::from(16u32));
        assert_eq!(count_x_bruteforce(&k3(), &w, 4, &crit).unwrap(), 16);
        let none = Criterion::single(spec(12, vec![1]));
        assert_eq!(count_x(&w, 4, &none).unwrap(), BigUint::zero());
        assert_eq!(count_x(&w, 1, &crit).unwrap(), BigUint::zero());
    }

    #[test]
    fn bounds() {
        assert_eq!(density_bound(2, 4, 3), BigRational::new(7.into(), 8.into()));
        assert_eq!(density_bound(2, 4, 0), BigRational::zero());
        assert_eq!(density_bound(2, 4, 10), BigRational::new(1023.into(), 1024.into()));
    }

    #[test]
    fn report_small() {
        let chi = DirichletCharacter::of_cyclic_field(&k3()).unwrap();
        let r = noncrossed_density_report(&chi, 4, 50, 7, 20_000).unwrap();
        let d = r.exact_density.unwrap();
        assert!(d >= r.lower_bound);
        let mc = r.monte_carlo.unwrap();
        assert!(mc.ci_low - 0.01 <= d && d <= mc.ci_high + 0.01, "{d} {mc:?}");
        assert!(noncrossed_density_report(&chi, 2, 50, 7, 0).is_err());
    }
}
