//! Decomposition and inertia data of places in abelian extensions, splitting
//! tests, tame local presentations and norm-residue symbols of roots of unity.
//!
//! A place of an abelian field over the rational prime `q` is identified with
//! `q` itself: all places over `q` are conjugate and carry the same data.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::arith::{self, crt_pair, gcd, pow_mod};
use crate::error::{Error, Result};
use crate::fields::{AbelianField, CyclicExtension};
use crate::residue::{UnitGroup, UnitSubgroup};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Place {
    Finite(u64),
    Infinite,
}

impl Place {
    pub fn prime(q: u64) -> Result<Place> {
        if arith::is_prime(q) {
            Ok(Place::Finite(q))
        } else {
            Err(Error::invalid(format!("{q} is not prime")))
        }
    }
}

impl fmt::Display for Place {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Place::Finite(q) => write!(f, "{q}"),
            Place::Infinite => write!(f, "inf"),
        }
    }
}

/// Inertia group at `q` inside `(Z/N)^*`: the `q`-primary CRT factor.
pub fn inertia_group(g: &Arc<UnitGroup>, q: u64) -> UnitSubgroup {
    match g.component_slots(q) {
        None => UnitSubgroup::trivial(g),
        Some((_, slots)) => {
            let vecs: Vec<Vec<i64>> = slots
                .iter()
                .map(|&s| {
                    let mut v = vec![0; g.rank()];
                    v[s] = 1;
                    v
                })
                .collect();
            UnitSubgroup::from_exponents(g, &vecs)
        }
    }
}

/// Residue acting as Frobenius at `q`: `1 mod q^a` and `q mod N/q^a`.
pub fn frobenius_residue(n: u64, q: u64) -> u64 {
    let qa = q.pow(arith::valuation(n, q));
    let rest = n / qa;
    crt_pair(1 % qa, qa, q % rest, rest).unwrap()
}

/// Decomposition group at `q` inside `(Z/N)^*`.
pub fn decomposition_group(g: &Arc<UnitGroup>, q: u64) -> UnitSubgroup {
    let frob = frobenius_residue(g.modulus(), q);
    inertia_group(g, q).join(&UnitSubgroup::generated(g, &[frob as i64]).unwrap())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LocalData {
    pub place: Place,
    pub e: u64,
    pub f: u64,
    pub g: u64,
    /// Residue representing Frobenius, well defined modulo inertia.
    pub frobenius_residue: Option<u64>,
    /// Absolute norm of a place of the base over `q`.
    pub residue_norm: Option<u64>,
    /// `[k_p : Q_q]` for the base `k`.
    pub base_local_degree: u64,
    pub base_real: Option<bool>,
    pub top_real: Option<bool>,
}

impl LocalData {
    pub fn local_degree(&self) -> u64 {
        self.e * self.f
    }
}

fn order_of(g: &UnitGroup, h: &UnitSubgroup) -> u64 {
    g.order() / h.index()
}

struct FiniteParts {
    d: UnitSubgroup,
    i: UnitSubgroup,
    d_base: UnitSubgroup,
    d_top: UnitSubgroup,
    i_base: UnitSubgroup,
    i_top: UnitSubgroup,
}

fn finite_parts(ext: &CyclicExtension, q: u64) -> FiniteParts {
    let g = ext.group();
    let d = decomposition_group(g, q);
    let i = inertia_group(g, q);
    FiniteParts {
        d_base: d.intersect(ext.h_base()),
        d_top: d.intersect(ext.h_top()),
        i_base: i.intersect(ext.h_base()),
        i_top: i.intersect(ext.h_top()),
        d,
        i,
    }
}

pub fn local_data(ext: &CyclicExtension, place: Place) -> Result<LocalData> {
    let g = ext.group();
    let n = ext.modulus();
    match place {
        Place::Infinite => {
            let base_real = ext.base().is_real();
            let top_real = ext.top().is_real();
            let e = if base_real && !top_real { 2 } else { 1 };
            Ok(LocalData {
                place,
                e,
                f: 1,
                g: ext.degree() / e,
                frobenius_residue: None,
                residue_norm: None,
                base_local_degree: if base_real { 1 } else { 2 },
                base_real: Some(base_real),
                top_real: Some(top_real),
            })
        }
        Place::Finite(q) => {
            if !arith::is_prime(q) {
                return Err(Error::invalid(format!("{q} is not prime")));
            }
            let parts = finite_parts(ext, q);
            let e = order_of(g, &parts.i_base) / order_of(g, &parts.i_top);
            let local = order_of(g, &parts.d_base) / order_of(g, &parts.d_top);
            let f = local / e;
            let base_local = order_of(g, &parts.d) / order_of(g, &parts.d_base);
            let e_base = order_of(g, &parts.i) / order_of(g, &parts.i_base);
            let f_base = base_local / e_base;
            Ok(LocalData {
                place,
                e,
                f,
                g: ext.degree() / local,
                frobenius_residue: Some(frobenius_residue(n, q)),
                residue_norm: Some(q.pow(f_base as u32)),
                base_local_degree: base_local,
                base_real: None,
                top_real: None,
            })
        }
    }
}

/// Local degree `[K_q : Q_q]` of an abelian field.
pub fn local_degree(k: &AbelianField, place: Place) -> u64 {
    let ext = CyclicExtension::new(&AbelianField::rationals(), k);
    match ext {
        Ok(e) => local_data(&e, place).map(|d| d.local_degree()).unwrap_or(1),
        Err(_) => {
            // non-cyclic fields: compute from the subgroup directly
            match place {
                Place::Infinite => {
                    if k.is_real() {
                        1
                    } else {
                        2
                    }
                }
                Place::Finite(q) => {
                    let g = k.subgroup().group();
                    let d = decomposition_group(g, q);
                    order_of(g, &d) / order_of(g, &d.intersect(k.subgroup()))
                }
            }
        }
    }
}

/// Whether `q` is ramified in the field.
pub fn is_ramified(k: &AbelianField, q: u64) -> bool {
    let g = k.subgroup().group();
    if k.conductor() % q != 0 {
        return false;
    }
    !inertia_group(g, q).is_subgroup_of(k.subgroup())
}

pub fn splits_completely(k: &AbelianField, q: u64) -> Result<bool> {
    if k.conductor() % q == 0 {
        return Err(Error::invalid(format!("{q} divides the conductor {}", k.conductor())));
    }
    Ok(k.subgroup().contains(q % k.conductor().max(1)))
}

/// `q` splits completely in `Q(mu_m)` iff `q = 1 mod m`.
pub fn splits_in_mu(m: u64, q: u64) -> Result<bool> {
    if m > 1 && m % q == 0 {
        return Err(Error::invalid(format!("{q} ramifies in Q(mu_{m})")));
    }
    Ok(q % m == 1 % m)
}

/// `q` splits completely in `Q(eta_m)` iff `q = +-1 mod m`.
pub fn splits_in_eta(m: u64, q: u64) -> Result<bool> {
    if m > 1 && m % q == 0 {
        return Err(Error::invalid(format!("{q} ramifies in Q(eta_{m})")));
    }
    let r = q % m;
    Ok(r == 1 % m || r == m - 1)
}

/// `<x, y | x^e = 1, y^f = x^t, x^y = x^q>` for a tamely ramified place.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TamePresentation {
    pub e: u64,
    pub f: u64,
    pub t: u64,
    pub q: u64,
    /// Residues of `x` and `y` modulo the extension's modulus.
    pub x: u64,
    pub y: u64,
    /// `q = 1 mod e`; always true for abelian `K/k`.
    pub abelian: bool,
}

pub fn tame_presentation(ext: &CyclicExtension, q: u64) -> Result<TamePresentation> {
    let ld = local_data(ext, Place::Finite(q))?;
    if ld.e % q == 0 {
        return Err(Error::invalid(format!("place over {q} is wildly ramified (e = {})", ld.e)));
    }
    let n = ext.modulus();
    let norm = ld.residue_norm.unwrap();
    if ext.is_trivial() {
        return Ok(TamePresentation { e: 1, f: 1, t: 1, q: norm, x: 1 % n, y: 1 % n, abelian: true });
    }
    let parts = finite_parts(ext, q);
    let f_base = arith::valuation(norm, q) as u64;
    let frob = pow_mod(frobenius_residue(n, q), f_base, n);
    // adjust the Frobenius power by inertia so that it lies in H_k
    let cosets = parts.i.quotient_by(&parts.i_base).coset_representatives();
    let y = cosets
        .iter()
        .map(|&u| arith::mul_mod(u, frob, n))
        .find(|&c| ext.h_base().contains(c))
        .ok_or_else(|| Error::Internal("no Frobenius lift in the base group".into()))?;
    let local = parts.d_base.quotient_by(&parts.d_top);
    debug_assert!(local.is_cyclic());
    let (e, f) = (ld.e, ld.f);
    let (x, j) = if local.order() == 1 {
        (1 % n, 0)
    } else {
        let r0 = local.representatives()[0];
        let x = pow_mod(r0, f, n);
        let cy = local.coords(y)[0];
        (x, cy % e)
    };
    let t = if j == 0 { e } else { gcd(j, e) };
    let abelian = norm % e == 1 % e;
    if !abelian {
        return Err(Error::Internal(format!("abelian local extension with N(p) = {norm} not 1 mod e = {e}")));
    }
    if pow_mod(norm, f, e) != 1 % e || norm % (e / t) != 1 % (e / t) {
        return Err(Error::Internal("tame presentation relations fail".into()));
    }
    Ok(TamePresentation { e, f, t, q: norm, x, y, abelian })
}

/// The root of unity `zeta_{p^r}^exponent`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Root {
    pub p: u64,
    pub r: u32,
    pub exponent: u64,
}

impl Root {
    pub fn new(p: u64, r: u32, exponent: u64) -> Root {
        Root { p, r, exponent: exponent % p.pow(r) }
    }

    /// Generator of `mu_{p^r}`.
    pub fn primitive(p: u64, r: u32) -> Root {
        Root::new(p, r, 1)
    }

    pub fn minus_one() -> Root {
        Root::new(2, 1, 1)
    }

    pub fn order(&self) -> u64 {
        let m = self.p.pow(self.r);
        m / gcd(m, self.exponent)
    }
}

/// Norm-residue symbol of a root of unity of `Q_q` in `Gal(Q(mu_N)/Q)`,
/// as a residue mod `N`. A unit `u` acts by `u^{-1}` on the `q`-power roots
/// and trivially on the others.
pub fn artin_residue(n: u64, q: u64, root: Root) -> Result<u64> {
    let o = root.order();
    if o == 1 {
        return Ok(1 % n);
    }
    if q == 2 {
        if o != 2 {
            return Err(Error::invalid("only +-1 lie in Q_2".to_string()));
        }
    } else if root.p == q || (q - 1) % o != 0 {
        return Err(Error::invalid(format!("root of order {o} does not lie in Q_{q}")));
    }
    let a = arith::valuation(n, q);
    if a == 0 {
        return Ok(1 % n);
    }
    let qa = q.pow(a);
    let u = if q == 2 {
        qa - 1
    } else {
        let g = arith::primitive_root_prime_power(q, a);
        pow_mod(g, (qa / q * (q - 1)) / o, qa)
    };
    let uinv = arith::inv_mod(u, qa).unwrap();
    Ok(crt_pair(uinv, qa, 1 % (n / qa), n / qa).unwrap())
}

/// Symbol of a root of `Q_q` restricted to `K`; `true` means trivial, i.e. the
/// root is a local norm from `K`.
pub fn artin_symbol_root_of_unity(k: &AbelianField, q: u64, root: Root) -> Result<(u64, bool)> {
    let n = k.conductor();
    let r = artin_residue(n, q, root)?;
    Ok((r, n == 1 || k.subgroup().contains(r)))
}

/// `v_p` of the number of roots of unity in the completion of the base at `q`.
pub fn local_s_p(ext: &CyclicExtension, q: u64, p: u64) -> Result<u32> {
    let ld = local_data(ext, Place::Finite(q))?;
    if q != p {
        return Ok(arith::valuation(ld.residue_norm.unwrap() - 1, p));
    }
    let parts = finite_parts(ext, q);
    let gens = parts.d_base.generators();
    let n = ext.modulus();
    let mut r: u32 = if p == 2 { 1 } else { 0 };
    loop {
        let m = p.pow(r + 1);
        if n % m != 0 || !gens.iter().all(|&x| x % m == 1) {
            return Ok(r);
        }
        r += 1;
    }
}

/// Norm of a root of unity from the completion of the base at `q` down to `Q_q`.
pub fn norm_of_root_down_tower(ext: &CyclicExtension, q: u64, root: Root) -> Result<Root> {
    let o = root.order();
    if o == 1 {
        return Ok(root);
    }
    let s = local_s_p(ext, q, root.p)?;
    if o > root.p.pow(s) {
        return Err(Error::invalid(format!("root of order {o} does not lie in the completion at {q}")));
    }
    let ld = local_data(ext, Place::Finite(q))?;
    let m = root.p.pow(root.r);
    let exponent: u128 = if root.p != q {
        let norm = ld.residue_norm.unwrap();
        let f_base = arith::valuation(norm, q);
        let e_base = ld.base_local_degree / f_base as u64;
        let geo: u128 = (0..f_base).map(|j| (q as u128).pow(j) % m as u128).sum();
        e_base as u128 * geo
    } else {
        let parts = finite_parts(ext, q);
        let reps = parts.d.quotient_by(&parts.d_base).coset_representatives();
        reps.iter().map(|&x| (x % m) as u128).sum()
    };
    let e = ((root.exponent as u128 * exponent) % m as u128) as u64;
    let out = Root::new(root.p, root.r, e);
    if q != 2 && root.p == q && out.order() != 1 {
        return Err(Error::Internal(format!("norm of a {q}-power root to Q_{q} is not 1")));
    }
    Ok(out)
}

/// Whether `root` (in the completion of the base at `q`) is a norm from the top.
pub fn root_is_local_norm(ext: &CyclicExtension, q: u64, root: Root) -> Result<bool> {
    let down = norm_of_root_down_tower(ext, q, root)?;
    let n = ext.modulus();
    let r = artin_residue(n, q, down)?;
    Ok(ext.h_top().contains(r))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sqrt(d: i64) -> AbelianField {
        AbelianField::quadratic(d).unwrap()
    }

    fn over_q(k: &AbelianField) -> CyclicExtension {
        CyclicExtension::over_q(k).unwrap()
    }

    #[test]
    fn local_data_examples() {
        let e = over_q(&sqrt(-3));
        let d3 = local_data(&e, Place::Finite(3)).unwrap();
        assert_eq!((d3.e, d3.f, d3.g), (2, 1, 1));
        let d7 = local_data(&e, Place::Finite(7)).unwrap();
        assert_eq!((d7.e, d7.f, d7.g), (1, 1, 2));
        let d5 = local_data(&e, Place::Finite(5)).unwrap();
        assert_eq!((d5.e, d5.f, d5.g), (1, 2, 1));
        let inf = local_data(&e, Place::Infinite).unwrap();
        assert_eq!((inf.e, inf.g), (2, 1));
        let k = sqrt(-3);
        let triv = CyclicExtension::new(&k, &k).unwrap();
        let t = local_data(&triv, Place::Finite(3)).unwrap();
        assert_eq!((t.e, t.f, t.g), (1, 1, 1));
    }

    #[test]
    fn splitting() {
        assert!(splits_in_mu(12, 13).unwrap());
        assert!(!splits_in_mu(12, 11).unwrap());
        assert!(splits_in_eta(12, 11).unwrap());
        assert!(splits_in_mu(1, 5).unwrap());
        assert!(splits_completely(&sqrt(-3), 7).unwrap());
        assert!(splits_completely(&sqrt(-3), 3).is_err());
    }

    #[test]
    fn tame() {
        let p = tame_presentation(&over_q(&sqrt(-3)), 3).unwrap();
        assert_eq!((p.e, p.f, p.q % p.e), (2, 1, 1));
        let c5 = over_q(&AbelianField::cyclotomic(5));
        let p5 = tame_presentation(&c5, 5).unwrap();
        assert_eq!((p5.e, p5.f, p5.q), (4, 1, 5));
        let c9 = over_q(&AbelianField::cyclotomic(9));
        assert!(tame_presentation(&c9, 3).is_err());
    }

    #[test]
    fn symbols() {
        let (_, triv) = artin_symbol_root_of_unity(&AbelianField::cyclotomic(4), 2, Root::minus_one()).unwrap();
        assert!(!triv);
        let (_, triv) = artin_symbol_root_of_unity(&sqrt(2), 2, Root::minus_one()).unwrap();
        assert!(triv);
        assert!(artin_symbol_root_of_unity(&sqrt(5), 5, Root::primitive(5, 1)).is_err());
        assert!(artin_symbol_root_of_unity(&sqrt(5), 7, Root::primitive(3, 1)).unwrap().1);
    }

    #[test]
    fn norms_down() {
        let base = AbelianField::cyclotomic(4);
        let top = base.compositum(&AbelianField::cyclotomic(8));
        let ext = CyclicExtension::new(&base, &top).unwrap();
        let n = norm_of_root_down_tower(&ext, 2, Root::primitive(2, 2)).unwrap();
        assert_eq!(n.order(), 1);
        let base = sqrt(-14);
        let ext = CyclicExtension::new(&base, &base.compositum(&AbelianField::cyclotomic(4))).unwrap();
        let ld = local_data(&ext, Place::Finite(7)).unwrap();
        let n7 = norm_of_root_down_tower(&ext, 7, Root::minus_one()).unwrap();
        assert_eq!(n7.order(), if ld.base_local_degree % 2 == 0 { 1 } else { 2 });
    }
}
