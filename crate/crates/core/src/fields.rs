//! Abelian number fields as fixed fields `Q(mu_n)^H`, Dirichlet characters,
//! and cyclic extensions between such fields.

use std::fmt;
use std::sync::Arc;

use crate::arith::{self, gcd, lcm};
use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::residue::{UnitGroup, UnitSubgroup};

/// Fixed field of `H <= (Z/n)^*`, always stored with `n` the conductor.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct AbelianField {
    h: UnitSubgroup,
}

impl fmt::Debug for AbelianField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for AbelianField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let gens: Vec<String> = self.h.generators().iter().map(|g| g.to_string()).collect();
        write!(f, "mu:n={};H=[{}]", self.conductor(), gens.join(","))
    }
}

impl AbelianField {
    pub fn new(n: u64, gens: &[i64]) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("modulus must be positive"));
        }
        let g = UnitGroup::new(n);
        Ok(Self::from_subgroup(UnitSubgroup::generated(&g, gens)?))
    }

    /// Reduces `(n, H)` to the conductor.
    pub fn from_subgroup(mut h: UnitSubgroup) -> Self {
        'outer: loop {
            let n = h.modulus();
            for q in arith::prime_divisors(n) {
                let m = n / q;
                if h.contains_reduction_kernel(m) {
                    h = h.image(&UnitGroup::new(m));
                    continue 'outer;
                }
            }
            return AbelianField { h };
        }
    }

    pub fn rationals() -> Self {
        Self::from_subgroup(UnitSubgroup::trivial(&UnitGroup::new(1)))
    }

    /// `Q(mu_m)`.
    pub fn cyclotomic(m: u64) -> Self {
        Self::from_subgroup(UnitSubgroup::trivial(&UnitGroup::new(m)))
    }

    /// `Q(eta_m)`, the maximal real subfield of `Q(mu_m)`.
    pub fn real_cyclotomic(m: u64) -> Self {
        let g = UnitGroup::new(m);
        Self::from_subgroup(UnitSubgroup::generated(&g, &[-1]).unwrap())
    }

    /// `Q(i eta_{2^s})` for `s >= 3`.
    pub fn i_eta(s: u32) -> Self {
        assert!(s >= 3);
        let m = 1u64 << s;
        let g = UnitGroup::new(m);
        Self::from_subgroup(UnitSubgroup::generated(&g, &[(m / 2 - 1) as i64]).unwrap())
    }

    /// `Q(sqrt D)` via the Kronecker character of its discriminant.
    pub fn quadratic(d: i64) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("D must be nonzero"));
        }
        if d == 1 {
            return Ok(Self::rationals());
        }
        if !squarefree(d.unsigned_abs()) {
            return Err(Error::invalid(format!("D = {d} is not squarefree")));
        }
        let disc = if d.rem_euclid(4) == 1 { d } else { 4 * d };
        let n = disc.unsigned_abs();
        let g = UnitGroup::new(n);
        let images: Vec<Vec<i64>> = g.basis().iter().map(|&(r, _)| vec![i64::from(kronecker(disc, r) == -1)]).collect();
        let l = Lattice::kernel_of_map(&g.orders(), &images, &[2]);
        Ok(Self::from_subgroup(UnitSubgroup::from_lattice(&g, l)))
    }

    pub fn conductor(&self) -> u64 {
        self.h.modulus()
    }

    pub fn subgroup(&self) -> &UnitSubgroup {
        &self.h
    }

    pub fn degree(&self) -> u64 {
        self.h.index()
    }

    pub fn is_rationals(&self) -> bool {
        self.conductor() == 1
    }

    /// `H` lifted to modulus `m`, a multiple of the conductor.
    pub fn subgroup_at(&self, m: u64) -> UnitSubgroup {
        self.h.lift(&UnitGroup::new(m))
    }

    pub fn subgroup_in(&self, g: &Arc<UnitGroup>) -> UnitSubgroup {
        self.h.lift(g)
    }

    /// Whether `other` is a subfield of `self`.
    pub fn contains(&self, other: &AbelianField) -> bool {
        let m = lcm(self.conductor(), other.conductor());
        let g = UnitGroup::new(m);
        self.subgroup_in(&g).is_subgroup_of(&other.subgroup_in(&g))
    }

    pub fn compositum(&self, other: &AbelianField) -> AbelianField {
        let g = UnitGroup::new(lcm(self.conductor(), other.conductor()));
        Self::from_subgroup(self.subgroup_in(&g).intersect(&other.subgroup_in(&g)))
    }

    pub fn intersection(&self, other: &AbelianField) -> AbelianField {
        let g = UnitGroup::new(lcm(self.conductor(), other.conductor()));
        Self::from_subgroup(self.subgroup_in(&g).join(&other.subgroup_in(&g)))
    }

    /// Whether complex conjugation fixes the field.
    pub fn is_real(&self) -> bool {
        let n = self.conductor();
        n <= 2 || self.h.contains(n - 1)
    }

    pub fn contains_i(&self) -> bool {
        self.contains(&AbelianField::cyclotomic(4))
    }

    /// `v_p` of the number of roots of unity in the field.
    pub fn s_p(&self, p: u64) -> u32 {
        let n = self.conductor();
        let mut r: u32 = if p == 2 { 1 } else { 0 };
        loop {
            let next = p.pow(r + 1);
            // mu_{p^r} inside K forces p^r | n once p^r > 2
            if next > n * p {
                return r;
            }
            if !self.contains(&AbelianField::cyclotomic(next)) {
                return r;
            }
            r += 1;
        }
    }

    /// `K ∩ k(mu_{p^inf})` for a subfield `k` of `K`.
    pub fn cyclotomic_part(&self, base: &AbelianField, p: u64) -> AbelianField {
        let top = arith::valuation(lcm(self.conductor(), base.conductor()), p) + 2;
        let mut t = base.clone();
        for a in 1..=top {
            let layer = base.compositum(&AbelianField::cyclotomic(p.pow(a)));
            t = self.intersection(&layer);
        }
        t
    }

    /// Identifies `K ∩ Q(mu_{2^inf})` in the subfield lattice of `Q(mu_{2^inf})`.
    pub fn two_tilde(&self) -> TwoTilde {
        let a = arith::valuation(self.conductor(), 2).max(1) + 2;
        let t = self.intersection(&AbelianField::cyclotomic(1 << a));
        let c = arith::valuation(t.conductor(), 2);
        if t.conductor() == 1 {
            return TwoTilde::Q;
        }
        let order = t.h.order();
        if order == 1 {
            return TwoTilde::Zeta(c);
        }
        let m = t.conductor();
        assert_eq!(order, 2, "2-power cyclotomic subfields have H of order <= 2");
        if t.h.contains(m - 1) {
            TwoTilde::Eta(c)
        } else {
            TwoTilde::IEta(c)
        }
    }

    /// Unique field for the given canonical string, see [`parse_field`].
    pub fn parse(text: &str) -> Result<Self> {
        parse_field(text)
    }
}

/// Subfields of `Q(mu_{2^inf})`: `Q`, `Q(zeta_{2^s})` (`s >= 2`, `s = 2` is
/// `Q(i)`), `Q(eta_{2^s})` and `Q(i eta_{2^s})` (`s >= 3`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwoTilde {
    Q,
    Zeta(u32),
    Eta(u32),
    IEta(u32),
}

impl TwoTilde {
    /// `s` with `k~ = Q(eta_{2^s})`; `Q` counts as `eta_4`.
    pub fn eta_index(self) -> Option<u32> {
        match self {
            TwoTilde::Q => Some(2),
            TwoTilde::Eta(s) => Some(s),
            _ => None,
        }
    }

    pub fn label(self) -> String {
        match self {
            TwoTilde::Q => "Q".into(),
            TwoTilde::Zeta(s) => format!("Q(zeta_{})", 1u64 << s),
            TwoTilde::Eta(s) => format!("Q(eta_{})", 1u64 << s),
            TwoTilde::IEta(s) => format!("Q(i*eta_{})", 1u64 << s),
        }
    }
}

fn squarefree(n: u64) -> bool {
    arith::factorize(n).iter().all(|&(_, e)| e == 1)
}

/// Kronecker symbol `(a / n)` for `n > 0`.
pub fn kronecker(a: i64, n: u64) -> i32 {
    let mut n = n;
    let mut res = 1i32;
    let mut a = a as i128;
    while n % 2 == 0 {
        n /= 2;
        match a.rem_euclid(8) {
            1 | 7 => {}
            3 | 5 => res = -res,
            _ => return 0,
        }
    }
    // Jacobi symbol for odd n
    let mut m = n as i128;
    a = a.rem_euclid(m);
    while a != 0 {
        while a % 2 == 0 {
            a /= 2;
            if matches!(m % 8, 3 | 5) {
                res = -res;
            }
        }
        std::mem::swap(&mut a, &mut m);
        if a % 4 == 3 && m % 4 == 3 {
            res = -res;
        }
        a %= m;
    }
    if m == 1 {
        res
    } else {
        0
    }
}

/// Surjection `(Z/n)^* -> Z/d`, given by the images of the unit-group basis.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct DirichletCharacter {
    n: u64,
    d: u64,
    images: Vec<u64>,
}

impl fmt::Debug for DirichletCharacter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for DirichletCharacter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let imgs: Vec<String> = self.images.iter().map(|x| x.to_string()).collect();
        write!(f, "chi:n={};d={};img=[{}]", self.n, self.d, imgs.join(","))
    }
}

impl DirichletCharacter {
    /// Validates the images and normalizes `d` to the actual order.
    pub fn new(n: u64, d: u64, images: &[i64]) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::invalid("modulus and order must be positive"));
        }
        let g = UnitGroup::new(n);
        if images.len() != g.rank() {
            return Err(Error::invalid(format!("expected {} images for modulus {n}, got {}", g.rank(), images.len())));
        }
        let imgs: Vec<u64> = images.iter().map(|&x| arith::normalize(x, d)).collect();
        for (&img, &(gen, ord)) in imgs.iter().zip(g.basis()) {
            if (img as u128 * ord as u128) % d as u128 != 0 {
                return Err(Error::invalid(format!(
                    "image {img} of generator {gen} (order {ord}) is not killed by {ord} in Z/{d}"
                )));
            }
        }
        let common = imgs.iter().fold(d, |acc, &x| gcd(acc, x));
        let d2 = d / common;
        let images = imgs.iter().map(|&x| x / common).collect();
        Ok(DirichletCharacter { n, d: d2, images })
    }

    pub fn trivial() -> Self {
        DirichletCharacter { n: 1, d: 1, images: vec![] }
    }

    pub fn modulus(&self) -> u64 {
        self.n
    }

    pub fn order(&self) -> u64 {
        self.d
    }

    pub fn images(&self) -> &[u64] {
        &self.images
    }

    pub fn value(&self, x: u64) -> u64 {
        let g = UnitGroup::new(self.n);
        self.value_in(&g, x)
    }

    fn value_in(&self, g: &UnitGroup, x: u64) -> u64 {
        let e = g.exponents(x % self.n);
        let mut acc: u128 = 0;
        for (&ei, &img) in e.iter().zip(&self.images) {
            acc += ei as u128 * img as u128;
        }
        (acc % self.d as u128) as u64
    }

    pub fn kernel(&self) -> UnitSubgroup {
        let g = UnitGroup::new(self.n);
        let images: Vec<Vec<i64>> = self.images.iter().map(|&x| vec![x as i64]).collect();
        let l = Lattice::kernel_of_map(&g.orders(), &images, &[self.d as i64]);
        UnitSubgroup::from_lattice(&g, l)
    }

    pub fn field(&self) -> AbelianField {
        AbelianField::from_subgroup(self.kernel())
    }

    /// Same character viewed modulo a multiple `m` of the modulus.
    pub fn lift(&self, m: u64) -> DirichletCharacter {
        assert_eq!(m % self.n, 0);
        let small = UnitGroup::new(self.n);
        let big = UnitGroup::new(m);
        let images = big.basis().iter().map(|&(r, _)| self.value_in(&small, r % self.n)).collect();
        DirichletCharacter { n: m, d: self.d, images }
    }

    pub fn mul(&self, other: &DirichletCharacter) -> DirichletCharacter {
        let m = lcm(self.n, other.n);
        let a = self.lift(m);
        let b = other.lift(m);
        let d = lcm(a.d, b.d);
        let images: Vec<i64> =
            a.images.iter().zip(&b.images).map(|(&x, &y)| ((x * (d / a.d) + y * (d / b.d)) % d) as i64).collect();
        DirichletCharacter::new(m, d, &images).expect("product of characters").reduced()
    }

    pub fn pow(&self, e: u64) -> DirichletCharacter {
        let images: Vec<i64> = self.images.iter().map(|&x| ((x as u128 * e as u128) % self.d as u128) as i64).collect();
        DirichletCharacter::new(self.n, self.d, &images).expect("power of a character").reduced()
    }

    /// p-primary component, of order `p^{v_p(d)}`.
    pub fn p_part(&self, p: u64) -> DirichletCharacter {
        let pv = p.pow(arith::valuation(self.d, p));
        let images: Vec<i64> = self.images.iter().map(|&x| (x % pv) as i64).collect();
        DirichletCharacter::new(self.n, pv, &images).expect("p-part").reduced()
    }

    /// The same character at its conductor.
    pub fn reduced(&self) -> DirichletCharacter {
        let f = self.field().conductor();
        if f == self.n {
            return self.clone();
        }
        let g = UnitGroup::new(f);
        let big = UnitGroup::new(self.n);
        let images: Vec<i64> =
            g.basis().iter().map(|&(r, _)| self.value_in(&big, big.lift_residue(r, f)) as i64).collect();
        DirichletCharacter::new(f, self.d, &images).expect("reduction to conductor")
    }

    /// A character whose kernel defines the given cyclic field.
    pub fn of_cyclic_field(k: &AbelianField) -> Result<Self> {
        let q = k.subgroup().quotient();
        if !q.is_cyclic() {
            return Err(Error::NotCyclic(q.factors().to_vec()));
        }
        let n = k.conductor();
        let g = UnitGroup::new(n);
        if q.factors().is_empty() {
            return Ok(DirichletCharacter { n, d: 1, images: vec![0; g.rank()] });
        }
        let d = q.factors()[0];
        let images: Vec<i64> = g.basis().iter().map(|&(r, _)| q.coords(r)[0] as i64).collect();
        DirichletCharacter::new(n, d, &images)
    }

    /// Every character modulo `n`, the trivial one first.
    pub fn all_of_modulus(n: u64) -> Vec<DirichletCharacter> {
        let g = UnitGroup::new(n.max(1));
        let d = g.exponent();
        let mut out = vec![vec![]];
        for &(_, ord) in g.basis() {
            let step = (d / ord) as i64;
            out = out
                .into_iter()
                .flat_map(|v: Vec<i64>| {
                    (0..ord as i64).map(move |k| {
                        let mut w = v.clone();
                        w.push(k * step);
                        w
                    })
                })
                .collect();
        }
        out.iter().map(|imgs| DirichletCharacter::new(n.max(1), d, imgs).expect("valid images")).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if let Some(body) = t.strip_prefix("chi:") {
            let kv = key_values(body)?;
            let n: u64 = parse_num(kv.get("n").ok_or_else(|| Error::invalid("chi: missing n"))?)?;
            let g = UnitGroup::new(n.max(1));
            let d: u64 = match kv.get("d") {
                Some(v) => parse_num(v)?,
                None => g.exponent(),
            };
            let img = parse_list(kv.get("img").map(String::as_str).unwrap_or("[]"))?;
            return DirichletCharacter::new(n, d, &img);
        }
        Self::of_cyclic_field(&parse_field(t)?)
    }
}

fn key_values(body: &str) -> Result<std::collections::BTreeMap<String, String>> {
    let mut out = std::collections::BTreeMap::new();
    for part in body.split(';').filter(|s| !s.trim().is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| Error::invalid(format!("expected key=value, got '{part}'")))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.trim().parse().map_err(|_| Error::invalid(format!("bad number '{s}'")))
}

fn parse_list(s: &str) -> Result<Vec<i64>> {
    let inner = s
        .trim()
        .strip_prefix('[')
        .and_then(|x| x.strip_suffix(']'))
        .ok_or_else(|| Error::invalid(format!("expected [..] list, got '{s}'")))?;
    inner.split(',').filter(|x| !x.trim().is_empty()).map(parse_num).collect()
}

/// Parses `Q`, `sqrt:<D>`, `mu:n=<n>[;H=[..]]`, `chi:n=<n>[;d=<d>];img=[..]`,
/// or a compositum `A*B` of such specs.
pub fn parse_field(text: &str) -> Result<AbelianField> {
    let t = text.trim();
    if t.contains('*') {
        let mut acc = AbelianField::rationals();
        for part in t.split('*') {
            acc = acc.compositum(&parse_field(part)?);
        }
        return Ok(acc);
    }
    if t == "Q" {
        return Ok(AbelianField::rationals());
    }
    if let Some(d) = t.strip_prefix("sqrt:") {
        return AbelianField::quadratic(parse_num(d)?);
    }
    if let Some(body) = t.strip_prefix("mu:") {
        let kv = key_values(body)?;
        let n: u64 = parse_num(kv.get("n").ok_or_else(|| Error::invalid("mu: missing n"))?)?;
        let h = parse_list(kv.get("H").map(String::as_str).unwrap_or("[]"))?;
        return AbelianField::new(n, &h);
    }
    if t.starts_with("chi:") {
        return Ok(DirichletCharacter::parse(t)?.field());
    }
    Err(Error::invalid(format!("unrecognized field spec '{t}'")))
}

/// `K/k` with cyclic Galois group `H_k / H_K`, both lifted to the conductor of `K`.
#[derive(Clone, Debug)]
pub struct CyclicExtension {
    base: AbelianField,
    top: AbelianField,
    group: Arc<UnitGroup>,
    h_base: UnitSubgroup,
    h_top: UnitSubgroup,
    degree: u64,
    generator: u64,
}

impl CyclicExtension {
    pub fn new(base: &AbelianField, top: &AbelianField) -> Result<Self> {
        if !top.contains(base) {
            return Err(Error::invalid(format!("{base} is not a subfield of {top}")));
        }
        let n = top.conductor();
        let group = UnitGroup::new(n);
        let h_base = base.subgroup_in(&group);
        let h_top = top.subgroup().clone();
        let q = h_base.quotient_by(&h_top);
        if !q.is_cyclic() {
            return Err(Error::NotCyclic(q.factors().to_vec()));
        }
        let degree = q.order();
        let generator = if degree == 1 {
            1 % n.max(1)
        } else {
            (1..n)
                .find(|&x| gcd(x, n) == 1 && h_base.contains(x) && q.element_order(x) == degree)
                .expect("cyclic quotient has a generator")
        };
        Ok(CyclicExtension { base: base.clone(), top: top.clone(), group, h_base, h_top, degree, generator })
    }

    pub fn over_q(top: &AbelianField) -> Result<Self> {
        Self::new(&AbelianField::rationals(), top)
    }

    pub fn of_character(chi: &DirichletCharacter) -> Self {
        Self::over_q(&chi.field()).expect("character fields are cyclic")
    }

    pub fn base(&self) -> &AbelianField {
        &self.base
    }

    pub fn top(&self) -> &AbelianField {
        &self.top
    }

    pub fn modulus(&self) -> u64 {
        self.group.modulus()
    }

    pub fn group(&self) -> &Arc<UnitGroup> {
        &self.group
    }

    pub fn h_base(&self) -> &UnitSubgroup {
        &self.h_base
    }

    pub fn h_top(&self) -> &UnitSubgroup {
        &self.h_top
    }

    pub fn degree(&self) -> u64 {
        self.degree
    }

    /// Smallest residue whose class generates `Gal(K/k)`.
    pub fn generator(&self) -> u64 {
        self.generator
    }

    pub fn is_trivial(&self) -> bool {
        self.degree == 1
    }

    /// The subextension of maximal `p`-power degree.
    pub fn p_part(&self, p: u64) -> CyclicExtension {
        let pv = p.pow(arith::valuation(self.degree, p));
        if pv == self.degree {
            return self.clone();
        }
        let g = arith::pow_mod(self.generator, pv, self.modulus());
        let h = self.h_top.join(&UnitSubgroup::generated(&self.group, &[g as i64]).unwrap());
        let top = AbelianField::from_subgroup(h);
        CyclicExtension::new(&self.base, &top).expect("subextension of a cyclic extension")
    }
}
