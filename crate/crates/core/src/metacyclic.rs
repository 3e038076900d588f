//! Metacyclic 2-groups `E_{s,t}`, `Gamma_{s,t}`, `Delta_{s,t}` in normal form
//! `a^i c^j`, the kernels `A_l`, and first cohomology of bicyclic groups.

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use serde::Serialize;

use crate::arith::gcd;
use crate::error::{Error, Result};
use crate::lattice::Lattice;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Family {
    /// `c^{2^t} = a^{2^s}`, `a^c = a^{-1}`.
    E,
    /// `c^{2^t} = a^{2^s}`, `a^c = a^{-1+2^s}`.
    ETwisted,
    /// `c^{2^t} = 1`, `a^c = a^{-1}`.
    Gamma,
    /// `c^{2^t} = 1`, `a^c = a^{-1+2^s}`.
    Delta,
}

pub type Elem = (u64, u64);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MetacyclicGroup {
    pub family: Family,
    pub s: u32,
    pub t: u32,
    eps: u64,
    ma: u64,
    mc: u64,
    carry: bool,
}

impl MetacyclicGroup {
    pub fn new(family: Family, s: u32, t: u32) -> Result<Self> {
        if s < 2 || t < 2 || s + t > 40 {
            return Err(Error::invalid(format!("need 2 <= s, t and s + t <= 40, got s = {s}, t = {t}")));
        }
        let ma = 1u64 << (s + 1);
        let eps = match family {
            Family::E | Family::Gamma => ma - 1,
            Family::ETwisted | Family::Delta => (1u64 << s) - 1,
        };
        let carry = matches!(family, Family::E | Family::ETwisted);
        Ok(MetacyclicGroup { family, s, t, eps, ma, mc: 1 << t, carry })
    }

    pub fn order(&self) -> u64 {
        self.ma * self.mc
    }

    pub fn identity(&self) -> Elem {
        (0, 0)
    }

    pub fn a(&self) -> Elem {
        (1, 0)
    }

    pub fn c(&self) -> Elem {
        (0, 1)
    }

    fn eps_pow(&self, j: u64) -> u64 {
        if j % 2 == 0 {
            1
        } else {
            self.eps
        }
    }

    pub fn mul(&self, x: Elem, y: Elem) -> Elem {
        let mut i = x.0 + self.eps_pow(x.1) * y.0;
        let mut j = x.1 + y.1;
        if j >= self.mc {
            j -= self.mc;
            if self.carry {
                i += 1 << self.s;
            }
        }
        (i % self.ma, j)
    }

    pub fn inv(&self, x: Elem) -> Elem {
        if x.1 == 0 {
            return ((self.ma - x.0) % self.ma, 0);
        }
        let j = self.mc - x.1;
        // (i, j0)(i', mc - j0) = (i + eps^j0 i' + carry, 0)
        let carry = if self.carry { 1 << self.s } else { 0 };
        let rhs = (self.ma * 2 - (x.0 + carry) % self.ma) % self.ma;
        ((self.eps_pow(x.1) * rhs) % self.ma, j)
    }

    pub fn pow(&self, x: Elem, mut e: u64) -> Elem {
        let mut base = x;
        let mut out = self.identity();
        while e > 0 {
            if e & 1 == 1 {
                out = self.mul(out, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        out
    }

    pub fn element_order(&self, x: Elem) -> u64 {
        let mut o = 1;
        let mut y = x;
        while y != self.identity() {
            y = self.mul(y, x);
            o += 1;
        }
        o
    }

    /// `x^y = y^{-1} x y`.
    pub fn conj(&self, x: Elem, y: Elem) -> Elem {
        self.mul(self.mul(self.inv(y), x), y)
    }

    pub fn elements(&self) -> Vec<Elem> {
        (0..self.mc).flat_map(|j| (0..self.ma).map(move |i| (i, j))).collect()
    }

    /// Subgroup generated by `gens`, as a sorted element list.
    pub fn subgroup(&self, gens: &[Elem]) -> Vec<Elem> {
        let mut seen: BTreeSet<Elem> = BTreeSet::new();
        seen.insert(self.identity());
        let mut frontier = vec![self.identity()];
        while let Some(x) = frontier.pop() {
            for &g in gens {
                let y = self.mul(x, g);
                if seen.insert(y) {
                    frontier.push(y);
                }
            }
        }
        seen.into_iter().collect()
    }

    pub fn center(&self) -> Vec<Elem> {
        let gens = [self.a(), self.c()];
        let mut z: Vec<Elem> =
            self.elements().into_iter().filter(|&x| gens.iter().all(|&g| self.mul(x, g) == self.mul(g, x))).collect();
        z.sort_unstable();
        z
    }

    pub fn commutator_subgroup(&self) -> Vec<Elem> {
        let els = self.elements();
        let mut comms = BTreeSet::new();
        for &x in &els {
            for &y in &els {
                comms.insert(self.mul(self.mul(self.inv(x), self.inv(y)), self.mul(x, y)));
            }
        }
        self.subgroup(&comms.into_iter().collect::<Vec<_>>())
    }

    /// For a 2-group: the elements of order at most 2 in the center.
    pub fn socle(&self) -> Vec<Elem> {
        self.center().into_iter().filter(|&x| self.mul(x, x) == self.identity()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), pass, detail: detail.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StructureReport {
    pub s: u32,
    pub t: u32,
    pub order: u64,
    pub center_order: usize,
    pub commutator_order: usize,
    pub socle_order: usize,
    pub checks: Vec<Check>,
}

impl StructureReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Order, center `<c^2>`, commutator subgroup `<a^2>`, socle `<a^{2^s}>` of `E_{s,t}`.
pub fn structure_invariants(s: u32, t: u32) -> Result<StructureReport> {
    let g = MetacyclicGroup::new(Family::E, s, t)?;
    let center = g.center();
    let comm = g.commutator_subgroup();
    let socle = g.socle();
    let c2 = g.subgroup(&[g.pow(g.c(), 2)]);
    let a2 = g.subgroup(&[g.pow(g.a(), 2)]);
    let as_ = g.subgroup(&[g.pow(g.a(), 1 << s)]);
    let checks = vec![
        Check::new("order", g.elements().len() as u64 == 1 << (s + t + 1), format!("{}", g.order())),
        Check::new("nonabelian", g.mul(g.a(), g.c()) != g.mul(g.c(), g.a()), ""),
        Check::new("center = <c^2>", center == c2, format!("|Z| = {}", center.len())),
        Check::new("commutator = <a^2>", comm == a2, format!("|G'| = {}", comm.len())),
        Check::new("socle = <a^(2^s)>", socle == as_, format!("|soc| = {}", socle.len())),
    ];
    Ok(StructureReport {
        s,
        t,
        order: g.order(),
        center_order: center.len(),
        commutator_order: comm.len(),
        socle_order: socle.len(),
        checks,
    })
}

/// Relations and associativity on the given triples.
pub fn check_group_laws(g: &MetacyclicGroup, triples: &[(Elem, Elem, Elem)]) -> Vec<Check> {
    let assoc = triples.iter().all(|&(x, y, z)| g.mul(g.mul(x, y), z) == g.mul(x, g.mul(y, z)));
    let inverses =
        triples.iter().all(|&(x, _, _)| g.mul(x, g.inv(x)) == g.identity() && g.mul(g.inv(x), x) == g.identity());
    let e = g.identity();
    let ident = triples.iter().all(|&(x, _, _)| g.mul(e, x) == x && g.mul(x, e) == x);
    let a = g.a();
    let c = g.c();
    let top = if g.carry { g.pow(a, 1 << g.s) } else { e };
    let conj = g.pow(a, g.eps);
    vec![
        Check::new("associativity", assoc, ""),
        Check::new("inverses", inverses, ""),
        Check::new("identity", ident, ""),
        Check::new("a^(2^(s+1)) = 1", g.pow(a, g.ma) == e && g.element_order(a) == g.ma, ""),
        Check::new("c^(2^t)", g.pow(c, g.mc) == top, ""),
        Check::new("a^c", g.conj(a, c) == conj, ""),
    ]
}

/// Images of `a` and `c` for a candidate homomorphism between normal-form groups.
#[derive(Clone, Copy, Debug)]
pub struct GenMap {
    pub a: Elem,
    pub c: Elem,
}

fn map_elem(dst: &MetacyclicGroup, m: GenMap, x: Elem) -> Elem {
    dst.mul(dst.pow(m.a, x.0), dst.pow(m.c, x.1))
}

/// Whether `a -> A, c -> C` respects the relations of `src` in `dst` and is bijective.
pub fn is_isomorphism(src: &MetacyclicGroup, dst: &MetacyclicGroup, m: GenMap) -> bool {
    let e = dst.identity();
    let top = if src.carry { dst.pow(m.a, 1 << src.s) } else { e };
    let rel = dst.pow(m.a, src.ma) == e && dst.pow(m.c, src.mc) == top && dst.conj(m.a, m.c) == dst.pow(m.a, src.eps);
    if !rel || src.order() != dst.order() {
        return false;
    }
    let image: BTreeSet<Elem> = src.elements().into_iter().map(|x| map_elem(dst, m, x)).collect();
    image.len() as u64 == dst.order()
}

/// Checks `a -> a c^{2^{t-1}}, c -> c` from the `a^c = a^{-1}` presentation to
/// the `a^c = a^{-1+2^s}` one, and that it respects `<a, c^{2^l}>` and the
/// quotient onto `C_l` for each `1 <= l < t`.
pub fn presentation_isomorphism_check(s: u32, t: u32) -> Result<Vec<Check>> {
    let g = MetacyclicGroup::new(Family::E, s, t)?;
    let h = MetacyclicGroup::new(Family::ETwisted, s, t)?;
    let m = GenMap { a: h.mul(h.a(), h.pow(h.c(), 1 << (t - 1))), c: h.c() };
    presentation_checks(&g, &h, m)
}

pub fn presentation_checks(g: &MetacyclicGroup, h: &MetacyclicGroup, m: GenMap) -> Result<Vec<Check>> {
    let mut out = vec![Check::new("isomorphism", is_isomorphism(g, h, m), "")];
    let hom = (0..64u64).all(|k| {
        let x = (k * 7 % g.ma, k * 3 % g.mc);
        let y = (k * 5 % g.ma, k * 11 % g.mc);
        map_elem(h, m, g.mul(x, y)) == h.mul(map_elem(h, m, x), map_elem(h, m, y))
    });
    out.push(Check::new("homomorphism on samples", hom, ""));
    for l in 1..g.t {
        let kg = g.subgroup(&[g.a(), g.pow(g.c(), 1 << l)]);
        let kh: BTreeSet<Elem> = h.subgroup(&[h.a(), h.pow(h.c(), 1 << l)]).into_iter().collect();
        let image: BTreeSet<Elem> = kg.iter().map(|&x| map_elem(h, m, x)).collect();
        let quotient = g.elements().iter().all(|&x| map_elem(h, m, x).1 % (1 << l) == x.1 % (1 << l));
        out.push(Check::new(format!("kernel preserved, l = {l}"), image == kh, ""));
        out.push(Check::new(format!("quotient commutes, l = {l}"), quotient, ""));
    }
    Ok(out)
}

/// Endomorphism of `Z/d_1 + ... + Z/d_k`, row `i` the image of `e_i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Endo(pub Vec<Vec<u64>>);

/// A finite abelian group `Z/d_1 + ... + Z/d_k` with endomorphisms acting on it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GModule {
    pub orders: Vec<u64>,
    pub actions: Vec<Endo>,
}

impl GModule {
    pub fn new(orders: Vec<u64>, actions: Vec<Endo>) -> Result<Self> {
        if orders.iter().any(|&d| d == 0) {
            return Err(Error::invalid("orders must be positive".to_string()));
        }
        let m = GModule { orders, actions: Vec::new() };
        for a in &actions {
            if !m.is_endo(a) {
                return Err(Error::invalid(format!("{a:?} is not an endomorphism")));
            }
        }
        Ok(GModule { actions, ..m })
    }

    pub fn rank(&self) -> usize {
        self.orders.len()
    }

    pub fn size(&self) -> u64 {
        self.orders.iter().product()
    }

    fn is_endo(&self, e: &Endo) -> bool {
        e.0.len() == self.rank()
            && e.0.iter().enumerate().all(|(i, row)| {
                row.len() == self.rank()
                    && row
                        .iter()
                        .zip(&self.orders)
                        .all(|(&x, &d)| (x as u128 * self.orders[i] as u128) % d as u128 == 0)
            })
    }

    pub fn identity(&self) -> Endo {
        Endo(
            (0..self.rank())
                .map(|i| (0..self.rank()).map(|j| if i == j { 1 % self.orders[j] } else { 0 }).collect())
                .collect(),
        )
    }

    pub fn apply(&self, e: &Endo, v: &[u64]) -> Vec<u64> {
        let mut out = vec![0u64; self.rank()];
        for (i, &vi) in v.iter().enumerate() {
            for j in 0..self.rank() {
                out[j] = (out[j] + vi * e.0[i][j]) % self.orders[j];
            }
        }
        out
    }

    pub fn compose(&self, f: &Endo, g: &Endo) -> Endo {
        // first g, then f
        Endo(g.0.iter().map(|row| self.apply(f, row)).collect())
    }

    pub fn add_endo(&self, f: &Endo, g: &Endo) -> Endo {
        Endo(
            f.0.iter()
                .zip(&g.0)
                .map(|(r, s)| r.iter().zip(s).zip(&self.orders).map(|((&x, &y), &d)| (x + y) % d).collect())
                .collect(),
        )
    }

    pub fn neg_endo(&self, f: &Endo) -> Endo {
        Endo(f.0.iter().map(|r| r.iter().zip(&self.orders).map(|(&x, &d)| (d - x % d) % d).collect()).collect())
    }

    pub fn minus_one(&self, f: &Endo) -> Endo {
        self.add_endo(f, &self.neg_endo(&self.identity()))
    }

    pub fn pow_endo(&self, f: &Endo, e: u64) -> Endo {
        let mut out = self.identity();
        for _ in 0..e {
            out = self.compose(f, &out);
        }
        out
    }

    /// `1 + f + ... + f^{o-1}`.
    pub fn norm_endo(&self, f: &Endo, o: u64) -> Endo {
        let mut acc = self.identity();
        let mut p = self.identity();
        for _ in 1..o {
            p = self.compose(f, &p);
            acc = self.add_endo(&acc, &p);
        }
        acc
    }

    /// Order of an automorphism, if at most `cap`.
    pub fn endo_order(&self, f: &Endo, cap: u64) -> Option<u64> {
        let id = self.identity();
        let mut p = f.clone();
        for o in 1..=cap {
            if p == id {
                return Some(o);
            }
            p = self.compose(f, &p);
        }
        None
    }

    fn encode(&self, v: &[u64]) -> usize {
        v.iter().zip(&self.orders).rev().fold(0usize, |acc, (&x, &d)| acc * d as usize + x as usize)
    }

    fn decode(&self, mut idx: usize) -> Vec<u64> {
        self.orders
            .iter()
            .map(|&d| {
                let x = (idx % d as usize) as u64;
                idx /= d as usize;
                x
            })
            .collect()
    }

    fn elements(&self) -> impl Iterator<Item = Vec<u64>> + '_ {
        (0..self.size() as usize).map(|i| self.decode(i))
    }

    fn add(&self, x: &[u64], y: &[u64]) -> Vec<u64> {
        x.iter().zip(y).zip(&self.orders).map(|((&a, &b), &d)| (a + b) % d).collect()
    }

    fn diag(&self) -> Vec<i64> {
        self.orders.iter().map(|&d| d as i64).collect()
    }

    fn rows(e: &Endo) -> Vec<Vec<i64>> {
        e.0.iter().map(|r| r.iter().map(|&x| x as i64).collect()).collect()
    }

    /// Image `f(M)` as a lattice.
    pub fn image(&self, f: &Endo) -> Lattice {
        Lattice::generated(&self.diag(), &Self::rows(f))
    }

    /// `f(L)` for a subgroup `L`.
    pub fn image_of(&self, f: &Endo, l: &Lattice) -> Lattice {
        let imgs: Vec<Vec<i64>> = l
            .rows()
            .iter()
            .map(|r| {
                let v: Vec<u64> = r.iter().zip(&self.orders).map(|(&x, &d)| x.rem_euclid(d as i64) as u64).collect();
                self.apply(f, &v).into_iter().map(|x| x as i64).collect()
            })
            .collect();
        Lattice::generated(&self.diag(), &imgs)
    }

    pub fn kernel(&self, f: &Endo) -> Lattice {
        Lattice::kernel_of_map(&self.diag(), &Self::rows(f), &self.diag())
    }

    fn lattice_of(&self, v: &[u64]) -> Lattice {
        Lattice::generated(&self.diag(), &[v.iter().map(|&x| x as i64).collect()])
    }
}

/// `G = <sigma> x <tau>` (abstract orders) acting on `M` through two commuting automorphisms.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Bicyclic {
    pub module: GModule,
    pub sigma: Endo,
    pub tau: Endo,
    pub ord_sigma: u64,
    pub ord_tau: u64,
}

pub const H1_GUARD: u64 = 10_000_000;

impl Bicyclic {
    pub fn new(orders: Vec<u64>, sigma: Endo, tau: Endo, ord_sigma: u64, ord_tau: u64) -> Result<Self> {
        let module = GModule::new(orders, vec![sigma.clone(), tau.clone()])?;
        let id = module.identity();
        if module.pow_endo(&sigma, ord_sigma) != id || module.pow_endo(&tau, ord_tau) != id {
            return Err(Error::invalid("generator orders do not kill the action".to_string()));
        }
        if module.compose(&sigma, &tau) != module.compose(&tau, &sigma) {
            return Err(Error::invalid("actions do not commute".to_string()));
        }
        Ok(Bicyclic { module, sigma, tau, ord_sigma, ord_tau })
    }

    pub fn group_order(&self) -> u64 {
        self.ord_sigma * self.ord_tau
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct H1Report {
    pub cocycles: u64,
    pub coboundaries: u64,
    pub h1_order: u64,
    pub h1_factors: Vec<u64>,
    /// Kernel of restriction to `<sigma>`, `<tau>`, `<sigma tau>`.
    pub kernel_order: u64,
    pub kernel_factors: Vec<u64>,
}

/// Cocycles `(x, y) = (l_sigma, l_tau)`: `N_sigma x = 0`, `N_tau y = 0`,
/// `(sigma - 1) y = (tau - 1) x`. Found by bucketing `y` on `(sigma - 1) y`.
fn cocycles(b: &Bicyclic) -> Vec<(Vec<u64>, Vec<u64>)> {
    let m = &b.module;
    let ns = m.norm_endo(&b.sigma, b.ord_sigma);
    let nt = m.norm_endo(&b.tau, b.ord_tau);
    let s1 = m.minus_one(&b.sigma);
    let t1 = m.minus_one(&b.tau);
    let zero = vec![0u64; m.rank()];
    let mut buckets: HashMap<Vec<u64>, Vec<Vec<u64>>> = HashMap::new();
    for y in m.elements() {
        if m.apply(&nt, &y) == zero {
            buckets.entry(m.apply(&s1, &y)).or_default().push(y);
        }
    }
    let mut out = Vec::new();
    for x in m.elements() {
        if m.apply(&ns, &x) != zero {
            continue;
        }
        if let Some(ys) = buckets.get(&m.apply(&t1, &x)) {
            for y in ys {
                out.push((x.clone(), y.clone()));
            }
        }
    }
    out
}

fn membership(m: &GModule, f: &Endo) -> Vec<bool> {
    let mut table = vec![false; m.size() as usize];
    for v in m.elements() {
        table[m.encode(&m.apply(f, &v))] = true;
    }
    table
}

fn pair_structure(m: &GModule, pairs: &[(Vec<u64>, Vec<u64>)], sub: &Lattice) -> (Lattice, Vec<u64>) {
    let mut diag = m.diag();
    diag.extend(m.diag());
    let vecs: Vec<Vec<i64>> =
        pairs.iter().map(|(x, y)| x.iter().chain(y.iter()).map(|&v| v as i64).collect()).collect();
    let l = Lattice::generated(&diag, &vecs);
    let q = l.quotient(sub);
    (l, q.factors.clone())
}

pub fn h1_bruteforce(b: &Bicyclic) -> Result<H1Report> {
    let m = &b.module;
    let size = m.size();
    if size.saturating_mul(size) > H1_GUARD || b.group_order().saturating_mul(size) > H1_GUARD {
        return Err(Error::Guard(format!("module of order {size} is too large for enumeration")));
    }
    let z = cocycles(b);
    let s1 = m.minus_one(&b.sigma);
    let t1 = m.minus_one(&b.tau);
    let st1 = m.minus_one(&m.compose(&b.sigma, &b.tau));
    let in_s = membership(m, &s1);
    let in_t = membership(m, &t1);
    let in_st = membership(m, &st1);
    let kernel: Vec<(Vec<u64>, Vec<u64>)> = z
        .iter()
        .filter(|(x, y)| in_s[m.encode(x)] && in_t[m.encode(y)] && in_st[m.encode(&m.add(x, &m.apply(&b.sigma, y)))])
        .cloned()
        .collect();
    let cob: BTreeSet<(Vec<u64>, Vec<u64>)> = m.elements().map(|v| (m.apply(&s1, &v), m.apply(&t1, &v))).collect();
    let cob: Vec<_> = cob.into_iter().collect();
    let mut diag = m.diag();
    diag.extend(m.diag());
    let vecs: Vec<Vec<i64>> = cob.iter().map(|(x, y)| x.iter().chain(y.iter()).map(|&v| v as i64).collect()).collect();
    let b_lat = Lattice::generated(&diag, &vecs);
    let (_, h1_factors) = pair_structure(m, &z, &b_lat);
    let (_, kernel_factors) = pair_structure(m, &kernel, &b_lat);
    let nb = cob.len() as u64;
    Ok(H1Report {
        cocycles: z.len() as u64,
        coboundaries: nb,
        h1_order: z.len() as u64 / nb,
        h1_factors,
        kernel_order: kernel.len() as u64 / nb,
        kernel_factors,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct QReport {
    pub order: u64,
    pub factors: Vec<u64>,
}

/// `(ker N_sigma ∩ M^tau ∩ (sigma-1)M ∩ (sigma tau-1)M) / (sigma-1)(M^tau)`.
pub fn h1_restriction_kernel_q(b: &Bicyclic) -> QReport {
    let m = &b.module;
    let s1 = m.minus_one(&b.sigma);
    let st1 = m.minus_one(&m.compose(&b.sigma, &b.tau));
    let m_tau = m.kernel(&m.minus_one(&b.tau));
    let num = m
        .kernel(&m.norm_endo(&b.sigma, b.ord_sigma))
        .intersect(&m_tau)
        .intersect(&m.image(&s1))
        .intersect(&m.image(&st1));
    let den = m.image_of(&s1, &m_tau);
    let q = num.quotient(&den);
    QReport { order: q.order(), factors: q.factors.clone() }
}

fn random_endo<R: Rng>(rng: &mut R, orders: &[u64]) -> Endo {
    Endo(
        orders
            .iter()
            .map(|&di| {
                orders
                    .iter()
                    .map(|&dj| {
                        let step = dj / gcd(di, dj);
                        (rng.gen_range(0..dj) * step) % dj
                    })
                    .collect()
            })
            .collect(),
    )
}

fn is_automorphism(m: &GModule, f: &Endo) -> bool {
    let zero = vec![0u64; m.rank()];
    m.elements().filter(|v| m.apply(f, v) == zero).count() == 1
}

/// A random bicyclic instance with `|G| |M| <= bound`.
pub fn random_bicyclic<R: Rng>(rng: &mut R, bound: u64) -> Bicyclic {
    const PRIMES: [u64; 6] = [2, 3, 4, 5, 8, 9];
    loop {
        let k = rng.gen_range(1..=3);
        let orders: Vec<u64> = (0..k).map(|_| PRIMES[rng.gen_range(0..PRIMES.len())]).collect();
        let size: u64 = orders.iter().product();
        if size > 600 {
            continue;
        }
        let m = GModule { orders: orders.clone(), actions: Vec::new() };
        let sigma = random_endo(rng, &orders);
        if !is_automorphism(&m, &sigma) {
            continue;
        }
        let Some(os) = m.endo_order(&sigma, 48) else { continue };
        let tau = match rng.gen_range(0..3) {
            0 => {
                let mut found = None;
                for _ in 0..60 {
                    let t = random_endo(rng, &orders);
                    if is_automorphism(&m, &t) && m.compose(&sigma, &t) == m.compose(&t, &sigma) {
                        found = Some(t);
                        break;
                    }
                }
                match found {
                    Some(t) => t,
                    None => continue,
                }
            }
            1 => m.identity(),
            _ => {
                let e = rng.gen_range(0..os);
                let l = orders.iter().fold(1, |a, &d| crate::arith::lcm(a, d));
                let u = loop {
                    let u = rng.gen_range(1..l.max(2));
                    if gcd(u, l) == 1 {
                        break u;
                    }
                };
                let scalar = Endo(
                    m.identity().0.iter().map(|r| r.iter().zip(&orders).map(|(&x, &d)| x * u % d).collect()).collect(),
                );
                m.compose(&scalar, &m.pow_endo(&sigma, e))
            }
        };
        let Some(ot) = m.endo_order(&tau, 48) else { continue };
        let os2 = os * rng.gen_range(1..=2);
        let ot2 = ot * rng.gen_range(1..=2);
        if os2 * ot2 * size > bound {
            continue;
        }
        if let Ok(b) = Bicyclic::new(orders, sigma, tau, os2, ot2) {
            return b;
        }
    }
}

/// Whether `H^1(U, M) -> prod_{w in U} H^1(<w>, M)` is injective for every
/// subgroup `U` of the group generated by the given commuting automorphisms.
/// Cyclic `U` pass trivially; `U` of rank above two is rejected.
pub fn ep_hypothesis_check(m: &GModule, gens: &[Endo]) -> Result<bool> {
    if m.size().saturating_mul(m.size()) > H1_GUARD * 10 {
        return Err(Error::Guard(format!("module of order {} is too large", m.size())));
    }
    let group = endo_closure(m, gens, 4096)?;
    let mut subgroups: BTreeSet<Vec<usize>> = BTreeSet::new();
    for i in 0..group.len() {
        for j in i..group.len() {
            let sub = endo_closure(m, &[group[i].clone(), group[j].clone()], 4096)?;
            let mut idx: Vec<usize> = sub.iter().map(|e| group.iter().position(|g| g == e).unwrap()).collect();
            idx.sort_unstable();
            subgroups.insert(idx);
        }
    }
    for sub in subgroups {
        let elems: Vec<Endo> = sub.iter().map(|&i| group[i].clone()).collect();
        let orders: Vec<u64> = elems.iter().map(|e| m.endo_order(e, 4096).unwrap()).collect();
        let n = elems.len() as u64;
        if orders.iter().any(|&o| o == n) {
            continue;
        }
        // split U = <u> x <v>
        let mut split = None;
        'outer: for (i, u) in elems.iter().enumerate() {
            for (j, v) in elems.iter().enumerate() {
                if orders[i] * orders[j] == n {
                    let span = endo_closure(m, &[u.clone(), v.clone()], 4096)?;
                    if span.len() as u64 == n {
                        split = Some((u.clone(), orders[i], v.clone(), orders[j]));
                        break 'outer;
                    }
                }
            }
        }
        let Some((u, ou, v, ov)) = split else {
            return Err(Error::invalid("subgroup of rank above two".to_string()));
        };
        let b = Bicyclic::new(m.orders.clone(), u, v, ou, ov)?;
        if !restriction_injective_all(&b)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Injectivity of restriction to every cyclic subgroup `<u^i v^j>`.
fn restriction_injective_all(b: &Bicyclic) -> Result<bool> {
    let m = &b.module;
    let z = cocycles(b);
    let s1 = m.minus_one(&b.sigma);
    let t1 = m.minus_one(&b.tau);
    let cob: BTreeSet<(Vec<u64>, Vec<u64>)> = m.elements().map(|v| (m.apply(&s1, &v), m.apply(&t1, &v))).collect();
    let mut tests = Vec::new();
    for i in 0..b.ord_sigma {
        for j in 0..b.ord_tau {
            let w = m.compose(&m.pow_endo(&b.sigma, i), &m.pow_endo(&b.tau, j));
            let ui = m.pow_endo(&b.sigma, i);
            tests.push((
                membership(m, &m.minus_one(&w)),
                m.norm_endo(&b.sigma, i.max(1)),
                i,
                ui,
                m.norm_endo(&b.tau, j.max(1)),
                j,
            ));
        }
    }
    let zero = vec![0u64; m.rank()];
    let kernel = z
        .iter()
        .filter(|(x, y)| {
            tests.iter().all(|(table, nsi, i, ui, ntj, j)| {
                // l_{u^i v^j} = (1 + ... + u^{i-1}) x + u^i (1 + ... + v^{j-1}) y
                let lx = if *i == 0 { zero.clone() } else { m.apply(nsi, x) };
                let ly = if *j == 0 { zero.clone() } else { m.apply(ui, &m.apply(ntj, y)) };
                table[m.encode(&m.add(&lx, &ly))]
            })
        })
        .count();
    Ok(kernel == cob.len())
}

fn endo_closure(m: &GModule, gens: &[Endo], cap: usize) -> Result<Vec<Endo>> {
    let mut seen = vec![m.identity()];
    let mut frontier = vec![m.identity()];
    while let Some(x) = frontier.pop() {
        for g in gens {
            let y = m.compose(g, &x);
            if !seen.contains(&y) {
                if seen.len() >= cap {
                    return Err(Error::Guard("acting group too large".to_string()));
                }
                seen.push(y.clone());
                frontier.push(y);
            }
        }
    }
    Ok(seen)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct KernelDecomposition {
    pub s: u32,
    pub t: u32,
    pub l: u32,
    /// `"t-l<=s"` or `"t-l>=s"`.
    pub case: String,
    pub generators: Vec<Elem>,
    pub orders: Vec<u64>,
    pub exponent: u64,
    /// Conjugation by `c` in the coordinates of the generators.
    pub action: Endo,
    pub checks: Vec<Check>,
}

/// Coordinates of the elements of `<x> x <y>`, if that product is direct and
/// equals the listed subgroup.
fn coordinates(g: &MetacyclicGroup, x: Elem, y: Elem, sub: &[Elem]) -> Option<HashMap<Elem, (u64, u64)>> {
    let ox = g.element_order(x);
    let oy = g.element_order(y);
    let mut map = HashMap::new();
    for i in 0..ox {
        for j in 0..oy {
            let e = g.mul(g.pow(x, i), g.pow(y, j));
            if map.insert(e, (i, j)).is_some() {
                return None;
            }
        }
    }
    (map.len() == sub.len() && sub.iter().all(|e| map.contains_key(e))).then_some(map)
}

/// The decompositions of `A_l = <a, c^{2^l}>` for `1 <= l < t`; on the
/// boundary `t - l = s` both are returned.
pub fn kernel_decomposition(s: u32, t: u32, l: u32) -> Result<Vec<KernelDecomposition>> {
    if l == 0 || l >= t {
        return Err(Error::invalid(format!("need 1 <= l < t, got l = {l}, t = {t}")));
    }
    let g = MetacyclicGroup::new(Family::E, s, t)?;
    let a = g.a();
    let c = g.c();
    let cl = g.pow(c, 1 << l);
    let al = g.subgroup(&[a, cl]);
    let mut out = Vec::new();
    let d = t - l;
    let mut cases = Vec::new();
    if d <= s {
        cases.push(("t-l<=s", a, g.mul(g.pow(a, 1 << (l + s - t)), cl), 1u64 << (s + 1)));
    }
    if d >= s {
        cases.push(("t-l>=s", cl, g.mul(a, g.pow(c, 1 << (t - s))), 1u64 << (t + 1 - l)));
    }
    for (case, x, y, exp) in cases {
        let orders = vec![g.element_order(x), g.element_order(y)];
        let coords = coordinates(&g, x, y, &al);
        let mut checks = vec![
            Check::new("|A_l| = |E| / 2^l", al.len() as u64 * (1 << l) == g.order(), format!("{}", al.len())),
            Check::new("direct product", coords.is_some(), format!("orders {orders:?}")),
            Check::new("abelian", g.mul(x, y) == g.mul(y, x), ""),
            Check::new("exponent", orders.iter().copied().max() == Some(exp), format!("{exp}")),
        ];
        let action = match &coords {
            Some(map) => {
                let img = |e: Elem| {
                    let (i, j) = map[&g.conj(e, c)];
                    vec![i, j]
                };
                Endo(vec![img(x), img(y)])
            }
            None => Endo(vec![vec![0, 0], vec![0, 0]]),
        };
        if coords.is_some() {
            let m = GModule::new(orders.clone(), vec![action.clone()]);
            checks.push(Check::new("action is an endomorphism", m.is_ok(), ""));
        }
        out.push(KernelDecomposition {
            s,
            t,
            l,
            case: case.into(),
            generators: vec![x, y],
            orders,
            exponent: exp,
            action,
            checks,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct E2Report {
    pub s: u32,
    pub l: u32,
    pub h: u32,
    pub checks: Vec<Check>,
    pub q: QReport,
    pub brute_force_kernel: u64,
    pub ep_hypothesis: bool,
}

impl E2Report {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass) && self.q.order == 1 && self.brute_force_kernel == 1 && self.ep_hypothesis
    }
}

/// The dual module `A' = Hom(A_l, mu_{2^{s+1}})` with `sigma`, `tau` derived
/// from conjugation by `c` and the cyclotomic action. Coordinates are in the
/// dual basis `a*, b*`; `corrupt` replaces `sigma(b*)` by `b*`.
pub fn lemma_e2_module(s: u32, l: u32, h: u32, corrupt: bool) -> Result<(Bicyclic, Vec<Check>)> {
    if h == 0 || h > s {
        return Err(Error::invalid(format!("need 0 < h <= s, got h = {h}, s = {s}")));
    }
    let t = l + h;
    let g = MetacyclicGroup::new(Family::E, s, t)?;
    let a = g.a();
    let c = g.c();
    let b = g.mul(g.pow(a, 1 << (s - h)), g.pow(c, 1 << l));
    let al = g.subgroup(&[a, g.pow(c, 1 << l)]);
    let ma = 1u64 << (s + 1);
    let mb = 1u64 << h;
    let mut checks = vec![
        Check::new("ord a = 2^(s+1)", g.element_order(a) == ma, ""),
        Check::new("ord b = 2^h", g.element_order(b) == mb, ""),
        Check::new("b^c = a^(-2^(s-h+1)) b", g.conj(b, c) == g.mul(g.pow(a, ma - (1 << (s - h + 1))), b), ""),
        Check::new("c^2 central", g.center().contains(&g.pow(c, 2)), ""),
    ];
    let coords = coordinates(&g, a, b, &al);
    checks.push(Check::new("A_l = <a> x <b>", coords.is_some(), ""));
    let Some(coords) = coords else {
        return Err(Error::Internal("A_l does not decompose".to_string()));
    };
    // phi in A' is (phi(a), phi(b)) in Z/2^{s+1}; a* = (1, 0), b* = (0, 2^{s+1-h})
    let scale = 1u64 << (s + 1 - h);
    let conj = |e: Elem| coords[&g.conj(e, c)];
    let (ca, cb) = (conj(a), conj(b));
    let eval = |phi: (u64, u64), co: (u64, u64)| (co.0 * phi.0 + co.1 * phi.1) % ma;
    let to_dual = |vals: (u64, u64)| -> Option<Vec<u64>> {
        (vals.1 % scale == 0).then(|| vec![vals.0 % ma, (vals.1 / scale) % mb])
    };
    let from_dual = |v: &[u64]| (v[0] % ma, (v[1] * scale) % ma);
    let sigma_on = |v: &[u64]| {
        let phi = from_dual(v);
        to_dual(((ma - eval(phi, ca)) % ma, (ma - eval(phi, cb)) % ma))
    };
    let tau_on = |v: &[u64]| {
        let phi = from_dual(v);
        to_dual((phi.0 * (ma / 2 + 1) % ma, phi.1 * (ma / 2 + 1) % ma))
    };
    let astar = vec![1, 0];
    let bstar = vec![0, 1];
    let rows = |f: &dyn Fn(&[u64]) -> Option<Vec<u64>>| -> Option<Endo> { Some(Endo(vec![f(&astar)?, f(&bstar)?])) };
    let (Some(mut sigma), Some(tau)) = (rows(&sigma_on), rows(&tau_on)) else {
        return Err(Error::Internal("dual action leaves A'".to_string()));
    };
    if corrupt {
        sigma.0[1] = bstar.clone();
    }
    let m = GModule::new(vec![ma, mb], vec![sigma.clone(), tau.clone()])?;
    let st = m.compose(&sigma, &tau);
    let v = |x: u64, y: u64| vec![x % ma, y % mb];
    let sp = (1u64 << s) + 1;
    checks.extend([
        Check::new("sigma(a*) = a* b*", sigma.0[0] == v(1, 1), format!("{:?}", sigma.0[0])),
        Check::new("sigma(b*) = b*^-1", sigma.0[1] == v(0, mb - 1), format!("{:?}", sigma.0[1])),
        Check::new("tau(a*) = a*^(2^s+1)", tau.0[0] == v(sp, 0), format!("{:?}", tau.0[0])),
        Check::new("tau(b*) = b*", tau.0[1] == v(0, 1), format!("{:?}", tau.0[1])),
        Check::new("sigma tau(a*) = a*^(2^s+1) b*", st.0[0] == v(sp, 1), format!("{:?}", st.0[0])),
        Check::new("sigma tau(b*) = b*^-1", st.0[1] == v(0, mb - 1), format!("{:?}", st.0[1])),
        Check::new("sigma, tau nontrivial", sigma != m.identity() && tau != m.identity(), ""),
    ]);
    let s1 = m.minus_one(&sigma);
    let st1 = m.minus_one(&st);
    let img_s = m.image(&s1);
    let img_st = m.image(&st1);
    let bl = m.lattice_of(&bstar);
    checks.extend([
        Check::new("A'^(sigma-1) = <b*>", img_s == bl, ""),
        Check::new("A'^(sigma tau-1) = <a*^(2^s) b*>", img_st == m.lattice_of(&v(1 << s, 1)), ""),
        Check::new("intersection = <b*^2>", img_s.intersect(&img_st) == m.lattice_of(&v(0, 2)), ""),
        Check::new("b* fixed by tau", m.apply(&tau, &bstar) == bstar, ""),
        Check::new("(b*)^(sigma-1) = b*^-2", m.apply(&s1, &bstar) == v(0, mb.wrapping_sub(2) % mb), ""),
    ]);
    let order = |e: &Endo| m.endo_order(e, 64).unwrap_or(0);
    let (os, ot) = (order(&sigma), order(&tau));
    let bic = Bicyclic::new(vec![ma, mb], sigma, tau, os.max(1), ot.max(1))?;
    Ok((bic, checks))
}

pub fn lemma_e2_verify(s: u32, l: u32, h: u32) -> Result<E2Report> {
    lemma_e2_verify_with(s, l, h, false)
}

pub fn lemma_e2_verify_with(s: u32, l: u32, h: u32, corrupt: bool) -> Result<E2Report> {
    let (bic, checks) = lemma_e2_module(s, l, h, corrupt)?;
    let q = h1_restriction_kernel_q(&bic);
    let bf = h1_bruteforce(&bic)?;
    let ep = ep_hypothesis_check(&bic.module, &[bic.sigma.clone(), bic.tau.clone()])?;
    Ok(E2Report { s, l, h, checks, q, brute_force_kernel: bf.kernel_order, ep_hypothesis: ep })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn group_basics() {
        let g = MetacyclicGroup::new(Family::E, 2, 2).unwrap();
        assert_eq!(g.elements().len(), 32);
        let x = (3, 1);
        assert_eq!(g.mul(g.identity(), x), x);
        let gm = MetacyclicGroup::new(Family::Gamma, 2, 3).unwrap();
        assert_eq!(gm.order(), 64);
        assert_eq!(gm.pow(gm.c(), 8), gm.identity());
        let triples: Vec<_> =
            g.elements().iter().zip(g.elements().iter().rev()).map(|(&x, &y)| (x, y, (x.0 ^ 1, y.1))).collect();
        assert!(check_group_laws(&g, &triples).iter().all(|c| c.pass));
    }

    #[test]
    fn structure() {
        let r = structure_invariants(2, 2).unwrap();
        assert!(r.pass(), "{r:?}");
        assert_eq!((r.center_order, r.commutator_order, r.socle_order), (4, 4, 2));
        assert_eq!(structure_invariants(3, 2).unwrap().commutator_order, 8);
    }

    #[test]
    fn isomorphisms() {
        assert!(presentation_isomorphism_check(2, 2).unwrap().iter().all(|c| c.pass));
        assert!(presentation_isomorphism_check(3, 4).unwrap().iter().all(|c| c.pass));
        let g = MetacyclicGroup::new(Family::E, 2, 2).unwrap();
        let h = MetacyclicGroup::new(Family::ETwisted, 2, 2).unwrap();
        let wrong = GenMap { a: h.mul(h.a(), h.c()), c: h.c() };
        assert!(!is_isomorphism(&g, &h, wrong));
    }

    #[test]
    fn kernels() {
        let d = kernel_decomposition(2, 3, 1).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].orders, vec![8, 4]);
        assert!(d.iter().all(|k| k.checks.iter().all(|c| c.pass)), "{d:?}");
        let d = kernel_decomposition(3, 3, 2).unwrap();
        assert_eq!((d.len(), d[0].case.as_str()), (1, "t-l<=s"));
        assert!(d[0].checks.iter().all(|c| c.pass));
        let d = kernel_decomposition(2, 5, 1).unwrap();
        assert_eq!((d.len(), d[0].case.as_str(), d[0].exponent), (1, "t-l>=s", 32));
        assert!(d[0].checks.iter().all(|c| c.pass));
        let d = kernel_decomposition(2, 4, 1).unwrap();
        assert_eq!(d[0].exponent, 16);
        assert!(d[0].checks.iter().all(|c| c.pass), "{d:?}");
        let d = kernel_decomposition(3, 4, 1).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].exponent, 16);
        assert!(d.iter().all(|k| k.checks.iter().all(|c| c.pass)));
    }

    #[test]
    fn h1_examples() {
        let id = Endo(vec![vec![1]]);
        let b = Bicyclic::new(vec![2], id.clone(), id.clone(), 2, 2).unwrap();
        let r = h1_bruteforce(&b).unwrap();
        assert_eq!(r.h1_factors, vec![2, 2]);
        let neg = Endo(vec![vec![3]]);
        let b = Bicyclic::new(vec![4], neg, Endo(vec![vec![1]]), 2, 2).unwrap();
        let r = h1_bruteforce(&b).unwrap();
        assert_eq!(r.kernel_order, 1);
        assert_eq!(h1_restriction_kernel_q(&b).order, 1);
        let zero = Bicyclic::new(vec![1], Endo(vec![vec![0]]), Endo(vec![vec![0]]), 2, 2).unwrap();
        assert_eq!(h1_bruteforce(&zero).unwrap().h1_order, 1);
    }

    #[test]
    fn q_matches_bruteforce() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..40 {
            let b = random_bicyclic(&mut rng, 100_000);
            assert_eq!(h1_restriction_kernel_q(&b).order, h1_bruteforce(&b).unwrap().kernel_order, "{b:?}");
        }
    }

    #[test]
    fn lemma_e2() {
        let r = lemma_e2_verify(2, 1, 2).unwrap();
        assert!(r.pass(), "{r:?}");
        assert!(lemma_e2_verify(3, 1, 3).unwrap().pass());
        let bad = lemma_e2_verify_with(2, 1, 2, true).unwrap();
        assert!(!bad.checks.iter().all(|c| c.pass));
    }

    #[test]
    fn ep_cyclic() {
        let m = GModule::new(vec![4], vec![]).unwrap();
        assert!(ep_hypothesis_check(&m, &[Endo(vec![vec![3]])]).unwrap());
    }
}
