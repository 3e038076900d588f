//! The unit group `(Z/n)^*` with a fixed CRT basis, and its subgroups as
//! exponent lattices.

use std::fmt;
use std::sync::Arc;

use crate::arith::{self, crt_pair, gcd, pow_mod};
use crate::error::{Error, Result};
use crate::lattice::{Lattice, Quotient};

#[derive(Clone, Debug, PartialEq, Eq)]
struct Component {
    p: u64,
    a: u32,
    pa: u64,
    /// Generators as residues mod `p^a` and their orders.
    local: Vec<(u64, u64)>,
    first_slot: usize,
}

/// `(Z/n)^*` as a product of cyclic groups. Basis order: the 2-part first
/// (`-1` then `5`), then odd prime powers ascending, each with its smallest
/// primitive root. Basis residues are CRT lifts that are `1` at the other
/// prime powers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnitGroup {
    n: u64,
    comps: Vec<Component>,
    basis: Vec<(u64, u64)>,
}

impl UnitGroup {
    pub fn new(n: u64) -> Arc<UnitGroup> {
        assert!(n >= 1, "modulus must be positive");
        let mut comps = Vec::new();
        let mut basis = Vec::new();
        for (p, a) in arith::factorize(n) {
            let pa = p.pow(a);
            let local: Vec<(u64, u64)> = if p == 2 {
                match a {
                    1 => vec![],
                    2 => vec![(3, 2)],
                    _ => vec![(pa - 1, 2), (5, pa / 4)],
                }
            } else {
                vec![(arith::primitive_root_prime_power(p, a), pa / p * (p - 1))]
            };
            let first_slot = basis.len();
            for &(g, o) in &local {
                basis.push((crt_pair(g, pa, 1, n / pa).unwrap(), o));
            }
            comps.push(Component { p, a, pa, local, first_slot });
        }
        Arc::new(UnitGroup { n, comps, basis })
    }

    pub fn modulus(&self) -> u64 {
        self.n
    }

    /// `(generator residue, order)` pairs.
    pub fn basis(&self) -> &[(u64, u64)] {
        &self.basis
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn orders(&self) -> Vec<i64> {
        self.basis.iter().map(|&(_, o)| o as i64).collect()
    }

    pub fn order(&self) -> u64 {
        self.basis.iter().map(|&(_, o)| o).product()
    }

    /// Exponent of the group (Carmichael function).
    pub fn exponent(&self) -> u64 {
        self.basis.iter().fold(1, |acc, &(_, o)| arith::lcm(acc, o))
    }

    pub fn check_unit(&self, x: i64) -> Result<u64> {
        let r = arith::normalize(x, self.n);
        if gcd(r, self.n) != 1 {
            return Err(Error::NonUnit(x, self.n));
        }
        Ok(r)
    }

    /// Exponent vector of a unit with respect to the basis.
    pub fn exponents(&self, x: u64) -> Vec<i64> {
        let mut out = vec![0i64; self.rank()];
        for c in &self.comps {
            let y = x % c.pa;
            debug_assert!(y % c.p != 0, "non-unit");
            if c.p == 2 {
                match c.a {
                    1 => {}
                    2 => out[c.first_slot] = i64::from(y == 3),
                    _ => {
                        let neg = y % 4 == 3;
                        out[c.first_slot] = i64::from(neg);
                        let z = if neg { c.pa - y } else { y };
                        let (g, o) = c.local[1];
                        out[c.first_slot + 1] = arith::dlog(g, z, o, c.pa).expect("5 generates") as i64;
                    }
                }
            } else {
                let (g, o) = c.local[0];
                out[c.first_slot] = arith::dlog(g, y, o, c.pa).expect("primitive root") as i64;
            }
        }
        out
    }

    pub fn element(&self, exps: &[i64]) -> u64 {
        let mut acc = 1 % self.n;
        for (&(g, o), &e) in self.basis.iter().zip(exps) {
            acc = arith::mul_mod(acc, pow_mod(g, arith::normalize(e, o), self.n), self.n);
        }
        acc
    }

    pub fn element_order(&self, x: i64) -> Result<u64> {
        let r = self.check_unit(x)?;
        Ok(arith::order_mod(r, self.n, self.exponent()))
    }

    /// All units, ascending.
    pub fn units(&self) -> Vec<u64> {
        if self.n == 1 {
            return vec![0];
        }
        (1..self.n).filter(|&x| gcd(x, self.n) == 1).collect()
    }

    /// Generators of the kernel of reduction `(Z/n)^* -> (Z/m)^*`, `m | n`.
    pub fn reduction_kernel_gens(&self, m: u64) -> Vec<u64> {
        assert_eq!(self.n % m, 0, "modulus must divide");
        let mut gens = Vec::new();
        for c in &self.comps {
            let a = arith::valuation(m, c.p);
            let rest = self.n / c.pa;
            let full = a == 0 || (c.p == 2 && a == 1);
            if full {
                gens.extend(c.local.iter().map(|&(g, _)| crt_pair(g, c.pa, 1, rest).unwrap()));
            } else if a < c.a {
                let u = 1 + c.p.pow(a);
                gens.push(crt_pair(u, c.pa, 1, rest).unwrap());
            }
        }
        gens
    }

    /// A unit mod `n` reducing to the unit `x` mod `m`, `m | n`.
    pub fn lift_residue(&self, x: u64, m: u64) -> u64 {
        let mut y = x % m;
        loop {
            if gcd(y, self.n) == 1 {
                return y % self.n;
            }
            y += m;
        }
    }

    /// CRT index of prime `q` among the components, if `q | n`.
    pub fn component_slots(&self, q: u64) -> Option<(u32, Vec<usize>)> {
        self.comps.iter().find(|c| c.p == q).map(|c| (c.a, (c.first_slot..c.first_slot + c.local.len()).collect()))
    }
}

/// A subgroup of `(Z/n)^*`, stored as the lattice of exponent vectors.
#[derive(Clone)]
pub struct UnitSubgroup {
    group: Arc<UnitGroup>,
    lattice: Lattice,
}

impl PartialEq for UnitSubgroup {
    fn eq(&self, other: &Self) -> bool {
        self.group.n == other.group.n && self.lattice == other.lattice
    }
}

impl Eq for UnitSubgroup {}

impl std::hash::Hash for UnitSubgroup {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.group.n.hash(state);
        self.lattice.hash(state);
    }
}

impl fmt::Debug for UnitSubgroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "UnitSubgroup(n={}, gens={:?})", self.group.n, self.generators())
    }
}

impl UnitSubgroup {
    pub fn generated(group: &Arc<UnitGroup>, gens: &[i64]) -> Result<Self> {
        let vecs = gens.iter().map(|&g| group.check_unit(g).map(|r| group.exponents(r))).collect::<Result<Vec<_>>>()?;
        Ok(Self::from_exponents(group, &vecs))
    }

    pub fn from_exponents(group: &Arc<UnitGroup>, vecs: &[Vec<i64>]) -> Self {
        let lattice = Lattice::generated(&group.orders(), vecs);
        UnitSubgroup { group: Arc::clone(group), lattice }
    }

    pub fn from_lattice(group: &Arc<UnitGroup>, lattice: Lattice) -> Self {
        assert_eq!(lattice.dim(), group.rank());
        UnitSubgroup { group: Arc::clone(group), lattice }
    }

    pub fn trivial(group: &Arc<UnitGroup>) -> Self {
        Self::from_exponents(group, &[])
    }

    pub fn full(group: &Arc<UnitGroup>) -> Self {
        UnitSubgroup { group: Arc::clone(group), lattice: Lattice::full(group.rank()) }
    }

    pub fn group(&self) -> &Arc<UnitGroup> {
        &self.group
    }

    pub fn modulus(&self) -> u64 {
        self.group.n
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// Canonical generating residues (one per lattice row, identity rows dropped).
    pub fn generators(&self) -> Vec<u64> {
        let one = 1 % self.group.n;
        let mut out: Vec<u64> =
            self.lattice.rows().iter().map(|r| self.group.element(r)).filter(|&g| g != one).collect();
        out.dedup();
        out
    }

    pub fn contains(&self, x: u64) -> bool {
        let r = x % self.group.n;
        gcd(r, self.group.n) == 1 && self.lattice.contains(&self.group.exponents(r))
    }

    pub fn index(&self) -> u64 {
        self.lattice.index() as u64
    }

    pub fn order(&self) -> u64 {
        self.group.order() / self.index()
    }

    pub fn is_subgroup_of(&self, other: &UnitSubgroup) -> bool {
        self.same_modulus(other);
        self.lattice.is_subset_of(&other.lattice)
    }

    fn same_modulus(&self, other: &UnitSubgroup) {
        assert_eq!(self.group.n, other.group.n, "subgroups of different moduli");
    }

    pub fn intersect(&self, other: &UnitSubgroup) -> UnitSubgroup {
        self.same_modulus(other);
        UnitSubgroup { group: Arc::clone(&self.group), lattice: self.lattice.intersect(&other.lattice) }
    }

    pub fn join(&self, other: &UnitSubgroup) -> UnitSubgroup {
        self.same_modulus(other);
        UnitSubgroup { group: Arc::clone(&self.group), lattice: self.lattice.sum(&other.lattice) }
    }

    /// Preimage under reduction from a multiple `big` of the modulus.
    pub fn lift(&self, big: &Arc<UnitGroup>) -> UnitSubgroup {
        let n = self.group.n;
        assert_eq!(big.n % n, 0, "lift target must be a multiple");
        if big.n == n {
            return self.clone();
        }
        let mut gens: Vec<Vec<i64>> =
            self.lattice.rows().iter().map(|r| big.exponents(big.lift_residue(self.group.element(r), n))).collect();
        gens.extend(big.reduction_kernel_gens(n).into_iter().map(|g| big.exponents(g)));
        UnitSubgroup::from_exponents(big, &gens)
    }

    /// Image under reduction to a divisor `small` of the modulus.
    pub fn image(&self, small: &Arc<UnitGroup>) -> UnitSubgroup {
        assert_eq!(self.group.n % small.n, 0, "image target must divide");
        let gens: Vec<Vec<i64>> =
            self.lattice.rows().iter().map(|r| small.exponents(self.group.element(r) % small.n)).collect();
        UnitSubgroup::from_exponents(small, &gens)
    }

    /// Whether the subgroup contains the kernel of reduction mod `m`.
    pub fn contains_reduction_kernel(&self, m: u64) -> bool {
        self.group.reduction_kernel_gens(m).into_iter().all(|g| self.contains(g))
    }

    /// `(Z/n)^* / H` via Smith normal form.
    pub fn quotient(&self) -> UnitQuotient {
        let full = Lattice::full(self.group.rank());
        UnitQuotient { group: Arc::clone(&self.group), q: full.quotient(&self.lattice) }
    }

    /// `self / sub`, for `sub` a subgroup of `self`.
    pub fn quotient_by(&self, sub: &UnitSubgroup) -> UnitQuotient {
        self.same_modulus(sub);
        UnitQuotient { group: Arc::clone(&self.group), q: self.lattice.quotient(&sub.lattice) }
    }

    /// All elements as ascending residues (brute force; small moduli only).
    pub fn elements(&self) -> Vec<u64> {
        self.group.units().into_iter().filter(|&x| self.contains(x)).collect()
    }
}

/// A quotient of subgroups of `(Z/n)^*` with its invariant factors.
#[derive(Clone, Debug)]
pub struct UnitQuotient {
    group: Arc<UnitGroup>,
    q: Quotient,
}

impl UnitQuotient {
    pub fn factors(&self) -> &[u64] {
        &self.q.factors
    }

    pub fn order(&self) -> u64 {
        self.q.order()
    }

    pub fn is_cyclic(&self) -> bool {
        self.q.is_cyclic()
    }

    /// Residues representing generators of the invariant factors.
    pub fn representatives(&self) -> Vec<u64> {
        self.q.gens.iter().map(|g| self.group.element(g)).collect()
    }

    pub fn coords(&self, x: u64) -> Vec<u64> {
        self.q.coords(&self.group.exponents(x % self.group.n))
    }

    pub fn element_order(&self, x: u64) -> u64 {
        self.q.element_order(&self.group.exponents(x % self.group.n))
    }

    /// One residue per coset.
    pub fn coset_representatives(&self) -> Vec<u64> {
        self.q.elements().iter().map(|v| self.group.element(v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_examples() {
        assert_eq!(UnitGroup::new(7).basis(), &[(3, 6)]);
        assert!(UnitGroup::new(1).basis().is_empty());
        assert_eq!(UnitGroup::new(8).basis(), &[(7, 2), (5, 2)]);
    }

    #[test]
    fn element_orders() {
        assert_eq!(UnitGroup::new(17).element_order(4).unwrap(), 4);
        assert_eq!(UnitGroup::new(5).element_order(1).unwrap(), 1);
        assert_eq!(UnitGroup::new(12).element_order(11).unwrap(), 2);
        assert!(UnitGroup::new(12).element_order(4).is_err());
    }

    #[test]
    fn subgroup_examples() {
        let g = UnitGroup::new(17);
        let h = UnitSubgroup::generated(&g, &[4]).unwrap();
        assert_eq!((h.order(), h.index()), (4, 4));
        assert_eq!(h.quotient().factors(), &[4]);
        let g5 = UnitGroup::new(5);
        assert_eq!(UnitSubgroup::generated(&g5, &[]).unwrap().index(), 4);
        let g8 = UnitGroup::new(8);
        assert_eq!(UnitSubgroup::generated(&g8, &[7, 5]).unwrap().index(), 1);
        assert_eq!(UnitSubgroup::trivial(&g8).quotient().factors(), &[2, 2]);
        assert!(UnitSubgroup::full(&UnitGroup::new(3)).quotient().factors().is_empty());
    }

    #[test]
    fn lift_and_image() {
        let g3 = UnitGroup::new(3);
        let g12 = UnitGroup::new(12);
        let h = UnitSubgroup::trivial(&g3).lift(&g12);
        assert_eq!(h.elements(), vec![1, 7]);
        assert_eq!(h.image(&g3), UnitSubgroup::trivial(&g3));
        assert!(h.contains_reduction_kernel(3));
        assert!(!h.contains_reduction_kernel(4));
    }
}
