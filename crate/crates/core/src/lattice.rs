//! Full-rank integer lattices in Hermite normal form, and the Smith normal
//! form of a sublattice inside a superlattice.
//!
//! Subgroups of a finite abelian group `Z^k / D` are stored as the lattices
//! containing `D`; the HNF is canonical, so equal subgroups compare equal.

use num_integer::Integer;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Lattice {
    /// Upper triangular, positive diagonal, `0 <= rows[i][j] < rows[j][j]` for `j > i`.
    rows: Vec<Vec<i64>>,
}

impl Lattice {
    pub fn diagonal(diag: &[i64]) -> Self {
        assert!(diag.iter().all(|&d| d > 0), "diagonal must be positive");
        let k = diag.len();
        let rows = (0..k)
            .map(|i| {
                let mut r = vec![0; k];
                r[i] = diag[i];
                r
            })
            .collect();
        Lattice { rows }
    }

    pub fn full(k: usize) -> Self {
        Self::diagonal(&vec![1; k])
    }

    /// Lattice spanned by `start` (positive diagonal) together with `gens`.
    pub fn generated<'a, I>(start: &[i64], gens: I) -> Self
    where
        I: IntoIterator<Item = &'a Vec<i64>>,
    {
        let mut l = Self::diagonal(start);
        for g in gens {
            l.insert(g);
        }
        l.normalize();
        l
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<i64>] {
        &self.rows
    }

    pub fn pivot(&self, i: usize) -> i64 {
        self.rows[i][i]
    }

    /// `[Z^k : L]`.
    pub fn index(&self) -> u128 {
        self.rows.iter().enumerate().map(|(i, r)| r[i] as u128).product()
    }

    fn insert(&mut self, v: &[i64]) {
        let k = self.dim();
        assert_eq!(v.len(), k, "dimension mismatch");
        let mut v: Vec<i128> = v.iter().map(|&x| x as i128).collect();
        for i in 0..k {
            reduce_tail(&self.rows, &mut v, i);
            if v[i] == 0 {
                continue;
            }
            let a = self.rows[i][i] as i128;
            let b = v[i];
            if b % a == 0 {
                let q = b / a;
                for j in i..k {
                    v[j] -= q * self.rows[i][j] as i128;
                }
                continue;
            }
            let e = a.extended_gcd(&b);
            let (g, x, y) = (e.gcd, e.x, e.y);
            let old: Vec<i128> = self.rows[i].iter().map(|&t| t as i128).collect();
            let mut new_row: Vec<i128> = (0..k).map(|j| x * old[j] + y * v[j]).collect();
            let new_v: Vec<i128> = (0..k).map(|j| (a / g) * v[j] - (b / g) * old[j]).collect();
            if new_row[i] < 0 {
                new_row.iter_mut().for_each(|t| *t = -*t);
            }
            reduce_tail(&self.rows, &mut new_row, i + 1);
            self.rows[i] = new_row.into_iter().map(|t| t as i64).collect();
            v = new_v;
        }
    }

    fn normalize(&mut self) {
        let k = self.dim();
        for i in 0..k {
            for j in i + 1..k {
                let p = self.rows[j][j];
                let q = self.rows[i][j].div_euclid(p);
                if q != 0 {
                    for c in j..k {
                        self.rows[i][c] -= q * self.rows[j][c];
                    }
                }
            }
        }
    }

    /// Canonical representative of `v` modulo the lattice.
    pub fn reduce(&self, v: &[i64]) -> Vec<i64> {
        let k = self.dim();
        let mut w: Vec<i128> = v.iter().map(|&x| x as i128).collect();
        for i in 0..k {
            let p = self.rows[i][i] as i128;
            let q = w[i].div_euclid(p);
            if q != 0 {
                for j in i..k {
                    w[j] -= q * self.rows[i][j] as i128;
                }
            }
        }
        w.into_iter().map(|t| t as i64).collect()
    }

    pub fn contains(&self, v: &[i64]) -> bool {
        self.reduce(v).iter().all(|&x| x == 0)
    }

    pub fn is_subset_of(&self, other: &Lattice) -> bool {
        self.rows.iter().all(|r| other.contains(r))
    }

    pub fn sum(&self, other: &Lattice) -> Lattice {
        let mut l = self.clone();
        for r in &other.rows {
            l.insert(r);
        }
        l.normalize();
        l
    }

    pub fn intersect(&self, other: &Lattice) -> Lattice {
        let k = self.dim();
        let da = self.index() as i64;
        let db = other.index() as i64;
        let both = da.lcm(&db);
        // rows (x, x) for x in self and (y, 0) for y in other; the part with
        // vanishing first block is the intersection
        let mut start = vec![db; k];
        start.extend(std::iter::repeat(both).take(k));
        let mut gens = Vec::with_capacity(2 * k);
        for r in &self.rows {
            let mut g = r.clone();
            g.extend_from_slice(r);
            gens.push(g);
        }
        for r in &other.rows {
            let mut g = r.clone();
            g.extend(std::iter::repeat(0).take(k));
            gens.push(g);
        }
        let big = Lattice::generated(&start, &gens);
        big.lower_block(k)
    }

    /// Kernel of the map `Z^k -> Z^m / diag(target)` sending `e_i` to `images[i]`.
    /// `src` must be a positive diagonal contained in the kernel.
    pub fn kernel_of_map(src: &[i64], images: &[Vec<i64>], target: &[i64]) -> Lattice {
        let m = target.len();
        let mut start = target.to_vec();
        start.extend_from_slice(src);
        let k = src.len();
        let gens: Vec<Vec<i64>> = (0..k)
            .map(|i| {
                let mut g = images[i].clone();
                let mut e = vec![0; k];
                e[i] = 1;
                g.extend(e);
                g
            })
            .collect();
        let big = Lattice::generated(&start, &gens);
        big.lower_block(m)
    }

    fn lower_block(&self, skip: usize) -> Lattice {
        let rows = self.rows[skip..].iter().map(|r| r[skip..].to_vec()).collect();
        Lattice { rows }
    }

    /// Coefficients `c` with `c * rows = v`; `v` must lie in the lattice.
    pub fn coefficients(&self, v: &[i64]) -> Vec<i128> {
        let k = self.dim();
        let mut w: Vec<i128> = v.iter().map(|&x| x as i128).collect();
        let mut c = vec![0i128; k];
        for i in 0..k {
            let p = self.rows[i][i] as i128;
            assert!(w[i] % p == 0, "vector not in lattice");
            c[i] = w[i] / p;
            for j in i..k {
                w[j] -= c[i] * self.rows[i][j] as i128;
            }
        }
        c
    }

    /// Structure of `self / sub`; `sub` must be contained in `self`.
    pub fn quotient(&self, sub: &Lattice) -> Quotient {
        let k = self.dim();
        let mut a: Vec<Vec<i128>> = sub.rows.iter().map(|r| self.coefficients(r)).collect();
        let mut v = identity(k);
        let mut vinv = identity(k);
        smith(&mut a, &mut v, &mut vinv);
        let diag: Vec<i128> = (0..k).map(|i| a[i][i]).collect();
        let mut factors = Vec::new();
        let mut slots = Vec::new();
        let mut gens = Vec::new();
        for i in 0..k {
            if diag[i] > 1 {
                factors.push(diag[i] as u64);
                slots.push(i);
                let coeff = &vinv[i];
                let vec: Vec<i64> = (0..k)
                    .map(|j| {
                        let s: i128 = (0..k).map(|t| coeff[t] * self.rows[t][j] as i128).sum();
                        s as i64
                    })
                    .collect();
                gens.push(vec);
            }
        }
        Quotient { factors, gens, slots, v, big: self.clone(), sub: sub.clone() }
    }
}

fn reduce_tail(rows: &[Vec<i64>], v: &mut [i128], from: usize) {
    let k = rows.len();
    for j in from..k {
        let p = rows[j][j] as i128;
        let q = v[j].div_euclid(p);
        if q != 0 {
            for c in j..k {
                v[c] -= q * rows[j][c] as i128;
            }
        }
    }
}

fn identity(k: usize) -> Vec<Vec<i128>> {
    (0..k).map(|i| (0..k).map(|j| i128::from(i == j)).collect()).collect()
}

/// In-place Smith normal form of a nonsingular square matrix. Column
/// operations are accumulated in `v` (right factor) and `vinv`.
fn smith(a: &mut [Vec<i128>], v: &mut [Vec<i128>], vinv: &mut [Vec<i128>]) {
    let k = a.len();
    for t in 0..k {
        loop {
            let mut best: Option<(usize, usize)> = None;
            for i in t..k {
                for j in t..k {
                    if a[i][j] != 0 && best.map_or(true, |(bi, bj)| a[i][j].abs() < a[bi][bj].abs()) {
                        best = Some((i, j));
                    }
                }
            }
            let Some((pi, pj)) = best else { return };
            a.swap(t, pi);
            if pj != t {
                for row in a.iter_mut() {
                    row.swap(t, pj);
                }
                for row in v.iter_mut() {
                    row.swap(t, pj);
                }
                vinv.swap(t, pj);
            }
            let p = a[t][t];
            let mut clean = true;
            for i in t + 1..k {
                let q = a[i][t] / p;
                if q != 0 {
                    for j in t..k {
                        a[i][j] -= q * a[t][j];
                    }
                }
                if a[i][t] != 0 {
                    clean = false;
                }
            }
            for j in t + 1..k {
                let q = a[t][j] / p;
                if q != 0 {
                    for row in a.iter_mut() {
                        row[j] -= q * row[t];
                    }
                    for row in v.iter_mut() {
                        row[j] -= q * row[t];
                    }
                    for c in 0..k {
                        let add = q * vinv[j][c];
                        vinv[t][c] += add;
                    }
                }
                if a[t][j] != 0 {
                    clean = false;
                }
            }
            if !clean {
                continue;
            }
            let bad = (t + 1..k).find(|&i| (t + 1..k).any(|j| a[i][j] % p != 0));
            if let Some(i) = bad {
                for j in t..k {
                    let add = a[i][j];
                    a[t][j] += add;
                }
                continue;
            }
            break;
        }
        if a[t][t] < 0 {
            for j in t..k {
                a[t][j] = -a[t][j];
            }
        }
    }
}

/// The finite abelian group `big / sub` with invariant factors `d_1 | d_2 | ...`.
#[derive(Clone, Debug)]
pub struct Quotient {
    pub factors: Vec<u64>,
    /// Ambient vectors whose classes generate the cyclic factors.
    pub gens: Vec<Vec<i64>>,
    slots: Vec<usize>,
    v: Vec<Vec<i128>>,
    big: Lattice,
    sub: Lattice,
}

impl Quotient {
    pub fn order(&self) -> u64 {
        self.factors.iter().product()
    }

    pub fn is_cyclic(&self) -> bool {
        self.factors.len() <= 1
    }

    /// Coordinates of `x` (a vector of the big lattice) in the factor decomposition.
    pub fn coords(&self, x: &[i64]) -> Vec<u64> {
        let c = self.big.coefficients(x);
        let k = c.len();
        self.slots
            .iter()
            .zip(&self.factors)
            .map(|(&s, &d)| {
                let y: i128 = (0..k).map(|t| c[t] * self.v[t][s]).sum();
                y.rem_euclid(d as i128) as u64
            })
            .collect()
    }

    /// Order of the class of `x` in the quotient.
    pub fn element_order(&self, x: &[i64]) -> u64 {
        self.coords(x).iter().zip(&self.factors).fold(1u64, |acc, (&c, &d)| acc.lcm(&(d / d.gcd(&c))))
    }

    /// Vector representing the element with the given coordinates.
    pub fn element(&self, coords: &[u64]) -> Vec<i64> {
        let k = self.big.dim();
        let mut out = vec![0i64; k];
        for (g, &c) in self.gens.iter().zip(coords) {
            for j in 0..k {
                out[j] += g[j] * c as i64;
            }
        }
        self.sub.reduce(&out)
    }

    /// All elements of the quotient as canonical representatives.
    pub fn elements(&self) -> Vec<Vec<i64>> {
        let mut out = vec![vec![0u64; self.factors.len()]];
        for (i, &d) in self.factors.iter().enumerate() {
            let cur = std::mem::take(&mut out);
            for c in cur {
                for t in 0..d {
                    let mut c2 = c.clone();
                    c2[i] = t;
                    out.push(c2);
                }
            }
        }
        out.iter().map(|c| self.element(c)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hnf_is_canonical() {
        let a = Lattice::generated(&[16], &[vec![4]]);
        let b = Lattice::generated(&[16], &[vec![12], vec![8]]);
        assert_eq!(a, b);
        assert_eq!(a.index(), 4);
    }

    #[test]
    fn intersection_and_sum() {
        let d = [2i64, 4];
        let a = Lattice::generated(&d, &[vec![1, 0]]);
        let b = Lattice::generated(&d, &[vec![1, 1]]);
        let i = a.intersect(&b);
        assert_eq!(i, Lattice::diagonal(&d));
        let s = a.sum(&b);
        assert_eq!(s.index(), 1);
        assert!(s.contains(&[0, 1]));
    }

    #[test]
    fn quotient_of_klein() {
        let full = Lattice::full(2);
        let sub = Lattice::diagonal(&[2, 2]);
        let q = full.quotient(&sub);
        assert_eq!(q.factors, vec![2, 2]);
        assert_eq!(q.elements().len(), 4);
    }

    #[test]
    fn quotient_coordinates_are_homomorphic() {
        let full = Lattice::full(3);
        let sub = Lattice::generated(&[4, 6, 10], &[vec![2, 3, 5], vec![1, 0, 5]]);
        let q = full.quotient(&sub);
        assert_eq!(q.order() as u128, sub.index());
        let x = vec![1, 2, 3];
        let y = vec![0, 5, 7];
        let s: Vec<i64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let cx = q.coords(&x);
        let cy = q.coords(&y);
        let cs = q.coords(&s);
        for i in 0..q.factors.len() {
            assert_eq!((cx[i] + cy[i]) % q.factors[i], cs[i]);
        }
        for (i, g) in q.gens.iter().enumerate() {
            let c = q.coords(g);
            for (j, &cj) in c.iter().enumerate() {
                assert_eq!(cj, u64::from(i == j));
            }
        }
    }
}
