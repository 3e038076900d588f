//! Integer helpers shared by the residue, local and sieve code.

use num_integer::Integer;

pub fn gcd(a: u64, b: u64) -> u64 {
    a.gcd(&b)
}

pub fn lcm(a: u64, b: u64) -> u64 {
    a.lcm(&b)
}

pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Inverse of `a` modulo `m`, if it exists.
pub fn inv_mod(a: u64, m: u64) -> Option<u64> {
    if m == 1 {
        return Some(0);
    }
    let e = (a as i128 % m as i128).extended_gcd(&(m as i128));
    if e.gcd != 1 {
        return None;
    }
    Some(e.x.rem_euclid(m as i128) as u64)
}

/// Normalizes a signed residue into `[0, m)`.
pub fn normalize(x: i64, m: u64) -> u64 {
    (x as i128).rem_euclid(m as i128) as u64
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    // deterministic Miller-Rabin for 64-bit inputs
    let mut d = n - 1;
    let mut r = 0;
    while d % 2 == 0 {
        d /= 2;
        r += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..r {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Prime factorization as ascending `(p, exponent)` pairs.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

pub fn prime_divisors(n: u64) -> Vec<u64> {
    factorize(n).into_iter().map(|(p, _)| p).collect()
}

pub fn euler_phi(n: u64) -> u64 {
    factorize(n).into_iter().fold(n, |acc, (p, _)| acc / p * (p - 1))
}

/// `v_p(n)`; `n` must be nonzero.
pub fn valuation(mut n: u64, p: u64) -> u32 {
    debug_assert!(n != 0);
    let mut v = 0;
    while n % p == 0 {
        n /= p;
        v += 1;
    }
    v
}

pub fn divisors(n: u64) -> Vec<u64> {
    let mut ds = vec![1u64];
    for (p, e) in factorize(n) {
        let cur = ds.clone();
        let mut pk = 1;
        for _ in 0..e {
            pk *= p;
            ds.extend(cur.iter().map(|d| d * pk));
        }
    }
    ds.sort_unstable();
    ds
}

/// Primes `<= limit` by a plain Eratosthenes sieve.
pub fn primes_up_to(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let n = limit as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

/// Multiplicative order of `x` modulo `m`, given a multiple `group_exp` of it.
pub fn order_mod(x: u64, m: u64, group_exp: u64) -> u64 {
    let mut ord = group_exp;
    for (p, _) in factorize(group_exp) {
        while ord % p == 0 && pow_mod(x, ord / p, m) == 1 {
            ord /= p;
        }
    }
    ord
}

/// Smallest primitive root modulo `p^a` for an odd prime `p`.
pub fn primitive_root_prime_power(p: u64, a: u32) -> u64 {
    let pa = p.pow(a);
    let phi = pa / p * (p - 1);
    let fs = prime_divisors(phi);
    (2..pa)
        .find(|&g| g % p != 0 && fs.iter().all(|&q| pow_mod(g, phi / q, pa) != 1))
        .expect("odd prime powers have primitive roots")
}

/// Discrete log of `h` to base `g` in a cyclic group of order `ord` modulo `m`
/// (Pohlig-Hellman with baby-step giant-step on each prime part).
pub fn dlog(g: u64, h: u64, ord: u64, m: u64) -> Option<u64> {
    if ord == 1 {
        return if h % m == 1 % m { Some(0) } else { None };
    }
    let mut residues = Vec::new();
    for (q, e) in factorize(ord) {
        let qe = q.pow(e);
        let cofactor = ord / qe;
        let gq = pow_mod(g, cofactor, m);
        let hq = pow_mod(h, cofactor, m);
        // element of order q used to read off digits
        let gamma = pow_mod(gq, qe / q, m);
        let mut x = 0u64;
        let mut qk = 1u64;
        for _ in 0..e {
            let ginv = pow_mod(inv_mod(gq, m)?, x, m);
            let t = pow_mod(mul_mod(hq, ginv, m), qe / (qk * q), m);
            let d = bsgs(gamma, t, q, m)?;
            x += d * qk;
            qk *= q;
        }
        residues.push((x, qe));
    }
    let mut x = 0u64;
    let mut modulus = 1u64;
    for (r, md) in residues {
        x = crt_pair(x, modulus, r, md)?;
        modulus *= md;
    }
    if pow_mod(g, x, m) == h % m {
        Some(x)
    } else {
        None
    }
}

fn bsgs(g: u64, h: u64, ord: u64, m: u64) -> Option<u64> {
    if ord <= 64 {
        let mut cur = 1 % m;
        for i in 0..ord {
            if cur == h % m {
                return Some(i);
            }
            cur = mul_mod(cur, g, m);
        }
        return None;
    }
    let step = (ord as f64).sqrt().ceil() as u64;
    let mut table = std::collections::HashMap::with_capacity(step as usize);
    let mut cur = 1 % m;
    for j in 0..step {
        table.entry(cur).or_insert(j);
        cur = mul_mod(cur, g, m);
    }
    let factor = inv_mod(pow_mod(g, step, m), m)?;
    let mut gamma = h % m;
    for i in 0..=step {
        if let Some(&j) = table.get(&gamma) {
            let x = i * step + j;
            if x < ord {
                return Some(x);
            }
        }
        gamma = mul_mod(gamma, factor, m);
    }
    None
}

/// Solves `x = a mod m, x = b mod n` for coprime `m, n`.
pub fn crt_pair(a: u64, m: u64, b: u64, n: u64) -> Option<u64> {
    if m == 1 {
        return Some(b % n);
    }
    if n == 1 {
        return Some(a % m);
    }
    let inv = inv_mod(m % n, n)?;
    let diff = (b as i128 - a as i128).rem_euclid(n as i128) as u64;
    let t = mul_mod(diff, inv, n);
    Some(a + m * t)
}
