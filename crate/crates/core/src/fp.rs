//! Small prime-field helpers shared by the characteristic-p modules.

pub fn add(a: u64, b: u64, p: u64) -> u64 {
    (a + b) % p
}

pub fn sub(a: u64, b: u64, p: u64) -> u64 {
    (a + p - b % p) % p
}

pub fn mul(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

pub fn neg(a: u64, p: u64) -> u64 {
    (p - a % p) % p
}

pub fn pow(mut base: u64, mut exp: u64, p: u64) -> u64 {
    let mut acc = 1 % p;
    base %= p;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul(acc, base, p);
        }
        base = mul(base, base, p);
        exp >>= 1;
    }
    acc
}

/// Inverse of a nonzero element; panics on zero.
pub fn inv(a: u64, p: u64) -> u64 {
    assert!(a % p != 0, "zero has no inverse in F_{p}");
    pow(a, p - 2, p)
}

pub fn from_i64(a: i64, p: u64) -> u64 {
    a.rem_euclid(p as i64) as u64
}

/// Smallest generator of `F_p^*`.
pub fn primitive_root(p: u64) -> u64 {
    let n = p - 1;
    let mut factors = Vec::new();
    let mut m = n;
    let mut d = 2;
    while d * d <= m {
        if m % d == 0 {
            factors.push(d);
            while m % d == 0 {
                m /= d;
            }
        }
        d += 1;
    }
    if m > 1 {
        factors.push(m);
    }
    (2..p)
        .find(|&g| factors.iter().all(|&q| pow(g, n / q, p) != 1))
        .unwrap_or(1)
}

/// Row-echelon basis over `F_p`, grown one vector at a time.
#[derive(Debug, Clone)]
pub struct EchelonBasis {
    p: u64,
    rows: Vec<(usize, Vec<u64>)>,
}

impl EchelonBasis {
    pub fn new(p: u64) -> Self {
        EchelonBasis { p, rows: Vec::new() }
    }

    fn reduce(&self, v: &mut [u64]) {
        let p = self.p;
        for (pivot, row) in &self.rows {
            let c = v[*pivot];
            if c != 0 {
                for (x, &y) in v.iter_mut().zip(row) {
                    *x = sub(*x, mul(c, y, p), p);
                }
            }
        }
    }

    /// Adds `v` to the span; returns `false` if it was already contained.
    pub fn insert(&mut self, mut v: Vec<u64>) -> bool {
        self.reduce(&mut v);
        let Some(pivot) = v.iter().position(|&x| x != 0) else {
            return false;
        };
        let scale = inv(v[pivot], self.p);
        for x in v.iter_mut() {
            *x = mul(*x, scale, self.p);
        }
        self.rows.push((pivot, v));
        true
    }

    pub fn contains(&self, v: &[u64]) -> bool {
        let mut v = v.to_vec();
        self.reduce(&mut v);
        v.iter().all(|&x| x == 0)
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primitive_roots() {
        assert_eq!(primitive_root(3), 2);
        assert_eq!(primitive_root(5), 2);
        assert_eq!(primitive_root(7), 3);
        assert_eq!(primitive_root(13), 2);
    }

    #[test]
    fn echelon_rank() {
        let mut b = EchelonBasis::new(5);
        assert!(b.insert(vec![1, 2, 3]));
        assert!(b.insert(vec![2, 4, 2]));
        assert!(!b.insert(vec![3, 1, 4]));
        assert!(!b.insert(vec![0, 0, 0]));
        assert_eq!(b.rank(), 2);
        assert!(b.contains(&[0, 0, 1]));
    }
}
