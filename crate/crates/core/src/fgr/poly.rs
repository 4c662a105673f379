//! Truncated multivariate polynomials in `z₁…z_J, z̄₁…z̄_J, f¹, f²`, used to
//! expand the local nonlinearity pointwise.

use std::collections::HashMap;

/// Monomial layout shared by every polynomial of one expansion.
#[derive(Debug)]
pub struct Layout {
    pub modes: usize,
    /// Exponents `[m₁…m_J, n₁…n_J, p, q]` (z, z̄, f¹, f²).
    pub monomials: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    /// `(i, j, k)`: monomial `i` times monomial `j` is monomial `k`.
    products: Vec<(usize, usize, usize)>,
}

impl Layout {
    /// All monomials of total degree ≤ `order` that are at most linear in `f`.
    pub fn new(modes: usize, order: usize) -> Self {
        let nv = 2 * modes + 2;
        let mut monomials = Vec::new();
        let mut cur = vec![0u8; nv];
        enumerate(&mut cur, 0, order, &mut monomials);
        monomials.retain(|m| (m[nv - 2] + m[nv - 1]) as usize <= 1);
        monomials.sort_by_key(|m| m.iter().map(|&e| e as usize).sum::<usize>());
        let index: HashMap<Vec<u8>, usize> = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        let mut products = Vec::new();
        for (i, a) in monomials.iter().enumerate() {
            for (j, b) in monomials.iter().enumerate() {
                let c: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                if let Some(&k) = index.get(&c) {
                    products.push((i, j, k));
                }
            }
        }
        Layout {
            modes,
            monomials,
            index,
            products,
        }
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn degree(&self, k: usize) -> usize {
        self.monomials[k].iter().map(|&e| e as usize).sum()
    }

    /// Index of `z^m z̄^n f^e` where `e` selects nothing, `f¹` or `f²`.
    pub fn find(&self, m: &[usize], n: &[usize], f: Option<usize>) -> Option<usize> {
        let mut key: Vec<u8> = m.iter().chain(n).map(|&e| e as u8).collect();
        key.extend([0, 0]);
        if let Some(c) = f {
            key[2 * self.modes + c] = 1;
        }
        self.index.get(&key).copied()
    }

    pub fn zero(&self) -> Vec<f64> {
        vec![0.0; self.len()]
    }

    pub fn constant(&self, c: f64) -> Vec<f64> {
        let mut p = self.zero();
        p[0] = c;
        p
    }

    /// Linear polynomial `Σ cz_j z_j + Σ cw_j z̄_j + cf·f^{which}`.
    pub fn linear(&self, cz: &[f64], cw: &[f64], cf: [f64; 2]) -> Vec<f64> {
        let mut p = self.zero();
        let j = self.modes;
        let mut unit = vec![0usize; 2 * j];
        for k in 0..j {
            unit[k] = 1;
            p[self.find(&unit[..j], &unit[j..], None).unwrap()] = cz[k];
            unit[k] = 0;
            unit[j + k] = 1;
            p[self.find(&unit[..j], &unit[j..], None).unwrap()] = cw[k];
            unit[j + k] = 0;
        }
        for (c, v) in cf.iter().enumerate() {
            p[self.find(&unit[..j], &unit[j..], Some(c)).unwrap()] = *v;
        }
        p
    }

    pub fn mul(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = self.zero();
        for &(i, j, k) in &self.products {
            let (x, y) = (a[i], b[j]);
            if x != 0.0 && y != 0.0 {
                out[k] += x * y;
            }
        }
        out
    }
}

fn enumerate(cur: &mut Vec<u8>, pos: usize, left: usize, out: &mut Vec<Vec<u8>>) {
    if pos == cur.len() {
        out.push(cur.clone());
        return;
    }
    for e in 0..=left {
        cur[pos] = e as u8;
        enumerate(cur, pos + 1, left - e, out);
    }
    cur[pos] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_respects_truncation_and_f_linearity() {
        let l = Layout::new(1, 3);
        let a = l.linear(&[1.0], &[0.0], [1.0, 0.0]);
        let sq = l.mul(&a, &a);
        // (z + f¹)² = z² + 2 z f¹, the f¹² term is dropped.
        assert_eq!(sq[l.find(&[2], &[0], None).unwrap()], 1.0);
        assert_eq!(sq[l.find(&[1], &[0], Some(0)).unwrap()], 2.0);
        let cube = l.mul(&sq, &a);
        let quart = l.mul(&cube, &a);
        assert!(quart.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn binomial_coefficients() {
        let l = Layout::new(2, 4);
        let a = l.linear(&[1.0, 1.0], &[0.0, 0.0], [0.0, 0.0]);
        let mut p = l.constant(1.0);
        for _ in 0..4 {
            p = l.mul(&p, &a);
        }
        assert_eq!(p[l.find(&[2, 2], &[0, 0], None).unwrap()], 6.0);
        assert_eq!(p[l.find(&[1, 3], &[0, 0], None).unwrap()], 4.0);
    }
}
