//! Reed-Solomon encoding and error correction over GF(256).
//!
//! Codewords follow the QR convention: the first byte is the highest-degree
//! coefficient and syndromes are evaluated at alpha^0, alpha^1, ...

use super::gf256::field;
use crate::error::{Error, Result};

/// Generator polynomial of degree `ec`, coefficients highest degree first,
/// leading coefficient 1.
fn generator_poly(ec: usize) -> Vec<u8> {
    let f = field();
    let mut g = vec![1u8];
    for i in 0..ec {
        let root = f.alpha_pow(i as i32);
        // g *= (x - alpha^i)
        let mut next = vec![0u8; g.len() + 1];
        for (j, &c) in g.iter().enumerate() {
            next[j] ^= c; // * x
            next[j + 1] ^= f.mul(c, root);
        }
        g = next;
    }
    g
}

/// Appends `ec_codewords` parity bytes to `data`.
pub fn rs_encode(data: &[u8], ec_codewords: usize) -> Result<Vec<u8>> {
    if ec_codewords < 2 {
        return Err(Error::Domain(format!(
            "ec_codewords must be >= 2, got {ec_codewords}"
        )));
    }
    if data.is_empty() || data.len() + ec_codewords > 255 {
        return Err(Error::Domain(format!(
            "codeword length {} + {} must be in [3, 255]",
            data.len(),
            ec_codewords
        )));
    }
    let f = field();
    let g = generator_poly(ec_codewords);
    // Polynomial long division of data * x^ec by g; remainder is the parity.
    let mut rem = vec![0u8; ec_codewords];
    for &byte in data {
        let factor = byte ^ rem[0];
        rem.rotate_left(1);
        rem[ec_codewords - 1] = 0;
        if factor != 0 {
            for (r, &gc) in rem.iter_mut().zip(g[1..].iter()) {
                *r ^= f.mul(gc, factor);
            }
        }
    }
    let mut out = data.to_vec();
    out.extend_from_slice(&rem);
    Ok(out)
}

fn syndromes(codewords: &[u8], ec: usize) -> Vec<u8> {
    let f = field();
    (0..ec)
        .map(|j| {
            let x = f.alpha_pow(j as i32);
            codewords.iter().fold(0u8, |acc, &c| f.mul(acc, x) ^ c)
        })
        .collect()
}

/// Berlekamp-Massey: shortest LFSR (error locator, lowest degree first)
/// generating the syndrome sequence.
fn berlekamp_massey(synd: &[u8]) -> Vec<u8> {
    let f = field();
    let mut sigma = vec![1u8];
    let mut prev = vec![1u8];
    let mut l = 0usize;
    let mut m = 1usize;
    let mut prev_d = 1u8;
    for n in 0..synd.len() {
        let mut d = synd[n];
        for i in 1..=l {
            if i < sigma.len() {
                d ^= f.mul(sigma[i], synd[n - i]);
            }
        }
        if d == 0 {
            m += 1;
        } else if 2 * l <= n {
            let tmp = sigma.clone();
            let coef = f.div(d, prev_d);
            let mut shifted = vec![0u8; m];
            shifted.extend_from_slice(&prev);
            for c in shifted.iter_mut() {
                *c = f.mul(*c, coef);
            }
            if shifted.len() > sigma.len() {
                sigma.resize(shifted.len(), 0);
            }
            for (s, c) in sigma.iter_mut().zip(shifted.iter()) {
                *s ^= c;
            }
            l = n + 1 - l;
            prev = tmp;
            prev_d = d;
            m = 1;
        } else {
            let coef = f.div(d, prev_d);
            let mut shifted = vec![0u8; m];
            shifted.extend_from_slice(&prev);
            for c in shifted.iter_mut() {
                *c = f.mul(*c, coef);
            }
            if shifted.len() > sigma.len() {
                sigma.resize(shifted.len(), 0);
            }
            for (s, c) in sigma.iter_mut().zip(shifted.iter()) {
                *s ^= c;
            }
            m += 1;
        }
    }
    while sigma.len() > 1 && *sigma.last().unwrap() == 0 {
        sigma.pop();
    }
    sigma
}

fn eval_poly_low_first(poly: &[u8], x: u8) -> u8 {
    let f = field();
    poly.iter().rev().fold(0u8, |acc, &c| f.mul(acc, x) ^ c)
}

/// Corrects up to floor(ec/2) byte errors in place and returns the data
/// portion (codewords minus parity).
pub fn rs_correct(codewords: &[u8], ec_codewords: usize) -> Result<Vec<u8>> {
    if ec_codewords < 2 || codewords.len() <= ec_codewords {
        return Err(Error::Domain(format!(
            "need more than {ec_codewords} codewords, got {}",
            codewords.len()
        )));
    }
    let f = field();
    let n = codewords.len();
    let synd = syndromes(codewords, ec_codewords);
    if synd.iter().all(|&s| s == 0) {
        return Ok(codewords[..n - ec_codewords].to_vec());
    }

    let sigma = berlekamp_massey(&synd);
    let num_errors = sigma.len() - 1;
    if num_errors == 0 || num_errors > ec_codewords / 2 {
        return Err(Error::Uncorrectable(format!(
            "{num_errors} errors exceed capacity {}",
            ec_codewords / 2
        )));
    }

    // Chien search: byte index i corresponds to degree n-1-i, locator
    // X = alpha^(n-1-i); X is a root position when sigma(X^-1) = 0.
    let mut positions = Vec::new();
    for i in 0..n {
        let p = (n - 1 - i) as i32;
        let x_inv = f.alpha_pow(-p);
        if eval_poly_low_first(&sigma, x_inv) == 0 {
            positions.push(i);
        }
    }
    if positions.len() != num_errors {
        return Err(Error::Uncorrectable(format!(
            "locator degree {num_errors} but {} roots found",
            positions.len()
        )));
    }

    // Forney with b = 0: omega = (synd * sigma) mod x^ec;
    // error value Y = X * omega(X^-1) / sigma'(X^-1).
    let mut omega = vec![0u8; ec_codewords];
    for (i, &s) in synd.iter().enumerate() {
        for (j, &c) in sigma.iter().enumerate() {
            if i + j < ec_codewords {
                omega[i + j] ^= f.mul(s, c);
            }
        }
    }
    // Formal derivative of sigma: odd-degree terms shifted down.
    let mut sigma_deriv = vec![0u8; sigma.len().saturating_sub(1).max(1)];
    for (d, &c) in sigma.iter().enumerate().skip(1) {
        if d % 2 == 1 {
            sigma_deriv[d - 1] = c;
        }
    }

    let mut corrected = codewords.to_vec();
    for &i in &positions {
        let p = (n - 1 - i) as i32;
        let x = f.alpha_pow(p);
        let x_inv = f.alpha_pow(-p);
        let denom = eval_poly_low_first(&sigma_deriv, x_inv);
        if denom == 0 {
            return Err(Error::Uncorrectable("zero locator derivative".into()));
        }
        let magnitude = f.mul(x, f.div(eval_poly_low_first(&omega, x_inv), denom));
        corrected[i] ^= magnitude;
    }

    if syndromes(&corrected, ec_codewords).iter().any(|&s| s != 0) {
        return Err(Error::Uncorrectable(
            "correction did not clear syndromes".into(),
        ));
    }
    Ok(corrected[..n - ec_codewords].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_without_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let len = rng.random_range(1..=40usize);
            let ec = rng.random_range(2..=16usize);
            let data: Vec<u8> = (0..len).map(|_| rng.random()).collect();
            let code = rs_encode(&data, ec).unwrap();
            assert_eq!(rs_correct(&code, ec).unwrap(), data);
        }
    }

    #[test]
    fn corrects_up_to_capacity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let len = rng.random_range(4..=30usize);
            let ec = rng.random_range(4..=16usize);
            let t = ec / 2;
            let data: Vec<u8> = (0..len).map(|_| rng.random()).collect();
            let mut code = rs_encode(&data, ec).unwrap();
            let mut hit = std::collections::HashSet::new();
            for _ in 0..t {
                loop {
                    let pos = rng.random_range(0..code.len());
                    if hit.insert(pos) {
                        code[pos] ^= rng.random_range(1..=255u8) as u8;
                        break;
                    }
                }
            }
            assert_eq!(rs_correct(&code, ec).unwrap(), data, "t={t} len={len}");
        }
    }

    #[test]
    fn beyond_capacity_fails_or_misdecodes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<u8> = (0..19).map(|_| rng.random()).collect();
        let ec = 7; // capacity 3
        let clean = rs_encode(&data, ec).unwrap();
        let mut detected = 0;
        for _ in 0..50 {
            let mut code = clean.clone();
            let mut hit = std::collections::HashSet::new();
            while hit.len() < 4 {
                let pos = rng.random_range(0..code.len());
                if hit.insert(pos) {
                    code[pos] ^= rng.random_range(1..=255u8) as u8;
                }
            }
            match rs_correct(&code, ec) {
                Err(Error::Uncorrectable(_)) => detected += 1,
                Ok(decoded) => assert_ne!(decoded, data, "4 errors silently corrected"),
                Err(other) => panic!("unexpected error {other:?}"),
            }
        }
        assert!(detected > 0, "no beyond-capacity pattern was detected");
    }

    #[test]
    fn encode_rejects_bad_parameters() {
        assert!(matches!(rs_encode(&[1, 2], 1), Err(Error::Domain(_))));
        assert!(matches!(rs_encode(&[], 4), Err(Error::Domain(_))));
        assert!(matches!(
            rs_encode(&vec![0u8; 250], 10),
            Err(Error::Domain(_))
        ));
    }
}
