//! Orthonormal 16×16 DCT-II and its inverse.

use std::f64::consts::PI;
use std::sync::OnceLock;

pub const BLOCK: usize = 16;
pub const BLOCK_AREA: usize = BLOCK * BLOCK;

/// `basis[u][x] = c(u) cos((2x + 1) u π / 32)`, rows orthonormal.
fn basis() -> &'static [[f64; BLOCK]; BLOCK] {
    static BASIS: OnceLock<[[f64; BLOCK]; BLOCK]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut m = [[0.0; BLOCK]; BLOCK];
        let n = BLOCK as f64;
        for (u, row) in m.iter_mut().enumerate() {
            let scale = if u == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            for (x, v) in row.iter_mut().enumerate() {
                *v = scale * ((2 * x + 1) as f64 * u as f64 * PI / (2.0 * n)).cos();
            }
        }
        m
    })
}

/// Forward 2-D transform of a row-major block. `coef[16u + v]` holds
/// vertical frequency `u`, horizontal frequency `v`.
pub fn forward(block: &[f64], coef: &mut [f64]) {
    let m = basis();
    let mut tmp = [0.0; BLOCK_AREA];
    for u in 0..BLOCK {
        for x in 0..BLOCK {
            tmp[u * BLOCK + x] = (0..BLOCK).map(|y| m[u][y] * block[y * BLOCK + x]).sum();
        }
    }
    for u in 0..BLOCK {
        for v in 0..BLOCK {
            coef[u * BLOCK + v] = (0..BLOCK).map(|x| tmp[u * BLOCK + x] * m[v][x]).sum();
        }
    }
}

pub fn inverse(coef: &[f64], block: &mut [f64]) {
    let m = basis();
    let mut tmp = [0.0; BLOCK_AREA];
    for y in 0..BLOCK {
        for v in 0..BLOCK {
            tmp[y * BLOCK + v] = (0..BLOCK).map(|u| m[u][y] * coef[u * BLOCK + v]).sum();
        }
    }
    for y in 0..BLOCK {
        for x in 0..BLOCK {
            block[y * BLOCK + x] = (0..BLOCK).map(|v| tmp[y * BLOCK + v] * m[v][x]).sum();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_is_orthonormal() {
        let m = basis();
        for a in 0..BLOCK {
            for b in 0..BLOCK {
                let dot: f64 = (0..BLOCK).map(|x| m[a][x] * m[b][x]).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_basis_function_maps_to_one_coefficient() {
        let m = basis();
        let mut block = [0.0; BLOCK_AREA];
        for y in 0..BLOCK {
            for x in 0..BLOCK {
                block[y * BLOCK + x] = m[3][y] * m[5][x];
            }
        }
        let mut coef = [0.0; BLOCK_AREA];
        forward(&block, &mut coef);
        for (i, c) in coef.iter().enumerate() {
            let want = if i == 3 * BLOCK + 5 { 1.0 } else { 0.0 };
            assert!((c - want).abs() < 1e-12, "coef {i} = {c}");
        }
    }
}
