//! Real spherical harmonics up to order 7 in ACN channel order with SN3D
//! normalization (the AmbiX layout), for encoding plane waves into
//! higher-order ambisonics.
//!
//! Evaluation is purely polynomial in the direction components: associated
//! Legendre values are built by upward recurrence with the sin^m(theta)
//! factor folded into a Chebyshev-style recurrence on (x, y), so there is
//! no trigonometry, poles are exact, and the first-order block comes out as
//! exactly (y, z, x). The Condon-Shortley phase is omitted, as is usual for
//! ambisonics.

use crate::error::{Error, Result};

/// Highest supported ambisonic order.
pub const MAX_ORDER: usize = 7;

/// A spherical-harmonic coefficient vector of one order: (order+1)^2 values
/// indexed by ACN = l(l+1) + m.
#[derive(Debug, Clone, PartialEq)]
pub struct ShVector {
    order: usize,
    values: Vec<f64>,
}

impl ShVector {
    fn new(order: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), (order + 1) * (order + 1));
        Self { order, values }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at a given ACN index.
    pub fn acn(&self, index: usize) -> f64 {
        self.values[index]
    }

    /// Value for degree l, order m.
    pub fn get(&self, l: usize, m: isize) -> f64 {
        self.values[acn_index(l, m)]
    }
}

/// ACN channel index for degree l and order m: l^2 + l + m.
pub fn acn_index(l: usize, m: isize) -> usize {
    (l * l) as isize as usize + (l as isize + m) as usize
}

/// Channel count of an ambisonic order.
pub fn channel_count(order: usize) -> usize {
    (order + 1) * (order + 1)
}

/// SN3D -> N3D rescaling factor sqrt(2l + 1) for degree l.
pub fn n3d_scale(l: usize) -> f64 {
    ((2 * l + 1) as f64).sqrt()
}

fn check_order(order: usize) -> Result<()> {
    if order < 1 || order > MAX_ORDER {
        return Err(Error::validation(format!(
            "ambisonic order must be 1..={MAX_ORDER}, got {order}"
        )));
    }
    Ok(())
}

/// Encodes a unit direction as SN3D/ACN spherical-harmonic gains.
///
/// The direction must be unit length within 1e-9. ACN 0 is always 1 and
/// the first-order block (ACN 1, 2, 3) is exactly (y, z, x).
pub fn sh_encode(direction: [f64; 3], order: usize) -> Result<ShVector> {
    check_order(order)?;
    let [x, y, z] = direction;
    if !(x.is_finite() && y.is_finite() && z.is_finite()) {
        return Err(Error::validation("non-finite direction"));
    }
    let norm_sq = x * x + y * y + z * z;
    if (norm_sq.sqrt() - 1.0).abs() > 1e-9 {
        return Err(Error::validation(format!(
            "direction must be unit length, |d| = {}",
            norm_sq.sqrt()
        )));
    }

    let n = channel_count(order);
    let mut values = vec![0.0; n];

    // q[l][m] = P_l^m(z) / sin^m(theta): the sectoral sin^m factor is kept
    // inside the azimuth terms below so everything stays polynomial.
    let mut q = [[0.0f64; MAX_ORDER + 1]; MAX_ORDER + 1];
    q[0][0] = 1.0;
    for m in 0..order {
        // Diagonal: Q_{m+1}^{m+1} = (2m + 1) Q_m^m (no Condon-Shortley).
        q[m + 1][m + 1] = (2 * m + 1) as f64 * q[m][m];
        // First subdiagonal: Q_{m+1}^m = (2m + 1) z Q_m^m.
        q[m + 1][m] = (2 * m + 1) as f64 * z * q[m][m];
    }
    for m in 0..=order {
        for l in (m + 2)..=order {
            q[l][m] = (((2 * l - 1) as f64) * z * q[l - 1][m]
                - ((l + m - 1) as f64) * q[l - 2][m])
                / ((l - m) as f64);
        }
    }

    // cos_m[m] = sin^m(theta) cos(m phi), sin_m[m] = sin^m(theta) sin(m phi)
    // via (x + iy)^m.
    let mut cos_m = [0.0f64; MAX_ORDER + 1];
    let mut sin_m = [0.0f64; MAX_ORDER + 1];
    cos_m[0] = 1.0;
    sin_m[0] = 0.0;
    for m in 0..order {
        cos_m[m + 1] = x * cos_m[m] - y * sin_m[m];
        sin_m[m + 1] = x * sin_m[m] + y * cos_m[m];
    }

    for l in 0..=order {
        values[acn_index(l, 0)] = q[l][0];
        for m in 1..=l {
            // SN3D: sqrt(2 (l-m)! / (l+m)!).
            let norm = (2.0 / pochhammer_ratio(l, m)).sqrt();
            values[acn_index(l, m as isize)] = norm * q[l][m] * cos_m[m];
            values[acn_index(l, -(m as isize))] = norm * q[l][m] * sin_m[m];
        }
    }
    Ok(ShVector::new(order, values))
}

/// (l+m)! / (l-m)! as an exact f64 (small arguments only).
fn pochhammer_ratio(l: usize, m: usize) -> f64 {
    let mut acc = 1.0;
    for k in (l - m + 1)..=(l + m) {
        acc *= k as f64;
    }
    acc
}

/// The encoding target of the omnidirectional residual: 1 at ACN 0, zeros
/// elsewhere.
pub fn sh_omni(order: usize) -> Result<ShVector> {
    check_order(order)?;
    let mut values = vec![0.0; channel_count(order)];
    values[0] = 1.0;
    Ok(ShVector::new(order, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_unit(rng: &mut impl Rng) -> [f64; 3] {
        loop {
            let v: [f64; 3] = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if n > 1e-3 {
                return [v[0] / n, v[1] / n, v[2] / n];
            }
        }
    }

    #[test]
    fn order_bounds_are_enforced() {
        assert!(sh_encode([0.0, 0.0, 1.0], 0).is_err());
        assert!(sh_encode([0.0, 0.0, 1.0], 8).is_err());
        assert!(sh_omni(0).is_err());
        assert!(sh_omni(8).is_err());
    }

    #[test]
    fn non_unit_direction_is_rejected() {
        assert!(sh_encode([0.0, 0.0, 2.0], 1).is_err());
        assert!(sh_encode([0.0, 0.0, 0.0], 1).is_err());
    }

    #[test]
    fn plus_z_first_order() {
        let sh = sh_encode([0.0, 0.0, 1.0], 1).unwrap();
        assert_eq!(sh.values(), &[1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn plus_x_order_seven() {
        let sh = sh_encode([1.0, 0.0, 0.0], 7).unwrap();
        assert_eq!(sh.len(), 64);
        assert_eq!(sh.acn(0), 1.0);
        assert_eq!(sh.acn(1), 0.0);
        assert_eq!(sh.acn(2), 0.0);
        assert_eq!(sh.acn(3), 1.0);
    }

    #[test]
    fn first_order_block_is_direction_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let d = random_unit(&mut rng);
            let sh = sh_encode(d, 3).unwrap();
            assert_eq!(sh.acn(0), 1.0);
            assert_eq!(sh.acn(1), d[1], "ACN 1 must be y");
            assert_eq!(sh.acn(2), d[2], "ACN 2 must be z");
            assert_eq!(sh.acn(3), d[0], "ACN 3 must be x");
        }
    }

    #[test]
    fn omni_vector_shape() {
        let o1 = sh_omni(1).unwrap();
        assert_eq!(o1.values(), &[1.0, 0.0, 0.0, 0.0]);
        let o7 = sh_omni(7).unwrap();
        assert_eq!(o7.len(), 64);
        assert_eq!(o7.acn(0), 1.0);
        assert!(o7.values()[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn poles_are_finite_and_match_closed_forms() {
        for z in [1.0, -1.0] {
            let sh = sh_encode([0.0, 0.0, z], 7).unwrap();
            for v in sh.values() {
                assert!(v.is_finite());
            }
            // At the poles every m != 0 harmonic vanishes and the zonal
            // ones are P_l(z) = z^l.
            for l in 0..=7usize {
                for m in -(l as isize)..=(l as isize) {
                    let expect = if m == 0 { z.powi(l as i32) } else { 0.0 };
                    assert!(
                        (sh.get(l, m) - expect).abs() < 1e-12,
                        "l={l} m={m}: {}",
                        sh.get(l, m)
                    );
                }
            }
        }
    }

    #[test]
    fn rotation_consistency_first_order() {
        // Rotating the direction about +Z permutes/rotates the first-order
        // block the same way.
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..100 {
            let d = random_unit(&mut rng);
            let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let (c, s) = (phi.cos(), phi.sin());
            let rotated = [c * d[0] - s * d[1], s * d[0] + c * d[1], d[2]];
            let a = sh_encode(d, 2).unwrap();
            let b = sh_encode(rotated, 2).unwrap();
            // ACN(1)=y, ACN(3)=x transform like the direction.
            assert!((b.acn(3) - (c * a.acn(3) - s * a.acn(1))).abs() < 1e-12);
            assert!((b.acn(1) - (s * a.acn(3) + c * a.acn(1))).abs() < 1e-12);
            assert!((b.acn(2) - a.acn(2)).abs() < 1e-12);
        }
    }

    /// Exact quadrature for products of spherical harmonics on an
    /// equiangular grid: uniform azimuths (exact for trig polynomials
    /// below the grid size) and midpoint colatitudes with Fejer-style
    /// weights that integrate cos(k theta) sin(theta) exactly.
    fn quadrature_grid(n_az: usize, n_theta: usize) -> Vec<([f64; 3], f64)> {
        use std::f64::consts::PI;
        let mut theta_weights = vec![0.0; n_theta];
        for (j, wj) in theta_weights.iter_mut().enumerate() {
            let theta = PI * (j as f64 + 0.5) / n_theta as f64;
            let mut acc = 1.0;
            let mut k = 2;
            while k <= n_theta - 2 {
                acc += 2.0 / (1.0 - (k * k) as f64) * (k as f64 * theta).cos();
                k += 2;
            }
            *wj = 2.0 / n_theta as f64 * acc; // integrates d(cos theta) over [-1, 1]
        }
        let mut cells = Vec::with_capacity(n_az * n_theta);
        for j in 0..n_theta {
            let theta = PI * (j as f64 + 0.5) / n_theta as f64;
            let (st, ct) = (theta.sin(), theta.cos());
            for i in 0..n_az {
                let phi = 2.0 * PI * i as f64 / n_az as f64;
                let dir = [st * phi.cos(), st * phi.sin(), ct];
                // Solid-angle weight: d(cos theta) x d(phi), normalized to
                // average (not integrate) over the sphere.
                let w = theta_weights[j] / 2.0 / n_az as f64;
                cells.push((dir, w));
            }
        }
        cells
    }

    #[test]
    fn n3d_gram_matrix_is_identity() {
        let order = 7;
        let n = channel_count(order);
        let cells = quadrature_grid(64, 32);
        let mut gram = vec![0.0; n * n];
        for (dir, w) in cells {
            let sh = sh_encode(dir, order).unwrap();
            let n3d: Vec<f64> = sh
                .values()
                .iter()
                .enumerate()
                .map(|(acn, v)| {
                    let l = (acn as f64).sqrt() as usize;
                    v * n3d_scale(l)
                })
                .collect();
            for a in 0..n {
                for b in 0..n {
                    gram[a * n + b] += w * n3d[a] * n3d[b];
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!(
                    (gram[a * n + b] - expect).abs() < 1e-6,
                    "gram[{a}][{b}] = {}",
                    gram[a * n + b]
                );
            }
        }
    }
}
