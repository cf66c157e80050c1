//! Directional energy maps of ambisonic signals over an azimuth/elevation
//! grid, rendered with a plane-wave-decomposition beamformer.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::signal::MultichannelSignal;
use crate::spherical::{n3d_scale, sh_encode};

/// A directional energy map. Azimuth samples run over [-180, 180) degrees
/// (uniform, starting at -180 so 0 is on the grid for even counts);
/// elevation samples span [-90, 90] inclusive. `values[el][az]` is the mean
/// squared beam output toward that direction.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyMap {
    n_az: usize,
    n_el: usize,
    values: Vec<f64>,
    /// Time extent, in samples, the map was computed over.
    pub window: (usize, usize),
}

impl EnergyMap {
    pub fn n_az(&self) -> usize {
        self.n_az
    }

    pub fn n_el(&self) -> usize {
        self.n_el
    }

    pub fn get(&self, el: usize, az: usize) -> f64 {
        self.values[el * self.n_az + az]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Azimuth of column i, degrees.
    pub fn azimuth_deg(&self, i: usize) -> f64 {
        -180.0 + 360.0 * i as f64 / self.n_az as f64
    }

    /// Elevation of row j, degrees.
    pub fn elevation_deg(&self, j: usize) -> f64 {
        if self.n_el == 1 {
            0.0
        } else {
            -90.0 + 180.0 * j as f64 / (self.n_el - 1) as f64
        }
    }

    /// (elevation row, azimuth column) of the largest cell.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = (0, 0);
        let mut best_v = f64::NEG_INFINITY;
        for j in 0..self.n_el {
            for i in 0..self.n_az {
                let v = self.get(j, i);
                if v > best_v {
                    best_v = v;
                    best = (j, i);
                }
            }
        }
        best
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Computes the energy map of an ambisonic signal over `grid` = (n_az,
/// n_el) directions within the half-open sample range `window`.
///
/// The beam toward each direction weights channel ACN by its N3D harmonic
/// value there over (L+1)^2; the cell stores the mean of the squared beam
/// output across the window.
pub fn energy_map(
    hoa: &MultichannelSignal,
    grid: (usize, usize),
    window: std::ops::Range<usize>,
) -> Result<EnergyMap> {
    let (n_az, n_el) = grid;
    if n_az == 0 || n_el == 0 {
        return Err(Error::validation("map grid must be non-empty"));
    }
    let n = hoa.channel_count();
    let side = (n as f64).sqrt().round() as usize;
    if side < 2 || side * side != n {
        return Err(Error::dimension(format!(
            "channel count {n} is not (L+1)^2 for an ambisonic order L >= 1"
        )));
    }
    let order = side - 1;
    if order > crate::spherical::MAX_ORDER {
        return Err(Error::validation(format!("order {order} above maximum")));
    }
    if window.start > window.end || window.end > hoa.len() {
        return Err(Error::dimension(format!(
            "window {}..{} outside signal of {} samples",
            window.start,
            window.end,
            hoa.len()
        )));
    }
    let span = window.len().max(1) as f64;

    // Mean of b(t)^2 = w' C w with C the channel covariance over the
    // window; one covariance pass then a quadratic form per grid cell.
    let mut cov = vec![0.0f64; n * n];
    for t in window.clone() {
        for a in 0..n {
            let sa = hoa.channel(a)[t];
            for b in a..n {
                cov[a * n + b] += sa * hoa.channel(b)[t];
            }
        }
    }
    for a in 0..n {
        for b in 0..a {
            cov[a * n + b] = cov[b * n + a];
        }
    }
    for v in cov.iter_mut() {
        *v /= span;
    }

    let norm = 1.0 / n as f64;
    let mut values = vec![0.0f64; n_az * n_el];
    for j in 0..n_el {
        let el = if n_el == 1 {
            0.0
        } else {
            (-90.0 + 180.0 * j as f64 / (n_el - 1) as f64).to_radians()
        };
        for i in 0..n_az {
            let az = (-180.0 + 360.0 * i as f64 / n_az as f64).to_radians();
            let dir = [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()];
            let sh = sh_encode(dir, order)?;
            let weights: Vec<f64> = sh
                .values()
                .iter()
                .enumerate()
                .map(|(acn, v)| {
                    let l = (acn as f64).sqrt() as usize;
                    v * n3d_scale(l) * norm
                })
                .collect();
            let mut acc = 0.0;
            for a in 0..n {
                let wa = weights[a];
                for b in 0..n {
                    acc += wa * cov[a * n + b] * weights[b];
                }
            }
            values[j * n_az + i] = acc.max(0.0);
        }
    }
    Ok(EnergyMap {
        n_az,
        n_el,
        values,
        window: (window.start, window.end),
    })
}

/// Output format for [`write_map`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapFormat {
    /// Header row of azimuths, then one labeled row per elevation.
    Csv,
    /// Binary 8-bit P5 PGM, values normalized to the map maximum, top row
    /// at +90 degrees elevation.
    Pgm,
}

/// Writes an energy map as CSV or PGM.
pub fn write_map(map: &EnergyMap, path: &Path, format: MapFormat) -> Result<()> {
    let bytes = match format {
        MapFormat::Csv => {
            let mut out = String::from("el_deg\\az_deg");
            for i in 0..map.n_az() {
                out.push_str(&format!(",{}", map.azimuth_deg(i)));
            }
            out.push('\n');
            for j in 0..map.n_el() {
                out.push_str(&format!("{}", map.elevation_deg(j)));
                for i in 0..map.n_az() {
                    out.push_str(&format!(",{}", map.get(j, i)));
                }
                out.push('\n');
            }
            out.into_bytes()
        }
        MapFormat::Pgm => {
            let max = map.max();
            let mut out = format!("P5\n{} {}\n255\n", map.n_az(), map.n_el()).into_bytes();
            for j in (0..map.n_el()).rev() {
                for i in 0..map.n_az() {
                    let v = if max > 0.0 { map.get(j, i) / max } else { 0.0 };
                    out.push((v * 255.0).round().clamp(0.0, 255.0) as u8);
                }
            }
            out
        }
    };
    let mut file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    file.write_all(&bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses a CSV written by [`write_map`] back into values (test support
/// for round-trip checks).
pub fn read_map_csv(path: &Path) -> Result<EnergyMap> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::validation("empty map CSV"))?;
    let n_az = header.split(',').count() - 1;
    let mut values = Vec::new();
    let mut n_el = 0;
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        fields.next(); // elevation label
        for f in fields {
            values.push(f.parse::<f64>().map_err(|e| {
                Error::validation(format!("bad map CSV value {f:?}: {e}"))
            })?);
        }
        n_el += 1;
    }
    if values.len() != n_az * n_el {
        return Err(Error::dimension("ragged map CSV".to_string()));
    }
    Ok(EnergyMap {
        n_az,
        n_el,
        values,
        window: (0, 0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spherical::channel_count;

    /// Order-L AmbiX encoding of a unit-amplitude signal from a direction.
    fn encoded_scene(order: usize, az_deg: f64, el_deg: f64, len: usize) -> MultichannelSignal {
        let az = az_deg.to_radians();
        let el = el_deg.to_radians();
        let dir = [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()];
        let sh = sh_encode(dir, order).unwrap();
        let s: Vec<f64> = (0..len)
            .map(|t| (2.0 * std::f64::consts::PI * t as f64 / 64.0).sin())
            .collect();
        MultichannelSignal::new(
            sh.values()
                .iter()
                .map(|g| s.iter().map(|v| g * v).collect())
                .collect(),
            48_000,
        )
        .unwrap()
    }

    #[test]
    fn zero_signal_gives_zero_map() {
        let sig = MultichannelSignal::zeros(4, 128, 48_000).unwrap();
        let map = energy_map(&sig, (16, 9), 0..128).unwrap();
        assert!(map.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn omni_only_signal_is_isotropic() {
        let mut channels = vec![vec![0.0; 128]; channel_count(3)];
        for t in 0..128 {
            channels[0][t] = (t as f64 * 0.1).sin();
        }
        let sig = MultichannelSignal::new(channels, 48_000).unwrap();
        let map = energy_map(&sig, (24, 13), 0..128).unwrap();
        let max = map.max();
        let min = map.values().iter().copied().fold(f64::INFINITY, f64::min);
        assert!(max / min <= 1.0 + 1e-9, "anisotropy {}", max / min);
    }

    #[test]
    fn order_seven_beam_is_much_sharper_than_order_one() {
        let len = 256;
        let o7 = encoded_scene(7, 0.0, 0.0, len);
        let o1 = encoded_scene(1, 0.0, 0.0, len);
        // 72 x 37 grid puts (0, 0) exactly on a sample.
        let m7 = energy_map(&o7, (72, 37), 0..len).unwrap();
        let m1 = energy_map(&o1, (72, 37), 0..len).unwrap();
        let (j7, i7) = m7.argmax();
        let (j1, i1) = m1.argmax();
        assert_eq!((m7.azimuth_deg(i7), m7.elevation_deg(j7)), (0.0, 0.0));
        assert_eq!((m1.azimuth_deg(i1), m1.elevation_deg(j1)), (0.0, 0.0));
        let sharp7 = m7.max() / m7.mean();
        let sharp1 = m1.max() / m1.mean();
        assert!(
            sharp7 / sharp1 >= 3.0,
            "peak-to-mean ratios {sharp7} vs {sharp1}"
        );
        // Half-power beamwidth in azimuth shrinks by at least 3x.
        let width = |m: &EnergyMap, j: usize| {
            let peak = m.max();
            (0..m.n_az()).filter(|&i| m.get(j, i) >= peak / 2.0).count()
        };
        assert!(width(&m1, j1) >= 3 * width(&m7, j7));
    }

    #[test]
    fn rotating_the_scene_shifts_the_argmax() {
        let len = 256;
        for shift_deg in [30.0, 90.0, -45.0] {
            let base = encoded_scene(1, 0.0, 0.0, len);
            let turned = encoded_scene(1, shift_deg, 0.0, len);
            let g = (72, 37);
            let (_, i0) = energy_map(&base, g, 0..len).unwrap().argmax();
            let (_, i1) = energy_map(&turned, g, 0..len).unwrap().argmax();
            let cell = 360.0 / 72.0;
            let got = (i1 as f64 - i0 as f64) * cell;
            let want = shift_deg;
            let diff = (got - want + 540.0).rem_euclid(360.0) - 180.0;
            assert!(diff.abs() <= cell, "shift {shift_deg}: got {got}");
        }
    }

    #[test]
    fn window_bounds_are_checked() {
        let sig = MultichannelSignal::zeros(4, 64, 48_000).unwrap();
        assert!(energy_map(&sig, (8, 5), 0..128).is_err());
        let bad = MultichannelSignal::zeros(5, 64, 48_000).unwrap();
        assert!(energy_map(&bad, (8, 5), 0..64).is_err());
    }

    #[test]
    fn csv_shape_and_round_trip() {
        let sig = encoded_scene(1, 45.0, 0.0, 64);
        let map = energy_map(&sig, (4, 2), 0..64).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("map.csv");
        write_map(&map, &path, MapFormat::Csv).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3); // header + 2 elevation rows
        for line in &lines {
            assert_eq!(line.split(',').count(), 5); // label + 4 azimuths
        }
        let back = read_map_csv(&path).unwrap();
        for (a, b) in back.values().iter().zip(map.values()) {
            assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0));
        }
    }

    #[test]
    fn pgm_of_zero_map_is_all_zero_pixels() {
        let sig = MultichannelSignal::zeros(4, 32, 48_000).unwrap();
        let map = energy_map(&sig, (6, 3), 0..32).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("map.pgm");
        write_map(&map, &path, MapFormat::Pgm).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let header_end = bytes.windows(4).position(|w| w == b"255\n").unwrap() + 4;
        assert_eq!(&bytes[..3], b"P5\n");
        assert_eq!(bytes.len() - header_end, 18);
        assert!(bytes[header_end..].iter().all(|&b| b == 0));
    }
}
