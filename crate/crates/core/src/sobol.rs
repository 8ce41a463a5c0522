//! Sobol low-discrepancy sequence (Joe–Kuo direction numbers, Gray-code order).

use crate::error::{Error, Result};
use crate::space::{Config, ConfigSpace};

const BITS: usize = 32;

// (degree s, polynomial coefficients a, initial direction numbers m_1..m_s)
// for dimensions 2.. of new-joe-kuo-6.21201. Dimension 1 uses m_k = 1.
const DIRECTIONS: &[(u32, u32, &[u32])] = &[
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
    (6, 1, &[1, 3, 3, 9, 7, 49]),
    (6, 13, &[1, 1, 1, 15, 21, 21]),
    (6, 16, &[1, 3, 1, 13, 27, 49]),
    (6, 19, &[1, 1, 1, 15, 7, 5]),
    (6, 22, &[1, 3, 1, 15, 13, 25]),
    (6, 25, &[1, 1, 5, 5, 19, 61]),
    (7, 1, &[1, 3, 7, 11, 23, 15, 103]),
    (7, 4, &[1, 3, 7, 13, 13, 15, 69]),
    (7, 7, &[1, 1, 3, 13, 7, 35, 63]),
    (7, 8, &[1, 3, 5, 9, 1, 25, 53]),
    (7, 14, &[1, 3, 1, 13, 9, 35, 107]),
    (7, 19, &[1, 3, 1, 5, 27, 61, 31]),
    (7, 21, &[1, 1, 5, 11, 19, 41, 61]),
    (7, 28, &[1, 3, 5, 3, 3, 13, 69]),
    (7, 31, &[1, 1, 7, 13, 1, 19, 1]),
    (7, 32, &[1, 3, 7, 5, 13, 19, 59]),
    (7, 37, &[1, 1, 3, 9, 25, 29, 41]),
    (7, 41, &[1, 3, 5, 13, 23, 1, 55]),
    (7, 42, &[1, 3, 7, 3, 13, 59, 17]),
    (7, 50, &[1, 3, 1, 3, 5, 53, 69]),
    (7, 55, &[1, 1, 5, 5, 23, 33, 13]),
    (7, 56, &[1, 1, 7, 7, 1, 61, 123]),
    (7, 59, &[1, 1, 7, 9, 13, 61, 49]),
    (7, 62, &[1, 3, 3, 5, 3, 55, 33]),
    (8, 14, &[1, 3, 1, 15, 31, 13, 49, 245]),
    (8, 21, &[1, 3, 5, 15, 31, 59, 63, 97]),
    (8, 22, &[1, 3, 1, 11, 11, 11, 77, 249]),
];

/// Largest supported dimensionality.
pub const MAX_DIMS: usize = DIRECTIONS.len() + 1;

/// Unscrambled Sobol generator over `[0, 1)^D`.
#[derive(Clone, Debug)]
pub struct Sobol {
    directions: Vec<[u32; BITS]>,
    state: Vec<u32>,
    index: u64,
}

impl Sobol {
    pub fn new(dims: usize) -> Result<Self> {
        if dims == 0 || dims > MAX_DIMS {
            return Err(Error::UnsupportedDimension {
                dim: dims,
                reason: format!("Sobol direction numbers cover 1..={MAX_DIMS} dimensions"),
            });
        }
        let mut directions = Vec::with_capacity(dims);
        directions.push(std::array::from_fn(|k| 1u32 << (BITS - 1 - k)));
        for &(s, a, m) in &DIRECTIONS[..dims - 1] {
            directions.push(direction_numbers(s as usize, a, m));
        }
        Ok(Sobol {
            directions,
            state: vec![0; dims],
            index: 0,
        })
    }

    pub fn dims(&self) -> usize {
        self.directions.len()
    }

    /// Next point; the first call returns the origin.
    pub fn next_point(&mut self) -> Vec<f64> {
        assert!(self.index < (1u64 << BITS), "Sobol sequence exhausted");
        let point = self
            .state
            .iter()
            .map(|&x| x as f64 / (1u64 << BITS) as f64)
            .collect();
        // Gray-code update: flip the direction number at the lowest zero bit.
        let c = (self.index as u32).trailing_ones() as usize;
        if c < BITS {
            for (x, v) in self.state.iter_mut().zip(&self.directions) {
                *x ^= v[c];
            }
        }
        self.index += 1;
        point
    }
}

impl Iterator for Sobol {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        (self.index < (1u64 << BITS)).then(|| self.next_point())
    }
}

fn direction_numbers(s: usize, a: u32, m: &[u32]) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    for k in 0..BITS {
        v[k] = if k < s {
            m[k] << (BITS - 1 - k)
        } else {
            let mut x = v[k - s] ^ (v[k - s] >> s);
            for l in 1..s {
                if (a >> (s - 1 - l)) & 1 == 1 {
                    x ^= v[k - l];
                }
            }
            x
        };
    }
    v
}

/// `count` Sobol points mapped from the unit cube into `space`.
///
/// With `skip_initial` the origin is dropped and the first returned point is
/// the sequence's second element.
pub fn sobol_grid(space: &ConfigSpace, count: usize, skip_initial: bool) -> Result<Vec<Config>> {
    Ok(sobol_unit(space.len(), count, skip_initial)?
        .iter()
        .map(|u| space.from_unit(u))
        .collect())
}

/// Raw unit-cube Sobol points.
pub fn sobol_unit(dims: usize, count: usize, skip_initial: bool) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Err(Error::invalid("Sobol grid needs count >= 1"));
    }
    let mut gen = Sobol::new(dims)?;
    if skip_initial {
        gen.next_point();
    }
    Ok((0..count).map(|_| gen.next_point()).collect())
}

/// Grid size used for offline data collection: 100 points per dimension.
pub fn default_grid_size(space: &ConfigSpace) -> usize {
    100 * space.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_prefix() {
        let s = ConfigSpace::unit(1);
        let g = sobol_grid(&s, 3, true).unwrap();
        assert_eq!(g, vec![Config(vec![0.5]), Config(vec![0.75]), Config(vec![0.25])]);
        assert_eq!(sobol_grid(&s, 1, false).unwrap(), vec![Config(vec![0.0])]);
    }

    // Frozen from an independent Joe-Kuo reference generator (unscrambled).
    #[test]
    fn matches_reference_points() {
        let pts = sobol_unit(3, 8, false).unwrap();
        let expected = [
            [0.0, 0.0, 0.0],
            [0.5, 0.5, 0.5],
            [0.75, 0.25, 0.25],
            [0.25, 0.75, 0.75],
            [0.375, 0.375, 0.625],
            [0.875, 0.875, 0.125],
            [0.625, 0.125, 0.875],
            [0.125, 0.625, 0.375],
        ];
        for (p, e) in pts.iter().zip(expected.iter()) {
            assert_eq!(p.as_slice(), e.as_slice());
        }
    }

    #[test]
    fn default_sizes() {
        assert_eq!(default_grid_size(&ConfigSpace::unit(2)), 200);
        assert_eq!(default_grid_size(&ConfigSpace::unit(6)), 600);
        assert_eq!(default_grid_size(&ConfigSpace::unit(1)), 100);
    }

    #[test]
    fn two_dims_balanced_halves() {
        let pts = sobol_unit(2, 200, true).unwrap();
        let mut seen = std::collections::HashSet::new();
        for p in &pts {
            assert!(seen.insert((p[0].to_bits(), p[1].to_bits())));
        }
        for axis in 0..2 {
            let low = pts.iter().filter(|p| p[axis] < 0.5).count();
            assert_eq!(low, 100);
        }
    }

    #[test]
    fn unsupported_dimension() {
        assert!(matches!(
            Sobol::new(MAX_DIMS + 1),
            Err(Error::UnsupportedDimension { .. })
        ));
        assert!(MAX_DIMS >= 21);
    }
}
