use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::Objective;
use crate::error::{Error, Result};
use crate::space::ConfigSpace;

/// `f(x) = (a x − 2)² sin(b x − 4)` on `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForresterTask {
    pub a: f64,
    pub b: f64,
    #[serde(skip, default = "unit_line")]
    space: ConfigSpace,
}

fn unit_line() -> ConfigSpace {
    ConfigSpace::unit(1)
}

impl ForresterTask {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        for (name, v) in [("a", a), ("b", b)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfBounds {
                    name: name.into(),
                    value: v,
                    lower: 0.0,
                    upper: 1.0,
                });
            }
        }
        Ok(ForresterTask {
            a,
            b,
            space: unit_line(),
        })
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfBounds {
                name: "x".into(),
                value: x,
                lower: 0.0,
                upper: 1.0,
            });
        }
        Ok((self.a * x - 2.0).powi(2) * (self.b * x - 4.0).sin())
    }

    /// Global minimum over `[0, 1]`: dense scan refined by golden-section search.
    pub fn minimum(&self) -> f64 {
        let f = |x: f64| (self.a * x - 2.0).powi(2) * (self.b * x - 4.0).sin();
        let n = 10_000;
        let best = (0..=n)
            .map(|i| i as f64 / n as f64)
            .min_by(|p, q| f(*p).total_cmp(&f(*q)))
            .unwrap_or(0.0);
        let (mut lo, mut hi) = ((best - 1.0 / n as f64).max(0.0), (best + 1.0 / n as f64).min(1.0));
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..60 {
            let c = hi - g * (hi - lo);
            let d = lo + g * (hi - lo);
            if f(c) < f(d) {
                hi = d;
            } else {
                lo = c;
            }
        }
        f(0.5 * (lo + hi)).min(f(best))
    }
}

impl Objective for ForresterTask {
    fn space(&self) -> &ConfigSpace {
        &self.space
    }

    fn evaluate(&self, x: &[f64], _rng: &mut dyn RngCore) -> Result<f64> {
        self.evaluate_noiseless(x)
    }

    fn evaluate_noiseless(&self, x: &[f64]) -> Result<f64> {
        if x.len() != 1 {
            return Err(Error::DimensionMismatch(format!(
                "Forrester tasks are one-dimensional, got {} coordinates",
                x.len()
            )));
        }
        self.value(x[0])
    }
}

/// `count` tasks with `a, b ~ U[0, 1]` i.i.d.
pub fn forrester_family<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Result<Vec<ForresterTask>> {
    if count == 0 {
        return Err(Error::invalid("count must be >= 1"));
    }
    Ok((0..count)
        .map(|_| {
            let a = rng.random::<f64>();
            let b = rng.random::<f64>();
            ForresterTask {
                a,
                b,
                space: unit_line(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const FOUR_SIN_MINUS_FOUR: f64 = 3.027_209_981_231_713;

    #[test]
    fn closed_form_values() {
        let t = ForresterTask::new(1.0, 1.0).unwrap();
        assert!(t.value(4.0 - std::f64::consts::PI).unwrap().abs() < 1e-12);
        assert!((t.value(0.0).unwrap() - FOUR_SIN_MINUS_FOUR).abs() < 1e-12);
        let flat = ForresterTask::new(0.0, 0.0).unwrap();
        for x in [0.0, 0.3, 1.0] {
            assert!((flat.value(x).unwrap() - FOUR_SIN_MINUS_FOUR).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_domain() {
        let t = ForresterTask::new(0.5, 0.5).unwrap();
        assert!(t.value(1.01).is_err());
        assert!(ForresterTask::new(1.5, 0.0).is_err());
    }

    #[test]
    fn family_moments_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let fam = forrester_family(1000, &mut rng).unwrap();
        assert_eq!(fam.len(), 1000);
        let mean_a = fam.iter().map(|t| t.a).sum::<f64>() / 1000.0;
        assert!((0.46..=0.54).contains(&mean_a));
        let one = |s| forrester_family(1, &mut ChaCha8Rng::seed_from_u64(s)).unwrap();
        assert_eq!(one(5), one(5));
        assert!(forrester_family(0, &mut rng).is_err());
    }

    #[test]
    fn minimum_is_below_every_grid_value() {
        let t = ForresterTask::new(0.9, 0.7).unwrap();
        let m = t.minimum();
        for i in 0..=1000 {
            assert!(m <= t.value(i as f64 / 1000.0).unwrap() + 1e-12);
        }
    }
}
