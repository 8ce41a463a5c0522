use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizers::Method;
use crate::tasks::Objective;

/// Evaluations needed to reach a target; `runtime == None` means censored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuntimeRecord {
    pub method: Method,
    pub task: String,
    pub seed: u64,
    pub target: f64,
    pub runtime: Option<usize>,
}

/// 1-based index of the first value `≤ target`.
pub fn runtime_to_target(values: &[f64], target: f64) -> Option<usize> {
    values.iter().position(|&y| y <= target).map(|i| i + 1)
}

/// Linearly interpolated quantiles of `values`.
pub fn quantiles(values: &[f64], qs: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    qs.iter()
        .map(|&q| {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
        })
        .collect()
}

/// Noiseless task values on the probe grid (native units), optionally reduced
/// to `reduce_to` evenly spaced quantiles.
pub fn make_targets(task: &dyn Objective, grid: &[Vec<f64>], reduce_to: Option<usize>) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::invalid("probe grid is empty"));
    }
    let values = grid
        .iter()
        .map(|x| task.evaluate_noiseless(x))
        .collect::<Result<Vec<f64>>>()?;
    Ok(match reduce_to {
        None => values,
        Some(0) => return Err(Error::invalid("quantile count must be >= 1")),
        Some(1) => quantiles(&values, &[0.5]),
        Some(k) => {
            let qs: Vec<f64> = (0..k).map(|i| i as f64 / (k - 1) as f64).collect();
            quantiles(&values, &qs)
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EcdfCurve {
    pub budgets: Vec<usize>,
    pub fractions: Vec<f64>,
}

/// Fraction of records solved within each budget. Censored records never count.
pub fn ecdf(records: &[RuntimeRecord], budgets: &[usize]) -> Result<EcdfCurve> {
    if records.is_empty() {
        return Err(Error::invalid("no runtime records"));
    }
    let mut runtimes: Vec<usize> = records.iter().filter_map(|r| r.runtime).collect();
    runtimes.sort_unstable();
    let mut budgets = budgets.to_vec();
    budgets.sort_unstable();
    budgets.dedup();
    let fractions = budgets
        .iter()
        .map(|&b| runtimes.partition_point(|&r| r <= b) as f64 / records.len() as f64)
        .collect();
    Ok(EcdfCurve { budgets, fractions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sobol::sobol_grid;
    use crate::space::ConfigSpace;
    use crate::tasks::FnObjective;
    use proptest::prelude::*;

    fn rec(runtime: Option<usize>) -> RuntimeRecord {
        RuntimeRecord {
            method: Method::RandomSearch,
            task: "t".into(),
            seed: 0,
            target: 0.0,
            runtime,
        }
    }

    #[test]
    fn first_hit() {
        let y = [0.9, 0.5, 0.7, 0.3];
        assert_eq!(runtime_to_target(&y, 0.5), Some(2));
        assert_eq!(runtime_to_target(&y, 0.1), None);
        assert_eq!(runtime_to_target(&y, f64::INFINITY), Some(1));
    }

    #[test]
    fn constant_task_targets() {
        let f = FnObjective::new(2, |_| 4.25);
        let grid: Vec<Vec<f64>> = sobol_grid(&ConfigSpace::unit(2), 200, true).unwrap().into_iter().map(|c| c.0).collect();
        let t = make_targets(&f, &grid, None).unwrap();
        assert_eq!(t.len(), 200);
        assert!(t.iter().all(|&v| v == 4.25));
        assert!(make_targets(&f, &[], None).is_err());
    }

    #[test]
    fn quantile_reduction() {
        assert_eq!(quantiles(&[5.0, 1.0, 3.0, 2.0, 4.0], &[0.0, 0.5, 1.0]), vec![1.0, 3.0, 5.0]);
        let f = FnObjective::new(1, |x| x[0]);
        let grid: Vec<Vec<f64>> = (0..=10).map(|i| vec![i as f64 / 10.0]).collect();
        let t = make_targets(&f, &grid, Some(3)).unwrap();
        assert_eq!(t, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn counting() {
        let r = [rec(Some(1)), rec(Some(2)), rec(None), rec(Some(4))];
        let c = ecdf(&r, &[0, 2, 4, 100]).unwrap();
        assert_eq!(c.fractions, vec![0.0, 0.5, 0.75, 0.75]);
        let full = ecdf(&r[..2], &[2]).unwrap();
        assert_eq!(full.fractions, vec![1.0]);
        assert!(ecdf(&[], &[1]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn ecdf_is_monotone_and_censoring_never_helps(
            runtimes in prop::collection::vec(prop::option::of(1usize..60), 1..40),
        ) {
            let records: Vec<RuntimeRecord> = runtimes.iter().map(|&r| rec(r)).collect();
            let budgets: Vec<usize> = (0..70).collect();
            let c = ecdf(&records, &budgets).unwrap();
            for w in c.fractions.windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
            prop_assert!(c.fractions.iter().all(|f| (0.0..=1.0).contains(f)));
            let mut more = records.clone();
            more.push(rec(None));
            let d = ecdf(&more, &budgets).unwrap();
            for (a, b) in c.fractions.iter().zip(&d.fractions) {
                prop_assert!(b <= a);
            }
        }

        #[test]
        fn runtime_is_monotone_in_target(
            ys in prop::collection::vec(-10.0f64..10.0, 1..50),
            t in -10.0f64..10.0,
            dt in 0.0f64..5.0,
        ) {
            let tight = runtime_to_target(&ys, t);
            let loose = runtime_to_target(&ys, t + dt);
            match (tight, loose) {
                (Some(a), Some(b)) => prop_assert!(b <= a),
                (Some(_), None) => prop_assert!(false, "looser target censored"),
                _ => {}
            }
        }
    }
}
