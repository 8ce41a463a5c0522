use metabench::optimizers::{expected_improvement, run_method, Method, OptimizerOptions};
use metabench::space::{ConfigSpace, Dimension};
use metabench::tasks::{FnObjective, Objective};
use proptest::prelude::*;
use rand::RngCore;

/// Shifted sphere on a mixed linear/log space; the centre may lie outside it.
struct Bowl {
    space: ConfigSpace,
    centre: (f64, f64),
}

impl Objective for Bowl {
    fn space(&self) -> &ConfigSpace {
        &self.space
    }

    fn evaluate(&self, x: &[f64], _rng: &mut dyn RngCore) -> metabench::Result<f64> {
        self.evaluate_noiseless(x)
    }

    fn evaluate_noiseless(&self, x: &[f64]) -> metabench::Result<f64> {
        self.space.check(x)?;
        Ok((x[0] - self.centre.0).powi(2) + (x[1].log10() - self.centre.1).powi(2))
    }
}

fn bowl() -> Bowl {
    bowl_at((1.0, -2.0))
}

fn bowl_at(centre: (f64, f64)) -> Bowl {
    Bowl {
        centre,
        space: ConfigSpace::new(vec![
            Dimension::linear("a", -3.0, 4.0),
            Dimension::log("b", 1e-5, 1e-1),
        ])
        .unwrap(),
    }
}

/// Model-based methods with their samplers cut to a few steps: the
/// invariants checked here do not depend on the quality of the model.
fn tiny_options() -> OptimizerOptions {
    let mut o = OptimizerOptions::default();
    o.bnn.fast = true;
    o.bnn.burn_in_per_point = 10;
    o.bnn.sample_steps = 40;
    o.bnn.samples = 4;
    o.bnn.candidates = 50;
    o.gp.burn_in = 4;
    o.gp.samples = 2;
    o.gp.thin = 1;
    o.gp.candidates = 50;
    o
}

fn check_trajectory(method: Method, seed: u64, budget: usize) -> Result<(), TestCaseError> {
    // Odd seeds put the optimum beyond the upper corner so proposals hit the bounds.
    let f = if seed % 2 == 0 { bowl() } else { bowl_at((10.0, 3.0)) };
    let opts = tiny_options();
    let t = run_method(method, &f, budget, seed, &opts).unwrap();
    prop_assert_eq!(t.len(), budget);
    prop_assert_eq!(t.incumbent.len(), budget);
    for x in &t.xs {
        prop_assert!(f.space().contains(x), "{:?} outside the space", x);
    }
    for (i, w) in t.incumbent.windows(2).enumerate() {
        prop_assert!(w[1] <= w[0]);
        prop_assert_eq!(w[1], w[0].min(t.ys[i + 1]));
    }
    prop_assert_eq!(t.incumbent[0], t.ys[0]);
    Ok(())
}

macro_rules! trajectory_suite {
    ($($name:ident => $method:expr,)*) => {
        proptest! {
            #![proptest_config(ProptestConfig::with_cases(1000))]
            $(
                #[test]
                fn $name(seed in any::<u64>(), budget in 12usize..24) {
                    check_trajectory($method, seed, budget)?;
                }
            )*
        }
    };
}

trajectory_suite! {
    random_search_stays_in_bounds => Method::RandomSearch,
    de_stays_in_bounds => Method::DifferentialEvolution,
    cmaes_stays_in_bounds => Method::CmaEs,
    tpe_stays_in_bounds => Method::Tpe,
    smac_stays_in_bounds => Method::SmacLite,
    gp_bo_stays_in_bounds => Method::GpBo,
    bnn_bo_stays_in_bounds => Method::BnnBo,
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn runs_are_reproducible(method_idx in 0usize..7, seed in any::<u64>()) {
        let method = Method::ALL[method_idx];
        let f = bowl();
        let opts = tiny_options();
        prop_assert_eq!(run_method(method, &f, 16, seed, &opts).unwrap(), run_method(method, &f, 16, seed, &opts).unwrap());
    }

    #[test]
    fn every_method_starts_from_the_same_point(seed in any::<u64>()) {
        let f = bowl();
        let opts = tiny_options();
        let first: Vec<Vec<f64>> = Method::ALL
            .iter()
            .map(|&m| run_method(m, &f, 12, seed, &opts).unwrap().xs[0].clone())
            .collect();
        for x in &first {
            prop_assert_eq!(x, &first[0]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn ei_is_nonnegative_and_monotone_in_sigma(
        mu in -5.0f64..5.0,
        best in -5.0f64..5.0,
        s1 in 0.0f64..3.0,
        ds in 0.0f64..3.0,
    ) {
        let a = expected_improvement(mu, s1, best);
        let b = expected_improvement(mu, s1 + ds, best);
        prop_assert!(a >= 0.0 && b >= 0.0);
        prop_assert!(b >= a - 1e-12, "EI({mu}, {s1}) = {a} > EI({mu}, {}) = {b}", s1 + ds);
    }
}

#[test]
fn gp_bo_beats_random_search_on_the_sphere() {
    let f = FnObjective::new(2, |x| (x[0] - 0.37).powi(2) + (x[1] - 0.61).powi(2));
    let opts = OptimizerOptions::default();
    let median = |m: Method| {
        let mut v: Vec<f64> = (0..20).map(|s| run_method(m, &f, 100, s, &opts).unwrap().best()).collect();
        v.sort_by(f64::total_cmp);
        0.5 * (v[9] + v[10])
    };
    let gp = median(Method::GpBo);
    let rs = median(Method::RandomSearch);
    assert!(gp <= rs, "gp-bo {gp:e} rs {rs:e}");
}
