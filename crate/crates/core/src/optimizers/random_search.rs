use rand_chacha::ChaCha8Rng;

use super::{uniform_point, Evaluator};
use crate::error::Result;

/// I.i.d. uniform configurations.
pub fn run_random_search(ev: &mut Evaluator, rng: &mut ChaCha8Rng) -> Result<()> {
    let d = ev.dims();
    while !ev.done() {
        let u = uniform_point(d, rng);
        ev.eval(&u)?;
    }
    Ok(())
}
