//! Branch-free `tanh` for the network's hidden layers.
//!
//! Uses only arithmetic so that loops over activations vectorize; accuracy is
//! within a few ulps of the platform `tanh`.

const LOG2E: f64 = std::f64::consts::LOG2_E;
const LN2_HI: f64 = 6.931_471_803_691_238_164_90e-1;
const LN2_LO: f64 = 1.908_214_929_270_587_700_02e-10;
/// Adding and subtracting this rounds to the nearest integer.
const ROUND: f64 = 6_755_399_441_055_744.0;
const SPLIT: f64 = 0.625;

/// `e^r` for `|r| ≤ ln2/2`.
#[inline(always)]
fn exp_reduced(r: f64) -> f64 {
    const C: [f64; 14] = [
        1.0,
        1.0,
        1.0 / 2.0,
        1.0 / 6.0,
        1.0 / 24.0,
        1.0 / 120.0,
        1.0 / 720.0,
        1.0 / 5040.0,
        1.0 / 40320.0,
        1.0 / 362_880.0,
        1.0 / 3_628_800.0,
        1.0 / 39_916_800.0,
        1.0 / 479_001_600.0,
        1.0 / 6_227_020_800.0,
    ];
    let mut p = C[13];
    for c in C[..13].iter().rev() {
        p = p * r + c;
    }
    p
}

/// `e^z − 1` for `0 ≤ z ≤ 0.16`.
#[inline(always)]
fn expm1_small(z: f64) -> f64 {
    const C: [f64; 10] = [
        1.0,
        1.0 / 2.0,
        1.0 / 6.0,
        1.0 / 24.0,
        1.0 / 120.0,
        1.0 / 720.0,
        1.0 / 5040.0,
        1.0 / 40320.0,
        1.0 / 362_880.0,
        1.0 / 3_628_800.0,
    ];
    let mut p = C[9];
    for c in C[..9].iter().rev() {
        p = p * z + c;
    }
    p * z
}

#[inline(always)]
pub fn tanh(x: f64) -> f64 {
    let a = x.abs();

    // |x| < SPLIT: tanh = m / (m + 2) with m = e^{2|x|} − 1, from a series at
    // 2|x|/8 and three doublings m ← m (m + 2).
    let mut m = expm1_small(0.25 * a.min(SPLIT));
    for _ in 0..3 {
        m *= m + 2.0;
    }

    // Otherwise: tanh = (1 − e) / (1 + e) with e = e^{−2|x|}.
    let y = -2.0 * a.clamp(SPLIT, 20.0);
    let shifted = y * LOG2E + ROUND;
    let k = shifted - ROUND;
    let r = (y - k * LN2_HI) - k * LN2_LO;
    // The low mantissa bits of `shifted` hold k; rebuild 2^k from them.
    let scale = f64::from_bits(
        shifted
            .to_bits()
            .wrapping_sub(ROUND.to_bits())
            .wrapping_add(1023)
            << 52,
    );
    let e = exp_reduced(r) * scale;

    let (num, den) = if a < SPLIT { (m, m + 2.0) } else { (1.0 - e, 1.0 + e) };
    let t = num / den;
    if x.is_nan() {
        x
    } else {
        t.copysign(x)
    }
}

#[inline(always)]
fn tanh_loop(values: &mut [f64]) {
    for v in values {
        *v = tanh(*v);
    }
}

// Same operations as `tanh_loop` (no fused multiply-adds), only wider vectors,
// so results are bit-identical.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn tanh_loop_avx2(values: &mut [f64]) {
    tanh_loop(values)
}

pub fn tanh_in_place(values: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports AVX2.
            unsafe { tanh_loop_avx2(values) };
            return;
        }
    }
    tanh_loop(values)
}
