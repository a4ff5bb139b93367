//! Counter-based random number stream.
//!
//! Every value is a pure function of `(seed, counter)`, so any entry of a
//! random matrix can be generated independently of the others: the stream
//! has O(1) random access, trials parallelize without coordination, and the
//! output is reproducible across platforms and thread counts.
//!
//! The algorithm is SplitMix64 (Steele, Lea & Vigna): the value at counter
//! `t` is `mix64(seed + (t + 1) * GOLDEN)`, which is exactly the (t+1)-th
//! output of a sequential SplitMix64 generator seeded with `seed`. Gaussian
//! variates map one uniform to one normal through the Wichura AS 241
//! (PPND16) inverse CDF, and Rademacher variates use the top bit of the
//! same stream, so equal seeds give identical sequences entry for entry.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic stream addressed by a 64-bit counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    seed: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        CounterRng { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Raw 64-bit value at position `counter`.
    #[inline]
    pub fn value(&self, counter: u64) -> u64 {
        mix64(self.seed.wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    /// Uniform variate in the open interval (0, 1) with 53-bit resolution.
    #[inline]
    pub fn uniform(&self, counter: u64) -> f64 {
        ((self.value(counter) >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal variate via the inverse CDF of the uniform at `counter`.
    #[inline]
    pub fn normal(&self, counter: u64) -> f64 {
        inverse_normal_cdf(self.uniform(counter))
    }

    /// Rademacher variate (+1 or -1) from one bit of the stream.
    #[inline]
    pub fn sign(&self, counter: u64) -> f64 {
        if self.value(counter) >> 63 == 1 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Seed for an independent sub-stream, e.g. one trial of a Monte Carlo run.
///
/// Defined as `mix64(master ^ (index + 1) * GOLDEN)`. Distinct indices give
/// distinct seeds for a fixed master seed, and the derivation is stable
/// across platforms.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(master ^ index.wrapping_add(1).wrapping_mul(GOLDEN))
}

/// Inverse of the standard normal CDF (Wichura's algorithm AS 241, PPND16),
/// accurate to about 1e-16 relative error over (0, 1).
pub fn inverse_normal_cdf(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "inverse normal CDF requires p in (0,1)");
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-r.ln()).sqrt();
    let num = if r <= 5.0 {
        r -= 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        r -= 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -num
    } else {
        num
    }
}

#[inline]
fn poly(coeffs: &[f64; 8], x: f64) -> f64 {
    // Horner evaluation, highest degree first.
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

const A: [f64; 8] = [
    3.387_132_872_796_366_608e0,
    1.331_416_678_917_843_774_5e2,
    1.971_590_950_306_551_442_7e3,
    1.373_169_376_550_946_112_5e4,
    4.592_195_393_154_987_145_7e4,
    6.726_577_092_700_870_085_3e4,
    3.343_057_558_358_812_810_5e4,
    2.509_080_928_730_122_672_7e3,
];

const B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091_125_2e1,
    6.871_870_074_920_579_083e2,
    5.394_196_021_424_751_107_7e3,
    2.121_379_430_158_659_586_7e4,
    3.930_789_580_009_271_061e4,
    2.872_908_573_572_194_267_4e4,
    5.226_495_278_852_854_561e3,
];

const C: [f64; 8] = [
    1.423_437_110_749_683_577_34e0,
    4.630_337_846_156_545_295_9e0,
    5.769_497_221_460_691_405_5e0,
    3.647_848_324_763_204_605_04e0,
    1.270_458_252_452_368_382_58e0,
    2.417_807_251_774_506_117_7e-1,
    2.272_384_498_926_918_458_33e-2,
    7.745_450_142_783_414_076_4e-4,
];

const D: [f64; 8] = [
    1.0,
    2.053_191_626_637_758_821_87e0,
    1.676_384_830_183_803_849_4e0,
    6.897_673_349_851_000_045_5e-1,
    1.481_039_764_274_800_745_9e-1,
    1.519_866_656_361_645_719_66e-2,
    5.475_938_084_995_344_946e-4,
    1.050_750_071_644_416_843_24e-9,
];

const E: [f64; 8] = [
    6.657_904_643_501_103_777_2e0,
    5.463_784_911_164_114_369_9e0,
    1.784_826_539_917_291_335_8e0,
    2.965_605_718_285_048_912_3e-1,
    2.653_218_952_657_612_309_3e-2,
    1.242_660_947_388_078_438_6e-3,
    2.711_555_568_743_487_578_15e-5,
    2.010_334_399_292_288_132_65e-7,
];

const F: [f64; 8] = [
    1.0,
    5.998_322_065_558_879_376_9e-1,
    1.369_298_809_227_358_053_1e-1,
    1.487_536_129_085_061_485_25e-2,
    7.868_691_311_456_132_591e-4,
    1.846_318_317_510_054_681_8e-5,
    1.421_511_758_316_445_888_7e-7,
    2.044_263_103_389_939_785_64e-15,
];
