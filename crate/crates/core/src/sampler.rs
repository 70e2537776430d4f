//! Seeded Monte Carlo sampling of POVM outcomes and of the two-party singlet experiment.
//!
//! Draws come from `ChaCha8Rng`, keyed by `(seed, stream_id)`. Work is split
//! into fixed-size chunks; chunk `k` jumps straight to its word offset in the
//! keystream, so merged tallies equal a single sequential pass regardless of
//! how many rayon workers run.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::correlations::{singlet, Settings};
use crate::error::{Error, Result};
use crate::joint::{general_joint_povm, outcome_value, JointSpec};
use crate::povm::{outcome_probabilities, projective_povm, two_party_probabilities, Povm};
use crate::qubit::{QubitState, UnitVector3, Vector3};
use crate::scalar::Real;

/// Recorded in every stochastic output.
pub const GENERATOR_NAME: &str = "ChaCha8Rng";

const CHUNK: u64 = 1 << 16;
// one f64 draw consumes one u64, i.e. two 32-bit keystream words
const WORDS_PER_DRAW: u64 = 2;

/// Identifies an independent, reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeededStream {
    pub seed: u64,
    pub stream_id: u64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl SeededStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// A child stream, distinct for each `k`, derived deterministically from this one.
    pub fn substream(&self, k: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id: splitmix64(self.stream_id ^ splitmix64(k.wrapping_add(1))),
        }
    }

    /// Generator positioned at the `draw`-th `f64` of this stream.
    fn rng_at(&self, draw: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng.set_word_pos(u128::from(draw) * u128::from(WORDS_PER_DRAW));
        rng
    }
}

/// Runs `trials` trials, each consuming exactly `draws_per_trial` uniforms.
///
/// `step` must draw exactly that many values from the generator per call.
pub(crate) fn run_chunked<A, I, F, M>(
    stream: &SeededStream,
    trials: u64,
    draws_per_trial: u64,
    init: I,
    step: F,
    merge: M,
) -> A
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(&mut A, &mut ChaCha8Rng) + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    let chunks = trials.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|k| {
            let start = k * CHUNK;
            let len = CHUNK.min(trials - start);
            let mut rng = stream.rng_at(start * draws_per_trial);
            let mut acc = init();
            for _ in 0..len {
                step(&mut acc, &mut rng);
            }
            acc
        })
        .reduce(&init, &merge)
}

/// Cumulative distribution with slightly negative entries treated as zero.
pub(crate) fn cumulative<T: Real>(probs: &[T]) -> Vec<f64> {
    let mut acc = 0.0;
    probs
        .iter()
        .map(|p| {
            acc += p.to_f64_lossy().max(0.0);
            acc
        })
        .collect()
}

/// Inverse-CDF lookup. `u` beyond the last cumulative value (rounding) maps to
/// the last outcome with nonzero weight.
pub(crate) fn pick(cdf: &[f64], u: f64) -> usize {
    let total = cdf.last().copied().unwrap_or(0.0);
    let u = u * total;
    match cdf.iter().position(|&c| u < c) {
        Some(i) => i,
        None => {
            let mut last = cdf.len() - 1;
            while last > 0 && cdf[last] == cdf[last - 1] {
                last -= 1;
            }
            last
        }
    }
}

fn draw_counts(cdf: &[f64], n: u64, stream: &SeededStream) -> Vec<u64> {
    let k = cdf.len();
    run_chunked(
        stream,
        n,
        1,
        || vec![0u64; k],
        |acc, rng| acc[pick(cdf, rng.random::<f64>())] += 1,
        |mut a, b| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            a
        },
    )
}

/// `count` Bloch vectors drawn uniformly from the unit ball (or its surface
/// when `pure`), by rejection from the enclosing cube.
pub fn random_bloch_vectors<T: Real>(
    stream: &SeededStream,
    count: usize,
    pure: bool,
) -> Vec<Vector3<T>> {
    let mut rng = stream.rng_at(0);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let r: f64 = v.norm();
        if r > 1.0 || (pure && r < 1e-3) {
            continue;
        }
        let v = if pure { v.scale(1.0 / r) } else { v };
        out.push(Vector3::new(T::lit(v.x), T::lit(v.y), T::lit(v.z)));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCount {
    pub label: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleMetadata {
    pub generator: String,
    pub seed: u64,
    pub stream_id: u64,
    pub n: u64,
}

impl SampleMetadata {
    pub(crate) fn new(stream: &SeededStream, n: u64) -> Self {
        Self {
            generator: GENERATOR_NAME.into(),
            seed: stream.seed,
            stream_id: stream.stream_id,
            n,
        }
    }
}

/// Tallies plus the sample mean of a per-label value.
///
/// For POVM samples the value is the first `+`/`-` slot of the label
/// (`A_J` for four-outcome labels).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleStats<T> {
    pub n: u64,
    pub counts: Vec<LabelCount>,
    pub mean: T,
    pub variance: T,
    pub stderr: T,
    pub metadata: SampleMetadata,
}

impl<T: Real> SampleStats<T> {
    fn from_counts(
        labels: &[String],
        counts: &[u64],
        values: &[T],
        metadata: SampleMetadata,
    ) -> Self {
        let n = counts.iter().sum::<u64>();
        let nf = T::lit(n as f64);
        let (s1, s2) =
            counts
                .iter()
                .zip(values)
                .fold((T::zero(), T::zero()), |(s1, s2), (&c, &v)| {
                    let c = T::lit(c as f64);
                    (s1 + c * v, s2 + c * v * v)
                });
        let mean = s1 / nf;
        let variance = (s2 / nf - mean * mean).max(T::zero());
        Self {
            n,
            counts: labels
                .iter()
                .zip(counts)
                .map(|(l, &c)| LabelCount {
                    label: l.clone(),
                    count: c,
                })
                .collect(),
            mean,
            variance,
            stderr: (variance / nf).sqrt(),
            metadata,
        }
    }

    pub fn count(&self, label: &str) -> u64 {
        self.counts
            .iter()
            .find(|c| c.label == label)
            .map_or(0, |c| c.count)
    }

    pub fn frequency(&self, label: &str) -> T {
        T::lit(self.count(label) as f64) / T::lit(self.n as f64)
    }

    /// Mean and standard error of the `slot`-th `+-1` label character.
    pub fn slot_mean(&self, slot: usize) -> (T, T) {
        let values: Vec<T> = self
            .counts
            .iter()
            .map(|c| T::lit(f64::from(outcome_value(&c.label, slot).unwrap_or(0))))
            .collect();
        let labels: Vec<String> = self.counts.iter().map(|c| c.label.clone()).collect();
        let counts: Vec<u64> = self.counts.iter().map(|c| c.count).collect();
        let s = Self::from_counts(&labels, &counts, &values, self.metadata.clone());
        (s.mean, s.stderr)
    }

    /// CSV with a `# {json metadata}` first line, then `label,count,frequency`.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut out = out;
        writeln!(
            out,
            "# {}",
            serde_json::to_string(&self.metadata).map_err(std::io::Error::other)?
        )?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["label", "count", "frequency"])?;
        for c in &self.counts {
            let freq = c.count as f64 / self.n as f64;
            w.write_record([c.label.clone(), c.count.to_string(), format_sig17(freq)])?;
        }
        w.flush()
    }
}

/// Locale-free scientific notation with 17 significant digits.
pub fn format_sig17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Draws `n` outcomes of `povm` on `state` by inverse CDF over the Born probabilities.
pub fn sample_povm<T: Real>(
    povm: &Povm<T>,
    state: &QubitState<T>,
    n: u64,
    stream: &SeededStream,
) -> Result<SampleStats<T>> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let outcomes = outcome_probabilities(povm, state)?;
    let probs: Vec<T> = outcomes.iter().map(|o| o.probability).collect();
    let counts = draw_counts(&cumulative(&probs), n, stream);
    let labels = povm.labels();
    let values: Vec<T> = labels
        .iter()
        .map(|l| T::lit(f64::from(outcome_value(l, 0).unwrap_or(0))))
        .collect();
    Ok(SampleStats::from_counts(
        &labels,
        &counts,
        &values,
        SampleMetadata::new(stream, n),
    ))
}

/// Joint tallies for observer 1's POVM against observer 2's sharp `+-` outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoPartyTally {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    pub n: u64,
    pub metadata: SampleMetadata,
}

impl TwoPartyTally {
    /// Empirical `E = mean(X * B)` with `X` the `slot`-th character of the row
    /// label, and its standard error.
    pub fn correlation<T: Real>(&self, slot: usize) -> (T, T) {
        let (mut s1, mut s2) = (0.0, 0.0);
        for (i, row) in self.row_labels.iter().enumerate() {
            let x = f64::from(outcome_value(row, slot).unwrap_or(0));
            for (j, col) in self.col_labels.iter().enumerate() {
                let v = x * f64::from(outcome_value(col, 0).unwrap_or(0));
                let c = self.counts[i][j] as f64;
                s1 += c * v;
                s2 += c * v * v;
            }
        }
        let n = self.n as f64;
        let mean = s1 / n;
        let var = (s2 / n - mean * mean).max(0.0);
        (T::lit(mean), T::lit((var / n).sqrt()))
    }

    /// Number of trials where observer 1's two slots agree.
    pub fn equal_slot_count(&self) -> u64 {
        self.row_labels
            .iter()
            .zip(&self.counts)
            .filter(|(l, _)| outcome_value(l, 0) == outcome_value(l, 1))
            .map(|(_, row)| row.iter().sum::<u64>())
            .sum()
    }
}

/// Samples the singlet experiment: `povm1` on qubit 1, sharp spin along `setting` on qubit 2.
pub fn sample_two_party<T: Real>(
    povm1: &Povm<T>,
    setting: &UnitVector3<T>,
    n: u64,
    stream: &SeededStream,
) -> Result<TwoPartyTally> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let table = two_party_probabilities(povm1, &projective_povm(setting), &singlet())?;
    let flat = draw_counts(&cumulative(&table.flattened()), n, stream);
    let cols = table.col_labels.len();
    Ok(TwoPartyTally {
        counts: flat.chunks(cols).map(<[u64]>::to_vec).collect(),
        row_labels: table.row_labels,
        col_labels: table.col_labels,
        n,
        metadata: SampleMetadata::new(stream, n),
    })
}

/// Outcome of trying to signal through observer 2's choice of setting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignallingResult<T> {
    /// Indicator of `A_J = A'_J` while observer 2 measures `b`; `mean` is the proportion.
    pub under_b: SampleStats<T>,
    pub under_b_prime: SampleStats<T>,
    /// Pooled two-proportion z statistic.
    pub z_score: T,
}

/// Pooled two-proportion z statistic; zero when both samples are degenerate.
pub fn two_proportion_z(x1: u64, n1: u64, x2: u64, n2: u64) -> f64 {
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let pooled = (x1 + x2) as f64 / (n1f + n2f);
    let se = (pooled * (1.0 - pooled) * (1.0 / n1f + 1.0 / n2f)).sqrt();
    if se == 0.0 {
        return 0.0;
    }
    (x1 as f64 / n1f - x2 as f64 / n2f) / se
}

/// Runs `n` singlet trials with observer 2 on `b` (substream 0) and `n` on `b'`
/// (substream 1), and compares observer 1's rate of `A_J = A'_J`.
pub fn signalling_experiment<T: Real>(
    spec: &JointSpec<T>,
    settings: &Settings<T>,
    n: u64,
    stream: &SeededStream,
) -> Result<SignallingResult<T>> {
    let povm = general_joint_povm(spec)?;
    let labels = ["equal".to_string(), "opposite".to_string()];
    let values = [T::one(), T::zero()];
    let run = |setting: &UnitVector3<T>, s: SeededStream| -> Result<(u64, SampleStats<T>)> {
        let tally = sample_two_party(&povm, setting, n, &s)?;
        let same = tally.equal_slot_count();
        Ok((
            same,
            SampleStats::from_counts(&labels, &[same, n - same], &values, tally.metadata),
        ))
    };
    let (xb, under_b) = run(&settings.b, stream.substream(0))?;
    let (xbp, under_b_prime) = run(&settings.b_prime, stream.substream(1))?;
    Ok(SignallingResult {
        under_b,
        under_b_prime,
        z_score: T::lit(two_proportion_z(xb, n, xbp, n)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson goodness-of-fit of observed counts against probabilities.
///
/// Zero-probability cells are excluded from the degrees of freedom; any count
/// in such a cell gives `p = 0`.
pub fn chi_square_gof<T: Real>(counts: &[u64], probs: &[T]) -> ChiSquareTest {
    let n = counts.iter().sum::<u64>() as f64;
    let mut statistic = 0.0;
    let mut cells = 0usize;
    for (&c, p) in counts.iter().zip(probs) {
        let expected = n * p.to_f64_lossy().max(0.0);
        if expected <= 0.0 {
            if c > 0 {
                statistic = f64::INFINITY;
            }
            continue;
        }
        cells += 1;
        let d = c as f64 - expected;
        statistic += d * d / expected;
    }
    let dof = cells.saturating_sub(1);
    let p_value = if statistic.is_infinite() {
        0.0
    } else if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64).map_or(f64::NAN, |d| d.sf(statistic))
    };
    ChiSquareTest {
        statistic,
        dof,
        p_value,
    }
}

/// `alpha` estimated as the sample mean of `A_J` over the sharp `<a.sigma>`, with its standard error.
pub fn estimate_alpha<T: Real>(stats: &SampleStats<T>, sharp_expectation: T) -> (T, T) {
    let (mean, se) = stats.slot_mean(0);
    (mean / sharp_expectation, se / sharp_expectation.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::joint::{max_symmetric_alpha, optimal_joint_povm};
    use std::f64::consts::FRAC_PI_2;

    fn stream(seed: u64) -> SeededStream {
        SeededStream::new(seed, 0)
    }

    #[test]
    fn chunked_draws_match_a_sequential_pass() {
        let s = SeededStream::new(42, 7);
        let n = 3 * CHUNK + 123;
        let cdf = cumulative(&[0.1, 0.2, 0.3, 0.4]);
        let parallel = draw_counts(&cdf, n, &s);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        rng.set_stream(7);
        let mut sequential = vec![0u64; 4];
        for _ in 0..n {
            sequential[pick(&cdf, rng.random::<f64>())] += 1;
        }
        assert_eq!(parallel, sequential);
    }

    #[test]
    fn merged_tallies_ignore_worker_count() {
        let cdf = cumulative(&[0.25, 0.25, 0.5]);
        let s = stream(9);
        let reference = draw_counts(&cdf, 5 * CHUNK, &s);
        for threads in [1, 2, 5] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            let counts = pool.install(|| draw_counts(&cdf, 5 * CHUNK, &s));
            assert_eq!(counts, reference);
        }
    }

    #[test]
    fn pick_skips_trailing_zero_weight() {
        let cdf = cumulative(&[0.5, 0.5, 0.0]);
        assert_eq!(pick(&cdf, 0.0), 0);
        assert_eq!(pick(&cdf, 0.75), 1);
        assert_eq!(pick(&cdf, 1.0), 1);
    }

    #[test]
    fn deterministic_spin_up_sampling() {
        let povm = projective_povm(&UnitVector3::<f64>::z());
        let up = QubitState::spin_up(&UnitVector3::z());
        let s = sample_povm(&povm, &up, 1000, &stream(1)).unwrap();
        assert_eq!(s.count("+"), 1000);
        assert_eq!(s.mean, 1.0);
        assert_eq!(s.variance, 0.0);
        assert!(matches!(
            sample_povm(&povm, &up, 0, &stream(1)),
            Err(Error::EmptySample)
        ));
    }

    #[test]
    fn identical_seeds_identical_tallies() {
        let povm = projective_povm(&UnitVector3::<f64>::x());
        let st = QubitState::maximally_mixed();
        let a = sample_povm(&povm, &st, 10_000, &stream(5)).unwrap();
        let b = sample_povm(&povm, &st, 10_000, &stream(5)).unwrap();
        let c = sample_povm(&povm, &st, 10_000, &stream(6)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.counts, c.counts);
    }

    #[test]
    fn fair_coin_frequency() {
        let n = 1_000_000;
        let povm = projective_povm(&UnitVector3::<f64>::z());
        let s = sample_povm(&povm, &QubitState::maximally_mixed(), n, &stream(11)).unwrap();
        let sigma = 0.5 / (n as f64).sqrt();
        assert!((s.frequency("+") - 0.5).abs() < 5.0 * sigma);
        assert!((s.stderr - (s.variance / n as f64).sqrt()).abs() < 1e-18);
    }

    #[test]
    fn optimal_povm_quarters_on_mixed_state() {
        let n = 1_000_000;
        let spec = JointSpec::<f64>::optimal_symmetric(UnitVector3::z(), UnitVector3::x());
        let povm = optimal_joint_povm(&spec).unwrap();
        let s = sample_povm(&povm, &QubitState::maximally_mixed(), n, &stream(12)).unwrap();
        let sigma = (0.25f64 * 0.75 / n as f64).sqrt();
        for l in ["++", "--", "+-", "-+"] {
            assert!((s.frequency(l) - 0.25).abs() < 5.0 * sigma, "{l}");
        }
    }

    #[test]
    fn two_party_correlations() {
        let n = 1_000_000;
        let a = UnitVector3::<f64>::normalize(Vector3::new(0.3, 0.1, 0.9)).unwrap();
        let t = sample_two_party(&projective_povm(&a), &a, n, &stream(3)).unwrap();
        let (e, se) = t.correlation::<f64>(0);
        assert_eq!(e, -1.0);
        assert_eq!(se, 0.0);

        let t = sample_two_party(
            &projective_povm(&UnitVector3::<f64>::z()),
            &UnitVector3::x(),
            n,
            &stream(4),
        )
        .unwrap();
        let (e, se) = t.correlation::<f64>(0);
        assert!(e.abs() < 5.0 * se.max(1.0 / (n as f64).sqrt()));

        let spec =
            JointSpec::<f64>::optimal_symmetric(UnitVector3::z(), UnitVector3::polar_xz(1.0));
        let settings = crate::correlations::optimal_settings(&spec).unwrap();
        let t = sample_two_party(
            &optimal_joint_povm(&spec).unwrap(),
            &settings.b,
            n,
            &stream(8),
        )
        .unwrap();
        let (e1, s1) = t.correlation::<f64>(0);
        let (e2, s2) = t.correlation::<f64>(1);
        let target = spec.sum_vector().norm();
        assert!(((e1 + e2).abs() - target).abs() < 5.0 * (s1 + s2));
    }

    #[test]
    fn signalling_fails() {
        let theta = FRAC_PI_2;
        let alpha = max_symmetric_alpha(theta);
        let spec = JointSpec::new(UnitVector3::z(), UnitVector3::x(), alpha, alpha).unwrap();
        let settings = crate::correlations::optimal_settings(&spec).unwrap();
        let r = signalling_experiment(&spec, &settings, 200_000, &stream(21)).unwrap();
        assert!(r.z_score.abs() < 5.0);
        assert!((r.under_b.mean - 0.5).abs() < 5.0 * r.under_b.stderr);
        assert_ne!(
            r.under_b.metadata.stream_id,
            r.under_b_prime.metadata.stream_id
        );
    }

    #[test]
    fn chi_square_edge_cases() {
        let t = chi_square_gof(&[100, 0], &[1.0, 0.0]);
        assert_eq!((t.dof, t.p_value), (0, 1.0));
        let t = chi_square_gof(&[99, 1], &[1.0, 0.0]);
        assert_eq!(t.p_value, 0.0);
        let t = chi_square_gof(&[50, 50], &[0.5, 0.5]);
        assert_eq!(t.statistic, 0.0);
        assert!((t.p_value - 1.0).abs() < 1e-12);
        // statistic 4 on one dof: p = erfc(sqrt 2) = 0.0455
        let t = chi_square_gof(&[60, 40], &[0.5, 0.5]);
        assert!((t.statistic - 4.0).abs() < 1e-12);
        assert!((t.p_value - 0.045500263896).abs() < 1e-9);
    }

    #[test]
    fn csv_export_layout() {
        let povm = projective_povm(&UnitVector3::<f64>::z());
        let s = sample_povm(
            &povm,
            &QubitState::spin_up(&UnitVector3::z()),
            4,
            &SeededStream::new(3, 1),
        )
        .unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "# {\"generator\":\"ChaCha8Rng\",\"seed\":3,\"stream_id\":1,\"n\":4}\n\
             label,count,frequency\n\
             +,4,1.0000000000000000e0\n\
             -,0,0.0000000000000000e0\n"
        );
    }

    #[test]
    fn substreams_are_distinct_and_stable() {
        let s = SeededStream::new(1, 2);
        assert_eq!(s.substream(0), s.substream(0));
        assert_ne!(s.substream(0), s.substream(1));
        assert_ne!(s.substream(0).stream_id, s.stream_id);
    }
}
