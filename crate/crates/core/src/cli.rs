//! Command-line front end. [`run`] parses arguments, executes one subcommand and
//! returns the process exit code: 0 on success, 1 on a domain violation or
//! failed check, 2 on a usage error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::correlations::{
    chsh_value, cirelson_check, joint_correlations, optimal_settings, sharp_correlations,
    tsirelson_configuration, CorrelationSet, Settings,
};
use crate::error::Error;
use crate::joint::{
    admissibility, bound_lhs, general_joint_povm, general_min_eigenvalue, is_saturating,
    max_symmetric_alpha, product_form_check, JointSpec,
};
use crate::povm::{outcome_probabilities, projective_povm, validate, Povm};
use crate::qubit::{QubitState, UnitVector3, Vector3};
use crate::sampler::{
    chi_square_gof, estimate_alpha, format_sig17, random_bloch_vectors, sample_povm,
    sample_two_party, signalling_experiment, ChiSquareTest, SampleStats, SeededStream,
};
use crate::scenarios::{
    bb84_eve, cloning_joint, min_cloning_gap, theta_grid, Bb84EveReport, CloningScenario,
};
use crate::uncertainty::{all_relations, UncertaintyReport};

const OPTIMAL_SYMMETRIC: &str = "optimal-symmetric";

#[derive(Debug, Parser)]
#[command(
    name = "spinjoint",
    version,
    about = "Joint measurements of two spin-1/2 components"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the sharpness bound and validate the resulting POVM.
    Validate {
        #[command(flatten)]
        spec: SpecArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Tabulate the optimal symmetric sharpness over a grid of angles in [0, 180] degrees.
    ScanTheta {
        #[arg(long, default_value_t = 181)]
        points: usize,
        /// Cloner shrink factor for the gap column.
        #[arg(long, default_value_t = 2.0 / 3.0)]
        eta: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// CHSH value at the optimal settings for observer 2, with the sharp reference.
    Chsh {
        #[command(flatten)]
        spec: SpecArgs,
        /// Also estimate the correlations from this many singlet trials per setting.
        #[arg(long)]
        n: Option<u64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Sample outcomes of the joint (or a sharp) measurement on one state.
    Sample {
        #[command(flatten)]
        spec: SpecArgs,
        /// Bloch vector of the measured state.
        #[arg(long, value_parser = parse_vector, default_value = "0,0,0", allow_hyphen_values = true)]
        bloch: Vector3<f64>,
        #[arg(long, value_enum, default_value_t = Measurement::Joint)]
        measure: Measurement,
        #[arg(long, default_value_t = 100_000)]
        n: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Attempt to signal from observer 2 to observer 1 through the singlet.
    Signal {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 1_000_000)]
        n: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Evaluate every uncertainty relation on seeded random states.
    Uncertainty {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 1000)]
        states: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Eavesdropping on BB84 with a joint measurement of both bases.
    Bb84 {
        /// Bloch-sphere angle between the bases; both 90 and 45 are run when omitted.
        #[arg(long)]
        theta_deg: Option<f64>,
        #[arg(long, default_value_t = 100_000)]
        n: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Compare joint measurement through a universal cloner with the optimum.
    Cloning {
        #[arg(long, default_value_t = 2.0 / 3.0)]
        eta: f64,
        #[arg(long, default_value_t = 90.0)]
        theta_deg: f64,
        #[arg(long, default_value_t = 181)]
        points: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Measurement {
    Joint,
    /// Sharp spin along `a`.
    Projective,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum AlphaArg {
    OptimalSymmetric,
    Value(f64),
}

#[derive(Debug, Args)]
struct SpecArgs {
    /// First direction, three comma-separated numbers (normalized).
    #[arg(long, value_parser = parse_direction, default_value = "0,0,1", allow_hyphen_values = true)]
    a: UnitVector3<f64>,
    /// Second direction; defaults to 90 degrees from `a`.
    #[arg(long, value_parser = parse_direction, allow_hyphen_values = true)]
    a_prime: Option<UnitVector3<f64>>,
    /// Angle from `a` to `a'` in degrees, in the plane of `a` and `y x a`.
    #[arg(long, conflicts_with = "a_prime", allow_hyphen_values = true)]
    theta_deg: Option<f64>,
    /// Number in [-1, 1] or `optimal-symmetric`.
    #[arg(long, value_parser = parse_alpha, default_value = OPTIMAL_SYMMETRIC, allow_hyphen_values = true)]
    alpha: AlphaArg,
    /// Defaults to `--alpha`.
    #[arg(long, value_parser = parse_alpha, allow_hyphen_values = true)]
    alpha_prime: Option<AlphaArg>,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

fn parse_vector(s: &str) -> Result<Vector3<f64>, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated numbers, got {s:?}"));
    }
    let mut v = [0.0; 3];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p.parse::<f64>().map_err(|e| format!("{p:?}: {e}"))?;
        if !slot.is_finite() {
            return Err(format!("{p:?} is not finite"));
        }
    }
    Ok(Vector3::new(v[0], v[1], v[2]))
}

fn parse_direction(s: &str) -> Result<UnitVector3<f64>, String> {
    UnitVector3::normalize(parse_vector(s)?).map_err(|e| e.to_string())
}

fn parse_alpha(s: &str) -> Result<AlphaArg, String> {
    if s == OPTIMAL_SYMMETRIC {
        return Ok(AlphaArg::OptimalSymmetric);
    }
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(AlphaArg::Value(x)),
        _ => Err(format!(
            "expected a number or {OPTIMAL_SYMMETRIC:?}, got {s:?}"
        )),
    }
}

enum CliError {
    Usage(String),
    Domain(Error),
    Check(String),
    Io(io::Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Domain(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(io::Error::other(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(io::Error::other(e))
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn second_direction(args: &SpecArgs) -> UnitVector3<f64> {
    if let Some(ap) = args.a_prime {
        return ap;
    }
    let a = args.a;
    let Some(deg) = args.theta_deg else {
        return in_plane_normal(&a);
    };
    let theta = deg.to_radians();
    let n = in_plane_normal(&a);
    UnitVector3::normalize(a.scale(theta.cos()) + n.scale(theta.sin()))
        .expect("orthonormal combination")
}

/// Unit vector orthogonal to `a` in the plane of `a` and `y x a`; `x` when `a` is along `y`.
fn in_plane_normal(a: &UnitVector3<f64>) -> UnitVector3<f64> {
    UnitVector3::normalize(UnitVector3::<f64>::y().cross(a)).unwrap_or_else(|_| UnitVector3::x())
}

fn build_spec(args: &SpecArgs) -> CliResult<JointSpec<f64>> {
    let a = args.a;
    let a_prime = second_direction(args);
    let alpha_prime_arg = args.alpha_prime.unwrap_or(args.alpha);
    let optimal = || max_symmetric_alpha(a.cross(&a_prime).norm().atan2(a.dot(&a_prime)));
    let resolve = |x: AlphaArg| match x {
        AlphaArg::OptimalSymmetric => optimal(),
        AlphaArg::Value(v) => v,
    };
    Ok(JointSpec::new(
        a,
        a_prime,
        resolve(args.alpha),
        resolve(alpha_prime_arg),
    )?)
}

fn open_output<'w>(
    output: &OutputArgs,
    stdout: &'w mut dyn Write,
) -> CliResult<Box<dyn Write + 'w>> {
    Ok(match &output.out {
        Some(path) => Box::new(io::BufWriter::new(File::create(path)?)),
        None => Box::new(stdout),
    })
}

fn write_json<S: Serialize>(out: &mut dyn Write, value: &S) -> CliResult {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn write_csv(out: &mut dyn Write, header: &[&str], rows: &[Vec<String>]) -> CliResult {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn num(x: f64) -> String {
    format_sig17(x)
}

fn vec_str(v: &Vector3<f64>) -> String {
    format!("{};{};{}", num(v.x), num(v.y), num(v.z))
}

/// Parses `args` (including the program name) and runs one subcommand.
pub fn run<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            2
        }
        Err(CliError::Domain(e)) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
        Err(CliError::Check(msg)) => {
            let _ = writeln!(stderr, "check failed: {msg}");
            1
        }
        Err(CliError::Io(e)) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}

fn execute(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult {
    match command {
        Command::Validate { spec, output } => cmd_validate(&spec, &output, stdout),
        Command::ScanTheta {
            points,
            eta,
            output,
        } => cmd_scan_theta(points, eta, &output, stdout),
        Command::Chsh {
            spec,
            n,
            seed,
            output,
        } => cmd_chsh(&spec, n, seed, &output, stdout),
        Command::Sample {
            spec,
            bloch,
            measure,
            n,
            seed,
            output,
        } => cmd_sample(&spec, &bloch, measure, n, seed, &output, stdout),
        Command::Signal {
            spec,
            n,
            seed,
            output,
        } => cmd_signal(&spec, n, seed, &output, stdout),
        Command::Uncertainty {
            spec,
            states,
            seed,
            output,
        } => cmd_uncertainty(&spec, states, seed, &output, stdout),
        Command::Bb84 {
            theta_deg,
            n,
            seed,
            output,
        } => cmd_bb84(theta_deg, n, seed, &output, stdout, stderr),
        Command::Cloning {
            eta,
            theta_deg,
            points,
            output,
        } => cmd_cloning(eta, theta_deg, points, &output, stdout, stderr),
    }
}

#[derive(Serialize)]
struct SpecSummary {
    a: Vector3<f64>,
    a_prime: Vector3<f64>,
    alpha: f64,
    alpha_prime: f64,
    theta_deg: f64,
}

impl SpecSummary {
    fn new(spec: &JointSpec<f64>) -> Self {
        Self {
            a: spec.a().get(),
            a_prime: spec.a_prime().get(),
            alpha: spec.alpha(),
            alpha_prime: spec.alpha_prime(),
            theta_deg: spec.theta().to_degrees(),
        }
    }

    fn rows(&self) -> Vec<Vec<String>> {
        vec![
            vec!["a".into(), vec_str(&self.a)],
            vec!["a_prime".into(), vec_str(&self.a_prime)],
            vec!["alpha".into(), num(self.alpha)],
            vec!["alpha_prime".into(), num(self.alpha_prime)],
            vec!["theta_deg".into(), num(self.theta_deg)],
        ]
    }
}

#[derive(Serialize)]
struct EffectSummary {
    label: String,
    min_eigenvalue: f64,
    max_eigenvalue: f64,
}

#[derive(Serialize)]
struct ValidateReport {
    spec: SpecSummary,
    bound_lhs: f64,
    product_form: f64,
    general_min_eigenvalue: f64,
    admissible: bool,
    predicates_agree: bool,
    saturating: bool,
    povm_valid: bool,
    completeness_defect: f64,
    effects: Vec<EffectSummary>,
}

fn cmd_validate(args: &SpecArgs, output: &OutputArgs, stdout: &mut dyn Write) -> CliResult {
    let spec = build_spec(args)?;
    let adm = admissibility(&spec);
    let general = general_joint_povm(&spec);
    let check = validate(&Povm::new(crate::joint::general_joint_effects(&spec)));
    let report = ValidateReport {
        spec: SpecSummary::new(&spec),
        bound_lhs: bound_lhs(&spec),
        product_form: product_form_check(&spec),
        general_min_eigenvalue: general_min_eigenvalue(&spec),
        admissible: adm.by_diagonals,
        predicates_agree: adm.agree(),
        saturating: is_saturating(&spec),
        povm_valid: check.passed,
        completeness_defect: check.completeness_defect,
        effects: check
            .effects
            .iter()
            .map(|e| EffectSummary {
                label: e.label.clone(),
                min_eigenvalue: e.min_eigenvalue,
                max_eigenvalue: e.max_eigenvalue,
            })
            .collect(),
    };
    let mut out = open_output(output, stdout)?;
    match output.format.unwrap_or(Format::Json) {
        Format::Json => write_json(&mut out, &report)?,
        Format::Csv => {
            let mut rows = report.spec.rows();
            rows.extend([
                vec!["bound_lhs".into(), num(report.bound_lhs)],
                vec!["product_form".into(), num(report.product_form)],
                vec![
                    "general_min_eigenvalue".into(),
                    num(report.general_min_eigenvalue),
                ],
                vec!["admissible".into(), report.admissible.to_string()],
                vec![
                    "predicates_agree".into(),
                    report.predicates_agree.to_string(),
                ],
                vec!["saturating".into(), report.saturating.to_string()],
                vec!["povm_valid".into(), report.povm_valid.to_string()],
                vec![
                    "completeness_defect".into(),
                    num(report.completeness_defect),
                ],
            ]);
            for e in &report.effects {
                rows.push(vec![
                    format!("min_eigenvalue[{}]", e.label),
                    num(e.min_eigenvalue),
                ]);
            }
            write_csv(&mut out, &["key", "value"], &rows)?;
        }
    }
    out.flush()?;
    general?;
    if !check.passed {
        return Err(CliError::Check(format!(
            "POVM failed validation (completeness defect {}, min eigenvalue {})",
            check.completeness_defect,
            check.min_eigenvalue()
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct ScanRow {
    theta: f64,
    max_symmetric_alpha: f64,
    product_form_slack: f64,
    cloning_gap: f64,
}

fn cmd_scan_theta(
    points: usize,
    eta: f64,
    output: &OutputArgs,
    stdout: &mut dyn Write,
) -> CliResult {
    if points < 2 {
        return Err(CliError::Usage(format!(
            "--points must be at least 2, got {points}"
        )));
    }
    let mut rows = Vec::with_capacity(points);
    for theta in theta_grid::<f64>(points) {
        let alpha = max_symmetric_alpha(theta);
        let spec = JointSpec::new(UnitVector3::z(), UnitVector3::polar_xz(theta), alpha, alpha)?;
        let slack = crate::uncertainty::product_form(&spec)?.slack;
        rows.push(ScanRow {
            theta,
            max_symmetric_alpha: alpha,
            product_form_slack: slack,
            cloning_gap: cloning_joint(theta, eta)?.gap,
        });
    }
    let mut out = open_output(output, stdout)?;
    match output.format.unwrap_or(Format::Csv) {
        Format::Json => write_json(&mut out, &rows)?,
        Format::Csv => {
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        num(r.theta),
                        num(r.max_symmetric_alpha),
                        num(r.product_form_slack),
                        num(r.cloning_gap),
                    ]
                })
                .collect();
            write_csv(
                &mut out,
                &[
                    "theta",
                    "max_symmetric_alpha",
                    "product_form_slack",
                    "cloning_gap",
                ],
                &table,
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct EmpiricalChsh {
    n_per_setting: u64,
    seed: u64,
    generator: String,
    correlations: CorrelationSet<f64>,
    chsh: f64,
    stderr: f64,
}

#[derive(Serialize)]
struct ChshReport {
    spec: SpecSummary,
    settings: Settings<f64>,
    correlations: CorrelationSet<f64>,
    chsh: f64,
    bound: f64,
    sharp_reference_chsh: f64,
    cirelson_bound: f64,
    empirical: Option<EmpiricalChsh>,
}

fn empirical_chsh(
    spec: &JointSpec<f64>,
    settings: &Settings<f64>,
    n: u64,
    seed: u64,
) -> CliResult<EmpiricalChsh> {
    let povm = general_joint_povm(spec)?;
    let stream = SeededStream::new(seed, 0);
    let tb = sample_two_party(&povm, &settings.b, n, &stream.substream(0))?;
    let tbp = sample_two_party(&povm, &settings.b_prime, n, &stream.substream(1))?;
    let (e_ab, s1) = tb.correlation::<f64>(0);
    let (e_apb, s2) = tb.correlation::<f64>(1);
    let (e_abp, s3) = tbp.correlation::<f64>(0);
    let (e_apbp, s4) = tbp.correlation::<f64>(1);
    let correlations = CorrelationSet {
        e_ab,
        e_apb,
        e_abp,
        e_apbp,
    };
    Ok(EmpiricalChsh {
        n_per_setting: n,
        seed,
        generator: tb.metadata.generator.clone(),
        chsh: chsh_value(&correlations),
        correlations,
        stderr: (s1 * s1 + s2 * s2 + s3 * s3 + s4 * s4).sqrt(),
    })
}

fn cmd_chsh(
    args: &SpecArgs,
    n: Option<u64>,
    seed: u64,
    output: &OutputArgs,
    stdout: &mut dyn Write,
) -> CliResult {
    let spec = build_spec(args)?;
    let settings = optimal_settings(&spec)?;
    let correlations = joint_correlations(&spec, &settings)?;
    let chsh = chsh_value(&correlations);
    let (z, x, ref_settings) = tsirelson_configuration::<f64>();
    let sharp = cirelson_check(&sharp_correlations(&z, &x, &ref_settings));
    let empirical = n
        .map(|n| empirical_chsh(&spec, &settings, n, seed))
        .transpose()?;
    let report = ChshReport {
        spec: SpecSummary::new(&spec),
        settings,
        correlations,
        chsh,
        bound: 2.0,
        sharp_reference_chsh: sharp.chsh,
        cirelson_bound: sharp.bound,
        empirical,
    };
    let mut out = open_output(output, stdout)?;
    match output.format.unwrap_or(Format::Json) {
        Format::Json => write_json(&mut out, &report)?,
        Format::Csv => {
            let c = &report.correlations;
            let mut rows = report.spec.rows();
            rows.extend([
                vec!["b".into(), vec_str(&report.settings.b)],
                vec!["b_prime".into(), vec_str(&report.settings.b_prime)],
                vec!["e_ab".into(), num(c.e_ab)],
                vec!["e_apb".into(), num(c.e_apb)],
                vec!["e_abp".into(), num(c.e_abp)],
                vec!["e_apbp".into(), num(c.e_apbp)],
                vec!["chsh".into(), num(report.chsh)],
                vec![
                    "sharp_reference_chsh".into(),
                    num(report.sharp_reference_chsh),
                ],
            ]);
            if let Some(e) = &report.empirical {
                rows.extend([
                    vec!["empirical_chsh".into(), num(e.chsh)],
                    vec!["empirical_stderr".into(), num(e.stderr)],
                    vec!["seed".into(), e.seed.to_string()],
                    vec!["n_per_setting".into(), e.n_per_setting.to_string()],
                ]);
            }
            write_csv(&mut out, &["key", "value"], &rows)?;
        }
    }
    out.flush()?;
    if chsh > 2.0 + 1e-10 {
        return Err(CliError::Check(format!("CHSH value {chsh} exceeds 2")));
    }
    Ok(())
}

#[derive(Serialize)]
struct SampleReport {
    spec: SpecSummary,
    bloch: Vector3<f64>,
    probabilities: Vec<(String, f64)>,
    sample: SampleStats<f64>,
    chi_square: ChiSquareTest,
    alpha_estimate: Option<(f64, f64)>,
}

#[allow(clippy::too_many_arguments)]
fn cmd_sample(
    args: &SpecArgs,
    bloch: &Vector3<f64>,
    measure: Measurement,
    n: u64,
    seed: u64,
    output: &OutputArgs,
    stdout: &mut dyn Write,
) -> CliResult {
    let spec = build_spec(args)?;
    let state = QubitState::from_bloch(bloch)?;
    let povm = match measure {
        Measurement::Joint => general_joint_povm(&spec)?,
        Measurement::Projective => projective_povm(&spec.a()),
    };
    let probabilities: Vec<(String, f64)> = outcome_probabilities(&povm, &state)?
        .into_iter()
        .map(|o| (o.label, o.probability))
        .collect();
    let sample = sample_povm(&povm, &state, n, &SeededStream::new(seed, 0))?;
    let counts: Vec<u64> = sample.counts.iter().map(|c| c.count).collect();
    let probs: Vec<f64> = probabilities.iter().map(|p| p.1).collect();
    let chi_square = chi_square_gof(&counts, &probs);
    let sharp = state.spin_expectation(&spec.a());
    let alpha_estimate = (measure == Measurement::Joint && sharp.abs() > 1e-6)
        .then(|| estimate_alpha(&sample, sharp));
    let mut out = open_output(output, stdout)?;
    match output.format.unwrap_or(Format::Json) {
        Format::Json => write_json(
            &mut out,
            &SampleReport {
                spec: SpecSummary::new(&spec),
                bloch: *bloch,
                probabilities,
                sample,
                chi_square,
                alpha_estimate,
            },
        )?,
        Format::Csv => sample.write_csv(&mut out)?,
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SignalReport {
    spec: SpecSummary,
    settings: Settings<f64>,
    n: u64,
    seed: u64,
    p_equal_given_b: f64,
    p_equal_given_b_prime: f64,
    z_score: f64,
    threshold: f64,
    result: crate::sampler::SignallingResult<f64>,
}

fn cmd_signal(
    args: &SpecArgs,
    n: u64,
    seed: u64,
    output: &OutputArgs,
    stdout: &mut dyn Write,
) -> CliResult {
    let spec = build_spec(args)?;
    let settings = optimal_settings(&spec)?;
    let result = signalling_experiment(&spec, &settings, n, &SeededStream::new(seed, 0))?;
    let z = result.z_score;
    let report = SignalReport {
        spec: SpecSummary::new(&spec),
        settings,
        n,
        seed,
        p_equal_given_b: result.under_b.mean,
        p_equal_given_b_prime: result.under_b_prime.mean,
        z_score: z,
        threshold: 5.0,
        result,
    };
    let mut out = open_output(output, stdout)?;
    match output.format.unwrap_or(Format::Json) {
        Format::Json => write_json(&mut out, &report)?,
        Format::Csv => {
            let row = |name: &str, s: &SampleStats<f64>| {
                vec![
                    name.to_string(),
                    s.n.to_string(),
                    s.count("equal").to_string(),
                    num(s.mean),
                    num(s.stderr),
                    s.metadata.seed.to_string(),
                    s.metadata.stream_id.to_string(),
                ]
            };
            write_csv(
                &mut out,
                &[
                    "setting",
                    "n",
                    "equal",
                    "frequency",
                    "stderr",
                    "seed",
                    "stream_id",
                ],
                &[
                    row("b", &report.result.under_b),
                    row("b_prime", &report.result.under_b_prime),
                ],
            )?;
            writeln!(out, "# z_score {}", num(z))?;
        }
    }
    out.flush()?;
    if z.abs() >= 5.0 {
        return Err(CliError::Check(format!("|z| = {} reaches 5", z.abs())));
    }
    Ok(())
}

#[derive(Serialize)]
struct UncertaintyRow {
    state: usize,
    bloch: Vector3<f64>,
    #[serde(flatten)]
    report: UncertaintyReport<f64>,
}

fn cmd_uncertainty(
    args: &SpecArgs,
    states: usize,
    seed: u64,
    output: &OutputArgs,
    stdout: &mut dyn Write,
) -> CliResult {
    let spec = build_spec(args)?;
    let mut rows = Vec::with_capacity(states * 6);
    for (i, m) in random_bloch_vectors::<f64>(&SeededStream::new(seed, 0), states, false)
        .into_iter()
        .enumerate()
    {
        let state = QubitState::from_bloch(&m)?;
        for report in all_relations(&spec, &state)? {
            rows.push(UncertaintyRow {
                state: i,
                bloch: m,
                report,
            });
        }
    }
    let worst = rows
        .iter()
        .map(|r| r.report.slack)
        .fold(f64::INFINITY, f64::min);
    let mut out = open_output(output, stdout)?;
    match output.format.unwrap_or(Format::Csv) {
        Format::Json => write_json(&mut out, &rows)?,
        Format::Csv => {
            writeln!(out, "# {{\"seed\":{seed},\"states\":{states}}}")?;
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.state.to_string(),
                        r.report.relation_id.to_string(),
                        num(r.report.lhs),
                        num(r.report.rhs),
                        num(r.report.slack),
                    ]
                })
                .collect();
            write_csv(
                &mut out,
                &["state", "relation_id", "lhs", "rhs", "slack"],
                &table,
            )?;
        }
    }
    out.flush()?;
    if worst < -1e-10 {
        return Err(CliError::Check(format!(
            "minimum slack {worst} below -1e-10"
        )));
    }
    Ok(())
}

fn cmd_bb84(
    theta_deg: Option<f64>,
    n: u64,
    seed: u64,
    output: &OutputArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> CliResult {
    let angles = match theta_deg {
        Some(t) => vec![t],
        None => vec![90.0, 45.0],
    };
    let mut reports: Vec<Bb84EveReport<f64>> = Vec::new();
    for (i, deg) in angles.iter().enumerate() {
        reports.push(bb84_eve(
            deg.to_radians(),
            n,
            &SeededStream::new(seed, i as u64),
        )?);
    }
    writeln!(
        stderr,
        "{:>9} {:>9} {:>10} {:>10} {:>9} {:>7}",
        "theta_deg", "alpha", "analytic", "empirical", "stderr", "z"
    )?;
    for r in &reports {
        writeln!(
            stderr,
            "{:>9.3} {:>9.6} {:>10.6} {:>10.6} {:>9.2e} {:>7.3}",
            r.theta.to_degrees(),
            r.alpha,
            r.guess_success_prob_after_announcement,
            r.empirical_success,
            r.stderr,
            r.z_score()
        )?;
    }
    let mut out = open_output(output, stdout)?;
    match output.format.unwrap_or(Format::Json) {
        Format::Json => write_json(&mut out, &reports)?,
        Format::Csv => {
            let table: Vec<Vec<String>> = reports
                .iter()
                .map(|r| {
                    vec![
                        num(r.theta),
                        num(r.alpha),
                        num(r.guess_success_prob_after_announcement),
                        num(r.empirical_success),
                        num(r.stderr),
                        r.trials.to_string(),
                        r.metadata.seed.to_string(),
                        r.metadata.stream_id.to_string(),
                    ]
                })
                .collect();
            write_csv(
                &mut out,
                &[
                    "theta",
                    "alpha",
                    "analytic_success",
                    "empirical_success",
                    "stderr",
                    "trials",
                    "seed",
                    "stream_id",
                ],
                &table,
            )?;
        }
    }
    out.flush()?;
    if let Some(r) = reports.iter().find(|r| r.z_score().abs() >= 5.0) {
        return Err(CliError::Check(format!(
            "empirical success {} is 5 sigma from analytic",
            r.empirical_success
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct CloningReport {
    at_theta: CloningScenario<f64>,
    grid_points: usize,
    min_gap_on_grid: CloningScenario<f64>,
}

fn cmd_cloning(
    eta: f64,
    theta_deg: f64,
    points: usize,
    output: &OutputArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> CliResult {
    if points < 2 {
        return Err(CliError::Usage(format!(
            "--points must be at least 2, got {points}"
        )));
    }
    let report = CloningReport {
        at_theta: cloning_joint(theta_deg.to_radians(), eta)?,
        grid_points: points,
        min_gap_on_grid: min_cloning_gap(eta, points)?,
    };
    writeln!(
        stderr,
        "{:<16} {:>9} {:>9} {:>12} {:>12}",
        "", "theta_deg", "eta", "alpha_opt", "gap"
    )?;
    for (name, s) in [
        ("requested angle", &report.at_theta),
        ("grid minimum", &report.min_gap_on_grid),
    ] {
        writeln!(
            stderr,
            "{:<16} {:>9.3} {:>9.6} {:>12.8} {:>12.8}",
            name,
            s.theta.to_degrees(),
            s.eta,
            s.alpha_optimal,
            s.gap
        )?;
    }
    let mut out = open_output(output, stdout)?;
    match output.format.unwrap_or(Format::Json) {
        Format::Json => write_json(&mut out, &report)?,
        Format::Csv => {
            let row = |name: &str, s: &CloningScenario<f64>| {
                vec![
                    name.to_string(),
                    num(s.theta),
                    num(s.eta),
                    num(s.alpha_clone),
                    num(s.alpha_optimal),
                    num(s.gap),
                ]
            };
            write_csv(
                &mut out,
                &[
                    "case",
                    "theta",
                    "eta",
                    "alpha_clone",
                    "alpha_optimal",
                    "gap",
                ],
                &[
                    row("requested", &report.at_theta),
                    row("grid_minimum", &report.min_gap_on_grid),
                ],
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(
            std::iter::once("spinjoint").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn vector_parsing() {
        assert_eq!(
            parse_vector(" 1, -2 ,3e0").unwrap(),
            Vector3::new(1.0, -2.0, 3.0)
        );
        assert!(parse_vector("1,2").is_err());
        assert!(parse_vector("1,2,x").is_err());
        assert!(parse_vector("1,2,inf").is_err());
        assert!(parse_direction("0,0,0").is_err());
        assert_eq!(
            parse_alpha("optimal-symmetric"),
            Ok(AlphaArg::OptimalSymmetric)
        );
        assert_eq!(parse_alpha("-0.5"), Ok(AlphaArg::Value(-0.5)));
        assert!(parse_alpha("nan").is_err());
    }

    #[test]
    fn theta_places_second_direction() {
        let (code, out, _) = run_capture(&["validate", "--theta-deg", "60", "--format", "csv"]);
        assert_eq!(code, 0);
        assert!(
            out.contains("theta_deg,5.9999999999999993e1")
                || out.contains("theta_deg,6.0000000000000000e1"),
            "{out}"
        );
        let a = UnitVector3::<f64>::y();
        let n = in_plane_normal(&a);
        assert_eq!(n.get(), Vector3::unit_x());
    }

    #[test]
    fn validate_exit_codes() {
        assert_eq!(run_capture(&["validate", "--alpha", "0.70710678"]).0, 0);
        let (code, _, err) = run_capture(&["validate", "--alpha", "0.8"]);
        assert_eq!(code, 1);
        assert!(err.contains("BoundViolated"), "{err}");
        assert_eq!(run_capture(&["validate", "--a", "1,2"]).0, 2);
        assert_eq!(
            run_capture(&["validate", "--a-prime", "1,0,0", "--theta-deg", "30"]).0,
            2
        );
        assert_eq!(run_capture(&["validate", "--alpha", "1.5"]).0, 1);
        assert_eq!(run_capture(&["bogus"]).0, 2);
        assert_eq!(run_capture(&["--help"]).0, 0);
    }

    #[test]
    fn scan_rejects_tiny_grid() {
        assert_eq!(run_capture(&["scan-theta", "--points", "1"]).0, 2);
        let (code, out, _) = run_capture(&["scan-theta", "--points", "3"]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().count(), 4);
        assert!(out.starts_with("theta,max_symmetric_alpha,product_form_slack,cloning_gap\n"));
    }

    #[test]
    fn cloning_rejects_large_eta() {
        let (code, _, err) = run_capture(&["cloning", "--eta", "0.9"]);
        assert_eq!(code, 1);
        assert!(
            err.contains("EtaOutOfRange") || err.contains("eta"),
            "{err}"
        );
    }
}
