//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, SQRT_2};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spinjoint::correlations::{
    born_joint_correlations, chsh_value, joint_correlations, no_signalling_probe, optimal_settings,
    sharp_correlation, sharp_correlation_trace, sharp_correlations, tsirelson_configuration,
    Settings,
};
use spinjoint::joint::{
    admissibility, bound_lhs, boundary_alpha_prime, general_joint_povm, general_min_eigenvalue,
    is_admissible, marginal_effects, max_symmetric_alpha, optimal_joint_povm, product_form_check,
    switch_realization,
};
use spinjoint::povm::{outcome_probabilities, projective_povm, validate};
use spinjoint::qubit::{pauli_dot, ComplexMatrix2};
use spinjoint::sampler::{
    chi_square_gof, estimate_alpha, sample_povm, signalling_experiment, SeededStream,
};
use spinjoint::scenarios::{bb84_eve, cloning_joint};
use spinjoint::uncertainty::{
    all_relations, product_form, robertson, schroedinger, total_joint, RelationId,
};
use spinjoint::{Measurement, Qubit, Spec, Unit3, Vec3};

struct Suite {
    failed: Vec<u32>,
}

impl Suite {
    fn report(&mut self, id: u32, name: &str, pass: bool, detail: String) {
        println!(
            "[{}] AC{id:<2} {name}: {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
        if !pass {
            self.failed.push(id);
        }
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn cube(r: &mut ChaCha8Rng) -> Vec3 {
    Vec3::new(
        r.random_range(-1.0..=1.0),
        r.random_range(-1.0..=1.0),
        r.random_range(-1.0..=1.0),
    )
}

fn unit(r: &mut ChaCha8Rng) -> Unit3 {
    loop {
        let v = cube(r);
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return Unit3::normalize(v).unwrap();
        }
    }
}

fn state(r: &mut ChaCha8Rng) -> Qubit {
    loop {
        let v = cube(r);
        if v.norm() <= 1.0 {
            return Qubit::from_bloch(&v).unwrap();
        }
    }
}

fn non_collinear_pair(r: &mut ChaCha8Rng) -> (Unit3, Unit3) {
    loop {
        let (a, b) = (unit(r), unit(r));
        if a.cross(&b).norm() > 1e-3 {
            return (a, b);
        }
    }
}

/// Admissible spec with `alpha` in `(0, 1]` and `alpha'` a random fraction of its boundary value.
fn admissible_spec(r: &mut ChaCha8Rng) -> Spec {
    let (a, ap) = non_collinear_pair(r);
    let alpha: f64 = r.random_range(0.01..=1.0);
    let hi = boundary_alpha_prime(alpha, a.dot(&ap));
    let frac: f64 = r.random_range(0.01..=1.0);
    let sign = |r: &mut ChaCha8Rng| if r.random_bool(0.5) { 1.0 } else { -1.0 };
    let (s1, s2) = (sign(r), sign(r));
    Spec::new(a, ap, s1 * alpha, s2 * (frac * hi).max(1e-3)).unwrap()
}

fn saturating_spec(r: &mut ChaCha8Rng) -> Spec {
    let (a, ap) = non_collinear_pair(r);
    let alpha: f64 = r.random_range(0.05..0.995);
    Spec::new(a, ap, alpha, boundary_alpha_prime(alpha, a.dot(&ap))).unwrap()
}

fn unsharp(alpha: f64, a: &Unit3, sign: f64) -> ComplexMatrix2<f64> {
    (ComplexMatrix2::identity() + pauli_dot(&a.get()).scale(sign * alpha)).scale(0.5)
}

fn ms(d: Duration) -> String {
    format!("{:.1} ms", d.as_secs_f64() * 1e3)
}

fn ac1(suite: &mut Suite) {
    let t = Instant::now();
    let mut r = rng(1);
    let (mut worst_bound, mut worst_slack) = (0.0f64, f64::NEG_INFINITY);
    for _ in 0..200 {
        let (a, ap) = (unit(&mut r), unit(&mut r));
        let theta = a.cross(&ap).norm().atan2(a.dot(&ap));
        let alpha = max_symmetric_alpha(theta);
        let spec = Spec::new(a, ap, alpha, alpha).unwrap();
        worst_bound = worst_bound.max((bound_lhs(&spec) - 2.0).abs());
        worst_slack = worst_slack.max(product_form(&spec).unwrap().slack.abs());
    }
    let el = t.elapsed();
    suite.report(
        1,
        "bound saturation",
        worst_bound <= 1e-10 && worst_slack <= 1e-10 && el < Duration::from_secs(1),
        format!("200 pairs, max |bound_lhs-2| = {worst_bound:.2e}, max |product slack| = {worst_slack:.2e}, {}", ms(el)),
    );
}

fn ac2(suite: &mut Suite) {
    let t = Instant::now();
    let mut r = rng(2);
    let (mut disagree, mut excluded, mut admissible) = (0usize, 0usize, 0usize);
    for _ in 0..100_000 {
        let a = Unit3::normalize(cube(&mut r)).unwrap();
        let ap = Unit3::normalize(cube(&mut r)).unwrap();
        let spec = Spec::new(a, ap, r.random_range(0.0..=1.0), r.random_range(0.0..=1.0)).unwrap();
        let near = (bound_lhs(&spec) - 2.0).abs() < 1e-9
            || (product_form_check(&spec) - 1.0).abs() < 1e-9
            || general_min_eigenvalue(&spec).abs() < 1e-9;
        if near {
            excluded += 1;
            continue;
        }
        let v = admissibility(&spec);
        admissible += usize::from(v.by_diagonals);
        if !v.agree() {
            disagree += 1;
        }
    }
    let el = t.elapsed();
    suite.report(
        2,
        "three-predicate equivalence",
        disagree == 0 && el < Duration::from_secs(5),
        format!("1e5 samples, {admissible} admissible, {excluded} in boundary band, {disagree} disagreements, {}", ms(el)),
    );
}

fn ac3(suite: &mut Suite) {
    let mut r = rng(3);
    let (mut invalid, mut worst_eig, mut worst_defect, mut worst_marg) =
        (0usize, f64::INFINITY, 0.0f64, 0.0f64);
    for i in 0..1000 {
        let spec = if i % 10 == 0 {
            saturating_spec(&mut r)
        } else {
            admissible_spec(&mut r)
        };
        let povm = general_joint_povm(&spec).unwrap();
        let v = validate(&povm);
        invalid += usize::from(!v.passed);
        worst_eig = worst_eig.min(v.min_eigenvalue());
        worst_defect = worst_defect.max(v.completeness_defect);
        for (slot, alpha, dir) in [
            (0, spec.alpha(), spec.a()),
            (1, spec.alpha_prime(), spec.a_prime()),
        ] {
            let (plus, minus) = marginal_effects(&povm, slot);
            worst_marg = worst_marg
                .max(plus.max_abs_diff(&unsharp(alpha, &dir, 1.0)))
                .max(minus.max_abs_diff(&unsharp(alpha, &dir, -1.0)));
        }
    }
    suite.report(
        3,
        "POVM validity and marginals",
        invalid == 0 && worst_eig >= -1e-10 && worst_defect <= 1e-10 && worst_marg <= 1e-12,
        format!(
            "1e3 specs, {invalid} invalid, min eigenvalue {worst_eig:.2e}, completeness defect {worst_defect:.2e}, marginal error {worst_marg:.2e}"
        ),
    );
}

fn ac4(suite: &mut Suite) {
    let mut r = rng(4);
    let (mut worst_entry, mut worst_p) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let spec = saturating_spec(&mut r);
        let sw = switch_realization(&spec).unwrap();
        let built = sw.povm();
        let target = optimal_joint_povm(&spec).unwrap();
        for e in &target.effects {
            let got = built.effect(&e.label).expect("label present");
            worst_entry = worst_entry.max(got.op.max_abs_diff(&e.op));
        }
        worst_p = worst_p.max((sw.p - 0.5 * spec.sum_vector().norm()).abs());
    }
    suite.report(
        4,
        "switch-realization reconstruction",
        worst_entry <= 1e-12 && worst_p <= 1e-12,
        format!("200 saturating specs, max entry error {worst_entry:.2e}, max |p - |s|/2| {worst_p:.2e}"),
    );
}

fn ac5(suite: &mut Suite) {
    let mut r = rng(5);
    let (mut worst_joint, mut worst_trace) = (0.0f64, 0.0f64);
    let mut exact = true;
    for _ in 0..1000 {
        let spec = admissible_spec(&mut r);
        let settings = Settings {
            b: unit(&mut r),
            b_prime: unit(&mut r),
        };
        let closed = joint_correlations(&spec, &settings).unwrap();
        let born = born_joint_correlations(&spec, &settings).unwrap();
        worst_joint = worst_joint.max(closed.max_abs_diff(&born));
        let (a, b) = (unit(&mut r), unit(&mut r));
        exact &= sharp_correlation(&a, &b) == -a.dot(&b);
        worst_trace = worst_trace.max((sharp_correlation_trace(&a, &b) + a.dot(&b)).abs());
    }
    suite.report(
        5,
        "correlation closed form",
        worst_joint <= 1e-10 && exact && worst_trace <= 1e-12,
        format!(
            "1e3 cases, closed form vs Born trace {worst_joint:.2e}, sharp E == -a.b bitwise: {exact}, sharp 4x4 trace error {worst_trace:.2e}"
        ),
    );
}

fn ac6(suite: &mut Suite) {
    let mut r = rng(6);
    let (mut max_random, mut worst_opt) = (f64::NEG_INFINITY, 0.0f64);
    for _ in 0..10_000 {
        let spec = admissible_spec(&mut r);
        let corr = joint_correlations(
            &spec,
            &Settings {
                b: unit(&mut r),
                b_prime: unit(&mut r),
            },
        )
        .unwrap();
        max_random = max_random.max(chsh_value(&corr));
    }
    for _ in 0..1000 {
        let spec = saturating_spec(&mut r);
        let corr = joint_correlations(&spec, &optimal_settings(&spec).unwrap()).unwrap();
        worst_opt = worst_opt.max((chsh_value(&corr) - 2.0).abs());
    }
    let (z, x, settings) = tsirelson_configuration::<f64>();
    let sharp = chsh_value(&sharp_correlations(&z, &x, &settings));
    let sharp_err = (sharp - 2.0 * SQRT_2).abs();
    suite.report(
        6,
        "CHSH compliance",
        max_random <= 2.0 + 1e-10 && worst_opt <= 1e-10 && sharp_err <= 1e-12,
        format!(
            "max over 1e4 random = {max_random:.12}, max |CHSH-2| at optimum over 1e3 saturating = {worst_opt:.2e}, sharp reference = {sharp:.15} (err {sharp_err:.2e})"
        ),
    );
}

fn ac7(suite: &mut Suite) {
    let t = Instant::now();
    let mut r = rng(7);
    let mut worst_probe = 0.0f64;
    for _ in 0..1000 {
        let spec = admissible_spec(&mut r);
        let (p, q) = no_signalling_probe(
            &spec,
            &Settings {
                b: unit(&mut r),
                b_prime: unit(&mut r),
            },
        )
        .unwrap();
        worst_probe = worst_probe.max((p - q).abs());
    }
    let mut worst_z = 0.0f64;
    for run in 0..20u64 {
        let spec = if run == 0 {
            Spec::optimal_symmetric(Unit3::z(), Unit3::x())
        } else {
            saturating_spec(&mut r)
        };
        let settings = optimal_settings(&spec).unwrap();
        let res = signalling_experiment(
            &spec,
            &settings,
            1_000_000,
            &SeededStream::new(700 + run, run),
        )
        .unwrap();
        worst_z = worst_z.max(res.z_score.abs());
    }
    let el = t.elapsed();
    suite.report(
        7,
        "no-signalling",
        worst_probe <= 1e-12 && worst_z < 5.0 && el < Duration::from_secs(30),
        format!("analytic probe max diff {worst_probe:.2e} over 1e3, max |z| over 20 runs of n=1e6 = {worst_z:.3}, {}", ms(el)),
    );
}

fn ac8(suite: &mut Suite) {
    let n = 1_000_000;
    let spec = Spec::optimal_symmetric(Unit3::z(), Unit3::polar_xz(std::f64::consts::FRAC_PI_3));
    let joint = general_joint_povm(&spec).unwrap();
    let sharp = projective_povm(&Unit3::normalize(Vec3::new(1.0, 0.0, 1.0)).unwrap());
    let states: [(&str, Vec3); 5] = [
        ("up z", Vec3::new(0.0, 0.0, 1.0)),
        ("down z", Vec3::new(0.0, 0.0, -1.0)),
        ("up x", Vec3::new(1.0, 0.0, 0.0)),
        ("up y", Vec3::new(0.0, 1.0, 0.0)),
        ("mixed", Vec3::zero()),
    ];
    let (mut min_p, mut worst_alpha_z) = (1.0f64, 0.0f64);
    let mut ok = true;
    for (k, (name, m)) in states.iter().enumerate() {
        let st = Qubit::from_bloch(m).unwrap();
        for (j, povm) in [&sharp, &joint].into_iter().enumerate() {
            let povm: &Measurement = povm;
            let s = sample_povm(povm, &st, n, &SeededStream::new(800, (2 * k + j) as u64)).unwrap();
            let probs: Vec<f64> = outcome_probabilities(povm, &st)
                .unwrap()
                .iter()
                .map(|o| o.probability)
                .collect();
            let counts: Vec<u64> = s.counts.iter().map(|c| c.count).collect();
            let test = chi_square_gof(&counts, &probs);
            min_p = min_p.min(test.p_value);
            if test.p_value <= 1e-6 {
                ok = false;
                println!("       {name}: chi-square p = {:.3e}", test.p_value);
            }
            if j == 1 {
                let expect = st.spin_expectation(&spec.a());
                if expect.abs() > 0.1 {
                    let (alpha_hat, se) = estimate_alpha(&s, expect);
                    let z = (alpha_hat - spec.alpha()) / se;
                    worst_alpha_z = worst_alpha_z.max(z.abs());
                    ok &= z.abs() < 5.0;
                }
            }
        }
    }
    suite.report(
        8,
        "Monte Carlo Born consistency",
        ok,
        format!("10 (state, POVM) pairs at n=1e6, min chi-square p = {min_p:.3e}, max |alpha_hat - alpha|/stderr = {worst_alpha_z:.3}"),
    );
}

fn ac9(suite: &mut Suite) {
    let mut r = rng(9);
    let mut worst = [f64::INFINITY; 6];
    let mut ordering_ok = true;
    for _ in 0..10_000 {
        let spec = admissible_spec(&mut r);
        let st = state(&mut r);
        for rep in all_relations(&spec, &st).unwrap() {
            let i = RelationId::ALL
                .iter()
                .position(|&id| id == rep.relation_id)
                .unwrap();
            worst[i] = worst[i].min(rep.slack);
        }
        let s = schroedinger(&st, &spec.a(), &spec.a_prime()).unwrap();
        let rb = robertson(&st, &spec.a(), &spec.a_prime()).unwrap();
        ordering_ok &= s.rhs >= rb.rhs - 1e-12;
    }
    let min_slack = worst.iter().copied().fold(f64::INFINITY, f64::min);

    let (mut rob_sat, mut tj_sat) = (0.0f64, 0.0f64);
    let mut pairs = vec![(Unit3::z(), Unit3::x())];
    for _ in 0..20 {
        let a = unit(&mut r);
        let w = unit(&mut r);
        if let Ok(ap) = Unit3::normalize(w.get() - a.scale(a.dot(&w))) {
            pairs.push((a, ap));
        }
    }
    for (a, ap) in pairs {
        let perp = Unit3::normalize(a.cross(&ap)).unwrap();
        let up = Qubit::spin_up(&perp);
        rob_sat = rob_sat.max(robertson(&up, &a, &ap).unwrap().slack.abs());
        tj_sat = tj_sat.max(
            total_joint(&Spec::optimal_symmetric(a, ap), &up)
                .unwrap()
                .slack
                .abs(),
        );
    }
    let detail = RelationId::ALL
        .iter()
        .zip(worst)
        .map(|(id, w)| format!("{id} {w:.1e}"))
        .collect::<Vec<_>>()
        .join(", ");
    suite.report(
        9,
        "uncertainty suite",
        min_slack >= -1e-10 && rob_sat <= 1e-9 && tj_sat <= 1e-9 && ordering_ok,
        format!(
            "1e4 pairs, min slack [{detail}]; saturation at a_perp: robertson {rob_sat:.1e}, total_joint {tj_sat:.1e}; schroedinger rhs >= robertson rhs: {ordering_ok}"
        ),
    );
}

fn ac10(suite: &mut Suite) {
    let gap = cloning_joint(FRAC_PI_2, 2.0 / 3.0).unwrap().gap;
    let gap_err = (gap - (FRAC_1_SQRT_2 - 2.0 / 3.0)).abs();
    let mut ok = gap_err <= 1e-10;
    let mut parts = vec![format!("cloning gap {gap:.11} (err {gap_err:.1e})")];
    for (i, theta) in [FRAC_PI_2, FRAC_PI_4].into_iter().enumerate() {
        let rep = bb84_eve(theta, 100_000, &SeededStream::new(1000, i as u64)).unwrap();
        let z = rep.z_score();
        ok &= z.abs() < 5.0 && rep.empirical_success < 1.0;
        parts.push(format!(
            "bb84 theta={:.0} deg: empirical {:.5} vs (1+alpha)/2 = {:.5}, z {z:.2}",
            theta.to_degrees(),
            rep.empirical_success,
            rep.guess_success_prob_after_announcement
        ));
    }
    suite.report(10, "scenario numbers", ok, parts.join("; "));
}

// 0.70710678 is the literal CLI input, deliberately just inside the boundary
#[allow(clippy::approx_constant)]
fn ac11(suite: &mut Suite) {
    let bin = env!("CARGO_BIN_EXE_spinjoint");
    let run = |args: &[&str]| {
        Command::new(bin)
            .args(args)
            .output()
            .expect("spawn spinjoint")
    };
    let first = run(&["scan-theta", "--points", "181"]);
    let second = run(&["scan-theta", "--points", "181"]);
    let rows = String::from_utf8_lossy(&first.stdout).lines().count();
    let identical = first.status.success() && first.stdout == second.stdout && rows == 182;

    let cases: [(&str, &[&str], Option<f64>); 3] = [
        (
            "boundary",
            &["validate", "--theta-deg", "90", "--alpha", "0.70710678"],
            Some(0.70710678),
        ),
        (
            "violation",
            &["validate", "--theta-deg", "90", "--alpha", "0.8"],
            Some(0.8),
        ),
        ("parse error", &["validate", "--a", "1,0"], None),
    ];
    let mut codes_ok = true;
    let mut seen = Vec::new();
    for (name, args, alpha) in cases {
        let out = run(args);
        let code = out.status.code().unwrap_or(-1);
        let expected = match alpha {
            Some(al) => {
                let spec = Spec::new(Unit3::z(), Unit3::x(), al, al).unwrap();
                if is_admissible(&spec) {
                    0
                } else {
                    1
                }
            }
            None => 2,
        };
        let msg_ok =
            expected != 1 || String::from_utf8_lossy(&out.stderr).contains("BoundViolated");
        codes_ok &= code == expected && msg_ok;
        seen.push(format!("{name} -> {code} (expected {expected})"));
    }
    suite.report(
        11,
        "CLI determinism",
        identical && codes_ok,
        format!(
            "scan-theta 181 points byte-identical: {identical}; validate {}",
            seen.join(", ")
        ),
    );
}

fn main() {
    let mut suite = Suite { failed: Vec::new() };
    let start = Instant::now();
    ac1(&mut suite);
    ac2(&mut suite);
    ac3(&mut suite);
    ac4(&mut suite);
    ac5(&mut suite);
    ac6(&mut suite);
    ac7(&mut suite);
    ac8(&mut suite);
    ac9(&mut suite);
    ac10(&mut suite);
    ac11(&mut suite);
    if suite.failed.is_empty() {
        println!(
            "acceptance: 11/11 criteria passed in {}",
            ms(start.elapsed())
        );
    } else {
        println!("acceptance: failed criteria {:?}", suite.failed);
        std::process::exit(1);
    }
}
