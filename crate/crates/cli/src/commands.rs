use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;

use qkd_core::analytics::{
    max_secure_distance, rate_model, repeater_cutoff, repeater_net_rate, security_thresholds, SystemParams,
};
use qkd_core::attacks::symmetric_joint_distribution;
use qkd_core::distill::{
    advantage_distillation, csiszar_korner_rate, estimate_qber, parity_error_correct, privacy_amplify_xor,
};
use qkd_core::infomath::{mutual_info_bob, BitString};
use qkd_core::photonics::{db_to_transmission, Detector, FaintPulseSource, FiberChannel};
use qkd_core::protocols::{predict_session, run_session, sift, SessionConfig, SessionResult, Source};
use qkd_core::{rng_for, tol, QkdError};

use crate::config::{Experiment, Sweep, SweepVariable};
use crate::csv_out::CsvCurve;
use crate::{CliError, EXIT_COMPARISON_FAILED};

/// Text report, optional CSV curve and process exit code.
#[derive(Debug, Clone)]
pub struct Output {
    pub text: String,
    pub csv: Option<CsvCurve>,
    pub exit: i32,
}

impl Output {
    fn ok(text: String, csv: Option<CsvCurve>) -> Self {
        Output { text, csv, exit: 0 }
    }
}

fn session_for(base: &SessionConfig, p: &SystemParams, seed: u64) -> SessionConfig {
    let mut s = base.clone();
    if let Source::FaintPulse(_) = s.source {
        s.source = Source::FaintPulse(FaintPulseSource { mu: p.mu, f_rep: p.f_rep });
    }
    s.channel = FiberChannel { alpha: p.alpha, length: p.length };
    s.detector = Detector { eta: p.eta, p_dark: p.p_dark };
    s.n_det = p.n_det;
    s.seed = seed;
    s
}

/// Seed for grid point `index`, drawn from its own stream of the base seed.
fn point_seed(seed: u64, index: usize) -> u64 {
    rng_for(seed, index as u64 + 1).random()
}

fn opt(x: Option<f64>) -> String {
    x.map_or("n/a".into(), |v| format!("{v:.6}"))
}

/// Eve's per-bit guess probability over the sifted key; unattacked bits count as coin flips.
fn eve_guess_probability(res: &SessionResult) -> f64 {
    let (hits, attacked) = res.eve_agreement_counts();
    if res.sifted_count == 0 {
        return 0.5;
    }
    let g = (hits as f64 + 0.5 * (res.sifted_count - attacked) as f64) / res.sifted_count as f64;
    g.clamp(0.5, 1.0)
}

struct Distilled {
    estimate: f64,
    ec: Option<(BitString, BitString, qkd_core::distill::DistillationReport)>,
    ec_failure: Option<String>,
}

fn distil(exp: &Experiment, res: &SessionResult) -> Result<Distilled, CliError> {
    let (a, b) = sift(&res.records);
    let mut rng = rng_for(exp.session.seed, 1);
    let (d, a, b) = estimate_qber(&a, &b, exp.distill.sample_fraction, &mut rng).map_err(CliError::runtime)?;
    Ok(match parity_error_correct(&a, &b, &mut rng, exp.distill.target_error) {
        Ok(ec) => Distilled { estimate: d.value(), ec: Some(ec), ec_failure: None },
        Err(e @ QkdError::CorrectionFailed { .. }) => {
            Distilled { estimate: d.value(), ec: None, ec_failure: Some(e.to_string()) }
        }
        Err(e) => return Err(CliError::runtime(e)),
    })
}

fn ck_rate(d: f64, i_ae: f64) -> f64 {
    match mutual_info_bob(d) {
        Ok(i_ab) => csiszar_korner_rate(i_ab, i_ae, i_ae),
        Err(_) => csiszar_korner_rate(0.0, i_ae, i_ae),
    }
}

pub fn simulate(exp: &Experiment) -> Result<Output, CliError> {
    let cfg = &exp.session;
    let res = run_session(cfg).map_err(CliError::runtime)?;
    let exact = predict_session(cfg).ok();
    let attack = cfg.attack.predict().map_err(CliError::runtime)?;
    let dist = distil(exp, &res)?;

    let mut t = String::new();
    let w = &mut t;
    writeln!(w, "protocol            {}", cfg.protocol.label()).unwrap();
    writeln!(w, "attack              {}", cfg.attack.name()).unwrap();
    writeln!(w, "pulses              {}", res.n_pulses).unwrap();
    writeln!(w, "raw bits            {}", res.raw_count).unwrap();
    writeln!(w, "sifted bits         {}", res.sifted_count).unwrap();
    let sift_ratio = if res.raw_count > 0 { res.sifted_count as f64 / res.raw_count as f64 } else { 0.0 };
    writeln!(w, "sift ratio          {sift_ratio:.6}").unwrap();
    writeln!(w, "qber measured       {:.6}", res.qber()).unwrap();
    writeln!(w, "qber predicted      {} (session), {:.6} (attack alone)", opt(exact.map(|p| p.qber)), attack.qber).unwrap();
    writeln!(
        w,
        "eve agreement       {} measured, {} predicted",
        opt(res.eve_agreement()),
        opt(exact.and_then(|p| p.eve_agreement))
    )
    .unwrap();
    writeln!(w, "eve info (model)    {:.6} bits/bit", attack.info_ae).unwrap();
    writeln!(w, "qber estimate       {:.6} (sample fraction {})", dist.estimate, exp.distill.sample_fraction).unwrap();

    let ck = ck_rate(dist.estimate, attack.info_ae);
    let (final_length, residual) = match (&dist.ec, &dist.ec_failure) {
        (Some((a, b, rep)), _) => {
            let actual = a.hamming_distance(b) as f64 / a.len() as f64;
            writeln!(
                w,
                "error correction    {} -> {} bits in {} rounds, {} parities disclosed, residual {:.3e} estimated / {:.3e} actual",
                rep.initial_length, rep.final_length, rep.rounds, rep.disclosed_bits, rep.residual_error, actual
            )
            .unwrap();
            let g = eve_guess_probability(&res);
            let rounds = exp.distill.pa_rounds.min(if a.is_empty() { 0 } else { a.len().ilog2() as usize });
            let mut rng = rng_for(cfg.seed, 2);
            let (ka, pa) = privacy_amplify_xor(a, g, rounds, &mut rng.clone()).map_err(CliError::runtime)?;
            let (kb, _) = privacy_amplify_xor(b, g, rounds, &mut rng).map_err(CliError::runtime)?;
            writeln!(
                w,
                "privacy amp.        {} -> {} bits in {} rounds, eve info {:.6} -> {:.6} bits/bit",
                pa.initial_length, pa.final_length, rounds, pa.eve_info_before, pa.eve_info_after
            )
            .unwrap();
            let residual = if ka.is_empty() { 0.0 } else { ka.hamming_distance(&kb) as f64 / ka.len() as f64 };
            (ka.len(), residual)
        }
        (None, Some(msg)) => {
            writeln!(w, "error correction    failed: {msg}").unwrap();
            (0, f64::NAN)
        }
        (None, None) => unreachable!(),
    };
    writeln!(w, "final key           {final_length} bits, residual error {residual:.3e}").unwrap();
    writeln!(w, "csiszar-korner rate {ck:.6} bits/bit").unwrap();

    let mut csv = CsvCurve::new(&[
        "n_pulses",
        "raw_bits",
        "sifted_bits",
        "errors",
        "qber",
        "qber_predicted",
        "eve_agreement",
        "final_length",
        "residual_error",
        "ck_rate",
    ]);
    csv.push(vec![
        res.n_pulses as f64,
        res.raw_count as f64,
        res.sifted_count as f64,
        res.error_count as f64,
        res.qber(),
        exact.map_or(f64::NAN, |p| p.qber),
        res.eve_agreement().unwrap_or(f64::NAN),
        final_length as f64,
        residual,
        ck,
    ]);
    Ok(Output::ok(t, Some(csv)))
}

fn require_sweep(exp: &Experiment) -> Result<Sweep, CliError> {
    exp.sweep
        .ok_or_else(|| CliError::Config("this command needs a [sweep] section (variable, min, max, step)".into()))
}

pub fn sweep(exp: &Experiment) -> Result<Output, CliError> {
    let sw = require_sweep(exp)?;
    let grid = sw.grid();
    let rows = grid
        .par_iter()
        .enumerate()
        .map(|(i, &v)| -> Result<Vec<f64>, CliError> {
            let p = sw.variable.apply(&exp.system, v);
            let r = rate_model(&p).map_err(CliError::from_validation)?;
            let mut row = vec![v, r.r_sift, r.qber, r.qber_opt, r.qber_det, r.qber_acc, r.i_ab, r.i_ae_max, r.r_net];
            if sw.monte_carlo {
                let cfg = session_for(&exp.session, &p, point_seed(exp.session.seed, i));
                let res = run_session(&cfg).map_err(CliError::runtime)?;
                row.extend([res.sift_rate(), res.qber()]);
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut header = vec![sw.variable.name(), "r_sift", "qber", "qber_opt", "qber_det", "qber_acc", "i_ab", "i_ae_max", "r_net"];
    if sw.monte_carlo {
        header.extend(["mc_sift_rate", "mc_qber"]);
    }
    let mut csv = CsvCurve::new(&header);
    for row in rows {
        csv.push(row);
    }

    let r_net = csv.column("r_net").expect("column");
    let first_zero = grid.iter().zip(&r_net).find(|(_, &r)| r == 0.0).map(|(v, _)| *v);
    let mut t = String::new();
    match first_zero {
        Some(v) => writeln!(t, "first {} with zero net rate: {}", sw.variable.name(), v).unwrap(),
        None => writeln!(t, "net rate positive over the whole {} range", sw.variable.name()).unwrap(),
    }
    if sw.variable == SweepVariable::Length {
        let at = exp.system.with_length(sw.min);
        match max_secure_distance(&at).map_err(CliError::from_validation)? {
            Some(d) => writeln!(t, "max secure distance: {d:.3} km").unwrap(),
            None => writeln!(t, "max secure distance: none (no key at zero length)").unwrap(),
        }
    }
    Ok(Output::ok(t, Some(csv)))
}

pub fn thresholds() -> Output {
    let th = security_thresholds();
    let label = |name: &str| match name {
        "d_coherent" => "coherent attacks, root of h(D) = 1/2",
        "d0" => "individual attacks, I_AB = I_AE at (1 - 1/sqrt2)/2",
        "d_ir_disentangle" => "intercept-resend on every qubit disentangles Alice and Bob",
        "d_ad_limit" => "advantage distillation limit, 1 - 1/sqrt2",
        _ => "",
    };
    let mut t = String::new();
    writeln!(t, "{:<18} {:>8}  source", "threshold", "qber").unwrap();
    let rows = th.ascending();
    for (name, v) in rows {
        writeln!(t, "{name:<18} {v:>8.6}  {}", label(name)).unwrap();
    }
    let mut csv = CsvCurve::new(&rows.map(|(n, _)| n));
    csv.push(rows.iter().map(|(_, v)| *v).collect());
    Output::ok(t, Some(csv))
}

fn z_score(analytic: f64, empirical: f64, n: usize) -> f64 {
    let var = analytic * (1.0 - analytic) / n as f64;
    if var > 0.0 {
        (empirical - analytic) / var.sqrt()
    } else if (empirical - analytic).abs() <= tol::ALGEBRAIC {
        0.0
    } else {
        f64::INFINITY
    }
}

pub const COMPARE_MIN_PULSES: usize = 100_000;

pub fn compare(exp: &Experiment, perturb: f64) -> Result<Output, CliError> {
    let cfg = &exp.session;
    if cfg.n_pulses < COMPARE_MIN_PULSES {
        return Err(CliError::Config(format!(
            "invalid configuration field `protocol.n_pulses`: compare needs at least {COMPARE_MIN_PULSES} pulses, got {}",
            cfg.n_pulses
        )));
    }
    let pred = predict_session(cfg).map_err(CliError::runtime)?;
    let res = run_session(cfg).map_err(CliError::runtime)?;
    let mut rows = vec![
        ("qber", pred.qber + perturb, res.qber(), res.sifted_count),
        ("sift_rate", pred.sift_prob, res.sift_rate(), res.n_pulses),
    ];
    let (hits, attacked) = res.eve_agreement_counts();
    if let Some(e) = pred.eve_agreement {
        if attacked > 0 {
            rows.push(("eve_agreement", e, hits as f64 / attacked as f64, attacked));
        }
    }

    let mut t = String::new();
    writeln!(t, "{:<14} {:>10} {:>10} {:>8}", "metric", "analytic", "empirical", "z").unwrap();
    let mut header = Vec::new();
    let mut values = Vec::new();
    let mut failed = false;
    for (name, a, e, n) in rows {
        let z = z_score(a, e, n);
        failed |= !(z.abs() <= tol::SIGMAS);
        writeln!(t, "{name:<14} {a:>10.6} {e:>10.6} {z:>8.3}").unwrap();
        header.extend([format!("{name}_analytic"), format!("{name}_empirical"), format!("{name}_z")]);
        values.extend([a, e, z]);
    }
    writeln!(t, "{}", if failed { "FAIL: |z| > 4" } else { "ok: all |z| <= 4" }).unwrap();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = CsvCurve::new(&header);
    csv.push(values);
    Ok(Output {
        text: t,
        csv: Some(csv),
        exit: if failed { EXIT_COMPARISON_FAILED } else { 0 },
    })
}

pub fn repeater(exp: &Experiment) -> Result<Output, CliError> {
    let grid = match exp.sweep {
        Some(sw) if sw.variable == SweepVariable::Length => sw.grid(),
        Some(_) => return Err(CliError::Config("invalid configuration field `sweep.variable`: the repeater command sweeps `length`".into())),
        None => (0..=200).map(f64::from).collect(),
    };
    let p = &exp.system;
    let sections = &exp.repeater_sections;
    let rows = grid
        .par_iter()
        .map(|&l| -> Result<Vec<f64>, CliError> {
            let t = db_to_transmission(p.alpha * l);
            let mut row = vec![l, t];
            for &n in sections {
                let r = repeater_net_rate(n, t, p.eta, p.p_dark).map_err(CliError::from_validation)?;
                row.extend([r.rho_net, r.qber]);
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let names: Vec<String> = sections
        .iter()
        .flat_map(|n| [format!("rho_net_n{n}"), format!("qber_n{n}")])
        .collect();
    let mut header = vec!["length", "t_link"];
    header.extend(names.iter().map(String::as_str));
    let mut csv = CsvCurve::new(&header);
    for row in rows {
        csv.push(row);
    }

    let mut t = String::new();
    writeln!(t, "alpha {} dB/km, eta {}, p_dark {}", p.alpha, p.eta, p.p_dark).unwrap();
    for &n in sections {
        let cutoff = repeater_cutoff(n, p.alpha, p.eta, p.p_dark).map_err(CliError::from_validation)?;
        let col = csv.column(&format!("rho_net_n{n}")).expect("column");
        let first_zero = grid.iter().zip(&col).find(|(_, &r)| r == 0.0).map(|(l, _)| *l);
        writeln!(
            t,
            "n = {n}: rho_net(0) = {:.6}, cutoff {cutoff:.3} km, first zero on grid {}",
            col[0],
            first_zero.map_or("none".into(), |l| format!("{l} km"))
        )
        .unwrap();
    }
    Ok(Output::ok(t, Some(csv)))
}

pub const ADVANTAGE_MAX_BLOCK: u32 = 25;

pub fn distill_demo(exp: &Experiment) -> Result<Output, CliError> {
    let cfg = &exp.session;
    let res = run_session(cfg).map_err(CliError::runtime)?;
    let mut t = String::new();
    writeln!(t, "session: {} pulses, {} sifted bits, qber {:.6}", res.n_pulses, res.sifted_count, res.qber()).unwrap();
    let dist = distil(exp, &res)?;
    writeln!(t, "1. sample {} of the key in public: qber estimate {:.6}", exp.distill.sample_fraction, dist.estimate).unwrap();
    match (&dist.ec, &dist.ec_failure) {
        (Some((a, b, rep)), _) => {
            writeln!(
                t,
                "2. parity rounds: {} rounds, {} -> {} bits, {} parities disclosed, error {:.3e} estimated / {:.3e} actual",
                rep.rounds,
                rep.initial_length,
                rep.final_length,
                rep.disclosed_bits,
                rep.residual_error,
                a.hamming_distance(b) as f64 / a.len() as f64
            )
            .unwrap();
            let g = eve_guess_probability(&res);
            let rounds = exp.distill.pa_rounds.min(if a.is_empty() { 0 } else { a.len().ilog2() as usize });
            let (ka, pa) = privacy_amplify_xor(a, g, rounds, &mut rng_for(cfg.seed, 2)).map_err(CliError::runtime)?;
            writeln!(
                t,
                "3. XOR privacy amplification: {} rounds, {} -> {} bits, eve guess {:.4}, info {:.6} -> {:.6} bits/bit",
                rounds,
                pa.initial_length,
                ka.len(),
                g,
                pa.eve_info_before,
                pa.eve_info_after
            )
            .unwrap();
        }
        (None, Some(msg)) => writeln!(t, "2. parity rounds failed: {msg}").unwrap(),
        (None, None) => unreachable!(),
    }

    let d = dist.estimate.min(0.5);
    let joint = symmetric_joint_distribution(d).map_err(CliError::runtime)?;
    writeln!(t, "4. advantage distillation against the symmetric attack at D = {d:.6}:").unwrap();
    writeln!(t, "   {:>7} {:>12} {:>12} {:>12}", "block_n", "bob_error", "eve_error", "acceptance").unwrap();
    let mut csv = CsvCurve::new(&["block_n", "bob_error", "eve_error", "acceptance"]);
    for n in (1..=ADVANTAGE_MAX_BLOCK).step_by(2) {
        let o = advantage_distillation(&joint, n).map_err(CliError::runtime)?;
        writeln!(t, "   {n:>7} {:>12.4e} {:>12.4e} {:>12.4e}", o.bob_error, o.eve_error, o.acceptance).unwrap();
        csv.push(vec![f64::from(n), o.bob_error, o.eve_error, o.acceptance]);
    }
    Ok(Output::ok(t, Some(csv)))
}
