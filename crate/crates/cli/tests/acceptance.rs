//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::f64::consts::{LN_2, SQRT_2};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use qkd_core::analytics::{
    chsh_smax, max_secure_distance, repeater_cutoff, repeater_net_rate, security_thresholds, SystemParams,
};
use qkd_core::attacks::{
    beamsplitter_matched_mu, breidbart_prediction, symmetric_attack_info, symmetric_joint_distribution,
    AttackStrategy,
};
use qkd_core::distill::{advantage_distillation, csiszar_korner_rate, parity_error_correct, xor_guess_map};
use qkd_core::infomath::{mutual_info_bob, BitString};
use qkd_core::photonics::FaintPulseSource;
use qkd_core::protocols::{run_session, SessionConfig, Source};
use qkd_core::{rng_for, tol};
use rand::Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check, Option<Duration>);

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c01_thresholds() -> Check {
    let th = security_thresholds();
    ensure(
        (th.d0 - 0.146447).abs() <= 1e-6 && (th.d_coherent - 0.1100).abs() <= 1e-3,
        format!("d0 = {:.7}, d_coherent = {:.7}", th.d0, th.d_coherent),
    )
}

fn bright_bb84(n: usize, seed: u64, attack: AttackStrategy) -> SessionConfig {
    let mut cfg = SessionConfig::bb84(n, seed);
    cfg.source = Source::FaintPulse(FaintPulseSource { mu: 1.0, f_rep: 1e6 });
    cfg.attack = attack;
    cfg
}

fn c02_intercept_resend() -> Check {
    let full = run_session(&bright_bb84(100_000, 21, AttackStrategy::InterceptResend { fraction: 1.0 }))
        .map_err(|e| e.to_string())?;
    let tenth = run_session(&bright_bb84(100_000, 22, AttackStrategy::InterceptResend { fraction: 0.1 }))
        .map_err(|e| e.to_string())?;
    let agree = full.eve_agreement().unwrap_or(f64::NAN);
    ensure(
        (full.qber() - 0.25).abs() <= 0.01 && (agree - 0.75).abs() <= 0.01 && (tenth.qber() - 0.025).abs() <= 0.005,
        format!("qber {:.4}, agreement {:.4}; fraction 0.1: qber {:.4}", full.qber(), agree, tenth.qber()),
    )
}

fn c03_breidbart() -> Check {
    let p = breidbart_prediction();
    let mut cfg = bright_bb84(100_000, 23, AttackStrategy::Breidbart { fraction: 1.0 });
    cfg.source = Source::FaintPulse(FaintPulseSource { mu: 0.1, f_rep: 1e6 });
    cfg.n_pulses = 1_000_000;
    let res = run_session(&cfg).map_err(|e| e.to_string())?;
    let agree = res.eve_agreement().unwrap_or(f64::NAN);
    ensure(
        (p.qber - 0.25).abs() <= tol::ALGEBRAIC && (p.info_ae - 0.399).abs() <= 1e-3 && (agree - 0.854).abs() <= 0.01,
        format!("predicted ({:.12}, {:.6}), simulated agreement {:.4}", p.qber, p.info_ae, agree),
    )
}

fn c04_symmetric_curve() -> Check {
    let i = |d: f64| symmetric_attack_info(d).unwrap();
    let d = 1e-6;
    let slope = i(d) / d;
    let target = 2.0 / LN_2;
    let crossing = (mutual_info_bob(tol::D0).unwrap() - i(tol::D0)).abs();
    ensure(
        i(0.0).abs() <= tol::ALGEBRAIC
            && (i(0.5) - 1.0).abs() <= tol::ALGEBRAIC
            && (slope / target - 1.0).abs() <= 0.01
            && crossing < 1e-9,
        format!("I(0) = {:.1e}, I(0.5) = {:.12}, slope {slope:.4} vs {target:.4}, crossing gap {crossing:.1e}", i(0.0), i(0.5)),
    )
}

fn c05_exclusion() -> Check {
    let worst = (0..=100)
        .map(|k| {
            let d = 0.005 * k as f64;
            mutual_info_bob(d).unwrap() + symmetric_attack_info(d).unwrap()
        })
        .fold(f64::NEG_INFINITY, f64::max);
    ensure(worst <= 1.0 + 1e-9, format!("max I_AB + I_max = {worst:.12}"))
}

fn c06_repeater() -> Check {
    let (alpha, eta, pd) = (0.25, 0.1, 1e-4);
    let c1 = repeater_cutoff(1, alpha, eta, pd).map_err(|e| e.to_string())?;
    let c2 = repeater_cutoff(2, alpha, eta, pd).map_err(|e| e.to_string())?;
    let r1 = repeater_net_rate(1, 1.0, eta, pd).map_err(|e| e.to_string())?.rho_net;
    let r2 = repeater_net_rate(2, 1.0, eta, pd).map_err(|e| e.to_string())?.rho_net;
    ensure(
        (c1 - 90.0).abs() <= 3.0 && c2 > c1 && r2 < r1,
        format!("cutoff n=1 {c1:.2} km, n=2 {c2:.2} km; rho_net(0) n=1 {r1:.4}, n=2 {r2:.4}"),
    )
}

fn c07_fibre_band() -> Check {
    let dist = |p: SystemParams| -> Result<f64, String> {
        max_secure_distance(&p).map_err(|e| e.to_string())?.ok_or_else(|| "no key at zero length".into())
    };
    let l1550 = dist(SystemParams::band_1550())?;
    let single = dist(SystemParams::band_1550_single())?;
    let l800 = dist(SystemParams::band_800())?;
    ensure(
        (70.0..=110.0).contains(&l1550) && single > l1550 && (15.0..=35.0).contains(&l800),
        format!("1550 nm {l1550:.2} km, single {single:.2} km, 800 nm {l800:.2} km"),
    )
}

fn c08_distillation() -> Check {
    let n = 100_000;
    let mut rng = rng_for(28, 0);
    let a: BitString = (0..n).map(|_| u8::from(rng.random::<bool>())).collect();
    let b: BitString = a.iter().map(|x| x ^ u8::from(rng.random::<f64>() < 0.25)).collect();
    let (a1, b1, rep) = parity_error_correct(&a, &b, &mut rng, 1.0).map_err(|e| e.to_string())?;
    let after = a1.hamming_distance(&b1) as f64 / a1.len() as f64;
    let g = xor_guess_map(0.6);
    ensure(
        rep.rounds == 1 && (after - 0.10).abs() <= 0.01 && (g - 0.52).abs() <= tol::ALGEBRAIC,
        format!("parity round 0.25 -> {after:.4}; XOR round 0.6 -> {g:.12}"),
    )
}

fn c09_beamsplitter() -> Check {
    let p = AttackStrategy::Beamsplitter.predict().map_err(|e| e.to_string())?;
    let mut detail = format!("(qber, info) = ({:.6}, {:.6});", p.qber, p.info_ae);
    let mut ok = (p.qber - 1.0 / 6.0).abs() <= tol::ALGEBRAIC
        && (p.info_ae - 2.0 / 3.0).abs() <= tol::ALGEBRAIC
        && (p.info_ae - 4.0 * p.qber).abs() <= tol::ALGEBRAIC;
    for (db, want) in [(10.0, 0.25), (14.0, 0.1), (20.0, 0.025)] {
        let mu = beamsplitter_matched_mu(db).map_err(|e| e.to_string())?;
        ok &= (mu / want - 1.0).abs() <= 0.05;
        detail.push_str(&format!(" {db} dB -> mu {mu:.4}"));
    }
    ensure(ok, detail)
}

fn c10_advantage() -> Check {
    let advantage_at = |d: f64| -> Result<Option<u32>, String> {
        let joint = symmetric_joint_distribution(d).map_err(|e| e.to_string())?;
        for n in (1..=25).step_by(2) {
            let o = advantage_distillation(&joint, n).map_err(|e| e.to_string())?;
            if o.eve_error > o.bob_error {
                return Ok(Some(n));
            }
        }
        Ok(None)
    };
    let at20 = advantage_at(0.20)?;
    let at35 = advantage_at(0.35)?;
    ensure(
        at20.is_some() && at35.is_none(),
        format!("D = 0.20: first winning block {at20:?}; D = 0.35: {at35:?}"),
    )
}

fn c11_chsh() -> Check {
    let s0 = chsh_smax(0.0).map_err(|e| e.to_string())?;
    let sd0 = chsh_smax(tol::D0).map_err(|e| e.to_string())?;
    let disagreements = (0..100)
        .filter(|k| {
            let d = 0.5 * *k as f64 / 100.0;
            let i_ae = symmetric_attack_info(d).unwrap();
            let ck = csiszar_korner_rate(mutual_info_bob(d).unwrap(), i_ae, i_ae);
            (chsh_smax(d).unwrap() > 2.0) != (ck > 0.0)
        })
        .count();
    ensure(
        (s0 - 2.0 * SQRT_2).abs() <= 1e-9 && (sd0 - 2.0).abs() <= 1e-9 && disagreements == 0,
        format!("S(0) = {s0:.12}, S(D0) = {sd0:.12}, grid disagreements {disagreements}"),
    )
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn c12_determinism() -> Check {
    let dir = std::env::temp_dir().join(format!("qkd-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let cases: [(&str, Option<&str>); 6] = [
        ("simulate", Some("intercept_resend.toml")),
        ("sweep", Some("sweep_monte_carlo.toml")),
        ("repeater", Some("repeater.toml")),
        ("compare", Some("breidbart.toml")),
        ("distill-demo", Some("distill_demo.toml")),
        ("thresholds", None),
    ];
    let run = |cmd: &str, cfg: Option<&str>, threads: &str, tag: &str| -> Result<Vec<u8>, String> {
        let out = dir.join(format!("{cmd}-{tag}.csv"));
        let mut c = Command::new(env!("CARGO_BIN_EXE_qkd"));
        c.args([cmd, "--seed", "12345", "--threads", threads, "--out"]).arg(&out);
        if let Some(cfg) = cfg {
            c.arg("--config").arg(configs().join(cfg));
        }
        let status = c.output().map_err(|e| e.to_string())?.status;
        if !status.success() {
            return Err(format!("{cmd} exited with {status}"));
        }
        std::fs::read(&out).map_err(|e| e.to_string())
    };
    let mut mismatched = Vec::new();
    for (cmd, cfg) in cases {
        let a = run(cmd, cfg, "1", "a")?;
        let b = run(cmd, cfg, "1", "b")?;
        let c = run(cmd, cfg, "8", "c")?;
        if a != b || a != c {
            mismatched.push(cmd);
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    ensure(
        mismatched.is_empty(),
        format!("{} commands, 1 vs 1 vs 8 threads; mismatched: {mismatched:?}", cases.len()),
    )
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("threshold constants", c01_thresholds, Some(Duration::from_secs(1))),
        ("intercept-resend", c02_intercept_resend, Some(Duration::from_secs(10))),
        ("Breidbart", c03_breidbart, Some(Duration::from_secs(10))),
        ("symmetric-attack curve", c04_symmetric_curve, None),
        ("information exclusion", c05_exclusion, None),
        ("repeater figure", c06_repeater, Some(Duration::from_secs(1))),
        ("fibre distance band", c07_fibre_band, None),
        ("distillation arithmetic", c08_distillation, None),
        ("beamsplitter attack", c09_beamsplitter, None),
        ("advantage distillation", c10_advantage, Some(Duration::from_secs(30))),
        ("CHSH", c11_chsh, None),
        ("determinism", c12_determinism, None),
    ];
    let mut failures = 0;
    for (i, (name, check, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let slow = limit.is_some_and(|l| elapsed > l);
        let (verdict, detail) = match result {
            Ok(d) if !slow => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; too slow, limit {:?}", limit.unwrap())),
            Err(d) => ("FAIL", d),
        };
        if verdict == "FAIL" {
            failures += 1;
        }
        println!("{verdict} {:>2} {name}: {detail} [{:.3} s]", i + 1, elapsed.as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
