//! Acceptance suite: one PASS/FAIL line per criterion.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use lobrate::cli::{cmd_fit, cmd_rates, cmd_synth, FitConfig};
use lobrate::dist::{
    fit_family, fit_mle, sample_discrete_weibull, tick_curve, weighted_log_likelihood, FamilyKind,
    FitOptions, ModelFamily,
};
use lobrate::feed::{
    decode_frame, decode_message, decode_stream, encode_message, MarketMessage, Side,
};
use lobrate::rates::{arrival_density, extract_tallies, ExtractConfig, Granularity};
use lobrate::stats::special::{ln_gamma, reg_inc_beta};
use lobrate::stats::{
    chi_square_equal_counts, chi_square_uniformity, l1_error, mean_sd, nps, welch_t_test, Tail,
};
use lobrate::synth::{generate, generate_frames, CancelFractionModel, SynthSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_message(rng: &mut ChaCha8Rng) -> MarketMessage {
    let timestamp_ns = rng.random();
    let order_id = rng.random();
    let quantity = rng.random_range(1..=u32::MAX);
    match rng.random_range(0..5) {
        0 => MarketMessage::Add {
            timestamp_ns,
            order_id,
            side: if rng.random() { Side::Buy } else { Side::Sell },
            price: rng.random_range(1..=u32::MAX),
            quantity,
        },
        1 => MarketMessage::Cancel {
            timestamp_ns,
            order_id,
            quantity,
        },
        2 => MarketMessage::Delete {
            timestamp_ns,
            order_id,
        },
        3 => MarketMessage::Execute {
            timestamp_ns,
            order_id,
            quantity,
        },
        _ => MarketMessage::Replace {
            timestamp_ns,
            order_id,
            new_order_id: rng.random(),
            price: rng.random_range(1..=u32::MAX),
            quantity,
        },
    }
}

fn codec_round_trip() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = 0;
    for _ in 0..100_000 {
        let msg = random_message(&mut rng);
        let bytes = encode_message(&msg);
        match decode_message(&bytes) {
            Ok((back, used)) if back == msg && used == bytes.len() => {}
            _ => mismatches += 1,
        }
    }
    let mut panics = 0;
    let mut errors = 0;
    for i in 0..100_000 {
        let len = rng.random_range(0..96);
        let mut buf: Vec<u8> = (0..len).map(|_| rng.random()).collect();
        // half the inputs get a valid magic so the frame decoder goes deeper
        if i % 2 == 0 && buf.len() >= 4 {
            buf[..4].copy_from_slice(b"LOBF");
        }
        let r = catch_unwind(AssertUnwindSafe(|| {
            let a = decode_message(&buf).is_err();
            let b = decode_frame(&buf).is_err();
            let c = decode_stream(&buf).is_err();
            a as u32 + b as u32 + c as u32
        }));
        match r {
            Ok(n) => errors += n,
            Err(_) => panics += 1,
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        mismatches == 0 && panics == 0 && secs < 10.0,
        format!(
            "{mismatches} round-trip mismatches in 1e5; {panics} panics on 1e5 fuzz inputs ({errors} typed errors); {secs:.2}s"
        ),
    )
}

fn pipeline_closure() -> Outcome {
    let specs = [
        SynthSpec {
            days: 5,
            orders_per_day: 1_000,
            ..Default::default()
        },
        SynthSpec {
            seed: 11,
            days: 3,
            orders_per_day: 800,
            tick_size: 5,
            initial_mid: 1_000_000,
            cancel_probability: 0.4,
            cancel_fraction: CancelFractionModel::Full,
            improve_probability: 0.6,
            buy_model: ModelFamily::Geometric { p: 0.2 },
            sell_model: ModelFamily::BetaBinomial {
                alpha: 0.5,
                beta: 2.0,
                n: 14,
            },
            ..Default::default()
        },
        SynthSpec {
            seed: 99,
            days: 2,
            orders_per_day: 10_000,
            cancel_probability: 0.0,
            ..Default::default()
        },
    ];
    let mut failures = Vec::new();
    for (i, spec) in specs.iter().enumerate() {
        let (bytes, truth) = generate(spec).expect("valid spec");
        let frames = decode_stream(&bytes).expect("generated stream decodes");
        let config = ExtractConfig {
            tick_size: spec.tick_size,
            ..Default::default()
        };
        let store = extract_tallies(&frames, &config).expect("generated stream replays");
        let measured: BTreeMap<_, _> = store.iter().map(|(k, t)| (*k, *t)).collect();
        if measured != truth.tallies().unwrap() || store.diagnostics != truth.diagnostics {
            failures.push(i);
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{} specs replayed, exact mismatches in {failures:?}",
            specs.len()
        ),
    )
}

/// Exhaustive grid over (q, beta) at 1e-3 resolution.
fn grid_oracle(density: &[f64]) -> (f64, f64, f64) {
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for i in 0..=300 {
        let q = 0.65 + i as f64 * 1e-3;
        for j in 0..=600 {
            let beta = 0.9 + j as f64 * 1e-3;
            let model = ModelFamily::DiscreteWeibull { q, beta };
            let ll = weighted_log_likelihood(&model, density, false).unwrap();
            if ll > best.0 {
                best = (ll, q, beta);
            }
        }
    }
    best
}

struct Recovery {
    within: usize,
    oracle_gap: f64,
    oracle_beaten: bool,
    exact_err: f64,
}

fn recovery(opts: &FitOptions, with_oracle: bool) -> Recovery {
    let (q0, b0) = (0.8, 1.2);
    let mut r = Recovery {
        within: 0,
        oracle_gap: 0.0,
        oracle_beaten: true,
        exact_err: 0.0,
    };
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1_000 + seed);
        let mut counts = [0.0f64; 15];
        let mut n = 0;
        while n < 100_000 {
            let x = sample_discrete_weibull(q0, b0, &mut rng);
            if (1..=15).contains(&x) {
                counts[x as usize - 1] += 1.0;
                n += 1;
            }
        }
        let fit = fit_mle(&counts, FamilyKind::DiscreteWeibull, opts).expect("fit converges");
        let ModelFamily::DiscreteWeibull { q, beta } = fit.model else {
            unreachable!()
        };
        if (q - q0).abs() <= 0.02 && (beta - b0).abs() <= 0.02 {
            r.within += 1;
        }
        if with_oracle {
            let (ll, gq, gb) = grid_oracle(&counts);
            r.oracle_gap = r.oracle_gap.max((q - gq).abs()).max((beta - gb).abs());
            if weighted_log_likelihood(&fit.model, &counts, false).unwrap() < ll {
                r.oracle_beaten = false;
            }
        }
    }
    for (q, b) in [(0.7, 1.5), (q0, b0)] {
        let d = tick_curve(&ModelFamily::DiscreteWeibull { q, beta: b }).unwrap();
        let fit = fit_mle(d.as_slice(), FamilyKind::DiscreteWeibull, opts).unwrap();
        let ModelFamily::DiscreteWeibull { q: fq, beta: fb } = fit.model else {
            unreachable!()
        };
        r.exact_err = r.exact_err.max((fq - q).abs()).max((fb - b).abs());
    }
    r
}

fn fit_recovery() -> Outcome {
    let r = recovery(&FitOptions::default(), true);
    // diagnostic only: the same data under the truncated likelihood
    let t = recovery(
        &FitOptions {
            truncated_likelihood: true,
            ..Default::default()
        },
        false,
    );
    outcome(
        r.within >= 18 && r.oracle_beaten && r.exact_err <= 1e-4,
        format!(
            "{}/20 seeds within 0.02; fit likelihood >= 1e-3 grid oracle: {} (max parameter gap {:.1e}); exact-curve error {:.1e} [truncated likelihood: {}/20, exact {:.1e}]",
            r.within, r.oracle_beaten, r.oracle_gap, r.exact_err, t.within, t.exact_err
        ),
    )
}

fn family_identities() -> Outcome {
    let mut dw_geo: f64 = 0.0;
    for i in 1..100 {
        let q = i as f64 / 100.0;
        let dw = tick_curve(&ModelFamily::DiscreteWeibull { q, beta: 1.0 }).unwrap();
        let geo = tick_curve(&ModelFamily::Geometric { p: 1.0 - q }).unwrap();
        let d: f64 = dw
            .values()
            .iter()
            .zip(geo.values())
            .map(|(a, b)| (a - b).abs())
            .sum();
        dw_geo = dw_geo.max(d);
    }
    let bb = tick_curve(&ModelFamily::BetaBinomial {
        alpha: 1.0,
        beta: 1.0,
        n: 14,
    })
    .unwrap();
    let bb_err = bb
        .values()
        .iter()
        .map(|v| (v - 1.0 / 15.0).abs())
        .fold(0.0, f64::max);
    let exp = tick_curve(&ModelFamily::Exponential {
        lambda: std::f64::consts::LN_2,
    })
    .unwrap();
    let halves: Vec<f64> = (1..=15).map(|i| 0.5f64.powi(i)).collect();
    let total: f64 = halves.iter().sum();
    let exp_err = exp
        .values()
        .iter()
        .zip(&halves)
        .map(|(a, b)| (a - b / total).abs())
        .fold(0.0, f64::max);
    outcome(
        dw_geo <= 1e-12 && bb_err <= 1e-12 && exp_err <= 1e-12,
        format!("DW(q,1) vs Geo L1 {dw_geo:.1e}; BB(1,1,14) vs uniform {bb_err:.1e}; Exp(ln 2) vs 2^-i {exp_err:.1e}"),
    )
}

fn nps_contract() -> Outcome {
    let out = generate_frames(&SynthSpec::default()).expect("default spec");
    let store = extract_tallies(&out.frames, &ExtractConfig::default()).expect("replay");
    let panel = [
        FamilyKind::Geometric,
        FamilyKind::DiscreteWeibull,
        FamilyKind::BetaBinomial,
    ];
    let mut per_family: [Vec<f64>; 3] = Default::default();
    let mut best_is_one = true;
    for (key, tally) in store.instances() {
        if key.bucket.granularity() != Granularity::Daily {
            continue;
        }
        let d = arrival_density(tally).unwrap();
        let errors: Vec<f64> = panel
            .iter()
            .map(|&f| {
                let fit = fit_family(&d, f, &FitOptions::default()).expect("fit");
                l1_error(&d, fit.tick_curve.as_slice()).unwrap()
            })
            .collect();
        let s = nps(&errors);
        best_is_one &= s.iter().copied().fold(f64::INFINITY, f64::min) == 1.0;
        for (v, x) in per_family.iter_mut().zip(s) {
            v.push(x);
        }
    }
    let n = per_family[0].len();
    let [(geo, geo_sd), (dw, _), (bb, _)] = per_family.each_ref().map(|v| mean_sd(v));
    outcome(
        n >= 40 && best_is_one && dw <= bb && bb < geo && geo > 2.0,
        format!(
            "{n} daily instances; min NPS exactly 1 on each: {best_is_one}; mean NPS dw {dw:.3} <= bb {bb:.3} < geo {geo:.3} +- {geo_sd:.3}"
        ),
    )
}

fn test_correctness() -> Outcome {
    let w = welch_t_test(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], Tail::Two).unwrap();
    let welch_ok = (w.statistic + 3.674).abs() <= 1e-3
        && (w.degrees_of_freedom - 4.0).abs() <= 1e-3
        && (w.p_value - 0.0213).abs() <= 5e-4;
    let mut obs = vec![10u64; 10];
    obs[0] = 20;
    let c = chi_square_equal_counts(&obs).unwrap();
    let chi_ok = (c.statistic - 8.1818).abs() <= 5e-4 && (c.p_value - 0.5158).abs() <= 1e-3;
    let gamma_err = (ln_gamma(5.0).unwrap() - 24f64.ln()).abs();
    let mut refl_err: f64 = 0.0;
    for &(a, b) in &[(0.5, 0.5), (2.0, 7.5), (30.0, 0.7), (4.0, 4.0)] {
        for i in 1..20 {
            let x = i as f64 / 20.0;
            let s = reg_inc_beta(a, b, x).unwrap() + reg_inc_beta(b, a, 1.0 - x).unwrap();
            refl_err = refl_err.max((s - 1.0).abs());
        }
    }
    outcome(
        welch_ok && chi_ok && gamma_err <= 1e-10 && refl_err <= 1e-10,
        format!(
            "Welch t={:.4} df={:.4} p={:.5}; chi2={:.4} p={:.4}; lnG(5)-ln24={gamma_err:.1e}; reflection {refl_err:.1e}",
            w.statistic, w.degrees_of_freedom, w.p_value, c.statistic, c.p_value
        ),
    )
}

fn uniformity_calibration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut rejected = 0;
    for _ in 0..1000 {
        let mut counts = [0u64; 10];
        for _ in 0..100 {
            counts[rng.random_range(0..10)] += 1;
        }
        if chi_square_equal_counts(&counts).unwrap().p_value < 0.05 {
            rejected += 1;
        }
    }
    let rate = rejected as f64 / 1000.0;
    let mut skew = [0.0; 10];
    skew[0] = 1.0;
    let p_skew = chi_square_uniformity(&skew).unwrap().p_value;
    outcome(
        (0.03..=0.07).contains(&rate) && p_skew < 1e-6,
        format!("rejection rate {rate:.3} at alpha 0.05; all-in-tick-1 p = {p_skew:.2e}"),
    )
}

fn instance_accounting() -> Outcome {
    let dir = tempfile::tempdir().expect("temp dir");
    let (s, r, f) = (
        dir.path().join("s"),
        dir.path().join("r"),
        dir.path().join("f"),
    );
    let run = || -> Result<(), lobrate::cli::CliError> {
        cmd_synth(&SynthSpec::default(), &s)?;
        cmd_rates(&[s.join("stream.lobf")], &ExtractConfig::default(), &r)?;
        cmd_fit(&r.join("rates.csv"), &FitConfig::default(), &f)
    };
    if let Err(e) = run() {
        return outcome(false, format!("pipeline failed: {e}"));
    }
    let rates = std::fs::read_to_string(r.join("rates.csv")).unwrap();
    let mut per_gran: BTreeMap<String, usize> = BTreeMap::new();
    let mut instances = std::collections::BTreeSet::new();
    for line in rates.lines().skip(1) {
        let mut cols = line.split(',');
        let (key, side) = (cols.next().unwrap(), cols.next().unwrap());
        if instances.insert((key.to_string(), side.to_string())) {
            *per_gran
                .entry(key.split(':').next().unwrap().to_string())
                .or_default() += 1;
        }
    }
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(f.join("fits.json")).unwrap()).unwrap();
    let records = report["records"].as_array().map_or(0, Vec::len);
    outcome(
        instances.len() == 228 && records == 228 * 5,
        format!(
            "{} instances {per_gran:?}; {records} fit records",
            instances.len()
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let start = Instant::now();
    let criteria: [Criterion; 8] = [
        ("codec round-trip", codec_round_trip),
        ("pipeline closure", pipeline_closure),
        ("fit recovery", fit_recovery),
        ("family identities", family_identities),
        ("NPS contract", nps_contract),
        ("test correctness", test_correctness),
        ("uniformity calibration", uniformity_calibration),
        ("instance accounting", instance_accounting),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = catch_unwind(check).unwrap_or_else(|_| outcome(false, "panicked"));
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} {}. {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    let secs = start.elapsed().as_secs_f64();
    println!("acceptance suite finished in {secs:.1}s (budget 300s)");
    if failed > 0 || secs >= 300.0 {
        std::process::exit(1);
    }
}
