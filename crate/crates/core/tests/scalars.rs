use oamp::engine::{run, RunConfig, Tracking};
use oamp::relay::{build_relay_graph, run_method, Method, MethodSettings, RelayConfig};
use oamp::smv::{build_smv, OperatorChoice, SmvConfig};
use oamp::state_evolution::{run_se, SeOptions};
use oamp::{Scalar, C32, C64};
use std::sync::Arc;

fn smv_final_mse<S: Scalar>() -> f64 {
    let cfg = SmvConfig { n: 512, rows: 512, m: 1, kappa: 5.0, snr_db: 12.0, operator: OperatorChoice::Dft, seed: 3 };
    let (g, truth) = build_smv::<S>(&cfg).unwrap();
    let se = Arc::new(run_se(&g, 8, &SeOptions { n_mc: 20_000, ..SeOptions::default() }, 1).unwrap());
    let traj = run(&g, &truth, &RunConfig::new(8, Tracking::Predicted(se))).unwrap();
    assert!(traj.diverged.is_none());
    traj.metrics[7][0].mse
}

#[test]
fn single_transform_runs_in_every_scalar_type() {
    let f64_mse = smv_final_mse::<f64>();
    for (name, mse) in
        [("f32", smv_final_mse::<f32>()), ("C64", smv_final_mse::<C64>()), ("C32", smv_final_mse::<C32>())]
    {
        assert!(mse.is_finite() && mse < 0.1, "{name}: {mse}");
        eprintln!("{name}: {mse:.4} (f64 {f64_mse:.4})");
    }
    assert!(f64_mse < 0.1);
}

fn relay_ber<S: Scalar>() -> f64 {
    let cfg = RelayConfig { snr_rd_db: 20.0, ..RelayConfig::scaled(8) };
    let (g, _) = build_relay_graph::<S>(&cfg, 1).unwrap();
    assert_eq!(g.ports(), 4);
    let out = run_method::<S>(&cfg, Method::Aoamp, &MethodSettings::new(8, 4, 2)).unwrap();
    assert!(out.diverged.iter().all(Option::is_none));
    out.ber(7).0
}

#[test]
fn relay_runs_in_every_scalar_type() {
    let reference = relay_ber::<f64>();
    for (name, ber) in [("f32", relay_ber::<f32>()), ("C64", relay_ber::<C64>()), ("C32", relay_ber::<C32>())] {
        eprintln!("{name}: BER {ber:.4} (f64 {reference:.4})");
        assert!(ber < 0.25, "{name}: {ber}");
    }
    // same draws in single precision
    assert!((relay_ber::<f32>() - reference).abs() < 0.01);
}
