use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;

use safezone::basin::{BasinGrid, Label, PhaseWindow};
use safezone::boundary::{parse_polyline_csv, polyline_csv};
use safezone::forcing::{reverse, Forcing, ForcingProfile, RampDirection};
use safezone::ingest::{parse_accelerogram, Accelerogram};
use safezone::integrator::{flow, flow_backward, integrate, IntegratorSettings, TerminalStatus};
use safezone::model::{energy, fixed_points, rhs, SystemParams};
use safezone::State;

fn ramp_or_harmonic() -> impl Strategy<Value = (ForcingProfile, f64)> {
    (0.0..0.3f64, 0.5..5.0f64, 0.0..4.0f64, 0..3u8).prop_map(|(a0, omega, t_end, kind)| {
        let p = match kind {
            0 => ForcingProfile::ramp(a0, omega, t_end, RampDirection::Off),
            1 => ForcingProfile::ramp(a0, omega, t_end, RampDirection::On),
            _ => ForcingProfile::harmonic(a0, omega),
        };
        (p.unwrap(), t_end)
    })
}

/// Strictly increasing sample times with finite values.
fn record() -> impl Strategy<Value = Accelerogram> {
    (0.0..5.0f64, prop::collection::vec((1e-3..0.1f64, -3.0..3.0f64), 2..200)).prop_map(|(t0, steps)| {
        let mut t = t0;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (dt, a) in steps {
            times.push(t);
            values.push(a);
            t += dt;
        }
        Accelerogram::new(times, values, "generated").unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn double_reversal_is_the_identity((p, t_end) in ramp_or_harmonic()) {
        let twice = reverse(reverse(&p, t_end), t_end);
        for k in 0..=1000 {
            let t = t_end * k as f64 / 1000.0;
            prop_assert!((twice.force_at(t) - p.force_at(t)).abs() <= 1e-15, "t = {}", t);
        }
    }

    #[test]
    fn reversal_reads_the_record_backwards(rec in record(), scale in 0.1..3.0f64) {
        let t_end = rec.end();
        let p = ForcingProfile::accelerogram(Arc::new(rec.clone()), scale).unwrap();
        let rev = reverse(&p, t_end);
        for (&t, &a) in rec.times().iter().zip(rec.values()) {
            // sample times reproduce sample values exactly
            prop_assert_eq!(p.force_at(t), scale * a);
            prop_assert_eq!(rev.force_at(t_end - t), p.force_at(t_end - (t_end - t)));
        }
    }

    #[test]
    fn record_text_round_trip(rec in record()) {
        let back = parse_accelerogram(&rec.to_text()).unwrap();
        prop_assert_eq!(back.times(), rec.times());
        prop_assert_eq!(back.values(), rec.values());
    }

    #[test]
    fn polyline_text_round_trip(pts in prop::collection::vec((-1e3..1e3f64, -1e3..1e3f64), 0..100)) {
        let states: Vec<State> = pts.iter().map(|&(x, v)| State::new(x, v)).collect();
        let text = polyline_csv(&["a\nmultiline header".to_string()], &states);
        prop_assert_eq!(parse_polyline_csv(&text).unwrap(), states);
    }

    #[test]
    fn grid_text_round_trip(nx in 2..30usize, nv in 2..30usize, seed in prop::collection::vec(0..4u8, 900)) {
        let window = PhaseWindow::new(-1.5, 2.25, -0.1, 3.0, nx, nv).unwrap();
        let labels = (0..nx * nv).map(|k| Label::from_code(seed[k % seed.len()]).unwrap()).collect();
        let grid = BasinGrid::from_labels(window, labels).unwrap();
        let text = grid.to_csv();
        prop_assert_eq!(BasinGrid::from_csv(&text).unwrap().to_csv(), text);
    }

    #[test]
    fn equilibria_zero_the_field(k1 in 0.1..3.0f64, k2 in -2.0..2.0f64, k3 in 0.1..3.0f64, c in 0.0..1.0f64) {
        let params = SystemParams { c, k1, k2, k3, ..SystemParams::default() };
        let pts = fixed_points(&params).unwrap();
        prop_assert_eq!(pts.len(), 3);
        for f in pts {
            let x = f.location.x;
            let scale = 1.0 + (k1 * x).abs() + (k2 * x * x).abs() + (k3 * x * x * x).abs();
            prop_assert!(rhs(&params, f.location, 0.0).unwrap().norm() < 1e-12 * scale);
        }
    }

    #[test]
    fn backward_then_forward_returns(x in -2.0..2.0f64, v in -2.0..2.0f64, a0 in 0.0..0.3f64) {
        let params = SystemParams::default();
        let settings = IntegratorSettings::default();
        let t_end = 2.0 * PI / 3.0;
        let p = ForcingProfile::switching_off(a0, 3.0, t_end).unwrap();
        let ic = State::new(x, v);
        let back = flow_backward(&params, &p, ic, t_end, &settings);
        prop_assume!(back.status == TerminalStatus::ReachedFinal);
        let fwd = flow(&params, &p, back.state, 0.0, t_end, &settings);
        prop_assert!(fwd.state.dist(ic) < 1e-5);
    }

    #[test]
    fn unforced_energy_is_non_increasing(x in -3.0..3.0f64, v in -3.0..3.0f64, c in 0.01..1.0f64) {
        let params = SystemParams { c, ..SystemParams::default() };
        let traj = integrate(&params, &ForcingProfile::Zero, State::new(x, v), 0.0, 60.0, &IntegratorSettings::default()).unwrap();
        let e: Vec<f64> = traj.points.iter().map(|&(_, p)| energy(&params, p).unwrap()).collect();
        for w in e.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9);
        }
    }
}
