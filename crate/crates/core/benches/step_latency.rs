//! Per-step control latency, one group entry per controller.
//!
//! Each controller runs on the same on-station tracking state (3 m behind a
//! 1 m/s target, matching altitude). The optimizing controllers keep their
//! warm caches across iterations, so the numbers reflect steady tracking
//! rather than a cold first solve.

use std::hint::black_box;
use std::path::Path;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::Vector3;

use quadtarget::config::{load_config, ConfigFile, ControllerKind};
use quadtarget::InertialState;

fn shipped_config() -> ConfigFile {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/exp-case1.toml");
    load_config(&path).expect("shipped config loads")
}

fn on_station_state() -> InertialState {
    InertialState::from_parts(
        Vector3::new(3.0, 0.0, 0.0),
        Vector3::new(0.0, 0.0, 0.0),
        Vector3::new(1.0, 0.0, 0.0),
    )
}

fn bench_controller_steps(c: &mut Criterion) {
    let cfg = shipped_config();
    let x = on_station_state();

    let mut group = c.benchmark_group("controller-step");
    group.sample_size(20);
    group.warm_up_time(Duration::from_millis(500));
    group.measurement_time(Duration::from_secs(3));

    for kind in [
        ControllerKind::Eer,
        ControllerKind::PdOnly,
        ControllerKind::Bvp,
        ControllerKind::Gpm,
    ] {
        let mut controller = cfg.build_controller(Some(kind)).expect("controller builds");
        // Populate the warm cache outside the measurement.
        let _ = controller.control(&x);
        group.bench_function(kind.as_str(), |b| {
            b.iter(|| controller.control(black_box(&x)))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_controller_steps);
criterion_main!(benches);
