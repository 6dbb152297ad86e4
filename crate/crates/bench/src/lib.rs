//! Fixtures shared by the benchmarks.

use sdc_hawkes::{
    censor, make_ground_truth, simulate_many, BasisConfig, EventSequence, GroundTruth,
    GroundTruthSpec, HawkesModel, ObservationWindow, TruthKind,
};

pub fn window() -> ObservationWindow {
    ObservationWindow::new(0.0, 50.0).expect("valid window")
}

pub fn truth(kind: TruthKind) -> GroundTruth {
    make_ground_truth(&GroundTruthSpec {
        kind,
        n_types: 2,
        window: window(),
        seed: 0,
    })
    .expect("valid truth")
}

pub fn complete(count: usize) -> Vec<EventSequence> {
    simulate_many(&truth(TruthKind::TimeInvariant), window(), count, 1).expect("stable truth")
}

pub fn sdc(count: usize) -> Vec<EventSequence> {
    censor(&complete(count), 10, 2).expect("valid censoring").sequences
}

pub fn gaussian_model() -> HawkesModel {
    truth(TruthKind::Cosine)
        .project(&BasisConfig::gaussian_uniform(window(), 8).expect("valid basis"))
        .expect("projection")
}
