//! Graph construction and both projections on random event streams against
//! brute-force oracles computed from the events alone.

mod common;

use collab_core::graph::{build_graph, simplify_to_hcp, NodeKind, ProfileIndex};
use collab_core::synth::{AccessLogEvent, Action, HcpProfile, NoteProfile};
use common::{check_event_stream, two_path_oracle};

#[test]
fn thousand_random_streams_match_the_oracles() {
    for seed in 0..1000 {
        check_event_stream(seed).unwrap();
    }
}

fn ev(h: &str, n: &str, action: Action) -> AccessLogEvent {
    AccessLogEvent {
        patient_id: "P".into(),
        hcp_id: h.into(),
        note_id: n.into(),
        action,
        t: 0.0,
    }
}

#[test]
fn oracle_agrees_with_a_hand_worked_example() {
    // H1 writes N1, read by H2 and H3; H2 writes N2, read by H1.
    let events = vec![
        ev("H1", "N1", Action::Write),
        ev("H2", "N1", Action::Read),
        ev("H3", "N1", Action::Read),
        ev("H2", "N2", Action::Write),
        ev("H1", "N2", Action::Read),
    ];
    let pairs = |v: &[(&str, &str)]| {
        v.iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect::<std::collections::BTreeSet<_>>()
    };
    assert_eq!(
        two_path_oracle(&events, NodeKind::Hcp),
        pairs(&[("H1", "H2"), ("H1", "H3"), ("H2", "H1")])
    );
    assert_eq!(
        two_path_oracle(&events, NodeKind::Note),
        pairs(&[("N1", "N2"), ("N2", "N1")])
    );

    let hcps: Vec<HcpProfile> = ["H1", "H2", "H3"]
        .iter()
        .map(|id| HcpProfile {
            hcp_id: id.to_string(),
            title: 0,
            hcp_type: 0,
            specialty: 0,
            is_resident: false,
        })
        .collect();
    let notes: Vec<NoteProfile> = ["N1", "N2"]
        .iter()
        .map(|id| NoteProfile {
            note_id: id.to_string(),
            intent: 0,
            content: 0,
            is_inpatient: false,
        })
        .collect();
    let g = build_graph("P", &events, &ProfileIndex::new(&hcps, &notes)).unwrap();
    assert_eq!(simplify_to_hcp(&g).edges.len(), 3);
}
