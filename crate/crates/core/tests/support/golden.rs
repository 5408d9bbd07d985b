//! Decision-table rows expected for the elevator suite.
#![allow(dead_code)]

pub const CONTROL_NODES: [&str; 16] = [
    "CE5", "E6", "S7", "S8", "S9", "S10", "S11", "S12", "S13", "S14", "S15", "S16", "S17", "S18", "S19", "S20",
];

/// (case id, floor, req, marks over CONTROL_NODES, passes)
pub const DECISION_TABLE: [(&str, i64, i64, &str, bool); 9] = [
    ("<0,0>", 0, 0, "+++++-----------", true),
    ("<0,1>", 0, 1, "++++-+++++----++", false),
    ("<0,2>", 0, 2, "++++-+++--+---++", true),
    ("<1,0>", 1, 0, "++++-+-----+++++", true),
    ("<1,1>", 1, 1, "+++++-----------", true),
    ("<1,2>", 1, 2, "++++-+++--+---++", true),
    ("<2,0>", 2, 0, "++++-+-----+++++", true),
    ("<2,1>", 2, 1, "++++-+-----+++++", true),
    ("<2,2>", 2, 2, "+++++-----------", true),
];

/// Per-node states of the failing run <0,1> over its executed Control nodes.
pub const FAILING_STATES: [(&str, &str); 11] = [
    ("CE5", "Nd"), ("E6", "Id"), ("S7", "Do"), ("S8", "Id"), ("S10", "Id"), ("S11", "Gu"),
    ("S12", "Gu"), ("S13", "Gu"), ("S14", "Do"), ("S19", "Do"), ("S20", "Do"),
];

/// (initial, condition as printed, action bits, final)
pub const TRANSITION_TABLE: [(&str, &str, &str, &str); 9] = [
    ("Idle", "req == floor", "0,0,1,0", "Idle"),
    ("Idle", "req > floor", "1,0,0,0", "Going Up"),
    ("Idle", "req < floor", "0,1,0,0", "Going Down"),
    ("Going Up", "req > floor", "1,0,0,0", "Going Up"),
    ("Going Up", "! req > floor", "0,0,1,0", "Door Open"),
    ("Door Open", "timer < 10", "0,0,1,1", "Door Open"),
    ("Door Open", "! timer < 10", "0,0,1,0", "Idle"),
    ("Going Down", "req < floor", "0,1,0,0", "Going Down"),
    ("Going Down", "! req < floor", "0,0,1,0", "Door Open"),
];

pub fn corpus(name: &str) -> String {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}
