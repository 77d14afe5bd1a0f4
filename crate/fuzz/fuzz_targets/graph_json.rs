#![no_main]

use bandlab::graphcalc::{graph_from_json, graph_to_json, graphs_from_json, graphs_to_json};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(gs) = graphs_from_json(text) {
        let back = graphs_from_json(&graphs_to_json(&gs).unwrap()).unwrap();
        assert_eq!(back, gs);
    }
    if let Ok(g) = graph_from_json(text) {
        let back = graph_from_json(&graph_to_json(&g).unwrap()).unwrap();
        assert_eq!(back, g);
    }
});
