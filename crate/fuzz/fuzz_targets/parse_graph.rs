#![no_main]

use isingcomp::io;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(g) = io::parse_graph(text) {
        let again = io::parse_graph(&io::graph_to_string(&g)).expect("serialized graph reparses");
        assert_eq!(g, again);
    }
});
