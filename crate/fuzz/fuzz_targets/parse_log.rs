#![no_main]

use isingcomp::io;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(log) = io::parse_log(text) {
        let again = io::parse_log(&io::log_to_string(&log)).expect("serialized log reparses");
        assert_eq!(log, again);
    }
});
