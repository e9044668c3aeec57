#![no_main]

use isingcomp::io;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(inst) = io::parse_labeled(text) {
        let again = io::parse_labeled(&io::labeled_to_string(&inst)).expect("serialized instance reparses");
        assert_eq!(inst, again);
    }
});
