#![no_main]

use isingcomp::datagen;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = datagen::parse_manifest(text) {
        let again = datagen::parse_manifest(&datagen::manifest_to_string(&m)).expect("serialized manifest reparses");
        assert_eq!(m, again);
    }
});
