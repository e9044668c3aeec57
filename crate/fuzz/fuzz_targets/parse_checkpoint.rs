#![no_main]

use isingcomp::gnn::Checkpoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(ckpt) = Checkpoint::parse(text) {
        let again = Checkpoint::parse(&ckpt.to_json()).expect("serialized checkpoint reparses");
        assert_eq!(ckpt, again);
    }
});
