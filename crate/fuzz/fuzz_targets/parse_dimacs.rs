#![no_main]

use isingcomp::satgen;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(f) = satgen::parse_dimacs(text) {
        let again = satgen::parse_dimacs(&satgen::to_dimacs(&f)).expect("serialized formula reparses");
        assert_eq!(f, again);
        let _ = satgen::cnf_to_ising(&f);
    }
});
