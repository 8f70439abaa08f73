#![no_main]

use brakewell::scenario::Scenario;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // Any accepted scenario must survive a render/parse round trip unchanged.
    if let Ok(s) = Scenario::parse(text) {
        let again = Scenario::parse(&s.render()).expect("rendered scenario parses");
        assert_eq!(again, s);
    }
});
