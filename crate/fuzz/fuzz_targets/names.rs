#![no_main]

use brakewell::bump::BumpMode;
use brakewell::harness::ExportKind;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(mode) = text.parse::<BumpMode>() {
        assert_eq!(mode.to_string(), text);
    }
    let _ = text.parse::<ExportKind>();
});
