#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(scan) = zplkit::io::parse_scan_csv(&text) {
        let emitted = zplkit::io::format_scan_csv(&scan);
        let back = zplkit::io::parse_scan_csv(&emitted).expect("round trip");
        assert_eq!(scan, back);
    }
});
