#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(spectrum) = zplkit::io::parse_spectrum_csv(&text) {
        // anything we accept must survive a write/parse round trip
        let emitted = zplkit::io::format_spectrum_csv(&spectrum);
        let back = zplkit::io::parse_spectrum_csv(&emitted).expect("round trip");
        assert_eq!(spectrum, back);
    }
});
