#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(trace) = zplkit::io::parse_correlation_csv(&text) {
        let _ = zplkit::photostats::fit_g2(&trace);
    }
});
