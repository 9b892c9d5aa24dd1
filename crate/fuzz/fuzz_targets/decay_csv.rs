#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(hist) = zplkit::io::parse_decay_csv(&text) {
        let window = zplkit::photostats::BackgroundWindow {
            start_ns: 0.0,
            end_ns: 1.0,
        };
        let _ = zplkit::photostats::fit_lifetime(&hist, window);
    }
});
