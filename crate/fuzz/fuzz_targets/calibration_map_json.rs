#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(map) = zplkit::io::parse_calibration_map_json(&text) {
        // interpolation and inversion must hold up on any accepted map
        let _ = zplkit::polarfit::apply_calibration(37.0, 612.0, &map);
        let _ = zplkit::polarfit::correct_visibility(0.5, 612.0, 37.0, &map);
    }
});
