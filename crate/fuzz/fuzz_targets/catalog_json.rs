#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(catalog) = serde_json::from_str::<zplkit::classify::PhononCatalog>(&text) {
        // any accepted catalog must classify every finite shift
        for shift in [-50.0, 0.0, 120.0, 182.0, 472.0, 1e6] {
            let _ = zplkit::classify::phonon_region(shift, &catalog);
        }
        let _ = catalog.critical_stokes_mev();
    }
});
