#![no_main]

use libfuzzer_sys::fuzz_target;
use shockld::harness::parse_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = parse_config(text) {
        let _ = config.space_time_grid();
        let _ = config.wave_spec();
        let _ = config.noise_kind();
        let _ = config.scenario();
        let _ = config.boundary_width();
        let _ = config.optimizer_options();
    }
});
