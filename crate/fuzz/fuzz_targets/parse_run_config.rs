#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    // Both accepted config encodings; validation must be total.
    if let Ok(file) = toml::from_str::<combom::config::RunFile>(text) {
        let _ = file.campaign.validate();
    }
    if let Ok(file) = serde_json::from_str::<combom::config::RunFile>(text) {
        let _ = file.campaign.validate();
    }
});
