#![no_main]

use libfuzzer_sys::fuzz_target;

use kinmarket::experiment::ExperimentConfig;

// The configuration parser is the only part of the library that consumes
// untrusted input. It must never panic, and any configuration it accepts
// must survive the serialize/re-parse round trip losslessly (that is what
// makes params.echo files authoritative).
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = ExperimentConfig::parse(text) {
        let _ = config.validate();
        let echo = config.to_config_string();
        let back = ExperimentConfig::parse(&echo).expect("echo of an accepted config must parse");
        assert_eq!(config, back);
    }
});
