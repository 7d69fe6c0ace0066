#![no_main]

use flexca::ssbless::SignalId;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(id) = data.parse::<SignalId>() {
        assert_eq!(id.to_string().parse::<SignalId>().ok(), Some(id));
    }
});
