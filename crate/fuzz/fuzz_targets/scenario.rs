#![no_main]

use flexca::scenario::Scenario;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(s) = Scenario::parse(data) {
        let again = Scenario::parse(&s.render()).expect("rendered scenario parses");
        assert_eq!(again.digest(), s.digest());
        let _ = s.diagnostics();
    }
});
