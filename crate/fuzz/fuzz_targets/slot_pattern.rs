#![no_main]

use flexca::spectrum::SlotPattern;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(p) = data.parse::<SlotPattern>() {
        let back: SlotPattern = p.to_string().parse().expect("rendered pattern parses");
        assert_eq!(back, p);
        for slot in 0..2 * p.len() as u64 {
            assert_eq!(p.slot_direction(slot).total(), 14);
        }
    }
});
