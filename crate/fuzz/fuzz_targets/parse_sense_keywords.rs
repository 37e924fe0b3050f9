#![no_main]

use libfuzzer_sys::fuzz_target;
use sentecon::analysis::parse_sense_keywords;

fuzz_target!(|data: &[u8]| {
    let _ = parse_sense_keywords(data);
});
