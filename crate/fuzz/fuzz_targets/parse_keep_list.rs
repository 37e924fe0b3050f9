#![no_main]

use libfuzzer_sys::fuzz_target;
use sentecon::lexicon::parse_keep_list;

fuzz_target!(|data: &[u8]| {
    let _ = parse_keep_list(data);
});
