#![no_main]

use libfuzzer_sys::fuzz_target;
use sentecon::lexicon::parse_liwc_dic;

fuzz_target!(|data: &[u8]| {
    if let Ok(lex) = parse_liwc_dic(data) {
        // whatever parses must survive a serialize/parse round trip
        let again = parse_liwc_dic(lex.to_dic().as_bytes()).expect("re-parse of serialized lexicon");
        assert_eq!(again.to_dic(), lex.to_dic());
    }
});
