#![no_main]

use dualring_core::pir::DatabaseMatrix;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(db) = DatabaseMatrix::read_from(data) {
        for i in 0..db.num_records().min(4) {
            assert_eq!(db.record(i).len(), db.record_size());
        }
    }
});
