#![no_main]

use libfuzzer_sys::fuzz_target;
use shockld::harness::output::write_path_csv;
use shockld::harness::read_path_csv;

fuzz_target!(|data: &[u8]| {
    if let Ok(table) = read_path_csv(data) {
        assert_eq!(table.path.cells(), table.centers.len());
        assert_eq!(table.path.levels(), table.times.len());
        let mut buf = Vec::new();
        write_path_csv(&mut buf, &table).unwrap();
        assert_eq!(read_path_csv(buf.as_slice()).unwrap(), table);
    }
});
