#![no_main]

use lattice_ym::lattice::{parse_moves, Lattice, LatticeSpec};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(moves) = parse_moves(text) else {
        return;
    };
    let shown: Vec<String> = moves.iter().map(|m| m.to_string()).collect();
    assert_eq!(parse_moves(&shown.join(" ")).unwrap(), moves);
    let lattice = Lattice::new(LatticeSpec::new(4, 3).unwrap());
    if let Ok(path) = lattice.path_from_moves(0, &moves) {
        if let Ok(reduced) = lattice.reduce_loop(&path) {
            assert!(lattice.is_closed_path(reduced.edges()));
            assert_eq!(lattice.reduce_loop(reduced.edges()).unwrap(), reduced);
        }
    }
});
