use labgrader_core::engine::{decode_compact, decode_rle, encode_compact, encode_rle};
use labgrader_core::Level;
use rand::{Rng, SeedableRng};

#[test]
fn ten_thousand_random_sequences_round_trip() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(0x5eed);
    for _ in 0..10_000 {
        let len = rng.random_range(0..512);
        let p_flip: f64 = rng.random_range(0.0..1.0);
        let mut level = if rng.random_bool(0.5) { Level::High } else { Level::Low };
        let levels: Vec<Level> = (0..len)
            .map(|_| {
                if rng.random_bool(p_flip) {
                    level = level.toggled();
                }
                level
            })
            .collect();
        let runs = encode_rle(&levels);
        assert_eq!(decode_rle(&runs).unwrap(), levels);
        let bytes = encode_compact(&runs);
        assert_eq!(decode_compact(&bytes).unwrap(), runs);
    }
}
