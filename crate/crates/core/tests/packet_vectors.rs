//! Encodings worked out by hand with plain integer shifts, checked against
//! the bit-vector codec in both directions.

use meshnoc::packet::{Coordinate, OpCode, Packet, PacketBits, PacketFormat};

const VECTORS: &str = include_str!("fixtures/packet_vectors.txt");

fn num(s: &str) -> u64 {
    match s.strip_prefix("0x") {
        Some(h) => u64::from_str_radix(h, 16).unwrap(),
        None => s.parse().unwrap(),
    }
}

fn op(s: &str) -> OpCode {
    match s {
        "load" => OpCode::RemoteLoad,
        "store" => OpCode::RemoteStore,
        "swap_aq" => OpCode::RemoteSwapAq,
        "swap_rl" => OpCode::RemoteSwapRl,
        other => panic!("unknown op {other}"),
    }
}

#[test]
fn fixture_vectors_round_trip() {
    let mut seen = 0;
    for line in VECTORS
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
    {
        let parts: Vec<Vec<&str>> = line
            .split('|')
            .map(|p| p.split_whitespace().collect())
            .collect();
        let (f, p, out) = (&parts[0], &parts[1], &parts[2]);
        let format = PacketFormat::new(
            num(f[0]) as u32,
            num(f[1]) as u32,
            num(f[2]) as u32,
            num(f[3]) as u32,
        )
        .unwrap();
        let packet = Packet {
            addr: num(p[0]) as u32,
            op: op(p[1]),
            op_ex: num(p[2]) as u8,
            data: num(p[3]),
            src: Coordinate::new(num(p[4]) as u32, num(p[5]) as u32),
            dest: Coordinate::new(num(p[6]) as u32, num(p[7]) as u32),
        };
        let width = num(out[0]) as usize;
        assert_eq!(format.width(), width, "{line}");
        let bits = format.encode(&packet).unwrap();
        assert_eq!(bits.to_hex(), out[1], "{line}");
        let parsed = PacketBits::from_hex(out[1], width).unwrap();
        assert_eq!(format.decode(&parsed).unwrap(), packet, "{line}");
        seen += 1;
    }
    assert_eq!(seen, 11);
}
