//! Packet formats, op encodings and local address decode.
//!
//! A forward-path [`Packet`] is a single wide word. Its wire layout is the
//! packed struct
//!
//! ```text
//! addr | op | op_ex | data | src_y | src_x | y | x
//! ```
//!
//! with `addr` in the most significant position and `x` in the least
//! significant. The total width is
//! `addr_width + 2 + data_width/8 + data_width + 2 * (y_cord_width + x_cord_width)`.

use std::fmt;

use bitvec::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Position of a node in the global mesh. X grows eastward, Y grows
/// southward, so the south IO row has the largest Y.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
pub struct Coordinate {
    pub x: u32,
    pub y: u32,
}

impl Coordinate {
    pub const fn new(x: u32, y: u32) -> Self {
        Coordinate { x, y }
    }

    /// Manhattan distance.
    pub fn distance(self, other: Coordinate) -> u32 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }
}

impl fmt::Display for Coordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(x={}, y={})", self.x, self.y)
    }
}

/// Request type carried in the 2-bit `op` field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpCode {
    RemoteLoad,
    RemoteStore,
    RemoteSwapAq,
    RemoteSwapRl,
}

impl OpCode {
    pub const ALL: [OpCode; 4] = [
        OpCode::RemoteLoad,
        OpCode::RemoteStore,
        OpCode::RemoteSwapAq,
        OpCode::RemoteSwapRl,
    ];

    pub const fn bits(self) -> u8 {
        match self {
            OpCode::RemoteLoad => 0b00,
            OpCode::RemoteStore => 0b01,
            OpCode::RemoteSwapAq => 0b10,
            OpCode::RemoteSwapRl => 0b11,
        }
    }

    /// Decodes the low two bits.
    pub const fn from_bits(bits: u8) -> OpCode {
        match bits & 0b11 {
            0b00 => OpCode::RemoteLoad,
            0b01 => OpCode::RemoteStore,
            0b10 => OpCode::RemoteSwapAq,
            _ => OpCode::RemoteSwapRl,
        }
    }

    /// Stores are acknowledged with a credit; everything else returns data.
    pub const fn returns_data(self) -> bool {
        !matches!(self, OpCode::RemoteStore)
    }
}

/// Forward-path request word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Packet {
    /// Local address, in words.
    pub addr: u32,
    pub op: OpCode,
    /// Byte mask for stores.
    pub op_ex: u8,
    pub data: u64,
    pub src: Coordinate,
    pub dest: Coordinate,
}

impl Packet {
    /// A load. `op_ex` and `data` are zero.
    pub fn load(src: Coordinate, dest: Coordinate, addr: u32) -> Self {
        Packet {
            addr,
            op: OpCode::RemoteLoad,
            op_ex: 0,
            data: 0,
            src,
            dest,
        }
    }

    pub fn store(src: Coordinate, dest: Coordinate, addr: u32, data: u64, mask: u8) -> Self {
        Packet {
            addr,
            op: OpCode::RemoteStore,
            op_ex: mask,
            data,
            src,
            dest,
        }
    }

    pub fn swap(
        op: OpCode,
        src: Coordinate,
        dest: Coordinate,
        addr: u32,
        data: u64,
        mask: u8,
    ) -> Self {
        debug_assert!(matches!(op, OpCode::RemoteSwapAq | OpCode::RemoteSwapRl));
        Packet {
            addr,
            op,
            op_ex: mask,
            data,
            src,
            dest,
        }
    }

    /// Checks the per-op field rules: loads carry no mask or data, stores
    /// carry a non-empty mask.
    pub fn check_op_fields(&self) -> Result<(), String> {
        match self.op {
            OpCode::RemoteLoad if self.op_ex != 0 || self.data != 0 => {
                Err("remote_load must have zero op_ex and data".into())
            }
            OpCode::RemoteStore if self.op_ex == 0 => {
                Err("remote_store must have a non-empty byte mask".into())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReturnKind {
    Credit,
    Data,
}

/// Reverse-path reply, routed back to the requester.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ReturnPacket {
    pub kind: ReturnKind,
    /// Zero for credits.
    pub data: u64,
    pub dest: Coordinate,
}

impl ReturnPacket {
    pub fn credit(dest: Coordinate) -> Self {
        ReturnPacket {
            kind: ReturnKind::Credit,
            data: 0,
            dest,
        }
    }

    pub fn data(dest: Coordinate, data: u64) -> Self {
        ReturnPacket {
            kind: ReturnKind::Data,
            data,
            dest,
        }
    }

    /// The reply a consumed request of kind `op` must produce.
    pub fn for_request(req: &Packet, data: u64) -> Self {
        if req.op.returns_data() {
            ReturnPacket::data(req.src, data)
        } else {
            ReturnPacket::credit(req.src)
        }
    }
}

/// Configuration registers decoded inside the endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConfigReg {
    /// Byte offset 0x0. 1 = frozen, 0 = running.
    Freeze,
    /// Byte offset 0x4. Every write toggles it.
    ArbiterPriority,
    /// Any other word offset in configuration space.
    Reserved(u32),
}

impl ConfigReg {
    pub fn word_offset(self) -> u32 {
        match self {
            ConfigReg::Freeze => 0,
            ConfigReg::ArbiterPriority => 1,
            ConfigReg::Reserved(off) => off,
        }
    }
}

/// Decoded local address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LocalAddress {
    /// Word offset into the node's data space.
    DataSpace(u32),
    ConfigReg(ConfigReg),
}

/// Splits a word address on its most significant bit: set selects the
/// configuration space, clear selects data space.
pub fn decode_local_address(addr: u32, addr_width: u32) -> LocalAddress {
    debug_assert!((1..=32).contains(&addr_width));
    let msb = 1u64 << (addr_width - 1);
    let offset = (addr as u64 & (msb - 1)) as u32;
    if addr as u64 & msb == 0 {
        LocalAddress::DataSpace(offset)
    } else {
        LocalAddress::ConfigReg(match offset {
            0 => ConfigReg::Freeze,
            1 => ConfigReg::ArbiterPriority,
            other => ConfigReg::Reserved(other),
        })
    }
}

/// Field widths of the packed packet word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PacketFormat {
    pub x_cord_width: u32,
    pub y_cord_width: u32,
    /// Word-address bits.
    pub addr_width: u32,
    /// Payload bits; a multiple of 8.
    pub data_width: u32,
}

impl Default for PacketFormat {
    fn default() -> Self {
        PacketFormat {
            x_cord_width: 4,
            y_cord_width: 4,
            addr_width: 20,
            data_width: 32,
        }
    }
}

fn bits_for(max_value: u32) -> u32 {
    (u32::BITS - max_value.leading_zeros()).max(1)
}

impl PacketFormat {
    pub fn new(
        x_cord_width: u32,
        y_cord_width: u32,
        addr_width: u32,
        data_width: u32,
    ) -> Result<Self, ConfigError> {
        let f = PacketFormat {
            x_cord_width,
            y_cord_width,
            addr_width,
            data_width,
        };
        f.validate()?;
        Ok(f)
    }

    /// Smallest coordinate widths able to address `cols` columns and
    /// `total_rows` rows (mesh rows plus any south IO rows).
    pub fn for_mesh(
        cols: u32,
        total_rows: u32,
        addr_width: u32,
        data_width: u32,
    ) -> Result<Self, ConfigError> {
        if cols == 0 || total_rows == 0 {
            return Err(ConfigError::invalid("mesh dimensions must be non-zero"));
        }
        PacketFormat::new(
            bits_for(cols - 1),
            bits_for(total_rows - 1),
            addr_width,
            data_width,
        )
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(1..=16).contains(&self.x_cord_width) || !(1..=16).contains(&self.y_cord_width) {
            return Err(ConfigError::invalid("coordinate widths must be in 1..=16"));
        }
        if !(2..=32).contains(&self.addr_width) {
            return Err(ConfigError::invalid("addr_width must be in 2..=32"));
        }
        if self.data_width == 0 || self.data_width > 64 || !self.data_width.is_multiple_of(8) {
            return Err(ConfigError::invalid(
                "data_width must be a non-zero multiple of 8, at most 64",
            ));
        }
        Ok(())
    }

    pub fn mask_width(&self) -> u32 {
        self.data_width / 8
    }

    /// All-ones byte mask.
    pub fn full_mask(&self) -> u8 {
        low_ones(self.mask_width()) as u8
    }

    pub fn data_mask(&self) -> u64 {
        low_ones(self.data_width)
    }

    /// Total packet width in bits.
    pub fn width(&self) -> usize {
        (self.addr_width
            + 2
            + self.mask_width()
            + self.data_width
            + 2 * (self.y_cord_width + self.x_cord_width)) as usize
    }

    /// Word address of a configuration register.
    pub fn config_addr(&self, reg: ConfigReg) -> u32 {
        (1u32 << (self.addr_width - 1)) | reg.word_offset()
    }

    /// Number of words in a node's data space.
    pub fn data_space_words(&self) -> u64 {
        1u64 << (self.addr_width - 1)
    }

    fn fields(&self, p: &Packet) -> [(&'static str, u64, u32); 8] {
        [
            ("addr", p.addr as u64, self.addr_width),
            ("op", p.op.bits() as u64, 2),
            ("op_ex", p.op_ex as u64, self.mask_width()),
            ("data", p.data, self.data_width),
            ("src_y_cord", p.src.y as u64, self.y_cord_width),
            ("src_x_cord", p.src.x as u64, self.x_cord_width),
            ("y_cord", p.dest.y as u64, self.y_cord_width),
            ("x_cord", p.dest.x as u64, self.x_cord_width),
        ]
    }

    /// Checks every field fits its configured width.
    pub fn check_fits(&self, p: &Packet) -> Result<(), ConfigError> {
        for (field, value, width) in self.fields(p) {
            if value > low_ones(width) {
                return Err(ConfigError::FieldOverflow {
                    field,
                    value,
                    width,
                });
            }
        }
        Ok(())
    }

    pub fn encode(&self, p: &Packet) -> Result<PacketBits, ConfigError> {
        self.check_fits(p)?;
        let mut bits = BitVec::with_capacity(self.width());
        for (_, value, width) in self.fields(p) {
            for i in (0..width).rev() {
                bits.push((value >> i) & 1 == 1);
            }
        }
        Ok(PacketBits(bits))
    }

    pub fn decode(&self, bits: &PacketBits) -> Result<Packet, ConfigError> {
        if bits.len() != self.width() {
            return Err(ConfigError::WidthMismatch {
                got: bits.len(),
                expected: self.width(),
            });
        }
        let mut cursor = 0usize;
        let mut take = |width: u32| -> u64 {
            let v = bits.0[cursor..cursor + width as usize]
                .iter()
                .fold(0u64, |acc, b| (acc << 1) | *b as u64);
            cursor += width as usize;
            v
        };
        let addr = take(self.addr_width) as u32;
        let op = OpCode::from_bits(take(2) as u8);
        let op_ex = take(self.mask_width()) as u8;
        let data = take(self.data_width);
        let src_y = take(self.y_cord_width) as u32;
        let src_x = take(self.x_cord_width) as u32;
        let y = take(self.y_cord_width) as u32;
        let x = take(self.x_cord_width) as u32;
        Ok(Packet {
            addr,
            op,
            op_ex,
            data,
            src: Coordinate::new(src_x, src_y),
            dest: Coordinate::new(x, y),
        })
    }
}

fn low_ones(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

/// Packed packet word, most significant bit first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PacketBits(pub BitVec<u64, Msb0>);

impl PacketBits {
    pub fn zeros(width: usize) -> Self {
        PacketBits(BitVec::repeat(false, width))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Hex rendering, zero-padded on the left to a nibble boundary.
    pub fn to_hex(&self) -> String {
        let pad = (4 - self.len() % 4) % 4;
        let padded: Vec<bool> = std::iter::repeat_n(false, pad)
            .chain(self.0.iter().map(|b| *b))
            .collect();
        padded
            .chunks(4)
            .map(|nib| {
                let v = nib.iter().fold(0u32, |acc, b| (acc << 1) | *b as u32);
                char::from_digit(v, 16).unwrap()
            })
            .collect()
    }

    /// Parses a hex string into a `width`-bit vector. Padding bits above
    /// `width` must be zero.
    pub fn from_hex(hex: &str, width: usize) -> Result<Self, ConfigError> {
        let mut all = BitVec::<u64, Msb0>::new();
        for c in hex.trim().chars() {
            let v = c
                .to_digit(16)
                .ok_or_else(|| ConfigError::invalid(format!("bad hex digit {c:?}")))?;
            for i in (0..4).rev() {
                all.push((v >> i) & 1 == 1);
            }
        }
        if all.len() < width || all.len() - width >= 4 {
            return Err(ConfigError::WidthMismatch {
                got: all.len(),
                expected: width,
            });
        }
        let pad = all.len() - width;
        if all[..pad].any() {
            return Err(ConfigError::invalid("non-zero padding bits in hex vector"));
        }
        Ok(PacketBits(all[pad..].to_bitvec()))
    }
}
