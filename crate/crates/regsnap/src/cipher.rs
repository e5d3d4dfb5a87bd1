//! AES-128 primitives over GF(2^8).
//!
//! Everything the rest of the toolkit needs from the cipher lives here: the
//! forward/inverse Sbox, column mixing, the key schedule, and a full
//! block encryption used to verify recovered keys against a known
//! plaintext/ciphertext pair.
//!
//! State bytes use the standard column-major numbering: byte `i` of a block
//! sits at row `i % 4`, column `i / 4`.

use std::fmt;
use std::ops::{BitXor, BitXorAssign};

use thiserror::Error;

/// An element of GF(2^8) with the AES reduction polynomial
/// x^8 + x^4 + x^3 + x + 1 (0x11B).
#[derive(Copy, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GfByte(pub u8);

impl fmt::Debug for GfByte {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GfByte(0x{:02x})", self.0)
    }
}

impl fmt::LowerHex for GfByte {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::LowerHex::fmt(&self.0, f)
    }
}

impl From<u8> for GfByte {
    fn from(v: u8) -> Self {
        GfByte(v)
    }
}

/// Field addition is XOR.
impl BitXor for GfByte {
    type Output = GfByte;
    fn bitxor(self, rhs: Self) -> Self {
        GfByte(self.0 ^ rhs.0)
    }
}

impl BitXorAssign for GfByte {
    fn bitxor_assign(&mut self, rhs: Self) {
        self.0 ^= rhs.0;
    }
}

impl GfByte {
    /// Bit `i` (0 = least significant).
    pub fn bit(self, i: usize) -> bool {
        (self.0 >> i) & 1 == 1
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CipherError {
    #[error("round index {0} outside [1,10]")]
    RoundIndex(usize),
}

/// Multiplication by x, i.e. a left shift with conditional reduction.
pub fn xtime(a: GfByte) -> GfByte {
    let hi = a.0 >> 7;
    GfByte((a.0 << 1) ^ (hi * 0x1b))
}

/// Full field multiplication, shift-and-add over `xtime`.
pub fn gf_mul(a: GfByte, b: GfByte) -> GfByte {
    let mut acc = 0u8;
    let mut aa = a;
    let mut bb = b.0;
    for _ in 0..8 {
        if bb & 1 == 1 {
            acc ^= aa.0;
        }
        aa = xtime(aa);
        bb >>= 1;
    }
    GfByte(acc)
}

/// The AES forward Sbox. The table is checked against a from-scratch
/// derivation (field inverse plus affine map) in the test suite, so the
/// constant is never trusted unverified.
pub const SBOX: [u8; 256] = [
    0x63, 0x7c, 0x77, 0x7b, 0xf2, 0x6b, 0x6f, 0xc5, 0x30, 0x01, 0x67, 0x2b, 0xfe, 0xd7, 0xab, 0x76,
    0xca, 0x82, 0xc9, 0x7d, 0xfa, 0x59, 0x47, 0xf0, 0xad, 0xd4, 0xa2, 0xaf, 0x9c, 0xa4, 0x72, 0xc0,
    0xb7, 0xfd, 0x93, 0x26, 0x36, 0x3f, 0xf7, 0xcc, 0x34, 0xa5, 0xe5, 0xf1, 0x71, 0xd8, 0x31, 0x15,
    0x04, 0xc7, 0x23, 0xc3, 0x18, 0x96, 0x05, 0x9a, 0x07, 0x12, 0x80, 0xe2, 0xeb, 0x27, 0xb2, 0x75,
    0x09, 0x83, 0x2c, 0x1a, 0x1b, 0x6e, 0x5a, 0xa0, 0x52, 0x3b, 0xd6, 0xb3, 0x29, 0xe3, 0x2f, 0x84,
    0x53, 0xd1, 0x00, 0xed, 0x20, 0xfc, 0xb1, 0x5b, 0x6a, 0xcb, 0xbe, 0x39, 0x4a, 0x4c, 0x58, 0xcf,
    0xd0, 0xef, 0xaa, 0xfb, 0x43, 0x4d, 0x33, 0x85, 0x45, 0xf9, 0x02, 0x7f, 0x50, 0x3c, 0x9f, 0xa8,
    0x51, 0xa3, 0x40, 0x8f, 0x92, 0x9d, 0x38, 0xf5, 0xbc, 0xb6, 0xda, 0x21, 0x10, 0xff, 0xf3, 0xd2,
    0xcd, 0x0c, 0x13, 0xec, 0x5f, 0x97, 0x44, 0x17, 0xc4, 0xa7, 0x7e, 0x3d, 0x64, 0x5d, 0x19, 0x73,
    0x60, 0x81, 0x4f, 0xdc, 0x22, 0x2a, 0x90, 0x88, 0x46, 0xee, 0xb8, 0x14, 0xde, 0x5e, 0x0b, 0xdb,
    0xe0, 0x32, 0x3a, 0x0a, 0x49, 0x06, 0x24, 0x5c, 0xc2, 0xd3, 0xac, 0x62, 0x91, 0x95, 0xe4, 0x79,
    0xe7, 0xc8, 0x37, 0x6d, 0x8d, 0xd5, 0x4e, 0xa9, 0x6c, 0x56, 0xf4, 0xea, 0x65, 0x7a, 0xae, 0x08,
    0xba, 0x78, 0x25, 0x2e, 0x1c, 0xa6, 0xb4, 0xc6, 0xe8, 0xdd, 0x74, 0x1f, 0x4b, 0xbd, 0x8b, 0x8a,
    0x70, 0x3e, 0xb5, 0x66, 0x48, 0x03, 0xf6, 0x0e, 0x61, 0x35, 0x57, 0xb9, 0x86, 0xc1, 0x1d, 0x9e,
    0xe1, 0xf8, 0x98, 0x11, 0x69, 0xd9, 0x8e, 0x94, 0x9b, 0x1e, 0x87, 0xe9, 0xce, 0x55, 0x28, 0xdf,
    0x8c, 0xa1, 0x89, 0x0d, 0xbf, 0xe6, 0x42, 0x68, 0x41, 0x99, 0x2d, 0x0f, 0xb0, 0x54, 0xbb, 0x16,
];

/// Inverse Sbox, derived from `SBOX` at compile time.
pub const INV_SBOX: [u8; 256] = invert_sbox();

const fn invert_sbox() -> [u8; 256] {
    let mut inv = [0u8; 256];
    let mut i = 0;
    while i < 256 {
        inv[SBOX[i] as usize] = i as u8;
        i += 1;
    }
    inv
}

/// Round constants for the AES-128 key schedule, derived at compile time by
/// repeated doubling in the field. Index 0 is unused.
pub const RCON: [u8; 11] = rcon_table();

const fn rcon_table() -> [u8; 11] {
    let mut t = [0u8; 11];
    let mut v = 1u8;
    let mut i = 1;
    while i < 11 {
        t[i] = v;
        let hi = v >> 7;
        v = (v << 1) ^ (hi * 0x1b);
        i += 1;
    }
    t
}

pub fn sbox(x: GfByte) -> GfByte {
    GfByte(SBOX[x.0 as usize])
}

pub fn inv_sbox(y: GfByte) -> GfByte {
    GfByte(INV_SBOX[y.0 as usize])
}

/// MixColumns applied to a single column.
pub fn mix_column(col: [GfByte; 4]) -> [GfByte; 4] {
    let [a, b, c, d] = col;
    let two = |x| xtime(x);
    let three = |x: GfByte| xtime(x) ^ x;
    [
        two(a) ^ three(b) ^ c ^ d,
        a ^ two(b) ^ three(c) ^ d,
        a ^ b ^ two(c) ^ three(d),
        three(a) ^ b ^ c ^ two(d),
    ]
}

/// ShiftRows source index: output byte `i` of ShiftRows takes input byte
/// `shift_rows_src(i)`.
pub fn shift_rows_src(i: usize) -> usize {
    let r = i % 4;
    let c = i / 4;
    r + 4 * ((c + r) % 4)
}

pub fn shift_rows(state: &[GfByte; 16]) -> [GfByte; 16] {
    let mut out = [GfByte(0); 16];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = state[shift_rows_src(i)];
    }
    out
}

pub fn sub_bytes(state: &[GfByte; 16]) -> [GfByte; 16] {
    let mut out = [GfByte(0); 16];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = sbox(state[i]);
    }
    out
}

pub fn mix_columns(state: &[GfByte; 16]) -> [GfByte; 16] {
    let mut out = [GfByte(0); 16];
    for c in 0..4 {
        let col = mix_column([
            state[4 * c],
            state[4 * c + 1],
            state[4 * c + 2],
            state[4 * c + 3],
        ]);
        out[4 * c..4 * c + 4].copy_from_slice(&col);
    }
    out
}

pub fn add_round_key(state: &[GfByte; 16], rk: &[GfByte; 16]) -> [GfByte; 16] {
    let mut out = [GfByte(0); 16];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = state[i] ^ rk[i];
    }
    out
}

/// One round of the AES-128 key expansion: derives round key `round_index`
/// from round key `round_index - 1`.
pub fn key_schedule_round(
    round_key: &[GfByte; 16],
    round_index: usize,
) -> Result<[GfByte; 16], CipherError> {
    if !(1..=10).contains(&round_index) {
        return Err(CipherError::RoundIndex(round_index));
    }
    let mut out = [GfByte(0); 16];
    // Word 0 = word 0 in ⊕ SubWord(RotWord(word 3 in)) ⊕ Rcon.
    for i in 0..4 {
        let rot = round_key[12 + (i + 1) % 4];
        let rcon = if i == 0 { RCON[round_index] } else { 0 };
        out[i] = round_key[i] ^ sbox(rot) ^ GfByte(rcon);
    }
    for w in 1..4 {
        for i in 0..4 {
            out[4 * w + i] = out[4 * (w - 1) + i] ^ round_key[4 * w + i];
        }
    }
    Ok(out)
}

fn to_gf(block: &[u8; 16]) -> [GfByte; 16] {
    let mut out = [GfByte(0); 16];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = GfByte(block[i]);
    }
    out
}

fn from_gf(block: &[GfByte; 16]) -> [u8; 16] {
    let mut out = [0u8; 16];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = block[i].0;
    }
    out
}

/// Full AES-128 encryption of one block.
pub fn encrypt_block(key: &[u8; 16], plaintext: &[u8; 16]) -> [u8; 16] {
    let mut rk = to_gf(key);
    let mut state = add_round_key(&to_gf(plaintext), &rk);
    for round in 1..=10 {
        rk = key_schedule_round(&rk, round).expect("round index in range");
        state = sub_bytes(&state);
        state = shift_rows(&state);
        if round < 10 {
            state = mix_columns(&state);
        }
        state = add_round_key(&state, &rk);
    }
    from_gf(&state)
}

pub fn parse_hex_block(s: &str) -> Option<[u8; 16]> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if s.len() != 32 {
        return None;
    }
    let mut out = [0u8; 16];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = u8::from_str_radix(&s[2 * i..2 * i + 2], 16).ok()?;
    }
    Some(out)
}

pub fn hex_block(b: &[u8; 16]) -> String {
    b.iter().map(|x| format!("{x:02x}")).collect()
}
