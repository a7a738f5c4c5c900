use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Security level. Chain keys are `kappa / 8` bytes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Kappa {
    K128,
    K256,
}

impl Kappa {
    pub fn bits(self) -> u16 {
        match self {
            Kappa::K128 => 128,
            Kappa::K256 => 256,
        }
    }

    pub fn key_bytes(self) -> usize {
        self.bits() as usize / 8
    }

    pub fn from_bits(bits: u16) -> Result<Self> {
        match bits {
            128 => Ok(Kappa::K128),
            256 => Ok(Kappa::K256),
            _ => Err(Error::InvalidConfig(format!(
                "kappa must be 128 or 256, got {bits}"
            ))),
        }
    }

    pub fn from_key_bytes(len: u8) -> Option<Self> {
        match len {
            16 => Some(Kappa::K128),
            32 => Some(Kappa::K256),
            _ => None,
        }
    }
}

/// Concrete scheme. Discriminants are the wire codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Instantiation {
    /// AES-CBC + HMAC-SHA-256 with a per-message hash-chain update.
    StdFaae = 1,
    /// AES-GCM with precomputed keystreams and SHA-256 aggregation.
    GrapheneAe = 2,
    /// AES-CTR + Poly1305 with precomputed keystreams and pads, XOR aggregation.
    GraphenePoly = 3,
}

impl Instantiation {
    pub const ALL: [Instantiation; 3] = [
        Instantiation::StdFaae,
        Instantiation::GrapheneAe,
        Instantiation::GraphenePoly,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            1 => Some(Instantiation::StdFaae),
            2 => Some(Instantiation::GrapheneAe),
            3 => Some(Instantiation::GraphenePoly),
            _ => None,
        }
    }

    pub fn default_agg(self) -> AggMode {
        match self {
            Instantiation::StdFaae | Instantiation::GrapheneAe => AggMode::Hash,
            Instantiation::GraphenePoly => AggMode::Xor,
        }
    }

    /// Default `(b_enc_oo, b_mac_oo)`.
    pub fn default_oo(self) -> (bool, bool) {
        match self {
            Instantiation::StdFaae => (false, false),
            Instantiation::GrapheneAe => (true, false),
            Instantiation::GraphenePoly => (true, true),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Instantiation::StdFaae => "std_faae",
            Instantiation::GrapheneAe => "graphene_ae",
            Instantiation::GraphenePoly => "graphene_poly",
        }
    }
}

impl fmt::Display for Instantiation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Instantiation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "std_faae" | "std" | "faae" => Ok(Instantiation::StdFaae),
            "graphene_ae" | "ae" => Ok(Instantiation::GrapheneAe),
            "graphene_poly" | "poly" => Ok(Instantiation::GraphenePoly),
            _ => Err(Error::InvalidConfig(format!("unknown instantiation {s:?}"))),
        }
    }
}

/// Tag aggregation mode. Discriminants are the wire codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum AggMode {
    /// `acc <- H(acc || tag)`
    Hash = 1,
    /// `acc <- acc ^ tag`
    Xor = 2,
    /// `acc <- acc + tag mod 2^130 - 5`
    AddQ = 3,
}

impl AggMode {
    pub const ALL: [AggMode; 3] = [AggMode::Hash, AggMode::Xor, AggMode::AddQ];

    pub fn from_code(c: u8) -> Result<Self> {
        match c {
            1 => Ok(AggMode::Hash),
            2 => Ok(AggMode::Xor),
            3 => Ok(AggMode::AddQ),
            _ => Err(Error::InvalidArgument("aggregation mode must be 1, 2 or 3")),
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    /// Width of the finalized aggregate in bytes.
    pub fn tag_width(self) -> usize {
        match self {
            AggMode::Hash => 32,
            AggMode::Xor => 16,
            AggMode::AddQ => 17,
        }
    }
}

/// The `(kappa, n, b_enc_oo, b_mac_oo, b_agg, b_bver)` tuple plus the
/// instantiation and the maximum message length the tables are sized for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstantiationConfig {
    pub instantiation: Instantiation,
    pub kappa: Kappa,
    pub n: u32,
    pub enc_oo: bool,
    pub mac_oo: bool,
    pub agg: AggMode,
    pub bver: bool,
    pub max_msg_len: u32,
}

impl InstantiationConfig {
    /// Default flags and aggregation for `instantiation` at kappa = 128.
    pub fn new(instantiation: Instantiation, n: u32, max_msg_len: u32) -> Self {
        let (enc_oo, mac_oo) = instantiation.default_oo();
        InstantiationConfig {
            instantiation,
            kappa: Kappa::K128,
            n,
            enc_oo,
            mac_oo,
            agg: instantiation.default_agg(),
            bver: false,
            max_msg_len,
        }
    }

    pub fn with_agg(mut self, agg: AggMode) -> Self {
        self.agg = agg;
        self
    }

    pub fn with_kappa(mut self, kappa: Kappa) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn with_oo(mut self, enc_oo: bool, mac_oo: bool) -> Self {
        self.enc_oo = enc_oo;
        self.mac_oo = mac_oo;
        self
    }

    pub fn uses_table(&self) -> bool {
        self.enc_oo || self.mac_oo
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig(
                "batch size n must be at least 1".into(),
            ));
        }
        if self.max_msg_len == 0 {
            return Err(Error::InvalidConfig(
                "max_msg_len must be at least 1".into(),
            ));
        }
        if self.bver {
            return Err(Error::InvalidConfig(
                "batch verification is not available; aggregate verification recomputes tags"
                    .into(),
            ));
        }
        match (self.instantiation, self.enc_oo, self.mac_oo) {
            (Instantiation::StdFaae, false, false) => Ok(()),
            (Instantiation::StdFaae, _, _) => Err(Error::InvalidConfig(
                "std_faae has no offline-online encryption or MAC".into(),
            )),
            (Instantiation::GrapheneAe, _, true) => Err(Error::InvalidConfig(
                "b_mac_oo requires a universal MAC with precomputable pads (graphene_poly)".into(),
            )),
            (Instantiation::GrapheneAe, _, false) => Ok(()),
            (Instantiation::GraphenePoly, e, m) if e == m => Ok(()),
            (Instantiation::GraphenePoly, _, _) => Err(Error::InvalidConfig(
                "graphene_poly precomputes encryption and MAC material together".into(),
            )),
        }
    }
}
