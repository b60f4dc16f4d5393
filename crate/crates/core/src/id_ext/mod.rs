//! Extensions of the broadcast construction: three receivers, a common
//! message, and one-sided feedback with a short transmission code appended.

pub mod bc3;
pub mod cm;
pub mod concentration;
pub mod fb;
pub mod transmission;

pub use bc3::{build_bc3_code, evaluate_bc3, Bc3IdCode, Bc3IdParams, MultiReport};
pub use cm::{build_cm_code, evaluate_cm, CmIdCode, CmIdParams};
pub use concentration::{fb_type_concentration_check, CausalEncoder, ConcentrationResult, MemorylessEncoder, MessageDependentEncoder, SwitchingEncoder};
pub use fb::{build_fb_code, encode_fb, evaluate_fb, resolvability_tv, FbIdCode, FbIdParams, FbReport, FbTranscript};
pub use transmission::{build_transmission_code, CodebookSpec, TransmissionCode, TxDecoder};
