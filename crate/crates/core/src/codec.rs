//! SNMPv3 message codec for the unauthenticated discovery exchange.
//!
//! ```text
//! SEQUENCE {
//!     INTEGER msgVersion (3)
//!     SEQUENCE msgGlobalData { msgID, msgMaxSize, msgFlags (1 octet), msgSecurityModel }
//!     OCTET STRING msgSecurityParameters {
//!         SEQUENCE { engineID, engineBoots, engineTime, userName, authParams, privParams }
//!     }
//!     msgData (plaintext ScopedPDU, kept as an opaque element)
//! }
//! ```

use alloc::vec::Vec;

use crate::ber::{self, BerError, Reader, TAG_COUNTER32, TAG_OCTET_STRING, TAG_SEQUENCE};

pub const SNMP_VERSION_3: i64 = 3;
pub const SECURITY_MODEL_USM: i64 = 3;

pub const FLAG_AUTH: u8 = 0x01;
pub const FLAG_PRIV: u8 = 0x02;
pub const FLAG_REPORTABLE: u8 = 0x04;

/// msgMaxSize advertised by discovery probes.
pub const PROBE_MAX_SIZE: i32 = 65507;

pub const MSG_ID_MAX: i64 = i32::MAX as i64;

/// usmStatsUnknownUserNames.0
pub const OID_USM_UNKNOWN_USER_NAMES: [u32; 11] = [1, 3, 6, 1, 6, 3, 15, 1, 1, 3, 0];
/// usmStatsUnknownEngineIDs.0
pub const OID_USM_UNKNOWN_ENGINE_IDS: [u32; 11] = [1, 3, 6, 1, 6, 3, 15, 1, 1, 4, 0];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("malformed packet: {0}")]
    Malformed(#[from] BerError),
    #[error("malformed packet: bad {0}")]
    MalformedField(&'static str),
    #[error("unsupported SNMP version {0}")]
    UnsupportedVersion(i64),
    #[error("unsupported security model {0}")]
    UnsupportedSecurityModel(i64),
}

impl CodecError {
    pub fn is_malformed(&self) -> bool {
        matches!(self, Self::Malformed(_) | Self::MalformedField(_))
    }
}

/// User-based security model parameters carried in msgSecurityParameters.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UsmParameters {
    pub engine_id: Vec<u8>,
    pub engine_boots: i64,
    pub engine_time: i64,
    pub user_name: Vec<u8>,
    pub auth_params: Vec<u8>,
    pub priv_params: Vec<u8>,
}

impl UsmParameters {
    fn encode(&self, out: &mut Vec<u8>) {
        ber::write_constructed(out, TAG_SEQUENCE, |s| {
            ber::write_octets(s, &self.engine_id);
            ber::write_integer(s, self.engine_boots);
            ber::write_integer(s, self.engine_time);
            ber::write_octets(s, &self.user_name);
            ber::write_octets(s, &self.auth_params);
            ber::write_octets(s, &self.priv_params);
        });
    }

    fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut outer = Reader::new(bytes);
        let mut seq = outer.enter(TAG_SEQUENCE)?;
        outer.finish()?;
        let usm = Self {
            engine_id: seq.read_octets()?.to_vec(),
            engine_boots: seq.read_integer()?,
            engine_time: seq.read_integer()?,
            user_name: seq.read_octets()?.to_vec(),
            auth_params: seq.read_octets()?.to_vec(),
            priv_params: seq.read_octets()?.to_vec(),
        };
        seq.finish()?;
        Ok(usm)
    }
}

/// A complete SNMPv3 message. The scoped PDU is stored as the raw msgData
/// element so that content this codec does not model survives untouched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnmpV3Message {
    pub msg_version: i64,
    pub msg_id: i32,
    pub msg_max_size: i32,
    pub msg_flags: u8,
    pub msg_security_model: i64,
    pub usm: UsmParameters,
    pub scoped_pdu: Vec<u8>,
}

impl SnmpV3Message {
    pub fn is_reportable(&self) -> bool {
        self.msg_flags & FLAG_REPORTABLE != 0
    }

    pub fn is_authenticated(&self) -> bool {
        self.msg_flags & FLAG_AUTH != 0
    }

    pub fn is_private(&self) -> bool {
        self.msg_flags & FLAG_PRIV != 0
    }

    /// A discovery probe: no credentials, no engine knowledge.
    pub fn is_discovery(&self) -> bool {
        !self.is_authenticated()
            && !self.is_private()
            && self.usm.engine_id.is_empty()
            && self.usm.user_name.is_empty()
            && self.usm.auth_params.is_empty()
            && self.usm.priv_params.is_empty()
            && self.usm.engine_boots == 0
            && self.usm.engine_time == 0
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + self.scoped_pdu.len() + self.usm.engine_id.len());
        ber::write_constructed(&mut out, TAG_SEQUENCE, |m| {
            ber::write_integer(m, self.msg_version);
            ber::write_constructed(m, TAG_SEQUENCE, |g| {
                ber::write_integer(g, self.msg_id as i64);
                ber::write_integer(g, self.msg_max_size as i64);
                ber::write_octets(g, &[self.msg_flags]);
                ber::write_integer(g, self.msg_security_model);
            });
            let mut params = Vec::new();
            self.usm.encode(&mut params);
            ber::write_octets(m, &params);
            m.extend_from_slice(&self.scoped_pdu);
        });
        out
    }

    /// Decoded view of the plaintext scoped PDU, if it is one.
    pub fn scoped(&self) -> Result<ScopedPdu, CodecError> {
        ScopedPdu::decode(&self.scoped_pdu)
    }
}

fn checked_i32(v: i64, field: &'static str) -> Result<i32, CodecError> {
    if (0..=MSG_ID_MAX).contains(&v) {
        Ok(v as i32)
    } else {
        Err(CodecError::MalformedField(field))
    }
}

/// Decodes one datagram. Every failure is a typed error; the reader never
/// looks past the declared lengths or the end of `datagram`.
pub fn decode_message(datagram: &[u8]) -> Result<SnmpV3Message, CodecError> {
    let mut top = Reader::new(datagram);
    let mut msg = top.enter(TAG_SEQUENCE)?;
    top.finish()?;

    let msg_version = msg.read_integer()?;
    if msg_version != SNMP_VERSION_3 {
        return Err(CodecError::UnsupportedVersion(msg_version));
    }

    let mut global = msg.enter(TAG_SEQUENCE)?;
    let msg_id = checked_i32(global.read_integer()?, "msgID")?;
    let msg_max_size = checked_i32(global.read_integer()?, "msgMaxSize")?;
    let flags = global.read_octets()?;
    if flags.len() != 1 {
        return Err(CodecError::MalformedField("msgFlags"));
    }
    let msg_security_model = global.read_integer()?;
    global.finish()?;
    if msg_security_model != SECURITY_MODEL_USM {
        return Err(CodecError::UnsupportedSecurityModel(msg_security_model));
    }

    let usm = UsmParameters::decode(msg.read_octets()?)?;
    let scoped_pdu = msg.read_tlv()?.raw.to_vec();
    msg.finish()?;

    Ok(SnmpV3Message { msg_version, msg_id, msg_max_size, msg_flags: flags[0], msg_security_model, usm, scoped_pdu })
}

/// Builds the unsolicited synchronization request: empty engine ID and user,
/// zero boots/time, reportable flag only, GetRequest with no variable bindings.
pub fn encode_discovery_request(msg_id: i64) -> Result<Vec<u8>, CodecError> {
    if !(0..=MSG_ID_MAX).contains(&msg_id) {
        return Err(CodecError::InvalidArgument("msg_id must be in 0..2^31"));
    }
    let scoped = ScopedPdu {
        context_engine_id: Vec::new(),
        context_name: Vec::new(),
        pdu: Pdu {
            pdu_type: PduType::GetRequest,
            request_id: msg_id,
            error_status: 0,
            error_index: 0,
            varbinds: Vec::new(),
        },
    };
    let msg = SnmpV3Message {
        msg_version: SNMP_VERSION_3,
        msg_id: msg_id as i32,
        msg_max_size: PROBE_MAX_SIZE,
        msg_flags: FLAG_REPORTABLE,
        msg_security_model: SECURITY_MODEL_USM,
        usm: UsmParameters::default(),
        scoped_pdu: scoped.encode(),
    };
    Ok(msg.encode())
}

/// What a discovery response reveals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscoveryReport {
    pub engine_id: Vec<u8>,
    pub engine_boots: i64,
    pub engine_time: i64,
    pub payload_size: usize,
}

pub fn extract_discovery_report(msg: &SnmpV3Message, received_size: usize) -> DiscoveryReport {
    DiscoveryReport {
        engine_id: msg.usm.engine_id.clone(),
        engine_boots: msg.usm.engine_boots,
        engine_time: msg.usm.engine_time,
        payload_size: received_size,
    }
}

/// Decode + extract in one step.
pub fn decode_discovery_report(datagram: &[u8]) -> Result<DiscoveryReport, CodecError> {
    decode_message(datagram).map(|m| extract_discovery_report(&m, datagram.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PduType {
    GetRequest,
    GetNextRequest,
    Response,
    SetRequest,
    GetBulkRequest,
    InformRequest,
    Trap,
    Report,
    Other(u8),
}

impl PduType {
    pub fn from_tag(tag: u8) -> Self {
        match tag {
            0xa0 => Self::GetRequest,
            0xa1 => Self::GetNextRequest,
            0xa2 => Self::Response,
            0xa3 => Self::SetRequest,
            0xa5 => Self::GetBulkRequest,
            0xa6 => Self::InformRequest,
            0xa7 => Self::Trap,
            0xa8 => Self::Report,
            t => Self::Other(t),
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Self::GetRequest => 0xa0,
            Self::GetNextRequest => 0xa1,
            Self::Response => 0xa2,
            Self::SetRequest => 0xa3,
            Self::GetBulkRequest => 0xa5,
            Self::InformRequest => 0xa6,
            Self::Trap => 0xa7,
            Self::Report => 0xa8,
            Self::Other(t) => t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarBind {
    pub oid: Vec<u32>,
    /// Raw value element, tag and length included.
    pub value: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pdu {
    pub pdu_type: PduType,
    pub request_id: i64,
    pub error_status: i64,
    pub error_index: i64,
    pub varbinds: Vec<VarBind>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScopedPdu {
    pub context_engine_id: Vec<u8>,
    pub context_name: Vec<u8>,
    pub pdu: Pdu,
}

impl ScopedPdu {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        ber::write_constructed(&mut out, TAG_SEQUENCE, |s| {
            ber::write_octets(s, &self.context_engine_id);
            ber::write_octets(s, &self.context_name);
            ber::write_constructed(s, self.pdu.pdu_type.tag(), |p| {
                ber::write_integer(p, self.pdu.request_id);
                ber::write_integer(p, self.pdu.error_status);
                ber::write_integer(p, self.pdu.error_index);
                ber::write_constructed(p, TAG_SEQUENCE, |vbs| {
                    for vb in &self.pdu.varbinds {
                        ber::write_constructed(vbs, TAG_SEQUENCE, |v| {
                            ber::write_oid(v, &vb.oid);
                            v.extend_from_slice(&vb.value);
                        });
                    }
                });
            });
        });
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut top = Reader::new(bytes);
        let tlv = top.read_tlv()?;
        top.finish()?;
        if tlv.tag == TAG_OCTET_STRING {
            // encrypted msgData
            return Err(CodecError::MalformedField("scopedPDU (encrypted)"));
        }
        let mut top = Reader::new(bytes);
        let mut s = top.enter(TAG_SEQUENCE)?;
        let context_engine_id = s.read_octets()?.to_vec();
        let context_name = s.read_octets()?.to_vec();
        let pdu_tlv = s.read_tlv()?;
        s.finish()?;
        if pdu_tlv.tag & 0xe0 != 0xa0 {
            return Err(CodecError::MalformedField("PDU tag"));
        }
        let mut p = Reader::new(pdu_tlv.content);
        let request_id = p.read_integer()?;
        let error_status = p.read_integer()?;
        let error_index = p.read_integer()?;
        let mut vbs = p.enter(TAG_SEQUENCE)?;
        p.finish()?;
        let mut varbinds = Vec::new();
        while !vbs.is_empty() {
            let mut vb = vbs.enter(TAG_SEQUENCE)?;
            let oid = vb.read_oid()?;
            let value = vb.read_tlv()?.raw.to_vec();
            vb.finish()?;
            varbinds.push(VarBind { oid, value });
        }
        Ok(Self {
            context_engine_id,
            context_name,
            pdu: Pdu { pdu_type: PduType::from_tag(pdu_tlv.tag), request_id, error_status, error_index, varbinds },
        })
    }
}

/// Authoritative-side answer to a discovery or unknown-user request: a
/// Report PDU carrying the agent's engine ID, boots and time plus one
/// usmStats counter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportSpec<'a> {
    pub msg_id: i32,
    pub request_id: i64,
    pub engine_id: &'a [u8],
    pub engine_boots: i64,
    pub engine_time: i64,
    pub max_size: i32,
    pub counter_oid: &'a [u32],
    pub counter: u32,
}

pub fn encode_report(spec: &ReportSpec<'_>) -> Vec<u8> {
    let mut counter = Vec::new();
    ber::write_unsigned(&mut counter, TAG_COUNTER32, spec.counter);
    let scoped = ScopedPdu {
        context_engine_id: spec.engine_id.to_vec(),
        context_name: Vec::new(),
        pdu: Pdu {
            pdu_type: PduType::Report,
            request_id: spec.request_id,
            error_status: 0,
            error_index: 0,
            varbinds: alloc::vec![VarBind { oid: spec.counter_oid.to_vec(), value: counter }],
        },
    };
    SnmpV3Message {
        msg_version: SNMP_VERSION_3,
        msg_id: spec.msg_id,
        msg_max_size: spec.max_size,
        msg_flags: 0,
        msg_security_model: SECURITY_MODEL_USM,
        usm: UsmParameters {
            engine_id: spec.engine_id.to_vec(),
            engine_boots: spec.engine_boots,
            engine_time: spec.engine_time,
            ..Default::default()
        },
        scoped_pdu: scoped.encode(),
    }
    .encode()
}
