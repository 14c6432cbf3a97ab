//! Minimal MPEG-2 transport stream muxing for codec-free synthetic segments:
//! PAT, PMT and one private-data elementary stream with one PES per frame.

use crate::error::{Error, Result};

pub const PACKET_SIZE: usize = 188;
const SYNC: u8 = 0x47;
const PAT_PID: u16 = 0x0000;
const PMT_PID: u16 = 0x1000;
pub const ES_PID: u16 = 0x0100;
const PRIVATE_STREAM_1: u8 = 0xBD;
const STREAM_TYPE_PRIVATE: u8 = 0x06;
/// Offset added to every PTS, as real muxers do.
pub const PTS_OFFSET: u64 = 126_000;

/// Keeps continuity counters across the segments of one title, so the byte
/// concatenation of consecutive segments is itself a valid stream.
#[derive(Debug, Default)]
pub struct TsWriter {
    pat_cc: u8,
    pmt_cc: u8,
    es_cc: u8,
}

impl TsWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn write_tables(&mut self, out: &mut Vec<u8>) {
        let pat = psi_section(
            0x00,
            1,
            &[0x00, 0x01, 0xE0 | (PMT_PID >> 8) as u8, PMT_PID as u8],
        );
        let cc = next(&mut self.pat_cc);
        out.extend_from_slice(&psi_packet(PAT_PID, cc, &pat));

        let pmt_body = [
            0xE0 | (ES_PID >> 8) as u8,
            ES_PID as u8,
            0xF0,
            0x00,
            STREAM_TYPE_PRIVATE,
            0xE0 | (ES_PID >> 8) as u8,
            ES_PID as u8,
            0xF0,
            0x00,
        ];
        let pmt = psi_section(0x02, 1, &pmt_body);
        let cc = next(&mut self.pmt_cc);
        out.extend_from_slice(&psi_packet(PMT_PID, cc, &pmt));
    }

    /// One PES carrying `payload` stamped with a 90 kHz `pts`; the packet
    /// also carries a PCR equal to the PTS.
    pub fn write_frame(&mut self, out: &mut Vec<u8>, pts: u64, payload: &[u8]) -> Result<()> {
        let mut pes = Vec::with_capacity(14 + payload.len());
        pes.extend_from_slice(&[0x00, 0x00, 0x01, PRIVATE_STREAM_1]);
        let pes_len = 3 + 5 + payload.len();
        pes.extend_from_slice(&(pes_len as u16).to_be_bytes());
        pes.extend_from_slice(&[0x80, 0x80, 0x05]);
        pes.extend_from_slice(&encode_pts(pts));
        pes.extend_from_slice(payload);

        // header(4) + adaptation length(1) + flags(1) + PCR(6)
        let room = PACKET_SIZE - 4 - 8;
        if pes.len() > room {
            return Err(Error::Validation(format!(
                "frame payload of {} bytes does not fit one packet",
                payload.len()
            )));
        }
        let mut pkt = [0xFFu8; PACKET_SIZE];
        let cc = next(&mut self.es_cc);
        pkt[0] = SYNC;
        pkt[1] = 0x40 | (ES_PID >> 8) as u8;
        pkt[2] = ES_PID as u8;
        pkt[3] = 0x30 | cc;
        let af_len = PACKET_SIZE - 4 - 1 - pes.len();
        pkt[4] = af_len as u8;
        pkt[5] = 0x10;
        pkt[6..12].copy_from_slice(&encode_pcr(pts));
        // bytes 12..(5 + af_len) stay 0xFF stuffing
        pkt[5 + af_len..].copy_from_slice(&pes);
        out.extend_from_slice(&pkt);
        Ok(())
    }
}

fn next(cc: &mut u8) -> u8 {
    let v = *cc;
    *cc = (*cc + 1) & 0x0F;
    v
}

fn psi_section(table_id: u8, id: u16, body: &[u8]) -> Vec<u8> {
    let section_length = 5 + body.len() + 4;
    let mut s = vec![
        table_id,
        0xB0 | ((section_length >> 8) as u8 & 0x0F),
        section_length as u8,
        (id >> 8) as u8,
        id as u8,
        0xC1,
        0x00,
        0x00,
    ];
    s.extend_from_slice(body);
    let crc = crc32_mpeg2(&s);
    s.extend_from_slice(&crc.to_be_bytes());
    s
}

fn psi_packet(pid: u16, cc: u8, section: &[u8]) -> [u8; PACKET_SIZE] {
    let mut pkt = [0xFFu8; PACKET_SIZE];
    pkt[0] = SYNC;
    pkt[1] = 0x40 | (pid >> 8) as u8 & 0x1F;
    pkt[2] = pid as u8;
    pkt[3] = 0x10 | cc;
    pkt[4] = 0x00;
    pkt[5..5 + section.len()].copy_from_slice(section);
    pkt
}

fn encode_pts(pts: u64) -> [u8; 5] {
    let pts = pts & 0x1_FFFF_FFFF;
    [
        0x21 | ((pts >> 29) as u8 & 0x0E),
        (pts >> 22) as u8,
        0x01 | ((pts >> 14) as u8 & 0xFE),
        (pts >> 7) as u8,
        0x01 | ((pts << 1) as u8 & 0xFE),
    ]
}

fn decode_pts(b: &[u8]) -> u64 {
    (((b[0] as u64 >> 1) & 0x07) << 30)
        | ((b[1] as u64) << 22)
        | (((b[2] as u64) >> 1) << 15)
        | ((b[3] as u64) << 7)
        | ((b[4] as u64) >> 1)
}

fn encode_pcr(base: u64) -> [u8; 6] {
    let base = base & 0x1_FFFF_FFFF;
    [
        (base >> 25) as u8,
        (base >> 17) as u8,
        (base >> 9) as u8,
        (base >> 1) as u8,
        ((base & 1) << 7) as u8 | 0x7E,
        0x00,
    ]
}

pub fn crc32_mpeg2(data: &[u8]) -> u32 {
    let mut crc = 0xFFFF_FFFFu32;
    for &byte in data {
        crc ^= (byte as u32) << 24;
        for _ in 0..8 {
            crc = if crc & 0x8000_0000 != 0 {
                (crc << 1) ^ 0x04C1_1DB7
            } else {
                crc << 1
            };
        }
    }
    crc
}

/// Check packet alignment and sync bytes; returns the packet count.
pub fn check_stream(bytes: &[u8]) -> Result<usize> {
    if bytes.len() % PACKET_SIZE != 0 {
        return Err(Error::Integrity(format!(
            "transport stream length {} is not a multiple of {PACKET_SIZE}",
            bytes.len()
        )));
    }
    if let Some(i) = bytes.chunks(PACKET_SIZE).position(|p| p[0] != SYNC) {
        return Err(Error::Integrity(format!("packet {i} lacks the sync byte")));
    }
    Ok(bytes.len() / PACKET_SIZE)
}

/// A PES recovered from the synthetic elementary stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrivateFrame {
    pub pts: u64,
    pub payload: Vec<u8>,
}

/// Pull the single-packet PES frames of the private stream back out.
pub fn read_private_frames(bytes: &[u8]) -> Result<Vec<PrivateFrame>> {
    check_stream(bytes)?;
    let mut frames = Vec::new();
    for pkt in bytes.chunks(PACKET_SIZE) {
        let pid = ((pkt[1] as u16 & 0x1F) << 8) | pkt[2] as u16;
        if pid != ES_PID || pkt[1] & 0x40 == 0 {
            continue;
        }
        let mut off = 4;
        if pkt[3] & 0x20 != 0 {
            off += 1 + pkt[4] as usize;
        }
        let pes = &pkt[off..];
        if pes.len() < 14 || pes[..3] != [0, 0, 1] {
            return Err(Error::Integrity("malformed PES header".into()));
        }
        let pes_len = u16::from_be_bytes([pes[4], pes[5]]) as usize;
        let header_len = pes[8] as usize;
        let pts = decode_pts(&pes[9..14]);
        let start = 9 + header_len;
        let end = 6 + pes_len;
        if end > pes.len() || start > end {
            return Err(Error::Integrity("PES length exceeds packet".into()));
        }
        frames.push(PrivateFrame {
            pts,
            payload: pes[start..end].to_vec(),
        });
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crc_matches_reference_vector() {
        // CRC-32/MPEG-2 check value for "123456789"
        assert_eq!(crc32_mpeg2(b"123456789"), 0x0376_E6E7);
    }

    #[test]
    fn pts_round_trips() {
        for pts in [0u64, 1, 90_000, PTS_OFFSET + 27_000_000, 0x1_FFFF_FFFF] {
            assert_eq!(decode_pts(&encode_pts(pts)), pts);
        }
    }

    #[test]
    fn frames_survive_mux_and_demux() {
        let mut w = TsWriter::new();
        let mut out = Vec::new();
        w.write_tables(&mut out);
        for i in 0..20u64 {
            w.write_frame(&mut out, PTS_OFFSET + i * 3600, &[i as u8, 1, 2]).unwrap();
        }
        assert_eq!(check_stream(&out).unwrap(), 22);
        let frames = read_private_frames(&out).unwrap();
        assert_eq!(frames.len(), 20);
        assert_eq!(frames[7].pts, PTS_OFFSET + 7 * 3600);
        assert_eq!(frames[7].payload, vec![7, 1, 2]);
    }

    #[test]
    fn psi_crc_validates() {
        let mut w = TsWriter::new();
        let mut out = Vec::new();
        w.write_tables(&mut out);
        // Section CRC over the whole section including its CRC is zero.
        let sec_len = (((out[6] as usize) & 0x0F) << 8) | out[7] as usize;
        assert_eq!(crc32_mpeg2(&out[5..5 + 3 + sec_len]), 0);
    }

    #[test]
    fn misaligned_stream_rejected() {
        assert!(check_stream(&[0x47; 100]).is_err());
        let mut bad = vec![0x47; 376];
        bad[188] = 0;
        assert!(check_stream(&bad).is_err());
    }
}
