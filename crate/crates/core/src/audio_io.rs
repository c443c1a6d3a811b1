//! RIFF/WAVE decoding and encoding for 16-bit PCM, plus linear resampling.

use thiserror::Error;

const PCM_FORMAT_TAG: u16 = 1;
const HEADER_LEN: usize = 44;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AudioError {
    #[error("malformed container: {field}: {detail}")]
    MalformedContainer { field: &'static str, detail: String },
    #[error("unsupported format: {field} = {value}")]
    UnsupportedFormat { field: &'static str, value: String },
    #[error("invalid clip: {0}")]
    InvalidClip(String),
}

fn malformed(field: &'static str, detail: impl Into<String>) -> AudioError {
    AudioError::MalformedContainer {
        field,
        detail: detail.into(),
    }
}

fn unsupported(field: &'static str, value: impl ToString) -> AudioError {
    AudioError::UnsupportedFormat {
        field,
        value: value.to_string(),
    }
}

/// Mono PCM audio with amplitudes in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidClip("sample rate must be positive".into()));
        }
        if let Some((i, s)) = samples.iter().enumerate().find(|(_, s)| !(-1.0..=1.0).contains(*s)) {
            return Err(AudioError::InvalidClip(format!("sample {i} = {s} is outside [-1, 1]")));
        }
        Ok(AudioClip { samples, sample_rate })
    }

    /// Builds a clip, clamping every sample into `[-1, 1]` (NaN becomes 0).
    pub fn from_clamped(samples: Vec<f64>, sample_rate: u32) -> Result<Self, AudioError> {
        let samples = samples
            .into_iter()
            .map(|s| if s.is_nan() { 0.0 } else { s.clamp(-1.0, 1.0) })
            .collect();
        Self::new(samples, sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Samples in `[start, end)`, clamped to the clip.
    pub fn slice(&self, start: usize, end: usize) -> &[f64] {
        let end = end.min(self.samples.len());
        let start = start.min(end);
        &self.samples[start..end]
    }

    /// Appends another clip of the same rate.
    pub fn concat(&self, other: &AudioClip) -> Result<AudioClip, AudioError> {
        if self.sample_rate != other.sample_rate {
            return Err(AudioError::InvalidClip(format!(
                "cannot concatenate {} Hz and {} Hz clips",
                self.sample_rate, other.sample_rate
            )));
        }
        let mut samples = self.samples.clone();
        samples.extend_from_slice(&other.samples);
        Ok(AudioClip {
            samples,
            sample_rate: self.sample_rate,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, field: &'static str) -> Result<&'a [u8], AudioError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|end| *end <= self.bytes.len())
            .ok_or_else(|| {
                malformed(
                    field,
                    format!(
                        "needs {n} bytes at offset {}, only {} remain",
                        self.pos,
                        self.bytes.len() - self.pos
                    ),
                )
            })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self, field: &'static str) -> Result<u32, AudioError> {
        let b = self.take(4, field)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

fn le_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn le_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

struct FmtChunk {
    channels: u16,
    sample_rate: u32,
}

fn parse_fmt(body: &[u8]) -> Result<FmtChunk, AudioError> {
    if body.len() < 16 {
        return Err(malformed("fmt ", format!("chunk is {} bytes, need 16", body.len())));
    }
    let format_tag = le_u16(body, 0);
    let channels = le_u16(body, 2);
    let sample_rate = le_u32(body, 4);
    let bits = le_u16(body, 14);
    if format_tag != PCM_FORMAT_TAG {
        return Err(unsupported("format_tag", format_tag));
    }
    if bits != 16 {
        return Err(unsupported("bits_per_sample", bits));
    }
    if channels == 0 || channels > 2 {
        return Err(unsupported("channels", channels));
    }
    if sample_rate == 0 {
        return Err(unsupported("sample_rate", sample_rate));
    }
    Ok(FmtChunk { channels, sample_rate })
}

/// Decodes a RIFF/WAVE byte stream holding 16-bit PCM into a mono clip.
///
/// Chunks may come in any order; unknown chunks are skipped, and odd-sized
/// chunks are followed by a pad byte which may be missing at end of file.
/// Stereo frames are averaged.
pub fn parse_wav(bytes: &[u8]) -> Result<AudioClip, AudioError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, "riff_magic")?;
    if magic != b"RIFF" {
        return Err(malformed(
            "riff_magic",
            format!("expected \"RIFF\", found {:?}", String::from_utf8_lossy(magic)),
        ));
    }
    let _riff_size = r.u32("riff_size")?;
    let wave = r.take(4, "wave_magic")?;
    if wave != b"WAVE" {
        return Err(malformed(
            "wave_magic",
            format!("expected \"WAVE\", found {:?}", String::from_utf8_lossy(wave)),
        ));
    }

    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<&[u8]> = None;
    while r.remaining() >= 8 {
        let id = r.take(4, "chunk_id")?;
        let size = r.u32("chunk_size")? as usize;
        let body = r.take(size, "chunk_body")?;
        if size % 2 == 1 && r.remaining() > 0 {
            r.pos += 1;
        }
        match id {
            b"fmt " => fmt = Some(parse_fmt(body)?),
            b"data" => data = Some(body),
            _ => {}
        }
    }
    if r.remaining() != 0 {
        return Err(malformed("chunk_header", format!("{} trailing bytes", r.remaining())));
    }

    let fmt = fmt.ok_or_else(|| malformed("fmt ", "missing chunk"))?;
    let data = data.ok_or_else(|| malformed("data", "missing chunk"))?;
    let block_align = 2 * fmt.channels as usize;
    if data.len() % block_align != 0 {
        return Err(malformed(
            "data",
            format!("length {} is not a multiple of block align {block_align}", data.len()),
        ));
    }

    let samples = data
        .chunks_exact(block_align)
        .map(|frame| {
            let sum: f64 = frame
                .chunks_exact(2)
                .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0)
                .sum();
            sum / fmt.channels as f64
        })
        .collect();
    AudioClip::new(samples, fmt.sample_rate)
}

fn quantize(s: f64) -> i16 {
    (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

/// Encodes a clip as a canonical 44-byte-header 16-bit mono PCM WAV.
pub fn write_wav(clip: &AudioClip) -> Vec<u8> {
    let data_len = clip.len() * 2;
    let mut out = Vec::with_capacity(HEADER_LEN + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM_FORMAT_TAG.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate().to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate() * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for s in clip.samples() {
        out.extend_from_slice(&quantize(*s).to_le_bytes());
    }
    out
}

/// Linear-interpolation resampling without anti-alias filtering.
///
/// The output has `round(len * target / source)` samples; output sample `i`
/// is read at input position `i * source / target`.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip, AudioError> {
    if target_rate == 0 {
        return Err(AudioError::InvalidClip("target rate must be positive".into()));
    }
    if target_rate == clip.sample_rate() {
        return Ok(clip.clone());
    }
    let src = clip.samples();
    let ratio = clip.sample_rate() as f64 / target_rate as f64;
    let out_len = (src.len() as f64 * target_rate as f64 / clip.sample_rate() as f64).round() as usize;
    let last = src.len().saturating_sub(1);
    let samples = (0..out_len)
        .map(|i| {
            let pos = i as f64 * ratio;
            let lo = (pos.floor() as usize).min(last);
            let hi = (lo + 1).min(last);
            let frac = pos - lo as f64;
            let frac = frac.clamp(0.0, 1.0);
            src[lo] + (src[hi] - src[lo]) * frac
        })
        .collect();
    AudioClip::from_clamped(samples, target_rate)
}
