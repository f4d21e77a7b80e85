//! Packed on-chip memory images.
//!
//! Each layer owns a synapse memory with one word per presynaptic address
//! (`neurons` fields of 4-bit two's complement weights) and a dendrite memory
//! with one word per task (`neurons` fields of 8-bit delays). Field `j` of a
//! word occupies bits `[j*Q, (j+1)*Q)`, bit 0 being the LSB of byte 0.
//!
//! File layout (little-endian):
//!
//! ```text
//! magic    8 bytes "TTFSMEMI"
//! version  u32
//! layers   u32
//! t_max    u16
//! n_tasks  u32
//! per layer:
//!   inputs u32, neurons u32, weight_bits u8, delay_bits u8,
//!   threshold i16, has_dendrites u8, scale f64,
//!   synapse words (inputs * ceil(neurons*weight_bits/8) bytes),
//!   dendrite words (n_tasks * ceil(neurons*delay_bits/8) bytes)
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::quantize::{QuantizedLayer, QuantizedModel, DELAY_BITS, WEIGHT_BITS};
use crate::error::{Error, Result};

pub const IMAGE_MAGIC: &[u8; 8] = b"TTFSMEMI";
pub const IMAGE_VERSION: u32 = 1;

/// A word-addressed memory of fixed-width packed words.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackedMemory {
    pub depth: usize,
    pub fields: usize,
    pub field_bits: u32,
    pub bytes: Vec<u8>,
}

impl PackedMemory {
    pub fn zeroed(depth: usize, fields: usize, field_bits: u32) -> Self {
        let width = word_bytes(fields, field_bits);
        Self {
            depth,
            fields,
            field_bits,
            bytes: vec![0; depth * width],
        }
    }

    pub fn word_bytes(&self) -> usize {
        word_bytes(self.fields, self.field_bits)
    }

    pub fn word(&self, addr: usize) -> &[u8] {
        let w = self.word_bytes();
        &self.bytes[addr * w..(addr + 1) * w]
    }

    pub fn word_mut(&mut self, addr: usize) -> &mut [u8] {
        let w = self.word_bytes();
        &mut self.bytes[addr * w..(addr + 1) * w]
    }

    /// Flips one bit of one word, used for fault injection.
    pub fn flip_bit(&mut self, addr: usize, bit: usize) -> Result<()> {
        if addr >= self.depth || bit >= self.fields * self.field_bits as usize {
            return Err(Error::Config(format!("bit {bit} of word {addr} is outside the memory")));
        }
        self.word_mut(addr)[bit / 8] ^= 1 << (bit % 8);
        Ok(())
    }
}

pub fn word_bytes(fields: usize, field_bits: u32) -> usize {
    (fields * field_bits as usize).div_ceil(8)
}

/// Packs raw field values (already masked to `bits`) into a word.
pub fn pack_fields(values: &[u32], bits: u32, word: &mut [u8]) -> Result<()> {
    if word.len() != word_bytes(values.len(), bits) {
        return Err(Error::dim("packed word bytes", word_bytes(values.len(), bits), word.len()));
    }
    word.fill(0);
    for (j, &v) in values.iter().enumerate() {
        if bits < 32 && v >> bits != 0 {
            return Err(Error::Quantization(format!("field value {v:#x} does not fit in {bits} bits")));
        }
        for b in 0..bits as usize {
            if v >> b & 1 == 1 {
                let pos = j * bits as usize + b;
                word[pos / 8] |= 1 << (pos % 8);
            }
        }
    }
    Ok(())
}

pub fn unpack_fields(word: &[u8], fields: usize, bits: u32) -> Vec<u32> {
    (0..fields)
        .map(|j| {
            (0..bits as usize).fold(0u32, |acc, b| {
                let pos = j * bits as usize + b;
                acc | (((word[pos / 8] >> (pos % 8)) & 1) as u32) << b
            })
        })
        .collect()
}

#[inline]
fn to_twos(v: i8, bits: u32) -> u32 {
    (v as i32 as u32) & ((1 << bits) - 1)
}

#[inline]
fn from_twos(raw: u32, bits: u32) -> i8 {
    let sign = 1u32 << (bits - 1);
    ((raw ^ sign) as i32 - sign as i32) as i8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerMemory {
    pub inputs: usize,
    pub neurons: usize,
    pub threshold: i16,
    pub has_dendrites: bool,
    pub scale: f64,
    pub synapse: PackedMemory,
    pub dendrite: PackedMemory,
}

impl LayerMemory {
    /// Weights of all neurons for one presynaptic address.
    pub fn read_synapse(&self, addr: usize) -> Vec<i8> {
        let mut out = vec![0; self.neurons];
        self.read_synapse_into(addr, &mut out);
        out
    }

    pub fn read_synapse_into(&self, addr: usize, out: &mut [i8]) {
        let bits = self.synapse.field_bits;
        let word = self.synapse.word(addr);
        let mask = (1u32 << bits) - 1;
        for (j, w) in out.iter_mut().enumerate() {
            let pos = j * bits as usize;
            let lo = word[pos / 8] as u32;
            let hi = word.get(pos / 8 + 1).copied().unwrap_or(0) as u32;
            *w = from_twos(((lo | hi << 8) >> (pos % 8)) & mask, bits);
        }
    }

    /// Delays of all neurons for one task.
    pub fn read_dendrite(&self, task: usize) -> Vec<u8> {
        unpack_fields(self.dendrite.word(task), self.neurons, self.dendrite.field_bits)
            .into_iter()
            .map(|r| r as u8)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryImage {
    pub t_max: u16,
    pub n_tasks: usize,
    pub layers: Vec<LayerMemory>,
}

pub fn export_memory_image(model: &QuantizedModel) -> Result<MemoryImage> {
    model.validate()?;
    let mut layers = Vec::with_capacity(model.layers.len());
    for layer in &model.layers {
        let mut synapse = PackedMemory::zeroed(layer.inputs, layer.neurons, WEIGHT_BITS);
        for i in 0..layer.inputs {
            let row: Vec<u32> = (0..layer.neurons).map(|j| to_twos(layer.weight(i, j), WEIGHT_BITS)).collect();
            pack_fields(&row, WEIGHT_BITS, synapse.word_mut(i))?;
        }
        let mut dendrite = PackedMemory::zeroed(model.n_tasks, layer.neurons, DELAY_BITS);
        for k in 0..model.n_tasks {
            let row: Vec<u32> = layer.delay_row(k).iter().map(|&d| d as u32).collect();
            pack_fields(&row, DELAY_BITS, dendrite.word_mut(k))?;
        }
        layers.push(LayerMemory {
            inputs: layer.inputs,
            neurons: layer.neurons,
            threshold: layer.threshold,
            has_dendrites: layer.has_dendrites,
            scale: layer.scale,
            synapse,
            dendrite,
        });
    }
    Ok(MemoryImage {
        t_max: model.t_max,
        n_tasks: model.n_tasks,
        layers,
    })
}

impl MemoryImage {
    pub fn to_quantized(&self) -> Result<QuantizedModel> {
        let layers = self
            .layers
            .iter()
            .map(|m| QuantizedLayer {
                inputs: m.inputs,
                neurons: m.neurons,
                weights: (0..m.inputs).flat_map(|i| m.read_synapse(i)).collect(),
                scale: m.scale,
                threshold: m.threshold,
                delays: (0..self.n_tasks).flat_map(|k| m.read_dendrite(k)).collect(),
                has_dendrites: m.has_dendrites,
            })
            .collect();
        let model = QuantizedModel {
            layers,
            n_tasks: self.n_tasks,
            t_max: self.t_max,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(IMAGE_MAGIC);
        out.extend_from_slice(&IMAGE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.t_max.to_le_bytes());
        out.extend_from_slice(&(self.n_tasks as u32).to_le_bytes());
        for l in &self.layers {
            out.extend_from_slice(&(l.inputs as u32).to_le_bytes());
            out.extend_from_slice(&(l.neurons as u32).to_le_bytes());
            out.push(l.synapse.field_bits as u8);
            out.push(l.dendrite.field_bits as u8);
            out.extend_from_slice(&l.threshold.to_le_bytes());
            out.push(l.has_dendrites as u8);
            out.extend_from_slice(&l.scale.to_le_bytes());
            out.extend_from_slice(&l.synapse.bytes);
            out.extend_from_slice(&l.dendrite.bytes);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != IMAGE_MAGIC {
            return Err(Error::Format("memory image: missing TTFSMEMI magic".into()));
        }
        let version = r.u32()?;
        if version != IMAGE_VERSION {
            return Err(Error::Format(format!("memory image: unsupported version {version}")));
        }
        let n_layers = r.u32()? as usize;
        let t_max = u16::from_le_bytes(r.array()?);
        let n_tasks = r.u32()? as usize;
        let mut layers = Vec::with_capacity(n_layers.min(64));
        for _ in 0..n_layers {
            let inputs = r.u32()? as usize;
            let neurons = r.u32()? as usize;
            let weight_bits = r.take(1)?[0] as u32;
            let delay_bits = r.take(1)?[0] as u32;
            if weight_bits != WEIGHT_BITS || delay_bits != DELAY_BITS {
                return Err(Error::Format(format!(
                    "memory image: field widths {weight_bits}/{delay_bits} unsupported"
                )));
            }
            let threshold = i16::from_le_bytes(r.array()?);
            let has_dendrites = r.take(1)?[0] != 0;
            let scale = f64::from_le_bytes(r.array()?);
            let mut synapse = PackedMemory::zeroed(inputs, neurons, weight_bits);
            let n = synapse.bytes.len();
            synapse.bytes.copy_from_slice(r.take(n)?);
            let mut dendrite = PackedMemory::zeroed(n_tasks, neurons, delay_bits);
            let n = dendrite.bytes.len();
            dendrite.bytes.copy_from_slice(r.take(n)?);
            layers.push(LayerMemory {
                inputs,
                neurons,
                threshold,
                has_dendrites,
                scale,
                synapse,
                dendrite,
            });
        }
        if r.pos != bytes.len() {
            return Err(Error::Format("memory image: trailing bytes".into()));
        }
        Ok(Self { t_max, n_tasks, layers })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingPath(path.to_path_buf()));
        }
        Self::from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("memory image: truncated".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn model(weights: Vec<i8>, inputs: usize, neurons: usize, n_tasks: usize) -> QuantizedModel {
        QuantizedModel {
            layers: vec![QuantizedLayer {
                inputs,
                neurons,
                weights,
                scale: 0.125,
                threshold: 9,
                delays: (0..n_tasks * neurons).map(|k| (k * 37 % 256) as u8).collect(),
                has_dendrites: true,
            }],
            n_tasks,
            t_max: 450,
        }
    }

    #[test]
    fn two_weights_pack_into_one_byte() {
        let image = export_memory_image(&model(vec![-1, 3], 1, 2, 1)).unwrap();
        assert_eq!(image.layers[0].synapse.word(0), &[0x3F]);
    }

    #[test]
    fn dendrite_memory_has_one_word_per_task() {
        let image = export_memory_image(&model(vec![1; 12], 3, 4, 5)).unwrap();
        assert_eq!(image.layers[0].dendrite.depth, 5);
        assert_eq!(image.layers[0].dendrite.bytes.len(), 5 * 4);
        assert_eq!(image.layers[0].synapse.depth, 3);
        assert_eq!(image.layers[0].synapse.bytes.len(), 3 * 2);
    }

    #[test]
    fn oversized_field_is_rejected() {
        let mut word = [0u8; 1];
        assert!(pack_fields(&[16, 0], 4, &mut word).is_err());
    }

    #[test]
    fn file_round_trip_and_corruption() {
        let q = model(vec![-8, 7, 0, -3, 2, 5], 2, 3, 2);
        let image = export_memory_image(&q).unwrap();
        let bytes = image.to_bytes();
        let back = MemoryImage::from_bytes(&bytes).unwrap();
        assert_eq!(back, image);
        assert_eq!(back.to_quantized().unwrap(), q);
        assert!(MemoryImage::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[3] ^= 0xFF;
        assert!(MemoryImage::from_bytes(&bad).is_err());
    }

    #[test]
    fn flipped_bit_changes_one_weight() {
        let q = model(vec![1, 2, 3], 1, 3, 1);
        let mut image = export_memory_image(&q).unwrap();
        image.layers[0].synapse.flip_bit(0, 5).unwrap();
        assert_eq!(image.layers[0].read_synapse(0), vec![1, 0, 3]);
        assert!(image.layers[0].synapse.flip_bit(1, 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn pack_unpack_round_trip(
            (inputs, neurons, weights) in (1usize..6, 1usize..9).prop_flat_map(|(i, j)| {
                (Just(i), Just(j), proptest::collection::vec(-8i8..=7, i * j))
            }),
            n_tasks in 1usize..6,
        ) {
            let q = model(weights, inputs, neurons, n_tasks);
            let image = export_memory_image(&q).unwrap();
            prop_assert_eq!(image.to_quantized().unwrap(), q);
        }
    }
}
