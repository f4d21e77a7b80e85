//! Fixed-point quantization, reference discrete inference and memory images.

mod inference;
mod memory;
mod quantize;

pub use inference::{predict_steps, quantized_accuracy, quantized_inference, quantized_layer, QuantizedOutput, StepSpike};
pub use memory::{
    export_memory_image, pack_fields, unpack_fields, word_bytes, LayerMemory, MemoryImage, PackedMemory, IMAGE_MAGIC,
    IMAGE_VERSION,
};
pub use quantize::{
    quantize_model, saturate, QuantizedLayer, QuantizedModel, DELAY_BITS, DELAY_MAX, MEMBRANE_BITS, MEMBRANE_MAX,
    MEMBRANE_MIN, WEIGHT_BITS, WEIGHT_MAX, WEIGHT_MIN,
};
