//! MNIST loading, TTFS input encoding and the Split MNIST task stream.

mod encode;
mod idx;
mod split;

pub use encode::{encode_ttfs, encode_ttfs_steps, intensity_to_time, round_half_away, time_to_intensity, INTENSITY_MAX};
pub use idx::{load_idx, load_mnist_dir, write_idx, RawImage, IMAGE_MAGIC, IMAGE_PIXELS, LABEL_MAGIC};
pub use split::{build_split_mnist, LabeledImage, Task, TaskSizes, TaskStream, SPLIT_TASKS};
