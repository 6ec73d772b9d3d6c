#pragma once

#include <iosfwd>
#include <string>

#include "fan/tensor.hpp"

namespace fan {

// Tensor binary format: magic "FANT", u8 precision (0=f32, 1=f64),
// u8 rank, u64 dims, raw little-endian elements.
void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);

void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

// Binary PGM (P5) for 1-channel and PPM (P6) for 3-channel images.
// Tensors are C x H x W with values in [0,1], 8-bit quantized on disk.
void save_image(const std::string& path, const Tensor& img);
Tensor load_image(const std::string& path);

} // namespace fan
