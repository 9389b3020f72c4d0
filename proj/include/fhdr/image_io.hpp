#pragma once

#include <filesystem>

#include "fhdr/tensor.hpp"

/// Lossless raster files used by the dataset and the CLI.
///
/// - PNM (P5 grey / P6 RGB), maxval up to 65535, big-endian 16-bit samples.
///   Values map to [0, 1] as sample / maxval.
/// - PFM (Pf grey / PF RGB), 32-bit floats, little-endian (negative scale),
///   rows stored bottom-to-top as the format prescribes.
///
/// Images are (1, C, H, W) tensors with C = 1 or 3.
namespace fhdr::image_io {

/// Writes `img` (values clamped to [0, 1]) quantized to 16 bits.
void write_pnm16(const std::filesystem::path& path, const Tensor& img);
/// Writes `img` (values clamped to [0, 1]) quantized to 8 bits.
void write_pnm8(const std::filesystem::path& path, const Tensor& img);
Tensor read_pnm(const std::filesystem::path& path);

/// Values are rounded to float; non-finite values are rejected.
void write_pfm(const std::filesystem::path& path, const Tensor& img);
Tensor read_pfm(const std::filesystem::path& path);

/// Dispatches on the extension: .pfm, or .ppm/.pgm/.pnm.
Tensor read_image(const std::filesystem::path& path);

}  // namespace fhdr::image_io
