#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fhdr/checkpoint.hpp"
#include "fhdr/wavelet.hpp"

namespace fhdr::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericAbort = 3 };

/// Entry point of the `fhdrnet` tool.
int main(int argc, const char* const* argv);
/// Same, with the arguments after the program name.
int run(const std::vector<std::string>& args);

/// Multi-level decomposition keyed "L<k>.<band>": detail bands for every level
/// up to `level` plus the LL of the last one.
NamedTensors decompose(const Tensor& image, std::size_t level, wavelet::Kind kind);
/// Inverse of decompose.
Tensor reconstruct(const NamedTensors& bands, std::size_t level, wavelet::Kind kind);

/// Min-max normalization of a band into [0, 1]; a zero-range band becomes 0.5.
Tensor normalize_panel(const Tensor& band);

/// Panel file for `band` ("LL", "LH", "HL", "HH") at `level`.
std::string panel_name(const std::string& prefix, std::size_t level, const std::string& band, std::size_t channels);

}  // namespace fhdr::cli
