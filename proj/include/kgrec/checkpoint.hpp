#pragma once

// Binary checkpoint: magic "MKR1", little-endian header (version,
// hyperparameters, side-info flags, counts, vocabularies, matrix directory),
// raw float64 payloads and a trailing CRC-32 of every preceding byte.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "kgrec/mkr.hpp"

namespace kgrec::mkr {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const MkrModel& model);
// Throws VersionMismatch, ChecksumMismatch or IoError.
MkrModel decode_checkpoint(std::string_view bytes);

// Throws IoError when the file cannot be written or read.
void save_checkpoint(const MkrModel& model, const std::filesystem::path& path);
MkrModel load_checkpoint(const std::filesystem::path& path);

// `git describe` of the source tree this library was built from.
std::string_view build_version() noexcept;

}  // namespace kgrec::mkr
