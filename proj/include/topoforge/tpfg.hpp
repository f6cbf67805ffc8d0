#pragma once

// TPFG tensor container.
//
// A file is a 64-byte header followed by `records` records, each holding
// `channels` planes of rows x cols little-endian float32 values, row-major.
//
//   offset  size  field
//        0     4  magic "TPFG"
//        4     4  u32 format version (1)
//        8     4  u32 channels
//       12     4  u32 rows
//       16     4  u32 cols
//       20     4  u32 records
//       24    40  zero
//
// Single-channel files are the design format (one design per record).

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "topoforge/fem.hpp"

namespace topoforge {

inline constexpr std::uint32_t kTpfgVersion = 1;
inline constexpr std::size_t kTpfgHeaderBytes = 64;

struct TpfgHeader {
  std::uint32_t version = kTpfgVersion;
  std::uint32_t channels = 1;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::uint32_t records = 0;

  std::size_t record_bytes() const { return std::size_t{channels} * rows * cols * sizeof(float); }
  bool operator==(const TpfgHeader&) const = default;
};

std::string encode_header(const TpfgHeader& header);
TpfgHeader decode_header(const std::string& bytes, const std::string& source);

// Little-endian float32 bytes of the planes, in order.
std::string encode_planes(const std::vector<Field>& planes);

// Writes a whole file. Every record must have header.channels planes of the
// header's dimensions; the record count is taken from `records`.
void write_tpfg(const std::filesystem::path& path, std::uint32_t channels, std::uint32_t rows, std::uint32_t cols,
                const std::vector<std::vector<Field>>& records);

TpfgHeader read_tpfg_header(const std::filesystem::path& path);

// Raw bytes of one record (for checksumming) and its decoded planes.
std::string read_tpfg_record_bytes(const std::filesystem::path& path, std::size_t index);
std::vector<Field> read_tpfg_record(const std::filesystem::path& path, std::size_t index);

// Single-channel, single-record design files.
void write_design_file(const std::filesystem::path& path, const Field& design);
Field read_design_file(const std::filesystem::path& path, std::size_t index = 0);

// Rounds every value to float32 precision, as stored on disk.
Field round_to_float(const Field& field);

}  // namespace topoforge
