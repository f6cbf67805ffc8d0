#include "topoforge/tpfg.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "topoforge/errors.hpp"

namespace topoforge {

namespace {

void put_u32(std::string& out, std::size_t offset, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out[offset + b] = static_cast<char>((v >> (8 * b)) & 0xFFu);
}

std::uint32_t get_u32(const std::string& in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[offset + b])) << (8 * b);
  return v;
}

}  // namespace

std::string encode_header(const TpfgHeader& h) {
  std::string out(kTpfgHeaderBytes, '\0');
  std::memcpy(out.data(), "TPFG", 4);
  put_u32(out, 4, h.version);
  put_u32(out, 8, h.channels);
  put_u32(out, 12, h.rows);
  put_u32(out, 16, h.cols);
  put_u32(out, 20, h.records);
  return out;
}

TpfgHeader decode_header(const std::string& bytes, const std::string& source) {
  if (bytes.size() < kTpfgHeaderBytes || bytes.compare(0, 4, "TPFG") != 0) {
    throw CorruptionError(source + ": missing TPFG magic");
  }
  TpfgHeader h;
  h.version = get_u32(bytes, 4);
  h.channels = get_u32(bytes, 8);
  h.rows = get_u32(bytes, 12);
  h.cols = get_u32(bytes, 16);
  h.records = get_u32(bytes, 20);
  if (h.version != kTpfgVersion) {
    throw CorruptionError(source + ": unsupported TPFG version " + std::to_string(h.version));
  }
  if (h.channels == 0 || h.rows == 0 || h.cols == 0) throw CorruptionError(source + ": zero-sized TPFG header");
  return h;
}

std::string encode_planes(const std::vector<Field>& planes) {
  std::string out;
  for (const auto& p : planes) {
    const std::size_t start = out.size();
    out.resize(start + static_cast<std::size_t>(p.size()) * 4);
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(p.data()[k]));
      put_u32(out, start + static_cast<std::size_t>(k) * 4, bits);
    }
  }
  return out;
}

void write_tpfg(const std::filesystem::path& path, std::uint32_t channels, std::uint32_t rows, std::uint32_t cols,
                const std::vector<std::vector<Field>>& records) {
  TpfgHeader h{kTpfgVersion, channels, rows, cols, static_cast<std::uint32_t>(records.size())};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << encode_header(h);
  for (const auto& rec : records) {
    if (rec.size() != channels) throw ParameterError("record has " + std::to_string(rec.size()) + " planes");
    for (const auto& p : rec) {
      if (p.rows() != rows || p.cols() != cols) throw ParameterError("plane dimensions differ from the header");
    }
    out << encode_planes(rec);
  }
  out.flush();
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

TpfgHeader read_tpfg_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptionError("cannot open " + path.string());
  std::string bytes(kTpfgHeaderBytes, '\0');
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(kTpfgHeaderBytes)) {
    throw CorruptionError(path.string() + ": truncated header");
  }
  return decode_header(bytes, path.string());
}

std::string read_tpfg_record_bytes(const std::filesystem::path& path, std::size_t index) {
  const TpfgHeader h = read_tpfg_header(path);
  if (index >= h.records) {
    throw std::out_of_range(path.string() + ": record " + std::to_string(index) + " of " + std::to_string(h.records));
  }
  std::ifstream in(path, std::ios::binary);
  in.seekg(static_cast<std::streamoff>(kTpfgHeaderBytes + index * h.record_bytes()));
  std::string bytes(h.record_bytes(), '\0');
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw CorruptionError(path.string() + ": truncated record " + std::to_string(index));
  }
  return bytes;
}

std::vector<Field> read_tpfg_record(const std::filesystem::path& path, std::size_t index) {
  const TpfgHeader h = read_tpfg_header(path);
  const std::string bytes = read_tpfg_record_bytes(path, index);
  std::vector<Field> planes;
  std::size_t offset = 0;
  for (std::uint32_t c = 0; c < h.channels; ++c) {
    Field p(h.rows, h.cols);
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      p.data()[k] = std::bit_cast<float>(get_u32(bytes, offset));
      offset += 4;
    }
    planes.push_back(std::move(p));
  }
  return planes;
}

void write_design_file(const std::filesystem::path& path, const Field& design) {
  write_tpfg(path, 1, static_cast<std::uint32_t>(design.rows()), static_cast<std::uint32_t>(design.cols()),
             {{design}});
}

Field read_design_file(const std::filesystem::path& path, std::size_t index) {
  const TpfgHeader h = read_tpfg_header(path);
  if (h.channels != 1) {
    throw ValidationError(path.string() + " holds " + std::to_string(h.channels) + " channels, expected a design file");
  }
  return read_tpfg_record(path, index).front();
}

Field round_to_float(const Field& field) {
  return field.unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
}

}  // namespace topoforge
